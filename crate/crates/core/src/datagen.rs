//! Synthetic regression designs.
//!
//! Rows are generated one at a time from a single seeded stream (covariates
//! first, then the noise term), so a dataset of `n` rows is the first `n`
//! rows of any larger dataset with the same seed and parameters.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bvs::Design;
use crate::error::{invalid, Result};
use crate::model::default_labels;

pub const GM_BETA: [f64; 15] = [1.5, 0.0, 1.5, 0.0, 1.5, 0.0, 1.5, -1.5, 0.0, 0.0, 1.5, 1.5, 1.5, 0.0, 0.0];
pub const BLOCK_AR_BETA: [f64; 15] = [1.0, -1.0, 0.0, 1.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
pub const BLOCK_AR_BLOCKS: usize = 5;
pub const BLOCK_AR_SIZE: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "generator")]
pub enum Generator {
    GeorgeMcculloch,
    BlockAr { rho: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticDataset {
    pub generator: Generator,
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub beta_true: Vec<f64>,
    pub sigma: f64,
    pub seed: u64,
}

impl SyntheticDataset {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// 0-based indices of the nonzero true coefficients.
    pub fn true_support(&self) -> Vec<usize> {
        self.beta_true.iter().enumerate().filter(|(_, b)| **b != 0.0).map(|(i, _)| i).collect()
    }

    pub fn design(&self) -> Design {
        Design::new(default_labels(self.p()), self.y.clone(), self.x.clone()).expect("consistent dimensions")
    }
}

fn check(n: usize, sigma: f64) -> Result<()> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("sigma = {sigma} must be non-negative")));
    }
    Ok(())
}

/// Loadings `L` with `X_row = L · (Z_0, Z_1, …, Z_15)`, so `Cov(X) = L Lᵀ`.
pub fn george_mcculloch_loadings() -> DMatrix<f64> {
    let mut l = DMatrix::zeros(15, 16);
    let base = |l: &mut DMatrix<f64>, j: usize| {
        l[(j - 1, 0)] = 2.0;
        l[(j - 1, j)] = 1.0;
    };
    for j in [1, 3, 5, 8, 9, 10, 12, 13, 14, 15] {
        base(&mut l, j);
    }
    let combine = |l: &mut DMatrix<f64>, j: usize, parts: &[(usize, f64)]| {
        for &(src, w) in parts {
            let row = l.row(src - 1).into_owned() * w;
            let mut target = l.row_mut(j - 1);
            target += row;
        }
        l[(j - 1, j)] += 0.15;
    };
    combine(&mut l, 2, &[(1, 1.0)]);
    combine(&mut l, 4, &[(3, 1.0)]);
    combine(&mut l, 6, &[(5, 1.0)]);
    combine(&mut l, 7, &[(8, 1.0), (9, 1.0), (10, -1.0)]);
    combine(&mut l, 11, &[(14, 1.0), (15, 1.0), (12, -1.0), (13, -1.0)]);
    l
}

/// The fifteen-variable design with strongly correlated and exactly
/// confounded columns, `y = Xβ + σε`.
pub fn gen_george_mcculloch(n: usize, sigma: f64, seed: u64) -> Result<SyntheticDataset> {
    check(n, sigma)?;
    let loadings = george_mcculloch_loadings();
    let beta = DVector::from_row_slice(&GM_BETA);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::zeros(n, 15);
    let mut y = DVector::zeros(n);
    let mut z = DVector::zeros(16);
    for i in 0..n {
        z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        let row = &loadings * &z;
        x.row_mut(i).copy_from(&row.transpose());
        let eps: f64 = rng.sample(StandardNormal);
        y[i] = row.dot(&beta) + sigma * eps;
    }
    Ok(SyntheticDataset {
        generator: Generator::GeorgeMcculloch,
        y,
        x,
        beta_true: GM_BETA.to_vec(),
        sigma,
        seed,
    })
}

/// `size × size` matrix with entries `rho^|j-k|`.
pub fn ar_block(rho: f64, size: usize) -> DMatrix<f64> {
    DMatrix::from_fn(size, size, |j, k| rho.powi(j.abs_diff(k) as i32))
}

/// Block-diagonal covariance made of five 3×3 AR blocks.
pub fn block_ar_covariance(rho: f64) -> DMatrix<f64> {
    let p = BLOCK_AR_BLOCKS * BLOCK_AR_SIZE;
    let block = ar_block(rho, BLOCK_AR_SIZE);
    let mut a = DMatrix::zeros(p, p);
    for b in 0..BLOCK_AR_BLOCKS {
        a.view_mut((b * BLOCK_AR_SIZE, b * BLOCK_AR_SIZE), (BLOCK_AR_SIZE, BLOCK_AR_SIZE)).copy_from(&block);
    }
    a
}

/// Rows drawn from `N(0, A(ρ))` with `A(ρ)` block diagonal, `y = Xβ + σε`.
pub fn gen_block_ar(n: usize, rho: f64, sigma: f64, seed: u64) -> Result<SyntheticDataset> {
    check(n, sigma)?;
    if !(rho.abs() < 1.0) {
        return Err(invalid(format!("rho = {rho} must satisfy |rho| < 1")));
    }
    let chol = ar_block(rho, BLOCK_AR_SIZE).cholesky().expect("AR block is positive definite").l();
    let p = BLOCK_AR_BLOCKS * BLOCK_AR_SIZE;
    let beta = DVector::from_row_slice(&BLOCK_AR_BETA);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::zeros(n, p);
    let mut y = DVector::zeros(n);
    let mut z = DVector::zeros(BLOCK_AR_SIZE);
    let mut row = DVector::zeros(p);
    for i in 0..n {
        for b in 0..BLOCK_AR_BLOCKS {
            z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
            row.rows_mut(b * BLOCK_AR_SIZE, BLOCK_AR_SIZE).copy_from(&(&chol * &z));
        }
        x.row_mut(i).copy_from(&row.transpose());
        let eps: f64 = rng.sample(StandardNormal);
        y[i] = row.dot(&beta) + sigma * eps;
    }
    Ok(SyntheticDataset {
        generator: Generator::BlockAr { rho },
        y,
        x,
        beta_true: BLOCK_AR_BETA.to_vec(),
        sigma,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empirical_cov(x: &DMatrix<f64>) -> DMatrix<f64> {
        let n = x.nrows() as f64;
        let mut c = x.clone();
        for mut col in c.column_iter_mut() {
            let m = col.mean();
            col.apply(|v| *v -= m);
        }
        c.tr_mul(&c) / (n - 1.0)
    }

    #[test]
    fn true_supports() {
        let gm = gen_george_mcculloch(5, 2.5, 1).unwrap();
        let one_based: Vec<usize> = gm.true_support().iter().map(|i| i + 1).collect();
        assert_eq!(one_based, vec![1, 3, 5, 7, 8, 11, 12, 13]);
        let ar = gen_block_ar(5, 0.9, 1.0, 1).unwrap();
        let one_based: Vec<usize> = ar.true_support().iter().map(|i| i + 1).collect();
        assert_eq!(one_based, vec![1, 2, 4, 7, 11]);
    }

    #[test]
    fn gm_population_correlation_of_first_pair() {
        let cov = george_mcculloch_loadings() * george_mcculloch_loadings().transpose();
        assert_eq!(cov[(0, 0)], 5.0);
        assert!((cov[(1, 1)] - 5.0225).abs() < 1e-12);
        assert_eq!(cov[(0, 1)], 5.0);
        let r = cov[(0, 1)] / (cov[(0, 0)] * cov[(1, 1)]).sqrt();
        assert!((r - 5.0 / 25.1125f64.sqrt()).abs() < 1e-12);
        assert!((r - 0.997757).abs() < 1e-6);
    }

    #[test]
    fn gm_covariance_converges() {
        let d = gen_george_mcculloch(50_000, 2.5, 3).unwrap();
        let l = george_mcculloch_loadings();
        let want = &l * l.transpose();
        let got = empirical_cov(&d.x);
        // entries reach ~20 in size, so compare relative to the scale of each pair
        for i in 0..15 {
            for j in 0..15 {
                let scale = (want[(i, i)] * want[(j, j)]).sqrt();
                assert!((got[(i, j)] - want[(i, j)]).abs() / scale < 0.05, "({i},{j})");
            }
        }
    }

    #[test]
    fn noiseless_response_is_exact() {
        let d = gen_george_mcculloch(50, 0.0, 4).unwrap();
        let beta = DVector::from_row_slice(&GM_BETA);
        let fitted = &d.x * &beta;
        for i in 0..50 {
            assert!((fitted[i] - d.y[i]).abs() < 1e-12);
        }
        let d = gen_block_ar(50, 0.5, 0.0, 4).unwrap();
        let fitted = &d.x * DVector::from_row_slice(&BLOCK_AR_BETA);
        assert!((fitted - &d.y).amax() < 1e-12);
    }

    #[test]
    fn ar_block_entries() {
        let a = ar_block(0.9, 3);
        assert_eq!(a[(0, 0)], 1.0);
        assert_eq!(a[(0, 1)], 0.9);
        assert!((a[(0, 2)] - 0.81).abs() < 1e-15);
        assert!(a.clone().cholesky().is_some());
        assert_eq!(ar_block(0.0, 3), DMatrix::identity(3, 3));
    }

    #[test]
    fn block_ar_covariance_converges() {
        let n = 50_000;
        let d = gen_block_ar(n, 0.9, 1.0, 5).unwrap();
        let want = block_ar_covariance(0.9);
        let got = empirical_cov(&d.x);
        assert!((&got - &want).amax() < 0.05);
        let c = got;
        for i in 0..15 {
            for j in 0..15 {
                if i / 3 != j / 3 {
                    let r = c[(i, j)] / (c[(i, i)] * c[(j, j)]).sqrt();
                    assert!(r.abs() < 3.0 / (n as f64).sqrt(), "({i},{j}) r = {r}");
                }
            }
        }
    }

    #[test]
    fn seeded_and_prefix_stable() {
        let a = gen_block_ar(640, 0.9, 1.0, 11).unwrap();
        let b = gen_block_ar(640, 0.9, 1.0, 11).unwrap();
        assert_eq!(a, b);
        let small = gen_block_ar(80, 0.9, 1.0, 11).unwrap();
        assert_eq!(small.x, a.x.rows(0, 80).into_owned());
        assert_eq!(small.y, a.y.rows(0, 80).into_owned());
        assert_ne!(gen_george_mcculloch(10, 1.0, 1).unwrap(), gen_george_mcculloch(10, 1.0, 2).unwrap());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(gen_george_mcculloch(0, 1.0, 1).is_err());
        assert!(gen_block_ar(10, 1.0, 1.0, 1).is_err());
        assert!(gen_block_ar(10, 0.5, -1.0, 1).is_err());
    }
}
