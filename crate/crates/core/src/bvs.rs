//! Spike-and-slab variable selection for linear regression.
//!
//! Prior: flat intercept, `p(σ²) ∝ 1/σ²`, `β_γ | σ² ~ N(0, g σ² I)`,
//! `γ_i ~ Bernoulli(π)` independently, `π ~ Beta(1, (p - p0)/p0)` and
//! `g ~ Half-Cauchy(scale)`. The intercept, coefficients and variance are
//! integrated out analytically; `γ` moves by Add–Delete–Swap Metropolis–
//! Hastings, `π` by its conjugate Beta update and `log g` by a random walk.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};
use crate::model::{default_labels, Model, SampleTrace};

/// Response vector and candidate design matrix (without intercept column).
#[derive(Clone, Debug, PartialEq)]
pub struct Design {
    pub labels: Vec<String>,
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
}

impl Design {
    pub fn new(labels: Vec<String>, y: DVector<f64>, x: DMatrix<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(invalid(format!("y has {} rows but X has {}", y.len(), x.nrows())));
        }
        if labels.len() != x.ncols() {
            return Err(invalid(format!("{} labels for {} columns", labels.len(), x.ncols())));
        }
        Ok(Design { labels, y, x })
    }

    pub fn unlabelled(y: DVector<f64>, x: DMatrix<f64>) -> Result<Self> {
        let labels = default_labels(x.ncols());
        Design::new(labels, y, x)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// The first `n` observations.
    pub fn head(&self, n: usize) -> Result<Design> {
        if n == 0 || n > self.n() {
            return Err(invalid(format!("cannot take {n} of {} rows", self.n())));
        }
        Design::new(self.labels.clone(), self.y.rows(0, n).into_owned(), self.x.rows(0, n).into_owned())
    }
}

/// Sufficient statistics of the centered data, shared by every model.
#[derive(Clone, Debug)]
pub struct LinearModel {
    n: usize,
    p: usize,
    /// Centered `y'y`.
    yty: f64,
    /// Centered `X'y`.
    xty: DVector<f64>,
    /// Centered Gram matrix `X'X`.
    xtx: DMatrix<f64>,
    /// `-½ log n + log Γ((n-1)/2)`, common to every model.
    constant: f64,
}

impl LinearModel {
    pub fn new(design: &Design) -> Result<Self> {
        let n = design.n();
        if n < 2 {
            return Err(invalid("at least two observations are needed"));
        }
        let ybar = design.y.mean();
        let yc = design.y.map(|v| v - ybar);
        let mut xc = design.x.clone();
        for mut col in xc.column_iter_mut() {
            let mean = col.mean();
            col.apply(|v| *v -= mean);
        }
        let m = (n as f64 - 1.0) / 2.0;
        Ok(LinearModel {
            n,
            p: design.p(),
            yty: yc.dot(&yc),
            xty: xc.tr_mul(&yc),
            xtx: xc.tr_mul(&xc),
            constant: -0.5 * (n as f64).ln() + ln_gamma(m),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// `log p(y | γ, g)` with intercept, coefficients and variance integrated out:
    /// `-½ log n + log Γ(m) - m log(π S) - ½ log|I + g X_γ'X_γ|`, `m = (n-1)/2`,
    /// `S = y'y - y'X_γ (X_γ'X_γ + I/g)⁻¹ X_γ'y` on centered data.
    pub fn log_marginal(&self, gamma: &Model, g: f64) -> Result<f64> {
        if gamma.len() != self.p {
            return Err(invalid(format!("model has {} bits, design has {} columns", gamma.len(), self.p)));
        }
        if !(g > 0.0 && g.is_finite()) {
            return Err(invalid(format!("slab variance g = {g} must be positive")));
        }
        let idx: Vec<usize> = gamma.ones().collect();
        let k = idx.len();
        let (s, log_det) = if k == 0 {
            (self.yty, 0.0)
        } else {
            let a = DMatrix::from_fn(k, k, |r, c| self.xtx[(idx[r], idx[c])] + if r == c { 1.0 / g } else { 0.0 });
            let chol = a
                .cholesky()
                .ok_or_else(|| Error::Singular(format!("X'X + I/g is not positive definite for {gamma}")))?;
            let l = chol.l();
            let b = DVector::from_iterator(k, idx.iter().map(|&i| self.xty[i]));
            let v = l
                .solve_lower_triangular(&b)
                .ok_or_else(|| Error::Singular(format!("triangular solve failed for {gamma}")))?;
            let log_det_a: f64 = (0..k).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0;
            (self.yty - v.dot(&v), k as f64 * g.ln() + log_det_a)
        };
        if !(s > 0.0) {
            return Err(Error::Singular(format!("non-positive residual sum of squares for {gamma}")));
        }
        let m = (self.n as f64 - 1.0) / 2.0;
        Ok(self.constant - m * (std::f64::consts::PI * s).ln() - 0.5 * log_det)
    }

    /// [`LinearModel::log_marginal`] with singular models mapped to `-∞`.
    pub fn log_marginal_or_neg_inf(&self, gamma: &Model, g: f64) -> f64 {
        self.log_marginal(gamma, g).unwrap_or(f64::NEG_INFINITY)
    }
}

/// `log p(y | γ, g)` computed from scratch.
pub fn log_marginal_likelihood(design: &Design, gamma: &Model, g: f64) -> Result<f64> {
    LinearModel::new(design)?.log_marginal(gamma, g)
}

/// A hyperparameter either held fixed or learned by the sampler.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hyper {
    Fixed(f64),
    Learn,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoveProbs {
    pub add: f64,
    pub delete: f64,
    pub swap: f64,
}

impl Default for MoveProbs {
    fn default() -> Self {
        MoveProbs {
            add: 0.4,
            delete: 0.4,
            swap: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearBvsConfig {
    /// Prior mean model size.
    pub p0: f64,
    pub g: Hyper,
    pub pi: Hyper,
    /// Number of kept draws.
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub move_probs: MoveProbs,
    pub half_cauchy_scale: f64,
    /// Starting value of `g` when it is learned.
    pub initial_g: f64,
    /// Target acceptance rate for the `log g` random walk during burn-in.
    pub g_target_acceptance: f64,
}

impl LinearBvsConfig {
    pub fn new(p0: f64) -> Self {
        LinearBvsConfig {
            p0,
            g: Hyper::Learn,
            pi: Hyper::Learn,
            iterations: 1000,
            burn_in: 1000,
            thin: 1,
            seed: 0,
            move_probs: MoveProbs::default(),
            half_cauchy_scale: 1.0,
            initial_g: 1.0,
            g_target_acceptance: 0.3,
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if p == 0 {
            return Err(invalid("the design has no candidate variables"));
        }
        if !(self.p0 > 0.0 && self.p0 < p as f64) {
            return Err(invalid(format!("p0 = {} must lie in (0, {p})", self.p0)));
        }
        if self.thin == 0 || self.iterations == 0 {
            return Err(invalid("iterations and thin must be at least 1"));
        }
        let mp = self.move_probs;
        if [mp.add, mp.delete, mp.swap].iter().any(|&q| !(q >= 0.0)) || (mp.add + mp.delete + mp.swap - 1.0).abs() > 1e-12 {
            return Err(invalid("move probabilities must be non-negative and sum to 1"));
        }
        if let Hyper::Fixed(g) = self.g {
            if !(g > 0.0 && g.is_finite()) {
                return Err(invalid(format!("fixed g = {g} must be positive")));
            }
        }
        if let Hyper::Fixed(pi) = self.pi {
            if !(0.0..=1.0).contains(&pi) {
                return Err(invalid(format!("fixed pi = {pi} must lie in [0, 1]")));
            }
        }
        if !(self.half_cauchy_scale > 0.0) || !(self.initial_g > 0.0) {
            return Err(invalid("half-Cauchy scale and initial g must be positive"));
        }
        Ok(())
    }

    /// Second Beta parameter of the prior on π.
    pub fn beta_b(&self, p: usize) -> f64 {
        (p as f64 - self.p0) / self.p0
    }
}

/// Current position of the chain. `log_ml` is always `log p(y | gamma, g)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplerState {
    pub gamma: Model,
    pub pi: f64,
    pub g: f64,
    pub log_ml: f64,
    /// Log of the random-walk step size for `log g`.
    pub log_g_step: f64,
}

impl SamplerState {
    pub fn new(model: &LinearModel, gamma: Model, pi: f64, g: f64) -> Result<Self> {
        let log_ml = model.log_marginal(&gamma, g)?;
        Ok(SamplerState {
            gamma,
            pi,
            g,
            log_ml,
            log_g_step: 0.0,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MoveKind {
    Add,
    Delete,
    Swap,
}

/// What one Add–Delete–Swap step did.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MoveOutcome {
    pub kind: MoveKind,
    /// False when the move was impossible from the current state.
    pub proposed: bool,
    pub accepted: bool,
    pub log_prior_ratio: f64,
    pub log_proposal_ratio: f64,
    pub log_acceptance: f64,
}

/// `Δk · log(π / (1 - π))` without forming `0 · ∞`.
fn log_prior_ratio(delta_k: i32, pi: f64) -> f64 {
    if delta_k == 0 {
        0.0
    } else {
        delta_k as f64 * (pi.ln() - (1.0 - pi).ln())
    }
}

fn accept<R: Rng + ?Sized>(log_acceptance: f64, rng: &mut R) -> bool {
    if log_acceptance.is_nan() {
        false
    } else if log_acceptance >= 0.0 {
        true
    } else {
        rng.random::<f64>().ln() < log_acceptance
    }
}

/// One Add–Delete–Swap Metropolis–Hastings update of `γ` at fixed `(π, g)`.
pub fn ads_step<R: Rng + ?Sized>(
    state: &mut SamplerState,
    model: &LinearModel,
    probs: &MoveProbs,
    rng: &mut R,
) -> MoveOutcome {
    let p = state.gamma.len();
    let k = state.gamma.count_ones();
    let u: f64 = rng.random();
    let kind = if u < probs.add {
        MoveKind::Add
    } else if u < probs.add + probs.delete {
        MoveKind::Delete
    } else {
        MoveKind::Swap
    };
    let rejected = MoveOutcome {
        kind,
        proposed: false,
        accepted: false,
        log_prior_ratio: 0.0,
        log_proposal_ratio: 0.0,
        log_acceptance: f64::NEG_INFINITY,
    };

    let mut proposal = state.gamma.clone();
    let (delta_k, log_q) = match kind {
        MoveKind::Add => {
            if k == p {
                return rejected;
            }
            let j = state.gamma.zeros_iter().nth(rng.random_range(0..p - k)).expect("excluded variable");
            proposal.set(j, true);
            let forward = probs.add / (p - k) as f64;
            let reverse = probs.delete / (k + 1) as f64;
            (1, reverse.ln() - forward.ln())
        }
        MoveKind::Delete => {
            if k == 0 {
                return rejected;
            }
            let j = state.gamma.ones().nth(rng.random_range(0..k)).expect("included variable");
            proposal.set(j, false);
            let forward = probs.delete / k as f64;
            let reverse = probs.add / (p - k + 1) as f64;
            (-1, reverse.ln() - forward.ln())
        }
        MoveKind::Swap => {
            if k == 0 || k == p {
                return rejected;
            }
            let out = state.gamma.ones().nth(rng.random_range(0..k)).expect("included variable");
            let inn = state.gamma.zeros_iter().nth(rng.random_range(0..p - k)).expect("excluded variable");
            proposal.set(out, false);
            proposal.set(inn, true);
            (0, 0.0)
        }
    };

    let log_prior = log_prior_ratio(delta_k, state.pi);
    let new_log_ml = model.log_marginal_or_neg_inf(&proposal, state.g);
    let log_acceptance = if new_log_ml == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        new_log_ml - state.log_ml + log_prior + log_q
    };
    let accepted = accept(log_acceptance, rng);
    if accepted {
        state.gamma = proposal;
        state.log_ml = new_log_ml;
    }
    MoveOutcome {
        kind,
        proposed: true,
        accepted,
        log_prior_ratio: log_prior,
        log_proposal_ratio: log_q,
        log_acceptance,
    }
}

/// Conjugate update `π | γ ~ Beta(1 + |γ|, b + p - |γ|)` with `b = (p - p0)/p0`.
pub fn gibbs_pi<R: Rng + ?Sized>(state: &mut SamplerState, p0: f64, rng: &mut R) -> Result<()> {
    let (a, b) = pi_posterior_params(&state.gamma, p0);
    let beta = Beta::new(a, b).map_err(|e| invalid(format!("Beta({a}, {b}): {e}")))?;
    state.pi = beta.sample(rng);
    Ok(())
}

/// Parameters of the Beta full conditional of π.
pub fn pi_posterior_params(gamma: &Model, p0: f64) -> (f64, f64) {
    let p = gamma.len() as f64;
    let k = gamma.count_ones() as f64;
    (1.0 + k, (p - p0) / p0 + p - k)
}

/// Log density of the Half-Cauchy distribution.
pub fn half_cauchy_log_pdf(g: f64, scale: f64) -> f64 {
    if g < 0.0 {
        f64::NEG_INFINITY
    } else {
        (2.0 / (std::f64::consts::PI * scale)).ln() - (1.0 + (g / scale).powi(2)).ln()
    }
}

/// Adaptation state for the `log g` random walk.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GWalk {
    pub proposed: u64,
    pub accepted: u64,
}

/// Random-walk Metropolis update of `log g` targeting
/// `p(y | γ, g) · HalfCauchy(g)`. When `adapt_at` is `Some(t)` the step size
/// moves toward `target` acceptance with a decaying gain; otherwise it is
/// left untouched.
#[allow(clippy::too_many_arguments)]
pub fn update_g<R: Rng + ?Sized>(
    state: &mut SamplerState,
    model: &LinearModel,
    scale: f64,
    target: f64,
    adapt_at: Option<u64>,
    walk: &mut GWalk,
    rng: &mut R,
) -> bool {
    let z: f64 = rng.sample(StandardNormal);
    let g_new = state.g * (state.log_g_step.exp() * z).exp();
    let new_log_ml = if g_new > 0.0 && g_new.is_finite() {
        model.log_marginal_or_neg_inf(&state.gamma, g_new)
    } else {
        f64::NEG_INFINITY
    };
    let log_acceptance = if new_log_ml == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        // the walk is symmetric in log g, so the Jacobian g'/g enters the ratio
        new_log_ml + half_cauchy_log_pdf(g_new, scale) - state.log_ml - half_cauchy_log_pdf(state.g, scale)
            + g_new.ln()
            - state.g.ln()
    };
    let accepted = accept(log_acceptance, rng);
    if accepted {
        state.g = g_new;
        state.log_ml = new_log_ml;
    }
    walk.proposed += 1;
    walk.accepted += u64::from(accepted);
    if let Some(t) = adapt_at {
        let rate = (t as f64 + 1.0).powf(-0.6);
        state.log_g_step = (state.log_g_step + rate * (f64::from(u8::from(accepted)) - target)).clamp(-10.0, 5.0);
    }
    accepted
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ChainStats {
    pub proposed: [u64; 3],
    pub accepted: [u64; 3],
    /// Acceptance counts of the `log g` walk after burn-in.
    pub g_walk: GWalk,
    pub final_state: Option<SamplerState>,
}

impl ChainStats {
    pub fn g_acceptance_rate(&self) -> f64 {
        self.g_walk.accepted as f64 / self.g_walk.proposed.max(1) as f64
    }
}

fn chain_rng(seed: u64, chain: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain);
    rng
}

/// Runs one chain: `burn_in` iterations, then `iterations × thin` more,
/// keeping every `thin`-th `γ`. Deterministic given the seed.
pub fn run_chain(design: &Design, config: &LinearBvsConfig) -> Result<SampleTrace> {
    run_chain_with_stats(design, config, 0).map(|(t, _)| t)
}

pub fn run_chain_with_stats(design: &Design, config: &LinearBvsConfig, chain: u64) -> Result<(SampleTrace, ChainStats)> {
    let model = LinearModel::new(design)?;
    let p = model.p();
    config.validate(p)?;
    let mut rng = chain_rng(config.seed, chain);
    let pi0 = match config.pi {
        Hyper::Fixed(v) => v,
        Hyper::Learn => config.p0 / p as f64,
    };
    let g0 = match config.g {
        Hyper::Fixed(v) => v,
        Hyper::Learn => config.initial_g,
    };
    let mut state = SamplerState::new(&model, Model::zeros(p), pi0, g0)?;
    let mut stats = ChainStats::default();
    let mut burn_walk = GWalk::default();
    let mut kept = Vec::with_capacity(config.iterations);
    let total = config.burn_in + config.iterations * config.thin;
    for t in 0..total {
        let outcome = ads_step(&mut state, &model, &config.move_probs, &mut rng);
        let slot = outcome.kind as usize;
        stats.proposed[slot] += u64::from(outcome.proposed);
        stats.accepted[slot] += u64::from(outcome.accepted);
        if config.pi == Hyper::Learn {
            gibbs_pi(&mut state, config.p0, &mut rng)?;
        }
        if config.g == Hyper::Learn {
            if t < config.burn_in {
                update_g(&mut state, &model, config.half_cauchy_scale, config.g_target_acceptance, Some(t as u64), &mut burn_walk, &mut rng);
            } else {
                update_g(&mut state, &model, config.half_cauchy_scale, config.g_target_acceptance, None, &mut stats.g_walk, &mut rng);
            }
        }
        if t >= config.burn_in && (t - config.burn_in + 1) % config.thin == 0 {
            kept.push(state.gamma.clone());
        }
    }
    stats.final_state = Some(state);
    Ok((SampleTrace::new(design.labels.clone(), kept)?, stats))
}

/// Independent chains on streams `0..chains` of the seed, concatenated in
/// chain order.
pub fn run_chains(design: &Design, config: &LinearBvsConfig, chains: usize) -> Result<SampleTrace> {
    if chains == 0 {
        return Err(invalid("at least one chain is required"));
    }
    let traces = (0..chains as u64)
        .into_par_iter()
        .map(|c| run_chain_with_stats(design, config, c).map(|(t, _)| t))
        .collect::<Result<Vec<_>>>()?;
    SampleTrace::concat(traces)
}
