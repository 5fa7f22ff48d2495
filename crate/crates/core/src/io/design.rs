//! Regression design files.
//!
//! CSV with a header `y,<label>,...` followed by one row per observation.
//! Lines starting with `#` are comments; the writer uses them to record the
//! generator, noise level, seed and true coefficients of synthetic data.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::bvs::Design;
use crate::datagen::{Generator, SyntheticDataset};
use crate::error::{Error, Result};
use crate::io::write_atomic;

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

pub fn parse_design(text: &str) -> Result<Design> {
    let mut rows = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = rows.next().ok_or_else(|| parse_err(1, "empty design file"))?;
    let fields: Vec<&str> = header.split(',').map(str::trim).collect();
    if fields.first() != Some(&"y") || fields.len() < 2 {
        return Err(parse_err(hline, "header must be `y,<label>,...` with at least one covariate"));
    }
    let labels: Vec<String> = fields[1..].iter().map(|s| s.to_string()).collect();
    let p = labels.len();
    let mut y = Vec::new();
    let mut x = Vec::new();
    for (line, row) in rows {
        let values = row
            .split(',')
            .map(|f| f.trim().parse::<f64>().map_err(|e| parse_err(line, format!("{f:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != p + 1 {
            return Err(parse_err(line, format!("{} fields, expected {}", values.len(), p + 1)));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(parse_err(line, "non-finite value"));
        }
        y.push(values[0]);
        x.extend_from_slice(&values[1..]);
    }
    let n = y.len();
    if n == 0 {
        return Err(parse_err(hline, "design has no observations"));
    }
    Design::new(labels, DVector::from_vec(y), DMatrix::from_row_slice(n, p, &x))
}

pub fn read_design(path: &Path) -> Result<Design> {
    parse_design(&std::fs::read_to_string(path)?)
}

/// Serializes a design; floats use the shortest round-tripping form.
pub fn design_to_text(design: &Design, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        writeln!(out, "# {c}").expect("string write");
    }
    out.push('y');
    for l in &design.labels {
        out.push(',');
        out.push_str(l);
    }
    out.push('\n');
    for i in 0..design.n() {
        write!(out, "{:?}", design.y[i]).expect("string write");
        for j in 0..design.p() {
            write!(out, ",{:?}", design.x[(i, j)]).expect("string write");
        }
        out.push('\n');
    }
    out
}

pub fn dataset_comments(data: &SyntheticDataset) -> Vec<String> {
    let generator = match data.generator {
        Generator::GeorgeMcculloch => "gm".to_string(),
        Generator::BlockAr { rho } => format!("block-ar rho={rho:?}"),
    };
    let beta: Vec<String> = data.beta_true.iter().map(|b| format!("{b:?}")).collect();
    vec![
        format!("generator={generator} n={} sigma={:?} seed={}", data.n(), data.sigma, data.seed),
        format!("beta_true={}", beta.join(",")),
    ]
}

pub fn write_design(design: &Design, comments: &[String], path: &Path) -> Result<()> {
    write_atomic(path, design_to_text(design, comments).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::gen_george_mcculloch;

    #[test]
    fn round_trip_is_exact() {
        let data = gen_george_mcculloch(30, 2.5, 1).unwrap();
        let text = design_to_text(&data.design(), &dataset_comments(&data));
        assert!(text.starts_with("# generator=gm n=30 sigma=2.5 seed=1\n"));
        assert_eq!(parse_design(&text).unwrap(), data.design());
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_design("").is_err());
        assert!(parse_design("z,a\n1,2\n").is_err());
        assert!(matches!(parse_design("y,a\n1,2\n3\n"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse_design("y,a\n1,x\n"), Err(Error::Parse { line: 2, .. })));
        assert!(parse_design("y,a\n").is_err());
    }
}
