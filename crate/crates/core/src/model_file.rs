//! Text serialization of covariance models.
//!
//! ```text
//! kind harmonic
//! truncation 2
//! nugget 1e-3
//! A 0 0 0 1.5e-2 0e0
//! A 1 1 0 -3e-3 4e-4
//! ...
//! ```
//!
//! `A m row col re im` lines list every lower-triangular entry of `A_m`
//! (0-based row/col within the block). Columns are sign-canonicalized on
//! write. Numbers use shortest round-trip formatting, so finite doubles
//! survive a write/read cycle bit for bit. An exponential model is written as
//! `kind exp-chordal` followed by `theta1`, `theta2` and `nugget` lines. Lines
//! starting with `#` are ignored.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::covariance::{CovarianceModel, ExpChordalModel, HarmonicCovariance};
use crate::error::{invalid, Error, Result};
use crate::linalg::C64;

pub fn write_model<W: Write>(mut w: W, model: &CovarianceModel) -> Result<()> {
    match model {
        CovarianceModel::Harmonic(h) => {
            let h = h.canonicalize();
            writeln!(w, "kind harmonic")?;
            writeln!(w, "truncation {}", h.truncation())?;
            writeln!(w, "nugget {:e}", h.nugget())?;
            for (m, a) in h.factors().iter().enumerate() {
                for i in 0..a.nrows() {
                    for j in 0..=i {
                        let z = a[(i, j)];
                        writeln!(w, "A {m} {i} {j} {:e} {:e}", z.re, z.im)?;
                    }
                }
            }
        }
        CovarianceModel::ExpChordal(e) => {
            writeln!(w, "kind exp-chordal")?;
            writeln!(w, "theta1 {:e}", e.theta1)?;
            writeln!(w, "theta2 {:e}", e.theta2)?;
            writeln!(w, "nugget {:e}", e.nugget)?;
        }
    }
    Ok(())
}

pub fn model_to_string(model: &CovarianceModel) -> String {
    let mut buf = Vec::new();
    write_model(&mut buf, model).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

fn perr(row: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        row,
        message: message.into(),
    }
}

fn num(row: usize, s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| perr(row, format!("cannot parse `{s}` as a number")))
}

fn int(row: usize, s: &str) -> Result<usize> {
    s.parse::<usize>()
        .map_err(|_| perr(row, format!("cannot parse `{s}` as an index")))
}

pub fn read_model<R: BufRead>(reader: R) -> Result<CovarianceModel> {
    let mut kind: Option<String> = None;
    let mut truncation: Option<usize> = None;
    let mut nugget: Option<f64> = None;
    let mut theta1: Option<f64> = None;
    let mut theta2: Option<f64> = None;
    let mut entries: Vec<(usize, usize, usize, usize, C64)> = Vec::new();

    for (i, line) in reader.lines().enumerate() {
        let row = i + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        match (f[0], f.len()) {
            ("kind", 2) => kind = Some(f[1].to_string()),
            ("truncation", 2) => truncation = Some(int(row, f[1])?),
            ("nugget", 2) => nugget = Some(num(row, f[1])?),
            ("theta1", 2) => theta1 = Some(num(row, f[1])?),
            ("theta2", 2) => theta2 = Some(num(row, f[1])?),
            ("A", 6) => entries.push((
                row,
                int(row, f[1])?,
                int(row, f[2])?,
                int(row, f[3])?,
                C64::new(num(row, f[4])?, num(row, f[5])?),
            )),
            _ => return Err(perr(row, format!("unrecognized line `{line}`"))),
        }
    }

    let missing = |what: &str| invalid(format!("model file lacks a `{what}` line"));
    let nugget = nugget.ok_or_else(|| missing("nugget"))?;
    match kind.as_deref() {
        Some("harmonic") => {
            let n_t = truncation.ok_or_else(|| missing("truncation"))?;
            let mut factors: Vec<DMatrix<C64>> = (0..=n_t)
                .map(|m| DMatrix::zeros(n_t + 1 - m, n_t + 1 - m))
                .collect();
            for (row, m, r, c, z) in entries {
                if m > n_t || r > n_t - m || c > r {
                    return Err(perr(row, format!("entry ({m}, {r}, {c}) outside the lower triangle")));
                }
                factors[m][(r, c)] = z;
            }
            Ok(CovarianceModel::Harmonic(HarmonicCovariance::new(
                n_t, factors, nugget,
            )?))
        }
        Some("exp-chordal") => Ok(CovarianceModel::ExpChordal(ExpChordalModel::new(
            theta1.ok_or_else(|| missing("theta1"))?,
            theta2.ok_or_else(|| missing("theta2"))?,
            nugget,
        )?)),
        Some(other) => Err(invalid(format!("unknown model kind `{other}`"))),
        None => Err(missing("kind")),
    }
}

pub fn model_from_str(s: &str) -> Result<CovarianceModel> {
    read_model(s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::tests::random_model;

    #[test]
    fn harmonic_round_trip_is_bit_exact() {
        for seed in 0..5 {
            let h = random_model(4, 1e-3 * (seed as f64 + 1.0) / 3.0, seed).canonicalize();
            let m = CovarianceModel::Harmonic(h);
            let back = model_from_str(&model_to_string(&m)).unwrap();
            assert_eq!(back, m);
        }
    }

    #[test]
    fn canonicalized_on_write() {
        let h = random_model(3, 0.1, 11);
        let back = model_from_str(&model_to_string(&CovarianceModel::Harmonic(h.clone()))).unwrap();
        match back {
            CovarianceModel::Harmonic(b) => {
                assert!(b.factors().iter().all(|a| a.diagonal().iter().all(|z| z.re >= 0.0)));
                assert_eq!(b.blocks().len(), h.blocks().len());
            }
            _ => panic!("kind changed"),
        }
    }

    #[test]
    fn exp_round_trip() {
        let e = CovarianceModel::ExpChordal(ExpChordalModel::new(0.1 + 0.2, 1.0 / 3.0, 7e-300).unwrap());
        assert_eq!(model_from_str(&model_to_string(&e)).unwrap(), e);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(model_from_str("kind harmonic\nnugget 1\n").is_err());
        let err = model_from_str("kind harmonic\ntruncation 1\nnugget 0\nA 0 0 1 1 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { row: 4, .. }));
        assert!(model_from_str("kind harmonic\ntruncation 0\nnugget x\n").is_err());
        assert!(model_from_str("kind cubic\nnugget 0\n").is_err());
    }
}
