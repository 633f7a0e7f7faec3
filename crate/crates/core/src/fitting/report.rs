//! Plain-text fit reports.

use std::io::Write;

use super::optimize::OptimResult;
use super::params::{NuggetParam, ParamLayout};
use crate::covariance::HarmonicCovariance;
use crate::error::Result;

/// Everything a fit report lists.
#[derive(Clone, Debug)]
pub struct FitReport<'a> {
    pub method: &'a str,
    /// Name of the objective in the trace, e.g. `criterion` or `loglik`.
    pub objective: &'a str,
    pub value: f64,
    pub parameters: Vec<(String, f64)>,
    pub frozen: &'a [String],
    pub optim: Option<&'a OptimResult>,
    /// Extra `key value` lines.
    pub extra: Vec<(String, String)>,
}

pub fn write_report<W: Write>(mut w: W, r: &FitReport<'_>) -> Result<()> {
    writeln!(w, "method\t{}", r.method)?;
    writeln!(w, "{}\t{:e}", r.objective, r.value)?;
    for (k, v) in &r.extra {
        writeln!(w, "{k}\t{v}")?;
    }
    if let Some(o) = r.optim {
        writeln!(w, "status\t{}", o.status.as_str())?;
        writeln!(w, "iterations\t{}", o.iterations)?;
        writeln!(w, "gradient_max_abs\t{:e}", o.grad_norm)?;
    }
    writeln!(w, "frozen\t{}", if r.frozen.is_empty() { "none".to_string() } else { r.frozen.join(",") })?;
    writeln!(w, "[parameters]")?;
    for (name, v) in &r.parameters {
        writeln!(w, "{name}\t{v:e}")?;
    }
    if let Some(o) = r.optim {
        writeln!(w, "[trace]")?;
        for (i, v) in o.trace.iter().enumerate() {
            writeln!(w, "{i}\t{v:e}")?;
        }
    }
    Ok(())
}

/// Factor entries of a harmonic model by name, then the nugget.
pub fn harmonic_parameters(model: &HarmonicCovariance) -> Vec<(String, f64)> {
    let layout = ParamLayout::new(model.truncation(), NuggetParam::Log);
    let p = layout.to_params(model);
    let nug = layout.nugget_index();
    let mut out: Vec<(String, f64)> = (0..p.len()).filter(|&i| i != nug).map(|i| (layout.name(i), p[i])).collect();
    out.push(("nugget".into(), model.nugget()));
    out
}
