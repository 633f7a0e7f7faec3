use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use axisym::fitting::{
    harmonic_parameters, loglik_dense, loglik_lowrank, mle_exp_nugget, mle_harmonic, mle_white_noise,
    white_noise_loglik, wls_fit_linear, wls_fit_psd, wls_initial_model, write_gamma_grid, write_report, FitReport,
    OptimConfig, WlsProblem,
};
use axisym::kriging::{
    krige_residuals, level25_product, read_targets, write_predictions, write_product, GridSpec, ProductConfig,
};
use axisym::mean::{fit_mean_zonal, read_mean_model, write_mean_model, write_mean_report};
use axisym::model_file::{read_model, write_model};
use axisym::observation::{group_orbits, read_observations, write_observations, ValueColumn};
use axisym::simulate::{simulate_swaths, SwathConfig};
use axisym::variogram::{read_variogram, write_variogram};
use axisym::{
    bin_average, bin_variogram, cross_orbit_variogram, fit_mean, residuals, CovarianceModel, HarmonicCovariance,
    MeanModel, Observation, PairConfig, SpatialCovariance,
};

use crate::{Command, CmdResult, Ctx, Failure, MleKind, OptimArgs, PairArgs, Unit};

pub(crate) fn dispatch(cmd: Command, ctx: &mut Ctx) -> CmdResult {
    match cmd {
        Command::Ingest { input, out, unit } => ingest(ctx, &input, out, unit),
        Command::MeanFit { obs, out, zonal } => mean_fit(ctx, &obs, &out, zonal),
        Command::Residuals { obs, mean, out } => residual_cmd(ctx, &obs, &mean, out),
        Command::Variogram { obs, out, lag, pairs } => variogram(ctx, &obs, out, lag, &pairs),
        Command::WlsFit { n, variogram, out, init, report, emit_gamma_grid, optim } => {
            wls_fit(ctx, n as usize, &variogram, &out, init, report, emit_gamma_grid, &optim)
        }
        Command::Loglik { model, obs, zero_a0_first_column } => loglik(ctx, &model, &obs, zero_a0_first_column),
        Command::Mle { obs, kind, n, init, freeze_a0_first_column, out, report, optim } => {
            mle(ctx, &obs, kind, n.map(usize::from), init, freeze_a0_first_column, &out, report, &optim)
        }
        Command::Krige { model, obs, targets, out } => krige(ctx, &model, &obs, &targets, out),
        Command::Level25 { model, mean, obs, out, lat_min, lat_max, lat_step, lon_step, window_lo, window_hi, include } => {
            if lat_min >= lat_max {
                return Err(Failure::Usage("--lat-min must be below --lat-max".into()));
            }
            if window_lo >= window_hi {
                return Err(Failure::Usage("--window-lo must be below --window-hi".into()));
            }
            let cfg = ProductConfig {
                grid: GridSpec { lat_min, lat_max, lat_step, lon_step },
                lat_window: (window_lo, window_hi),
                include,
            };
            level25(ctx, &model, &mean, &obs, out, &cfg)
        }
        Command::Simulate { model, out, orbits, seed, shared, mean, swath } => {
            let cfg = SwathConfig {
                scans: swath.scans as usize,
                cross_track: swath.cross_track as usize,
                inclination_deg: swath.inclination,
                half_width_deg: swath.half_width,
                ..SwathConfig::default()
            };
            simulate(ctx, &model, out, orbits, seed, !shared, mean, &cfg)
        }
        Command::Verify { seed } => crate::verify::run(ctx, seed),
    }
}

fn data_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Data(format!("{}: {e}", path.display()))
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).map_err(|e| data_err(path, e))
}

/// An output file checked before any work is done; `None` or `-` is the
/// output stream.
struct Dest(Option<PathBuf>);

impl Dest {
    fn new(path: Option<PathBuf>) -> Result<Self, Failure> {
        let path = path.filter(|p| p.as_os_str() != "-");
        if let Some(p) = &path {
            let parent = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
            if !parent.is_dir() {
                return Err(Failure::Data(format!("{}: output directory does not exist", p.display())));
            }
        }
        Ok(Dest(path))
    }

    fn file(path: &Path) -> Result<Self, Failure> {
        Self::new(Some(path.to_path_buf()))
    }

    fn write(&self, ctx: &mut Ctx, f: impl FnOnce(&mut dyn Write) -> axisym::Result<()>) -> CmdResult {
        match &self.0 {
            None => f(&mut ctx.out).map_err(|e| Failure::Data(e.to_string())),
            Some(p) => {
                let file = File::create(p).map_err(|e| data_err(p, e))?;
                let mut w = BufWriter::new(file);
                f(&mut w).map_err(|e| data_err(p, e))?;
                w.flush().map_err(|e| data_err(p, e))
            }
        }
    }
}

fn load_observations(path: &Path) -> Result<(Vec<Observation>, ValueColumn), Failure> {
    let (obs, unit) = read_observations(open(path)?).map_err(|e| data_err(path, e))?;
    if obs.is_empty() {
        return Err(data_err(path, "no observations"));
    }
    Ok((obs, unit))
}

fn load_model(path: &Path) -> Result<CovarianceModel, Failure> {
    read_model(open(path)?).map_err(|e| data_err(path, e))
}

fn load_harmonic(path: &Path) -> Result<HarmonicCovariance, Failure> {
    match load_model(path)? {
        CovarianceModel::Harmonic(h) => Ok(h),
        CovarianceModel::ExpChordal(_) => Err(data_err(path, "expected a harmonic model")),
    }
}

fn load_mean(path: &Path) -> Result<MeanModel, Failure> {
    read_mean_model(open(path)?).map_err(|e| data_err(path, e))
}

fn lib(e: axisym::Error) -> Failure {
    Failure::Data(e.to_string())
}

fn optim_config(a: &OptimArgs) -> OptimConfig {
    OptimConfig { max_iter: a.max_iter, gtol: a.gtol, rel_tol: a.rel_tol, ..OptimConfig::default() }
}

fn ingest(ctx: &mut Ctx, input: &Path, out: Option<PathBuf>, unit: Unit) -> CmdResult {
    let dest = Dest::new(out)?;
    let (obs, found) = load_observations(input)?;
    let unit = match unit {
        Unit::LogOzone => ValueColumn::LogOzone,
        Unit::OzoneDu => ValueColumn::OzoneDu,
    };
    ctx.notes.push(format!(
        "{} observations in {} orbits, value column `{}`",
        obs.len(),
        group_orbits(&obs).len(),
        found.header()
    ));
    dest.write(ctx, |w| write_observations(w, &obs, unit))
}

fn mean_fit(ctx: &mut Ctx, obs: &Path, out: &Path, zonal: bool) -> CmdResult {
    let dest = Dest::file(out)?;
    let (obs, _) = load_observations(obs)?;
    let bins = bin_average(&obs);
    let (model, report) = if zonal { fit_mean_zonal(&bins, &obs) } else { fit_mean(&bins, &obs) }.map_err(lib)?;
    dest.write(ctx, |w| write_mean_model(w, &model))?;
    write_mean_report(&mut ctx.out, &report).map_err(lib)
}

fn residual_cmd(ctx: &mut Ctx, obs: &Path, mean: &Path, out: Option<PathBuf>) -> CmdResult {
    let dest = Dest::new(out)?;
    let (obs, _) = load_observations(obs)?;
    let mean = load_mean(mean)?;
    let r = residuals(&obs, &mean);
    dest.write(ctx, |w| write_observations(w, &r, ValueColumn::Residual))
}

fn variogram(ctx: &mut Ctx, obs: &Path, out: Option<PathBuf>, lag: Option<i64>, pairs: &PairArgs) -> CmdResult {
    let dest = Dest::new(out)?;
    let (obs, _) = load_observations(obs)?;
    let mut cfg = PairConfig::default();
    if let Some(v) = pairs.max_lat_offset {
        cfg.max_lat_offset = v;
    }
    if let Some(v) = pairs.max_lon_offset {
        cfg.max_lon_offset = v;
    }
    let orbits = group_orbits(&obs);
    let records = match lag {
        None => bin_variogram(&orbits, &cfg, ctx.exec),
        Some(t) => cross_orbit_variogram(&orbits, t, &cfg, ctx.exec),
    };
    if records.is_empty() {
        ctx.notes.push("warning: no pairs fell in any bin".into());
    }
    dest.write(ctx, |w| write_variogram(w, &records))
}

#[allow(clippy::too_many_arguments)]
fn wls_fit(
    ctx: &mut Ctx,
    n: usize,
    variogram: &Path,
    out: &Path,
    init: Option<PathBuf>,
    report: Option<PathBuf>,
    grid: Option<PathBuf>,
    optim: &OptimArgs,
) -> CmdResult {
    let dest = Dest::file(out)?;
    let report = Dest::new(report)?;
    let grid = grid.map(|g| Dest::file(&g)).transpose()?;
    let records = read_variogram(open(variogram)?).map_err(|e| data_err(variogram, e))?;
    if records.is_empty() {
        return Err(data_err(variogram, "no variogram records"));
    }
    let init = init.as_deref().map(load_harmonic).transpose()?;
    let problem = WlsProblem::new(records, n).map_err(lib)?;
    let linear = wls_fit_linear(&problem).map_err(lib)?;
    if linear.degenerate {
        ctx.notes.push(format!(
            "warning: linear system rank {} of {}; minimum-norm solution used",
            linear.rank, linear.unknowns
        ));
    }
    let init = match init {
        Some(m) => m,
        None => wls_initial_model(&problem, &linear).map_err(lib)?,
    };
    let fit = wls_fit_psd(&problem, &init, &optim_config(optim), ctx.exec).map_err(lib)?;
    if fit.warning {
        ctx.notes.push(format!("warning: optimizer stopped: {}", fit.optim.status.as_str()));
    }
    let list = |v: Vec<String>| v.join(",");
    let extra = vec![
        ("initial_criterion".to_string(), format!("{:e}", fit.initial_criterion)),
        ("linear_criterion".to_string(), format!("{:e}", linear.criterion)),
        ("linear_rank".to_string(), format!("{}/{}", linear.rank, linear.unknowns)),
        (
            "linear_min_eigenvalues".to_string(),
            list(linear.min_eigenvalues.iter().map(|v| format!("{v:e}")).collect()),
        ),
        ("block_ranks".to_string(), list(fit.model.block_ranks(1e-10).iter().map(|r| r.to_string()).collect())),
    ];
    let rep = FitReport {
        method: "wls",
        objective: "criterion",
        value: fit.criterion,
        parameters: harmonic_parameters(&fit.model),
        frozen: &fit.frozen,
        optim: Some(&fit.optim),
        extra,
    };
    let model = CovarianceModel::Harmonic(fit.model.clone());
    dest.write(ctx, |w| write_model(w, &model))?;
    if let Some(g) = grid {
        g.write(ctx, |w| write_gamma_grid(w, problem.records(), &fit.model))?;
    }
    report.write(ctx, |w| write_report(w, &rep))
}

fn loglik(ctx: &mut Ctx, model: &Path, obs: &Path, zero_first: bool) -> CmdResult {
    let model = load_model(model)?;
    let (obs, _) = load_observations(obs)?;
    let value = match model {
        CovarianceModel::Harmonic(h) => {
            let h = if zero_first { h.zero_a0_first_column() } else { h };
            loglik_lowrank(&h, &obs, ctx.exec).map_err(lib)?
        }
        CovarianceModel::ExpChordal(e) => {
            if zero_first {
                return Err(Failure::Usage("--zero-a0-first-column needs a harmonic model".into()));
            }
            let pts: Vec<_> = obs.iter().map(|o| o.point).collect();
            let values: Vec<f64> = obs.iter().map(|o| o.value).collect();
            loglik_dense(&e.dense_covariance(&pts, ctx.exec), &values).map_err(lib)?
        }
    };
    writeln!(ctx.out, "{value:e}").map_err(|e| Failure::Data(e.to_string()))
}

#[allow(clippy::too_many_arguments)]
fn mle(
    ctx: &mut Ctx,
    obs: &Path,
    kind: MleKind,
    n: Option<usize>,
    init: Option<PathBuf>,
    freeze: bool,
    out: &Path,
    report: Option<PathBuf>,
    optim: &OptimArgs,
) -> CmdResult {
    if kind != MleKind::Harmonic && (init.is_some() || freeze || n.is_some()) {
        return Err(Failure::Usage("--n, --init and --freeze-a0-first-column apply to --kind harmonic".into()));
    }
    let dest = Dest::file(out)?;
    let report = Dest::new(report)?;
    let (obs, _) = load_observations(obs)?;
    let values: Vec<f64> = obs.iter().map(|o| o.value).collect();
    let cfg = optim_config(optim);
    let (model, rep_parts) = match kind {
        MleKind::White => {
            let v = mle_white_noise(&values).map_err(lib)?;
            let ll = white_noise_loglik(&values, v);
            let model = HarmonicCovariance::zeros(0, v).map_err(lib)?;
            (CovarianceModel::Harmonic(model), ("mle-white", ll, vec![("nugget".to_string(), v)], None, Vec::new(), ll))
        }
        MleKind::Exp => {
            let fit = mle_exp_nugget(&obs, &cfg).map_err(lib)?;
            let e = fit.model;
            let params = vec![("theta1".into(), e.theta1), ("theta2".into(), e.theta2), ("nugget".into(), e.nugget)];
            note_fit(ctx, fit.warning, fit.boundary, fit.optim.status.as_str());
            (
                CovarianceModel::ExpChordal(e),
                ("mle-exp", fit.loglik, params, Some(fit.optim), fit.frozen, fit.white_noise_loglik),
            )
        }
        MleKind::Harmonic => {
            let n = n.expect("required by the parser");
            let init = match init {
                Some(p) => {
                    let m = load_harmonic(&p)?;
                    if m.truncation() != n {
                        return Err(data_err(&p, format!("truncation {} differs from --n {n}", m.truncation())));
                    }
                    m
                }
                None => axisym::fitting::default_harmonic_init(n, &values).map_err(lib)?,
            };
            let fit = mle_harmonic(&obs, &init, freeze, &axisym::Recurrence, &cfg, ctx.exec).map_err(lib)?;
            note_fit(ctx, fit.warning, fit.boundary, fit.optim.status.as_str());
            let params = harmonic_parameters(&fit.model);
            (
                CovarianceModel::Harmonic(fit.model),
                ("mle-harmonic", fit.loglik, params, Some(fit.optim), fit.frozen, fit.white_noise_loglik),
            )
        }
    };
    let (method, ll, parameters, optim, frozen, wn) = rep_parts;
    let rep = FitReport {
        method,
        objective: "loglik",
        value: ll,
        parameters,
        frozen: &frozen,
        optim: optim.as_ref(),
        extra: vec![
            ("white_noise_loglik".into(), format!("{wn:e}")),
            ("observations".into(), obs.len().to_string()),
        ],
    };
    dest.write(ctx, |w| write_model(w, &model))?;
    report.write(ctx, |w| write_report(w, &rep))
}

fn note_fit(ctx: &mut Ctx, warning: bool, boundary: bool, status: &str) {
    if warning {
        ctx.notes.push(format!("warning: optimizer stopped: {status}"));
    }
    if boundary {
        ctx.notes.push("warning: white-noise boundary beat the optimizer; boundary model returned".into());
    }
}

fn krige(ctx: &mut Ctx, model: &Path, obs: &Path, targets: &Path, out: Option<PathBuf>) -> CmdResult {
    let dest = Dest::new(out)?;
    let model = load_model(model)?;
    let (obs, _) = load_observations(obs)?;
    let targets_pts = read_targets(open(targets)?).map_err(|e| data_err(targets, e))?;
    let k = krige_residuals(&model, &obs, &targets_pts, ctx.exec).map_err(lib)?;
    dest.write(ctx, |w| write_predictions(w, &targets_pts, &k))
}

fn level25(ctx: &mut Ctx, model: &Path, mean: &Path, obs: &Path, out: Option<PathBuf>, cfg: &ProductConfig) -> CmdResult {
    let dest = Dest::new(out)?;
    let model = load_model(model)?;
    let mean = load_mean(mean)?;
    let (obs, _) = load_observations(obs)?;
    let (records, notices) = level25_product(&group_orbits(&obs), &model, &mean, cfg, ctx.exec).map_err(lib)?;
    ctx.notes.extend(notices);
    dest.write(ctx, |w| write_product(w, &records))
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    ctx: &mut Ctx,
    model: &Path,
    out: Option<PathBuf>,
    orbits: u32,
    seed: u64,
    independent: bool,
    mean: Option<PathBuf>,
    cfg: &SwathConfig,
) -> CmdResult {
    let dest = Dest::new(out)?;
    let model = load_harmonic(model)?;
    let mean = mean.as_deref().map(load_mean).transpose()?;
    let obs = simulate_swaths(&model, cfg, orbits, independent, seed, ctx.exec).map_err(lib)?;
    match mean {
        None => dest.write(ctx, |w| write_observations(w, &obs, ValueColumn::Residual)),
        Some(m) => {
            let with_mean: Vec<Observation> =
                obs.iter().map(|o| Observation { value: o.value + m.evaluate(o.lat(), o.lon()), ..*o }).collect();
            dest.write(ctx, |w| write_observations(w, &with_mean, ValueColumn::LogOzone))
        }
    }
}
