use std::path::{Path, PathBuf};
use std::process::Command;

use axisym::fitting::{
    default_harmonic_init, loglik_lowrank, mle_harmonic, wls_fit_linear, wls_fit_psd, wls_initial_model,
    write_gamma_grid, OptimConfig, WlsProblem,
};
use axisym::kriging::{krige_residuals, level25_product, read_targets, write_predictions, write_product, ProductConfig};
use axisym::mean::{read_mean_model, write_mean_model};
use axisym::model_file::{read_model, write_model};
use axisym::observation::{group_orbits, read_observations, write_observations, ValueColumn};
use axisym::simulate::{simulate_swaths, SwathConfig};
use axisym::variogram::{read_variogram, write_variogram};
use axisym::{
    bin_average, bin_variogram, cross_orbit_variogram, fit_mean, residuals, CovarianceModel, Execution,
    HarmonicCovariance, PairConfig, Recurrence,
};
use tempfile::TempDir;

const TRUTH: &str = "kind harmonic
truncation 2
nugget 1e-3
A 0 0 0 0e0 0e0
A 0 1 0 2e-2 0e0
A 0 1 1 3e-2 0e0
A 0 2 0 -1e-2 0e0
A 0 2 1 5e-3 0e0
A 0 2 2 2e-2 0e0
A 1 0 0 2e-2 0e0
A 1 1 0 5e-3 3e-3
A 1 1 1 1e-2 0e0
A 2 0 0 1.5e-2 0e0
";

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("axisym").chain(args.iter().copied());
    let code = axisym_cli::run_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn ok(args: &[&str]) -> String {
    let (code, out, err) = run(args);
    assert_eq!(code, 0, "{args:?} failed: {err}");
    out
}

fn p(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap()
}

fn reader(path: &Path) -> std::io::BufReader<std::fs::File> {
    std::io::BufReader::new(std::fs::File::open(path).unwrap())
}

fn truth() -> HarmonicCovariance {
    match axisym::model_file::model_from_str(TRUTH).unwrap() {
        CovarianceModel::Harmonic(h) => h,
        _ => unreachable!(),
    }
}

fn swath_cfg() -> SwathConfig {
    SwathConfig { scans: 80, cross_track: 11, ..SwathConfig::default() }
}

/// Simulated residual file with 3 orbits.
fn simulated(dir: &TempDir) -> PathBuf {
    let model = p(dir, "truth.txt");
    std::fs::write(&model, TRUTH).unwrap();
    let out = p(dir, "sim.tsv");
    ok(&["simulate", "--model", s(&model), "--orbits", "3", "--seed", "11", "--scans", "80", "--cross-track", "11", "--out", s(&out)]);
    out
}

#[test]
fn simulate_matches_library() {
    let dir = TempDir::new().unwrap();
    let sim = simulated(&dir);
    let obs = simulate_swaths(&truth(), &swath_cfg(), 3, true, 11, Execution::Parallel).unwrap();
    let mut want = Vec::new();
    write_observations(&mut want, &obs, ValueColumn::Residual).unwrap();
    assert_eq!(read(&sim), want);
}

#[test]
fn variogram_matches_library() {
    let dir = TempDir::new().unwrap();
    let sim = simulated(&dir);
    let (obs, _) = read_observations(reader(&sim)).unwrap();
    let orbits = group_orbits(&obs);

    let vg = p(&dir, "vg.tsv");
    ok(&["variogram", "--obs", s(&sim), "--out", s(&vg)]);
    let mut want = Vec::new();
    write_variogram(&mut want, &bin_variogram(&orbits, &PairConfig::default(), Execution::Sequential)).unwrap();
    assert_eq!(read(&vg), want);

    let lagged = ok(&["variogram", "--obs", s(&sim), "--lag", "-1", "--max-lon-offset", "10"]);
    let cfg = PairConfig { max_lon_offset: 10.0, ..PairConfig::default() };
    let mut want = Vec::new();
    write_variogram(&mut want, &cross_orbit_variogram(&orbits, -1, &cfg, Execution::Sequential)).unwrap();
    assert_eq!(lagged.as_bytes(), want);
}

#[test]
fn wls_fit_and_loglik_match_library() {
    let dir = TempDir::new().unwrap();
    let sim = simulated(&dir);
    let vg = p(&dir, "vg.tsv");
    ok(&["variogram", "--obs", s(&sim), "--out", s(&vg)]);
    let (model, grid, report) = (p(&dir, "fit.txt"), p(&dir, "grid.tsv"), p(&dir, "report.txt"));
    ok(&[
        "wls-fit", "--n", "2", "--variogram", s(&vg), "--out", s(&model), "--emit-gamma-grid", s(&grid),
        "--report", s(&report), "--max-iter", "60",
    ]);

    let problem = WlsProblem::new(read_variogram(reader(&vg)).unwrap(), 2).unwrap();
    let linear = wls_fit_linear(&problem).unwrap();
    let init = wls_initial_model(&problem, &linear).unwrap();
    let cfg = OptimConfig { max_iter: 60, ..OptimConfig::default() };
    let fit = wls_fit_psd(&problem, &init, &cfg, Execution::Sequential).unwrap();
    let mut want = Vec::new();
    write_model(&mut want, &CovarianceModel::Harmonic(fit.model.clone())).unwrap();
    assert_eq!(read(&model), want);
    let mut want = Vec::new();
    write_gamma_grid(&mut want, problem.records(), &fit.model).unwrap();
    assert_eq!(read(&grid), want);
    let text = String::from_utf8(read(&report)).unwrap();
    assert!(text.starts_with("method\twls\n"));
    assert!(text.contains("[trace]"));

    let (obs, _) = read_observations(reader(&sim)).unwrap();
    let printed = ok(&["loglik", "--model", s(&model), "--obs", s(&sim)]);
    let fitted = match read_model(reader(&model)).unwrap() {
        CovarianceModel::Harmonic(h) => h,
        _ => unreachable!(),
    };
    let value = loglik_lowrank(&fitted, &obs, Execution::Parallel).unwrap();
    assert_eq!(printed, format!("{value:e}\n"));
    assert_eq!(printed.trim().parse::<f64>().unwrap(), value);

    let truth_file = p(&dir, "truth.txt");
    let printed = ok(&["loglik", "--model", s(&truth_file), "--obs", s(&sim), "--zero-a0-first-column"]);
    let value = loglik_lowrank(&truth().zero_a0_first_column(), &obs, Execution::Parallel).unwrap();
    assert_eq!(printed, format!("{value:e}\n"));
}

#[test]
fn mean_and_residuals_match_library() {
    let dir = TempDir::new().unwrap();
    let sim = simulated(&dir);
    let (mean, res) = (p(&dir, "mean.tsv"), p(&dir, "res.tsv"));
    let report = ok(&["mean-fit", "--obs", s(&sim), "--out", s(&mean)]);
    ok(&["residuals", "--obs", s(&sim), "--mean", s(&mean), "--out", s(&res)]);

    let (obs, _) = read_observations(reader(&sim)).unwrap();
    let (model, rep) = fit_mean(&bin_average(&obs), &obs).unwrap();
    let mut want = Vec::new();
    write_mean_model(&mut want, &model).unwrap();
    assert_eq!(read(&mean), want);
    assert!(report.contains(&format!("r2_observations\t{:e}\n", rep.r2_observations)));
    let mut want = Vec::new();
    write_observations(&mut want, &residuals(&obs, &model), ValueColumn::Residual).unwrap();
    assert_eq!(read(&res), want);
}

#[test]
fn mle_krige_and_level25_match_library() {
    let dir = TempDir::new().unwrap();
    let sim = simulated(&dir);
    let fit = p(&dir, "mle.txt");
    ok(&["mle", "--obs", s(&sim), "--kind", "harmonic", "--n", "2", "--out", s(&fit), "--report", s(&p(&dir, "r.txt"))]);
    let (obs, _) = read_observations(reader(&sim)).unwrap();
    let values: Vec<f64> = obs.iter().map(|o| o.value).collect();
    let init = default_harmonic_init(2, &values).unwrap();
    let lib = mle_harmonic(&obs, &init, false, &Recurrence, &OptimConfig::default(), Execution::Parallel).unwrap();
    let model = CovarianceModel::Harmonic(lib.model);
    let mut want = Vec::new();
    write_model(&mut want, &model).unwrap();
    assert_eq!(read(&fit), want);

    let targets = p(&dir, "targets.tsv");
    std::fs::write(&targets, "lat_deg\tlon_deg\n-60\t80\n-61.5\t95\n10\t-170\n").unwrap();
    let printed = ok(&["krige", "--model", s(&fit), "--obs", s(&sim), "--targets", s(&targets)]);
    // predictions use the model as read back from its file
    let model = read_model(reader(&fit)).unwrap();
    let pts = read_targets(reader(&targets)).unwrap();
    let k = krige_residuals(&model, &obs, &pts, Execution::Parallel).unwrap();
    let mut want = Vec::new();
    write_predictions(&mut want, &pts, &k).unwrap();
    assert_eq!(printed.as_bytes(), want);

    let mean = p(&dir, "mean.tsv");
    ok(&["mean-fit", "--obs", s(&sim), "--out", s(&mean)]);
    let product = p(&dir, "product.tsv");
    let (code, _, err) = run(&[
        "level25", "--model", s(&fit), "--mean", s(&mean), "--obs", s(&sim), "--out", s(&product), "--include", "0,2",
    ]);
    assert_eq!(code, 0, "{err}");
    let cfg = ProductConfig { include: Some(vec![0, 2]), ..ProductConfig::default() };
    let m = read_mean_model(reader(&mean)).unwrap();
    let (records, _) = level25_product(&group_orbits(&obs), &model, &m, &cfg, Execution::Parallel).unwrap();
    assert!(!records.is_empty());
    let mut want = Vec::new();
    write_product(&mut want, &records).unwrap();
    assert_eq!(read(&product), want);
}

#[test]
fn reruns_and_thread_settings_reproduce_outputs() {
    let dir = TempDir::new().unwrap();
    let sim = simulated(&dir);
    let steps = |tag: &str, extra: &[&str]| -> Vec<Vec<u8>> {
        let (a, b) = (p(&dir, &format!("vg_{tag}.tsv")), p(&dir, &format!("fit_{tag}.txt")));
        let sim2 = p(&dir, &format!("sim_{tag}.tsv"));
        let truth = p(&dir, "truth.txt");
        let mut args = extra.to_vec();
        args.extend(["simulate", "--model", s(&truth), "--seed", "5", "--orbits", "2", "--scans", "60", "--out", s(&sim2)]);
        ok(&args);
        let mut args = extra.to_vec();
        args.extend(["variogram", "--obs", s(&sim), "--out", s(&a)]);
        ok(&args);
        let mut args = extra.to_vec();
        args.extend(["wls-fit", "--n", "2", "--variogram", s(&a), "--out", s(&b), "--max-iter", "30"]);
        ok(&args);
        vec![read(&sim2), read(&a), read(&b)]
    };
    let first = steps("a", &[]);
    let again = steps("b", &[]);
    let single = steps("c", &["--threads", "1"]);
    let sequential = steps("d", &["--sequential"]);
    assert_eq!(first, again);
    assert_eq!(first, single);
    assert_eq!(first, sequential);
}

#[test]
fn verify_passes() {
    let out = ok(&["verify"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "check\tresult\tmeasured\ttolerance");
    assert_eq!(lines.len(), 7);
    assert!(lines[1..].iter().all(|l| l.split('\t').nth(1) == Some("PASS")), "{out}");
}

#[test]
fn usage_errors_exit_1() {
    let (code, out, err) = run(&["wls-fit", "--bogus"]);
    assert_eq!(code, 1);
    assert!(out.is_empty());
    assert!(err.contains("Usage:"), "{err}");
    assert_eq!(run(&[]).0, 1);
    assert_eq!(run(&["mle", "--obs", "x.tsv", "--kind", "harmonic", "--out", "m.txt"]).0, 1);
    assert_eq!(run(&["wls-fit", "--n", "99", "--variogram", "v.tsv", "--out", "m.txt"]).0, 1);
    assert_eq!(run(&["--threads", "0", "verify"]).0, 1);
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("wls-fit"));
}

#[test]
fn data_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let bad = p(&dir, "bad.tsv");
    std::fs::write(&bad, "orbit_id\ttime_s\tlat_deg\tlon_deg\tozone_du\n1\t0\t10\t20\t300\n1\t1\tabc\t20\t300\n").unwrap();
    let (code, _, err) = run(&["ingest", "--input", s(&bad)]);
    assert_eq!(code, 2);
    assert!(err.contains("row 3"), "{err}");
    let (code, _, err) = run(&["loglik", "--model", s(&p(&dir, "missing.txt")), "--obs", s(&bad)]);
    assert_eq!(code, 2);
    assert!(err.contains("missing.txt"), "{err}");
    let out_in_missing_dir = p(&dir, "no/such/dir/out.tsv");
    let (code, _, _) = run(&["ingest", "--input", s(&bad), "--out", s(&out_in_missing_dir)]);
    assert_eq!(code, 2);
}

#[test]
fn binary_reports_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_axisym");
    let o = Command::new(bin).args(["wls-fit", "--bogus"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(o.stdout.is_empty());
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage:"));

    let dir = TempDir::new().unwrap();
    let bad = p(&dir, "bad.tsv");
    std::fs::write(&bad, "orbit_id,time_s,lat_deg,lon_deg,log_ozone\n1,0,10,20,5.7\n1,1,10,20\n").unwrap();
    let o = Command::new(bin).args(["ingest", "--input", s(&bad)]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 3"));

    let good = p(&dir, "good.tsv");
    std::fs::write(&good, "orbit_id,time_s,lat_deg,lon_deg,ozone_du\n1,0,10,20,300\n").unwrap();
    let o = Command::new(bin).args(["ingest", "--input", s(&good)]).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let (obs, unit) = read_observations(&o.stdout[..]).unwrap();
    assert_eq!(unit, ValueColumn::LogOzone);
    assert_eq!(obs[0].value, 300f64.ln());
}
