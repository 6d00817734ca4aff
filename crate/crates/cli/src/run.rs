//! Subcommand bodies. Each writes its CSV tables into the output directory and
//! returns a JSON summary for the run report.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use varband::density::{beurling_density, gap_density_bound, landau_sweep, separation};
use varband::kernel::{diagonal, toy_kernel};
use varband::paleywiener::VarBandFunction;
use varband::sampling::{reconstruct_iterative, shannon_basis_toy, shannon_expansion, ReconstructionOptions, SamplingOperator};
use varband::schrodinger::{scattering_sweep, write_scattering_csv};
use varband::{BandwidthProfile, Interval, KernelModel, Potential, SampleSet};

use crate::config::{ConfigError, ExperimentConfig, ModelKind};
use crate::selftest::{self, fitted_rate, toy_lattice, CaseReport, CheckKind, Settings};

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Compute(varband::Error),
    Io(std::io::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "config error: {e}"),
            RunError::Compute(e) => write!(f, "computation failed: {e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<varband::Error> for RunError {
    fn from(e: varband::Error) -> Self {
        RunError::Compute(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Kernel,
    Scatter,
    Reconstruct,
    Shannon,
    Density,
    Landau,
    Selftest,
}

/// Result of one subcommand.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub summary: Value,
    pub artifacts: Vec<String>,
    /// False when a selftest invariant failed.
    pub ok: bool,
}

struct Out<'a> {
    dir: &'a Path,
    artifacts: Vec<String>,
}

impl Out<'_> {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>, RunError> {
        self.artifacts.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }
}

pub fn run(command: Command, cfg: &ExperimentConfig, out_dir: &Path, case_filter: &[String]) -> Result<Outcome, RunError> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let mut out = Out { dir: out_dir, artifacts: Vec::new() };
    let (summary, ok) = match command {
        Command::Kernel => (kernel(cfg, &mut out)?, true),
        Command::Scatter => (scatter(cfg, &mut out)?, true),
        Command::Reconstruct => (reconstruct(cfg, &mut out)?, true),
        Command::Shannon => (shannon(cfg, &mut out)?, true),
        Command::Density => (density(cfg, &mut out)?, true),
        Command::Landau => (landau(cfg, &mut out)?, true),
        Command::Selftest => selftest(cfg, &mut out, case_filter)?,
    };
    Ok(Outcome { summary, artifacts: out.artifacts, ok })
}

fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

fn kernel(cfg: &ExperimentConfig, out: &mut Out) -> Result<Value, RunError> {
    let model = cfg.build_model()?;
    let xs = grid(cfg.window[0], cfg.window[1], cfg.kernel.points);
    let k = model.kernel_matrix(&xs, &xs);
    let mut w = out.create("kernel.csv")?;
    writeln!(w, "x,y,re_k,im_k")?;
    let mut herm: f64 = 0.0;
    for (i, x) in xs.iter().enumerate() {
        for (j, y) in xs.iter().enumerate() {
            writeln!(w, "{x},{y},{},{}", k[(i, j)].re, k[(i, j)].im)?;
            herm = herm.max((k[(i, j)] - k[(j, i)].conj()).norm());
        }
    }
    w.flush()?;
    let diag = diagonal(&model, &xs);
    let mut w = out.create("diagonal.csv")?;
    writeln!(w, "y,k_yy")?;
    for (y, d) in xs.iter().zip(&diag) {
        writeln!(w, "{y},{d}")?;
    }
    w.flush()?;
    Ok(json!({
        "modes": model.dim(),
        "hermitian_defect": herm,
        "diagonal_mean": diag.iter().sum::<f64>() / diag.len() as f64,
        "sqrt_measure_over_pi": model.spectral_set().sqrt_measure() / PI,
    }))
}

fn scatter(cfg: &ExperimentConfig, out: &mut Out) -> Result<Value, RunError> {
    let pot = match cfg.scatter.square_well {
        Some([q0, a]) => Potential::square_well(q0, a),
        None if cfg.profile.is_none() => Potential::zero(),
        None => Potential::from_profile(&cfg.profile()?)?,
    };
    let s = &cfg.scatter;
    let data = scattering_sweep(&pot, &grid(s.omega_min, s.omega_max, s.nodes))?;
    let mut w = out.create("scattering.csv")?;
    write_scattering_csv(&mut w, &data)?;
    w.flush()?;
    let defect = data.iter().map(|d| d.unitarity_defect()).fold(0.0, f64::max);
    Ok(json!({ "nodes": data.len(), "max_unitarity_defect": defect, "support": [pot.support().a, pot.support().b] }))
}

/// The profile whose max-gap ratio governs sampling for the model.
fn gap_profile(cfg: &ExperimentConfig) -> Result<BandwidthProfile, RunError> {
    Ok(match cfg.model {
        ModelKind::Toy => {
            let spec = cfg.profile.as_ref().expect("validated");
            BandwidthProfile::two_level(spec.values[0], spec.values[1])
        }
        ModelKind::Liouville => cfg.profile()?,
        _ => BandwidthProfile::constant(1.0),
    })
}

fn reconstruct(cfg: &ExperimentConfig, out: &mut Out) -> Result<Value, RunError> {
    let model = cfg.build_model()?;
    let profile = gap_profile(cfg)?;
    let rc = &cfg.reconstruct;
    let window = cfg.window();
    let delta = rc.theta * PI / model.lambda_max().sqrt();
    let x = match cfg.model {
        ModelKind::Toy => {
            let spec = cfg.profile.as_ref().expect("validated");
            toy_lattice(spec.values[0], spec.values[1], delta, window.a, window.b)?
        }
        _ => SampleSet::lattice(delta * profile.lower_bound().sqrt(), 0.5 * delta, window)?,
    };
    let op = SamplingOperator::new(&model, &x, window)?;
    let opts = ReconstructionOptions { max_iter: rc.max_iter, tol: rc.tol };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let support = cfg.support()?;
    let mut w = out.create("reconstruct.csv")?;
    writeln!(w, "function,iteration,residual,error,certified,certified_true_norm")?;
    let (mut runs, mut gap) = (Vec::new(), Value::Null);
    for fi in 0..rc.functions {
        let f = VarBandFunction::random(&model, &mut rng, support, rc.atoms);
        let samples = op.sample(f.coeffs());
        let (_, rep) = reconstruct_iterative(&op, &profile, &x, &samples, opts, Some(&f))?;
        let errors = rep.errors.clone().expect("truth given");
        let cert = rep.certified_true_norm.clone().expect("truth given");
        for n in 0..rep.residuals.len() {
            writeln!(w, "{fi},{n},{},{},{},{}", rep.residuals[n], errors[n], rep.certified[n], cert[n])?;
        }
        let worst = errors.iter().zip(&cert).map(|(e, c)| e / c).fold(0.0, f64::max);
        runs.push(json!({
            "iterations": rep.iterations,
            "final_error": errors.last(),
            "max_error_over_certificate": worst,
            "fitted_rate": fitted_rate(&errors, 5, 25, 1e-12),
            "window_bias": rep.window_bias,
            "converged": rep.converged,
            "diverged": rep.diverged,
        }));
        gap = json!({ "delta": rep.delta, "theta": rep.theta, "pass": rep.gap_pass });
    }
    w.flush()?;
    Ok(json!({ "samples": x.len(), "modes": model.dim(), "gap": gap, "runs": runs }))
}

fn shannon(cfg: &ExperimentConfig, out: &mut Out) -> Result<Value, RunError> {
    let sh = &cfg.shannon;
    let (pm, pp, om) = (sh.p_minus, sh.p_plus, sh.omega);
    let (x, w) = shannon_basis_toy(pm, pp, om, sh.gram_j);
    let scale: Vec<f64> = w.iter().map(|wj| (PI * wj / om.sqrt()).sqrt()).collect();
    let (mut off, mut diag): (f64, f64) = (0.0, 0.0);
    for i in 0..x.len() {
        for j in 0..x.len() {
            let g = scale[i] * scale[j] * toy_kernel(pm, pp, om, x[i], x[j]);
            if i == j {
                diag = diag.max((g - 1.0).abs());
            } else {
                off = off.max(g.abs());
            }
        }
    }
    let (nodes, weights) = shannon_basis_toy(pm, pp, om, sh.j_max);
    let mut f = out.create("shannon_nodes.csv")?;
    writeln!(f, "j,x_j,w_j")?;
    for (k, (xj, wj)) in nodes.iter().zip(&weights).enumerate() {
        writeln!(f, "{},{xj},{wj}", k as i64 - sh.j_max as i64)?;
    }
    f.flush()?;
    let window = cfg.window();
    let model = KernelModel::toy(pm, pp, om, window.a.abs().max(window.b.abs()))?;
    let rule = model.spatial_rule(window);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let support = cfg.support()?;
    let mut errors = Vec::new();
    for _ in 0..sh.functions {
        let g = VarBandFunction::random(&model, &mut rng, support, 4);
        let samples = g.evaluate_many(&nodes);
        let exact = g.evaluate_many(&rule.nodes);
        let (mut err, mut norm) = (0.0, 0.0);
        for ((&t, &wt), v) in rule.nodes.iter().zip(&rule.weights).zip(&exact) {
            err += wt * (shannon_expansion(pm, pp, om, &nodes, &weights, &samples, t) - v).norm_sqr();
            norm += wt * v.norm_sqr();
        }
        errors.push((err / norm).sqrt());
    }
    Ok(json!({
        "gram_size": x.len(),
        "max_offdiagonal": off,
        "max_diagonal_defect": diag,
        "expansion_relative_l2_errors": errors,
    }))
}

/// Jittered lattice in the warped coordinate of `profile` over the window.
pub fn jittered_set(profile: &BandwidthProfile, window: Interval, spacing: f64, jitter: f64, seed: u64) -> varband::Result<SampleSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (profile.zeta(window.a)?, profile.zeta(window.b)?);
    let mut pts = Vec::new();
    let mut s = lo + 0.5 * spacing;
    while s < hi {
        let v = (s + jitter * spacing * rng.random_range(-1.0..1.0)).clamp(lo, hi);
        pts.push(profile.zeta_inv(v)?);
        s += spacing;
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    SampleSet::new(pts)
}

fn density(cfg: &ExperimentConfig, out: &mut Out) -> Result<Value, RunError> {
    let profile = cfg.profile()?;
    let d = &cfg.density;
    let window = cfg.window();
    let x = jittered_set(&profile, window, d.spacing, d.jitter, cfg.seed)?;
    let report = beurling_density(&profile, &x, &d.r, window, d.step_frac)?;
    let mut w = out.create("density.csv")?;
    report.write_csv(&mut w)?;
    w.flush()?;
    let sep = separation(&profile, &x)?;
    let gap = gap_density_bound(&profile, &x)?;
    Ok(json!({ "points": x.len(), "report": report, "separation": sep, "gap_bound": gap }))
}

fn landau(cfg: &ExperimentConfig, out: &mut Out) -> Result<Value, RunError> {
    let set = cfg.spectral_set()?;
    let dc = set.critical_density();
    let densities: Vec<f64> = cfg.landau.factors.iter().map(|f| f * dc).collect();
    let profile = cfg.profile()?;
    let warped = cfg.profile.is_some();
    let sweep = landau_sweep(warped.then_some(&profile), &set, &densities, &cfg.landau.windows)?;
    let mut w = out.create("landau.csv")?;
    sweep.write_csv(&mut w)?;
    w.flush()?;
    Ok(json!({ "critical_density": dc, "bracket": sweep.bracket, "stable": sweep.stable, "warped": warped }))
}

fn selftest(cfg: &ExperimentConfig, out: &mut Out, filter: &[String]) -> Result<(Value, bool), RunError> {
    let settings = Settings { seed: cfg.seed, tolerance_scale: cfg.tolerance_scale };
    let wanted: Vec<String> = if !filter.is_empty() { filter.to_vec() } else { cfg.selftest.cases.clone() };
    let all = wanted.is_empty();
    let mut reports: Vec<CaseReport> = Vec::new();
    if all || wanted.iter().any(|c| c == "invariants") {
        let model = cfg.build_model()?;
        let start = std::time::Instant::now();
        let outcome = selftest::model_invariants(&model, cfg.window(), &settings);
        let (checks, error) = match outcome {
            Ok(c) => (c, None),
            Err(e) => (Vec::new(), Some(e.to_string())),
        };
        reports.push(CaseReport { id: "invariants", title: "model invariants", checks, seconds: start.elapsed().as_secs_f64(), error });
    }
    for case in selftest::CASES {
        if all || wanted.iter().any(|c| c == case.id) {
            let rep = case.run(&settings);
            eprintln!("{}", rep.line());
            reports.push(rep);
        }
    }
    let mut w = out.create("selftest.csv")?;
    writeln!(w, "case,check,kind,value,limit,pass")?;
    for r in &reports {
        for c in r.checks.iter().filter(|c| c.label != "runtime_s") {
            let kind = if c.kind == CheckKind::Strict { "strict" } else { "empirical" };
            writeln!(w, "{},\"{}\",{kind},{},{},{}", r.id, c.label.replace('"', "'"), c.value, c.limit, c.pass)?;
        }
    }
    w.flush()?;
    let ok = reports.iter().all(|r| r.strict_pass());
    let lines: Vec<String> = reports.iter().map(|r| r.line()).collect();
    Ok((json!({ "cases": reports, "lines": lines, "strict_pass": ok }), ok))
}

/// Writes report.json next to the artifacts.
pub fn write_report(
    out_dir: &Path,
    command: Command,
    cfg: &ExperimentConfig,
    outcome: &Outcome,
    seconds: f64,
) -> std::io::Result<PathBuf> {
    let report = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "config": cfg,
        "summary": outcome.summary,
        "artifacts": outcome.artifacts,
        "ok": outcome.ok,
        "timings": { "total_s": seconds },
    });
    let path = out_dir.join("report.json");
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}
