//! Experiment harness: configuration, presets, subcommands, CSV and SVG output.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{ar_ess, capped, langevin_acf, worst_acf, SamplerFamily, TestFunction};
use crate::couplings::{langevin_coupled_run, rhmc_coupled_run, ContractionTrace};
use crate::diagnostics::{calibrate_step_size, worst_ess, BatteryFn, CalibrationBudget, IacMethod};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::samplers::{ghmc_run, malt_run, rhmc_run, ChainResult, KernelKind, SamplerConfig, ZeroLengthPolicy};
use crate::scaling::{delta_clt_experiment, optimal_ell, sigma_gaussian, sigma_monte_carlo};
use crate::targets::{
    heterogeneous_variances, DiagonalGaussian, GaussianMixture, LogCosh1D, StandardGaussian1D, StudentT, TargetModel,
};

/// 17 significant digits; parses back to the same `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn config_err(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Flat experiment configuration. Every key is optional; subcommands fill in
/// their own defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Option<String>,
    pub target: Option<String>,
    pub d: Option<usize>,
    pub dof: Option<f64>,
    pub a_norm: Option<f64>,
    pub sampler: Option<String>,
    pub h: Option<f64>,
    #[serde(rename = "T")]
    pub t: Option<f64>,
    #[serde(rename = "L")]
    pub l: Option<Vec<usize>>,
    pub gamma: Option<Vec<f64>>,
    pub alpha: Option<Vec<f64>>,
    pub sigma: Option<Vec<f64>>,
    pub dims: Option<Vec<usize>>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<String>,
    pub plot: Option<bool>,
    pub keep_coords: Option<Vec<usize>>,
    pub iac_method: Option<String>,
    pub rhmc_zero_policy: Option<String>,
    pub tmax: Option<f64>,
    pub points: Option<usize>,
    pub ell: Option<f64>,
    pub duration: Option<f64>,
    pub pairs: Option<usize>,
    pub kind: Option<String>,
    pub marginal: Option<String>,
    pub target_accept: Option<f64>,
    pub empirical: Option<bool>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($f:ident),* $(,)?) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_err("<file>", e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    /// Values set in `top` replace those in `self`.
    pub fn overlay(mut self, top: &ExperimentConfig) -> Self {
        overlay!(self, top; preset, target, d, dof, a_norm, sampler, h, t, l, gamma, alpha, sigma, dims, n, seed,
            threads, out, plot, keep_coords, iac_method, rhmc_zero_policy, tmax, points, ell, duration, pairs, kind,
            marginal, target_accept, empirical);
        self
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(field: &str, v: Option<f64>) -> Result<()> {
            match v {
                Some(x) if !(x > 0.0 && x.is_finite()) => Err(config_err(field, format!("must be positive, got {x}"))),
                _ => Ok(()),
            }
        }
        fn nonzero(field: &str, v: Option<usize>) -> Result<()> {
            match v {
                Some(0) => Err(config_err(field, "must be at least 1")),
                _ => Ok(()),
            }
        }
        fn one_of(field: &str, v: &Option<String>, allowed: &[&str]) -> Result<()> {
            match v {
                Some(s) if !allowed.contains(&s.as_str()) => {
                    Err(config_err(field, format!("`{s}` is not one of {}", allowed.join("|"))))
                }
                _ => Ok(()),
            }
        }
        positive("h", self.h)?;
        positive("T", self.t)?;
        positive("tmax", self.tmax)?;
        positive("ell", self.ell)?;
        positive("duration", self.duration)?;
        nonzero("d", self.d)?;
        nonzero("n", self.n)?;
        nonzero("threads", self.threads)?;
        nonzero("pairs", self.pairs)?;
        if let Some(p) = self.points {
            if p < 2 {
                return Err(config_err("points", "need at least 2 grid points"));
            }
        }
        if let Some(k) = self.dof {
            if !(k >= 1.0 && k.is_finite()) {
                return Err(config_err("dof", format!("must be >= 1, got {k}")));
            }
        }
        if let Some(a) = self.a_norm {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(config_err("a_norm", format!("must be >= 0, got {a}")));
            }
        }
        if let Some(a) = self.target_accept {
            if !(a > 0.0 && a < 1.0) {
                return Err(config_err("target_accept", format!("must lie in (0, 1), got {a}")));
            }
        }
        for (field, list) in [("gamma", &self.gamma), ("alpha", &self.alpha), ("sigma", &self.sigma)] {
            if let Some(v) = list {
                if v.is_empty() {
                    return Err(config_err(field, "empty list"));
                }
            }
        }
        if let Some(g) = &self.gamma {
            if let Some(bad) = g.iter().find(|g| !(**g >= 0.0 && g.is_finite())) {
                return Err(config_err("gamma", format!("friction must be >= 0, got {bad}")));
            }
        }
        if let Some(a) = &self.alpha {
            if let Some(bad) = a.iter().find(|a| !(0.0..1.0).contains(*a)) {
                return Err(config_err("alpha", format!("persistence must lie in [0, 1), got {bad}")));
            }
        }
        if let Some(s) = &self.sigma {
            if let Some(bad) = s.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
                return Err(config_err("sigma", format!("scale must be positive, got {bad}")));
            }
        }
        for (field, list) in [("L", &self.l), ("dims", &self.dims), ("keep_coords", &self.keep_coords)] {
            if let Some(v) = list {
                if v.is_empty() || v.contains(&0) {
                    return Err(config_err(field, "entries must be >= 1"));
                }
            }
        }
        one_of("preset", &self.preset, &PRESETS)?;
        one_of("target", &self.target, &["gaussian", "mixture", "student"])?;
        one_of("sampler", &self.sampler, &["malt", "hmc", "ghmc", "mala", "rhmc"])?;
        one_of("iac_method", &self.iac_method, &["geyer", "truncated"])?;
        one_of("rhmc_zero_policy", &self.rhmc_zero_policy, &["clamp", "resample"])?;
        one_of("kind", &self.kind, &["rhmc", "langevin"])?;
        one_of("marginal", &self.marginal, &["gaussian", "logcosh"])?;
        Ok(())
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn iac_method(&self) -> IacMethod {
        self.iac_method.as_deref().unwrap_or("geyer").parse().expect("validated")
    }

    fn zero_policy(&self) -> ZeroLengthPolicy {
        self.rhmc_zero_policy.as_deref().unwrap_or("clamp").parse().expect("validated")
    }

    fn scalar_gamma(&self) -> Option<f64> {
        self.gamma.as_ref().map(|g| g[0])
    }

    fn scalar_alpha(&self) -> f64 {
        self.alpha.as_ref().map(|a| a[0]).unwrap_or(0.0)
    }
}

pub const PRESETS: [&str; 3] = ["gaussian-d50", "mixture-d50", "student-k20-d50"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowKind {
    Malt { gamma: f64 },
    Rhmc,
    Hmc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub label: String,
    pub kind: RowKind,
    pub steps: usize,
}

/// One of the three benchmark setups: `d = 50`, `σ_i² = i/50`, `h = 0.2`.
pub struct Preset {
    pub name: String,
    pub target: Box<dyn TargetModel>,
    pub h: f64,
    pub malt_gamma: f64,
    pub rows: Vec<TableRow>,
}

fn rows(malt_gamma: f64, malt_l: usize, rhmc_l: usize) -> Vec<TableRow> {
    vec![
        TableRow {
            label: format!("MALT L={malt_l}"),
            kind: RowKind::Malt { gamma: malt_gamma },
            steps: malt_l,
        },
        TableRow {
            label: format!("RHMC L={rhmc_l}"),
            kind: RowKind::Rhmc,
            steps: rhmc_l,
        },
        TableRow {
            label: "HMC L=3".into(),
            kind: RowKind::Hmc,
            steps: 3,
        },
        TableRow {
            label: "MALA".into(),
            kind: RowKind::Hmc,
            steps: 1,
        },
    ]
}

pub fn preset(name: &str) -> Result<Preset> {
    let d = 50;
    let var = heterogeneous_variances(d);
    let (target, gamma, malt_l, rhmc_l): (Box<dyn TargetModel>, f64, usize, usize) = match name {
        "gaussian-d50" => (Box::new(DiagonalGaussian::from_variances(&var)?), 1.5, 8, 5),
        "mixture-d50" => (Box::new(benchmark_mixture(d, 0.5)?), 1.0, 8, 4),
        "student-k20-d50" => (Box::new(StudentT::new(20.0, var)?), 1.0, 8, 5),
        other => return Err(config_err("preset", format!("unknown preset `{other}`"))),
    };
    Ok(Preset {
        name: name.to_string(),
        target,
        h: 0.2,
        malt_gamma: gamma,
        rows: rows(gamma, malt_l, rhmc_l),
    })
}

/// Mixture with `σ_i² = i/d` and `a_i = a_norm √i / d`, so `|a|_{Σ⁻¹} = a_norm`.
pub fn benchmark_mixture(d: usize, a_norm: f64) -> Result<GaussianMixture> {
    let a = (1..=d).map(|i| a_norm * (i as f64).sqrt() / d as f64).collect();
    GaussianMixture::new(a, heterogeneous_variances(d))
}

/// The target named by `preset`, else by `target` (default Gaussian), with
/// `σ_i² = i/d`.
fn build_target(cfg: &ExperimentConfig) -> Result<(Box<dyn TargetModel>, Option<Preset>)> {
    if let Some(p) = &cfg.preset {
        let p = preset(p)?;
        let t = preset(&p.name)?.target;
        return Ok((t, Some(p)));
    }
    let d = cfg.d.unwrap_or(50);
    let var = heterogeneous_variances(d);
    let t: Box<dyn TargetModel> = match cfg.target.as_deref().unwrap_or("gaussian") {
        "gaussian" => Box::new(DiagonalGaussian::from_variances(&var)?),
        "mixture" => Box::new(benchmark_mixture(d, cfg.a_norm.unwrap_or(0.5))?),
        _ => Box::new(StudentT::new(cfg.dof.unwrap_or(20.0), var)?),
    };
    Ok((t, None))
}

#[derive(Parser, Debug)]
#[command(name = "malt-kit", version, about = "MALT, HMC variants and their diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    args: Args,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Closed-form Langevin ACF curves.
    Acf,
    /// Worst ESS per integration time (closed form) or per gradient (simulated).
    EssCurve,
    /// Worst ESS per gradient over the function battery for a preset.
    Table,
    /// Energy-error statistics against the high-dimensional limit.
    Scaling,
    /// Synchronous-coupling contraction traces.
    Coupling,
    /// Step-size calibration to a target acceptance rate.
    Tune,
    /// Run one chain and dump it.
    Chain,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Acf => "acf",
            Command::EssCurve => "ess-curve",
            Command::Table => "table",
            Command::Scaling => "scaling",
            Command::Coupling => "coupling",
            Command::Tune => "tune",
            Command::Chain => "chain",
        }
    }
}

#[derive(clap::Args, Debug, Default)]
struct Args {
    /// TOML file with flat keys; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    out: Option<String>,
    #[arg(long, global = true)]
    plot: bool,
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    h: Option<f64>,
    #[arg(long = "T", global = true, allow_negative_numbers = true)]
    t: Option<f64>,
    #[arg(long = "L", global = true, value_delimiter = ',')]
    l: Option<Vec<usize>>,
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    gamma: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    alpha: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    sigma: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    #[arg(long, global = true)]
    preset: Option<String>,
    #[arg(long, global = true)]
    target: Option<String>,
    #[arg(long, global = true)]
    d: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    dof: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    a_norm: Option<f64>,
    #[arg(long, global = true)]
    sampler: Option<String>,
    #[arg(long, global = true, value_delimiter = ',')]
    keep_coords: Option<Vec<usize>>,
    #[arg(long, global = true)]
    iac_method: Option<String>,
    #[arg(long, global = true)]
    rhmc_zero_policy: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    tmax: Option<f64>,
    #[arg(long, global = true)]
    points: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    ell: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    duration: Option<f64>,
    #[arg(long, global = true)]
    pairs: Option<usize>,
    #[arg(long, global = true)]
    kind: Option<String>,
    #[arg(long, global = true)]
    marginal: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    target_accept: Option<f64>,
    #[arg(long, global = true)]
    empirical: bool,
}

impl Args {
    fn to_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            preset: self.preset.clone(),
            target: self.target.clone(),
            d: self.d,
            dof: self.dof,
            a_norm: self.a_norm,
            sampler: self.sampler.clone(),
            h: self.h,
            t: self.t,
            l: self.l.clone(),
            gamma: self.gamma.clone(),
            alpha: self.alpha.clone(),
            sigma: self.sigma.clone(),
            dims: self.dims.clone(),
            n: self.n,
            seed: self.seed,
            threads: self.threads,
            out: self.out.clone(),
            plot: self.plot.then_some(true),
            keep_coords: self.keep_coords.clone(),
            iac_method: self.iac_method.clone(),
            rhmc_zero_policy: self.rhmc_zero_policy.clone(),
            tmax: self.tmax,
            points: self.points,
            ell: self.ell,
            duration: self.duration,
            pairs: self.pairs,
            kind: self.kind.clone(),
            marginal: self.marginal.clone(),
            target_accept: self.target_accept,
            empirical: self.empirical.then_some(true),
        }
    }
}

/// What a subcommand produced; `numerical_failure` maps to exit code 2.
#[derive(Debug, Default)]
struct Outcome {
    numerical_failure: bool,
    summary: Vec<String>,
}

/// Parses `argv` (program name first), runs the subcommand, and returns the
/// process exit code: 0 success, 1 configuration error, 2 numerical failure.
pub fn run_subcommand<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let cfg = match load_config(&cli.args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let result = match cfg.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command, &cfg)),
            Err(e) => Err(Error::Numerical(format!("thread pool: {e}"))),
        },
        None => dispatch(cli.command, &cfg),
    };
    match result {
        Ok(out) => {
            for line in &out.summary {
                println!("{line}");
            }
            if out.numerical_failure {
                eprintln!("warning: numerical check failed; see output");
                2
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numerical(_) | Error::ZeroVariance => 2,
        _ => 1,
    }
}

fn load_config(args: &Args) -> Result<ExperimentConfig> {
    let base = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| config_err("config", format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_toml(&text)?
        }
        None => ExperimentConfig::default(),
    };
    let cfg = base.overlay(&args.to_config());
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cmd: Command, cfg: &ExperimentConfig) -> Result<Outcome> {
    let out_dir = PathBuf::from(cfg.out.clone().unwrap_or_else(|| ".".into()));
    fs::create_dir_all(&out_dir)?;
    let ctx = Ctx {
        cfg,
        out_dir,
        name: cmd.name(),
        plot: cfg.plot.unwrap_or(false),
    };
    match cmd {
        Command::Acf => cmd_acf(&ctx),
        Command::EssCurve => cmd_ess_curve(&ctx),
        Command::Table => cmd_table(&ctx),
        Command::Scaling => cmd_scaling(&ctx),
        Command::Coupling => cmd_coupling(&ctx),
        Command::Tune => cmd_tune(&ctx),
        Command::Chain => cmd_chain(&ctx),
    }
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    out_dir: PathBuf,
    name: &'static str,
    plot: bool,
}

impl Ctx<'_> {
    fn header(&self) -> String {
        format!("# malt-kit v{} {}\n", crate::VERSION, self.name)
    }

    /// Writes `<out>/<stem>.csv` with the version header and returns its path.
    fn write_csv(&self, stem: &str, columns: &str, rows: &[String]) -> Result<PathBuf> {
        let mut text = self.header();
        text.push_str(columns);
        text.push('\n');
        for r in rows {
            text.push_str(r);
            text.push('\n');
        }
        let path = self.out_dir.join(format!("{stem}.csv"));
        fs::write(&path, text)?;
        Ok(path)
    }

    fn stream(&self) -> RngStream {
        RngStream::new(self.cfg.seed())
    }
}

fn row(values: &[f64]) -> String {
    values.iter().map(|v| fmt_float(*v)).collect::<Vec<_>>().join(",")
}

fn grid(tmax: f64, points: usize, include_zero: bool) -> Vec<f64> {
    if include_zero {
        (0..points).map(|k| tmax * k as f64 / (points - 1) as f64).collect()
    } else {
        (1..=points).map(|k| tmax * k as f64 / points as f64).collect()
    }
}

fn cmd_acf(ctx: &Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let gammas = cfg.gamma.clone().unwrap_or_else(|| vec![0.0, 1.0, 2.0, 4.0]);
    let sigmas = cfg.sigma.clone().unwrap_or_else(|| vec![1.0]);
    let times = grid(cfg.tmax.unwrap_or(12.0), cfg.points.unwrap_or(241), true);
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    for &s in &sigmas {
        for &g in &gammas {
            let ys: Vec<f64> = times.iter().map(|&t| langevin_acf(s, g, t)).collect();
            for (t, y) in times.iter().zip(&ys) {
                rows.push(row(&[s, g, *t, *y]));
            }
            curves.push(Curve {
                label: format!("sigma={s} gamma={g}"),
                x: times.clone(),
                y: ys,
            });
        }
    }
    ctx.write_csv("acf", "sigma,gamma,T,rho", &rows)?;
    if ctx.plot {
        emit_svg(&curves, &ctx.out_dir.join("acf.svg"))?;
    }
    Ok(Outcome::default())
}

fn cmd_ess_curve(ctx: &Ctx) -> Result<Outcome> {
    if ctx.cfg.empirical.unwrap_or(false) {
        return ess_curve_empirical(ctx);
    }
    let cfg = ctx.cfg;
    let d = cfg.d.unwrap_or(50);
    let scales: Vec<f64> = match &cfg.sigma {
        Some(s) => s.clone(),
        None => heterogeneous_variances(d).iter().map(|v| v.sqrt()).collect(),
    };
    let smax = scales.iter().copied().fold(0.0, f64::max);
    let families: [(&str, &[f64], SamplerFamily); 4] = [
        ("ideal", &[1.0], SamplerFamily::Hamiltonian),
        ("malt", &scales, SamplerFamily::Langevin(2.0 / smax)),
        ("rhmc", &scales, SamplerFamily::Rhmc),
        ("hmc", &scales, SamplerFamily::Hamiltonian),
    ];
    let times = grid(cfg.tmax.unwrap_or(3.0), cfg.points.unwrap_or(300), false);
    let mut rows = Vec::new();
    let mut mean_panel = Vec::new();
    let mut var_panel = Vec::new();
    for (name, sc, fam) in families {
        let (mut ym, mut yv) = (Vec::new(), Vec::new());
        for &t in &times {
            let em = capped(ar_ess(worst_acf(sc, fam, TestFunction::Mean, t), t));
            let ev = capped(ar_ess(worst_acf(sc, fam, TestFunction::Square, t), t));
            rows.push(format!("{name},{}", row(&[t, em, ev])));
            ym.push(em);
            yv.push(ev);
        }
        mean_panel.push(Curve {
            label: name.into(),
            x: times.clone(),
            y: ym,
        });
        var_panel.push(Curve {
            label: name.into(),
            x: times.clone(),
            y: yv,
        });
    }
    ctx.write_csv("ess-curve", "family,T,ess_mean,ess_var", &rows)?;
    if ctx.plot {
        emit_svg_panels(
            &[
                Panel {
                    title: "worst ESS, f(x)=x".into(),
                    curves: clip_curves(mean_panel, 2.0),
                },
                Panel {
                    title: "worst ESS, f(x)=x^2".into(),
                    curves: clip_curves(var_panel, 2.0),
                },
            ],
            &ctx.out_dir.join("ess-curve.svg"),
        )?;
    }
    Ok(Outcome::default())
}

fn clip_curves(curves: Vec<Curve>, cap: f64) -> Vec<Curve> {
    curves
        .into_iter()
        .map(|c| Curve {
            y: c.y.into_iter().map(|y| y.min(cap)).collect(),
            ..c
        })
        .collect()
}

/// Simulated worst ESS per gradient for `f(x) = x` and `x²` over a list of `L`.
fn ess_curve_empirical(ctx: &Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let (target, p) = build_target(cfg)?;
    let h = cfg.h.or(p.as_ref().map(|p| p.h)).unwrap_or(0.2);
    let gamma = cfg.scalar_gamma().or(p.as_ref().map(|p| p.malt_gamma)).unwrap_or(1.0);
    let ls = cfg.l.clone().unwrap_or_else(|| (1..=12).collect());
    let n = cfg.n.unwrap_or(20_000);
    let root = ctx.stream();
    let jobs: Vec<(usize, RowKind)> = ls
        .iter()
        .flat_map(|&l| [(l, RowKind::Malt { gamma }), (l, RowKind::Rhmc), (l, RowKind::Hmc)])
        .collect();
    let results: Vec<(usize, RowKind, f64, f64)> = jobs
        .par_iter()
        .enumerate()
        .map(|(k, &(l, kind))| -> Result<_> {
            let mut s = root.child(k);
            let (chain, spi) = run_row(&*target, kind, h, l, n, cfg, &mut s)?;
            let rep = worst_ess(&chain, &[BatteryFn::X, BatteryFn::X2], spi, h, cfg.iac_method(), "")?;
            Ok((l, kind, rep.worst[0], rep.worst[1]))
        })
        .collect::<Result<_>>()?;
    let label = |k: RowKind| match k {
        RowKind::Malt { .. } => "malt",
        RowKind::Rhmc => "rhmc",
        RowKind::Hmc => "hmc",
    };
    let rows: Vec<String> = results
        .iter()
        .map(|(l, k, a, b)| format!("{},{l},{}", label(*k), row(&[*l as f64 * h, *a, *b])))
        .collect();
    ctx.write_csv("ess-curve", "family,L,T,ess_mean,ess_var", &rows)?;
    if ctx.plot {
        let mut panels = vec![
            Panel {
                title: "worst ESS per gradient, f(x)=x".into(),
                curves: vec![],
            },
            Panel {
                title: "worst ESS per gradient, f(x)=x^2".into(),
                curves: vec![],
            },
        ];
        for fam in ["malt", "rhmc", "hmc"] {
            let pts: Vec<_> = results.iter().filter(|r| label(r.1) == fam).collect();
            let x: Vec<f64> = pts.iter().map(|r| r.0 as f64 * h).collect();
            panels[0].curves.push(Curve {
                label: fam.into(),
                x: x.clone(),
                y: pts.iter().map(|r| r.2).collect(),
            });
            panels[1].curves.push(Curve {
                label: fam.into(),
                x,
                y: pts.iter().map(|r| r.3).collect(),
            });
        }
        emit_svg_panels(&panels, &ctx.out_dir.join("ess-curve.svg"))?;
    }
    Ok(Outcome::default())
}

/// Runs one table row and returns the chain with its gradient cost per iteration.
fn run_row(
    target: &dyn TargetModel,
    kind: RowKind,
    h: f64,
    steps: usize,
    n: usize,
    cfg: &ExperimentConfig,
    stream: &mut RngStream,
) -> Result<(ChainResult, f64)> {
    let c = SamplerConfig::from_steps(h, steps)?
        .samples(n)
        .zero_policy(cfg.zero_policy());
    match kind {
        RowKind::Malt { gamma } => Ok((malt_run(target, &c.gamma(gamma), stream)?, steps as f64)),
        RowKind::Hmc => Ok((ghmc_run(target, &c, stream)?, steps as f64)),
        RowKind::Rhmc => {
            let chain = rhmc_run(target, &c, stream)?;
            let spi = chain.mean_steps();
            Ok((chain, spi))
        }
    }
}

/// Worst ESS per gradient of every preset row over the function battery.
pub fn table_rows(preset: &Preset, n: usize, seed: u64, method: IacMethod, policy: ZeroLengthPolicy) -> Result<Vec<(String, f64, Vec<f64>)>> {
    let cfg = ExperimentConfig {
        rhmc_zero_policy: Some(
            match policy {
                ZeroLengthPolicy::Clamp => "clamp",
                ZeroLengthPolicy::Resample => "resample",
            }
            .into(),
        ),
        ..Default::default()
    };
    let root = RngStream::new(seed);
    preset
        .rows
        .par_iter()
        .enumerate()
        .map(|(k, r)| {
            let mut s = root.child(k);
            let (chain, spi) = run_row(&*preset.target, r.kind, preset.h, r.steps, n, &cfg, &mut s)?;
            let rep = worst_ess(&chain, &BatteryFn::ALL, spi, preset.h, method, &r.label)?;
            Ok((r.label.clone(), chain.acceptance_rate(), rep.worst))
        })
        .collect()
}

fn cmd_table(ctx: &Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let name = cfg.preset.clone().unwrap_or_else(|| "gaussian-d50".into());
    let p = preset(&name)?;
    let p = Preset {
        h: cfg.h.unwrap_or(p.h),
        ..p
    };
    let n = cfg.n.unwrap_or(100_000);
    let rows = table_rows(&p, n, cfg.seed(), cfg.iac_method(), cfg.zero_policy())?;
    let labels: Vec<&str> = BatteryFn::ALL.iter().map(|f| f.label()).collect();
    let lines: Vec<String> = rows
        .iter()
        .map(|(label, acc, worst)| format!("{label},{},{}", fmt_float(*acc), row(worst)))
        .collect();
    ctx.write_csv("table", &format!("sampler,acceptance,{}", labels.join(",")), &lines)?;
    let summary = rows
        .iter()
        .map(|(label, acc, w)| {
            let cells: Vec<String> = w.iter().map(|v| format!("{v:.2}")).collect();
            format!("{label:<10} acc={acc:.3}  {}", cells.join(" "))
        })
        .collect();
    Ok(Outcome {
        numerical_failure: false,
        summary,
    })
}

fn cmd_scaling(ctx: &Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let gamma = cfg.scalar_gamma().unwrap_or(2.0);
    let t = cfg.t.unwrap_or(1.0);
    let dims = cfg.dims.clone().unwrap_or_else(|| vec![64, 256, 1024]);
    let n = cfg.n.unwrap_or(20_000);
    let mut stream = ctx.stream();
    let logcosh = cfg.marginal.as_deref() == Some("logcosh");
    let (sigma, mc_ok) = if logcosh {
        let est = sigma_monte_carlo(&LogCosh1D, gamma, t, n.max(1000), 0.01, &mut stream)?;
        (est.estimate, est.converged)
    } else {
        (sigma_gaussian(gamma, t), true)
    };
    if !(sigma > 0.0) {
        return Err(Error::Numerical(format!("variance constant is {sigma}; no optimal step exists")));
    }
    let report = optimal_ell(sigma)?;
    let ell = cfg.ell.unwrap_or(report.ell_star);
    let stats = if logcosh {
        delta_clt_experiment(&LogCosh1D, gamma, t, ell, &dims, n, &mut stream)?
    } else {
        delta_clt_experiment(&StandardGaussian1D, gamma, t, ell, &dims, n, &mut stream)?
    };
    let rows: Vec<String> = stats
        .iter()
        .map(|s| format!("{},{}", s.d, row(&[s.h, s.mean_delta, s.var_delta, s.acceptance])))
        .collect();
    ctx.write_csv("scaling", "d,h,mean_delta,var_delta,acceptance", &rows)?;
    ctx.write_csv(
        "scaling-report",
        "ell_star,acc_star,eff_star,sigma_clt,ell_used",
        &[row(&[report.ell_star, report.acc_star, report.eff_star, sigma, ell])],
    )?;
    if ctx.plot {
        let x: Vec<f64> = stats.iter().map(|s| s.d as f64).collect();
        emit_svg(
            &[
                Curve {
                    label: "acceptance".into(),
                    x: x.clone(),
                    y: stats.iter().map(|s| s.acceptance).collect(),
                },
                Curve {
                    label: "limit".into(),
                    x,
                    y: vec![crate::scaling::acceptance_curve(ell, sigma); stats.len()],
                },
            ],
            &ctx.out_dir.join("scaling.svg"),
        )?;
    }
    Ok(Outcome {
        numerical_failure: !mc_ok,
        summary: vec![format!(
            "ell_star={} acc_star={} eff_star={}",
            fmt_float(report.ell_star),
            fmt_float(report.acc_star),
            fmt_float(report.eff_star)
        )],
    })
}

fn cmd_coupling(ctx: &Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let target: Box<dyn TargetModel> = if cfg.preset.is_some() || cfg.target.is_some() {
        build_target(cfg)?.0
    } else {
        Box::new(DiagonalGaussian::new(cfg.sigma.clone().unwrap_or_else(|| vec![1.0]))?)
    };
    let duration = cfg.duration.unwrap_or(5.0);
    let pairs = cfg.pairs.unwrap_or(1000);
    let n_grid = cfg.points.unwrap_or(100);
    let mut stream = ctx.stream();
    let mut traces: Vec<(String, ContractionTrace)> = Vec::new();
    match cfg.kind.as_deref().unwrap_or("rhmc") {
        "rhmc" => {
            for &a in cfg.alpha.clone().unwrap_or_else(|| vec![0.0, 0.5, 0.9]).iter() {
                let tr = rhmc_coupled_run(&*target, a, duration, pairs, n_grid, &mut stream)?;
                traces.push((format!("alpha={a}"), tr));
            }
        }
        _ => {
            let default_gamma = target
                .convexity_bounds()
                .map(|b| (b.big_m + b.m).sqrt())
                .unwrap_or(2f64.sqrt());
            for &g in cfg.gamma.clone().unwrap_or_else(|| vec![default_gamma]).iter() {
                let h = cfg.h.unwrap_or(0.01);
                let tr = langevin_coupled_run(&*target, g, duration, h, pairs, n_grid, &mut stream)?;
                traces.push((format!("gamma={g}"), tr));
            }
        }
    }
    let mut rows = Vec::new();
    let mut summary_rows = Vec::new();
    let mut summary = Vec::new();
    let mut failure = false;
    for (label, tr) in &traces {
        for (t, v) in tr.times.iter().zip(&tr.twisted_norm_sq) {
            rows.push(format!("{label},{}", row(&[*t, *v])));
        }
        summary_rows.push(format!("{label},{}", row(&[tr.fitted_slope, tr.reference_slope])));
        summary.push(format!("{label}: fitted slope {:.4}, reference {:.4}", tr.fitted_slope, tr.reference_slope));
        if let Some(w) = &tr.warning {
            summary.push(format!("{label}: warning: {w}"));
        }
        failure |= !tr.fitted_slope.is_finite();
    }
    ctx.write_csv("coupling", "label,t,mean_twisted_norm_sq", &rows)?;
    ctx.write_csv("coupling-summary", "label,fitted_slope,reference_slope", &summary_rows)?;
    if ctx.plot {
        let curves: Vec<Curve> = traces
            .iter()
            .map(|(label, tr)| Curve {
                label: format!("log {label}"),
                x: tr.times.clone(),
                y: tr.twisted_norm_sq.iter().map(|v| v.ln()).collect(),
            })
            .collect();
        emit_svg(&curves, &ctx.out_dir.join("coupling.svg"))?;
    }
    Ok(Outcome {
        numerical_failure: failure,
        summary,
    })
}

fn kernel_for(cfg: &ExperimentConfig, p: &Option<Preset>) -> (KernelKind, &'static str) {
    match cfg.sampler.as_deref().unwrap_or("malt") {
        "malt" => (
            KernelKind::Malt {
                gamma: cfg.scalar_gamma().or(p.as_ref().map(|p| p.malt_gamma)).unwrap_or(1.0),
            },
            "malt",
        ),
        _ => (
            KernelKind::Ghmc {
                alpha: cfg.scalar_alpha(),
            },
            "ghmc",
        ),
    }
}

fn cmd_tune(ctx: &Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let (target, p) = build_target(cfg)?;
    let (kind, _) = kernel_for(cfg, &p);
    let h0 = cfg.h.unwrap_or(0.1);
    let t = cfg
        .t
        .or(cfg.l.as_ref().map(|l| l[0] as f64 * p.as_ref().map(|p| p.h).unwrap_or(0.2)))
        .unwrap_or(1.6);
    let template = SamplerConfig::from_time(h0.min(t), t)?;
    let goal = cfg.target_accept.unwrap_or(0.651);
    let mut stream = ctx.stream();
    let cal = calibrate_step_size(&*target, kind, &template, goal, CalibrationBudget::default(), &mut stream)?;
    ctx.write_csv(
        "tune",
        "h,acceptance,converged",
        &[format!("{},{}", row(&[cal.h, cal.acceptance]), cal.converged as u8)],
    )?;
    let trace: Vec<String> = cal.trace.iter().enumerate().map(|(k, h)| format!("{k},{}", fmt_float(*h))).collect();
    ctx.write_csv("tune-trace", "iter,h", &trace)?;
    if ctx.plot {
        let x: Vec<f64> = (0..cal.trace.len()).map(|k| k as f64).collect();
        emit_svg(
            &[Curve {
                label: "h".into(),
                x,
                y: cal.trace.clone(),
            }],
            &ctx.out_dir.join("tune.svg"),
        )?;
    }
    Ok(Outcome {
        numerical_failure: !cal.converged,
        summary: vec![format!("h={:.5} acceptance={:.4} converged={}", cal.h, cal.acceptance, cal.converged)],
    })
}

fn cmd_chain(ctx: &Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let (target, p) = build_target(cfg)?;
    let h = cfg.h.or(p.as_ref().map(|p| p.h)).unwrap_or(0.2);
    let sampler = cfg.sampler.as_deref().unwrap_or("malt");
    let steps = match (&cfg.l, cfg.t) {
        (Some(l), _) => l[0],
        (None, Some(t)) => SamplerConfig::from_time(h, t)?.n_steps,
        (None, None) if sampler == "mala" => 1,
        (None, None) => 8,
    };
    let steps = if sampler == "mala" { 1 } else { steps };
    let gamma = cfg.scalar_gamma().or(p.as_ref().map(|p| p.malt_gamma)).unwrap_or(1.0);
    let c = SamplerConfig::from_steps(h, steps)?
        .samples(cfg.n.unwrap_or(10_000))
        .alpha(if sampler == "ghmc" { cfg.scalar_alpha() } else { 0.0 })
        .zero_policy(cfg.zero_policy());
    let c = match cfg.t {
        Some(t) if sampler == "rhmc" => SamplerConfig { t, ..c },
        _ => c,
    };
    let mut stream = ctx.stream();
    let chain = match sampler {
        "malt" => malt_run(&*target, &c.gamma(gamma), &mut stream)?,
        "rhmc" => rhmc_run(&*target, &c, &mut stream)?,
        _ => ghmc_run(&*target, &c, &mut stream)?,
    };
    if let Some(keep) = &cfg.keep_coords {
        if let Some(bad) = keep.iter().find(|&&k| k > chain.d) {
            return Err(config_err("keep_coords", format!("coordinate {bad} exceeds d={}", chain.d)));
        }
    }
    let mut buf = ctx.header().into_bytes();
    chain.write_csv(&mut buf, cfg.keep_coords.as_deref())?;
    fs::write(ctx.out_dir.join("chain.csv"), buf)?;
    if ctx.plot {
        let coord = cfg.keep_coords.as_ref().map(|k| k[0]).unwrap_or(chain.d);
        let y = chain.coordinate(coord - 1);
        let x: Vec<f64> = (0..y.len()).map(|k| k as f64).collect();
        emit_svg(
            &[Curve {
                label: format!("x_{coord}"),
                x,
                y,
            }],
            &ctx.out_dir.join("chain.svg"),
        )?;
    }
    let failure = !chain.positions.iter().all(|x| x.is_finite());
    Ok(Outcome {
        numerical_failure: failure,
        summary: vec![format!(
            "{sampler}: acceptance={:.4} gradients={}",
            chain.acceptance_rate(),
            chain.total_gradient_evals
        )],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub curves: Vec<Curve>,
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"];
const PANEL_W: f64 = 480.0;
const PANEL_H: f64 = 360.0;
const MARGIN: f64 = 56.0;

/// Standalone single-panel SVG line plot.
pub fn emit_svg(curves: &[Curve], path: &Path) -> Result<()> {
    emit_svg_panels(
        &[Panel {
            title: String::new(),
            curves: curves.to_vec(),
        }],
        path,
    )
}

/// Side-by-side panels with shared styling. Non-finite points are skipped.
pub fn emit_svg_panels(panels: &[Panel], path: &Path) -> Result<()> {
    fs::write(path, render_svg(panels)?)?;
    Ok(())
}

pub fn render_svg(panels: &[Panel]) -> Result<String> {
    if panels.is_empty() || panels.iter().any(|p| p.curves.is_empty()) {
        return Err(Error::Empty("nothing to plot".into()));
    }
    for c in panels.iter().flat_map(|p| &p.curves) {
        if c.x.is_empty() || c.x.len() != c.y.len() {
            return Err(Error::Empty(format!("curve `{}` is empty or has unequal series", c.label)));
        }
    }
    let width = PANEL_W * panels.len() as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{PANEL_H:.0}\" viewBox=\"0 0 {width:.0} {PANEL_H:.0}\" font-family=\"sans-serif\" font-size=\"11\">"
    );
    let _ = writeln!(s, "<rect x=\"0\" y=\"0\" width=\"{width:.0}\" height=\"{PANEL_H:.0}\" fill=\"white\"/>");
    for (k, p) in panels.iter().enumerate() {
        render_panel(&mut s, p, k as f64 * PANEL_W);
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn extent(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * (1.0 + lo.abs()) {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn render_panel(s: &mut String, p: &Panel, x0: f64) {
    let (xlo, xhi) = extent(p.curves.iter().flat_map(|c| c.x.iter().copied()));
    let (ylo, yhi) = extent(p.curves.iter().flat_map(|c| c.y.iter().copied()));
    let (left, right) = (x0 + MARGIN, x0 + PANEL_W - 16.0);
    let (top, bottom) = (28.0, PANEL_H - 40.0);
    let sx = |x: f64| left + (x - xlo) / (xhi - xlo) * (right - left);
    let sy = |y: f64| bottom - (y - ylo) / (yhi - ylo) * (bottom - top);
    if !p.title.is_empty() {
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">{}</text>",
            (left + right) / 2.0,
            xml_escape(&p.title)
        );
    }
    let _ = writeln!(
        s,
        "<path d=\"M{left:.2} {top:.2} L{left:.2} {bottom:.2} L{right:.2} {bottom:.2}\" stroke=\"black\" fill=\"none\"/>"
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let xv = xlo + f * (xhi - xlo);
        let yv = ylo + f * (yhi - ylo);
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
            sx(xv),
            bottom + 16.0,
            tick(xv)
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
            left - 4.0,
            sy(yv) + 4.0,
            tick(yv)
        );
        let _ = writeln!(
            s,
            "<path d=\"M{left:.2} {:.2} L{right:.2} {:.2}\" stroke=\"#dddddd\" fill=\"none\"/>",
            sy(yv),
            sy(yv)
        );
    }
    for (i, c) in p.curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut d = String::new();
        let mut pen_down = false;
        for (x, y) in c.x.iter().zip(&c.y) {
            if x.is_finite() && y.is_finite() {
                let _ = write!(d, "{}{:.2} {:.2} ", if pen_down { "L" } else { "M" }, sx(*x), sy(*y));
                pen_down = true;
            } else {
                pen_down = false;
            }
        }
        let _ = writeln!(s, "<path d=\"{}\" stroke=\"{color}\" stroke-width=\"1.5\" fill=\"none\"/>", d.trim_end());
        let ly = top + 6.0 + 14.0 * i as f64;
        let _ = writeln!(
            s,
            "<path d=\"M{:.2} {ly:.2} L{:.2} {ly:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>",
            right - 130.0,
            right - 112.0
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\">{}</text>",
            right - 108.0,
            ly + 4.0,
            xml_escape(&c.label)
        );
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0] {
            let s = fmt_float(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn config_validation_names_fields() {
        let bad = ExperimentConfig {
            gamma: Some(vec![1.0, -0.5]),
            ..Default::default()
        };
        match bad.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "gamma"),
            other => panic!("{other:?}"),
        }
        assert!(ExperimentConfig::from_toml("alpha = [1.0]").is_err());
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
        assert!(ExperimentConfig::from_toml("preset = \"nope\"").is_err());
        let ok = ExperimentConfig::from_toml("seed = 7\nT = 1.5\nL = [3]\ngamma = [0.0, 2.0]").unwrap();
        assert_eq!(ok.t, Some(1.5));
        assert_eq!(ok.l, Some(vec![3]));
    }

    #[test]
    fn overlay_prefers_top() {
        let base = ExperimentConfig {
            seed: Some(1),
            h: Some(0.1),
            ..Default::default()
        };
        let top = ExperimentConfig {
            seed: Some(2),
            ..Default::default()
        };
        let m = base.overlay(&top);
        assert_eq!(m.seed, Some(2));
        assert_eq!(m.h, Some(0.1));
    }

    #[test]
    fn presets_match_benchmark_setup() {
        let g = preset("gaussian-d50").unwrap();
        assert_eq!(g.target.dim(), 50);
        assert_eq!(g.rows[0].kind, RowKind::Malt { gamma: 1.5 });
        let m = preset("mixture-d50").unwrap();
        let b = m.target.convexity_bounds().unwrap();
        assert!((b.m - 0.75).abs() < 1e-12 && (b.big_m - 50.0).abs() < 1e-12);
        assert_eq!(m.rows[1].steps, 4);
        let s = preset("student-k20-d50").unwrap();
        assert!(s.target.convexity_bounds().is_none());
        assert!(preset("other").is_err());
    }

    #[test]
    fn svg_is_deterministic_and_rejects_empty() {
        let c = Curve {
            label: "a<b".into(),
            x: vec![0.0, 1.0, 2.0],
            y: vec![1.0, 0.5, f64::NAN],
        };
        let a = render_svg(&[Panel {
            title: "t".into(),
            curves: vec![c.clone()],
        }])
        .unwrap();
        let b = render_svg(&[Panel {
            title: "t".into(),
            curves: vec![c],
        }])
        .unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with("<svg") && a.trim_end().ends_with("</svg>"));
        assert!(a.contains("a&lt;b"));
        assert!(render_svg(&[]).is_err());
        let empty = Curve {
            label: "e".into(),
            x: vec![],
            y: vec![],
        };
        assert!(emit_svg(&[empty], Path::new("/nonexistent/x.svg")).is_err());
    }
}
