//! Chain generators: MALT, generalized HMC (with HMC and MALA as special
//! cases), randomized HMC, and exact autoregressive samplers for Gaussians.
//!
//! Stream consumption per iteration is fixed by the kernel: RHMC first draws its
//! duration; every kernel then draws `d` normals for the momentum refreshment,
//! `2d` normals per step only when the friction is positive, and one uniform for
//! the accept test. MALT with zero friction therefore replays HMC exactly.

use std::io::Write;

use crate::dynamics::{
    leapfrog_in_place, local_energy_error_cached, matexp_2x2, obabo_in_place, ou_exact_step, PhaseState,
    StepParams,
};
use crate::error::{invalid, Result};
use crate::rng::RngStream;
use crate::targets::TargetModel;

/// How randomized HMC treats a duration shorter than one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZeroLengthPolicy {
    /// Run one step.
    #[default]
    Clamp,
    /// Redraw the duration until at least one step fits.
    Resample,
}

impl std::str::FromStr for ZeroLengthPolicy {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "clamp" => Ok(Self::Clamp),
            "resample" => Ok(Self::Resample),
            other => Err(format!("unknown zero-length policy `{other}` (clamp|resample)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub h: f64,
    /// Integration time; the mean duration for randomized HMC.
    pub t: f64,
    pub n_steps: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub zero_policy: ZeroLengthPolicy,
    /// Iterations discarded before recording; `None` picks 0 for stationary
    /// starts and `n_samples / 10` otherwise.
    pub warmup: Option<usize>,
    /// Initial position; `None` draws from the target when it can.
    pub start: Option<Vec<f64>>,
}

impl SamplerConfig {
    /// `L = floor(T / h)` steps of size `h`.
    pub fn from_time(h: f64, t: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid(format!("step size must be positive, got {h}")));
        }
        if !(t >= h) {
            return Err(invalid(format!("integration time {t} is shorter than the step {h}")));
        }
        Ok(Self::base(h, t, (t / h).floor() as usize))
    }

    /// Exactly `n_steps` steps of size `h`, so `T = n_steps · h`.
    pub fn from_steps(h: f64, n_steps: usize) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid(format!("step size must be positive, got {h}")));
        }
        if n_steps == 0 {
            return Err(invalid("need at least one step"));
        }
        Ok(Self::base(h, h * n_steps as f64, n_steps))
    }

    fn base(h: f64, t: f64, n_steps: usize) -> Self {
        Self {
            h,
            t,
            n_steps,
            gamma: 0.0,
            alpha: 0.0,
            n_samples: 1000,
            seed: 0,
            zero_policy: ZeroLengthPolicy::Clamp,
            warmup: None,
            start: None,
        }
    }

    pub fn gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn samples(mut self, n: usize) -> Self {
        self.n_samples = n;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn warmup(mut self, n: usize) -> Self {
        self.warmup = Some(n);
        self
    }

    pub fn start(mut self, x: Vec<f64>) -> Self {
        self.start = Some(x);
        self
    }

    pub fn zero_policy(mut self, p: ZeroLengthPolicy) -> Self {
        self.zero_policy = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(invalid(format!("step size must be positive, got {}", self.h)));
        }
        if self.n_steps == 0 {
            return Err(invalid("need at least one step"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(invalid(format!("friction must be >= 0, got {}", self.gamma)));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(invalid(format!("persistence must lie in [0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

/// A proposed trajectory `z_0, …, z_L` with its accumulated energy error.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<PhaseState>,
    pub delta: f64,
    pub local_errors: Vec<f64>,
    pub gradient_evals: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainResult {
    pub d: usize,
    /// Row-major `n_samples × d`.
    pub positions: Vec<f64>,
    pub accepted: Vec<bool>,
    pub deltas: Vec<f64>,
    /// Leapfrog or OBABO steps taken in each recorded iteration.
    pub steps: Vec<u32>,
    pub total_gradient_evals: u64,
    pub final_state: PhaseState,
}

impl ChainResult {
    fn with_capacity(d: usize, n: usize) -> Self {
        Self {
            d,
            positions: Vec::with_capacity(n * d),
            accepted: Vec::with_capacity(n),
            deltas: Vec::with_capacity(n),
            steps: Vec::with_capacity(n),
            total_gradient_evals: 0,
            final_state: PhaseState::new(vec![0.0; d], vec![0.0; d]),
        }
    }

    pub fn len(&self) -> usize {
        self.accepted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accepted.is_empty()
    }

    pub fn position(&self, n: usize) -> &[f64] {
        &self.positions[n * self.d..(n + 1) * self.d]
    }

    pub fn coordinate(&self, i: usize) -> Vec<f64> {
        self.positions.iter().skip(i).step_by(self.d).copied().collect()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.accepted.is_empty() {
            return 0.0;
        }
        self.accepted.iter().filter(|a| **a).count() as f64 / self.accepted.len() as f64
    }

    /// Mean number of steps per recorded iteration.
    pub fn mean_steps(&self) -> f64 {
        self.steps.iter().map(|&s| s as f64).sum::<f64>() / self.steps.len().max(1) as f64
    }

    fn record(&mut self, x: &[f64], accepted: bool, delta: f64, steps: u32) {
        self.positions.extend_from_slice(x);
        self.accepted.push(accepted);
        self.deltas.push(delta);
        self.steps.push(steps);
    }

    /// One row per iteration: `iter, accepted, delta, x_…` restricted to `keep`
    /// (1-based coordinate indices) when given.
    pub fn write_csv<W: Write>(&self, mut w: W, keep: Option<&[usize]>) -> Result<()> {
        let all: Vec<usize> = (1..=self.d).collect();
        let keep = keep.unwrap_or(&all);
        if let Some(bad) = keep.iter().find(|&&k| k == 0 || k > self.d) {
            return Err(invalid(format!("coordinate {bad} outside 1..={}", self.d)));
        }
        let mut header = String::from("iter,accepted,delta");
        for k in keep {
            header.push_str(&format!(",x_{k}"));
        }
        writeln!(w, "{header}")?;
        for n in 0..self.len() {
            let mut line = format!("{},{},{}", n, self.accepted[n] as u8, crate::cli::fmt_float(self.deltas[n]));
            let row = self.position(n);
            for &k in keep {
                line.push(',');
                line.push_str(&crate::cli::fmt_float(row[k - 1]));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Initial position and whether it is an exact draw from the target.
fn initial_position<T: TargetModel + ?Sized>(target: &T, config: &SamplerConfig, stream: &mut RngStream) -> Result<(Vec<f64>, bool)> {
    if let Some(x) = &config.start {
        if x.len() != target.dim() {
            return Err(invalid(format!("start has length {} but target has d={}", x.len(), target.dim())));
        }
        return Ok((x.clone(), false));
    }
    match target.sample_stationary(stream) {
        Some(x) => Ok((x, true)),
        None => Ok((vec![0.0; target.dim()], false)),
    }
}

fn warmup_len(config: &SamplerConfig, stationary: bool) -> usize {
    config.warmup.unwrap_or(if stationary { 0 } else { config.n_samples / 10 })
}

/// Position, potential and gradient of the current chain state.
struct Current {
    x: Vec<f64>,
    phi: f64,
    grad: Vec<f64>,
}

impl Current {
    fn new<T: TargetModel + ?Sized>(target: &T, x: Vec<f64>) -> Self {
        let mut grad = vec![0.0; x.len()];
        let phi = target.potential_and_gradient(&x, &mut grad);
        Self { x, phi, grad }
    }
}

/// Reusable buffers for one MALT proposal.
struct MaltScratch {
    x: Vec<f64>,
    v: Vec<f64>,
    grad: Vec<f64>,
    x_prev: Vec<f64>,
    g_prev: Vec<f64>,
    xi: Vec<f64>,
    xi_prime: Vec<f64>,
    phi: f64,
}

impl MaltScratch {
    fn new(d: usize) -> Self {
        Self {
            x: vec![0.0; d],
            v: vec![0.0; d],
            grad: vec![0.0; d],
            x_prev: vec![0.0; d],
            g_prev: vec![0.0; d],
            xi: vec![0.0; d],
            xi_prime: vec![0.0; d],
            phi: 0.0,
        }
    }
}

/// Fresh velocity, `L` OBABO steps, and the summed local errors. The end state
/// is left in `s`; `on_step` sees each intermediate state and local error.
fn malt_proposal<T: TargetModel + ?Sized>(
    target: &T,
    cur: &Current,
    params: &StepParams,
    n_steps: usize,
    stream: &mut RngStream,
    s: &mut MaltScratch,
    mut on_step: impl FnMut(&[f64], &[f64], f64),
) -> f64 {
    s.x.copy_from_slice(&cur.x);
    s.grad.copy_from_slice(&cur.grad);
    s.phi = cur.phi;
    stream.fill_standard_normal(&mut s.v);
    on_step(&s.x, &s.v, 0.0);
    let noisy = params.gamma() > 0.0;
    let mut delta = 0.0;
    for _ in 0..n_steps {
        s.x_prev.copy_from_slice(&s.x);
        s.g_prev.copy_from_slice(&s.grad);
        let phi0 = s.phi;
        let noise = if noisy {
            stream.fill_standard_normal(&mut s.xi);
            stream.fill_standard_normal(&mut s.xi_prime);
            Some((&s.xi[..], &s.xi_prime[..]))
        } else {
            None
        };
        s.phi = obabo_in_place(target, &mut s.x, &mut s.v, &mut s.grad, params, noise);
        let e = local_energy_error_cached(phi0, s.phi, &s.x_prev, &s.x, &s.g_prev, &s.grad, params.h());
        delta += e;
        on_step(&s.x, &s.v, e);
    }
    delta
}

/// Accepts with probability `1 ∧ e^{-Δ}`; always consumes one uniform.
fn metropolis(delta: f64, stream: &mut RngStream) -> bool {
    let u = stream.uniform();
    u <= (-delta).exp()
}

/// One MALT proposal from `start_x` with a freshly drawn velocity.
pub fn propose_malt_trajectory<T: TargetModel + ?Sized>(
    target: &T,
    start_x: &[f64],
    config: &SamplerConfig,
    stream: &mut RngStream,
) -> Result<Trajectory> {
    config.validate()?;
    let params = StepParams::new(config.h, config.gamma)?;
    let cur = Current::new(target, start_x.to_vec());
    let mut scratch = MaltScratch::new(target.dim());
    let mut states = Vec::with_capacity(config.n_steps + 1);
    let mut local_errors = Vec::with_capacity(config.n_steps);
    let delta = malt_proposal(target, &cur, &params, config.n_steps, stream, &mut scratch, |x, v, e| {
        if !states.is_empty() {
            local_errors.push(e);
        }
        states.push(PhaseState::new(x.to_vec(), v.to_vec()));
    });
    Ok(Trajectory {
        states,
        delta,
        local_errors,
        gradient_evals: config.n_steps as u64 + 1,
    })
}

/// Energy error of a MALT proposal only: one fresh start-gradient plus `L` steps.
pub fn malt_delta<T: TargetModel + ?Sized>(
    target: &T,
    start_x: &[f64],
    params: &StepParams,
    n_steps: usize,
    stream: &mut RngStream,
) -> f64 {
    let cur = Current::new(target, start_x.to_vec());
    let mut scratch = MaltScratch::new(target.dim());
    malt_proposal(target, &cur, params, n_steps, stream, &mut scratch, |_, _, _| {})
}

/// Metropolis Adjusted Langevin Trajectories.
pub fn malt_run<T: TargetModel + ?Sized>(target: &T, config: &SamplerConfig, stream: &mut RngStream) -> Result<ChainResult> {
    config.validate()?;
    let params = StepParams::new(config.h, config.gamma)?;
    let d = target.dim();
    let (x0, stationary) = initial_position(target, config, stream)?;
    let warmup = warmup_len(config, stationary);
    let mut cur = Current::new(target, x0);
    let mut out = ChainResult::with_capacity(d, config.n_samples);
    out.total_gradient_evals = 1;
    let mut s = MaltScratch::new(d);
    let mut last_v = vec![0.0; d];
    for it in 0..warmup + config.n_samples {
        let delta = malt_proposal(target, &cur, &params, config.n_steps, stream, &mut s, |_, _, _| {});
        out.total_gradient_evals += config.n_steps as u64;
        let acc = metropolis(delta, stream);
        if acc {
            std::mem::swap(&mut cur.x, &mut s.x);
            std::mem::swap(&mut cur.grad, &mut s.grad);
            cur.phi = s.phi;
            last_v.copy_from_slice(&s.v);
        }
        if it >= warmup {
            out.record(&cur.x, acc, delta, config.n_steps as u32);
        }
    }
    out.final_state = PhaseState::new(cur.x, last_v);
    Ok(out)
}

/// State of a momentum-persistent Hamiltonian chain.
struct HamiltonianState {
    cur: Current,
    v: Vec<f64>,
}

struct LeapfrogScratch {
    x: Vec<f64>,
    v: Vec<f64>,
    grad: Vec<f64>,
    xi: Vec<f64>,
}

/// One GHMC transition with `n_steps` leapfrog steps. Returns `(Δ, accepted)`.
fn ghmc_transition<T: TargetModel + ?Sized>(
    target: &T,
    st: &mut HamiltonianState,
    h: f64,
    n_steps: usize,
    alpha: f64,
    stream: &mut RngStream,
    s: &mut LeapfrogScratch,
) -> (f64, bool) {
    stream.fill_standard_normal(&mut s.xi);
    let keep = (1.0 - alpha * alpha).sqrt();
    for i in 0..st.v.len() {
        st.v[i] = alpha * st.v[i] + keep * s.xi[i];
    }
    s.x.copy_from_slice(&st.cur.x);
    s.v.copy_from_slice(&st.v);
    s.grad.copy_from_slice(&st.cur.grad);
    let mut phi = st.cur.phi;
    for _ in 0..n_steps {
        phi = leapfrog_in_place(target, &mut s.x, &mut s.v, &mut s.grad, h);
    }
    let k0: f64 = st.v.iter().map(|v| v * v).sum();
    let k1: f64 = s.v.iter().map(|v| v * v).sum();
    let delta = (phi - st.cur.phi) + 0.5 * (k1 - k0);
    let acc = metropolis(delta, stream);
    if acc {
        std::mem::swap(&mut st.cur.x, &mut s.x);
        std::mem::swap(&mut st.cur.grad, &mut s.grad);
        std::mem::swap(&mut st.v, &mut s.v);
        st.cur.phi = phi;
    } else {
        st.v.iter_mut().for_each(|v| *v = -*v);
    }
    (delta, acc)
}

fn hamiltonian_chain<T: TargetModel + ?Sized>(
    target: &T,
    config: &SamplerConfig,
    stream: &mut RngStream,
    mut steps_for_iter: impl FnMut(&mut RngStream) -> Result<usize>,
) -> Result<ChainResult> {
    config.validate()?;
    let d = target.dim();
    let (x0, stationary) = initial_position(target, config, stream)?;
    let warmup = warmup_len(config, stationary);
    let mut st = HamiltonianState {
        cur: Current::new(target, x0),
        v: vec![0.0; d],
    };
    // a stationary velocity so partial refreshment starts in equilibrium
    if config.alpha > 0.0 {
        stream.fill_standard_normal(&mut st.v);
    }
    let mut s = LeapfrogScratch {
        x: vec![0.0; d],
        v: vec![0.0; d],
        grad: vec![0.0; d],
        xi: vec![0.0; d],
    };
    let mut out = ChainResult::with_capacity(d, config.n_samples);
    out.total_gradient_evals = 1;
    for it in 0..warmup + config.n_samples {
        let n_steps = steps_for_iter(stream)?;
        let (delta, acc) = ghmc_transition(target, &mut st, config.h, n_steps, config.alpha, stream, &mut s);
        out.total_gradient_evals += n_steps as u64;
        if it >= warmup {
            out.record(&st.cur.x, acc, delta, n_steps as u32);
        }
    }
    out.final_state = PhaseState::new(st.cur.x, st.v);
    Ok(out)
}

/// Generalized HMC with persistence `α`; `α = 0` is HMC and `L = 1` with `α = 0` is MALA.
pub fn ghmc_run<T: TargetModel + ?Sized>(target: &T, config: &SamplerConfig, stream: &mut RngStream) -> Result<ChainResult> {
    let n = config.n_steps;
    hamiltonian_chain(target, config, stream, |_| Ok(n))
}

/// Number of leapfrog steps for one randomized-HMC iteration.
pub fn rhmc_steps(mean_t: f64, h: f64, policy: ZeroLengthPolicy, stream: &mut RngStream) -> Result<usize> {
    loop {
        let tau = stream.exponential(1.0 / mean_t)?;
        let n = (tau / h).floor() as usize;
        match (n, policy) {
            (0, ZeroLengthPolicy::Clamp) => return Ok(1),
            (0, ZeroLengthPolicy::Resample) => continue,
            (n, _) => return Ok(n),
        }
    }
}

/// Expected steps per iteration under the clamp policy:
/// `E[max(1, floor(τ/h))]` for `τ ~ Exp(mean T)`, i.e. `1/(e^{h/T} − 1) + e^{−h/T}`.
pub fn rhmc_expected_steps(mean_t: f64, h: f64, policy: ZeroLengthPolicy) -> f64 {
    let q = (-h / mean_t).exp();
    let floor_mean = q / (1.0 - q);
    match policy {
        ZeroLengthPolicy::Clamp => floor_mean + (1.0 - q),
        ZeroLengthPolicy::Resample => floor_mean / q,
    }
}

/// Randomized HMC: each iteration integrates for an `Exp(mean config.t)` duration.
pub fn rhmc_run<T: TargetModel + ?Sized>(target: &T, config: &SamplerConfig, stream: &mut RngStream) -> Result<ChainResult> {
    if !(config.t > 0.0) {
        return Err(invalid(format!("mean integration time must be positive, got {}", config.t)));
    }
    let (t, h, p) = (config.t, config.h, config.zero_policy);
    hamiltonian_chain(target, config, stream, |s| rhmc_steps(t, h, p, s))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind {
    Malt { gamma: f64 },
    Ghmc { alpha: f64 },
}

/// A chain advanced one iteration at a time, with step size and length free
/// to change between iterations.
pub struct Stepper<'a, T: TargetModel + ?Sized> {
    target: &'a T,
    kind: KernelKind,
    st: HamiltonianState,
    malt: MaltScratch,
    leap: LeapfrogScratch,
}

impl<'a, T: TargetModel + ?Sized> Stepper<'a, T> {
    pub fn new(target: &'a T, kind: KernelKind, x0: Vec<f64>) -> Self {
        let d = target.dim();
        Self {
            target,
            kind,
            st: HamiltonianState {
                cur: Current::new(target, x0),
                v: vec![0.0; d],
            },
            malt: MaltScratch::new(d),
            leap: LeapfrogScratch {
                x: vec![0.0; d],
                v: vec![0.0; d],
                grad: vec![0.0; d],
                xi: vec![0.0; d],
            },
        }
    }

    /// One iteration; returns `(Δ, accepted)`.
    pub fn step(&mut self, h: f64, n_steps: usize, stream: &mut RngStream) -> Result<(f64, bool)> {
        match self.kind {
            KernelKind::Malt { gamma } => {
                let params = StepParams::new(h, gamma)?;
                let delta = malt_proposal(self.target, &self.st.cur, &params, n_steps, stream, &mut self.malt, |_, _, _| {});
                let acc = metropolis(delta, stream);
                if acc {
                    std::mem::swap(&mut self.st.cur.x, &mut self.malt.x);
                    std::mem::swap(&mut self.st.cur.grad, &mut self.malt.grad);
                    self.st.cur.phi = self.malt.phi;
                }
                Ok((delta, acc))
            }
            KernelKind::Ghmc { alpha } => Ok(ghmc_transition(
                self.target,
                &mut self.st,
                h,
                n_steps,
                alpha,
                stream,
                &mut self.leap,
            )),
        }
    }

    pub fn position(&self) -> &[f64] {
        &self.st.cur.x
    }
}

/// OBABO without the accept/reject step; biased, for diagnostics checks.
pub fn unadjusted_obabo_run<T: TargetModel + ?Sized>(
    target: &T,
    config: &SamplerConfig,
    stream: &mut RngStream,
) -> Result<ChainResult> {
    config.validate()?;
    let params = StepParams::new(config.h, config.gamma)?;
    let d = target.dim();
    let (x0, stationary) = initial_position(target, config, stream)?;
    let warmup = warmup_len(config, stationary);
    let mut cur = Current::new(target, x0);
    let mut v = vec![0.0; d];
    stream.fill_standard_normal(&mut v);
    let (mut xi, mut xi2) = (vec![0.0; d], vec![0.0; d]);
    let mut out = ChainResult::with_capacity(d, config.n_samples);
    out.total_gradient_evals = 1;
    for it in 0..warmup + config.n_samples {
        for _ in 0..config.n_steps {
            stream.fill_standard_normal(&mut xi);
            stream.fill_standard_normal(&mut xi2);
            cur.phi = obabo_in_place(target, &mut cur.x, &mut v, &mut cur.grad, &params, Some((&xi, &xi2)));
        }
        out.total_gradient_evals += config.n_steps as u64;
        if it >= warmup {
            out.record(&cur.x, true, 0.0, config.n_steps as u32);
        }
    }
    out.final_state = PhaseState::new(cur.x, v);
    Ok(out)
}

fn exact_chain(scales: &[f64], n: usize, stream: &mut RngStream) -> Result<(ChainResult, Vec<f64>)> {
    if scales.iter().any(|s| !(*s > 0.0)) {
        return Err(invalid("scales must be positive"));
    }
    let x: Vec<f64> = scales.iter().map(|s| s * stream.standard_normal()).collect();
    Ok((ChainResult::with_capacity(scales.len(), n), x))
}

/// Langevin dynamics run exactly for time `T` from a fresh velocity at every
/// iteration: an AR(1) chain per coordinate with root `ρ_{i,γ}(T)`.
pub fn exact_langevin_ar_run(scales: &[f64], gamma: f64, t: f64, n_samples: usize, stream: &mut RngStream) -> Result<ChainResult> {
    let (mut out, x) = exact_chain(scales, n_samples, stream)?;
    let d = scales.len();
    let mut state = PhaseState::new(x, vec![0.0; d]);
    for _ in 0..n_samples {
        stream.fill_standard_normal(&mut state.v);
        state = ou_exact_step(scales, gamma, t, &state, stream)?;
        out.record(&state.x, true, 0.0, 0);
    }
    out.final_state = state;
    Ok(out)
}

/// Exact Hamiltonian flow for `Exp(mean T)` durations with full refreshment.
pub fn exact_rhmc_ar_run(scales: &[f64], mean_t: f64, n_samples: usize, stream: &mut RngStream) -> Result<ChainResult> {
    if !(mean_t > 0.0) {
        return Err(invalid(format!("mean integration time must be positive, got {mean_t}")));
    }
    let (mut out, mut y) = exact_chain(scales, n_samples, stream)?;
    let d = scales.len();
    for _ in 0..n_samples {
        let tau = stream.exponential(1.0 / mean_t)?;
        for i in 0..d {
            let a = tau / scales[i];
            y[i] = a.cos() * y[i] + scales[i] * a.sin() * stream.standard_normal();
        }
        out.record(&y, true, 0.0, 0);
    }
    out.final_state = PhaseState::new(y, vec![0.0; d]);
    Ok(out)
}

/// Randomized HMC with persistence `α` on Gaussian coordinates, with exact
/// flow between refreshment events of rate `λ`. Records positions on the grid
/// `k · lag`, `k = 1..=n_samples`.
pub fn exact_persistent_rhmc_run(
    scales: &[f64],
    lambda: f64,
    alpha: f64,
    lag: f64,
    n_samples: usize,
    stream: &mut RngStream,
) -> Result<ChainResult> {
    if !(lambda > 0.0) || !(0.0..1.0).contains(&alpha) || !(lag > 0.0) {
        return Err(invalid("need λ > 0, α ∈ [0, 1), lag > 0"));
    }
    let (mut out, x) = exact_chain(scales, n_samples, stream)?;
    let d = scales.len();
    let mut state = PhaseState::new(x, vec![0.0; d]);
    stream.fill_standard_normal(&mut state.v);
    let keep = (1.0 - alpha * alpha).sqrt();
    let mut next_event = stream.exponential(lambda)?;
    for _ in 0..n_samples {
        let mut remaining = lag;
        while next_event < remaining {
            flow(scales, next_event, &mut state);
            remaining -= next_event;
            for v in state.v.iter_mut() {
                *v = alpha * *v + keep * stream.standard_normal();
            }
            next_event = stream.exponential(lambda)?;
        }
        flow(scales, remaining, &mut state);
        next_event -= remaining;
        out.record(&state.x, true, 0.0, 0);
    }
    out.final_state = state;
    Ok(out)
}

/// Exact Hamiltonian flow for time `t` on independent Gaussian coordinates.
fn flow(scales: &[f64], t: f64, s: &mut PhaseState) {
    for i in 0..scales.len() {
        let m = matexp_2x2(scales[i], 0.0, t);
        let (x, v) = (s.x[i], s.v[i]);
        s.x[i] = m[0][0] * x + m[0][1] * v;
        s.v[i] = m[1][0] * x + m[1][1] * v;
    }
}
