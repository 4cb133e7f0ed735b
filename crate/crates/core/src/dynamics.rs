//! One-step integrators, the local energy error, and exact Ornstein–Uhlenbeck
//! transitions for Gaussian coordinates.
//!
//! Every integrator consumes the gradient at its starting point and returns the
//! gradient at its end point, so a chain of `L` steps costs `L` fresh gradients.

use crate::error::{invalid, Result};
use crate::rng::RngStream;
use crate::targets::TargetModel;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl PhaseState {
    pub fn new(x: Vec<f64>, v: Vec<f64>) -> Self {
        debug_assert_eq!(x.len(), v.len());
        Self { x, v }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.v).all(|z| z.is_finite())
    }
}

/// Step size and friction, with `eta = exp(-gamma h / 2)` cached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    h: f64,
    gamma: f64,
    eta: f64,
    noise: f64,
}

impl StepParams {
    pub fn new(h: f64, gamma: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid(format!("step size must be positive, got {h}")));
        }
        if !(gamma >= 0.0) || gamma.is_nan() {
            return Err(invalid(format!("friction must be >= 0, got {gamma}")));
        }
        let eta = (-gamma * h / 2.0).exp();
        // sqrt(1 - eta²) without cancellation for small gamma h
        let noise = (-(-gamma * h).exp_m1()).sqrt();
        Ok(Self { h, gamma, eta, noise })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `sqrt(1 - eta²)`.
    pub fn noise_scale(&self) -> f64 {
        self.noise
    }
}

/// The two velocity refreshment draws of one OBABO step.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePair {
    pub xi: Vec<f64>,
    pub xi_prime: Vec<f64>,
}

impl NoisePair {
    pub fn draw(stream: &mut RngStream, d: usize) -> Self {
        let mut xi = vec![0.0; d];
        let mut xi_prime = vec![0.0; d];
        stream.fill_standard_normal(&mut xi);
        stream.fill_standard_normal(&mut xi_prime);
        Self { xi, xi_prime }
    }
}

/// In-place BAB step. `grad` holds `∇Φ(x)` on entry and `∇Φ(x₁)` on exit;
/// returns `Φ(x₁)`.
pub fn leapfrog_in_place<T: TargetModel + ?Sized>(
    target: &T,
    x: &mut [f64],
    v: &mut [f64],
    grad: &mut [f64],
    h: f64,
) -> f64 {
    let half = 0.5 * h;
    for i in 0..x.len() {
        v[i] -= half * grad[i];
        x[i] += h * v[i];
    }
    let phi = target.potential_and_gradient(x, grad);
    for i in 0..x.len() {
        v[i] -= half * grad[i];
    }
    phi
}

/// Partial refreshment `v ← η v + sqrt(1-η²) ξ`.
#[inline]
fn refresh(v: &mut [f64], xi: &[f64], eta: f64, scale: f64) {
    for (v, xi) in v.iter_mut().zip(xi) {
        *v = eta * *v + scale * xi;
    }
}

/// In-place OBABO step with the same gradient contract as [`leapfrog_in_place`].
/// With `gamma == 0` the refreshments are skipped and `noise` may be `None`.
pub fn obabo_in_place<T: TargetModel + ?Sized>(
    target: &T,
    x: &mut [f64],
    v: &mut [f64],
    grad: &mut [f64],
    params: &StepParams,
    noise: Option<(&[f64], &[f64])>,
) -> f64 {
    let active = params.gamma > 0.0;
    if active {
        let (xi, _) = noise.expect("OBABO with positive friction needs noise");
        refresh(v, xi, params.eta, params.noise);
    }
    let phi = leapfrog_in_place(target, x, v, grad, params.h);
    if active {
        let (_, xi_prime) = noise.expect("OBABO with positive friction needs noise");
        refresh(v, xi_prime, params.eta, params.noise);
    }
    phi
}

/// BAB step from `state`; `grad0 = ∇Φ(state.x)`. Returns the new state and `∇Φ(x₁)`.
pub fn leapfrog_step<T: TargetModel + ?Sized>(
    target: &T,
    state: &PhaseState,
    grad0: &[f64],
    h: f64,
) -> (PhaseState, Vec<f64>) {
    let mut out = state.clone();
    let mut grad = grad0.to_vec();
    leapfrog_in_place(target, &mut out.x, &mut out.v, &mut grad, h);
    (out, grad)
}

/// OBABO step from `state`; `grad0 = ∇Φ(state.x)`. Returns the new state and `∇Φ(x₁)`.
pub fn obabo_step<T: TargetModel + ?Sized>(
    target: &T,
    state: &PhaseState,
    grad0: &[f64],
    params: &StepParams,
    noise: &NoisePair,
) -> (PhaseState, Vec<f64>) {
    let mut out = state.clone();
    let mut grad = grad0.to_vec();
    obabo_in_place(
        target,
        &mut out.x,
        &mut out.v,
        &mut grad,
        params,
        Some((&noise.xi, &noise.xi_prime)),
    );
    (out, grad)
}

/// `E_h(x₀, x₁)` from cached potentials and gradients.
pub fn local_energy_error_cached(
    phi0: f64,
    phi1: f64,
    x0: &[f64],
    x1: &[f64],
    grad0: &[f64],
    grad1: &[f64],
    h: f64,
) -> f64 {
    let mut cross = 0.0;
    let mut g1sq = 0.0;
    let mut g0sq = 0.0;
    for i in 0..x0.len() {
        cross += (x1[i] - x0[i]) * (grad1[i] + grad0[i]);
        g1sq += grad1[i] * grad1[i];
        g0sq += grad0[i] * grad0[i];
    }
    (phi1 - phi0) - 0.5 * cross + h * h / 8.0 * (g1sq - g0sq)
}

/// `E_h(x₀,x₁) = Φ(x₁) − Φ(x₀) − ½(x₁−x₀)ᵀ(∇Φ(x₁)+∇Φ(x₀)) + h²/8 (|∇Φ(x₁)|² − |∇Φ(x₀)|²)`.
/// Exactly antisymmetric under swapping the endpoints.
pub fn local_energy_error<T: TargetModel + ?Sized>(
    target: &T,
    x0: &[f64],
    x1: &[f64],
    grad0: &[f64],
    grad1: &[f64],
    h: f64,
) -> f64 {
    local_energy_error_cached(target.potential(x0), target.potential(x1), x0, x1, grad0, grad1, h)
}

pub type Mat2 = [[f64; 2]; 2];

/// Width of the band around critical damping handled by the series branch.
const CRITICAL_BAND: f64 = 1e-6;

/// `e^{-T A}` for `A = [[0, -1], [σ⁻², γ]]`, the drift of Langevin dynamics on a
/// Gaussian coordinate of scale `σ`. Entry `(0, 0)` is the position ACF.
pub fn matexp_2x2(sigma: f64, gamma: f64, t: f64) -> Mat2 {
    let inv = 1.0 / sigma;
    let half = 0.5 * gamma;
    let delta = half - inv;
    let inv_sq = inv * inv;
    // e = e^{-γT/2}; ec = e·C, es = e·S with e^{-TA} = e·(C I − S (A − γ/2 I))
    let (ec, es) = if delta.abs() <= CRITICAL_BAND * inv {
        // κ = (γ/2)² − σ⁻² is tiny: sum C = Σ κⁿT²ⁿ/(2n)!, S = Σ κⁿT²ⁿ⁺¹/(2n+1)!
        let kappa = delta * (half + inv);
        let z = kappa * t * t;
        let (mut c, mut s) = (1.0, t);
        let (mut tc, mut ts) = (1.0, t);
        for n in 1..200 {
            let n = n as f64;
            tc *= z / ((2.0 * n - 1.0) * (2.0 * n));
            ts *= z / ((2.0 * n) * (2.0 * n + 1.0));
            c += tc;
            s += ts;
            if tc.abs() <= 1e-18 * c.abs() && ts.abs() <= 1e-18 * s.abs() {
                break;
            }
        }
        let e = (-half * t).exp();
        (e * c, e * s)
    } else if delta < 0.0 {
        let omega = ((inv - half) * (inv + half)).sqrt();
        let e = (-half * t).exp();
        let wt = omega * t;
        (e * wt.cos(), e * wt.sin() / omega)
    } else {
        let omega = (delta * (half + inv)).sqrt();
        // ω − γ/2 = −σ⁻²/(ω + γ/2), exact without cancellation
        let lead = (-inv_sq / (omega + half) * t).exp();
        let tail = (-2.0 * omega * t).exp();
        let sinh_part = -(-2.0 * omega * t).exp_m1();
        (lead * (1.0 + tail) / 2.0, lead * sinh_part / (2.0 * omega))
    };
    [[ec + es * half, es], [-es * inv_sq, ec - es * half]]
}

/// Exact Langevin transition of duration `t` for independent Gaussian coordinates
/// with scales `sigma`. Always consumes two normals per coordinate.
pub fn ou_exact_step(
    sigma: &[f64],
    gamma: f64,
    t: f64,
    state: &PhaseState,
    stream: &mut RngStream,
) -> Result<PhaseState> {
    if !(gamma >= 0.0) {
        return Err(invalid(format!("friction must be >= 0, got {gamma}")));
    }
    if !(t > 0.0) {
        return Err(invalid(format!("duration must be positive, got {t}")));
    }
    let mut out = state.clone();
    for i in 0..sigma.len() {
        let (xi, vi) = ou_coordinate(sigma[i], gamma, t, state.x[i], state.v[i], stream);
        out.x[i] = xi;
        out.v[i] = vi;
    }
    Ok(out)
}

fn ou_coordinate(sigma: f64, gamma: f64, t: f64, x: f64, v: f64, stream: &mut RngStream) -> (f64, f64) {
    let m = matexp_2x2(sigma, gamma, t);
    let z1 = stream.standard_normal();
    let z2 = stream.standard_normal();
    let mx = m[0][0] * x + m[0][1] * v;
    let mv = m[1][0] * x + m[1][1] * v;
    if gamma == 0.0 {
        return (mx, mv);
    }
    let s2 = sigma * sigma;
    // Σ∞ − M Σ∞ Mᵀ with Σ∞ = diag(σ², 1)
    let c11 = s2 - (m[0][0] * m[0][0] * s2 + m[0][1] * m[0][1]);
    let c12 = -(m[0][0] * m[1][0] * s2 + m[0][1] * m[1][1]);
    let c22 = 1.0 - (m[1][0] * m[1][0] * s2 + m[1][1] * m[1][1]);
    let (l11, l21) = if c11 > 1e-15 * s2 {
        let l11 = c11.sqrt();
        (l11, c12 / l11)
    } else {
        (0.0, 0.0)
    };
    let l22 = (c22 - l21 * l21).max(0.0).sqrt();
    (mx + l11 * z1, mv + l21 * z1 + l22 * z2)
}

/// `sqrt(∫_a^b e^{-2γ(b-u)} du)`, the scale of the weighted Brownian integral.
fn ou_noise_scale(gamma: f64, len: f64) -> f64 {
    if gamma == 0.0 {
        len.sqrt()
    } else {
        (-(-2.0 * gamma * len).exp_m1() / (2.0 * gamma)).sqrt()
    }
}

/// Aggregates the unit-variance refreshment noises on `(s, m)` and `(m, t)` into
/// the one on `(s, t)` driven by the same Brownian path.
pub fn refine_noise(s: f64, m: f64, t: f64, gamma: f64, xi_sm: f64, xi_mt: f64) -> f64 {
    let c_sm = ou_noise_scale(gamma, m - s);
    let c_mt = ou_noise_scale(gamma, t - m);
    let c_st = ou_noise_scale(gamma, t - s);
    ((-gamma * (t - m)).exp() * c_sm * xi_sm + c_mt * xi_mt) / c_st
}

/// Pairwise aggregation of consecutive equal-length intervals of width `width`.
/// `fine` has even length; the result has half the length.
pub fn coarsen_noise(fine: &[Vec<f64>], width: f64, gamma: f64) -> Vec<Vec<f64>> {
    assert!(fine.len() % 2 == 0, "noise grid must have even length");
    fine.chunks(2)
        .map(|pair| {
            pair[0]
                .iter()
                .zip(&pair[1])
                .map(|(a, b)| refine_noise(0.0, width, 2.0 * width, gamma, *a, *b))
                .collect()
        })
        .collect()
}

/// Runs OBABO steps of size `h` where step `k` uses half-step noises
/// `noise[2k]` and `noise[2k+1]`.
fn obabo_path<T: TargetModel + ?Sized>(target: &T, start: &PhaseState, params: &StepParams, noise: &[Vec<f64>]) -> PhaseState {
    let mut s = start.clone();
    let mut grad = vec![0.0; s.dim()];
    target.gradient(&s.x, &mut grad);
    for k in 0..noise.len() / 2 {
        obabo_in_place(
            target,
            &mut s.x,
            &mut s.v,
            &mut grad,
            params,
            Some((&noise[2 * k], &noise[2 * k + 1])),
        );
    }
    s
}

/// Root-mean-square distance at time `duration` between OBABO paths at step
/// `h` and `h/2` driven by the same Brownian path, for each `h = h_max / 2^j`,
/// `j = 0..levels`. Starts are drawn from `target`'s stationary law when available.
pub fn self_convergence_errors<T: TargetModel + ?Sized>(
    target: &T,
    gamma: f64,
    duration: f64,
    h_max: f64,
    levels: usize,
    n_paths: usize,
    stream: &mut RngStream,
) -> Result<Vec<(f64, f64)>> {
    let steps_coarse = (duration / h_max).round() as usize;
    if steps_coarse == 0 || ((steps_coarse as f64) * h_max - duration).abs() > 1e-9 * duration {
        return Err(invalid("duration must be a multiple of the coarsest step"));
    }
    let d = target.dim();
    let finest_steps = steps_coarse << levels;
    let h_fine = h_max / (1u64 << levels) as f64;
    let mut sq = vec![0.0; levels];
    for _ in 0..n_paths {
        let x = target
            .sample_stationary(stream)
            .ok_or_else(|| invalid("self-convergence needs a stationary sampler"))?;
        let mut v = vec![0.0; d];
        stream.fill_standard_normal(&mut v);
        let start = PhaseState::new(x, v);
        let mut noise: Vec<Vec<f64>> = (0..2 * finest_steps)
            .map(|_| {
                let mut z = vec![0.0; d];
                stream.fill_standard_normal(&mut z);
                z
            })
            .collect();
        let mut h = h_fine;
        let mut finer = obabo_path(target, &start, &StepParams::new(h, gamma)?, &noise);
        for level in (0..levels).rev() {
            noise = coarsen_noise(&noise, h / 2.0, gamma);
            h *= 2.0;
            let coarse = obabo_path(target, &start, &StepParams::new(h, gamma)?, &noise);
            sq[level] += coarse
                .x
                .iter()
                .zip(&finer.x)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>();
            finer = coarse;
        }
    }
    Ok((0..levels)
        .map(|j| (h_max / (1u64 << j) as f64, (sq[j] / n_paths as f64).sqrt()))
        .collect())
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
