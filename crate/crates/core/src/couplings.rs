//! Synchronous couplings: two copies driven by the same event times and the
//! same Gaussian noise, whose twisted distance measures contraction.

use rayon::prelude::*;

use crate::analytics::{langevin_acf, langevin_twist, theorem1_rate, twist_matrix};
use crate::diagnostics::{autocovariance, iac_geyer};
use crate::dynamics::{leapfrog_in_place, obabo_in_place, PhaseState, StepParams};
use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;
use crate::samplers::exact_persistent_rhmc_run;
use crate::targets::{ConvexityBounds, TargetModel};

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPair {
    pub z: PhaseState,
    pub z_prime: PhaseState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionTrace {
    pub times: Vec<f64>,
    pub twisted_norm_sq: Vec<f64>,
    pub fitted_slope: f64,
    /// The rate the slope is compared against, `-2r`.
    pub reference_slope: f64,
    pub warning: Option<String>,
}

/// `a|Δx|² + 2bΔx·Δv + c|Δv|²` for `Δ = z − z'`.
pub fn twisted_norm_sq(pair: &CoupledPair, a: f64, b: f64, c: f64) -> Result<f64> {
    if !(a > 0.0 && a * c - b * b > 0.0) {
        return Err(invalid(format!("twist ({a}, {b}, {c}) is not positive definite")));
    }
    Ok(twisted(&pair.z.x, &pair.z.v, &pair.z_prime.x, &pair.z_prime.v, (a, b, c)))
}

fn twisted(x: &[f64], v: &[f64], xp: &[f64], vp: &[f64], (a, b, c): (f64, f64, f64)) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        let dx = x[i] - xp[i];
        let dv = v[i] - vp[i];
        s += a * dx * dx + 2.0 * b * dx * dv + c * dv * dv;
    }
    s
}

/// Least-squares slope of `ln y` on `t` over the middle 80% of the grid.
pub fn fit_log_slope(times: &[f64], values: &[f64]) -> f64 {
    let n = times.len();
    let lo = n / 10;
    let hi = n - n / 10;
    let pts: Vec<(f64, f64)> = (lo..hi)
        .filter(|&k| values[k] > 0.0)
        .map(|k| (times[k], values[k].ln()))
        .collect();
    let m = pts.len() as f64;
    if m < 2.0 {
        return f64::NAN;
    }
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    sxy / sxx
}

fn bounds_of<T: TargetModel + ?Sized>(target: &T) -> Result<ConvexityBounds> {
    target
        .convexity_bounds()
        .ok_or_else(|| invalid("coupling needs a target with convexity bounds"))
}

/// Starting pair: a stationary (or zero) position, shared velocity, and the
/// second copy displaced by one unit along the stiffest coordinate.
fn initial_pair<T: TargetModel + ?Sized>(target: &T, stream: &mut RngStream) -> (PhaseState, PhaseState) {
    let d = target.dim();
    let x = target.sample_stationary(stream).unwrap_or_else(|| vec![0.0; d]);
    let mut v = vec![0.0; d];
    stream.fill_standard_normal(&mut v);
    let stiff = target
        .scales()
        .and_then(|s| {
            s.iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
        })
        .unwrap_or(0);
    let mut xp = x.clone();
    xp[stiff] += 1.0;
    (PhaseState::new(x, v.clone()), PhaseState::new(xp, v))
}

fn time_grid(duration: f64, n_grid: usize) -> Vec<f64> {
    (0..=n_grid).map(|k| duration * k as f64 / n_grid as f64).collect()
}

struct Copy {
    s: PhaseState,
    grad: Vec<f64>,
}

impl Copy {
    fn new<T: TargetModel + ?Sized>(target: &T, s: PhaseState) -> Self {
        let mut grad = vec![0.0; s.dim()];
        target.gradient(&s.x, &mut grad);
        Self { s, grad }
    }

    /// Leapfrog over `len` in equal substeps no longer than `h_max`.
    fn flow<T: TargetModel + ?Sized>(&mut self, target: &T, len: f64, h_max: f64) {
        if len <= 0.0 {
            return;
        }
        let n = (len / h_max).ceil().max(1.0) as usize;
        let h = len / n as f64;
        for _ in 0..n {
            leapfrog_in_place(target, &mut self.s.x, &mut self.s.v, &mut self.grad, h);
        }
    }
}

fn average_traces(traces: Vec<Vec<f64>>) -> Vec<f64> {
    let n = traces.len() as f64;
    let mut mean = vec![0.0; traces[0].len()];
    for t in &traces {
        for (m, v) in mean.iter_mut().zip(t) {
            *m += v / n;
        }
    }
    mean
}

/// Coupled randomized HMC with persistence `α` at the intensity of the
/// contraction theorem. Hamiltonian flow between events uses leapfrog with
/// `h_fine = min(0.01, 0.05/λ)`.
pub fn rhmc_coupled_run<T: TargetModel + ?Sized>(
    target: &T,
    alpha: f64,
    duration: f64,
    n_pairs: usize,
    n_grid: usize,
    stream: &mut RngStream,
) -> Result<ContractionTrace> {
    let b = bounds_of(target)?;
    let rate = theorem1_rate(b.m, b.big_m, alpha)?;
    let twist = twist_matrix(b.m, b.big_m, alpha)?;
    let lambda = rate.lambda;
    let h_fine = 0.01f64.min(0.05 / lambda);
    let warning = (h_fine * lambda > 0.05).then(|| format!("h_fine·λ = {} exceeds 0.05", h_fine * lambda));
    if n_pairs == 0 || n_grid < 10 || !(duration > 0.0) {
        return Err(invalid("need n_pairs >= 1, n_grid >= 10 and a positive duration"));
    }
    let times = time_grid(duration, n_grid);
    let keep = (1.0 - alpha * alpha).sqrt();
    let root = stream.fork();
    let traces: Vec<Vec<f64>> = (0..n_pairs)
        .into_par_iter()
        .map(|k| -> Result<Vec<f64>> {
            let mut s = root.child(k);
            let (z, zp) = initial_pair(target, &mut s);
            let (mut a, mut bcopy) = (Copy::new(target, z), Copy::new(target, zp));
            let d = target.dim();
            let mut xi = vec![0.0; d];
            let mut trace = Vec::with_capacity(times.len());
            trace.push(twisted(&a.s.x, &a.s.v, &bcopy.s.x, &bcopy.s.v, twist));
            let mut now = 0.0;
            let mut next_event = s.exponential(lambda)?;
            for &tk in &times[1..] {
                while next_event < tk {
                    a.flow(target, next_event - now, h_fine);
                    bcopy.flow(target, next_event - now, h_fine);
                    now = next_event;
                    s.fill_standard_normal(&mut xi);
                    for i in 0..d {
                        a.s.v[i] = alpha * a.s.v[i] + keep * xi[i];
                        bcopy.s.v[i] = alpha * bcopy.s.v[i] + keep * xi[i];
                    }
                    next_event = now + s.exponential(lambda)?;
                }
                a.flow(target, tk - now, h_fine);
                bcopy.flow(target, tk - now, h_fine);
                now = tk;
                trace.push(twisted(&a.s.x, &a.s.v, &bcopy.s.x, &bcopy.s.v, twist));
            }
            Ok(trace)
        })
        .collect::<Result<_>>()?;
    let mean = average_traces(traces);
    Ok(ContractionTrace {
        fitted_slope: fit_log_slope(&times, &mean),
        reference_slope: -2.0 * rate.r,
        times,
        twisted_norm_sq: mean,
        warning,
    })
}

/// Coupled OBABO discretizations of Langevin dynamics sharing every noise draw,
/// measured in the twist `(γ², γ, 2)`.
pub fn langevin_coupled_run<T: TargetModel + ?Sized>(
    target: &T,
    gamma: f64,
    duration: f64,
    h: f64,
    n_pairs: usize,
    n_grid: usize,
    stream: &mut RngStream,
) -> Result<ContractionTrace> {
    let b = bounds_of(target)?;
    let r = crate::analytics::langevin_rate(b.m, b.big_m, gamma)?;
    if n_pairs == 0 || n_grid < 10 || !(duration > 0.0) {
        return Err(invalid("need n_pairs >= 1, n_grid >= 10 and a positive duration"));
    }
    let per_cell = (duration / n_grid as f64 / h).round().max(1.0) as usize;
    let h = duration / (n_grid * per_cell) as f64;
    let params = StepParams::new(h, gamma)?;
    let twist = langevin_twist(gamma);
    let times = time_grid(duration, n_grid);
    let root = stream.fork();
    let traces: Vec<Vec<f64>> = (0..n_pairs)
        .into_par_iter()
        .map(|k| {
            let mut s = root.child(k);
            let (z, zp) = initial_pair(target, &mut s);
            let (mut a, mut bcopy) = (Copy::new(target, z), Copy::new(target, zp));
            let d = target.dim();
            let (mut xi, mut xi2) = (vec![0.0; d], vec![0.0; d]);
            let mut trace = Vec::with_capacity(times.len());
            trace.push(twisted(&a.s.x, &a.s.v, &bcopy.s.x, &bcopy.s.v, twist));
            for _ in 0..n_grid {
                for _ in 0..per_cell {
                    s.fill_standard_normal(&mut xi);
                    s.fill_standard_normal(&mut xi2);
                    let noise = Some((&xi[..], &xi2[..]));
                    obabo_in_place(target, &mut a.s.x, &mut a.s.v, &mut a.grad, &params, noise);
                    obabo_in_place(target, &mut bcopy.s.x, &mut bcopy.s.v, &mut bcopy.grad, &params, noise);
                }
                trace.push(twisted(&a.s.x, &a.s.v, &bcopy.s.x, &bcopy.s.v, twist));
            }
            trace
        })
        .collect();
    let mean = average_traces(traces);
    Ok(ContractionTrace {
        fitted_slope: fit_log_slope(&times, &mean),
        reference_slope: -2.0 * r,
        times,
        twisted_norm_sq: mean,
        warning: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorLimitPoint {
    pub alpha: f64,
    pub lambda: f64,
    pub empirical: f64,
    pub std_error: f64,
    /// Langevin ACF at the requested friction.
    pub langevin: f64,
    pub error: f64,
}

/// Lag-`T` position correlation of persistent randomized HMC with
/// `λ = 2γ/(1−α²)` against the Langevin ACF at friction `γ`, for each `α`.
pub fn generator_limit_check(
    sigma: f64,
    gamma: f64,
    alphas: &[f64],
    t: f64,
    n_samples: usize,
    stream: &mut RngStream,
) -> Result<Vec<GeneratorLimitPoint>> {
    let reference = langevin_acf(sigma, gamma, t);
    alphas
        .iter()
        .map(|&alpha| {
            let lambda = 2.0 * gamma / (1.0 - alpha * alpha);
            let chain = exact_persistent_rhmc_run(&[sigma], lambda, alpha, t, n_samples, stream)?;
            let (empirical, std_error) = lag_one_correlation(&chain.coordinate(0))?;
            Ok(GeneratorLimitPoint {
                alpha,
                lambda,
                empirical,
                std_error,
                langevin: reference,
                error: (empirical - reference).abs(),
            })
        })
        .collect()
}

/// Lag-one autocorrelation and a standard error from the IAC of the lagged
/// products.
pub fn lag_one_correlation(x: &[f64]) -> Result<(f64, f64)> {
    let acov = autocovariance(x, 1)?;
    if !(acov[0] > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let r = acov[1] / acov[0];
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let prods: Vec<f64> = (0..n - 1).map(|i| (x[i] - mean) * (x[i + 1] - mean)).collect();
    let m = prods.iter().sum::<f64>() / prods.len() as f64;
    let v = prods.iter().map(|p| (p - m).powi(2)).sum::<f64>() / prods.len() as f64;
    let tau = iac_geyer(&prods)?.value.max(1.0);
    Ok((r, (v * tau / prods.len() as f64).sqrt() / acov[0]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::DiagonalGaussian;

    #[test]
    fn twisted_norm_values() {
        let z = PhaseState::new(vec![1.0, 2.0], vec![0.5, 0.0]);
        let same = CoupledPair { z: z.clone(), z_prime: z.clone() };
        assert_eq!(twisted_norm_sq(&same, 8.0, 2.0, 2.0).unwrap(), 0.0);
        let zp = PhaseState::new(vec![0.0, 2.0], vec![0.5, 0.0]);
        let pair = CoupledPair { z, z_prime: zp };
        assert_eq!(twisted_norm_sq(&pair, 8.0, 2.0, 2.0).unwrap(), 8.0);
        assert!(twisted_norm_sq(&pair, 1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn twisted_norm_dominates_position_distance() {
        let mut s = RngStream::new(1);
        for k in 0..10 {
            let (a, b, c) = twist_matrix(0.5, 4.0, k as f64 / 10.0).unwrap();
            for _ in 0..100 {
                let dx = [s.standard_normal(), s.standard_normal()];
                let dv = [s.standard_normal(), s.standard_normal()];
                let pair = CoupledPair {
                    z: PhaseState::new(dx.to_vec(), dv.to_vec()),
                    z_prime: PhaseState::new(vec![0.0; 2], vec![0.0; 2]),
                };
                let q = twisted_norm_sq(&pair, a, b, c).unwrap();
                let x2 = dx[0] * dx[0] + dx[1] * dx[1];
                assert!(c / (a * c - b * b) * q >= x2 * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn slope_fit_recovers_exponential() {
        let t: Vec<f64> = (0..=100).map(|k| k as f64 * 0.05).collect();
        let y: Vec<f64> = t.iter().map(|t| 3.0 * (-0.7 * t).exp()).collect();
        assert!((fit_log_slope(&t, &y) + 0.7).abs() < 1e-12);
    }

    #[test]
    fn identical_starts_stay_together() {
        // both copies at the same point: zero displacement is a fixed point
        let target = DiagonalGaussian::standard(2);
        let twist = (8.0, 2.0, 2.0);
        let z = PhaseState::new(vec![0.3, 0.1], vec![0.2, -0.4]);
        let (mut a, mut b) = (Copy::new(&target, z.clone()), Copy::new(&target, z));
        a.flow(&target, 1.3, 0.01);
        b.flow(&target, 1.3, 0.01);
        assert_eq!(twisted(&a.s.x, &a.s.v, &b.s.x, &b.s.v, twist), 0.0);
    }

    #[test]
    fn rhmc_coupling_contracts() {
        let target = DiagonalGaussian::standard(1);
        let tr = rhmc_coupled_run(&target, 0.0, 5.0, 200, 50, &mut RngStream::new(2)).unwrap();
        assert!(tr.warning.is_none());
        assert!(tr.fitted_slope <= 0.9 * tr.reference_slope, "{} vs {}", tr.fitted_slope, tr.reference_slope);
    }

    #[test]
    fn langevin_coupling_contracts() {
        let target = DiagonalGaussian::standard(1);
        let tr = langevin_coupled_run(&target, 2f64.sqrt(), 5.0, 0.01, 20, 50, &mut RngStream::new(3)).unwrap();
        assert!(tr.fitted_slope <= 0.85 * tr.reference_slope, "{}", tr.fitted_slope);
        assert!(langevin_coupled_run(&target, 0.9, 5.0, 0.01, 20, 50, &mut RngStream::new(3)).is_err());
    }

    #[test]
    fn persistent_rhmc_at_zero_alpha_matches_event_oracle() {
        // with full refreshment at rate λ the lag-T correlation is the Langevin
        // ACF at friction λ
        let lambda = 0.5;
        let chain = exact_persistent_rhmc_run(&[1.0], lambda, 0.0, 1.0, 50_000, &mut RngStream::new(4)).unwrap();
        let (r, se) = lag_one_correlation(&chain.coordinate(0)).unwrap();
        let expected = langevin_acf(1.0, lambda, 1.0);
        assert!((r - expected).abs() < 4.0 * se, "{r} vs {expected} ± {se}");
    }
}
