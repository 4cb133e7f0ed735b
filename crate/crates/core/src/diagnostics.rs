//! Empirical autocorrelation, integrated autocorrelation, worst-coordinate
//! effective sample size, moment checks and step-size calibration.

use std::f64::consts::FRAC_PI_2;
use std::str::FromStr;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::analytics::AcfCurve;
use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;
use crate::samplers::{ChainResult, KernelKind, SamplerConfig, Stepper};
use crate::targets::TargetModel;

/// Biased (`1/N`) autocovariances at lags `0..=max_lag`.
pub fn autocovariance(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 2 {
        return Err(Error::Empty("series needs at least two points".into()));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = series
        .iter()
        .map(|x| Complex::new(x - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let scale = 1.0 / (size as f64 * n as f64);
    Ok(buf.iter().take(max_lag.min(n - 1) + 1).map(|z| z.re * scale).collect())
}

/// Autocorrelations `ρ_0 = 1, ρ_1, …, ρ_max_lag`.
pub fn empirical_acf(series: &[f64], max_lag: usize) -> Result<AcfCurve> {
    let acov = autocovariance(series, max_lag)?;
    let c0 = acov[0];
    let mean_abs = series.iter().map(|x| x.abs()).sum::<f64>() / series.len() as f64;
    if !(c0 > 1e-28 * (1.0 + mean_abs * mean_abs)) {
        return Err(Error::ZeroVariance);
    }
    let mut values: Vec<f64> = acov.iter().map(|c| c / c0).collect();
    values[0] = 1.0;
    Ok(AcfCurve {
        times: (0..values.len()).map(|k| k as f64).collect(),
        values,
        regime: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IacMethod {
    /// Initial monotone positive sequence over pair sums.
    #[default]
    Geyer,
    /// Self-consistent window `M ≥ 5 τ(M)`.
    Truncated,
}

impl FromStr for IacMethod {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "geyer" => Ok(Self::Geyer),
            "truncated" => Ok(Self::Truncated),
            other => Err(format!("unknown IAC method `{other}` (geyer|truncated)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IacEstimate {
    pub value: f64,
    pub truncation_lag: usize,
    pub method: IacMethod,
}

/// Lower bound on reported IAC values, `1/log10(N)`.
fn iac_floor(n: usize) -> f64 {
    1.0 / (n.max(10) as f64).log10()
}

pub fn iac_geyer(series: &[f64]) -> Result<IacEstimate> {
    let n = series.len();
    let rho = empirical_acf(series, n - 1)?.values;
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < rho.len() {
        let gamma = (rho[2 * k] + rho[2 * k + 1]).min(prev);
        if gamma <= 0.0 {
            break;
        }
        sum += gamma;
        prev = gamma;
        k += 1;
    }
    Ok(IacEstimate {
        value: (2.0 * sum - 1.0).max(iac_floor(n)),
        truncation_lag: 2 * k,
        method: IacMethod::Geyer,
    })
}

pub fn iac_truncated(series: &[f64]) -> Result<IacEstimate> {
    let n = series.len();
    let rho = empirical_acf(series, n - 1)?.values;
    let mut tau = 1.0;
    let mut lag = 0;
    for (m, r) in rho.iter().enumerate().skip(1) {
        tau += 2.0 * r;
        lag = m;
        if m as f64 >= 5.0 * tau {
            break;
        }
    }
    Ok(IacEstimate {
        value: tau.max(iac_floor(n)),
        truncation_lag: lag,
        method: IacMethod::Truncated,
    })
}

pub fn iac(series: &[f64], method: IacMethod) -> Result<IacEstimate> {
    match method {
        IacMethod::Geyer => iac_geyer(series),
        IacMethod::Truncated => iac_truncated(series),
    }
}

/// `(π/2)/(L h IAC)`: one for independent draws spaced by an isotropic quarter period.
pub fn ess_per_gradient(iac: &IacEstimate, steps_per_iter: f64, h: f64) -> f64 {
    FRAC_PI_2 / (steps_per_iter * h * iac.value)
}

/// The odd and even test functions of the benchmark tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatteryFn {
    X,
    X3,
    Sgn,
    Sin,
    X2,
    X4,
    ExpAbs,
    Cos,
}

impl BatteryFn {
    pub const ALL: [BatteryFn; 8] = [
        BatteryFn::X,
        BatteryFn::X3,
        BatteryFn::Sgn,
        BatteryFn::Sin,
        BatteryFn::X2,
        BatteryFn::X4,
        BatteryFn::ExpAbs,
        BatteryFn::Cos,
    ];

    pub fn apply(self, x: f64) -> f64 {
        match self {
            BatteryFn::X => x,
            BatteryFn::X3 => x * x * x,
            BatteryFn::Sgn => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            BatteryFn::Sin => x.sin(),
            BatteryFn::X2 => x * x,
            BatteryFn::X4 => (x * x) * (x * x),
            BatteryFn::ExpAbs => (-x.abs()).exp(),
            BatteryFn::Cos => x.cos(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BatteryFn::X => "x",
            BatteryFn::X3 => "x^3",
            BatteryFn::Sgn => "sgn(x)",
            BatteryFn::Sin => "sin(x)",
            BatteryFn::X2 => "x^2",
            BatteryFn::X4 => "x^4",
            BatteryFn::ExpAbs => "exp(-|x|)",
            BatteryFn::Cos => "cos(x)",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EssMeta {
    pub steps_per_iter: f64,
    pub h: f64,
    pub n: usize,
    pub sampler: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EssReport {
    pub functions: Vec<BatteryFn>,
    /// `per_coord[f][i]`: ESS per gradient of function `f` on coordinate `i`.
    pub per_coord: Vec<Vec<f64>>,
    pub worst: Vec<f64>,
    pub meta: EssMeta,
}

impl EssReport {
    pub fn worst_for(&self, f: BatteryFn) -> Option<f64> {
        self.functions.iter().position(|g| *g == f).map(|k| self.worst[k])
    }
}

/// ESS per gradient for every `(function, coordinate)` and the minimum over
/// coordinates. `steps_per_iter` is the gradient cost of one iteration.
pub fn worst_ess(
    chain: &ChainResult,
    functions: &[BatteryFn],
    steps_per_iter: f64,
    h: f64,
    method: IacMethod,
    sampler: &str,
) -> Result<EssReport> {
    if chain.is_empty() {
        return Err(Error::Empty("chain has no samples".into()));
    }
    let d = chain.d;
    let coords: Vec<Vec<f64>> = (0..d).map(|i| chain.coordinate(i)).collect();
    let cells: Vec<(usize, usize)> = (0..functions.len()).flat_map(|f| (0..d).map(move |i| (f, i))).collect();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(f, i)| -> Result<f64> {
            let series: Vec<f64> = coords[i].iter().map(|&x| functions[f].apply(x)).collect();
            Ok(ess_per_gradient(&iac(&series, method)?, steps_per_iter, h))
        })
        .collect::<Result<_>>()?;
    let per_coord: Vec<Vec<f64>> = values.chunks(d).map(|c| c.to_vec()).collect();
    let worst = per_coord
        .iter()
        .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    Ok(EssReport {
        functions: functions.to_vec(),
        per_coord,
        worst,
        meta: EssMeta {
            steps_per_iter,
            h,
            n: chain.len(),
            sampler: sampler.to_string(),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentCheck {
    pub coord: usize,
    pub z_mean: f64,
    pub z_var: f64,
    pub pass: bool,
}

/// z-scores of the empirical mean and variance of each coordinate against
/// known `(mean, variance)`, with IAC-inflated standard errors.
pub fn moment_stationarity_test(chain: &ChainResult, moments: &[(f64, f64)], method: IacMethod) -> Result<Vec<MomentCheck>> {
    if moments.len() != chain.d {
        return Err(invalid(format!("{} moments for a {}-dimensional chain", moments.len(), chain.d)));
    }
    if chain.len() < 10 {
        return Err(Error::Empty("need at least ten samples".into()));
    }
    (0..chain.d)
        .into_par_iter()
        .map(|i| {
            let x = chain.coordinate(i);
            let (mu, var) = moments[i];
            let n = x.len() as f64;
            let z_of = |series: &[f64], expected: f64| -> Result<f64> {
                let m = series.iter().sum::<f64>() / n;
                let v = series.iter().map(|s| (s - m).powi(2)).sum::<f64>() / n;
                let tau = iac(series, method)?.value.max(1.0);
                Ok((m - expected) / (v * tau / n).sqrt())
            };
            let centred: Vec<f64> = x.iter().map(|v| (v - mu).powi(2)).collect();
            let (z_mean, z_var) = match (z_of(&x, mu), z_of(&centred, var)) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(Error::ZeroVariance), _) | (_, Err(Error::ZeroVariance)) => (f64::INFINITY, f64::INFINITY),
                (Err(e), _) | (_, Err(e)) => return Err(e),
            };
            Ok(MomentCheck {
                coord: i,
                z_mean,
                z_var,
                pass: z_mean.abs() < 4.0 && z_var.abs() < 4.0,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub h: f64,
    pub acceptance: f64,
    pub converged: bool,
    /// Step size after every adaptation iteration.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationBudget {
    pub adapt_iters: usize,
    pub window: usize,
    pub tolerance: f64,
    pub max_rounds: usize,
}

impl Default for CalibrationBudget {
    fn default() -> Self {
        Self {
            adapt_iters: 3000,
            window: 2000,
            tolerance: 0.02,
            max_rounds: 4,
        }
    }
}

/// Robbins–Monro on `log h` with gain `(n + 10)^{-0.6}`, steered by the
/// per-iteration acceptance probability `1 ∧ e^{−Δ}`. The integration time
/// `template.t` is held fixed, so `L = ⌊T/h⌋` follows `h`. After each round the
/// averaged iterate is checked over a fixed-`h` window.
pub fn calibrate_step_size<T: TargetModel + ?Sized>(
    target: &T,
    kind: KernelKind,
    template: &SamplerConfig,
    target_accept: f64,
    budget: CalibrationBudget,
    stream: &mut RngStream,
) -> Result<Calibration> {
    if !(target_accept > 0.0 && target_accept < 1.0) {
        return Err(invalid(format!("target acceptance must lie in (0, 1), got {target_accept}")));
    }
    let t = template.t;
    let steps = |h: f64| ((t / h).floor() as usize).max(1);
    let x0 = match &template.start {
        Some(x) => x.clone(),
        None => target.sample_stationary(stream).unwrap_or_else(|| vec![0.0; target.dim()]),
    };
    let mut chain = Stepper::new(target, kind, x0);
    let mut log_h = template.h.ln();
    let mut trace = Vec::new();
    let mut best = (template.h, f64::NAN, f64::INFINITY);
    let mut n_total = 0usize;
    for _ in 0..budget.max_rounds {
        let mut avg = 0.0;
        let mut avg_n = 0.0;
        for k in 0..budget.adapt_iters {
            let h = log_h.exp();
            let (delta, _) = chain.step(h, steps(h), stream)?;
            let a = if delta.is_nan() { 0.0 } else { (-delta).exp().min(1.0) };
            let gain = (n_total as f64 + 10.0).powf(-0.6);
            log_h += gain * (a - target_accept);
            log_h = log_h.min(t.ln());
            n_total += 1;
            trace.push(log_h.exp());
            if k >= budget.adapt_iters / 2 {
                avg += log_h;
                avg_n += 1.0;
            }
        }
        let h = (avg / avg_n).exp();
        let mut acc = 0.0;
        for _ in 0..budget.window {
            let (delta, _) = chain.step(h, steps(h), stream)?;
            acc += if delta.is_nan() { 0.0 } else { (-delta).exp().min(1.0) };
        }
        acc /= budget.window as f64;
        let miss = (acc - target_accept).abs();
        if miss < best.2 {
            best = (h, acc, miss);
        }
        if miss <= budget.tolerance {
            return Ok(Calibration {
                h,
                acceptance: acc,
                converged: true,
                trace,
            });
        }
        log_h = h.ln();
    }
    Ok(Calibration {
        h: best.0,
        acceptance: best.1,
        converged: false,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::exact_langevin_ar_run;

    fn ar1(rho: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut s = RngStream::new(seed);
        let c = (1.0 - rho * rho).sqrt();
        let mut x = s.standard_normal();
        (0..n)
            .map(|_| {
                x = rho * x + c * s.standard_normal();
                x
            })
            .collect()
    }

    fn direct_acov(x: &[f64], lag: usize) -> f64 {
        let n = x.len();
        let m = x.iter().sum::<f64>() / n as f64;
        (0..n - lag).map(|i| (x[i] - m) * (x[i + lag] - m)).sum::<f64>() / n as f64
    }

    #[test]
    fn fft_autocovariance_matches_direct_sum() {
        let x = ar1(0.7, 1000, 1);
        let a = autocovariance(&x, 30).unwrap();
        for lag in 0..=30 {
            assert!((a[lag] - direct_acov(&x, lag)).abs() < 1e-12);
        }
    }

    #[test]
    fn white_noise_acf() {
        let x = ar1(0.0, 100_000, 2);
        let acf = empirical_acf(&x, 50).unwrap();
        assert_eq!(acf.values[0], 1.0);
        let band = 4.0 / (x.len() as f64).sqrt();
        assert!(acf.values[1..].iter().all(|r| r.abs() < band));
        let iac = iac_geyer(&x).unwrap();
        assert!((iac.value - 1.0).abs() < 0.05, "{}", iac.value);
    }

    #[test]
    fn ar1_acf_and_iac() {
        let x = ar1(0.9, 100_000, 3);
        assert!((empirical_acf(&x, 2).unwrap().values[1] - 0.9).abs() < 0.02);
        let x = ar1(0.5, 100_000, 4);
        let g = iac_geyer(&x).unwrap();
        assert!((g.value - 3.0).abs() < 0.15, "{}", g.value);
        let t = iac_truncated(&x).unwrap();
        assert!((t.value - 3.0).abs() < 0.15, "{}", t.value);
        let x = ar1(-0.5, 100_000, 5);
        let g = iac_geyer(&x).unwrap();
        assert!((g.value - 1.0 / 3.0).abs() < 0.05, "{}", g.value);
    }

    #[test]
    fn constant_series_is_rejected() {
        assert!(matches!(empirical_acf(&[2.0; 100], 5), Err(Error::ZeroVariance)));
        assert!(matches!(iac_geyer(&[0.0; 100]), Err(Error::ZeroVariance)));
        assert!(empirical_acf(&[1.0], 1).is_err());
    }

    #[test]
    fn ess_formula() {
        let one = IacEstimate {
            value: 1.0,
            truncation_lag: 0,
            method: IacMethod::Geyer,
        };
        assert!((ess_per_gradient(&one, 1.0, FRAC_PI_2) - 1.0).abs() < 1e-15);
        let three = IacEstimate { value: 3.0, ..one };
        assert!((ess_per_gradient(&three, 8.0, 0.2) - FRAC_PI_2 / 4.8).abs() < 1e-15);
        assert_eq!(ess_per_gradient(&three, 16.0, 0.2), ess_per_gradient(&three, 8.0, 0.2) / 2.0);
    }

    #[test]
    fn battery_values() {
        assert_eq!(BatteryFn::Sgn.apply(0.0), 0.0);
        assert_eq!(BatteryFn::Sgn.apply(-3.0), -1.0);
        assert_eq!(BatteryFn::X4.apply(2.0), 16.0);
        assert_eq!(BatteryFn::ExpAbs.apply(0.0), 1.0);
        assert_eq!(BatteryFn::ALL.len(), 8);
    }

    #[test]
    fn exact_langevin_iac_matches_ar_formula() {
        let scales = [0.3, 1.0];
        let (gamma, t) = (2.0, 0.8);
        let chain = exact_langevin_ar_run(&scales, gamma, t, 100_000, &mut RngStream::new(6)).unwrap();
        for (i, &s) in scales.iter().enumerate() {
            let rho = crate::analytics::langevin_acf(s, gamma, t);
            let expected = (1.0 + rho) / (1.0 - rho);
            let got = iac_geyer(&chain.coordinate(i)).unwrap().value;
            assert!((got / expected - 1.0).abs() < 0.1, "coord {i}: {got} vs {expected}");
        }
    }

    #[test]
    fn worst_ess_is_min_and_permutation_invariant() {
        let chain = exact_langevin_ar_run(&[0.5, 1.0, 0.7], 1.0, 0.5, 20_000, &mut RngStream::new(7)).unwrap();
        let r = worst_ess(&chain, &BatteryFn::ALL, 1.0, 0.5, IacMethod::Geyer, "exact").unwrap();
        for (k, row) in r.per_coord.iter().enumerate() {
            assert!(row.iter().all(|v| *v >= r.worst[k]));
        }
        let mut permuted = chain.clone();
        permuted.positions = chain.positions.chunks(3).flat_map(|r| [r[2], r[0], r[1]]).collect();
        let p = worst_ess(&permuted, &BatteryFn::ALL, 1.0, 0.5, IacMethod::Geyer, "exact").unwrap();
        assert_eq!(r.worst, p.worst);
    }

    #[test]
    fn exact_chain_passes_moment_test() {
        let scales = [0.2, 0.6, 1.0];
        let chain = exact_langevin_ar_run(&scales, 1.0, 1.0, 50_000, &mut RngStream::new(8)).unwrap();
        let moments: Vec<(f64, f64)> = scales.iter().map(|s| (0.0, s * s)).collect();
        let checks = moment_stationarity_test(&chain, &moments, IacMethod::Geyer).unwrap();
        assert!(checks.iter().all(|c| c.pass), "{checks:?}");
        let wrong: Vec<(f64, f64)> = scales.iter().map(|s| (0.0, 1.3 * s * s)).collect();
        let checks = moment_stationarity_test(&chain, &wrong, IacMethod::Geyer).unwrap();
        assert!(checks.iter().all(|c| !c.pass));
    }
}
