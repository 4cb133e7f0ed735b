//! Optimal scaling in high dimension: the variance constant `Σ` of the limiting
//! energy error, the acceptance and efficiency curves, and a Monte Carlo
//! harness for the limit law of `Δ`.

use rayon::prelude::*;
use libm::erfc;

use crate::analytics::langevin_acf;
use crate::dynamics::{obabo_in_place, StepParams};
use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;
use crate::samplers::malt_delta;
use crate::targets::{Marginal1DPotential, ProductTarget};

/// Standard normal CDF `Ψ`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density `ψ`.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Limiting acceptance rate `a(ℓ) = 2Ψ(−ℓ²√Σ/2)` at `h = ℓ d^{-1/4}`.
pub fn acceptance_curve(ell: f64, sigma_clt: f64) -> f64 {
    2.0 * normal_cdf(-ell * ell * sigma_clt.sqrt() / 2.0)
}

/// Efficiency `eff(ℓ) = ℓ · a(ℓ)`.
pub fn efficiency_curve(ell: f64, sigma_clt: f64) -> f64 {
    ell * acceptance_curve(ell, sigma_clt)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub sigma_clt: f64,
    pub ell_star: f64,
    pub acc_star: f64,
    pub eff_star: f64,
    /// Root `s*` of `s ψ(−s)/Ψ(−s) = 1/2`, independent of `Σ`.
    pub s_star: f64,
    pub upsilon_f: Option<Vec<(String, f64)>>,
}

/// `s ψ(−s)/Ψ(−s) − 1/2`, strictly increasing in `s > 0`.
pub fn first_order_condition(s: f64) -> f64 {
    s * normal_pdf(-s) / normal_cdf(-s) - 0.5
}

/// Root of the first-order condition by bisection on `(0, 10]`.
pub fn optimal_s() -> f64 {
    let (mut lo, mut hi) = (0.0f64, 10.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if first_order_condition(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// The efficiency-maximizing `ℓ*` for a given `Σ`.
pub fn optimal_ell(sigma_clt: f64) -> Result<ScalingReport> {
    if !(sigma_clt > 0.0 && sigma_clt.is_finite()) {
        return Err(invalid(format!("variance constant must be positive, got {sigma_clt}")));
    }
    let s = optimal_s();
    // ℓ²√Σ/2 = s
    let ell = (2.0 * s).sqrt() * sigma_clt.powf(-0.25);
    let acc = acceptance_curve(ell, sigma_clt);
    Ok(ScalingReport {
        sigma_clt,
        ell_star: ell,
        acc_star: acc,
        eff_star: ell * acc,
        s_star: s,
        upsilon_f: None,
    })
}

/// `Σ` for the standard Gaussian marginal: `(1 − ρ_γ(T)²)/16`.
pub fn sigma_gaussian(gamma: f64, t: f64) -> f64 {
    let rho = langevin_acf(1.0, gamma, t);
    (1.0 - rho * rho) / 16.0
}

/// `S(x, v) = v³ φ'''(x)/12 + v φ''(x) φ'(x)/4`.
pub fn energy_integrand<P: Marginal1DPotential + ?Sized>(m: &P, x: f64, v: f64) -> f64 {
    v * v * v * m.d3phi(x) / 12.0 + v * m.d2phi(x) * m.dphi(x) / 4.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaEstimate {
    pub estimate: f64,
    pub std_error: f64,
    /// False when the relative standard error exceeds 10%.
    pub converged: bool,
}

/// Monte Carlo estimate of `Σ = E[(∫₀ᵀ S(X_t, V_t) dt)²]` along stationary
/// Langevin paths, simulated by OBABO at `fine_h` and integrated by the
/// trapezoid rule.
pub fn sigma_monte_carlo<P: Marginal1DPotential + Clone>(
    marginal: &P,
    gamma: f64,
    t: f64,
    n_paths: usize,
    fine_h: f64,
    stream: &mut RngStream,
) -> Result<SigmaEstimate> {
    if n_paths < 2 {
        return Err(invalid("need at least two paths"));
    }
    if !(t >= 0.0) {
        return Err(invalid(format!("duration must be >= 0, got {t}")));
    }
    let n_steps = (t / fine_h).round() as usize;
    let h = if n_steps == 0 { fine_h } else { t / n_steps as f64 };
    let params = StepParams::new(h, gamma)?;
    let target = ProductTarget::new(marginal.clone(), 1)?;
    let root = stream.fork();
    let squares: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|k| -> Result<f64> {
            let mut s = root.child(k);
            let x0 = marginal
                .sample(&mut s)
                .ok_or_else(|| invalid("marginal has no stationary sampler"))?;
            let (mut x, mut v, mut g) = ([x0], [s.standard_normal()], [marginal.dphi(x0)]);
            let mut integral = 0.5 * energy_integrand(marginal, x[0], v[0]);
            for step in 0..n_steps {
                let xi = [s.standard_normal()];
                let xi2 = [s.standard_normal()];
                obabo_in_place(&target, &mut x, &mut v, &mut g, &params, Some((&xi, &xi2)));
                let w = if step + 1 == n_steps { 0.5 } else { 1.0 };
                integral += w * energy_integrand(marginal, x[0], v[0]);
            }
            let integral = if n_steps == 0 { 0.0 } else { integral * h };
            Ok(integral * integral)
        })
        .collect::<Result<_>>()?;
    let n = n_paths as f64;
    let mean = squares.iter().sum::<f64>() / n;
    let var = squares.iter().map(|q| (q - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    Ok(SigmaEstimate {
        estimate: mean,
        std_error: se,
        converged: mean > 0.0 && se <= 0.1 * mean,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaStats {
    pub d: usize,
    pub h: f64,
    pub n_steps: usize,
    pub mean_delta: f64,
    pub var_delta: f64,
    pub mean_sq_delta: f64,
    /// Mean of `1 ∧ e^{−Δ}`.
    pub acceptance: f64,
}

/// MALT proposals on `Φ = Σ φ(x_i)` at `h = ℓ d^{−1/4}` and `L = ⌊T/h⌋`, each
/// from a fresh stationary start. Proposals run in parallel, one child stream each.
pub fn delta_clt_experiment<P: Marginal1DPotential + Clone>(
    marginal: &P,
    gamma: f64,
    t: f64,
    ell: f64,
    dims: &[usize],
    n_iter: usize,
    stream: &mut RngStream,
) -> Result<Vec<DeltaStats>> {
    if n_iter == 0 {
        return Err(Error::Empty("no proposals requested".into()));
    }
    let mut out = Vec::with_capacity(dims.len());
    for &d in dims {
        let h = ell * (d as f64).powf(-0.25);
        let n_steps = (t / h).floor() as usize;
        if n_steps == 0 {
            return Err(invalid(format!("T={t} is shorter than h={h} at d={d}")));
        }
        let params = StepParams::new(h, gamma)?;
        let target = ProductTarget::new(marginal.clone(), d)?;
        let root = stream.fork();
        let deltas: Vec<f64> = (0..n_iter)
            .into_par_iter()
            .map(|k| -> Result<f64> {
                let mut s = root.child(k);
                let x: Option<Vec<f64>> = (0..d).map(|_| marginal.sample(&mut s)).collect();
                let x = x.ok_or_else(|| invalid("marginal has no stationary sampler"))?;
                Ok(malt_delta(&target, &x, &params, n_steps, &mut s))
            })
            .collect::<Result<_>>()?;
        let n = n_iter as f64;
        let mean = deltas.iter().sum::<f64>() / n;
        let var = deltas.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let mean_sq = deltas.iter().map(|x| x * x).sum::<f64>() / n;
        let acceptance = deltas.iter().map(|x| (-x).exp().min(1.0)).sum::<f64>() / n;
        out.push(DeltaStats {
            d,
            h,
            n_steps,
            mean_delta: mean,
            var_delta: var,
            mean_sq_delta: mean_sq,
            acceptance,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{LogCosh1D, StandardGaussian1D};
    use std::f64::consts::PI;

    #[test]
    fn cdf_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(-1.0) - 0.15865525393145705).abs() < 1e-15);
        assert!((normal_cdf(-10.0) - 7.619853024160527e-24).abs() < 1e-36);
        assert!((normal_pdf(0.0) - 0.3989422804014327).abs() < 1e-16);
    }

    #[test]
    fn acceptance_curve_shape() {
        assert!((acceptance_curve(1e-8, 1.0) - 1.0).abs() < 1e-12);
        assert!((acceptance_curve(2f64.sqrt(), 1.0) - 0.31731050786291415).abs() < 1e-14);
        let mut prev = 1.0;
        for k in 1..100 {
            let a = acceptance_curve(0.05 * k as f64, 0.3);
            assert!(a < prev && a > 0.0);
            prev = a;
        }
    }

    #[test]
    fn optimum_constants() {
        for &sigma in &[1e-3, 0.05, 1.0, 40.0] {
            let r = optimal_ell(sigma).unwrap();
            assert!((r.acc_star - 0.651).abs() < 5e-4, "{}", r.acc_star);
            assert!((r.eff_star * sigma.powf(0.25) - 0.619219).abs() < 1e-4);
            assert_eq!(r.eff_star, r.ell_star * r.acc_star);
            assert!(first_order_condition(r.s_star).abs() < 1e-10);
        }
        let a = optimal_ell(0.2).unwrap();
        let b = optimal_ell(3.2).unwrap();
        assert!((b.ell_star - a.ell_star / 2.0).abs() < 1e-14);
        assert!(optimal_ell(0.0).is_err());
    }

    #[test]
    fn optimum_maximizes_efficiency() {
        let r = optimal_ell(0.1).unwrap();
        for k in 1..200 {
            let ell = r.ell_star * (0.5 + k as f64 / 200.0);
            assert!(efficiency_curve(ell, 0.1) <= r.eff_star + 1e-15);
        }
    }

    #[test]
    fn gaussian_sigma_values() {
        assert!((sigma_gaussian(0.0, PI / 2.0) - 1.0 / 16.0).abs() < 1e-15);
        assert!(sigma_gaussian(0.0, PI).abs() < 1e-15);
        assert!((sigma_gaussian(2.0, 60.0) - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn ell_star_decreases_in_t_for_strong_friction() {
        for &g in &[2.0, 3.0] {
            let mut prev = f64::INFINITY;
            for k in 1..=100 {
                let t = 0.1 * k as f64;
                let e = optimal_ell(sigma_gaussian(g, t)).unwrap().ell_star;
                assert!(e < prev);
                prev = e;
            }
        }
    }

    #[test]
    fn integrand_for_gaussian() {
        assert_eq!(energy_integrand(&StandardGaussian1D, 2.0, 3.0), 3.0 * 2.0 / 4.0);
        let v: f64 = 0.7;
        let x: f64 = 0.3;
        let m = LogCosh1D;
        let expect = v.powi(3) * m.d3phi(x) / 12.0 + v * m.d2phi(x) * m.dphi(x) / 4.0;
        assert_eq!(energy_integrand(&m, x, v), expect);
    }

    #[test]
    fn monte_carlo_sigma_matches_gaussian_formula() {
        let mut s = RngStream::new(3);
        for &(g, t) in &[(0.0, 1.0), (1.0, 0.5), (2.0, 2.0)] {
            let est = sigma_monte_carlo(&StandardGaussian1D, g, t, 20_000, 0.005, &mut s).unwrap();
            let exact = sigma_gaussian(g, t);
            assert!(est.converged);
            assert!((est.estimate - exact).abs() < 3.0 * est.std_error + 1e-3 * exact, "γ={g} T={t}: {est:?} vs {exact}");
        }
    }

    #[test]
    fn monte_carlo_sigma_vanishes_for_zero_duration() {
        let mut s = RngStream::new(4);
        let est = sigma_monte_carlo(&StandardGaussian1D, 1.0, 0.0, 100, 0.01, &mut s).unwrap();
        assert_eq!(est.estimate, 0.0);
        assert!(!est.converged);
        let small = sigma_monte_carlo(&StandardGaussian1D, 1.0, 0.02, 2000, 0.01, &mut s).unwrap();
        assert!(small.estimate < 1e-4);
    }

    #[test]
    fn delta_ratio_tends_to_half() {
        let mut s = RngStream::new(5);
        let sigma = sigma_gaussian(2.0, 3.0);
        let ell = optimal_ell(sigma).unwrap().ell_star;
        let stats = delta_clt_experiment(&StandardGaussian1D, 2.0, 3.0, ell, &[64, 256], 4000, &mut s).unwrap();
        for st in &stats {
            let ratio = st.mean_delta / st.mean_sq_delta;
            assert!((ratio - 0.5).abs() < 0.15, "d={} ratio={ratio}", st.d);
            assert!(st.acceptance > 0.4 && st.acceptance < 0.9);
        }
    }
}
