//! Closed-form autocorrelations, efficiencies and contraction rates for the
//! Gaussian and strongly log-concave settings.

use std::f64::consts::FRAC_PI_2;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DampingRegime {
    Underdamped,
    Critical,
    Overdamped,
}

/// Classifies `γ` relative to the critical value `2/σ`, using the same band
/// as [`crate::dynamics::matexp_2x2`].
pub fn damping_regime(sigma: f64, gamma: f64) -> DampingRegime {
    let inv = 1.0 / sigma;
    let delta = gamma / 2.0 - inv;
    if delta.abs() <= 1e-6 * inv {
        DampingRegime::Critical
    } else if delta < 0.0 {
        DampingRegime::Underdamped
    } else {
        DampingRegime::Overdamped
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcfCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub regime: Option<DampingRegime>,
}

impl AcfCurve {
    pub fn langevin(sigma: f64, gamma: f64, times: &[f64]) -> Self {
        Self {
            times: times.to_vec(),
            values: times.iter().map(|&t| langevin_acf(sigma, gamma, t)).collect(),
            regime: Some(damping_regime(sigma, gamma)),
        }
    }
}

/// Position autocorrelation at lag `T` of Langevin dynamics with friction `γ`
/// on a centred Gaussian coordinate of scale `σ`.
///
/// Evaluated from the eigen-decomposition, independently of [`crate::dynamics::matexp_2x2`].
pub fn langevin_acf(sigma: f64, gamma: f64, t: f64) -> f64 {
    let half = gamma / 2.0;
    let inv = 1.0 / sigma;
    let kappa = (half - inv) * (half + inv);
    let omega = kappa.abs().sqrt();
    let decay = (-half * t).exp();
    if omega * t < 1e-8 {
        // cos(ωT) and sin(ωT)/ω agree with 1 and T to O((ωT)²)
        return decay * (1.0 + half * t);
    }
    if kappa < 0.0 {
        return decay * ((omega * t).cos() + half * (omega * t).sin() / omega);
    }
    if omega * t < 1.0 {
        return decay * ((omega * t).cosh() + half * (omega * t).sinh() / omega);
    }
    // two real modes; the slow rate is written without cancellation
    let slow = inv * inv / (half + omega);
    let fast = half + omega;
    let c = half / omega;
    0.5 * (1.0 + c) * (-slow * t).exp() + 0.5 * (1.0 - c) * (-fast * t).exp()
}

/// Mean-function correlation of exact randomized HMC: `σ²/(σ²+T²)`.
pub fn rhmc_mean_acf(sigma: f64, t: f64) -> f64 {
    let s2 = sigma * sigma;
    s2 / (s2 + t * t)
}

/// Square-function correlation of exact randomized HMC: `(σ²+2T²)/(σ²+4T²)`.
pub fn rhmc_square_acf(sigma: f64, t: f64) -> f64 {
    let s2 = sigma * sigma;
    let t2 = t * t;
    (s2 + 2.0 * t2) / (s2 + 4.0 * t2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplerFamily {
    /// Exact Hamiltonian flow for a fixed time.
    Hamiltonian,
    /// Langevin dynamics with the given friction.
    Langevin(f64),
    /// Hamiltonian flow for exponential times with the given mean.
    Rhmc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFunction {
    Mean,
    Square,
}

/// Largest lag-`T` correlation over coordinates, for `f(x) = x` or `f(x) = x²`.
///
/// For Gaussians the square-function correlation is the square of the mean one,
/// so `Square` takes the largest `ρ²` and `Mean` the largest signed `ρ`.
pub fn worst_acf(scales: &[f64], family: SamplerFamily, f: TestFunction, t: f64) -> f64 {
    let per_coord = |s: f64| -> f64 {
        match family {
            SamplerFamily::Hamiltonian => (t / s).cos(),
            SamplerFamily::Langevin(g) => langevin_acf(s, g, t),
            SamplerFamily::Rhmc => match f {
                TestFunction::Mean => rhmc_mean_acf(s, t),
                TestFunction::Square => rhmc_square_acf(s, t),
            },
        }
    };
    scales
        .iter()
        .map(|&s| {
            let r = per_coord(s);
            match (family, f) {
                (SamplerFamily::Rhmc, _) | (_, TestFunction::Mean) => r,
                (_, TestFunction::Square) => r * r,
            }
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Normalized ESS per unit integration time of an AR(1) chain with root `ϱ`
/// advanced by time `T`: `(π/(2T))(1−ϱ)/(1+ϱ)`. Infinite at `ϱ = −1`.
pub fn ar_ess(rho: f64, t: f64) -> f64 {
    if rho <= -1.0 {
        return f64::INFINITY;
    }
    FRAC_PI_2 / t * (1.0 - rho) / (1.0 + rho)
}

/// Finite stand-in for infinite efficiencies in tabular output.
pub const ESS_CAP: f64 = 1e6;

pub fn capped(x: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        ESS_CAP
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateReport {
    pub r: f64,
    pub lambda: f64,
    pub c: f64,
    pub c_prime: f64,
}

fn check_bounds(m: f64, big_m: f64, alpha: f64) -> Result<()> {
    if !(m > 0.0 && m <= big_m && big_m.is_finite()) {
        return Err(invalid(format!("need 0 < m <= M, got m={m}, M={big_m}")));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(invalid(format!("persistence must lie in [0, 1), got {alpha}")));
    }
    Ok(())
}

/// Contraction rate, refreshment intensity and prefactors for randomized HMC
/// with persistence `α` under `m I ⪯ ∇²Φ ⪯ M I`.
pub fn theorem1_rate(m: f64, big_m: f64, alpha: f64) -> Result<RateReport> {
    check_bounds(m, big_m, alpha)?;
    let root = (big_m + m).sqrt();
    Ok(RateReport {
        r: (1.0 + alpha) * m / (2.0 * root),
        lambda: 2.0 * root / (1.0 - alpha * alpha),
        c: (4.0 / (3.0 - alpha)).sqrt(),
        c_prime: ((5.0 + alpha + 4.0 * (1.0 + alpha).sqrt()) / (3.0 - alpha)).powf(0.25),
    })
}

/// Contraction rate of Langevin dynamics, `m ∧ (γ² − M)/γ`, for `γ > √M`.
pub fn langevin_rate(m: f64, big_m: f64, gamma: f64) -> Result<f64> {
    check_bounds(m, big_m, 0.0)?;
    if !(gamma * gamma > big_m) {
        return Err(invalid(format!("friction must exceed sqrt(M) = {}, got {gamma}", big_m.sqrt())));
    }
    Ok(m.min(gamma * gamma - big_m) / gamma)
}

/// The earlier rate and intensity for randomized HMC used as a comparison.
pub fn deligiannidis_rate(m: f64, big_m: f64, alpha: f64) -> Result<(f64, f64)> {
    check_bounds(m, big_m, alpha)?;
    let s = big_m + m;
    let root = s.sqrt();
    let r = (1.0 + alpha) * m / (2.0 * root) - alpha * m.powf(1.5) / (4.0 * s);
    let lambda = (2.0 * root - (1.0 - alpha) * m / root) / (1.0 - alpha * alpha);
    Ok((r, lambda))
}

/// Entries `(a, b, c)` of the twisted norm `a|Δx|² + 2bΔx·Δv + c|Δv|²`.
pub fn twist_matrix(m: f64, big_m: f64, alpha: f64) -> Result<(f64, f64, f64)> {
    check_bounds(m, big_m, alpha)?;
    Ok((2.0 * (big_m + m) / (1.0 + alpha), (big_m + m).sqrt(), 2.0))
}

/// The twist used for Langevin dynamics with friction `γ`.
pub fn langevin_twist(gamma: f64) -> (f64, f64, f64) {
    (gamma * gamma, gamma, 2.0)
}
