//! Target distributions given by a potential `Φ` and its gradient.

use crate::error::{invalid, Result};
use crate::rng::RngStream;

/// Two-sided Hessian bounds `m I ⪯ ∇²Φ ⪯ M I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexityBounds {
    pub m: f64,
    pub big_m: f64,
}

/// A density proportional to `exp(-Φ(x))` on `R^d`.
pub trait TargetModel: Send + Sync {
    fn dim(&self) -> usize;

    fn potential(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64], grad: &mut [f64]);

    /// Writes `∇Φ(x)` into `grad` and returns `Φ(x)`. One gradient evaluation.
    fn potential_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.gradient(x, grad);
        self.potential(x)
    }

    fn convexity_bounds(&self) -> Option<ConvexityBounds> {
        None
    }

    /// Per-coordinate standard deviations, where meaningful.
    fn scales(&self) -> Option<&[f64]> {
        None
    }

    /// An exact draw from the target, when one is cheap.
    fn sample_stationary(&self, _stream: &mut RngStream) -> Option<Vec<f64>> {
        None
    }

    /// Exact per-coordinate `(mean, variance)` when known and finite.
    fn moments(&self) -> Option<Vec<(f64, f64)>> {
        None
    }
}

impl<T: TargetModel + ?Sized> TargetModel for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn potential(&self, x: &[f64]) -> f64 {
        (**self).potential(x)
    }
    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        (**self).gradient(x, grad)
    }
    fn potential_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        (**self).potential_and_gradient(x, grad)
    }
    fn convexity_bounds(&self) -> Option<ConvexityBounds> {
        (**self).convexity_bounds()
    }
    fn scales(&self) -> Option<&[f64]> {
        (**self).scales()
    }
    fn sample_stationary(&self, stream: &mut RngStream) -> Option<Vec<f64>> {
        (**self).sample_stationary(stream)
    }
    fn moments(&self) -> Option<Vec<(f64, f64)>> {
        (**self).moments()
    }
}

impl TargetModel for Box<dyn TargetModel> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn potential(&self, x: &[f64]) -> f64 {
        (**self).potential(x)
    }
    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        (**self).gradient(x, grad)
    }
    fn potential_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        (**self).potential_and_gradient(x, grad)
    }
    fn convexity_bounds(&self) -> Option<ConvexityBounds> {
        (**self).convexity_bounds()
    }
    fn scales(&self) -> Option<&[f64]> {
        (**self).scales()
    }
    fn sample_stationary(&self, stream: &mut RngStream) -> Option<Vec<f64>> {
        (**self).sample_stationary(stream)
    }
    fn moments(&self) -> Option<Vec<(f64, f64)>> {
        (**self).moments()
    }
}

/// `σ_i² = i / d` for `i = 1..=d`, the heterogeneous variances of the benchmark suite.
pub fn heterogeneous_variances(d: usize) -> Vec<f64> {
    (1..=d).map(|i| i as f64 / d as f64).collect()
}

fn check_positive(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(invalid(format!("{what}: empty")));
    }
    if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        return Err(invalid(format!("{what}[{i}] must be positive, got {v}")));
    }
    Ok(())
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Independent centred Gaussians with standard deviations `σ_i`.
#[derive(Debug, Clone)]
pub struct DiagonalGaussian {
    scales: Vec<f64>,
    inv_var: Vec<f64>,
}

impl DiagonalGaussian {
    pub fn new(scales: Vec<f64>) -> Result<Self> {
        check_positive(&scales, "scales")?;
        let inv_var = scales.iter().map(|s| 1.0 / (s * s)).collect();
        Ok(Self { scales, inv_var })
    }

    pub fn from_variances(variances: &[f64]) -> Result<Self> {
        check_positive(variances, "variances")?;
        Self::new(variances.iter().map(|v| v.sqrt()).collect())
    }

    pub fn standard(d: usize) -> Self {
        Self::new(vec![1.0; d]).expect("unit scales are valid")
    }
}

impl TargetModel for DiagonalGaussian {
    fn dim(&self) -> usize {
        self.scales.len()
    }

    fn potential(&self, x: &[f64]) -> f64 {
        0.5 * x.iter().zip(&self.inv_var).map(|(x, w)| x * x * w).sum::<f64>()
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        for ((g, x), w) in grad.iter_mut().zip(x).zip(&self.inv_var) {
            *g = x * w;
        }
    }

    fn potential_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let mut phi = 0.0;
        for ((g, x), w) in grad.iter_mut().zip(x).zip(&self.inv_var) {
            *g = x * w;
            phi += x * *g;
        }
        0.5 * phi
    }

    fn convexity_bounds(&self) -> Option<ConvexityBounds> {
        Some(ConvexityBounds {
            m: min_of(&self.inv_var),
            big_m: max_of(&self.inv_var),
        })
    }

    fn scales(&self) -> Option<&[f64]> {
        Some(&self.scales)
    }

    fn sample_stationary(&self, stream: &mut RngStream) -> Option<Vec<f64>> {
        Some(self.scales.iter().map(|s| s * stream.standard_normal()).collect())
    }

    fn moments(&self) -> Option<Vec<(f64, f64)>> {
        Some(self.scales.iter().map(|s| (0.0, s * s)).collect())
    }
}

/// `log(1 + exp(-2u))` without overflow.
fn log1p_exp_neg2(u: f64) -> f64 {
    let t = -2.0 * u;
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Equal-weight mixture of `N(a, Σ)` and `N(-a, Σ)` with diagonal `Σ`.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    a: Vec<f64>,
    variances: Vec<f64>,
    scales: Vec<f64>,
    b: Vec<f64>,
    a_norm_sq: f64,
}

impl GaussianMixture {
    pub fn new(a: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        check_positive(&variances, "variances")?;
        if a.len() != variances.len() {
            return Err(invalid(format!(
                "mixture offset has length {} but covariance has {}",
                a.len(),
                variances.len()
            )));
        }
        let b: Vec<f64> = a.iter().zip(&variances).map(|(a, v)| a / v).collect();
        let a_norm_sq = a.iter().zip(&b).map(|(a, b)| a * b).sum();
        let scales = variances.iter().map(|v| v.sqrt()).collect();
        Ok(Self {
            a,
            variances,
            scales,
            b,
            a_norm_sq,
        })
    }

    /// `|a|²_{Σ⁻¹}`.
    pub fn offset_norm_sq(&self) -> f64 {
        self.a_norm_sq
    }

    pub fn offset(&self) -> &[f64] {
        &self.a
    }
}

impl TargetModel for GaussianMixture {
    fn dim(&self) -> usize {
        self.a.len()
    }

    fn potential(&self, x: &[f64]) -> f64 {
        let mut quad = 0.0;
        let mut u = 0.0;
        for i in 0..x.len() {
            let r = x[i] - self.a[i];
            quad += r * r / self.variances[i];
            u += x[i] * self.b[i];
        }
        0.5 * quad - log1p_exp_neg2(u)
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        let u: f64 = x.iter().zip(&self.b).map(|(x, b)| x * b).sum();
        let w = -u.tanh();
        for i in 0..x.len() {
            grad[i] = x[i] / self.variances[i] + self.b[i] * w;
        }
    }

    fn potential_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let mut quad = 0.0;
        let mut u = 0.0;
        for i in 0..x.len() {
            let r = x[i] - self.a[i];
            quad += r * r / self.variances[i];
            u += x[i] * self.b[i];
        }
        let w = -u.tanh();
        for i in 0..x.len() {
            grad[i] = x[i] / self.variances[i] + self.b[i] * w;
        }
        0.5 * quad - log1p_exp_neg2(u)
    }

    fn convexity_bounds(&self) -> Option<ConvexityBounds> {
        if self.a_norm_sq >= 1.0 {
            return None;
        }
        Some(ConvexityBounds {
            m: (1.0 - self.a_norm_sq) / max_of(&self.variances),
            big_m: 1.0 / min_of(&self.variances),
        })
    }

    fn scales(&self) -> Option<&[f64]> {
        Some(&self.scales)
    }

    fn sample_stationary(&self, stream: &mut RngStream) -> Option<Vec<f64>> {
        let sign = if stream.uniform() < 0.5 { 1.0 } else { -1.0 };
        Some(
            self.a
                .iter()
                .zip(&self.scales)
                .map(|(a, s)| sign * a + s * stream.standard_normal())
                .collect(),
        )
    }

    fn moments(&self) -> Option<Vec<(f64, f64)>> {
        Some(self.a.iter().zip(&self.variances).map(|(a, v)| (0.0, v + a * a)).collect())
    }
}

/// Multivariate Student distribution with `k` degrees of freedom and diagonal scale `Σ`.
#[derive(Debug, Clone)]
pub struct StudentT {
    dof: f64,
    variances: Vec<f64>,
    scales: Vec<f64>,
}

impl StudentT {
    pub fn new(dof: f64, variances: Vec<f64>) -> Result<Self> {
        if !(dof >= 1.0 && dof.is_finite()) {
            return Err(invalid(format!("degrees of freedom must be >= 1, got {dof}")));
        }
        check_positive(&variances, "variances")?;
        let scales = variances.iter().map(|v| v.sqrt()).collect();
        Ok(Self {
            dof,
            variances,
            scales,
        })
    }

    pub fn dof(&self) -> f64 {
        self.dof
    }

    fn mahalanobis_sq(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.variances).map(|(x, v)| x * x / v).sum()
    }
}

impl TargetModel for StudentT {
    fn dim(&self) -> usize {
        self.variances.len()
    }

    fn potential(&self, x: &[f64]) -> f64 {
        let d = self.dim() as f64;
        0.5 * (self.dof + d) * (self.dof + self.mahalanobis_sq(x)).ln()
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        let d = self.dim() as f64;
        let w = (self.dof + d) / (self.dof + self.mahalanobis_sq(x));
        for ((g, x), v) in grad.iter_mut().zip(x).zip(&self.variances) {
            *g = x / v * w;
        }
    }

    fn potential_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.dim() as f64;
        let q = self.dof + self.mahalanobis_sq(x);
        let w = (self.dof + d) / q;
        for ((g, x), v) in grad.iter_mut().zip(x).zip(&self.variances) {
            *g = x / v * w;
        }
        0.5 * (self.dof + d) * q.ln()
    }

    fn scales(&self) -> Option<&[f64]> {
        Some(&self.scales)
    }

    /// Gaussian scale mixture; only for integer degrees of freedom up to 1000.
    fn sample_stationary(&self, stream: &mut RngStream) -> Option<Vec<f64>> {
        if self.dof.fract() != 0.0 || self.dof > 1000.0 {
            return None;
        }
        let k = self.dof as usize;
        let mut chi2 = 0.0;
        for _ in 0..k {
            let z = stream.standard_normal();
            chi2 += z * z;
        }
        let inv = (self.dof / chi2).sqrt();
        Some(self.scales.iter().map(|s| s * stream.standard_normal() * inv).collect())
    }

    fn moments(&self) -> Option<Vec<(f64, f64)>> {
        if self.dof <= 2.0 {
            return None;
        }
        let f = self.dof / (self.dof - 2.0);
        Some(self.variances.iter().map(|v| (0.0, v * f)).collect())
    }
}

/// `Φ ≡ 0`. Not a probability density; useful to exercise integrators.
#[derive(Debug, Clone)]
pub struct FreeParticle {
    pub d: usize,
}

impl TargetModel for FreeParticle {
    fn dim(&self) -> usize {
        self.d
    }
    fn potential(&self, _x: &[f64]) -> f64 {
        0.0
    }
    fn gradient(&self, _x: &[f64], grad: &mut [f64]) {
        grad.fill(0.0);
    }
}

/// A one-dimensional potential `φ` with derivatives through third order.
pub trait Marginal1DPotential: Send + Sync {
    fn phi(&self, x: f64) -> f64;
    fn dphi(&self, x: f64) -> f64;
    fn d2phi(&self, x: f64) -> f64;
    fn d3phi(&self, x: f64) -> f64;

    /// An exact draw from `exp(-φ)`, when available.
    fn sample(&self, _stream: &mut RngStream) -> Option<f64> {
        None
    }
}

/// `φ(x) = x² / 2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct StandardGaussian1D;

impl Marginal1DPotential for StandardGaussian1D {
    fn phi(&self, x: f64) -> f64 {
        0.5 * x * x
    }
    fn dphi(&self, x: f64) -> f64 {
        x
    }
    fn d2phi(&self, _x: f64) -> f64 {
        1.0
    }
    fn d3phi(&self, _x: f64) -> f64 {
        0.0
    }
    fn sample(&self, stream: &mut RngStream) -> Option<f64> {
        Some(stream.standard_normal())
    }
}

/// `φ(x) = x² / 2 + log cosh(x)`: non-Gaussian, with bounded derivatives of
/// orders two to four.
#[derive(Debug, Clone, Copy, Default)]
pub struct LogCosh1D;

impl Marginal1DPotential for LogCosh1D {
    fn phi(&self, x: f64) -> f64 {
        let a = x.abs();
        0.5 * x * x + a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
    }
    fn dphi(&self, x: f64) -> f64 {
        x + x.tanh()
    }
    fn d2phi(&self, x: f64) -> f64 {
        let t = x.tanh();
        2.0 - t * t
    }
    fn d3phi(&self, x: f64) -> f64 {
        let t = x.tanh();
        -2.0 * t * (1.0 - t * t)
    }
    /// Rejection from `N(0, 1)` with acceptance probability `1 / cosh(x)`.
    fn sample(&self, stream: &mut RngStream) -> Option<f64> {
        loop {
            let z = stream.standard_normal();
            if stream.uniform() * z.cosh() <= 1.0 {
                return Some(z);
            }
        }
    }
}

/// `Φ(x) = Σ_i φ(x_i)`.
#[derive(Debug, Clone)]
pub struct ProductTarget<P> {
    marginal: P,
    d: usize,
}

impl<P: Marginal1DPotential> ProductTarget<P> {
    pub fn new(marginal: P, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(invalid("product target needs d >= 1"));
        }
        Ok(Self { marginal, d })
    }

    pub fn marginal(&self) -> &P {
        &self.marginal
    }
}

impl<P: Marginal1DPotential> TargetModel for ProductTarget<P> {
    fn dim(&self) -> usize {
        self.d
    }

    fn potential(&self, x: &[f64]) -> f64 {
        x.iter().map(|&x| self.marginal.phi(x)).sum()
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        for (g, &x) in grad.iter_mut().zip(x) {
            *g = self.marginal.dphi(x);
        }
    }

    fn sample_stationary(&self, stream: &mut RngStream) -> Option<Vec<f64>> {
        (0..self.d).map(|_| self.marginal.sample(stream)).collect()
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Central differences with a step scaled to `|x|`.
    pub(crate) fn fd_gradient<T: TargetModel>(t: &T, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        (0..x.len())
            .map(|i| {
                let h = 1e-5 * (1.0 + x[i].abs());
                y[i] = x[i] + h;
                let up = t.potential(&y);
                y[i] = x[i] - h;
                let down = t.potential(&y);
                y[i] = x[i];
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    pub(crate) fn assert_gradient_matches<T: TargetModel>(t: &T, stream: &mut RngStream, points: usize, spread: f64) {
        let d = t.dim();
        let mut g = vec![0.0; d];
        for _ in 0..points {
            let x: Vec<f64> = (0..d).map(|_| spread * stream.standard_normal()).collect();
            t.gradient(&x, &mut g);
            let fd = fd_gradient(t, &x);
            for i in 0..d {
                let err = (g[i] - fd[i]).abs();
                assert!(
                    err <= 1e-5 * g[i].abs().max(fd[i].abs()) + 1e-8 * (1.0 + t.potential(&x).abs()),
                    "coord {i}: analytic {} vs fd {}",
                    g[i],
                    fd[i]
                );
            }
            let mut g2 = vec![0.0; d];
            let phi = t.potential_and_gradient(&x, &mut g2);
            assert!((phi - t.potential(&x)).abs() <= 1e-14 * (1.0 + phi.abs()));
            for (a, b) in g.iter().zip(&g2) {
                assert!((a - b).abs() <= 1e-14 * (1.0 + a.abs()));
            }
        }
    }

    /// Second difference of `Φ` along a unit direction.
    fn hessian_quadratic_form<T: TargetModel>(t: &T, x: &[f64], dir: &[f64]) -> f64 {
        let eps = 1e-3;
        let mut grad_p = vec![0.0; x.len()];
        let mut grad_m = vec![0.0; x.len()];
        let xp: Vec<f64> = x.iter().zip(dir).map(|(x, u)| x + eps * u).collect();
        let xm: Vec<f64> = x.iter().zip(dir).map(|(x, u)| x - eps * u).collect();
        t.gradient(&xp, &mut grad_p);
        t.gradient(&xm, &mut grad_m);
        grad_p.iter().zip(&grad_m).zip(dir).map(|((p, m), u)| (p - m) * u).sum::<f64>() / (2.0 * eps)
    }

    fn random_unit(stream: &mut RngStream, d: usize) -> Vec<f64> {
        let v: Vec<f64> = (0..d).map(|_| stream.standard_normal()).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect()
    }

    fn benchmark_mixture(d: usize) -> GaussianMixture {
        let a = (1..=d).map(|i| (i as f64).sqrt() / (2.0 * d as f64)).collect();
        GaussianMixture::new(a, heterogeneous_variances(d)).unwrap()
    }

    #[test]
    fn diagonal_gaussian_values() {
        let g = DiagonalGaussian::new(vec![1.0]).unwrap();
        let mut grad = [0.0];
        assert_eq!(g.potential_and_gradient(&[2.0], &mut grad), 2.0);
        assert_eq!(grad, [2.0]);
        assert_eq!(g.potential_and_gradient(&[0.0], &mut grad), 0.0);
        assert_eq!(grad, [0.0]);
        assert!(DiagonalGaussian::new(vec![1.0, 0.0]).is_err());
        assert!(DiagonalGaussian::new(vec![-1.0]).is_err());
    }

    #[test]
    fn heterogeneous_gaussian_bounds() {
        let g = DiagonalGaussian::from_variances(&heterogeneous_variances(50)).unwrap();
        let b = g.convexity_bounds().unwrap();
        assert!((g.scales().unwrap()[49] - 1.0).abs() < 1e-15);
        assert!((b.big_m - 50.0).abs() < 1e-12);
        assert!((b.m - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mixture_degenerates_to_gaussian() {
        let m = GaussianMixture::new(vec![0.0; 3], vec![1.0, 2.0, 0.5]).unwrap();
        let g = DiagonalGaussian::from_variances(&[1.0, 2.0, 0.5]).unwrap();
        let x = [0.3, -1.2, 2.0];
        assert!((m.potential(&x) - (g.potential(&x) - 2f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn mixture_benchmark_bounds() {
        let m = benchmark_mixture(50);
        // direct summation oracle for |a|²_{Σ⁻¹}
        let mut direct = 0.0;
        for i in 1..=50 {
            let a = (i as f64).sqrt() / 100.0;
            direct += a * a / (i as f64 / 50.0);
        }
        assert!((direct - 0.25).abs() < 1e-14);
        assert!((m.offset_norm_sq() - direct).abs() < 1e-14);
        let b = m.convexity_bounds().unwrap();
        assert!((b.m - 0.75).abs() < 1e-12);
        assert!((b.big_m - 50.0).abs() < 1e-12);
        let mut grad = vec![1.0; 50];
        m.gradient(&vec![0.0; 50], &mut grad);
        assert!(grad.iter().all(|g| g.abs() < 1e-15));
    }

    #[test]
    fn mixture_far_from_origin_is_finite() {
        let m = benchmark_mixture(50);
        let x = vec![1e4; 50];
        let mut g = vec![0.0; 50];
        assert!(m.potential_and_gradient(&x, &mut g).is_finite());
        assert!(g.iter().all(|g| g.is_finite()));
        let x = vec![-1e4; 50];
        assert!(m.potential_and_gradient(&x, &mut g).is_finite());
        let far = GaussianMixture::new(vec![3.0], vec![1.0]).unwrap();
        assert!(far.convexity_bounds().is_none());
    }

    #[test]
    fn mixture_hessian_within_bounds() {
        let m = benchmark_mixture(50);
        let b = m.convexity_bounds().unwrap();
        let mut s = RngStream::new(4);
        for _ in 0..20 {
            let x = m.sample_stationary(&mut s).unwrap();
            for _ in 0..100 {
                let u = random_unit(&mut s, 50);
                let q = hessian_quadratic_form(&m, &x, &u);
                assert!(q >= b.m - 1e-3 && q <= b.big_m + 1e-3, "q = {q}");
            }
        }
    }

    #[test]
    fn student_values() {
        let t = StudentT::new(1.0, vec![1.0]).unwrap();
        let mut g = [0.0];
        let phi = t.potential_and_gradient(&[1.0], &mut g);
        assert!((phi - 2f64.ln()).abs() < 1e-15);
        assert!((g[0] - 1.0).abs() < 1e-15);
        t.gradient(&[0.0], &mut g);
        assert_eq!(g[0], 0.0);
        assert!(StudentT::new(0.5, vec![1.0]).is_err());
        assert!(t.convexity_bounds().is_none());
        let t20 = StudentT::new(20.0, vec![2.0]).unwrap();
        assert!((t20.moments().unwrap()[0].1 - 2.0 * 20.0 / 18.0).abs() < 1e-14);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut s = RngStream::new(8);
        let v = heterogeneous_variances(50);
        assert_gradient_matches(&DiagonalGaussian::from_variances(&v).unwrap(), &mut s, 20, 1.0);
        assert_gradient_matches(&benchmark_mixture(50), &mut s, 20, 1.0);
        assert_gradient_matches(&StudentT::new(20.0, v.clone()).unwrap(), &mut s, 20, 1.0);
        assert_gradient_matches(&StudentT::new(1.0, vec![1.0, 3.0]).unwrap(), &mut s, 20, 3.0);
        assert_gradient_matches(&ProductTarget::new(LogCosh1D, 5).unwrap(), &mut s, 20, 2.0);
    }

    #[test]
    fn gradient_lipschitz_within_m() {
        let mut s = RngStream::new(12);
        let targets: Vec<Box<dyn TargetModel>> = vec![
            Box::new(DiagonalGaussian::from_variances(&heterogeneous_variances(10)).unwrap()),
            Box::new(benchmark_mixture(10)),
        ];
        for t in &targets {
            let big_m = t.convexity_bounds().unwrap().big_m;
            let (mut gx, mut gy) = (vec![0.0; 10], vec![0.0; 10]);
            for _ in 0..200 {
                let x: Vec<f64> = (0..10).map(|_| 3.0 * s.standard_normal()).collect();
                let y: Vec<f64> = (0..10).map(|_| 3.0 * s.standard_normal()).collect();
                t.gradient(&x, &mut gx);
                t.gradient(&y, &mut gy);
                let num: f64 = gx.iter().zip(&gy).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let den: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                assert!(num / den <= big_m * (1.0 + 1e-12));
                assert!(t.potential(&x).is_finite());
            }
        }
    }

    #[test]
    fn product_target_structure() {
        let p = ProductTarget::new(StandardGaussian1D, 3).unwrap();
        assert_eq!(p.potential(&[1.0, 1.0, 1.0]), 1.5);
        let mut g = [0.0; 3];
        p.gradient(&[1.0, -2.0, 0.5], &mut g);
        assert_eq!(g, [1.0, -2.0, 0.5]);
        let one = ProductTarget::new(LogCosh1D, 1).unwrap();
        assert_eq!(one.potential(&[0.7]), LogCosh1D.phi(0.7));
        assert!(ProductTarget::new(LogCosh1D, 0).is_err());
    }

    #[test]
    fn marginal_derivatives_chain() {
        let m = LogCosh1D;
        for i in -40..=40 {
            let x = i as f64 * 0.1;
            let h = 1e-5;
            let pairs = [
                ((m.phi(x + h) - m.phi(x - h)) / (2.0 * h), m.dphi(x)),
                ((m.dphi(x + h) - m.dphi(x - h)) / (2.0 * h), m.d2phi(x)),
                ((m.d2phi(x + h) - m.d2phi(x - h)) / (2.0 * h), m.d3phi(x)),
            ];
            for (fd, exact) in pairs {
                assert!((fd - exact).abs() <= 1e-4 * exact.abs().max(1e-2), "x={x}: {fd} vs {exact}");
            }
        }
        assert!((LogCosh1D.phi(3.0) - (4.5 + 3f64.cosh().ln())).abs() < 1e-13);
    }

    #[test]
    fn stationary_draws_have_target_moments() {
        let mut s = RngStream::new(17);
        let n = 200_000;
        let targets: Vec<Box<dyn TargetModel>> = vec![
            Box::new(benchmark_mixture(4)),
            Box::new(StudentT::new(20.0, vec![0.5, 1.0]).unwrap()),
        ];
        for t in &targets {
            let moments = t.moments().unwrap();
            let d = t.dim();
            let mut m2 = vec![0.0; d];
            for _ in 0..n {
                let x = t.sample_stationary(&mut s).unwrap();
                for i in 0..d {
                    m2[i] += x[i] * x[i];
                }
            }
            for i in 0..d {
                let v = m2[i] / n as f64;
                // generous: 5% relative for heavy-ish tails at n = 2e5
                assert!((v - moments[i].1).abs() < 0.05 * moments[i].1, "{v} vs {}", moments[i].1);
            }
        }
    }
}
