//! Pointwise kernels of the Bessel operator: heat `W_t`, Poisson `P_t`,
//! conjugate Poisson `Q_t`, Riesz `R` and fractional `K^α`.
//!
//! The Poisson-type kernels are θ-integrals
//! `∫_0^π N(θ) (sin θ)^{2λ-1} / (x² + y² + t² − 2xy cos θ)^{λ+1} dθ`,
//! evaluated in `u = 1 − cos θ` on `[0, π/2]` and `v = 1 + cos θ` on
//! `[π/2, π]`, where the weight becomes `(u(2 − u))^{λ−1} du`. For `λ < 1`
//! the further substitution `w = u^λ` removes the endpoint singularity.

use serde::{Deserialize, Serialize};

use crate::measure_space::{comparable_volume, measure_interval, Interval, MeasureSpace};
use crate::quadrature::{integrate_adaptive_with_breaks, integrate_halfline_scaled, Quad, QuadConfig};
use crate::special_functions::{bessel_i_scaled, log_gamma};
use crate::{Error, Result};

/// Relative distance below which the Riesz kernel is refused.
pub const RIESZ_DIAGONAL_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelKind {
    Heat { t: f64 },
    Poisson { t: f64 },
    ConjPoisson { t: f64 },
    Riesz,
    Fractional { alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub space: MeasureSpace,
    pub quad: QuadConfig,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, space: MeasureSpace, quad: QuadConfig) -> Result<Self> {
        match kind {
            KernelKind::Heat { t } | KernelKind::Poisson { t } | KernelKind::ConjPoisson { t } => {
                if !(t > 0.0 && t.is_finite()) {
                    return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
                }
            }
            KernelKind::Fractional { alpha } => {
                if !(alpha > 0.0 && alpha < space.upper_dim()) {
                    return Err(Error::InvalidArgument(format!(
                        "alpha must lie in (0, Q) = (0, {}), got {alpha}",
                        space.upper_dim()
                    )));
                }
            }
            KernelKind::Riesz => {}
        }
        quad.validate()?;
        Ok(Self { kind, space, quad })
    }

    /// Kernel value with quadrature error estimate.
    pub fn eval(&self, x: f64, y: f64) -> Result<Quad> {
        let s = &self.space;
        match self.kind {
            KernelKind::Heat { t } => Ok(Quad::exact(heat_kernel(s, t, x, y)?)),
            KernelKind::Poisson { t } => poisson_kernel(s, t, x, y, &self.quad),
            KernelKind::ConjPoisson { t } => conj_poisson_kernel(s, t, x, y, &self.quad),
            KernelKind::Riesz => riesz_kernel(s, x, y, &self.quad),
            KernelKind::Fractional { alpha } => frac_kernel(s, alpha, x, y, &self.quad),
        }
    }

    /// Degree `d` with `K(δx, δy) = δ^d K(x, y)` once `t` is rescaled
    /// (`t → δ t` for Poisson kernels, `t → δ² t` for heat).
    pub fn homogeneity_degree(&self) -> f64 {
        match self.kind {
            KernelKind::Fractional { alpha } => alpha - self.space.upper_dim(),
            _ => -self.space.upper_dim(),
        }
    }
}

fn check_points(x: f64, y: f64) -> Result<()> {
    if !(x > 0.0 && y > 0.0) || !x.is_finite() || !y.is_finite() {
        return Err(Error::InvalidArgument(format!("kernel needs x, y > 0, got ({x}, {y})")));
    }
    Ok(())
}

// ============================================================================
// Heat kernel
// ============================================================================

/// `W_t(x, y) = (1/2t) e^{-(x²+y²)/4t} (xy)^{-λ+1/2} I_{λ-1/2}(xy/2t)`,
/// evaluated as `(1/2t) e^{-(x-y)²/4t} (xy)^{-λ+1/2} [e^{-z} I_{λ-1/2}(z)]`.
pub fn heat_kernel(space: &MeasureSpace, t: f64, x: f64, y: f64) -> Result<f64> {
    check_points(x, y)?;
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
    }
    let mu = space.lambda() - 0.5;
    let z = x * y / (2.0 * t);
    let d = x - y;
    let gauss = (-d * d / (4.0 * t)).exp();
    if gauss == 0.0 {
        return Ok(0.0);
    }
    Ok(gauss * (x * y).powf(-mu) * bessel_i_scaled(mu, z)? / (2.0 * t))
}

// ============================================================================
// θ-integrals
// ============================================================================

/// `∫_0^π (a + b (1 − cos θ)) (sin θ)^{2λ−1} / (D + B (1 − cos θ))^{λ+1} dθ`
/// with `D = (x−y)² + t²`, `B = 2xy`.
fn theta_integral(lambda: f64, num_a: f64, num_b: f64, dd: f64, bb: f64, cfg: &QuadConfig) -> Quad {
    // u^{λ−1} du = dw / λ under u = w^{1/λ}; for λ >= 1 the weight is already
    // bounded and u itself is the better variable
    let g = lambda.min(1.0);
    let inv_g = 1.0 / g;
    let p = lambda + 1.0;
    let first = |w: f64| {
        let u = w.powf(inv_g);
        let jac = u.powf(lambda - g);
        (num_a + num_b * u) * jac * (2.0 - u).powf(lambda - 1.0) / (dd + bb * u).powf(p)
    };
    let second = |w: f64| {
        let v = w.powf(inv_g);
        let u = 2.0 - v;
        let jac = v.powf(lambda - g);
        (num_a + num_b * u) * jac * u.powf(lambda - 1.0) / (dd + bb * u).powf(p)
    };
    // the first half peaks at u ≈ D/B when D ≪ B
    let mut breaks = Vec::new();
    if bb > 0.0 {
        let mut u = dd / bb;
        while u < 1.0 {
            breaks.push(u.powf(g));
            u *= 8.0;
        }
    }
    let q1 = integrate_adaptive_with_breaks(first, 0.0, 1.0, &breaks, cfg);
    let q2 = integrate_adaptive_with_breaks(second, 0.0, 1.0, &[], cfg);
    q1.add(q2).scale(inv_g)
}

/// `P_t(x, y) = (2λt/π) ∫_0^π (sin θ)^{2λ−1} / (x² + y² + t² − 2xy cos θ)^{λ+1} dθ`.
pub fn poisson_kernel(space: &MeasureSpace, t: f64, x: f64, y: f64, cfg: &QuadConfig) -> Result<Quad> {
    check_points(x, y)?;
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
    }
    let l = space.lambda();
    let d = x - y;
    let q = theta_integral(l, 1.0, 0.0, d * d + t * t, 2.0 * x * y, cfg);
    let q = q.scale(2.0 * l * t / std::f64::consts::PI);
    q.ok()?;
    Ok(q)
}

/// `Q_t(x, y) = −(2λ/π) ∫_0^π (x − y cos θ)(sin θ)^{2λ−1} / (x² + y² + t² − 2xy cos θ)^{λ+1} dθ`.
pub fn conj_poisson_kernel(space: &MeasureSpace, t: f64, x: f64, y: f64, cfg: &QuadConfig) -> Result<Quad> {
    check_points(x, y)?;
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
    }
    conj_theta(space, t, x, y, cfg)
}

fn conj_theta(space: &MeasureSpace, t: f64, x: f64, y: f64, cfg: &QuadConfig) -> Result<Quad> {
    let l = space.lambda();
    let d = x - y;
    // x − y cos θ = (x − y) + y (1 − cos θ)
    let q = theta_integral(l, d, y, d * d + t * t, 2.0 * x * y, cfg);
    let q = q.scale(-2.0 * l / std::f64::consts::PI);
    q.ok()?;
    Ok(q)
}

/// `R(x, y)`, the conjugate Poisson kernel at `t = 0`. Refuses
/// `|x − y| < 1e-6 · x`.
pub fn riesz_kernel(space: &MeasureSpace, x: f64, y: f64, cfg: &QuadConfig) -> Result<Quad> {
    check_points(x, y)?;
    if (x - y).abs() < RIESZ_DIAGONAL_GUARD * x {
        return Err(Error::Diagonal { x, y });
    }
    conj_theta(space, 0.0, x, y, cfg)
}

/// `R(x, y)` without the diagonal guard, for integrands whose other factors
/// vanish on the diagonal. Returns 0 once `x` and `y` are within rounding.
pub(crate) fn riesz_kernel_unguarded(space: &MeasureSpace, x: f64, y: f64, cfg: &QuadConfig) -> Result<Quad> {
    check_points(x, y)?;
    if (x - y).abs() <= 1e-13 * x {
        return Ok(Quad::exact(0.0));
    }
    conj_theta(space, 0.0, x, y, cfg)
}

// ============================================================================
// Fractional kernel
// ============================================================================

/// `K^α(x, y) = (1/Γ(α)) ∫_0^∞ W_t(x, y) t^{α/2 − 1} dt`, computed with
/// `t = |x − y|² s`.
pub fn frac_kernel(space: &MeasureSpace, alpha: f64, x: f64, y: f64, cfg: &QuadConfig) -> Result<Quad> {
    check_points(x, y)?;
    if !(alpha > 0.0 && alpha < space.upper_dim()) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, Q), got {alpha}")));
    }
    if x == y {
        return Err(Error::Diagonal { x, y });
    }
    let d2 = (x - y) * (x - y);
    // O(1) integrand, so the absolute tolerance is scale-free
    let vol = comparable_volume(space, x, (x - y).abs());
    let mut failure = None;
    let integrand = |s: f64| {
        if s == 0.0 {
            return 0.0;
        }
        match heat_kernel(space, d2 * s, x, y) {
            Ok(w) => vol * w * s.powf(0.5 * alpha - 1.0),
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        }
    };
    let q = integrate_halfline_scaled(integrand, 1.0, cfg)?;
    if let Some(e) = failure {
        return Err(e);
    }
    let norm = d2.powf(0.5 * alpha) * (-log_gamma(alpha)).exp() / vol;
    let q = q.scale(norm);
    q.ok()?;
    Ok(q)
}

/// `∂K^α/∂x` by central difference with step `1e-4 · min(x, |x − y|)`.
pub fn frac_kernel_x_derivative(space: &MeasureSpace, alpha: f64, x: f64, y: f64, cfg: &QuadConfig) -> Result<f64> {
    check_points(x, y)?;
    let h = 1e-4 * x.min((x - y).abs());
    if !(h > 0.0) || x - h == x || x + h == x {
        return Err(Error::Diagonal { x, y });
    }
    let kp = frac_kernel(space, alpha, x + h, y, cfg)?.value;
    let km = frac_kernel(space, alpha, x - h, y, cfg)?.value;
    Ok((kp - km) / (2.0 * h))
}

// ============================================================================
// Comparison quantities
// ============================================================================

/// `|x − y|^α / m_λ(I(x, |x − y|))`.
pub fn frac_size_profile(space: &MeasureSpace, alpha: f64, x: f64, y: f64) -> f64 {
    let d = (x - y).abs();
    d.powf(alpha) / measure_interval(space, &Interval::new(x, d).expect("x != y"))
}

/// `1 / m_λ(I(x, |x − y|))`.
pub fn cz_size_profile(space: &MeasureSpace, x: f64, y: f64) -> f64 {
    let d = (x - y).abs();
    1.0 / measure_interval(space, &Interval::new(x, d).expect("x != y"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate_halfline_scaled, integrate_tanh_sinh};

    fn sp(l: f64) -> MeasureSpace {
        MeasureSpace::new(l).unwrap()
    }

    fn cfg() -> QuadConfig {
        QuadConfig::default()
    }

    #[test]
    fn heat_is_symmetric_and_homogeneous() {
        let s = sp(0.7);
        let (x, y, t, d) = (1.0, 1.5, 0.3, 2.0);
        assert_eq!(heat_kernel(&s, t, x, y).unwrap(), heat_kernel(&s, t, y, x).unwrap());
        let lhs = heat_kernel(&s, d * d * t, d * x, d * y).unwrap();
        let rhs = d.powf(-s.upper_dim()) * heat_kernel(&s, t, x, y).unwrap();
        assert!(((lhs - rhs) / rhs).abs() < 1e-12);
    }

    #[test]
    fn heat_conserves_mass() {
        let s = sp(1.0);
        for t in [0.1, 1.0] {
            let q = integrate_halfline_scaled(|y| heat_kernel(&s, t, 1.0, y).unwrap() * s.density(y), 1.0, &cfg())
                .unwrap();
            assert!((q.value - 1.0).abs() < 1e-6, "t={t}: {}", q.value);
        }
    }

    #[test]
    fn heat_matches_unscaled_formula() {
        let s = sp(1.3);
        let (t, x, y): (f64, f64, f64) = (0.4, 0.9, 1.7);
        let mu = s.lambda() - 0.5;
        let z = x * y / (2.0 * t);
        let raw = (-(x * x + y * y) / (4.0 * t)).exp()
            * (x * y).powf(-mu)
            * crate::special_functions::bessel_i(mu, z).unwrap()
            / (2.0 * t);
        let got = heat_kernel(&s, t, x, y).unwrap();
        assert!(((got - raw) / raw).abs() < 1e-13);
    }

    #[test]
    fn poisson_positive_conserving_homogeneous() {
        let s = sp(1.0);
        let (x, y, t, d) = (1.0, 2.0, 1.0, 3.0);
        let p = poisson_kernel(&s, t, x, y, &cfg()).unwrap().value;
        assert!(p > 0.0);
        let pd = poisson_kernel(&s, d * t, d * x, d * y, &cfg()).unwrap().value;
        assert!(((pd - d.powf(-s.upper_dim()) * p) / p).abs() < 1e-9);
        let q = integrate_halfline_scaled(|y| poisson_kernel(&s, 0.1, 1.0, y, &cfg()).unwrap().value * s.density(y), 1.0, &cfg())
            .unwrap();
        assert!((q.value - 1.0).abs() < 1e-6, "{}", q.value);
    }

    #[test]
    fn theta_integral_matches_tanh_sinh_in_theta() {
        // λ = 1, x = 1, y = 2, t = 0: ∫ sin θ / (5 − 4 cos θ)² dθ
        let l = 1.0;
        let direct = |th: f64| th.sin().powf(2.0 * l - 1.0) / (5.0 - 4.0 * th.cos()).powf(l + 1.0);
        let ts = integrate_tanh_sinh(direct, 0.0, std::f64::consts::PI, &cfg()).value;
        let sub = theta_integral(l, 1.0, 0.0, 1.0, 4.0, &cfg()).value;
        assert!((ts - sub).abs() < 1e-9);
        // non-integer λ: the substituted form against plain tanh-sinh in θ
        let l = 0.3;
        let direct = |th: f64| th.sin().powf(2.0 * l - 1.0) / (1.3 - 1.2 * th.cos()).powf(l + 1.0);
        let ts = integrate_tanh_sinh(direct, 0.0, std::f64::consts::PI, &cfg()).value;
        let sub = theta_integral(l, 1.0, 0.0, 0.1, 1.2, &cfg()).value;
        assert!(((ts - sub) / sub).abs() < 1e-9, "{ts} {sub}");
    }

    #[test]
    fn conj_poisson_decay_limit_and_sign() {
        let s = sp(1.0);
        let c = cfg();
        let mut last = f64::INFINITY;
        for t in [4.0, 8.0, 16.0, 32.0, 64.0] {
            let v = conj_poisson_kernel(&s, t, 1.0, 2.0, &c).unwrap().value.abs();
            assert!(v < last);
            last = v;
        }
        let r = riesz_kernel(&s, 1.0, 2.0, &c).unwrap().value;
        let mut prev = f64::INFINITY;
        for t in [1e-1, 1e-2, 1e-3, 1e-4] {
            let gap = (conj_poisson_kernel(&s, t, 1.0, 2.0, &c).unwrap().value - r).abs();
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 1e-6);
        assert!(conj_poisson_kernel(&s, 0.01, 10.0, 0.1, &c).unwrap().value < 0.0);
    }

    #[test]
    fn riesz_refuses_diagonal_and_is_homogeneous() {
        let s = sp(1.0);
        assert!(matches!(riesz_kernel(&s, 1.0, 1.0, &cfg()), Err(Error::Diagonal { .. })));
        let r = riesz_kernel(&s, 1.0, 2.0, &cfg()).unwrap().value;
        let r5 = riesz_kernel(&s, 5.0, 10.0, &cfg()).unwrap().value;
        assert!(((r5 - 5f64.powf(-3.0) * r) / r).abs() < 1e-9);
        assert!(riesz_kernel(&s, 1.0, 1.5, &cfg()).unwrap().value > 0.0);
        assert!(riesz_kernel(&s, 1.0, 0.5, &cfg()).unwrap().value < 0.0);
    }

    #[test]
    fn frac_kernel_homogeneity() {
        let s = sp(1.0);
        let (a, x, y, d) = (0.5, 1.0, 2.0, 2.0);
        let k = frac_kernel(&s, a, x, y, &cfg()).unwrap().value;
        let kd = frac_kernel(&s, a, d * x, d * y, &cfg()).unwrap().value;
        assert!(((kd - d.powf(a - s.upper_dim()) * k) / k).abs() < 1e-8);
    }

    #[test]
    fn frac_kernel_stable_under_panel_shift() {
        // the same integral split at a different dyadic origin
        let s = sp(1.0);
        let (a, x, y) = (0.5, 1.0, 1.3);
        let d2 = (x - y) * (x - y);
        let k = frac_kernel(&s, a, x, y, &cfg()).unwrap().value;
        let f = |t: f64| heat_kernel(&s, t, x, y).unwrap() * t.powf(0.5 * a - 1.0);
        let alt = integrate_halfline_scaled(f, 0.37 * d2, &cfg()).unwrap().value / log_gamma(a).exp();
        assert!(((k - alt) / k).abs() < 1e-8, "{k} {alt}");
    }

    #[test]
    fn frac_kernel_symmetric() {
        let s = sp(2.0);
        let a = frac_kernel(&s, 0.25, 0.7, 3.0, &cfg()).unwrap().value;
        let b = frac_kernel(&s, 0.25, 3.0, 0.7, &cfg()).unwrap().value;
        assert!(((a - b) / a).abs() < 1e-10);
    }
}
