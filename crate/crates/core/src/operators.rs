//! Kernels applied to functions: semigroups, the Riesz transform as a
//! principal value, the fractional integral, commutators with a symbol `b`,
//! and the maximal operators `M`, `M_t`, `I^γ_λ` and `h_β`.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use crate::kernels::{
    conj_poisson_kernel, frac_kernel, heat_kernel, poisson_kernel, riesz_kernel, riesz_kernel_unguarded, KernelKind,
    KernelSpec,
};
use crate::measure_space::{
    measure_interval, GridFunction, GridIntegrator, Interval, IntervalLadder, MeasureSpace,
};
use crate::quadrature::{
    integrate_adaptive_with_breaks, integrate_halfline_scaled, integrate_pv_with_breaks, Quad, QuadConfig,
};
use crate::{Error, Result};

/// Breakpoints kept from a grid function's nodes.
const MAX_BREAKS: usize = 64;

/// A compactly supported function with known kinks.
pub trait SupportedFn: Sync {
    fn eval(&self, x: f64) -> f64;
    fn support(&self) -> (f64, f64);
    fn breaks(&self) -> Vec<f64> {
        Vec::new()
    }
    /// Kinks inside `(a, b)`; at most `max`, or none if there are more.
    fn breaks_in(&self, a: f64, b: f64, max: usize) -> Vec<f64> {
        let v: Vec<f64> = self.breaks().into_iter().filter(|&t| t > a && t < b).collect();
        if v.len() > max {
            Vec::new()
        } else {
            v
        }
    }
}

impl SupportedFn for GridFunction {
    fn eval(&self, x: f64) -> f64 {
        GridFunction::eval(self, x)
    }

    fn support(&self) -> (f64, f64) {
        GridFunction::support(self)
    }

    fn breaks(&self) -> Vec<f64> {
        let n = self.nodes();
        let stride = n.len().div_ceil(MAX_BREAKS).max(1);
        n.iter().step_by(stride).copied().collect()
    }

    fn breaks_in(&self, a: f64, b: f64, max: usize) -> Vec<f64> {
        let n = self.nodes();
        let (i, j) = (n.partition_point(|&t| t <= a), n.partition_point(|&t| t < b));
        if j.saturating_sub(i) > max {
            Vec::new()
        } else {
            n[i..j].to_vec()
        }
    }
}

/// A closure restricted to `[lo, hi]`.
pub struct Supported<F> {
    pub f: F,
    pub lo: f64,
    pub hi: f64,
    pub breaks: Vec<f64>,
}

impl<F: Fn(f64) -> f64 + Sync> Supported<F> {
    pub fn new(f: F, lo: f64, hi: f64) -> Self {
        Self { f, lo, hi, breaks: Vec::new() }
    }
}

impl<F: Fn(f64) -> f64 + Sync> SupportedFn for Supported<F> {
    fn eval(&self, x: f64) -> f64 {
        if x < self.lo || x > self.hi {
            0.0
        } else {
            (self.f)(x)
        }
    }

    fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn breaks(&self) -> Vec<f64> {
        self.breaks.clone()
    }
}

/// Holds the first error raised inside an integrand.
struct ErrSlot(RefCell<Option<Error>>);

impl ErrSlot {
    fn new() -> Self {
        Self(RefCell::new(None))
    }

    fn take(&self, r: Result<f64>) -> f64 {
        match r {
            Ok(v) => v,
            Err(e) => {
                self.0.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    }

    fn check(self) -> Result<()> {
        match self.0.into_inner() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

/// `∫_lo^hi g(y, |y − x|) dy` split at `x`, with `|y − x| = v^p` on both
/// sides so that an integrable `|y − x|^{1/p − 1}` singularity becomes
/// bounded. The offset is passed exactly; `x − y` rounds to `ulp(x)`.
fn graded_split<G: FnMut(f64, f64) -> f64>(mut g: G, x: f64, lo: f64, hi: f64, breaks: &[f64], p: f64, cfg: &QuadConfig) -> Quad {
    if !(x > lo && x < hi) {
        return integrate_adaptive_with_breaks(|y| g(y, (y - x).abs()), lo, hi, breaks, cfg);
    }
    let ip = 1.0 / p;
    let left_breaks: Vec<f64> = breaks.iter().filter(|&&b| b > lo && b < x).map(|b| (x - b).powf(ip)).collect();
    let right_breaks: Vec<f64> = breaks.iter().filter(|&&b| b > x && b < hi).map(|b| (b - x).powf(ip)).collect();
    let left = integrate_adaptive_with_breaks(
        |v: f64| {
            let u = v.powf(p);
            g(x - u, u) * p * v.powf(p - 1.0)
        },
        0.0,
        (x - lo).powf(ip),
        &left_breaks,
        cfg,
    );
    let right = integrate_adaptive_with_breaks(
        |v: f64| {
            let u = v.powf(p);
            g(x + u, u) * p * v.powf(p - 1.0)
        },
        0.0,
        (hi - x).powf(ip),
        &right_breaks,
        cfg,
    );
    left.add(right)
}

fn kernel_scale_breaks(x: f64, scale: f64, lo: f64, hi: f64, mut breaks: Vec<f64>) -> Vec<f64> {
    for k in [0.25, 1.0, 4.0, 16.0] {
        for b in [x - k * scale, x + k * scale] {
            if b > lo && b < hi {
                breaks.push(b);
            }
        }
    }
    if x > lo && x < hi {
        breaks.push(x);
    }
    breaks
}

// ============================================================================
// Semigroups
// ============================================================================

/// `∫ K(x, y) f(y) dm_λ(y)` for a heat, Poisson or conjugate Poisson kernel.
pub fn apply_semigroup(spec: &KernelSpec, f: &dyn SupportedFn, x: f64) -> Result<Quad> {
    let (lo, hi) = f.support();
    let s = spec.space;
    let scale = match spec.kind {
        KernelKind::Heat { t } => t.sqrt(),
        KernelKind::Poisson { t } | KernelKind::ConjPoisson { t } => t,
        _ => {
            return Err(Error::InvalidArgument(
                "apply_semigroup takes heat, poisson or conj_poisson kernels".into(),
            ))
        }
    };
    let breaks = kernel_scale_breaks(x, scale, lo, hi, f.breaks());
    let slot = ErrSlot::new();
    let q = integrate_adaptive_with_breaks(
        |y: f64| {
            let fy = f.eval(y);
            if fy == 0.0 {
                return 0.0;
            }
            slot.take(spec.eval(x, y).map(|k| k.value)) * fy * s.density(y)
        },
        lo,
        hi,
        &breaks,
        &spec.quad,
    );
    slot.check()?;
    q.ok()?;
    Ok(q)
}

/// `∫_0^∞ K(x, y) g(y) dm_λ(y)` for a heat or Poisson kernel and a `g` that
/// need not be compactly supported.
pub fn apply_semigroup_halfline(spec: &KernelSpec, g: &dyn Fn(f64) -> Result<f64>, x: f64) -> Result<Quad> {
    let s = spec.space;
    let slot = ErrSlot::new();
    let kern = |y: f64| -> Result<f64> {
        match spec.kind {
            KernelKind::Heat { t } => heat_kernel(&s, t, x, y),
            KernelKind::Poisson { t } => Ok(poisson_kernel(&s, t, x, y, &spec.quad)?.value),
            KernelKind::ConjPoisson { t } => Ok(conj_poisson_kernel(&s, t, x, y, &spec.quad)?.value),
            _ => Err(Error::InvalidArgument("halfline application needs a semigroup kernel".into())),
        }
    };
    let q = integrate_halfline_scaled(
        |y: f64| {
            let k = slot.take(kern(y));
            if k == 0.0 {
                return 0.0;
            }
            k * slot.take(g(y)) * s.density(y)
        },
        x,
        &spec.quad,
    )?;
    slot.check()?;
    Ok(q)
}

// ============================================================================
// Riesz transform
// ============================================================================

/// Distance (relative to `x`) from `supp f` beyond which no principal value
/// is taken.
const PV_MARGIN: f64 = 0.05;

/// `R f(x)`: principal value when `x` is in or near `supp f`, plain
/// quadrature otherwise.
pub fn apply_riesz(space: &MeasureSpace, f: &dyn SupportedFn, x: f64, cfg: &QuadConfig) -> Result<Quad> {
    let (lo, hi) = f.support();
    let slot = ErrSlot::new();
    let dist = if x < lo { lo - x } else if x > hi { x - hi } else { 0.0 };
    if dist > PV_MARGIN * x {
        let q = integrate_adaptive_with_breaks(
            |y: f64| slot.take(riesz_kernel(space, x, y, cfg).map(|k| k.value)) * f.eval(y) * space.density(y),
            lo,
            hi,
            &f.breaks(),
            cfg,
        );
        slot.check()?;
        q.ok()?;
        return Ok(q);
    }
    let a = lo.min(0.5 * x);
    let b = hi.max(1.5 * x);
    let mut breaks = f.breaks();
    breaks.extend([lo, hi]);
    let pv = integrate_pv_with_breaks(
        |y: f64| {
            let fy = f.eval(y);
            if fy == 0.0 {
                return 0.0;
            }
            slot.take(riesz_kernel(space, x, y, cfg).map(|k| k.value)) * fy * space.density(y)
        },
        x,
        a,
        b,
        &breaks,
        cfg,
    )?;
    slot.check()?;
    Ok(Quad { value: pv.value, error: pv.error, converged: true })
}

/// `∫ Q_t(x, y) f(y) dm_λ(y)`, which tends to `R f(x)` as `t → 0`.
pub fn apply_conj_poisson(space: &MeasureSpace, t: f64, f: &dyn SupportedFn, x: f64, cfg: &QuadConfig) -> Result<Quad> {
    let spec = KernelSpec::new(KernelKind::ConjPoisson { t }, *space, cfg.clone())?;
    apply_semigroup(&spec, f, x)
}

// ============================================================================
// Fractional integral
// ============================================================================

/// `Δ_λ^{-α/2} f(x) = ∫ K^α(x, y) f(y) dm_λ(y)`.
pub fn apply_frac(space: &MeasureSpace, alpha: f64, f: &dyn SupportedFn, x: f64, cfg: &QuadConfig) -> Result<Quad> {
    let (lo, hi) = f.support();
    let slot = ErrSlot::new();
    let p = if alpha < 1.0 { 1.0 / alpha } else { 1.0 };
    let q = graded_split(
        |y: f64, _: f64| {
            let fy = f.eval(y);
            if fy == 0.0 || y == x {
                return 0.0;
            }
            slot.take(frac_kernel(space, alpha, x, y, cfg).map(|k| k.value)) * fy * space.density(y)
        },
        x,
        lo,
        hi,
        &f.breaks(),
        p,
        cfg,
    );
    slot.check()?;
    q.ok()?;
    Ok(q)
}

// ============================================================================
// Commutators
// ============================================================================

/// `[b, T] f(x) = ∫ (b(x) − b(y)) K(x, y) f(y) dm_λ(y)` for `T` the Riesz
/// transform or the fractional integral. The factor `b(x) − b(y)` cancels
/// the diagonal singularity, so no principal value is taken.
pub fn commutator(spec: &KernelSpec, b: &(dyn Fn(f64) -> f64 + Sync), f: &dyn SupportedFn, x: f64) -> Result<Quad> {
    let (lo, hi) = f.support();
    let s = spec.space;
    let bx = b(x);
    let slot = ErrSlot::new();
    let kern = |y: f64| -> Result<f64> {
        match spec.kind {
            KernelKind::Riesz => Ok(riesz_kernel_unguarded(&s, x, y, &spec.quad)?.value),
            KernelKind::Fractional { alpha } => {
                if y == x {
                    Ok(0.0)
                } else {
                    Ok(frac_kernel(&s, alpha, x, y, &spec.quad)?.value)
                }
            }
            _ => Ok(spec.eval(x, y)?.value),
        }
    };
    let q = graded_split(
        |y: f64, _: f64| {
            let fy = f.eval(y);
            let db = bx - b(y);
            if fy == 0.0 || db == 0.0 {
                return 0.0;
            }
            db * slot.take(kern(y)) * fy * s.density(y)
        },
        x,
        lo,
        hi,
        &f.breaks(),
        2.0,
        &spec.quad,
    );
    slot.check()?;
    q.ok()?;
    Ok(q)
}

/// `b(x) T f(x) − T(b f)(x)`, each term computed on its own.
pub fn commutator_two_path(
    spec: &KernelSpec,
    b: &(dyn Fn(f64) -> f64 + Sync),
    f: &dyn SupportedFn,
    x: f64,
) -> Result<Quad> {
    let (lo, hi) = f.support();
    let bf = Supported { f: |y: f64| b(y) * f.eval(y), lo, hi, breaks: f.breaks() };
    let apply = |g: &dyn SupportedFn| -> Result<Quad> {
        match spec.kind {
            KernelKind::Riesz => apply_riesz(&spec.space, g, x, &spec.quad),
            KernelKind::Fractional { alpha } => apply_frac(&spec.space, alpha, g, x, &spec.quad),
            _ => apply_semigroup(spec, g, x),
        }
    };
    let t1 = apply(f)?.scale(b(x));
    let t2 = apply(&bf)?;
    Ok(t1.add(t2.scale(-1.0)))
}

// ============================================================================
// Maximal operators
// ============================================================================

/// A sup over a quantized interval family and the interval attaining it
/// (`None` for the `r → 0` limit).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupValue {
    pub value: f64,
    pub witness: Option<Interval>,
}

/// `M f(x) = sup_{I ∋ x} m_λ(I)^{-1} ∫_I |f| dm_λ` over the ladder. The
/// `r → 0` limit `|f(x)|` is included.
pub fn hl_maximal(space: &MeasureSpace, f: &GridFunction, x: f64, ladder: &IntervalLadder) -> SupValue {
    let gi = GridIntegrator::new(space, f);
    hl_maximal_with(&gi, x, ladder)
}

/// [`hl_maximal`] reusing a prepared integrator.
pub fn hl_maximal_with(gi: &GridIntegrator, x: f64, ladder: &IntervalLadder) -> SupValue {
    let mut best = SupValue { value: gi.function().eval(x).abs(), witness: None };
    for iv in ladder.containing(x) {
        let avg = gi.integral_abs(iv.left(), iv.right()) / measure_interval(gi.space(), &iv);
        if avg > best.value {
            best = SupValue { value: avg, witness: Some(iv) };
        }
    }
    best
}

/// `M_t f = (M(|f|^t))^{1/t}`, `t >= 1`.
pub fn hl_maximal_t(space: &MeasureSpace, f: &GridFunction, t: f64, x: f64, ladder: &IntervalLadder) -> Result<SupValue> {
    if !(t >= 1.0) {
        return Err(Error::InvalidArgument(format!("M_t needs t >= 1, got {t}")));
    }
    let ft = f.map(|_, v| v.abs().powf(t));
    let m = hl_maximal(space, &ft, x, ladder);
    Ok(SupValue { value: m.value.powf(1.0 / t), witness: m.witness })
}

/// `I^γ_λ f(x) = ∫ f(u) m_λ(I(x, |x − u|))^{γ − 1} dm_λ(u)`, `0 < γ < 1`.
pub fn frac_integral_igamma(
    space: &MeasureSpace,
    f: &dyn SupportedFn,
    gamma: f64,
    x: f64,
    cfg: &QuadConfig,
) -> Result<Quad> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidArgument(format!("I^gamma needs 0 < gamma < 1, got {gamma}")));
    }
    let (lo, hi) = f.support();
    let q = graded_split(
        |u: f64, d: f64| {
            let fu = f.eval(u);
            if fu == 0.0 || d == 0.0 {
                return 0.0;
            }
            let m = space.measure_ball(x, d);
            fu * m.powf(gamma - 1.0) * space.density(u)
        },
        x,
        lo,
        hi,
        &f.breaks(),
        1.0 / gamma,
        cfg,
    );
    q.ok()?;
    Ok(q)
}

/// Value of `h_β(x)` and whether it grew without bound under refinement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HBeta {
    pub value: f64,
    pub witness: Option<Interval>,
    pub divergent: bool,
}

/// Growth factor under ladder refinement that counts as divergence.
pub const DIVERGENCE_FACTOR: f64 = 2.0;

fn h_beta_sup(
    space: &MeasureSpace,
    family: &dyn Fn(&Interval) -> f64,
    beta: f64,
    x: f64,
    ladder: &IntervalLadder,
) -> SupValue {
    let expo = 1.0 + beta / space.upper_dim();
    let mut best = SupValue { value: 0.0, witness: None };
    for iv in ladder.containing(x) {
        let v = family(&iv) / measure_interval(space, &iv).powf(expo);
        if v > best.value {
            best = SupValue { value: v, witness: Some(iv) };
        }
    }
    best
}

/// `h_β(x) = sup_{I ∋ x} m_λ(I)^{-1-β/Q} ∫_I |h^I| dm_λ`, where
/// `family(I)` returns `∫_I |h^I| dm_λ`. The sup is recomputed on the
/// refined ladder; growth by more than [`DIVERGENCE_FACTOR`] is reported as
/// `+∞` with `divergent = true`.
pub fn h_beta_maximal(
    space: &MeasureSpace,
    family: &dyn Fn(&Interval) -> f64,
    beta: f64,
    x: f64,
    ladder: &IntervalLadder,
) -> Result<HBeta> {
    if !(beta >= 0.0) {
        return Err(Error::InvalidArgument(format!("h_beta needs beta >= 0, got {beta}")));
    }
    let coarse = h_beta_sup(space, family, beta, x, ladder);
    let fine = h_beta_sup(space, family, beta, x, &ladder.refined());
    if fine.value > DIVERGENCE_FACTOR * coarse.value && fine.value > 0.0 {
        return Ok(HBeta { value: f64::INFINITY, witness: fine.witness, divergent: true });
    }
    let best = if fine.value > coarse.value { fine } else { coarse };
    Ok(HBeta { value: best.value, witness: best.witness, divergent: false })
}

/// `∫_I |g − g_I| dm_λ`: the local-oscillation family `h^I = (g − g_I) χ_I`.
pub fn oscillation_family<'a>(gi: &'a GridIntegrator<'a>) -> impl Fn(&Interval) -> f64 + 'a {
    move |iv: &Interval| {
        let m = measure_interval(gi.space(), iv);
        let c = gi.integral(iv.left(), iv.right()) / m;
        gi.abs_dev(iv.left(), iv.right(), c, 1.0)
    }
}

/// Evaluates `op` at each point in parallel; output order follows `xs`.
pub fn apply_on_points<F>(xs: &[f64], op: F) -> Vec<Result<Quad>>
where
    F: Fn(f64) -> Result<Quad> + Sync,
{
    use rayon::prelude::*;
    xs.par_iter().map(|&x| op(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure_space::{make_log_grid, Interp};

    fn sp(l: f64) -> MeasureSpace {
        MeasureSpace::new(l).unwrap()
    }

    fn cfg() -> QuadConfig {
        QuadConfig::with_tol(1e-12, 1e-9)
    }

    fn bump(c: f64, r: f64) -> Supported<impl Fn(f64) -> f64 + Sync> {
        Supported::new(
            move |y: f64| {
                let u = (y - c) / r;
                (1.0 - u * u).max(0.0).powi(3)
            },
            c - r,
            c + r,
        )
    }

    #[test]
    fn heat_semigroup_positive_and_contractive() {
        let s = sp(1.0);
        let spec = KernelSpec::new(KernelKind::Heat { t: 0.2 }, s, cfg()).unwrap();
        let f = bump(1.5, 0.5);
        for x in [0.2, 1.0, 1.5, 3.0] {
            let v = apply_semigroup(&spec, &f, x).unwrap().value;
            assert!(v >= 0.0 && v <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn riesz_far_from_support_matches_plain_quadrature() {
        let s = sp(1.0);
        let c = cfg();
        let f = bump(3.0, 0.5);
        let x = 1.0;
        let v = apply_riesz(&s, &f, x, &c).unwrap().value;
        let plain = integrate_adaptive_with_breaks(
            |y| riesz_kernel(&s, x, y, &c).unwrap().value * f.eval(y) * s.density(y),
            2.5,
            3.5,
            &[],
            &c,
        )
        .value;
        assert!((v - plain).abs() < 1e-10 * plain.abs());
    }

    #[test]
    fn riesz_linear() {
        let s = sp(0.5);
        let c = cfg();
        let f = bump(1.0, 0.5);
        let g = bump(1.2, 0.3);
        let h = Supported::new(|y: f64| 2.0 * f.eval(y) - 3.0 * g.eval(y), 0.5, 1.5);
        for x in [0.8, 1.0, 1.1] {
            let a = apply_riesz(&s, &f, x, &c).unwrap();
            let b = apply_riesz(&s, &g, x, &c).unwrap();
            let hv = apply_riesz(&s, &h, x, &c).unwrap();
            let tol = 2.0 * (2.0 * a.error + 3.0 * b.error + hv.error) + 1e-9;
            assert!((hv.value - (2.0 * a.value - 3.0 * b.value)).abs() < tol);
        }
    }

    #[test]
    fn commutator_constant_symbol_vanishes() {
        let s = sp(1.0);
        let spec = KernelSpec::new(KernelKind::Riesz, s, cfg()).unwrap();
        let f = bump(1.0, 0.5);
        let v = commutator(&spec, &|_| 2.5, &f, 1.1).unwrap().value;
        assert_eq!(v, 0.0);
    }

    #[test]
    fn fused_and_two_path_commutators_agree_off_support() {
        let s = sp(1.0);
        let spec = KernelSpec::new(KernelKind::Riesz, s, cfg()).unwrap();
        let f = bump(2.0, 0.5);
        let b = |y: f64| (0.7 * y).sin();
        let x = 1.0;
        let fused = commutator(&spec, &b, &f, x).unwrap();
        let two = commutator_two_path(&spec, &b, &f, x).unwrap();
        assert!((fused.value - two.value).abs() <= 3.0 * (fused.error + two.error) + 1e-9 * fused.value.abs());
    }

    #[test]
    fn maximal_of_constant_is_one() {
        let s = sp(1.0);
        let nodes = make_log_grid(1e-3, 1e3, 200).unwrap();
        let f = GridFunction::from_fn(nodes.clone(), Interp::Linear, |_| 1.0).unwrap();
        let lad = IntervalLadder::new(1e-2, 1.0, 2, make_log_grid(0.1, 10.0, 30).unwrap()).unwrap();
        let m = hl_maximal(&s, &f, 1.0, &lad);
        assert!((m.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn igamma_positive() {
        let s = sp(1.0);
        let f = bump(1.0, 0.5);
        for x in [0.3, 1.0, 1.2, 4.0] {
            assert!(frac_integral_igamma(&s, &f, 0.5, x, &cfg()).unwrap().value > 0.0);
        }
    }

    #[test]
    fn h_beta_trivial_families() {
        let s = sp(1.0);
        let lad = IntervalLadder::new(0.01, 1.0, 2, make_log_grid(0.5, 2.0, 10).unwrap()).unwrap();
        let one = |iv: &Interval| measure_interval(&s, iv);
        let v = h_beta_maximal(&s, &one, 0.0, 1.0, &lad).unwrap();
        assert!((v.value - 1.0).abs() < 1e-12 && !v.divergent);
        let zero = |_: &Interval| 0.0;
        assert_eq!(h_beta_maximal(&s, &zero, 0.5, 1.0, &lad).unwrap().value, 0.0);
    }
}
