//! One-dimensional quadrature: globally adaptive Gauss–Kronrod on finite
//! intervals, dyadic panels on the half line, principal values by symmetric
//! excision with extrapolation in the excision radius, and an independent
//! tanh-sinh rule used as a cross-check.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Maximum bisection depth of any subinterval.
    pub max_depth: u32,
    /// Excision radii for principal values, as fractions of the symmetric
    /// window half-width. Strictly decreasing.
    pub pv_eps_sequence: Vec<f64>,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-11,
            max_depth: 60,
            pv_eps_sequence: vec![0.1, 0.05, 0.025, 0.0125, 0.00625, 0.003125],
        }
    }
}

impl QuadConfig {
    pub fn with_tol(abs_tol: f64, rel_tol: f64) -> Self {
        Self { abs_tol, rel_tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::InvalidArgument("max_depth must be positive".into()));
        }
        let s = &self.pv_eps_sequence;
        if s.len() < 2 || s.iter().any(|&e| !(e > 0.0 && e < 1.0)) || s.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::InvalidArgument(
                "pv_eps_sequence must hold at least two strictly decreasing values in (0, 1)".into(),
            ));
        }
        Ok(())
    }

    fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

/// Integral value with its error estimate. `converged == false` marks a
/// partial result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

impl Quad {
    pub fn exact(value: f64) -> Self {
        Self { value, error: 0.0, converged: true }
    }

    /// `Ok(value)` if converged, else [`Error::NoConvergence`].
    pub fn ok(self) -> Result<f64> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(Error::NoConvergence { value: self.value, error: self.error })
        }
    }

    /// Sum of two results; converged iff both are.
    pub fn add(self, other: Quad) -> Quad {
        Quad {
            value: self.value + other.value,
            error: self.error + other.error,
            converged: self.converged && other.converged,
        }
    }

    pub fn scale(self, c: f64) -> Quad {
        Quad { value: self.value * c, error: self.error * c.abs(), converged: self.converged }
    }
}

// ============================================================================
// Gauss–Kronrod 7/15
// ============================================================================

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// One GK15 panel: (Kronrod value, error estimate), with the QUADPACK
/// scaling of |Kronrod − Gauss|.
fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    let mut resabs = k.abs();
    for j in 0..7 {
        let dx = h * XGK[j];
        let (f1, f2) = (f(c - dx), f(c + dx));
        fv1[j] = f1;
        fv2[j] = f2;
        k += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * k;
    let mut resasc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let hk = h.abs();
    let (k, resabs, resasc) = (k * h, resabs * hk, resasc * hk);
    let mut err = (k - g * h).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    if !err.is_finite() {
        err = f64::INFINITY;
    }
    (k, err)
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    depth: u32,
}

impl PartialEq for Segment {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Segment {
    fn cmp(&self, o: &Self) -> Ordering {
        self.error.total_cmp(&o.error)
    }
}

/// Upper bound on subintervals held by one adaptive call.
const MAX_SEGMENTS: usize = 4000;

/// Globally adaptive GK15 over `[a, b]`, optionally pre-split at `breaks`
/// (points outside `(a, b)` are ignored).
pub fn integrate_adaptive_with_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    cfg: &QuadConfig,
) -> Quad {
    if a == b {
        return Quad::exact(0.0);
    }
    if b < a {
        return integrate_adaptive_with_breaks(f, b, a, breaks, cfg).scale(-1.0);
    }
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&t| t > a && t < b).collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup();

    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in pts.windows(2) {
        let (v, e) = gk15(&mut f, w[0], w[1]);
        total += v;
        total_err += e;
        heap.push(Segment { a: w[0], b: w[1], value: v, error: e, depth: 0 });
    }
    let mut converged = true;
    while total_err > cfg.target(total) {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if worst.depth >= cfg.max_depth || heap.len() + 2 > MAX_SEGMENTS || !(mid > worst.a && mid < worst.b) {
            heap.push(worst);
            converged = false;
            break;
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid);
        let (v2, e2) = gk15(&mut f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment { a: worst.a, b: mid, value: v1, error: e1, depth: worst.depth + 1 });
        heap.push(Segment { a: mid, b: worst.b, value: v2, error: e2, depth: worst.depth + 1 });
        // refresh sums now and then to stop drift
        if heap.len() % 256 == 0 {
            total = heap.iter().map(|s| s.value).sum();
            total_err = heap.iter().map(|s| s.error).sum();
        }
    }
    let value: f64 = heap.iter().map(|s| s.value).sum();
    let error: f64 = heap.iter().map(|s| s.error).sum();
    if !value.is_finite() || !error.is_finite() {
        converged = false;
    }
    Quad { value, error, converged: converged && error <= cfg.target(value) }
}

/// `∫_a^b f`; integrable endpoint singularities are fine.
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadConfig) -> Quad {
    integrate_adaptive_with_breaks(f, a, b, &[], cfg)
}

// ============================================================================
// Half line
// ============================================================================

/// Panel count after which a non-decaying integrand is reported.
const MAX_PANELS: usize = 400;

/// `∫_0^∞ f` with the natural scale 1.
pub fn integrate_halfline<F: FnMut(f64) -> f64>(f: F, cfg: &QuadConfig) -> Result<Quad> {
    integrate_halfline_scaled(f, 1.0, cfg)
}

/// `∫_0^∞ f` by dyadic panels `[s 2^j, s 2^{j+1}]` running up from `s` and
/// down towards 0. Each direction stops once a geometric tail estimate from
/// the last panel ratios is under tolerance; the estimated tails are added to
/// the value. Errors with [`Error::SlowDecay`] if the panels stop shrinking.
pub fn integrate_halfline_scaled<F: FnMut(f64) -> f64>(mut f: F, scale: f64, cfg: &QuadConfig) -> Result<Quad> {
    let up = dyadic_panels(&mut f, scale, 2.0, cfg)?;
    let down = dyadic_panels(&mut f, scale, 0.5, cfg)?;
    Ok(up.add(down))
}

fn dyadic_panels<F: FnMut(f64) -> f64>(f: &mut F, start: f64, factor: f64, cfg: &QuadConfig) -> Result<Quad> {
    let mut acc = Quad::exact(0.0);
    let mut prev_abs = f64::NAN;
    let mut prev_rho = f64::NAN;
    let mut lo = start;
    for j in 0..MAX_PANELS {
        let hi = lo * factor;
        let p = integrate_adaptive(&mut *f, lo.min(hi), lo.max(hi), cfg);
        acc = acc.add(p);
        lo = hi;
        let a = p.value.abs();
        if a == 0.0 && j >= 2 {
            return Ok(acc);
        }
        if j >= 2 && prev_abs > 0.0 {
            let rho = a / prev_abs;
            if rho < 0.99 {
                let tail = a * rho / (1.0 - rho);
                // a pure power law or exponential has a constant ratio, so the
                // ratio drift bounds the tail error
                let drift = if prev_rho.is_finite() { (rho - prev_rho).abs() } else { 1.0 };
                let tail_err = tail * (100.0 * drift / (1.0 - rho)).min(1.0);
                let target = 0.1 * cfg.target(acc.value);
                // the tail is only extrapolated once it is small, since a later
                // regime change would invalidate the ratio
                let small = tail <= target || tail <= 1e-4 * acc.value.abs();
                if tail_err <= target && small {
                    acc.value += p.value.signum() * tail;
                    acc.error += tail_err;
                    return Ok(acc);
                }
            }
            prev_rho = rho;
        }
        prev_abs = a;
    }
    Err(Error::SlowDecay { value: acc.value, tail: prev_abs })
}

// ============================================================================
// Principal values
// ============================================================================

/// PV result: value extrapolated to zero excision, the extrapolation residual,
/// and the raw excised values.
#[derive(Debug, Clone, PartialEq)]
pub struct PvQuad {
    pub value: f64,
    pub residual: f64,
    pub error: f64,
    pub excised: Vec<f64>,
}

/// Neville extrapolation of `(x_i, y_i)` to `x = 0`; returns the last two
/// diagonal entries.
fn neville_at_zero(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let mut p = ys.to_vec();
    let mut diag = vec![p[n - 1]];
    for m in 1..n {
        for i in 0..n - m {
            p[i] = (xs[i + m] * p[i] - xs[i] * p[i + 1]) / (xs[i + m] - xs[i]);
        }
        diag.push(p[n - m - 1]);
    }
    let k = diag.len();
    (diag[k - 1], diag[k - 2])
}

/// `PV ∫_a^b f` around `s ∈ (a, b)`.
///
/// With `w = min(s − a, b − s)`, the symmetric window `(s − w, s + w)` is
/// folded to `∫_{ε w}^{w} [f(s+u) + f(s−u)] du` for each `ε` in
/// `cfg.pv_eps_sequence`, and the excised values are extrapolated to `ε = 0`
/// by Neville's scheme. The rest of `(a, b)` is integrated
/// directly. Errors with [`Error::PvDivergent`] when the excised values
/// do not settle.
pub fn integrate_pv<F: Fn(f64) -> f64>(f: F, s: f64, a: f64, b: f64, cfg: &QuadConfig) -> Result<PvQuad> {
    integrate_pv_with_breaks(f, s, a, b, &[], cfg)
}

pub fn integrate_pv_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    s: f64,
    a: f64,
    b: f64,
    breaks: &[f64],
    cfg: &QuadConfig,
) -> Result<PvQuad> {
    cfg.validate()?;
    if !(a < s && s < b) {
        return Err(Error::InvalidArgument(format!("singular point {s} not inside ({a}, {b})")));
    }
    let w = (s - a).min(b - s);
    let mut outer = Quad::exact(0.0);
    if s - w > a {
        outer = outer.add(integrate_adaptive_with_breaks(&f, a, s - w, breaks, cfg));
    }
    if s + w < b {
        outer = outer.add(integrate_adaptive_with_breaks(&f, s + w, b, breaks, cfg));
    }
    let folded = |u: f64| f(s + u) + f(s - u);
    let eps: Vec<f64> = cfg.pv_eps_sequence.iter().map(|e| e * w).collect();
    let fold_breaks: Vec<f64> = breaks.iter().map(|t| (t - s).abs()).filter(|&u| u > 0.0 && u < w).collect();

    // ∫_{eps_i}^{w} as a running sum of ∫_{eps_i}^{eps_{i-1}}
    let mut excised = Vec::with_capacity(eps.len());
    let mut qerr = outer.error;
    let first = integrate_adaptive_with_breaks(&folded, eps[0], w, &fold_breaks, cfg);
    if !first.converged {
        return Err(Error::NoConvergence { value: first.value + outer.value, error: first.error });
    }
    qerr += first.error;
    let mut running = first.value;
    excised.push(running + outer.value);
    for i in 1..eps.len() {
        let piece = integrate_adaptive_with_breaks(&folded, eps[i], eps[i - 1], &fold_breaks, cfg);
        if !piece.converged {
            return Err(Error::NoConvergence { value: running + outer.value, error: piece.error });
        }
        qerr += piece.error;
        running += piece.value;
        excised.push(running + outer.value);
    }

    let n = excised.len();
    let tol = cfg.target(excised[n - 1]) + qerr;
    let d_first = (excised[1] - excised[0]).abs();
    let d_last = (excised[n - 1] - excised[n - 2]).abs();
    if d_last > 0.5 * d_first && d_last > 10.0 * tol {
        return Err(Error::PvDivergent { value: excised[n - 1], residual: d_last });
    }
    let m = n;
    let (v, v_prev) = neville_at_zero(&eps[n - m..], &excised[n - m..]);
    let residual = (v - v_prev).abs();
    Ok(PvQuad { value: v, residual, error: residual + qerr, excised })
}

// ============================================================================
// Tanh-sinh
// ============================================================================

/// Double-exponential rule on `[a, b]`, halving the step until two levels
/// agree to `cfg` tolerance. Independent of the Gauss–Kronrod path; used as
/// a cross-check.
pub fn integrate_tanh_sinh<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, cfg: &QuadConfig) -> Quad {
    let half = 0.5 * (b - a);
    let hpi = std::f64::consts::FRAC_PI_2;
    // abscissa offsets from the endpoints are kept separately so points next to
    // a or b do not round onto them
    let mut eval = |t: f64| -> f64 {
        let s = hpi * t.sinh();
        let ch = s.cosh();
        let w = hpi * t.cosh() / (ch * ch);
        let d = half / (s.exp() * ch); // = half (1 - tanh s)
        let x_hi = b - d;
        let x_lo = a + d;
        let mut v = 0.0;
        if x_hi > a && x_hi < b && w > 0.0 {
            v += w * f(x_hi);
        }
        if t != 0.0 && x_lo > a && x_lo < b && w > 0.0 {
            v += w * f(x_lo);
        }
        v
    };
    let tmax = 6.5;
    let mut h = 1.0;
    let mut sum = eval(0.0);
    let mut k = 1.0;
    while k * h <= tmax {
        sum += eval(k * h);
        k += 1.0;
    }
    let mut est = half * h * sum;
    for _level in 0..12 {
        h *= 0.5;
        let mut k = 1.0;
        while k * h <= tmax {
            sum += eval(k * h);
            k += 2.0;
        }
        let next = half * h * sum;
        let diff = (next - est).abs();
        est = next;
        if diff <= cfg.target(est) {
            return Quad { value: est, error: diff, converged: true };
        }
    }
    Quad { value: est, error: f64::NAN, converged: false }
}
