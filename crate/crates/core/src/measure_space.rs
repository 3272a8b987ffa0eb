//! The space of homogeneous type `(ℝ₊, |·|, m_λ)` with `dm_λ = x^{2λ} dx`.
//!
//! Intervals, ball volumes, doubling diagnostics, sampled functions on
//! log-spaced grids and their integrals against `m_λ`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `b^p - a^p` for `0 <= a <= b`, without cancellation when `a ≈ b`.
pub fn pow_diff(a: f64, b: f64, p: f64) -> f64 {
    if a <= 0.0 {
        return b.powf(p);
    }
    if b <= a {
        return -pow_diff(b, a, p);
    }
    a.powf(p) * (p * ((b - a) / a).ln_1p()).exp_m1()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpace {
    lambda: f64,
    upper_dim: f64,
}

impl MeasureSpace {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self { lambda, upper_dim: 2.0 * lambda + 1.0 })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `Q = 2λ + 1`.
    pub fn upper_dim(&self) -> f64 {
        self.upper_dim
    }

    /// Density of `m_λ` at `x`.
    pub fn density(&self, x: f64) -> f64 {
        x.powf(2.0 * self.lambda)
    }

    /// `m_λ((a, b))` for `0 <= a <= b`.
    pub fn measure_between(&self, a: f64, b: f64) -> f64 {
        let a = a.max(0.0);
        let b = b.max(0.0);
        if b <= a {
            return 0.0;
        }
        pow_diff(a, b, self.upper_dim) / self.upper_dim
    }

    /// `m_λ(I(x, r))` from center and radius. Stays accurate when `r` is
    /// too small to survive in `x ± r`.
    pub fn measure_ball(&self, x: f64, r: f64) -> f64 {
        if !(r > 0.0) {
            return 0.0;
        }
        if r < 1e-4 * x {
            let t = r / x;
            let l = self.lambda;
            return 2.0 * r * self.density(x) * (1.0 + l * (2.0 * l - 1.0) * t * t / 3.0);
        }
        self.measure_between(x - r, x + r)
    }
}

/// `I(x, r) = (x - r, x + r) ∩ ℝ₊`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    center: f64,
    radius: f64,
}

impl Interval {
    pub fn new(center: f64, radius: f64) -> Result<Self> {
        if !(center > 0.0 && radius > 0.0) || !center.is_finite() || !radius.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "interval needs center > 0 and radius > 0, got ({center}, {radius})"
            )));
        }
        Ok(Self { center, radius })
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Left endpoint, clamped at 0.
    pub fn left(&self) -> f64 {
        (self.center - self.radius).max(0.0)
    }

    pub fn right(&self) -> f64 {
        self.center + self.radius
    }

    /// The concentric interval with radius scaled by `c`.
    pub fn dilate(&self, c: f64) -> Self {
        Self { center: self.center, radius: self.radius * c }
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.left() && x < self.right()
    }
}

/// From the endpoints, so that grid integrals over `[left, right]` of a
/// constant average to it exactly. [`MeasureSpace::measure_ball`] keeps tiny
/// radii accurate.
pub fn measure_interval(space: &MeasureSpace, iv: &Interval) -> f64 {
    space.measure_between(iv.left(), iv.right())
}

/// `m_λ(2I) / m_λ(I)`; at most `2^Q`, and at least 2 once `λ >= 1/2`.
pub fn doubling_ratio(space: &MeasureSpace, iv: &Interval) -> f64 {
    space.measure_ball(iv.center(), 2.0 * iv.radius()) / space.measure_ball(iv.center(), iv.radius())
}

/// `x^{2λ} r + r^Q`, comparable to `m_λ(I(x, r))`.
pub fn comparable_volume(space: &MeasureSpace, x: f64, r: f64) -> f64 {
    x.powf(2.0 * space.lambda()) * r + r.powf(space.upper_dim())
}

/// `n` geometrically spaced nodes from `xmin` to `xmax` inclusive.
pub fn make_log_grid(xmin: f64, xmax: f64, n: usize) -> Result<Vec<f64>> {
    if !(xmin > 0.0 && xmax > xmin) || n < 2 {
        return Err(Error::InvalidArgument(format!(
            "log grid needs 0 < xmin < xmax and n >= 2, got ({xmin}, {xmax}, {n})"
        )));
    }
    let ratio = (xmax / xmin).ln();
    let mut nodes: Vec<f64> = (0..n)
        .map(|i| xmin * (ratio * i as f64 / (n - 1) as f64).exp())
        .collect();
    nodes[n - 1] = xmax;
    Ok(nodes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interp {
    Linear,
    PiecewiseConstant,
}

/// A sampled function, zero outside `[nodes[0], nodes[n-1]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    nodes: Vec<f64>,
    values: Vec<f64>,
    interp: Interp,
}

impl GridFunction {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>, interp: Interp) -> Result<Self> {
        if nodes.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "{} nodes but {} values",
                nodes.len(),
                values.len()
            )));
        }
        if nodes.len() < 2 {
            return Err(Error::InvalidArgument("grid function needs at least 2 nodes".into()));
        }
        if !(nodes[0] > 0.0) {
            return Err(Error::InvalidArgument("grid nodes must be positive".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("grid nodes must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("grid values must be finite".into()));
        }
        Ok(Self { nodes, values, interp })
    }

    /// Samples `f` at `nodes`.
    pub fn from_fn(nodes: Vec<f64>, interp: Interp, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = nodes.iter().map(|&x| f(x)).collect();
        Self::new(nodes, values, interp)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn interp(&self) -> Interp {
        self.interp
    }

    /// `[nodes[0], nodes[n-1]]`.
    pub fn support(&self) -> (f64, f64) {
        (self.nodes[0], self.nodes[self.nodes.len() - 1])
    }

    /// Pointwise value with the interpolation rule; 0 off the node range.
    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(x >= lo && x <= hi) {
            return 0.0;
        }
        let n = self.nodes.len();
        // index of the last node <= x
        let i = self.nodes.partition_point(|&t| t <= x).saturating_sub(1).min(n - 1);
        if i == n - 1 {
            return self.values[n - 1];
        }
        match self.interp {
            Interp::PiecewiseConstant => self.values[i],
            Interp::Linear => {
                let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
                let w = (x - x0) / (x1 - x0);
                self.values[i] + (self.values[i + 1] - self.values[i]) * w
            }
        }
    }

    /// Same nodes, values mapped by `g`.
    pub fn map(&self, g: impl Fn(f64, f64) -> f64) -> Self {
        let values = self.nodes.iter().zip(&self.values).map(|(&x, &v)| g(x, v)).collect();
        Self { nodes: self.nodes.clone(), values, interp: self.interp }
    }

    /// `f_δ(y) = f(y / δ)`: nodes scaled by `δ`, values unchanged.
    pub fn dilate(&self, delta: f64) -> Self {
        Self {
            nodes: self.nodes.iter().map(|x| x * delta).collect(),
            values: self.values.clone(),
            interp: self.interp,
        }
    }

    /// Breakpoints of the interpolant inside `(a, b)`, plus the endpoints.
    pub fn breakpoints_in(&self, a: f64, b: f64) -> Vec<f64> {
        let mut pts = vec![a];
        let start = self.nodes.partition_point(|&t| t <= a);
        for &t in &self.nodes[start..] {
            if t >= b {
                break;
            }
            pts.push(t);
        }
        pts.push(b);
        pts
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["node", "value"])?;
        for (x, v) in self.nodes.iter().zip(&self.values) {
            wr.write_record([format!("{x:e}"), format!("{v:e}")])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads `(node, value)` rows; a header row is optional.
    pub fn read_csv<R: Read>(r: R, interp: Interp) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(r);
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(Error::Parse(format!("row {i}: expected node,value")));
            }
            let parsed = (rec[0].parse::<f64>(), rec[1].parse::<f64>());
            match parsed {
                (Ok(x), Ok(v)) => {
                    nodes.push(x);
                    values.push(v);
                }
                _ if i == 0 => continue,
                _ => return Err(Error::Parse(format!("row {i}: non-numeric entry"))),
            }
        }
        Self::new(nodes, values, interp)
    }
}

/// `∫ x^{2λ} dx` and `∫ x^{2λ+1} dx` over `(a, b)`.
fn panel_moments(space: &MeasureSpace, a: f64, b: f64) -> (f64, f64) {
    let q = space.upper_dim();
    (pow_diff(a, b, q) / q, pow_diff(a, b, q + 1.0) / (q + 1.0))
}

/// `∫ f dm_λ`, exact for the interpolant.
pub fn integrate_grid(space: &MeasureSpace, f: &GridFunction) -> f64 {
    let (nodes, values) = (f.nodes(), f.values());
    let mut total = 0.0;
    for i in 0..nodes.len() - 1 {
        let (x0, x1) = (nodes[i], nodes[i + 1]);
        match f.interp() {
            Interp::PiecewiseConstant => total += values[i] * space.measure_between(x0, x1),
            Interp::Linear => {
                let (m0, m1) = panel_moments(space, x0, x1);
                let h = x1 - x0;
                // weights of the two hat functions
                let w1 = (m1 - x0 * m0) / h;
                let w0 = m0 - w1;
                total += values[i] * w0 + values[i + 1] * w1;
            }
        }
    }
    total
}

// ============================================================================
// Interval functionals of a grid function
// ============================================================================

const GL8_X: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL8_W: [f64; 4] = [
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Eight-point Gauss–Legendre on `[a, b]`.
fn gl8(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = 0.0;
    for i in 0..4 {
        s += GL8_W[i] * (f(c - h * GL8_X[i]) + f(c + h * GL8_X[i]));
    }
    s * h
}

const SHORT_RANGE_CELLS: usize = 256;

/// Integrals of a grid function and of `|f − c|^q` over arbitrary
/// subintervals, with prefix sums for `∫ f dm` and `∫ |f| dm`.
#[derive(Debug, Clone)]
pub struct GridIntegrator<'a> {
    space: MeasureSpace,
    f: &'a GridFunction,
    prefix: Vec<f64>,
    prefix_abs: Vec<f64>,
}

impl<'a> GridIntegrator<'a> {
    pub fn new(space: &MeasureSpace, f: &'a GridFunction) -> Self {
        let n = f.nodes().len();
        let mut prefix = vec![0.0; n];
        let mut prefix_abs = vec![0.0; n];
        let mut me = Self { space: *space, f, prefix: Vec::new(), prefix_abs: Vec::new() };
        for i in 0..n - 1 {
            let (x0, x1) = (f.nodes()[i], f.nodes()[i + 1]);
            prefix[i + 1] = prefix[i] + me.cell_power(x0, x1, i, 0.0, 1.0, false);
            prefix_abs[i + 1] = prefix_abs[i] + me.cell_power(x0, x1, i, 0.0, 1.0, true);
        }
        me.prefix = prefix;
        me.prefix_abs = prefix_abs;
        me
    }

    pub fn space(&self) -> &MeasureSpace {
        &self.space
    }

    pub fn function(&self) -> &GridFunction {
        self.f
    }

    /// `∫_a^b (f − c)` or `∫_a^b |f − c|^q` (if `abs`) against `dm_λ` over a
    /// subinterval `[a, b]` of the cell starting at node `i`.
    fn cell_power(&self, a: f64, b: f64, i: usize, c: f64, q: f64, abs: bool) -> f64 {
        if b <= a {
            return 0.0;
        }
        let nodes = self.f.nodes();
        let vals = self.f.values();
        let l2 = 2.0 * self.space.lambda();
        let (x0, x1) = (nodes[i], nodes[i + 1]);
        let (v0, v1) = match self.f.interp() {
            Interp::PiecewiseConstant => (vals[i], vals[i]),
            Interp::Linear => (vals[i], vals[i + 1]),
        };
        let g = |y: f64| v0 + (v1 - v0) * (y - x0) / (x1 - x0) - c;
        if !abs {
            // f − c is affine on the cell: exact moments
            let (m0, m1) = panel_moments(&self.space, a, b);
            let slope = (v1 - v0) / (x1 - x0);
            return (v0 - c - slope * x0) * m0 + slope * m1;
        }
        let (ga, gb) = (g(a), g(b));
        let mut pts = vec![a];
        if ga * gb < 0.0 {
            pts.push(a + (b - a) * ga / (ga - gb));
        }
        pts.push(b);
        pts.windows(2)
            .map(|w| gl8(w[0], w[1], |y| g(y).abs().powf(q) * y.powf(l2)))
            .sum()
    }

    fn walk(&self, a: f64, b: f64, mut per_cell: impl FnMut(f64, f64, usize) -> f64) -> f64 {
        let nodes = self.f.nodes();
        let (lo, hi) = self.f.support();
        let a = a.max(lo);
        let b = b.min(hi);
        if b <= a {
            return 0.0;
        }
        let mut i = nodes.partition_point(|&t| t <= a).saturating_sub(1);
        let mut total = 0.0;
        while i + 1 < nodes.len() && nodes[i] < b {
            let ca = a.max(nodes[i]);
            let cb = b.min(nodes[i + 1]);
            total += per_cell(ca, cb, i);
            i += 1;
        }
        total
    }

    fn prefix_at(&self, t: f64, abs: bool) -> f64 {
        let nodes = self.f.nodes();
        let (lo, hi) = self.f.support();
        let pre = if abs { &self.prefix_abs } else { &self.prefix };
        if t <= lo {
            return 0.0;
        }
        if t >= hi {
            return pre[pre.len() - 1];
        }
        let i = nodes.partition_point(|&s| s <= t) - 1;
        pre[i] + self.cell_power(nodes[i], t, i, 0.0, 1.0, abs)
    }

    /// Cells met by `(a, b)`; short ranges are summed cell by cell, since a
    /// prefix difference loses digits when `(a, b)` carries little mass.
    fn cells_in(&self, a: f64, b: f64) -> usize {
        let nodes = self.f.nodes();
        (nodes.partition_point(|&t| t < b) + 1).saturating_sub(nodes.partition_point(|&t| t <= a))
    }

    /// `∫_a^b f dm_λ`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if self.cells_in(a, b) <= SHORT_RANGE_CELLS {
            return self.walk(a, b, |ca, cb, i| self.cell_power(ca, cb, i, 0.0, 1.0, false));
        }
        self.prefix_at(b, false) - self.prefix_at(a, false)
    }

    /// `∫_a^b |f| dm_λ`.
    pub fn integral_abs(&self, a: f64, b: f64) -> f64 {
        if self.cells_in(a, b) <= SHORT_RANGE_CELLS {
            return self.walk(a, b, |ca, cb, i| self.cell_power(ca, cb, i, 0.0, 1.0, true));
        }
        (self.prefix_at(b, true) - self.prefix_at(a, true)).max(0.0)
    }

    /// `f_I = m_λ(I)^{-1} ∫_I f dm_λ`.
    pub fn mean(&self, iv: &Interval) -> f64 {
        self.integral(iv.left(), iv.right()) / measure_interval(&self.space, iv)
    }

    /// `∫_a^b |f − c|^q dm_λ`; the zero extension of `f` counts outside
    /// the node range.
    pub fn abs_dev(&self, a: f64, b: f64, c: f64, q: f64) -> f64 {
        let (lo, hi) = self.f.support();
        let inside = self.walk(a, b, |ca, cb, i| self.cell_power(ca, cb, i, c, q, true));
        let outside = if c == 0.0 {
            0.0
        } else {
            let left = self.space.measure_between(a, b.min(lo));
            let right = self.space.measure_between(a.max(hi), b);
            c.abs().powf(q) * (left + right)
        };
        inside + outside
    }

    /// `(m_λ(I)^{-1} ∫_I |f − f_I|^q dm_λ)^{1/q}`.
    pub fn mean_oscillation(&self, iv: &Interval, q: f64) -> f64 {
        let m = measure_interval(&self.space, iv);
        let c = self.integral(iv.left(), iv.right()) / m;
        (self.abs_dev(iv.left(), iv.right(), c, q) / m).powf(1.0 / q)
    }

    /// `m_λ({y ∈ (a, b) : f(y) > level})` if `above`, else the same with
    /// `f(y) < level`.
    pub fn level_measure(&self, a: f64, b: f64, level: f64, above: bool) -> f64 {
        let (lo, hi) = self.f.support();
        let mut total = self.walk(a, b, |ca, cb, i| {
            let nodes = self.f.nodes();
            let vals = self.f.values();
            let (x0, x1) = (nodes[i], nodes[i + 1]);
            let (v0, v1) = match self.f.interp() {
                Interp::PiecewiseConstant => (vals[i], vals[i]),
                Interp::Linear => (vals[i], vals[i + 1]),
            };
            let g = |y: f64| v0 + (v1 - v0) * (y - x0) / (x1 - x0) - level;
            let sel = |v: f64| if above { v > 0.0 } else { v < 0.0 };
            let (ga, gb) = (g(ca), g(cb));
            if sel(ga) && sel(gb) || (sel(ga) || sel(gb)) && ga * gb >= 0.0 {
                self.space.measure_between(ca, cb)
            } else if ga * gb < 0.0 {
                let r = ca + (cb - ca) * ga / (ga - gb);
                if sel(ga) {
                    self.space.measure_between(ca, r)
                } else {
                    self.space.measure_between(r, cb)
                }
            } else {
                0.0
            }
        });
        // zero extension outside the nodes
        let zero_sel = if above { 0.0 > level } else { 0.0 < level };
        if zero_sel {
            total += self.space.measure_between(a, b.min(lo)) + self.space.measure_between(a.max(hi), b);
        }
        total
    }
}

// ============================================================================
// Interval ladders
// ============================================================================

/// Quantized interval family: radii on a geometric ladder, centers on a
/// node set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalLadder {
    pub radii: Vec<f64>,
    pub centers: Vec<f64>,
}

impl IntervalLadder {
    /// Radii `r_min · 2^{j / per_octave}` up to `r_max`.
    pub fn new(r_min: f64, r_max: f64, per_octave: usize, centers: Vec<f64>) -> Result<Self> {
        if !(r_min > 0.0 && r_max >= r_min) || per_octave == 0 {
            return Err(Error::InvalidArgument("ladder needs 0 < r_min <= r_max".into()));
        }
        let n = ((r_max / r_min).log2() * per_octave as f64).round() as usize + 1;
        let radii = (0..n).map(|j| r_min * 2f64.powf(j as f64 / per_octave as f64)).collect();
        Ok(Self { radii, centers })
    }

    /// Twice the radius density, extended by three octaves at both ends.
    pub fn refined(&self) -> Self {
        let n = self.radii.len();
        if n < 2 {
            return self.clone();
        }
        let step = (self.radii[1] / self.radii[0]).sqrt();
        let lo = self.radii[0] / 8.0;
        let hi = self.radii[n - 1] * 8.0;
        let mut radii = Vec::new();
        let mut r = lo;
        while r <= hi * (1.0 + 1e-12) {
            radii.push(r);
            r *= step;
        }
        Self { radii, centers: self.centers.clone() }
    }

    /// Every `(center, radius)` pair.
    pub fn intervals(&self) -> impl Iterator<Item = Interval> + '_ {
        self.centers
            .iter()
            .flat_map(move |&c| self.radii.iter().map(move |&r| Interval { center: c, radius: r }))
    }

    /// Ladder intervals with `x` in the open interval, plus the intervals
    /// centered at `x` itself.
    pub fn containing(&self, x: f64) -> Vec<Interval> {
        let mut out = Vec::new();
        for &r in &self.radii {
            out.push(Interval { center: x, radius: r });
            let lo = self.centers.partition_point(|&c| c <= x - r);
            for &c in &self.centers[lo..] {
                if c >= x + r {
                    break;
                }
                if c != x {
                    out.push(Interval { center: c, radius: r });
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(l: f64) -> MeasureSpace {
        MeasureSpace::new(l).unwrap()
    }

    #[test]
    fn closed_form_volumes() {
        let iv = Interval::new(1.0, 1.0).unwrap();
        assert!((measure_interval(&sp(0.5), &iv) - 2.0).abs() < 1e-15);
        let iv = Interval::new(3.0, 1.0).unwrap();
        assert!((measure_interval(&sp(1.0), &iv) - 56.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn doubling_closed_forms() {
        let iv = Interval::new(1.0, 1.0).unwrap();
        assert!((doubling_ratio(&sp(1.0), &iv) - 27.0 / 8.0).abs() < 1e-14);
        let iv = Interval::new(1.0, 1e-7).unwrap();
        assert!((doubling_ratio(&sp(1.0), &iv) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn comparable_volume_coincidence() {
        let s = sp(0.5);
        assert_eq!(comparable_volume(&s, 1.0, 1.0), 2.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(MeasureSpace::new(0.0).is_err());
        assert!(Interval::new(1.0, 0.0).is_err());
        assert!(GridFunction::new(vec![1.0, 1.0], vec![0.0, 0.0], Interp::Linear).is_err());
        assert!(GridFunction::new(vec![2.0, 1.0], vec![0.0, 0.0], Interp::Linear).is_err());
        assert!(make_log_grid(2.0, 1.0, 10).is_err());
    }

    #[test]
    fn grid_unit_on_one_two() {
        let s = sp(0.5);
        let nodes = make_log_grid(1.0, 2.0, 17).unwrap();
        let f = GridFunction::from_fn(nodes, Interp::Linear, |_| 1.0).unwrap();
        assert!((integrate_grid(&s, &f) - 1.5).abs() < 1e-14);
        let z = f.map(|_, _| 0.0);
        assert_eq!(integrate_grid(&s, &z), 0.0);
    }

    #[test]
    fn linear_interp_integrates_linear_exactly() {
        // ∫_1^3 (2x+1) x^{1.4} dx
        let s = sp(0.7);
        let nodes = make_log_grid(1.0, 3.0, 9).unwrap();
        let f = GridFunction::from_fn(nodes, Interp::Linear, |x| 2.0 * x + 1.0).unwrap();
        let exact = 2.0 * (3f64.powf(3.4) - 1.0) / 3.4 + (3f64.powf(2.4) - 1.0) / 2.4;
        assert!((integrate_grid(&s, &f) - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn eval_outside_support_is_zero() {
        let f = GridFunction::new(vec![1.0, 2.0], vec![3.0, 5.0], Interp::Linear).unwrap();
        assert_eq!(f.eval(0.5), 0.0);
        assert_eq!(f.eval(2.5), 0.0);
        assert_eq!(f.eval(1.5), 4.0);
        assert_eq!(f.eval(2.0), 5.0);
        let g = GridFunction::new(vec![1.0, 2.0], vec![3.0, 5.0], Interp::PiecewiseConstant).unwrap();
        assert_eq!(g.eval(1.9), 3.0);
    }

    #[test]
    fn csv_round_trip() {
        let f = GridFunction::new(vec![1.0, 2.5, 4.0], vec![0.1, -2.0, 3.0], Interp::Linear).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let g = GridFunction::read_csv(&buf[..], Interp::Linear).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn integrator_means_closed_form() {
        // λ = 1/2, f = x on (1, 3): f_I = ∫x² / ∫x = (26/3) / 4 = 26/12
        let s = sp(0.5);
        let f = GridFunction::from_fn(make_log_grid(0.5, 4.0, 40).unwrap(), Interp::Linear, |x| x).unwrap();
        let gi = GridIntegrator::new(&s, &f);
        let iv = Interval::new(2.0, 1.0).unwrap();
        assert!((gi.mean(&iv) - 26.0 / 12.0).abs() < 1e-13);
        // ∫_1^3 |x − 26/12| x dx in closed form
        let c: f64 = 26.0 / 12.0;
        let anti = |x: f64| x * x * x / 3.0 - c * x * x / 2.0;
        let want = (anti(c) - anti(1.0)) * -1.0 + (anti(3.0) - anti(c));
        assert!((gi.abs_dev(1.0, 3.0, c, 1.0) - want).abs() < 1e-12);
    }

    #[test]
    fn integrator_prefix_matches_direct() {
        let s = sp(0.8);
        let f = GridFunction::from_fn(make_log_grid(0.1, 5.0, 50).unwrap(), Interp::Linear, |x| (3.0 * x).sin()).unwrap();
        let gi = GridIntegrator::new(&s, &f);
        let whole = integrate_grid(&s, &f);
        assert!((gi.integral(0.0, 10.0) - whole).abs() < 1e-12);
        let a = gi.integral(0.3, 2.2) + gi.integral(2.2, 4.0);
        assert!((a - gi.integral(0.3, 4.0)).abs() < 1e-12);
        assert!(gi.integral_abs(0.3, 4.0) >= gi.integral(0.3, 4.0).abs());
        assert!((gi.abs_dev(0.3, 4.0, 0.0, 1.0) - gi.integral_abs(0.3, 4.0)).abs() < 1e-10);
    }

    #[test]
    fn ladder_containing() {
        let lad = IntervalLadder::new(0.1, 1.6, 1, vec![1.0, 1.5, 2.0, 3.0]).unwrap();
        assert_eq!(lad.radii.len(), 5);
        for iv in lad.containing(1.8) {
            assert!(iv.contains(1.8));
        }
    }
}
