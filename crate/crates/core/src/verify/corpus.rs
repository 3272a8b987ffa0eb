//! Fixed, seeded test functions.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::measure_space::{make_log_grid, GridFunction, Interp};

/// A generator seeded by `seed` and a label, so that adding a case does not
/// shift the random points of the others.
pub fn rng_for(seed: u64, label: &str) -> ChaCha8Rng {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

pub fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

#[derive(Clone)]
pub struct Shape {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Closed support; `hi` is infinite for the power function.
    pub support: (f64, f64),
    kinks: Vec<f64>,
}

fn smooth_bump(c: f64, w: f64, x: f64) -> f64 {
    let u = (x - c) / w;
    if u.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - u * u).powi(3)
    }
}

fn uniform(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn merge(mut v: Vec<f64>) -> Vec<f64> {
    v.retain(|x| x.is_finite() && *x > 0.0);
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * b.abs());
    v
}

impl Shape {
    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    /// Sampled on its support only.
    pub fn on_support(&self, n: usize) -> Result<GridFunction> {
        let (a, b) = self.support;
        let mut nodes = uniform(a, b, n);
        nodes.extend(&self.kinks);
        let nodes = merge(nodes);
        GridFunction::from_fn(nodes, Interp::Linear, |x| self.eval(x))
    }

    /// Sampled geometrically over `[lo, hi]` with `n_log` nodes, plus `n_sup`
    /// uniform nodes across the support.
    pub fn on_domain(&self, lo: f64, hi: f64, n_log: usize, n_sup: usize) -> Result<GridFunction> {
        let mut nodes = make_log_grid(lo, hi, n_log)?;
        let (a, b) = self.support;
        if b.is_finite() && n_sup >= 2 {
            nodes.extend(uniform(a.max(lo), b.min(hi), n_sup));
        }
        nodes.extend(self.kinks.iter().filter(|&&k| k > lo && k < hi));
        GridFunction::from_fn(merge(nodes), Interp::Linear, |x| self.eval(x))
    }
}

pub fn power(beta: f64) -> Shape {
    Shape { f: Arc::new(move |x: f64| x.powf(beta)), support: (0.0, f64::INFINITY), kinks: vec![] }
}

/// `(1 − ((x − 2)/w)²)³₊`.
pub fn bump(w: f64) -> Shape {
    Shape {
        f: Arc::new(move |x| smooth_bump(2.0, w, x)),
        support: (2.0 - w, 2.0 + w),
        kinks: vec![],
    }
}

/// Tent on `[1, 2.5]` peaking at 1.5.
pub fn hat() -> Shape {
    Shape {
        f: Arc::new(|x: f64| {
            if x <= 1.0 || x >= 2.5 {
                0.0
            } else if x <= 1.5 {
                2.0 * (x - 1.0)
            } else {
                2.5 - x
            }
        }),
        support: (1.0, 2.5),
        kinks: vec![1.5],
    }
}

/// Piecewise linear on `[1, 3]` through 9 seeded knots, zero at the ends.
pub fn random_pl(seed: u64) -> Shape {
    let mut rng = rng_for(seed, "random_pl");
    let mut xs: Vec<f64> = (0..7).map(|_| rng.gen_range(1.05..2.95)).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut knots = vec![(1.0, 0.0)];
    knots.extend(xs.iter().map(|&x| (x, rng.gen_range(-1.0..1.0))));
    knots.push((3.0, 0.0));
    let kinks = xs.clone();
    Shape {
        f: Arc::new(move |x: f64| {
            if x <= 1.0 || x >= 3.0 {
                return 0.0;
            }
            let i = knots.partition_point(|k| k.0 <= x) - 1;
            let (a, b) = (knots[i], knots[i + 1]);
            a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
        }),
        support: (1.0, 3.0),
        kinks,
    }
}

/// `sin(6x)` under a wide smooth bump on `[1, 4]`.
pub fn sin_bump() -> Shape {
    Shape {
        f: Arc::new(|x: f64| (6.0 * x).sin() * smooth_bump(2.5, 1.5, x)),
        support: (1.0, 4.0),
        kinks: vec![],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_vanish_outside_support() {
        for s in [bump(1.0), bump(0.25), hat(), random_pl(7), sin_bump()] {
            let (a, b) = s.support;
            assert_eq!(s.eval(a * 0.999), 0.0);
            assert_eq!(s.eval(b * 1.001), 0.0);
            let g = s.on_support(50).unwrap();
            assert_eq!(g.support(), s.support);
        }
    }

    #[test]
    fn seeded_shapes_repeat() {
        let (a, b) = (random_pl(3), random_pl(3));
        for x in [1.2, 1.7, 2.4] {
            assert_eq!(a.eval(x), b.eval(x));
        }
        assert_ne!(random_pl(3).eval(2.0), random_pl(4).eval(2.0));
    }
}
