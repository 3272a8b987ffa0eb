//! The case catalog. Samples of dilation-tested cases start with their
//! scale `s`; approximation-to-the-identity samples start with `k`.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;

use super::corpus::{self, log_uniform, rng_for, Shape};
use super::{Criterion, EstimateCase, SampleGroup, Suite, VerifyConfig};
use crate::error::{Error, Result};
use crate::function_spaces::{
    besov_from_table, build_ati, default_scales, dk_table, lipschitz_norm, log_oscillation_sup, make_atom,
    oscillation_norm, tl_diff_seminorm, tl_pointwise_diff_seminorm, AtiFamily, AtomShape, LadderSpec,
};
use crate::kernels::{
    cz_size_profile, frac_kernel, frac_kernel_x_derivative, frac_size_profile, heat_kernel, riesz_kernel,
    KernelKind, KernelSpec,
};
use crate::measure_space::{
    integrate_grid, make_log_grid, GridFunction, GridIntegrator, Interp, Interval, IntervalLadder, MeasureSpace,
};
use crate::operators::{
    apply_on_points, apply_semigroup, apply_semigroup_halfline, commutator, frac_integral_igamma, h_beta_maximal,
    oscillation_family, Supported,
};
use crate::quadrature::{integrate_adaptive, QuadConfig};

/// All cases of `suites`, in catalog order.
pub fn catalog(cfg: &VerifyConfig, suites: &[Suite]) -> Vec<EstimateCase> {
    let mut out = Vec::new();
    for suite in Suite::ALL {
        if !suites.contains(&suite) {
            continue;
        }
        for &l in &cfg.lambdas {
            let sp = match MeasureSpace::new(l) {
                Ok(sp) => sp,
                Err(e) => {
                    out.push(broken(id(&format!("{}.space", suite.name()), &[("lambda", l)]), suite, e));
                    continue;
                }
            };
            match suite {
                Suite::Kernels => kernel_cases(cfg, sp, &mut out),
                Suite::Spaces => space_cases(cfg, sp, &mut out),
                Suite::Commutators => commutator_cases(cfg, sp, &mut out),
                Suite::Endpoint => endpoint_cases(cfg, sp, &mut out),
                Suite::Fractional => fractional_cases(cfg, sp, &mut out),
            }
        }
    }
    out
}

// ============================================================================
// Helpers
// ============================================================================

fn id(base: &str, tags: &[(&str, f64)]) -> String {
    if tags.is_empty() {
        return base.to_string();
    }
    let t: Vec<String> = tags.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("{base}/{}", t.join(","))
}

fn params(tags: &[(&str, f64)]) -> BTreeMap<String, f64> {
    tags.iter().filter(|(_, v)| v.is_finite()).map(|(k, v)| (k.to_string(), *v)).collect()
}

fn make(
    id: String,
    suite: Suite,
    criterion: Criterion,
    (groups, dilation_pair): (Vec<SampleGroup>, Option<[Vec<f64>; 2]>),
    tags: &[(&str, f64)],
    q: impl Fn(&[f64]) -> Result<f64> + Send + Sync + 'static,
) -> EstimateCase {
    EstimateCase { id, suite, criterion, groups, dilation_pair, params: params(tags), quantity: Arc::new(q) }
}

/// A case that could not be set up; it fails with the setup error.
fn broken(id: String, suite: Suite, e: Error) -> EstimateCase {
    EstimateCase {
        id,
        suite,
        criterion: Criterion::Below { tol: 0.0 },
        groups: vec![SampleGroup { name: "setup".into(), samples: vec![vec![]] }],
        dilation_pair: None,
        params: BTreeMap::new(),
        quantity: Arc::new(move |_| Err(e.clone())),
    }
}

/// One group per dilation scale, each sample prefixed by its scale, and a
/// spot-check pair at scales 1 and 2.
fn scaled(cfg: &VerifyConfig, base: &[Vec<f64>]) -> (Vec<SampleGroup>, Option<[Vec<f64>; 2]>) {
    let with = |s: f64, b: &Vec<f64>| {
        let mut v = vec![s];
        v.extend(b);
        v
    };
    let groups = cfg
        .scales
        .iter()
        .map(|&s| SampleGroup { name: format!("scale={s}"), samples: base.iter().map(|b| with(s, b)).collect() })
        .collect();
    let mid = &base[base.len() / 2];
    (groups, Some([with(1.0, mid), with(2.0, mid)]))
}

fn bounded(cfg: &VerifyConfig) -> Criterion {
    Criterion::Bounded { band: cfg.band, ceiling: None }
}

/// `n` values from `a` to `b` inclusive, geometrically spaced.
fn geom(a: f64, b: f64, n: usize) -> Vec<f64> {
    make_log_grid(a.min(b), a.max(b), n).unwrap_or_default()
}

fn uniform(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn sorted_nodes(mut v: Vec<f64>) -> Vec<f64> {
    v.retain(|x| *x > 0.0 && x.is_finite());
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * b.abs());
    v
}

/// Tolerances for operators applied to corpus functions; the ratios built
/// from them need about six digits.
fn op_cfg() -> QuadConfig {
    QuadConfig::with_tol(1e-12, 1e-7)
}

/// The commutator ratios only need to hold within the stability band, and
/// each fractional kernel value is itself a quadrature.
fn comm_cfg() -> QuadConfig {
    QuadConfig::with_tol(1e-14, 1e-6)
}

fn riesz(sp: &MeasureSpace, x: f64, y: f64) -> Result<f64> {
    riesz_kernel(sp, x, y, &QuadConfig::default())?.ok()
}

fn frac(sp: &MeasureSpace, alpha: f64, x: f64, y: f64) -> Result<f64> {
    frac_kernel(sp, alpha, x, y, &QuadConfig::default())?.ok()
}

fn lp_norm(sp: &MeasureSpace, f: &GridFunction, p: f64) -> f64 {
    integrate_grid(sp, &f.map(|_, v| v.abs().powf(p))).max(0.0).powf(1.0 / p)
}

/// Values of `op` on `xs` as a grid function.
fn sampled(xs: Vec<f64>, op: impl Fn(f64) -> Result<f64> + Sync) -> Result<GridFunction> {
    let vals: Result<Vec<f64>> = apply_on_points(&xs, |x| op(x).map(crate::quadrature::Quad::exact))
        .into_iter()
        .map(|q| q.map(|q| q.value))
        .collect();
    GridFunction::new(xs, vals?, Interp::Linear)
}

/// Output points for an operator applied to a function supported in
/// `[a, b]`: two decades either side, denser on the support.
fn output_points(a: f64, b: f64) -> Vec<f64> {
    let mut v = geom(a / 100.0, b * 100.0, 60);
    v.extend(uniform(a, b, 41));
    sorted_nodes(v)
}

// ============================================================================
// Kernels
// ============================================================================

/// Sign-regime constants: `K1` is the smallest tested ratio beyond which
/// `R(1, ρ) > 0` and `R(1, 1/ρ) < 0` for every larger tested ρ; `K0` the
/// largest tested ratio up to 2 below which the same holds.
fn fit_sign_constants(sp: &MeasureSpace) -> Result<(f64, f64)> {
    let near = [1.0 + 1e-4, 1.01, 1.1, 1.25];
    let far = [1.5, 2.0, 3.0, 4.0, 8.0, 16.0, 64.0, 1e3, 1e4];
    let ok = |r: f64| -> Result<bool> { Ok(riesz(sp, 1.0, r)? > 0.0 && riesz(sp, 1.0, 1.0 / r)? < 0.0) };
    let mut k1 = None;
    for &r in far.iter().rev() {
        if ok(r)? {
            k1 = Some(r);
        } else {
            break;
        }
    }
    let k1 = k1.ok_or_else(|| Error::InvalidArgument("no far sign regime found".into()))?;
    let mut k0 = None;
    for &r in near.iter().chain(far.iter().filter(|&&r| r <= 2.0)) {
        if ok(r)? {
            k0 = Some(r);
        } else {
            break;
        }
    }
    let k0 = k0.ok_or_else(|| Error::InvalidArgument("no near-diagonal sign regime found".into()))?;
    Ok((k0, k1))
}

fn kernel_cases(cfg: &VerifyConfig, sp: MeasureSpace, out: &mut Vec<EstimateCase>) {
    let l = sp.lambda();
    let q = sp.upper_dim();
    let lt = [("lambda", l)];
    let su = Suite::Kernels;

    match fit_sign_constants(&sp) {
        Err(e) => out.push(broken(id("kernels.riesz.sign_constants", &lt), su, e)),
        Ok((k0, k1)) => {
            let tags = [("lambda", l), ("K0", k0), ("K1", k1)];
            let rows = |v: Vec<f64>| -> Vec<Vec<f64>> { v.into_iter().map(|r| vec![r]).collect() };

            let mut off = geom(1e-4, 0.999 / k0, 12);
            off.extend(geom(1.001 * k0, 1e4, 12));
            out.push(make(id("kernels.riesz.size_off_diagonal", &lt), su, bounded(cfg), scaled(cfg, &rows(off)), &tags, move |v| {
                let (x, y) = (v[0], v[0] * v[1]);
                Ok(riesz(&sp, x, y)?.abs() * x.max(y).powf(q))
            }));

            let mut all = geom(1e-4, 1e4, 24);
            all.extend([1.0 - 0.1, 1.0 - 1e-3, 1.0 - 1e-5, 1.0 + 1e-5, 1.0 + 1e-3, 1.0 + 0.1]);
            out.push(make(id("kernels.riesz.size_standard", &lt), su, bounded(cfg), scaled(cfg, &rows(all)), &tags, move |v| {
                let (x, y) = (v[0], v[0] * v[1]);
                Ok(riesz(&sp, x, y)?.abs() / cz_size_profile(&sp, x, y))
            }));

            let mut smooth = Vec::new();
            for rho in [1e-3, 0.1, 0.5, 0.9, 1.1, 2.0, 10.0, 1e3] {
                for tau in [-0.9, -0.5, -0.1, 0.1, 0.5, 0.9] {
                    if 1.0 + tau * (1.0f64 - rho).abs() / 1.5 > 0.0 {
                        smooth.push(vec![rho, tau]);
                    }
                }
            }
            out.push(make(id("kernels.riesz.smoothness", &lt), su, bounded(cfg), scaled(cfg, &smooth), &tags, move |v| {
                let (x, y) = (v[0], v[0] * v[1]);
                let d = (x - y).abs();
                let u = x + v[2] * d / 1.5;
                let lhs = (riesz(&sp, x, y)? - riesz(&sp, u, y)?).abs() + (riesz(&sp, y, x)? - riesz(&sp, y, u)?).abs();
                Ok(lhs * d / ((x - u).abs() * cz_size_profile(&sp, x, y)))
            }));

            let above: Vec<f64> = geom(1e-5, 0.999 * (k0 - 1.0), 12).into_iter().map(|e| 1.0 + e).collect();
            out.push(make(id("kernels.riesz.sign_near_above", &lt), su, bounded(cfg), scaled(cfg, &rows(above)), &tags, move |v| {
                let (x, y) = (v[0], v[0] * v[1]);
                let r = riesz(&sp, x, y)?;
                Ok(if r > 0.0 { 1.0 / (r * (x * y).powf(l) * (y - x)) } else { f64::INFINITY })
            }));

            let below: Vec<f64> = geom(1e-5, 0.999 * (1.0 - 1.0 / k0), 12).into_iter().map(|e| 1.0 - e).collect();
            out.push(make(id("kernels.riesz.sign_near_below", &lt), su, bounded(cfg), scaled(cfg, &rows(below)), &tags, move |v| {
                let (x, y) = (v[0], v[0] * v[1]);
                let r = riesz(&sp, x, y)?;
                Ok(if r < 0.0 { 1.0 / (-r * (x * y).powf(l) * (x - y)) } else { f64::INFINITY })
            }));

            out.push(make(id("kernels.riesz.sign_far_above", &lt), su, bounded(cfg), scaled(cfg, &rows(geom(1.001 * k1, 1e4, 12))), &tags, move |v| {
                let (x, y) = (v[0], v[0] * v[1]);
                let r = riesz(&sp, x, y)?;
                Ok(if r > 0.0 { x / (y.powf(q + 1.0) * r) } else { f64::INFINITY })
            }));

            out.push(make(id("kernels.riesz.sign_far_below", &lt), su, bounded(cfg), scaled(cfg, &rows(geom(1e-4, 0.999 / k1, 12))), &tags, move |v| {
                let (x, y) = (v[0], v[0] * v[1]);
                let r = riesz(&sp, x, y)?;
                Ok(if r < 0.0 { 1.0 / (x.powf(q) * -r) } else { f64::INFINITY })
            }));
        }
    }

    // mass conservation
    let mut pts = Vec::new();
    for x in geom(0.01, 100.0, 10) {
        for t in [0.1, 1.0] {
            pts.push(vec![x, t]);
        }
    }
    out.push(make(id("kernels.heat.conservation", &lt), su, Criterion::Below { tol: 1e-6 }, scaled(cfg, &pts), &lt, move |v| {
        let (s, x, t) = (v[0], v[1], v[2]);
        let spec = KernelSpec::new(KernelKind::Heat { t: t * s * s }, sp, QuadConfig::default())?;
        Ok((apply_semigroup_halfline(&spec, &|_| Ok(1.0), x * s)?.value - 1.0).abs())
    }));
    out.push(make(id("kernels.poisson.conservation", &lt), su, Criterion::Below { tol: 1e-6 }, scaled(cfg, &pts), &lt, move |v| {
        let (s, x, t) = (v[0], v[1], v[2]);
        let spec = KernelSpec::new(KernelKind::Poisson { t: t * s }, sp, QuadConfig::default())?;
        Ok((apply_semigroup_halfline(&spec, &|_| Ok(1.0), x * s)?.value - 1.0).abs())
    }));

    // P_t P_u f = P_{t+u} f on a smooth bump with sup 1
    let law: Vec<Vec<f64>> = [0.25, 0.75, 1.5, 2.0, 2.5, 4.0].iter().map(|&x| vec![x]).collect();
    let tags = [("lambda", l), ("t", 0.5), ("u", 0.5)];
    out.push(make(id("kernels.poisson.semigroup_law", &lt), su, Criterion::Below { tol: 1e-4 }, scaled(cfg, &law), &tags, move |v| {
        let (s, x) = (v[0], v[1] * v[0]);
        let shape = corpus::bump(1.0);
        let f = Supported::new(move |y: f64| shape.eval(y / s), s, 3.0 * s);
        let poisson = |t: f64| KernelSpec::new(KernelKind::Poisson { t: t * s }, sp, QuadConfig::default());
        let (pt, pu, ptu) = (poisson(0.5)?, poisson(0.5)?, poisson(1.0)?);
        let inner = |y: f64| -> Result<f64> { Ok(apply_semigroup(&pu, &f, y)?.value) };
        let nested = apply_semigroup_halfline(&pt, &inner, x)?.value;
        let direct = apply_semigroup(&ptu, &f, x)?.value;
        Ok((nested - direct).abs())
    }));

    // homogeneity identities at seeded random points
    let draw = |label: &str, with_t: bool| -> Vec<Vec<f64>> {
        let mut rng = rng_for(cfg.seed, label);
        (0..20)
            .map(|_| {
                let x = log_uniform(&mut rng, 0.2, 5.0);
                let mut y = log_uniform(&mut rng, 0.2, 5.0);
                while (x - y).abs() < 0.05 * x {
                    y = log_uniform(&mut rng, 0.2, 5.0);
                }
                let t = if with_t { log_uniform(&mut rng, 0.1, 10.0) } else { 0.0 };
                vec![x, y, t, rng.gen_range(0.5..4.0)]
            })
            .collect()
    };
    let hid = id("kernels.heat.homogeneity", &lt);
    out.push(make(hid.clone(), su, Criterion::Below { tol: 1e-8 }, scaled(cfg, &draw(&hid, true)), &lt, move |v| {
        let (x, y, t, d) = (v[1] * v[0], v[2] * v[0], v[3] * v[0] * v[0], v[4]);
        Ok((d.powf(q) * heat_kernel(&sp, d * d * t, d * x, d * y)? / heat_kernel(&sp, t, x, y)? - 1.0).abs())
    }));
    let rid = id("kernels.riesz.homogeneity", &lt);
    out.push(make(rid.clone(), su, Criterion::Below { tol: 1e-8 }, scaled(cfg, &draw(&rid, false)), &lt, move |v| {
        let (x, y, d) = (v[1] * v[0], v[2] * v[0], v[4]);
        Ok((d.powf(q) * riesz(&sp, d * x, d * y)? / riesz(&sp, x, y)? - 1.0).abs())
    }));
    for &a in &cfg.alphas {
        let tags = [("lambda", l), ("alpha", a)];
        let fid = id("kernels.fractional.homogeneity", &tags);
        out.push(make(fid.clone(), su, Criterion::Below { tol: 1e-8 }, scaled(cfg, &draw(&fid, false)), &tags, move |v| {
            let (x, y, d) = (v[1] * v[0], v[2] * v[0], v[4]);
            Ok((d.powf(q - a) * frac(&sp, a, d * x, d * y)? / frac(&sp, a, x, y)? - 1.0).abs())
        }));
    }
}

// ============================================================================
// Fractional integrals
// ============================================================================

/// The `(α, β)` pairs of the `h_β` inequality.
const H_BETA_PAIRS: [(f64, f64); 3] = [(0.5, 0.25), (0.5, 0.0), (0.25, 0.0)];
/// Input exponent of the `I^γ` bound.
const IGAMMA_P: f64 = 1.5;

fn fractional_cases(cfg: &VerifyConfig, sp: MeasureSpace, out: &mut Vec<EstimateCase>) {
    let l = sp.lambda();
    let q = sp.upper_dim();
    let su = Suite::Fractional;
    let mut ratios = geom(1e-3, 1e3, 24);
    ratios.extend([0.9, 0.99, 0.999, 1.001, 1.01, 1.1]);
    let rows: Vec<Vec<f64>> = ratios.iter().map(|&r| vec![r]).collect();

    for &a in &cfg.alphas {
        let tags = [("lambda", l), ("alpha", a)];
        out.push(make(id("fractional.size", &tags), su, bounded(cfg), scaled(cfg, &rows), &tags, move |v| {
            let (x, y) = (v[0], v[0] * v[1]);
            let r = frac(&sp, a, x, y)? / frac_size_profile(&sp, a, x, y);
            Ok(r.max(1.0 / r))
        }));

        let mut smooth = Vec::new();
        for rho in [1e-2, 0.3, 0.8, 1.25, 3.0, 1e2] {
            for tau in [-0.9, -0.5, -0.1, 0.1, 0.5, 0.9] {
                if 1.0 + tau * (1.0f64 - rho).abs() / 2.0 > 0.0 {
                    smooth.push(vec![rho, tau]);
                }
            }
        }
        out.push(make(id("fractional.smoothness", &tags), su, bounded(cfg), scaled(cfg, &smooth), &tags, move |v| {
            let (x, y) = (v[0], v[0] * v[1]);
            let d = (x - y).abs();
            let x2 = x + v[2] * d / 2.0;
            let diff = (frac(&sp, a, x, y)? - frac(&sp, a, x2, y)?).abs();
            Ok(diff * d / ((x - x2).abs() * frac_size_profile(&sp, a, x, y)))
        }));

        out.push(make(id("fractional.gradient", &tags), su, bounded(cfg), scaled(cfg, &rows), &tags, move |v| {
            let (x, y) = (v[0], v[0] * v[1]);
            let g = frac_kernel_x_derivative(&sp, a, x, y, &QuadConfig::default())?;
            Ok(g.abs() * (x - y).abs().powf(2.0 - a) * (x + y).powf(2.0 * l))
        }));

        // I^γ from L^p̃ to L^q̃ with 1/p̃ − 1/q̃ = γ
        let gamma = a;
        let qt = 1.0 / (1.0 / IGAMMA_P - gamma);
        let tags = [("lambda", l), ("gamma", gamma), ("p", IGAMMA_P), ("q", qt)];
        let shapes = Arc::new(vec![corpus::bump(1.0), corpus::hat(), corpus::random_pl(cfg.seed)]);
        let base: Vec<Vec<f64>> = (0..shapes.len()).map(|i| vec![i as f64]).collect();
        out.push(make(id("fractional.igamma_lp_lq", &tags[..2]), su, bounded(cfg), scaled(cfg, &base), &tags, move |v| {
            let (s, shape) = (v[0], &shapes[v[1] as usize]);
            let f = shape.on_support(201)?.dilate(s);
            let (lo, hi) = f.support();
            let g = sampled(output_points(lo, hi), |x| Ok(frac_integral_igamma(&sp, &f, gamma, x, &op_cfg())?.value))?;
            Ok(lp_norm(&sp, &g, qt) / lp_norm(&sp, &f, IGAMMA_P))
        }));
    }

    // ‖h_β‖_q ≤ C ‖h_α‖_p, 1/p − 1/q = (α − β)/Q
    let shapes = Arc::new(vec![corpus::bump(1.0), corpus::random_pl(cfg.seed), corpus::sin_bump()]);
    for (ah, bh) in H_BETA_PAIRS {
        let p = 2.0;
        let qq = 1.0 / (1.0 / p - (ah - bh) / q);
        let tags = [("lambda", l), ("alpha", ah), ("beta", bh), ("p", p), ("q", qq)];
        let shapes = shapes.clone();
        let base: Vec<Vec<f64>> = (0..shapes.len()).map(|i| vec![i as f64]).collect();
        out.push(make(id("fractional.h_beta_lp_lq", &tags[..3]), su, bounded(cfg), scaled(cfg, &base), &tags, move |v| {
            let (s, shape) = (v[0], &shapes[v[1] as usize]);
            let g = shape.on_support(161)?;
            let (a, b) = g.support();
            let g = g.dilate(s);
            let gi = GridIntegrator::new(&sp, &g);
            let osc = oscillation_family(&gi);
            // ladder intervals recur across x; evaluate each once
            let memo: Mutex<HashMap<(u64, u64), f64>> = Mutex::new(HashMap::new());
            let fam = |iv: &Interval| -> f64 {
                let key = (iv.center().to_bits(), iv.radius().to_bits());
                if let Some(&v) = memo.lock().expect("memo lock").get(&key) {
                    return v;
                }
                let v = osc(iv);
                memo.lock().expect("memo lock").insert(key, v);
                v
            };
            let centers: Vec<f64> = geom(a / 10.0, b * 10.0, 48).iter().map(|c| c * s).collect();
            let ladder = IntervalLadder::new((b - a) / 200.0 * s, 100.0 * b * s, 2, centers)?;
            let mut xs = geom(a / 20.0, b * 20.0, 40);
            xs.extend(uniform(a, b, 21));
            let xs: Vec<f64> = sorted_nodes(xs).iter().map(|x| x * s).collect();
            let h = |beta: f64| -> Result<GridFunction> {
                sampled(xs.clone(), |x| Ok(h_beta_maximal(&sp, &fam, beta, x, &ladder)?.value))
            };
            let (hb, ha) = (h(bh)?, h(ah)?);
            Ok(lp_norm(&sp, &hb, qq) / lp_norm(&sp, &ha, p))
        }));
    }
}

// ============================================================================
// Spaces
// ============================================================================

/// Scales of the approximation to the identity at dilation 1.
const ATI_K: (i32, i32) = (-4, 8);

type DkEntry = Arc<OnceLock<std::result::Result<(AtiFamily, Vec<(i32, f64, f64)>), Error>>>;

/// `|D_k f(x)|` tables shared by the cases of different `β`.
#[derive(Default)]
struct DkCache {
    map: Mutex<HashMap<(usize, u64), DkEntry>>,
}

impl DkCache {
    fn get(&self, key: (usize, u64)) -> DkEntry {
        self.map.lock().expect("cache lock").entry(key).or_default().clone()
    }
}

/// Evaluation points for the Besov sup of a shape sampled on `[lo, hi]`.
fn besov_points(shape: &Shape, lo: f64, hi: f64) -> Vec<f64> {
    let (a, b) = shape.support;
    if b.is_finite() {
        let mut v = geom(lo, hi, 16);
        v.extend(uniform(a, b, 33));
        sorted_nodes(v)
    } else {
        geom(lo.max(1e-6), hi, 48)
    }
}

fn space_cases(cfg: &VerifyConfig, sp: MeasureSpace, out: &mut Vec<EstimateCase>) {
    let l = sp.lambda();
    let su = Suite::Spaces;
    let lt = [("lambda", l)];
    let base_ati = match make_log_grid(1e-3, 1e3, 400).and_then(|g| build_ati(&sp, ATI_K.0..=ATI_K.1, &g)) {
        Ok(a) => Arc::new(a),
        Err(e) => {
            out.push(broken(id("spaces.ati", &lt), su, e));
            return;
        }
    };

    // Lipschitz norm of x^β against its exact value
    for &beta in &cfg.betas {
        let tags = [("lambda", l), ("beta", beta)];
        out.push(make(id("spaces.lipschitz_power", &tags), su, Criterion::Below { tol: 0.01 }, scaled(cfg, &[vec![]]), &tags, move |v| {
            let s = v[0];
            let f = corpus::power(beta).on_domain(1e-12, 10.0, 600, 0)?.dilate(s);
            Ok((lipschitz_norm(&f, beta)?.value * s.powf(beta) - 1.0).abs())
        }));
    }

    // pairwise ratios of the equivalent seminorms
    let dk_cache = Arc::new(DkCache::default());
    for &beta in &cfg.betas {
        let tags = [("lambda", l), ("beta", beta)];
        let shapes = Arc::new(vec![
            corpus::power(beta),
            corpus::bump(1.0),
            corpus::bump(0.25),
            corpus::hat(),
            corpus::random_pl(cfg.seed),
            corpus::sin_bump(),
        ]);
        let base: Vec<Vec<f64>> = (0..shapes.len()).map(|i| vec![i as f64]).collect();
        let mut grouped = scaled(cfg, &base);
        grouped.1 = Some([vec![1.0, 1.0], vec![2.0, 1.0]]);
        let crit = Criterion::Bounded { band: cfg.band, ceiling: Some(cfg.spaces_band) };
        let (ati, cache) = (base_ati.clone(), dk_cache.clone());
        out.push(make(id("spaces.norm_equivalence", &tags), su, crit, grouped, &tags, move |v| {
            let (s, i) = (v[0], v[1] as usize);
            let shape = &shapes[i];
            let (lo, hi) = if shape.support.1.is_finite() { (1e-3, 10.0) } else { (1e-12, 10.0) };
            let f0 = if shape.support.1.is_finite() {
                shape.on_domain(lo, hi, 300, 200)?
            } else {
                shape.on_domain(lo, hi, 600, 0)?
            };
            let f = f0.dilate(s);
            let lip = lipschitz_norm(&f, beta)?.value;
            let spec = LadderSpec::default();
            let o1 = oscillation_norm(&sp, &f, beta, 1.0, &spec)?.value;
            let o2 = oscillation_norm(&sp, &f, beta, 2.0, &spec)?.value;
            // the power function's table does not depend on β beyond its shape
            let key = (if i == 0 { 1000 + (beta * 1e6) as usize } else { i }, s.to_bits());
            let entry = cache.get(key);
            let built = entry.get_or_init(|| {
                let shift = s.log2().round() as i32;
                let pts: Vec<f64> = besov_points(shape, lo, hi).iter().map(|x| x * s).collect();
                let fam = ati.rebased((ATI_K.0 - shift)..=(ATI_K.1 - shift), &pts)?;
                let table = dk_table(&fam, &f)?;
                Ok((fam, table))
            });
            let (fam, table) = built.as_ref().map_err(|e| e.clone())?;
            let besov = besov_from_table(fam, table, beta)?.value;
            let norms = [lip, o1, o2, besov];
            let hi = norms.iter().cloned().fold(0.0, f64::max);
            let lo = norms.iter().cloned().fold(f64::INFINITY, f64::min);
            Ok(if lo > 0.0 { hi / lo } else { f64::INFINITY })
        }));
    }

    // oscillation form against pointwise-difference form of the F^{β,∞}_p seminorm
    for &beta in &cfg.betas {
        let p = cfg.p;
        let tags = [("lambda", l), ("beta", beta), ("p", p)];
        let shapes = Arc::new(vec![corpus::bump(1.0), corpus::hat(), corpus::random_pl(cfg.seed), corpus::sin_bump()]);
        let base: Vec<Vec<f64>> = (0..shapes.len()).map(|i| vec![i as f64]).collect();
        out.push(make(id("spaces.tl_difference_forms", &tags[..2]), su, bounded(cfg), scaled(cfg, &base), &tags, move |v| {
            let f = shapes[v[1] as usize].on_domain(1e-3, 10.0, 300, 200)?.dilate(v[0]);
            let scales = default_scales(&f);
            let osc = tl_diff_seminorm(&sp, &f, beta, p, scales.clone())?.value;
            let pt = tl_pointwise_diff_seminorm(&sp, &f, beta, p, scales)?.value;
            Ok(if osc <= 2.0 * pt * (1.0 + 1e-9) && osc > 0.0 { pt / osc } else { f64::INFINITY })
        }));
    }

    ati_cases(cfg, sp, base_ati, out);
}

/// Positions `x` probed by the ATI cases.
const ATI_X: [f64; 6] = [1e-3, 1e-2, 0.1, 1.0, 10.0, 100.0];
/// Offsets `(y − x)/2^{-k}` probed by the ATI cases.
const ATI_T: [f64; 9] = [-1.9, -1.3, -0.7, -0.2, 0.0, 0.2, 0.7, 1.3, 1.9];
/// Regularity exponents used in the fitted size and smoothness bounds.
const ATI_BETA: f64 = 1.0;
const ATI_GAMMA: f64 = 1.0;

/// Samples `[k, x, rest...]` grouped by `k`, with the pair `(k, x)`,
/// `(k − 1, 2x)` for the dilation check.
fn by_k(ks: std::ops::RangeInclusive<i32>, rest: &[Vec<f64>], keep: impl Fn(&[f64]) -> bool) -> (Vec<SampleGroup>, Option<[Vec<f64>; 2]>) {
    let mut groups = Vec::new();
    for k in ks {
        let mut samples = Vec::new();
        for &x in &ATI_X {
            for r in rest {
                let mut v = vec![k as f64, x];
                v.extend(r);
                if keep(&v) {
                    samples.push(v);
                }
            }
        }
        groups.push(SampleGroup { name: format!("k={k}"), samples });
    }
    let mid = groups[groups.len() / 2].samples.iter().find(|v| v[1] == 1.0).cloned();
    let pair = mid.map(|a| {
        let mut b = a.clone();
        b[0] -= 1.0;
        b[1] *= 2.0;
        [a, b]
    });
    (groups, pair)
}

/// `y = x + t 2^{-k} > 0`.
fn y_ok(v: &[f64]) -> bool {
    v[1] + v[2] * 2f64.powi(-(v[0] as i32)) > 0.0
}

fn ati_cases(cfg: &VerifyConfig, sp: MeasureSpace, ati: Arc<AtiFamily>, out: &mut Vec<EstimateCase>) {
    let l = sp.lambda();
    let su = Suite::Spaces;
    let lt = [("lambda", l)];
    let tags = [("lambda", l), ("beta", ATI_BETA), ("gamma", ATI_GAMMA)];
    let all_k = ATI_K.0..=ATI_K.1;
    let d_k = ATI_K.0..=ATI_K.1 - 1;
    let none: Vec<Vec<f64>> = vec![vec![]];
    let ts: Vec<Vec<f64>> = ATI_T.iter().map(|&t| vec![t]).collect();

    let a = ati.clone();
    out.push(make(id("spaces.ati_unit_mass", &lt), su, Criterion::Below { tol: 1e-6 }, by_k(all_k.clone(), &none, |_| true), &lt, move |v| {
        Ok((a.unit_integral(v[0] as i32, v[1])? - 1.0).abs())
    }));

    let a = ati.clone();
    out.push(make(id("spaces.ati_symmetry", &lt), su, Criterion::Below { tol: 0.0 }, by_k(all_k.clone(), &ts, y_ok), &lt, move |v| {
        let (k, x) = (v[0] as i32, v[1]);
        let y = x + v[2] * 2f64.powi(-k);
        Ok((a.s_kernel(k, x, y)? - a.s_kernel(k, y, x)?).abs())
    }));

    let outside: Vec<Vec<f64>> = [-4.0, -2.5, -2.0, 2.0, 2.5, 4.0].iter().map(|&t| vec![t]).collect();
    let a = ati.clone();
    out.push(make(id("spaces.ati_support", &lt), su, Criterion::Below { tol: 0.0 }, by_k(d_k.clone(), &outside, y_ok), &lt, move |v| {
        let (k, x) = (v[0] as i32, v[1]);
        let y = x + v[2] * 2f64.powi(-k);
        Ok(a.s_kernel(k, x, y)?.abs() + a.d_kernel(k, x, y)?.abs())
    }));

    let a = ati.clone();
    out.push(make(id("spaces.dk_cancellation", &lt), su, Criterion::Below { tol: 1e-6 }, by_k(d_k.clone(), &none, |_| true), &lt, move |v| {
        let (k, x) = (v[0] as i32, v[1]);
        Ok((a.unit_integral(k, x)? - a.unit_integral(k + 1, x)?).abs())
    }));

    // (size, smoothness in one variable, double difference) for S_k and D_k
    let mut one = Vec::new();
    for &t in &ATI_T {
        for tau in [-0.9, -0.4, 0.4, 0.9] {
            one.push(vec![t, tau]);
        }
    }
    let mut two = Vec::new();
    for &t in &ATI_T {
        for sig in [-0.9, -0.3, 0.3, 0.9] {
            for tau in [-0.9, -0.3, 0.3, 0.9] {
                two.push(vec![t, sig, tau]);
            }
        }
    }
    for (name, is_d) in [("s", false), ("d", true)] {
        let ks = if is_d { d_k.clone() } else { all_k.clone() };
        let kern = {
            let a = ati.clone();
            Arc::new(move |k: i32, x: f64, y: f64| if is_d { a.d_kernel(k, x, y) } else { a.s_kernel(k, x, y) })
        };
        // 1 / (V_k(x) + V_k(y) + m(I(x, |x − y|))) and (2^{-k}/(|x−y| + 2^{-k}))^γ
        let envelope = {
            let a = ati.clone();
            Arc::new(move |k: i32, x: f64, y: f64| {
                let r = 2f64.powi(-k);
                let d = (x - y).abs();
                let m = if d > 0.0 { sp.measure_between(x - d, x + d) } else { 0.0 };
                (r + d, (r / (r + d)).powf(ATI_GAMMA) / (a.v_k(k, x) + a.v_k(k, y) + m))
            })
        };

        let (kn, env) = (kern.clone(), envelope.clone());
        out.push(make(id(&format!("spaces.ati_size_{name}"), &lt), su, bounded(cfg), by_k(ks.clone(), &ts, y_ok), &tags, move |v| {
            let (k, x) = (v[0] as i32, v[1]);
            let y = x + v[2] * 2f64.powi(-k);
            Ok(kn(k, x, y)?.abs() / env(k, x, y).1)
        }));

        let (kn, env) = (kern.clone(), envelope.clone());
        let keep = |v: &[f64]| {
            let r = 2f64.powi(-(v[0] as i32));
            let y = v[1] + v[2] * r;
            y > 0.0 && y + v[3] * (r + (v[1] - y).abs()) / 2.0 > 0.0
        };
        out.push(make(id(&format!("spaces.ati_smoothness_{name}"), &lt), su, bounded(cfg), by_k(ks.clone(), &one, keep), &tags, move |v| {
            let (k, x) = (v[0] as i32, v[1]);
            let y = x + v[2] * 2f64.powi(-k);
            let (w, e) = env(k, x, y);
            let y2 = y + v[3] * w / 2.0;
            let lhs = (kn(k, x, y)? - kn(k, x, y2)?).abs() + (kn(k, y, x)? - kn(k, y2, x)?).abs();
            Ok(lhs / (e * ((y - y2).abs() / w).powf(ATI_BETA)))
        }));

        let (kn, env) = (kern.clone(), envelope.clone());
        let keep = |v: &[f64]| {
            let r = 2f64.powi(-(v[0] as i32));
            let (x, y) = (v[1], v[1] + v[2] * r);
            let w = r + (x - y).abs();
            y > 0.0 && x + v[3] * w / 3.0 > 0.0 && y + v[4] * w / 3.0 > 0.0
        };
        out.push(make(id(&format!("spaces.ati_double_difference_{name}"), &lt), su, bounded(cfg), by_k(ks, &two, keep), &tags, move |v| {
            let (k, x) = (v[0] as i32, v[1]);
            let y = x + v[2] * 2f64.powi(-k);
            let (w, e) = env(k, x, y);
            let (x2, y2) = (x + v[3] * w / 3.0, y + v[4] * w / 3.0);
            let lhs = (kn(k, x, y)? - kn(k, x, y2)? - kn(k, x2, y)? + kn(k, x2, y2)?).abs();
            Ok(lhs / (e * ((x - x2).abs() / w).powf(ATI_BETA) * ((y - y2).abs() / w).powf(ATI_BETA)))
        }));
    }
}

// ============================================================================
// Commutators
// ============================================================================

fn commutator_cases(cfg: &VerifyConfig, sp: MeasureSpace, out: &mut Vec<EstimateCase>) {
    let l = sp.lambda();
    let su = Suite::Commutators;
    let lt = [("lambda", l)];
    let p = cfg.p;

    let pts: Vec<Vec<f64>> = [0.5, 1.2, 1.5, 2.0, 2.7, 3.5, 10.0].iter().map(|&x| vec![x]).collect();
    out.push(make(id("commutators.constant_symbol", &lt), su, Criterion::Below { tol: 1e-12 }, scaled(cfg, &pts), &lt, move |v| {
        let (s, x) = (v[0], v[1] * v[0]);
        let f = corpus::bump(1.0).on_support(201)?.dilate(s);
        let spec = KernelSpec::new(KernelKind::Riesz, sp, QuadConfig::default())?;
        Ok(commutator(&spec, &|_| 3.7, &f, x)?.value.abs())
    }));

    let shapes = Arc::new(vec![corpus::bump(1.0), corpus::hat(), corpus::random_pl(cfg.seed)]);
    let base: Vec<Vec<f64>> = (0..shapes.len()).map(|i| vec![i as f64]).collect();

    // TL_{β,r}([b, T] f) / (‖b‖_{Λ^β} ‖f‖_p) with b = x^β
    let ratio = move |kind: KernelKind, beta: f64, r: f64, shape: &Shape, s: f64| -> Result<f64> {
        let f = shape.on_support(41)?.dilate(s);
        let b = move |x: f64| (x / s).powf(beta);
        let lip = lipschitz_norm(&corpus::power(beta).on_domain(1e-12, 1e3, 600, 0)?.dilate(s), beta)?.value;
        let spec = KernelSpec::new(kind, sp, comm_cfg())?;
        let (lo, hi) = f.support();
        let g = sampled(output_points(lo, hi), |x| Ok(commutator(&spec, &b, &f, x)?.value))?;
        let tl = tl_diff_seminorm(&sp, &g, beta, r, default_scales(&g))?.value;
        Ok(tl / (lip * lp_norm(&sp, &f, p)))
    };
    let ratio = Arc::new(ratio);

    for &beta in &cfg.betas {
        let tags = [("lambda", l), ("beta", beta), ("p", p)];
        let (shapes, ratio) = (shapes.clone(), ratio.clone());
        out.push(make(id("commutators.riesz_lipschitz", &tags[..2]), su, bounded(cfg), scaled(cfg, &base), &tags, move |v| {
            ratio(KernelKind::Riesz, beta, p, &shapes[v[1] as usize], v[0])
        }));
    }

    for &alpha in &cfg.alphas {
        for &beta in &cfg.betas {
            if alpha + beta >= 1.0 {
                continue;
            }
            let r = 1.0 / (1.0 / p - alpha / sp.upper_dim());
            let tags = [("lambda", l), ("alpha", alpha), ("beta", beta), ("p", p), ("q", r)];
            let (shapes, ratio) = (shapes.clone(), ratio.clone());
            out.push(make(id("commutators.fractional_lipschitz", &tags[..3]), su, bounded(cfg), scaled(cfg, &base), &tags, move |v| {
                ratio(KernelKind::Fractional { alpha }, beta, r, &shapes[v[1] as usize], v[0])
            }));
        }
    }
}

// ============================================================================
// Endpoint
// ============================================================================

/// Past `u = ln(x/x0) = 20` the tail integrand of the Riesz kernel is
/// constant to rounding (its correction decays like `e^{-2u}`); it is
/// frozen there.
const TAIL_SATURATION: f64 = 20.0;
/// Truncation points `ln(T/x0)` of the log-slope fit.
const TAIL_L: (f64, f64) = (100.0, 1000.0);

fn endpoint_cases(cfg: &VerifyConfig, sp: MeasureSpace, out: &mut Vec<EstimateCase>) {
    let l = sp.lambda();
    let q = sp.upper_dim();
    let su = Suite::Endpoint;
    let lt = [("lambda", l)];
    let one: Vec<Vec<f64>> = vec![vec![]];

    let log_osc = move |s: f64, b: fn(f64) -> f64| {
        let g = GridFunction::from_fn(make_log_grid(1e-6, 1e6, 1200)?, Interp::Linear, b)?.dilate(s);
        log_oscillation_sup(&sp, &g, &LadderSpec::default())
    };
    out.push(make(id("endpoint.log_oscillation_constant", &lt), su, Criterion::Below { tol: 1e-12 }, scaled(cfg, &one), &lt, move |v| {
        Ok(log_osc(v[0], |_| 7.0)?.value)
    }));
    out.push(make(id("endpoint.log_oscillation_log", &lt), su, bounded(cfg), scaled(cfg, &one), &lt, move |v| {
        let r = log_osc(v[0], f64::ln)?;
        Ok(if r.divergent { f64::INFINITY } else { r.value })
    }));
    out.push(make(id("endpoint.log_oscillation_divergent", &lt), su, Criterion::Near { target: 1.0, tol: 0.0 }, scaled(cfg, &one), &lt, move |v| {
        let r = log_osc(v[0], |x| x.ln().sin() * x.ln())?;
        Ok(if r.divergent { 1.0 } else { 0.0 })
    }));

    // ∫_{K1 x0}^{T} |R(x, x0)| dm_λ(x) against ln T
    match fit_sign_constants(&sp) {
        Err(e) => out.push(broken(id("endpoint.riesz_tail_log_growth", &lt), su, e)),
        Ok((_, k1)) => {
            let tags = [("lambda", l), ("K1", k1), ("L1", TAIL_L.0), ("L2", TAIL_L.1)];
            out.push(make(id("endpoint.riesz_tail_log_growth", &lt), su, Criterion::Near { target: 1.0, tol: 0.1 }, scaled(cfg, &one), &tags, move |v| {
                let s = v[0];
                let g = |u: f64| -> Result<f64> {
                    let x = s * u.exp();
                    Ok(riesz(&sp, x, s)?.abs() * x.powf(q))
                };
                let mut err = None;
                let head = integrate_adaptive(
                    |u| match g(u) {
                        Ok(v) => v,
                        Err(e) => {
                            err.get_or_insert(e);
                            0.0
                        }
                    },
                    k1.ln(),
                    TAIL_SATURATION,
                    &QuadConfig::with_tol(1e-14, 1e-10),
                );
                if let Some(e) = err {
                    return Err(e);
                }
                let head = head.ok()?;
                let level = g(TAIL_SATURATION)?;
                let f = |big_l: f64| head + (big_l - TAIL_SATURATION) * level;
                Ok((f(TAIL_L.1) / f(TAIL_L.0)).ln() / (TAIL_L.1 / TAIL_L.0).ln())
            }));
        }
    }

    // ∫ b a dm_λ = 0 for constant b and any atom
    let label = id("endpoint.atom_pairing_constant", &lt);
    let mut rng = rng_for(cfg.seed, &label);
    let mut atoms = Vec::new();
    for _ in 0..10 {
        let c = log_uniform(&mut rng, 0.01, 100.0);
        let r = c * rng.gen_range(0.05..2.0);
        atoms.push(vec![c, r, 0.0]);
        atoms.push(vec![c, r, 1.0]);
    }
    out.push(make(label, su, Criterion::Below { tol: 1e-10 }, scaled(cfg, &atoms), &lt, move |v| {
        let iv = Interval::new(v[1] * v[0], v[2] * v[0])?;
        let shape = if v[3] == 0.0 { AtomShape::HaarLike } else { AtomShape::Smooth };
        let a = make_atom(&sp, &iv, shape)?.values;
        let b = 3.7;
        let pair = integrate_grid(&sp, &a.map(|_, y| b * y));
        let size = integrate_grid(&sp, &a.map(|_, y| y.abs()));
        Ok(pair.abs() / (b * size))
    }));
}
