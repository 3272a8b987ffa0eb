//! Estimate suites. Each case bounds a dimensionless ratio over a sample
//! plan; the fitted constant is its sup, and stability compares the sups
//! of the case's sample groups (two dilation scales, or the scales `k` of
//! an approximation to the identity).

mod cases;
mod corpus;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cases::catalog;

// ============================================================================
// Configuration
// ============================================================================

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub lambdas: Vec<f64>,
    pub betas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub seed: u64,
    /// The two dilation scales compared by the stability factor.
    pub scales: [f64; 2],
    /// Allowed ratio between group sups.
    pub band: f64,
    /// Ceiling on pairwise ratios of the equivalent seminorms.
    pub spaces_band: f64,
    /// Lebesgue exponent of the input functions.
    pub p: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            lambdas: vec![0.5, 1.0, 2.0],
            betas: vec![0.25, 0.5, 0.75],
            alphas: vec![0.25, 0.5],
            seed: 20240611,
            scales: [1.0, 100.0],
            band: 10.0,
            spaces_band: 32.0,
            p: 2.0,
        }
    }
}

impl VerifyConfig {
    /// Parses a TOML key-value file; missing keys keep their defaults.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.lambdas.is_empty() || self.lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return bad(format!("lambdas must be positive, got {:?}", self.lambdas));
        }
        if self.betas.iter().any(|&b| !(b > 0.0 && b < 1.0)) {
            return bad(format!("betas must lie in (0, 1), got {:?}", self.betas));
        }
        if self.alphas.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
            return bad(format!("alphas must lie in (0, 1), got {:?}", self.alphas));
        }
        if self.scales.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return bad(format!("scales must be positive, got {:?}", self.scales));
        }
        if !(self.band >= 1.0 && self.spaces_band >= 1.0) {
            return bad("bands must be at least 1".into());
        }
        if !(self.p > 1.0 && self.p.is_finite()) {
            return bad(format!("p must lie in (1, ∞), got {}", self.p));
        }
        Ok(())
    }
}

// ============================================================================
// Cases
// ============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Kernels,
    Spaces,
    Commutators,
    Endpoint,
    Fractional,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Kernels, Suite::Spaces, Suite::Commutators, Suite::Endpoint, Suite::Fractional];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Kernels => "kernels",
            Suite::Spaces => "spaces",
            Suite::Commutators => "commutators",
            Suite::Endpoint => "endpoint",
            Suite::Fractional => "fractional",
        }
    }

    /// A suite name, or `all`.
    pub fn parse_selection(s: &str) -> Result<Vec<Suite>> {
        if s == "all" {
            return Ok(Suite::ALL.to_vec());
        }
        Ok(vec![s.parse()?])
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown suite {s:?}")))
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Criterion {
    /// Finite sup whose group sups agree within `band`, and at most
    /// `ceiling` when one is set.
    Bounded { band: f64, ceiling: Option<f64> },
    /// Sup at most `tol`.
    Below { tol: f64 },
    /// Every sample within `tol` of `target`.
    Near { target: f64, tol: f64 },
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Criterion::Bounded { band, ceiling: None } => write!(f, "stable within {band}"),
            Criterion::Bounded { band, ceiling: Some(c) } => write!(f, "stable within {band}, at most {c}"),
            Criterion::Below { tol } => write!(f, "below {tol:e}"),
            Criterion::Near { target, tol } => write!(f, "{target} ± {tol}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleGroup {
    pub name: String,
    pub samples: Vec<Vec<f64>>,
}

pub type Quantity = Arc<dyn Fn(&[f64]) -> Result<f64> + Send + Sync>;

/// One inequality: a degree-0 ratio, where it is sampled, and how its sup
/// is judged.
#[derive(Clone)]
pub struct EstimateCase {
    pub id: String,
    pub suite: Suite,
    pub criterion: Criterion,
    pub groups: Vec<SampleGroup>,
    /// A sample and its image under dilation by 2; the two values must
    /// agree to 1%.
    pub dilation_pair: Option<[Vec<f64>; 2]>,
    pub params: BTreeMap<String, f64>,
    pub quantity: Quantity,
}

impl fmt::Debug for EstimateCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EstimateCase")
            .field("id", &self.id)
            .field("suite", &self.suite)
            .field("criterion", &self.criterion)
            .field("samples", &self.sample_count())
            .finish()
    }
}

impl EstimateCase {
    pub fn sample_count(&self) -> usize {
        self.groups.iter().map(|g| g.samples.len()).sum()
    }

    /// The id without its parameter suffix.
    pub fn base_id(&self) -> &str {
        base_id(&self.id)
    }
}

pub fn base_id(id: &str) -> &str {
    id.split('/').next().unwrap_or(id)
}

// ============================================================================
// Reports
// ============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        })
    }
}

/// Non-finite floats as the strings `inf`, `-inf`, `nan`.
mod lossless {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                _ => Err(serde::de::Error::custom(format!("bad float {s:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub id: String,
    pub suite: Suite,
    #[serde(with = "lossless")]
    pub fitted_constant: f64,
    /// The sample attaining the fitted constant, and its group.
    pub witness: Vec<f64>,
    pub witness_group: String,
    #[serde(with = "lossless")]
    pub stability: f64,
    pub verdict: Verdict,
    pub criterion: Criterion,
    pub samples: usize,
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub note: String,
}

/// Relative tolerance of the dilation spot-check.
pub const DILATION_TOL: f64 = 0.01;

fn failed(case: &EstimateCase, note: String) -> EstimateReport {
    EstimateReport {
        id: case.id.clone(),
        suite: case.suite,
        fitted_constant: f64::NAN,
        witness: Vec::new(),
        witness_group: String::new(),
        stability: f64::NAN,
        verdict: Verdict::Fail,
        criterion: case.criterion,
        samples: case.sample_count(),
        params: case.params.clone(),
        note,
    }
}

/// Evaluates every sample of `case` and judges the sup.
pub fn run_case(case: &EstimateCase) -> EstimateReport {
    let flat: Vec<(usize, &Vec<f64>)> =
        case.groups.iter().enumerate().flat_map(|(g, grp)| grp.samples.iter().map(move |s| (g, s))).collect();
    if flat.is_empty() {
        return failed(case, "no samples".into());
    }
    let values: Vec<Result<f64>> = flat.par_iter().map(|(_, s)| (case.quantity)(s)).collect();
    let mut vals = Vec::with_capacity(values.len());
    for (v, (_, s)) in values.into_iter().zip(&flat) {
        match v {
            Ok(v) if v.is_nan() => return failed(case, format!("quantity is NaN at {s:?}")),
            Ok(v) => vals.push(v),
            Err(e) => return failed(case, format!("at {s:?}: {e}")),
        }
    }

    let mut params = case.params.clone();
    let mut notes = Vec::new();

    // sup per group, and the overall witness
    let score = |v: f64| match case.criterion {
        Criterion::Near { target, .. } => (v - target).abs(),
        _ => v,
    };
    let mut group_sup = vec![f64::NEG_INFINITY; case.groups.len()];
    let mut best = 0;
    for (i, (&v, (g, _))) in vals.iter().zip(&flat).enumerate() {
        group_sup[*g] = group_sup[*g].max(v);
        if score(v) > score(vals[best]) {
            best = i;
        }
    }
    let fitted = vals[best];
    let stability = if group_sup.len() < 2 {
        1.0
    } else {
        let hi = group_sup.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = group_sup.iter().cloned().fold(f64::INFINITY, f64::min);
        if hi == lo {
            1.0
        } else if lo > 0.0 {
            hi / lo
        } else {
            f64::INFINITY
        }
    };

    let mut pass = match case.criterion {
        Criterion::Bounded { band, ceiling } => {
            fitted.is_finite() && stability <= band && ceiling.map_or(true, |c| fitted <= c)
        }
        Criterion::Below { tol } => fitted <= tol,
        Criterion::Near { target, tol } => (fitted - target).abs() <= tol,
    };

    if let Some([a, b]) = &case.dilation_pair {
        match ((case.quantity)(a), (case.quantity)(b)) {
            (Ok(qa), Ok(qb)) => {
                let floor = match case.criterion {
                    Criterion::Below { tol } | Criterion::Near { tol, .. } => tol,
                    Criterion::Bounded { .. } => 0.0,
                };
                let diff = (qa - qb).abs();
                let scale = qa.abs().max(qb.abs());
                if scale > 0.0 && scale.is_finite() {
                    params.insert("dilation_mismatch".into(), diff / scale);
                }
                let same = qa == qb || diff <= DILATION_TOL * scale + floor;
                if !same {
                    pass = false;
                    notes.push(format!("dilation check: {qa} vs {qb}"));
                }
            }
            (Err(e), _) | (_, Err(e)) => {
                pass = false;
                notes.push(format!("dilation check: {e}"));
            }
        }
    }

    EstimateReport {
        id: case.id.clone(),
        suite: case.suite,
        fitted_constant: fitted,
        witness: flat[best].1.clone(),
        witness_group: case.groups[flat[best].0].name.clone(),
        stability,
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
        criterion: case.criterion,
        samples: flat.len(),
        params,
        note: notes.join("; "),
    }
}

/// Runs the catalog of `suites` in catalog order.
pub fn run_suite(suites: &[Suite], cfg: &VerifyConfig) -> Result<Vec<EstimateReport>> {
    cfg.validate()?;
    Ok(catalog(cfg, suites).iter().map(run_case).collect())
}

// ============================================================================
// Emission
// ============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    Json,
    Csv,
    MarkdownTable,
}

impl FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "markdown" | "markdown-table" | "md" => Ok(Self::MarkdownTable),
            _ => Err(Error::InvalidArgument(format!("unknown report format {s:?}"))),
        }
    }
}

pub fn emit_report<W: Write>(reports: &[EstimateReport], format: ReportFormat, mut w: W) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::NoCases);
    }
    match format {
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut w, reports).map_err(|e| Error::Io(e.to_string()))?;
            writeln!(w)?;
        }
        ReportFormat::Csv => {
            let mut c = csv::Writer::from_writer(w);
            c.write_record(["id", "fitted_constant", "stability", "verdict"])?;
            for r in reports {
                c.write_record([
                    r.id.clone(),
                    r.fitted_constant.to_string(),
                    r.stability.to_string(),
                    r.verdict.to_string(),
                ])?;
            }
            c.flush()?;
        }
        ReportFormat::MarkdownTable => {
            writeln!(w, "| id | fitted constant | stability | criterion | verdict |")?;
            writeln!(w, "|---|---|---|---|---|")?;
            for r in reports {
                writeln!(
                    w,
                    "| {} | {:.4e} | {:.3} | {} | {} |",
                    r.id, r.fitted_constant, r.stability, r.criterion, r.verdict
                )?;
            }
        }
    }
    Ok(())
}

pub fn read_reports_json(s: &str) -> Result<Vec<EstimateReport>> {
    serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
}
