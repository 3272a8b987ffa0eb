//! Modified Bessel function `I_μ` of real order `μ >= -1/2` and `ln Γ`.
//!
//! `I_μ` uses the power series for small arguments and the Hankel large-argument
//! expansion beyond a crossover; the exponentially scaled value `e^{-z} I_μ(z)`
//! is the primary entry point so callers can fuse it with Gaussian factors.

use crate::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Shift target for the Stirling series.
const STIRLING_MIN: f64 = 10.0;

// B_{2k} / (2k (2k-1)) for k = 1..8
const STIRLING_COEFFS: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
];

/// `ln Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "log_gamma needs x > 0, got {x}");
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    let mut shift = 0.0;
    let mut y = x;
    if y < STIRLING_MIN {
        let mut prod = 1.0;
        while y < STIRLING_MIN {
            prod *= y;
            y += 1.0;
        }
        shift = prod.ln();
    }
    let inv = 1.0 / y;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut p = inv;
    for c in STIRLING_COEFFS {
        series += c * p;
        p *= inv2;
    }
    (y - 0.5) * y.ln() - y + LN_SQRT_2PI + series - shift
}

pub fn gamma(x: f64) -> f64 {
    log_gamma(x).exp()
}

fn check_order(mu: f64, z: f64) -> Result<()> {
    if !(mu >= -0.5) || !mu.is_finite() {
        return Err(Error::InvalidArgument(format!("Bessel order must be >= -1/2, got {mu}")));
    }
    if !(z >= 0.0) || !z.is_finite() {
        return Err(Error::InvalidArgument(format!("Bessel argument must be >= 0, got {z}")));
    }
    Ok(())
}

/// Power series `Σ (z/2)^{2k+μ} / (k! Γ(k+μ+1))`, multiplied by `e^{-shift}`.
fn series(mu: f64, z: f64, shift: f64) -> f64 {
    let half = 0.5 * z;
    let lead = (mu * half.ln() - shift - log_gamma(mu + 1.0)).exp();
    let q = half * half;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= q / (k * (k + mu));
        sum += term;
        if term < 1e-17 * sum && k > half {
            break;
        }
    }
    lead * sum
}

/// Hankel expansion of `√(2πz) e^{-z} I_μ(z)`; `None` if it does not reach
/// full precision before the terms start to grow.
fn asymptotic_scaled(mu: f64, z: f64) -> Option<f64> {
    let m4 = 4.0 * mu * mu;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..200 {
        let j = (2 * k - 1) as f64;
        term *= -(m4 - j * j) / (k as f64 * 8.0 * z);
        let a = term.abs();
        sum += term;
        if a < 1e-17 * sum.abs() {
            return Some(sum / (2.0 * std::f64::consts::PI * z).sqrt());
        }
        if a > prev {
            return None;
        }
        prev = a;
    }
    None
}

/// Argument above which the large-z expansion is tried first.
pub fn crossover(mu: f64) -> f64 {
    25.0 + mu * mu
}

/// `e^{-z} I_μ(z)`.
pub fn bessel_i_scaled(mu: f64, z: f64) -> Result<f64> {
    check_order(mu, z)?;
    if z == 0.0 {
        return if mu == 0.0 {
            Ok(1.0)
        } else if mu > 0.0 {
            Ok(0.0)
        } else {
            Err(Error::Overflow(format!("I_{mu}(0) is infinite")))
        };
    }
    if z >= crossover(mu) {
        if let Some(v) = asymptotic_scaled(mu, z) {
            return Ok(v);
        }
    }
    Ok(series(mu, z, z))
}

/// `I_μ(z)`; errors with [`Error::Overflow`] once `e^z` leaves the `f64` range.
pub fn bessel_i(mu: f64, z: f64) -> Result<f64> {
    check_order(mu, z)?;
    if z < crossover(mu) {
        if z == 0.0 {
            return bessel_i_scaled(mu, z);
        }
        return Ok(series(mu, z, 0.0));
    }
    let scaled = bessel_i_scaled(mu, z)?;
    let v = scaled.ln() + z;
    if v >= f64::MAX.ln() {
        return Err(Error::Overflow(format!("I_{mu}({z}) exceeds f64 range")));
    }
    Ok(scaled * z.exp())
}

/// `|d/dz (z^{-μ} I_μ(z)) - z^{-μ} I_{μ+1}(z)|`, derivative by central
/// difference with step `1e-5`.
pub fn bessel_i_derivative_identity_check(mu: f64, z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::InvalidArgument("derivative check needs z > 0".into()));
    }
    let h = 1e-5_f64.min(0.5 * z);
    let g = |s: f64| -> Result<f64> { Ok(s.powf(-mu) * bessel_i(mu, s)?) };
    let fd = (g(z + h)? - g(z - h)?) / (2.0 * h);
    Ok((fd - z.powf(-mu) * bessel_i(mu + 1.0, z)?).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    // e^{-z} I_μ(z) at 50 digits (mpmath besseli)
    const ORACLE: &[(f64, f64, f64)] = &[
        (-0.5, 0.001, 25.206119109494142682),
        (-0.5, 0.5, 0.77174333225805363862),
        (-0.5, 5.0, 0.17842051152623320057),
        (-0.5, 26.0, 0.078239018175542678071),
        (-0.5, 700.0, 0.015078600877302686163),
        (0.0, 0.001, 0.9990007495835155594),
        (0.0, 10.0, 0.12783333716342860732),
        (0.0, 24.0, 0.081868288334030613609),
        (0.0, 26.0, 0.078623652040013734864),
        (0.0, 100.0, 0.039944379299096682648),
        (0.3, 0.001, 0.11382469969751624338),
        (0.3, 0.5, 0.46760586418093304082),
        (0.3, 5.0, 0.18166915887022482583),
        (0.3, 24.0, 0.081711584725655618469),
        (0.3, 40.0, 0.06320621825484737047),
        (0.3, 700.0, 0.015080325477307068892),
        (1.2, 0.001, 0.000099134771570320244821),
        (1.2, 5.0, 0.15612073923822148389),
        (1.2, 26.0, 0.076434149228675874912),
        (1.2, 100.0, 0.039656372801235486452),
        (1.5, 0.5, 0.058471662583135768062),
        (1.5, 10.0, 0.11354096377693820774),
        (1.5, 40.0, 0.061501355224241401176),
        (2.5, 0.001, 1.6804072204584045501e-9),
        (2.5, 5.0, 0.092760522193099624674),
        (2.5, 24.0, 0.071678667110758217663),
        (2.5, 40.0, 0.058465711408685896118),
        (2.5, 700.0, 0.015014070620078800994),
    ];

    #[test]
    fn scaled_matches_extended_precision() {
        for &(mu, z, want) in ORACLE {
            let got = bessel_i_scaled(mu, z).unwrap();
            assert!(((got - want) / want).abs() < 1e-12, "mu={mu} z={z}: {got} vs {want}");
        }
    }

    #[test]
    fn order_03_at_10() {
        // mpmath besseli(0.3, 10)
        let want = 2802.362488974458463837881;
        let got = bessel_i(0.3, 10.0).unwrap();
        assert!(((got - want) / want).abs() < 1e-11);
    }

    #[test]
    fn half_order_closed_form() {
        let want = (2.0 / std::f64::consts::PI).sqrt() * 1f64.sinh();
        assert!((bessel_i(0.5, 1.0).unwrap() - want).abs() < 1e-14 * want);
    }

    #[test]
    fn small_argument_leading_term() {
        for mu in [0.0, 0.3, 1.5] {
            let z = 1e-6;
            let lead = (z / 2.0f64).powf(mu) / gamma(mu + 1.0);
            assert!((bessel_i(mu, z).unwrap() / lead - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn series_and_asymptotic_agree_past_crossover() {
        for mu in [-0.5, 0.0, 0.3, 1.5, 2.5] {
            for z in [crossover(mu), 40.0, 60.0] {
                let a = asymptotic_scaled(mu, z).unwrap();
                let s = series(mu, z, z);
                assert!(((a - s) / s).abs() < 2e-14, "mu={mu} z={z}");
            }
        }
    }

    #[test]
    fn overflow_is_signalled() {
        assert!(matches!(bessel_i(0.5, 720.0), Err(Error::Overflow(_))));
        assert!(bessel_i(0.5, 700.0).unwrap().is_finite());
        assert!(bessel_i_scaled(0.5, 1e5).unwrap().is_finite());
        assert!(matches!(bessel_i(-0.5, 0.0), Err(Error::Overflow(_))));
    }

    #[test]
    fn derivative_identity() {
        for (mu, z) in [(0.5, 1.0), (1.2, 5.0), (0.5, 0.01)] {
            assert!(bessel_i_derivative_identity_check(mu, z).unwrap() <= 1e-7);
        }
    }

    #[test]
    fn log_gamma_values() {
        assert_eq!(log_gamma(1.0), 0.0);
        assert_eq!(log_gamma(2.0), 0.0);
        let half = std::f64::consts::PI.sqrt().ln();
        assert!((log_gamma(0.5) - half).abs() < 1e-13 * half);
        // Γ(3.7) = 2.7 · 1.7 · 0.7 · Γ(0.7), base from mpmath loggamma(0.7)
        let base = 0.26086724653166651439_f64;
        let want = base + (2.7f64 * 1.7 * 0.7).ln();
        assert!(((log_gamma(3.7) - want) / want).abs() < 1e-12);
        assert!((log_gamma(3.7) - 1.428072326665387921872381).abs() < 1e-13 * 1.43);
    }
}
