//! Special functions: log-Gamma, Gaussian survival function and its logarithm.
//!
//! `mills_survival` switches representation at |u| = 8: below, it is
//! `erfc(u/sqrt(2))/2`; above, the asymptotic expansion of the Mills ratio is
//! summed to its smallest term, which is far below 1e-12 in that range.

use crate::error::{Error, Result};

/// Natural log of the Gamma function for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Gamma function for x > 0, via log-Gamma.
pub fn gamma(x: f64) -> f64 {
    libm::exp(libm::lgamma(x))
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Standard normal cumulative distribution function.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_741_8;

/// Standard normal survival function Psi(u) = P(N > u).
///
/// For u <= 8 this is `erfc(u/sqrt(2))/2`; for u > 8 the value is rebuilt from
/// [`log_mills_survival`], whose asymptotic series is accurate to well below
/// 1e-12 there. For u around 38 the result is subnormal, so the log form is
/// the meaningful representation at the extreme end.
pub fn mills_survival(u: f64) -> f64 {
    if u <= 8.0 {
        0.5 * libm::erfc(u * std::f64::consts::FRAC_1_SQRT_2)
    } else {
        libm::exp(log_mills_survival(u))
    }
}

/// Natural logarithm of the standard normal survival function.
pub fn log_mills_survival(u: f64) -> f64 {
    if u <= 8.0 {
        libm::log(mills_survival(u))
    } else {
        // ln Psi(u) = -u^2/2 - ln(u sqrt(2 pi)) + ln S(u), with S the
        // asymptotic Mills series 1 - 1/u^2 + 3/u^4 - 15/u^6 + ...
        -0.5 * u * u - libm::log(u) - LN_SQRT_2PI + libm::log(mills_asymptotic_series(u))
    }
}

/// Asymptotic series S(u) = sum_m (-1)^m (2m-1)!!/u^{2m}, truncated at its
/// smallest term. At u = 8 the smallest term is ~1e-14; it shrinks rapidly
/// for larger u.
fn mills_asymptotic_series(u: f64) -> f64 {
    let inv_u2 = 1.0 / (u * u);
    let mut sum = 1.0;
    let mut term = 1.0_f64;
    let mut prev_abs = f64::INFINITY;
    for m in 1..200 {
        term *= -((2 * m - 1) as f64) * inv_u2;
        if term.abs() >= prev_abs {
            break; // smallest term reached; stop before divergence
        }
        prev_abs = term.abs();
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// D(x) = 2*pi / (Gamma(x+1) sin(pi x / 2)) for x in (0, 2), in log space.
///
/// `sin(pi x / 2)` is evaluated as `sin(pi (2 - x) / 2)` for x > 1 so the
/// factor stays accurate as x approaches the pole at 2.
pub fn mfbm_normalizer(x: f64) -> Result<f64> {
    if !(x > 0.0 && x < 2.0) {
        return Err(Error::Domain(format!(
            "mfBm normalizer D(x) requires x in (0, 2); got {x}"
        )));
    }
    let sin_term = if x <= 1.0 {
        libm::sin(std::f64::consts::FRAC_PI_2 * x)
    } else {
        libm::sin(std::f64::consts::FRAC_PI_2 * (2.0 - x))
    };
    let ln_d = libm::log(2.0 * std::f64::consts::PI) - ln_gamma(x + 1.0) - libm::log(sin_term);
    Ok(libm::exp(ln_d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_known_values() {
        assert!((gamma(1.0) - 1.0).abs() < 1e-14);
        assert!((gamma(0.5) - std::f64::consts::PI.sqrt()).abs() < 1e-14);
        // Gamma(3/2) = sqrt(pi)/2
        assert!((gamma(1.5) - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-14);
    }

    #[test]
    fn mills_at_zero_and_symmetry() {
        assert_eq!(mills_survival(0.0), 0.5);
        for &u in &[0.3, 1.0, 2.7, 4.4, 5.9] {
            let s = mills_survival(u) + mills_survival(-u);
            assert!((s - 1.0).abs() < 1e-12, "u={u}: {s}");
        }
    }

    #[test]
    fn mills_matches_quantile() {
        // Psi(1.959964) ~ 0.025
        assert!((mills_survival(1.959964) - 0.025).abs() < 1e-6);
    }

    #[test]
    fn mills_log_continuity_at_switch() {
        // erfc route just below 8, series route just above; they must agree.
        let lo = log_mills_survival(8.0);
        let hi = log_mills_survival(8.0 + 1e-9);
        assert!((lo - hi).abs() < 1e-7, "{lo} vs {hi}");
    }

    #[test]
    fn normalizer_at_one_is_two_pi() {
        // D(1) = 2 pi / (Gamma(2) sin(pi/2)) = 2 pi
        let d = mfbm_normalizer(1.0).unwrap();
        assert!((d - 2.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn normalizer_rejects_poles() {
        assert!(mfbm_normalizer(0.0).is_err());
        assert!(mfbm_normalizer(2.0).is_err());
        assert!(mfbm_normalizer(1.999_999).is_ok());
    }
}
