//! Hölder-exponent profiles with machine-checkable minimum structure.
//!
//! Profiles are restricted to three parametric families so the structural
//! conditions on the exponent (unique minimum with a power expansion, or an
//! exact plateau) hold by construction rather than by unverifiable promise.

use crate::error::{Error, Result};
use serde::Serialize;

/// Evaluation cap keeping the exponent strictly below 2, where the mfBm
/// normalizer has a pole.
pub const ALPHA_CAP: f64 = 2.0 - 1e-6;

/// A per-coordinate exponent function on the field's domain.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaProfile {
    /// alpha(t) = alpha0 everywhere.
    Constant { alpha0: f64 },
    /// alpha(t) = alpha0 + M |t - t0|^beta, unique minimum at t0.
    UniqueMin {
        alpha0: f64,
        t0: f64,
        #[serde(rename = "M")]
        m: f64,
        beta: f64,
        delta_log: f64,
    },
    /// alpha(t) = alpha0 on [a, b], rising polynomially off both edges.
    Plateau {
        alpha0: f64,
        a: f64,
        b: f64,
        #[serde(rename = "M")]
        m: f64,
        beta: f64,
        #[serde(rename = "M_tilde")]
        m_tilde: f64,
        beta_tilde: f64,
        delta_log: f64,
    },
}

impl AlphaProfile {
    /// The global minimum value of the exponent.
    pub fn alpha_min(&self) -> f64 {
        match *self {
            AlphaProfile::Constant { alpha0 }
            | AlphaProfile::UniqueMin { alpha0, .. }
            | AlphaProfile::Plateau { alpha0, .. } => alpha0,
        }
    }

    /// Evaluate the exponent at time `t`, capped at [`ALPHA_CAP`].
    pub fn eval(&self, t: f64) -> f64 {
        let v = match *self {
            AlphaProfile::Constant { alpha0 } => alpha0,
            AlphaProfile::UniqueMin {
                alpha0, t0, m, beta, ..
            } => alpha0 + m * (t - t0).abs().powf(beta),
            AlphaProfile::Plateau {
                alpha0,
                a,
                b,
                m,
                beta,
                m_tilde,
                beta_tilde,
                ..
            } => {
                if t < a {
                    alpha0 + m_tilde * (a - t).powf(beta_tilde)
                } else if t > b {
                    alpha0 + m * (t - b).powf(beta)
                } else {
                    alpha0
                }
            }
        };
        v.min(ALPHA_CAP)
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            AlphaProfile::Constant { .. } => "constant",
            AlphaProfile::UniqueMin { .. } => "unique_min",
            AlphaProfile::Plateau { .. } => "plateau",
        }
    }

    /// The set where the exponent attains its minimum, as an interval of
    /// `[lo, hi]`. Degenerate (point) for the unique-minimum family.
    pub fn minimizer_interval(&self, lo: f64, hi: f64) -> (f64, f64) {
        match *self {
            AlphaProfile::Constant { .. } => (lo, hi),
            AlphaProfile::UniqueMin { t0, .. } => (t0, t0),
            AlphaProfile::Plateau { a, b, .. } => (a, b),
        }
    }

    /// Parameter-range checks against the domain `[lo, hi]`.
    pub fn validate(&self, lo: f64, hi: f64) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(msg));
        let check_alpha0 = |alpha0: f64| -> Result<()> {
            if !(alpha0 > 0.0 && alpha0 <= 2.0) {
                return bad(format!("alpha0 must lie in (0, 2]; got {alpha0}"));
            }
            Ok(())
        };
        match *self {
            AlphaProfile::Constant { alpha0 } => check_alpha0(alpha0),
            AlphaProfile::UniqueMin {
                alpha0,
                t0,
                m,
                beta,
                delta_log,
            } => {
                check_alpha0(alpha0)?;
                if !(t0 >= lo && t0 <= hi) {
                    return bad(format!("t0 = {t0} outside domain [{lo}, {hi}]"));
                }
                if !(m > 0.0) {
                    return bad(format!("M must be positive; got {m}"));
                }
                if !(beta > 0.0) {
                    return bad(format!("beta must be positive; got {beta}"));
                }
                if !(delta_log > 1.0) {
                    return bad(format!("delta_log must exceed 1; got {delta_log}"));
                }
                Ok(())
            }
            AlphaProfile::Plateau {
                alpha0,
                a,
                b,
                m,
                beta,
                m_tilde,
                beta_tilde,
                delta_log,
            } => {
                check_alpha0(alpha0)?;
                if !(a > lo && b < hi && a < b) {
                    return bad(format!(
                        "plateau [a, b] = [{a}, {b}] must satisfy {lo} < a < b < {hi}"
                    ));
                }
                for (name, v) in [
                    ("M", m),
                    ("beta", beta),
                    ("M_tilde", m_tilde),
                    ("beta_tilde", beta_tilde),
                ] {
                    if !(v > 0.0) {
                        return bad(format!("{name} must be positive; got {v}"));
                    }
                }
                if !(delta_log > 1.0) {
                    return bad(format!("delta_log must exceed 1; got {delta_log}"));
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unique_min_shape() {
        let p = AlphaProfile::UniqueMin {
            alpha0: 1.0,
            t0: 0.5,
            m: 1.0,
            beta: 2.0,
            delta_log: 2.0,
        };
        assert_eq!(p.eval(0.5), 1.0);
        assert!(p.eval(0.4) > 1.0);
        assert!((p.eval(0.7) - 1.04).abs() < 1e-15);
        // expansion is exact for the parametric family, up to f64 rounding
        let h = 1e-3;
        let err = (p.eval(0.5 + h) - 1.0 - 1.0 * h.powi(2)).abs();
        assert!(err < 1e-15);
    }

    #[test]
    fn plateau_shape() {
        let p = AlphaProfile::Plateau {
            alpha0: 0.8,
            a: 0.3,
            b: 0.6,
            m: 2.0,
            beta: 1.0,
            m_tilde: 1.0,
            beta_tilde: 2.0,
            delta_log: 1.5,
        };
        assert_eq!(p.eval(0.3), 0.8);
        assert_eq!(p.eval(0.45), 0.8);
        assert_eq!(p.eval(0.6), 0.8);
        assert!((p.eval(0.7) - (0.8 + 2.0 * 0.1)).abs() < 1e-15);
        assert!((p.eval(0.2) - (0.8 + 0.01)).abs() < 1e-15);
    }

    #[test]
    fn evaluation_capped_below_two() {
        let p = AlphaProfile::UniqueMin {
            alpha0: 1.9,
            t0: 0.0,
            m: 50.0,
            beta: 1.0,
            delta_log: 2.0,
        };
        assert!(p.eval(10.0) <= ALPHA_CAP);
    }

    #[test]
    fn validation_rejects_bad_ranges() {
        let p = AlphaProfile::UniqueMin {
            alpha0: 0.0,
            t0: 0.5,
            m: 1.0,
            beta: 2.0,
            delta_log: 2.0,
        };
        assert!(p.validate(0.0, 1.0).is_err());
        let p = AlphaProfile::Plateau {
            alpha0: 1.0,
            a: 0.0,
            b: 0.5,
            m: 1.0,
            beta: 1.0,
            m_tilde: 1.0,
            beta_tilde: 1.0,
            delta_log: 2.0,
        };
        assert!(p.validate(0.0, 1.0).is_err(), "a must be interior");
    }
}
