//! Closed-form supremum tail asymptotics.
//!
//! The tail approximation has the shape `K * u^a * (ln u)^b * Psi(u)`. Every
//! multiplicative factor is recorded as a ledger component with its natural
//! log; the probability is assembled in log space and exponentiated once, so
//! constants spanning many orders of magnitude stay accurate.

use crate::error::{Error, Result};
use crate::fieldspec::FieldSpec;
use crate::profile::AlphaProfile;
use crate::quad::integrate_box;
use crate::special::{ln_gamma, log_mills_survival};
use serde::Serialize;

pub use crate::special::{mills_survival, log_mills_survival as mills_log_survival};

/// An injectable Pickands-type constant, typically a Monte Carlo estimate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PickandsValue {
    pub value: f64,
    pub standard_error: f64,
}

impl PickandsValue {
    pub fn exact(value: f64) -> Self {
        PickandsValue {
            value,
            standard_error: 0.0,
        }
    }
}

/// One multiplicative factor of the tail approximation.
#[derive(Debug, Clone, Serialize)]
pub struct LedgerComponent {
    pub name: String,
    pub value: f64,
    pub ln_value: f64,
}

fn component(name: impl Into<String>, ln_value: f64) -> LedgerComponent {
    LedgerComponent {
        name: name.into(),
        value: ln_value.exp(),
        ln_value,
    }
}

/// Closed-form tail value with its full component ledger.
#[derive(Debug, Clone, Serialize)]
pub struct TailResult {
    pub u: f64,
    /// Power of u: 2 sum_i 1/alpha_i.
    pub alpha_exp: f64,
    /// Power of ln u: -sum_{i < k1} 1/beta_i (nonpositive).
    pub beta_exp: f64,
    /// The constant multiplying u^a (ln u)^b Psi(u).
    pub constant: f64,
    /// First-order 3-sigma interval on the constant from the supplied
    /// Pickands standard errors, when any are nonzero.
    pub constant_interval: Option<(f64, f64)>,
    pub probability: f64,
    pub ln_probability: f64,
    /// Set when u <= e or the approximation exceeds 0.1: the (1 + o(1))
    /// factor is uncontrolled there.
    pub pre_asymptotic: bool,
    pub components: Vec<LedgerComponent>,
}

/// The tail exponents of a field specification: the u-power
/// `2 sum_i 1/alpha_i` and the log-power `-sum_{i<k1} 1/beta_i`.
pub fn compute_exponents(spec: &FieldSpec) -> (f64, f64) {
    let alpha_exp = 2.0 * spec.profiles.iter().map(|p| 1.0 / p.alpha_min()).sum::<f64>();
    let beta_exp = -spec
        .profiles
        .iter()
        .take(spec.k1)
        .map(|p| match *p {
            AlphaProfile::UniqueMin { beta, .. } => 1.0 / beta,
            _ => 0.0,
        })
        .sum::<f64>();
    (alpha_exp, beta_exp)
}

/// Count of unique-minimum coordinates whose minimizer is interior.
fn interior_min_count(spec: &FieldSpec) -> u32 {
    let (lo, hi) = spec.domain();
    spec.profiles
        .iter()
        .take(spec.k1)
        .filter(|p| match **p {
            AlphaProfile::UniqueMin { t0, .. } => t0 > lo && t0 < hi,
            _ => false,
        })
        .count() as u32
}

/// The constant of the tail formula, decomposed into ledger components:
/// `2^q * prod_{i<k1} (alpha_i^2 / (2 M_i))^{1/beta_i} Gamma(1/beta_i + 1)
///  * prod_i H_i * integral over the minimizer set of prod_i C_i^{1/alpha_i}`.
pub fn compute_constant(
    spec: &FieldSpec,
    pickands: &[PickandsValue],
) -> Result<(f64, Vec<LedgerComponent>, Option<(f64, f64)>)> {
    if pickands.len() != spec.k {
        return Err(Error::Domain(format!(
            "{} Pickands constants supplied for a k = {} field",
            pickands.len(),
            spec.k
        )));
    }
    let mut components = Vec::new();
    let q = interior_min_count(spec);
    components.push(component(
        "interior_doubling",
        f64::from(q) * std::f64::consts::LN_2,
    ));
    for (i, p) in spec.profiles.iter().take(spec.k1).enumerate() {
        if let AlphaProfile::UniqueMin { alpha0, m, beta, .. } = *p {
            let inv_beta = 1.0 / beta;
            components.push(component(
                format!("curvature_{i}"),
                inv_beta * (alpha0 * alpha0 / (2.0 * m)).ln(),
            ));
            components.push(component(
                format!("gamma_{i}"),
                ln_gamma(inv_beta + 1.0),
            ));
        }
    }
    for (i, h) in pickands.iter().enumerate() {
        if !(h.value > 0.0) {
            return Err(Error::Domain(format!(
                "Pickands constant {i} must be positive; got {}",
                h.value
            )));
        }
        components.push(component(format!("pickands_{i}"), h.value.ln()));
    }
    components.push(component(
        "scale_integral",
        minimizer_set_integral(spec)?.ln(),
    ));

    let ln_k: f64 = components.iter().map(|c| c.ln_value).sum();
    let k = ln_k.exp();
    let rel: f64 = pickands
        .iter()
        .map(|h| h.standard_error / h.value)
        .sum::<f64>();
    let interval = if rel > 0.0 {
        Some((k * (1.0 - 3.0 * rel), k * (1.0 + 3.0 * rel)))
    } else {
        None
    };
    Ok((k, components, interval))
}

/// Integral of `prod_i C_i(x)^{1/alpha_i}` over the minimizer set: the
/// unique-minimum coordinates are frozen at their minimizers, the rest range
/// over their plateau intervals.
fn minimizer_set_integral(spec: &FieldSpec) -> Result<f64> {
    let (lo, hi) = spec.domain();
    let mut frozen = vec![0.0; spec.k];
    let mut boxes: Vec<(f64, f64)> = Vec::new();
    let mut free_axes: Vec<usize> = Vec::new();
    for (i, p) in spec.profiles.iter().enumerate() {
        let (a, b) = p.minimizer_interval(lo, hi);
        if i < spec.k1 {
            frozen[i] = a;
        } else {
            free_axes.push(i);
            boxes.push((a, b));
        }
    }
    let alpha_mins = spec.alpha_mins();
    let integrand = |rest: &[f64]| -> f64 {
        let mut x = frozen.clone();
        for (slot, &axis) in free_axes.iter().enumerate() {
            x[axis] = rest[slot];
        }
        let mut v = 1.0;
        for i in 0..spec.k {
            v *= spec.variance_scale_at(i, &x).powf(1.0 / alpha_mins[i]);
        }
        v
    };
    if boxes.is_empty() {
        return Ok(integrand(&[]));
    }
    integrate_box(&boxes, 1e-8, &integrand)
}

/// Threshold below which the tail formula's log factor degenerates.
fn check_u(u: f64) -> Result<()> {
    if !(u > 1.0) {
        return Err(Error::Domain(format!(
            "tail evaluation requires u > 1 (the log factor degenerates); got {u}"
        )));
    }
    Ok(())
}

fn assemble(
    u: f64,
    alpha_exp: f64,
    beta_exp: f64,
    constant: f64,
    constant_interval: Option<(f64, f64)>,
    mut components: Vec<LedgerComponent>,
) -> TailResult {
    components.push(component("u_power", alpha_exp * u.ln()));
    components.push(component("log_power", beta_exp * u.ln().ln()));
    components.push(LedgerComponent {
        name: "gaussian_tail".into(),
        value: mills_survival(u),
        ln_value: log_mills_survival(u),
    });
    let ln_probability: f64 = components.iter().map(|c| c.ln_value).sum();
    let probability = ln_probability.exp();
    TailResult {
        u,
        alpha_exp,
        beta_exp,
        constant,
        constant_interval,
        probability,
        ln_probability,
        pre_asymptotic: u <= std::f64::consts::E || probability > 0.1,
        components,
    }
}

/// Tail approximation `K u^a (ln u)^b Psi(u)` for a validated field
/// specification. Values above 1 are still returned, flagged pre-asymptotic.
pub fn tail_asymptotic(
    spec: &FieldSpec,
    pickands: &[PickandsValue],
    u: f64,
) -> Result<TailResult> {
    check_u(u)?;
    let (alpha_exp, beta_exp) = compute_exponents(spec);
    let (constant, components, interval) = compute_constant(spec, pickands)?;
    Ok(assemble(u, alpha_exp, beta_exp, constant, interval, components))
}

/// One coordinate of an aggregate-mfBm field: exponent minimum `alpha`,
/// expansion order `beta` with curvature `m`, minimizer `t0`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AggregateCoord {
    pub alpha: f64,
    pub beta: f64,
    pub m: f64,
    pub t0: f64,
}

/// Parameters of the aggregate of k independent standardized mfBm's.
#[derive(Debug, Clone, Serialize)]
pub struct AggregateMfbmParams {
    pub coords: Vec<AggregateCoord>,
}

impl AggregateMfbmParams {
    pub fn k(&self) -> usize {
        self.coords.len()
    }

    /// Validate: interior minimizers at strictly positive times.
    pub fn validate(&self) -> Result<()> {
        if self.coords.is_empty() {
            return Err(Error::Domain("aggregate needs at least one coordinate".into()));
        }
        for (i, c) in self.coords.iter().enumerate() {
            if !(c.t0 > 0.0) {
                return Err(Error::Domain(format!(
                    "coordinate {i}: minimizer must be strictly positive; got {}",
                    c.t0
                )));
            }
            if !(c.alpha > 0.0 && c.alpha < 2.0 && c.beta > 0.0 && c.m > 0.0) {
                return Err(Error::Domain(format!(
                    "coordinate {i}: require alpha in (0,2), beta > 0, M > 0"
                )));
            }
        }
        Ok(())
    }

    /// The equivalent field specification: unique-minimum profiles with the
    /// standardized-mfBm local scale `t^{-alpha(t)}/(2k)` per coordinate, on
    /// a positive hypercube containing every minimizer in its interior.
    pub fn induced_spec(&self) -> FieldSpec {
        let k = self.k();
        let t0_min = self.coords.iter().map(|c| c.t0).fold(f64::INFINITY, f64::min);
        let t0_max = self
            .coords
            .iter()
            .map(|c| c.t0)
            .fold(f64::NEG_INFINITY, f64::max);
        let origin = 0.5 * t0_min;
        let edge = 1.5 * t0_max - origin;
        FieldSpec {
            k,
            k1: k,
            origin,
            edge,
            profiles: self
                .coords
                .iter()
                .map(|c| AlphaProfile::UniqueMin {
                    alpha0: c.alpha,
                    t0: c.t0,
                    m: c.m,
                    beta: c.beta,
                    delta_log: 2.0,
                })
                .collect(),
            variance_scales: (0..k)
                .map(|i| crate::fieldspec::VarianceScale::MfbmLocal {
                    axis: i,
                    prefactor: 1.0 / (2.0 * k as f64),
                })
                .collect(),
        }
    }
}

/// Tail of the aggregate of k independent standardized mfBm's:
/// `2^k (2k)^{-sum 1/alpha_i} prod_i [H_i Gamma(1/beta_i + 1)
///  (alpha_i^2/(2 M_i))^{1/beta_i} / t_i^0] u^{sum 2/alpha_i}
///  (ln u)^{-sum 1/beta_i} Psi(u)`.
pub fn aggregate_mfbm_tail(
    params: &AggregateMfbmParams,
    pickands: &[PickandsValue],
    u: f64,
) -> Result<TailResult> {
    params.validate()?;
    check_u(u)?;
    let k = params.k();
    if pickands.len() != k {
        return Err(Error::Domain(format!(
            "{} Pickands constants for k = {k}",
            pickands.len()
        )));
    }
    let mut components = Vec::new();
    components.push(component(
        "dimension_doubling",
        k as f64 * std::f64::consts::LN_2,
    ));
    let inv_alpha_sum: f64 = params.coords.iter().map(|c| 1.0 / c.alpha).sum();
    components.push(component(
        "aggregation_scale",
        -inv_alpha_sum * (2.0 * k as f64).ln(),
    ));
    for (i, (c, h)) in params.coords.iter().zip(pickands).enumerate() {
        if !(h.value > 0.0) {
            return Err(Error::Domain(format!(
                "Pickands constant {i} must be positive; got {}",
                h.value
            )));
        }
        components.push(component(format!("pickands_{i}"), h.value.ln()));
        components.push(component(
            format!("gamma_{i}"),
            ln_gamma(1.0 / c.beta + 1.0),
        ));
        components.push(component(
            format!("curvature_{i}"),
            (c.alpha * c.alpha / (2.0 * c.m)).ln() / c.beta,
        ));
        components.push(component(format!("min_time_{i}"), -c.t0.ln()));
    }
    let ln_k: f64 = components.iter().map(|c| c.ln_value).sum();
    let constant = ln_k.exp();
    let rel: f64 = pickands.iter().map(|h| h.standard_error / h.value).sum();
    let interval = if rel > 0.0 {
        Some((constant * (1.0 - 3.0 * rel), constant * (1.0 + 3.0 * rel)))
    } else {
        None
    };
    let alpha_exp = 2.0 * inv_alpha_sum;
    let beta_exp = -params.coords.iter().map(|c| 1.0 / c.beta).sum::<f64>();
    Ok(assemble(u, alpha_exp, beta_exp, constant, interval, components))
}

/// Parameters of the chi-process built from k independent standardized
/// mfBm copies sharing one exponent profile.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChiParams {
    pub k: usize,
    /// Exponent minimum alpha(t0).
    pub alpha_t0: f64,
    pub beta: f64,
    pub m: f64,
    pub t0: f64,
}

/// Tail of the chi-process supremum:
/// `2^{5/2 - k/2 - 1/beta - 1/alpha} H alpha^{2/beta} Gamma(1/beta + 1)
///  / (M^{1/beta} t0 Gamma(k/2)) u^{k - 1 + 2/alpha} (ln u)^{-1/beta} Psi(u)`.
pub fn chi_tail(params: &ChiParams, pickands: &PickandsValue, u: f64) -> Result<TailResult> {
    check_u(u)?;
    if params.k == 0 {
        return Err(Error::Domain("chi-process needs k >= 1".into()));
    }
    if !(params.alpha_t0 > 0.0 && params.alpha_t0 < 2.0) {
        return Err(Error::Domain(format!(
            "alpha(t0) must lie in (0, 2); got {}",
            params.alpha_t0
        )));
    }
    if !(params.t0 > 0.0 && params.beta > 0.0 && params.m > 0.0) {
        return Err(Error::Domain(
            "chi-process requires t0 > 0, beta > 0, M > 0".into(),
        ));
    }
    if !(pickands.value > 0.0) {
        return Err(Error::Domain(format!(
            "Pickands constant must be positive; got {}",
            pickands.value
        )));
    }
    let a = params.alpha_t0;
    let b = params.beta;
    let kf = params.k as f64;
    let mut components = Vec::new();
    components.push(component(
        "dyadic_prefactor",
        (2.5 - 0.5 * kf - 1.0 / b - 1.0 / a) * std::f64::consts::LN_2,
    ));
    components.push(component("pickands", pickands.value.ln()));
    components.push(component("alpha_power", (2.0 / b) * a.ln()));
    components.push(component("gamma", ln_gamma(1.0 / b + 1.0)));
    components.push(component("curvature", -params.m.ln() / b));
    components.push(component("min_time", -params.t0.ln()));
    components.push(component("sphere_gamma", -ln_gamma(0.5 * kf)));
    let ln_k: f64 = components.iter().map(|c| c.ln_value).sum();
    let constant = ln_k.exp();
    let rel = pickands.standard_error / pickands.value;
    let interval = if rel > 0.0 {
        Some((constant * (1.0 - 3.0 * rel), constant * (1.0 + 3.0 * rel)))
    } else {
        None
    };
    let alpha_exp = kf - 1.0 + 2.0 / a;
    let beta_exp = -1.0 / b;
    Ok(assemble(u, alpha_exp, beta_exp, constant, interval, components))
}
