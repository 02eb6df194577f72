//! Covariance kernels and their numerical verification.
//!
//! Implements the mfBm covariance and its standardized form, the aggregate
//! field and cylinder-field kernels built from them, a ratio checker for the
//! local-stationarity expansion, and covariance matrix construction with a
//! jitter-escalating Cholesky factorization.

use crate::error::{Error, Result};
use crate::fieldspec::{FieldSpec, VarianceScale};
use crate::profile::AlphaProfile;
use crate::special::mfbm_normalizer;
use rayon::prelude::*;

/// Covariance of a multifractional Brownian motion at times `s`, `t`:
/// `D(a) (s^a + t^a - |t-s|^a) / 2` with `a` the average of the exponent at
/// the two times.
pub fn mfbm_cov(s: f64, t: f64, profile: &AlphaProfile) -> Result<f64> {
    if s < 0.0 || t < 0.0 {
        return Err(Error::Domain(format!(
            "mfbm_cov requires nonnegative times; got ({s}, {t})"
        )));
    }
    // canonical order makes cov(s, t) and cov(t, s) bit-identical
    let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
    let a = 0.5 * profile.eval(lo) + 0.5 * profile.eval(hi);
    let d = mfbm_normalizer(a)?;
    Ok(0.5 * d * (lo.powf(a) + hi.powf(a) - (hi - lo).powf(a)))
}

/// Variance of the mfBm at time `t`.
pub fn mfbm_variance(t: f64, profile: &AlphaProfile) -> Result<f64> {
    let a = profile.eval(t);
    Ok(mfbm_normalizer(a)? * t.powf(a))
}

/// Covariance of the standardized (unit-variance) mfBm. Undefined at zero
/// times, where the variance vanishes.
pub fn std_mfbm_cov(s: f64, t: f64, profile: &AlphaProfile) -> Result<f64> {
    if !(s > 0.0 && t > 0.0) {
        return Err(Error::Domain(format!(
            "std_mfbm_cov requires strictly positive times; got ({s}, {t})"
        )));
    }
    let num = mfbm_cov(s, t, profile)?;
    let vs = mfbm_variance(s, profile)?;
    let vt = mfbm_variance(t, profile)?;
    Ok(num / (vs * vt).sqrt())
}

/// Covariance of the aggregate field `k^{-1/2} sum_i oB_i(t_i)`:
/// the average of the per-coordinate standardized covariances.
pub fn aggregate_cov(t: &[f64], s: &[f64], spec: &FieldSpec) -> Result<f64> {
    let k = spec.k;
    debug_assert_eq!(t.len(), k);
    debug_assert_eq!(s.len(), k);
    let mut acc = 0.0;
    for i in 0..k {
        acc += std_mfbm_cov(t[i], s[i], &spec.profiles[i])?;
    }
    Ok(acc / k as f64)
}

const UNIT_NORM_TOL: f64 = 1e-10;

/// Covariance of the cylinder field `Y(t, u) = sum_i oB_i(t) u_i`:
/// the standardized mfBm covariance times the inner product of directions.
/// Direction vectors must already be unit-norm; they are validated, not
/// renormalized.
pub fn chi_cylinder_cov(
    p: (f64, &[f64]),
    q: (f64, &[f64]),
    profile: &AlphaProfile,
) -> Result<f64> {
    for (name, dir) in [("first", p.1), ("second", q.1)] {
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::Domain(format!(
                "{name} direction vector has norm {norm}; must be unit within {UNIT_NORM_TOL:e}"
            )));
        }
    }
    let dot: f64 = p.1.iter().zip(q.1).map(|(a, b)| a * b).sum();
    Ok(std_mfbm_cov(p.0, q.0, profile)? * dot)
}

/// A covariance kernel on the field domain. Blanket-implemented for plain
/// closures so tests can pass ad-hoc kernels.
pub trait CovKernel: Sync {
    fn cov(&self, s: &[f64], t: &[f64]) -> f64;
}

impl<F> CovKernel for F
where
    F: Fn(&[f64], &[f64]) -> f64 + Sync,
{
    fn cov(&self, s: &[f64], t: &[f64]) -> f64 {
        self(s, t)
    }
}

/// Concrete kernel induced by a field specification.
#[derive(Debug, Clone)]
pub enum FieldKernel {
    /// Exact aggregate of standardized mfBm coordinates. Selected when every
    /// variance scale is the mfBm-local form with prefactor 1/(2k).
    AggregateMfbm(FieldSpec),
    /// Generic locally stationary demo kernel
    /// `exp(-sum_i C_i(mid) |t_i - s_i|^{a_i})` with `a_i` the average of the
    /// exponent profile at the two endpoints and `mid` the segment midpoint.
    LocalExp(FieldSpec),
}

impl FieldKernel {
    pub fn spec(&self) -> &FieldSpec {
        match self {
            FieldKernel::AggregateMfbm(s) | FieldKernel::LocalExp(s) => s,
        }
    }
}

impl CovKernel for FieldKernel {
    fn cov(&self, s: &[f64], t: &[f64]) -> f64 {
        match self {
            FieldKernel::AggregateMfbm(spec) => {
                aggregate_cov(t, s, spec).expect("aggregate kernel on validated domain")
            }
            FieldKernel::LocalExp(spec) => {
                let mut dist = 0.0;
                let mut mid = vec![0.0; spec.k];
                for i in 0..spec.k {
                    mid[i] = 0.5 * (s[i] + t[i]);
                }
                for i in 0..spec.k {
                    let h = (t[i] - s[i]).abs();
                    if h > 0.0 {
                        let a = 0.5 * spec.profiles[i].eval(s[i])
                            + 0.5 * spec.profiles[i].eval(t[i]);
                        dist += spec.variance_scale_at(i, &mid) * h.powf(a);
                    }
                }
                (-dist).exp()
            }
        }
    }
}

/// Choose the kernel realizing a field specification: the exact aggregate
/// construction when the scales identify one, otherwise the generic local
/// exponential form.
pub fn field_kernel(spec: &FieldSpec) -> FieldKernel {
    let two_k = 2.0 * spec.k as f64;
    let is_aggregate = spec.variance_scales.iter().enumerate().all(|(i, s)| {
        matches!(s, VarianceScale::MfbmLocal { axis, prefactor }
            if *axis == i && (prefactor - 1.0 / two_k).abs() < 1e-12)
    });
    if is_aggregate {
        FieldKernel::AggregateMfbm(spec.clone())
    } else {
        FieldKernel::LocalExp(spec.clone())
    }
}

/// Trace of the local-stationarity ratio at a sequence of radii.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ExpansionReport {
    pub point: Vec<f64>,
    pub radii: Vec<f64>,
    /// (1 - cov(t, t+s)) / sum_i C_i(t) |s_i|^{alpha_i(t_i)} at each radius.
    pub ratios: Vec<f64>,
    pub tolerance: f64,
    /// Ratio within tolerance of 1 at the smallest radius, with the error
    /// non-increasing over the last three radii.
    pub converged: bool,
}

/// Default tolerance for the expansion check: 10% at the smallest radius.
pub const D4_DEFAULT_TOL: f64 = 0.1;

/// Log-spaced radii from 1e-1 down to 1e-4.
pub fn default_d4_radii() -> Vec<f64> {
    let n = 13;
    (0..n)
        .map(|i| 10f64.powf(-1.0 - 3.0 * i as f64 / (n - 1) as f64))
        .collect()
}

/// Check the expansion `1 - cov(t, t+s) ~ sum_i C_i(t)|s_i|^{alpha_i(t_i)}`
/// by evaluating the two sides along `s = radius * (1, ..., 1)`.
///
/// Flags rather than fails: a kernel violating the expansion yields
/// `converged = false` with the full ratio trace.
pub fn verify_d4_expansion<K: CovKernel + ?Sized>(
    spec: &FieldSpec,
    kernel: &K,
    t: &[f64],
    radii: &[f64],
    tolerance: f64,
) -> ExpansionReport {
    let mut ratios = Vec::with_capacity(radii.len());
    let mut shifted = t.to_vec();
    for &r in radii {
        for i in 0..spec.k {
            shifted[i] = t[i] + r;
        }
        let num = 1.0 - kernel.cov(t, &shifted);
        let mut den = 0.0;
        for i in 0..spec.k {
            den += spec.variance_scale_at(i, t) * r.powf(spec.profiles[i].eval(t[i]));
        }
        ratios.push(num / den);
    }
    let errors: Vec<f64> = ratios.iter().map(|r| (r - 1.0).abs()).collect();
    let at_smallest = *errors.last().unwrap_or(&f64::INFINITY);
    let tail_monotone = if errors.len() >= 3 {
        let e = &errors[errors.len() - 3..];
        e[0] >= e[1] - 1e-12 && e[1] >= e[2] - 1e-12
    } else {
        true
    };
    ExpansionReport {
        point: t.to_vec(),
        radii: radii.to_vec(),
        ratios,
        tolerance,
        converged: at_smallest <= tolerance && tail_monotone,
    }
}

/// Jitter ladder: zero, then 1e-12 escalating tenfold up to 1e-6.
const JITTER_LADDER: [f64; 8] = [0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// A factored covariance matrix (lower triangle of M + jitter*I = L L^T,
/// packed row-major).
#[derive(Debug, Clone)]
pub struct CovMatrix {
    n: usize,
    factor: Vec<f64>,
    jitter: f64,
}

impl CovMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Diagonal jitter that was required for the factorization.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// y = L z.
    pub fn lower_times(&self, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(z.len(), self.n);
        debug_assert_eq!(out.len(), self.n);
        let mut row = 0usize;
        for i in 0..self.n {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += self.factor[row + j] * z[j];
            }
            out[i] = acc;
            row += i + 1;
        }
    }

    /// max_i (L z)_i without materializing the vector.
    pub fn sup_lower_times(&self, z: &[f64]) -> f64 {
        let mut best = f64::NEG_INFINITY;
        let mut row = 0usize;
        for i in 0..self.n {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += self.factor[row + j] * z[j];
            }
            if acc > best {
                best = acc;
            }
            row += i + 1;
        }
        best
    }

    /// Reconstructed entry (i, j) of L L^T, for verification.
    pub fn reconstruct(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let ri = i * (i + 1) / 2;
        let rj = j * (j + 1) / 2;
        (0..=j).map(|k| self.factor[ri + k] * self.factor[rj + k]).sum()
    }
}

/// Build the covariance matrix of `kernel` on `points` and factor it,
/// escalating diagonal jitter if needed. Grid points must be pairwise
/// distinct, matching the strict-inequality requirement on the kernel.
pub fn build_cov_matrix<K: CovKernel + ?Sized>(
    points: &[Vec<f64>],
    kernel: &K,
) -> Result<CovMatrix> {
    let n = points.len();
    if n == 0 {
        return Err(Error::Domain("empty grid".into()));
    }
    // duplicate detection via lexicographic sort of indices
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .partial_cmp(&points[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    for w in order.windows(2) {
        if points[w[0]] == points[w[1]] {
            return Err(Error::Domain(format!(
                "coincident grid points at indices {} and {}",
                w[0], w[1]
            )));
        }
    }

    // packed lower triangle, rows in parallel
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..=i)
                .map(|j| {
                    if i == j {
                        kernel.cov(&points[i], &points[i])
                    } else {
                        kernel.cov(&points[i], &points[j])
                    }
                })
                .collect()
        })
        .collect();
    let mut base = Vec::with_capacity(n * (n + 1) / 2);
    for r in rows {
        base.extend_from_slice(&r);
    }

    for &jitter in JITTER_LADDER.iter() {
        let mut m = base.clone();
        if jitter > 0.0 {
            let mut row = 0usize;
            for i in 0..n {
                m[row + i] += jitter;
                row += i + 1;
            }
        }
        if cholesky_in_place(&mut m, n).is_ok() {
            return Ok(CovMatrix {
                n,
                factor: m,
                jitter,
            });
        }
    }
    let min_eig = min_eigenvalue_estimate(&base, n);
    Err(Error::Factorization {
        max_jitter: *JITTER_LADDER.last().unwrap(),
        min_eigenvalue: min_eig,
    })
}

/// In-place Cholesky of a packed lower triangle. Fails on a non-positive
/// pivot.
fn cholesky_in_place(m: &mut [f64], n: usize) -> std::result::Result<(), usize> {
    for i in 0..n {
        let ri = i * (i + 1) / 2;
        for j in 0..=i {
            let rj = j * (j + 1) / 2;
            let mut sum = m[ri + j];
            for k in 0..j {
                sum -= m[ri + k] * m[rj + k];
            }
            if j < i {
                m[ri + j] = sum / m[rj + j];
            } else {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(i);
                }
                m[ri + i] = sum.sqrt();
            }
        }
    }
    Ok(())
}

/// Deterministic power-iteration estimate of the smallest eigenvalue of a
/// packed symmetric matrix, used only in the factorization failure report.
fn min_eigenvalue_estimate(m: &[f64], n: usize) -> f64 {
    // Gershgorin upper bound on the spectrum
    let entry = |i: usize, j: usize| -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        m[i * (i + 1) / 2 + j]
    };
    let mut sigma = f64::NEG_INFINITY;
    for i in 0..n {
        let s: f64 = (0..n).map(|j| entry(i, j).abs()).sum();
        sigma = sigma.max(s);
    }
    // power iteration on sigma*I - M
    let mut v: Vec<f64> = (0..n)
        .map(|i| {
            let mut s = i as u64 ^ 0x9E37_79B9;
            crate::rng::splitmix64(&mut s);
            (s as f64 / u64::MAX as f64) - 0.5
        })
        .collect();
    let mut lambda = 0.0;
    for _ in 0..200 {
        let mut w = vec![0.0; n];
        for i in 0..n {
            let mut acc = sigma * v[i];
            for j in 0..n {
                acc -= entry(i, j) * v[j];
            }
            w[i] = acc;
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        lambda = norm;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
    }
    sigma - lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldspec::FieldSpec;

    fn bm_profile() -> AlphaProfile {
        AlphaProfile::Constant { alpha0: 1.0 }
    }

    #[test]
    fn mfbm_zero_time_vanishes() {
        let p = bm_profile();
        for &t in &[0.0, 0.5, 2.0] {
            assert_eq!(mfbm_cov(0.0, t, &p).unwrap(), 0.0);
        }
    }

    #[test]
    fn mfbm_variance_is_two_pi_t_for_unit_exponent() {
        // D(1) = 2 pi, so Var B(t) = 2 pi t
        let p = bm_profile();
        let v = mfbm_cov(3.0, 3.0, &p).unwrap();
        assert!((v - 2.0 * std::f64::consts::PI * 3.0).abs() < 1e-12);
    }

    #[test]
    fn mfbm_cross_matches_brownian_scaling() {
        let p = bm_profile();
        let c = mfbm_cov(1.0, 4.0, &p).unwrap();
        assert!((c - 2.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn std_cov_examples() {
        let p = bm_profile();
        assert!((std_mfbm_cov(2.0, 2.0, &p).unwrap() - 1.0).abs() < 1e-14);
        assert!((std_mfbm_cov(1.0, 4.0, &p).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn std_cov_local_expansion() {
        // (1 - cov(t, t+h)) / (t^{-a} h^a / 2) -> 1
        let p = AlphaProfile::Constant { alpha0: 1.3 };
        let t = 1.7;
        let mut prev = f64::INFINITY;
        for &h in &[1e-2, 1e-3, 1e-4] {
            let lhs = 1.0 - std_mfbm_cov(t, t + h, &p).unwrap();
            let rhs = 0.5 * t.powf(-1.3) * h.powf(1.3);
            let err = (lhs / rhs - 1.0).abs();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn std_cov_rejects_zero_time() {
        assert!(std_mfbm_cov(0.0, 1.0, &bm_profile()).is_err());
    }

    fn two_coord_spec() -> FieldSpec {
        FieldSpec::from_json_str(
            r#"{"k":2,"k1":0,"T":4.0,"origin":0.5,
                "profiles":[{"kind":"constant","alpha0":1.0},{"kind":"constant","alpha0":1.0}],
                "variance_scales":[{"form":"constant","value":1.0},{"form":"constant","value":1.0}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn aggregate_examples() {
        let spec = two_coord_spec();
        let v = aggregate_cov(&[1.0, 1.0], &[1.0, 1.0], &spec).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
        let v = aggregate_cov(&[1.0, 1.0], &[4.0, 4.0], &spec).unwrap();
        assert!((v - 0.5).abs() < 1e-14);
    }

    #[test]
    fn chi_cov_product_form() {
        let p = bm_profile();
        let u = [1.0, 0.0];
        let v = [0.0, 1.0];
        assert!((chi_cylinder_cov((2.0, &u), (2.0, &u), &p).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(chi_cylinder_cov((1.0, &u), (4.0, &v), &p).unwrap(), 0.0);
        let c = chi_cylinder_cov((1.0, &u), (4.0, &u), &p).unwrap();
        assert!((c - 0.5).abs() < 1e-14);
    }

    #[test]
    fn chi_cov_rejects_non_unit() {
        let p = bm_profile();
        let u = [1.0, 1.0];
        assert!(chi_cylinder_cov((1.0, &u), (1.0, &u), &p).is_err());
    }

    #[test]
    fn d4_stationary_exponential() {
        let spec = FieldSpec::from_json_str(
            r#"{"k":1,"k1":0,"T":1.0,
                "profiles":[{"kind":"constant","alpha0":1.0}],
                "variance_scales":[{"form":"constant","value":1.0}]}"#,
        )
        .unwrap();
        let kernel = field_kernel(&spec);
        let radii = default_d4_radii();
        let rep = verify_d4_expansion(&spec, &kernel, &[0.4], &radii, D4_DEFAULT_TOL);
        assert!(rep.converged, "ratios: {:?}", rep.ratios);
        assert!((rep.ratios.last().unwrap() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn d4_flags_corrupted_kernel() {
        let spec = FieldSpec::from_json_str(
            r#"{"k":1,"k1":0,"T":1.0,
                "profiles":[{"kind":"constant","alpha0":1.0}],
                "variance_scales":[{"form":"constant","value":1.0}]}"#,
        )
        .unwrap();
        // 1 - |s| |ln |s||: the ratio diverges like |ln s|
        let bad = |s: &[f64], t: &[f64]| {
            let h = (t[0] - s[0]).abs();
            if h == 0.0 {
                1.0
            } else {
                1.0 - h * h.ln().abs()
            }
        };
        let radii = default_d4_radii();
        let rep = verify_d4_expansion(&spec, &bad, &[0.4], &radii, D4_DEFAULT_TOL);
        assert!(!rep.converged);
    }

    #[test]
    fn build_single_point() {
        let kernel = |_: &[f64], _: &[f64]| 1.0;
        let m = build_cov_matrix(&[vec![0.3]], &kernel).unwrap();
        assert_eq!(m.dim(), 1);
        assert_eq!(m.jitter(), 0.0);
        assert!((m.reconstruct(0, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn build_rejects_coincident_points() {
        let kernel = |_: &[f64], _: &[f64]| 1.0;
        let err = build_cov_matrix(&[vec![0.3], vec![0.3]], &kernel).unwrap_err();
        assert!(err.to_string().contains("coincident"));
    }

    #[test]
    fn markov_kernel_factors_without_jitter() {
        let pts: Vec<Vec<f64>> = (0..64).map(|i| vec![i as f64 / 63.0]).collect();
        let kernel = |s: &[f64], t: &[f64]| (-(t[0] - s[0]).abs()).exp();
        let m = build_cov_matrix(&pts, &kernel).unwrap();
        assert_eq!(m.jitter(), 0.0);
        // spot-check reconstruction
        let want = kernel(&pts[5], &pts[40]);
        assert!((m.reconstruct(40, 5) - want).abs() < 1e-10);
    }

    #[test]
    fn factorization_failure_reports_eigenvalue() {
        // indefinite matrix: strong negative correlation triangle
        let pts = vec![vec![0.0], vec![1.0], vec![2.0]];
        let kernel = |s: &[f64], t: &[f64]| if s[0] == t[0] { 1.0 } else { -0.9 };
        match build_cov_matrix(&pts, &kernel) {
            Err(Error::Factorization { min_eigenvalue, .. }) => {
                assert!(min_eigenvalue < -0.5, "estimate {min_eigenvalue}");
            }
            other => panic!("expected factorization failure, got {other:?}"),
        }
    }
}
