//! Direct Monte Carlo estimation of supremum tail probabilities and the
//! harness comparing them against the closed-form asymptotics.
//!
//! Paths are generated from the exact covariance factor, reduced to their
//! supremum and discarded. Hit counting uses the strict inequality
//! `sup > u`. Replication r draws from stream r, and hit counts merge
//! associatively, so totals are reproducible for any worker count.

use crate::asymptotics::{tail_asymptotic, PickandsValue, TailResult};
use crate::covariance::{build_cov_matrix, field_kernel, std_mfbm_cov, CovMatrix};
use crate::error::{Error, Result};
use crate::fieldspec::FieldSpec;
use crate::grid::Grid;
use crate::profile::AlphaProfile;
use crate::rng::stream_rng;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

const WILSON_Z: f64 = 1.959_963_984_540_054;

/// 95% Wilson score interval for a binomial proportion.
pub fn wilson_ci(hits: u64, reps: u64) -> (f64, f64) {
    if reps == 0 {
        return (0.0, 1.0);
    }
    let n = reps as f64;
    let p = hits as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Per-axis grid step resolving the excursion scale at level `u`:
/// `0.1 * u^{-2/alpha_min}`.
pub fn grid_step_rule(u: f64, alpha_min: f64) -> f64 {
    0.1 * u.powf(-2.0 / alpha_min)
}

/// Guard on total grid size for dense factorization.
const MAX_GRID_POINTS: usize = 20_000;

/// Uniform grid satisfying the step rule for level `u` on the spec's domain.
pub fn grid_for_u(spec: &FieldSpec, u: f64) -> Result<Grid> {
    let (lo, hi) = spec.domain();
    let mut axes = Vec::with_capacity(spec.k);
    for p in &spec.profiles {
        let step = grid_step_rule(u, p.alpha_min());
        let count = ((hi - lo) / step).ceil() as usize + 1;
        let nodes: Vec<f64> = (0..count)
            .map(|j| lo + (hi - lo) * j as f64 / (count - 1) as f64)
            .collect();
        axes.push(nodes);
    }
    let grid = Grid::new(axes)?;
    if grid.len() > MAX_GRID_POINTS {
        return Err(Error::Domain(format!(
            "grid for u = {u} needs {} points (> {MAX_GRID_POINTS}); \
             use a coarser explicit grid",
            grid.len()
        )));
    }
    Ok(grid)
}

/// Monte Carlo estimate of a supremum exceedance probability.
#[derive(Debug, Clone, Serialize)]
pub struct McTailEstimate {
    pub u: f64,
    pub reps: u64,
    pub hits: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub grid_points: usize,
    /// Diagonal jitter the factorization needed (zero for clean kernels).
    pub jitter: f64,
    pub seed: u64,
    /// Set when the expected hit count at the asymptotic value is below 10.
    pub underpowered: bool,
}

/// Estimate `P(sup over the grid > u)` for the field realizing `spec`.
///
/// `expected_prob`, when supplied (typically the asymptotic value), powers
/// the underpowered-run warning flag.
pub fn estimate_sup_tail(
    spec: &FieldSpec,
    u: f64,
    grid: &Grid,
    reps: u64,
    seed: u64,
    expected_prob: Option<f64>,
) -> Result<McTailEstimate> {
    if reps == 0 {
        return Err(Error::Domain("reps must be positive".into()));
    }
    let kernel = field_kernel(spec);
    let points = grid.points();
    let chol = build_cov_matrix(&points, &kernel)?;
    let hits = count_sup_exceedances(&chol, u, reps, seed);
    let estimate = hits as f64 / reps as f64;
    let (ci_low, ci_high) = wilson_ci(hits, reps);
    let underpowered = expected_prob
        .map(|p| p * (reps as f64) < 10.0)
        .unwrap_or(false);
    Ok(McTailEstimate {
        u,
        reps,
        hits,
        estimate,
        ci_low,
        ci_high,
        grid_points: points.len(),
        jitter: chol.jitter(),
        seed,
        underpowered,
    })
}

/// Count replications whose discrete supremum strictly exceeds `u`.
/// Integer counts merge associatively, so the total is independent of the
/// parallel schedule.
pub fn count_sup_exceedances(chol: &CovMatrix, u: f64, reps: u64, seed: u64) -> u64 {
    let n = chol.dim();
    (0..reps)
        .into_par_iter()
        .map_init(
            || vec![0.0f64; n],
            |z, r| {
                let mut rng = stream_rng(seed, r);
                for zi in z.iter_mut() {
                    *zi = rng.sample(StandardNormal);
                }
                u64::from(chol.sup_lower_times(z) > u)
            },
        )
        .sum()
}

/// One row of the validation table.
#[derive(Debug, Clone, Serialize)]
pub struct RatioRow {
    pub u: f64,
    pub mc_estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub asymptotic: f64,
    pub ratio: f64,
    pub hits: u64,
    pub grid_points: usize,
    pub underpowered: bool,
    pub pre_asymptotic: bool,
}

/// Monte Carlo versus asymptotic comparison across thresholds.
#[derive(Debug, Clone, Serialize)]
pub struct RatioReport {
    pub rows: Vec<RatioRow>,
    pub reps: u64,
    pub seed: u64,
    /// Step override used for every axis, if any; otherwise the u-adaptive
    /// rule chose each grid.
    pub step_override: Option<f64>,
}

impl RatioReport {
    /// CSV with the fixed header `u,mc_estimate,ci_lo,ci_hi,asymptotic,ratio`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("u,mc_estimate,ci_lo,ci_hi,asymptotic,ratio\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.u, r.mc_estimate, r.ci_low, r.ci_high, r.asymptotic, r.ratio
            ));
        }
        out
    }
}

/// Run the MC/asymptotic comparison at each threshold of `u_list`.
///
/// Each u gets its own grid from the step rule (or `step_override`), its own
/// replication streams, and an asymptotic value with the supplied Pickands
/// constants.
pub fn ratio_experiment(
    spec: &FieldSpec,
    u_list: &[f64],
    reps: u64,
    pickands: &[PickandsValue],
    seed: u64,
    step_override: Option<f64>,
) -> Result<RatioReport> {
    let mut rows = Vec::with_capacity(u_list.len());
    for (i, &u) in u_list.iter().enumerate() {
        let asym: TailResult = tail_asymptotic(spec, pickands, u)?;
        let grid = match step_override {
            Some(step) => {
                let (lo, hi) = spec.domain();
                let count = ((hi - lo) / step).ceil() as usize + 1;
                Grid::uniform(lo, hi, count, spec.k)?
            }
            None => grid_for_u(spec, u)?,
        };
        // distinct stream block per threshold
        let est = estimate_sup_tail(
            spec,
            u,
            &grid,
            reps,
            seed.wrapping_add((i as u64) << 32),
            Some(asym.probability),
        )?;
        rows.push(RatioRow {
            u,
            mc_estimate: est.estimate,
            ci_low: est.ci_low,
            ci_high: est.ci_high,
            asymptotic: asym.probability,
            ratio: est.estimate / asym.probability,
            hits: est.hits,
            grid_points: est.grid_points,
            underpowered: est.underpowered,
            pre_asymptotic: asym.pre_asymptotic,
        });
    }
    Ok(RatioReport {
        rows,
        reps,
        seed,
        step_override,
    })
}

/// Per-replication record of the chi-process identity check.
#[derive(Debug, Clone, Serialize)]
pub struct ChiIdentityReport {
    pub reps: u64,
    /// Per-replication supremum of the Euclidean norm over the time grid.
    pub chi_sups: Vec<f64>,
    /// Per-replication supremum of the exact-direction evaluation
    /// (normalized path vector plugged in as the direction).
    pub exact_dir_sups: Vec<f64>,
    /// Per-replication supremum of the direction-grid evaluation.
    pub dir_sups: Vec<f64>,
    /// Largest |norm - exact-direction inner product| over all reps and
    /// times: the Cauchy-Schwarz equality case, zero up to rounding.
    pub max_identity_gap: f64,
    /// Mean of the nonnegative per-replication gaps chi_sup - dir_sup.
    pub mean_direction_gap: f64,
    pub max_direction_gap: f64,
}

/// Check `sup_t |B(t)| = sup_{t,u} <B(t), u>` on shared paths: the exact
/// (normalized-vector) direction achieves the norm at every time, while a
/// finite direction grid under-shoots by a gap that refinement shrinks.
pub fn chi_sup_check(
    profile: &AlphaProfile,
    k: usize,
    time_nodes: &[f64],
    directions: &[Vec<f64>],
    reps: u64,
    seed: u64,
) -> Result<ChiIdentityReport> {
    if k == 0 {
        return Err(Error::Domain("chi-process needs k >= 1".into()));
    }
    if time_nodes.iter().any(|&t| t <= 0.0) {
        return Err(Error::Domain(
            "standardized mfBm requires strictly positive times".into(),
        ));
    }
    for d in directions {
        if d.len() != k {
            return Err(Error::Domain("direction dimension mismatch".into()));
        }
        let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::Domain(format!(
                "direction must be unit-norm; got {norm}"
            )));
        }
    }
    let points: Vec<Vec<f64>> = time_nodes.iter().map(|&t| vec![t]).collect();
    let profile_clone = profile.clone();
    let kernel = move |s: &[f64], t: &[f64]| {
        std_mfbm_cov(s[0], t[0], &profile_clone).expect("positive times")
    };
    let chol = build_cov_matrix(&points, &kernel)?;
    let n = time_nodes.len();

    struct RepOut {
        chi_sup: f64,
        exact_sup: f64,
        dir_sup: f64,
        identity_gap: f64,
    }
    let outs: Vec<RepOut> = (0..reps)
        .into_par_iter()
        .map_init(
            || (vec![0.0f64; n], vec![vec![0.0f64; n]; k]),
            |(z, paths), r| {
                let mut rng = stream_rng(seed, r);
                for path in paths.iter_mut() {
                    for zi in z.iter_mut() {
                        *zi = rng.sample(StandardNormal);
                    }
                    chol.lower_times(z, path);
                }
                let mut chi_sup = f64::NEG_INFINITY;
                let mut exact_sup = f64::NEG_INFINITY;
                let mut dir_sup = f64::NEG_INFINITY;
                let mut identity_gap: f64 = 0.0;
                for j in 0..n {
                    let norm = (0..k).map(|i| paths[i][j] * paths[i][j]).sum::<f64>().sqrt();
                    chi_sup = chi_sup.max(norm);
                    // exact-direction evaluation: plug in B(t)/|B(t)|
                    let exact = if norm > 0.0 {
                        (0..k).map(|i| paths[i][j] * (paths[i][j] / norm)).sum::<f64>()
                    } else {
                        0.0
                    };
                    exact_sup = exact_sup.max(exact);
                    identity_gap = identity_gap.max((norm - exact).abs());
                    for d in directions {
                        let v = (0..k).map(|i| paths[i][j] * d[i]).sum::<f64>();
                        if v > dir_sup {
                            dir_sup = v;
                        }
                    }
                }
                RepOut {
                    chi_sup,
                    exact_sup,
                    dir_sup,
                    identity_gap,
                }
            },
        )
        .collect();
    let chi_sups: Vec<f64> = outs.iter().map(|o| o.chi_sup).collect();
    let exact_dir_sups: Vec<f64> = outs.iter().map(|o| o.exact_sup).collect();
    let dir_sups: Vec<f64> = outs.iter().map(|o| o.dir_sup).collect();
    let max_identity_gap = outs.iter().map(|o| o.identity_gap).fold(0.0, f64::max);
    let gaps: Vec<f64> = outs.iter().map(|o| o.chi_sup - o.dir_sup).collect();
    let mean_direction_gap = gaps.iter().sum::<f64>() / gaps.len().max(1) as f64;
    let max_direction_gap = gaps.iter().cloned().fold(0.0, f64::max);
    Ok(ChiIdentityReport {
        reps,
        chi_sups,
        exact_dir_sups,
        dir_sups,
        max_identity_gap,
        mean_direction_gap,
        max_direction_gap,
    })
}

/// Evenly spaced unit vectors on the circle, for the k = 2 direction grids.
pub fn circle_directions(m: usize) -> Vec<Vec<f64>> {
    (0..m)
        .map(|j| {
            let th = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
            vec![th.cos(), th.sin()]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::mills_survival;

    fn stationary_spec() -> FieldSpec {
        let s = FieldSpec::from_json_str(
            r#"{"k":1,"k1":0,"T":1.0,
            "profiles":[{"kind":"constant","alpha0":1.0}],
            "variance_scales":[{"form":"constant","value":1.0}]}"#,
        )
        .unwrap();
        s.validate().unwrap();
        s
    }

    #[test]
    fn wilson_interval_contains_estimate() {
        let (lo, hi) = wilson_ci(42, 1000);
        let p = 0.042;
        assert!(lo < p && p < hi);
        assert!(lo > 0.028 && hi < 0.06);
    }

    #[test]
    fn single_point_grid_matches_gaussian_tail() {
        let spec = stationary_spec();
        let grid = Grid::new(vec![vec![0.5]]).unwrap();
        let u = 1.0;
        let est = estimate_sup_tail(&spec, u, &grid, 40_000, 5, None).unwrap();
        let want = mills_survival(u);
        let se = (want * (1.0 - want) / 40_000f64).sqrt();
        assert!(
            (est.estimate - want).abs() < 3.0 * se,
            "{} vs {want}",
            est.estimate
        );
    }

    #[test]
    fn deep_negative_threshold_always_hits() {
        let spec = stationary_spec();
        let grid = Grid::uniform(0.0, 1.0, 8, 1).unwrap();
        let est = estimate_sup_tail(&spec, -10.0, &grid, 500, 2, None).unwrap();
        assert_eq!(est.hits, 500);
        assert_eq!(est.estimate, 1.0);
    }

    #[test]
    fn hit_totals_reproducible() {
        let spec = stationary_spec();
        let grid = Grid::uniform(0.0, 1.0, 16, 1).unwrap();
        let a = estimate_sup_tail(&spec, 2.0, &grid, 4000, 9, None).unwrap();
        let b = estimate_sup_tail(&spec, 2.0, &grid, 4000, 9, None).unwrap();
        assert_eq!(a.hits, b.hits);
    }

    #[test]
    fn underpowered_flag() {
        let spec = stationary_spec();
        let grid = Grid::uniform(0.0, 1.0, 8, 1).unwrap();
        let est = estimate_sup_tail(&spec, 4.0, &grid, 200, 3, Some(1e-4)).unwrap();
        assert!(est.underpowered);
    }

    #[test]
    fn step_rule_and_grid() {
        let step = grid_step_rule(3.0, 1.0);
        assert!((step - 0.1 / 9.0).abs() < 1e-15);
        let spec = stationary_spec();
        let grid = grid_for_u(&spec, 3.0).unwrap();
        assert!(grid.axis(0).len() >= 91);
        let actual_step = grid.axis(0)[1] - grid.axis(0)[0];
        assert!(actual_step <= step + 1e-15);
    }

    #[test]
    fn ratio_experiment_produces_rows_and_csv() {
        let spec = stationary_spec();
        let h = [PickandsValue::exact(1.0)];
        let rep = ratio_experiment(&spec, &[2.0, 2.5], 2000, &h, 7, Some(0.05)).unwrap();
        assert_eq!(rep.rows.len(), 2);
        for row in &rep.rows {
            assert!(row.ratio.is_finite() && row.ratio > 0.0);
        }
        let csv = rep.to_csv();
        assert!(csv.starts_with("u,mc_estimate,ci_lo,ci_hi,asymptotic,ratio\n"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn chi_identity_and_direction_refinement() {
        let profile = AlphaProfile::Constant { alpha0: 1.0 };
        let nodes: Vec<f64> = (1..=12).map(|j| 0.5 + j as f64 * 0.04).collect();
        let dirs8 = circle_directions(8);
        let dirs16 = circle_directions(16);
        let rep8 = chi_sup_check(&profile, 2, &nodes, &dirs8, 400, 21).unwrap();
        let rep16 = chi_sup_check(&profile, 2, &nodes, &dirs16, 400, 21).unwrap();
        assert!(rep8.max_identity_gap < 1e-12);
        assert!(rep8.mean_direction_gap >= 0.0);
        assert!(
            rep16.mean_direction_gap <= rep8.mean_direction_gap,
            "16-dir gap {} vs 8-dir {}",
            rep16.mean_direction_gap,
            rep8.mean_direction_gap
        );
        // shared paths: per-rep sups dominate the direction-grid evaluation
        for (c, d) in rep8.chi_sups.iter().zip(&rep8.dir_sups) {
            assert!(c + 1e-12 >= *d);
        }
    }
}
