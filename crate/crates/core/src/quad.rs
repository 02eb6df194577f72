//! Adaptive Gauss–Kronrod quadrature, nested for tensor-product boxes.

use crate::error::{Error, Result};

// 15-point Kronrod nodes (positive half) with embedded 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_2,
    0.949_107_912_342_758_524_5,
    0.864_864_423_359_769_072_8,
    0.741_531_185_599_394_439_9,
    0.586_087_235_467_691_130_3,
    0.405_845_151_377_397_166_9,
    0.207_784_955_007_898_467_6,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_96,
    0.063_092_092_629_978_553_29,
    0.104_790_010_322_250_183_8,
    0.140_653_259_715_525_918_7,
    0.169_004_726_639_267_902_8,
    0.190_350_578_064_785_409_9,
    0.204_432_940_075_298_892_4,
    0.209_482_141_084_727_828_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_3,
    0.279_705_391_489_276_667_9,
    0.381_830_050_505_118_945_0,
    0.417_959_183_673_469_387_8,
];

/// One G7/K15 panel: returns (kronrod, |kronrod - gauss|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (i, &x) in XGK.iter().enumerate().take(7) {
        let lo = f(c - h * x);
        let hi = f(c + h * x);
        kron += WGK[i] * (lo + hi);
        if i % 2 == 1 {
            gauss += WG[i / 2] * (lo + hi);
        }
    }
    (kron * h, (kron - gauss).abs() * h.abs())
}

/// Adaptive bisection to a relative tolerance.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    let (whole, _) = gk15(f, a, b);
    let floor = 1e-300;
    let tol0 = rel_tol * whole.abs().max(floor);
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        tol: f64,
        depth: usize,
    ) -> Result<f64> {
        let (est, err) = gk15(f, a, b);
        if err <= tol || err <= 1e-16 * est.abs() {
            return Ok(est);
        }
        if depth >= 50 {
            return Err(Error::Quadrature(format!(
                "panel [{a}, {b}] did not converge (err {err:.3e} > tol {tol:.3e})"
            )));
        }
        let c = 0.5 * (a + b);
        Ok(rec(f, a, c, 0.5 * tol, depth + 1)? + rec(f, c, b, 0.5 * tol, depth + 1)?)
    }
    rec(f, a, b, tol0, 0)
}

/// Adaptive tensor-product integral of `f` over a box. Dimension recurses
/// outermost-first; each level subdivides adaptively.
pub fn integrate_box(
    bounds: &[(f64, f64)],
    rel_tol: f64,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Result<f64> {
    fn rec(
        bounds: &[(f64, f64)],
        prefix: &[f64],
        rel_tol: f64,
        f: &(dyn Fn(&[f64]) -> f64 + Sync),
    ) -> Result<f64> {
        match bounds.split_first() {
            None => Ok(f(prefix)),
            Some((&(a, b), rest)) => {
                let failure: std::cell::Cell<Option<Error>> = std::cell::Cell::new(None);
                let g = |x: f64| -> f64 {
                    let mut point = Vec::with_capacity(prefix.len() + 1);
                    point.extend_from_slice(prefix);
                    point.push(x);
                    match rec(rest, &point, rel_tol, f) {
                        Ok(v) => v,
                        Err(e) => {
                            failure.set(Some(e));
                            0.0
                        }
                    }
                };
                let out = integrate_adaptive(&g, a, b, rel_tol)?;
                if let Some(e) = failure.take() {
                    return Err(e);
                }
                Ok(out)
            }
        }
    }
    rec(bounds, &[], rel_tol, f)
}

/// Gauss–Hermite rule for the physicists' weight `exp(-x^2)`.
///
/// Nodes are found by sign-change scan plus Newton polishing on the
/// orthonormal Hermite recurrence; weights use the Christoffel sum. Used for
/// the smooth coordinate of the conditional path integrals.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    // orthonormal Hermite value and derivative at x
    let eval = |x: f64| -> (f64, f64) {
        let mut p_prev = 0.0f64;
        let mut p = std::f64::consts::PI.powf(-0.25);
        for j in 0..n {
            let jf = j as f64;
            let next = x * (2.0 / (jf + 1.0)).sqrt() * p - (jf / (jf + 1.0)).sqrt() * p_prev;
            p_prev = p;
            p = next;
        }
        // d/dx p_n = sqrt(2n) p_{n-1}
        (p, (2.0 * n as f64).sqrt() * p_prev)
    };
    let hi = (2.0 * n as f64 + 2.0).sqrt();
    let mut roots = Vec::with_capacity(n);
    // positive roots by scanning for sign changes
    let scan_n = 40 * n;
    let mut prev_x = if n % 2 == 1 { 0.0 } else { 1e-12 };
    let mut prev_v = eval(prev_x).0;
    if n % 2 == 1 {
        roots.push(0.0);
    }
    for i in 1..=scan_n {
        let x = hi * i as f64 / scan_n as f64;
        let v = eval(x).0;
        if prev_v == 0.0 || v.signum() != prev_v.signum() {
            // Newton polish from the midpoint
            let mut r = 0.5 * (prev_x + x);
            for _ in 0..60 {
                let (p, dp) = eval(r);
                let step = p / dp;
                r -= step;
                if step.abs() < 1e-15 * (1.0 + r.abs()) {
                    break;
                }
            }
            roots.push(r);
        }
        prev_x = x;
        prev_v = v;
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-10);
    // mirror negatives
    let mut nodes: Vec<f64> = roots.iter().filter(|&&r| r > 1e-14).map(|&r| -r).collect();
    nodes.extend(roots.iter().cloned());
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(nodes.len(), n, "Hermite root scan found {} of {n}", nodes.len());
    // Christoffel weights: w = 1 / sum_{k<n} p_k(x)^2
    let weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let mut p_prev = 0.0f64;
            let mut p = std::f64::consts::PI.powf(-0.25);
            let mut sum = p * p;
            for j in 0..n - 1 {
                let jf = j as f64;
                let next = x * (2.0 / (jf + 1.0)).sqrt() * p - (jf / (jf + 1.0)).sqrt() * p_prev;
                p_prev = p;
                p = next;
                sum += p * p;
            }
            1.0 / sum
        })
        .collect();
    (nodes, weights)
}

/// Gauss–Hermite rule transformed to the standard normal weight:
/// `sum w_i f(z_i) ~ E[f(Z)]`, `Z ~ N(0, 1)`.
pub fn gauss_hermite_normal(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_hermite(n);
    let sqrt2 = std::f64::consts::SQRT_2;
    let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
    (
        x.iter().map(|&v| v * sqrt2).collect(),
        w.iter().map(|&v| v * inv_sqrt_pi).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let v = integrate_adaptive(&|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 1e-12).unwrap();
        assert!((v - (4.0 - 4.0 + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn exp_integral() {
        let v = integrate_adaptive(&|x| x.exp(), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - (std::f64::consts::E - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn kink_handled_adaptively() {
        let v = integrate_adaptive(&|x: f64| x.abs().sqrt(), -1.0, 1.0, 1e-10).unwrap();
        assert!((v - 4.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn box_integral() {
        // int over [0,1]^3 of x y^2 z^3 = 1/2 * 1/3 * 1/4
        let v = integrate_box(&[(0.0, 1.0); 3], 1e-10, &|p: &[f64]| {
            p[0] * p[1] * p[1] * p[2] * p[2] * p[2]
        })
        .unwrap();
        assert!((v - 1.0 / 24.0).abs() < 1e-9);
    }

    #[test]
    fn hermite_rule_moments() {
        let (z, w) = gauss_hermite_normal(32);
        assert_eq!(z.len(), 32);
        let total: f64 = w.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let m2: f64 = z.iter().zip(&w).map(|(zi, wi)| wi * zi * zi).sum();
        assert!((m2 - 1.0).abs() < 1e-12);
        // E[exp(cZ)] = exp(c^2 / 2)
        for &c in &[0.5, 1.5, 3.0] {
            let got: f64 = z.iter().zip(&w).map(|(zi, wi)| wi * (c * zi).exp()).sum();
            let want = (0.5 * c * c).exp();
            assert!(
                (got / want - 1.0).abs() < 1e-9,
                "c={c}: got {got}, want {want}"
            );
        }
    }
}
