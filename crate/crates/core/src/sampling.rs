//! Exact Gaussian sampling: dense Cholesky paths and a spectral
//! (circulant-embedding) fast path for constant-exponent fBm on uniform
//! grids.

use crate::covariance::CovMatrix;
use crate::error::{Error, Result};
use crate::rng::stream_rng;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Draw `count` independent mean-zero paths with the factored covariance.
/// Replication `r` owns stream `stream0 + r`, so the output is reproducible
/// bit-for-bit from `(seed, stream0)` no matter how the work is scheduled.
pub fn cholesky_sample(
    chol: &CovMatrix,
    count: usize,
    seed: u64,
    stream0: u64,
) -> Vec<Vec<f64>> {
    let n = chol.dim();
    (0..count)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, stream0 + r as u64);
            let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let mut out = vec![0.0; n];
            chol.lower_times(&z, &mut out);
            out
        })
        .collect()
}

/// Relative tolerance for negative circulant eigenvalues: anything in
/// `(-1e-8 * max, 0)` is round-off and clipped to zero; worse is an error.
pub const EMBEDDING_EIGENVALUE_TOL: f64 = 1e-8;

/// Precomputed circulant embedding of fractional Gaussian noise for a
/// uniform grid `{0, step, ..., (n-1) step}` and `Var B(t) = t^alpha`.
pub struct FbmSpectralSampler {
    n: usize,
    m: usize,
    alpha: f64,
    step: f64,
    /// Weight per circulant frequency entering the synthesis.
    weights: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl FbmSpectralSampler {
    pub fn new(alpha: f64, step: f64, n: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::Domain(format!(
                "spectral fBm requires alpha in (0, 2); got {alpha}"
            )));
        }
        if n < 2 {
            return Err(Error::Domain("spectral fBm requires n >= 2".into()));
        }
        if !(step > 0.0) {
            return Err(Error::Domain(format!("step must be positive; got {step}")));
        }
        let incr = n - 1;
        let m = 2 * incr;
        // fGn autocovariance gamma(j), j = 0..incr
        let scale = step.powf(alpha);
        let gamma = |j: usize| -> f64 {
            let j = j as f64;
            0.5 * scale * ((j + 1.0).powf(alpha) - 2.0 * j.powf(alpha) + (j - 1.0).abs().powf(alpha))
        };
        let mut row: Vec<Complex<f64>> = Vec::with_capacity(m);
        for j in 0..=incr {
            row.push(Complex::new(gamma(j), 0.0));
        }
        for j in (1..incr).rev() {
            row.push(Complex::new(gamma(j), 0.0));
        }
        debug_assert_eq!(row.len(), m);
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        fft.process(&mut row);
        let eigen: Vec<f64> = row.iter().map(|c| c.re).collect();
        let max_eig = eigen.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min_eig = eigen.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig < -EMBEDDING_EIGENVALUE_TOL * max_eig {
            return Err(Error::Embedding {
                min_eigenvalue: min_eig,
                tolerance: EMBEDDING_EIGENVALUE_TOL * max_eig,
            });
        }
        let mf = m as f64;
        let mut weights = vec![0.0; incr + 1];
        for (j, w) in weights.iter_mut().enumerate() {
            let lam = eigen[j].max(0.0);
            *w = if j == 0 || j == incr {
                (lam / mf).sqrt()
            } else {
                (lam / (2.0 * mf)).sqrt()
            };
        }
        Ok(FbmSpectralSampler {
            n,
            m,
            alpha,
            step,
            weights,
            fft,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// One exact fBm path (B(0) = 0) using the provided generator.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut buf = vec![Complex::new(0.0, 0.0); self.m];
        let mut out = vec![0.0; self.n];
        self.sample_into(rng, &mut buf, &mut out);
        out
    }

    /// Scratch-reusing variant for hot loops. `buf` must have length `2(n-1)`.
    pub fn sample_into<R: Rng>(
        &self,
        rng: &mut R,
        buf: &mut [Complex<f64>],
        out: &mut [f64],
    ) {
        let incr = self.n - 1;
        debug_assert_eq!(buf.len(), self.m);
        debug_assert_eq!(out.len(), self.n);
        buf[0] = Complex::new(self.weights[0] * rng.sample::<f64, _>(StandardNormal), 0.0);
        for j in 1..incr {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            buf[j] = Complex::new(self.weights[j] * re, self.weights[j] * im);
        }
        buf[incr] = Complex::new(self.weights[incr] * rng.sample::<f64, _>(StandardNormal), 0.0);
        for j in incr + 1..self.m {
            buf[j] = buf[self.m - j].conj();
        }
        self.fft.process(buf);
        // increments are the real parts; the path is their prefix sum
        out[0] = 0.0;
        let mut acc = 0.0;
        for j in 0..incr {
            acc += buf[j].re;
            out[j + 1] = acc;
        }
    }
}

/// One-shot convenience wrapper: an exact fBm sample on a uniform grid using
/// stream `stream` of `seed`.
pub fn fbm_sample_spectral(
    alpha: f64,
    step: f64,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<Vec<f64>> {
    let sampler = FbmSpectralSampler::new(alpha, step, n)?;
    let mut rng = stream_rng(seed, stream);
    Ok(sampler.sample(&mut rng))
}
