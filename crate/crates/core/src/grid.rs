//! Rectangular grids and sampled field realizations.

use crate::error::{Error, Result};
use std::io::Write;

/// A rectangular grid: one strictly increasing node list per axis.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Grid {
    axes: Vec<Vec<f64>>,
}

impl Grid {
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Grid> {
        if axes.is_empty() {
            return Err(Error::Domain("grid needs at least one axis".into()));
        }
        for (i, nodes) in axes.iter().enumerate() {
            if nodes.is_empty() {
                return Err(Error::Domain(format!("axis {i} has no nodes")));
            }
            if nodes.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Domain(format!(
                    "axis {i} nodes must be strictly increasing"
                )));
            }
        }
        Ok(Grid { axes })
    }

    /// Uniform grid with `count` nodes per axis on `[lo, hi]`, same per axis.
    pub fn uniform(lo: f64, hi: f64, count: usize, k: usize) -> Result<Grid> {
        if count < 1 || hi <= lo {
            return Err(Error::Domain(format!(
                "uniform grid needs count >= 1 and hi > lo; got count={count}, [{lo}, {hi}]"
            )));
        }
        let nodes: Vec<f64> = if count == 1 {
            vec![lo]
        } else {
            (0..count)
                .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
                .collect()
        };
        Grid::new(vec![nodes; k])
    }

    pub fn k(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, i: usize) -> &[f64] {
        &self.axes[i]
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        false // axes are validated non-empty
    }

    /// Point at flat index, row-major with the last axis fastest.
    pub fn point(&self, mut idx: usize) -> Vec<f64> {
        let k = self.k();
        let mut out = vec![0.0; k];
        for i in (0..k).rev() {
            let n = self.axes[i].len();
            out[i] = self.axes[i][idx % n];
            idx /= n;
        }
        out
    }

    /// All points in flat order.
    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }
}

/// Values of one field realization on a grid.
#[derive(Debug, Clone)]
pub struct SamplePath {
    pub grid: std::sync::Arc<Grid>,
    pub values: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
}

impl SamplePath {
    pub fn new(grid: std::sync::Arc<Grid>, values: Vec<f64>, seed: u64, stream: u64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Domain(format!(
                "value count {} does not match grid size {}",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("sample path contains non-finite values".into()));
        }
        Ok(SamplePath {
            grid,
            values,
            seed,
            stream,
        })
    }

    /// CSV rows: one per grid point, axis coordinates then the value.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let k = self.grid.k();
        let mut header = String::new();
        for i in 0..k {
            header.push_str(&format!("t{i},"));
        }
        header.push_str("value\n");
        w.write_all(header.as_bytes())?;
        for (idx, v) in self.values.iter().enumerate() {
            let p = self.grid.point(idx);
            let mut line = String::new();
            for c in p {
                line.push_str(&format!("{c},"));
            }
            line.push_str(&format!("{v}\n"));
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    /// Compact binary dump, little-endian: `u32 k`, `u64` node count per
    /// axis, `u64 seed`, `u64 stream`, then the values as `f64`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let k = self.grid.k() as u32;
        w.write_all(&k.to_le_bytes())?;
        for i in 0..self.grid.k() {
            w.write_all(&(self.grid.axis(i).len() as u64).to_le_bytes())?;
        }
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.stream.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }
}
