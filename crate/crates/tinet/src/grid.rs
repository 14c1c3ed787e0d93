use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform sampling of the torus [-pi, pi)^nu used for symbol sweeps.
///
/// Nodes are sigma_k = -pi + 2*pi*k/P per axis, k = 0..P-1, so both
/// sigma = -pi (the zone edge) and sigma = 0 are always grid nodes when P
/// is even. Nodes are enumerated lexicographically over the axis indices
/// with the first axis slowest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusGrid {
    #[serde(rename = "nu")]
    dim_nu: usize,
    points_per_axis: usize,
}

impl TorusGrid {
    pub fn new(dim_nu: usize, points_per_axis: usize) -> Result<Self> {
        if dim_nu == 0 {
            return Err(Error::InvalidArgument("lattice dimension nu must be positive".into()));
        }
        if points_per_axis < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 2 points per axis, got {points_per_axis}"
            )));
        }
        Ok(Self { dim_nu, points_per_axis })
    }

    /// Default sweep resolution: 64 points per axis up to nu = 2, 16 beyond.
    pub fn default_for(dim_nu: usize) -> Result<Self> {
        let p = if dim_nu <= 2 { 64 } else { 16 };
        Self::new(dim_nu, p)
    }

    pub fn dim_nu(&self) -> usize {
        self.dim_nu
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn node_count(&self) -> usize {
        self.points_per_axis.pow(self.dim_nu as u32)
    }

    /// Per-axis indices of the flat node index (first axis slowest).
    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        debug_assert!(flat < self.node_count());
        let p = self.points_per_axis;
        let mut rem = flat;
        let mut idx = vec![0usize; self.dim_nu];
        for ax in (0..self.dim_nu).rev() {
            idx[ax] = rem % p;
            rem /= p;
        }
        idx
    }

    /// The node sigma in [-pi, pi)^nu at a flat index.
    pub fn node(&self, flat: usize) -> Vec<f64> {
        let p = self.points_per_axis as f64;
        self.multi_index(flat)
            .into_iter()
            .map(|k| -std::f64::consts::PI + 2.0 * std::f64::consts::PI * k as f64 / p)
            .collect()
    }

    /// Flat index of the node representing -sigma (mod 2*pi).
    pub fn mirror_index(&self, flat: usize) -> usize {
        let p = self.points_per_axis;
        let idx = self.multi_index(flat);
        let mut out = 0usize;
        for k in idx {
            let mk = (p - k) % p;
            out = out * p + mk;
        }
        out
    }

    pub fn nodes(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.node_count()).map(|i| self.node(i))
    }
}
