//! Spatio-temporal transfer functions and stability sweeps.
//!
//! At each spatial frequency sigma the network reduces to a
//! finite-dimensional system with matrices A(sigma)..D(sigma); this module
//! evaluates the per-frequency transfer function
//! F(s, sigma) = C(sigma) (sI - A(sigma))^{-1} B(sigma) + D(sigma)
//! and sweeps the spectral abscissa of A(sigma) over a torus grid.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::la::{self, CMatrix};
use crate::model::NetworkModel;

/// Eigenvalue real parts must lie below -HURWITZ_TOL at every grid node
/// for a Hurwitz verdict. A grid-based verdict, not a continuum certificate.
pub const HURWITZ_TOL: f64 = 1e-9;

/// Resolvent solves with a worse condition estimate than this are treated
/// as singular.
pub const RESOLVENT_COND_LIMIT: f64 = 1e12;

/// One evaluation of the transfer function on the imaginary axis.
#[derive(Debug, Clone)]
pub struct TransferSample {
    pub omega: f64,
    pub sigma: Vec<f64>,
    pub value: CMatrix,
}

/// Grid sweep of the spectral abscissa of A(sigma).
#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub grid: TorusGrid,
    /// max over grid nodes of max Re spectrum(A(sigma))
    pub abscissa: f64,
    pub worst_sigma: Vec<f64>,
    pub hurwitz: bool,
}

/// F(s, sigma) = C(sigma) (sI - A(sigma))^{-1} B(sigma) + D(sigma).
///
/// Models with a zero B or C stencil short-circuit to D(sigma), so purely
/// static (feedthrough-only) models never touch the resolvent.
pub fn transfer_function(model: &NetworkModel, s: Complex64, sigma: &[f64]) -> Result<CMatrix> {
    let d = model.d().symbol(sigma)?;
    if model.b().is_zero() || model.c().is_zero() {
        return Ok(d);
    }
    let a = model.a().symbol(sigma)?;
    let b = model.b().symbol(sigma)?;
    let c = model.c().symbol(sigma)?;
    let n = model.state_dim();
    let mut resolvent = -a;
    for i in 0..n {
        resolvent[(i, i)] += s;
    }
    let (smax, smin) = la::extreme_singular_values(&resolvent);
    let cond = if smin == 0.0 { f64::INFINITY } else { smax / smin };
    if !cond.is_finite() || cond >= RESOLVENT_COND_LIMIT {
        return Err(Error::ResolventSingular { s, sigma: sigma.to_vec(), cond });
    }
    let x = resolvent.lu().solve(&b).ok_or(Error::ResolventSingular {
        s,
        sigma: sigma.to_vec(),
        cond,
    })?;
    Ok(c * x + d)
}

/// Sweep max Re spectrum(A(sigma)) over the grid.
///
/// The worst node is deterministic: ties are broken toward the smallest
/// flat node index, so parallel and serial sweeps agree.
pub fn spectral_abscissa(model: &NetworkModel, grid: &TorusGrid) -> Result<StabilityReport> {
    if grid.dim_nu() != model.dim_nu() {
        return Err(Error::DimensionMismatch {
            what: "grid lattice dimension",
            expected: model.dim_nu(),
            got: grid.dim_nu(),
        });
    }
    let per_node: Result<Vec<(usize, f64)>> = (0..grid.node_count())
        .into_par_iter()
        .map(|flat| {
            let sigma = grid.node(flat);
            let a = model.a().symbol(&sigma)?;
            let worst = la::max_real_eigenvalue(&a).ok_or(Error::NumericalFailure {
                what: "eigensolve of A(sigma)",
                sigma: sigma.clone(),
            })?;
            Ok((flat, worst))
        })
        .collect();
    let per_node = per_node?;
    let (flat, abscissa) = per_node
        .into_iter()
        .reduce(|acc, cur| {
            if cur.1 > acc.1 || (cur.1 == acc.1 && cur.0 < acc.0) {
                cur
            } else {
                acc
            }
        })
        .expect("grid has at least one node");
    Ok(StabilityReport {
        grid: grid.clone(),
        abscissa,
        worst_sigma: grid.node(flat),
        hurwitz: abscissa < -HURWITZ_TOL,
    })
}

/// Evaluate F(i omega, sigma) over the cartesian product of a frequency
/// list and the grid, in deterministic (omega-major) order.
pub fn transfer_sweep(
    model: &NetworkModel,
    omegas: &[f64],
    grid: &TorusGrid,
) -> Result<Vec<TransferSample>> {
    let mut out = Vec::with_capacity(omegas.len() * grid.node_count());
    for &omega in omegas {
        let s = Complex64::new(0.0, omega);
        for sigma in grid.nodes() {
            let value = transfer_function(model, s, &sigma)?;
            out.push(TransferSample { omega, sigma, value });
        }
    }
    Ok(out)
}

/// CSV export: omega, sigma_1..sigma_nu, then Re/Im interleaved row-major.
pub fn write_transfer_csv<W: Write>(samples: &[TransferSample], mut w: W) -> Result<()> {
    let Some(first) = samples.first() else {
        return Ok(());
    };
    let nu = first.sigma.len();
    let (rows, cols) = (first.value.nrows(), first.value.ncols());
    let mut header = vec!["omega".to_string()];
    header.extend((1..=nu).map(|i| format!("sigma_{i}")));
    for i in 0..rows {
        for j in 0..cols {
            header.push(format!("re_{i}{j}"));
            header.push(format!("im_{i}{j}"));
        }
    }
    writeln!(w, "{}", header.join(","))?;
    for s in samples {
        let mut fields = vec![format!("{:.16e}", s.omega)];
        fields.extend(s.sigma.iter().map(|x| format!("{x:.16e}")));
        for i in 0..rows {
            for j in 0..cols {
                fields.push(format!("{:.16e}", s.value[(i, j)].re));
                fields.push(format!("{:.16e}", s.value[(i, j)].im));
            }
        }
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}
