//! Hamiltonian networks and their phonon dispersion relations.
//!
//! An isolated spring-mass network carries conjugate position/momentum
//! blocks per site, a positive definite mass matrix M and a block-symmetric
//! stiffness stencil K. The state matrix factors as A_l = J V_l with the
//! symplectic J, the per-frequency spectrum is +-i sqrt(lambda) for
//! lambda in spectrum(K(sigma) M^{-1}), and each eigenpair yields a plane
//! wave (phonon) solution. Long-wavelength behaviour is governed by the
//! second derivative Gamma of the stiffness symbol at sigma = 0.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::certify::StorageSpec;
use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::la::{self, CMatrix};
use crate::model::NetworkModel;
use crate::stencil::MatrixStencil;

/// Default base tolerance for clamping round-off-negative dispersion
/// eigenvalues; the effective tolerance is scaled by 1 + ||K(sigma)||.
pub const DISPERSION_CLAMP_TOL: f64 = 1e-10;

/// Relative eigenvalue gap below which a branch counts as degenerate.
pub const GROUP_VELOCITY_GAP_REL: f64 = 1e-6;

/// Default central-difference step for group velocities.
pub const GROUP_VELOCITY_FD_STEP: f64 = 1e-5;

/// Default number of unit directions sampled for the long-wave speed.
pub const SPHERE_SAMPLES: usize = 256;

/// Base tolerance for the zero-sum stiffness hypothesis, scaled by
/// 1 + max block norm.
pub const ZERO_SUM_TOL: f64 = 1e-12;

/// Mass matrix plus block-symmetric stiffness stencil of a Hamiltonian
/// network with n/2 degrees of freedom per site.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    mass: DMatrix<f64>,
    stiffness: MatrixStencil,
    mass_inv: DMatrix<f64>,
}

impl HamiltonianSpec {
    pub fn new(mass: DMatrix<f64>, stiffness: MatrixStencil) -> Result<Self> {
        if mass.nrows() == 0 || mass.nrows() != mass.ncols() {
            return Err(Error::InvalidArgument("mass matrix must be square and nonempty".into()));
        }
        if mass != mass.transpose() {
            return Err(Error::InvalidArgument("mass matrix must be symmetric".into()));
        }
        let eigs = mass.clone().symmetric_eigen().eigenvalues;
        if eigs.iter().any(|&l| l <= 0.0) {
            return Err(Error::InvalidArgument("mass matrix must be positive definite".into()));
        }
        if stiffness.rows() != stiffness.cols() || stiffness.rows() != mass.nrows() {
            return Err(Error::InvalidArgument(format!(
                "stiffness blocks must be {0}x{0} to match the mass matrix",
                mass.nrows()
            )));
        }
        for (off, block) in stiffness.blocks() {
            let neg: Vec<i64> = off.iter().map(|&o| -o).collect();
            let ok = match stiffness.block(&neg) {
                Some(mb) => *mb == block.transpose(),
                None => block.iter().all(|&x| x == 0.0),
            };
            if !ok {
                return Err(Error::InvalidArgument(format!(
                    "stiffness stencil violates block symmetry K_-l = K_l^T at offset {off:?}"
                )));
            }
        }
        let mut mass_inv = mass
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument("mass matrix is numerically singular".into()))?;
        // keep the inverse exactly symmetric so derived stencils stay valid
        mass_inv = (&mass_inv + mass_inv.transpose()).scale(0.5);
        Ok(Self { mass, stiffness, mass_inv })
    }

    pub fn mass(&self) -> &DMatrix<f64> {
        &self.mass
    }

    pub fn mass_inv(&self) -> &DMatrix<f64> {
        &self.mass_inv
    }

    pub fn stiffness(&self) -> &MatrixStencil {
        &self.stiffness
    }

    /// Degrees of freedom per site (n/2).
    pub fn dof(&self) -> usize {
        self.mass.nrows()
    }

    /// Full state dimension per site (n = 2 * dof).
    pub fn state_dim(&self) -> usize {
        2 * self.dof()
    }

    pub fn dim_nu(&self) -> usize {
        self.stiffness.dim_nu()
    }

    /// Hermitian stiffness symbol K(sigma).
    pub fn stiffness_symbol(&self, sigma: &[f64]) -> Result<CMatrix> {
        Ok(la::hermitian_part(&self.stiffness.symbol(sigma)?))
    }

    /// Grounded variant: epsilon * I added to the zero-offset stiffness
    /// block, lifting K(0) away from zero.
    pub fn pinned(&self, epsilon: f64) -> Self {
        let dof = self.dof();
        let mut k = self.stiffness.clone();
        let zero_off = vec![0i64; self.dim_nu()];
        let base = k.block(&zero_off).cloned().unwrap_or_else(|| DMatrix::zeros(dof, dof));
        k.insert(&zero_off, base + DMatrix::identity(dof, dof) * epsilon)
            .expect("pinning preserves shape");
        Self { mass: self.mass.clone(), stiffness: k, mass_inv: self.mass_inv.clone() }
    }

    /// The Hamiltonian storage stencil V_l = diag(K_l, delta_{0l} M^{-1}).
    pub fn storage_spec(&self) -> Result<StorageSpec> {
        let dof = self.dof();
        let n = self.state_dim();
        let mut v = MatrixStencil::new(self.dim_nu(), n, n)?;
        let zero_off = vec![0i64; self.dim_nu()];
        for (off, kblock) in self.stiffness.blocks() {
            let mut block = DMatrix::zeros(n, n);
            block.view_mut((0, 0), (dof, dof)).copy_from(kblock);
            if off == zero_off.as_slice() {
                block.view_mut((dof, dof), (dof, dof)).copy_from(&self.mass_inv);
            }
            v.insert(off, block)?;
        }
        if self.stiffness.block(&zero_off).is_none() {
            let mut block = DMatrix::zeros(n, n);
            block.view_mut((dof, dof), (dof, dof)).copy_from(&self.mass_inv);
            v.insert(&zero_off, block)?;
        }
        StorageSpec::new(v)
    }
}

/// Assemble the isolated network: A_l = J V_l, i.e. the zero-offset block
/// carries M^{-1} in the top-right corner and every stiffness block enters
/// as -K_l bottom-left. B, C, D are zero with m = r = n/2.
pub fn build_hamiltonian_model(spec: &HamiltonianSpec) -> Result<NetworkModel> {
    let dof = spec.dof();
    let n = spec.state_dim();
    let nu = spec.dim_nu();
    let mut a = MatrixStencil::new(nu, n, n)?;
    let zero_off = vec![0i64; nu];
    for (off, kblock) in spec.stiffness.blocks() {
        let mut block = DMatrix::zeros(n, n);
        block.view_mut((dof, 0), (dof, dof)).copy_from(&(-kblock));
        if off == zero_off.as_slice() {
            block.view_mut((0, dof), (dof, dof)).copy_from(&spec.mass_inv);
        }
        a.insert(off, block)?;
    }
    if spec.stiffness.block(&zero_off).is_none() {
        let mut block = DMatrix::zeros(n, n);
        block.view_mut((0, dof), (dof, dof)).copy_from(&spec.mass_inv);
        a.insert(&zero_off, block)?;
    }
    NetworkModel::autonomous(a, dof, dof)
}

/// Sorted nonnegative phonon frequencies per grid node.
#[derive(Debug, Clone)]
pub struct DispersionSurface {
    pub grid: TorusGrid,
    /// `branches[node]` holds the n/2 frequencies sorted ascending.
    pub branches: Vec<Vec<f64>>,
    /// false where K(sigma) had an eigenvalue below the clamp tolerance.
    pub psd_flags: Vec<bool>,
}

fn dispersion_lambdas(spec: &HamiltonianSpec, sigma: &[f64]) -> Result<Vec<f64>> {
    let w = la::inv_sqrt_spd(&spec.mass)
        .ok_or_else(|| Error::InvalidArgument("mass matrix must be positive definite".into()))?;
    dispersion_lambdas_with(spec, &la::to_complex(&w), sigma)
}

fn dispersion_lambdas_with(
    spec: &HamiltonianSpec,
    mass_inv_sqrt: &CMatrix,
    sigma: &[f64],
) -> Result<Vec<f64>> {
    let k = spec.stiffness_symbol(sigma)?;
    // isospectral symmetrized form M^{-1/2} K(sigma) M^{-1/2}
    let sym = mass_inv_sqrt * k * mass_inv_sqrt;
    Ok(la::hermitian_eigenvalues(&sym))
}

/// Phonon frequencies omega_i(sigma) = sqrt(lambda_i) over a grid.
///
/// Eigenvalues in [-tol*(1 + ||K(sigma)||), 0) are treated as round-off
/// and clamped to zero; anything below marks the node as non-PSD.
pub fn dispersion(spec: &HamiltonianSpec, grid: &TorusGrid, tol: f64) -> Result<DispersionSurface> {
    if grid.dim_nu() != spec.dim_nu() {
        return Err(Error::DimensionMismatch {
            what: "grid lattice dimension",
            expected: spec.dim_nu(),
            got: grid.dim_nu(),
        });
    }
    let w = la::inv_sqrt_spd(&spec.mass)
        .ok_or_else(|| Error::InvalidArgument("mass matrix must be positive definite".into()))?;
    let wc = la::to_complex(&w);
    let per_node: Result<Vec<(Vec<f64>, bool)>> = (0..grid.node_count())
        .into_par_iter()
        .map(|flat| {
            let sigma = grid.node(flat);
            let kn = la::spectral_norm(&spec.stiffness_symbol(&sigma)?);
            let clamp = tol * (1.0 + kn);
            let lambdas = dispersion_lambdas_with(spec, &wc, &sigma)?;
            let psd = lambdas.iter().all(|&l| l >= -clamp);
            let omegas = lambdas.iter().map(|&l| l.max(0.0).sqrt()).collect();
            Ok((omegas, psd))
        })
        .collect();
    let per_node = per_node?;
    let (branches, psd_flags) = per_node.into_iter().unzip();
    Ok(DispersionSurface { grid: grid.clone(), branches, psd_flags })
}

/// Long-wavelength expansion data of the stiffness symbol.
#[derive(Debug, Clone)]
pub struct LongWaveReport {
    /// `gamma[j][k]` = - sum_l l_j l_k K_l, the second derivative of
    /// K(sigma) at sigma = 0; symmetric in (j, k).
    pub gamma: Vec<Vec<DMatrix<f64>>>,
    /// max over sampled unit directions theta of
    /// sqrt(lambda_max(sum theta_j theta_k Gamma_jk M^{-1}) / 2).
    pub longwave_speed: f64,
    /// Spectral norm of sum_l K_l (zero-sum hypothesis residual).
    pub sum_zero_residual: f64,
    /// sum_l |l|^2 ||K_l|| (finite second moment; finite by construction
    /// for finite stencils, reported for scale).
    pub second_moment: f64,
}

/// Unit directions used for the long-wave speed maximization.
fn sphere_directions(dim_nu: usize, samples: usize) -> Result<Vec<Vec<f64>>> {
    match dim_nu {
        1 => Ok(vec![vec![1.0], vec![-1.0]]),
        2 => Ok((0..samples.max(4))
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / samples.max(4) as f64;
                vec![t.cos(), t.sin()]
            })
            .collect()),
        3 => {
            // Fibonacci sphere
            let n = samples.max(8);
            let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
            Ok((0..n)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                    let rho = (1.0 - z * z).sqrt();
                    let phi = golden * i as f64;
                    vec![rho * phi.cos(), rho * phi.sin(), z]
                })
                .collect())
        }
        _ => Err(Error::InvalidArgument(format!(
            "long-wave direction sampling supports nu <= 3, got {dim_nu}"
        ))),
    }
}

pub fn longwave_analysis(spec: &HamiltonianSpec, sphere_samples: usize) -> Result<LongWaveReport> {
    let nu = spec.dim_nu();
    let dof = spec.dof();
    let mut gamma = vec![vec![DMatrix::<f64>::zeros(dof, dof); nu]; nu];
    for (off, block) in spec.stiffness.blocks() {
        for j in 0..nu {
            for k in 0..nu {
                let w = (off[j] * off[k]) as f64;
                if w != 0.0 {
                    gamma[j][k] -= block * w;
                }
            }
        }
    }
    let spectral_norm_real =
        |m: &DMatrix<f64>| m.clone().singular_values().iter().fold(0.0f64, |a, &s| a.max(s));
    let sum_zero_residual = spectral_norm_real(&spec.stiffness.block_sum());
    let second_moment: f64 = spec
        .stiffness
        .blocks()
        .map(|(off, block)| {
            let l2: f64 = off.iter().map(|&o| (o * o) as f64).sum();
            l2 * spectral_norm_real(block)
        })
        .sum();
    let w = la::inv_sqrt_spd(&spec.mass)
        .ok_or_else(|| Error::InvalidArgument("mass matrix must be positive definite".into()))?;
    let mut longwave_speed = 0.0f64;
    for theta in sphere_directions(nu, sphere_samples)? {
        let mut acc = DMatrix::<f64>::zeros(dof, dof);
        for j in 0..nu {
            for k in 0..nu {
                acc += &gamma[j][k] * (theta[j] * theta[k]);
            }
        }
        let sym = &w * acc * &w;
        let eigs = sym.symmetric_eigen().eigenvalues;
        let lmax = eigs.iter().fold(f64::NEG_INFINITY, |a, &l| a.max(l));
        longwave_speed = longwave_speed.max((lmax.max(0.0) / 2.0).sqrt());
    }
    Ok(LongWaveReport { gamma, longwave_speed, sum_zero_residual, second_moment })
}

/// Where the phase-velocity supremum was attained.
#[derive(Debug, Clone, PartialEq)]
pub enum PhaseVelocityWitness {
    GridNode(Vec<f64>),
    /// The analytic sigma -> 0 limit dominated the grid values.
    LongWaveLimit,
}

#[derive(Debug, Clone)]
pub struct PhaseVelocityReport {
    /// max(grid value, long-wave limit).
    pub value: f64,
    pub witness: PhaseVelocityWitness,
    pub grid_value: f64,
    pub longwave_speed: f64,
    /// Zero-sum stiffness and PSD stiffness hypotheses; when false the
    /// reported value is still the grid/limit maximum but the uniform
    /// boundedness guarantee does not apply.
    pub hypotheses_met: bool,
    pub detail: String,
}

/// Supremum of phase velocities omega_i(sigma)/|sigma| over the grid
/// (sigma = 0 excluded), combined with the analytic long-wave limit.
pub fn phase_velocity_sup(spec: &HamiltonianSpec, grid: &TorusGrid) -> Result<PhaseVelocityReport> {
    let surface = dispersion(spec, grid, DISPERSION_CLAMP_TOL)?;
    let longwave = longwave_analysis(spec, SPHERE_SAMPLES)?;
    let mut grid_value = 0.0f64;
    let mut witness_flat = None;
    for flat in 0..grid.node_count() {
        let sigma = grid.node(flat);
        let norm: f64 = sigma.iter().map(|s| s * s).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        if let Some(&omega_max) = surface.branches[flat].last() {
            let v = omega_max / norm;
            if v > grid_value {
                grid_value = v;
                witness_flat = Some(flat);
            }
        }
    }
    let max_block = spec
        .stiffness
        .blocks()
        .map(|(_, b)| b.clone().singular_values().iter().fold(0.0f64, |a, &s| a.max(s)))
        .fold(0.0f64, f64::max);
    let zero_sum_ok = longwave.sum_zero_residual <= ZERO_SUM_TOL * (1.0 + max_block);
    let psd_ok = surface.psd_flags.iter().all(|&f| f);
    let hypotheses_met = zero_sum_ok && psd_ok;
    let detail = if hypotheses_met {
        "zero-sum and PSD stiffness hypotheses hold".to_string()
    } else {
        format!(
            "hypotheses-not-met: zero-sum residual {:.3e} (ok: {zero_sum_ok}), stiffness PSD on grid: {psd_ok}",
            longwave.sum_zero_residual
        )
    };
    let (value, witness) = if longwave.longwave_speed >= grid_value {
        (longwave.longwave_speed, PhaseVelocityWitness::LongWaveLimit)
    } else {
        (
            grid_value,
            PhaseVelocityWitness::GridNode(grid.node(witness_flat.expect("grid value > 0"))),
        )
    };
    Ok(PhaseVelocityReport {
        value,
        witness,
        grid_value,
        longwave_speed: longwave.longwave_speed,
        hypotheses_met,
        detail,
    })
}

/// Finite-difference group velocity of one dispersion branch, or a marker
/// explaining why the branch is not differentiable there.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupVelocity {
    Velocity(Vec<f64>),
    NotDifferentiable { reason: String },
}

/// Central-difference gradient of omega_branch at sigma with step h.
///
/// Demands a simple (multiplicity-one) branch and a nonzero frequency;
/// both failure modes return the marker rather than an error.
pub fn group_velocity(
    spec: &HamiltonianSpec,
    sigma: &[f64],
    branch: usize,
    fd_step: f64,
) -> Result<GroupVelocity> {
    if sigma.len() != spec.dim_nu() {
        return Err(Error::DimensionMismatch {
            what: "sigma length",
            expected: spec.dim_nu(),
            got: sigma.len(),
        });
    }
    if fd_step <= 0.0 {
        return Err(Error::InvalidArgument("finite-difference step must be positive".into()));
    }
    let lambdas = dispersion_lambdas(spec, sigma)?;
    let Some(&lambda) = lambdas.get(branch) else {
        return Err(Error::InvalidArgument(format!(
            "branch index {branch} out of range (n/2 = {})",
            lambdas.len()
        )));
    };
    let scale = 1.0 + lambda.abs();
    let gap = lambdas
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != branch)
        .map(|(_, &l)| (l - lambda).abs())
        .fold(f64::INFINITY, f64::min);
    if gap < GROUP_VELOCITY_GAP_REL * scale {
        return Ok(GroupVelocity::NotDifferentiable {
            reason: format!("branch {branch} is degenerate (relative gap {:.3e})", gap / scale),
        });
    }
    let omega = lambda.max(0.0).sqrt();
    if omega <= GROUP_VELOCITY_GAP_REL * scale.sqrt() {
        return Ok(GroupVelocity::NotDifferentiable {
            reason: "zero-frequency branch (square-root kink)".into(),
        });
    }
    let mut grad = Vec::with_capacity(spec.dim_nu());
    for ax in 0..spec.dim_nu() {
        let mut plus = sigma.to_vec();
        plus[ax] += fd_step;
        let mut minus = sigma.to_vec();
        minus[ax] -= fd_step;
        let wp = dispersion_lambdas(spec, &plus)?[branch].max(0.0).sqrt();
        let wm = dispersion_lambdas(spec, &minus)?[branch].max(0.0).sqrt();
        grad.push((wp - wm) / (2.0 * fd_step));
    }
    Ok(GroupVelocity::Velocity(grad))
}

/// CSV export: sigma_1..sigma_nu, omega_1..omega_{n/2}, psd_flag.
pub fn write_dispersion_csv<W: Write>(surface: &DispersionSurface, mut w: W) -> Result<()> {
    let nu = surface.grid.dim_nu();
    let branches = surface.branches.first().map_or(0, |b| b.len());
    let mut header: Vec<String> = (1..=nu).map(|i| format!("sigma_{i}")).collect();
    header.extend((1..=branches).map(|i| format!("omega_{i}")));
    header.push("psd_flag".into());
    writeln!(w, "{}", header.join(","))?;
    for flat in 0..surface.grid.node_count() {
        let mut fields: Vec<String> =
            surface.grid.node(flat).iter().map(|x| format!("{x:.16e}")).collect();
        fields.extend(surface.branches[flat].iter().map(|x| format!("{x:.16e}")));
        fields.push(if surface.psd_flags[flat] { "1" } else { "0" }.into());
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}
