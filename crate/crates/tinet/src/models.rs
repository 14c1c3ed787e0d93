//! Builders for concrete test systems: the finite-difference thin-plate
//! network, monatomic spring-mass chains, and their damped/actuated
//! variants used throughout the certification tests.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::NetworkModel;
use crate::phonon::HamiltonianSpec;
use crate::stencil::MatrixStencil;

/// Thin isotropic plate: density rho, bending stiffness beta, spatial
/// step h for the finite-difference Laplacian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateParams {
    pub rho: f64,
    pub beta: f64,
    pub h: f64,
}

impl Default for PlateParams {
    fn default() -> Self {
        Self { rho: 1.0, beta: 1.0, h: 1.0 }
    }
}

/// Monatomic nearest-neighbour chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainParams {
    pub mass: f64,
    pub spring: f64,
    /// Viscous damping used by [`damped_actuated`]; the Hamiltonian part
    /// ignores it.
    pub damping: f64,
}

impl Default for ChainParams {
    fn default() -> Self {
        Self { mass: 1.0, spring: 1.0, damping: 0.0 }
    }
}

/// The 5-point Laplacian stencil {0: -4/h^2, (+-1,0): 1/h^2, (0,+-1): 1/h^2}.
pub fn laplacian_5pt(h: f64) -> Result<MatrixStencil> {
    if h <= 0.0 {
        return Err(Error::InvalidArgument("grid spacing h must be positive".into()));
    }
    let w = 1.0 / (h * h);
    MatrixStencil::from_scalar_entries(
        2,
        &[
            (&[0, 0], -4.0 * w),
            (&[1, 0], w),
            (&[-1, 0], w),
            (&[0, 1], w),
            (&[0, -1], w),
        ],
    )
}

/// Kirchhoff-Love plate discretization on Z^2: mass M = rho (scalar) and
/// stiffness K = (beta/2) L^2 assembled by stencil self-convolution of the
/// 5-point Laplacian, so K(sigma) = (beta/2) S_L(sigma)^2 and K(0) = 0.
pub fn plate_spec(params: &PlateParams) -> Result<HamiltonianSpec> {
    if params.rho <= 0.0 || params.beta <= 0.0 || params.h <= 0.0 {
        return Err(Error::InvalidArgument("plate parameters must be positive".into()));
    }
    let lap = laplacian_5pt(params.h)?;
    let stiffness = lap.convolve(&lap)?.scale(params.beta / 2.0);
    HamiltonianSpec::new(DMatrix::from_element(1, 1, params.rho), stiffness)
}

/// Monatomic chain on Z: mass m, stiffness K = {0: 2 kappa, +-1: -kappa},
/// so K(sigma) = 2 kappa (1 - cos sigma) >= 0 with exact zero sum.
pub fn chain_spec(params: &ChainParams) -> Result<HamiltonianSpec> {
    if params.mass <= 0.0 || params.spring <= 0.0 {
        return Err(Error::InvalidArgument("chain mass and spring must be positive".into()));
    }
    if params.damping < 0.0 {
        return Err(Error::InvalidArgument("chain damping must be nonnegative".into()));
    }
    let kappa = params.spring;
    let k = MatrixStencil::from_scalar_entries(
        1,
        &[(&[-1], -kappa), (&[0], 2.0 * kappa), (&[1], -kappa)],
    )?;
    HamiltonianSpec::new(DMatrix::from_element(1, 1, params.mass), k)
}

/// Which physical quantity the output reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sensing {
    /// y = S^T M^{-1} p (collocated with the force input; the
    /// positive-real pairing).
    Velocity,
    /// y = S^T q (the negative-imaginary pairing).
    Position,
}

/// Damped, actuated variant of a Hamiltonian network.
///
/// Adds viscous damping -gamma M^{-1} to the momentum row, injects forces
/// into the momenta through the selection matrix S (dof x m, identity when
/// None) and reads the collocated velocity or position. gamma = 0 is
/// allowed and leaves the network lossless (and hence not Hurwitz).
pub fn damped_actuated(
    spec: &HamiltonianSpec,
    gamma: f64,
    actuation: Option<&DMatrix<f64>>,
    sensing: Sensing,
) -> Result<NetworkModel> {
    if gamma < 0.0 {
        return Err(Error::InvalidArgument("damping gamma must be nonnegative".into()));
    }
    let dof = spec.dof();
    let n = spec.state_dim();
    let nu = spec.dim_nu();
    let selection = match actuation {
        Some(s) => {
            if s.nrows() != dof {
                return Err(Error::DimensionMismatch {
                    what: "actuation selection rows",
                    expected: dof,
                    got: s.nrows(),
                });
            }
            s.clone()
        }
        None => DMatrix::identity(dof, dof),
    };
    let m = selection.ncols();

    let base = crate::phonon::build_hamiltonian_model(spec)?;
    let mut a = base.a().clone();
    if gamma > 0.0 {
        let zero_off = vec![0i64; nu];
        let mut a0 = a.block(&zero_off).cloned().unwrap_or_else(|| DMatrix::zeros(n, n));
        let mut damping_view = a0.view_mut((dof, dof), (dof, dof));
        damping_view += spec.mass_inv() * (-gamma);
        a.insert(&zero_off, a0)?;
    }

    let mut b = MatrixStencil::new(nu, n, m)?;
    let mut b0 = DMatrix::zeros(n, m);
    b0.view_mut((dof, 0), (dof, m)).copy_from(&selection);
    b.insert(&vec![0i64; nu], b0)?;

    let mut c = MatrixStencil::new(nu, m, n)?;
    let mut c0 = DMatrix::zeros(m, n);
    match sensing {
        Sensing::Velocity => {
            let read = selection.transpose() * spec.mass_inv();
            c0.view_mut((0, dof), (m, dof)).copy_from(&read);
        }
        Sensing::Position => {
            c0.view_mut((0, 0), (m, dof)).copy_from(&selection.transpose());
        }
    }
    c.insert(&vec![0i64; nu], c0)?;

    let d = MatrixStencil::new(nu, m, m)?;
    NetworkModel::new(a, b, c, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::{
        check_negative_imaginary, check_positive_real, dissipation_matrix, OmegaSweep, SupplySpec,
        OMEGA_SWEEP_MAX, PSD_TOL,
    };
    use crate::grid::TorusGrid;
    use crate::phonon::{build_hamiltonian_model, longwave_analysis, SPHERE_SAMPLES};
    use crate::spectral::spectral_abscissa;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn plate_stiffness_sums_to_zero_exactly() {
        let spec = plate_spec(&PlateParams { rho: 1.0, beta: 2.0, h: 1.0 }).unwrap();
        let sum = spec.stiffness().block_sum();
        assert_eq!(sum[(0, 0)], 0.0);
    }

    #[test]
    fn plate_symbol_is_scaled_squared_laplacian() {
        let params = PlateParams { rho: 1.0, beta: 2.0, h: 1.0 };
        let spec = plate_spec(&params).unwrap();
        let lap = laplacian_5pt(params.h).unwrap();
        let grid = TorusGrid::new(2, 16).unwrap();
        for sigma in grid.nodes() {
            let k = spec.stiffness_symbol(&sigma).unwrap();
            let sl = lap.symbol(&sigma).unwrap()[(0, 0)];
            let expect = (params.beta / 2.0) * (sl * sl).re;
            assert_relative_eq!(k[(0, 0)].re, expect, epsilon = 1e-12);
            assert!(k[(0, 0)].im.abs() < 1e-12);
        }
        // spot value: sigma = (pi, 0) gives S_L = -4, K = 16
        let k = spec.stiffness_symbol(&[PI, 0.0]).unwrap();
        assert_relative_eq!(k[(0, 0)].re, 16.0, epsilon = 1e-12);
    }

    #[test]
    fn plate_stiffness_scales_as_h_to_minus_four() {
        let k1 = plate_spec(&PlateParams { rho: 1.0, beta: 2.0, h: 1.0 }).unwrap();
        let k2 = plate_spec(&PlateParams { rho: 1.0, beta: 2.0, h: 2.0 }).unwrap();
        for sigma in [[0.4, -1.0], [PI, PI], [0.1, 0.0]] {
            let a = k1.stiffness_symbol(&sigma).unwrap()[(0, 0)].re;
            let b = k2.stiffness_symbol(&sigma).unwrap()[(0, 0)].re;
            assert_relative_eq!(b, a / 16.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn plate_longwave_gamma_vanishes() {
        let spec = plate_spec(&PlateParams { rho: 1.0, beta: 2.0, h: 1.0 }).unwrap();
        let report = longwave_analysis(&spec, SPHERE_SAMPLES).unwrap();
        for row in &report.gamma {
            for g in row {
                assert!(g.amax() < 1e-10);
            }
        }
        assert_eq!(report.longwave_speed, 0.0);
    }

    #[test]
    fn plate_state_matrix_at_zero_frequency() {
        let spec = plate_spec(&PlateParams { rho: 1.0, beta: 2.0, h: 1.0 }).unwrap();
        let model = build_hamiltonian_model(&spec).unwrap();
        let a = model.a().symbol(&[0.0, 0.0]).unwrap();
        assert_relative_eq!(a[(0, 1)].re, 1.0, epsilon = 1e-14);
        assert!(a[(1, 0)].norm() < 1e-12, "K(0) = 0 for the plate");
    }

    #[test]
    fn plate_dispersion_spot_value() {
        // omega(pi, pi) = sqrt(beta/(2 rho)) |S_L| = 8 for rho=1, beta=2, h=1
        let spec = plate_spec(&PlateParams { rho: 1.0, beta: 2.0, h: 1.0 }).unwrap();
        let lambdas = spec.stiffness_symbol(&[PI, PI]).unwrap()[(0, 0)].re;
        assert_relative_eq!(lambdas.sqrt(), 8.0, epsilon = 1e-12);
    }

    #[test]
    fn chain_spec_closed_forms() {
        let spec = chain_spec(&ChainParams { mass: 1.0, spring: 1.0, damping: 0.0 }).unwrap();
        assert_eq!(spec.stiffness().block_sum()[(0, 0)], 0.0);
        let k = spec.stiffness_symbol(&[PI]).unwrap();
        assert_relative_eq!(k[(0, 0)].re, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn lossless_collocated_model_has_zero_dissipation_matrix() {
        // A = J V, B force injection, C velocity readout, D = 0, G = I,
        // V the Hamiltonian storage: N(sigma) = 0 identically.
        let spec = chain_spec(&ChainParams { mass: 1.3, spring: 0.8, damping: 0.0 }).unwrap();
        let model = damped_actuated(&spec, 0.0, None, Sensing::Velocity).unwrap();
        let storage = spec.storage_spec().unwrap();
        let supply = SupplySpec::identity(1, 1).unwrap();
        let grid = TorusGrid::new(1, 64).unwrap();
        for sigma in grid.nodes() {
            let n = dissipation_matrix(&model, &storage, &supply, &sigma).unwrap();
            let worst = n.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
            assert!(worst < 1e-12, "N not zero at sigma = {sigma:?}: {worst:.3e}");
        }
    }

    #[test]
    fn undamped_variant_is_not_hurwitz() {
        let spec = chain_spec(&ChainParams::default()).unwrap();
        let model = damped_actuated(&spec, 0.0, None, Sensing::Velocity).unwrap();
        let grid = TorusGrid::new(1, 32).unwrap();
        let rep = spectral_abscissa(&model, &grid).unwrap();
        assert!(!rep.hurwitz);
    }

    #[test]
    fn lossless_collocated_model_is_dissipative_with_zero_margin() {
        let spec = chain_spec(&ChainParams::default()).unwrap();
        let model = damped_actuated(&spec, 0.0, None, Sensing::Velocity).unwrap();
        let storage = spec.storage_spec().unwrap();
        let supply = SupplySpec::identity(1, 1).unwrap();
        let grid = TorusGrid::new(1, 64).unwrap();
        let rep = crate::certify::check_dissipativity(&model, &storage, &supply, &grid, PSD_TOL)
            .unwrap();
        assert!(rep.verdict);
        assert!(rep.margin.unwrap().abs() < 1e-12);
    }

    #[test]
    fn lossless_model_fails_passivity_on_hurwitz_side_condition() {
        // the imaginary-axis spectrum kills the Hurwitz gate; sweep points
        // near resonances are skipped, and E is identically zero at the
        // evaluable points (F is purely imaginary for gamma = 0)
        let spec = chain_spec(&ChainParams::default()).unwrap();
        let model = damped_actuated(&spec, 0.0, None, Sensing::Velocity).unwrap();
        let supply = SupplySpec::identity(1, 1).unwrap();
        let grid = TorusGrid::new(1, 16).unwrap();
        let sweep = OmegaSweep::log_symmetric(OMEGA_SWEEP_MAX);
        let rep = crate::certify::check_passivity(&model, &supply, &grid, &sweep, PSD_TOL)
            .unwrap();
        assert!(!rep.verdict);
        let hurwitz = rep.side_conditions.iter().find(|s| s.name == "hurwitz").unwrap();
        assert!(!hurwitz.pass);
        if let Some(margin) = rep.margin {
            assert!(margin.abs() < 1e-9, "E vanishes where evaluable, got {margin}");
        }
    }

    #[test]
    fn plate_phase_velocity_is_finite_with_zero_longwave_limit() {
        let spec = plate_spec(&PlateParams { rho: 1.0, beta: 2.0, h: 1.0 }).unwrap();
        let grid = TorusGrid::new(2, 16).unwrap();
        let report = crate::phonon::phase_velocity_sup(&spec, &grid).unwrap();
        assert!(report.hypotheses_met);
        assert_eq!(report.longwave_speed, 0.0);
        assert!(report.value.is_finite() && report.value > 0.0);
        assert!(matches!(
            report.witness,
            crate::phonon::PhaseVelocityWitness::GridNode(_)
        ));
    }

    #[test]
    fn damped_pinned_chain_is_positive_real() {
        let spec = chain_spec(&ChainParams::default()).unwrap().pinned(0.1);
        let model = damped_actuated(&spec, 0.5, None, Sensing::Velocity).unwrap();
        let grid = TorusGrid::new(1, 32).unwrap();
        let sweep = OmegaSweep::log_symmetric(OMEGA_SWEEP_MAX);
        let rep = check_positive_real(&model, &grid, &sweep, PSD_TOL).unwrap();
        assert!(rep.verdict, "witness: {:?}", rep.witness);
        assert!(rep.margin.unwrap() > 0.0);
    }

    #[test]
    fn damped_pinned_chain_position_sensing_is_negative_imaginary() {
        let spec = chain_spec(&ChainParams::default()).unwrap().pinned(0.1);
        let model = damped_actuated(&spec, 0.5, None, Sensing::Position).unwrap();
        let grid = TorusGrid::new(1, 32).unwrap();
        let sweep = OmegaSweep::log_nonnegative(OMEGA_SWEEP_MAX);
        let rep = check_negative_imaginary(&model, &grid, &sweep, PSD_TOL).unwrap();
        assert!(rep.verdict, "witness: {:?}", rep.witness);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(plate_spec(&PlateParams { rho: 0.0, beta: 1.0, h: 1.0 }).is_err());
        assert!(chain_spec(&ChainParams { mass: -1.0, spring: 1.0, damping: 0.0 }).is_err());
        let spec = chain_spec(&ChainParams::default()).unwrap();
        assert!(damped_actuated(&spec, -0.1, None, Sensing::Velocity).is_err());
    }
}
