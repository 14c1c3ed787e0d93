//! Energy-based certificates: dissipativity, passivity, positive realness,
//! negative imaginariness, and quadratic stability margins.
//!
//! The machinery follows the frequency-domain route: a bilinear supply rate
//! <u, G y> and a quadratic storage 1/2 <x, V x> reduce, per spatial
//! frequency sigma, to a Hermitian dissipation matrix N(sigma) whose
//! positive semidefiniteness certifies that supplied power dominates the
//! rate of change of internal energy. For zero initial state the same
//! question has a transfer-function form E(omega, sigma) =
//! F* G* + G F >= 0 over temporal frequencies omega.
//!
//! All verdicts are grid verdicts: a uniform torus grid and a finite
//! frequency sweep stand in for the almost-everywhere quantifiers. The
//! boundary points omega = 0 and the omega -> infinity limit are checked
//! as gating side conditions but excluded from the reported margin, since
//! lossless boundary equalities (common for collocated force/velocity
//! pairs) live on measure-zero sets.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::la::{self, CMatrix};
use crate::model::NetworkModel;
use crate::spectral::{self, spectral_abscissa, transfer_function};
use crate::stencil::MatrixStencil;

/// Base PSD tolerance; each eigenvalue check uses tol * (1 + ||matrix||).
pub const PSD_TOL: f64 = 1e-9;

/// Relative singular-value threshold for the PBH rank test.
pub const PBH_RANK_TOL: f64 = 1e-8;

/// Smallest nonzero |omega| in the default sweeps.
pub const OMEGA_SWEEP_MIN: f64 = 1e-2;

/// Largest |omega| in the default sweeps.
pub const OMEGA_SWEEP_MAX: f64 = 1e3;

/// Log-spaced points per side in the default sweeps.
pub const OMEGA_SWEEP_POINTS: usize = 60;

/// Supply operator G acting on outputs, with blocks that may be
/// polynomials in the temporal variable s.
///
/// `coeffs[d]` holds the stencil of the s^d coefficient, so the plain
/// (static) case is a single degree-0 stencil and the velocity supply
/// G y = dy/dt is `[0, I]` with symbol s*I.
#[derive(Debug, Clone, PartialEq)]
pub struct SupplySpec {
    coeffs: Vec<MatrixStencil>,
}

impl SupplySpec {
    pub fn new_static(g: MatrixStencil) -> Self {
        Self { coeffs: vec![g] }
    }

    pub fn polynomial(coeffs: Vec<MatrixStencil>) -> Result<Self> {
        let first = coeffs
            .first()
            .ok_or_else(|| Error::InvalidArgument("supply needs at least one coefficient".into()))?;
        let (nu, m, r) = (first.dim_nu(), first.rows(), first.cols());
        for c in &coeffs {
            if c.dim_nu() != nu || c.rows() != m || c.cols() != r {
                return Err(Error::InvalidArgument(
                    "supply coefficient stencils must share shape and lattice dimension".into(),
                ));
            }
        }
        Ok(Self { coeffs })
    }

    /// Static identity supply (the standard force/velocity pairing, r = m).
    pub fn identity(dim_nu: usize, m: usize) -> Result<Self> {
        Ok(Self::new_static(MatrixStencil::identity(dim_nu, m)?))
    }

    /// Derivative supply G y = dy/dt, with symbol s * I.
    pub fn derivative(dim_nu: usize, m: usize) -> Result<Self> {
        let zero = MatrixStencil::new(dim_nu, m, m)?;
        let id = MatrixStencil::identity(dim_nu, m)?;
        Self::polynomial(vec![zero, id])
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_static(&self) -> bool {
        self.degree() == 0
    }

    pub fn dim_nu(&self) -> usize {
        self.coeffs[0].dim_nu()
    }

    /// Row dimension m (the input side of the bilinear form).
    pub fn input_dim(&self) -> usize {
        self.coeffs[0].rows()
    }

    /// Column dimension r (the output side of the bilinear form).
    pub fn output_dim(&self) -> usize {
        self.coeffs[0].cols()
    }

    pub fn coefficient(&self, degree: usize) -> Option<&MatrixStencil> {
        self.coeffs.get(degree)
    }

    /// Fourier-Laplace symbol G(s, sigma) = sum_d s^d sum_l e^{-i l.sigma} G_l^(d).
    pub fn symbol(&self, s: Complex64, sigma: &[f64]) -> Result<CMatrix> {
        let mut acc = CMatrix::zeros(self.input_dim(), self.output_dim());
        let mut power = Complex64::new(1.0, 0.0);
        for c in &self.coeffs {
            acc += c.symbol(sigma)? * power;
            power *= s;
        }
        Ok(acc)
    }

    /// Symbol of a static supply; errors for polynomial degree >= 1.
    pub fn static_symbol(&self, sigma: &[f64]) -> Result<CMatrix> {
        if !self.is_static() {
            return Err(Error::PolynomialSupplyUnsupported { degree: self.degree() });
        }
        self.coeffs[0].symbol(sigma)
    }
}

/// Storage stencil V with the block symmetry V_{-l} = V_l^T, so that the
/// symbol V(sigma) is Hermitian at every frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct StorageSpec {
    v: MatrixStencil,
}

impl StorageSpec {
    pub fn new(v: MatrixStencil) -> Result<Self> {
        if v.rows() != v.cols() {
            return Err(Error::InvalidArgument(format!(
                "storage stencil must be square, got {}x{}",
                v.rows(),
                v.cols()
            )));
        }
        for (off, block) in v.blocks() {
            let neg: Vec<i64> = off.iter().map(|&o| -o).collect();
            let mirror = v.block(&neg);
            let ok = match mirror {
                Some(mb) => *mb == block.transpose(),
                None => block.iter().all(|&x| x == 0.0),
            };
            if !ok {
                return Err(Error::InvalidArgument(format!(
                    "storage stencil violates block symmetry V_-l = V_l^T at offset {off:?}"
                )));
            }
        }
        Ok(Self { v })
    }

    /// Symmetric part (W + reflected transpose)/2 of an arbitrary square stencil.
    pub fn symmetrized(w: MatrixStencil) -> Result<Self> {
        if w.rows() != w.cols() {
            return Err(Error::InvalidArgument("storage stencil must be square".into()));
        }
        let sym = w.add(&w.reflected_transpose())?.scale(0.5);
        Self::new(sym)
    }

    pub fn identity(dim_nu: usize, n: usize) -> Result<Self> {
        Self::new(MatrixStencil::identity(dim_nu, n)?)
    }

    pub fn stencil(&self) -> &MatrixStencil {
        &self.v
    }

    pub fn state_dim(&self) -> usize {
        self.v.rows()
    }

    /// Hermitian symbol V(sigma).
    pub fn symbol(&self, sigma: &[f64]) -> Result<CMatrix> {
        Ok(la::hermitian_part(&self.v.symbol(sigma)?))
    }
}

/// The certified property.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Dissipative,
    Passive,
    PositiveReal,
    NegativeImaginary,
}

/// Worst point found by a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    pub sigma: Vec<f64>,
    pub lambda_min: f64,
}

/// A named pass/fail side condition attached to a report.
#[derive(Debug, Clone, Serialize)]
pub struct SideCondition {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Description of the temporal frequency sweep used by a certificate.
#[derive(Debug, Clone, Serialize)]
pub struct OmegaSweep {
    pub kind: String,
    pub omega_min: f64,
    pub omega_max: f64,
    pub count: usize,
    #[serde(skip)]
    pub values: Vec<f64>,
}

impl OmegaSweep {
    /// +-logspace(OMEGA_SWEEP_MIN, omega_max, OMEGA_SWEEP_POINTS).
    ///
    /// omega = 0 is deliberately not part of the margin-bearing sweep; it
    /// is checked separately as a gating side condition.
    pub fn log_symmetric(omega_max: f64) -> Self {
        let pos = logspace(OMEGA_SWEEP_MIN, omega_max, OMEGA_SWEEP_POINTS);
        let mut values: Vec<f64> = pos.iter().map(|&w| -w).rev().collect();
        values.extend(pos);
        Self {
            kind: "log_symmetric".into(),
            omega_min: OMEGA_SWEEP_MIN,
            omega_max,
            count: values.len(),
            values,
        }
    }

    /// {0} followed by logspace(OMEGA_SWEEP_MIN, omega_max, OMEGA_SWEEP_POINTS).
    pub fn log_nonnegative(omega_max: f64) -> Self {
        let mut values = vec![0.0];
        values.extend(logspace(OMEGA_SWEEP_MIN, omega_max, OMEGA_SWEEP_POINTS));
        Self {
            kind: "log_nonnegative".into(),
            omega_min: 0.0,
            omega_max,
            count: values.len(),
            values,
        }
    }

    pub fn from_values(kind: &str, values: Vec<f64>) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in &values {
            lo = lo.min(v.abs());
            hi = hi.max(v.abs());
        }
        Self { kind: kind.into(), omega_min: lo, omega_max: hi, count: values.len(), values }
    }
}

fn logspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && count >= 2);
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (llo + (lhi - llo) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Verdict plus the evidence behind it.
#[derive(Debug, Clone, Serialize)]
pub struct CertificationReport {
    pub property: Property,
    pub verdict: bool,
    /// Minimum over checked sweep points of lambda_min of the relevant
    /// Hermitian matrix. None when no sweep point could be evaluated.
    pub margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    pub grid: TorusGrid,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_sweep: Option<OmegaSweep>,
    pub side_conditions: Vec<SideCondition>,
    pub tol: f64,
}

impl CertificationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

fn effective_tol(tol: f64, eigenvalues: &[f64]) -> f64 {
    let norm = eigenvalues.iter().fold(0.0f64, |a, &l| a.max(l.abs()));
    tol * (1.0 + norm)
}

/// The Hermitian dissipation matrix N(sigma) of order n + m:
///
/// ```text
/// [ -A*V - VA      C*G* - VB ]
/// [  GC - B*V   GD + D*G*    ]
/// ```
///
/// Defined for static supplies only; the polynomial case has no
/// time-domain quadratic form.
pub fn dissipation_matrix(
    model: &NetworkModel,
    storage: &StorageSpec,
    supply: &SupplySpec,
    sigma: &[f64],
) -> Result<CMatrix> {
    check_storage_shape(model, storage)?;
    dissipation_matrix_with(model, &storage.symbol(sigma)?, supply, sigma)
}

/// Same as [`dissipation_matrix`] but with the storage given directly as a
/// Hermitian value V(sigma), e.g. from a per-node Lyapunov solve.
pub fn dissipation_matrix_with(
    model: &NetworkModel,
    v: &CMatrix,
    supply: &SupplySpec,
    sigma: &[f64],
) -> Result<CMatrix> {
    if !supply.is_static() {
        return Err(Error::PolynomialSupplyUnsupported { degree: supply.degree() });
    }
    check_supply_shape(model, supply)?;
    let n = model.state_dim();
    let m = model.input_dim();
    if v.nrows() != n || v.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "storage value dimension",
            expected: n,
            got: v.nrows(),
        });
    }
    let a = model.a().symbol(sigma)?;
    let b = model.b().symbol(sigma)?;
    let c = model.c().symbol(sigma)?;
    let d = model.d().symbol(sigma)?;
    let g = supply.static_symbol(sigma)?;

    let n11 = -(a.adjoint() * v) - v * &a;
    let n12 = c.adjoint() * g.adjoint() - v * &b;
    let n21 = &g * &c - b.adjoint() * v;
    let n22 = &g * &d + d.adjoint() * g.adjoint();

    let mut out = CMatrix::zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n)).copy_from(&n11);
    out.view_mut((0, n), (n, m)).copy_from(&n12);
    out.view_mut((n, 0), (m, n)).copy_from(&n21);
    out.view_mut((n, n), (m, m)).copy_from(&n22);
    Ok(la::hermitian_part(&out))
}

fn check_supply_shape(model: &NetworkModel, supply: &SupplySpec) -> Result<()> {
    if supply.dim_nu() != model.dim_nu() {
        return Err(Error::DimensionMismatch {
            what: "supply lattice dimension",
            expected: model.dim_nu(),
            got: supply.dim_nu(),
        });
    }
    if supply.input_dim() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            what: "supply rows (input dim m)",
            expected: model.input_dim(),
            got: supply.input_dim(),
        });
    }
    if supply.output_dim() != model.output_dim() {
        return Err(Error::DimensionMismatch {
            what: "supply cols (output dim r)",
            expected: model.output_dim(),
            got: supply.output_dim(),
        });
    }
    Ok(())
}

fn check_storage_shape(model: &NetworkModel, storage: &StorageSpec) -> Result<()> {
    if storage.stencil().dim_nu() != model.dim_nu() {
        return Err(Error::DimensionMismatch {
            what: "storage lattice dimension",
            expected: model.dim_nu(),
            got: storage.stencil().dim_nu(),
        });
    }
    if storage.state_dim() != model.state_dim() {
        return Err(Error::DimensionMismatch {
            what: "storage state dimension",
            expected: model.state_dim(),
            got: storage.state_dim(),
        });
    }
    Ok(())
}

/// PBH test: (A, B) is controllable iff [sI - A, B] has full row rank at
/// every eigenvalue s of A.
fn pbh_controllable(a: &CMatrix, b: &CMatrix) -> Option<bool> {
    let n = a.nrows();
    if n == 0 {
        return Some(true);
    }
    let eigs = la::complex_eigenvalues(a)?;
    let mut pencil = CMatrix::zeros(n, n + b.ncols());
    for s in eigs {
        let mut left = -a.clone();
        for i in 0..n {
            left[(i, i)] += s;
        }
        pencil.view_mut((0, 0), (n, n)).copy_from(&left);
        pencil.view_mut((0, n), (n, b.ncols())).copy_from(b);
        if la::rank(&pencil, PBH_RANK_TOL) < n {
            return Some(false);
        }
    }
    Some(true)
}

/// Grid certificate for the dissipation inequality S >= dH/dt.
///
/// Verdict: lambda_min(N(sigma)) >= -tol*(1 + ||N(sigma)||) at every grid
/// node. The PBH controllability of (A(sigma), B(sigma)) is reported as a
/// side condition but does not gate the verdict; it matters only for the
/// necessity direction of the criterion.
pub fn check_dissipativity(
    model: &NetworkModel,
    storage: &StorageSpec,
    supply: &SupplySpec,
    grid: &TorusGrid,
    tol: f64,
) -> Result<CertificationReport> {
    check_storage_shape(model, storage)?;
    dissipativity_core(model, supply, grid, tol, |_flat, sigma| storage.symbol(sigma))
}

/// Dissipativity check against a per-node storage table, e.g. one
/// synthesized by [`solve_storage`]. The table's grid drives the sweep.
pub fn check_dissipativity_tabulated(
    model: &NetworkModel,
    supply: &SupplySpec,
    table: &StorageTable,
    tol: f64,
) -> Result<CertificationReport> {
    if table.nodes.len() != table.grid.node_count() {
        return Err(Error::InvalidArgument("storage table does not cover its grid".into()));
    }
    dissipativity_core(model, supply, &table.grid, tol, |flat, _sigma| {
        Ok(table.nodes[flat].v.clone())
    })
}

fn dissipativity_core<FV>(
    model: &NetworkModel,
    supply: &SupplySpec,
    grid: &TorusGrid,
    tol: f64,
    storage_at: FV,
) -> Result<CertificationReport>
where
    FV: Fn(usize, &[f64]) -> Result<CMatrix> + Sync,
{
    if !supply.is_static() {
        return Err(Error::PolynomialSupplyUnsupported { degree: supply.degree() });
    }
    check_supply_shape(model, supply)?;
    let results: Result<Vec<(usize, f64, bool, bool)>> = (0..grid.node_count())
        .into_par_iter()
        .map(|flat| {
            let sigma = grid.node(flat);
            let v = storage_at(flat, &sigma)?;
            let n = dissipation_matrix_with(model, &v, supply, &sigma)?;
            let eigs = la::hermitian_eigenvalues(&n);
            let lam = eigs[0];
            let ok = lam >= -effective_tol(tol, &eigs);
            let a = model.a().symbol(&sigma)?;
            let b = model.b().symbol(&sigma)?;
            let ctrb = pbh_controllable(&a, &b).ok_or(Error::NumericalFailure {
                what: "eigensolve in PBH test",
                sigma: sigma.clone(),
            })?;
            Ok((flat, lam, ok, ctrb))
        })
        .collect();
    let results = results?;
    let verdict = results.iter().all(|r| r.2);
    let worst = results
        .iter()
        .copied()
        .reduce(|acc, cur| if cur.1 < acc.1 || (cur.1 == acc.1 && cur.0 < acc.0) { cur } else { acc })
        .expect("grid is nonempty");
    let uncontrollable: Vec<usize> =
        results.iter().filter(|r| !r.3).map(|r| r.0).collect();
    let pbh_pass = uncontrollable.is_empty();
    let pbh_detail = if pbh_pass {
        "pair (A(sigma), B(sigma)) controllable at every grid node; needed only for necessity, does not gate the verdict".to_string()
    } else {
        format!(
            "pair (A(sigma), B(sigma)) uncontrollable at {} of {} nodes (first at sigma = {:?}); needed only for necessity, does not gate the verdict",
            uncontrollable.len(),
            results.len(),
            grid.node(uncontrollable[0])
        )
    };
    Ok(CertificationReport {
        property: Property::Dissipative,
        verdict,
        margin: Some(worst.1),
        witness: Some(Witness { omega: None, sigma: grid.node(worst.0), lambda_min: worst.1 }),
        grid: grid.clone(),
        omega_sweep: None,
        side_conditions: vec![SideCondition {
            name: "pbh_controllability".into(),
            pass: pbh_pass,
            detail: pbh_detail,
        }],
        tol,
    })
}

/// E(omega, sigma) = F(i omega, sigma)* G* + G F(i omega, sigma), with
/// G = G(i omega, sigma) for polynomial supplies.
pub fn passivity_matrix(
    model: &NetworkModel,
    supply: &SupplySpec,
    omega: f64,
    sigma: &[f64],
) -> Result<CMatrix> {
    check_supply_shape(model, supply)?;
    let s = Complex64::new(0.0, omega);
    let f = transfer_function(model, s, sigma)?;
    let g = supply.symbol(s, sigma)?;
    let e = f.adjoint() * g.adjoint() + g * f;
    Ok(la::hermitian_part(&e))
}

struct SweepStats {
    min_lambda: f64,
    min_flat: usize,
    min_omega: f64,
    all_ok: bool,
    evaluated: usize,
    skipped: usize,
}

impl SweepStats {
    fn empty() -> Self {
        Self {
            min_lambda: f64::INFINITY,
            min_flat: usize::MAX,
            min_omega: f64::NAN,
            all_ok: true,
            evaluated: 0,
            skipped: 0,
        }
    }

    fn absorb(mut self, other: Self) -> Self {
        if other.min_lambda < self.min_lambda
            || (other.min_lambda == self.min_lambda && other.min_flat < self.min_flat)
        {
            self.min_lambda = other.min_lambda;
            self.min_flat = other.min_flat;
            self.min_omega = other.min_omega;
        }
        self.all_ok &= other.all_ok;
        self.evaluated += other.evaluated;
        self.skipped += other.skipped;
        self
    }
}

/// Shared sweep engine: evaluates a Hermitian matrix per (omega, sigma)
/// and aggregates min-eigenvalue statistics deterministically.
fn sweep_hermitian<FBuild>(
    grid: &TorusGrid,
    omegas: &[f64],
    tol: f64,
    allow_skips: bool,
    build: FBuild,
) -> Result<SweepStats>
where
    FBuild: Fn(f64, &[f64]) -> Result<CMatrix> + Sync,
{
    let per_node: Result<Vec<SweepStats>> = (0..grid.node_count())
        .into_par_iter()
        .map(|flat| {
            let sigma = grid.node(flat);
            let mut stats = SweepStats::empty();
            for &omega in omegas {
                let mat = match build(omega, &sigma) {
                    Ok(m) => m,
                    Err(Error::ResolventSingular { .. }) if allow_skips => {
                        stats.skipped += 1;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let eigs = la::hermitian_eigenvalues(&mat);
                let lam = eigs[0];
                stats.evaluated += 1;
                stats.all_ok &= lam >= -effective_tol(tol, &eigs);
                if lam < stats.min_lambda {
                    stats.min_lambda = lam;
                    stats.min_flat = flat;
                    stats.min_omega = omega;
                }
            }
            Ok(stats)
        })
        .collect();
    Ok(per_node?.into_iter().fold(SweepStats::empty(), SweepStats::absorb))
}

fn check_passivity_as(
    property: Property,
    model: &NetworkModel,
    supply: &SupplySpec,
    grid: &TorusGrid,
    sweep: &OmegaSweep,
    tol: f64,
) -> Result<CertificationReport> {
    check_supply_shape(model, supply)?;
    let stability = spectral_abscissa(model, grid)?;
    let hurwitz = stability.hurwitz;
    let mut side_conditions = vec![SideCondition {
        name: "hurwitz".into(),
        pass: hurwitz,
        detail: format!(
            "spectral abscissa {:.6e} at sigma = {:?} (threshold -{:.0e})",
            stability.abscissa,
            stability.worst_sigma,
            spectral::HURWITZ_TOL
        ),
    }];

    // Interior sweep carries the margin. A non-Hurwitz model may have
    // isolated imaginary-axis resolvent singularities; those points are
    // skipped (the verdict is already false) so the margin stays usable.
    let stats = sweep_hermitian(grid, &sweep.values, tol, !hurwitz, |omega, sigma| {
        passivity_matrix(model, supply, omega, sigma)
    })?;

    // omega = 0 boundary: gating but margin-free.
    let zero_stats = sweep_hermitian(grid, &[0.0], tol, !hurwitz, |omega, sigma| {
        passivity_matrix(model, supply, omega, sigma)
    })?;
    side_conditions.push(SideCondition {
        name: "omega_zero".into(),
        pass: zero_stats.all_ok,
        detail: boundary_detail(&zero_stats, grid, "omega = 0"),
    });

    // omega -> infinity limit: E -> G D + D* G* for static supplies.
    let mut inf_ok = true;
    if supply.is_static() {
        let inf_stats = sweep_hermitian(grid, &[f64::INFINITY], tol, false, |_, sigma| {
            let d = model.d().symbol(sigma)?;
            let g = supply.static_symbol(sigma)?;
            Ok(la::hermitian_part(&(&g * &d + d.adjoint() * g.adjoint())))
        })?;
        inf_ok = inf_stats.all_ok;
        side_conditions.push(SideCondition {
            name: "omega_infinity_limit".into(),
            pass: inf_ok,
            detail: boundary_detail(&inf_stats, grid, "G D + D* G*"),
        });
    }

    let margin = (stats.evaluated > 0).then_some(stats.min_lambda);
    let witness = (stats.evaluated > 0).then(|| Witness {
        omega: Some(stats.min_omega),
        sigma: grid.node(stats.min_flat),
        lambda_min: stats.min_lambda,
    });
    Ok(CertificationReport {
        property,
        verdict: hurwitz && stats.all_ok && zero_stats.all_ok && inf_ok,
        margin,
        witness,
        grid: grid.clone(),
        omega_sweep: Some(sweep.clone()),
        side_conditions,
        tol,
    })
}

fn boundary_detail(stats: &SweepStats, grid: &TorusGrid, label: &str) -> String {
    if stats.evaluated == 0 {
        return format!("{label}: no node evaluable ({} skipped)", stats.skipped);
    }
    format!(
        "{label}: min lambda {:.6e} at sigma = {:?}; checked against tolerance, excluded from the margin",
        stats.min_lambda,
        grid.node(stats.min_flat)
    )
}

/// Passivity certificate: nonnegative work from zero initial state.
///
/// Requires A(sigma) Hurwitz on the grid (gating side condition), then
/// checks E(omega, sigma) >= -tol over the sweep, the omega = 0 boundary
/// and (for static supplies) the omega -> infinity limit G D + D* G*.
pub fn check_passivity(
    model: &NetworkModel,
    supply: &SupplySpec,
    grid: &TorusGrid,
    sweep: &OmegaSweep,
    tol: f64,
) -> Result<CertificationReport> {
    check_passivity_as(Property::Passive, model, supply, grid, sweep, tol)
}

/// Positive-real certificate: passivity with the identity supply (r = m).
pub fn check_positive_real(
    model: &NetworkModel,
    grid: &TorusGrid,
    sweep: &OmegaSweep,
    tol: f64,
) -> Result<CertificationReport> {
    if model.output_dim() != model.input_dim() {
        return Err(Error::InvalidArgument(format!(
            "positive realness needs r = m, got r = {}, m = {}",
            model.output_dim(),
            model.input_dim()
        )));
    }
    let supply = SupplySpec::identity(model.dim_nu(), model.input_dim())?;
    check_passivity_as(Property::PositiveReal, model, &supply, grid, sweep, tol)
}

/// Negative-imaginary certificate: (1/i)(F - F*) <= tol for omega >= 0.
///
/// Internally checks lambda_min(i (F - F*)) >= -tol so the margin has the
/// same orientation as the other certificates.
pub fn check_negative_imaginary(
    model: &NetworkModel,
    grid: &TorusGrid,
    sweep: &OmegaSweep,
    tol: f64,
) -> Result<CertificationReport> {
    if model.output_dim() != model.input_dim() {
        return Err(Error::InvalidArgument(format!(
            "negative imaginariness needs r = m, got r = {}, m = {}",
            model.output_dim(),
            model.input_dim()
        )));
    }
    if sweep.values.iter().any(|&w| w < 0.0) {
        return Err(Error::InvalidArgument(
            "negative-imaginary sweep must contain only omega >= 0".into(),
        ));
    }
    let stats = sweep_hermitian(grid, &sweep.values, tol, false, |omega, sigma| {
        let f = transfer_function(model, Complex64::new(0.0, omega), sigma)?;
        let imag_part = (&f - f.adjoint()) * Complex64::new(0.0, 1.0);
        Ok(la::hermitian_part(&imag_part))
    })?;
    let margin = (stats.evaluated > 0).then_some(stats.min_lambda);
    let witness = (stats.evaluated > 0).then(|| Witness {
        omega: Some(stats.min_omega),
        sigma: grid.node(stats.min_flat),
        lambda_min: stats.min_lambda,
    });
    Ok(CertificationReport {
        property: Property::NegativeImaginary,
        verdict: stats.all_ok,
        margin,
        witness,
        grid: grid.clone(),
        omega_sweep: Some(sweep.clone()),
        side_conditions: Vec::new(),
        tol,
    })
}

/// Right-hand side -Q(sigma) of the per-frequency Lyapunov equation.
#[derive(Debug, Clone)]
pub enum LyapunovRhs {
    Identity,
    Stencil(MatrixStencil),
}

/// One node of the synthesized storage table.
///
/// lambda_min/2 and lambda_max/2 bound the energy density at this
/// frequency: lambda_min/2 |X|^2 <= H(sigma) <= lambda_max/2 |X|^2.
#[derive(Debug, Clone)]
pub struct StorageNode {
    pub sigma: Vec<f64>,
    pub v: CMatrix,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

#[derive(Debug, Clone)]
pub struct StorageTable {
    pub grid: TorusGrid,
    pub nodes: Vec<StorageNode>,
}

/// Quadratic stability summary of a synthesized (or given) storage.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityMargin {
    /// min over the grid of lambda_min(V(sigma)); must be positive.
    pub mu: f64,
    /// max over the grid of ||V(sigma)||.
    pub v_norm: f64,
    /// v_norm / mu >= 1.
    pub condition_number: f64,
    /// Factor in the isolated-network state bound
    /// ||x(t)||^2 <= bound_factor * ||x(0)||^2; equals the condition number.
    pub bound_factor: f64,
}

/// Solve A(sigma)* V(sigma) + V(sigma) A(sigma) = -Q(sigma) per grid node.
///
/// Requires a Hurwitz grid verdict first; each solution is Hermitian
/// positive definite and the aggregated quantities give the quadratic
/// stability margin of the isolated network.
pub fn solve_storage(
    model: &NetworkModel,
    q: &LyapunovRhs,
    grid: &TorusGrid,
) -> Result<(StorageTable, StabilityMargin)> {
    let stability = spectral_abscissa(model, grid)?;
    if !stability.hurwitz {
        return Err(Error::PreconditionViolation(format!(
            "storage synthesis needs a Hurwitz A(sigma); abscissa {:.6e} at sigma = {:?}",
            stability.abscissa, stability.worst_sigma
        )));
    }
    if let LyapunovRhs::Stencil(s) = q {
        if s.rows() != model.state_dim() || s.cols() != model.state_dim() {
            return Err(Error::InvalidArgument("Q stencil must be n x n".into()));
        }
    }
    let nodes: Result<Vec<StorageNode>> = (0..grid.node_count())
        .into_par_iter()
        .map(|flat| {
            let sigma = grid.node(flat);
            let v = lyapunov_node(model, q, &sigma)?;
            let eigs = la::hermitian_eigenvalues(&v);
            let (lambda_min, lambda_max) = (eigs[0], eigs[eigs.len() - 1]);
            if lambda_min <= 0.0 {
                return Err(Error::NumericalFailure {
                    what: "storage not positive definite",
                    sigma: sigma.clone(),
                });
            }
            Ok(StorageNode { sigma, v, lambda_min, lambda_max })
        })
        .collect();
    let nodes = nodes?;
    let mu = nodes.iter().map(|n| n.lambda_min).fold(f64::INFINITY, f64::min);
    let v_norm = nodes
        .iter()
        .map(|n| n.lambda_max.abs().max(n.lambda_min.abs()))
        .fold(0.0f64, f64::max);
    let condition_number = v_norm / mu;
    Ok((
        StorageTable { grid: grid.clone(), nodes },
        StabilityMargin { mu, v_norm, condition_number, bound_factor: condition_number },
    ))
}

fn lyapunov_node(model: &NetworkModel, q: &LyapunovRhs, sigma: &[f64]) -> Result<CMatrix> {
    let n = model.state_dim();
    let a = model.a().symbol(sigma)?;
    let qm = match q {
        LyapunovRhs::Identity => CMatrix::identity(n, n),
        LyapunovRhs::Stencil(s) => la::hermitian_part(&s.symbol(sigma)?),
    };
    la::lyapunov_solve(&a, &qm).ok_or(Error::NumericalFailure {
        what: "Lyapunov solve",
        sigma: sigma.to_vec(),
    })
}

/// Lyapunov storage values at an explicit frequency list, e.g. the
/// circulant frequencies of a truncated lattice. The caller is expected to
/// have verified the Hurwitz property (each solve fails otherwise).
pub fn lyapunov_storage_at(
    model: &NetworkModel,
    q: &LyapunovRhs,
    sigmas: &[Vec<f64>],
) -> Result<Vec<CMatrix>> {
    sigmas.iter().map(|sigma| lyapunov_node(model, q, sigma)).collect()
}
