//! Time-domain integration on a truncated periodic lattice.
//!
//! The infinite network is cut to L sites per axis with wrap-around
//! coupling, which turns every stencil into a dense block-circulant
//! matrix and keeps the frequency-domain picture exact: the discrete
//! Fourier transform block-diagonalizes the truncated system at the
//! circulant frequencies 2*pi*k/L. Two independent solvers are provided,
//! a physical-space RK4 and a per-frequency RK4, so the diagonalization
//! can be cross-validated rather than assumed.
//!
//! Energy bookkeeping along a trace never differentiates numerically:
//! dH/dt is evaluated from the right-hand side x^T V (A x + B u), which
//! keeps the balance S - dH/dt equal to the dissipation quadratic form up
//! to round-off, independent of integrator error.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::certify::{dissipation_matrix, StorageSpec, SupplySpec};
use crate::error::{Error, Result};
use crate::la::{CMatrix, CVector};
use crate::model::NetworkModel;
use crate::stencil::circulant_frequencies;

/// RK4 step-size guard: dt * max_k ||A(sigma_k)|| must stay below this.
pub const STEP_NORM_LIMIT: f64 = 0.5;

/// Losslessness tolerance for phonon eigenvalues (relative).
pub const PHONON_IMAGINARY_TOL: f64 = 1e-9;

/// Eigenpair residual tolerance for phonon initialization (relative).
pub const PHONON_EIGEN_RESIDUAL_TOL: f64 = 1e-9;

/// A time-dependent input field on the truncated lattice, sampled as one
/// flat vector of length L^nu * m (site-major).
pub trait InputSignal: Sync {
    fn sample(&self, t: f64) -> DVector<f64>;
}

impl<F> InputSignal for F
where
    F: Fn(f64) -> DVector<f64> + Sync,
{
    fn sample(&self, t: f64) -> DVector<f64> {
        self(t)
    }
}

/// u = 0.
pub struct ZeroInput {
    len: usize,
}

impl ZeroInput {
    pub fn new(len: usize) -> Self {
        Self { len }
    }
}

impl InputSignal for ZeroInput {
    fn sample(&self, _t: f64) -> DVector<f64> {
        DVector::zeros(self.len)
    }
}

/// Smooth compactly supported pulse amp * sin^2(pi (t - on)/(off - on))
/// on [on, off], applied to a single entry of the input field.
pub struct PulseInput {
    len: usize,
    index: usize,
    amplitude: f64,
    t_on: f64,
    t_off: f64,
}

impl PulseInput {
    pub fn new(len: usize, index: usize, amplitude: f64, t_on: f64, t_off: f64) -> Result<Self> {
        if index >= len {
            return Err(Error::InvalidArgument(format!(
                "pulse index {index} out of range for input length {len}"
            )));
        }
        if t_off <= t_on {
            return Err(Error::InvalidArgument("pulse needs t_off > t_on".into()));
        }
        Ok(Self { len, index, amplitude, t_on, t_off })
    }
}

impl InputSignal for PulseInput {
    fn sample(&self, t: f64) -> DVector<f64> {
        let mut u = DVector::zeros(self.len);
        if t >= self.t_on && t <= self.t_off {
            let phase = std::f64::consts::PI * (t - self.t_on) / (self.t_off - self.t_on);
            u[self.index] = self.amplitude * phase.sin().powi(2);
        }
        u
    }
}

/// amp * sin(omega t) on one entry, optionally switched off at t_off.
pub struct SineInput {
    len: usize,
    index: usize,
    amplitude: f64,
    omega: f64,
    t_off: Option<f64>,
}

impl SineInput {
    pub fn new(
        len: usize,
        index: usize,
        amplitude: f64,
        omega: f64,
        t_off: Option<f64>,
    ) -> Result<Self> {
        if index >= len {
            return Err(Error::InvalidArgument(format!(
                "sine index {index} out of range for input length {len}"
            )));
        }
        Ok(Self { len, index, amplitude, omega, t_off })
    }
}

impl InputSignal for SineInput {
    fn sample(&self, t: f64) -> DVector<f64> {
        let mut u = DVector::zeros(self.len);
        if self.t_off.is_none_or(|off| t <= off) {
            u[self.index] = self.amplitude * (self.omega * t).sin();
        }
        u
    }
}

/// Travelling plane wave amp * cos(omega t + j.sigma) on one input channel,
/// with sigma = 2*pi*k/L on the circulant grid.
pub struct PlaneWaveInput {
    dim_nu: usize,
    period: usize,
    channels: usize,
    channel: usize,
    sigma: Vec<f64>,
    omega: f64,
    amplitude: f64,
}

impl PlaneWaveInput {
    pub fn new(
        dim_nu: usize,
        period: usize,
        channels: usize,
        channel: usize,
        k_index: &[i64],
        omega: f64,
        amplitude: f64,
    ) -> Result<Self> {
        if k_index.len() != dim_nu {
            return Err(Error::DimensionMismatch {
                what: "plane-wave index length",
                expected: dim_nu,
                got: k_index.len(),
            });
        }
        if channel >= channels {
            return Err(Error::InvalidArgument("plane-wave channel out of range".into()));
        }
        let sigma = k_index
            .iter()
            .map(|&k| 2.0 * std::f64::consts::PI * k as f64 / period as f64)
            .collect();
        Ok(Self { dim_nu, period, channels, channel, sigma, omega, amplitude })
    }
}

impl InputSignal for PlaneWaveInput {
    fn sample(&self, t: f64) -> DVector<f64> {
        let sites = self.period.pow(self.dim_nu as u32);
        let mut u = DVector::zeros(sites * self.channels);
        for site in 0..sites {
            let phase: f64 = site_multi_index(site, self.dim_nu, self.period)
                .iter()
                .zip(&self.sigma)
                .map(|(&j, &s)| j as f64 * s)
                .sum();
            u[site * self.channels + self.channel] =
                self.amplitude * (self.omega * t + phase).cos();
        }
        u
    }
}

/// Pre-recorded samples with linear interpolation, zero outside the range.
pub struct SampledInput {
    dt: f64,
    samples: Vec<DVector<f64>>,
}

impl SampledInput {
    pub fn new(dt: f64, samples: Vec<DVector<f64>>) -> Result<Self> {
        if dt <= 0.0 || samples.is_empty() {
            return Err(Error::InvalidArgument("sampled input needs dt > 0 and samples".into()));
        }
        Ok(Self { dt, samples })
    }
}

impl InputSignal for SampledInput {
    fn sample(&self, t: f64) -> DVector<f64> {
        let len = self.samples[0].len();
        if t < 0.0 {
            return DVector::zeros(len);
        }
        let pos = t / self.dt;
        let lo = pos.floor() as usize;
        if lo + 1 >= self.samples.len() {
            return if lo < self.samples.len() {
                self.samples[lo].clone()
            } else {
                DVector::zeros(len)
            };
        }
        let w = pos - lo as f64;
        &self.samples[lo] * (1.0 - w) + &self.samples[lo + 1] * w
    }
}

fn site_multi_index(flat: usize, dim_nu: usize, period: usize) -> Vec<usize> {
    let mut idx = vec![0usize; dim_nu];
    let mut rem = flat;
    for ax in (0..dim_nu).rev() {
        idx[ax] = rem % period;
        rem /= period;
    }
    idx
}

/// Dense periodic truncation of a network, with optional storage/supply
/// instrumentation for energy bookkeeping along traces.
pub struct TruncatedNetwork {
    model: NetworkModel,
    period: usize,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
    v: Option<DMatrix<f64>>,
    g: Option<DMatrix<f64>>,
    a_norm: f64,
}

impl TruncatedNetwork {
    pub fn new(model: NetworkModel, period: usize) -> Result<Self> {
        let a = model.a().circulant_embed(period)?;
        let b = model.b().circulant_embed(period)?;
        let c = model.c().circulant_embed(period)?;
        let d = model.d().circulant_embed(period)?;
        // exact operator norm of the truncated A: max over circulant freqs
        let mut a_norm = 0.0f64;
        for sigma in circulant_frequencies(model.dim_nu(), period) {
            a_norm = a_norm.max(crate::la::spectral_norm(&model.a().symbol(&sigma)?));
        }
        Ok(Self { model, period, a, b, c, d, v: None, g: None, a_norm })
    }

    /// Attach a storage stencil; enables the Hamiltonian channel H(t).
    pub fn with_storage(mut self, storage: &StorageSpec) -> Result<Self> {
        if storage.state_dim() != self.model.state_dim() {
            return Err(Error::DimensionMismatch {
                what: "storage state dimension",
                expected: self.model.state_dim(),
                got: storage.state_dim(),
            });
        }
        self.v = Some(storage.stencil().circulant_embed(self.period)?);
        Ok(self)
    }

    /// Attach per-frequency storage values V(sigma_k) at the circulant
    /// frequencies (in lexicographic k order), reconstructing the dense
    /// symmetric block-circulant storage by inverse DFT. This admits
    /// storages that are not finite stencils, e.g. per-node Lyapunov
    /// solutions.
    pub fn with_storage_symbols(mut self, symbols: &[CMatrix]) -> Result<Self> {
        let n = self.model.state_dim();
        let sites = self.site_count();
        if symbols.len() != sites {
            return Err(Error::DimensionMismatch {
                what: "storage symbol count",
                expected: sites,
                got: symbols.len(),
            });
        }
        let nu = self.model.dim_nu();
        let l = self.period;
        let mut dense = DMatrix::<f64>::zeros(sites * n, sites * n);
        // block (j, k) = (1/L^nu) sum_f e^{i (j - k).sigma_f} V_f
        for j in 0..sites {
            let j_idx = site_multi_index(j, nu, l);
            for k in 0..sites {
                let k_idx = site_multi_index(k, nu, l);
                let mut block = CMatrix::zeros(n, n);
                for (f, sym) in symbols.iter().enumerate() {
                    let f_idx = site_multi_index(f, nu, l);
                    let phase: f64 = (0..nu)
                        .map(|ax| {
                            let diff = j_idx[ax] as f64 - k_idx[ax] as f64;
                            2.0 * std::f64::consts::PI * f_idx[ax] as f64 * diff / l as f64
                        })
                        .sum();
                    block += sym * Complex64::new(0.0, phase).exp();
                }
                block /= Complex64::new(sites as f64, 0.0);
                let mut view = dense.view_mut((j * n, k * n), (n, n));
                for r in 0..n {
                    for c in 0..n {
                        view[(r, c)] = block[(r, c)].re;
                    }
                }
            }
        }
        // scrub round-off asymmetry
        dense = (&dense + dense.transpose()).scale(0.5);
        self.v = Some(dense);
        Ok(self)
    }

    /// Attach a static supply; enables the supply-rate channel S(t).
    pub fn with_supply(mut self, supply: &SupplySpec) -> Result<Self> {
        if !supply.is_static() {
            return Err(Error::PolynomialSupplyUnsupported { degree: supply.degree() });
        }
        if supply.input_dim() != self.model.input_dim()
            || supply.output_dim() != self.model.output_dim()
        {
            return Err(Error::InvalidArgument("supply shape must be m x r".into()));
        }
        let g = supply
            .coefficient(0)
            .expect("static supply has a degree-0 coefficient")
            .circulant_embed(self.period)?;
        self.g = Some(g);
        Ok(self)
    }

    pub fn model(&self) -> &NetworkModel {
        &self.model
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn site_count(&self) -> usize {
        self.period.pow(self.model.dim_nu() as u32)
    }

    pub fn state_len(&self) -> usize {
        self.site_count() * self.model.state_dim()
    }

    pub fn input_len(&self) -> usize {
        self.site_count() * self.model.input_dim()
    }

    pub fn output_len(&self) -> usize {
        self.site_count() * self.model.output_dim()
    }

    /// Operator norm of the truncated state matrix (max over circulant
    /// frequencies of the symbol norm).
    pub fn state_norm(&self) -> f64 {
        self.a_norm
    }

    pub fn dense_a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn dense_b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn dense_c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn dense_d(&self) -> &DMatrix<f64> {
        &self.d
    }

    /// Classical RK4 on the truncated network, sampling every dt.
    ///
    /// H(t), S(t) and the residual S - dH/dt are recorded when storage
    /// and/or supply are attached (channels without instrumentation stay
    /// zero). dH/dt uses the right-hand side, never finite differences.
    pub fn integrate(
        &self,
        x0: &DVector<f64>,
        input: &dyn InputSignal,
        t_end: f64,
        dt: f64,
    ) -> Result<SimulationTrace> {
        if dt <= 0.0 || t_end < 0.0 {
            return Err(Error::StepSize("need dt > 0 and t_end >= 0".into()));
        }
        if dt * self.a_norm >= STEP_NORM_LIMIT {
            return Err(Error::StepSize(format!(
                "dt * ||A|| = {:.3e} exceeds the RK4 guard {}; reduce dt below {:.3e}",
                dt * self.a_norm,
                STEP_NORM_LIMIT,
                STEP_NORM_LIMIT / self.a_norm
            )));
        }
        if x0.len() != self.state_len() {
            return Err(Error::DimensionMismatch {
                what: "initial state length",
                expected: self.state_len(),
                got: x0.len(),
            });
        }
        let steps = (t_end / dt).round() as usize;
        let mut x = x0.clone();
        let mut trace = SimulationTrace::with_capacity(steps + 1, dt);
        let rhs = |x: &DVector<f64>, u: &DVector<f64>| -> DVector<f64> { &self.a * x + &self.b * u };
        for step in 0..=steps {
            let t = step as f64 * dt;
            let u = self.checked_input(input, t)?;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence { time: t });
            }
            self.record_sample(&mut trace, t, &x, &u);
            if step == steps {
                break;
            }
            let u_half = self.checked_input(input, t + 0.5 * dt)?;
            let u_full = self.checked_input(input, t + dt)?;
            let k1 = rhs(&x, &u);
            let k2 = rhs(&(&x + &k1 * (0.5 * dt)), &u_half);
            let k3 = rhs(&(&x + &k2 * (0.5 * dt)), &u_half);
            let k4 = rhs(&(&x + &k3 * dt), &u_full);
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        }
        Ok(trace)
    }

    fn checked_input(&self, input: &dyn InputSignal, t: f64) -> Result<DVector<f64>> {
        let u = input.sample(t);
        if u.len() != self.input_len() {
            return Err(Error::DimensionMismatch {
                what: "input sample length",
                expected: self.input_len(),
                got: u.len(),
            });
        }
        Ok(u)
    }

    fn record_sample(&self, trace: &mut SimulationTrace, t: f64, x: &DVector<f64>, u: &DVector<f64>) {
        let y = &self.c * x + &self.d * u;
        let hamiltonian = self.v.as_ref().map_or(0.0, |v| 0.5 * x.dot(&(v * x)));
        let supply = self.g.as_ref().map_or(0.0, |g| u.dot(&(g * &y)));
        let hdot = self.v.as_ref().map_or(0.0, |v| {
            let xdot = &self.a * x + &self.b * u;
            x.dot(&(v * xdot))
        });
        trace.push(t, x.clone(), y, u.clone(), hamiltonian, supply, supply - hdot);
    }
}

/// Time series of a truncated-network simulation.
#[derive(Debug, Clone)]
pub struct SimulationTrace {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub outputs: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
    pub hamiltonian: Vec<f64>,
    pub supply: Vec<f64>,
    /// S(t) - dH/dt with dH/dt evaluated from the right-hand side.
    pub dissipation_residual: Vec<f64>,
}

impl SimulationTrace {
    fn with_capacity(capacity: usize, dt: f64) -> Self {
        Self {
            dt,
            times: Vec::with_capacity(capacity),
            states: Vec::with_capacity(capacity),
            outputs: Vec::with_capacity(capacity),
            inputs: Vec::with_capacity(capacity),
            hamiltonian: Vec::with_capacity(capacity),
            supply: Vec::with_capacity(capacity),
            dissipation_residual: Vec::with_capacity(capacity),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        t: f64,
        x: DVector<f64>,
        y: DVector<f64>,
        u: DVector<f64>,
        h: f64,
        s: f64,
        residual: f64,
    ) {
        self.times.push(t);
        self.states.push(x);
        self.outputs.push(y);
        self.inputs.push(u);
        self.hamiltonian.push(h);
        self.supply.push(s);
        self.dissipation_residual.push(residual);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Cumulative work W(T) = integral of S, trapezoidal rule per sample.
    pub fn cumulative_work(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        for i in 0..self.len() {
            if i > 0 {
                acc += 0.5 * self.dt * (self.supply[i - 1] + self.supply[i]);
            }
            out.push(acc);
        }
        out
    }

    /// CSV: time, ||x||, ||y||, ||u||, H, S, residual.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "time,x_norm,y_norm,u_norm,hamiltonian,supply,dissipation_residual")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.times[i],
                self.states[i].norm(),
                self.outputs[i].norm(),
                self.inputs[i].norm(),
                self.hamiltonian[i],
                self.supply[i],
                self.dissipation_residual[i]
            )?;
        }
        Ok(())
    }

    /// Full-state dump: row-major little-endian f64 (one row per sample)
    /// plus a JSON sidecar `<path>.json` describing the shape.
    pub fn write_state_binary(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        for x in &self.states {
            for &v in x.iter() {
                file.write_all(&v.to_le_bytes())?;
            }
        }
        let sidecar = serde_json::json!({
            "schema": 1,
            "dtype": "float64",
            "byte_order": "little_endian",
            "layout": "row-major",
            "rows": self.len(),
            "cols": self.states.first().map_or(0, |x| x.len()),
            "dt": self.dt,
        });
        let mut sidecar_path = path.as_os_str().to_owned();
        sidecar_path.push(".json");
        std::fs::write(sidecar_path, serde_json::to_string_pretty(&sidecar).unwrap())?;
        Ok(())
    }
}

/// Forward DFT of a site-major field: X_k = sum_j e^{-i j.sigma_k} x_j.
pub fn dft_field(dim_nu: usize, period: usize, block_dim: usize, x: &DVector<f64>) -> Vec<CVector> {
    let sites = period.pow(dim_nu as u32);
    assert_eq!(x.len(), sites * block_dim, "field length mismatch");
    let freqs = circulant_frequencies(dim_nu, period);
    (0..sites)
        .map(|k| {
            let sigma = &freqs[k];
            let mut acc = CVector::zeros(block_dim);
            for j in 0..sites {
                let phase: f64 = site_multi_index(j, dim_nu, period)
                    .iter()
                    .zip(sigma)
                    .map(|(&ji, &si)| ji as f64 * si)
                    .sum();
                let w = Complex64::new(0.0, -phase).exp();
                for d in 0..block_dim {
                    acc[d] += w * x[j * block_dim + d];
                }
            }
            acc
        })
        .collect()
}

/// Inverse DFT back to a real site-major field (real part).
pub fn idft_field(dim_nu: usize, period: usize, block_dim: usize, hats: &[CVector]) -> DVector<f64> {
    let sites = period.pow(dim_nu as u32);
    assert_eq!(hats.len(), sites, "node count mismatch");
    let freqs = circulant_frequencies(dim_nu, period);
    let mut out = DVector::zeros(sites * block_dim);
    for j in 0..sites {
        let j_idx = site_multi_index(j, dim_nu, period);
        for (k, hat) in hats.iter().enumerate() {
            let phase: f64 =
                j_idx.iter().zip(&freqs[k]).map(|(&ji, &si)| ji as f64 * si).sum();
            let w = Complex64::new(0.0, phase).exp();
            for d in 0..block_dim {
                out[j * block_dim + d] += (w * hat[d]).re;
            }
        }
    }
    out / sites as f64
}

/// Per-frequency trace from [`spectral_integrate`].
pub struct SpectralTrace {
    pub dt: f64,
    pub times: Vec<f64>,
    pub sigmas: Vec<Vec<f64>>,
    /// `states[node][sample]`
    pub states: Vec<Vec<CVector>>,
    /// `outputs[node][sample]`
    pub outputs: Vec<Vec<CVector>>,
}

impl SpectralTrace {
    /// Inverse DFT across nodes at each sample, producing the physical
    /// site-major state field.
    pub fn to_physical_states(&self, dim_nu: usize, period: usize) -> Vec<DVector<f64>> {
        let samples = self.times.len();
        (0..samples)
            .map(|i| {
                let hats: Vec<CVector> =
                    self.states.iter().map(|node| node[i].clone()).collect();
                let block_dim = hats[0].len();
                idft_field(dim_nu, period, block_dim, &hats)
            })
            .collect()
    }
}

/// Integrate the per-frequency systems dX/dt = A(sigma_k) X + B(sigma_k) U
/// independently at every circulant frequency with the same RK4 scheme as
/// [`TruncatedNetwork::integrate`].
///
/// `input` maps (flat node index, time) to the per-node input U_k(t).
pub fn spectral_integrate<FU>(
    model: &NetworkModel,
    period: usize,
    x0_hat: &[CVector],
    input: FU,
    t_end: f64,
    dt: f64,
) -> Result<SpectralTrace>
where
    FU: Fn(usize, f64) -> CVector + Sync,
{
    if dt <= 0.0 || t_end < 0.0 {
        return Err(Error::StepSize("need dt > 0 and t_end >= 0".into()));
    }
    let freqs = circulant_frequencies(model.dim_nu(), period);
    if x0_hat.len() != freqs.len() {
        return Err(Error::DimensionMismatch {
            what: "per-node initial state count",
            expected: freqs.len(),
            got: x0_hat.len(),
        });
    }
    let mut a_norm = 0.0f64;
    for sigma in &freqs {
        a_norm = a_norm.max(crate::la::spectral_norm(&model.a().symbol(sigma)?));
    }
    if dt * a_norm >= STEP_NORM_LIMIT {
        return Err(Error::StepSize(format!(
            "dt * ||A|| = {:.3e} exceeds the RK4 guard {}",
            dt * a_norm,
            STEP_NORM_LIMIT
        )));
    }
    let steps = (t_end / dt).round() as usize;
    let n = model.state_dim();
    let per_node: Result<Vec<(Vec<CVector>, Vec<CVector>)>> = freqs
        .par_iter()
        .enumerate()
        .map(|(k, sigma)| {
            let a = model.a().symbol(sigma)?;
            let b = model.b().symbol(sigma)?;
            let c = model.c().symbol(sigma)?;
            let d = model.d().symbol(sigma)?;
            let mut x = x0_hat[k].clone();
            if x.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "per-node initial state length",
                    expected: n,
                    got: x.len(),
                });
            }
            let mut states = Vec::with_capacity(steps + 1);
            let mut outputs = Vec::with_capacity(steps + 1);
            let rhs = |x: &CVector, u: &CVector| -> CVector { &a * x + &b * u };
            for step in 0..=steps {
                let t = step as f64 * dt;
                let u = input(k, t);
                if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::Divergence { time: t });
                }
                outputs.push(&c * &x + &d * &u);
                states.push(x.clone());
                if step == steps {
                    break;
                }
                let u_half = input(k, t + 0.5 * dt);
                let u_full = input(k, t + dt);
                let k1 = rhs(&x, &u);
                let k2 = rhs(&(&x + &k1 * Complex64::new(0.5 * dt, 0.0)), &u_half);
                let k3 = rhs(&(&x + &k2 * Complex64::new(0.5 * dt, 0.0)), &u_half);
                let k4 = rhs(&(&x + &k3 * Complex64::new(dt, 0.0)), &u_full);
                let two = Complex64::new(2.0, 0.0);
                x += (k1 + k2 * two + k3 * two + k4) * Complex64::new(dt / 6.0, 0.0);
            }
            Ok((states, outputs))
        })
        .collect();
    let per_node = per_node?;
    let times = (0..=steps).map(|i| i as f64 * dt).collect();
    let (states, outputs) = per_node.into_iter().unzip();
    Ok(SpectralTrace { dt, times, sigmas: freqs, states, outputs })
}

/// Evaluates the dissipation quadratic form
/// (1 / (2 L^nu)) sum_k Z_k^* N(sigma_k) Z_k with Z_k the DFT of the
/// stacked (x, u) field, precomputing N at the circulant frequencies.
pub struct DissipationFormEvaluator {
    dim_nu: usize,
    period: usize,
    state_dim: usize,
    input_dim: usize,
    n_symbols: Vec<CMatrix>,
}

impl DissipationFormEvaluator {
    pub fn new(
        model: &NetworkModel,
        storage: &StorageSpec,
        supply: &SupplySpec,
        period: usize,
    ) -> Result<Self> {
        let freqs = circulant_frequencies(model.dim_nu(), period);
        let n_symbols: Result<Vec<CMatrix>> = freqs
            .iter()
            .map(|sigma| dissipation_matrix(model, storage, supply, sigma))
            .collect();
        Ok(Self {
            dim_nu: model.dim_nu(),
            period,
            state_dim: model.state_dim(),
            input_dim: model.input_dim(),
            n_symbols: n_symbols?,
        })
    }

    pub fn evaluate(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        let x_hat = dft_field(self.dim_nu, self.period, self.state_dim, x);
        let u_hat = dft_field(self.dim_nu, self.period, self.input_dim, u);
        let sites = self.n_symbols.len();
        let mut acc = 0.0;
        for k in 0..sites {
            let mut z = CVector::zeros(self.state_dim + self.input_dim);
            z.rows_mut(0, self.state_dim).copy_from(&x_hat[k]);
            z.rows_mut(self.state_dim, self.input_dim).copy_from(&u_hat[k]);
            acc += (z.adjoint() * &self.n_symbols[k] * &z)[(0, 0)].re;
        }
        acc / (2.0 * sites as f64)
    }
}

/// Result of a plane-wave (phonon) verification run.
#[derive(Debug, Clone)]
pub struct PhononCheckReport {
    pub sigma: Vec<f64>,
    pub eigenvalue: Complex64,
    pub omega: f64,
    /// ||(A(sigma) - s I) z|| for the unit eigenvector used.
    pub eigen_residual: f64,
    /// max over samples of ||x_sim - x_analytic|| / amplitude.
    pub max_relative_residual: f64,
    /// The simulated trajectory the residual was measured on.
    pub trace: SimulationTrace,
}

/// Initialize a plane wave from an eigenpair of A(sigma) on the circulant
/// grid and compare the integrator against the analytic solution
/// x_j(t) = amplitude * Re(e^{s t + i j.sigma} z).
///
/// The eigenvalue must be purely imaginary (lossless network); damped
/// models are rejected with a precondition violation. `branch` indexes the
/// eigenvalues with nonnegative imaginary part, sorted ascending.
pub fn phonon_wave_check(
    model: &NetworkModel,
    period: usize,
    k_index: &[i64],
    branch: usize,
    amplitude: f64,
    t_end: f64,
    dt: f64,
) -> Result<PhononCheckReport> {
    if k_index.len() != model.dim_nu() {
        return Err(Error::DimensionMismatch {
            what: "phonon index length",
            expected: model.dim_nu(),
            got: k_index.len(),
        });
    }
    let sigma: Vec<f64> = k_index
        .iter()
        .map(|&k| 2.0 * std::f64::consts::PI * k as f64 / period as f64)
        .collect();
    let a = model.a().symbol(&sigma)?;
    let eigs = crate::la::complex_eigenvalues(&a).ok_or(Error::NumericalFailure {
        what: "eigensolve of A(sigma)",
        sigma: sigma.clone(),
    })?;
    let scale = crate::la::spectral_norm(&a);
    let mut candidates: Vec<Complex64> = eigs
        .iter()
        .copied()
        .filter(|e| e.im >= -PHONON_IMAGINARY_TOL * (1.0 + scale))
        .collect();
    candidates.sort_by(|p, q| p.im.partial_cmp(&q.im).unwrap());
    let Some(&s) = candidates.get(branch) else {
        return Err(Error::InvalidArgument(format!(
            "branch {branch} out of range: {} nonnegative-frequency eigenvalues",
            candidates.len()
        )));
    };
    if s.re.abs() > PHONON_IMAGINARY_TOL * (1.0 + s.norm()) {
        return Err(Error::PreconditionViolation(format!(
            "phonon check requires a lossless network: eigenvalue {s} is not purely imaginary"
        )));
    }
    let n = model.state_dim();
    let mut shifted = a.clone();
    for i in 0..n {
        shifted[(i, i)] -= s;
    }
    let (eigen_residual, z) =
        crate::la::smallest_singular_direction(&shifted).ok_or(Error::NumericalFailure {
            what: "eigenvector extraction",
            sigma: sigma.clone(),
        })?;
    if eigen_residual > PHONON_EIGEN_RESIDUAL_TOL * (1.0 + scale) {
        return Err(Error::PreconditionViolation(format!(
            "eigenpair residual {eigen_residual:.3e} exceeds tolerance"
        )));
    }

    let tn = TruncatedNetwork::new(model.clone(), period)?;
    let sites = tn.site_count();
    let analytic = |t: f64| -> DVector<f64> {
        let mut x = DVector::zeros(sites * n);
        let time_factor = (s * t).exp();
        for site in 0..sites {
            let phase: f64 = site_multi_index(site, model.dim_nu(), period)
                .iter()
                .zip(&sigma)
                .map(|(&j, &sg)| j as f64 * sg)
                .sum();
            let w = time_factor * Complex64::new(0.0, phase).exp();
            for dcomp in 0..n {
                x[site * n + dcomp] = amplitude * (w * z[dcomp]).re;
            }
        }
        x
    };
    let x0 = analytic(0.0);
    let input = ZeroInput::new(tn.input_len());
    let trace = tn.integrate(&x0, &input, t_end, dt)?;
    let mut max_residual = 0.0f64;
    if amplitude != 0.0 {
        for (i, &t) in trace.times.iter().enumerate() {
            let diff = (&trace.states[i] - analytic(t)).norm();
            max_residual = max_residual.max(diff / amplitude.abs());
        }
    }
    Ok(PhononCheckReport {
        sigma,
        eigenvalue: s,
        omega: s.im,
        eigen_residual,
        max_relative_residual: max_residual,
        trace,
    })
}
