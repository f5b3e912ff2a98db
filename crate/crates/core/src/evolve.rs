//! Exact-diagonalization dynamics: energy eigenbasis, product states,
//! expectation-value series, canonical thermal reference and diagnostics of
//! persistent oscillations.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::eigh;
use crate::opalg::{LatticeOperator, LatticeSpec, DENSE_MAX_DIM};

/// Default number of samples on a time grid.
pub const DEFAULT_SAMPLES: usize = 2048;
/// Minimum number of samples in an analysis window.
pub const MIN_WINDOW_SAMPLES: usize = 16;
/// Peaks must exceed this multiple of the median Fourier magnitude.
pub const PEAK_MEDIAN_FACTOR: f64 = 5.0;
pub const BISECTION_ITERATIONS: usize = 200;

fn cz(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Full spectrum `H = Σ_k E_k |ψ_k⟩⟨ψ_k|` with ascending energies.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    spec: LatticeSpec,
    pub energies: Vec<f64>,
    /// Eigenvectors as columns.
    pub vectors: DMatrix<Complex64>,
    /// `max_k ‖H v_k − E_k v_k‖ / ‖H‖_op`-style bound with the largest |E|.
    pub max_residual: f64,
    /// `‖V†V − 𝟙‖_max`.
    pub orthonormality_defect: f64,
}

pub fn diagonalize(h: &LatticeOperator) -> Result<SpectralDecomposition> {
    let dim = h.dim();
    if dim > DENSE_MAX_DIM {
        return Err(Error::DimensionCapExceeded {
            dim,
            cap: DENSE_MAX_DIM,
        });
    }
    if !h.is_hermitian(1e-12) {
        return Err(Error::NotHermitian(h.hermiticity_defect()));
    }
    let dense = h.to_dense();
    let (energies, vectors) = eigh(&dense)?;
    let norm = energies.iter().fold(0.0f64, |m, e| m.max(e.abs())).max(f64::MIN_POSITIVE);
    let residuals = &dense * &vectors - &vectors * DMatrix::from_diagonal(&DVector::from_iterator(dim, energies.iter().map(|&e| cz(e))));
    let max_residual = (0..dim).map(|k| residuals.column(k).norm()).fold(0.0, f64::max) / norm;
    let gram = vectors.adjoint() * &vectors - DMatrix::<Complex64>::identity(dim, dim);
    let orthonormality_defect = gram.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max_residual > 1e-9 || orthonormality_defect > 1e-10 {
        return Err(Error::EigenSolver(format!(
            "eigendecomposition check failed: residual {max_residual:.3e}, orthonormality {orthonormality_defect:.3e}"
        )));
    }
    Ok(SpectralDecomposition {
        spec: *h.spec(),
        energies,
        vectors,
        max_residual,
        orthonormality_defect,
    })
}

impl SpectralDecomposition {
    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn e_min(&self) -> f64 {
        self.energies[0]
    }

    pub fn e_max(&self) -> f64 {
        self.energies[self.dim() - 1]
    }

    pub fn span(&self) -> f64 {
        self.e_max() - self.e_min()
    }

    /// `tr H / dim`.
    pub fn mean_energy(&self) -> f64 {
        self.energies.iter().sum::<f64>() / self.dim() as f64
    }

    /// Matrix elements `⟨ψ_j|O|ψ_k⟩`.
    pub fn to_eigenbasis(&self, o: &LatticeOperator) -> Result<DMatrix<Complex64>> {
        if o.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "observable of dimension {} against a spectrum of dimension {}",
                o.dim(),
                self.dim()
            )));
        }
        let cols: Vec<Vec<Complex64>> = (0..self.dim())
            .into_par_iter()
            .map(|k| o.mul_vec(self.vectors.column(k).as_slice()))
            .collect();
        let mut ov = DMatrix::zeros(self.dim(), self.dim());
        for (k, c) in cols.into_iter().enumerate() {
            ov.set_column(k, &DVector::from_vec(c));
        }
        Ok(self.vectors.adjoint() * ov)
    }
}

/// A normalized state written in the energy eigenbasis.
#[derive(Debug, Clone)]
pub struct PreparedState {
    pub amplitudes: DVector<Complex64>,
    pub energy: f64,
    pub description: String,
}

impl PreparedState {
    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.norm_squared()
    }
}

/// Spin-1/2 state `cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩`.
pub fn bloch_state(theta: f64, phi: f64) -> DVector<Complex64> {
    DVector::from_vec(vec![cz((theta / 2.0).cos()), Complex64::from_polar((theta / 2.0).sin(), phi)])
}

/// Default single-site state: `|+x⟩` for d=2, the symmetric superposition
/// for d=3 and a singly occupied spin-mixed site for the d=4 fermion
/// encoding; uniform superposition otherwise.
pub fn default_site_state(d: usize) -> DVector<Complex64> {
    match d {
        4 => {
            // Site index 2·n↑ + n↓: (|↑⟩ + |↓⟩)/√2.
            let s = std::f64::consts::FRAC_1_SQRT_2;
            DVector::from_vec(vec![cz(0.0), cz(s), cz(s), cz(0.0)])
        }
        _ => DVector::from_element(d, cz(1.0 / (d as f64).sqrt())),
    }
}

/// Kronecker product of per-site states (site 0 leftmost), expanded in the
/// energy eigenbasis.
pub fn prepare_product_state(
    spectrum: &SpectralDecomposition,
    per_site: &[DVector<Complex64>],
    description: &str,
) -> Result<PreparedState> {
    let spec = spectrum.spec;
    if per_site.len() != spec.n_sites() {
        return Err(Error::InvalidParameter(format!(
            "expected {} site states, got {}",
            spec.n_sites(),
            per_site.len()
        )));
    }
    for v in per_site {
        if v.len() != spec.local_dim() {
            return Err(Error::DimensionMismatch(format!(
                "site state of length {} for local dimension {}",
                v.len(),
                spec.local_dim()
            )));
        }
        let n = v.norm();
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized(n));
        }
    }
    let mut psi = DVector::from_element(1, cz(1.0));
    for v in per_site {
        psi = psi.kronecker(v);
    }
    prepare_state(spectrum, &psi, description)
}

/// Any normalized computational-basis vector, expanded in the eigenbasis.
pub fn prepare_state(spectrum: &SpectralDecomposition, psi: &DVector<Complex64>, description: &str) -> Result<PreparedState> {
    if psi.len() != spectrum.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state of length {} for dimension {}",
            psi.len(),
            spectrum.dim()
        )));
    }
    let n = psi.norm();
    if (n - 1.0).abs() > 1e-12 {
        return Err(Error::NotNormalized(n));
    }
    let amplitudes = spectrum.vectors.adjoint() * psi;
    let energy = amplitudes
        .iter()
        .zip(&spectrum.energies)
        .map(|(c, e)| c.norm_sqr() * e)
        .sum();
    Ok(PreparedState {
        amplitudes,
        energy,
        description: description.to_string(),
    })
}

/// Uniform grid `t_i = t0 + i·dt`, `i < n_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite() && t0.is_finite()) || n_steps < 2 {
            return Err(Error::InvalidParameter(format!(
                "time grid needs dt > 0 and at least 2 samples (dt = {dt}, n = {n_steps})"
            )));
        }
        Ok(Self { t0, dt, n_steps })
    }

    /// `[0, t_end]` sampled at `n` points including both ends.
    pub fn linspace(t_end: f64, n: usize) -> Result<Self> {
        Self::new(0.0, t_end / (n.max(2) - 1) as f64, n)
    }

    /// `[0, 100 / (span/N)]` with 2048 samples.
    pub fn default_for(spectrum: &SpectralDecomposition) -> Result<Self> {
        let per_site = spectrum.span() / spectrum.spec.n_sites() as f64;
        if per_site <= 0.0 {
            return Err(Error::InvalidParameter("flat spectrum has no time scale".into()));
        }
        Self::linspace(100.0 / per_site, DEFAULT_SAMPLES)
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_steps).map(|i| self.time(i)).collect()
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.n_steps - 1)
    }

    /// Samples with `t_start ≤ t ≤ t_end`.
    pub fn window(&self, t_start: f64, t_end: f64) -> Result<std::ops::Range<usize>> {
        let eps = 1e-9 * self.dt;
        if t_start > t_end || t_start < self.t0 - eps || t_end > self.t_end() + eps {
            return Err(Error::InvalidParameter(format!(
                "window [{t_start}, {t_end}] outside the grid [{}, {}]",
                self.t0,
                self.t_end()
            )));
        }
        let lo = ((t_start - self.t0 - eps) / self.dt).ceil().max(0.0) as usize;
        let hi = (((t_end - self.t0 + eps) / self.dt).floor() as usize + 1).min(self.n_steps);
        Ok(lo..hi)
    }

    /// The second half of the grid.
    pub fn late_half(&self) -> std::ops::Range<usize> {
        self.n_steps / 2..self.n_steps
    }
}

/// `⟨O(t)⟩` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub label: String,
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    /// Largest imaginary part discarded.
    pub max_imag: f64,
}

/// `⟨O(t)⟩ = Σ_jk e^{−i(E_k−E_j)t} c_j* c_k ⟨ψ_j|O|ψ_k⟩` for Hermitian `O`.
pub fn expectation_series(
    o: &LatticeOperator,
    label: &str,
    state: &PreparedState,
    spectrum: &SpectralDecomposition,
    grid: TimeGrid,
) -> Result<TimeSeries> {
    if !o.is_hermitian(1e-12) {
        return Err(Error::NotHermitian(o.hermiticity_defect()));
    }
    let o_eig = spectrum.to_eigenbasis(o)?;
    Ok(series_from_eigenbasis(&o_eig, label, state, spectrum, grid))
}

pub(crate) fn series_from_eigenbasis(
    o_eig: &DMatrix<Complex64>,
    label: &str,
    state: &PreparedState,
    spectrum: &SpectralDecomposition,
    grid: TimeGrid,
) -> TimeSeries {
    // Restrict to populated eigenstates.
    let support: Vec<usize> = (0..spectrum.dim())
        .filter(|&k| state.amplitudes[k].norm() > 1e-15)
        .collect();
    let m = support.len();
    let sub = DMatrix::from_fn(m, m, |a, b| o_eig[(support[a], support[b])]);
    let amps: Vec<Complex64> = support.iter().map(|&k| state.amplitudes[k]).collect();
    let energies: Vec<f64> = support.iter().map(|&k| spectrum.energies[k]).collect();
    let evaluated: Vec<Complex64> = (0..grid.n_steps)
        .into_par_iter()
        .map(|i| {
            let t = grid.time(i);
            let phi = DVector::from_iterator(m, amps.iter().zip(&energies).map(|(c, &e)| c * Complex64::from_polar(1.0, -e * t)));
            phi.dotc(&(&sub * &phi))
        })
        .collect();
    TimeSeries {
        label: label.to_string(),
        grid,
        values: evaluated.iter().map(|z| z.re).collect(),
        max_imag: evaluated.iter().map(|z| z.im.abs()).fold(0.0, f64::max),
    }
}

/// Canonical state `e^{−βH}/Z` with `tr[ρH] = E`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalMatch {
    pub beta: f64,
    pub energy_target: f64,
    /// `ln Z`.
    pub log_partition: f64,
    /// Thermal expectation of each requested observable.
    pub thermal_values: Vec<(String, f64)>,
    pub iterations: usize,
    /// `|tr[ρH] − E|`.
    pub energy_error: f64,
}

impl ThermalMatch {
    pub fn value(&self, label: &str) -> Option<f64> {
        self.thermal_values.iter().find(|(l, _)| l == label).map(|&(_, v)| v)
    }
}

/// Boltzmann weights at `β` via a shifted log-sum-exp, with `ln Z`.
fn boltzmann(energies: &[f64], beta: f64) -> (Vec<f64>, f64) {
    let shift = energies
        .iter()
        .map(|&e| -beta * e)
        .fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = energies.iter().map(|&e| (-beta * e - shift).exp()).collect();
    let total: f64 = raw.iter().sum();
    (raw.iter().map(|w| w / total).collect(), shift + total.ln())
}

fn thermal_energy(energies: &[f64], beta: f64) -> f64 {
    let (w, _) = boltzmann(energies, beta);
    w.iter().zip(energies).map(|(w, e)| w * e).sum()
}

pub fn thermal_match(
    spectrum: &SpectralDecomposition,
    e_target: f64,
    observables: &[(String, LatticeOperator)],
) -> Result<ThermalMatch> {
    let (e_min, e_max) = (spectrum.e_min(), spectrum.e_max());
    if !(e_target > e_min && e_target < e_max) {
        return Err(Error::UnmatchableEnergy {
            target: e_target,
            e_min,
            e_max,
        });
    }
    let span = spectrum.span();
    let energies = &spectrum.energies;
    let tol = 1e-8 * span;
    let (beta, iterations) = if (e_target - spectrum.mean_energy()).abs() <= 1e-10 * span {
        (0.0, 0)
    } else {
        let cap = 1e3 / span;
        let (mut lo, mut hi) = (-cap, cap);
        let mut mid = 0.0;
        let mut done = None;
        for it in 1..=BISECTION_ITERATIONS {
            mid = 0.5 * (lo + hi);
            let e = thermal_energy(energies, mid);
            if (e - e_target).abs() <= tol {
                done = Some(it);
                break;
            }
            // Energy decreases with β.
            if e > e_target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        match done {
            Some(it) => (mid, it),
            None => {
                return Err(Error::BisectionFailure {
                    lo,
                    hi,
                    error: (thermal_energy(energies, mid) - e_target).abs(),
                })
            }
        }
    };
    let (weights, log_partition) = boltzmann(energies, beta);
    let energy_error = (weights.iter().zip(energies).map(|(w, e)| w * e).sum::<f64>() - e_target).abs();
    let dim = spectrum.dim() as f64;
    let thermal_values = observables
        .iter()
        .map(|(label, o)| {
            let value = if beta == 0.0 {
                o.trace().re / dim
            } else {
                let o_eig = spectrum.to_eigenbasis(o)?;
                weights.iter().enumerate().map(|(k, w)| w * o_eig[(k, k)].re).sum()
            };
            Ok((label.clone(), value))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ThermalMatch {
        beta,
        energy_target: e_target,
        log_partition,
        thermal_values,
        iterations,
        energy_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierPeak {
    /// Angular frequency.
    pub frequency: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonstationarityMetrics {
    /// `Σ_k |c_k|² ⟨ψ_k|O|ψ_k⟩`.
    pub diag_ensemble: f64,
    pub window_start: f64,
    pub window_end: f64,
    pub window_samples: usize,
    pub time_mean: f64,
    /// Population variance over the window.
    pub late_window_variance: f64,
    /// Local maxima above 5× the median magnitude, strongest first.
    pub fourier_peaks: Vec<FourierPeak>,
    /// Angular-frequency bin width.
    pub frequency_resolution: f64,
    pub thermal_value: Option<f64>,
    /// `|time mean − ⟨O⟩_th|`.
    pub thermal_gap: Option<f64>,
}

impl NonstationarityMetrics {
    pub fn dominant_peak(&self) -> Option<FourierPeak> {
        self.fourier_peaks.first().copied()
    }
}

/// Diagnostics of `series` over the sample range `window`.
pub fn nonstationarity(
    series: &TimeSeries,
    state: &PreparedState,
    spectrum: &SpectralDecomposition,
    o: &LatticeOperator,
    window: std::ops::Range<usize>,
    thermal_value: Option<f64>,
) -> Result<NonstationarityMetrics> {
    let o_eig = spectrum.to_eigenbasis(o)?;
    let diag_ensemble = state
        .amplitudes
        .iter()
        .enumerate()
        .map(|(k, c)| c.norm_sqr() * o_eig[(k, k)].re)
        .sum();
    window_metrics(series, window, diag_ensemble, thermal_value)
}

pub(crate) fn window_metrics(
    series: &TimeSeries,
    window: std::ops::Range<usize>,
    diag_ensemble: f64,
    thermal_value: Option<f64>,
) -> Result<NonstationarityMetrics> {
    if window.end > series.values.len() || window.start > window.end {
        return Err(Error::InvalidParameter(format!(
            "window {window:?} outside a series of {} samples",
            series.values.len()
        )));
    }
    let samples = &series.values[window.clone()];
    let n = samples.len();
    if n < MIN_WINDOW_SAMPLES {
        return Err(Error::DegenerateWindow(n));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let variance = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;

    let mut buffer: Vec<Complex64> = samples.iter().map(|v| cz(v - mean)).collect();
    FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut buffer);
    let half = n / 2;
    let magnitudes: Vec<f64> = buffer[..=half].iter().map(|z| 2.0 * z.norm() / n as f64).collect();
    let mut sorted = magnitudes.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let resolution = 2.0 * std::f64::consts::PI / (n as f64 * series.grid.dt);
    let threshold = PEAK_MEDIAN_FACTOR * median;
    let mut peaks: Vec<FourierPeak> = (1..=half)
        .filter(|&k| {
            let m = magnitudes[k];
            let left = magnitudes[k - 1];
            let right = if k < half { magnitudes[k + 1] } else { f64::NEG_INFINITY };
            m > left && m >= right && m > threshold && m > 1e-12
        })
        .map(|k| FourierPeak {
            frequency: k as f64 * resolution,
            amplitude: magnitudes[k],
        })
        .collect();
    peaks.sort_by(|a, b| b.amplitude.total_cmp(&a.amplitude).then(a.frequency.total_cmp(&b.frequency)));

    Ok(NonstationarityMetrics {
        diag_ensemble,
        window_start: series.grid.time(window.start),
        window_end: series.grid.time(window.end - 1),
        window_samples: n,
        time_mean: mean,
        late_window_variance: variance,
        fourier_peaks: peaks,
        frequency_resolution: resolution,
        thermal_value,
        thermal_gap: thermal_value.map(|th| (mean - th).abs()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_field_chain, build_heisenberg_nnn, build_hubbard};
    use crate::opalg::{embed, pauli_basis, Boundary, CsrMatrix};

    fn single_site_field(b: f64) -> LatticeOperator {
        // One spin: the lattice type needs N ≥ 2, so embed on a 2-site chain.
        let spec = LatticeSpec::new(2, 2, Boundary::Open).unwrap();
        embed(&pauli_basis()[2], 0, spec).unwrap().scale_re(b)
    }

    #[test]
    fn field_chain_spectrum() {
        let s = diagonalize(&build_field_chain(2, 1.0).unwrap()).unwrap();
        for (e, want) in s.energies.iter().zip([-2.0, 0.0, 0.0, 2.0]) {
            assert!((e - want).abs() < 1e-14);
        }
        assert!(s.max_residual < 1e-12 && s.orthonormality_defect < 1e-12);
    }

    #[test]
    fn hubbard_spectrum_matches_direct_dense_solve() {
        let h = build_hubbard(2, 1.0, 2.0, 0.5, 0.7).unwrap();
        let s = diagonalize(&h).unwrap();
        let mut direct: Vec<f64> = h.to_dense().symmetric_eigenvalues().iter().copied().collect();
        direct.sort_by(f64::total_cmp);
        for (a, b) in s.energies.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn cosine_from_single_precessing_spin() {
        let b = 0.75;
        let h = single_site_field(b);
        let s = diagonalize(&h).unwrap();
        let plus_x = bloch_state(std::f64::consts::FRAC_PI_2, 0.0);
        let up = bloch_state(0.0, 0.0);
        let state = prepare_product_state(&s, &[plus_x, up], "+x").unwrap();
        let sx = embed(&pauli_basis()[0], 0, *h.spec()).unwrap();
        let grid = TimeGrid::linspace(10.0, 101).unwrap();
        let series = expectation_series(&sx, "sx", &state, &s, grid).unwrap();
        for (i, v) in series.values.iter().enumerate() {
            assert!((v - (2.0 * b * grid.time(i)).cos()).abs() < 1e-12);
        }
        assert!(series.max_imag < 1e-12);
    }

    #[test]
    fn energy_is_conserved_and_eigenstates_are_frozen() {
        let h = build_heisenberg_nnn(4, 1.0, 0.5, Boundary::Open).unwrap();
        let s = diagonalize(&h).unwrap();
        let sites: Vec<_> = (0..4).map(|j| bloch_state(0.3 + 0.4 * j as f64, 0.1 * j as f64)).collect();
        let state = prepare_product_state(&s, &sites, "generic").unwrap();
        assert!((state.norm_squared() - 1.0).abs() < 1e-12);
        let grid = TimeGrid::linspace(20.0, 64).unwrap();
        let series = expectation_series(&h, "H", &state, &s, grid).unwrap();
        for v in &series.values {
            assert!((v - state.energy).abs() <= 1e-10 * state.energy.abs().max(1.0));
        }
        let up: Vec<_> = (0..4).map(|_| bloch_state(0.0, 0.0)).collect();
        let frozen = prepare_product_state(&s, &up, "all up").unwrap();
        let sx = embed(&pauli_basis()[0], 1, *h.spec()).unwrap();
        let series = expectation_series(&sx, "sx", &frozen, &s, grid).unwrap();
        assert!(series.values.iter().all(|v| (v - series.values[0]).abs() < 1e-12));
        let m = nonstationarity(&series, &frozen, &s, &sx, grid.late_half(), None).unwrap();
        assert!(m.late_window_variance < 1e-20);
        assert!(m.fourier_peaks.is_empty());
    }

    #[test]
    fn aligned_state_is_an_eigenstate_of_the_field_chain() {
        let s = diagonalize(&build_field_chain(4, 1.0).unwrap()).unwrap();
        let up: Vec<_> = (0..4).map(|_| bloch_state(0.0, 0.0)).collect();
        let state = prepare_product_state(&s, &up, "up").unwrap();
        let big = state.amplitudes.iter().filter(|c| c.norm() > 1e-12).count();
        assert_eq!(big, 1);
        let plus: Vec<_> = (0..4).map(|_| default_site_state(2)).collect();
        let state = prepare_product_state(&s, &plus, "+x").unwrap();
        assert!(state.energy.abs() < 1e-12);
        let bad = vec![DVector::from_vec(vec![cz(1.0), cz(1.0)]); 4];
        assert!(matches!(prepare_product_state(&s, &bad, "bad"), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn thermal_match_properties() {
        let h = build_heisenberg_nnn(4, 1.0, 0.3, Boundary::Open).unwrap();
        let s = diagonalize(&h).unwrap();
        let sz = embed(&pauli_basis()[2], 0, *h.spec()).unwrap();
        let obs = vec![("sz".to_string(), sz.clone())];
        let inf = thermal_match(&s, s.mean_energy(), &obs).unwrap();
        assert_eq!(inf.beta, 0.0);
        assert_eq!(inf.value("sz").unwrap(), sz.trace().re / s.dim() as f64);
        let mut last = f64::INFINITY;
        for k in 1..10 {
            let e = s.e_min() + s.span() * k as f64 / 10.0;
            let m = thermal_match(&s, e, &obs).unwrap();
            assert!(m.energy_error <= 1e-8 * s.span());
            assert!(m.beta < last);
            last = m.beta;
        }
        assert!(matches!(
            thermal_match(&s, s.e_max(), &obs),
            Err(Error::UnmatchableEnergy { .. })
        ));
        // Field chain with all |+x⟩ sits at mid-spectrum.
        let f = diagonalize(&build_field_chain(4, 1.0).unwrap()).unwrap();
        let plus: Vec<_> = (0..4).map(|_| default_site_state(2)).collect();
        let state = prepare_product_state(&f, &plus, "+x").unwrap();
        assert_eq!(thermal_match(&f, state.energy, &[]).unwrap().beta, 0.0);
    }

    #[test]
    fn long_time_mean_matches_diagonal_ensemble() {
        let h = build_heisenberg_nnn(4, 1.0, 0.7, Boundary::Open).unwrap();
        let s = diagonalize(&h).unwrap();
        let sites: Vec<_> = (0..4).map(|j| bloch_state(1.0 + 0.2 * j as f64, 0.3 * j as f64)).collect();
        let state = prepare_product_state(&s, &sites, "generic").unwrap();
        let sx = embed(&pauli_basis()[0], 0, *h.spec()).unwrap();
        let mut gaps: Vec<f64> = s.energies.windows(2).map(|w| w[1] - w[0]).filter(|g| *g > 1e-8).collect();
        gaps.sort_by(f64::total_cmp);
        let min_gap = gaps[0];
        let t = 4000.0 / min_gap;
        let grid = TimeGrid::linspace(t, 8192).unwrap();
        let series = expectation_series(&sx, "sx", &state, &s, grid).unwrap();
        let m = nonstationarity(&series, &state, &s, &sx, 0..grid.n_steps, None).unwrap();
        assert!((m.time_mean - m.diag_ensemble).abs() <= 3.0 / (t * min_gap) + 1e-3);
    }

    #[test]
    fn windows_and_grids() {
        let grid = TimeGrid::linspace(10.0, 11).unwrap();
        assert_eq!(grid.window(2.0, 5.0).unwrap(), 2..6);
        assert!(grid.window(-1.0, 5.0).is_err());
        let series = TimeSeries {
            label: "x".into(),
            grid,
            values: vec![0.0; 11],
            max_imag: 0.0,
        };
        assert!(matches!(window_metrics(&series, 0..11, 0.0, None), Err(Error::DegenerateWindow(11))));
        assert!(TimeGrid::new(0.0, 0.0, 10).is_err());
    }

    #[test]
    fn dense_cap_is_enforced() {
        let spec = LatticeSpec::new(13, 2, Boundary::Open).unwrap();
        let h = LatticeOperator::from_csr(spec, CsrMatrix::zeros(spec.dim())).unwrap();
        assert!(matches!(diagonalize(&h), Err(Error::DimensionCapExceeded { .. })));
    }

    #[test]
    fn non_hermitian_observable_is_rejected() {
        let h = build_field_chain(2, 1.0).unwrap();
        let s = diagonalize(&h).unwrap();
        let state = prepare_product_state(&s, &[default_site_state(2), default_site_state(2)], "+x").unwrap();
        let p = pauli_basis();
        let raise = embed(&p[0].add(&p[1].scale(Complex64::new(0.0, 1.0))), 0, *h.spec()).unwrap();
        let grid = TimeGrid::linspace(1.0, 16).unwrap();
        assert!(matches!(
            expectation_series(&raise, "r", &state, &s, grid),
            Err(Error::NotHermitian(_))
        ));
    }
}
