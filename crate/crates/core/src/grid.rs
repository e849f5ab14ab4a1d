//! Uniform spatial lattices, their dual frequency lattices and wavefunctions
//! sampled on them.
//!
//! A grid covers `[-L, L)` in every dimension with `N` points per dimension
//! (`N` a power of two). The dual lattice uses angular frequencies,
//! `ξ = m·π/L` for `m ∈ {-N/2, …, N/2-1}`, stored in the usual FFT order
//! (non-negative frequencies first). With this choice `-Δ` is multiplication
//! by `|ξ|²` on the discrete level.
//!
//! The discrete transform reproduces the continuous convention
//! `F φ(ξ) = (2π)^{-n/2} ∫ e^{-ix·ξ} φ(x) dx` as a Riemann sum on the lattice,
//! so momentum-space samples approximate the continuous transform pointwise
//! and norms are computed with the frequency cell volume.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{config, Error, Result};

/// Which basis the samples of a [`WaveFunction`] live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Position,
    Momentum,
}

struct GridInner {
    dims: usize,
    points: usize,
    half_width: f64,
    spacing: f64,
    freq_spacing: f64,
    nodes: Vec<f64>,
    freqs: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Tensor-product lattice with `points_per_dim^dims` nodes. Cheap to clone.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dims", &self.inner.dims)
            .field("points_per_dim", &self.inner.points)
            .field("half_width", &self.inner.half_width)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.inner.dims == other.inner.dims
            && self.inner.points == other.inner.points
            && self.inner.half_width == other.inner.half_width
    }
}

impl Grid {
    /// Builds the lattice. `points_per_dim` must be a power of two ≥ 8.
    pub fn new(dims: usize, points_per_dim: usize, half_width: f64) -> Result<Self> {
        if dims == 0 {
            return Err(config("grid needs at least one dimension"));
        }
        if points_per_dim < 8 || !points_per_dim.is_power_of_two() {
            return Err(config(format!(
                "points per dimension must be a power of two >= 8, got {points_per_dim}"
            )));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(config(format!("half width must be positive, got {half_width}")));
        }
        let n = points_per_dim;
        let spacing = 2.0 * half_width / n as f64;
        let freq_spacing = PI / half_width;
        let nodes = (0..n).map(|j| -half_width + j as f64 * spacing).collect();
        let freqs = (0..n)
            .map(|m| signed_index(m, n) as f64 * freq_spacing)
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(Grid {
            inner: Arc::new(GridInner {
                dims,
                points: n,
                half_width,
                spacing,
                freq_spacing,
                nodes,
                freqs,
                forward,
                inverse,
            }),
        })
    }

    pub fn dims(&self) -> usize {
        self.inner.dims
    }

    pub fn points_per_dim(&self) -> usize {
        self.inner.points
    }

    pub fn half_width(&self) -> f64 {
        self.inner.half_width
    }

    pub fn spacing(&self) -> f64 {
        self.inner.spacing
    }

    pub fn freq_spacing(&self) -> f64 {
        self.inner.freq_spacing
    }

    /// Spatial nodes of one axis, ascending from `-L`.
    pub fn nodes(&self) -> &[f64] {
        &self.inner.nodes
    }

    /// Frequency nodes of one axis in FFT order.
    pub fn freq_nodes(&self) -> &[f64] {
        &self.inner.freqs
    }

    /// Largest representable |ξ| (the Nyquist frequency `π/spacing`).
    pub fn nyquist(&self) -> f64 {
        PI / self.inner.spacing
    }

    /// Total number of lattice points.
    pub fn len(&self) -> usize {
        self.inner.points.pow(self.inner.dims as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.inner.spacing.powi(self.inner.dims as i32)
    }

    pub fn freq_cell_volume(&self) -> f64 {
        self.inner.freq_spacing.powi(self.inner.dims as i32)
    }

    /// Per-axis indices of a flat (row-major, last axis fastest) index.
    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        let n = self.inner.points;
        for k in (0..self.inner.dims).rev() {
            out[k] = flat % n;
            flat /= n;
        }
    }

    /// Spatial coordinates of a flat index.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mut idx = vec![0; self.inner.dims];
        self.unravel(flat, &mut idx);
        idx.iter().map(|&i| self.inner.nodes[i]).collect()
    }

    /// Frequency coordinates of a flat index.
    pub fn freq_point(&self, flat: usize) -> Vec<f64> {
        let mut idx = vec![0; self.inner.dims];
        self.unravel(flat, &mut idx);
        idx.iter().map(|&i| self.inner.freqs[i]).collect()
    }

    /// Evaluates `f` at every spatial node.
    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        self.map_points(&self.inner.nodes, f)
    }

    /// Evaluates `f` at every frequency node (FFT order).
    pub fn sample_freq<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        self.map_points(&self.inner.freqs, f)
    }

    fn map_points<T, F: Fn(&[f64]) -> T>(&self, axis: &[f64], f: F) -> Vec<T> {
        let d = self.inner.dims;
        let mut idx = vec![0usize; d];
        let mut coords = vec![0.0; d];
        (0..self.len())
            .map(|flat| {
                self.unravel(flat, &mut idx);
                for k in 0..d {
                    coords[k] = axis[idx[k]];
                }
                f(&coords)
            })
            .collect()
    }

    /// Squared Euclidean norm of the spatial node at every flat index.
    pub fn radius_squared(&self) -> Vec<f64> {
        self.sample(|x| x.iter().map(|v| v * v).sum())
    }

    /// Squared frequency magnitude `|ξ|²` at every frequency node.
    pub fn kinetic_symbol(&self) -> Vec<f64> {
        self.sample_freq(|k| k.iter().map(|v| v * v).sum())
    }

    /// Applies a 1-D complex transform along `axis` of a row-major array.
    pub(crate) fn for_each_line<F>(&self, data: &mut [Complex64], axis: usize, mut f: F)
    where
        F: FnMut(&mut [Complex64]),
    {
        let n = self.inner.points;
        let d = self.inner.dims;
        let stride = n.pow((d - 1 - axis) as u32);
        if stride == 1 {
            for line in data.chunks_mut(n) {
                f(line);
            }
            return;
        }
        let block = stride * n;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for outer in (0..data.len()).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for j in 0..n {
                    buf[j] = data[base + j * stride];
                }
                f(&mut buf);
                for j in 0..n {
                    data[base + j * stride] = buf[j];
                }
            }
        }
    }

    /// Unnormalized FFT along every axis (no sign or scale corrections).
    pub(crate) fn fft_all(&self, data: &mut [Complex64], forward: bool) {
        let plan = if forward {
            Arc::clone(&self.inner.forward)
        } else {
            Arc::clone(&self.inner.inverse)
        };
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for axis in 0..self.inner.dims {
            self.for_each_line(data, axis, |line| {
                plan.process_with_scratch(line, &mut scratch)
            });
        }
    }

    /// Position samples → momentum samples, in place.
    pub(crate) fn forward_in_place(&self, data: &mut [Complex64]) {
        self.fft_all(data, true);
        self.apply_alternating_sign(data);
        let scale = (self.inner.spacing / (2.0 * PI).sqrt()).powi(self.inner.dims as i32);
        data.iter_mut().for_each(|v| *v *= scale);
    }

    /// Momentum samples → position samples, in place.
    pub(crate) fn inverse_in_place(&self, data: &mut [Complex64]) {
        self.apply_alternating_sign(data);
        self.fft_all(data, false);
        let scale = (self.inner.freq_spacing / (2.0 * PI).sqrt()).powi(self.inner.dims as i32);
        data.iter_mut().for_each(|v| *v *= scale);
    }

    // e^{iLξ_m} = (-1)^m: the lattice starts at -L rather than 0.
    fn apply_alternating_sign(&self, data: &mut [Complex64]) {
        let d = self.inner.dims;
        let mut idx = vec![0usize; d];
        for (flat, v) in data.iter_mut().enumerate() {
            self.unravel(flat, &mut idx);
            if idx.iter().sum::<usize>() % 2 == 1 {
                *v = -*v;
            }
        }
    }

    /// Fraction of `density` lying in the outer `fraction` of the box along
    /// any axis (`|x_k| > (1-fraction)·L`).
    pub fn boundary_mass_fraction(&self, density: &[f64], fraction: f64) -> f64 {
        let cut = (1.0 - fraction) * self.inner.half_width;
        let edge_axis: Vec<bool> = self.inner.nodes.iter().map(|x| x.abs() > cut).collect();
        let d = self.inner.dims;
        let mut idx = vec![0usize; d];
        let mut total = 0.0;
        let mut edge = 0.0;
        for (flat, rho) in density.iter().enumerate() {
            total += rho;
            self.unravel(flat, &mut idx);
            if idx.iter().any(|&i| edge_axis[i]) {
                edge += rho;
            }
        }
        if total > 0.0 {
            edge / total
        } else {
            0.0
        }
    }
}

/// FFT-order index `m` → signed frequency index in `[-N/2, N/2)`.
pub(crate) fn signed_index(m: usize, n: usize) -> i64 {
    if m < n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

/// Shorthand for [`Grid::new`].
pub fn make_grid(dims: usize, points_per_dim: usize, half_width: f64) -> Result<Grid> {
    Grid::new(dims, points_per_dim, half_width)
}

/// Boundary-mass guard applied by the propagators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryGuard {
    /// Width of the outer shell as a fraction of the half width.
    pub edge_fraction: f64,
    /// Largest tolerated share of |ψ|² inside that shell.
    pub max_mass: f64,
}

impl Default for BoundaryGuard {
    fn default() -> Self {
        BoundaryGuard {
            edge_fraction: 0.1,
            max_mass: 1e-6,
        }
    }
}

impl BoundaryGuard {
    pub fn check(&self, psi: &WaveFunction, time: f64) -> Result<f64> {
        let mass = psi.boundary_mass(self.edge_fraction)?;
        if mass >= self.max_mass {
            return Err(Error::DomainEscape {
                time,
                mass,
                limit: self.max_mass,
            });
        }
        Ok(mass)
    }
}

/// Complex samples on a [`Grid`].
#[derive(Debug, Clone)]
pub struct WaveFunction {
    grid: Grid,
    values: Vec<Complex64>,
    repr: Representation,
}

impl WaveFunction {
    pub fn new(grid: &Grid, values: Vec<Complex64>, repr: Representation) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(config(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(WaveFunction {
            grid: grid.clone(),
            values,
            repr,
        })
    }

    pub fn zeros(grid: &Grid, repr: Representation) -> Self {
        WaveFunction {
            grid: grid.clone(),
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
            repr,
        }
    }

    /// Position-space state with samples `f(x)`.
    pub fn from_fn<F: Fn(&[f64]) -> Complex64>(grid: &Grid, f: F) -> Self {
        let values = grid.map_points(grid.nodes(), f);
        WaveFunction {
            grid: grid.clone(),
            values,
            repr: Representation::Position,
        }
    }

    /// Normalized Gaussian packet `Π_k exp(-(x_k-c_k)²/(2w²) + i p_k x_k)`.
    pub fn gaussian(grid: &Grid, center: &[f64], width: f64, momentum: &[f64]) -> Result<Self> {
        let d = grid.dims();
        if center.len() != d || momentum.len() != d {
            return Err(config("gaussian center/momentum dimension mismatch"));
        }
        if !(width > 0.0) {
            return Err(config("gaussian width must be positive"));
        }
        let psi = WaveFunction::from_fn(grid, |x| {
            let mut re = 0.0;
            let mut ph = 0.0;
            for k in 0..d {
                re -= (x[k] - center[k]).powi(2) / (2.0 * width * width);
                ph += momentum[k] * x[k];
            }
            Complex64::from_polar(re.exp(), ph)
        });
        psi.normalized()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn representation(&self) -> Representation {
        self.repr
    }

    fn measure(&self) -> f64 {
        match self.repr {
            Representation::Position => self.grid.cell_volume(),
            Representation::Momentum => self.grid.freq_cell_volume(),
        }
    }

    /// Fails on the first non-finite sample.
    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            Some(i) => Err(Error::NumericalState(format!("non-finite sample at index {i}"))),
            None => Ok(()),
        }
    }

    /// Discrete `L²` norm, `sqrt(Σ|ψ_i|² · cell volume)`.
    pub fn l2_norm(&self) -> Result<f64> {
        self.check_finite()?;
        Ok((self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.measure()).sqrt())
    }

    pub fn normalized(mut self) -> Result<Self> {
        let norm = self.l2_norm()?;
        if norm == 0.0 {
            return Err(Error::NumericalState("cannot normalize the zero state".into()));
        }
        self.values.iter_mut().for_each(|v| *v /= norm);
        Ok(self)
    }

    /// `⟨self, other⟩` (antilinear in `self`). Both must share grid and representation.
    pub fn inner(&self, other: &WaveFunction) -> Result<Complex64> {
        self.compatible(other)?;
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * self.measure())
    }

    /// `‖self - other‖` in the shared representation.
    pub fn distance(&self, other: &WaveFunction) -> Result<f64> {
        self.compatible(other)?;
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        Ok((s * self.measure()).sqrt())
    }

    fn compatible(&self, other: &WaveFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(config("states live on different grids"));
        }
        if self.repr != other.repr {
            return Err(config("states are in different representations"));
        }
        Ok(())
    }

    pub fn scaled(mut self, factor: Complex64) -> Self {
        self.values.iter_mut().for_each(|v| *v *= factor);
        self
    }

    pub fn conj(mut self) -> Self {
        self.values.iter_mut().for_each(|v| *v = v.conj());
        self
    }

    /// Unitary change of representation.
    pub fn transform(&self, target: Representation) -> Result<WaveFunction> {
        self.check_finite()?;
        let mut out = self.clone();
        match (self.repr, target) {
            (a, b) if a == b => {}
            (Representation::Position, Representation::Momentum) => {
                self.grid.forward_in_place(&mut out.values);
            }
            _ => {
                self.grid.inverse_in_place(&mut out.values);
            }
        }
        out.repr = target;
        Ok(out)
    }

    pub fn to_position(&self) -> Result<WaveFunction> {
        self.transform(Representation::Position)
    }

    pub fn to_momentum(&self) -> Result<WaveFunction> {
        self.transform(Representation::Momentum)
    }

    /// `|ψ|²` samples in the current representation (not scaled by the cell volume).
    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// Share of the position-space mass in the outer `fraction` of the box.
    pub fn boundary_mass(&self, fraction: f64) -> Result<f64> {
        let pos = self.to_position()?;
        Ok(self.grid.boundary_mass_fraction(&pos.density(), fraction))
    }

    /// `⟨ψ, O ψ⟩ / ‖ψ‖²` for a self-adjoint observable.
    pub fn expectation(&self, obs: &Observable) -> Result<f64> {
        expectation(self, obs)
    }
}

/// Self-adjoint observable on a grid.
#[derive(Debug, Clone, PartialEq)]
pub enum Observable {
    /// Multiplication by real samples on the spatial lattice.
    Multiplication(Vec<f64>),
    /// Multiplication by real samples on the frequency lattice (FFT order).
    FourierMultiplier(Vec<f64>),
    /// `scale · Σ_k (f_k D_k + D_k f_k)` with `D = -i∇`; one sample vector per axis.
    SymmetrizedMixed { components: Vec<Vec<f64>>, scale: f64 },
}

impl Observable {
    /// Multiplication by `f(x)` sampled on `grid`.
    pub fn position<F: Fn(&[f64]) -> f64>(grid: &Grid, f: F) -> Self {
        Observable::Multiplication(grid.sample(f))
    }

    /// Fourier multiplier `f(ξ)` sampled on `grid`.
    pub fn momentum<F: Fn(&[f64]) -> f64>(grid: &Grid, f: F) -> Self {
        Observable::FourierMultiplier(grid.sample_freq(f))
    }

    fn check_len(&self, grid: &Grid) -> Result<()> {
        let ok = match self {
            Observable::Multiplication(s) | Observable::FourierMultiplier(s) => s.len() == grid.len(),
            Observable::SymmetrizedMixed { components, .. } => {
                components.len() == grid.dims() && components.iter().all(|c| c.len() == grid.len())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(config("observable samples do not match the grid"))
        }
    }

    /// `O ψ`, returned in position representation.
    pub fn apply(&self, psi: &WaveFunction) -> Result<WaveFunction> {
        let grid = psi.grid();
        self.check_len(grid)?;
        match self {
            Observable::Multiplication(s) => {
                let mut out = psi.to_position()?;
                out.values.iter_mut().zip(s).for_each(|(v, f)| *v *= f);
                Ok(out)
            }
            Observable::FourierMultiplier(s) => {
                let mut out = psi.to_momentum()?;
                out.values.iter_mut().zip(s).for_each(|(v, f)| *v *= f);
                out.to_position()
            }
            Observable::SymmetrizedMixed { components, scale } => {
                let pos = psi.to_position()?;
                let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
                for (axis, f) in components.iter().enumerate() {
                    // f D ψ
                    let dpsi = derivative(&pos, axis)?;
                    for ((a, d), fk) in acc.iter_mut().zip(&dpsi.values).zip(f) {
                        *a += d * fk;
                    }
                    // D (f ψ)
                    let mut fpsi = pos.clone();
                    fpsi.values.iter_mut().zip(f).for_each(|(v, fk)| *v *= fk);
                    let dfpsi = derivative(&fpsi, axis)?;
                    for (a, d) in acc.iter_mut().zip(&dfpsi.values) {
                        *a += d;
                    }
                }
                acc.iter_mut().for_each(|v| *v *= *scale);
                WaveFunction::new(grid, acc, Representation::Position)
            }
        }
    }
}

/// `D_k ψ = -i ∂_k ψ`, applied spectrally; position in, position out.
pub fn derivative(psi: &WaveFunction, axis: usize) -> Result<WaveFunction> {
    let grid = psi.grid();
    if axis >= grid.dims() {
        return Err(config(format!("axis {axis} out of range")));
    }
    let mut out = psi.to_momentum()?;
    let n = grid.points_per_dim();
    let freqs = grid.freq_nodes();
    let mut idx = vec![0usize; grid.dims()];
    for (flat, v) in out.values.iter_mut().enumerate() {
        grid.unravel(flat, &mut idx);
        // the Nyquist mode has no odd partner; drop it so D stays self-adjoint
        let m = idx[axis];
        *v *= if m == n / 2 { 0.0 } else { freqs[m] };
    }
    out.to_position()
}

/// Numerator `⟨ψ, O ψ⟩` without normalization; sesquilinear in `ψ`.
pub fn expectation_numerator(psi: &WaveFunction, obs: &Observable) -> Result<Complex64> {
    let pos = psi.to_position()?;
    let applied = obs.apply(&pos)?;
    pos.inner(&applied)
}

/// `⟨ψ, O ψ⟩/‖ψ‖²`; the imaginary residue must satisfy
/// `|Im| ≤ 1e-8·|Re| + 1e-12`.
pub fn expectation(psi: &WaveFunction, obs: &Observable) -> Result<f64> {
    let norm = psi.l2_norm()?;
    if norm == 0.0 {
        return Err(Error::NumericalState("expectation in the zero state".into()));
    }
    checked_real(expectation_numerator(psi, obs)? / (norm * norm))
}

pub(crate) fn checked_real(raw: Complex64) -> Result<f64> {
    if raw.im.abs() > 1e-8 * raw.re.abs() + 1e-12 {
        return Err(Error::SelfAdjointness {
            real: raw.re,
            imag: raw.im,
        });
    }
    Ok(raw.re)
}

/// Unitary change of representation; see [`WaveFunction::transform`].
pub fn transform(psi: &WaveFunction, target: Representation) -> Result<WaveFunction> {
    psi.transform(target)
}

/// Discrete `L²` norm; see [`WaveFunction::l2_norm`].
pub fn l2_norm(psi: &WaveFunction) -> Result<f64> {
    psi.l2_norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ground(grid: &Grid) -> WaveFunction {
        WaveFunction::from_fn(grid, |x| {
            Complex64::new(PI.powf(-0.25 * x.len() as f64) * (-0.5 * x.iter().map(|v| v * v).sum::<f64>()).exp(), 0.0)
        })
    }

    #[test]
    fn make_grid_examples() {
        let g = make_grid(1, 8, 4.0).unwrap();
        assert_eq!(g.spacing(), 1.0);
        assert_eq!(g.nodes(), &[-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
        let max_xi = g.freq_nodes().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((max_xi - PI).abs() < 1e-15);
        assert_eq!(make_grid(2, 16, 8.0).unwrap().len(), 256);
        assert!((g.spacing() * 8.0 - 2.0 * g.half_width()).abs() < 1e-15);
    }

    #[test]
    fn make_grid_rejects_bad_input() {
        assert!(matches!(make_grid(1, 12, 1.0), Err(Error::Config(_))));
        assert!(matches!(make_grid(1, 4, 1.0), Err(Error::Config(_))));
        assert!(matches!(make_grid(1, 16, 0.0), Err(Error::Config(_))));
        assert!(matches!(make_grid(1, 16, -2.0), Err(Error::Config(_))));
        assert!(matches!(make_grid(0, 16, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn dual_lattice_is_exact() {
        let g = make_grid(1, 32, 5.0).unwrap();
        // e^{i x_j ξ_m} must be N-periodic in j for every lattice frequency
        for &xi in g.freq_nodes() {
            let phase = xi * 2.0 * g.half_width();
            let turns = phase / (2.0 * PI);
            assert!((turns - turns.round()).abs() < 1e-12);
        }
    }

    #[test]
    fn norm_examples() {
        let g = make_grid(1, 8, 4.0).unwrap();
        let one = WaveFunction::from_fn(&g, |_| Complex64::new(1.0, 0.0));
        assert!((one.l2_norm().unwrap() - 8f64.sqrt()).abs() < 1e-14);
        assert_eq!(WaveFunction::zeros(&g, Representation::Position).l2_norm().unwrap(), 0.0);

        let g = make_grid(1, 512, 20.0).unwrap();
        assert!((ground(&g).l2_norm().unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn non_finite_sample_is_rejected() {
        let g = make_grid(1, 8, 4.0).unwrap();
        let mut psi = WaveFunction::zeros(&g, Representation::Position);
        psi.values_mut()[3] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(psi.l2_norm(), Err(Error::NumericalState(_))));
    }

    #[test]
    fn gaussian_fourier_pair() {
        let g = make_grid(1, 512, 20.0).unwrap();
        let psi = WaveFunction::from_fn(&g, |x| Complex64::new((-x[0] * x[0] / 2.0).exp(), 0.0));
        let phi = psi.to_momentum().unwrap();
        let err = phi
            .values()
            .iter()
            .zip(g.freq_nodes())
            .map(|(v, k)| (v - Complex64::new((-k * k / 2.0).exp(), 0.0)).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "max error {err}");
    }

    #[test]
    fn spike_has_flat_spectrum() {
        let g = make_grid(1, 64, 8.0).unwrap();
        let mut psi = WaveFunction::zeros(&g, Representation::Position);
        psi.values_mut()[17] = Complex64::new(1.0, 0.0);
        let m: Vec<f64> = psi.to_momentum().unwrap().values().iter().map(|v| v.norm()).collect();
        assert!(m.iter().all(|v| (v - m[0]).abs() < 1e-14));
    }

    #[test]
    fn round_trip_two_dimensional() {
        let g = make_grid(2, 16, 3.0).unwrap();
        let psi = WaveFunction::from_fn(&g, |x| Complex64::new(x[0].sin() + 0.3 * x[1], x[0] * x[1]));
        let back = psi.to_momentum().unwrap().to_position().unwrap();
        let rel = psi.distance(&back).unwrap() / psi.l2_norm().unwrap();
        assert!(rel < 1e-12);
        let n0 = psi.l2_norm().unwrap();
        let n1 = psi.to_momentum().unwrap().l2_norm().unwrap();
        assert!((n0 - n1).abs() < 1e-12 * n0);
    }

    #[test]
    fn expectation_examples() {
        let g = make_grid(1, 512, 20.0).unwrap();
        let psi = ground(&g);
        let x = Observable::position(&g, |x| x[0]);
        assert!(psi.expectation(&x).unwrap().abs() < 1e-10);
        let k2 = Observable::momentum(&g, |k| k[0] * k[0]);
        assert!((psi.expectation(&k2).unwrap() - 0.5).abs() < 1e-8);

        // ∫ √(1+x²) e^{-x²} dx / √π by composite Simpson on a fine, independent mesh
        let (a, b, n) = (-12.0f64, 12.0f64, 200_000usize);
        let h = (b - a) / n as f64;
        let f = |x: f64| (1.0 + x * x).sqrt() * (-x * x).exp() / PI.sqrt();
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let oracle = s * h / 3.0;
        let bracket = Observable::position(&g, |x| (1.0 + x[0] * x[0]).sqrt());
        assert!((psi.expectation(&bracket).unwrap() - oracle).abs() < 1e-10);
    }

    #[test]
    fn imaginary_residue_is_reported() {
        assert_eq!(checked_real(Complex64::new(2.0, 1e-9)).unwrap(), 2.0);
        assert!(matches!(
            checked_real(Complex64::new(2.0, 1e-6)),
            Err(Error::SelfAdjointness { .. })
        ));
        let g = make_grid(1, 64, 8.0).unwrap();
        let raw = expectation_numerator(&ground(&g), &Observable::position(&g, |x| x[0] * x[0])).unwrap();
        assert!(raw.im.abs() < 1e-14);
    }

    #[test]
    fn boundary_mass_guard() {
        let g = make_grid(1, 128, 10.0).unwrap();
        let centered = WaveFunction::gaussian(&g, &[0.0], 1.0, &[0.0]).unwrap();
        assert!(BoundaryGuard::default().check(&centered, 0.0).is_ok());
        let edge = WaveFunction::gaussian(&g, &[9.5], 1.0, &[0.0]).unwrap();
        assert!(matches!(
            BoundaryGuard::default().check(&edge, 1.5),
            Err(Error::DomainEscape { time, .. }) if time == 1.5
        ));
    }
}
