//! Exact propagation for `H₀ = -Δ + U(x)` with `U` quadratic (inverted
//! oscillators, oscillators, Stark fields, free directions).
//!
//! The kernel is the generalized Mehler formula. For fast application it is
//! factored as `e^{-itH₀} = M_t D_t F M_t` times a global Stark phase, where
//! `M_t` is a chirp, `F` the Fourier transform and `D_t` the dilation
//! `x_k ↦ x_k / g_k(2t)`. The dilated Fourier sum is evaluated with a chirp-z
//! (Bluestein) convolution, so no interpolation onto the output points is
//! needed. At large `t` the same identity gives position observables without
//! ever building the spread-out state on a grid ([`FarField`]).

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{config, Error, Result};
use crate::grid::{BoundaryGuard, Grid, Representation, WaveFunction};
use crate::potentials::{QuadraticSpec, Sector};

/// Default distance kept from the singular times of oscillator sectors.
pub const DEFAULT_SINGULAR_GUARD: f64 = 1e-3;

/// Per-coordinate classical ray data `g_k(2t)`, `h_k(2t)` at a fixed time.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFactors {
    pub time: f64,
    pub sectors: Vec<Sector>,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    /// Zeros of `g_k(2s)` crossed for `s` between 0 and `t`.
    pub maslov: Vec<u32>,
}

impl TrajectoryFactors {
    /// Largest violation of the sector identities (`cosh² - sinh² = 1`,
    /// `cos² + sin² = 1`, `h = 1, g = 2t`), relative to `max(1, h²)`.
    pub fn identity_defect(&self) -> f64 {
        self.sectors
            .iter()
            .zip(self.g.iter().zip(&self.h))
            .map(|(s, (&g, &h))| match *s {
                Sector::Hyperbolic { omega } => {
                    (h * h - (omega * g).powi(2) - 1.0).abs() / h.powi(2).max(1.0)
                }
                Sector::Trigonometric { omega } => (h * h + (omega * g).powi(2) - 1.0).abs(),
                Sector::Stark { .. } | Sector::Free => {
                    (h - 1.0).abs().max((g - 2.0 * self.time).abs())
                }
            })
            .fold(0.0, f64::max)
    }

    /// `(i g_k)^{-1/2}` continued along the path from `0⁺` (or `0⁻` for negative times).
    pub fn amplitude(&self, k: usize) -> Complex64 {
        let s = self.time.signum();
        let phase = -s * (FRAC_PI_4 + FRAC_PI_2 * self.maslov[k] as f64);
        Complex64::from_polar(self.g[k].abs().powf(-0.5), phase)
    }
}

fn sector_factors(sector: Sector, t: f64) -> (f64, f64, u32) {
    match sector {
        Sector::Hyperbolic { omega } => {
            let a = 2.0 * omega * t;
            (a.sinh() / omega, a.cosh(), 0)
        }
        Sector::Trigonometric { omega } => {
            let a = 2.0 * omega * t;
            (a.sin() / omega, a.cos(), (a.abs() / PI).floor() as u32)
        }
        Sector::Stark { .. } | Sector::Free => (2.0 * t, 1.0, 0),
    }
}

/// `g_k(2t)`, `h_k(2t)` for every coordinate of `spec`.
pub fn trajectory_factors(t: f64, spec: &QuadraticSpec) -> TrajectoryFactors {
    let sectors = spec.sectors();
    let mut g = Vec::with_capacity(sectors.len());
    let mut h = Vec::with_capacity(sectors.len());
    let mut maslov = Vec::with_capacity(sectors.len());
    for &s in &sectors {
        let (gk, hk, mk) = sector_factors(s, t);
        g.push(gk);
        h.push(hk);
        maslov.push(mk);
    }
    TrajectoryFactors {
        time: t,
        sectors,
        g,
        h,
        maslov,
    }
}

/// All `t ∈ (0, horizon]` where some oscillator coordinate has `sin(2ω t) = 0`.
pub fn singular_times(spec: &QuadraticSpec, horizon: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for s in spec.sectors() {
        if let Sector::Trigonometric { omega } = s {
            let step = PI / (2.0 * omega);
            let mut m = 1;
            while m as f64 * step <= horizon * (1.0 + 1e-14) {
                out.push(m as f64 * step);
                m += 1;
            }
        }
    }
    out.sort_by(|a, b| a.total_cmp(b));
    out.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    out
}

pub(crate) fn check_singular(t: f64, spec: &QuadraticSpec, guard: f64) -> Result<()> {
    for s in spec.sectors() {
        if let Sector::Trigonometric { omega } = s {
            let step = PI / (2.0 * omega);
            let m = (t.abs() / step).round();
            if m >= 1.0 && (t.abs() - m * step).abs() < guard {
                return Err(Error::Singularity {
                    time: t,
                    singular: t.signum() * m * step,
                    guard,
                });
            }
        }
    }
    Ok(())
}

/// The phase `S(t, x, y)` of the Mehler kernel.
#[derive(Debug, Clone)]
pub struct MehlerPhase {
    factors: TrajectoryFactors,
    /// `t E_k / 2` per coordinate (zero outside Stark sectors).
    drift: Vec<f64>,
    global: f64,
}

impl MehlerPhase {
    pub fn new(t: f64, spec: &QuadraticSpec) -> Self {
        let factors = trajectory_factors(t, spec);
        let drift = factors
            .sectors
            .iter()
            .map(|s| match s {
                Sector::Stark { field } => 0.5 * t * field,
                _ => 0.0,
            })
            .collect();
        MehlerPhase {
            factors,
            drift,
            global: -t.powi(3) * spec.field_norm_sqr() / 12.0,
        }
    }

    pub fn factors(&self) -> &TrajectoryFactors {
        &self.factors
    }

    /// Contribution of coordinate `k`.
    pub fn axis(&self, k: usize, x: f64, y: f64) -> f64 {
        let g = self.factors.g[k];
        let h = self.factors.h[k];
        (h * (x * x + y * y) - 2.0 * x * y) / (2.0 * g) - self.drift[k] * (x + y)
    }

    /// The `x`-independent Stark term `-t³|E|²/12`.
    pub fn constant(&self) -> f64 {
        self.global
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .enumerate()
            .map(|(k, (&xk, &yk))| self.axis(k, xk, yk))
            .sum::<f64>()
            + self.global
    }
}

/// Tunables for the factored propagator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MehlerOptions {
    pub singular_guard: f64,
    pub boundary: BoundaryGuard,
    /// Relative mass allowed beyond the estimated spatial and spectral extents.
    pub tail_tolerance: f64,
    /// Relative spectral mass allowed in the outer tenth of the frequency band.
    pub band_tolerance: f64,
    /// Upper bound on the refined line length used for short times.
    pub max_refined_len: usize,
}

impl Default for MehlerOptions {
    fn default() -> Self {
        MehlerOptions {
            singular_guard: DEFAULT_SINGULAR_GUARD,
            boundary: BoundaryGuard::default(),
            tail_tolerance: 1e-24,
            band_tolerance: 1e-12,
            max_refined_len: 1 << 22,
        }
    }
}

/// Fraction of the momentum mass with some `|ξ_k|` above `0.9·π/dx`.
pub(crate) fn spectral_edge_fraction(grid: &Grid, values: &[Complex64]) -> f64 {
    let mut spec = values.to_vec();
    grid.forward_in_place(&mut spec);
    let density: Vec<f64> = spec.iter().map(|v| v.norm_sqr()).collect();
    let cut = 0.9 * grid.nyquist();
    let edge: Vec<bool> = grid.freq_nodes().iter().map(|k| k.abs() > cut).collect();
    let mut idx = vec![0usize; grid.dims()];
    let (mut total, mut outer) = (0.0, 0.0);
    for (flat, rho) in density.iter().enumerate() {
        total += rho;
        grid.unravel(flat, &mut idx);
        if idx.iter().any(|&i| edge[i]) {
            outer += rho;
        }
    }
    if total > 0.0 {
        outer / total
    } else {
        0.0
    }
}

/// Per-axis marginal of a density.
fn marginal(grid: &Grid, density: &[f64], axis: usize) -> Vec<f64> {
    let mut out = vec![0.0; grid.points_per_dim()];
    let mut idx = vec![0usize; grid.dims()];
    for (flat, rho) in density.iter().enumerate() {
        grid.unravel(flat, &mut idx);
        out[idx[axis]] += rho;
    }
    out
}

/// Smallest `R` with the marginal mass beyond `|coord| > R` at most `tol` of the total.
fn extent(coords: &[f64], marginal: &[f64], tol: f64) -> f64 {
    let total: f64 = marginal.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..coords.len()).collect();
    order.sort_by(|&a, &b| coords[b].abs().total_cmp(&coords[a].abs()));
    let mut tail = 0.0;
    for &i in &order {
        tail += marginal[i];
        if tail > tol * total {
            return coords[i].abs();
        }
    }
    0.0
}

struct LinePlan {
    n: usize,
    refine: usize,
    fft_n: Arc<dyn Fft<f64>>,
    ifft_fine: Arc<dyn Fft<f64>>,
    fft_p: Arc<dyn Fft<f64>>,
    ifft_p: Arc<dyn Fft<f64>>,
    /// `M_t` chirp times the Bluestein pre-twiddle on the refined nodes.
    pre: Vec<Complex64>,
    /// Transformed Bluestein kernel, already divided by the convolution length.
    kernel: Vec<Complex64>,
    /// Post-twiddle, outer chirp, amplitude and quadrature weight on the output nodes.
    post: Vec<Complex64>,
}

impl LinePlan {
    fn new(
        planner: &mut FftPlanner<f64>,
        grid: &Grid,
        g: f64,
        h: f64,
        drift: f64,
        amplitude: Complex64,
        refine: usize,
        input_chirp: bool,
    ) -> Self {
        let n = grid.points_per_dim();
        let l = grid.half_width();
        let dx = grid.spacing();
        let nf = n * refine;
        let delta = dx / refine as f64;
        let p = (nf + n - 1).next_power_of_two();
        // y_j = -L + jδ, ξ_m = (-L + m dx)/g
        let xi0 = -l / g;
        let dxi = dx / g;
        let a = delta * dxi;
        let pre = (0..nf)
            .map(|j| {
                let y = -l + j as f64 * delta;
                let jf = j as f64;
                let chirp = if input_chirp { h * y * y / (2.0 * g) - drift * y } else { 0.0 };
                let phase = chirp - xi0 * delta * jf - 0.5 * a * jf * jf;
                Complex64::from_polar(1.0, phase)
            })
            .collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); p];
        for nn in -(nf as i64 - 1)..(n as i64) {
            let idx = nn.rem_euclid(p as i64) as usize;
            let nf64 = nn as f64;
            kernel[idx] = Complex64::from_polar(1.0 / p as f64, 0.5 * a * nf64 * nf64);
        }
        let fft_p = planner.plan_fft_forward(p);
        fft_p.process(&mut kernel);
        let weight = delta / (2.0 * PI).sqrt();
        let y0 = -l;
        let post = (0..n)
            .map(|m| {
                let x = -l + m as f64 * dx;
                let mf = m as f64;
                let phase = -y0 * xi0 - y0 * dxi * mf - 0.5 * a * mf * mf + h * x * x / (2.0 * g)
                    - drift * x;
                amplitude * weight * Complex64::from_polar(1.0, phase)
            })
            .collect();
        LinePlan {
            n,
            refine,
            fft_n: planner.plan_fft_forward(n),
            ifft_fine: planner.plan_fft_inverse(nf),
            fft_p,
            ifft_p: planner.plan_fft_inverse(p),
            pre,
            kernel,
            post,
        }
    }

    fn apply(&self, line: &mut [Complex64]) {
        let n = self.n;
        let nf = n * self.refine;
        let mut fine = if self.refine == 1 {
            line.to_vec()
        } else {
            // band-limited resampling onto the refined lattice
            let mut spec = line.to_vec();
            self.fft_n.process(&mut spec);
            let mut padded = vec![Complex64::new(0.0, 0.0); nf];
            let half = n / 2;
            padded[..half].copy_from_slice(&spec[..half]);
            padded[nf - half + 1..].copy_from_slice(&spec[half + 1..]);
            padded[half] = spec[half] * 0.5;
            padded[nf - half] = spec[half] * 0.5;
            self.ifft_fine.process(&mut padded);
            let s = 1.0 / n as f64;
            padded.iter_mut().for_each(|v| *v *= s);
            padded
        };
        let p = self.kernel.len();
        let mut buf = vec![Complex64::new(0.0, 0.0); p];
        for (b, (f, w)) in buf.iter_mut().zip(fine.iter_mut().zip(&self.pre)) {
            *b = *f * w;
        }
        self.fft_p.process(&mut buf);
        buf.iter_mut().zip(&self.kernel).for_each(|(b, k)| *b *= k);
        self.ifft_p.process(&mut buf);
        for (m, out) in line.iter_mut().enumerate() {
            *out = buf[m] * self.post[m];
        }
    }
}

pub(crate) fn drift_of(sector: Sector, t: f64) -> f64 {
    match sector {
        Sector::Stark { field } => 0.5 * t * field,
        _ => 0.0,
    }
}

fn check_dims(psi: &WaveFunction, spec: &QuadraticSpec) -> Result<()> {
    if psi.grid().dims() != spec.dims {
        return Err(config(format!(
            "state has {} dimensions, quadratic spec has {}",
            psi.grid().dims(),
            spec.dims
        )));
    }
    Ok(())
}

/// `e^{-itH₀}ψ₀` through the factorization, with default options.
pub fn propagate_factored(psi0: &WaveFunction, t: f64, spec: &QuadraticSpec) -> Result<WaveFunction> {
    propagate_factored_with(psi0, t, spec, &MehlerOptions::default())
}

pub fn propagate_factored_with(
    psi0: &WaveFunction,
    t: f64,
    spec: &QuadraticSpec,
    opts: &MehlerOptions,
) -> Result<WaveFunction> {
    factored(psi0, t, spec, opts, true)
}

/// `e^{-itH₀} M_t⁻¹ w`: the factored propagator without its input chirp, for
/// states already expressed in the `M_t` frame.
pub(crate) fn propagate_from_frame(w: &WaveFunction, t: f64, spec: &QuadraticSpec) -> Result<WaveFunction> {
    factored(w, t, spec, &MehlerOptions::default(), false)
}

fn factored(
    psi0: &WaveFunction,
    t: f64,
    spec: &QuadraticSpec,
    opts: &MehlerOptions,
    input_chirp: bool,
) -> Result<WaveFunction> {
    spec.validate()?;
    check_dims(psi0, spec)?;
    let psi = psi0.to_position()?;
    psi.check_finite()?;
    if t == 0.0 {
        return Ok(psi);
    }
    if !t.is_finite() {
        return Err(config("propagation time must be finite"));
    }
    check_singular(t, spec, opts.singular_guard)?;
    opts.boundary.check(&psi, 0.0)?;
    let grid = psi.grid().clone();
    if spectral_edge_fraction(&grid, psi.values()) > opts.band_tolerance {
        return Err(Error::Unresolved {
            time: 0.0,
            reason: "initial state has spectral mass near the Nyquist frequency".into(),
        });
    }

    let factors = trajectory_factors(t, spec);
    let density = psi.density();
    let mut spectrum = psi.values().to_vec();
    grid.forward_in_place(&mut spectrum);
    let spec_density: Vec<f64> = spectrum.iter().map(|v| v.norm_sqr()).collect();
    let l = grid.half_width();
    let dx = grid.spacing();
    let n = grid.points_per_dim();

    let mut planner = FftPlanner::new();
    let mut plans = Vec::with_capacity(grid.dims());
    for k in 0..grid.dims() {
        let (g, h) = (factors.g[k], factors.h[k]);
        let drift = drift_of(factors.sectors[k], t);
        let r0 = extent(grid.nodes(), &marginal(&grid, &density, k), opts.tail_tolerance);
        let b0 = extent(grid.freq_nodes(), &marginal(&grid, &spec_density, k), opts.tail_tolerance);
        let band = if input_chirp { (h / g).abs() * r0 + drift.abs() + b0 } else { b0 };
        // alias-free: 2π r/dx ≥ L/|g| + band, with a 10% margin
        let need = 1.1 * (l / g.abs() + band) * dx / (2.0 * PI);
        let refine = (need.ceil().max(1.0) as usize).next_power_of_two();
        if refine * n > opts.max_refined_len {
            return Err(Error::Unresolved {
                time: t,
                reason: format!(
                    "dilation 1/|g| = {:.3e} along axis {k} needs a {}-fold refined line",
                    1.0 / g.abs(),
                    refine
                ),
            });
        }
        plans.push(LinePlan::new(
            &mut planner,
            &grid,
            g,
            h,
            drift,
            factors.amplitude(k),
            refine,
            input_chirp,
        ));
    }

    let mut values = psi.into_values();
    for (k, plan) in plans.iter().enumerate() {
        grid.for_each_line(&mut values, k, |line| plan.apply(line));
    }
    let global = Complex64::from_polar(1.0, -t.powi(3) * spec.field_norm_sqr() / 12.0);
    values.iter_mut().for_each(|v| *v *= global);
    let out = WaveFunction::new(&grid, values, Representation::Position)?;
    opts.boundary.check(&out, t)?;
    if spectral_edge_fraction(&grid, out.values()) > opts.band_tolerance {
        return Err(Error::Unresolved {
            time: t,
            reason: "propagated state has spectral mass near the Nyquist frequency".into(),
        });
    }
    Ok(out)
}

/// Largest grid accepted by the quadrature oracle.
pub const KERNEL_MAX_POINTS: usize = 256;
/// Shortest time accepted by the quadrature oracle; the kernel degenerates at 0.
pub const KERNEL_MIN_TIME: f64 = 0.05;

/// Direct `O(N²)`-per-line quadrature of the Mehler integral. Oracle only.
pub fn propagate_kernel(psi0: &WaveFunction, t: f64, spec: &QuadraticSpec) -> Result<WaveFunction> {
    spec.validate()?;
    check_dims(psi0, spec)?;
    let grid = psi0.grid().clone();
    if grid.dims() > 2 || grid.points_per_dim() > KERNEL_MAX_POINTS {
        return Err(Error::OracleScale(format!(
            "kernel quadrature supports 1-D or 2-D grids with at most {KERNEL_MAX_POINTS} points per dimension"
        )));
    }
    if t.abs() < KERNEL_MIN_TIME {
        return Err(config(format!(
            "kernel quadrature needs |t| >= {KERNEL_MIN_TIME}, got {t}"
        )));
    }
    check_singular(t, spec, DEFAULT_SINGULAR_GUARD)?;
    let phase = MehlerPhase::new(t, spec);
    let nodes = grid.nodes().to_vec();
    let n = nodes.len();
    let weight = grid.spacing() / (2.0 * PI).sqrt();
    let mut values = psi0.to_position()?.into_values();
    for k in 0..grid.dims() {
        let amp = phase.factors().amplitude(k) * weight;
        let kernel: Vec<Complex64> = (0..n * n)
            .map(|idx| {
                let (m, j) = (idx / n, idx % n);
                amp * Complex64::from_polar(1.0, phase.axis(k, nodes[m], nodes[j]))
            })
            .collect();
        grid.for_each_line(&mut values, k, |line| {
            let input = line.to_vec();
            for (m, out) in line.iter_mut().enumerate() {
                *out = kernel[m * n..(m + 1) * n]
                    .iter()
                    .zip(&input)
                    .map(|(kk, v)| kk * v)
                    .sum();
            }
        });
    }
    let global = Complex64::from_polar(1.0, phase.constant());
    values.iter_mut().for_each(|v| *v *= global);
    WaveFunction::new(&grid, values, Representation::Position)
}

/// Stark evolution `e^{-it(-∂² + Ex)}` on a 1-D grid by phase, free flow and shift:
/// `e^{-i(tEx + t³E²/3)} (e^{itΔ}φ)(x + t²E)`.
pub fn avron_herbst(psi0: &WaveFunction, t: f64, field: f64) -> Result<WaveFunction> {
    let grid = psi0.grid().clone();
    if grid.dims() != 1 {
        return Err(config("Avron-Herbst evolution is implemented for 1-D states"));
    }
    let psi = psi0.to_position()?;
    psi.check_finite()?;
    if t == 0.0 {
        return Ok(psi);
    }
    let guard = BoundaryGuard::default();
    let l = grid.half_width();
    let shift = t * t * field;
    if shift.abs() >= l {
        return Err(Error::DomainEscape {
            time: t,
            mass: 1.0,
            limit: guard.max_mass,
        });
    }
    let mut spec = psi.into_values();
    grid.forward_in_place(&mut spec);
    for (v, &k) in spec.iter_mut().zip(grid.freq_nodes()) {
        *v *= Complex64::from_polar(1.0, -t * k * k);
    }
    // mass that the periodic shift would wrap around
    let mut free = spec.clone();
    grid.inverse_in_place(&mut free);
    let total: f64 = free.iter().map(|v| v.norm_sqr()).sum();
    let wrapped: f64 = free
        .iter()
        .zip(grid.nodes())
        .filter(|(_, &y)| y - shift < -l || y - shift >= l)
        .map(|(v, _)| v.norm_sqr())
        .sum();
    if total > 0.0 && wrapped / total > guard.max_mass {
        return Err(Error::DomainEscape {
            time: t,
            mass: wrapped / total,
            limit: guard.max_mass,
        });
    }
    for (v, &k) in spec.iter_mut().zip(grid.freq_nodes()) {
        *v *= Complex64::from_polar(1.0, k * shift);
    }
    grid.inverse_in_place(&mut spec);
    let c = t.powi(3) * field * field / 3.0;
    for (v, &x) in spec.iter_mut().zip(grid.nodes()) {
        *v *= Complex64::from_polar(1.0, -(t * field * x + c));
    }
    let out = WaveFunction::new(&grid, spec, Representation::Position)?;
    guard.check(&out, t)?;
    Ok(out)
}

// 8-point Gauss–Legendre rule on [-1, 1]
const GL_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

fn gauss_legendre(a: f64, b: f64, out: &mut Vec<(f64, f64)>) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    for (x, w) in GL_NODES.iter().zip(&GL_WEIGHTS) {
        out.push((c - r * x, r * w));
        out.push((c + r * x, r * w));
    }
}

/// Stop grading once the innermost interval maps to `|x| < ZERO_CELL_CUTOFF`.
const ZERO_CELL_CUTOFF: f64 = 1e-3;

/// Nodes `(ξ, weight)` for the frequency cell around `ξ = 0`, graded
/// geometrically towards 0 so that `f(gξ)` is resolved for very large `|g|`.
pub(crate) fn zero_cell_rule(dk: f64, g: f64) -> Vec<(f64, f64)> {
    let mut half = Vec::new();
    let mut b = 0.5 * dk;
    while b * g.abs() >= ZERO_CELL_CUTOFF {
        gauss_legendre(0.5 * b, b, &mut half);
        b *= 0.5;
    }
    gauss_legendre(0.0, b, &mut half);
    half.iter()
        .flat_map(|&(x, w)| [(x, w), (-x, w)])
        .collect()
}

/// 8-point rule on a unit cell `[-1/2, 1/2]`.
pub(crate) fn unit_cell_rule() -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(8);
    gauss_legendre(-0.5, 0.5, &mut out);
    out
}

/// Applies a line map `C^n → C^m` along `axis` of a row-major array of `shape`.
fn map_axis<F>(data: &[Complex64], shape: &[usize], axis: usize, out_len: usize, f: F) -> Vec<Complex64>
where
    F: Fn(&[Complex64], &mut [Complex64]) + Sync,
{
    let n = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let mut out = vec![Complex64::new(0.0, 0.0); data.len() / n * out_len];
    out.par_chunks_mut(out_len * inner)
        .zip(data.par_chunks(n * inner))
        .for_each(|(dst, src)| {
            let mut line = vec![Complex64::new(0.0, 0.0); n];
            let mut res = vec![Complex64::new(0.0, 0.0); out_len];
            for i in 0..inner {
                for j in 0..n {
                    line[j] = src[j * inner + i];
                }
                f(&line, &mut res);
                for m in 0..out_len {
                    dst[m * inner + i] = res[m];
                }
            }
        });
    out
}

/// Rows per parallel work item in far-field sums.
const REDUCTION_CHUNK: usize = 64;

/// Position statistics of `e^{-itH₀}ψ₀` read off from
/// `|ψ(t,x)|² = Π|g_k|^{-1} |F(M_tψ₀)(x_1/g_1, …)|²`, without building the
/// propagated state.
///
/// The `ξ` integral uses 8 Gauss–Legendre nodes per dual-lattice cell, with
/// `F(M_tψ₀)` evaluated exactly at the off-lattice nodes (shifted FFTs), and a
/// geometrically graded rule in the cell around `ξ = 0` where `x = gξ` sweeps
/// the whole interaction region once `|g|` is large.
#[derive(Debug, Clone)]
pub struct FarField {
    factors: TrajectoryFactors,
    /// Per axis: `(x = g ξ, weight)`; zero weights mark skipped nodes.
    nodes: Vec<Vec<(f64, f64)>>,
    /// `|F(M_tψ₀)|²` on the tensor product of the axis nodes.
    density: Vec<f64>,
}

impl FarField {
    pub fn new(psi0: &WaveFunction, t: f64, spec: &QuadraticSpec) -> Result<Self> {
        Self::with_options(psi0, t, spec, &MehlerOptions::default())
    }

    pub fn with_options(
        psi0: &WaveFunction,
        t: f64,
        spec: &QuadraticSpec,
        opts: &MehlerOptions,
    ) -> Result<Self> {
        spec.validate()?;
        check_dims(psi0, spec)?;
        if t == 0.0 || !t.is_finite() {
            return Err(config("far-field evaluation needs a finite t != 0"));
        }
        check_singular(t, spec, opts.singular_guard)?;
        let psi = psi0.to_position()?;
        psi.check_finite()?;
        opts.boundary.check(&psi, 0.0)?;
        let grid = psi.grid().clone();
        let factors = trajectory_factors(t, spec);
        let chirp: Vec<Vec<f64>> = (0..grid.dims())
            .map(|k| {
                let (g, h) = (factors.g[k], factors.h[k]);
                let drift = drift_of(factors.sectors[k], t);
                grid.nodes()
                    .iter()
                    .map(|&x| h * x * x / (2.0 * g) - drift * x)
                    .collect()
            })
            .collect();
        let mut values = psi.into_values();
        let mut idx = vec![0usize; grid.dims()];
        for (flat, v) in values.iter_mut().enumerate() {
            grid.unravel(flat, &mut idx);
            let ph: f64 = idx.iter().enumerate().map(|(k, &i)| chirp[k][i]).sum();
            *v *= Complex64::from_polar(1.0, ph);
        }
        if spectral_edge_fraction(&grid, &values) > opts.band_tolerance {
            return Err(Error::Unresolved {
                time: t,
                reason: "chirped initial state exceeds the frequency band".into(),
            });
        }

        let n = grid.points_per_dim();
        let dk = grid.freq_spacing();
        let ys = grid.nodes().to_vec();
        let scale = grid.spacing() / (2.0 * PI).sqrt();
        let fft = FftPlanner::new().plan_fft_forward(n);
        let cell = unit_cell_rule();
        let mut shape = vec![n; grid.dims()];
        let mut nodes = Vec::with_capacity(grid.dims());
        for k in 0..grid.dims() {
            let g = factors.g[k];
            let graded = zero_cell_rule(dk, g);
            let mut axis_nodes = Vec::with_capacity(cell.len() * n + graded.len());
            for &(s, w) in &cell {
                for &xi in grid.freq_nodes() {
                    let weight = if xi == 0.0 { 0.0 } else { w * dk };
                    axis_nodes.push((g * (xi + s * dk), weight));
                }
            }
            axis_nodes.extend(graded.iter().map(|&(xi, w)| (g * xi, w)));
            let out_len = axis_nodes.len();
            let twiddles: Vec<Vec<Complex64>> = cell
                .iter()
                .map(|&(s, _)| {
                    ys.iter()
                        .map(|&y| Complex64::from_polar(scale, -s * dk * y))
                        .collect()
                })
                .collect();
            let direct: Vec<Vec<Complex64>> = graded
                .iter()
                .map(|&(xi, _)| {
                    ys.iter()
                        .map(|&y| Complex64::from_polar(scale, -xi * y))
                        .collect()
                })
                .collect();
            let fft = Arc::clone(&fft);
            values = map_axis(&values, &shape, k, out_len, |line, out| {
                for (c, tw) in twiddles.iter().enumerate() {
                    let block = &mut out[c * n..(c + 1) * n];
                    for ((b, v), w) in block.iter_mut().zip(line).zip(tw) {
                        *b = v * w;
                    }
                    fft.process(block);
                    // e^{iLξ_m} = (-1)^m
                    block.iter_mut().skip(1).step_by(2).for_each(|b| *b = -*b);
                }
                let base = cell.len() * n;
                for (q, row) in direct.iter().enumerate() {
                    out[base + q] = row.iter().zip(line).map(|(r, v)| r * v).sum();
                }
            });
            shape[k] = out_len;
            nodes.push(axis_nodes);
        }
        let density = values.iter().map(|v| v.norm_sqr()).collect();
        Ok(FarField {
            factors,
            nodes,
            density,
        })
    }

    pub fn factors(&self) -> &TrajectoryFactors {
        &self.factors
    }

    /// `∫ f(x) |ψ(t,x)|² dx`. Rows are summed in fixed chunks so the result is
    /// independent of thread scheduling.
    pub fn integrate<F>(&self, f: F) -> f64
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let d = self.nodes.len();
        let rows: Vec<(usize, f64, f64)> = self.rows();
        let partial: Vec<f64> = rows
            .par_chunks(REDUCTION_CHUNK)
            .map(|chunk| {
                let mut x = vec![0.0; d];
                let mut sum = 0.0;
                for &(i, x0, w0) in chunk {
                    x[0] = x0;
                    self.accumulate(&f, 1, i, w0, &mut x, &mut sum);
                }
                sum
            })
            .collect();
        partial.iter().sum()
    }

    fn rows(&self) -> Vec<(usize, f64, f64)> {
        self.nodes[0]
            .iter()
            .enumerate()
            .filter(|(_, (_, w))| *w != 0.0)
            .map(|(i, &(x0, w0))| (i, x0, w0))
            .collect()
    }

    fn accumulate<F: Fn(&[f64]) -> f64>(
        &self,
        f: &F,
        axis: usize,
        flat: usize,
        weight: f64,
        x: &mut [f64],
        sum: &mut f64,
    ) {
        if axis == x.len() {
            let rho = self.density[flat];
            if rho != 0.0 {
                *sum += f(x) * rho * weight;
            }
            return;
        }
        let len = self.nodes[axis].len();
        for (i, &(xi, w)) in self.nodes[axis].iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            x[axis] = xi;
            self.accumulate(f, axis + 1, flat * len + i, weight * w, x, sum);
        }
    }

    /// Masses `∫_{bin(x) = b} |ψ(t,x)|² dx` for `b < nbins`, in one pass;
    /// indices at or beyond `nbins` go to the last bin.
    pub fn integrate_binned<F>(&self, nbins: usize, bin: F) -> Vec<f64>
    where
        F: Fn(&[f64]) -> usize + Sync,
    {
        let d = self.nodes.len();
        let nbins = nbins.max(1);
        let rows = self.rows();
        let partial: Vec<Vec<f64>> = rows
            .par_chunks(REDUCTION_CHUNK)
            .map(|chunk| {
                let mut acc = vec![0.0; nbins];
                let mut x = vec![0.0; d];
                for &(i, x0, w0) in chunk {
                    x[0] = x0;
                    self.accumulate_binned(&bin, 1, i, w0, &mut x, &mut acc);
                }
                acc
            })
            .collect();
        let mut out = vec![0.0; nbins];
        for acc in &partial {
            out.iter_mut().zip(acc).for_each(|(p, q)| *p += q);
        }
        out
    }

    fn accumulate_binned<F: Fn(&[f64]) -> usize>(
        &self,
        bin: &F,
        axis: usize,
        flat: usize,
        weight: f64,
        x: &mut [f64],
        acc: &mut [f64],
    ) {
        if axis == x.len() {
            let rho = self.density[flat];
            if rho != 0.0 {
                let b = bin(x).min(acc.len() - 1);
                acc[b] += rho * weight;
            }
            return;
        }
        let len = self.nodes[axis].len();
        for (i, &(xi, w)) in self.nodes[axis].iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            x[axis] = xi;
            self.accumulate_binned(bin, axis + 1, flat * len + i, weight * w, x, acc);
        }
    }

    /// Total mass; equals `‖ψ₀‖²` up to quadrature error.
    pub fn mass(&self) -> f64 {
        self.integrate(|_| 1.0)
    }

    /// `∫ f(x)|ψ(t,x)|² dx / ∫ |ψ(t,x)|² dx`.
    pub fn expectation<F>(&self, f: F) -> f64
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        self.integrate(f) / self.mass()
    }
}
