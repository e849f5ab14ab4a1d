//! Scattering diagnostics: Cook integrands, finite-time wave operators, the
//! local velocity operator and asymptotic velocity distributions.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{config, Error, Result};
use crate::fit::linear_fit;
use crate::grid::{BoundaryGuard, Observable, WaveFunction};
use crate::mehler::{
    check_singular, drift_of, propagate_factored, propagate_from_frame, trajectory_factors, unit_cell_rule,
    zero_cell_rule, FarField, DEFAULT_SINGULAR_GUARD,
};
use crate::potentials::{bracket, bracket1, p_alpha, sigma_alpha, PerturbationSpec, QuadraticSpec};
use crate::splitstep::{propagate, EvolutionConfig};

/// The unperturbed dynamics `e^{-itH₀}`.
#[derive(Debug, Clone)]
pub enum Dynamics {
    /// Quadratic `H₀`; position statistics come from the far-field factorization.
    Quadratic(QuadraticSpec),
    /// Split-step evolution on a grid.
    Grid(EvolutionConfig),
}

/// `σ_α/2 Σ_k (f_k D_k + D_k f_k)` with `f(x) = x/⟨x⟩^{1+α/2}`.
pub fn local_velocity(grid: &crate::grid::Grid, alpha: f64) -> Result<Observable> {
    let sigma = sigma_alpha(alpha)?;
    let components = (0..grid.dims())
        .map(|k| grid.sample(|x| x[k] / bracket(x).powf(1.0 + alpha / 2.0)))
        .collect();
    Ok(Observable::SymmetrizedMixed { components, scale: 0.5 * sigma })
}

/// Applies the local velocity operator; the state must stay clear of the boundary.
pub fn local_velocity_apply(psi: &WaveFunction, alpha: f64) -> Result<WaveFunction> {
    BoundaryGuard::default().check(psi, 0.0)?;
    local_velocity(psi.grid(), alpha)?.apply(psi)
}

fn shift_time(e: Error, offset: f64) -> Error {
    match e {
        Error::DomainEscape { time, mass, limit } => {
            Error::DomainEscape { time: time + offset, mass, limit }
        }
        other => other,
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(config("empty time schedule"));
    }
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(config("schedule times must be finite and nonnegative"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(config("schedule times must be strictly increasing"));
    }
    Ok(())
}

/// Which tail model fits better.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailKind {
    /// `c t^{p}`
    Power,
    /// `c e^{λt}`
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailModel {
    pub kind: TailKind,
    /// Exponent `p` or rate `λ`.
    pub rate: f64,
    pub prefactor: f64,
    /// Residual sum of squares of `ln(integrand)`.
    pub rss: f64,
}

impl TailModel {
    pub fn eval(&self, t: f64) -> f64 {
        match self.kind {
            TailKind::Power => self.prefactor * t.powf(self.rate),
            TailKind::Exponential => self.prefactor * (self.rate * t).exp(),
        }
    }

    /// `∫_T^∞` of the model; infinite when it is not integrable.
    pub fn tail_integral(&self, from: f64) -> f64 {
        match self.kind {
            TailKind::Power if self.rate < -1.0 => {
                -self.prefactor * from.powf(self.rate + 1.0) / (self.rate + 1.0)
            }
            TailKind::Exponential if self.rate < 0.0 => -self.eval(from) / self.rate,
            _ => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailFits {
    pub power: TailModel,
    pub exponential: TailModel,
}

impl TailFits {
    pub fn best(&self) -> TailModel {
        if self.exponential.rss < self.power.rss {
            self.exponential
        } else {
            self.power
        }
    }
}

/// Samples of `‖V e^{-itH₀}φ‖` along a schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct CookRecord {
    pub times: Vec<f64>,
    pub integrand: Vec<f64>,
    /// Fits over the positive schedule times; `None` if the integrand vanishes there.
    pub tail: Option<TailFits>,
    /// Simpson integral over the schedule plus the fitted tail beyond it.
    pub integral_estimate: f64,
    /// `|Simpson - trapezoid|` over the schedule.
    pub quadrature_error: f64,
    /// First time at which a guard failed; later times are missing.
    pub truncated_at: Option<f64>,
}

/// Composite Simpson on a nonuniform grid; an odd interval count closes
/// with the three-point rule on the last interval.
pub fn simpson(t: &[f64], f: &[f64]) -> f64 {
    let n = t.len();
    if n < 2 {
        return 0.0;
    }
    if n == 2 {
        return 0.5 * (t[1] - t[0]) * (f[0] + f[1]);
    }
    let mut sum = 0.0;
    let mut i = 0;
    while i + 2 < n {
        let (h0, h1) = (t[i + 1] - t[i], t[i + 2] - t[i + 1]);
        sum += (h0 + h1) / 6.0
            * ((2.0 - h1 / h0) * f[i] + (h0 + h1).powi(2) / (h0 * h1) * f[i + 1] + (2.0 - h0 / h1) * f[i + 2]);
        i += 2;
    }
    if i + 1 < n {
        let (h0, h1) = (t[i] - t[i - 1], t[i + 1] - t[i]);
        sum += f[i + 1] * (2.0 * h1 * h1 + 3.0 * h0 * h1) / (6.0 * (h0 + h1))
            + f[i] * (h1 * h1 + 3.0 * h1 * h0) / (6.0 * h0)
            - f[i - 1] * h1.powi(3) / (6.0 * h0 * (h0 + h1));
    }
    sum
}

fn trapezoid(t: &[f64], f: &[f64]) -> f64 {
    t.windows(2).zip(f.windows(2)).map(|(a, b)| 0.5 * (a[1] - a[0]) * (b[0] + b[1])).sum()
}

impl CookRecord {
    fn finish(times: Vec<f64>, integrand: Vec<f64>, truncated_at: Option<f64>) -> Self {
        let tail = fit_tail(&times, &integrand, None).ok();
        let s = simpson(&times, &integrand);
        let quadrature_error = (s - trapezoid(&times, &integrand)).abs();
        let last = *times.last().expect("nonempty schedule");
        let rest = if integrand.iter().all(|v| *v == 0.0) {
            0.0
        } else {
            tail.map_or(f64::INFINITY, |f| f.best().tail_integral(last))
        };
        CookRecord { times, integrand, tail, integral_estimate: s + rest, quadrature_error, truncated_at }
    }

    /// Power and exponential fits restricted to `t ∈ [t0, t1]`.
    pub fn tail_fit(&self, window: (f64, f64)) -> Result<TailFits> {
        fit_tail(&self.times, &self.integrand, Some(window))
    }

    /// Log-log slope of the integrand over the window.
    pub fn power_slope(&self, window: (f64, f64)) -> Result<f64> {
        Ok(self.tail_fit(window)?.power.rate)
    }

    /// Simpson integral over the samples in `[t0, t1]` (both must be schedule times).
    pub fn integral_between(&self, t0: f64, t1: f64) -> Result<(f64, f64)> {
        let i0 = self.index_of(t0)?;
        let i1 = self.index_of(t1)?;
        if i1 <= i0 {
            return Err(config("integration bounds must be increasing"));
        }
        let (t, f) = (&self.times[i0..=i1], &self.integrand[i0..=i1]);
        let s = simpson(t, f);
        Ok((s, (s - trapezoid(t, f)).abs()))
    }

    fn index_of(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
            .ok_or_else(|| config(format!("t = {t} is not a schedule time")))
    }

    pub fn csv_header() -> Vec<String> {
        vec!["t".into(), "integrand".into()]
    }

    pub fn csv_rows(&self) -> Vec<Vec<f64>> {
        self.times.iter().zip(&self.integrand).map(|(t, v)| vec![*t, *v]).collect()
    }
}

fn fit_tail(times: &[f64], vals: &[f64], window: Option<(f64, f64)>) -> Result<TailFits> {
    let (lo, hi) = window.unwrap_or((f64::MIN_POSITIVE, f64::INFINITY));
    let (mut ts, mut ls) = (Vec::new(), Vec::new());
    for (t, v) in times.iter().zip(vals) {
        if *t >= lo && *t <= hi && *t > 0.0 && *v > 0.0 {
            ts.push(*t);
            ls.push(v.ln());
        }
    }
    if ts.len() < 3 {
        return Err(Error::Fit("fewer than three positive samples in the tail window".into()));
    }
    let lt: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let rss = |x: &[f64], a: f64, b: f64| -> f64 {
        x.iter().zip(&ls).map(|(xi, yi)| (yi - a * xi - b).powi(2)).sum()
    };
    let (p, bp) = linear_fit(&lt, &ls)?;
    let (lam, be) = linear_fit(&ts, &ls)?;
    Ok(TailFits {
        power: TailModel { kind: TailKind::Power, rate: p, prefactor: bp.exp(), rss: rss(&lt, p, bp) },
        exponential: TailModel {
            kind: TailKind::Exponential,
            rate: lam,
            prefactor: be.exp(),
            rss: rss(&ts, lam, be),
        },
    })
}

/// `‖V e^{-itH₀}φ‖` along `times`. Quadratic dynamics evaluate every time
/// independently through the far field; grid dynamics run one trajectory and
/// stop at the first guard failure.
pub fn cook_scan(
    phi: &WaveFunction,
    dynamics: &Dynamics,
    perturbation: &PerturbationSpec,
    times: &[f64],
) -> Result<CookRecord> {
    check_times(times)?;
    perturbation.validate()?;
    let phi = phi.to_position()?;
    if perturbation.is_zero() {
        return Ok(CookRecord::finish(times.to_vec(), vec![0.0; times.len()], None));
    }
    match dynamics {
        Dynamics::Quadratic(spec) => {
            let at = |t: f64| -> Result<f64> {
                if t == 0.0 {
                    let v = perturbation.sample(phi.grid())?;
                    return Ok(weighted_norm(&phi, &v));
                }
                let ff = FarField::new(&phi, t, spec)?;
                Ok(ff.integrate(|x| perturbation.eval(x).powi(2)).max(0.0).sqrt())
            };
            let vals: Vec<Result<f64>> = times.par_iter().map(|&t| at(t)).collect();
            let mut kept = Vec::new();
            let mut truncated = None;
            for (t, v) in times.iter().zip(vals) {
                match v {
                    Ok(v) => kept.push(v),
                    Err(Error::DomainEscape { .. } | Error::Unresolved { .. } | Error::Singularity { .. }) => {
                        truncated = Some(*t);
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            let n = kept.len();
            if n == 0 {
                return Err(Error::Config(format!("the first schedule time {} already fails the guards", times[0])));
            }
            Ok(CookRecord::finish(times[..n].to_vec(), kept, truncated))
        }
        Dynamics::Grid(cfg) => {
            let v = perturbation.sample(cfg.grid())?;
            let mut psi = phi;
            let mut now = 0.0;
            let mut kept = Vec::new();
            let mut truncated = None;
            for &t in times {
                if t > now {
                    match propagate(&psi, t - now, cfg) {
                        Ok(next) => psi = next,
                        Err(Error::DomainEscape { .. }) => {
                            truncated = Some(t);
                            break;
                        }
                        Err(e) => return Err(shift_time(e, now)),
                    }
                    now = t;
                }
                kept.push(weighted_norm(&psi, &v));
            }
            if kept.is_empty() {
                return Err(Error::Config("no schedule time passed the guards".into()));
            }
            let n = kept.len();
            Ok(CookRecord::finish(times[..n].to_vec(), kept, truncated))
        }
    }
}

fn weighted_norm(psi: &WaveFunction, v: &[f64]) -> f64 {
    let s: f64 = psi.values().iter().zip(v).map(|(p, w)| p.norm_sqr() * w * w).sum();
    (s * psi.grid().cell_volume()).sqrt()
}

/// How `Ω_T = e^{iTH} e^{-iTH₀}` is evaluated.
#[derive(Debug, Clone)]
pub enum WaveOperatorMethod {
    /// Both evolutions by split-step on one grid; `h0` and `h` share the grid.
    Grid { h0: EvolutionConfig, h: EvolutionConfig },
    /// Quadratic `H₀` with `H = H₀ + V`. Up to `switch_time` the grid
    /// composition (Mehler forward, split-step backward with time step `dt`)
    /// is used; beyond it the interaction-picture product
    /// `Ω_T = Ω_{s₀} Π_k exp(i Δ V_I(s_k))` with midpoint times `s_k` and
    /// `V_I(s) = M_s⁻¹ F⁻¹ V(g(2s)ξ) F M_s`, `V` averaged over each frequency cell.
    Interaction {
        spec: QuadraticSpec,
        perturbation: PerturbationSpec,
        dt: f64,
        switch_time: f64,
        step: f64,
    },
}

/// `Ω_T φ`.
pub fn wave_operator(phi: &WaveFunction, t: f64, method: &WaveOperatorMethod) -> Result<WaveFunction> {
    if !t.is_finite() || t < 0.0 {
        return Err(config("wave-operator time must be finite and nonnegative"));
    }
    let phi = phi.to_position()?;
    if t == 0.0 {
        return Ok(phi);
    }
    match method {
        WaveOperatorMethod::Grid { h0, h } => {
            if h0.grid() != h.grid() || phi.grid() != h.grid() {
                return Err(config("state and both evolutions must share one grid"));
            }
            let fwd = propagate(&phi, t, h0)?;
            propagate(&fwd, -t, h).map_err(|e| shift_time(e, t))
        }
        WaveOperatorMethod::Interaction { spec, perturbation, dt, switch_time, step } => {
            perturbation.validate()?;
            if perturbation.is_zero() {
                return Ok(phi);
            }
            if !(*switch_time > 0.0) || !(*step > 0.0) {
                return Err(config("switch time and interaction step must be positive"));
            }
            let s0 = switch_time.min(t);
            let h = EvolutionConfig::quadratic(phi.grid(), spec, perturbation, *dt)?;
            let fwd = if t > s0 {
                // Frame state w with Ω_T φ = Ω_{s₀} M_{s₀}⁻¹ w; the chirp is never
                // formed on the lattice.
                let frame = InteractionFrame::new(phi.grid(), spec, perturbation)?;
                let n = ((t - s0) / step).ceil().max(1.0) as usize;
                let ds = (t - s0) / n as f64;
                let mut w = frame.to_frame(&phi, s0 + (n as f64 - 0.5) * ds)?;
                for k in (0..n).rev() {
                    let s = s0 + (k as f64 + 0.5) * ds;
                    let next = if k == 0 { s0 } else { s - ds };
                    w = frame.kick(&w, s, ds, next)?;
                }
                propagate_from_frame(&w, s0, spec)?
            } else {
                propagate_factored(&phi, s0, spec)?
            };
            propagate(&fwd, -s0, &h).map_err(|e| shift_time(e, s0))
        }
    }
}

/// Frequency-cell quadrature for `V(g ξ)` in the interaction picture.
struct InteractionFrame<'a> {
    spec: &'a QuadraticSpec,
    v: &'a PerturbationSpec,
    grid: crate::grid::Grid,
    cell: Vec<(f64, f64)>,
}

impl<'a> InteractionFrame<'a> {
    fn new(grid: &crate::grid::Grid, spec: &'a QuadraticSpec, v: &'a PerturbationSpec) -> Result<Self> {
        if grid.dims() != spec.dims {
            return Err(config("state and quadratic spec dimensions differ"));
        }
        spec.validate()?;
        Ok(InteractionFrame { spec, v, grid: grid.clone(), cell: unit_cell_rule() })
    }

    /// Per-axis `(x = g ξ, weight)` rules, weights summing to 1 in every cell.
    fn axis_rules(&self, g: f64) -> Vec<Vec<(f64, f64)>> {
        let dk = self.grid.freq_spacing();
        self.grid
            .freq_nodes()
            .iter()
            .map(|&xi| {
                if xi == 0.0 {
                    zero_cell_rule(dk, g).into_iter().map(|(z, w)| (g * z, w / dk)).collect()
                } else {
                    self.cell.iter().map(|&(s, w)| (g * (xi + s * dk), w)).collect()
                }
            })
            .collect()
    }

    /// Cell averages of `V(g_1ξ_1, …)` on the frequency lattice (flat order).
    fn averaged_potential(&self, g: &[f64]) -> Vec<f64> {
        let rules: Vec<Vec<Vec<(f64, f64)>>> = g.iter().map(|&gk| self.axis_rules(gk)).collect();
        let d = self.grid.dims();
        (0..self.grid.len())
            .into_par_iter()
            .map(|flat| {
                let mut idx = vec![0usize; d];
                self.grid.unravel(flat, &mut idx);
                let axes: Vec<&Vec<(f64, f64)>> = (0..d).map(|k| &rules[k][idx[k]]).collect();
                let mut x = vec![0.0; d];
                tensor_sum(&axes, 0, 1.0, &mut x, &|p| self.v.eval(p))
            })
            .collect()
    }

    /// Chirp `M_s` per axis on the lattice.
    fn chirp(&self, s: f64) -> Result<Vec<Vec<f64>>> {
        check_singular(s, self.spec, DEFAULT_SINGULAR_GUARD)?;
        let f = trajectory_factors(s, self.spec);
        Ok((0..self.grid.dims())
            .map(|k| {
                let (g, h) = (f.g[k], f.h[k]);
                let drift = drift_of(f.sectors[k], s);
                self.grid.nodes().iter().map(|&y| h * y * y / (2.0 * g) - drift * y).collect()
            })
            .collect())
    }

    /// Multiplies by `M_a M_b⁻¹` (`b = None`: by `M_a`).
    fn rechirp(&self, psi: &WaveFunction, a: f64, b: Option<f64>) -> Result<WaveFunction> {
        let ca = self.chirp(a)?;
        let cb = match b {
            Some(b) => Some(self.chirp(b)?),
            None => None,
        };
        let mut idx = vec![0usize; self.grid.dims()];
        let mut out = psi.to_position()?;
        for (flat, v) in out.values_mut().iter_mut().enumerate() {
            self.grid.unravel(flat, &mut idx);
            let mut ph: f64 = idx.iter().enumerate().map(|(k, &i)| ca[k][i]).sum();
            if let Some(cb) = &cb {
                ph -= idx.iter().enumerate().map(|(k, &i)| cb[k][i]).sum::<f64>();
            }
            *v *= Complex64::from_polar(1.0, ph);
        }
        Ok(out)
    }

    /// `M_s φ`, the frame representation used by the first kick.
    fn to_frame(&self, phi: &WaveFunction, s: f64) -> Result<WaveFunction> {
        self.rechirp(phi, s, None)
    }

    /// Given `w = M_s ψ`, returns `M_next exp(i Δ V_I(s)) ψ`, i.e. the kick
    /// `F⁻¹ e^{iΔV̄} F` in the frame followed by the frame change `M_next M_s⁻¹`.
    fn kick(&self, w: &WaveFunction, s: f64, ds: f64, next: f64) -> Result<WaveFunction> {
        let f = trajectory_factors(s, self.spec);
        let mut mom = w.to_momentum()?;
        let edge = edge_fraction(&self.grid, mom.values());
        if edge > 1e-12 {
            return Err(Error::Unresolved {
                time: s,
                reason: format!("interaction-frame state has spectral edge fraction {edge:e}"),
            });
        }
        let vbar = self.averaged_potential(&f.g);
        for (v, p) in mom.values_mut().iter_mut().zip(&vbar) {
            *v *= Complex64::from_polar(1.0, ds * p);
        }
        let out = mom.to_position()?;
        if next == s {
            return Ok(out);
        }
        self.rechirp(&out, next, Some(s))
    }
}

fn tensor_sum(axes: &[&Vec<(f64, f64)>], k: usize, w: f64, x: &mut [f64], f: &dyn Fn(&[f64]) -> f64) -> f64 {
    if k == axes.len() {
        return w * f(x);
    }
    let mut s = 0.0;
    for &(xk, wk) in axes[k].iter() {
        x[k] = xk;
        s += tensor_sum(axes, k + 1, w * wk, x, f);
    }
    s
}

/// Momentum mass with some `|ξ_k| > 0.9 π/dx`, from momentum-space samples.
fn edge_fraction(grid: &crate::grid::Grid, mom: &[Complex64]) -> f64 {
    let cut = 0.9 * grid.nyquist();
    let edge: Vec<bool> = grid.freq_nodes().iter().map(|k| k.abs() > cut).collect();
    let mut idx = vec![0usize; grid.dims()];
    let (mut total, mut outer) = (0.0, 0.0);
    for (flat, v) in mom.iter().enumerate() {
        let rho = v.norm_sqr();
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

/// Histogram of `p_α(x)/t` on `[0, bin_width·(len-1))` plus an overflow bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_width: f64,
    /// Normalized masses; the last entry collects everything beyond the range.
    pub masses: Vec<f64>,
}

impl Histogram {
    fn from_raw(bin_width: f64, raw: Vec<f64>) -> Result<Self> {
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return Err(Error::NumericalState("velocity histogram has no mass".into()));
        }
        Ok(Histogram { bin_width, masses: raw.iter().map(|m| m / total).collect() })
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Upper edge of the last regular bin.
    pub fn range(&self) -> f64 {
        self.bin_width * (self.masses.len() - 1) as f64
    }

    /// Mass of `[0, θ)`, linear inside a partially covered bin.
    pub fn mass_below(&self, theta: f64) -> f64 {
        if theta <= 0.0 {
            return 0.0;
        }
        if theta >= self.range() {
            let full: f64 = self.masses[..self.masses.len() - 1].iter().sum();
            return if theta.is_infinite() { full + self.masses[self.masses.len() - 1] } else { full };
        }
        let pos = theta / self.bin_width;
        let k = pos.floor() as usize;
        let full: f64 = self.masses[..k].iter().sum();
        full + (pos - k as f64) * self.masses[k]
    }

    /// Mass of `[a, b)`.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        (self.mass_below(b) - self.mass_below(a)).max(0.0)
    }

    /// Linear-interpolated quantile inside the regular range.
    pub fn quantile(&self, q: f64) -> f64 {
        let mut acc = 0.0;
        for (k, m) in self.masses[..self.masses.len() - 1].iter().enumerate() {
            if acc + m >= q && *m > 0.0 {
                return self.bin_width * (k as f64 + (q - acc) / m);
            }
            acc += m;
        }
        self.range()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityOptions {
    pub bin_width: f64,
    /// Upper end of the regular bins; the overflow bin holds the rest.
    pub hist_max: f64,
    /// Record `ln⟨x_j⟩/t` per coordinate and `ln⟨x⟩/t`.
    pub per_direction: bool,
}

impl Default for VelocityOptions {
    fn default() -> Self {
        VelocityOptions { bin_width: 0.05, hist_max: 8.0, per_direction: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityTrace {
    pub alpha: f64,
    pub times: Vec<f64>,
    /// `⟨p_α(x)⟩/t`.
    pub mean: Vec<f64>,
    pub histograms: Vec<Histogram>,
    /// `ln⟨x_j⟩/t`, indexed `[j][time]`.
    pub per_direction: Option<Vec<Vec<f64>>>,
    /// `ln⟨x⟩/t` when per-direction traces are requested.
    pub global_log: Option<Vec<f64>>,
    pub truncated_at: Option<f64>,
}

impl VelocityTrace {
    /// `mean[k+1] - mean[k]`.
    pub fn successive_differences(&self) -> Vec<f64> {
        self.mean.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Two-point extrapolation in `1/t`: `(t₂m₂ - t₁m₁)/(t₂ - t₁)`.
    pub fn richardson(&self, t1: f64, t2: f64) -> Result<f64> {
        let find = |t: f64| {
            self.times
                .iter()
                .position(|s| (s - t).abs() <= 1e-12 * t.max(1.0))
                .ok_or_else(|| config(format!("t = {t} is not in the trace")))
        };
        let (i, j) = (find(t1)?, find(t2)?);
        if t1 == t2 {
            return Err(config("Richardson extrapolation needs two distinct times"));
        }
        Ok((t2 * self.mean[j] - t1 * self.mean[i]) / (t2 - t1))
    }

    pub fn csv_header() -> Vec<String> {
        ["t", "mean", "q10", "q50", "q90"].iter().map(|s| s.to_string()).collect()
    }

    pub fn csv_rows(&self) -> Vec<Vec<f64>> {
        self.times
            .iter()
            .zip(&self.mean)
            .zip(&self.histograms)
            .map(|((t, m), h)| vec![*t, *m, h.quantile(0.1), h.quantile(0.5), h.quantile(0.9)])
            .collect()
    }

    pub fn histogram_header() -> Vec<String> {
        ["t", "bin_lo", "bin_hi", "mass"].iter().map(|s| s.to_string()).collect()
    }

    pub fn histogram_rows(&self) -> Vec<Vec<f64>> {
        let mut rows = Vec::new();
        for (t, h) in self.times.iter().zip(&self.histograms) {
            let n = h.masses.len();
            for (k, m) in h.masses.iter().enumerate() {
                let lo = h.bin_width * k as f64;
                let hi = if k + 1 == n { f64::INFINITY } else { lo + h.bin_width };
                rows.push(vec![*t, lo, hi, *m]);
            }
        }
        rows
    }
}

struct Snapshot {
    mean: f64,
    hist: Histogram,
    dirs: Option<(Vec<f64>, f64)>,
}

/// `p_α(x)/t` statistics of `e^{-itH}ψ₀` at positive `times`.
pub fn velocity_trace(
    psi0: &WaveFunction,
    dynamics: &Dynamics,
    alpha: f64,
    times: &[f64],
    opts: &VelocityOptions,
) -> Result<VelocityTrace> {
    sigma_alpha(alpha)?;
    check_times(times)?;
    if times[0] <= 0.0 {
        return Err(config("velocity traces need t > 0"));
    }
    if !(opts.bin_width > 0.0) || !(opts.hist_max > opts.bin_width) {
        return Err(config("histogram needs 0 < bin_width < hist_max"));
    }
    let nbins = (opts.hist_max / opts.bin_width).ceil() as usize + 1;
    let bin_of = move |v: f64| -> usize {
        if v <= 0.0 {
            0
        } else {
            ((v / opts.bin_width).floor() as usize).min(nbins - 1)
        }
    };
    let psi0 = psi0.to_position()?;
    let d = psi0.grid().dims();
    let mut snaps: Vec<Snapshot> = Vec::new();
    let mut truncated = None;
    match dynamics {
        Dynamics::Quadratic(spec) => {
            let one = |t: f64| -> Result<Snapshot> {
                let ff = FarField::new(&psi0, t, spec)?;
                let p = |x: &[f64]| p_alpha(x, alpha).expect("validated alpha");
                let mass = ff.mass();
                let mean = ff.integrate(|x| p(x)) / mass / t;
                let raw = ff.integrate_binned(nbins, |x| bin_of(p(x) / t));
                let dirs = opts.per_direction.then(|| {
                    let per = (0..d).map(|j| ff.integrate(|x| bracket1(x[j]).ln()) / mass / t).collect();
                    (per, ff.integrate(|x| bracket(x).ln()) / mass / t)
                });
                Ok(Snapshot { mean, hist: Histogram::from_raw(opts.bin_width, raw)?, dirs })
            };
            let all: Vec<Result<Snapshot>> = times.par_iter().map(|&t| one(t)).collect();
            for (t, s) in times.iter().zip(all) {
                match s {
                    Ok(s) => snaps.push(s),
                    Err(Error::DomainEscape { .. } | Error::Unresolved { .. } | Error::Singularity { .. }) => {
                        truncated = Some(*t);
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        Dynamics::Grid(cfg) => {
            let grid = cfg.grid().clone();
            let pvals = grid.sample(|x| p_alpha(x, alpha).expect("validated alpha"));
            let logs: Vec<Vec<f64>> = (0..d).map(|j| grid.sample(|x| bracket1(x[j]).ln())).collect();
            let glog = grid.sample(|x| bracket(x).ln());
            let mut psi = psi0;
            let mut now = 0.0;
            for &t in times {
                match propagate(&psi, t - now, cfg) {
                    Ok(next) => psi = next,
                    Err(Error::DomainEscape { .. }) => {
                        truncated = Some(t);
                        break;
                    }
                    Err(e) => return Err(shift_time(e, now)),
                }
                now = t;
                let rho = psi.density();
                let mass: f64 = rho.iter().sum();
                let avg = |f: &[f64]| f.iter().zip(&rho).map(|(a, r)| a * r).sum::<f64>() / mass / t;
                let mut raw = vec![0.0; nbins];
                for (p, r) in pvals.iter().zip(&rho) {
                    raw[bin_of(p / t)] += r;
                }
                let dirs = opts
                    .per_direction
                    .then(|| (logs.iter().map(|l| avg(l)).collect(), avg(&glog)));
                snaps.push(Snapshot { mean: avg(&pvals), hist: Histogram::from_raw(opts.bin_width, raw)?, dirs });
            }
        }
    }
    if snaps.is_empty() {
        return Err(Error::Config(format!("the first schedule time {} already fails the guards", times[0])));
    }
    let n = snaps.len();
    let per_direction = opts
        .per_direction
        .then(|| (0..d).map(|j| snaps.iter().map(|s| s.dirs.as_ref().unwrap().0[j]).collect()).collect());
    let global_log = opts.per_direction.then(|| snaps.iter().map(|s| s.dirs.as_ref().unwrap().1).collect());
    Ok(VelocityTrace {
        alpha,
        times: times[..n].to_vec(),
        mean: snaps.iter().map(|s| s.mean).collect(),
        histograms: snaps.into_iter().map(|s| s.hist).collect(),
        per_direction,
        global_log,
        truncated_at: truncated,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityMass {
    pub times: Vec<f64>,
    /// Mass of `p_α(x)/t < θ`.
    pub mass_below: Vec<f64>,
    /// Mass of `p_α(x)/t ∈ [θ₂, θ₃)`.
    pub mass_in_window: Vec<f64>,
}

/// Minimal-velocity (`θ < σ_α`) and maximal-velocity (window above `σ_α`) masses.
pub fn minimal_maximal_velocity_mass(
    trace: &VelocityTrace,
    theta_low: f64,
    theta_window: (f64, f64),
) -> Result<VelocityMass> {
    let sigma = sigma_alpha(trace.alpha)?;
    if !(theta_low < sigma) {
        return Err(config(format!("theta_low must be below sigma_alpha = {sigma}")));
    }
    let (a, b) = theta_window;
    if !(a > sigma && b > a) {
        return Err(config(format!("velocity window must satisfy sigma_alpha = {sigma} < theta2 < theta3")));
    }
    Ok(VelocityMass {
        times: trace.times.clone(),
        mass_below: trace.histograms.iter().map(|h| h.mass_below(theta_low)).collect(),
        mass_in_window: trace.histograms.iter().map(|h| h.mass_between(a, b)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{expectation, make_grid, Grid, Representation};
    use crate::potentials::{DecayFactor, Profile, RepulsiveSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn log_w() -> PerturbationSpec {
        PerturbationSpec::short_range(Profile::LogPower { amplitude: 1.0, exponent: 2.0 }, 1.0).unwrap()
    }

    fn inverted() -> QuadraticSpec {
        QuadraticSpec::inverted(vec![1.0]).unwrap()
    }

    #[test]
    fn simpson_is_exact_for_quadratics() {
        let t = [0.0, 0.3, 1.0, 1.2, 2.0, 2.5];
        let f: Vec<f64> = t.iter().map(|x| 3.0 * x * x - 2.0 * x + 1.0).collect();
        let exact = |b: f64| b * b * b - b * b + b;
        assert!((simpson(&t, &f) - exact(2.5)).abs() < 1e-12);
        assert!((simpson(&t[..5], &f[..5]) - exact(2.0)).abs() < 1e-12);
        // uniform spacing is exact for cubics
        let u: Vec<f64> = (0..=6).map(|i| i as f64 * 0.5).collect();
        let c: Vec<f64> = u.iter().map(|x| x * x * x).collect();
        assert!((simpson(&u, &c) - 81.0 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn velocity_expectations() {
        let g = make_grid(1, 512, 20.0).unwrap();
        let even = WaveFunction::gaussian(&g, &[0.0], 1.0, &[0.0]).unwrap();
        for alpha in [0.5, 1.0, 2.0] {
            let v = local_velocity(&g, alpha).unwrap();
            assert!(expectation(&even, &v).unwrap().abs() < 1e-14);
        }
        // a e^{ikx} with real a: ⟨V_α⟩ = σ_α k ∫ f a², by fine quadrature.
        let (k, x0) = (3.0, 2.0);
        let psi = WaveFunction::gaussian(&g, &[x0], 1.0, &[k]).unwrap();
        for alpha in [1.0, 2.0] {
            let got = expectation(&psi, &local_velocity(&g, alpha).unwrap()).unwrap();
            let m = 200_000;
            let (a, b) = (x0 - 12.0, x0 + 12.0);
            let h = (b - a) / m as f64;
            let dens = |x: f64| (-(x - x0) * (x - x0)).exp() / std::f64::consts::PI.sqrt();
            let f = |x: f64| x / (1.0 + x * x).powf(0.5 + alpha / 4.0) * dens(x);
            let mut s = f(a) + f(b);
            for i in 1..m {
                s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            let want = sigma_alpha(alpha).unwrap() * k * s * h / 3.0;
            assert!((got - want).abs() < 1e-9, "alpha {alpha}: {got} vs {want}");
        }
    }

    #[test]
    fn velocity_cauchy_schwarz() {
        let g = make_grid(1, 256, 16.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let c = rng.gen_range(-4.0..4.0);
            let k = rng.gen_range(-5.0..5.0);
            let w = rng.gen_range(0.5..2.0);
            let a = WaveFunction::gaussian(&g, &[c], w, &[k]).unwrap();
            let b = WaveFunction::gaussian(&g, &[-c], 1.0, &[rng.gen_range(-3.0..3.0)]).unwrap();
            let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let vals: Vec<Complex64> = a.values().iter().zip(b.values()).map(|(p, q)| p + z * q).collect();
            let psi = WaveFunction::new(&g, vals, Representation::Position).unwrap().normalized().unwrap();
            let alpha = rng.gen_range(0.1..=2.0);
            let v = expectation(&psi, &local_velocity(&g, alpha).unwrap()).unwrap();
            let d = crate::grid::derivative(&psi, 0).unwrap().l2_norm().unwrap();
            let fmax = g.nodes().iter().map(|x| x.abs() / bracket1(*x).powf(1.0 + alpha / 2.0)).fold(0.0, f64::max);
            assert!(v.abs() <= sigma_alpha(alpha).unwrap() * fmax * d * (1.0 + 1e-12));
        }
    }

    #[test]
    fn velocity_apply_guards_boundary() {
        let g = make_grid(1, 128, 8.0).unwrap();
        let psi = WaveFunction::gaussian(&g, &[7.5], 0.5, &[0.0]).unwrap();
        assert!(matches!(local_velocity_apply(&psi, 1.0), Err(Error::DomainEscape { .. })));
    }

    #[test]
    fn cook_zero_potential() {
        let g = make_grid(1, 256, 16.0).unwrap();
        let phi = WaveFunction::gaussian(&g, &[0.0], 1.0, &[0.0]).unwrap();
        let rec = cook_scan(&phi, &Dynamics::Quadratic(inverted()), &PerturbationSpec::none(), &[0.0, 1.0, 2.0]).unwrap();
        assert!(rec.integrand.iter().all(|v| *v == 0.0));
        assert_eq!(rec.integral_estimate, 0.0);
    }

    #[test]
    fn cook_log_decay_is_integrable() {
        let g = make_grid(1, 1024, 40.0).unwrap();
        let phi = WaveFunction::gaussian(&g, &[0.0], 0.2, &[0.0]).unwrap();
        let times: Vec<f64> = (0..=18).map(|i| 2.0 + i as f64).collect();
        let rec = cook_scan(&phi, &Dynamics::Quadratic(inverted()), &log_w(), &times).unwrap();
        assert!(rec.integrand.iter().all(|v| *v >= 0.0));
        let p = rec.power_slope((2.0, 20.0)).unwrap();
        assert!(p <= -1.5, "slope {p}");
        assert!(rec.integral_estimate.is_finite());
        let border = PerturbationSpec::short_range(Profile::PalphaPower { amplitude: 1.0, alpha: 2.0, exponent: 1.0 }, 0.0)
            .unwrap();
        let rec = cook_scan(&phi, &Dynamics::Quadratic(inverted()), &border, &times).unwrap();
        let p = rec.power_slope((2.0, 20.0)).unwrap();
        assert!(p >= -1.1, "borderline slope {p}");
    }

    #[test]
    fn cook_grid_matches_far_field() {
        // Short-time agreement of the two integrand evaluations for α = 2.
        let g = make_grid(1, 1024, 40.0).unwrap();
        let phi = WaveFunction::gaussian(&g, &[0.0], 1.0, &[0.0]).unwrap();
        let spec = inverted();
        let cfg = EvolutionConfig::quadratic(&g, &spec, &PerturbationSpec::none(), 1e-3).unwrap();
        let times = [0.5, 1.0];
        let a = cook_scan(&phi, &Dynamics::Quadratic(spec), &log_w(), &times).unwrap();
        let b = cook_scan(&phi, &Dynamics::Grid(cfg), &log_w(), &times).unwrap();
        for (x, y) in a.integrand.iter().zip(&b.integrand) {
            assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
    }

    #[test]
    fn cook_grid_truncates_on_escape() {
        let g = make_grid(1, 256, 10.0).unwrap();
        let phi = WaveFunction::gaussian(&g, &[0.0], 1.0, &[0.0]).unwrap();
        let cfg = EvolutionConfig::repulsive(&g, &RepulsiveSpec::regularized(1.0).unwrap(), &PerturbationSpec::none(), 1e-3)
            .unwrap();
        let rec = cook_scan(&phi, &Dynamics::Grid(cfg), &log_w(), &[0.0, 1.0, 20.0]).unwrap();
        assert_eq!(rec.truncated_at, Some(20.0));
        assert_eq!(rec.times, vec![0.0, 1.0]);
    }

    #[test]
    fn stark_coupling_decays_like_t_minus_two() {
        let g = make_grid(1, 256, 24.0).unwrap();
        let phi = WaveFunction::gaussian(&g, &[0.0], 2.0, &[0.0]).unwrap();
        let spec = QuadraticSpec::stark(vec![1.0]).unwrap();
        let v = PerturbationSpec::product(1.0, vec![DecayFactor::Stark { beta: 2.0 }]).unwrap();
        let times: Vec<f64> = (0..=35).map(|i| 5.0 + i as f64).collect();
        let rec = cook_scan(&phi, &Dynamics::Quadratic(spec), &v, &times).unwrap();
        let p = rec.power_slope((5.0, 40.0)).unwrap();
        assert!((p + 2.0).abs() <= 0.2, "slope {p}");
    }

    fn interaction(step: f64) -> WaveOperatorMethod {
        WaveOperatorMethod::Interaction {
            spec: inverted(),
            perturbation: log_w(),
            dt: 4.5e-5,
            switch_time: 0.5,
            step,
        }
    }

    fn packet_grid() -> Grid {
        make_grid(1, 16384, 256.0).unwrap()
    }

    #[test]
    fn wave_operator_trivial_cases() {
        let g = packet_grid();
        let phi = WaveFunction::gaussian(&g, &[0.0], 0.2, &[0.0]).unwrap();
        assert_eq!(wave_operator(&phi, 0.0, &interaction(0.01)).unwrap().values(), phi.values());
        let none = WaveOperatorMethod::Interaction {
            spec: inverted(),
            perturbation: PerturbationSpec::none(),
            dt: 1e-3,
            switch_time: 0.5,
            step: 0.01,
        };
        assert_eq!(wave_operator(&phi, 3.0, &none).unwrap().values(), phi.values());
        let g = make_grid(1, 256, 16.0).unwrap();
        let phi = WaveFunction::gaussian(&g, &[0.0], 1.0, &[0.0]).unwrap();
        let spec = RepulsiveSpec::regularized(1.0).unwrap();
        let h0 = EvolutionConfig::repulsive(&g, &spec, &PerturbationSpec::none(), 1e-3).unwrap();
        let m = WaveOperatorMethod::Grid { h0: h0.clone(), h: h0 };
        assert!(wave_operator(&phi, 1.0, &m).unwrap().distance(&phi).unwrap() < 1e-12);
    }

    #[test]
    fn wave_operator_converges_with_cook_bound() {
        // Boosted so that |φ̂(0)|² ~ e^{-64}: mass with asymptotic momentum near 0
        // lingers at the origin and would fill the whole frame box.
        let g = packet_grid();
        let phi = WaveFunction::gaussian(&g, &[0.0], 1.0, &[8.0]).unwrap();
        let m = interaction(0.01);
        let ts = [2.0, 4.0, 6.0, 8.0];
        let omegas: Vec<WaveFunction> = ts.iter().map(|&t| wave_operator(&phi, t, &m).unwrap()).collect();
        for o in &omegas {
            assert!((o.l2_norm().unwrap() - 1.0).abs() <= 1e-8);
        }
        let sched: Vec<f64> = (0..=60).map(|i| 2.0 + 0.1 * i as f64).collect();
        let rec = cook_scan(&phi, &Dynamics::Quadratic(inverted()), &log_w(), &sched).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..3 {
            let d = omegas[k + 1].distance(&omegas[k]).unwrap();
            let (bound, err) = rec.integral_between(ts[k], ts[k + 1]).unwrap();
            assert!(d <= bound + err, "[{}, {}]: {d} > {bound}", ts[k], ts[k + 1]);
            assert!(d < prev + 1e-8);
            prev = d;
        }
    }

    #[test]
    fn wave_operator_grid_matches_interaction_picture() {
        let g = packet_grid();
        let phi = WaveFunction::gaussian(&g, &[0.0], 0.2, &[0.0]).unwrap();
        let spec = inverted();
        let h0 = EvolutionConfig::quadratic(&g, &spec, &PerturbationSpec::none(), 4.5e-5).unwrap();
        let h = EvolutionConfig::quadratic(&g, &spec, &log_w(), 4.5e-5).unwrap();
        let a = wave_operator(&phi, 1.0, &WaveOperatorMethod::Grid { h0, h }).unwrap();
        let b = wave_operator(&phi, 1.0, &interaction(0.005)).unwrap();
        assert!(a.distance(&b).unwrap() < 1e-4, "{}", a.distance(&b).unwrap());
    }

    #[test]
    fn histograms_are_normalized() {
        let g = make_grid(1, 256, 8.0).unwrap();
        let psi = WaveFunction::gaussian(&g, &[0.0], 1.0, &[0.0]).unwrap();
        let tr = velocity_trace(&psi, &Dynamics::Quadratic(inverted()), 2.0, &[1.0, 3.0, 5.0], &VelocityOptions::default())
            .unwrap();
        for h in &tr.histograms {
            assert!((h.total() - 1.0).abs() <= 1e-10);
        }
        assert_eq!(tr.histogram_rows().len(), 3 * tr.histograms[0].masses.len());
    }

    #[test]
    fn alpha_two_velocity_and_masses() {
        let g = make_grid(1, 256, 8.0).unwrap();
        let psi = WaveFunction::gaussian(&g, &[0.0], 1.0, &[0.0]).unwrap();
        let times = [2.0, 4.0, 6.0, 8.0, 10.0];
        let tr = velocity_trace(&psi, &Dynamics::Quadratic(inverted()), 2.0, &times, &VelocityOptions::default()).unwrap();
        let last = *tr.mean.last().unwrap();
        assert!((last - 2.0).abs() <= 0.2, "{last}");
        let gaps: Vec<f64> = tr.mean.iter().map(|m| (m - 2.0).abs()).collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{:?}", tr.mean);
        let m = minimal_maximal_velocity_mass(&tr, 1.0, (3.0, 4.0)).unwrap();
        assert!(m.mass_below.windows(2).all(|w| w[1] <= w[0]));
        assert!(*m.mass_below.last().unwrap() <= 0.05);
        assert!(*m.mass_in_window.last().unwrap() <= 0.05);
        assert!(minimal_maximal_velocity_mass(&tr, 2.5, (3.0, 4.0)).is_err());
    }

    #[test]
    fn confining_sector_has_zero_velocity() {
        let g = make_grid(1, 256, 10.0).unwrap();
        let ground = WaveFunction::gaussian(&g, &[0.0], 1.0, &[0.0]).unwrap();
        let spec = QuadraticSpec::new(1, 0, 1, vec![1.0], vec![]).unwrap();
        let times = [1.3, 5.1, 10.3, 20.2];
        let tr = velocity_trace(&ground, &Dynamics::Quadratic(spec), 2.0, &times, &VelocityOptions::default()).unwrap();
        let m = minimal_maximal_velocity_mass(&tr, 1.0, (3.0, 4.0)).unwrap();
        assert!(m.mass_below.windows(2).all(|w| w[1] >= w[0]));
        // |ψ|² = e^{-x²}/√π is stationary: below θ = 1 means |x| < r = √(e^{2t} - 1).
        // The lattice sum differs from the integral by at most the two cells at ±r.
        let dx = g.spacing();
        for (&t, &mb) in times.iter().zip(&m.mass_below) {
            let r = ((2.0 * t).exp() - 1.0).sqrt();
            let exact = 1.0 - libm::erfc(r);
            let cell = 2.0 * dx * (-(r - dx) * (r - dx)).exp() / std::f64::consts::PI.sqrt();
            assert!((mb - exact).abs() <= cell.max(1e-9), "t={t}: {mb} vs {exact}");
        }
        assert!((m.mass_below.last().unwrap() - 1.0).abs() < 1e-9);
        assert!(tr.mean.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn per_direction_rates() {
        let g = make_grid(2, 128, 8.0).unwrap();
        let psi = WaveFunction::gaussian(&g, &[0.0, 0.0], 1.0, &[0.0, 0.0]).unwrap();
        let spec = QuadraticSpec::inverted(vec![1.0, 2.0]).unwrap();
        let opts = VelocityOptions { per_direction: true, hist_max: 10.0, ..Default::default() };
        let tr = velocity_trace(&psi, &Dynamics::Quadratic(spec), 2.0, &[10.0], &opts).unwrap();
        let dirs = tr.per_direction.unwrap();
        assert!((dirs[0][0] / 2.0 - 1.0).abs() <= 0.1, "{}", dirs[0][0]);
        assert!((dirs[1][0] / 4.0 - 1.0).abs() <= 0.1, "{}", dirs[1][0]);
        assert!((tr.global_log.unwrap()[0] / 4.0 - 1.0).abs() <= 0.1);
    }

    #[test]
    fn alpha_one_velocity_extrapolates() {
        let g = make_grid(1, 4096, 160.0).unwrap();
        let psi = WaveFunction::gaussian(&g, &[0.0], 1.0, &[0.0]).unwrap();
        let spec = RepulsiveSpec::regularized(1.0).unwrap();
        let cfg = EvolutionConfig::repulsive(&g, &spec, &PerturbationSpec::none(), 2e-3).unwrap();
        let times = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let tr = velocity_trace(&psi, &Dynamics::Grid(cfg), 1.0, &times, &VelocityOptions::default()).unwrap();
        let r = tr.richardson(4.0, 8.0).unwrap();
        assert!((r - 1.0).abs() <= 0.15, "{r}");
        for h in &tr.histograms {
            assert!((h.total() - 1.0).abs() <= 1e-10);
        }
        assert!(tr.truncated_at.is_none());
    }
}
