//! Classical flow of `h(x, ξ) = |ξ|² - ⟨x⟩^α`, i.e. `ẋ = 2ξ`, `ξ̇ = α x ⟨x⟩^{α-2}`.

use rayon::prelude::*;

use crate::error::{config, Error, Result};
use crate::fit::{linear_fit, loglog_slope};
use crate::potentials::{check_alpha, p_alpha, RepulsiveSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, xi: Vec<f64>) -> Result<Self> {
        if x.len() != xi.len() || x.is_empty() {
            return Err(config("position and momentum need the same nonzero dimension"));
        }
        if x.iter().chain(&xi).any(|v| !v.is_finite()) {
            return Err(Error::NumericalState("non-finite phase point".into()));
        }
        Ok(PhasePoint { x, xi })
    }

    pub fn one_d(x: f64, xi: f64) -> Result<Self> {
        Self::new(vec![x], vec![xi])
    }

    pub fn dims(&self) -> usize {
        self.x.len()
    }

    pub fn radius(&self) -> f64 {
        self.x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.xi).all(|v| v.is_finite())
    }
}

/// `h = |ξ|² + U(x)`.
pub fn energy(p: &PhasePoint, spec: &RepulsiveSpec) -> f64 {
    p.xi.iter().map(|v| v * v).sum::<f64>() + spec.potential(&p.x)
}

/// Scale of the individual energy terms, used to normalize drift.
fn energy_scale(p: &PhasePoint, spec: &RepulsiveSpec) -> f64 {
    p.xi.iter().map(|v| v * v).sum::<f64>() + spec.potential(&p.x).abs()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<PhasePoint>,
    pub energies: Vec<f64>,
    pub energy0: f64,
    /// Integration stopped early because the state overflowed.
    pub truncated: bool,
    pub dt: f64,
}

impl Trajectory {
    /// `max |h(t) - h₀| / max(1 + |h₀|, |ξ|² + ⟨x⟩^α)` over the recorded points.
    pub fn energy_drift(&self, spec: &RepulsiveSpec) -> f64 {
        self.points
            .iter()
            .zip(&self.energies)
            .map(|(p, e)| {
                let scale = (1.0 + self.energy0.abs()).max(energy_scale(p, spec));
                (e - self.energy0).abs() / scale
            })
            .fold(0.0, f64::max)
    }

    pub fn last(&self) -> &PhasePoint {
        self.points.last().expect("trajectory holds the start point")
    }

    fn window(&self, window: (f64, f64)) -> Result<(Vec<f64>, Vec<f64>)> {
        let (t0, t1) = window;
        if !(t1 > t0) {
            return Err(config("fit window must satisfy t0 < t1"));
        }
        let (mut ts, mut rs) = (Vec::new(), Vec::new());
        for (t, p) in self.times.iter().zip(&self.points) {
            if *t >= t0 && *t <= t1 {
                ts.push(*t);
                rs.push(p.radius());
            }
        }
        if ts.len() < 2 {
            return Err(Error::Fit(format!(
                "fewer than two samples in the window [{t0}, {t1}]"
            )));
        }
        Ok((ts, rs))
    }

    fn escaping(ts: &[f64], rs: &[f64]) -> Result<()> {
        let (r0, r1) = (rs[0], rs[rs.len() - 1]);
        if !(r1 > r0) || rs.windows(2).any(|w| w[1] < w[0]) || r0 == 0.0 {
            return Err(Error::NoEscape(format!(
                "|x| is not increasing on [{}, {}] ({r0:e} -> {r1:e})",
                ts[0],
                ts[ts.len() - 1]
            )));
        }
        Ok(())
    }

    /// Slope of `ln|x|` against `ln t` over the window (expected `2/(2-α)`).
    pub fn escape_exponent(&self, window: (f64, f64)) -> Result<f64> {
        let (ts, rs) = self.window(window)?;
        if ts[0] <= 0.0 {
            return Err(config("power-law fit window must start at t > 0"));
        }
        Self::escaping(&ts, &rs)?;
        loglog_slope(&ts, &rs)
    }

    /// Slope of `ln|x|` against `t` over the window (exponential growth rate).
    pub fn log_growth_rate(&self, window: (f64, f64)) -> Result<f64> {
        let (ts, rs) = self.window(window)?;
        Self::escaping(&ts, &rs)?;
        let lr: Vec<f64> = rs.iter().map(|r| r.ln()).collect();
        Ok(linear_fit(&ts, &lr)?.0)
    }

    /// Slope of `p_α(x(t))` against `t` over the window (expected `σ_α`).
    pub fn speed(&self, alpha: f64, window: (f64, f64)) -> Result<f64> {
        check_alpha(alpha)?;
        let (t0, t1) = window;
        let mut ts = Vec::new();
        let mut ps = Vec::new();
        for (t, p) in self.times.iter().zip(&self.points) {
            if *t >= t0 && *t <= t1 {
                ts.push(*t);
                ps.push(p_alpha(&p.x, alpha)?);
            }
        }
        Ok(linear_fit(&ts, &ps)?.0)
    }

    pub fn csv_header(&self) -> Vec<String> {
        let d = self.points[0].dims();
        let mut h = vec!["t".to_string()];
        h.extend((0..d).map(|k| format!("x{k}")));
        h.extend((0..d).map(|k| format!("xi{k}")));
        h.push("energy".into());
        h
    }

    pub fn csv_rows(&self) -> Vec<Vec<f64>> {
        self.times
            .iter()
            .zip(&self.points)
            .zip(&self.energies)
            .map(|((t, p), e)| {
                let mut row = vec![*t];
                row.extend(&p.x);
                row.extend(&p.xi);
                row.push(*e);
                row
            })
            .collect()
    }
}

/// Above this radius the flow is stopped and the trajectory flagged.
pub const OVERFLOW_RADIUS: f64 = 1e150;

/// Leapfrog (kick-drift-kick) integration, recording every step.
pub fn flow(start: &PhasePoint, spec: &RepulsiveSpec, t_final: f64, dt: f64) -> Result<Trajectory> {
    flow_sampled(start, spec, t_final, dt, 1)
}

/// As [`flow`], recording every `record_every`-th step and the final point.
pub fn flow_sampled(
    start: &PhasePoint,
    spec: &RepulsiveSpec,
    t_final: f64,
    dt: f64,
    record_every: usize,
) -> Result<Trajectory> {
    check_alpha(spec.alpha)?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(config(format!("time step must be positive, got {dt}")));
    }
    if !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(config("final time must be finite and nonnegative"));
    }
    if !start.is_finite() || start.x.len() != start.xi.len() {
        return Err(Error::NumericalState("invalid start point".into()));
    }
    let every = record_every.max(1);
    let steps = (t_final / dt).round() as usize;
    let h = t_final / steps.max(1) as f64;
    let mut p = start.clone();
    let e0 = energy(&p, spec);
    let mut traj = Trajectory {
        times: vec![0.0],
        points: vec![p.clone()],
        energies: vec![e0],
        energy0: e0,
        truncated: false,
        dt: h,
    };
    if steps == 0 {
        return Ok(traj);
    }
    let mut force = spec.gradient(&p.x);
    for step in 1..=steps {
        for (xi, f) in p.xi.iter_mut().zip(&force) {
            *xi -= 0.5 * h * f;
        }
        for (x, xi) in p.x.iter_mut().zip(&p.xi) {
            *x += 2.0 * h * xi;
        }
        force = spec.gradient(&p.x);
        for (xi, f) in p.xi.iter_mut().zip(&force) {
            *xi -= 0.5 * h * f;
        }
        if !p.is_finite() || p.radius() > OVERFLOW_RADIUS {
            traj.truncated = true;
            break;
        }
        if step % every == 0 || step == steps {
            traj.times.push(step as f64 * h);
            traj.energies.push(energy(&p, spec));
            traj.points.push(p.clone());
        }
    }
    Ok(traj)
}

/// Independent trajectories integrated concurrently.
pub fn flow_ensemble(
    starts: &[PhasePoint],
    spec: &RepulsiveSpec,
    t_final: f64,
    dt: f64,
    record_every: usize,
) -> Result<Vec<Trajectory>> {
    starts
        .par_iter()
        .map(|s| flow_sampled(s, spec, t_final, dt, record_every))
        .collect()
}

/// Exact flow of `h = |ξ|² - |x|²` (per coordinate):
/// `x(t) = ½(x₀+ξ₀)e^{2t} + ½(x₀-ξ₀)e^{-2t}`, `ξ = ẋ/2`.
pub fn quadratic_closed_form(start: &PhasePoint, t: f64) -> PhasePoint {
    let (ep, em) = ((2.0 * t).exp(), (-2.0 * t).exp());
    let (x, xi) = start
        .x
        .iter()
        .zip(&start.xi)
        .map(|(&x0, &k0)| {
            let (a, b) = (0.5 * (x0 + k0), 0.5 * (x0 - k0));
            (a * ep + b * em, a * ep - b * em)
        })
        .unzip();
    PhasePoint { x, xi }
}

/// Start on the zero-energy shell of `-⟨x⟩^α`, moving outward.
pub fn zero_energy_start(x0: f64, alpha: f64) -> Result<PhasePoint> {
    check_alpha(alpha)?;
    PhasePoint::one_d(x0, x0.signum() * (1.0 + x0 * x0).powf(alpha / 4.0))
}
