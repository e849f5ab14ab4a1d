//! Strang split-step propagation for `H = -Δ + U(x) + V(x)` on a periodic
//! lattice, and a dense-matrix oracle for small 1-D grids.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{config, Error, Result};
use crate::fit::loglog_slope;
use crate::grid::{BoundaryGuard, Grid, Representation, WaveFunction};
use crate::potentials::{check_alpha, sigma_alpha, PerturbationSpec, QuadraticSpec, RepulsiveSpec};

/// Lattice Hamiltonian data and the time step.
#[derive(Debug, Clone)]
pub struct EvolutionConfig {
    grid: Grid,
    dt: f64,
    potential: Vec<f64>,
    kinetic: Vec<f64>,
    pub boundary: BoundaryGuard,
    /// Steps between boundary-mass checks.
    pub guard_interval: usize,
}

impl EvolutionConfig {
    /// Arbitrary real potential samples.
    pub fn new(grid: &Grid, potential: Vec<f64>, dt: f64) -> Result<Self> {
        if potential.len() != grid.len() {
            return Err(config(format!(
                "potential has {} samples, grid has {}",
                potential.len(),
                grid.len()
            )));
        }
        if potential.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalState("non-finite potential sample".into()));
        }
        let cfg = EvolutionConfig {
            grid: grid.clone(),
            dt: 0.0,
            potential,
            kinetic: grid.kinetic_symbol(),
            boundary: BoundaryGuard::default(),
            guard_interval: 10,
        };
        cfg.with_dt(dt)
    }

    /// `-⟨x⟩^α + V` (or `-|x|^α + V`).
    pub fn repulsive(grid: &Grid, spec: &RepulsiveSpec, v: &PerturbationSpec, dt: f64) -> Result<Self> {
        check_alpha(spec.alpha)?;
        v.validate()?;
        let pert = v.sample(grid)?;
        let pot = grid
            .sample(|x| spec.potential(x))
            .into_iter()
            .zip(pert)
            .map(|(a, b)| a + b)
            .collect();
        Self::new(grid, pot, dt)
    }

    /// Quadratic `U` plus `V`.
    pub fn quadratic(grid: &Grid, spec: &QuadraticSpec, v: &PerturbationSpec, dt: f64) -> Result<Self> {
        spec.validate()?;
        if spec.dims != grid.dims() {
            return Err(config("quadratic spec and grid dimensions differ"));
        }
        v.validate()?;
        let pert = v.sample(grid)?;
        let pot = grid
            .sample(|x| spec.potential(x))
            .into_iter()
            .zip(pert)
            .map(|(a, b)| a + b)
            .collect();
        Self::new(grid, pot, dt)
    }

    /// Same Hamiltonian, new step. Fails when `dt·max|V| > π`.
    pub fn with_dt(&self, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(config(format!("time step must be positive, got {dt}")));
        }
        let winding = dt * self.max_potential();
        if winding > PI {
            return Err(Error::PhaseWinding { winding });
        }
        let mut out = self.clone();
        out.dt = dt;
        Ok(out)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn kinetic(&self) -> &[f64] {
        &self.kinetic
    }

    pub fn max_potential(&self) -> f64 {
        self.potential.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Guard and conservation record of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Telemetry {
    pub steps: usize,
    pub max_boundary_mass: f64,
    /// `|‖ψ(t)‖ - ‖ψ₀‖| / ‖ψ₀‖`.
    pub norm_drift: f64,
}

fn phases(values: &[f64], scale: f64) -> Vec<Complex64> {
    values
        .iter()
        .map(|v| Complex64::from_polar(1.0, -scale * v))
        .collect()
}

struct Stepper<'a> {
    cfg: &'a EvolutionConfig,
    half_v: Vec<Complex64>,
    full_v: Vec<Complex64>,
    kin: Vec<Complex64>,
}

impl<'a> Stepper<'a> {
    fn new(cfg: &'a EvolutionConfig, dt: f64) -> Self {
        let norm = 1.0 / cfg.grid.len() as f64;
        let kin = phases(&cfg.kinetic, dt).into_iter().map(|p| p * norm).collect();
        Stepper {
            cfg,
            half_v: phases(&cfg.potential, 0.5 * dt),
            full_v: phases(&cfg.potential, dt),
            kin,
        }
    }

    fn kinetic(&self, data: &mut [Complex64]) {
        // the (-1)^m and scale factors of the lattice transform cancel around a multiplier
        self.cfg.grid.fft_all(data, true);
        data.iter_mut().zip(&self.kin).for_each(|(v, k)| *v *= k);
        self.cfg.grid.fft_all(data, false);
    }

    fn mul(data: &mut [Complex64], by: &[Complex64]) {
        data.iter_mut().zip(by).for_each(|(v, p)| *v *= p);
    }

    /// `k` consecutive Strang steps with the inner half steps merged.
    fn run(&self, data: &mut [Complex64], k: usize) {
        if k == 0 {
            return;
        }
        Self::mul(data, &self.half_v);
        for i in 0..k {
            self.kinetic(data);
            Self::mul(data, if i + 1 == k { &self.half_v } else { &self.full_v });
        }
    }
}

/// One Strang step `e^{-i dt V/2} F⁻¹ e^{-i dt ξ²} F e^{-i dt V/2}`.
pub fn strang_step(psi: &WaveFunction, cfg: &EvolutionConfig) -> Result<WaveFunction> {
    let psi = checked_input(psi, cfg)?;
    let mut data = psi.into_values();
    Stepper::new(cfg, cfg.dt).run(&mut data, 1);
    let out = WaveFunction::new(&cfg.grid, data, Representation::Position)?;
    cfg.boundary.check(&out, cfg.dt)?;
    Ok(out)
}

fn checked_input(psi: &WaveFunction, cfg: &EvolutionConfig) -> Result<WaveFunction> {
    if psi.grid() != &cfg.grid {
        return Err(config("state and evolution config live on different grids"));
    }
    let psi = psi.to_position()?;
    psi.check_finite()?;
    Ok(psi)
}

/// `e^{-itH}ψ₀`; negative `t` evolves the conjugate state forward.
pub fn propagate(psi0: &WaveFunction, t: f64, cfg: &EvolutionConfig) -> Result<WaveFunction> {
    Ok(propagate_with_telemetry(psi0, t, cfg)?.0)
}

pub fn propagate_with_telemetry(
    psi0: &WaveFunction,
    t: f64,
    cfg: &EvolutionConfig,
) -> Result<(WaveFunction, Telemetry)> {
    if !t.is_finite() {
        return Err(config("propagation time must be finite"));
    }
    if t < 0.0 {
        let (out, tel) = propagate_with_telemetry(&psi0.clone().conj(), -t, cfg)?;
        return Ok((out.conj(), tel));
    }
    let psi = checked_input(psi0, cfg)?;
    let norm0 = psi.l2_norm()?;
    let mut max_edge = cfg.boundary.check(&psi, 0.0)?;
    let ratio = t / cfg.dt;
    let (steps, rem) = if (ratio - ratio.round()).abs() <= 1e-9 * ratio.max(1.0) {
        (ratio.round() as usize, 0.0)
    } else {
        let n = ratio.floor();
        (n as usize, t - n * cfg.dt)
    };
    let stepper = Stepper::new(cfg, cfg.dt);
    let mut data = psi.into_values();
    let chunk = cfg.guard_interval.max(1);
    let mut done = 0;
    while done < steps {
        let k = chunk.min(steps - done);
        stepper.run(&mut data, k);
        done += k;
        let state = WaveFunction::new(&cfg.grid, data, Representation::Position)?;
        max_edge = max_edge.max(cfg.boundary.check(&state, done as f64 * cfg.dt)?);
        data = state.into_values();
    }
    if rem > 0.0 {
        Stepper::new(cfg, rem).run(&mut data, 1);
    }
    let out = WaveFunction::new(&cfg.grid, data, Representation::Position)?;
    max_edge = max_edge.max(cfg.boundary.check(&out, t)?);
    let norm = out.l2_norm()?;
    let tel = Telemetry {
        steps: steps + usize::from(rem > 0.0),
        max_boundary_mass: max_edge,
        norm_drift: if norm0 > 0.0 { (norm - norm0).abs() / norm0 } else { 0.0 },
    };
    Ok((out, tel))
}

/// `⟨ψ, Hψ⟩ / ‖ψ‖²` with the lattice kinetic and potential.
pub fn energy(psi: &WaveFunction, cfg: &EvolutionConfig) -> Result<f64> {
    let psi = checked_input(psi, cfg)?;
    let norm2 = psi.l2_norm()?.powi(2);
    let pot: f64 = psi
        .density()
        .iter()
        .zip(&cfg.potential)
        .map(|(r, v)| r * v)
        .sum::<f64>()
        * cfg.grid.cell_volume();
    let mom = psi.to_momentum()?;
    let kin: f64 = mom
        .density()
        .iter()
        .zip(&cfg.kinetic)
        .map(|(r, k)| r * k)
        .sum::<f64>()
        * cfg.grid.freq_cell_volume();
    Ok((kin + pot) / norm2)
}

/// Largest 1-D grid accepted by the dense oracle.
pub const DENSE_MAX_POINTS: usize = 128;

/// The lattice Hamiltonian as a dense Hermitian matrix (1-D, ≤ 128 points).
pub fn dense_hamiltonian(cfg: &EvolutionConfig) -> Result<DMatrix<Complex64>> {
    let grid = &cfg.grid;
    let n = grid.points_per_dim();
    if grid.dims() != 1 || n > DENSE_MAX_POINTS {
        return Err(Error::OracleScale(format!(
            "dense oracle supports 1-D grids with at most {DENSE_MAX_POINTS} points"
        )));
    }
    let xs = grid.nodes();
    let ks = grid.freq_nodes();
    let mut h = DMatrix::<Complex64>::from_fn(n, n, |j, l| {
        let d = xs[j] - xs[l];
        ks.iter()
            .map(|&k| Complex64::from_polar(k * k, k * d))
            .sum::<Complex64>()
            / n as f64
    });
    for (j, v) in cfg.potential.iter().enumerate() {
        h[(j, j)] += v;
    }
    Ok(h)
}

/// Largest entry of `H - H^*` relative to the largest entry of `H`.
pub fn hermiticity_defect(h: &DMatrix<Complex64>) -> f64 {
    let scale = h.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let defect = (h - h.adjoint()).iter().fold(0.0f64, |m, v| m.max(v.norm()));
    if scale > 0.0 {
        defect / scale
    } else {
        defect
    }
}

/// Exact exponential of the dense lattice Hamiltonian applied to `ψ₀`.
pub fn dense_oracle(psi0: &WaveFunction, t: f64, cfg: &EvolutionConfig) -> Result<WaveFunction> {
    let psi = checked_input(psi0, cfg)?;
    let h = dense_hamiltonian(cfg)?;
    let defect = hermiticity_defect(&h);
    if defect > 1e-12 {
        return Err(Error::NumericalState(format!(
            "assembled Hamiltonian is not Hermitian (defect {defect:e})"
        )));
    }
    if t == 0.0 {
        return Ok(psi);
    }
    let eig = h.symmetric_eigen();
    let v = nalgebra::DVector::from_column_slice(psi.values());
    let mut coeff = eig.eigenvectors.adjoint() * v;
    for (c, &lambda) in coeff.iter_mut().zip(eig.eigenvalues.iter()) {
        *c *= Complex64::from_polar(1.0, -t * lambda);
    }
    let out = &eig.eigenvectors * coeff;
    WaveFunction::new(&cfg.grid, out.as_slice().to_vec(), Representation::Position)
}

/// Errors at or below this level are treated as round-off.
pub const ERROR_FLOOR: f64 = 1e-12;

/// What the split-step runs were compared with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference {
    DenseOracle,
    /// A split-step run with this much smaller step.
    SelfConvergence { dt: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub dts: Vec<f64>,
    pub errors: Vec<f64>,
    /// `None` when fewer than two errors lie above the floor.
    pub slope: Option<f64>,
    /// Some errors hit the floor and were dropped from the fit.
    pub saturated: bool,
    pub fitted: usize,
    pub reference: Reference,
}

/// Log-log slope of the split-step error against `dt` over a geometric sequence.
pub fn convergence_order(
    psi0: &WaveFunction,
    t: f64,
    cfg: &EvolutionConfig,
    dts: &[f64],
) -> Result<ConvergenceReport> {
    if dts.len() < 4 {
        return Err(config("convergence fit needs at least four time steps"));
    }
    let ratio = dts[1] / dts[0];
    if dts
        .windows(2)
        .any(|w| !(w[0] > 0.0) || ((w[1] / w[0]) / ratio - 1.0).abs() > 1e-6)
        || ratio == 1.0
    {
        return Err(config("time-step sequence must be geometric"));
    }
    let grid = &cfg.grid;
    let (reference, exact) = if grid.dims() == 1 && grid.points_per_dim() <= DENSE_MAX_POINTS {
        (Reference::DenseOracle, dense_oracle(psi0, t, cfg)?)
    } else {
        let dmin = dts.iter().cloned().fold(f64::INFINITY, f64::min);
        let dt = dmin / 16.0;
        (Reference::SelfConvergence { dt }, propagate(psi0, t, &cfg.with_dt(dt)?)?)
    };
    let mut errors = Vec::with_capacity(dts.len());
    for &dt in dts {
        let out = propagate(psi0, t, &cfg.with_dt(dt)?)?;
        errors.push(out.distance(&exact)?);
    }
    let keep: Vec<(f64, f64)> = dts
        .iter()
        .zip(&errors)
        .filter(|(_, e)| **e > ERROR_FLOOR)
        .map(|(d, e)| (*d, *e))
        .collect();
    let saturated = keep.len() < dts.len();
    let slope = if keep.len() >= 2 {
        let (x, y): (Vec<f64>, Vec<f64>) = keep.iter().cloned().unzip();
        Some(loglog_slope(&x, &y)?)
    } else {
        None
    };
    Ok(ConvergenceReport {
        dts: dts.to_vec(),
        errors,
        slope,
        saturated,
        fitted: keep.len(),
        reference,
    })
}

/// Half width of a box holding the classical envelope up to `t_max` with a
/// 1.5 safety factor: `(σ_α t)^{2/(2-α)}` for α < 2, `e^{2t}` growth for α = 2.
pub fn suggest_half_width(alpha: f64, t_max: f64, radius: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(t_max >= 0.0) || !(radius > 0.0) {
        return Err(config("need t_max >= 0 and a positive initial radius"));
    }
    let envelope = if alpha == 2.0 {
        radius * (2.0 * t_max).exp()
    } else {
        radius + (sigma_alpha(alpha)? * t_max).powf(2.0 / (2.0 - alpha))
    };
    Ok(1.5 * envelope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::mehler::propagate_factored;
    use crate::potentials::{Profile, RepulsiveSpec};
    use proptest::prelude::*;

    fn repulsive(grid: &Grid, alpha: f64, dt: f64) -> EvolutionConfig {
        EvolutionConfig::repulsive(
            grid,
            &RepulsiveSpec::regularized(alpha).unwrap(),
            &PerturbationSpec::none(),
            dt,
        )
        .unwrap()
    }

    #[test]
    fn zero_step_and_free_are_exact() {
        let grid = make_grid(1, 128, 15.0).unwrap();
        let psi = WaveFunction::gaussian(&grid, &[0.0], 1.0, &[1.0]).unwrap();
        let free = EvolutionConfig::new(&grid, vec![0.0; 128], 0.05).unwrap();
        assert_eq!(propagate(&psi, 0.0, &free).unwrap().values(), psi.values());
        // one multiplier e^{-itξ²}
        let out = propagate(&psi, 0.5, &free).unwrap();
        let mut spec = psi.to_momentum().unwrap();
        for (v, &k) in spec.values_mut().iter_mut().zip(grid.freq_nodes()) {
            *v *= Complex64::from_polar(1.0, -0.5 * k * k);
        }
        assert!(out.distance(&spec.to_position().unwrap()).unwrap() < 1e-13);
    }

    #[test]
    fn dense_oracle_properties() {
        let grid = make_grid(1, 64, 8.0).unwrap();
        let cfg = repulsive(&grid, 1.0, 1e-4);
        let h = dense_hamiltonian(&cfg).unwrap();
        assert!(hermiticity_defect(&h) < 1e-12);
        let psi = WaveFunction::gaussian(&grid, &[0.5], 1.0, &[0.0]).unwrap();
        assert_eq!(dense_oracle(&psi, 0.0, &cfg).unwrap().values(), psi.values());
        let big = make_grid(1, 256, 8.0).unwrap();
        assert!(matches!(
            dense_hamiltonian(&repulsive(&big, 1.0, 1e-4)),
            Err(Error::OracleScale(_))
        ));
    }

    #[test]
    fn split_step_matches_dense_oracle() {
        for alpha in [1.0, 2.0] {
            let grid = make_grid(1, 64, 8.0).unwrap();
            let cfg = repulsive(&grid, alpha, 1e-4);
            let psi = WaveFunction::gaussian(&grid, &[0.5], 1.0, &[0.3]).unwrap();
            let a = propagate(&psi, 0.1, &cfg).unwrap();
            let b = dense_oracle(&psi, 0.1, &cfg).unwrap();
            let err = a.distance(&b).unwrap();
            assert!(err <= 1e-6, "alpha {alpha}: {err}");
        }
    }

    #[test]
    fn strang_order_is_two() {
        let grid = make_grid(1, 64, 8.0).unwrap();
        let cfg = repulsive(&grid, 1.0, 1e-3);
        let psi = WaveFunction::gaussian(&grid, &[0.5], 1.0, &[0.0]).unwrap();
        let dts = [0.02, 0.01, 0.005, 0.0025];
        let rep = convergence_order(&psi, 0.2, &cfg, &dts).unwrap();
        let s = rep.slope.unwrap();
        assert!((s - 2.0).abs() <= 0.1, "slope {s} errors {:?}", rep.errors);
        assert_eq!(rep.reference, Reference::DenseOracle);
    }

    #[test]
    fn strang_order_with_bump() {
        let grid = make_grid(1, 64, 8.0).unwrap();
        let v = PerturbationSpec::compact(
            Profile::CompactBump {
                height: 1.0,
                radius: 1.0,
            },
            1.0,
        )
        .unwrap();
        let cfg =
            EvolutionConfig::repulsive(&grid, &RepulsiveSpec::regularized(2.0).unwrap(), &v, 1e-3).unwrap();
        let psi = WaveFunction::gaussian(&grid, &[0.5], 1.0, &[0.0]).unwrap();
        let rep = convergence_order(&psi, 0.2, &cfg, &[0.02, 0.01, 0.005, 0.0025]).unwrap();
        let s = rep.slope.unwrap();
        assert!((s - 2.0).abs() <= 0.1, "slope {s}");
    }

    #[test]
    fn free_evolution_saturates() {
        let grid = make_grid(1, 64, 8.0).unwrap();
        let cfg = EvolutionConfig::new(&grid, vec![0.0; 64], 1e-3).unwrap();
        let psi = WaveFunction::gaussian(&grid, &[0.5], 1.0, &[0.0]).unwrap();
        let rep = convergence_order(&psi, 0.2, &cfg, &[0.02, 0.01, 0.005, 0.0025]).unwrap();
        assert!(rep.saturated && rep.slope.is_none(), "{:?}", rep.errors);
        assert!(convergence_order(&psi, 0.2, &cfg, &[0.02, 0.01, 0.005]).is_err());
        assert!(convergence_order(&psi, 0.2, &cfg, &[0.02, 0.01, 0.004, 0.001]).is_err());
    }

    #[test]
    fn agrees_with_mehler_for_alpha_two() {
        // -⟨x⟩² = -x² - 1 differs from the inverted oscillator by the constant -1
        let grid = make_grid(1, 1024, 30.0).unwrap();
        let cfg = repulsive(&grid, 2.0, 1e-4);
        let psi = WaveFunction::gaussian(&grid, &[0.0], 1.0, &[0.0]).unwrap();
        let a = propagate(&psi, 0.5, &cfg).unwrap();
        let b = propagate_factored(&psi, 0.5, &QuadraticSpec::inverted(vec![1.0]).unwrap())
            .unwrap()
            .scaled(Complex64::from_polar(1.0, 0.5));
        let err = a.distance(&b).unwrap();
        assert!(err <= 1e-6, "error {err}");
    }

    #[test]
    fn round_trip_and_norm() {
        let grid = make_grid(1, 512, 40.0).unwrap();
        let cfg = repulsive(&grid, 1.0, 1e-3);
        let psi = WaveFunction::gaussian(&grid, &[1.0], 1.0, &[0.5]).unwrap();
        let (fwd, tel) = propagate_with_telemetry(&psi, 1.0, &cfg).unwrap();
        assert!(tel.norm_drift <= tel.steps as f64 * 1e-12);
        assert_eq!(tel.steps, 1000);
        let back = propagate(&fwd, -1.0, &cfg).unwrap();
        assert!(back.distance(&psi).unwrap() <= 1e-8);
    }

    #[test]
    fn energy_conserved_alpha_one() {
        let grid = make_grid(1, 1024, 60.0).unwrap();
        let cfg = repulsive(&grid, 1.0, 1e-3);
        let psi = WaveFunction::gaussian(&grid, &[0.0], 1.0, &[0.0]).unwrap();
        let e0 = energy(&psi, &cfg).unwrap();
        let mut state = psi;
        for _ in 0..4 {
            state = propagate(&state, 0.5, &cfg).unwrap();
            let e = energy(&state, &cfg).unwrap();
            assert!((e - e0).abs() <= 1e-6 * e0.abs(), "{e} vs {e0}");
        }
    }

    #[test]
    fn bump_changes_dynamics() {
        let grid = make_grid(1, 1024, 40.0).unwrap();
        let spec = RepulsiveSpec::regularized(2.0).unwrap();
        let bump = PerturbationSpec::compact(
            Profile::CompactBump {
                height: 1.0,
                radius: 1.0,
            },
            1.0,
        )
        .unwrap();
        let a = EvolutionConfig::repulsive(&grid, &spec, &PerturbationSpec::none(), 1e-3).unwrap();
        let b = EvolutionConfig::repulsive(&grid, &spec, &bump, 1e-3).unwrap();
        let psi = WaveFunction::gaussian(&grid, &[0.0], 1.0, &[0.0]).unwrap();
        let d = propagate(&psi, 1.0, &a)
            .unwrap()
            .distance(&propagate(&psi, 1.0, &b).unwrap())
            .unwrap();
        assert!(d > 1e-3, "difference {d}");
    }

    #[test]
    fn guards_fire() {
        let grid = make_grid(1, 256, 10.0).unwrap();
        assert!(matches!(
            EvolutionConfig::repulsive(
                &grid,
                &RepulsiveSpec::regularized(2.0).unwrap(),
                &PerturbationSpec::none(),
                0.1
            ),
            Err(Error::PhaseWinding { .. })
        ));
        let cfg = repulsive(&grid, 2.0, 1e-3);
        let psi = WaveFunction::gaussian(&grid, &[0.0], 1.0, &[0.0]).unwrap();
        assert!(matches!(propagate(&psi, 3.0, &cfg), Err(Error::DomainEscape { .. })));
    }

    #[test]
    fn half_width_helper() {
        let l = suggest_half_width(1.0, 10.0, 3.0).unwrap();
        assert!((l - 1.5 * (3.0 + 100.0)).abs() < 1e-12);
        assert!(suggest_half_width(2.5, 1.0, 1.0).is_err());
        assert!(suggest_half_width(2.0, 1.0, 1.0).unwrap() > 1.5 * 7.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn conjugation_reverses_time(c in -2.0f64..2.0, p in -1.0f64..1.0, alpha in 0.3f64..=2.0) {
            let grid = make_grid(1, 256, 20.0).unwrap();
            let cfg = repulsive(&grid, alpha, 2e-3);
            let psi = WaveFunction::gaussian(&grid, &[c], 1.0, &[p]).unwrap();
            let a = propagate(&psi.clone().conj(), 0.3, &cfg).unwrap().conj();
            let b = propagate(&psi, -0.3, &cfg).unwrap();
            prop_assert!(a.distance(&b).unwrap() < 1e-10);
            let back = propagate(&propagate(&psi, 0.3, &cfg).unwrap(), -0.3, &cfg).unwrap();
            prop_assert!(back.distance(&psi).unwrap() < 1e-10);
        }

        #[test]
        fn step_preserves_norm(c in -2.0f64..2.0, alpha in 0.3f64..=2.0) {
            let grid = make_grid(1, 256, 20.0).unwrap();
            let cfg = repulsive(&grid, alpha, 1e-3);
            let psi = WaveFunction::gaussian(&grid, &[c], 1.0, &[0.0]).unwrap();
            let out = strang_step(&psi, &cfg).unwrap();
            prop_assert!((out.l2_norm().unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
