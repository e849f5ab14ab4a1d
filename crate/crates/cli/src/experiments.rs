//! One runner per experiment kind. Each fills a [`Summary`] and writes its
//! CSV series into the output directory.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use repulse_core::classical::{flow_ensemble, zero_energy_start, PhasePoint};
use repulse_core::mehler::{avron_herbst, propagate_factored, propagate_kernel};
use repulse_core::phasespace::{
    a2, accel_alpha, hamiltonian, heuristic_bracket, heuristic_pair, mourre_shell_scan, poisson_bracket,
    v_alpha, ShellScan,
};
use repulse_core::potentials::{sigma_alpha, PerturbationSpec, QuadraticSpec, Sector};
use repulse_core::scattering::{
    cook_scan, minimal_maximal_velocity_mass, velocity_trace, wave_operator, CookRecord, Dynamics,
    VelocityOptions, VelocityTrace, WaveOperatorMethod,
};
use repulse_core::splitstep::{convergence_order, dense_oracle, propagate, EvolutionConfig};
use repulse_core::{Grid, WaveFunction};

use crate::config::{ExperimentConfig, ExperimentKind, Hamiltonian, PropagatorKind, WaveOperatorKind};
use crate::report::{write_csv, Check, Summary};

pub fn run(cfg: &ExperimentConfig, seed: u64, out: &Path, summary: &mut Summary) -> Result<()> {
    match cfg.experiment {
        ExperimentKind::Propagate => run_propagate(cfg, out, summary),
        ExperimentKind::Cook => run_cook(cfg, out, summary),
        ExperimentKind::WaveOperator => run_wave_operator(cfg, out, summary),
        ExperimentKind::Velocity => run_velocity(cfg, out, summary),
        ExperimentKind::Classical => run_classical(cfg, seed, out, summary),
        ExperimentKind::MourreScan => run_mourre(cfg, seed, out, summary),
        ExperimentKind::Convergence => run_convergence(cfg, out, summary),
    }
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

/// Split-step configuration for `H₀ + v` on the grid.
fn evolution(cfg: &ExperimentConfig, grid: &Grid, v: &PerturbationSpec) -> Result<EvolutionConfig> {
    let dt = cfg.schedule.dt;
    match cfg.hamiltonian()? {
        Hamiltonian::Repulsive(spec) => EvolutionConfig::repulsive(grid, &spec, v, dt),
        Hamiltonian::Quadratic(spec) => EvolutionConfig::quadratic(grid, &spec, v, dt),
    }
    .context("splitstep")
}

fn quadratic(cfg: &ExperimentConfig, what: &str) -> Result<QuadraticSpec> {
    match cfg.hamiltonian()? {
        Hamiltonian::Quadratic(q) => Ok(q),
        Hamiltonian::Repulsive(_) => bail!("{what} needs a quadratic hamiltonian"),
    }
}

fn alpha_of(cfg: &ExperimentConfig) -> Result<f64> {
    match cfg.hamiltonian()? {
        Hamiltonian::Repulsive(s) => Ok(s.alpha),
        Hamiltonian::Quadratic(_) => Ok(2.0),
    }
}

fn increasing(times: &[f64]) -> Result<()> {
    if times.is_empty() || times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || times.windows(2).any(|w| w[1] <= w[0]) {
        bail!("schedule times must be nonnegative and strictly increasing");
    }
    Ok(())
}

fn second_moment(psi: &WaveFunction) -> Result<f64> {
    let psi = psi.to_position()?;
    let r2 = psi.grid().radius_squared();
    let num: f64 = psi.density().iter().zip(&r2).map(|(p, r)| p * r).sum();
    let den: f64 = psi.density().iter().sum();
    Ok(if den > 0.0 { num / den } else { 0.0 })
}

struct Propagator<'a> {
    kind: PropagatorKind,
    cfg: &'a ExperimentConfig,
    grid: &'a Grid,
    v: &'a PerturbationSpec,
}

impl Propagator<'_> {
    fn name(&self) -> &'static str {
        match self.kind {
            PropagatorKind::SplitStep => "splitstep",
            PropagatorKind::Mehler => "mehler",
            PropagatorKind::Kernel => "mehler kernel",
            PropagatorKind::AvronHerbst => "avron-herbst",
        }
    }

    fn exact_only(&self) -> Result<QuadraticSpec> {
        if !self.v.is_zero() {
            bail!("{} evolution needs a zero perturbation", self.name());
        }
        quadratic(self.cfg, self.name())
    }

    /// `e^{-itH}ψ`, any sign of `t`.
    fn evolve(&self, psi: &WaveFunction, t: f64) -> Result<WaveFunction> {
        if t == 0.0 {
            return psi.to_position().map_err(Into::into);
        }
        let out = match self.kind {
            PropagatorKind::SplitStep => propagate(psi, t, &evolution(self.cfg, self.grid, self.v)?),
            PropagatorKind::Mehler => propagate_factored(psi, t, &self.exact_only()?),
            PropagatorKind::Kernel => propagate_kernel(psi, t, &self.exact_only()?),
            PropagatorKind::AvronHerbst => {
                let spec = self.exact_only()?;
                match spec.sectors().as_slice() {
                    [Sector::Stark { field }] => avron_herbst(psi, t, *field),
                    _ => bail!("avron-herbst evolution needs a 1-D pure Stark hamiltonian"),
                }
            }
        };
        out.with_context(|| self.name())
    }
}

fn run_propagate(cfg: &ExperimentConfig, out: &Path, s: &mut Summary) -> Result<()> {
    let grid = cfg.grid()?;
    let psi0 = cfg.initial_state(&grid)?;
    let times = cfg.schedule.times()?;
    increasing(&times)?;
    let v = cfg.perturbation()?;
    let p = &cfg.propagate;
    let kind = p.method.unwrap_or(match cfg.hamiltonian()? {
        Hamiltonian::Quadratic(_) if v.is_zero() => PropagatorKind::Mehler,
        _ => PropagatorKind::SplitStep,
    });
    let prop = Propagator { kind, cfg, grid: &grid, v: &v };
    let norm0 = psi0.l2_norm()?;

    let mut rows = Vec::new();
    let mut max_defect: f64 = 0.0;
    let mut state = psi0.clone();
    let mut now = 0.0;
    for &t in &times {
        // Split-step marches; the closed-form propagators jump from ψ₀.
        state = if kind == PropagatorKind::SplitStep {
            let next = prop.evolve(&state, t - now)?;
            now = t;
            next
        } else {
            prop.evolve(&psi0, t)?
        };
        let norm = state.l2_norm()?;
        max_defect = max_defect.max((norm - norm0).abs() / norm0);
        rows.push(vec![t, norm, second_moment(&state)?, state.boundary_mass(0.1)?]);
    }
    write_csv(&out.join("propagate.csv"), &header(&["t", "norm", "r2_mean", "boundary_mass"]), &rows)?;
    let t_final = *times.last().expect("nonempty schedule");
    let back = prop.evolve(&state, -t_final)?;
    let round_trip = back.distance(&psi0)? / norm0;

    s.metric("final_time", t_final);
    s.metric("max_norm_defect", max_defect);
    s.metric("round_trip_error", round_trip);
    s.check(Check::at_most("max_norm_defect", p.norm_tol, max_defect));
    s.check(Check::at_most("round_trip_error", p.round_trip_tol, round_trip));
    if let Some(other) = p.compare {
        let reference = Propagator { kind: other, cfg, grid: &grid, v: &v }.evolve(&psi0, t_final)?;
        let err = state.distance(&reference)? / norm0;
        let name = format!("{} vs {} relative L2 error", prop.name(), Propagator { kind: other, cfg, grid: &grid, v: &v }.name());
        s.metric("compare_error", err);
        s.check(Check::at_most(name, p.compare_tol, err));
    }
    Ok(())
}

fn cook_record(cfg: &ExperimentConfig, psi0: &WaveFunction, v: &PerturbationSpec, times: &[f64]) -> Result<CookRecord> {
    let dynamics = match cfg.hamiltonian()? {
        Hamiltonian::Quadratic(q) => Dynamics::Quadratic(q),
        Hamiltonian::Repulsive(_) => Dynamics::Grid(evolution(cfg, psi0.grid(), &PerturbationSpec::none())?),
    };
    cook_scan(psi0, &dynamics, v, times).context("scattering")
}

fn run_cook(cfg: &ExperimentConfig, out: &Path, s: &mut Summary) -> Result<()> {
    let grid = cfg.grid()?;
    let psi0 = cfg.initial_state(&grid)?;
    let times = cfg.schedule.times()?;
    let v = cfg.perturbation()?;
    let rec = cook_record(cfg, &psi0, &v, &times)?;
    write_csv(&out.join("cook.csv"), &CookRecord::csv_header(), &rec.csv_rows())?;
    s.metric("integral_estimate", rec.integral_estimate);
    s.metric("quadrature_error", rec.quadrature_error);
    s.metric("samples", rec.times.len() as f64);
    s.metric("truncated_at", rec.truncated_at.unwrap_or(f64::NAN));
    if v.is_zero() {
        s.check(Check::holds("integrand identically zero", rec.integrand.iter().all(|v| *v == 0.0)));
        return Ok(());
    }
    let c = &cfg.cook;
    let window = c.fit_window.map_or((rec.times[0], *rec.times.last().expect("nonempty")), |[a, b]| (a, b));
    let slope = rec.power_slope(window).context("scattering")?;
    s.metric("tail_slope", slope);
    if let Some(m) = c.max_slope {
        s.check(Check::at_most("tail_slope", m, slope));
    }
    if let Some(m) = c.min_slope {
        s.check(Check::at_least("tail_slope", m, slope));
    }
    Ok(())
}

fn run_wave_operator(cfg: &ExperimentConfig, out: &Path, s: &mut Summary) -> Result<()> {
    let grid = cfg.grid()?;
    let phi = cfg.initial_state(&grid)?;
    let ts = cfg.schedule.times()?;
    increasing(&ts)?;
    let v = cfg.perturbation()?;
    let p = &cfg.wave_operator;
    let ham = cfg.hamiltonian()?;
    let kind = p.method.unwrap_or(match ham {
        Hamiltonian::Quadratic(_) => WaveOperatorKind::Interaction,
        Hamiltonian::Repulsive(_) => WaveOperatorKind::Grid,
    });
    let method = match kind {
        WaveOperatorKind::Interaction => WaveOperatorMethod::Interaction {
            spec: quadratic(cfg, "the interaction-picture wave operator")?,
            perturbation: v.clone(),
            dt: cfg.schedule.dt,
            switch_time: p.switch_time,
            step: p.step,
        },
        WaveOperatorKind::Grid => WaveOperatorMethod::Grid {
            h0: evolution(cfg, &grid, &PerturbationSpec::none())?,
            h: evolution(cfg, &grid, &v)?,
        },
    };
    let omegas: Vec<WaveFunction> = ts
        .par_iter()
        .map(|&t| wave_operator(&phi, t, &method).context("scattering"))
        .collect::<Result<_>>()?;
    let norm0 = phi.l2_norm()?;

    // Cook integrand on a uniform schedule that contains every T.
    let (t0, t1) = (ts[0], *ts.last().expect("nonempty"));
    let mut sched: Vec<f64> = if t1 > t0 {
        let n = ((t1 - t0) / p.cook_step).ceil().max(2.0) as usize;
        (0..=n).map(|i| t0 + (t1 - t0) * i as f64 / n as f64).collect()
    } else {
        vec![t0]
    };
    sched.extend(&ts);
    sched.sort_by(f64::total_cmp);
    sched.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    let rec = if ts.len() > 1 { Some(cook_record(cfg, &phi, &v, &sched)?) } else { None };

    let mut rows = Vec::new();
    let mut max_iso: f64 = 0.0;
    let mut prev = f64::INFINITY;
    let mut decreasing = true;
    for (k, (t, o)) in ts.iter().zip(&omegas).enumerate() {
        let iso = (o.l2_norm()? - norm0).abs();
        max_iso = max_iso.max(iso);
        let (mut d, mut bound, mut err) = (f64::NAN, f64::NAN, f64::NAN);
        if k > 0 {
            d = o.distance(&omegas[k - 1])?;
            let rec = rec.as_ref().expect("cook record for several times");
            (bound, err) = rec.integral_between(ts[k - 1], *t).context("scattering")?;
            s.check(Check::at_most(format!("cauchy difference [{}, {t}] vs cook bound", ts[k - 1]), bound + err, d));
            decreasing &= d < prev + 1e-8;
            prev = d;
            s.metric(format!("cauchy_difference_{k}"), d);
        }
        rows.push(vec![*t, o.l2_norm()?, iso, d, bound, err]);
    }
    write_csv(
        &out.join("wave_operator.csv"),
        &header(&["T", "norm", "isometry_defect", "cauchy_difference", "cook_bound", "quadrature_error"]),
        &rows,
    )?;
    if let Some(rec) = &rec {
        write_csv(&out.join("cook.csv"), &CookRecord::csv_header(), &rec.csv_rows())?;
    }
    s.metric("max_isometry_defect", max_iso);
    s.check(Check::at_most("max_isometry_defect", p.isometry_tol, max_iso));
    if ts.len() > 2 {
        s.check(Check::holds("cauchy differences decreasing", decreasing));
    }
    Ok(())
}

fn run_velocity(cfg: &ExperimentConfig, out: &Path, s: &mut Summary) -> Result<()> {
    let grid = cfg.grid()?;
    let psi0 = cfg.initial_state(&grid)?;
    let times = cfg.schedule.times()?;
    let v = cfg.perturbation()?;
    let p = &cfg.velocity;
    let alpha = match p.alpha {
        Some(a) => a,
        None => alpha_of(cfg)?,
    };
    let sigma = sigma_alpha(alpha).context("velocity.alpha")?;
    let dynamics = match cfg.hamiltonian()? {
        Hamiltonian::Quadratic(q) if v.is_zero() => Dynamics::Quadratic(q),
        _ => Dynamics::Grid(evolution(cfg, &grid, &v)?),
    };
    let opts = VelocityOptions { bin_width: p.bin_width, hist_max: p.hist_max, per_direction: p.per_direction };
    let tr = velocity_trace(&psi0, &dynamics, alpha, &times, &opts).context("scattering")?;
    write_csv(&out.join("velocity.csv"), &VelocityTrace::csv_header(), &tr.csv_rows())?;
    write_csv(&out.join("histograms.csv"), &VelocityTrace::histogram_header(), &tr.histogram_rows())?;

    let expected = p.expected.unwrap_or(sigma);
    let last = *tr.mean.last().ok_or_else(|| anyhow!("empty velocity trace"))?;
    s.metric("sigma_alpha", sigma);
    s.metric("final_time", *tr.times.last().expect("nonempty"));
    s.metric("final_mean", last);
    s.metric("distance_to_expected", (last - expected).abs());
    s.metric("truncated_at", tr.truncated_at.unwrap_or(f64::NAN));
    if let Some([t1, t2]) = p.richardson {
        let r = tr.richardson(t1, t2).context("scattering")?;
        s.metric("richardson", r);
        s.check(Check::close("richardson extrapolated mean", expected, r, p.tolerance.unwrap_or(0.15 * expected)));
    } else {
        s.check(Check::close("final mean", expected, last, p.tolerance.unwrap_or(0.1 * expected)));
    }
    if p.monotone && tr.mean.len() > 1 {
        let gaps: Vec<f64> = tr.mean.iter().map(|m| (m - expected).abs()).collect();
        s.check(Check::holds("monotone approach", gaps.windows(2).all(|w| w[1] < w[0])));
    }
    if p.theta_low.is_some() || p.window.is_some() {
        let theta = p.theta_low.unwrap_or(0.5 * sigma);
        let [a, b] = p.window.unwrap_or([1.5 * sigma, 2.0 * sigma]);
        let m = minimal_maximal_velocity_mass(&tr, theta, (a, b)).context("scattering")?;
        let below = *m.mass_below.last().expect("nonempty");
        let window = *m.mass_in_window.last().expect("nonempty");
        s.metric("mass_below", below);
        s.metric("mass_in_window", window);
        if p.theta_low.is_some() {
            s.check(Check::at_most(format!("mass below {theta}"), p.mass_tol, below));
        }
        if p.window.is_some() {
            s.check(Check::at_most(format!("mass in [{a}, {b}]"), p.mass_tol, window));
        }
    }
    if let (Some(dirs), Some(global)) = (&tr.per_direction, &tr.global_log) {
        let mut rows = Vec::new();
        for (k, t) in tr.times.iter().enumerate() {
            let mut row = vec![*t];
            row.extend(dirs.iter().map(|d| d[k]));
            row.push(global[k]);
            rows.push(row);
        }
        let mut cols = vec!["t".to_string()];
        cols.extend((0..dirs.len()).map(|j| format!("log_x{j}")));
        cols.push("log_x".into());
        write_csv(&out.join("directions.csv"), &cols, &rows)?;
        for (j, d) in dirs.iter().enumerate() {
            let m = *d.last().expect("nonempty");
            s.metric(format!("direction_{j}"), m);
            if let Some(e) = p.expected_directions.as_ref().and_then(|e| e.get(j)) {
                s.check(Check::close(format!("direction {j} rate"), *e, m, p.direction_tol * e.abs()));
            }
        }
        let g = *global.last().expect("nonempty");
        s.metric("global_log_rate", g);
        if let Some(e) = p.expected_global {
            s.check(Check::close("global log rate", e, g, p.direction_tol * e.abs()));
        }
    }
    Ok(())
}

fn run_classical(cfg: &ExperimentConfig, seed: u64, out: &Path, s: &mut Summary) -> Result<()> {
    let spec = match cfg.hamiltonian()? {
        Hamiltonian::Repulsive(r) => r,
        Hamiltonian::Quadratic(_) => bail!("classical flows need a repulsive hamiltonian"),
    };
    let p = &cfg.classical;
    let mut x0s = p.starts.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [lo, hi] = p.random_range;
    if p.random_starts > 0 && !(hi > lo) {
        bail!("classical.random_range must be increasing");
    }
    x0s.extend((0..p.random_starts).map(|_| rng.gen_range(lo..hi)));
    if x0s.is_empty() {
        bail!("classical experiment needs at least one start");
    }
    let starts: Vec<PhasePoint> =
        x0s.iter().map(|&x| zero_energy_start(x, spec.alpha)).collect::<repulse_core::Result<_>>()?;
    let trajs = flow_ensemble(&starts, &spec, p.t_final, p.dt, p.record_every).context("classical")?;
    write_csv(&out.join("trajectory.csv"), &trajs[0].csv_header(), &trajs[0].csv_rows())?;
    let window = p.window.map_or((0.5 * p.t_final, p.t_final), |[a, b]| (a, b));
    let (target, label) = if spec.alpha == 2.0 {
        (2.0, "log growth rate")
    } else {
        (2.0 / (2.0 - spec.alpha), "escape exponent")
    };
    let mut max_drift: f64 = 0.0;
    let mut rows = Vec::new();
    for (x0, tr) in x0s.iter().zip(&trajs) {
        let drift = tr.energy_drift(&spec);
        max_drift = max_drift.max(drift);
        let fitted = if spec.alpha == 2.0 { tr.log_growth_rate(window) } else { tr.escape_exponent(window) }
            .context("classical")?;
        s.check(Check::close(format!("{label} from x0 = {x0}"), target, fitted, p.growth_tol * target));
        rows.push(vec![*x0, fitted, drift]);
    }
    write_csv(&out.join("fits.csv"), &header(&["x0", "fitted", "energy_drift"]), &rows)?;
    let mean = rows.iter().map(|r| r[1]).sum::<f64>() / rows.len() as f64;
    s.metric("target", target);
    s.metric("mean_fitted", mean);
    s.metric("max_energy_drift", max_drift);
    s.check(Check::at_most("max_energy_drift", p.drift_tol, max_drift));
    Ok(())
}

fn run_mourre(cfg: &ExperimentConfig, seed: u64, out: &Path, s: &mut Summary) -> Result<()> {
    let alpha = match cfg.hamiltonian()? {
        Hamiltonian::Repulsive(r) => r.alpha,
        Hamiltonian::Quadratic(_) => bail!("mourre scans need a repulsive hamiltonian"),
    };
    let p = &cfg.mourre;
    let sigma = sigma_alpha(alpha)?;
    let mut k = 0;
    for &e in &p.energies {
        for &eta in &p.etas {
            let scan = mourre_shell_scan(alpha, e, eta, (p.radius_range[0], p.radius_range[1]), p.samples)
                .context("phasespace")?;
            write_csv(&out.join(format!("scan_{k}.csv")), &ShellScan::csv_header(), &scan.csv_rows())?;
            let tag = format!("E={e} eta={eta}");
            s.metric(format!("min_bracket[{tag}]"), scan.min_bracket);
            s.metric(format!("violating_points[{tag}]"), scan.violating_points as f64);
            s.metric(format!("r_threshold[{tag}]"), scan.r_threshold.unwrap_or(f64::INFINITY));
            s.check(Check::holds(format!("finite R for {tag}"), scan.r_threshold.is_some()));
            if let Some(m) = scan.min_beyond_threshold() {
                s.check(Check::at_least(format!("bracket beyond R for {tag}"), sigma - eta, m));
            }
            k += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = p.symbol_points;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);

    let h = hamiltonian(alpha)?;
    let (va, acc) = (v_alpha(alpha)?, accel_alpha(alpha)?);
    let (ha, a2s) = (hamiltonian(2.0)?, a2());
    let (hh, ah) = heuristic_pair(alpha)?;
    let (mut accel_err, mut a2_err, mut heur_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..n {
        let x = [rng.gen_range(-20.0..20.0)];
        let xi = [rng.gen_range(-20.0..20.0)];
        let b = poisson_bracket(&h, &va, &x, &xi).context("phasespace")?;
        accel_err = accel_err.max(rel(acc.eval(&x, &xi), b));
        let (u, w) = (xi[0] + x[0], xi[0] - x[0]);
        let closed = 2.0 * u * u / (1.0 + u * u) + 2.0 * w * w / (1.0 + w * w);
        a2_err = a2_err.max(rel(poisson_bracket(&ha, &a2s, &x, &xi).context("phasespace")?, closed));
        let xp = rng.gen_range(0.5..20.0);
        let e = rng.gen_range(-0.2..2.0);
        let xi2 = f64::powf(xp, alpha) + e;
        if xi2 > 0.0 {
            let xi_p = [xi2.sqrt()];
            let b = poisson_bracket(&hh, &ah, &[xp], &xi_p).context("phasespace")?;
            heur_err = heur_err.max(rel(b, heuristic_bracket(alpha, e, xp)));
        }
    }
    s.metric("accel_bracket_error", accel_err);
    s.metric("a2_closed_form_error", a2_err);
    s.metric("heuristic_identity_error", heur_err);
    s.check(Check::at_most("acceleration symbol vs {h, v_alpha}", 1e-8, accel_err));
    s.check(Check::at_most("a2 bracket vs closed form", 1e-8, a2_err));
    s.check(Check::at_most("heuristic bracket identity", 1e-10, heur_err));
    Ok(())
}

fn run_convergence(cfg: &ExperimentConfig, out: &Path, s: &mut Summary) -> Result<()> {
    let grid = cfg.grid()?;
    let psi0 = cfg.initial_state(&grid)?;
    let v = cfg.perturbation()?;
    let times = cfg.schedule.times()?;
    let t = *times.last().ok_or_else(|| anyhow!("empty schedule"))?;
    let evo = evolution(cfg, &grid, &v)?;
    let p = &cfg.convergence;
    let report = convergence_order(&psi0, t, &evo, &p.dts).context("splitstep")?;
    let rows: Vec<Vec<f64>> = report.dts.iter().zip(&report.errors).map(|(d, e)| vec![*d, *e]).collect();
    write_csv(&out.join("convergence.csv"), &header(&["dt", "error"]), &rows)?;
    let slope = report.slope.unwrap_or(f64::NAN);
    s.metric("slope", slope);
    s.metric("fitted_points", report.fitted as f64);
    s.check(Check::close("strang convergence slope", p.expected_slope, slope, p.slope_tol));
    if let Some(tol) = p.oracle_tol {
        let exact = dense_oracle(&psi0, t, &evo).context("splitstep")?;
        let err = propagate(&psi0, t, &evo).context("splitstep")?.distance(&exact)?;
        s.metric("oracle_error", err);
        s.check(Check::at_most("split-step vs dense oracle", tol, err));
    }
    Ok(())
}
