//! TOML experiment configs and their translation into core types.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use repulse_core::potentials::{
    CompactPart, DecayFactor, PerturbationSpec, ProductDecay, Profile, QuadraticSpec, RepulsiveSpec,
    ShortRangePart,
};
use repulse_core::{make_grid, Grid, WaveFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Propagate,
    Cook,
    WaveOperator,
    Velocity,
    Classical,
    MourreScan,
    Convergence,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Propagate => "propagate",
            ExperimentKind::Cook => "cook",
            ExperimentKind::WaveOperator => "wave-operator",
            ExperimentKind::Velocity => "velocity",
            ExperimentKind::Classical => "classical",
            ExperimentKind::MourreScan => "mourre-scan",
            ExperimentKind::Convergence => "convergence",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub id: Option<String>,
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    pub grid: Option<GridBlock>,
    pub hamiltonian: HamiltonianBlock,
    #[serde(default)]
    pub perturbation: PerturbationBlock,
    #[serde(default)]
    pub state: StateBlock,
    #[serde(default)]
    pub schedule: ScheduleBlock,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default)]
    pub propagate: PropagateParams,
    #[serde(default)]
    pub cook: CookParams,
    #[serde(default)]
    pub wave_operator: WaveOperatorParams,
    #[serde(default)]
    pub velocity: VelocityParams,
    #[serde(default)]
    pub classical: ClassicalParams,
    #[serde(default)]
    pub mourre: MourreParams,
    #[serde(default)]
    pub convergence: ConvergenceParams,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    #[serde(default = "one")]
    pub dims: usize,
    pub points: usize,
    pub half_width: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HamiltonianBlock {
    Repulsive {
        alpha: f64,
        #[serde(default = "yes")]
        regularized: bool,
    },
    Quadratic {
        dims: usize,
        #[serde(default)]
        n_minus: usize,
        #[serde(default)]
        n_plus: usize,
        #[serde(default)]
        omegas: Vec<f64>,
        #[serde(default)]
        fields: Vec<f64>,
    },
}

/// Validated Hamiltonian.
#[derive(Debug, Clone)]
pub enum Hamiltonian {
    Repulsive(RepulsiveSpec),
    Quadratic(QuadraticSpec),
}

impl Hamiltonian {
    pub fn dims_hint(&self) -> Option<usize> {
        match self {
            Hamiltonian::Repulsive(_) => None,
            Hamiltonian::Quadratic(q) => Some(q.dims),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileBlock {
    Zero,
    Power { amplitude: f64, exponent: f64 },
    LogPower { amplitude: f64, exponent: f64 },
    PalphaPower { amplitude: f64, alpha: f64, exponent: f64 },
    Gaussian { amplitude: f64, width: f64 },
    CompactBump { height: f64, radius: f64 },
    Table { radii: Vec<f64>, values: Vec<f64> },
}

impl ProfileBlock {
    fn build(&self) -> Profile {
        match self.clone() {
            ProfileBlock::Zero => Profile::Zero,
            ProfileBlock::Power { amplitude, exponent } => Profile::Power { amplitude, exponent },
            ProfileBlock::LogPower { amplitude, exponent } => Profile::LogPower { amplitude, exponent },
            ProfileBlock::PalphaPower { amplitude, alpha, exponent } => {
                Profile::PalphaPower { amplitude, alpha, exponent }
            }
            ProfileBlock::Gaussian { amplitude, width } => Profile::Gaussian { amplitude, width },
            ProfileBlock::CompactBump { height, radius } => Profile::CompactBump { height, radius },
            ProfileBlock::Table { radii, values } => Profile::Table { radii, values },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompactBlock {
    pub profile: ProfileBlock,
    pub radius: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShortRangeBlock {
    pub profile: ProfileBlock,
    #[serde(default)]
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FactorBlock {
    One,
    Log { beta: f64 },
    Stark { beta: f64 },
    Free { beta: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductBlock {
    pub amplitude: f64,
    pub factors: Vec<FactorBlock>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationBlock {
    pub compact: Option<CompactBlock>,
    pub short_range: Option<ShortRangeBlock>,
    pub product: Option<ProductBlock>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateBlock {
    pub center: Option<Vec<f64>>,
    #[serde(default = "unit")]
    pub width: f64,
    pub momentum: Option<Vec<f64>>,
}

impl Default for StateBlock {
    fn default() -> Self {
        StateBlock { center: None, width: 1.0, momentum: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleBlock {
    pub times: Option<Vec<f64>>,
    /// Alternative to `times`: `count` equally spaced points on `[start, stop]`.
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub count: Option<usize>,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

impl Default for ScheduleBlock {
    fn default() -> Self {
        ScheduleBlock { times: None, start: None, stop: None, count: None, dt: default_dt() }
    }
}

impl ScheduleBlock {
    pub fn times(&self) -> Result<Vec<f64>> {
        match (&self.times, self.start, self.stop, self.count) {
            (Some(t), None, None, None) => Ok(t.clone()),
            (None, Some(a), Some(b), Some(n)) if n >= 2 => {
                Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
            }
            (None, None, None, None) => bail!("schedule: give either `times` or `start`, `stop`, `count`"),
            _ => bail!("schedule: use either `times` or all of `start`, `stop`, `count` (count >= 2)"),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropagatorKind {
    SplitStep,
    Mehler,
    Kernel,
    AvronHerbst,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagateParams {
    pub method: Option<PropagatorKind>,
    /// Second propagator evaluated at the final time for comparison.
    pub compare: Option<PropagatorKind>,
    #[serde(default = "tol_compare")]
    pub compare_tol: f64,
    #[serde(default = "tol_norm")]
    pub norm_tol: f64,
    #[serde(default = "tol_round_trip")]
    pub round_trip_tol: f64,
}

impl Default for PropagateParams {
    fn default() -> Self {
        PropagateParams {
            method: None,
            compare: None,
            compare_tol: tol_compare(),
            norm_tol: tol_norm(),
            round_trip_tol: tol_round_trip(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CookParams {
    pub fit_window: Option<[f64; 2]>,
    /// Pass if the fitted power-law slope is at most this.
    pub max_slope: Option<f64>,
    /// Pass if the fitted power-law slope is at least this.
    pub min_slope: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WaveOperatorKind {
    Interaction,
    Grid,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveOperatorParams {
    pub method: Option<WaveOperatorKind>,
    #[serde(default = "half")]
    pub switch_time: f64,
    #[serde(default = "kick_step")]
    pub step: f64,
    /// Spacing of the Cook integrand samples used for the bound.
    #[serde(default = "cook_step")]
    pub cook_step: f64,
    #[serde(default = "tol_round_trip")]
    pub isometry_tol: f64,
}

impl Default for WaveOperatorParams {
    fn default() -> Self {
        WaveOperatorParams {
            method: None,
            switch_time: half(),
            step: kick_step(),
            cook_step: cook_step(),
            isometry_tol: tol_round_trip(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VelocityParams {
    /// Exponent of `p_α`; defaults to the Hamiltonian's α, or 2 for quadratic `H₀`.
    pub alpha: Option<f64>,
    /// Target of the final (or extrapolated) mean; defaults to `σ_α`.
    pub expected: Option<f64>,
    pub tolerance: Option<f64>,
    pub richardson: Option<[f64; 2]>,
    #[serde(default = "yes")]
    pub monotone: bool,
    pub theta_low: Option<f64>,
    pub window: Option<[f64; 2]>,
    #[serde(default = "mass_tol")]
    pub mass_tol: f64,
    #[serde(default)]
    pub per_direction: bool,
    /// Targets for `ln⟨x_j⟩/t` and `ln⟨x⟩/t` when `per_direction` is set.
    pub expected_directions: Option<Vec<f64>>,
    pub expected_global: Option<f64>,
    /// Relative tolerance of the per-direction checks.
    #[serde(default = "direction_tol")]
    pub direction_tol: f64,
    #[serde(default = "bin_width")]
    pub bin_width: f64,
    #[serde(default = "hist_max")]
    pub hist_max: f64,
}

impl Default for VelocityParams {
    fn default() -> Self {
        VelocityParams {
            alpha: None,
            expected: None,
            tolerance: None,
            richardson: None,
            monotone: true,
            theta_low: None,
            window: None,
            mass_tol: mass_tol(),
            per_direction: false,
            expected_directions: None,
            expected_global: None,
            direction_tol: direction_tol(),
            bin_width: bin_width(),
            hist_max: hist_max(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalParams {
    /// Zero-energy starts at these positions.
    #[serde(default = "default_starts")]
    pub starts: Vec<f64>,
    /// Additional zero-energy starts with `x₀` drawn uniformly from `random_range`.
    #[serde(default)]
    pub random_starts: usize,
    #[serde(default = "random_range")]
    pub random_range: [f64; 2],
    #[serde(default = "classical_t")]
    pub t_final: f64,
    #[serde(default = "default_classical_dt")]
    pub dt: f64,
    #[serde(default = "record_every")]
    pub record_every: usize,
    pub window: Option<[f64; 2]>,
    #[serde(default = "drift_tol")]
    pub drift_tol: f64,
    /// Relative tolerance on `2/(2-α)` (or on the rate 2 when α = 2).
    #[serde(default = "growth_tol")]
    pub growth_tol: f64,
}

impl Default for ClassicalParams {
    fn default() -> Self {
        ClassicalParams {
            starts: default_starts(),
            random_starts: 0,
            random_range: random_range(),
            t_final: classical_t(),
            dt: default_classical_dt(),
            record_every: record_every(),
            window: None,
            drift_tol: drift_tol(),
            growth_tol: growth_tol(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MourreParams {
    #[serde(default = "default_energies")]
    pub energies: Vec<f64>,
    #[serde(default = "default_etas")]
    pub etas: Vec<f64>,
    #[serde(default = "radius_range")]
    pub radius_range: [f64; 2],
    #[serde(default = "shell_samples")]
    pub samples: usize,
    /// Random phase-space points for the symbol identities.
    #[serde(default = "symbol_points")]
    pub symbol_points: usize,
}

impl Default for MourreParams {
    fn default() -> Self {
        MourreParams {
            energies: default_energies(),
            etas: default_etas(),
            radius_range: radius_range(),
            samples: shell_samples(),
            symbol_points: symbol_points(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceParams {
    #[serde(default = "default_dts")]
    pub dts: Vec<f64>,
    #[serde(default = "two")]
    pub expected_slope: f64,
    #[serde(default = "slope_tol")]
    pub slope_tol: f64,
    /// Error bound against the dense oracle at the schedule's `dt`.
    pub oracle_tol: Option<f64>,
}

impl Default for ConvergenceParams {
    fn default() -> Self {
        ConvergenceParams {
            dts: default_dts(),
            expected_slope: two(),
            slope_tol: slope_tol(),
            oracle_tol: None,
        }
    }
}

fn one() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn unit() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn half() -> f64 {
    0.5
}
fn default_dt() -> f64 {
    1e-3
}
fn tol_compare() -> f64 {
    1e-6
}
fn tol_norm() -> f64 {
    1e-10
}
fn tol_round_trip() -> f64 {
    1e-8
}
fn kick_step() -> f64 {
    0.01
}
fn cook_step() -> f64 {
    0.1
}
fn mass_tol() -> f64 {
    0.05
}
fn direction_tol() -> f64 {
    0.1
}
fn bin_width() -> f64 {
    0.05
}
fn hist_max() -> f64 {
    8.0
}
fn default_starts() -> Vec<f64> {
    vec![1.0]
}
fn random_range() -> [f64; 2] {
    [0.5, 2.0]
}
fn classical_t() -> f64 {
    100.0
}
fn default_classical_dt() -> f64 {
    1e-3
}
fn record_every() -> usize {
    100
}
fn drift_tol() -> f64 {
    1e-6
}
fn growth_tol() -> f64 {
    0.03
}
fn default_energies() -> Vec<f64> {
    vec![-1.0, 0.0, 1.0]
}
fn default_etas() -> Vec<f64> {
    vec![0.1, 0.2]
}
fn radius_range() -> [f64; 2] {
    [0.0, 1e3]
}
fn shell_samples() -> usize {
    10_000
}
fn symbol_points() -> usize {
    1000
}
fn default_dts() -> Vec<f64> {
    vec![1e-2, 5e-3, 2.5e-3, 1.25e-3]
}
fn slope_tol() -> f64 {
    0.1
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg = Self::parse(&text).with_context(|| format!("in {}", path.display()))?;
        Ok((cfg, text))
    }

    /// Parses and validates; TOML errors carry line and column.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| anyhow!("{e}"))?;
        cfg.hamiltonian()?;
        cfg.perturbation()?;
        Ok(cfg)
    }

    pub fn hamiltonian(&self) -> Result<Hamiltonian> {
        match &self.hamiltonian {
            HamiltonianBlock::Repulsive { alpha, regularized } => Ok(Hamiltonian::Repulsive(
                RepulsiveSpec::new(*alpha, *regularized).context("hamiltonian.alpha")?,
            )),
            HamiltonianBlock::Quadratic { dims, n_minus, n_plus, omegas, fields } => Ok(Hamiltonian::Quadratic(
                QuadraticSpec::new(*dims, *n_minus, *n_plus, omegas.clone(), fields.clone())
                    .context("hamiltonian")?,
            )),
        }
    }

    pub fn perturbation(&self) -> Result<PerturbationSpec> {
        let p = &self.perturbation;
        let spec = PerturbationSpec {
            compact: p.compact.as_ref().map(|c| CompactPart { profile: c.profile.build(), radius: c.radius }),
            short_range: p
                .short_range
                .as_ref()
                .map(|s| ShortRangePart { profile: s.profile.build(), epsilon: s.epsilon }),
            product: p.product.as_ref().map(|w| ProductDecay {
                amplitude: w.amplitude,
                factors: w
                    .factors
                    .iter()
                    .map(|f| match *f {
                        FactorBlock::One => DecayFactor::One,
                        FactorBlock::Log { beta } => DecayFactor::Log { beta },
                        FactorBlock::Stark { beta } => DecayFactor::Stark { beta },
                        FactorBlock::Free { beta } => DecayFactor::Free { beta },
                    })
                    .collect(),
            }),
        };
        spec.validate().context("perturbation")?;
        Ok(spec)
    }

    pub fn grid(&self) -> Result<Grid> {
        let g = self.grid.as_ref().ok_or_else(|| anyhow!("this experiment needs a [grid] block"))?;
        if let Some(d) = self.hamiltonian()?.dims_hint() {
            if d != g.dims {
                bail!("grid.dims = {} does not match hamiltonian.dims = {d}", g.dims);
            }
        }
        make_grid(g.dims, g.points, g.half_width).context("grid")
    }

    /// Gaussian initial state from the `[state]` block.
    pub fn initial_state(&self, grid: &Grid) -> Result<WaveFunction> {
        let d = grid.dims();
        let center = self.state.center.clone().unwrap_or_else(|| vec![0.0; d]);
        let momentum = self.state.momentum.clone().unwrap_or_else(|| vec![0.0; d]);
        if center.len() != d || momentum.len() != d {
            bail!("state.center and state.momentum need {d} entries");
        }
        WaveFunction::gaussian(grid, &center, self.state.width, &momentum).context("state")
    }

    pub fn label(&self) -> String {
        self.id.clone().unwrap_or_else(|| self.experiment.name().to_string())
    }
}
