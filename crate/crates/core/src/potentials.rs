//! Potential data: the repulsive family `-⟨x⟩^α`, quadratic saddles with Stark
//! directions, short-range perturbations and the rescaled position variable
//! `p_α` with its asymptotic velocity `σ_α`.

use crate::error::{config, Error, Result};
use crate::fit::linear_fit;
use crate::grid::Grid;

/// `⟨x⟩ = (1 + |x|²)^{1/2}`.
pub fn bracket(x: &[f64]) -> f64 {
    (1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

/// `⟨r⟩` for a scalar.
pub fn bracket1(r: f64) -> f64 {
    r.hypot(1.0)
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(config(format!("alpha must lie in (0, 2], got {alpha}")))
    }
}

/// Rescaled position variable: `ln⟨x⟩` for α = 2, `⟨x⟩^{1-α/2}` for α < 2.
pub fn p_alpha(x: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(p_alpha_of_bracket(bracket(x), alpha))
}

pub(crate) fn p_alpha_of_bracket(b: f64, alpha: f64) -> f64 {
    if alpha == 2.0 {
        b.ln()
    } else {
        b.powf(1.0 - alpha / 2.0)
    }
}

/// Asymptotic velocity: `2 - α` for α < 2 and `2` for α = 2.
pub fn sigma_alpha(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(if alpha == 2.0 { 2.0 } else { 2.0 - alpha })
}

/// Classical escape exponent `2/(2-α)`; infinite (exponential growth) at α = 2.
pub fn escape_exponent_theory(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(if alpha == 2.0 { f64::INFINITY } else { 2.0 / (2.0 - alpha) })
}

/// Largest observed `|⟨x⟩^α - |x|^α| / ⟨x⟩^{α-2}` over `|x| ≥ 1`, `α ∈ (0,2]`.
/// Attained at α = 2 where the difference is exactly 1.
pub const REGULARIZATION_BOUND: f64 = 1.0;

/// The repulsive reference potential `-⟨x⟩^α` (or `-|x|^α` when not regularized).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepulsiveSpec {
    pub alpha: f64,
    pub regularized: bool,
}

impl RepulsiveSpec {
    pub fn new(alpha: f64, regularized: bool) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(RepulsiveSpec { alpha, regularized })
    }

    /// Regularized `-⟨x⟩^α`, the canonical choice.
    pub fn regularized(alpha: f64) -> Result<Self> {
        Self::new(alpha, true)
    }

    fn radial(&self, x: &[f64]) -> f64 {
        if self.regularized {
            bracket(x)
        } else {
            x.iter().map(|v| v * v).sum::<f64>().sqrt()
        }
    }

    /// `U(x) = -⟨x⟩^α`.
    pub fn potential(&self, x: &[f64]) -> f64 {
        -self.radial(x).powf(self.alpha)
    }

    /// `∇U(x) = -α x ⟨x⟩^{α-2}`. For the exact `|x|^α` the origin maps to 0.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let r = self.radial(x);
        if r == 0.0 {
            return vec![0.0; x.len()];
        }
        let c = -self.alpha * r.powf(self.alpha - 2.0);
        x.iter().map(|v| c * v).collect()
    }

    pub fn sigma(&self) -> f64 {
        sigma_alpha(self.alpha).expect("validated alpha")
    }
}

/// One coordinate of a quadratic Hamiltonian `-Δ + U(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sector {
    /// `-ω² x²`
    Hyperbolic { omega: f64 },
    /// `+ω² x²`
    Trigonometric { omega: f64 },
    /// `E x`
    Stark { field: f64 },
    Free,
}

/// `U(x) = -Σ_{n₋} ω²x² + Σ_{n₊} ω²x² + Σ_{n_E} E x`, coordinates ordered by sector;
/// remaining coordinates are free.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSpec {
    pub dims: usize,
    pub n_minus: usize,
    pub n_plus: usize,
    /// `ω_k` for the first `n₋ + n₊` coordinates.
    pub omegas: Vec<f64>,
    /// `E_k` for the Stark coordinates (`n_E = fields.len()`).
    pub fields: Vec<f64>,
}

impl QuadraticSpec {
    pub fn new(
        dims: usize,
        n_minus: usize,
        n_plus: usize,
        omegas: Vec<f64>,
        fields: Vec<f64>,
    ) -> Result<Self> {
        let spec = QuadraticSpec {
            dims,
            n_minus,
            n_plus,
            omegas,
            fields,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `n₋ = dims`, every coordinate an inverted oscillator.
    pub fn inverted(omegas: Vec<f64>) -> Result<Self> {
        let n = omegas.len();
        Self::new(n, n, 0, omegas, vec![])
    }

    pub fn free(dims: usize) -> Result<Self> {
        Self::new(dims, 0, 0, vec![], vec![])
    }

    pub fn stark(fields: Vec<f64>) -> Result<Self> {
        let n = fields.len();
        Self::new(n, 0, 0, vec![], fields)
    }

    pub fn n_e(&self) -> usize {
        self.fields.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims == 0 {
            return Err(config("quadratic spec needs at least one dimension"));
        }
        if self.n_minus + self.n_plus + self.n_e() > self.dims {
            return Err(config(format!(
                "n- + n+ + nE = {} exceeds the dimension {}",
                self.n_minus + self.n_plus + self.n_e(),
                self.dims
            )));
        }
        if self.omegas.len() != self.n_minus + self.n_plus {
            return Err(config(format!(
                "expected {} frequencies, got {}",
                self.n_minus + self.n_plus,
                self.omegas.len()
            )));
        }
        if let Some(w) = self.omegas.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(config(format!("frequencies must be positive, got {w}")));
        }
        if let Some(e) = self.fields.iter().find(|e| **e == 0.0 || !e.is_finite()) {
            return Err(config(format!("Stark fields must be nonzero, got {e}")));
        }
        Ok(())
    }

    pub fn sector(&self, k: usize) -> Sector {
        let q = self.n_minus + self.n_plus;
        if k < self.n_minus {
            Sector::Hyperbolic {
                omega: self.omegas[k],
            }
        } else if k < q {
            Sector::Trigonometric {
                omega: self.omegas[k],
            }
        } else if k < q + self.n_e() {
            Sector::Stark {
                field: self.fields[k - q],
            }
        } else {
            Sector::Free
        }
    }

    pub fn sectors(&self) -> Vec<Sector> {
        (0..self.dims).map(|k| self.sector(k)).collect()
    }

    /// `|E|²` over the Stark coordinates.
    pub fn field_norm_sqr(&self) -> f64 {
        self.fields.iter().map(|e| e * e).sum()
    }

    pub fn potential(&self, x: &[f64]) -> f64 {
        x.iter()
            .enumerate()
            .map(|(k, &xk)| match self.sector(k) {
                Sector::Hyperbolic { omega } => -omega * omega * xk * xk,
                Sector::Trigonometric { omega } => omega * omega * xk * xk,
                Sector::Stark { field } => field * xk,
                Sector::Free => 0.0,
            })
            .sum()
    }
}

/// `U(x)` of a quadratic spec; the point must have `spec.dims` coordinates.
pub fn eval_quadratic(x: &[f64], spec: &QuadraticSpec) -> Result<f64> {
    if x.len() != spec.dims {
        return Err(config(format!(
            "point has {} coordinates, spec has {}",
            x.len(),
            spec.dims
        )));
    }
    Ok(spec.potential(x))
}

/// Radial (or coordinate-wise, for tables) profile used to build perturbations.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Zero,
    /// `A ⟨x⟩^{-p}`
    Power { amplitude: f64, exponent: f64 },
    /// `A ⟨ln⟨x⟩⟩^{-p}`
    LogPower { amplitude: f64, exponent: f64 },
    /// `A ⟨p_α(x)⟩^{-p}`
    PalphaPower { amplitude: f64, alpha: f64, exponent: f64 },
    /// `A exp(-|x|²/(2w²))`
    Gaussian { amplitude: f64, width: f64 },
    /// `h exp(1 - 1/(1-|x|²/R²))` inside `|x| < R`, zero outside; peak value `h`.
    CompactBump { height: f64, radius: f64 },
    /// Piecewise-linear in `|x|` through `(radii, values)`, zero beyond the last radius.
    Table { radii: Vec<f64>, values: Vec<f64> },
}

impl Profile {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        match self {
            Profile::Zero => 0.0,
            Profile::Power { amplitude, exponent } => amplitude * (1.0 + r2).powf(-exponent / 2.0),
            Profile::LogPower { amplitude, exponent } => {
                let l = 0.5 * (1.0 + r2).ln();
                amplitude * (1.0 + l * l).powf(-exponent / 2.0)
            }
            Profile::PalphaPower {
                amplitude,
                alpha,
                exponent,
            } => {
                let p = p_alpha_of_bracket((1.0 + r2).sqrt(), *alpha);
                amplitude * (1.0 + p * p).powf(-exponent / 2.0)
            }
            Profile::Gaussian { amplitude, width } => amplitude * (-r2 / (2.0 * width * width)).exp(),
            Profile::CompactBump { height, radius } => {
                let u = r2 / (radius * radius);
                if u < 1.0 {
                    height * (1.0 - 1.0 / (1.0 - u)).exp()
                } else {
                    0.0
                }
            }
            Profile::Table { radii, values } => {
                let r = r2.sqrt();
                match radii.iter().position(|&ri| ri >= r) {
                    None => 0.0,
                    Some(0) => values[0],
                    Some(i) => {
                        let s = (r - radii[i - 1]) / (radii[i] - radii[i - 1]);
                        values[i - 1] + s * (values[i] - values[i - 1])
                    }
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(config(format!("{what} must be finite")))
            }
        };
        match self {
            Profile::Zero => Ok(()),
            Profile::Power { amplitude, exponent } | Profile::LogPower { amplitude, exponent } => {
                finite(*amplitude, "amplitude")?;
                if *exponent < 0.0 {
                    return Err(config("decay exponent must be nonnegative"));
                }
                Ok(())
            }
            Profile::PalphaPower {
                amplitude,
                alpha,
                exponent,
            } => {
                finite(*amplitude, "amplitude")?;
                check_alpha(*alpha)?;
                if *exponent < 0.0 {
                    return Err(config("decay exponent must be nonnegative"));
                }
                Ok(())
            }
            Profile::Gaussian { amplitude, width } => {
                finite(*amplitude, "amplitude")?;
                if !(*width > 0.0) {
                    return Err(config("gaussian width must be positive"));
                }
                Ok(())
            }
            Profile::CompactBump { height, radius } => {
                finite(*height, "bump height")?;
                if !(*radius > 0.0) {
                    return Err(config("bump radius must be positive"));
                }
                Ok(())
            }
            Profile::Table { radii, values } => {
                if radii.len() != values.len() || radii.is_empty() {
                    return Err(config("table needs matching, nonempty radii and values"));
                }
                if radii.windows(2).any(|w| !(w[1] > w[0])) || radii[0] < 0.0 {
                    return Err(config("table radii must be nonnegative and increasing"));
                }
                values.iter().try_for_each(|v| finite(*v, "table value"))
            }
        }
    }

    /// Radius beyond which the profile vanishes identically, if any.
    pub fn support_radius(&self) -> Option<f64> {
        match self {
            Profile::Zero => Some(0.0),
            Profile::CompactBump { radius, .. } => Some(*radius),
            Profile::Table { radii, values } => {
                let last = values.iter().rposition(|v| *v != 0.0);
                Some(match last {
                    None => 0.0,
                    Some(i) if i + 1 < radii.len() => radii[i + 1],
                    Some(i) => radii[i],
                })
            }
            _ => None,
        }
    }
}

/// Compactly supported part `V¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactPart {
    pub profile: Profile,
    pub radius: f64,
}

/// Bounded short-range part `V²` with its claimed decay margin `ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShortRangePart {
    pub profile: Profile,
    pub epsilon: f64,
}

/// Per-coordinate factor of a product-decay potential `W`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayFactor {
    One,
    /// `⟨ln⟨x_j⟩⟩^{-β}` (inverted-oscillator directions)
    Log { beta: f64 },
    /// `⟨x_j⟩^{-β/2}` (Stark directions)
    Stark { beta: f64 },
    /// `⟨x_j⟩^{-β}` (free directions)
    Free { beta: f64 },
}

impl DecayFactor {
    pub fn eval(&self, xj: f64) -> f64 {
        match *self {
            DecayFactor::One => 1.0,
            DecayFactor::Log { beta } => {
                let l = bracket1(xj).ln();
                (1.0 + l * l).powf(-beta / 2.0)
            }
            DecayFactor::Stark { beta } => bracket1(xj).powf(-beta / 2.0),
            DecayFactor::Free { beta } => bracket1(xj).powf(-beta),
        }
    }

    pub fn beta(&self) -> f64 {
        match *self {
            DecayFactor::One => 0.0,
            DecayFactor::Log { beta } | DecayFactor::Stark { beta } | DecayFactor::Free { beta } => beta,
        }
    }
}

/// `W(x) = A Π_j w_j(x_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductDecay {
    pub amplitude: f64,
    pub factors: Vec<DecayFactor>,
}

impl ProductDecay {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.amplitude
            * self
                .factors
                .iter()
                .zip(x)
                .map(|(f, &xj)| f.eval(xj))
                .product::<f64>()
    }

    /// `Σ β_j`; integrability of the Cook integrand needs this above 1.
    pub fn total_beta(&self) -> f64 {
        self.factors.iter().map(|f| f.beta()).sum()
    }
}

/// `V = V¹ + V² + W`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PerturbationSpec {
    pub compact: Option<CompactPart>,
    pub short_range: Option<ShortRangePart>,
    pub product: Option<ProductDecay>,
}

impl PerturbationSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn compact(profile: Profile, radius: f64) -> Result<Self> {
        let spec = PerturbationSpec {
            compact: Some(CompactPart { profile, radius }),
            ..Default::default()
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn short_range(profile: Profile, epsilon: f64) -> Result<Self> {
        let spec = PerturbationSpec {
            short_range: Some(ShortRangePart { profile, epsilon }),
            ..Default::default()
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn product(amplitude: f64, factors: Vec<DecayFactor>) -> Result<Self> {
        let spec = PerturbationSpec {
            product: Some(ProductDecay { amplitude, factors }),
            ..Default::default()
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(c) = &self.compact {
            c.profile.validate()?;
            if !(c.radius > 0.0) {
                return Err(config("compact part needs a positive support radius"));
            }
            match c.profile.support_radius() {
                Some(r) if r <= c.radius => {}
                Some(r) => {
                    return Err(config(format!(
                        "compact part does not vanish outside radius {} (support extends to {r})",
                        c.radius
                    )))
                }
                None => {
                    return Err(config(
                        "compact part must use a compactly supported profile (bump or table)",
                    ))
                }
            }
        }
        if let Some(s) = &self.short_range {
            s.profile.validate()?;
            if s.epsilon < 0.0 {
                return Err(config("short-range margin epsilon must be nonnegative"));
            }
        }
        if let Some(w) = &self.product {
            if !w.amplitude.is_finite() {
                return Err(config("product amplitude must be finite"));
            }
            if w.factors.iter().any(|f| f.beta() < 0.0) {
                return Err(config("decay exponents beta_j must be nonnegative"));
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        let c = self.compact.as_ref().map_or(true, |c| c.profile == Profile::Zero);
        let s = self.short_range.as_ref().map_or(true, |s| s.profile == Profile::Zero);
        let w = self.product.as_ref().map_or(true, |w| w.amplitude == 0.0);
        c && s && w
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut v = 0.0;
        if let Some(c) = &self.compact {
            v += c.profile.eval(x);
        }
        if let Some(s) = &self.short_range {
            v += s.profile.eval(x);
        }
        if let Some(w) = &self.product {
            v += w.eval(x);
        }
        v
    }

    /// Samples on the grid; fails if any sample is non-finite.
    pub fn sample(&self, grid: &Grid) -> Result<Vec<f64>> {
        let s = grid.sample(|x| self.eval(x));
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalState("perturbation is unbounded on the lattice".into()));
        }
        Ok(s)
    }
}

/// Outcome of a log-log decay fit of `|V²|` against `p_α(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayClass {
    /// Fitted slope `s`; `-∞` when every sample vanished.
    pub slope: f64,
    /// `ε̂ = -s - 1`.
    pub epsilon: f64,
    pub short_range: bool,
    /// Every sample in the window was an exact zero.
    pub infinite_decay: bool,
    pub points_used: usize,
}

/// Dead zone around the long/short-range boundary `s = -1`.
pub const DECAY_MARGIN: f64 = 0.05;

/// Fits `ln|V²|` against `ln p_α(x)` over samples `(|x|, V²(x))` whose `p_α`
/// lies in `window`. Exact zeros are skipped.
pub fn classify_decay(samples: &[(f64, f64)], alpha: f64, window: (f64, f64)) -> Result<DecayClass> {
    check_alpha(alpha)?;
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(config("decay window must satisfy 0 < lo < hi"));
    }
    let in_window: Vec<(f64, f64)> = samples
        .iter()
        .map(|&(r, v)| (p_alpha_of_bracket(bracket1(r), alpha), v))
        .filter(|(p, _)| *p >= lo && *p <= hi)
        .collect();
    let (pmin, pmax) = in_window
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), (p, _)| (a.min(*p), b.max(*p)));
    if in_window.len() < 2 || pmax < 10.0 * pmin {
        return Err(config("decay samples must span at least one decade of p_alpha"));
    }
    let nonzero: Vec<(f64, f64)> = in_window.into_iter().filter(|(_, v)| *v != 0.0).collect();
    if nonzero.is_empty() {
        return Ok(DecayClass {
            slope: f64::NEG_INFINITY,
            epsilon: f64::INFINITY,
            short_range: true,
            infinite_decay: true,
            points_used: 0,
        });
    }
    let lx: Vec<f64> = nonzero.iter().map(|(p, _)| p.ln()).collect();
    let ly: Vec<f64> = nonzero.iter().map(|(_, v)| v.abs().ln()).collect();
    let (slope, _) = linear_fit(&lx, &ly)?;
    Ok(DecayClass {
        slope,
        epsilon: -slope - 1.0,
        short_range: slope <= -1.0 - DECAY_MARGIN,
        infinite_decay: false,
        points_used: nonzero.len(),
    })
}
