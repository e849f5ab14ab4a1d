//! Phase-space symbols, Poisson brackets and positive-commutator scans on
//! energy shells of `h = |ξ|² - ⟨x⟩^α`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{config, Error, Result};
use crate::potentials::{bracket, check_alpha, sigma_alpha};

type ValueFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64], &[f64]) -> (Vec<f64>, Vec<f64>) + Send + Sync;

/// Relative step of the central-difference fallback.
pub const FD_STEP: f64 = 1e-5;

/// Real function on phase space with an optional analytic gradient.
#[derive(Clone)]
pub struct SymbolFn {
    value: Arc<ValueFn>,
    grad: Option<Arc<GradFn>>,
}

impl std::fmt::Debug for SymbolFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SymbolFn").field("analytic", &self.grad.is_some()).finish()
    }
}

impl SymbolFn {
    pub fn new<F>(value: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        SymbolFn { value: Arc::new(value), grad: None }
    }

    /// Gradient closure returns `(∂_x, ∂_ξ)`.
    pub fn with_gradient<F, G>(value: F, grad: G) -> Self
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64], &[f64]) -> (Vec<f64>, Vec<f64>) + Send + Sync + 'static,
    {
        SymbolFn { value: Arc::new(value), grad: Some(Arc::new(grad)) }
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.grad.is_some()
    }

    pub fn eval(&self, x: &[f64], xi: &[f64]) -> f64 {
        (self.value)(x, xi)
    }

    /// Linear combination `a·self + b·other` (finite-difference gradient
    /// unless both carry analytic ones).
    pub fn combine(&self, a: f64, other: &SymbolFn, b: f64) -> SymbolFn {
        let (f, g) = (self.value.clone(), other.value.clone());
        let value = move |x: &[f64], xi: &[f64]| a * f(x, xi) + b * g(x, xi);
        match (&self.grad, &other.grad) {
            (Some(df), Some(dg)) => {
                let (df, dg) = (df.clone(), dg.clone());
                SymbolFn::with_gradient(value, move |x, xi| {
                    let (fx, fk) = df(x, xi);
                    let (gx, gk) = dg(x, xi);
                    let mix = |u: Vec<f64>, v: Vec<f64>| {
                        u.iter().zip(&v).map(|(p, q)| a * p + b * q).collect()
                    };
                    (mix(fx, gx), mix(fk, gk))
                })
            }
            _ => SymbolFn::new(value),
        }
    }

    /// Analytic gradient when supplied, otherwise central differences.
    pub fn gradient(&self, x: &[f64], xi: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if x.len() != xi.len() {
            return Err(config("position and momentum dimensions differ"));
        }
        match &self.grad {
            Some(g) => {
                let (gx, gk) = g(x, xi);
                if gx.iter().chain(&gk).any(|v| !v.is_finite()) {
                    return Err(Error::Derivative("non-finite analytic gradient".into()));
                }
                Ok((gx, gk))
            }
            None => self.fd_gradient(x, xi),
        }
    }

    /// Central differences with step `1e-5·max(1, |coordinate|)`.
    pub fn fd_gradient(&self, x: &[f64], xi: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let d = x.len();
        // Coordinates 0..d are positions, d..2d momenta.
        let mut z: Vec<f64> = x.iter().chain(xi).copied().collect();
        let mut g = vec![0.0; 2 * d];
        for j in 0..2 * d {
            let c = z[j];
            let h = FD_STEP * c.abs().max(1.0);
            let (up, dn) = (c + h, c - h);
            if !up.is_finite() || !dn.is_finite() || !(up - dn > 0.0) {
                return Err(Error::Derivative(format!("difference step underflows at {c:e}")));
            }
            z[j] = up;
            let fu = (self.value)(&z[..d], &z[d..]);
            z[j] = dn;
            let fd = (self.value)(&z[..d], &z[d..]);
            z[j] = c;
            g[j] = (fu - fd) / (up - dn);
            if !g[j].is_finite() {
                return Err(Error::Derivative(format!("non-finite difference quotient at {c:e}")));
            }
        }
        let gk = g.split_off(d);
        Ok((g, gk))
    }
}

/// `{h, a} = ∂_ξh·∂_xa - ∂_xh·∂_ξa`, summed over coordinates.
pub fn poisson_bracket(h: &SymbolFn, a: &SymbolFn, x: &[f64], xi: &[f64]) -> Result<f64> {
    let (hx, hk) = h.gradient(x, xi)?;
    let (ax, ak) = a.gradient(x, xi)?;
    Ok((0..x.len()).map(|j| hk[j] * ax[j] - hx[j] * ak[j]).sum())
}

/// Smooth even bump: 1 on `[-1/4, 1/4]`, 0 outside `(-1/2, 1/2)`, built from
/// the `exp(-1/t)` smooth step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CutoffSpec;

impl CutoffSpec {
    pub const PLATEAU: f64 = 0.25;
    pub const SUPPORT: f64 = 0.5;

    fn edge(t: f64) -> f64 {
        if t > 0.0 {
            (-1.0 / t).exp()
        } else {
            0.0
        }
    }

    fn edge_prime(t: f64) -> f64 {
        if t > 0.0 {
            (-1.0 / t).exp() / (t * t)
        } else {
            0.0
        }
    }

    /// Position inside the transition layer, 0 at the support edge and 1 at the plateau.
    fn layer(u: f64) -> f64 {
        (Self::SUPPORT - u.abs()) / (Self::SUPPORT - Self::PLATEAU)
    }

    pub fn eval(&self, u: f64) -> f64 {
        let t = Self::layer(u);
        if t >= 1.0 {
            return 1.0;
        }
        if t <= 0.0 {
            return 0.0;
        }
        let (a, b) = (Self::edge(t), Self::edge(1.0 - t));
        a / (a + b)
    }

    pub fn derivative(&self, u: f64) -> f64 {
        let t = Self::layer(u);
        if t >= 1.0 || t <= 0.0 {
            return 0.0;
        }
        let (a, b) = (Self::edge(t), Self::edge(1.0 - t));
        let (da, db) = (Self::edge_prime(t), Self::edge_prime(1.0 - t));
        let ds_dt = (da * b + a * db) / ((a + b) * (a + b));
        let dt_du = -u.signum() / (Self::SUPPORT - Self::PLATEAU);
        ds_dt * dt_du
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

fn norm_sqr(a: &[f64]) -> f64 {
    dot(a, a)
}

/// `ln⟨ξ+x⟩ - ln⟨ξ-x⟩` for one coordinate pair.
pub fn symbol_a2(x: f64, xi: f64) -> f64 {
    0.5 * ((1.0 + (xi + x) * (xi + x)).ln() - (1.0 + (xi - x) * (xi - x)).ln())
}

/// Sum over coordinates of `ln⟨ξ_j + ω_j x_j⟩ - ln⟨ξ_j - ω_j x_j⟩`;
/// coordinates with `ω_j = 0` do not contribute.
pub fn a2_pairs(omegas: Vec<f64>) -> SymbolFn {
    let w = omegas.clone();
    SymbolFn::with_gradient(
        move |x, xi| {
            w.iter()
                .enumerate()
                .filter(|(_, o)| **o != 0.0)
                .map(|(j, o)| symbol_a2(o * x[j], xi[j]))
                .sum()
        },
        move |x, xi| {
            let mut gx = vec![0.0; x.len()];
            let mut gk = vec![0.0; x.len()];
            for (j, &o) in omegas.iter().enumerate() {
                if o == 0.0 {
                    continue;
                }
                let (u, v) = (xi[j] + o * x[j], xi[j] - o * x[j]);
                let (pu, pv) = (u / (1.0 + u * u), v / (1.0 + v * v));
                gx[j] = o * (pu + pv);
                gk[j] = pu - pv;
            }
            (gx, gk)
        },
    )
}

/// One-dimensional `a₂`.
pub fn a2() -> SymbolFn {
    a2_pairs(vec![1.0])
}

/// `x·ξ ⟨x⟩^{-α} ψ((|ξ|² - ⟨x⟩^α)/(|ξ|² + ⟨x⟩^α))`.
pub fn symbol_a_alpha(x: &[f64], xi: &[f64], alpha: f64, cutoff: &CutoffSpec) -> f64 {
    let b = bracket(x);
    let p = b.powf(alpha);
    let s = norm_sqr(xi);
    dot(x, xi) / p * cutoff.eval((s - p) / (s + p))
}

pub fn a_alpha(alpha: f64, cutoff: CutoffSpec) -> Result<SymbolFn> {
    check_alpha(alpha)?;
    if alpha >= 2.0 {
        return Err(config("the cut-off conjugate symbol needs alpha < 2; use a2 at alpha = 2"));
    }
    Ok(SymbolFn::with_gradient(
        move |x, xi| symbol_a_alpha(x, xi, alpha, &cutoff),
        move |x, xi| {
            let b = bracket(x);
            let b2 = b * b;
            let p = b.powf(alpha);
            let s = norm_sqr(xi);
            let xk = dot(x, xi);
            let q = (s - p) / (s + p);
            let (psi, dpsi) = (cutoff.eval(q), cutoff.derivative(q));
            let g = xk / p;
            let sp2 = (s + p) * (s + p);
            let dq_ds = 2.0 * p / sp2;
            let dq_dp = -2.0 * s / sp2;
            let gx = x
                .iter()
                .zip(xi)
                .map(|(&xj, &kj)| {
                    let dg = kj / p - alpha * xk * xj / (p * b2);
                    let dq = dq_dp * alpha * xj * p / b2;
                    dg * psi + g * dpsi * dq
                })
                .collect();
            let gk = x
                .iter()
                .zip(xi)
                .map(|(&xj, &kj)| xj / p * psi + g * dpsi * dq_ds * 2.0 * kj)
                .collect();
            (gx, gk)
        },
    ))
}

/// `h = |ξ|² - ⟨x⟩^α`.
pub fn hamiltonian(alpha: f64) -> Result<SymbolFn> {
    check_alpha(alpha)?;
    Ok(SymbolFn::with_gradient(
        move |x, xi| norm_sqr(xi) - bracket(x).powf(alpha),
        move |x, xi| {
            let c = -alpha * bracket(x).powf(alpha - 2.0);
            (x.iter().map(|v| c * v).collect(), xi.iter().map(|v| 2.0 * v).collect())
        },
    ))
}

/// `h = |ξ|² - Σ ω_j² x_j²`, the quadratic saddle matching [`a2_pairs`].
pub fn quadratic_hamiltonian(omegas: Vec<f64>) -> SymbolFn {
    let w = omegas.clone();
    SymbolFn::with_gradient(
        move |x, xi| {
            norm_sqr(xi) - x.iter().zip(&w).map(|(v, o)| o * o * v * v).sum::<f64>()
        },
        move |x, xi| {
            (
                x.iter().zip(&omegas).map(|(v, o)| -2.0 * o * o * v).collect(),
                xi.iter().map(|v| 2.0 * v).collect(),
            )
        },
    )
}

/// One-dimensional model pair for `x > 0`: `h = ξ² - x^α`, `a = ξ x^{1-α}`.
pub fn heuristic_pair(alpha: f64) -> Result<(SymbolFn, SymbolFn)> {
    check_alpha(alpha)?;
    let h = SymbolFn::with_gradient(
        move |x, xi| xi[0] * xi[0] - x[0].powf(alpha),
        move |x, xi| (vec![-alpha * x[0].powf(alpha - 1.0)], vec![2.0 * xi[0]]),
    );
    let a = SymbolFn::with_gradient(
        move |x, xi| xi[0] * x[0].powf(1.0 - alpha),
        move |x, xi| (vec![(1.0 - alpha) * xi[0] * x[0].powf(-alpha)], vec![x[0].powf(1.0 - alpha)]),
    );
    Ok((h, a))
}

/// Closed form of the model bracket on the shell `ξ² - x^α = E`.
pub fn heuristic_bracket(alpha: f64, energy: f64, x: f64) -> f64 {
    2.0 - alpha + 2.0 * energy * (1.0 - alpha) * x.powf(-alpha)
}

/// `v_α = σ_α x·ξ / ⟨x⟩^{1+α/2}`.
pub fn symbol_v_alpha(x: &[f64], xi: &[f64], alpha: f64) -> Result<f64> {
    let s = sigma_alpha(alpha)?;
    Ok(s * dot(x, xi) / bracket(x).powf(1.0 + alpha / 2.0))
}

pub fn v_alpha(alpha: f64) -> Result<SymbolFn> {
    let s = sigma_alpha(alpha)?;
    Ok(SymbolFn::with_gradient(
        move |x, xi| s * dot(x, xi) / bracket(x).powf(1.0 + alpha / 2.0),
        move |x, xi| {
            let b = bracket(x);
            let m = b.powf(1.0 + alpha / 2.0);
            let xk = dot(x, xi);
            let gx = x
                .iter()
                .zip(xi)
                .map(|(&xj, &kj)| s * (kj / m - (1.0 + alpha / 2.0) * xk * xj / (m * b * b)))
                .collect();
            (gx, x.iter().map(|&xj| s * xj / m).collect())
        },
    ))
}

/// Acceleration of the velocity symbol:
/// `σ_α (2|ξ|²/⟨x⟩^{1+α/2} - (2+α)(x·ξ)²/⟨x⟩^{3+α/2} + α|x|²/⟨x⟩^{3-α/2})`.
pub fn symbol_accel_alpha(x: &[f64], xi: &[f64], alpha: f64) -> Result<f64> {
    let s = sigma_alpha(alpha)?;
    let b = bracket(x);
    let xk = dot(x, xi);
    Ok(s * (2.0 * norm_sqr(xi) / b.powf(1.0 + alpha / 2.0)
        - (2.0 + alpha) * xk * xk / b.powf(3.0 + alpha / 2.0)
        + alpha * norm_sqr(x) / b.powf(3.0 - alpha / 2.0)))
}

pub fn accel_alpha(alpha: f64) -> Result<SymbolFn> {
    check_alpha(alpha)?;
    Ok(SymbolFn::new(move |x, xi| {
        symbol_accel_alpha(x, xi, alpha).expect("validated alpha")
    }))
}

/// One shell sample of a scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellSample {
    pub x: f64,
    pub xi: f64,
    pub bracket: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShellScan {
    pub alpha: f64,
    pub energy: f64,
    pub eta: f64,
    /// `σ_α - η`.
    pub target: f64,
    pub min_bracket: f64,
    pub violating_points: usize,
    /// Radius beyond which every sample satisfies the bound; `None` if the
    /// outermost sample violates it.
    pub r_threshold: Option<f64>,
    /// The lower radius was raised so that `⟨x⟩^α + E ≥ 0`.
    pub restricted: bool,
    /// Radius range actually sampled.
    pub radius_range: (f64, f64),
    pub samples: Vec<ShellSample>,
}

impl ShellScan {
    /// Minimum of the bracket over samples with `|x| > R`.
    pub fn min_beyond_threshold(&self) -> Option<f64> {
        let r = self.r_threshold?;
        self.samples
            .iter()
            .filter(|s| s.x.abs() > r)
            .map(|s| s.bracket)
            .reduce(f64::min)
    }

    pub fn csv_header() -> Vec<String> {
        ["x0", "xi0", "bracket", "shell_E"].iter().map(|s| s.to_string()).collect()
    }

    pub fn csv_rows(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|s| vec![s.x, s.xi, s.bracket, self.energy]).collect()
    }
}

/// Samples the 1-D shell `ξ² = ⟨x⟩^α + E` on log-spaced `⟨x⟩`, both signs of
/// `x` and both momentum branches, and evaluates `{h, a₂}` (α = 2) or
/// `{h, a_α}` (α < 2).
pub fn mourre_shell_scan(
    alpha: f64,
    energy: f64,
    eta: f64,
    radius_range: (f64, f64),
    samples: usize,
) -> Result<ShellScan> {
    let sigma = sigma_alpha(alpha)?;
    if !(eta > 0.0) {
        return Err(config("eta must be positive"));
    }
    let (rmin, rmax) = radius_range;
    if !(rmin >= 0.0 && rmax > rmin && rmax.is_finite()) {
        return Err(config("radius range must satisfy 0 <= r_min < r_max"));
    }
    if samples < 4 {
        return Err(config("a shell scan needs at least 4 samples"));
    }
    if !energy.is_finite() {
        return Err(config("shell energy must be finite"));
    }
    let mut bmin = (1.0 + rmin * rmin).sqrt();
    let bmax = (1.0 + rmax * rmax).sqrt();
    let mut restricted = false;
    if energy < 0.0 {
        let need = (-energy).powf(1.0 / alpha);
        if need >= bmax {
            return Err(config(format!(
                "empty shell: <x>^{alpha} + {energy} < 0 on the whole radius range"
            )));
        }
        if need > bmin {
            bmin = need;
            restricted = true;
        }
    }
    let h = hamiltonian(alpha)?;
    let a = if alpha == 2.0 { a2() } else { a_alpha(alpha, CutoffSpec)? };
    let n_r = samples.div_ceil(4);
    let (lb0, lb1) = (bmin.ln(), bmax.ln());
    let pts: Vec<(f64, f64)> = (0..samples)
        .map(|i| {
            let k = i / 4;
            let f = if n_r > 1 { k as f64 / (n_r - 1) as f64 } else { 0.0 };
            let b = (lb0 + f * (lb1 - lb0)).exp();
            let r = (b * b - 1.0).max(0.0).sqrt();
            let p = (b.powf(alpha) + energy).max(0.0).sqrt();
            let sx = if i % 2 == 0 { 1.0 } else { -1.0 };
            let sk = if (i / 2) % 2 == 0 { 1.0 } else { -1.0 };
            (sx * r, sk * p)
        })
        .collect();
    let out: Vec<ShellSample> = pts
        .par_iter()
        .map(|&(x, xi)| {
            poisson_bracket(&h, &a, &[x], &[xi]).map(|b| ShellSample { x, xi, bracket: b })
        })
        .collect::<Result<_>>()?;
    let target = sigma - eta;
    let min_bracket = out.iter().map(|s| s.bracket).fold(f64::INFINITY, f64::min);
    let violating: Vec<&ShellSample> = out.iter().filter(|s| s.bracket < target).collect();
    let r_hi = (bmax * bmax - 1.0).max(0.0).sqrt();
    let r_lo = (bmin * bmin - 1.0).max(0.0).sqrt();
    let r_threshold = match violating.iter().map(|s| s.x.abs()).reduce(f64::max) {
        None => Some(r_lo),
        Some(r) if r >= r_hi * (1.0 - 1e-12) => None,
        Some(r) => Some(r),
    };
    Ok(ShellScan {
        alpha,
        energy,
        eta,
        target,
        min_bracket,
        violating_points: violating.len(),
        r_threshold,
        restricted,
        radius_range: (r_lo, r_hi),
        samples: out,
    })
}

/// Smallest `C` with `|v_α| ≤ σ_α + C⟨x⟩^{(β-1)α/2}` over shell samples with
/// `|x|` in the range.
pub fn velocity_bound_constant(
    alpha: f64,
    energy: f64,
    beta: f64,
    radius_range: (f64, f64),
    samples: usize,
) -> Result<f64> {
    let sigma = sigma_alpha(alpha)?;
    let (rmin, rmax) = radius_range;
    if !(rmin >= 0.0 && rmax > rmin) || samples < 2 {
        return Err(config("need 0 <= r_min < r_max and at least 2 samples"));
    }
    let mut c: f64 = 0.0;
    for i in 0..samples {
        let r = rmin * (rmax / rmin.max(1e-300)).powf(i as f64 / (samples - 1) as f64);
        let r = if rmin == 0.0 { rmax * i as f64 / (samples - 1) as f64 } else { r };
        let b = bracket(&[r]);
        let p2 = b.powf(alpha) + energy;
        if p2 < 0.0 {
            continue;
        }
        let v = symbol_v_alpha(&[r], &[p2.sqrt()], alpha)?.abs();
        c = c.max((v - sigma) / b.powf((beta - 1.0) * alpha / 2.0));
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{flow, PhasePoint};
    use crate::potentials::RepulsiveSpec;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_point(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> (Vec<f64>, Vec<f64>) {
        let x = (0..d).map(|_| rng.gen_range(-scale..scale)).collect();
        let k = (0..d).map(|_| rng.gen_range(-scale..scale)).collect();
        (x, k)
    }

    #[test]
    fn a2_examples() {
        assert_eq!(symbol_a2(0.0, 3.7), 0.0);
        assert!((symbol_a2(1.0, 1.0) - 5f64.sqrt().ln()).abs() < 1e-15);
        assert!((symbol_a2(1.0, 1.0) - 0.8047).abs() < 1e-4);
        assert_eq!(symbol_a2(-0.7, 1.3), -symbol_a2(0.7, 1.3));
    }

    #[test]
    fn a_alpha_examples() {
        let c = CutoffSpec;
        let xi = 17f64.powf(0.25);
        let v = symbol_a_alpha(&[4.0], &[xi], 1.0, &c);
        assert!((v - 4.0 / 17f64.powf(0.25)).abs() < 1e-14);
        assert!((v - 1.96991).abs() < 1e-5);
        // ξ² = 3⟨x⟩^α puts the cutoff argument at 1/2.
        let b = bracket(&[2.0]).powf(1.5);
        assert_eq!(symbol_a_alpha(&[2.0], &[(3.0 * b).sqrt()], 1.5, &c), 0.0);
        assert_eq!(symbol_a_alpha(&[2.0], &[(5.0 * b).sqrt()], 1.5, &c), 0.0);
    }

    #[test]
    fn cutoff_shape() {
        let c = CutoffSpec;
        assert_eq!(c.eval(0.0), 1.0);
        assert_eq!(c.eval(0.25), 1.0);
        assert_eq!(c.eval(-0.5), 0.0);
        assert_eq!(c.eval(0.7), 0.0);
        for i in 0..=1000 {
            let u = -0.6 + 1.2 * i as f64 / 1000.0;
            let v = c.eval(u);
            assert!((0.0..=1.0).contains(&v));
            assert_eq!(v, c.eval(-u));
            let h = 1e-6;
            let fd = (c.eval(u + h) - c.eval(u - h)) / (2.0 * h);
            assert!((fd - c.derivative(u)).abs() < 1e-6, "u {u}");
        }
    }

    #[test]
    fn analytic_gradients_match_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let symbols: Vec<(SymbolFn, usize)> = vec![
            (a2(), 1),
            (a2_pairs(vec![1.0, 0.5, 0.0]), 3),
            (a_alpha(1.0, CutoffSpec).unwrap(), 2),
            (a_alpha(0.5, CutoffSpec).unwrap(), 1),
            (hamiltonian(1.5).unwrap(), 2),
            (quadratic_hamiltonian(vec![1.0, 2.0]), 2),
            (v_alpha(2.0).unwrap(), 2),
            (v_alpha(0.7).unwrap(), 3),
        ];
        for (s, d) in &symbols {
            for _ in 0..1000 {
                let (x, k) = rand_point(&mut rng, *d, 4.0);
                let (ax, ak) = s.gradient(&x, &k).unwrap();
                let (fx, fk) = s.fd_gradient(&x, &k).unwrap();
                for (a, f) in ax.iter().chain(&ak).zip(fx.iter().chain(&fk)) {
                    assert!((a - f).abs() <= 1e-5 * a.abs().max(1.0), "{a} vs {f}");
                }
            }
        }
        // a_α near the cut-off layer, where the ψ' terms matter.
        let s = a_alpha(1.2, CutoffSpec).unwrap();
        for _ in 0..1000 {
            let x = rng.gen_range(-5.0..5.0);
            let p = bracket(&[x]).powf(1.2);
            let q: f64 = rng.gen_range(-0.55..0.55);
            let xi = (p * (1.0 + q) / (1.0 - q)).sqrt();
            let (ax, ak) = s.gradient(&[x], &[xi]).unwrap();
            let (fx, fk) = s.fd_gradient(&[x], &[xi]).unwrap();
            assert!((ax[0] - fx[0]).abs() <= 1e-5 * ax[0].abs().max(1.0));
            assert!((ak[0] - fk[0]).abs() <= 1e-5 * ak[0].abs().max(1.0));
        }
    }

    #[test]
    fn difference_step_errors() {
        let s = SymbolFn::new(|x, _| x[0]);
        assert!(matches!(s.fd_gradient(&[f64::NAN], &[0.0]), Err(Error::Derivative(_))));
        let s = SymbolFn::new(|x, _| 1.0 / x[0]);
        assert!(matches!(s.fd_gradient(&[f64::MAX], &[0.0]), Err(Error::Derivative(_))));
    }

    #[test]
    fn heuristic_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let alpha = rng.gen_range(0.1..2.0);
            let e = rng.gen_range(-1.0..1.0);
            let (h, a) = heuristic_pair(alpha).unwrap();
            let x: f64 = rng.gen_range(1.5f64..50.0);
            let p2 = x.powf(alpha) + e;
            if p2 < 0.0 {
                continue;
            }
            for xi in [p2.sqrt(), -p2.sqrt()] {
                let b = poisson_bracket(&h, &a, &[x], &[xi]).unwrap();
                let want = heuristic_bracket(alpha, e, x);
                assert!((b - want).abs() <= 1e-10 * want.abs().max(1.0), "{b} vs {want}");
            }
        }
        let (h, a) = heuristic_pair(1.0).unwrap();
        for (x, xi) in [(2.0, 7.0), (9.0, -1.0)] {
            assert!((poisson_bracket(&h, &a, &[x], &[xi]).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn a2_bracket_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = hamiltonian(2.0).unwrap();
        for _ in 0..1000 {
            let (x, k) = rand_point(&mut rng, 1, 20.0);
            let (u, v) = (k[0] + x[0], k[0] - x[0]);
            let want = 2.0 * u * u / (1.0 + u * u) + 2.0 * v * v / (1.0 + v * v);
            let got = poisson_bracket(&h, &a2(), &x, &k).unwrap();
            assert!((got - want).abs() <= 1e-8);
            assert!(got <= 4.0);
        }
        let w = vec![1.0, 2.5];
        let h = quadratic_hamiltonian(w.clone());
        for _ in 0..1000 {
            let (x, k) = rand_point(&mut rng, 2, 10.0);
            let want: f64 = (0..2)
                .map(|j| {
                    let (u, v) = (k[j] + w[j] * x[j], k[j] - w[j] * x[j]);
                    2.0 * w[j] * (u * u / (1.0 + u * u) + v * v / (1.0 + v * v))
                })
                .sum();
            let got = poisson_bracket(&h, &a2_pairs(w.clone()), &x, &k).unwrap();
            assert!((got - want).abs() <= 1e-8 * want.max(1.0));
        }
    }

    #[test]
    fn acceleration_is_bracket_of_velocity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let alpha = rng.gen_range(0.05..=2.0);
            let d = rng.gen_range(1..=3);
            let (x, k) = rand_point(&mut rng, d, 10.0);
            let h = hamiltonian(alpha).unwrap();
            let got = poisson_bracket(&h, &v_alpha(alpha).unwrap(), &x, &k).unwrap();
            let want = symbol_accel_alpha(&x, &k, alpha).unwrap();
            assert!((got - want).abs() <= 1e-8 * want.abs().max(1.0), "{got} vs {want}");
        }
        assert_eq!(symbol_v_alpha(&[3.0, 1.0], &[0.0, 0.0], 1.0).unwrap(), 0.0);
    }

    #[test]
    fn bracket_bilinear_and_antisymmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let h1 = hamiltonian(1.3).unwrap();
        let h2 = quadratic_hamiltonian(vec![0.8, 1.7]);
        let a1 = v_alpha(1.3).unwrap();
        let a2s = a2_pairs(vec![0.8, 1.7]);
        for _ in 0..500 {
            let (x, k) = rand_point(&mut rng, 2, 5.0);
            let (p, q) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let hc = h1.combine(p, &h2, q);
            let lhs = poisson_bracket(&hc, &a1, &x, &k).unwrap();
            let rhs = p * poisson_bracket(&h1, &a1, &x, &k).unwrap()
                + q * poisson_bracket(&h2, &a1, &x, &k).unwrap();
            assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0));
            let ac = a1.combine(p, &a2s, q);
            let lhs = poisson_bracket(&h1, &ac, &x, &k).unwrap();
            let rhs = p * poisson_bracket(&h1, &a1, &x, &k).unwrap()
                + q * poisson_bracket(&h1, &a2s, &x, &k).unwrap();
            assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0));
            let f = poisson_bracket(&h1, &a2s, &x, &k).unwrap();
            let b = poisson_bracket(&a2s, &h1, &x, &k).unwrap();
            assert!((f + b).abs() <= 1e-10 * f.abs().max(1.0));
        }
    }

    #[test]
    fn bracket_is_time_derivative_along_flow() {
        for alpha in [0.8, 1.5, 2.0] {
            let spec = RepulsiveSpec::regularized(alpha).unwrap();
            let h = hamiltonian(alpha).unwrap();
            let a = if alpha == 2.0 { a2() } else { a_alpha(alpha, CutoffSpec).unwrap() };
            let v = v_alpha(alpha).unwrap();
            let dt = 1e-4;
            let tr = flow(&PhasePoint::one_d(0.7, 0.9).unwrap(), &spec, 2.0, dt).unwrap();
            for sym in [&a, &v] {
                for i in (1..tr.points.len() - 1).step_by(997) {
                    let f = |j: usize| sym.eval(&tr.points[j].x, &tr.points[j].xi);
                    let ddt = (f(i + 1) - f(i - 1)) / (2.0 * dt);
                    let p = &tr.points[i];
                    let b = poisson_bracket(&h, sym, &p.x, &p.xi).unwrap();
                    assert!((ddt - b).abs() <= 1e-5 * b.abs().max(1.0), "alpha {alpha}: {ddt} vs {b}");
                }
            }
        }
    }

    #[test]
    fn scan_examples() {
        let s = mourre_shell_scan(1.0, 0.0, 0.1, (5.0, 1e4), 10_000).unwrap();
        assert!(s.min_bracket >= 0.9);
        assert_eq!(s.violating_points, 0);
        assert_eq!(s.samples.len(), 10_000);
        let s = mourre_shell_scan(2.0, 1.0, 0.2, (0.0, 1e3), 10_000).unwrap();
        let r = s.r_threshold.unwrap();
        assert!(r.is_finite() && r < 1e3);
        assert!(s.min_beyond_threshold().unwrap() >= 1.8);
        let s = mourre_shell_scan(1.5, -2.0, 0.1, (0.0, 1e4), 10_000).unwrap();
        assert!(s.restricted);
        assert!((bracket(&[s.radius_range.0]).powf(1.5) - 2.0).abs() < 1e-9);
        assert!(s.min_beyond_threshold().unwrap() >= 0.4);
        assert!(s.violating_points > 0);
        assert!(matches!(mourre_shell_scan(1.0, -100.0, 0.1, (0.0, 10.0), 100), Err(Error::Config(_))));
        assert!(mourre_shell_scan(1.0, 0.0, 0.0, (0.0, 10.0), 100).is_err());
    }

    #[test]
    fn scan_reflection_invariant() {
        for (alpha, e) in [(1.0, 0.5), (2.0, -1.0), (1.5, 1.0)] {
            let s = mourre_shell_scan(alpha, e, 0.1, (0.0, 100.0), 400).unwrap();
            let h = hamiltonian(alpha).unwrap();
            let a = if alpha == 2.0 { a2() } else { a_alpha(alpha, CutoffSpec).unwrap() };
            let reflected = s
                .samples
                .iter()
                .map(|p| poisson_bracket(&h, &a, &[-p.x], &[-p.xi]).unwrap())
                .fold(f64::INFINITY, f64::min);
            assert!((reflected - s.min_bracket).abs() <= 1e-12 * s.min_bracket.abs().max(1.0));
        }
    }

    #[test]
    fn velocity_bound_constant_converges() {
        // On the shell |v_α| - σ_α ~ (σ_α E/2)⟨x⟩^{-α}, i.e. β = -1 gives a finite C.
        // At α = 2 the factor |x|/⟨x⟩ adds -σ_α/2 at the same order.
        for (alpha, e) in [(1.0, 1.0), (1.5, 0.5), (2.0, 2.0)] {
            let shift = if alpha == 2.0 { 1.0 } else { 0.0 };
            let limit = sigma_alpha(alpha).unwrap() * (e - shift) / 2.0;
            let c1 = velocity_bound_constant(alpha, e, -1.0, (10.0, 1e2), 200).unwrap();
            let c2 = velocity_bound_constant(alpha, e, -1.0, (10.0, 1e5), 2000).unwrap();
            assert!(c1 > 0.0 && c1 <= c2 * (1.0 + 1e-3), "{c1} {c2}");
            assert!((c2 / limit - 1.0).abs() <= 1e-2, "{c2} vs {limit}");
            // A faster claimed decay is not supported by the shell.
            let c3 = velocity_bound_constant(alpha, e, -2.0, (10.0, 1e5), 2000).unwrap();
            assert!(c3 > 10.0 * velocity_bound_constant(alpha, e, -2.0, (10.0, 1e2), 200).unwrap());
        }
    }

    proptest! {
        #[test]
        fn a2_antisymmetric(x in -50.0f64..50.0, k in -50.0f64..50.0) {
            prop_assert_eq!(symbol_a2(-x, k), -symbol_a2(x, k));
        }

        #[test]
        fn on_shell_cutoff_is_one(x in -100.0f64..100.0, alpha in 0.1f64..1.99) {
            let p = bracket(&[x]).powf(alpha);
            let v = symbol_a_alpha(&[x], &[p.sqrt()], alpha, &CutoffSpec);
            prop_assert!((v - x * p.sqrt() / p).abs() <= 1e-12 * v.abs().max(1.0));
        }
    }
}
