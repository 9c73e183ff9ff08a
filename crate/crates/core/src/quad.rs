//! Integration against the standard Gaussian measure
//! `dγ = (2π)^{-d/2} e^{-‖z‖²/2} dz` (unit mass, unit variance per axis).
//!
//! Tensor Gauss–Hermite rules are built for this normalization directly:
//! the Jacobi matrix of the probabilists' Hermite polynomials gives initial
//! nodes, Newton steps on the orthonormal recurrence polish them, and the
//! weights are Christoffel numbers. No `√2` rescaling from the classical
//! `e^{-t²}` convention is involved.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::scalar::Complex64;

/// Upper limit on the number of tensor nodes.
pub const MAX_RULE_POINTS: usize = 1 << 24;

/// Default points per axis for dimension `d`.
pub fn default_points_per_axis(d: usize) -> usize {
    match d {
        0..=2 => 40,
        3 => 20,
        _ => 8,
    }
}

/// `c_0 = (2π)^{d/2}`.
pub fn gaussian_normalizer(d: usize) -> f64 {
    (std::f64::consts::TAU).powf(d as f64 / 2.0)
}

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    exact_degree: usize,
}

impl QuadratureRule {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Highest per-axis polynomial degree integrated exactly.
    pub fn exact_degree(&self) -> usize {
        self.exact_degree
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.nodes.chunks(self.dim.max(1)).zip(self.weights.iter().copied())
    }

    pub fn integrate<F>(&self, mut f: F) -> Complex64
    where
        F: FnMut(&[f64]) -> Complex64,
    {
        self.iter().map(|(z, w)| f(z) * w).sum()
    }

    pub fn integrate_real<F>(&self, mut f: F) -> f64
    where
        F: FnMut(&[f64]) -> f64,
    {
        self.iter().map(|(z, w)| f(z) * w).sum()
    }

    /// Checks that the rule integrates total degree `needed` exactly.
    pub fn require_degree(&self, needed: usize) -> Result<()> {
        if needed > self.exact_degree {
            return Err(Error::RuleTooWeak { needed, available: self.exact_degree });
        }
        Ok(())
    }
}

/// Orthonormal Hermite values `he_0..he_n` at `t` for the unit Gaussian.
pub fn orthonormal_hermite(n: usize, t: f64) -> Vec<f64> {
    let mut v = Vec::with_capacity(n + 1);
    v.push(1.0);
    if n == 0 {
        return v;
    }
    v.push(t);
    for m in 1..n {
        let next = (t * v[m] - (m as f64).sqrt() * v[m - 1]) / ((m + 1) as f64).sqrt();
        v.push(next);
    }
    v
}

/// One-dimensional `q`-point Gauss rule for `dγ`.
pub fn gauss_rule_1d(q: usize) -> (Vec<f64>, Vec<f64>) {
    if q == 1 {
        return (vec![0.0], vec![1.0]);
    }
    let jacobi = DMatrix::from_fn(q, q, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = jacobi.symmetric_eigen();
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);
    for x in nodes.iter_mut() {
        for _ in 0..4 {
            let h = orthonormal_hermite(q, *x);
            let dh = (q as f64).sqrt() * h[q - 1];
            if dh == 0.0 {
                break;
            }
            *x -= h[q] / dh;
        }
    }
    // enforce the symmetry of the weight exactly
    for i in 0..q / 2 {
        let a = 0.5 * (nodes[q - 1 - i] - nodes[i]);
        nodes[i] = -a;
        nodes[q - 1 - i] = a;
    }
    if q % 2 == 1 {
        nodes[q / 2] = 0.0;
    }
    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&x| 1.0 / orthonormal_hermite(q - 1, x).iter().map(|h| h * h).sum::<f64>())
        .collect();
    for i in 0..q / 2 {
        let w = 0.5 * (weights[i] + weights[q - 1 - i]);
        weights[i] = w;
        weights[q - 1 - i] = w;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    (nodes, weights)
}

/// Tensor rule with `q` points per axis in dimension `d`.
pub fn gauss_rule(d: usize, q: usize) -> Result<QuadratureRule> {
    if q == 0 || d == 0 {
        return Err(Error::Config("quadrature needs d >= 1 and q >= 1".into()));
    }
    let points = q
        .checked_pow(d as u32)
        .filter(|&p| p <= MAX_RULE_POINTS)
        .ok_or(Error::RuleTooLarge { points: q.saturating_pow(d as u32), cap: MAX_RULE_POINTS })?;
    let (x1, w1) = gauss_rule_1d(q);
    let mut nodes = Vec::with_capacity(points * d);
    let mut weights = Vec::with_capacity(points);
    let mut idx = vec![0usize; d];
    for _ in 0..points {
        let mut w = 1.0;
        for &i in &idx {
            nodes.push(x1[i]);
            w *= w1[i];
        }
        weights.push(w);
        for slot in idx.iter_mut().rev() {
            *slot += 1;
            if *slot < q {
                break;
            }
            *slot = 0;
        }
    }
    Ok(QuadratureRule { dim: d, nodes, weights, exact_degree: 2 * q - 1 })
}

#[derive(Clone, Copy, Debug)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

const MC_CHUNK: usize = 1 << 14;

/// Mean of `f` over standard-normal samples. Each chunk of samples draws from
/// its own ChaCha stream, so the result is independent of thread scheduling.
pub fn monte_carlo<F>(f: F, d: usize, n_samples: usize, seed: u64) -> Result<MonteCarloEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if n_samples < 2 {
        return Err(Error::Config("Monte Carlo needs at least 2 samples".into()));
    }
    let chunks = n_samples.div_ceil(MC_CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = MC_CHUNK.min(n_samples - c * MC_CHUNK);
            let mut z = vec![0.0; d];
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                z.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
                let v = f(&z);
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = partial.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = n_samples as f64;
    let mean = s / n;
    let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(MonteCarloEstimate { mean, std_error: (var / n).sqrt(), samples: n_samples })
}

/// `|f(z)| ≤ amplitude · e^{-rate‖z‖²}`.
#[derive(Clone, Copy, Debug)]
pub struct DecayEnvelope {
    pub amplitude: f64,
    pub rate: f64,
}

pub enum FourierIntegrand<'a> {
    /// `f(z) = e^{-‖z‖²/2} g(z)`; the closure evaluates `g`.
    GaussianWeighted(&'a (dyn Fn(&[f64]) -> Complex64 + Sync)),
    /// A bare integrand, optionally with a certified decay envelope.
    Bare { f: &'a (dyn Fn(&[f64]) -> Complex64 + Sync), envelope: Option<DecayEnvelope> },
}

pub enum FourierScheme<'a> {
    Rule(&'a QuadratureRule),
    Box { half_width: f64, points_per_axis: usize },
}

#[derive(Clone, Copy, Debug)]
pub struct FourierValue {
    pub value: Complex64,
    /// Bound on the mass discarded outside the box (zero for Gaussian rules).
    pub truncation_bound: f64,
}

/// `F(f)(y) = c_0^{-1} ∫ f(z) e^{-i⟨y,z⟩} dz`.
pub fn fourier_quadrature(
    integrand: &FourierIntegrand<'_>,
    y: &[f64],
    scheme: &FourierScheme<'_>,
) -> Result<FourierValue> {
    let d = y.len();
    let phase = |z: &[f64]| {
        let t: f64 = y.iter().zip(z).map(|(a, b)| a * b).sum();
        Complex64::new(t.cos(), -t.sin())
    };
    match (integrand, scheme) {
        (FourierIntegrand::GaussianWeighted(g), FourierScheme::Rule(rule)) => {
            if rule.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: rule.dim() });
            }
            Ok(FourierValue { value: rule.integrate(|z| g(z) * phase(z)), truncation_bound: 0.0 })
        }
        (FourierIntegrand::GaussianWeighted(g), FourierScheme::Box { half_width, points_per_axis }) => {
            let f = |z: &[f64]| {
                let r2: f64 = z.iter().map(|v| v * v).sum();
                g(z) * (-r2 / 2.0).exp()
            };
            // g carries no a-priori bound, so the truncation is not certified
            let mut v = trapezoid(&f, &phase, d, *half_width, *points_per_axis, None)?;
            v.truncation_bound = f64::INFINITY;
            Ok(v)
        }
        (FourierIntegrand::Bare { envelope: None, .. }, _) => Err(Error::NoCertifiedDecay),
        (FourierIntegrand::Bare { f, envelope }, scheme) => {
            let (hw, m) = match scheme {
                FourierScheme::Box { half_width, points_per_axis } => (*half_width, *points_per_axis),
                FourierScheme::Rule(_) => {
                    // box wide enough that the envelope tail is below 1e-16
                    let env = envelope.expect("checked above");
                    ((40.0 / env.rate).sqrt(), 401)
                }
            };
            trapezoid(f, &phase, d, hw, m, *envelope)
        }
    }
}

fn trapezoid(
    f: &dyn Fn(&[f64]) -> Complex64,
    phase: &dyn Fn(&[f64]) -> Complex64,
    d: usize,
    half_width: f64,
    m: usize,
    envelope: Option<DecayEnvelope>,
) -> Result<FourierValue> {
    if m < 2 {
        return Err(Error::Config("box quadrature needs at least 2 points per axis".into()));
    }
    let total = m.checked_pow(d as u32).filter(|&p| p <= MAX_RULE_POINTS).ok_or(
        Error::RuleTooLarge { points: m.saturating_pow(d as u32), cap: MAX_RULE_POINTS },
    )?;
    let h = 2.0 * half_width / (m - 1) as f64;
    let mut idx = vec![0usize; d];
    let mut z = vec![0.0; d];
    let mut acc = Complex64::new(0.0, 0.0);
    for _ in 0..total {
        let mut w = 1.0;
        for (k, &i) in idx.iter().enumerate() {
            z[k] = -half_width + h * i as f64;
            if i == 0 || i == m - 1 {
                w *= 0.5;
            }
        }
        acc += f(&z) * phase(&z) * w;
        for slot in idx.iter_mut().rev() {
            *slot += 1;
            if *slot < m {
                break;
            }
            *slot = 0;
        }
    }
    let value = acc * h.powi(d as i32) / gaussian_normalizer(d);
    let truncation_bound = match envelope {
        Some(env) => {
            let amp = env.amplitude;
            let full = (std::f64::consts::PI / env.rate).powf(d as f64 / 2.0);
            let inside = erf(half_width * env.rate.sqrt()).powi(d as i32);
            amp * full * (1.0 - inside) / gaussian_normalizer(d)
        }
        None => f64::INFINITY,
    };
    Ok(FourierValue { value, truncation_bound })
}
