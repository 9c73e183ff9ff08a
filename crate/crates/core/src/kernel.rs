//! The kernel `L_k(x,y) = Σ_n (e^{-Δ_y/2} E_n(x,·))(y)` representing
//! `V_k ∘ e^{Δ/2}` against the Gaussian measure `dγ`.
//!
//! Two evaluation paths are kept: the series path sums the exact bivariate
//! polynomials `L_n`, the Hermite path sums `V_k(φ_ν)(x) H_ν(y)` over
//! `|ν| ≤ N`. Both are the same finite double sum rearranged.
//!
//! The measure `μ_x(dz) = e^{-‖z‖²/2} L_k(x,z) dz` is not materialized; it is
//! the pair (evaluator, quadrature rule).

use rayon::prelude::*;

use crate::dunkl::{bisect_radius, pairing, DunklContext};
use crate::error::{Error, Result};
use crate::poly::{monomials_of_degree, CompiledPoly, Exponent, Polynomial};
use crate::quad::{fourier_quadrature, orthonormal_hermite, FourierIntegrand, FourierScheme, QuadratureRule};
use crate::scalar::{ln_factorial, Complex64, Scalar};

/// Default truncation degree by dimension.
pub fn default_truncation(d: usize) -> usize {
    match d {
        1 => 30,
        2 => 14,
        3 => 10,
        _ => 8,
    }
}

/// Estimated `δ̂` uses at least this many degrees.
pub const DELTA_DEGREES: usize = 20;

/// Remainder bound for `Σ_{n>N} L_n(x,y)`.
#[derive(Clone, Copy, Debug)]
pub struct TailBound {
    pub n: usize,
    pub norm_x: f64,
    pub norm_y: f64,
    /// `Σ_{n>N} a^n Σ_{m≤n/2} d^m/(2^m m!) ‖y‖^{n−2m}/(n−2m)!`, `a = δ̂|G|‖x‖`.
    pub value: f64,
    /// `e^{a²d/2} e^{a‖y‖}`, the sum over all `n`.
    pub envelope: f64,
}

/// `ln(a^n Σ_m d^m/(2^m m!) r^{n−2m}/(n−2m)!)`.
fn log_term(n: usize, ln_a: f64, d: f64, r: f64) -> f64 {
    let mut terms = Vec::with_capacity(n / 2 + 1);
    for m in 0..=n / 2 {
        let rest = n - 2 * m;
        if r == 0.0 && rest > 0 {
            continue;
        }
        let ln_r = if rest == 0 { 0.0 } else { rest as f64 * r.ln() };
        terms.push(m as f64 * (d / 2.0).ln() - ln_factorial(m as u32) + ln_r - ln_factorial(rest as u32));
    }
    if terms.is_empty() {
        return f64::NEG_INFINITY;
    }
    let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    n as f64 * ln_a + top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
}

/// Evaluates [`TailBound`] for given `a = δ̂|G|‖x‖`, `d`, `N`, `‖y‖`.
pub fn tail_bound(a: f64, d: usize, big_n: usize, norm_y: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    let ln_a = a.ln();
    let df = d as f64;
    // terms increase until roughly n ≈ a‖y‖ + a²d
    let peak = a * norm_y + a * a * df;
    let mut sum = 0.0f64;
    let mut n = big_n + 1;
    let mut prev = f64::INFINITY;
    loop {
        let t = log_term(n, ln_a, df, norm_y).exp();
        sum += t;
        // odd terms vanish when y = 0, so look at two in a row
        if (n as f64) > 2.0 * peak + 10.0 && t.max(prev) <= sum * 1e-17 {
            break;
        }
        prev = t;
        if !sum.is_finite() || n > 1_000_000 {
            return f64::INFINITY;
        }
        n += 1;
    }
    sum
}

#[derive(Clone, Copy, Debug)]
pub struct LkValue {
    pub value: Complex64,
    pub tail: TailBound,
}

/// Residual of one sign convention of an identity.
#[derive(Clone, Debug)]
pub struct ConventionResidual {
    pub label: String,
    pub residual: f64,
    /// Per-degree exact polynomial equality, where the check is symbolic.
    pub exact: Option<bool>,
}

#[derive(Clone, Debug)]
pub struct SignReport {
    pub identity: String,
    /// First entry is the sign in the commonly quoted form of the identity.
    pub conventions: Vec<ConventionResidual>,
    /// At `k = 0`: distance of the kernel side from its closed form.
    pub closed_form_residual: Option<f64>,
}

impl SignReport {
    pub fn validating(&self, tol: f64) -> Vec<&str> {
        self.conventions.iter().filter(|c| c.residual <= tol).map(|c| c.label.as_str()).collect()
    }

    pub fn residual_of(&self, label: &str) -> Option<f64> {
        self.conventions.iter().find(|c| c.label == label).map(|c| c.residual)
    }
}

#[derive(Clone, Debug)]
pub struct ConvolutionSample {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub residual: f64,
    /// Truncation part of the admissible error (quadrature is exact for the
    /// polynomial integrand).
    pub tail_bound: f64,
}

#[derive(Clone, Debug)]
pub struct ReconstructionSample {
    pub phi: Complex64,
    pub direct: Complex64,
    pub residual: f64,
    pub bound: f64,
}

#[derive(Clone, Debug)]
pub struct SymmetryReport {
    pub degree: usize,
    pub elements: usize,
    pub exact_equivariance: bool,
    pub exact_parity: bool,
    pub max_spot_residual: f64,
}

#[derive(Clone, Debug)]
pub struct PositivityReport {
    /// `min (Re L^{(N)}(x,y) − TailBound)` over the scanned points.
    pub min_value: f64,
    pub argmin: (Vec<f64>, Vec<f64>),
    pub max_imag: f64,
    pub max_tail: f64,
    pub points: usize,
}

#[derive(Clone, Debug)]
pub struct TermBoundReport {
    pub checked: usize,
    pub violations: usize,
    /// `max |Δ^m E_n| / bound` over the checked terms.
    pub worst_ratio: f64,
}

struct SeriesData<C: Scalar> {
    e_terms: Vec<Polynomial<C>>,
    l_terms: Vec<Polynomial<C>>,
    l_compiled: Vec<CompiledPoly>,
    l_total: CompiledPoly,
    e_total: CompiledPoly,
}

struct HermiteTable {
    nus: Vec<Exponent>,
    vk: Vec<CompiledPoly>,
    inv_sqrt_fact: Vec<f64>,
}

/// `V_k(φ_ν)(x)` for a fixed `x`, ready for sweeps over `y`.
pub struct HermiteRow<'a> {
    table: &'a HermiteTable,
    coeffs: Vec<Complex64>,
    degree: usize,
}

impl HermiteRow<'_> {
    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// `Σ_{|ν|≤N} V_k(φ_ν)(x) H_ν(y)`.
    pub fn eval(&self, y: &[f64]) -> Complex64 {
        let he: Vec<Vec<f64>> = y.iter().map(|&t| orthonormal_hermite(self.degree, t)).collect();
        let mut acc = Complex64::new(0.0, 0.0);
        for (nu, c) in self.table.nus.iter().zip(&self.coeffs) {
            let h: f64 = nu.iter().zip(&he).map(|(&k, row)| row[k as usize]).product();
            acc += c * h;
        }
        acc
    }
}

pub struct KernelEvaluator<C: Scalar> {
    ctx: DunklContext<C>,
    degree: usize,
    delta_hat: f64,
    series: Option<SeriesData<C>>,
    hermite: HermiteTable,
}

fn real_point(v: &[f64]) -> Vec<Complex64> {
    v.iter().map(|&t| Complex64::new(t, 0.0)).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|t| t * t).sum::<f64>().sqrt()
}

fn concat(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().chain(y).copied().collect()
}

impl<C: Scalar> KernelEvaluator<C> {
    /// Builds both evaluation paths up to degree `n`.
    pub fn new(ctx: DunklContext<C>, n: usize) -> Result<Self> {
        Self::build(ctx, n, true)
    }

    /// Hermite path only; cheaper for large `n`. Operations that need the
    /// exact bivariate terms are unavailable.
    pub fn hermite_only(ctx: DunklContext<C>, n: usize) -> Result<Self> {
        Self::build(ctx, n, false)
    }

    fn build(mut ctx: DunklContext<C>, n: usize, with_series: bool) -> Result<Self> {
        // one extra degree so that T_j^x L_{N+1} is available
        ctx.prepare(n + 1)?;
        let delta_degrees = DELTA_DEGREES.max(n + 1);
        let delta_hat = match ctx.delta() {
            Some(est) if est.n_max >= delta_degrees => est.delta_hat,
            _ => ctx.estimate_delta(delta_degrees)?.delta_hat,
        };
        let d = ctx.dim();
        let mut nus = Vec::new();
        let mut vk = Vec::new();
        let mut inv_sqrt_fact = Vec::new();
        for m in 0..=n as u32 {
            for nu in monomials_of_degree(d, m) {
                vk.push(CompiledPoly::new(ctx.vk_monomial(&nu)?));
                let lf: f64 = nu.iter().map(|&k| ln_factorial(k as u32)).sum();
                inv_sqrt_fact.push((-0.5 * lf).exp());
                nus.push(nu);
            }
        }
        let hermite = HermiteTable { nus, vk, inv_sqrt_fact };
        let series = if with_series {
            let mut e_terms = Vec::new();
            let mut l_terms = Vec::new();
            for m in 0..=n + 1 {
                let e = ctx.homogeneous_kernel(m)?;
                l_terms.push(e.heat_in(d, d, -1));
                e_terms.push(e);
            }
            let l_compiled = l_terms.iter().map(CompiledPoly::new).collect();
            let mut l_sum = Polynomial::zero(2 * d);
            let mut e_sum = Polynomial::zero(2 * d);
            for m in 0..=n {
                l_sum += &l_terms[m];
                e_sum += &e_terms[m];
            }
            Some(SeriesData {
                l_total: CompiledPoly::new(&l_sum),
                e_total: CompiledPoly::new(&e_sum),
                e_terms,
                l_terms,
                l_compiled,
            })
        } else {
            None
        };
        Ok(KernelEvaluator { ctx, degree: n, delta_hat, series, hermite })
    }

    pub fn ctx(&self) -> &DunklContext<C> {
        &self.ctx
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.ctx.dim()
    }

    pub fn delta_hat(&self) -> f64 {
        self.delta_hat
    }

    pub fn has_series(&self) -> bool {
        self.series.is_some()
    }

    fn series(&self) -> Result<&SeriesData<C>> {
        self.series
            .as_ref()
            .ok_or_else(|| Error::Config("operation needs the series path; build with KernelEvaluator::new".into()))
    }

    fn check_dims(&self, x: &[f64], y: &[f64]) -> Result<()> {
        let d = self.dim();
        for v in [x, y] {
            if v.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: v.len() });
            }
        }
        Ok(())
    }

    /// Exact `L_n` in `2d` variables, `n ≤ N + 1`.
    pub fn l_term(&self, n: usize) -> Result<&Polynomial<C>> {
        let s = self.series()?;
        s.l_terms.get(n).ok_or(Error::NotPrepared { requested: n, prepared: self.degree + 1 })
    }

    /// Exact `E_n` in `2d` variables, `n ≤ N + 1`.
    pub fn e_term(&self, n: usize) -> Result<&Polynomial<C>> {
        let s = self.series()?;
        s.e_terms.get(n).ok_or(Error::NotPrepared { requested: n, prepared: self.degree + 1 })
    }

    pub fn tail_bound_at(&self, n: usize, norm_x: f64, norm_y: f64) -> TailBound {
        let a = self.delta_hat * self.ctx.group().order() as f64 * norm_x;
        let d = self.dim() as f64;
        TailBound {
            n,
            norm_x,
            norm_y,
            value: tail_bound(a, self.dim(), n, norm_y),
            envelope: (a * a * d / 2.0 + a * norm_y).exp(),
        }
    }

    pub fn tail(&self, x: &[f64], y: &[f64]) -> TailBound {
        self.tail_bound_at(self.degree, norm(x), norm(y))
    }

    /// Largest `‖x‖` with `TailBound(N, ‖x‖, ‖y‖) < tol`.
    pub fn certified_radius(&self, norm_y: f64, tol: f64) -> f64 {
        bisect_radius(|r| self.tail_bound_at(self.degree, r, norm_y).value, tol)
    }

    /// Per-degree values `L_0(x,y), …, L_N(x,y)` from the series path.
    pub fn lk_terms(&self, x: &[f64], y: &[f64]) -> Result<Vec<Complex64>> {
        self.check_dims(x, y)?;
        let z = concat(x, y);
        Ok(self.series()?.l_compiled[..=self.degree].iter().map(|p| p.eval_real(&z)).collect())
    }

    /// `L_k^{(N)}(x,y)` on the series path.
    pub fn lk_series(&self, x: &[f64], y: &[f64]) -> Result<Complex64> {
        self.check_dims(x, y)?;
        Ok(self.series()?.l_total.eval_real(&concat(x, y)))
    }

    pub fn hermite_row(&self, x: &[f64], n: usize) -> HermiteRow<'_> {
        let xc = real_point(x);
        let count = self.hermite.nus.iter().take_while(|nu| nu.iter().map(|&k| k as usize).sum::<usize>() <= n).count();
        let coeffs = (0..count)
            .map(|i| self.hermite.vk[i].eval(&xc) * self.hermite.inv_sqrt_fact[i])
            .collect();
        HermiteRow { table: &self.hermite, coeffs, degree: n }
    }

    /// `Σ_{|ν|≤n} V_k(φ_ν)(x) H_ν(y)`.
    pub fn lk_eval_hermite(&self, x: &[f64], y: &[f64], n: usize) -> Result<Complex64> {
        self.check_dims(x, y)?;
        if n > self.degree {
            return Err(Error::NotPrepared { requested: n, prepared: self.degree });
        }
        Ok(self.hermite_row(x, n).eval(y))
    }

    /// `L_k^{(N)}(x,y)` on the series path when built, else the Hermite path.
    pub fn lk_truncated(&self, x: &[f64], y: &[f64]) -> Result<Complex64> {
        if self.series.is_some() {
            self.lk_series(x, y)
        } else {
            self.lk_eval_hermite(x, y, self.degree)
        }
    }

    /// `L_k(x,y)` with a certified truncation bound below `tol`.
    pub fn lk_eval(&self, x: &[f64], y: &[f64], tol: f64) -> Result<LkValue> {
        let tail = self.tail(x, y);
        if tail.value.is_nan() || tail.value >= tol {
            return Err(Error::ToleranceUnreachable {
                tol,
                cap: self.degree,
                bound: tail.value,
                certified_radius: self.certified_radius(tail.norm_y, tol),
            });
        }
        Ok(LkValue { value: self.lk_truncated(x, y)?, tail })
    }

    /// `∫ L_k^{(N)}(x,y) dγ(y)`.
    pub fn lk_mass(&self, x: &[f64], rule: &QuadratureRule) -> Result<Complex64> {
        self.phi_x_apply(x, &|_| Complex64::new(1.0, 0.0), rule)
    }

    /// `L_k^{(N)}(x,·)` at the nodes of `rule`, from the Hermite row of `x`.
    pub fn values_at_nodes(&self, x: &[f64], rule: &QuadratureRule) -> Result<Vec<Complex64>> {
        if rule.dim() != self.dim() || x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: rule.dim().min(x.len()) });
        }
        let row = self.hermite_row(x, self.degree);
        Ok(rule.iter().map(|(y, _)| row.eval(y)).collect())
    }

    /// `Φ_x(f) = ∫ L_k^{(N)}(x,y) f(y) dγ(y)`.
    pub fn phi_x_apply(
        &self,
        x: &[f64],
        f: &(dyn Fn(&[f64]) -> Complex64 + Sync),
        rule: &QuadratureRule,
    ) -> Result<Complex64> {
        rule.require_degree(self.degree)?;
        let vals = self.values_at_nodes(x, rule)?;
        Ok(rule.iter().zip(&vals).map(|((y, w), v)| v * f(y) * w).sum())
    }

    /// `Φ_x(p)` against `V_k(e^{Δ/2}p)(x)` for each `p`. Both sides are exact
    /// in the truncation once `deg p ≤ N`, so the admissible error is
    /// quadrature roundoff alone.
    pub fn reconstruction(
        &self,
        x: &[f64],
        polys: &[Polynomial<C>],
        rule: &QuadratureRule,
    ) -> Result<Vec<ReconstructionSample>> {
        let top = polys.iter().filter_map(|p| p.degree()).max().unwrap_or(0) as usize;
        if top > self.degree {
            return Err(Error::NotPrepared { requested: top, prepared: self.degree });
        }
        rule.require_degree(self.degree + top)?;
        let vals = self.values_at_nodes(x, rule)?;
        let xc = real_point(x);
        polys
            .iter()
            .map(|p| {
                let fp = CompiledPoly::new(p);
                let phi: Complex64 = rule.iter().zip(&vals).map(|((y, w), v)| v * fp.eval_real(y) * w).sum();
                let direct = self.ctx.intertwine(&p.inverse_heat_half())?.evaluate_c64(&xc);
                Ok(ReconstructionSample { phi, direct, residual: (phi - direct).norm(), bound: 0.0 })
            })
            .collect()
    }

    /// `‖Φ_x‖` two ways: `(Σ_{|ν|≤N} |V_k(φ_ν)(x)|²)^{1/2}` and
    /// `‖L_k^{(N)}(x,·)‖_{L²(dγ)}` by quadrature.
    pub fn phi_x_norm(&self, x: &[f64], rule: &QuadratureRule) -> Result<(f64, f64)> {
        rule.require_degree(2 * self.degree)?;
        let row = self.hermite_row(x, self.degree);
        let series = row.coefficients().iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let vals = self.values_at_nodes(x, rule)?;
        let quad: f64 = rule.iter().zip(&vals).map(|((_, w), v)| v.norm_sqr() * w).sum();
        Ok((series, quad.sqrt()))
    }

    /// `E_k(x,y)` against `∫ L_k(x,y+u) dγ(u)` (the Gaussian convolution
    /// after recentring `z = y + u`).
    pub fn convolution_check(&self, x: &[f64], y: &[f64], rule: &QuadratureRule, tol: f64) -> Result<ConvolutionSample> {
        self.check_dims(x, y)?;
        rule.require_degree(self.degree)?;
        let kernel = self.ctx.dunkl_kernel(&real_point(x), &real_point(y), tol)?;
        let rhs = if let Some(s) = &self.series {
            let d = self.dim();
            let mut z = concat(x, y);
            rule.integrate(|u| {
                for j in 0..d {
                    z[d + j] = y[j] + u[j];
                }
                s.l_total.eval_real(&z)
            })
        } else {
            let row = self.hermite_row(x, self.degree);
            rule.integrate(|u| {
                let shifted: Vec<f64> = y.iter().zip(u).map(|(a, b)| a + b).collect();
                row.eval(&shifted)
            })
        };
        // the truncated right side equals Σ_{n≤N} E_n exactly
        let gap = self.ctx.exp_tail_between(x, y, kernel.degree, self.degree);
        Ok(ConvolutionSample {
            lhs: kernel.value,
            rhs,
            residual: (kernel.value - rhs).norm(),
            tail_bound: kernel.tail_bound + gap,
        })
    }

    fn gaussian_taylor(&self, n: usize, sign: i64) -> Polynomial<C> {
        // [e^{−‖u‖²/2 + s⟨u,y⟩}]_n in (u, y)
        let d = self.dim();
        let mut q = Polynomial::zero(2 * d);
        for j in 0..d {
            let mut e = Exponent::from_elem(0, 2 * d);
            e[j] = 2;
            q.add_term(e, C::from_i64(-1).div_ref(&C::from_i64(2)));
        }
        let lin = pairing::<C>(d).scale(&C::from_i64(sign));
        let mut out = Polynomial::zero(2 * d);
        for a in 0..=n / 2 {
            let b = (n - 2 * a) as u32;
            let inv = |m: u32| C::from_rational(&num::rational::BigRational::new(1.into(), crate::scalar::factorial(m)));
            let term = &q.pow(a as u32).scale(&inv(a as u32)) * &lin.pow(b).scale(&inv(b));
            out += &term;
        }
        out
    }

    /// `V_k(e^{−‖·∓y‖²/2})(x)` against `e^{−‖y‖²/2} L_k(x,y)`, per degree in `x`.
    /// Convention `"+"` is `e^{−‖·+y‖²/2}`, convention `"−"` is `e^{−‖·−y‖²/2}`.
    pub fn gaussian_image_check(&self, x: &[f64], y: &[f64]) -> Result<SignReport> {
        self.check_dims(x, y)?;
        let z = concat(x, y);
        let damp = (-norm(y).powi(2) / 2.0).exp();
        let mut conventions = Vec::new();
        for (label, sign) in [("+", -1i64), ("-", 1i64)] {
            let mut exact = true;
            let mut diff = Complex64::new(0.0, 0.0);
            for n in 0..=self.degree {
                let image = self.ctx.intertwine_in(&self.gaussian_taylor(n, sign), 0)?;
                let l = self.l_term(n)?;
                if C::EXACT {
                    exact &= &image == l;
                }
                diff += CompiledPoly::new(&(&image - l)).eval_real(&z);
            }
            conventions.push(ConventionResidual {
                label: label.to_string(),
                residual: damp * diff.norm(),
                exact: C::EXACT.then_some(exact),
            });
        }
        let closed_form_residual = self.ctx.multiplicity().is_zero().then(|| {
            let dist2: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
            let rhs = damp * self.lk_series(x, y).unwrap_or_default();
            (rhs - (-dist2 / 2.0).exp()).norm()
        });
        Ok(SignReport { identity: "gaussian_image".into(), conventions, closed_form_residual })
    }

    /// `∫ E_k^{(N)}(∓ix, z) e^{−i⟨y,z⟩} dγ(z)` against `e^{−‖y‖²/2} L_k^{(N)}(x,y)`.
    /// Convention `"-ix"` is the commonly quoted one.
    pub fn fourier_check(&self, x: &[f64], y: &[f64], rule: &QuadratureRule) -> Result<SignReport> {
        self.check_dims(x, y)?;
        rule.require_degree(self.degree)?;
        let s = self.series()?;
        let d = self.dim();
        let target = (-norm(y).powi(2) / 2.0).exp() * s.l_total.eval_real(&concat(x, y));
        let mut conventions = Vec::new();
        for (label, sign) in [("-ix", -1.0), ("+ix", 1.0)] {
            let ix: Vec<Complex64> = x.iter().map(|&t| Complex64::new(0.0, sign * t)).collect();
            let g = |z: &[f64]| {
                let mut pt = ix.clone();
                pt.extend(z.iter().map(|&t| Complex64::new(t, 0.0)));
                s.e_total.eval(&pt)
            };
            let v = fourier_quadrature(&FourierIntegrand::GaussianWeighted(&g), y, &FourierScheme::Rule(rule))?;
            conventions.push(ConventionResidual {
                label: label.to_string(),
                residual: (v.value - target).norm(),
                exact: None,
            });
        }
        let closed_form_residual = self.ctx.multiplicity().is_zero().then(|| {
            let dist2: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
            (target - (-dist2 / 2.0).exp()).norm()
        });
        let _ = d;
        Ok(SignReport { identity: "fourier".into(), conventions, closed_form_residual })
    }

    /// `∂_{y_j}(L_k(x,·) e^{−‖·‖²/2})(y)` against `± T_j^x(L_k(·,y)) e^{−‖y‖²/2}`,
    /// matched per degree in `x` (degree `n` on the left pairs with `L_{n+1}` on the right).
    pub fn derivative_relation_check(&self, x: &[f64], y: &[f64], j: usize) -> Result<SignReport> {
        self.check_dims(x, y)?;
        let d = self.dim();
        if j >= d {
            return Err(Error::DimensionMismatch { expected: d, got: j + 1 });
        }
        let z = concat(x, y);
        let damp = (-norm(y).powi(2) / 2.0).exp();
        let yj = Polynomial::var(2 * d, d + j);
        let mut lhs_total = Polynomial::zero(2 * d);
        let mut rhs_total = Polynomial::zero(2 * d);
        let mut exact_plus = true;
        let mut exact_minus = true;
        for n in 0..self.degree {
            let l = self.l_term(n)?;
            let lhs = &l.partial(d + j) - &(&yj * l);
            let rhs = self.ctx.dunkl_basis(j, self.l_term(n + 1)?, 0)?;
            if C::EXACT {
                exact_plus &= lhs == rhs;
                exact_minus &= lhs == -&rhs;
            }
            lhs_total += &lhs;
            rhs_total += &rhs;
        }
        let lv = CompiledPoly::new(&lhs_total).eval_real(&z);
        let rv = CompiledPoly::new(&rhs_total).eval_real(&z);
        let conventions = vec![
            ConventionResidual {
                label: "+T".into(),
                residual: damp * (lv - rv).norm(),
                exact: C::EXACT.then_some(exact_plus),
            },
            ConventionResidual {
                label: "-T".into(),
                residual: damp * (lv + rv).norm(),
                exact: C::EXACT.then_some(exact_minus),
            },
        ];
        Ok(SignReport { identity: "derivative_relation".into(), conventions, closed_form_residual: None })
    }

    /// `L_n(gx,y) = L_n(x,g^{-1}y)` for all `g` and `L_n(−x,y) = L_n(x,−y)`,
    /// exactly per term, plus floating spot checks of `L_k^{(N)}`.
    pub fn symmetry_scan(&self, samples: &[(Vec<f64>, Vec<f64>)]) -> Result<SymmetryReport> {
        let group = self.ctx.group();
        let d = self.dim();
        let minus = C::from_i64(-1);
        let mut exact_equivariance = true;
        let mut exact_parity = true;
        for n in 0..=self.degree {
            let l = self.l_term(n)?;
            for g in 0..group.order() {
                let a = group.act_on_polynomial_at(g, l, 0);
                let b = group.act_on_polynomial_at(group.inverse(g), l, d);
                exact_equivariance &= if C::EXACT { a == b } else { a.approx_eq(&b, 1e-9) };
            }
            let a = l.scale_vars(0, d, &minus);
            let b = l.scale_vars(d, d, &minus);
            exact_parity &= if C::EXACT { a == b } else { a.approx_eq(&b, 1e-9) };
        }
        let mats: Vec<Vec<f64>> =
            (0..group.order()).map(|g| group.matrix(g).iter().map(|c| c.to_c64().re).collect()).collect();
        let apply = |m: &[f64], v: &[f64]| -> Vec<f64> {
            (0..d).map(|i| (0..d).map(|j| m[i * d + j] * v[j]).sum()).collect()
        };
        let mut worst = 0.0f64;
        for (x, y) in samples {
            for g in 0..group.order() {
                let a = self.lk_series(&apply(&mats[g], x), y)?;
                let b = self.lk_series(x, &apply(&mats[group.inverse(g)], y))?;
                worst = worst.max((a - b).norm());
            }
            let nx: Vec<f64> = x.iter().map(|t| -t).collect();
            let ny: Vec<f64> = y.iter().map(|t| -t).collect();
            worst = worst.max((self.lk_series(&nx, y)? - self.lk_series(x, &ny)?).norm());
        }
        Ok(SymmetryReport {
            degree: self.degree,
            elements: group.order(),
            exact_equivariance,
            exact_parity,
            max_spot_residual: worst,
        })
    }

    /// `min (Re L_k^{(N)}(x,y) − TailBound)` over the points, in parallel.
    pub fn positivity_scan(&self, points: &[(Vec<f64>, Vec<f64>)]) -> Result<PositivityReport> {
        if points.is_empty() {
            return Err(Error::Config("empty grid".into()));
        }
        let values: Vec<(f64, f64, f64)> = points
            .par_iter()
            .map(|(x, y)| {
                let v = self.lk_truncated(x, y)?;
                let t = self.tail(x, y).value;
                Ok((v.re - t, v.im.abs(), t))
            })
            .collect::<Result<_>>()?;
        let (imin, min) = values
            .iter()
            .enumerate()
            .map(|(i, v)| (i, v.0))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        Ok(PositivityReport {
            min_value: min,
            argmin: points[imin].clone(),
            max_imag: values.iter().map(|v| v.1).fold(0.0, f64::max),
            max_tail: values.iter().map(|v| v.2).fold(0.0, f64::max),
            points: points.len(),
        })
    }

    /// Checks `|Δ_y^m E_n(x,·)(y)| ≤ d^m/(n−2m)! (δ̂|G|‖x‖)^n ‖y‖^{n−2m}` for
    /// every `n ≤ N`, `2m ≤ n`.
    pub fn term_bound_check(&self, x: &[f64], y: &[f64]) -> Result<TermBoundReport> {
        self.check_dims(x, y)?;
        let d = self.dim();
        let z = concat(x, y);
        let a = self.delta_hat * self.ctx.group().order() as f64 * norm(x);
        let r = norm(y);
        let mut report = TermBoundReport { checked: 0, violations: 0, worst_ratio: 0.0 };
        for n in 0..=self.degree {
            let mut p = self.e_term(n)?.clone();
            for m in 0..=n / 2 {
                if m > 0 {
                    p = p.laplacian_in(d, d);
                }
                let lhs = CompiledPoly::new(&p).eval_real(&z).norm();
                let rest = n - 2 * m;
                let ln_rhs = m as f64 * (d as f64).ln() - ln_factorial(rest as u32)
                    + n as f64 * a.ln()
                    + if rest == 0 { 0.0 } else { rest as f64 * r.ln() };
                let rhs = if n == 0 { 1.0 } else { ln_rhs.exp() };
                report.checked += 1;
                if lhs > rhs * (1.0 + 1e-9) + 1e-15 {
                    report.violations += 1;
                }
                if rhs > 0.0 {
                    report.worst_ratio = report.worst_ratio.max(lhs / rhs);
                }
            }
        }
        Ok(report)
    }
}

impl<C: Scalar> DunklContext<C> {
    /// `Σ_{n0<n≤n1} (δ̂|G|‖x‖‖y‖)^n/n!`, zero when `n1 ≤ n0`.
    pub(crate) fn exp_tail_between(&self, x: &[f64], y: &[f64], n0: usize, n1: usize) -> f64 {
        let Some(est) = self.delta() else { return f64::INFINITY };
        let a = est.delta_hat * self.group().order() as f64 * norm(x) * norm(y);
        if a == 0.0 {
            return 0.0;
        }
        (n0 + 1..=n1).map(|n| (n as f64 * a.ln() - ln_factorial(n as u32)).exp()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{parse_polynomial, ExactPoly};
    use crate::quad::gauss_rule;
    use crate::reflection_groups::Family;
    use crate::scalar::CRational;

    type Q = CRational;

    fn ev(f: Family, p: usize, k: Vec<Q>, n: usize) -> KernelEvaluator<Q> {
        KernelEvaluator::new(DunklContext::for_family(f, p, k).unwrap(), n).unwrap()
    }

    #[test]
    fn tail_bound_basics() {
        // d = 1: the full sum is the envelope
        let full = tail_bound(0.7, 1, 0, 1.3) + 1.0;
        assert!((full - (0.7f64 * 0.7 / 2.0 + 0.7 * 1.3).exp()).abs() < 1e-12);
        let mut prev = f64::INFINITY;
        for n in 0..40 {
            let t = tail_bound(2.0, 2, n, 1.5);
            assert!(t <= prev && t >= 0.0);
            prev = t;
        }
        assert_eq!(tail_bound(0.0, 2, 3, 1.0), 0.0);
        // y = 0 keeps only even degrees
        let t = tail_bound(1.0, 1, 1, 0.0);
        let direct: f64 = (1..30).map(|m| 0.5f64.powi(m) / (1..=m).map(|v| v as f64).product::<f64>()).sum();
        assert!((t - direct).abs() < 1e-14);
    }

    #[test]
    fn k_zero_closed_form() {
        let e = ev(Family::Z2, 1, vec![Q::zero()], 30);
        for (x, y) in [(0.5, -1.0), (1.2, 0.7), (0.0, 1.4)] {
            let v = e.lk_series(&[x], &[y]).unwrap();
            assert!((v.re - (x * y - x * x / 2.0).exp()).abs() < 1e-12, "{x} {y}");
        }
        let h = e.lk_eval_hermite(&[0.3], &[0.9], 1).unwrap();
        assert!((h.re - (1.0 + 0.3 * 0.9)).abs() < 1e-15);
    }

    #[test]
    fn origin_gives_one() {
        let e = ev(Family::B, 2, vec![Q::ratio(3, 2), Q::ratio(1, 2)], 6);
        let v = e.lk_eval(&[0.0, 0.0], &[0.4, -1.7], 1e-12).unwrap();
        assert!((v.value - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert_eq!(v.tail.value, 0.0);
        assert!((e.lk_eval_hermite(&[0.0, 0.0], &[1.0, 2.0], 6).unwrap().re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn paths_agree() {
        let e = ev(Family::B, 2, vec![Q::ratio(3, 2), Q::ratio(1, 2)], 8);
        for (x, y) in [([0.3, -0.8], [1.1, 0.4]), ([1.2, 0.5], [-0.6, -1.3]), ([-1.0, 1.0], [0.2, 0.9])] {
            let a = e.lk_series(&x, &y).unwrap();
            let b = e.lk_eval_hermite(&x, &y, 8).unwrap();
            assert!((a - b).norm() < 1e-9, "{x:?} {y:?}: {a} {b}");
        }
    }

    #[test]
    fn mass_is_one() {
        let e = ev(Family::B, 2, vec![Q::ratio(1, 2), Q::from_i64(1)], 8);
        let rule = gauss_rule(2, 10).unwrap();
        for x in [[0.0, 0.0], [0.9, -0.4], [1.5, 0.2]] {
            let m = e.lk_mass(&x, &rule).unwrap();
            assert!((m - Complex64::new(1.0, 0.0)).norm() < 1e-12, "{x:?}: {m}");
        }
        let weak = gauss_rule(2, 3).unwrap();
        assert!(matches!(e.lk_mass(&[0.1, 0.1], &weak), Err(Error::RuleTooWeak { .. })));
    }

    #[test]
    fn reconstruction_of_monomials() {
        let e = ev(Family::Z2, 1, vec![Q::ratio(1, 2)], 10);
        let rule = gauss_rule(1, 20).unwrap();
        for s in ["1", "x", "x^3", "x^6"] {
            let p: ExactPoly = parse_polynomial(s, 1).unwrap();
            let r = &e.reconstruction(&[0.8], &[p], &rule).unwrap()[0];
            assert!(r.residual <= r.bound + 1e-10, "{s}: {r:?}");
        }
    }

    #[test]
    fn norm_routes() {
        let e = ev(Family::Z2, 1, vec![Q::zero()], 12);
        let rule = gauss_rule(1, 40).unwrap();
        let (a, b) = e.phi_x_norm(&[1.0], &rule).unwrap();
        assert!((a * a - std::f64::consts::E).abs() < 1e-6);
        assert!((a - b).abs() < 1e-6 * a);
        let (a0, b0) = e.phi_x_norm(&[0.0], &rule).unwrap();
        assert!((a0 - 1.0).abs() < 1e-15 && (b0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sign_conventions_at_k_zero() {
        let e = ev(Family::Z2, 1, vec![Q::zero()], 30);
        let rule = gauss_rule(1, 40).unwrap();
        let g = e.gaussian_image_check(&[1.0], &[0.5]).unwrap();
        assert_eq!(g.validating(1e-8), vec!["-"]);
        assert!(g.residual_of("+").unwrap() > 0.1);
        assert!(g.closed_form_residual.unwrap() < 1e-10);
        let f = e.fourier_check(&[1.0], &[0.5], &rule).unwrap();
        assert_eq!(f.validating(1e-8), vec!["+ix"]);
        let dr = e.derivative_relation_check(&[1.0], &[0.5], 0).unwrap();
        assert_eq!(dr.validating(1e-8), vec!["-T"]);
        assert_eq!(dr.conventions[1].exact, Some(true));
        // at x = 0 both Gaussian conventions agree
        let z = e.gaussian_image_check(&[0.0], &[0.7]).unwrap();
        assert_eq!(z.validating(1e-12).len(), 2);
    }

    #[test]
    fn symmetry_on_rank_one() {
        let e = ev(Family::Z2, 1, vec![Q::ratio(1, 2)], 10);
        let r = e.symmetry_scan(&[(vec![0.7], vec![-0.4])]).unwrap();
        assert!(r.exact_equivariance && r.exact_parity);
        assert!(r.max_spot_residual < 1e-12);
    }

    #[test]
    fn positivity_and_term_bounds() {
        let e = ev(Family::Z2, 1, vec![Q::ratio(1, 2)], 30);
        let pts: Vec<_> = (-5..=5)
            .flat_map(|i| (-5..=5).map(move |j| (vec![i as f64 * 0.1], vec![j as f64 * 0.2])))
            .collect();
        let r = e.positivity_scan(&pts).unwrap();
        assert!(r.min_value > 0.0, "{r:?}");
        assert!(r.max_imag < 1e-12);
        let t = e.term_bound_check(&[0.6], &[-1.1]).unwrap();
        assert_eq!(t.violations, 0);
    }

    #[test]
    fn hermite_only_matches() {
        let ctx = DunklContext::for_family(Family::Z2, 2, vec![Q::ratio(1, 2)]).unwrap();
        let full = KernelEvaluator::new(ctx.clone(), 10).unwrap();
        let light = KernelEvaluator::hermite_only(ctx, 10).unwrap();
        let (x, y) = ([0.4, -0.2], [1.0, 0.3]);
        assert!((full.lk_truncated(&x, &y).unwrap() - light.lk_truncated(&x, &y).unwrap()).norm() < 1e-12);
        assert!(light.l_term(0).is_err());
    }

    #[test]
    fn unreachable_tolerance_reports_radius() {
        let e = ev(Family::B, 2, vec![Q::ratio(1, 2), Q::from_i64(1)], 6);
        match e.lk_eval(&[1.5, 0.0], &[1.5, 0.0], 1e-10) {
            Err(Error::ToleranceUnreachable { certified_radius, .. }) => {
                assert!(certified_radius > 0.0 && certified_radius < 1.5);
                let t = e.tail_bound_at(6, certified_radius, 1.5).value;
                assert!(t < 1e-10);
            }
            other => panic!("{other:?}"),
        }
    }
}
