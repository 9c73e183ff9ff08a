//! Verification suites over a [`KernelEvaluator`], producing JSON-ready
//! reports. Suites run sequentially and deterministically under the seed.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::dunkl::DunklContext;
use crate::error::{Error, Result};
use crate::kernel::KernelEvaluator;
use crate::poly::{monomials_of_degree, CompiledPoly, Polynomial};
use crate::quad::gauss_rule;
use crate::scalar::{Complex64, Scalar};

pub const EXACT_MAX_DEGREE: usize = 8;
pub const TWO_PATH_TOL: f64 = 1e-9;
pub const MASS_TOL: f64 = 1e-12;
pub const RECONSTRUCTION_TOL: f64 = 1e-10;
pub const NORM_TOL: f64 = 1e-6;
pub const CONVOLUTION_TOL: f64 = 1e-6;
pub const SIGN_VALID_TOL: f64 = 1e-8;
pub const SIGN_INVALID_MIN: f64 = 0.1;
pub const SIGN_TRANSFER_TOL: f64 = 1e-6;
pub const POSITIVITY_TOL: f64 = 1e-8;
pub const IMAG_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Exact,
    Series,
    Quadrature,
    Signs,
    Positivity,
    All,
}

impl Suite {
    pub const EACH: [Suite; 5] = [Suite::Exact, Suite::Series, Suite::Quadrature, Suite::Signs, Suite::Positivity];
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "exact" => Suite::Exact,
            "series" => Suite::Series,
            "quadrature" => Suite::Quadrature,
            "signs" => Suite::Signs,
            "positivity" => Suite::Positivity,
            "all" => Suite::All,
            _ => {
                return Err(Error::Config(format!(
                    "unknown suite \"{s}\" (exact, series, quadrature, signs, positivity, all)"
                )))
            }
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Suite::Exact => "exact",
            Suite::Series => "series",
            Suite::Quadrature => "quadrature",
            Suite::Signs => "signs",
            Suite::Positivity => "positivity",
            Suite::All => "all",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub identity: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convention: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckResult {
    fn new(identity: &str, residual: f64, tolerance: f64) -> Self {
        CheckResult {
            identity: identity.into(),
            max_residual: residual,
            tolerance,
            pass: residual <= tolerance,
            convention: None,
            note: None,
        }
    }

    fn note(mut self, s: impl Into<String>) -> Self {
        self.note = Some(s.into());
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
    pub checks: Vec<CheckResult>,
}

impl SuiteReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn skipped(suite: Suite, why: &str) -> Self {
        SuiteReport { suite, skipped: Some(why.into()), checks: Vec::new() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub degree: usize,
    pub seed: u64,
    pub suites: Vec<SuiteReport>,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Radius of the ball random points are drawn from.
    pub radius: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { seed: 42, radius: 1.0 }
    }
}

/// Uniform point in the ball of radius `r`.
pub fn random_in_ball(rng: &mut impl Rng, d: usize, r: f64) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut *rng)).collect();
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let s = r * rng.random::<f64>().powf(1.0 / d as f64) / n;
    v.into_iter().map(|a| a * s).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn poly_gap<C: Scalar>(a: &Polynomial<C>, b: &Polynomial<C>) -> f64 {
    (a - b).max_abs_coeff()
}

pub fn run<C: Scalar>(ev: &KernelEvaluator<C>, suite: Suite, opts: &VerifyOptions) -> Result<Report> {
    let list: Vec<Suite> = if suite == Suite::All { Suite::EACH.to_vec() } else { vec![suite] };
    let mut suites = Vec::new();
    for s in list {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        suites.push(match s {
            Suite::Exact => exact_suite(ev)?,
            Suite::Series => series_suite(ev, &mut rng, opts)?,
            Suite::Quadrature => quadrature_suite(ev, &mut rng, opts)?,
            Suite::Signs => signs_suite(ev)?,
            Suite::Positivity => positivity_suite(ev)?,
            Suite::All => unreachable!(),
        });
    }
    let pass = suites.iter().all(|s| s.pass());
    Ok(Report { degree: ev.degree(), seed: opts.seed, suites, pass })
}

fn exact_suite<C: Scalar>(ev: &KernelEvaluator<C>) -> Result<SuiteReport> {
    if !C::EXACT {
        return Ok(SuiteReport::skipped(Suite::Exact, "floating mode: exact equalities are not meaningful"));
    }
    let ctx = ev.ctx();
    let d = ctx.dim();
    let top = ev.degree().min(EXACT_MAX_DEGREE);
    let mut checks = Vec::new();

    let mut w = 0.0f64;
    for n in 1..=ev.degree() {
        let h = ctx.h(n)?;
        for nu in monomials_of_degree(d, n as u32) {
            let m = Polynomial::monomial(nu, C::one());
            w = w.max(poly_gap(&ctx.euler_w(n, &h.apply_in(ctx.group(), &m, 0))?, &m));
        }
    }
    checks.push(CheckResult::new("W_n H_n = id", w, 0.0));

    let mut inter = 0.0f64;
    let mut comm = 0.0f64;
    for n in 0..=top as u32 {
        for nu in monomials_of_degree(d, n) {
            let m = Polynomial::monomial(nu, C::one());
            let v = ctx.intertwine(&m)?;
            for j in 0..d {
                let lhs = ctx.dunkl_basis(j, &v, 0)?;
                let rhs = ctx.intertwine(&m.partial(j))?;
                inter = inter.max(poly_gap(&lhs, &rhs));
            }
            if n <= 4 {
                for i in 0..d {
                    for j in i + 1..d {
                        let a = ctx.dunkl_basis(i, &ctx.dunkl_basis(j, &m, 0)?, 0)?;
                        let b = ctx.dunkl_basis(j, &ctx.dunkl_basis(i, &m, 0)?, 0)?;
                        comm = comm.max(poly_gap(&a, &b));
                    }
                }
            }
        }
    }
    checks.push(CheckResult::new("T_j V_k = V_k d_j", inter, 0.0).note(format!("monomials of degree <= {top}")));
    checks.push(CheckResult::new("T_i T_j = T_j T_i", comm, 0.0).note("monomials of degree <= 4"));
    let one = Polynomial::one(d);
    checks.push(CheckResult::new("V_k(1) = 1", poly_gap(&ctx.intertwine(&one)?, &one), 0.0));

    let mut routes = 0.0f64;
    for n in 0..=ev.degree().min(6) {
        routes = routes.max(poly_gap(&ctx.homogeneous_kernel_recursive(n)?, ev.e_term(n)?));
    }
    checks.push(CheckResult::new("E_n recursion = table", routes, 0.0));

    let mut at_zero = 0.0f64;
    let mut homog = 0.0f64;
    let lambda = C::from_i64(3).div_ref(&C::from_i64(-2));
    for n in 0..=ev.degree() {
        let e = ev.e_term(n)?;
        let y0 = e.specialize(d, &vec![C::zero(); d]);
        let expect = if n == 0 { Polynomial::one(d) } else { Polynomial::zero(d) };
        at_zero = at_zero.max(poly_gap(&y0.embed(d, 0), &expect));
        let scaled = e.scale_vars(0, d, &lambda);
        let mut pw = C::one();
        for _ in 0..n {
            pw = pw.mul_ref(&lambda);
        }
        homog = homog.max(poly_gap(&scaled, &e.scale(&pw)));
    }
    checks.push(CheckResult::new("E_k(x,0) = 1", at_zero, 0.0));
    checks.push(CheckResult::new("E_n(lx,y) = l^n E_n(x,y)", homog, 0.0));

    let sym = ev.symmetry_scan(&[])?;
    let flag = |ok: bool| if ok { 0.0 } else { 1.0 };
    checks.push(CheckResult::new("L_n(gx,y) = L_n(x,g^-1 y)", flag(sym.exact_equivariance), 0.0)
        .note(format!("all {} group elements, per term", sym.elements)));
    checks.push(CheckResult::new("L_n(-x,y) = L_n(x,-y)", flag(sym.exact_parity), 0.0));
    Ok(SuiteReport { suite: Suite::Exact, skipped: None, checks })
}

fn sample_pairs(rng: &mut ChaCha8Rng, d: usize, r: f64, count: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    (0..count).map(|_| (random_in_ball(rng, d, r), random_in_ball(rng, d, r))).collect()
}

fn series_suite<C: Scalar>(ev: &KernelEvaluator<C>, rng: &mut ChaCha8Rng, opts: &VerifyOptions) -> Result<SuiteReport> {
    let d = ev.dim();
    let n = ev.degree();
    let mut checks = Vec::new();
    let pairs = sample_pairs(rng, d, opts.radius, 20);

    let mut two = 0.0f64;
    for (x, y) in &pairs {
        two = two.max((ev.lk_series(x, y)? - ev.lk_eval_hermite(x, y, n)?).norm());
    }
    checks.push(CheckResult::new("series path = Hermite path", two, TWO_PATH_TOL));

    // TailBound(N) ≥ TailBound(N+1) and the next computed term sits below it
    let mut excess = 0.0f64;
    for (x, y) in &pairs {
        let (nx, ny) = (norm(x), norm(y));
        let mut prev = f64::INFINITY;
        for m in n.saturating_sub(3)..=n + 3 {
            let t = ev.tail_bound_at(m, nx, ny).value;
            excess = excess.max(t - prev);
            prev = t;
        }
        let next = ev.l_term(n + 1).map(CompiledPoly::new)?;
        let z: Vec<f64> = x.iter().chain(y).copied().collect();
        excess = excess.max(next.eval_real(&z).norm() - ev.tail_bound_at(n, nx, ny).value);
    }
    checks.push(CheckResult::new("TailBound monotone, dominates L_{N+1}", excess.max(0.0), 0.0));

    let mut worst = 0.0f64;
    let mut violations = 0;
    for (x, y) in pairs.iter().take(5) {
        let r = ev.term_bound_check(x, y)?;
        worst = worst.max(r.worst_ratio);
        violations += r.violations;
    }
    checks.push(
        CheckResult::new("|Lap^m E_n| <= d^m/(n-2m)! (dG|x|)^n |y|^(n-2m)", (worst - 1.0).max(0.0), 1e-9)
            .note(format!("{violations} violations, worst ratio {worst:.3e}")),
    );

    let delta = ev.ctx().delta().ok_or(Error::NoCertifiedDecay)?;
    let table_max = delta.table.iter().map(|t| t.1).fold(0.0, f64::max);
    checks.push(
        CheckResult::new("n max|lambda_n| <= delta_hat", (table_max - delta.delta_hat).max(0.0), 0.0)
            .note(format!("delta_hat = {:.6} over n <= {}", delta.delta_hat, delta.n_max)),
    );

    if ev.ctx().multiplicity().is_zero() {
        let mut gap = 0.0f64;
        for (x, y) in &pairs {
            let v = ev.lk_series(x, y)?;
            let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
            let tail = ev.tail(x, y).value;
            gap = gap.max(((v.re - (dot - norm(x).powi(2) / 2.0).exp()).abs() - tail).max(0.0));
        }
        checks.push(CheckResult::new("k = 0: L = exp(<x,y> - |x|^2/2)", gap, 1e-10).note("residual beyond TailBound"));
    }
    Ok(SuiteReport { suite: Suite::Series, skipped: None, checks })
}

fn quadrature_suite<C: Scalar>(
    ev: &KernelEvaluator<C>,
    rng: &mut ChaCha8Rng,
    opts: &VerifyOptions,
) -> Result<SuiteReport> {
    let d = ev.dim();
    let n = ev.degree();
    let mut checks = Vec::new();

    let rule = gauss_rule(d, n / 2 + 1)?;
    let mut mass = 0.0f64;
    for _ in 0..10 {
        let x = random_in_ball(rng, d, opts.radius);
        mass = mass.max((ev.lk_mass(&x, &rule)? - Complex64::new(1.0, 0.0)).norm());
    }
    checks.push(CheckResult::new("int L(x,y) dgamma(y) = 1", mass, MASS_TOL));

    let top = n.min(EXACT_MAX_DEGREE);
    let rule = gauss_rule(d, (n + top) / 2 + 1)?;
    let mut rec = 0.0f64;
    for _ in 0..5 {
        let x = random_in_ball(rng, d, opts.radius);
        let polys: Vec<Polynomial<C>> = (0..=top as u32)
            .flat_map(|m| monomials_of_degree(d, m))
            .map(|nu| Polynomial::monomial(nu, C::one()))
            .collect();
        for s in ev.reconstruction(&x, &polys, &rule)? {
            rec = rec.max(s.residual - s.bound);
        }
    }
    checks.push(
        CheckResult::new("Phi_x(p) = V_k(e^{Lap/2} p)(x)", rec.max(0.0), RECONSTRUCTION_TOL)
            .note(format!("monomials of degree <= {top}")),
    );

    let rule = gauss_rule(d, n + 1)?;
    let mut rel = 0.0f64;
    for _ in 0..3 {
        let x = random_in_ball(rng, d, opts.radius);
        let (a, b) = ev.phi_x_norm(&x, &rule)?;
        rel = rel.max((a - b).abs() / a);
    }
    checks.push(CheckResult::new("||Phi_x|| series = quadrature", rel, NORM_TOL).note("relative"));

    let rule = gauss_rule(d, n / 2 + 1)?;
    let mut conv = 0.0f64;
    let mut used = 0;
    let delta = ev.ctx().delta().map_or(f64::INFINITY, |e| e.delta_hat);
    let order = ev.ctx().group().order() as f64;
    for (x, y) in sample_pairs(rng, d, opts.radius, 200) {
        if used == 5 {
            break;
        }
        if crate::dunkl::exp_tail(delta * order * norm(&x) * norm(&y), n) >= 1e-3 * CONVOLUTION_TOL {
            continue;
        }
        let s = ev.convolution_check(&x, &y, &rule, 1e-3 * CONVOLUTION_TOL)?;
        conv = conv.max(s.residual - s.tail_bound);
        used += 1;
    }
    checks.push(
        CheckResult::new("E_k(x,y) = int L(x,y+u) dgamma(u)", conv.max(0.0), CONVOLUTION_TOL)
            .note(format!("{used} pairs inside the certified region")),
    );
    Ok(SuiteReport { suite: Suite::Quadrature, skipped: None, checks })
}

/// `x = (1, 0, …)`, `y = (1/2, 0, …)`.
pub fn sign_test_point(d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    x[0] = 1.0;
    y[0] = 0.5;
    (x, y)
}

fn signs_suite<C: Scalar>(ev: &KernelEvaluator<C>) -> Result<SuiteReport> {
    let d = ev.dim();
    let (x, y) = sign_test_point(d);
    let arbiter_ctx = DunklContext::for_roots(ev.ctx().roots().clone(), vec![C::zero()])?;
    let arbiter = KernelEvaluator::new(arbiter_ctx, ev.degree())?;
    let rule = gauss_rule(d, if d <= 2 { 40 } else { 20 })?;
    let mut checks = Vec::new();
    let pairs = [
        (arbiter.gaussian_image_check(&x, &y)?, ev.gaussian_image_check(&x, &y)?),
        (arbiter.fourier_check(&x, &y, &rule)?, ev.fourier_check(&x, &y, &rule)?),
        (arbiter.derivative_relation_check(&x, &y, 0)?, ev.derivative_relation_check(&x, &y, 0)?),
    ];
    for (k0, here) in pairs {
        let valid = k0.validating(SIGN_VALID_TOL);
        let others_far = k0
            .conventions
            .iter()
            .filter(|c| c.residual > SIGN_VALID_TOL)
            .all(|c| c.residual >= SIGN_INVALID_MIN);
        let residuals: Vec<String> =
            k0.conventions.iter().map(|c| format!("{}: {:.3e}", c.label, c.residual)).collect();
        let mut note = format!("k = 0 residuals {}", residuals.join(", "));
        if let Some(cf) = k0.closed_form_residual {
            note.push_str(&format!("; k = 0 closed form {cf:.3e}"));
        }
        let (convention, residual) = match valid.as_slice() {
            [one] if others_far => (Some(one.to_string()), here.residual_of(one).unwrap_or(f64::INFINITY)),
            _ => (None, f64::INFINITY),
        };
        let quoted = &here.conventions[0];
        note.push_str(&format!("; quoted sign \"{}\" residual {:.3e}", quoted.label, quoted.residual));
        let mut c = CheckResult::new(&k0.identity, residual, SIGN_TRANSFER_TOL).note(note);
        c.convention = convention;
        checks.push(c);
    }
    Ok(SuiteReport { suite: Suite::Signs, skipped: None, checks })
}

/// Truncation used by the positivity scan.
pub fn positivity_degree(d: usize) -> usize {
    match d {
        1 => 90,
        2 => 24,
        _ => 12,
    }
}

/// Grid for the positivity scan: `y ∈ [−2,2]^d`, `x` in the box where
/// TailBound stays below `1e−3`, capped at `[−2,2]^d`.
pub fn positivity_grid<C: Scalar>(ev: &KernelEvaluator<C>) -> Vec<(Vec<f64>, Vec<f64>)> {
    let d = ev.dim();
    let ymax = 2.0 * (d as f64).sqrt();
    let rho = (ev.certified_radius(ymax, 1e-3) / (d as f64).sqrt()).min(2.0);
    let steps = match d {
        1 => 40,
        2 => 8,
        _ => 4,
    };
    let axis = |h: f64| -> Vec<f64> { (0..=steps).map(|i| -h + 2.0 * h * i as f64 / steps as f64).collect() };
    let box_points = |h: f64| -> Vec<Vec<f64>> {
        let a = axis(h);
        let mut pts = vec![Vec::new()];
        for _ in 0..d {
            pts = pts.iter().flat_map(|p| a.iter().map(move |&t| [p.as_slice(), &[t]].concat())).collect();
        }
        pts
    };
    let xs = box_points(rho);
    let ys = box_points(2.0);
    xs.iter().flat_map(|x| ys.iter().map(move |y| (x.clone(), y.clone()))).collect()
}

fn positivity_suite<C: Scalar>(ev: &KernelEvaluator<C>) -> Result<SuiteReport> {
    let k = ev.ctx().multiplicity();
    if !k.is_real() || !k.is_nonnegative() {
        return Ok(SuiteReport::skipped(
            Suite::Positivity,
            "positivity is only claimed for real nonnegative k",
        ));
    }
    let d = ev.dim();
    let scan_ev = KernelEvaluator::hermite_only(ev.ctx().clone(), positivity_degree(d).max(ev.degree()))?;
    let grid = positivity_grid(&scan_ev);
    let r = scan_ev.positivity_scan(&grid)?;
    let xmax = grid.iter().map(|p| norm(&p.0)).fold(0.0, f64::max);
    let mut checks = vec![
        CheckResult::new("min (L - TailBound) >= -tol", (-r.min_value).max(0.0), POSITIVITY_TOL).note(format!(
            "N = {}, {} points, |x| <= {xmax:.4}, min {:.6e} at x = {:?}, y = {:?}, max tail {:.3e}",
            scan_ev.degree(),
            r.points,
            r.min_value,
            r.argmin.0,
            r.argmin.1,
            r.max_tail
        )),
        CheckResult::new("Im L = 0 for real k", r.max_imag, IMAG_TOL),
    ];
    checks[1].note = Some(format!("N = {}", scan_ev.degree()));
    Ok(SuiteReport { suite: Suite::Positivity, skipped: None, checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reflection_groups::Family;
    use crate::scalar::CRational;

    #[test]
    fn suite_names() {
        for s in Suite::EACH {
            assert_eq!(s.to_string().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn rank_one_all_suites() {
        let ctx = DunklContext::for_family(Family::Z2, 1, vec![CRational::ratio(1, 2)]).unwrap();
        let ev = KernelEvaluator::new(ctx, 10).unwrap();
        let r = run(&ev, Suite::All, &VerifyOptions::default()).unwrap();
        for s in &r.suites {
            for c in &s.checks {
                assert!(c.pass, "{} / {}: {c:?}", s.suite, c.identity);
            }
        }
        let signs = r.suites.iter().find(|s| s.suite == Suite::Signs).unwrap();
        let conv: Vec<_> = signs.checks.iter().map(|c| c.convention.clone().unwrap()).collect();
        assert_eq!(conv, vec!["-", "+ix", "-T"]);
    }

    #[test]
    fn complex_k_skips_positivity() {
        let k = CRational::parse_scalar("(1/2, 1)").unwrap();
        let ctx = DunklContext::for_family(Family::Z2, 1, vec![k]).unwrap();
        let ev = KernelEvaluator::new(ctx, 4).unwrap();
        let r = run(&ev, Suite::Positivity, &VerifyOptions::default()).unwrap();
        assert!(r.suites[0].skipped.is_some());
        assert!(r.pass);
    }

    #[test]
    fn deterministic_under_seed() {
        let ctx = DunklContext::for_family(Family::Z2, 2, vec![CRational::ratio(1, 2)]).unwrap();
        let ev = KernelEvaluator::new(ctx, 6).unwrap();
        let opts = VerifyOptions { seed: 7, ..Default::default() };
        let a = serde_json::to_string(&run(&ev, Suite::Series, &opts).unwrap()).unwrap();
        let b = serde_json::to_string(&run(&ev, Suite::Series, &opts).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ball_samples_stay_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in 1..4 {
            for _ in 0..100 {
                assert!(norm(&random_in_ball(&mut rng, d, 1.5)) <= 1.5);
            }
        }
    }
}
