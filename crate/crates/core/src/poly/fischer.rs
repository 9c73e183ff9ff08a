//! Fischer pairing, normalized monomials `φ_ν`, and Hermite polynomials.
//!
//! `φ_ν = x^ν / √(ν!)` is irrational, so the exact layer carries `x^ν`
//! together with the rational square of its scale `1/ν!`. A square root is
//! taken only when a value leaves the exact layer.

use num::rational::BigRational;
use num::traits::ToPrimitive;

use super::{exponent_factorial, total_degree, Exponent, Polynomial};
use crate::error::{Error, Result};
use crate::quad::QuadratureRule;
use crate::scalar::{Complex64, Scalar};

/// `[p, q] = p(∂) q |_{x=0} = Σ_ν p_ν q_ν ν!` (bilinear, no conjugation).
pub fn fischer<C: Scalar>(p: &Polynomial<C>, q: &Polynomial<C>) -> C {
    assert_eq!(p.nvars(), q.nvars());
    let (small, large) = if p.len() <= q.len() { (p, q) } else { (q, p) };
    let mut acc = C::zero();
    for (e, c) in small.terms() {
        let other = large.coeff(e);
        if other.is_zero() {
            continue;
        }
        let fact = C::from_rational(&BigRational::from_integer(exponent_factorial(e)));
        acc.add_assign_ref(&c.mul_ref(&other).mul_ref(&fact));
    }
    acc
}

/// `∫ (e^{-Δ/2} p)(z) (e^{-Δ/2} q)(z) dγ(z)` by quadrature.
pub fn fischer_via_gaussian<C: Scalar>(
    p: &Polynomial<C>,
    q: &Polynomial<C>,
    rule: &QuadratureRule,
) -> Result<Complex64> {
    let needed = (p.degree().unwrap_or(0) + q.degree().unwrap_or(0)) as usize;
    if needed > rule.exact_degree() {
        return Err(Error::RuleTooWeak { needed, available: rule.exact_degree() });
    }
    if rule.dim() != p.nvars() {
        return Err(Error::DimensionMismatch { expected: p.nvars(), got: rule.dim() });
    }
    let hp = super::CompiledPoly::new(&p.heat_half());
    let hq = super::CompiledPoly::new(&q.heat_half());
    Ok(rule.integrate(|z| hp.eval_real(z) * hq.eval_real(z)))
}

/// `φ_ν`, held as `x^ν` plus the exact squared scale `1/ν!`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedMonomial {
    pub nu: Exponent,
    pub scale_sq: BigRational,
}

impl NormalizedMonomial {
    pub fn new(nu: Exponent) -> Self {
        let scale_sq = BigRational::new(1.into(), exponent_factorial(&nu));
        NormalizedMonomial { nu, scale_sq }
    }

    pub fn degree(&self) -> u32 {
        total_degree(&self.nu)
    }

    pub fn scale(&self) -> f64 {
        self.scale_sq.to_f64().unwrap_or(0.0).sqrt()
    }

    /// The unscaled monomial `x^ν`.
    pub fn monomial<C: Scalar>(&self) -> Polynomial<C> {
        Polynomial::monomial(self.nu.clone(), C::one())
    }

    pub fn eval(&self, x: &[Complex64]) -> Complex64 {
        self.nu
            .iter()
            .zip(x)
            .fold(Complex64::new(self.scale(), 0.0), |t, (&k, xi)| t * xi.powu(k as u32))
    }
}

/// `H_ν = e^{-Δ/2} φ_ν` and the Hermite function `h_ν = e^{-‖·‖²/2} H_ν`.
#[derive(Clone, Debug)]
pub struct HermiteData<C: Scalar> {
    pub phi: NormalizedMonomial,
    /// `e^{-Δ/2} x^ν`; multiply by `√(scale_sq)` to obtain `H_ν`.
    pub unscaled: Polynomial<C>,
}

impl<C: Scalar> HermiteData<C> {
    pub fn degree(&self) -> u32 {
        self.phi.degree()
    }

    /// `H_ν(z)`.
    pub fn eval(&self, z: &[f64]) -> f64 {
        let zc: Vec<Complex64> = z.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        (self.unscaled.evaluate_c64(&zc) * self.phi.scale()).re
    }

    /// `h_ν(z) = e^{-‖z‖²/2} H_ν(z)`.
    pub fn eval_function(&self, z: &[f64]) -> f64 {
        let r2: f64 = z.iter().map(|v| v * v).sum();
        (-r2 / 2.0).exp() * self.eval(z)
    }

    /// The polynomial `H_ν` in floating point.
    pub fn to_float(&self) -> Polynomial<Complex64> {
        self.unscaled.to_float().scale(&Complex64::new(self.phi.scale(), 0.0))
    }
}

pub fn hermite<C: Scalar>(nu: &[u16]) -> HermiteData<C> {
    let phi = NormalizedMonomial::new(nu.iter().copied().collect());
    let unscaled = phi.monomial::<C>().heat_half();
    HermiteData { phi, unscaled }
}

/// `H_ν(z)` from the three-term recurrence of the orthonormal probabilists'
/// Hermite polynomials, without going through the heat operator.
pub fn hermite_float_eval(nu: &[u16], z: &[f64]) -> f64 {
    nu.iter()
        .zip(z)
        .map(|(&n, &t)| {
            let (mut prev, mut cur) = (0.0f64, 1.0f64);
            for m in 0..n as usize {
                let next = (t * cur - (m as f64).sqrt() * prev) / ((m + 1) as f64).sqrt();
                prev = cur;
                cur = next;
            }
            cur
        })
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{monomials_of_degree, parse_polynomial, ExactPoly};
    use crate::quad::gauss_rule;
    use crate::scalar::CRational;
    use proptest::prelude::*;

    fn p(s: &str, d: usize) -> ExactPoly {
        parse_polynomial(s, d).unwrap()
    }

    #[test]
    fn fischer_examples() {
        let q = p("3 + x1 - 2 * x2^2", 2);
        assert_eq!(fischer(&ExactPoly::one(2), &q), CRational::from_i64(3));
        let m = p("x1 x2", 2);
        assert_eq!(fischer(&m, &m), CRational::one());
        // [x^ν, x^μ] = δ ν!
        assert_eq!(fischer(&p("x1^3 x2", 2), &p("x1^3 x2", 2)), CRational::from_i64(6));
        assert!(fischer(&p("x1^2", 2), &p("x2^2", 2)).is_zero());
    }

    #[test]
    fn fischer_of_power_form_against_phi() {
        // [⟨x,·⟩^n, x^ν] = n! x^ν  for |ν| = n, at x = (2, -1/3)
        let x = [CRational::from_i64(2), CRational::ratio(-1, 3)];
        let n = 4u32;
        let form = ExactPoly::linear_form(2, 0, &x).pow(n);
        let nfact = CRational::from_rational(&BigRational::from_integer(crate::scalar::factorial(n)));
        for nu in monomials_of_degree(2, n) {
            let mono = ExactPoly::monomial(nu.clone(), CRational::one());
            let lhs = fischer(&form, &mono);
            let rhs = nfact.mul_ref(&mono.evaluate(&x).unwrap());
            assert_eq!(lhs, rhs, "nu = {nu:?}");
        }
    }

    #[test]
    fn hermite_examples() {
        let h0 = hermite::<CRational>(&[0]);
        assert_eq!(h0.unscaled, ExactPoly::one(1));
        let h1 = hermite::<CRational>(&[1]);
        assert_eq!(h1.unscaled, p("x1", 1));
        let h2 = hermite::<CRational>(&[2]);
        assert_eq!(h2.unscaled, p("x1^2 - 1", 1));
        assert_eq!(h2.phi.scale_sq, BigRational::new(1.into(), 2.into()));
        let v = h2.eval(&[1.7]);
        assert!((v - (1.7f64 * 1.7 - 1.0) / 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn recurrence_matches_heat_route() {
        for nu in [[0u16, 3], [2, 2], [5, 1], [0, 7]] {
            let h = hermite::<CRational>(&nu);
            for z in [[0.3, -1.2], [2.5, 0.7]] {
                let a = h.eval(&z);
                let b = hermite_float_eval(&nu, &z);
                assert!((a - b).abs() < 1e-11 * a.abs().max(1.0), "{nu:?} {z:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn gaussian_fischer_examples() {
        let rule = gauss_rule(1, 10).unwrap();
        let one = ExactPoly::one(1);
        let x = p("x1", 1);
        assert!((fischer_via_gaussian(&one, &one, &rule).unwrap().re - 1.0).abs() < 1e-13);
        assert!((fischer_via_gaussian(&x, &x, &rule).unwrap().re - 1.0).abs() < 1e-13);
        let rule2 = gauss_rule(2, 10).unwrap();
        let v = fischer_via_gaussian(&p("x1^2", 2), &p("x2^2", 2), &rule2).unwrap();
        assert!(v.norm() < 1e-13);
        let weak = gauss_rule(1, 2).unwrap();
        assert!(matches!(
            fischer_via_gaussian(&p("x1^3", 1), &p("x1^3", 1), &weak),
            Err(Error::RuleTooWeak { needed: 6, available: 3 })
        ));
    }

    #[test]
    fn hermite_gram_matrix_is_identity() {
        let rule = gauss_rule(2, 12).unwrap();
        let basis: Vec<_> = (0..=5u32)
            .flat_map(|n| monomials_of_degree(2, n))
            .map(|nu| hermite::<CRational>(&nu))
            .collect();
        for a in &basis {
            for b in &basis {
                let g = rule.integrate(|z| Complex64::new(a.eval(z) * b.eval(z), 0.0)).re;
                let expect = if a.phi.nu == b.phi.nu { 1.0 } else { 0.0 };
                assert!((g - expect).abs() < 1e-10, "{:?} {:?}: {g}", a.phi.nu, b.phi.nu);
            }
        }
    }

    fn small_poly(d: usize, max_deg: u32) -> impl Strategy<Value = ExactPoly> {
        let monos: Vec<Exponent> = (0..=max_deg).flat_map(|n| monomials_of_degree(d, n)).collect();
        let k = monos.len();
        proptest::collection::vec((0..k, -6i64..=6, 1i64..=4), 0..6).prop_map(move |ts| {
            ExactPoly::from_terms(
                d,
                ts.into_iter().map(|(i, n, den)| (monos[i].clone(), CRational::ratio(n, den))),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn heat_pair_is_inverse(q in small_poly(2, 10)) {
            prop_assert_eq!(q.heat_half().inverse_heat_half(), q.clone());
            prop_assert_eq!(q.inverse_heat_half().heat_half(), q);
        }

        #[test]
        fn fischer_symmetric_and_graded(a in small_poly(2, 6), b in small_poly(2, 6)) {
            prop_assert_eq!(fischer(&a, &b), fischer(&b, &a));
            for (n, pa) in a.homogeneous_parts() {
                for (m, pb) in b.homogeneous_parts() {
                    if n != m {
                        prop_assert!(fischer(&pa, &pb).is_zero());
                    }
                }
            }
        }

        #[test]
        fn multiplication_adjoint_to_derivative(a in small_poly(2, 5), b in small_poly(2, 6), i in 0usize..2) {
            let xa = &ExactPoly::var(2, i) * &a;
            prop_assert_eq!(fischer(&xa, &b), fischer(&a, &b.partial(i)));
        }
    }
}
