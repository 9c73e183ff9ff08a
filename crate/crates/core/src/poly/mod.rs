//! Sparse multivariate polynomials over a [`Scalar`] field.
//!
//! A [`Polynomial`] is a map from exponent vectors to nonzero coefficients.
//! Operations that act on "the space variables" take an `offset` so the same
//! code serves bivariate kernels `p(x, y)`, where `x` occupies variables
//! `0..d` and `y` occupies `d..2d`.

mod eval;
mod fischer;
mod literal;
mod sphere;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::scalar::{CRational, Complex64, Scalar};

pub use eval::CompiledPoly;
pub use fischer::{
    fischer, fischer_via_gaussian, hermite, hermite_float_eval, HermiteData, NormalizedMonomial,
};
pub use literal::{format_polynomial, parse_polynomial};
pub use sphere::{sphere_sup_norm, SupNormEstimate, SPHERE_ASCENT_STEPS, SPHERE_SAMPLES};

/// Exponent vector of a monomial.
pub type Exponent = SmallVec<[u16; 8]>;

pub type ExactPoly = Polynomial<CRational>;
pub type FloatPoly = Polynomial<Complex64>;

#[derive(Clone, PartialEq)]
pub struct Polynomial<C> {
    nvars: usize,
    terms: BTreeMap<Exponent, C>,
}

/// Total degree of an exponent vector.
pub fn total_degree(e: &[u16]) -> u32 {
    e.iter().map(|&v| v as u32).sum()
}

/// All exponent vectors of `nvars` variables with total degree exactly `n`,
/// in descending lexicographic order.
pub fn monomials_of_degree(nvars: usize, n: u32) -> Vec<Exponent> {
    fn rec(nvars: usize, left: u32, cur: &mut Exponent, out: &mut Vec<Exponent>) {
        if cur.len() + 1 == nvars {
            cur.push(left as u16);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for v in (0..=left).rev() {
            cur.push(v as u16);
            rec(nvars, left - v, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if nvars == 0 {
        if n == 0 {
            out.push(Exponent::new());
        }
        return out;
    }
    rec(nvars, n, &mut Exponent::new(), &mut out);
    out
}

/// `ν!` for an exponent vector.
pub fn exponent_factorial(e: &[u16]) -> num::BigInt {
    e.iter()
        .fold(num::BigInt::from(1), |acc, &v| acc * crate::scalar::factorial(v as u32))
}

impl<C: Scalar> Polynomial<C> {
    pub fn zero(nvars: usize) -> Self {
        Polynomial { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: C) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Exponent::from_elem(0, nvars), c);
        p
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, C::one())
    }

    /// The coordinate function `x_i`.
    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = Exponent::from_elem(0, nvars);
        e[i] = 1;
        Self::monomial(e, C::one())
    }

    pub fn monomial(exp: Exponent, c: C) -> Self {
        let mut p = Self::zero(exp.len());
        p.add_term(exp, c);
        p
    }

    /// The linear form `⟨ξ, x⟩` on variables `offset..offset + ξ.len()`.
    pub fn linear_form(nvars: usize, offset: usize, xi: &[C]) -> Self {
        let mut p = Self::zero(nvars);
        for (j, c) in xi.iter().enumerate() {
            let mut e = Exponent::from_elem(0, nvars);
            e[offset + j] = 1;
            p.add_term(e, c.clone());
        }
        p
    }

    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Exponent, C)>) -> Self {
        let mut p = Self::zero(nvars);
        for (e, c) in terms {
            assert_eq!(e.len(), nvars, "exponent length must match the variable count");
            p.add_term(e, c);
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    /// Number of nonzero terms.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, &C)> {
        self.terms.iter()
    }

    pub fn into_terms(self) -> impl Iterator<Item = (Exponent, C)> {
        self.terms.into_iter()
    }

    pub fn coeff(&self, e: &[u16]) -> C {
        self.terms.get(e).cloned().unwrap_or_else(C::zero)
    }

    /// Adds `c·x^e`, dropping the entry if it cancels to zero.
    pub fn add_term(&mut self, e: Exponent, c: C) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(e) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                o.get_mut().add_assign_ref(&c);
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| total_degree(e)).max()
    }

    /// Degree in the variables `offset..offset + len`.
    pub fn degree_in(&self, offset: usize, len: usize) -> Option<u32> {
        self.terms.keys().map(|e| total_degree(&e[offset..offset + len])).max()
    }

    pub fn is_homogeneous(&self) -> bool {
        let mut degs = self.terms.keys().map(|e| total_degree(e));
        match degs.next() {
            None => true,
            Some(d0) => degs.all(|d| d == d0),
        }
    }

    pub fn homogeneous_part(&self, n: u32) -> Self {
        Polynomial {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| total_degree(e) == n)
                .map(|(e, c)| (e.clone(), c.clone()))
                .collect(),
        }
    }

    /// Splits into homogeneous components indexed by degree.
    pub fn homogeneous_parts(&self) -> BTreeMap<u32, Self> {
        let mut out: BTreeMap<u32, Self> = BTreeMap::new();
        for (e, c) in &self.terms {
            out.entry(total_degree(e))
                .or_insert_with(|| Self::zero(self.nvars))
                .terms
                .insert(e.clone(), c.clone());
        }
        out
    }

    /// Homogeneous components with respect to the variables `offset..offset + len`.
    pub fn parts_by_degree_in(&self, offset: usize, len: usize) -> BTreeMap<u32, Self> {
        let mut out: BTreeMap<u32, Self> = BTreeMap::new();
        for (e, c) in &self.terms {
            out.entry(total_degree(&e[offset..offset + len]))
                .or_insert_with(|| Self::zero(self.nvars))
                .terms
                .insert(e.clone(), c.clone());
        }
        out
    }

    pub fn scale(&self, c: &C) -> Self {
        if c.is_zero() {
            return Self::zero(self.nvars);
        }
        let mut out = Self::zero(self.nvars);
        for (e, v) in &self.terms {
            out.add_term(e.clone(), v.mul_ref(c));
        }
        out
    }

    pub fn add_scaled(&mut self, other: &Self, c: &C) {
        self.check_same(other);
        for (e, v) in &other.terms {
            self.add_term(e.clone(), v.mul_ref(c));
        }
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = Self::one(self.nvars);
        for _ in 0..n {
            acc = &acc * self;
        }
        acc
    }

    fn check_same(&self, other: &Self) {
        assert_eq!(self.nvars, other.nvars, "polynomials live in different variable counts");
    }

    /// `∂/∂x_i`.
    pub fn partial(&self, i: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            let k = e[i];
            if k == 0 {
                continue;
            }
            let mut f = e.clone();
            f[i] -= 1;
            out.add_term(f, c.mul_ref(&C::from_i64(k as i64)));
        }
        out
    }

    /// `∂_ξ = Σ_j ξ_j ∂_j` over the variables `offset..offset + ξ.len()`.
    pub fn directional_derivative_in(&self, offset: usize, xi: &[C]) -> Self {
        let mut out = Self::zero(self.nvars);
        for (j, c) in xi.iter().enumerate() {
            if !c.is_zero() {
                out.add_scaled(&self.partial(offset + j), c);
            }
        }
        out
    }

    pub fn directional_derivative(&self, xi: &[C]) -> Self {
        self.directional_derivative_in(0, xi)
    }

    /// Laplacian over the variables `offset..offset + len`.
    pub fn laplacian_in(&self, offset: usize, len: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            for i in offset..offset + len {
                let k = e[i];
                if k < 2 {
                    continue;
                }
                let mut f = e.clone();
                f[i] -= 2;
                out.add_term(f, c.mul_ref(&C::from_i64((k as i64) * (k as i64 - 1))));
            }
        }
        out
    }

    pub fn laplacian(&self) -> Self {
        self.laplacian_in(0, self.nvars)
    }

    /// `e^{sign·Δ/2}` over the variables `offset..offset + len`; the series
    /// terminates because `Δ^m p = 0` once `2m` exceeds the degree.
    pub fn heat_in(&self, offset: usize, len: usize, sign: i64) -> Self {
        let mut out = self.clone();
        let mut power = self.clone();
        let mut m: i64 = 0;
        // sign^m / (2^m m!)
        let mut c = C::one();
        loop {
            power = power.laplacian_in(offset, len);
            if power.is_zero() {
                break;
            }
            m += 1;
            c = c.mul_ref(&C::from_i64(sign)).div_ref(&C::from_i64(2 * m));
            out.add_scaled(&power, &c);
        }
        out
    }

    /// `e^{-Δ/2} p`.
    pub fn heat_half(&self) -> Self {
        self.heat_in(0, self.nvars, -1)
    }

    /// `e^{Δ/2} p`.
    pub fn inverse_heat_half(&self) -> Self {
        self.heat_in(0, self.nvars, 1)
    }

    /// Exact evaluation at a point with scalar coordinates.
    pub fn evaluate(&self, z: &[C]) -> Result<C> {
        if z.len() != self.nvars {
            return Err(Error::DimensionMismatch { expected: self.nvars, got: z.len() });
        }
        let mut acc = C::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (zi, &k) in z.iter().zip(e.iter()) {
                for _ in 0..k {
                    t = t.mul_ref(zi);
                }
            }
            acc.add_assign_ref(&t);
        }
        Ok(acc)
    }

    /// Double-precision evaluation at a complex point.
    pub fn evaluate_c64(&self, z: &[Complex64]) -> Complex64 {
        assert_eq!(z.len(), self.nvars, "point dimension");
        self.terms
            .iter()
            .map(|(e, c)| {
                e.iter()
                    .zip(z)
                    .fold(c.to_c64(), |t, (&k, zi)| t * zi.powu(k as u32))
            })
            .sum()
    }

    /// Fixes the variables `offset..offset + values.len()` and returns a
    /// polynomial in the remaining ones.
    pub fn specialize(&self, offset: usize, values: &[C]) -> Self {
        let len = values.len();
        let rest = self.nvars - len;
        let mut out = Self::zero(rest);
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (i, v) in values.iter().enumerate() {
                for _ in 0..e[offset + i] {
                    t = t.mul_ref(v);
                }
            }
            let f: Exponent = e[..offset].iter().chain(&e[offset + len..]).copied().collect();
            out.add_term(f, t);
        }
        out
    }

    /// Places this polynomial's variables at `offset..offset + nvars` inside
    /// a ring of `total` variables.
    pub fn embed(&self, total: usize, offset: usize) -> Self {
        assert!(offset + self.nvars <= total);
        let mut out = Self::zero(total);
        for (e, c) in &self.terms {
            let mut f = Exponent::from_elem(0, total);
            f[offset..offset + self.nvars].copy_from_slice(e);
            out.terms.insert(f, c.clone());
        }
        out
    }

    /// Substitutes `x ↦ M x` on the block of variables starting at `offset`,
    /// where `m` is a row-major `d×d` matrix: `x_i ↦ Σ_j m[i][j] x_j`.
    pub fn substitute_linear(&self, offset: usize, m: &[C], d: usize) -> Self {
        assert_eq!(m.len(), d * d);
        if let Some(perm) = monomial_matrix(m, d) {
            let mut out = Self::zero(self.nvars);
            for (e, c) in &self.terms {
                let mut f = e.clone();
                let mut coeff = c.clone();
                for i in 0..d {
                    f[offset + i] = 0;
                }
                for (i, (j, s)) in perm.iter().enumerate() {
                    let k = e[offset + i];
                    f[offset + j] += k;
                    for _ in 0..k {
                        coeff = coeff.mul_ref(s);
                    }
                }
                out.add_term(f, coeff);
            }
            return out;
        }
        let images: Vec<Self> = (0..d)
            .map(|i| Self::linear_form(self.nvars, offset, &m[i * d..(i + 1) * d]))
            .collect();
        let mut power_cache: Vec<Vec<Self>> = images.iter().map(|p| vec![Self::one(self.nvars), p.clone()]).collect();
        let mut out = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            let mut base = e.clone();
            for i in 0..d {
                base[offset + i] = 0;
            }
            let mut t = Self::monomial(base, c.clone());
            for i in 0..d {
                let k = e[offset + i] as usize;
                while power_cache[i].len() <= k {
                    let next = &power_cache[i][power_cache[i].len() - 1] * &images[i];
                    power_cache[i].push(next);
                }
                if k > 0 {
                    t = &t * &power_cache[i][k];
                }
            }
            out += &t;
        }
        out
    }

    /// `x ↦ λ x` on the block of variables at `offset..offset + d`.
    pub fn scale_vars(&self, offset: usize, d: usize, lambda: &C) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for i in 0..d {
                for _ in 0..e[offset + i] {
                    t = t.mul_ref(lambda);
                }
            }
            out.add_term(e.clone(), t);
        }
        out
    }

    /// Exact division by the linear form `⟨a, x⟩` on variables at `offset`.
    /// Fails if the remainder does not vanish.
    pub fn div_linear(&self, offset: usize, a: &[C]) -> Result<Self> {
        let pivot = a.iter().position(|c| !c.is_zero()).ok_or(Error::ZeroRoot)?;
        let pv = offset + pivot;
        let inv = C::one().div_ref(&a[pivot]);
        let scale = self.max_abs_coeff();
        let mut rem = self.clone();
        let mut quot = Self::zero(self.nvars);
        loop {
            let top = rem.terms.keys().map(|e| e[pv]).max().unwrap_or(0);
            if top == 0 {
                break;
            }
            let level: Vec<(Exponent, C)> = rem
                .terms
                .iter()
                .filter(|(e, _)| e[pv] == top)
                .map(|(e, c)| (e.clone(), c.clone()))
                .collect();
            for (e, c) in level {
                rem.terms.remove(&e);
                let mut qe = e.clone();
                qe[pv] -= 1;
                let qc = c.mul_ref(&inv);
                for (j, aj) in a.iter().enumerate() {
                    if j == pivot || aj.is_zero() {
                        continue;
                    }
                    let mut f = qe.clone();
                    f[offset + j] += 1;
                    rem.add_term(f, -qc.mul_ref(aj));
                }
                quot.add_term(qe, qc);
            }
        }
        if rem.terms.values().all(|c| c.is_negligible(scale)) {
            Ok(quot)
        } else {
            Err(Error::InexactDivision(format!("{} terms", rem.len())))
        }
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().map(|c| c.abs_f64()).fold(0.0, f64::max)
    }

    pub fn map_coeffs<D: Scalar>(&self, f: impl Fn(&C) -> D) -> Polynomial<D> {
        let mut out = Polynomial::zero(self.nvars);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), f(c));
        }
        out
    }

    pub fn to_float(&self) -> FloatPoly {
        self.map_coeffs(|c| c.to_c64())
    }

    /// True when every coefficient is real.
    pub fn is_real(&self) -> bool {
        self.terms.values().all(|c| c.is_real())
    }

    /// Approximate equality: exact for exact scalars, relative tolerance otherwise.
    pub fn approx_eq(&self, other: &Self, rel: f64) -> bool {
        let diff = self - other;
        if C::EXACT {
            return diff.is_zero();
        }
        let scale = self.max_abs_coeff().max(other.max_abs_coeff()).max(1.0);
        diff.max_abs_coeff() <= rel * scale
    }
}

/// Detects signed permutation matrices, returning `(column, sign)` per row.
fn monomial_matrix<C: Scalar>(m: &[C], d: usize) -> Option<Vec<(usize, C)>> {
    let mut out = Vec::with_capacity(d);
    for i in 0..d {
        let mut hit = None;
        for j in 0..d {
            let v = &m[i * d + j];
            if !v.is_zero() {
                if hit.is_some() {
                    return None;
                }
                hit = Some((j, v.clone()));
            }
        }
        out.push(hit?);
    }
    Some(out)
}

impl<C: Scalar> fmt::Debug for Polynomial<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial[{}]({})", self.nvars, format_polynomial(self))
    }
}

impl<C: Scalar> fmt::Display for Polynomial<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_polynomial(self))
    }
}

impl<C: Scalar> std::ops::AddAssign<&Polynomial<C>> for Polynomial<C> {
    fn add_assign(&mut self, rhs: &Polynomial<C>) {
        self.check_same(rhs);
        for (e, c) in &rhs.terms {
            self.add_term(e.clone(), c.clone());
        }
    }
}

impl<C: Scalar> std::ops::SubAssign<&Polynomial<C>> for Polynomial<C> {
    fn sub_assign(&mut self, rhs: &Polynomial<C>) {
        self.check_same(rhs);
        for (e, c) in &rhs.terms {
            self.add_term(e.clone(), -c.clone());
        }
    }
}

impl<C: Scalar> Add for &Polynomial<C> {
    type Output = Polynomial<C>;
    fn add(self, rhs: Self) -> Polynomial<C> {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl<C: Scalar> Sub for &Polynomial<C> {
    type Output = Polynomial<C>;
    fn sub(self, rhs: Self) -> Polynomial<C> {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl<C: Scalar> Neg for &Polynomial<C> {
    type Output = Polynomial<C>;
    fn neg(self) -> Polynomial<C> {
        self.scale(&-C::one())
    }
}

impl<C: Scalar> Mul for &Polynomial<C> {
    type Output = Polynomial<C>;
    fn mul(self, rhs: Self) -> Polynomial<C> {
        self.check_same(rhs);
        let mut out = Polynomial::zero(self.nvars);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &rhs.terms {
                let e: Exponent = e1.iter().zip(e2.iter()).map(|(a, b)| a + b).collect();
                out.add_term(e, c1.mul_ref(c2));
            }
        }
        out
    }
}
