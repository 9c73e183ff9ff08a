//! Dunkl operators, the inverses `H_n` of the Euler-type operators `W_n`,
//! the intertwining operator `V_k`, and the homogeneous kernel pieces `E_n`.

use std::collections::{BTreeMap, HashMap};

use num::rational::BigRational;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::poly::{monomials_of_degree, sphere_sup_norm, Exponent, Polynomial};
use crate::reflection_groups::{
    generate_group, select_positive, Family, MultiplicityFunction, PositiveSystem, ReflectionGroup,
    RootSystem, DEFAULT_GROUP_CAP,
};
use crate::scalar::{factorial, ln_factorial, Complex64, Scalar};

/// Map `g ↦ c(g)` on group-element indices, acting on polynomials as `Σ c(g) L_g`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupAlgebraElement<C> {
    coeffs: Vec<C>,
}

impl<C: Scalar> GroupAlgebraElement<C> {
    pub fn zero(order: usize) -> Self {
        GroupAlgebraElement { coeffs: vec![C::zero(); order] }
    }

    pub fn unit(order: usize, identity: usize) -> Self {
        let mut e = Self::zero(order);
        e.coeffs[identity] = C::one();
        e
    }

    pub fn from_coefficients(coeffs: Vec<C>) -> Self {
        GroupAlgebraElement { coeffs }
    }

    pub fn coefficients(&self) -> &[C] {
        &self.coeffs
    }

    pub fn coeff(&self, g: usize) -> &C {
        &self.coeffs[g]
    }

    /// `(a * b)(g) = Σ_{st = g} a(s) b(t)`.
    pub fn convolve(&self, other: &Self, group: &ReflectionGroup<C>) -> Self {
        let n = group.order();
        let mut out = Self::zero(n);
        for (s, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (t, b) in other.coeffs.iter().enumerate() {
                if !b.is_zero() {
                    out.coeffs[group.mul(s, t)].add_assign_ref(&a.mul_ref(b));
                }
            }
        }
        out
    }

    pub fn apply_in(&self, group: &ReflectionGroup<C>, p: &Polynomial<C>, offset: usize) -> Polynomial<C> {
        let mut out = Polynomial::zero(p.nvars());
        for (g, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                out.add_scaled(&group.act_on_polynomial_at(g, p, offset), c);
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(Scalar::abs_f64).fold(0.0, f64::max)
    }
}

/// A realized `H_n`: group-algebra coefficients `λ_n`, or, when the
/// regular-representation system is singular, the inverse of `W_n` on the
/// monomial basis of `P_n`.
#[derive(Clone, Debug)]
pub enum HOperator<C> {
    GroupAlgebra(GroupAlgebraElement<C>),
    Matrix { basis: Vec<Exponent>, inverse: Matrix<C> },
}

impl<C: Scalar> HOperator<C> {
    pub fn lambda(&self) -> Option<&GroupAlgebraElement<C>> {
        match self {
            HOperator::GroupAlgebra(l) => Some(l),
            HOperator::Matrix { .. } => None,
        }
    }

    /// Applies `H_n` on the variable block `offset..offset + d`; `p` must be
    /// homogeneous of degree `n` in that block.
    pub fn apply_in(&self, group: &ReflectionGroup<C>, p: &Polynomial<C>, offset: usize) -> Polynomial<C> {
        match self {
            HOperator::GroupAlgebra(l) => l.apply_in(group, p, offset),
            HOperator::Matrix { basis, inverse } => {
                let d = group.dim();
                let index: HashMap<&[u16], usize> =
                    basis.iter().enumerate().map(|(i, e)| (e.as_slice(), i)).collect();
                let mut out = Polynomial::zero(p.nvars());
                for (e, c) in p.terms() {
                    let col = index[&e[offset..offset + d]];
                    for (row, b) in basis.iter().enumerate() {
                        let m = &inverse[(row, col)];
                        if m.is_zero() {
                            continue;
                        }
                        let mut f = e.clone();
                        f[offset..offset + d].copy_from_slice(b);
                        out.add_term(f, c.mul_ref(m));
                    }
                }
                out
            }
        }
    }
}

/// Empirical `δ̂ = max_n n·max_g |λ_n(g)|` over the degrees that have `λ_n`.
#[derive(Clone, Debug)]
pub struct DeltaEstimate {
    pub delta_hat: f64,
    pub n_max: usize,
    /// `(n, n·max_g |λ_n(g)|)`.
    pub table: Vec<(usize, f64)>,
    /// Degrees realized by the matrix fallback, hence without `λ_n`.
    pub excluded: Vec<usize>,
}

/// `E_k(x,y)` truncated at `degree`, with the certified remainder bound.
#[derive(Clone, Copy, Debug)]
pub struct KernelValue {
    pub value: Complex64,
    pub tail_bound: f64,
    pub degree: usize,
    /// `|E_N(x,y)|`, an a-posteriori indicator for the truncation.
    pub last_term: f64,
}

/// One sample of the growth bound `|V_k p(x)| ≤ (δ̂|G|‖x‖)^n/n! ‖p‖_S`.
#[derive(Clone, Debug)]
pub struct BoundSample {
    pub degree: u32,
    pub lhs: f64,
    pub rhs: f64,
    /// Set when `lhs` exceeds `rhs` by more than 5%.
    pub violated: bool,
}

#[derive(Clone, Debug)]
pub struct DunklContext<C: Scalar> {
    roots: RootSystem<C>,
    positives: PositiveSystem<C>,
    group: ReflectionGroup<C>,
    k: MultiplicityFunction<C>,
    h_cache: Vec<HOperator<C>>,
    /// `V_k(x^ν)` for every `ν` with `|ν| ≤ prepared_degree`.
    vk_table: HashMap<Exponent, Polynomial<C>>,
    delta: Option<DeltaEstimate>,
}

impl<C: Scalar> DunklContext<C> {
    pub fn new(positives: PositiveSystem<C>, group: ReflectionGroup<C>, k: MultiplicityFunction<C>) -> Self {
        let d = group.dim();
        let mut vk_table = HashMap::new();
        vk_table.insert(Exponent::from_elem(0, d), Polynomial::one(d));
        DunklContext {
            roots: positives.base().clone(),
            positives,
            group,
            k,
            h_cache: Vec::new(),
            vk_table,
            delta: None,
        }
    }

    /// Standard family with one multiplicity value per root orbit.
    pub fn for_family(family: Family, param: usize, orbit_values: Vec<C>) -> Result<Self> {
        let rs = RootSystem::build(family, param)?;
        Self::for_roots(rs, orbit_values)
    }

    pub fn for_roots(rs: RootSystem<C>, orbit_values: Vec<C>) -> Result<Self> {
        let ps = select_positive(&rs);
        let group = generate_group(&ps, DEFAULT_GROUP_CAP)?;
        let k = if orbit_values.len() == 1 {
            MultiplicityFunction::uniform(&group, &ps, orbit_values.into_iter().next().unwrap())
        } else {
            MultiplicityFunction::from_orbit_values(&group, &ps, orbit_values)?
        };
        Ok(Self::new(ps, group, k))
    }

    pub fn dim(&self) -> usize {
        self.group.dim()
    }

    pub fn roots(&self) -> &RootSystem<C> {
        &self.roots
    }

    pub fn positives(&self) -> &PositiveSystem<C> {
        &self.positives
    }

    pub fn group(&self) -> &ReflectionGroup<C> {
        &self.group
    }

    pub fn multiplicity(&self) -> &MultiplicityFunction<C> {
        &self.k
    }

    pub fn gamma(&self) -> &C {
        self.k.gamma()
    }

    pub fn prepared_degree(&self) -> usize {
        self.h_cache.len()
    }

    pub fn delta(&self) -> Option<&DeltaEstimate> {
        self.delta.as_ref()
    }

    /// `H_n`, for `1 ≤ n ≤ prepared_degree`.
    pub fn h(&self, n: usize) -> Result<&HOperator<C>> {
        if n == 0 || n > self.h_cache.len() {
            return Err(Error::NotPrepared { requested: n, prepared: self.h_cache.len() });
        }
        Ok(&self.h_cache[n - 1])
    }

    fn require(&self, n: usize) -> Result<()> {
        if n > self.prepared_degree() {
            return Err(Error::NotPrepared { requested: n, prepared: self.prepared_degree() });
        }
        Ok(())
    }

    /// Realizes `H_1..H_n` and tabulates `V_k(x^ν)` for `|ν| ≤ n`.
    pub fn prepare(&mut self, n: usize) -> Result<()> {
        for m in self.prepared_degree() + 1..=n {
            let h = self.solve_h(m)?;
            self.h_cache.push(h);
            self.extend_vk_table(m as u32)?;
        }
        Ok(())
    }

    /// Installs a previously computed `λ_n` (for example from a cache file)
    /// after checking `W_n H_n = id` on `P_n`.
    pub fn install_lambda(&mut self, n: usize, lambda: Vec<C>) -> Result<()> {
        if n != self.prepared_degree() + 1 {
            return Err(Error::NotPrepared { requested: n, prepared: self.prepared_degree() });
        }
        if lambda.len() != self.group.order() {
            return Err(Error::DimensionMismatch { expected: self.group.order(), got: lambda.len() });
        }
        let h = HOperator::GroupAlgebra(GroupAlgebraElement::from_coefficients(lambda));
        self.check_h(n, &h)?;
        self.h_cache.push(h);
        self.extend_vk_table(n as u32)
    }

    fn extend_vk_table(&mut self, n: u32) -> Result<()> {
        let d = self.dim();
        let h = self.h(n as usize)?.clone();
        for nu in monomials_of_degree(d, n) {
            // V x^ν = H_n(Σ_j ν_j x_j V(x^{ν - e_j}))
            let mut q = Polynomial::zero(d);
            for j in 0..d {
                if nu[j] == 0 {
                    continue;
                }
                let mut lower = nu.clone();
                lower[j] -= 1;
                let xj = Polynomial::var(d, j);
                q.add_scaled(&(&xj * &self.vk_table[&lower]), &C::from_i64(nu[j] as i64));
            }
            let v = h.apply_in(&self.group, &q, 0);
            self.vk_table.insert(nu, v);
        }
        Ok(())
    }

    /// `T_ξ p` on the variable block at `offset`.
    pub fn dunkl_apply_in(&self, xi: &[C], p: &Polynomial<C>, offset: usize) -> Result<Polynomial<C>> {
        if xi.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: xi.len() });
        }
        let mut out = p.directional_derivative_in(offset, xi);
        for ((alpha, k), &s) in self
            .positives
            .positive_roots()
            .zip(self.k.positive_values())
            .zip(self.group.reflections())
        {
            if k.is_zero() {
                continue;
            }
            let pair = crate::reflection_groups::dot(alpha, xi);
            if pair.is_zero() {
                continue;
            }
            let diff = p - &self.group.act_on_polynomial_at(s, p, offset);
            if diff.is_zero() {
                continue;
            }
            let quotient = diff.div_linear(offset, alpha)?;
            out.add_scaled(&quotient, &k.mul_ref(&pair));
        }
        Ok(out)
    }

    pub fn dunkl_apply(&self, xi: &[C], p: &Polynomial<C>) -> Result<Polynomial<C>> {
        self.dunkl_apply_in(xi, p, 0)
    }

    /// `T_j = T_{e_j}`.
    pub fn dunkl_basis(&self, j: usize, p: &Polynomial<C>, offset: usize) -> Result<Polynomial<C>> {
        let mut e = vec![C::zero(); self.dim()];
        e[j] = C::one();
        self.dunkl_apply_in(&e, p, offset)
    }

    /// `A p = Σ_{α∈R_+} k(α) L_{σ_α} p`.
    pub fn operator_a(&self, p: &Polynomial<C>) -> Polynomial<C> {
        self.operator_a_in(p, 0)
    }

    pub fn operator_a_in(&self, p: &Polynomial<C>, offset: usize) -> Polynomial<C> {
        let mut out = Polynomial::zero(p.nvars());
        for (k, &s) in self.k.positive_values().iter().zip(self.group.reflections()) {
            if !k.is_zero() {
                out.add_scaled(&self.group.act_on_polynomial_at(s, p, offset), k);
            }
        }
        out
    }

    fn w_direct(&self, n: usize, p: &Polynomial<C>, offset: usize) -> Polynomial<C> {
        let mut out = p.scale(&C::from_i64(n as i64).add_ref(self.gamma()));
        out -= &self.operator_a_in(p, offset);
        out
    }

    /// `W_n p = Σ_j x_j T_j p`, computed through the Dunkl operators.
    pub fn euler_w_via_dunkl(&self, p: &Polynomial<C>) -> Result<Polynomial<C>> {
        let d = self.dim();
        let mut out = Polynomial::zero(d);
        for j in 0..d {
            out += &(&Polynomial::var(d, j) * &self.dunkl_basis(j, p, 0)?);
        }
        Ok(out)
    }

    /// `W_n p = ((n+γ) − A) p`, cross-checked against `Σ_j x_j T_j p`.
    pub fn euler_w(&self, n: usize, p: &Polynomial<C>) -> Result<Polynomial<C>> {
        if !p.is_homogeneous() || p.degree().is_some_and(|m| m as usize != n) {
            return Err(Error::NonHomogeneous(format!(" of degree {n}")));
        }
        let direct = self.w_direct(n, p, 0);
        let via = self.euler_w_via_dunkl(p)?;
        if !same(&direct, &via) {
            return Err(Error::Internal("the two forms of W_n disagree".into()));
        }
        Ok(direct)
    }

    /// Solves `((n+γ)e − a) h = e` in the group algebra, falling back to
    /// inverting `W_n` on the monomial basis of `P_n`.
    pub fn solve_h(&self, n: usize) -> Result<HOperator<C>> {
        assert!(n >= 1, "H_n is defined for n >= 1");
        let order = self.group.order();
        let e = self.group.identity();
        let mut w = vec![C::zero(); order];
        w[e] = C::from_i64(n as i64).add_ref(self.gamma());
        for (k, &s) in self.k.positive_values().iter().zip(self.group.reflections()) {
            w[s] = w[s].sub_ref(k);
        }
        let mut m = Matrix::<C>::zeros(order, order);
        for (s, ws) in w.iter().enumerate() {
            if ws.is_zero() {
                continue;
            }
            for t in 0..order {
                let st = self.group.mul(s, t);
                let v = m[(st, t)].add_ref(ws);
                m[(st, t)] = v;
            }
        }
        let mut rhs = vec![C::zero(); order];
        rhs[e] = C::one();
        let h = match m.solve(&rhs) {
            Some(lambda) => HOperator::GroupAlgebra(GroupAlgebraElement::from_coefficients(lambda)),
            None => self.matrix_h(n)?,
        };
        self.check_h(n, &h)?;
        Ok(h)
    }

    fn matrix_h(&self, n: usize) -> Result<HOperator<C>> {
        let d = self.dim();
        let basis = monomials_of_degree(d, n as u32);
        let index: HashMap<&Exponent, usize> = basis.iter().enumerate().map(|(i, e)| (e, i)).collect();
        let size = basis.len();
        let mut w = Matrix::zeros(size, size);
        for (col, b) in basis.iter().enumerate() {
            let img = self.w_direct(n, &Polynomial::monomial(b.clone(), C::one()), 0);
            for (e, c) in img.terms() {
                w[(index[e], col)] = c.clone();
            }
        }
        let inverse = w.inverse().ok_or(Error::NotInMStar { degree: n })?;
        Ok(HOperator::Matrix { basis, inverse })
    }

    fn check_h(&self, n: usize, h: &HOperator<C>) -> Result<()> {
        let d = self.dim();
        for b in monomials_of_degree(d, n as u32) {
            let p = Polynomial::monomial(b, C::one());
            let back = self.w_direct(n, &h.apply_in(&self.group, &p, 0), 0);
            if !same(&back, &p) {
                return Err(Error::Internal(format!("W_n H_n is not the identity at n = {n}")));
            }
        }
        Ok(())
    }

    /// `V_k(x^ν)`.
    pub fn vk_monomial(&self, nu: &[u16]) -> Result<&Polynomial<C>> {
        let n: u32 = nu.iter().map(|&v| v as u32).sum();
        self.require(n as usize)?;
        Ok(&self.vk_table[nu])
    }

    /// `V_k p`.
    pub fn intertwine(&self, p: &Polynomial<C>) -> Result<Polynomial<C>> {
        self.intertwine_in(p, 0)
    }

    /// `V_k` acting on the variable block at `offset`; other variables are parameters.
    pub fn intertwine_in(&self, p: &Polynomial<C>, offset: usize) -> Result<Polynomial<C>> {
        let d = self.dim();
        if let Some(m) = p.degree_in(offset, d) {
            self.require(m as usize)?;
        }
        let mut out = Polynomial::zero(p.nvars());
        for (e, c) in p.terms() {
            let image = &self.vk_table[&e[offset..offset + d]];
            let mut rest = e.clone();
            rest[offset..offset + d].iter_mut().for_each(|v| *v = 0);
            let lifted = image.embed(p.nvars(), offset);
            out.add_scaled(&(&lifted * &Polynomial::monomial(rest, C::one())), c);
        }
        Ok(out)
    }

    /// Matrix of `V_k` on the monomial basis of `P_n` (columns are images).
    pub fn vk_matrix(&self, n: u32) -> Result<(Vec<Exponent>, Matrix<C>)> {
        self.require(n as usize)?;
        let basis = monomials_of_degree(self.dim(), n);
        let index: HashMap<&Exponent, usize> = basis.iter().enumerate().map(|(i, e)| (e, i)).collect();
        let mut m = Matrix::zeros(basis.len(), basis.len());
        for (col, b) in basis.iter().enumerate() {
            for (e, c) in self.vk_table[b].terms() {
                m[(index[e], col)] = c.clone();
            }
        }
        Ok((basis, m))
    }

    /// `V_k^{-1} q`, one dense solve per homogeneous degree.
    pub fn intertwine_inverse(&self, q: &Polynomial<C>) -> Result<Polynomial<C>> {
        let d = self.dim();
        let mut out = Polynomial::zero(d);
        for (n, part) in q.homogeneous_parts() {
            let (basis, m) = self.vk_matrix(n)?;
            let rhs: Vec<C> = basis.iter().map(|b| part.coeff(b)).collect();
            let sol = m
                .solve(&rhs)
                .ok_or_else(|| Error::Internal(format!("V_k singular on P_{n}")))?;
            for (b, c) in basis.into_iter().zip(sol) {
                out.add_term(b, c);
            }
        }
        Ok(out)
    }

    /// `E_n(x,y)` as a polynomial in `2d` variables (`x` first, then `y`),
    /// through the recursion `E_n = H_n^x(⟨x,y⟩ E_{n−1})`.
    pub fn homogeneous_kernel_recursive(&self, n: usize) -> Result<Polynomial<C>> {
        self.require(n)?;
        let d = self.dim();
        let pair = pairing(d);
        let mut e = Polynomial::one(2 * d);
        for m in 1..=n {
            e = self.h(m)?.apply_in(&self.group, &(&pair * &e), 0);
        }
        Ok(e)
    }

    /// `E_n(x,y) = Σ_{|ν|=n} V_k(x^ν)(x) y^ν/ν!`.
    pub fn homogeneous_kernel(&self, n: usize) -> Result<Polynomial<C>> {
        self.require(n)?;
        let d = self.dim();
        let mut out = Polynomial::zero(2 * d);
        for nu in monomials_of_degree(d, n as u32) {
            let mut ey = Exponent::from_elem(0, 2 * d);
            ey[d..].copy_from_slice(&nu);
            let inv = C::from_rational(&BigRational::new(1.into(), crate::poly::exponent_factorial(&nu)));
            let term = &self.vk_table[&nu].embed(2 * d, 0) * &Polynomial::monomial(ey, inv);
            out += &term;
        }
        Ok(out)
    }

    /// `y ↦ E_n(x,y)` at a fixed `x`.
    pub fn homogeneous_kernel_at(&self, n: usize, x: &[C]) -> Result<Polynomial<C>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(self.homogeneous_kernel(n)?.specialize(0, x))
    }

    /// `Σ_{|ν|=n} V_k(x^ν)(x) y^ν/ν!` evaluated in double precision.
    pub fn homogeneous_kernel_value(&self, n: usize, x: &[Complex64], y: &[Complex64]) -> Result<Complex64> {
        self.require(n)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for nu in monomials_of_degree(self.dim(), n as u32) {
            let v = self.vk_table[&nu].evaluate_c64(x);
            let mut t = v;
            for (yi, &k) in y.iter().zip(nu.iter()) {
                t *= yi.powu(k as u32);
            }
            let fact: f64 = nu.iter().map(|&k| ln_factorial(k as u32)).sum();
            acc += t * (-fact).exp();
        }
        Ok(acc)
    }

    /// `E_k(x,y)` summed until `Σ_{n>N} (δ̂|G|‖x‖‖y‖)^n/n! < tol`, with
    /// `N ≤ prepared_degree`.
    pub fn dunkl_kernel(&self, x: &[Complex64], y: &[Complex64], tol: f64) -> Result<KernelValue> {
        let delta = self.delta.as_ref().ok_or(Error::NoCertifiedDecay)?.delta_hat;
        let g = self.group.order() as f64;
        let (nx, ny) = (norm_c(x), norm_c(y));
        let a = delta * g * nx * ny;
        let cap = self.prepared_degree();
        let degree = (0..=cap).find(|&n| exp_tail(a, n) < tol);
        let Some(degree) = degree else {
            let bound = exp_tail(a, cap);
            let radius = bisect_radius(|r| exp_tail(delta * g * r * ny, cap), tol);
            return Err(Error::ToleranceUnreachable { tol, cap, bound, certified_radius: radius });
        };
        let mut value = Complex64::new(0.0, 0.0);
        let mut last = 0.0;
        for n in 0..=degree {
            let t = self.homogeneous_kernel_value(n, x, y)?;
            value += t;
            last = t.norm();
        }
        Ok(KernelValue { value, tail_bound: exp_tail(a, degree), degree, last_term: last })
    }

    /// Computes `δ̂` from `λ_1..λ_{n_max}`. Degrees beyond the prepared one
    /// are solved without extending the `V_k` table.
    pub fn estimate_delta(&mut self, n_max: usize) -> Result<&DeltaEstimate> {
        let mut table = Vec::new();
        let mut excluded = Vec::new();
        for n in 1..=n_max {
            let solved;
            let h = if n <= self.prepared_degree() {
                self.h(n)?
            } else {
                solved = self.solve_h(n)?;
                &solved
            };
            match h.lambda() {
                Some(l) => table.push((n, n as f64 * l.max_abs())),
                None => excluded.push(n),
            }
        }
        if table.is_empty() {
            return Err(Error::NoCertifiedDecay);
        }
        let delta_hat = table.iter().map(|t| t.1).fold(0.0, f64::max);
        self.delta = Some(DeltaEstimate { delta_hat, n_max, table, excluded });
        Ok(self.delta.as_ref().unwrap())
    }

    /// `(n, g, λ_n(g))` for every prepared degree realized in the group algebra.
    pub fn lambda_table(&self) -> Vec<(usize, usize, C)> {
        let mut out = Vec::new();
        for (i, h) in self.h_cache.iter().enumerate() {
            if let Some(l) = h.lambda() {
                for (g, c) in l.coefficients().iter().enumerate() {
                    out.push((i + 1, g, c.clone()));
                }
            }
        }
        out
    }

    /// `V_k p(x)` from the `|G|^n`-term expansion
    /// `Σ λ_n(g_1) λ_{n−1}(g_2)⋯λ_1(g_n) ∂_{z_n}⋯∂_{z_1} p` with `z_i = g_i z_{i−1}`, `z_0 = x`.
    /// Exponential in `n`; meant as a cross-check for small cases.
    pub fn intertwine_by_expansion(&self, p: &Polynomial<C>, x: &[C]) -> Result<C> {
        if !p.is_homogeneous() {
            return Err(Error::NonHomogeneous(" (expansion)".into()));
        }
        let n = p.degree().unwrap_or(0) as usize;
        self.require(n)?;
        self.expand(p, x, n)
    }

    fn expand(&self, p: &Polynomial<C>, z: &[C], n: usize) -> Result<C> {
        if n == 0 {
            return Ok(p.coeff(&Exponent::from_elem(0, self.dim())));
        }
        let lambda = self.h(n)?.lambda().ok_or_else(|| {
            Error::Internal(format!("degree {n} has no group-algebra coefficients"))
        })?;
        let mut acc = C::zero();
        for (g, c) in lambda.coefficients().iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let gz = self.group.apply(g, z);
            let dp = p.directional_derivative(&gz);
            acc.add_assign_ref(&c.mul_ref(&self.expand(&dp, &gz, n - 1)?));
        }
        Ok(acc)
    }

    /// Samples `|V_k p(x)|` against `(δ̂|G|‖x‖)^n/n! · sup_S |p|` for a
    /// homogeneous `p`. The sup norm is a lower estimate, so only excesses
    /// beyond 5% are flagged.
    pub fn bound_check(&self, p: &Polynomial<C>, x: &[f64]) -> Result<BoundSample> {
        let delta = self.delta.as_ref().ok_or(Error::NoCertifiedDecay)?.delta_hat;
        let n = p.degree().unwrap_or(0);
        let xc: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let lhs = self.intertwine(p)?.evaluate_c64(&xc).norm();
        let sup = sphere_sup_norm(p)?.value;
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let base = delta * self.group.order() as f64 * nx;
        let rhs = if n == 0 { sup } else { (n as f64 * base.ln() - ln_factorial(n)).exp() * sup };
        Ok(BoundSample { degree: n, lhs, rhs, violated: lhs > 1.05 * rhs })
    }
}

/// `⟨x,y⟩` in `2d` variables.
pub fn pairing<C: Scalar>(d: usize) -> Polynomial<C> {
    let mut p = Polynomial::zero(2 * d);
    for j in 0..d {
        let mut e = Exponent::from_elem(0, 2 * d);
        e[j] = 1;
        e[d + j] = 1;
        p.add_term(e, C::one());
    }
    p
}

/// `⟨x,y⟩^n / n!` in `2d` variables.
pub fn pairing_power<C: Scalar>(d: usize, n: u32) -> Polynomial<C> {
    let inv = C::from_rational(&BigRational::new(1.into(), factorial(n)));
    pairing::<C>(d).pow(n).scale(&inv)
}

fn same<C: Scalar>(a: &Polynomial<C>, b: &Polynomial<C>) -> bool {
    if C::EXACT {
        a == b
    } else {
        a.approx_eq(b, 1e-9)
    }
}

pub(crate) fn norm_c(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `Σ_{n>N} a^n/n!` for `a ≥ 0`.
pub fn exp_tail(a: f64, big_n: usize) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    let mut n = big_n + 1;
    let mut log_t = n as f64 * a.ln() - ln_factorial(n as u32);
    let mut sum = 0.0;
    loop {
        let t = log_t.exp();
        sum += t;
        if (n as f64) > a && t <= sum * 1e-17 {
            break;
        }
        n += 1;
        log_t += a.ln() - (n as f64).ln();
    }
    sum
}

/// Largest `r` with `bound(r) < tol`, for a bound increasing in `r`.
pub fn bisect_radius(bound: impl Fn(f64) -> f64, tol: f64) -> f64 {
    let mut hi = 1.0;
    while bound(hi) < tol && hi < 1e6 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if bound(mid) < tol {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Coefficients grouped by homogeneous degree in the block at `offset`.
pub fn parts_in<C: Scalar>(p: &Polynomial<C>, offset: usize, d: usize) -> BTreeMap<u32, Polynomial<C>> {
    p.parts_by_degree_in(offset, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{parse_polynomial, ExactPoly};
    use crate::scalar::CRational;
    use proptest::prelude::*;

    type Q = CRational;

    fn ctx(f: Family, p: usize, k: Vec<Q>, n: usize) -> DunklContext<Q> {
        let mut c = DunklContext::for_family(f, p, k).unwrap();
        c.prepare(n).unwrap();
        c
    }

    fn z1(k: Q, n: usize) -> DunklContext<Q> {
        ctx(Family::Z2, 1, vec![k], n)
    }

    fn poly(s: &str, d: usize) -> ExactPoly {
        parse_polynomial(s, d).unwrap()
    }

    #[test]
    fn dunkl_operator_examples() {
        let k0 = Q::ratio(1, 3);
        let c = z1(k0.clone(), 2);
        let one = [Q::one()];
        assert_eq!(c.dunkl_apply(&one, &poly("x", 1)).unwrap(), ExactPoly::constant(1, Q::from_i64(1) + Q::from_i64(2) * k0));
        assert_eq!(c.dunkl_apply(&one, &poly("x^2", 1)).unwrap(), poly("2 * x", 1));
        let zero = ctx(Family::B, 2, vec![Q::zero()], 3);
        let p = poly("x1^3 x2 - 2 * x2^2 + x1", 2);
        let xi = [Q::ratio(2, 5), Q::from_i64(-3)];
        assert_eq!(zero.dunkl_apply(&xi, &p).unwrap(), p.directional_derivative(&xi));
    }

    #[test]
    fn operator_a_examples() {
        let k0 = Q::ratio(3, 4);
        let c = z1(k0.clone(), 1);
        assert_eq!(c.operator_a(&poly("x", 1)), poly("x", 1).scale(&-k0));
        let b2 = ctx(Family::B, 2, vec![Q::ratio(1, 2), Q::ratio(3, 2)], 1);
        let cst = ExactPoly::constant(2, Q::from_i64(7));
        assert_eq!(b2.operator_a(&cst), cst.scale(b2.gamma()));
        let zero = ctx(Family::A, 3, vec![Q::zero()], 1);
        assert!(zero.operator_a(&poly("x1 x2", 3)).is_zero());
    }

    #[test]
    fn euler_w_examples() {
        let k0 = Q::ratio(2, 7);
        let c = z1(k0.clone(), 1);
        let w = c.euler_w(1, &poly("x", 1)).unwrap();
        assert_eq!(w, poly("x", 1).scale(&(Q::one() + Q::from_i64(2) * k0)));
        let zero = ctx(Family::B, 2, vec![Q::zero()], 1);
        let p = poly("x1^2 x2 - 3 * x2^3", 2);
        assert_eq!(zero.euler_w(3, &p).unwrap(), p.scale(&Q::from_i64(3)));
        // degree 0: (γ − A) kills constants
        let b2 = ctx(Family::B, 2, vec![Q::ratio(1, 2), Q::ratio(3, 2)], 1);
        assert!(b2.euler_w(0, &ExactPoly::one(2)).unwrap().is_zero());
        assert!(b2.euler_w(2, &poly("x1^2 + x2", 2)).is_err());
    }

    #[test]
    fn h1_on_rank_one() {
        for k0 in [Q::ratio(1, 2), Q::from_i64(3), Q::ratio(-1, 3), Q::from_parts(Q::one(), Q::one())] {
            let c = z1(k0.clone(), 1);
            let l = c.h(1).unwrap().lambda().unwrap();
            let den = Q::one() + Q::from_i64(2) * k0.clone();
            let sigma = c.group().reflections()[0];
            assert_eq!(l.coeff(c.group().identity()), &((Q::one() + k0.clone()) / den.clone()));
            assert_eq!(l.coeff(sigma), &(k0 / den));
        }
    }

    #[test]
    fn k_zero_gives_one_over_n() {
        let c = ctx(Family::B, 2, vec![Q::zero()], 5);
        for n in 1..=5 {
            let l = c.h(n).unwrap().lambda().unwrap();
            for g in 0..c.group().order() {
                let expect = if g == c.group().identity() { Q::ratio(1, n as i64) } else { Q::zero() };
                assert_eq!(l.coeff(g), &expect);
            }
        }
    }

    #[test]
    fn singular_parameter_is_reported() {
        let mut c = DunklContext::for_family(Family::Z2, 1, vec![Q::ratio(-1, 2)]).unwrap();
        assert!(matches!(c.prepare(3), Err(Error::NotInMStar { degree: 1 })));
    }

    #[test]
    fn fallback_path_when_group_algebra_is_singular() {
        // k = −1: (2+γ)e − kσ = e + σ is a zero divisor, yet W_2 = 2 on P_2.
        let c = z1(Q::from_i64(-1), 2);
        assert!(c.h(1).unwrap().lambda().is_some());
        assert!(c.h(2).unwrap().lambda().is_none());
        // c_n = n c_{n-1} / (n + k(1 − (−1)^n)) gives c_1 = c_2 = −1
        assert_eq!(c.intertwine(&poly("x^2", 1)).unwrap(), poly("-x^2", 1));
    }

    #[test]
    fn rank_one_intertwiner() {
        let k0 = Q::ratio(5, 3);
        let c = z1(k0.clone(), 4);
        let den = Q::one() + Q::from_i64(2) * k0;
        assert_eq!(c.intertwine(&ExactPoly::one(1)).unwrap(), ExactPoly::one(1));
        assert_eq!(c.intertwine(&poly("x", 1)).unwrap(), poly("x", 1).scale(&(Q::one() / den.clone())));
        assert_eq!(c.intertwine(&poly("x^2", 1)).unwrap(), poly("x^2", 1).scale(&(Q::one() / den.clone())));
        assert_eq!(
            c.intertwine_inverse(&poly("x", 1)).unwrap(),
            poly("x", 1).scale(&den)
        );
        assert_eq!(c.intertwine_inverse(&ExactPoly::one(1)).unwrap(), ExactPoly::one(1));
    }

    #[test]
    fn k_zero_intertwiner_is_identity() {
        let c = ctx(Family::A, 3, vec![Q::zero()], 4);
        let p = poly("x1^2 x3^2 - 2/3 * x2 + 1", 3);
        assert_eq!(c.intertwine(&p).unwrap(), p);
        assert_eq!(c.intertwine_inverse(&p).unwrap(), p);
    }

    #[test]
    fn expansion_matches_recursion() {
        let c = ctx(Family::B, 2, vec![Q::ratio(1, 2), Q::ratio(3, 2)], 3);
        let x = [Q::ratio(2, 3), Q::from_i64(-1)];
        for s in ["x1", "x2", "x1^2", "x1 x2", "x1^3", "x1^2 x2", "x2^3"] {
            let p = poly(s, 2);
            let lhs = c.intertwine(&p).unwrap().evaluate(&x).unwrap();
            assert_eq!(c.intertwine_by_expansion(&p, &x).unwrap(), lhs, "{s}");
        }
    }

    #[test]
    fn homogeneous_kernel_routes_agree() {
        let c = ctx(Family::B, 2, vec![Q::ratio(1, 2), Q::ratio(3, 2)], 6);
        for n in 0..=6 {
            let a = c.homogeneous_kernel(n).unwrap();
            assert_eq!(a, c.homogeneous_kernel_recursive(n).unwrap(), "n = {n}");
            assert!(a.is_homogeneous());
        }
        assert_eq!(c.homogeneous_kernel(0).unwrap(), ExactPoly::one(4));
        let at = c.homogeneous_kernel_at(3, &[Q::ratio(1, 2), Q::from_i64(2)]).unwrap();
        assert!(at.evaluate(&[Q::zero(), Q::zero()]).unwrap().is_zero());
        let zero = ctx(Family::Z2, 2, vec![Q::zero()], 4);
        assert_eq!(zero.homogeneous_kernel(4).unwrap(), pairing_power(2, 4));
    }

    #[test]
    fn kernel_values() {
        let mut c = DunklContext::for_family(Family::Z2, 1, vec![Q::zero()]).unwrap();
        c.prepare(40).unwrap();
        c.estimate_delta(40).unwrap();
        assert!((c.delta().unwrap().delta_hat - 1.0).abs() < 1e-15);
        let x = [Complex64::new(0.8, 0.0)];
        let y = [Complex64::new(-1.1, 0.0)];
        let v = c.dunkl_kernel(&x, &y, 1e-12).unwrap();
        assert!((v.value.re - (-0.88f64).exp()).abs() < 1e-12);
        let zero = c.dunkl_kernel(&x, &[Complex64::new(0.0, 0.0)], 1e-12).unwrap();
        assert_eq!(zero.value, Complex64::new(1.0, 0.0));
        let far = c.dunkl_kernel(&[Complex64::new(30.0, 0.0)], &[Complex64::new(30.0, 0.0)], 1e-12);
        assert!(matches!(far, Err(Error::ToleranceUnreachable { .. })));

        let mut b = DunklContext::for_family(Family::Z2, 1, vec![Q::ratio(1, 2)]).unwrap();
        b.prepare(40).unwrap();
        b.estimate_delta(40).unwrap();
        let xy = b.dunkl_kernel(&x, &y, 1e-10).unwrap();
        let yx = b.dunkl_kernel(&y, &x, 1e-10).unwrap();
        assert!((xy.value - yx.value).norm() <= 2e-10);
    }

    #[test]
    fn delta_examples() {
        let mut c = DunklContext::for_family(Family::Z2, 1, vec![Q::ratio(1, 2)]).unwrap();
        let d = c.estimate_delta(1).unwrap();
        assert!((d.delta_hat - 0.75).abs() < 1e-15);
        let d = c.estimate_delta(20).unwrap().clone();
        assert_eq!(d.table.len(), 20);
        assert!(d.table.iter().all(|&(_, v)| v <= d.delta_hat));
        let mut f = DunklContext::for_family(Family::Z2, 1, vec![Q::from_i64(-1)]).unwrap();
        assert_eq!(f.estimate_delta(3).unwrap().excluded, vec![2]);
    }

    #[test]
    fn exp_tail_matches_direct_sum() {
        for (a, n) in [(0.5f64, 3usize), (2.0, 10), (5.0, 4)] {
            let direct: f64 = (n + 1..200)
                .map(|m| a.powi(m as i32) / (1..=m).map(|v| v as f64).product::<f64>())
                .sum();
            let t = exp_tail(a, n);
            assert!((t - direct).abs() <= 1e-12 * direct.max(1e-300) + 1e-15, "{a} {n}: {t} vs {direct}");
        }
    }

    #[test]
    fn float_layer_for_irrational_dihedral() {
        let mut c = DunklContext::<Complex64>::for_family(Family::I2, 5, vec![Complex64::new(0.5, 0.0)]).unwrap();
        c.prepare(4).unwrap();
        for nu in monomials_of_degree(2, 3) {
            let p = Polynomial::monomial(nu.clone(), Complex64::new(1.0, 0.0));
            let v = c.intertwine(&p).unwrap();
            for j in 0..2 {
                let lhs = c.dunkl_basis(j, &v, 0).unwrap();
                let rhs = c.intertwine(&p.partial(j)).unwrap();
                assert!(lhs.approx_eq(&rhs, 1e-9), "{nu:?} {j}");
            }
        }
    }

    fn monomial_strategy(d: usize, max: u32) -> impl Strategy<Value = Exponent> {
        let all: Vec<Exponent> = (0..=max).flat_map(|n| monomials_of_degree(d, n)).collect();
        (0..all.len()).prop_map(move |i| all[i].clone())
    }

    fn homogeneous_strategy(d: usize, n: u32) -> impl Strategy<Value = ExactPoly> {
        let basis = monomials_of_degree(d, n);
        let k = basis.len();
        proptest::collection::vec((-5i64..=5, 1i64..=3), k).prop_map(move |cs| {
            ExactPoly::from_terms(d, basis.iter().cloned().zip(cs).map(|(e, (a, b))| (e, Q::ratio(a, b))))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn dunkl_operators_commute(nu in monomial_strategy(2, 6), c1 in -4i64..4) {
            let c = ctx(Family::B, 2, vec![Q::ratio(1, 2), Q::ratio(3, 2)], 1);
            let p = ExactPoly::monomial(nu, Q::from_i64(c1));
            let a = c.dunkl_basis(0, &c.dunkl_basis(1, &p, 0).unwrap(), 0).unwrap();
            let b = c.dunkl_basis(1, &c.dunkl_basis(0, &p, 0).unwrap(), 0).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn euler_identity(p in homogeneous_strategy(2, 4)) {
            let c = ctx(Family::B, 2, vec![Q::ratio(1, 3), Q::from_i64(2)], 1);
            prop_assert!(c.euler_w(4, &p).is_ok());
        }

        #[test]
        fn intertwining_on_a2(nu in monomial_strategy(3, 5), j in 0usize..3) {
            let c = ctx(Family::A, 3, vec![Q::ratio(1, 2)], 5);
            let p = ExactPoly::monomial(nu, Q::one());
            let lhs = c.dunkl_basis(j, &c.intertwine(&p).unwrap(), 0).unwrap();
            prop_assert_eq!(lhs, c.intertwine(&p.partial(j)).unwrap());
        }

        #[test]
        fn inverse_round_trip(p in homogeneous_strategy(2, 5)) {
            let c = ctx(Family::B, 2, vec![Q::ratio(1, 2), Q::ratio(3, 2)], 5);
            prop_assert_eq!(c.intertwine(&c.intertwine_inverse(&p).unwrap()).unwrap(), p.clone());
            prop_assert_eq!(c.intertwine_inverse(&c.intertwine(&p).unwrap()).unwrap(), p);
        }

        #[test]
        fn real_k_keeps_real_polynomials_real(p in homogeneous_strategy(2, 4)) {
            let c = ctx(Family::B, 2, vec![Q::ratio(1, 2), Q::from_i64(-3)], 4);
            let v = c.intertwine(&p).unwrap();
            prop_assert!(v.is_real());
            prop_assert_eq!(v.degree(), p.degree());
        }

        #[test]
        fn kernel_equivariance_and_homogeneity(g in 0usize..8, n in 1usize..6, lam in -3i64..4) {
            let c = ctx(Family::B, 2, vec![Q::ratio(1, 2), Q::ratio(3, 2)], 5);
            let e = c.homogeneous_kernel(n).unwrap();
            let grp = c.group();
            // E_n(gx, y) = E_n(x, g^{-1} y)
            let lhs = grp.act_on_polynomial_at(g, &e, 0);
            let rhs = grp.act_on_polynomial_at(grp.inverse(g), &e, 2);
            prop_assert_eq!(lhs, rhs);
            let l = Q::from_i64(lam);
            let scaled_x = e.scale_vars(0, 2, &l);
            let power = (0..n).fold(Q::one(), |acc, _| acc * l.clone());
            prop_assert_eq!(&scaled_x, &e.scale(&power));
            prop_assert_eq!(scaled_x, e.scale_vars(2, 2, &l));
        }
    }

    #[test]
    fn growth_bound_samples() {
        let mut c = DunklContext::for_family(Family::B, 2, vec![Q::ratio(1, 2), Q::ratio(3, 2)]).unwrap();
        c.prepare(8).unwrap();
        c.estimate_delta(8).unwrap();
        for s in ["x1^3 - x2^3", "x1 x2^4", "x1^8"] {
            let sample = c.bound_check(&poly(s, 2), &[0.7, -1.1]).unwrap();
            assert!(!sample.violated, "{s}: {sample:?}");
        }
    }
}
