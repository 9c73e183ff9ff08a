//! Root systems, their reflection groups, and multiplicity functions.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fmt;

use num::rational::BigRational;
use num::BigInt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::scalar::{Scalar, ScalarKey};

/// Default upper bound on the group order during closure.
pub const DEFAULT_GROUP_CAP: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    A,
    B,
    D,
    #[serde(rename = "Z2")]
    Z2,
    #[serde(rename = "I2")]
    I2,
    #[serde(rename = "custom")]
    Custom,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::A => "A",
            Family::B => "B",
            Family::D => "D",
            Family::Z2 => "Z2",
            Family::I2 => "I2",
            Family::Custom => "custom",
        };
        f.write_str(s)
    }
}

pub type Vector<C> = Vec<C>;

pub fn dot<C: Scalar>(a: &[C], b: &[C]) -> C {
    let mut acc = C::zero();
    for (x, y) in a.iter().zip(b) {
        if !x.is_zero() && !y.is_zero() {
            acc.add_assign_ref(&x.mul_ref(y));
        }
    }
    acc
}

fn unit<C: Scalar>(d: usize, i: usize, s: i64) -> Vector<C> {
    let mut v = vec![C::zero(); d];
    v[i] = C::from_i64(s);
    v
}

fn vec_key<C: Scalar>(v: &[C]) -> Vec<ScalarKey> {
    v.iter().map(Scalar::key).collect()
}

#[derive(Clone, Debug)]
pub struct RootSystem<C> {
    dim: usize,
    roots: Vec<Vector<C>>,
    family: Family,
    param: usize,
}

impl<C: Scalar> RootSystem<C> {
    /// Standard root list for a family. `param` is the ambient dimension for
    /// A, B, D and Z2, and `m` for the dihedral family I2(m).
    pub fn build(family: Family, param: usize) -> Result<Self> {
        let unsupported = || Error::UnsupportedFamily { family: family.to_string(), param };
        let (dim, roots) = match family {
            Family::Z2 => {
                if param < 1 {
                    return Err(unsupported());
                }
                let d = param;
                let roots = (0..d).flat_map(|i| [unit(d, i, 1), unit(d, i, -1)]).collect();
                (d, roots)
            }
            Family::A => {
                if param < 2 {
                    return Err(unsupported());
                }
                let d = param;
                let mut roots = Vec::new();
                for i in 0..d {
                    for j in 0..d {
                        if i != j {
                            let mut v = vec![C::zero(); d];
                            v[i] = C::one();
                            v[j] = -C::one();
                            roots.push(v);
                        }
                    }
                }
                (d, roots)
            }
            Family::B | Family::D => {
                let min = if family == Family::B { 1 } else { 2 };
                if param < min {
                    return Err(unsupported());
                }
                let d = param;
                let mut roots = Vec::new();
                if family == Family::B {
                    for i in 0..d {
                        roots.push(unit(d, i, 1));
                        roots.push(unit(d, i, -1));
                    }
                }
                for i in 0..d {
                    for j in i + 1..d {
                        for (si, sj) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
                            let mut v = vec![C::zero(); d];
                            v[i] = C::from_i64(si);
                            v[j] = C::from_i64(sj);
                            roots.push(v);
                        }
                    }
                }
                (d, roots)
            }
            Family::I2 => {
                let m = param;
                if m < 1 {
                    return Err(unsupported());
                }
                let roots = match m {
                    1 => vec![unit(2, 0, 1), unit(2, 0, -1)],
                    2 => vec![unit(2, 0, 1), unit(2, 1, 1), unit(2, 0, -1), unit(2, 1, -1)],
                    4 => {
                        let v = |a: i64, b: i64| vec![C::from_i64(a), C::from_i64(b)];
                        vec![v(1, 0), v(1, 1), v(0, 1), v(-1, 1), v(-1, 0), v(-1, -1), v(0, -1), v(1, -1)]
                    }
                    _ if C::EXACT => {
                        return Err(Error::UnsupportedFamily {
                            family: "I2 (irrational reflections, needs floating mode)".to_string(),
                            param,
                        })
                    }
                    _ => (0..2 * m)
                        .map(|j| {
                            let t = std::f64::consts::PI * j as f64 / m as f64;
                            vec![C::from_f64(t.cos()), C::from_f64(t.sin())]
                        })
                        .collect(),
                };
                (2, roots)
            }
            Family::Custom => return Err(unsupported()),
        };
        Ok(RootSystem { dim, roots, family, param })
    }

    /// A user-supplied root list; all invariants are checked.
    pub fn custom(dim: usize, roots: Vec<Vector<C>>) -> Result<Self> {
        let rs = RootSystem { dim, roots, family: Family::Custom, param: dim };
        rs.validate()?;
        Ok(rs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.roots.is_empty() {
            return Err(Error::InvalidRootSystem("empty root list".into()));
        }
        let keys: HashMap<Vec<ScalarKey>, usize> =
            self.roots.iter().enumerate().map(|(i, r)| (vec_key(r), i)).collect();
        for r in &self.roots {
            if r.len() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, got: r.len() });
            }
            if r.iter().all(|c| c.is_negligible(1.0)) {
                return Err(Error::ZeroRoot);
            }
            let neg: Vec<C> = r.iter().map(|c| -c.clone()).collect();
            if !keys.contains_key(&vec_key(&neg)) {
                return Err(Error::InvalidRootSystem("not closed under negation".into()));
            }
            for s in &self.roots {
                let img = reflect(r, s)?;
                if !keys.contains_key(&vec_key(&img)) {
                    return Err(Error::InvalidRootSystem("not stable under its reflections".into()));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn roots(&self) -> &[Vector<C>] {
        &self.roots
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn param(&self) -> usize {
        self.param
    }

    pub fn index_of(&self, v: &[C]) -> Option<usize> {
        let k = vec_key(v);
        self.roots.iter().position(|r| vec_key(r) == k)
    }
}

/// `σ_α(x) = x − 2⟨x,α⟩α/‖α‖²`.
pub fn reflect<C: Scalar>(alpha: &[C], x: &[C]) -> Result<Vector<C>> {
    let n2 = dot(alpha, alpha);
    if n2.is_negligible(1.0) {
        return Err(Error::ZeroRoot);
    }
    let f = C::from_i64(2).mul_ref(&dot(x, alpha)).div_ref(&n2);
    Ok(x.iter().zip(alpha).map(|(xi, ai)| xi.sub_ref(&f.mul_ref(ai))).collect())
}

/// Row-major matrix of `σ_α`.
pub fn reflection_matrix<C: Scalar>(alpha: &[C]) -> Result<Vec<C>> {
    let d = alpha.len();
    let mut m = Vec::with_capacity(d * d);
    let cols: Vec<Vector<C>> = (0..d).map(|j| reflect(alpha, &unit(d, j, 1))).collect::<Result<_>>()?;
    for i in 0..d {
        for col in &cols {
            m.push(col[i].clone());
        }
    }
    Ok(m)
}

#[derive(Clone, Debug)]
pub struct PositiveSystem<C> {
    base: RootSystem<C>,
    beta: Vec<BigRational>,
    positives: Vec<usize>,
}

impl<C: Scalar> PositiveSystem<C> {
    pub fn base(&self) -> &RootSystem<C> {
        &self.base
    }

    pub fn beta(&self) -> &[BigRational] {
        &self.beta
    }

    /// Indices into the base root list.
    pub fn positive_indices(&self) -> &[usize] {
        &self.positives
    }

    pub fn positive_roots(&self) -> impl Iterator<Item = &Vector<C>> {
        self.positives.iter().map(|&i| &self.base.roots[i])
    }

    pub fn len(&self) -> usize {
        self.positives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty()
    }
}

/// Chooses `β = (1, ε, ε², …)` with `ε = 1/127`, halving `ε` until no root is
/// orthogonal to `β`, and keeps the roots with `⟨α,β⟩ > 0`.
pub fn select_positive<C: Scalar>(rs: &RootSystem<C>) -> PositiveSystem<C> {
    let mut eps = BigRational::new(BigInt::from(1), BigInt::from(127));
    loop {
        let beta: Vec<BigRational> = (0..rs.dim)
            .map(|i| num::pow(eps.clone(), i))
            .collect();
        let beta_c: Vec<C> = beta.iter().map(C::from_rational).collect();
        let products: Vec<C> = rs.roots.iter().map(|r| dot(r, &beta_c)).collect();
        if products.iter().all(|p| !p.is_negligible(1e-3)) {
            let positives = products
                .iter()
                .enumerate()
                .filter(|(_, p)| p.to_c64().re > 0.0)
                .map(|(i, _)| i)
                .collect();
            return PositiveSystem { base: rs.clone(), beta, positives };
        }
        eps /= BigRational::from_integer(BigInt::from(2));
    }
}

#[derive(Clone, Debug)]
pub struct ReflectionGroup<C> {
    dim: usize,
    elements: Vec<Vec<C>>,
    identity: usize,
    cayley: Vec<usize>,
    inverses: Vec<usize>,
    /// Action on the root list: `root_perm[g][i]` is the index of `g·α_i`.
    root_perm: Vec<Vec<u32>>,
    /// Group index of `σ_α` for each positive root, in positive-system order.
    reflections: Vec<usize>,
}

fn mat_mul<C: Scalar>(a: &[C], b: &[C], d: usize) -> Vec<C> {
    let mut out = vec![C::zero(); d * d];
    for i in 0..d {
        for k in 0..d {
            let x = &a[i * d + k];
            if x.is_zero() {
                continue;
            }
            for j in 0..d {
                let y = &b[k * d + j];
                if !y.is_zero() {
                    out[i * d + j].add_assign_ref(&x.mul_ref(y));
                }
            }
        }
    }
    out
}

fn mat_vec<C: Scalar>(a: &[C], x: &[C], d: usize) -> Vec<C> {
    (0..d).map(|i| dot(&a[i * d..(i + 1) * d], x)).collect()
}

fn identity_matrix<C: Scalar>(d: usize) -> Vec<C> {
    let mut m = vec![C::zero(); d * d];
    for i in 0..d {
        m[i * d + i] = C::one();
    }
    m
}

/// Closure of `{σ_α : α ∈ R_+}` under composition.
pub fn generate_group<C: Scalar>(ps: &PositiveSystem<C>, cap: usize) -> Result<ReflectionGroup<C>> {
    let rs = &ps.base;
    let d = rs.dim;
    let gens: Vec<Vec<C>> = ps.positive_roots().map(|a| reflection_matrix(a)).collect::<Result<_>>()?;
    let mut elements = vec![identity_matrix::<C>(d)];
    let mut index: HashMap<Vec<ScalarKey>, usize> = HashMap::new();
    index.insert(vec_key(&elements[0]), 0);
    let mut head = 0;
    while head < elements.len() {
        let g = elements[head].clone();
        head += 1;
        for s in &gens {
            let h = mat_mul(s, &g, d);
            let k = vec_key(&h);
            if let Entry::Vacant(slot) = index.entry(k) {
                if elements.len() >= cap {
                    return Err(Error::GroupTooLarge { cap });
                }
                slot.insert(elements.len());
                elements.push(h);
            }
        }
    }
    for g in &elements {
        let gt: Vec<C> = (0..d * d).map(|t| g[(t % d) * d + t / d].clone()).collect();
        let prod = mat_mul(&gt, g, d);
        if vec_key(&prod) != vec_key(&identity_matrix::<C>(d)) {
            return Err(Error::InvalidRootSystem("generated element is not orthogonal".into()));
        }
    }
    let root_keys: HashMap<Vec<ScalarKey>, u32> =
        rs.roots.iter().enumerate().map(|(i, r)| (vec_key(r), i as u32)).collect();
    let root_perm: Vec<Vec<u32>> = elements
        .iter()
        .map(|g| {
            rs.roots
                .iter()
                .map(|r| {
                    root_keys.get(&vec_key(&mat_vec(g, r, d))).copied().ok_or_else(|| {
                        Error::InvalidRootSystem("group element does not permute the roots".into())
                    })
                })
                .collect::<Result<Vec<u32>>>()
        })
        .collect::<Result<_>>()?;
    let perm_index: HashMap<&[u32], usize> =
        root_perm.iter().enumerate().map(|(i, p)| (p.as_slice(), i)).collect();
    if perm_index.len() != elements.len() {
        return Err(Error::InvalidRootSystem("roots do not determine the group elements".into()));
    }
    let n = elements.len();
    let mut cayley = vec![0usize; n * n];
    for a in 0..n {
        for b in 0..n {
            // (a·b)(α) = a(b(α))
            let comp: Vec<u32> = root_perm[b].iter().map(|&i| root_perm[a][i as usize]).collect();
            cayley[a * n + b] = *perm_index
                .get(comp.as_slice())
                .ok_or_else(|| Error::InvalidRootSystem("closure failed".into()))?;
        }
    }
    let inverses = (0..n)
        .map(|a| (0..n).find(|&b| cayley[a * n + b] == 0).expect("finite group has inverses"))
        .collect();
    let reflections = gens.iter().map(|s| index[&vec_key(s)]).collect();
    Ok(ReflectionGroup { dim: d, elements, identity: 0, cayley, inverses, root_perm, reflections })
}

impl<C: Scalar> ReflectionGroup<C> {
    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn matrix(&self, g: usize) -> &[C] {
        &self.elements[g]
    }

    /// Index of the matrix product `a·b`.
    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.cayley[a * self.order() + b]
    }

    pub fn inverse(&self, g: usize) -> usize {
        self.inverses[g]
    }

    /// Group indices of the generating reflections, aligned with the positive roots.
    pub fn reflections(&self) -> &[usize] {
        &self.reflections
    }

    pub fn root_permutation(&self, g: usize) -> &[u32] {
        &self.root_perm[g]
    }

    pub fn is_exact(&self) -> bool {
        C::EXACT
    }

    pub fn apply(&self, g: usize, x: &[C]) -> Vector<C> {
        mat_vec(&self.elements[g], x, self.dim)
    }

    /// `(L_g p)(x) = p(g·x)`. This is a right action: `L_g L_h = L_{h·g}`.
    pub fn act_on_polynomial(&self, g: usize, p: &Polynomial<C>) -> Polynomial<C> {
        self.act_on_polynomial_at(g, p, 0)
    }

    /// `L_g` on the block of variables `offset..offset + d`.
    pub fn act_on_polynomial_at(&self, g: usize, p: &Polynomial<C>, offset: usize) -> Polynomial<C> {
        if g == self.identity {
            return p.clone();
        }
        p.substitute_linear(offset, &self.elements[g], self.dim)
    }

    /// Orbit index of every root in `roots` (the root list the group was built from).
    pub fn root_orbits(&self) -> Vec<usize> {
        let nroots = self.root_perm[0].len();
        let mut orbit = vec![usize::MAX; nroots];
        let mut next = 0;
        for i in 0..nroots {
            if orbit[i] != usize::MAX {
                continue;
            }
            for p in &self.root_perm {
                orbit[p[i] as usize] = next;
            }
            next += 1;
        }
        orbit
    }
}

/// A `G`-invariant parameter function on the roots.
#[derive(Clone, Debug)]
pub struct MultiplicityFunction<C> {
    orbit_of_root: Vec<usize>,
    orbit_values: Vec<C>,
    positive_values: Vec<C>,
    gamma: C,
}

impl<C: Scalar> MultiplicityFunction<C> {
    /// One value per root orbit (orbits numbered by first appearance in the root list).
    pub fn from_orbit_values(
        group: &ReflectionGroup<C>,
        ps: &PositiveSystem<C>,
        values: Vec<C>,
    ) -> Result<Self> {
        let orbit_of_root = group.root_orbits();
        let norbits = orbit_of_root.iter().max().map_or(0, |m| m + 1);
        if values.len() != norbits {
            return Err(Error::InvalidMultiplicity(format!(
                "{norbits} root orbits but {} values supplied",
                values.len()
            )));
        }
        let positive_values: Vec<C> =
            ps.positive_indices().iter().map(|&i| values[orbit_of_root[i]].clone()).collect();
        let gamma = positive_values.iter().fold(C::zero(), |acc, v| acc.add_ref(v));
        Ok(MultiplicityFunction { orbit_of_root, orbit_values: values, positive_values, gamma })
    }

    pub fn uniform(group: &ReflectionGroup<C>, ps: &PositiveSystem<C>, k: C) -> Self {
        let norbits = group.root_orbits().iter().max().map_or(0, |m| m + 1);
        Self::from_orbit_values(group, ps, vec![k; norbits]).expect("orbit count matches")
    }

    pub fn k_of_root(&self, i: usize) -> &C {
        &self.orbit_values[self.orbit_of_root[i]]
    }

    /// `k(α)` for each positive root, in positive-system order.
    pub fn positive_values(&self) -> &[C] {
        &self.positive_values
    }

    pub fn orbit_values(&self) -> &[C] {
        &self.orbit_values
    }

    /// `γ = Σ_{α∈R_+} k(α)`.
    pub fn gamma(&self) -> &C {
        &self.gamma
    }

    pub fn is_real(&self) -> bool {
        self.orbit_values.iter().all(|v| v.is_real())
    }

    /// Real and nonnegative on every orbit.
    pub fn is_nonnegative(&self) -> bool {
        self.is_real() && self.orbit_values.iter().all(|v| v.to_c64().re >= 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.orbit_values.iter().all(|v| v.is_zero())
    }
}

/// Builds `k` from one value per root, rejecting values that are not
/// constant on `G`-orbits.
pub fn validate_multiplicity<C: Scalar>(
    group: &ReflectionGroup<C>,
    ps: &PositiveSystem<C>,
    per_root: &[C],
) -> Result<MultiplicityFunction<C>> {
    let orbit_of_root = group.root_orbits();
    if per_root.len() != orbit_of_root.len() {
        return Err(Error::InvalidMultiplicity(format!(
            "{} roots but {} values",
            orbit_of_root.len(),
            per_root.len()
        )));
    }
    let norbits = orbit_of_root.iter().max().map_or(0, |m| m + 1);
    let mut values: Vec<Option<C>> = vec![None; norbits];
    for (i, v) in per_root.iter().enumerate() {
        let o = orbit_of_root[i];
        match &values[o] {
            None => values[o] = Some(v.clone()),
            Some(prev) if prev.key() == v.key() => {}
            Some(prev) => {
                return Err(Error::InvalidMultiplicity(format!(
                    "orbit {o} carries conflicting values {prev} and {v}"
                )))
            }
        }
    }
    let values = values.into_iter().map(|v| v.expect("every orbit has a root")).collect();
    MultiplicityFunction::from_orbit_values(group, ps, values)
}

/// Conventional orbit names for a family (`long`/`short` for B, `e1..ed` for Z2).
pub fn orbit_labels<C: Scalar>(rs: &RootSystem<C>, group: &ReflectionGroup<C>) -> Vec<String> {
    let orbit_of_root = group.root_orbits();
    let norbits = orbit_of_root.iter().max().map_or(0, |m| m + 1);
    let rep: Vec<usize> =
        (0..norbits).map(|o| orbit_of_root.iter().position(|&x| x == o).unwrap()).collect();
    rep.iter()
        .enumerate()
        .map(|(o, &i)| {
            let r = &rs.roots()[i];
            match rs.family() {
                Family::B if rs.dim() >= 2 => {
                    let nz = r.iter().filter(|c| !c.is_zero()).count();
                    if nz == 1 { "short".into() } else { "long".into() }
                }
                Family::Z2 => {
                    let j = r.iter().position(|c| !c.is_zero()).unwrap_or(0);
                    format!("e{}", j + 1)
                }
                _ => format!("orbit{o}"),
            }
        })
        .collect()
}
