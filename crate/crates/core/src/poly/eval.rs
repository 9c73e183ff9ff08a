use super::{total_degree, Exponent, Polynomial};
use crate::scalar::{Complex64, Scalar};

/// Flattened double-precision polynomial for repeated evaluation.
///
/// Powers of each coordinate are tabulated once per call, so evaluation is
/// one multiply-add chain per term.
#[derive(Clone, Debug)]
pub struct CompiledPoly {
    nvars: usize,
    max_exp: Vec<usize>,
    terms: Vec<(Exponent, Complex64)>,
    degree: u32,
}

impl CompiledPoly {
    pub fn new<C: Scalar>(p: &Polynomial<C>) -> Self {
        let nvars = p.nvars();
        let mut max_exp = vec![0usize; nvars];
        let mut terms = Vec::with_capacity(p.len());
        for (e, c) in p.terms() {
            for (m, &k) in max_exp.iter_mut().zip(e.iter()) {
                *m = (*m).max(k as usize);
            }
            terms.push((e.clone(), c.to_c64()));
        }
        let degree = p.degree().unwrap_or(0);
        CompiledPoly { nvars, max_exp, terms, degree }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        assert_eq!(z.len(), self.nvars, "point dimension");
        let powers: Vec<Vec<Complex64>> = z
            .iter()
            .zip(&self.max_exp)
            .map(|(zi, &m)| {
                let mut v = Vec::with_capacity(m + 1);
                let mut acc = Complex64::new(1.0, 0.0);
                v.push(acc);
                for _ in 0..m {
                    acc *= zi;
                    v.push(acc);
                }
                v
            })
            .collect();
        self.terms
            .iter()
            .map(|(e, c)| {
                e.iter()
                    .enumerate()
                    .fold(*c, |t, (i, &k)| if k == 0 { t } else { t * powers[i][k as usize] })
            })
            .sum()
    }

    pub fn eval_real(&self, z: &[f64]) -> Complex64 {
        let zc: Vec<Complex64> = z.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.eval(&zc)
    }

    /// Sum of `|c|·|z|^e` over terms; a magnitude scale for roundoff estimates.
    pub fn abs_eval(&self, z: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                e.iter()
                    .zip(z)
                    .fold(c.norm(), |t, (&k, zi)| t * zi.abs().powi(k as i32))
            })
            .sum()
    }

    pub fn total_degree_of_terms(&self) -> impl Iterator<Item = u32> + '_ {
        self.terms.iter().map(|(e, _)| total_degree(e))
    }
}
