use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{CompiledPoly, Polynomial};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const SPHERE_SAMPLES: usize = 4096;
pub const SPHERE_ASCENT_STEPS: usize = 20;
const REFINED_CANDIDATES: usize = 16;

/// Lower estimate of `sup_{‖x‖=1} |p(x)|`.
#[derive(Clone, Debug)]
pub struct SupNormEstimate {
    pub value: f64,
    pub argmax: Vec<f64>,
    pub samples: usize,
}

fn sphere_points(d: usize, n: usize) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..n)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / n as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            // Fibonacci lattice
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * i as f64;
                    vec![r * t.cos(), r * t.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
            (0..n)
                .map(|_| {
                    let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                    normalize(v)
                })
                .collect()
        }
    }
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|a| *a /= n);
    }
    v
}

/// Samples the unit sphere, then runs projected gradient ascent on `|p|²`
/// from the best candidates. Only homogeneous inputs are accepted.
pub fn sphere_sup_norm<C: Scalar>(p: &Polynomial<C>) -> Result<SupNormEstimate> {
    if !p.is_homogeneous() {
        return Err(Error::NonHomogeneous(" (sphere sup norm)".into()));
    }
    let d = p.nvars();
    if p.is_zero() {
        return Ok(SupNormEstimate { value: 0.0, argmax: vec![0.0; d], samples: 0 });
    }
    let f = CompiledPoly::new(p);
    let grads: Vec<CompiledPoly> = (0..d).map(|i| CompiledPoly::new(&p.partial(i))).collect();
    let value = |x: &[f64]| f.eval_real(x).norm();

    let pts = sphere_points(d, SPHERE_SAMPLES);
    let samples = pts.len();
    let mut scored: Vec<(f64, Vec<f64>)> = pts.into_iter().map(|x| (value(&x), x)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored.truncate(REFINED_CANDIDATES);

    let mut best = scored[0].clone();
    if d > 1 {
        for (mut fx, mut x) in scored {
            let mut step = 0.1;
            for _ in 0..SPHERE_ASCENT_STEPS {
                // gradient of |p|² = 2 Re(conj(p) ∇p)
                let px = f.eval_real(&x);
                let g: Vec<f64> = grads.iter().map(|gi| 2.0 * (px.conj() * gi.eval_real(&x)).re).collect();
                let radial: f64 = g.iter().zip(&x).map(|(a, b)| a * b).sum();
                let tangent: Vec<f64> = g.iter().zip(&x).map(|(a, b)| a - radial * b).collect();
                let tn = tangent.iter().map(|a| a * a).sum::<f64>().sqrt();
                if tn < 1e-15 {
                    break;
                }
                loop {
                    let cand = normalize(x.iter().zip(&tangent).map(|(a, t)| a + step * t / tn).collect());
                    let fc = value(&cand);
                    if fc > fx {
                        fx = fc;
                        x = cand;
                        step *= 1.5;
                        break;
                    }
                    step *= 0.5;
                    if step < 1e-12 {
                        break;
                    }
                }
            }
            if fx > best.0 {
                best = (fx, x);
            }
        }
    }
    Ok(SupNormEstimate { value: best.0, argmax: best.1, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{parse_polynomial, ExactPoly};
    use crate::scalar::CRational;

    #[test]
    fn sup_norm_examples() {
        let p: ExactPoly = parse_polynomial("x1^5", 2).unwrap();
        assert!((sphere_sup_norm(&p).unwrap().value - 1.0).abs() < 1e-12);
        let xi = [CRational::from_i64(3), CRational::from_i64(-4)];
        let lin = ExactPoly::linear_form(2, 0, &xi);
        assert!((sphere_sup_norm(&lin).unwrap().value - 5.0).abs() < 1e-9);
        let p: ExactPoly = parse_polynomial("x1 x2", 2).unwrap();
        let est = sphere_sup_norm(&p).unwrap();
        assert!((est.value - 0.5).abs() < 1e-9);
        assert!(est.value <= 0.5 + 1e-15);
        let p3: ExactPoly = parse_polynomial("x1 x2 x3", 3).unwrap();
        let v = sphere_sup_norm(&p3).unwrap().value;
        assert!((v - 1.0 / 27f64.sqrt()).abs() < 1e-8, "{v}");
    }

    #[test]
    fn rejects_inhomogeneous() {
        let p: ExactPoly = parse_polynomial("x1^2 + x2", 2).unwrap();
        assert!(sphere_sup_norm(&p).is_err());
    }
}
