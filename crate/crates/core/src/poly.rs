//! Dense univariate complex polynomials and the Aberth-Ehrlich simultaneous
//! root finder. All-roots-at-once with a Newton polish; near-multiple roots
//! are clustered and reported with summed multiplicity so callers always see
//! exactly `degree` roots.

use crate::error::{Error, Result};
use crate::C64;

pub const DEFAULT_MAX_ITERS: usize = 200;
pub const POLISH_TOL: f64 = 1e-12;
pub const CLUSTER_RADIUS: f64 = 1e-8;

/// Coefficients in ascending order; `coeffs[degree]` must be nonzero.
#[derive(Clone, Debug)]
pub struct Poly {
    pub coeffs: Vec<C64>,
}

impl Poly {
    pub fn new(coeffs: Vec<C64>) -> Self {
        let mut p = Poly { coeffs };
        p.trim();
        p
    }

    fn trim(&mut self) {
        while self.coeffs.len() > 1 && self.coeffs.last().unwrap().norm() == 0.0 {
            self.coeffs.pop();
        }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, z: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    /// Horner evaluation of the polynomial and its derivative.
    pub fn eval_with_derivative(&self, z: C64) -> (C64, C64) {
        let mut p = C64::new(0.0, 0.0);
        let mut dp = C64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::new(vec![C64::new(0.0, 0.0)]);
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &c)| c * (i as f64))
            .collect();
        Poly::new(coeffs)
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![C64::new(0.0, 0.0); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    /// Substitute `inner` for the variable: self(inner(z)).
    pub fn compose(&self, inner: &Poly) -> Poly {
        let mut acc = Poly::new(vec![*self.coeffs.last().unwrap()]);
        for &c in self.coeffs.iter().rev().skip(1) {
            acc = acc.mul(inner);
            acc.coeffs[0] += c;
            acc.trim();
        }
        acc
    }

    /// All roots with multiplicity; the returned list has exactly `degree`
    /// entries in canonical order (lexicographic by rounded (re, im)).
    pub fn roots(&self, max_iters: usize) -> Result<Vec<C64>> {
        let d = self.degree();
        if d == 0 {
            return Ok(Vec::new());
        }
        if d == 1 {
            return Ok(vec![-self.coeffs[0] / self.coeffs[1]]);
        }
        if d == 2 {
            return Ok(sort_roots(quadratic_roots(
                self.coeffs[2],
                self.coeffs[1],
                self.coeffs[0],
            )));
        }
        let mut guesses = initial_guesses(self);
        let mut converged = false;
        for _ in 0..max_iters {
            let mut max_step: f64 = 0.0;
            let snapshot = guesses.clone();
            for i in 0..d {
                let z = snapshot[i];
                let (p, dp) = self.eval_with_derivative(z);
                if p.norm() == 0.0 {
                    continue;
                }
                let newton = if dp.norm() > 0.0 {
                    p / dp
                } else {
                    C64::new(1e-8, 1e-8)
                };
                let mut repulsion = C64::new(0.0, 0.0);
                for (j, &w) in snapshot.iter().enumerate() {
                    if j != i {
                        let diff = z - w;
                        if diff.norm() > 1e-300 {
                            repulsion += diff.inv();
                        }
                    }
                }
                let denom = C64::new(1.0, 0.0) - newton * repulsion;
                let step = if denom.norm() > 1e-300 {
                    newton / denom
                } else {
                    newton
                };
                guesses[i] = z - step;
                max_step = max_step.max(step.norm());
            }
            if max_step < 1e-14 {
                converged = true;
                break;
            }
        }
        for g in guesses.iter_mut() {
            *g = self.newton_polish(*g);
        }
        let scale = 1.0 + self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let worst = guesses
            .iter()
            .map(|&g| self.eval(g).norm())
            .fold(0.0, f64::max);
        if !converged && worst > 1e-6 * scale {
            return Err(Error::RootFinding {
                iters: max_iters,
                residual: worst,
            });
        }
        Ok(sort_roots(cluster_roots(guesses, CLUSTER_RADIUS)))
    }

    pub fn newton_polish(&self, mut z: C64) -> C64 {
        for _ in 0..50 {
            let (p, dp) = self.eval_with_derivative(z);
            if dp.norm() < 1e-300 {
                break;
            }
            let step = p / dp;
            z -= step;
            if step.norm() < POLISH_TOL * (1.0 + z.norm()) {
                break;
            }
        }
        z
    }
}

pub fn quadratic_roots(a: C64, b: C64, c: C64) -> Vec<C64> {
    let disc = (b * b - 4.0 * a * c).sqrt();
    // Pick the sign that avoids cancellation in -b -/+ disc.
    let q = if (b + disc).norm() >= (b - disc).norm() {
        -0.5 * (b + disc)
    } else {
        -0.5 * (b - disc)
    };
    if q.norm() == 0.0 {
        return vec![C64::new(0.0, 0.0), -b / a];
    }
    vec![q / a, c / q]
}

fn initial_guesses(p: &Poly) -> Vec<C64> {
    let d = p.degree();
    let lead = p.coeffs[d].norm();
    let radius = 1.0
        + p.coeffs[..d]
            .iter()
            .map(|c| c.norm() / lead)
            .fold(0.0, f64::max);
    // Deterministic phase offset keeps guesses off the axes where
    // symmetric polynomials would stall.
    let offset = 0.4;
    (0..d)
        .map(|i| {
            let theta = offset + 2.0 * std::f64::consts::PI * (i as f64) / (d as f64);
            C64::from_polar(radius, theta)
        })
        .collect()
}

/// Merge roots closer than `radius` to their cluster centroid, repeating the
/// centroid once per member so the output length is preserved.
pub fn cluster_roots(mut roots: Vec<C64>, radius: f64) -> Vec<C64> {
    let n = roots.len();
    let mut assigned = vec![false; n];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        if assigned[i] {
            continue;
        }
        let mut members = vec![i];
        assigned[i] = true;
        for j in (i + 1)..n {
            if !assigned[j] && (roots[i] - roots[j]).norm() < radius {
                members.push(j);
                assigned[j] = true;
            }
        }
        if members.len() > 1 {
            let centroid =
                members.iter().map(|&j| roots[j]).sum::<C64>() / (members.len() as f64);
            for &j in &members {
                roots[j] = centroid;
            }
        }
        for &j in &members {
            out.push(roots[j]);
        }
    }
    out
}

/// Canonical deterministic order: lexicographic by (re, im) after rounding
/// to 1e-12, so reruns produce bit-identical listings.
pub fn sort_roots(mut roots: Vec<C64>) -> Vec<C64> {
    let key = |z: &C64| {
        let r = (z.re / 1e-12).round();
        let i = (z.im / 1e-12).round();
        (r, i)
    };
    roots.sort_by(|a, b| {
        let (ar, ai) = key(a);
        let (br, bi) = key(b);
        ar.partial_cmp(&br)
            .unwrap()
            .then(ai.partial_cmp(&bi).unwrap())
    });
    roots
}
