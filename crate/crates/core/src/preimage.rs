//! Preimage fibers f_s^{-1}(z) with multiplicity, exact pullback trees
//! realizing d_t^{-n}(f_s^n)^* at a point mass, Monte Carlo inverse walks,
//! and a streaming depth-first traversal for integrals that exceed the
//! materialization budget.

use crate::cloud::{AtomCloud, CloudMeta};
use crate::error::{Error, Result};
use crate::family::{FamilyKind, MapFamily};
use crate::poly::{self, Poly};
use crate::C64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const TOL_ROOT: f64 = 1e-10;
pub const DEFAULT_NODE_BUDGET: u64 = 1 << 20;

#[derive(Clone, Debug)]
pub struct PreimageFiber {
    pub base: Vec<C64>,
    /// Exactly d_t preimages, repeated per multiplicity, canonical order.
    pub points: Vec<Vec<C64>>,
    pub residuals: Vec<f64>,
}

/// All d-th roots of c in canonical order.
pub fn nth_roots(c: C64, d: u32) -> Vec<C64> {
    let r = c.norm();
    if r == 0.0 {
        return vec![C64::new(0.0, 0.0); d as usize];
    }
    let rho = r.powf(1.0 / (d as f64));
    let theta = c.arg() / (d as f64);
    let roots = (0..d)
        .map(|j| {
            C64::from_polar(
                rho,
                theta + 2.0 * std::f64::consts::PI * (j as f64) / (d as f64),
            )
        })
        .collect();
    poly::sort_roots(roots)
}

fn fiber_1d(p: &Poly, target: C64) -> Result<Vec<C64>> {
    let mut shifted = p.clone();
    shifted.coeffs[0] -= target;
    shifted.roots(poly::DEFAULT_MAX_ITERS)
}

pub fn fiber(family: &MapFamily, s: &[C64], z: &[C64]) -> Result<PreimageFiber> {
    family.check_param(s)?;
    let points: Vec<Vec<C64>> = match &family.kind {
        FamilyKind::Unicritical { degree } => nth_roots(z[0] - s[0], *degree)
            .into_iter()
            .map(|w| vec![w])
            .collect(),
        FamilyKind::General1d { .. } => {
            let p = family.poly_1d(s).unwrap();
            fiber_1d(&p, z[0])?.into_iter().map(|w| vec![w]).collect()
        }
        FamilyKind::Product { parts } => {
            let mut coord_fibers: Vec<Vec<C64>> = Vec::with_capacity(parts.len());
            for i in 0..parts.len() {
                let part = &parts[i];
                let roots = if part.coeffs.is_empty() {
                    nth_roots(z[i] - s[part.param_index], part.degree)
                } else {
                    fiber_1d(&family.component_poly(s, i).unwrap(), z[i])?
                };
                coord_fibers.push(roots);
            }
            cartesian(&coord_fibers)
        }
        FamilyKind::Skew { .. } => {
            let p = family.skew_p_poly(s).unwrap();
            let mut out = Vec::new();
            for w1 in fiber_1d(&p, z[0])? {
                let q = family.skew_q_poly(s, w1).unwrap();
                for w2 in fiber_1d(&q, z[1])? {
                    out.push(vec![w1, w2]);
                }
            }
            sort_points(out)
        }
    };
    let scale = TOL_ROOT * f64::max(1.0, crate::family::max_norm(z));
    let residuals: Vec<f64> = points
        .iter()
        .map(|w| {
            let image = family.eval_unchecked(s, w);
            image
                .iter()
                .zip(z.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max)
        })
        .collect();
    let worst = residuals.iter().copied().fold(0.0, f64::max);
    // Clustered multiple roots carry an intrinsically larger residual
    // (O(eps^{1/m})); allow a generous slack over the polish tolerance.
    if worst > scale * 1e4 && worst > 1e-5 {
        return Err(Error::RootFinding {
            iters: poly::DEFAULT_MAX_ITERS,
            residual: worst,
        });
    }
    debug_assert_eq!(points.len() as u64, family.degree_t());
    Ok(PreimageFiber {
        base: z.to_vec(),
        points,
        residuals,
    })
}

fn cartesian(coord_fibers: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let mut out: Vec<Vec<C64>> = vec![Vec::new()];
    for roots in coord_fibers {
        let mut next = Vec::with_capacity(out.len() * roots.len());
        for prefix in &out {
            for &r in roots {
                let mut p = prefix.clone();
                p.push(r);
                next.push(p);
            }
        }
        out = next;
    }
    sort_points(out)
}

pub fn sort_points(mut points: Vec<Vec<C64>>) -> Vec<Vec<C64>> {
    let key = |p: &Vec<C64>| -> Vec<(i64, i64)> {
        p.iter()
            .map(|z| {
                (
                    (z.re / 1e-12).round() as i64,
                    (z.im / 1e-12).round() as i64,
                )
            })
            .collect()
    };
    points.sort_by(|a, b| key(a).cmp(&key(b)));
    points
}

/// Check d_t^n against a budget without overflow.
pub fn tree_size(d_t: u64, n: usize, budget: u64) -> Result<u64> {
    let mut size: u128 = 1;
    for _ in 0..n {
        size *= d_t as u128;
        if size > budget as u128 {
            return Err(Error::BudgetExceeded {
                needed: size,
                budget,
            });
        }
    }
    Ok(size as u64)
}

/// The exact atomic measure d_t^{-n}(f_s^n)^* delta_{z0}.
pub fn pullback_tree(
    family: &MapFamily,
    s: &[C64],
    z0: &[C64],
    n: usize,
    node_budget: u64,
) -> Result<AtomCloud> {
    family.check_param(s)?;
    let d_t = family.degree_t();
    let leaves = tree_size(d_t, n, node_budget)?;
    let mut level: Vec<Vec<C64>> = vec![z0.to_vec()];
    for _ in 0..n {
        level = if level.len() >= 64 {
            let expanded: Result<Vec<Vec<Vec<C64>>>> = level
                .par_iter()
                .map(|z| fiber(family, s, z).map(|f| f.points))
                .collect();
            expanded?.into_iter().flatten().collect()
        } else {
            let mut next = Vec::with_capacity(level.len() * d_t as usize);
            for z in &level {
                next.extend(fiber(family, s, z)?.points);
            }
            next
        };
    }
    debug_assert_eq!(level.len() as u64, leaves);
    let w = 1.0 / (leaves as f64);
    let meta = CloudMeta {
        depth: n,
        method: "tree".into(),
        base: z0.to_vec(),
        seed: None,
    };
    let mut cloud = AtomCloud::with_capacity(family.fiber_dim(), level.len(), meta);
    for point in &level {
        cloud.push(point, w);
    }
    Ok(cloud)
}

/// One uniformly random backward trajectory of given length; returns the
/// points visited after each backward step (length `steps`).
pub fn backward_orbit(
    family: &MapFamily,
    s: &[C64],
    z0: &[C64],
    steps: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Vec<C64>>> {
    let mut current = z0.to_vec();
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let f = fiber(family, s, &current)?;
        let pick = rng.gen_range(0..f.points.len());
        current = f.points[pick].clone();
        out.push(current.clone());
    }
    Ok(out)
}

/// Monte Carlo estimator of the depth-n pullback measure: `walkers` atoms of
/// weight 1/walkers, each the endpoint of an n-step uniform backward walk.
/// Per-walker generators are seeded from (seed, walker index) so results are
/// independent of thread scheduling.
pub fn inverse_walk(
    family: &MapFamily,
    s: &[C64],
    z0: &[C64],
    n: usize,
    walkers: usize,
    seed: u64,
) -> Result<AtomCloud> {
    family.check_param(s)?;
    if walkers == 0 {
        return Err(Error::InvalidConfig("walkers must be >= 1".into()));
    }
    let results: Vec<Result<Vec<C64>>> = (0..walkers)
        .into_par_iter()
        .map(|i| {
            let mut rng = walker_rng(seed, i as u64);
            if n == 0 {
                return Ok(z0.to_vec());
            }
            let orbit = backward_orbit(family, s, z0, n, &mut rng)?;
            Ok(orbit.last().unwrap().clone())
        })
        .collect();
    let failed = results.iter().filter(|r| r.is_err()).count();
    if failed * 100 > walkers {
        return Err(Error::WalkerFailures {
            failed,
            total: walkers,
        });
    }
    let meta = CloudMeta {
        depth: n,
        method: "walk".into(),
        base: z0.to_vec(),
        seed: Some(seed),
    };
    let mut cloud = AtomCloud::with_capacity(family.fiber_dim(), walkers, meta);
    let survivors: Vec<Vec<C64>> = results.into_iter().filter_map(|r| r.ok()).collect();
    let w = 1.0 / (survivors.len() as f64);
    for point in &survivors {
        cloud.push(point, w);
    }
    Ok(cloud)
}

pub fn walker_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Streaming preimage-tree traversal: returns, for each level j = 0..=depth,
/// the integral of `obs` against the level-j pullback measure
/// d_t^{-j}(f_s^j)^* delta_{z0}. Memory is O(depth * d_t); no budget applies
/// beyond `max_leaves` (a safety valve on total work).
pub fn level_integrals<F>(
    family: &MapFamily,
    s: &[C64],
    z0: &[C64],
    depth: usize,
    max_leaves: u64,
    obs: &F,
) -> Result<Vec<f64>>
where
    F: Fn(&[C64]) -> f64 + Sync,
{
    family.check_param(s)?;
    let d_t = family.degree_t();
    tree_size(d_t, depth, max_leaves)?;
    // Split the tree at the first level for parallelism; each subtree is
    // traversed depth-first with per-level accumulators.
    if depth == 0 {
        return Ok(vec![obs(z0)]);
    }
    let first = fiber(family, s, z0)?;
    let subtree_sums: Result<Vec<Vec<f64>>> = first
        .points
        .par_iter()
        .map(|start| {
            let mut sums = vec![0.0; depth];
            dfs_sums(family, s, start, 1, depth, obs, &mut sums)?;
            Ok(sums)
        })
        .collect();
    let subtree_sums = subtree_sums?;
    let mut out = vec![0.0; depth + 1];
    out[0] = obs(z0);
    for sums in &subtree_sums {
        for j in 1..=depth {
            out[j] += sums[j - 1];
        }
    }
    let mut scale = 1.0;
    for level in out.iter_mut().skip(1) {
        scale /= d_t as f64;
        *level *= scale;
    }
    Ok(out)
}

fn dfs_sums<F>(
    family: &MapFamily,
    s: &[C64],
    point: &[C64],
    level: usize,
    depth: usize,
    obs: &F,
    sums: &mut [f64],
) -> Result<()>
where
    F: Fn(&[C64]) -> f64 + Sync,
{
    sums[level - 1] += obs(point);
    if level < depth {
        let f = fiber(family, s, point)?;
        for child in &f.points {
            dfs_sums(family, s, child, level + 1, depth, obs, sums)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn quadratic() -> MapFamily {
        MapFamily::parse(
            "kind = unicritical\ndegree = 2\nescape_radius = 7\nparam_domain = -2,1,-1.5,1.5\n",
        )
        .unwrap()
    }

    #[test]
    fn square_root_fiber() {
        let f = quadratic();
        let fib = fiber(&f, &[c(0.0, 0.0)], &[c(4.0, 0.0)]).unwrap();
        assert_eq!(fib.points.len(), 2);
        assert!((fib.points[0][0] - c(-2.0, 0.0)).norm() < 1e-12);
        assert!((fib.points[1][0] - c(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn critical_value_fiber_has_multiplicity() {
        let f = quadratic();
        let fib = fiber(&f, &[c(0.0, 0.0)], &[c(0.0, 0.0)]).unwrap();
        assert_eq!(fib.points.len(), 2);
        assert!(fib.points[0][0].norm() < 1e-12);
        assert!(fib.points[1][0].norm() < 1e-12);
    }

    #[test]
    fn cubic_fiber_matches_factorization() {
        // z^3 - 3z at 0: {0, sqrt 3, -sqrt 3}
        let f = MapFamily::parse(
            "kind = general1d\ndegree = 3\nescape_radius = 9\nparam_domain = -1,1,-1,1\na0 = s\na1 = -3\n",
        )
        .unwrap();
        let fib = fiber(&f, &[c(0.0, 0.0)], &[c(0.0, 0.0)]).unwrap();
        let s3 = 3.0f64.sqrt();
        assert!((fib.points[0][0] - c(-s3, 0.0)).norm() < 1e-10);
        assert!(fib.points[1][0].norm() < 1e-10);
        assert!((fib.points[2][0] - c(s3, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn tree_depth2_fourth_roots() {
        // z^2, z0 = 2, n = 2: the four 4th roots of 2.
        let f = quadratic();
        let cloud = pullback_tree(&f, &[c(0.0, 0.0)], &[c(2.0, 0.0)], 2, 1 << 10).unwrap();
        assert_eq!(cloud.len(), 4);
        let r = 2.0f64.powf(0.25);
        for (p, w) in cloud.iter() {
            assert!((p[0].norm() - r).abs() < 1e-12);
            assert!((p[0].powu(4) - c(2.0, 0.0)).norm() < 1e-10);
            assert_eq!(w, 0.25);
        }
    }

    #[test]
    fn tree_depth3_eighth_roots_of_unity() {
        let f = quadratic();
        let cloud = pullback_tree(&f, &[c(0.0, 0.0)], &[c(1.0, 0.0)], 3, 1 << 10).unwrap();
        assert_eq!(cloud.len(), 8);
        for (p, _) in cloud.iter() {
            assert!((p[0].powu(8) - c(1.0, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn tree_basilica_quartic() {
        // z^2 - 1, z0 = 0, n = 2: solutions of (w^2-1)^2 - 1 = 0, i.e.
        // {0, 0, sqrt2, -sqrt2}.
        let f = quadratic();
        let cloud = pullback_tree(&f, &[c(-1.0, 0.0)], &[c(0.0, 0.0)], 2, 1 << 10).unwrap();
        let mut res: Vec<f64> = cloud.iter().map(|(p, _)| p[0].re).collect();
        res.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let s2 = 2.0f64.sqrt();
        assert!((res[0] + s2).abs() < 1e-9);
        // The double root at 0 carries the square-root of the evaluation
        // error, so its tolerance is the square root of the simple-root one.
        assert!(res[1].abs() < 1e-7);
        assert!(res[2].abs() < 1e-7);
        assert!((res[3] - s2).abs() < 1e-9);
    }

    #[test]
    fn budget_enforced() {
        let f = quadratic();
        let err = pullback_tree(&f, &[c(0.0, 0.0)], &[c(1.0, 0.0)], 20, 1 << 10);
        assert!(matches!(err, Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn fiber_consistency_deep() {
        // |f^n(atom) - z0| small for every depth-n atom.
        let f = quadratic();
        let s = [c(0.3, 0.2)];
        let n = 6;
        let cloud = pullback_tree(&f, &s, &[c(2.0, 1.0)], n, 1 << 10).unwrap();
        for (p, _) in cloud.iter() {
            let mut w = p.to_vec();
            for _ in 0..n {
                w = f.eval_unchecked(&s, &w);
            }
            assert!((w[0] - c(2.0, 1.0)).norm() < (n as f64) * TOL_ROOT * 10.0);
        }
    }

    #[test]
    fn pullback_composition() {
        let f = quadratic();
        let s = [c(-0.4, 0.1)];
        let z0 = [c(1.5, 0.0)];
        let whole = pullback_tree(&f, &s, &z0, 5, 1 << 10).unwrap();
        let top = pullback_tree(&f, &s, &z0, 2, 1 << 10).unwrap();
        let mut union_pts: Vec<C64> = Vec::new();
        for (p, _) in top.iter() {
            let sub = pullback_tree(&f, &s, p, 3, 1 << 10).unwrap();
            for (q, _) in sub.iter() {
                union_pts.push(q[0]);
            }
        }
        let mut a: Vec<C64> = whole.iter().map(|(p, _)| p[0]).collect();
        let mut b = union_pts;
        let key = |z: &C64| ((z.re * 1e9).round() as i64, (z.im * 1e9).round() as i64);
        a.sort_by_key(key);
        b.sort_by_key(key);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).norm() < 1e-9);
        }
    }

    #[test]
    fn walk_single_walker_on_circle() {
        let f = quadratic();
        let cloud =
            inverse_walk(&f, &[c(0.0, 0.0)], &[c(1.0, 0.0)], 10, 1, 7).unwrap();
        assert_eq!(cloud.len(), 1);
        let (p, w) = cloud.iter().next().unwrap();
        assert!((p[0].norm() - 1.0).abs() < 1e-9);
        assert_eq!(w, 1.0);
    }

    #[test]
    fn walk_depth_zero_is_base() {
        let f = quadratic();
        let cloud =
            inverse_walk(&f, &[c(0.2, 0.0)], &[c(1.5, 0.5)], 0, 16, 3).unwrap();
        for (p, _) in cloud.iter() {
            assert_eq!(p[0], c(1.5, 0.5));
        }
    }

    #[test]
    fn walk_modulus_exact() {
        // z^2 at z0=2: every depth-n preimage has |w| = 2^{1/2^n} exactly.
        let f = quadratic();
        let n = 20;
        let cloud =
            inverse_walk(&f, &[c(0.0, 0.0)], &[c(2.0, 0.0)], n, 200, 11).unwrap();
        let expect = 2.0f64.ln() / (2.0f64.powi(n as i32));
        for (p, _) in cloud.iter() {
            assert!((p[0].norm().ln() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn walk_deterministic_per_seed() {
        let f = quadratic();
        let a = inverse_walk(&f, &[c(-0.3, 0.4)], &[c(2.0, 0.0)], 8, 64, 42).unwrap();
        let b = inverse_walk(&f, &[c(-0.3, 0.4)], &[c(2.0, 0.0)], 8, 64, 42).unwrap();
        for i in 0..a.len() {
            assert_eq!(a.atom(i), b.atom(i));
        }
    }

    #[test]
    fn level_integrals_match_trees() {
        let f = quadratic();
        let s = [c(-0.5, 0.25)];
        let z0 = [c(2.0, 0.0)];
        let obs = |p: &[C64]| p[0].norm_sqr();
        let levels = level_integrals(&f, &s, &z0, 5, 1 << 10, &obs).unwrap();
        for (j, &value) in levels.iter().enumerate() {
            let cloud = pullback_tree(&f, &s, &z0, j, 1 << 10).unwrap();
            let direct: f64 = cloud.iter().map(|(p, w)| w * obs(p)).sum();
            assert!((value - direct).abs() < 1e-12, "level {j}");
        }
    }
}
