//! Partial sums of largest Lyapunov exponents L_p(s): QR-accumulated
//! cocycle norms, spatial (equilibrium-integral) and orbit (backward-walk)
//! estimators, truncated sums, and 1-D critical potentials.

use crate::cloud::AtomCloud;
use crate::equilibrium::{self, default_base};
use crate::error::{Error, Result};
use crate::family::MapFamily;
use crate::linalg::{mgs_orthonormalize, CMat};
use crate::preimage;
use crate::C64;
use rand::Rng;
use rayon::prelude::*;

pub const TOL_ORDER: f64 = 1e-3;
pub const TOL_INEQ: f64 = 1e-3;
pub const DEFAULT_RANDOM_FRAMES: usize = 8;
/// Streaming traversal budget for depth-matched spatial pairs; trees are
/// never materialized at this size.
pub const DEFAULT_STREAM_BUDGET: u64 = 1 << 28;

/// L_1..L_k (and the exponents chi_p = L_p - L_{p-1}) at one parameter.
#[derive(Clone, Debug)]
pub struct ExponentEstimate {
    pub s: Vec<C64>,
    /// L_p for p = 1..k.
    pub l: Vec<f64>,
    pub stderr: Vec<f64>,
    pub method: String,
    /// Worst |orbit - spatial| disagreement observed while estimating.
    pub spread: f64,
}

impl ExponentEstimate {
    pub fn chi(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.l.len());
        let mut prev = 0.0;
        for &lp in &self.l {
            out.push(lp - prev);
            prev = lp;
        }
        out
    }

    /// Ordering chi_1 >= ... >= chi_k and the lower bound
    /// L_k >= (1/2) log d_t, both within the documented tolerances.
    pub fn validate(&self, d_t: u64) -> Result<()> {
        let chi = self.chi();
        for w in chi.windows(2) {
            if w[1] > w[0] + TOL_ORDER {
                return Err(Error::InvalidConfig(format!(
                    "exponents out of order: {:?}", chi
                )));
            }
        }
        let bound = 0.5 * (d_t as f64).ln() - TOL_INEQ;
        let lk = *self.l.last().unwrap();
        if lk < bound {
            return Err(Error::InvalidConfig(format!(
                "L_k = {lk} below (1/2) log d_t = {bound}"
            )));
        }
        Ok(())
    }
}

/// All canonical axis p-frames (coordinate-subset frames) plus n_random
/// seeded random orthonormal p-frames. The axis frames make block-diagonal
/// (product) cocycles exact.
pub fn frames(k: usize, p: usize, n_random: usize, seed: u64) -> Vec<Vec<Vec<C64>>> {
    let mut out = Vec::new();
    let mut subset = vec![0usize; p];
    build_subsets(k, p, 0, &mut subset, 0, &mut out);
    let mut rng = preimage::walker_rng(seed, 0x0f7a);
    for _ in 0..n_random {
        let mut frame: Vec<Vec<C64>> = (0..p)
            .map(|_| {
                (0..k)
                    .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect()
            })
            .collect();
        if mgs_orthonormalize(&mut frame).is_some() {
            out.push(frame);
        }
    }
    out
}

fn build_subsets(
    k: usize,
    p: usize,
    pos: usize,
    subset: &mut Vec<usize>,
    start: usize,
    out: &mut Vec<Vec<Vec<C64>>>,
) {
    if pos == p {
        let frame = subset
            .iter()
            .map(|&axis| {
                let mut v = vec![C64::new(0.0, 0.0); k];
                v[axis] = C64::new(1.0, 0.0);
                v
            })
            .collect();
        out.push(frame);
        return;
    }
    for axis in start..k {
        subset[pos] = axis;
        build_subsets(k, p, pos + 1, subset, axis + 1, out);
    }
}

/// Push a p-frame through the Jacobians along the given orbit points,
/// re-orthonormalizing every step; returns the accumulated log-volume, or
/// None when the frame collapses (a critical point on the orbit).
pub fn logvol_along(
    family: &MapFamily,
    s: &[C64],
    points: &[Vec<C64>],
    frame: &[Vec<C64>],
) -> Option<f64> {
    let mut current: Vec<Vec<C64>> = frame.to_vec();
    let mut acc = 0.0;
    for z in points {
        let jac = family.jacobian_unchecked(s, z);
        for v in &mut current {
            *v = jac.matvec(v);
        }
        acc += mgs_orthonormalize(&mut current)?;
    }
    Some(acc)
}

/// psi_{p,n}(s, z) = (1/n) log ||wedge^p Df_s^n(z)||, estimated as the max
/// QR-accumulated log-volume over the frame set. Returns -infinity when a
/// critical point is hit on the orbit.
pub fn psi_pn(
    family: &MapFamily,
    s: &[C64],
    z: &[C64],
    n: usize,
    p: usize,
    frame_set: &[Vec<Vec<C64>>],
) -> Result<f64> {
    family.check_param(s)?;
    let k = family.fiber_dim();
    if p == 0 || p > k {
        return Err(Error::InvalidConfig(format!("p must be in 1..={k}")));
    }
    let r = family.escape_radius;
    let mut orbit = Vec::with_capacity(n);
    let mut w = z.to_vec();
    for step in 0..n {
        if crate::family::max_norm(&w) > r {
            return Err(Error::OrbitEscaped { step });
        }
        orbit.push(w.clone());
        w = family.eval_unchecked(s, &w);
    }
    let best = frame_set
        .iter()
        .filter_map(|frame| logvol_along(family, s, &orbit, frame))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(best / (n as f64))
}

/// The depth-matched spatial pair (phi_{p,n}, phi_{p,2n}): phi_{p,m} is
/// integrated against the pullback cloud of depth m + base_depth, so both
/// windows share their deepest levels and the 2n value averages over a
/// strictly deeper window (the discretized decreasing sequence).
#[derive(Clone, Copy, Debug)]
pub struct SpatialPair {
    pub n: usize,
    pub phi_n: f64,
    pub phi_2n: f64,
}

pub fn partial_sums_spatial(
    family: &MapFamily,
    s: &[C64],
    p: usize,
    base_depth: usize,
    n: usize,
    stream_budget: u64,
) -> Result<SpatialPair> {
    let k = family.fiber_dim();
    let additive = p == k;
    if additive {
        // log |det Jac| is a one-step additive observable, so the Birkhoff
        // sum integrates level by level: the image of the depth-M cloud
        // under f^i is the depth-(M-i) cloud.
        let base = default_base(family);
        equilibrium::exceptional_guard(family, s, &base)?;
        let depth = 2 * n + base_depth;
        let obs = |z: &[C64]| {
            let d = family.det_jacobian(s, z).norm();
            if d == 0.0 {
                f64::NEG_INFINITY
            } else {
                d.ln()
            }
        };
        let levels = preimage::level_integrals(family, s, &base, depth, stream_budget, &obs)?;
        let window = |m: usize| -> f64 {
            let mut acc = 0.0;
            for j in (base_depth + 1)..=(base_depth + m) {
                acc += levels[j];
            }
            acc / (m as f64)
        };
        return Ok(SpatialPair {
            n,
            phi_n: window(n),
            phi_2n: window(2 * n),
        });
    }
    // Non-additive p < k: evaluate the cocycle at the atoms of depth-matched
    // clouds. Forward orbits of a depth-m atom stay in V for m steps.
    let base = default_base(family);
    let frame_set = frames(k, p, DEFAULT_RANDOM_FRAMES, 0x9a);
    let phi_at = |m: usize| -> Result<f64> {
        let cloud = equilibrium::equilibrium_cloud(
            family,
            s,
            m + base_depth,
            &base,
            &equilibrium::CloudOptions::default(),
        )?;
        let values: Result<Vec<(f64, f64)>> = cloud
            .iter()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&(z, w)| psi_pn(family, s, z, m, p, &frame_set).map(|v| (w, v)))
            .collect();
        let mut acc = 0.0;
        for (w, v) in values? {
            acc += w * v;
        }
        Ok(acc)
    };
    Ok(SpatialPair {
        n,
        phi_n: phi_at(n)?,
        phi_2n: phi_at(2 * n)?,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct OrbitEstimate {
    pub value: f64,
    pub stderr: f64,
    pub discarded: usize,
    pub total: usize,
}

/// Time-average estimator of L_p along mu-generic orbits. Orbits are sampled
/// backward (repelling dynamics make forward orbits escape numerically),
/// stored, and the cocycle is pushed forward along the stored trajectory.
pub fn partial_sums_orbit(
    family: &MapFamily,
    s: &[C64],
    p: usize,
    orbit_length: usize,
    burn_in: usize,
    starts: usize,
    seed: u64,
) -> Result<OrbitEstimate> {
    family.check_param(s)?;
    let k = family.fiber_dim();
    if p == 0 || p > k {
        return Err(Error::InvalidConfig(format!("p must be in 1..={k}")));
    }
    if starts == 0 {
        return Err(Error::InvalidConfig("starts must be >= 1".into()));
    }
    let base = default_base(family);
    equilibrium::exceptional_guard(family, s, &base)?;
    let frame_set = frames(k, p, DEFAULT_RANDOM_FRAMES, seed);
    let per_start: Vec<Option<f64>> = (0..starts)
        .into_par_iter()
        .map(|i| {
            let mut rng = preimage::walker_rng(seed, i as u64);
            let steps = burn_in + orbit_length + 1;
            let walk = preimage::backward_orbit(family, s, &base, steps, &mut rng).ok()?;
            // Reversed walk is a forward orbit; drop the last burn_in points
            // (nearest the base) and keep orbit_length steps.
            let forward: Vec<Vec<C64>> = walk.iter().rev().cloned().collect();
            let orbit = &forward[..orbit_length];
            let best = frame_set
                .iter()
                .filter_map(|frame| logvol_along(family, s, orbit, frame))
                .fold(f64::NEG_INFINITY, f64::max);
            if best.is_finite() {
                Some(best / (orbit_length as f64))
            } else {
                None
            }
        })
        .collect();
    let values: Vec<f64> = per_start.iter().filter_map(|v| *v).collect();
    let discarded = starts - values.len();
    if discarded * 5 > starts {
        return Err(Error::OrbitDiscards {
            discarded,
            total: starts,
        });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / f64::max(n - 1.0, 1.0);
    Ok(OrbitEstimate {
        value: mean,
        stderr: (var / n).sqrt(),
        discarded,
        total: starts,
    })
}

/// L_k as the one-step integral of log |det Jac| against an equilibrium
/// cloud (the production estimator for scans).
pub fn sum_via_jacobian(family: &MapFamily, s: &[C64], cloud: &AtomCloud) -> Result<f64> {
    family.check_param(s)?;
    equilibrium::integrate(cloud, |z| {
        let d = family.det_jacobian(s, z).norm();
        if d == 0.0 {
            f64::NEG_INFINITY
        } else {
            d.ln()
        }
    })
    .map(|r| r.value)
}

/// Truncated partial sum: max over j = 0..p of L_j + (p - j) * lambda,
/// with L_0 = 0. lambda = -infinity returns L_p.
pub fn truncated_sum(l: &[f64], p: usize, lambda: f64) -> Result<f64> {
    if p == 0 || p > l.len() {
        return Err(Error::InvalidConfig(format!(
            "p must be in 1..={}",
            l.len()
        )));
    }
    if lambda == f64::NEG_INFINITY {
        return Ok(l[p - 1]);
    }
    let mut best = (p as f64) * lambda;
    for j in 1..=p {
        best = best.max(l[j - 1] + ((p - j) as f64) * lambda);
    }
    Ok(best)
}

/// lambda_j(s) = integral of log |z - c_j(s)| d mu_s, the potential at the
/// j-th critical point (1-D families).
pub fn critical_potential(
    family: &MapFamily,
    s: &[C64],
    cloud: &AtomCloud,
    j: usize,
) -> Result<f64> {
    let cps = family.critical_points(s)?;
    let cp = cps
        .get(j)
        .ok_or_else(|| Error::InvalidConfig(format!("critical index {j} out of range")))?;
    if family.fiber_dim() != 1 {
        return Err(Error::UnsupportedFamily {
            required: "fiber dimension 1".into(),
            actual: format!("fiber dimension {}", family.fiber_dim()),
        });
    }
    equilibrium::potential_1d(cloud, cp.point)
}

/// Build a full exponent estimate (all p) from the orbit estimator, with the
/// spatial cross-check recorded as spread.
pub fn exponent_estimate(
    family: &MapFamily,
    s: &[C64],
    orbit_length: usize,
    starts: usize,
    seed: u64,
) -> Result<ExponentEstimate> {
    let k = family.fiber_dim();
    let mut l = Vec::with_capacity(k);
    let mut stderr = Vec::with_capacity(k);
    let mut spread: f64 = 0.0;
    for p in 1..=k {
        // Generous burn-in: shallow backward steps still carry the base
        // point's transient and bias the time average.
        let orbit = partial_sums_orbit(family, s, p, orbit_length, 40, starts, seed + p as u64)?;
        l.push(orbit.value);
        stderr.push(orbit.stderr);
        // Cross-estimator honesty metric at a modest depth-matched pair.
        let pair_budget = if k == 1 { 1 << 16 } else { 1 << 14 };
        if preimage::tree_size(family.degree_t(), 8, pair_budget).is_ok() {
            if let Ok(pair) = partial_sums_spatial(family, s, p, 4, 2, pair_budget) {
                spread = spread.max((orbit.value - pair.phi_2n).abs());
            }
        }
    }
    Ok(ExponentEstimate {
        s: s.to_vec(),
        l,
        stderr,
        method: "orbit-qr".into(),
        spread,
    })
}

/// One-step Jacobian as a matrix, exposed for cocycle tests.
pub fn one_step(family: &MapFamily, s: &[C64], z: &[C64]) -> CMat {
    family.jacobian_unchecked(s, z)
}
