//! Periodic points and their classification, Newton continuation along
//! parameter paths, periodic-point measures, Hausdorff scans of Julia
//! clouds, and harmonicity checks on scalar parameter fields.

use crate::cloud::AtomCloud;
use crate::equilibrium::{self, CloudOptions};
use crate::error::{Error, Result};
use crate::family::MapFamily;
use crate::field::{GridSpec, NodeStatus, ScalarField};
use crate::poly::Poly;
use crate::preimage;
use crate::C64;
use rayon::prelude::*;

pub const TOL_MULTIPLIER: f64 = 1e-6;
pub const TOL_FIXED: f64 = 1e-10;
pub const DEFAULT_ROOT_BUDGET: u64 = 1 << 16;
/// Above this degree, f^N is never expanded in coefficients; roots come
/// from Newton on preimage-tree seeds instead.
pub const COMPOSE_DEGREE_CAP: u64 = 1024;
const NEWTON_MAX_ITERS: usize = 60;
const ORBIT_MATCH_RADIUS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrbitClass {
    Attracting,
    Repelling,
    Indifferent,
}

impl OrbitClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            OrbitClass::Attracting => "attracting",
            OrbitClass::Repelling => "repelling",
            OrbitClass::Indifferent => "indifferent",
        }
    }

    pub fn from_multiplier(multiplier: C64) -> OrbitClass {
        let m = multiplier.norm();
        if m > 1.0 + TOL_MULTIPLIER {
            OrbitClass::Repelling
        } else if m < 1.0 - TOL_MULTIPLIER {
            OrbitClass::Attracting
        } else {
            OrbitClass::Indifferent
        }
    }
}

#[derive(Clone, Debug)]
pub struct PeriodicOrbit {
    pub period: usize,
    pub points: Vec<C64>,
    pub multiplier: C64,
    pub class: OrbitClass,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct PeriodicSet {
    pub orbits: Vec<PeriodicOrbit>,
    /// Roots of f^N(z) - z found, before lower-period removal.
    pub total_roots: usize,
    /// Set when the root count disagrees with divisor combinatorics
    /// (clustered roots at multiple fixed points and the like).
    pub warning: Option<String>,
}

fn require_1d(family: &MapFamily, s: &[C64]) -> Result<Poly> {
    if family.fiber_dim() != 1 {
        return Err(Error::UnsupportedFamily {
            required: "fiber dimension 1".into(),
            actual: format!("fiber dimension {}", family.fiber_dim()),
        });
    }
    family.check_param(s)?;
    family.poly_1d(s).ok_or_else(|| Error::UnsupportedFamily {
        required: "polynomial fiber map".into(),
        actual: "skew component".into(),
    })
}

/// f^N and its derivative at z by forward iteration with the chain rule.
fn iterate_with_derivative(f: &Poly, z: C64, n: usize) -> (C64, C64) {
    let mut w = z;
    let mut deriv = C64::new(1.0, 0.0);
    for _ in 0..n {
        let (fw, dfw) = f.eval_with_derivative(w);
        deriv *= dfw;
        w = fw;
    }
    (w, deriv)
}

/// Newton iteration on g(z) = f^N(z) - z from the given seed.
fn newton_orbit_point(f: &Poly, seed: C64, n: usize, escape: f64) -> Option<C64> {
    let mut z = seed;
    for _ in 0..NEWTON_MAX_ITERS {
        let (fz, dfz) = iterate_with_derivative(f, z, n);
        let g = fz - z;
        let scale = z.norm().max(1.0);
        if g.norm() <= 0.1 * TOL_FIXED * scale {
            return Some(z);
        }
        let gp = dfz - C64::new(1.0, 0.0);
        if gp.norm() < 1e-300 || !z.is_finite() || z.norm() > escape * 10.0 {
            return None;
        }
        z -= g / gp;
    }
    let (fz, _) = iterate_with_derivative(f, z, n);
    if (fz - z).norm() <= TOL_FIXED * z.norm().max(1.0) {
        Some(z)
    } else {
        None
    }
}

fn build_orbit(f: &Poly, start: C64, period: usize) -> PeriodicOrbit {
    let mut points = Vec::with_capacity(period);
    let mut multiplier = C64::new(1.0, 0.0);
    let mut z = start;
    for _ in 0..period {
        points.push(z);
        let (fz, dfz) = f.eval_with_derivative(z);
        multiplier *= dfz;
        z = fz;
    }
    let mut residual = 0.0f64;
    for &p in &points {
        let (fp, _) = iterate_with_derivative(f, p, period);
        residual = residual.max((fp - p).norm());
    }
    PeriodicOrbit {
        period,
        points,
        multiplier,
        class: OrbitClass::from_multiplier(multiplier),
        residual,
    }
}

/// All period-N orbits of a 1-D fiber map: roots of f^N(z) - z, orbits of
/// strictly lower period removed by cycle inspection, cyclic duplicates
/// merged. Roots come from coefficient expansion of the composition when
/// the degree allows, otherwise from Newton on a depth-N preimage-tree
/// seed set.
pub fn periodic_points(family: &MapFamily, s: &[C64], period: usize) -> Result<PeriodicSet> {
    if period == 0 {
        return Err(Error::InvalidConfig("period must be positive".into()));
    }
    let f = require_1d(family, s)?;
    let d_t = family.degree_t();
    let count = preimage::tree_size(d_t, period, DEFAULT_ROOT_BUDGET)?;
    let roots = if count <= COMPOSE_DEGREE_CAP {
        let mut composed = f.clone();
        for _ in 1..period {
            composed = f.compose(&composed);
        }
        // Subtract z.
        let mut coeffs = composed.coeffs.clone();
        coeffs[1] -= C64::new(1.0, 0.0);
        Poly { coeffs }.roots(crate::poly::DEFAULT_MAX_ITERS)?
    } else {
        newton_roots_from_tree(family, s, &f, period)?
    };
    let total_roots = roots.len();
    let mut used = vec![false; roots.len()];
    let mut orbits: Vec<PeriodicOrbit> = Vec::new();
    let mut lower_period = 0usize;
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let z = roots[i];
        // Minimal period by cycle inspection over the divisors of N.
        let mut minimal = period;
        let mut w = z;
        for q in 1..period {
            w = f.eval(w);
            if period % q == 0 && (w - z).norm() <= ORBIT_MATCH_RADIUS {
                minimal = q;
                break;
            }
        }
        // Consume the whole cycle so each orbit is reported once.
        let orbit = build_orbit(&f, z, minimal);
        for &p in &orbit.points {
            for (j, &r) in roots.iter().enumerate() {
                if !used[j] && (r - p).norm() <= ORBIT_MATCH_RADIUS {
                    used[j] = true;
                }
            }
        }
        if minimal < period {
            lower_period += orbit.points.len();
        } else {
            orbits.push(orbit);
        }
    }
    orbits.sort_by(|a, b| {
        let ka = (a.points[0].re, a.points[0].im);
        let kb = (b.points[0].re, b.points[0].im);
        ka.partial_cmp(&kb).unwrap()
    });
    let covered = lower_period + orbits.iter().map(|o| o.points.len()).sum::<usize>();
    let warning = if total_roots as u64 != count || covered != total_roots {
        Some(format!(
            "expected {count} roots of f^{period} - id, found {total_roots}, \
             accounted {covered} (clustered or multiple roots)"
        ))
    } else {
        None
    };
    Ok(PeriodicSet {
        orbits,
        total_roots,
        warning,
    })
}

/// Seed set for high-degree periods: leaves of a depth-N preimage tree of a
/// generic base point (an approximation of the Julia set, which carries all
/// repelling period-N points), polished by Newton and deduplicated.
fn newton_roots_from_tree(
    family: &MapFamily,
    s: &[C64],
    f: &Poly,
    period: usize,
) -> Result<Vec<C64>> {
    let base = equilibrium::default_base(family);
    let tree = preimage::pullback_tree(family, s, &base, period, DEFAULT_ROOT_BUDGET)?;
    let seeds: Vec<C64> = tree.iter().map(|(z, _)| z[0]).collect();
    let found: Vec<Option<C64>> = seeds
        .par_iter()
        .map(|&seed| newton_orbit_point(f, seed, period, family.escape_radius))
        .collect();
    let mut roots: Vec<C64> = Vec::new();
    for z in found.into_iter().flatten() {
        if roots.iter().all(|&r| (r - z).norm() > ORBIT_MATCH_RADIUS) {
            roots.push(z);
        }
    }
    if roots.is_empty() {
        return Err(Error::RootFinding {
            iters: NEWTON_MAX_ITERS,
            residual: f64::INFINITY,
        });
    }
    // Attracting cycles attract no preimage-tree seeds; sweep the critical
    // orbits as extra seeds so such cycles are still found.
    let mut extra: Vec<C64> = Vec::new();
    for cp in family.critical_points(s)? {
        let mut z = cp.point;
        for _ in 0..4 * period {
            z = f.eval(z);
            if !z.is_finite() || z.norm() > family.escape_radius {
                break;
            }
            extra.push(z);
        }
    }
    for z in extra
        .into_iter()
        .filter_map(|seed| newton_orbit_point(f, seed, period, family.escape_radius))
    {
        if roots.iter().all(|&r| (r - z).norm() > ORBIT_MATCH_RADIUS) {
            roots.push(z);
        }
    }
    Ok(roots)
}

#[derive(Clone, Debug)]
pub struct TrackedNode {
    pub s: Vec<C64>,
    pub orbit: PeriodicOrbit,
}

#[derive(Clone, Debug)]
pub struct TrackedBranch {
    pub nodes: Vec<TrackedNode>,
    /// Index into `nodes` of the node where tracking was cut short, with
    /// the reason; evidence of the bifurcation locus, not an error.
    pub flagged: Option<(usize, String)>,
}

/// Newton continuation of one periodic orbit along a parameter path. Steps
/// that fail Newton are halved (recursively, up to 10 times); a
/// classification change or persistent divergence halts tracking with a
/// flag at the offending path node.
pub fn track_periodic(
    family: &MapFamily,
    s_path: &[Vec<C64>],
    orbit: &PeriodicOrbit,
) -> Result<TrackedBranch> {
    if s_path.is_empty() {
        return Err(Error::InvalidConfig("empty parameter path".into()));
    }
    let period = orbit.period;
    let f0 = require_1d(family, &s_path[0])?;
    let start = newton_orbit_point(&f0, orbit.points[0], period, family.escape_radius)
        .ok_or(Error::RootFinding {
            iters: NEWTON_MAX_ITERS,
            residual: f64::INFINITY,
        })?;
    let mut nodes = vec![TrackedNode {
        s: s_path[0].clone(),
        orbit: build_orbit(&f0, start, period),
    }];
    let mut flagged = None;
    'path: for (node_index, s_next) in s_path.iter().enumerate().skip(1) {
        let prev = nodes.last().unwrap();
        let mut point = prev.orbit.points[0];
        let mut s_from = prev.s.clone();
        // March toward s_next, halving the parameter step on Newton failure.
        let mut remaining: Vec<Vec<C64>> = vec![s_next.clone()];
        let mut halvings = 0;
        while let Some(s_to) = remaining.pop() {
            let f = require_1d(family, &s_to)?;
            match newton_orbit_point(&f, point, period, family.escape_radius) {
                Some(z) => {
                    point = z;
                    s_from = s_to;
                }
                None => {
                    halvings += 1;
                    if halvings > 10 {
                        flagged = Some((node_index, "Newton divergence".into()));
                        break 'path;
                    }
                    let mid: Vec<C64> = s_from
                        .iter()
                        .zip(s_to.iter())
                        .map(|(a, b)| 0.5 * (a + b))
                        .collect();
                    remaining.push(s_to);
                    remaining.push(mid);
                }
            }
        }
        let f = require_1d(family, s_next)?;
        let tracked = build_orbit(&f, point, period);
        let class_changed = tracked.class != nodes[0].orbit.class;
        nodes.push(TrackedNode {
            s: s_next.clone(),
            orbit: tracked,
        });
        if class_changed {
            flagged = Some((node_index, "classification change".into()));
            break;
        }
    }
    Ok(TrackedBranch { nodes, flagged })
}

/// The measure d_t^{-n} sum of point masses over the n-th preimages of a
/// repelling periodic point.
pub fn periodic_measure(
    family: &MapFamily,
    s: &[C64],
    base: &PeriodicOrbit,
    n: usize,
    node_budget: u64,
) -> Result<AtomCloud> {
    if base.class != OrbitClass::Repelling {
        return Err(Error::InvalidConfig(format!(
            "periodic_measure needs a repelling base orbit, got {}",
            base.class.as_str()
        )));
    }
    if base.residual > TOL_FIXED {
        return Err(Error::InvalidConfig(format!(
            "base orbit residual {} above {TOL_FIXED}",
            base.residual
        )));
    }
    let root = vec![base.points[0]];
    let mut cloud = preimage::pullback_tree(family, s, &root, n, node_budget)?;
    cloud.meta.method = "periodic".into();
    Ok(cloud)
}

/// Hausdorff distance between atom supports under the max norm on C^k,
/// with a spatial-bucket index on the first coordinate.
pub fn hausdorff(a: &AtomCloud, b: &AtomCloud) -> Result<f64> {
    if a.len() == 0 || b.len() == 0 {
        return Err(Error::InvalidConfig("hausdorff needs nonempty clouds".into()));
    }
    if a.k != b.k {
        return Err(Error::InvalidConfig("hausdorff clouds of unequal dimension".into()));
    }
    Ok(directed_hausdorff(a, b).max(directed_hausdorff(b, a)))
}

struct BucketIndex<'c> {
    cloud: &'c AtomCloud,
    cell: f64,
    origin: (f64, f64),
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl<'c> BucketIndex<'c> {
    fn new(cloud: &'c AtomCloud) -> Self {
        let mut lo = (f64::INFINITY, f64::INFINITY);
        let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (z, _) in cloud.iter() {
            lo = (lo.0.min(z[0].re), lo.1.min(z[0].im));
            hi = (hi.0.max(z[0].re), hi.1.max(z[0].im));
        }
        let span = (hi.0 - lo.0).max(hi.1 - lo.1).max(1e-12);
        let target = ((cloud.len() as f64).sqrt().ceil() as usize).clamp(1, 1024);
        let cell = span / target as f64;
        let nx = (((hi.0 - lo.0) / cell).floor() as usize) + 1;
        let ny = (((hi.1 - lo.1) / cell).floor() as usize) + 1;
        let mut buckets = vec![Vec::new(); nx * ny];
        for i in 0..cloud.len() {
            let z = cloud.atom(i)[0];
            let bx = (((z.re - lo.0) / cell) as usize).min(nx - 1);
            let by = (((z.im - lo.1) / cell) as usize).min(ny - 1);
            buckets[by * nx + bx].push(i);
        }
        BucketIndex {
            cloud,
            cell,
            origin: lo,
            nx,
            ny,
            buckets,
        }
    }

    /// Min over atoms of the max-norm distance in C^k to the query point.
    /// Buckets live in the first coordinate; distance there lower-bounds
    /// the full max-norm distance, so ring search prunes safely.
    fn min_distance(&self, query: &[C64]) -> f64 {
        let q = query[0];
        let bx = (((q.re - self.origin.0) / self.cell).floor().max(0.0) as usize).min(self.nx - 1);
        let by = (((q.im - self.origin.1) / self.cell).floor().max(0.0) as usize).min(self.ny - 1);
        let mut best = f64::INFINITY;
        let max_ring = self.nx.max(self.ny);
        for ring in 0..=max_ring {
            // Any atom in a farther ring is at least (ring - 1) cells away
            // in the first coordinate.
            if ring >= 2 && best <= (ring as f64 - 1.0) * self.cell {
                break;
            }
            let mut any = false;
            for dy in -(ring as i64)..=(ring as i64) {
                for dx in -(ring as i64)..=(ring as i64) {
                    if dx.abs().max(dy.abs()) != ring as i64 {
                        continue;
                    }
                    let (x, y) = (bx as i64 + dx, by as i64 + dy);
                    if x < 0 || y < 0 || x as usize >= self.nx || y as usize >= self.ny {
                        continue;
                    }
                    any = true;
                    for &i in &self.buckets[y as usize * self.nx + x as usize] {
                        let atom = self.cloud.atom(i);
                        let mut dist = 0.0f64;
                        for (za, zq) in atom.iter().zip(query.iter()) {
                            dist = dist.max((za - zq).norm());
                        }
                        best = best.min(dist);
                    }
                }
            }
            if !any && best.is_finite() {
                break;
            }
        }
        best
    }
}

fn directed_hausdorff(from: &AtomCloud, to: &AtomCloud) -> f64 {
    let index = BucketIndex::new(to);
    (0..from.len())
        .into_par_iter()
        .map(|i| index.min_distance(from.atom(i)))
        .reduce(|| 0.0, f64::max)
}

/// Mean nearest-neighbor distance over a sample of atoms.
pub fn mean_atom_spacing(cloud: &AtomCloud) -> f64 {
    if cloud.len() < 2 {
        return 0.0;
    }
    let index = BucketIndex::new(cloud);
    let stride = (cloud.len() / 256).max(1);
    let sampled: Vec<usize> = (0..cloud.len()).step_by(stride).collect();
    let total: f64 = sampled
        .par_iter()
        .map(|&i| {
            // Exclude the atom itself by searching from a point displaced
            // far outside; simpler: brute min over others in its bucket
            // neighborhood via min_distance of a tiny perturbation.
            let mut q = cloud.atom(i).to_vec();
            q[0] += C64::new(1e-300, 0.0);
            let d = index.min_distance(&q);
            if d > 0.0 {
                d
            } else {
                // The query matched itself (distance 0); fall back to a
                // brute scan for this sample point.
                let mut best = f64::INFINITY;
                for j in 0..cloud.len() {
                    if j == i {
                        continue;
                    }
                    let mut dist = 0.0f64;
                    for (za, zb) in cloud.atom(i).iter().zip(cloud.atom(j).iter()) {
                        dist = dist.max((za - zb).norm());
                    }
                    best = best.min(dist);
                }
                best
            }
        })
        .sum();
    total / sampled.len() as f64
}

#[derive(Clone, Debug)]
pub struct StabilityScan {
    /// Per node, the max Hausdorff distance to the 4 neighbors' clouds.
    pub hausdorff_field: ScalarField,
    /// Per node, one bit per critical point: lies within eps_j of the cloud.
    pub critical_flags: Vec<Vec<bool>>,
    /// Per node, unstable-evidence verdict.
    pub verdict: Vec<bool>,
    pub median_hausdorff: f64,
    pub eps_j_factor: f64,
}

/// Hausdorff continuity scan with critical-point membership flags. Verdict
/// "unstable evidence" where the neighbor distance exceeds 3x the median or
/// a critical-membership bit flips between neighbors. Evidence only, never
/// a proof.
pub fn stability_scan(
    family: &MapFamily,
    grid: GridSpec,
    depth: usize,
    node_budget: u64,
) -> Result<StabilityScan> {
    if family.param_dim() != 1 || family.fiber_dim() != 1 {
        return Err(Error::UnsupportedFamily {
            required: "1-D family with one parameter".into(),
            actual: "other".into(),
        });
    }
    let nodes: Vec<(usize, usize)> = (0..grid.ny)
        .flat_map(|iy| (0..grid.nx).map(move |ix| (ix, iy)))
        .collect();
    let clouds: Vec<Option<AtomCloud>> = nodes
        .par_iter()
        .map(|&(ix, iy)| {
            let s = [grid.node(ix, iy)];
            let base = equilibrium::default_base(family);
            equilibrium::equilibrium_cloud(
                family,
                &s,
                depth,
                &base,
                &CloudOptions {
                    node_budget,
                    ..CloudOptions::default()
                },
            )
            .ok()
        })
        .collect();
    let failed = clouds.iter().filter(|c| c.is_none()).count();
    if failed * 20 > nodes.len() {
        return Err(Error::GridFailures {
            failed,
            total: nodes.len(),
        });
    }
    let eps_j_factor = 2.0;
    let at = |ix: usize, iy: usize| &clouds[iy * grid.nx + ix];
    let per_node: Vec<Option<(f64, Vec<bool>)>> = nodes
        .par_iter()
        .map(|&(ix, iy)| {
            let cloud = at(ix, iy).as_ref()?;
            let mut worst = 0.0f64;
            let neighbors = [
                (ix.wrapping_sub(1), iy),
                (ix + 1, iy),
                (ix, iy.wrapping_sub(1)),
                (ix, iy + 1),
            ];
            for (nx, ny) in neighbors {
                if nx >= grid.nx || ny >= grid.ny {
                    continue;
                }
                if let Some(other) = at(nx, ny).as_ref() {
                    worst = worst.max(hausdorff(cloud, other).ok()?);
                }
            }
            let s = [grid.node(ix, iy)];
            let eps_j = eps_j_factor * mean_atom_spacing(cloud);
            let crits = family.critical_points(&s).ok()?;
            let index = BucketIndex::new(cloud);
            let flags = crits
                .iter()
                .map(|cp| index.min_distance(&[cp.point]) <= eps_j)
                .collect();
            Some((worst, flags))
        })
        .collect();
    let mut field = ScalarField::new(grid);
    let mut critical_flags = vec![Vec::new(); nodes.len()];
    for (i, entry) in per_node.iter().enumerate() {
        match entry {
            Some((h, flags)) => {
                field.values[i] = *h;
                critical_flags[i] = flags.clone();
            }
            None => field.status[i] = NodeStatus::Failed,
        }
    }
    let mut distances: Vec<f64> = field.ok_values().collect();
    distances.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if distances.is_empty() {
        0.0
    } else {
        distances[distances.len() / 2]
    };
    let mut verdict = vec![false; nodes.len()];
    for &(ix, iy) in &nodes {
        let i = iy * grid.nx + ix;
        if field.status[i] != NodeStatus::Ok {
            continue;
        }
        if field.values[i] > 3.0 * median && median > 0.0 {
            verdict[i] = true;
        }
        let neighbors = [
            (ix.wrapping_sub(1), iy),
            (ix + 1, iy),
            (ix, iy.wrapping_sub(1)),
            (ix, iy + 1),
        ];
        for (nx, ny) in neighbors {
            if nx >= grid.nx || ny >= grid.ny {
                continue;
            }
            let j = ny * grid.nx + nx;
            if field.status[j] == NodeStatus::Ok && critical_flags[i] != critical_flags[j] {
                verdict[i] = true;
            }
        }
    }
    Ok(StabilityScan {
        hausdorff_field: field,
        critical_flags,
        verdict,
        median_hausdorff: median,
        eps_j_factor,
    })
}

#[derive(Clone, Debug)]
pub struct HarmonicReport {
    /// Total |five-point Laplacian| mass over the masked interior nodes,
    /// with the dd^c normalization.
    pub laplacian_mass: f64,
    /// Mean |value| over the mask, the comparison scale.
    pub field_scale: f64,
    pub ratio: f64,
    pub masked_nodes: usize,
}

/// Harmonicity check: total absolute discrete-Laplacian mass over a masked
/// region, compared with the field's own magnitude. A ratio below 1e-2
/// supports harmonicity of the field on the region.
pub fn harmonic_check(field: &ScalarField, mask: impl Fn(C64) -> bool) -> HarmonicReport {
    let g = field.grid;
    let mut mass = 0.0;
    let mut scale = 0.0;
    let mut count = 0usize;
    for iy in 1..g.ny - 1 {
        for ix in 1..g.nx - 1 {
            if !mask(g.node(ix, iy)) {
                continue;
            }
            let ok = [(ix, iy), (ix - 1, iy), (ix + 1, iy), (ix, iy - 1), (ix, iy + 1)]
                .iter()
                .all(|&(x, y)| field.status_at(x, y) == NodeStatus::Ok);
            if !ok {
                continue;
            }
            let lap = field.at(ix - 1, iy)
                + field.at(ix + 1, iy)
                + field.at(ix, iy - 1)
                + field.at(ix, iy + 1)
                - 4.0 * field.at(ix, iy);
            mass += lap.abs() * crate::bifurcation::DDC_NORMALIZATION;
            scale += field.at(ix, iy).abs();
            count += 1;
        }
    }
    let field_scale = if count > 0 { scale / count as f64 } else { 0.0 };
    let ratio = if field_scale > 0.0 {
        mass / field_scale
    } else {
        mass
    };
    HarmonicReport {
        laplacian_mass: mass,
        field_scale,
        ratio,
        masked_nodes: count,
    }
}

pub fn write_orbits_csv(orbits: &[PeriodicOrbit], mut out: impl std::io::Write) -> Result<()> {
    writeln!(out, "period,point_re,point_im,multiplier_abs,class,residual")?;
    for orbit in orbits {
        writeln!(
            out,
            "{},{:.17e},{:.17e},{:.17e},{},{:.17e}",
            orbit.period,
            orbit.points[0].re,
            orbit.points[0].im,
            orbit.multiplier.norm(),
            orbit.class.as_str(),
            orbit.residual
        )?;
    }
    Ok(())
}
