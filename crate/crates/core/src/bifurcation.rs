//! Parameter-plane scans of L_p, the discrete dd^c producing the bifurcation
//! current at grid resolution, support extraction, the critical-to-Julia gap
//! scan, and sub-mean-value (p.s.h.) smoke tests.

use crate::equilibrium::{self, CloudOptions};
use crate::error::{Error, Result};
use crate::family::MapFamily;
use crate::field::{CurrentField, FieldM2, GridSpec, NodeStatus, ScalarField};
use crate::lyapunov;
use crate::C64;
use rayon::prelude::*;

/// dd^c normalization fixed by the unit-atom test: the distributional
/// Laplacian of log|s| has mass 2 pi, so cell mass = (five-point Laplacian
/// of the sampled field) / (2 pi). The h^2 factors cancel.
pub const DDC_NORMALIZATION: f64 = 1.0 / (2.0 * std::f64::consts::PI);
pub const EPS_SUBMEAN: f64 = 5e-3;
pub const DEFAULT_SUPPORT_TAU: f64 = 1e-3;
/// Cells whose mass is below this absolute floor never enter a support set,
/// regardless of the relative threshold (guards the max-relative rule when
/// the whole field is numerically zero).
pub const SUPPORT_MASS_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug)]
pub struct ScanConfig {
    pub p: usize,
    pub depth: usize,
    pub node_budget: u64,
    /// Base offset for the depth-matched pair when p < k.
    pub pair_base_depth: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            p: 0, // 0 means p = k
            depth: 10,
            node_budget: crate::preimage::DEFAULT_NODE_BUDGET,
            pair_base_depth: 8,
        }
    }
}

/// Sample L_p on the grid. p = k uses the one-step Jacobian integral; p < k
/// uses the depth-matched cocycle pair (its deeper value). Failed nodes are
/// marked, never interpolated; more than 5% failures is an error.
pub fn scan(family: &MapFamily, grid: GridSpec, config: &ScanConfig) -> Result<ScalarField> {
    if family.param_dim() != 1 {
        return Err(Error::UnsupportedFamily {
            required: "parameter dimension 1".into(),
            actual: format!("parameter dimension {}", family.param_dim()),
        });
    }
    let k = family.fiber_dim();
    let p = if config.p == 0 { k } else { config.p };
    let nodes: Vec<(usize, usize)> = (0..grid.ny)
        .flat_map(|iy| (0..grid.nx).map(move |ix| (ix, iy)))
        .collect();
    let results: Vec<std::result::Result<f64, ()>> = nodes
        .par_iter()
        .map(|&(ix, iy)| {
            let s = [grid.node(ix, iy)];
            let value = if p == k {
                let base = equilibrium::default_base(family);
                let options = CloudOptions {
                    node_budget: config.node_budget,
                    ..CloudOptions::default()
                };
                equilibrium::equilibrium_cloud(family, &s, config.depth, &base, &options)
                    .and_then(|cloud| lyapunov::sum_via_jacobian(family, &s, &cloud))
            } else {
                lyapunov::partial_sums_spatial(
                    family,
                    &s,
                    p,
                    config.pair_base_depth,
                    config.depth.div_euclid(2).max(1),
                    config.node_budget,
                )
                .map(|pair| pair.phi_2n)
            };
            value.map_err(|_| ())
        })
        .collect();
    let mut field = ScalarField::new(grid);
    let mut failed = 0usize;
    for (&(ix, iy), result) in nodes.iter().zip(results.iter()) {
        let i = field.idx(ix, iy);
        match result {
            Ok(v) => field.values[i] = *v,
            Err(()) => {
                field.status[i] = NodeStatus::Failed;
                failed += 1;
            }
        }
    }
    if failed * 20 > nodes.len() {
        return Err(Error::GridFailures {
            failed,
            total: nodes.len(),
        });
    }
    Ok(field)
}

/// Discrete dd^c of a sampled field: per interior cell, the five-point
/// Laplacian normalized so dd^c log|s| carries unit mass. Negative cells are
/// clipped with the residual recorded; cells touching failed nodes are
/// excluded from mass totals.
pub fn ddc(field: &ScalarField) -> CurrentField {
    let g = field.grid;
    let cnx = g.nx - 2;
    let cny = g.ny - 2;
    let mut masses = vec![0.0; cnx * cny];
    let mut signed = vec![0.0; cnx * cny];
    let mut excluded = vec![false; cnx * cny];
    let mut residual = 0.0;
    for cy in 0..cny {
        for cx in 0..cnx {
            let (ix, iy) = (cx + 1, cy + 1);
            let stencil_ok = [
                (ix, iy),
                (ix - 1, iy),
                (ix + 1, iy),
                (ix, iy - 1),
                (ix, iy + 1),
            ]
            .iter()
            .all(|&(x, y)| field.status_at(x, y) == NodeStatus::Ok);
            let ci = cy * cnx + cx;
            if !stencil_ok {
                excluded[ci] = true;
                continue;
            }
            let lap = field.at(ix - 1, iy)
                + field.at(ix + 1, iy)
                + field.at(ix, iy - 1)
                + field.at(ix, iy + 1)
                - 4.0 * field.at(ix, iy);
            let mass = DDC_NORMALIZATION * lap;
            signed[ci] = mass;
            if mass >= 0.0 {
                masses[ci] = mass;
            } else {
                residual += mass;
            }
        }
    }
    CurrentField {
        grid: g,
        cnx,
        cny,
        masses,
        signed,
        excluded,
        clipped_residual: residual,
        normalization: DDC_NORMALIZATION,
    }
}

#[derive(Clone, Debug)]
pub struct SupportSet {
    pub cells: Vec<(usize, usize)>,
    pub components: usize,
    pub tau: f64,
    pub threshold: f64,
}

/// Cells with mass above tau times the max cell mass (and above the absolute
/// floor), with a 4-neighbor connected-component count.
pub fn support(current: &CurrentField, tau: f64) -> Result<SupportSet> {
    if !(0.0..1.0).contains(&tau) || tau == 0.0 {
        return Err(Error::InvalidConfig("tau must be in (0, 1)".into()));
    }
    let threshold = f64::max(tau * current.max_mass(), SUPPORT_MASS_FLOOR);
    let mut cells = Vec::new();
    for iy in 0..current.cny {
        for ix in 0..current.cnx {
            let i = current.idx(ix, iy);
            if !current.excluded[i] && current.masses[i] > threshold {
                cells.push((ix, iy));
            }
        }
    }
    let components = count_components(&cells);
    Ok(SupportSet {
        cells,
        components,
        tau,
        threshold,
    })
}

fn count_components(cells: &[(usize, usize)]) -> usize {
    use std::collections::{HashSet, VecDeque};
    let set: HashSet<(usize, usize)> = cells.iter().copied().collect();
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let mut components = 0;
    for &start in cells {
        if seen.contains(&start) {
            continue;
        }
        components += 1;
        let mut queue = VecDeque::from([start]);
        seen.insert(start);
        while let Some((x, y)) = queue.pop_front() {
            let neighbors = [
                (x.wrapping_sub(1), y),
                (x + 1, y),
                (x, y.wrapping_sub(1)),
                (x, y + 1),
            ];
            for n in neighbors {
                if set.contains(&n) && seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
    }
    components
}

/// Experimental discrete Monge-Ampere density for m = 2: determinant of the
/// mixed complex Hessian of the sampled field, clipped at 0. Validated only
/// on synthetic smooth inputs; every output is labeled experimental.
pub fn hessian_det(field: &FieldM2) -> Result<(Vec<f64>, f64)> {
    let g1 = field.grid1;
    let g2 = field.grid2;
    let (h1x, h1y, h2x, h2y) = (g1.hx(), g1.hy(), g2.hx(), g2.hy());
    let mut out = Vec::new();
    let mut residual = 0.0;
    let norm = DDC_NORMALIZATION * DDC_NORMALIZATION * 4.0;
    for iy2 in 1..g2.ny - 1 {
        for ix2 in 1..g2.nx - 1 {
            for iy1 in 1..g1.ny - 1 {
                for ix1 in 1..g1.nx - 1 {
                    let u = |dx1: i64, dy1: i64, dx2: i64, dy2: i64| {
                        field.at(
                            (ix1 as i64 + dx1) as usize,
                            (iy1 as i64 + dy1) as usize,
                            (ix2 as i64 + dx2) as usize,
                            (iy2 as i64 + dy2) as usize,
                        )
                    };
                    // 4 d^2u/ds1 ds1bar = Laplacian in s1 (h^2-scaled).
                    let h11 = (u(1, 0, 0, 0) + u(-1, 0, 0, 0) - 2.0 * u(0, 0, 0, 0))
                        / (h1x * h1x)
                        + (u(0, 1, 0, 0) + u(0, -1, 0, 0) - 2.0 * u(0, 0, 0, 0))
                            / (h1y * h1y);
                    let h22 = (u(0, 0, 1, 0) + u(0, 0, -1, 0) - 2.0 * u(0, 0, 0, 0))
                        / (h2x * h2x)
                        + (u(0, 0, 0, 1) + u(0, 0, 0, -1) - 2.0 * u(0, 0, 0, 0))
                            / (h2y * h2y);
                    // Mixed central differences for 4 d^2u/ds1 ds2bar.
                    let dxx = (u(1, 0, 1, 0) - u(1, 0, -1, 0) - u(-1, 0, 1, 0)
                        + u(-1, 0, -1, 0))
                        / (4.0 * h1x * h2x);
                    let dyy = (u(0, 1, 0, 1) - u(0, 1, 0, -1) - u(0, -1, 0, 1)
                        + u(0, -1, 0, -1))
                        / (4.0 * h1y * h2y);
                    let dxy = (u(1, 0, 0, 1) - u(1, 0, 0, -1) - u(-1, 0, 0, 1)
                        + u(-1, 0, 0, -1))
                        / (4.0 * h1x * h2y);
                    let dyx = (u(0, 1, 1, 0) - u(0, 1, -1, 0) - u(0, -1, 1, 0)
                        + u(0, -1, -1, 0))
                        / (4.0 * h1y * h2x);
                    let h12 = C64::new(dxx + dyy, dxy - dyx);
                    // Hermitian 2x2 determinant (all entries carry the same
                    // factor 4 relative to d^2/ds ds-bar, absorbed in norm).
                    let det = h11 * h22 - h12.norm_sqr();
                    let mass = norm * det * h1x * h1y * h2x * h2y;
                    if mass >= 0.0 {
                        out.push(mass);
                    } else {
                        out.push(0.0);
                        residual += mass;
                    }
                }
            }
        }
    }
    Ok((out, residual))
}

/// Per node, the minimum distance from any critical point of f_s to the
/// atoms of the node's equilibrium cloud (proxy for d(C_s, J_s)).
pub fn critical_gap_scan(
    family: &MapFamily,
    grid: GridSpec,
    depth: usize,
    node_budget: u64,
) -> Result<ScalarField> {
    if family.param_dim() != 1 || family.fiber_dim() != 1 {
        return Err(Error::UnsupportedFamily {
            required: "1-D family with one parameter".into(),
            actual: "other".into(),
        });
    }
    let nodes: Vec<(usize, usize)> = (0..grid.ny)
        .flat_map(|iy| (0..grid.nx).map(move |ix| (ix, iy)))
        .collect();
    let results: Vec<std::result::Result<f64, ()>> = nodes
        .par_iter()
        .map(|&(ix, iy)| {
            let s = [grid.node(ix, iy)];
            let gap = (|| -> Result<f64> {
                let crits = family.critical_points(&s)?;
                let base = equilibrium::default_base(family);
                let cloud = equilibrium::equilibrium_cloud(
                    family,
                    &s,
                    depth,
                    &base,
                    &CloudOptions {
                        node_budget,
                        ..CloudOptions::default()
                    },
                )?;
                let mut gap = f64::INFINITY;
                for (atom, _) in cloud.iter() {
                    for cp in &crits {
                        gap = gap.min((atom[0] - cp.point).norm());
                    }
                }
                Ok(gap)
            })();
            gap.map_err(|_| ())
        })
        .collect();
    let mut field = ScalarField::new(grid);
    let mut failed = 0;
    for (&(ix, iy), result) in nodes.iter().zip(results.iter()) {
        let i = field.idx(ix, iy);
        match result {
            Ok(v) => field.values[i] = *v,
            Err(()) => {
                field.status[i] = NodeStatus::Failed;
                failed += 1;
            }
        }
    }
    if failed * 20 > nodes.len() {
        return Err(Error::GridFailures {
            failed,
            total: nodes.len(),
        });
    }
    Ok(field)
}

#[derive(Clone, Debug)]
pub struct SubmeanViolation {
    pub ix: usize,
    pub iy: usize,
    pub residual: f64,
}

/// Discrete sub-mean-value smoke test: interior nodes whose value exceeds
/// the 8-neighbor ring average by more than eps.
pub fn submean_check(field: &ScalarField, eps: f64) -> Vec<SubmeanViolation> {
    let g = field.grid;
    let mut out = Vec::new();
    for iy in 1..g.ny - 1 {
        for ix in 1..g.nx - 1 {
            let mut ring = 0.0;
            let mut ok = true;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (x, y) = ((ix as i64 + dx) as usize, (iy as i64 + dy) as usize);
                    if field.status_at(x, y) != NodeStatus::Ok {
                        ok = false;
                    }
                    if dx != 0 || dy != 0 {
                        ring += field.at(x, y);
                    }
                }
            }
            if !ok {
                continue;
            }
            let residual = field.at(ix, iy) - ring / 8.0;
            if residual > eps {
                out.push(SubmeanViolation { ix, iy, residual });
            }
        }
    }
    out
}
