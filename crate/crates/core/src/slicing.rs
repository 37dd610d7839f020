//! Discretized horizontal currents over the parameter-times-fiber space,
//! stored as one slice cloud per lattice node, with the slice quadrature
//! identity, p.s.h. slice fields, and equilibrium-current diagnostics.

use crate::cloud::AtomCloud;
use crate::equilibrium::{self, CloudOptions};
use crate::error::{Error, Result};
use crate::family::MapFamily;
use crate::field::{GridSpec, NodeStatus, ScalarField};
use crate::preimage;
use crate::C64;
use rayon::prelude::*;

pub const EPS_LOG: f64 = 1e-6;
pub const TOL_MASS: f64 = 1e-12;

/// The fixed test-function library on the fiber: constants, pluriharmonic
/// parts, |z|^2, a log-singular p.s.h. function, and shifted squares.
pub fn test_functions() -> Vec<(&'static str, Box<dyn Fn(&[C64]) -> f64 + Sync + Send>)> {
    let shifts = [
        C64::new(0.5, 0.0),
        C64::new(-0.3, 0.4),
        C64::new(0.1, -0.7),
    ];
    let mut out: Vec<(&'static str, Box<dyn Fn(&[C64]) -> f64 + Sync + Send>)> = vec![
        ("one", Box::new(|_: &[C64]| 1.0)),
        ("re_z", Box::new(|z: &[C64]| z[0].re)),
        ("im_z", Box::new(|z: &[C64]| z[0].im)),
        ("abs2", Box::new(|z: &[C64]| z.iter().map(|w| w.norm_sqr()).sum())),
        (
            "log_eps_abs2",
            Box::new(|z: &[C64]| {
                (EPS_LOG + z.iter().map(|w| w.norm_sqr()).sum::<f64>()).ln()
            }),
        ),
    ];
    for (name, a) in [
        ("shift_a", shifts[0]),
        ("shift_b", shifts[1]),
        ("shift_c", shifts[2]),
    ] {
        out.push((name, Box::new(move |z: &[C64]| (z[0] - a).norm_sqr())));
    }
    out
}

/// Observable set used by the equilibrium-current diagnostics.
fn check_observables() -> Vec<(&'static str, Box<dyn Fn(&[C64]) -> f64 + Sync + Send>)> {
    vec![
        ("abs2", Box::new(|z: &[C64]| z.iter().map(|w| w.norm_sqr()).sum())),
        ("re_z", Box::new(|z: &[C64]| z[0].re)),
        ("im_z", Box::new(|z: &[C64]| z[0].im)),
        (
            "log_eps_abs2",
            Box::new(|z: &[C64]| {
                (EPS_LOG + z.iter().map(|w| w.norm_sqr()).sum::<f64>()).ln()
            }),
        ),
    ]
}

/// A horizontal current discretized as one fiber slice per lattice node:
/// the depth-n pullback of a fixed base measure under f_s^n.
#[derive(Clone, Debug)]
pub struct HorizontalCurrentSamples {
    pub grid: GridSpec,
    pub depth: usize,
    pub base: Vec<Vec<C64>>,
    /// Row-major in iy, `None` at failed nodes.
    pub slices: Vec<Option<AtomCloud>>,
}

impl HorizontalCurrentSamples {
    pub fn slice(&self, ix: usize, iy: usize) -> Option<&AtomCloud> {
        self.slices[iy * self.grid.nx + ix].as_ref()
    }

    /// Every slice must carry the same total mass; returns it.
    pub fn constant_mass(&self) -> Result<f64> {
        let mut mass = None;
        for cloud in self.slices.iter().flatten() {
            let m = cloud.total_mass();
            match mass {
                None => mass = Some(m),
                Some(m0) if (m - m0).abs() > TOL_MASS => {
                    return Err(Error::InvalidConfig(format!(
                        "slice masses differ: {m0} vs {m}"
                    )));
                }
                Some(_) => {}
            }
        }
        mass.ok_or(Error::EmptyLattice)
    }

    /// Max atom max-norm over every slice (horizontality witness).
    pub fn support_radius(&self) -> f64 {
        self.slices
            .iter()
            .flatten()
            .map(|c| c.max_norm_radius())
            .fold(0.0, f64::max)
    }

    pub fn save_archive(&self, dir: &std::path::Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        use std::io::Write as _;
        let mut manifest = std::io::BufWriter::new(std::fs::File::create(dir.join("manifest.txt"))?);
        let g = self.grid;
        writeln!(
            manifest,
            "grid = {},{},{},{},{},{}",
            g.re_min, g.re_max, g.im_min, g.im_max, g.nx, g.ny
        )?;
        writeln!(manifest, "depth = {}", self.depth)?;
        writeln!(manifest, "base_atoms = {}", self.base.len())?;
        for (i, atom) in self.base.iter().enumerate() {
            let txt: Vec<String> = atom.iter().map(|z| format!("({},{})", z.re, z.im)).collect();
            writeln!(manifest, "base_{i} = {}", txt.join(" "))?;
        }
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                if let Some(cloud) = self.slice(ix, iy) {
                    cloud.save_csv(&dir.join(format!("slice_{ix}_{iy}.csv")))?;
                }
            }
        }
        Ok(())
    }
}

/// Per-node depth-n pullback of the base measure (a point or a finite net
/// of points in the fiber, equal weights).
pub fn build_current(
    family: &MapFamily,
    grid: GridSpec,
    base: &[Vec<C64>],
    depth: usize,
    node_budget: u64,
) -> Result<HorizontalCurrentSamples> {
    if base.is_empty() {
        return Err(Error::InvalidConfig("base measure needs at least one atom".into()));
    }
    if family.param_dim() != 1 {
        return Err(Error::UnsupportedFamily {
            required: "parameter dimension 1".into(),
            actual: format!("parameter dimension {}", family.param_dim()),
        });
    }
    for atom in base {
        if atom.len() != family.fiber_dim() {
            return Err(Error::InvalidConfig("base atom dimension mismatch".into()));
        }
        if atom.iter().any(|z| z.norm() > family.escape_radius) {
            return Err(Error::InvalidConfig("base atom outside the fiber domain".into()));
        }
    }
    let nodes: Vec<(usize, usize)> = (0..grid.ny)
        .flat_map(|iy| (0..grid.nx).map(move |ix| (ix, iy)))
        .collect();
    let base_weight = 1.0 / base.len() as f64;
    let slices: Vec<Option<AtomCloud>> = nodes
        .par_iter()
        .map(|&(ix, iy)| {
            let s = [grid.node(ix, iy)];
            let mut merged: Option<AtomCloud> = None;
            for atom in base {
                let tree = preimage::pullback_tree(family, &s, atom, depth, node_budget).ok()?;
                match merged.as_mut() {
                    None => {
                        let mut cloud = AtomCloud::new(family.fiber_dim(), tree.meta.clone());
                        for (z, w) in tree.iter() {
                            cloud.push(z, w * base_weight);
                        }
                        merged = Some(cloud);
                    }
                    Some(cloud) => {
                        for (z, w) in tree.iter() {
                            cloud.push(z, w * base_weight);
                        }
                    }
                }
            }
            merged
        })
        .collect();
    let failed = slices.iter().filter(|s| s.is_none()).count();
    if failed * 20 > nodes.len() {
        return Err(Error::GridFailures {
            failed,
            total: nodes.len(),
        });
    }
    Ok(HorizontalCurrentSamples {
        grid,
        depth,
        base: base.to_vec(),
        slices,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct SliceFormula {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// Sum of absolute terms of the double sum; the scale against which
    /// the residual is meaningful when lhs itself cancels to near zero.
    pub scale: f64,
}

/// The slice quadrature identity: integrating slice values against a
/// weight over the lattice equals the flat double sum over (node, atom)
/// pairs. The two sides are the same sum reassociated; the residual bounds
/// the bookkeeping error.
pub fn slice_formula_check(
    current: &HorizontalCurrentSamples,
    psi: impl Fn(C64, &[C64]) -> f64 + Sync,
    omega: impl Fn(C64) -> f64 + Sync,
) -> SliceFormula {
    let g = current.grid;
    let quad = g.hx() * g.hy();
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    let mut scale = 0.0;
    for iy in 0..g.ny {
        for ix in 0..g.nx {
            let Some(cloud) = current.slice(ix, iy) else {
                continue;
            };
            let s = g.node(ix, iy);
            let w_s = omega(s) * quad;
            if w_s == 0.0 {
                continue;
            }
            let slice_value: f64 = cloud.iter().map(|(z, w)| w * psi(s, z)).sum();
            lhs += w_s * slice_value;
            for (z, w) in cloud.iter() {
                let term = w_s * w * psi(s, z);
                rhs += term;
                scale += term.abs();
            }
        }
    }
    SliceFormula {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        scale,
    }
}

/// phi(s) = slice_s(psi), with the sub-mean-value violations of the
/// resulting parameter field.
pub fn slice_psh_field(
    current: &HorizontalCurrentSamples,
    psi: impl Fn(C64, &[C64]) -> f64 + Sync,
) -> (ScalarField, Vec<crate::bifurcation::SubmeanViolation>) {
    let g = current.grid;
    let mut field = ScalarField::new(g);
    for iy in 0..g.ny {
        for ix in 0..g.nx {
            let i = iy * g.nx + ix;
            match current.slice(ix, iy) {
                Some(cloud) => {
                    let s = g.node(ix, iy);
                    field.values[i] = cloud.iter().map(|(z, w)| w * psi(s, z)).sum();
                }
                None => field.status[i] = NodeStatus::Failed,
            }
        }
    }
    let violations = crate::bifurcation::submean_check(&field, crate::bifurcation::EPS_SUBMEAN);
    (field, violations)
}

#[derive(Clone, Debug)]
pub struct CurrentCheckNode {
    pub s: C64,
    /// Per depth, the max observable gap to the independent cloud.
    pub gaps: Vec<f64>,
    pub decreasing: bool,
}

#[derive(Clone, Debug)]
pub struct CurrentCheckReport {
    pub depths: Vec<usize>,
    pub nodes: Vec<CurrentCheckNode>,
    pub worst_final_gap: f64,
}

/// Per node, the distance between depth-n slices and an independently
/// based equilibrium cloud, measured as the max gap over the fixed
/// observable set; the gaps should shrink as the depth grows.
pub fn equilibrium_current_check(
    family: &MapFamily,
    grid: GridSpec,
    depths: &[usize],
    node_budget: u64,
) -> Result<CurrentCheckReport> {
    if depths.windows(2).any(|w| w[0] >= w[1]) || depths.is_empty() {
        return Err(Error::InvalidConfig("depths must be strictly increasing".into()));
    }
    let observables = check_observables();
    let reference_depth = depths.last().unwrap() + 2;
    let base = equilibrium::default_base(family);
    let nodes: Vec<(usize, usize)> = (0..grid.ny)
        .flat_map(|iy| (0..grid.nx).map(move |ix| (ix, iy)))
        .collect();
    let results: Vec<Option<CurrentCheckNode>> = nodes
        .par_iter()
        .map(|&(ix, iy)| {
            let s_arr = [grid.node(ix, iy)];
            let reference = equilibrium::equilibrium_cloud(
                family,
                &s_arr,
                reference_depth,
                &base,
                &CloudOptions {
                    node_budget,
                    ..CloudOptions::default()
                },
            )
            .ok()?;
            let ref_values: Vec<f64> = observables
                .iter()
                .map(|(_, f)| reference.iter().map(|(z, w)| w * f(z)).sum())
                .collect();
            // Slice base deliberately differs from the reference base.
            let slice_base: Vec<C64> = base
                .iter()
                .map(|z| z * C64::new(0.0, 1.0) * 0.8)
                .collect();
            let mut gaps = Vec::with_capacity(depths.len());
            for &n in depths {
                let slice =
                    preimage::pullback_tree(family, &s_arr, &slice_base, n, node_budget).ok()?;
                let gap = observables
                    .iter()
                    .zip(ref_values.iter())
                    .map(|((_, f), r)| {
                        let v: f64 = slice.iter().map(|(z, w)| w * f(z)).sum();
                        (v - r).abs()
                    })
                    .fold(0.0, f64::max);
                gaps.push(gap);
            }
            let decreasing = gaps.windows(2).all(|w| w[1] <= w[0] + 1e-3);
            Some(CurrentCheckNode {
                s: s_arr[0],
                gaps,
                decreasing,
            })
        })
        .collect();
    let mut out = Vec::new();
    let mut failed = 0;
    for node in results {
        match node {
            Some(n) => out.push(n),
            None => failed += 1,
        }
    }
    if failed * 20 > nodes.len() {
        return Err(Error::GridFailures {
            failed,
            total: nodes.len(),
        });
    }
    let worst_final_gap = out
        .iter()
        .filter_map(|n| n.gaps.last().copied())
        .fold(0.0, f64::max);
    Ok(CurrentCheckReport {
        depths: depths.to_vec(),
        nodes: out,
        worst_final_gap,
    })
}
