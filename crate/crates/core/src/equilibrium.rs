//! Equilibrium-measure estimation by inverse iteration, integration of
//! observables, the normalized push-forward operator, and its convergence
//! diagnostics.

use crate::cloud::{AtomCloud, CloudMeta};
use crate::error::{Error, Result};
use crate::family::MapFamily;
use crate::preimage::{self, DEFAULT_NODE_BUDGET};
use crate::C64;
use rayon::prelude::*;

pub const EPS_EXCEPTIONAL: f64 = 1e-6;
pub const N_POSTCRITICAL: usize = 50;
/// Hard error when more than this weight fraction of a cloud sits at
/// observable value -infinity.
pub const MAX_NEG_INF_WEIGHT: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CloudMethod {
    Tree,
    Walk { walkers: usize },
}

#[derive(Clone, Copy, Debug)]
pub struct CloudOptions {
    pub method: CloudMethod,
    /// Cesaro window width in depths; 0 disables averaging.
    pub cesaro_window: usize,
    pub node_budget: u64,
    pub seed: u64,
}

impl Default for CloudOptions {
    fn default() -> Self {
        CloudOptions {
            method: CloudMethod::Tree,
            cesaro_window: 0,
            node_budget: DEFAULT_NODE_BUDGET,
            seed: 0,
        }
    }
}

/// Default base point for inverse iteration: modulus R in every coordinate
/// with generic phases. A zero coordinate would sit on the exceptional fiber
/// of a unicritical product component (0 is totally invariant for w^d), so
/// phases are fixed irrational-looking constants (still checked by the guard).
pub fn default_base(family: &MapFamily) -> Vec<C64> {
    let r = family.escape_radius;
    (0..family.fiber_dim())
        .map(|j| C64::from_polar(r, 0.41 + 0.73 * (j as f64)))
        .collect()
}

/// Fail iff z0 lies within eps of the first N_POSTCRITICAL forward images of
/// any critical point (the computable surrogate of the exceptional set).
pub fn exceptional_guard(family: &MapFamily, s: &[C64], z0: &[C64]) -> Result<()> {
    family.check_param(s)?;
    let starts: Vec<Vec<C64>> = match family.critical_points(s) {
        Ok(cps) => cps
            .iter()
            .map(|cp| {
                // Product critical sets are fibers {z_i = c}; testing the
                // point with the matching coordinate and z0 elsewhere tests
                // exactly whether z0 lies on that fiber's forward images.
                let mut z = z0.to_vec();
                z[cp.component] = cp.point;
                z
            })
            .collect(),
        Err(_) => family.skew_critical_samples(s, 16)?,
    };
    let r = family.escape_radius;
    for start in starts {
        let mut w = start.clone();
        // The critical point itself is postcritical territory too.
        for step in 0..=N_POSTCRITICAL {
            let dist = w
                .iter()
                .zip(z0.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            if dist < EPS_EXCEPTIONAL {
                return Err(Error::ExceptionalBase(format!(
                    "base point within {EPS_EXCEPTIONAL} of postcritical image {step} of critical start {:?}",
                    start
                )));
            }
            if crate::family::max_norm(&w) > 4.0 * r {
                break;
            }
            w = family.eval_unchecked(s, &w);
        }
    }
    Ok(())
}

/// Inverse-iteration estimate of the equilibrium measure at parameter s.
pub fn equilibrium_cloud(
    family: &MapFamily,
    s: &[C64],
    depth: usize,
    base: &[C64],
    options: &CloudOptions,
) -> Result<AtomCloud> {
    exceptional_guard(family, s, base)?;
    let build = |n: usize| -> Result<AtomCloud> {
        match options.method {
            CloudMethod::Tree => {
                preimage::pullback_tree(family, s, base, n, options.node_budget)
            }
            CloudMethod::Walk { walkers } => {
                preimage::inverse_walk(family, s, base, n, walkers, options.seed)
            }
        }
    };
    if options.cesaro_window <= 1 {
        return build(depth);
    }
    let w = options.cesaro_window.min(depth);
    let meta = CloudMeta {
        depth,
        method: "cesaro".into(),
        base: base.to_vec(),
        seed: match options.method {
            CloudMethod::Walk { .. } => Some(options.seed),
            CloudMethod::Tree => None,
        },
    };
    let mut merged = AtomCloud::new(family.fiber_dim(), meta);
    for n in (depth + 1 - w)..=depth {
        let cloud = build(n)?;
        let scale = 1.0 / (w as f64);
        for (point, weight) in cloud.iter() {
            merged.push(point, weight * scale);
        }
    }
    Ok(merged)
}

#[derive(Clone, Copy, Debug)]
pub struct Integrated {
    pub value: f64,
    /// Weight excluded because the observable returned -infinity.
    pub excluded_weight: f64,
    pub excluded_atoms: usize,
}

/// Integrate an observable against a cloud. Atoms where the observable is
/// -infinity are excluded with renormalization; more than 0.1% excluded
/// weight is an error (the observable is not integrable at this resolution).
pub fn integrate<F>(cloud: &AtomCloud, obs: F) -> Result<Integrated>
where
    F: Fn(&[C64]) -> f64,
{
    let mut acc = 0.0;
    let mut kept = 0.0;
    let mut excluded_weight = 0.0;
    let mut excluded_atoms = 0;
    for (point, w) in cloud.iter() {
        let v = obs(point);
        if v == f64::NEG_INFINITY {
            excluded_weight += w;
            excluded_atoms += 1;
        } else {
            acc += w * v;
            kept += w;
        }
    }
    if excluded_weight > MAX_NEG_INF_WEIGHT * cloud.total_mass() {
        return Err(Error::NotIntegrable {
            bad_weight: excluded_weight,
        });
    }
    let value = if kept > 0.0 { acc / kept } else { 0.0 };
    Ok(Integrated {
        value,
        excluded_weight,
        excluded_atoms,
    })
}

/// Complex-valued integration (no -infinity policy needed).
pub fn integrate_complex<F>(cloud: &AtomCloud, obs: F) -> C64
where
    F: Fn(&[C64]) -> C64,
{
    let mut acc = C64::new(0.0, 0.0);
    for (point, w) in cloud.iter() {
        acc += obs(point) * w;
    }
    acc
}

/// The n-th normalized push-forward (L_s^n phi)(z) =
/// d_t^{-n} sum over f_s^n(w) = z of phi(w), counted with multiplicity.
pub fn pushforward<F>(
    family: &MapFamily,
    s: &[C64],
    obs: &F,
    n: usize,
    z: &[C64],
    node_budget: u64,
) -> Result<f64>
where
    F: Fn(&[C64]) -> f64 + Sync,
{
    let levels = preimage::level_integrals(family, s, z, n, node_budget, obs)?;
    Ok(*levels.last().unwrap())
}

#[derive(Clone, Debug)]
pub struct WSpec {
    /// Real-axis sample count per coordinate plane (points_per_axis^2 complex
    /// samples per fiber coordinate).
    pub points_per_axis: usize,
    /// W is the polydisc of radius radius_factor * R ...
    pub radius_factor: f64,
    /// ... intersected with points that do not escape within this horizon.
    pub horizon: usize,
}

impl Default for WSpec {
    fn default() -> Self {
        WSpec {
            points_per_axis: 64,
            radius_factor: 0.9,
            horizon: 5,
        }
    }
}

/// Build the W lattice: a grid in each complex coordinate, filtered to the
/// polydisc of radius factor*R and to non-escape within the horizon.
pub fn w_lattice(family: &MapFamily, s: &[C64], spec: &WSpec) -> Result<Vec<Vec<C64>>> {
    family.check_param(s)?;
    let k = family.fiber_dim();
    let r = spec.radius_factor * family.escape_radius;
    let n = spec.points_per_axis;
    let axis: Vec<f64> = (0..n)
        .map(|i| -r + 2.0 * r * (i as f64) / ((n - 1) as f64))
        .collect();
    let mut coords: Vec<C64> = Vec::new();
    for &x in &axis {
        for &y in &axis {
            let z = C64::new(x, y);
            if z.norm() <= r {
                coords.push(z);
            }
        }
    }
    let mut lattice: Vec<Vec<C64>> = vec![Vec::new()];
    for _ in 0..k {
        let mut next = Vec::with_capacity(lattice.len() * coords.len());
        for prefix in &lattice {
            for &z in &coords {
                let mut p = prefix.clone();
                p.push(z);
                next.push(p);
            }
        }
        lattice = next;
    }
    let lattice: Vec<Vec<C64>> = lattice
        .into_par_iter()
        .filter(|z| {
            matches!(
                family.in_filled_julia(s, z, spec.horizon),
                Ok((true, None))
            )
        })
        .collect();
    if lattice.is_empty() {
        return Err(Error::EmptyLattice);
    }
    Ok(lattice)
}

/// Max of the n-th push-forward of the observable over the W lattice, with
/// the argmax point (ties broken by lattice order).
pub fn operator_sup<F>(
    family: &MapFamily,
    s: &[C64],
    obs: &F,
    n: usize,
    spec: &WSpec,
    node_budget: u64,
) -> Result<(f64, Vec<C64>)>
where
    F: Fn(&[C64]) -> f64 + Sync,
{
    let lattice = w_lattice(family, s, spec)?;
    let values: Result<Vec<f64>> = lattice
        .par_iter()
        .map(|z| pushforward(family, s, obs, n, z, node_budget))
        .collect();
    let values = values?;
    let mut best = 0usize;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    Ok((values[best], lattice[best].clone()))
}

#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub observable: String,
    pub sups: Vec<f64>,
    /// g_n = sup_W L^n phi - mu(phi), indexed from n = 1.
    pub gaps: Vec<f64>,
    pub reference: f64,
    /// Least-squares geometric rate fitted on positive gaps; None when the
    /// fit is unusable (constant observable, non-geometric decay).
    pub rate: Option<f64>,
    pub fit_residual: f64,
    pub monotone: bool,
}

pub fn convergence_report<F>(
    family: &MapFamily,
    s: &[C64],
    obs: &F,
    observable: &str,
    n_max: usize,
    spec: &WSpec,
    reference_depth: usize,
    node_budget: u64,
) -> Result<ConvergenceReport>
where
    F: Fn(&[C64]) -> f64 + Sync,
{
    let base = default_base(family);
    let reference = if preimage::tree_size(
        family.degree_t(),
        reference_depth,
        node_budget,
    )
    .is_ok()
    {
        let cloud = equilibrium_cloud(family, s, reference_depth, &base, &CloudOptions {
            node_budget,
            ..CloudOptions::default()
        })?;
        integrate(&cloud, obs)?.value
    } else {
        let cloud = preimage::inverse_walk(family, s, &base, reference_depth, 100_000, 1)?;
        integrate(&cloud, obs)?.value
    };
    let mut sups = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let (sup, _) = operator_sup(family, s, obs, n, spec, node_budget)?;
        sups.push(sup);
    }
    let gaps: Vec<f64> = sups.iter().map(|v| v - reference).collect();
    let monotone = gaps.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    // Fit log g_n = a + n log c0 over strictly positive gaps.
    let pts: Vec<(f64, f64)> = gaps
        .iter()
        .enumerate()
        .filter(|(_, &g)| g > 0.0)
        .map(|(i, &g)| ((i + 1) as f64, g.ln()))
        .collect();
    let (rate, fit_residual) = if pts.len() >= 3 {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let intercept = (sy - slope * sx) / n;
        let resid = pts
            .iter()
            .map(|p| (p.1 - intercept - slope * p.0).powi(2))
            .sum::<f64>()
            .sqrt()
            / n.sqrt();
        let c0 = slope.exp();
        if c0 > 0.0 && c0 < 1.0 {
            (Some(c0), resid)
        } else {
            (None, resid)
        }
    } else {
        (None, f64::NAN)
    };
    Ok(ConvergenceReport {
        observable: observable.to_string(),
        sups,
        gaps,
        reference,
        rate,
        fit_residual,
        monotone,
    })
}

/// Weak invariance residuals of an equilibrium cloud:
/// r1 tests forward invariance, r2 tests the normalized pull-back.
pub fn invariance_residual<F>(
    family: &MapFamily,
    s: &[C64],
    cloud: &AtomCloud,
    obs: &F,
) -> Result<(f64, f64)>
where
    F: Fn(&[C64]) -> f64 + Sync,
{
    let base = integrate(cloud, obs)?.value;
    let forward = integrate(cloud, |z| obs(&family.eval_unchecked(s, z)))?.value;
    let d_t = family.degree_t() as f64;
    let pulled = integrate(cloud, |z| {
        match preimage::fiber(family, s, z) {
            Ok(f) => f.points.iter().map(|w| obs(w)).sum::<f64>() / d_t,
            Err(_) => f64::NEG_INFINITY,
        }
    })?
    .value;
    Ok(((forward - base).abs(), (pulled - base).abs()))
}

/// Logarithmic potential of a 1-D cloud at w.
pub fn potential_1d(cloud: &AtomCloud, w: C64) -> Result<f64> {
    if cloud.k != 1 {
        return Err(Error::UnsupportedFamily {
            required: "fiber dimension 1".into(),
            actual: format!("fiber dimension {}", cloud.k),
        });
    }
    integrate(cloud, |z| {
        let d = (w - z[0]).norm();
        if d == 0.0 {
            f64::NEG_INFINITY
        } else {
            d.ln()
        }
    })
    .map(|r| r.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn quadratic() -> MapFamily {
        MapFamily::parse(
            "kind = unicritical\ndegree = 2\nescape_radius = 7\nparam_domain = -3.5,3.5,-3.5,3.5\n",
        )
        .unwrap()
    }

    fn unit_circle_cloud(n: usize) -> AtomCloud {
        let mut cloud = AtomCloud::new(1, CloudMeta::default());
        for j in 0..n {
            let t = 2.0 * std::f64::consts::PI * (j as f64) / (n as f64);
            cloud.push(&[C64::from_polar(1.0, t)], 1.0 / (n as f64));
        }
        cloud
    }

    #[test]
    fn guard_rejects_critical_fixed_point() {
        let f = quadratic();
        assert!(exceptional_guard(&f, &[c(0.0, 0.0)], &[c(0.0, 0.0)]).is_err());
        exceptional_guard(&f, &[c(0.0, 0.0)], &[c(2.0, 0.0)]).unwrap();
    }

    #[test]
    fn guard_rejects_postcritical_beta_point() {
        // z^2 - 2: critical orbit 0 -> -2 -> 2 -> 2; base 2 is postcritical.
        let f = quadratic();
        assert!(exceptional_guard(&f, &[c(-2.0, 0.0)], &[c(2.0, 0.0)]).is_err());
    }

    #[test]
    fn circle_cloud_from_tree() {
        let f = quadratic();
        let cloud = equilibrium_cloud(
            &f,
            &[c(0.0, 0.0)],
            12,
            &[c(2.0, 0.0)],
            &CloudOptions::default(),
        )
        .unwrap();
        assert_eq!(cloud.len(), 4096);
        cloud.assert_probability().unwrap();
        let expect = 2.0f64.powf(1.0 / 4096.0);
        for (p, _) in cloud.iter() {
            assert!((p[0].norm() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn chebyshev_cloud_on_interval() {
        // z^2 - 2: J = [-2, 2].
        let f = quadratic();
        let cloud = equilibrium_cloud(
            &f,
            &[c(-2.0, 0.0)],
            14,
            &[c(1.0, 1.0)],
            &CloudOptions::default(),
        )
        .unwrap();
        for (p, _) in cloud.iter() {
            assert!(p[0].re >= -2.0 - 1e-6 && p[0].re <= 2.0 + 1e-6);
            assert!(p[0].im.abs() <= 1e-3);
        }
    }

    #[test]
    fn integrate_circle_observables() {
        let cloud = unit_circle_cloud(8);
        let logs = integrate(&cloud, |z| z[0].norm().ln()).unwrap();
        assert!(logs.value.abs() < 1e-14);
        let sq = integrate(&cloud, |z| z[0].norm_sqr()).unwrap();
        assert!((sq.value - 1.0).abs() < 1e-14);
    }

    #[test]
    fn integrate_log_twice_z_depth12() {
        let f = quadratic();
        let cloud = equilibrium_cloud(
            &f,
            &[c(0.0, 0.0)],
            12,
            &[c(2.0, 0.0)],
            &CloudOptions::default(),
        )
        .unwrap();
        let v = integrate(&cloud, |z| (2.0 * z[0].norm()).ln()).unwrap();
        assert!((v.value - 2.0f64.ln()).abs() < 1e-3);
    }

    #[test]
    fn neg_inf_policy() {
        let mut cloud = unit_circle_cloud(4);
        cloud.push(&[c(0.0, 0.0)], 0.0000005);
        let r = integrate(&cloud, |z| {
            if z[0].norm() == 0.0 {
                f64::NEG_INFINITY
            } else {
                1.0
            }
        })
        .unwrap();
        assert_eq!(r.excluded_atoms, 1);
        assert!((r.value - 1.0).abs() < 1e-12);

        let mut heavy = unit_circle_cloud(4);
        heavy.push(&[c(0.0, 0.0)], 0.5);
        assert!(integrate(&heavy, |z| {
            if z[0].norm() == 0.0 {
                f64::NEG_INFINITY
            } else {
                1.0
            }
        })
        .is_err());
    }

    #[test]
    fn pushforward_closed_forms() {
        let f = quadratic();
        let s = [c(0.0, 0.0)];
        let obs = |z: &[C64]| z[0].norm_sqr();
        // L phi(z) = |z| for phi = |z|^2.
        let v = pushforward(&f, &s, &obs, 1, &[c(2.5, 1.0)], 1 << 10).unwrap();
        assert!((v - c(2.5, 1.0).norm()).abs() < 1e-10);
        // L^3 phi(1) = 1.
        let v = pushforward(&f, &s, &obs, 3, &[c(1.0, 0.0)], 1 << 10).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
        // L^5 log|z| = 2^-5 log|z|.
        let z = c(1.7, 0.3);
        let lg = |w: &[C64]| w[0].norm().ln();
        let v = pushforward(&f, &s, &lg, 5, &[z], 1 << 10).unwrap();
        assert!((v - z.norm().ln() / 32.0).abs() < 1e-10);
    }

    #[test]
    fn pushforward_linear() {
        let f = quadratic();
        let s = [c(-0.4, 0.3)];
        let z = [c(1.2, -0.7)];
        let a = pushforward(&f, &s, &|w: &[C64]| w[0].norm_sqr(), 3, &z, 1 << 10).unwrap();
        let b = pushforward(&f, &s, &|w: &[C64]| w[0].re, 3, &z, 1 << 10).unwrap();
        let combo = pushforward(
            &f,
            &s,
            &|w: &[C64]| 2.0 * w[0].norm_sqr() - 3.0 * w[0].re,
            3,
            &z,
            1 << 10,
        )
        .unwrap();
        assert!((combo - (2.0 * a - 3.0 * b)).abs() < 1e-12);
    }

    #[test]
    fn operator_sup_closed_form() {
        let f = quadratic();
        let s = [c(0.0, 0.0)];
        let obs = |z: &[C64]| z[0].norm_sqr();
        // Lattice confined to |z| <= 1.5 via radius_factor; horizon 0 keeps
        // every lattice point. sup L^1 phi = max |z| = close to 1.5.
        let spec = WSpec {
            points_per_axis: 41,
            radius_factor: 1.5 / 7.0,
            horizon: 1,
        };
        let (v, _) = operator_sup(&f, &s, &obs, 1, &spec, 1 << 10).unwrap();
        assert!(v <= 1.5 + 1e-9 && v > 1.45);
        let (v4, _) = operator_sup(&f, &s, &obs, 4, &spec, 1 << 10).unwrap();
        assert!((v4.powf(8.0) - v.powf(1.0)).abs() < 0.05);
    }

    #[test]
    fn constant_observable_fixed() {
        let f = quadratic();
        let s = [c(0.1, 0.1)];
        let obs = |_: &[C64]| 2.5;
        let spec = WSpec {
            points_per_axis: 9,
            radius_factor: 0.2,
            horizon: 3,
        };
        for n in 1..4 {
            let (v, _) = operator_sup(&f, &s, &obs, n, &spec, 1 << 10).unwrap();
            assert!((v - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn invariance_residuals_small() {
        let f = quadratic();
        let s = [c(0.0, 0.0)];
        let cloud =
            equilibrium_cloud(&f, &s, 12, &[c(2.0, 0.0)], &CloudOptions::default()).unwrap();
        let (r1, r2) =
            invariance_residual(&f, &s, &cloud, &|z: &[C64]| z[0].norm_sqr()).unwrap();
        assert!(r1 <= 2e-3, "r1 = {r1}");
        assert!(r2 <= 2e-3, "r2 = {r2}");
    }

    #[test]
    fn invariance_exact_for_symmetric_cloud() {
        let f = quadratic();
        let s = [c(0.0, 0.0)];
        let cloud = unit_circle_cloud(16);
        let (r1, _) = invariance_residual(&f, &s, &cloud, &|z: &[C64]| 2.0 * z[0].re).unwrap();
        assert!(r1 < 1e-14);
    }

    #[test]
    fn potential_values() {
        let cloud = unit_circle_cloud(64);
        assert!(potential_1d(&cloud, c(0.0, 0.0)).unwrap().abs() < 1e-12);
        let v = potential_1d(&cloud, c(2.0, 0.0)).unwrap();
        assert!((v - 2.0f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn chebyshev_potential_joukowski() {
        // Green potential of [-2, 2] at 3 is log((3 + sqrt 5)/2); oracle by
        // the arcsine-density quadrature below.
        let f = quadratic();
        let cloud = equilibrium_cloud(
            &f,
            &[c(-2.0, 0.0)],
            16,
            &[c(1.0, 1.0)],
            &CloudOptions::default(),
        )
        .unwrap();
        let v = potential_1d(&cloud, c(3.0, 0.0)).unwrap();
        let exact = ((3.0 + 5.0f64.sqrt()) / 2.0).ln();
        // Independent quadrature oracle: x = 2 cos t, density dt/pi.
        let m = 20000;
        let mut quad = 0.0;
        for j in 0..m {
            let t = std::f64::consts::PI * (j as f64 + 0.5) / (m as f64);
            quad += (3.0 - 2.0 * t.cos()).abs().ln() / (m as f64);
        }
        assert!((quad - exact).abs() < 1e-6);
        assert!((v - exact).abs() < 1e-3, "v = {v}, exact = {exact}");
    }

    #[test]
    fn cesaro_window_mass() {
        let f = quadratic();
        let options = CloudOptions {
            cesaro_window: 4,
            ..CloudOptions::default()
        };
        let cloud =
            equilibrium_cloud(&f, &[c(0.2, 0.1)], 8, &[c(2.0, 0.0)], &options).unwrap();
        cloud.assert_probability().unwrap();
        // 2^5 + 2^6 + 2^7 + 2^8 atoms
        assert_eq!(cloud.len(), 32 + 64 + 128 + 256);
    }
}
