//! Parameterized families of polynomial-like maps on polydiscs: evaluation,
//! closed-form Jacobians, critical points, filled-Julia membership, and the
//! escape-radius certificate. Families load from a plain-text key=value file
//! (grammar documented in the repo README).

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::params::ParamPoly;
use crate::poly::Poly;
use crate::C64;

pub const TOL_CRIT: f64 = 1e-10;
pub const BOUNDARY_NET: usize = 256;

/// Rectangle in one complex parameter axis.
#[derive(Clone, Copy, Debug)]
pub struct ParamRect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl ParamRect {
    pub fn contains(&self, s: C64) -> bool {
        let pad = 1e-12;
        s.re >= self.re_min - pad
            && s.re <= self.re_max + pad
            && s.im >= self.im_min - pad
            && s.im <= self.im_max + pad
    }

    pub fn center(&self) -> C64 {
        C64::new(
            0.5 * (self.re_min + self.re_max),
            0.5 * (self.im_min + self.im_max),
        )
    }

    pub fn corners(&self) -> [C64; 4] {
        [
            C64::new(self.re_min, self.im_min),
            C64::new(self.re_max, self.im_min),
            C64::new(self.re_min, self.im_max),
            C64::new(self.re_max, self.im_max),
        ]
    }
}

/// One coordinate of a Product family. `coeffs` empty means unicritical
/// z^d + s; otherwise monic with the listed lower coefficients a_0..a_{d-1}.
/// `param_index` selects which parameter axis feeds the coefficient variable s.
#[derive(Clone, Debug)]
pub struct Component {
    pub degree: u32,
    pub coeffs: Vec<ParamPoly>,
    pub param_index: usize,
}

#[derive(Clone, Debug)]
pub enum FamilyKind {
    /// f_s(z) = z^d + s.
    Unicritical { degree: u32 },
    /// Monic f_s(z) = z^d + a_{d-1}(s) z^{d-1} + ... + a_0(s).
    General1d { coeffs: Vec<ParamPoly> },
    /// Coordinate-wise action of 1-D families.
    Product { parts: Vec<Component> },
    /// (z1, z2) -> (p_s(z1), q_s(z1, z2)), q monic of degree d2 in z2.
    /// p coefficients must not use z1; q coefficients may.
    Skew { p: Vec<ParamPoly>, q: Vec<ParamPoly> },
}

#[derive(Clone, Debug)]
pub struct MapFamily {
    pub name: String,
    pub kind: FamilyKind,
    pub escape_radius: f64,
    /// One rectangle per parameter axis (m = 1 or 2).
    pub domain: Vec<ParamRect>,
}

/// A critical point of one coordinate map. For k = 1, `component` is 0 and
/// `point` is the critical point itself; for Product kind the entry describes
/// the fiber {z : z_component = point}.
#[derive(Clone, Copy, Debug)]
pub struct CriticalPoint {
    pub component: usize,
    pub point: C64,
    pub multiplicity: usize,
}

impl MapFamily {
    pub fn fiber_dim(&self) -> usize {
        match &self.kind {
            FamilyKind::Unicritical { .. } | FamilyKind::General1d { .. } => 1,
            FamilyKind::Product { parts } => parts.len(),
            FamilyKind::Skew { .. } => 2,
        }
    }

    pub fn param_dim(&self) -> usize {
        self.domain.len()
    }

    /// Topological degree: product of coordinate degrees.
    pub fn degree_t(&self) -> u64 {
        match &self.kind {
            FamilyKind::Unicritical { degree } => *degree as u64,
            FamilyKind::General1d { coeffs } => coeffs.len() as u64,
            FamilyKind::Product { parts } => {
                parts.iter().map(|p| p.degree as u64).product()
            }
            FamilyKind::Skew { p, q } => (p.len() as u64) * (q.len() as u64),
        }
    }

    /// Per-coordinate degrees d_1..d_k.
    pub fn coordinate_degrees(&self) -> Vec<u32> {
        match &self.kind {
            FamilyKind::Unicritical { degree } => vec![*degree],
            FamilyKind::General1d { coeffs } => vec![coeffs.len() as u32],
            FamilyKind::Product { parts } => parts.iter().map(|p| p.degree).collect(),
            FamilyKind::Skew { p, q } => vec![p.len() as u32, q.len() as u32],
        }
    }

    pub fn check_param(&self, s: &[C64]) -> Result<()> {
        if s.len() != self.param_dim() {
            return Err(Error::ParameterOutsideDomain(format!(
                "expected {} parameter value(s), got {}",
                self.param_dim(),
                s.len()
            )));
        }
        for (axis, (&si, rect)) in s.iter().zip(self.domain.iter()).enumerate() {
            if !rect.contains(si) {
                return Err(Error::ParameterOutsideDomain(format!(
                    "parameter s{} = {} outside declared rectangle",
                    axis + 1,
                    si
                )));
            }
        }
        Ok(())
    }

    fn s2(&self, s: &[C64]) -> C64 {
        s.get(1).copied().unwrap_or(C64::new(0.0, 0.0))
    }

    /// Monic fiber polynomial in z for a 1-D family (ascending coefficients).
    pub fn poly_1d(&self, s: &[C64]) -> Option<Poly> {
        match &self.kind {
            FamilyKind::Unicritical { degree } => {
                let d = *degree as usize;
                let mut c = vec![C64::new(0.0, 0.0); d + 1];
                c[0] = s[0];
                c[d] = C64::new(1.0, 0.0);
                Some(Poly::new(c))
            }
            FamilyKind::General1d { coeffs } => {
                let d = coeffs.len();
                let s2 = self.s2(s);
                let mut c = vec![C64::new(0.0, 0.0); d + 1];
                for (i, a) in coeffs.iter().enumerate() {
                    c[i] = a.eval(s[0], s2, C64::new(0.0, 0.0));
                }
                c[d] = C64::new(1.0, 0.0);
                Some(Poly::new(c))
            }
            _ => None,
        }
    }

    /// Monic polynomial of product-component `idx` in its own coordinate.
    pub fn component_poly(&self, s: &[C64], idx: usize) -> Option<Poly> {
        let FamilyKind::Product { parts } = &self.kind else {
            return None;
        };
        let part = &parts[idx];
        let sp = s[part.param_index];
        let d = part.degree as usize;
        let mut c = vec![C64::new(0.0, 0.0); d + 1];
        if part.coeffs.is_empty() {
            c[0] = sp;
        } else {
            for (i, a) in part.coeffs.iter().enumerate() {
                c[i] = a.eval(sp, C64::new(0.0, 0.0), C64::new(0.0, 0.0));
            }
        }
        c[d] = C64::new(1.0, 0.0);
        Some(Poly::new(c))
    }

    /// Monic polynomial in z2 of the skew second coordinate, at given z1.
    pub fn skew_q_poly(&self, s: &[C64], z1: C64) -> Option<Poly> {
        let FamilyKind::Skew { q, .. } = &self.kind else {
            return None;
        };
        let s2 = self.s2(s);
        let d2 = q.len();
        let mut c = vec![C64::new(0.0, 0.0); d2 + 1];
        for (i, b) in q.iter().enumerate() {
            c[i] = b.eval(s[0], s2, z1);
        }
        c[d2] = C64::new(1.0, 0.0);
        Some(Poly::new(c))
    }

    /// Monic polynomial in z1 of the skew first coordinate.
    pub fn skew_p_poly(&self, s: &[C64]) -> Option<Poly> {
        let FamilyKind::Skew { p, .. } = &self.kind else {
            return None;
        };
        let s2 = self.s2(s);
        let d1 = p.len();
        let mut c = vec![C64::new(0.0, 0.0); d1 + 1];
        for (i, a) in p.iter().enumerate() {
            c[i] = a.eval(s[0], s2, C64::new(0.0, 0.0));
        }
        c[d1] = C64::new(1.0, 0.0);
        Some(Poly::new(c))
    }

    pub fn eval(&self, s: &[C64], z: &[C64]) -> Result<Vec<C64>> {
        self.check_param(s)?;
        Ok(self.eval_unchecked(s, z))
    }

    pub fn eval_unchecked(&self, s: &[C64], z: &[C64]) -> Vec<C64> {
        match &self.kind {
            FamilyKind::Unicritical { degree } => {
                vec![z[0].powu(*degree) + s[0]]
            }
            FamilyKind::General1d { .. } => {
                vec![self.poly_1d(s).unwrap().eval(z[0])]
            }
            FamilyKind::Product { parts } => (0..parts.len())
                .map(|i| self.component_poly(s, i).unwrap().eval(z[i]))
                .collect(),
            FamilyKind::Skew { .. } => {
                let w1 = self.skew_p_poly(s).unwrap().eval(z[0]);
                let w2 = self.skew_q_poly(s, z[0]).unwrap().eval(z[1]);
                vec![w1, w2]
            }
        }
    }

    /// Closed-form Jacobian matrix, entry (i, j) = d(f_i)/d(z_j).
    pub fn jacobian(&self, s: &[C64], z: &[C64]) -> Result<CMat> {
        self.check_param(s)?;
        Ok(self.jacobian_unchecked(s, z))
    }

    pub fn jacobian_unchecked(&self, s: &[C64], z: &[C64]) -> CMat {
        let k = self.fiber_dim();
        let mut m = CMat::zeros(k);
        match &self.kind {
            FamilyKind::Unicritical { degree } => {
                let d = *degree;
                m.set(0, 0, C64::new(d as f64, 0.0) * z[0].powu(d - 1));
            }
            FamilyKind::General1d { .. } => {
                let p = self.poly_1d(s).unwrap();
                m.set(0, 0, p.derivative().eval(z[0]));
            }
            FamilyKind::Product { parts } => {
                for i in 0..parts.len() {
                    let p = self.component_poly(s, i).unwrap();
                    m.set(i, i, p.derivative().eval(z[i]));
                }
            }
            FamilyKind::Skew { q, .. } => {
                let s2 = self.s2(s);
                let p = self.skew_p_poly(s).unwrap();
                m.set(0, 0, p.derivative().eval(z[0]));
                let qp = self.skew_q_poly(s, z[0]).unwrap();
                m.set(1, 1, qp.derivative().eval(z[1]));
                // d(q)/d(z1) = sum of coefficient z1-derivatives times z2^i.
                let mut dq_dz1 = C64::new(0.0, 0.0);
                for (i, b) in q.iter().enumerate() {
                    dq_dz1 += b.d_dz1().eval(s[0], s2, z[0]) * z[1].powu(i as u32);
                }
                m.set(1, 0, dq_dz1);
            }
        }
        m
    }

    pub fn det_jacobian(&self, s: &[C64], z: &[C64]) -> C64 {
        match &self.kind {
            FamilyKind::Unicritical { degree } => {
                C64::new(*degree as f64, 0.0) * z[0].powu(*degree - 1)
            }
            FamilyKind::General1d { .. } => {
                self.poly_1d(s).unwrap().derivative().eval(z[0])
            }
            _ => self.jacobian_unchecked(s, z).det(),
        }
    }

    /// Critical points for k = 1 and Product kinds; total multiplicity per
    /// coordinate is d_i - 1. Not available for Skew (see
    /// `skew_critical_samples`).
    pub fn critical_points(&self, s: &[C64]) -> Result<Vec<CriticalPoint>> {
        self.check_param(s)?;
        match &self.kind {
            FamilyKind::Unicritical { .. } | FamilyKind::General1d { .. } => {
                let p = self.poly_1d(s).unwrap();
                Ok(critical_points_of(&p, 0)?)
            }
            FamilyKind::Product { parts } => {
                let mut out = Vec::new();
                for i in 0..parts.len() {
                    let p = self.component_poly(s, i).unwrap();
                    out.extend(critical_points_of(&p, i)?);
                }
                Ok(out)
            }
            FamilyKind::Skew { .. } => Err(Error::UnsupportedFamily {
                required: "1-D or Product".into(),
                actual: "Skew".into(),
            }),
        }
    }

    /// Sampled zero set of det Jac for Skew families: lattice over the
    /// polydisc plus Newton polish on det Jac along each coordinate line.
    pub fn skew_critical_samples(&self, s: &[C64], lattice: usize) -> Result<Vec<Vec<C64>>> {
        self.check_param(s)?;
        let FamilyKind::Skew { q, .. } = &self.kind else {
            return Err(Error::UnsupportedFamily {
                required: "Skew".into(),
                actual: "1-D or Product".into(),
            });
        };
        // det Jac = p'(z1) * dq/dz2(z1, z2): zeros are z1 in Crit(p) (whole
        // lines, sampled in z2) plus per-z1 roots of dq/dz2.
        let mut out = Vec::new();
        let r = self.escape_radius;
        let pd = self.skew_p_poly(s).unwrap().derivative();
        let z2_samples: Vec<C64> = (0..lattice)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * (i as f64) / (lattice as f64);
                C64::from_polar(0.5 * r, t)
            })
            .collect();
        for root in pd.roots(crate::poly::DEFAULT_MAX_ITERS)? {
            for &z2 in &z2_samples {
                out.push(vec![root, z2]);
            }
        }
        // Roots in z2 of dq/dz2 for sampled z1.
        let s2 = self.s2(s);
        for i in 0..lattice {
            let t = 2.0 * std::f64::consts::PI * (i as f64) / (lattice as f64);
            let z1 = C64::from_polar(0.5 * r, t);
            let d2 = q.len();
            let mut c = vec![C64::new(0.0, 0.0); d2 + 1];
            for (j, b) in q.iter().enumerate() {
                c[j] = b.eval(s[0], s2, z1);
            }
            c[d2] = C64::new(1.0, 0.0);
            let dq = Poly::new(c).derivative();
            if dq.degree() == 0 {
                continue;
            }
            for z2 in dq.roots(crate::poly::DEFAULT_MAX_ITERS)? {
                out.push(vec![z1, z2]);
            }
        }
        Ok(out)
    }

    /// True iff the orbit stays in the polydisc of radius R for n_max steps;
    /// otherwise the first escape time.
    pub fn in_filled_julia(
        &self,
        s: &[C64],
        z: &[C64],
        n_max: usize,
    ) -> Result<(bool, Option<usize>)> {
        self.check_param(s)?;
        let r = self.escape_radius;
        let mut w = z.to_vec();
        for n in 1..=n_max {
            w = self.eval_unchecked(s, &w);
            if max_norm(&w) > r {
                return Ok((false, Some(n)));
            }
        }
        Ok((true, None))
    }

    /// Boundary-net escape certificate: on sampled parameters (corners,
    /// center, and edge midpoints of each axis rectangle) and >= 256 boundary
    /// points per face of the polydisc, |f_s(z)| must exceed R in max-norm.
    pub fn certify_escape_radius(&self) -> Result<()> {
        let k = self.fiber_dim();
        let r = self.escape_radius;
        let moduli = [0.0, 0.35, 0.7, 1.0];
        for s in self.param_samples() {
            for face in 0..k {
                for a in 0..BOUNDARY_NET {
                    let theta =
                        2.0 * std::f64::consts::PI * (a as f64) / (BOUNDARY_NET as f64);
                    let zf = C64::from_polar(r, theta);
                    // Off-face coordinates swept over a coarse sub-net.
                    let combos = moduli.len().pow((k - 1) as u32);
                    for combo in 0..combos {
                        let mut z = vec![C64::new(0.0, 0.0); k];
                        z[face] = zf;
                        let mut c = combo;
                        for (j, zj) in z.iter_mut().enumerate() {
                            if j == face {
                                continue;
                            }
                            let rho = moduli[c % moduli.len()] * r;
                            c /= moduli.len();
                            let phi = 2.4 * (j as f64 + 1.0) + theta;
                            *zj = C64::from_polar(rho, phi);
                        }
                        let w = self.eval_unchecked(&s, &z);
                        if max_norm(&w) <= r {
                            return Err(Error::InvalidConfig(format!(
                                "escape certificate failed at s={:?}, boundary point {:?} maps inside the polydisc",
                                s, z
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Deterministic parameter samples covering the declared domain.
    pub fn param_samples(&self) -> Vec<Vec<C64>> {
        let per_axis: Vec<Vec<C64>> = self
            .domain
            .iter()
            .map(|rect| {
                let mut pts = rect.corners().to_vec();
                pts.push(rect.center());
                pts.push(C64::new(rect.re_min, 0.5 * (rect.im_min + rect.im_max)));
                pts.push(C64::new(rect.re_max, 0.5 * (rect.im_min + rect.im_max)));
                pts.push(C64::new(0.5 * (rect.re_min + rect.re_max), rect.im_min));
                pts.push(C64::new(0.5 * (rect.re_min + rect.re_max), rect.im_max));
                pts
            })
            .collect();
        match per_axis.len() {
            1 => per_axis[0].iter().map(|&s| vec![s]).collect(),
            2 => {
                let mut out = Vec::new();
                for &a in &per_axis[0] {
                    for &b in &per_axis[1] {
                        out.push(vec![a, b]);
                    }
                }
                out
            }
            _ => Vec::new(),
        }
    }

    pub fn from_file(path: &std::path::Path) -> Result<MapFamily> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<MapFamily> {
        let mut kv: Vec<(String, String)> = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::FamilyParse(format!("expected key = value, got `{line}`"))
            })?;
            kv.push((key.trim().to_string(), value.trim().to_string()));
        }
        let get = |key: &str| -> Option<&str> {
            kv.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
        };
        let require = |key: &str| -> Result<&str> {
            get(key).ok_or_else(|| Error::FamilyParse(format!("missing key `{key}`")))
        };

        let name = get("name").unwrap_or("unnamed").to_string();
        let kind_name = require("kind")?;
        let escape_radius: f64 = require("escape_radius")?
            .parse()
            .map_err(|_| Error::FamilyParse("bad escape_radius".into()))?;
        let mut domain = vec![parse_rect(require("param_domain")?)?];
        if let Some(r2) = get("param_domain2") {
            domain.push(parse_rect(r2)?);
        }

        let kind = match kind_name {
            "unicritical" => {
                let degree: u32 = require("degree")?
                    .parse()
                    .map_err(|_| Error::FamilyParse("bad degree".into()))?;
                if degree < 2 {
                    return Err(Error::FamilyParse("degree must be >= 2".into()));
                }
                FamilyKind::Unicritical { degree }
            }
            "general1d" => {
                let degree: usize = require("degree")?
                    .parse()
                    .map_err(|_| Error::FamilyParse("bad degree".into()))?;
                if degree < 2 {
                    return Err(Error::FamilyParse("degree must be >= 2".into()));
                }
                let mut coeffs = Vec::with_capacity(degree);
                for i in 0..degree {
                    let key = format!("a{i}");
                    let poly = match get(&key) {
                        Some(v) => ParamPoly::parse(v)?,
                        None => ParamPoly::zero(),
                    };
                    if poly.uses_z1() {
                        return Err(Error::FamilyParse(format!(
                            "coefficient {key} of a 1-D family may not use z1"
                        )));
                    }
                    coeffs.push(poly);
                }
                FamilyKind::General1d { coeffs }
            }
            "product" => {
                let mut parts = Vec::new();
                for i in 1.. {
                    let Some(spec) = get(&format!("component{i}")) else {
                        break;
                    };
                    parts.push(parse_component(spec)?);
                }
                if parts.len() < 2 {
                    return Err(Error::FamilyParse(
                        "product family needs component1, component2, ...".into(),
                    ));
                }
                FamilyKind::Product { parts }
            }
            "skew" => {
                let d1: usize = require("p.degree")?
                    .parse()
                    .map_err(|_| Error::FamilyParse("bad p.degree".into()))?;
                let d2: usize = require("q.degree")?
                    .parse()
                    .map_err(|_| Error::FamilyParse("bad q.degree".into()))?;
                let mut p = Vec::with_capacity(d1);
                for i in 0..d1 {
                    let poly = match get(&format!("p.a{i}")) {
                        Some(v) => ParamPoly::parse(v)?,
                        None => ParamPoly::zero(),
                    };
                    if poly.uses_z1() {
                        return Err(Error::FamilyParse(
                            "p coefficients may not use z1".into(),
                        ));
                    }
                    p.push(poly);
                }
                let mut q = Vec::with_capacity(d2);
                for i in 0..d2 {
                    q.push(match get(&format!("q.a{i}")) {
                        Some(v) => ParamPoly::parse(v)?,
                        None => ParamPoly::zero(),
                    });
                }
                FamilyKind::Skew { p, q }
            }
            other => {
                return Err(Error::FamilyParse(format!("unknown kind `{other}`")));
            }
        };

        let family = MapFamily {
            name,
            kind,
            escape_radius,
            domain,
        };
        if family.degree_t() < 2 {
            return Err(Error::FamilyParse("topological degree must be >= 2".into()));
        }
        let max_param = match &family.kind {
            FamilyKind::Product { parts } => {
                parts.iter().map(|p| p.param_index).max().unwrap_or(0)
            }
            FamilyKind::General1d { coeffs } => {
                if coeffs.iter().any(|c| c.uses_s2()) { 1 } else { 0 }
            }
            FamilyKind::Skew { p, q } => {
                if p.iter().chain(q.iter()).any(|c| c.uses_s2()) { 1 } else { 0 }
            }
            FamilyKind::Unicritical { .. } => 0,
        };
        if max_param >= family.param_dim() {
            return Err(Error::FamilyParse(format!(
                "family uses parameter s{} but declares only {} param_domain rectangle(s)",
                max_param + 1,
                family.param_dim()
            )));
        }
        Ok(family)
    }
}

fn critical_points_of(p: &Poly, component: usize) -> Result<Vec<CriticalPoint>> {
    let dp = p.derivative();
    let roots = dp.roots(crate::poly::DEFAULT_MAX_ITERS)?;
    // Group the already-clustered repeated roots into multiplicity counts.
    let mut out: Vec<CriticalPoint> = Vec::new();
    for r in roots {
        match out.last_mut() {
            Some(last) if (last.point - r).norm() < 1e-8 => last.multiplicity += 1,
            _ => out.push(CriticalPoint {
                component,
                point: r,
                multiplicity: 1,
            }),
        }
    }
    Ok(out)
}

pub fn max_norm(z: &[C64]) -> f64 {
    z.iter().map(|w| w.norm()).fold(0.0, f64::max)
}

fn parse_rect(text: &str) -> Result<ParamRect> {
    let vals: Vec<f64> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::FamilyParse(format!("bad rectangle `{text}`")))?;
    if vals.len() != 4 || vals[0] > vals[1] || vals[2] > vals[3] {
        return Err(Error::FamilyParse(format!(
            "rectangle must be re_min,re_max,im_min,im_max with min <= max: `{text}`"
        )));
    }
    Ok(ParamRect {
        re_min: vals[0],
        re_max: vals[1],
        im_min: vals[2],
        im_max: vals[3],
    })
}

/// Component grammar: `kind=unicritical; degree=2; param=s1` or
/// `kind=general1d; degree=3; param=s2; a0=s,-3; a1=0`.
fn parse_component(spec: &str) -> Result<Component> {
    let mut kind = None;
    let mut degree = None;
    let mut param_index = 0usize;
    let mut coeff_kv: Vec<(usize, String)> = Vec::new();
    for field in spec.split(';') {
        let field = field.trim();
        if field.is_empty() {
            continue;
        }
        let (key, value) = field.split_once('=').ok_or_else(|| {
            Error::FamilyParse(format!("component field `{field}` must be key=value"))
        })?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "kind" => kind = Some(value.to_string()),
            "degree" => {
                degree = Some(value.parse::<u32>().map_err(|_| {
                    Error::FamilyParse(format!("bad component degree `{value}`"))
                })?)
            }
            "param" => {
                param_index = match value {
                    "s" | "s1" => 0,
                    "s2" => 1,
                    other => {
                        return Err(Error::FamilyParse(format!(
                            "component param must be s1 or s2, got `{other}`"
                        )))
                    }
                }
            }
            k if k.starts_with('a') => {
                let idx: usize = k[1..].parse().map_err(|_| {
                    Error::FamilyParse(format!("bad coefficient key `{k}`"))
                })?;
                coeff_kv.push((idx, value.to_string()));
            }
            other => {
                return Err(Error::FamilyParse(format!(
                    "unknown component key `{other}`"
                )))
            }
        }
    }
    let degree =
        degree.ok_or_else(|| Error::FamilyParse("component missing degree".into()))?;
    if degree < 1 {
        return Err(Error::FamilyParse("component degree must be >= 1".into()));
    }
    let kind = kind.ok_or_else(|| Error::FamilyParse("component missing kind".into()))?;
    let coeffs = match kind.as_str() {
        "unicritical" => Vec::new(),
        "general1d" => {
            let mut coeffs = vec![ParamPoly::zero(); degree as usize];
            for (idx, text) in coeff_kv {
                if idx >= coeffs.len() {
                    return Err(Error::FamilyParse(format!(
                        "coefficient index a{idx} out of range for degree {degree}"
                    )));
                }
                let poly = ParamPoly::parse(&text)?;
                if poly.uses_z1() || poly.uses_s2() {
                    return Err(Error::FamilyParse(
                        "component coefficients may only use the variable s".into(),
                    ));
                }
                coeffs[idx] = poly;
            }
            coeffs
        }
        other => {
            return Err(Error::FamilyParse(format!(
                "component kind must be unicritical or general1d, got `{other}`"
            )))
        }
    };
    Ok(Component {
        degree,
        coeffs,
        param_index,
    })
}
