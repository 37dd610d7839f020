//! Finitely supported probability measures: weighted point clouds in C^k
//! with provenance metadata and CSV serialization.

use crate::error::{Error, Result};
use crate::C64;
use std::io::Write as _;

#[derive(Clone, Debug, Default)]
pub struct CloudMeta {
    pub depth: usize,
    pub method: String,
    pub base: Vec<C64>,
    pub seed: Option<u64>,
}

/// Weighted atoms in C^k. Points are stored flattened with stride k.
#[derive(Clone, Debug)]
pub struct AtomCloud {
    pub k: usize,
    points: Vec<C64>,
    weights: Vec<f64>,
    pub meta: CloudMeta,
}

impl AtomCloud {
    pub fn new(k: usize, meta: CloudMeta) -> Self {
        AtomCloud {
            k,
            points: Vec::new(),
            weights: Vec::new(),
            meta,
        }
    }

    pub fn with_capacity(k: usize, atoms: usize, meta: CloudMeta) -> Self {
        AtomCloud {
            k,
            points: Vec::with_capacity(atoms * k),
            weights: Vec::with_capacity(atoms),
            meta,
        }
    }

    pub fn push(&mut self, point: &[C64], weight: f64) {
        debug_assert_eq!(point.len(), self.k);
        self.points.extend_from_slice(point);
        self.weights.push(weight);
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn atom(&self, i: usize) -> &[C64] {
        &self.points[i * self.k..(i + 1) * self.k]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[C64], f64)> {
        self.points
            .chunks_exact(self.k)
            .zip(self.weights.iter().copied())
    }

    /// Largest atom max-norm (for horizontality checks).
    pub fn max_norm_radius(&self) -> f64 {
        self.points.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Rescale weights to total mass 1.
    pub fn normalize(&mut self) {
        let total = self.total_mass();
        if total > 0.0 {
            for w in &mut self.weights {
                *w /= total;
            }
        }
    }

    pub fn assert_probability(&self) -> Result<()> {
        let total = self.total_mass();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "cloud mass {total} is not 1 within 1e-12"
            )));
        }
        Ok(())
    }

    /// CSV with header re_1,im_1,...,re_k,im_k,weight.
    pub fn write_csv(&self, mut out: impl std::io::Write) -> Result<()> {
        let mut header = String::new();
        for j in 1..=self.k {
            header.push_str(&format!("re_{j},im_{j},"));
        }
        header.push_str("weight");
        writeln!(out, "{header}")?;
        for (point, w) in self.iter() {
            let mut row = String::new();
            for z in point {
                row.push_str(&format!("{:.17e},{:.17e},", z.re, z.im));
            }
            row.push_str(&format!("{:.17e}", w));
            writeln!(out, "{row}")?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Plain-text key=value sidecar with the metadata.
    pub fn save_sidecar(&self, path: &std::path::Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "k = {}", self.k)?;
        writeln!(out, "atoms = {}", self.len())?;
        writeln!(out, "depth = {}", self.meta.depth)?;
        writeln!(out, "method = {}", self.meta.method)?;
        let base: Vec<String> = self
            .meta
            .base
            .iter()
            .map(|z| format!("{},{}", z.re, z.im))
            .collect();
        writeln!(out, "base = {}", base.join(";"))?;
        match self.meta.seed {
            Some(seed) => writeln!(out, "seed = {seed}")?,
            None => writeln!(out, "seed = none")?,
        }
        Ok(())
    }

    pub fn read_csv(reader: impl std::io::BufRead) -> Result<AtomCloud> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidConfig("empty cloud CSV".into()))??;
        let cols = header.split(',').count();
        if cols < 3 || cols % 2 == 0 {
            return Err(Error::InvalidConfig(format!(
                "bad cloud CSV header `{header}`"
            )));
        }
        let k = (cols - 1) / 2;
        let mut cloud = AtomCloud::new(k, CloudMeta::default());
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::InvalidConfig(format!("bad cloud CSV row `{line}`")))?;
            if vals.len() != cols {
                return Err(Error::InvalidConfig(format!(
                    "cloud CSV row has {} columns, expected {cols}",
                    vals.len()
                )));
            }
            let point: Vec<C64> = (0..k).map(|j| C64::new(vals[2 * j], vals[2 * j + 1])).collect();
            cloud.push(&point, vals[cols - 1]);
        }
        Ok(cloud)
    }
}
