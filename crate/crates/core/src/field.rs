//! Rectangular parameter-lattice fields (sampled functions of one complex
//! parameter), discrete dd^c cell-mass fields, and their CSV/PGM output.

use crate::error::{Error, Result};
use crate::C64;
use std::io::Write as _;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeStatus {
    Ok,
    Escaped,
    Failed,
}

impl NodeStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            NodeStatus::Ok => "ok",
            NodeStatus::Escaped => "escaped",
            NodeStatus::Failed => "failed",
        }
    }
}

/// Uniform rectangular grid over one complex parameter.
#[derive(Clone, Copy, Debug)]
pub struct GridSpec {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    /// Parse "re_min,re_max,im_min,im_max,n" (square) or with ",ny" appended.
    pub fn parse(text: &str) -> Result<GridSpec> {
        let vals: Vec<f64> = text
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidConfig(format!("bad grid spec `{text}`")))?;
        if vals.len() != 5 && vals.len() != 6 {
            return Err(Error::InvalidConfig(
                "grid spec needs re_min,re_max,im_min,im_max,n[,ny]".into(),
            ));
        }
        let nx = vals[4] as usize;
        let ny = if vals.len() == 6 { vals[5] as usize } else { nx };
        if nx < 3 || ny < 3 || vals[0] >= vals[1] || vals[2] >= vals[3] {
            return Err(Error::InvalidConfig(format!("degenerate grid `{text}`")));
        }
        Ok(GridSpec {
            re_min: vals[0],
            re_max: vals[1],
            im_min: vals[2],
            im_max: vals[3],
            nx,
            ny,
        })
    }

    pub fn hx(&self) -> f64 {
        (self.re_max - self.re_min) / ((self.nx - 1) as f64)
    }

    pub fn hy(&self) -> f64 {
        (self.im_max - self.im_min) / ((self.ny - 1) as f64)
    }

    pub fn node(&self, ix: usize, iy: usize) -> C64 {
        C64::new(
            self.re_min + self.hx() * (ix as f64),
            self.im_min + self.hy() * (iy as f64),
        )
    }
}

/// Values of a scalar function on the grid; storage is row-major in iy.
#[derive(Clone, Debug)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub status: Vec<NodeStatus>,
}

impl ScalarField {
    pub fn new(grid: GridSpec) -> Self {
        let n = grid.nx * grid.ny;
        ScalarField {
            grid,
            values: vec![0.0; n],
            status: vec![NodeStatus::Ok; n],
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(C64) -> f64) -> Self {
        let mut field = ScalarField::new(grid);
        for iy in 0..grid.ny {
            for ix in 0..grid.nx {
                let i = field.idx(ix, iy);
                field.values[i] = f(grid.node(ix, iy));
            }
        }
        field
    }

    #[inline]
    pub fn idx(&self, ix: usize, iy: usize) -> usize {
        iy * self.grid.nx + ix
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[self.idx(ix, iy)]
    }

    pub fn status_at(&self, ix: usize, iy: usize) -> NodeStatus {
        self.status[self.idx(ix, iy)]
    }

    pub fn ok_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values
            .iter()
            .zip(self.status.iter())
            .filter(|(_, s)| **s == NodeStatus::Ok)
            .map(|(v, _)| *v)
    }

    pub fn write_csv(&self, mut out: impl std::io::Write) -> Result<()> {
        writeln!(out, "s_re,s_im,value,status")?;
        for iy in 0..self.grid.ny {
            for ix in 0..self.grid.nx {
                let s = self.grid.node(ix, iy);
                writeln!(
                    out,
                    "{:.17e},{:.17e},{:.17e},{}",
                    s.re,
                    s.im,
                    self.at(ix, iy),
                    self.status_at(ix, iy).as_str()
                )?;
            }
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn save_pgm(&self, path: &std::path::Path) -> Result<()> {
        save_pgm(
            path,
            self.grid.nx,
            self.grid.ny,
            &self.values,
            Some(&self.status),
        )
    }
}

/// Nonnegative cell masses from the discrete dd^c. Cells sit at interior
/// nodes of the parent grid. `masses` are clipped at 0; `signed` keeps the
/// raw value, and the clipped negative total is `clipped_residual`.
#[derive(Clone, Debug)]
pub struct CurrentField {
    pub grid: GridSpec,
    /// Interior extent: (nx - 2) x (ny - 2).
    pub cnx: usize,
    pub cny: usize,
    pub masses: Vec<f64>,
    pub signed: Vec<f64>,
    pub excluded: Vec<bool>,
    pub clipped_residual: f64,
    pub normalization: f64,
}

impl CurrentField {
    #[inline]
    pub fn idx(&self, ix: usize, iy: usize) -> usize {
        iy * self.cnx + ix
    }

    /// Parent-grid node under the cell (ix, iy).
    pub fn cell_center(&self, ix: usize, iy: usize) -> C64 {
        self.grid.node(ix + 1, iy + 1)
    }

    pub fn clipped_total(&self) -> f64 {
        self.masses
            .iter()
            .zip(self.excluded.iter())
            .filter(|(_, e)| !**e)
            .map(|(m, _)| *m)
            .sum()
    }

    /// Signed total: clipped mass plus the (negative) clipping residual.
    pub fn total_mass(&self) -> f64 {
        self.clipped_total() + self.clipped_residual
    }

    /// Clipping residual above 5% of the clipped mass marks the field as
    /// unreliable (Monte Carlo noise dominating the Laplacian).
    pub fn reliable(&self) -> bool {
        self.clipped_residual.abs() <= 0.05 * self.clipped_total().max(1e-300)
    }

    pub fn max_mass(&self) -> f64 {
        self.masses
            .iter()
            .zip(self.excluded.iter())
            .filter(|(_, e)| !**e)
            .map(|(m, _)| *m)
            .fold(0.0, f64::max)
    }

    pub fn write_csv(&self, mut out: impl std::io::Write) -> Result<()> {
        writeln!(out, "cell_center_re,cell_center_im,mass")?;
        for iy in 0..self.cny {
            for ix in 0..self.cnx {
                if self.excluded[self.idx(ix, iy)] {
                    continue;
                }
                let z = self.cell_center(ix, iy);
                writeln!(
                    out,
                    "{:.17e},{:.17e},{:.17e}",
                    z.re,
                    z.im,
                    self.masses[self.idx(ix, iy)]
                )?;
            }
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn save_pgm(&self, path: &std::path::Path) -> Result<()> {
        save_pgm(path, self.cnx, self.cny, &self.masses, None)
    }
}

/// 16-bit P5 grayscale render, linear value map; min/max recorded in a
/// key=value sidecar next to the image. Non-ok nodes render as 0.
pub fn save_pgm(
    path: &std::path::Path,
    nx: usize,
    ny: usize,
    values: &[f64],
    status: Option<&[NodeStatus]>,
) -> Result<()> {
    let ok = |i: usize| status.map_or(true, |s| s[i] == NodeStatus::Ok);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (i, &v) in values.iter().enumerate() {
        if ok(i) && v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    let span = if hi > lo { hi - lo } else { 1.0 };
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    write!(out, "P5\n{nx} {ny}\n65535\n")?;
    // Image rows top-to-bottom = decreasing iy.
    for iy in (0..ny).rev() {
        for ix in 0..nx {
            let i = iy * nx + ix;
            let gray = if ok(i) && values[i].is_finite() {
                (((values[i] - lo) / span) * 65535.0).round().clamp(0.0, 65535.0) as u16
            } else {
                0
            };
            out.write_all(&gray.to_be_bytes())?;
        }
    }
    drop(out);
    let sidecar = path.with_extension("pgm.txt");
    let mut side = std::io::BufWriter::new(std::fs::File::create(sidecar)?);
    writeln!(side, "min = {lo:.17e}")?;
    writeln!(side, "max = {hi:.17e}")?;
    writeln!(side, "nx = {nx}")?;
    writeln!(side, "ny = {ny}")?;
    Ok(())
}

/// Sampled function on a product of two parameter rectangles (m = 2), used
/// only by the experimental Monge-Ampere density.
#[derive(Clone, Debug)]
pub struct FieldM2 {
    pub grid1: GridSpec,
    pub grid2: GridSpec,
    /// Index order: ((iy2 * nx2 + ix2) * ny1 + iy1) * nx1 + ix1.
    pub values: Vec<f64>,
}

impl FieldM2 {
    pub fn from_fn(grid1: GridSpec, grid2: GridSpec, f: impl Fn(C64, C64) -> f64) -> Self {
        let n = grid1.nx * grid1.ny * grid2.nx * grid2.ny;
        let mut values = vec![0.0; n];
        for iy2 in 0..grid2.ny {
            for ix2 in 0..grid2.nx {
                for iy1 in 0..grid1.ny {
                    for ix1 in 0..grid1.nx {
                        let i = ((iy2 * grid2.nx + ix2) * grid1.ny + iy1) * grid1.nx + ix1;
                        values[i] = f(grid1.node(ix1, iy1), grid2.node(ix2, iy2));
                    }
                }
            }
        }
        FieldM2 {
            grid1,
            grid2,
            values,
        }
    }

    #[inline]
    pub fn idx(&self, ix1: usize, iy1: usize, ix2: usize, iy2: usize) -> usize {
        ((iy2 * self.grid2.nx + ix2) * self.grid1.ny + iy1) * self.grid1.nx + ix1
    }

    pub fn at(&self, ix1: usize, iy1: usize, ix2: usize, iy2: usize) -> f64 {
        self.values[self.idx(ix1, iy1, ix2, iy2)]
    }
}
