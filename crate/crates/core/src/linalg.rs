//! Small dense complex matrices and the modified Gram-Schmidt step used by
//! the derivative-cocycle accumulation. Fiber dimensions here are tiny
//! (k <= 4 in practice), so everything is plain row-major `Vec` storage.

use crate::C64;

/// Row-major k x k complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    pub n: usize,
    pub data: Vec<C64>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        CMat {
            n,
            data: vec![C64::new(0.0, 0.0); n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            assert_eq!(r.len(), n);
            data.extend_from_slice(r);
        }
        CMat { n, data }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.n + j] = v;
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        let n = self.n;
        let mut out = vec![C64::new(0.0, 0.0); n];
        for i in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..n {
                acc += self.at(i, j) * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn matmul(&self, other: &CMat) -> CMat {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for l in 0..n {
                    acc += self.at(i, l) * other.at(l, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    pub fn det(&self) -> C64 {
        // LU with partial pivoting; n is tiny.
        let n = self.n;
        let mut a = self.data.clone();
        let mut det = C64::new(1.0, 0.0);
        for col in 0..n {
            let mut piv = col;
            let mut best = a[col * n + col].norm();
            for r in (col + 1)..n {
                let m = a[r * n + col].norm();
                if m > best {
                    best = m;
                    piv = r;
                }
            }
            if best == 0.0 {
                return C64::new(0.0, 0.0);
            }
            if piv != col {
                for j in 0..n {
                    a.swap(col * n + j, piv * n + j);
                }
                det = -det;
            }
            let d = a[col * n + col];
            det *= d;
            for r in (col + 1)..n {
                let f = a[r * n + col] / d;
                for j in col..n {
                    let v = a[col * n + j];
                    a[r * n + j] -= f * v;
                }
            }
        }
        det
    }

    pub fn max_abs_diff(&self, other: &CMat) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

#[inline]
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    // Hermitian inner product, conjugate-linear in the first slot.
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[inline]
pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Orthonormalize `vectors` in place by modified Gram-Schmidt and return the
/// sum of the logs of the diagonal scale factors (the log-volume of the
/// parallelotope they spanned). Returns `None` when a vector collapses to
/// numerical zero, which happens exactly when the frame hit a critical
/// direction.
pub fn mgs_orthonormalize(vectors: &mut [Vec<C64>]) -> Option<f64> {
    let mut log_vol = 0.0;
    for i in 0..vectors.len() {
        for j in 0..i {
            let proj = dot(&vectors[j], &vectors[i]);
            let vj = vectors[j].clone();
            for (x, y) in vectors[i].iter_mut().zip(&vj) {
                *x -= proj * y;
            }
        }
        let r = norm(&vectors[i]);
        if r < 1e-300 {
            return None;
        }
        log_vol += r.ln();
        let inv = 1.0 / r;
        for x in vectors[i].iter_mut() {
            *x *= inv;
        }
    }
    Some(log_vol)
}

/// Max deviation of the frame from orthonormality.
pub fn orthonormality_defect(vectors: &[Vec<C64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..vectors.len() {
        for j in 0..=i {
            let d = dot(&vectors[i], &vectors[j]);
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((d - C64::new(target, 0.0)).norm());
        }
    }
    worst
}
