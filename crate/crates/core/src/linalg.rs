//! Small linear-algebra kernels: implicit Neumann diffusion solves and a
//! banded LU factorization for Newton systems.

use std::f64::consts::PI;

use crate::grid::{axis_eigenvalue, Grid};

/// Solves `(I − τ Δ_h) x = b` on a Neumann grid.
///
/// 1D grids use a Thomas sweep. 2D grids diagonalize each axis with its
/// orthonormal cosine basis, so a solve is two dense transforms per axis and
/// a pointwise division by `1 + τ(ν_x + ν_y)`.
#[derive(Clone, Debug)]
pub struct ImplicitDiffusion {
    grid: Grid,
    // per axis: orthonormal DCT-II matrix (row m = mode) and eigenvalues
    bases: Vec<(Vec<f64>, Vec<f64>)>,
    scratch: Vec<f64>,
    scratch2: Vec<f64>,
}

impl ImplicitDiffusion {
    pub fn new(grid: &Grid) -> Self {
        let bases = if grid.dim() == 1 {
            Vec::new()
        } else {
            grid.cells()
                .iter()
                .zip(grid.spacing())
                .map(|(&m, &h)| {
                    let mut q = vec![0.0; m * m];
                    for mode in 0..m {
                        let c = if mode == 0 {
                            (1.0 / m as f64).sqrt()
                        } else {
                            (2.0 / m as f64).sqrt()
                        };
                        for j in 0..m {
                            q[mode * m + j] =
                                c * (mode as f64 * PI * (j as f64 + 0.5) / m as f64).cos();
                        }
                    }
                    let eig = (0..m).map(|mode| axis_eigenvalue(mode, m, h)).collect();
                    (q, eig)
                })
                .collect()
        };
        Self {
            grid: grid.clone(),
            bases,
            scratch: vec![0.0; grid.len()],
            scratch2: vec![0.0; grid.len()],
        }
    }

    /// Overwrites `x` (holding `b` on entry) with the solution. `τ = 0` is the identity.
    pub fn solve(&mut self, tau: f64, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.grid.len());
        if tau == 0.0 {
            return;
        }
        if self.grid.dim() == 1 {
            let h = self.grid.spacing()[0];
            thomas_neumann(tau / (h * h), x, &mut self.scratch);
        } else {
            self.solve_2d(tau, x);
        }
    }

    fn solve_2d(&mut self, tau: f64, x: &mut [f64]) {
        let mx = self.grid.cells()[0];
        let my = self.grid.cells()[1];
        let (qx, ex) = &self.bases[0];
        let (qy, ey) = &self.bases[1];
        let t = &mut self.scratch;
        let s = &mut self.scratch2;
        // forward along x: t[y][m] = Σ_j qx[m][j] x[y][j]
        for y in 0..my {
            let row = &x[y * mx..(y + 1) * mx];
            for m in 0..mx {
                let q = &qx[m * mx..(m + 1) * mx];
                t[y * mx + m] = q.iter().zip(row).map(|(a, b)| a * b).sum();
            }
        }
        // forward along y: s[n][m] = Σ_y qy[n][y] t[y][m]
        s.iter_mut().for_each(|v| *v = 0.0);
        for n in 0..my {
            for y in 0..my {
                let c = qy[n * my + y];
                let (dst, src) = (&mut s[n * mx..(n + 1) * mx], &t[y * mx..(y + 1) * mx]);
                for (d, v) in dst.iter_mut().zip(src) {
                    *d += c * v;
                }
            }
        }
        for n in 0..my {
            for m in 0..mx {
                s[n * mx + m] /= 1.0 + tau * (ex[m] + ey[n]);
            }
        }
        // inverse along y: t[y][m] = Σ_n qy[n][y] s[n][m]
        t.iter_mut().for_each(|v| *v = 0.0);
        for n in 0..my {
            for y in 0..my {
                let c = qy[n * my + y];
                let (dst, src) = (&mut t[y * mx..(y + 1) * mx], &s[n * mx..(n + 1) * mx]);
                for (d, v) in dst.iter_mut().zip(src) {
                    *d += c * v;
                }
            }
        }
        // inverse along x: x[y][j] = Σ_m qx[m][j] t[y][m]
        for y in 0..my {
            let row = &t[y * mx..(y + 1) * mx];
            let out = &mut x[y * mx..(y + 1) * mx];
            out.iter_mut().for_each(|v| *v = 0.0);
            for (m, &c) in row.iter().enumerate() {
                let q = &qx[m * mx..(m + 1) * mx];
                for (o, qv) in out.iter_mut().zip(q) {
                    *o += c * qv;
                }
            }
        }
    }
}

/// Thomas sweep for `(I − r·L) x = b` with `L` the unit-spacing Neumann
/// second difference: interior rows `(−r, 1 + 2r, −r)`, end rows `(1 + r, −r)`.
fn thomas_neumann(r: f64, x: &mut [f64], c_prime: &mut [f64]) {
    let n = x.len();
    let diag = |i: usize| if i == 0 || i == n - 1 { 1.0 + r } else { 1.0 + 2.0 * r };
    let off = -r;
    c_prime[0] = off / diag(0);
    x[0] /= diag(0);
    for i in 1..n {
        let denom = diag(i) - off * c_prime[i - 1];
        c_prime[i] = off / denom;
        x[i] = (x[i] - off * x[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c_prime[i] * x[i + 1];
    }
}

/// A square band matrix with `kl` sub- and `ku` super-diagonals, factorized
/// in place by Gaussian elimination with partial pivoting. Storage is
/// column-major with `kl` extra rows for pivoting fill-in.
#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ld,
            data: vec![0.0; ld * n],
        }
    }

    /// Number of stored entries a factorization would need.
    pub fn storage_len(n: usize, kl: usize, ku: usize) -> usize {
        (2 * kl + ku + 1) * n
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.ld + (self.kl + self.ku + i - j)
    }

    /// Adds `v` to entry `(i, j)`, which must lie in the original band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i <= j + self.kl && j <= i + self.ku);
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i > j + self.kl || j > i + self.ku + self.kl {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Factorizes in place. Fails when a pivot falls below `rel_tol` times the
    /// largest entry of the matrix.
    pub fn factorize(mut self, rel_tol: f64) -> Result<BandedLu, SingularPivot> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let threshold = rel_tol * self.max_abs().max(f64::MIN_POSITIVE);
        let mut pivots = vec![0usize; n];
        for j in 0..n {
            let last_row = (j + kl).min(n - 1);
            let mut p = j;
            let mut best = self.data[self.idx(j, j)].abs();
            for i in j + 1..=last_row {
                let v = self.data[self.idx(i, j)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > threshold) {
                return Err(SingularPivot { column: j, value: best });
            }
            pivots[j] = p;
            let last_col = (j + kl + ku).min(n - 1);
            if p != j {
                for c in j..=last_col {
                    let (a, b) = (self.idx(j, c), self.idx(p, c));
                    self.data.swap(a, b);
                }
            }
            let piv = self.data[self.idx(j, j)];
            for i in j + 1..=last_row {
                let k = self.idx(i, j);
                self.data[k] /= piv;
            }
            for c in j + 1..=last_col {
                let ujc = self.data[self.idx(j, c)];
                if ujc == 0.0 {
                    continue;
                }
                for i in j + 1..=last_row {
                    let l = self.data[self.idx(i, j)];
                    let k = self.idx(i, c);
                    self.data[k] -= l * ujc;
                }
            }
        }
        Ok(BandedLu { m: self, pivots })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SingularPivot {
    pub column: usize,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct BandedLu {
    m: BandedMatrix,
    pivots: Vec<usize>,
}

impl BandedLu {
    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        let m = &self.m;
        let n = m.n;
        for j in 0..n {
            let p = self.pivots[j];
            if p != j {
                b.swap(j, p);
            }
            let bj = b[j];
            if bj != 0.0 {
                for i in j + 1..=(j + m.kl).min(n - 1) {
                    b[i] -= m.data[m.idx(i, j)] * bj;
                }
            }
        }
        let width = m.kl + m.ku;
        for j in (0..n).rev() {
            b[j] /= m.data[m.idx(j, j)];
            let bj = b[j];
            for i in j.saturating_sub(width)..j {
                b[i] -= m.data[m.idx(i, j)] * bj;
            }
        }
    }
}
