//! Lattices `L Z^{2d}` in the time-frequency plane.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An invertible `2d x 2d` matrix with cached determinant, inverse transpose
/// and cofactor matrix. All matrices are stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    d: usize,
    size: usize,
    matrix: Vec<f64>,
    det: f64,
    inv_transpose: Vec<f64>,
    cofactor: Vec<f64>,
    diagonal: Option<(Vec<f64>, Vec<f64>)>,
}

fn to_dmatrix(n: usize, m: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, m)
}

fn cofactor_matrix(n: usize, m: &[f64]) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let minor: Vec<f64> = (0..n)
                .filter(|&r| r != i)
                .flat_map(|r| (0..n).filter(move |&c| c != j).map(move |c| m[r * n + c]))
                .collect();
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            out[i * n + j] = sign * to_dmatrix(n - 1, &minor).determinant();
        }
    }
    out
}

impl Lattice {
    /// Builds a lattice from the rows of a square matrix of even size.
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        if !rows.len().is_multiple_of(2) {
            return Err(Error::BadShape {
                rows: rows.len(),
                cols: rows.first().map_or(0, Vec::len),
            });
        }
        Self::general(rows)
    }

    /// A lattice `L Z^n` in any dimension, for plain periodization and
    /// Poisson sums. Phase-space maps (`adjoint`, `diag`) need even `n`.
    pub fn general(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::BadShape {
                rows: n,
                cols: rows.first().map_or(0, Vec::len),
            });
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("lattice entries must be finite".into()));
        }
        let matrix: Vec<f64> = rows.iter().flatten().copied().collect();
        let dm = to_dmatrix(n, &matrix);
        let det = dm.determinant();
        let scale = matrix.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if scale == 0.0 || det.abs() < 1e-12 * scale.powi(n as i32) {
            return Err(Error::SingularMatrix { det });
        }
        let inv = dm.try_inverse().ok_or(Error::SingularMatrix { det })?;
        let inv_transpose: Vec<f64> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| inv[(j, i)])
            .collect();
        let cofactor = cofactor_matrix(n, &matrix);
        let d = n / 2;
        let off_diag_zero = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .all(|(i, j)| i == j || matrix[i * n + j] == 0.0);
        let diagonal = if n.is_multiple_of(2) && off_diag_zero && (0..n).all(|i| matrix[i * n + i] > 0.0) {
            let diag: Vec<f64> = (0..n).map(|i| matrix[i * n + i]).collect();
            Some((diag[..d].to_vec(), diag[d..].to_vec()))
        } else {
            None
        };
        Ok(Self {
            d,
            size: n,
            matrix,
            det,
            inv_transpose,
            cofactor,
            diagonal,
        })
    }

    /// Separable lattice `diag(alpha, beta)`: translations `alpha_j`, modulations `beta_j`.
    pub fn diagonal(alpha: &[f64], beta: &[f64]) -> Result<Self> {
        if alpha.len() != beta.len() || alpha.is_empty() {
            return Err(Error::InvalidParameter(
                "alpha and beta must be non-empty and of equal length".into(),
            ));
        }
        if alpha.iter().chain(beta).any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "alpha and beta entries must be positive".into(),
            ));
        }
        let n = 2 * alpha.len();
        let diag: Vec<f64> = alpha.iter().chain(beta).copied().collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { diag[i] } else { 0.0 }).collect())
            .collect();
        Self::new(&rows)
    }

    /// Space dimension `d`; the lattice lives in `R^{2d}`.
    pub fn d(&self) -> usize {
        self.d
    }

    /// Matrix size, `2d` for phase-space lattices.
    pub fn n(&self) -> usize {
        self.size
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    /// Volume of the fundamental domain, `|det L|`.
    pub fn volume(&self) -> f64 {
        self.det.abs()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.n() + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.matrix.chunks(self.n()).map(<[f64]>::to_vec).collect()
    }

    pub fn inv_transpose_entry(&self, i: usize, j: usize) -> f64 {
        self.inv_transpose[i * self.n() + j]
    }

    /// Entry `(i, j)` of `L^{-1}`.
    pub fn inverse_entry(&self, i: usize, j: usize) -> f64 {
        self.inv_transpose[j * self.n() + i]
    }

    /// Cofactor `a^{ij}` (signed minor of entry `(i, j)`).
    pub fn cofactor(&self, i: usize, j: usize) -> f64 {
        self.cofactor[i * self.n() + j]
    }

    /// `(alpha, beta)` when the matrix is `diag(alpha, beta)` with positive entries.
    pub fn diag(&self) -> Option<(&[f64], &[f64])> {
        self.diagonal.as_ref().map(|(a, b)| (a.as_slice(), b.as_slice()))
    }

    /// Maximal mesh `max_j {alpha_j, beta_j}` of a diagonal lattice.
    pub fn max_mesh(&self) -> Option<f64> {
        self.diag()
            .map(|(a, b)| a.iter().chain(b).fold(0.0_f64, |m, v| m.max(*v)))
    }

    fn mul(m: &[f64], n: usize, v: &[f64]) -> Vec<f64> {
        (0..n).map(|i| (0..n).map(|j| m[i * n + j] * v[j]).sum()).collect()
    }

    /// Lattice point `L kappa`.
    pub fn point(&self, kappa: &[i64]) -> Vec<f64> {
        let v: Vec<f64> = kappa.iter().map(|&k| k as f64).collect();
        Self::mul(&self.matrix, self.n(), &v)
    }

    /// Real-vector image `L y`.
    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        Self::mul(&self.matrix, self.n(), y)
    }

    /// `L^{-1} z`.
    pub fn solve(&self, z: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|i| (0..n).map(|j| self.inverse_entry(i, j) * z[j]).sum())
            .collect()
    }

    /// Dual lattice point `L^{-T} kappa`.
    pub fn dual(&self, kappa: &[i64]) -> Vec<f64> {
        let v: Vec<f64> = kappa.iter().map(|&k| k as f64).collect();
        Self::mul(&self.inv_transpose, self.n(), &v)
    }

    /// Adjoint lattice point `J L^{-T} kappa`, the shifts of the Janssen series.
    pub fn adjoint(&self, kappa: &[i64]) -> Vec<f64> {
        symplectic_j(&self.dual(kappa))
    }

    /// `(L^{-T} kappa, J L^{-T} kappa)`.
    pub fn dual_point(&self, kappa: &[i64]) -> (Vec<f64>, Vec<f64>) {
        let dual = self.dual(kappa);
        let adj = symplectic_j(&dual);
        (dual, adj)
    }

    /// The lattice generated by `J L^{-T}`.
    pub fn adjoint_lattice(&self) -> Lattice {
        let n = self.n();
        let d = self.d;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i < d {
                            -self.inv_transpose_entry(i + d, j)
                        } else {
                            self.inv_transpose_entry(i - d, j)
                        }
                    })
                    .collect()
            })
            .collect();
        Lattice::new(&rows).expect("J L^{-T} is invertible whenever L is")
    }
}

/// `J (x, omega) = (-omega, x)`.
pub fn symplectic_j(z: &[f64]) -> Vec<f64> {
    let d = z.len() / 2;
    z[d..].iter().map(|v| -v).chain(z[..d].iter().copied()).collect()
}

/// `J^T (x, omega) = (omega, -x)`.
pub fn symplectic_jt(z: &[f64]) -> Vec<f64> {
    let d = z.len() / 2;
    z[d..].iter().copied().chain(z[..d].iter().map(|v| -v)).collect()
}

/// `|kappa| = sum |k_j|`.
pub fn ell1(kappa: &[i64]) -> u64 {
    kappa.iter().map(|k| k.unsigned_abs()).sum()
}

/// All `kappa in Z^n` with `|kappa| = m`, in lexicographic order.
pub fn shell(n: usize, m: u64) -> Vec<Vec<i64>> {
    fn rec(n: usize, m: u64, prefix: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if n == 1 {
            let m = m as i64;
            if m == 0 {
                prefix.push(0);
                out.push(prefix.clone());
                prefix.pop();
            } else {
                for v in [-m, m] {
                    prefix.push(v);
                    out.push(prefix.clone());
                    prefix.pop();
                }
            }
            return;
        }
        let mi = m as i64;
        for v in -mi..=mi {
            prefix.push(v);
            rec(n - 1, m - v.unsigned_abs(), prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        rec(n, m, &mut Vec::with_capacity(n), &mut out);
    }
    out
}

/// The l1 ball `|kappa| <= k`, ordered shell by shell.
pub fn ell1_ball(n: usize, k: u64) -> Vec<Vec<i64>> {
    (0..=k).flat_map(|m| shell(n, m)).collect()
}
