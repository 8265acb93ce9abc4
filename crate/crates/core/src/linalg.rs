//! Operators on grid functions: Lanczos and power iteration for extremal
//! eigenvalues, conjugate gradients, and dense assembly.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dot, norm2, GridFunction, GridSpec, C64};

/// A linear map on grid functions over a fixed grid.
pub trait GridOperator: Sync {
    fn spec(&self) -> GridSpec;
    fn apply(&self, u: &GridFunction) -> Result<GridFunction>;
}

/// Identity scaled by `c`, mostly for tests.
pub struct ScaledIdentity {
    pub spec: GridSpec,
    pub c: f64,
}

impl GridOperator for ScaledIdentity {
    fn spec(&self) -> GridSpec {
        self.spec
    }

    fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        Ok(u.scale(C64::new(self.c, 0.0)))
    }
}

/// Dense row-major matrix acting on the flattened samples.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    pub spec: GridSpec,
    pub matrix: Vec<C64>,
}

/// Largest grid size (points) for which dense matrices are built.
pub const DENSE_LIMIT: usize = 4096;

impl DenseOperator {
    /// Columns are images of the unit vectors.
    pub fn assemble<O: GridOperator + ?Sized>(op: &O) -> Result<Self> {
        let spec = op.spec();
        let n = spec.len();
        if n > DENSE_LIMIT {
            return Err(Error::GridTooLarge {
                size: n,
                limit: DENSE_LIMIT,
            });
        }
        let cols: Vec<Vec<C64>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut e = GridFunction::zeros(spec);
                e.data[j] = C64::new(1.0, 0.0);
                op.apply(&e).map(|v| v.data)
            })
            .collect::<Result<_>>()?;
        let mut matrix = vec![C64::new(0.0, 0.0); n * n];
        for (j, col) in cols.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                matrix[i * n + j] = *v;
            }
        }
        Ok(Self { spec, matrix })
    }

    pub fn from_diagonal(spec: GridSpec, diag: &[f64]) -> Self {
        let n = spec.len();
        let mut matrix = vec![C64::new(0.0, 0.0); n * n];
        for (i, v) in diag.iter().enumerate() {
            matrix[i * n + i] = C64::new(*v, 0.0);
        }
        Self { spec, matrix }
    }

    pub fn size(&self) -> usize {
        self.spec.len()
    }

    /// `max |A_ij - conj(A_ji)| / max |A_ij|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.size();
        let scale = self.matrix.iter().fold(0.0_f64, |m, v| m.max(v.norm()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..i {
                worst = worst.max((self.matrix[i * n + j] - self.matrix[j * n + i].conj()).norm());
            }
        }
        worst / scale
    }

    /// `max |A - I|` entrywise.
    pub fn distance_to_identity(&self) -> f64 {
        let n = self.size();
        self.matrix
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let id = if k / n == k % n { 1.0 } else { 0.0 };
                (v - id).norm()
            })
            .fold(0.0, f64::max)
    }
}

impl GridOperator for DenseOperator {
    fn spec(&self) -> GridSpec {
        self.spec
    }

    fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        u.check_spec(&self.spec)?;
        let n = self.size();
        let data = self
            .matrix
            .par_chunks(n)
            .map(|row| row.iter().zip(&u.data).map(|(a, b)| a * b).sum())
            .collect();
        Ok(GridFunction { spec: self.spec, data })
    }
}

/// Seeded complex Gaussian-ish random grid function.
pub fn random_function(spec: GridSpec, seed: u64) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..spec.len())
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    GridFunction { spec, data }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EigenMethod {
    #[default]
    Lanczos,
    Power,
}

/// Extremal eigenvalues of a Hermitian operator with convergence report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremalEigs {
    pub min: f64,
    pub max: f64,
    pub iterations: usize,
    /// Residual norms `||S v - lambda v||` of the two Ritz pairs.
    pub residual_min: f64,
    pub residual_max: f64,
}

fn axpy(y: &mut [C64], a: C64, x: &[C64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}

fn apply_vec<O: GridOperator + ?Sized>(op: &O, v: &[C64]) -> Result<Vec<C64>> {
    let u = GridFunction {
        spec: op.spec(),
        data: v.to_vec(),
    };
    Ok(op.apply(&u)?.data)
}

/// Lanczos with full reorthogonalization. Stops when both extremal Ritz
/// residuals fall below `tol` times the spectral scale.
pub fn lanczos<O: GridOperator + ?Sized>(op: &O, max_iter: usize, tol: f64, seed: u64) -> Result<ExtremalEigs> {
    let spec = op.spec();
    let n = spec.len();
    let max_iter = max_iter.min(n).max(1);
    let mut q = random_function(spec, seed).data;
    let nq = norm2(&q);
    q.iter_mut().for_each(|v| *v /= nq);
    let mut basis: Vec<Vec<C64>> = vec![q];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut last = None;
    for k in 0..max_iter {
        let mut w = apply_vec(op, &basis[k])?;
        let a = dot(&w, &basis[k]).re;
        alphas.push(a);
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            let coeffs: Vec<C64> = basis.par_iter().map(|b| dot(&w, b)).collect();
            for (c, b) in coeffs.iter().zip(&basis) {
                axpy(&mut w, -c, b);
            }
        }
        let b = norm2(&w);
        let m = alphas.len();
        let t = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                alphas[i]
            } else if i + 1 == j {
                betas[i]
            } else if j + 1 == i {
                betas[j]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let (imin, imax) = eig.eigenvalues.iter().enumerate().fold((0, 0), |(lo, hi), (i, v)| {
            (
                if *v < eig.eigenvalues[lo] { i } else { lo },
                if *v > eig.eigenvalues[hi] { i } else { hi },
            )
        });
        let scale = eig
            .eigenvalues
            .iter()
            .fold(0.0_f64, |s, v| s.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let res_min = b * eig.eigenvectors[(m - 1, imin)].abs();
        let res_max = b * eig.eigenvectors[(m - 1, imax)].abs();
        let report = ExtremalEigs {
            min: eig.eigenvalues[imin],
            max: eig.eigenvalues[imax],
            iterations: m,
            residual_min: res_min,
            residual_max: res_max,
        };
        let invariant = b <= 1e-12 * scale;
        if invariant || (res_min <= tol * scale && res_max <= tol * scale) || m == n {
            return Ok(report);
        }
        betas.push(b);
        basis.push(w.iter().map(|v| v / b).collect());
        last = Some(report);
    }
    let r = last.expect("at least one iteration");
    Err(Error::NoConvergence {
        what: "lanczos",
        iterations: r.iterations,
        residual: r.residual_min.max(r.residual_max),
    })
}

/// Power iteration for the dominant eigenvalue of a Hermitian positive
/// semidefinite operator, with `shift`: iterates on `shift I - S` when
/// `shift` is given. Returns the Rayleigh quotient of `S`.
pub fn power_iteration<O: GridOperator + ?Sized>(
    op: &O,
    shift: Option<f64>,
    max_iter: usize,
    tol: f64,
    seed: u64,
) -> Result<(f64, usize)> {
    let spec = op.spec();
    let mut v = random_function(spec, seed).data;
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut prev = f64::NAN;
    for k in 1..=max_iter {
        let sv = apply_vec(op, &v)?;
        let rq = dot(&sv, &v).re;
        let mut w = match shift {
            Some(s) => v.iter().zip(&sv).map(|(a, b)| a * s - b).collect(),
            None => sv,
        };
        let nw = norm2(&w);
        if nw == 0.0 {
            return Ok((rq, k));
        }
        w.iter_mut().for_each(|x| *x /= nw);
        if (rq - prev).abs() <= tol * rq.abs().max(f64::MIN_POSITIVE) {
            return Ok((rq, k));
        }
        prev = rq;
        v = w;
    }
    Err(Error::NoConvergence {
        what: "power iteration",
        iterations: max_iter,
        residual: f64::NAN,
    })
}

/// Extremal eigenvalues by the chosen method. The power variant gets
/// `lambda_min` from the shifted operator `lambda_max I - S`.
pub fn extremal_eigs<O: GridOperator + ?Sized>(
    op: &O,
    method: EigenMethod,
    max_iter: usize,
    tol: f64,
    seed: u64,
) -> Result<ExtremalEigs> {
    match method {
        EigenMethod::Lanczos => lanczos(op, max_iter, tol, seed),
        EigenMethod::Power => {
            let (max, it1) = power_iteration(op, None, max_iter, tol, seed)?;
            let (min, it2) = power_iteration(op, Some(max), max_iter, tol, seed.wrapping_add(1))?;
            Ok(ExtremalEigs {
                min,
                max,
                iterations: it1 + it2,
                residual_min: f64::NAN,
                residual_max: f64::NAN,
            })
        }
    }
}

/// Conjugate gradients for `S x = b`, `S` Hermitian positive definite.
/// Returns the solution and the achieved relative residual.
pub fn conjugate_gradient<O: GridOperator + ?Sized>(
    op: &O,
    b: &GridFunction,
    tol: f64,
    max_iter: usize,
) -> Result<(GridFunction, f64, usize)> {
    let spec = op.spec();
    b.check_spec(&spec)?;
    let bnorm = norm2(&b.data);
    let mut x = vec![C64::new(0.0, 0.0); b.data.len()];
    if bnorm == 0.0 {
        return Ok((GridFunction { spec, data: x }, 0.0, 0));
    }
    let mut r = b.data.clone();
    let mut p = r.clone();
    let mut rr = dot(&r, &r).re;
    for k in 1..=max_iter {
        let sp = apply_vec(op, &p)?;
        let denom = dot(&sp, &p).re;
        if denom <= 0.0 {
            return Err(Error::NoConvergence {
                what: "conjugate gradient (operator not positive definite)",
                iterations: k,
                residual: rr.sqrt() / bnorm,
            });
        }
        let a = rr / denom;
        axpy(&mut x, C64::new(a, 0.0), &p);
        axpy(&mut r, C64::new(-a, 0.0), &sp);
        let rr_new = dot(&r, &r).re;
        let rel = rr_new.sqrt() / bnorm;
        if rel <= tol {
            return Ok((GridFunction { spec, data: x }, rel, k));
        }
        let beta = rr_new / rr;
        p = r.iter().zip(&p).map(|(r, p)| r + p * beta).collect();
        rr = rr_new;
    }
    Err(Error::NoConvergence {
        what: "conjugate gradient",
        iterations: max_iter,
        residual: rr.sqrt() / bnorm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> GridSpec {
        GridSpec::new(1, 4.0, 64).unwrap()
    }

    #[test]
    fn identity_spectrum() {
        let op = ScaledIdentity { spec: spec(), c: 1.0 };
        let e = lanczos(&op, 100, 1e-10, 1).unwrap();
        assert!((e.min - 1.0).abs() < 1e-12 && (e.max - 1.0).abs() < 1e-12);
        let e = extremal_eigs(&op, EigenMethod::Power, 100, 1e-12, 1).unwrap();
        assert!((e.max - 1.0).abs() < 1e-12);
    }

    #[test]
    fn known_diagonal_spectrum() {
        let diag: Vec<f64> = (0..64).map(|i| 2.0 + 3.0 * (i as f64 / 63.0).powi(2)).collect();
        let op = DenseOperator::from_diagonal(spec(), &diag);
        let e = lanczos(&op, 64, 1e-10, 7).unwrap();
        assert!((e.min - 2.0).abs() < 1e-8, "{e:?}");
        assert!((e.max - 5.0).abs() < 1e-8, "{e:?}");
    }

    #[test]
    fn two_point_spectrum_with_power() {
        let diag: Vec<f64> = (0..64).map(|i| if i % 2 == 0 { 2.0 } else { 5.0 }).collect();
        let op = DenseOperator::from_diagonal(spec(), &diag);
        let e = extremal_eigs(&op, EigenMethod::Power, 500, 1e-14, 3).unwrap();
        assert!((e.min - 2.0).abs() < 1e-8 && (e.max - 5.0).abs() < 1e-8);
    }

    #[test]
    fn cg_solves_diagonal_system() {
        let diag: Vec<f64> = (0..64).map(|i| 1.0 + i as f64 / 8.0).collect();
        let op = DenseOperator::from_diagonal(spec(), &diag);
        let b = random_function(spec(), 9);
        let (x, rel, _) = conjugate_gradient(&op, &b, 1e-10, 200).unwrap();
        assert!(rel <= 1e-10);
        let back = op.apply(&x).unwrap();
        assert!(back.sub(&b).norm() < 1e-9 * b.norm());
    }

    #[test]
    fn dense_limit() {
        let big = GridSpec::new(1, 4.0, 8192).unwrap();
        let op = ScaledIdentity { spec: big, c: 1.0 };
        assert!(matches!(DenseOperator::assemble(&op), Err(Error::GridTooLarge { .. })));
    }
}
