//! Uniform periodic grids on `[-R, R)^n`, the unitary grid Fourier transform
//! and exact time-frequency shifts.
//!
//! A grid with `N` points per axis has spacing `h = 2R/N`; its frequency grid
//! has spacing `1/(2R)` and half-width `N/(4R)`. Translations are cyclic index
//! shifts, so both transforms and shifts are exact on grid samples.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub half_width: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(dim: usize, half_width: f64, n: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("grid dimension must be positive".into()));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::InvalidParameter("grid half-width must be positive".into()));
        }
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "points per axis must be a power of two >= 2, got {n}"
            )));
        }
        Ok(Self { dim, half_width, n })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    /// Quadrature weight `h^dim`.
    pub fn cell(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    /// Multi-index of a flat index (last axis fastest).
    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        for k in (0..self.dim).rev() {
            idx[k] = flat % self.n;
            flat /= self.n;
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.unravel(flat).into_iter().map(|i| self.coord(i)).collect()
    }

    /// The grid carrying the Fourier transform of functions on this grid.
    pub fn frequency(&self) -> GridSpec {
        GridSpec {
            dim: self.dim,
            half_width: self.n as f64 / (4.0 * self.half_width),
            n: self.n,
        }
    }

    /// Largest frequency representable without aliasing, `1/(2h)`.
    pub fn nyquist(&self) -> f64 {
        0.5 / self.spacing()
    }

    /// Number of grid steps in `x`, if `x` is a multiple of the spacing.
    pub fn steps(&self, x: f64) -> Result<i64> {
        let h = self.spacing();
        let q = x / h;
        let r = q.round();
        if (q - r).abs() > 1e-9 * r.abs().max(1.0) {
            return Err(Error::MisalignedShift { shift: x, spacing: h });
        }
        Ok(r as i64)
    }

    pub fn same_as(&self, other: &GridSpec) -> bool {
        self.dim == other.dim
            && self.n == other.n
            && (self.half_width - other.half_width).abs() <= 1e-12 * self.half_width
    }
}

/// Complex samples on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub spec: GridSpec,
    pub data: Vec<C64>,
}

impl GridFunction {
    pub fn zeros(spec: GridSpec) -> Self {
        Self {
            spec,
            data: vec![C64::new(0.0, 0.0); spec.len()],
        }
    }

    pub fn from_fn<F>(spec: GridSpec, f: F) -> Self
    where
        F: Fn(&[f64]) -> C64 + Sync,
    {
        let data = (0..spec.len()).into_par_iter().map(|i| f(&spec.point(i))).collect();
        Self { spec, data }
    }

    pub fn from_vec(spec: GridSpec, data: Vec<C64>) -> Result<Self> {
        if data.len() != spec.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a grid of {}",
                data.len(),
                spec.len()
            )));
        }
        Ok(Self { spec, data })
    }

    /// `(u, v) = h^n sum u conj(v)`.
    pub fn inner(&self, other: &GridFunction) -> C64 {
        dot(&self.data, &other.data) * self.spec.cell()
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.data) * self.spec.cell().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.norm()))
    }

    pub fn sub(&self, other: &GridFunction) -> GridFunction {
        GridFunction {
            spec: self.spec,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, c: C64) -> GridFunction {
        GridFunction {
            spec: self.spec,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn check_spec(&self, spec: &GridSpec) -> Result<()> {
        if self.spec.same_as(spec) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "expected grid {:?}, got {:?}",
                spec, self.spec
            )))
        }
    }
}

/// `sum a conj(b)`.
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

pub fn norm2(a: &[C64]) -> f64 {
    a.iter().map(C64::norm_sqr).sum::<f64>().sqrt()
}

/// Forward and backward FFT plans of one length.
#[derive(Clone)]
pub struct FftPair {
    pub forward: Arc<dyn Fft<f64>>,
    pub backward: Arc<dyn Fft<f64>>,
}

impl FftPair {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            forward: planner.plan_fft_forward(n),
            backward: planner.plan_fft_inverse(n),
        }
    }
}

fn parity(i: usize) -> f64 {
    if i.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Applies the centred transform along every axis. With `t_j = -R + j h` and
/// `w_m = (m - N/2)/(2R)` one has
/// `exp(-2 pi i w_m t_j) = (-1)^(m - N/2) (-1)^j exp(-2 pi i m j / N)`,
/// so each axis is a plain FFT between two sign flips.
fn transform_axes(data: &mut [C64], spec: &GridSpec, forward: bool, plans: &FftPair) {
    let n = spec.n;
    let half_sign = parity(n / 2);
    let fft = if forward { &plans.forward } else { &plans.backward };
    let total = data.len();
    for axis in 0..spec.dim {
        let stride = n.pow((spec.dim - 1 - axis) as u32);
        let block = stride * n;
        let lines: Vec<(usize, usize)> = (0..total / block)
            .flat_map(|b| (0..stride).map(move |s| (b, s)))
            .collect();
        let mut buffers: Vec<Vec<C64>> = lines
            .par_iter()
            .map(|&(b, s)| {
                let base = b * block + s;
                let mut line: Vec<C64> = (0..n).map(|j| data[base + j * stride] * parity(j)).collect();
                fft.process(&mut line);
                for (m, v) in line.iter_mut().enumerate() {
                    *v *= parity(m) * half_sign;
                }
                line
            })
            .collect();
        for ((b, s), line) in lines.into_iter().zip(buffers.iter_mut()) {
            let base = b * block + s;
            for (j, v) in line.iter().enumerate() {
                data[base + j * stride] = *v;
            }
        }
    }
}

/// Parallel sum of per-item vector contributions with a fixed association
/// order, so results do not depend on thread scheduling. `add(i, acc)` adds
/// item `i` into `acc`.
pub fn ordered_sum<F>(count: usize, len: usize, add: F) -> Result<Vec<C64>>
where
    F: Fn(usize, &mut [C64]) -> Result<()> + Sync,
{
    const CHUNKS: usize = 64;
    let chunk = count.div_ceil(CHUNKS).max(1);
    let parts: Vec<Vec<C64>> = (0..count.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![C64::new(0.0, 0.0); len];
            for i in c * chunk..((c + 1) * chunk).min(count) {
                add(i, &mut acc)?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = vec![C64::new(0.0, 0.0); len];
    for part in parts {
        total.iter_mut().zip(part).for_each(|(a, b)| *a += b);
    }
    Ok(total)
}

/// Grid approximation of `F u(w) = int u(t) exp(-2 pi i t.w) dt`; unitary.
pub fn fourier(u: &GridFunction) -> GridFunction {
    fourier_with(u, &FftPair::new(u.spec.n))
}

pub fn fourier_with(u: &GridFunction, plans: &FftPair) -> GridFunction {
    let mut data = u.data.clone();
    transform_axes(&mut data, &u.spec, true, plans);
    let scale = u.spec.cell();
    data.iter_mut().for_each(|v| *v *= scale);
    GridFunction {
        spec: u.spec.frequency(),
        data,
    }
}

/// Inverse of [`fourier`]; the argument lives on a frequency grid.
pub fn inverse_fourier(u: &GridFunction) -> GridFunction {
    inverse_fourier_with(u, &FftPair::new(u.spec.n))
}

pub fn inverse_fourier_with(u: &GridFunction, plans: &FftPair) -> GridFunction {
    let mut data = u.data.clone();
    transform_axes(&mut data, &u.spec, false, plans);
    let scale = u.spec.cell();
    data.iter_mut().for_each(|v| *v *= scale);
    GridFunction {
        spec: u.spec.frequency(),
        data,
    }
}

/// Cyclic translation `T_x u(t) = u(t - x)`; `x` must be grid-aligned.
pub fn translate(u: &GridFunction, x: &[f64]) -> Result<GridFunction> {
    let spec = u.spec;
    if x.len() != spec.dim {
        return Err(Error::GridMismatch(format!(
            "shift of length {} on a {}-dimensional grid",
            x.len(),
            spec.dim
        )));
    }
    let n = spec.n as i64;
    let steps: Vec<i64> = x.iter().map(|&v| spec.steps(v)).collect::<Result<_>>()?;
    if steps.iter().all(|&s| s.rem_euclid(n) == 0) {
        return Ok(u.clone());
    }
    let data = (0..spec.len())
        .into_par_iter()
        .map(|flat| {
            let idx = spec.unravel(flat);
            let src: Vec<usize> = idx
                .iter()
                .zip(&steps)
                .map(|(&i, &s)| (i as i64 - s).rem_euclid(n) as usize)
                .collect();
            u.data[spec.ravel(&src)]
        })
        .collect();
    Ok(GridFunction { spec, data })
}

/// Modulation `M_w u(t) = exp(2 pi i w.t) u(t)`, exact pointwise.
pub fn modulate(u: &GridFunction, omega: &[f64]) -> GridFunction {
    let spec = u.spec;
    if omega.iter().all(|&w| w == 0.0) {
        return u.clone();
    }
    let data = (0..spec.len())
        .into_par_iter()
        .map(|flat| {
            let t = spec.point(flat);
            let phase: f64 = t.iter().zip(omega).map(|(a, b)| a * b).sum();
            u.data[flat] * C64::from_polar(1.0, 2.0 * PI * phase)
        })
        .collect();
    GridFunction { spec, data }
}

/// Time-frequency shift `pi_z u = M_w T_x u` with `z = (x, w)`.
pub fn tf_shift(u: &GridFunction, z: &[f64]) -> Result<GridFunction> {
    let d = u.spec.dim;
    if z.len() != 2 * d {
        return Err(Error::GridMismatch(format!(
            "phase-space point of length {} for a {d}-dimensional grid",
            z.len()
        )));
    }
    Ok(modulate(&translate(u, &z[..d])?, &z[d..]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss(spec: GridSpec) -> GridFunction {
        GridFunction::from_fn(spec, |t| {
            C64::new((-PI * t.iter().map(|v| v * v).sum::<f64>()).exp(), 0.0)
        })
    }

    fn bump(spec: GridSpec) -> GridFunction {
        GridFunction::from_fn(spec, |t| {
            let r2: f64 = t.iter().map(|v| (v - 0.3) * (v - 0.3)).sum();
            C64::new((-2.0 * r2).exp(), t[0].sin())
        })
    }

    #[test]
    fn gaussian_is_self_dual() {
        let spec = GridSpec::new(1, 6.0, 256).unwrap();
        let g = gauss(spec);
        let gh = fourier(&g);
        let expected = gauss(gh.spec);
        assert!(gh.sub(&expected).max_abs() < 1e-10);
    }

    #[test]
    fn gaussian_fourier_matches_direct_quadrature() {
        let spec = GridSpec::new(1, 8.0, 128).unwrap();
        let u = bump(spec);
        let uh = fourier(&u);
        let h = spec.spacing();
        for m in [0usize, 17, 64, 100] {
            let w = uh.spec.coord(m);
            let direct: C64 = (0..spec.n)
                .map(|j| u.data[j] * C64::from_polar(h, -2.0 * PI * w * spec.coord(j)))
                .sum();
            assert!((direct - uh.data[m]).norm() < 1e-11);
        }
    }

    #[test]
    fn round_trip_and_parseval_2d() {
        let spec = GridSpec::new(2, 4.0, 32).unwrap();
        let u = bump(spec);
        let uh = fourier(&u);
        assert!((uh.norm() - u.norm()).abs() < 1e-12 * u.norm());
        let back = inverse_fourier(&uh);
        assert!(back.spec.same_as(&spec));
        assert!(back.sub(&u).norm() < 1e-12 * u.norm());
    }

    #[test]
    fn translation_rule() {
        // F(T_x u) = M_{-x} F u
        let spec = GridSpec::new(1, 8.0, 256).unwrap();
        let u = bump(spec);
        let x = 3.0 * spec.spacing() * 5.0;
        let lhs = fourier(&translate(&u, &[x]).unwrap());
        let rhs = modulate(&fourier(&u), &[-x]);
        assert!(lhs.sub(&rhs).max_abs() < 1e-12);
    }

    #[test]
    fn commutation_phase() {
        // T_x M_w u = exp(-2 pi i x.w) M_w T_x u, with x.w = 1/2
        let spec = GridSpec::new(1, 8.0, 256).unwrap();
        let u = bump(spec);
        let x = 0.25;
        let w = 2.0;
        let a = translate(&modulate(&u, &[w]), &[x]).unwrap();
        let b = modulate(&translate(&u, &[x]).unwrap(), &[w]);
        assert!(a.sub(&b.scale(C64::new(-1.0, 0.0))).max_abs() < 1e-12);
    }

    #[test]
    fn intertwining() {
        // F(pi_z u) = exp(2 pi i x.w) pi_{J^T z} F u, J^T(x, w) = (w, -x)
        let spec = GridSpec::new(1, 8.0, 256).unwrap();
        let u = bump(spec);
        let x = 0.75;
        let w = 1.5;
        let lhs = fourier(&tf_shift(&u, &[x, w]).unwrap());
        let rhs = tf_shift(&fourier(&u), &[w, -x])
            .unwrap()
            .scale(C64::from_polar(1.0, 2.0 * PI * x * w));
        assert!(lhs.sub(&rhs).max_abs() < 1e-10);
    }

    #[test]
    fn misaligned_shift_rejected() {
        let spec = GridSpec::new(1, 8.0, 256).unwrap();
        let u = bump(spec);
        assert!(matches!(tf_shift(&u, &[0.01, 0.0]), Err(Error::MisalignedShift { .. })));
        assert_eq!(tf_shift(&u, &[0.0, 0.0]).unwrap(), u);
    }
}
