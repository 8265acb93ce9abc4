//! Lattice periodization `F_L(z) = sum_kappa q(z + L kappa)`, its Fourier
//! coefficients, and the Poisson summation residual.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, C64};
use crate::lattice::{ell1, ell1_ball, shell, Lattice};
use crate::window::Window;

/// A function on `R^n` with pointwise values and, optionally, a Fourier transform.
pub trait Symbol: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, z: &[f64]) -> C64;
    /// `q^(zeta) = int q(z) exp(-2 pi i z.zeta) dz`, when known.
    fn fourier(&self, _zeta: &[f64]) -> Option<C64> {
        None
    }
}

/// `exp(-pi a |z - c|^2)` on `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSymbol {
    pub a: f64,
    pub center: Vec<f64>,
}

impl GaussianSymbol {
    pub fn new(n: usize, a: f64) -> Self {
        Self {
            a,
            center: vec![0.0; n],
        }
    }

    pub fn centered_at(a: f64, center: Vec<f64>) -> Self {
        Self { a, center }
    }
}

impl Symbol for GaussianSymbol {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn eval(&self, z: &[f64]) -> C64 {
        let r2: f64 = z.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum();
        C64::new((-PI * self.a * r2).exp(), 0.0)
    }

    fn fourier(&self, zeta: &[f64]) -> Option<C64> {
        let n = self.dim() as f64;
        let r2: f64 = zeta.iter().map(|v| v * v).sum();
        let phase: f64 = zeta.iter().zip(&self.center).map(|(a, b)| a * b).sum();
        Some(C64::from_polar(
            self.a.powf(-n / 2.0) * (-PI * r2 / self.a).exp(),
            -2.0 * PI * phase,
        ))
    }
}

impl Symbol for Window {
    fn dim(&self) -> usize {
        Window::dim(self)
    }

    fn eval(&self, z: &[f64]) -> C64 {
        Window::eval(self, z).unwrap_or_default()
    }

    fn fourier(&self, zeta: &[f64]) -> Option<C64> {
        match self {
            Window::Analytic(w) => Some(w.fourier().eval(zeta)),
            Window::Sampled(_) => None,
        }
    }
}

/// Trapezoid approximation of `q^(zeta)` on `quad`.
pub fn quadrature_fourier<S: Symbol + ?Sized>(q: &S, zeta: &[f64], quad: &GridSpec) -> C64 {
    let sum: C64 = (0..quad.len())
        .into_par_iter()
        .map(|i| {
            let z = quad.point(i);
            let phase: f64 = z.iter().zip(zeta).map(|(a, b)| a * b).sum();
            q.eval(&z) * C64::from_polar(1.0, -2.0 * PI * phase)
        })
        .collect::<Vec<C64>>()
        .iter()
        .sum();
    sum * quad.cell()
}

/// Trapezoid approximation of `int q`.
pub fn quadrature_mass<S: Symbol + ?Sized>(q: &S, quad: &GridSpec) -> C64 {
    quadrature_fourier(q, &vec![0.0; quad.dim], quad)
}

/// Partial sums `F_{L,h}(L t)` sampled on `t in [0,1)^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodizedSymbol {
    pub lattice: Lattice,
    /// Points per axis of the parameter grid `t_j = i / points`.
    pub points: usize,
    pub values: Vec<C64>,
    pub h_trunc: u64,
    /// Largest pointwise contribution of each shell `|kappa| = m`.
    pub shell_max: Vec<f64>,
}

impl PeriodizedSymbol {
    /// Contribution of the last shell, the tail diagnostic.
    pub fn tail(&self) -> f64 {
        self.shell_max.last().copied().unwrap_or(0.0)
    }

    fn param_spec(&self) -> GridSpec {
        GridSpec {
            dim: self.lattice.n(),
            half_width: 0.5,
            n: self.points,
        }
    }

    /// `int_{L[0,1)^n} F_L`, by the rectangle rule (exact for trigonometric
    /// polynomials of low degree, spectrally accurate otherwise).
    pub fn mass(&self) -> C64 {
        let spec = self.param_spec();
        self.values.iter().sum::<C64>() * spec.cell() * self.lattice.volume()
    }

    /// Value at an arbitrary point, reduced modulo the lattice; the reduced
    /// parameter must fall on the sample grid.
    pub fn lookup(&self, z: &[f64]) -> Result<C64> {
        let t = self.lattice.solve(z);
        let p = self.points as f64;
        let idx: Vec<usize> = t
            .iter()
            .map(|&v| {
                let q = v * p;
                let r = q.round();
                if (q - r).abs() > 1e-7 {
                    return Err(Error::GridMismatch(format!(
                        "point {z:?} is off the periodization grid ({} per period)",
                        self.points
                    )));
                }
                Ok((r as i64).rem_euclid(self.points as i64) as usize)
            })
            .collect::<Result<_>>()?;
        Ok(self.values[self.param_spec().ravel(&idx)])
    }
}

/// Samples `F_{L,h_trunc}(L t) = sum_{|kappa| <= h_trunc} q(L t + L kappa)` on a
/// `points^n` grid of `t in [0,1)^n`.
pub fn periodize<S: Symbol + ?Sized>(q: &S, lat: &Lattice, h_trunc: u64, points: usize) -> Result<PeriodizedSymbol> {
    let n = lat.n();
    if q.dim() != n {
        return Err(Error::GridMismatch(format!(
            "symbol on R^{} with a lattice in R^{n}",
            q.dim()
        )));
    }
    let spec = GridSpec::new(n, 0.5, points)?;
    let shells: Vec<Vec<Vec<f64>>> = (0..=h_trunc)
        .map(|m| shell(n, m).iter().map(|k| lat.point(k)).collect())
        .collect();
    let rows: Vec<Vec<C64>> = (0..spec.len())
        .into_par_iter()
        .map(|i| {
            let t: Vec<f64> = spec.unravel(i).iter().map(|&j| j as f64 / points as f64).collect();
            let z = lat.apply(&t);
            shells
                .iter()
                .map(|pts| {
                    pts.iter()
                        .map(|p| {
                            let w: Vec<f64> = z.iter().zip(p).map(|(a, b)| a + b).collect();
                            q.eval(&w)
                        })
                        .sum()
                })
                .collect()
        })
        .collect();
    let shell_max: Vec<f64> = (0..=h_trunc as usize)
        .map(|m| rows.iter().fold(0.0_f64, |acc, r| acc.max(r[m].norm())))
        .collect();
    if h_trunc >= 2 {
        let m = h_trunc as usize;
        let (last, prev) = (shell_max[m], shell_max[m - 1]);
        if last > prev && last > 0.0 {
            return Err(Error::NonDecaying { shell: m, last, prev });
        }
    }
    let values = rows.iter().map(|r| r.iter().sum()).collect();
    Ok(PeriodizedSymbol {
        lattice: lat.clone(),
        points,
        values,
        h_trunc,
        shell_max,
    })
}

/// The partial sum `F_{L,h}(z) = sum_{|kappa| <= h} q(z + L kappa)` at one
/// point. Unlike [`PeriodizedSymbol::lookup`] this is not reduced modulo the
/// lattice, so it matches a truncated frame sum term by term.
pub fn partial_sum<S: Symbol + ?Sized>(q: &S, points: &[Vec<f64>], z: &[f64]) -> C64 {
    points
        .iter()
        .map(|p| {
            let w: Vec<f64> = z.iter().zip(p).map(|(a, b)| a + b).collect();
            q.eval(&w)
        })
        .sum()
}

/// Lattice points `L kappa`, `|kappa| <= h`.
pub fn ball_points(lat: &Lattice, h: u64) -> Vec<Vec<f64>> {
    ell1_ball(lat.n(), h).iter().map(|k| lat.point(k)).collect()
}

/// Fourier coefficient `c_kappa(q_L) = q^(L^{-T} kappa) / |det L|`.
pub fn fourier_coeff<S: Symbol + ?Sized>(q: &S, lat: &Lattice, kappa: &[i64]) -> Result<C64> {
    let zeta = lat.dual(kappa);
    let v = q
        .fourier(&zeta)
        .ok_or_else(|| Error::MethodUnavailable("symbol has no Fourier transform".into()))?;
    Ok(v / lat.volume())
}

/// `|sum f(x + L kappa) - |det L|^{-1} sum f^(L^{-T} kappa) exp(2 pi i L^{-T} kappa . x)|`
/// over `|kappa| <= k`, with both sides returned for inspection.
pub fn poisson_sides<S: Symbol + ?Sized>(f: &S, lat: &Lattice, x: &[f64], k: u64) -> Result<(C64, C64)> {
    let n = lat.n();
    if f.dim() != n || x.len() != n {
        return Err(Error::GridMismatch(format!(
            "function on R^{} with a lattice in R^{n}",
            f.dim()
        )));
    }
    let ball = ell1_ball(n, k);
    let lhs: C64 = ball
        .iter()
        .map(|kappa| {
            let p = lat.point(kappa);
            let w: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + b).collect();
            f.eval(&w)
        })
        .sum();
    let mut rhs = C64::new(0.0, 0.0);
    for kappa in &ball {
        let zeta = lat.dual(kappa);
        let v = f
            .fourier(&zeta)
            .ok_or_else(|| Error::MethodUnavailable("function has no Fourier transform".into()))?;
        let phase: f64 = zeta.iter().zip(x).map(|(a, b)| a * b).sum();
        rhs += v * C64::from_polar(1.0, 2.0 * PI * phase);
    }
    debug_assert!(ball.iter().all(|kp| ell1(kp) <= k));
    Ok((lhs, rhs / lat.volume()))
}

pub fn poisson_residual<S: Symbol + ?Sized>(f: &S, lat: &Lattice, x: &[f64], k: u64) -> Result<f64> {
    let (lhs, rhs) = poisson_sides(f, lat, x, k)?;
    Ok((lhs - rhs).norm())
}
