//! Short-time Fourier transform `V_g f(x, w) = int f(t) exp(-2 pi i w.t) conj(g(t - x)) dt`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{fourier_with, FftPair, GridFunction, GridSpec, C64};
use crate::lattice::{ell1_ball, Lattice};
use crate::window::Window;

/// Ratio above which a window is considered cut off by the quadrature box.
pub const SUPPORT_TOLERANCE: f64 = 1e-14;

fn boundary_ratio(u: &GridFunction) -> f64 {
    let spec = u.spec;
    let peak = u.max_abs();
    if peak == 0.0 {
        return 0.0;
    }
    let edge = (0..spec.len())
        .filter(|&i| spec.unravel(i).iter().any(|&k| k == 0 || k == spec.n - 1))
        .fold(0.0_f64, |m, i| m.max(u.data[i].norm()));
    edge / peak
}

/// Trapezoid quadrature of STFT values for a fixed window pair.
///
/// Points whose modulation exceeds the grid's Nyquist frequency are evaluated
/// through `V_g f(x, w) = exp(-2 pi i w.x) V_{g^} f^(w, -x)` when the windows
/// have exact transforms, so no aliased value is ever returned.
pub struct StftEngine<'a> {
    gamma: &'a Window,
    g: &'a Window,
    quad: GridSpec,
    gamma_s: GridFunction,
    hat: Option<(Window, Window, GridFunction)>,
}

impl<'a> StftEngine<'a> {
    pub fn new(gamma: &'a Window, g: &'a Window, quad: GridSpec) -> Result<Self> {
        if gamma.dim() != g.dim() || gamma.dim() != quad.dim {
            return Err(Error::GridMismatch(format!(
                "windows of dimension {} and {} on a {}-dimensional grid",
                gamma.dim(),
                g.dim(),
                quad.dim
            )));
        }
        if gamma.is_zero() || g.is_zero() {
            return Err(Error::DegenerateWindow);
        }
        let gamma_s = gamma.sample(&quad)?;
        let g_s = g.sample(&quad)?;
        if gamma_s.max_abs() == 0.0 || g_s.max_abs() == 0.0 {
            return Err(Error::DegenerateWindow);
        }
        let ratio = boundary_ratio(&gamma_s).max(boundary_ratio(&g_s));
        if ratio > SUPPORT_TOLERANCE && gamma.is_analytic() {
            return Err(Error::SupportTruncation { ratio });
        }
        let hat = match (gamma, g) {
            (Window::Analytic(_), Window::Analytic(_)) => {
                let gh = gamma.fourier();
                let fh = g.fourier();
                let gh_s = gh.sample(&quad)?;
                let fh_s = fh.sample(&quad)?;
                let clean = boundary_ratio(&gh_s).max(boundary_ratio(&fh_s)) <= SUPPORT_TOLERANCE;
                clean.then_some((gh, fh, gh_s))
            }
            _ => None,
        };
        Ok(Self {
            gamma,
            g,
            quad,
            gamma_s,
            hat,
        })
    }

    pub fn quad(&self) -> &GridSpec {
        &self.quad
    }

    fn product(f_s: &GridFunction, g: &Window, quad: &GridSpec, x: &[f64]) -> Result<GridFunction> {
        let gs = g.sample_shifted(quad, x)?;
        Ok(GridFunction {
            spec: *quad,
            data: f_s.data.iter().zip(&gs.data).map(|(a, b)| a * b.conj()).collect(),
        })
    }

    fn integrate(prod: &GridFunction, omega: &[f64]) -> C64 {
        let spec = prod.spec;
        let sum: C64 = (0..spec.len())
            .filter(|&i| prod.data[i] != C64::new(0.0, 0.0))
            .map(|i| {
                let t = spec.point(i);
                let phase: f64 = t.iter().zip(omega).map(|(a, b)| a * b).sum();
                prod.data[i] * C64::from_polar(1.0, -2.0 * PI * phase)
            })
            .sum();
        sum * spec.cell()
    }

    /// Plain time-domain trapezoid rule, with no aliasing guard.
    pub fn time_quadrature(&self, z: &[f64]) -> Result<C64> {
        let d = self.quad.dim;
        let prod = Self::product(&self.gamma_s, self.g, &self.quad, &z[..d])?;
        Ok(Self::integrate(&prod, &z[d..]))
    }

    /// `V_g gamma(z)`.
    pub fn eval(&self, z: &[f64]) -> Result<C64> {
        let d = self.quad.dim;
        if z.len() != 2 * d {
            return Err(Error::GridMismatch(format!(
                "phase-space point of length {} for d = {d}",
                z.len()
            )));
        }
        let (x, omega) = z.split_at(d);
        let nyq = self.quad.nyquist();
        let max_abs = |v: &[f64]| v.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
        let prod = Self::product(&self.gamma_s, self.g, &self.quad, x)?;
        if prod.data.iter().all(|v| *v == C64::new(0.0, 0.0)) {
            return Ok(C64::new(0.0, 0.0));
        }
        if max_abs(omega) <= nyq {
            return Ok(Self::integrate(&prod, omega));
        }
        let Some((_, g_hat, gamma_hat_s)) = &self.hat else {
            return Err(Error::Aliasing {
                omega: max_abs(omega),
                nyquist: nyq,
            });
        };
        let prod_hat = Self::product(gamma_hat_s, g_hat, &self.quad, omega)?;
        if prod_hat.data.iter().all(|v| *v == C64::new(0.0, 0.0)) {
            return Ok(C64::new(0.0, 0.0));
        }
        if max_abs(x) > nyq {
            return Err(Error::Aliasing {
                omega: max_abs(omega),
                nyquist: nyq,
            });
        }
        let minus_x: Vec<f64> = x.iter().map(|v| -v).collect();
        let phase: f64 = x.iter().zip(omega).map(|(a, b)| a * b).sum();
        Ok(Self::integrate(&prod_hat, &minus_x) * C64::from_polar(1.0, -2.0 * PI * phase))
    }

    /// The engine for the transformed pair `(gamma^, g^)`, if available.
    pub fn fourier_pair(&self) -> Option<(Window, Window)> {
        self.hat.as_ref().map(|(gh, fh, _)| (gh.clone(), fh.clone()))
    }

    pub fn windows(&self) -> (&Window, &Window) {
        (self.gamma, self.g)
    }
}

/// `V_g gamma(z)` by quadrature on `quad`.
pub fn stft_point(gamma: &Window, g: &Window, z: &[f64], quad: &GridSpec) -> Result<C64> {
    StftEngine::new(gamma, g, *quad)?.eval(z)
}

/// STFT on the product of a time grid and its frequency grid.
#[derive(Debug, Clone)]
pub struct StftGrid {
    pub time: GridSpec,
    pub freq: GridSpec,
    /// `values[x * freq.len() + w]`.
    pub values: Vec<C64>,
}

impl StftGrid {
    pub fn at(&self, x: usize, w: usize) -> C64 {
        self.values[x * self.freq.len() + w]
    }

    /// `(sum |V|^2 h^d dw^d)^(1/2)`.
    pub fn norm(&self) -> f64 {
        let cell = self.time.cell() * self.freq.cell();
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * cell).sqrt()
    }
}

/// For every grid translation `x`, the grid transform of `gamma conj(g(. - x))`.
pub fn stft_grid(gamma: &Window, g: &Window, spec: &GridSpec) -> Result<StftGrid> {
    if gamma.is_zero() || g.is_zero() {
        return Err(Error::DegenerateWindow);
    }
    let gamma_s = gamma.sample(spec)?;
    let plans = FftPair::new(spec.n);
    let rows: Vec<Vec<C64>> = (0..spec.len())
        .into_par_iter()
        .map(|i| {
            let x = spec.point(i);
            let gs = g.sample_shifted(spec, &x)?;
            let prod = GridFunction {
                spec: *spec,
                data: gamma_s.data.iter().zip(&gs.data).map(|(a, b)| a * b.conj()).collect(),
            };
            Ok(fourier_with(&prod, &plans).data)
        })
        .collect::<Result<_>>()?;
    Ok(StftGrid {
        time: *spec,
        freq: spec.frequency(),
        values: rows.into_iter().flatten().collect(),
    })
}

/// One sample `V_g gamma(J L^{-T} kappa)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StftSample {
    pub kappa: Vec<i64>,
    pub point: Vec<f64>,
    pub re: f64,
    pub im: f64,
}

impl StftSample {
    pub fn value(&self) -> C64 {
        C64::new(self.re, self.im)
    }
}

/// STFT samples on the adjoint lattice `J L^{-T} Z^{2d}`, `|kappa| <= K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StftSamples {
    pub lattice: Lattice,
    pub radius: u64,
    pub samples: Vec<StftSample>,
}

impl StftSamples {
    /// Entry at `kappa = 0`, i.e. `(gamma, g)`.
    pub fn center(&self) -> C64 {
        self.samples[0].value()
    }
}

pub fn stft_on_dual_lattice(
    gamma: &Window,
    g: &Window,
    lat: &Lattice,
    radius: u64,
    quad: &GridSpec,
) -> Result<StftSamples> {
    let engine = StftEngine::new(gamma, g, *quad)?;
    samples_with(&engine, lat, radius)
}

pub fn samples_with(engine: &StftEngine<'_>, lat: &Lattice, radius: u64) -> Result<StftSamples> {
    if lat.d() != engine.quad().dim {
        return Err(Error::GridMismatch(format!(
            "lattice in R^{} for windows on R^{}",
            lat.n(),
            engine.quad().dim
        )));
    }
    let samples = ell1_ball(lat.n(), radius)
        .into_par_iter()
        .map(|kappa| {
            let point = lat.adjoint(&kappa);
            let v = engine.eval(&point)?;
            Ok(StftSample {
                kappa,
                point,
                re: v.re,
                im: v.im,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StftSamples {
        lattice: lat.clone(),
        radius,
        samples,
    })
}

/// `| |V_g gamma(x, w)| - |V_{g^} gamma^(w, -x)| |`, both sides by time quadrature.
pub fn fourier_symmetry_check(gamma: &Window, g: &Window, z: &[f64], quad: &GridSpec) -> Result<f64> {
    let d = quad.dim;
    let lhs = StftEngine::new(gamma, g, *quad)?.time_quadrature(z)?;
    let gh = gamma.fourier();
    let fh = g.fourier();
    let rotated: Vec<f64> = z[d..].iter().copied().chain(z[..d].iter().map(|v| -v)).collect();
    let rhs = StftEngine::new(&gh, &fh, *quad)?.time_quadrature(&rotated)?;
    Ok((lhs.norm() - rhs.norm()).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `|V_{g_b} g_a(x, w)|` for `g_a = exp(-pi a t^2)` in one dimension.
    fn gauss_stft_abs(a: f64, b: f64, x: f64, w: f64) -> f64 {
        (a + b).powf(-0.5) * (-PI * (a * b * x * x + w * w) / (a + b)).exp()
    }

    fn quad() -> GridSpec {
        GridSpec::new(1, 8.0, 512).unwrap()
    }

    #[test]
    fn gaussian_values() {
        let g = Window::gaussian(1, 1.0);
        let v0 = stft_point(&g, &g, &[0.0, 0.0], &quad()).unwrap();
        assert!((v0.re - 0.5_f64.sqrt()).abs() < 1e-12 && v0.im.abs() < 1e-14);
        let v1 = stft_point(&g, &g, &[1.0, 0.0], &quad()).unwrap();
        assert!((v1.norm() - 0.5_f64.sqrt() * (-PI / 2.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn disjoint_support_is_zero() {
        let spec = GridSpec::new(1, 8.0, 256).unwrap();
        let chi = Window::indicator(spec, 0.0, 1.0);
        assert_eq!(stft_point(&chi, &chi, &[2.0, 0.3], &spec).unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn mixed_widths_closed_form() {
        let gamma = Window::gaussian(1, 0.7);
        let g = Window::gaussian(1, 1.6);
        let engine = StftEngine::new(&gamma, &g, quad()).unwrap();
        for (x, w) in [(0.0, 0.0), (0.5, -1.25), (-1.5, 0.75), (2.0, 2.0)] {
            let v = engine.eval(&[x, w]).unwrap();
            assert!((v.norm() - gauss_stft_abs(0.7, 1.6, x, w)).abs() < 1e-12);
        }
    }

    #[test]
    fn high_frequency_points_use_the_fourier_side() {
        let g = Window::gaussian(1, 1.0);
        let coarse = GridSpec::new(1, 8.0, 256).unwrap();
        let engine = StftEngine::new(&g, &g, coarse).unwrap();
        // nyquist is 8; the plain rule aliases at w = 16
        let naive = engine.time_quadrature(&[0.0, 16.0]).unwrap();
        assert!(naive.norm() > 0.5);
        let v = engine.eval(&[0.5, 16.0]).unwrap();
        assert!((v.norm() - gauss_stft_abs(1.0, 1.0, 0.5, 16.0)).abs() < 1e-14);
        let v = engine.eval(&[0.5, 3.0]).unwrap();
        assert!((v.norm() - gauss_stft_abs(1.0, 1.0, 0.5, 3.0)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_window() {
        let spec = GridSpec::new(1, 4.0, 64).unwrap();
        let zero = Window::Sampled(GridFunction::zeros(spec));
        let g = Window::gaussian(1, 1.0);
        assert!(matches!(stft_grid(&zero, &g, &spec), Err(Error::DegenerateWindow)));
    }

    #[test]
    fn truncated_support_detected() {
        let g = Window::gaussian(1, 0.01);
        let spec = GridSpec::new(1, 4.0, 64).unwrap();
        assert!(matches!(
            StftEngine::new(&g, &g, spec),
            Err(Error::SupportTruncation { .. })
        ));
    }

    #[test]
    fn dual_lattice_samples() {
        let g = Window::gaussian(1, 1.0);
        let lat = Lattice::diagonal(&[0.5], &[0.5]).unwrap();
        let s = stft_on_dual_lattice(&g, &g, &lat, 0, &quad()).unwrap();
        assert_eq!(s.samples.len(), 1);
        let s = stft_on_dual_lattice(&g, &g, &lat, 4, &quad()).unwrap();
        assert!((s.center().re - 0.5_f64.sqrt()).abs() < 1e-12);
        for e in &s.samples {
            let (h, k) = (e.kappa[0] as f64, e.kappa[1] as f64);
            assert_eq!(e.point, vec![-2.0 * k, 2.0 * h]);
            let exact = gauss_stft_abs(1.0, 1.0, -2.0 * k, 2.0 * h);
            assert!((e.value().norm() - exact).abs() < 1e-12);
        }
    }
}
