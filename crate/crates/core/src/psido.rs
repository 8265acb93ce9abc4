//! Kohn-Nirenberg operators `p(x, D) u(x) = int exp(2 pi i x.w) p(x, w) u^(w) dw`
//! on grids, and the continuity/invertibility calculus for periodized symbols.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{fourier_with, inverse_fourier_with, FftPair, GridFunction, GridSpec, C64};
use crate::lattice::{ell1_ball, Lattice};
use crate::linalg::{lanczos, GridOperator};
use crate::periodize::{PeriodizedSymbol, Symbol};
use crate::stft::StftSamples;
use crate::weight::PolyWeight;

/// Symbol samples `p(x_i, w_m)` on a time grid and its frequency grid.
#[derive(Debug, Clone)]
pub struct SymbolGrid {
    pub spec: GridSpec,
    /// `values[i * len + m]`.
    pub values: Vec<C64>,
}

impl SymbolGrid {
    pub fn from_fn<F>(spec: GridSpec, f: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> C64 + Sync,
    {
        let freq = spec.frequency();
        let len = spec.len();
        let values = (0..len * len)
            .into_par_iter()
            .map(|k| f(&spec.point(k / len), &freq.point(k % len)))
            .collect();
        Self { spec, values }
    }

    pub fn from_symbol<S: Symbol + ?Sized>(q: &S, spec: GridSpec) -> Result<Self> {
        if q.dim() != 2 * spec.dim {
            return Err(Error::GridMismatch(format!(
                "symbol on R^{} for a {}-dimensional grid",
                q.dim(),
                spec.dim
            )));
        }
        Ok(Self::from_fn(spec, |x, w| {
            let z: Vec<f64> = x.iter().chain(w).copied().collect();
            q.eval(&z)
        }))
    }

    /// Samples of a periodized symbol. The lattice must be commensurate with
    /// both the time and the frequency spacing of `spec`.
    pub fn from_periodized(p: &PeriodizedSymbol, spec: GridSpec) -> Result<Self> {
        if p.lattice.n() != 2 * spec.dim {
            return Err(Error::GridMismatch(format!(
                "periodized symbol in R^{} for a {}-dimensional grid",
                p.lattice.n(),
                spec.dim
            )));
        }
        let freq = spec.frequency();
        let len = spec.len();
        let values = (0..len * len)
            .into_par_iter()
            .map(|k| {
                let z: Vec<f64> = spec.point(k / len).into_iter().chain(freq.point(k % len)).collect();
                p.lookup(&z)
            })
            .collect::<Result<_>>()?;
        Ok(Self { spec, values })
    }
}

/// The grid operator `p(x, D)`.
pub struct KnOperator {
    symbol: SymbolGrid,
    /// `exp(2 pi i x_i . w_m) p(x_i, w_m)`.
    kernel: Vec<C64>,
    plans: FftPair,
}

impl KnOperator {
    pub fn new(symbol: SymbolGrid) -> Self {
        let spec = symbol.spec;
        let freq = spec.frequency();
        let len = spec.len();
        let kernel = symbol
            .values
            .par_iter()
            .enumerate()
            .map(|(k, p)| {
                let x = spec.point(k / len);
                let w = freq.point(k % len);
                let phase: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
                p * C64::from_polar(1.0, 2.0 * PI * phase)
            })
            .collect();
        Self {
            plans: FftPair::new(spec.n),
            symbol,
            kernel,
        }
    }

    pub fn symbol(&self) -> &SymbolGrid {
        &self.symbol
    }

    /// Adjoint for the `h^d`-weighted inner product.
    pub fn adjoint(&self, v: &GridFunction) -> Result<GridFunction> {
        let spec = self.symbol.spec;
        v.check_spec(&spec)?;
        let len = spec.len();
        let cell = spec.cell();
        let w: Vec<C64> = (0..len)
            .into_par_iter()
            .map(|m| {
                (0..len)
                    .map(|i| self.kernel[i * len + m].conj() * v.data[i])
                    .sum::<C64>()
                    * cell
            })
            .collect();
        let what = GridFunction {
            spec: spec.frequency(),
            data: w,
        };
        Ok(inverse_fourier_with(&what, &self.plans))
    }

    /// `||p(x, D)||` and its smallest singular value on the grid, by Lanczos
    /// on `T^H T`.
    pub fn singular_values(&self, tol: f64, seed: u64) -> Result<(f64, f64)> {
        let e = lanczos(&Normal(self), 400, tol, seed)?;
        Ok((e.min.max(0.0).sqrt(), e.max.max(0.0).sqrt()))
    }
}

impl GridOperator for KnOperator {
    fn spec(&self) -> GridSpec {
        self.symbol.spec
    }

    fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        let spec = self.symbol.spec;
        u.check_spec(&spec)?;
        let uhat = fourier_with(u, &self.plans);
        let len = spec.len();
        let dw = spec.frequency().cell();
        let data = self
            .kernel
            .par_chunks(len)
            .map(|row| row.iter().zip(&uhat.data).map(|(k, v)| k * v).sum::<C64>() * dw)
            .collect();
        Ok(GridFunction { spec, data })
    }
}

struct Normal<'a>(&'a KnOperator);

impl GridOperator for Normal<'_> {
    fn spec(&self) -> GridSpec {
        self.0.spec()
    }

    fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        self.0.adjoint(&self.0.apply(u)?)
    }
}

/// One-shot `p(x, D) u`.
pub fn apply_kn(p: &SymbolGrid, u: &GridFunction) -> Result<GridFunction> {
    if !u.spec.same_as(&p.spec) {
        return Err(Error::GridMismatch(
            "symbol and function live on different grids".into(),
        ));
    }
    KnOperator::new(p.clone()).apply(u)
}

/// One term `v(J L^{-T} kappa) |q^(L^{-T} kappa)|` of a symbol series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesTerm {
    pub kappa: Vec<i64>,
    pub weight: f64,
    pub magnitude: f64,
}

/// Weighted coefficient series of a periodized symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolSeries {
    pub lattice: Lattice,
    pub weight: PolyWeight,
    pub radius: u64,
    pub terms: Vec<SeriesTerm>,
    /// Rigorous remainder for `|kappa| > radius`; zero when unavailable.
    pub tail_bound: f64,
}

impl SymbolSeries {
    pub fn from_symbol<S: Symbol + ?Sized>(
        q: &S,
        lat: &Lattice,
        weight: PolyWeight,
        radius: u64,
        tail_bound: f64,
    ) -> Result<Self> {
        let terms = ell1_ball(lat.n(), radius)
            .into_iter()
            .map(|kappa| {
                let dual = lat.dual(&kappa);
                let mag = q
                    .fourier(&dual)
                    .ok_or_else(|| Error::MethodUnavailable("symbol has no Fourier transform".into()))?
                    .norm();
                Ok(SeriesTerm {
                    weight: weight.eval(&lat.adjoint(&kappa)),
                    kappa,
                    magnitude: mag,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            lattice: lat.clone(),
            weight,
            radius,
            terms,
            tail_bound,
        })
    }

    /// The rank-one Gabor symbol has `q^(L^{-T} kappa) = V_g gamma(J L^{-T} kappa)`.
    pub fn from_stft(samples: &StftSamples, weight: PolyWeight, tail_bound: f64) -> Self {
        let terms = samples
            .samples
            .iter()
            .map(|s| SeriesTerm {
                kappa: s.kappa.clone(),
                weight: weight.eval(&s.point),
                magnitude: s.value().norm(),
            })
            .collect();
        Self {
            lattice: samples.lattice.clone(),
            weight,
            radius: samples.radius,
            terms,
            tail_bound,
        }
    }

    /// Weighted sum over `|kappa| <= m` (no tail).
    pub fn partial(&self, m: u64) -> f64 {
        self.terms
            .iter()
            .filter(|t| crate::lattice::ell1(&t.kappa) <= m)
            .map(|t| t.weight * t.magnitude)
            .sum()
    }

    /// Weighted sum over `0 < |kappa| <= radius` plus the tail.
    pub fn without_zero(&self) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.kappa.iter().any(|&k| k != 0))
            .map(|t| t.weight * t.magnitude)
            .sum::<f64>()
            + self.tail_bound
    }
}

/// `(partial sum + tail, tail)`.
pub fn sigma_lv(series: &SymbolSeries) -> (f64, f64) {
    (series.partial(series.radius) + series.tail_bound, series.tail_bound)
}

/// `C sigma / |det L|`.
pub fn continuity_bound(sigma: f64, lat: &Lattice, c: f64) -> f64 {
    c * sigma / lat.volume()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvertibilityMargin {
    pub margin: f64,
    pub invertible: bool,
    pub inverse_norm_bound: Option<f64>,
    pub det_scale: f64,
}

/// Invertibility of a periodized-symbol operator from `c0 = int q` and a
/// rigorous bound on the `kappa != 0` part of the series. The inverse bound
/// is `|det L| / ((1 + C) |c0| - C sigma)` with `sigma` the full series.
pub fn invertibility_margin(c0: C64, sigma_without_zero: f64, c: f64, volume: f64) -> Result<InvertibilityMargin> {
    let s0 = c0.norm();
    if s0 == 0.0 {
        return Err(Error::ZeroMean);
    }
    let margin = s0 - c * sigma_without_zero;
    let invertible = margin > 0.0;
    let sigma = s0 + sigma_without_zero;
    let denom = (1.0 + c) * s0 - c * sigma;
    Ok(InvertibilityMargin {
        margin,
        invertible,
        inverse_norm_bound: (invertible && denom > 0.0).then(|| volume / denom),
        det_scale: volume,
    })
}
