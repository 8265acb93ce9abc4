//! Window functions: separable polynomial-times-Gaussian families with exact
//! derivatives and Fourier transforms, and sampled windows.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{fourier, GridFunction, GridSpec, C64};

/// `p(t) exp(-pi a t^2)` with complex polynomial `p` (coefficients ascending).
#[derive(Debug, Clone, PartialEq)]
pub struct PolyGauss {
    pub coeffs: Vec<C64>,
    pub a: f64,
}

impl PolyGauss {
    pub fn gaussian(a: f64) -> Self {
        Self {
            coeffs: vec![C64::new(1.0, 0.0)],
            a,
        }
    }

    /// `H_n(sqrt(2 pi a) t) exp(-pi a t^2)` with the physicists' Hermite polynomial.
    pub fn hermite(order: usize, a: f64) -> Self {
        let c = (2.0 * PI * a).sqrt();
        // H_{k+1}(u) = 2u H_k(u) - 2k H_{k-1}(u), in powers of u
        let mut prev = vec![1.0];
        let mut cur = vec![0.0, 2.0];
        if order == 0 {
            cur = prev.clone();
        } else {
            for k in 1..order {
                let mut next = vec![0.0; k + 2];
                for (i, v) in cur.iter().enumerate() {
                    next[i + 1] += 2.0 * v;
                }
                for (i, v) in prev.iter().enumerate() {
                    next[i] -= 2.0 * k as f64 * v;
                }
                prev = cur;
                cur = next;
            }
        }
        let coeffs = cur
            .iter()
            .enumerate()
            .map(|(i, v)| C64::new(v * c.powi(i as i32), 0.0))
            .collect();
        Self { coeffs, a }
    }

    pub fn eval(&self, t: f64) -> C64 {
        let p = self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * t + c);
        p * (-PI * self.a * t * t).exp()
    }

    /// `d/dt`: `(p' - 2 pi a t p) exp(-pi a t^2)`.
    pub fn derivative(&self) -> Self {
        let n = self.coeffs.len();
        let mut out = vec![C64::new(0.0, 0.0); n + 1];
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                out[i - 1] += c * i as f64;
            }
            out[i + 1] -= c * (2.0 * PI * self.a);
        }
        Self { coeffs: out, a: self.a }.trimmed()
    }

    /// Multiplication by `t`.
    pub fn times_t(&self) -> Self {
        let mut coeffs = vec![C64::new(0.0, 0.0)];
        coeffs.extend_from_slice(&self.coeffs);
        Self { coeffs, a: self.a }.trimmed()
    }

    fn trimmed(mut self) -> Self {
        while self.coeffs.len() > 1 && self.coeffs.last().is_some_and(|c| *c == C64::new(0.0, 0.0)) {
            self.coeffs.pop();
        }
        self
    }

    /// Exact Fourier transform, using `F[t f] = (i / 2 pi) d/dw F[f]`.
    pub fn fourier(&self) -> Self {
        let base = Self {
            coeffs: vec![C64::new(self.a.powf(-0.5), 0.0)],
            a: 1.0 / self.a,
        };
        let factor = C64::new(0.0, 1.0 / (2.0 * PI));
        let mut out = vec![C64::new(0.0, 0.0); self.coeffs.len()];
        let mut term = base;
        let mut scale = C64::new(1.0, 0.0);
        for (k, c) in self.coeffs.iter().enumerate() {
            if k > 0 {
                term = term.derivative();
                scale *= factor;
            }
            let w = c * scale;
            if out.len() < term.coeffs.len() {
                out.resize(term.coeffs.len(), C64::new(0.0, 0.0));
            }
            for (i, v) in term.coeffs.iter().enumerate() {
                out[i] += w * v;
            }
        }
        Self {
            coeffs: out,
            a: 1.0 / self.a,
        }
        .trimmed()
    }

    fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == C64::new(0.0, 0.0))
    }
}

/// Product window `prod_j f_j(t_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableWindow {
    pub factors: Vec<PolyGauss>,
}

impl SeparableWindow {
    pub fn dim(&self) -> usize {
        self.factors.len()
    }

    pub fn eval(&self, t: &[f64]) -> C64 {
        self.factors.iter().zip(t).map(|(f, &x)| f.eval(x)).product()
    }

    pub fn derivative(&self, axis: usize) -> Self {
        let mut out = self.clone();
        out.factors[axis] = out.factors[axis].derivative();
        out
    }

    pub fn times_coord(&self, axis: usize) -> Self {
        let mut out = self.clone();
        out.factors[axis] = out.factors[axis].times_t();
        out
    }

    pub fn fourier(&self) -> Self {
        Self {
            factors: self.factors.iter().map(PolyGauss::fourier).collect(),
        }
    }
}

/// Description of a window family, serializable into reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum WindowKind {
    /// `exp(-pi a |t|^2)`.
    Gaussian { d: usize, a: f64 },
    /// `prod_j H_{n_j}(sqrt(2 pi a) t_j) exp(-pi a t_j^2)`.
    Hermite { orders: Vec<usize>, a: f64 },
    /// Indicator of `[lo, hi)` per axis, sampled on a grid.
    Indicator { d: usize, lo: f64, hi: f64 },
    /// Samples read from a file.
    Sampled { source: String },
}

/// A window: analytic (exact derivatives and Fourier transform) or sampled.
#[derive(Debug, Clone, PartialEq)]
pub enum Window {
    Analytic(SeparableWindow),
    Sampled(GridFunction),
}

impl Window {
    pub fn gaussian(d: usize, a: f64) -> Self {
        Window::Analytic(SeparableWindow {
            factors: vec![PolyGauss::gaussian(a); d],
        })
    }

    pub fn hermite(orders: &[usize], a: f64) -> Self {
        Window::Analytic(SeparableWindow {
            factors: orders.iter().map(|&n| PolyGauss::hermite(n, a)).collect(),
        })
    }

    /// Indicator of `[lo, hi)^d` sampled on `spec` (half-open, so integer
    /// translates tile the grid).
    pub fn indicator(spec: GridSpec, lo: f64, hi: f64) -> Self {
        let h = spec.spacing();
        let inside = |x: f64| {
            let q = (x - lo) / h;
            let top = (hi - lo) / h;
            q > -1e-9 && q < top - 1e-9
        };
        Window::Sampled(GridFunction::from_fn(spec, |t| {
            if t.iter().all(|&x| inside(x)) {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    pub fn from_kind(kind: &WindowKind, spec: GridSpec) -> Result<Self> {
        match kind {
            WindowKind::Gaussian { d, a } => {
                if !(*a > 0.0) {
                    return Err(Error::InvalidParameter("Gaussian width must be positive".into()));
                }
                Ok(Self::gaussian(*d, *a))
            }
            WindowKind::Hermite { orders, a } => {
                if !(*a > 0.0) || orders.is_empty() {
                    return Err(Error::InvalidParameter(
                        "Hermite window needs orders and a positive width".into(),
                    ));
                }
                Ok(Self::hermite(orders, *a))
            }
            WindowKind::Indicator { d, lo, hi } => {
                if *d != spec.dim || !(hi > lo) {
                    return Err(Error::InvalidParameter("bad indicator window".into()));
                }
                Ok(Self::indicator(spec, *lo, *hi))
            }
            WindowKind::Sampled { source } => Err(Error::InvalidParameter(format!(
                "sampled window '{source}' must be loaded by the caller"
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Window::Analytic(w) => w.dim(),
            Window::Sampled(g) => g.spec.dim,
        }
    }

    pub fn is_analytic(&self) -> bool {
        matches!(self, Window::Analytic(_))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Window::Analytic(w) => w.factors.iter().any(PolyGauss::is_zero),
            Window::Sampled(g) => g.data.iter().all(|v| *v == C64::new(0.0, 0.0)),
        }
    }

    /// Pointwise value; sampled windows only answer at their own nodes.
    pub fn eval(&self, t: &[f64]) -> Option<C64> {
        match self {
            Window::Analytic(w) => Some(w.eval(t)),
            Window::Sampled(g) => {
                let idx: Option<Vec<usize>> = t
                    .iter()
                    .map(|&x| {
                        let s = g.spec.steps(x + g.spec.half_width).ok()?;
                        (s >= 0 && (s as usize) < g.spec.n).then_some(s as usize)
                    })
                    .collect();
                Some(idx.map_or(C64::new(0.0, 0.0), |i| g.data[g.spec.ravel(&i)]))
            }
        }
    }

    /// Samples on `spec`.
    pub fn sample(&self, spec: &GridSpec) -> Result<GridFunction> {
        self.sample_shifted(spec, &vec![0.0; spec.dim])
    }

    /// Samples of `t -> w(t - x)` on `spec`. Sampled windows are treated as
    /// zero outside their box, so `x` must be grid-aligned.
    pub fn sample_shifted(&self, spec: &GridSpec, x: &[f64]) -> Result<GridFunction> {
        match self {
            Window::Analytic(w) => {
                if w.dim() != spec.dim {
                    return Err(Error::GridMismatch(format!(
                        "window of dimension {} on a {}-dimensional grid",
                        w.dim(),
                        spec.dim
                    )));
                }
                Ok(GridFunction::from_fn(*spec, |t| {
                    let s: Vec<f64> = t.iter().zip(x).map(|(a, b)| a - b).collect();
                    w.eval(&s)
                }))
            }
            Window::Sampled(g) => {
                g.check_spec(spec)?;
                let steps: Vec<i64> = x.iter().map(|&v| spec.steps(v)).collect::<Result<_>>()?;
                let n = spec.n as i64;
                let data = (0..spec.len())
                    .map(|flat| {
                        let idx = spec.unravel(flat);
                        let src: Option<Vec<usize>> = idx
                            .iter()
                            .zip(&steps)
                            .map(|(&i, &s)| {
                                let j = i as i64 - s;
                                (0..n).contains(&j).then_some(j as usize)
                            })
                            .collect();
                        src.map_or(C64::new(0.0, 0.0), |s| g.data[spec.ravel(&s)])
                    })
                    .collect();
                Ok(GridFunction { spec: *spec, data })
            }
        }
    }

    /// Fourier transform: exact for analytic windows, grid transform otherwise.
    pub fn fourier(&self) -> Window {
        match self {
            Window::Analytic(w) => Window::Analytic(w.fourier()),
            Window::Sampled(g) => Window::Sampled(fourier(g)),
        }
    }

    /// `||w||^2` by quadrature on `spec` (exact samples for sampled windows).
    pub fn norm_sqr(&self, spec: &GridSpec) -> Result<f64> {
        let s = self.sample(spec)?;
        Ok(s.norm().powi(2))
    }
}
