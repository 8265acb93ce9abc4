//! The Gabor operator `S u = sum_kappa (u, pi_{L kappa} g) pi_{L kappa} gamma`
//! in direct and Janssen form, and its rank-one Kohn-Nirenberg symbol.

use std::collections::HashMap;
use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{ordered_sum, tf_shift, GridFunction, GridSpec, C64};
use crate::lattice::{ell1, ell1_ball, Lattice};
use crate::linalg::GridOperator;
use crate::periodize::{ball_points, partial_sum, Symbol};
use crate::psido::{KnOperator, SymbolGrid};
use crate::stft::StftSamples;
use crate::window::Window;

/// Relative size of the last shell above which a truncated sum is flagged.
pub const TRUNCATION_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct GaborSystem {
    /// Analysis window.
    pub g: Window,
    /// Synthesis window.
    pub gamma: Window,
    pub lattice: Lattice,
    /// Truncation radius of the l1 ball of lattice indices.
    pub k: u64,
}

impl GaborSystem {
    pub fn new(g: Window, gamma: Window, lattice: Lattice, k: u64) -> Result<Self> {
        if g.dim() != gamma.dim() || lattice.n() != 2 * g.dim() {
            return Err(Error::GridMismatch(format!(
                "windows on R^{} and R^{} with a lattice in R^{}",
                g.dim(),
                gamma.dim(),
                lattice.n()
            )));
        }
        Ok(Self { g, gamma, lattice, k })
    }

    /// Tight system `g = gamma`.
    pub fn tight(g: Window, lattice: Lattice, k: u64) -> Result<Self> {
        Self::new(g.clone(), g, lattice, k)
    }

    pub fn is_symmetric(&self) -> bool {
        self.g == self.gamma
    }

    /// Distinct atoms `L kappa`, `|kappa| <= k`, modulo the cyclic grid, each
    /// tagged with the shell in which it first appears.
    pub fn atoms(&self, spec: &GridSpec) -> Result<Vec<(u64, Vec<f64>)>> {
        let d = spec.dim;
        let n = spec.n as i64;
        let dw = spec.frequency().spacing();
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for kappa in ell1_ball(self.lattice.n(), self.k) {
            let z = self.lattice.point(&kappa);
            let mut key = Vec::with_capacity(2 * d);
            for x in &z[..d] {
                key.push(spec.steps(*x)?.rem_euclid(n));
            }
            for w in &z[d..] {
                let q = w / dw;
                key.push(if (q - q.round()).abs() < 1e-9 {
                    (q.round() as i64).rem_euclid(n)
                } else {
                    n + (w * 1e9).round() as i64
                });
            }
            if seen.insert(key, ()).is_none() {
                out.push((ell1(&kappa), z));
            }
        }
        Ok(out)
    }
}

/// Output of the direct sum with its truncation diagnostic.
#[derive(Debug, Clone)]
pub struct DirectApplication {
    pub value: GridFunction,
    /// `||last-shell contribution|| / ||S u||`.
    pub last_shell_ratio: f64,
}

/// Direct frame-series sum over the cyclic grid of `u`.
pub fn gabor_apply_direct_report(sys: &GaborSystem, u: &GridFunction) -> Result<DirectApplication> {
    let spec = u.spec;
    let g = sys.g.sample(&spec)?;
    let gamma = sys.gamma.sample(&spec)?;
    let atoms = sys.atoms(&spec)?;
    let terms = |last: bool| -> Result<Vec<C64>> {
        let chosen: Vec<&Vec<f64>> = atoms
            .iter()
            .filter(|(m, _)| !last || *m == sys.k)
            .map(|(_, z)| z)
            .collect();
        ordered_sum(chosen.len(), spec.len(), |i, acc| {
            let gz = tf_shift(&g, chosen[i])?;
            let c = u.inner(&gz);
            if c != C64::new(0.0, 0.0) {
                let gam = tf_shift(&gamma, chosen[i])?;
                acc.iter_mut().zip(&gam.data).for_each(|(a, v)| *a += v * c);
            }
            Ok(())
        })
    };
    let value = GridFunction {
        spec,
        data: terms(false)?,
    };
    let last = GridFunction {
        spec,
        data: terms(true)?,
    };
    let norm = value.norm();
    Ok(DirectApplication {
        last_shell_ratio: if norm > 0.0 { last.norm() / norm } else { 0.0 },
        value,
    })
}

pub fn gabor_apply_direct(sys: &GaborSystem, u: &GridFunction) -> Result<GridFunction> {
    Ok(gabor_apply_direct_report(sys, u)?.value)
}

/// As [`gabor_apply_direct`], failing when the last shell is not negligible.
pub fn gabor_apply_direct_checked(sys: &GaborSystem, u: &GridFunction) -> Result<GridFunction> {
    let r = gabor_apply_direct_report(sys, u)?;
    if r.last_shell_ratio > TRUNCATION_TOLERANCE {
        return Err(Error::TruncationWarning {
            ratio: r.last_shell_ratio,
        });
    }
    Ok(r.value)
}

/// `|det L|^{-1} sum V_g gamma(J L^{-T} kappa) pi_{J L^{-T} kappa} u`. Terms
/// with an exactly vanishing coefficient are skipped before any alignment
/// check, so far-away adjoint points never need to be representable.
pub fn janssen_apply(sys: &GaborSystem, u: &GridFunction, samples: &StftSamples) -> Result<GridFunction> {
    if samples.lattice != sys.lattice {
        return Err(Error::GridMismatch("STFT samples belong to another lattice".into()));
    }
    let spec = u.spec;
    let live: Vec<_> = samples
        .samples
        .iter()
        .filter(|s| s.value() != C64::new(0.0, 0.0))
        .collect();
    let sum = ordered_sum(live.len(), spec.len(), |i, acc| {
        let c = live[i].value();
        let shifted = tf_shift(u, &live[i].point)?;
        acc.iter_mut().zip(&shifted.data).for_each(|(a, v)| *a += v * c);
        Ok(())
    })?;
    let vol = sys.lattice.volume();
    Ok(GridFunction {
        spec,
        data: sum.into_iter().map(|v| v / vol).collect(),
    })
}

/// `q(x, w) = exp(-2 pi i x.w) gamma(x) conj(g^(w))`. Its Fourier transform is
/// computed by an independent quadrature over phase space.
pub struct RankOneSymbol {
    gamma: Window,
    g_hat: Window,
    quad: GridSpec,
    gamma_s: Vec<C64>,
    g_hat_s: Vec<C64>,
}

impl RankOneSymbol {
    /// `quad` is the `d`-dimensional grid used for each half of phase space.
    pub fn new(sys: &GaborSystem, quad: GridSpec) -> Result<Self> {
        let g_hat = sys.g.fourier();
        let gamma_s = sys.gamma.sample(&quad)?.data;
        let g_hat_s = match &g_hat {
            Window::Analytic(_) => g_hat.sample(&quad)?.data,
            Window::Sampled(s) => {
                if !s.spec.same_as(&quad) {
                    return Err(Error::GridMismatch(
                        "sampled window transform lives on another grid".into(),
                    ));
                }
                s.data.clone()
            }
        };
        Ok(Self {
            gamma: sys.gamma.clone(),
            g_hat,
            quad,
            gamma_s,
            g_hat_s,
        })
    }
}

impl Symbol for RankOneSymbol {
    fn dim(&self) -> usize {
        2 * self.quad.dim
    }

    fn eval(&self, z: &[f64]) -> C64 {
        let d = self.quad.dim;
        let (x, w) = z.split_at(d);
        let phase: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum();
        let gx = self.gamma.eval(x).unwrap_or_default();
        let gw = self.g_hat.eval(w).unwrap_or_default();
        C64::from_polar(1.0, -2.0 * PI * phase) * gx * gw.conj()
    }

    /// `q^(eta, zeta) = int int q(x, w) exp(-2 pi i (x.eta + w.zeta)) dx dw`.
    fn fourier(&self, zeta: &[f64]) -> Option<C64> {
        let d = self.quad.dim;
        let (eta, xi) = zeta.split_at(d);
        let len = self.quad.len();
        let quad = self.quad;
        let sum: C64 = (0..len)
            .into_par_iter()
            .filter(|&i| self.gamma_s[i] != C64::new(0.0, 0.0))
            .map(|i| {
                let x = quad.point(i);
                let inner: C64 = (0..len)
                    .filter(|&m| self.g_hat_s[m] != C64::new(0.0, 0.0))
                    .map(|m| {
                        let w = quad.point(m);
                        let phase: f64 = (0..d).map(|j| x[j] * w[j] + w[j] * xi[j]).sum();
                        self.g_hat_s[m].conj() * C64::from_polar(1.0, -2.0 * PI * phase)
                    })
                    .sum();
                let px: f64 = x.iter().zip(eta).map(|(a, b)| a * b).sum();
                self.gamma_s[i] * C64::from_polar(1.0, -2.0 * PI * px) * inner
            })
            .collect::<Vec<C64>>()
            .iter()
            .sum();
        Some(sum * quad.cell() * quad.cell())
    }
}

pub fn rank_one_symbol(sys: &GaborSystem, quad: GridSpec) -> Result<RankOneSymbol> {
    RankOneSymbol::new(sys, quad)
}

/// `||q_L(x, D) u - S u|| / ||u||`, with `q_L` the partial periodization of
/// the rank-one symbol over the same `l1` ball as the direct sum.
pub fn equivalence_check(sys: &GaborSystem, u: &GridFunction) -> Result<f64> {
    let un = u.norm();
    if un == 0.0 {
        return Ok(0.0);
    }
    let spec = u.spec;
    let q = RankOneSymbol::new(sys, spec)?;
    let points = ball_points(&sys.lattice, sys.k);
    let op = KnOperator::new(SymbolGrid::from_fn(spec, |x, w| {
        let z: Vec<f64> = x.iter().chain(w).copied().collect();
        partial_sum(&q, &points, &z)
    }));
    let lhs = op.apply(u)?;
    let rhs = gabor_apply_direct(sys, u)?;
    Ok(lhs.sub(&rhs).norm() / un)
}
