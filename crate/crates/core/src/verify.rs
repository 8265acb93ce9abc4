//! Brute-force oracle: the frame operator on a grid, its extremal
//! eigenvalues, soundness checks of certified bounds and dual windows.

use serde::{Deserialize, Serialize};

use crate::cert::Certificate;
use crate::error::{Error, Result};
use crate::gabor::{gabor_apply_direct, janssen_apply, GaborSystem};
use crate::grid::{ordered_sum, GridFunction, GridSpec, C64};
use crate::linalg::{conjugate_gradient, extremal_eigs, DenseOperator, EigenMethod, ExtremalEigs, GridOperator};
use crate::stft::StftSamples;
use crate::window::Window;

/// Relative slack of the soundness verdict.
pub const VERDICT_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Assembly {
    /// Sum over lattice atoms with `|kappa| <= K`, deduplicated modulo the grid.
    Direct,
    /// Janssen series over the adjoint lattice.
    Janssen,
    /// Every atom of the cyclic lattice, summed through the periodicity of
    /// the modulation sum (diagonal lattices aligned with the grid).
    Full,
}

/// Index steps of a grid-aligned diagonal lattice: translation step `a_j`
/// and modulation period `N / b_j` per axis.
#[derive(Debug, Clone)]
struct FullPlan {
    step: Vec<usize>,
    period: Vec<usize>,
    scale: f64,
    g: GridFunction,
    gamma: GridFunction,
}

fn aligned(v: f64, unit: f64) -> Option<usize> {
    let q = v / unit;
    let r = q.round();
    ((q - r).abs() < 1e-9 && r >= 1.0).then_some(r as usize)
}

impl FullPlan {
    fn new(sys: &GaborSystem, spec: &GridSpec) -> Result<Self> {
        let (alpha, beta) = sys
            .lattice
            .diag()
            .ok_or_else(|| Error::MethodUnavailable("full assembly needs a diagonal lattice".into()))?;
        let h = spec.spacing();
        let dw = spec.frequency().spacing();
        let mut step = Vec::new();
        let mut period = Vec::new();
        for (&a, &b) in alpha.iter().zip(beta) {
            let (Some(sa), Some(sb)) = (aligned(a, h), aligned(b, dw)) else {
                return Err(Error::MisalignedShift {
                    shift: a.min(b),
                    spacing: h,
                });
            };
            if !spec.n.is_multiple_of(sa) || !spec.n.is_multiple_of(sb) {
                return Err(Error::GridMismatch(format!(
                    "lattice steps ({sa}, {sb}) do not divide N = {}",
                    spec.n
                )));
            }
            step.push(sa);
            period.push(spec.n / sb);
        }
        Ok(Self {
            step,
            period,
            scale: beta.iter().map(|b| 1.0 / b).product(),
            g: sys.g.sample(spec)?,
            gamma: sys.gamma.sample(spec)?,
        })
    }

    /// `S u(t) = prod(1/beta) sum_x gamma(t - x) sum_m u(t + m P) conj(g(t + m P - x))`,
    /// all indices cyclic.
    fn apply(&self, u: &GridFunction) -> GridFunction {
        let spec = u.spec;
        let d = spec.dim;
        let n = spec.n;
        let shifts_per_axis: Vec<usize> = self.step.iter().map(|s| n / s).collect();
        let reps: Vec<usize> = self.period.iter().map(|p| n / p).collect();
        let shifts: usize = shifts_per_axis.iter().product();
        let cell: usize = self.period.iter().product();
        let copies: usize = reps.iter().product();
        let split = |mut flat: usize, sizes: &[usize]| -> Vec<usize> {
            let mut idx = vec![0; sizes.len()];
            for k in (0..sizes.len()).rev() {
                idx[k] = flat % sizes[k];
                flat /= sizes[k];
            }
            idx
        };
        let data = ordered_sum(shifts, spec.len(), |xi, acc| {
            let x: Vec<usize> = split(xi, &shifts_per_axis)
                .iter()
                .zip(&self.step)
                .map(|(i, s)| i * s)
                .collect();
            // periodic correlation over one modulation period
            let mut w = vec![C64::new(0.0, 0.0); cell];
            for (ci, wv) in w.iter_mut().enumerate() {
                let c = split(ci, &self.period);
                for mi in 0..copies {
                    let m = split(mi, &reps);
                    let mut t = vec![0; d];
                    let mut tx = vec![0; d];
                    for k in 0..d {
                        t[k] = c[k] + m[k] * self.period[k];
                        tx[k] = (t[k] + n - x[k]) % n;
                    }
                    *wv += u.data[spec.ravel(&t)] * self.g.data[spec.ravel(&tx)].conj();
                }
            }
            for (flat, out) in acc.iter_mut().enumerate() {
                let t = spec.unravel(flat);
                let mut tx = vec![0; d];
                let mut c = 0;
                for k in 0..d {
                    tx[k] = (t[k] + n - x[k]) % n;
                    c = c * self.period[k] + t[k] % self.period[k];
                }
                *out += self.gamma.data[spec.ravel(&tx)] * w[c];
            }
            Ok(())
        })
        .expect("index arithmetic cannot fail");
        GridFunction {
            spec,
            data: data.into_iter().map(|v| v * self.scale).collect(),
        }
    }
}

enum Kind {
    Direct,
    Janssen(StftSamples),
    Full(FullPlan),
}

/// The frame operator of a Gabor system acting on grid functions.
pub struct FrameOperator {
    sys: GaborSystem,
    spec: GridSpec,
    kind: Kind,
}

impl FrameOperator {
    pub fn direct(sys: GaborSystem, spec: GridSpec) -> Self {
        Self {
            sys,
            spec,
            kind: Kind::Direct,
        }
    }

    pub fn janssen(sys: GaborSystem, spec: GridSpec, samples: StftSamples) -> Self {
        Self {
            sys,
            spec,
            kind: Kind::Janssen(samples),
        }
    }

    pub fn full(sys: GaborSystem, spec: GridSpec) -> Result<Self> {
        let plan = FullPlan::new(&sys, &spec)?;
        Ok(Self {
            sys,
            spec,
            kind: Kind::Full(plan),
        })
    }

    pub fn assembly(&self) -> Assembly {
        match self.kind {
            Kind::Direct => Assembly::Direct,
            Kind::Janssen(_) => Assembly::Janssen,
            Kind::Full(_) => Assembly::Full,
        }
    }

    pub fn system(&self) -> &GaborSystem {
        &self.sys
    }
}

impl GridOperator for FrameOperator {
    fn spec(&self) -> GridSpec {
        self.spec
    }

    fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        u.check_spec(&self.spec)?;
        match &self.kind {
            Kind::Direct => gabor_apply_direct(&self.sys, u),
            Kind::Janssen(samples) => janssen_apply(&self.sys, u, samples),
            Kind::Full(plan) => Ok(plan.apply(u)),
        }
    }
}

/// A dense frame-operator matrix.
#[derive(Debug, Clone)]
pub struct FrameOperatorMatrix {
    pub spec: GridSpec,
    pub k: u64,
    pub assembly: Assembly,
    pub dense: DenseOperator,
}

/// Dense matrix of `op`, column by column.
pub fn assemble(op: &FrameOperator) -> Result<FrameOperatorMatrix> {
    Ok(FrameOperatorMatrix {
        spec: op.spec,
        k: op.sys.k,
        assembly: op.assembly(),
        dense: DenseOperator::assemble(op)?,
    })
}

/// Extremal eigenvalues with the settings used throughout the oracle.
pub fn frame_eigs<O: GridOperator + ?Sized>(op: &O, method: EigenMethod, seed: u64) -> Result<ExtremalEigs> {
    let n = op.spec().len();
    let cap = match method {
        EigenMethod::Lanczos => n.min(400),
        EigenMethod::Power => 20_000,
    };
    extremal_eigs(op, method, cap, 1e-8, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub sound: bool,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub a: f64,
    pub b: f64,
}

/// Sound iff `A <= lambda_min (1 + tol)` and `lambda_max <= B (1 + tol)`.
pub fn verify_bounds(a: f64, b: f64, lambda_min: f64, lambda_max: f64) -> Verdict {
    let tol = VERDICT_TOLERANCE;
    Verdict {
        sound: a <= lambda_min * (1.0 + tol) && lambda_max <= b * (1.0 + tol),
        lambda_min,
        lambda_max,
        a,
        b,
    }
}

/// Checks certified frame bounds against measured eigenvalues.
pub fn verify_certificate(cert: &Certificate, eigs: &ExtremalEigs) -> Result<Verdict> {
    match (cert.frame, cert.a, cert.b) {
        (true, Some(a), Some(b)) => Ok(verify_bounds(a, b, eigs.min, eigs.max)),
        _ => Err(Error::InvalidParameter("certificate carries no frame bounds".into())),
    }
}

#[derive(Debug, Clone)]
pub struct DualWindow {
    pub window: GridFunction,
    pub residual: f64,
    pub iterations: usize,
}

/// Canonical dual window `S^{-1} g` by conjugate gradients to relative residual `tol`.
pub fn dual_window<O: GridOperator + ?Sized>(op: &O, g: &GridFunction, tol: f64) -> Result<DualWindow> {
    let (window, residual, iterations) = conjugate_gradient(op, g, tol, 10 * g.spec.len().max(100))?;
    Ok(DualWindow {
        window,
        residual,
        iterations,
    })
}

/// `||sum (f, pi g) pi gamma - f|| / ||f||` for the full cyclic system with
/// analysis window `g` and synthesis window `gamma`.
pub fn reconstruction_error(sys: &GaborSystem, spec: &GridSpec, dual: &GridFunction, f: &GridFunction) -> Result<f64> {
    let pair = GaborSystem::new(sys.g.clone(), Window::Sampled(dual.clone()), sys.lattice.clone(), sys.k)?;
    let op = FrameOperator::full(pair, *spec)?;
    let r = op.apply(f)?;
    Ok(r.sub(f).norm() / f.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;
    use crate::linalg::random_function;

    fn chi_system(spec: GridSpec, k: u64) -> GaborSystem {
        let chi = Window::indicator(spec, 0.0, 1.0);
        GaborSystem::tight(chi, Lattice::diagonal(&[1.0], &[1.0]).unwrap(), k).unwrap()
    }

    #[test]
    fn orthonormal_identity() {
        let spec = GridSpec::new(1, 8.0, 64).unwrap();
        let full = FrameOperator::full(chi_system(spec, 0), spec).unwrap();
        let m = assemble(&full).unwrap();
        assert!(m.dense.distance_to_identity() < 1e-10);
        let direct = FrameOperator::direct(chi_system(spec, 24), spec);
        let m = assemble(&direct).unwrap();
        assert!(m.dense.distance_to_identity() < 1e-10);
        let e = frame_eigs(&full, EigenMethod::Lanczos, 1).unwrap();
        assert!((e.min - 1.0).abs() < 1e-8 && (e.max - 1.0).abs() < 1e-8);
    }

    #[test]
    fn full_matches_direct() {
        // alpha = 1/2 = 4h, beta = 1/2 = 8 dw with R = 8, N = 128
        let spec = GridSpec::new(1, 8.0, 128).unwrap();
        let lat = Lattice::diagonal(&[0.5], &[0.5]).unwrap();
        let g = Window::gaussian(1, 1.0);
        let full = FrameOperator::full(GaborSystem::tight(g.clone(), lat.clone(), 0).unwrap(), spec).unwrap();
        let direct = FrameOperator::direct(GaborSystem::tight(g, lat, 64).unwrap(), spec);
        for seed in 0..3 {
            let u = random_function(spec, seed);
            let a = full.apply(&u).unwrap();
            let b = direct.apply(&u).unwrap();
            assert!(a.sub(&b).norm() < 1e-10 * a.norm());
        }
    }

    #[test]
    fn zero_window_gives_zero_matrix() {
        let spec = GridSpec::new(1, 4.0, 32).unwrap();
        let zero = Window::Sampled(GridFunction::zeros(spec));
        let sys = GaborSystem::tight(zero, Lattice::diagonal(&[1.0], &[1.0]).unwrap(), 2).unwrap();
        let m = assemble(&FrameOperator::direct(sys, spec)).unwrap();
        assert!(m.dense.matrix.iter().all(|v| *v == C64::new(0.0, 0.0)));
    }

    #[test]
    fn dense_limit() {
        let spec = GridSpec::new(1, 8.0, 8192).unwrap();
        let op = FrameOperator::full(chi_system(spec, 0), spec).unwrap();
        assert!(matches!(assemble(&op), Err(Error::GridTooLarge { .. })));
    }

    #[test]
    fn verdicts() {
        assert!(verify_bounds(0.5, 3.0, 0.8, 2.1).sound);
        assert!(!verify_bounds(1.0, 3.0, 0.8, 2.1).sound);
    }

    #[test]
    fn dual_of_orthonormal_basis() {
        let spec = GridSpec::new(1, 8.0, 64).unwrap();
        let sys = chi_system(spec, 0);
        let op = FrameOperator::full(sys.clone(), spec).unwrap();
        let g = sys.g.sample(&spec).unwrap();
        let dual = dual_window(&op, &g, 1e-12).unwrap();
        assert!(dual.window.sub(&g).norm() < 1e-10);
        let f = random_function(spec, 3);
        assert!(reconstruction_error(&sys, &spec, &dual.window, &f).unwrap() < 1e-10);
    }
}
