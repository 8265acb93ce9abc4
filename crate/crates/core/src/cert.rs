//! Frame certificates: decay constants of windows, STFT decay envelopes,
//! rigorous bounds on the `kappa != 0` part of the Janssen series, and the
//! boundedness, invertibility and frame-bound tests built on them.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::count::{c_lv, counting_bound, cube_exclusion};
use crate::error::{Error, Result};
use crate::grid::{fourier, fourier_with, FftPair, GridFunction, GridSpec, C64};
use crate::lattice::Lattice;
use crate::stft::{samples_with, StftEngine, StftSamples};
use crate::weight::PolyWeight;
use crate::window::{SeparableWindow, Window};

/// Largest relative change of a decay constant under grid doubling for
/// which a certificate is still emitted.
pub const REFINEMENT_TOLERANCE: f64 = 5e-3;

/// Exact partial-sum length used before switching to an integral tail.
const SERIES_TERMS: u64 = 1 << 14;

// ---------------------------------------------------------------------------
// Decay constants

/// Weighted sup-norm constants of one window and its Fourier transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayConstants {
    pub epsilon: f64,
    /// `max_k max_a {||g||, ||x_k x^a g||}` in `L^inf_eps`.
    pub h: f64,
    /// Max of `||x^b d^a g||`, `||x^b d_j d^a g||`, `||x_j x^b d^a g||` over
    /// `a, b in {0,1}^d` and axes `j`.
    pub k: f64,
    /// The same maximum for the Fourier transform.
    pub k_hat: f64,
    /// `sqrt(k * k_hat)`.
    pub k_sym: f64,
    /// Grid the maxima were taken on.
    pub grid: GridSpec,
    /// False when derivatives came from finite differences.
    pub rigorous: bool,
}

/// `sup (1 + |x|)^{d + eps} |f(x)|` on the grid.
fn linf_eps_analytic(f: &SeparableWindow, grid: &GridSpec, eps: f64) -> f64 {
    let d = grid.dim;
    let axes: Vec<Vec<f64>> = f
        .factors
        .iter()
        .map(|p| (0..grid.n).map(|i| p.eval(grid.coord(i)).norm()).collect())
        .collect();
    (0..grid.len())
        .into_par_iter()
        .map(|flat| {
            let idx = grid.unravel(flat);
            let mut r2 = 0.0;
            let mut v = 1.0;
            for (j, &i) in idx.iter().enumerate() {
                let t = grid.coord(i);
                r2 += t * t;
                v *= axes[j][i];
            }
            (1.0 + r2.sqrt()).powf(d as f64 + eps) * v
        })
        .reduce(|| 0.0, f64::max)
}

fn linf_eps_sampled(u: &GridFunction, eps: f64) -> f64 {
    let spec = u.spec;
    let d = spec.dim as f64;
    (0..spec.len())
        .into_par_iter()
        .map(|flat| {
            let r = spec.point(flat).iter().map(|t| t * t).sum::<f64>().sqrt();
            (1.0 + r).powf(d + eps) * u.data[flat].norm()
        })
        .reduce(|| 0.0, f64::max)
}

/// Centered difference along `axis`, zero outside the box.
fn finite_difference(u: &GridFunction, axis: usize) -> GridFunction {
    let spec = u.spec;
    let h = spec.spacing();
    let data = (0..spec.len())
        .map(|flat| {
            let idx = spec.unravel(flat);
            let at = |k: i64| -> C64 {
                let mut j = idx.clone();
                let v = idx[axis] as i64 + k;
                if v < 0 || v >= spec.n as i64 {
                    return C64::new(0.0, 0.0);
                }
                j[axis] = v as usize;
                u.data[spec.ravel(&j)]
            };
            (at(1) - at(-1)) / (2.0 * h)
        })
        .collect();
    GridFunction { spec, data }
}

fn times_coord(u: &GridFunction, axis: usize) -> GridFunction {
    let spec = u.spec;
    let data = (0..spec.len())
        .map(|flat| u.data[flat] * spec.coord(spec.unravel(flat)[axis]))
        .collect();
    GridFunction { spec, data }
}

/// The two derivative families: the one defining `k` and the one defining `h`.
fn families<T: Clone>(
    base: &T,
    d: usize,
    deriv: impl Fn(&T, usize) -> T,
    times: impl Fn(&T, usize) -> T,
) -> (Vec<T>, Vec<T>) {
    let mut k_family = Vec::new();
    let mut h_family = vec![base.clone()];
    for a in 0..(1usize << d) {
        let mut da = base.clone();
        for j in (0..d).filter(|j| a >> j & 1 == 1) {
            da = deriv(&da, j);
        }
        for b in 0..(1usize << d) {
            let with_xb = |f: &T| {
                let mut out = f.clone();
                for j in (0..d).filter(|j| b >> j & 1 == 1) {
                    out = times(&out, j);
                }
                out
            };
            let xb = with_xb(&da);
            for j in 0..d {
                k_family.push(with_xb(&deriv(&da, j)));
                k_family.push(times(&xb, j));
            }
            k_family.push(xb);
        }
    }
    for a in 0..(1usize << d) {
        let mut xa = base.clone();
        for j in (0..d).filter(|j| a >> j & 1 == 1) {
            xa = times(&xa, j);
        }
        for k in 0..d {
            h_family.push(times(&xa, k));
        }
    }
    (k_family, h_family)
}

fn max_over<T>(family: &[T], norm: impl Fn(&T) -> f64) -> f64 {
    family.iter().map(norm).fold(0.0, f64::max)
}

/// Decay constants of `win` at `epsilon`, maximized over `grid`. Sampled
/// windows use finite differences and are flagged non-rigorous; with
/// `require_rigor` they are rejected instead.
pub fn decay_constants(win: &Window, epsilon: f64, grid: &GridSpec, require_rigor: bool) -> Result<DecayConstants> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter("epsilon must be positive".into()));
    }
    let d = win.dim();
    let (h, k, k_hat, rigorous) = match win {
        Window::Analytic(w) => {
            if grid.dim != d {
                return Err(Error::GridMismatch(format!("window on R^{d}, grid on R^{}", grid.dim)));
            }
            let norm = |f: &SeparableWindow| linf_eps_analytic(f, grid, epsilon);
            let (kf, hf) = families(w, d, |f, j| f.derivative(j), |f, j| f.times_coord(j));
            let (kh, _) = families(&w.fourier(), d, |f, j| f.derivative(j), |f, j| f.times_coord(j));
            (max_over(&hf, norm), max_over(&kf, norm), max_over(&kh, norm), true)
        }
        Window::Sampled(u) => {
            if require_rigor {
                return Err(Error::MissingDerivatives);
            }
            let norm = |f: &GridFunction| linf_eps_sampled(f, epsilon);
            let (kf, hf) = families(u, d, finite_difference, times_coord);
            let (kh, _) = families(&fourier(u), d, finite_difference, times_coord);
            (max_over(&hf, norm), max_over(&kf, norm), max_over(&kh, norm), false)
        }
    };
    Ok(DecayConstants {
        epsilon,
        h,
        k,
        k_hat,
        k_sym: (k * k_hat).sqrt(),
        grid: *grid,
        rigorous,
    })
}

/// Largest relative change of `(h, k, k_hat)` when the grid is refined from
/// `N` to `2N` points per axis. `None` for sampled windows.
pub fn refinement_change(win: &Window, epsilon: f64, grid: &GridSpec) -> Result<Option<f64>> {
    if !win.is_analytic() {
        return Ok(None);
    }
    let coarse = decay_constants(win, epsilon, grid, true)?;
    let fine = decay_constants(
        win,
        epsilon,
        &GridSpec::new(grid.dim, grid.half_width, 2 * grid.n)?,
        true,
    )?;
    let rel = |a: f64, b: f64| {
        if b == 0.0 {
            (a - b).abs()
        } else {
            (a - b).abs() / b.abs()
        }
    };
    Ok(Some(
        rel(coarse.h, fine.h)
            .max(rel(coarse.k, fine.k))
            .max(rel(coarse.k_hat, fine.k_hat)),
    ))
}

// ---------------------------------------------------------------------------
// Envelopes and closed-form bounds

/// `2^{2d+1} d^d (1 + 1/pi)^{d+1}`.
pub fn c_d(d: usize) -> f64 {
    let df = d as f64;
    2f64.powi(2 * d as i32 + 1) * df.powi(d as i32) * (1.0 + 1.0 / PI).powi(d as i32 + 1)
}

/// Pointwise majorant of `|V_g gamma|` built from decay constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub d: usize,
    pub epsilon: f64,
    /// `C_d K_sym(gamma) K_sym(g)`, the value at the origin.
    pub scale: f64,
}

impl Envelope {
    pub fn new(gamma: &DecayConstants, g: &DecayConstants, d: usize) -> Result<Self> {
        if gamma.epsilon != g.epsilon {
            return Err(Error::InvalidParameter(
                "decay constants computed for different epsilon".into(),
            ));
        }
        Ok(Self {
            d,
            epsilon: g.epsilon,
            scale: c_d(d) * gamma.k_sym * g.k_sym,
        })
    }

    /// `p = (1 + eps) / (2d)`; the product envelope decays like
    /// `(1 + |z_i|)^{-1-p}` along every phase-space axis.
    pub fn p(&self) -> f64 {
        (1.0 + self.epsilon) / (2.0 * self.d as f64)
    }

    /// Balanced envelope with radial and per-axis factors in `x` and `omega`.
    pub fn sym(&self, z: &[f64]) -> f64 {
        let d = self.d;
        let df = d as f64;
        let (x, w) = z.split_at(d);
        let radial =
            |v: &[f64]| (1.0 + v.iter().map(|a| a * a).sum::<f64>().sqrt()).powf(-df / 2.0 - self.epsilon / 2.0);
        let axis: f64 = z.iter().map(|a| (1.0 + a.abs()).powf(-0.5 - 0.5 / df)).product();
        self.scale * radial(x) * radial(w) * axis
    }

    /// Product envelope `scale * prod_i (1 + |z_i|)^{-1-p}`, dominating [`Envelope::sym`].
    pub fn hat1(&self, z: &[f64]) -> f64 {
        let e = -1.0 - self.p();
        self.scale * z.iter().map(|a| (1.0 + a.abs()).powf(e)).product::<f64>()
    }
}

/// `C_d [(1 + 4 d theta / (1 + eps))^{2d} - 1] K_sym(gamma) K_sym(g)`.
pub fn series_closed_bound(k_sym_gamma: f64, k_sym_g: f64, d: usize, epsilon: f64, theta: f64) -> f64 {
    let bracket = (1.0 + 4.0 * d as f64 * theta / (1.0 + epsilon)).powi(2 * d as i32) - 1.0;
    c_d(d) * bracket * k_sym_gamma * k_sym_g
}

/// Largest mesh for which the closed-form bound stays below `c0 / C`:
/// `((1+eps)/(4d)) [(c0 / (C_d K K C) + 1)^{1/(2d)} - 1]`.
pub fn theta_max(c0: f64, k_sym_gamma: f64, k_sym_g: f64, d: usize, epsilon: f64, c: f64) -> Result<f64> {
    if !(c0 > 0.0) {
        return Err(Error::NonPositiveInner(c0));
    }
    let df = d as f64;
    let ratio = c0 / (c_d(d) * k_sym_gamma * k_sym_g * c);
    Ok((1.0 + epsilon) / (4.0 * df) * ((ratio + 1.0).powf(1.0 / (2.0 * df)) - 1.0))
}

// ---------------------------------------------------------------------------
// Rigorous tails

/// Upper bound on `sum_{n in Z} (1 + |n| sp)^{-q}` and the exact terms for `|n| <= keep`.
fn axis_series(sp: f64, q: f64, keep: u64) -> (f64, Vec<f64>) {
    let m = SERIES_TERMS.max(keep);
    let term = |n: u64| (1.0 + n as f64 * sp).powf(-q);
    let head: f64 = (1..=m).map(term).sum();
    let tail = 2.0 * (1.0 + m as f64 * sp).powf(1.0 - q) / (sp * (q - 1.0));
    (1.0 + 2.0 * head + tail, (0..=keep).map(term).collect())
}

/// `sum_{|kappa|_1 <= k} prod_i f_i(|kappa_i|)` for even per-axis profiles.
fn ball_sum(profiles: &[Vec<f64>], k: u64) -> f64 {
    let k = k as usize;
    let mut by_radius = vec![0.0; k + 1];
    by_radius[0] = 1.0;
    for f in profiles {
        let mut next = vec![0.0; k + 1];
        for (b, &acc) in by_radius.iter().enumerate() {
            if acc == 0.0 {
                continue;
            }
            for m in 0..=(k - b) {
                let mult = if m == 0 { 1.0 } else { 2.0 };
                next[b + m] += acc * mult * f[m];
            }
        }
        by_radius = next;
    }
    by_radius.iter().sum()
}

/// Exponent `q = 1 + p - s` of the weighted per-axis envelope.
fn tail_exponent(env: &Envelope, w: &PolyWeight) -> Result<f64> {
    let q = 1.0 + env.p() - w.axis_exponent();
    if q <= 1.0 {
        return Err(Error::MethodUnavailable(format!(
            "weight exponent {} is not below the envelope decay {}",
            w.s,
            env.p()
        )));
    }
    Ok(q)
}

/// Per-axis sum over unit cells `c in Z` of `(1 + |c|)^s (1 + dist(0, [c, c+1]))^{-1-p}`,
/// and the part with `-m <= c < m`.
fn cube_axis_sums(env: &Envelope, w: &PolyWeight, m: i64) -> Result<(f64, f64)> {
    let q = tail_exponent(env, w)?;
    let s = w.axis_exponent();
    let e = -1.0 - env.p();
    // cells c >= 0 have dist c; cells c = -k-1 have dist k and |c| = k + 1
    let pair = |k: u64| (1.0 + k as f64).powf(s + e) + (2.0 + k as f64).powf(s) * (1.0 + k as f64).powf(e);
    let len = SERIES_TERMS.max(m.max(0) as u64);
    let inside: f64 = (0..m.max(0) as u64).map(pair).sum();
    let head: f64 = (0..=len).map(pair).sum();
    let lf = len as f64;
    let ratio = ((2.0 + lf) / (1.0 + lf)).powf(s);
    let tail = (1.0 + ratio) * (1.0 + lf).powf(1.0 - q) / (q - 1.0);
    Ok((head + tail, inside))
}

/// Bound on `sum_{|kappa| > k} v(z) E(z)` over adjoint points `z = J L^{-T} kappa`.
///
/// Diagonal lattices sum the product envelope exactly inside the ball and
/// compare the outside with a one-dimensional integral. Other lattices bound
/// the outside by unit cubes leaving the box `|z|_inf < (k+1)/mu`, with
/// `mu` the absolute entry sum of `(J L^{-T})^{-1}`, times the cube count.
pub fn lattice_tail(env: &Envelope, lat: &Lattice, w: &PolyWeight, k: u64) -> Result<f64> {
    let q = tail_exponent(env, w)?;
    let adj = lat.adjoint_lattice();
    let n = adj.n();
    if let Some((alpha, beta)) = lat.diag() {
        let spacings: Vec<f64> = beta
            .iter()
            .map(|b| 1.0 / b)
            .chain(alpha.iter().map(|a| 1.0 / a))
            .collect();
        let mut full = 1.0;
        let mut profiles = Vec::with_capacity(n);
        for sp in spacings {
            let (total, head) = axis_series(sp, q, k);
            full *= total;
            profiles.push(head);
        }
        return Ok(env.scale * (full - ball_sum(&profiles, k)).max(0.0));
    }
    let mu: f64 = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| adj.inverse_entry(i, j).abs())
        .sum();
    let rho = (k + 1) as f64 / mu;
    let m = (rho.ceil() as i64 - 1).max(0);
    let (all, inside) = cube_axis_sums(env, w, m)?;
    let outside = all.powi(n as i32) - inside.powi(n as i32);
    Ok(env.scale * counting_bound(&adj) as f64 * outside.max(0.0))
}

// ---------------------------------------------------------------------------
// Series and Wiener norms

/// `sum_{|kappa| <= K} v(J L^{-T} kappa) |V_g gamma(J L^{-T} kappa)| + tail`.
pub fn sigma_gabor(samples: &StftSamples, w: &PolyWeight, tail: f64) -> f64 {
    samples
        .samples
        .iter()
        .map(|s| w.eval(&s.point) * s.value().norm())
        .sum::<f64>()
        + tail
}

/// The same sum without the `kappa = 0` term.
pub fn sigma_without_zero(samples: &StftSamples, w: &PolyWeight) -> f64 {
    samples
        .samples
        .iter()
        .filter(|s| s.kappa.iter().any(|&k| k != 0))
        .map(|s| w.eval(&s.point) * s.value().norm())
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeSup {
    /// Lower-left vertex `(r, s)`.
    pub cube: Vec<i64>,
    pub sup: f64,
}

/// Per-cube sup table of `|V_g gamma|` on a box of unit cubes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WienerTable {
    /// Cubes along each phase-space axis run over `-region[i] .. region[i]-1`.
    pub region: Vec<i64>,
    pub cubes: Vec<CubeSup>,
    /// `sum v(r, s) sup_{Q_(r,s)} |V|` over the box.
    pub partial: f64,
    pub weight: PolyWeight,
    /// Translation nodes per unit length.
    pub sub: usize,
    pub grid: GridSpec,
}

impl WienerTable {
    pub fn sup(&self, cube: &[i64]) -> Option<f64> {
        self.cubes.iter().find(|c| c.cube == cube).map(|c| c.sup)
    }
}

/// Integer cells whose closed unit cube contains `v`.
fn cells_of(v: f64) -> [Option<i64>; 2] {
    let f = v.floor();
    let c = f as i64;
    [Some(c), (v == f).then_some(c - 1)]
}

/// Per-cube maxima of `|V_g gamma|` from one grid transform per translation.
/// Translations run over `[-R, R)^d` with step `1/sub`; frequencies over the
/// dual grid. Sub-grid maxima bound the true sups from below.
pub fn wiener_norm_stft(
    gamma: &Window,
    g: &Window,
    w: &PolyWeight,
    quad: &GridSpec,
    sub: usize,
) -> Result<WienerTable> {
    let d = quad.dim;
    if gamma.dim() != d || g.dim() != d {
        return Err(Error::GridMismatch("window and grid dimensions differ".into()));
    }
    let h = quad.spacing();
    let stride = 1.0 / (sub as f64 * h);
    if sub == 0 || (stride - stride.round()).abs() > 1e-9 || stride.round() < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "sub-grid step 1/{sub} is not a multiple of the grid spacing {h}"
        )));
    }
    let stride = stride.round() as usize;
    let freq = quad.frequency();
    let rx = quad.half_width.floor() as i64;
    let rw = freq.half_width.floor() as i64;
    if rx < 1 || rw < 1 {
        return Err(Error::InvalidParameter("grid too small for a unit-cube table".into()));
    }
    let region: Vec<i64> = (0..2 * d).map(|i| if i < d { rx } else { rw }).collect();
    let sides: Vec<usize> = region.iter().map(|r| 2 * *r as usize).collect();
    let total: usize = sides.iter().product();
    let flat_of = |cube: &[i64]| -> Option<usize> {
        let mut f = 0usize;
        for (i, &c) in cube.iter().enumerate() {
            if c < -region[i] || c >= region[i] {
                return None;
            }
            f = f * sides[i] + (c + region[i]) as usize;
        }
        Some(f)
    };
    let gamma_s = gamma.sample(quad)?;
    let plans = FftPair::new(quad.n);
    let per_axis = quad.n.div_ceil(stride);
    let translations = per_axis.pow(d as u32);
    let freq_cells: Vec<Vec<[Option<i64>; 2]>> = (0..freq.len())
        .map(|m| freq.point(m).into_iter().map(cells_of).collect())
        .collect();
    let table = (0..translations)
        .into_par_iter()
        .map(|t| -> Result<Vec<f64>> {
            let mut rem = t;
            let mut idx = vec![0usize; d];
            for k in (0..d).rev() {
                idx[k] = (rem % per_axis) * stride;
                rem /= per_axis;
            }
            let x: Vec<f64> = idx.iter().map(|&i| quad.coord(i)).collect();
            let gs = g.sample_shifted(quad, &x)?;
            let prod = GridFunction {
                spec: *quad,
                data: gamma_s.data.iter().zip(&gs.data).map(|(a, b)| a * b.conj()).collect(),
            };
            let row = fourier_with(&prod, &plans);
            let x_cells: Vec<[Option<i64>; 2]> = x.iter().map(|&v| cells_of(v)).collect();
            let mut best = vec![0.0; total];
            let mut cube = vec![0i64; 2 * d];
            for (m, v) in row.data.iter().enumerate() {
                let a = v.norm();
                if a == 0.0 {
                    continue;
                }
                let cells: Vec<&[Option<i64>; 2]> = x_cells.iter().chain(&freq_cells[m]).collect();
                for mask in 0..(1usize << (2 * d)) {
                    let mut ok = true;
                    for (i, c) in cells.iter().enumerate() {
                        match c[mask >> i & 1] {
                            Some(v) => cube[i] = v,
                            None => {
                                ok = false;
                                break;
                            }
                        }
                    }
                    if !ok {
                        continue;
                    }
                    if let Some(f) = flat_of(&cube) {
                        if a > best[f] {
                            best[f] = a;
                        }
                    }
                }
            }
            Ok(best)
        })
        .try_reduce(
            || vec![0.0; total],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x = x.max(y));
                Ok(a)
            },
        )?;
    let mut cubes = Vec::with_capacity(total);
    let mut partial = 0.0;
    for (f, &sup) in table.iter().enumerate() {
        let mut rem = f;
        let mut cube = vec![0i64; 2 * d];
        for i in (0..2 * d).rev() {
            cube[i] = (rem % sides[i]) as i64 - region[i];
            rem /= sides[i];
        }
        let r: Vec<f64> = cube.iter().map(|&c| c as f64).collect();
        partial += w.eval(&r) * sup;
        cubes.push(CubeSup { cube, sup });
    }
    Ok(WienerTable {
        region,
        cubes,
        partial,
        weight: *w,
        sub,
        grid: *quad,
    })
}

/// Envelope bound on `sum v(c) sup_{Q_c} |V|` over cubes outside the table's box.
pub fn wiener_tail(env: &Envelope, table: &WienerTable) -> Result<f64> {
    let mut all = 1.0;
    let mut inside = 1.0;
    for &r in &table.region {
        let (a, i) = cube_axis_sums(env, &table.weight, r)?;
        all *= a;
        inside *= i;
    }
    Ok(env.scale * (all - inside).max(0.0))
}

/// `C_{J L^{-T}, v} (partial + tail - excluded)` for `diag(alpha, beta)`,
/// where `excluded` collects the cubes holding no nonzero adjoint point.
pub fn refined_sigma_diag(table: &WienerTable, alpha: &[f64], beta: &[f64], tail: f64) -> Result<f64> {
    let d = alpha.len();
    let adj = Lattice::diagonal(alpha, beta)?.adjoint_lattice();
    let excluded: f64 = table
        .cubes
        .iter()
        .filter(|c| cube_exclusion(alpha, beta, &c.cube[..d], &c.cube[d..]))
        .map(|c| {
            let r: Vec<f64> = c.cube.iter().map(|&v| v as f64).collect();
            table.weight.eval(&r) * c.sup
        })
        .sum();
    Ok(c_lv(&adj, &table.weight) * (table.partial + tail - excluded).max(0.0))
}

// ---------------------------------------------------------------------------
// Certificates

/// `C sigma / |det L|`.
pub fn boundedness_cert(sigma: f64, lat: &Lattice, c: f64) -> f64 {
    c * sigma / lat.volume()
}

/// Invertibility holds iff `C * nonzero < |c0|`; the inverse-norm bound is
/// `|det L| / ((1 + C)|c0| - C sigma_full)` when that denominator is positive.
pub fn invertibility_cert(
    c0: C64,
    nonzero: f64,
    c: f64,
    lat: &Lattice,
    sigma_full: f64,
) -> Result<(bool, Option<f64>)> {
    let a = c0.norm();
    if a == 0.0 {
        return Err(Error::ZeroInner);
    }
    let invertible = c * nonzero < a;
    let denom = (1.0 + c) * a - c * sigma_full;
    Ok((invertible, (invertible && denom > 0.0).then(|| lat.volume() / denom)))
}

/// `A = (2||g||^2 - sigma) / |det L|`, `B = sigma / |det L|`, requiring
/// `sigma - ||g||^2 < ||g||^2`.
pub fn frame_bounds(norm2: f64, sigma: f64, lat: &Lattice) -> Result<(f64, f64)> {
    let nonzero = sigma - norm2;
    if !(nonzero < norm2) {
        return Err(Error::ConditionFailed {
            lhs: nonzero,
            rhs: norm2,
        });
    }
    let v = lat.volume();
    Ok(((2.0 * norm2 - sigma) / v, sigma / v))
}

/// Frame bounds from the closed-form mesh bound `b` on the `kappa != 0` part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshFrameBounds {
    /// `(||g||^2 - b) / prod(alpha beta)`.
    pub a: f64,
    /// `2 ||g||^2 / prod(alpha beta)`, the majorant of `sigma / prod(alpha beta)`.
    pub b: f64,
    /// `(2 ||g||^2 - b) / prod(alpha beta)`: counts the `kappa = 0` term twice
    /// and can exceed the optimal lower bound.
    pub a_doubled: f64,
}

pub fn mesh_frame_bounds(norm2: f64, closed: f64, lat: &Lattice) -> Result<MeshFrameBounds> {
    if !(closed < norm2) {
        return Err(Error::ConditionFailed {
            lhs: closed,
            rhs: norm2,
        });
    }
    let v = lat.volume();
    Ok(MeshFrameBounds {
        a: (norm2 - closed) / v,
        b: 2.0 * norm2 / v,
        a_doubled: (2.0 * norm2 - closed) / v,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Direct lattice sum plus an envelope tail.
    LatticeSum,
    /// Closed-form bound in the maximal mesh (diagonal lattices, `s = 0`).
    Binomial,
    /// Wiener cube table with excluded cubes removed (diagonal lattices).
    DiagRefined,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lattice-sum" => Ok(Method::LatticeSum),
            "binomial" => Ok(Method::Binomial),
            "diag-refined" => Ok(Method::DiagRefined),
            other => Err(Error::InvalidParameter(format!("unknown method '{other}'"))),
        }
    }
}

/// Everything a certification run needs.
#[derive(Debug, Clone)]
pub struct CertifyInput<'a> {
    pub g: &'a Window,
    pub gamma: &'a Window,
    pub lattice: &'a Lattice,
    pub weight: PolyWeight,
    pub epsilon: f64,
    /// Norm constant of time-frequency shifts on the target space; 1 on `L^2`.
    pub c: f64,
    /// Truncation radius of direct lattice sums.
    pub radius: u64,
    pub quad: GridSpec,
    pub method: Method,
    /// Translation nodes per unit length for Wiener tables.
    pub sub: usize,
    pub require_rigor: bool,
}

/// How the `kappa != 0` part of the series was bounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesBound {
    pub method: Method,
    /// Directly summed `0 < |kappa| <= K` part, when computed.
    pub direct: Option<f64>,
    /// Rigorous remainder added to the computed part.
    pub tail: f64,
    /// Rigorous bound on `sum_{kappa != 0} v |V_g gamma|`.
    pub nonzero: f64,
    /// `v(0)|c0| + nonzero`.
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    pub epsilon: f64,
    pub nonzero: Option<f64>,
    pub theta0: Option<f64>,
    pub invertible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaReport {
    /// `max_j {alpha_j, beta_j}` for diagonal lattices.
    pub mesh: Option<f64>,
    /// Mesh threshold below which the closed-form bound certifies invertibility.
    pub theta0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub lattice: Lattice,
    pub d: usize,
    pub weight: PolyWeight,
    pub epsilon: f64,
    pub c: f64,
    pub symmetric: bool,
    pub c0_re: f64,
    pub c0_im: f64,
    pub norm2_g: f64,
    pub constants_g: DecayConstants,
    pub constants_gamma: DecayConstants,
    pub series: SeriesBound,
    /// `|c0| - C * nonzero`.
    pub margin: f64,
    pub bounded: bool,
    pub norm_bound: f64,
    pub invertible: bool,
    pub inverse_norm_bound: Option<f64>,
    pub frame: bool,
    pub a: Option<f64>,
    pub b: Option<f64>,
    /// Closed-form mesh variant of the frame bounds (diagonal lattices).
    pub mesh_bounds: Option<MeshFrameBounds>,
    pub theta: ThetaReport,
    pub sensitivity: Vec<Sensitivity>,
    /// Relative change of decay constants under grid doubling.
    pub refinement: Option<f64>,
    /// True when every ingredient is rigorous up to grid resolution.
    pub rigorous: bool,
    pub notes: Vec<String>,
}

impl Certificate {
    pub fn c0(&self) -> C64 {
        C64::new(self.c0_re, self.c0_im)
    }

    /// `frame => invertible => bounded` and `0 < A <= B` when framed.
    pub fn chain_holds(&self) -> bool {
        let frame_ok =
            !self.frame || (self.invertible && matches!((self.a, self.b), (Some(a), Some(b)) if a > 0.0 && a <= b));
        frame_ok && (!self.invertible || self.bounded)
    }
}

/// The part of the `kappa != 0` bound that depends on the envelope, so that
/// it can be re-evaluated for other `epsilon`.
enum Computed {
    Direct(f64),
    Closed(f64),
    Table(WienerTable),
}

fn nonzero_bound(
    input: &CertifyInput<'_>,
    computed: &Computed,
    env: &Envelope,
    k_gamma: f64,
    k_g: f64,
) -> Result<(Option<f64>, f64, f64)> {
    let lat = input.lattice;
    match computed {
        Computed::Direct(direct) => {
            let tail = lattice_tail(env, lat, &input.weight, input.radius)?;
            Ok((Some(*direct), tail, direct + tail))
        }
        Computed::Closed(mesh) => {
            let b = series_closed_bound(k_gamma, k_g, lat.d(), env.epsilon, *mesh);
            Ok((None, 0.0, b))
        }
        Computed::Table(table) => {
            let (alpha, beta) = lat.diag().expect("table method needs a diagonal lattice");
            let tail = wiener_tail(env, table)?;
            let b = refined_sigma_diag(table, alpha, beta, tail)?;
            Ok((Some(table.partial), tail, b))
        }
    }
}

/// Runs the full certification pipeline.
pub fn certify(input: &CertifyInput<'_>) -> Result<Certificate> {
    let lat = input.lattice;
    let d = lat.d();
    if input.g.dim() != d || input.gamma.dim() != d || input.quad.dim != d {
        return Err(Error::GridMismatch("windows, lattice and grid disagree on d".into()));
    }
    if !(input.c > 0.0) {
        return Err(Error::InvalidParameter("the constant C must be positive".into()));
    }
    let symmetric = input.g == input.gamma;
    let mut notes = Vec::new();
    let const_g = decay_constants(input.g, input.epsilon, &input.quad, input.require_rigor)?;
    let const_gamma = if symmetric {
        const_g
    } else {
        decay_constants(input.gamma, input.epsilon, &input.quad, input.require_rigor)?
    };
    let env = Envelope::new(&const_gamma, &const_g, d)?;
    let engine = StftEngine::new(input.gamma, input.g, input.quad)?;
    let c0 = engine.eval(&vec![0.0; 2 * d])?;
    let norm2_g = input.g.norm_sqr(&input.quad)?;
    if c0.norm() == 0.0 {
        return Err(Error::ZeroInner);
    }

    let computed = match input.method {
        Method::LatticeSum => {
            let samples = samples_with(&engine, lat, input.radius)?;
            Computed::Direct(sigma_without_zero(&samples, &input.weight))
        }
        Method::Binomial => {
            let mesh = lat
                .max_mesh()
                .ok_or_else(|| Error::MethodUnavailable("the closed-form bound needs a diagonal lattice".into()))?;
            if input.weight.s != 0.0 {
                return Err(Error::MethodUnavailable(
                    "the closed-form bound is unweighted (s = 0)".into(),
                ));
            }
            Computed::Closed(mesh)
        }
        Method::DiagRefined => {
            if lat.diag().is_none() {
                return Err(Error::MethodUnavailable(
                    "the cube refinement needs a diagonal lattice".into(),
                ));
            }
            notes.push("cube sups are sub-grid maxima".into());
            Computed::Table(wiener_norm_stft(
                input.gamma,
                input.g,
                &input.weight,
                &input.quad,
                input.sub,
            )?)
        }
    };
    let (direct, tail, nonzero) = nonzero_bound(input, &computed, &env, const_gamma.k_sym, const_g.k_sym)?;
    let sigma = c0.norm() + nonzero;
    let series = SeriesBound {
        method: input.method,
        direct,
        tail,
        nonzero,
        sigma,
    };

    let refinement = {
        let rg = refinement_change(input.g, input.epsilon, &input.quad)?;
        let rgam = if symmetric {
            rg
        } else {
            refinement_change(input.gamma, input.epsilon, &input.quad)?
        };
        match (rg, rgam) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        }
    };
    let refined_ok = refinement.is_some_and(|r| r < REFINEMENT_TOLERANCE);
    if !refined_ok {
        notes.push(match refinement {
            Some(r) => format!("decay constants moved by {r:.2e} under grid doubling; no claim emitted"),
            None => "decay constants of sampled windows are finite-difference estimates; no claim emitted".into(),
        });
    }
    let rigorous = const_g.rigorous && const_gamma.rigorous && refined_ok;

    let norm_bound = boundedness_cert(sigma, lat, input.c);
    let bounded = norm_bound.is_finite();
    let (inv, inverse_norm_bound) = invertibility_cert(c0, nonzero, input.c, lat, sigma)?;
    let invertible = inv && refined_ok;
    let (frame, a, b) = match (symmetric && invertible, frame_bounds(norm2_g, norm2_g + nonzero, lat)) {
        (true, Ok((a, b))) if a > 0.0 => (true, Some(a), Some(b)),
        _ => (false, None, None),
    };

    let mesh = lat.max_mesh();
    let theta0 =
        mesh.and_then(|_| theta_max(c0.norm(), const_gamma.k_sym, const_g.k_sym, d, input.epsilon, input.c).ok());
    let mesh_bounds = match (mesh, symmetric) {
        (Some(m), true) => {
            let closed = series_closed_bound(const_gamma.k_sym, const_g.k_sym, d, input.epsilon, m);
            mesh_frame_bounds(norm2_g, closed, lat).ok()
        }
        _ => None,
    };

    let mut sensitivity = Vec::new();
    for eps in [input.epsilon / 2.0, 2.0 * input.epsilon] {
        let cg = decay_constants(input.g, eps, &input.quad, input.require_rigor)?;
        let cgam = if symmetric {
            cg
        } else {
            decay_constants(input.gamma, eps, &input.quad, input.require_rigor)?
        };
        let env_e = Envelope::new(&cgam, &cg, d)?;
        let nz = nonzero_bound(input, &computed, &env_e, cgam.k_sym, cg.k_sym)
            .ok()
            .map(|r| r.2);
        sensitivity.push(Sensitivity {
            epsilon: eps,
            nonzero: nz,
            theta0: mesh.and_then(|_| theta_max(c0.norm(), cgam.k_sym, cg.k_sym, d, eps, input.c).ok()),
            invertible: nz.is_some_and(|v| input.c * v < c0.norm()),
        });
    }

    let cert = Certificate {
        lattice: lat.clone(),
        d,
        weight: input.weight,
        epsilon: input.epsilon,
        c: input.c,
        symmetric,
        c0_re: c0.re,
        c0_im: c0.im,
        norm2_g,
        constants_g: const_g,
        constants_gamma: const_gamma,
        series,
        margin: c0.norm() - input.c * nonzero,
        bounded,
        norm_bound,
        invertible,
        inverse_norm_bound: inverse_norm_bound.filter(|_| invertible),
        frame,
        a,
        b,
        mesh_bounds,
        theta: ThetaReport { mesh, theta0 },
        sensitivity,
        refinement,
        rigorous,
        notes,
    };
    assert!(cert.chain_holds(), "certificate implication chain violated");
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad() -> GridSpec {
        GridSpec::new(1, 8.0, 1024).unwrap()
    }

    #[test]
    fn gaussian_constants() {
        let g = Window::gaussian(1, 1.0);
        let c = decay_constants(&g, 1.0, &quad(), true).unwrap();
        assert!((c.h - 1.284_02).abs() < 1e-4, "{}", c.h);
        // grid maxima approach the true sup from below
        assert!(
            c.k <= 8.336_050 && c.k > 8.336_05 * (1.0 - REFINEMENT_TOLERANCE),
            "{}",
            c.k
        );
        assert_eq!(c.k, c.k_hat);
        assert_eq!(c.k_sym, (c.k * c.k_hat).sqrt());
        let r = refinement_change(&g, 1.0, &quad()).unwrap().unwrap();
        assert!(r < REFINEMENT_TOLERANCE);
    }

    #[test]
    fn sampled_windows_are_not_rigorous() {
        let spec = GridSpec::new(1, 4.0, 64).unwrap();
        let chi = Window::indicator(spec, 0.0, 1.0);
        assert!(matches!(
            decay_constants(&chi, 1.0, &spec, true),
            Err(Error::MissingDerivatives)
        ));
        assert!(!decay_constants(&chi, 1.0, &spec, false).unwrap().rigorous);
    }

    #[test]
    fn constant_cd() {
        assert!((c_d(1) - 13.903_527_648_079_354).abs() < 1e-12);
        assert!((series_closed_bound(1.0, 1.0, 1, 1.0, 0.5) - 41.710_582_944_238_06).abs() < 1e-9);
        assert_eq!(series_closed_bound(1.0, 1.0, 1, 1.0, 0.0), 0.0);
    }

    #[test]
    fn theta_threshold() {
        assert!(matches!(
            theta_max(0.0, 1.0, 1.0, 1, 1.0, 1.0),
            Err(Error::NonPositiveInner(_))
        ));
        let k = 8.336_049_880_851_354;
        let t0 = theta_max(0.5f64.sqrt(), k, k, 1, 1.0, 1.0).unwrap();
        assert!((t0 - 1.829_363_272_6e-4).abs() < 1e-12, "{t0}");
        let b = series_closed_bound(k, k, 1, 1.0, t0 * (1.0 - 1e-3));
        assert!(b < 0.5f64.sqrt());
        assert!(theta_max(0.8, k, k, 1, 1.0, 1.0).unwrap() > t0);
    }

    #[test]
    fn envelope_dominates_gaussian() {
        let g = Window::gaussian(1, 1.0);
        let c = decay_constants(&g, 1.0, &quad(), true).unwrap();
        let env = Envelope::new(&c, &c, 1).unwrap();
        assert_eq!(env.sym(&[0.0, 0.0]), env.scale);
        for i in -40..40 {
            for j in -40..40 {
                let z = [i as f64 * 0.2, j as f64 * 0.2];
                let v = 0.5f64.sqrt() * (-PI * (z[0] * z[0] + z[1] * z[1]) / 2.0).exp();
                assert!(v <= env.sym(&z) && env.sym(&z) <= env.hat1(&z) * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn ball_sums() {
        let f = vec![1.0, 0.5, 0.25];
        // |k| <= 1 in Z^2: 1 + 4 * 0.5
        assert!((ball_sum(&[f.clone(), f.clone()], 1) - 3.0).abs() < 1e-15);
        assert!((ball_sum(&[f], 2) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn lattice_tail_shrinks() {
        let g = Window::gaussian(1, 1.0);
        let c = decay_constants(&g, 1.0, &quad(), true).unwrap();
        let env = Envelope::new(&c, &c, 1).unwrap();
        let lat = Lattice::diagonal(&[0.5], &[0.5]).unwrap();
        let w = PolyWeight::unit();
        let t: Vec<f64> = [0, 4, 16, 64]
            .iter()
            .map(|&k| lattice_tail(&env, &lat, &w, k).unwrap())
            .collect();
        assert!(t.windows(2).all(|p| p[1] < p[0]));
        // with K = 0 the tail is the closed sum over all nonzero points, which
        // the binomial bound majorizes
        assert!(t[0] <= series_closed_bound(c.k_sym, c.k_sym, 1, 1.0, 0.5));
        // a non-diagonal lattice goes through the cube bound
        let shear = Lattice::new(&[vec![0.5, 0.1], vec![0.0, 0.5]]).unwrap();
        assert!(lattice_tail(&env, &shear, &w, 64).unwrap() < lattice_tail(&env, &shear, &w, 8).unwrap());
        assert!(matches!(
            lattice_tail(&env, &lat, &PolyWeight::new(1.5), 4),
            Err(Error::MethodUnavailable(_))
        ));
    }

    #[test]
    fn certificate_values() {
        assert!((boundedness_cert(0.7071, &Lattice::diagonal(&[0.5], &[0.5]).unwrap(), 1.0) - 2.8284).abs() < 1e-12);
        let id = Lattice::diagonal(&[1.0], &[1.0]).unwrap();
        let (inv, bound) = invertibility_cert(C64::new(1.0, 0.0), 0.0, 1.0, &id, 1.0).unwrap();
        assert!(inv && bound == Some(1.0));
        let (inv, bound) = invertibility_cert(C64::new(1.0, 0.0), 1.0, 1.0, &id, 2.0).unwrap();
        assert!(!inv && bound.is_none());
        assert!(matches!(
            invertibility_cert(C64::new(0.0, 0.0), 0.0, 1.0, &id, 0.0),
            Err(Error::ZeroInner)
        ));
        assert!(matches!(
            frame_bounds(1.0, 2.0, &id),
            Err(Error::ConditionFailed { .. })
        ));
        let (a, b) = frame_bounds(1.0, 1.25, &id).unwrap();
        assert_eq!((a, b), (0.75, 1.25));
    }

    #[test]
    fn wiener_table_gaussian() {
        let g = Window::gaussian(1, 1.0);
        let spec = GridSpec::new(1, 8.0, 256).unwrap();
        let t = wiener_norm_stft(&g, &g, &PolyWeight::unit(), &spec, 8).unwrap();
        assert_eq!(t.region, vec![8, 8]);
        assert!((t.sup(&[0, 0]).unwrap() - 0.5f64.sqrt()).abs() < 1e-9);
        for k in 0..6 {
            assert!(t.sup(&[k + 1, 0]).unwrap() < t.sup(&[k, 0]).unwrap());
            assert!(t.sup(&[0, k + 1]).unwrap() < t.sup(&[0, k]).unwrap());
        }
        let c = decay_constants(&g, 1.0, &spec, true).unwrap();
        let env = Envelope::new(&c, &c, 1).unwrap();
        let tail = wiener_tail(&env, &t).unwrap();
        let coarse = refined_sigma_diag(&t, &[0.5], &[0.5], tail).unwrap();
        let fine = refined_sigma_diag(&t, &[0.25], &[0.25], tail).unwrap();
        assert!(fine <= coarse);
        assert!(coarse <= t.partial + tail);
    }

    fn input<'a>(g: &'a Window, lat: &'a Lattice, method: Method) -> CertifyInput<'a> {
        CertifyInput {
            g,
            gamma: g,
            lattice: lat,
            weight: PolyWeight::unit(),
            epsilon: 1.0,
            c: 1.0,
            radius: 20,
            quad: GridSpec::new(1, 8.0, 512).unwrap(),
            method,
            sub: 4,
            require_rigor: true,
        }
    }

    #[test]
    fn gaussian_below_threshold_certifies() {
        let g = Window::gaussian(1, 1.0);
        let t = 1.829e-4 / 2.0;
        let lat = Lattice::diagonal(&[t], &[t]).unwrap();
        let cert = certify(&input(&g, &lat, Method::Binomial)).unwrap();
        assert!(cert.frame && cert.invertible && cert.bounded && cert.rigorous);
        let (a, b) = (cert.a.unwrap(), cert.b.unwrap());
        let exact = 0.5f64.sqrt() / lat.volume();
        assert!(a < exact && exact < b);
        assert_eq!(cert.sensitivity.len(), 2);
    }

    #[test]
    fn critical_density_is_inconclusive() {
        let g = Window::gaussian(1, 1.0);
        let lat = Lattice::diagonal(&[1.0], &[1.0]).unwrap();
        for method in [Method::LatticeSum, Method::Binomial] {
            let cert = certify(&input(&g, &lat, method)).unwrap();
            assert!(!cert.invertible && !cert.frame && cert.a.is_none());
        }
    }
}
