//! Counting lattice points in unit cubes, the constant `C_{L,v}` and the
//! lattice sampling bound `sum v(L k)|f(L k)| <= C_{L,v} ||f||_{W(L^1_v)}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{ell1_ball, Lattice};
use crate::weight::PolyWeight;

/// Integers in the closed interval `[a, b]` and the bound `[b - a] + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalCount {
    pub count: u64,
    pub bound: u64,
}

pub fn integers_in_interval(a: f64, b: f64) -> Result<IntervalCount> {
    if a > b || !a.is_finite() || !b.is_finite() {
        return Err(Error::EmptyInterval { a, b });
    }
    let lo = a.ceil();
    let hi = b.floor();
    let count = if lo <= hi { (hi - lo) as u64 + 1 } else { 0 };
    Ok(IntervalCount {
        count,
        bound: (b - a).floor() as u64 + 1,
    })
}

/// Slack for closed-cube membership tests.
const MEMBERSHIP_TOL: f64 = 1e-12;

/// Number of `kappa` with `L kappa` in the closed cube `r + [0,1]^n`,
/// enumerated over the bounding box of `L^{-1}` applied to the cube.
pub fn count_lattice_in_cube(lat: &Lattice, r: &[i64]) -> u64 {
    let n = lat.n();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for mask in 0..(1usize << n) {
        let vertex: Vec<f64> = (0..n).map(|j| r[j] as f64 + ((mask >> j) & 1) as f64).collect();
        let pre = lat.solve(&vertex);
        for j in 0..n {
            lo[j] = lo[j].min(pre[j]);
            hi[j] = hi[j].max(pre[j]);
        }
    }
    let lo: Vec<i64> = lo.iter().map(|v| v.floor() as i64 - 1).collect();
    let hi: Vec<i64> = hi.iter().map(|v| v.ceil() as i64 + 1).collect();
    let mut kappa = lo.clone();
    let mut count = 0;
    loop {
        let z = lat.point(&kappa);
        let inside = z.iter().zip(r).all(|(x, &ri)| {
            let ri = ri as f64;
            *x >= ri - MEMBERSHIP_TOL && *x <= ri + 1.0 + MEMBERSHIP_TOL
        });
        if inside {
            count += 1;
        }
        // odometer step
        let mut j = 0;
        loop {
            if j == n {
                return count;
            }
            kappa[j] += 1;
            if kappa[j] <= hi[j] {
                break;
            }
            kappa[j] = lo[j];
            j += 1;
        }
    }
}

/// `prod_j ([sum_i |a^{ij} / det L|] + 1)` with `a^{ij}` the cofactors of `L`.
pub fn counting_bound(lat: &Lattice) -> u64 {
    let n = lat.n();
    let det = lat.det();
    (0..n)
        .map(|j| {
            let s: f64 = (0..n).map(|i| (lat.cofactor(i, j) / det).abs()).sum();
            // guard against sums like 0.9999999999 that are exactly 1
            (s + 1e-12).floor() as u64 + 1
        })
        .product()
}

/// `C_{L,v} = M_v * counting_bound(L)`.
pub fn c_lv(lat: &Lattice, w: &PolyWeight) -> f64 {
    w.unit_cube_max(lat.n()) * counting_bound(lat) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountReport {
    pub lattice: Lattice,
    pub cube: Vec<i64>,
    pub brute_count: u64,
    pub bound: u64,
    pub c_lv: f64,
}

pub fn count_report(lat: &Lattice, r: &[i64], w: &PolyWeight) -> CountReport {
    CountReport {
        lattice: lat.clone(),
        cube: r.to_vec(),
        brute_count: count_lattice_in_cube(lat, r),
        bound: counting_bound(lat),
        c_lv: c_lv(lat, w),
    }
}

/// Whether the cube with lower-left vertex `(r, s)` contains no nonzero point
/// `(-k/beta, h/alpha)` of the adjoint of `diag(alpha, beta)`, cubes being
/// half-open. The `x`-index `r` is paired with the `x`-spacing `1/beta`, and
/// `s` with `1/alpha`.
pub fn cube_exclusion(alpha: &[f64], beta: &[f64], r: &[i64], s: &[i64]) -> bool {
    (0..alpha.len()).all(|j| {
        let bx = (1.0 / beta[j]).floor() as i64;
        let bw = (1.0 / alpha[j]).floor() as i64;
        r[j].abs() < bx && s[j].abs() < bw
    })
}

/// Both sides of the sampling inequality for `|f|` over `|kappa| <= k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingCheck {
    pub lhs: f64,
    pub rhs: f64,
}

/// `lhs = sum_{|kappa| <= k} v(L kappa)|f(L kappa)|` and
/// `rhs = C_{L,v} sum_r v(r) sup_{Q_r} |f|` over the cubes met by those points.
/// Cube sups are maxima over a `sub^n` sub-grid together with the lattice
/// points inside the cube.
pub fn sampling_sum_check<F>(f: F, lat: &Lattice, w: &PolyWeight, k: u64, sub: usize) -> SamplingCheck
where
    F: Fn(&[f64]) -> f64,
{
    use std::collections::BTreeMap;
    let n = lat.n();
    let mut lhs = 0.0;
    let mut sups: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    for kappa in ell1_ball(n, k) {
        let z = lat.point(&kappa);
        let fz = f(&z).abs();
        lhs += w.eval(&z) * fz;
        let cube: Vec<i64> = z.iter().map(|v| v.floor() as i64).collect();
        let e = sups.entry(cube).or_insert(0.0);
        *e = e.max(fz);
    }
    let sub = sub.max(1);
    let nodes = (sub + 1).pow(n as u32);
    for (cube, best) in sups.iter_mut() {
        for m in 0..nodes {
            let mut rem = m;
            let z: Vec<f64> = (0..n)
                .map(|j| {
                    let i = rem % (sub + 1);
                    rem /= sub + 1;
                    cube[j] as f64 + i as f64 / sub as f64
                })
                .collect();
            *best = best.max(f(&z).abs());
        }
    }
    let wiener: f64 = sups
        .iter()
        .map(|(cube, s)| {
            let r: Vec<f64> = cube.iter().map(|&c| c as f64).collect();
            w.eval(&r) * s
        })
        .sum();
    SamplingCheck {
        lhs,
        rhs: c_lv(lat, w) * wiener,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: [[f64; 2]; 2]) -> Lattice {
        Lattice::new(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn intervals() {
        assert_eq!(
            integers_in_interval(0.3, 2.7).unwrap(),
            IntervalCount { count: 2, bound: 3 }
        );
        assert_eq!(
            integers_in_interval(1.0, 1.0).unwrap(),
            IntervalCount { count: 1, bound: 1 }
        );
        assert_eq!(integers_in_interval(0.2, 0.9).unwrap().count, 0);
        for k in 0..6 {
            let c = integers_in_interval(0.0, k as f64).unwrap();
            assert_eq!(c.count, c.bound);
        }
        assert!(matches!(
            integers_in_interval(2.0, 1.0),
            Err(Error::EmptyInterval { .. })
        ));
    }

    #[test]
    fn cube_counts() {
        let id = m([[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(count_lattice_in_cube(&id, &[0, 0]), 4);
        assert_eq!(counting_bound(&id), 4);
        let two = m([[2.0, 0.0], [0.0, 2.0]]);
        assert_eq!(count_lattice_in_cube(&two, &[0, 0]), 1);
        assert_eq!(counting_bound(&two), 1);
        let rot = m([[1.0, -1.0], [1.0, 1.0]]);
        assert!(count_lattice_in_cube(&rot, &[0, 0]) <= 4);
        assert_eq!(counting_bound(&rot), 4);
    }

    #[test]
    fn constants() {
        let id = m([[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(c_lv(&id, &PolyWeight::unit()), 4.0);
        assert!((c_lv(&id, &PolyWeight::new(1.0)) - 9.656_854_249_492_38).abs() < 1e-12);
        // J L^{-T} for diag(alpha, beta) reproduces M_v prod([alpha]+1)([beta]+1)
        for (a, b) in [(0.5, 0.25), (1.0, 0.5), (2.5, 1.5)] {
            let adj = Lattice::diagonal(&[a], &[b]).unwrap().adjoint_lattice();
            let expect = (a.floor() + 1.0) * (b.floor() + 1.0);
            assert_eq!(counting_bound(&adj) as f64, expect);
        }
    }

    #[test]
    fn exclusion() {
        assert!(cube_exclusion(&[0.25], &[0.25], &[2], &[3]));
        assert!(!cube_exclusion(&[0.25], &[0.25], &[4], &[0]));
        assert!(!cube_exclusion(&[2.0], &[2.0], &[0], &[0]));
        // the x index is limited by 1/beta: with alpha = 1/4, beta = 1 the
        // cube (3, 0) holds the point (3, 0), k = -3
        assert!(!cube_exclusion(&[0.25], &[1.0], &[3], &[0]));
        assert!(cube_exclusion(&[1.0], &[0.25], &[3], &[0]));
    }

    #[test]
    fn exclusion_matches_enumeration() {
        for (a, b) in [(0.25, 0.25), (0.25, 1.0), (0.3, 0.7), (1.0 / 3.0, 0.2)] {
            for r in -6..6i64 {
                for s in -6..6i64 {
                    if !cube_exclusion(&[a], &[b], &[r], &[s]) {
                        continue;
                    }
                    for h in -40..=40i64 {
                        for k in -40..=40i64 {
                            if h == 0 && k == 0 {
                                continue;
                            }
                            let (x, w) = (-k as f64 / b, h as f64 / a);
                            let inside = x >= r as f64 && x < (r + 1) as f64 && w >= s as f64 && w < (s + 1) as f64;
                            assert!(!inside, "alpha {a} beta {b} cube ({r},{s}) holds ({h},{k})");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn sampling_bound_gaussian() {
        let id = m([[1.0, 0.0], [0.0, 1.0]]);
        let gauss = |z: &[f64]| (-std::f64::consts::PI * (z[0] * z[0] + z[1] * z[1])).exp();
        let c = sampling_sum_check(gauss, &id, &PolyWeight::unit(), 8, 8);
        assert!(c.lhs <= c.rhs && c.lhs > 1.0);
        let c = sampling_sum_check(|_| 0.0, &id, &PolyWeight::unit(), 4, 4);
        assert_eq!((c.lhs, c.rhs), (0.0, 0.0));
    }
}
