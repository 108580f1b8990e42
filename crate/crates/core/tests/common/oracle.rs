//! Independent plain-f64 oracles shared by unit and integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type MetricFn = fn(&[f64]) -> DMatrix<f64>;

/// 4th-order central difference of `f` along `axis`.
pub fn central<T>(f: &dyn Fn(&[f64]) -> T, x: &[f64], axis: usize, h: f64, comb: fn([T; 4], f64) -> T) -> T {
    let at = |t: f64| {
        let mut p = x.to_vec();
        p[axis] += t;
        f(&p)
    };
    comb([at(2.0 * h), at(h), at(-h), at(-2.0 * h)], h)
}

fn comb_f64(v: [f64; 4], h: f64) -> f64 {
    (-v[0] + 8.0 * v[1] - 8.0 * v[2] + v[3]) / (12.0 * h)
}

fn comb_vec(v: [Vec<f64>; 4], h: f64) -> Vec<f64> {
    (0..v[0].len())
        .map(|k| (-v[0][k] + 8.0 * v[1][k] - 8.0 * v[2][k] + v[3][k]) / (12.0 * h))
        .collect()
}

/// Mixed partial `∂^idx f` by nested central differences.
pub fn fd_partial(f: &dyn Fn(&[f64]) -> f64, x: &[f64], idx: &[u8], h: f64) -> f64 {
    match idx.iter().position(|&k| k > 0) {
        None => f(x),
        Some(axis) => {
            let mut rest = idx.to_vec();
            rest[axis] -= 1;
            let inner = move |p: &[f64]| fd_partial(f, p, &rest, h);
            central(&inner, x, axis, h, comb_f64)
        }
    }
}

/// Christoffel symbols `Γ^i_jk` at `(i * d + j) * d + k`.
pub fn christoffel(metric: &dyn Fn(&[f64]) -> DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let h = 1e-3;
    let flat = |p: &[f64]| metric(p).as_slice().to_vec();
    // column-major storage: entry (r, c) at c * d + r, symmetric anyway
    let dg: Vec<Vec<f64>> = (0..d).map(|k| central(&flat, x, k, h, comb_vec)).collect();
    let inv = metric(x).try_inverse().expect("invertible metric");
    let mut gam = vec![0.0; d * d * d];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let mut s = 0.0;
                for r in 0..d {
                    s += inv[(i, r)] * (dg[k][j * d + r] + dg[j][k * d + r] - dg[r][j * d + k]);
                }
                gam[(i * d + j) * d + k] = 0.5 * s;
            }
        }
    }
    gam
}

/// Riemann tensor `R^i_jkl = ∂_k Γ^i_jl − ∂_l Γ^i_jk + Γ^i_km Γ^m_jl − Γ^i_lm Γ^m_jk`
/// at `((i * d + j) * d + k) * d + l`.
pub fn riemann(metric: &dyn Fn(&[f64]) -> DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let h = 1e-3;
    let gam = christoffel(metric, x);
    let g = |p: &[f64]| christoffel(metric, p);
    let dgam: Vec<Vec<f64>> = (0..d).map(|k| central(&g, x, k, h, comb_vec)).collect();
    let c = |i: usize, j: usize, k: usize| gam[(i * d + j) * d + k];
    let mut r = vec![0.0; d * d * d * d];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let mut v = dgam[k][(i * d + j) * d + l] - dgam[l][(i * d + j) * d + k];
                    for mm in 0..d {
                        v += c(i, k, mm) * c(mm, j, l) - c(i, l, mm) * c(mm, j, k);
                    }
                    r[((i * d + j) * d + k) * d + l] = v;
                }
            }
        }
    }
    r
}

/// A test Lagrangian with its sampling box and, when quadratic, its metric.
pub struct SuiteEntry {
    pub name: &'static str,
    pub text: &'static str,
    pub metric: Option<MetricFn>,
    pub x_box: (f64, f64),
}

fn conformal(x: &[f64]) -> DMatrix<f64> {
    DMatrix::identity(2, 2) * x[0].exp()
}

fn polar(x: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, x[0] * x[0]])
}

fn sphere(x: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, x[0].sin().powi(2)])
}

fn flat(_: &[f64]) -> DMatrix<f64> {
    DMatrix::identity(2, 2)
}

pub fn suite() -> Vec<SuiteEntry> {
    vec![
        SuiteEntry { name: "flat", text: "y1^2+y2^2", metric: Some(flat), x_box: (-1.0, 1.0) },
        SuiteEntry { name: "conformal", text: "exp(x1)*(y1^2+y2^2)", metric: Some(conformal), x_box: (-1.0, 1.0) },
        SuiteEntry { name: "polar", text: "y1^2 + x1^2*y2^2", metric: Some(polar), x_box: (0.5, 2.0) },
        SuiteEntry { name: "sphere", text: "y1^2 + sin(x1)^2*y2^2", metric: Some(sphere), x_box: (0.5, 2.5) },
        SuiteEntry { name: "magnetic", text: "y1^2+y2^2+x1*y2", metric: None, x_box: (-1.0, 1.0) },
        SuiteEntry { name: "quartic", text: "(y1^4+y2^4)^(1/2)", metric: None, x_box: (-1.0, 1.0) },
    ]
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random `(x, y)` in the entry's box; `y` stays away from the coordinate axes
/// where the quartic metric degenerates.
pub fn sample(entry: &SuiteEntry, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let x = (0..2).map(|_| rng.random_range(entry.x_box.0..entry.x_box.1)).collect();
    let y = (0..2)
        .map(|_| {
            let v: f64 = rng.random_range(0.3..1.5);
            if rng.random_bool(0.5) { v } else { -v }
        })
        .collect();
    (x, y)
}
