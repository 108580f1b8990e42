//! Geodesic flow: Euler-Lagrange and spray accelerations, a fixed-step RK4
//! integrator, and boundary-value shooting for geodesic distances.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::jet::{ChartPoint, Jet};
use crate::jetmat;
use crate::lagrangian::{lagrangian_jet, Lagrangian};
use crate::nlc::{spray_coefficients, DMetric};

/// Which second-order system drives the flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Flow {
    EulerLagrange,
    Spray,
}

/// `ẍ` from the Euler-Lagrange equations, solving
/// `g ẍ = ½∂L/∂x − ½(∂²L/∂y∂x) y` with `g = ½∂y∂y L`.
pub fn euler_lagrange_rhs(l: &dyn Lagrangian, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let n = l.dim();
    let u = ChartPoint::new(x.to_vec(), y.to_vec())?;
    let lj = lagrangian_jet(l, &u, 2)?;
    let g = DMatrix::from_fn(n, n, |i, j| 0.5 * lj.partial_vars(&[n + i, n + j]));
    let rhs = DVector::from_fn(n, |i, _| {
        let mixed: f64 = (0..n).map(|k| lj.partial_vars(&[n + i, k]) * y[k]).sum();
        0.5 * (lj.partial_vars(&[i]) - mixed)
    });
    let ginv = jetmat::checked_inverse(&g)?;
    Ok((ginv * rhs).iter().copied().collect())
}

/// `ẍ = −2 G(x, y)` from the canonical spray.
pub fn spray_rhs(l: &dyn Lagrangian, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let u = ChartPoint::new(x.to_vec(), y.to_vec())?;
    Ok(spray_coefficients(l, &u)?.into_iter().map(|g| -2.0 * g).collect())
}

pub fn acceleration(l: &dyn Lagrangian, flow: Flow, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    match flow {
        Flow::EulerLagrange => euler_lagrange_rhs(l, x, y),
        Flow::Spray => spray_rhs(l, x, y),
    }
}

/// Sampled solution `(τ, x(τ), y(τ))`. When the Hessian degenerates
/// mid-flight the samples up to that point are kept and `aborted` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub tau: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub aborted: Option<GeomError>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    pub fn end(&self) -> (&[f64], &[f64]) {
        let k = self.len() - 1;
        (&self.x[k], &self.y[k])
    }

    /// CSV with header `tau,x1..xn,y1..yn`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        let n = self.x.first().map_or(0, Vec::len);
        let mut header = vec!["tau".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=n).map(|i| format!("y{i}")));
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.len() {
            let row: Vec<String> = std::iter::once(self.tau[k])
                .chain(self.x[k].iter().copied())
                .chain(self.y[k].iter().copied())
                .map(|v| format!("{v:.17e}"))
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn axpy(base: &[f64], s: f64, d: &[f64]) -> Vec<f64> {
    base.iter().zip(d).map(|(b, d)| b + s * d).collect()
}

/// Classical RK4 with `round(horizon / step)` equal steps.
pub fn integrate(
    l: &dyn Lagrangian,
    flow: Flow,
    x0: &[f64],
    y0: &[f64],
    horizon: f64,
    step: f64,
) -> Result<Trajectory> {
    let n = l.dim();
    if x0.len() != n || y0.len() != n {
        return Err(GeomError::DimensionMismatch(format!(
            "initial state has ({}, {}) components, expected {n}",
            x0.len(),
            y0.len()
        )));
    }
    if !(step > 0.0 && step.is_finite() && horizon >= 0.0 && horizon.is_finite()) {
        return Err(GeomError::InvalidInput(format!(
            "need step > 0 and horizon >= 0, got step={step}, horizon={horizon}"
        )));
    }
    let steps = ((horizon / step).round() as usize).max(usize::from(horizon > 0.0));
    let h = if steps == 0 { 0.0 } else { horizon / steps as f64 };
    let mut traj = Trajectory {
        tau: vec![0.0],
        x: vec![x0.to_vec()],
        y: vec![y0.to_vec()],
        aborted: None,
    };
    let acc = |x: &[f64], y: &[f64]| acceleration(l, flow, x, y);
    let (mut x, mut y) = (x0.to_vec(), y0.to_vec());
    for k in 0..steps {
        let stage = || -> Result<(Vec<f64>, Vec<f64>)> {
            let a1 = acc(&x, &y)?;
            let (x2, y2) = (axpy(&x, 0.5 * h, &y), axpy(&y, 0.5 * h, &a1));
            let a2 = acc(&x2, &y2)?;
            let (x3, y3) = (axpy(&x, 0.5 * h, &y2), axpy(&y, 0.5 * h, &a2));
            let a3 = acc(&x3, &y3)?;
            let (x4, y4) = (axpy(&x, h, &y3), axpy(&y, h, &a3));
            let a4 = acc(&x4, &y4)?;
            let xn = (0..n)
                .map(|i| x[i] + h / 6.0 * (y[i] + 2.0 * y2[i] + 2.0 * y3[i] + y4[i]))
                .collect();
            let yn = (0..n)
                .map(|i| y[i] + h / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i]))
                .collect();
            Ok((xn, yn))
        };
        match stage() {
            Ok((xn, yn)) => {
                if xn.iter().chain(&yn).any(|v: &f64| !v.is_finite()) {
                    traj.aborted = Some(GeomError::Domain(format!(
                        "non-finite state at step {}",
                        k + 1
                    )));
                    break;
                }
                x = xn;
                y = yn;
            }
            Err(e) => {
                traj.aborted = Some(e);
                break;
            }
        }
        traj.tau.push((k + 1) as f64 * h);
        traj.x.push(x.clone());
        traj.y.push(y.clone());
    }
    Ok(traj)
}

fn completed(traj: Trajectory) -> Result<Trajectory> {
    match traj.aborted {
        Some(e) => Err(e),
        None => Ok(traj),
    }
}

/// Largest position deviation between the Euler-Lagrange and spray flows
/// from the same initial data.
pub fn equivalence_residual(
    l: &dyn Lagrangian,
    x0: &[f64],
    y0: &[f64],
    horizon: f64,
    step: f64,
) -> Result<f64> {
    let a = completed(integrate(l, Flow::EulerLagrange, x0, y0, horizon, step)?)?;
    let b = completed(integrate(l, Flow::Spray, x0, y0, horizon, step)?)?;
    Ok(a.x
        .iter()
        .zip(&b.x)
        .flat_map(|(p, q)| p.iter().zip(q).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max))
}

/// Energy `y·∂L/∂y − L`, conserved by the Euler-Lagrange flow.
pub fn energy(l: &dyn Lagrangian, x: &[f64], y: &[f64]) -> Result<f64> {
    let n = l.dim();
    let u = ChartPoint::new(x.to_vec(), y.to_vec())?;
    let lj = lagrangian_jet(l, &u, 1)?;
    let p: f64 = (0..n).map(|i| y[i] * lj.partial_vars(&[n + i])).sum();
    Ok(p - lj.value())
}

/// Controls for the boundary-value solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingOptions {
    /// RK4 steps over the unit parameter interval (rounded up to even).
    pub steps: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self {
            steps: 256,
            tolerance: 1e-10,
            max_iterations: 50,
        }
    }
}

/// A converged geodesic from `a` to `b` on `τ ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Geodesic {
    pub length: f64,
    pub initial_velocity: Vec<f64>,
    pub iterations: usize,
    pub trajectory: Trajectory,
}

/// Solve `x(0) = a`, `x(1) = b` for the initial velocity by damped Newton
/// with a finite-difference Jacobian, starting from `b − a`.
pub fn shoot(l: &dyn Lagrangian, a: &[f64], b: &[f64], opts: ShootingOptions) -> Result<Geodesic> {
    let n = l.dim();
    if a.len() != n || b.len() != n {
        return Err(GeomError::DimensionMismatch(format!(
            "endpoints have {} and {} components, expected {n}",
            a.len(),
            b.len()
        )));
    }
    let steps = (opts.steps.max(2) + 1) & !1;
    let h = 1.0 / steps as f64;
    let fly = |v: &[f64]| integrate(l, Flow::EulerLagrange, a, v, 1.0, h).and_then(completed);
    let miss = |t: &Trajectory| -> Vec<f64> { t.end().0.iter().zip(b).map(|(p, q)| p - q).collect() };
    let norm = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = 1.0 + norm(a).max(norm(b));

    let mut v: Vec<f64> = b.iter().zip(a).map(|(q, p)| q - p).collect();
    let mut traj = fly(&v)?;
    let mut r = miss(&traj);
    let mut iterations = 0;
    while norm(&r) > opts.tolerance * scale {
        if iterations == opts.max_iterations {
            return Err(GeomError::ShootingDiverged {
                iterations,
                residual: norm(&r),
            });
        }
        iterations += 1;
        let mut jac = DMatrix::zeros(n, n);
        for k in 0..n {
            let d = 1e-6 * (1.0 + v[k].abs());
            let mut vp = v.clone();
            let mut vm = v.clone();
            vp[k] += d;
            vm[k] -= d;
            let (rp, rm) = (miss(&fly(&vp)?), miss(&fly(&vm)?));
            for i in 0..n {
                jac[(i, k)] = (rp[i] - rm[i]) / (2.0 * d);
            }
        }
        let delta = jac.lu().solve(&DVector::from_column_slice(&r)).ok_or(
            GeomError::ShootingDiverged {
                iterations,
                residual: norm(&r),
            },
        )?;
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let trial: Vec<f64> = v.iter().zip(delta.iter()).map(|(p, d)| p - lambda * d).collect();
            if let Ok(t) = fly(&trial) {
                let rt = miss(&t);
                if norm(&rt) < norm(&r) {
                    accepted = Some((trial, t, rt));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((vn, tn, rn)) = accepted else {
            return Err(GeomError::ShootingDiverged {
                iterations,
                residual: norm(&r),
            });
        };
        v = vn;
        traj = tn;
        r = rn;
    }
    let length = curve_length(l, &traj)?;
    Ok(Geodesic {
        length,
        initial_velocity: v,
        iterations,
        trajectory: traj,
    })
}

/// `∫ √L dτ` by composite Simpson over the samples (an even number of
/// equal intervals is assumed; otherwise the trapezoid rule is used).
pub fn curve_length(l: &dyn Lagrangian, traj: &Trajectory) -> Result<f64> {
    let f: Vec<f64> = (0..traj.len())
        .map(|k| Ok(l.eval(&traj.x[k], &traj.y[k])?.max(0.0).sqrt()))
        .collect::<Result<_>>()?;
    let intervals = f.len().saturating_sub(1);
    if intervals == 0 {
        return Ok(0.0);
    }
    let h = traj.tau[intervals] / intervals as f64;
    if intervals % 2 == 0 {
        let inner: f64 = (1..intervals)
            .map(|k| if k % 2 == 1 { 4.0 * f[k] } else { 2.0 * f[k] })
            .sum();
        Ok(h / 3.0 * (f[0] + inner + f[intervals]))
    } else {
        let inner: f64 = f[1..intervals].iter().sum();
        Ok(h * (0.5 * (f[0] + f[intervals]) + inner))
    }
}

/// Geodesic distance `∫₀¹ √L dτ` along the shooting solution.
pub fn geodesic_distance(l: &dyn Lagrangian, a: &[f64], b: &[f64]) -> Result<f64> {
    if a == b {
        if a.len() != l.dim() {
            return Err(GeomError::DimensionMismatch(format!(
                "endpoint has {} components, expected {}",
                a.len(),
                l.dim()
            )));
        }
        return Ok(0.0);
    }
    Ok(shoot(l, a, b, ShootingOptions::default())?.length)
}

/// Riemannian Lagrangian `L = Ĝ_AB(x) v^A v^B` on a coordinate slice of a
/// d-metric. The slice varies the `active` coordinates of the total space and
/// freezes the rest at `base`; `Ĝ` is the inverse of the active block of the
/// inverse total-space metric, which is the metric seen by gradients of
/// functions on the slice.
#[derive(Debug, Clone)]
pub struct SliceLagrangian {
    dm: Arc<DMetric>,
    base: Vec<f64>,
    active: Vec<usize>,
}

impl SliceLagrangian {
    pub fn new(dm: Arc<DMetric>, base: Vec<f64>, active: Vec<usize>) -> Result<Self> {
        let dim = dm.n() + dm.m();
        if base.len() != dim {
            return Err(GeomError::DimensionMismatch(format!(
                "base point has {} coordinates, expected {dim}",
                base.len()
            )));
        }
        if active.is_empty() || active.iter().any(|&a| a >= dim) || !active.windows(2).all(|w| w[0] < w[1]) {
            return Err(GeomError::InvalidInput(format!(
                "active axes {active:?} must be increasing and below {dim}"
            )));
        }
        Ok(Self { dm, base, active })
    }

    /// The full coordinate point for slice coordinates `x`.
    pub fn embed(&self, x: &[f64]) -> Vec<f64> {
        let mut u = self.base.clone();
        for (&a, &v) in self.active.iter().zip(x) {
            u[a] = v;
        }
        u
    }

    /// Inverse total-space metric in coordinates, as jets:
    /// `G⁻¹ = g^{ij} e_i⊗e_j + h^{ab} ∂_a⊗∂_b` with `e_i = ∂_i − N^a_i ∂_a`.
    fn inverse_metric(&self, u: &ChartPoint, order: u8) -> Result<Vec<Jet>> {
        let (n, m) = (self.dm.n(), self.dm.m());
        let blocks = self.dm.blocks(u, order)?;
        let gi = jetmat::inverse(&blocks.g, n)?;
        let hi = jetmat::inverse(&blocks.h, m)?;
        let dim = n + m;
        let space = gi[0].space().clone();
        let mut out = vec![Jet::constant(&space, order, 0.0); dim * dim];
        // frame[i][c] is the ∂_c component of e_i.
        let frame = |i: usize, c: usize| -> Option<Jet> {
            if c < n {
                (c == i).then(|| Jet::constant(&space, order, 1.0))
            } else {
                Some(-&blocks.nconn[(c - n) * n + i])
            }
        };
        for i in 0..n {
            for j in 0..n {
                let gij = &gi[i * n + j];
                for c in 0..dim {
                    let Some(fc) = frame(i, c) else { continue };
                    let left = gij * &fc;
                    for d in 0..dim {
                        if let Some(fd) = frame(j, d) {
                            out[c * dim + d] = &out[c * dim + d] + &(&left * &fd);
                        }
                    }
                }
            }
        }
        for a in 0..m {
            for b in 0..m {
                let k = (n + a) * dim + n + b;
                out[k] = &out[k] + &hi[a * m + b];
            }
        }
        Ok(out)
    }
}

impl Lagrangian for SliceLagrangian {
    fn dim(&self) -> usize {
        self.active.len()
    }

    fn eval_jet(&self, x: &[Jet], y: &[Jet]) -> Result<Jet> {
        let k = self.active.len();
        let order = x[0].order();
        let xv: Vec<f64> = x.iter().map(Jet::value).collect();
        let full = self.embed(&xv);
        let u = ChartPoint::from_coords(&full, self.dm.n())?;
        let dim = full.len();
        let ginv = self.inverse_metric(&u, order)?;
        let reduced: Vec<Jet> = (0..k * k)
            .map(|r| ginv[self.active[r / k] * dim + self.active[r % k]].clone())
            .collect();
        let metric = jetmat::inverse(&reduced, k)?;
        let target = x[0].space().clone();
        let shifts: Vec<Jet> = (0..dim)
            .map(|c| match self.active.iter().position(|&a| a == c) {
                Some(p) => x[p].add_scalar(-xv[p]),
                None => Jet::constant(&target, order, 0.0),
            })
            .collect();
        let mut out = Jet::constant(&target, order, 0.0);
        for p in 0..k {
            for q in 0..k {
                let gpq = metric[p * k + q].compose(&shifts)?;
                out = &out + &(&gpq * &(&y[p] * &y[q]));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_definition;
    use crate::lagrangian::ExprLagrangian;
    use crate::oracle;

    fn lag(text: &str, n: usize) -> ExprLagrangian {
        ExprLagrangian::parse(text, n).unwrap()
    }

    #[test]
    fn conformal_acceleration() {
        let l = lag("exp(x1)*(y1^2+y2^2)", 2);
        let a = euler_lagrange_rhs(&l, &[0.0, 0.0], &[1.0, 2.0]).unwrap();
        assert!((a[0] - 1.5).abs() < 1e-12 && (a[1] + 2.0).abs() < 1e-12, "{a:?}");
        let s = spray_rhs(&l, &[0.0, 0.0], &[1.0, 2.0]).unwrap();
        assert!((s[0] - 1.5).abs() < 1e-12 && (s[1] + 2.0).abs() < 1e-12, "{s:?}");
    }

    #[test]
    fn oscillator_is_harmonic() {
        let l = lag("y1^2 - x1^2", 1);
        for x in [-1.3, 0.0, 0.7] {
            let a = euler_lagrange_rhs(&l, &[x], &[0.4]).unwrap();
            assert!((a[0] + x).abs() < 1e-13);
        }
        let t = integrate(&l, Flow::EulerLagrange, &[1.0], &[0.0], 1.0, 1e-3).unwrap();
        assert!((t.end().0[0] - 1f64.cos()).abs() < 1e-12);
    }

    #[test]
    fn rk4_has_fourth_order_convergence() {
        let l = lag("y1^2 + sin(x1)^2*y2^2", 2);
        let (x0, y0) = ([1.0, 0.2], [0.3, 0.8]);
        let end = |h: f64| {
            integrate(&l, Flow::EulerLagrange, &x0, &y0, 1.0, h)
                .unwrap()
                .end()
                .0
                .to_vec()
        };
        let reference = end(0.1 / 16.0);
        let err = |h: f64| {
            end(h).iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let ratio = err(0.1) / err(0.05);
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn degeneracy_aborts_with_partial_trajectory() {
        // The Hessian x1^2 vanishes when x1 crosses zero.
        let l = lag("x1^2*y1^2", 1);
        let t = integrate(&l, Flow::EulerLagrange, &[0.0], &[1.0], 1.0, 0.1).unwrap();
        assert_eq!(t.len(), 1);
        assert!(matches!(t.aborted, Some(GeomError::DegenerateHessian { .. })));
    }

    #[test]
    fn flat_distance_is_euclidean() {
        let l = lag("y1^2+y2^2", 2);
        let d = geodesic_distance(&l, &[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((d - 5.0).abs() < 1e-10, "{d}");
        assert_eq!(geodesic_distance(&l, &[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn conformal_distance_along_axis() {
        let l = lag("exp(x1)*(y1^2+y2^2)", 2);
        let (a, b) = (-0.5, 1.0);
        let d = geodesic_distance(&l, &[a, 0.0], &[b, 0.0]).unwrap();
        let want = 2.0 * ((b / 2.0f64).exp() - (a / 2.0f64).exp());
        assert!((d - want).abs() < 1e-8, "{d} vs {want}");
    }

    #[test]
    fn shooting_reports_divergence() {
        let l = lag("y1^2+y2^2", 2);
        let opts = ShootingOptions {
            max_iterations: 0,
            ..Default::default()
        };
        // With zero iterations only an exact initial guess could succeed.
        let l2 = lag("y1^2 + sin(x1)^2*y2^2", 2);
        assert!(shoot(&l, &[0.0, 0.0], &[1.0, 1.0], opts).is_ok());
        assert!(matches!(
            shoot(&l2, &[1.0, 0.0], &[1.5, 1.0], opts),
            Err(GeomError::ShootingDiverged { iterations: 0, .. })
        ));
    }

    #[test]
    fn csv_layout() {
        let l = lag("y1^2+y2^2", 2);
        let t = integrate(&l, Flow::Spray, &[0.0, 0.0], &[1.0, 0.0], 0.2, 0.1).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "tau,x1,x2,y1,y2");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[3].split(',').count(), 5);
    }

    #[test]
    fn slice_of_direct_metric_matches_lagrangian_on_horizontal_axes() {
        // With N = 0 and x-only metric the slice metric on x is g itself.
        let text = "dims 2 2\nmetric_block g 1 1 exp(x1)\nmetric_block g 2 2 exp(x1)\n\
                    metric_block h 1 1 1\nmetric_block h 2 2 1\n";
        let dm = Arc::new(DMetric::from_definition(&parse_definition(text).unwrap()).unwrap());
        let slice = SliceLagrangian::new(dm, vec![0.0, 0.0, 0.3, -0.2], vec![0, 1]).unwrap();
        let l = lag("exp(x1)*(y1^2+y2^2)", 2);
        for (x, y) in [([0.2, -0.4], [1.0, 0.5]), ([-0.7, 0.1], [-0.3, 2.0])] {
            assert!((slice.eval(&x, &y).unwrap() - l.eval(&x, &y).unwrap()).abs() < 1e-13);
            let a = euler_lagrange_rhs(&slice, &x, &y).unwrap();
            let b = euler_lagrange_rhs(&l, &x, &y).unwrap();
            for k in 0..2 {
                assert!((a[k] - b[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn slice_metric_is_dual_restriction() {
        // Oracle: invert the numerically assembled coordinate metric.
        let text = "dims 1 1\nmetric_block g 1 1 2+x1^2\nmetric_block h 1 1 1+y1^2\nnconn 1 1 x1*y1\n";
        let dm = Arc::new(DMetric::from_definition(&parse_definition(text).unwrap()).unwrap());
        let slice = SliceLagrangian::new(dm.clone(), vec![0.4, 0.9], vec![0]).unwrap();
        let big = dm.at(&ChartPoint::new(vec![0.4], vec![0.9]).unwrap()).unwrap().assemble();
        let want = 1.0 / big.try_inverse().unwrap()[(0, 0)];
        assert!((slice.eval(&[0.4], &[1.0]).unwrap() - want).abs() < 1e-13);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(12))]
        #[test]
        fn flows_agree_and_conserve_energy(seed in 0u64..1000) {
            let mut rng = oracle::rng(seed);
            for entry in oracle::suite() {
                let l = lag(entry.text, 2);
                let (x, y) = oracle::sample(&entry, &mut rng);
                let r = equivalence_residual(&l, &x, &y, 0.25, 1e-2).unwrap();
                proptest::prop_assert!(r <= 1e-9, "{}: {r}", entry.name);
                let t = integrate(&l, Flow::EulerLagrange, &x, &y, 0.25, 1e-2).unwrap();
                let e0 = energy(&l, &x, &y).unwrap();
                let (xe, ye) = t.end();
                let e1 = energy(&l, xe, ye).unwrap();
                proptest::prop_assert!((e1 - e0).abs() <= 1e-7 * (1.0 + e0.abs()), "{}", entry.name);
            }
        }

        #[test]
        fn reversible_flows_retrace(seed in 0u64..1000) {
            let mut rng = oracle::rng(seed);
            for entry in oracle::suite().into_iter().filter(|e| e.name != "magnetic") {
                let l = lag(entry.text, 2);
                let (x, y) = oracle::sample(&entry, &mut rng);
                let fwd = integrate(&l, Flow::Spray, &x, &y, 0.25, 1e-2).unwrap();
                let (xe, ye) = fwd.end();
                let back: Vec<f64> = ye.iter().map(|v| -v).collect();
                let rev = integrate(&l, Flow::Spray, xe, &back, 0.25, 1e-2).unwrap();
                for (a, b) in rev.end().0.iter().zip(&x) {
                    proptest::prop_assert!((a - b).abs() <= 1e-8, "{}", entry.name);
                }
            }
        }
    }
}
