//! Connes distance on a discrete Dirac operator and its comparison with the
//! geodesic distance of the same d-metric.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::clifford::CMatrix;
use crate::dirac::{assemble_discrete_dirac, DiscreteDiracOperator, Lattice};
use crate::dynamics::{shoot, ShootingOptions, SliceLagrangian};
use crate::error::{GeomError, Result};
use crate::nlc::DMetric;

/// Local symbol `Σ_A B_A Δ_A f` at an interior site, with central differences.
fn local_block(op: &DiscreteDiracOperator, f: &[f64], site: usize) -> CMatrix {
    let lat = op.lattice();
    let k = op.spinor_size();
    let mut m = CMatrix::zeros(k, k);
    for (p, &axis) in lat.active().iter().enumerate() {
        let (Some(next), Some(prev)) = (lat.neighbor(site, axis, 1), lat.neighbor(site, axis, -1)) else {
            continue;
        };
        let d = (f[next] - f[prev]) / (2.0 * lat.axes()[axis].spacing());
        m += op.symbol(site, p) * Complex64::new(d, 0.0);
    }
    m
}

/// Spectral norm of the site-local block of `[D, f]` at every interior site
/// (`None` on the boundary, where the central difference is unavailable).
pub fn commutator_blocks(op: &DiscreteDiracOperator, f: &[f64]) -> Result<Vec<Option<f64>>> {
    let lat = op.lattice();
    if f.len() != lat.len() {
        return Err(GeomError::DimensionMismatch(format!(
            "field with {} values on {} sites",
            f.len(),
            lat.len()
        )));
    }
    Ok((0..lat.len())
        .map(|s| {
            lat.is_interior(s).then(|| {
                let b = local_block(op, f, s);
                b.singular_values().max()
            })
        })
        .collect())
}

/// Solver controls for the distance program.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverBudget {
    pub max_iterations: usize,
    /// Relative tolerance on the primal-dual gap and the dual residual.
    pub tolerance: f64,
}

impl Default for SolverBudget {
    fn default() -> Self {
        Self {
            max_iterations: 200_000,
            tolerance: 1e-5,
        }
    }
}

/// Best feasible value and the function attaining it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConnesDistance {
    pub value: f64,
    pub certificate: Vec<f64>,
    pub iterations: usize,
    pub gap: f64,
}

/// The program `max f(p2) − f(p1)` subject to `‖z_s(f)‖ ≤ 1` at interior
/// sites, where `z_s = Lᵀ Δf(s)` and `L Lᵀ` is the Gram matrix of the
/// symbols, so `‖z_s‖` is exactly the block spectral norm.
struct Program {
    sites: usize,
    /// Rows of `K`, grouped per constrained site.
    blocks: Vec<Vec<Vec<(usize, f64)>>>,
}

impl Program {
    fn new(op: &DiscreteDiracOperator) -> Result<Self> {
        let lat = op.lattice();
        let active = lat.active();
        let mut blocks = Vec::new();
        for s in (0..lat.len()).filter(|&s| lat.is_interior(s)) {
            let d = active.len();
            // B_A = −iΓ_A with Γ_A Hermitian, so B_A†B_B + B_B†B_A = {Γ_A, Γ_B}
            // is a real multiple of the identity.
            let gram = DMatrix::from_fn(d, d, |a, b| {
                let (ba, bb) = (op.symbol(s, a), op.symbol(s, b));
                0.5 * (ba.adjoint() * bb + bb.adjoint() * ba)[(0, 0)].re
            });
            let chol = gram
                .clone()
                .cholesky()
                .ok_or_else(|| GeomError::NotPositiveDefinite(gram.symmetric_eigenvalues().min()))?;
            let l = chol.l();
            let mut rows = Vec::with_capacity(d);
            for r in 0..d {
                let mut row = Vec::new();
                for (a, &axis) in active.iter().enumerate() {
                    let c = l[(a, r)] / (2.0 * lat.axes()[axis].spacing());
                    if c == 0.0 {
                        continue;
                    }
                    let next = lat.neighbor(s, axis, 1).expect("interior site");
                    let prev = lat.neighbor(s, axis, -1).expect("interior site");
                    row.push((next, c));
                    row.push((prev, -c));
                }
                rows.push(row);
            }
            blocks.push(rows);
        }
        Ok(Self {
            sites: lat.len(),
            blocks,
        })
    }

    /// Union-find over pairs a single difference quotient bounds.
    fn component_roots(&self) -> Vec<usize> {
        let mut parent: Vec<usize> = (0..self.sites).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for rows in &self.blocks {
            for row in rows {
                for pair in row.chunks(2) {
                    let (a, b) = (find(&mut parent, pair[0].0), find(&mut parent, pair[1].0));
                    parent[a] = b;
                }
            }
        }
        (0..self.sites).map(|i| find(&mut parent, i)).collect()
    }

    fn apply(&self, f: &[f64]) -> Vec<Vec<f64>> {
        self.blocks
            .iter()
            .map(|rows| rows.iter().map(|row| row.iter().map(|&(j, c)| c * f[j]).sum()).collect())
            .collect()
    }

    fn max_block_norm(&self, f: &[f64]) -> f64 {
        self.apply(f).iter().map(|z| norm(z)).fold(0.0, f64::max)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Connes distance between two lattice sites.
///
/// Solves the program with diagonally preconditioned Chambolle-Pock
/// iterations; feasibility of the reported value is enforced by rescaling the
/// iterate by its largest block norm.
pub fn connes_distance(
    op: &DiscreteDiracOperator,
    p1: usize,
    p2: usize,
    budget: SolverBudget,
) -> Result<ConnesDistance> {
    let sites = op.lattice().len();
    if p1 >= sites || p2 >= sites {
        return Err(GeomError::InvalidInput(format!(
            "site pair ({p1}, {p2}) outside a lattice of {sites} sites"
        )));
    }
    if p1 == p2 {
        return Ok(ConnesDistance {
            value: 0.0,
            certificate: vec![0.0; sites],
            iterations: 0,
            gap: 0.0,
        });
    }
    let prog = Program::new(op)?;
    let roots = prog.component_roots();
    if roots[p1] != roots[p2] {
        return Err(GeomError::Disconnected(p1, p2));
    }

    // Step sizes from absolute row and column sums.
    let mut col_sum = vec![0.0; sites];
    let sigma: Vec<f64> = prog
        .blocks
        .iter()
        .map(|rows| {
            let mut worst: f64 = 0.0;
            for row in rows {
                worst = worst.max(row.iter().map(|(_, c)| c.abs()).sum());
                for &(j, c) in row {
                    col_sum[j] += c.abs();
                }
            }
            1.0 / worst.max(f64::MIN_POSITIVE)
        })
        .collect();
    let tau: Vec<f64> = col_sum.iter().map(|&s| if s > 0.0 { 1.0 / s } else { 0.0 }).collect();

    let objective = |f: &[f64]| f[p2] - f[p1];
    let mut f = vec![0.0; sites];
    let mut fbar = f.clone();
    let mut z: Vec<Vec<f64>> = prog.blocks.iter().map(|r| vec![0.0; r.len()]).collect();
    let mut best = ConnesDistance {
        value: 0.0,
        certificate: f.clone(),
        iterations: 0,
        gap: f64::INFINITY,
    };
    let check = 50;
    for it in 1..=budget.max_iterations {
        let kf = prog.apply(&fbar);
        for ((zs, ks), &sg) in z.iter_mut().zip(&kf).zip(&sigma) {
            let v: Vec<f64> = zs.iter().zip(ks).map(|(a, b)| a + sg * b).collect();
            let nv = norm(&v);
            let shrink = if nv > sg { 1.0 - sg / nv } else { 0.0 };
            for (a, b) in zs.iter_mut().zip(&v) {
                *a = shrink * b;
            }
        }
        let mut kt = vec![0.0; sites];
        for (rows, zs) in prog.blocks.iter().zip(&z) {
            for (row, &zr) in rows.iter().zip(zs) {
                for &(j, c) in row {
                    kt[j] += c * zr;
                }
            }
        }
        let prev = f.clone();
        for j in 0..sites {
            let grad = f64::from(u8::from(j == p2)) - f64::from(u8::from(j == p1));
            f[j] += tau[j] * (grad - kt[j]);
        }
        f[p1] = 0.0;
        for j in 0..sites {
            fbar[j] = 2.0 * f[j] - prev[j];
        }

        if it % check == 0 || it == budget.max_iterations {
            let m = prog.max_block_norm(&f);
            let scale = if m > 1.0 { 1.0 / m } else { 1.0 };
            let lower = objective(&f) * scale;
            if lower > best.value {
                best.value = lower;
                best.certificate = f.iter().map(|v| v * scale).collect();
            }
            // Dual objective and residual of Kᵀz = c away from the pinned site.
            let upper: f64 = z.iter().map(|zs| norm(zs)).sum();
            let residual = (0..sites)
                .filter(|&j| j != p1)
                .map(|j| {
                    let c = if j == p2 { 1.0 } else { 0.0 };
                    (c - kt[j]).abs()
                })
                .fold(0.0, f64::max);
            let denom = best.value.abs().max(1e-12);
            best.gap = ((upper - best.value).abs() / denom).max(residual);
            best.iterations = it;
            if best.gap <= budget.tolerance {
                return Ok(best);
            }
        }
    }
    Err(GeomError::SolverStalled {
        iterations: budget.max_iterations,
        gap: best.gap,
    })
}

/// One line of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceRow {
    pub p1: usize,
    pub p2: usize,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub connes: f64,
    pub geodesic: f64,
    /// `connes / geodesic`, zero for a coincident pair.
    pub ratio: f64,
}

/// Compare Connes and geodesic distances for site pairs on a patch.
pub fn distance_report(
    dm: &DMetric,
    lattice: &Lattice,
    pairs: &[(usize, usize)],
    budget: SolverBudget,
) -> Result<Vec<DistanceRow>> {
    let op = assemble_discrete_dirac(dm, lattice)?;
    report_on(&op, dm, pairs, budget)
}

/// As [`distance_report`] for an already assembled operator.
pub fn report_on(
    op: &DiscreteDiracOperator,
    dm: &DMetric,
    pairs: &[(usize, usize)],
    budget: SolverBudget,
) -> Result<Vec<DistanceRow>> {
    let lat = op.lattice();
    let active = lat.active();
    let slice = SliceLagrangian::new(Arc::new(dm.clone()), lat.coords(0), active.clone())?;
    let pick = |s: usize| -> Vec<f64> {
        let c = lat.coords(s);
        active.iter().map(|&a| c[a]).collect()
    };
    pairs
        .iter()
        .map(|&(p1, p2)| {
            let connes = connes_distance(op, p1, p2, budget)?.value;
            let (x1, x2) = (pick(p1), pick(p2));
            let geodesic = if p1 == p2 {
                0.0
            } else {
                shoot(&slice, &x1, &x2, ShootingOptions::default())?.length
            };
            let ratio = if geodesic > 0.0 { connes / geodesic } else { 0.0 };
            Ok(DistanceRow {
                p1,
                p2,
                x1: lat.coords(p1),
                x2: lat.coords(p2),
                connes,
                geodesic,
                ratio,
            })
        })
        .collect()
}
