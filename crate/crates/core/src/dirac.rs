//! Lattice patches and the discrete Dirac d-operator on them.

use std::collections::BTreeMap;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::clifford::{gamma_representation, spin_point, CMatrix};
use crate::dconn::canonical_dconnection;
use crate::error::{GeomError, Result};
use crate::jet::ChartPoint;
use crate::nlc::DMetric;

/// One coordinate axis of a patch. A single site freezes the coordinate at
/// `lo`; otherwise at least three equally spaced sites span `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub sites: usize,
}

impl Axis {
    pub fn frozen(at: f64) -> Self {
        Self {
            lo: at,
            hi: at,
            sites: 1,
        }
    }

    pub fn span(lo: f64, hi: f64, sites: usize) -> Self {
        Self { lo, hi, sites }
    }

    pub fn spacing(&self) -> f64 {
        if self.sites > 1 {
            (self.hi - self.lo) / (self.sites - 1) as f64
        } else {
            0.0
        }
    }
}

/// Rectangular grid over all `n + m` total-space coordinates; sites are
/// numbered row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    axes: Vec<Axis>,
    strides: Vec<usize>,
}

impl Lattice {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(GeomError::InvalidInput("lattice without axes".into()));
        }
        for (k, a) in axes.iter().enumerate() {
            if a.sites == 0 || a.sites == 2 {
                return Err(GeomError::PatchTooSmall {
                    axis: k,
                    sites: a.sites,
                });
            }
            if !(a.lo.is_finite() && a.hi.is_finite()) || (a.sites > 1 && a.hi <= a.lo) {
                return Err(GeomError::InvalidInput(format!(
                    "axis {k} needs finite bounds with lo < hi, got [{}, {}]",
                    a.lo, a.hi
                )));
            }
        }
        if axes.iter().all(|a| a.sites == 1) {
            return Err(GeomError::InvalidInput("lattice has no active axis".into()));
        }
        let mut strides = vec![1; axes.len()];
        for k in (0..axes.len() - 1).rev() {
            strides[k] = strides[k + 1] * axes[k + 1].sites;
        }
        Ok(Self { axes, strides })
    }

    /// Parse `lo:hi:sites` per axis separated by commas; a bare number
    /// freezes that axis.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |s: &str| GeomError::InvalidInput(format!("bad lattice axis `{s}`"));
        let axes = text
            .split(',')
            .map(|part| {
                let part = part.trim();
                let f: Vec<&str> = part.split(':').collect();
                match f.as_slice() {
                    [at] => Ok(Axis::frozen(at.trim().parse().map_err(|_| bad(part))?)),
                    [lo, hi, sites] => Ok(Axis::span(
                        lo.trim().parse().map_err(|_| bad(part))?,
                        hi.trim().parse().map_err(|_| bad(part))?,
                        sites.trim().parse().map_err(|_| bad(part))?,
                    )),
                    _ => Err(bad(part)),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(axes)
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.strides[0] * self.axes[0].sites
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Axes carrying more than one site.
    pub fn active(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&k| self.axes[k].sites > 1).collect()
    }

    pub fn index(&self, multi: &[usize]) -> Option<usize> {
        if multi.len() != self.dim() || multi.iter().zip(&self.axes).any(|(&i, a)| i >= a.sites) {
            return None;
        }
        Some(multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum())
    }

    pub fn multi_index(&self, site: usize) -> Vec<usize> {
        self.strides
            .iter()
            .zip(&self.axes)
            .map(|(s, a)| site / s % a.sites)
            .collect()
    }

    pub fn coords(&self, site: usize) -> Vec<f64> {
        self.multi_index(site)
            .iter()
            .zip(&self.axes)
            .map(|(&i, a)| a.lo + i as f64 * a.spacing())
            .collect()
    }

    /// Neighbour one step along `axis` in direction `dir` (±1).
    pub fn neighbor(&self, site: usize, axis: usize, dir: isize) -> Option<usize> {
        let i = self.multi_index(site)[axis] as isize + dir;
        if i < 0 || i as usize >= self.axes[axis].sites {
            return None;
        }
        Some((site as isize + dir * self.strides[axis] as isize) as usize)
    }

    /// No active coordinate on the patch boundary.
    pub fn is_interior(&self, site: usize) -> bool {
        self.multi_index(site)
            .iter()
            .zip(&self.axes)
            .all(|(&i, a)| a.sites == 1 || (i > 0 && i + 1 < a.sites))
    }

    /// Trapezoid quadrature weight of a site over the active axes.
    pub fn cell_weight(&self, site: usize) -> f64 {
        self.multi_index(site)
            .iter()
            .zip(&self.axes)
            .filter(|(_, a)| a.sites > 1)
            .map(|(&i, a)| {
                let h = a.spacing();
                if i == 0 || i + 1 == a.sites {
                    0.5 * h
                } else {
                    h
                }
            })
            .product()
    }
}

/// Which half of the operator an entry belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Horizontal,
    Vertical,
}

type Sparse = BTreeMap<(usize, usize), Complex64>;

/// `D = −i Σ_α γ^α (e_α + Ω_α)` on a lattice patch, with rows and columns
/// indexed by `site * spinor + component`.
#[derive(Debug, Clone)]
pub struct DiscreteDiracOperator {
    lattice: Lattice,
    spinor: usize,
    horizontal: Sparse,
    vertical: Sparse,
    /// Per site and active axis, the matrix `B_A` with `[D, f] ≈ Σ_A B_A ∂_A f`.
    symbols: Vec<Vec<CMatrix>>,
    volume: Vec<f64>,
    chirality: Option<CMatrix>,
}

fn add_block(target: &mut Sparse, row: usize, col: usize, k: usize, block: &CMatrix, s: f64) {
    for r in 0..k {
        for c in 0..k {
            let v = block[(r, c)] * s;
            if v != Complex64::new(0.0, 0.0) {
                *target.entry((row * k + r, col * k + c)).or_default() += v;
            }
        }
    }
}

/// Assemble the operator for the canonical d-connection of `dm`.
///
/// Frame derivatives use central differences, with `e_i = ∂_i − N^a_i ∂_a`
/// taking the vertical shift at the site. Neighbours outside the patch are
/// dropped (Dirichlet truncation) and frozen axes contribute no derivative.
pub fn assemble_discrete_dirac(dm: &DMetric, lattice: &Lattice) -> Result<DiscreteDiracOperator> {
    let (n, m) = (dm.n(), dm.m());
    let dim = n + m;
    if lattice.dim() != dim {
        return Err(GeomError::DimensionMismatch(format!(
            "lattice with {} axes for a {dim}-dimensional total space",
            lattice.dim()
        )));
    }
    let rep = gamma_representation(dim)?;
    let k = rep.size();
    let conn = canonical_dconnection(dm);
    let active = lattice.active();
    let minus_i = Complex64::new(0.0, -1.0);
    let mut op = DiscreteDiracOperator {
        lattice: lattice.clone(),
        spinor: k,
        horizontal: Sparse::new(),
        vertical: Sparse::new(),
        symbols: Vec::with_capacity(lattice.len()),
        volume: Vec::with_capacity(lattice.len()),
        chirality: rep.chirality.clone(),
    };
    for site in 0..lattice.len() {
        let u = ChartPoint::from_coords(&lattice.coords(site), n)?;
        let pt = dm.at(&u)?;
        let sp = spin_point(&conn, &rep, &u)?;
        op.volume.push((pt.g.determinant() * pt.h.determinant()).sqrt());
        let mut symbol = vec![CMatrix::zeros(k, k); active.len()];
        for al in 0..dim {
            let mg = &sp.gammas[al] * minus_i;
            let target = if al < n { &mut op.horizontal } else { &mut op.vertical };
            add_block(target, site, site, k, &(&mg * &sp.omega[al]), 1.0);
            // Coordinate components of the frame vector e_α.
            let mut dir = vec![0.0; dim];
            dir[al] = 1.0;
            if al < n {
                for a in 0..m {
                    dir[n + a] = -pt.nconn[(a, al)];
                }
            }
            for (p, &axis) in active.iter().enumerate() {
                let c = dir[axis];
                if c == 0.0 {
                    continue;
                }
                symbol[p] += &mg * Complex64::new(c, 0.0);
                let w = c / (2.0 * lattice.axes()[axis].spacing());
                if let Some(next) = lattice.neighbor(site, axis, 1) {
                    add_block(target, site, next, k, &mg, w);
                }
                if let Some(prev) = lattice.neighbor(site, axis, -1) {
                    add_block(target, site, prev, k, &mg, -w);
                }
            }
        }
        op.symbols.push(symbol);
    }
    Ok(op)
}

impl DiscreteDiracOperator {
    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn spinor_size(&self) -> usize {
        self.spinor
    }

    pub fn size(&self) -> usize {
        self.lattice.len() * self.spinor
    }

    /// Merged `(row, col, value)` entries in row-major order.
    pub fn entries(&self) -> Vec<(usize, usize, Complex64)> {
        let mut all = self.horizontal.clone();
        for (&key, &v) in &self.vertical {
            *all.entry(key).or_default() += v;
        }
        all.into_iter()
            .filter(|(_, v)| *v != Complex64::new(0.0, 0.0))
            .map(|((r, c), v)| (r, c, v))
            .collect()
    }

    /// Entries of one half of the operator.
    pub fn part(&self, part: Part) -> Vec<(usize, usize, Complex64)> {
        let src = match part {
            Part::Horizontal => &self.horizontal,
            Part::Vertical => &self.vertical,
        };
        src.iter().map(|(&(r, c), &v)| (r, c, v)).collect()
    }

    pub fn nnz(&self) -> usize {
        self.entries().len()
    }

    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.size()];
        for part in [&self.horizontal, &self.vertical] {
            for (&(r, c), &v) in part {
                out[r] += v * psi[c];
            }
        }
        out
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut d = CMatrix::zeros(self.size(), self.size());
        for (r, c, v) in self.entries() {
            d[(r, c)] = v;
        }
        d
    }

    /// `B_A` at a site for the `p`-th active axis.
    pub fn symbol(&self, site: usize, p: usize) -> &CMatrix {
        &self.symbols[site][p]
    }

    /// Volume density `√det g · √det h` at a site.
    pub fn volume(&self, site: usize) -> f64 {
        self.volume[site]
    }

    /// Site-diagonal chirality `Γ ⊗ I`, for even total dimension.
    pub fn chirality(&self) -> Option<CMatrix> {
        let ch = self.chirality.as_ref()?;
        let k = self.spinor;
        let mut d = CMatrix::zeros(self.size(), self.size());
        for s in 0..self.lattice.len() {
            d.view_mut((s * k, s * k), (k, k)).copy_from(ch);
        }
        Some(d)
    }

    /// Largest entry of `D Γ + Γ D` for the site-diagonal chirality, computed
    /// sparsely; `None` in odd total dimension.
    pub fn chirality_defect(&self) -> Option<f64> {
        let ch = self.chirality.as_ref()?;
        let k = self.spinor;
        let mut acc: Sparse = Sparse::new();
        for (r, c, v) in self.entries() {
            let (rs, rc) = (r / k, r % k);
            let (cs, cc) = (c / k, c % k);
            for j in 0..k {
                // (D Γ)_{r, cs·k+j} and (Γ D)_{rs·k+j, c}.
                *acc.entry((r, cs * k + j)).or_default() += v * ch[(cc, j)];
                *acc.entry((rs * k + j, c)).or_default() += ch[(j, rc)] * v;
            }
        }
        Some(acc.values().map(|z| z.norm()).fold(0.0, f64::max))
    }

    /// Coordinate-list export, one `row col re im` line per nonzero.
    pub fn write_coo(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "# rows={} cols={} spinor={}", self.size(), self.size(), self.spinor)?;
        for (r, c, v) in self.entries() {
            writeln!(w, "{r} {c} {:.17e} {:.17e}", v.re, v.im)?;
        }
        Ok(())
    }
}

/// `⟨ψ, φ⟩ = Σ_sites w · √det g √det h · ψ†φ` with trapezoid weights `w`.
pub fn spinor_scalar_product(op: &DiscreteDiracOperator, psi: &[Complex64], phi: &[Complex64]) -> Result<Complex64> {
    if psi.len() != op.size() || phi.len() != op.size() {
        return Err(GeomError::DimensionMismatch(format!(
            "spinor fields of length {} and {}, operator size {}",
            psi.len(),
            phi.len(),
            op.size()
        )));
    }
    let k = op.spinor;
    let mut acc = Complex64::new(0.0, 0.0);
    for s in 0..op.lattice.len() {
        let w = op.lattice.cell_weight(s) * op.volume[s];
        let local: Complex64 = (0..k).map(|c| psi[s * k + c].conj() * phi[s * k + c]).sum();
        acc += local * w;
    }
    Ok(acc)
}

/// Dense `[D, f]` for a site-valued function (testing and diagnostics).
pub fn commutator_dense(op: &DiscreteDiracOperator, f: &[f64]) -> CMatrix {
    let k = op.spinor;
    let mut c = CMatrix::zeros(op.size(), op.size());
    for (r, col, v) in op.entries() {
        c[(r, col)] = v * (f[col / k] - f[r / k]);
    }
    c
}
