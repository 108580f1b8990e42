//! Clifford algebra of the d-metric, gamma matrices, orthonormal vielbeins and
//! the spin d-connection.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::dconn::DConnection;
use crate::error::{GeomError, Result};
use crate::jet::ChartPoint;

pub type CMatrix = DMatrix<Complex64>;

/// Largest Clifford dimension handled.
pub const MAX_CLIFFORD_DIM: usize = 8;

/// Element of the Clifford algebra of a symmetric bilinear form `q`.
///
/// Blades are ordered products `e_i1 e_i2 ... e_ik` with `i1 < ... < ik`,
/// stored as bitmasks over 0-based generator indices.
#[derive(Clone, PartialEq)]
pub struct Multivector {
    form: Arc<DMatrix<f64>>,
    terms: BTreeMap<u16, f64>,
}

impl fmt::Debug for Multivector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for (&b, &c) in &self.terms {
            let idx: Vec<String> = (0..16).filter(|i| b >> i & 1 == 1).map(|i| (i + 1).to_string()).collect();
            parts.push(if idx.is_empty() {
                format!("{c}")
            } else {
                format!("{c}·e{}", idx.join("e"))
            });
        }
        write!(f, "Multivector[{}]", parts.join(" + "))
    }
}

impl Multivector {
    /// The zero element over `form`, which must be square and symmetric.
    pub fn zero(form: Arc<DMatrix<f64>>) -> Result<Self> {
        let d = form.nrows();
        if d == 0 || d != form.ncols() {
            return Err(GeomError::DimensionMismatch(format!(
                "quadratic form of shape {}x{}",
                d,
                form.ncols()
            )));
        }
        if d > MAX_CLIFFORD_DIM {
            return Err(GeomError::DimensionTooLarge(d));
        }
        if (0..d).any(|i| (0..i).any(|j| form[(i, j)] != form[(j, i)])) {
            return Err(GeomError::InvalidInput("quadratic form is not symmetric".into()));
        }
        Ok(Self {
            form,
            terms: BTreeMap::new(),
        })
    }

    pub fn scalar(form: Arc<DMatrix<f64>>, value: f64) -> Result<Self> {
        let mut mv = Self::zero(form)?;
        mv.add_term(0, value);
        Ok(mv)
    }

    /// Grade-one element `Σ c_i e_i`.
    pub fn vector(form: Arc<DMatrix<f64>>, coeffs: &[f64]) -> Result<Self> {
        let mut mv = Self::zero(form)?;
        if coeffs.len() != mv.dim() {
            return Err(GeomError::DimensionMismatch(format!(
                "{} coefficients for a {}-dimensional form",
                coeffs.len(),
                mv.dim()
            )));
        }
        for (i, &c) in coeffs.iter().enumerate() {
            mv.add_term(1 << i, c);
        }
        Ok(mv)
    }

    /// The blade `e_i1 ... e_ik` for strictly increasing 0-based indices.
    pub fn blade(form: Arc<DMatrix<f64>>, indices: &[usize], coeff: f64) -> Result<Self> {
        let mut mv = Self::zero(form)?;
        if !indices.windows(2).all(|w| w[0] < w[1]) || indices.iter().any(|&i| i >= mv.dim()) {
            return Err(GeomError::InvalidInput(format!("invalid blade {indices:?}")));
        }
        mv.add_term(indices.iter().fold(0, |b, &i| b | 1 << i), coeff);
        Ok(mv)
    }

    pub fn dim(&self) -> usize {
        self.form.nrows()
    }

    pub fn form(&self) -> &Arc<DMatrix<f64>> {
        &self.form
    }

    /// Coefficient of the blade with the given 0-based indices.
    pub fn coeff(&self, indices: &[usize]) -> f64 {
        let b = indices.iter().fold(0u16, |b, &i| b | 1 << i);
        self.terms.get(&b).copied().unwrap_or(0.0)
    }

    /// Nonzero `(blade indices, coefficient)` pairs.
    pub fn terms(&self) -> Vec<(Vec<usize>, f64)> {
        self.terms
            .iter()
            .map(|(&b, &c)| ((0..self.dim()).filter(|i| b >> i & 1 == 1).collect(), c))
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, blade: u16, c: f64) {
        if c == 0.0 {
            return;
        }
        let e = self.terms.entry(blade).or_insert(0.0);
        *e += c;
        if *e == 0.0 {
            self.terms.remove(&blade);
        }
    }

    fn same_form(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.form, &other.form) || self.form == other.form {
            Ok(())
        } else {
            Err(GeomError::FormMismatch)
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_form(other)?;
        let mut out = self.clone();
        for (&b, &c) in &other.terms {
            out.add_term(b, c);
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.terms.clear();
        for (&b, &c) in &self.terms {
            out.add_term(b, s * c);
        }
        out
    }

    /// `e_i · blade` rewritten in ordered blades via
    /// `e_i e_j = −e_j e_i + 2 q_ij`.
    fn generator_times(&self, i: usize, blade: u16, c: f64, out: &mut BTreeMap<u16, f64>) {
        if blade == 0 {
            *out.entry(1 << i).or_insert(0.0) += c;
            return;
        }
        let j = blade.trailing_zeros() as usize;
        let rest = blade & !(1 << j);
        if i < j {
            *out.entry(blade | 1 << i).or_insert(0.0) += c;
        } else if i == j {
            *out.entry(rest).or_insert(0.0) += c * self.form[(i, i)];
        } else {
            let q = self.form[(i, j)];
            if q != 0.0 {
                *out.entry(rest).or_insert(0.0) += 2.0 * q * c;
            }
            let mut inner = BTreeMap::new();
            self.generator_times(i, rest, c, &mut inner);
            for (b, v) in inner {
                // Every index in `b` exceeds `j`, so `e_j b` is already ordered.
                *out.entry(b | 1 << j).or_insert(0.0) -= v;
            }
        }
    }
}

/// Clifford product, the bilinear extension of `uv + vu = 2q(u, v)`.
pub fn clifford_product(a: &Multivector, b: &Multivector) -> Result<Multivector> {
    a.same_form(b)?;
    let mut out = Multivector {
        form: a.form.clone(),
        terms: BTreeMap::new(),
    };
    for (&ba, &ca) in &a.terms {
        let mut acc: BTreeMap<u16, f64> = b.terms.iter().map(|(&k, &v)| (k, ca * v)).collect();
        for i in (0..a.dim()).rev().filter(|i| ba >> i & 1 == 1) {
            let mut next = BTreeMap::new();
            for (blade, c) in acc {
                a.generator_times(i, blade, c, &mut next);
            }
            acc = next;
        }
        for (blade, c) in acc {
            out.add_term(blade, c);
        }
    }
    Ok(out)
}

/// Flat gamma matrices `γ^1..γ^d` of size `2^⌊d/2⌋` and, for even `d`, the
/// chirality `(−i)^{d/2} γ^1 ... γ^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct CliffordRep {
    pub dim: usize,
    pub gammas: Vec<CMatrix>,
    pub chirality: Option<CMatrix>,
}

impl CliffordRep {
    pub fn size(&self) -> usize {
        self.gammas[0].nrows()
    }

    /// Curved gammas `γ^α = E^α_α̂ γ^α̂` for a vielbein with `Eᵀ G E = I`;
    /// they satisfy `{γ^α, γ^β} = 2 G^{αβ}`.
    pub fn curved(&self, vielbein: &DMatrix<f64>) -> Vec<CMatrix> {
        (0..self.dim)
            .map(|al| {
                let mut g = CMatrix::zeros(self.size(), self.size());
                for (hat, flat) in self.gammas.iter().enumerate() {
                    let e = vielbein[(al, hat)];
                    if e != 0.0 {
                        g += flat * Complex64::new(e, 0.0);
                    }
                }
                g
            })
            .collect()
    }
}

fn pauli() -> [CMatrix; 3] {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    [
        CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]),
        CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]),
        CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]),
    ]
}

fn ordered_product(ms: &[CMatrix]) -> CMatrix {
    let k = ms[0].nrows();
    ms.iter().fold(CMatrix::identity(k, k), |acc, m| acc * m)
}

fn chirality_of(gammas: &[CMatrix]) -> CMatrix {
    let p = gammas.len() / 2;
    let phase = (0..p).fold(Complex64::new(1.0, 0.0), |z, _| z * Complex64::new(0.0, -1.0));
    ordered_product(gammas) * phase
}

/// Recursive tensor-product construction: from `2p` gammas of size `K`,
/// `γ^i ⊗ σ1` (including the chirality as the extra generator) and `I ⊗ σ2`.
pub fn gamma_representation(dim: usize) -> Result<CliffordRep> {
    if dim == 0 {
        return Err(GeomError::InvalidInput("Clifford dimension must be positive".into()));
    }
    if dim > MAX_CLIFFORD_DIM {
        return Err(GeomError::DimensionTooLarge(dim));
    }
    let [s1, s2, _] = pauli();
    let mut even: Vec<CMatrix> = Vec::new();
    let mut current = vec![CMatrix::identity(1, 1)];
    while current.len() < dim {
        // `current` has an odd count here: the even set plus its chirality.
        even = current.iter().map(|g| g.kronecker(&s1)).collect();
        let k = current[0].nrows();
        even.push(CMatrix::identity(k, k).kronecker(&s2));
        current = even.clone();
        if current.len() < dim {
            current.push(chirality_of(&even));
        }
    }
    let chirality = if dim % 2 == 0 { Some(chirality_of(&even)) } else { None };
    Ok(CliffordRep {
        dim,
        gammas: current,
        chirality,
    })
}

/// Symmetric inverse square root `e = g^{-1/2}`, so `eᵀ g e = I`.
pub fn orthonormal_vielbein(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(inverse_sqrt(g, None)?.0)
}

/// `g^{-1/2}` and, for a perturbation `dg`, its first-order variation. The
/// variation solves `dS S + S dS = d(g⁻¹)` in the eigenbasis of `g`.
fn inverse_sqrt(g: &DMatrix<f64>, dg: Option<&DMatrix<f64>>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let k = g.nrows();
    if k != g.ncols() {
        return Err(GeomError::DimensionMismatch(format!("{}x{} block", k, g.ncols())));
    }
    let eig = SymmetricEigen::new(g.clone());
    let min = eig.eigenvalues.min();
    if !(min > 0.0) {
        return Err(GeomError::NotPositiveDefinite(min));
    }
    let v = &eig.eigenvectors;
    let s: Vec<f64> = eig.eigenvalues.iter().map(|l| 1.0 / l.sqrt()).collect();
    let e = v * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(s.clone())) * v.transpose();
    let de = match dg {
        None => DMatrix::zeros(k, k),
        Some(dg) => {
            let ginv = &e * &e;
            let dinv = -(&ginv * dg * &ginv);
            let mut m = v.transpose() * dinv * v;
            for i in 0..k {
                for j in 0..k {
                    m[(i, j)] /= s[i] + s[j];
                }
            }
            v * m * v.transpose()
        }
    };
    Ok((e, de))
}

/// Spin data at a point: block-diagonal vielbein over the adapted frame,
/// curved gammas, and the spin connection matrix for every frame direction.
#[derive(Debug, Clone)]
pub struct SpinPoint {
    pub vielbein: DMatrix<f64>,
    pub gammas: Vec<CMatrix>,
    pub omega: Vec<CMatrix>,
}

/// Spin data for `conn` at `u`.
///
/// With the orthonormal frame `ê_β̂ = E^β_β̂ e_β`, the connection one-form is
/// `ω^α̂_β̂μ = (E⁻¹)^α̂_α (e_μ E^α_β̂ + Γ^α_βμ E^β_β̂)` and the spin matrix is
/// `Ω_μ = ¼ ω^α̂_β̂μ γ^α̂ γ^β̂`. This sign makes the curved gammas parallel:
/// `e_μ γ^ν + [Ω_μ, γ^ν] + Γ^ν_λμ γ^λ = 0`.
pub fn spin_point(conn: &DConnection, rep: &CliffordRep, u: &ChartPoint) -> Result<SpinPoint> {
    let dm = conn.metric();
    let (n, m) = (dm.n(), dm.m());
    let dim = n + m;
    if rep.dim != dim {
        return Err(GeomError::DimensionMismatch(format!(
            "representation of dimension {} for a {dim}-dimensional d-metric",
            rep.dim
        )));
    }
    let blocks = dm.blocks(u, 1)?;
    let coeffs = conn.coefficients(u, 0)?.values();
    let pt = blocks.point();

    // Derivatives of both blocks along each adapted direction.
    let direction_derivs = |mu: usize| -> (DMatrix<f64>, DMatrix<f64>) {
        let d = |j: &crate::jet::Jet| {
            if mu < n {
                blocks.elongate(j, mu).value()
            } else {
                j.deriv(mu).value()
            }
        };
        (
            DMatrix::from_fn(n, n, |i, j| d(&blocks.g[i * n + j])),
            DMatrix::from_fn(m, m, |a, b| d(&blocks.h[a * m + b])),
        )
    };
    let (eg, _) = inverse_sqrt(&pt.g, None)?;
    let (eh, _) = inverse_sqrt(&pt.h, None)?;
    let mut vielbein = DMatrix::zeros(dim, dim);
    vielbein.view_mut((0, 0), (n, n)).copy_from(&eg);
    vielbein.view_mut((n, n), (m, m)).copy_from(&eh);
    let mut inv = DMatrix::zeros(dim, dim);
    inv.view_mut((0, 0), (n, n)).copy_from(&(&pt.g * &eg));
    inv.view_mut((n, n), (m, m)).copy_from(&(&pt.h * &eh));

    let gammas = rep.curved(&vielbein);
    let k = rep.size();
    let mut omega = Vec::with_capacity(dim);
    for mu in 0..dim {
        let (dg, dh) = direction_derivs(mu);
        let (_, deg) = inverse_sqrt(&pt.g, Some(&dg))?;
        let (_, deh) = inverse_sqrt(&pt.h, Some(&dh))?;
        let mut de = DMatrix::zeros(dim, dim);
        de.view_mut((0, 0), (n, n)).copy_from(&deg);
        de.view_mut((n, n), (m, m)).copy_from(&deh);
        let gamma = DMatrix::from_fn(dim, dim, |al, be| {
            coeffs.frame(al, be, mu).copied().unwrap_or(0.0)
        });
        let w = &inv * (de + gamma * &vielbein);
        // Symmetric parts of `ω` collapse onto the identity through the
        // anticommutator; split them off so metric-compatible terms stay
        // exactly anti-Hermitian.
        let mut om = CMatrix::identity(k, k) * Complex64::new(0.25 * w.trace(), 0.0);
        for a in 0..dim {
            for b in 0..dim {
                let c = 0.125 * (w[(a, b)] - w[(b, a)]);
                if a != b && c != 0.0 {
                    om += &rep.gammas[a] * &rep.gammas[b] * Complex64::new(c, 0.0);
                }
            }
        }
        omega.push(om);
    }
    Ok(SpinPoint {
        vielbein,
        gammas,
        omega,
    })
}

/// The spin connection matrix `Ω_μ` along adapted direction `mu`
/// (horizontal directions first).
pub fn spin_dconnection_term(
    conn: &DConnection,
    rep: &CliffordRep,
    u: &ChartPoint,
    mu: usize,
) -> Result<CMatrix> {
    let sp = spin_point(conn, rep, u)?;
    sp.omega.into_iter().nth(mu).ok_or_else(|| {
        GeomError::InvalidInput(format!("direction {mu} outside the adapted frame"))
    })
}
