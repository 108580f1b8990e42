//! d-curvature blocks, Ricci d-tensor, scalar curvature, Einstein d-tensor.
//!
//! `R^α_βγδ` in the full frame is the `e_α` component of `R(e_γ, e_δ) e_β`.
//! The named blocks follow the d-curvature index order, e.g. `R^i_hjk` is the
//! full component `[i][h][k][j]`.

use serde::Serialize;

use crate::dconn::{Coefficients, DConnection, DeformationTensor};
use crate::error::{GeomError, Result};
use crate::jet::{ChartPoint, Jet};
use crate::nlc::{omega_jets, BlockJets, DMetric};

/// The six irreducible d-curvature blocks at a point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureTensor {
    pub n: usize,
    pub m: usize,
    /// `R^i_hjk` at `((i * n + h) * n + j) * n + k`.
    pub hhhh: Vec<f64>,
    /// `R^a_bjk` at `((a * m + b) * n + j) * n + k`.
    pub vvhh: Vec<f64>,
    /// `R^i_jka` at `((i * n + j) * n + k) * m + a`.
    pub hhhv: Vec<f64>,
    /// `R^c_bka` at `((c * m + b) * n + k) * m + a`.
    pub vvhv: Vec<f64>,
    /// `R^i_jbc` at `((i * n + j) * m + b) * m + c`.
    pub hhvv: Vec<f64>,
    /// `R^a_bcd` at `((a * m + b) * m + c) * m + d`.
    pub vvvv: Vec<f64>,
}

impl CurvatureTensor {
    fn zeros(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            hhhh: vec![0.0; n * n * n * n],
            vvhh: vec![0.0; m * m * n * n],
            hhhv: vec![0.0; n * n * n * m],
            vvhv: vec![0.0; m * m * n * m],
            hhvv: vec![0.0; n * n * m * m],
            vvvv: vec![0.0; m * m * m * m],
        }
    }

    pub fn r_hhhh(&self, i: usize, h: usize, j: usize, k: usize) -> f64 {
        let n = self.n;
        self.hhhh[((i * n + h) * n + j) * n + k]
    }

    pub fn r_vvhh(&self, a: usize, b: usize, j: usize, k: usize) -> f64 {
        let (n, m) = (self.n, self.m);
        self.vvhh[((a * m + b) * n + j) * n + k]
    }

    pub fn r_hhhv(&self, i: usize, j: usize, k: usize, a: usize) -> f64 {
        let (n, m) = (self.n, self.m);
        self.hhhv[((i * n + j) * n + k) * m + a]
    }

    pub fn r_vvhv(&self, c: usize, b: usize, k: usize, a: usize) -> f64 {
        let (n, m) = (self.n, self.m);
        self.vvhv[((c * m + b) * n + k) * m + a]
    }

    pub fn r_hhvv(&self, i: usize, j: usize, b: usize, c: usize) -> f64 {
        let (n, m) = (self.n, self.m);
        self.hhvv[((i * n + j) * m + b) * m + c]
    }

    pub fn r_vvvv(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let m = self.m;
        self.vvvv[((a * m + b) * m + c) * m + d]
    }

    fn blocks(&self) -> [&Vec<f64>; 6] {
        [&self.hhhh, &self.vvhh, &self.hhhv, &self.vvhv, &self.hhvv, &self.vvvv]
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks()
            .iter()
            .flat_map(|b| b.iter())
            .fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.blocks()
            .iter()
            .zip(other.blocks())
            .flat_map(|(a, b)| a.iter().zip(b.iter()))
            .fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
    }

    /// Read the blocks off a full-frame tensor.
    pub fn from_full(full: &FullCurvature, n: usize, m: usize) -> Self {
        let mut r = Self::zeros(n, m);
        let f = |a: usize, b: usize, c: usize, d: usize| full.get(a, b, c, d);
        for i in 0..n {
            for h in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        r.hhhh[((i * n + h) * n + j) * n + k] = f(i, h, k, j);
                    }
                    for a in 0..m {
                        r.hhhv[((i * n + h) * n + j) * m + a] = f(i, h, n + a, j);
                    }
                }
                for b in 0..m {
                    for c in 0..m {
                        r.hhvv[((i * n + h) * m + b) * m + c] = f(i, h, n + c, n + b);
                    }
                }
            }
        }
        for a in 0..m {
            for b in 0..m {
                for j in 0..n {
                    for k in 0..n {
                        r.vvhh[((a * m + b) * n + j) * n + k] = f(n + a, n + b, k, j);
                    }
                    for c in 0..m {
                        r.vvhv[((a * m + b) * n + j) * m + c] = f(n + a, n + b, n + c, j);
                    }
                }
                for c in 0..m {
                    for d in 0..m {
                        r.vvvv[((a * m + b) * m + c) * m + d] = f(n + a, n + b, n + d, n + c);
                    }
                }
            }
        }
        r
    }
}

/// Numeric data needed by the curvature formulas at a point.
struct Frame {
    n: usize,
    m: usize,
    blocks: BlockJets,
    omega: Vec<f64>,
}

impl Frame {
    fn new(dm: &DMetric, u: &ChartPoint) -> Result<Self> {
        let blocks = dm.blocks(u, 1)?;
        let (n, m) = (blocks.n, blocks.m);
        let omega = omega_jets(&blocks.nconn, n, m).iter().map(Jet::value).collect();
        Ok(Self { n, m, blocks, omega })
    }

    fn dim(&self) -> usize {
        self.n + self.m
    }

    /// `e_γ` applied to an order-1 jet.
    fn e(&self, f: &Jet, ga: usize) -> f64 {
        if ga < self.n {
            self.blocks.elongate(f, ga).value()
        } else {
            f.deriv(ga).value()
        }
    }

    /// `Ω^a_ij`.
    fn omega(&self, a: usize, i: usize, j: usize) -> f64 {
        self.omega[(a * self.n + i) * self.n + j]
    }

    /// `∂_b N^a_k`.
    fn dn(&self, a: usize, k: usize, b: usize) -> f64 {
        self.blocks.nconn[a * self.n + k].deriv(self.n + b).value()
    }

    /// Structure functions `[e_γ, e_δ] = W^μ_γδ e_μ`.
    fn w(&self, mu: usize, ga: usize, de: usize) -> f64 {
        let n = self.n;
        match (ga < n, de < n) {
            (true, true) if mu >= n => self.omega(mu - n, ga, de),
            (true, false) if mu >= n => self.dn(mu - n, ga, de - n),
            (false, true) if mu >= n => -self.dn(mu - n, de, ga - n),
            _ => 0.0,
        }
    }
}

fn check_order(c: &Coefficients<Jet>) -> Result<()> {
    if c.order() < 1 {
        return Err(GeomError::InvalidInput(
            "curvature needs coefficient jets of order at least 1".into(),
        ));
    }
    Ok(())
}

/// The six d-curvature blocks of `conn` at `u`.
pub fn dcurvature(conn: &DConnection, u: &ChartPoint) -> Result<CurvatureTensor> {
    let fr = Frame::new(conn.metric(), u)?;
    let cj = conn.coefficients(u, 1)?;
    check_order(&cj)?;
    Ok(blocks_from_coefficients(&fr, &cj))
}

fn blocks_from_coefficients(fr: &Frame, cj: &Coefficients<Jet>) -> CurvatureTensor {
    let (n, m) = (fr.n, fr.m);
    let c = cj.values();
    let l = |i: usize, j: usize, k: usize| *c.lh(i, j, k);
    let lv = |a: usize, b: usize, k: usize| *c.lv(a, b, k);
    let ch = |i: usize, j: usize, a: usize| *c.ch(i, j, a);
    let cv = |a: usize, b: usize, d: usize| *c.cv(a, b, d);
    let mut r = CurvatureTensor::zeros(n, m);

    for i in 0..n {
        for h in 0..n {
            for j in 0..n {
                for k in (j + 1)..n {
                    let mut v = fr.e(cj.lh(i, h, j), k) - fr.e(cj.lh(i, h, k), j);
                    for mm in 0..n {
                        v += l(mm, h, j) * l(i, mm, k) - l(mm, h, k) * l(i, mm, j);
                    }
                    for a in 0..m {
                        v -= ch(i, h, a) * fr.omega(a, k, j);
                    }
                    r.hhhh[((i * n + h) * n + j) * n + k] = v;
                    r.hhhh[((i * n + h) * n + k) * n + j] = -v;
                }
            }
        }
    }

    for a in 0..m {
        for b in 0..m {
            for j in 0..n {
                for k in (j + 1)..n {
                    let mut v = fr.e(cj.lv(a, b, j), k) - fr.e(cj.lv(a, b, k), j);
                    for cc in 0..m {
                        v += lv(cc, b, j) * lv(a, cc, k) - lv(cc, b, k) * lv(a, cc, j);
                        v -= cv(a, b, cc) * fr.omega(cc, k, j);
                    }
                    r.vvhh[((a * m + b) * n + j) * n + k] = v;
                    r.vvhh[((a * m + b) * n + k) * n + j] = -v;
                }
            }
        }
    }

    // mixed torsion T^b_ka = ∂_a N^b_k − L^b_ak
    let t = |b: usize, k: usize, a: usize| fr.dn(b, k, a) - lv(b, a, k);

    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for a in 0..m {
                    // D_k C^i_ja on all three indices
                    let mut dkc = fr.e(cj.ch(i, j, a), k);
                    for mm in 0..n {
                        dkc += l(i, mm, k) * ch(mm, j, a) - l(mm, j, k) * ch(i, mm, a);
                    }
                    for b in 0..m {
                        dkc -= lv(b, a, k) * ch(i, j, b);
                    }
                    let mut v = fr.e(cj.lh(i, j, k), n + a) - dkc;
                    for b in 0..m {
                        v += ch(i, j, b) * t(b, k, a);
                    }
                    r.hhhv[((i * n + j) * n + k) * m + a] = v;
                }
            }
        }
    }

    for cc in 0..m {
        for b in 0..m {
            for k in 0..n {
                for a in 0..m {
                    let mut dkc = fr.e(cj.cv(cc, b, a), k);
                    for d in 0..m {
                        dkc += lv(cc, d, k) * cv(d, b, a)
                            - lv(d, b, k) * cv(cc, d, a)
                            - lv(d, a, k) * cv(cc, b, d);
                    }
                    let mut v = fr.e(cj.lv(cc, b, k), n + a) - dkc;
                    for d in 0..m {
                        v += cv(cc, b, d) * t(d, k, a);
                    }
                    r.vvhv[((cc * m + b) * n + k) * m + a] = v;
                }
            }
        }
    }

    for i in 0..n {
        for j in 0..n {
            for b in 0..m {
                for cc in (b + 1)..m {
                    let mut v = fr.e(cj.ch(i, j, b), n + cc) - fr.e(cj.ch(i, j, cc), n + b);
                    for h in 0..n {
                        v += ch(h, j, b) * ch(i, h, cc) - ch(h, j, cc) * ch(i, h, b);
                    }
                    r.hhvv[((i * n + j) * m + b) * m + cc] = v;
                    r.hhvv[((i * n + j) * m + cc) * m + b] = -v;
                }
            }
        }
    }

    for a in 0..m {
        for b in 0..m {
            for cc in 0..m {
                for d in (cc + 1)..m {
                    let mut v = fr.e(cj.cv(a, b, cc), n + d) - fr.e(cj.cv(a, b, d), n + cc);
                    for e in 0..m {
                        v += cv(e, b, cc) * cv(a, e, d) - cv(e, b, d) * cv(a, e, cc);
                    }
                    r.vvvv[((a * m + b) * m + cc) * m + d] = v;
                    r.vvvv[((a * m + b) * m + d) * m + cc] = -v;
                }
            }
        }
    }
    r
}

/// The three blocks of the tangent-bundle model: `R^i_hjk`, `R^i_jka`, `R^a_bcd`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TangentCurvature {
    pub n: usize,
    pub hhhh: Vec<f64>,
    pub hhhv: Vec<f64>,
    pub vvvv: Vec<f64>,
}

pub fn tangent_dcurvature(conn: &DConnection, u: &ChartPoint) -> Result<TangentCurvature> {
    let dm = conn.metric();
    if dm.n() != dm.m() {
        return Err(GeomError::DimensionMismatch(format!(
            "tangent curvature needs n = m, got n={}, m={}",
            dm.n(),
            dm.m()
        )));
    }
    let r = dcurvature(conn, u)?;
    Ok(TangentCurvature {
        n: r.n,
        hhhh: r.hhhh,
        hhhv: r.hhhv,
        vvvv: r.vvvv,
    })
}

/// Curvature over the whole adapted frame, `[α][β][γ][δ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FullCurvature {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl FullCurvature {
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let k = self.dim;
        self.data[((a * k + b) * k + c) * k + d]
    }
}

fn gamma(c: &Coefficients<f64>, al: usize, be: usize, ga: usize) -> f64 {
    c.frame(al, be, ga).copied().unwrap_or(0.0)
}

/// `e_γΓ^α_βδ − e_δΓ^α_βγ + Γ^μ_βδΓ^α_μγ − Γ^μ_βγΓ^α_μδ − W^μ_γδΓ^α_βμ`.
fn full_from_coefficients(fr: &Frame, cj: &Coefficients<Jet>) -> FullCurvature {
    let dim = fr.dim();
    let c = cj.values();
    let ej = |al: usize, be: usize, de: usize, ga: usize| {
        cj.frame(al, be, de).map_or(0.0, |j| fr.e(j, ga))
    };
    let mut data = vec![0.0; dim * dim * dim * dim];
    for al in 0..dim {
        for be in 0..dim {
            for ga in 0..dim {
                for de in 0..dim {
                    let mut v = ej(al, be, de, ga) - ej(al, be, ga, de);
                    for mu in 0..dim {
                        v += gamma(&c, mu, be, de) * gamma(&c, al, mu, ga)
                            - gamma(&c, mu, be, ga) * gamma(&c, al, mu, de)
                            - fr.w(mu, ga, de) * gamma(&c, al, be, mu);
                    }
                    data[((al * dim + be) * dim + ga) * dim + de] = v;
                }
            }
        }
    }
    FullCurvature { dim, data }
}

/// Full-frame curvature computed directly from the connection 1-forms.
pub fn full_frame_curvature(conn: &DConnection, u: &ChartPoint) -> Result<FullCurvature> {
    let fr = Frame::new(conn.metric(), u)?;
    let cj = conn.coefficients(u, 1)?;
    check_order(&cj)?;
    Ok(full_from_coefficients(&fr, &cj))
}

/// Ricci d-tensor blocks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RicciDTensor {
    pub n: usize,
    pub m: usize,
    /// `R_ij`, row-major `n × n`.
    pub hh: Vec<f64>,
    /// `R_ia`, `n × m`.
    pub hv: Vec<f64>,
    /// `R_ai`, `m × n`.
    pub vh: Vec<f64>,
    /// `R_ab`, `m × m`.
    pub vv: Vec<f64>,
}

impl RicciDTensor {
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        [(&self.hh, &other.hh), (&self.hv, &other.hv), (&self.vh, &other.vh), (&self.vv, &other.vv)]
            .iter()
            .flat_map(|(a, b)| a.iter().zip(b.iter()))
            .fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
    }
}

/// `R_ij = R^k_ijk`, `R_ia = −R^k_ika`, `R_ai = R^b_aib`, `R_ab = R^c_abc`.
pub fn ricci(r: &CurvatureTensor) -> RicciDTensor {
    let (n, m) = (r.n, r.m);
    let mut out = RicciDTensor {
        n,
        m,
        hh: vec![0.0; n * n],
        hv: vec![0.0; n * m],
        vh: vec![0.0; m * n],
        vv: vec![0.0; m * m],
    };
    for i in 0..n {
        for j in 0..n {
            out.hh[i * n + j] = (0..n).map(|k| r.r_hhhh(k, i, j, k)).sum();
        }
        for a in 0..m {
            out.hv[i * m + a] = -(0..n).map(|k| r.r_hhhv(k, i, k, a)).sum::<f64>();
        }
    }
    for a in 0..m {
        for i in 0..n {
            out.vh[a * n + i] = (0..m).map(|b| r.r_vvhv(b, a, i, b)).sum();
        }
        for b in 0..m {
            out.vv[a * m + b] = (0..m).map(|c| r.r_vvvv(c, a, b, c)).sum();
        }
    }
    out
}

impl FullCurvature {
    /// `R_αβ = Σ_τ R^τ_{α τ β}` in the full-frame index order.
    pub fn ricci(&self, n: usize, m: usize) -> RicciDTensor {
        let dim = self.dim;
        let at = |a: usize, b: usize| (0..dim).map(|t| self.get(t, a, t, b)).sum::<f64>();
        RicciDTensor {
            n,
            m,
            hh: (0..n * n).map(|k| at(k / n, k % n)).collect(),
            hv: (0..n * m).map(|k| at(k / m, n + k % m)).collect(),
            vh: (0..m * n).map(|k| at(n + k / n, k % n)).collect(),
            vv: (0..m * m).map(|k| at(n + k / m, n + k % m)).collect(),
        }
    }
}

/// `g^{ij}R_ij + h^{ab}R_ab`.
pub fn scalar_curvature(ric: &RicciDTensor, dm: &DMetric, u: &ChartPoint) -> Result<f64> {
    let p = dm.at(u)?;
    let ginv = crate::jetmat::checked_inverse(&p.g)?;
    let hinv = crate::jetmat::checked_inverse(&p.h)?;
    let (n, m) = (ric.n, ric.m);
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += ginv[(i, j)] * ric.hh[i * n + j];
        }
    }
    for a in 0..m {
        for b in 0..m {
            s += hinv[(a, b)] * ric.vv[a * m + b];
        }
    }
    Ok(s)
}

/// Einstein d-tensor `R_αβ − ½ g_αβ R`, with the block d-metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EinsteinDTensor {
    pub scalar: f64,
    pub hh: Vec<f64>,
    pub hv: Vec<f64>,
    pub vh: Vec<f64>,
    pub vv: Vec<f64>,
}

pub fn einstein_dtensor(ric: &RicciDTensor, dm: &DMetric, u: &ChartPoint) -> Result<EinsteinDTensor> {
    let scalar = scalar_curvature(ric, dm, u)?;
    let p = dm.at(u)?;
    let (n, m) = (ric.n, ric.m);
    Ok(EinsteinDTensor {
        scalar,
        hh: (0..n * n)
            .map(|k| ric.hh[k] - 0.5 * p.g[(k / n, k % n)] * scalar)
            .collect(),
        hv: ric.hv.clone(),
        vh: ric.vh.clone(),
        vv: (0..m * m)
            .map(|k| ric.vv[k] - 0.5 * p.h[(k / m, k % m)] * scalar)
            .collect(),
    })
}

/// Curvature of `base + P` assembled as `R̂ + D̂P + P∧P`.
pub fn deform_curvature(
    base: &DConnection,
    p: &DeformationTensor,
    u: &ChartPoint,
) -> Result<CurvatureTensor> {
    let dm = base.metric();
    if p.dims() != (dm.n(), dm.m()) {
        return Err(GeomError::DimensionMismatch(format!(
            "deformation {:?} on a ({}, {}) connection",
            p.dims(),
            dm.n(),
            dm.m()
        )));
    }
    let fr = Frame::new(dm, u)?;
    let gj = base.coefficients(u, 1)?;
    let pj = p.at(u, 1)?;
    check_order(&pj)?;
    let base_full = full_from_coefficients(&fr, &gj);
    let dim = fr.dim();
    let g = gj.values();
    let pv = pj.values();
    let gm = |a: usize, b: usize, c: usize| gamma(&g, a, b, c);
    let pm = |a: usize, b: usize, c: usize| gamma(&pv, a, b, c);
    let ep = |a: usize, b: usize, c: usize, dir: usize| pj.frame(a, b, c).map_or(0.0, |j| fr.e(j, dir));
    // D̂_γ P^α_βδ
    let cov = |al: usize, be: usize, de: usize, ga: usize| {
        let mut v = ep(al, be, de, ga);
        for mu in 0..dim {
            v += gm(al, mu, ga) * pm(mu, be, de)
                - gm(mu, be, ga) * pm(al, mu, de)
                - gm(mu, de, ga) * pm(al, be, mu);
        }
        v
    };
    let mut data = base_full.data.clone();
    for al in 0..dim {
        for be in 0..dim {
            for ga in 0..dim {
                for de in 0..dim {
                    let mut v = cov(al, be, de, ga) - cov(al, be, ga, de);
                    for mu in 0..dim {
                        let torsion = gm(mu, de, ga) - gm(mu, ga, de) - fr.w(mu, ga, de);
                        v += torsion * pm(al, be, mu);
                        v += pm(al, mu, ga) * pm(mu, be, de) - pm(al, mu, de) * pm(mu, be, ga);
                    }
                    data[((al * dim + be) * dim + ga) * dim + de] += v;
                }
            }
        }
    }
    Ok(CurvatureTensor::from_full(
        &FullCurvature { dim, data },
        dm.n(),
        dm.m(),
    ))
}
