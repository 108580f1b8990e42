//! Distinguished connections: canonical, Cartan-type, Chern, Berwald and
//! deformations; d-torsion and metricity.
//!
//! Index convention: `D_{e_γ} e_β = Γ^α_βγ e_α`, the direction is the last
//! lower index. The four families are `L^i_jk`, `L^a_bk`, `C^i_jc`, `C^a_bc`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::dsl::{ChartSpec, Expression};
use crate::error::{GeomError, Result};
use crate::jet::{ChartPoint, Jet};
use crate::jetmat;
use crate::nlc::{omega_jets, BlockJets, DMetric};

/// The four coefficient families of a d-connection (or a d-tensor of the same
/// shape) at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients<T> {
    pub n: usize,
    pub m: usize,
    /// `L^i_jk` at `(i * n + j) * n + k`.
    pub lh: Vec<T>,
    /// `L^a_bk` at `(a * m + b) * n + k`.
    pub lv: Vec<T>,
    /// `C^i_jc` at `(i * n + j) * m + c`.
    pub ch: Vec<T>,
    /// `C^a_bc` at `(a * m + b) * m + c`.
    pub cv: Vec<T>,
}

impl<T> Coefficients<T> {
    pub fn lh(&self, i: usize, j: usize, k: usize) -> &T {
        &self.lh[(i * self.n + j) * self.n + k]
    }

    pub fn lv(&self, a: usize, b: usize, k: usize) -> &T {
        &self.lv[(a * self.m + b) * self.n + k]
    }

    pub fn ch(&self, i: usize, j: usize, c: usize) -> &T {
        &self.ch[(i * self.n + j) * self.m + c]
    }

    pub fn cv(&self, a: usize, b: usize, c: usize) -> &T {
        &self.cv[(a * self.m + b) * self.m + c]
    }

    /// `Γ^α_βγ` over the full adapted frame (horizontal indices first);
    /// `None` marks the components a d-connection forces to zero.
    pub fn frame(&self, al: usize, be: usize, ga: usize) -> Option<&T> {
        let n = self.n;
        match (al < n, be < n, ga < n) {
            (true, true, true) => Some(self.lh(al, be, ga)),
            (true, true, false) => Some(self.ch(al, be, ga - n)),
            (false, false, true) => Some(self.lv(al - n, be - n, ga)),
            (false, false, false) => Some(self.cv(al - n, be - n, ga - n)),
            _ => None,
        }
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> Coefficients<U> {
        Coefficients {
            n: self.n,
            m: self.m,
            lh: self.lh.iter().map(&f).collect(),
            lv: self.lv.iter().map(&f).collect(),
            ch: self.ch.iter().map(&f).collect(),
            cv: self.cv.iter().map(&f).collect(),
        }
    }

    fn zip<U>(&self, other: &Self, f: impl Fn(&T, &T) -> U) -> Result<Coefficients<U>> {
        if self.n != other.n || self.m != other.m {
            return Err(GeomError::DimensionMismatch(format!(
                "({}, {}) against ({}, {})",
                self.n, self.m, other.n, other.m
            )));
        }
        let z = |a: &[T], b: &[T]| a.iter().zip(b).map(|(x, y)| f(x, y)).collect();
        Ok(Coefficients {
            n: self.n,
            m: self.m,
            lh: z(&self.lh, &other.lh),
            lv: z(&self.lv, &other.lv),
            ch: z(&self.ch, &other.ch),
            cv: z(&self.cv, &other.cv),
        })
    }

    fn families(&self) -> [&[T]; 4] {
        [&self.lh, &self.lv, &self.ch, &self.cv]
    }
}

impl Coefficients<Jet> {
    pub fn values(&self) -> Coefficients<f64> {
        self.map(Jet::value)
    }

    pub fn truncate(&self, order: u8) -> Self {
        self.map(|j| j.truncate(order))
    }

    pub fn order(&self) -> u8 {
        self.lh[0].order()
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a + b)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a - b)
    }
}

impl Coefficients<f64> {
    pub fn max_abs(&self) -> f64 {
        self.families()
            .iter()
            .flat_map(|f| f.iter())
            .fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        Ok(self.zip(other, |a, b| a - b)?.max_abs())
    }
}

fn zeros(proto: &Jet, len: usize) -> Vec<Jet> {
    vec![Jet::constant(proto.space(), proto.order(), 0.0); len]
}

/// `Σ_r inv[i][r] * v[r]` over a row-major inverse of size `k`.
fn contract(inv: &[Jet], k: usize, i: usize, v: impl Fn(usize) -> Jet) -> Jet {
    let mut acc = &inv[i * k] * &v(0);
    for r in 1..k {
        acc = &acc + &(&inv[i * k + r] * &v(r));
    }
    acc
}

/// Canonical d-connection from blocks one order above the result.
fn canonical_from_blocks(b: &BlockJets) -> Result<Coefficients<Jet>> {
    let (n, m) = (b.n, b.m);
    let order = b.order() - 1;
    let g: Vec<Jet> = b.g.iter().map(|j| j.truncate(order)).collect();
    let h: Vec<Jet> = b.h.iter().map(|j| j.truncate(order)).collect();
    let ginv = jetmat::inverse(&g, n)?;
    let hinv = jetmat::inverse(&h, m)?;
    let eg = |j: usize, r: usize, k: usize| b.elongate(&b.g[j * n + r], k);
    let dn = |a: usize, k: usize, c: usize| b.nconn[a * n + k].deriv(n + c);
    let proto = &g[0];

    let mut lh = zeros(proto, n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in j..n {
                let v = contract(&ginv, n, i, |r| {
                    &(&eg(j, r, k) + &eg(k, r, j)) - &eg(j, k, r)
                })
                .scale(0.5);
                lh[(i * n + k) * n + j] = v.clone();
                lh[(i * n + j) * n + k] = v;
            }
        }
    }

    let mut lv = zeros(proto, m * m * n);
    for a in 0..m {
        for bb in 0..m {
            for k in 0..n {
                let inner = contract(&hinv, m, a, |c| {
                    let mut t = b.elongate(&b.h[bb * m + c], k);
                    for d in 0..m {
                        t = &t - &(&dn(d, k, bb) * &h[d * m + c]);
                        t = &t - &(&dn(d, k, c) * &h[d * m + bb]);
                    }
                    t
                });
                lv[(a * m + bb) * n + k] = &dn(a, k, bb) + &inner.scale(0.5);
            }
        }
    }

    let mut ch = zeros(proto, n * n * m);
    for i in 0..n {
        for j in 0..n {
            for c in 0..m {
                ch[(i * n + j) * m + c] =
                    contract(&ginv, n, i, |k| b.g[j * n + k].deriv(n + c)).scale(0.5);
            }
        }
    }

    let mut cv = zeros(proto, m * m * m);
    let dh = |r: usize, s: usize, c: usize| b.h[r * m + s].deriv(n + c);
    for a in 0..m {
        for bb in 0..m {
            for c in bb..m {
                let v = contract(&hinv, m, a, |d| &(&dh(bb, d, c) + &dh(c, d, bb)) - &dh(bb, c, d))
                    .scale(0.5);
                cv[(a * m + c) * m + bb] = v.clone();
                cv[(a * m + bb) * m + c] = v;
            }
        }
    }
    Ok(Coefficients { n, m, lh, lv, ch, cv })
}

/// Cartan-type coefficients `(L̂^i_jk, Ĉ^i_jk)` on a tangent chart.
fn tangent_from_blocks(b: &BlockJets) -> Result<(Vec<Jet>, Vec<Jet>)> {
    let n = b.n;
    let order = b.order() - 1;
    let g: Vec<Jet> = b.g.iter().map(|j| j.truncate(order)).collect();
    let ginv = jetmat::inverse(&g, n)?;
    let eg = |j: usize, r: usize, k: usize| b.elongate(&b.g[j * n + r], k);
    let dg = |j: usize, r: usize, k: usize| b.g[j * n + r].deriv(n + k);
    let mut lh = zeros(&g[0], n * n * n);
    let mut c = zeros(&g[0], n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in j..n {
                let l = contract(&ginv, n, i, |r| &(&eg(j, r, k) + &eg(k, r, j)) - &eg(j, k, r))
                    .scale(0.5);
                let v = contract(&ginv, n, i, |r| &(&dg(j, r, k) + &dg(k, r, j)) - &dg(j, k, r))
                    .scale(0.5);
                lh[(i * n + k) * n + j] = l.clone();
                lh[(i * n + j) * n + k] = l;
                c[(i * n + k) * n + j] = v.clone();
                c[(i * n + j) * n + k] = v;
            }
        }
    }
    Ok((lh, c))
}

fn require_tangent(dm: &DMetric) -> Result<()> {
    if dm.n() != dm.m() {
        return Err(GeomError::DimensionMismatch(format!(
            "tangent-bundle connection needs n = m, got n={}, m={}",
            dm.n(),
            dm.m()
        )));
    }
    Ok(())
}

type DeformFn = dyn Fn(&ChartPoint, u8) -> Result<Coefficients<Jet>> + Send + Sync;

/// A d-tensor `P^α_βγ(u)` with the four-family layout, evaluated on demand.
#[derive(Clone)]
pub struct DeformationTensor {
    n: usize,
    m: usize,
    label: String,
    eval: Arc<DeformFn>,
}

impl fmt::Debug for DeformationTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DeformationTensor({}, n={}, m={})", self.label, self.n, self.m)
    }
}

impl DeformationTensor {
    pub fn from_fn(
        n: usize,
        m: usize,
        label: impl Into<String>,
        f: impl Fn(&ChartPoint, u8) -> Result<Coefficients<Jet>> + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            m,
            label: label.into(),
            eval: Arc::new(f),
        }
    }

    pub fn zero(n: usize, m: usize) -> Self {
        Self::from_fn(n, m, "zero", move |u, order| {
            let s = crate::jet::seed(u, order)?;
            let z = |len| zeros(&s[0], len);
            Ok(Coefficients {
                n,
                m,
                lh: z(n * n * n),
                lv: z(m * m * n),
                ch: z(n * n * m),
                cv: z(m * m * m),
            })
        })
    }

    /// Families given as expressions over the chart, in the layout of
    /// [`Coefficients`].
    pub fn from_expressions(chart: &ChartSpec, families: [Vec<Expression>; 4]) -> Result<Self> {
        let (n, m) = (chart.n, chart.m);
        let sizes = [n * n * n, m * m * n, n * n * m, m * m * m];
        if families.iter().zip(sizes).any(|(f, s)| f.len() != s) {
            return Err(GeomError::DimensionMismatch(format!(
                "deformation families must have sizes {sizes:?}"
            )));
        }
        let families = Arc::new(families);
        Ok(Self::from_fn(n, m, "expressions", move |u, order| {
            let s = crate::jet::seed(u, order)?;
            let eval = |es: &[Expression]| -> Result<Vec<Jet>> {
                es.iter().map(|e| e.eval_jet(&s[..n], &s[n..])).collect()
            };
            Ok(Coefficients {
                n,
                m,
                lh: eval(&families[0])?,
                lv: eval(&families[1])?,
                ch: eval(&families[2])?,
                cv: eval(&families[3])?,
            })
        }))
    }

    /// `a − b`, so that `deform(b, difference(a, b)) = a`.
    pub fn difference(a: &DConnection, b: &DConnection) -> Result<Self> {
        if a.dm.n() != b.dm.n() || a.dm.m() != b.dm.m() {
            return Err(GeomError::DimensionMismatch("connections on different charts".into()));
        }
        let (a, b) = (a.clone(), b.clone());
        Ok(Self::from_fn(a.dm.n(), a.dm.m(), "difference", move |u, order| {
            a.coefficients(u, order)?.try_sub(&b.coefficients(u, order)?)
        }))
    }

    /// `P̂` taking the adapted Levi-Civita families to the canonical
    /// d-connection: `P^a_bk = ∂_b N^a_k`, `P^i_jc = −½ g^{ik} Ω^a_kj h_ca`,
    /// other families zero.
    pub fn canonical_from_levi_civita(dm: &DMetric) -> Self {
        let dm = dm.clone();
        Self::from_fn(dm.n(), dm.m(), "levi-civita-to-canonical", move |u, order| {
            let b = dm.blocks(u, order + 1)?;
            let (n, m) = (b.n, b.m);
            let g: Vec<Jet> = b.g.iter().map(|j| j.truncate(order)).collect();
            let ginv = jetmat::inverse(&g, n)?;
            let omega = omega_jets(&b.nconn, n, m);
            let h: Vec<Jet> = b.h.iter().map(|j| j.truncate(order)).collect();
            let proto = &g[0];
            let mut lv = zeros(proto, m * m * n);
            for a in 0..m {
                for bb in 0..m {
                    for k in 0..n {
                        lv[(a * m + bb) * n + k] = b.nconn[a * n + k].deriv(n + bb);
                    }
                }
            }
            let mut ch = zeros(proto, n * n * m);
            for i in 0..n {
                for j in 0..n {
                    for c in 0..m {
                        let v = contract(&ginv, n, i, |k| {
                            let mut acc = &omega[k * n + j] * &h[c * m];
                            for a in 1..m {
                                acc = &acc + &(&omega[(a * n + k) * n + j] * &h[c * m + a]);
                            }
                            acc
                        });
                        ch[(i * n + j) * m + c] = v.scale(-0.5);
                    }
                }
            }
            Ok(Coefficients {
                n,
                m,
                lh: zeros(proto, n * n * n),
                lv,
                ch,
                cv: zeros(proto, m * m * m),
            })
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    pub fn at(&self, u: &ChartPoint, order: u8) -> Result<Coefficients<Jet>> {
        (self.eval)(u, order)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Canonical,
    TangentCanonical,
    Chern,
    Berwald,
    Deformed,
}

#[derive(Debug, Clone)]
enum Kind {
    Canonical,
    TangentCanonical,
    Chern,
    Berwald,
    Deformed {
        base: Box<DConnection>,
        p: DeformationTensor,
    },
}

/// A d-connection attached to a d-metric, evaluated lazily via jets.
#[derive(Debug, Clone)]
pub struct DConnection {
    dm: DMetric,
    kind: Kind,
}

pub fn canonical_dconnection(dm: &DMetric) -> DConnection {
    DConnection {
        dm: dm.clone(),
        kind: Kind::Canonical,
    }
}

pub fn tangent_canonical(dm: &DMetric) -> Result<DConnection> {
    require_tangent(dm)?;
    Ok(DConnection {
        dm: dm.clone(),
        kind: Kind::TangentCanonical,
    })
}

pub fn chern_dconnection(dm: &DMetric) -> Result<DConnection> {
    require_tangent(dm)?;
    Ok(DConnection {
        dm: dm.clone(),
        kind: Kind::Chern,
    })
}

pub fn berwald_dconnection(dm: &DMetric) -> Result<DConnection> {
    require_tangent(dm)?;
    Ok(DConnection {
        dm: dm.clone(),
        kind: Kind::Berwald,
    })
}

pub fn deform(base: &DConnection, p: &DeformationTensor) -> Result<DConnection> {
    if p.dims() != (base.dm.n(), base.dm.m()) {
        return Err(GeomError::DimensionMismatch(format!(
            "deformation {:?} on a ({}, {}) connection",
            p.dims(),
            base.dm.n(),
            base.dm.m()
        )));
    }
    Ok(DConnection {
        dm: base.dm.clone(),
        kind: Kind::Deformed {
            base: Box::new(base.clone()),
            p: p.clone(),
        },
    })
}

impl DConnection {
    pub fn metric(&self) -> &DMetric {
        &self.dm
    }

    pub fn provenance(&self) -> Provenance {
        match self.kind {
            Kind::Canonical => Provenance::Canonical,
            Kind::TangentCanonical => Provenance::TangentCanonical,
            Kind::Chern => Provenance::Chern,
            Kind::Berwald => Provenance::Berwald,
            Kind::Deformed { .. } => Provenance::Deformed,
        }
    }

    /// Highest coefficient jet order this connection can produce.
    pub fn max_order(&self) -> u8 {
        self.dm.max_block_order() - 1
    }

    /// Coefficient jets of the given order at `u`.
    pub fn coefficients(&self, u: &ChartPoint, order: u8) -> Result<Coefficients<Jet>> {
        if order > self.max_order() {
            return Err(GeomError::OrderTooLarge(order));
        }
        match &self.kind {
            Kind::Canonical => canonical_from_blocks(&self.dm.blocks(u, order + 1)?),
            Kind::TangentCanonical | Kind::Chern => {
                let b = self.dm.blocks(u, order + 1)?;
                let (lh, c) = tangent_from_blocks(&b)?;
                let c = if matches!(self.kind, Kind::Chern) {
                    zeros(&lh[0], lh.len())
                } else {
                    c
                };
                Ok(Coefficients {
                    n: b.n,
                    m: b.m,
                    lv: lh.clone(),
                    lh,
                    ch: c.clone(),
                    cv: c,
                })
            }
            Kind::Berwald => {
                let b = self.dm.blocks(u, order + 1)?;
                let n = b.n;
                let mut lh = Vec::with_capacity(n * n * n);
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            lh.push(b.nconn[i * n + k].deriv(n + j));
                        }
                    }
                }
                let z = zeros(&lh[0], lh.len());
                Ok(Coefficients {
                    n,
                    m: n,
                    lv: lh.clone(),
                    lh,
                    ch: z.clone(),
                    cv: z,
                })
            }
            Kind::Deformed { base, p } => base.coefficients(u, order)?.try_add(&p.at(u, order)?),
        }
    }
}

/// Irreducible d-torsion components at a point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TorsionTensor {
    pub n: usize,
    pub m: usize,
    /// `T^i_jk` at `(i * n + j) * n + k`.
    pub hhh: Vec<f64>,
    /// `T^i_ja` at `(i * n + j) * m + a`.
    pub hhv: Vec<f64>,
    /// `T^a_ji` at `(a * n + j) * n + i`.
    pub vhh: Vec<f64>,
    /// `T^a_bi` at `(a * m + b) * n + i`.
    pub vvh: Vec<f64>,
    /// `T^a_bc` at `(a * m + b) * m + c`.
    pub vvv: Vec<f64>,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

impl TorsionTensor {
    pub fn max_hhh(&self) -> f64 {
        max_abs(&self.hhh)
    }

    pub fn max_vvv(&self) -> f64 {
        max_abs(&self.vvv)
    }

    pub fn max_abs(&self) -> f64 {
        [&self.hhh, &self.hhv, &self.vhh, &self.vvh, &self.vvv]
            .iter()
            .map(|v| max_abs(v))
            .fold(0.0, f64::max)
    }
}

pub fn dtorsion(conn: &DConnection, u: &ChartPoint) -> Result<TorsionTensor> {
    let dm = conn.metric();
    let (n, m) = (dm.n(), dm.m());
    let c = conn.coefficients(u, 0)?.values();
    let nj = dm.blocks(u, 1)?.nconn;
    let omega = omega_jets(&nj, n, m);
    let mut t = TorsionTensor {
        n,
        m,
        hhh: vec![0.0; n * n * n],
        hhv: vec![0.0; n * n * m],
        vhh: vec![0.0; m * n * n],
        vvh: vec![0.0; m * m * n],
        vvv: vec![0.0; m * m * m],
    };
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                t.hhh[(i * n + j) * n + k] = c.lh(i, j, k) - c.lh(i, k, j);
            }
            for a in 0..m {
                t.hhv[(i * n + j) * m + a] = *c.ch(i, j, a);
            }
        }
    }
    for a in 0..m {
        for j in 0..n {
            for i in 0..n {
                t.vhh[(a * n + j) * n + i] = omega[(a * n + j) * n + i].value();
            }
        }
        for b in 0..m {
            for i in 0..n {
                t.vvh[(a * m + b) * n + i] = nj[a * n + i].deriv(n + b).value() - c.lv(a, b, i);
            }
            for cc in 0..m {
                t.vvv[(a * m + b) * m + cc] = c.cv(a, b, cc) - c.cv(a, cc, b);
            }
        }
    }
    Ok(t)
}

/// Largest horizontal (`D_k`) and vertical (`D_c`) covariant derivative of
/// the block d-metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metricity {
    pub horizontal: f64,
    pub vertical: f64,
}

impl Metricity {
    pub fn max(&self) -> f64 {
        self.horizontal.max(self.vertical)
    }
}

pub fn metricity_defect(conn: &DConnection, u: &ChartPoint) -> Result<Metricity> {
    let b = conn.metric().blocks(u, 1)?;
    let (n, m) = (b.n, b.m);
    let c = conn.coefficients(u, 0)?.values();
    let g = |i: usize, j: usize| b.g[i * n + j].value();
    let h = |a: usize, bb: usize| b.h[a * m + bb].value();
    let mut hor: f64 = 0.0;
    let mut ver: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut v = b.elongate(&b.g[i * n + j], k).value();
                for r in 0..n {
                    v -= c.lh(r, i, k) * g(r, j) + c.lh(r, j, k) * g(i, r);
                }
                hor = hor.max(v.abs());
            }
            for cc in 0..m {
                let mut v = b.g[i * n + j].deriv(n + cc).value();
                for r in 0..n {
                    v -= c.ch(r, i, cc) * g(r, j) + c.ch(r, j, cc) * g(i, r);
                }
                ver = ver.max(v.abs());
            }
        }
    }
    for a in 0..m {
        for bb in 0..m {
            for k in 0..n {
                let mut v = b.elongate(&b.h[a * m + bb], k).value();
                for cc in 0..m {
                    v -= c.lv(cc, a, k) * h(cc, bb) + c.lv(cc, bb, k) * h(a, cc);
                }
                hor = hor.max(v.abs());
            }
            for cc in 0..m {
                let mut v = b.h[a * m + bb].deriv(n + cc).value();
                for d in 0..m {
                    v -= c.cv(d, a, cc) * h(d, bb) + c.cv(d, bb, cc) * h(a, d);
                }
                ver = ver.max(v.abs());
            }
        }
    }
    Ok(Metricity {
        horizontal: hor,
        vertical: ver,
    })
}

/// Levi-Civita connection of the assembled off-diagonal metric, computed from
/// coordinate Christoffel symbols and transformed to the adapted frame.
/// Entry `(α * D + β) * D + γ` is the `e_α` component of `∇_{e_γ} e_β`.
pub fn levi_civita_frame(dm: &DMetric, u: &ChartPoint, order: u8) -> Result<Vec<Jet>> {
    let b = dm.blocks(u, order + 1)?;
    let (n, m) = (b.n, b.m);
    let dim = n + m;
    let proto = b.g[0].clone();
    let zero = Jet::constant(proto.space(), proto.order(), 0.0);

    // coordinate metric and the adapted basis B^μ_β (columns e_β)
    let mut big = vec![zero.clone(); dim * dim];
    for i in 0..n {
        for j in 0..n {
            let mut v = b.g[i * n + j].clone();
            for a in 0..m {
                for c in 0..m {
                    v = &v + &(&(&b.nconn[a * n + i] * &b.nconn[c * n + j]) * &b.h[a * m + c]);
                }
            }
            big[i * dim + j] = v;
        }
        for a in 0..m {
            let mut v = zero.clone();
            for e in 0..m {
                v = &v + &(&b.nconn[e * n + i] * &b.h[a * m + e]);
            }
            big[i * dim + n + a] = v.clone();
            big[(n + a) * dim + i] = v;
        }
    }
    for a in 0..m {
        for c in 0..m {
            big[(n + a) * dim + n + c] = b.h[a * m + c].clone();
        }
    }
    let mut basis = vec![zero.clone(); dim * dim];
    let mut basis_inv = vec![zero.clone(); dim * dim];
    for k in 0..dim {
        basis[k * dim + k] = zero.add_scalar(1.0);
        basis_inv[k * dim + k] = zero.add_scalar(1.0);
    }
    for a in 0..m {
        for j in 0..n {
            basis[(n + a) * dim + j] = -&b.nconn[a * n + j];
            basis_inv[(n + a) * dim + j] = b.nconn[a * n + j].clone();
        }
    }

    let low: Vec<Jet> = big.iter().map(|j| j.truncate(order)).collect();
    let ginv = jetmat::inverse(&low, dim)?;
    let dg = |s: usize, t: usize, k: usize| big[s * dim + t].deriv(k);
    let mut chris = vec![zero.truncate(order); dim * dim * dim];
    for mu in 0..dim {
        for la in 0..dim {
            for nu in la..dim {
                let v = contract(&ginv, dim, mu, |s| {
                    &(&dg(s, nu, la) + &dg(s, la, nu)) - &dg(la, nu, s)
                })
                .scale(0.5);
                chris[(mu * dim + nu) * dim + la] = v.clone();
                chris[(mu * dim + la) * dim + nu] = v;
            }
        }
    }

    let bl: Vec<Jet> = basis.iter().map(|j| j.truncate(order)).collect();
    let bil: Vec<Jet> = basis_inv.iter().map(|j| j.truncate(order)).collect();
    let mut out = vec![zero.truncate(order); dim * dim * dim];
    for be in 0..dim {
        for ga in 0..dim {
            // V^μ = B^ν_γ (∂_ν B^μ_β + B^λ_β Γ^μ_λν)
            let v: Vec<Jet> = (0..dim)
                .map(|mu| {
                    let mut acc = zero.truncate(order);
                    for nu in 0..dim {
                        let mut inner = basis[mu * dim + be].deriv(nu);
                        for la in 0..dim {
                            inner = &inner + &(&bl[la * dim + be] * &chris[(mu * dim + la) * dim + nu]);
                        }
                        acc = &acc + &(&bl[nu * dim + ga] * &inner);
                    }
                    acc
                })
                .collect();
            for al in 0..dim {
                let mut acc = zero.truncate(order);
                for (mu, vm) in v.iter().enumerate() {
                    acc = &acc + &(&bil[al * dim + mu] * vm);
                }
                out[(al * dim + be) * dim + ga] = acc;
            }
        }
    }
    Ok(out)
}

/// The d-families of the adapted Levi-Civita connection, in the ordering for
/// which `canonical = levi_civita + P̂`: the mixed family `L^a_bk` is the
/// `e_a` component of `∇_{e_b} e_k`.
pub fn levi_civita_adapted(dm: &DMetric, u: &ChartPoint, order: u8) -> Result<Coefficients<Jet>> {
    let full = levi_civita_frame(dm, u, order)?;
    let (n, m) = (dm.n(), dm.m());
    let dim = n + m;
    let at = |al: usize, be: usize, ga: usize| full[(al * dim + be) * dim + ga].clone();
    let mut c = Coefficients {
        n,
        m,
        lh: Vec::with_capacity(n * n * n),
        lv: Vec::with_capacity(m * m * n),
        ch: Vec::with_capacity(n * n * m),
        cv: Vec::with_capacity(m * m * m),
    };
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                c.lh.push(at(i, j, k));
            }
        }
    }
    for a in 0..m {
        for b in 0..m {
            for k in 0..n {
                c.lv.push(at(n + a, k, n + b));
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            for cc in 0..m {
                c.ch.push(at(i, j, n + cc));
            }
        }
    }
    for a in 0..m {
        for b in 0..m {
            for cc in 0..m {
                c.cv.push(at(n + a, n + b, n + cc));
            }
        }
    }
    Ok(c)
}
