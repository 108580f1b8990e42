//! Hessian metric, spray, canonical N-connection, d-metrics, adapted frames.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::dsl::{ChartSpec, Definition, Expression, Source};
use crate::error::{GeomError, Result};
use crate::jet::{seed, ChartPoint, Jet, MAX_ORDER};
use crate::jetmat;
use crate::lagrangian::{check_point, ExprLagrangian, Lagrangian};

/// A metric block evaluated at a point, with its conditioning.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricBlock {
    pub matrix: DMatrix<f64>,
    pub det: f64,
    pub condition: f64,
}

impl MetricBlock {
    fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let (det, condition) = jetmat::conditioning(&matrix);
        if !(condition.is_finite() && condition <= jetmat::MAX_CONDITION && det != 0.0) {
            return Err(GeomError::DegenerateHessian { det, condition });
        }
        Ok(Self {
            matrix,
            det,
            condition,
        })
    }
}

/// `g_ij = ½ ∂²L/∂y^i∂y^j` at `u`.
pub fn hessian_metric(l: &dyn Lagrangian, u: &ChartPoint) -> Result<MetricBlock> {
    let (g, _) = spray_jets(l, u, 0)?;
    MetricBlock::new(jetmat::values(&g, l.dim(), l.dim()))
}

/// Spray coefficients `G^i = ¼ g^{ij}((∂²L/∂y^j∂x^k) y^k − ∂L/∂x^j)`.
pub fn spray_coefficients(l: &dyn Lagrangian, u: &ChartPoint) -> Result<Vec<f64>> {
    let (_, g) = spray_jets(l, u, 0)?;
    Ok(g.iter().map(Jet::value).collect())
}

/// Hessian metric and spray as jets of the given order (needs `L` at
/// `order + 2`).
fn spray_jets(l: &dyn Lagrangian, u: &ChartPoint, order: u8) -> Result<(Vec<Jet>, Vec<Jet>)> {
    check_point(l.dim(), u)?;
    let n = l.dim();
    let top = order + 2;
    if top > MAX_ORDER {
        return Err(GeomError::OrderTooLarge(top));
    }
    let s = seed(u, top)?;
    let lj = l.eval_jet(&s[..n], &s[n..])?;
    let ly: Vec<Jet> = (0..n).map(|j| lj.deriv(n + j)).collect();
    let mut g = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            g.push(ly[i].deriv(n + j).scale(0.5));
        }
    }
    let ginv = jetmat::inverse(&g, n)?;
    let rhs: Vec<Jet> = (0..n)
        .map(|j| {
            let mut acc = -&lj.deriv(j).truncate(order);
            for k in 0..n {
                acc = &acc + &(&ly[j].deriv(k) * &s[n + k].truncate(order));
            }
            acc
        })
        .collect();
    let spray = jetmat::mul(&ginv, &rhs, n, n, 1)
        .into_iter()
        .map(|j| j.scale(0.25))
        .collect();
    Ok((g, spray))
}

/// `g`, `h` and `N` blocks as jets at a point. `nconn[a * n + i]` is `N^a_i`.
#[derive(Debug, Clone)]
pub struct BlockJets {
    pub n: usize,
    pub m: usize,
    pub g: Vec<Jet>,
    pub h: Vec<Jet>,
    pub nconn: Vec<Jet>,
}

impl BlockJets {
    pub fn order(&self) -> u8 {
        self.g[0].order()
    }

    /// Mirror the upper triangles so `g` and `h` are bitwise symmetric.
    fn symmetrize(&mut self) {
        for (block, k) in [(&mut self.g, self.n), (&mut self.h, self.m)] {
            for r in 0..k {
                for c in 0..r {
                    block[r * k + c] = block[c * k + r].clone();
                }
            }
        }
    }

    /// `e_k f = ∂_k f − N^a_k ∂_a f` for a jet `f` one order above the result.
    pub fn elongate(&self, f: &Jet, k: usize) -> Jet {
        let order = f.order() - 1;
        let mut out = f.deriv(k);
        for a in 0..self.m {
            out = &out - &(&self.nconn[a * self.n + k].truncate(order) * &f.deriv(self.n + a));
        }
        out
    }

    pub fn point(&self) -> PointDMetric {
        PointDMetric {
            n: self.n,
            m: self.m,
            g: jetmat::values(&self.g, self.n, self.n),
            h: jetmat::values(&self.h, self.m, self.m),
            nconn: jetmat::values(&self.nconn, self.m, self.n),
        }
    }
}

#[derive(Clone)]
enum MetricSource {
    Lagrangian(Arc<dyn Lagrangian>),
    Direct {
        g: Arc<[Expression]>,
        h: Arc<[Expression]>,
        nconn: Arc<[Expression]>,
    },
}

/// A d-metric `[g_ij(u), h_ab(u)]` with N-connection `N^a_i(u)`, evaluated
/// lazily through jets.
#[derive(Clone)]
pub struct DMetric {
    n: usize,
    m: usize,
    source: MetricSource,
}

impl fmt::Debug for DMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.source {
            MetricSource::Lagrangian(l) => format!("sasaki({l:?})"),
            MetricSource::Direct { .. } => "direct".to_string(),
        };
        write!(f, "DMetric {{ n: {}, m: {}, {kind} }}", self.n, self.m)
    }
}

impl DMetric {
    /// Sasaki lift: `g = h = ½∂y∂y L`, `N` the canonical N-connection.
    pub fn sasaki(l: Arc<dyn Lagrangian>) -> Self {
        let n = l.dim();
        Self {
            n,
            m: n,
            source: MetricSource::Lagrangian(l),
        }
    }

    /// Blocks given directly as expressions; `nconn[a * n + i]` is `N^a_i`.
    pub fn direct(
        chart: &ChartSpec,
        g: Vec<Expression>,
        h: Vec<Expression>,
        nconn: Vec<Expression>,
    ) -> Result<Self> {
        let (n, m) = (chart.n, chart.m);
        if g.len() != n * n || h.len() != m * m || nconn.len() != m * n {
            return Err(GeomError::DimensionMismatch(format!(
                "blocks of sizes {}/{}/{} for n={n}, m={m}",
                g.len(),
                h.len(),
                nconn.len()
            )));
        }
        Ok(Self {
            n,
            m,
            source: MetricSource::Direct {
                g: g.into(),
                h: h.into(),
                nconn: nconn.into(),
            },
        })
    }

    pub fn from_definition(def: &Definition) -> Result<Self> {
        match &def.source {
            Source::Lagrangian(e) => Ok(Self::sasaki(Arc::new(ExprLagrangian::new(
                e.clone(),
                def.chart.clone(),
            )?))),
            Source::DMetric { g, h, nconn } => {
                Self::direct(&def.chart, g.clone(), h.clone(), nconn.clone())
            }
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn lagrangian(&self) -> Option<&Arc<dyn Lagrangian>> {
        match &self.source {
            MetricSource::Lagrangian(l) => Some(l),
            MetricSource::Direct { .. } => None,
        }
    }

    /// Highest block order available; Sasaki blocks use three extra orders of `L`.
    pub fn max_block_order(&self) -> u8 {
        match self.source {
            MetricSource::Lagrangian(_) => MAX_ORDER - 3,
            MetricSource::Direct { .. } => MAX_ORDER,
        }
    }

    fn check(&self, u: &ChartPoint) -> Result<()> {
        if u.n() != self.n || u.m() != self.m {
            return Err(GeomError::DimensionMismatch(format!(
                "point has ({}, {}) coordinates, d-metric expects ({}, {})",
                u.n(),
                u.m(),
                self.n,
                self.m
            )));
        }
        Ok(())
    }

    /// All blocks as jets of the given order at `u`.
    pub fn blocks(&self, u: &ChartPoint, order: u8) -> Result<BlockJets> {
        self.check(u)?;
        if order > self.max_block_order() {
            return Err(GeomError::OrderTooLarge(order));
        }
        let (n, m) = (self.n, self.m);
        match &self.source {
            MetricSource::Lagrangian(l) => {
                let (g, spray) = spray_jets(l.as_ref(), u, order + 1)?;
                let g: Vec<Jet> = g.iter().map(|j| j.truncate(order)).collect();
                let mut nconn = Vec::with_capacity(n * n);
                for sa in &spray {
                    for j in 0..n {
                        nconn.push(sa.deriv(n + j));
                    }
                }
                let mut blocks = BlockJets {
                    n,
                    m,
                    h: g.clone(),
                    g,
                    nconn,
                };
                blocks.symmetrize();
                Ok(blocks)
            }
            MetricSource::Direct { g, h, nconn } => {
                let s = seed(u, order)?;
                let eval = |es: &[Expression]| -> Result<Vec<Jet>> {
                    es.iter().map(|e| e.eval_jet(&s[..n], &s[n..])).collect()
                };
                let mut blocks = BlockJets {
                    n,
                    m,
                    g: eval(g)?,
                    h: eval(h)?,
                    nconn: eval(nconn)?,
                };
                blocks.symmetrize();
                MetricBlock::new(jetmat::values(&blocks.g, n, n))?;
                MetricBlock::new(jetmat::values(&blocks.h, m, m))?;
                Ok(blocks)
            }
        }
    }

    /// Numeric blocks at `u`.
    pub fn at(&self, u: &ChartPoint) -> Result<PointDMetric> {
        Ok(self.blocks(u, 0)?.point())
    }

    pub fn nconnection(&self) -> NConnection {
        NConnection { dm: self.clone() }
    }
}

/// `N = N^a_i(u) dx^i ⊗ ∂_a`, evaluated on demand.
#[derive(Debug, Clone)]
pub struct NConnection {
    dm: DMetric,
}

impl NConnection {
    /// User-supplied coefficients, `coeffs[a * n + i] = N^a_i`.
    pub fn from_expressions(chart: &ChartSpec, coeffs: Vec<Expression>) -> Result<Self> {
        let eye = |k: usize| -> Vec<Expression> {
            (0..k * k)
                .map(|t| Expression::Const(if t % (k + 1) == 0 { 1.0 } else { 0.0 }))
                .collect()
        };
        Ok(Self {
            dm: DMetric::direct(chart, eye(chart.n), eye(chart.m), coeffs)?,
        })
    }

    pub fn n(&self) -> usize {
        self.dm.n
    }

    pub fn m(&self) -> usize {
        self.dm.m
    }

    /// `m × n` matrix with entry `(a, i) = N^a_i(u)`.
    pub fn at(&self, u: &ChartPoint) -> Result<DMatrix<f64>> {
        Ok(self.dm.at(u)?.nconn)
    }

    pub fn jets(&self, u: &ChartPoint, order: u8) -> Result<Vec<Jet>> {
        Ok(self.dm.blocks(u, order)?.nconn)
    }
}

/// Canonical N-connection `N^i_j = ∂G^i/∂y^j` of a regular Lagrangian.
pub fn canonical_nconnection(l: Arc<dyn Lagrangian>) -> NConnection {
    DMetric::sasaki(l).nconnection()
}

/// Anholonomy data at a point: `W^b_ia = ∂_a N^b_i` and the N-curvature
/// `Ω^a_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct Nonholonomy {
    pub n: usize,
    pub m: usize,
    w: Vec<f64>,
    omega: Vec<f64>,
}

impl Nonholonomy {
    /// `W^b_{ia}`.
    pub fn w(&self, b: usize, i: usize, a: usize) -> f64 {
        self.w[(b * self.n + i) * self.m + a]
    }

    /// `Ω^a_{ij}`.
    pub fn omega(&self, a: usize, i: usize, j: usize) -> f64 {
        self.omega[(a * self.n + i) * self.n + j]
    }

    /// Ω from order-1 N jets.
    pub(crate) fn from_jets(nconn: &[Jet], n: usize, m: usize) -> Self {
        let d = |a: usize, i: usize, k: usize| nconn[a * n + i].deriv(k).value();
        let omega = omega_jets(nconn, n, m).iter().map(Jet::value).collect();
        let mut w = vec![0.0; m * n * m];
        for b in 0..m {
            for i in 0..n {
                for a in 0..m {
                    w[(b * n + i) * m + a] = d(b, i, n + a);
                }
            }
        }
        Self { n, m, w, omega }
    }
}

/// `Ω^a_ij` as jets one order below `nconn`, index `(a * n + i) * n + j`.
pub(crate) fn omega_jets(nconn: &[Jet], n: usize, m: usize) -> Vec<Jet> {
    let order = nconn[0].order() - 1;
    let nv = |a: usize, i: usize| nconn[a * n + i].truncate(order);
    let d = |a: usize, i: usize, k: usize| nconn[a * n + i].deriv(k);
    let zero = Jet::constant(nconn[0].space(), order, 0.0);
    let mut omega = vec![zero; m * n * n];
    for a in 0..m {
        for i in 0..n {
            for j in (i + 1)..n {
                let mut v = &d(a, i, j) - &d(a, j, i);
                for b in 0..m {
                    v = &v + &(&(&nv(b, i) * &d(a, j, n + b)) - &(&nv(b, j) * &d(a, i, n + b)));
                }
                omega[(a * n + j) * n + i] = -&v;
                omega[(a * n + i) * n + j] = v;
            }
        }
    }
    omega
}

pub fn nonholonomy(nc: &NConnection, u: &ChartPoint) -> Result<Nonholonomy> {
    Ok(Nonholonomy::from_jets(&nc.jets(u, 1)?, nc.n(), nc.m()))
}

/// Numeric d-metric at one point; `nconn` is `m × n` with `(a, i) = N^a_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointDMetric {
    pub n: usize,
    pub m: usize,
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub nconn: DMatrix<f64>,
}

impl PointDMetric {
    /// Off-diagonal ansatz in coordinate form.
    pub fn assemble(&self) -> DMatrix<f64> {
        let (n, m) = (self.n, self.m);
        let nt_h = self.nconn.transpose() * &self.h;
        let ul = &self.g + &nt_h * &self.nconn;
        let ul = (&ul + ul.transpose()) * 0.5;
        let mut out = DMatrix::zeros(n + m, n + m);
        out.view_mut((0, 0), (n, n)).copy_from(&ul);
        out.view_mut((0, n), (n, m)).copy_from(&nt_h);
        out.view_mut((n, 0), (m, n)).copy_from(&nt_h.transpose());
        out.view_mut((n, n), (m, m)).copy_from(&self.h);
        out
    }
}

/// Ansatz matrix of `dm` at `u`.
pub fn assemble_offdiagonal(dm: &DMetric, u: &ChartPoint) -> Result<DMatrix<f64>> {
    Ok(dm.at(u)?.assemble())
}

/// Split a symmetric `(n+m) × (n+m)` matrix into `(g, h, N)`.
pub fn decompose_offdiagonal(big: &DMatrix<f64>, n: usize, m: usize) -> Result<PointDMetric> {
    if big.nrows() != n + m || big.ncols() != n + m {
        return Err(GeomError::DimensionMismatch(format!(
            "{}×{} matrix for split ({n}, {m})",
            big.nrows(),
            big.ncols()
        )));
    }
    let h = big.view((n, n), (m, m)).into_owned();
    let hinv = jetmat::checked_inverse(&h).map_err(|_| GeomError::SingularVBlock)?;
    let off = big.view((0, n), (n, m)).into_owned();
    let nconn = (&off * &hinv).transpose();
    let g = big.view((0, 0), (n, n)).into_owned() - nconn.transpose() * &h * &nconn;
    Ok(PointDMetric { n, m, g, h, nconn })
}

/// Frame and coframe matrices with identity leg blocks. Rows of `coframe`
/// are the adapted derivations `e_i = ∂_i − N^a_i ∂_a`, `e_a = ∂_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedFrame {
    pub frame: DMatrix<f64>,
    pub coframe: DMatrix<f64>,
}

impl AdaptedFrame {
    pub fn from_coefficients(nconn: &DMatrix<f64>) -> Self {
        let (m, n) = nconn.shape();
        let mut frame = DMatrix::identity(n + m, n + m);
        let mut coframe = DMatrix::identity(n + m, n + m);
        for i in 0..n {
            for a in 0..m {
                frame[(i, n + a)] = nconn[(a, i)];
                coframe[(i, n + a)] = -nconn[(a, i)];
            }
        }
        Self { frame, coframe }
    }
}

pub fn adapted_frame(nc: &NConnection, u: &ChartPoint) -> Result<AdaptedFrame> {
    Ok(AdaptedFrame::from_coefficients(&nc.at(u)?))
}

/// Almost complex structure `F(e_i) = e_{n+i}`, `F(e_{n+i}) = −e_i`, in the
/// adapted and in the coordinate basis.
#[derive(Debug, Clone, PartialEq)]
pub struct AlmostComplex {
    pub adapted: DMatrix<f64>,
    pub coordinate: DMatrix<f64>,
}

pub fn almost_complex(nc: &NConnection, u: &ChartPoint) -> Result<AlmostComplex> {
    let (n, m) = (nc.n(), nc.m());
    if n != m {
        return Err(GeomError::DimensionMismatch(format!(
            "almost complex structure needs n = m, got n={n}, m={m}"
        )));
    }
    let mut adapted = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        adapted[(n + i, i)] = 1.0;
        adapted[(i, n + i)] = -1.0;
    }
    let fr = adapted_frame(nc, u)?;
    // columns of coframeᵀ are the adapted basis vectors in coordinates
    let coordinate = fr.coframe.transpose() * &adapted * fr.frame.transpose();
    Ok(AlmostComplex {
        adapted,
        coordinate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_lagrangian;
    use proptest::prelude::*;

    fn lag(text: &str) -> Arc<dyn Lagrangian> {
        Arc::new(ExprLagrangian::parse(text, 2).unwrap())
    }

    fn pt(x: [f64; 2], y: [f64; 2]) -> ChartPoint {
        ChartPoint::new(x.to_vec(), y.to_vec()).unwrap()
    }

    /// Christoffel symbols of a metric closure by 4th-order central differences.
    fn christoffel(g: &dyn Fn([f64; 2]) -> [[f64; 2]; 2], x: [f64; 2]) -> [[[f64; 2]; 2]; 2] {
        let hs = 1e-3;
        let dg = |k: usize| {
            let at = |t: f64| {
                let mut p = x;
                p[k] += t;
                g(p)
            };
            let (a, b, c, d) = (at(2.0 * hs), at(hs), at(-hs), at(-2.0 * hs));
            let mut out = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    out[i][j] = (-a[i][j] + 8.0 * b[i][j] - 8.0 * c[i][j] + d[i][j]) / (12.0 * hs);
                }
            }
            out
        };
        let d = [dg(0), dg(1)];
        let g0 = g(x);
        let det = g0[0][0] * g0[1][1] - g0[0][1] * g0[1][0];
        let inv = [[g0[1][1] / det, -g0[0][1] / det], [-g0[1][0] / det, g0[0][0] / det]];
        let mut gam = [[[0.0; 2]; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for r in 0..2 {
                        gam[i][j][k] += 0.5 * inv[i][r] * (d[k][j][r] + d[j][k][r] - d[r][j][k]);
                    }
                }
            }
        }
        gam
    }

    #[test]
    fn hessian_examples() {
        let g = hessian_metric(lag("y1^2+y2^2").as_ref(), &pt([0.1, 0.2], [1.0, 0.5])).unwrap();
        assert_eq!(g.matrix, DMatrix::identity(2, 2));

        let u = pt([0.3, 0.0], [1.0, 2.0]);
        let g = hessian_metric(lag("exp(x1)*(y1^2+y2^2)").as_ref(), &u).unwrap();
        // finite-difference Hessian of L in y
        let l = |y: [f64; 2]| 0.3f64.exp() * (y[0] * y[0] + y[1] * y[1]);
        let hs = 1e-4;
        let fd = (l([1.0 + hs, 2.0]) - 2.0 * l([1.0, 2.0]) + l([1.0 - hs, 2.0])) / (hs * hs);
        assert!((g.matrix[(0, 0)] - 0.5 * fd).abs() < 1e-6);
        assert!((g.matrix[(0, 0)] - 0.3f64.exp()).abs() < 1e-14);
        assert_eq!(g.matrix[(0, 1)], 0.0);

        let g = hessian_metric(lag("y1*y2").as_ref(), &u).unwrap();
        assert_eq!(g.matrix, DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]));
        assert!((g.det + 0.25).abs() < 1e-15);
    }

    #[test]
    fn degenerate_hessian() {
        let e = hessian_metric(lag("y1^2").as_ref(), &pt([0.0, 0.0], [1.0, 1.0]));
        assert!(matches!(e, Err(GeomError::DegenerateHessian { .. })));
    }

    #[test]
    fn spray_examples() {
        let u = pt([0.3, -0.2], [1.0, 2.0]);
        assert_eq!(spray_coefficients(lag("y1^2+y2^2").as_ref(), &u).unwrap(), vec![0.0, 0.0]);
        let g = spray_coefficients(lag("exp(x1)*(y1^2+y2^2)").as_ref(), &u).unwrap();
        // hand expansion G^i = ½ y^i y¹ − ¼|y|² δ_{i1}
        assert!((g[0] + 0.75).abs() < 1e-14);
        assert!((g[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn spray_matches_christoffel_for_quadratic() {
        let l = lag("y1^2 + sin(x1)^2*y2^2 + 0.3*x2*y1*y2");
        let metric = |x: [f64; 2]| [[1.0, 0.15 * x[1]], [0.15 * x[1], x[0].sin().powi(2)]];
        for (x, y) in [([1.0, 0.2], [0.4, -1.1]), ([0.7, -0.5], [2.0, 0.3])] {
            let gam = christoffel(&metric, x);
            let g = spray_coefficients(l.as_ref(), &pt(x, y)).unwrap();
            let nc = canonical_nconnection(l.clone()).at(&pt(x, y)).unwrap();
            for i in 0..2 {
                let mut want = 0.0;
                for j in 0..2 {
                    let mut nij = 0.0;
                    for k in 0..2 {
                        want += 0.5 * gam[i][j][k] * y[j] * y[k];
                        nij += gam[i][j][k] * y[k];
                    }
                    assert!((nc[(i, j)] - nij).abs() < 1e-8, "N {i}{j}");
                }
                assert!((g[i] - want).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn canonical_nconnection_examples() {
        let u = pt([0.3, -0.2], [1.0, 2.0]);
        let flat = canonical_nconnection(lag("y1^2+y2^2")).at(&u).unwrap();
        assert_eq!(flat, DMatrix::zeros(2, 2));
        let nc = canonical_nconnection(lag("exp(x1)*(y1^2+y2^2)")).at(&u).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[0.5, -1.0, 1.0, 0.5]);
        assert!((nc - want).abs().max() < 1e-14);
    }

    #[test]
    fn quadratic_nconnection_is_linear_in_y() {
        let nc = canonical_nconnection(lag("y1^2 + x1^2*y2^2"));
        let a = nc.at(&pt([0.8, 0.1], [0.3, -0.6])).unwrap();
        for lam in [0.5, 2.0, 3.0] {
            let b = nc.at(&pt([0.8, 0.1], [0.3 * lam, -0.6 * lam])).unwrap();
            assert!((b - &a * lam).abs().max() < 1e-12);
        }
    }

    #[test]
    fn nonholonomy_examples() {
        let chart = ChartSpec::tangent(2).unwrap();
        let zero = NConnection::from_expressions(&chart, vec![Expression::Const(0.0); 4]).unwrap();
        let o = nonholonomy(&zero, &pt([0.1, 0.2], [0.3, 0.4])).unwrap();
        assert!(o.omega.iter().chain(&o.w).all(|v| *v == 0.0));

        // N^{y1}_{x1} = x2 (the first vertical direction, third coordinate)
        let mut coeffs = vec![Expression::Const(0.0); 4];
        coeffs[0] = parse_lagrangian("x2", &chart).unwrap();
        let nc = NConnection::from_expressions(&chart, coeffs).unwrap();
        let o = nonholonomy(&nc, &pt([0.1, 0.2], [0.3, 0.4])).unwrap();
        assert!((o.omega(0, 0, 1) - 1.0).abs() < 1e-15);
        assert_eq!(o.omega(0, 1, 0), -o.omega(0, 0, 1));
    }

    #[test]
    fn commuting_linear_connection_has_only_derivative_term() {
        // N^a_i = Γ^a_{bi}(x) y^b with Γ_1 = diag(x2, 0), Γ_2 = diag(0, 1)
        let chart = ChartSpec::tangent(2).unwrap();
        let p = |s: &str| parse_lagrangian(s, &chart).unwrap();
        let coeffs = vec![p("x2*y1"), p("0"), p("0"), p("y2")];
        let nc = NConnection::from_expressions(&chart, coeffs).unwrap();
        let (x, y) = ([0.5, 0.2], [0.3, -0.4]);
        let o = nonholonomy(&nc, &pt(x, y)).unwrap();
        // ∂_2 N^1_1 − ∂_1 N^1_2 = y1, quadratic terms cancel
        assert!((o.omega(0, 0, 1) - y[0]).abs() < 1e-15);
        assert_eq!(o.omega(1, 0, 1), 0.0);
        assert_eq!(o.w(0, 0, 0), x[1]);
        assert_eq!(o.w(1, 1, 1), 1.0);
    }

    #[test]
    fn sasaki_blocks_match_hessian() {
        let l = lag("exp(x1)*(y1^2+y2^2)");
        let dm = DMetric::sasaki(l);
        let p = dm.at(&pt([0.3, 0.0], [1.0, 2.0])).unwrap();
        assert_eq!(p.g, p.h);
        assert!((p.g[(1, 1)] - 0.3f64.exp()).abs() < 1e-14);
        let big = p.assemble();
        assert_eq!(big, big.transpose());
    }

    #[test]
    fn ansatz_examples() {
        let c = 0.7;
        let p = PointDMetric {
            n: 1,
            m: 1,
            g: DMatrix::identity(1, 1),
            h: DMatrix::identity(1, 1),
            nconn: DMatrix::from_element(1, 1, c),
        };
        assert_eq!(p.assemble(), DMatrix::from_row_slice(2, 2, &[1.0 + c * c, c, c, 1.0]));

        let d = decompose_offdiagonal(&DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]), 1, 1)
            .unwrap();
        assert_eq!((d.g[(0, 0)], d.h[(0, 0)], d.nconn[(0, 0)]), (1.0, 1.0, 1.0));

        let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 3.0, 4.0]));
        assert_eq!(decompose_offdiagonal(&diag, 2, 1).unwrap().nconn, DMatrix::zeros(1, 2));

        let sing = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0]);
        assert_eq!(decompose_offdiagonal(&sing, 1, 2), Err(GeomError::SingularVBlock));
    }

    #[test]
    fn almost_complex_examples() {
        let chart = ChartSpec::tangent(1).unwrap();
        let zero = NConnection::from_expressions(&chart, vec![Expression::Const(0.0)]).unwrap();
        let u = ChartPoint::new(vec![0.2], vec![0.1]).unwrap();
        let f = almost_complex(&zero, &u).unwrap();
        assert_eq!(f.adapted, DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
        assert_eq!(f.coordinate, f.adapted);

        let nc = canonical_nconnection(lag("exp(x1)*(y1^2+y2^2)"));
        let u = pt([0.3, 0.0], [1.0, 2.0]);
        let f = almost_complex(&nc, &u).unwrap();
        let sq = &f.coordinate * &f.coordinate + DMatrix::identity(4, 4);
        assert!(sq.abs().max() < 1e-12);
        assert!(f.coordinate.trace().abs() < 1e-12);
        assert_ne!(f.coordinate, f.adapted);

        let rect = NConnection::from_expressions(
            &ChartSpec::new(2, 1).unwrap(),
            vec![Expression::Const(0.0); 2],
        )
        .unwrap();
        let u = ChartPoint::new(vec![0.0, 0.0], vec![1.0]).unwrap();
        assert!(matches!(almost_complex(&rect, &u), Err(GeomError::DimensionMismatch(_))));
    }

    fn spd(seed: &[f64], k: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(k, k, |r, c| seed[(r * k + c) % seed.len()]);
        &a * a.transpose() + DMatrix::identity(k, k) * (k as f64)
    }

    proptest! {
        #[test]
        fn round_trip_and_coframe_diagonalize(
            vals in prop::collection::vec(-1.0f64..1.0, 12),
            n in 1usize..3,
            m in 1usize..3,
        ) {
            let p = PointDMetric {
                n,
                m,
                g: spd(&vals[..6], n),
                h: spd(&vals[6..], m),
                nconn: DMatrix::from_fn(m, n, |a, i| vals[(a * 5 + i * 3) % 12]),
            };
            let big = p.assemble();
            prop_assert_eq!(&big, &big.transpose());
            let back = decompose_offdiagonal(&big, n, m).unwrap();
            prop_assert!((&back.g - &p.g).abs().max() < 1e-12);
            prop_assert!((&back.h - &p.h).abs().max() < 1e-12);
            prop_assert!((&back.nconn - &p.nconn).abs().max() < 1e-12);
            let fr = AdaptedFrame::from_coefficients(&p.nconn);
            prop_assert!((&fr.frame * &fr.coframe - DMatrix::identity(n + m, n + m)).abs().max() < 1e-12);
            let diag = &fr.coframe * &big * fr.coframe.transpose();
            let mut want = DMatrix::zeros(n + m, n + m);
            want.view_mut((0, 0), (n, n)).copy_from(&p.g);
            want.view_mut((n, n), (m, m)).copy_from(&p.h);
            prop_assert!((diag - want).abs().max() < 1e-10);
        }
    }
}
