//! Lagrangians as jet-evaluable scalar functions on a tangent-bundle chart.

use std::fmt;

use crate::dsl::{parse_lagrangian, ChartSpec, Expression};
use crate::error::{GeomError, Result};
use crate::jet::{seed, ChartPoint, Jet};

/// A scalar `L(x, y)` on a chart with `n = m`.
pub trait Lagrangian: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// Evaluate on coordinate jets that share base point and order.
    fn eval_jet(&self, x: &[Jet], y: &[Jet]) -> Result<Jet>;

    fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let u = ChartPoint::new(x.to_vec(), y.to_vec())?;
        let s = seed(&u, 0)?;
        Ok(self.eval_jet(&s[..x.len()], &s[x.len()..])?.value())
    }
}

/// Taylor jet of `L` at `u` to the given order.
pub fn lagrangian_jet(l: &dyn Lagrangian, u: &ChartPoint, order: u8) -> Result<Jet> {
    check_point(l.dim(), u)?;
    let s = seed(u, order)?;
    l.eval_jet(&s[..u.n()], &s[u.n()..])
}

pub(crate) fn check_point(n: usize, u: &ChartPoint) -> Result<()> {
    if u.n() != n || u.m() != n {
        return Err(GeomError::DimensionMismatch(format!(
            "point has ({}, {}) coordinates, Lagrangian expects ({n}, {n})",
            u.n(),
            u.m()
        )));
    }
    Ok(())
}

/// Lagrangian given by a parsed expression.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprLagrangian {
    expr: Expression,
    chart: ChartSpec,
}

impl ExprLagrangian {
    pub fn new(expr: Expression, chart: ChartSpec) -> Result<Self> {
        if chart.n != chart.m {
            return Err(GeomError::DimensionMismatch(format!(
                "a Lagrangian needs n = m, got n={}, m={}",
                chart.n, chart.m
            )));
        }
        Ok(Self { expr, chart })
    }

    pub fn parse(text: &str, n: usize) -> Result<Self> {
        let chart = ChartSpec::tangent(n)?;
        Self::new(parse_lagrangian(text, &chart)?, chart)
    }

    pub fn expression(&self) -> &Expression {
        &self.expr
    }

    pub fn chart(&self) -> &ChartSpec {
        &self.chart
    }
}

impl Lagrangian for ExprLagrangian {
    fn dim(&self) -> usize {
        self.chart.n
    }

    fn eval_jet(&self, x: &[Jet], y: &[Jet]) -> Result<Jet> {
        self.expr.eval_jet(x, y)
    }

    fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.expr.eval(x, y)
    }
}
