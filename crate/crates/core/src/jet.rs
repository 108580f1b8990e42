//! Dense truncated multivariate Taylor jets.
//!
//! A [`Jet`] stores the Taylor coefficients `c_α = ∂^α f / α!` of a scalar
//! function about a base point, for every multi-index `α` over all chart
//! coordinates with `|α| ≤ order`. Products are truncated convolutions, so
//! evaluating an expression on seeded jets yields every partial derivative up
//! to the jet order in one pass.
//!
//! Coefficient layout is shared through a per-dimension [`JetSpace`]: indices
//! are graded (all degree-0 entries first, then degree 1, ...), so a jet of
//! order `k` is simply a prefix of the full coefficient table.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use crate::dsl::Expression;
use crate::error::{GeomError, Result};

/// Highest supported truncation order.
///
/// Curvature of the canonical d-connection built from a Lagrangian needs five
/// derivatives of `L` in its mixed vertical blocks (`∂N/∂y` is already fourth
/// order), so the table is built one order past the fourth-order h-curvature.
pub const MAX_ORDER: u8 = 5;

/// Largest total chart dimension `n + m`.
pub const MAX_VARS: usize = 8;

/// Index tables shared by all jets over the same number of variables.
pub struct JetSpace {
    nvars: usize,
    indices: Vec<Vec<u8>>,
    degree: Vec<u8>,
    lookup: HashMap<Vec<u8>, usize>,
    /// `upto[d]` = number of multi-indices with degree ≤ d.
    upto: Vec<usize>,
    /// `(i, j, k)` with `α_i + α_j = α_k`, sorted by degree of `k`.
    mul: Vec<(u32, u32, u32)>,
    mul_upto: Vec<usize>,
    /// Per variable: `(src, dst, factor)` for `∂_v`, sorted by degree of `src`.
    deriv: Vec<Vec<(u32, u32, f64)>>,
    deriv_upto: Vec<Vec<usize>>,
    /// `α!` products converting Taylor coefficients to partial derivatives.
    factorials: Vec<f64>,
}

impl fmt::Debug for JetSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JetSpace")
            .field("nvars", &self.nvars)
            .field("coefficients", &self.indices.len())
            .finish()
    }
}

fn compositions(total: u8, parts: usize, prefix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if parts == 1 {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in (0..=total).rev() {
        prefix.push(first);
        compositions(total - first, parts - 1, prefix, out);
        prefix.pop();
    }
}

fn factorial(k: u8) -> f64 {
    (1..=k as u32).map(f64::from).product()
}

impl JetSpace {
    fn build(nvars: usize) -> Self {
        let mut indices = Vec::new();
        let mut upto = Vec::with_capacity(MAX_ORDER as usize + 1);
        for d in 0..=MAX_ORDER {
            compositions(d, nvars, &mut Vec::new(), &mut indices);
            upto.push(indices.len());
        }
        let degree: Vec<u8> = indices.iter().map(|a| a.iter().sum()).collect();
        let lookup: HashMap<Vec<u8>, usize> = indices
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i))
            .collect();

        let mut mul = Vec::new();
        for (i, a) in indices.iter().enumerate() {
            let room = MAX_ORDER - degree[i];
            for j in 0..upto[room as usize] {
                let sum: Vec<u8> = a.iter().zip(&indices[j]).map(|(p, q)| p + q).collect();
                let k = lookup[&sum];
                mul.push((i as u32, j as u32, k as u32));
            }
        }
        mul.sort_by_key(|&(_, _, k)| (degree[k as usize], k));
        let mul_upto = (0..=MAX_ORDER)
            .map(|d| mul.partition_point(|&(_, _, k)| degree[k as usize] <= d))
            .collect();

        let mut deriv = vec![Vec::new(); nvars];
        for (src, a) in indices.iter().enumerate() {
            for (v, entry) in deriv.iter_mut().enumerate() {
                if a[v] > 0 {
                    let mut lower = a.clone();
                    lower[v] -= 1;
                    entry.push((src as u32, lookup[&lower] as u32, f64::from(a[v])));
                }
            }
        }
        let deriv_upto = deriv
            .iter()
            .map(|list| {
                (0..=MAX_ORDER)
                    .map(|d| list.partition_point(|&(s, _, _)| degree[s as usize] <= d))
                    .collect()
            })
            .collect();
        let factorials = indices
            .iter()
            .map(|a| a.iter().map(|&k| factorial(k)).product())
            .collect();

        Self {
            nvars,
            indices,
            degree,
            lookup,
            upto,
            mul,
            mul_upto,
            deriv,
            deriv_upto,
            factorials,
        }
    }

    /// Shared table for `nvars` variables.
    pub fn get(nvars: usize) -> Result<Arc<JetSpace>> {
        static SPACES: OnceLock<Mutex<Vec<Option<Arc<JetSpace>>>>> = OnceLock::new();
        if nvars == 0 || nvars > MAX_VARS {
            return Err(GeomError::DimensionMismatch(format!(
                "jets support 1..={MAX_VARS} variables, got {nvars}"
            )));
        }
        let lock = SPACES.get_or_init(|| Mutex::new(vec![None; MAX_VARS + 1]));
        let mut guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        Ok(guard[nvars]
            .get_or_insert_with(|| Arc::new(JetSpace::build(nvars)))
            .clone())
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    /// Number of coefficients of a jet of the given order.
    pub fn len(&self, order: u8) -> usize {
        self.upto[order as usize]
    }

    pub fn multi_index(&self, i: usize) -> &[u8] {
        &self.indices[i]
    }

    pub fn index_of(&self, alpha: &[u8]) -> Option<usize> {
        self.lookup.get(alpha).copied()
    }
}

/// Truncated Taylor expansion of a scalar about a base point.
#[derive(Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    order: u8,
    c: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut m = f.debug_map();
        for (i, v) in self.c.iter().enumerate() {
            if *v != 0.0 || i == 0 {
                m.entry(&self.space.indices[i], v);
            }
        }
        m.finish()
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        self.space.nvars == other.space.nvars && self.order == other.order && self.c == other.c
    }
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, order: u8, value: f64) -> Jet {
        let mut c = vec![0.0; space.len(order)];
        c[0] = value;
        Jet {
            space: space.clone(),
            order,
            c,
        }
    }

    /// The coordinate function `u_var` expanded about `value`.
    pub fn variable(space: &Arc<JetSpace>, order: u8, var: usize, value: f64) -> Jet {
        let mut jet = Jet::constant(space, order, value);
        if order >= 1 {
            let mut alpha = vec![0u8; space.nvars];
            alpha[var] = 1;
            jet.c[space.lookup[&alpha]] = 1.0;
        }
        jet
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn nvars(&self) -> usize {
        self.space.nvars
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.c
    }

    /// Taylor coefficient `∂^α f / α!`; zero beyond the truncation order.
    pub fn coeff(&self, alpha: &[u8]) -> f64 {
        match self.space.lookup.get(alpha) {
            Some(&i) if i < self.c.len() => self.c[i],
            _ => 0.0,
        }
    }

    /// The partial derivative `∂^α f` itself.
    pub fn partial(&self, alpha: &[u8]) -> f64 {
        match self.space.lookup.get(alpha) {
            Some(&i) if i < self.c.len() => self.c[i] * self.space.factorials[i],
            _ => 0.0,
        }
    }

    /// Partial derivative indexed by a list of variables, e.g. `[0, 2, 2]`
    /// for `∂³/∂u0∂u2²`.
    pub fn partial_vars(&self, vars: &[usize]) -> f64 {
        let mut alpha = vec![0u8; self.space.nvars];
        for &v in vars {
            alpha[v] += 1;
        }
        self.partial(&alpha)
    }

    pub fn truncate(&self, order: u8) -> Jet {
        let order = order.min(self.order);
        Jet {
            space: self.space.clone(),
            order,
            c: self.c[..self.space.len(order)].to_vec(),
        }
    }

    /// `∂f/∂u_var` as a jet of one order less. A jet of order 0 carries no
    /// derivative information; its derivative is returned as order 0 zero.
    pub fn deriv(&self, var: usize) -> Jet {
        debug_assert!(self.order >= 1, "derivative of an order-0 jet");
        let order = self.order.saturating_sub(1);
        let mut c = vec![0.0; self.space.len(order)];
        if self.order >= 1 {
            let list = &self.space.deriv[var];
            for &(src, dst, factor) in &list[..self.space.deriv_upto[var][self.order as usize]] {
                c[dst as usize] += factor * self.c[src as usize];
            }
        }
        Jet {
            space: self.space.clone(),
            order,
            c,
        }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            space: self.space.clone(),
            order: self.order,
            c: self.c.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add_scalar(&self, s: f64) -> Jet {
        let mut out = self.clone();
        out.c[0] += s;
        out
    }

    /// `self += s * other`, truncating to the lower order.
    pub fn axpy(&mut self, s: f64, other: &Jet) {
        if other.order < self.order {
            *self = self.truncate(other.order);
        }
        for (a, b) in self.c.iter_mut().zip(&other.c) {
            *a += s * b;
        }
    }

    fn zip_with(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        let order = self.order.min(other.order);
        let len = self.space.len(order);
        Jet {
            space: self.space.clone(),
            order,
            c: (0..len).map(|i| f(self.c[i], other.c[i])).collect(),
        }
    }

    fn mul_jet(&self, other: &Jet) -> Jet {
        let order = self.order.min(other.order);
        let mut c = vec![0.0; self.space.len(order)];
        for &(i, j, k) in &self.space.mul[..self.space.mul_upto[order as usize]] {
            c[k as usize] += self.c[i as usize] * other.c[j as usize];
        }
        Jet {
            space: self.space.clone(),
            order,
            c,
        }
    }

    /// `Σ_k series[k] (self - self(0))^k`, the composition of a univariate
    /// Taylor series about `self.value()` with this jet.
    pub fn compose_series(&self, series: &[f64]) -> Jet {
        let mut h = self.clone();
        h.c[0] = 0.0;
        let top = (self.order as usize).min(series.len() - 1);
        let mut acc = Jet::constant(&self.space, self.order, series[top]);
        for k in (0..top).rev() {
            acc = acc.mul_jet(&h).add_scalar(series[k]);
        }
        acc
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let series: Vec<f64> = (0..=self.order).map(|k| e / factorial(k)).collect();
        self.compose_series(&series)
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let series: Vec<f64> = (0..=self.order)
            .map(|k| cycle[k as usize % 4] / factorial(k))
            .collect();
        self.compose_series(&series)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let series: Vec<f64> = (0..=self.order)
            .map(|k| cycle[k as usize % 4] / factorial(k))
            .collect();
        self.compose_series(&series)
    }

    pub fn ln(&self) -> Result<Jet> {
        let a = self.value();
        if !(a > 0.0) {
            return Err(GeomError::Domain(format!("log of non-positive value {a}")));
        }
        let mut series = vec![a.ln()];
        for k in 1..=self.order as i32 {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            series.push(sign / (f64::from(k) * a.powi(k)));
        }
        Ok(self.compose_series(&series))
    }

    /// `(a0 + h)^p = Σ C(p, k) a0^{p-k} h^k` for real `p`, `a0 > 0`.
    fn pow_series(&self, p: f64) -> Jet {
        let a = self.value();
        let mut series = Vec::with_capacity(self.order as usize + 1);
        let mut binom = 1.0;
        for k in 0..=self.order as i32 {
            series.push(binom * a.powf(p - f64::from(k)));
            binom *= (p - f64::from(k)) / f64::from(k + 1);
        }
        self.compose_series(&series)
    }

    pub fn recip(&self) -> Result<Jet> {
        let a = self.value();
        if a == 0.0 || !a.is_finite() {
            return Err(GeomError::Domain(format!("division by value {a}")));
        }
        let series: Vec<f64> = (0..=self.order as i32)
            .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 } / a.powi(k + 1))
            .collect();
        Ok(self.compose_series(&series))
    }

    pub fn div(&self, other: &Jet) -> Result<Jet> {
        Ok(self.mul_jet(&other.recip()?))
    }

    pub fn sqrt(&self) -> Result<Jet> {
        let a = self.value();
        if !(a > 0.0) {
            return Err(GeomError::Domain(format!("sqrt of non-positive value {a}")));
        }
        Ok(self.pow_series(0.5))
    }

    /// Integer power by repeated squaring; exact for polynomial jets and
    /// defined at a zero base for non-negative exponents.
    pub fn powi(&self, n: i64) -> Result<Jet> {
        if n < 0 {
            return self.recip()?.powi(-n);
        }
        let mut result = Jet::constant(&self.space, self.order, 1.0);
        let mut base = self.clone();
        let mut e = n as u64;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul_jet(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_jet(&base);
            }
        }
        Ok(result)
    }

    /// `self^(num/den)`; non-integer exponents require a positive base.
    pub fn pow_rational(&self, num: i64, den: i64) -> Result<Jet> {
        if den == 0 {
            return Err(GeomError::Domain("zero exponent denominator".into()));
        }
        if num % den == 0 {
            return self.powi(num / den);
        }
        let a = self.value();
        if !(a > 0.0) {
            return Err(GeomError::Domain(format!(
                "non-integer power {num}/{den} of non-positive value {a}"
            )));
        }
        Ok(self.pow_series(num as f64 / den as f64))
    }

    /// Evaluate the Taylor polynomial of `self` at `base + shifts`, where each
    /// shift is a jet in another space (typically with zero constant part).
    pub fn compose(&self, shifts: &[Jet]) -> Result<Jet> {
        if shifts.len() != self.space.nvars {
            return Err(GeomError::DimensionMismatch(format!(
                "compose expects {} shifts, got {}",
                self.space.nvars,
                shifts.len()
            )));
        }
        let target = shifts[0].space.clone();
        let order = shifts.iter().map(|s| s.order).min().unwrap_or(0);
        let mut powers: Vec<Vec<Jet>> = Vec::with_capacity(shifts.len());
        for s in shifts {
            let s = s.truncate(order);
            let mut row = vec![Jet::constant(&target, order, 1.0)];
            for p in 1..=self.order as usize {
                let next = row[p - 1].mul_jet(&s);
                row.push(next);
            }
            powers.push(row);
        }
        let mut out = Jet::constant(&target, order, 0.0);
        for (i, &coef) in self.c.iter().enumerate() {
            if coef == 0.0 {
                continue;
            }
            let alpha = &self.space.indices[i];
            let mut term: Option<Jet> = None;
            for (v, &k) in alpha.iter().enumerate() {
                if k > 0 {
                    let factor = &powers[v][k as usize];
                    term = Some(match term {
                        None => factor.clone(),
                        Some(t) => t.mul_jet(factor),
                    });
                }
            }
            match term {
                None => out.c[0] += coef,
                Some(t) => out.axpy(coef, &t),
            }
        }
        Ok(out)
    }

    /// Degree of the highest multi-index stored.
    pub fn degree_of(&self, i: usize) -> u8 {
        self.space.degree[i]
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_jet(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $method:ident) => {
        impl $tr for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                (&self).$method(rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

/// A point `u = (x, y)` of an `n + m` dimensional chart.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChartPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl ChartPoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(GeomError::InvalidInput("chart point has non-finite entries".into()));
        }
        Ok(Self { x, y })
    }

    /// Split a flat coordinate vector after the first `n` entries.
    pub fn from_coords(coords: &[f64], n: usize) -> Result<Self> {
        Self::new(coords[..n].to_vec(), coords[n..].to_vec())
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn m(&self) -> usize {
        self.y.len()
    }

    pub fn coords(&self) -> Vec<f64> {
        self.x.iter().chain(&self.y).copied().collect()
    }

    pub fn y_is_zero(&self) -> bool {
        self.y.iter().all(|v| *v == 0.0)
    }
}

/// Coordinate jets at `u`: entry `k` is the jet of the k-th coordinate
/// (x1..xn, then y1..ym) with unit first derivative in its own direction.
pub fn seed(u: &ChartPoint, order: u8) -> Result<Vec<Jet>> {
    if order > MAX_ORDER {
        return Err(GeomError::OrderTooLarge(order));
    }
    let coords = u.coords();
    let space = JetSpace::get(coords.len())?;
    Ok(coords
        .iter()
        .enumerate()
        .map(|(k, &v)| Jet::variable(&space, order, k, v))
        .collect())
}

/// True partial derivative `∂^idx f` at `u`; `idx` is a multi-index over all
/// `n + m` coordinates.
pub fn partial(f: &Expression, u: &ChartPoint, idx: &[u8]) -> Result<f64> {
    let order: u8 = idx.iter().sum();
    if order > MAX_ORDER {
        return Err(GeomError::OrderTooLarge(order));
    }
    if idx.len() != u.n() + u.m() {
        return Err(GeomError::DimensionMismatch(format!(
            "multi-index has {} entries for a {}-dimensional chart",
            idx.len(),
            u.n() + u.m()
        )));
    }
    let seeds = seed(u, order)?;
    Ok(f.eval_jet(&seeds[..u.n()], &seeds[u.n()..])?.partial(idx))
}
