//! Textual Lagrangian / d-metric definitions.
//!
//! Expressions use a small infix grammar over the chart coordinates
//! `x1..xn, y1..ym`:
//!
//! ```text
//! expr     := term (('+' | '-') term)*
//! term     := unary (('*' | '/') unary)*
//! unary    := '-' unary | power
//! power    := primary ('^' exponent)*
//! exponent := ['-'] INT | '(' ['-'] INT ['/' INT] ')'
//! primary  := NUMBER | COORD | FUNC '(' expr ')' | '(' expr ')'
//! FUNC     := exp | log | sqrt | sin | cos
//! ```
//!
//! Exponents are rational constants. `^` binds tighter than unary minus, so
//! `-y1^2` is `-(y1^2)`; all binary operators are left-associative.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GeomError, Result};
use crate::jet::{Jet, JetSpace};

/// Chart layout: `n` horizontal coordinates `x1..xn`, `m` vertical `y1..ym`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChartSpec {
    pub n: usize,
    pub m: usize,
    names: Vec<String>,
    /// Only positive-definite signatures are supported downstream.
    pub positive_definite: bool,
}

impl ChartSpec {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(GeomError::InvalidInput(format!(
                "chart dimensions must be at least 1, got n={n}, m={m}"
            )));
        }
        if n + m > crate::jet::MAX_VARS {
            return Err(GeomError::InvalidInput(format!(
                "n + m = {} exceeds the supported {}",
                n + m,
                crate::jet::MAX_VARS
            )));
        }
        let names = (1..=n)
            .map(|i| format!("x{i}"))
            .chain((1..=m).map(|a| format!("y{a}")))
            .collect();
        Ok(Self {
            n,
            m,
            names,
            positive_definite: true,
        })
    }

    /// Tangent-bundle chart with `n = m`.
    pub fn tangent(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    pub fn dim(&self) -> usize {
        self.n + self.m
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    fn resolve(&self, name: &str) -> Option<Coord> {
        let (kind, rest) = name.split_at(1);
        let idx: usize = rest.parse().ok()?;
        if rest.starts_with('0') || idx == 0 {
            return None;
        }
        match kind {
            "x" if idx <= self.n => Some(Coord::X(idx - 1)),
            "y" if idx <= self.m => Some(Coord::Y(idx - 1)),
            _ => None,
        }
    }
}

/// A chart coordinate, zero-based within its block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Coord {
    X(usize),
    Y(usize),
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coord::X(i) => write!(f, "x{}", i + 1),
            Coord::Y(a) => write!(f, "y{}", a + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }
}

/// Reduced rational exponent with positive denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rational {
    pub num: i64,
    pub den: i64,
}

impl Rational {
    pub fn new(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(GeomError::InvalidInput("zero denominator in exponent".into()));
        }
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()).max(1) as i64;
        let s = if den < 0 { -1 } else { 1 };
        Ok(Self {
            num: s * num / g,
            den: s * den / g,
        })
    }

    pub fn integer(k: i64) -> Self {
        Self { num: k, den: 1 }
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Immutable expression tree. Constants are non-negative; a negative literal
/// is represented as `Neg(Const)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Const(f64),
    Var(Coord),
    Neg(Box<Expression>),
    Func(Func, Box<Expression>),
    Binary(BinOp, Box<Expression>, Box<Expression>),
    Pow(Box<Expression>, Rational),
}

impl Expression {
    pub fn constant(v: f64) -> Expression {
        if v < 0.0 {
            Expression::Neg(Box::new(Expression::Const(-v)))
        } else {
            Expression::Const(v)
        }
    }

    pub fn x(i: usize) -> Expression {
        Expression::Var(Coord::X(i))
    }

    pub fn y(a: usize) -> Expression {
        Expression::Var(Coord::Y(a))
    }

    pub fn binary(op: BinOp, a: Expression, b: Expression) -> Expression {
        Expression::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn func(f: Func, a: Expression) -> Expression {
        Expression::Func(f, Box::new(a))
    }

    pub fn pow(a: Expression, num: i64, den: i64) -> Result<Expression> {
        Ok(Expression::Pow(Box::new(a), Rational::new(num, den)?))
    }

    pub fn is_zero_literal(&self) -> bool {
        matches!(self, Expression::Const(v) if *v == 0.0)
    }

    /// Evaluate on coordinate jets sharing base point and order.
    pub fn eval_jet(&self, x: &[Jet], y: &[Jet]) -> Result<Jet> {
        let any = x.first().or(y.first()).ok_or_else(|| {
            GeomError::InvalidInput("no seed jets supplied".into())
        })?;
        self.eval_jet_in(x, y, any.space(), any.order())
    }

    fn eval_jet_in(
        &self,
        x: &[Jet],
        y: &[Jet],
        space: &std::sync::Arc<JetSpace>,
        order: u8,
    ) -> Result<Jet> {
        let rec = |e: &Expression| e.eval_jet_in(x, y, space, order);
        Ok(match self {
            Expression::Const(v) => Jet::constant(space, order, *v),
            Expression::Var(c) => match *c {
                Coord::X(i) => x.get(i).cloned(),
                Coord::Y(a) => y.get(a).cloned(),
            }
            .ok_or_else(|| GeomError::UnknownSymbol(c.to_string()))?,
            Expression::Neg(a) => -&rec(a)?,
            Expression::Func(f, a) => {
                let v = rec(a)?;
                match f {
                    Func::Exp => v.exp(),
                    Func::Log => v.ln()?,
                    Func::Sqrt => v.sqrt()?,
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                }
            }
            Expression::Binary(op, a, b) => {
                let (a, b) = (rec(a)?, rec(b)?);
                match op {
                    BinOp::Add => &a + &b,
                    BinOp::Sub => &a - &b,
                    BinOp::Mul => &a * &b,
                    BinOp::Div => a.div(&b)?,
                }
            }
            Expression::Pow(a, r) => rec(a)?.pow_rational(r.num, r.den)?,
        })
    }

    /// Plain floating-point evaluation with the same domain rules.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let rec = |e: &Expression| e.eval(x, y);
        Ok(match self {
            Expression::Const(v) => *v,
            Expression::Var(c) => *match *c {
                Coord::X(i) => x.get(i),
                Coord::Y(a) => y.get(a),
            }
            .ok_or_else(|| GeomError::UnknownSymbol(c.to_string()))?,
            Expression::Neg(a) => -rec(a)?,
            Expression::Func(f, a) => {
                let v = rec(a)?;
                match f {
                    Func::Exp => v.exp(),
                    Func::Log if v > 0.0 => v.ln(),
                    Func::Sqrt if v >= 0.0 => v.sqrt(),
                    Func::Log | Func::Sqrt => {
                        return Err(GeomError::Domain(format!("{}({v})", f.name())))
                    }
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                }
            }
            Expression::Binary(op, a, b) => {
                let (a, b) = (rec(a)?, rec(b)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div if b != 0.0 => a / b,
                    BinOp::Div => return Err(GeomError::Domain(format!("division of {a} by zero"))),
                }
            }
            Expression::Pow(a, r) => {
                let v = rec(a)?;
                if r.den == 1 {
                    if r.num < 0 && v == 0.0 {
                        return Err(GeomError::Domain("negative power of zero".into()));
                    }
                    v.powi(r.num as i32)
                } else if v > 0.0 || (v == 0.0 && r.num > 0) {
                    v.powf(r.as_f64())
                } else {
                    return Err(GeomError::Domain(format!(
                        "non-integer power {}/{} of {v}",
                        r.num, r.den
                    )));
                }
            }
        })
    }

    /// Every coordinate referenced by the tree.
    pub fn coords(&self) -> Vec<Coord> {
        let mut out = Vec::new();
        self.collect_coords(&mut out);
        out.sort_by_key(|c| match c {
            Coord::X(i) => (0, *i),
            Coord::Y(a) => (1, *a),
        });
        out.dedup();
        out
    }

    fn collect_coords(&self, out: &mut Vec<Coord>) {
        match self {
            Expression::Const(_) => {}
            Expression::Var(c) => out.push(*c),
            Expression::Neg(a) | Expression::Func(_, a) | Expression::Pow(a, _) => {
                a.collect_coords(out)
            }
            Expression::Binary(_, a, b) => {
                a.collect_coords(out);
                b.collect_coords(out);
            }
        }
    }

    fn is_atom(&self) -> bool {
        matches!(
            self,
            Expression::Const(_) | Expression::Var(_) | Expression::Func(..)
        )
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expression::Const(v) => write!(f, "{v:?}"),
            Expression::Var(c) => write!(f, "{c}"),
            Expression::Neg(a) if a.is_atom() => write!(f, "-{a}"),
            Expression::Neg(a) => write!(f, "-({a})"),
            Expression::Func(func, a) => write!(f, "{}({a})", func.name()),
            Expression::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expression::Pow(a, r) => {
                if a.is_atom() {
                    write!(f, "{a}")?;
                } else {
                    write!(f, "({a})")?;
                }
                if r.den == 1 && r.num >= 0 {
                    write!(f, "^{}", r.num)
                } else if r.den == 1 {
                    write!(f, "^({})", r.num)
                } else {
                    write!(f, "^({}/{})", r.num, r.den)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64, bool),
    Ident(String),
    Sym(char),
}

fn syntax(position: usize, message: impl Into<String>) -> GeomError {
    GeomError::Syntax {
        position,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let ch = bytes[i] as char;
        if ch.is_ascii_whitespace() {
            i += 1;
        } else if ch.is_ascii_digit() || ch == '.' {
            let start = i;
            let mut integral = true;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                integral &= bytes[i] != b'.';
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    integral = false;
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s = &text[start..i];
            let v: f64 = s
                .parse()
                .map_err(|_| syntax(start, format!("malformed number `{s}`")))?;
            out.push((start, Tok::Num(v, integral)));
        } else if ch.is_ascii_alphabetic() || ch == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(text[start..i].to_string())));
        } else if "+-*/^()".contains(ch) {
            out.push((i, Tok::Sym(ch)));
            i += 1;
        } else {
            let c = text[i..].chars().next().unwrap_or('?');
            return Err(syntax(i, format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    chart: &'a ChartSpec,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(syntax(self.offset(), format!("expected `{c}`")))
        }
    }

    fn expr(&mut self) -> Result<Expression> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                BinOp::Add
            } else if self.eat('-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            lhs = Expression::binary(op, lhs, self.term()?);
        }
    }

    fn term(&mut self) -> Result<Expression> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                BinOp::Mul
            } else if self.eat('/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            lhs = Expression::binary(op, lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expression> {
        if self.eat('-') {
            Ok(Expression::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expression> {
        let mut base = self.primary()?;
        while self.eat('^') {
            let r = self.exponent()?;
            base = Expression::Pow(Box::new(base), r);
        }
        Ok(base)
    }

    fn integer(&mut self) -> Result<i64> {
        let at = self.offset();
        let neg = self.eat('-');
        match self.peek() {
            Some(Tok::Num(v, true)) if *v <= i32::MAX as f64 => {
                let k = *v as i64;
                self.pos += 1;
                Ok(if neg { -k } else { k })
            }
            _ => Err(syntax(at, "exponent must be an integer or a ratio of integers")),
        }
    }

    fn exponent(&mut self) -> Result<Rational> {
        if self.eat('(') {
            let at = self.offset();
            let num = self.integer()?;
            let den = if self.eat('/') { self.integer()? } else { 1 };
            self.expect(')')?;
            Rational::new(num, den).map_err(|_| syntax(at, "zero denominator in exponent"))
        } else {
            Ok(Rational::integer(self.integer()?))
        }
    }

    fn primary(&mut self) -> Result<Expression> {
        let at = self.offset();
        match self.peek().cloned() {
            Some(Tok::Num(v, _)) => {
                self.pos += 1;
                Ok(Expression::Const(v))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if let Some(f) = Func::from_name(&name) {
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    Ok(Expression::func(f, arg))
                } else if let Some(c) = self.chart.resolve(&name) {
                    Ok(Expression::Var(c))
                } else {
                    Err(GeomError::UnknownSymbol(name))
                }
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(Tok::Sym(c)) => Err(syntax(at, format!("unexpected `{c}`"))),
            None => Err(syntax(at, "unexpected end of input")),
        }
    }
}

/// Parse an expression over the coordinates declared by `chart`.
pub fn parse_lagrangian(text: &str, chart: &ChartSpec) -> Result<Expression> {
    if text.trim().is_empty() {
        return Err(syntax(0, "empty expression"));
    }
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        end: text.len(),
        chart,
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(syntax(p.offset(), "trailing input"));
    }
    Ok(e)
}

/// Sample-based test of positive 2-homogeneity in `y`:
/// `|L(x, λy) − λ²L(x, y)| ≤ 1e-9 (1 + |λ²L|)` for `λ ∈ {0.5, 2, 3}`.
pub fn check_homogeneity(e: &Expression, chart: &ChartSpec, samples: usize) -> Result<bool> {
    if samples == 0 {
        return Err(GeomError::InvalidInput("at least one sample is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_f125);
    for _ in 0..samples {
        let x: Vec<f64> = (0..chart.n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = loop {
            let y: Vec<f64> = (0..chart.m).map(|_| rng.random_range(-2.0..2.0)).collect();
            if y.iter().map(|v| v * v).sum::<f64>() > 0.01 {
                break y;
            }
        };
        let base = e.eval(&x, &y)?;
        for lambda in [0.5, 2.0, 3.0] {
            let scaled: Vec<f64> = y.iter().map(|v| lambda * v).collect();
            let want = lambda * lambda * base;
            let got = e.eval(&x, &scaled)?;
            if (got - want).abs() > 1e-9 * (1.0 + want.abs()) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// What a definition file describes.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    /// A regular Lagrangian on a tangent-bundle chart (`n = m`).
    Lagrangian(Expression),
    /// Direct d-metric input: `g` is n×n, `h` is m×m (row-major, symmetric),
    /// `nconn[a * n + i]` is `N^a_i`.
    DMetric {
        g: Vec<Expression>,
        h: Vec<Expression>,
        nconn: Vec<Expression>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Definition {
    pub chart: ChartSpec,
    pub source: Source,
}

fn block_index(
    tok: Option<&str>,
    max: usize,
    what: &str,
    line_offset: usize,
) -> Result<usize> {
    let t = tok.ok_or_else(|| syntax(line_offset, format!("missing {what} index")))?;
    match t.parse::<usize>() {
        Ok(k) if (1..=max).contains(&k) => Ok(k - 1),
        _ => Err(syntax(
            line_offset,
            format!("{what} index `{t}` outside 1..={max}"),
        )),
    }
}

/// Parse a definition file (`dims`, `lagrangian`, `metric_block`, `nconn`
/// lines; `#` starts a comment).
pub fn parse_definition(text: &str) -> Result<Definition> {
    let mut chart: Option<ChartSpec> = None;
    let mut lagrangian: Option<Expression> = None;
    let mut g: Vec<Option<Expression>> = Vec::new();
    let mut h: Vec<Option<Expression>> = Vec::new();
    let mut nconn: Vec<Option<Expression>> = Vec::new();
    let mut direct = false;

    let mut offset = 0;
    for raw in text.split_inclusive('\n') {
        let line_offset = offset;
        offset += raw.len();
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim_start();
        if trimmed.trim().is_empty() {
            continue;
        }
        let lead = content.len() - trimmed.len();
        let keyword_end = trimmed.find(char::is_whitespace).unwrap_or(trimmed.len());
        let keyword = &trimmed[..keyword_end];
        let at = line_offset + lead;

        if keyword == "dims" {
            if chart.is_some() {
                return Err(syntax(at, "duplicate `dims` line"));
            }
            let nums: Vec<&str> = trimmed[keyword_end..].split_whitespace().collect();
            let parsed: Vec<usize> = nums.iter().filter_map(|s| s.parse().ok()).collect();
            if nums.len() != 2 || parsed.len() != 2 {
                return Err(syntax(at, "`dims` expects two positive integers"));
            }
            let c = ChartSpec::new(parsed[0], parsed[1]).map_err(|e| syntax(at, e.to_string()))?;
            g = vec![None; c.n * c.n];
            h = vec![None; c.m * c.m];
            nconn = vec![None; c.m * c.n];
            chart = Some(c);
            continue;
        }
        let c = chart
            .as_ref()
            .ok_or_else(|| syntax(at, "`dims n m` must precede all definitions"))?;

        // split off the fixed-arity head so expression offsets stay exact
        let arity = match keyword {
            "lagrangian" => 0,
            "metric_block" => 3,
            "nconn" => 2,
            other => return Err(syntax(at, format!("unknown directive `{other}`"))),
        };
        let mut rest = &trimmed[keyword_end..];
        let mut head = Vec::new();
        for _ in 0..arity {
            let r = rest.trim_start();
            let end = r.find(char::is_whitespace).unwrap_or(r.len());
            head.push(&r[..end]);
            rest = &r[end..];
        }
        let expr_text = rest.trim_start();
        let expr_at = at + (trimmed.len() - expr_text.len());
        let expr = parse_lagrangian(expr_text.trim_end(), c).map_err(|e| match e {
            GeomError::Syntax { position, message } => GeomError::Syntax {
                position: expr_at + position,
                message,
            },
            other => other,
        })?;

        match keyword {
            "lagrangian" => {
                if lagrangian.is_some() {
                    return Err(syntax(at, "duplicate `lagrangian` line"));
                }
                lagrangian = Some(expr);
            }
            "metric_block" => {
                direct = true;
                let (slot, size) = match head[0] {
                    "g" => (&mut g, c.n),
                    "h" => (&mut h, c.m),
                    other => {
                        return Err(syntax(at, format!("metric block must be g or h, got `{other}`")))
                    }
                };
                let r = block_index(Some(head[1]), size, "row", at)?;
                let s = block_index(Some(head[2]), size, "column", at)?;
                if slot[r * size + s].is_some() || slot[s * size + r].is_some() {
                    return Err(syntax(at, "metric entry defined twice"));
                }
                slot[r * size + s] = Some(expr.clone());
                slot[s * size + r] = Some(expr);
            }
            _ => {
                direct = true;
                let a = block_index(Some(head[0]), c.m, "vertical", at)?;
                let i = block_index(Some(head[1]), c.n, "horizontal", at)?;
                if nconn[a * c.n + i].is_some() {
                    return Err(syntax(at, "N-connection entry defined twice"));
                }
                nconn[a * c.n + i] = Some(expr);
            }
        }
    }

    let chart = chart.ok_or_else(|| syntax(0, "missing `dims` line"))?;
    let fill = |v: Vec<Option<Expression>>| -> Vec<Expression> {
        v.into_iter()
            .map(|e| e.unwrap_or(Expression::Const(0.0)))
            .collect()
    };
    let source = match (lagrangian, direct) {
        (Some(_), true) => {
            return Err(syntax(
                0,
                "a file defines either a lagrangian or metric blocks, not both",
            ))
        }
        (Some(l), false) => {
            if chart.n != chart.m {
                return Err(syntax(0, "a lagrangian requires a tangent chart (n = m)"));
            }
            Source::Lagrangian(l)
        }
        (None, true) => Source::DMetric {
            g: fill(g),
            h: fill(h),
            nconn: fill(nconn),
        },
        (None, false) => return Err(syntax(0, "no lagrangian or metric blocks defined")),
    };
    Ok(Definition { chart, source })
}
