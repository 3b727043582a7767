//! Text syntax: a recursive-descent parser with positioned errors and a canonical printer.
//!
//! ```text
//! expr   := term (("+"|"-") term)*
//! term   := factor ("*" factor)*
//! factor := atom ("^" nat)?
//! atom   := rational | "x[" nat "]" | "u[" mindex "]" | "D[" nat "," nat "]"
//!         | "V[" nat "," mindex "]" | "Z[" nat "]" | "dx[" indexlist "]" | "(" expr ")"
//! mindex := "(" nat ("," nat)* ")"
//! ```
//!
//! Axes and slots are 1-based.  A rational literal may carry a leading minus sign.  Letters
//! apply right to left, so `V[1,(1)]*D[1,1]` is `∂/∂u_x ∘ d/dx`; the value is normal-ordered
//! at once.  For arity at least 2 a product may only put a non-constant function after
//! letters when arity is 1, and `Z[i]` (the total derivative of the whole product) may only
//! follow functions and other `Z` letters.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::forms::{wedge_concat, HorizontalForm};
use crate::jet::{LocalFunction, Monomial, MultiIndex, Rational};
use crate::ldo::{Ldo, LdoKey};
use crate::opcomplex::OperatorForm;

/// Largest exponent accepted after `^`.
pub const MAX_POWER: u32 = 64;

/// Dimension, arity and representation used to read an operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Context {
    pub dim: usize,
    pub arity: usize,
    pub polarized: bool,
}

impl Context {
    pub fn new(dim: usize, arity: usize) -> Self {
        Context { dim, arity, polarized: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Pos {
    line: usize,
    column: usize,
}

#[derive(Clone, Debug)]
enum Node {
    Num(Rational),
    X(usize),
    U(MultiIndex),
    D { slot: usize, axis: usize },
    V { slot: usize, j: MultiIndex },
    Z(usize),
    Dx(Vec<usize>),
    Sum(Vec<(bool, Spanned)>),
    Product(Vec<Spanned>),
    Pow(Box<Spanned>, u32),
}

#[derive(Clone, Debug)]
struct Spanned {
    node: Node,
    pos: Pos,
}

fn syntax(pos: Pos, message: impl Into<String>) -> Error {
    Error::Syntax { line: pos.line, column: pos.column, message: message.into() }
}

struct Parser<'a> {
    chars: Vec<char>,
    at: usize,
    ctx: &'a Context,
}

impl<'a> Parser<'a> {
    fn new(text: &str, ctx: &'a Context) -> Self {
        Parser { chars: text.chars().collect(), at: 0, ctx }
    }

    fn pos_of(&self, at: usize) -> Pos {
        let (mut line, mut column) = (1, 1);
        for &c in &self.chars[..at.min(self.chars.len())] {
            if c == '\n' {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
        }
        Pos { line, column }
    }

    fn pos(&self) -> Pos {
        self.pos_of(self.at)
    }

    fn skip_ws(&mut self) {
        while self.at < self.chars.len() && self.chars[self.at].is_whitespace() {
            self.at += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.at).copied()
    }

    fn describe(&mut self) -> String {
        match self.peek() {
            Some(c) => format!("'{c}'"),
            None => "end of input".into(),
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek() == Some(c) {
            self.at += 1;
            Ok(())
        } else {
            let found = self.describe();
            Err(syntax(self.pos(), format!("expected '{c}', found {found}")))
        }
    }

    /// Matches a keyword immediately followed by `[`, without inner whitespace.
    fn keyword(&mut self, word: &str) -> bool {
        self.skip_ws();
        let w: Vec<char> = word.chars().collect();
        if self.chars.len() >= self.at + w.len() && self.chars[self.at..self.at + w.len()] == w[..] {
            self.at += w.len();
            true
        } else {
            false
        }
    }

    fn digits(&mut self) -> Result<BigInt> {
        self.skip_ws();
        let start = self.at;
        while self.at < self.chars.len() && self.chars[self.at].is_ascii_digit() {
            self.at += 1;
        }
        if start == self.at {
            let found = self.describe();
            return Err(syntax(self.pos(), format!("expected a natural number, found {found}")));
        }
        let s: String = self.chars[start..self.at].iter().collect();
        Ok(s.parse().expect("ascii digits"))
    }

    fn nat(&mut self) -> Result<usize> {
        self.skip_ws();
        let pos = self.pos();
        let n = self.digits()?;
        usize::try_from(n).map_err(|_| syntax(pos, "number too large"))
    }

    fn index(&mut self, limit: usize, what: &str) -> Result<usize> {
        self.skip_ws();
        let pos = self.pos();
        let n = self.nat()?;
        if n == 0 || n > limit {
            return Err(syntax(pos, format!("{what} {n} out of range 1..={limit}")));
        }
        Ok(n - 1)
    }

    fn mindex(&mut self) -> Result<MultiIndex> {
        self.skip_ws();
        let pos = self.pos();
        self.expect('(')?;
        let mut v = Vec::new();
        loop {
            let p = self.pos();
            let n = self.nat()?;
            v.push(u32::try_from(n).map_err(|_| syntax(p, "number too large"))?);
            if self.peek() == Some(',') {
                self.at += 1;
            } else {
                break;
            }
        }
        self.expect(')')?;
        if v.len() != self.ctx.dim {
            return Err(syntax(pos, format!("multi-index has {} entries, expected N = {}", v.len(), self.ctx.dim)));
        }
        Ok(MultiIndex(v))
    }

    fn expr(&mut self) -> Result<Spanned> {
        let pos = {
            self.skip_ws();
            self.pos()
        };
        let mut items = vec![(true, self.term()?)];
        while let Some(c @ ('+' | '-')) = self.peek() {
            self.at += 1;
            items.push((c == '+', self.term()?));
        }
        if items.len() == 1 && items[0].0 {
            return Ok(items.pop().unwrap().1);
        }
        Ok(Spanned { node: Node::Sum(items), pos })
    }

    fn term(&mut self) -> Result<Spanned> {
        let pos = {
            self.skip_ws();
            self.pos()
        };
        let mut items = vec![self.factor()?];
        while self.peek() == Some('*') {
            self.at += 1;
            items.push(self.factor()?);
        }
        if items.len() == 1 {
            return Ok(items.pop().unwrap());
        }
        Ok(Spanned { node: Node::Product(items), pos })
    }

    fn factor(&mut self) -> Result<Spanned> {
        let a = self.atom()?;
        if self.peek() == Some('^') {
            self.at += 1;
            self.skip_ws();
            let pos = self.pos();
            let k = self.nat()?;
            if k > MAX_POWER as usize {
                return Err(syntax(pos, format!("exponent {k} exceeds {MAX_POWER}")));
            }
            let p = a.pos;
            return Ok(Spanned { node: Node::Pow(Box::new(a), k as u32), pos: p });
        }
        Ok(a)
    }

    fn atom(&mut self) -> Result<Spanned> {
        self.skip_ws();
        let pos = self.pos();
        let (dim, arity) = (self.ctx.dim, self.ctx.arity);
        let node = match self.peek() {
            Some('(') => {
                self.at += 1;
                let inner = self.expr()?;
                self.expect(')')?;
                return Ok(inner);
            }
            Some(c) if c.is_ascii_digit() || c == '-' => {
                let negative = c == '-';
                if negative {
                    self.at += 1;
                    if !self.chars.get(self.at).is_some_and(|c| c.is_ascii_digit()) {
                        return Err(syntax(self.pos(), "expected digits after '-'"));
                    }
                }
                let num = self.digits()?;
                let mut value = Rational::from_integer(num);
                if self.peek() == Some('/') {
                    self.at += 1;
                    let dpos = self.pos();
                    let den = self.digits()?;
                    if den.is_zero() {
                        return Err(syntax(dpos, "zero denominator"));
                    }
                    value /= Rational::from_integer(den);
                }
                Node::Num(if negative { -value } else { value })
            }
            _ if self.keyword("x[") => {
                let i = self.index(dim, "axis")?;
                self.expect(']')?;
                Node::X(i)
            }
            _ if self.keyword("u[") => {
                let j = self.mindex()?;
                self.expect(']')?;
                Node::U(j)
            }
            _ if self.keyword("D[") => {
                let slot = self.index(arity, "slot")?;
                self.expect(',')?;
                let axis = self.index(dim, "axis")?;
                self.expect(']')?;
                Node::D { slot, axis }
            }
            _ if self.keyword("V[") => {
                let slot = self.index(arity, "slot")?;
                self.expect(',')?;
                let j = self.mindex()?;
                self.expect(']')?;
                Node::V { slot, j }
            }
            _ if self.keyword("Z[") => {
                let axis = self.index(dim, "axis")?;
                self.expect(']')?;
                Node::Z(axis)
            }
            _ if self.keyword("dx[") => {
                let mut eps: Vec<usize> = Vec::new();
                loop {
                    self.skip_ws();
                    let p = self.pos();
                    let i = self.index(dim, "axis")?;
                    if eps.last().is_some_and(|&l| l >= i) {
                        return Err(syntax(p, "dx indices must be strictly increasing"));
                    }
                    eps.push(i);
                    if self.peek() == Some(',') {
                        self.at += 1;
                    } else {
                        break;
                    }
                }
                self.expect(']')?;
                Node::Dx(eps)
            }
            _ => {
                let found = self.describe();
                return Err(syntax(pos, format!("expected an atom, found {found}")));
            }
        };
        Ok(Spanned { node, pos })
    }
}

fn parse_tree(text: &str, ctx: &Context) -> Result<Spanned> {
    let mut p = Parser::new(text, ctx);
    let tree = p.expr()?;
    if p.peek().is_some() {
        let found = p.describe();
        return Err(syntax(p.pos(), format!("unexpected {found}")));
    }
    Ok(tree)
}

#[derive(Clone, Debug)]
enum Body {
    Unary(Ldo),
    Multi { p: LocalFunction, zeta: MultiIndex, slots: Vec<Ldo> },
}

/// One product of atoms.
#[derive(Clone, Debug)]
struct PTerm {
    eps: Vec<usize>,
    body: Body,
    letters: bool,
}

impl PTerm {
    fn function(ctx: &Context, f: LocalFunction) -> Self {
        let body = if ctx.arity == 1 {
            Body::Unary(Ldo::function(f, 1))
        } else {
            Body::Multi {
                p: f,
                zeta: MultiIndex::zero(ctx.dim),
                slots: vec![Ldo::identity(ctx.dim); ctx.arity],
            }
        };
        PTerm { eps: Vec::new(), body, letters: false }
    }

    fn slot_letter(ctx: &Context, slot: usize, letter: Ldo) -> Self {
        let body = if ctx.arity == 1 {
            Body::Unary(letter)
        } else {
            let mut slots = vec![Ldo::identity(ctx.dim); ctx.arity];
            slots[slot] = letter;
            Body::Multi { p: LocalFunction::one(ctx.dim), zeta: MultiIndex::zero(ctx.dim), slots }
        };
        PTerm { eps: Vec::new(), body, letters: true }
    }

    fn negate(mut self) -> Self {
        let m = -Rational::one();
        self.body = match self.body {
            Body::Unary(a) => Body::Unary(a.scale(&m)),
            Body::Multi { p, zeta, slots } => Body::Multi { p: p.scale(&m), zeta, slots },
        };
        self
    }

    fn mul(&self, other: &PTerm, pos: Pos, dim: usize) -> Result<Option<PTerm>> {
        let Some((sign, eps)) = wedge_concat(&self.eps, &other.eps) else { return Ok(None) };
        let body = match (&self.body, &other.body) {
            (Body::Unary(a), Body::Unary(b)) => Body::Unary(a.compose(std::slice::from_ref(b))?),
            (Body::Multi { p: pa, zeta: za, slots: sa }, Body::Multi { p: pb, zeta: zb, slots: sb }) => {
                let id = Ldo::identity(dim);
                let a_slot_letters = sa.iter().any(|s| *s != id);
                let a_letters = a_slot_letters || !za.is_zero();
                if !a_letters {
                    Body::Multi { p: pa * pb, zeta: zb.clone(), slots: sb.clone() }
                } else if let Some(c) = pb.as_constant() {
                    if zb.is_zero() {
                        let slots = sa
                            .iter()
                            .zip(sb)
                            .map(|(x, y)| x.compose(std::slice::from_ref(y)))
                            .collect::<Result<Vec<_>>>()?;
                        Body::Multi { p: pa.scale(&c), zeta: za.clone(), slots }
                    } else if !a_slot_letters {
                        Body::Multi { p: pa.scale(&c), zeta: za.add(zb), slots: sb.clone() }
                    } else {
                        return Err(syntax(pos, "Z letters must precede slot letters when the arity exceeds 1"));
                    }
                } else {
                    return Err(syntax(pos, "a function factor may follow letters only when the arity is 1"));
                }
            }
            _ => return Err(Error::Internal("mixed term representations".into())),
        };
        let mut t = PTerm { eps, body, letters: self.letters || other.letters };
        if sign < 0 {
            t = t.negate();
        }
        Ok(Some(t))
    }

    fn to_ldo(&self) -> Result<Ldo> {
        match &self.body {
            Body::Unary(a) => Ok(a.clone()),
            Body::Multi { p, zeta, slots } => {
                let mut t = slots[0].clone();
                for s in &slots[1..] {
                    t = t.tensor(s)?;
                }
                for (axis, &k) in zeta.0.iter().enumerate() {
                    for _ in 0..k {
                        t = t.total_left(axis)?;
                    }
                }
                t.mul_function(p)
            }
        }
    }
}

fn eval(tree: &Spanned, ctx: &Context) -> Result<Vec<PTerm>> {
    let dim = ctx.dim;
    Ok(match &tree.node {
        Node::Num(r) => vec![PTerm::function(ctx, LocalFunction::constant(dim, r.clone()))],
        Node::X(i) => vec![PTerm::function(ctx, LocalFunction::x(dim, *i))],
        Node::U(j) => vec![PTerm::function(ctx, LocalFunction::u(j.clone()))],
        Node::D { slot, axis } => vec![PTerm::slot_letter(ctx, *slot, Ldo::xi(dim, 1, 0, *axis)?)],
        Node::V { slot, j } => vec![PTerm::slot_letter(ctx, *slot, Ldo::eta(1, 0, j.clone())?)],
        Node::Z(axis) => {
            if ctx.arity == 1 {
                vec![PTerm::slot_letter(ctx, 0, Ldo::xi(dim, 1, 0, *axis)?)]
            } else {
                let mut t = PTerm::function(ctx, LocalFunction::one(dim));
                if let Body::Multi { zeta, .. } = &mut t.body {
                    *zeta = MultiIndex::unit(dim, *axis);
                }
                t.letters = true;
                vec![t]
            }
        }
        Node::Dx(eps) => {
            let mut t = PTerm::function(ctx, LocalFunction::one(dim));
            t.eps = eps.clone();
            vec![t]
        }
        Node::Sum(items) => {
            let mut out = Vec::new();
            for (plus, item) in items {
                for t in eval(item, ctx)? {
                    out.push(if *plus { t } else { t.negate() });
                }
            }
            out
        }
        Node::Product(items) => {
            let mut acc = eval(&items[0], ctx)?;
            for item in &items[1..] {
                let rhs = eval(item, ctx)?;
                acc = multiply(&acc, &rhs, item.pos, dim)?;
            }
            acc
        }
        Node::Pow(base, k) => {
            let b = eval(base, ctx)?;
            let mut acc = vec![PTerm::function(ctx, LocalFunction::one(dim))];
            for _ in 0..*k {
                acc = multiply(&acc, &b, base.pos, dim)?;
            }
            acc
        }
    })
}

fn multiply(a: &[PTerm], b: &[PTerm], pos: Pos, dim: usize) -> Result<Vec<PTerm>> {
    let mut out = Vec::new();
    for x in a {
        for y in b {
            if let Some(t) = x.mul(y, pos, dim)? {
                out.push(t);
            }
        }
    }
    Ok(out)
}

/// Parses and groups terms by their `dx` factor.
fn parse_grouped(text: &str, ctx: &Context) -> Result<(BTreeMap<Vec<usize>, Ldo>, bool)> {
    if ctx.dim == 0 {
        return Err(Error::Dimension { expected: 1, found: 0 });
    }
    if ctx.arity == 0 {
        return Err(Error::Arity { expected: 1, found: 0 });
    }
    let tree = parse_tree(text, ctx)?;
    let terms = eval(&tree, ctx)?;
    let letters = terms.iter().any(|t| t.letters);
    let mut groups: BTreeMap<Vec<usize>, Ldo> = BTreeMap::new();
    for t in terms {
        let a = t.to_ldo()?;
        let entry = groups.entry(t.eps.clone()).or_insert_with(|| Ldo::zero(ctx.dim, ctx.arity));
        *entry = entry.add(&a)?;
    }
    groups.retain(|_, a| !a.is_zero());
    Ok((groups, letters))
}

fn only_functions(groups: &BTreeMap<Vec<usize>, Ldo>, dim: usize) -> Result<BTreeMap<Vec<usize>, LocalFunction>> {
    let id = LdoKey::identity(dim, 1);
    let mut out = BTreeMap::new();
    for (eps, a) in groups {
        let mut f = LocalFunction::zero(dim);
        for (k, c) in a.terms() {
            if *k != id {
                return Err(Error::Unsupported("operator letters are not allowed here".into()));
            }
            f = &f + c;
        }
        out.insert(eps.clone(), f);
    }
    Ok(out)
}

pub fn parse_function(text: &str, dim: usize) -> Result<LocalFunction> {
    let ctx = Context::new(dim, 1);
    let (groups, _) = parse_grouped(text, &ctx)?;
    let funcs = only_functions(&groups, dim)?;
    if funcs.keys().any(|e| !e.is_empty()) {
        return Err(Error::Unsupported("dx factors are not allowed in a function".into()));
    }
    Ok(funcs.into_values().next().unwrap_or_else(|| LocalFunction::zero(dim)))
}

pub fn parse_ldo(text: &str, ctx: &Context) -> Result<Ldo> {
    let (groups, _) = parse_grouped(text, ctx)?;
    if groups.keys().any(|e| !e.is_empty()) {
        return Err(Error::Unsupported("dx factors are not allowed in an operator".into()));
    }
    let a = groups.into_values().next().unwrap_or_else(|| Ldo::zero(ctx.dim, ctx.arity));
    Ok(if ctx.polarized { a.to_polarized() } else { a })
}

fn homogeneous_degree(keys: impl Iterator<Item = usize>, default: Option<usize>) -> Result<usize> {
    let degrees: std::collections::BTreeSet<usize> = keys.collect();
    match (degrees.len(), default) {
        (0, Some(d)) => Ok(d),
        (0, None) => Ok(0),
        (1, Some(d)) if !degrees.contains(&d) => {
            Err(Error::Degree(format!("expected degree {d}, found {}", degrees.first().unwrap())))
        }
        (1, _) => Ok(*degrees.first().unwrap()),
        _ => Err(Error::Degree("the form is not homogeneous".into())),
    }
}

/// Parses `Σ f_ε·dx[ε]`; `degree` fixes the degree of a zero form and is checked otherwise.
pub fn parse_form(text: &str, dim: usize, degree: Option<usize>) -> Result<HorizontalForm> {
    let ctx = Context::new(dim, 1);
    let (groups, _) = parse_grouped(text, &ctx)?;
    let funcs = only_functions(&groups, dim)?;
    let d = homogeneous_degree(funcs.keys().map(|e| e.len()), degree)?;
    HorizontalForm::from_components(dim, d, funcs)
}

/// Parses `Σ A_ε·dx[ε]`; `degree` is checked when given and fixes the degree of a zero form,
/// which defaults to top degree.
pub fn parse_operator_form(text: &str, ctx: &Context, degree: Option<usize>) -> Result<OperatorForm> {
    let (groups, _) = parse_grouped(text, ctx)?;
    let d = if groups.is_empty() {
        degree.unwrap_or(ctx.dim)
    } else {
        homogeneous_degree(groups.keys().map(|e| e.len()), degree)?
    };
    OperatorForm::from_components(ctx.dim, ctx.arity, d, groups)
}

fn rational_text(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn power(base: String, k: u32) -> String {
    if k == 1 {
        base
    } else {
        format!("{base}^{k}")
    }
}

fn mindex_text(j: &MultiIndex) -> String {
    let parts: Vec<String> = j.0.iter().map(|v| v.to_string()).collect();
    format!("({})", parts.join(","))
}

fn monomial_factors(m: &Monomial) -> Vec<String> {
    let mut out = Vec::new();
    for (i, &e) in m.x.0.iter().enumerate() {
        if e > 0 {
            out.push(power(format!("x[{}]", i + 1), e));
        }
    }
    for (j, &e) in &m.u {
        out.push(power(format!("u[{}]", mindex_text(j)), e));
    }
    out
}

fn letter_factors(key: &LdoKey, polarized: bool) -> Vec<String> {
    let mut out = Vec::new();
    for (slot, (xi, eta)) in key.xi.iter().zip(&key.eta).enumerate() {
        for (axis, &e) in xi.0.iter().enumerate() {
            if e > 0 {
                let letter = if polarized && slot == 0 {
                    format!("Z[{}]", axis + 1)
                } else {
                    format!("D[{},{}]", slot + 1, axis + 1)
                };
                out.push(power(letter, e));
            }
        }
        for (j, &e) in eta {
            out.push(power(format!("V[{},{}]", slot + 1, mindex_text(j)), e));
        }
    }
    out
}

fn dx_factor(eps: &[usize]) -> Vec<String> {
    if eps.is_empty() {
        return Vec::new();
    }
    let parts: Vec<String> = eps.iter().map(|i| (i + 1).to_string()).collect();
    vec![format!("dx[{}]", parts.join(","))]
}

/// Joins signed products into a sum that parses back to the same value.
fn join_terms(terms: Vec<(Rational, Vec<String>)>) -> String {
    if terms.is_empty() {
        return "0".into();
    }
    let mut out = String::new();
    for (idx, (c, factors)) in terms.into_iter().enumerate() {
        let negative = c.is_negative();
        let magnitude = c.abs();
        let mut parts = Vec::new();
        if !magnitude.is_one() || factors.is_empty() || (idx == 0 && negative) {
            let lit = if idx == 0 && negative { -magnitude.clone() } else { magnitude.clone() };
            parts.push(rational_text(&lit));
        }
        parts.extend(factors);
        let body = parts.join("*");
        if idx == 0 {
            out.push_str(&body);
        } else {
            out.push_str(if negative { " - " } else { " + " });
            out.push_str(&body);
        }
    }
    out
}

fn function_terms(f: &LocalFunction, tail: &[String]) -> Vec<(Rational, Vec<String>)> {
    f.terms()
        .map(|(m, c)| {
            let mut factors = monomial_factors(m);
            factors.extend(tail.iter().cloned());
            (c.clone(), factors)
        })
        .collect()
}

fn ldo_terms(a: &Ldo, tail: &[String]) -> Vec<(Rational, Vec<String>)> {
    let mut out = Vec::new();
    for (key, c) in a.terms() {
        let mut letters = letter_factors(key, a.is_polarized());
        letters.extend(tail.iter().cloned());
        out.extend(function_terms(c, &letters));
    }
    out
}

impl fmt::Display for LocalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&join_terms(function_terms(self, &[])))
    }
}

impl fmt::Display for Ldo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&join_terms(ldo_terms(self, &[])))
    }
}

impl fmt::Display for HorizontalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = Vec::new();
        for (eps, g) in self.components() {
            terms.extend(function_terms(g, &dx_factor(eps)));
        }
        f.write_str(&join_terms(terms))
    }
}

impl fmt::Display for OperatorForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = Vec::new();
        for (eps, a) in self.components() {
            terms.extend(ldo_terms(a, &dx_factor(eps)));
        }
        f.write_str(&join_terms(terms))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::rat;
    use crate::random::{random_form, random_ldo, random_operator_form, rng, Shape};

    fn ctx(dim: usize, arity: usize) -> Context {
        Context::new(dim, arity)
    }

    #[test]
    fn single_term() {
        let a = parse_ldo("x[1]*D[1,1]", &ctx(1, 1)).unwrap();
        let expected = Ldo::xi(1, 1, 0, 0).unwrap().mul_function(&LocalFunction::x(1, 0)).unwrap();
        assert_eq!(a, expected);
        assert_eq!(a.to_string(), "x[1]*D[1,1]");
    }

    #[test]
    fn letters_apply_right_to_left() {
        let c = ctx(1, 1);
        let a = parse_ldo("V[1,(1)]*D[1,1]", &c).unwrap();
        let b = parse_ldo("D[1,1]*V[1,(1)] + V[1,(0)]", &c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_string(), "V[1,(0)] + D[1,1]*V[1,(1)]");
        let d = parse_ldo("D[1,1]*x[1]", &c).unwrap();
        assert_eq!(d, parse_ldo("x[1]*D[1,1] + 1", &c).unwrap());
    }

    #[test]
    fn multi_slot_products() {
        let c = ctx(1, 2);
        let a = parse_ldo("Z[1]*D[2,1]", &c).unwrap();
        assert_eq!(a, parse_ldo("D[1,1]*D[2,1] + D[2,1]^2", &c).unwrap());
        assert!(matches!(parse_ldo("D[1,1]*x[1]", &c), Err(Error::Syntax { line: 1, column: 8, .. })));
        assert!(matches!(parse_ldo("D[1,1]*Z[1]", &c), Err(Error::Syntax { .. })));
        let p = Context { polarized: true, ..c };
        let b = parse_ldo("u[(0)]*Z[1]*V[1,(0)]*D[2,1]", &p).unwrap();
        assert!(b.is_polarized());
        assert_eq!(parse_ldo(&b.to_string(), &p).unwrap(), b);
        assert_eq!(b.to_string(), "u[(0)]*Z[1]*V[1,(0)]*D[2,1]");
    }

    #[test]
    fn functions_and_forms() {
        let f = parse_function("3/2*x[1]^2*u[(0,1)] - 1", 2).unwrap();
        assert_eq!(f.to_string(), "-1 + 3/2*x[1]^2*u[(0,1)]");
        assert_eq!(parse_function(&f.to_string(), 2).unwrap(), f);
        let w = parse_form("x[1]*dx[1] + u[(1,0)]*dx[2]", 2, None).unwrap();
        assert_eq!(w.degree(), 1);
        let v = parse_form("dx[2]*dx[1]", 2, None).unwrap();
        assert_eq!(v, HorizontalForm::top(LocalFunction::constant(2, rat(-1))));
        assert!(parse_form("dx[1] + 1", 2, None).is_err());
        assert_eq!(parse_form("0", 2, Some(2)).unwrap().degree(), 2);
        assert!(matches!(parse_form("dx[2,1]", 2, None), Err(Error::Syntax { column: 6, .. })));
    }

    #[test]
    fn positioned_errors() {
        let c = ctx(2, 2);
        for (text, column) in [
            ("x[3]", 3),
            ("D[1,1", 6),
            ("x[1] +", 7),
            ("u[(1)]", 3),
            ("x[1]^99", 6),
            ("1/0", 3),
            ("V[3,(0,0)]", 3),
            ("(x[1]", 6),
            ("x[1] x[2]", 6),
            ("", 1),
            ("- 1", 2),
        ] {
            match parse_ldo(text, &c) {
                Err(Error::Syntax { column: col, line: 1, .. }) => assert_eq!(col, column, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        assert!(matches!(parse_ldo("x[1]\n  + y", &c), Err(Error::Syntax { line: 2, column: 5, .. })));
    }

    #[test]
    fn random_round_trips() {
        let mut r = rng(31);
        let shape = Shape::default();
        for dim in 1..=2 {
            for arity in 1..=3 {
                let c = ctx(dim, arity);
                for _ in 0..5 {
                    let a = random_ldo(&mut r, dim, arity, &shape);
                    assert_eq!(parse_ldo(&a.to_string(), &c).unwrap(), a);
                    let p = Context { polarized: true, ..c };
                    let b = a.to_polarized();
                    assert_eq!(parse_ldo(&b.to_string(), &p).unwrap(), b);
                    let form = random_operator_form(&mut r, dim, arity, dim - 1, &shape);
                    assert_eq!(parse_operator_form(&form.to_string(), &c, Some(dim - 1)).unwrap(), form);
                }
            }
            for d in 0..=dim {
                let w = random_form(&mut r, dim, d, &shape);
                assert_eq!(parse_form(&w.to_string(), dim, Some(d)).unwrap(), w);
            }
        }
    }
}
