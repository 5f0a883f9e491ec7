//! Exact representations of rotation numbers.
//!
//! Rationals and quadratic surds are held exactly, so `dist(q alpha, Z)`
//! and the continued fraction come from integer arithmetic; floats are
//! treated as the dyadic rational they denote.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Alpha {
    /// `p / q`, `q > 0`, lowest terms.
    Rational { p: i128, q: i128 },
    /// `(a + b sqrt(d)) / c`, `d > 1` not a perfect square, `b != 0`.
    Surd { a: i128, b: i128, d: i128, c: i128 },
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn isqrt(n: i128) -> i128 {
    if n < 2 {
        return n.max(0);
    }
    let mut x = (n as f64).sqrt() as i128;
    while x * x > n {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}

fn ovf(what: &'static str) -> Error {
    Error::Overflow(what)
}

fn mul(a: i128, b: i128) -> Result<i128> {
    a.checked_mul(b).ok_or(ovf("alpha arithmetic"))
}

fn add(a: i128, b: i128) -> Result<i128> {
    a.checked_add(b).ok_or(ovf("alpha arithmetic"))
}

/// `A + B sqrt(d)` in double precision without cancellation.
fn surd_value(a: i128, b: i128, d: i128) -> Result<f64> {
    let bs = b as f64 * (d as f64).sqrt();
    if (a >= 0) == (b >= 0) || a == 0 {
        return Ok(a as f64 + bs);
    }
    // opposite signs: (A^2 - B^2 d) / (A - B sqrt d)
    let num = add(mul(a, a)?, -mul(mul(b, b)?, d)?)?;
    Ok(num as f64 / (a as f64 - bs))
}

impl Alpha {
    pub fn rational(p: i128, q: i128) -> Result<Self> {
        if q == 0 {
            return Err(Error::Invalid("zero denominator".into()));
        }
        let g = gcd(p, q).max(1);
        let s = q.signum();
        Ok(Alpha::Rational { p: s * p / g, q: s * q / g })
    }

    pub fn surd(a: i128, b: i128, d: i128, c: i128) -> Result<Self> {
        if c == 0 {
            return Err(Error::Invalid("zero denominator".into()));
        }
        if d < 0 {
            return Err(Error::Invalid("negative radicand".into()));
        }
        let r = isqrt(d);
        if b == 0 || d == 0 || r * r == d {
            return Alpha::rational(add(a, mul(b, r)?)?, c);
        }
        // pull square factors out of d
        let (mut b, mut d) = (b, d);
        let mut f = 2;
        while f * f <= d {
            while d % (f * f) == 0 {
                d /= f * f;
                b = mul(b, f)?;
            }
            f += 1;
        }
        let g = gcd(gcd(a, b), c).max(1);
        let s = c.signum();
        Ok(Alpha::Surd { a: s * a / g, b: s * b / g, d, c: s * c / g })
    }

    /// `(sqrt(5) - 1) / 2`.
    pub fn golden() -> Self {
        Alpha::Surd { a: -1, b: 1, d: 5, c: 2 }
    }

    /// `sum_{k=1}^{n} 10^{-k!}`, exact for `n <= 4`.
    pub fn liouville(n: u32) -> Result<Self> {
        if !(1..=4).contains(&n) {
            return Err(Error::Invalid(format!("liouville({n}) needs 1 <= n <= 4")));
        }
        let fact = |k: u32| (1..=k).product::<u32>();
        let top = fact(n);
        let q = 10i128.pow(top);
        let p = (1..=n).map(|k| 10i128.pow(top - fact(k))).sum();
        Alpha::rational(p, q)
    }

    /// The dyadic rational a finite float denotes.
    pub fn from_f64(x: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::Invalid(format!("non-finite alpha {x}")));
        }
        if x == 0.0 {
            return Alpha::rational(0, 1);
        }
        let bits = x.to_bits();
        let sign = if bits >> 63 == 1 { -1 } else { 1 };
        let exp = ((bits >> 52) & 0x7ff) as i32;
        let frac = (bits & ((1u64 << 52) - 1)) as i128;
        let (mant, e) = if exp == 0 { (frac, -1074) } else { (frac | (1 << 52), exp - 1075) };
        if e >= 0 {
            return Alpha::rational(sign * mul(mant, 1i128.checked_shl(e as u32).ok_or(ovf("float"))?)?, 1);
        }
        let tz = mant.trailing_zeros() as i32;
        let shift = (-e - tz).max(0);
        if shift > 125 {
            return Err(Error::Overflow("float alpha too small for exact conversion"));
        }
        Alpha::rational(sign * (mant >> tz.min(-e)), 1i128 << shift)
    }

    pub fn is_rational(&self) -> bool {
        matches!(self, Alpha::Rational { .. })
    }

    pub fn to_f64(&self) -> f64 {
        match *self {
            Alpha::Rational { p, q } => p as f64 / q as f64,
            Alpha::Surd { a, b, d, c } => surd_value(a, b, d).unwrap_or(f64::NAN) / c as f64,
        }
    }

    /// `l alpha - round(l alpha)` in `[-1/2, 1/2]`, accurate to relative
    /// rounding error even when tiny.
    pub fn signed_residue(&self, l: i128) -> Result<f64> {
        match *self {
            Alpha::Rational { p, q } => {
                let r = mul(l, p)?.rem_euclid(q);
                let r = if 2 * r > q { r - q } else { r };
                Ok(r as f64 / q as f64)
            }
            Alpha::Surd { a, b, d, c } => {
                let approx = l as f64 * self.to_f64();
                let mut n = approx.round() as i128;
                // (l a - n c + l b sqrt d) / c
                let eval = |n: i128| -> Result<f64> {
                    Ok(surd_value(add(mul(l, a)?, -mul(n, c)?)?, mul(l, b)?, d)? / c as f64)
                };
                let mut r = eval(n)?;
                for _ in 0..2 {
                    if r > 0.5 {
                        n += 1;
                        r = eval(n)?;
                    } else if r < -0.5 {
                        n -= 1;
                        r = eval(n)?;
                    }
                }
                Ok(r)
            }
        }
    }

    /// `dist(l alpha, Z)`.
    pub fn dist(&self, l: i128) -> Result<f64> {
        Ok(self.signed_residue(l)?.abs())
    }

    /// Continued fraction `[a0; a1, ...]` with convergents, stopping after the
    /// first convergent whose denominator exceeds `q_stop`, after `max_depth`
    /// quotients, or when the expansion terminates.
    pub fn continued_fraction(&self, q_stop: i128, max_depth: usize) -> Result<ContinuedFraction> {
        let mut quotients = Vec::new();
        let mut convergents: Vec<(i128, i128)> = Vec::new();
        let (mut p0, mut q0, mut p1, mut q1) = (1i128, 0i128, 0i128, 1i128);
        let mut terminated = false;
        let mut state = CfState::new(self)?;
        while quotients.len() < max_depth {
            let Some(a) = state.next()? else {
                terminated = true;
                break;
            };
            let (Some(p), Some(q)) =
                (a.checked_mul(p0).and_then(|x| x.checked_add(p1)), a.checked_mul(q0).and_then(|x| x.checked_add(q1)))
            else {
                break;
            };
            quotients.push(a);
            convergents.push((p, q));
            (p1, q1, p0, q0) = (p0, q0, p, q);
            if state.is_done() {
                terminated = true;
                break;
            }
            if q > q_stop {
                break;
            }
        }
        Ok(ContinuedFraction { quotients, convergents, terminated })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuedFraction {
    pub quotients: Vec<i128>,
    pub convergents: Vec<(i128, i128)>,
    /// The expansion ended: alpha equals the last convergent.
    pub terminated: bool,
}

/// Gauss-map state: Euclid pairs for rationals, `(P + sqrt D) / Q` for surds.
enum CfState {
    Rational { num: i128, den: i128, done: bool },
    Surd { p: i128, q: i128, dd: i128, root: i128 },
}

impl CfState {
    fn new(alpha: &Alpha) -> Result<Self> {
        Ok(match *alpha {
            Alpha::Rational { p, q } => CfState::Rational { num: p, den: q, done: false },
            Alpha::Surd { a, b, d, c } => {
                // alpha = (a + s sqrt(b^2 d)) / c with s = sign(b)
                let s = b.signum();
                let (p0, d0, q0) = (a * s, mul(mul(b, b)?, d)?, c * s);
                let qa = q0.abs();
                let dd = mul(d0, mul(q0, q0)?)?;
                CfState::Surd { p: mul(p0, qa)?, q: mul(q0, qa)?, dd, root: isqrt(dd) }
            }
        })
    }

    fn is_done(&self) -> bool {
        matches!(self, CfState::Rational { done: true, .. })
    }

    fn next(&mut self) -> Result<Option<i128>> {
        match self {
            CfState::Rational { num, den, done } => {
                if *done {
                    return Ok(None);
                }
                let a = num.div_euclid(*den);
                let r = num.rem_euclid(*den);
                if r == 0 {
                    *done = true;
                } else {
                    (*num, *den) = (*den, r);
                }
                Ok(Some(a))
            }
            CfState::Surd { p, q, dd, root } => {
                let a = if *q > 0 { add(*p, *root)?.div_euclid(*q) } else { -(add(*p, *root)?.div_euclid(-*q) + 1) };
                let p_next = add(mul(a, *q)?, -*p)?;
                let q_next = add(*dd, -mul(p_next, p_next)?)? / *q;
                (*p, *q) = (p_next, q_next);
                Ok(Some(a))
            }
        }
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Alpha::Rational { p, q } => write!(f, "{p}/{q}"),
            Alpha::Surd { a, b, d, c } => write!(f, "({a} + {b}*sqrt({d}))/{c}"),
        }
    }
}

/// Element of `Q(sqrt d)`: `(a + b sqrt d) / c`.
#[derive(Debug, Clone, Copy)]
struct QuadValue {
    a: i128,
    b: i128,
    c: i128,
}

impl QuadValue {
    fn int(n: i128) -> Self {
        QuadValue { a: n, b: 0, c: 1 }
    }

    fn norm(self) -> Result<Self> {
        let g = gcd(gcd(self.a, self.b), self.c).max(1);
        let s = self.c.signum();
        Ok(QuadValue { a: s * self.a / g, b: s * self.b / g, c: s * self.c / g })
    }

    fn add(self, o: Self) -> Result<Self> {
        QuadValue {
            a: add(mul(self.a, o.c)?, mul(o.a, self.c)?)?,
            b: add(mul(self.b, o.c)?, mul(o.b, self.c)?)?,
            c: mul(self.c, o.c)?,
        }
        .norm()
    }

    fn neg(self) -> Self {
        QuadValue { a: -self.a, b: -self.b, c: self.c }
    }

    fn mul(self, o: Self, d: i128) -> Result<Self> {
        QuadValue {
            a: add(mul(self.a, o.a)?, mul(mul(self.b, o.b)?, d)?)?,
            b: add(mul(self.a, o.b)?, mul(self.b, o.a)?)?,
            c: mul(self.c, o.c)?,
        }
        .norm()
    }

    fn inv(self, d: i128) -> Result<Self> {
        // c / (a + b sqrt d) = c (a - b sqrt d) / (a^2 - b^2 d)
        let den = add(mul(self.a, self.a)?, -mul(mul(self.b, self.b)?, d)?)?;
        if den == 0 {
            return Err(Error::Invalid("division by zero in alpha expression".into()));
        }
        QuadValue { a: mul(self.c, self.a)?, b: -mul(self.c, self.b)?, c: den }.norm()
    }
}

/// Recursive-descent parser over `Q(sqrt d)` for one radicand `d`.
struct Parser<'a> {
    s: &'a [u8],
    i: usize,
    d: Option<i128>,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse { what: "alpha", detail: format!("{msg} at offset {}", self.i) }
    }

    fn skip(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip();
        self.s.get(self.i).copied()
    }

    fn d(&self) -> i128 {
        self.d.unwrap_or(0)
    }

    fn expr(&mut self) -> Result<QuadValue> {
        let mut v = self.term()?;
        while let Some(op @ (b'+' | b'-')) = self.peek() {
            self.i += 1;
            let t = self.term()?;
            v = v.add(if op == b'+' { t } else { t.neg() })?;
        }
        Ok(v)
    }

    fn term(&mut self) -> Result<QuadValue> {
        let mut v = self.unary()?;
        while let Some(op @ (b'*' | b'/')) = self.peek() {
            self.i += 1;
            let t = self.unary()?;
            let d = self.d();
            v = if op == b'*' { v.mul(t, d)? } else { v.mul(t.inv(d)?, d)? };
        }
        Ok(v)
    }

    fn unary(&mut self) -> Result<QuadValue> {
        match self.peek() {
            Some(b'-') => {
                self.i += 1;
                Ok(self.unary()?.neg())
            }
            Some(b'+') => {
                self.i += 1;
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<QuadValue> {
        match self.peek() {
            Some(b'(') => {
                self.i += 1;
                let v = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.i += 1;
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.i;
                while self.i < self.s.len() && self.s[self.i].is_ascii_alphabetic() {
                    self.i += 1;
                }
                let word = std::str::from_utf8(&self.s[start..self.i]).unwrap_or("");
                if word != "sqrt" {
                    return Err(self.err(&format!("unknown name '{word}'")));
                }
                if self.peek() != Some(b'(') {
                    return Err(self.err("expected '(' after sqrt"));
                }
                self.i += 1;
                let arg = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.i += 1;
                if arg.b != 0 || arg.c != 1 || arg.a < 0 {
                    return Err(self.err("sqrt takes a non-negative integer"));
                }
                let r = isqrt(arg.a);
                if r * r == arg.a {
                    return Ok(QuadValue::int(r));
                }
                // sqrt(n) = f sqrt(d) with d the squarefree radicand
                let (mut f, mut d) = (1i128, arg.a);
                let mut p = 2;
                while p * p <= d {
                    while d % (p * p) == 0 {
                        d /= p * p;
                        f *= p;
                    }
                    p += 1;
                }
                match self.d {
                    Some(old) if old != d => Err(self.err("only one radicand is supported")),
                    _ => {
                        self.d = Some(d);
                        Ok(QuadValue { a: 0, b: f, c: 1 })
                    }
                }
            }
            _ => Err(self.err("unexpected input")),
        }
    }

    fn number(&mut self) -> Result<QuadValue> {
        let start = self.i;
        while self.i < self.s.len() && (self.s[self.i].is_ascii_digit() || self.s[self.i] == b'.') {
            self.i += 1;
        }
        let text = std::str::from_utf8(&self.s[start..self.i]).unwrap_or("");
        let (int, frac) = text.split_once('.').unwrap_or((text, ""));
        if frac.contains('.') || (int.is_empty() && frac.is_empty()) {
            return Err(self.err("malformed number"));
        }
        let digits = format!("{int}{frac}");
        let num: i128 = digits.parse().map_err(|_| self.err("number too long"))?;
        let den = 10i128.checked_pow(frac.len() as u32).ok_or_else(|| self.err("number too long"))?;
        QuadValue { a: num, b: 0, c: den }.norm()
    }
}

/// Parses `golden`, `liouville(n)`, rationals `p/q`, decimals, and
/// arithmetic over one square root such as `(sqrt(5)-1)/2`. Anything with an
/// exponent is read as a float.
pub fn parse_alpha(text: &str) -> Result<Alpha> {
    let t = text.trim();
    if t == "golden" {
        return Ok(Alpha::golden());
    }
    if let Some(inner) = t.strip_prefix("liouville(").and_then(|r| r.strip_suffix(')')) {
        let n: u32 = inner
            .trim()
            .parse()
            .map_err(|_| Error::Parse { what: "alpha", detail: format!("bad liouville order '{inner}'") })?;
        return Alpha::liouville(n);
    }
    if t.contains(['e', 'E']) && !t.contains("sqrt") {
        let x: f64 = t.parse().map_err(|e| Error::Parse { what: "alpha", detail: format!("{e}") })?;
        return Alpha::from_f64(x);
    }
    let mut p = Parser { s: t.as_bytes(), i: 0, d: None };
    let v = p.expr()?;
    if p.peek().is_some() {
        return Err(p.err("trailing input"));
    }
    Alpha::surd(v.a, v.b, p.d(), v.c)
}
