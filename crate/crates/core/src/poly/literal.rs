//! Text form of polynomials: `coeff * x1^a x2^b` terms joined by `+`/`-`.
//!
//! Coefficients are rationals `p/q`, decimals, or complex pairs `(p/q, r/s)`.
//! Output is deterministic: terms by descending total degree, then by
//! descending exponent vector.

use super::{total_degree, Exponent, Polynomial};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn render_scalar<C: Scalar>(c: &C) -> String {
    if C::EXACT {
        return c.to_string();
    }
    let z = c.to_c64();
    if z.im == 0.0 {
        format!("{}", z.re)
    } else {
        format!("({}, {})", z.re, z.im)
    }
}

fn is_negative_real<C: Scalar>(c: &C) -> bool {
    let z = c.to_c64();
    c.is_real() && z.im == 0.0 && z.re < 0.0
}

fn render_monomial(e: &[u16]) -> String {
    e.iter()
        .enumerate()
        .filter(|(_, &k)| k > 0)
        .map(|(i, &k)| if k == 1 { format!("x{}", i + 1) } else { format!("x{}^{}", i + 1, k) })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn format_polynomial<C: Scalar>(p: &Polynomial<C>) -> String {
    if p.is_zero() {
        return "0".to_string();
    }
    let mut terms: Vec<(&Exponent, &C)> = p.terms().collect();
    terms.sort_by(|a, b| total_degree(b.0).cmp(&total_degree(a.0)).then_with(|| b.0.cmp(a.0)));
    let mut out = String::new();
    for (idx, (e, c)) in terms.into_iter().enumerate() {
        let neg = is_negative_real(c);
        let mag = if neg { -c.clone() } else { c.clone() };
        let mono = render_monomial(e);
        let body = if mono.is_empty() {
            render_scalar(&mag)
        } else if mag == C::one() {
            mono
        } else {
            format!("{} * {}", render_scalar(&mag), mono)
        };
        match (idx, neg) {
            (0, false) => out.push_str(&body),
            (0, true) => {
                out.push('-');
                out.push_str(&body);
            }
            (_, false) => {
                out.push_str(" + ");
                out.push_str(&body);
            }
            (_, true) => {
                out.push_str(" - ");
                out.push_str(&body);
            }
        }
    }
    out
}

struct Cursor<'a> {
    s: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn err(&self, msg: &str) -> Error {
        Error::Parse(format!("{msg} at byte {} of polynomial literal", self.pos))
    }

    fn digits(&mut self) -> Option<u32> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.s[start..self.pos]).ok()?.parse().ok()
    }

    fn number_token(&mut self) -> &'a str {
        let start = self.pos;
        while let Some(c) = self.peek() {
            let in_exp = (c == b'+' || c == b'-')
                && self.pos > start
                && matches!(self.s[self.pos - 1], b'e' | b'E');
            if c.is_ascii_digit() || c == b'.' || c == b'/' || c == b'e' || c == b'E' || in_exp {
                self.pos += 1;
            } else {
                break;
            }
        }
        std::str::from_utf8(&self.s[start..self.pos]).unwrap_or("")
    }

    fn coefficient<C: Scalar>(&mut self) -> Result<Option<C>> {
        match self.peek() {
            Some(b'(') => {
                let start = self.pos;
                while self.peek().is_some_and(|c| c != b')') {
                    self.pos += 1;
                }
                if self.peek() != Some(b')') {
                    return Err(self.err("unterminated complex coefficient"));
                }
                self.pos += 1;
                let lit = std::str::from_utf8(&self.s[start..self.pos]).unwrap_or("");
                Ok(Some(C::parse_scalar(lit)?))
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let tok = self.number_token();
                Ok(Some(C::parse_scalar(tok)?))
            }
            _ => Ok(None),
        }
    }

    fn monomial(&mut self, nvars: usize) -> Result<Option<Exponent>> {
        let mut e = Exponent::from_elem(0, nvars);
        let mut any = false;
        loop {
            self.skip_ws();
            if self.peek() == Some(b'*') && any {
                self.pos += 1;
                self.skip_ws();
            }
            if self.peek() != Some(b'x') {
                break;
            }
            self.pos += 1;
            let idx = match self.digits() {
                Some(i) => i as usize,
                None if nvars == 1 => 1,
                None => return Err(self.err("variable index missing")),
            };
            if idx == 0 || idx > nvars {
                return Err(self.err(&format!("variable x{idx} outside 1..={nvars}")));
            }
            let mut k = 1u32;
            if self.peek() == Some(b'^') {
                self.pos += 1;
                k = self.digits().ok_or_else(|| self.err("exponent missing"))?;
            }
            e[idx - 1] += k as u16;
            any = true;
        }
        Ok(any.then_some(e))
    }
}

/// Parses a polynomial literal in `nvars` variables `x1..x{nvars}`.
pub fn parse_polynomial<C: Scalar>(s: &str, nvars: usize) -> Result<Polynomial<C>> {
    let mut cur = Cursor { s: s.as_bytes(), pos: 0 };
    let mut out = Polynomial::zero(nvars);
    cur.skip_ws();
    let mut negative = false;
    if let Some(c @ (b'+' | b'-')) = cur.peek() {
        negative = c == b'-';
        cur.pos += 1;
    }
    loop {
        cur.skip_ws();
        let coeff: Option<C> = cur.coefficient()?;
        cur.skip_ws();
        if coeff.is_some() && cur.peek() == Some(b'*') {
            cur.pos += 1;
        }
        let mono = cur.monomial(nvars)?;
        if coeff.is_none() && mono.is_none() {
            return Err(cur.err("expected a term"));
        }
        let c = coeff.unwrap_or_else(C::one);
        let c = if negative { -c } else { c };
        out.add_term(mono.unwrap_or_else(|| Exponent::from_elem(0, nvars)), c);
        cur.skip_ws();
        match cur.peek() {
            None => break,
            Some(b'+') => negative = false,
            Some(b'-') => negative = true,
            Some(_) => return Err(cur.err("expected '+' or '-'")),
        }
        cur.pos += 1;
    }
    Ok(out)
}
