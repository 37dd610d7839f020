//! Sparse polynomials in the parameter variables `s1`, `s2` and the first
//! fiber coordinate `z1`, used for family coefficient functions. Parsed from
//! the comma-separated monomial grammar of family files, e.g.
//! `a0 = s, (0,1)*s^2, -3*z1`.

use crate::error::{Error, Result};
use crate::C64;

/// One monomial: coeff * s1^e0 * s2^e1 * z1^e2.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Monomial {
    pub coeff: C64,
    pub exps: [u32; 3],
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamPoly {
    pub terms: Vec<Monomial>,
}

impl ParamPoly {
    pub fn zero() -> Self {
        ParamPoly { terms: Vec::new() }
    }

    pub fn constant(c: C64) -> Self {
        if c.norm() == 0.0 {
            return Self::zero();
        }
        ParamPoly {
            terms: vec![Monomial { coeff: c, exps: [0, 0, 0] }],
        }
    }

    pub fn variable(index: usize) -> Self {
        let mut exps = [0u32; 3];
        exps[index] = 1;
        ParamPoly {
            terms: vec![Monomial { coeff: C64::new(1.0, 0.0), exps }],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn uses_z1(&self) -> bool {
        self.terms.iter().any(|m| m.exps[2] > 0)
    }

    pub fn uses_s2(&self) -> bool {
        self.terms.iter().any(|m| m.exps[1] > 0)
    }

    /// Evaluate at (s1, s2, z1).
    pub fn eval(&self, s1: C64, s2: C64, z1: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for m in &self.terms {
            let mut t = m.coeff;
            t *= s1.powu(m.exps[0]);
            t *= s2.powu(m.exps[1]);
            t *= z1.powu(m.exps[2]);
            acc += t;
        }
        acc
    }

    /// Partial derivative with respect to z1 (for skew Jacobians).
    pub fn d_dz1(&self) -> ParamPoly {
        let terms = self
            .terms
            .iter()
            .filter(|m| m.exps[2] > 0)
            .map(|m| Monomial {
                coeff: m.coeff * (m.exps[2] as f64),
                exps: [m.exps[0], m.exps[1], m.exps[2] - 1],
            })
            .collect();
        ParamPoly { terms }
    }

    /// Parse a comma-separated monomial list. Each monomial is a `*`-joined
    /// product of factors; a factor is a real literal, a complex literal
    /// `(re,im)`, or a variable `s`, `s1`, `s2`, `z1` with optional `^k`.
    /// A leading `-` on a monomial negates it.
    pub fn parse(text: &str) -> Result<ParamPoly> {
        let mut terms = Vec::new();
        for raw in text.split(',') {
            // Complex literals contain commas; re-join "(a" with "b)" pieces.
            terms.push(raw.trim().to_string());
        }
        // Re-join split complex literals "(re" "im)".
        let mut monomial_texts: Vec<String> = Vec::new();
        let mut pending: Option<String> = None;
        for piece in terms {
            match pending.take() {
                Some(open) => {
                    let joined = format!("{},{}", open, piece);
                    if joined.matches('(').count() == joined.matches(')').count() {
                        monomial_texts.push(joined);
                    } else {
                        pending = Some(joined);
                    }
                }
                None => {
                    if piece.matches('(').count() != piece.matches(')').count() {
                        pending = Some(piece);
                    } else {
                        monomial_texts.push(piece);
                    }
                }
            }
        }
        if let Some(open) = pending {
            return Err(Error::FamilyParse(format!("unbalanced parentheses in `{open}`")));
        }

        let mut poly = ParamPoly::zero();
        for mono in monomial_texts {
            let mono = mono.trim();
            if mono.is_empty() {
                continue;
            }
            poly.terms.push(parse_monomial(mono)?);
        }
        poly.normalize();
        Ok(poly)
    }

    fn normalize(&mut self) {
        self.terms.sort_by_key(|m| m.exps);
        let mut out: Vec<Monomial> = Vec::new();
        for m in self.terms.drain(..) {
            match out.last_mut() {
                Some(last) if last.exps == m.exps => last.coeff += m.coeff,
                _ => out.push(m),
            }
        }
        out.retain(|m| m.coeff.norm() > 0.0);
        self.terms = out;
    }
}

fn parse_monomial(text: &str) -> Result<Monomial> {
    let (sign, body) = match text.strip_prefix('-') {
        Some(rest) => (-1.0, rest.trim()),
        None => (1.0, text),
    };
    let mut coeff = C64::new(sign, 0.0);
    let mut exps = [0u32; 3];
    for factor in body.split('*') {
        let factor = factor.trim();
        if factor.is_empty() {
            return Err(Error::FamilyParse(format!("empty factor in `{text}`")));
        }
        if let Some(inner) = factor.strip_prefix('(').and_then(|f| f.strip_suffix(')')) {
            let mut parts = inner.splitn(2, ',');
            let re = parse_real(parts.next().unwrap_or(""), text)?;
            let im = parse_real(parts.next().unwrap_or("0"), text)?;
            coeff *= C64::new(re, im);
            continue;
        }
        let (name, exp) = match factor.split_once('^') {
            Some((n, e)) => {
                let exp: u32 = e.trim().parse().map_err(|_| {
                    Error::FamilyParse(format!("bad exponent `{e}` in `{text}`"))
                })?;
                (n.trim(), exp)
            }
            None => (factor, 1),
        };
        match name {
            "s" | "s1" => exps[0] += exp,
            "s2" => exps[1] += exp,
            "z1" => exps[2] += exp,
            _ => {
                let v = parse_real(name, text)?;
                coeff *= C64::new(v, 0.0).powu(exp);
            }
        }
    }
    Ok(Monomial { coeff, exps })
}

fn parse_real(text: &str, context: &str) -> Result<f64> {
    text.trim()
        .parse()
        .map_err(|_| Error::FamilyParse(format!("bad number `{text}` in `{context}`")))
}
