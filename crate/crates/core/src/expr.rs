//! Evaluation of the exact-expression strings used in registry files, such as
//! `sqrt((3+sqrt(3))/6)` or `exp(2*pi*i/7)`.
//!
//! Grammar: sums of products of signed powers. Atoms are numbers, constants
//! (`i`, `pi`, `phi` for the golden ratio, `omega` for `exp(2πi/3)`), parenthesized
//! expressions and calls of `sqrt`, `exp`, `cos`, `sin`, `conj`.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub fn eval(src: &str) -> Result<Complex64> {
    let mut p = Parser { src, bytes: src.as_bytes(), pos: 0 };
    let v = p.sum()?;
    p.skip_ws();
    if p.pos != p.bytes.len() {
        return Err(p.err("trailing input"));
    }
    if !v.re.is_finite() || !v.im.is_finite() {
        return Err(p.err("value is not finite"));
    }
    Ok(v)
}

/// Real-valued expression; rejects results with an imaginary part above 1e-12.
pub fn eval_real(src: &str) -> Result<f64> {
    let v = eval(src)?;
    if v.im.abs() > 1e-12 {
        return Err(Error::Expression { expr: src.into(), msg: "expected a real value".into() });
    }
    Ok(v.re)
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Expression { expr: self.src.into(), msg: format!("{msg} at offset {}", self.pos) }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn sum(&mut self) -> Result<Complex64> {
        let mut acc = self.product()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.product()?;
            acc = if c == b'+' { acc + rhs } else { acc - rhs };
        }
        Ok(acc)
    }

    fn product(&mut self) -> Result<Complex64> {
        let mut acc = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            acc = if c == b'*' { acc * rhs } else { acc / rhs };
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Complex64> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Complex64> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let e = self.unary()?;
            if e.im == 0.0 && base.im == 0.0 && base.re >= 0.0 {
                return Ok(Complex64::new(base.re.powf(e.re), 0.0));
            }
            return Ok(base.powc(e));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Complex64> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let v = self.sum()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Complex64> {
        let start = self.pos;
        while self.pos < self.bytes.len() && (self.bytes[self.pos].is_ascii_digit() || self.bytes[self.pos] == b'.') {
            self.pos += 1;
        }
        // optional exponent, e.g. 1e-3
        if self.pos < self.bytes.len() && (self.bytes[self.pos] == b'e' || self.bytes[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.bytes.len() && (self.bytes[self.pos] == b'-' || self.bytes[self.pos] == b'+') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if digits == self.pos {
                self.pos = save;
            }
        }
        self.src[start..self.pos]
            .parse::<f64>()
            .map(|x| Complex64::new(x, 0.0))
            .map_err(|_| self.err("malformed number"))
    }

    fn ident(&mut self) -> Result<Complex64> {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name = &self.src[start..self.pos];
        if self.peek() == Some(b'(') {
            self.pos += 1;
            let arg = self.sum()?;
            if self.peek() != Some(b')') {
                return Err(self.err("expected `)` after argument"));
            }
            self.pos += 1;
            return match name {
                "sqrt" => Ok(if arg.im == 0.0 && arg.re >= 0.0 { Complex64::new(arg.re.sqrt(), 0.0) } else { arg.sqrt() }),
                "exp" => Ok(arg.exp()),
                "cos" => Ok(arg.cos()),
                "sin" => Ok(arg.sin()),
                "conj" => Ok(arg.conj()),
                _ => Err(self.err(&format!("unknown function `{name}`"))),
            };
        }
        match name {
            "i" => Ok(Complex64::i()),
            "pi" => Ok(Complex64::new(std::f64::consts::PI, 0.0)),
            "phi" => Ok(Complex64::new((1.0 + 5f64.sqrt()) / 2.0, 0.0)),
            "omega" => Ok(Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0)),
            _ => Err(self.err(&format!("unknown constant `{name}`"))),
        }
    }
}
