//! Element expressions and block strings.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor ('*' factor)*
//! factor := integer | 'pi' ('^' integer)? | 'u' integer | 'y' ('^' integer)?
//!         | '-' factor | '(' expr ')'
//! block  := 'A' '(' expr ',' expr ')' | '(' expr ')'
//! ```
//!
//! `uk` is the unit `1 + pi*k`; `y` is the generator of the unramified part.

use crate::error::{Error, Result};
use crate::lattice::{BlockKind, BlockSpec};
use crate::ring::{Ring, RingElem};

struct Parser<'a> {
    ring: &'a Ring,
    chars: Vec<char>,
    pos: usize,
}

fn err(column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line: 1,
        column,
        message: message.into(),
    }
}

impl<'a> Parser<'a> {
    fn new(ring: &'a Ring, text: &str) -> Self {
        Parser {
            ring,
            chars: text.chars().collect(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    /// 1-based column of the next significant character.
    fn column(&mut self) -> usize {
        self.skip_ws();
        self.pos + 1
    }

    fn expect(&mut self, c: char) -> Result<()> {
        match self.peek() {
            Some(x) if x == c => {
                self.pos += 1;
                Ok(())
            }
            Some(x) => Err(err(self.pos + 1, format!("expected '{c}', found '{x}'"))),
            None => Err(err(self.pos + 1, format!("expected '{c}', found end of input"))),
        }
    }

    fn integer(&mut self) -> Result<u64> {
        let col = self.column();
        let start = self.pos;
        while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(match self.chars.get(self.pos) {
                Some(c) => err(col, format!("expected integer, found '{c}'")),
                None => err(col, "expected integer, found end of input"),
            });
        }
        let s: String = self.chars[start..self.pos].iter().collect();
        s.parse()
            .map_err(|_| err(col, format!("integer {s} out of range")))
    }

    /// `'^' integer`; a missing exponent is reported at the caret.
    fn exponent(&mut self) -> Result<u64> {
        let caret = self.column();
        self.pos += 1;
        self.integer()
            .map_err(|_| err(caret, "'^' must be followed by an integer exponent"))
    }

    fn keyword(&mut self, kw: &str) -> bool {
        let k: Vec<char> = kw.chars().collect();
        if self.chars[self.pos..].starts_with(&k) {
            self.pos += k.len();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<RingElem> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some('+') => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?);
                }
                Some('-') => {
                    self.pos += 1;
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<RingElem> {
        let mut acc = self.factor()?;
        while self.peek() == Some('*') {
            self.pos += 1;
            acc = acc.mul(&self.factor()?);
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<RingElem> {
        let col = self.column();
        let ring = self.ring;
        match self.peek() {
            Some(c) if c.is_ascii_digit() => {
                let v = self.integer()?;
                let v = i64::try_from(v).map_err(|_| err(col, "integer out of range"))?;
                Ok(RingElem::from_int(ring, v))
            }
            Some('-') => {
                self.pos += 1;
                Ok(self.factor()?.neg())
            }
            Some('(') => {
                self.pos += 1;
                let v = self.expr()?;
                self.expect(')')?;
                Ok(v)
            }
            Some('p') if self.keyword("pi") => {
                if self.peek() == Some('^') {
                    let k = self.exponent()?;
                    if k > ring.max_prec() as u64 {
                        return Ok(RingElem::zero(ring));
                    }
                    Ok(RingElem::pi_pow(ring, k as u32))
                } else {
                    Ok(RingElem::pi(ring))
                }
            }
            Some('u') => {
                self.pos += 1;
                if !matches!(self.chars.get(self.pos), Some(c) if c.is_ascii_digit()) {
                    return Err(err(self.pos + 1, "expected unit index after 'u'"));
                }
                let k = self.integer()?;
                let k = i64::try_from(k).map_err(|_| err(col, "unit index out of range"))?;
                let one = RingElem::one(ring);
                Ok(one.add(&RingElem::pi(ring).mul_int(k)))
            }
            Some('y') => {
                self.pos += 1;
                let y = RingElem::y(ring);
                if self.peek() == Some('^') {
                    Ok(y.pow(self.exponent()?))
                } else {
                    Ok(y)
                }
            }
            Some(c) => Err(err(col, format!("unexpected '{c}'"))),
            None => Err(err(col, "unexpected end of input")),
        }
    }

    fn finish(&mut self) -> Result<()> {
        match self.peek() {
            None => Ok(()),
            Some(c) => Err(err(self.pos + 1, format!("unexpected trailing '{c}'"))),
        }
    }
}

/// Evaluates an element expression in `ring`.
pub fn parse_element(ring: &Ring, text: &str) -> Result<RingElem> {
    let mut p = Parser::new(ring, text);
    let v = p.expr()?;
    p.finish()?;
    Ok(v)
}

/// Parses `A(a, b)` or `(t)` into a block at the given scale.
pub fn parse_block(ring: &Ring, scale: u32, text: &str) -> Result<BlockSpec> {
    let mut p = Parser::new(ring, text);
    let kind = if p.peek() == Some('A') {
        p.pos += 1;
        p.expect('(')?;
        let a = p.expr()?;
        p.expect(',')?;
        let b = p.expr()?;
        p.expect(')')?;
        BlockKind::Plane(a, b)
    } else {
        p.expect('(')?;
        let t = p.expr()?;
        p.expect(')')?;
        BlockKind::Line(t)
    };
    p.finish()?;
    Ok(BlockSpec { scale, kind })
}
