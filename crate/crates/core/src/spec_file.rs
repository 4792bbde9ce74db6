//! JSON lattice specification files.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::parse_block;
use crate::lattice::{build_lattice, QuadraticLattice};
use crate::ring::{default_unram_poly, make_ring_with, Ring};

/// An Eisenstein coefficient: an integer, or a `W` element by its `y`-coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EisCoeff {
    Int(i64),
    Poly(Vec<i64>),
}

impl EisCoeff {
    fn to_poly(&self) -> Vec<i64> {
        match self {
            EisCoeff::Int(c) => vec![*c],
            EisCoeff::Poly(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingSection {
    pub p: u64,
    #[serde(default = "one")]
    pub f: usize,
    #[serde(default = "one")]
    pub e: usize,
    /// Eisenstein polynomial, lowest degree first; defaults to `x^e - p`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eis: Option<Vec<EisCoeff>>,
    /// Polynomial defining the unramified part; defaults to a fixed irreducible one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unram: Option<Vec<i64>>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockEntry {
    #[serde(default)]
    pub scale: u32,
    pub block: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision_cap: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enum_budget: Option<u128>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_kmax: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpecFile {
    pub ring: RingSection,
    pub blocks: Vec<BlockEntry>,
    #[serde(default)]
    pub options: SpecOptions,
}

impl RingSection {
    pub fn build(&self) -> Result<Ring> {
        let unram = match &self.unram {
            Some(u) => u.clone(),
            None => default_unram_poly(self.p, self.f.max(1)),
        };
        let eis: Vec<Vec<i64>> = match &self.eis {
            Some(c) => c.iter().map(EisCoeff::to_poly).collect(),
            None => {
                let mut c = vec![vec![0]; self.e + 1];
                c[0] = vec![-(self.p as i64)];
                c[self.e] = vec![1];
                c
            }
        };
        make_ring_with(self.p, self.f, self.e, &unram, &eis)
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
    (line, col)
}

/// Byte offset of the opening quote of the `idx`-th `"block"` string value.
fn block_offset(text: &str, idx: usize) -> Option<usize> {
    let key = "\"block\"";
    let mut from = 0;
    let mut seen = 0;
    while let Some(i) = text[from..].find(key) {
        let after = from + i + key.len();
        let rest = text[after..].trim_start();
        if let Some(rest) = rest.strip_prefix(':') {
            let value = rest.trim_start();
            if value.starts_with('"') {
                if seen == idx {
                    return Some(text.len() - value.len());
                }
                seen += 1;
            }
        }
        from = after;
    }
    None
}

/// Parses a spec file, reporting the first error with its line and column.
pub fn parse_spec(text: &str) -> Result<LatticeSpecFile> {
    let spec: LatticeSpecFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: {
            let m = e.to_string();
            m.split(" at line ").next().unwrap_or(&m).to_string()
        },
    })?;
    let ring = spec.ring.build()?;
    for (i, b) in spec.blocks.iter().enumerate() {
        if let Err(Error::Parse { column, message, .. }) = parse_block(&ring, b.scale, &b.block) {
            let (line, col) = match block_offset(text, i) {
                Some(off) => {
                    let (l, c) = line_col(text, off);
                    (l, c + column)
                }
                None => (0, column),
            };
            return Err(Error::Parse {
                line,
                column: col,
                message: format!("block {i}: {message}"),
            });
        }
    }
    if spec.blocks.is_empty() {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: "at least one block is required".into(),
        });
    }
    Ok(spec)
}

impl LatticeSpecFile {
    /// Canonical serialization (compact JSON, fixed field order).
    pub fn to_canonical(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }

    pub fn lattice(&self) -> Result<QuadraticLattice> {
        let ring = self.ring.build()?;
        let blocks = self
            .blocks
            .iter()
            .map(|b| parse_block(&ring, b.scale, &b.block))
            .collect::<Result<Vec<_>>>()?;
        build_lattice(&ring, &blocks)
    }
}
