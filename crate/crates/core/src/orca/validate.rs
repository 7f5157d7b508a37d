//! Input-text parsing into a loose document and allowed-list validation.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::catalog::KeywordCatalog;
use super::spec::{render_input, CalcSpec, GeometryRef, SpecError};

/// Where a token sits in an input file.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    KeywordLine,
    Block(String),
    Unknown,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::KeywordLine => f.write_str("keyword_line"),
            Location::Block(b) => write!(f, "block({b})"),
            Location::Unknown => f.write_str("unknown"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Upper-cased offending token.
    pub token: String,
    pub location: Location,
    pub line: Option<usize>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} @ {}", self.token, self.location)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLine {
    pub line: usize,
    pub text: String,
}

impl BlockLine {
    pub fn identifier(&self) -> &str {
        self.text.split_whitespace().next().unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputBlock {
    pub name: String,
    pub line: usize,
    pub lines: Vec<BlockLine>,
}

/// Structure of an input file as written, without interpretation.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InputDocument {
    pub keywords: Vec<(usize, String)>,
    pub maxcore: Option<u32>,
    pub blocks: Vec<InputBlock>,
    pub geometry: Option<GeometryRef>,
}

#[derive(Debug, Error, PartialEq)]
pub enum InputParseError {
    #[error("input line {line}: block %{name} is never closed with `end`")]
    Unterminated { line: usize, name: String },
    #[error("input line {line}: {message}")]
    Bad { line: usize, message: String },
    #[error(transparent)]
    Spec(#[from] SpecError),
}

pub fn parse_input(text: &str) -> Result<InputDocument, InputParseError> {
    let mut doc = InputDocument::default();
    let mut open: Option<InputBlock> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(block) = open.as_mut() {
            if line.eq_ignore_ascii_case("end") {
                doc.blocks.push(open.take().expect("open block"));
            } else {
                block.lines.push(BlockLine {
                    line: line_no,
                    text: line.to_string(),
                });
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix('!') {
            doc.keywords
                .extend(rest.split_whitespace().map(|t| (line_no, t.to_string())));
        } else if let Some(rest) = line.strip_prefix('%') {
            let mut parts = rest.split_whitespace();
            let name = parts.next().unwrap_or("").to_ascii_lowercase();
            if name == "maxcore" {
                let value = parts.next().unwrap_or("");
                doc.maxcore = Some(value.parse().map_err(|_| InputParseError::Bad {
                    line: line_no,
                    message: format!("bad %maxcore value {value:?}"),
                })?);
            } else if name.is_empty() {
                return Err(InputParseError::Bad {
                    line: line_no,
                    message: "empty block name".into(),
                });
            } else {
                open = Some(InputBlock {
                    name,
                    line: line_no,
                    lines: Vec::new(),
                });
            }
        } else if let Some(rest) = line.strip_prefix('*') {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            let bad = |m: &str| InputParseError::Bad {
                line: line_no,
                message: m.to_string(),
            };
            match parts.as_slice() {
                [kind, charge, mult, file] if kind.eq_ignore_ascii_case("xyzfile") => {
                    doc.geometry = Some(GeometryRef {
                        charge: charge.parse().map_err(|_| bad("bad charge"))?,
                        multiplicity: mult.parse().map_err(|_| bad("bad multiplicity"))?,
                        xyz_file: file.to_string(),
                    });
                }
                _ => return Err(bad("expected `* xyzfile <charge> <mult> <file>`")),
            }
        } else {
            return Err(InputParseError::Bad {
                line: line_no,
                message: format!("unexpected line {line:?}"),
            });
        }
    }
    if let Some(block) = open {
        return Err(InputParseError::Unterminated {
            line: block.line,
            name: block.name,
        });
    }
    Ok(doc)
}

impl InputDocument {
    pub fn block(&self, name: &str) -> Option<&InputBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn nprocs(&self) -> Option<u32> {
        self.block("pal")?
            .lines
            .iter()
            .find(|l| l.identifier().eq_ignore_ascii_case("nprocs"))
            .and_then(|l| l.text.split_whitespace().nth(1)?.parse().ok())
    }
}

/// Checks every keyword-line token and block identifier against `catalog`.
/// `%output` print directives are opaque and never checked.
pub fn validate_document(doc: &InputDocument, catalog: &KeywordCatalog) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (line, token) in &doc.keywords {
        let upper = token.to_ascii_uppercase();
        if !catalog.allows_keyword(token) || !seen.insert(upper.clone()) {
            out.push(Violation {
                token: upper,
                location: Location::KeywordLine,
                line: Some(*line),
            });
        }
    }
    for block in &doc.blocks {
        if block.name == "output" {
            continue;
        }
        let location = Location::Block(block.name.clone());
        if !catalog.knows_block(&block.name) {
            out.push(Violation {
                token: block.name.to_ascii_uppercase(),
                location,
                line: Some(block.line),
            });
            continue;
        }
        for l in &block.lines {
            if !catalog.allows_identifier(&block.name, l.identifier()) {
                out.push(Violation {
                    token: l.identifier().to_ascii_uppercase(),
                    location: location.clone(),
                    line: Some(l.line),
                });
            }
        }
    }
    if let Some(n) = doc.nprocs() {
        let (lo, hi) = catalog.nprocs_range;
        if n < lo || n > hi {
            out.push(Violation {
                token: format!("NPROCS {n}"),
                location: Location::Block("pal".into()),
                line: None,
            });
        }
    }
    out
}

pub fn validate_text(text: &str, catalog: &KeywordCatalog) -> Result<Vec<Violation>, InputParseError> {
    Ok(validate_document(&parse_input(text)?, catalog))
}

/// Empty list means the spec conforms to the catalog.
pub fn validate_spec(spec: &CalcSpec, catalog: &KeywordCatalog) -> Result<Vec<Violation>, InputParseError> {
    validate_text(&render_input(spec)?, catalog)
}
