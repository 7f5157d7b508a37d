//! Allowed-keyword catalogs.
//!
//! File format: `[section]` headers followed by one token per line. The
//! `keyword_line` section lists simple-input tokens; any other name is a
//! `%block` whose identifiers are listed. `[nprocs]` holds a `lo..hi` range
//! and `[maxcore]` the recommended MB per core. `#` starts a comment.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

const DEFAULT_TEXT: &str = include_str!("../../catalogs/default.catalog");

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog line {0}: token outside of any section")]
    NoSection(usize),
    #[error("catalog line {line}: bad {what} value {value:?}")]
    BadValue {
        line: usize,
        what: &'static str,
        value: String,
    },
    #[error("reading catalog: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeywordCatalog {
    keyword_line: BTreeSet<String>,
    blocks: BTreeMap<String, BTreeSet<String>>,
    pub nprocs_range: (u32, u32),
    pub maxcore_default: u32,
}

fn norm(t: &str) -> String {
    t.to_ascii_uppercase()
}

impl Default for KeywordCatalog {
    fn default() -> Self {
        Self::parse(DEFAULT_TEXT).expect("bundled catalog parses")
    }
}

impl KeywordCatalog {
    pub fn parse(text: &str) -> Result<Self, CatalogError> {
        let mut cat = KeywordCatalog {
            keyword_line: BTreeSet::new(),
            blocks: BTreeMap::new(),
            nprocs_range: (1, u32::MAX),
            maxcore_default: 4000,
        };
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim().to_ascii_lowercase();
                if !matches!(name.as_str(), "keyword_line" | "nprocs" | "maxcore") {
                    cat.blocks.entry(name.clone()).or_default();
                }
                section = Some(name);
                continue;
            }
            let Some(sec) = section.as_deref() else {
                return Err(CatalogError::NoSection(line_no));
            };
            match sec {
                "keyword_line" => {
                    cat.keyword_line.insert(norm(line));
                }
                "nprocs" => {
                    let bad = || CatalogError::BadValue {
                        line: line_no,
                        what: "nprocs",
                        value: line.to_string(),
                    };
                    let (lo, hi) = line.split_once("..").ok_or_else(bad)?;
                    let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
                    let hi: u32 = hi.trim().parse().map_err(|_| bad())?;
                    if lo == 0 || lo > hi {
                        return Err(bad());
                    }
                    cat.nprocs_range = (lo, hi);
                }
                "maxcore" => {
                    cat.maxcore_default =
                        line.parse().map_err(|_| CatalogError::BadValue {
                            line: line_no,
                            what: "maxcore",
                            value: line.to_string(),
                        })?;
                }
                block => {
                    cat.blocks
                        .entry(block.to_string())
                        .or_default()
                        .insert(norm(line));
                }
            }
        }
        Ok(cat)
    }

    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn allows_keyword(&self, token: &str) -> bool {
        self.keyword_line.contains(&norm(token))
    }

    pub fn knows_block(&self, block: &str) -> bool {
        self.blocks.contains_key(&block.to_ascii_lowercase())
    }

    pub fn allows_identifier(&self, block: &str, ident: &str) -> bool {
        self.blocks
            .get(&block.to_ascii_lowercase())
            .is_some_and(|set| set.contains(&norm(ident)))
    }

    pub fn allow_keyword(&mut self, token: &str) {
        self.keyword_line.insert(norm(token));
    }

    pub fn allow_identifier(&mut self, block: &str, ident: &str) {
        self.blocks
            .entry(block.to_ascii_lowercase())
            .or_default()
            .insert(norm(ident));
    }

    /// Serializes in the file format; tokens come out upper-cased.
    pub fn dump(&self) -> String {
        let mut out = String::from("[keyword_line]\n");
        for t in &self.keyword_line {
            let _ = writeln!(out, "{t}");
        }
        for (name, set) in &self.blocks {
            let _ = writeln!(out, "\n[{name}]");
            for t in set {
                let _ = writeln!(out, "{t}");
            }
        }
        let _ = write!(
            out,
            "\n[nprocs]\n{}..{}\n\n[maxcore]\n{}\n",
            self.nprocs_range.0, self.nprocs_range.1, self.maxcore_default
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_catalog_contents() {
        let c = KeywordCatalog::default();
        assert!(c.allows_keyword("TightSCF"));
        assert!(c.allows_keyword("tightscf"));
        assert!(c.allows_keyword("wB97M-V"));
        assert!(!c.allows_keyword("VV10"));
        assert!(c.allows_identifier("scf", "AutotraH"));
        assert!(!c.allows_identifier("scf", "TightSCF"));
        assert!(!c.allows_identifier("scf", "ConvCriteria"));
        assert!(c.allows_identifier("tddft", "NRoots"));
        assert!(c.knows_block("output"));
        assert_eq!(c.nprocs_range, (4, 24));
        assert_eq!(c.maxcore_default, 4000);
    }

    #[test]
    fn dump_round_trips() {
        let c = KeywordCatalog::default();
        assert_eq!(KeywordCatalog::parse(&c.dump()).unwrap(), c);
    }

    #[test]
    fn malformed() {
        assert!(matches!(KeywordCatalog::parse("OPT\n"), Err(CatalogError::NoSection(1))));
        assert!(KeywordCatalog::parse("[nprocs]\n8..4\n").is_err());
        assert!(KeywordCatalog::parse("[maxcore]\nlots\n").is_err());
    }
}
