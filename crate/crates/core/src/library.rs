//! Cell-library profiles: classify cell pins as inputs or outputs and
//! map cell types onto functional gate families.
//!
//! A profile is structured key/value text, one rule per line:
//!
//! ```text
//! # pattern: pin=dir, ...  family=NAME
//! AND*:  A*=in, Y=out, family=AND
//! DFFX1: D=in, CLK=in, Q=out, QN=out, family=DFF
//! ```
//!
//! Cell-type and pin patterns are literals with an optional trailing
//! `*` wildcard. The most specific rule (longest literal prefix) wins;
//! two rules with the same literal prefix are ambiguous and rejected.

use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PinDir {
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Pattern {
    literal: String,
    wildcard: bool,
}

impl Pattern {
    fn parse(text: &str) -> Pattern {
        match text.strip_suffix('*') {
            Some(lit) => Pattern { literal: lit.to_string(), wildcard: true },
            None => Pattern { literal: text.to_string(), wildcard: false },
        }
    }

    fn matches(&self, name: &str) -> bool {
        if self.wildcard {
            name.starts_with(&self.literal)
        } else {
            name == self.literal
        }
    }
}

#[derive(Debug, Clone)]
pub struct Rule {
    cell_pattern: Pattern,
    /// Pin patterns in declaration order; the order doubles as the
    /// positional port order for unnamed connections.
    pins: Vec<(Pattern, PinDir)>,
    family: String,
}

impl Rule {
    /// Pin names for positional connections, available only when every
    /// pin pattern is a literal.
    pub fn positional_pins(&self) -> Option<Vec<(&str, PinDir)>> {
        self.pins
            .iter()
            .map(|(p, d)| (!p.wildcard).then_some((p.literal.as_str(), *d)))
            .collect()
    }

    pub fn family(&self) -> &str {
        &self.family
    }

    pub fn classify_pin(&self, pin: &str) -> Option<PinDir> {
        self.pins
            .iter()
            .filter(|(p, _)| p.matches(pin))
            .max_by_key(|(p, _)| p.literal.len())
            .map(|(_, d)| *d)
    }
}

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("profile line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("profile rules `{a}` and `{b}` are ambiguous (equal literal prefix)")]
    AmbiguousRules { a: String, b: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parsed library profile plus the strict-mode flag that disables the
/// pin-direction heuristic at parse time.
#[derive(Debug, Clone, Default)]
pub struct LibraryProfile {
    rules: Vec<Rule>,
    strict: bool,
}

impl LibraryProfile {
    /// A profile with no rules; everything falls back to the heuristic.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    pub fn is_strict(&self) -> bool {
        self.strict
    }

    pub fn load(path: &Path) -> Result<Self, ProfileError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self, ProfileError> {
        let mut rules: Vec<Rule> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (head, body) = trimmed.split_once(':').ok_or_else(|| ProfileError::Malformed {
                line,
                reason: "expected `PATTERN: pin=dir,... family=NAME`".into(),
            })?;
            let cell_pattern = Pattern::parse(head.trim());
            if cell_pattern.literal.is_empty() && !cell_pattern.wildcard {
                return Err(ProfileError::Malformed { line, reason: "empty cell pattern".into() });
            }
            let mut pins = Vec::new();
            let mut family = None;
            for item in body.split([',', ' ', '\t']).map(str::trim).filter(|s| !s.is_empty()) {
                let (key, value) = item.split_once('=').ok_or_else(|| ProfileError::Malformed {
                    line,
                    reason: format!("expected key=value, got `{item}`"),
                })?;
                let (key, value) = (key.trim(), value.trim());
                if key == "family" {
                    family = Some(value.to_uppercase());
                    continue;
                }
                let dir = match value.to_ascii_lowercase().as_str() {
                    "in" | "input" => PinDir::Input,
                    "out" | "output" => PinDir::Output,
                    other => {
                        return Err(ProfileError::Malformed {
                            line,
                            reason: format!("unknown pin direction `{other}`"),
                        })
                    }
                };
                pins.push((Pattern::parse(key), dir));
            }
            let rule = Rule {
                cell_pattern,
                pins,
                family: family.ok_or_else(|| ProfileError::Malformed {
                    line,
                    reason: "missing family=NAME".into(),
                })?,
            };
            check_rule_unambiguous(&rule, line)?;
            for existing in &rules {
                if existing.cell_pattern.literal == rule.cell_pattern.literal {
                    return Err(ProfileError::AmbiguousRules {
                        a: render_pattern(&existing.cell_pattern),
                        b: render_pattern(&rule.cell_pattern),
                    });
                }
            }
            rules.push(rule);
        }
        Ok(LibraryProfile { rules, strict: false })
    }

    /// The most specific rule matching `cell_type`, if any. Ambiguity is
    /// impossible after load-time validation.
    pub fn match_rule(&self, cell_type: &str) -> Option<&Rule> {
        self.rules
            .iter()
            .filter(|r| r.cell_pattern.matches(cell_type))
            .max_by_key(|r| r.cell_pattern.literal.len())
    }
}

fn render_pattern(p: &Pattern) -> String {
    if p.wildcard {
        format!("{}*", p.literal)
    } else {
        p.literal.clone()
    }
}

fn check_rule_unambiguous(rule: &Rule, line: usize) -> Result<(), ProfileError> {
    for (i, (a, _)) in rule.pins.iter().enumerate() {
        for (b, _) in &rule.pins[i + 1..] {
            if a.literal == b.literal {
                return Err(ProfileError::Malformed {
                    line,
                    reason: format!("ambiguous pin patterns share prefix `{}`", a.literal),
                });
            }
        }
    }
    Ok(())
}

/// Name-based fallback when no profile rule classifies a pin: output-ish
/// names (Y/Z/Q/QN, optionally digit-suffixed) are outputs, all others
/// inputs.
pub fn heuristic_pin_dir(pin: &str) -> PinDir {
    let upper = pin.to_ascii_uppercase();
    let stem = upper.trim_end_matches(|c: char| c.is_ascii_digit());
    match stem {
        "Y" | "Z" | "Q" | "QN" => PinDir::Output,
        _ => PinDir::Input,
    }
}

/// Name-based fallback family for cell types no rule covers.
pub fn heuristic_family(cell_type: &str) -> &'static str {
    const PREFIXES: &[(&str, &str)] = &[
        ("LATCH", "LATCH"),
        ("XNOR", "XNOR"),
        ("NAND", "NAND"),
        ("SDFF", "DFF"),
        ("XOR", "XOR"),
        ("NOR", "NOR"),
        ("AND", "AND"),
        ("AOI", "AOI"),
        ("OAI", "OAI"),
        ("INV", "INV"),
        ("NOT", "INV"),
        ("BUF", "BUF"),
        ("MUX", "MUX"),
        ("DFF", "DFF"),
        ("MX", "MUX"),
        ("OR", "OR"),
    ];
    let upper = cell_type.to_ascii_uppercase();
    PREFIXES
        .iter()
        .find(|(prefix, _)| upper.starts_with(prefix))
        .map(|(_, family)| *family)
        .unwrap_or("OTHER")
}
