//! Parser for flattened structural gate-level netlists in Verilog
//! syntax.
//!
//! Supported grammar: one `module` per file with a non-ANSI header,
//! `input`/`output`/`inout`/`wire` declarations (with bit ranges),
//! cell instantiations with named or positional connections, and
//! `endmodule`. Behavioral constructs are rejected. Multi-bit
//! declarations are flattened bit-wise into scalar nets (`n[3]`), and
//! escaped identifiers are normalized to their unescaped spelling.

use std::collections::{HashMap, HashSet};

use log::warn;
use thiserror::Error;

use crate::library::{heuristic_family, heuristic_pin_dir, LibraryProfile, PinDir, ProfileError};
use crate::netlist::{Cell, NetId, Netlist};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: syntax error at `{token}`: {message}")]
    Syntax { line: usize, token: String, message: String },
    #[error("line {line}: reference to undeclared net `{net}`")]
    UnknownNet { line: usize, net: String },
    #[error("cannot classify pin `{pin}` of cell type `{cell_type}` as input or output")]
    UnknownPinDirection { cell_type: String, pin: String },
    #[error("line {line}: unsupported construct: {construct}")]
    UnsupportedConstruct { line: usize, construct: String },
    #[error("line {line}: duplicate cell instance `{instance}`")]
    DuplicateInstance { line: usize, instance: String },
    #[error("line {line}: multiple top modules in one file")]
    MultipleModules { line: usize },
    #[error("no module declaration found")]
    MissingModule,
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Number(u32),
    /// Sized or unsized based literal, e.g. `1'b0`.
    Constant { bits: String, raw: String },
    Keyword(Keyword),
    LParen,
    RParen,
    LBrack,
    RBrack,
    LBrace,
    Colon,
    Semi,
    Comma,
    Dot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Keyword {
    Module,
    Endmodule,
    Input,
    Output,
    Inout,
    Wire,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
}

const BEHAVIORAL: &[&str] = &[
    "assign", "always", "initial", "reg", "specify", "function", "task", "generate", "primitive",
    "if", "case", "for", "defparam",
];

fn lex(source: &str) -> Result<Vec<Token>, ParseError> {
    let mut tokens = Vec::new();
    let mut chars = source.chars().peekable();
    let mut line = 1usize;
    while let Some(&c) = chars.peek() {
        match c {
            '\n' => {
                line += 1;
                chars.next();
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            '/' => {
                chars.next();
                match chars.peek() {
                    Some('/') => {
                        for c in chars.by_ref() {
                            if c == '\n' {
                                line += 1;
                                break;
                            }
                        }
                    }
                    Some('*') => {
                        chars.next();
                        let mut prev = ' ';
                        let mut closed = false;
                        for c in chars.by_ref() {
                            if c == '\n' {
                                line += 1;
                            }
                            if prev == '*' && c == '/' {
                                closed = true;
                                break;
                            }
                            prev = c;
                        }
                        if !closed {
                            return Err(ParseError::Syntax {
                                line,
                                token: "/*".into(),
                                message: "unterminated block comment".into(),
                            });
                        }
                    }
                    _ => {
                        return Err(ParseError::Syntax {
                            line,
                            token: "/".into(),
                            message: "stray slash".into(),
                        })
                    }
                }
            }
            '`' => {
                // compiler directive: skip to end of line
                for c in chars.by_ref() {
                    if c == '\n' {
                        line += 1;
                        break;
                    }
                }
            }
            '\\' => {
                chars.next();
                let mut name = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() {
                        break;
                    }
                    name.push(c);
                    chars.next();
                }
                if name.is_empty() {
                    return Err(ParseError::Syntax {
                        line,
                        token: "\\".into(),
                        message: "empty escaped identifier".into(),
                    });
                }
                tokens.push(Token { tok: Tok::Ident(name), line });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut word = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' || c == '$' {
                        word.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                let tok = match word.as_str() {
                    "module" => Tok::Keyword(Keyword::Module),
                    "endmodule" => Tok::Keyword(Keyword::Endmodule),
                    "input" => Tok::Keyword(Keyword::Input),
                    "output" => Tok::Keyword(Keyword::Output),
                    "inout" => Tok::Keyword(Keyword::Inout),
                    "wire" => Tok::Keyword(Keyword::Wire),
                    w if BEHAVIORAL.contains(&w) => {
                        return Err(ParseError::UnsupportedConstruct {
                            line,
                            construct: format!("behavioral keyword `{w}`"),
                        })
                    }
                    _ => Tok::Ident(word),
                };
                tokens.push(Token { tok, line });
            }
            c if c.is_ascii_digit() || c == '\'' => {
                let mut digits = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_digit() || c == '_' {
                        digits.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                if chars.peek() == Some(&'\'') {
                    chars.next();
                    let base = chars.next().ok_or_else(|| ParseError::Syntax {
                        line,
                        token: "'".into(),
                        message: "truncated based literal".into(),
                    })?;
                    let mut value = String::new();
                    while let Some(&c) = chars.peek() {
                        if c.is_ascii_alphanumeric() || c == '_' {
                            value.push(c);
                            chars.next();
                        } else {
                            break;
                        }
                    }
                    let raw = format!("{digits}'{base}{value}");
                    let bits = expand_constant(&digits, base, &value, line, &raw)?;
                    tokens.push(Token { tok: Tok::Constant { bits, raw }, line });
                } else {
                    let value: u32 =
                        digits.replace('_', "").parse().map_err(|_| ParseError::Syntax {
                            line,
                            token: digits.clone(),
                            message: "bad number".into(),
                        })?;
                    tokens.push(Token { tok: Tok::Number(value), line });
                }
            }
            '(' => {
                chars.next();
                // skip attribute instances `(* ... *)`
                if chars.peek() == Some(&'*') {
                    chars.next();
                    let mut prev = ' ';
                    for c in chars.by_ref() {
                        if c == '\n' {
                            line += 1;
                        }
                        if prev == '*' && c == ')' {
                            break;
                        }
                        prev = c;
                    }
                } else {
                    tokens.push(Token { tok: Tok::LParen, line });
                }
            }
            ')' => {
                chars.next();
                tokens.push(Token { tok: Tok::RParen, line });
            }
            '[' => {
                chars.next();
                tokens.push(Token { tok: Tok::LBrack, line });
            }
            ']' => {
                chars.next();
                tokens.push(Token { tok: Tok::RBrack, line });
            }
            '{' => {
                chars.next();
                tokens.push(Token { tok: Tok::LBrace, line });
            }
            ':' => {
                chars.next();
                tokens.push(Token { tok: Tok::Colon, line });
            }
            ';' => {
                chars.next();
                tokens.push(Token { tok: Tok::Semi, line });
            }
            ',' => {
                chars.next();
                tokens.push(Token { tok: Tok::Comma, line });
            }
            '.' => {
                chars.next();
                tokens.push(Token { tok: Tok::Dot, line });
            }
            other => {
                return Err(ParseError::Syntax {
                    line,
                    token: other.to_string(),
                    message: "unexpected character".into(),
                })
            }
        }
    }
    Ok(tokens)
}

/// Normalizes a based literal into a bit string (MSB first). Only
/// fully-defined binary/hex/octal/decimal values are accepted.
fn expand_constant(
    width: &str,
    base: char,
    value: &str,
    line: usize,
    raw: &str,
) -> Result<String, ParseError> {
    let value = value.replace('_', "");
    let err = |message: &str| ParseError::Syntax {
        line,
        token: raw.to_string(),
        message: message.into(),
    };
    if value.chars().any(|c| matches!(c, 'x' | 'X' | 'z' | 'Z' | '?')) {
        return Err(ParseError::UnsupportedConstruct {
            line,
            construct: format!("constant `{raw}` with x/z bits"),
        });
    }
    let numeric = match base.to_ascii_lowercase() {
        'b' => u64::from_str_radix(&value, 2).map_err(|_| err("bad binary literal"))?,
        'o' => u64::from_str_radix(&value, 8).map_err(|_| err("bad octal literal"))?,
        'd' => value.parse::<u64>().map_err(|_| err("bad decimal literal"))?,
        'h' => u64::from_str_radix(&value, 16).map_err(|_| err("bad hex literal"))?,
        _ => return Err(err("unknown literal base")),
    };
    let width: u32 = if width.is_empty() {
        let significant = 64 - numeric.leading_zeros();
        significant.max(1)
    } else {
        width.replace('_', "").parse().map_err(|_| err("bad literal width"))?
    };
    if width == 0 || width > 64 {
        return Err(err("unsupported literal width"));
    }
    Ok((0..width).rev().map(|i| if numeric >> i & 1 == 1 { '1' } else { '0' }).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PortDir {
    Input,
    Output,
    Inout,
}

#[derive(Debug)]
struct Declaration {
    /// `None` for scalars, `Some((msb, lsb))` for vectors.
    range: Option<(u32, u32)>,
    dir: Option<PortDir>,
    line: usize,
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    profile: &'a LibraryProfile,
    nets: Vec<String>,
    net_index: HashMap<String, NetId>,
    decls: HashMap<String, Declaration>,
    header_ports: Vec<String>,
    cells: Vec<Cell>,
    cell_lines: HashMap<String, usize>,
    warned_types: HashSet<String>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn last_line(&self) -> usize {
        self.tokens.last().map(|t| t.line).unwrap_or(1)
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<usize, ParseError> {
        match self.next() {
            Some(t) if t.tok == want => Ok(t.line),
            Some(t) => Err(ParseError::Syntax {
                line: t.line,
                token: render(&t.tok),
                message: format!("expected {what}"),
            }),
            None => Err(ParseError::Syntax {
                line: self.last_line(),
                token: "<eof>".into(),
                message: format!("expected {what}"),
            }),
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<(String, usize), ParseError> {
        match self.next() {
            Some(Token { tok: Tok::Ident(name), line }) => Ok((name, line)),
            Some(t) => Err(ParseError::Syntax {
                line: t.line,
                token: render(&t.tok),
                message: format!("expected {what}"),
            }),
            None => Err(ParseError::Syntax {
                line: self.last_line(),
                token: "<eof>".into(),
                message: format!("expected {what}"),
            }),
        }
    }

    fn intern_net(&mut self, name: &str) -> NetId {
        if let Some(&id) = self.net_index.get(name) {
            return id;
        }
        let id = self.nets.len();
        self.nets.push(name.to_string());
        self.net_index.insert(name.to_string(), id);
        id
    }

    fn parse_module(&mut self) -> Result<String, ParseError> {
        match self.next() {
            Some(Token { tok: Tok::Keyword(Keyword::Module), .. }) => {}
            Some(t) => {
                return Err(ParseError::Syntax {
                    line: t.line,
                    token: render(&t.tok),
                    message: "expected `module`".into(),
                })
            }
            None => return Err(ParseError::MissingModule),
        }
        let (name, _) = self.expect_ident("module name")?;
        self.expect(Tok::LParen, "`(` after module name")?;
        if self.peek().map(|t| t.tok == Tok::RParen) != Some(true) {
            loop {
                let (port, _) = self.expect_ident("port name")?;
                self.header_ports.push(port);
                match self.next() {
                    Some(Token { tok: Tok::Comma, .. }) => continue,
                    Some(Token { tok: Tok::RParen, .. }) => {
                        self.pos -= 1;
                        break;
                    }
                    Some(t) => {
                        return Err(ParseError::Syntax {
                            line: t.line,
                            token: render(&t.tok),
                            message: "expected `,` or `)` in port list".into(),
                        })
                    }
                    None => {
                        return Err(ParseError::Syntax {
                            line: self.last_line(),
                            token: "<eof>".into(),
                            message: "unterminated port list".into(),
                        })
                    }
                }
            }
        }
        self.expect(Tok::RParen, "`)` closing the port list")?;
        self.expect(Tok::Semi, "`;` after module header")?;
        Ok(name)
    }

    fn parse_range(&mut self) -> Result<Option<(u32, u32)>, ParseError> {
        if self.peek().map(|t| t.tok == Tok::LBrack) != Some(true) {
            return Ok(None);
        }
        self.next();
        let msb = self.expect_number("range msb")?;
        self.expect(Tok::Colon, "`:` in range")?;
        let lsb = self.expect_number("range lsb")?;
        self.expect(Tok::RBrack, "`]` closing range")?;
        Ok(Some((msb, lsb)))
    }

    fn expect_number(&mut self, what: &str) -> Result<u32, ParseError> {
        match self.next() {
            Some(Token { tok: Tok::Number(v), .. }) => Ok(v),
            Some(t) => Err(ParseError::Syntax {
                line: t.line,
                token: render(&t.tok),
                message: format!("expected {what}"),
            }),
            None => Err(ParseError::Syntax {
                line: self.last_line(),
                token: "<eof>".into(),
                message: format!("expected {what}"),
            }),
        }
    }

    fn declare(&mut self, name: String, range: Option<(u32, u32)>, dir: Option<PortDir>, line: usize) -> Result<(), ParseError> {
        match self.decls.get_mut(&name) {
            Some(existing) => {
                if existing.range.is_some() && range.is_some() && existing.range != range {
                    return Err(ParseError::Syntax {
                        line,
                        token: name,
                        message: "conflicting range re-declaration".into(),
                    });
                }
                if existing.range.is_none() {
                    existing.range = range;
                }
                match (existing.dir, dir) {
                    (Some(a), Some(b)) if a != b => {
                        return Err(ParseError::Syntax {
                            line,
                            token: name,
                            message: "conflicting port directions".into(),
                        })
                    }
                    (None, Some(d)) => existing.dir = Some(d),
                    _ => {}
                }
            }
            None => {
                self.decls.insert(name.clone(), Declaration { range, dir, line });
            }
        }
        // materialize scalar nets now so ids follow declaration order
        let decl = &self.decls[&name];
        match decl.range {
            None => {
                self.intern_net(&name);
            }
            Some((msb, lsb)) => {
                let (lo, hi) = (msb.min(lsb), msb.max(lsb));
                for bit in lo..=hi {
                    self.intern_net(&format!("{name}[{bit}]"));
                }
            }
        }
        Ok(())
    }

    fn parse_declaration(&mut self, kw: Keyword, line: usize) -> Result<(), ParseError> {
        let dir = match kw {
            Keyword::Input => Some(PortDir::Input),
            Keyword::Output => Some(PortDir::Output),
            Keyword::Inout => Some(PortDir::Inout),
            Keyword::Wire => None,
            _ => unreachable!(),
        };
        let range = self.parse_range()?;
        loop {
            let (name, name_line) = self.expect_ident("declared identifier")?;
            if dir.is_some() && !self.header_ports.contains(&name) {
                return Err(ParseError::Syntax {
                    line: name_line,
                    token: name,
                    message: "directed declaration for a name missing from the module header".into(),
                });
            }
            self.declare(name, range, dir, line)?;
            match self.next() {
                Some(Token { tok: Tok::Comma, .. }) => continue,
                Some(Token { tok: Tok::Semi, .. }) => break,
                Some(t) => {
                    return Err(ParseError::Syntax {
                        line: t.line,
                        token: render(&t.tok),
                        message: "expected `,` or `;` in declaration".into(),
                    })
                }
                None => {
                    return Err(ParseError::Syntax {
                        line: self.last_line(),
                        token: "<eof>".into(),
                        message: "unterminated declaration".into(),
                    })
                }
            }
        }
        Ok(())
    }

    /// One scalar net reference inside a port connection.
    fn parse_net_ref(&mut self) -> Result<Option<NetId>, ParseError> {
        let t = match self.next() {
            Some(t) => t,
            None => {
                return Err(ParseError::Syntax {
                    line: self.last_line(),
                    token: "<eof>".into(),
                    message: "unterminated connection".into(),
                })
            }
        };
        match t.tok {
            Tok::RParen => {
                self.pos -= 1;
                Ok(None) // unconnected `.A()`
            }
            Tok::Ident(base) => {
                let select = if self.peek().map(|x| x.tok == Tok::LBrack) == Some(true) {
                    self.next();
                    let idx = self.expect_number("bit index")?;
                    self.expect(Tok::RBrack, "`]` after bit index")?;
                    Some(idx)
                } else {
                    None
                };
                let decl = self.decls.get(&base);
                let resolved = match (decl, select) {
                    (Some(d), None) => match d.range {
                        None => base.clone(),
                        Some(_) => {
                            return Err(ParseError::UnsupportedConstruct {
                                line: t.line,
                                construct: format!("whole-bus connection to vector net `{base}`"),
                            })
                        }
                    },
                    (Some(d), Some(idx)) => match d.range {
                        Some((msb, lsb)) if idx >= msb.min(lsb) && idx <= msb.max(lsb) => {
                            format!("{base}[{idx}]")
                        }
                        _ => {
                            return Err(ParseError::UnknownNet {
                                line: t.line,
                                net: format!("{base}[{idx}]"),
                            })
                        }
                    },
                    (None, _) => {
                        // escaped identifiers may carry their own brackets
                        let spelled = match select {
                            Some(idx) => format!("{base}[{idx}]"),
                            None => base.clone(),
                        };
                        if self.net_index.contains_key(&spelled) {
                            spelled
                        } else {
                            return Err(ParseError::UnknownNet { line: t.line, net: spelled });
                        }
                    }
                };
                Ok(Some(self.net_index[&resolved]))
            }
            Tok::Constant { bits, raw } => {
                if bits.len() != 1 {
                    return Err(ParseError::UnsupportedConstruct {
                        line: t.line,
                        construct: format!("multi-bit constant `{raw}` in scalar connection"),
                    });
                }
                let name = if bits == "1" { "1'b1" } else { "1'b0" };
                Ok(Some(self.intern_net(name)))
            }
            Tok::LBrace => Err(ParseError::UnsupportedConstruct {
                line: t.line,
                construct: "concatenation in port connection".into(),
            }),
            other => Err(ParseError::Syntax {
                line: t.line,
                token: render(&other),
                message: "expected net reference".into(),
            }),
        }
    }

    fn pin_direction(
        &mut self,
        cell_type: &str,
        pin: &str,
        rule: Option<&crate::library::Rule>,
    ) -> Result<PinDir, ParseError> {
        if let Some(dir) = rule.and_then(|r| r.classify_pin(pin)) {
            return Ok(dir);
        }
        if self.profile.is_strict() {
            return Err(ParseError::UnknownPinDirection {
                cell_type: cell_type.to_string(),
                pin: pin.to_string(),
            });
        }
        if self.warned_types.insert(format!("{cell_type}.{pin}")) {
            warn!("no profile rule classifies {cell_type}.{pin}; using name heuristic");
        }
        Ok(heuristic_pin_dir(pin))
    }

    fn parse_instance(&mut self, cell_type: String, line: usize) -> Result<(), ParseError> {
        let (instance, inst_line) = self.expect_ident("instance name")?;
        if let Some(prev) = self.cell_lines.insert(instance.clone(), inst_line) {
            let _ = prev;
            return Err(ParseError::DuplicateInstance { line: inst_line, instance });
        }
        self.expect(Tok::LParen, "`(` opening connection list")?;
        let rule = self.profile.match_rule(&cell_type);
        let family = rule
            .map(|r| r.family().to_string())
            .unwrap_or_else(|| {
                if self.warned_types.insert(cell_type.clone()) {
                    warn!("cell type {cell_type} not in library profile; inferring family by name");
                }
                heuristic_family(&cell_type).to_string()
            });

        let mut connections: Vec<(String, Option<NetId>)> = Vec::new();
        let named = matches!(self.peek().map(|t| &t.tok), Some(Tok::Dot) | Some(Tok::RParen));
        if named {
            while self.peek().map(|t| t.tok == Tok::Dot) == Some(true) {
                self.next();
                let (pin, pin_line) = self.expect_ident("pin name")?;
                self.expect(Tok::LParen, "`(` after pin name")?;
                let net = self.parse_net_ref()?;
                self.expect(Tok::RParen, "`)` closing pin connection")?;
                if connections.iter().any(|(p, _)| p == &pin) {
                    return Err(ParseError::Syntax {
                        line: pin_line,
                        token: pin,
                        message: "duplicate pin connection".into(),
                    });
                }
                connections.push((pin, net));
                if self.peek().map(|t| t.tok == Tok::Comma) == Some(true) {
                    self.next();
                }
            }
        } else {
            let pins = rule.and_then(|r| r.positional_pins()).ok_or_else(|| {
                ParseError::UnknownPinDirection {
                    cell_type: cell_type.clone(),
                    pin: "<positional>".into(),
                }
            })?;
            let mut idx = 0usize;
            if self.peek().map(|t| t.tok == Tok::RParen) != Some(true) {
                loop {
                    let net = self.parse_net_ref()?;
                    let (pin, _) = *pins.get(idx).ok_or_else(|| ParseError::Syntax {
                        line,
                        token: instance.clone(),
                        message: format!(
                            "more positional connections than profile pins for `{cell_type}`"
                        ),
                    })?;
                    connections.push((pin.to_string(), net));
                    idx += 1;
                    match self.next() {
                        Some(Token { tok: Tok::Comma, .. }) => continue,
                        Some(Token { tok: Tok::RParen, .. }) => {
                            self.pos -= 1;
                            break;
                        }
                        Some(t) => {
                            return Err(ParseError::Syntax {
                                line: t.line,
                                token: render(&t.tok),
                                message: "expected `,` or `)` in connection list".into(),
                            })
                        }
                        None => {
                            return Err(ParseError::Syntax {
                                line: self.last_line(),
                                token: "<eof>".into(),
                                message: "unterminated connection list".into(),
                            })
                        }
                    }
                }
            }
        }
        self.expect(Tok::RParen, "`)` closing connection list")?;
        self.expect(Tok::Semi, "`;` after instantiation")?;

        let mut input_pins = Vec::new();
        let mut output_pins = Vec::new();
        for (pin, net) in connections {
            let Some(net) = net else { continue };
            match self.pin_direction(&cell_type, &pin, rule)? {
                PinDir::Input => input_pins.push((pin, net)),
                PinDir::Output => output_pins.push((pin, net)),
            }
        }
        self.cells.push(Cell {
            instance_name: instance,
            cell_type,
            family,
            input_pins,
            output_pins,
        });
        Ok(())
    }

    fn finish(mut self, name: String) -> Result<Netlist, ParseError> {
        let mut primary_inputs = Vec::new();
        let mut primary_outputs = Vec::new();
        for port in &self.header_ports {
            let decl = self.decls.get(port).ok_or_else(|| ParseError::Syntax {
                line: 1,
                token: port.clone(),
                message: "header port never given a direction".into(),
            })?;
            let dir = decl.dir.ok_or_else(|| ParseError::Syntax {
                line: decl.line,
                token: port.clone(),
                message: "header port declared without direction".into(),
            })?;
            let ids: Vec<NetId> = match decl.range {
                None => vec![self.net_index[port.as_str()]],
                Some((msb, lsb)) => {
                    let (lo, hi) = (msb.min(lsb), msb.max(lsb));
                    (lo..=hi).map(|bit| self.net_index[&format!("{port}[{bit}]")]).collect()
                }
            };
            match dir {
                PortDir::Input => primary_inputs.extend(ids),
                PortDir::Output => primary_outputs.extend(ids),
                PortDir::Inout => {
                    primary_inputs.extend(ids.iter().copied());
                    primary_outputs.extend(ids);
                }
            }
        }
        let netlist = Netlist {
            name,
            nets: std::mem::take(&mut self.nets),
            cells: std::mem::take(&mut self.cells),
            primary_inputs,
            primary_outputs,
        };
        netlist.validate().map_err(|e| ParseError::Syntax {
            line: 1,
            token: "<netlist>".into(),
            message: e.to_string(),
        })?;
        Ok(netlist)
    }
}

fn render(tok: &Tok) -> String {
    match tok {
        Tok::Ident(s) => s.clone(),
        Tok::Number(n) => n.to_string(),
        Tok::Constant { raw, .. } => raw.clone(),
        Tok::Keyword(Keyword::Module) => "module".into(),
        Tok::Keyword(Keyword::Endmodule) => "endmodule".into(),
        Tok::Keyword(Keyword::Input) => "input".into(),
        Tok::Keyword(Keyword::Output) => "output".into(),
        Tok::Keyword(Keyword::Inout) => "inout".into(),
        Tok::Keyword(Keyword::Wire) => "wire".into(),
        Tok::LParen => "(".into(),
        Tok::RParen => ")".into(),
        Tok::LBrack => "[".into(),
        Tok::RBrack => "]".into(),
        Tok::LBrace => "{".into(),
        Tok::Colon => ":".into(),
        Tok::Semi => ";".into(),
        Tok::Comma => ",".into(),
        Tok::Dot => ".".into(),
    }
}

/// Parses one flattened structural module into a [`Netlist`].
pub fn parse_netlist(source: &str, profile: &LibraryProfile) -> Result<Netlist, ParseError> {
    let tokens = lex(source)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        profile,
        nets: Vec::new(),
        net_index: HashMap::new(),
        decls: HashMap::new(),
        header_ports: Vec::new(),
        cells: Vec::new(),
        cell_lines: HashMap::new(),
        warned_types: HashSet::new(),
    };
    let name = parser.parse_module()?;
    loop {
        match parser.next() {
            Some(Token { tok: Tok::Keyword(Keyword::Endmodule), .. }) => break,
            Some(Token { tok: Tok::Keyword(kw @ (Keyword::Input | Keyword::Output | Keyword::Inout | Keyword::Wire)), line }) => {
                parser.parse_declaration(kw, line)?;
            }
            Some(Token { tok: Tok::Ident(cell_type), line }) => {
                parser.parse_instance(cell_type, line)?;
            }
            Some(t) => {
                return Err(ParseError::Syntax {
                    line: t.line,
                    token: render(&t.tok),
                    message: "expected declaration, instantiation or `endmodule`".into(),
                })
            }
            None => {
                return Err(ParseError::Syntax {
                    line: parser.last_line(),
                    token: "<eof>".into(),
                    message: "missing `endmodule`".into(),
                })
            }
        }
    }
    if let Some(t) = parser.peek() {
        if t.tok == Tok::Keyword(Keyword::Module) {
            return Err(ParseError::MultipleModules { line: t.line });
        }
        return Err(ParseError::Syntax {
            line: t.line,
            token: render(&t.tok),
            message: "trailing tokens after endmodule".into(),
        });
    }
    parser.finish(name)
}
