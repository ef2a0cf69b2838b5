//! Scenario files: a line-oriented text format describing modules, operators
//! and the checks to run on them.
//!
//! The format is deliberately plain so files can be written by hand and
//! diffed. A scenario names a backend (`finite` for free modules over a block
//! matrix algebra, `function` for submodules of `C[0,1]^n`), declares carriers
//! and operators, and lists checks with expectations. `Scenario::parse` and
//! `Scenario::emit` are inverse up to canonical formatting: parsing the
//! emitted text yields an equal `Scenario`.
//!
//! ```text
//! scenario shift
//! backend finite
//! algebra 1
//! module E rank 2
//! operator a from E to E
//!   row 0 ; 0
//!   row 1 ; 0
//! end
//! check polar a
//!   expect verdict is decomposed
//!   expect factorization below 1e-8
//! end
//! ```
//!
//! Finite operator entries are algebra elements: blocks separated by `|`,
//! each block its matrix in row-major order, complex numbers like `1`,
//! `2+3i`, `-1.5-2i`. Function entries are `poly c0 c1 ...` or
//! `sqrt c0 c1 ...` (the pointwise square root of a nonnegative polynomial).

use num_complex::Complex64;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("line {line}: unknown directive `{word}`")]
    UnknownDirective { line: usize, word: String },
    #[error("line {line}: {what}")]
    Malformed { line: usize, what: String },
    #[error("line {line}: `{name}` was already declared")]
    DuplicateName { line: usize, name: String },
    #[error("line {line}: `{name}` has not been declared")]
    UnknownName { line: usize, name: String },
    #[error("scenario is missing its `{what}` line")]
    MissingField { what: String },
    #[error("line {line}: `{got}` entries, expected {expected}")]
    EntryCount { line: usize, expected: usize, got: usize },
}

fn malformed(line: usize, what: impl Into<String>) -> ParseError {
    ParseError::Malformed { line, what: what.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Finite,
    Function,
}

impl Backend {
    fn word(self) -> &'static str {
        match self {
            Backend::Finite => "finite",
            Backend::Function => "function",
        }
    }
}

/// One matrix entry in a scenario file.
#[derive(Debug, Clone, PartialEq)]
pub enum EntryData {
    /// An algebra element: one row-major coefficient list per block.
    Finite(Vec<Vec<Complex64>>),
    /// A real polynomial in `t`, lowest degree first.
    Poly(Vec<f64>),
    /// The pointwise square root of a nonnegative polynomial.
    Sqrt(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModuleDecl {
    pub name: String,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubmoduleDecl {
    pub name: String,
    pub parent: String,
    /// Each generator is one ambient vector, one entry per ambient coordinate.
    pub generators: Vec<Vec<EntryData>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorBody {
    /// A matrix of entries, one row per codomain coordinate.
    Rows(Vec<Vec<EntryData>>),
    /// The inclusion of the named submodule into its parent.
    Inclusion(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorDecl {
    pub name: String,
    /// Domain carrier name; `None` for inclusions (implied by the submodule).
    pub domain: Option<String>,
    pub codomain: Option<String>,
    pub body: OperatorBody,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    Modularity,
    Polar,
    Invariants,
    Predicates,
    Observation,
    Adjoint,
    Kernel,
    Range,
}

impl CheckKind {
    fn from_word(word: &str) -> Option<Self> {
        Some(match word {
            "modularity" => CheckKind::Modularity,
            "polar" => CheckKind::Polar,
            "invariants" => CheckKind::Invariants,
            "predicates" => CheckKind::Predicates,
            "observation" => CheckKind::Observation,
            "adjoint" => CheckKind::Adjoint,
            "kernel" => CheckKind::Kernel,
            "range" => CheckKind::Range,
            _ => return None,
        })
    }

    pub fn word(self) -> &'static str {
        match self {
            CheckKind::Modularity => "modularity",
            CheckKind::Polar => "polar",
            CheckKind::Invariants => "invariants",
            CheckKind::Predicates => "predicates",
            CheckKind::Observation => "observation",
            CheckKind::Adjoint => "adjoint",
            CheckKind::Kernel => "kernel",
            CheckKind::Range => "range",
        }
    }
}

/// How an expected value is compared against a computed one.
#[derive(Debug, Clone, PartialEq)]
pub enum ExpectOp {
    /// Exact match of a reported word (verdicts, booleans).
    Is(String),
    /// The computed number must be `<=` the bound.
    Below(f64),
    /// The computed number must be within `1e-8` of the target.
    Near(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expectation {
    pub key: String,
    pub op: ExpectOp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckDecl {
    pub kind: CheckKind,
    pub target: String,
    pub expectations: Vec<Expectation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub backend: Backend,
    pub tolerance: Option<f64>,
    pub grid: Option<usize>,
    /// Block sizes of the coefficient algebra; finite backend only.
    pub algebra: Option<Vec<usize>>,
    pub modules: Vec<ModuleDecl>,
    pub submodules: Vec<SubmoduleDecl>,
    pub operators: Vec<OperatorDecl>,
    pub checks: Vec<CheckDecl>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, ParseError> {
        Parser::new(text).run()
    }

    /// Canonical text form; `Scenario::parse` of the result equals `self`.
    pub fn emit(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario {}", self.name);
        let _ = writeln!(out, "backend {}", self.backend.word());
        if let Some(tolerance) = self.tolerance {
            let _ = writeln!(out, "tolerance {}", tolerance);
        }
        if let Some(grid) = self.grid {
            let _ = writeln!(out, "grid {}", grid);
        }
        if let Some(spec) = &self.algebra {
            let words: Vec<String> = spec.iter().map(|d| d.to_string()).collect();
            let _ = writeln!(out, "algebra {}", words.join(" "));
        }
        for module in &self.modules {
            let _ = writeln!(out, "module {} rank {}", module.name, module.rank);
        }
        for sub in &self.submodules {
            let _ = writeln!(out, "submodule {} in {}", sub.name, sub.parent);
            for generator in &sub.generators {
                let _ = writeln!(out, "  gen {}", emit_entries(generator));
            }
            let _ = writeln!(out, "end");
        }
        for op in &self.operators {
            match &op.body {
                OperatorBody::Inclusion(sub) => {
                    let _ = writeln!(out, "operator {} inclusion {}", op.name, sub);
                }
                OperatorBody::Rows(rows) => {
                    let _ = writeln!(
                        out,
                        "operator {} from {} to {}",
                        op.name,
                        op.domain.as_deref().unwrap_or("?"),
                        op.codomain.as_deref().unwrap_or("?"),
                    );
                    for row in rows {
                        let _ = writeln!(out, "  row {}", emit_entries(row));
                    }
                    let _ = writeln!(out, "end");
                }
            }
        }
        for check in &self.checks {
            let _ = writeln!(out, "check {} {}", check.kind.word(), check.target);
            for exp in &check.expectations {
                let line = match &exp.op {
                    ExpectOp::Is(word) => format!("expect {} is {}", exp.key, word),
                    ExpectOp::Below(x) => format!("expect {} below {}", exp.key, x),
                    ExpectOp::Near(x) => format!("expect {} near {}", exp.key, x),
                };
                let _ = writeln!(out, "  {}", line);
            }
            let _ = writeln!(out, "end");
        }
        out
    }

    /// Rank of a declared module or submodule's parent; used by the parser to
    /// validate entry counts and by the runner to build carriers.
    pub fn module_rank(&self, name: &str) -> Option<usize> {
        if let Some(m) = self.modules.iter().find(|m| m.name == name) {
            return Some(m.rank);
        }
        let sub = self.submodules.iter().find(|s| s.name == name)?;
        self.modules.iter().find(|m| m.name == sub.parent).map(|m| m.rank)
    }

    pub fn operator(&self, name: &str) -> Option<&OperatorDecl> {
        self.operators.iter().find(|o| o.name == name)
    }

    pub fn submodule(&self, name: &str) -> Option<&SubmoduleDecl> {
        self.submodules.iter().find(|s| s.name == name)
    }
}

fn emit_complex(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else if z.im < 0.0 {
        format!("{}{}i", z.re, z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

fn emit_entry(entry: &EntryData) -> String {
    match entry {
        EntryData::Finite(blocks) => blocks
            .iter()
            .map(|block| {
                block.iter().map(|z| emit_complex(*z)).collect::<Vec<_>>().join(" ")
            })
            .collect::<Vec<_>>()
            .join(" | "),
        EntryData::Poly(coeffs) => {
            let mut s = String::from("poly");
            for c in coeffs {
                let _ = write!(s, " {}", c);
            }
            s
        }
        EntryData::Sqrt(coeffs) => {
            let mut s = String::from("sqrt");
            for c in coeffs {
                let _ = write!(s, " {}", c);
            }
            s
        }
    }
}

fn emit_entries(entries: &[EntryData]) -> String {
    entries.iter().map(emit_entry).collect::<Vec<_>>().join(" ; ")
}

/// Parses `1.5`, `2+3i`, `-1-0.5i`, `2i`, `1e-3+2e-4i`.
fn parse_complex(token: &str) -> Option<Complex64> {
    let token = token.trim();
    if let Some(body) = token.strip_suffix(['i', 'I']) {
        // Split at the last sign that is neither leading nor an exponent sign.
        let bytes = body.as_bytes();
        let mut split = None;
        for idx in (1..bytes.len()).rev() {
            let c = bytes[idx];
            if (c == b'+' || c == b'-')
                && !matches!(bytes[idx - 1], b'e' | b'E')
            {
                split = Some(idx);
                break;
            }
        }
        match split {
            Some(idx) => {
                let re: f64 = body[..idx].trim().parse().ok()?;
                let im_str = body[idx..].trim();
                let im: f64 = im_str.parse().ok()?;
                Some(Complex64::new(re, im))
            }
            None => {
                let im: f64 = body.trim().parse().ok()?;
                Some(Complex64::new(0.0, im))
            }
        }
    } else {
        let re: f64 = token.parse().ok()?;
        Some(Complex64::new(re, 0.0))
    }
}

struct Parser<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
    name: Option<String>,
    backend: Option<Backend>,
    tolerance: Option<f64>,
    grid: Option<usize>,
    algebra: Option<Vec<usize>>,
    modules: Vec<ModuleDecl>,
    submodules: Vec<SubmoduleDecl>,
    operators: Vec<OperatorDecl>,
    checks: Vec<CheckDecl>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        Parser {
            lines,
            pos: 0,
            name: None,
            backend: None,
            tolerance: None,
            grid: None,
            algebra: None,
            modules: Vec::new(),
            submodules: Vec::new(),
            operators: Vec::new(),
            checks: Vec::new(),
        }
    }

    fn next_line(&mut self) -> Option<(usize, &'a str)> {
        let item = self.lines.get(self.pos).copied();
        if item.is_some() {
            self.pos += 1;
        }
        item
    }

    fn run(mut self) -> Result<Scenario, ParseError> {
        while let Some((line, text)) = self.next_line() {
            let mut words = text.split_whitespace();
            let head = words.next().expect("blank lines were filtered");
            let rest: Vec<&str> = words.collect();
            match head {
                "scenario" => {
                    let name = one_word(line, &rest, "scenario name")?;
                    self.name = Some(name.to_string());
                }
                "backend" => {
                    let word = one_word(line, &rest, "backend kind")?;
                    self.backend = Some(match word {
                        "finite" => Backend::Finite,
                        "function" => Backend::Function,
                        other => {
                            return Err(malformed(
                                line,
                                format!("backend must be finite or function, got `{other}`"),
                            ))
                        }
                    });
                }
                "tolerance" => {
                    let word = one_word(line, &rest, "tolerance value")?;
                    let eps: f64 = word
                        .parse()
                        .map_err(|_| malformed(line, format!("bad tolerance `{word}`")))?;
                    if !(eps.is_finite() && eps > 0.0) {
                        return Err(malformed(line, "tolerance must be positive and finite"));
                    }
                    self.tolerance = Some(eps);
                }
                "grid" => {
                    let word = one_word(line, &rest, "grid size")?;
                    let points: usize = word
                        .parse()
                        .map_err(|_| malformed(line, format!("bad grid size `{word}`")))?;
                    if points < 2 {
                        return Err(malformed(line, "grid needs at least 2 points"));
                    }
                    self.grid = Some(points);
                }
                "algebra" => {
                    if rest.is_empty() {
                        return Err(malformed(line, "algebra needs at least one block size"));
                    }
                    let mut dims = Vec::with_capacity(rest.len());
                    for word in &rest {
                        let d: usize = word.parse().map_err(|_| {
                            malformed(line, format!("bad block size `{word}`"))
                        })?;
                        if d == 0 {
                            return Err(malformed(line, "block sizes must be positive"));
                        }
                        dims.push(d);
                    }
                    self.algebra = Some(dims);
                }
                "module" => self.parse_module(line, &rest)?,
                "submodule" => self.parse_submodule(line, &rest)?,
                "operator" => self.parse_operator(line, &rest)?,
                "check" => self.parse_check(line, &rest)?,
                other => {
                    return Err(ParseError::UnknownDirective {
                        line,
                        word: other.to_string(),
                    })
                }
            }
        }
        let name = self.name.ok_or(ParseError::MissingField { what: "scenario".into() })?;
        let backend =
            self.backend.ok_or(ParseError::MissingField { what: "backend".into() })?;
        if backend == Backend::Finite && self.algebra.is_none() {
            return Err(ParseError::MissingField { what: "algebra".into() });
        }
        Ok(Scenario {
            name,
            backend,
            tolerance: self.tolerance,
            grid: self.grid,
            algebra: self.algebra,
            modules: self.modules,
            submodules: self.submodules,
            operators: self.operators,
            checks: self.checks,
        })
    }

    fn backend_or_err(&self, line: usize) -> Result<Backend, ParseError> {
        self.backend
            .ok_or_else(|| malformed(line, "the backend line must come first"))
    }

    fn declared(&self, name: &str) -> bool {
        self.modules.iter().any(|m| m.name == name)
            || self.submodules.iter().any(|s| s.name == name)
            || self.operators.iter().any(|o| o.name == name)
    }

    fn rank_of(&self, line: usize, name: &str) -> Result<usize, ParseError> {
        if let Some(m) = self.modules.iter().find(|m| m.name == name) {
            return Ok(m.rank);
        }
        if let Some(s) = self.submodules.iter().find(|s| s.name == name) {
            return self.rank_of(line, &s.parent.clone());
        }
        Err(ParseError::UnknownName { line, name: name.to_string() })
    }

    fn parse_module(&mut self, line: usize, rest: &[&str]) -> Result<(), ParseError> {
        if rest.len() != 3 || rest[1] != "rank" {
            return Err(malformed(line, "expected `module <Name> rank <n>`"));
        }
        let name = rest[0].to_string();
        if self.declared(&name) {
            return Err(ParseError::DuplicateName { line, name });
        }
        let rank: usize = rest[2]
            .parse()
            .map_err(|_| malformed(line, format!("bad rank `{}`", rest[2])))?;
        if rank == 0 {
            return Err(malformed(line, "rank must be positive"));
        }
        self.modules.push(ModuleDecl { name, rank });
        Ok(())
    }

    fn parse_submodule(&mut self, line: usize, rest: &[&str]) -> Result<(), ParseError> {
        if rest.len() != 3 || rest[1] != "in" {
            return Err(malformed(line, "expected `submodule <Name> in <Module>`"));
        }
        let name = rest[0].to_string();
        if self.declared(&name) {
            return Err(ParseError::DuplicateName { line, name });
        }
        let parent = rest[2].to_string();
        if !self.modules.iter().any(|m| m.name == parent) {
            return Err(ParseError::UnknownName { line, name: parent });
        }
        let width = self.rank_of(line, &parent)?;
        let mut generators = Vec::new();
        loop {
            let Some((gline, gtext)) = self.next_line() else {
                return Err(malformed(line, "submodule block is missing its `end`"));
            };
            if gtext == "end" {
                break;
            }
            let Some(body) = gtext.strip_prefix("gen ").or(gtext.strip_prefix("gen\t"))
            else {
                return Err(malformed(gline, "expected `gen <entries>` or `end`"));
            };
            let entries = self.parse_entry_list(gline, body, width)?;
            generators.push(entries);
        }
        if generators.is_empty() {
            return Err(malformed(line, "submodule needs at least one generator"));
        }
        self.submodules.push(SubmoduleDecl { name, parent, generators });
        Ok(())
    }

    fn parse_operator(&mut self, line: usize, rest: &[&str]) -> Result<(), ParseError> {
        if rest.len() == 3 && rest[1] == "inclusion" {
            let name = rest[0].to_string();
            if self.declared(&name) {
                return Err(ParseError::DuplicateName { line, name });
            }
            let sub = rest[2].to_string();
            if !self.submodules.iter().any(|s| s.name == sub) {
                return Err(ParseError::UnknownName { line, name: sub });
            }
            self.operators.push(OperatorDecl {
                name,
                domain: None,
                codomain: None,
                body: OperatorBody::Inclusion(sub),
            });
            return Ok(());
        }
        if rest.len() != 5 || rest[1] != "from" || rest[3] != "to" {
            return Err(malformed(
                line,
                "expected `operator <name> from <A> to <B>` or `operator <name> inclusion <Sub>`",
            ));
        }
        let name = rest[0].to_string();
        if self.declared(&name) {
            return Err(ParseError::DuplicateName { line, name });
        }
        let domain = rest[2].to_string();
        let codomain = rest[4].to_string();
        let width = self.rank_of(line, &domain)?;
        let height = self.rank_of(line, &codomain)?;
        let mut rows = Vec::new();
        loop {
            let Some((rline, rtext)) = self.next_line() else {
                return Err(malformed(line, "operator block is missing its `end`"));
            };
            if rtext == "end" {
                break;
            }
            let Some(body) = rtext.strip_prefix("row ").or(rtext.strip_prefix("row\t"))
            else {
                return Err(malformed(rline, "expected `row <entries>` or `end`"));
            };
            let entries = self.parse_entry_list(rline, body, width)?;
            rows.push(entries);
        }
        if rows.len() != height {
            return Err(ParseError::EntryCount {
                line,
                expected: height,
                got: rows.len(),
            });
        }
        self.operators.push(OperatorDecl {
            name,
            domain: Some(domain),
            codomain: Some(codomain),
            body: OperatorBody::Rows(rows),
        });
        Ok(())
    }

    fn parse_check(&mut self, line: usize, rest: &[&str]) -> Result<(), ParseError> {
        if rest.len() != 2 {
            return Err(malformed(line, "expected `check <kind> <target>`"));
        }
        let kind = CheckKind::from_word(rest[0]).ok_or_else(|| {
            malformed(line, format!("unknown check kind `{}`", rest[0]))
        })?;
        let target = rest[1].to_string();
        if !self.operators.iter().any(|o| o.name == target)
            && !self.submodules.iter().any(|s| s.name == target)
        {
            return Err(ParseError::UnknownName { line, name: target });
        }
        let mut expectations = Vec::new();
        loop {
            let Some((eline, etext)) = self.next_line() else {
                return Err(malformed(line, "check block is missing its `end`"));
            };
            if etext == "end" {
                break;
            }
            let words: Vec<&str> = etext.split_whitespace().collect();
            if words.len() != 4 || words[0] != "expect" {
                return Err(malformed(eline, "expected `expect <key> <op> <value>`"));
            }
            let key = words[1].to_string();
            let op = match words[2] {
                "is" => ExpectOp::Is(words[3].to_string()),
                "below" => {
                    let x: f64 = words[3].parse().map_err(|_| {
                        malformed(eline, format!("bad bound `{}`", words[3]))
                    })?;
                    ExpectOp::Below(x)
                }
                "near" => {
                    let x: f64 = words[3].parse().map_err(|_| {
                        malformed(eline, format!("bad target `{}`", words[3]))
                    })?;
                    ExpectOp::Near(x)
                }
                other => {
                    return Err(malformed(
                        eline,
                        format!("expect operator must be is, below or near, got `{other}`"),
                    ))
                }
            };
            expectations.push(Expectation { key, op });
        }
        self.checks.push(CheckDecl { kind, target, expectations });
        Ok(())
    }

    fn parse_entry_list(
        &self,
        line: usize,
        body: &str,
        width: usize,
    ) -> Result<Vec<EntryData>, ParseError> {
        let backend = self.backend_or_err(line)?;
        let pieces: Vec<&str> = body.split(';').map(str::trim).collect();
        if pieces.len() != width {
            return Err(ParseError::EntryCount { line, expected: width, got: pieces.len() });
        }
        pieces
            .iter()
            .map(|piece| self.parse_entry(line, piece, backend))
            .collect()
    }

    fn parse_entry(
        &self,
        line: usize,
        piece: &str,
        backend: Backend,
    ) -> Result<EntryData, ParseError> {
        match backend {
            Backend::Function => {
                let mut words = piece.split_whitespace();
                let head = words
                    .next()
                    .ok_or_else(|| malformed(line, "empty entry"))?;
                let coeffs: Vec<f64> = words
                    .map(|w| {
                        w.parse().map_err(|_| {
                            malformed(line, format!("bad coefficient `{w}`"))
                        })
                    })
                    .collect::<Result<_, _>>()?;
                match head {
                    "poly" => Ok(EntryData::Poly(coeffs)),
                    "sqrt" => Ok(EntryData::Sqrt(coeffs)),
                    other => Err(malformed(
                        line,
                        format!("function entries start with poly or sqrt, got `{other}`"),
                    )),
                }
            }
            Backend::Finite => {
                let spec = self.algebra.as_ref().ok_or_else(|| {
                    malformed(line, "the algebra line must precede operator entries")
                })?;
                let blocks: Vec<&str> = piece.split('|').map(str::trim).collect();
                if blocks.len() != spec.len() {
                    return Err(malformed(
                        line,
                        format!(
                            "entry has {} blocks, the algebra has {}",
                            blocks.len(),
                            spec.len()
                        ),
                    ));
                }
                let mut data = Vec::with_capacity(blocks.len());
                for (block, &dim) in blocks.iter().zip(spec.iter()) {
                    let numbers: Vec<Complex64> = block
                        .split_whitespace()
                        .map(|w| {
                            parse_complex(w).ok_or_else(|| {
                                malformed(line, format!("bad complex number `{w}`"))
                            })
                        })
                        .collect::<Result<_, _>>()?;
                    if numbers.len() != dim * dim {
                        return Err(malformed(
                            line,
                            format!(
                                "block has {} coefficients, expected {} for a {dim}x{dim} block",
                                numbers.len(),
                                dim * dim
                            ),
                        ));
                    }
                    data.push(numbers);
                }
                Ok(EntryData::Finite(data))
            }
        }
    }
}

fn one_word<'a>(line: usize, rest: &[&'a str], what: &str) -> Result<&'a str, ParseError> {
    if rest.len() != 1 {
        return Err(malformed(line, format!("expected exactly one {what}")));
    }
    Ok(rest[0])
}
