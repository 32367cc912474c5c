//! Expression grammar, printer, reports and the command runner.
//!
//! ```text
//! expr := sum            sum  := item ('#' item)*
//! item := [INT '*'] prod prod := prim ('x' prim)*
//! prim := atom | '(' expr ')' | func
//! func := surgery(expr, INT, canonical|other[, LABEL]) | tbundle(expr, INT) | rev(expr)
//! atom := S INT | T INT | wu | m(INT,INT) | xk(INT) | s3tws2 | cp2cp2bar
//! ```
//!
//! Whitespace is ignored between tokens. A bare `rev(..)` directly after
//! `#` reverses the orientation of that summand; anywhere else it is an
//! orientation-reversal node.

use std::fmt;
use std::path::PathBuf;

use clap::{Parser as ClapParser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::abelian::{abelianization, GroupPresentation};
use crate::cohomology6::{complexified_chern, ComplexifiedChern, SixManifoldInput};
use crate::constructions::{normalize_for_embedding, realize_group, ConstructionError, RealizationCertificate};
use crate::decisions::{
    barden_normal_form, decide, decide_generic, decide_six, BardenNormalForm, Decision, DecisionError, RuleApplication,
};
use crate::manifolds::{block_table, BlockAtom, Framing, InvariantRecord, ManifoldDescriptor, Node, TriState};

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    /// 1-based character column.
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "column {}: {}", self.column, self.message)
    }
}

impl std::error::Error for ParseError {}

pub fn parse(text: &str) -> Result<ManifoldDescriptor, ParseError> {
    let mut p = Parser { chars: text.chars().collect(), pos: 0 };
    let d = p.expr()?;
    p.skip_ws();
    if p.pos < p.chars.len() {
        return Err(p.error_here(format!("unexpected '{}'", p.chars[p.pos])));
    }
    Ok(d)
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

/// A parsed primary; `bare_rev` holds the operand of a bare `rev(..)`.
struct Prim {
    d: ManifoldDescriptor,
    bare_rev: Option<ManifoldDescriptor>,
}

impl Parser {
    fn skip_ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn column(&self) -> usize {
        self.pos + 1
    }

    fn error_at(column: usize, message: impl Into<String>) -> ParseError {
        ParseError { column, message: message.into() }
    }

    fn error_here(&self, message: impl Into<String>) -> ParseError {
        Self::error_at(self.column(), message)
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        match self.peek() {
            Some(x) if x == c => {
                self.pos += 1;
                Ok(())
            }
            Some(x) => Err(self.error_here(format!("expected '{c}', found '{x}'"))),
            None => Err(self.error_here(format!("expected '{c}', found end of input"))),
        }
    }

    /// Consumes `word` if the input continues with it (after whitespace).
    fn keyword(&mut self, word: &str) -> bool {
        self.skip_ws();
        let n = word.chars().count();
        let matches = self.pos + n <= self.chars.len() && self.chars[self.pos..self.pos + n].iter().copied().eq(word.chars());
        if matches {
            self.pos += n;
        }
        matches
    }

    fn int(&mut self) -> Result<u32, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.chars.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error_here("expected an integer"));
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse().map_err(|_| Self::error_at(start + 1, format!("integer {text} out of range")))
    }

    fn label(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.chars.get(self.pos).is_some_and(|c| c.is_ascii_alphanumeric() || *c == '_' || *c == '^') {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error_here("expected a sphere label"));
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn expr(&mut self) -> Result<ManifoldDescriptor, ParseError> {
        let mut acc = self.item()?.d;
        while self.peek() == Some('#') {
            let col = self.column();
            self.pos += 1;
            let item = self.item()?;
            acc = match item.bare_rev {
                Some(inner) => ManifoldDescriptor::connected_sum(&acc, &inner, true),
                None => ManifoldDescriptor::connected_sum(&acc, &item.d, false),
            }
            .map_err(|e| Self::error_at(col, e.to_string()))?;
        }
        Ok(acc)
    }

    fn item(&mut self) -> Result<Prim, ParseError> {
        if self.peek().is_some_and(|c| c.is_ascii_digit()) {
            let col = self.column();
            let n = self.int()?;
            self.expect('*')?;
            if n == 0 {
                return Err(Self::error_at(col, "multiplier must be at least 1"));
            }
            let d = self.prod()?.d;
            let d = ManifoldDescriptor::connected_sum_copies(&d, n as usize).map_err(|e| Self::error_at(col, e.to_string()))?;
            return Ok(Prim { d, bare_rev: None });
        }
        self.prod()
    }

    fn prod(&mut self) -> Result<Prim, ParseError> {
        let mut acc = self.prim()?;
        while self.peek() == Some('x') {
            let col = self.column();
            self.pos += 1;
            let right = self.prim()?;
            let d = ManifoldDescriptor::product(&acc.d, &right.d).map_err(|e| Self::error_at(col, e.to_string()))?;
            acc = Prim { d, bare_rev: None };
        }
        Ok(acc)
    }

    fn prim(&mut self) -> Result<Prim, ParseError> {
        let col = match self.peek() {
            Some(_) => self.column(),
            None => return Err(self.error_here("expected a manifold, found end of input")),
        };
        let wrap = |r: Result<ManifoldDescriptor, crate::manifolds::ManifoldError>| {
            r.map(|d| Prim { d, bare_rev: None }).map_err(|e| Self::error_at(col, e.to_string()))
        };
        if self.keyword("(") {
            let d = self.expr()?;
            self.expect(')')?;
            return Ok(Prim { d, bare_rev: None });
        }
        if self.keyword("surgery") {
            self.expect('(')?;
            let base = self.expr()?;
            self.expect(',')?;
            let index = self.int()?;
            self.expect(',')?;
            let framing = if self.keyword("canonical") {
                Framing::Canonical
            } else if self.keyword("other") {
                Framing::Other
            } else {
                return Err(self.error_here("expected 'canonical' or 'other'"));
            };
            let sphere = if self.peek() == Some(',') {
                self.pos += 1;
                Some(self.label()?)
            } else {
                None
            };
            self.expect(')')?;
            return wrap(ManifoldDescriptor::surgery(&base, index, framing, sphere));
        }
        if self.keyword("tbundle") {
            self.expect('(')?;
            let base = self.expr()?;
            self.expect(',')?;
            let k = self.int()?;
            self.expect(')')?;
            return wrap(ManifoldDescriptor::torus_bundle_total(&base, k));
        }
        if self.keyword("rev") {
            self.expect('(')?;
            let inner = self.expr()?;
            self.expect(')')?;
            let d = ManifoldDescriptor::reversed(&inner).map_err(|e| Self::error_at(col, e.to_string()))?;
            return Ok(Prim { d, bare_rev: Some(inner) });
        }
        let atom = if self.keyword("s3tws2") {
            BlockAtom::TwistedS3S2
        } else if self.keyword("cp2cp2bar") {
            BlockAtom::Cp2Cp2Bar
        } else if self.keyword("wu") {
            BlockAtom::Wu
        } else if self.keyword("xk") {
            self.expect('(')?;
            let k = self.int()?;
            self.expect(')')?;
            BlockAtom::Xk { k }
        } else if self.keyword("m") {
            self.expect('(')?;
            let p = self.int()?;
            self.expect(',')?;
            let k = self.int()?;
            self.expect(')')?;
            BlockAtom::Mpk { p, k }
        } else if self.keyword("S") {
            BlockAtom::Sphere { n: self.int()? }
        } else if self.keyword("T") {
            BlockAtom::Torus { n: self.int()? }
        } else {
            let c = self.chars[self.pos];
            return Err(self.error_here(format!("expected a manifold, found '{c}'")));
        };
        wrap(ManifoldDescriptor::atom(atom))
    }
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

/// Canonical text form; `parse(&print(d))` rebuilds `d`.
pub fn print(d: &ManifoldDescriptor) -> String {
    match d.node() {
        Node::Atom(a) => a.to_string(),
        Node::ConnectedSum { left, right, reverse_second } => {
            let right = if *reverse_second {
                format!("rev({})", print(right))
            } else {
                match right.node() {
                    Node::ConnectedSum { .. } | Node::Reversed(_) => format!("({})", print(right)),
                    _ => print(right),
                }
            };
            format!("{} # {}", print(left), right)
        }
        Node::Product { left, right } => {
            let l = match left.node() {
                Node::ConnectedSum { .. } => format!("({})", print(left)),
                _ => print(left),
            };
            let r = match right.node() {
                Node::ConnectedSum { .. } | Node::Product { .. } => format!("({})", print(right)),
                _ => print(right),
            };
            format!("{l} x {r}")
        }
        Node::Surgery { base, index, framing, sphere } => match sphere {
            Some(label) => format!("surgery({}, {index}, {framing}, {label})", print(base)),
            None => format!("surgery({}, {index}, {framing})", print(base)),
        },
        Node::TorusBundleTotal { base, fiber_rank } => format!("tbundle({}, {fiber_rank})", print(base)),
        Node::Reversed(inner) => format!("rev({})", print(inner)),
    }
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableCheck {
    pub name: String,
    pub expression: String,
    pub h2: String,
    pub expected_w2_zero: bool,
    pub computed_w2_zero: TriState,
    pub expected_semi_char: u8,
    pub computed_semi_char: Option<u8>,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChernReport {
    pub complexified: ComplexifiedChern,
    pub p1_zero: TriState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub input: String,
    pub dimension: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invariants: Option<InvariantRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<Decision>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generic_immersion: Option<TriState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normal_form: Option<BardenNormalForm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<RealizationCertificate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<TableCheck>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chern: Option<ChernReport>,
    pub warnings: Vec<String>,
}

impl Report {
    fn new(command: &str, input: impl Into<String>) -> Self {
        Self {
            command: command.to_string(),
            input: input.into(),
            dimension: None,
            invariants: None,
            decision: None,
            generic_immersion: None,
            normal_form: None,
            certificate: None,
            table: None,
            chern: None,
            warnings: Vec::new(),
        }
    }

    fn with_descriptor(mut self, d: &ManifoldDescriptor) -> Self {
        self.dimension = Some(d.dim());
        self.invariants = Some(d.record().clone());
        self.warnings.extend(d.record().notes.iter().cloned());
        self
    }

    pub fn render_text(&self, trace: bool) -> String {
        let mut out = Vec::new();
        out.push(format!("input: {}", self.input));
        if let Some(n) = self.dimension {
            out.push(format!("dimension: {n}"));
        }
        if let Some(r) = &self.invariants {
            out.push(format!("homology: {}", r.homology));
            let euler = r.euler.map_or("?".to_string(), |e| e.to_string());
            out.push(format!("euler characteristic: {euler}"));
            if r.dim % 2 == 1 {
                let sc = r.semi_char.map_or("?".to_string(), |c| c.to_string());
                out.push(format!("semi-characteristic: {sc}"));
            }
            if let Some(g) = &r.fundamental_group {
                out.push(format!("fundamental group: <{g}>"));
            }
            out.push(format!(
                "orientable: {}  simply connected: {}  w2 = 0: {}  p1 = 0: {}",
                r.orientable, r.simply_connected, r.w2_zero, r.p1_zero
            ));
            out.push(format!(
                "stably parallelizable: {}  complexified tangent bundle trivial: {}",
                r.stably_parallelizable, r.ctm_trivial
            ));
        }
        if let Some(d) = &self.decision {
            out.push(format!("immersion: {}", d.immersion));
            if trace {
                push_trace(&mut out, &d.immersion_trace);
            }
            out.push(format!("embedding: {}", d.embedding));
            if trace {
                push_trace(&mut out, &d.embedding_trace);
            }
        }
        if let Some(g) = self.generic_immersion {
            out.push(format!("generic immersion as a hypersurface: {g}"));
        }
        if let Some(nf) = &self.normal_form {
            let blocks: Vec<String> = nf.blocks.iter().map(|(b, n)| format!("{n} x {b:?}")).collect();
            out.push(format!("normal form: delta = {}, blocks = [{}]{}", nf.delta, blocks.join(", "), if nf.residual { " (residual)" } else { "" }));
            if let Some(p) = &nf.prototype {
                out.push(format!("prototype: {p}"));
            }
        }
        if let Some(c) = &self.certificate {
            out.push(format!("certificate: {:?}, {} steps, output step {}", c.strategy, c.steps.len(), c.output));
            if trace {
                for (i, s) in c.steps.iter().enumerate() {
                    out.push(format!("  {i}: {} [{}]", serde_json::to_string(&s.operation).unwrap_or_default(), s.citation));
                }
            }
            if let Some(b) = &c.branch_note {
                out.push(format!("branches: steps {:?}, semi-characteristics {:?}; {}", b.branches, b.semi_chars, b.note));
            }
        }
        if let Some(rows) = &self.table {
            for r in rows {
                out.push(format!(
                    "{:<12} H2 = {:<14} w2 = 0: {:<5} semi-char: {} {}",
                    r.name,
                    r.h2,
                    r.expected_w2_zero,
                    r.expected_semi_char,
                    if r.ok { "ok" } else { "MISMATCH" }
                ));
            }
            let ok = rows.iter().filter(|r| r.ok).count();
            out.push(format!("{ok}/{} rows verified", rows.len()));
        }
        if let Some(c) = &self.chern {
            out.push(format!("complexified chern: c1 = {:?}, c2 = {:?}, c3 = {}", c.complexified.c1, c.complexified.c2, c.complexified.c3));
            out.push(format!("p1 = 0: {}", c.p1_zero));
        }
        for w in &self.warnings {
            out.push(format!("warning: {w}"));
        }
        out.join("\n")
    }
}

fn push_trace(out: &mut Vec<String>, trace: &[RuleApplication]) {
    for app in trace {
        let inputs: Vec<String> = app.inputs.iter().map(|(f, v)| format!("{}={v}", serde_json::to_string(f).unwrap_or_default().trim_matches('"'))).collect();
        out.push(format!("  [{}] {} ({}) <- {} => {} {}", app.rule_id, app.statement, app.source, inputs.join(", "), app.slot, app.verdict));
    }
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

#[derive(Debug, ClapParser)]
#[command(name = "totreal", about = "Totally real immersions and embeddings of closed manifolds")]
pub struct Cli {
    /// Emit a JSON report.
    #[arg(long, global = true)]
    pub json: bool,
    /// Show the rule and construction traces.
    #[arg(long, global = true)]
    pub trace: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Invariants of a manifold expression.
    Invariants { expr: String },
    /// Decide totally real immersion and embedding.
    Decide { expr: String },
    /// Realize a finitely presented group as a fundamental group.
    Realize {
        #[arg(long)]
        presentation: String,
        #[arg(long)]
        dim: u32,
        /// Normalize so that the result has a totally real embedding.
        #[arg(long)]
        embedding: bool,
    },
    /// Recompute the block table of simply connected 5-manifolds.
    #[command(name = "table1-selfcheck")]
    Table1Selfcheck {
        #[arg(long, default_value_t = 3)]
        p: u32,
        #[arg(long, default_value_t = 1)]
        k: u32,
    },
    /// Complexified Chern classes of a 6-manifold given as JSON.
    Chern6 { file: PathBuf },
    /// Print the rule catalog as JSON.
    Rules,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Internal(String),
}

impl From<ParseError> for Failure {
    fn from(e: ParseError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<DecisionError> for Failure {
    fn from(e: DecisionError) -> Self {
        match e {
            DecisionError::Inconsistent { .. } => Failure::Internal(e.to_string()),
            other => Failure::Invalid(other.to_string()),
        }
    }
}

impl From<ConstructionError> for Failure {
    fn from(e: ConstructionError) -> Self {
        match e {
            ConstructionError::Decision(d) => d.into(),
            other => Failure::Invalid(other.to_string()),
        }
    }
}

pub fn decide_report(input: &str) -> Result<Report, String> {
    report_for_decide(input).map_err(|e| match e {
        Failure::Invalid(m) | Failure::Internal(m) => m,
    })
}

fn report_for_decide(input: &str) -> Result<Report, Failure> {
    let d = parse(input)?;
    let mut report = Report::new("decide", input).with_descriptor(&d);
    report.decision = Some(decide(&d)?);
    if d.dim() % 2 == 1 {
        report.generic_immersion = Some(decide_generic(&d)?);
    }
    if d.dim() == 5 && d.record().simply_connected.is_yes() {
        report.normal_form = Some(barden_normal_form(&d)?);
    }
    Ok(report)
}

pub fn realize_report(presentation: &str, dim: u32, embedding: bool) -> Result<Report, String> {
    report_for_realize(presentation, dim, embedding).map_err(|e| match e {
        Failure::Invalid(m) | Failure::Internal(m) => m,
    })
}

fn report_for_realize(presentation: &str, dim: u32, embedding: bool) -> Result<Report, Failure> {
    let p = GroupPresentation::parse(presentation).map_err(|e| Failure::Invalid(e.to_string()))?;
    let (d, cert) = if embedding { normalize_for_embedding(&p, dim)? } else { realize_group(&p, dim)? };
    let mut report = Report::new("realize", presentation).with_descriptor(&d);
    let ab = abelianization(&p).map_err(|e| Failure::Invalid(e.to_string()))?;
    if d.record().homology.degree(1) != Some(&ab) {
        return Err(Failure::Internal(format!("first homology differs from the abelianization {ab}")));
    }
    report.decision = Some(decide(&d)?);
    if let Some(note) = &cert.branch_note {
        if note.chosen.is_none() {
            report.warnings.push("semi-characteristic of the base is not computable; both branches returned".into());
        }
    }
    report.certificate = Some(cert);
    Ok(report)
}

pub fn table_report(p: u32, k: u32) -> Result<Report, String> {
    let mut report = Report::new("table1-selfcheck", format!("p={p}, k={k}"));
    let mut rows = Vec::new();
    for row in block_table(p, k) {
        let d = parse(&row.expression).map_err(|e| e.to_string())?;
        let r = d.record();
        let computed = r.homology.semi_characteristic(r.dim);
        let ok = computed == Some(row.semi_char)
            && r.w2_zero == TriState::from_bool(row.w2_zero)
            && r.homology.degree(2) == Some(&row.h2);
        rows.push(TableCheck {
            name: row.name.to_string(),
            expression: row.expression.clone(),
            h2: row.h2.to_string(),
            expected_w2_zero: row.w2_zero,
            computed_w2_zero: r.w2_zero,
            expected_semi_char: row.semi_char,
            computed_semi_char: computed,
            ok,
        });
        report.warnings.extend(r.notes.iter().filter(|n| !report.warnings.contains(n)).cloned().collect::<Vec<_>>());
    }
    report.dimension = Some(5);
    report.table = Some(rows);
    Ok(report)
}

fn report_for_chern(file: &PathBuf) -> Result<Report, Failure> {
    let text = std::fs::read_to_string(file).map_err(|e| Failure::Invalid(format!("{}: {e}", file.display())))?;
    let input = SixManifoldInput::from_json(&text).map_err(|e| Failure::Invalid(e.to_string()))?;
    let mut report = Report::new("chern6", file.display().to_string());
    report.dimension = Some(6);
    let complexified = complexified_chern(&input.chern(), &input.ring).map_err(|e| Failure::Invalid(e.to_string()))?;
    let p1_zero = input.p1_zero().map_err(|e| Failure::Invalid(e.to_string()))?;
    report.chern = Some(ChernReport { complexified, p1_zero });
    report.decision = Some(decide_six(&input)?);
    if input.torsion_classes {
        report.warnings.push("torsion-valued classes flagged; p1 is left undecided".into());
    }
    Ok(report)
}

/// Parses `args` (including the program name) and runs one command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                Outcome { code, stdout: text, stderr: String::new() }
            } else {
                Outcome { code, stdout: String::new(), stderr: text }
            };
        }
    };
    let result = match &cli.command {
        Command::Invariants { expr } => {
            parse(expr).map(|d| Report::new("invariants", expr.as_str()).with_descriptor(&d)).map_err(Failure::from)
        }
        Command::Decide { expr } => report_for_decide(expr),
        Command::Realize { presentation, dim, embedding } => report_for_realize(presentation, *dim, *embedding),
        Command::Table1Selfcheck { p, k } => table_report(*p, *k).map_err(Failure::Invalid),
        Command::Chern6 { file } => report_for_chern(file),
        Command::Rules => {
            let text = serde_json::to_string_pretty(&crate::decisions::rule_catalog()).expect("catalog serializes");
            return Outcome { code: 0, stdout: text, stderr: String::new() };
        }
    };
    match result {
        Ok(report) => {
            let table_failed = report.table.as_ref().is_some_and(|rows| rows.iter().any(|r| !r.ok));
            let stdout = if cli.json {
                serde_json::to_string_pretty(&report).expect("reports serialize")
            } else {
                report.render_text(cli.trace)
            };
            Outcome { code: if table_failed { 2 } else { 0 }, stdout, stderr: String::new() }
        }
        Err(Failure::Invalid(m)) => Outcome { code: 1, stdout: String::new(), stderr: format!("error: {m}") },
        Err(Failure::Internal(m)) => Outcome { code: 2, stdout: String::new(), stderr: format!("internal error: {m}") },
    }
}
