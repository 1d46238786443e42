//! The `.gom` text format.
//!
//! ```text
//! model "S3 move" migration V
//! goal G1 "Achieve [Improved availability]" {
//!   obstacle O1 "Cloud outage" risk(likely, major) note "ops review" {
//!     obstacle domain "S3 data centre outage"
//!     tactic T18 "Replicate system components" note "second region"
//!   }
//! }
//! ```
//!
//! Nesting encodes edges: a goal inside a goal is an AND-child, an obstacle
//! inside a goal obstructs it, an obstacle inside an obstacle refines it and
//! a tactic inside an obstacle resolves it. Two additions beyond the core
//! grammar keep models lossless: `note STRING` after a `risk(...)` clause
//! records assessment provenance, and `introduces ID, ...` on a tactic
//! lists obstacles (by node id) raised by applying it. Assessment history is
//! not represented in the text form.

use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{GoalModel, GoalPattern, ModelError, NodeData, ObstacleOrigin, ObstacleSpec, Violation};
use crate::repository::{parse_repo_id, EntryKind, MigrationType, Repository};
use crate::risk::{self, Consequence, Likelihood, RiskError, RiskLevel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Lexical,
    Syntax,
    Semantic,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParseErrorKind::Lexical => "lexical error",
            ParseErrorKind::Syntax => "syntax error",
            ParseErrorKind::Semantic => "semantic error",
        })
    }
}

/// A located parse failure. Line and column are 1-based; the column counts
/// characters.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {kind}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("model is not well formed: {}", .0.first().map(ToString::to_string).unwrap_or_default())]
    InvalidModel(Vec<Violation>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    Str(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Equals,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Word(w) => write!(f, "`{w}`"),
            Tok::Str(_) => f.write_str("string"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Equals => f.write_str("`=`"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pos {
    line: usize,
    column: usize,
}

fn is_word_start(c: char) -> bool {
    c.is_ascii_alphanumeric()
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-' | ':')
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn pos(&self) -> Pos {
        Pos { line: self.line, column: self.column }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }
}

fn lexical(pos: Pos, message: String) -> ParseError {
    ParseError { kind: ParseErrorKind::Lexical, line: pos.line, column: pos.column, message }
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let mut out = Vec::new();
    let mut cur = Cursor { chars: text.chars().peekable(), line: 1, column: 1 };
    while let Some(c) = cur.peek() {
        let pos = cur.pos();
        match c {
            c if c.is_whitespace() => {
                cur.bump();
            }
            '#' => {
                while cur.peek().is_some_and(|c| c != '\n') {
                    cur.bump();
                }
            }
            '{' | '}' | '(' | ')' | ',' | '=' => {
                cur.bump();
                let tok = match c {
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ',' => Tok::Comma,
                    _ => Tok::Equals,
                };
                out.push((tok, pos));
            }
            '"' => {
                cur.bump();
                let mut s = String::new();
                loop {
                    let here = cur.pos();
                    match cur.bump() {
                        None => return Err(lexical(pos, "unterminated string".into())),
                        Some('"') => break,
                        Some('\\') => match cur.bump() {
                            Some('"') => s.push('"'),
                            Some('\\') => s.push('\\'),
                            Some('n') => s.push('\n'),
                            Some(other) => return Err(lexical(here, format!("unknown escape `\\{other}`"))),
                            None => return Err(lexical(pos, "unterminated string".into())),
                        },
                        Some(ch) => s.push(ch),
                    }
                }
                out.push((Tok::Str(s), pos));
            }
            c if is_word_start(c) => {
                let mut w = String::new();
                while cur.peek().is_some_and(is_word_char) {
                    w.push(cur.bump().expect("peeked"));
                }
                out.push((Tok::Word(w), pos));
            }
            other => return Err(lexical(pos, format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    end: Pos,
    repo: &'a Repository,
    model: Option<GoalModel>,
    /// (tactic node id, referenced node id, position of the reference)
    links: Vec<(String, String, Pos)>,
}

/// Parses a model, resolving repository references against `repo`.
pub fn parse_model_text(text: &str, repo: &Repository) -> Result<GoalModel, ParseError> {
    let toks = lex(text)?;
    let end = {
        let line = text.split('\n').count();
        let column = text.rsplit('\n').next().map(|l| l.chars().count() + 1).unwrap_or(1);
        Pos { line, column }
    };
    let mut p = Parser { toks, at: 0, end, repo, model: None, links: Vec::new() };
    p.parse_model()?;
    let mut model = p.model.take().expect("header parsed");
    for (tactic, target, pos) in std::mem::take(&mut p.links) {
        model
            .link_introduced(&tactic, &target)
            .map_err(|e| semantic(pos, e.to_string()))?;
    }
    Ok(model)
}

fn semantic(pos: Pos, message: String) -> ParseError {
    ParseError { kind: ParseErrorKind::Semantic, line: pos.line, column: pos.column, message }
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(t, _)| t)
    }

    fn pos(&self) -> Pos {
        self.toks.get(self.at).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn syntax(&self, expected: &str) -> ParseError {
        let found = self.peek().map(ToString::to_string).unwrap_or_else(|| "end of input".into());
        let pos = self.pos();
        ParseError {
            kind: ParseErrorKind::Syntax,
            line: pos.line,
            column: pos.column,
            message: format!("expected {expected}, found {found}"),
        }
    }

    fn peek_word(&self, word: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(w)) if w == word)
    }

    fn keyword(&mut self, word: &str) -> Result<Pos, ParseError> {
        if self.peek_word(word) {
            let pos = self.pos();
            self.at += 1;
            Ok(pos)
        } else {
            Err(self.syntax(&format!("`{word}`")))
        }
    }

    fn punct(&mut self, tok: Tok) -> Result<(), ParseError> {
        if self.peek() == Some(&tok) {
            self.at += 1;
            Ok(())
        } else {
            Err(self.syntax(&tok.to_string()))
        }
    }

    fn string(&mut self, what: &str) -> Result<(String, Pos), ParseError> {
        match self.peek() {
            Some(Tok::Str(s)) => {
                let out = (s.clone(), self.pos());
                self.at += 1;
                Ok(out)
            }
            _ => Err(self.syntax(what)),
        }
    }

    fn word(&mut self, what: &str) -> Result<(String, Pos), ParseError> {
        match self.peek() {
            Some(Tok::Word(w)) => {
                let out = (w.clone(), self.pos());
                self.at += 1;
                Ok(out)
            }
            _ => Err(self.syntax(what)),
        }
    }

    fn repo_id(&mut self, kind: EntryKind, what: &str) -> Result<(String, Pos), ParseError> {
        match self.peek() {
            Some(Tok::Word(w)) if parse_repo_id(w).is_some_and(|(k, _)| k == kind) => self.word(what),
            _ => Err(self.syntax(what)),
        }
    }

    fn model_mut(&mut self) -> &mut GoalModel {
        self.model.as_mut().expect("header parsed")
    }

    fn parse_model(&mut self) -> Result<(), ParseError> {
        self.keyword("model")?;
        let (name, name_pos) = self.string("model name string")?;
        self.keyword("migration")?;
        let (mt, mt_pos) = self.word("migration type (I, II, III, IV or V)")?;
        let mt: MigrationType = mt.parse().map_err(|_| ParseError {
            kind: ParseErrorKind::Syntax,
            line: mt_pos.line,
            column: mt_pos.column,
            message: format!("expected migration type (I, II, III, IV or V), found `{mt}`"),
        })?;
        self.model = Some(GoalModel::new(&name, mt).map_err(|e| semantic(name_pos, e.to_string()))?);
        while self.peek().is_some() {
            if !self.peek_word("goal") {
                return Err(self.syntax("`goal`"));
            }
            self.parse_goal(None)?;
        }
        Ok(())
    }

    fn parse_goal(&mut self, parent: Option<&str>) -> Result<(), ParseError> {
        self.keyword("goal")?;
        let gid = match self.peek() {
            Some(Tok::Word(_)) => Some(self.repo_id(EntryKind::Goal, "goal id (G1-G10) or goal name string")?),
            _ => None,
        };
        let (text, text_pos) = self.string("goal name string")?;
        let (pattern, descriptor) = GoalPattern::split_display_name(&text)
            .ok_or_else(|| semantic(text_pos, format!("goal name `{text}` must look like `Achieve [descriptor]`")))?;
        let descriptor = descriptor.to_string();
        let repo = self.repo;
        let id = self
            .model_mut()
            .add_goal(repo, parent, pattern, &descriptor, gid.as_ref().map(|(g, _)| g.as_str()))
            .map_err(|e| match (&e, &gid) {
                (ModelError::UnknownRepoGoal(_), Some((_, pos))) => semantic(*pos, e.to_string()),
                _ => semantic(text_pos, e.to_string()),
            })?;
        if self.peek() == Some(&Tok::LBrace) {
            self.at += 1;
            while self.peek() != Some(&Tok::RBrace) {
                match self.peek() {
                    Some(Tok::Word(w)) if w == "goal" => self.parse_goal(Some(&id))?,
                    Some(Tok::Word(w)) if w == "obstacle" => self.parse_obstacle(&id)?,
                    Some(Tok::Word(w)) if w == "tactic" => {
                        return Err(semantic(self.pos(), "tactics resolve obstacles, not goals".into()))
                    }
                    _ => return Err(self.syntax("`goal`, `obstacle` or `}`")),
                }
            }
            self.at += 1;
        }
        Ok(())
    }

    fn parse_obstacle(&mut self, target: &str) -> Result<(), ParseError> {
        self.keyword("obstacle")?;
        let (spec_head, head_pos) = if self.peek_word("domain") {
            let pos = self.keyword("domain")?;
            let ancestor = if self.peek_word("of") {
                self.at += 1;
                Some(self.repo_id(EntryKind::Obstacle, "obstacle id after `of`")?)
            } else {
                None
            };
            (Err(ancestor), pos)
        } else {
            let (oid, pos) = self.repo_id(EntryKind::Obstacle, "obstacle id (O1-O67) or `domain`")?;
            (Ok(oid), pos)
        };
        let (name, name_pos) = self.string("obstacle name string")?;
        let (spec, ref_pos) = match spec_head {
            Ok(oid) => {
                let entry_name = self.repo.obstacle(&oid).map(|o| o.name.clone());
                let name = (entry_name.as_deref() != Some(name.as_str())).then_some(name);
                (ObstacleSpec::Evidential { obstacle: oid, name }, head_pos)
            }
            Err(ancestor) => {
                let pos = ancestor.as_ref().map(|(_, p)| *p).unwrap_or(name_pos);
                (ObstacleSpec::Domain { name, ancestor: ancestor.map(|(a, _)| a) }, pos)
            }
        };
        let repo = self.repo;
        let id = self
            .model_mut()
            .attach_obstacle(repo, target, spec)
            .map_err(|e| match e {
                ModelError::EmptyObstacleName => semantic(name_pos, e.to_string()),
                _ => semantic(ref_pos, e.to_string()),
            })?;

        if self.peek_word("risk") {
            let risk_pos = self.keyword("risk")?;
            self.punct(Tok::LParen)?;
            let likelihood: Likelihood = self.level("likelihood")?;
            self.punct(Tok::Comma)?;
            let consequence: Consequence = self.level("consequence")?;
            let mut override_level = None;
            let mut override_pos = risk_pos;
            if self.peek() == Some(&Tok::Comma) {
                self.at += 1;
                override_pos = self.keyword("override")?;
                self.punct(Tok::Equals)?;
                let (r, r_pos) = self.word("risk level (L, M, H, E or V)")?;
                if !matches!(r.as_str(), "L" | "M" | "H" | "E" | "V") {
                    return Err(ParseError {
                        kind: ParseErrorKind::Syntax,
                        line: r_pos.line,
                        column: r_pos.column,
                        message: format!("expected risk level (L, M, H, E or V), found `{r}`"),
                    });
                }
                override_level = Some(r.parse::<RiskLevel>().expect("checked"));
            }
            self.punct(Tok::RParen)?;
            let note = if self.peek_word("note") {
                self.at += 1;
                self.string("note string")?.0
            } else {
                String::new()
            };
            risk::assess(self.model_mut(), &id, likelihood, consequence, &note, override_level).map_err(|e| {
                let pos = if matches!(e, RiskError::OverrideWithoutNote) { override_pos } else { risk_pos };
                semantic(pos, e.to_string())
            })?;
        }

        if self.peek() == Some(&Tok::LBrace) {
            self.at += 1;
            while self.peek() != Some(&Tok::RBrace) {
                match self.peek() {
                    Some(Tok::Word(w)) if w == "obstacle" => self.parse_obstacle(&id)?,
                    Some(Tok::Word(w)) if w == "tactic" => self.parse_tactic(&id)?,
                    Some(Tok::Word(w)) if w == "goal" => {
                        return Err(semantic(self.pos(), "goals cannot be nested inside obstacles".into()))
                    }
                    _ => return Err(self.syntax("`obstacle`, `tactic` or `}`")),
                }
            }
            self.at += 1;
        }
        Ok(())
    }

    fn level<T: std::str::FromStr>(&mut self, what: &str) -> Result<T, ParseError> {
        let expected: &[&str] = if what == "likelihood" {
            &["rare", "unlikely", "possible", "likely", "almost-certain"]
        } else {
            &["insignificant", "minor", "moderate", "major", "catastrophic"]
        };
        match self.peek() {
            Some(Tok::Word(w)) if expected.contains(&w.as_str()) => {
                let v = w.parse::<T>().ok().expect("listed spelling parses");
                self.at += 1;
                Ok(v)
            }
            _ => Err(self.syntax(&format!("{what} ({})", expected.join("|")))),
        }
    }

    fn parse_tactic(&mut self, obstacle: &str) -> Result<(), ParseError> {
        self.keyword("tactic")?;
        let (tid, tid_pos) = self.repo_id(EntryKind::Tactic, "tactic id (T1-T45)")?;
        let label = match self.peek() {
            Some(Tok::Str(_)) => Some(self.string("tactic label")?.0),
            _ => None,
        };
        let note = if self.peek_word("note") {
            self.at += 1;
            self.string("note string")?.0
        } else {
            String::new()
        };
        let mut introduces = Vec::new();
        if self.peek_word("introduces") {
            self.at += 1;
            introduces.push(self.word("node id")?);
            while self.peek() == Some(&Tok::Comma) {
                self.at += 1;
                introduces.push(self.word("node id")?);
            }
        }
        let repo = self.repo;
        let id = self
            .model_mut()
            .attach_tactic(repo, obstacle, &tid, label.as_deref(), &note)
            .map_err(|e| semantic(tid_pos, e.to_string()))?;
        self.links.extend(introduces.into_iter().map(|(target, pos)| (id.clone(), target, pos)));
        Ok(())
    }
}

/// Renders the canonical text form. The model must be well formed.
pub fn format_model_text(model: &GoalModel) -> Result<String, FormatError> {
    let violations = model.validate_structure();
    if !violations.is_empty() {
        return Err(FormatError::InvalidModel(violations));
    }
    let mut out = String::new();
    writeln!(out, "model {} migration {}", quote(model.name()), model.migration_type()).expect("string write");
    for root in model.root_ids() {
        write_node(model, &root, 0, &mut out);
    }
    Ok(out)
}

fn write_node(model: &GoalModel, id: &str, depth: usize, out: &mut String) {
    let indent = "  ".repeat(depth);
    let children = model.children(id);
    let mut line = String::new();
    match model.data(id).expect("listed node exists") {
        NodeData::Goal(g) => {
            line.push_str("goal ");
            if let Some(r) = &g.repo_ref {
                line.push_str(r);
                line.push(' ');
            }
            line.push_str(&quote(&g.display_name()));
        }
        NodeData::Obstacle(o) => {
            line.push_str("obstacle ");
            match &o.origin {
                ObstacleOrigin::Evidential { obstacle } => line.push_str(obstacle),
                ObstacleOrigin::Domain { ancestor: None } => line.push_str("domain"),
                ObstacleOrigin::Domain { ancestor: Some(a) } => {
                    line.push_str("domain of ");
                    line.push_str(a);
                }
            }
            line.push(' ');
            line.push_str(&quote(&o.name));
            if let Some(a) = &o.assessment {
                write!(line, " risk({}, {}", a.likelihood, a.consequence).expect("string write");
                if let Some(r) = a.override_level {
                    write!(line, ", override = {r}").expect("string write");
                }
                line.push(')');
                if !a.note.is_empty() {
                    write!(line, " note {}", quote(&a.note)).expect("string write");
                }
            }
        }
        NodeData::Tactic(t) => {
            line.push_str("tactic ");
            line.push_str(&t.repo_ref);
            if let Some(l) = &t.label {
                line.push(' ');
                line.push_str(&quote(l));
            }
            if !t.note.is_empty() {
                write!(line, " note {}", quote(&t.note)).expect("string write");
            }
            let introduced = model.introduced(id);
            if !introduced.is_empty() {
                write!(line, " introduces {}", introduced.join(", ")).expect("string write");
            }
        }
    }
    if children.is_empty() {
        writeln!(out, "{indent}{line}").expect("string write");
    } else {
        writeln!(out, "{indent}{line} {{").expect("string write");
        for c in &children {
            write_node(model, c, depth + 1, out);
        }
        writeln!(out, "{indent}}}").expect("string write");
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}
