//! A standalone checker for the Graphviz DOT language.
//!
//! Follows the published abstract grammar: optional `strict`, `graph` or
//! `digraph`, an optional graph ID, then a braced statement list of node,
//! edge, attribute, assignment and subgraph statements. IDs are plain
//! identifiers, numerals, double-quoted strings or HTML strings. Keywords are
//! case-insensitive. Edge operators must match the graph kind.

use std::collections::BTreeSet;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Id(String),
    Punct(char),
    Arrow,
    Line,
}

#[derive(Debug, Default)]
pub struct DotGraph {
    pub directed: bool,
    pub nodes: BTreeSet<String>,
    pub edges: Vec<(String, String)>,
}

fn is_id_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_' || (c as u32) >= 0x80
}

fn lex(src: &str) -> Result<Vec<Tok>, String> {
    let cs: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line_start = true;
    while i < cs.len() {
        let c = cs[i];
        if c == '\n' {
            line_start = true;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if line_start && c == '#' {
            while i < cs.len() && cs[i] != '\n' {
                i += 1;
            }
            continue;
        }
        line_start = false;
        if c == '/' && cs.get(i + 1) == Some(&'/') {
            while i < cs.len() && cs[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c == '/' && cs.get(i + 1) == Some(&'*') {
            i += 2;
            loop {
                if i + 1 >= cs.len() {
                    return Err("unterminated comment".into());
                }
                if cs[i] == '*' && cs[i + 1] == '/' {
                    i += 2;
                    break;
                }
                i += 1;
            }
            continue;
        }
        if c == '-' && matches!(cs.get(i + 1), Some('>')) {
            out.push(Tok::Arrow);
            i += 2;
            continue;
        }
        if c == '-' && matches!(cs.get(i + 1), Some('-')) {
            out.push(Tok::Line);
            i += 2;
            continue;
        }
        if "{}[];,=:".contains(c) {
            out.push(Tok::Punct(c));
            i += 1;
            continue;
        }
        if c == '"' {
            let mut s = String::new();
            i += 1;
            loop {
                match cs.get(i) {
                    None => return Err("unterminated string".into()),
                    Some('"') => {
                        i += 1;
                        break;
                    }
                    Some('\\') if cs.get(i + 1) == Some(&'"') => {
                        s.push('"');
                        i += 2;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            out.push(Tok::Id(s));
            continue;
        }
        if c == '<' {
            let mut depth = 0usize;
            let start = i;
            loop {
                match cs.get(i) {
                    None => return Err("unterminated HTML string".into()),
                    Some('<') => depth += 1,
                    Some('>') => {
                        depth -= 1;
                        if depth == 0 {
                            i += 1;
                            break;
                        }
                    }
                    _ => {}
                }
                i += 1;
            }
            out.push(Tok::Id(cs[start..i].iter().collect()));
            continue;
        }
        if c == '-' || c == '.' || c.is_ascii_digit() {
            let start = i;
            if c == '-' {
                i += 1;
            }
            let digits = |i: &mut usize| {
                let s = *i;
                while *i < cs.len() && cs[*i].is_ascii_digit() {
                    *i += 1;
                }
                *i > s
            };
            let whole = digits(&mut i);
            let frac = if cs.get(i) == Some(&'.') {
                i += 1;
                digits(&mut i)
            } else {
                false
            };
            if !whole && !frac {
                return Err(format!("bad numeral at char {start}"));
            }
            if cs.get(i).is_some_and(|&ch| is_id_start(ch)) {
                return Err(format!("numeral runs into identifier at char {start}"));
            }
            out.push(Tok::Id(cs[start..i].iter().collect()));
            continue;
        }
        if is_id_start(c) {
            let start = i;
            while i < cs.len() && (is_id_start(cs[i]) || cs[i].is_ascii_digit()) {
                i += 1;
            }
            out.push(Tok::Id(cs[start..i].iter().collect()));
            continue;
        }
        return Err(format!("unexpected character {c:?} at char {i}"));
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
    graph: DotGraph,
}

fn keyword(t: Option<&Tok>, kw: &str) -> bool {
    matches!(t, Some(Tok::Id(s)) if s.eq_ignore_ascii_case(kw))
}

const KEYWORDS: [&str; 6] = ["node", "edge", "graph", "digraph", "subgraph", "strict"];

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, ahead: usize) -> Option<&Tok> {
        self.toks.get(self.pos + ahead)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, c: char) -> Result<(), String> {
        match self.bump() {
            Some(Tok::Punct(p)) if p == c => Ok(()),
            other => Err(format!(
                "expected {c:?}, found {other:?} at token {}",
                self.pos - 1
            )),
        }
    }

    fn id(&mut self) -> Result<String, String> {
        match self.bump() {
            Some(Tok::Id(s)) if !KEYWORDS.iter().any(|k| s.eq_ignore_ascii_case(k)) => Ok(s),
            other => Err(format!(
                "expected ID, found {other:?} at token {}",
                self.pos - 1
            )),
        }
    }

    fn is_punct(&self, c: char) -> bool {
        self.peek() == Some(&Tok::Punct(c))
    }

    fn graph(&mut self) -> Result<(), String> {
        if keyword(self.peek(), "strict") {
            self.bump();
        }
        if keyword(self.peek(), "digraph") {
            self.graph.directed = true;
        } else if !keyword(self.peek(), "graph") {
            return Err("expected graph or digraph".into());
        }
        self.bump();
        if !self.is_punct('{') {
            self.id()?;
        }
        self.expect('{')?;
        self.stmt_list()?;
        self.expect('}')?;
        if self.pos != self.toks.len() {
            return Err(format!("trailing tokens after graph at token {}", self.pos));
        }
        Ok(())
    }

    fn stmt_list(&mut self) -> Result<(), String> {
        while !self.is_punct('}') {
            if self.peek().is_none() {
                return Err("unexpected end inside statement list".into());
            }
            self.stmt()?;
            if self.is_punct(';') {
                self.bump();
            }
        }
        Ok(())
    }

    fn stmt(&mut self) -> Result<(), String> {
        let t = self.peek();
        if keyword(t, "graph") || keyword(t, "node") || keyword(t, "edge") {
            self.bump();
            if !self.is_punct('[') {
                return Err("attribute statement without attribute list".into());
            }
            return self.attr_list();
        }
        if keyword(t, "subgraph") || self.is_punct('{') {
            let ids = self.subgraph()?;
            return self.edge_tail(ids);
        }
        if matches!(self.peek_at(1), Some(Tok::Punct('='))) {
            self.id()?;
            self.bump();
            self.id()?;
            return Ok(());
        }
        let id = self.node_id()?;
        if matches!(self.peek(), Some(Tok::Arrow | Tok::Line)) {
            return self.edge_tail(vec![id]);
        }
        self.graph.nodes.insert(id);
        if self.is_punct('[') {
            self.attr_list()?;
        }
        Ok(())
    }

    fn edge_tail(&mut self, mut left: Vec<String>) -> Result<(), String> {
        while let Some(op) = self.peek().cloned() {
            let directed = match op {
                Tok::Arrow => true,
                Tok::Line => false,
                _ => break,
            };
            if directed != self.graph.directed {
                return Err(format!(
                    "edge operator does not match graph kind at token {}",
                    self.pos
                ));
            }
            self.bump();
            let right = if keyword(self.peek(), "subgraph") || self.is_punct('{') {
                self.subgraph()?
            } else {
                vec![self.node_id()?]
            };
            for a in &left {
                for b in &right {
                    self.graph.edges.push((a.clone(), b.clone()));
                }
            }
            left = right;
        }
        if self.is_punct('[') {
            self.attr_list()?;
        }
        Ok(())
    }

    fn subgraph(&mut self) -> Result<Vec<String>, String> {
        if keyword(self.peek(), "subgraph") {
            self.bump();
            if !self.is_punct('{') {
                self.id()?;
            }
        }
        let before = self.graph.nodes.clone();
        self.expect('{')?;
        self.stmt_list()?;
        self.expect('}')?;
        Ok(self.graph.nodes.difference(&before).cloned().collect())
    }

    fn node_id(&mut self) -> Result<String, String> {
        let id = self.id()?;
        if self.is_punct(':') {
            self.bump();
            self.id()?;
            if self.is_punct(':') {
                self.bump();
                self.id()?;
            }
        }
        Ok(id)
    }

    fn attr_list(&mut self) -> Result<(), String> {
        while self.is_punct('[') {
            self.bump();
            while !self.is_punct(']') {
                self.id()?;
                self.expect('=')?;
                self.id()?;
                if self.is_punct(';') || self.is_punct(',') {
                    self.bump();
                }
            }
            self.expect(']')?;
        }
        Ok(())
    }
}

/// Parses `src`, returning the declared nodes and the edges.
pub fn parse_dot(src: &str) -> Result<DotGraph, String> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
        graph: DotGraph::default(),
    };
    p.graph()?;
    Ok(p.graph)
}

#[test]
fn dot_checker_accepts_grammar_samples() {
    let ok = [
        "digraph { a -> b }",
        "strict graph G { a -- b -- c; x [label=\"q \\\" r\", shape=box] }",
        "digraph T {\nnode [shape=box] ;\n0 [label=<<b>x</b>>] ;\n0 -> 1 [headlabel=\"True\"] ;\n1 ;\n}",
        "graph { subgraph s { a; b } -- c; rankdir = LR }",
        "# preprocessor line\ndigraph { /* c */ a:n -> b:s:e // tail\n }",
        "digraph { -1.5 -> .5 }",
    ];
    for src in ok {
        parse_dot(src).unwrap_or_else(|e| panic!("{src}: {e}"));
    }
}

#[test]
fn dot_checker_rejects_malformed_text() {
    let bad = [
        "",
        "digraph { a -- b }",
        "graph { a -> b }",
        "digraph { a -> }",
        "digraph { a [label=] }",
        "digraph { a [label=\"x] }",
        "digraph { 1x }",
        "digraph { a } b",
        "digraph { node }",
        "digraph { a -> b",
    ];
    for src in bad {
        assert!(parse_dot(src).is_err(), "accepted: {src}");
    }
}
