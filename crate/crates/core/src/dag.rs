//! Causal DAG over attribute names, a DOT-subset reader, and the
//! adjustment-set and ancestor queries used during effect estimation.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalDag {
    nodes: Vec<String>,
    index: HashMap<String, usize>,
    parents: Vec<BTreeSet<usize>>,
    children: Vec<BTreeSet<usize>>,
}

impl CausalDag {
    /// Builds the graph, rejecting undeclared endpoints and cycles.
    pub fn new<S: AsRef<str>>(nodes: &[S], edges: &[(S, S)]) -> Result<CausalDag> {
        let mut dag = CausalDag {
            nodes: Vec::new(),
            index: HashMap::new(),
            parents: Vec::new(),
            children: Vec::new(),
        };
        for n in nodes {
            dag.add_node(n.as_ref());
        }
        for (a, b) in edges {
            let (a, b) = (a.as_ref(), b.as_ref());
            let ia = dag.node_index(a)?;
            let ib = dag.node_index(b)?;
            dag.parents[ib].insert(ia);
            dag.children[ia].insert(ib);
        }
        if let Some(cycle) = dag.find_cycle() {
            return Err(Error::Cycle(cycle));
        }
        Ok(dag)
    }

    fn add_node(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.nodes.len();
        self.nodes.push(name.to_string());
        self.index.insert(name.to_string(), i);
        self.parents.push(BTreeSet::new());
        self.children.push(BTreeSet::new());
        i
    }

    fn node_index(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::Schema(format!("unknown DAG node {name}")))
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn has_node(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    /// Edges as (parent, child), sorted by name.
    pub fn edges(&self) -> Vec<(&str, &str)> {
        let mut out: Vec<(&str, &str)> = self
            .children
            .iter()
            .enumerate()
            .flat_map(|(p, cs)| cs.iter().map(move |&c| (p, c)))
            .map(|(p, c)| (self.nodes[p].as_str(), self.nodes[c].as_str()))
            .collect();
        out.sort();
        out
    }

    pub fn parents(&self, node: &str) -> Result<BTreeSet<String>> {
        let i = self.node_index(node)?;
        Ok(self.parents[i].iter().map(|&p| self.nodes[p].clone()).collect())
    }

    /// Nodes with a directed path into `node`, excluding `node`.
    pub fn causal_ancestors(&self, node: &str) -> Result<BTreeSet<String>> {
        let start = self.node_index(node)?;
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![start];
        while let Some(n) = stack.pop() {
            for &p in &self.parents[n] {
                if !seen[p] {
                    seen[p] = true;
                    stack.push(p);
                }
            }
        }
        Ok(seen
            .iter()
            .enumerate()
            .filter(|&(i, &s)| s && i != start)
            .map(|(i, _)| self.nodes[i].clone())
            .collect())
    }

    /// Union of the treatments' parents, minus the treatments and outcome.
    pub fn adjustment_set<S: AsRef<str>>(&self, treatments: &[S], outcome: &str) -> Result<Vec<String>> {
        if treatments.is_empty() {
            return Err(Error::Schema("adjustment set needs at least one treatment".into()));
        }
        self.node_index(outcome)?;
        let mut z = BTreeSet::new();
        for t in treatments {
            z.extend(self.parents(t.as_ref())?);
        }
        for t in treatments {
            z.remove(t.as_ref());
        }
        z.remove(outcome);
        Ok(z.into_iter().collect())
    }

    fn find_cycle(&self) -> Option<Vec<String>> {
        // 0 = unvisited, 1 = on stack, 2 = done
        let n = self.nodes.len();
        let mut state = vec![0u8; n];
        for root in 0..n {
            if state[root] != 0 {
                continue;
            }
            let mut stack: Vec<(usize, Vec<usize>)> = vec![(root, self.children[root].iter().copied().collect())];
            state[root] = 1;
            while let Some((node, pending)) = stack.last_mut() {
                let node = *node;
                if let Some(next) = pending.pop() {
                    match state[next] {
                        0 => {
                            state[next] = 1;
                            stack.push((next, self.children[next].iter().copied().collect()));
                        }
                        1 => {
                            let start = stack.iter().position(|(n, _)| *n == next).unwrap();
                            let mut cycle: Vec<String> =
                                stack[start..].iter().map(|(n, _)| self.nodes[*n].clone()).collect();
                            cycle.push(self.nodes[next].clone());
                            return Some(cycle);
                        }
                        _ => {}
                    }
                } else {
                    state[node] = 2;
                    stack.pop();
                }
            }
        }
        None
    }

    /// Serializes as DOT, nodes first, then edges.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph G {\n");
        for n in &self.nodes {
            let _ = writeln!(out, "  {};", quote_id(n));
        }
        for (a, b) in self.edges() {
            let _ = writeln!(out, "  {} -> {};", quote_id(a), quote_id(b));
        }
        out.push_str("}\n");
        out
    }
}

fn quote_id(id: &str) -> String {
    let bare = !id.is_empty()
        && id.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '.')
        && !matches!(id.to_ascii_lowercase().as_str(), "digraph" | "graph" | "node" | "edge" | "strict" | "subgraph");
    if bare {
        id.to_string()
    } else {
        format!("\"{}\"", id.replace('\\', "\\\\").replace('"', "\\\""))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Id(String),
    Arrow,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Semi,
    Comma,
    Equals,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut line = 1;
    let err = |line, message: String| Error::DagSyntax { line, message };
    while i < chars.len() {
        let c = chars[i];
        match c {
            '\n' => {
                line += 1;
                i += 1;
            }
            c if c.is_whitespace() => i += 1,
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '/' if chars.get(i + 1) == Some(&'/') => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '/' if chars.get(i + 1) == Some(&'*') => {
                i += 2;
                loop {
                    if i + 1 >= chars.len() {
                        return Err(err(line, "unterminated comment".into()));
                    }
                    if chars[i] == '*' && chars[i + 1] == '/' {
                        i += 2;
                        break;
                    }
                    if chars[i] == '\n' {
                        line += 1;
                    }
                    i += 1;
                }
            }
            '-' if chars.get(i + 1) == Some(&'>') => {
                out.push((Tok::Arrow, line));
                i += 2;
            }
            '{' => {
                out.push((Tok::LBrace, line));
                i += 1;
            }
            '}' => {
                out.push((Tok::RBrace, line));
                i += 1;
            }
            '[' => {
                out.push((Tok::LBracket, line));
                i += 1;
            }
            ']' => {
                out.push((Tok::RBracket, line));
                i += 1;
            }
            ';' => {
                out.push((Tok::Semi, line));
                i += 1;
            }
            ',' => {
                out.push((Tok::Comma, line));
                i += 1;
            }
            '=' => {
                out.push((Tok::Equals, line));
                i += 1;
            }
            '"' => {
                let start_line = line;
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return Err(err(start_line, "unterminated string".into())),
                        Some('"') => {
                            i += 1;
                            break;
                        }
                        Some('\\') if matches!(chars.get(i + 1), Some('"') | Some('\\')) => {
                            s.push(chars[i + 1]);
                            i += 2;
                        }
                        Some(&ch) => {
                            if ch == '\n' {
                                line += 1;
                            }
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                out.push((Tok::Id(s), start_line));
            }
            c if c.is_alphanumeric() || c == '_' || c == '.' || c == '-' => {
                let mut s = String::new();
                while i < chars.len() {
                    let ch = chars[i];
                    if ch == '-' && chars.get(i + 1) == Some(&'>') {
                        break;
                    }
                    if ch.is_alphanumeric() || ch == '_' || ch == '.' || ch == '-' {
                        s.push(ch);
                        i += 1;
                    } else {
                        break;
                    }
                }
                out.push((Tok::Id(s), line));
            }
            other => return Err(err(line, format!("unexpected character {other:?}"))),
        }
    }
    Ok(out)
}

/// Parses `[strict] digraph [name] { stmt* }` where a statement is a node
/// (`A;`), an edge chain (`A -> B -> C;`), or an attribute statement.
/// Attribute lists are accepted and ignored; semicolons are optional.
pub fn parse_dot(text: &str) -> Result<CausalDag> {
    let toks = tokenize(text)?;
    let mut pos = 0;
    let last_line = toks.last().map_or(1, |t| t.1);
    let line_at = |pos: usize| toks.get(pos).map_or(last_line, |t| t.1);
    let syntax = |line: usize, message: &str| Error::DagSyntax {
        line,
        message: message.to_string(),
    };
    let keyword = |tok: Option<&(Tok, usize)>, kw: &str| matches!(tok, Some((Tok::Id(s), _)) if s.eq_ignore_ascii_case(kw));

    if keyword(toks.get(pos), "strict") {
        pos += 1;
    }
    if !keyword(toks.get(pos), "digraph") {
        return Err(syntax(line_at(pos), "expected 'digraph'"));
    }
    pos += 1;
    if let Some((Tok::Id(_), _)) = toks.get(pos) {
        pos += 1;
    }
    if toks.get(pos).map(|t| &t.0) != Some(&Tok::LBrace) {
        return Err(syntax(line_at(pos), "expected '{'"));
    }
    pos += 1;

    let mut nodes: Vec<String> = Vec::new();
    let mut edges: Vec<(String, String)> = Vec::new();
    let declare = |n: &str, nodes: &mut Vec<String>| {
        if !nodes.iter().any(|x| x == n) {
            nodes.push(n.to_string());
        }
    };

    fn skip_attr_list(toks: &[(Tok, usize)], pos: &mut usize) -> Result<()> {
        if toks.get(*pos).map(|t| &t.0) != Some(&Tok::LBracket) {
            return Ok(());
        }
        let open_line = toks[*pos].1;
        *pos += 1;
        while let Some((t, _)) = toks.get(*pos) {
            *pos += 1;
            if *t == Tok::RBracket {
                return Ok(());
            }
        }
        Err(Error::DagSyntax {
            line: open_line,
            message: "unterminated attribute list".into(),
        })
    }

    loop {
        match toks.get(pos) {
            None => return Err(syntax(last_line, "expected '}'")),
            Some((Tok::RBrace, _)) => {
                pos += 1;
                break;
            }
            Some((Tok::Semi, _)) => pos += 1,
            Some((Tok::Id(first), line)) => {
                let line = *line;
                let first = first.clone();
                let lower = first.to_ascii_lowercase();
                if matches!(lower.as_str(), "graph" | "node" | "edge")
                    && toks.get(pos + 1).map(|t| &t.0) == Some(&Tok::LBracket)
                {
                    pos += 1;
                    skip_attr_list(&toks, &mut pos)?;
                    continue;
                }
                if lower == "subgraph" {
                    return Err(syntax(line, "subgraphs are not supported"));
                }
                pos += 1;
                if toks.get(pos).map(|t| &t.0) == Some(&Tok::Equals) {
                    // graph-level `key = value`
                    pos += 1;
                    match toks.get(pos) {
                        Some((Tok::Id(_), _)) => pos += 1,
                        _ => return Err(syntax(line_at(pos), "expected value after '='")),
                    }
                    continue;
                }
                declare(&first, &mut nodes);
                let mut prev = first;
                while toks.get(pos).map(|t| &t.0) == Some(&Tok::Arrow) {
                    pos += 1;
                    match toks.get(pos) {
                        Some((Tok::Id(next), _)) => {
                            let next = next.clone();
                            declare(&next, &mut nodes);
                            edges.push((prev, next.clone()));
                            prev = next;
                            pos += 1;
                        }
                        _ => return Err(syntax(line_at(pos), "expected node after '->'")),
                    }
                }
                skip_attr_list(&toks, &mut pos)?;
                match toks.get(pos).map(|t| &t.0) {
                    Some(Tok::Semi) | Some(Tok::Comma) => pos += 1,
                    Some(Tok::Id(_)) | Some(Tok::RBrace) | None => {}
                    Some(_) => return Err(syntax(line_at(pos), "unexpected token")),
                }
            }
            Some((_, line)) => return Err(syntax(*line, "unexpected token")),
        }
    }
    if pos != toks.len() {
        return Err(syntax(line_at(pos), "trailing input after '}'"));
    }
    CausalDag::new(&nodes, &edges)
}
