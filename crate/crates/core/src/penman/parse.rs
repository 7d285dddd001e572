use std::collections::HashMap;

use super::{AmrGraph, Edge, Node};
use crate::error::ParseError;

/// Parses a single PENMAN expression.
///
/// Alignment suffixes (`~e.10,12`) on roles, concepts and symbols are
/// dropped. A bare symbol naming a declared variable is a re-entrancy; other
/// bare symbols that look like variables (a letter followed by digits) are
/// rejected as undeclared, and anything else becomes a constant leaf.
pub fn parse_penman(text: &str) -> Result<AmrGraph, ParseError> {
    let mut reader = Reader { src: text, pos: 0 };
    reader.skip_ws();
    if reader.peek().is_none() {
        return Err(ParseError::new(text.len(), "empty input"));
    }
    if reader.peek() != Some(b'(') {
        return Err(ParseError::new(reader.pos, "expected `(`"));
    }
    let tree = reader.node()?;
    reader.skip_ws();
    match reader.peek() {
        None => {}
        Some(b')') => {
            return Err(ParseError::new(
                reader.pos,
                "unbalanced parentheses: unexpected `)`",
            ))
        }
        Some(_) => return Err(ParseError::new(reader.pos, "trailing input after graph")),
    }
    build(tree)
}

struct RawNode {
    var: String,
    var_offset: usize,
    concept: String,
    children: Vec<(String, Target)>,
}

enum Target {
    Node(RawNode),
    Symbol { text: String, offset: usize },
    Literal(String),
}

struct Reader<'a> {
    src: &'a str,
    pos: usize,
}

impl Reader<'_> {
    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_ascii_whitespace() {
                self.pos += 1;
            } else if c == b'#' {
                while let Some(c) = self.peek() {
                    if c == b'\n' {
                        break;
                    }
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn missing_close(&self) -> ParseError {
        ParseError::new(self.src.len(), "unbalanced parentheses: missing `)`")
    }

    /// Reads a run of symbol characters, stopping at whitespace, parens,
    /// quotes and any byte in `stop`.
    fn symbol(&mut self, stop: &[u8]) -> &str {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_whitespace() || matches!(c, b'(' | b')' | b'"') || stop.contains(&c) {
                break;
            }
            self.pos += 1;
        }
        &self.src[start..self.pos]
    }

    fn node(&mut self) -> Result<RawNode, ParseError> {
        debug_assert_eq!(self.peek(), Some(b'('));
        self.pos += 1;
        self.skip_ws();
        let var_offset = self.pos;
        let var = strip_alignment(self.symbol(b"/")).to_string();
        if var.is_empty() {
            return Err(match self.peek() {
                None => self.missing_close(),
                _ => ParseError::new(self.pos, "expected variable name"),
            });
        }
        self.skip_ws();
        match self.peek() {
            Some(b'/') => self.pos += 1,
            None => return Err(self.missing_close()),
            _ => return Err(ParseError::new(self.pos, "expected `/` after variable")),
        }
        self.skip_ws();
        let concept = if self.peek() == Some(b'"') {
            self.quoted()?
        } else {
            strip_alignment(self.symbol(b"")).to_string()
        };
        if concept.is_empty() {
            return Err(match self.peek() {
                None => self.missing_close(),
                _ => ParseError::new(self.pos, "expected concept"),
            });
        }
        let mut children = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                None => return Err(self.missing_close()),
                Some(b')') => {
                    self.pos += 1;
                    break;
                }
                Some(b':') => {
                    let role_offset = self.pos;
                    self.pos += 1;
                    let role = strip_alignment(self.symbol(b"")).to_string();
                    if role.is_empty() {
                        return Err(ParseError::new(role_offset, "empty role"));
                    }
                    self.skip_ws();
                    let target = match self.peek() {
                        None => return Err(self.missing_close()),
                        Some(b'(') => Target::Node(self.node()?),
                        Some(b'"') => Target::Literal(self.quoted()?),
                        Some(b')') | Some(b':') => {
                            return Err(ParseError::new(
                                self.pos,
                                format!("role `:{role}` has no value"),
                            ))
                        }
                        Some(_) => {
                            let offset = self.pos;
                            let text = strip_alignment(self.symbol(b"")).to_string();
                            if text.is_empty() {
                                return Err(ParseError::new(offset, "expected role value"));
                            }
                            Target::Symbol { text, offset }
                        }
                    };
                    children.push((role, target));
                }
                Some(_) => return Err(ParseError::new(self.pos, "expected `:role` or `)`")),
            }
        }
        Ok(RawNode {
            var,
            var_offset,
            concept,
            children,
        })
    }

    /// Reads a double-quoted literal, keeping the quotes.
    fn quoted(&mut self) -> Result<String, ParseError> {
        let start = self.pos;
        self.pos += 1;
        loop {
            match self.peek() {
                None => return Err(ParseError::new(start, "unterminated string literal")),
                Some(b'\\') => self.pos += 2,
                Some(b'"') => {
                    self.pos += 1;
                    break;
                }
                Some(_) => self.pos += 1,
            }
        }
        let lit = self.src[start..self.pos].to_string();
        // alignment on a literal, e.g. "Obama"~e.3
        if self.peek() == Some(b'~') {
            self.symbol(b"");
        }
        Ok(lit)
    }
}

fn strip_alignment(token: &str) -> &str {
    match token.find('~') {
        Some(i) if i > 0 => {
            let rest = &token[i + 1..];
            if rest
                .bytes()
                .all(|c| c.is_ascii_alphanumeric() || c == b'.' || c == b',')
            {
                &token[..i]
            } else {
                token
            }
        }
        _ => token,
    }
}

fn looks_like_variable(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase()) && chars.all(|c| c.is_ascii_digit())
}

fn build(tree: RawNode) -> Result<AmrGraph, ParseError> {
    // Declarations first, so references may precede the node they name.
    let mut declared: HashMap<String, ()> = HashMap::new();
    let mut stack = vec![&tree];
    while let Some(node) = stack.pop() {
        if declared.insert(node.var.clone(), ()).is_some() {
            // Report the later declaration in text order.
            return Err(duplicate_error(&tree, &node.var));
        }
        for (_, t) in node.children.iter().rev() {
            if let Target::Node(c) = t {
                stack.push(c);
            }
        }
    }

    let mut nodes = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    assign(&tree, &mut nodes, &mut index);

    let mut edges = Vec::new();
    let mut constants = Vec::new();
    connect(&tree, &index, &mut edges, &mut constants)?;
    for (label, source, role, order) in constants {
        let target = nodes.len();
        nodes.push(Node::constant(label));
        edges.push((source, target, role, order));
    }
    // Constants were appended out of order; restore attachment order.
    edges.sort_by_key(|e| e.3);
    let edges = edges
        .into_iter()
        .map(|(source, target, role, _)| Edge {
            source,
            target,
            role,
        })
        .collect();
    AmrGraph::new(nodes, edges, 0).map_err(|e| ParseError::new(0, e.to_string()))
}

fn duplicate_error(tree: &RawNode, var: &str) -> ParseError {
    let mut offsets = Vec::new();
    let mut stack = vec![tree];
    while let Some(n) = stack.pop() {
        if n.var == var {
            offsets.push(n.var_offset);
        }
        for (_, t) in &n.children {
            if let Target::Node(c) = t {
                stack.push(c);
            }
        }
    }
    offsets.sort_unstable();
    ParseError::new(offsets[1], format!("duplicate variable `{var}`"))
}

fn assign(node: &RawNode, nodes: &mut Vec<Node>, index: &mut HashMap<String, usize>) {
    index.insert(node.var.clone(), nodes.len());
    nodes.push(Node::instance(node.var.clone(), node.concept.clone()));
    for (_, t) in &node.children {
        if let Target::Node(c) = t {
            assign(c, nodes, index);
        }
    }
}

type PendingEdge = (usize, usize, String, usize);

fn connect(
    node: &RawNode,
    index: &HashMap<String, usize>,
    edges: &mut Vec<PendingEdge>,
    constants: &mut Vec<(String, usize, String, usize)>,
) -> Result<(), ParseError> {
    let source = index[&node.var];
    for (role, t) in &node.children {
        match t {
            Target::Node(c) => {
                edges.push((
                    source,
                    index[&c.var],
                    role.clone(),
                    edges.len() + constants.len(),
                ));
                connect(c, index, edges, constants)?;
            }
            Target::Symbol { text, offset } => {
                if let Some(&target) = index.get(text) {
                    edges.push((source, target, role.clone(), edges.len() + constants.len()));
                } else if looks_like_variable(text) {
                    return Err(ParseError::new(
                        *offset,
                        format!("undeclared variable `{text}`"),
                    ));
                } else {
                    let order = edges.len() + constants.len();
                    constants.push((text.clone(), source, role.clone(), order));
                }
            }
            Target::Literal(lit) => {
                let order = edges.len() + constants.len();
                constants.push((lit.clone(), source, role.clone(), order));
            }
        }
    }
    Ok(())
}
