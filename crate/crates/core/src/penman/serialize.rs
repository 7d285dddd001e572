use super::AmrGraph;

/// Writes `graph` as single-line PENMAN.
///
/// Nodes are declared at their first depth-first encounter from the root
/// and referenced by bare variable afterwards; children follow edge
/// insertion order.
pub fn serialize_penman(graph: &AmrGraph) -> String {
    let children = graph.out_edges();
    let mut declared = vec![false; graph.len()];
    let mut out = String::new();
    write_node(graph, &children, graph.root(), &mut declared, &mut out);
    out
}

fn write_node(
    graph: &AmrGraph,
    children: &[Vec<usize>],
    u: usize,
    declared: &mut [bool],
    out: &mut String,
) {
    declared[u] = true;
    let node = &graph.nodes()[u];
    out.push('(');
    out.push_str(node.var.as_deref().unwrap_or_default());
    out.push_str(" / ");
    out.push_str(&node.label);
    for &e in &children[u] {
        let edge = &graph.edges()[e];
        out.push_str(" :");
        out.push_str(&edge.role);
        out.push(' ');
        let target = &graph.nodes()[edge.target];
        match &target.var {
            None => out.push_str(&target.label),
            Some(var) if declared[edge.target] => out.push_str(var),
            Some(_) => write_node(graph, children, edge.target, declared, out),
        }
    }
    out.push(')');
}

#[cfg(test)]
mod tests {
    use super::super::parse_penman;
    use super::*;

    #[test]
    fn smallest_graph() {
        let g = parse_penman("(a / and)").unwrap();
        assert_eq!(serialize_penman(&g), "(a / and)");
    }

    #[test]
    fn join_round_trip() {
        let src = "(j / join-01\n   :ARG0 (p / person)\n   :ARG1 (b / board))";
        let g = parse_penman(src).unwrap();
        let text = serialize_penman(&g);
        assert_eq!(text, "(j / join-01 :ARG0 (p / person) :ARG1 (b / board))");
        assert!(parse_penman(&text).unwrap().isomorphic(&g));
    }

    #[test]
    fn reentrancy_declared_once() {
        let g = parse_penman("(w / want-01 :ARG0 (b / boy) :ARG1 (g / go-01 :ARG0 b))").unwrap();
        let text = serialize_penman(&g);
        assert_eq!(text.matches("(b / boy)").count(), 1);
        assert_eq!(text.matches(" b)").count(), 1);
        assert!(parse_penman(&text).unwrap().isomorphic(&g));
    }

    #[test]
    fn forward_reference_moves_declaration() {
        let g = parse_penman("(a / x :ARG0 b :ARG1 (b / y))").unwrap();
        let text = serialize_penman(&g);
        assert_eq!(text, "(a / x :ARG0 (b / y) :ARG1 b)");
        assert!(parse_penman(&text).unwrap().isomorphic(&g));
    }

    #[test]
    fn constants_round_trip() {
        let g = parse_penman(r#"(p / person :name "Barack Obama" :polarity -)"#).unwrap();
        let text = serialize_penman(&g);
        assert_eq!(text, r#"(p / person :name "Barack Obama" :polarity -)"#);
    }
}
