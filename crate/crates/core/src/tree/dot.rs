use std::fmt::Write;

use super::ExplainTree;

const PALETTE: [&str; 10] = [
    "#e58139", "#399de5", "#47e539", "#e5399d", "#8139e5", "#e5d739", "#39e5c8", "#e53947",
    "#7be539", "#3956e5",
];

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn weights_text(w: &[f64]) -> String {
    let parts: Vec<String> = w.iter().map(|v| format!("{v:.3}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Renders the tree as a Graphviz digraph. Nodes are emitted in index order;
/// leaves are filled with the color of their majority class.
pub fn export_dot(tree: &ExplainTree, feature_names: &[String], class_names: &[String]) -> String {
    let class_name = |c: usize| {
        class_names
            .get(c)
            .cloned()
            .unwrap_or_else(|| format!("class {c}"))
    };
    let mut out = String::new();
    out.push_str("digraph Tree {\n");
    out.push_str(
        "node [shape=box, style=\"filled, rounded\", color=\"black\", fontname=\"helvetica\"] ;\n",
    );
    out.push_str("edge [fontname=\"helvetica\"] ;\n");
    for (i, node) in tree.nodes.iter().enumerate() {
        let mut label = String::new();
        if let Some(f) = node.feature {
            let name = feature_names
                .get(f)
                .cloned()
                .unwrap_or_else(|| format!("x[{f}]"));
            let _ = write!(label, "{} <= {}\\n", escape(&name), node.threshold);
        }
        let _ = write!(
            label,
            "samples = {}\\nweights = {}\\nclass = {}",
            node.samples,
            weights_text(&node.class_weights),
            escape(&class_name(node.prediction))
        );
        let fill = if node.is_leaf() {
            PALETTE[node.prediction % PALETTE.len()]
        } else {
            "#ffffff"
        };
        let _ = writeln!(out, "{i} [label=\"{label}\", fillcolor=\"{fill}\"] ;");
        if let (Some(l), Some(r)) = (node.left, node.right) {
            let _ = writeln!(out, "{i} -> {l} [headlabel=\"True\"] ;");
            let _ = writeln!(out, "{i} -> {r} [headlabel=\"False\"] ;");
        }
    }
    out.push_str("}\n");
    out
}
