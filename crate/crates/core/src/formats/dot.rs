//! Graphviz export.
//!
//! Goals are parallelograms, obstacles mirrored parallelograms, tactics
//! hexagons and the migration type a box. Edges point from the refining
//! element to the refined one: decomposition and refinement are solid,
//! obstruction dashed, resolution dotted. The migration type contributes to
//! each root goal (solid, hollow arrowhead) and a tactic points at the
//! obstacles it introduced with a bold edge.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::formats::dsl::FormatError;
use crate::model::{GoalModel, NodeData};

const MIGRATION_NODE: &str = "migration-type";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DotOptions {
    /// Append `[likelihood×consequence=risk]` to assessed obstacles.
    #[serde(default)]
    pub show_risk: bool,
    /// Append the node id to every label.
    #[serde(default)]
    pub show_ids: bool,
}

pub fn export_dot(model: &GoalModel, options: DotOptions) -> Result<String, FormatError> {
    let violations = model.validate_structure();
    if !violations.is_empty() {
        return Err(FormatError::InvalidModel(violations));
    }
    let mut out = String::new();
    let w = &mut out;
    writeln!(w, "digraph {} {{", quote(model.name())).expect("string write");
    writeln!(w, "  rankdir=BT;").expect("string write");
    writeln!(w, "  node [fontname=\"Helvetica\"];").expect("string write");
    writeln!(
        w,
        "  {} [shape=box, label={}];",
        quote(MIGRATION_NODE),
        quote(&format!("Migration type {}", model.migration_type()))
    )
    .expect("string write");

    let views = model.views();
    for v in &views {
        let mut label = v.display_name.clone();
        let attrs = match &v.data {
            NodeData::Goal(_) => "shape=parallelogram",
            NodeData::Obstacle(o) => {
                if options.show_risk {
                    if let Some(a) = &o.assessment {
                        write!(label, " [{}×{}={}]", a.likelihood, a.consequence, a.effective()).expect("string write");
                    }
                }
                "shape=polygon, sides=4, skew=-0.4"
            }
            NodeData::Tactic(t) => {
                if t.label.is_some() {
                    label = format!("{} ({})", label, t.repo_ref);
                }
                "shape=hexagon"
            }
        };
        if options.show_ids {
            write!(label, "\n{}", v.id).expect("string write");
        }
        writeln!(w, "  {} [{attrs}, label={}];", quote(&v.id), quote(&label)).expect("string write");
    }

    for v in &views {
        let Some(parent) = &v.parent else {
            writeln!(w, "  {} -> {} [style=solid, arrowhead=empty];", quote(MIGRATION_NODE), quote(&v.id))
                .expect("string write");
            continue;
        };
        let parent_is_goal = matches!(model.data(parent), Some(NodeData::Goal(_)));
        let style = match (&v.data, parent_is_goal) {
            (NodeData::Goal(_), _) => "solid",
            (NodeData::Obstacle(_), true) => "dashed",
            (NodeData::Obstacle(_), false) => "solid",
            (NodeData::Tactic(_), _) => "dotted",
        };
        writeln!(w, "  {} -> {} [style={style}];", quote(&v.id), quote(parent)).expect("string write");
    }
    for v in &views {
        for o in &v.introduced {
            writeln!(w, "  {} -> {} [style=bold, label=\"introduces\"];", quote(&v.id), quote(o))
                .expect("string write");
        }
    }
    out.push_str("}\n");
    Ok(out)
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
