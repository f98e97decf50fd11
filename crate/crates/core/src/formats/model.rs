//! Trained forest files.
//!
//! A model is a versioned text document: a fixed header block, one
//! `meta` line per metadata entry, the per-feature importance row, then
//! each tree as a node count followed by its nodes in preorder.
//!
//! ```text
//! blindspot-forest 1
//! cue temporal
//! feature_count 12
//! trees 2
//! seed 42
//! meta criterion gini
//! importances 0 0 0 0 0 0 0 0 0 0.3312 0 0
//! tree 3
//! node split 9 0.5 1 2
//! node leaf 0
//! node leaf 1
//! tree 1
//! node leaf 0.5
//! ```
//!
//! Numbers print in shortest round-trip form, so parse → write → parse
//! reproduces thresholds and probabilities bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use super::{data_lines, field, FormatError};
use crate::classifier::{ForestModel, Node, Tree};
use crate::temporal::Cue;

const HEADER: &str = "blindspot-forest 1";

struct Cursor<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str), FormatError> {
        match self.lines.get(self.pos) {
            Some(&entry) => {
                self.pos += 1;
                Ok(entry)
            }
            None => Err(FormatError::Structure(format!(
                "model file ends early, expected {what}"
            ))),
        }
    }

    fn peek(&self) -> Option<&'a str> {
        self.lines.get(self.pos).map(|&(_, l)| l)
    }

    /// Consume a `<key> <rest>` line and return the rest.
    fn keyed(&mut self, key: &str) -> Result<(usize, &'a str), FormatError> {
        let (ln, line) = self.next(&format!("a \"{key}\" line"))?;
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .map(|rest| (ln, rest))
            .ok_or_else(|| {
                FormatError::malformed(ln, format!("expected \"{key} ...\", got {line:?}"))
            })
    }
}

pub fn parse_model(text: &str) -> Result<ForestModel, FormatError> {
    let mut cur = Cursor {
        lines: data_lines(text).collect(),
        pos: 0,
    };

    let (ln, header) = cur.next("the header line")?;
    if header != HEADER {
        return Err(FormatError::malformed(
            ln,
            format!("bad header {header:?}, expected {HEADER:?}"),
        ));
    }

    let (ln, raw) = cur.keyed("cue")?;
    let cue = Cue::from_str(raw).map_err(|e| FormatError::malformed(ln, e))?;
    let (ln, raw) = cur.keyed("feature_count")?;
    let feature_count: usize = field(raw, ln, "a feature count")?;
    let (ln, raw) = cur.keyed("trees")?;
    let n_trees: usize = field(raw, ln, "a tree count")?;
    let (ln, raw) = cur.keyed("seed")?;
    let seed: u64 = field(raw, ln, "a seed")?;

    let mut metadata = BTreeMap::new();
    while cur.peek().is_some_and(|l| l.starts_with("meta ")) {
        let (ln, rest) = cur.keyed("meta")?;
        let (key, value) = rest.split_once(' ').ok_or_else(|| {
            FormatError::malformed(ln, "meta line needs a key and a value")
        })?;
        if metadata.insert(key.to_owned(), value.to_owned()).is_some() {
            return Err(FormatError::malformed(
                ln,
                format!("duplicate meta key {key:?}"),
            ));
        }
    }

    let (ln, raw) = cur.keyed("importances")?;
    let importances: Vec<f64> = raw
        .split_whitespace()
        .map(|v| field(v, ln, "an importance value"))
        .collect::<Result<_, _>>()?;
    if importances.len() != feature_count {
        return Err(FormatError::malformed(
            ln,
            format!(
                "expected {feature_count} importance values, got {}",
                importances.len()
            ),
        ));
    }
    if importances.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(FormatError::malformed(
            ln,
            "importance values must be finite and non-negative",
        ));
    }

    let mut trees = Vec::with_capacity(n_trees);
    for _ in 0..n_trees {
        let (ln, raw) = cur.keyed("tree")?;
        let node_count: usize = field(raw, ln, "a node count")?;
        if node_count == 0 {
            return Err(FormatError::malformed(ln, "tree declares zero nodes"));
        }
        let mut nodes = Vec::with_capacity(node_count);
        for _ in 0..node_count {
            let (ln, rest) = cur.keyed("node")?;
            nodes.push(parse_node(rest, ln)?);
        }
        trees.push(Tree { nodes });
    }

    if let Some(extra) = cur.peek() {
        let (ln, _) = cur.lines[cur.pos];
        return Err(FormatError::malformed(
            ln,
            format!("unexpected content after the last tree: {extra:?}"),
        ));
    }

    let model = ForestModel {
        trees,
        cue,
        feature_count,
        seed,
        importances,
        metadata,
    };
    model
        .validate()
        .map_err(|e| FormatError::Structure(e.to_string()))?;
    Ok(model)
}

fn parse_node(rest: &str, ln: usize) -> Result<Node, FormatError> {
    let fields: Vec<&str> = rest.split_whitespace().collect();
    match fields.split_first() {
        Some((&"split", args)) if args.len() == 4 => Ok(Node::Split {
            feature: field(args[0], ln, "a feature index")?,
            threshold: field(args[1], ln, "a threshold")?,
            left: field(args[2], ln, "a left child index")?,
            right: field(args[3], ln, "a right child index")?,
        }),
        Some((&"leaf", args)) if args.len() == 1 => Ok(Node::Leaf {
            probability: field(args[0], ln, "a probability")?,
        }),
        _ => Err(FormatError::malformed(
            ln,
            format!("expected \"split f thr l r\" or \"leaf p\", got {rest:?}"),
        )),
    }
}

pub fn write_model(model: &ForestModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER}");
    let _ = writeln!(out, "cue {}", model.cue);
    let _ = writeln!(out, "feature_count {}", model.feature_count);
    let _ = writeln!(out, "trees {}", model.trees.len());
    let _ = writeln!(out, "seed {}", model.seed);
    for (key, value) in &model.metadata {
        let _ = writeln!(out, "meta {key} {value}");
    }
    let row: Vec<String> = model.importances.iter().map(f64::to_string).collect();
    let _ = writeln!(out, "importances {}", row.join(" "));
    for tree in &model.trees {
        let _ = writeln!(out, "tree {}", tree.nodes.len());
        for node in &tree.nodes {
            match *node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let _ = writeln!(out, "node split {feature} {threshold} {left} {right}");
                }
                Node::Leaf { probability } => {
                    let _ = writeln!(out, "node leaf {probability}");
                }
            }
        }
    }
    out
}
