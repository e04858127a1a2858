//! The anatomical relation graph: which organ pairs must nest, touch, or stay
//! apart, with per-edge thresholds and scene-global score weights.
//!
//! Text format, one directive per line, `#` starts a comment:
//!
//! ```text
//! class <id> <name>
//! containment <child> <parent> [tau_in]
//! adjacency <a> <b> [nu_contact]
//! exclusion <a> <b> [tau_hard]
//! weights <anchor> <overlap> <containment> <adjacency>
//! ```
//!
//! Edge endpoints may be class names or numeric ids.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TAU_IN: f64 = 0.30;
pub const DEFAULT_NU_CONTACT: u32 = 20;
pub const DEFAULT_TAU_HARD: f64 = 0.35;

/// Graph shipped with the crate for the 32-class phantom/TotalSegmentator-style layout.
pub const DEFAULT_GRAPH: &str = include_str!("../data/default_graph.txt");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Containment,
    Adjacency,
    Exclusion,
}

impl EdgeKind {
    pub fn keyword(self) -> &'static str {
        match self {
            EdgeKind::Containment => "containment",
            EdgeKind::Adjacency => "adjacency",
            EdgeKind::Exclusion => "exclusion",
        }
    }
}

/// Threshold carried by an edge; the variant always matches the edge kind.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    /// Minimum fraction of the placed organ inside the reference.
    TauIn(f64),
    /// Minimum number of boundary voxels of the placed organ inside the reference.
    NuContact(u32),
    /// Maximum IoU with the reference before the candidate is rejected.
    TauHard(f64),
}

/// Directed from the organ being placed (`a`) to the reference organ (`b`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationEdge {
    pub kind: EdgeKind,
    pub a: u8,
    pub b: u8,
    pub threshold: Threshold,
}

impl RelationEdge {
    pub fn containment(a: u8, b: u8, tau_in: f64) -> Self {
        Self { kind: EdgeKind::Containment, a, b, threshold: Threshold::TauIn(tau_in) }
    }

    pub fn adjacency(a: u8, b: u8, nu_contact: u32) -> Self {
        Self { kind: EdgeKind::Adjacency, a, b, threshold: Threshold::NuContact(nu_contact) }
    }

    pub fn exclusion(a: u8, b: u8, tau_hard: f64) -> Self {
        Self { kind: EdgeKind::Exclusion, a, b, threshold: Threshold::TauHard(tau_hard) }
    }

    pub fn tau_in(&self) -> Option<f64> {
        match self.threshold {
            Threshold::TauIn(v) => Some(v),
            _ => None,
        }
    }

    pub fn nu_contact(&self) -> Option<u32> {
        match self.threshold {
            Threshold::NuContact(v) => Some(v),
            _ => None,
        }
    }

    pub fn tau_hard(&self) -> Option<f64> {
        match self.threshold {
            Threshold::TauHard(v) => Some(v),
            _ => None,
        }
    }

    fn check(&self, num_classes: usize) -> std::result::Result<(), String> {
        if self.a == self.b {
            return Err(format!("self-edge on class {}", self.a));
        }
        for c in [self.a, self.b] {
            if c == 0 || c as usize > num_classes {
                return Err(format!("class {c} outside 1..={num_classes}"));
            }
        }
        match (self.kind, self.threshold) {
            (EdgeKind::Containment, Threshold::TauIn(v)) | (EdgeKind::Exclusion, Threshold::TauHard(v)) => {
                if !(v > 0.0 && v <= 1.0) {
                    return Err(format!("ratio threshold {v} outside (0, 1]"));
                }
            }
            (EdgeKind::Adjacency, Threshold::NuContact(v)) => {
                if v < 1 {
                    return Err("contact threshold must be >= 1".into());
                }
            }
            _ => return Err(format!("{} edge carries a mismatched threshold", self.kind.keyword())),
        }
        Ok(())
    }
}

/// Scene-global score weights.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub anchor: f64,
    pub overlap: f64,
    pub containment: f64,
    pub adjacency: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            anchor: 1.0,
            overlap: 1.0,
            containment: 1.0,
            adjacency: 0.8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelationGraph {
    num_classes: usize,
    names: BTreeMap<u8, String>,
    edges: Vec<RelationEdge>,
    pub weights: Weights,
}

impl RelationGraph {
    /// Builds and validates a graph from explicit edges.
    pub fn new(
        num_classes: usize,
        names: BTreeMap<u8, String>,
        edges: Vec<RelationEdge>,
        weights: Weights,
    ) -> Result<Self> {
        let mut g = Self {
            num_classes,
            names,
            edges: Vec::with_capacity(edges.len()),
            weights,
        };
        for (i, e) in edges.into_iter().enumerate() {
            g.push_edge(e).map_err(|msg| Error::Graph { line: i + 1, msg })?;
        }
        Ok(g)
    }

    /// A graph without edges and default weights.
    pub fn empty(num_classes: usize) -> Self {
        Self {
            num_classes,
            names: BTreeMap::new(),
            edges: Vec::new(),
            weights: Weights::default(),
        }
    }

    fn push_edge(&mut self, e: RelationEdge) -> std::result::Result<(), String> {
        e.check(self.num_classes)?;
        if self
            .edges
            .iter()
            .any(|o| o.kind == e.kind && o.a == e.a && o.b == e.b)
        {
            return Err(format!("duplicate {} edge {} {}", e.kind.keyword(), e.a, e.b));
        }
        if e.kind == EdgeKind::Containment && self.reaches(e.b, e.a) {
            return Err(format!("cyclic containment through {} and {}", e.a, e.b));
        }
        self.edges.push(e);
        Ok(())
    }

    /// Whether `from` reaches `to` along containment edges (child -> parent).
    fn reaches(&self, from: u8, to: u8) -> bool {
        let mut stack = vec![from];
        let mut seen = vec![false; self.num_classes + 1];
        while let Some(c) = stack.pop() {
            if c == to {
                return true;
            }
            if std::mem::replace(&mut seen[c as usize], true) {
                continue;
            }
            stack.extend(
                self.edges
                    .iter()
                    .filter(|e| e.kind == EdgeKind::Containment && e.a == c)
                    .map(|e| e.b),
            );
        }
        false
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn edges(&self) -> &[RelationEdge] {
        &self.edges
    }

    pub fn name(&self, class_id: u8) -> Option<&str> {
        self.names.get(&class_id).map(String::as_str)
    }

    pub fn names(&self) -> &BTreeMap<u8, String> {
        &self.names
    }

    /// Edges of `kind` whose placed organ is `class_id`, in declaration order.
    pub fn edges_for(&self, class_id: u8, kind: EdgeKind) -> Vec<RelationEdge> {
        self.edges
            .iter()
            .filter(|e| e.kind == kind && e.a == class_id)
            .copied()
            .collect()
    }

    /// Classes that `class_id` must not overlap, whichever direction the edge
    /// was declared in, with their thresholds.
    pub fn exclusions_of(&self, class_id: u8) -> Vec<(u8, f64)> {
        self.edges
            .iter()
            .filter(|e| e.kind == EdgeKind::Exclusion)
            .filter_map(|e| {
                let tau = e.tau_hard()?;
                if e.a == class_id {
                    Some((e.b, tau))
                } else if e.b == class_id {
                    Some((e.a, tau))
                } else {
                    None
                }
            })
            .collect()
    }

    /// Applies scene-wide threshold overrides to every edge of the matching kind.
    pub fn with_threshold_overrides(
        &self,
        tau_in: Option<f64>,
        nu_contact: Option<u32>,
        tau_hard: Option<f64>,
    ) -> Result<Self> {
        let mut g = self.clone();
        for e in &mut g.edges {
            e.threshold = match (e.threshold, tau_in, nu_contact, tau_hard) {
                (Threshold::TauIn(_), Some(v), _, _) => Threshold::TauIn(v),
                (Threshold::NuContact(_), _, Some(v), _) => Threshold::NuContact(v),
                (Threshold::TauHard(_), _, _, Some(v)) => Threshold::TauHard(v),
                (t, ..) => t,
            };
            e.check(g.num_classes).map_err(Error::Config)?;
        }
        Ok(g)
    }

    /// Parses the line-oriented format. `num_classes` bounds the class ids.
    pub fn parse(text: &str, num_classes: usize) -> Result<Self> {
        let mut g = Self::empty(num_classes);
        let mut by_name: BTreeMap<String, u8> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |msg: String| Error::Graph { line: line_no, msg };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let tok: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(format!("non-numeric value {s:?}")))
            };
            match tok[0] {
                "class" => {
                    if tok.len() != 3 {
                        return Err(err("expected `class <id> <name>`".into()));
                    }
                    let id: u8 = tok[1]
                        .parse()
                        .map_err(|_| err(format!("bad class id {:?}", tok[1])))?;
                    if id == 0 || id as usize > num_classes {
                        return Err(err(format!("class id {id} outside 1..={num_classes}")));
                    }
                    if tok[2].parse::<u8>().is_ok() {
                        return Err(err(format!("class name {:?} must not be numeric", tok[2])));
                    }
                    if g.names.contains_key(&id) || by_name.contains_key(tok[2]) {
                        return Err(err(format!("class {} declared twice", tok[2])));
                    }
                    g.names.insert(id, tok[2].to_string());
                    by_name.insert(tok[2].to_string(), id);
                }
                "weights" => {
                    if tok.len() != 5 {
                        return Err(err("expected `weights <anchor> <overlap> <containment> <adjacency>`".into()));
                    }
                    g.weights = Weights {
                        anchor: num(tok[1])?,
                        overlap: num(tok[2])?,
                        containment: num(tok[3])?,
                        adjacency: num(tok[4])?,
                    };
                }
                kw @ ("containment" | "adjacency" | "exclusion") => {
                    if !(3..=4).contains(&tok.len()) {
                        return Err(err(format!("expected `{kw} <a> <b> [threshold]`")));
                    }
                    let resolve = |s: &str| -> Result<u8> {
                        if let Ok(id) = s.parse::<u8>() {
                            return Ok(id);
                        }
                        by_name
                            .get(s)
                            .copied()
                            .ok_or_else(|| err(format!("unknown class name {s:?}")))
                    };
                    let (a, b) = (resolve(tok[1])?, resolve(tok[2])?);
                    let thr = tok.get(3).map(|s| num(s)).transpose()?;
                    let edge = match kw {
                        "containment" => RelationEdge::containment(a, b, thr.unwrap_or(DEFAULT_TAU_IN)),
                        "exclusion" => RelationEdge::exclusion(a, b, thr.unwrap_or(DEFAULT_TAU_HARD)),
                        _ => {
                            let nu = match thr {
                                None => DEFAULT_NU_CONTACT,
                                Some(v) if v.fract() == 0.0 && v >= 0.0 && v <= u32::MAX as f64 => v as u32,
                                Some(v) => return Err(err(format!("contact threshold {v} is not a voxel count"))),
                            };
                            RelationEdge::adjacency(a, b, nu)
                        }
                    };
                    g.push_edge(edge).map_err(err)?;
                }
                other => return Err(err(format!("unknown directive {other:?}"))),
            }
        }
        Ok(g)
    }

    /// Serializes with every threshold explicit; `parse` inverts it exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (id, name) in &self.names {
            writeln!(s, "class {id} {name}").unwrap();
        }
        let w = self.weights;
        writeln!(
            s,
            "weights {:?} {:?} {:?} {:?}",
            w.anchor, w.overlap, w.containment, w.adjacency
        )
        .unwrap();
        let label = |c: u8| self.names.get(&c).cloned().unwrap_or_else(|| c.to_string());
        for e in &self.edges {
            let thr = match e.threshold {
                Threshold::TauIn(v) | Threshold::TauHard(v) => format!("{v:?}"),
                Threshold::NuContact(v) => v.to_string(),
            };
            writeln!(s, "{} {} {} {thr}", e.kind.keyword(), label(e.a), label(e.b)).unwrap();
        }
        s
    }
}

/// Parses and validates a relation-graph document for `num_classes` classes.
pub fn load_graph(text: &str, num_classes: usize) -> Result<RelationGraph> {
    RelationGraph::parse(text, num_classes)
}
