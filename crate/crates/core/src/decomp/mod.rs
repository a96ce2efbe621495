//! Policy decompositions: data model, validation, enumeration and pruning.
//!
//! Node fields refer to *group ids* of the owning [`ControlSystem`], so the same
//! machinery covers raw states/inputs and pseudo-state/pseudo-input groupings.

mod complexity;
mod count;
mod enumerate;
mod pareto;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::systems::ControlSystem;

pub use complexity::{estimate_compute_time, ComplexityEstimate, SolverBudget};
pub use count::{count_pure, surjection_count};
pub use enumerate::enumerate_pure;
pub use pareto::pareto_front;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecompError {
    #[error("integer overflow counting decompositions")]
    Overflow,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("enumeration would produce {count} decompositions, above the cap of {cap}")]
    EnumerationCap { count: u128, cap: usize },
    #[error("invalid decomposition: {0}")]
    Invalid(String),
    #[error("malformed decomposition document: {0}")]
    Parse(String),
}

/// One sub-policy: a set of input groups computed from a set of state groups,
/// optionally fed by inner sub-policies.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubPolicyNode {
    pub inputs: Vec<usize>,
    pub states: Vec<usize>,
    pub children: Vec<SubPolicyNode>,
}

impl SubPolicyNode {
    pub fn leaf(inputs: Vec<usize>, states: Vec<usize>) -> Self {
        SubPolicyNode {
            inputs,
            states,
            children: Vec::new(),
        }
    }

    /// Own states together with those of every inner sub-policy.
    pub fn effective_states(&self) -> Vec<usize> {
        let mut set: BTreeSet<usize> = self.states.iter().copied().collect();
        for c in &self.children {
            set.extend(c.effective_states());
        }
        set.into_iter().collect()
    }

    fn canonicalize(&mut self) {
        self.inputs.sort_unstable();
        self.states.sort_unstable();
        for c in &mut self.children {
            c.canonicalize();
        }
        self.children.sort();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecompositionKind {
    Decoupled,
    Cascaded,
    Mixed,
}

/// A forest of sub-policies jointly producing every input.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Decomposition {
    pub kind: DecompositionKind,
    pub roots: Vec<SubPolicyNode>,
}

impl Decomposition {
    /// Independent leaves, each `(input groups, state groups)`.
    pub fn decoupled(nodes: Vec<(Vec<usize>, Vec<usize>)>) -> Self {
        let mut d = Decomposition {
            kind: DecompositionKind::Decoupled,
            roots: nodes
                .into_iter()
                .map(|(i, s)| SubPolicyNode::leaf(i, s))
                .collect(),
        };
        d.canonicalize();
        d
    }

    /// A single cascade given innermost node first.
    pub fn cascaded(chain: Vec<(Vec<usize>, Vec<usize>)>) -> Self {
        let mut iter = chain.into_iter();
        let (i, s) = iter.next().expect("cascade needs at least one node");
        let mut node = SubPolicyNode::leaf(i, s);
        for (i, s) in iter {
            node = SubPolicyNode {
                inputs: i,
                states: s,
                children: vec![node],
            };
        }
        let mut d = Decomposition {
            kind: DecompositionKind::Cascaded,
            roots: vec![node],
        };
        d.canonicalize();
        d
    }

    /// The degenerate decomposition: one policy over every state and input.
    pub fn undecomposed(sys: &ControlSystem) -> Self {
        Decomposition {
            kind: DecompositionKind::Decoupled,
            roots: vec![SubPolicyNode::leaf(
                (0..sys.input_groups.len()).collect(),
                (0..sys.state_groups.len()).collect(),
            )],
        }
    }

    pub fn is_undecomposed(&self) -> bool {
        self.roots.len() == 1 && self.roots[0].children.is_empty()
    }

    /// Sorted index lists; decoupled roots ordered by their input groups.
    pub fn canonicalize(&mut self) {
        for r in &mut self.roots {
            r.canonicalize();
        }
        self.roots.sort();
    }

    /// Cascade nodes innermost first, if this is a single chain.
    pub fn chain(&self) -> Option<Vec<&SubPolicyNode>> {
        if self.roots.len() != 1 {
            return None;
        }
        let mut out = Vec::new();
        let mut node = &self.roots[0];
        loop {
            out.push(node);
            match node.children.len() {
                0 => break,
                1 => node = &node.children[0],
                _ => return None,
            }
        }
        out.reverse();
        Some(out)
    }

    /// Every node in post-order (inner sub-policies before the nodes they feed).
    pub fn nodes_post_order(&self) -> Vec<(String, &SubPolicyNode)> {
        fn walk<'a>(node: &'a SubPolicyNode, path: String, out: &mut Vec<(String, &'a SubPolicyNode)>) {
            for (i, c) in node.children.iter().enumerate() {
                walk(c, format!("{path}/child{i}"), out);
            }
            out.push((path, node));
        }
        let mut out = Vec::new();
        for (i, r) in self.roots.iter().enumerate() {
            walk(r, format!("root{i}"), &mut out);
        }
        out
    }

    /// Checks every structural invariant against `sys`.
    pub fn validate(&self, sys: &ControlSystem) -> Result<(), Vec<Violation>> {
        let v = validate::violations(self, sys);
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }

    /// Flattened, axis-level view used by the solvers, innermost nodes first.
    pub fn plan(&self, sys: &ControlSystem) -> Vec<NodePlan> {
        let ordered = self.nodes_post_order();
        let mut plans: Vec<NodePlan> = Vec::with_capacity(ordered.len());
        for (path, node) in &ordered {
            let child_paths: Vec<String> = (0..node.children.len())
                .map(|i| format!("{path}/child{i}"))
                .collect();
            let children: Vec<usize> = child_paths
                .iter()
                .map(|cp| plans.iter().position(|p| &p.path == cp).expect("post-order"))
                .collect();
            let mut descendants: BTreeSet<usize> = BTreeSet::new();
            for &c in &children {
                descendants.insert(c);
                descendants.extend(plans[c].descendants.iter().copied());
            }
            plans.push(NodePlan {
                path: path.clone(),
                input_groups: node.inputs.clone(),
                state_groups: node.states.clone(),
                inputs: sys.input_axes(&node.inputs),
                states: sys.state_axes(&node.effective_states()),
                children,
                descendants: descendants.into_iter().collect(),
            });
        }
        plans
    }

    /// Compact JSON form with stable key order and sorted index lists.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&wire::Wire::from(self)).expect("decomposition serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DecompError> {
        let w: wire::Wire =
            serde_json::from_str(text).map_err(|e| DecompError::Parse(e.to_string()))?;
        w.into_decomposition()
    }

    /// Human-readable policy notation, e.g. `pi[F](x,xdot,theta,thetadot; pi[tau](theta,thetadot))`.
    pub fn describe(&self, sys: &ControlSystem) -> String {
        fn node(n: &SubPolicyNode, sys: &ControlSystem) -> String {
            let inputs: Vec<&str> = n.inputs.iter().map(|&g| sys.input_groups[g].name.as_str()).collect();
            let states: Vec<&str> = n
                .effective_states()
                .iter()
                .map(|&g| sys.state_groups[g].name.as_str())
                .collect();
            let mut s = format!("pi[{}]({}", inputs.join(","), states.join(","));
            for c in &n.children {
                s.push_str("; ");
                s.push_str(&node(c, sys));
            }
            s.push(')');
            s
        }
        self.roots
            .iter()
            .map(|r| node(r, sys))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

impl Serialize for Decomposition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        wire::Wire::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Decomposition {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = wire::Wire::deserialize(d)?;
        w.into_decomposition().map_err(serde::de::Error::custom)
    }
}

/// Axis-level description of one node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodePlan {
    pub path: String,
    pub input_groups: Vec<usize>,
    pub state_groups: Vec<usize>,
    /// Input axes produced by this node, sorted.
    pub inputs: Vec<usize>,
    /// Effective state axes (own plus inner sub-policies'), sorted.
    pub states: Vec<usize>,
    /// Plan indices of direct inner sub-policies.
    pub children: Vec<usize>,
    /// Plan indices of every inner sub-policy, transitively.
    pub descendants: Vec<usize>,
}

impl NodePlan {
    pub fn is_cascaded(&self) -> bool {
        !self.children.is_empty()
    }
}

/// One violated invariant, located by node path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

mod validate {
    use super::*;

    pub(super) fn violations(d: &Decomposition, sys: &ControlSystem) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |path: &str, msg: &str| {
            out.push(Violation {
                path: path.to_string(),
                message: msg.to_string(),
            })
        };
        let n_in = sys.input_groups.len();
        let n_st = sys.state_groups.len();
        if d.roots.is_empty() {
            push("", "no sub-policies");
            return out;
        }
        let nodes = d.nodes_post_order();
        let mut input_seen = vec![false; n_in];
        let mut state_seen = vec![false; n_st];
        for (path, node) in &nodes {
            if node.inputs.is_empty() {
                push(path, "empty inputs");
            }
            for &g in &node.inputs {
                if g >= n_in {
                    push(path, "input group out of range");
                } else if input_seen[g] {
                    push(path, "duplicate input");
                } else {
                    input_seen[g] = true;
                }
            }
            for &g in &node.states {
                if g >= n_st {
                    push(path, "state group out of range");
                } else if state_seen[g] {
                    push(path, "duplicate state");
                } else {
                    state_seen[g] = true;
                }
            }
            if node.children.is_empty() && node.states.is_empty() {
                push(path, "leaf sub-policy without states");
            }
        }
        if input_seen.iter().any(|s| !s) {
            push("", "missing input");
        }
        if state_seen.iter().any(|s| !s) {
            push("", "missing state");
        }
        match d.kind {
            DecompositionKind::Decoupled => {
                for (i, r) in d.roots.iter().enumerate() {
                    if !r.children.is_empty() {
                        push(&format!("root{i}"), "decoupled sub-policy has inner sub-policies");
                    }
                }
            }
            DecompositionKind::Cascaded => match d.chain() {
                None => push("", "cascaded decomposition is not a single chain"),
                Some(chain) => {
                    if chain.len() < 2 {
                        push("root0", "cascade needs at least two sub-policies");
                    }
                    if chain[0].states.is_empty() {
                        let depth = chain.len() - 1;
                        let path = std::iter::once("root0".to_string())
                            .chain((0..depth).map(|_| "child0".to_string()))
                            .collect::<Vec<_>>()
                            .join("/");
                        push(&path, "empty first cascade group");
                    }
                }
            },
            DecompositionKind::Mixed => {}
        }
        out
    }
}

mod wire {
    use super::*;

    #[derive(Serialize, Deserialize)]
    pub(super) struct Leaf {
        inputs: Vec<usize>,
        states: Vec<usize>,
    }

    #[derive(Serialize, Deserialize)]
    pub(super) struct Node {
        inputs: Vec<usize>,
        states: Vec<usize>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        children: Vec<Node>,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
    pub(super) enum Wire {
        Decoupled { nodes: Vec<Leaf> },
        Cascaded { chain: Vec<Leaf> },
        Mixed { roots: Vec<Node> },
    }

    fn sorted(v: &[usize]) -> Vec<usize> {
        let mut v = v.to_vec();
        v.sort_unstable();
        v
    }

    fn to_node(n: &SubPolicyNode) -> Node {
        Node {
            inputs: sorted(&n.inputs),
            states: sorted(&n.states),
            children: n.children.iter().map(to_node).collect(),
        }
    }

    fn from_node(n: Node) -> SubPolicyNode {
        SubPolicyNode {
            inputs: n.inputs,
            states: n.states,
            children: n.children.into_iter().map(from_node).collect(),
        }
    }

    impl From<&Decomposition> for Wire {
        fn from(d: &Decomposition) -> Self {
            let leaf = |n: &SubPolicyNode| Leaf {
                inputs: sorted(&n.inputs),
                states: sorted(&n.states),
            };
            match d.kind {
                DecompositionKind::Decoupled if d.roots.iter().all(|r| r.children.is_empty()) => {
                    Wire::Decoupled {
                        nodes: d.roots.iter().map(leaf).collect(),
                    }
                }
                DecompositionKind::Cascaded if d.chain().is_some() => Wire::Cascaded {
                    chain: d.chain().unwrap().into_iter().map(leaf).collect(),
                },
                _ => Wire::Mixed {
                    roots: d.roots.iter().map(to_node).collect(),
                },
            }
        }
    }

    impl Wire {
        pub(super) fn into_decomposition(self) -> Result<Decomposition, DecompError> {
            Ok(match self {
                Wire::Decoupled { nodes } => {
                    if nodes.is_empty() {
                        return Err(DecompError::Parse("no nodes".into()));
                    }
                    Decomposition::decoupled(nodes.into_iter().map(|l| (l.inputs, l.states)).collect())
                }
                Wire::Cascaded { chain } => {
                    if chain.is_empty() {
                        return Err(DecompError::Parse("empty chain".into()));
                    }
                    Decomposition::cascaded(chain.into_iter().map(|l| (l.inputs, l.states)).collect())
                }
                Wire::Mixed { roots } => {
                    let mut d = Decomposition {
                        kind: DecompositionKind::Mixed,
                        roots: roots.into_iter().map(from_node).collect(),
                    };
                    d.canonicalize();
                    d
                }
            })
        }
    }
}
