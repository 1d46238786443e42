//! The goal-obstacle graph.
//!
//! Goals are AND-decomposed into sub-goals, obstructed by obstacles,
//! obstacles are refined into sub-obstacles and resolved by tactics. The
//! graph is stored as an arena of nodes, each owning an ordered list of
//! children. Public node ids are positional labels recomputed after every
//! structural change, so they are a pure function of the tree shape:
//!
//! * root goals are `g1`, `g2`, ..., sub-goals append `.k` (`g1.2`);
//! * an evidential obstacle carries its repository id (`O27`); a second
//!   instance of the same id in preorder becomes `O27-2`;
//! * the k-th domain child of obstacle `X` is `X_k` (`O1_3`, `O1_3_1`);
//! * a domain obstacle directly under a goal is novel: `N1`, `N2`, ... in
//!   preorder;
//! * a tactic is `<obstacle id>:<tactic id>` (`O28:T24`).

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::repository::{MigrationType, Repository};
use crate::risk::RiskAssessment;

/// Tactic id of the explicit "accept the risk" resolution.
pub const DO_NOTHING: &str = "T41";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) struct NodeKey(u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GoalPattern {
    Achieve,
    Maintain,
    Avoid,
}

impl GoalPattern {
    pub const ALL: [GoalPattern; 3] = [Self::Achieve, Self::Maintain, Self::Avoid];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Achieve => "Achieve",
            Self::Maintain => "Maintain",
            Self::Avoid => "Avoid",
        }
    }

    /// Splits a display name such as `Achieve [Reduced IT cost]`.
    pub fn split_display_name(text: &str) -> Option<(GoalPattern, &str)> {
        let (head, rest) = text.split_once(' ')?;
        let pattern: GoalPattern = head.parse().ok()?;
        let descriptor = rest.strip_prefix('[')?.strip_suffix(']')?;
        (!descriptor.trim().is_empty()).then_some((pattern, descriptor))
    }
}

impl fmt::Display for GoalPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GoalPattern {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| ModelError::UnknownPattern(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalNode {
    pub pattern: GoalPattern,
    pub descriptor: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repo_ref: Option<String>,
}

impl GoalNode {
    pub fn display_name(&self) -> String {
        format!("{} [{}]", self.pattern, self.descriptor)
    }
}

/// Where an obstacle node comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObstacleOrigin {
    /// Instantiated from the repository catalogue.
    Evidential { obstacle: String },
    /// Scenario specific, optionally refining a repository obstacle.
    Domain {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ancestor: Option<String>,
    },
}

impl ObstacleOrigin {
    pub fn repo_obstacle(&self) -> Option<&str> {
        match self {
            ObstacleOrigin::Evidential { obstacle } => Some(obstacle),
            ObstacleOrigin::Domain { ancestor } => ancestor.as_deref(),
        }
    }

    pub fn is_domain(&self) -> bool {
        matches!(self, ObstacleOrigin::Domain { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObstacleNode {
    pub name: String,
    pub origin: ObstacleOrigin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assessment: Option<RiskAssessment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TacticNode {
    pub repo_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeData {
    Goal(GoalNode),
    Obstacle(ObstacleNode),
    Tactic(TacticNode),
}

impl NodeData {
    pub fn kind(&self) -> NodeKind {
        match self {
            NodeData::Goal(_) => NodeKind::Goal,
            NodeData::Obstacle(_) => NodeKind::Obstacle,
            NodeData::Tactic(_) => NodeKind::Tactic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Goal,
    Obstacle,
    Tactic,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeKind::Goal => "goal",
            NodeKind::Obstacle => "obstacle",
            NodeKind::Tactic => "tactic",
        })
    }
}

/// Attachment request for [`GoalModel::attach_obstacle`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObstacleSpec {
    Evidential {
        obstacle: String,
        /// Replaces the catalogue name.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
    Domain {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ancestor: Option<String>,
    },
}

impl ObstacleSpec {
    pub fn evidential(obstacle: impl Into<String>) -> Self {
        ObstacleSpec::Evidential { obstacle: obstacle.into(), name: None }
    }

    pub fn domain(name: impl Into<String>) -> Self {
        ObstacleSpec::Domain { name: name.into(), ancestor: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("model name must not be empty")]
    EmptyName,
    #[error("goal descriptor must not be empty")]
    EmptyDescriptor,
    #[error("obstacle name must not be empty")]
    EmptyObstacleName,
    #[error("unknown goal pattern `{0}` (expected Achieve, Maintain or Avoid)")]
    UnknownPattern(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("node `{0}` is not a goal")]
    NotAGoal(String),
    #[error("node `{0}` is not an obstacle")]
    NotAnObstacle(String),
    #[error("node `{0}` is not a tactic")]
    NotATactic(String),
    #[error("node `{0}` is neither a goal nor an obstacle")]
    InvalidTarget(String),
    #[error("unknown repository goal `{0}`")]
    UnknownRepoGoal(String),
    #[error("unknown repository obstacle `{0}`")]
    UnknownRepoObstacle(String),
    #[error("unknown repository tactic `{0}`")]
    UnknownRepoTactic(String),
    #[error("{obstacle} is already attached to `{target}`")]
    DuplicateEvidential { target: String, obstacle: String },
    #[error("{tactic} is already attached to `{obstacle}`")]
    DuplicateTactic { obstacle: String, tactic: String },
    #[error("T41 (do nothing) requires a note explaining the acceptance")]
    DoNothingWithoutNote,
    #[error("domain ancestor {ancestor} does not match the obstacle chain of `{target}`")]
    InvalidAncestor { target: String, ancestor: String },
    #[error("linking `{tactic}` to `{obstacle}` would create a cycle")]
    WouldCycle { tactic: String, obstacle: String },
}

/// Broken structural rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationRule {
    Acyclicity,
    SingleParent,
    Attachment,
    EdgeKind,
    DanglingEdge,
    DuplicateId,
    DuplicateEvidential,
    DuplicateTactic,
    DoNothingNote,
    OverrideNote,
    EmptyDescriptor,
    DomainAncestor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: ViolationRule,
    /// Node id or `a -> b` edge.
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

#[derive(Debug, Clone)]
struct Node {
    id: String,
    data: NodeData,
    children: Vec<NodeKey>,
}

/// Flattened, key-free view of a node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeView {
    pub id: String,
    pub parent: Option<String>,
    pub display_name: String,
    #[serde(flatten)]
    pub data: NodeData,
    pub children: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub introduced: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct GoalModel {
    name: String,
    migration_type: MigrationType,
    nodes: BTreeMap<NodeKey, Node>,
    roots: Vec<NodeKey>,
    /// Tactic -> obstacles raised by applying it.
    introduced: BTreeMap<NodeKey, Vec<NodeKey>>,
    next_key: u32,
}

impl PartialEq for GoalModel {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.migration_type == other.migration_type && self.views() == other.views()
    }
}

impl GoalModel {
    pub fn new(name: &str, migration_type: MigrationType) -> Result<GoalModel, ModelError> {
        if name.trim().is_empty() {
            return Err(ModelError::EmptyName);
        }
        Ok(GoalModel {
            name: name.to_string(),
            migration_type,
            nodes: BTreeMap::new(),
            roots: Vec::new(),
            introduced: BTreeMap::new(),
            next_key: 0,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn migration_type(&self) -> MigrationType {
        self.migration_type
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.key_of(id).is_some()
    }

    pub fn data(&self, id: &str) -> Option<&NodeData> {
        self.key_of(id).map(|k| &self.nodes[&k].data)
    }

    pub fn goal(&self, id: &str) -> Option<&GoalNode> {
        match self.data(id)? {
            NodeData::Goal(g) => Some(g),
            _ => None,
        }
    }

    pub fn obstacle(&self, id: &str) -> Option<&ObstacleNode> {
        match self.data(id)? {
            NodeData::Obstacle(o) => Some(o),
            _ => None,
        }
    }

    pub fn tactic(&self, id: &str) -> Option<&TacticNode> {
        match self.data(id)? {
            NodeData::Tactic(t) => Some(t),
            _ => None,
        }
    }

    pub fn root_ids(&self) -> Vec<String> {
        self.roots.iter().filter_map(|k| self.nodes.get(k)).map(|n| n.id.clone()).collect()
    }

    pub fn children(&self, id: &str) -> Vec<String> {
        self.key_of(id)
            .map(|k| self.nodes[&k].children.iter().filter_map(|c| self.nodes.get(c)).map(|n| n.id.clone()).collect())
            .unwrap_or_default()
    }

    /// Structural parent; `None` for root goals and unknown ids.
    pub fn parent(&self, id: &str) -> Option<String> {
        let key = self.key_of(id)?;
        self.parent_key(key).map(|p| self.nodes[&p].id.clone())
    }

    /// Obstacles raised by applying a tactic node.
    pub fn introduced(&self, tactic: &str) -> Vec<String> {
        self.key_of(tactic)
            .and_then(|k| self.introduced.get(&k))
            .map(|v| v.iter().filter_map(|k| self.nodes.get(k)).map(|n| n.id.clone()).collect())
            .unwrap_or_default()
    }

    /// Display name: `Pattern [descriptor]` for goals, the name for
    /// obstacles, and the label or catalogue id for tactics.
    pub fn display_name(&self, id: &str) -> Option<String> {
        Some(match self.data(id)? {
            NodeData::Goal(g) => g.display_name(),
            NodeData::Obstacle(o) => o.name.clone(),
            NodeData::Tactic(t) => t.label.clone().unwrap_or_else(|| t.repo_ref.clone()),
        })
    }

    /// Ids of nodes reachable from the roots, in preorder.
    pub fn preorder(&self) -> Vec<String> {
        self.preorder_keys().into_iter().map(|k| self.nodes[&k].id.clone()).collect()
    }

    pub fn ids_of_kind(&self, kind: NodeKind) -> Vec<String> {
        self.preorder_keys()
            .into_iter()
            .map(|k| &self.nodes[&k])
            .filter(|n| n.data.kind() == kind)
            .map(|n| n.id.clone())
            .collect()
    }

    /// Every reachable node in preorder, without internal keys.
    pub fn views(&self) -> Vec<NodeView> {
        self.preorder_keys()
            .into_iter()
            .map(|k| {
                let node = &self.nodes[&k];
                NodeView {
                    id: node.id.clone(),
                    parent: self.parent_key(k).map(|p| self.nodes[&p].id.clone()),
                    display_name: self.display_name(&node.id).unwrap_or_default(),
                    data: node.data.clone(),
                    children: node.children.iter().filter_map(|c| self.nodes.get(c)).map(|n| n.id.clone()).collect(),
                    introduced: self.introduced(&node.id),
                }
            })
            .collect()
    }

    /// Adds a root goal (no parent) or an AND-child of `parent`.
    pub fn add_goal(
        &mut self,
        repo: &Repository,
        parent: Option<&str>,
        pattern: GoalPattern,
        descriptor: &str,
        repo_ref: Option<&str>,
    ) -> Result<String, ModelError> {
        if descriptor.trim().is_empty() {
            return Err(ModelError::EmptyDescriptor);
        }
        if let Some(r) = repo_ref {
            if repo.goal(r).is_none() {
                return Err(ModelError::UnknownRepoGoal(r.to_string()));
            }
        }
        let parent_key = match parent {
            Some(p) => {
                let key = self.key_of(p).ok_or_else(|| ModelError::UnknownNode(p.to_string()))?;
                if !matches!(self.nodes[&key].data, NodeData::Goal(_)) {
                    return Err(ModelError::NotAGoal(p.to_string()));
                }
                Some(key)
            }
            None => None,
        };
        let data = NodeData::Goal(GoalNode {
            pattern,
            descriptor: descriptor.to_string(),
            repo_ref: repo_ref.map(str::to_string),
        });
        let key = self.insert(data);
        match parent_key {
            Some(p) => self.nodes.get_mut(&p).expect("parent exists").children.push(key),
            None => self.roots.push(key),
        }
        self.renumber();
        Ok(self.nodes[&key].id.clone())
    }

    /// Attaches an obstacle obstructing a goal or refining an obstacle.
    pub fn attach_obstacle(&mut self, repo: &Repository, target: &str, spec: ObstacleSpec) -> Result<String, ModelError> {
        let target_key = self.key_of(target).ok_or_else(|| ModelError::UnknownNode(target.to_string()))?;
        let key = self.attach_obstacle_at(repo, target_key, spec)?;
        Ok(self.nodes[&key].id.clone())
    }

    pub(crate) fn attach_obstacle_at(
        &mut self,
        repo: &Repository,
        target: NodeKey,
        spec: ObstacleSpec,
    ) -> Result<NodeKey, ModelError> {
        let target_id = self.nodes.get(&target).map(|n| n.id.clone()).unwrap_or_default();
        let target_is_goal = match self.nodes.get(&target).map(|n| &n.data) {
            Some(NodeData::Goal(_)) => true,
            Some(NodeData::Obstacle(_)) => false,
            Some(NodeData::Tactic(_)) => return Err(ModelError::InvalidTarget(target_id)),
            None => return Err(ModelError::UnknownNode(target_id)),
        };
        let data = match spec {
            ObstacleSpec::Evidential { obstacle, name } => {
                let entry = repo
                    .obstacle(&obstacle)
                    .ok_or_else(|| ModelError::UnknownRepoObstacle(obstacle.clone()))?;
                let already = self.nodes[&target].children.iter().any(|c| {
                    matches!(&self.nodes[c].data, NodeData::Obstacle(ObstacleNode {
                        origin: ObstacleOrigin::Evidential { obstacle: o }, ..
                    }) if *o == obstacle)
                });
                if already {
                    return Err(ModelError::DuplicateEvidential { target: target_id, obstacle });
                }
                let name = match name {
                    Some(n) if n.trim().is_empty() => return Err(ModelError::EmptyObstacleName),
                    Some(n) => n,
                    None => entry.name.clone(),
                };
                ObstacleNode { name, origin: ObstacleOrigin::Evidential { obstacle }, assessment: None }
            }
            ObstacleSpec::Domain { name, ancestor } => {
                if name.trim().is_empty() {
                    return Err(ModelError::EmptyObstacleName);
                }
                if let Some(a) = &ancestor {
                    if repo.obstacle(a).is_none() {
                        return Err(ModelError::UnknownRepoObstacle(a.clone()));
                    }
                    if target_is_goal || !self.obstacle_chain_refs(target).contains(a.as_str()) {
                        return Err(ModelError::InvalidAncestor { target: target_id, ancestor: a.clone() });
                    }
                }
                ObstacleNode { name, origin: ObstacleOrigin::Domain { ancestor }, assessment: None }
            }
        };
        let key = self.insert(NodeData::Obstacle(data));
        self.nodes.get_mut(&target).expect("target exists").children.push(key);
        self.renumber();
        Ok(key)
    }

    /// Changes the display name of an obstacle; its origin never changes.
    pub fn rename_obstacle(&mut self, id: &str, name: &str) -> Result<(), ModelError> {
        if name.trim().is_empty() {
            return Err(ModelError::EmptyObstacleName);
        }
        let node = self.obstacle_mut(id)?;
        node.name = name.to_string();
        Ok(())
    }

    /// Attaches a resolution tactic to an obstacle.
    pub fn attach_tactic(
        &mut self,
        repo: &Repository,
        obstacle: &str,
        tactic: &str,
        label: Option<&str>,
        note: &str,
    ) -> Result<String, ModelError> {
        let key = self.key_of(obstacle).ok_or_else(|| ModelError::UnknownNode(obstacle.to_string()))?;
        if !matches!(self.nodes[&key].data, NodeData::Obstacle(_)) {
            return Err(ModelError::NotAnObstacle(obstacle.to_string()));
        }
        if repo.tactic(tactic).is_none() {
            return Err(ModelError::UnknownRepoTactic(tactic.to_string()));
        }
        if tactic == DO_NOTHING && note.trim().is_empty() {
            return Err(ModelError::DoNothingWithoutNote);
        }
        let duplicate = self.nodes[&key]
            .children
            .iter()
            .any(|c| matches!(&self.nodes[c].data, NodeData::Tactic(t) if t.repo_ref == tactic));
        if duplicate {
            return Err(ModelError::DuplicateTactic { obstacle: obstacle.to_string(), tactic: tactic.to_string() });
        }
        let data = NodeData::Tactic(TacticNode {
            repo_ref: tactic.to_string(),
            label: label.map(str::to_string),
            note: note.to_string(),
        });
        let child = self.insert(data);
        self.nodes.get_mut(&key).expect("obstacle exists").children.push(child);
        self.renumber();
        Ok(self.nodes[&child].id.clone())
    }

    /// Records that applying `tactic` raised `obstacle`.
    pub fn link_introduced(&mut self, tactic: &str, obstacle: &str) -> Result<(), ModelError> {
        let t = self.key_of(tactic).ok_or_else(|| ModelError::UnknownNode(tactic.to_string()))?;
        let o = self.key_of(obstacle).ok_or_else(|| ModelError::UnknownNode(obstacle.to_string()))?;
        if !matches!(self.nodes[&t].data, NodeData::Tactic(_)) {
            return Err(ModelError::NotATactic(tactic.to_string()));
        }
        if !matches!(self.nodes[&o].data, NodeData::Obstacle(_)) {
            return Err(ModelError::NotAnObstacle(obstacle.to_string()));
        }
        if self.reaches(o, t) {
            return Err(ModelError::WouldCycle { tactic: tactic.to_string(), obstacle: obstacle.to_string() });
        }
        let links = self.introduced.entry(t).or_default();
        if !links.contains(&o) {
            links.push(o);
        }
        Ok(())
    }

    /// Removes a node with everything it owns, including obstacles raised
    /// by removed tactics. Returns the number of removed nodes.
    pub fn remove_subtree(&mut self, id: &str) -> Result<usize, ModelError> {
        let start = self.key_of(id).ok_or_else(|| ModelError::UnknownNode(id.to_string()))?;
        let mut doomed = BTreeSet::new();
        let mut stack = vec![start];
        while let Some(k) = stack.pop() {
            if !self.nodes.contains_key(&k) || !doomed.insert(k) {
                continue;
            }
            stack.extend(self.nodes[&k].children.iter().copied());
            if let Some(links) = self.introduced.get(&k) {
                stack.extend(links.iter().copied());
            }
        }
        for k in &doomed {
            self.nodes.remove(k);
            self.introduced.remove(k);
        }
        self.roots.retain(|k| !doomed.contains(k));
        for node in self.nodes.values_mut() {
            node.children.retain(|k| !doomed.contains(k));
        }
        for links in self.introduced.values_mut() {
            links.retain(|k| !doomed.contains(k));
        }
        self.introduced.retain(|_, v| !v.is_empty());
        self.renumber();
        Ok(doomed.len())
    }

    /// Checks every structural invariant; an empty list means well formed.
    pub fn validate_structure(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut graph = DiGraph::<NodeKey, ()>::new();
        let index: HashMap<NodeKey, _> = self.nodes.keys().map(|k| (*k, graph.add_node(*k))).collect();
        let mut parents: HashMap<NodeKey, Vec<NodeKey>> = HashMap::new();
        for (k, node) in &self.nodes {
            for c in &node.children {
                match index.get(c) {
                    Some(ci) => {
                        graph.add_edge(index[k], *ci, ());
                        parents.entry(*c).or_default().push(*k);
                    }
                    None => out.push(Violation {
                        rule: ViolationRule::DanglingEdge,
                        subject: node.id.clone(),
                        message: "child edge points to a node that does not exist".into(),
                    }),
                }
            }
        }
        for (t, links) in &self.introduced {
            let tactic_id = self.nodes.get(t).map(|n| n.id.clone()).unwrap_or_else(|| "?".into());
            for o in links {
                match (index.get(t), index.get(o)) {
                    (Some(ti), Some(oi)) => {
                        graph.add_edge(*ti, *oi, ());
                        if !matches!(self.nodes[o].data, NodeData::Obstacle(_))
                            || !matches!(self.nodes[t].data, NodeData::Tactic(_))
                        {
                            out.push(Violation {
                                rule: ViolationRule::EdgeKind,
                                subject: format!("{tactic_id} -> {}", self.nodes[o].id),
                                message: "introduced links must go from a tactic to an obstacle".into(),
                            });
                        }
                    }
                    _ => out.push(Violation {
                        rule: ViolationRule::DanglingEdge,
                        subject: tactic_id.clone(),
                        message: "introduced link points to a node that does not exist".into(),
                    }),
                }
            }
        }

        let mut on_cycle = HashSet::new();
        for scc in tarjan_scc(&graph) {
            let cyclic = scc.len() > 1 || graph.contains_edge(scc[0], scc[0]);
            if !cyclic {
                continue;
            }
            let mut keys: Vec<NodeKey> = scc.iter().map(|i| graph[*i]).collect();
            keys.sort();
            on_cycle.extend(keys.iter().copied());
            let ids: Vec<&str> = keys.iter().map(|k| self.nodes[k].id.as_str()).collect();
            out.push(Violation {
                rule: ViolationRule::Acyclicity,
                subject: ids.join(" -> "),
                message: "nodes form a cycle".into(),
            });
        }

        let roots: HashSet<NodeKey> = self.roots.iter().copied().collect();
        let mut seen_ids: HashMap<&str, NodeKey> = HashMap::new();
        for (k, node) in &self.nodes {
            if let Some(prev) = seen_ids.insert(node.id.as_str(), *k) {
                if prev != *k {
                    out.push(violation(ViolationRule::DuplicateId, &node.id, "node id is not unique"));
                }
            }
            if on_cycle.contains(k) {
                continue;
            }
            let ps = parents.get(k).map(Vec::as_slice).unwrap_or(&[]);
            let is_root = roots.contains(k);
            let count = ps.len() + usize::from(is_root);
            let kind = node.data.kind();
            if count > 1 {
                out.push(violation(ViolationRule::SingleParent, &node.id, "node has more than one parent"));
            } else if count == 0 {
                let message = match kind {
                    NodeKind::Tactic => "tactic is not attached to any obstacle",
                    NodeKind::Obstacle => "obstacle neither obstructs a goal nor refines an obstacle",
                    NodeKind::Goal => "goal is neither a root nor a sub-goal",
                };
                out.push(violation(ViolationRule::Attachment, &node.id, message));
            } else if let Some(p) = ps.first() {
                let parent_kind = self.nodes[p].data.kind();
                let ok = matches!(
                    (parent_kind, kind),
                    (NodeKind::Goal, NodeKind::Goal)
                        | (NodeKind::Goal, NodeKind::Obstacle)
                        | (NodeKind::Obstacle, NodeKind::Obstacle)
                        | (NodeKind::Obstacle, NodeKind::Tactic)
                );
                if !ok {
                    out.push(Violation {
                        rule: ViolationRule::EdgeKind,
                        subject: format!("{} -> {}", self.nodes[p].id, node.id),
                        message: format!("a {kind} cannot be a child of a {parent_kind}"),
                    });
                }
            } else if kind != NodeKind::Goal {
                out.push(violation(ViolationRule::EdgeKind, &node.id, "only goals can be roots"));
            }

            match &node.data {
                NodeData::Goal(g) if g.descriptor.trim().is_empty() => {
                    out.push(violation(ViolationRule::EmptyDescriptor, &node.id, "goal descriptor is empty"));
                }
                NodeData::Obstacle(o) => {
                    if let Some(a) = &o.assessment {
                        if a.override_level.is_some() && a.note.trim().is_empty() {
                            out.push(violation(ViolationRule::OverrideNote, &node.id, "risk override without a note"));
                        }
                    }
                    if let ObstacleOrigin::Domain { ancestor: Some(a) } = &o.origin {
                        let valid = match ps.first() {
                            Some(p) if !is_root && matches!(self.nodes[p].data, NodeData::Obstacle(_)) => {
                                self.obstacle_chain_refs(*p).contains(a.as_str())
                            }
                            _ => false,
                        };
                        if !valid {
                            out.push(violation(
                                ViolationRule::DomainAncestor,
                                &node.id,
                                &format!("domain ancestor {a} is not in the refinement chain"),
                            ));
                        }
                    }
                }
                NodeData::Tactic(t) if t.repo_ref == DO_NOTHING && t.note.trim().is_empty() => {
                    out.push(violation(ViolationRule::DoNothingNote, &node.id, "T41 requires a note"));
                }
                _ => {}
            }

            let mut evidential = HashSet::new();
            let mut tactics = HashSet::new();
            for c in node.children.iter().filter_map(|c| self.nodes.get(c)) {
                match &c.data {
                    NodeData::Obstacle(ObstacleNode { origin: ObstacleOrigin::Evidential { obstacle }, .. })
                        if !evidential.insert(obstacle.as_str()) =>
                    {
                        out.push(violation(
                            ViolationRule::DuplicateEvidential,
                            &node.id,
                            &format!("{obstacle} attached twice"),
                        ));
                    }
                    NodeData::Tactic(t) if !tactics.insert(t.repo_ref.as_str()) => {
                        out.push(violation(
                            ViolationRule::DuplicateTactic,
                            &node.id,
                            &format!("{} attached twice", t.repo_ref),
                        ));
                    }
                    _ => {}
                }
            }
        }
        out
    }

    /// Adds a child edge without any checks. Exists so tests can build
    /// malformed graphs for the validator.
    #[doc(hidden)]
    pub fn force_link(&mut self, parent: &str, child: &str) -> Result<(), ModelError> {
        let p = self.key_of(parent).ok_or_else(|| ModelError::UnknownNode(parent.to_string()))?;
        let c = self.key_of(child).ok_or_else(|| ModelError::UnknownNode(child.to_string()))?;
        self.nodes.get_mut(&p).expect("exists").children.push(c);
        Ok(())
    }

    /// Removes every edge into `child` without any checks.
    #[doc(hidden)]
    pub fn force_detach(&mut self, child: &str) -> Result<(), ModelError> {
        let c = self.key_of(child).ok_or_else(|| ModelError::UnknownNode(child.to_string()))?;
        self.roots.retain(|k| *k != c);
        for node in self.nodes.values_mut() {
            node.children.retain(|k| *k != c);
        }
        Ok(())
    }

    pub(crate) fn obstacle_mut(&mut self, id: &str) -> Result<&mut ObstacleNode, ModelError> {
        let key = self.key_of(id).ok_or_else(|| ModelError::UnknownNode(id.to_string()))?;
        match &mut self.nodes.get_mut(&key).expect("exists").data {
            NodeData::Obstacle(o) => Ok(o),
            _ => Err(ModelError::NotAnObstacle(id.to_string())),
        }
    }

    pub(crate) fn key_of(&self, id: &str) -> Option<NodeKey> {
        self.nodes.iter().find(|(_, n)| n.id == id).map(|(k, _)| *k)
    }

    pub(crate) fn id_of(&self, key: NodeKey) -> Option<&str> {
        self.nodes.get(&key).map(|n| n.id.as_str())
    }

    /// Inserts a node under `parent` (or as a root) without semantic checks.
    /// Used when rebuilding a model from a persisted document.
    pub(crate) fn insert_raw(&mut self, parent: Option<NodeKey>, data: NodeData) -> NodeKey {
        let key = self.insert(data);
        match parent {
            Some(p) => self.nodes.get_mut(&p).expect("parent exists").children.push(key),
            None => self.roots.push(key),
        }
        self.renumber();
        key
    }

    pub(crate) fn link_raw(&mut self, tactic: NodeKey, obstacle: NodeKey) {
        self.introduced.entry(tactic).or_default().push(obstacle);
    }

    /// Repository obstacle ids along the chain from `key` up through its
    /// obstacle ancestors.
    pub(crate) fn obstacle_chain_refs(&self, key: NodeKey) -> HashSet<&str> {
        let mut refs = HashSet::new();
        let mut cur = Some(key);
        let mut guard = HashSet::new();
        while let Some(k) = cur {
            if !guard.insert(k) {
                break;
            }
            match self.nodes.get(&k).map(|n| &n.data) {
                Some(NodeData::Obstacle(o)) => {
                    if let Some(r) = o.origin.repo_obstacle() {
                        refs.insert(r);
                    }
                    cur = self.parent_key(k);
                }
                _ => break,
            }
        }
        refs
    }

    /// Nearest repository obstacle id for an obstacle node: its own origin,
    /// or the closest obstacle ancestor with one.
    pub fn nearest_repo_obstacle(&self, id: &str) -> Option<String> {
        let mut cur = self.key_of(id);
        let mut guard = HashSet::new();
        while let Some(k) = cur {
            if !guard.insert(k) {
                return None;
            }
            match &self.nodes.get(&k)?.data {
                NodeData::Obstacle(o) => {
                    if let Some(r) = o.origin.repo_obstacle() {
                        return Some(r.to_string());
                    }
                    cur = self.parent_key(k);
                }
                _ => return None,
            }
        }
        None
    }

    /// Closest goal above a node.
    pub fn nearest_goal(&self, id: &str) -> Option<String> {
        let mut cur = self.key_of(id).and_then(|k| self.parent_key(k));
        let mut guard = HashSet::new();
        while let Some(k) = cur {
            if !guard.insert(k) {
                return None;
            }
            if matches!(self.nodes[&k].data, NodeData::Goal(_)) {
                return Some(self.nodes[&k].id.clone());
            }
            cur = self.parent_key(k);
        }
        None
    }

    fn insert(&mut self, data: NodeData) -> NodeKey {
        let key = NodeKey(self.next_key);
        self.next_key += 1;
        self.nodes.insert(key, Node { id: String::new(), data, children: Vec::new() });
        key
    }

    fn parent_key(&self, key: NodeKey) -> Option<NodeKey> {
        self.nodes.iter().find(|(_, n)| n.children.contains(&key)).map(|(k, _)| *k)
    }

    fn reaches(&self, from: NodeKey, to: NodeKey) -> bool {
        let mut stack = vec![from];
        let mut seen = HashSet::new();
        while let Some(k) = stack.pop() {
            if k == to {
                return true;
            }
            if !seen.insert(k) {
                continue;
            }
            if let Some(n) = self.nodes.get(&k) {
                stack.extend(n.children.iter().copied());
            }
            if let Some(l) = self.introduced.get(&k) {
                stack.extend(l.iter().copied());
            }
        }
        false
    }

    fn preorder_keys(&self) -> Vec<NodeKey> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        let mut stack: Vec<NodeKey> = self.roots.iter().rev().copied().collect();
        while let Some(k) = stack.pop() {
            if !self.nodes.contains_key(&k) || !seen.insert(k) {
                continue;
            }
            out.push(k);
            stack.extend(self.nodes[&k].children.iter().rev().copied());
        }
        out
    }

    fn renumber(&mut self) {
        let mut labels = Vec::with_capacity(self.nodes.len());
        let mut evidential_seen: HashMap<&str, usize> = HashMap::new();
        let mut novel = 0usize;
        let mut seen = HashSet::new();
        // Children whose label depends on preorder position carry `None`.
        let mut stack: Vec<(NodeKey, Option<String>)> = self
            .roots
            .iter()
            .enumerate()
            .rev()
            .map(|(i, k)| (*k, Some(format!("g{}", i + 1))))
            .collect();
        while let Some((key, assigned)) = stack.pop() {
            let Some(node) = self.nodes.get(&key) else { continue };
            if !seen.insert(key) {
                continue;
            }
            let label = assigned.unwrap_or_else(|| match &node.data {
                NodeData::Obstacle(ObstacleNode { origin: ObstacleOrigin::Evidential { obstacle }, .. }) => {
                    let n = evidential_seen.entry(obstacle.as_str()).or_default();
                    *n += 1;
                    if *n == 1 {
                        obstacle.clone()
                    } else {
                        format!("{obstacle}-{n}")
                    }
                }
                _ => {
                    novel += 1;
                    format!("N{novel}")
                }
            });
            let parent_is_goal = matches!(node.data, NodeData::Goal(_));
            let mut sub_goals = 0;
            let mut domain = 0;
            let mut pending = Vec::with_capacity(node.children.len());
            for c in &node.children {
                let Some(child) = self.nodes.get(c) else { continue };
                let child_label = match &child.data {
                    NodeData::Goal(_) => {
                        sub_goals += 1;
                        Some(format!("{label}.{sub_goals}"))
                    }
                    NodeData::Obstacle(o) if o.origin.is_domain() && !parent_is_goal => {
                        domain += 1;
                        Some(format!("{label}_{domain}"))
                    }
                    NodeData::Obstacle(_) => None,
                    NodeData::Tactic(t) => Some(format!("{label}:{}", t.repo_ref)),
                };
                pending.push((*c, child_label));
            }
            stack.extend(pending.into_iter().rev());
            labels.push((key, label));
        }
        for (k, label) in labels {
            if let Some(n) = self.nodes.get_mut(&k) {
                n.id = label;
            }
        }
    }
}

fn violation(rule: ViolationRule, subject: &str, message: &str) -> Violation {
    Violation { rule, subject: subject.to_string(), message: message.to_string() }
}
