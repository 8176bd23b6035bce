//! Hierarchical context tree.
//!
//! The root stands for "everything"; each level below refines the context by
//! one feature, system-level features (tour, round, ...) first and user-cohort
//! features last. Every leaf sits at the full schema depth. Nodes are created
//! lazily the first time a context passing through them is resolved with
//! materialization on, and each node keeps per-arm sample counts that always
//! equal the sum over its children.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{HcubError, Result};
use crate::model::{ActionSpace, Context};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LevelRole {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaLevel {
    pub name: String,
    pub role: LevelRole,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<SchemaLevel>", into = "Vec<SchemaLevel>")]
pub struct TreeSchema {
    levels: Vec<SchemaLevel>,
}

impl TreeSchema {
    pub fn new(levels: Vec<SchemaLevel>) -> Result<Self> {
        if levels.is_empty() {
            return Err(HcubError::invalid("tree schema needs at least one level"));
        }
        for (i, level) in levels.iter().enumerate() {
            if level.name.is_empty() {
                return Err(HcubError::invalid(format!("level {i} has an empty name")));
            }
            if levels[..i].iter().any(|l| l.name == level.name) {
                return Err(HcubError::invalid(format!(
                    "duplicate level name `{}`",
                    level.name
                )));
            }
        }
        if levels
            .windows(2)
            .any(|w| w[0].role == LevelRole::User && w[1].role == LevelRole::System)
        {
            return Err(HcubError::invalid(
                "system-level features must precede user-level features",
            ));
        }
        Ok(Self { levels })
    }

    /// Convenience constructor: the first `system` names get the system role.
    pub fn from_names(names: &[&str], system: usize) -> Result<Self> {
        Self::new(
            names
                .iter()
                .enumerate()
                .map(|(i, n)| SchemaLevel {
                    name: (*n).to_string(),
                    role: if i < system {
                        LevelRole::System
                    } else {
                        LevelRole::User
                    },
                })
                .collect(),
        )
    }

    pub fn levels(&self) -> &[SchemaLevel] {
        &self.levels
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn check_context(&self, context: &Context) -> Result<()> {
        if context.len() != self.depth()
            || context
                .level_names()
                .zip(self.levels.iter())
                .any(|(name, level)| name != level.name)
        {
            let expected: Vec<&str> = self.levels.iter().map(|l| l.name.as_str()).collect();
            let got: Vec<&str> = context.level_names().collect();
            return Err(HcubError::invalid(format!(
                "context levels {got:?} do not match schema {expected:?}"
            )));
        }
        Ok(())
    }

    /// Builds a context from raw values in schema order.
    pub fn context<S: AsRef<str>>(&self, values: &[S]) -> Result<Context> {
        if values.len() != self.depth() {
            return Err(HcubError::invalid(format!(
                "expected {} feature values, got {}",
                self.depth(),
                values.len()
            )));
        }
        Ok(Context::new(
            self.levels
                .iter()
                .zip(values)
                .map(|(l, v)| (l.name.clone(), v.as_ref().to_string())),
        ))
    }
}

impl TryFrom<Vec<SchemaLevel>> for TreeSchema {
    type Error = HcubError;

    fn try_from(levels: Vec<SchemaLevel>) -> Result<Self> {
        TreeSchema::new(levels)
    }
}

impl From<TreeSchema> for Vec<SchemaLevel> {
    fn from(schema: TreeSchema) -> Self {
        schema.levels
    }
}

/// A node, named by its path of feature values from the root. The empty path is the root.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(Vec<String>);

impl NodeId {
    pub fn root() -> Self {
        NodeId(Vec::new())
    }

    pub fn new<S: Into<String>>(path: impl IntoIterator<Item = S>) -> Self {
        NodeId(path.into_iter().map(Into::into).collect())
    }

    pub fn path(&self) -> &[String] {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn parent(&self) -> Option<NodeId> {
        if self.0.is_empty() {
            None
        } else {
            Some(NodeId(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn child(&self, value: impl Into<String>) -> NodeId {
        let mut path = self.0.clone();
        path.push(value.into());
        NodeId(path)
    }

    /// All prefixes from the root down to (and including) this node.
    pub fn ancestry(&self) -> Vec<NodeId> {
        (0..=self.0.len()).map(|d| NodeId(self.0[..d].to_vec())).collect()
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            f.write_str("/")
        } else {
            f.write_str(&self.0.join("/"))
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    id: NodeId,
    parent: Option<usize>,
    children: Vec<usize>,
    counts: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct ContextTree {
    schema: TreeSchema,
    actions: ActionSpace,
    nodes: Vec<Node>,
    index: HashMap<NodeId, usize>,
}

impl ContextTree {
    /// A tree holding only the root.
    pub fn new(schema: TreeSchema, actions: ActionSpace) -> Self {
        let root = Node {
            id: NodeId::root(),
            parent: None,
            children: Vec::new(),
            counts: vec![0; actions.size()],
        };
        let mut index = HashMap::new();
        index.insert(NodeId::root(), 0);
        Self {
            schema,
            actions,
            nodes: vec![root],
            index,
        }
    }

    pub fn schema(&self) -> &TreeSchema {
        &self.schema
    }

    pub fn actions(&self) -> &ActionSpace {
        &self.actions
    }

    pub fn depth(&self) -> usize {
        self.schema.depth()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, node: &NodeId) -> bool {
        self.index.contains_key(node)
    }

    pub fn is_leaf(&self, node: &NodeId) -> bool {
        node.depth() == self.depth()
    }

    /// Root-to-leaf path for `context`. With `materialize` set, missing nodes
    /// are created; otherwise a missing node is an unknown-context error.
    pub fn resolve_path(&mut self, context: &Context, materialize: bool) -> Result<Vec<NodeId>> {
        if !materialize {
            return self.lookup_path(context);
        }
        self.schema.check_context(context)?;
        let mut current = 0;
        let mut path = vec![NodeId::root()];
        for value in context.values() {
            let id = self.nodes[current].id.child(value);
            current = match self.index.get(&id) {
                Some(&i) => i,
                None => self.insert_child(current, id.clone()),
            };
            path.push(id);
        }
        Ok(path)
    }

    /// Read-only variant of [`resolve_path`](Self::resolve_path).
    pub fn lookup_path(&self, context: &Context) -> Result<Vec<NodeId>> {
        self.schema.check_context(context)?;
        let mut path = vec![NodeId::root()];
        for value in context.values() {
            let id = path.last().expect("non-empty").child(value);
            if !self.index.contains_key(&id) {
                return Err(HcubError::UnknownContext(format!("no node {id} for {context}")));
            }
            path.push(id);
        }
        Ok(path)
    }

    fn insert_child(&mut self, parent: usize, id: NodeId) -> usize {
        let slot = self.nodes.len();
        self.nodes.push(Node {
            id: id.clone(),
            parent: Some(parent),
            children: Vec::new(),
            counts: vec![0; self.actions.size()],
        });
        self.nodes[parent].children.push(slot);
        self.index.insert(id, slot);
        slot
    }

    /// Adds one sample for `action` at every node on the context's path and
    /// returns the leaf.
    pub fn record_sample(&mut self, context: &Context, action: usize) -> Result<NodeId> {
        if action >= self.actions.size() {
            return Err(HcubError::invalid(format!("action index {action} out of range")));
        }
        let path = self.resolve_path(context, true)?;
        for id in &path {
            let slot = self.index[id];
            self.nodes[slot].counts[action] += 1;
        }
        Ok(path.last().cloned().expect("path includes root"))
    }

    fn slot(&self, node: &NodeId) -> Result<usize> {
        self.index
            .get(node)
            .copied()
            .ok_or_else(|| HcubError::UnknownContext(format!("no node {node}")))
    }

    pub fn count(&self, node: &NodeId, action: usize) -> u64 {
        self.index
            .get(node)
            .and_then(|&s| self.nodes[s].counts.get(action).copied())
            .unwrap_or(0)
    }

    pub fn counts(&self, node: &NodeId) -> Option<&[u64]> {
        self.index.get(node).map(|&s| self.nodes[s].counts.as_slice())
    }

    pub fn total_count(&self, node: &NodeId) -> u64 {
        self.counts(node).map(|c| c.iter().sum()).unwrap_or(0)
    }

    pub fn children(&self, node: &NodeId) -> Result<Vec<&NodeId>> {
        let slot = self.slot(node)?;
        Ok(self.nodes[slot]
            .children
            .iter()
            .map(|&c| &self.nodes[c].id)
            .collect())
    }

    pub fn parent(&self, node: &NodeId) -> Option<&NodeId> {
        self.index
            .get(node)
            .and_then(|&s| self.nodes[s].parent)
            .map(|p| &self.nodes[p].id)
    }

    /// Materialized leaves in creation order.
    pub fn leaves(&self) -> impl Iterator<Item = &NodeId> {
        let depth = self.depth();
        self.nodes
            .iter()
            .map(|n| &n.id)
            .filter(move |id| id.depth() == depth)
    }

    /// Breadth-first from the root; every node comes after its parent.
    pub fn iter_top_down(&self) -> Vec<&NodeId> {
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut queue = std::collections::VecDeque::from([0usize]);
        while let Some(slot) = queue.pop_front() {
            order.push(&self.nodes[slot].id);
            queue.extend(self.nodes[slot].children.iter().copied());
        }
        order
    }

    /// Reverse of the top-down order; every node comes before its parent.
    pub fn iter_bottom_up(&self) -> Vec<&NodeId> {
        let mut order = self.iter_top_down();
        order.reverse();
        order
    }

    /// Verifies prefix closure and that internal counts equal the sum of child counts.
    pub fn check_consistency(&self) -> Result<()> {
        for node in &self.nodes {
            if let Some(parent) = node.id.parent() {
                if !self.index.contains_key(&parent) {
                    return Err(HcubError::internal(format!("{} has no parent", node.id)));
                }
            }
            if node.id.depth() < self.depth() && !node.children.is_empty() {
                for action in 0..self.actions.size() {
                    let sum: u64 = node
                        .children
                        .iter()
                        .map(|&c| self.nodes[c].counts[action])
                        .sum();
                    if sum != node.counts[action] {
                        return Err(HcubError::internal(format!(
                            "{} action {action}: count {} != child sum {sum}",
                            node.id, node.counts[action]
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}
