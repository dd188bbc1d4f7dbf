//! Rooted metric trees.
//!
//! A [`RootedTree`] is an immutable, validated tree with named nodes, positive
//! arc lengths (travel time at unit speed) and a designated root. Node ids are
//! assigned canonically: children are ordered by name and ids follow a preorder
//! walk from the root, so two trees built from the same arcs compare equal.
//!
//! [`RootedTree::normalize`] produces the binary form the game is played on:
//! nodes with more than two children are split into chains of binary nodes
//! joined by zero-length arcs, and non-root nodes with a single child are
//! contracted away.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Opaque handle to a node of one particular [`RootedTree`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }

    pub(crate) fn from_index(index: usize) -> Self {
        NodeId(index)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TreeError {
    #[error("malformed tree file: {0}")]
    Syntax(String),
    #[error("tree has no arcs")]
    Empty,
    #[error("arc {index} has an empty node name")]
    EmptyName { index: usize },
    #[error("arc {a}-{a} is a self-loop")]
    SelfLoop { a: String },
    #[error("duplicate arc {a}-{b}")]
    DuplicateArc { a: String, b: String },
    #[error("arc {a}-{b} has length {length}; user arcs must be finite and strictly positive")]
    BadLength { a: String, b: String, length: f64 },
    #[error("root {0:?} does not appear in any arc")]
    UnknownRoot(String),
    #[error("node {0:?} is not connected to the root")]
    Disconnected(String),
    #[error("arc {a}-{b} closes a cycle")]
    Cycle { a: String, b: String },
    #[error("unknown node {0:?}")]
    UnknownNode(String),
}

/// On-disk tree description: `{"root": "O", "edges": [["O", "A", 1.0], ...]}`.
///
/// Edge orientation is informational; connectivity alone defines the tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeFile {
    pub root: String,
    pub edges: Vec<(String, String, f64)>,
}

/// Parses the JSON tree format. No normalization is applied.
pub fn parse_tree(text: &str) -> Result<RootedTree, TreeError> {
    let file: TreeFile =
        serde_json::from_str(text).map_err(|e| TreeError::Syntax(e.to_string()))?;
    RootedTree::from_file(&file)
}

/// Borrowed summary of one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeView<'a> {
    pub id: NodeId,
    pub name: &'a str,
    pub parent: Option<NodeId>,
    pub children: &'a [NodeId],
    pub is_leaf: bool,
    /// Distance from the root.
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootedTree {
    names: Vec<String>,
    lookup: HashMap<String, NodeId>,
    parent: Vec<Option<NodeId>>,
    /// Length of the arc from a node up to its parent; zero for the root.
    arc_len: Vec<f64>,
    /// Whether the arc up to the parent was inserted by binarization.
    inserted: Vec<bool>,
    children: Vec<Vec<NodeId>>,
    depth: Vec<f64>,
    subtree_len: Vec<f64>,
}

/// Arc oriented away from the root.
#[derive(Debug, Clone)]
struct DownArc {
    parent: String,
    child: String,
    length: f64,
    inserted: bool,
}

impl RootedTree {
    pub fn from_file(file: &TreeFile) -> Result<Self, TreeError> {
        Self::from_edges(&file.root, file.edges.iter().map(|(a, b, l)| (a.as_str(), b.as_str(), *l)))
    }

    /// Builds a tree from undirected arcs `(a, b, length)`.
    pub fn from_edges<'a, I>(root: &str, edges: I) -> Result<Self, TreeError>
    where
        I: IntoIterator<Item = (&'a str, &'a str, f64)>,
    {
        let edges: Vec<(&str, &str, f64)> = edges.into_iter().collect();
        if edges.is_empty() {
            return Err(TreeError::Empty);
        }

        let mut seen = HashSet::new();
        let mut adjacency: BTreeMap<&str, Vec<(usize, &str, f64)>> = BTreeMap::new();
        for (index, &(a, b, length)) in edges.iter().enumerate() {
            if a.is_empty() || b.is_empty() {
                return Err(TreeError::EmptyName { index });
            }
            if a == b {
                return Err(TreeError::SelfLoop { a: a.to_owned() });
            }
            if !(length.is_finite() && length > 0.0) {
                return Err(TreeError::BadLength { a: a.to_owned(), b: b.to_owned(), length });
            }
            let key = if a < b { (a, b) } else { (b, a) };
            if !seen.insert(key) {
                return Err(TreeError::DuplicateArc { a: a.to_owned(), b: b.to_owned() });
            }
            adjacency.entry(a).or_default().push((index, b, length));
            adjacency.entry(b).or_default().push((index, a, length));
        }
        if !adjacency.contains_key(root) {
            return Err(TreeError::UnknownRoot(root.to_owned()));
        }

        // Breadth-first orientation away from the root.
        let mut via: HashMap<&str, Option<usize>> = HashMap::new();
        via.insert(root, None);
        let mut queue = VecDeque::from([root]);
        let mut arcs = Vec::with_capacity(edges.len());
        while let Some(node) = queue.pop_front() {
            let arrived_by = via[node];
            for &(index, next, length) in &adjacency[node] {
                if Some(index) == arrived_by {
                    continue;
                }
                if via.contains_key(next) {
                    let (a, b, _) = edges[index];
                    return Err(TreeError::Cycle { a: a.to_owned(), b: b.to_owned() });
                }
                via.insert(next, Some(index));
                queue.push_back(next);
                arcs.push(DownArc {
                    parent: node.to_owned(),
                    child: next.to_owned(),
                    length,
                    inserted: false,
                });
            }
        }
        if let Some(stray) = adjacency.keys().find(|name| !via.contains_key(*name)) {
            return Err(TreeError::Disconnected((*stray).to_owned()));
        }
        Ok(Self::assemble(root.to_owned(), arcs))
    }

    /// Canonical construction from arcs already oriented away from the root.
    fn assemble(root: String, arcs: Vec<DownArc>) -> Self {
        let mut kids: HashMap<String, Vec<DownArc>> = HashMap::new();
        for arc in arcs {
            kids.entry(arc.parent.clone()).or_default().push(arc);
        }
        for list in kids.values_mut() {
            list.sort_by(|x, y| x.child.cmp(&y.child));
        }

        let n = kids.values().map(Vec::len).sum::<usize>() + 1;
        let mut tree = RootedTree {
            names: Vec::with_capacity(n),
            lookup: HashMap::with_capacity(n),
            parent: Vec::with_capacity(n),
            arc_len: Vec::with_capacity(n),
            inserted: Vec::with_capacity(n),
            children: Vec::with_capacity(n),
            depth: Vec::with_capacity(n),
            subtree_len: vec![0.0; n],
        };

        // Preorder id assignment; the stack holds (name, parent, arc length, inserted).
        let mut stack = vec![(root, None::<NodeId>, 0.0, false)];
        while let Some((name, parent, length, inserted)) = stack.pop() {
            let id = NodeId(tree.names.len());
            tree.depth.push(parent.map_or(0.0, |p| tree.depth[p.0] + length));
            tree.lookup.insert(name.clone(), id);
            tree.parent.push(parent);
            tree.arc_len.push(length);
            tree.inserted.push(inserted);
            tree.children.push(Vec::new());
            if let Some(p) = parent {
                tree.children[p.0].push(id);
            }
            if let Some(list) = kids.remove(&name) {
                for arc in list.into_iter().rev() {
                    stack.push((arc.child, Some(id), arc.length, arc.inserted));
                }
            }
            tree.names.push(name);
        }

        for v in (0..tree.names.len()).rev() {
            if let Some(p) = tree.parent[v] {
                tree.subtree_len[p.0] += tree.arc_len[v] + tree.subtree_len[v];
            }
        }
        tree
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn id(&self, name: &str) -> Result<NodeId, TreeError> {
        self.lookup.get(name).copied().ok_or_else(|| TreeError::UnknownNode(name.to_owned()))
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.names[id.0]
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.parent[id.0]
    }

    /// Children in canonical (name) order.
    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.children[id.0]
    }

    /// Length of the arc joining `id` to its parent (zero at the root).
    pub fn arc_length(&self, id: NodeId) -> f64 {
        self.arc_len[id.0]
    }

    /// True when the arc above `id` was inserted by [`RootedTree::normalize`].
    pub fn is_inserted(&self, id: NodeId) -> bool {
        self.inserted[id.0]
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.children[id.0].is_empty()
    }

    /// Distance from the root.
    pub fn depth(&self, id: NodeId) -> f64 {
        self.depth[id.0]
    }

    /// Sum of arc lengths strictly below `id`.
    pub fn subtree_length(&self, id: NodeId) -> f64 {
        self.subtree_len[id.0]
    }

    /// Length of the branch hanging below `id`'s parent through `id`: the arc
    /// into `id` plus everything under it.
    pub fn branch_length(&self, id: NodeId) -> f64 {
        self.arc_len[id.0] + self.subtree_len[id.0]
    }

    /// Total length of the tree.
    pub fn total_length(&self) -> f64 {
        self.subtree_len[0]
    }

    /// All node ids in preorder (parents before children).
    pub fn preorder(&self) -> impl DoubleEndedIterator<Item = NodeId> + ExactSizeIterator {
        (0..self.names.len()).map(NodeId)
    }

    pub fn leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.preorder().filter(|&v| self.is_leaf(v))
    }

    /// Nodes with exactly two children, in preorder.
    pub fn branch_nodes(&self) -> Vec<NodeId> {
        self.preorder().filter(|&v| self.children(v).len() == 2).collect()
    }

    pub fn leaf_depths(&self) -> BTreeMap<NodeId, f64> {
        self.leaves().map(|v| (v, self.depth(v))).collect()
    }

    pub fn view(&self, id: NodeId) -> NodeView<'_> {
        NodeView {
            id,
            name: self.name(id),
            parent: self.parent(id),
            children: self.children(id),
            is_leaf: self.is_leaf(id),
            depth: self.depth(id),
        }
    }

    /// Walks from `id` up to (and including) the root.
    pub fn ancestors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        std::iter::successors(Some(id), move |&v| self.parent(v))
    }

    /// True when `node` lies in the subtree at `top` (including `top` itself).
    pub fn is_below(&self, node: NodeId, top: NodeId) -> bool {
        self.ancestors(node).any(|v| v == top)
    }

    /// Binary form: every non-root internal node has two children and the
    /// root has one or two.
    pub fn is_normalized(&self) -> bool {
        self.preorder().all(|v| match self.children(v).len() {
            0 | 2 => true,
            1 => v == self.root(),
            _ => false,
        })
    }

    /// Binarizes the tree and contracts non-root nodes with a single child.
    ///
    /// A node with children `c1 < c2 < ... < ck` (by name, after contraction)
    /// becomes a left fold: `c1` and `c2` hang below a new node joined to its
    /// parent by a zero-length arc, that node and `c3` below the next one, and
    /// so on; the original node keeps the last fold node and `ck`.
    pub fn normalize(&self) -> RootedTree {
        let mut taken: BTreeSet<String> = self.names.iter().cloned().collect();
        let mut arcs = Vec::with_capacity(self.names.len());
        let mut work = vec![self.root()];

        while let Some(v) = work.pop() {
            let mut ends: Vec<(NodeId, f64, bool)> = self
                .children(v)
                .iter()
                .map(|&c| {
                    let (mut end, mut length) = (c, self.arc_length(c));
                    while let [only] = self.children(end) {
                        length += self.arc_length(*only);
                        end = *only;
                    }
                    (end, length, end == c && self.is_inserted(c))
                })
                .collect();
            ends.sort_by(|a, b| self.name(a.0).cmp(self.name(b.0)));
            work.extend(ends.iter().map(|e| e.0));

            let parent = self.name(v).to_owned();
            let mut pending: Vec<(String, f64, bool)> =
                ends.iter().map(|&(e, l, ins)| (self.name(e).to_owned(), l, ins)).collect();

            if pending.len() > 2 {
                let last = pending.pop().expect("more than two children");
                let mut rest = pending.into_iter();
                let mut acc = rest.next().expect("more than two children");
                for (fold, next) in rest.enumerate() {
                    let name = fresh_name(&mut taken, &parent, fold + 1);
                    for (child, length, inserted) in [acc, next] {
                        arcs.push(DownArc { parent: name.clone(), child, length, inserted });
                    }
                    acc = (name, 0.0, true);
                }
                pending = vec![acc, last];
            }
            for (child, length, inserted) in pending {
                arcs.push(DownArc { parent: parent.clone(), child, length, inserted });
            }
        }
        Self::assemble(self.name(self.root()).to_owned(), arcs)
    }

    /// All arcs as `(parent, child, length)` in preorder of the child.
    pub fn arcs(&self) -> Vec<(&str, &str, f64)> {
        self.preorder()
            .skip(1)
            .map(|v| {
                let p = self.parent(v).expect("non-root has a parent");
                (self.name(p), self.name(v), self.arc_length(v))
            })
            .collect()
    }

    /// The tree in file form. Zero-length inserted arcs are kept, so a
    /// normalized tree with inserted arcs will not parse back.
    pub fn to_file(&self) -> TreeFile {
        TreeFile {
            root: self.name(self.root()).to_owned(),
            edges: self
                .arcs()
                .into_iter()
                .map(|(a, b, l)| (a.to_owned(), b.to_owned(), l))
                .collect(),
        }
    }

    /// Short stable digest of the canonical arc list.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.name(self.root()).as_bytes());
        for v in self.preorder().skip(1) {
            let p = self.parent(v).expect("non-root has a parent");
            hasher.update([0u8]);
            hasher.update(self.name(p).as_bytes());
            hasher.update([1u8]);
            hasher.update(self.name(v).as_bytes());
            hasher.update(self.arc_length(v).to_bits().to_le_bytes());
            hasher.update([u8::from(self.is_inserted(v))]);
        }
        hasher.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn fresh_name(taken: &mut BTreeSet<String>, parent: &str, fold: usize) -> String {
    let mut name = format!("{parent}#{fold}");
    while taken.contains(&name) {
        name.push('\'');
    }
    taken.insert(name.clone());
    name
}
