use std::collections::VecDeque;

/// Rooted spanning tree over bus indices.
///
/// Every non-root node has exactly one parent and one parent branch; branch
/// currents and flows are positive in the parent→child direction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    root: usize,
    parent: Vec<Option<usize>>,
    parent_branch: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    order: Vec<usize>,
    depth: Vec<usize>,
}

/// Disjoint-set forest used to reject cycles while reading branches.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns `false` when `a` and `b` were already connected.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Why a set of edges is not a spanning tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeDefect {
    EdgeCount { nodes: usize, edges: usize },
    SelfLoop { edge: usize },
    Cycle { edge: usize },
    Disconnected { node: usize },
    OutOfRange { edge: usize },
}

impl Topology {
    /// Orients an undirected edge list as a tree rooted at `root`.
    pub fn from_edges(n: usize, root: usize, edges: &[(usize, usize)]) -> Result<Self, TreeDefect> {
        if root >= n {
            return Err(TreeDefect::Disconnected { node: root });
        }
        if edges.len() + 1 != n {
            return Err(TreeDefect::EdgeCount {
                nodes: n,
                edges: edges.len(),
            });
        }
        let mut uf = UnionFind::new(n);
        let mut adjacency = vec![Vec::new(); n];
        for (k, &(a, b)) in edges.iter().enumerate() {
            if a >= n || b >= n {
                return Err(TreeDefect::OutOfRange { edge: k });
            }
            if a == b {
                return Err(TreeDefect::SelfLoop { edge: k });
            }
            if !uf.union(a, b) {
                return Err(TreeDefect::Cycle { edge: k });
            }
            adjacency[a].push((b, k));
            adjacency[b].push((a, k));
        }

        let mut parent = vec![None; n];
        let mut parent_branch = vec![None; n];
        let mut children = vec![Vec::new(); n];
        let mut depth = vec![0; n];
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        while let Some(node) = queue.pop_front() {
            order.push(node);
            for &(next, k) in &adjacency[node] {
                if !seen[next] {
                    seen[next] = true;
                    parent[next] = Some(node);
                    parent_branch[next] = Some(k);
                    depth[next] = depth[node] + 1;
                    children[node].push(next);
                    queue.push_back(next);
                }
            }
        }
        if let Some(node) = seen.iter().position(|s| !s) {
            return Err(TreeDefect::Disconnected { node });
        }
        Ok(Topology {
            root,
            parent,
            parent_branch,
            children,
            order,
            depth,
        })
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    /// Index (into the feeder's branch list) of the branch feeding `node`.
    pub fn parent_branch(&self, node: usize) -> Option<usize> {
        self.parent_branch[node]
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    pub fn depth(&self, node: usize) -> usize {
        self.depth[node]
    }

    pub fn max_depth(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    /// Breadth-first order starting at the root; parents precede children.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        node != self.root && self.children[node].is_empty()
    }

    /// Non-root nodes on the path from the root down to `node`, root side first.
    pub fn path_from_root(&self, node: usize) -> Vec<usize> {
        let mut path = Vec::with_capacity(self.depth[node]);
        let mut cur = node;
        while let Some(p) = self.parent[cur] {
            path.push(cur);
            cur = p;
        }
        path.reverse();
        path
    }

    /// `true` when `node` lies in the subtree rooted at `top` (inclusive).
    pub fn in_subtree(&self, top: usize, node: usize) -> bool {
        let mut cur = node;
        loop {
            if cur == top {
                return true;
            }
            match self.parent[cur] {
                Some(p) if self.depth[cur] > self.depth[top] => cur = p,
                _ => return false,
            }
        }
    }

    /// Nodes of the subtree rooted at `top`, in breadth-first order.
    pub fn subtree(&self, top: usize) -> Vec<usize> {
        let mut out = vec![top];
        let mut i = 0;
        while i < out.len() {
            out.extend_from_slice(&self.children[out[i]]);
            i += 1;
        }
        out
    }
}
