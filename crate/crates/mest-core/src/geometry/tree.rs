//! Weighted metric trees. Points are encoded as `(edge id, offset)` where
//! the offset is measured from the edge endpoint with the smaller node id.
//! Geodesics follow the unique simple path through the tree.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEdge {
    pub u: usize,
    pub v: usize,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSpec {
    /// Number of nodes; edges reference nodes `0..nodes`.
    pub nodes: usize,
    pub edges: Vec<TreeEdge>,
}

const OFFSET_TOL: f64 = 1e-12;

impl TreeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nodes == 0 || self.edges.is_empty() {
            return Err(Error::InvalidSpace("tree needs nodes and edges".into()));
        }
        if self.edges.len() != self.nodes - 1 {
            return Err(Error::InvalidSpace(format!(
                "tree with {} nodes must have {} edges, got {}",
                self.nodes,
                self.nodes - 1,
                self.edges.len()
            )));
        }
        for e in &self.edges {
            if e.u >= self.nodes || e.v >= self.nodes || e.u == e.v {
                return Err(Error::InvalidSpace(format!(
                    "edge ({}, {}) references invalid nodes",
                    e.u, e.v
                )));
            }
            if !(e.length > 0.0) {
                return Err(Error::InvalidSpace("edge lengths must be positive".into()));
            }
        }
        // Connectivity (acyclicity follows from the edge count).
        let adj = self.adjacency();
        let mut seen = vec![false; self.nodes];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(n) = stack.pop() {
            for &(_, m) in &adj[n] {
                if !seen[m] {
                    seen[m] = true;
                    stack.push(m);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidSpace("tree is not connected".into()));
        }
        Ok(())
    }

    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.nodes];
        for (i, e) in self.edges.iter().enumerate() {
            adj[e.u].push((i, e.v));
            adj[e.v].push((i, e.u));
        }
        adj
    }

    fn lower(&self, e: usize) -> usize {
        self.edges[e].u.min(self.edges[e].v)
    }

    fn upper(&self, e: usize) -> usize {
        self.edges[e].u.max(self.edges[e].v)
    }

    pub fn check_point(&self, coords: &[f64]) -> Result<()> {
        if coords.len() != 2 {
            return Err(Error::InvalidPoint("tree point needs (edge id, offset)".into()));
        }
        let e = coords[0];
        if e.fract() != 0.0 || e < 0.0 || (e as usize) >= self.edges.len() {
            return Err(Error::InvalidPoint(format!("invalid edge id {e}")));
        }
        let len = self.edges[e as usize].length;
        let s = coords[1];
        if !(-OFFSET_TOL..=len + OFFSET_TOL).contains(&s) {
            return Err(Error::InvalidPoint(format!(
                "offset {s} outside [0, {len}]"
            )));
        }
        Ok(())
    }

    /// Canonical encoding: node-valued points use the smallest incident edge.
    pub fn canonicalize(&self, coords: &[f64]) -> Vec<f64> {
        let e = coords[0] as usize;
        let s = coords[1];
        let len = self.edges[e].length;
        let node = if s.abs() <= OFFSET_TOL {
            Some(self.lower(e))
        } else if (s - len).abs() <= OFFSET_TOL {
            Some(self.upper(e))
        } else {
            None
        };
        match node {
            None => vec![e as f64, s],
            Some(n) => {
                let best = self
                    .adjacency()[n]
                    .iter()
                    .map(|&(id, _)| id)
                    .min()
                    .expect("node has incident edges");
                let off = if n == self.lower(best) {
                    0.0
                } else {
                    self.edges[best].length
                };
                vec![best as f64, off]
            }
        }
    }

    /// Distances between all nodes and `src`, plus BFS parents.
    fn node_dists(&self, src: usize) -> (Vec<f64>, Vec<Option<(usize, usize)>>) {
        let adj = self.adjacency();
        let mut dist = vec![f64::INFINITY; self.nodes];
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; self.nodes];
        let mut stack = vec![src];
        dist[src] = 0.0;
        while let Some(n) = stack.pop() {
            for &(id, m) in &adj[n] {
                if dist[m].is_infinite() {
                    dist[m] = dist[n] + self.edges[id].length;
                    parent[m] = Some((n, id));
                    stack.push(m);
                }
            }
        }
        (dist, parent)
    }

    fn endpoint_offsets(&self, e: usize, s: f64) -> [(usize, f64); 2] {
        let len = self.edges[e].length;
        [(self.lower(e), s), (self.upper(e), len - s)]
    }

    pub fn dist(&self, p: &[f64], q: &[f64]) -> Result<f64> {
        self.check_point(p)?;
        self.check_point(q)?;
        let (ep, sp) = (p[0] as usize, p[1]);
        let (eq, sq) = (q[0] as usize, q[1]);
        let cp = self.canonicalize(p);
        let cq = self.canonicalize(q);
        if cp[0] == cq[0] {
            return Ok((cp[1] - cq[1]).abs());
        }
        if ep == eq {
            return Ok((sp - sq).abs());
        }
        let mut best = f64::INFINITY;
        for (i, a) in self.endpoint_offsets(ep, sp) {
            let (nd, _) = self.node_dists(i);
            for (j, b) in self.endpoint_offsets(eq, sq) {
                best = best.min(a + nd[j] + b);
            }
        }
        Ok(best)
    }

    pub fn geodesic_point(&self, p: &[f64], q: &[f64], t: f64) -> Result<Vec<f64>> {
        self.check_point(p)?;
        self.check_point(q)?;
        let (ep, sp) = (p[0] as usize, p[1]);
        let (eq, sq) = (q[0] as usize, q[1]);
        let same_edge = {
            let cp = self.canonicalize(p);
            let cq = self.canonicalize(q);
            if cp[0] == cq[0] {
                Some((cp[0] as usize, cp[1], cq[1]))
            } else if ep == eq {
                Some((ep, sp, sq))
            } else {
                None
            }
        };
        if let Some((e, a, b)) = same_edge {
            return Ok(self.canonicalize(&[e as f64, a + t * (b - a)]));
        }
        // Pick the exit/entry endpoints realizing the distance.
        let mut best: Option<(usize, f64, usize, f64, f64)> = None;
        for (i, a) in self.endpoint_offsets(ep, sp) {
            let (nd, _) = self.node_dists(i);
            for (j, b) in self.endpoint_offsets(eq, sq) {
                let total = a + nd[j] + b;
                if best.map_or(true, |(_, _, _, _, bt)| total < bt - 1e-15) {
                    best = Some((i, a, j, b, total));
                }
            }
        }
        let (i, alpha, j, beta, total) = best.expect("nonempty endpoint set");
        let mut target = t * total;
        // Segment 1: from p toward endpoint i on p's edge.
        if target <= alpha {
            let off = if i == self.lower(ep) {
                sp - target
            } else {
                sp + target
            };
            return Ok(self.canonicalize(&[ep as f64, off]));
        }
        target -= alpha;
        // Segment 2: node path from i to j.
        let (_, parent) = self.node_dists(i);
        let mut path = Vec::new();
        let mut cur = j;
        while cur != i {
            let (prev, id) = parent[cur].expect("tree is connected");
            path.push((prev, cur, id));
            cur = prev;
        }
        path.reverse();
        for (n1, _n2, id) in path {
            let len = self.edges[id].length;
            if target <= len {
                let off = if n1 == self.lower(id) { target } else { len - target };
                return Ok(self.canonicalize(&[id as f64, off]));
            }
            target -= len;
        }
        // Segment 3: from endpoint j toward q on q's edge.
        let rem = target.min(beta);
        let off = if j == self.lower(eq) {
            rem
        } else {
            self.edges[eq].length - rem
        };
        Ok(self.canonicalize(&[eq as f64, off]))
    }
}
