use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::DistanceMatrix;
use crate::error::{Error, Result};

/// Node reference: leaves are `0..n`, the merge at position `k` is node `n + k`.
pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: NodeId,
    pub right: NodeId,
    pub height: f64,
    pub size: usize,
}

/// Binary merge tree produced by [`agglomerate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub leaves: Vec<String>,
    pub merges: Vec<Merge>,
}

/// Flat cluster labels, contiguous from 0 in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    pub ids: Vec<String>,
    pub labels: Vec<usize>,
}

impl ClusterAssignment {
    pub fn num_clusters(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn label_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id).map(|i| self.labels[i])
    }

    pub fn as_map(&self) -> HashMap<&str, usize> {
        self.ids
            .iter()
            .map(String::as_str)
            .zip(self.labels.iter().copied())
            .collect()
    }

    /// Relabels arbitrary labels to be contiguous from 0 in first-appearance order.
    pub fn from_raw(ids: Vec<String>, raw: &[usize]) -> Self {
        let mut map = HashMap::new();
        let labels = raw
            .iter()
            .map(|r| {
                let next = map.len();
                *map.entry(*r).or_insert(next)
            })
            .collect();
        Self { ids, labels }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("segment_id,cluster\n");
        for (id, l) in self.ids.iter().zip(&self.labels) {
            let _ = writeln!(s, "{id},{l}");
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut ids = Vec::new();
        let mut raw = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::MalformedRow {
                line: i + 2,
                reason: e.to_string(),
            })?;
            if rec.len() != 2 {
                return Err(Error::MalformedRow {
                    line: i + 2,
                    reason: "expected segment_id,cluster".into(),
                });
            }
            ids.push(rec[0].to_string());
            raw.push(rec[1].trim().parse::<usize>().map_err(|e| Error::MalformedRow {
                line: i + 2,
                reason: e.to_string(),
            })?);
        }
        Ok(Self::from_raw(ids, &raw))
    }
}

/// Average-linkage (UPGMA) agglomeration.
///
/// Inter-cluster distance is the mean leaf-to-leaf distance. Exact ties are
/// broken by the lexicographically smallest pair of cluster keys, where a
/// cluster's key is its smallest leaf id, so the tree does not depend on the
/// order of the input matrix.
pub fn agglomerate(d: &DistanceMatrix) -> Dendrogram {
    let n = d.len();
    let leaves = d.ids.clone();
    if n < 2 {
        return Dendrogram {
            leaves,
            merges: Vec::new(),
        };
    }

    // Slot-indexed state; a merged cluster reuses the lower slot.
    let mut sums: Vec<f64> = (0..n * n).map(|k| d.get(k / n, k % n)).collect();
    let mut size = vec![1usize; n];
    let mut node: Vec<NodeId> = (0..n).collect();
    let mut key: Vec<&str> = d.ids.iter().map(String::as_str).collect();
    let mut active: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n - 1);
    let mut last_height = f64::NEG_INFINITY;

    while active.len() > 1 {
        let mut best: Option<(f64, (&str, &str), usize, usize)> = None;
        for (ai, &p) in active.iter().enumerate() {
            for &q in &active[ai + 1..] {
                let avg = sums[p * n + q] / (size[p] * size[q]) as f64;
                let pair = if key[p] <= key[q] {
                    (key[p], key[q])
                } else {
                    (key[q], key[p])
                };
                let better = match &best {
                    None => true,
                    Some((h, bp, _, _)) => avg < *h || (avg == *h && pair < *bp),
                };
                if better {
                    best = Some((avg, pair, p, q));
                }
            }
        }
        let (h, _, p, q) = best.expect("at least two active clusters");
        let (keep, gone) = (p.min(q), p.max(q));
        let (left, right) = if key[p] <= key[q] { (p, q) } else { (q, p) };
        let height = h.max(last_height);
        last_height = height;
        merges.push(Merge {
            left: node[left],
            right: node[right],
            height,
            size: size[p] + size[q],
        });

        for &r in &active {
            if r == keep || r == gone {
                continue;
            }
            let s = sums[r * n + keep] + sums[r * n + gone];
            sums[r * n + keep] = s;
            sums[keep * n + r] = s;
        }
        size[keep] += size[gone];
        node[keep] = n + merges.len() - 1;
        key[keep] = key[keep].min(key[gone]);
        active.retain(|&r| r != gone);
    }

    Dendrogram { leaves, merges }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut x = x;
        while self.0[x] != r {
            let next = self.0[x];
            self.0[x] = r;
            x = next;
        }
        r
    }
}

impl Dendrogram {
    fn labels_after(&self, applied: usize) -> ClusterAssignment {
        let n = self.leaves.len();
        let mut uf = UnionFind((0..n + self.merges.len()).collect());
        for (k, m) in self.merges.iter().take(applied).enumerate() {
            let id = n + k;
            let (a, b) = (uf.find(m.left), uf.find(m.right));
            uf.0[a] = id;
            uf.0[b] = id;
        }
        let raw: Vec<usize> = (0..n).map(|i| uf.find(i)).collect();
        ClusterAssignment::from_raw(self.leaves.clone(), &raw)
    }

    /// Keeps merges with height ≤ `threshold`.
    pub fn cut(&self, threshold: f64) -> Result<ClusterAssignment> {
        if !threshold.is_finite() {
            return Err(Error::InvalidConfig(format!("threshold {threshold} is not finite")));
        }
        let applied = self.merges.iter().take_while(|m| m.height <= threshold).count();
        Ok(self.labels_after(applied))
    }

    /// Exactly `k` clusters: undoes the last `k − 1` merges.
    pub fn cut_k(&self, k: usize) -> Result<ClusterAssignment> {
        let n = self.leaves.len();
        if k == 0 || k > n {
            return Err(Error::InvalidK { k, leaves: n });
        }
        Ok(self.labels_after(n - k))
    }

    fn node_height(&self, node: NodeId) -> f64 {
        let n = self.leaves.len();
        if node < n {
            0.0
        } else {
            self.merges[node - n].height
        }
    }

    fn root(&self) -> NodeId {
        if self.merges.is_empty() {
            0
        } else {
            self.leaves.len() + self.merges.len() - 1
        }
    }

    /// Newick string; branch length = parent height − child height.
    pub fn to_newick(&self) -> String {
        let mut s = String::new();
        if !self.leaves.is_empty() {
            self.newick_node(self.root(), &mut s);
        }
        s.push(';');
        s
    }

    fn newick_node(&self, node: NodeId, out: &mut String) {
        let n = self.leaves.len();
        if node < n {
            out.push_str(&newick_label(&self.leaves[node]));
            return;
        }
        let m = &self.merges[node - n];
        out.push('(');
        for (i, child) in [m.left, m.right].into_iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            self.newick_node(child, out);
            let _ = write!(out, ":{:?}", m.height - self.node_height(child));
        }
        out.push(')');
    }

    /// Nested tree of `{id | children, height}` nodes.
    pub fn to_tree(&self) -> TreeNode {
        self.tree_node(self.root())
    }

    fn tree_node(&self, node: NodeId) -> TreeNode {
        let n = self.leaves.len();
        if node < n {
            return TreeNode {
                id: Some(self.leaves[node].clone()),
                height: 0.0,
                size: 1,
                children: Vec::new(),
            };
        }
        let m = &self.merges[node - n];
        TreeNode {
            id: None,
            height: m.height,
            size: m.size,
            children: vec![self.tree_node(m.left), self.tree_node(m.right)],
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_tree()).expect("tree serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeNode {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub height: f64,
    pub size: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<TreeNode>,
}

fn newick_label(id: &str) -> String {
    if id.chars().any(|c| "()[]':;,".contains(c) || c.is_whitespace()) {
        format!("'{}'", id.replace('\'', "''"))
    } else {
        id.to_string()
    }
}
