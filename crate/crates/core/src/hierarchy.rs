//! UPGMA dendrograms over per-label centroids and their Newick form.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{label_index, DataMatrix};
use crate::error::{Error, Result};
use crate::metrics::{pairwise_distances, DistanceMatrix};

/// One agglomeration step. Node ids below the leaf count are leaves; merge
/// `i` creates node `leaves + i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

/// Binary merge tree. The root is the last merge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    leaves: Vec<String>,
    merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn leaves(&self) -> &[String] {
        &self.leaves
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn root(&self) -> usize {
        self.leaves.len() + self.merges.len() - 1
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        node < self.leaves.len()
    }

    pub fn height(&self, node: usize) -> f64 {
        if self.is_leaf(node) {
            0.0
        } else {
            self.merges[node - self.leaves.len()].height
        }
    }

    pub fn children(&self, node: usize) -> Option<(usize, usize)> {
        (!self.is_leaf(node)).then(|| {
            let m = &self.merges[node - self.leaves.len()];
            (m.left, m.right)
        })
    }

    /// Leaf ids in drawing order (left subtree first).
    pub fn leaf_order(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.leaves.len());
        let mut stack = vec![self.root()];
        while let Some(node) = stack.pop() {
            match self.children(node) {
                Some((l, r)) => {
                    stack.push(r);
                    stack.push(l);
                }
                None => out.push(node),
            }
        }
        out
    }

    /// Leaf ids under `node`.
    pub fn members(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            match self.children(x) {
                Some((l, r)) => {
                    stack.push(r);
                    stack.push(l);
                }
                None => out.push(x),
            }
        }
        out
    }

    /// Every internal clade as (leaf-name set, height), in merge order.
    pub fn clades(&self) -> Vec<(BTreeSet<String>, f64)> {
        let n = self.leaves.len();
        (0..self.merges.len())
            .map(|i| {
                let names = self
                    .members(n + i)
                    .into_iter()
                    .map(|l| self.leaves[l].clone())
                    .collect();
                (names, self.merges[i].height)
            })
            .collect()
    }

    /// Nested-parenthesis form, left child first, without branch lengths.
    pub fn to_newick(&self) -> String {
        let mut out = String::new();
        self.write_newick(self.root(), &mut out);
        out.push(';');
        out
    }

    fn write_newick(&self, node: usize, out: &mut String) {
        match self.children(node) {
            Some((l, r)) => {
                out.push('(');
                self.write_newick(l, out);
                out.push(',');
                self.write_newick(r, out);
                out.push(')');
            }
            None => out.push_str(&quote_name(&self.leaves[node])),
        }
    }
}

const NEWICK_SPECIAL: &[char] = &['(', ')', ',', ':', ';', '\'', '[', ']'];

fn quote_name(name: &str) -> String {
    if name.is_empty()
        || name
            .chars()
            .any(|c| c.is_whitespace() || NEWICK_SPECIAL.contains(&c))
    {
        format!("'{}'", name.replace('\'', "''"))
    } else {
        name.to_string()
    }
}

/// Average-linkage agglomeration.
///
/// The closest pair of active clusters merges at half their distance; the
/// merged cluster takes the lower slot and its distance to every other
/// cluster is the size-weighted mean of its parts. Equal distances resolve
/// to the lowest (left slot, right slot) pair.
pub fn upgma(dist: &DistanceMatrix, leaf_names: &[String]) -> Result<Dendrogram> {
    let n = dist.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "UPGMA needs at least 2 leaves, got {n}"
        )));
    }
    if leaf_names.len() != n {
        return Err(Error::Shape(format!(
            "{} leaf names for {n} leaves",
            leaf_names.len()
        )));
    }
    let mut d: Vec<f64> = (0..n * n).map(|x| dist.get(x / n, x % n)).collect();
    // slot -> (node id, size)
    let mut slots: Vec<Option<(usize, usize)>> = (0..n).map(|i| Some((i, 1))).collect();
    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..n {
            if slots[i].is_none() {
                continue;
            }
            for j in (i + 1)..n {
                if slots[j].is_none() {
                    continue;
                }
                let v = d[i * n + j];
                if best.is_none_or(|(_, _, b)| v < b) {
                    best = Some((i, j, v));
                }
            }
        }
        let (i, j, v) = best.expect("at least two active clusters");
        let ((li, si), (lj, sj)) = (slots[i].unwrap(), slots[j].unwrap());
        for m in 0..n {
            if m == i || m == j || slots[m].is_none() {
                continue;
            }
            let merged = (si as f64 * d[i * n + m] + sj as f64 * d[j * n + m]) / (si + sj) as f64;
            d[i * n + m] = merged;
            d[m * n + i] = merged;
        }
        merges.push(Merge {
            left: li,
            right: lj,
            height: v / 2.0,
            size: si + sj,
        });
        slots[i] = Some((n + step, si + sj));
        slots[j] = None;
    }
    Ok(Dendrogram {
        leaves: leaf_names.to_vec(),
        merges,
    })
}

/// One centroid per distinct label (first-appearance order).
pub fn label_centroids(
    matrix: &DataMatrix,
    labels: &[String],
) -> Result<(DataMatrix, Vec<String>)> {
    if labels.len() != matrix.rows() {
        return Err(Error::Shape(format!(
            "{} labels for {} rows",
            labels.len(),
            matrix.rows()
        )));
    }
    let (names, ids) = label_index(labels);
    if names.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "a dendrogram needs at least 2 distinct labels, got {}",
            names.len()
        )));
    }
    let d = matrix.cols();
    let mut sums = vec![0.0; names.len() * d];
    let mut counts = vec![0usize; names.len()];
    for (row, &c) in matrix.iter_rows().zip(&ids) {
        counts[c] += 1;
        for (s, v) in sums[c * d..(c + 1) * d].iter_mut().zip(row) {
            *s += v;
        }
    }
    for (c, &count) in counts.iter().enumerate() {
        for s in &mut sums[c * d..(c + 1) * d] {
            *s /= count as f64;
        }
    }
    Ok((DataMatrix::new(names.len(), d, sums)?, names))
}

/// UPGMA tree whose leaves are the per-label centroids of `matrix`.
pub fn centroid_dendrogram(matrix: &DataMatrix, labels: &[String]) -> Result<Dendrogram> {
    let (centroids, names) = label_centroids(matrix, labels)?;
    upgma(&pairwise_distances(&centroids)?, &names)
}

/// Lloyd's k-means with k-means++ seeding; returns cluster ids. Used to
/// give unlabeled data dendrogram leaves.
pub fn kmeans(matrix: &DataMatrix, k: usize, seed: u64, max_iter: usize) -> Result<Vec<usize>> {
    let n = matrix.rows();
    if k == 0 || k > n {
        return Err(Error::OutOfRange {
            name: "k",
            value: k.to_string(),
            range: format!("1 <= k <= {n}"),
        });
    }
    let dim = matrix.cols();
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<Vec<f64>> = vec![matrix.row(rng.random_range(0..n)).to_vec()];
    let mut nearest: Vec<f64> = matrix.iter_rows().map(|r| sq(r, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut t = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if t < w {
                    pick = i;
                    break;
                }
                t -= w;
            }
            pick
        } else {
            centers.len() % n
        };
        centers.push(matrix.row(next).to_vec());
        let c = centers.last().unwrap();
        for (w, r) in nearest.iter_mut().zip(matrix.iter_rows()) {
            *w = w.min(sq(r, c));
        }
    }
    let mut assign = vec![usize::MAX; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for (i, r) in matrix.iter_rows().enumerate() {
            let best = (0..k)
                .min_by(|&a, &b| sq(r, &centers[a]).total_cmp(&sq(r, &centers[b])))
                .unwrap();
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (r, &c) in matrix.iter_rows().zip(&assign) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(r) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    Ok(assign)
}

/// Parses a binary Newick string without branch lengths into a topology.
/// Heights are the number of merge levels below each node.
pub fn parse_newick(s: &str) -> Result<Dendrogram> {
    let mut p = NewickParser {
        src: s.as_bytes(),
        pos: 0,
        leaves: Vec::new(),
        merges: Vec::new(),
    };
    let root = p.subtree()?;
    p.skip_ws();
    p.expect(b';')?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("trailing input after ';'"));
    }
    if p.merges.is_empty() {
        return Err(p.error("a tree needs at least 2 leaves"));
    }
    // Re-number: leaves first, then merges in creation order.
    let n = p.leaves.len();
    let map = |node: ParsedNode| match node {
        ParsedNode::Leaf(i) => i,
        ParsedNode::Merge(m) => n + m,
    };
    let merges = p
        .merges
        .iter()
        .map(|&(l, r, height, size)| Merge {
            left: map(l),
            right: map(r),
            height,
            size,
        })
        .collect();
    debug_assert!(matches!(root, ParsedNode::Merge(m) if m + 1 == p.merges.len()));
    Ok(Dendrogram {
        leaves: p.leaves,
        merges,
    })
}

#[derive(Clone, Copy)]
enum ParsedNode {
    Leaf(usize),
    Merge(usize),
}

struct NewickParser<'a> {
    src: &'a [u8],
    pos: usize,
    leaves: Vec<String>,
    merges: Vec<(ParsedNode, ParsedNode, f64, usize)>,
}

impl NewickParser<'_> {
    fn error(&self, message: impl Into<String>) -> Error {
        Error::Newick {
            position: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        match self.peek() {
            Some(x) if x == c => {
                self.pos += 1;
                Ok(())
            }
            Some(x) => Err(self.error(format!("expected '{}', found '{}'", c as char, x as char))),
            None => Err(self.error(format!("expected '{}', found end of input", c as char))),
        }
    }

    fn info(&self, node: ParsedNode) -> (f64, usize) {
        match node {
            ParsedNode::Leaf(_) => (0.0, 1),
            ParsedNode::Merge(m) => (self.merges[m].2, self.merges[m].3),
        }
    }

    fn subtree(&mut self) -> Result<ParsedNode> {
        self.skip_ws();
        if self.peek() == Some(b'(') {
            self.pos += 1;
            let left = self.subtree()?;
            self.skip_ws();
            self.expect(b',')?;
            let right = self.subtree()?;
            self.skip_ws();
            match self.peek() {
                Some(b')') => self.pos += 1,
                Some(b',') => return Err(self.error("non-binary node")),
                Some(b':') => return Err(self.error("branch lengths are not supported")),
                Some(c) => return Err(self.error(format!("expected ')', found '{}'", c as char))),
                None => return Err(self.error("unbalanced parentheses: missing ')'")),
            }
            let ((hl, sl), (hr, sr)) = (self.info(left), self.info(right));
            self.merges.push((left, right, hl.max(hr) + 1.0, sl + sr));
            Ok(ParsedNode::Merge(self.merges.len() - 1))
        } else {
            let name = self.name()?;
            self.leaves.push(name);
            Ok(ParsedNode::Leaf(self.leaves.len() - 1))
        }
    }

    fn name(&mut self) -> Result<String> {
        if self.peek() == Some(b'\'') {
            self.pos += 1;
            let mut out = Vec::new();
            loop {
                match self.peek() {
                    None => return Err(self.error("unterminated quoted name")),
                    Some(b'\'') if self.src.get(self.pos + 1) == Some(&b'\'') => {
                        out.push(b'\'');
                        self.pos += 2;
                    }
                    Some(b'\'') => {
                        self.pos += 1;
                        break;
                    }
                    Some(c) => {
                        out.push(c);
                        self.pos += 1;
                    }
                }
            }
            return String::from_utf8(out).map_err(|_| self.error("invalid UTF-8 in name"));
        }
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_whitespace() || NEWICK_SPECIAL.contains(&(c as char)) {
                break;
            }
            self.pos += 1;
        }
        if self.pos == start {
            return Err(match self.peek() {
                Some(c) => self.error(format!("expected a leaf name, found '{}'", c as char)),
                None => self.error("unexpected end of input"),
            });
        }
        Ok(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }
}
