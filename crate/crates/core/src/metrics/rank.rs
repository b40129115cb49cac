use super::distance::DistanceMatrix;

/// Neighbor ranks around every point.
///
/// `rank(i, j)` is the position of `j` when the other points are sorted by
/// distance from `i` (1 = nearest). Equal distances are ordered by index so
/// each row is a permutation of `1..n-1` and `k`-neighborhoods are well
/// defined.
#[derive(Debug, Clone)]
pub struct RankMatrix {
    n: usize,
    ranks: Vec<usize>,
    order: Vec<usize>,
}

impl RankMatrix {
    pub fn from_distances(d: &DistanceMatrix) -> Self {
        let n = d.len();
        let width = n.saturating_sub(1);
        let mut ranks = vec![0; n * n];
        let mut order = Vec::with_capacity(n * width);
        let mut idx: Vec<usize> = Vec::with_capacity(width);
        for i in 0..n {
            idx.clear();
            idx.extend((0..n).filter(|&j| j != i));
            let row = d.row(i);
            idx.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
            for (r, &j) in idx.iter().enumerate() {
                ranks[i * n + j] = r + 1;
            }
            order.extend_from_slice(&idx);
        }
        Self { n, ranks, order }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn rank(&self, i: usize, j: usize) -> usize {
        self.ranks[i * self.n + j]
    }

    /// The `k` nearest neighbors of `i`, nearest first.
    pub fn nearest(&self, i: usize, k: usize) -> &[usize] {
        let w = self.n - 1;
        &self.order[i * w..i * w + k]
    }
}

/// Average (fractional) ranks starting at 1; tied values share the mean of
/// the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let r = (start + 1 + end) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = r;
        }
        start = end;
    }
    ranks
}

/// Whether any two entries are equal.
pub fn has_ties(values: &[f64]) -> bool {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.windows(2).any(|w| w[0] == w[1])
}
