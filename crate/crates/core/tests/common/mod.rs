//! Direct-definition reference implementations. Deliberately naive and
//! independent of the library's code paths: every quantity is recomputed
//! from raw coordinates with plain loops.

#![allow(dead_code)]

use std::collections::BTreeSet;

pub type Points = Vec<Vec<f64>>;

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn distances(p: &Points) -> Vec<Vec<f64>> {
    p.iter()
        .map(|a| p.iter().map(|b| euclid(a, b)).collect())
        .collect()
}

fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect()
}

fn mean_offdiag(d: &[Vec<f64>]) -> f64 {
    let ps = pairs(d.len());
    ps.iter().map(|&(i, j)| d[i][j]).sum::<f64>() / ps.len() as f64
}

/// Rank of each value among all values, ties sharing their average rank
/// (1-based), by counting.
fn ranks_by_counting(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let less = v.iter().filter(|&&y| y < x).count() as f64;
            let equal = v.iter().filter(|&&y| y == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
    cov / (va * vb).sqrt()
}

/// Spearman correlation of the unique pair distances.
pub fn spearman(hd: &[Vec<f64>], ld: &[Vec<f64>]) -> f64 {
    let ps = pairs(hd.len());
    let a: Vec<f64> = ps.iter().map(|&(i, j)| hd[i][j]).collect();
    let b: Vec<f64> = ps.iter().map(|&(i, j)| ld[i][j]).collect();
    pearson(&ranks_by_counting(&a), &ranks_by_counting(&b))
}

/// Stress-1 on mean-normalized distances.
pub fn stress(hd: &[Vec<f64>], ld: &[Vec<f64>]) -> f64 {
    let (mh, ml) = (mean_offdiag(hd), mean_offdiag(ld));
    let ml = if ml == 0.0 { 1.0 } else { ml };
    let (mut num, mut den) = (0.0, 0.0);
    for (i, j) in pairs(hd.len()) {
        let (h, l) = (hd[i][j] / mh, ld[i][j] / ml);
        num += (l - h) * (l - h);
        den += h * h;
    }
    (num / den).sqrt()
}

/// Mean of normalized LD/HD distance ratios.
pub fn distance_ratio(hd: &[Vec<f64>], ld: &[Vec<f64>]) -> f64 {
    let (mh, ml) = (mean_offdiag(hd), mean_offdiag(ld));
    let ml = if ml == 0.0 { 1.0 } else { ml };
    let ps = pairs(hd.len());
    ps.iter()
        .map(|&(i, j)| (ld[i][j] / ml) / (hd[i][j] / mh))
        .sum::<f64>()
        / ps.len() as f64
}

/// Neighbors of `i` sorted by (distance, index); rank 1 is the nearest.
fn ordered_neighbors(d: &[Vec<f64>], i: usize) -> Vec<usize> {
    let mut others: Vec<usize> = (0..d.len()).filter(|&j| j != i).collect();
    others.sort_by(|&a, &b| d[i][a].partial_cmp(&d[i][b]).unwrap().then(a.cmp(&b)));
    others
}

fn rank_of(d: &[Vec<f64>], i: usize, j: usize) -> usize {
    ordered_neighbors(d, i)
        .iter()
        .position(|&x| x == j)
        .unwrap()
        + 1
}

/// Penalizes points that are k-neighbors in `observed` but not in
/// `reference`, by their reference rank beyond k.
fn neighborhood(reference: &[Vec<f64>], observed: &[Vec<f64>], k: usize) -> f64 {
    let n = reference.len();
    let mut penalty = 0usize;
    for i in 0..n {
        let obs: BTreeSet<usize> = ordered_neighbors(observed, i).into_iter().take(k).collect();
        let refset: BTreeSet<usize> = ordered_neighbors(reference, i)
            .into_iter()
            .take(k)
            .collect();
        for &j in obs.difference(&refset) {
            penalty += rank_of(reference, i, j) - k;
        }
    }
    let (n, k) = (n as f64, k as f64);
    1.0 - 2.0 / (n * k * (2.0 * n - 3.0 * k - 1.0)) * penalty as f64
}

pub fn trustworthiness(hd: &[Vec<f64>], ld: &[Vec<f64>], k: usize) -> f64 {
    neighborhood(hd, ld, k)
}

pub fn continuity(hd: &[Vec<f64>], ld: &[Vec<f64>], k: usize) -> f64 {
    neighborhood(ld, hd, k)
}

/// Mean silhouette; singletons score 0.
pub fn silhouette(p: &Points, labels: &[usize]) -> f64 {
    let n = p.len();
    let groups: BTreeSet<usize> = labels.iter().copied().collect();
    let mut total = 0.0;
    for i in 0..n {
        let own: Vec<usize> = (0..n)
            .filter(|&j| j != i && labels[j] == labels[i])
            .collect();
        if own.is_empty() {
            continue;
        }
        let a = own.iter().map(|&j| euclid(&p[i], &p[j])).sum::<f64>() / own.len() as f64;
        let b = groups
            .iter()
            .filter(|&&g| g != labels[i])
            .map(|&g| {
                let members: Vec<usize> = (0..n).filter(|&j| labels[j] == g).collect();
                members.iter().map(|&j| euclid(&p[i], &p[j])).sum::<f64>() / members.len() as f64
            })
            .fold(f64::INFINITY, f64::min);
        total += (b - a) / a.max(b);
    }
    total / n as f64
}

/// Local outlier factor with exactly `k` neighbors per point.
pub fn lof(p: &Points, k: usize) -> Vec<f64> {
    let d = distances(p);
    let n = p.len();
    let knn: Vec<Vec<usize>> = (0..n)
        .map(|i| ordered_neighbors(&d, i)[..k].to_vec())
        .collect();
    let kdist: Vec<f64> = (0..n).map(|i| d[i][knn[i][k - 1]]).collect();
    let lrd: Vec<f64> = (0..n)
        .map(|i| {
            let reach: f64 = knn[i].iter().map(|&j| kdist[j].max(d[i][j])).sum::<f64>() / k as f64;
            (1.0 / reach).min(1e12)
        })
        .collect();
    (0..n)
        .map(|i| knn[i].iter().map(|&j| lrd[j]).sum::<f64>() / k as f64 / lrd[i])
        .collect()
}

/// Textbook UPGMA on explicit leaf sets: cluster distance is the mean of
/// all cross leaf distances, recomputed from scratch at every step. Returns
/// (left members, right members, height) per merge, lower-index cluster
/// first.
pub fn naive_upgma(d: &[Vec<f64>]) -> Vec<(BTreeSet<usize>, BTreeSet<usize>, f64)> {
    let mut clusters: Vec<BTreeSet<usize>> = (0..d.len()).map(|i| BTreeSet::from([i])).collect();
    let mut merges = Vec::new();
    while clusters.len() > 1 {
        let mut best = (f64::INFINITY, 0, 0);
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let mut s = 0.0;
                for &x in &clusters[a] {
                    for &y in &clusters[b] {
                        s += d[x][y];
                    }
                }
                let avg = s / (clusters[a].len() * clusters[b].len()) as f64;
                if avg < best.0 {
                    best = (avg, a, b);
                }
            }
        }
        let (h, a, b) = best;
        let right = clusters.remove(b);
        let left = clusters[a].clone();
        clusters[a].extend(right.iter().copied());
        merges.push((left, right, h / 2.0));
    }
    merges
}
