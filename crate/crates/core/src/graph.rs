//! Graph-structure measures per window: eigenvector centrality, weighted
//! betweenness centrality and modularity-based community structure.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mi::MiMatrix;

/// Mean, median and maximum of a per-node vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub max: f64,
}

/// Mean/median/max with the even-length median averaging the middle two.
pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("cannot summarize an empty vector".into()));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    Ok(Summary {
        mean,
        median,
        max: sorted[n - 1],
    })
}

/// Per-node centrality values with their summary statistics.
#[derive(Debug, Clone)]
pub struct CentralitySummary {
    /// Window ordinal starting at 1.
    pub window_index: usize,
    pub values: Vec<f64>,
    pub summary: Summary,
}

/// Principal-eigenvector centrality by power iteration, normalized to unit
/// Euclidean norm.
///
/// Iteration runs on the weight matrix plus a `max row sum` diagonal shift:
/// the shift leaves eigenvectors untouched but keeps the iteration from
/// oscillating when the extreme eigenvalues come in a +/- pair (a star
/// graph is the classic case). Starts from the uniform vector; converges
/// when successive normalized iterates differ by less than `tol` in
/// max-norm.
pub fn eigenvector_centrality(m: &MiMatrix, tol: f64, max_iter: usize) -> Result<CentralitySummary> {
    let n = m.n();
    if n == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    let total: f64 = m.weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidMatrix("not all zero"));
    }
    let shift = m
        .weights
        .rows()
        .into_iter()
        .map(|r| r.sum())
        .fold(0.0f64, f64::max);

    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        for i in 0..n {
            let mut acc = shift * v[i];
            for j in 0..n {
                acc += m.weights[[i, j]] * v[j];
            }
            next[i] = acc;
        }
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::NoConvergence {
                iterations: max_iter,
                residual: f64::INFINITY,
            });
        }
        for x in next.iter_mut() {
            *x /= norm;
        }
        residual = v
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        std::mem::swap(&mut v, &mut next);
        if residual < tol {
            let summary = summarize(&v)?;
            return Ok(CentralitySummary {
                window_index: m.window_index,
                values: v,
                summary,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual,
    })
}

/// How mutual-information weights become shortest-path distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceTransform {
    /// d = 1/w. Zero-weight edges are dropped.
    #[default]
    Reciprocal,
    /// d = max(w) - w against the matrix-wide maximum; the strongest edge
    /// gets distance zero. Zero-weight edges are dropped.
    MaxMinusWeight,
}

struct DistanceGraph {
    /// Per-node adjacency as (neighbor, distance).
    adj: Vec<Vec<(usize, f64)>>,
}

impl DistanceGraph {
    fn build(m: &MiMatrix, transform: DistanceTransform) -> Self {
        let n = m.n();
        let max_w = m.weights.iter().copied().fold(0.0f64, f64::max);
        let mut adj = vec![Vec::new(); n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = m.weights[[i, j]];
                if w <= 0.0 {
                    continue;
                }
                let d = match transform {
                    DistanceTransform::Reciprocal => 1.0 / w,
                    DistanceTransform::MaxMinusWeight => max_w - w,
                };
                adj[i].push((j, d));
            }
        }
        Self { adj }
    }
}

/// Shortest-path betweenness on the distance-transformed graph, normalized
/// by (N-1)(N-2)/2 for undirected graphs.
///
/// Runs the standard single-source accumulation over every source with a
/// dense O(N^2) Dijkstra, which beats a heap on these complete graphs.
/// Disconnected graphs are fine; unreachable pairs contribute nothing.
pub fn betweenness_centrality(
    m: &MiMatrix,
    transform: DistanceTransform,
) -> Result<CentralitySummary> {
    let n = m.n();
    if n == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    if n <= 2 {
        let values = vec![0.0; n];
        let summary = summarize(&values)?;
        return Ok(CentralitySummary {
            window_index: m.window_index,
            values,
            summary,
        });
    }
    let graph = DistanceGraph::build(m, transform);

    // Per-source dependency vectors are collected in source order and
    // summed sequentially so the float accumulation order is fixed.
    let deltas: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|s| single_source_dependencies(&graph, s))
        .collect();
    let mut raw = vec![0.0; n];
    for delta in &deltas {
        for (acc, d) in raw.iter_mut().zip(delta) {
            *acc += d;
        }
    }
    // Each unordered pair was accumulated from both endpoints, so the
    // undirected (N-1)(N-2)/2 normalization doubles up.
    let norm = ((n - 1) * (n - 2)) as f64;
    for v in raw.iter_mut() {
        *v /= norm;
    }
    let summary = summarize(&raw)?;
    Ok(CentralitySummary {
        window_index: m.window_index,
        values: raw,
        summary,
    })
}

fn single_source_dependencies(graph: &DistanceGraph, s: usize) -> Vec<f64> {
    let n = graph.adj.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut sigma = vec![0.0f64; n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut settled = vec![false; n];
    let mut order = Vec::with_capacity(n);

    dist[s] = 0.0;
    sigma[s] = 1.0;
    loop {
        // Dense extract-min.
        let mut u = usize::MAX;
        let mut best = f64::INFINITY;
        for i in 0..n {
            if !settled[i] && dist[i] < best {
                best = dist[i];
                u = i;
            }
        }
        if u == usize::MAX {
            break;
        }
        settled[u] = true;
        order.push(u);
        for &(v, d) in &graph.adj[u] {
            if settled[v] {
                continue;
            }
            let candidate = dist[u] + d;
            if candidate < dist[v] {
                dist[v] = candidate;
                sigma[v] = sigma[u];
                preds[v].clear();
                preds[v].push(u);
            } else if candidate == dist[v] {
                sigma[v] += sigma[u];
                preds[v].push(u);
            }
        }
    }

    let mut delta = vec![0.0f64; n];
    for &w in order.iter().rev() {
        for &p in &preds[w] {
            delta[p] += sigma[p] / sigma[w] * (1.0 + delta[w]);
        }
    }
    delta[s] = 0.0;
    delta
}

/// Community partition with its modularity score.
#[derive(Debug, Clone)]
pub struct ModularityResult {
    /// Window ordinal starting at 1.
    pub window_index: usize,
    /// Community id per node, renumbered 0..k in first-appearance order.
    pub partition: Vec<usize>,
    pub q: f64,
}

/// Weighted modularity of a given partition by the direct double sum
/// Q = (1/2m) sum_ij (w_ij - s_i s_j / 2m) delta(c_i, c_j).
pub fn modularity_of_partition(weights: &Array2<f64>, partition: &[usize]) -> Result<f64> {
    let n = weights.nrows();
    if partition.len() != n {
        return Err(Error::LengthMismatch {
            left: partition.len(),
            right: n,
        });
    }
    let strengths: Vec<f64> = weights.rows().into_iter().map(|r| r.sum()).collect();
    let two_m: f64 = strengths.iter().sum();
    if two_m <= 0.0 {
        return Err(Error::ZeroTotalWeight);
    }
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if partition[i] == partition[j] {
                q += weights[[i, j]] - strengths[i] * strengths[j] / two_m;
            }
        }
    }
    Ok(q / two_m)
}

/// Greedy weighted modularity maximization: repeated local-move passes
/// followed by community aggregation, with the node visiting order fixed
/// by `seed`. The reported Q is re-evaluated on the original matrix with
/// the direct formula.
pub fn modularity(m: &MiMatrix, seed: u64) -> Result<ModularityResult> {
    let n = m.n();
    let total: f64 = m.weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroTotalWeight);
    }

    // Level graph state: adjacency maps with aggregated self-loops.
    let mut adj: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && m.weights[[i, j]] > 0.0)
                .map(|j| (j, m.weights[[i, j]]))
                .collect()
        })
        .collect();
    let two_m = total;
    // node_of_original[v] = current level node holding original node v.
    let mut node_of_original: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    loop {
        let level_n = adj.len();
        let degree: Vec<f64> = adj
            .iter()
            .map(|neighbors| neighbors.iter().map(|(_, w)| w).sum::<f64>())
            .collect();
        let mut community: Vec<usize> = (0..level_n).collect();
        let mut community_degree = degree.clone();

        let mut order: Vec<usize> = (0..level_n).collect();
        order.shuffle(&mut rng);

        let mut moved_any = false;
        for _pass in 0..100 {
            let mut moved = false;
            for &node in &order {
                let own = community[node];
                // Weights from this node to each neighboring community,
                // self-loops excluded.
                let mut to_comm: Vec<(usize, f64)> = Vec::new();
                for &(nb, w) in &adj[node] {
                    if nb == node {
                        continue;
                    }
                    let c = community[nb];
                    match to_comm.iter_mut().find(|(cc, _)| *cc == c) {
                        Some((_, acc)) => *acc += w,
                        None => to_comm.push((c, w)),
                    }
                }
                to_comm.sort_unstable_by_key(|(c, _)| *c);

                let k_i = degree[node];
                community_degree[own] -= k_i;
                let w_own = to_comm
                    .iter()
                    .find(|(c, _)| *c == own)
                    .map(|(_, w)| *w)
                    .unwrap_or(0.0);
                // Scaled modularity gain; the 1/2m factor drops out of the
                // comparison.
                let gain_of =
                    |w_to: f64, comm_degree: f64| w_to - comm_degree * k_i / two_m;
                let stay = gain_of(w_own, community_degree[own]);
                let mut best_comm = own;
                let mut best_gain = stay;
                // Ascending community ids plus a strict comparison break
                // ties toward the smaller id and toward staying put.
                for &(c, w_to) in &to_comm {
                    if c == own {
                        continue;
                    }
                    let gain = gain_of(w_to, community_degree[c]);
                    if gain > best_gain + 1e-12 {
                        best_gain = gain;
                        best_comm = c;
                    }
                }
                community_degree[best_comm] += k_i;
                if best_comm != own {
                    community[node] = best_comm;
                    moved = true;
                    moved_any = true;
                }
            }
            if !moved {
                break;
            }
        }

        if !moved_any {
            // Final level: renumber communities in first-appearance order
            // over original node ids.
            let mut remap: Vec<Option<usize>> = vec![None; level_n];
            let mut next_id = 0;
            let mut partition = vec![0usize; n];
            for v in 0..n {
                let c = community[node_of_original[v]];
                let id = *remap[c].get_or_insert_with(|| {
                    let id = next_id;
                    next_id += 1;
                    id
                });
                partition[v] = id;
            }
            let q = modularity_of_partition(&m.weights, &partition)?;
            return Ok(ModularityResult {
                window_index: m.window_index,
                partition,
                q,
            });
        }

        // Aggregate communities into a smaller graph and recurse.
        let mut remap: Vec<Option<usize>> = vec![None; level_n];
        let mut next_id = 0;
        for node in 0..level_n {
            let c = community[node];
            if remap[c].is_none() {
                remap[c] = Some(next_id);
                next_id += 1;
            }
        }
        let mut new_adj: Vec<std::collections::BTreeMap<usize, f64>> =
            vec![Default::default(); next_id];
        for node in 0..level_n {
            let cu = remap[community[node]].unwrap();
            for &(nb, w) in &adj[node] {
                let cv = remap[community[nb]].unwrap();
                *new_adj[cu].entry(cv).or_insert(0.0) += w;
            }
        }
        adj = new_adj
            .into_iter()
            .map(|map| map.into_iter().collect())
            .collect();
        for slot in node_of_original.iter_mut() {
            *slot = remap[community[*slot]].unwrap();
        }
    }
}
