//! Density-based clustering (DBSCAN) over 3D points.

use super::{NNIndex, Point3};

/// Runs DBSCAN with radius `eps` (inclusive) and density threshold
/// `min_pts`. A point's neighborhood includes the point itself.
///
/// Returns one entry per input point: `Some(cluster_id)` or `None` for
/// noise. Cluster ids are dense and assigned in order of discovery, which
/// makes the labeling deterministic for a given input order: seeds are
/// visited by ascending index and neighborhoods are expanded in ascending
/// index order.
pub fn dbscan(points: &[Point3], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let mut labels: Vec<Option<usize>> = vec![None; n];
    if n == 0 {
        return labels;
    }
    let index = NNIndex::build(points).expect("non-empty by construction");
    let mut visited = vec![false; n];
    let mut next_cluster = 0usize;

    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        visited[seed] = true;
        let neighbors = index.within_radius(&points[seed], eps);
        if neighbors.len() < min_pts {
            continue; // noise unless later absorbed as a border point
        }
        let cluster = next_cluster;
        next_cluster += 1;
        labels[seed] = Some(cluster);
        let mut frontier = std::collections::VecDeque::from(neighbors);
        while let Some(p) = frontier.pop_front() {
            if labels[p].is_none() {
                labels[p] = Some(cluster);
            }
            if visited[p] {
                continue;
            }
            visited[p] = true;
            let nb = index.within_radius(&points[p], eps);
            if nb.len() >= min_pts {
                frontier.extend(nb);
            }
        }
    }
    labels
}

/// Groups a DBSCAN labeling into per-cluster index lists, ordered by
/// cluster id; indices within a cluster are ascending.
pub fn clusters_from_labels(labels: &[Option<usize>]) -> Vec<Vec<usize>> {
    let k = labels.iter().flatten().max().map_or(0, |m| m + 1);
    let mut out = vec![Vec::new(); k];
    for (i, l) in labels.iter().enumerate() {
        if let Some(c) = l {
            out[*c].push(i);
        }
    }
    out
}
