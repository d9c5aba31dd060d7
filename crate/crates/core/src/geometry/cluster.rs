//! k-means++ coarse-graining of pocket atoms into virtual atoms.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::vec::{add, dist2, scale};
use crate::error::{Result, SculptError};
use crate::io::Vec3;

/// Cluster centroids and the assignment of every input point.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualAtomSet {
    pub centroids: Vec<Vec3>,
    pub assignment: Vec<usize>,
    /// Inertia after seeding, then after every Lloyd iteration.
    pub inertia_history: Vec<f64>,
}

impl VirtualAtomSet {
    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    /// Member indices of every cluster, in input order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.centroids.len()];
        for (i, &c) in self.assignment.iter().enumerate() {
            out[c].push(i);
        }
        out
    }

    pub fn inertia(&self) -> f64 {
        *self.inertia_history.last().unwrap_or(&0.0)
    }
}

/// Sum of squared distances from each point to its assigned centroid.
pub fn inertia(points: &[Vec3], centroids: &[Vec3], assignment: &[usize]) -> f64 {
    points
        .iter()
        .zip(assignment)
        .map(|(&p, &c)| dist2(p, centroids[c]))
        .sum()
}

/// D²-weighted seeding followed by Lloyd iterations until the assignment
/// stops changing or `max_iters` is reached. Clusters are never empty.
pub fn kmeans_pp(points: &[Vec3], k: usize, seed: u64, max_iters: usize) -> Result<VirtualAtomSet> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(SculptError::validation(format!(
            "k-means needs 1 <= K <= N (K = {k}, N = {n})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = points.iter().map(|&p| dist2(p, points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if r < w {
                        break;
                    }
                    r -= w;
                }
            }
            pick.expect("positive total weight")
        } else {
            // Every remaining point coincides with a center; take an unused index.
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        for (i, &p) in points.iter().enumerate() {
            d2[i] = d2[i].min(dist2(p, points[next]));
        }
    }
    let mut centroids: Vec<Vec3> = chosen.iter().map(|&i| points[i]).collect();
    // Seeds own themselves so duplicated points cannot leave a seed empty.
    let mut assignment = vec![usize::MAX; n];
    for (c, &i) in chosen.iter().enumerate() {
        assignment[i] = c;
    }
    assign(points, &centroids, &mut assignment);
    repair_empty(points, &mut centroids, &mut assignment);
    let mut history = vec![inertia(points, &centroids, &assignment)];

    for _ in 0..max_iters {
        centroids = means(points, &assignment, k);
        let before = assignment.clone();
        assign(points, &centroids, &mut assignment);
        repair_empty(points, &mut centroids, &mut assignment);
        history.push(inertia(points, &centroids, &assignment));
        if assignment == before {
            break;
        }
    }
    let centroids = means(points, &assignment, k);
    let last = inertia(points, &centroids, &assignment);
    if last < *history.last().unwrap() {
        history.push(last);
    }
    Ok(VirtualAtomSet {
        centroids,
        assignment,
        inertia_history: history,
    })
}

/// Nearest-centroid assignment; a point stays put when its current cluster
/// is among the nearest, otherwise the lowest index wins.
fn assign(points: &[Vec3], centroids: &[Vec3], assignment: &mut [usize]) {
    for (i, &p) in points.iter().enumerate() {
        let mut best = (f64::INFINITY, usize::MAX);
        for (c, &x) in centroids.iter().enumerate() {
            let d = dist2(p, x);
            if d < best.0 {
                best = (d, c);
            }
        }
        let current = assignment[i];
        if current < centroids.len() && dist2(p, centroids[current]) <= best.0 {
            continue;
        }
        assignment[i] = best.1;
    }
}

/// Moves the point farthest from its centroid (among clusters of size ≥ 2)
/// into each empty cluster as a singleton.
fn repair_empty(points: &[Vec3], centroids: &mut [Vec3], assignment: &mut [usize]) {
    let k = centroids.len();
    loop {
        let mut sizes = vec![0usize; k];
        for &c in assignment.iter() {
            sizes[c] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else { return };
        let mut worst = (f64::NEG_INFINITY, usize::MAX);
        for (i, &p) in points.iter().enumerate() {
            let c = assignment[i];
            if sizes[c] >= 2 {
                let d = dist2(p, centroids[c]);
                if d > worst.0 {
                    worst = (d, i);
                }
            }
        }
        assignment[worst.1] = empty;
        centroids[empty] = points[worst.1];
    }
}

fn means(points: &[Vec3], assignment: &[usize], k: usize) -> Vec<Vec3> {
    let mut sum = vec![[0.0; 3]; k];
    let mut count = vec![0usize; k];
    for (&p, &c) in points.iter().zip(assignment) {
        sum[c] = add(sum[c], p);
        count[c] += 1;
    }
    sum.into_iter()
        .zip(count)
        .map(|(s, c)| scale(s, 1.0 / c as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_groups() {
        let mut pts = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        pts.extend([[100.0, 0.0, 0.0], [101.0, 0.0, 0.0], [100.0, 2.0, 0.0]]);
        let set = kmeans_pp(&pts, 2, 3, 50).unwrap();
        let mut c = set.centroids.clone();
        c.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(c[0], [1.0 / 3.0, 1.0 / 3.0, 0.0]);
        assert_eq!(c[1], [301.0 / 3.0, 2.0 / 3.0, 0.0]);
    }

    #[test]
    fn one_cluster_per_point() {
        let pts: Vec<Vec3> = (0..6).map(|i| [i as f64, (i % 2) as f64, 0.5]).collect();
        let set = kmeans_pp(&pts, 6, 0, 10).unwrap();
        assert_eq!(set.inertia(), 0.0);
        assert!(set.members().iter().all(|m| m.len() == 1));
    }

    #[test]
    fn duplicates_never_leave_empty_clusters() {
        let pts = vec![[1.0, 1.0, 1.0]; 4];
        let set = kmeans_pp(&pts, 4, 9, 10).unwrap();
        assert!(set.members().iter().all(|m| m.len() == 1));
    }

    #[test]
    fn rejects_bad_k() {
        let pts = vec![[0.0; 3]; 2];
        assert!(kmeans_pp(&pts, 3, 0, 5).is_err());
        assert!(kmeans_pp(&pts, 0, 0, 5).is_err());
    }
}
