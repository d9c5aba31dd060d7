use crate::error::{Result, SculptError};
use crate::geometry::vec::dist;
use crate::io::Vec3;

/// Minimum-cost perfect matching of a square cost matrix (Hungarian
/// algorithm with potentials, O(n³)). Returns `assignment[row] = column`.
pub fn hungarian(cost: &[Vec<f64>]) -> Result<Vec<usize>> {
    let n = cost.len();
    if cost.iter().any(|r| r.len() != n) {
        return Err(SculptError::validation("assignment cost matrix must be square"));
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return Err(SculptError::validation("assignment costs must be finite"));
    }
    // 1-based arrays; column 0 is a sentinel.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let cur = cost[r0 - 1][col - 1] - u[r0] - v[col];
                if cur < minv[col] {
                    minv[col] = cur;
                    way[col] = col0;
                }
                if minv[col] < delta {
                    delta = minv[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for col in 1..=n {
        if owner[col] > 0 {
            assignment[owner[col] - 1] = col - 1;
        }
    }
    Ok(assignment)
}

/// Mean distance between the atoms of `a` and `b` under the matching that
/// minimizes the total distance; generated atoms carry no order.
pub fn matched_mean_error(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(SculptError::dimension("atom matching", format!("{} atoms", a.len()), b.len()));
    }
    let cost: Vec<Vec<f64>> = a.iter().map(|&p| b.iter().map(|&q| dist(p, q)).collect()).collect();
    let m = hungarian(&cost)?;
    Ok(m.iter().enumerate().map(|(i, &j)| cost[i][j]).sum::<f64>() / a.len() as f64)
}

/// Whether two type lists hold the same multiset.
pub fn same_type_multiset(a: &[usize], b: &[usize]) -> bool {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_unstable();
    y.sort_unstable();
    x == y
}
