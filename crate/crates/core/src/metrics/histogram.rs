use serde::{Deserialize, Serialize};

use crate::error::{Result, SculptError};
use crate::geometry::vec::dist;
use crate::io::Atom3D;

/// Normalized histogram over uniform bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub masses: Vec<f64>,
}

/// Uniform binning of `[lo, hi]`; the upper edge belongs to the last bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Binning {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl Binning {
    pub const fn new(lo: f64, hi: f64, bins: usize) -> Self {
        Binning { lo, hi, bins }
    }

    pub fn edges(&self) -> Vec<f64> {
        let w = (self.hi - self.lo) / self.bins as f64;
        (0..=self.bins).map(|i| self.lo + i as f64 * w).collect()
    }

    /// Bin of `v`, or `None` outside `[lo, hi]`.
    pub fn index(&self, v: f64) -> Option<usize> {
        if !(v >= self.lo && v <= self.hi) {
            return None;
        }
        let i = ((v - self.lo) / (self.hi - self.lo) * self.bins as f64).floor() as usize;
        Some(i.min(self.bins - 1))
    }

    /// Histogram of the in-range values; errors when none fall in range.
    pub fn histogram(&self, values: impl IntoIterator<Item = f64>) -> Result<Histogram> {
        let mut counts = vec![0.0; self.bins];
        let mut total = 0usize;
        for v in values {
            if let Some(i) = self.index(v) {
                counts[i] += 1.0;
                total += 1;
            }
        }
        if total == 0 {
            return Err(SculptError::validation("no pairs in range"));
        }
        let n = total as f64;
        Ok(Histogram {
            edges: self.edges(),
            masses: counts.into_iter().map(|c| c / n).collect(),
        })
    }
}

fn kl_term(p: f64, m: f64) -> f64 {
    if p > 0.0 {
        p * (p / m).log2()
    } else {
        0.0
    }
}

/// Jensen–Shannon divergence in bits, in `[0, 1]`.
pub fn jsd(p: &Histogram, q: &Histogram) -> Result<f64> {
    if p.edges != q.edges || p.masses.len() != q.masses.len() {
        return Err(SculptError::validation("histograms have different bin edges"));
    }
    let mut acc = 0.0;
    for (&a, &b) in p.masses.iter().zip(&q.masses) {
        let m = 0.5 * (a + b);
        acc += 0.5 * kl_term(a, m) + 0.5 * kl_term(b, m);
    }
    Ok(acc.clamp(0.0, 1.0))
}

/// Which pairwise distances are pooled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DistanceMode {
    /// Carbon–carbon pairs within 2 Å, 100 bins.
    Cc2,
    /// All pairs within 12 Å, 120 bins.
    All12,
}

impl DistanceMode {
    pub fn binning(self) -> Binning {
        match self {
            DistanceMode::Cc2 => Binning::new(0.0, 2.0, 100),
            DistanceMode::All12 => Binning::new(0.0, 12.0, 120),
        }
    }

    fn accepts(self, a: &Atom3D, b: &Atom3D) -> bool {
        match self {
            DistanceMode::Cc2 => a.element == "C" && b.element == "C",
            DistanceMode::All12 => true,
        }
    }
}

/// Intra-molecular pair distances selected by `mode`, pooled over molecules
/// in order.
pub fn pair_distances(molecules: &[Vec<Atom3D>], mode: DistanceMode) -> Vec<f64> {
    let mut out = Vec::new();
    for atoms in molecules {
        for i in 0..atoms.len() {
            for j in i + 1..atoms.len() {
                if mode.accepts(&atoms[i], &atoms[j]) {
                    out.push(dist(atoms[i].position, atoms[j].position));
                }
            }
        }
    }
    out
}

pub fn distance_histogram(molecules: &[Vec<Atom3D>], mode: DistanceMode) -> Result<Histogram> {
    mode.binning().histogram(pair_distances(molecules, mode))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(el: &str, x: f64) -> Atom3D {
        Atom3D {
            element: el.to_string(),
            position: [x, 0.0, 0.0],
        }
    }

    fn hist(m: &[f64]) -> Histogram {
        Histogram {
            edges: (0..=m.len()).map(|i| i as f64).collect(),
            masses: m.to_vec(),
        }
    }

    #[test]
    fn jsd_examples() {
        let p = hist(&[0.5, 0.5]);
        assert_eq!(jsd(&p, &p).unwrap(), 0.0);
        assert_eq!(jsd(&hist(&[1.0, 0.0]), &hist(&[0.0, 1.0])).unwrap(), 1.0);
        let q = hist(&[0.9, 0.1]);
        let direct = 0.5 * (0.5 * (0.5f64 / 0.7).log2() + 0.5 * (0.5f64 / 0.3).log2())
            + 0.5 * (0.9 * (0.9f64 / 0.7).log2() + 0.1 * (0.1f64 / 0.3).log2());
        assert!((jsd(&p, &q).unwrap() - direct).abs() < 1e-12);
        assert_eq!(jsd(&p, &q).unwrap(), jsd(&q, &p).unwrap());
        assert!(jsd(&p, &hist(&[1.0])).is_err());
    }

    #[test]
    fn single_cc_pair() {
        let h = distance_histogram(&[vec![atom("C", 0.0), atom("C", 1.5)]], DistanceMode::Cc2).unwrap();
        assert_eq!(h.masses.iter().filter(|&&m| m > 0.0).count(), 1);
        let bin = h.masses.iter().position(|&m| m == 1.0).unwrap();
        assert!(h.edges[bin] <= 1.5 && 1.5 < h.edges[bin + 1]);
    }

    #[test]
    fn element_filter() {
        let err = distance_histogram(&[vec![atom("C", 0.0), atom("N", 1.5)]], DistanceMode::Cc2).unwrap_err();
        assert!(err.to_string().contains("no pairs in range"));
        let cl = distance_histogram(&[vec![atom("C", 0.0), atom("Cl", 1.5)]], DistanceMode::Cc2);
        assert!(cl.is_err());
    }

    #[test]
    fn upper_edge_is_inclusive() {
        let b = Binning::new(0.0, 2.0, 100);
        assert_eq!(b.index(2.0), Some(99));
        assert_eq!(b.index(2.0000001), None);
        assert_eq!(b.index(0.0), Some(0));
    }
}
