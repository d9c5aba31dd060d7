//! Dual-stream multi-head attention shared by the global and local stages.

use rand::Rng;

use crate::error::Result;
use crate::numerics::{Linear, Mlp, MlpSpec, ParameterStore, RbfBasis, Tape, Tensor, Var};

/// Directed edges with constant per-edge features (categorical one-hots).
#[derive(Debug, Clone, Default)]
pub struct EdgeList {
    pub sources: Vec<usize>,
    pub targets: Vec<usize>,
    /// One row per edge.
    pub features: Vec<Vec<f64>>,
}

impl EdgeList {
    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn push(&mut self, source: usize, target: usize, feature: Vec<f64>) {
        self.sources.push(source);
        self.targets.push(target);
        self.features.push(feature);
    }

    /// Edges whose `keep` flag is set.
    pub fn filter(&self, keep: &[bool]) -> EdgeList {
        let mut out = EdgeList::default();
        for e in 0..self.len() {
            if keep[e] {
                out.push(self.sources[e], self.targets[e], self.features[e].clone());
            }
        }
        out
    }

    /// Edges pointing at nodes below `limit`.
    pub fn targeting_below(&self, limit: usize) -> EdgeList {
        let keep: Vec<bool> = self.targets.iter().map(|&t| t < limit).collect();
        self.filter(&keep)
    }

    fn feature_tensor(&self, width: usize) -> Tensor {
        let mut data = Vec::with_capacity(self.len() * width);
        for f in &self.features {
            data.extend_from_slice(f);
        }
        Tensor::matrix(self.len(), width, data)
    }
}

/// `x[target] - x[source]` and its length, recorded on the tape.
pub fn relative_geometry(tape: &mut Tape, x: Var, sources: &[usize], targets: &[usize]) -> (Var, Var) {
    let xt = tape.gather_rows(x, targets);
    let xs = tape.gather_rows(x, sources);
    let rel = tape.sub(xt, xs);
    let dist = tape.row_norm(rel);
    (rel, dist)
}

/// Keeps an edge when the mean of its per-head scores exceeds `tau`;
/// edges flagged in `always` are kept regardless.
pub fn adaptive_edge_select(scores: &Tensor, always: &[bool], tau: f64) -> Vec<bool> {
    (0..scores.rows())
        .map(|e| {
            let row = scores.row(e);
            always[e] || row.iter().sum::<f64>() / row.len() as f64 > tau
        })
        .collect()
}

pub(crate) struct DualAttention {
    heads: usize,
    scale: f64,
    q: Linear,
    k: Mlp,
    v: Mlp,
    xq: Linear,
    xk: Mlp,
    xs: Mlp,
    edge_width: usize,
}

pub(crate) struct AttentionOutput {
    pub h: Var,
    pub x_moving: Var,
    /// Feature-stream attention, one row per edge and one column per head.
    pub scores: Tensor,
}

impl DualAttention {
    pub fn register(
        store: &mut ParameterStore,
        name: &str,
        hidden: usize,
        heads: usize,
        edge_width: usize,
        rbf_width: usize,
        zero_coords: bool,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let z = hidden + edge_width + rbf_width;
        let xs_spec = MlpSpec::new(&[z, hidden, heads]);
        Ok(DualAttention {
            heads,
            scale: 1.0 / ((hidden / heads) as f64).sqrt(),
            q: Linear::register(store, &format!("{name}.q"), hidden, hidden, false, rng)?,
            k: Mlp::register(store, &format!("{name}.k"), &MlpSpec::new(&[z, hidden, hidden]), rng)?,
            v: Mlp::register(store, &format!("{name}.v"), &MlpSpec::new(&[z, hidden, hidden]), rng)?,
            xq: Linear::register(store, &format!("{name}.xq"), hidden, hidden, false, rng)?,
            xk: Mlp::register(store, &format!("{name}.xk"), &MlpSpec::new(&[z, hidden, hidden]), rng)?,
            xs: Mlp::register(
                store,
                &format!("{name}.xs"),
                &if zero_coords { xs_spec.zero_last() } else { xs_spec },
                rng,
            )?,
            edge_width,
        })
    }

    /// One layer over nodes whose first `n_moving` rows have coordinates
    /// `x_moving`; the remaining rows sit at the constant `x_fixed`.
    ///
    /// Features are updated for every edge target; coordinates only for
    /// moving targets. Nodes without incoming edges pass through unchanged.
    #[allow(clippy::too_many_arguments)]
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        h: Var,
        x_moving: Var,
        x_fixed: &Tensor,
        edges: &EdgeList,
        basis: &RbfBasis,
    ) -> Result<AttentionOutput> {
        let n = tape.value(h).rows();
        let n_moving = tape.value(x_moving).rows();
        if edges.is_empty() {
            return Ok(AttentionOutput {
                h,
                x_moving,
                scores: Tensor::zeros(&[0, self.heads]),
            });
        }
        let x_all = if x_fixed.rows() > 0 && !x_fixed.is_empty() {
            let fixed = tape.constant(x_fixed.clone());
            tape.concat_rows(&[x_moving, fixed])
        } else {
            x_moving
        };
        let feat = tape.constant(edges.feature_tensor(self.edge_width));

        // Feature stream.
        let (_, dist) = relative_geometry(tape, x_all, &edges.sources, &edges.targets);
        let phi = tape.rbf(dist, basis);
        let hs = tape.gather_rows(h, &edges.sources);
        let z = tape.concat_cols(&[hs, feat, phi]);
        let q_all = self.q.forward(tape, store, h)?;
        let q = tape.gather_rows(q_all, &edges.targets);
        let k = self.k.forward(tape, store, z)?;
        let v = self.v.forward(tape, store, z)?;
        let logits = tape.head_dot(q, k, self.heads);
        let logits = tape.scale(logits, self.scale);
        let alpha = tape.segment_softmax(logits, &edges.targets, n);
        let scores = tape.value(alpha).clone();
        let msg = tape.head_scale(alpha, v, self.heads);
        let agg = tape.scatter_add_rows(msg, &edges.targets, n);
        let h = tape.add(h, agg);

        // Coordinate stream over edges into moving nodes.
        let moving = edges.targeting_below(n_moving);
        if moving.is_empty() {
            return Ok(AttentionOutput { h, x_moving, scores });
        }
        let feat = tape.constant(moving.feature_tensor(self.edge_width));
        let (rel, dist) = relative_geometry(tape, x_all, &moving.sources, &moving.targets);
        let phi = tape.rbf(dist, basis);
        let hs = tape.gather_rows(h, &moving.sources);
        let z = tape.concat_cols(&[hs, feat, phi]);
        let q_all = self.xq.forward(tape, store, h)?;
        let q = tape.gather_rows(q_all, &moving.targets);
        let k = self.xk.forward(tape, store, z)?;
        let logits = tape.head_dot(q, k, self.heads);
        let logits = tape.scale(logits, self.scale);
        let alpha = tape.segment_softmax(logits, &moving.targets, n_moving);
        let s = self.xs.forward(tape, store, z)?;
        let gated = tape.mul(alpha, s);
        let w = tape.mean_cols(gated);
        let delta = tape.col_scale(w, rel);
        let delta = tape.scatter_add_rows(delta, &moving.targets, n_moving);
        let x_moving = tape.add(x_moving, delta);
        Ok(AttentionOutput { h, x_moving, scores })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selection_rule() {
        let scores = Tensor::from_rows(&[[0.04, 0.08], [0.05, 0.05], [0.0, 0.0]]);
        let keep = adaptive_edge_select(&scores, &[false, false, true], 0.05);
        assert_eq!(keep, vec![true, false, true]);
    }
}
