//! Linear layers and multi-layer perceptrons over the tape.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::ParameterStore;
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Result, SculptError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Silu,
    Identity,
}

impl Activation {
    fn apply(self, tape: &mut Tape, x: Var) -> Var {
        match self {
            Activation::Silu => tape.silu(x),
            Activation::Identity => x,
        }
    }
}

/// Uniform fan-in initialization: entries drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
pub fn init_uniform(rng: &mut impl Rng, fan_in: usize, rows: usize, cols: usize) -> Tensor {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    Tensor::matrix(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.random_range(-bound..bound)).collect(),
    )
}

/// Affine map `x W + b` with `W: (input, output)` and `b: (1, output)`.
#[derive(Debug, Clone)]
pub struct Linear {
    name: String,
    weight: usize,
    bias: usize,
    input: usize,
    output: usize,
}

impl Linear {
    pub fn register(
        store: &mut ParameterStore,
        name: &str,
        input: usize,
        output: usize,
        zero: bool,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let (w, b) = if zero {
            (Tensor::zeros(&[input, output]), Tensor::zeros(&[1, output]))
        } else {
            (
                init_uniform(rng, input, input, output),
                init_uniform(rng, input, 1, output),
            )
        };
        let weight = store.insert(format!("{name}.w"), w)?;
        let bias = store.insert(format!("{name}.b"), b)?;
        Ok(Linear {
            name: name.to_string(),
            weight,
            bias,
            input,
            output,
        })
    }

    pub fn input(&self) -> usize {
        self.input
    }

    pub fn output(&self) -> usize {
        self.output
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn weight_index(&self) -> usize {
        self.weight
    }

    pub fn bias_index(&self) -> usize {
        self.bias
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParameterStore, x: Var) -> Result<Var> {
        let cols = tape.value(x).cols();
        if cols != self.input {
            return Err(SculptError::dimension(
                format!("layer {}", self.name),
                format!("{} input columns", self.input),
                cols,
            ));
        }
        let w = tape.param_at(store, self.weight);
        let b = tape.param_at(store, self.bias);
        let y = tape.matmul(x, w);
        Ok(tape.add_row(y, b))
    }
}

/// Layer widths of an MLP, input first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    pub activation: Activation,
    /// Zero-initialize the final layer so the MLP starts as the constant 0.
    pub zero_last: bool,
}

impl MlpSpec {
    pub fn new(widths: &[usize]) -> Self {
        MlpSpec {
            widths: widths.to_vec(),
            activation: Activation::Silu,
            zero_last: false,
        }
    }

    pub fn zero_last(mut self) -> Self {
        self.zero_last = true;
        self
    }
}

/// Stack of linear layers with an activation between consecutive layers
/// (none after the last).
#[derive(Debug, Clone)]
pub struct Mlp {
    layers: Vec<Linear>,
    activation: Activation,
}

impl Mlp {
    pub fn register(
        store: &mut ParameterStore,
        name: &str,
        spec: &MlpSpec,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if spec.widths.len() < 2 {
            return Err(SculptError::config(format!(
                "MLP {name} needs at least input and output widths"
            )));
        }
        let n = spec.widths.len() - 1;
        let layers = (0..n)
            .map(|i| {
                Linear::register(
                    store,
                    &format!("{name}.{i}"),
                    spec.widths[i],
                    spec.widths[i + 1],
                    spec.zero_last && i == n - 1,
                    rng,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Mlp {
            layers,
            activation: spec.activation,
        })
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub fn input(&self) -> usize {
        self.layers[0].input
    }

    pub fn output(&self) -> usize {
        self.layers.last().unwrap().output
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParameterStore, x: Var) -> Result<Var> {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(tape, store, h)?;
            if i + 1 < self.layers.len() {
                h = self.activation.apply(tape, h);
            }
        }
        Ok(h)
    }
}

/// Evaluates `mlp` on a plain input matrix.
pub fn mlp_forward(store: &ParameterStore, input: &Tensor, mlp: &Mlp) -> Result<Tensor> {
    let mut tape = Tape::new();
    let x = tape.constant(input.clone());
    let y = mlp.forward(&mut tape, store, x)?;
    Ok(tape.value(y).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_linear_passes_input_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParameterStore::new();
        let mlp = Mlp::register(&mut store, "id", &MlpSpec::new(&[3, 3]), &mut rng).unwrap();
        let w = mlp.layers()[0].weight_index();
        let b = mlp.layers()[0].bias_index();
        *store.value_at_mut(w) = Tensor::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        store.value_at_mut(b).fill(0.0);
        let y = mlp_forward(&store, &Tensor::from_rows(&[[1.0, 2.0, 3.0]]), &mlp).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParameterStore::new();
        let mlp = Mlp::register(&mut store, "z", &MlpSpec::new(&[2, 4]).zero_last(), &mut rng).unwrap();
        let y = mlp_forward(&store, &Tensor::from_rows(&[[5.0, -3.0]]), &mlp).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_mismatch_names_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParameterStore::new();
        let mlp = Mlp::register(&mut store, "enc", &MlpSpec::new(&[3, 4, 2]), &mut rng).unwrap();
        let err = mlp_forward(&store, &Tensor::from_rows(&[[1.0, 2.0]]), &mlp).unwrap_err();
        assert!(err.to_string().contains("layer enc.0"), "{err}");
    }

    /// Plain triple-loop evaluation used as an independent oracle.
    fn dense_matmul(a: &Tensor, b: &Tensor) -> Tensor {
        let (m, k, n) = (a.rows(), a.cols(), b.cols());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[i * n + j] = (0..k).map(|p| a.get(i, p) * b.get(p, j)).sum();
            }
        }
        Tensor::matrix(m, n, out)
    }

    #[test]
    fn two_layer_mlp_matches_naive_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut store = ParameterStore::new();
        let mlp = Mlp::register(&mut store, "m", &MlpSpec::new(&[5, 8, 3]), &mut rng).unwrap();
        let x = init_uniform(&mut rng, 1, 4, 5);
        let y = mlp_forward(&store, &x, &mlp).unwrap();

        let layer = |x: &Tensor, l: &Linear| {
            let mut z = dense_matmul(x, store.value_at(l.weight_index()));
            let b = store.value_at(l.bias_index());
            for r in 0..z.rows() {
                for (v, bv) in z.row_mut(r).iter_mut().zip(b.data()) {
                    *v += bv;
                }
            }
            z
        };
        let mut h = layer(&x, &mlp.layers()[0]);
        h.data_mut().iter_mut().for_each(|v| *v = *v / (1.0 + (-*v).exp()));
        let expected = layer(&h, &mlp.layers()[1]);
        assert!(y.max_abs_diff(&expected) < 1e-12);
    }
}
