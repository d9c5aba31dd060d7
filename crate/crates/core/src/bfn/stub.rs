use crate::encoder::{Conditioning, NetworkOutput, OutputNetwork};
use crate::error::{Result, SculptError};
use crate::io::Vec3;
use crate::numerics::{ParameterStore, Tape, Tensor};

/// A network that ignores its inputs and always predicts a fixed ligand:
/// the given coordinates and a one-hot type distribution.
#[derive(Debug, Clone)]
pub struct OracleNetwork {
    pub positions: Vec<Vec3>,
    pub types: Vec<usize>,
    pub num_types: usize,
}

impl OracleNetwork {
    pub fn new(positions: Vec<Vec3>, types: Vec<usize>, num_types: usize) -> Result<Self> {
        if positions.len() != types.len() {
            return Err(SculptError::dimension("oracle", format!("{} types", positions.len()), types.len()));
        }
        if let Some(&a) = types.iter().find(|&&a| a >= num_types) {
            return Err(SculptError::validation(format!("atom type {a} outside 0..{num_types}")));
        }
        Ok(OracleNetwork {
            positions,
            types,
            num_types,
        })
    }
}

impl OutputNetwork for OracleNetwork {
    fn num_types(&self) -> usize {
        self.num_types
    }

    fn forward(
        &self,
        tape: &mut Tape,
        _store: &ParameterStore,
        _cond: &Conditioning,
        mu: &Tensor,
        _theta: &Tensor,
        _t: f64,
    ) -> Result<NetworkOutput> {
        if mu.rows() != self.positions.len() {
            return Err(SculptError::dimension("oracle input", format!("{} atoms", self.positions.len()), mu.rows()));
        }
        let k = self.num_types;
        let mut lp = vec![f64::NEG_INFINITY; self.types.len() * k];
        for (r, &a) in self.types.iter().enumerate() {
            lp[r * k + a] = 0.0;
        }
        Ok(NetworkOutput {
            coords: tape.constant(Tensor::from_vec3s(&self.positions)),
            log_probs: tape.constant(Tensor::matrix(self.types.len(), k, lp)),
        })
    }
}
