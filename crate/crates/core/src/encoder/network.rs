use rand::Rng;

use super::attention::{adaptive_edge_select, relative_geometry, DualAttention, EdgeList};
use super::config::EncoderConfig;
use crate::error::{Result, SculptError};
use crate::geometry::{build_local_edges, build_unified_graph, kmeans_pp, EdgeType, VirtualAtomSet};
use crate::io::{AtomVocabulary, ProteinPocket, SurfaceGraph, Vec3};
use crate::numerics::{Linear, Mlp, MlpSpec, ParameterStore, Tape, Tensor, Var};

/// Everything about a complex that does not depend on the flow state or the
/// parameters: pocket, surface, their constant inputs and the virtual-atom
/// clustering.
#[derive(Debug, Clone)]
pub struct Conditioning {
    pub pocket: ProteinPocket,
    pub surface: SurfaceGraph,
    pub clusters: VirtualAtomSet,
    pocket_positions: Tensor,
    pocket_types: Tensor,
    surface_positions: Tensor,
    surface_features: Tensor,
}

impl Conditioning {
    pub fn new(
        pocket: ProteinPocket,
        surface: SurfaceGraph,
        vocab: &AtomVocabulary,
        config: &EncoderConfig,
    ) -> Result<Self> {
        let positions = pocket.positions();
        let clusters = kmeans_pp(
            &positions,
            config.clusters_for(positions.len()),
            config.cluster_seed,
            config.cluster_iters,
        )?;
        let types: Vec<Vec<f64>> = pocket.atoms().iter().map(|a| vocab.one_hot(&a.atom.element)).collect();
        let features: Vec<[f64; 4]> = surface.vertices().iter().map(|v| v.feature.as_array()).collect();
        Ok(Conditioning {
            pocket_positions: Tensor::from_vec3s(&positions),
            pocket_types: Tensor::from_rows(&types),
            surface_positions: Tensor::from_vec3s(&surface.positions()),
            surface_features: Tensor::from_rows(&features),
            pocket,
            surface,
            clusters,
        })
    }

    /// Same complex after applying `f` to every coordinate. Clustering is
    /// recomputed from the moved pocket.
    pub fn map_positions(&self, f: impl Fn(Vec3) -> Vec3 + Copy, vocab: &AtomVocabulary, config: &EncoderConfig) -> Result<Self> {
        Conditioning::new(self.pocket.map_positions(f), self.surface.map_positions(f), vocab, config)
    }
}

/// Network predictions recorded on a tape.
#[derive(Debug, Clone, Copy)]
pub struct NetworkOutput {
    /// Predicted clean coordinates, `N × 3`.
    pub coords: Var,
    /// Row-wise log-probabilities of the atom types, `N × K`.
    pub log_probs: Var,
}

/// Anything mapping flow parameters to predictions of the clean ligand.
pub trait OutputNetwork: Sync {
    fn num_types(&self) -> usize;

    fn forward(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        cond: &Conditioning,
        mu: &Tensor,
        theta: &Tensor,
        t: f64,
    ) -> Result<NetworkOutput>;
}

/// Sinusoidal features of `t` at frequencies spaced geometrically from 1 to 1000.
pub fn time_embedding(t: f64, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    let freq = |j: usize| {
        if half <= 1 {
            1.0
        } else {
            1000f64.powf(j as f64 / (half - 1) as f64)
        }
    };
    let mut out: Vec<f64> = (0..half).map(|j| (freq(j) * t).sin()).collect();
    out.extend((0..half).map(|j| (freq(j) * t).cos()));
    out
}

struct BabLayer {
    f_q: Mlp,
    f_k: Mlp,
    f_v: Mlp,
    f_h: Mlp,
}

/// The conditional output network: boundary-aware block over the surface,
/// global attention against virtual atoms and local refinement against
/// pocket atoms.
pub struct ScaNetwork {
    config: EncoderConfig,
    num_types: usize,
    ligand_embed: Linear,
    protein_embed: Linear,
    surface_embed: Linear,
    bab: Vec<BabLayer>,
    virtual_value: Mlp,
    virtual_score: Linear,
    global: Vec<DualAttention>,
    local: Vec<DualAttention>,
    type_head: Mlp,
}

const GLOBAL_EDGE_TYPES: usize = 5;
const LOCAL_EDGE_FEATURES: usize = 5;

impl ScaNetwork {
    pub fn register(
        store: &mut ParameterStore,
        config: &EncoderConfig,
        num_types: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        config.validate()?;
        if num_types < 2 {
            return Err(SculptError::config("at least two atom types are required"));
        }
        let d = config.hidden;
        let g = config.rbf.len();
        let edge_in = 2 * d + EdgeType::COUNT * g;
        let zero = config.identity_init;
        let bab = (0..config.bab_layers)
            .map(|l| {
                let name = format!("bab.{l}");
                let v_spec = MlpSpec::new(&[edge_in, d, 1]);
                Ok(BabLayer {
                    f_q: Mlp::register(store, &format!("{name}.q"), &MlpSpec::new(&[d, d, d]), rng)?,
                    f_k: Mlp::register(store, &format!("{name}.k"), &MlpSpec::new(&[edge_in, d, d]), rng)?,
                    f_v: Mlp::register(
                        store,
                        &format!("{name}.v"),
                        &if zero { v_spec.zero_last() } else { v_spec },
                        rng,
                    )?,
                    f_h: Mlp::register(store, &format!("{name}.h"), &MlpSpec::new(&[edge_in, d, d]), rng)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let global = (0..config.global_layers)
            .map(|l| DualAttention::register(store, &format!("global.{l}"), d, config.heads, GLOBAL_EDGE_TYPES, g, zero, rng))
            .collect::<Result<Vec<_>>>()?;
        let local = (0..config.local_layers)
            .map(|l| DualAttention::register(store, &format!("local.{l}"), d, config.heads, LOCAL_EDGE_FEATURES, g, zero, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(ScaNetwork {
            ligand_embed: Linear::register(store, "embed.ligand", num_types + config.time_dim, d, false, rng)?,
            protein_embed: Linear::register(store, "embed.protein", num_types, d, false, rng)?,
            surface_embed: Linear::register(store, "embed.surface", 4, d, false, rng)?,
            bab,
            virtual_value: Mlp::register(store, "virtual.value", &MlpSpec::new(&[d + g, d, d]), rng)?,
            virtual_score: Linear::register(store, "virtual.score", d + g, 1, false, rng)?,
            global,
            local,
            type_head: Mlp::register(store, "head.type", &MlpSpec::new(&[d, d, num_types]), rng)?,
            config: config.clone(),
            num_types,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    /// Initial ligand features from type probabilities and time.
    pub fn embed_ligand(&self, tape: &mut Tape, store: &ParameterStore, theta: &Tensor, t: f64) -> Result<Var> {
        check_theta(theta, self.num_types)?;
        let temb = time_embedding(t, self.config.time_dim);
        let rows: Vec<Vec<f64>> = (0..theta.rows())
            .map(|r| theta.row(r).iter().chain(&temb).copied().collect())
            .collect();
        let x = tape.constant(Tensor::from_rows(&rows));
        self.ligand_embed.forward(tape, store, x)
    }

    fn boundary_block(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        cond: &Conditioning,
        h_lig: Var,
        x_lig: Var,
    ) -> Result<(Var, Var)> {
        let n_s = cond.surface.len();
        let n_m = tape.value(x_lig).rows();
        let mu = tape.value(x_lig).to_vec3s();
        let k = self.config.knn_k.min(n_s + n_m - 1);
        let graph = build_unified_graph(&cond.surface, &mu, k)?;
        let edges: Vec<_> = graph.edges.iter().filter(|e| e.target >= n_s).collect();
        if edges.is_empty() {
            return Ok((h_lig, x_lig));
        }
        let sources: Vec<usize> = edges.iter().map(|e| e.source).collect();
        let targets: Vec<usize> = edges.iter().map(|e| e.target).collect();
        let local_t: Vec<usize> = targets.iter().map(|t| t - n_s).collect();
        let types: Vec<usize> = edges.iter().map(|e| e.edge_type.index()).collect();

        let surf_in = tape.constant(cond.surface_features.clone());
        let h_surf = self.surface_embed.forward(tape, store, surf_in)?;
        let x_surf = tape.constant(cond.surface_positions.clone());
        let basis = self.config.rbf.basis();
        let scale = 1.0 / (self.config.hidden as f64).sqrt();
        let (mut h_lig, mut x_lig) = (h_lig, x_lig);
        for layer in &self.bab {
            let x_all = tape.concat_rows(&[x_surf, x_lig]);
            let h_all = tape.concat_rows(&[h_surf, h_lig]);
            // x_j - x_m: from the receiving ligand atom towards its neighbour.
            let (rel_tm, dist) = relative_geometry(tape, x_all, &sources, &targets);
            let rel = tape.scale(rel_tm, -1.0);
            let phi = tape.rbf(dist, &basis);
            let typed = tape.block_place(phi, &types, EdgeType::COUNT);
            let ht = tape.gather_rows(h_all, &targets);
            let hs = tape.gather_rows(h_all, &sources);
            let e = tape.concat_cols(&[ht, hs, typed]);
            let q_all = layer.f_q.forward(tape, store, h_lig)?;
            let q = tape.gather_rows(q_all, &local_t);
            let kk = layer.f_k.forward(tape, store, e)?;
            let logits = tape.head_dot(q, kk, 1);
            let logits = tape.scale(logits, scale);
            let alpha = tape.segment_softmax(logits, &local_t, n_m);
            let v = layer.f_v.forward(tape, store, e)?;
            let w = tape.mul(alpha, v);
            let dx = tape.col_scale(w, rel);
            let dx = tape.scatter_add_rows(dx, &local_t, n_m);
            let m = layer.f_h.forward(tape, store, e)?;
            let dh = tape.col_scale(alpha, m);
            let dh = tape.scatter_add_rows(dh, &local_t, n_m);
            x_lig = tape.add(x_lig, dx);
            h_lig = tape.add(h_lig, dh);
        }
        Ok((h_lig, x_lig))
    }

    /// Virtual-atom features: softmax-weighted sums over each cluster of a
    /// per-atom MLP of the atom feature and its distance to the centroid.
    pub fn virtual_features(&self, tape: &mut Tape, store: &ParameterStore, cond: &Conditioning) -> Result<Var> {
        let clusters = &cond.clusters;
        let k = clusters.len();
        if clusters.members().iter().any(|m| m.is_empty()) {
            return Err(SculptError::validation("empty virtual-atom cluster"));
        }
        let types = tape.constant(cond.pocket_types.clone());
        let h_p = self.protein_embed.forward(tape, store, types)?;
        let centroids: Vec<Vec3> = clusters.assignment.iter().map(|&c| clusters.centroids[c]).collect();
        let pos = tape.constant(cond.pocket_positions.clone());
        let cen = tape.constant(Tensor::from_vec3s(&centroids));
        let rel = tape.sub(pos, cen);
        let dist = tape.row_norm(rel);
        let phi = tape.rbf(dist, &self.config.rbf.basis());
        let z = tape.concat_cols(&[h_p, phi]);
        let value = self.virtual_value.forward(tape, store, z)?;
        let score = self.virtual_score.forward(tape, store, z)?;
        let alpha = tape.segment_softmax(score, &clusters.assignment, k);
        let weighted = tape.col_scale(alpha, value);
        Ok(tape.scatter_add_rows(weighted, &clusters.assignment, k))
    }

    fn global_block(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        cond: &Conditioning,
        h_lig: Var,
        x_lig: Var,
    ) -> Result<(Var, Var)> {
        let n_m = tape.value(x_lig).rows();
        let h_v = self.virtual_features(tape, store, cond)?;
        let k = cond.clusters.len();
        let n = n_m + k;
        let mut edges = EdgeList::default();
        let mut self_loop = Vec::new();
        for s in 0..n {
            for t in 0..n {
                let ty = match (s < n_m, t < n_m) {
                    _ if s == t => 4,
                    (true, true) => 0,
                    (false, true) => 1,
                    (true, false) => 2,
                    (false, false) => 3,
                };
                let mut f = vec![0.0; GLOBAL_EDGE_TYPES];
                f[ty] = 1.0;
                edges.push(s, t, f);
                self_loop.push(s == t);
            }
        }
        let x_virtual = Tensor::from_vec3s(&cond.clusters.centroids);
        let basis = self.config.rbf.basis();
        let mut h = tape.concat_rows(&[h_lig, h_v]);
        let mut x = x_lig;
        for (l, layer) in self.global.iter().enumerate() {
            let out = layer.forward(tape, store, h, x, &x_virtual, &edges, &basis)?;
            h = out.h;
            x = out.x_moving;
            if l + 1 < self.global.len() {
                let keep = adaptive_edge_select(&out.scores, &self_loop, self.config.tau);
                self_loop = self_loop.iter().zip(&keep).filter(|(_, &k)| k).map(|(&s, _)| s).collect();
                edges = edges.filter(&keep);
            }
        }
        let lig_rows: Vec<usize> = (0..n_m).collect();
        Ok((tape.gather_rows(h, &lig_rows), x))
    }

    fn local_block(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        cond: &Conditioning,
        h_lig: Var,
        x_lig: Var,
    ) -> Result<(Var, Var)> {
        let n_m = tape.value(x_lig).rows();
        let current = tape.value(x_lig).to_vec3s();
        let protein = cond.pocket.positions();
        let set = build_local_edges(&current, &protein, &self.config.local_thresholds)?;
        let mut edges = EdgeList::default();
        for e in set.edges.iter().filter(|e| e.target < n_m) {
            let mut f = vec![0.0; LOCAL_EDGE_FEATURES];
            f[e.bin] = 1.0;
            f[3 + usize::from(e.source >= n_m)] = 1.0;
            edges.push(e.source, e.target, f);
        }
        let types = tape.constant(cond.pocket_types.clone());
        let h_p = self.protein_embed.forward(tape, store, types)?;
        let basis = self.config.rbf.basis();
        let lig_rows: Vec<usize> = (0..n_m).collect();
        let (mut h_lig, mut x_lig) = (h_lig, x_lig);
        for layer in &self.local {
            let h = tape.concat_rows(&[h_lig, h_p]);
            let out = layer.forward(tape, store, h, x_lig, &cond.pocket_positions, &edges, &basis)?;
            h_lig = tape.gather_rows(out.h, &lig_rows);
            x_lig = out.x_moving;
        }
        Ok((h_lig, x_lig))
    }
}

fn check_theta(theta: &Tensor, k: usize) -> Result<()> {
    if theta.cols() != k || theta.shape().len() != 2 {
        return Err(SculptError::dimension("type parameters", format!("{k} columns"), theta.cols()));
    }
    for r in 0..theta.rows() {
        let row = theta.row(r);
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-6 || row.iter().any(|&p| !(p >= 0.0)) {
            return Err(SculptError::validation(format!(
                "type parameters of atom {r} are not a probability row (sum {s})"
            )));
        }
    }
    Ok(())
}

impl OutputNetwork for ScaNetwork {
    fn num_types(&self) -> usize {
        self.num_types
    }

    fn forward(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        cond: &Conditioning,
        mu: &Tensor,
        theta: &Tensor,
        t: f64,
    ) -> Result<NetworkOutput> {
        if !(0.0..=1.0).contains(&t) {
            return Err(SculptError::validation(format!("time {t} outside [0, 1]")));
        }
        if mu.shape().len() != 2 || mu.cols() != 3 || mu.rows() == 0 {
            return Err(SculptError::dimension("coordinate means", "N x 3 with N >= 1", format!("{:?}", mu.shape())));
        }
        if mu.rows() != theta.rows() {
            return Err(SculptError::dimension("type parameters", format!("{} rows", mu.rows()), theta.rows()));
        }
        if !mu.is_finite() {
            return Err(SculptError::numeric("coordinate means are not finite"));
        }
        let h = self.embed_ligand(tape, store, theta, t)?;
        let x = tape.constant(mu.clone());
        let (h, x) = self.boundary_block(tape, store, cond, h, x)?;
        let (h, x) = self.global_block(tape, store, cond, h, x)?;
        let (h, x) = self.local_block(tape, store, cond, h, x)?;
        let logits = self.type_head.forward(tape, store, h)?;
        let log_probs = tape.log_softmax_rows(logits);
        Ok(NetworkOutput { coords: x, log_probs })
    }
}

/// Plain-valued predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaOutput {
    pub coords: Vec<Vec3>,
    pub probs: Vec<Vec<f64>>,
}

/// Runs `network` once without keeping the tape.
pub fn sca_forward(
    network: &dyn OutputNetwork,
    store: &ParameterStore,
    cond: &Conditioning,
    mu: &Tensor,
    theta: &Tensor,
    t: f64,
) -> Result<ScaOutput> {
    let mut tape = Tape::new();
    let out = network.forward(&mut tape, store, cond, mu, theta, t)?;
    let lp = tape.value(out.log_probs);
    Ok(ScaOutput {
        coords: tape.value(out.coords).to_vec3s(),
        probs: (0..lp.rows()).map(|r| lp.row(r).iter().map(|v| v.exp()).collect()).collect(),
    })
}
