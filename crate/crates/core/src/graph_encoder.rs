//! Five-layer GIN over molecular graphs, followed by a linear projection to
//! the text width and truncation or zero padding to a fixed node budget.
//!
//! Layer update, for every atom `i`:
//!
//! ```text
//! z_i' = MLP_atom( z_i + Σ_{j ∈ N(i)} ( z_j + MLP_bond(e_ij) ) )
//! ```
//!
//! The initial state `z_i` is the sum of one learned embedding per integer
//! atom feature.

use alloc::format;
use alloc::vec::Vec;

use crate::chem::{MolGraph, ATOM_FEATURES, ATOM_FEATURE_SIZES, BOND_FEATURE_SIZES};
use crate::error::{contract_err, dim_err, Result};
use crate::numerics::{Initializer, Mlp, ParamId, ParamStore, Tape, Tensor, Var};

pub const GIN_LAYERS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphEncoderConfig {
    /// GIN hidden width `d_g`.
    pub hidden: usize,
    /// Fixed number of output rows `l`.
    pub max_nodes: usize,
    /// Output width `d`, shared with the text model.
    pub output_dim: usize,
}

impl Default for GraphEncoderConfig {
    fn default() -> Self {
        Self { hidden: 128, max_nodes: 64, output_dim: 256 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GinLayer {
    pub index: usize,
    /// `d_g -> 2 d_g -> d_g`
    pub mlp_atom: Mlp,
    /// one-hot bond order `-> d_g -> d_g`
    pub mlp_bond: Mlp,
}

/// Graph-encoder output: `l×d` rows, the first `valid_len` of them real.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphEmbedding {
    pub values: Var,
    pub valid_len: usize,
    pub mask: Vec<bool>,
}

/// Graph-side tensors derived once per molecule and shared by all layers.
struct GraphInputs {
    sources: Vec<usize>,
    targets: Vec<usize>,
    bond_of_edge: Vec<usize>,
    bond_onehot: Option<Var>,
}

impl GraphInputs {
    fn new(tape: &mut Tape, graph: &MolGraph) -> Result<Self> {
        let edges = graph.directed_edges();
        let width = BOND_FEATURE_SIZES[0];
        let bond_onehot = if graph.bonds.is_empty() {
            None
        } else {
            let mut t = Tensor::zeros(&[graph.num_bonds(), width]);
            for (k, f) in graph.bond_features.iter().enumerate() {
                t.row_mut(k)[f[0] as usize] = 1.0;
            }
            Some(tape.constant(t)?)
        };
        Ok(Self {
            sources: edges.iter().map(|e| e.0).collect(),
            targets: edges.iter().map(|e| e.1).collect(),
            bond_of_edge: edges.iter().map(|e| e.2).collect(),
            bond_onehot,
        })
    }
}

impl GinLayer {
    pub fn new(store: &mut ParamStore, init: &mut Initializer, index: usize, hidden: usize) -> Result<Self> {
        let prefix = format!("graph_encoder.layer{index}");
        Ok(Self {
            index,
            mlp_atom: Mlp::new(store, init, &format!("{prefix}.mlp_atom"), hidden, 2 * hidden, hidden)?,
            mlp_bond: Mlp::new(store, init, &format!("{prefix}.mlp_bond"), BOND_FEATURE_SIZES[0], hidden, hidden)?,
        })
    }

    /// One message-passing step. `z` holds one row per atom.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, z: Var, graph: &MolGraph) -> Result<Var> {
        let inputs = GraphInputs::new(tape, graph)?;
        self.forward_with(tape, store, z, graph.num_atoms(), &inputs)
    }

    fn forward_with(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        z: Var,
        n: usize,
        inputs: &GraphInputs,
    ) -> Result<Var> {
        let rows = tape.value(z).rows();
        if tape.shape(z).len() != 2 || rows != n {
            return Err(dim_err!("GIN layer got {:?} node states for {} atoms", tape.shape(z), n));
        }
        let h = match inputs.bond_onehot {
            None => z,
            Some(onehot) => {
                let bond_msg = self.mlp_bond.forward(tape, store, onehot)?;
                let neighbor = tape.gather_rows(z, &inputs.sources)?;
                let bond = tape.gather_rows(bond_msg, &inputs.bond_of_edge)?;
                let msg = tape.add(neighbor, bond)?;
                let agg = tape.index_add_rows(msg, &inputs.targets, n)?;
                tape.add(z, agg)?
            }
        };
        self.mlp_atom.forward(tape, store, h)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphEncoder {
    pub config: GraphEncoderConfig,
    pub atom_embeddings: [ParamId; ATOM_FEATURES],
    pub layers: Vec<GinLayer>,
    /// `d_g×d`, no bias.
    pub projection: ParamId,
}

impl GraphEncoder {
    pub fn new(store: &mut ParamStore, init: &mut Initializer, config: GraphEncoderConfig) -> Result<Self> {
        if config.max_nodes == 0 || config.hidden == 0 || config.output_dim == 0 {
            return Err(contract_err!("graph encoder widths and node budget must be positive: {:?}", config));
        }
        const FIELDS: [&str; ATOM_FEATURES] = ["element", "degree", "charge", "aromatic"];
        let mut atom_embeddings = [ParamId(0); ATOM_FEATURES];
        for (f, slot) in atom_embeddings.iter_mut().enumerate() {
            let table = init.embedding(ATOM_FEATURE_SIZES[f], config.hidden);
            *slot = store.add(&format!("graph_encoder.atom_embedding.{}", FIELDS[f]), table)?;
        }
        let layers =
            (0..GIN_LAYERS).map(|k| GinLayer::new(store, init, k, config.hidden)).collect::<Result<Vec<_>>>()?;
        let projection = store.add("graph_encoder.projection", init.linear_weight(config.hidden, config.output_dim))?;
        Ok(Self { config, atom_embeddings, layers, projection })
    }

    /// Initial node states: sum of per-field atom feature embeddings.
    pub fn embed_atoms(&self, tape: &mut Tape, store: &ParamStore, graph: &MolGraph) -> Result<Var> {
        let mut z: Option<Var> = None;
        for (f, &table) in self.atom_embeddings.iter().enumerate() {
            let idx: Vec<usize> = graph.atom_features.iter().map(|row| row[f] as usize).collect();
            let t = tape.param(store, table);
            let e = tape.gather_rows(t, &idx)?;
            z = Some(match z {
                Some(acc) => tape.add(acc, e)?,
                None => e,
            });
        }
        Ok(z.expect("at least one atom feature"))
    }

    /// Node embeddings after the GIN stack and projection, one row per atom.
    pub fn node_embeddings(&self, tape: &mut Tape, store: &ParamStore, graph: &MolGraph) -> Result<Var> {
        let n = graph.num_atoms();
        if n == 0 {
            return Err(contract_err!("cannot encode a graph with no atoms"));
        }
        let inputs = GraphInputs::new(tape, graph)?;
        let mut z = self.embed_atoms(tape, store, graph)?;
        for layer in &self.layers {
            z = layer.forward_with(tape, store, z, n, &inputs)?;
        }
        let p = tape.param(store, self.projection);
        tape.matmul(z, p)
    }

    /// Full encoding with truncation to the first `l` atoms (atom-index
    /// order) or zero padding up to `l`.
    pub fn encode(&self, tape: &mut Tape, store: &ParamStore, graph: &MolGraph) -> Result<GraphEmbedding> {
        let nodes = self.node_embeddings(tape, store, graph)?;
        let n = graph.num_atoms();
        let l = self.config.max_nodes;
        let valid_len = n.min(l);
        let values = if n >= l {
            if n == l {
                nodes
            } else {
                tape.slice_rows(nodes, 0, l)?
            }
        } else {
            let pad = tape.constant(Tensor::zeros(&[l - n, self.config.output_dim]))?;
            tape.concat_rows(&[nodes, pad])?
        };
        let mask = (0..l).map(|i| i < valid_len).collect();
        Ok(GraphEmbedding { values, valid_len, mask })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::smiles_to_graph;

    fn neutral_layer(store: &mut ParamStore, hidden: usize) -> GinLayer {
        let mut init = Initializer::new(0);
        let layer = GinLayer::new(store, &mut init, 0, hidden).unwrap();
        layer.mlp_atom.set_identity(store).unwrap();
        for id in [layer.mlp_bond.hidden.weight, layer.mlp_bond.output.weight] {
            let shape = store.value(id).shape().to_vec();
            store.set_value(id, Tensor::zeros(&shape)).unwrap();
        }
        layer
    }

    fn run(layer: &GinLayer, store: &ParamStore, states: &[[f64; 2]], smiles: &str) -> Tensor {
        let graph = smiles_to_graph(smiles).unwrap();
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::from_rows(states).unwrap()).unwrap();
        let out = layer.forward(&mut tape, store, z, &graph).unwrap();
        tape.value(out).clone()
    }

    #[test]
    fn isolated_node_is_unchanged() {
        let mut store = ParamStore::new();
        let layer = neutral_layer(&mut store, 2);
        let out = run(&layer, &store, &[[0.5, 1.5]], "C");
        assert_eq!(out.data(), [0.5, 1.5]);
    }

    #[test]
    fn bonded_pair_sums_states() {
        let mut store = ParamStore::new();
        let layer = neutral_layer(&mut store, 2);
        let out = run(&layer, &store, &[[1.0, 2.0], [3.0, 5.0]], "CO");
        assert_eq!(out.data(), [4.0, 7.0, 4.0, 7.0]);
    }

    #[test]
    fn row_count_mismatch_is_dimension_error() {
        let mut store = ParamStore::new();
        let layer = neutral_layer(&mut store, 2);
        let graph = smiles_to_graph("CCO").unwrap();
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::zeros(&[2, 2])).unwrap();
        assert!(matches!(layer.forward(&mut tape, &store, z, &graph), Err(crate::Error::Dimension(_))));
    }

    fn encoder(l: usize) -> (ParamStore, GraphEncoder) {
        let mut store = ParamStore::new();
        let mut init = Initializer::new(5);
        let enc =
            GraphEncoder::new(&mut store, &mut init, GraphEncoderConfig { hidden: 8, max_nodes: l, output_dim: 6 })
                .unwrap();
        (store, enc)
    }

    #[test]
    fn padding_and_truncation() {
        let (store, enc) = encoder(4);
        let mut tape = Tape::new();
        let e = enc.encode(&mut tape, &store, &smiles_to_graph("CO").unwrap()).unwrap();
        assert_eq!(tape.shape(e.values), [4, 6]);
        assert_eq!(e.mask, [true, true, false, false]);
        assert!(tape.value(e.values).data()[12..].iter().all(|&v| v == 0.0));

        let g = smiles_to_graph("CCCCCCCCCC").unwrap();
        let e = enc.encode(&mut tape, &store, &g).unwrap();
        let full = enc.node_embeddings(&mut tape, &store, &g).unwrap();
        assert_eq!(e.valid_len, 4);
        assert_eq!(tape.value(e.values).data(), &tape.value(full).data()[..24]);
    }

    #[test]
    fn zero_parameters_give_zero_output() {
        let (mut store, enc) = encoder(5);
        store.fill_zero();
        let mut tape = Tape::new();
        let e = enc.encode(&mut tape, &store, &smiles_to_graph("c1ccccc1O").unwrap()).unwrap();
        assert!(tape.value(e.values).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn checkpoint_names() {
        let (store, _) = encoder(4);
        assert!(store.id("graph_encoder.projection").is_some());
        assert!(store.id("graph_encoder.layer4.mlp_atom.fc1.weight").is_some());
        assert!(store.id("graph_encoder.layer0.mlp_bond.fc2.bias").is_some());
    }
}
