mod common;

use common::HAND_CORPUS;
use molcap_core::chem::smiles_to_graph;
use molcap_core::graph_encoder::{GraphEncoder, GraphEncoderConfig, GIN_LAYERS};
use molcap_core::numerics::{grad_check, GradCheckOptions, Initializer, Mlp, ParamStore, Tape, Tensor};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn encoder(seed: u64, l: usize) -> (ParamStore, GraphEncoder) {
    let mut store = ParamStore::new();
    let config = GraphEncoderConfig { hidden: 8, max_nodes: l, output_dim: 6 };
    let enc = GraphEncoder::new(&mut store, &mut Initializer::new(seed), config).unwrap();
    (store, enc)
}

fn mlp(store: &ParamStore, m: &Mlp, x: &Tensor) -> Tensor {
    let affine = |x: &Tensor, lin: &molcap_core::numerics::Linear| {
        let mut y = x.matmul(store.value(lin.weight)).unwrap();
        if let Some(b) = lin.bias {
            for r in 0..y.rows() {
                for (v, c) in y.row_mut(r).iter_mut().zip(store.value(b).data()) {
                    *v += c;
                }
            }
        }
        y
    };
    let mut h = affine(x, &m.hidden);
    h.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
    affine(&h, &m.output)
}

#[test]
fn permutation_equivariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let molecules: Vec<_> = HAND_CORPUS.iter().map(|c| c.0).filter(|s| smiles_to_graph(s).unwrap().num_atoms() <= 16).collect();
    let (store, enc) = encoder(1, 16);
    for case in 0..100 {
        let g = smiles_to_graph(molecules[case % molecules.len()]).unwrap();
        let n = g.num_atoms();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let h = g.permuted(&perm);
        let mut tape = Tape::new();
        let a = enc.encode(&mut tape, &store, &g).unwrap();
        let b = enc.encode(&mut tape, &store, &h).unwrap();
        for i in 0..n {
            for (x, y) in tape.value(a.values).row(i).iter().zip(tape.value(b.values).row(perm[i])) {
                assert!((x - y).abs() < 1e-10, "case {case}");
            }
        }
        assert_eq!(a.mask, b.mask);
    }
}

#[test]
fn triangle_layer_matches_hand_computation() {
    let (store, enc) = encoder(2, 4);
    let g = smiles_to_graph("C1CC1").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let z = Tensor::new(&[3, 8], (0..24).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let layer = &enc.layers[0];
    let mut onehot = Tensor::zeros(&[1, 4]);
    onehot.data_mut()[0] = 1.0;
    let m = mlp(&store, &layer.mlp_bond, &onehot);
    let mut h = Tensor::zeros(&[1, 8]);
    for (k, v) in h.data_mut().iter_mut().enumerate() {
        *v = (0..3).map(|r| z.row(r)[k]).sum::<f64>() + 2.0 * m.data()[k];
    }
    let want = mlp(&store, &layer.mlp_atom, &h);
    let mut tape = Tape::new();
    let zv = tape.constant(z).unwrap();
    let out = layer.forward(&mut tape, &store, zv, &g).unwrap();
    for r in 0..3 {
        for (a, b) in tape.value(out).row(r).iter().zip(want.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn five_layers_and_initial_states() {
    let (store, enc) = encoder(4, 8);
    assert_eq!(enc.layers.len(), GIN_LAYERS);
    let g = smiles_to_graph("[O-]c1ccccc1").unwrap();
    let mut tape = Tape::new();
    let z = enc.embed_atoms(&mut tape, &store, &g).unwrap();
    let row0: Vec<f64> = (0..8)
        .map(|k| {
            enc.atom_embeddings
                .iter()
                .zip(g.atom_features[0])
                .map(|(t, f)| store.value(*t).row(f as usize)[k])
                .sum()
        })
        .collect();
    assert_eq!(tape.value(z).row(0), row0.as_slice());
}

#[test]
fn gradients_match_finite_differences() {
    let mut store = ParamStore::new();
    let config = GraphEncoderConfig { hidden: 3, max_nodes: 5, output_dim: 2 };
    let enc = GraphEncoder::new(&mut store, &mut Initializer::new(9), config).unwrap();
    let g = smiles_to_graph("OC(=O)C#N").unwrap();
    let ids: Vec<_> = store.ids().collect();
    let report = grad_check(&mut store, &ids, GradCheckOptions::default(), |tape, store| {
        let e = enc.encode(tape, store, &g)?;
        let sq = tape.mul(e.values, e.values)?;
        tape.sum(sq)
    })
    .unwrap();
    assert!(report.passed, "{:?}", report.params.iter().filter(|p| !p.passed).collect::<Vec<_>>());
}
