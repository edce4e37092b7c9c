mod common;

use common::HAND_CORPUS;
use molcap_core::chem::{smiles_to_graph, BondOrder, MolGraph, SmilesErrorKind};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn components(g: &MolGraph) -> usize {
    let adj = g.adjacency();
    let mut seen = vec![false; g.num_atoms()];
    let mut count = 0;
    for start in 0..g.num_atoms() {
        if seen[start] {
            continue;
        }
        count += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    count
}

fn check_invariants(g: &MolGraph) {
    let degree_sum: usize = g.atoms.iter().map(|a| a.degree).sum();
    assert_eq!(degree_sum, 2 * g.num_bonds());
    let adj = g.adjacency();
    for (i, a) in g.atoms.iter().enumerate() {
        assert_eq!(a.index, i);
        assert_eq!(a.degree, adj[i].len());
        assert_eq!(g.atom_features[i][1] as usize, a.degree.min(10));
    }
    assert_eq!(g.atom_features.len(), g.num_atoms());
    assert_eq!(g.bond_features.len(), g.num_bonds());
    for b in &g.bonds {
        assert_ne!(b.endpoints.0, b.endpoints.1);
    }
    for (x, a) in g.bonds.iter().enumerate() {
        for b in &g.bonds[x + 1..] {
            assert!(!a.connects(b.endpoints.0, b.endpoints.1));
        }
    }
}

#[test]
fn hand_counted_corpus() {
    for &(smiles, atoms, bonds, rings, aromatic, charge) in &HAND_CORPUS {
        let g = smiles_to_graph(smiles).unwrap_or_else(|e| panic!("{smiles}: {e}"));
        assert_eq!(g.num_atoms(), atoms, "{smiles} atoms");
        assert_eq!(g.num_bonds(), bonds, "{smiles} bonds");
        assert_eq!(bonds + components(&g) - atoms, rings, "{smiles} rings");
        assert_eq!(g.atoms.iter().filter(|a| a.is_aromatic).count(), aromatic, "{smiles} aromatic");
        assert_eq!(g.atoms.iter().map(|a| a.formal_charge).sum::<i32>(), charge, "{smiles} charge");
        check_invariants(&g);
    }
}

#[test]
fn bond_orders_and_features() {
    let g = smiles_to_graph("C=CC#N").unwrap();
    let orders: Vec<_> = g.bonds.iter().map(|b| b.order).collect();
    assert_eq!(orders, [BondOrder::Double, BondOrder::Single, BondOrder::Triple]);
    let g = smiles_to_graph("c1ccccc1").unwrap();
    assert!(g.bonds.iter().all(|b| b.order == BondOrder::Aromatic));
    let g = smiles_to_graph("[O-]C").unwrap();
    assert_eq!(g.atom_features[0], [8, 1, 2, 0]);
    assert_eq!(g.atom_features[1], [6, 1, 3, 0]);
}

#[test]
fn malformed_inputs_are_rejected() {
    let cases = [
        ("", SmilesErrorKind::Empty),
        ("C1CC", SmilesErrorKind::UnclosedRing(1)),
        ("CC)", SmilesErrorKind::UnmatchedBranchClose),
        ("C(C", SmilesErrorKind::UnclosedBranch),
        ("[CH3", SmilesErrorKind::UnterminatedBracket),
    ];
    for (s, kind) in cases {
        assert_eq!(smiles_to_graph(s).unwrap_err().kind, kind, "{s:?}");
    }
    for s in ["C$C", "C%1C", "=C", "C11", "[Xx]"] {
        assert!(smiles_to_graph(s).is_err(), "{s:?}");
    }
}

#[test]
fn permutation_preserves_degrees_and_edges() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for &(smiles, ..) in &HAND_CORPUS {
        let g = smiles_to_graph(smiles).unwrap();
        let n = g.num_atoms();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let h = g.permuted(&perm);
        check_invariants(&h);
        for (i, a) in g.atoms.iter().enumerate() {
            assert_eq!(h.atoms[perm[i]].element, a.element);
            assert_eq!(h.atom_features[perm[i]], g.atom_features[i]);
        }
        for (b, c) in g.bonds.iter().zip(&h.bonds) {
            assert!(c.connects(perm[b.endpoints.0], perm[b.endpoints.1]));
        }
    }
}

fn chain() -> impl Strategy<Value = (String, usize, usize)> {
    let atom = prop::sample::select(vec!["C", "N", "O", "S", "Cl", "Br", "[Na+]", "[nH]", "c", "P"]);
    let bond = prop::sample::select(vec!["", "-", "=", "#"]);
    prop::collection::vec((atom, bond, any::<bool>()), 1..24).prop_map(|parts| {
        let mut s = String::new();
        for (k, (a, b, branch)) in parts.iter().enumerate() {
            if k == 0 {
                s.push_str(a);
            } else if *branch && k + 1 < parts.len() {
                s.push_str(&format!("({b}{a})"));
            } else {
                s.push_str(b);
                s.push_str(a);
            }
        }
        let n = parts.len();
        (s, n, n - 1)
    })
}

proptest! {
    #[test]
    fn random_trees_satisfy_handshake((smiles, atoms, bonds) in chain()) {
        let g = smiles_to_graph(&smiles).unwrap();
        prop_assert_eq!(g.num_atoms(), atoms);
        prop_assert_eq!(g.num_bonds(), bonds);
        prop_assert_eq!(components(&g), 1);
        check_invariants(&g);
    }

    #[test]
    fn parser_never_panics(s in "[CNOcn()=#1-3\\[\\]+.%-]{0,20}") {
        if let Ok(g) = smiles_to_graph(&s) {
            check_invariants(&g);
        }
    }
}
