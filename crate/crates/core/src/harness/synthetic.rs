//! Template-generated SMILES/description pairs for tests and demos.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CaptionRecord, Task};
use crate::error::{Error, Result};

const STEMS: [&str; 8] = ["meth", "eth", "prop", "but", "pent", "hex", "hept", "oct"];
const COUNTS: [&str; 8] = ["one", "two", "three", "four", "five", "six", "seven", "eight"];

#[derive(Clone, Copy)]
enum Family {
    Alkane,
    Alcohol,
    Acid,
    Amine,
    Chloride,
    Aldehyde,
    Arene,
}

fn entry(family: Family, k: usize) -> (String, String, &'static str) {
    let stem = STEMS[k - 1];
    let chain = "C".repeat(k);
    let short = "C".repeat(k - 1);
    match family {
        Family::Alkane => (chain, format!("{stem}ane"), "an alkane"),
        Family::Alcohol => {
            let name = if k <= 2 { format!("{stem}anol") } else { format!("{stem}an-1-ol") };
            (format!("{chain}O"), name, "a primary alcohol")
        }
        Family::Acid => (format!("{short}C(=O)O"), format!("{stem}anoic acid"), "a carboxylic acid"),
        Family::Amine => {
            let name = if k <= 2 { format!("{stem}anamine") } else { format!("{stem}an-1-amine") };
            (format!("{chain}N"), name, "a primary amine")
        }
        Family::Chloride => {
            let name = if k <= 2 { format!("chloro{stem}ane") } else { format!("1-chloro{stem}ane") };
            (format!("{chain}Cl"), name, "a chloroalkane")
        }
        Family::Aldehyde => (format!("{short}C=O"), format!("{stem}anal"), "an aldehyde"),
        Family::Arene => {
            let side = "C".repeat(k - 6);
            let name = match k {
                6 => String::from("benzene"),
                7 => String::from("toluene"),
                _ => String::from("ethylbenzene"),
            };
            (format!("c1ccccc1{side}"), name, "an aromatic hydrocarbon")
        }
    }
}

fn all_entries() -> Vec<(String, String, &'static str, usize)> {
    let mut out = Vec::new();
    for family in [Family::Alkane, Family::Alcohol, Family::Acid, Family::Amine, Family::Chloride, Family::Aldehyde] {
        for k in 1..=STEMS.len() {
            let (smiles, name, class) = entry(family, k);
            out.push((smiles, name, class, k));
        }
    }
    for k in 6..=8 {
        let (smiles, name, class) = entry(Family::Arene, k);
        out.push((smiles, name, class, k));
    }
    out
}

/// `n` distinct records in a seed-dependent order. Captions read
/// "The molecule is ethanol, a primary alcohol with two carbon atoms.";
/// for [`Task::Iupac`] the description is the systematic name alone.
pub fn synthetic_corpus(n: usize, seed: u64, task: Task) -> Result<Vec<CaptionRecord>> {
    let mut entries = all_entries();
    if n > entries.len() {
        return Err(Error::Config(format!("the synthetic corpus has only {} distinct molecules", entries.len())));
    }
    entries.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(entries
        .into_iter()
        .take(n)
        .enumerate()
        .map(|(i, (smiles, name, class, k))| {
            let description = match task {
                Task::Caption => format!("The molecule is {name}, {class} with {} carbon atoms.", COUNTS[k - 1]),
                Task::Iupac => name,
            };
            CaptionRecord { id: format!("synth-{i}"), smiles, description, task }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::smiles_to_graph;

    #[test]
    fn records_parse_and_are_distinct() {
        let recs = synthetic_corpus(all_entries().len(), 7, Task::Caption).unwrap();
        for r in &recs {
            let g = smiles_to_graph(&r.smiles).unwrap();
            let carbons = g.atoms.iter().filter(|a| a.element == "C").count();
            assert!(r.description.contains(COUNTS[carbons - 1]), "{} / {}", r.smiles, r.description);
        }
        let mut texts: Vec<_> = recs.iter().map(|r| r.description.clone()).collect();
        texts.sort();
        texts.dedup();
        assert_eq!(texts.len(), recs.len());
        assert!(synthetic_corpus(1000, 0, Task::Caption).is_err());
    }

    #[test]
    fn seeded_order() {
        let a = synthetic_corpus(16, 1, Task::Iupac).unwrap();
        assert_eq!(a, synthetic_corpus(16, 1, Task::Iupac).unwrap());
        assert_ne!(a, synthetic_corpus(16, 2, Task::Iupac).unwrap());
    }
}
