//! Seeded random stores, constraint sets, batches, and prediction sets.
//!
//! Shared by the `gradcheck` command and the oracle-equivalence test
//! suites; everything is a deterministic function of the passed RNG.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::infer::{PredItem, PredictionSet};
use crate::kb::{RelationVocabulary, Triple, TripleStore};
use crate::loss::{Batch, Instance, ProbVec};
use crate::mining::{ConstraintSets, PairSet, RelSet};

pub fn random_vocab(n: usize) -> RelationVocabulary {
    RelationVocabulary::new((0..n).map(|i| format!("r{i:02}"))).expect("generated names are valid")
}

/// Uniformly random triples over a small entity pool.
pub fn random_store(
    rng: &mut ChaCha8Rng,
    vocab: &RelationVocabulary,
    n_triples: usize,
    n_entities: usize,
) -> TripleStore {
    let triples = (0..n_triples)
        .map(|_| {
            Triple::new(
                format!("e{}", rng.random_range(0..n_entities)),
                rng.random_range(0..vocab.len()),
                format!("e{}", rng.random_range(0..n_entities)),
            )
        })
        .collect();
    TripleStore::from_triples(triples, vocab).expect("generated triples are valid")
}

/// Random constraint sets with roughly `2|R|` type members per set and
/// `|R|/2` cardinality members.
pub fn random_constraint_sets(rng: &mut ChaCha8Rng, vocab: &RelationVocabulary) -> ConstraintSets {
    let n = vocab.len();
    let mut pick = |set: &mut PairSet| {
        for _ in 0..2 * n {
            set.insert((rng.random_range(0..n), rng.random_range(0..n)));
        }
    };
    let mut ts = PairSet::new();
    let mut to = PairSet::new();
    let mut tso = PairSet::new();
    pick(&mut ts);
    pick(&mut to);
    pick(&mut tso);
    let mut cs = RelSet::new();
    let mut co = RelSet::new();
    for _ in 0..n / 2 + 1 {
        cs.insert(rng.random_range(0..n));
        co.insert(rng.random_range(0..n));
    }
    ConstraintSets::from_parts(vocab, ts, to, tso, cs, co).expect("indices in range")
}

/// A distribution mixed half-and-half with uniform, so every entry is at
/// least `0.5 / n`: interior enough for well-conditioned finite
/// differences.
pub fn smoothed_probs(rng: &mut ChaCha8Rng, n: usize) -> ProbVec {
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-9).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x = 0.5 * (*x / s) + 0.5 / n as f64);
    ProbVec::new_unchecked(v)
}

/// Random batch with interior probabilities and gold triples over a small
/// entity pool (so indicator gates actually fire).
pub fn random_interior_batch(rng: &mut ChaCha8Rng, n_relations: usize, size: usize) -> Batch {
    let pool = 5;
    let instances = (0..size)
        .map(|i| Instance {
            id: format!("i{i:03}"),
            gold: Triple::new(
                format!("e{}", rng.random_range(0..pool)),
                rng.random_range(0..n_relations),
                format!("e{}", rng.random_range(0..pool)),
            ),
            probs: smoothed_probs(rng, n_relations),
        })
        .collect();
    Batch::new(instances).expect("nonempty batch")
}

/// Random predictions (argmax of random distributions) over a small
/// entity pool.
pub fn random_prediction_set(rng: &mut ChaCha8Rng, n_relations: usize, size: usize) -> PredictionSet {
    let pool = 6;
    let items = (0..size)
        .map(|i| {
            let mut v: Vec<f64> = (0..n_relations).map(|_| rng.random::<f64>() + 1e-9).collect();
            let s: f64 = v.iter().sum();
            v.iter_mut().for_each(|x| *x /= s);
            let probs = ProbVec::new_unchecked(v);
            let predicted = probs.argmax();
            PredItem {
                id: format!("p{i:03}"),
                gold: Triple::new(
                    format!("e{}", rng.random_range(0..pool)),
                    rng.random_range(0..n_relations),
                    format!("e{}", rng.random_range(0..pool)),
                ),
                probs,
                predicted,
            }
        })
        .collect();
    PredictionSet { items }
}
