//! Binary encodings of constraint sets consumed by the loss kernels.
//!
//! *Coherent* encodes each set as one indicator structure: an `|R|×|R|`
//! 0/1 matrix for a type set (the flattened `|R|²` vector, kept 2-D for
//! clearer indexing) and a length-`|R|` 0/1 vector for a cardinality set.
//!
//! *Semantic* encodes each rule separately as a length-`|R|` 0/1 vector: a
//! type rule `(i, j)` has ones at `i` and `j` (one 1 for a diagonal rule),
//! a cardinality rule `r` is one-hot at `r`. Rule vectors are kept in a
//! canonical order — ascending by normalized index pair, then by index —
//! and deduplicated, so builds are bit-reproducible.

use crate::mining::{ConstraintSets, SetKind};

/// One 0/1 matrix or vector per constraint set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoherentVectors {
    n: usize,
    pub v_ts: Vec<Vec<u8>>,
    pub v_to: Vec<Vec<u8>>,
    pub v_tso: Vec<Vec<u8>>,
    pub v_cs: Vec<u8>,
    pub v_co: Vec<u8>,
}

impl CoherentVectors {
    pub fn n_relations(&self) -> usize {
        self.n
    }

    pub fn type_matrix(&self, kind: SetKind) -> Option<&Vec<Vec<u8>>> {
        match kind {
            SetKind::Ts => Some(&self.v_ts),
            SetKind::To => Some(&self.v_to),
            SetKind::Tso => Some(&self.v_tso),
            _ => None,
        }
    }

    pub fn card_vector(&self, kind: SetKind) -> Option<&Vec<u8>> {
        match kind {
            SetKind::Cs => Some(&self.v_cs),
            SetKind::Co => Some(&self.v_co),
            _ => None,
        }
    }
}

/// One list of rule vectors per constraint set, in canonical order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticRuleSets {
    n: usize,
    pub u_ts: Vec<Vec<u8>>,
    pub u_to: Vec<Vec<u8>>,
    pub u_tso: Vec<Vec<u8>>,
    pub u_cs: Vec<Vec<u8>>,
    pub u_co: Vec<Vec<u8>>,
}

impl SemanticRuleSets {
    pub fn n_relations(&self) -> usize {
        self.n
    }

    pub fn rules(&self, kind: SetKind) -> &[Vec<u8>] {
        match kind {
            SetKind::Ts => &self.u_ts,
            SetKind::To => &self.u_to,
            SetKind::Tso => &self.u_tso,
            SetKind::Cs => &self.u_cs,
            SetKind::Co => &self.u_co,
        }
    }
}

/// Builds the Coherent encoding. Matrix entries mirror set membership
/// exactly: `ts`/`to` come out symmetric with ones on the eligible
/// diagonal, `tso` stays directional, and the no-relation row/column/entry
/// is zero throughout.
pub fn build_coherent(sets: &ConstraintSets) -> CoherentVectors {
    let n = sets.n_relations();
    let mut v_ts = vec![vec![0u8; n]; n];
    let mut v_to = vec![vec![0u8; n]; n];
    let mut v_tso = vec![vec![0u8; n]; n];
    for &(i, j) in sets.ts() {
        v_ts[i][j] = 1;
        v_ts[j][i] = 1;
    }
    for &(i, j) in sets.to() {
        v_to[i][j] = 1;
        v_to[j][i] = 1;
    }
    for &(i, j) in sets.tso() {
        v_tso[i][j] = 1;
    }
    let mut v_cs = vec![0u8; n];
    let mut v_co = vec![0u8; n];
    for &r in sets.cs() {
        v_cs[r] = 1;
    }
    for &r in sets.co() {
        v_co[r] = 1;
    }
    CoherentVectors {
        n,
        v_ts,
        v_to,
        v_tso,
        v_cs,
        v_co,
    }
}

fn type_rule_vector(n: usize, i: usize, j: usize) -> Vec<u8> {
    let mut u = vec![0u8; n];
    u[i] = 1;
    u[j] = 1;
    u
}

fn one_hot(n: usize, r: usize) -> Vec<u8> {
    let mut u = vec![0u8; n];
    u[r] = 1;
    u
}

/// Builds the Semantic encoding: one vector per rule. A `tso` pair and its
/// reverse encode to the same vector, so only one copy is kept.
pub fn build_semantic(sets: &ConstraintSets) -> SemanticRuleSets {
    let n = sets.n_relations();
    let pair_rules = |pairs: &crate::mining::PairSet| -> Vec<Vec<u8>> {
        let normalized: std::collections::BTreeSet<(usize, usize)> = pairs
            .iter()
            .map(|&(i, j)| if i <= j { (i, j) } else { (j, i) })
            .collect();
        normalized
            .into_iter()
            .map(|(i, j)| type_rule_vector(n, i, j))
            .collect()
    };
    SemanticRuleSets {
        n,
        u_ts: pair_rules(sets.ts()),
        u_to: pair_rules(sets.to()),
        u_tso: pair_rules(sets.tso()),
        u_cs: sets.cs().iter().map(|&r| one_hot(n, r)).collect(),
        u_co: sets.co().iter().map(|&r| one_hot(n, r)).collect(),
    }
}

/// OR of a square 0/1 matrix with its transpose. The loss path uses this
/// for `tso` so both orientations of an ordered rule are scored while the
/// matrix stays binary.
pub fn symmetrize(m: &[Vec<u8>]) -> Vec<Vec<u8>> {
    let n = m.len();
    let mut out = vec![vec![0u8; n]; n];
    for i in 0..n {
        for j in 0..n {
            out[i][j] = m[i][j] | m[j][i];
        }
    }
    out
}

fn digits(row: &[u8]) -> String {
    row.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect()
}

/// Human-inspectable dump: one `[set]` header per set, then one row of 0/1
/// digits per matrix row.
pub fn dump_coherent(cv: &CoherentVectors) -> String {
    let mut out = String::new();
    for kind in SetKind::ALL {
        out.push_str(&format!("[{kind}]\n"));
        if let Some(m) = cv.type_matrix(kind) {
            for row in m {
                out.push_str(&digits(row));
                out.push('\n');
            }
        } else if let Some(v) = cv.card_vector(kind) {
            out.push_str(&digits(v));
            out.push('\n');
        }
    }
    out
}

/// Human-inspectable dump: one `[set]` header per set, then one rule vector
/// per line in canonical order.
pub fn dump_semantic(sr: &SemanticRuleSets) -> String {
    let mut out = String::new();
    for kind in SetKind::ALL {
        out.push_str(&format!("[{kind}]\n"));
        for rule in sr.rules(kind) {
            out.push_str(&digits(rule));
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{RelationVocabulary, Triple, TripleStore};
    use crate::mining::{mine, MiningConfig, PairSet, RelSet};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn vocab(n: usize) -> RelationVocabulary {
        RelationVocabulary::new((0..n).map(|i| format!("r{i}"))).unwrap()
    }

    fn sets_with(
        v: &RelationVocabulary,
        ts: &[(usize, usize)],
        tso: &[(usize, usize)],
        cs: &[usize],
        co: &[usize],
    ) -> ConstraintSets {
        ConstraintSets::from_parts(
            v,
            ts.iter().copied().collect(),
            PairSet::new(),
            tso.iter().copied().collect(),
            cs.iter().copied().collect(),
            co.iter().copied().collect(),
        )
        .unwrap()
    }

    #[test]
    fn coherent_type_matrix_membership_symmetry_diagonal() {
        let v = vocab(4);
        let sets = sets_with(&v, &[(0, 1)], &[], &[], &[]);
        let cv = build_coherent(&sets);
        let mut expected = vec![vec![0u8; 4]; 4];
        for r in 0..4 {
            expected[r][r] = 1;
        }
        expected[0][1] = 1;
        expected[1][0] = 1;
        assert_eq!(cv.v_ts, expected);
    }

    #[test]
    fn coherent_first_dimension_for_first_relation_in_cs() {
        let v = vocab(4);
        let sets = sets_with(&v, &[], &[], &[0], &[]);
        let cv = build_coherent(&sets);
        assert_eq!(cv.v_cs, vec![1, 0, 0, 0]);
    }

    #[test]
    fn empty_sets_give_identity_pattern_type_matrices() {
        let v = vocab(3);
        let cv = build_coherent(&ConstraintSets::empty(&v));
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(cv.v_ts[i][j], u8::from(i == j));
                assert_eq!(cv.v_to[i][j], u8::from(i == j));
                assert_eq!(cv.v_tso[i][j], 0);
            }
        }
        assert_eq!(cv.v_cs, vec![0, 0, 0]);
    }

    #[test]
    fn na_row_and_column_stay_zero() {
        let v = RelationVocabulary::new(["r0", "NA", "r2"]).unwrap();
        let sets = ConstraintSets::from_parts(
            &v,
            [(0, 2)].into_iter().collect(),
            PairSet::new(),
            [(2, 0)].into_iter().collect(),
            [0].into_iter().collect(),
            RelSet::new(),
        )
        .unwrap();
        let cv = build_coherent(&sets);
        for k in 0..3 {
            assert_eq!(cv.v_ts[1][k], 0);
            assert_eq!(cv.v_ts[k][1], 0);
            assert_eq!(cv.v_tso[1][k], 0);
            assert_eq!(cv.v_tso[k][1], 0);
        }
        assert_eq!(cv.v_cs[1], 0);
        let sr = build_semantic(&sets);
        for kind in SetKind::ALL {
            for rule in sr.rules(kind) {
                assert_eq!(rule[1], 0);
            }
        }
    }

    #[test]
    fn semantic_type_rule_has_two_ones() {
        let v = vocab(4);
        let sets = sets_with(&v, &[(0, 1)], &[], &[], &[]);
        let sr = build_semantic(&sets);
        assert!(sr.u_ts.contains(&vec![1, 1, 0, 0]));
    }

    #[test]
    fn semantic_cardinality_rule_is_one_hot() {
        let v = vocab(4);
        let sets = sets_with(&v, &[], &[], &[0], &[]);
        let sr = build_semantic(&sets);
        assert_eq!(sr.u_cs, vec![vec![1, 0, 0, 0]]);
    }

    #[test]
    fn empty_cardinality_set_has_no_rules() {
        let v = vocab(4);
        let sr = build_semantic(&ConstraintSets::empty(&v));
        assert!(sr.u_cs.is_empty());
        assert!(sr.u_co.is_empty());
    }

    #[test]
    fn diagonal_rules_are_one_hot() {
        let v = vocab(3);
        let sr = build_semantic(&ConstraintSets::empty(&v));
        assert_eq!(sr.u_ts, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
    }

    #[test]
    fn tso_orientations_deduplicate() {
        let v = vocab(3);
        let sets = sets_with(&v, &[], &[(0, 1), (1, 0), (2, 2)], &[], &[]);
        let sr = build_semantic(&sets);
        assert_eq!(sr.u_tso, vec![vec![1, 1, 0], vec![0, 0, 1]]);
        let cv = build_coherent(&sets);
        assert_eq!(cv.v_tso[0][1], 1);
        assert_eq!(cv.v_tso[1][0], 1);
        assert_eq!(cv.v_tso[2][2], 1);
        assert_eq!(cv.v_tso[0][2], 0);
    }

    #[test]
    fn symmetrize_is_or_with_transpose() {
        let m = vec![vec![0, 1, 0], vec![0, 0, 0], vec![1, 0, 0]];
        let s = symmetrize(&m);
        assert_eq!(s, vec![vec![0, 1, 1], vec![1, 0, 0], vec![1, 0, 0]]);
    }

    /// Off-diagonal support of the coherent matrix equals the pairwise
    /// product support of the semantic rules.
    #[test]
    fn semantic_rules_reproduce_coherent_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let n = rng.random_range(2..7);
            let v = vocab(n);
            let triples: Vec<Triple> = (0..rng.random_range(4..40))
                .map(|_| {
                    Triple::new(
                        format!("e{}", rng.random_range(0..5)),
                        rng.random_range(0..n),
                        format!("e{}", rng.random_range(0..5)),
                    )
                })
                .collect();
            let store = TripleStore::from_triples(triples, &v).unwrap();
            let sets = mine(&store, &v, MiningConfig::default()).unwrap();
            let cv = build_coherent(&sets);
            let sr = build_semantic(&sets);
            for (kind, matrix) in [
                (SetKind::Ts, &cv.v_ts),
                (SetKind::To, &cv.v_to),
                (SetKind::Tso, &symmetrize(&cv.v_tso)),
            ] {
                let mut support = vec![vec![0u8; n]; n];
                for rule in sr.rules(kind) {
                    let ones: Vec<usize> = (0..n).filter(|&k| rule[k] == 1).collect();
                    for &i in &ones {
                        for &j in &ones {
                            if i != j {
                                support[i][j] = 1;
                            }
                        }
                    }
                }
                for i in 0..n {
                    for j in 0..n {
                        if i != j {
                            assert_eq!(support[i][j], matrix[i][j], "{kind} at ({i},{j})");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn builds_are_deterministic() {
        let v = vocab(5);
        let sets = sets_with(&v, &[(3, 1), (0, 4)], &[(2, 0)], &[4, 0], &[2]);
        assert_eq!(build_coherent(&sets), build_coherent(&sets));
        assert_eq!(build_semantic(&sets), build_semantic(&sets));
        // Canonical ordering: ascending normalized pairs, then indices.
        let sr = build_semantic(&sets);
        assert_eq!(
            sr.u_cs,
            vec![vec![1, 0, 0, 0, 0], vec![0, 0, 0, 0, 1]]
        );
    }

    #[test]
    fn dump_formats_are_line_per_row() {
        let v = vocab(2);
        let sets = sets_with(&v, &[(0, 1)], &[], &[1], &[]);
        let coh = dump_coherent(&build_coherent(&sets));
        assert!(coh.starts_with("[ts]\n11\n11\n"));
        assert!(coh.contains("[cs]\n01\n"));
        let sem = dump_semantic(&build_semantic(&sets));
        assert!(sem.contains("[cs]\n01\n"));
    }
}
