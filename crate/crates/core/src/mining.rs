//! Mining the five relation-constraint sets from a triple store.
//!
//! Type constraints come from entity sharing: two relations that share a
//! subject (object) entity are taken to allow the same subject (object)
//! type, and a relation whose subject set intersects another's object set
//! links subject type to object type. Cardinality constraints come from
//! argument multiplicity: a relation seen with several subjects for one
//! object may have multiple subjects (`cs`), and symmetrically for `co`.
//!
//! All sets are over relation indices. The no-relation label, when present,
//! is excluded from every set. `ts`/`to` hold unordered pairs normalized to
//! `(lo, hi)` and always contain the diagonal `(r, r)` for every eligible
//! relation, so same-relation prediction pairs never count as type
//! violations. `tso` holds ordered pairs `(i, j)` read as "subject type of
//! r_i = object type of r_j".

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kb::{RelationVocabulary, TripleStore};

/// The five constraint sub-categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetKind {
    Ts,
    To,
    Tso,
    Cs,
    Co,
}

impl SetKind {
    pub const ALL: [SetKind; 5] = [SetKind::Ts, SetKind::To, SetKind::Tso, SetKind::Cs, SetKind::Co];

    pub fn label(self) -> &'static str {
        match self {
            SetKind::Ts => "ts",
            SetKind::To => "to",
            SetKind::Tso => "tso",
            SetKind::Cs => "cs",
            SetKind::Co => "co",
        }
    }

    pub fn is_type(self) -> bool {
        matches!(self, SetKind::Ts | SetKind::To | SetKind::Tso)
    }
}

impl fmt::Display for SetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub type PairSet = BTreeSet<(usize, usize)>;
pub type RelSet = BTreeSet<usize>;

fn norm_pair(i: usize, j: usize) -> (usize, usize) {
    if i <= j {
        (i, j)
    } else {
        (j, i)
    }
}

/// The mined constraint sets for one vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintSets {
    n_relations: usize,
    na_index: Option<usize>,
    ts: PairSet,
    to: PairSet,
    tso: PairSet,
    cs: RelSet,
    co: RelSet,
}

impl ConstraintSets {
    /// Sets with no mined members: `ts`/`to` carry only the conventional
    /// diagonals, everything else is empty.
    pub fn empty(vocab: &RelationVocabulary) -> Self {
        let diagonals: PairSet = (0..vocab.len())
            .filter(|&r| !vocab.is_na(r))
            .map(|r| (r, r))
            .collect();
        ConstraintSets {
            n_relations: vocab.len(),
            na_index: vocab.na_index(),
            ts: diagonals.clone(),
            to: diagonals,
            tso: PairSet::new(),
            cs: RelSet::new(),
            co: RelSet::new(),
        }
    }

    /// Assembles sets from raw members: `ts`/`to` pairs are normalized to
    /// unordered form and the diagonals are added; `tso` keeps order.
    /// Members touching the no-relation label or out-of-range indices are
    /// rejected.
    pub fn from_parts(
        vocab: &RelationVocabulary,
        ts: PairSet,
        to: PairSet,
        tso: PairSet,
        cs: RelSet,
        co: RelSet,
    ) -> Result<Self> {
        let mut sets = Self::empty(vocab);
        let check = |r: usize| -> Result<()> {
            vocab.check_index(r)?;
            if vocab.is_na(r) {
                return Err(Error::BadConfig(format!(
                    "no-relation label '{}' cannot appear in a constraint set",
                    vocab.name(r).unwrap_or("?")
                )));
            }
            Ok(())
        };
        for (i, j) in ts {
            check(i)?;
            check(j)?;
            sets.ts.insert(norm_pair(i, j));
        }
        for (i, j) in to {
            check(i)?;
            check(j)?;
            sets.to.insert(norm_pair(i, j));
        }
        for (i, j) in tso {
            check(i)?;
            check(j)?;
            sets.tso.insert((i, j));
        }
        for r in cs {
            check(r)?;
            sets.cs.insert(r);
        }
        for r in co {
            check(r)?;
            sets.co.insert(r);
        }
        Ok(sets)
    }

    pub fn n_relations(&self) -> usize {
        self.n_relations
    }

    pub fn na_index(&self) -> Option<usize> {
        self.na_index
    }

    pub fn ts(&self) -> &PairSet {
        &self.ts
    }

    pub fn to(&self) -> &PairSet {
        &self.to
    }

    pub fn tso(&self) -> &PairSet {
        &self.tso
    }

    pub fn cs(&self) -> &RelSet {
        &self.cs
    }

    pub fn co(&self) -> &RelSet {
        &self.co
    }

    pub fn contains_ts(&self, i: usize, j: usize) -> bool {
        self.ts.contains(&norm_pair(i, j))
    }

    pub fn contains_to(&self, i: usize, j: usize) -> bool {
        self.to.contains(&norm_pair(i, j))
    }

    /// Ordered membership: subject type of `i` = object type of `j`.
    pub fn contains_tso(&self, i: usize, j: usize) -> bool {
        self.tso.contains(&(i, j))
    }

    pub fn contains_cs(&self, r: usize) -> bool {
        self.cs.contains(&r)
    }

    pub fn contains_co(&self, r: usize) -> bool {
        self.co.contains(&r)
    }

    /// Whether the set has no members at all. `ts`/`to` count their
    /// conventional diagonals as members, so with at least one eligible
    /// relation they are never empty.
    pub fn set_is_empty(&self, kind: SetKind) -> bool {
        match kind {
            SetKind::Ts => self.ts.is_empty(),
            SetKind::To => self.to.is_empty(),
            SetKind::Tso => self.tso.is_empty(),
            SetKind::Cs => self.cs.is_empty(),
            SetKind::Co => self.co.is_empty(),
        }
    }

    /// Number of members per set, in `SetKind::ALL` order.
    pub fn sizes(&self) -> [usize; 5] {
        [
            self.ts.len(),
            self.to.len(),
            self.tso.len(),
            self.cs.len(),
            self.co.len(),
        ]
    }
}

/// Thresholds for mining; both default to 1, the weakest reading of
/// "has an intersection" / "count the number of the triples".
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MiningConfig {
    pub min_overlap: usize,
    pub min_count: usize,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            min_overlap: 1,
            min_count: 1,
        }
    }
}

fn eligible(vocab: &RelationVocabulary) -> Vec<usize> {
    (0..vocab.len()).filter(|&r| !vocab.is_na(r)).collect()
}

fn validate_mining_inputs(store: &TripleStore, vocab: &RelationVocabulary, threshold: usize) -> Result<()> {
    if store.is_empty() {
        return Err(Error::EmptyInput("triple store".into()));
    }
    if store.n_relations() != vocab.len() {
        return Err(Error::DimensionMismatch {
            expected: vocab.len(),
            got: store.n_relations(),
        });
    }
    if threshold == 0 {
        return Err(Error::BadConfig("mining threshold must be >= 1".into()));
    }
    Ok(())
}

fn intersection_size(a: &BTreeSet<String>, b: &BTreeSet<String>) -> usize {
    if a.len() <= b.len() {
        a.iter().filter(|x| b.contains(*x)).count()
    } else {
        b.iter().filter(|x| a.contains(*x)).count()
    }
}

/// Mines the three type sets. `(i, j)` joins `ts` (`to`) when relations i
/// and j share at least `min_overlap` subject (object) entities; `(i, j)`
/// joins `tso` when subjects of i overlap objects of j. Diagonals are added
/// to `ts`/`to` by convention.
pub fn mine_type_constraints(
    store: &TripleStore,
    vocab: &RelationVocabulary,
    min_overlap: usize,
) -> Result<(PairSet, PairSet, PairSet)> {
    validate_mining_inputs(store, vocab, min_overlap)?;
    let rels = eligible(vocab);
    let mut ts = PairSet::new();
    let mut to = PairSet::new();
    let mut tso = PairSet::new();
    for &i in &rels {
        ts.insert((i, i));
        to.insert((i, i));
        for &j in &rels {
            if i < j {
                if intersection_size(store.subjects_of(i)?, store.subjects_of(j)?) >= min_overlap {
                    ts.insert((i, j));
                }
                if intersection_size(store.objects_of(i)?, store.objects_of(j)?) >= min_overlap {
                    to.insert((i, j));
                }
            }
            if intersection_size(store.subjects_of(i)?, store.objects_of(j)?) >= min_overlap {
                tso.insert((i, j));
            }
        }
    }
    Ok((ts, to, tso))
}

/// Mines the two cardinality sets. A relation joins `cs` when at least
/// `min_count` of its objects each occur with two or more distinct
/// subjects; `co` symmetrically over subjects.
pub fn mine_cardinality_constraints(
    store: &TripleStore,
    vocab: &RelationVocabulary,
    min_count: usize,
) -> Result<(RelSet, RelSet)> {
    validate_mining_inputs(store, vocab, min_count)?;
    let mut cs = RelSet::new();
    let mut co = RelSet::new();
    for r in eligible(vocab) {
        let mut subj_per_obj: std::collections::BTreeMap<&str, BTreeSet<&str>> = Default::default();
        let mut obj_per_subj: std::collections::BTreeMap<&str, BTreeSet<&str>> = Default::default();
        for &ti in store.triples_of(r)? {
            let t = &store.triples()[ti];
            subj_per_obj.entry(&t.obj).or_default().insert(&t.subj);
            obj_per_subj.entry(&t.subj).or_default().insert(&t.obj);
        }
        if subj_per_obj.values().filter(|s| s.len() >= 2).count() >= min_count {
            cs.insert(r);
        }
        if obj_per_subj.values().filter(|s| s.len() >= 2).count() >= min_count {
            co.insert(r);
        }
    }
    Ok((cs, co))
}

/// Mines all five sets in one pass.
pub fn mine(
    store: &TripleStore,
    vocab: &RelationVocabulary,
    config: MiningConfig,
) -> Result<ConstraintSets> {
    let (ts, to, tso) = mine_type_constraints(store, vocab, config.min_overlap)?;
    let (cs, co) = mine_cardinality_constraints(store, vocab, config.min_count)?;
    ConstraintSets::from_parts(vocab, ts, to, tso, cs, co)
}

/// On-disk form: five named arrays over relation names. The conventional
/// `ts`/`to` diagonals are implicit and not serialized; `tso` pairs are
/// written in full (a mined `(r, r)` in `tso` is data, not convention).
#[derive(Serialize, Deserialize)]
struct ConstraintFile {
    ts: Vec<[String; 2]>,
    to: Vec<[String; 2]>,
    tso: Vec<[String; 2]>,
    cs: Vec<String>,
    co: Vec<String>,
}

/// Writes `sets` as JSON with relation names resolved through `vocab`.
pub fn save_constraints(sets: &ConstraintSets, vocab: &RelationVocabulary, path: &Path) -> Result<()> {
    let name = |r: usize| -> String { vocab.name(r).unwrap_or("?").to_string() };
    let pairs = |set: &PairSet, skip_diagonal: bool| -> Vec<[String; 2]> {
        set.iter()
            .filter(|(i, j)| !(skip_diagonal && i == j))
            .map(|&(i, j)| [name(i), name(j)])
            .collect()
    };
    let file = ConstraintFile {
        ts: pairs(sets.ts(), true),
        to: pairs(sets.to(), true),
        tso: pairs(sets.tso(), false),
        cs: sets.cs().iter().map(|&r| name(r)).collect(),
        co: sets.co().iter().map(|&r| name(r)).collect(),
    };
    let json = serde_json::to_string_pretty(&file).map_err(|e| Error::Json {
        path: path.display().to_string(),
        source: e,
    })?;
    fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
}

/// Reads a constraint file back; relation names must exist in `vocab`.
pub fn load_constraints(path: &Path, vocab: &RelationVocabulary) -> Result<ConstraintSets> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ConstraintFile = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.display().to_string(),
        source: e,
    })?;
    let pair_set = |pairs: &[[String; 2]]| -> Result<PairSet> {
        pairs
            .iter()
            .map(|[a, b]| Ok((vocab.resolve(a)?, vocab.resolve(b)?)))
            .collect()
    };
    let rel_set = |names: &[String]| -> Result<RelSet> {
        names.iter().map(|n| vocab.resolve(n)).collect()
    };
    ConstraintSets::from_parts(
        vocab,
        pair_set(&file.ts)?,
        pair_set(&file.to)?,
        pair_set(&file.tso)?,
        rel_set(&file.cs)?,
        rel_set(&file.co)?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::Triple;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn vocab(n: usize) -> RelationVocabulary {
        RelationVocabulary::new((0..n).map(|i| format!("r{i}"))).unwrap()
    }

    fn store(triples: Vec<Triple>, vocab: &RelationVocabulary) -> TripleStore {
        TripleStore::from_triples(triples, vocab).unwrap()
    }

    #[test]
    fn shared_subject_joins_ts() {
        let v = vocab(2);
        let s = store(vec![Triple::new("e1", 0, "e2"), Triple::new("e1", 1, "e3")], &v);
        let (ts, to, _) = mine_type_constraints(&s, &v, 1).unwrap();
        assert!(ts.contains(&(0, 1)));
        assert!(!to.contains(&(0, 1)));
    }

    #[test]
    fn shared_object_joins_to_only() {
        let v = vocab(2);
        let s = store(vec![Triple::new("e1", 0, "e2"), Triple::new("e3", 1, "e2")], &v);
        let (ts, to, _) = mine_type_constraints(&s, &v, 1).unwrap();
        assert!(to.contains(&(0, 1)));
        assert!(!ts.contains(&(0, 1)));
    }

    #[test]
    fn diagonals_always_present() {
        let v = vocab(3);
        let s = store(vec![Triple::new("a", 0, "b")], &v);
        let (ts, to, _) = mine_type_constraints(&s, &v, 1).unwrap();
        for r in 0..3 {
            assert!(ts.contains(&(r, r)));
            assert!(to.contains(&(r, r)));
        }
    }

    #[test]
    fn na_excluded_from_mining() {
        let v = RelationVocabulary::new(["r0", "NA"]).unwrap();
        let s = store(
            vec![
                Triple::new("a", 0, "b"),
                Triple::new("a", 1, "b"),
                Triple::new("c", 1, "b"),
            ],
            &v,
        );
        let sets = mine(&s, &v, MiningConfig::default()).unwrap();
        assert!(!sets.ts().iter().any(|&(i, j)| i == 1 || j == 1));
        assert!(!sets.tso().iter().any(|&(i, j)| i == 1 || j == 1));
        assert!(!sets.contains_cs(1));
    }

    #[test]
    fn multiple_subjects_per_object_joins_cs() {
        let v = vocab(1);
        let s = store(vec![Triple::new("a", 0, "s"), Triple::new("b", 0, "s")], &v);
        let (cs, co) = mine_cardinality_constraints(&s, &v, 1).unwrap();
        assert!(cs.contains(&0));
        assert!(!co.contains(&0));
    }

    #[test]
    fn one_object_per_subject_stays_out_of_co() {
        let v = vocab(2);
        let s = store(
            vec![
                Triple::new("a", 1, "x"),
                Triple::new("b", 1, "y"),
                Triple::new("c", 1, "z"),
            ],
            &v,
        );
        let (_, co) = mine_cardinality_constraints(&s, &v, 1).unwrap();
        assert!(!co.contains(&1));
    }

    #[test]
    fn empty_store_is_error() {
        let v = vocab(1);
        let s = TripleStore::from_triples(vec![], &v).unwrap();
        assert!(mine_type_constraints(&s, &v, 1).is_err());
    }

    fn random_store(rng: &mut ChaCha8Rng, n_rel: usize, n_triples: usize, n_ent: usize) -> TripleStore {
        let v = vocab(n_rel);
        let triples = (0..n_triples)
            .map(|_| {
                Triple::new(
                    format!("e{}", rng.random_range(0..n_ent)),
                    rng.random_range(0..n_rel),
                    format!("e{}", rng.random_range(0..n_ent)),
                )
            })
            .collect();
        TripleStore::from_triples(triples, &v).unwrap()
    }

    /// Brute-force oracle over raw triple lists, independent of the store's
    /// prebuilt indices.
    fn oracle_type_sets(
        triples: &[Triple],
        n_rel: usize,
        min_overlap: usize,
    ) -> (PairSet, PairSet, PairSet) {
        let entities = |r: usize, subj: bool| -> BTreeSet<&str> {
            triples
                .iter()
                .filter(|t| t.rel == r)
                .map(|t| if subj { t.subj.as_str() } else { t.obj.as_str() })
                .collect()
        };
        let mut ts = PairSet::new();
        let mut to = PairSet::new();
        let mut tso = PairSet::new();
        for i in 0..n_rel {
            ts.insert((i, i));
            to.insert((i, i));
            for j in 0..n_rel {
                if i < j {
                    if entities(i, true).intersection(&entities(j, true)).count() >= min_overlap {
                        ts.insert((i, j));
                    }
                    if entities(i, false).intersection(&entities(j, false)).count() >= min_overlap {
                        to.insert((i, j));
                    }
                }
                if entities(i, true).intersection(&entities(j, false)).count() >= min_overlap {
                    tso.insert((i, j));
                }
            }
        }
        (ts, to, tso)
    }

    fn oracle_card_sets(triples: &[Triple], n_rel: usize, min_count: usize) -> (RelSet, RelSet) {
        let mut cs = RelSet::new();
        let mut co = RelSet::new();
        let uniq: BTreeSet<&Triple> = triples.iter().collect();
        for r in 0..n_rel {
            let of_r: Vec<&&Triple> = uniq.iter().filter(|t| t.rel == r).collect();
            let objs: BTreeSet<&str> = of_r.iter().map(|t| t.obj.as_str()).collect();
            let heavy_objs = objs
                .iter()
                .filter(|o| {
                    of_r.iter()
                        .filter(|t| t.obj.as_str() == **o)
                        .map(|t| t.subj.as_str())
                        .collect::<BTreeSet<_>>()
                        .len()
                        >= 2
                })
                .count();
            if heavy_objs >= min_count {
                cs.insert(r);
            }
            let subjs: BTreeSet<&str> = of_r.iter().map(|t| t.subj.as_str()).collect();
            let heavy_subjs = subjs
                .iter()
                .filter(|s| {
                    of_r.iter()
                        .filter(|t| t.subj.as_str() == **s)
                        .map(|t| t.obj.as_str())
                        .collect::<BTreeSet<_>>()
                        .len()
                        >= 2
                })
                .count();
            if heavy_subjs >= min_count {
                co.insert(r);
            }
        }
        (cs, co)
    }

    #[test]
    fn type_mining_matches_pairwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let v = vocab(4);
        let s = random_store(&mut rng, 4, 20, 6);
        let (ts, to, tso) = mine_type_constraints(&s, &v, 1).unwrap();
        let (ots, oto, otso) = oracle_type_sets(s.triples(), 4, 1);
        assert_eq!(ts, ots);
        assert_eq!(to, oto);
        assert_eq!(tso, otso);
    }

    #[test]
    fn cardinality_mining_matches_counting_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let v = vocab(3);
        let s = random_store(&mut rng, 3, 30, 5);
        let (cs, co) = mine_cardinality_constraints(&s, &v, 1).unwrap();
        let (ocs, oco) = oracle_card_sets(s.triples(), 3, 1);
        assert_eq!(cs, ocs);
        assert_eq!(co, oco);
    }

    #[test]
    fn mining_respects_thresholds_against_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..10 {
            let n_rel = rng.random_range(2..5);
            let v = vocab(n_rel);
            let s = random_store(&mut rng, n_rel, rng.random_range(5..60), 5);
            for threshold in [1, 2, 3] {
                let (ts, to, tso) = mine_type_constraints(&s, &v, threshold).unwrap();
                let (ots, oto, otso) = oracle_type_sets(s.triples(), n_rel, threshold);
                assert_eq!((ts, to, tso), (ots, oto, otso));
                let (cs, co) = mine_cardinality_constraints(&s, &v, threshold).unwrap();
                let (ocs, oco) = oracle_card_sets(s.triples(), n_rel, threshold);
                assert_eq!((cs, co), (ocs, oco));
            }
        }
    }

    /// Adding triples never removes a membership, and mining is invariant
    /// to triple order and duplication.
    #[test]
    fn monotone_and_order_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let v = vocab(3);
        let mut triples = vec![Triple::new("a", 0, "b")];
        let mut prev = mine(
            &TripleStore::from_triples(triples.clone(), &v).unwrap(),
            &v,
            MiningConfig::default(),
        )
        .unwrap();
        for _ in 0..25 {
            triples.push(Triple::new(
                format!("e{}", rng.random_range(0..4)),
                rng.random_range(0..3),
                format!("e{}", rng.random_range(0..4)),
            ));
            let mut shuffled = triples.clone();
            shuffled.shuffle(&mut rng);
            shuffled.extend(triples.iter().take(3).cloned());
            let next = mine(
                &TripleStore::from_triples(shuffled, &v).unwrap(),
                &v,
                MiningConfig::default(),
            )
            .unwrap();
            assert!(prev.ts().is_subset(next.ts()));
            assert!(prev.to().is_subset(next.to()));
            assert!(prev.tso().is_subset(next.tso()));
            assert!(prev.cs().is_subset(next.cs()));
            assert!(prev.co().is_subset(next.co()));
            prev = next;
        }
    }

    #[test]
    fn save_load_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let v = vocab(4);
        let s = random_store(&mut rng, 4, 40, 5);
        let sets = mine(&s, &v, MiningConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("constraints.json");
        save_constraints(&sets, &v, &path).unwrap();
        let loaded = load_constraints(&path, &v).unwrap();
        assert_eq!(sets, loaded);
    }

    #[test]
    fn empty_sets_round_trip() {
        let v = vocab(3);
        let sets = ConstraintSets::empty(&v);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("constraints.json");
        save_constraints(&sets, &v, &path).unwrap();
        assert_eq!(load_constraints(&path, &v).unwrap(), sets);
    }

    #[test]
    fn load_unknown_relation_is_error() {
        let v = vocab(2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("constraints.json");
        std::fs::write(
            &path,
            r#"{"ts": [["r0", "mystery"]], "to": [], "tso": [], "cs": [], "co": []}"#,
        )
        .unwrap();
        assert!(matches!(
            load_constraints(&path, &v).unwrap_err(),
            Error::UnknownRelation(_)
        ));
    }

    #[test]
    fn from_parts_rejects_na_members() {
        let v = RelationVocabulary::new(["r0", "NA"]).unwrap();
        let mut cs = RelSet::new();
        cs.insert(1);
        let err = ConstraintSets::from_parts(
            &v,
            PairSet::new(),
            PairSet::new(),
            PairSet::new(),
            cs,
            RelSet::new(),
        );
        assert!(err.is_err());
    }
}
