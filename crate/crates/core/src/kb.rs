//! Knowledge-base triples, the relation vocabulary, and the lookups the
//! constraint miner builds on.
//!
//! Entities are opaque strings; "type" is always implicit via entity sharing,
//! so no entity typing system is modeled here. Stores deduplicate triples
//! (mining is set-based) and are immutable once built.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Sentinel vocabulary name marking the designated no-relation label.
pub const NA_NAME: &str = "NA";

/// Ordered set of relation names. Index = position, dense `0..len()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationVocabulary {
    names: Vec<String>,
    index: BTreeMap<String, usize>,
    na_index: Option<usize>,
}

impl RelationVocabulary {
    /// Builds a vocabulary from names in order. Names must be unique and
    /// non-empty; a name equal to [`NA_NAME`] marks the no-relation label.
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::BadVocabulary("no relations".into()));
        }
        let mut index = BTreeMap::new();
        let mut na_index = None;
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::BadVocabulary(format!("empty name at index {i}")));
            }
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::BadVocabulary(format!("duplicate name '{name}'")));
            }
            if name == NA_NAME {
                na_index = Some(i);
            }
        }
        Ok(RelationVocabulary {
            names,
            index,
            na_index,
        })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, rel: usize) -> Option<&str> {
        self.names.get(rel).map(String::as_str)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Like [`index_of`](Self::index_of) but failing with
    /// [`Error::UnknownRelation`].
    pub fn resolve(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| Error::UnknownRelation(name.to_string()))
    }

    pub fn na_index(&self) -> Option<usize> {
        self.na_index
    }

    pub fn is_na(&self, rel: usize) -> bool {
        self.na_index == Some(rel)
    }

    pub fn check_index(&self, rel: usize) -> Result<()> {
        if rel < self.len() {
            Ok(())
        } else {
            Err(Error::BadRelationIndex {
                index: rel,
                size: self.len(),
            })
        }
    }

    /// Loads a vocabulary file: one relation name per line, index = line
    /// number starting at 0. Blank lines and `#` comments are not allowed
    /// here since position is meaning.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let names: Vec<&str> = text.lines().collect();
        for (i, name) in names.iter().enumerate() {
            if name.trim().is_empty() {
                return Err(Error::Malformed {
                    path: path.display().to_string(),
                    line: i + 1,
                    reason: "blank vocabulary line".into(),
                });
            }
        }
        if names.is_empty() {
            return Err(Error::EmptyInput(path.display().to_string()));
        }
        Self::new(names.into_iter().map(str::trim))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for name in &self.names {
            out.push_str(name);
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// One subject–relation–object fact. `rel` indexes a [`RelationVocabulary`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub subj: String,
    pub rel: usize,
    pub obj: String,
}

impl Triple {
    pub fn new(subj: impl Into<String>, rel: usize, obj: impl Into<String>) -> Self {
        Triple {
            subj: subj.into(),
            rel,
            obj: obj.into(),
        }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, r{}, {})", self.subj, self.rel, self.obj)
    }
}

/// Deduplicated triple set with per-relation and per-entity indices.
///
/// Immutable after construction; all lookups are rebuildable from `triples`.
#[derive(Debug, Clone)]
pub struct TripleStore {
    n_relations: usize,
    triples: Vec<Triple>,
    rel_subjects: Vec<BTreeSet<String>>,
    rel_objects: Vec<BTreeSet<String>>,
    rel_triples: Vec<Vec<usize>>,
    by_subject: BTreeMap<String, Vec<usize>>,
    by_object: BTreeMap<String, Vec<usize>>,
}

impl TripleStore {
    /// Builds a store over `vocab` from raw triples. Duplicates collapse to
    /// one entry; triples are kept in sorted order so iteration is stable.
    pub fn from_triples(triples: Vec<Triple>, vocab: &RelationVocabulary) -> Result<Self> {
        let n_relations = vocab.len();
        let mut set = BTreeSet::new();
        for t in triples {
            if t.subj.is_empty() || t.obj.is_empty() {
                return Err(Error::BadTriple(format!("empty entity in {t}")));
            }
            vocab.check_index(t.rel)?;
            set.insert(t);
        }
        let triples: Vec<Triple> = set.into_iter().collect();

        let mut rel_subjects = vec![BTreeSet::new(); n_relations];
        let mut rel_objects = vec![BTreeSet::new(); n_relations];
        let mut rel_triples = vec![Vec::new(); n_relations];
        let mut by_subject: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut by_object: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, t) in triples.iter().enumerate() {
            rel_subjects[t.rel].insert(t.subj.clone());
            rel_objects[t.rel].insert(t.obj.clone());
            rel_triples[t.rel].push(i);
            by_subject.entry(t.subj.clone()).or_default().push(i);
            by_object.entry(t.obj.clone()).or_default().push(i);
        }
        Ok(TripleStore {
            n_relations,
            triples,
            rel_subjects,
            rel_objects,
            rel_triples,
            by_subject,
            by_object,
        })
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn n_relations(&self) -> usize {
        self.n_relations
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    /// Entities appearing as subject of `rel`.
    pub fn subjects_of(&self, rel: usize) -> Result<&BTreeSet<String>> {
        self.rel_subjects.get(rel).ok_or(Error::BadRelationIndex {
            index: rel,
            size: self.n_relations,
        })
    }

    /// Entities appearing as object of `rel`.
    pub fn objects_of(&self, rel: usize) -> Result<&BTreeSet<String>> {
        self.rel_objects.get(rel).ok_or(Error::BadRelationIndex {
            index: rel,
            size: self.n_relations,
        })
    }

    /// Indices into [`triples`](Self::triples) of the triples with relation `rel`.
    pub fn triples_of(&self, rel: usize) -> Result<&[usize]> {
        self.rel_triples
            .get(rel)
            .map(Vec::as_slice)
            .ok_or(Error::BadRelationIndex {
                index: rel,
                size: self.n_relations,
            })
    }

    /// Indices of triples whose subject is `entity` (empty slice if unseen).
    pub fn with_subject(&self, entity: &str) -> &[usize] {
        self.by_subject.get(entity).map_or(&[], Vec::as_slice)
    }

    /// Indices of triples whose object is `entity` (empty slice if unseen).
    pub fn with_object(&self, entity: &str) -> &[usize] {
        self.by_object.get(entity).map_or(&[], Vec::as_slice)
    }
}

/// How [`load_triples`] treats relation names not in the vocabulary.
#[derive(Debug, Clone, Copy)]
pub enum VocabPolicy<'a> {
    /// Unknown relations are errors; the given vocabulary is used as-is.
    Strict(&'a RelationVocabulary),
    /// The vocabulary is built from the file in first-seen order.
    Grow,
}

/// Loads a triple file: UTF-8, one `subj<TAB>relation<TAB>obj` record per
/// line, `#` comment lines and blank lines skipped. A file with no records
/// is an error.
pub fn load_triples(path: &Path, policy: VocabPolicy) -> Result<(TripleStore, RelationVocabulary)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_triples(&text, &path.display().to_string(), policy)
}

/// Parses triple records from `text`; `source` names the input in errors.
pub fn parse_triples(
    text: &str,
    source: &str,
    policy: VocabPolicy,
) -> Result<(TripleStore, RelationVocabulary)> {
    let mut names: Vec<String> = Vec::new();
    let mut name_index: BTreeMap<String, usize> = BTreeMap::new();
    if let VocabPolicy::Strict(vocab) = policy {
        names = vocab.names().to_vec();
        for (i, n) in names.iter().enumerate() {
            name_index.insert(n.clone(), i);
        }
    }

    let mut triples = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let malformed = |reason: String| Error::Malformed {
            path: source.to_string(),
            line: lineno,
            reason,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(malformed(format!(
                "expected 3 tab-separated fields, found {}",
                fields.len()
            )));
        }
        let (subj, rel_name, obj) = (fields[0], fields[1], fields[2]);
        if subj.is_empty() || rel_name.is_empty() || obj.is_empty() {
            return Err(malformed("empty field".into()));
        }
        let rel = match name_index.get(rel_name) {
            Some(&i) => i,
            None => match policy {
                VocabPolicy::Strict(_) => {
                    return Err(Error::UnknownRelation(rel_name.to_string()));
                }
                VocabPolicy::Grow => {
                    let i = names.len();
                    names.push(rel_name.to_string());
                    name_index.insert(rel_name.to_string(), i);
                    i
                }
            },
        };
        triples.push(Triple::new(subj, rel, obj));
    }
    if triples.is_empty() {
        return Err(Error::EmptyInput(source.to_string()));
    }
    let vocab = RelationVocabulary::new(names)?;
    let store = TripleStore::from_triples(triples, &vocab)?;
    Ok((store, vocab))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn vocab(names: &[&str]) -> RelationVocabulary {
        RelationVocabulary::new(names.iter().copied()).unwrap()
    }

    #[test]
    fn parse_two_records() {
        let text = "e1\talmaMater\te2\ne1\tknownFor\te3\n";
        let (store, vocab) = parse_triples(text, "test", VocabPolicy::Grow).unwrap();
        assert_eq!(store.len(), 2);
        assert_eq!(vocab.names(), &["almaMater".to_string(), "knownFor".to_string()]);
    }

    #[test]
    fn two_field_line_is_error_at_line() {
        let text = "e1\talmaMater\te2\ne1\tknownFor\n";
        let err = parse_triples(text, "test", VocabPolicy::Grow).unwrap_err();
        match err {
            Error::Malformed { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn duplicate_triple_stored_once() {
        let text = "e1\tr\te2\ne1\tr\te2\n";
        let (store, _) = parse_triples(text, "test", VocabPolicy::Grow).unwrap();
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn empty_file_is_error() {
        let err = parse_triples("# only a comment\n", "test", VocabPolicy::Grow).unwrap_err();
        assert!(matches!(err, Error::EmptyInput(_)));
    }

    #[test]
    fn strict_mode_rejects_unknown_relation() {
        let v = vocab(&["almaMater"]);
        let err = parse_triples("e1\tknownFor\te2\n", "test", VocabPolicy::Strict(&v)).unwrap_err();
        assert!(matches!(err, Error::UnknownRelation(_)));
    }

    #[test]
    fn na_sentinel_sets_na_index() {
        let v = vocab(&["almaMater", "NA", "city"]);
        assert_eq!(v.na_index(), Some(1));
        assert!(v.is_na(1));
        assert!(!v.is_na(0));
    }

    #[test]
    fn vocabulary_rejects_duplicates_and_empty() {
        assert!(RelationVocabulary::new(["a", "a"]).is_err());
        assert!(RelationVocabulary::new(["a", ""]).is_err());
        assert!(RelationVocabulary::new(Vec::<String>::new()).is_err());
    }

    #[test]
    fn subjects_and_objects_lookups() {
        let v = vocab(&["r0", "r1"]);
        let store = TripleStore::from_triples(
            vec![
                Triple::new("a", 0, "b"),
                Triple::new("c", 0, "d"),
                Triple::new("a", 1, "b"),
            ],
            &v,
        )
        .unwrap();
        let subj0: Vec<&str> = store.subjects_of(0).unwrap().iter().map(|s| s.as_str()).collect();
        assert_eq!(subj0, ["a", "c"]);
        let subj1: Vec<&str> = store.subjects_of(1).unwrap().iter().map(|s| s.as_str()).collect();
        assert_eq!(subj1, ["a"]);
        let obj0: Vec<&str> = store.objects_of(0).unwrap().iter().map(|s| s.as_str()).collect();
        assert_eq!(obj0, ["b", "d"]);
        assert!(store.subjects_of(2).is_err());
    }

    #[test]
    fn empty_relation_has_empty_sets() {
        let v = vocab(&["r0", "r1"]);
        let store = TripleStore::from_triples(vec![Triple::new("a", 0, "b")], &v).unwrap();
        assert!(store.subjects_of(1).unwrap().is_empty());
        assert!(store.objects_of(1).unwrap().is_empty());
    }

    #[test]
    fn shared_object_distinct_subjects() {
        let v = vocab(&["r0"]);
        let store = TripleStore::from_triples(
            vec![Triple::new("a", 0, "b"), Triple::new("c", 0, "b")],
            &v,
        )
        .unwrap();
        assert_eq!(store.objects_of(0).unwrap().len(), 1);
    }

    fn random_triples(rng: &mut ChaCha8Rng, n: usize, n_rel: usize, n_ent: usize) -> Vec<Triple> {
        (0..n)
            .map(|_| {
                Triple::new(
                    format!("e{}", rng.random_range(0..n_ent)),
                    rng.random_range(0..n_rel),
                    format!("e{}", rng.random_range(0..n_ent)),
                )
            })
            .collect()
    }

    /// Lookups agree with a naive linear scan, and rebuilding the store from
    /// its own triple list reproduces them.
    #[test]
    fn lookups_match_linear_scan_and_rebuild() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n_rel = rng.random_range(1..6);
            let v = RelationVocabulary::new((0..n_rel).map(|i| format!("r{i}"))).unwrap();
            let triples = random_triples(&mut rng, rng.random_range(1..40), n_rel, 8);
            let store = TripleStore::from_triples(triples, &v).unwrap();
            let rebuilt = TripleStore::from_triples(store.triples().to_vec(), &v).unwrap();
            assert_eq!(store.triples(), rebuilt.triples());
            for rel in 0..n_rel {
                let subs: BTreeSet<String> = store
                    .triples()
                    .iter()
                    .filter(|t| t.rel == rel)
                    .map(|t| t.subj.clone())
                    .collect();
                let objs: BTreeSet<String> = store
                    .triples()
                    .iter()
                    .filter(|t| t.rel == rel)
                    .map(|t| t.obj.clone())
                    .collect();
                assert_eq!(&subs, store.subjects_of(rel).unwrap());
                assert_eq!(&objs, store.objects_of(rel).unwrap());
                assert_eq!(&subs, rebuilt.subjects_of(rel).unwrap());
                assert_eq!(&objs, rebuilt.objects_of(rel).unwrap());
            }
            for (i, t) in store.triples().iter().enumerate() {
                assert!(store.with_subject(&t.subj).contains(&i));
                assert!(store.with_object(&t.obj).contains(&i));
            }
        }
    }
}
