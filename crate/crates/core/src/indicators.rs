//! Pair-level gates deciding which constraint sets apply to a pair of gold
//! triples.
//!
//! Each flag fires on an entity-equality pattern between the two triples:
//! shared subject (`ts`), shared object (`to`), subject of one equals
//! object of the other (`tso`), distinct subjects with a shared object
//! (`cs`), and shared subject with distinct objects (`co`). Every condition
//! is symmetric in the two triples. A pair involving a no-relation gold
//! label is exempt from all sets.
//!
//! The `co` condition has two readings: the symmetric one used by default
//! (mirror image of `cs`), and a literal variant that fires on everything
//! *except* the same-subject/different-object pattern. The literal variant
//! is kept behind [`CoReading::Literal`] for fidelity experiments only; it
//! would apply the object-cardinality loss to entirely unrelated pairs.

use crate::kb::{RelationVocabulary, Triple};
use crate::mining::SetKind;

/// Which reading of the object-cardinality indicator to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoReading {
    /// `co` fires iff the subjects match and the objects differ.
    #[default]
    Symmetric,
    /// `co` fires unless the subjects match and the objects differ.
    Literal,
}

/// The five gates for one ordered (but symmetric) triple pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IndicatorFlags {
    pub ts: bool,
    pub to: bool,
    pub tso: bool,
    pub cs: bool,
    pub co: bool,
}

impl IndicatorFlags {
    pub fn get(self, kind: SetKind) -> bool {
        match kind {
            SetKind::Ts => self.ts,
            SetKind::To => self.to,
            SetKind::Tso => self.tso,
            SetKind::Cs => self.cs,
            SetKind::Co => self.co,
        }
    }

    pub fn any(self) -> bool {
        self.ts || self.to || self.tso || self.cs || self.co
    }
}

/// Computes the gates for a pair of gold triples under the default
/// symmetric `co` reading.
pub fn indicators(m: &Triple, n: &Triple, vocab: &RelationVocabulary) -> IndicatorFlags {
    indicators_with(m, n, vocab.na_index(), CoReading::Symmetric)
}

/// Computes the gates with an explicit `co` reading.
pub fn indicators_with_mode(
    m: &Triple,
    n: &Triple,
    vocab: &RelationVocabulary,
    co_reading: CoReading,
) -> IndicatorFlags {
    indicators_with(m, n, vocab.na_index(), co_reading)
}

/// Core implementation; `na` is the no-relation index when the vocabulary
/// has one.
pub(crate) fn indicators_with(
    m: &Triple,
    n: &Triple,
    na: Option<usize>,
    co_reading: CoReading,
) -> IndicatorFlags {
    if na == Some(m.rel) || na == Some(n.rel) {
        return IndicatorFlags::default();
    }
    let same_subj = m.subj == n.subj;
    let same_obj = m.obj == n.obj;
    let cross = m.subj == n.obj || m.obj == n.subj;
    IndicatorFlags {
        ts: same_subj,
        to: same_obj,
        tso: cross,
        cs: !same_subj && same_obj,
        co: match co_reading {
            CoReading::Symmetric => same_subj && !same_obj,
            CoReading::Literal => !(!same_obj && same_subj),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(subj: &str, rel: usize, obj: &str) -> Triple {
        Triple::new(subj, rel, obj)
    }

    fn flags(m: &Triple, n: &Triple) -> IndicatorFlags {
        indicators_with(m, n, None, CoReading::Symmetric)
    }

    #[test]
    fn shared_subject_distinct_objects() {
        let f = flags(&t("a", 0, "b"), &t("a", 1, "c"));
        assert!(f.ts && !f.to && !f.cs && f.co);
    }

    #[test]
    fn shared_object_distinct_subjects() {
        let f = flags(&t("a", 0, "b"), &t("c", 1, "b"));
        assert!(f.to && f.cs && !f.ts && !f.co);
    }

    #[test]
    fn cross_equality_fires_tso() {
        let f = flags(&t("a", 0, "b"), &t("b", 1, "c"));
        assert!(f.tso);
    }

    #[test]
    fn identical_triples() {
        let f = flags(&t("a", 0, "b"), &t("a", 0, "b"));
        assert!(f.ts && f.to && !f.cs && !f.co);
        assert!(!f.tso);
        let g = flags(&t("a", 0, "a"), &t("a", 0, "a"));
        assert!(g.tso);
    }

    #[test]
    fn na_gold_label_clears_all_flags() {
        let v = RelationVocabulary::new(["r0", "NA"]).unwrap();
        let f = indicators(&t("a", 1, "b"), &t("a", 0, "c"), &v);
        assert!(!f.any());
        let g = indicators(&t("a", 0, "b"), &t("a", 0, "c"), &v);
        assert!(g.any());
    }

    #[test]
    fn literal_co_reading_inverts() {
        let m = t("a", 0, "b");
        let n = t("a", 1, "c");
        assert!(indicators_with(&m, &n, None, CoReading::Symmetric).co);
        assert!(!indicators_with(&m, &n, None, CoReading::Literal).co);
        let unrelated = t("x", 1, "y");
        assert!(!indicators_with(&m, &unrelated, None, CoReading::Symmetric).co);
        assert!(indicators_with(&m, &unrelated, None, CoReading::Literal).co);
    }

    /// Every condition is symmetric in the pair, checked over all entity
    /// tuples from a 3-letter alphabet.
    #[test]
    fn symmetric_in_pair_order() {
        let ents = ["a", "b", "c"];
        for sm in ents {
            for om in ents {
                for sn in ents {
                    for on in ents {
                        let m = t(sm, 0, om);
                        let n = t(sn, 1, on);
                        assert_eq!(flags(&m, &n), flags(&n, &m), "{m} vs {n}");
                    }
                }
            }
        }
    }

    #[test]
    fn cardinality_flags_imply_type_flags() {
        let ents = ["a", "b", "c"];
        for sm in ents {
            for om in ents {
                for sn in ents {
                    for on in ents {
                        let f = flags(&t(sm, 0, om), &t(sn, 1, on));
                        if f.cs {
                            assert!(f.to);
                        }
                        if f.co {
                            assert!(f.ts);
                        }
                    }
                }
            }
        }
    }
}
