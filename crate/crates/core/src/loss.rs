//! Differentiable constraint losses over pairs of prediction vectors.
//!
//! For a pair of instances with probability outputs `p^m`, `p^n` and an
//! active gate (see [`crate::indicators`]), the *Coherent* local loss is
//! `-log Σ v ⊙ (p^m ⊗ p^n)` against the set's single indicator structure,
//! and the *Semantic* local loss is `-log Σ_rule f(p^m, p^n, rule)` where
//! `f` scores one rule at a time:
//!
//! * type rule: `f = Π_{u_i=1} q_i · Π_{u_i=0} (1 - q_i)` with
//!   `q_i = p^m_i + p^n_i - p^m_i p^n_i` ("relation i predicted for at
//!   least one of the two instances"),
//! * cardinality rule: `f = Π_{u_i=1} p^m_i p^n_i · Π_{u_i=0} (1 - p^m_i p^n_i)`
//!   ("relation i predicted for both").
//!
//! The Semantic form treats rules in one set as mutually exclusive: mass
//! that satisfies one rule exactly zeroes the score of every other rule.
//!
//! The batch loss sums local terms over instance pairs and all five sets.
//! Every log argument is clamped below at `eps` so mined gaps produce a
//! large finite loss instead of an infinity. Gradients are closed-form,
//! not autodiff, and are checked against central finite differences by
//! [`grad_check`].
//!
//! Determinism: pairs may be evaluated in parallel, but reduction always
//! happens in lexicographic pair order, so results are bit-identical
//! across thread counts.

use std::collections::BTreeMap;
use std::ops::Deref;

use rayon::prelude::*;

use crate::encoding::{symmetrize, CoherentVectors, SemanticRuleSets};
use crate::error::{Error, Result};
use crate::indicators::{indicators_with, CoReading};
use crate::kb::Triple;
use crate::mining::{ConstraintSets, SetKind};

/// Tolerance on `Σ p_i = 1` when validating a probability vector.
pub const PROB_SUM_TOLERANCE: f64 = 1e-6;

/// Default clamp inside every `log`.
pub const DEFAULT_EPS: f64 = 1e-12;

/// A validated probability distribution over the relation vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVec(Vec<f64>);

impl ProbVec {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::BadProbability("empty vector".into()));
        }
        let mut sum = 0.0;
        for (i, &p) in values.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::BadProbability(format!("entry {i} = {p}")));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(Error::BadProbability(format!("sum = {sum}")));
        }
        Ok(ProbVec(values))
    }

    /// Wraps without validating; for internal perturbation paths only.
    pub(crate) fn new_unchecked(values: Vec<f64>) -> Self {
        ProbVec(values)
    }

    pub fn uniform(n: usize) -> Self {
        ProbVec(vec![1.0 / n as f64; n])
    }

    pub fn one_hot(n: usize, index: usize) -> Self {
        let mut v = vec![0.0; n];
        v[index] = 1.0;
        ProbVec(v)
    }

    /// Index of the largest entry, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }
}

impl Deref for ProbVec {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// One labeled instance: gold triple plus the model's output distribution.
#[derive(Debug, Clone)]
pub struct Instance {
    pub id: String,
    pub gold: Triple,
    pub probs: ProbVec,
}

/// A mini-batch of instances sharing one vocabulary length.
#[derive(Debug, Clone)]
pub struct Batch {
    instances: Vec<Instance>,
}

impl Batch {
    pub fn new(instances: Vec<Instance>) -> Result<Self> {
        if instances.is_empty() {
            return Err(Error::EmptyInput("batch".into()));
        }
        let n = instances[0].probs.len();
        for inst in &instances {
            if inst.probs.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: inst.probs.len(),
                });
            }
        }
        Ok(Batch { instances })
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn n_relations(&self) -> usize {
        self.instances[0].probs.len()
    }
}

/// Which encoding the batch loss runs against.
#[derive(Debug, Clone, Copy)]
pub enum Encoding<'a> {
    Coherent(&'a CoherentVectors),
    Semantic(&'a SemanticRuleSets),
}

impl Encoding<'_> {
    pub fn n_relations(&self) -> usize {
        match self {
            Encoding::Coherent(cv) => cv.n_relations(),
            Encoding::Semantic(sr) => sr.n_relations(),
        }
    }

    pub fn kind(&self) -> EncodingKind {
        match self {
            Encoding::Coherent(_) => EncodingKind::Coherent,
            Encoding::Semantic(_) => EncodingKind::Semantic,
        }
    }
}

/// Encoding selector for configs and CLI flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodingKind {
    Coherent,
    Semantic,
}

/// How instance pairs are enumerated in the batch sum.
///
/// The aggregation formula writes an unqualified double sum over the
/// batch; the strict unordered form (each pair once, no self-pairs) is the
/// default since ordered iteration only doubles every symmetric term and a
/// self-pair compares a triple with itself. The other readings stay
/// available for scale experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairMode {
    #[default]
    UnorderedStrict,
    OrderedNoSelf,
    OrderedWithSelf,
}

/// What to do when a set has no members but its gate is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmptySetPolicy {
    /// Contribute nothing: absent mined knowledge should not punish the
    /// model.
    #[default]
    Skip,
    /// Contribute the clamp value `-log eps` per gated pair.
    Penalize,
}

#[derive(Debug, Clone)]
pub struct LossOptions {
    pub eps: f64,
    pub pair_mode: PairMode,
    pub empty_sets: EmptySetPolicy,
    pub co_reading: CoReading,
    /// Record per-(pair, set) terms in the report.
    pub detail: bool,
}

impl Default for LossOptions {
    fn default() -> Self {
        LossOptions {
            eps: DEFAULT_EPS,
            pair_mode: PairMode::default(),
            empty_sets: EmptySetPolicy::default(),
            co_reading: CoReading::default(),
            detail: false,
        }
    }
}

/// One recorded local term: instance indices, set, value.
#[derive(Debug, Clone, PartialEq)]
pub struct PairLoss {
    pub m: usize,
    pub n: usize,
    pub kind: SetKind,
    pub value: f64,
}

/// Batch loss result. `total` is exactly the sum of `per_set` values; when
/// requested, `grads[i][k]` holds `∂ total / ∂ p^i_k`.
#[derive(Debug, Clone)]
pub struct LossReport {
    pub total: f64,
    pub per_set: BTreeMap<SetKind, f64>,
    pub per_pair: Option<Vec<PairLoss>>,
    pub grads: Option<Vec<Vec<f64>>>,
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::BadConfig(format!("eps must be positive, got {eps}")))
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

// ---------------------------------------------------------------------------
// Local loss kernels
// ---------------------------------------------------------------------------

/// Coherent local loss for a type set: `-log max(Σ_{i,j} v_ij p^m_i p^n_j, eps)`,
/// or 0 when the gate is off.
pub fn coherent_type_local(
    p_m: &[f64],
    p_n: &[f64],
    v: &[Vec<u8>],
    indicator: bool,
    eps: f64,
) -> Result<f64> {
    check_eps(eps)?;
    let n = p_m.len();
    check_len(n, p_n.len())?;
    check_len(n, v.len())?;
    if !indicator {
        return Ok(0.0);
    }
    for row in v {
        check_len(n, row.len())?;
    }
    let mut sum = 0.0;
    for i in 0..n {
        if p_m[i] == 0.0 {
            continue;
        }
        let mut row = 0.0;
        for j in 0..n {
            if v[i][j] == 1 {
                row += p_n[j];
            }
        }
        sum += p_m[i] * row;
    }
    Ok(-sum.max(eps).ln())
}

/// Coherent local loss for a cardinality set:
/// `-log max(Σ_i v_i p^m_i p^n_i, eps)`, or 0 when the gate is off.
pub fn coherent_card_local(
    p_m: &[f64],
    p_n: &[f64],
    v: &[u8],
    indicator: bool,
    eps: f64,
) -> Result<f64> {
    check_eps(eps)?;
    let n = p_m.len();
    check_len(n, p_n.len())?;
    check_len(n, v.len())?;
    if !indicator {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for i in 0..n {
        if v[i] == 1 {
            sum += p_m[i] * p_n[i];
        }
    }
    Ok(-sum.max(eps).ln())
}

/// Semantic score of one type rule; in `[0, 1]`.
pub fn semantic_score_type(p_m: &[f64], p_n: &[f64], u: &[u8]) -> Result<f64> {
    let n = p_m.len();
    check_len(n, p_n.len())?;
    check_len(n, u.len())?;
    let mut f = 1.0;
    for i in 0..n {
        let q = p_m[i] + p_n[i] - p_m[i] * p_n[i];
        f *= if u[i] == 1 { q } else { 1.0 - q };
    }
    Ok(f)
}

/// Semantic score of one cardinality rule; in `[0, 1]`.
pub fn semantic_score_card(p_m: &[f64], p_n: &[f64], u: &[u8]) -> Result<f64> {
    let n = p_m.len();
    check_len(n, p_n.len())?;
    check_len(n, u.len())?;
    let mut f = 1.0;
    for i in 0..n {
        let w = p_m[i] * p_n[i];
        f *= if u[i] == 1 { w } else { 1.0 - w };
    }
    Ok(f)
}

/// Rule form dispatched by [`semantic_local`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    Type,
    Card,
}

/// Semantic local loss for one set: `-log max(Σ_rule f, eps)`, or 0 when
/// the gate is off. An empty rule list is gated to 0 as well; batch-level
/// code decides whether to penalize instead (see [`EmptySetPolicy`]).
pub fn semantic_local(
    p_m: &[f64],
    p_n: &[f64],
    rules: &[Vec<u8>],
    kind: RuleKind,
    indicator: bool,
    eps: f64,
) -> Result<f64> {
    check_eps(eps)?;
    if !indicator || rules.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for u in rules {
        sum += match kind {
            RuleKind::Type => semantic_score_type(p_m, p_n, u)?,
            RuleKind::Card => semantic_score_card(p_m, p_n, u)?,
        };
    }
    Ok(-sum.max(eps).ln())
}

// ---------------------------------------------------------------------------
// Gradient kernels
// ---------------------------------------------------------------------------

/// Value plus `d value / d p^m` and `d value / d p^n` accumulated into
/// `gm`/`gn`. The gate is assumed active; the clamped branch contributes
/// zero gradient.
fn coherent_type_grad(p_m: &[f64], p_n: &[f64], v: &[Vec<u8>], eps: f64, gm: &mut [f64], gn: &mut [f64]) -> f64 {
    let n = p_m.len();
    let mut sum = 0.0;
    let mut row = vec![0.0; n]; // Σ_j v_ij p^n_j
    let mut col = vec![0.0; n]; // Σ_i v_ij p^m_i
    for i in 0..n {
        for j in 0..n {
            if v[i][j] == 1 {
                row[i] += p_n[j];
                col[j] += p_m[i];
            }
        }
        sum += p_m[i] * row[i];
    }
    if sum > eps {
        for i in 0..n {
            gm[i] -= row[i] / sum;
            gn[i] -= col[i] / sum;
        }
    }
    -sum.max(eps).ln()
}

fn coherent_card_grad(p_m: &[f64], p_n: &[f64], v: &[u8], eps: f64, gm: &mut [f64], gn: &mut [f64]) -> f64 {
    let n = p_m.len();
    let mut sum = 0.0;
    for i in 0..n {
        if v[i] == 1 {
            sum += p_m[i] * p_n[i];
        }
    }
    if sum > eps {
        for i in 0..n {
            if v[i] == 1 {
                gm[i] -= p_n[i] / sum;
                gn[i] -= p_m[i] / sum;
            }
        }
    }
    -sum.max(eps).ln()
}

/// Per-rule score and exact partials w.r.t. an elementwise composite
/// `t_i` (`q_i` for type rules, `w_i = p^m_i p^n_i` for cardinality
/// rules). Division-free: partials use products with the `i`-th factor
/// excluded, so zero factors are handled exactly.
fn rule_score_and_dt(u: &[u8], t: &[f64], dt: &mut [f64]) -> f64 {
    let n = u.len();
    let ones: Vec<usize> = (0..n).filter(|&i| u[i] == 1).collect();
    let mut ones_prod = 1.0;
    for &i in &ones {
        ones_prod *= t[i];
    }
    // prefix/suffix over the `1 - t_i` factors of the zero positions.
    let factor = |i: usize| if u[i] == 0 { 1.0 - t[i] } else { 1.0 };
    let mut prefix = vec![1.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] * factor(i);
    }
    let mut suffix = vec![1.0; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] * factor(i);
    }
    let zeros_prod = prefix[n];
    for i in 0..n {
        if u[i] == 1 {
            let mut excl = 1.0;
            for &k in &ones {
                if k != i {
                    excl *= t[k];
                }
            }
            dt[i] = excl * zeros_prod;
        } else {
            dt[i] = -ones_prod * prefix[i] * suffix[i + 1];
        }
    }
    ones_prod * zeros_prod
}

fn semantic_grad(
    p_m: &[f64],
    p_n: &[f64],
    rules: &[Vec<u8>],
    kind: RuleKind,
    eps: f64,
    gm: &mut [f64],
    gn: &mut [f64],
) -> f64 {
    let n = p_m.len();
    let t: Vec<f64> = match kind {
        RuleKind::Type => (0..n).map(|i| p_m[i] + p_n[i] - p_m[i] * p_n[i]).collect(),
        RuleKind::Card => (0..n).map(|i| p_m[i] * p_n[i]).collect(),
    };
    let mut sum = 0.0;
    let mut ds_dt = vec![0.0; n];
    let mut dt = vec![0.0; n];
    for u in rules {
        sum += rule_score_and_dt(u, &t, &mut dt);
        for i in 0..n {
            ds_dt[i] += dt[i];
        }
    }
    if sum > eps {
        for i in 0..n {
            let (dt_dpm, dt_dpn) = match kind {
                RuleKind::Type => (1.0 - p_n[i], 1.0 - p_m[i]),
                RuleKind::Card => (p_n[i], p_m[i]),
            };
            gm[i] -= ds_dt[i] * dt_dpm / sum;
            gn[i] -= ds_dt[i] * dt_dpn / sum;
        }
    }
    -sum.max(eps).ln()
}

// ---------------------------------------------------------------------------
// Batch aggregation
// ---------------------------------------------------------------------------

struct PairEval {
    values: [f64; 5],
    grad_m: Option<Vec<f64>>,
    grad_n: Option<Vec<f64>>,
}

struct BatchContext<'a> {
    encoding: Encoding<'a>,
    sets: &'a ConstraintSets,
    /// `tso` matrix OR'd with its transpose, so both orientations of an
    /// ordered rule are scored under the single disjunctive `tso` gate.
    tso_sym: Option<Vec<Vec<u8>>>,
    opts: &'a LossOptions,
}

fn eval_pair(
    ctx: &BatchContext,
    gold_m: &Triple,
    gold_n: &Triple,
    p_m: &[f64],
    p_n: &[f64],
    want_grads: bool,
) -> Result<PairEval> {
    let n = p_m.len();
    let flags = indicators_with(gold_m, gold_n, ctx.sets.na_index(), ctx.opts.co_reading);
    let mut values = [0.0; 5];
    let mut grad_m = want_grads.then(|| vec![0.0; n]);
    let mut grad_n = want_grads.then(|| vec![0.0; n]);
    for (slot, kind) in SetKind::ALL.into_iter().enumerate() {
        if !flags.get(kind) {
            continue;
        }
        if ctx.sets.set_is_empty(kind) {
            match ctx.opts.empty_sets {
                EmptySetPolicy::Skip => continue,
                EmptySetPolicy::Penalize => {
                    values[slot] = -ctx.opts.eps.ln();
                    continue;
                }
            }
        }
        values[slot] = match (ctx.encoding, &mut grad_m, &mut grad_n) {
            (Encoding::Coherent(cv), Some(gm), Some(gn)) => match kind {
                SetKind::Ts => coherent_type_grad(p_m, p_n, &cv.v_ts, ctx.opts.eps, gm, gn),
                SetKind::To => coherent_type_grad(p_m, p_n, &cv.v_to, ctx.opts.eps, gm, gn),
                SetKind::Tso => {
                    let m = ctx.tso_sym.as_ref().expect("tso matrix prepared");
                    coherent_type_grad(p_m, p_n, m, ctx.opts.eps, gm, gn)
                }
                SetKind::Cs => coherent_card_grad(p_m, p_n, &cv.v_cs, ctx.opts.eps, gm, gn),
                SetKind::Co => coherent_card_grad(p_m, p_n, &cv.v_co, ctx.opts.eps, gm, gn),
            },
            (Encoding::Coherent(cv), ..) => match kind {
                SetKind::Ts => coherent_type_local(p_m, p_n, &cv.v_ts, true, ctx.opts.eps)?,
                SetKind::To => coherent_type_local(p_m, p_n, &cv.v_to, true, ctx.opts.eps)?,
                SetKind::Tso => {
                    let m = ctx.tso_sym.as_ref().expect("tso matrix prepared");
                    coherent_type_local(p_m, p_n, m, true, ctx.opts.eps)?
                }
                SetKind::Cs => coherent_card_local(p_m, p_n, &cv.v_cs, true, ctx.opts.eps)?,
                SetKind::Co => coherent_card_local(p_m, p_n, &cv.v_co, true, ctx.opts.eps)?,
            },
            (Encoding::Semantic(sr), Some(gm), Some(gn)) => {
                let rk = if kind.is_type() { RuleKind::Type } else { RuleKind::Card };
                semantic_grad(p_m, p_n, sr.rules(kind), rk, ctx.opts.eps, gm, gn)
            }
            (Encoding::Semantic(sr), ..) => {
                let rk = if kind.is_type() { RuleKind::Type } else { RuleKind::Card };
                semantic_local(p_m, p_n, sr.rules(kind), rk, true, ctx.opts.eps)?
            }
        };
    }
    Ok(PairEval {
        values,
        grad_m,
        grad_n,
    })
}

fn pair_list(len: usize, mode: PairMode) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    match mode {
        PairMode::UnorderedStrict => {
            for m in 0..len {
                for n in (m + 1)..len {
                    pairs.push((m, n));
                }
            }
        }
        PairMode::OrderedNoSelf => {
            for m in 0..len {
                for n in 0..len {
                    if m != n {
                        pairs.push((m, n));
                    }
                }
            }
        }
        PairMode::OrderedWithSelf => {
            for m in 0..len {
                for n in 0..len {
                    pairs.push((m, n));
                }
            }
        }
    }
    pairs
}

fn compute_batch(
    golds: &[&Triple],
    probs: &[&[f64]],
    ctx: &BatchContext,
    want_grads: bool,
) -> Result<LossReport> {
    let pairs = pair_list(golds.len(), ctx.opts.pair_mode);
    let evals: Vec<PairEval> = if pairs.len() >= 32 {
        pairs
            .par_iter()
            .map(|&(m, n)| eval_pair(ctx, golds[m], golds[n], probs[m], probs[n], want_grads))
            .collect::<Result<_>>()?
    } else {
        pairs
            .iter()
            .map(|&(m, n)| eval_pair(ctx, golds[m], golds[n], probs[m], probs[n], want_grads))
            .collect::<Result<_>>()?
    };

    // Reduce in fixed pair order regardless of how evals were produced.
    let mut per_set_acc = [0.0; 5];
    let mut grads = want_grads.then(|| vec![vec![0.0; probs[0].len()]; golds.len()]);
    let mut per_pair = ctx.opts.detail.then(Vec::new);
    for (&(m, n), eval) in pairs.iter().zip(&evals) {
        for slot in 0..5 {
            per_set_acc[slot] += eval.values[slot];
        }
        if let (Some(grads), Some(gm), Some(gn)) = (&mut grads, &eval.grad_m, &eval.grad_n) {
            for k in 0..gm.len() {
                grads[m][k] += gm[k];
                grads[n][k] += gn[k];
            }
        }
        if let Some(list) = &mut per_pair {
            let flags = indicators_with(golds[m], golds[n], ctx.sets.na_index(), ctx.opts.co_reading);
            for (slot, kind) in SetKind::ALL.into_iter().enumerate() {
                if flags.get(kind) {
                    list.push(PairLoss {
                        m,
                        n,
                        kind,
                        value: eval.values[slot],
                    });
                }
            }
        }
    }
    let mut per_set = BTreeMap::new();
    let mut total = 0.0;
    for (slot, kind) in SetKind::ALL.into_iter().enumerate() {
        per_set.insert(kind, per_set_acc[slot]);
        total += per_set_acc[slot];
    }
    Ok(LossReport {
        total,
        per_set,
        per_pair,
        grads,
    })
}

fn batch_context<'a>(
    encoding: Encoding<'a>,
    sets: &'a ConstraintSets,
    opts: &'a LossOptions,
) -> Result<BatchContext<'a>> {
    check_eps(opts.eps)?;
    check_len(sets.n_relations(), encoding.n_relations())?;
    let tso_sym = match encoding {
        Encoding::Coherent(cv) => Some(symmetrize(&cv.v_tso)),
        Encoding::Semantic(_) => None,
    };
    Ok(BatchContext {
        encoding,
        sets,
        tso_sym,
        opts,
    })
}

/// Slice-level entry point for hot loops (training) that already hold
/// golds and probabilities; skips `Batch` construction and validation.
pub(crate) fn batch_loss_raw(
    golds: &[&Triple],
    probs: &[&[f64]],
    encoding: Encoding,
    sets: &ConstraintSets,
    opts: &LossOptions,
    want_grads: bool,
) -> Result<LossReport> {
    let ctx = batch_context(encoding, sets, opts)?;
    compute_batch(golds, probs, &ctx, want_grads)
}

/// Sums the gated local losses over instance pairs and all five sets, with
/// gates computed from the gold triples. With `want_grads` the report also
/// carries the exact partial of the total w.r.t. every probability entry.
pub fn batch_constraint_loss(
    batch: &Batch,
    encoding: Encoding,
    sets: &ConstraintSets,
    opts: &LossOptions,
    want_grads: bool,
) -> Result<LossReport> {
    check_len(sets.n_relations(), batch.n_relations())?;
    let ctx = batch_context(encoding, sets, opts)?;
    let golds: Vec<&Triple> = batch.instances().iter().map(|i| &i.gold).collect();
    let probs: Vec<&[f64]> = batch.instances().iter().map(|i| &*i.probs).collect();
    compute_batch(&golds, &probs, &ctx, want_grads)
}

/// Projects onto the tangent space of the probability simplex
/// (zero-mean over coordinates).
fn project_tangent(g: &[f64]) -> Vec<f64> {
    let mean = g.iter().sum::<f64>() / g.len() as f64;
    g.iter().map(|&x| x - mean).collect()
}

/// Compares analytic batch-loss gradients against central finite
/// differences with step `h`, both projected onto the simplex tangent
/// space, and returns the maximum relative error over all coordinates
/// (`|a - n| / max(1, |a|, |n|)`).
///
/// Probabilities should be strictly interior (entries at least ~1e-3) so
/// no log clamp is active along the perturbation.
pub fn grad_check(
    batch: &Batch,
    encoding: Encoding,
    sets: &ConstraintSets,
    opts: &LossOptions,
    h: f64,
) -> Result<f64> {
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::BadConfig(format!("step size must be positive, got {h}")));
    }
    check_len(sets.n_relations(), batch.n_relations())?;
    let ctx = batch_context(encoding, sets, opts)?;
    let golds: Vec<&Triple> = batch.instances().iter().map(|i| &i.gold).collect();
    let probs: Vec<&[f64]> = batch.instances().iter().map(|i| &*i.probs).collect();
    let analytic = compute_batch(&golds, &probs, &ctx, true)?
        .grads
        .expect("gradients requested");

    let n = batch.n_relations();
    let mut raw: Vec<Vec<f64>> = batch.instances().iter().map(|i| i.probs.to_vec()).collect();
    let mut max_err: f64 = 0.0;
    for i in 0..raw.len() {
        let mut numeric = vec![0.0; n];
        for k in 0..n {
            let orig = raw[i][k];
            raw[i][k] = orig + h;
            let views: Vec<&[f64]> = raw.iter().map(Vec::as_slice).collect();
            let plus = compute_batch(&golds, &views, &ctx, false)?.total;
            raw[i][k] = orig - h;
            let views: Vec<&[f64]> = raw.iter().map(Vec::as_slice).collect();
            let minus = compute_batch(&golds, &views, &ctx, false)?.total;
            raw[i][k] = orig;
            numeric[k] = (plus - minus) / (2.0 * h);
        }
        let a = project_tangent(&analytic[i]);
        let b = project_tangent(&numeric);
        for k in 0..n {
            let denom = 1.0_f64.max(a[k].abs()).max(b[k].abs());
            max_err = max_err.max((a[k] - b[k]).abs() / denom);
        }
    }
    Ok(max_err)
}
