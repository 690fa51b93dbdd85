//! Past-to-future analysis over language oracles: extension sets, branching
//! profiles, the union-of-cycles decision on transfer graphs, and
//! shortest-witness searches for predictor and forcing words.
//!
//! The guiding question is how much the future of a point is pinned down by
//! a finite past. `extensions` and `past_branching` measure it directly;
//! `is_periodic_union` decides the degenerate case (every past extends
//! uniquely one step, which for an essential transfer graph means a finite
//! union of cycles); the two searches produce explicit finite pasts that
//! determine a stretch of the future.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::subshifts::{IdWord, LanguageOracle, OracleError, TransferGraph};

#[derive(Debug, Error)]
pub enum PredictionError {
    #[error("the given word is not in the language")]
    NotInLanguage,
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// All length-`k` words `u` with `wu` in the language. Errors when `w`
/// itself is not in the language (distinct from an empty extension set,
/// which extendability rules out anyway).
pub fn extensions(
    x: &dyn LanguageOracle,
    w: &[u16],
    k: usize,
) -> Result<BTreeSet<IdWord>, PredictionError> {
    if !x.contains(w)? {
        return Err(PredictionError::NotInLanguage);
    }
    let mut out = BTreeSet::new();
    for word in x.words(w.len() + k)? {
        if word.starts_with(w) {
            out.insert(word[w.len()..].to_vec());
        }
    }
    Ok(out)
}

/// How the length-`k` future branches over all length-`m` pasts.
#[derive(Debug, Clone)]
pub struct BranchingProfile {
    pub m: usize,
    pub k: usize,
    pub max_extensions: u64,
    /// Lexicographically first past attaining `max_extensions`.
    pub argmax_past: IdWord,
    /// extension count -> number of pasts with that count; the counts sum
    /// to `|L_m|`.
    pub histogram: BTreeMap<u64, u64>,
}

/// Groups `L_{m+k}` by length-`m` front segment and reports the branching
/// profile of the future.
pub fn past_branching(
    x: &dyn LanguageOracle,
    m: usize,
    k: usize,
) -> Result<BranchingProfile, PredictionError> {
    let mut per_past: BTreeMap<IdWord, u64> = BTreeMap::new();
    for word in x.words(m + k)? {
        *per_past.entry(word[..m].to_vec()).or_insert(0) += 1;
    }
    let (argmax_past, max_extensions) = per_past
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))) // ties: lex-first past
        .map(|(w, &c)| (w.clone(), c))
        .ok_or(PredictionError::Oracle(OracleError::EmptySystem))?;
    let mut histogram: BTreeMap<u64, u64> = BTreeMap::new();
    for &c in per_past.values() {
        *histogram.entry(c).or_insert(0) += 1;
    }
    Ok(BranchingProfile { m, k, max_extensions, argmax_past, histogram })
}

/// A vertex whose one-step future branches: the word extends by either
/// symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchWitness {
    pub past: IdWord,
    pub first: u16,
    pub second: u16,
}

#[derive(Debug, Clone)]
pub struct PeriodicityReport {
    pub order: usize,
    pub periodic: bool,
    /// On a negative answer: the first branching vertex with two of its
    /// one-symbol extensions.
    pub witness: Option<BranchWitness>,
    /// On a positive answer: the cycles, each listed as its vertex words in
    /// edge order starting from the smallest vertex.
    pub cycles: Vec<Vec<IdWord>>,
}

/// Decides whether the essential graph presents a finite union of periodic
/// orbits: true exactly when every vertex has out-degree 1 (the trimmed
/// graph is then a disjoint union of cycles, since a functional essential
/// graph has no trees hanging off its cycles).
pub fn is_periodic_union(g: &TransferGraph) -> PeriodicityReport {
    let m = g.order();
    for v in 0..g.vertex_count() as u32 {
        let targets = g.targets(v);
        if targets.len() >= 2 {
            let appended = |t: u32| g.vertex_word(t)[m - 1];
            return PeriodicityReport {
                order: m,
                periodic: false,
                witness: Some(BranchWitness {
                    past: g.vertex_word(v).to_vec(),
                    first: appended(targets[0]),
                    second: appended(targets[1]),
                }),
                cycles: Vec::new(),
            };
        }
    }
    // out-degree 1 everywhere: walk each cycle once
    let mut seen = vec![false; g.vertex_count()];
    let mut cycles = Vec::new();
    for start in 0..g.vertex_count() as u32 {
        if seen[start as usize] {
            continue;
        }
        let mut cycle = Vec::new();
        let mut v = start;
        while !seen[v as usize] {
            seen[v as usize] = true;
            cycle.push(g.vertex_word(v).to_vec());
            v = g.targets(v)[0];
        }
        debug_assert_eq!(v, start, "essential functional graphs are unions of cycles");
        cycles.push(cycle);
    }
    PeriodicityReport { order: m, periodic: true, witness: None, cycles }
}

/// A past that determines a stretch of the future, with the certification
/// depth of the enumeration that verified it.
#[derive(Debug, Clone)]
pub struct ForcedFuture {
    /// The witness past (`b` or `v` depending on the search).
    pub past: IdWord,
    /// The unique continuation it forces.
    pub forced: IdWord,
    /// Words of this length were enumerated to certify the claim.
    pub horizon: usize,
    /// False when the oracle is sample-backed, in which case the horizon is
    /// the strength of the claim rather than a proof.
    pub exact: bool,
}

/// Finds the shortest `b` (then lexicographically first) such that `ba` is
/// in the language and every word of length `|ba| + k` starting with `ba`
/// ends in the same `k` symbols. Lengths `0..=budget` are searched; `None`
/// means the budget ran out, not that no predictor exists.
pub fn find_predictor_word(
    x: &dyn LanguageOracle,
    a: &[u16],
    k: usize,
    budget: usize,
) -> Result<Option<ForcedFuture>, PredictionError> {
    if !x.contains(a)? {
        return Err(PredictionError::NotInLanguage);
    }
    for len in 0..=budget {
        let horizon = len + a.len() + k;
        // b -> the single forced tail, or None after a conflict
        let mut tails: BTreeMap<IdWord, Option<IdWord>> = BTreeMap::new();
        for word in x.words(horizon)? {
            if &word[len..len + a.len()] != a {
                continue;
            }
            let b = word[..len].to_vec();
            let tail = word[len + a.len()..].to_vec();
            tails
                .entry(b)
                .and_modify(|t| {
                    if t.as_ref() != Some(&tail) {
                        *t = None;
                    }
                })
                .or_insert(Some(tail));
        }
        if let Some((b, Some(tail))) = tails.into_iter().find(|(_, t)| t.is_some()) {
            return Ok(Some(ForcedFuture {
                past: b,
                forced: tail,
                horizon,
                exact: !x.sample_based(),
            }));
        }
    }
    Ok(None)
}

/// Finds the shortest `v` (then lexicographically first) whose every
/// occurrence is followed by `u`, certified by enumerating all words of
/// length `|v| + |u|`: by factor-closure and extendability, the fronts of
/// those words realize every occurrence context of `v`.
pub fn find_forcing_word(
    x: &dyn LanguageOracle,
    u: &[u16],
    budget: usize,
) -> Result<Option<ForcedFuture>, PredictionError> {
    if !x.contains(u)? {
        return Err(PredictionError::NotInLanguage);
    }
    for len in 0..=budget {
        let horizon = len + u.len();
        let mut ok: BTreeMap<IdWord, bool> = BTreeMap::new();
        for word in x.words(horizon)? {
            let v = word[..len].to_vec();
            let follows = &word[len..] == u;
            ok.entry(v).and_modify(|f| *f &= follows).or_insert(follows);
        }
        if let Some((v, _)) = ok.into_iter().find(|(_, f)| *f) {
            return Ok(Some(ForcedFuture {
                past: v,
                forced: u.to_vec(),
                horizon,
                exact: !x.sample_based(),
            }));
        }
    }
    Ok(None)
}
