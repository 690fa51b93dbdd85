//! Finite verifiers and brute-force searchers for marker-family
//! combinatorics: families of index sets inside a window that are sparse
//! within each set yet meet every shifted partner, and the joint-occurrence
//! scan that consumes such families.
//!
//! Everything here is exhaustive and deterministic; a NOT-FOUND from the
//! searcher is a statement about this window length only, never a
//! refutation of existence at larger scales.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MarkerError {
    #[error("window length {t} is outside 1..=63")]
    WindowRange { t: u64 },
    #[error("the spacing gap must be at least 1")]
    GapRange,
    #[error("shift bound {shift_bound} must be below the window length {t}")]
    ShiftRange { shift_bound: u64, t: u64 },
    #[error("family-size exponent {delta} must be finite and nonnegative")]
    BadDelta { delta: f64 },
    #[error("exhausting {required} subsets is over the budget of {budget}")]
    SearchBudget { required: u128, budget: u64 },
    #[error("the anchor word does not occur at index {index} of the {stream} word")]
    HypothesisViolation { stream: &'static str, index: u64 },
}

/// Window length, within-set spacing, shift range, and family-size
/// exponent for a marker family over `{0..t-1}`.
///
/// The regime of interest has `g ≤ t`, but `g` is deliberately not capped
/// at `t`: an oversized gap just restricts sets to singletons, and the
/// searcher reports honestly what survives.
#[derive(Debug, Clone, Copy)]
pub struct MarkerParams {
    t: u64,
    g: u64,
    shift_bound: u64,
    delta: f64,
}

impl MarkerParams {
    pub fn new(t: u64, g: u64, shift_bound: u64, delta: f64) -> Result<Self, MarkerError> {
        if t == 0 || t > 63 {
            return Err(MarkerError::WindowRange { t });
        }
        if g == 0 {
            return Err(MarkerError::GapRange);
        }
        if shift_bound >= t {
            return Err(MarkerError::ShiftRange { shift_bound, t });
        }
        if !delta.is_finite() || delta < 0.0 {
            return Err(MarkerError::BadDelta { delta });
        }
        Ok(MarkerParams { t, g, shift_bound, delta })
    }

    /// The standard shift range: `0..=⌊9t/10⌋`.
    pub fn with_default_shift(t: u64, g: u64, delta: f64) -> Result<Self, MarkerError> {
        Self::new(t, g, 9 * t / 10, delta)
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn g(&self) -> u64 {
        self.g
    }

    pub fn shift_bound(&self) -> u64 {
        self.shift_bound
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Smallest admissible family cardinality, `⌈2^{δt}⌉` (with a hair of
    /// slack so that exact powers of two are not rounded up).
    pub fn min_family_size(&self) -> u64 {
        let pow = (2f64).powf(self.delta * self.t as f64);
        if pow >= u64::MAX as f64 {
            return u64::MAX;
        }
        (pow - 1e-9).ceil().max(1.0) as u64
    }
}

/// First reason a family fails, in the canonical check order: window
/// membership, family size, per-set spacing, then joint shifts scanned
/// shift-major over ordered set pairs (self-pairs included).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MarkerViolation {
    OutOfWindow { set_index: usize, value: u64 },
    FamilySize { size: u64, required: u64 },
    Spacing { set_index: usize, u: u64, v: u64 },
    JointShift { a_index: usize, b_index: usize, k: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MarkerDecision {
    Valid,
    Invalid(MarkerViolation),
}

impl MarkerDecision {
    pub fn is_valid(&self) -> bool {
        matches!(self, MarkerDecision::Valid)
    }
}

fn set_mask(values: &[u64], t: u64) -> Result<u64, u64> {
    let mut mask = 0u64;
    for &v in values {
        if v >= t {
            return Err(v);
        }
        mask |= 1u64 << v;
    }
    Ok(mask)
}

fn sorted_elements(mask: u64) -> Vec<u64> {
    (0..64).filter(|b| mask >> b & 1 == 1).collect()
}

fn meets_shift(a: u64, b: u64, k: u64) -> bool {
    (a as u128) & ((b as u128) << k) != 0
}

/// Exhaustively checks the three family conditions and reports the first
/// violation in canonical order. Input sets are read as sets: order and
/// repetition of listed indices are immaterial.
pub fn verify_marker_family(family: &[Vec<u64>], params: &MarkerParams) -> MarkerDecision {
    use MarkerViolation::*;

    let mut masks = Vec::with_capacity(family.len());
    for (set_index, set) in family.iter().enumerate() {
        match set_mask(set, params.t) {
            Ok(mask) => masks.push(mask),
            Err(value) => return MarkerDecision::Invalid(OutOfWindow { set_index, value }),
        }
    }

    let required = params.min_family_size();
    if (family.len() as u64) < required {
        return MarkerDecision::Invalid(FamilySize { size: family.len() as u64, required });
    }

    for (set_index, &mask) in masks.iter().enumerate() {
        let elems = sorted_elements(mask);
        for w in elems.windows(2) {
            if w[1] - w[0] < params.g {
                return MarkerDecision::Invalid(Spacing { set_index, u: w[0], v: w[1] });
            }
        }
    }

    for k in 0..=params.shift_bound {
        for (a_index, &a) in masks.iter().enumerate() {
            for (b_index, &b) in masks.iter().enumerate() {
                if !meets_shift(a, b, k) {
                    return MarkerDecision::Invalid(JointShift { a_index, b_index, k });
                }
            }
        }
    }
    MarkerDecision::Valid
}

#[derive(Debug, Clone)]
pub enum MarkerSearch {
    Found { family: Vec<Vec<u64>>, examined: u64 },
    NotFound { examined: u64, valid_sets: u64 },
}

fn set_survives_alone(mask: u64, params: &MarkerParams) -> bool {
    let elems = sorted_elements(mask);
    if elems.windows(2).any(|w| w[1] - w[0] < params.g) {
        return false;
    }
    (0..=params.shift_bound).all(|k| meets_shift(mask, mask, k))
}

fn mutually_compatible(a: u64, b: u64, shift_bound: u64) -> bool {
    (0..=shift_bound).all(|k| meets_shift(a, b, k) && meets_shift(b, a, k))
}

/// Exhausts all nonempty subsets of the window in ascending bitmask order,
/// keeps those that satisfy spacing and their own shifts, and greedily
/// assembles a maximal mutually compatible family. Found families always
/// re-verify; NOT-FOUND reports how much ground the exhaustion covered.
pub fn search_marker_family(
    params: &MarkerParams,
    budget: u64,
) -> Result<MarkerSearch, MarkerError> {
    let subsets: u128 = 1u128 << params.t;
    if subsets > budget as u128 {
        return Err(MarkerError::SearchBudget { required: subsets, budget });
    }

    let mut chosen: Vec<u64> = Vec::new();
    let mut valid_sets = 0u64;
    for mask in 1..(1u64 << params.t) {
        if !set_survives_alone(mask, params) {
            continue;
        }
        valid_sets += 1;
        if chosen.iter().all(|&c| mutually_compatible(c, mask, params.shift_bound)) {
            chosen.push(mask);
        }
    }
    let examined = (1u64 << params.t) - 1;

    if (chosen.len() as u64) >= params.min_family_size() {
        Ok(MarkerSearch::Found {
            family: chosen.iter().map(|&m| sorted_elements(m)).collect(),
            examined,
        })
    } else {
        Ok(MarkerSearch::NotFound { examined, valid_sets })
    }
}

/// All start indices (0-based) where `needle` occurs in `haystack`.
pub fn find_occurrences<S: PartialEq>(haystack: &[S], needle: &[S]) -> Vec<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return Vec::new();
    }
    (0..=haystack.len() - needle.len())
        .filter(|&i| haystack[i..i + needle.len()] == *needle)
        .collect()
}

fn occurs_at<S: PartialEq>(word: &[S], index: u64, pattern: &[S]) -> bool {
    let i = index as usize;
    i + pattern.len() <= word.len() && word[i..i + pattern.len()] == *pattern
}

/// Verifies the anchor hypothesis — `a_star` occurs in `z1` at every index
/// of `a_set` and in `z2` at every index of `b_set + k` — then reports, for
/// each `(a, b)` pair, the first index where `a` occurs in `z1` and `b`
/// occurs in `z2` simultaneously. `None` is a statement about these finite
/// words only. A failed hypothesis is an error, not a `None`.
pub fn joint_occurrence_check<S: PartialEq>(
    z1: &[S],
    z2: &[S],
    a_set: &[u64],
    b_set: &[u64],
    k: u64,
    a_star: &[S],
    pairs: &[(&[S], &[S])],
) -> Result<Vec<Option<u64>>, MarkerError> {
    for &u in a_set {
        if !occurs_at(z1, u, a_star) {
            return Err(MarkerError::HypothesisViolation { stream: "first", index: u });
        }
    }
    for &v in b_set {
        if !occurs_at(z2, v + k, a_star) {
            return Err(MarkerError::HypothesisViolation { stream: "second", index: v + k });
        }
    }

    let mut out = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        let limit = z1.len().saturating_sub(a.len()).min(z2.len().saturating_sub(b.len()));
        let hit = (0..=limit as u64).find(|&u| occurs_at(z1, u, a) && occurs_at(z2, u, b));
        out.push(hit);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use MarkerViolation::*;

    #[test]
    fn verify_fixtures() {
        // a single full set meets every shift of itself
        let params = MarkerParams::new(10, 1, 9, 0.0).unwrap();
        let full: Vec<Vec<u64>> = vec![(0..10).collect()];
        assert!(verify_marker_family(&full, &params).is_valid());

        // the same family is too small once the exponent asks for two sets
        let params = MarkerParams::new(10, 1, 9, 0.1).unwrap();
        assert_eq!(
            verify_marker_family(&full, &params),
            MarkerDecision::Invalid(FamilySize { size: 1, required: 2 })
        );

        // shift-major scanning reports the k = 0 cross pair first
        let params = MarkerParams::new(6, 3, 5, 0.0).unwrap();
        let family = vec![vec![0, 3], vec![1, 4]];
        assert_eq!(
            verify_marker_family(&family, &params),
            MarkerDecision::Invalid(JointShift { a_index: 0, b_index: 1, k: 0 })
        );

        // empty family fails the size condition at any exponent
        let params = MarkerParams::new(10, 1, 9, 0.2).unwrap();
        assert_eq!(
            verify_marker_family(&[], &params),
            MarkerDecision::Invalid(FamilySize { size: 0, required: 4 })
        );

        let params = MarkerParams::new(6, 3, 5, 0.0).unwrap();
        assert_eq!(
            verify_marker_family(&[vec![0, 2]], &params),
            MarkerDecision::Invalid(Spacing { set_index: 0, u: 0, v: 2 })
        );
        assert_eq!(
            verify_marker_family(&[vec![0, 6]], &params),
            MarkerDecision::Invalid(OutOfWindow { set_index: 0, value: 6 })
        );

        // listed order and repetition do not matter: these are sets
        let params = MarkerParams::new(10, 1, 9, 0.0).unwrap();
        let shuffled: Vec<Vec<u64>> = vec![vec![9, 0, 3, 1, 2, 4, 8, 5, 7, 6, 3]];
        assert!(verify_marker_family(&shuffled, &params).is_valid());
    }

    #[test]
    fn params_validation() {
        assert!(matches!(MarkerParams::new(0, 1, 0, 0.0), Err(MarkerError::WindowRange { .. })));
        assert!(matches!(MarkerParams::new(64, 1, 9, 0.0), Err(MarkerError::WindowRange { .. })));
        assert!(matches!(MarkerParams::new(10, 0, 9, 0.0), Err(MarkerError::GapRange)));
        assert!(matches!(MarkerParams::new(10, 1, 10, 0.0), Err(MarkerError::ShiftRange { .. })));
        assert!(matches!(MarkerParams::new(10, 1, 9, -0.5), Err(MarkerError::BadDelta { .. })));
        assert_eq!(MarkerParams::with_default_shift(12, 2, 0.0).unwrap().shift_bound(), 10);
    }

    #[test]
    fn search_finds_dense_families() {
        let params = MarkerParams::new(10, 1, 9, 0.0).unwrap();
        match search_marker_family(&params, 1 << 20).unwrap() {
            MarkerSearch::Found { family, examined } => {
                assert_eq!(examined, (1 << 10) - 1);
                assert!(!family.is_empty());
                assert!(verify_marker_family(&family, &params).is_valid());
            }
            other => panic!("expected a family, got {other:?}"),
        }
    }

    #[test]
    fn search_exhausts_the_sparse_window() {
        // spacing 2 contradicts the self-shift at k = 1 for every set, so
        // exhaustion proves no family exists at this window length
        let params = MarkerParams::with_default_shift(12, 2, 1.0 / 12.0).unwrap();
        assert_eq!(params.min_family_size(), 2);
        match search_marker_family(&params, 1 << 20).unwrap() {
            MarkerSearch::NotFound { examined, valid_sets } => {
                assert_eq!(examined, (1 << 12) - 1);
                assert_eq!(valid_sets, 0);
            }
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn oversized_gaps_leave_only_singletons() {
        // g > t restricts sets to singletons, which fail their own shift
        // at k = 1: honest NOT-FOUND
        let params = MarkerParams::new(10, 20, 9, 0.0).unwrap();
        match search_marker_family(&params, 1 << 20).unwrap() {
            MarkerSearch::NotFound { valid_sets, .. } => assert_eq!(valid_sets, 0),
            other => panic!("expected exhaustion, got {other:?}"),
        }

        // with no shifts to meet, one singleton survives
        let params = MarkerParams::new(10, 20, 0, 0.0).unwrap();
        match search_marker_family(&params, 1 << 20).unwrap() {
            MarkerSearch::Found { family, .. } => assert_eq!(family, vec![vec![0]]),
            other => panic!("expected a singleton family, got {other:?}"),
        }
    }

    #[test]
    fn search_respects_its_budget() {
        let params = MarkerParams::new(22, 1, 19, 0.0).unwrap();
        assert!(matches!(
            search_marker_family(&params, 1 << 20),
            Err(MarkerError::SearchBudget { required, budget: 1048576 }) if required == 1 << 22
        ));
    }

    fn bits(s: &str) -> Vec<u8> {
        s.bytes().map(|b| b - b'0').collect()
    }

    #[test]
    fn joint_occurrences_on_identical_placement() {
        let z = bits("0011000110");
        let a_star = bits("0011");
        let a_set = [0u64, 5];
        let sub = bits("01");
        let pairs = [(&sub[..], &sub[..])];
        let hits = joint_occurrence_check(&z, &z, &a_set, &a_set, 0, &a_star, &pairs).unwrap();
        assert_eq!(hits, vec![Some(1)]); // A-index 0 plus the offset of "01" inside the anchor
    }

    #[test]
    fn joint_occurrences_cover_all_pairs_by_phase_mixing() {
        // anchor containing every 2-block, placed with period 5 in the
        // first word and period 7 in the second: indices run through all
        // 35 phase combinations, so every pair of 2-blocks meets somewhere
        let a_star = bits("00110");
        let z1: Vec<u8> = (0..40).map(|i| a_star[i % 5]).collect();
        let period2 = bits("0011010");
        let z2: Vec<u8> = (0..40).map(|i| period2[i % 7]).collect();
        let a_set: Vec<u64> = (0..8).map(|i| 5 * i).collect();
        let b_set: Vec<u64> = (0..5).map(|i| 7 * i).collect();

        let blocks = [bits("00"), bits("01"), bits("10"), bits("11")];
        let mut pairs = Vec::new();
        for a in &blocks {
            for b in &blocks {
                pairs.push((&a[..], &b[..]));
            }
        }
        let hits =
            joint_occurrence_check(&z1, &z2, &a_set, &b_set, 0, &a_star, &pairs).unwrap();
        assert_eq!(hits.len(), 16);
        for (pair, hit) in pairs.iter().zip(&hits) {
            let u = hit.expect("every pair meets") as usize;
            assert_eq!(&z1[u..u + 2], pair.0);
            assert_eq!(&z2[u..u + 2], pair.1);
        }
    }

    #[test]
    fn joint_occurrence_hypothesis_gate() {
        let a_star = bits("0011");
        let mut z1: Vec<u8> = (0..24).map(|i| a_star[i % 4]).collect();
        let z2 = z1.clone();
        let a_set = [0u64, 4, 8];
        let sub = bits("11");
        let pairs = [(&sub[..], &sub[..])];

        // shifted placement: the anchor sits at b_set + k in the second word
        let hits =
            joint_occurrence_check(&z1, &z2, &a_set, &[0, 4], 4, &a_star, &pairs).unwrap();
        assert_eq!(hits[0], Some(2));

        // a pair that never shares an index inside these finite words
        let z3 = bits("0011");
        let eleven = bits("11");
        let zeros = bits("00");
        let novel = [(&eleven[..], &zeros[..])];
        let hits = joint_occurrence_check(&z3, &z3, &[0], &[0], 0, &a_star, &novel).unwrap();
        assert_eq!(hits, vec![None]);

        // corrupting one anchor placement trips the gate as an error
        z1[5] = 1 - z1[5];
        match joint_occurrence_check(&z1, &z2, &a_set, &a_set, 0, &a_star, &pairs) {
            Err(MarkerError::HypothesisViolation { stream: "first", index: 4 }) => {}
            other => panic!("expected a hypothesis violation, got {other:?}"),
        }
    }

    #[test]
    fn occurrence_scan() {
        let z = bits("0010010");
        assert_eq!(find_occurrences(&z, &bits("001")), vec![0, 3]);
        assert_eq!(find_occurrences(&z, &bits("111")), Vec::<usize>::new());
        assert_eq!(find_occurrences(&z, &bits("")), Vec::<usize>::new());
    }
}
