//! The staged construction of a one-sided real-symbol stream whose shift is
//! far from invertible: every finite pattern that occurs in the stream
//! recurs preceded by two well-separated values, and the verification of
//! that (together with decay, frequency and mixture structure) is exact.
//!
//! Building blocks, over nonnegative words with the weighted norm
//! `||x|| = sum x(i) 2^{-i}`:
//!
//! - marker values `theta_0(x) = ||x||/8` and `theta_1(x) = ||x||/4`;
//! - prepend maps `tau_b(x) = (theta_b(x), x(1), x(2), ...)`, extended to
//!   bit words right-to-left, so `tau_{b1 b2} = tau_{b1} . tau_{b2}`;
//!   one shift recovers the argument: `shift(tau_b(x), |b|) = x`, and norms
//!   contract layer by layer (`||tau_0 x|| = (9/16)||x||`,
//!   `||tau_1 x|| = (5/8)||x||`).
//!
//! Stages: `x_0` is the seed; stage `n` picks a chain depth
//! `D(n) = min(3^{L_n}, d_max)` and forms
//!
//! ```text
//! y_n  = concat over k = 0..L_n-1, b in {0,1}^D(n) (in order)  of tau_b(sigma^k x_n)
//! x_{n+1} = x_n^{M_n} y_n
//! ```
//!
//! with the multiplicity `M_n` chosen by the schedule policy (the scaled
//! default: the least power of two at least `max(2^n, n^2 |y_n| / L_n)`, so
//! copies dominate later stages). The limit stream extends every stage.
//!
//! Stage lengths explode; the construction materializes words only while
//! they fit the exact-mode cap and stage budget, keeps exact arithmetic on
//! the deepest materialized stage, and serves deeper symbols lazily through
//! the block structure (copies reduce modulo a stage length; the first
//! unmaterialized `y` is addressed section-by-section and its chain values
//! recomputed from suffix norms). Indices and reported positions are
//! 1-based throughout.

use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use thiserror::Error;

use crate::dyadic::Dyadic;
use crate::words::{self, RealWord, SymbolStream, WordError};

/// Longest word kept in exact arithmetic by default.
pub const DEFAULT_EXACT_CAP: u64 = 65_536;

/// Default cap on symbols materialized per stage word.
pub const DEFAULT_STAGE_BUDGET: u64 = 1 << 22;

#[derive(Debug, Error)]
pub enum NoninvError {
    #[error("seed must be a nonempty word over [0, 1] with a nonzero entry")]
    BadSeed,
    #[error("bit word may contain only 0 and 1, got {0:?}")]
    BadBits(String),
    #[error("stage {stage} needs {} materialized symbols, over the cap of {cap}", required_display(.required))]
    StageBudget {
        stage: usize,
        required: Option<u128>,
        cap: u64,
    },
    #[error("stage {stage} has chain depth 3^{len}, which makes the next stage astronomically long")]
    DepthAstronomical { stage: usize, len: u128 },
    #[error("no explicit multiplicity provided for stage {stage}")]
    MultiplicityMissing { stage: usize },
    #[error("index {index} lies inside an unmaterialized deep block and cannot be served")]
    BeyondFeasible { index: u128 },
    #[error("position {index} is past the feasible stream range")]
    BadIndex { index: u128 },
    #[error("prefix disagrees with the stream at position {at}")]
    PrefixMismatch { at: u128 },
    #[error("decomposition at stage {stage} supports prefixes up to {supported} symbols, got {got}")]
    DecomposeRange { stage: usize, supported: u128, got: u128 },
    #[error("records do not reach stage {stage}")]
    RecordUnavailable { stage: usize },
    #[error("pattern does not occur in the given word")]
    NoOccurrence,
    #[error("pattern is not a factor of the deepest materialized stage")]
    NotASubword,
    #[error("pattern must be nonempty and at most as long as the search range")]
    BadPattern,
    #[error("cylinder intervals must satisfy 0 <= lo < hi <= 1, got [{lo}, {hi})")]
    BadCylinder { lo: String, hi: String },
    #[error("window [{start}, +{len}] is outside the supported region of stage {stage}")]
    WindowRange { start: u128, len: u64, stage: usize },
    #[error(transparent)]
    Word(#[from] WordError),
}

fn required_display(r: &Option<u128>) -> String {
    match r {
        Some(n) => n.to_string(),
        None => "astronomically many".to_string(),
    }
}

// ---------------------------------------------------------------------------
// theta / tau
// ---------------------------------------------------------------------------

/// `theta_0 = ||x||/8`, `theta_1 = ||x||/4`, given the norm.
pub fn theta_of_norm(bit: bool, norm: &Dyadic) -> Dyadic {
    norm.div_pow2(if bit { 2 } else { 3 })
}

/// One prepend layer: `tau_b(x) = (theta_b(x), x...)`.
pub fn tau_step(bit: bool, x: &[Dyadic]) -> RealWord {
    let norm = words::weighted_norm(x);
    let mut out = RealWord::with_capacity(x.len() + 1);
    out.push(theta_of_norm(bit, &norm));
    out.extend_from_slice(x);
    out
}

/// `tau` over a bit word, rightmost bit applied first.
pub fn tau(bits: &[bool], x: &[Dyadic]) -> RealWord {
    let mut out = x.to_vec();
    for &b in bits.iter().rev() {
        out = tau_step(b, &out);
    }
    out
}

/// Parses a bit word like `"010"`.
pub fn parse_bits(s: &str) -> Result<Vec<bool>, NoninvError> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(NoninvError::BadBits(s.to_string())),
        })
        .collect()
}

/// Norm contraction factor of one `tau` layer: 9/16 for bit 0, 5/8 for 1.
fn layer_factor(bit: bool) -> Dyadic {
    if bit {
        Dyadic::ratio(5, 3)
    } else {
        Dyadic::ratio(9, 4)
    }
}

// ---------------------------------------------------------------------------
// Schedules and stage records
// ---------------------------------------------------------------------------

/// How stage multiplicities `M_n` are chosen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MultiplicityPolicy {
    /// Least power of two at least `max(2^n, n^2 |y_n| / L_n)`.
    Scaled,
    /// Explicit per-stage values (stages past the end are unscheduled).
    Explicit(Vec<u64>),
}

#[derive(Debug, Clone)]
pub struct ConstructionSchedule {
    pub x0: RealWord,
    pub d_max: Option<u64>,
    pub policy: MultiplicityPolicy,
    pub exact_cap: u64,
    pub stage_budget: u64,
}

impl ConstructionSchedule {
    /// The default schedule: scaled multiplicities, default caps.
    pub fn scaled(x0: RealWord, d_max: Option<u64>) -> Result<Self, NoninvError> {
        Self::with_policy(x0, d_max, MultiplicityPolicy::Scaled)
    }

    pub fn with_policy(
        x0: RealWord,
        d_max: Option<u64>,
        policy: MultiplicityPolicy,
    ) -> Result<Self, NoninvError> {
        let ok = !x0.is_empty()
            && x0.iter().all(|v| !v.is_negative() && *v <= Dyadic::one())
            && x0.iter().any(|v| !v.is_zero());
        if !ok {
            return Err(NoninvError::BadSeed);
        }
        Ok(ConstructionSchedule {
            x0,
            d_max,
            policy,
            exact_cap: DEFAULT_EXACT_CAP,
            stage_budget: DEFAULT_STAGE_BUDGET,
        })
    }

    /// Materialization cap: a stage word is built only if it fits both the
    /// exact-arithmetic cap and the stage budget.
    fn materialize_cap(&self) -> u64 {
        self.exact_cap.min(self.stage_budget)
    }
}

/// Arithmetic facts about one stage and its transition to the next. `None`
/// means "astronomically large": past exact integer range, which also means
/// the quantity can never be indexed into.
#[derive(Debug, Clone)]
pub struct StageRecord {
    pub stage: usize,
    /// `L_n`.
    pub len: u128,
    /// `D(n) = min(3^{L_n}, d_max)`.
    pub depth: Option<u64>,
    /// `|y_n| = 2^D (L(L+1)/2 + L D)`.
    pub y_len: Option<u128>,
    /// `M_n`.
    pub mult: Option<u128>,
    /// `M_n L_n`.
    pub head_len: Option<u128>,
    /// `L_{n+1} = M_n L_n + |y_n|`.
    pub next_len: Option<u128>,
}

fn pow3_checked(l: u128) -> Option<u64> {
    if l > 40 {
        return None;
    }
    let mut acc: u64 = 1;
    for _ in 0..l {
        acc = acc.checked_mul(3)?;
    }
    Some(acc)
}

fn depth_of(len: u128, d_max: Option<u64>) -> Option<u64> {
    match (pow3_checked(len), d_max) {
        (Some(p), Some(d)) => Some(p.min(d)),
        (None, Some(d)) => Some(d),
        (Some(p), None) => Some(p),
        (None, None) => None,
    }
}

fn y_len_of(len: u128, depth: u64) -> Option<u128> {
    if depth >= 127 {
        return None;
    }
    let per_section_sum = len.checked_mul(len.checked_add(1)?)? / 2;
    let chain_total = len.checked_mul(depth as u128)?;
    per_section_sum
        .checked_add(chain_total)?
        .checked_mul(1u128.checked_shl(depth as u32)?)
}

fn next_pow2(v: u128) -> Option<u128> {
    if v == 0 {
        return Some(1);
    }
    if v > (1u128 << 127) {
        return None;
    }
    Some(v.next_power_of_two())
}

fn mult_of(
    policy: &MultiplicityPolicy,
    stage: usize,
    len: u128,
    y_len: Option<u128>,
) -> Option<u128> {
    match policy {
        MultiplicityPolicy::Explicit(v) => v.get(stage).map(|&m| m as u128),
        MultiplicityPolicy::Scaled => {
            let y = y_len?;
            let floor = if stage >= 127 { None } else { Some(1u128 << stage) }?;
            let s2 = (stage as u128).checked_mul(stage as u128)?;
            let scaled = s2.checked_mul(y)?.div_ceil(len);
            next_pow2(floor.max(scaled))
        }
    }
}

fn record_for(
    sched: &ConstructionSchedule,
    stage: usize,
    len: u128,
) -> StageRecord {
    let depth = depth_of(len, sched.d_max);
    let y_len = depth.and_then(|d| y_len_of(len, d));
    let mult = mult_of(&sched.policy, stage, len, y_len);
    let head_len = mult.and_then(|m| m.checked_mul(len));
    let next_len = match (head_len, y_len) {
        (Some(h), Some(y)) => h.checked_add(y),
        _ => None,
    };
    StageRecord { stage, len, depth, y_len, mult, head_len, next_len }
}

// ---------------------------------------------------------------------------
// Stage words
// ---------------------------------------------------------------------------

/// Suffix norms `||sigma^k x||` for `k = 0..=len` (the last entry is 0),
/// computed back to front by `||w_k|| = (x(k+1) + ||w_{k+1}||) / 2`.
fn suffix_norms(x: &[Dyadic]) -> Vec<Dyadic> {
    let mut norms = vec![Dyadic::zero(); x.len() + 1];
    for k in (0..x.len()).rev() {
        norms[k] = (&x[k] + &norms[k + 1]).div_pow2(1);
    }
    norms
}

/// Cumulative section offsets inside `y_n`: `offsets[k]` is the number of
/// symbols before section `k` (the `2^D` tau words over `sigma^k x_n`);
/// `offsets[len]` is `|y_n|`.
fn section_offsets(len: usize, depth: u64) -> Vec<u128> {
    let mut offsets = Vec::with_capacity(len + 1);
    let mut acc: u128 = 0;
    let words_per_section = 1u128 << depth;
    for k in 0..=len {
        offsets.push(acc);
        if k < len {
            let word_len = (len - k) as u128 + depth as u128;
            acc += words_per_section * word_len;
        }
    }
    offsets
}

/// The chain symbol at 1-based chain position `j` of `tau_s(w)` where `s`
/// is `word_index` as a `depth`-bit string (most significant bit first):
/// `coeff(s_j) ||w|| prod_{t>j} factor(s_t)`.
fn chain_symbol(word_index: u128, depth: u64, j: u64, wk_norm: &Dyadic) -> Dyadic {
    let bit_at = |t: u64| -> bool { (word_index >> (depth - t)) & 1 == 1 };
    let mut acc = theta_of_norm(bit_at(j), wk_norm);
    for t in j + 1..=depth {
        acc = &acc * &layer_factor(bit_at(t));
    }
    acc
}

/// Materializes `x_{n+1} = x_n^M y_n` given the already-checked record.
fn build_stage_word(x: &[Dyadic], record: &StageRecord) -> RealWord {
    let len = x.len();
    let depth = record.depth.expect("materialized stage has finite depth");
    let mult = record.mult.expect("materialized stage has a multiplicity") as usize;
    let total = record.next_len.expect("materialized stage has a next length") as usize;
    let norms = suffix_norms(x);

    let mut out = RealWord::with_capacity(total);
    for _ in 0..mult {
        out.extend_from_slice(x);
    }
    for k in 0..len {
        for w in 0..(1u128 << depth) {
            for j in 1..=depth {
                out.push(chain_symbol(w, depth, j, &norms[k]));
            }
            out.extend_from_slice(&x[k..]);
        }
    }
    debug_assert_eq!(out.len(), total);
    out
}

/// Computes the record for `x` at `stage` and materializes the next stage
/// word, or explains why it cannot be materialized.
pub fn build_stage(
    x: &[Dyadic],
    sched: &ConstructionSchedule,
    stage: usize,
) -> Result<(RealWord, StageRecord), NoninvError> {
    let record = record_for(sched, stage, x.len() as u128);
    if record.depth.is_none() {
        return Err(NoninvError::DepthAstronomical { stage, len: record.len });
    }
    if record.mult.is_none() {
        if matches!(sched.policy, MultiplicityPolicy::Explicit(_)) {
            return Err(NoninvError::MultiplicityMissing { stage });
        }
        return Err(NoninvError::StageBudget {
            stage,
            required: None,
            cap: sched.materialize_cap(),
        });
    }
    let cap = sched.materialize_cap();
    match record.next_len {
        Some(n) if n <= cap as u128 => {}
        other => {
            return Err(NoninvError::StageBudget { stage, required: other, cap });
        }
    }
    let word = build_stage_word(x, &record);
    Ok((word, record))
}

// ---------------------------------------------------------------------------
// The construction
// ---------------------------------------------------------------------------

struct Stage {
    x: RealWord,
    suffix_norms: OnceLock<Vec<Dyadic>>,
    y_offsets: OnceLock<Vec<u128>>,
}

impl Stage {
    fn new(x: RealWord) -> Self {
        Stage { x, suffix_norms: OnceLock::new(), y_offsets: OnceLock::new() }
    }

    fn norms(&self) -> &Vec<Dyadic> {
        self.suffix_norms.get_or_init(|| suffix_norms(&self.x))
    }

    fn offsets(&self, depth: u64) -> &Vec<u128> {
        self.y_offsets.get_or_init(|| section_offsets(self.x.len(), depth))
    }
}

/// The staged stream. Stage words are materialized while they fit the caps;
/// all deeper indexing goes through the arithmetic records.
pub struct Construction {
    sched: ConstructionSchedule,
    stages: Vec<Stage>,
    records: Vec<StageRecord>,
}

/// Stage records are extended while the integer arithmetic stays exact;
/// lengths at least double per stage, so this cap is never the binding
/// constraint before `u128` overflow.
const MAX_RECORDS: usize = 96;

impl Construction {
    pub fn new(sched: ConstructionSchedule) -> Result<Self, NoninvError> {
        let cap = sched.materialize_cap() as u128;
        let mut stages = vec![Stage::new(sched.x0.clone())];
        let mut records: Vec<StageRecord> = Vec::new();
        let mut len = sched.x0.len() as u128;
        for stage in 0..MAX_RECORDS {
            let record = record_for(&sched, stage, len);
            let next = record.next_len;
            let materialize = matches!(next, Some(n) if n <= cap)
                && stage + 1 == stages.len();
            if materialize {
                let word = build_stage_word(&stages[stage].x, &record);
                stages.push(Stage::new(word));
            }
            records.push(record);
            match next {
                Some(n) => len = n,
                None => break,
            }
        }
        Ok(Construction { sched, stages, records })
    }

    pub fn schedule(&self) -> &ConstructionSchedule {
        &self.sched
    }

    /// Stage transition records, from stage 0 up to where exact integer
    /// arithmetic ends.
    pub fn records(&self) -> &[StageRecord] {
        &self.records
    }

    pub fn record(&self, stage: usize) -> Result<&StageRecord, NoninvError> {
        self.records.get(stage).ok_or(NoninvError::RecordUnavailable { stage })
    }

    /// Number of materialized stage words (`x_0 .. x_{R}`).
    pub fn materialized_stages(&self) -> usize {
        self.stages.len()
    }

    pub fn stage_word(&self, stage: usize) -> Option<&RealWord> {
        self.stages.get(stage).map(|s| &s.x)
    }

    fn deepest(&self) -> usize {
        self.stages.len() - 1
    }

    /// The symbol at 1-based position `index` of the limit stream.
    ///
    /// Positions inside copies of materialized stages reduce modulo the
    /// stage length; positions inside the first unmaterialized `y` block
    /// are served by section arithmetic over the deepest materialized
    /// stage. Only positions inside a deeper `y` block (which would need an
    /// unmaterializable stage word) are refused.
    pub fn symbol_at(&self, index: u128) -> Result<Dyadic, NoninvError> {
        if index == 0 {
            return Err(NoninvError::BadIndex { index });
        }
        let r = self.deepest();
        let x_r = &self.stages[r].x;
        let l_r = x_r.len() as u128;
        let mut i = index;
        'reduce: loop {
            if i <= l_r {
                return Ok(x_r[(i - 1) as usize].clone());
            }
            for s in r..self.records.len() {
                let rec = &self.records[s];
                debug_assert!(i > rec.len, "reduced positions re-enter the outer loop");
                let in_head = match rec.head_len {
                    None => true, // astronomically long head
                    Some(h) => i <= h,
                };
                if in_head {
                    if s == r {
                        let pos = (i - 1) % l_r;
                        return Ok(x_r[pos as usize].clone());
                    }
                    i = (i - 1) % rec.len + 1;
                    continue 'reduce;
                }
                let in_block = match rec.next_len {
                    None => true,
                    Some(n) => i <= n,
                };
                if in_block {
                    if s == r {
                        let off = i - rec.head_len.expect("head fits when y is indexed");
                        return Ok(self.y_symbol(off));
                    }
                    return Err(NoninvError::BeyondFeasible { index });
                }
            }
            return Err(NoninvError::BadIndex { index });
        }
    }

    /// The symbol at 1-based offset `off` inside `y_R` of the deepest
    /// materialized stage.
    fn y_symbol(&self, off: u128) -> Dyadic {
        let r = self.deepest();
        let stage = &self.stages[r];
        let depth = self.records[r].depth.expect("indexed y has finite depth");
        let offsets = stage.offsets(depth);
        debug_assert!(off >= 1 && off <= *offsets.last().unwrap());
        // section k: the last k with offsets[k] < off
        let k = offsets.partition_point(|&o| o < off) - 1;
        let within = off - offsets[k] - 1; // 0-based inside the section
        let word_len = (stage.x.len() - k) as u128 + depth as u128;
        let w = within / word_len;
        let pos = within % word_len;
        if pos < depth as u128 {
            chain_symbol(w, depth, pos as u64 + 1, &stage.norms()[k])
        } else {
            stage.x[k + (pos - depth as u128) as usize].clone()
        }
    }

    /// The first `n` symbols of the stream, exactly.
    pub fn prefix(&self, n: u64) -> Result<RealWord, NoninvError> {
        let r = self.deepest();
        let x_r = &self.stages[r].x;
        let l_r = x_r.len() as u64;
        let mut out = RealWord::with_capacity(n as usize);
        // fast path: the head of the next stage is x_r-periodic
        let head = self.records[r].head_len.unwrap_or(u128::MAX);
        let fast = (n as u128).min(head) as u64;
        for i in 0..fast {
            out.push(x_r[(i % l_r) as usize].clone());
        }
        for i in fast + 1..=n {
            out.push(self.symbol_at(i as u128)?);
        }
        Ok(out)
    }
}

impl SymbolStream for Construction {
    fn prefix(&self, n: u64) -> Result<RealWord, WordError> {
        Construction::prefix(self, n).map_err(|e| WordError::StreamRange {
            requested: n as u128,
            reason: e.to_string(),
        })
    }
}

/// Builds the default (scaled) construction for a seed and serves the first
/// `n` stream symbols; the sampling entry point for oracle backends.
pub fn sample_prefix(
    x0: &[Dyadic],
    d_max: Option<u64>,
    n: u64,
) -> Result<RealWord, NoninvError> {
    let sched = ConstructionSchedule::scaled(x0.to_vec(), d_max)?;
    Construction::new(sched)?.prefix(n)
}

// ---------------------------------------------------------------------------
// Decomposition
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SegmentClass {
    /// A full copy of the stage word.
    Copy,
    /// A tau word of the `y` block: section `k`, word index `w`, with the
    /// outcome of the exact decay checks on its chain range.
    Decaying {
        section: u64,
        word_index: u128,
        one_step_ok: bool,
        two_step_ok: bool,
    },
    /// Truncated by the end of the prefix; not checked.
    Tail,
}

#[derive(Debug, Clone)]
pub struct Segment {
    /// 1-based start position in the stream.
    pub start: u128,
    pub len: u64,
    pub class: SegmentClass,
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub stage: usize,
    pub segments: Vec<Segment>,
    /// Every complete copy matched the stage word and every complete
    /// decaying segment passed both decay checks.
    pub all_verified: bool,
    /// Largest adjacent ratio `a(j)/a(j+1)` observed on checked ranges.
    pub worst_one_step: Option<f64>,
}

impl Construction {
    /// Splits `prefix` (which must agree with the stream) into stage-`n`
    /// copies and decaying tau words, verifying each complete segment:
    /// copies against `x_n` symbol by symbol, decaying words against the
    /// exact decay inequalities `a(j) <= (9/8) a(j+1)` and
    /// `a(j) <= (7/8) a(j+2)` for `j` up to `len(a) - L_n`.
    ///
    /// Supported range: prefixes inside the copy head of stage `n+2`
    /// (beyond that, stage-`n+1` tau words would have to be split
    /// mid-chain, which is not a stage-`n` decomposition).
    pub fn decompose_prefix(
        &self,
        prefix: &[Dyadic],
        stage: usize,
    ) -> Result<Decomposition, NoninvError> {
        let x_word = self
            .stage_word(stage)
            .ok_or(NoninvError::RecordUnavailable { stage })?
            .clone();
        let rec = self.record(stage)?.clone();
        let rec_next = self.record(stage + 1)?.clone();
        let l_n = rec.len;
        let l_n1 = rec_next.len;
        let depth = rec.depth.ok_or(NoninvError::DepthAstronomical { stage, len: l_n })?;
        let head = rec.head_len.ok_or(NoninvError::MultiplicityMissing { stage })?;
        let supported = rec_next.head_len.unwrap_or(u128::MAX);
        let n_total = prefix.len() as u128;
        if n_total > supported {
            return Err(NoninvError::DecomposeRange { stage, supported, got: n_total });
        }

        // the prefix must be the stream's
        let stream = self.prefix(prefix.len() as u64)?;
        for (i, (a, b)) in prefix.iter().zip(&stream).enumerate() {
            if a != b {
                return Err(NoninvError::PrefixMismatch { at: i as u128 + 1 });
            }
        }

        let x_n = l_n as usize;
        let offsets = section_offsets(x_n, depth);
        let mut segments = Vec::new();
        let mut all_verified = true;
        let mut worst: Option<f64> = None;

        let mut emit = |start: u128, len: u128, class: SegmentClass| {
            segments.push(Segment { start, len: len as u64, class });
        };

        let mut pos: u128 = 1; // 1-based cursor
        'outer: while pos <= n_total {
            // position inside the current x_{n+1} block
            let block_off = (pos - 1) % l_n1; // 0-based
            let (seg_len, proto) = if block_off < head {
                debug_assert_eq!(block_off % l_n, 0, "cursor always lands on segment starts");
                (l_n, SegmentClass::Copy)
            } else {
                let y_off = block_off - head; // 0-based in y_n
                let k = offsets.partition_point(|&o| o <= y_off) - 1;
                let within = y_off - offsets[k];
                let word_len = (x_n - k) as u128 + depth as u128;
                let w = within / word_len;
                debug_assert_eq!(within % word_len, 0, "cursor always lands on word starts");
                (
                    word_len,
                    SegmentClass::Decaying {
                        section: k as u64,
                        word_index: w,
                        one_step_ok: true,
                        two_step_ok: true,
                    },
                )
            };
            if pos + seg_len - 1 > n_total {
                emit(pos, n_total - pos + 1, SegmentClass::Tail);
                break 'outer;
            }
            let a = &prefix[(pos - 1) as usize..(pos - 1 + seg_len) as usize];
            let class = match proto {
                SegmentClass::Copy => {
                    if a != &x_word[..] {
                        all_verified = false;
                    }
                    SegmentClass::Copy
                }
                SegmentClass::Decaying { section, word_index, .. } => {
                    let (one_ok, two_ok) = check_decay(a, x_n, &mut worst);
                    if !(one_ok && two_ok) {
                        all_verified = false;
                    }
                    SegmentClass::Decaying {
                        section,
                        word_index,
                        one_step_ok: one_ok,
                        two_step_ok: two_ok,
                    }
                }
                SegmentClass::Tail => unreachable!(),
            };
            emit(pos, seg_len, class);
            pos += seg_len;
        }

        Ok(Decomposition { stage, segments, all_verified, worst_one_step: worst })
    }
}

/// Exact decay checks on a decaying segment `a` against stage length `l`:
/// for `1 <= j <= len(a) - l`, `8 a(j) <= 9 a(j+1)` and (when `j+2` is in
/// range) `8 a(j) <= 7 a(j+2)`.
fn check_decay(a: &[Dyadic], l: usize, worst: &mut Option<f64>) -> (bool, bool) {
    let mut one_ok = true;
    let mut two_ok = true;
    if a.len() <= l {
        return (one_ok, two_ok);
    }
    let eight = Dyadic::from_int(8);
    let nine = Dyadic::from_int(9);
    let seven = Dyadic::from_int(7);
    for j in 0..a.len() - l {
        let lhs = &eight * &a[j];
        if lhs > &nine * &a[j + 1] {
            one_ok = false;
        }
        if !a[j + 1].is_zero() {
            let ratio = a[j].to_f64() / a[j + 1].to_f64();
            if worst.map(|w| ratio > w).unwrap_or(true) {
                *worst = Some(ratio);
            }
        }
        if j + 2 < a.len() && lhs > &seven * &a[j + 2] {
            two_ok = false;
        }
    }
    (one_ok, two_ok)
}

// ---------------------------------------------------------------------------
// Preimage witnesses
// ---------------------------------------------------------------------------

/// Outcome of scanning a prefix for two occurrences of a pattern preceded
/// by distinct values (two one-step preimage branches realized inside the
/// stream itself).
#[derive(Debug, Clone)]
pub enum WitnessScan {
    Found {
        /// 1-based position of the occurrence preceded by `r`.
        pos_r: u128,
        r: Dyadic,
        /// 1-based position of the occurrence preceded by `r_prime`.
        pos_r_prime: u128,
        r_prime: Dyadic,
    },
    /// The pattern occurs, but never with two distinct predecessors.
    NotFound { occurrences: u64 },
}

/// Scans `prefix` for occurrences of `a` preceded by two distinct symbols.
/// Occurrences at position 1 have no predecessor and only count toward the
/// occurrence total. Errors if `a` never occurs at all.
pub fn preimage_witness(prefix: &[Dyadic], a: &[Dyadic]) -> Result<WitnessScan, NoninvError> {
    if a.is_empty() || a.len() > prefix.len() {
        return Err(NoninvError::BadPattern);
    }
    let mut occurrences = 0u64;
    let mut first: Option<(u128, Dyadic)> = None;
    for i in 0..=prefix.len() - a.len() {
        if &prefix[i..i + a.len()] != a {
            continue;
        }
        occurrences += 1;
        if i == 0 {
            continue;
        }
        let r = prefix[i - 1].clone();
        match &first {
            None => first = Some((i as u128 + 1, r)),
            Some((p, r0)) if *r0 != r => {
                return Ok(WitnessScan::Found {
                    pos_r: *p,
                    r: r0.clone(),
                    pos_r_prime: i as u128 + 1,
                    r_prime: r,
                });
            }
            _ => {}
        }
    }
    if occurrences == 0 {
        return Err(NoninvError::NoOccurrence);
    }
    Ok(WitnessScan::NotFound { occurrences })
}

/// A structural witness located inside the next `y` block: the pattern
/// recurs preceded by `theta_0` and `theta_1` of the suffix it heads, and
/// those differ by `||w_k||/8 >= ||a||/16`.
#[derive(Debug, Clone)]
pub struct StageWitness {
    /// Alignment: `a` is a prefix of `sigma^k x_R`.
    pub alignment: u64,
    pub r: Dyadic,
    pub r_prime: Dyadic,
    /// `r_prime - r`, exactly `||sigma^k x_R|| / 8`.
    pub gap: Dyadic,
    /// `||a|| / 16`.
    pub bound: Dyadic,
    /// `gap >= bound`, checked exactly.
    pub verified: bool,
    /// 1-based stream position where `a` occurs preceded by `r`.
    pub pos_r: u128,
    /// 1-based stream position where `a` occurs preceded by `r_prime`.
    pub pos_r_prime: u128,
}

impl Construction {
    /// Locates `a` as a factor of the deepest materialized stage word and
    /// produces the two-predecessor witness realized inside the next `y`
    /// block, with exact values and stream positions.
    pub fn witness_in_next_stage(&self, a: &[Dyadic]) -> Result<StageWitness, NoninvError> {
        let r = self.deepest();
        let stage = &self.stages[r];
        let x = &stage.x;
        if a.is_empty() || a.len() > x.len() {
            return Err(NoninvError::BadPattern);
        }
        let rec = &self.records[r];
        let depth = rec.depth.ok_or(NoninvError::DepthAstronomical { stage: r, len: rec.len })?;
        let head = rec.head_len.ok_or(NoninvError::BeyondFeasible { index: 0 })?;

        let k0 = (0..=x.len() - a.len())
            .find(|&k| &x[k..k + a.len()] == a)
            .ok_or(NoninvError::NotASubword)?;
        let norm_wk = &stage.norms()[k0];
        let r_val = theta_of_norm(false, norm_wk);
        let r_prime = theta_of_norm(true, norm_wk);
        let gap = &r_prime - &r_val;
        let bound = words::weighted_norm(a).div_pow2(4);
        let verified = gap >= bound;

        // tau words over sigma^{k0} x_R whose chain ends with theta_0 /
        // theta_1: word indices 0 (bits 0...00) and 1 (bits 0...01)
        let offsets = stage.offsets(depth);
        let word_len = (x.len() - k0) as u128 + depth as u128;
        let base = head + offsets[k0];
        let pos_r = base + depth as u128 + 1;
        let pos_r_prime = base + word_len + depth as u128 + 1;
        Ok(StageWitness {
            alignment: k0 as u64,
            r: r_val,
            r_prime,
            gap,
            bound,
            verified,
            pos_r,
            pos_r_prime,
        })
    }

    /// Re-extracts both witness occurrences through `symbol_at` and checks
    /// the predecessor values and the pattern symbols.
    pub fn verify_witness(&self, w: &StageWitness, a: &[Dyadic]) -> Result<bool, NoninvError> {
        for (pos, pred) in [(w.pos_r, &w.r), (w.pos_r_prime, &w.r_prime)] {
            if &self.symbol_at(pos - 1)? != pred {
                return Ok(false);
            }
            for (j, expected) in a.iter().enumerate() {
                if &self.symbol_at(pos + j as u128)? != expected {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

// ---------------------------------------------------------------------------
// Cylinders, frequencies, mixture
// ---------------------------------------------------------------------------

/// A product of half-open intervals `[lo, hi)`, one per window coordinate.
#[derive(Debug, Clone)]
pub struct CylinderSet {
    intervals: Vec<(Dyadic, Dyadic)>,
}

impl CylinderSet {
    pub fn new(intervals: Vec<(Dyadic, Dyadic)>) -> Result<Self, NoninvError> {
        if intervals.is_empty() {
            return Err(NoninvError::BadCylinder { lo: "".into(), hi: "".into() });
        }
        for (lo, hi) in &intervals {
            if lo.is_negative() || lo >= hi || *hi > Dyadic::one() {
                return Err(NoninvError::BadCylinder { lo: lo.to_string(), hi: hi.to_string() });
            }
        }
        Ok(CylinderSet { intervals })
    }

    /// Window length `k`.
    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn intervals(&self) -> &[(Dyadic, Dyadic)] {
        &self.intervals
    }

    pub fn contains(&self, window: &[Dyadic]) -> bool {
        window.len() == self.intervals.len()
            && self
                .intervals
                .iter()
                .zip(window)
                .all(|((lo, hi), v)| lo <= v && v < hi)
    }
}

/// `I(a)`: the number of 0-based shifts `0 <= n <= len(a) - k` whose
/// window lies in the cylinder set.
pub fn occurrence_count(word: &[Dyadic], u: &CylinderSet) -> u64 {
    let k = u.len();
    if word.len() < k {
        return 0;
    }
    (0..=word.len() - k).filter(|&n| u.contains(&word[n..n + k])).count() as u64
}

#[derive(Debug, Clone)]
pub struct CheckpointStat {
    pub m: u64,
    pub hits: u64,
    /// `hits / m` (0-based orbit average over the first `m` shifts).
    pub average: f64,
}

/// One exact two-sided bound check on the stage-to-stage frequency ratio
/// `p(L_{s+1}) / p(L_s)`:
///
/// ```text
/// alpha_s = M_s I_s L_s / (L_{s+1} (I_s + k))
/// beta_s  = (M_s (I_s + k) + |y_s| + k) L_s / (L_{s+1} I_s)
/// ```
///
/// where `I_s` counts cylinder windows inside `x_s`. The bounds come from
/// the copy structure: each of the `M_s` copies contributes its `I_s` hits,
/// and the slack terms `k` cover windows straddling block boundaries.
#[derive(Debug, Clone)]
pub struct RatioCheck {
    pub stage: usize,
    pub i_count: u64,
    pub alpha: BigRational,
    /// Upper bound; `None` when the stage word never meets the cylinder,
    /// which degenerates the bound and skips the check.
    pub beta: Option<BigRational>,
    /// `p(L_{s+1}) / p(L_s)`, exact; `None` when `I_s = 0` (check skipped).
    pub ratio: Option<BigRational>,
    pub ok_lower: bool,
    pub ok_upper: bool,
}

impl RatioCheck {
    pub fn ok(&self) -> bool {
        self.ok_lower && self.ok_upper
    }
}

#[derive(Debug, Clone)]
pub struct FrequencyReport {
    pub window_len: usize,
    pub series: Vec<CheckpointStat>,
    pub ratio_checks: Vec<RatioCheck>,
}

fn big(v: u128) -> BigInt {
    let hi = (v >> 64) as u64;
    let lo = v as u64;
    (BigInt::from(hi) << 64) + BigInt::from(lo)
}

impl Construction {
    /// Scans the stream once and reports cylinder frequencies at the given
    /// checkpoints, plus the exact ratio bound checks at every stage
    /// boundary that lies within the scanned horizon.
    pub fn cylinder_frequency(
        &self,
        u: &CylinderSet,
        checkpoints: &[u64],
    ) -> Result<FrequencyReport, NoninvError> {
        let k = u.len();
        let mut points: Vec<u64> = checkpoints.to_vec();
        // stage lengths inside the horizon get ratio checks; include them
        let max_cp = points.iter().copied().max().unwrap_or(0);
        let mut stage_lens: Vec<(usize, u64)> = Vec::new();
        for rec in &self.records {
            if rec.len <= max_cp as u128 {
                stage_lens.push((rec.stage, rec.len as u64));
            }
        }
        points.extend(stage_lens.iter().map(|&(_, l)| l));
        points.sort_unstable();
        points.dedup();
        if points.is_empty() || max_cp == 0 {
            return Ok(FrequencyReport { window_len: k, series: vec![], ratio_checks: vec![] });
        }

        let horizon = max_cp + k as u64 - 1;
        let prefix = self.prefix(horizon)?;
        let mut hits_at: std::collections::BTreeMap<u64, u64> = Default::default();
        let mut hits = 0u64;
        let mut next_point = 0usize;
        for i in 0..max_cp {
            while next_point < points.len() && points[next_point] == i {
                hits_at.insert(i, hits);
                next_point += 1;
            }
            let w = &prefix[i as usize..i as usize + k];
            if u.contains(w) {
                hits += 1;
            }
        }
        while next_point < points.len() && points[next_point] <= max_cp {
            hits_at.insert(points[next_point], hits);
            next_point += 1;
        }

        let series: Vec<CheckpointStat> = checkpoints
            .iter()
            .filter(|&&m| m > 0 && m <= max_cp)
            .map(|&m| CheckpointStat { m, hits: hits_at[&m], average: hits_at[&m] as f64 / m as f64 })
            .collect();

        let mut ratio_checks = Vec::new();
        for &(s, l_s) in &stage_lens {
            let rec = &self.records[s];
            let (Some(y), Some(m), Some(next)) = (rec.y_len, rec.mult, rec.next_len) else {
                continue;
            };
            if next > max_cp as u128 || s >= self.stages.len() {
                continue;
            }
            let l_s1 = next as u64;
            let i_s = occurrence_count(&self.stages[s].x, u);
            let hits_s = hits_at[&l_s];
            let hits_s1 = hits_at[&l_s1];
            let kb = BigInt::from(k as u64);
            let i_b = BigInt::from(i_s);
            let alpha = BigRational::new(
                big(m) * &i_b * BigInt::from(l_s),
                big(next as u128) * (&i_b + &kb),
            );
            let beta_num = (big(m) * (&i_b + &kb) + big(y) + &kb) * BigInt::from(l_s);
            let beta = (i_s > 0)
                .then(|| BigRational::new(beta_num, big(next as u128) * &i_b));
            let ratio = if hits_s == 0 {
                None
            } else {
                Some(BigRational::new(
                    BigInt::from(hits_s1) * BigInt::from(l_s),
                    BigInt::from(hits_s) * BigInt::from(l_s1),
                ))
            };
            let (ok_lower, ok_upper) = match (&ratio, &beta) {
                (Some(rat), Some(b)) => (&alpha <= rat, rat <= b),
                _ => (false, false),
            };
            ratio_checks.push(RatioCheck { stage: s, i_count: i_s, alpha, beta, ratio, ok_lower, ok_upper });
        }

        Ok(FrequencyReport { window_len: k, series, ratio_checks })
    }
}

#[derive(Debug, Clone)]
pub struct MixtureReport {
    pub stage: usize,
    pub start: u128,
    pub len: u64,
    /// Positions of the window inside stage-`n` copy regions.
    pub copy_positions: u128,
    /// `copy_positions / len`, exactly, as (numerator, denominator).
    pub lambda: (u128, u64),
}

impl MixtureReport {
    pub fn lambda_f64(&self) -> f64 {
        self.lambda.0 as f64 / self.lambda.1 as f64
    }
}

impl Construction {
    /// The copy/decay mixture of a window: the exact fraction of positions
    /// in `[start, start+len)` that lie inside a stage-`n` copy region (the
    /// `x_n^{M_n}` head of an `x_{n+1}` block). Supported inside the copy
    /// head of stage `n+2`, where the stream is a sequence of `x_{n+1}`
    /// blocks.
    pub fn mixture_statistic(
        &self,
        stage: usize,
        start: u128,
        len: u64,
    ) -> Result<MixtureReport, NoninvError> {
        if len == 0 || start == 0 {
            return Err(NoninvError::WindowRange { start, len, stage });
        }
        let rec = self.record(stage)?;
        let rec_next = self.record(stage + 1)?;
        let head = rec.head_len.ok_or(NoninvError::RecordUnavailable { stage })?;
        let l_next = rec_next.len;
        let supported = rec_next.head_len.unwrap_or(u128::MAX);
        let end = start + len as u128 - 1;
        if end > supported {
            return Err(NoninvError::WindowRange { start, len, stage });
        }
        // positions p with ((p-1) mod L_{n+1}) < head, counted by the
        // closed form f(t) = floor(t/L) * head + min(t mod L, head)
        let f = |t: u128| -> u128 { (t / l_next) * head + (t % l_next).min(head) };
        let copy_positions = f(end) - f(start - 1);
        Ok(MixtureReport { stage, start, len, copy_positions, lambda: (copy_positions, len) })
    }

    /// The mixture of an explicit stream prefix, certified by its
    /// decomposition: the prefix is verified symbol by symbol, split into
    /// stage-`n` segments with their decay checks, and the reported λ
    /// counts exactly the positions inside copy regions (a truncated final
    /// block contributes the copy positions it actually covers).
    pub fn mixture_of_prefix(
        &self,
        prefix: &[Dyadic],
        stage: usize,
    ) -> Result<(MixtureReport, Decomposition), NoninvError> {
        let decomposition = self.decompose_prefix(prefix, stage)?;
        let report = self.mixture_statistic(stage, 1, prefix.len() as u64)?;
        Ok((report, decomposition))
    }
}
