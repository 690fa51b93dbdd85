//! The acceptance gate: ten end-to-end checks, one reported line each.
//!
//! Every criterion runs under `catch_unwind` so a failure in one cannot
//! silence the report for the others; the gate panics at the end if any
//! line came out FAIL. Tolerances are pinned as constants next to the
//! criteria that use them — a check that claims exactness compares with
//! tolerance zero.

use std::collections::BTreeSet;
use std::fmt::Display;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shiftlab_core::dyadic::Dyadic;
use shiftlab_core::entropy::{
    complexity, entropy_estimate, preimage_tree, separated_count, sft_entropy_exact, EntropyError,
    SelectorPair,
};
use shiftlab_core::markers::{
    search_marker_family, verify_marker_family, MarkerDecision, MarkerParams, MarkerSearch,
    MarkerViolation,
};
use shiftlab_core::noninv::{tau, Construction, ConstructionSchedule, CylinderSet};
use shiftlab_core::partitions::{
    rohlin_distance, truncate, Partition, WeightedSample,
};
use shiftlab_core::prediction::{extensions, is_periodic_union, past_branching};
use shiftlab_core::speclang::parse_spec;
use shiftlab_core::subshifts::{
    build_oracle, FullShift, LanguageOracle, ProductOracle, SturmianOracle, SymbolTable,
    TransferGraph, DEFAULT_WORD_BUDGET,
};
use shiftlab_core::words::{shift, weighted_norm};

// -- pinned tolerances -------------------------------------------------------

/// Golden-mean entropy must match ln((1+sqrt 5)/2) this closely.
const GOLDEN_ENTROPY_TOL: f64 = 1e-9;
/// Full-shift entropy and the cycle entropy are exact: zero tolerance.
const EXACT_TOL: f64 = 0.0;
/// Preimage-tree slope against ln 2 (the count itself is compared exactly).
const TREE_SLOPE_TOL: f64 = 1e-12;
/// Ceiling for the separated-count slope of the prepend-map stream.
const SEPARATED_SLOPE_CEILING: f64 = 0.15;
/// Rohlin triangle inequality slack for 64-point float entropies.
const TRIANGLE_SLACK: f64 = 1e-12;
/// Product-system entropy estimate must land this close to ln 2.
const PRODUCT_ENTROPY_TOL: f64 = 0.05;

const BUDGET_1S: Duration = Duration::from_secs(1);
const BUDGET_10S: Duration = Duration::from_secs(10);
const BUDGET_60S: Duration = Duration::from_secs(60);
const BUDGET_300S: Duration = Duration::from_secs(300);

// -- helpers -----------------------------------------------------------------

type Outcome = Result<String, String>;

fn es<E: Display>(e: E) -> String {
    e.to_string()
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn oracle(spec: &str) -> Result<Box<dyn LanguageOracle>, String> {
    let spec = parse_spec(spec).map_err(es)?;
    build_oracle(&spec, Path::new("."), DEFAULT_WORD_BUDGET).map_err(es)
}

fn decode(x: &dyn LanguageOracle, w: &[u16]) -> String {
    x.table().decode(w).expect("ids decode").to_string().replace(' ', "")
}

fn within_budget(elapsed: Duration, budget: Duration) -> Result<(), String> {
    if elapsed <= budget {
        Ok(())
    } else {
        Err(format!("took {elapsed:.2?}, budget {budget:?}"))
    }
}

// -- criterion 1: exact graph entropy ----------------------------------------

fn criterion_1() -> Outcome {
    let start = Instant::now();

    let golden = oracle("sft { alphabet = \"01\"; forbid = [\"11\"]; }")?;
    let g = TransferGraph::from_oracle(&*golden, 1).map_err(es)?;
    let phi = ((1.0 + 5f64.sqrt()) / 2.0).ln();
    let e = sft_entropy_exact(&g).map_err(es)?;
    let d_golden = (e.entropy - phi).abs();
    ensure!(d_golden <= GOLDEN_ENTROPY_TOL, "golden-mean entropy off by {d_golden:.3e}");

    let full = oracle("full { alphabet = \"01\"; }")?;
    let g = TransferGraph::from_oracle(&*full, 1).map_err(es)?;
    let e = sft_entropy_exact(&g).map_err(es)?;
    let d_full = (e.entropy - std::f64::consts::LN_2).abs();
    ensure!(d_full <= EXACT_TOL, "full-shift entropy off by {d_full:.3e}, want exact ln 2");

    let cycle = oracle("periodic { words = [\"00010\"]; }")?;
    let g = TransferGraph::from_oracle(&*cycle, 5).map_err(es)?;
    let e = sft_entropy_exact(&g).map_err(es)?;
    ensure!(e.entropy.abs() <= EXACT_TOL, "5-cycle entropy {} != 0", e.entropy);

    let elapsed = start.elapsed();
    within_budget(elapsed, BUDGET_1S)?;
    Ok(format!(
        "golden-mean |Δ| = {d_golden:.1e} (tol {GOLDEN_ENTROPY_TOL:.0e}), \
         full shift = ln 2 exactly, 5-cycle = 0 exactly, in {elapsed:.2?}"
    ))
}

// -- criterion 2: complexity counted exactly ---------------------------------

fn criterion_2() -> Outcome {
    let start = Instant::now();

    let golden = oracle("sft { alphabet = \"01\"; forbid = [\"11\"]; }")?;
    let table = complexity(&*golden, 5).map_err(es)?;
    let counts: Vec<u128> = table.rows.iter().map(|r| r.count).collect();
    ensure!(counts == [2, 3, 5, 8, 13], "golden-mean counts {counts:?} != [2, 3, 5, 8, 13]");

    let sturmian = oracle("sturmian { alpha = golden; }")?;
    let table = complexity(&*sturmian, 30).map_err(es)?;
    for row in &table.rows {
        ensure!(
            row.count == row.n as u128 + 1,
            "slope-coded system: p({}) = {} != {}",
            row.n,
            row.count,
            row.n + 1
        );
    }
    ensure!(table.rows.len() == 30, "expected 30 rows, got {}", table.rows.len());

    let elapsed = start.elapsed();
    within_budget(elapsed, BUDGET_10S)?;
    Ok(format!(
        "golden-mean p(1..5) = 2,3,5,8,13 exactly; 377/610 slope system p(n) = n+1 \
         exactly for n ≤ 30, in {elapsed:.2?}"
    ))
}

// -- criterion 3: periodic-union decision ------------------------------------

fn criterion_3() -> Outcome {
    let unions = [
        ("periodic { words = [\"01\"]; }", "01-orbit"),
        ("periodic { words = [\"0\", \"1\"]; }", "two fixed points"),
        ("periodic { words = [\"001\"]; }", "001-orbit"),
        ("periodic { words = [\"01\", \"23\"]; }", "two disjoint orbits"),
    ];
    let mut settled_at = Vec::new();
    for (spec, name) in unions {
        let x = oracle(spec)?;
        let mut first_true = None;
        for m in 1..=3usize {
            let g = TransferGraph::from_oracle(&*x, m).map_err(es)?;
            let report = is_periodic_union(&g);
            if report.periodic {
                if first_true.is_none() {
                    first_true = Some(m);
                }
            } else {
                ensure!(
                    first_true.is_none(),
                    "{name}: decision flipped back to NOT periodic at order {m}"
                );
            }
        }
        let m = first_true.ok_or_else(|| format!("{name}: never recognized by order 3"))?;
        settled_at.push(format!("{name} at order {m}"));
    }

    for (spec, name) in [
        ("sft { alphabet = \"01\"; forbid = [\"11\"]; }", "golden-mean"),
        ("full { alphabet = \"01\"; }", "full shift"),
    ] {
        let x = oracle(spec)?;
        for m in 1..=3usize {
            let g = TransferGraph::from_oracle(&*x, m).map_err(es)?;
            let report = is_periodic_union(&g);
            ensure!(!report.periodic, "{name}: wrongly called periodic at order {m}");
            let w = report
                .witness
                .ok_or_else(|| format!("{name}: no branch witness at order {m}"))?;
            ensure!(w.first != w.second, "{name}: witness extensions coincide");
            let exts = extensions(&*x, &w.past, 1).map_err(es)?;
            ensure!(
                exts.contains(&vec![w.first]) && exts.contains(&vec![w.second]),
                "{name}: witness past {:?} does not extend by both {} and {}",
                w.past,
                w.first,
                w.second
            );
        }
    }

    Ok(format!(
        "unions recognized ({}); golden-mean and full shift rejected at every \
         order ≤ 3, each with a verified two-extension witness",
        settled_at.join(", ")
    ))
}

// -- criterion 4: branching bound on the slope-coded system ------------------

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let x = oracle("sturmian { alpha = 233/610; }")?;

    let mut settle = Vec::new();
    for k in 1..=8usize {
        let mut first = None;
        for m in 1..=64usize {
            let profile = past_branching(&*x, m, k).map_err(es)?;
            if profile.max_extensions <= 2 {
                if first.is_none() {
                    first = Some(m);
                }
            } else {
                ensure!(
                    first.is_none(),
                    "k = {k}: branching rose above 2 again at m = {m}"
                );
            }
        }
        let m = first.ok_or_else(|| format!("k = {k}: branching never settles to ≤ 2 by m = 64"))?;
        settle.push(format!("k={k}:m={m}"));
    }

    let profile = past_branching(&*x, 3, 4).map_err(es)?;
    ensure!(
        profile.max_extensions == 3,
        "past_branching(3, 4) max = {} != 3",
        profile.max_extensions
    );
    let witness = decode(&*x, &profile.argmax_past);
    ensure!(witness == "010", "past_branching(3, 4) witness {witness:?} != \"010\"");

    let elapsed = start.elapsed();
    within_budget(elapsed, BUDGET_60S)?;
    Ok(format!(
        "max branching ≤ 2 settles and persists to m = 64 ({}); \
         past_branching(3,4) = 3 with witness \"010\", in {elapsed:.2?}",
        settle.join(", ")
    ))
}

// -- criterion 5: separated preimage trees -----------------------------------

fn criterion_5() -> Outcome {
    let base = vec![Dyadic::one()];
    let pair = SelectorPair::prepend(Dyadic::zero(), Dyadic::one());

    for n in [4usize, 8, 12] {
        let fam = preimage_tree(&base, &pair, n, 1 << 20).map_err(es)?;
        ensure!(
            fam.points.len() == 1 << n && fam.distinct,
            "depth {n}: {} points, distinct = {}, want exactly 2^{n} distinct",
            fam.points.len(),
            fam.distinct
        );
        ensure!(
            fam.min_gap == Dyadic::one(),
            "depth {n}: realized min gap {} != 1",
            fam.min_gap
        );
        let d = (fam.slope() - std::f64::consts::LN_2).abs();
        ensure!(d <= TREE_SLOPE_TOL, "depth {n}: slope off ln 2 by {d:.3e}");
        if n == 8 {
            ensure!(
                fam.pairwise_separated(&Dyadic::one()).map_err(es)?,
                "depth 8 family is not pairwise 1-separated"
            );
        }
    }

    // branch 1 forgets the last symbol: the shift no longer recovers its input
    let bad = SelectorPair::new(
        |x| {
            let mut out = vec![Dyadic::zero()];
            out.extend_from_slice(x);
            out
        },
        |x| {
            let mut out = vec![Dyadic::one()];
            out.extend_from_slice(&x[..x.len() - 1]);
            out
        },
        Dyadic::one(),
    );
    let recovery_witness = match preimage_tree(&base, &bad, 3, 1 << 10) {
        Err(EntropyError::SelectorRecovery { address, which }) if which == 1 => address,
        other => return Err(format!("contract violation undetected: {other:?}")),
    };
    ensure!(
        recovery_witness == "1",
        "recovery violation located at {recovery_witness:?}, expected address \"1\""
    );

    // both branches prepend the same symbol: no gap anywhere
    let collapsed = SelectorPair::prepend(Dyadic::ratio(1, 1), Dyadic::ratio(1, 1));
    let gap_witness = match preimage_tree(&base, &collapsed, 3, 1 << 10) {
        Err(EntropyError::SelectorGap { address, gap, .. }) if !gap.is_positive() => address,
        other => return Err(format!("gap violation undetected: {other:?}")),
    };

    Ok(format!(
        "2^n distinct points with min gap 1 and slope ln 2 (|Δ| ≤ {TREE_SLOPE_TOL:.0e}) \
         at n = 4, 8, 12; recovery violation pinned to address \"1\", \
         gap collapse pinned to address {gap_witness:?}"
    ))
}

// -- criterion 6: prepend-map construction invariants ------------------------

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);

    // (a) + (b): shift recovery and the (5/8)^l contraction, exactly
    let five_eighths = Dyadic::ratio(5, 3);
    for case in 0..1000 {
        let len = rng.gen_range(1..=5usize);
        let x: Vec<Dyadic> = (0..len)
            .map(|_| Dyadic::ratio(rng.gen_range(1..=32i64), rng.gen_range(0..=5u32)))
            .collect();
        let l = rng.gen_range(1..=12usize);
        let bits: Vec<bool> = (0..l).map(|_| rng.gen()).collect();
        let y = tau(&bits, &x);
        let recovered = shift(&y, l).map_err(es)?;
        ensure!(recovered == x, "case {case}: shifting by {l} does not recover the input");
        let bound = &five_eighths.pow(l as u32) * &weighted_norm(&x);
        ensure!(
            weighted_norm(&y) <= bound,
            "case {case}: ‖image‖ exceeds (5/8)^{l}·‖x‖"
        );
    }

    // (c): every short subword of the built stage obtains a witness pair
    let x0 = vec![Dyadic::ratio(1, 1), Dyadic::one()];
    let sched = ConstructionSchedule::scaled(x0.clone(), Some(8)).map_err(es)?;
    let c = Construction::new(sched).map_err(es)?;
    let x1 = c.stage_word(1).ok_or("stage 1 not materialized")?;
    let mut subwords: BTreeSet<&[Dyadic]> = BTreeSet::new();
    for len in 1..=12usize {
        for i in 0..=x1.len() - len {
            subwords.insert(&x1[i..i + len]);
        }
    }
    for a in &subwords {
        let w = c.witness_in_next_stage(a).map_err(es)?;
        ensure!(
            w.verified && w.gap >= w.bound,
            "subword of length {} at alignment {}: gap below ‖a‖/16",
            a.len(),
            w.alignment
        );
    }

    // (d): quantized window growth stays slow on a long prefix
    let eps = Dyadic::from_f64(0.1).ok_or("0.1 is dyadic as a double")?;
    let count = separated_count(&c, 60, &eps, 100_000).map_err(es)?;
    let slope = (count as f64).ln() / 60.0;
    ensure!(
        slope < SEPARATED_SLOPE_CEILING,
        "separated-count slope {slope:.4} ≥ {SEPARATED_SLOPE_CEILING}"
    );

    let elapsed = start.elapsed();
    within_budget(elapsed, BUDGET_300S)?;
    Ok(format!(
        "10^3 seeded shift-recovery and contraction cases exact; all {} distinct \
         subwords of length ≤ 12 witnessed in the next stage with gap ≥ ‖a‖/16; \
         (60, 0.1)-separated slope {slope:.4} < {SEPARATED_SLOPE_CEILING}, in {elapsed:.2?}",
        subwords.len()
    ))
}

// -- criterion 7: visit-ratio bounds -----------------------------------------

fn criterion_7() -> Outcome {
    let x0 = vec![Dyadic::ratio(1, 1), Dyadic::one()];
    let sched = ConstructionSchedule::scaled(x0, Some(2)).map_err(es)?;
    let c = Construction::new(sched).map_err(es)?;

    let frac = |n: i64, d: i64| BigRational::new(BigInt::from(n), BigInt::from(d));
    let u = CylinderSet::new(vec![(Dyadic::ratio(1, 1), Dyadic::ratio(3, 2))]).map_err(es)?;
    let report = c.cylinder_frequency(&u, &[5940]).map_err(es)?;
    ensure!(report.ratio_checks.len() == 2, "expected 2 stage checks");

    let rc0 = &report.ratio_checks[0];
    ensure!(
        rc0.i_count == 1
            && rc0.alpha == frac(1, 30)
            && rc0.beta == Some(frac(31, 15))
            && rc0.ratio == Some(frac(1, 3))
            && rc0.ok(),
        "stage 0 ratio check failed: {rc0:?}"
    );
    let rc1 = &report.ratio_checks[1];
    ensure!(
        rc1.i_count == 5
            && rc1.alpha == frac(160, 297)
            && rc1.beta == Some(frac(2869, 990))
            && rc1.ratio.is_some()
            && rc1.ok(),
        "stage 1 ratio check failed: {rc1:?}"
    );

    // a cylinder the stream never enters: both stage checks must be skipped
    let empty = CylinderSet::new(vec![(Dyadic::ratio(7, 3), Dyadic::one())]).map_err(es)?;
    let skipped = c.cylinder_frequency(&empty, &[5940]).map_err(es)?;
    for rc in &skipped.ratio_checks {
        ensure!(
            rc.i_count == 0 && rc.ratio.is_none() && rc.beta.is_none(),
            "stage {} should have been skipped: {rc:?}",
            rc.stage
        );
    }

    Ok(format!(
        "stage 0: 1/30 ≤ 1/3 ≤ 31/15 exact; stage 1: 160/297 ≤ {} ≤ 2869/990 exact; \
         unvisited cylinder reported as skipped at both stages",
        rc1.ratio.as_ref().unwrap()
    ))
}

// -- criterion 8: partition metric -------------------------------------------

fn same_atoms_mod_null(masses: &[f64], p: &Partition, q: &Partition) -> bool {
    let pos: Vec<usize> = (0..masses.len()).filter(|&i| masses[i] > 0.0).collect();
    pos.iter().all(|&i| {
        pos.iter().all(|&j| (p.atom(i) == p.atom(j)) == (q.atom(i) == q.atom(j)))
    })
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);

    let mut masses: Vec<f64> = (0..64).map(|_| rng.gen_range(0.01..1.0)).collect();
    for m in masses.iter_mut().skip(58) {
        *m = 0.0;
    }
    let total: f64 = masses.iter().sum();
    for m in masses.iter_mut() {
        *m /= total;
    }
    let correction = 1.0 - masses.iter().sum::<f64>();
    masses[0] += correction;
    let sample = WeightedSample::from_masses(masses.clone()).map_err(es)?;
    let random_partition = |rng: &mut ChaCha8Rng| {
        Partition::new((0..64).map(|_| rng.gen_range(0..5u32)).collect())
    };

    let mut zero_distance_pairs = 0u32;
    for case in 0..10_000 {
        let p = random_partition(&mut rng);
        let q = random_partition(&mut rng);
        let r = random_partition(&mut rng);
        let d_pq = rohlin_distance(&sample, &p, &q).map_err(es)?;
        let d_qp = rohlin_distance(&sample, &q, &p).map_err(es)?;
        ensure!(d_pq.to_bits() == d_qp.to_bits(), "case {case}: symmetry broken");
        let d_qr = rohlin_distance(&sample, &q, &r).map_err(es)?;
        let d_pr = rohlin_distance(&sample, &p, &r).map_err(es)?;
        ensure!(
            d_pr <= d_pq + d_qr + TRIANGLE_SLACK,
            "case {case}: triangle broken by {:.3e}",
            d_pr - d_pq - d_qr
        );
        if d_pq == 0.0 {
            zero_distance_pairs += 1;
            ensure!(
                same_atoms_mod_null(&masses, &p, &q),
                "case {case}: distance 0 but atoms differ on a positive-mass point"
            );
        }
    }

    // relabeled atoms, scrambled only where the mass is zero: distance 0 exactly
    for case in 0..1000 {
        let p = random_partition(&mut rng);
        let q = Partition::new(
            (0..64)
                .map(|i| {
                    if masses[i] > 0.0 {
                        p.atom(i) + 10
                    } else {
                        rng.gen_range(0..5u32)
                    }
                })
                .collect(),
        );
        let d = rohlin_distance(&sample, &p, &q).map_err(es)?;
        ensure!(d == 0.0, "case {case}: relabeling moved the distance to {d:.3e}");
        ensure!(same_atoms_mod_null(&masses, &p, &q), "case {case}: relabel check bug");
    }
    // and a genuine refinement has strictly positive distance
    let halves = Partition::new((0..64).map(|i| (i >= 32) as u32).collect());
    let quarters = Partition::new((0..64).map(|i| (i / 16) as u32).collect());
    let d = rohlin_distance(&sample, &halves, &quarters).map_err(es)?;
    ensure!(d > 0.0, "refinement collapsed to distance 0");

    // the dyadic tail: truncations converge, strictly monotonically
    let mut tail: Vec<f64> = (0..39).map(|i| 0.5f64.powi(i + 1)).collect();
    tail.push(0.5f64.powi(39));
    let tail_sample = WeightedSample::from_masses(tail).map_err(es)?;
    let fine = Partition::discrete(40);
    let mut last = f64::INFINITY;
    let mut below_at = None;
    for n in 1..=38u32 {
        let d = rohlin_distance(&tail_sample, &truncate(&fine, n), &fine).map_err(es)?;
        ensure!(d < last, "d(P^({n}), P) = {d:.3e} did not decrease");
        if d < 1e-3 && below_at.is_none() {
            below_at = Some(n);
        }
        last = d;
    }
    let below_at = below_at.ok_or("truncation distance never fell below 1e-3")?;

    Ok(format!(
        "symmetry bit-exact and triangle within {TRIANGLE_SLACK:.0e} on 10^4 random \
         triples ({zero_distance_pairs} zero-distance pairs, all identical mod null); \
         relabeling ⇒ distance 0 exactly on 10^3 cases; truncations decrease strictly, \
         below 1e-3 from n = {below_at}"
    ))
}

// -- criterion 9: marker family checks ---------------------------------------

fn naive_verify(family: &[Vec<u64>], params: &MarkerParams) -> MarkerDecision {
    use MarkerViolation::*;
    let (t, g, sb) = (params.t(), params.g(), params.shift_bound());

    for (set_index, set) in family.iter().enumerate() {
        for &value in set {
            if value >= t {
                return MarkerDecision::Invalid(OutOfWindow { set_index, value });
            }
        }
    }
    let required = params.min_family_size();
    if (family.len() as u64) < required {
        return MarkerDecision::Invalid(FamilySize { size: family.len() as u64, required });
    }
    let sets: Vec<Vec<u64>> = family
        .iter()
        .map(|s| {
            let mut v = s.clone();
            v.sort_unstable();
            v.dedup();
            v
        })
        .collect();
    for (set_index, s) in sets.iter().enumerate() {
        for w in s.windows(2) {
            if w[1] - w[0] < g {
                return MarkerDecision::Invalid(Spacing { set_index, u: w[0], v: w[1] });
            }
        }
    }
    for k in 0..=sb {
        for (a_index, a) in sets.iter().enumerate() {
            for (b_index, b) in sets.iter().enumerate() {
                let meets = a.iter().any(|&u| b.iter().any(|&v| v + k == u));
                if !meets {
                    return MarkerDecision::Invalid(JointShift { a_index, b_index, k });
                }
            }
        }
    }
    MarkerDecision::Valid
}

fn naive_lone_set_ok(set: &[u64], params: &MarkerParams) -> bool {
    let family = vec![set.to_vec()];
    // family-size bookkeeping aside, a lone set is good if it spaces out and
    // meets its own shifts; neutralize the size check by asking directly
    for w in set.windows(2) {
        if w[1] - w[0] < params.g() {
            return false;
        }
    }
    (0..=params.shift_bound()).all(|k| {
        family[0].iter().any(|&u| family[0].iter().any(|&v| v + k == u))
    })
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);

    for case in 0..1000 {
        let t = rng.gen_range(1..=16u64);
        let g = rng.gen_range(1..=4u64);
        let sb = rng.gen_range(0..t);
        let delta = [0.0, 0.05, 0.1, 0.15][rng.gen_range(0..4usize)];
        let params = MarkerParams::new(t, g, sb, delta).map_err(es)?;
        let family: Vec<Vec<u64>> = (0..rng.gen_range(0..=4usize))
            .map(|_| (0..rng.gen_range(0..=5usize)).map(|_| rng.gen_range(0..t + 2)).collect())
            .collect();
        let fast = verify_marker_family(&family, &params);
        let slow = naive_verify(&family, &params);
        ensure!(
            fast == slow,
            "case {case}: verdicts disagree — fast {fast:?}, naive {slow:?} \
             (t={t}, g={g}, shift bound {sb}, δ={delta}, family {family:?})"
        );
    }

    // exhaustive ground truth at T = 12: no single set survives, so NOT FOUND
    let params = MarkerParams::with_default_shift(12, 2, 1.0 / 12.0).map_err(es)?;
    let mut ground_truth = 0u64;
    for mask in 1u64..(1 << 12) {
        let set: Vec<u64> = (0..12).filter(|b| mask >> b & 1 == 1).collect();
        if naive_lone_set_ok(&set, &params) {
            ground_truth += 1;
        }
    }
    let (examined, valid_sets) = match search_marker_family(&params, 1 << 20).map_err(es)? {
        MarkerSearch::NotFound { examined, valid_sets } => (examined, valid_sets),
        MarkerSearch::Found { family, .. } => {
            return Err(format!("search claims a family exists at T = 12, gap 2: {family:?}"))
        }
    };
    ensure!(
        examined == 4095 && valid_sets == ground_truth && ground_truth == 0,
        "exhaustion mismatch: examined {examined}, search valid {valid_sets}, \
         naive valid {ground_truth}"
    );

    // and where a family does exist, both checkers accept what search returns
    let easy = MarkerParams::new(10, 1, 9, 0.0).map_err(es)?;
    let family = match search_marker_family(&easy, 1 << 20).map_err(es)? {
        MarkerSearch::Found { family, .. } => family,
        MarkerSearch::NotFound { .. } => return Err("search missed the full-window family".into()),
    };
    ensure!(
        verify_marker_family(&family, &easy).is_valid()
            && naive_verify(&family, &easy).is_valid(),
        "found family fails re-verification"
    );

    Ok(format!(
        "10^3 random families: bitmask verifier and naive triple loop return identical \
         verdicts (first violation included); T = 12 exhaustion matches ground truth \
         ({ground_truth} valid sets in 4095); found family at T = 10 re-verifies"
    ))
}

// -- criterion 10: product-system entropy estimate ---------------------------

fn criterion_10() -> Outcome {
    let left = SturmianOracle::new(377, 610, DEFAULT_WORD_BUDGET).map_err(es)?;
    let right =
        FullShift::new(SymbolTable::from_labels(["0", "1"]), DEFAULT_WORD_BUDGET).map_err(es)?;
    let product =
        ProductOracle::new(Box::new(left), Box::new(right), DEFAULT_WORD_BUDGET).map_err(es)?;

    let table = complexity(&product, 16).map_err(es)?;
    let estimate = entropy_estimate(&table).map_err(es)?;
    let ln2 = std::f64::consts::LN_2;
    let fit_gap = (estimate.fit_slope - ln2).abs();
    let final_gap = (estimate.final_slope - ln2).abs();
    ensure!(
        fit_gap <= PRODUCT_ENTROPY_TOL,
        "fitted slope {:.4} misses ln 2 = {ln2:.4} by {fit_gap:.4} (tol {PRODUCT_ENTROPY_TOL}); \
         final slope {:.4} misses by {final_gap:.4}; the product counts (n+1)·2^n keep \
         log p(n)/n ≈ ln 2 + ln(n+1)/n above the tolerance until far deeper tables \
         (the fitted slope first lands inside at n_max = 28)",
        estimate.fit_slope,
        estimate.final_slope
    );
    ensure!(
        final_gap <= PRODUCT_ENTROPY_TOL,
        "final slope {:.4} misses ln 2 by {final_gap:.4}",
        estimate.final_slope
    );
    Ok(format!(
        "fitted slope {:.4} within {PRODUCT_ENTROPY_TOL} of ln 2 at n_max = 16",
        estimate.fit_slope
    ))
}

// -- the gate -----------------------------------------------------------------

#[test]
fn acceptance_gate() {
    let criteria: [(usize, &str, fn() -> Outcome); 10] = [
        (1, "exact graph entropy", criterion_1),
        (2, "complexity counted exactly", criterion_2),
        (3, "periodic-union decision", criterion_3),
        (4, "branching bound on the slope-coded system", criterion_4),
        (5, "separated preimage trees", criterion_5),
        (6, "prepend-map construction invariants", criterion_6),
        (7, "visit-ratio bounds", criterion_7),
        (8, "partition metric", criterion_8),
        (9, "marker family checks", criterion_9),
        (10, "product-system entropy estimate", criterion_10),
    ];

    let mut failed = Vec::new();
    for (number, name, run) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|panic| {
            let text = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(text)
        });
        match outcome {
            Ok(detail) => println!("[criterion {number}] PASS — {name}: {detail}"),
            Err(detail) => {
                println!("[criterion {number}] FAIL — {name}: {detail}");
                failed.push(number);
            }
        }
    }
    assert!(failed.is_empty(), "acceptance criteria failed: {failed:?}");
}
