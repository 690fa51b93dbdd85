//! Growth-rate analysis: word-complexity tables and slope estimates, exact
//! spectral entropy of transfer graphs, separated counting over real-valued
//! streams, and binary preimage trees with verified separation.
//!
//! Everything is reported in natural log; callers wanting bits divide by
//! `ln 2` at the presentation layer.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::dyadic::Dyadic;
use crate::subshifts::{LanguageOracle, OracleError, TransferGraph};
use crate::words::{shift, sup_distance, quantize, RealWord, SymbolStream, WordError};

/// Rayleigh-quotient convergence threshold for the power iteration.
pub const SPECTRAL_TOL: f64 = 1e-12;
/// Iteration cap guarding non-primitive pathologies.
pub const SPECTRAL_ITERATION_CAP: u64 = 100_000;

#[derive(Debug, Error)]
pub enum EntropyError {
    #[error("complexity table has {rows} rows; an estimate needs at least 4")]
    TooFewRows { rows: usize },
    #[error("power iteration still moving after {iterations} iterations")]
    NotConverged { iterations: u64 },
    #[error("selector {which} broke shift recovery at node {address:?}")]
    SelectorRecovery { address: String, which: u8 },
    #[error("selector pair gap {gap} at node {address:?} is below the declared separation {delta}")]
    SelectorGap { address: String, gap: Dyadic, delta: Dyadic },
    #[error("tree of {needed} points exceeds the budget of {budget}")]
    TreeBudget { needed: u128, budget: u64 },
    #[error("{0}")]
    BadQuery(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Word(#[from] WordError),
}

// ---------------------------------------------------------------------------
// complexity tables and slope estimates

#[derive(Debug, Clone)]
pub struct ComplexityRow {
    pub n: usize,
    pub count: u128,
    /// `ln(count) / n`.
    pub slope: f64,
}

#[derive(Debug, Clone)]
pub struct ComplexityTable {
    pub rows: Vec<ComplexityRow>,
    /// Short description of the counted system.
    pub source: String,
    /// True when the counts come from a sampled orbit rather than a proof.
    pub sample_based: bool,
    /// True when the word budget cut the table short of the requested depth.
    pub truncated: bool,
}

fn ln_u128(c: u128) -> f64 {
    (c as f64).ln()
}

/// Tabulates `|L_n|` for `n = 1..=n_max`. Running out of word budget midway
/// returns the rows obtained so far with the `truncated` flag set; only a
/// table with no rows at all is an error.
pub fn complexity(x: &dyn LanguageOracle, n_max: usize) -> Result<ComplexityTable, EntropyError> {
    let mut rows = Vec::new();
    let mut truncated = false;
    for n in 1..=n_max {
        match x.count(n) {
            Ok(count) => {
                rows.push(ComplexityRow { n, count, slope: ln_u128(count) / n as f64 })
            }
            Err(OracleError::BudgetExceeded { .. }) if !rows.is_empty() => {
                truncated = true;
                break;
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(ComplexityTable {
        rows,
        source: format!("{}-symbol system", x.table().len()),
        sample_based: x.sample_based(),
        truncated,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct EntropyEstimate {
    /// `ln p(n_max) / n_max`, the last slope in the table.
    pub final_slope: f64,
    /// Least-squares slope of `ln p(n)` against `n` over the last half of
    /// the table, which discounts the short-word transient.
    pub fit_slope: f64,
    /// Rows entering the fit.
    pub fit_rows: usize,
    pub sample_based: bool,
}

/// Both slope readings of a complexity table. Requires at least 4 rows so
/// the fit window holds two or more points.
pub fn entropy_estimate(table: &ComplexityTable) -> Result<EntropyEstimate, EntropyError> {
    let rows = &table.rows;
    if rows.len() < 4 {
        return Err(EntropyError::TooFewRows { rows: rows.len() });
    }
    let last = rows.last().expect("nonempty");
    let final_slope = ln_u128(last.count) / last.n as f64;

    let tail = &rows[rows.len() / 2..];
    let k = tail.len() as f64;
    let mean_x = tail.iter().map(|r| r.n as f64).sum::<f64>() / k;
    let mean_y = tail.iter().map(|r| ln_u128(r.count)).sum::<f64>() / k;
    let mut num = 0.0;
    let mut den = 0.0;
    for r in tail {
        let dx = r.n as f64 - mean_x;
        num += dx * (ln_u128(r.count) - mean_y);
        den += dx * dx;
    }
    let fit_slope = num / den;
    Ok(EntropyEstimate { final_slope, fit_slope, fit_rows: tail.len(), sample_based: table.sample_based })
}

// ---------------------------------------------------------------------------
// exact spectral entropy of transfer graphs

#[derive(Debug, Clone, Copy)]
pub struct ExactEntropy {
    /// `ln(spectral_radius)`.
    pub entropy: f64,
    /// Largest per-component Perron root of the adjacency matrix.
    pub spectral_radius: f64,
    /// Power-iteration steps spent on the dominating component.
    pub iterations: u64,
    /// Independent reading `ln(N_{t+1}/N_t)` from path-count growth at the
    /// deepest overflow-safe `t`.
    pub crosscheck: Option<f64>,
}

/// Perron root of one strongly connected block, via power iteration on
/// `A + I` (primitive whenever the block is nontrivial, so the iteration
/// converges geometrically; the shift is subtracted back out).
fn block_perron(g: &TransferGraph, scc: &[u32]) -> Result<(f64, u64), EntropyError> {
    let local: std::collections::BTreeMap<u32, usize> =
        scc.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); scc.len()];
    for (i, &v) in scc.iter().enumerate() {
        for &t in g.targets(v) {
            if let Some(&j) = local.get(&t) {
                adj[i].push(j);
            }
        }
    }
    let mut v = vec![1.0f64; scc.len()];
    let mut rayleigh = f64::NAN;
    for it in 1..=SPECTRAL_ITERATION_CAP {
        let mut w = v.clone(); // the +I term
        for (i, out) in adj.iter().enumerate() {
            for &j in out {
                w[i] += v[j];
            }
        }
        let dot_vw: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let dot_vv: f64 = v.iter().map(|a| a * a).sum();
        let r = dot_vw / dot_vv;
        let sup = w.iter().cloned().fold(0.0f64, f64::max);
        v = w.into_iter().map(|x| x / sup).collect();
        if (r - rayleigh).abs() <= SPECTRAL_TOL {
            return Ok((r - 1.0, it));
        }
        rayleigh = r;
    }
    Err(EntropyError::NotConverged { iterations: SPECTRAL_ITERATION_CAP })
}

/// Exact growth rate of the graph's path counts: `ln` of the spectral
/// radius of the adjacency matrix, computed per strongly connected
/// component and cross-checked against path-count ratios.
pub fn sft_entropy_exact(g: &TransferGraph) -> Result<ExactEntropy, EntropyError> {
    if g.vertex_count() == 0 {
        return Err(OracleError::EmptySystem.into());
    }
    let mut spectral_radius = 0.0f64;
    let mut iterations = 0;
    for scc in g.sccs() {
        let (rho, its) = block_perron(g, &scc)?;
        if rho > spectral_radius {
            spectral_radius = rho;
            iterations = its;
        }
    }
    if spectral_radius <= 0.0 {
        // cannot happen on a trimmed graph (every vertex lies on a cycle)
        return Err(OracleError::EmptySystem.into());
    }

    let mut crosscheck = None;
    let mut prev: Option<u128> = None;
    for t in 1..=60usize {
        match g.path_count(t) {
            Ok(n_t) => {
                if let Some(p) = prev {
                    crosscheck = Some((n_t as f64 / p as f64).ln());
                }
                prev = Some(n_t);
            }
            Err(_) => break, // overflow: keep the deepest safe ratio
        }
    }
    Ok(ExactEntropy { entropy: spectral_radius.ln(), spectral_radius, iterations, crosscheck })
}

// ---------------------------------------------------------------------------
// separated counting over real-valued streams

/// Number of distinct `(ε/2)`-quantized length-`n` windows among the first
/// `horizon + 1` window positions of the stream. Any ε-separated family of
/// length-`n` windows of the sample maps injectively into these classes
/// (two words within ε/2 per coordinate quantize together), so this count
/// dominates ε-separated counts from the same sample.
pub fn separated_count(
    x: &dyn SymbolStream,
    n: usize,
    eps: &Dyadic,
    horizon: u64,
) -> Result<u64, EntropyError> {
    if n == 0 {
        return Err(EntropyError::BadQuery("window length must be positive".into()));
    }
    let prefix = x.prefix(horizon + n as u64)?;
    let half = eps.div_pow2(1);
    let mut classes: BTreeSet<RealWord> = BTreeSet::new();
    for start in 0..=horizon as usize {
        classes.insert(quantize(&prefix[start..start + n], &half)?);
    }
    Ok(classes.len() as u64)
}

// ---------------------------------------------------------------------------
// preimage trees

/// A pair of branch maps for the preimage tree. Each must be a one-step
/// section of the shift — `shift(f_b(x), 1) = x` — and the two branches
/// must sit at least `delta` apart (checked at every node expansion, so a
/// bad selector is rejected with the node that exposed it).
pub struct SelectorPair {
    branches: [Box<dyn Fn(&[Dyadic]) -> RealWord>; 2],
    delta: Dyadic,
}

impl SelectorPair {
    pub fn new(
        f0: impl Fn(&[Dyadic]) -> RealWord + 'static,
        f1: impl Fn(&[Dyadic]) -> RealWord + 'static,
        delta: Dyadic,
    ) -> Self {
        SelectorPair { branches: [Box::new(f0), Box::new(f1)], delta }
    }

    /// Constant-symbol sections: branch `b` prepends `v_b`. Declared
    /// separation is `|v_1 - v_0|`.
    pub fn prepend(v0: Dyadic, v1: Dyadic) -> Self {
        let delta = (&v1 - &v0).abs();
        SelectorPair::new(
            move |x| {
                let mut out = Vec::with_capacity(x.len() + 1);
                out.push(v0.clone());
                out.extend_from_slice(x);
                out
            },
            move |x| {
                let mut out = Vec::with_capacity(x.len() + 1);
                out.push(v1.clone());
                out.extend_from_slice(x);
                out
            },
            delta,
        )
    }

    /// The norm-scaled sections that prepend `‖x‖/8` (branch 0) or `‖x‖/4`
    /// (branch 1). Their gap is `‖x‖/8`, which shrinks along the tree, so
    /// no positive separation can honestly be declared: `delta` is 0 and
    /// the realized minimum gap is the interesting output.
    pub fn contracting() -> Self {
        SelectorPair::new(
            |x| crate::noninv::tau_step(false, x),
            |x| crate::noninv::tau_step(true, x),
            Dyadic::zero(),
        )
    }

    pub fn delta(&self) -> &Dyadic {
        &self.delta
    }

    pub fn apply(&self, bit: u8, x: &[Dyadic]) -> RealWord {
        (self.branches[bit as usize])(x)
    }
}

/// The `2^n` points `τ_a(base)` over all branch words `a` of length `n`,
/// with the verification trail that makes them a separated set.
#[derive(Debug, Clone)]
pub struct SeparatedFamily {
    pub depth: usize,
    /// Separation declared by the selector pair.
    pub delta: Dyadic,
    /// `(address, point)` pairs in address order. An address reads
    /// outermost branch first: point = f_{a_1}(f_{a_2}(… f_{a_n}(base)…)).
    pub points: Vec<(String, RealWord)>,
    /// Smallest branch gap realized anywhere in the tree; every pair of
    /// points is separated by at least this much at some shift below
    /// `depth`.
    pub min_gap: Dyadic,
    /// Node address where `min_gap` occurred.
    pub min_gap_at: String,
    pub distinct: bool,
}

impl SeparatedFamily {
    /// `ln(count) / depth`, the growth reading of the family.
    pub fn slope(&self) -> f64 {
        (self.points.len() as f64).ln() / self.depth as f64
    }

    /// Exhaustive pairwise check: every pair of points is `gap`-apart at
    /// some shift `i < depth`. Quadratic; meant for small trees.
    pub fn pairwise_separated(&self, gap: &Dyadic) -> Result<bool, WordError> {
        for (i, (_, p)) in self.points.iter().enumerate() {
            for (_, q) in &self.points[i + 1..] {
                let mut ok = false;
                for s in 0..self.depth {
                    if &sup_distance(&shift(p, s)?, &shift(q, s)?)? >= gap {
                        ok = true;
                        break;
                    }
                }
                if !ok {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// Expands the full binary preimage tree of depth `n` over `base`,
/// checking the selector contract at every node. Two leaves whose branch
/// words first differ (reading inward) at depth `t` become, after `t`
/// shifts, the two children of their deepest common node, so the realized
/// branch gaps certify pairwise separation of the whole family.
pub fn preimage_tree(
    base: &[Dyadic],
    pair: &SelectorPair,
    n: usize,
    budget: u64,
) -> Result<SeparatedFamily, EntropyError> {
    if n == 0 {
        return Err(EntropyError::BadQuery("tree depth must be positive".into()));
    }
    if base.is_empty() {
        return Err(EntropyError::BadQuery("base point must have at least one symbol".into()));
    }
    let needed = 1u128 << n.min(127);
    if needed > budget as u128 {
        return Err(EntropyError::TreeBudget { needed, budget });
    }

    let mut level: Vec<(String, RealWord)> = vec![(String::new(), base.to_vec())];
    let mut min_gap: Option<(Dyadic, String)> = None;
    for _ in 0..n {
        let mut next = Vec::with_capacity(level.len() * 2);
        for (addr, point) in &level {
            let mut children: [Option<RealWord>; 2] = [None, None];
            for bit in 0..2u8 {
                let child = pair.apply(bit, point);
                let recovered = child.len() == point.len() + 1 && child[1..] == point[..];
                if !recovered {
                    return Err(EntropyError::SelectorRecovery {
                        address: format!("{bit}{addr}"),
                        which: bit,
                    });
                }
                children[bit as usize] = Some(child);
            }
            let [c0, c1] = children.map(|c| c.expect("both branches built"));
            let gap = sup_distance(&c0, &c1)?;
            if gap < pair.delta || !gap.is_positive() {
                return Err(EntropyError::SelectorGap {
                    address: addr.clone(),
                    gap,
                    delta: pair.delta.clone(),
                });
            }
            if min_gap.as_ref().map_or(true, |(g, _)| gap < *g) {
                min_gap = Some((gap, addr.clone()));
            }
            next.push((format!("0{addr}"), c0));
            next.push((format!("1{addr}"), c1));
        }
        level = next;
    }
    level.sort_by(|a, b| a.0.cmp(&b.0));
    let distinct = {
        let set: BTreeSet<&RealWord> = level.iter().map(|(_, p)| p).collect();
        set.len() == level.len()
    };
    let (min_gap, min_gap_at) = min_gap.expect("depth >= 1 expands the root");
    Ok(SeparatedFamily {
        depth: n,
        delta: pair.delta.clone(),
        points: level,
        min_gap,
        min_gap_at,
        distinct,
    })
}
