//! Language oracles for the built-in shift families and transfer graphs.
//!
//! A [`LanguageOracle`] answers questions about the language of a shift
//! space: enumerate all words of a length, test membership, count. Words are
//! handled internally as sequences of interned symbol ids ([`IdWord`])
//! against a per-oracle [`SymbolTable`]; enumeration order is id order,
//! which the built-in tables arrange to coincide with alphabet order.
//!
//! Exact oracles (full shifts, periodic unions, finite type, primitive
//! substitutions, rational Sturmian codings, products of exact oracles)
//! answer from the defining structure. Sample-backed oracles answer from a
//! finite prefix of a stream and advertise it via
//! [`LanguageOracle::sample_based`]; their answers are certificates up to
//! the sampled horizon, not proofs.
//!
//! A [`TransferGraph`] is the order-`m` finite-type approximation of an
//! oracle: vertices are the `m`-blocks, edges the `(m+1)`-blocks, trimmed to
//! the essential part (every vertex on a bi-infinite path).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::dyadic::Dyadic;
use crate::speclang::{self, SpecError, SystemSpec};
use crate::words::{Symbol, Word};

/// Default cap on the number of words an enumeration may materialize.
pub const DEFAULT_WORD_BUDGET: usize = 1 << 22;

/// Default sampled-prefix length when a stream backs an oracle.
pub const DEFAULT_SAMPLE_HORIZON: u64 = 100_000;

/// A word as a sequence of interned symbol ids.
pub type IdWord = Vec<u16>;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("enumeration of {count_at_least} words exceeds the budget of {budget}")]
    BudgetExceeded { count_at_least: u128, budget: usize },
    #[error("word count for length {n} overflows the counter")]
    CountOverflow { n: usize },
    #[error("alphabet of {size} symbols exceeds the supported maximum {max}")]
    AlphabetTooLarge { size: usize, max: usize },
    #[error("the system has an empty language")]
    EmptySystem,
    #[error("substitution is not primitive")]
    NotPrimitive,
    #[error("unknown symbol token {0:?}")]
    UnknownToken(String),
    #[error("symbol id {0} is outside the alphabet")]
    UnknownSymbol(u16),
    #[error("language is inconsistent: {0}")]
    Inconsistent(String),
    #[error("{0}")]
    Unsupported(String),
}

/// Interned symbols of one oracle. Ids are dense `0..len` and the table is
/// immutable after construction, so id order is a fixed total order on the
/// alphabet (construction order for labels, numeric order for reals,
/// left-major order for pairs).
#[derive(Debug, Clone)]
pub struct SymbolTable {
    symbols: Vec<Symbol>,
}

impl SymbolTable {
    pub fn from_labels<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Self {
        SymbolTable {
            symbols: labels.into_iter().map(|s| Symbol::Label(s.into())).collect(),
        }
    }

    /// Builds a table over real symbols in ascending numeric order.
    pub fn from_reals(values: impl IntoIterator<Item = Dyadic>) -> Result<Self, OracleError> {
        let set: BTreeSet<Dyadic> = values.into_iter().collect();
        let symbols: Vec<Symbol> = set.into_iter().map(Symbol::Real).collect();
        Self::check_size(symbols.len())?;
        Ok(SymbolTable { symbols })
    }

    pub fn product(a: &SymbolTable, b: &SymbolTable) -> Result<Self, OracleError> {
        let size = a.len() * b.len();
        Self::check_size(size)?;
        let mut symbols = Vec::with_capacity(size);
        for sa in &a.symbols {
            for sb in &b.symbols {
                symbols.push(Symbol::Pair(Box::new(sa.clone()), Box::new(sb.clone())));
            }
        }
        Ok(SymbolTable { symbols })
    }

    fn check_size(size: usize) -> Result<(), OracleError> {
        const MAX: usize = u16::MAX as usize + 1;
        if size > MAX {
            return Err(OracleError::AlphabetTooLarge { size, max: MAX });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbol(&self, id: u16) -> Result<&Symbol, OracleError> {
        self.symbols.get(id as usize).ok_or(OracleError::UnknownSymbol(id))
    }

    pub fn token(&self, id: u16) -> String {
        self.symbols
            .get(id as usize)
            .map(|s| s.to_string())
            .unwrap_or_else(|| format!("?{id}"))
    }

    pub fn id_of_token(&self, tok: &str) -> Option<u16> {
        self.symbols.iter().position(|s| s.to_string() == tok).map(|i| i as u16)
    }

    pub fn decode(&self, w: &[u16]) -> Result<Word, OracleError> {
        Ok(Word(w.iter().map(|&id| self.symbol(id).cloned()).collect::<Result<_, _>>()?))
    }

    pub fn encode_tokens<S: AsRef<str>>(&self, toks: &[S]) -> Result<IdWord, OracleError> {
        toks.iter()
            .map(|t| {
                self.id_of_token(t.as_ref())
                    .ok_or_else(|| OracleError::UnknownToken(t.as_ref().to_string()))
            })
            .collect()
    }

    /// Encodes a word written as one character per symbol (`"010"`).
    pub fn encode_chars(&self, s: &str) -> Result<IdWord, OracleError> {
        let toks: Vec<String> = s.chars().map(|c| c.to_string()).collect();
        self.encode_tokens(&toks)
    }
}

/// The language of a shift space, queried by word length.
pub trait LanguageOracle {
    fn table(&self) -> &SymbolTable;

    /// One-line description for reports.
    fn describe(&self) -> String;

    /// True when answers are certified only up to a sampled horizon.
    fn sample_based(&self) -> bool {
        false
    }

    /// Enumeration budget (maximum words a single call may materialize).
    fn budget(&self) -> usize;

    /// All words of length `n`, as a set sorted in alphabet order.
    fn words(&self, n: usize) -> Result<BTreeSet<IdWord>, OracleError>;

    /// Membership of a word given by symbol ids.
    fn contains(&self, w: &[u16]) -> Result<bool, OracleError>;

    /// `|L_n|`. The default enumerates; structured oracles override with
    /// closed forms or path counting.
    fn count(&self, n: usize) -> Result<u128, OracleError> {
        Ok(self.words(n)?.len() as u128)
    }
}

fn budget_guard(count: u128, budget: usize) -> Result<(), OracleError> {
    if count > budget as u128 {
        return Err(OracleError::BudgetExceeded { count_at_least: count, budget });
    }
    Ok(())
}

fn windows_of(word: &[u16], n: usize, out: &mut BTreeSet<IdWord>) {
    if n <= word.len() {
        for i in 0..=word.len() - n {
            out.insert(word[i..i + n].to_vec());
        }
    }
}

// ---------------------------------------------------------------------------
// Full shift
// ---------------------------------------------------------------------------

/// The full shift over a finite alphabet: every word is in the language.
pub struct FullShift {
    table: SymbolTable,
    budget: usize,
}

impl FullShift {
    pub fn new(table: SymbolTable, budget: usize) -> Result<Self, OracleError> {
        if table.is_empty() {
            return Err(OracleError::EmptySystem);
        }
        Ok(FullShift { table, budget })
    }
}

impl LanguageOracle for FullShift {
    fn table(&self) -> &SymbolTable {
        &self.table
    }

    fn describe(&self) -> String {
        format!("full shift on {} symbols", self.table.len())
    }

    fn budget(&self) -> usize {
        self.budget
    }

    fn words(&self, n: usize) -> Result<BTreeSet<IdWord>, OracleError> {
        budget_guard(self.count(n)?, self.budget)?;
        let k = self.table.len() as u16;
        let mut out = BTreeSet::new();
        let mut w: IdWord = vec![0; n];
        loop {
            out.insert(w.clone());
            // odometer increment in alphabet order
            let mut pos = n;
            while pos > 0 {
                if w[pos - 1] + 1 < k {
                    w[pos - 1] += 1;
                    break;
                }
                w[pos - 1] = 0;
                pos -= 1;
            }
            if pos == 0 {
                break;
            }
        }
        Ok(out)
    }

    fn contains(&self, w: &[u16]) -> Result<bool, OracleError> {
        Ok(w.iter().all(|&s| (s as usize) < self.table.len()))
    }

    fn count(&self, n: usize) -> Result<u128, OracleError> {
        let k = self.table.len() as u128;
        let mut acc: u128 = 1;
        for _ in 0..n {
            acc = acc.checked_mul(k).ok_or(OracleError::CountOverflow { n })?;
        }
        Ok(acc)
    }
}

// ---------------------------------------------------------------------------
// Periodic unions
// ---------------------------------------------------------------------------

/// The union of the shift orbits of finitely many periodic words.
pub struct PeriodicUnion {
    table: SymbolTable,
    periods: Vec<IdWord>,
    budget: usize,
}

impl PeriodicUnion {
    pub fn new(table: SymbolTable, periods: Vec<IdWord>, budget: usize) -> Result<Self, OracleError> {
        if periods.is_empty() || periods.iter().any(|p| p.is_empty()) {
            return Err(OracleError::EmptySystem);
        }
        Ok(PeriodicUnion { table, periods, budget })
    }

    pub fn periods(&self) -> &[IdWord] {
        &self.periods
    }
}

impl LanguageOracle for PeriodicUnion {
    fn table(&self) -> &SymbolTable {
        &self.table
    }

    fn describe(&self) -> String {
        let lens: Vec<String> = self.periods.iter().map(|p| p.len().to_string()).collect();
        format!("union of periodic orbits with periods {}", lens.join(", "))
    }

    fn budget(&self) -> usize {
        self.budget
    }

    fn words(&self, n: usize) -> Result<BTreeSet<IdWord>, OracleError> {
        let mut out = BTreeSet::new();
        for p in &self.periods {
            let q = p.len();
            for s in 0..q {
                let w: IdWord = (0..n).map(|i| p[(s + i) % q]).collect();
                out.insert(w);
            }
            budget_guard(out.len() as u128, self.budget)?;
        }
        Ok(out)
    }

    fn contains(&self, w: &[u16]) -> Result<bool, OracleError> {
        Ok(self.words(w.len())?.contains(w))
    }
}

// ---------------------------------------------------------------------------
// Transfer graphs
// ---------------------------------------------------------------------------

/// The order-`m` finite-type approximation of a language: vertices are the
/// `m`-blocks, edges the `(m+1)`-blocks (an edge `w` runs from its first
/// `m`-block to its last), trimmed to the essential part by iteratively
/// deleting vertices without outgoing or without incoming edges.
#[derive(Debug, Clone)]
pub struct TransferGraph {
    order: usize,
    table: SymbolTable,
    vertices: Vec<IdWord>,
    out_adj: Vec<Vec<u32>>,
    in_deg: Vec<u32>,
    pruned: usize,
}

impl TransferGraph {
    /// Builds the order-`m` approximation of an oracle's language.
    pub fn from_oracle(x: &dyn LanguageOracle, m: usize) -> Result<Self, OracleError> {
        if m == 0 {
            return Err(OracleError::Unsupported("transfer graphs need order at least 1".into()));
        }
        let vertices: Vec<IdWord> = x.words(m)?.into_iter().collect();
        let edge_words: Vec<IdWord> = x.words(m + 1)?.into_iter().collect();
        Self::from_parts(x.table().clone(), m, vertices, &edge_words)
    }

    /// Builds a graph from explicit `m`-blocks and `(m+1)`-blocks and trims
    /// it to its essential part.
    pub fn from_parts(
        table: SymbolTable,
        order: usize,
        vertices: Vec<IdWord>,
        edge_words: &[IdWord],
    ) -> Result<Self, OracleError> {
        let index: BTreeMap<&[u16], u32> =
            vertices.iter().enumerate().map(|(i, w)| (w.as_slice(), i as u32)).collect();
        let mut out_adj: Vec<Vec<u32>> = vec![Vec::new(); vertices.len()];
        for e in edge_words {
            if e.len() != order + 1 {
                return Err(OracleError::Inconsistent(format!(
                    "edge word of length {} in an order-{} graph",
                    e.len(),
                    order
                )));
            }
            let from = *index.get(&e[..order]).ok_or_else(|| {
                OracleError::Inconsistent("edge word whose head block is not a vertex".into())
            })?;
            let to = *index.get(&e[1..]).ok_or_else(|| {
                OracleError::Inconsistent("edge word whose tail block is not a vertex".into())
            })?;
            out_adj[from as usize].push(to);
        }
        for adj in &mut out_adj {
            adj.sort_unstable();
            adj.dedup();
        }

        // Trim to the essential part.
        let n = vertices.len();
        let mut alive = vec![true; n];
        loop {
            let mut in_deg = vec![0u32; n];
            for (v, adj) in out_adj.iter().enumerate() {
                if !alive[v] {
                    continue;
                }
                for &t in adj {
                    if alive[t as usize] {
                        in_deg[t as usize] += 1;
                    }
                }
            }
            let mut changed = false;
            for v in 0..n {
                if !alive[v] {
                    continue;
                }
                let out_deg = out_adj[v].iter().filter(|&&t| alive[t as usize]).count();
                if out_deg == 0 || in_deg[v] == 0 {
                    alive[v] = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }

        let keep: Vec<usize> = (0..n).filter(|&v| alive[v]).collect();
        if keep.is_empty() {
            return Err(OracleError::EmptySystem);
        }
        let mut renumber = vec![u32::MAX; n];
        for (new, &old) in keep.iter().enumerate() {
            renumber[old] = new as u32;
        }
        let kept_vertices: Vec<IdWord> = keep.iter().map(|&v| vertices[v].clone()).collect();
        let kept_adj: Vec<Vec<u32>> = keep
            .iter()
            .map(|&v| {
                out_adj[v]
                    .iter()
                    .filter(|&&t| alive[t as usize])
                    .map(|&t| renumber[t as usize])
                    .collect()
            })
            .collect();
        let mut in_deg = vec![0u32; kept_vertices.len()];
        for adj in &kept_adj {
            for &t in adj {
                in_deg[t as usize] += 1;
            }
        }
        Ok(TransferGraph {
            order,
            table,
            vertices: kept_vertices,
            out_adj: kept_adj,
            in_deg,
            pruned: n - keep.len(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn table(&self) -> &SymbolTable {
        &self.table
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.out_adj.iter().map(Vec::len).sum()
    }

    /// Number of vertices removed by essential trimming.
    pub fn pruned_vertices(&self) -> usize {
        self.pruned
    }

    pub fn vertex_word(&self, v: u32) -> &[u16] {
        &self.vertices[v as usize]
    }

    pub fn vertex_index(&self, w: &[u16]) -> Option<u32> {
        self.vertices.binary_search_by(|x| x.as_slice().cmp(w)).ok().map(|i| i as u32)
    }

    pub fn targets(&self, v: u32) -> &[u32] {
        &self.out_adj[v as usize]
    }

    pub fn out_degree(&self, v: u32) -> usize {
        self.out_adj[v as usize].len()
    }

    pub fn in_degree(&self, v: u32) -> u32 {
        self.in_deg[v as usize]
    }

    /// The `(m+1)`-block spelled by the edge `v -> t`.
    pub fn edge_word(&self, v: u32, t: u32) -> IdWord {
        let mut w = self.vertices[v as usize].clone();
        w.push(*self.vertices[t as usize].last().expect("order >= 1"));
        w
    }

    /// Words of length `n` spelled by the graph: for `n <= m` the `n`-blocks
    /// of vertex words, beyond that the labels of paths. For a graph built
    /// from a factor-closed language this is exactly `L_n` of the order-`m`
    /// approximation.
    pub fn language(&self, n: usize, budget: usize) -> Result<BTreeSet<IdWord>, OracleError> {
        let mut out = BTreeSet::new();
        if n <= self.order {
            for v in &self.vertices {
                windows_of(v, n, &mut out);
            }
            budget_guard(out.len() as u128, budget)?;
            return Ok(out);
        }
        let steps = n - self.order;
        match self.path_count(steps) {
            Ok(c) => budget_guard(c, budget)?,
            // too many to count is certainly too many to enumerate
            Err(OracleError::CountOverflow { .. }) => {
                return Err(OracleError::BudgetExceeded { count_at_least: u128::MAX, budget })
            }
            Err(e) => return Err(e),
        }
        // DFS spelling every path of `steps` edges from every start vertex;
        // a word determines its path, so no deduplication is needed.
        let mut word: IdWord = Vec::with_capacity(n);
        for start in 0..self.vertices.len() as u32 {
            word.clear();
            word.extend_from_slice(&self.vertices[start as usize]);
            // invariant: with d entries on the stack, `word` spells the
            // path's m + (d-1) symbols
            let mut stack: Vec<(u32, usize)> = vec![(start, 0)];
            while !stack.is_empty() {
                let depth = stack.len();
                if depth - 1 == steps {
                    out.insert(word.clone());
                    stack.pop();
                    word.truncate(self.order + stack.len().saturating_sub(1));
                    continue;
                }
                let (v, next) = stack[depth - 1];
                let adj = &self.out_adj[v as usize];
                if next < adj.len() {
                    stack[depth - 1].1 += 1;
                    let t = adj[next];
                    word.truncate(self.order + depth - 1);
                    word.push(*self.vertices[t as usize].last().unwrap());
                    stack.push((t, 0));
                } else {
                    stack.pop();
                    word.truncate(self.order + stack.len().saturating_sub(1));
                }
            }
        }
        Ok(out)
    }

    /// Number of paths with `steps` edges (each spells an `(m+steps)`-block).
    pub fn path_count(&self, steps: usize) -> Result<u128, OracleError> {
        let mut v: Vec<u128> = vec![1; self.vertices.len()];
        for s in 0..steps {
            let mut next: Vec<u128> = vec![0; self.vertices.len()];
            for (i, adj) in self.out_adj.iter().enumerate() {
                for &t in adj {
                    next[i] = next[i]
                        .checked_add(v[t as usize])
                        .ok_or(OracleError::CountOverflow { n: self.order + s + 1 })?;
                }
            }
            v = next;
        }
        let mut total: u128 = 0;
        for x in v {
            total = total
                .checked_add(x)
                .ok_or(OracleError::CountOverflow { n: self.order + steps })?;
        }
        Ok(total)
    }

    /// Strongly connected components (Tarjan), each sorted ascending; the
    /// component order is the deterministic completion order.
    pub fn sccs(&self) -> Vec<Vec<u32>> {
        const UNSEEN: u32 = u32::MAX;
        let n = self.vertices.len();
        let mut index = vec![UNSEEN; n];
        let mut low = vec![0u32; n];
        let mut on_stack = vec![false; n];
        let mut stack: Vec<u32> = Vec::new();
        let mut next_index: u32 = 0;
        let mut comps: Vec<Vec<u32>> = Vec::new();

        for root in 0..n {
            if index[root] != UNSEEN {
                continue;
            }
            let mut call: Vec<(u32, usize)> = vec![(root as u32, 0)];
            while !call.is_empty() {
                let (v, child) = call[call.len() - 1];
                let vu = v as usize;
                if index[vu] == UNSEEN {
                    index[vu] = next_index;
                    low[vu] = next_index;
                    next_index += 1;
                    stack.push(v);
                    on_stack[vu] = true;
                }
                let adj = &self.out_adj[vu];
                if child < adj.len() {
                    let top = call.len() - 1;
                    call[top].1 += 1;
                    let t = adj[child];
                    let tu = t as usize;
                    if index[tu] == UNSEEN {
                        call.push((t, 0));
                    } else if on_stack[tu] {
                        low[vu] = low[vu].min(index[tu]);
                    }
                } else {
                    call.pop();
                    if let Some(&(parent, _)) = call.last() {
                        let pu = parent as usize;
                        low[pu] = low[pu].min(low[vu]);
                    }
                    if low[vu] == index[vu] {
                        let mut comp = Vec::new();
                        while let Some(w) = stack.pop() {
                            on_stack[w as usize] = false;
                            comp.push(w);
                            if w == v {
                                break;
                            }
                        }
                        comp.sort_unstable();
                        comps.push(comp);
                    }
                }
            }
        }
        comps
    }
}

// ---------------------------------------------------------------------------
// Shifts of finite type
// ---------------------------------------------------------------------------

/// A shift of finite type, backed by its transfer graph from birth: a word
/// is in the language iff it is spelled by the essential graph, so dead ends
/// created by the forbidden factors are already pruned away.
pub struct SftOracle {
    graph: TransferGraph,
    budget: usize,
}

impl SftOracle {
    pub fn from_forbidden(
        table: SymbolTable,
        forbidden: &[IdWord],
        budget: usize,
    ) -> Result<Self, OracleError> {
        if table.is_empty() {
            return Err(OracleError::EmptySystem);
        }
        if forbidden.iter().any(|f| f.is_empty()) {
            // the empty word is a factor of everything
            return Err(OracleError::EmptySystem);
        }
        let m = forbidden.iter().map(|f| f.len()).max().unwrap_or(1).max(2) - 1;
        let k = table.len() as u128;
        let mut block_count: u128 = 1;
        for _ in 0..m {
            block_count = block_count
                .checked_mul(k)
                .ok_or(OracleError::CountOverflow { n: m })?;
        }
        budget_guard(block_count, budget)?;

        let avoids = |w: &[u16]| -> bool {
            forbidden
                .iter()
                .all(|f| f.len() > w.len() || !w.windows(f.len()).any(|win| win == f.as_slice()))
        };
        let mut vertices: Vec<IdWord> = Vec::new();
        let mut w: IdWord = vec![0; m];
        let kk = table.len() as u16;
        loop {
            if avoids(&w) {
                vertices.push(w.clone());
            }
            let mut pos = m;
            while pos > 0 {
                if w[pos - 1] + 1 < kk {
                    w[pos - 1] += 1;
                    break;
                }
                w[pos - 1] = 0;
                pos -= 1;
            }
            if pos == 0 {
                break;
            }
        }
        let mut edge_words: Vec<IdWord> = Vec::new();
        for v in &vertices {
            for s in 0..kk {
                let mut e = v.clone();
                e.push(s);
                if avoids(&e) {
                    edge_words.push(e);
                }
            }
        }
        let graph = TransferGraph::from_parts(table, m, vertices, &edge_words)?;
        Ok(SftOracle { graph, budget })
    }

    pub fn from_graph(graph: TransferGraph, budget: usize) -> Self {
        SftOracle { graph, budget }
    }

    pub fn graph(&self) -> &TransferGraph {
        &self.graph
    }
}

impl LanguageOracle for SftOracle {
    fn table(&self) -> &SymbolTable {
        self.graph.table()
    }

    fn describe(&self) -> String {
        format!(
            "finite-type shift (order {}, {} blocks, {} transitions)",
            self.graph.order(),
            self.graph.vertex_count(),
            self.graph.edge_count()
        )
    }

    fn budget(&self) -> usize {
        self.budget
    }

    fn words(&self, n: usize) -> Result<BTreeSet<IdWord>, OracleError> {
        self.graph.language(n, self.budget)
    }

    fn contains(&self, w: &[u16]) -> Result<bool, OracleError> {
        let m = self.graph.order();
        if w.len() <= m {
            // short words: factors of the essential blocks
            return Ok(self.words(w.len())?.contains(w));
        }
        let mut prev = match self.graph.vertex_index(&w[..m]) {
            Some(v) => v,
            None => return Ok(false),
        };
        for i in 1..=w.len() - m {
            let cur = match self.graph.vertex_index(&w[i..i + m]) {
                Some(v) => v,
                None => return Ok(false),
            };
            if self.graph.targets(prev).binary_search(&cur).is_err() {
                return Ok(false);
            }
            prev = cur;
        }
        Ok(true)
    }

    fn count(&self, n: usize) -> Result<u128, OracleError> {
        let m = self.graph.order();
        if n <= m {
            return Ok(self.words(n)?.len() as u128);
        }
        self.graph.path_count(n - m)
    }
}

// ---------------------------------------------------------------------------
// Substitution systems
// ---------------------------------------------------------------------------

/// The shift generated by a primitive substitution. The language is obtained
/// by iterating the substitution on every letter until the factor set of the
/// requested length stabilizes; primitivity makes that exact.
pub struct SubstitutionOracle {
    table: SymbolTable,
    images: Vec<IdWord>,
    budget: usize,
}

impl SubstitutionOracle {
    pub fn new(table: SymbolTable, images: Vec<IdWord>, budget: usize) -> Result<Self, OracleError> {
        let k = table.len();
        if k == 0 || images.len() != k || images.iter().any(|im| im.is_empty()) {
            return Err(OracleError::EmptySystem);
        }
        let oracle = SubstitutionOracle { table, images, budget };
        if !oracle.is_primitive() {
            return Err(OracleError::NotPrimitive);
        }
        Ok(oracle)
    }

    /// Primitivity via the incidence graph: strongly connected and the gcd
    /// of its cycle lengths is 1.
    fn is_primitive(&self) -> bool {
        let k = self.table.len();
        let mut succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); k];
        for (a, im) in self.images.iter().enumerate() {
            for &b in im {
                succ[a].insert(b as usize);
            }
        }
        // strong connectivity: forward and backward reachability from 0
        let reach = |adj: &dyn Fn(usize) -> Vec<usize>| -> Vec<bool> {
            let mut seen = vec![false; k];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(v) = stack.pop() {
                for t in adj(v) {
                    if !seen[t] {
                        seen[t] = true;
                        stack.push(t);
                    }
                }
            }
            seen
        };
        let fwd = reach(&|v| succ[v].iter().copied().collect());
        let bwd = reach(&|v| {
            (0..k).filter(|&u| succ[u].contains(&v)).collect()
        });
        if fwd.iter().any(|&s| !s) || bwd.iter().any(|&s| !s) {
            return false;
        }
        // aperiodicity: gcd over edges of (level(u) + 1 - level(v)) is 1
        let mut level = vec![0i64; k];
        let mut seen = vec![false; k];
        let mut queue = std::collections::VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &succ[u] {
                if !seen[v] {
                    seen[v] = true;
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        let mut g: i64 = 0;
        for u in 0..k {
            for &v in &succ[u] {
                g = num_integer::gcd(g, (level[u] + 1 - level[v]).abs());
            }
        }
        g == 1
    }

    fn apply(&self, w: &[u16]) -> IdWord {
        let mut out = IdWord::new();
        for &a in w {
            out.extend_from_slice(&self.images[a as usize]);
        }
        out
    }
}

impl LanguageOracle for SubstitutionOracle {
    fn table(&self) -> &SymbolTable {
        &self.table
    }

    fn describe(&self) -> String {
        let rules: Vec<String> = self
            .images
            .iter()
            .enumerate()
            .map(|(a, im)| {
                let img: String = im.iter().map(|&b| self.table.token(b)).collect();
                format!("{}->{}", self.table.token(a as u16), img)
            })
            .collect();
        format!("substitution system {}", rules.join(", "))
    }

    fn budget(&self) -> usize {
        self.budget
    }

    fn words(&self, n: usize) -> Result<BTreeSet<IdWord>, OracleError> {
        if n == 0 {
            return Ok(BTreeSet::from([IdWord::new()]));
        }
        let k = self.table.len();
        let mut iterates: Vec<IdWord> = (0..k as u16).map(|a| vec![a]).collect();
        let mut factors: BTreeSet<IdWord> = BTreeSet::new();
        let mut stable_rounds = 0;
        for _round in 0..64 {
            iterates = iterates.iter().map(|w| self.apply(w)).collect();
            let mut next: BTreeSet<IdWord> = BTreeSet::new();
            for w in &iterates {
                windows_of(w, n, &mut next);
            }
            budget_guard(next.len() as u128, self.budget)?;
            let long_enough = iterates.iter().map(Vec::len).min().unwrap_or(0) >= 2 * n;
            if long_enough && next == factors {
                stable_rounds += 1;
                if stable_rounds >= 3 {
                    return Ok(next);
                }
            } else {
                stable_rounds = 0;
            }
            factors = next;
        }
        Err(OracleError::Inconsistent(format!(
            "factor set of length {n} did not stabilize within the iteration cap"
        )))
    }

    fn contains(&self, w: &[u16]) -> Result<bool, OracleError> {
        Ok(self.words(w.len())?.contains(w))
    }
}

// ---------------------------------------------------------------------------
// Sturmian (rational rotation) codings
// ---------------------------------------------------------------------------

/// Coding of the rotation by the rational `num/den` with respect to the
/// partition `[0, 1-alpha) -> 0`, `[1-alpha, 1) -> 1`, started at the
/// midpoint `1/(2 den)` of the finest rotation grid so the orbit never hits
/// a cell boundary. The coding is `den`-periodic; enumeration scans
/// `max(n(n+1)+1, den+n)` windows, which covers a full period and therefore
/// sees every factor.
pub struct SturmianOracle {
    table: SymbolTable,
    num: u64,
    den: u64,
    budget: usize,
}

impl SturmianOracle {
    pub fn new(num: u64, den: u64, budget: usize) -> Result<Self, OracleError> {
        if num == 0 || num >= den {
            return Err(OracleError::Unsupported(format!(
                "rotation number {num}/{den} must lie strictly between 0 and 1"
            )));
        }
        Ok(SturmianOracle {
            table: SymbolTable::from_labels(["0", "1"]),
            num,
            den,
            budget,
        })
    }

    pub fn slope(&self) -> (u64, u64) {
        (self.num, self.den)
    }

    /// The first `len` coding symbols. Position `i` codes the point
    /// `(1 + 2 i num) / (2 den)` (all arithmetic over the common
    /// denominator `2 den`, where the orbit sits on odd residues and the
    /// cell boundary on an even one).
    pub fn coding(&self, len: usize) -> Vec<u16> {
        let q2 = 2 * self.den;
        let boundary = 2 * (self.den - self.num); // 1 - alpha over den(2q)
        (0..len as u64)
            .map(|i| {
                let pos = (1 + 2 * ((self.num as u128 * i as u128) % self.den as u128) as u64) % q2;
                u16::from(pos >= boundary)
            })
            .collect()
    }
}

impl LanguageOracle for SturmianOracle {
    fn table(&self) -> &SymbolTable {
        &self.table
    }

    fn describe(&self) -> String {
        format!("sturmian coding of the rotation by {}/{}", self.num, self.den)
    }

    fn budget(&self) -> usize {
        self.budget
    }

    fn words(&self, n: usize) -> Result<BTreeSet<IdWord>, OracleError> {
        if n == 0 {
            return Ok(BTreeSet::from([IdWord::new()]));
        }
        let windows = (n * (n + 1) + 1).max(self.den as usize + n);
        let coding = self.coding(windows + n);
        let mut out = BTreeSet::new();
        for i in 0..windows {
            out.insert(coding[i..i + n].to_vec());
            if out.len() > self.budget {
                return Err(OracleError::BudgetExceeded {
                    count_at_least: out.len() as u128,
                    budget: self.budget,
                });
            }
        }
        Ok(out)
    }

    fn contains(&self, w: &[u16]) -> Result<bool, OracleError> {
        Ok(self.words(w.len())?.contains(w))
    }
}

// ---------------------------------------------------------------------------
// Sample-backed oracles
// ---------------------------------------------------------------------------

/// An oracle backed by a finite sampled prefix of a stream. Answers are
/// certificates relative to the sampled horizon: a "word of length n" is a
/// window observed in the sample, and membership means occurrence in it.
pub struct SampleOracle {
    table: SymbolTable,
    prefix: Vec<u16>,
    description: String,
    budget: usize,
}

impl SampleOracle {
    pub fn from_reals(
        sample: &[Dyadic],
        description: impl Into<String>,
        budget: usize,
    ) -> Result<Self, OracleError> {
        if sample.is_empty() {
            return Err(OracleError::EmptySystem);
        }
        let distinct: BTreeSet<Dyadic> = sample.iter().cloned().collect();
        let index: BTreeMap<&Dyadic, u16> =
            distinct.iter().enumerate().map(|(i, d)| (d, i as u16)).collect();
        let prefix: Vec<u16> = sample.iter().map(|d| index[d]).collect();
        let table = SymbolTable::from_reals(distinct.iter().cloned())?;
        Ok(SampleOracle { table, prefix, description: description.into(), budget })
    }

    pub fn horizon(&self) -> usize {
        self.prefix.len()
    }
}

impl LanguageOracle for SampleOracle {
    fn table(&self) -> &SymbolTable {
        &self.table
    }

    fn describe(&self) -> String {
        format!("{} (sampled prefix of {} symbols)", self.description, self.prefix.len())
    }

    fn sample_based(&self) -> bool {
        true
    }

    fn budget(&self) -> usize {
        self.budget
    }

    fn words(&self, n: usize) -> Result<BTreeSet<IdWord>, OracleError> {
        if n > self.prefix.len() {
            return Err(OracleError::Unsupported(format!(
                "window length {n} exceeds the sampled horizon {}",
                self.prefix.len()
            )));
        }
        let mut out = BTreeSet::new();
        if n == 0 {
            out.insert(IdWord::new());
            return Ok(out);
        }
        for i in 0..=self.prefix.len() - n {
            out.insert(self.prefix[i..i + n].to_vec());
            if out.len() > self.budget {
                return Err(OracleError::BudgetExceeded {
                    count_at_least: out.len() as u128,
                    budget: self.budget,
                });
            }
        }
        Ok(out)
    }

    fn contains(&self, w: &[u16]) -> Result<bool, OracleError> {
        Ok(self.words(w.len())?.contains(w))
    }
}

// ---------------------------------------------------------------------------
// Products
// ---------------------------------------------------------------------------

/// The product system: words are coordinatewise pairs, and the language of
/// length `n` is the product of the factor languages.
pub struct ProductOracle {
    left: Box<dyn LanguageOracle>,
    right: Box<dyn LanguageOracle>,
    table: SymbolTable,
    budget: usize,
}

impl ProductOracle {
    pub fn new(
        left: Box<dyn LanguageOracle>,
        right: Box<dyn LanguageOracle>,
        budget: usize,
    ) -> Result<Self, OracleError> {
        let table = SymbolTable::product(left.table(), right.table())?;
        Ok(ProductOracle { left, right, table, budget })
    }

    fn split(&self, id: u16) -> (u16, u16) {
        let nb = self.right.table().len();
        ((id as usize / nb) as u16, (id as usize % nb) as u16)
    }

    fn join(&self, a: u16, b: u16) -> u16 {
        (a as usize * self.right.table().len() + b as usize) as u16
    }
}

impl LanguageOracle for ProductOracle {
    fn table(&self) -> &SymbolTable {
        &self.table
    }

    fn describe(&self) -> String {
        format!("product of [{}] and [{}]", self.left.describe(), self.right.describe())
    }

    fn sample_based(&self) -> bool {
        self.left.sample_based() || self.right.sample_based()
    }

    fn budget(&self) -> usize {
        self.budget
    }

    fn words(&self, n: usize) -> Result<BTreeSet<IdWord>, OracleError> {
        budget_guard(self.count(n)?, self.budget)?;
        let la = self.left.words(n)?;
        let lb = self.right.words(n)?;
        let mut out = BTreeSet::new();
        for wa in &la {
            for wb in &lb {
                let w: IdWord = wa.iter().zip(wb).map(|(&a, &b)| self.join(a, b)).collect();
                out.insert(w);
            }
        }
        Ok(out)
    }

    fn contains(&self, w: &[u16]) -> Result<bool, OracleError> {
        let (mut wa, mut wb) = (IdWord::with_capacity(w.len()), IdWord::with_capacity(w.len()));
        for &id in w {
            if id as usize >= self.table.len() {
                return Ok(false);
            }
            let (a, b) = self.split(id);
            wa.push(a);
            wb.push(b);
        }
        Ok(self.left.contains(&wa)? && self.right.contains(&wb)?)
    }

    fn count(&self, n: usize) -> Result<u128, OracleError> {
        self.left
            .count(n)?
            .checked_mul(self.right.count(n)?)
            .ok_or(OracleError::CountOverflow { n })
    }
}

// ---------------------------------------------------------------------------
// Building oracles from descriptions
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("cannot read referenced system {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("referenced system {path} does not parse: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: SpecError,
    },
    #[error("reference chain at {path} exceeds the nesting limit (cycle?)")]
    TooDeep { path: PathBuf },
    #[error("building the sampled stream failed: {0}")]
    Stream(String),
}

/// Builds an oracle from a parsed description. `base_dir` anchors relative
/// product references; referenced files are read and parsed here, at build
/// time, so `parse_spec` itself stays a pure function.
pub fn build_oracle(
    spec: &SystemSpec,
    base_dir: &Path,
    budget: usize,
) -> Result<Box<dyn LanguageOracle>, BuildError> {
    build_oracle_at(spec, base_dir, budget, 0)
}

const MAX_REFERENCE_DEPTH: usize = 16;

fn build_oracle_at(
    spec: &SystemSpec,
    base_dir: &Path,
    budget: usize,
    depth: usize,
) -> Result<Box<dyn LanguageOracle>, BuildError> {
    match spec {
        SystemSpec::Full { alphabet } => {
            let table = SymbolTable::from_labels(alphabet.iter().cloned());
            Ok(Box::new(FullShift::new(table, budget)?))
        }
        SystemSpec::Periodic { words } => {
            let mut alphabet: Vec<String> = words.iter().flatten().cloned().collect();
            alphabet.sort();
            alphabet.dedup();
            let table = SymbolTable::from_labels(alphabet);
            let periods = words
                .iter()
                .map(|w| table.encode_tokens(w))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Box::new(PeriodicUnion::new(table, periods, budget)?))
        }
        SystemSpec::Sft { alphabet, forbidden } => {
            let table = SymbolTable::from_labels(alphabet.iter().cloned());
            let forbidden = forbidden
                .iter()
                .map(|w| table.encode_tokens(w))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Box::new(SftOracle::from_forbidden(table, &forbidden, budget)?))
        }
        SystemSpec::Substitution { alphabet, rules } => {
            let table = SymbolTable::from_labels(alphabet.iter().cloned());
            let mut images: Vec<IdWord> = vec![IdWord::new(); alphabet.len()];
            for (l, img) in rules {
                let id = table
                    .id_of_token(l)
                    .ok_or_else(|| OracleError::UnknownToken(l.clone()))?;
                images[id as usize] = table.encode_tokens(img)?;
            }
            Ok(Box::new(SubstitutionOracle::new(table, images, budget)?))
        }
        SystemSpec::Sturmian { num, den } => Ok(Box::new(SturmianOracle::new(*num, *den, budget)?)),
        SystemSpec::Noninv { x0, d_max } => {
            let sample = crate::noninv::sample_prefix(x0, *d_max, DEFAULT_SAMPLE_HORIZON)
                .map_err(|e| BuildError::Stream(e.to_string()))?;
            Ok(Box::new(SampleOracle::from_reals(
                &sample,
                "staged non-invertible stream",
                budget,
            )?))
        }
        SystemSpec::Product { left, right } => {
            if depth >= MAX_REFERENCE_DEPTH {
                return Err(BuildError::TooDeep { path: base_dir.to_path_buf() });
            }
            let load = |rel: &str| -> Result<Box<dyn LanguageOracle>, BuildError> {
                let path = base_dir.join(rel);
                let text = fs::read_to_string(&path)
                    .map_err(|source| BuildError::Io { path: path.clone(), source })?;
                let sub = speclang::parse_spec(&text)
                    .map_err(|source| BuildError::Parse { path: path.clone(), source })?;
                let dir = path.parent().unwrap_or(base_dir).to_path_buf();
                build_oracle_at(&sub, &dir, budget, depth + 1)
            };
            let l = load(left)?;
            let r = load(right)?;
            Ok(Box::new(ProductOracle::new(l, r, budget)?))
        }
    }
}

// ---------------------------------------------------------------------------
// Dumps and invariant checks
// ---------------------------------------------------------------------------

/// The sorted word dump of `L_n`, one rendered word per line.
pub fn language_dump(x: &dyn LanguageOracle, n: usize) -> Result<Vec<String>, OracleError> {
    x.words(n)?
        .iter()
        .map(|w| x.table().decode(w).map(|word| word.to_string()))
        .collect()
}

/// Words of `L_n` with an `(n-1)`-factor outside `L_{n-1}`; empty for a
/// factor-closed language.
pub fn factor_closure_violations(
    x: &dyn LanguageOracle,
    n: usize,
) -> Result<Vec<IdWord>, OracleError> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let shorter = x.words(n - 1)?;
    let mut bad = Vec::new();
    for w in x.words(n)? {
        let ok = if n == 1 {
            shorter.contains(&IdWord::new())
        } else {
            w.windows(n - 1).all(|win| shorter.contains(win))
        };
        if !ok {
            bad.push(w);
        }
    }
    Ok(bad)
}

/// Words of `L_n` lacking a right or left one-symbol extension in `L_{n+1}`;
/// empty for the language of a (nonempty) shift space when the oracle is
/// exact. Sample-backed oracles may show boundary artifacts.
pub fn extendability_violations(
    x: &dyn LanguageOracle,
    n: usize,
) -> Result<Vec<IdWord>, OracleError> {
    let longer = x.words(n + 1)?;
    let mut right_ok: BTreeSet<&[u16]> = BTreeSet::new();
    let mut left_ok: BTreeSet<&[u16]> = BTreeSet::new();
    for w in &longer {
        right_ok.insert(&w[..n]);
        left_ok.insert(&w[1..]);
    }
    Ok(x.words(n)?
        .into_iter()
        .filter(|w| !right_ok.contains(w.as_slice()) || !left_ok.contains(w.as_slice()))
        .collect())
}

/// Checks `|L_{a+b}| <= |L_a| |L_b|` for all splits of `n`; returns the
/// first violated split.
pub fn submultiplicativity_violation(
    x: &dyn LanguageOracle,
    n: usize,
) -> Result<Option<(usize, usize)>, OracleError> {
    let total = x.count(n)?;
    for a in 1..n {
        let b = n - a;
        if x.count(a)?.checked_mul(x.count(b)?).map(|p| total > p).unwrap_or(false) {
            return Ok(Some((a, b)));
        }
    }
    Ok(None)
}

/// Renders a transfer graph summary (deterministic, for reports).
pub fn graph_summary(g: &TransferGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "order {} graph: {} vertices, {} edges, {} pruned",
        g.order(),
        g.vertex_count(),
        g.edge_count(),
        g.pruned_vertices()
    );
    for v in 0..g.vertex_count() as u32 {
        let word = g
            .table()
            .decode(g.vertex_word(v))
            .map(|w| w.to_string())
            .unwrap_or_default();
        let targets: Vec<String> = g
            .targets(v)
            .iter()
            .map(|&t| {
                g.table()
                    .decode(g.vertex_word(t))
                    .map(|w| w.to_string())
                    .unwrap_or_default()
            })
            .collect();
        let _ = writeln!(out, "  [{word}] -> {}", targets.join(", "));
    }
    out
}
