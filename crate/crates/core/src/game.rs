//! Games, valuation classes, and structural predicates.
//!
//! A competition game is a set of weighted workers plus `k >= 2` firms, each
//! holding a monotone valuation over worker subsets with `v(empty) = 0`.
//! Subsets are `u32` bitmasks throughout; enumeration guards keep every
//! operation at desk scale and are adjustable through [`Limits`].

use std::collections::BTreeMap;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{InfluenceNetwork, SynergyMatrix};
use crate::rational::{format_rat, parse_rat, Rat};

/// Enumeration and state-space guards. Defaults keep every bundled instance
/// under a second; `unlimited` is for explicit opt-in only.
#[derive(Debug, Clone)]
pub struct Limits {
    /// max workers for explicit-set enumeration (demand sets, submodularity)
    pub explicit_n: usize,
    /// max DP states `(W+1)^k` for the weighted partition DP
    pub dp_states: u64,
    /// max type-count assignments for optimal-partition enumeration
    pub enum_partitions: u64,
    /// max workers for the uncollapsed stability LP (`2^n` rows per firm)
    pub stability_full_n: usize,
    /// max workers for the configuration LP
    pub config_n: usize,
    /// max workers for exhaustive max-cut
    pub maxcut_n: usize,
    /// max probabilistic edges for exact percolation enumeration
    pub percolation_edges: usize,
    /// max workers for the Moebius decomposition
    pub moebius_n: usize,
    /// permit degenerate `k = 1` games (testing only)
    pub allow_single_firm: bool,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            explicit_n: 20,
            dp_states: 100_000_000,
            enum_partitions: 10_000_000,
            stability_full_n: 16,
            config_n: 16,
            maxcut_n: 24,
            percolation_edges: 25,
            moebius_n: 12,
            allow_single_firm: false,
        }
    }
}

impl Limits {
    pub fn unlimited() -> Self {
        Limits {
            explicit_n: 30,
            dp_states: u64::MAX,
            enum_partitions: u64::MAX,
            stability_full_n: 30,
            config_n: 30,
            maxcut_n: 30,
            percolation_edges: 62,
            moebius_n: 24,
            allow_single_firm: true,
        }
    }
}

/// How an influence valuation is evaluated inside a game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InfluenceMode {
    Exact,
    MonteCarlo { samples: u64, seed: u64 },
}

/// One firm's production function.
#[derive(Debug, Clone, PartialEq)]
pub enum Valuation {
    /// Value depends only on total hired weight; `table[w]` for `w = 0..=W`.
    Weighted(Vec<Rat>),
    /// Dense table indexed by subset bitmask; length `2^n`.
    Explicit { n: usize, table: Vec<Rat> },
    /// Sum of self-edges, in-set edges, and outgoing edges of the hired set.
    Synergy(SynergyMatrix),
    /// Expected independent-cascade influence of the hired seed set.
    Influence { network: InfluenceNetwork, mode: InfluenceMode },
}

pub fn mask_members(mask: u32) -> impl Iterator<Item = usize> {
    (0..32).filter(move |j| mask >> j & 1 == 1)
}

pub fn mask_weight(mask: u32, weights: &[u32]) -> u64 {
    mask_members(mask).map(|j| weights[j] as u64).sum()
}

impl Valuation {
    pub fn worker_count(&self) -> Option<usize> {
        match self {
            Valuation::Weighted(_) => None,
            Valuation::Explicit { n, .. } => Some(*n),
            Valuation::Synergy(m) => Some(m.n),
            Valuation::Influence { network, .. } => Some(network.workers.len()),
        }
    }

    pub fn is_weighted(&self) -> bool {
        matches!(self, Valuation::Weighted(_))
    }

    /// `v(S)`; Monte-Carlo influence modes are rejected because every solver
    /// path requires exact values (sampling lives in the network module).
    pub fn evaluate(&self, subset: u32, weights: &[u32]) -> Result<Rat> {
        match self {
            Valuation::Weighted(table) => {
                let w = mask_weight(subset, weights) as usize;
                table.get(w).cloned().ok_or_else(|| {
                    Error::precondition(format!("weight {w} outside table of len {}", table.len()))
                })
            }
            Valuation::Explicit { n, table } => {
                if subset >> n != 0 {
                    return Err(Error::precondition("subset out of range"));
                }
                Ok(table[subset as usize].clone())
            }
            Valuation::Synergy(m) => m.coalition_value(subset),
            Valuation::Influence { network, mode } => match mode {
                InfluenceMode::Exact => {
                    let seeds: Vec<usize> =
                        mask_members(subset).map(|j| network.workers[j]).collect();
                    network.influence_exact_nodes(&seeds, &Limits::default())
                }
                InfluenceMode::MonteCarlo { .. } => Err(Error::precondition(
                    "Monte-Carlo influence valuation where an exact value is required",
                )),
            },
        }
    }

    /// Marginal value `m(j, S) = v(S + j) - v(S)`; requires `j` not in `S`.
    pub fn marginal(&self, j: usize, subset: u32, weights: &[u32]) -> Result<Rat> {
        if subset >> j & 1 == 1 {
            return Err(Error::precondition(format!("worker {j} already in the set")));
        }
        Ok(self.evaluate(subset | 1 << j, weights)? - self.evaluate(subset, weights)?)
    }
}

/// Non-increasing unit increments of a weighted table. This is the operative
/// notion of subadditivity for weighted games: it is exactly submodularity of
/// the induced set function over unit-divisible weight.
pub fn is_concave_weighted(table: &[Rat]) -> bool {
    table.windows(3).all(|w| &w[1] - &w[0] >= &w[2] - &w[1])
}

/// Pairwise submodularity check `v(T+j) + v(T+j') >= v(T) + v(T+j+j')`
/// over all `j < j'` and `T` disjoint from both.
pub fn is_submodular(valuation: &Valuation, n: usize, weights: &[u32], limits: &Limits) -> Result<bool> {
    if n > limits.explicit_n {
        return Err(Error::guard("submodularity enumeration", limits.explicit_n as u64, n as u64));
    }
    for j in 0..n {
        for jp in (j + 1)..n {
            let pair = (1u32 << j) | (1 << jp);
            let rest: Vec<usize> = (0..n).filter(|&u| u != j && u != jp).collect();
            for sub in 0u32..(1 << rest.len()) {
                let mut t = 0u32;
                for (b, &u) in rest.iter().enumerate() {
                    if sub >> b & 1 == 1 {
                        t |= 1 << u;
                    }
                }
                let lhs = valuation.evaluate(t | 1 << j, weights)?
                    + valuation.evaluate(t | 1 << jp, weights)?;
                let rhs = valuation.evaluate(t, weights)? + valuation.evaluate(t | pair, weights)?;
                if lhs < rhs {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// All profit-maximizing subsets under the price vector, in ascending bitmask
/// order, together with the optimal profit `max v(S) - x(S)`.
pub fn demand_set(
    valuation: &Valuation,
    weights: &[u32],
    prices: &[Rat],
    limits: &Limits,
) -> Result<(Vec<u32>, Rat)> {
    let n = prices.len();
    if n > limits.explicit_n {
        return Err(Error::guard("demand enumeration", limits.explicit_n as u64, n as u64));
    }
    let mut best: Option<Rat> = None;
    let mut arg: Vec<u32> = Vec::new();
    for mask in 0u32..(1 << n) {
        let cost: Rat = mask_members(mask).map(|j| prices[j].clone()).sum();
        let profit = valuation.evaluate(mask, weights)? - cost;
        match &best {
            Some(b) if profit < *b => {}
            Some(b) if profit == *b => arg.push(mask),
            _ => {
                best = Some(profit);
                arg = vec![mask];
            }
        }
    }
    Ok((arg, best.unwrap()))
}

/// Witness of a gross-substitutes violation for the specific price pair:
/// a worker whose price did not change, who is demanded under `x` but in no
/// optimal set under the raised prices `xp`. Requires `xp >= x`.
pub fn gs_violation(
    valuation: &Valuation,
    weights: &[u32],
    x: &[Rat],
    xp: &[Rat],
    limits: &Limits,
) -> Result<Option<usize>> {
    if x.iter().zip(xp).any(|(a, b)| b < a) {
        return Err(Error::precondition("raised prices must dominate the base prices"));
    }
    let (dem, _) = demand_set(valuation, weights, x, limits)?;
    let (dem_p, _) = demand_set(valuation, weights, xp, limits)?;
    let in_some = dem.iter().fold(0u32, |acc, m| acc | m);
    let in_some_p = dem_p.iter().fold(0u32, |acc, m| acc | m);
    for j in 0..x.len() {
        if xp[j] == x[j] && in_some >> j & 1 == 1 && in_some_p >> j & 1 == 0 {
            return Ok(Some(j));
        }
    }
    Ok(None)
}

/// Sweep candidate price pairs built from chord slopes (weighted) or marginal
/// values (otherwise) and return the first violation found. The candidate set
/// is finite by design; a `None` result means no violation was exhibited, not
/// a proof of gross substitutes.
pub fn gs_sweep(
    valuation: &Valuation,
    weights: &[u32],
    limits: &Limits,
) -> Result<Option<(Vec<Rat>, Vec<Rat>, usize)>> {
    let n = weights.len();
    let mut critical: Vec<Rat> = Vec::new();
    match valuation {
        Valuation::Weighted(table) => {
            let w_total = table.len() - 1;
            for a in 0..w_total {
                for b in (a + 1)..=w_total {
                    critical.push((&table[b] - &table[a]) / Rat::from_integer(((b - a) as i64).into()));
                }
            }
        }
        _ => {
            let full = (1u32 << n) - 1;
            for j in 0..n {
                for sub in 0u32..(1 << n) {
                    if sub >> j & 1 == 0 && sub | 1 << j <= full {
                        critical.push(valuation.marginal(j, sub, weights)?);
                    }
                }
            }
        }
    }
    critical.sort();
    critical.dedup();
    for lo in &critical {
        let base: Vec<Rat> = weights.iter().map(|&w| lo * Rat::from_integer((w as i64).into())).collect();
        for hi in &critical {
            if hi <= lo {
                continue;
            }
            for j in 0..n {
                let mut raised = base.clone();
                raised[j] = hi * Rat::from_integer((weights[j] as i64).into());
                if let Some(w) = gs_violation(valuation, weights, &base, &raised, limits)? {
                    return Ok(Some((base, raised, w)));
                }
            }
        }
    }
    Ok(None)
}

/// Worker equivalence classes: `j == j'` iff every firm is indifferent
/// between them on every background set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeStructure {
    /// class index per worker
    pub class_of: Vec<usize>,
    /// members per class, each sorted ascending; classes ordered by smallest member
    pub classes: Vec<Vec<usize>>,
}

impl TypeStructure {
    fn from_relation(n: usize, same: impl Fn(usize, usize) -> bool) -> TypeStructure {
        let mut class_of = vec![usize::MAX; n];
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for j in 0..n {
            let found = classes.iter().position(|c| same(c[0], j));
            match found {
                Some(ci) => {
                    classes[ci].push(j);
                    class_of[j] = ci;
                }
                None => {
                    class_of[j] = classes.len();
                    classes.push(vec![j]);
                }
            }
        }
        TypeStructure { class_of, classes }
    }

    pub fn singletons(n: usize) -> TypeStructure {
        TypeStructure::from_relation(n, |_, _| false)
    }
}

/// Game metadata; records lossy ingestion such as rationalized irrational
/// tables so downstream artifacts stay reproducible.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GameMetadata {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// denominator used when irrational inputs were rationalized at ingestion
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rationalized_denominator: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompetitionGame {
    pub weights: Vec<u32>,
    pub valuations: Vec<Valuation>,
    pub metadata: GameMetadata,
}

impl CompetitionGame {
    pub fn new(weights: Vec<u32>, valuations: Vec<Valuation>) -> Result<Self> {
        Self::with_limits(weights, valuations, &Limits::default())
    }

    pub fn with_limits(weights: Vec<u32>, valuations: Vec<Valuation>, limits: &Limits) -> Result<Self> {
        let n = weights.len();
        if valuations.len() < 2 && !limits.allow_single_firm {
            return Err(Error::invalid("a competition game needs at least two firms"));
        }
        if valuations.is_empty() {
            return Err(Error::invalid("no firms"));
        }
        if weights.iter().any(|&w| w == 0) {
            return Err(Error::invalid("worker weights must be strictly positive integers"));
        }
        if n > 32 {
            return Err(Error::invalid("at most 32 workers are supported"));
        }
        let total: u64 = weights.iter().map(|&w| w as u64).sum();
        for (i, v) in valuations.iter().enumerate() {
            if let Some(vn) = v.worker_count() {
                if vn != n {
                    return Err(Error::invalid(format!(
                        "firm {i} valuation is over {vn} workers, game has {n}"
                    )));
                }
            }
            match v {
                Valuation::Weighted(table) => {
                    if table.len() as u64 != total + 1 {
                        return Err(Error::invalid(format!(
                            "firm {i} weighted table has {} entries, expected {}",
                            table.len(),
                            total + 1
                        )));
                    }
                    if !table[0].is_zero() {
                        return Err(Error::invalid(format!("firm {i}: v(0) must be 0")));
                    }
                    if table.windows(2).any(|w| w[1] < w[0]) {
                        return Err(Error::invalid(format!("firm {i}: table not monotone")));
                    }
                }
                Valuation::Explicit { n: en, table } => {
                    if *en > limits.explicit_n {
                        return Err(Error::guard(
                            "explicit valuation size",
                            limits.explicit_n as u64,
                            *en as u64,
                        ));
                    }
                    if table.len() != 1 << en {
                        return Err(Error::invalid(format!(
                            "firm {i} explicit table has {} entries, expected {}",
                            table.len(),
                            1u64 << en
                        )));
                    }
                    if !table[0].is_zero() {
                        return Err(Error::invalid(format!("firm {i}: v(empty) must be 0")));
                    }
                    for mask in 1u32..(1 << en) {
                        let j = mask.trailing_zeros();
                        if table[mask as usize] < table[(mask & !(1 << j)) as usize] {
                            return Err(Error::invalid(format!("firm {i}: table not monotone")));
                        }
                    }
                }
                // synergy and influence values are monotone by construction
                Valuation::Synergy(m) => m.validate()?,
                Valuation::Influence { network, .. } => {
                    network.validate()?;
                    if network.workers.len() != n {
                        return Err(Error::invalid("influence network worker list length mismatch"));
                    }
                }
            }
        }
        Ok(CompetitionGame { weights, valuations, metadata: GameMetadata::default() })
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn k(&self) -> usize {
        self.valuations.len()
    }

    pub fn total_weight(&self) -> u64 {
        self.weights.iter().map(|&w| w as u64).sum()
    }

    pub fn full_mask(&self) -> u32 {
        if self.n() == 32 {
            u32::MAX
        } else {
            (1u32 << self.n()) - 1
        }
    }

    /// Derived, never stored: all firms share one valuation.
    pub fn is_symmetric(&self) -> bool {
        self.valuations.windows(2).all(|w| w[0] == w[1])
    }

    pub fn all_weighted(&self) -> bool {
        self.valuations.iter().all(Valuation::is_weighted)
    }

    pub fn value(&self, firm: usize, subset: u32) -> Result<Rat> {
        self.valuations[firm].evaluate(subset, &self.weights)
    }

    /// Worker equivalence classes. All-weighted games reduce to weight
    /// equality; otherwise the full indifference definition is enumerated.
    pub fn worker_types(&self, limits: &Limits) -> Result<TypeStructure> {
        let n = self.n();
        if self.all_weighted() {
            return Ok(TypeStructure::from_relation(n, |a, b| self.weights[a] == self.weights[b]));
        }
        if n > limits.explicit_n {
            return Err(Error::guard("type enumeration", limits.explicit_n as u64, n as u64));
        }
        let mut ok = vec![vec![false; n]; n];
        for a in 0..n {
            for b in 0..n {
                if a >= b {
                    continue;
                }
                ok[a][b] = self.same_type(a, b)?;
            }
        }
        Ok(TypeStructure::from_relation(n, |a, b| {
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            ok[a][b]
        }))
    }

    fn same_type(&self, j: usize, jp: usize) -> Result<bool> {
        let n = self.n();
        for v in &self.valuations {
            if v.is_weighted() {
                if self.weights[j] != self.weights[jp] {
                    return Ok(false);
                }
                continue;
            }
            let rest: Vec<usize> = (0..n).filter(|&u| u != j && u != jp).collect();
            for sub in 0u32..(1 << rest.len()) {
                let mut s = 0u32;
                for (bit, &u) in rest.iter().enumerate() {
                    if sub >> bit & 1 == 1 {
                        s |= 1 << u;
                    }
                }
                if v.evaluate(s | 1 << j, &self.weights)? != v.evaluate(s | 1 << jp, &self.weights)? {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// Assignment of each worker to a firm `1..=k`, or `0` for the idle pool.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Partition {
    pub assignment: Vec<u8>,
}

impl Partition {
    pub fn new(assignment: Vec<u8>, k: usize) -> Result<Self> {
        if assignment.iter().any(|&a| a as usize > k) {
            return Err(Error::invalid("assignment references a firm beyond k"));
        }
        Ok(Partition { assignment })
    }

    pub fn firm_mask(&self, firm: usize) -> u32 {
        let mut m = 0u32;
        for (j, &a) in self.assignment.iter().enumerate() {
            if a as usize == firm + 1 {
                m |= 1 << j;
            }
        }
        m
    }

    pub fn idle_mask(&self) -> u32 {
        let mut m = 0u32;
        for (j, &a) in self.assignment.iter().enumerate() {
            if a == 0 {
                m |= 1 << j;
            }
        }
        m
    }

    pub fn social_welfare(&self, game: &CompetitionGame) -> Result<Rat> {
        let mut sw = Rat::zero();
        for i in 0..game.k() {
            sw += game.value(i, self.firm_mask(i))?;
        }
        Ok(sw)
    }

    pub fn firm_weights(&self, game: &CompetitionGame) -> Vec<u64> {
        (0..game.k()).map(|i| mask_weight(self.firm_mask(i), &game.weights)).collect()
    }
}

/// Reduced-form outcome: a partition plus one realized payment per worker.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub partition: Partition,
    pub payments: Vec<Rat>,
}

impl Outcome {
    pub fn firm_profits(&self, game: &CompetitionGame) -> Result<Vec<Rat>> {
        (0..game.k())
            .map(|i| {
                let mask = self.partition.firm_mask(i);
                let pay: Rat = mask_members(mask).map(|j| self.payments[j].clone()).sum();
                Ok(game.value(i, mask)? - pay)
            })
            .collect()
    }

    pub fn social_welfare(&self, game: &CompetitionGame) -> Result<Rat> {
        self.partition.social_welfare(game)
    }
}

// === shared JSON game format ===

#[derive(Serialize, Deserialize)]
struct GameFile {
    weights: Vec<u32>,
    firms: Vec<FirmPayload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metadata: Option<GameMetadata>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum FirmPayload {
    Weighted { values: Vec<String> },
    /// subsets keyed by sorted comma-separated worker indices; "" is the empty set
    Explicit { n: usize, values: BTreeMap<String, String> },
    Synergy { matrix: crate::network::SynergyMatrixFile },
    Influence {
        network: crate::network::NetworkFile,
        mode: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        samples: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

fn subset_key_to_mask(key: &str, n: usize) -> Result<u32> {
    let key = key.trim();
    if key.is_empty() {
        return Ok(0);
    }
    let mut mask = 0u32;
    for part in key.split(',') {
        let j: usize = part
            .trim()
            .parse()
            .map_err(|_| Error::parse(format!("bad subset key `{key}`")))?;
        if j >= n {
            return Err(Error::parse(format!("worker {j} out of range in subset key")));
        }
        mask |= 1 << j;
    }
    Ok(mask)
}

fn mask_to_subset_key(mask: u32) -> String {
    mask_members(mask).map(|j| j.to_string()).collect::<Vec<_>>().join(",")
}

pub fn game_to_json(game: &CompetitionGame) -> Result<String> {
    let firms = game
        .valuations
        .iter()
        .map(|v| match v {
            Valuation::Weighted(table) => {
                FirmPayload::Weighted { values: table.iter().map(format_rat).collect() }
            }
            Valuation::Explicit { n, table } => {
                let mut values = BTreeMap::new();
                for mask in 1u32..(1 << n) {
                    values.insert(mask_to_subset_key(mask), format_rat(&table[mask as usize]));
                }
                FirmPayload::Explicit { n: *n, values }
            }
            Valuation::Synergy(m) => FirmPayload::Synergy { matrix: m.to_file() },
            Valuation::Influence { network, mode } => {
                let (mode_s, samples, seed) = match mode {
                    InfluenceMode::Exact => ("exact".to_string(), None, None),
                    InfluenceMode::MonteCarlo { samples, seed } => {
                        ("monte-carlo".to_string(), Some(*samples), Some(*seed))
                    }
                };
                FirmPayload::Influence { network: network.to_file(), mode: mode_s, samples, seed }
            }
        })
        .collect();
    let file = GameFile {
        weights: game.weights.clone(),
        firms,
        metadata: if game.metadata == GameMetadata::default() {
            None
        } else {
            Some(game.metadata.clone())
        },
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn game_from_json(s: &str, limits: &Limits) -> Result<CompetitionGame> {
    let file: GameFile = serde_json::from_str(s)?;
    let n = file.weights.len();
    let valuations = file
        .firms
        .into_iter()
        .map(|f| -> Result<Valuation> {
            match f {
                FirmPayload::Weighted { values } => {
                    Ok(Valuation::Weighted(values.iter().map(|s| parse_rat(s)).collect::<Result<_>>()?))
                }
                FirmPayload::Explicit { n: en, values } => {
                    if en > limits.explicit_n {
                        return Err(Error::guard(
                            "explicit valuation size",
                            limits.explicit_n as u64,
                            en as u64,
                        ));
                    }
                    let mut table = vec![Rat::zero(); 1 << en];
                    let mut seen = vec![false; 1 << en];
                    seen[0] = true;
                    for (key, val) in &values {
                        let mask = subset_key_to_mask(key, en)?;
                        table[mask as usize] = parse_rat(val)?;
                        seen[mask as usize] = true;
                    }
                    if let Some(missing) = seen.iter().position(|&s| !s) {
                        return Err(Error::parse(format!(
                            "explicit valuation missing subset {}",
                            mask_to_subset_key(missing as u32)
                        )));
                    }
                    Ok(Valuation::Explicit { n: en, table })
                }
                FirmPayload::Synergy { matrix } => Ok(Valuation::Synergy(SynergyMatrix::from_file(&matrix)?)),
                FirmPayload::Influence { network, mode, samples, seed } => {
                    let network = InfluenceNetwork::from_file(&network)?;
                    let mode = match mode.as_str() {
                        "exact" => InfluenceMode::Exact,
                        "monte-carlo" => InfluenceMode::MonteCarlo {
                            samples: samples.unwrap_or(10_000),
                            seed: seed.unwrap_or(0),
                        },
                        other => return Err(Error::parse(format!("unknown influence mode `{other}`"))),
                    };
                    Ok(Valuation::Influence { network, mode })
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let _ = n;
    let mut game = CompetitionGame::with_limits(file.weights, valuations, limits)?;
    if let Some(md) = file.metadata {
        game.metadata = md;
    }
    Ok(game)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{rat, rat_int};

    fn wtab(vals: &[i64]) -> Valuation {
        Valuation::Weighted(vals.iter().map(|&v| rat_int(v)).collect())
    }

    fn capped(total: u64, cap: i64) -> Valuation {
        Valuation::Weighted((0..=total as i64).map(|w| rat_int(w.min(cap))).collect())
    }

    #[test]
    fn evaluate_weighted_and_empty() {
        // unit weights, v = (0,3,4,6): v of any two workers is 4
        let v = wtab(&[0, 3, 4, 6]);
        let w = [1, 1, 1];
        assert_eq!(v.evaluate(0b011, &w).unwrap(), rat_int(4));
        assert_eq!(v.evaluate(0, &w).unwrap(), rat_int(0));
    }

    #[test]
    fn marginal_values() {
        let v = wtab(&[0, 3, 4, 6]);
        let w = [1, 1, 1];
        // marginal of a worker joining a single co-worker is 1
        assert_eq!(v.marginal(1, 0b001, &w).unwrap(), rat_int(1));
        // m(j, empty) = v({j})
        assert_eq!(v.marginal(0, 0, &w).unwrap(), rat_int(3));
        assert!(v.marginal(0, 0b001, &w).is_err());
        // capped table, weight-2 worker joining weight 5: v(7)-v(5) clipped at 6
        let v = capped(9, 6);
        let w = [2, 2, 3, 2];
        assert_eq!(v.marginal(0, 0b1100, &w).unwrap(), rat_int(1));
    }

    #[test]
    fn concavity_predicate() {
        assert!(!is_concave_weighted(&[rat_int(0), rat_int(3), rat_int(4), rat_int(6)]));
        let capped: Vec<Rat> = (0..=9i64).map(|w| rat_int(w.min(6))).collect();
        assert!(is_concave_weighted(&capped));
        let linear: Vec<Rat> = (0..=9i64).map(|w| rat_int(3 * w)).collect();
        assert!(is_concave_weighted(&linear));
    }

    #[test]
    fn demand_set_capped_weights() {
        // v
        let v = capped(12, 6);
        let w = [3, 3, 2, 2, 2];
        let x: Vec<Rat> = w.iter().map(|&wi| rat(wi as i64, 2)).collect();
        let (dem, profit) = demand_set(&v, &w, &x, &Limits::default()).unwrap();
        assert_eq!(profit, rat_int(3));
        assert_eq!(dem, vec![0b00011, 0b11100]);
        // raise one 3-worker to 2: unique optimum is the three 2-workers
        let mut xp = x.clone();
        xp[0] = rat_int(2);
        let (dem_p, _) = demand_set(&v, &w, &xp, &Limits::default()).unwrap();
        assert_eq!(dem_p, vec![0b11100]);
        // free workers: the whole set is demanded
        let zero = vec![Rat::zero(); 5];
        let (dem0, p0) = demand_set(&v, &w, &zero, &Limits::default()).unwrap();
        assert!(dem0.contains(&0b11111));
        assert_eq!(p0, rat_int(6));
    }

    #[test]
    fn gs_violation_witnesses() {
        let v = capped(12, 6);
        let w = [3, 3, 2, 2, 2];
        let x: Vec<Rat> = w.iter().map(|&wi| rat(wi as i64, 2)).collect();
        let mut xp = x.clone();
        xp[0] = rat_int(2);
        // worker 1 (the other 3-weight) is priced unchanged, demanded under x,
        // but in no optimal set once worker 0 is raised
        let witness = gs_violation(&v, &w, &x, &xp, &Limits::default()).unwrap();
        assert_eq!(witness, Some(1));
        // additive valuation never violates
        let add = Valuation::Weighted((0..=12i64).map(rat_int).collect());
        assert_eq!(gs_violation(&add, &w, &x, &xp, &Limits::default()).unwrap(), None);
        // precondition: raised prices must dominate
        assert!(gs_violation(&v, &w, &xp, &x, &Limits::default()).is_err());
    }

    #[test]
    fn gs_sweep_finds_weighted_witness() {
        let v = capped(12, 6);
        let w = [3, 3, 2, 2, 2];
        assert!(gs_sweep(&v, &w, &Limits::default()).unwrap().is_some());
        let add = Valuation::Weighted((0..=12i64).map(|x| rat(x, 3)).collect());
        assert!(gs_sweep(&add, &w, &Limits::default()).unwrap().is_none());
    }

    #[test]
    fn worker_types_weighted_fast_path() {
        let g = CompetitionGame::new(
            vec![2, 2, 3],
            vec![capped(7, 5), capped(7, 5)],
        )
        .unwrap();
        let t = g.worker_types(&Limits::default()).unwrap();
        assert_eq!(t.classes, vec![vec![0, 1], vec![2]]);
        // homogeneous: single class
        let g = CompetitionGame::new(vec![1, 1, 1], vec![wtab(&[0, 3, 4, 6]); 2]).unwrap();
        let t = g.worker_types(&Limits::default()).unwrap();
        assert_eq!(t.classes.len(), 1);
    }

    #[test]
    fn game_validation() {
        assert!(CompetitionGame::new(vec![1, 1], vec![wtab(&[0, 1, 2])]).is_err()); // k < 2
        assert!(CompetitionGame::new(vec![1, 0], vec![wtab(&[0, 1, 2]); 2]).is_err()); // zero weight
        assert!(CompetitionGame::new(vec![1, 1], vec![wtab(&[0, 1]); 2]).is_err()); // short table
        assert!(CompetitionGame::new(vec![1, 1], vec![wtab(&[1, 1, 2]); 2]).is_err()); // v(0) != 0
        assert!(CompetitionGame::new(vec![1, 1], vec![wtab(&[0, 2, 1]); 2]).is_err()); // not monotone
        let g = CompetitionGame::new(vec![1, 1], vec![wtab(&[0, 1, 2]), wtab(&[0, 1, 1])]).unwrap();
        assert!(!g.is_symmetric());
        let g = CompetitionGame::new(vec![1, 1], vec![wtab(&[0, 1, 2]); 2]).unwrap();
        assert!(g.is_symmetric());
    }

    #[test]
    fn json_round_trip() {
        let g = CompetitionGame::new(
            vec![1, 2, 3, 5],
            vec![
                Valuation::Weighted((0..=11).map(|w: i64| rat(w.min(7), 1)).collect()),
                Valuation::Explicit {
                    n: 4,
                    table: (0u32..16).map(|m| rat_int(m.count_ones() as i64)).collect(),
                },
            ],
        )
        .unwrap();
        let s = game_to_json(&g).unwrap();
        let g2 = game_from_json(&s, &Limits::default()).unwrap();
        assert_eq!(g, g2);
    }
}
