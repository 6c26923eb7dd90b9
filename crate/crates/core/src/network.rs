//! Influence networks, synergy graphs, and their interconversion.
//!
//! Influence follows the independent-cascade model: an activated node tries
//! each out-neighbor once, succeeding with the edge probability. Influence of
//! a seed set is the expected number of activated nodes *excluding the seeds
//! themselves*; the same convention drives the sparsity statistic and the
//! synergy-graph conversion, so the two representations agree exactly on
//! 2-sparse networks.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{mask_members, Limits, Valuation};
use crate::rational::{format_rat, parse_rat, Rat};

/// Symmetric nonnegative matrix with self-edges on the diagonal. The induced
/// coalition value sums self-edges, in-set edges, and edges leaving the set.
#[derive(Debug, Clone, PartialEq)]
pub struct SynergyMatrix {
    pub n: usize,
    /// row-major, length `n * n`
    pub entries: Vec<Rat>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynergyMatrixFile {
    pub n: usize,
    pub entries: Vec<String>,
}

impl SynergyMatrix {
    pub fn new(n: usize, entries: Vec<Rat>) -> Result<Self> {
        let m = SynergyMatrix { n, entries };
        m.validate()?;
        Ok(m)
    }

    pub fn from_rows(rows: Vec<Vec<Rat>>) -> Result<Self> {
        let n = rows.len();
        let entries = rows.into_iter().flatten().collect();
        SynergyMatrix::new(n, entries)
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.len() != self.n * self.n {
            return Err(Error::invalid("synergy matrix entry count mismatch"));
        }
        for i in 0..self.n {
            for j in 0..self.n {
                if self.get(i, j) != self.get(j, i) {
                    return Err(Error::invalid("synergy matrix must be symmetric"));
                }
                if self.get(i, j).is_negative() {
                    return Err(Error::invalid("synergy matrix entries must be nonnegative"));
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> &Rat {
        &self.entries[i * self.n + j]
    }

    /// `v_M(S)`: self-edges and in-set edges once, plus edges from `S` outward.
    pub fn coalition_value(&self, subset: u32) -> Result<Rat> {
        if subset >> self.n != 0 {
            return Err(Error::precondition("subset out of range"));
        }
        let mut total = Rat::zero();
        for j in mask_members(subset) {
            total += self.get(j, j);
            for jp in 0..self.n {
                if jp == j {
                    continue;
                }
                if subset >> jp & 1 == 1 {
                    if jp > j {
                        total += self.get(j, jp);
                    }
                } else {
                    total += self.get(j, jp);
                }
            }
        }
        Ok(total)
    }

    /// Row sum: the value of the singleton `{j}`.
    pub fn row_total(&self, j: usize) -> Rat {
        (0..self.n).map(|jp| self.get(j, jp).clone()).sum()
    }

    pub fn to_file(&self) -> SynergyMatrixFile {
        SynergyMatrixFile { n: self.n, entries: self.entries.iter().map(format_rat).collect() }
    }

    pub fn from_file(f: &SynergyMatrixFile) -> Result<Self> {
        SynergyMatrix::new(f.n, f.entries.iter().map(|s| parse_rat(s)).collect::<Result<_>>()?)
    }
}

/// Directed graph with rational activation probabilities in `(0, 1]` and a
/// distinguished list of worker (seed-candidate) nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceNetwork {
    pub num_nodes: usize,
    pub workers: Vec<usize>,
    pub edges: Vec<(usize, usize, Rat)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkFile {
    pub nodes: usize,
    pub workers: Vec<usize>,
    pub edges: Vec<(usize, usize, String)>,
}

impl InfluenceNetwork {
    pub fn new(num_nodes: usize, workers: Vec<usize>, edges: Vec<(usize, usize, Rat)>) -> Result<Self> {
        let n = InfluenceNetwork { num_nodes, workers, edges };
        n.validate()?;
        Ok(n)
    }

    /// Deterministic network: every listed edge fires with probability 1.
    pub fn deterministic(num_nodes: usize, workers: Vec<usize>, edges: &[(usize, usize)]) -> Result<Self> {
        InfluenceNetwork::new(
            num_nodes,
            workers,
            edges.iter().map(|&(u, v)| (u, v, Rat::one())).collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for &w in &self.workers {
            if w >= self.num_nodes {
                return Err(Error::invalid("worker node index out of range"));
            }
            if !seen.insert(w) {
                return Err(Error::invalid("duplicate worker node"));
            }
        }
        for (u, v, p) in &self.edges {
            if *u >= self.num_nodes || *v >= self.num_nodes {
                return Err(Error::invalid("edge endpoint out of range"));
            }
            if !p.is_positive() || *p > Rat::one() {
                return Err(Error::invalid("edge probabilities must lie in (0, 1]"));
            }
        }
        Ok(())
    }

    fn adjacency(&self, include: impl Fn(usize) -> bool) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_nodes];
        for (idx, (u, v, _)) in self.edges.iter().enumerate() {
            if include(idx) {
                adj[*u].push(*v);
            }
        }
        adj
    }

    fn reach(adj: &[Vec<usize>], seeds: &[usize]) -> Vec<bool> {
        let mut seen = vec![false; adj.len()];
        let mut stack: Vec<usize> = Vec::new();
        for &s in seeds {
            if !seen[s] {
                seen[s] = true;
                stack.push(s);
            }
        }
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }

    /// Exact expected influence of a set of worker indices (into `workers`).
    pub fn influence_exact(&self, seed_workers: &[usize], limits: &Limits) -> Result<Rat> {
        let seeds: Vec<usize> = seed_workers.iter().map(|&j| self.workers[j]).collect();
        self.influence_exact_nodes(&seeds, limits)
    }

    /// Exact expected influence with seeds given as node ids. Deterministic
    /// edges stay fixed; the expectation enumerates percolations of the
    /// probabilistic edges only, guarded by their count.
    pub fn influence_exact_nodes(&self, seeds: &[usize], limits: &Limits) -> Result<Rat> {
        let prob_edges: Vec<usize> = (0..self.edges.len())
            .filter(|&i| !self.edges[i].2.is_one())
            .collect();
        if prob_edges.len() > limits.percolation_edges {
            return Err(Error::guard(
                "percolation enumeration",
                limits.percolation_edges as u64,
                prob_edges.len() as u64,
            ));
        }
        let seed_set: Vec<bool> = {
            let mut v = vec![false; self.num_nodes];
            for &s in seeds {
                v[s] = true;
            }
            v
        };
        let mut total = Rat::zero();
        for mask in 0u64..(1u64 << prob_edges.len()) {
            let adj = self.adjacency(|idx| {
                self.edges[idx].2.is_one()
                    || prob_edges.iter().position(|&e| e == idx).map(|b| mask >> b & 1 == 1).unwrap_or(false)
            });
            let mut weight = Rat::one();
            for (b, &e) in prob_edges.iter().enumerate() {
                let p = &self.edges[e].2;
                if mask >> b & 1 == 1 {
                    weight *= p;
                } else {
                    weight *= Rat::one() - p;
                }
            }
            if weight.is_zero() {
                continue;
            }
            let reached = Self::reach(&self.adjacency(|idx| {
                self.edges[idx].2.is_one()
                    || prob_edges.iter().position(|&e| e == idx).map(|b| mask >> b & 1 == 1).unwrap_or(false)
            }), seeds);
            let _ = adj;
            let count = reached
                .iter()
                .enumerate()
                .filter(|&(u, &r)| r && !seed_set[u])
                .count();
            total += weight * Rat::from_integer(BigInt::from(count));
        }
        Ok(total)
    }

    /// Monte-Carlo influence estimate. Per-sample generators are derived from
    /// `(seed, sample index)` with a splittable mix, so batches are
    /// reproducible under any parallel schedule. Returns the exact rational
    /// sample mean and its standard error.
    pub fn influence_monte_carlo(
        &self,
        seed_workers: &[usize],
        samples: u64,
        seed: u64,
    ) -> Result<(Rat, f64)> {
        if samples == 0 {
            return Err(Error::precondition("need at least one sample"));
        }
        let seeds: Vec<usize> = seed_workers.iter().map(|&j| self.workers[j]).collect();
        let seed_set: Vec<bool> = {
            let mut v = vec![false; self.num_nodes];
            for &s in &seeds {
                v[s] = true;
            }
            v
        };
        // reduced numer/denom pairs for exact Bernoulli draws
        let bern: Vec<Option<(u64, u64)>> = self
            .edges
            .iter()
            .map(|(_, _, p)| {
                if p.is_one() {
                    None
                } else {
                    Some((p.numer().to_u64().unwrap_or(u64::MAX), p.denom().to_u64().unwrap_or(u64::MAX)))
                }
            })
            .collect();
        let mut sum = 0u64;
        let mut sumsq: u128 = 0;
        for i in 0..samples {
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix2(seed, i));
            let adj = {
                let mut adj = vec![Vec::new(); self.num_nodes];
                for (idx, (u, v, _)) in self.edges.iter().enumerate() {
                    let fire = match bern[idx] {
                        None => true,
                        Some((num, den)) => rng.gen_range(0..den) < num,
                    };
                    if fire {
                        adj[*u].push(*v);
                    }
                }
                adj
            };
            let reached = Self::reach(&adj, &seeds);
            let count = reached.iter().enumerate().filter(|&(u, &r)| r && !seed_set[u]).count() as u64;
            sum += count;
            sumsq += (count as u128) * (count as u128);
        }
        let estimate = Rat::new(BigInt::from(sum), BigInt::from(samples));
        let m = samples as f64;
        let mean = sum as f64 / m;
        let stderr = if samples > 1 {
            let var = (sumsq as f64 - m * mean * mean) / (m - 1.0);
            (var.max(0.0) / m).sqrt()
        } else {
            0.0
        };
        Ok((estimate, stderr))
    }

    /// `t` such that every node is reachable from at most `t` workers, where
    /// reachability ignores probabilities and a worker does not count itself.
    pub fn sparsity(&self) -> usize {
        let adj = self.adjacency(|_| true);
        let mut count = vec![0usize; self.num_nodes];
        for (wi, &w) in self.workers.iter().enumerate() {
            let _ = wi;
            let reached = Self::reach(&adj, &[w]);
            for (u, &r) in reached.iter().enumerate() {
                if r && u != w {
                    count[u] += 1;
                }
            }
        }
        count.into_iter().max().unwrap_or(0)
    }

    /// Per-worker exact reach probability for every node (self excluded).
    fn reach_probabilities(&self, limits: &Limits) -> Result<Vec<Vec<Rat>>> {
        let prob_edges: Vec<usize> = (0..self.edges.len())
            .filter(|&i| !self.edges[i].2.is_one())
            .collect();
        if prob_edges.len() > limits.percolation_edges {
            return Err(Error::guard(
                "percolation enumeration",
                limits.percolation_edges as u64,
                prob_edges.len() as u64,
            ));
        }
        let mut probs = vec![vec![Rat::zero(); self.num_nodes]; self.workers.len()];
        for mask in 0u64..(1u64 << prob_edges.len()) {
            let mut weight = Rat::one();
            for (b, &e) in prob_edges.iter().enumerate() {
                let p = &self.edges[e].2;
                if mask >> b & 1 == 1 {
                    weight *= p;
                } else {
                    weight *= Rat::one() - p;
                }
            }
            if weight.is_zero() {
                continue;
            }
            let adj = self.adjacency(|idx| {
                self.edges[idx].2.is_one()
                    || prob_edges.iter().position(|&e| e == idx).map(|b| mask >> b & 1 == 1).unwrap_or(false)
            });
            for (wi, &w) in self.workers.iter().enumerate() {
                let reached = Self::reach(&adj, &[w]);
                for (u, &r) in reached.iter().enumerate() {
                    if r && u != w {
                        probs[wi][u] += &weight;
                    }
                }
            }
        }
        Ok(probs)
    }

    pub fn to_file(&self) -> NetworkFile {
        NetworkFile {
            nodes: self.num_nodes,
            workers: self.workers.clone(),
            edges: self.edges.iter().map(|(u, v, p)| (*u, *v, format_rat(p))).collect(),
        }
    }

    pub fn from_file(f: &NetworkFile) -> Result<Self> {
        InfluenceNetwork::new(
            f.nodes,
            f.workers.clone(),
            f.edges
                .iter()
                .map(|(u, v, p)| Ok((*u, *v, parse_rat(p)?)))
                .collect::<Result<_>>()?,
        )
    }
}

fn splitmix2(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Convert a 2-sparse network into the synergy matrix with identical
/// coalition values: off-diagonal entries are pairwise joint-influence mass
/// (product of the two marginal reach probabilities), and the diagonal is the
/// exclusive remainder of each worker's influence.
pub fn network_to_synergy(h: &InfluenceNetwork, limits: &Limits) -> Result<SynergyMatrix> {
    let t = h.sparsity();
    if t > 2 {
        return Err(Error::precondition(format!("network is {t}-sparse, need 2-sparse")));
    }
    let n = h.workers.len();
    let probs = h.reach_probabilities(limits)?;
    let mut entries = vec![Rat::zero(); n * n];
    for j in 0..n {
        for jp in (j + 1)..n {
            let mut m = Rat::zero();
            for u in 0..h.num_nodes {
                if !probs[j][u].is_zero() && !probs[jp][u].is_zero() {
                    m += &probs[j][u] * &probs[jp][u];
                }
            }
            entries[j * n + jp] = m.clone();
            entries[jp * n + j] = m;
        }
    }
    for j in 0..n {
        let total: Rat = probs[j].iter().sum();
        let shared: Rat = (0..n).filter(|&jp| jp != j).map(|jp| entries[j * n + jp].clone()).sum();
        entries[j * n + j] = total - shared;
    }
    SynergyMatrix::new(n, entries)
}

/// Realize an integer synergy matrix as a deterministic 2-sparse network:
/// one fresh node per unit of each entry, fed by its one or two workers.
pub fn synergy_to_network(m: &SynergyMatrix) -> Result<InfluenceNetwork> {
    let n = m.n;
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut next = n;
    for j in 0..n {
        for jp in j..n {
            let e = m.get(j, jp);
            if !e.denom().is_one() {
                return Err(Error::precondition(
                    "synergy matrix must have integer entries (scale rationals first)",
                ));
            }
            let count = e
                .numer()
                .to_u64()
                .ok_or_else(|| Error::precondition("synergy entry too large"))?;
            for _ in 0..count {
                edges.push((j, next));
                if jp != j {
                    edges.push((jp, next));
                }
                next += 1;
            }
        }
    }
    InfluenceNetwork::deterministic(next, (0..n).collect(), &edges)
}

/// Check `v_M(S) = I_H(S)` on every subset (small `n` only).
pub fn verify_synergy_network_equivalence(
    m: &SynergyMatrix,
    h: &InfluenceNetwork,
    limits: &Limits,
) -> Result<bool> {
    if m.n > limits.moebius_n {
        return Err(Error::guard("equivalence check", limits.moebius_n as u64, m.n as u64));
    }
    for mask in 0u32..(1 << m.n) {
        let seeds: Vec<usize> = mask_members(mask).collect();
        if m.coalition_value(mask)? != h.influence_exact(&seeds, limits)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Moebius-style decomposition of a set function into joint-influence mass:
/// `f(T)` is the value attributable to nodes influenced by exactly `T`, and
/// `v(S) = sum over T intersecting S of f(T)`. The function is realizable as
/// independent-cascade influence only if every `f(T)` is nonnegative.
#[derive(Debug, Clone)]
pub struct MoebiusTable {
    pub n: usize,
    /// indexed by subset mask; entry 0 is unused (empty set)
    pub f: Vec<Rat>,
    pub representable: bool,
    /// smallest witness subset with negative mass, if any
    pub negative_witness: Option<u32>,
}

pub fn moebius_decomposition(v: &Valuation, n: usize, weights: &[u32], limits: &Limits) -> Result<MoebiusTable> {
    if n > limits.moebius_n {
        return Err(Error::guard("moebius decomposition", limits.moebius_n as u64, n as u64));
    }
    let full: u32 = if n == 32 { u32::MAX } else { (1 << n) - 1 };
    let v_full = v.evaluate(full, weights)?;
    // g(U) = v(N) - v(N \ U); f(T) = sum_{U subseteq T} (-1)^{|T|-|U|} g(U)
    let mut g = vec![Rat::zero(); 1 << n];
    for u in 0u32..(1 << n) {
        g[u as usize] = &v_full - &v.evaluate(full & !u, weights)?;
    }
    let mut f = vec![Rat::zero(); 1 << n];
    let mut negative_witness = None;
    for t in 1u32..(1 << n) {
        let mut acc = Rat::zero();
        // iterate subsets of t
        let mut u = t;
        loop {
            let sign_neg = (t.count_ones() - u.count_ones()) % 2 == 1;
            if sign_neg {
                acc -= &g[u as usize];
            } else {
                acc += &g[u as usize];
            }
            if u == 0 {
                break;
            }
            u = (u - 1) & t;
        }
        if acc.is_negative() && negative_witness.is_none() {
            negative_witness = Some(t);
        }
        f[t as usize] = acc;
    }
    Ok(MoebiusTable { n, representable: negative_witness.is_none(), f, negative_witness })
}

impl MoebiusTable {
    /// `sum over T intersecting S of f(T)`; equals `v(S)` by construction.
    pub fn reconstruct(&self, subset: u32) -> Rat {
        let mut acc = Rat::zero();
        for t in 1u32..(1 << self.n) {
            if t & subset != 0 {
                acc += &self.f[t as usize];
            }
        }
        acc
    }
}

/// Two-firm symmetrization: extend `N` with two markers `x, y` so that one
/// symmetric valuation embeds both originals. The symmetric game has a stable
/// outcome exactly when the original asymmetric game has one.
pub fn symmetrize(v1: &Valuation, v2: &Valuation, n: usize, weights: &[u32], z_prime: &Rat) -> Result<Valuation> {
    let full: u32 = (1 << n) - 1;
    let z = v1.evaluate(full, weights)?.max(v2.evaluate(full, weights)?);
    if z_prime <= &z {
        return Err(Error::precondition(format!(
            "need Z' > Z = {}, got {}",
            format_rat(&z),
            format_rat(z_prime)
        )));
    }
    let zz = &z + z_prime;
    let nn = n + 2;
    let x_bit = 1u32 << n;
    let y_bit = 1u32 << (n + 1);
    let mut table = vec![Rat::zero(); 1 << nn];
    for s in 0u32..(1 << n) {
        table[s as usize] = v1.evaluate(s, weights)? + v2.evaluate(s, weights)?;
        table[(s | x_bit) as usize] = v1.evaluate(s, weights)? + &zz;
        table[(s | y_bit) as usize] = v2.evaluate(s, weights)? + &zz;
        table[(s | x_bit | y_bit) as usize] = &z + &zz;
    }
    Ok(Valuation::Explicit { n: nn, table })
}

/// The two clashing submodular valuations over four workers, their
/// deterministic 2-sparse realizations, and the combined 3-sparse network
/// whose symmetric two-firm game has no stable outcome.
#[derive(Debug, Clone)]
pub struct HardInstances {
    pub v1: Valuation,
    pub v2: Valuation,
    pub h1: InfluenceNetwork,
    pub h2: InfluenceNetwork,
    /// 3-sparse combined network over workers `{0..3, x, y}`
    pub combined: InfluenceNetwork,
    /// symmetric valuation of the combined game (`Z = 4`, `Z' = 5`)
    pub symmetrized: Valuation,
}

pub fn build_ds_fixtures() -> HardInstances {
    let quad = |special: [(u32, u32); 2]| -> Valuation {
        let special_masks: Vec<u32> = special.iter().map(|&(a, b)| (1 << a) | (1 << b)).collect();
        let table = (0u32..16)
            .map(|s| {
                let v = match s.count_ones() {
                    0 => 0,
                    1 => 2,
                    2 => {
                        if special_masks.contains(&s) {
                            4
                        } else {
                            3
                        }
                    }
                    _ => 4,
                };
                Rat::from_integer(BigInt::from(v))
            })
            .collect();
        Valuation::Explicit { n: 4, table }
    };
    let v1 = quad([(0, 2), (1, 3)]);
    let v2 = quad([(0, 1), (2, 3)]);

    // pair nodes a_{01}, a_{12}, a_{23}, a_{30} fed by their two workers
    let pair_net = |pairs: [(usize, usize); 4]| -> InfluenceNetwork {
        let mut edges = Vec::new();
        for (i, &(a, b)) in pairs.iter().enumerate() {
            edges.push((a, 4 + i));
            edges.push((b, 4 + i));
        }
        InfluenceNetwork::deterministic(8, vec![0, 1, 2, 3], &edges).unwrap()
    };
    let h1 = pair_net([(0, 1), (1, 2), (2, 3), (3, 0)]);
    let h2 = pair_net([(0, 2), (2, 1), (1, 3), (3, 0)]);

    // combined: workers 0..3 plus x=4, y=5; nodes 6..9 = A, 10..13 = B, 14..18 = C
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for (i, &(a, b)) in [(0usize, 1usize), (1, 2), (2, 3), (3, 0)].iter().enumerate() {
        edges.push((a, 6 + i));
        edges.push((b, 6 + i));
    }
    for (i, &(a, b)) in [(0usize, 2usize), (2, 1), (1, 3), (3, 0)].iter().enumerate() {
        edges.push((a, 10 + i));
        edges.push((b, 10 + i));
    }
    for u in 10..19 {
        edges.push((4, u)); // x covers B and C
    }
    for u in 6..10 {
        edges.push((5, u)); // y covers A and C
    }
    for u in 14..19 {
        edges.push((5, u));
    }
    let combined = InfluenceNetwork::deterministic(19, vec![0, 1, 2, 3, 4, 5], &edges).unwrap();

    let symmetrized =
        symmetrize(&v1, &v2, 4, &[1; 4], &Rat::from_integer(BigInt::from(5))).unwrap();

    HardInstances { v1, v2, h1, h2, combined, symmetrized }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{rat, rat_int};

    /// The three-worker sparse network used throughout: workers A, B, C and
    /// eight plain nodes with deterministic edges.
    pub fn sparse_example() -> InfluenceNetwork {
        // workers: A=0, B=1, C=2; plain nodes 3..=10 standing for 1..8
        let edges = [
            (2, 3),
            (2, 4),
            (3, 6),
            (1, 4),
            (1, 5),
            (0, 5),
            (4, 7),
            (5, 8),
            (0, 9),
            (2, 9),
            (0, 10),
        ];
        InfluenceNetwork::deterministic(11, vec![0, 1, 2], &edges).unwrap()
    }

    fn lim() -> Limits {
        Limits::default()
    }

    #[test]
    fn exact_influence_on_sparse_example() {
        let h = sparse_example();
        assert_eq!(h.influence_exact(&[0], &lim()).unwrap(), rat_int(4));
        assert_eq!(h.influence_exact(&[1], &lim()).unwrap(), rat_int(4));
        assert_eq!(h.influence_exact(&[2], &lim()).unwrap(), rat_int(5));
        assert_eq!(h.influence_exact(&[0, 2], &lim()).unwrap(), rat_int(8));
        assert_eq!(h.influence_exact(&[], &lim()).unwrap(), rat_int(0));
    }

    #[test]
    fn sparsity_statistics() {
        assert_eq!(sparse_example().sparsity(), 2);
        // disjoint cones
        let h = InfluenceNetwork::deterministic(4, vec![0, 1], &[(0, 2), (1, 3)]).unwrap();
        assert_eq!(h.sparsity(), 1);
        assert_eq!(build_ds_fixtures().combined.sparsity(), 3);
    }

    #[test]
    fn conversion_matches_matrix() {
        let m = network_to_synergy(&sparse_example(), &lim()).unwrap();
        let expect = SynergyMatrix::from_rows(vec![
            vec![rat_int(1), rat_int(2), rat_int(1)],
            vec![rat_int(2), rat_int(0), rat_int(2)],
            vec![rat_int(1), rat_int(2), rat_int(2)],
        ])
        .unwrap();
        assert_eq!(m, expect);
        assert!(verify_synergy_network_equivalence(&m, &sparse_example(), &lim()).unwrap());
    }

    #[test]
    fn probabilistic_pairwise_mass() {
        // two workers sharing one node at probability 1/2 each
        let h = InfluenceNetwork::new(
            3,
            vec![0, 1],
            vec![(0, 2, rat(1, 2)), (1, 2, rat(1, 2))],
        )
        .unwrap();
        let m = network_to_synergy(&h, &lim()).unwrap();
        assert_eq!(*m.get(0, 1), rat(1, 4));
        assert_eq!(*m.get(0, 0), rat(1, 4)); // 1/2 - 1/4
    }

    #[test]
    fn synergy_round_trip() {
        let m = SynergyMatrix::from_rows(vec![
            vec![rat_int(1), rat_int(2), rat_int(1)],
            vec![rat_int(2), rat_int(0), rat_int(2)],
            vec![rat_int(1), rat_int(2), rat_int(2)],
        ])
        .unwrap();
        let h = synergy_to_network(&m).unwrap();
        // 8 helper nodes: one per unit of matrix mass on or above the diagonal
        assert_eq!(h.num_nodes, 3 + 8);
        assert_eq!(h.sparsity(), 2);
        assert_eq!(network_to_synergy(&h, &lim()).unwrap(), m);
        assert!(verify_synergy_network_equivalence(&m, &h, &lim()).unwrap());
        // diagonal matrix: star forest
        let d = SynergyMatrix::from_rows(vec![
            vec![rat_int(2), rat_int(0)],
            vec![rat_int(0), rat_int(3)],
        ])
        .unwrap();
        let hd = synergy_to_network(&d).unwrap();
        assert_eq!(hd.sparsity(), 1);
        assert_eq!(network_to_synergy(&hd, &lim()).unwrap(), d);
    }

    #[test]
    fn monte_carlo_matches_deterministic() {
        let h = sparse_example();
        let (est, se) = h.influence_monte_carlo(&[1], 100, 7).unwrap();
        assert_eq!(est, rat_int(4));
        assert_eq!(se, 0.0);
        // single p=1/2 edge: estimate within 3 standard errors of 1/2
        let h = InfluenceNetwork::new(2, vec![0], vec![(0, 1, rat(1, 2))]).unwrap();
        let (est, se) = h.influence_monte_carlo(&[0], 100_000, 42).unwrap();
        let exact = 0.5f64;
        let e = crate::rational::to_f64(&est);
        assert!((e - exact).abs() <= 3.0 * se, "estimate {e} se {se}");
    }

    #[test]
    fn moebius_negative_mass() {
        // concave size-based table (0,3,6,8) on three workers is not
        // realizable as influence: the triple carries mass -1
        let v = Valuation::Weighted(vec![rat_int(0), rat_int(3), rat_int(6), rat_int(8)]);
        let t = moebius_decomposition(&v, 3, &[1, 1, 1], &lim()).unwrap();
        assert!(!t.representable);
        assert_eq!(t.negative_witness, Some(0b111));
        for s in [0b001u32, 0b010, 0b100] {
            assert_eq!(t.f[s as usize], rat_int(2));
        }
        for s in [0b011u32, 0b101, 0b110] {
            assert_eq!(t.f[s as usize], rat_int(1));
        }
        assert_eq!(t.f[0b111], rat_int(-1));
        // reconstruction identity holds regardless
        for s in 0u32..8 {
            assert_eq!(t.reconstruct(s), v.evaluate(s, &[1, 1, 1]).unwrap());
        }
        // additive valuation: singleton masses only
        let add = Valuation::Weighted(vec![rat_int(0), rat_int(2), rat_int(4), rat_int(6)]);
        let t = moebius_decomposition(&add, 3, &[1, 1, 1], &lim()).unwrap();
        assert!(t.representable);
        assert!(t.f.iter().skip(1).filter(|f| !f.is_zero()).count() == 3);
    }

    #[test]
    fn ds_fixture_values() {
        let hard = build_ds_fixtures();
        let w = [1u32; 4];
        assert_eq!(hard.v1.evaluate(0b0101, &w).unwrap(), rat_int(4));
        assert_eq!(hard.v1.evaluate(0b0011, &w).unwrap(), rat_int(3));
        assert_eq!(hard.v2.evaluate(0b0011, &w).unwrap(), rat_int(4));
        // the networks realize the valuations on every subset
        for s in 0u32..16 {
            let seeds: Vec<usize> = mask_members(s).collect();
            assert_eq!(
                hard.h1.influence_exact(&seeds, &lim()).unwrap(),
                hard.v1.evaluate(s, &w).unwrap()
            );
            assert_eq!(
                hard.h2.influence_exact(&seeds, &lim()).unwrap(),
                hard.v2.evaluate(s, &w).unwrap()
            );
        }
        // combined network realizes the symmetrized valuation
        let w6 = [1u32; 6];
        for s in 0u32..64 {
            let seeds: Vec<usize> = mask_members(s).collect();
            assert_eq!(
                hard.combined.influence_exact(&seeds, &lim()).unwrap(),
                hard.symmetrized.evaluate(s, &w6).unwrap(),
                "subset {s:b}"
            );
        }
    }

    #[test]
    fn symmetrize_table_cases() {
        let hard = build_ds_fixtures();
        let w6 = [1u32; 6];
        let x_bit = 1u32 << 4;
        let y_bit = 1u32 << 5;
        // marker pair pins the value at 2Z + Z'
        assert_eq!(hard.symmetrized.evaluate(x_bit | y_bit, &w6).unwrap(), rat_int(13));
        assert_eq!(hard.symmetrized.evaluate(x_bit | y_bit | 0b1111, &w6).unwrap(), rat_int(13));
        // v({x}) = Z + Z'
        assert_eq!(hard.symmetrized.evaluate(x_bit, &w6).unwrap(), rat_int(9));
        // Z' must exceed Z
        assert!(symmetrize(&hard.v1, &hard.v2, 4, &[1; 4], &rat_int(4)).is_err());
    }
}
