//! Welfare-maximizing partitions and the fractional relaxation.
//!
//! Weighted games get a pseudo-polynomial DP over per-firm weight profiles;
//! general games get type-aware enumeration of assignment count matrices.
//! Optimizers never idle a worker (valuations are monotone, so an idle pool
//! cannot raise welfare); the verifier still accepts partitions with idle
//! workers. Ties are broken toward the lexicographically smallest assignment
//! vector so that every artifact downstream is reproducible.

use std::collections::BTreeSet;

use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{mask_members, CompetitionGame, Limits, Partition, TypeStructure};
use crate::lp::{Direction, LinearProgram, LpOutcome, LpRow, Relation};
use crate::network::SynergyMatrix;
use crate::rational::{rat_serde, Rat};

/// Per-firm total weights of a partition together with its welfare.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightProfile {
    pub firm_weights: Vec<u64>,
    #[serde(with = "rat_serde")]
    pub welfare: Rat,
}

/// Fractional vs integral optimum of the allocation LP.
#[derive(Debug, Clone, Serialize)]
pub struct GapReport {
    #[serde(with = "rat_serde")]
    pub integral: Rat,
    #[serde(with = "rat_serde")]
    pub fractional: Rat,
    /// `fractional / integral`; equals one exactly when stable payments exist
    #[serde(with = "rat_serde")]
    pub ratio: Rat,
}

/// Layered reachability DP over per-firm weight profiles.
///
/// States are profiles `(t_1, .., t_k)` packed in base `W + 1`; layer `j`
/// holds the profiles reachable by assigning workers `0..j`. One partition
/// per cell is enough for optimization; realization walks the layers
/// backward, which also yields the lexicographically smallest assignment.
pub struct WeightedDp {
    k: usize,
    base: u64,
    states: u64,
    strides: Vec<u64>,
    layers: Vec<Vec<u64>>, // bitsets
    weights: Vec<u32>,
}

fn bit_get(bits: &[u64], idx: u64) -> bool {
    bits[(idx / 64) as usize] >> (idx % 64) & 1 == 1
}

fn bit_set(bits: &mut [u64], idx: u64) {
    bits[(idx / 64) as usize] |= 1 << (idx % 64);
}

impl WeightedDp {
    pub fn run(game: &CompetitionGame, limits: &Limits) -> Result<Self> {
        if !game.all_weighted() {
            return Err(Error::precondition("weighted DP needs weighted valuations"));
        }
        let k = game.k();
        let w = game.total_weight();
        let base = w + 1;
        let states = base
            .checked_pow(k as u32)
            .filter(|&s| s <= limits.dp_states)
            .ok_or_else(|| Error::guard("weighted DP states", limits.dp_states, u64::MAX))?;
        if states > limits.dp_states {
            return Err(Error::guard("weighted DP states", limits.dp_states, states));
        }
        let strides: Vec<u64> = (0..k).map(|i| base.pow(i as u32)).collect();
        let words = (states as usize + 63) / 64;
        let mut layers = Vec::with_capacity(game.n() + 1);
        let mut cur = vec![0u64; words];
        bit_set(&mut cur, 0);
        layers.push(cur.clone());
        for &wj in &game.weights {
            let mut next = vec![0u64; words];
            for s in 0..states {
                if bit_get(&cur, s) {
                    for i in 0..k {
                        next_state(s, wj as u64, &strides, i, &mut next);
                    }
                }
            }
            layers.push(next.clone());
            cur = next;
        }
        Ok(WeightedDp { k, base, states, strides, layers, weights: game.weights.clone() })
    }

    fn unpack(&self, mut s: u64) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.k);
        for _ in 0..self.k {
            out.push(s % self.base);
            s /= self.base;
        }
        out
    }

    /// Reachable full-assignment profiles.
    pub fn final_profiles(&self) -> Vec<Vec<u64>> {
        let last = self.layers.last().unwrap();
        let mut out = Vec::new();
        for s in 0..self.states {
            if bit_get(last, s) {
                out.push(self.unpack(s));
            }
        }
        out
    }

    /// Lexicographically smallest assignment whose final profile satisfies
    /// the predicate; `None` when no reachable profile does.
    pub fn realize_lex_min(&self, accept: impl Fn(&[u64]) -> bool) -> Option<Partition> {
        let n = self.weights.len();
        let words = self.layers[0].len();
        // backward reachability toward accepted finals
        let mut back: Vec<Vec<u64>> = vec![vec![0; words]; n + 1];
        for s in 0..self.states {
            if bit_get(&self.layers[n], s) && accept(&self.unpack(s)) {
                bit_set(&mut back[n], s);
            }
        }
        if back[n].iter().all(|&w| w == 0) {
            return None;
        }
        for j in (0..n).rev() {
            let wj = self.weights[j] as u64;
            let (front, tail) = back.split_at_mut(j + 1);
            let cur = &mut front[j];
            let nextb = &tail[0];
            for s in 0..self.states {
                if !bit_get(&self.layers[j], s) {
                    continue;
                }
                for i in 0..self.k {
                    let t = s + wj * self.strides[i];
                    if t < self.states && bit_get(nextb, t) {
                        bit_set(cur, s);
                        break;
                    }
                }
            }
        }
        // forward walk picking the smallest firm index that stays reachable
        let mut assignment = Vec::with_capacity(n);
        let mut s = 0u64;
        for j in 0..n {
            let wj = self.weights[j] as u64;
            let mut placed = false;
            for i in 0..self.k {
                let t = s + wj * self.strides[i];
                if t < self.states && bit_get(&back[j + 1], t) {
                    assignment.push((i + 1) as u8);
                    s = t;
                    placed = true;
                    break;
                }
            }
            if !placed {
                return None;
            }
        }
        Some(Partition { assignment })
    }
}

fn next_state(s: u64, w: u64, strides: &[u64], firm: usize, bits: &mut [u64]) {
    let t = s + w * strides[firm];
    bit_set(bits, t);
}

/// Welfare of a weight profile under per-firm tables.
fn profile_welfare(game: &CompetitionGame, profile: &[u64]) -> Rat {
    let mut sw = Rat::zero();
    for (i, v) in game.valuations.iter().enumerate() {
        if let crate::game::Valuation::Weighted(table) = v {
            sw += table[profile[i] as usize].clone();
        }
    }
    sw
}

/// Canonical welfare-maximizing partition of a weighted game, filled
/// worker-by-worker over reachable weight profiles.
pub fn optimal_partition_weighted(
    game: &CompetitionGame,
    limits: &Limits,
) -> Result<(Partition, WeightProfile)> {
    let dp = WeightedDp::run(game, limits)?;
    let finals = dp.final_profiles();
    let best = finals
        .iter()
        .map(|p| profile_welfare(game, p))
        .max()
        .ok_or_else(|| Error::invalid("no reachable profiles"))?;
    let partition = dp
        .realize_lex_min(|p| profile_welfare(game, p) == best)
        .expect("an optimal profile is reachable by construction");
    let firm_weights = partition.firm_weights(game);
    Ok((partition, WeightProfile { firm_weights, welfare: best }))
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k.min(n));
    let mut acc = 1u64;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            let mut v = vec![first];
            v.append(&mut rest);
            out.push(v);
        }
    }
    out
}

/// Build the lexicographically smallest concrete assignment realizing a
/// type-count matrix `counts[class][firm]`.
fn realize_matrix(types: &TypeStructure, counts: &[Vec<usize>], k: usize) -> Vec<u8> {
    let n = types.class_of.len();
    let mut remaining = counts.to_vec();
    let mut assignment = vec![0u8; n];
    for j in 0..n {
        let c = types.class_of[j];
        for i in 0..k {
            if remaining[c][i] > 0 {
                remaining[c][i] -= 1;
                assignment[j] = (i + 1) as u8;
                break;
            }
        }
    }
    assignment
}

/// All welfare maximizers, modulo permuting same-type workers and relabeling
/// equal firms; returned as canonical partitions in assignment order.
pub fn enumerate_optimal_partitions(
    game: &CompetitionGame,
    limits: &Limits,
) -> Result<Vec<Partition>> {
    let k = game.k();
    let types = game.worker_types(limits)?;
    let class_sizes: Vec<usize> = types.classes.iter().map(|c| c.len()).collect();

    let mut bound = 1u64;
    for &s in &class_sizes {
        bound = bound.saturating_mul(binomial((s + k) as u64, k as u64));
        if bound > limits.enum_partitions {
            return Err(Error::guard("partition enumeration", limits.enum_partitions, bound));
        }
    }

    // enumerate count matrices class-by-class
    let per_class: Vec<Vec<Vec<usize>>> =
        class_sizes.iter().map(|&s| compositions(s, k)).collect();
    let mut best: Option<Rat> = None;
    let mut arg: Vec<Vec<Vec<usize>>> = Vec::new();
    let mut stack: Vec<Vec<usize>> = Vec::new();
    fn rec(
        game: &CompetitionGame,
        types: &TypeStructure,
        per_class: &[Vec<Vec<usize>>],
        stack: &mut Vec<Vec<usize>>,
        c: usize,
        best: &mut Option<Rat>,
        arg: &mut Vec<Vec<Vec<usize>>>,
    ) -> Result<()> {
        if c == per_class.len() {
            let k = game.k();
            let mut sw = Rat::zero();
            for i in 0..k {
                // same-type workers are interchangeable, so evaluating on the
                // first members of each class is faithful to the count matrix
                let mut mask = 0u32;
                for (cls, members) in types.classes.iter().enumerate() {
                    for &j in members.iter().take(stack[cls][i]) {
                        mask |= 1 << j;
                    }
                }
                sw += game.value(i, mask)?;
            }
            match best {
                Some(b) if sw < *b => {}
                Some(b) if sw == *b => arg.push(stack.clone()),
                _ => {
                    *best = Some(sw);
                    arg.clear();
                    arg.push(stack.clone());
                }
            }
            return Ok(());
        }
        for comp in &per_class[c] {
            stack.push(comp.clone());
            rec(game, types, per_class, stack, c + 1, best, arg)?;
            stack.pop();
        }
        Ok(())
    }
    rec(game, &types, &per_class, &mut stack, 0, &mut best, &mut arg)?;

    // firm relabeling: permutations that map each firm to an equal-valuation firm
    let perms = firm_permutations(game);
    let mut canon: BTreeSet<Vec<u8>> = BTreeSet::new();
    for matrix in &arg {
        let mut smallest: Option<Vec<u8>> = None;
        for perm in &perms {
            let permuted: Vec<Vec<usize>> = matrix
                .iter()
                .map(|row| {
                    let mut new_row = vec![0usize; k];
                    for (i, &c) in row.iter().enumerate() {
                        new_row[perm[i]] = c;
                    }
                    new_row
                })
                .collect();
            let assignment = realize_matrix(&types, &permuted, k);
            if smallest.as_ref().map_or(true, |s| assignment < *s) {
                smallest = Some(assignment);
            }
        }
        canon.insert(smallest.unwrap());
    }
    Ok(canon.into_iter().map(|assignment| Partition { assignment }).collect())
}

/// All permutations of firms that only swap firms with identical valuations.
fn firm_permutations(game: &CompetitionGame) -> Vec<Vec<usize>> {
    let k = game.k();
    let mut perms: Vec<Vec<usize>> = vec![vec![]];
    for i in 0..k {
        let mut next = Vec::new();
        for p in &perms {
            for target in 0..k {
                if p.contains(&target) {
                    continue;
                }
                if game.valuations[i] == game.valuations[target] {
                    let mut q = p.clone();
                    q.push(target);
                    next.push(q);
                }
            }
        }
        perms = next;
    }
    if perms.is_empty() {
        perms.push((0..k).collect());
    }
    perms
}

/// Exhaustive maximal cut of a symmetric two-firm synergy game. Welfare of a
/// cut partition equals total matrix mass plus the cut weight, so the optimal
/// partition is a maximal cut; returns the canonical one.
pub fn max_cut_two_firm(m: &SynergyMatrix, limits: &Limits) -> Result<(Partition, Rat)> {
    let n = m.n;
    if n > limits.maxcut_n {
        return Err(Error::guard("exhaustive max-cut", limits.maxcut_n as u64, n as u64));
    }
    if n == 0 {
        return Err(Error::precondition("empty synergy matrix"));
    }
    let mut best: Option<Rat> = None;
    let mut best_assignment: Option<Vec<u8>> = None;
    // worker 0 pinned to firm 1; mirrors are firm relabelings
    for half in 0u32..(1 << (n - 1)) {
        let side1 = (half << 1) | 1;
        let mut cut = Rat::zero();
        for a in mask_members(side1) {
            for b in 0..n {
                if side1 >> b & 1 == 0 {
                    cut += m.get(a, b);
                }
            }
        }
        let assignment: Vec<u8> =
            (0..n).map(|j| if side1 >> j & 1 == 1 { 1 } else { 2 }).collect();
        let better = match &best {
            None => true,
            Some(b) => {
                cut > *b || (cut == *b && assignment < *best_assignment.as_ref().unwrap())
            }
        };
        if better {
            best = Some(cut);
            best_assignment = Some(assignment);
        }
    }
    Ok((Partition { assignment: best_assignment.unwrap() }, best.unwrap()))
}

/// Best integral welfare over type-count matrices (shared by the gap report).
pub fn optimal_welfare(game: &CompetitionGame, limits: &Limits) -> Result<Rat> {
    if game.all_weighted() {
        let dp = WeightedDp::run(game, limits)?;
        return dp
            .final_profiles()
            .iter()
            .map(|p| profile_welfare(game, p))
            .max()
            .ok_or_else(|| Error::invalid("no profiles"));
    }
    let parts = enumerate_optimal_partitions(game, limits)?;
    parts[0].social_welfare(game)
}

/// Exact fractional allocation LP: one variable per (firm, bundle), firm mass
/// at most one, worker coverage at most one. Bundles are collapsed to
/// type-count vectors, which preserves the optimum by symmetrization.
pub fn configuration_lp(game: &CompetitionGame, limits: &Limits) -> Result<GapReport> {
    let n = game.n();
    if n > limits.config_n {
        return Err(Error::guard("configuration LP", limits.config_n as u64, n as u64));
    }
    let k = game.k();
    let types = game.worker_types(limits)?;
    let class_sizes: Vec<usize> = types.classes.iter().map(|c| c.len()).collect();
    let t = class_sizes.len();

    // bundles: all type-count vectors
    let mut bundles: Vec<Vec<usize>> = vec![vec![]];
    for &s in &class_sizes {
        let mut next = Vec::new();
        for b in &bundles {
            for c in 0..=s {
                let mut v = b.clone();
                v.push(c);
                next.push(v);
            }
        }
        bundles = next;
    }
    let nb = bundles.len();
    let nv = k * nb;
    let mut objective = vec![Rat::zero(); nv];
    for i in 0..k {
        for (bi, bundle) in bundles.iter().enumerate() {
            let mut mask = 0u32;
            for (cls, &cnt) in bundle.iter().enumerate() {
                for &j in types.classes[cls].iter().take(cnt) {
                    mask |= 1 << j;
                }
            }
            objective[i * nb + bi] = game.value(i, mask)?;
        }
    }
    let mut rows = Vec::with_capacity(k + t);
    for i in 0..k {
        rows.push(LpRow {
            coeffs: (0..nb).map(|bi| (i * nb + bi, Rat::from_integer(1.into()))).collect(),
            rel: Relation::Le,
            rhs: Rat::from_integer(1.into()),
        });
    }
    for cls in 0..t {
        let coeffs: Vec<(usize, Rat)> = (0..k)
            .flat_map(|i| {
                bundles.iter().enumerate().filter_map(move |(bi, b)| {
                    if b[cls] > 0 {
                        Some((i * nb + bi, Rat::from_integer((b[cls] as i64).into())))
                    } else {
                        None
                    }
                })
            })
            .collect();
        rows.push(LpRow {
            coeffs,
            rel: Relation::Le,
            rhs: Rat::from_integer((class_sizes[cls] as i64).into()),
        });
    }
    let lp = LinearProgram { num_vars: nv, rows, objective: Some((Direction::Maximize, objective)) };
    let sol = match crate::lp::solve(&lp)? {
        LpOutcome::Optimal(s) => s,
        // x = 0 is always feasible, and total value is bounded
        _ => return Err(Error::invalid("allocation LP must have an optimum")),
    };
    let integral = optimal_welfare(game, limits)?;
    let fractional = sol.objective;
    if fractional < integral {
        return Err(Error::invalid("relaxation below integral optimum"));
    }
    let ratio = if integral.is_zero() { Rat::from_integer(1.into()) } else { &fractional / &integral };
    Ok(GapReport { integral, fractional, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Valuation;
    use crate::rational::{rat, rat_int};

    fn capped_game(weights: Vec<u32>, caps: &[i64]) -> CompetitionGame {
        let w: u64 = weights.iter().map(|&x| x as u64).sum();
        let vals = caps
            .iter()
            .map(|&c| Valuation::Weighted((0..=w as i64).map(|x| rat_int(x.min(c))).collect()))
            .collect();
        CompetitionGame::new(weights, vals).unwrap()
    }

    #[test]
    fn four_firm_profile() {
        let g = capped_game(vec![2, 2, 2, 2, 2, 3, 3, 3, 5], &[6, 6, 6, 6]);
        let (p, prof) = optimal_partition_weighted(&g, &Limits::default()).unwrap();
        let mut fw = prof.firm_weights.clone();
        fw.sort();
        assert_eq!(fw, vec![5, 6, 6, 7]);
        assert_eq!(prof.welfare, rat_int(23));
        assert_eq!(p.social_welfare(&g).unwrap(), rat_int(23));
    }

    #[test]
    fn single_worker_two_firms() {
        let g = CompetitionGame::new(
            vec![3],
            vec![
                Valuation::Weighted(vec![rat_int(0), rat_int(0), rat_int(0), rat_int(5)]),
                Valuation::Weighted(vec![rat_int(0), rat_int(0), rat_int(0), rat_int(4)]),
            ],
        )
        .unwrap();
        let (p, _) = optimal_partition_weighted(&g, &Limits::default()).unwrap();
        assert_eq!(p.assignment, vec![1]);
    }

    #[test]
    fn enumerate_capped_games() {
        // exactly two optimal partitions up to same-type permutation and
        // firm relabeling for the four-firm capped game
        let g = capped_game(vec![2, 2, 2, 2, 2, 3, 3, 3, 5], &[6, 6, 6, 6]);
        let parts = enumerate_optimal_partitions(&g, &Limits::default()).unwrap();
        assert_eq!(parts.len(), 2);
        for p in &parts {
            assert_eq!(p.social_welfare(&g).unwrap(), rat_int(23));
            let mut fw = p.firm_weights(&g);
            fw.sort();
            assert_eq!(fw, vec![5, 6, 6, 7]);
        }
        // homogeneous symmetric, concave, n=3, k=2: split sizes {2,1}
        let g = CompetitionGame::new(
            vec![1, 1, 1],
            vec![Valuation::Weighted(vec![rat_int(0), rat_int(4), rat_int(6), rat_int(7)]); 2],
        )
        .unwrap();
        let parts = enumerate_optimal_partitions(&g, &Limits::default()).unwrap();
        assert_eq!(parts.len(), 1);
        let mut fw = parts[0].firm_weights(&g);
        fw.sort();
        assert_eq!(fw, vec![1, 2]);
    }

    #[test]
    fn dp_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..60 {
            let n = rng.gen_range(2..=7);
            let k = rng.gen_range(2..=3);
            let weights: Vec<u32> = (0..n).map(|_| rng.gen_range(1..=4)).collect();
            let w: u64 = weights.iter().map(|&x| x as u64).sum();
            let vals: Vec<Valuation> = (0..k)
                .map(|_| {
                    let mut incs: Vec<Rat> =
                        (0..w).map(|_| crate::rational::uniform_unit(&mut rng)).collect();
                    incs.sort_by(|a, b| b.cmp(a));
                    let mut tab = vec![Rat::zero()];
                    for d in incs {
                        let last = tab.last().unwrap().clone();
                        tab.push(last + d);
                    }
                    Valuation::Weighted(tab)
                })
                .collect();
            let g = CompetitionGame::new(weights, vals).unwrap();
            let (_, prof) = optimal_partition_weighted(&g, &Limits::default()).unwrap();
            // brute force over k^n assignments
            let mut best = Rat::zero();
            for code in 0..(k as u64).pow(n as u32) {
                let mut c = code;
                let mut assignment = vec![0u8; n];
                for a in assignment.iter_mut() {
                    *a = (c % k as u64) as u8 + 1;
                    c /= k as u64;
                }
                let p = Partition { assignment };
                let sw = p.social_welfare(&g).unwrap();
                if sw > best {
                    best = sw;
                }
            }
            assert_eq!(prof.welfare, best);
        }
    }

    #[test]
    fn max_cut_examples() {
        let m = SynergyMatrix::from_rows(vec![
            vec![rat_int(1), rat_int(2), rat_int(1)],
            vec![rat_int(2), rat_int(0), rat_int(2)],
            vec![rat_int(1), rat_int(2), rat_int(2)],
        ])
        .unwrap();
        let (p, cut) = max_cut_two_firm(&m, &Limits::default()).unwrap();
        assert_eq!(p.assignment, vec![1, 2, 1]);
        assert_eq!(cut, rat_int(4));
        // single worker
        let m1 = SynergyMatrix::from_rows(vec![vec![rat_int(3)]]).unwrap();
        let (p1, c1) = max_cut_two_firm(&m1, &Limits::default()).unwrap();
        assert_eq!(p1.assignment, vec![1]);
        assert_eq!(c1, rat_int(0));
        // triangle with edge weights 1,2,3: max cut 5 isolates the vertex
        // shared by the 2- and 3-edges
        let mt = SynergyMatrix::from_rows(vec![
            vec![rat_int(0), rat_int(1), rat_int(2)],
            vec![rat_int(1), rat_int(0), rat_int(3)],
            vec![rat_int(2), rat_int(3), rat_int(0)],
        ])
        .unwrap();
        let (pt, ct) = max_cut_two_firm(&mt, &Limits::default()).unwrap();
        assert_eq!(ct, rat_int(5));
        // worker 2 (incident to weights 2 and 3) stands alone
        assert_eq!(pt.assignment, vec![1, 1, 2]);
    }

    #[test]
    fn configuration_gap_capped() {
        let g = capped_game(vec![2, 2, 2, 2, 2, 3, 3, 3, 5], &[6, 6, 6, 6]);
        let gap = configuration_lp(&g, &Limits::default()).unwrap();
        assert_eq!(gap.integral, rat_int(23));
        assert_eq!(gap.fractional, rat(47, 2));
        assert_eq!(gap.ratio, rat(47, 46));
    }

    #[test]
    fn configuration_gap_single_firm() {
        let mut limits = Limits::default();
        limits.allow_single_firm = true;
        let g = CompetitionGame::with_limits(
            vec![1, 2],
            vec![Valuation::Weighted(vec![rat_int(0), rat_int(2), rat_int(3), rat_int(4)])],
            &limits,
        )
        .unwrap();
        let gap = configuration_lp(&g, &limits).unwrap();
        assert_eq!(gap.ratio, rat_int(1));
        assert_eq!(gap.integral, rat_int(4));
    }
}
