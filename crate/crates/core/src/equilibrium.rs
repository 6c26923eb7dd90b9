//! Stability LPs, outcome verification, and closed-form equilibria.
//!
//! An outcome `(P, x)` is stable exactly when no firm can swap to a better
//! bundle at the posted payments: for every firm `i` and every bundle `S'`,
//! `v_i(S_i) - x(S_i) >= v_i(S') - x(S')`. Those inequalities form the
//! stability LP of a partition. A first welfare argument pins stable
//! partitions to welfare maximizers, so the solver enumerates optimal
//! partitions and decides each one's LP exactly; nonexistence is declared
//! only after every optimal partition is refuted.

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{
    is_concave_weighted, mask_members, CompetitionGame, Limits, Outcome, Partition,
    TypeStructure, Valuation,
};
use crate::lp::{solve_dualized, LpOutcome, LpRow, Relation};
use crate::network::SynergyMatrix;
use crate::partition::{enumerate_optimal_partitions, max_cut_two_firm, WeightedDp};
use crate::rational::{format_rat, rat_serde, Rat};

/// Objective for a stability solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StabilityObjective {
    #[default]
    Feasibility,
    MinimizeTotalPay,
    MaximizeTotalPay,
}

/// A deviation constraint: firm `firm` dismisses `dismissed` and recruits
/// `recruited`. With type collapse the two sets are per-class counts.
#[derive(Debug, Clone)]
pub struct DeviationTag {
    pub firm: usize,
    pub dismissed: Vec<usize>,
    pub recruited: Vec<usize>,
}

/// The stability LP of `(G, P)`: one variable per worker (or per worker type
/// when collapsed), one row per distinct firm deviation, plus explicit
/// individual-rationality rows `x >= 0`.
pub struct StabilityLp {
    /// members per variable: singleton lists without collapse, classes with
    pub var_members: Vec<Vec<usize>>,
    /// objective coefficient per variable (class size)
    pub var_sizes: Vec<u64>,
    pub rows: Vec<LpRow>,
    pub tags: Vec<DeviationTag>,
    pub objective: StabilityObjective,
    /// proportionality ties `x_j / w_j` constant added as equality rows
    pub proportional: bool,
    weights: Vec<u32>,
}

impl StabilityLp {
    pub fn num_vars(&self) -> usize {
        self.var_members.len()
    }

    /// Plain-text listing for debugging.
    pub fn listing(&self) -> String {
        let mut out = String::new();
        for (v, members) in self.var_members.iter().enumerate() {
            out.push_str(&format!("var x{v} = workers {members:?}\n"));
        }
        for v in 0..self.num_vars() {
            out.push_str(&format!("x{v} >= 0\n"));
        }
        for (row, tag) in self.rows.iter().zip(&self.tags) {
            let lhs: Vec<String> = row
                .coeffs
                .iter()
                .map(|(j, c)| format!("{}*x{}", format_rat(c), j))
                .collect();
            out.push_str(&format!(
                "firm {} dismiss {:?} recruit {:?}:  {} >= {}\n",
                tag.firm,
                tag.dismissed,
                tag.recruited,
                lhs.join(" + "),
                format_rat(&row.rhs),
            ));
        }
        out
    }

    /// Expand a per-variable solution into per-worker payments.
    fn expand(&self, x: &[Rat]) -> Vec<Rat> {
        let mut payments = vec![Rat::zero(); self.weights.len()];
        for (v, members) in self.var_members.iter().enumerate() {
            for &j in members {
                payments[j] = x[v].clone();
            }
        }
        payments
    }
}

/// Build the stability LP for a partition. With `collapse`, variables range
/// over worker types and deviations over per-type counts, which shrinks the
/// program without changing feasibility or optimal totals (same-type workers
/// in different firms must be paid equally in any stable outcome, and
/// within-firm payments may be averaged).
pub fn build_stability_lp(
    game: &CompetitionGame,
    partition: &Partition,
    collapse: bool,
    objective: StabilityObjective,
    proportional: bool,
    limits: &Limits,
) -> Result<StabilityLp> {
    let n = game.n();
    let types = if collapse { game.worker_types(limits)? } else { TypeStructure::singletons(n) };
    let t = types.classes.len();
    let var_sizes: Vec<u64> = types.classes.iter().map(|c| c.len() as u64).collect();

    let mut rows = Vec::new();
    let mut tags = Vec::new();
    if collapse {
        let mut bound = 1u64;
        for c in &types.classes {
            bound = bound.saturating_mul(c.len() as u64 + 1);
            if bound.saturating_mul(game.k() as u64) > limits.enum_partitions {
                return Err(Error::guard(
                    "stability deviation enumeration",
                    limits.enum_partitions,
                    bound,
                ));
            }
        }
        for firm in 0..game.k() {
            let own = partition.firm_mask(firm);
            let own_counts: Vec<usize> = types
                .classes
                .iter()
                .map(|c| c.iter().filter(|&&j| own >> j & 1 == 1).count())
                .collect();
            let v_own = game.value(firm, own)?;
            // all per-type bundle count vectors
            let mut alphas: Vec<Vec<usize>> = vec![vec![]];
            for c in 0..t {
                let mut next = Vec::new();
                for a in &alphas {
                    for cnt in 0..=types.classes[c].len() {
                        let mut b = a.clone();
                        b.push(cnt);
                        next.push(b);
                    }
                }
                alphas = next;
            }
            for alpha in alphas {
                if alpha == own_counts {
                    continue;
                }
                let mut mask = 0u32;
                for (c, &cnt) in alpha.iter().enumerate() {
                    for &j in types.classes[c].iter().take(cnt) {
                        mask |= 1 << j;
                    }
                }
                let v_new = game.value(firm, mask)?;
                // v_i(S_i) - x(S_i) >= v_i(S') - x(S')
                // in type counts: sum_c (alpha_c - own_c) x_c >= v_new - v_own
                let coeffs: Vec<(usize, Rat)> = (0..t)
                    .filter(|&c| alpha[c] != own_counts[c])
                    .map(|c| (c, Rat::from_integer(((alpha[c] as i64) - (own_counts[c] as i64)).into())))
                    .collect();
                let dismissed: Vec<usize> =
                    (0..t).map(|c| own_counts[c].saturating_sub(alpha[c])).collect();
                let recruited: Vec<usize> =
                    (0..t).map(|c| alpha[c].saturating_sub(own_counts[c])).collect();
                rows.push(LpRow { coeffs, rel: Relation::Ge, rhs: v_new - &v_own });
                tags.push(DeviationTag { firm, dismissed, recruited });
            }
        }
    } else {
        if n > limits.stability_full_n {
            return Err(Error::guard(
                "stability LP size",
                limits.stability_full_n as u64,
                n as u64,
            ));
        }
        for firm in 0..game.k() {
            let own = partition.firm_mask(firm);
            let v_own = game.value(firm, own)?;
            for bundle in 0u32..(1 << n) {
                if bundle == own {
                    continue;
                }
                let v_new = game.value(firm, bundle)?;
                let mut coeffs = Vec::new();
                for j in 0..n {
                    let in_new = bundle >> j & 1 == 1;
                    let in_own = own >> j & 1 == 1;
                    if in_new != in_own {
                        coeffs.push((j, Rat::from_integer(if in_new { 1.into() } else { (-1i32).into() })));
                    }
                }
                let dismissed: Vec<usize> = mask_members(own & !bundle).collect();
                let recruited: Vec<usize> = mask_members(bundle & !own).collect();
                rows.push(LpRow { coeffs, rel: Relation::Ge, rhs: v_new - &v_own });
                tags.push(DeviationTag { firm, dismissed, recruited });
            }
        }
    }

    if proportional {
        // w_{j'} x_j - w_j x_{j'} = 0 between consecutive variables; with
        // collapse the weight of a variable is its class weight
        let var_weight = |v: usize| -> u64 {
            let j = types.classes[v][0];
            game.weights[j] as u64
        };
        for v in 1..t {
            rows.push(LpRow {
                coeffs: vec![
                    (0, Rat::from_integer((var_weight(v) as i64).into())),
                    (v, -Rat::from_integer((var_weight(0) as i64).into())),
                ],
                rel: Relation::Eq,
                rhs: Rat::zero(),
            });
            tags.push(DeviationTag { firm: usize::MAX, dismissed: vec![], recruited: vec![] });
        }
    }

    Ok(StabilityLp {
        var_members: types.classes,
        var_sizes,
        rows,
        tags,
        objective,
        proportional,
        weights: game.weights.clone(),
    })
}

#[derive(Debug, Clone)]
pub enum StabilityResult {
    Feasible { payments: Vec<Rat>, total: Rat },
    Infeasible { certificate: Vec<DeviationTag> },
}

impl StabilityResult {
    pub fn feasible(&self) -> Option<(&Vec<Rat>, &Rat)> {
        match self {
            StabilityResult::Feasible { payments, total } => Some((payments, total)),
            _ => None,
        }
    }
}

/// Solve a stability LP exactly. Feasibility is decided exactly; infeasible
/// programs come back with a best-effort irreducible conflicting subset found
/// by greedy row deletion.
pub fn solve_stability_lp(lp: &StabilityLp) -> Result<StabilityResult> {
    let t = lp.num_vars();
    let objective: Vec<Rat> = match lp.objective {
        StabilityObjective::Feasibility => vec![Rat::zero(); t],
        StabilityObjective::MinimizeTotalPay => {
            lp.var_sizes.iter().map(|&s| Rat::from_integer((s as i64).into())).collect()
        }
        StabilityObjective::MaximizeTotalPay => {
            lp.var_sizes.iter().map(|&s| -Rat::from_integer((s as i64).into())).collect()
        }
    };
    match solve_dualized(t, &lp.rows, &objective)? {
        LpOutcome::Optimal(sol) => {
            let payments = lp.expand(&sol.x);
            let total: Rat = payments.iter().sum();
            Ok(StabilityResult::Feasible { payments, total })
        }
        LpOutcome::Infeasible => {
            // deletion filter: drop rows whose removal keeps the conflict
            let mut keep: Vec<usize> = (0..lp.rows.len()).collect();
            let mut i = 0;
            while i < keep.len() {
                let mut candidate = keep.clone();
                candidate.remove(i);
                let rows: Vec<LpRow> = candidate.iter().map(|&r| lp.rows[r].clone()).collect();
                let still = matches!(
                    solve_dualized(t, &rows, &vec![Rat::zero(); t])?,
                    LpOutcome::Infeasible
                );
                if still {
                    keep = candidate;
                } else {
                    i += 1;
                }
            }
            Ok(StabilityResult::Infeasible {
                certificate: keep.into_iter().map(|r| lp.tags[r].clone()).collect(),
            })
        }
        LpOutcome::Unbounded => Err(Error::invalid("stability LP cannot be unbounded")),
    }
}

/// Maximum profit any firm can gain by swapping to its best bundle at the
/// posted payments; zero exactly when the outcome satisfies every stability
/// row. Normalized gain divides by the deviating firm's current profit.
#[derive(Debug, Clone, Serialize)]
pub struct DeviationReport {
    pub firm: usize,
    /// best alternative bundle for that firm
    pub bundle: Vec<usize>,
    #[serde(with = "rat_serde")]
    pub gain: Rat,
    /// `gain / r_firm`; `None` when that profit is not positive
    #[serde(with = "crate::rational::rat_opt_serde")]
    pub normalized_gain: Option<Rat>,
}

/// Best achievable profit `max_S v(S) - x(S)` for one firm, with a witness.
fn best_bundle(
    game: &CompetitionGame,
    firm: usize,
    payments: &[Rat],
    limits: &Limits,
) -> Result<(u32, Rat)> {
    let n = game.n();
    if let Valuation::Weighted(table) = &game.valuations[firm] {
        // min cost to reach each total weight, then scan the table
        let w = game.total_weight() as usize;
        let mut cost: Vec<Option<Rat>> = vec![None; w + 1];
        let mut pick: Vec<u32> = vec![0; w + 1];
        cost[0] = Some(Rat::zero());
        for j in 0..n {
            let wj = game.weights[j] as usize;
            for tot in (wj..=w).rev() {
                if let Some(c) = cost[tot - wj].clone() {
                    let cand = c + &payments[j];
                    if cost[tot].as_ref().map_or(true, |cur| cand < *cur) {
                        cost[tot] = Some(cand);
                        pick[tot] = pick[tot - wj] | 1 << j;
                    }
                }
            }
        }
        let mut best: Option<(u32, Rat)> = None;
        for tot in 0..=w {
            if let Some(c) = &cost[tot] {
                let profit = &table[tot] - c;
                if best.as_ref().map_or(true, |(_, b)| profit > *b) {
                    best = Some((pick[tot], profit));
                }
            }
        }
        Ok(best.unwrap())
    } else {
        if n > limits.explicit_n {
            return Err(Error::guard("deviation enumeration", limits.explicit_n as u64, n as u64));
        }
        let mut best: Option<(u32, Rat)> = None;
        for bundle in 0u32..(1 << n) {
            let cost: Rat = mask_members(bundle).map(|j| payments[j].clone()).sum();
            let profit = game.value(firm, bundle)? - cost;
            if best.as_ref().map_or(true, |(_, b)| profit > *b) {
                best = Some((bundle, profit));
            }
        }
        Ok(best.unwrap())
    }
}

pub fn deviation_gap(
    game: &CompetitionGame,
    outcome: &Outcome,
    limits: &Limits,
) -> Result<DeviationReport> {
    let profits = outcome.firm_profits(game)?;
    let mut report: Option<DeviationReport> = None;
    for firm in 0..game.k() {
        let (bundle, best) = best_bundle(game, firm, &outcome.payments, limits)?;
        let gain = (&best - &profits[firm]).max(Rat::zero());
        let better = report.as_ref().map_or(true, |r| gain > r.gain);
        if better {
            let normalized_gain =
                if profits[firm].is_positive() { Some(&gain / &profits[firm]) } else { None };
            report = Some(DeviationReport {
                firm,
                bundle: mask_members(bundle).collect(),
                gain,
                normalized_gain,
            });
        }
    }
    Ok(report.unwrap())
}

/// Result of searching every optimal partition for stable payments.
#[derive(Debug)]
pub enum PspeSearch {
    Found { outcome: Outcome, total_pay: Rat, partitions_tried: usize },
    Nonexistent { refutations: Vec<(Partition, Vec<DeviationTag>)> },
}

/// Find a stable outcome or refute existence. Every optimal partition is
/// tried (stability forces welfare maximization, so this search is
/// complete). With a total-pay objective the best feasible optimal partition
/// is returned, so the minimize answer is the least any stable outcome pays.
pub fn find_pspe(
    game: &CompetitionGame,
    objective: StabilityObjective,
    limits: &Limits,
) -> Result<PspeSearch> {
    find_pspe_with(game, objective, false, limits)
}

pub fn find_pspe_with(
    game: &CompetitionGame,
    objective: StabilityObjective,
    proportional: bool,
    limits: &Limits,
) -> Result<PspeSearch> {
    let partitions = enumerate_optimal_partitions(game, limits)?;
    let collapse = true;
    let mut refutations = Vec::new();
    let mut best: Option<(Outcome, Rat)> = None;
    let tried = partitions.len();
    for p in partitions {
        let lp = build_stability_lp(game, &p, collapse, objective, proportional, limits)?;
        match solve_stability_lp(&lp)? {
            StabilityResult::Feasible { payments, total } => {
                let outcome = Outcome { partition: p, payments };
                match objective {
                    StabilityObjective::Feasibility => {
                        return Ok(PspeSearch::Found { outcome, total_pay: total, partitions_tried: tried });
                    }
                    StabilityObjective::MinimizeTotalPay => {
                        if best.as_ref().map_or(true, |(_, t)| total < *t) {
                            best = Some((outcome, total));
                        }
                    }
                    StabilityObjective::MaximizeTotalPay => {
                        if best.as_ref().map_or(true, |(_, t)| total > *t) {
                            best = Some((outcome, total));
                        }
                    }
                }
            }
            StabilityResult::Infeasible { certificate } => {
                refutations.push((p, certificate));
            }
        }
    }
    match best {
        Some((outcome, total)) => {
            Ok(PspeSearch::Found { outcome, total_pay: total, partitions_tried: tried })
        }
        None => Ok(PspeSearch::Nonexistent { refutations }),
    }
}

/// Diagnostics of the two-firm proportional construction.
#[derive(Debug, Clone, Serialize)]
pub struct TwoFirmConstruction {
    pub firm_weights: [u64; 2],
    /// lightest member weight per firm (`None` for an empty side)
    pub lightest: [Option<u64>; 2],
    /// normalized marginal of the lightest own worker below the threshold
    #[serde(with = "crate::rational::rat_vec_serde")]
    pub slope_below: Vec<Rat>,
    /// normalized marginal of the other side's lightest worker above it
    #[serde(with = "crate::rational::rat_vec_serde")]
    pub slope_above: Vec<Rat>,
    /// first step length at which the upward chord drops under the other
    /// side's below-slope, and that chord's value
    pub step: [Option<u64>; 2],
    #[serde(with = "crate::rational::rat_vec_serde")]
    pub step_slope: Vec<Rat>,
    /// chosen unit payment
    #[serde(with = "rat_serde")]
    pub unit_payment: Rat,
}

/// Proportional stable outcome for two weighted firms with concave tables.
///
/// Takes a welfare-optimal split with minimal weight gap and pays `delta` per
/// unit of weight, where `delta` is the least slope supported by every chord
/// of either table over the globally achievable subset weights. Going up
/// from its side never beats paying `delta`, and by optimality plus
/// complement-achievability neither does going down, so the verifier's gap is
/// zero by construction (and asserted).
pub fn two_firm_weighted_pspe(
    game: &CompetitionGame,
    limits: &Limits,
) -> Result<(Outcome, TwoFirmConstruction)> {
    if game.k() != 2 {
        return Err(Error::precondition("two-firm construction needs exactly two firms"));
    }
    let tables: Vec<&Vec<Rat>> = game
        .valuations
        .iter()
        .map(|v| match v {
            Valuation::Weighted(t) => Ok(t),
            _ => Err(Error::precondition("two-firm construction needs weighted valuations")),
        })
        .collect::<Result<_>>()?;
    for t in &tables {
        if !is_concave_weighted(t) {
            return Err(Error::precondition("two-firm construction needs concave tables"));
        }
    }
    let w = game.total_weight();
    // achievable subset weights
    let mut achievable = vec![false; w as usize + 1];
    achievable[0] = true;
    for &wj in &game.weights {
        for tot in (wj as usize..=w as usize).rev() {
            if achievable[tot - wj as usize] {
                achievable[tot] = true;
            }
        }
    }
    // optimal split with minimal gap
    let mut best: Option<Rat> = None;
    for q in 0..=w {
        if !achievable[q as usize] {
            continue;
        }
        let sw = &tables[0][q as usize] + &tables[1][(w - q) as usize];
        if best.as_ref().map_or(true, |b| sw > *b) {
            best = Some(sw);
        }
    }
    let best = best.unwrap();
    let optimal_q: Vec<u64> = (0..=w)
        .filter(|&q| {
            achievable[q as usize]
                && &tables[0][q as usize] + &tables[1][(w - q) as usize] == best
        })
        .collect();
    let min_gap = optimal_q.iter().map(|&q| (2 * q).abs_diff(w)).min().unwrap();
    let chosen: Vec<u64> =
        optimal_q.iter().copied().filter(|&q| (2 * q).abs_diff(w) == min_gap).collect();

    let dp = WeightedDp::run(game, limits)?;
    let partition = dp
        .realize_lex_min(|p| chosen.contains(&p[0]))
        .expect("chosen profile is achievable");
    let q = partition.firm_weights(game);

    // delta bounds from chords over achievable weights
    let mut lo = Rat::zero();
    let mut hi: Option<Rat> = None;
    for i in 0..2 {
        for qp in 0..=w {
            if !achievable[qp as usize] || qp == q[i] {
                continue;
            }
            let chord = (&tables[i][qp as usize] - &tables[i][q[i] as usize])
                / Rat::from_integer((qp as i64 - q[i] as i64).into());
            if qp > q[i] {
                if chord > lo {
                    lo = chord;
                }
            } else if hi.as_ref().map_or(true, |h| chord < *h) {
                hi = Some(chord);
            }
        }
    }
    if let Some(h) = &hi {
        if lo > *h {
            return Err(Error::invalid(
                "no unit payment supports the optimal split; tables are not concave",
            ));
        }
    }
    let delta = lo;

    // report fields per the construction's case analysis
    let lightest: Vec<Option<u64>> = (0..2)
        .map(|i| {
            mask_members(partition.firm_mask(i)).map(|j| game.weights[j] as u64).min()
        })
        .collect();
    let mut slope_below = Vec::new();
    let mut slope_above = Vec::new();
    let mut step = [None, None];
    let mut step_slope = Vec::new();
    for i in 0..2 {
        if let Some(check) = lightest[i] {
            slope_below.push(
                (&tables[i][q[i] as usize] - &tables[i][(q[i] - check) as usize])
                    / Rat::from_integer((check as i64).into()),
            );
        } else {
            slope_below.push(Rat::zero());
        }
        if let Some(check_other) = lightest[1 - i] {
            if q[i] + check_other <= w {
                slope_above.push(
                    (&tables[i][(q[i] + check_other) as usize] - &tables[i][q[i] as usize])
                        / Rat::from_integer((check_other as i64).into()),
                );
            } else {
                slope_above.push(Rat::zero());
            }
        } else {
            slope_above.push(Rat::zero());
        }
    }
    for i in 0..2 {
        if lightest[1 - i].is_none() {
            step_slope.push(Rat::zero());
            continue;
        }
        let y_other = &slope_below[1 - i];
        let mut found = Rat::zero();
        for d in 1..=(w - q[i]) {
            let chord = (&tables[i][(q[i] + d) as usize] - &tables[i][q[i] as usize])
                / Rat::from_integer((d as i64).into());
            if chord <= *y_other {
                step[i] = Some(d);
                found = chord;
                break;
            }
        }
        step_slope.push(found);
    }

    let payments: Vec<Rat> =
        game.weights.iter().map(|&wj| &delta * Rat::from_integer((wj as i64).into())).collect();
    let outcome = Outcome { partition, payments };
    let report = deviation_gap(game, &outcome, limits)?;
    if !report.gain.is_zero() {
        return Err(Error::invalid(format!(
            "construction failed verification: firm {} gains {}",
            report.firm,
            format_rat(&report.gain)
        )));
    }
    let construction = TwoFirmConstruction {
        firm_weights: [q[0], q[1]],
        lightest: [lightest[0], lightest[1]],
        slope_below,
        slope_above,
        step,
        step_slope,
        unit_payment: delta,
    };
    Ok((outcome, construction))
}

#[derive(Debug)]
pub enum BalancedPspe {
    Found { outcome: Outcome, unit_payment: Rat },
    /// no almost-balanced partition is realizable with these weights
    NotApplicable,
}

/// Proportional stable outcome on an almost-balanced partition of a symmetric
/// concave weighted game: pay the marginal of one unit at the balanced point.
pub fn balanced_pspe(game: &CompetitionGame, limits: &Limits) -> Result<BalancedPspe> {
    if !game.is_symmetric() {
        return Err(Error::precondition("balanced construction needs symmetric firms"));
    }
    let table = match &game.valuations[0] {
        Valuation::Weighted(t) => t,
        _ => return Err(Error::precondition("balanced construction needs weighted valuations")),
    };
    if !is_concave_weighted(table) {
        return Err(Error::precondition("balanced construction needs a concave table"));
    }
    let k = game.k() as u64;
    let w = game.total_weight();
    let q = w / k;
    let dp = WeightedDp::run(game, limits)?;
    let partition =
        match dp.realize_lex_min(|p| p.iter().max().unwrap() - p.iter().min().unwrap() <= 1) {
            Some(p) => p,
            None => return Ok(BalancedPspe::NotApplicable),
        };
    let delta = &table[(q + 1) as usize] - &table[q as usize];
    let payments: Vec<Rat> =
        game.weights.iter().map(|&wj| &delta * Rat::from_integer((wj as i64).into())).collect();
    let outcome = Outcome { partition, payments };
    let gap = deviation_gap(game, &outcome, limits)?;
    if !gap.gain.is_zero() {
        return Err(Error::invalid("balanced construction failed verification"));
    }
    Ok(BalancedPspe::Found { outcome, unit_payment: delta })
}

/// Uniform-payment stable outcome for homogeneous (unit-weight) games with
/// possibly asymmetric firms: the least uniform payment that no firm wants to
/// undercut or outbid, minimized over all optimal size profiles.
pub fn homogeneous_min_delta(
    game: &CompetitionGame,
    limits: &Limits,
) -> Result<Option<(Outcome, Rat)>> {
    if game.weights.iter().any(|&w| w != 1) {
        return Err(Error::precondition("homogeneous construction needs unit weights"));
    }
    let n = game.n();
    let k = game.k();
    let tables: Vec<Vec<Rat>> = game
        .valuations
        .iter()
        .map(|v| {
            (0..=n as u32)
                .map(|s| v.evaluate(if s == 0 { 0 } else { (1u32 << s) - 1 }, &game.weights))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let _ = limits;
    // optimal size profiles
    let mut profiles: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..k - 1 {
        let mut next = Vec::new();
        for p in &profiles {
            let used: usize = p.iter().sum();
            for s in 0..=(n - used) {
                let mut q = p.clone();
                q.push(s);
                next.push(q);
            }
        }
        profiles = next;
    }
    let mut full: Vec<Vec<usize>> = profiles
        .into_iter()
        .map(|mut p| {
            let used: usize = p.iter().sum();
            p.push(n - used);
            p
        })
        .collect();
    full.sort();
    let welfare = |p: &[usize]| -> Rat { (0..k).map(|i| tables[i][p[i]].clone()).sum() };
    let best = full.iter().map(|p| welfare(p)).max().unwrap();
    let mut chosen: Option<(Rat, Vec<usize>)> = None;
    for p in full.iter().filter(|p| welfare(p) == best) {
        // delta interval from uniform-payment stability rows
        let mut lo = Rat::zero();
        let mut hi: Option<Rat> = None;
        for i in 0..k {
            for s in 0..=n {
                if s == p[i] {
                    continue;
                }
                let chord = (&tables[i][s] - &tables[i][p[i]])
                    / Rat::from_integer((s as i64 - p[i] as i64).into());
                if s > p[i] {
                    if chord > lo {
                        lo = chord;
                    }
                } else if hi.as_ref().map_or(true, |h| chord < *h) {
                    hi = Some(chord);
                }
            }
        }
        let feasible = hi.as_ref().map_or(true, |h| lo <= *h);
        if feasible && chosen.as_ref().map_or(true, |(d, _)| lo < *d) {
            chosen = Some((lo, p.clone()));
        }
    }
    let Some((delta, profile)) = chosen else {
        return Ok(None);
    };
    let mut assignment = Vec::with_capacity(n);
    for (i, &s) in profile.iter().enumerate() {
        assignment.extend(std::iter::repeat((i + 1) as u8).take(s));
    }
    let outcome =
        Outcome { partition: Partition { assignment }, payments: vec![delta.clone(); n] };
    Ok(Some((outcome, delta)))
}

/// Stable outcome of a symmetric two-firm synergy game: maximal cut, each
/// worker paid the average of total and exclusive influence. Both profits
/// equal half the cut weight.
pub fn synergy_two_firm_pspe(m: &SynergyMatrix, limits: &Limits) -> Result<(Outcome, Rat)> {
    let (partition, cut) = max_cut_two_firm(m, limits)?;
    let payments: Vec<Rat> = (0..m.n)
        .map(|j| (m.row_total(j) + m.get(j, j)) / Rat::from_integer(2.into()))
        .collect();
    let game = CompetitionGame::new(
        (0..m.n).map(|_| 1).collect(),
        vec![Valuation::Synergy(m.clone()), Valuation::Synergy(m.clone())],
    )?;
    let outcome = Outcome { partition, payments };
    let profits = outcome.firm_profits(&game)?;
    let half_cut = &cut / Rat::from_integer(2.into());
    if profits.iter().any(|r| *r != half_cut) {
        return Err(Error::invalid("cut construction: profits must equal half the cut"));
    }
    let gap = deviation_gap(&game, &outcome, limits)?;
    if !gap.gain.is_zero() {
        return Err(Error::invalid("cut construction failed verification"));
    }
    Ok((outcome, half_cut))
}

/// Proportional heuristic payments on an optimal partition of a symmetric
/// weighted game: slope between the heaviest and lightest firm loads, falling
/// back to the balanced-point marginal when the loads are equal.
pub fn heuristic_payments(game: &CompetitionGame, partition: &Partition) -> Result<Vec<Rat>> {
    let delta = heuristic_delta(game, partition)?;
    Ok(game
        .weights
        .iter()
        .map(|&wj| &delta * Rat::from_integer((wj as i64).into()))
        .collect())
}

pub fn heuristic_delta(game: &CompetitionGame, partition: &Partition) -> Result<Rat> {
    if !game.is_symmetric() {
        return Err(Error::precondition("heuristic payments need symmetric firms"));
    }
    let table = match &game.valuations[0] {
        Valuation::Weighted(t) => t,
        _ => return Err(Error::precondition("heuristic payments need weighted valuations")),
    };
    let fw = partition.firm_weights(game);
    let hi = *fw.iter().max().unwrap();
    let lo = *fw.iter().min().unwrap();
    if hi == lo {
        let q = (game.total_weight() / game.k() as u64) as usize;
        Ok(&table[q + 1] - &table[q])
    } else {
        Ok((&table[hi as usize] - &table[lo as usize])
            / Rat::from_integer(((hi - lo) as i64).into()))
    }
}

/// Baseline revenue prediction `v(q) - delta q` at the balanced point
/// `q = floor(W/k)`, with the heuristic slope of the optimal partition.
pub fn revenue_baseline(game: &CompetitionGame, partition: &Partition) -> Result<Rat> {
    let table = match &game.valuations[0] {
        Valuation::Weighted(t) => t,
        _ => return Err(Error::precondition("revenue baseline needs weighted valuations")),
    };
    let delta = heuristic_delta(game, partition)?;
    let q = (game.total_weight() / game.k() as u64) as usize;
    Ok(&table[q] - delta * Rat::from_integer((q as i64).into()))
}

/// Result of averaging payments inside each (firm, type) cell.
#[derive(Debug, Clone)]
pub struct FairnessTransform {
    pub outcome: Outcome,
    /// same-type workers employed by different firms at unequal pay; such an
    /// outcome cannot be stable, and averaging across firms would change
    /// profits, so these pairs are reported instead of averaged
    pub cross_firm_unequal: Vec<(usize, usize)>,
}

pub fn fairness_transform(
    game: &CompetitionGame,
    outcome: &Outcome,
    types: &TypeStructure,
) -> Result<FairnessTransform> {
    let mut payments = outcome.payments.clone();
    let mut cross = Vec::new();
    for class in &types.classes {
        for (ai, &a) in class.iter().enumerate() {
            for &b in class.iter().skip(ai + 1) {
                let fa = outcome.partition.assignment[a];
                let fb = outcome.partition.assignment[b];
                if fa != fb && fa != 0 && fb != 0 && outcome.payments[a] != outcome.payments[b] {
                    cross.push((a, b));
                }
            }
        }
        // average within each firm
        for firm in 1..=game.k() as u8 {
            let cell: Vec<usize> = class
                .iter()
                .copied()
                .filter(|&j| outcome.partition.assignment[j] == firm)
                .collect();
            if cell.len() > 1 {
                let total: Rat = cell.iter().map(|&j| outcome.payments[j].clone()).sum();
                let avg = total / Rat::from_integer((cell.len() as i64).into());
                for &j in &cell {
                    payments[j] = avg.clone();
                }
            }
        }
    }
    let transformed = Outcome { partition: outcome.partition.clone(), payments };
    let before = outcome.firm_profits(game)?;
    let after = transformed.firm_profits(game)?;
    if before != after {
        return Err(Error::invalid("averaging must not change firm profits"));
    }
    Ok(FairnessTransform { outcome: transformed, cross_firm_unequal: cross })
}

/// One verified predicate with an optional counterexample description.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

impl Verdict {
    fn pass() -> Self {
        Verdict { ok: true, witness: None }
    }

    fn fail(witness: String) -> Self {
        Verdict { ok: false, witness: Some(witness) }
    }
}

/// Independent checks of an outcome: worker and firm rationality, envy
/// freeness, fair (same-type, same-pay), the per-worker marginal bounds, and
/// the deviation gap.
#[derive(Debug, Clone, Serialize)]
pub struct OutcomeReport {
    pub individually_rational: Verdict,
    pub envy_free: Verdict,
    pub fair: Verdict,
    pub marginal_bounds: Verdict,
    #[serde(with = "rat_serde")]
    pub gap: Rat,
    pub stable: bool,
}

impl OutcomeReport {
    pub fn all_pass(&self) -> bool {
        self.individually_rational.ok && self.envy_free.ok && self.fair.ok && self.marginal_bounds.ok && self.stable
    }
}

pub fn check_outcome(
    game: &CompetitionGame,
    outcome: &Outcome,
    limits: &Limits,
) -> Result<OutcomeReport> {
    let n = game.n();
    let profits = outcome.firm_profits(game)?;

    let mut ir = Verdict::pass();
    for j in 0..n {
        if outcome.payments[j].is_negative() {
            ir = Verdict::fail(format!("worker {j} is paid {}", format_rat(&outcome.payments[j])));
            break;
        }
    }
    if ir.ok {
        for (i, r) in profits.iter().enumerate() {
            if r.is_negative() {
                ir = Verdict::fail(format!("firm {i} profit {}", format_rat(r)));
                break;
            }
        }
    }

    let mut envy = Verdict::pass();
    'envy: for i in 0..game.k() {
        for t in 0..game.k() {
            if i == t {
                continue;
            }
            let other = outcome.partition.firm_mask(t);
            let pay: Rat = mask_members(other).map(|j| outcome.payments[j].clone()).sum();
            let val = game.value(i, other)? - pay;
            if val > profits[i] {
                envy = Verdict::fail(format!("firm {i} envies firm {t}"));
                break 'envy;
            }
        }
    }

    let types = game.worker_types(limits)?;
    let mut fair = Verdict::pass();
    'fair: for class in &types.classes {
        for (ai, &a) in class.iter().enumerate() {
            for &b in class.iter().skip(ai + 1) {
                if outcome.payments[a] != outcome.payments[b] {
                    fair = Verdict::fail(format!(
                        "same-type workers {a} and {b} paid {} and {}",
                        format_rat(&outcome.payments[a]),
                        format_rat(&outcome.payments[b])
                    ));
                    break 'fair;
                }
            }
        }
    }

    let mut marginal = Verdict::pass();
    'marg: for j in 0..n {
        let employer = outcome.partition.assignment[j];
        if employer == 0 {
            continue;
        }
        let i = employer as usize - 1;
        let own = outcome.partition.firm_mask(i);
        let upper = game.valuations[i].marginal(j, own & !(1 << j), &game.weights)?;
        if outcome.payments[j] > upper {
            marginal = Verdict::fail(format!(
                "worker {j} paid {} above own marginal {}",
                format_rat(&outcome.payments[j]),
                format_rat(&upper)
            ));
            break;
        }
        for other in 0..game.k() {
            if other == i {
                continue;
            }
            let mask = outcome.partition.firm_mask(other);
            let lower = game.valuations[other].marginal(j, mask, &game.weights)?;
            if outcome.payments[j] < lower {
                marginal = Verdict::fail(format!(
                    "worker {j} paid {} below firm {other}'s marginal {}",
                    format_rat(&outcome.payments[j]),
                    format_rat(&lower)
                ));
                break 'marg;
            }
        }
    }

    let gap = deviation_gap(game, outcome, limits)?;
    let stable = gap.gain.is_zero();
    Ok(OutcomeReport {
        individually_rational: ir,
        envy_free: envy,
        fair,
        marginal_bounds: marginal,
        gap: gap.gain,
        stable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{rat, rat_int};

    fn wgame(weights: Vec<u32>, tables: Vec<Vec<i64>>) -> CompetitionGame {
        CompetitionGame::new(
            weights,
            tables
                .into_iter()
                .map(|t| Valuation::Weighted(t.into_iter().map(rat_int).collect()))
                .collect(),
        )
        .unwrap()
    }

    fn lim() -> Limits {
        Limits::default()
    }

    // weights {1,2,3,5}, two firms, table (0,2,4,6,8,10,11,12,12,...):
    // the optimal split is (6,5), worker 0 always on the 6 side
    fn cartel_game() -> CompetitionGame {
        wgame(vec![1, 2, 3, 5], vec![vec![0, 2, 4, 6, 8, 10, 11, 12, 12, 12, 12, 12]; 2])
    }

    #[test]
    fn stability_lp_collapsed_vs_full() {
        let g = cartel_game();
        let p = Partition { assignment: vec![1, 1, 1, 2] };
        for objective in [StabilityObjective::Feasibility, StabilityObjective::MinimizeTotalPay] {
            let full = build_stability_lp(&g, &p, false, objective, false, &lim()).unwrap();
            let coll = build_stability_lp(&g, &p, true, objective, false, &lim()).unwrap();
            let rf = solve_stability_lp(&full).unwrap();
            let rc = solve_stability_lp(&coll).unwrap();
            match (rf, rc) {
                (
                    StabilityResult::Feasible { total: tf, .. },
                    StabilityResult::Feasible { total: tc, .. },
                ) => {
                    if objective == StabilityObjective::MinimizeTotalPay {
                        assert_eq!(tf, tc);
                    }
                }
                _ => panic!("both must be feasible"),
            }
        }
    }

    #[test]
    fn min_pay_totals_and_forced_payment() {
        let g = cartel_game();
        let res = find_pspe(&g, StabilityObjective::MinimizeTotalPay, &lim()).unwrap();
        match res {
            PspeSearch::Found { outcome, total_pay, .. } => {
                assert_eq!(total_pay, rat_int(9));
                assert_eq!(outcome.payments[0], rat_int(1));
                assert_eq!(outcome.payments, vec![rat_int(1), rat_int(2), rat_int(2), rat_int(4)]);
            }
            _ => panic!("stable outcome exists"),
        }
        // the uniform-slope vector x = w is also stable
        let x: Vec<Rat> = vec![rat_int(1), rat_int(2), rat_int(3), rat_int(5)];
        let outcome = Outcome { partition: Partition { assignment: vec![1, 1, 1, 2] }, payments: x };
        assert!(deviation_gap(&g, &outcome, &lim()).unwrap().gain.is_zero());
    }

    #[test]
    fn nonexistence_with_certificate() {
        // three unit workers, two firms, non-concave table (0,3,4,6)
        let g = wgame(vec![1, 1, 1], vec![vec![0, 3, 4, 6]; 2]);
        let res = find_pspe(&g, StabilityObjective::Feasibility, &lim()).unwrap();
        match res {
            PspeSearch::Nonexistent { refutations } => {
                assert_eq!(refutations.len(), 1);
                let (_, cert) = &refutations[0];
                assert!(!cert.is_empty());
            }
            _ => panic!("no stable outcome"),
        }
    }

    #[test]
    fn two_firm_construction_cartel_game() {
        let g = cartel_game();
        let (outcome, cons) = two_firm_weighted_pspe(&g, &lim()).unwrap();
        assert_eq!(cons.unit_payment, rat_int(1));
        assert_eq!(outcome.payments, vec![rat_int(1), rat_int(2), rat_int(3), rat_int(5)]);
        let report = check_outcome(&g, &outcome, &lim()).unwrap();
        assert!(report.all_pass());
    }

    #[test]
    fn two_worker_marginal_payments() {
        // two workers h, l: paying each its marginal to the grand set is stable
        let g = wgame(vec![3, 2], vec![vec![0, 2, 4, 5, 6, 7]; 2]);
        let x_h = rat_int(7 - 4); // v(5) - v(l)
        let x_l = rat_int(7 - 5); // v(5) - v(h)
        let outcome = Outcome {
            partition: Partition { assignment: vec![1, 2] },
            payments: vec![x_h, x_l],
        };
        assert!(deviation_gap(&g, &outcome, &lim()).unwrap().gain.is_zero());
        // and the proportional construction verifies as well
        let (o2, cons) = two_firm_weighted_pspe(&g, &lim()).unwrap();
        // symmetric slope between the split loads: (v(3)-v(2))/(3-2)
        assert_eq!(cons.unit_payment, rat_int(1));
        assert!(check_outcome(&g, &o2, &lim()).unwrap().all_pass());
    }

    #[test]
    fn balanced_construction() {
        // exactly balanced weights (2,2,2,2), k=2, concave table
        let g = wgame(vec![2, 2, 2, 2], vec![vec![0, 5, 9, 12, 14, 15, 15, 15, 15]; 2]);
        match balanced_pspe(&g, &lim()).unwrap() {
            BalancedPspe::Found { outcome, unit_payment } => {
                // q = 4, delta = v(5) - v(4) = 1, every worker weighs 2
                assert_eq!(unit_payment, rat_int(1));
                assert!(outcome.payments.iter().all(|x| *x == rat_int(2)));
                let profits = outcome.firm_profits(&g).unwrap();
                assert!(profits.iter().all(|r| *r == rat_int(14 - 4)));
            }
            _ => panic!("balanced partition exists"),
        }
        // weights (5,6,7), k=3: profiles are {5,6,7}, gap 2: not applicable
        let g3 = wgame(
            vec![5, 6, 7],
            vec![vec![0, 40, 70, 95, 111, 124, 126, 127, 127, 127, 127, 127, 127, 127, 127, 127, 127, 127, 127]; 3],
        );
        assert!(matches!(balanced_pspe(&g3, &lim()).unwrap(), BalancedPspe::NotApplicable));
    }

    #[test]
    fn homogeneous_uniform_payment() {
        // symmetric concave, n=5, k=2: sizes {3,2}, delta = v(3) - v(2)
        let g = wgame(vec![1; 5], vec![vec![0, 10, 18, 24, 28, 30]; 2]);
        let (outcome, delta) = homogeneous_min_delta(&g, &lim()).unwrap().unwrap();
        assert_eq!(delta, rat_int(6));
        let mut sizes: Vec<usize> =
            (0..2).map(|i| outcome.partition.firm_mask(i).count_ones() as usize).collect();
        sizes.sort();
        assert_eq!(sizes, vec![2, 3]);
        assert!(check_outcome(&g, &outcome, &lim()).unwrap().all_pass());
        // n = k: one worker each; delta is the lower bound v(2) - v(1)
        let g = wgame(vec![1, 1], vec![vec![0, 10, 14]; 2]);
        let (_, delta) = homogeneous_min_delta(&g, &lim()).unwrap().unwrap();
        assert_eq!(delta, rat_int(4));
    }

    #[test]
    fn heuristic_and_baseline() {
        // single workers of weight 5, 6, 7 with values 124, 126, 127
        let g = wgame(
            vec![5, 6, 7],
            vec![vec![0, 40, 70, 95, 111, 124, 126, 127, 127, 127, 127, 127, 127, 127, 127, 127, 127, 127, 127]; 3],
        );
        let p = Partition { assignment: vec![1, 2, 3] };
        assert_eq!(heuristic_delta(&g, &p).unwrap(), rat(3, 2));
        let x = heuristic_payments(&g, &p).unwrap();
        assert_eq!(x[0], rat(15, 2));
        // r0 = v(6) - delta * 6
        assert_eq!(revenue_baseline(&g, &p).unwrap(), rat_int(126) - rat(3, 2) * rat_int(6));
        // linear table: r0 = 0
        let lin = wgame(vec![1, 1, 1, 1], vec![(0..=4).map(|x| 3 * x).collect(); 2]);
        let (p, _) = crate::partition::optimal_partition_weighted(&lin, &lim()).unwrap();
        assert_eq!(revenue_baseline(&lin, &p).unwrap(), rat_int(0));
    }

    #[test]
    fn fairness_averaging() {
        let g = wgame(vec![1, 1, 1], vec![vec![0, 4, 6, 7]; 2]);
        let types = g.worker_types(&lim()).unwrap();
        // two same-type workers in one firm paid (1,3): both end at 2
        let o = Outcome {
            partition: Partition { assignment: vec![1, 1, 1] },
            payments: vec![rat_int(1), rat_int(3), rat_int(2)],
        };
        let ft = fairness_transform(&g, &o, &types).unwrap();
        assert_eq!(ft.outcome.payments[0], rat_int(2));
        assert_eq!(ft.outcome.payments[1], rat_int(2));
        assert!(ft.cross_firm_unequal.is_empty());
        // already fair: unchanged
        let ft2 = fairness_transform(&g, &ft.outcome, &types).unwrap();
        assert_eq!(ft2.outcome.payments, ft.outcome.payments);
        // cross-firm unequal pay is flagged
        let o = Outcome {
            partition: Partition { assignment: vec![1, 2, 2] },
            payments: vec![rat_int(1), rat_int(3), rat_int(3)],
        };
        let ft3 = fairness_transform(&g, &o, &types).unwrap();
        assert_eq!(ft3.cross_firm_unequal, vec![(0, 1), (0, 2)]);
    }

    #[test]
    fn verifier_verdicts() {
        let g = cartel_game();
        let p = Partition { assignment: vec![1, 1, 1, 2] };
        // negative payment: rationality fails with the worker as witness
        let o = Outcome {
            partition: p.clone(),
            payments: vec![rat_int(-1), rat_int(2), rat_int(2), rat_int(4)],
        };
        let rep = check_outcome(&g, &o, &lim()).unwrap();
        assert!(!rep.individually_rational.ok);
        // a stable outcome passes everything
        let o = Outcome { partition: p, payments: vec![rat_int(1), rat_int(2), rat_int(2), rat_int(4)] };
        let rep = check_outcome(&g, &o, &lim()).unwrap();
        assert!(rep.all_pass(), "{rep:?}");
    }

    #[test]
    fn proportional_constraint_infeasible() {
        // single workers 5, 6, 7: stable payments exist, proportional ones do not
        let g = wgame(
            vec![5, 6, 7],
            vec![vec![0, 40, 70, 95, 111, 124, 126, 127, 127, 127, 127, 127, 127, 127, 127, 127, 127, 127, 127]; 3],
        );
        let free = find_pspe(&g, StabilityObjective::MinimizeTotalPay, &lim()).unwrap();
        match free {
            PspeSearch::Found { total_pay, outcome, .. } => {
                assert_eq!(total_pay, rat_int(8));
                assert_eq!(outcome.payments, vec![rat_int(1), rat_int(3), rat_int(4)]);
            }
            _ => panic!("unconstrained stable outcome exists"),
        }
        let prop = find_pspe_with(&g, StabilityObjective::Feasibility, true, &lim()).unwrap();
        assert!(matches!(prop, PspeSearch::Nonexistent { .. }));
        // envy check fails for the proportional slope 2
        let o = Outcome {
            partition: Partition { assignment: vec![1, 2, 3] },
            payments: vec![rat_int(10), rat_int(12), rat_int(14)],
        };
        let rep = check_outcome(&g, &o, &lim()).unwrap();
        assert!(!rep.envy_free.ok);
    }

    #[test]
    fn max_pay_bounded() {
        let g = cartel_game();
        let res = find_pspe(&g, StabilityObjective::MaximizeTotalPay, &lim()).unwrap();
        match res {
            PspeSearch::Found { total_pay, outcome, .. } => {
                // every payment is capped by its own-firm marginal
                assert!(total_pay <= rat_int(21));
                let rep = check_outcome(&g, &outcome, &lim()).unwrap();
                assert!(rep.all_pass());
            }
            _ => panic!("stable outcome exists"),
        }
    }
}
