//! Exact linear programming over rationals.
//!
//! A dense two-phase tableau simplex with Bland's anti-cycling rule; every
//! pivot is exact `BigRational` arithmetic, so feasibility verdicts are exact
//! and termination is guaranteed. There is no floating-point phase anywhere.
//!
//! The engine solves `max/min c.x` over `x >= 0` subject to mixed `<=`, `>=`,
//! `==` rows. Besides the optimal point it reports the simplex multipliers
//! (row duals), which [`solve_dualized`] uses to solve many-row/few-variable
//! programs through their transpose at a fraction of the tableau size.

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::Rat;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct LpRow {
    /// Sparse coefficients `(var, coeff)`; variables are implicitly `>= 0`.
    pub coeffs: Vec<(usize, Rat)>,
    pub rel: Relation,
    pub rhs: Rat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub num_vars: usize,
    pub rows: Vec<LpRow>,
    /// `None` solves pure feasibility.
    pub objective: Option<(Direction, Vec<Rat>)>,
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<Rat>,
    pub objective: Rat,
    /// Simplex multiplier per original row, in the `max`-orientation sign
    /// convention (a binding `<=` row of a maximization has a nonnegative
    /// multiplier). For a minimization the sign is flipped accordingly.
    pub duals: Vec<Rat>,
}

impl LpOutcome {
    pub fn optimal(self) -> Option<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, LpOutcome::Optimal(_))
    }
}

struct Tableau {
    rows: Vec<Vec<Rat>>, // m constraint rows, then phase-2 obj, then phase-1 obj
    basis: Vec<usize>,
    m: usize,
    ncols: usize, // total columns excluding rhs
}

impl Tableau {
    fn rhs_col(&self) -> usize {
        self.ncols
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let piv = self.rows[pr][pc].clone();
        if !piv.is_one() {
            for v in self.rows[pr].iter_mut() {
                if !v.is_zero() {
                    *v /= &piv;
                }
            }
        }
        let pivot_row = self.rows[pr].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == pr || row[pc].is_zero() {
                continue;
            }
            let f = row[pc].clone();
            for (a, b) in row.iter_mut().zip(pivot_row.iter()) {
                if !b.is_zero() {
                    *a -= &f * b;
                }
            }
            row[pc] = Rat::zero(); // exact by construction
        }
        self.basis[pr] = pc;
    }

    /// Simplex iterations on the given objective row; entering columns are
    /// restricted to `< allowed_below`. Starts with Dantzig's rule (most
    /// negative reduced cost) and falls back to Bland's rule for good after a
    /// run of degenerate pivots, which guarantees termination. Returns false
    /// when unbounded.
    fn run(&mut self, obj_row: usize, allowed_below: usize) -> bool {
        let mut degenerate_streak = 0u32;
        let mut bland = false;
        loop {
            let mut pc = None;
            if bland {
                for j in 0..allowed_below {
                    if self.rows[obj_row][j].is_negative() {
                        pc = Some(j);
                        break;
                    }
                }
            } else {
                let mut most: Option<&Rat> = None;
                for j in 0..allowed_below {
                    let v = &self.rows[obj_row][j];
                    if v.is_negative() && most.map_or(true, |m| v < m) {
                        most = Some(v);
                        pc = Some(j);
                    }
                }
            }
            let Some(pc) = pc else { return true };
            let rhs = self.rhs_col();
            let mut pr: Option<usize> = None;
            let mut best: Option<Rat> = None;
            for i in 0..self.m {
                if self.rows[i][pc].is_positive() {
                    let ratio = &self.rows[i][rhs] / &self.rows[i][pc];
                    let better = match &best {
                        None => true,
                        Some(b) => {
                            ratio < *b || (ratio == *b && self.basis[i] < self.basis[pr.unwrap()])
                        }
                    };
                    if better {
                        best = Some(ratio);
                        pr = Some(i);
                    }
                }
            }
            let Some(pr) = pr else { return false };
            if !bland {
                if best.as_ref().map_or(false, |b| b.is_zero()) {
                    degenerate_streak += 1;
                    if degenerate_streak > 64 {
                        bland = true;
                    }
                } else {
                    degenerate_streak = 0;
                }
            }
            self.pivot(pr, pc);
        }
    }
}

pub fn solve(lp: &LinearProgram) -> Result<LpOutcome> {
    let n = lp.num_vars;
    let m = lp.rows.len();

    // normalize: rhs >= 0, record per-row flip
    #[derive(Clone, Copy)]
    struct RowInfo {
        flipped: bool,
        rel: Relation,
        slack: Option<usize>, // slack (+1) or surplus (-1) column
        art: Option<usize>,
    }
    let mut infos = Vec::with_capacity(m);
    let mut nslack = 0usize;
    let mut nart = 0usize;
    for row in &lp.rows {
        let flipped = row.rhs.is_negative();
        let rel = if flipped {
            match row.rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            }
        } else {
            row.rel
        };
        match rel {
            Relation::Le => nslack += 1,
            Relation::Ge => {
                nslack += 1;
                nart += 1;
            }
            Relation::Eq => nart += 1,
        }
        infos.push(RowInfo { flipped, rel, slack: None, art: None });
    }

    let ncols = n + nslack + nart;
    let mut t = Tableau {
        rows: vec![vec![Rat::zero(); ncols + 1]; m + 2],
        basis: vec![0; m],
        m,
        ncols,
    };

    let mut si = n;
    let mut ai = n + nslack;
    let art_start = n + nslack;
    for (i, row) in lp.rows.iter().enumerate() {
        let sign = if infos[i].flipped { -Rat::one() } else { Rat::one() };
        for (j, c) in &row.coeffs {
            debug_assert!(*j < n, "coefficient index out of range");
            t.rows[i][*j] += &sign * c;
        }
        t.rows[i][ncols] = &sign * &row.rhs;
        match infos[i].rel {
            Relation::Le => {
                t.rows[i][si] = Rat::one();
                t.basis[i] = si;
                infos[i].slack = Some(si);
                si += 1;
            }
            Relation::Ge => {
                t.rows[i][si] = -Rat::one();
                infos[i].slack = Some(si);
                si += 1;
                t.rows[i][ai] = Rat::one();
                t.basis[i] = ai;
                infos[i].art = Some(ai);
                ai += 1;
            }
            Relation::Eq => {
                t.rows[i][ai] = Rat::one();
                t.basis[i] = ai;
                infos[i].art = Some(ai);
                ai += 1;
            }
        }
    }

    // phase-2 objective row holds z_j - c_j for the maximize orientation
    let obj2 = m;
    let obj1 = m + 1;
    if let Some((dir, c)) = &lp.objective {
        for (j, cj) in c.iter().enumerate() {
            t.rows[obj2][j] = match dir {
                Direction::Maximize => -cj.clone(),
                Direction::Minimize => cj.clone(),
            };
        }
    }

    // phase-1 objective: maximize -(sum of artificials)
    if nart > 0 {
        for i in 0..m {
            if t.basis[i] >= art_start {
                let row = t.rows[i].clone();
                for (a, b) in t.rows[obj1].iter_mut().zip(row.iter()) {
                    *a -= b;
                }
            }
        }
        for a in art_start..ncols {
            t.rows[obj1][a] += Rat::one();
        }
        t.run(obj1, ncols);
        if !t.rows[obj1][ncols].is_zero() {
            return Ok(LpOutcome::Infeasible);
        }
        // pivot remaining artificials out of the basis where possible
        for i in 0..m {
            if t.basis[i] >= art_start {
                if let Some(j) = (0..art_start).find(|&j| !t.rows[i][j].is_zero()) {
                    t.pivot(i, j);
                }
            }
        }
    }

    if !t.run(obj2, art_start) {
        return Ok(LpOutcome::Unbounded);
    }

    let mut x = vec![Rat::zero(); n];
    for i in 0..m {
        if t.basis[i] < n {
            let v = t.rows[i][ncols].clone();
            x[t.basis[i]] = v;
        }
    }
    let mut objective = Rat::zero();
    if let Some((_, c)) = &lp.objective {
        for (j, cj) in c.iter().enumerate() {
            objective += cj * &x[j];
        }
    }

    // simplex multipliers w.r.t. the original (pre-flip) rows
    let minimize = matches!(lp.objective, Some((Direction::Minimize, _)));
    let mut duals = Vec::with_capacity(m);
    for info in &infos {
        // multiplier w.r.t. the normalized row, read off slack/artificial
        // reduced costs: slack (+1) gives lambda, surplus (-1) gives -lambda
        let lam_norm = match (info.rel, info.slack, info.art) {
            (Relation::Le, Some(s), _) => t.rows[obj2][s].clone(),
            (Relation::Ge, Some(s), _) => -t.rows[obj2][s].clone(),
            (Relation::Eq, _, Some(a)) => t.rows[obj2][a].clone(),
            _ => unreachable!(),
        };
        let mut lam = if info.flipped { -lam_norm } else { lam_norm };
        if minimize {
            // engine maximized -c; express multipliers for the stated problem
            lam = -lam;
        }
        duals.push(lam);
    }

    Ok(LpOutcome::Optimal(LpSolution { x, objective, duals }))
}

/// Solve a program with few variables and many `>=` rows through its dual.
///
/// The input is `min c.x` subject to `rows` (any relation) and `x >= 0`;
/// equality rows become free dual variables (split into a difference of two
/// nonnegative columns). The dual tableau has one row per primal *variable*,
/// so the cost is governed by the variable count, not the row count. The
/// primal point is recovered from the dual's simplex multipliers.
///
/// Returns `Infeasible` when the primal is infeasible. An unbounded primal is
/// reported as an error since callers here always supply bounded programs.
pub fn solve_dualized(
    num_vars: usize,
    rows: &[LpRow],
    objective_min: &[Rat],
) -> Result<LpOutcome> {
    debug_assert_eq!(objective_min.len(), num_vars);
    // dual: max b.y  s.t.  A^T y <= c, with y_r >= 0 for Ge rows, free for Eq
    let mut dual_cols = 0usize;
    let mut col_of_row: Vec<(usize, Option<usize>)> = Vec::with_capacity(rows.len());
    for row in rows {
        match row.rel {
            Relation::Ge => {
                col_of_row.push((dual_cols, None));
                dual_cols += 1;
            }
            Relation::Eq => {
                col_of_row.push((dual_cols, Some(dual_cols + 1)));
                dual_cols += 2;
            }
            Relation::Le => {
                // treat as negated Ge
                col_of_row.push((dual_cols, None));
                dual_cols += 1;
            }
        }
    }

    let mut dual_rows: Vec<LpRow> = (0..num_vars)
        .map(|j| LpRow { coeffs: Vec::new(), rel: Relation::Le, rhs: objective_min[j].clone() })
        .collect();
    let mut dual_obj = vec![Rat::zero(); dual_cols];
    for (r, row) in rows.iter().enumerate() {
        let neg = matches!(row.rel, Relation::Le);
        let (cp, cm) = col_of_row[r];
        let rhs = if neg { -row.rhs.clone() } else { row.rhs.clone() };
        dual_obj[cp] = rhs.clone();
        if let Some(cm) = cm {
            dual_obj[cm] = -rhs;
        }
        for (j, coeff) in &row.coeffs {
            let c = if neg { -coeff.clone() } else { coeff.clone() };
            dual_rows[*j].coeffs.push((cp, c.clone()));
            if let Some(cm) = cm {
                dual_rows[*j].coeffs.push((cm, -c));
            }
        }
    }

    let dual = LinearProgram {
        num_vars: dual_cols,
        rows: dual_rows,
        objective: Some((Direction::Maximize, dual_obj)),
    };
    match solve(&dual)? {
        LpOutcome::Unbounded => Ok(LpOutcome::Infeasible),
        LpOutcome::Infeasible => Err(Error::precondition(
            "dual infeasible: primal program is unbounded",
        )),
        LpOutcome::Optimal(sol) => {
            // dual's row multipliers are the primal point
            let x: Vec<Rat> = sol.duals;
            debug_assert!(x.iter().all(|v| !v.is_negative()));
            let mut objective = Rat::zero();
            for (j, c) in objective_min.iter().enumerate() {
                objective += c * &x[j];
            }
            debug_assert_eq!(objective, sol.objective, "strong duality");
            Ok(LpOutcome::Optimal(LpSolution { x, objective, duals: vec![] }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{rat, rat_int};

    fn row(coeffs: &[(usize, i64)], rel: Relation, rhs: i64) -> LpRow {
        LpRow {
            coeffs: coeffs.iter().map(|&(j, c)| (j, rat_int(c))).collect(),
            rel,
            rhs: rat_int(rhs),
        }
    }

    #[test]
    fn maximize_small() {
        // max x + y st x + 2y <= 4, 3x + y <= 6
        let lp = LinearProgram {
            num_vars: 2,
            rows: vec![
                row(&[(0, 1), (1, 2)], Relation::Le, 4),
                row(&[(0, 3), (1, 1)], Relation::Le, 6),
            ],
            objective: Some((Direction::Maximize, vec![rat_int(1), rat_int(1)])),
        };
        let sol = solve(&lp).unwrap().optimal().unwrap();
        assert_eq!(sol.objective, rat(14, 5));
        assert_eq!(sol.x, vec![rat(8, 5), rat(6, 5)]);
        // duals: both rows binding; strong duality 4*l1 + 6*l2 = 14/5
        assert_eq!(&sol.duals[0] * rat_int(4) + &sol.duals[1] * rat_int(6), rat(14, 5));
    }

    #[test]
    fn infeasible_detected() {
        // x <= 1, x >= 2
        let lp = LinearProgram {
            num_vars: 1,
            rows: vec![row(&[(0, 1)], Relation::Le, 1), row(&[(0, 1)], Relation::Ge, 2)],
            objective: None,
        };
        assert!(matches!(solve(&lp).unwrap(), LpOutcome::Infeasible));
    }

    #[test]
    fn unbounded_detected() {
        let lp = LinearProgram {
            num_vars: 1,
            rows: vec![row(&[(0, 1)], Relation::Ge, 1)],
            objective: Some((Direction::Maximize, vec![rat_int(1)])),
        };
        assert!(matches!(solve(&lp).unwrap(), LpOutcome::Unbounded));
    }

    #[test]
    fn equality_and_negative_rhs() {
        // min x + y st x - y == -2, x + y >= 4  ->  x = 1, y = 3
        let lp = LinearProgram {
            num_vars: 2,
            rows: vec![
                row(&[(0, 1), (1, -1)], Relation::Eq, -2),
                row(&[(0, 1), (1, 1)], Relation::Ge, 4),
            ],
            objective: Some((Direction::Minimize, vec![rat_int(1), rat_int(1)])),
        };
        let sol = solve(&lp).unwrap().optimal().unwrap();
        assert_eq!(sol.objective, rat_int(4));
        assert_eq!(sol.x, vec![rat_int(1), rat_int(3)]);
    }

    #[test]
    fn dualized_matches_direct() {
        // min 2x + 3y st x + y >= 3, x - y >= -1, y >= 1
        let rows = vec![
            row(&[(0, 1), (1, 1)], Relation::Ge, 3),
            row(&[(0, 1), (1, -1)], Relation::Ge, -1),
            row(&[(1, 1)], Relation::Ge, 1),
        ];
        let obj = vec![rat_int(2), rat_int(3)];
        let direct = solve(&LinearProgram {
            num_vars: 2,
            rows: rows.clone(),
            objective: Some((Direction::Minimize, obj.clone())),
        })
        .unwrap()
        .optimal()
        .unwrap();
        let viadual = solve_dualized(2, &rows, &obj).unwrap().optimal().unwrap();
        assert_eq!(direct.objective, viadual.objective);
        // check the recovered point satisfies all rows
        for r in &rows {
            let lhs: Rat = r.coeffs.iter().map(|(j, c)| c * &viadual.x[*j]).sum();
            assert!(lhs >= r.rhs);
        }
    }

    #[test]
    fn dualized_infeasible() {
        let rows = vec![
            row(&[(0, 1)], Relation::Le, 1),
            row(&[(0, 1)], Relation::Ge, 2),
        ];
        let out = solve_dualized(1, &rows, &[rat_int(0)]).unwrap();
        assert!(matches!(out, LpOutcome::Infeasible));
    }

    #[test]
    fn dualized_with_equalities() {
        // min x1 + x2 + x3 st x1 == x2 (proportional tie), x1 + x2 + x3 >= 6, x3 <= 2
        let rows = vec![
            row(&[(0, 1), (1, -1)], Relation::Eq, 0),
            row(&[(0, 1), (1, 1), (2, 1)], Relation::Ge, 6),
            row(&[(2, 1)], Relation::Le, 2),
        ];
        let sol = solve_dualized(3, &rows, &vec![rat_int(1); 3]).unwrap().optimal().unwrap();
        assert_eq!(sol.objective, rat_int(6));
        assert_eq!(sol.x[0], sol.x[1]);
    }

    #[test]
    fn degenerate_cycling_guard() {
        // classic Beale-style degeneracy; Bland must terminate
        let lp = LinearProgram {
            num_vars: 4,
            rows: vec![
                LpRow {
                    coeffs: vec![(0, rat(1, 4)), (1, rat_int(-60)), (2, rat(-1, 25)), (3, rat_int(9))],
                    rel: Relation::Le,
                    rhs: rat_int(0),
                },
                LpRow {
                    coeffs: vec![(0, rat(1, 2)), (1, rat_int(-90)), (2, rat(-1, 50)), (3, rat_int(3))],
                    rel: Relation::Le,
                    rhs: rat_int(0),
                },
                LpRow { coeffs: vec![(2, rat_int(1))], rel: Relation::Le, rhs: rat_int(1) },
            ],
            objective: Some((
                Direction::Maximize,
                vec![rat(3, 4), rat_int(-150), rat(1, 50), rat_int(-6)],
            )),
        };
        let sol = solve(&lp).unwrap().optimal().unwrap();
        assert_eq!(sol.objective, rat(1, 20));
    }
}
