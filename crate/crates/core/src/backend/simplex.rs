//! Dense two-phase primal simplex over any [`Scalar`].
//!
//! Intended for the small LPs of the uncertainty oracles and for tests; the
//! tableau is dense, so cost grows with `rows × columns` per pivot. Dantzig
//! pricing is used until a run of degenerate pivots is detected, then Bland's
//! rule takes over until progress resumes.

use super::Sense;
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct DenseRow<S> {
    pub coeffs: Vec<(usize, S)>,
    pub sense: Sense,
    pub rhs: S,
}

/// `minimise cᵀx` subject to `rows` and `lower ≤ x ≤ upper` (`None` = unbounded side).
#[derive(Clone, Debug)]
pub struct DenseLp<S> {
    pub objective: Vec<S>,
    pub rows: Vec<DenseRow<S>>,
    pub lower: Vec<Option<S>>,
    pub upper: Vec<Option<S>>,
}

impl<S: Scalar> DenseLp<S> {
    /// A program over `n` variables with default bounds `x ≥ 0`.
    pub fn new(objective: Vec<S>) -> Self {
        let n = objective.len();
        Self {
            objective,
            rows: Vec::new(),
            lower: vec![Some(S::zero()); n],
            upper: vec![None; n],
        }
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, S)>, sense: Sense, rhs: S) {
        self.rows.push(DenseRow { coeffs, sense, rhs });
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }
}

#[derive(Clone, Debug)]
pub struct LpOptimum<S> {
    pub x: Vec<S>,
    pub objective: S,
    /// One dual per row, same sign convention as [`super::Solution::duals`].
    pub duals: Vec<S>,
}

#[derive(Clone, Debug)]
pub enum LpOutcome<S> {
    Optimal(LpOptimum<S>),
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Clone, Debug)]
enum ColumnMap<S> {
    /// x = lower + y
    Shift { col: usize, lower: S },
    /// x = upper − y
    Mirror { col: usize, upper: S },
    /// x = y⁺ − y⁻
    Split { pos: usize, neg: usize },
}

struct Tableau<S> {
    rows: usize,
    cols: usize,
    /// `(rows + 1) × (cols + 1)`; the last row holds reduced costs, the last column the rhs.
    data: Vec<S>,
    basis: Vec<usize>,
    artificial_start: usize,
}

impl<S: Scalar> Tableau<S> {
    fn at(&self, r: usize, c: usize) -> &S {
        &self.data[r * (self.cols + 1) + c]
    }

    fn rhs(&self, r: usize) -> &S {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let width = self.cols + 1;
        let pivot = self.data[pr * width + pc].clone();
        for c in 0..width {
            let v = self.data[pr * width + c].clone() / pivot.clone();
            self.data[pr * width + c] = v.snap();
        }
        let pivot_row: Vec<S> = self.data[pr * width..(pr + 1) * width].to_vec();
        for r in 0..=self.rows {
            if r == pr {
                continue;
            }
            let factor = self.data[r * width + pc].clone();
            if factor.is_zero() {
                continue;
            }
            for (c, pv) in pivot_row.iter().enumerate() {
                if pv.is_zero() {
                    continue;
                }
                let idx = r * width + c;
                let v = self.data[idx].clone() - factor.clone() * pv.clone();
                self.data[idx] = v.snap();
            }
            // keep the pivot column an exact unit vector
            self.data[r * width + pc] = S::zero();
        }
        self.basis[pr] = pc;
    }

    /// Load reduced costs for `costs` (indexed by column) into the objective row.
    fn price(&mut self, costs: &[S]) {
        let width = self.cols + 1;
        let obj = self.rows * width;
        for c in 0..width {
            self.data[obj + c] = if c < self.cols {
                costs[c].clone()
            } else {
                S::zero()
            };
        }
        for r in 0..self.rows {
            let cb = costs[self.basis[r]].clone();
            if cb.is_zero() {
                continue;
            }
            for c in 0..width {
                let v = self.data[obj + c].clone() - cb.clone() * self.data[r * width + c].clone();
                self.data[obj + c] = v.snap();
            }
        }
    }

    /// Run primal simplex iterations on the current objective row.
    fn optimise(&mut self, allow_artificial: bool, max_iter: usize) -> Result<(), LpOutcome<S>> {
        let tol = S::tolerance();
        let piv_tol = S::pivot_tolerance();
        let mut degenerate_run = 0usize;
        let mut bland = false;
        for _ in 0..max_iter {
            let limit = if allow_artificial {
                self.cols
            } else {
                self.artificial_start
            };
            let mut entering: Option<usize> = None;
            let mut best = -tol.clone();
            for c in 0..limit {
                let d = self.at(self.rows, c);
                if *d < best {
                    entering = Some(c);
                    if bland {
                        break;
                    }
                    best = d.clone();
                }
            }
            let Some(pc) = entering else {
                return Ok(());
            };
            let mut leaving: Option<usize> = None;
            let mut best_ratio: Option<S> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if *a > piv_tol {
                    let ratio = self.rhs(r).clone() / a.clone();
                    let better = match &best_ratio {
                        None => true,
                        Some(b) => {
                            let diff = ratio.clone() - b.clone();
                            if diff.abs() <= tol {
                                // tie: smallest basic index (Bland), else larger pivot
                                if bland {
                                    self.basis[r] < self.basis[leaving.unwrap()]
                                } else {
                                    a.abs() > self.at(leaving.unwrap(), pc).abs()
                                }
                            } else {
                                diff < S::zero()
                            }
                        }
                    };
                    if better {
                        best_ratio = Some(ratio);
                        leaving = Some(r);
                    }
                }
            }
            let Some(pr) = leaving else {
                return Err(LpOutcome::Unbounded);
            };
            if best_ratio.map(|r| r.abs() <= tol).unwrap_or(false) {
                degenerate_run += 1;
                if degenerate_run > 25 {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
                bland = false;
            }
            self.pivot(pr, pc);
        }
        Err(LpOutcome::IterationLimit)
    }
}

/// Solve `lp` to optimality.
pub fn solve<S: Scalar>(lp: &DenseLp<S>) -> LpOutcome<S> {
    let n = lp.num_vars();
    // structural columns
    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0usize;
    let mut bound_rows: Vec<(usize, S)> = Vec::new();
    for j in 0..n {
        match (&lp.lower[j], &lp.upper[j]) {
            (Some(lo), up) => {
                maps.push(ColumnMap::Shift {
                    col: ncols,
                    lower: lo.clone(),
                });
                if let Some(up) = up {
                    bound_rows.push((ncols, up.clone() - lo.clone()));
                }
                ncols += 1;
            }
            (None, Some(up)) => {
                maps.push(ColumnMap::Mirror {
                    col: ncols,
                    upper: up.clone(),
                });
                ncols += 1;
            }
            (None, None) => {
                maps.push(ColumnMap::Split {
                    pos: ncols,
                    neg: ncols + 1,
                });
                ncols += 2;
            }
        }
    }

    // rows in structural space: (coeffs, sense, rhs)
    let mut std_rows: Vec<(Vec<(usize, S)>, Sense, S)> =
        Vec::with_capacity(lp.rows.len() + bound_rows.len());
    for row in &lp.rows {
        let mut coeffs = Vec::with_capacity(row.coeffs.len());
        let mut rhs = row.rhs.clone();
        for (j, a) in &row.coeffs {
            match &maps[*j] {
                ColumnMap::Shift { col, lower } => {
                    coeffs.push((*col, a.clone()));
                    rhs = rhs - a.clone() * lower.clone();
                }
                ColumnMap::Mirror { col, upper } => {
                    coeffs.push((*col, -a.clone()));
                    rhs = rhs - a.clone() * upper.clone();
                }
                ColumnMap::Split { pos, neg } => {
                    coeffs.push((*pos, a.clone()));
                    coeffs.push((*neg, -a.clone()));
                }
            }
        }
        std_rows.push((coeffs, row.sense, rhs));
    }
    for (col, width) in bound_rows {
        if width < S::zero() {
            return LpOutcome::Infeasible;
        }
        std_rows.push((vec![(col, S::one())], Sense::Le, width));
    }

    let m = std_rows.len();
    let nslack = std_rows.iter().filter(|r| r.1 != Sense::Eq).count();
    // decide row orientation and which rows need an artificial
    let mut sign = vec![S::one(); m];
    let mut needs_art = vec![false; m];
    for (r, (_, sense, rhs)) in std_rows.iter().enumerate() {
        let negate = *rhs < S::zero();
        if negate {
            sign[r] = -S::one();
        }
        let slack_coeff_positive = match sense {
            Sense::Le => !negate,
            Sense::Ge => negate,
            Sense::Eq => false,
        };
        needs_art[r] = !slack_coeff_positive;
    }
    let nart = needs_art.iter().filter(|&&b| b).count();
    let cols = ncols + nslack + nart;
    let width = cols + 1;
    let mut t = Tableau {
        rows: m,
        cols,
        data: vec![S::zero(); (m + 1) * width],
        basis: vec![0; m],
        artificial_start: ncols + nslack,
    };
    let mut marker = vec![0usize; m];
    let mut next_slack = ncols;
    let mut next_art = ncols + nslack;
    for (r, (coeffs, sense, rhs)) in std_rows.iter().enumerate() {
        let s = sign[r].clone();
        for (c, a) in coeffs {
            let idx = r * width + c;
            let v = t.data[idx].clone() + s.clone() * a.clone();
            t.data[idx] = v;
        }
        t.data[r * width + cols] = s.clone() * rhs.clone();
        if *sense != Sense::Eq {
            let slack = match sense {
                Sense::Le => S::one(),
                _ => -S::one(),
            } * s.clone();
            t.data[r * width + next_slack] = slack;
            if !needs_art[r] {
                t.basis[r] = next_slack;
                marker[r] = next_slack;
            }
            next_slack += 1;
        }
        if needs_art[r] {
            t.data[r * width + next_art] = S::one();
            t.basis[r] = next_art;
            marker[r] = next_art;
            next_art += 1;
        }
    }

    let max_iter = 200 * (m + cols) + 5_000;

    if nart > 0 {
        let mut phase1 = vec![S::zero(); cols];
        for c in phase1.iter_mut().skip(t.artificial_start) {
            *c = S::one();
        }
        t.price(&phase1);
        match t.optimise(true, max_iter) {
            Ok(()) => {}
            Err(LpOutcome::Unbounded) => return LpOutcome::Infeasible,
            Err(other) => return other,
        }
        let scale = std_rows
            .iter()
            .map(|r| r.2.abs())
            .fold(S::one(), |a, b| a.max_of(b));
        let infeas = -t.at(m, cols).clone();
        let feas_tol = if S::tolerance().is_zero() {
            S::zero()
        } else {
            S::tolerance() * S::from_f64(100.0).unwrap() * scale
        };
        if infeas > feas_tol {
            return LpOutcome::Infeasible;
        }
        // drive artificials out of the basis where possible
        for r in 0..m {
            if t.basis[r] >= t.artificial_start {
                let mut best: Option<usize> = None;
                for c in 0..t.artificial_start {
                    if t.at(r, c).abs() > S::pivot_tolerance()
                        && best
                            .map(|b| t.at(r, c).abs() > t.at(r, b).abs())
                            .unwrap_or(true)
                    {
                        best = Some(c);
                    }
                }
                if let Some(c) = best {
                    t.pivot(r, c);
                }
            }
        }
    }

    let mut phase2 = vec![S::zero(); cols];
    for (j, map) in maps.iter().enumerate() {
        let c = lp.objective[j].clone();
        match map {
            ColumnMap::Shift { col, .. } => phase2[*col] = c,
            ColumnMap::Mirror { col, .. } => phase2[*col] = -c,
            ColumnMap::Split { pos, neg } => {
                phase2[*pos] = c.clone();
                phase2[*neg] = -c;
            }
        }
    }
    t.price(&phase2);
    if let Err(outcome) = t.optimise(false, max_iter) {
        return outcome;
    }

    let mut y = vec![S::zero(); cols];
    for r in 0..m {
        let b = t.basis[r];
        y[b] = t.rhs(r).clone();
    }
    let x: Vec<S> = maps
        .iter()
        .map(|map| match map {
            ColumnMap::Shift { col, lower } => lower.clone() + y[*col].clone(),
            ColumnMap::Mirror { col, upper } => upper.clone() - y[*col].clone(),
            ColumnMap::Split { pos, neg } => y[*pos].clone() - y[*neg].clone(),
        })
        .collect();
    let objective = lp
        .objective
        .iter()
        .zip(&x)
        .fold(S::zero(), |acc, (c, v)| acc + c.clone() * v.clone());
    let duals = (0..lp.rows.len())
        .map(|r| -t.at(m, marker[r]).clone() * sign[r].clone())
        .collect();
    LpOutcome::Optimal(LpOptimum {
        x,
        objective,
        duals,
    })
}
