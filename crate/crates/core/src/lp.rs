//! Dense revised simplex for small linear programs.
//!
//! Problems are stated as `maximize c'x` subject to sparse rows with `<=`,
//! `>=` or `=` relations, `x >= 0`, and optional finite upper bounds. The
//! solver runs a two-phase method with an explicit basis inverse, Dantzig
//! pricing, and switches to Bland's rule after a streak of degenerate pivots.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<T> {
    /// Sparse `(variable, coefficient)` pairs.
    pub coeffs: Vec<(usize, T)>,
    pub relation: Relation,
    pub rhs: T,
}

impl<T: Scalar> Constraint<T> {
    pub fn new(coeffs: Vec<(usize, T)>, relation: Relation, rhs: T) -> Self {
        Constraint { coeffs, relation, rhs }
    }

    pub fn activity(&self, x: &[T]) -> T {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    pub fn is_satisfied(&self, x: &[T], tol: T) -> bool {
        let a = self.activity(x);
        match self.relation {
            Relation::Le => a <= self.rhs + tol,
            Relation::Ge => a >= self.rhs - tol,
            Relation::Eq => (a - self.rhs).abs() <= tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram<T> {
    /// Coefficients of the maximized objective.
    pub objective: Vec<T>,
    pub constraints: Vec<Constraint<T>>,
    /// Per-variable upper bounds; `T::infinity()` for none.
    pub upper: Vec<T>,
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new(objective: Vec<T>) -> Self {
        let n = objective.len();
        LinearProgram {
            objective,
            constraints: Vec::new(),
            upper: vec![T::infinity(); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, coeffs: Vec<(usize, T)>, relation: Relation, rhs: T) {
        self.constraints.push(Constraint::new(coeffs, relation, rhs));
    }

    pub fn objective_value(&self, x: &[T]) -> T {
        self.objective.iter().zip(x).map(|(&c, &v)| c * v).sum()
    }

    pub fn is_feasible(&self, x: &[T], tol: T) -> bool {
        x.iter().zip(&self.upper).all(|(&v, &u)| v >= -tol && v <= u + tol)
            && self.constraints.iter().all(|c| c.is_satisfied(x, tol))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T> {
    pub x: Vec<T>,
    pub objective: T,
    pub iterations: usize,
}

const REFACTOR_EVERY: usize = 64;
const DEGENERATE_STREAK: usize = 40;

struct Tableau<T> {
    m: usize,
    /// Sparse columns `(row, value)` of the standard-form matrix.
    cols: Vec<Vec<(usize, T)>>,
    b: Vec<T>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    /// Row-major `m x m` basis inverse.
    binv: Vec<T>,
    xb: Vec<T>,
    first_artificial: usize,
    iterations: usize,
    max_iterations: usize,
    tol: T,
}

impl<T: Scalar> Tableau<T> {
    fn build(lp: &LinearProgram<T>) -> Result<(Self, usize)> {
        let n = lp.num_vars();
        let tol = T::tolerance();
        for c in &lp.constraints {
            if let Some(&(j, _)) = c.coeffs.iter().find(|(j, _)| *j >= n) {
                return Err(Error::Dimension(format!("constraint references variable {j} of {n}")));
            }
        }
        if lp.upper.len() != n {
            return Err(Error::Dimension("upper bound length mismatch".into()));
        }

        // Normalized rows: rhs >= 0.
        let mut rows: Vec<(Vec<(usize, T)>, Relation, T)> = Vec::new();
        for c in &lp.constraints {
            let (coeffs, rel, rhs) = if c.rhs < T::zero() {
                let flipped = match c.relation {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                (c.coeffs.iter().map(|&(j, a)| (j, -a)).collect(), flipped, -c.rhs)
            } else {
                (c.coeffs.clone(), c.relation, c.rhs)
            };
            rows.push((coeffs, rel, rhs));
        }
        for (j, &u) in lp.upper.iter().enumerate() {
            if u.is_finite() {
                if u < -tol {
                    return Err(Error::Infeasible);
                }
                rows.push((vec![(j, T::one())], Relation::Le, u.max(T::zero())));
            }
        }

        let m = rows.len();
        let slack_count = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let art_count = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let total = n + slack_count + art_count;
        let first_artificial = n + slack_count;

        let mut cols: Vec<Vec<(usize, T)>> = vec![Vec::new(); total];
        let mut b = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let (mut next_slack, mut next_art) = (n, first_artificial);
        for (i, (coeffs, rel, rhs)) in rows.into_iter().enumerate() {
            for (j, a) in coeffs {
                if a != T::zero() {
                    // merge duplicate entries
                    match cols[j].last_mut() {
                        Some((r, v)) if *r == i => *v += a,
                        _ => cols[j].push((i, a)),
                    }
                }
            }
            match rel {
                Relation::Le => {
                    cols[next_slack].push((i, T::one()));
                    basis.push(next_slack);
                    next_slack += 1;
                }
                Relation::Ge => {
                    cols[next_slack].push((i, -T::one()));
                    next_slack += 1;
                    cols[next_art].push((i, T::one()));
                    basis.push(next_art);
                    next_art += 1;
                }
                Relation::Eq => {
                    cols[next_art].push((i, T::one()));
                    basis.push(next_art);
                    next_art += 1;
                }
            }
            b.push(rhs);
        }

        let mut is_basic = vec![false; total];
        for &j in &basis {
            is_basic[j] = true;
        }
        let mut binv = vec![T::zero(); m * m];
        for i in 0..m {
            binv[i * m + i] = T::one();
        }
        let xb = b.clone();
        let max_iterations = 50 * (m + total) + 1000;
        Ok((
            Tableau {
                m,
                cols,
                b,
                basis,
                is_basic,
                binv,
                xb,
                first_artificial,
                iterations: 0,
                max_iterations,
                tol,
            },
            art_count,
        ))
    }

    fn duals(&self, cost: &[T]) -> Vec<T> {
        let m = self.m;
        let mut y = vec![T::zero(); m];
        for (i, &bj) in self.basis.iter().enumerate() {
            let cb = cost[bj];
            if cb != T::zero() {
                let row = &self.binv[i * m..(i + 1) * m];
                for (yk, &v) in y.iter_mut().zip(row) {
                    *yk += cb * v;
                }
            }
        }
        y
    }

    fn ftran(&self, j: usize) -> Vec<T> {
        let m = self.m;
        let mut alpha = vec![T::zero(); m];
        for &(r, v) in &self.cols[j] {
            for (i, a) in alpha.iter_mut().enumerate() {
                *a += self.binv[i * m + r] * v;
            }
        }
        alpha
    }

    fn pivot(&mut self, p: usize, q: usize, alpha: &[T]) {
        let m = self.m;
        let t = self.xb[p] / alpha[p];
        for i in 0..m {
            if i != p {
                self.xb[i] -= t * alpha[i];
                if self.xb[i] < T::zero() && self.xb[i] > -self.tol {
                    self.xb[i] = T::zero();
                }
            }
        }
        self.xb[p] = t;

        let inv = alpha[p].recip();
        for k in 0..m {
            self.binv[p * m + k] *= inv;
        }
        for i in 0..m {
            if i != p && alpha[i] != T::zero() {
                let f = alpha[i];
                for k in 0..m {
                    let v = self.binv[p * m + k];
                    self.binv[i * m + k] -= f * v;
                }
            }
        }
        self.is_basic[self.basis[p]] = false;
        self.is_basic[q] = true;
        self.basis[p] = q;
        self.iterations += 1;
        if self.iterations % REFACTOR_EVERY == 0 {
            self.refactor();
        }
    }

    /// Rebuilds the basis inverse by Gauss-Jordan elimination with partial pivoting.
    fn refactor(&mut self) {
        let m = self.m;
        let mut a = vec![T::zero(); m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for &(r, v) in &self.cols[j] {
                a[r * m + k] = v;
            }
        }
        let mut inv = vec![T::zero(); m * m];
        for i in 0..m {
            inv[i * m + i] = T::one();
        }
        for c in 0..m {
            let piv = (c..m)
                .max_by(|&x, &y| a[x * m + c].abs().partial_cmp(&a[y * m + c].abs()).unwrap())
                .unwrap();
            if a[piv * m + c].abs() <= T::epsilon() {
                // singular basis; keep the product-form inverse
                return;
            }
            if piv != c {
                for k in 0..m {
                    a.swap(piv * m + k, c * m + k);
                    inv.swap(piv * m + k, c * m + k);
                }
            }
            let d = a[c * m + c].recip();
            for k in 0..m {
                a[c * m + k] *= d;
                inv[c * m + k] *= d;
            }
            for r in 0..m {
                if r != c {
                    let f = a[r * m + c];
                    if f != T::zero() {
                        for k in 0..m {
                            let (av, iv) = (a[c * m + k], inv[c * m + k]);
                            a[r * m + k] -= f * av;
                            inv[r * m + k] -= f * iv;
                        }
                    }
                }
            }
        }
        self.binv = inv;
        for i in 0..m {
            let v: T = (0..m).map(|k| self.binv[i * m + k] * self.b[k]).sum();
            self.xb[i] = if v < T::zero() && v > -self.tol { T::zero() } else { v };
        }
    }

    /// Maximizes `cost` over columns with `allowed(j)`.
    fn optimize(&mut self, cost: &[T], allowed: impl Fn(usize) -> bool) -> Result<()> {
        let tol = self.tol;
        let mut bland = false;
        let mut degenerate = 0usize;
        loop {
            if self.iterations > self.max_iterations {
                return Err(Error::IterationLimit);
            }
            let y = self.duals(cost);
            let mut entering: Option<(usize, T)> = None;
            for j in 0..self.cols.len() {
                if self.is_basic[j] || !allowed(j) {
                    continue;
                }
                let d = cost[j] - self.cols[j].iter().map(|&(r, v)| y[r] * v).sum::<T>();
                if d > tol {
                    if bland {
                        entering = Some((j, d));
                        break;
                    }
                    if entering.map_or(true, |(_, best)| d > best) {
                        entering = Some((j, d));
                    }
                }
            }
            let Some((q, _)) = entering else {
                return Ok(());
            };
            let alpha = self.ftran(q);

            let mut leave: Option<(usize, T)> = None;
            for i in 0..self.m {
                if alpha[i] > tol {
                    let ratio = self.xb[i] / alpha[i];
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((p, best)) => {
                            let better = if ratio < best - tol {
                                true
                            } else if ratio <= best + tol {
                                if bland {
                                    self.basis[i] < self.basis[p]
                                } else {
                                    alpha[i] > alpha[p]
                                }
                            } else {
                                false
                            };
                            if better { Some((i, ratio)) } else { Some((p, best)) }
                        }
                    };
                }
            }
            let Some((p, step)) = leave else {
                return Err(Error::Unbounded);
            };
            if step <= tol {
                degenerate += 1;
                if degenerate > DEGENERATE_STREAK {
                    bland = true;
                }
            } else {
                degenerate = 0;
            }
            self.pivot(p, q, &alpha);
        }
    }
}

/// Solves a linear program to optimality.
pub fn solve_lp<T: Scalar>(lp: &LinearProgram<T>) -> Result<LpSolution<T>> {
    let n = lp.num_vars();
    let (mut tab, art_count) = Tableau::build(lp)?;
    let total = tab.cols.len();
    let first_art = tab.first_artificial;

    if art_count > 0 {
        let phase1: Vec<T> = (0..total)
            .map(|j| if j >= first_art { -T::one() } else { T::zero() })
            .collect();
        tab.optimize(&phase1, |_| true)?;
        let infeas: T = tab
            .basis
            .iter()
            .zip(&tab.xb)
            .filter(|(&j, _)| j >= first_art)
            .map(|(_, &v)| v)
            .sum();
        let scale = T::one() + tab.b.iter().fold(T::zero(), |a, &v| a.max(v.abs()));
        if infeas > tab.tol.sqrt() * scale {
            return Err(Error::Infeasible);
        }
        // Drive zero-level artificials out of the basis where possible.
        for p in 0..tab.m {
            if tab.basis[p] < first_art {
                continue;
            }
            let m = tab.m;
            let candidate = (0..first_art).find(|&j| {
                !tab.is_basic[j]
                    && tab.cols[j]
                        .iter()
                        .map(|&(r, v)| tab.binv[p * m + r] * v)
                        .sum::<T>()
                        .abs()
                        > tab.tol.sqrt()
            });
            if let Some(q) = candidate {
                let alpha = tab.ftran(q);
                tab.xb[p] = T::zero();
                tab.pivot(p, q, &alpha);
            }
        }
    }

    let mut cost = vec![T::zero(); total];
    cost[..n].copy_from_slice(&lp.objective);
    tab.optimize(&cost, |j| j < first_art)?;

    let mut x = vec![T::zero(); n];
    for (&j, &v) in tab.basis.iter().zip(&tab.xb) {
        if j < n {
            x[j] = v.max(T::zero());
        }
    }
    Ok(LpSolution {
        objective: lp.objective_value(&x),
        x,
        iterations: tab.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_lp() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.add(vec![(0, 1.0)], Relation::Le, 1.0);
        lp.add(vec![(1, 1.0)], Relation::Le, 1.0);
        let s = solve_lp(&lp).unwrap();
        assert!(f64::abs(s.objective - 2.0) < 1e-12);
    }

    #[test]
    fn upper_bounds_and_equalities() {
        // max 3x + 2y, x + y = 4, x <= 3 (bound), y >= 0.5
        let mut lp = LinearProgram::new(vec![3.0, 2.0]);
        lp.upper[0] = 3.0;
        lp.add(vec![(0, 1.0), (1, 1.0)], Relation::Eq, 4.0);
        lp.add(vec![(1, 1.0)], Relation::Ge, 0.5);
        let s = solve_lp(&lp).unwrap();
        assert!(f64::abs(s.objective - 11.0) < 1e-10);
        assert!(f64::abs(s.x[0] - 3.0) < 1e-10 && f64::abs(s.x[1] - 1.0) < 1e-10);
    }

    #[test]
    fn textbook_example() {
        // max 3x1 + 5x2; x1 <= 4; 2x2 <= 12; 3x1 + 2x2 <= 18 -> 36 at (2, 6)
        let mut lp = LinearProgram::new(vec![3.0, 5.0]);
        lp.add(vec![(0, 1.0)], Relation::Le, 4.0);
        lp.add(vec![(1, 2.0)], Relation::Le, 12.0);
        lp.add(vec![(0, 3.0), (1, 2.0)], Relation::Le, 18.0);
        let s = solve_lp(&lp).unwrap();
        assert!(f64::abs(s.objective - 36.0) < 1e-10);
    }

    #[test]
    fn negative_rhs_is_normalized() {
        // max -x, -x <= -2  => x >= 2 -> -2
        let mut lp = LinearProgram::new(vec![-1.0]);
        lp.add(vec![(0, -1.0)], Relation::Le, -2.0);
        let s = solve_lp(&lp).unwrap();
        assert!(f64::abs(s.objective + 2.0) < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add(vec![(0, 1.0)], Relation::Le, 1.0);
        lp.add(vec![(0, 1.0)], Relation::Ge, 2.0);
        assert!(matches!(solve_lp(&lp), Err(Error::Infeasible)));

        let mut lp = LinearProgram::new(vec![1.0, 0.0]);
        lp.add(vec![(1, 1.0)], Relation::Le, 1.0);
        assert!(matches!(solve_lp(&lp), Err(Error::Unbounded)));
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(vec![1.0, 2.0]);
        lp.add(vec![(0, 1.0), (1, 1.0)], Relation::Eq, 1.0);
        lp.add(vec![(0, 2.0), (1, 2.0)], Relation::Eq, 2.0);
        let s = solve_lp(&lp).unwrap();
        assert!(f64::abs(s.objective - 2.0) < 1e-10);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example cycles under naive Dantzig pricing.
        let mut lp = LinearProgram::new(vec![0.75, -150.0, 0.02, -6.0]);
        lp.add(vec![(0, 0.25), (1, -60.0), (2, -0.04), (3, 9.0)], Relation::Le, 0.0);
        lp.add(vec![(0, 0.5), (1, -90.0), (2, -0.02), (3, 3.0)], Relation::Le, 0.0);
        lp.add(vec![(2, 1.0)], Relation::Le, 1.0);
        let s = solve_lp(&lp).unwrap();
        assert!(f64::abs(s.objective - 0.05) < 1e-9);
    }

    #[test]
    fn works_in_f32() {
        let mut lp = LinearProgram::new(vec![3.0f32, 5.0]);
        lp.add(vec![(0, 1.0)], Relation::Le, 4.0);
        lp.add(vec![(1, 2.0)], Relation::Le, 12.0);
        lp.add(vec![(0, 3.0), (1, 2.0)], Relation::Le, 18.0);
        let s = solve_lp(&lp).unwrap();
        assert!((s.objective - 36.0).abs() < 1e-3);
    }
}
