//! Best-first branch and bound over binary variables.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::lp::{solve_lp, Constraint, LinearProgram, LpSolution};
use crate::scalar::Scalar;

/// A maximization MILP whose integer variables are binary.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpInstance<T> {
    pub lp: LinearProgram<T>,
    /// `integer[j]` marks `x_j` as binary.
    pub integer: Vec<bool>,
}

impl<T: Scalar> MilpInstance<T> {
    pub fn num_vars(&self) -> usize {
        self.lp.num_vars()
    }

    /// Plain-text dump: objective row, one line per constraint, integrality flags.
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "vars {}", self.num_vars());
        let _ = write!(out, "max");
        for (j, c) in self.lp.objective.iter().enumerate() {
            if *c != T::zero() {
                let _ = write!(out, " {c}*x{j}");
            }
        }
        out.push('\n');
        for c in &self.lp.constraints {
            let _ = write!(out, "row");
            for (j, a) in &c.coeffs {
                let _ = write!(out, " {a}*x{j}");
            }
            let rel = match c.relation {
                crate::lp::Relation::Le => "<=",
                crate::lp::Relation::Ge => ">=",
                crate::lp::Relation::Eq => "=",
            };
            let _ = writeln!(out, " {rel} {}", c.rhs);
        }
        for (j, u) in self.lp.upper.iter().enumerate() {
            if u.is_finite() {
                let _ = writeln!(out, "bound x{j} <= {u}");
            }
        }
        let ints: Vec<String> = self
            .integer
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(j, _)| format!("x{j}"))
            .collect();
        let _ = writeln!(out, "binary {}", ints.join(" "));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MilpSettings<T> {
    /// Absolute optimality gap in objective units.
    pub gap_tol: T,
    pub node_budget: usize,
    /// Distance from an integer below which a value counts as integral.
    pub integrality_tol: T,
}

impl<T: Scalar> Default for MilpSettings<T> {
    fn default() -> Self {
        MilpSettings {
            gap_tol: T::lit(1e-6),
            node_budget: 100_000,
            integrality_tol: T::lit(1e-6),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution<T> {
    pub x: Vec<T>,
    pub objective: T,
    /// Best remaining upper bound when the search stopped.
    pub bound: T,
    /// True when the incumbent is proven within `gap_tol` of the optimum.
    pub optimal: bool,
    pub nodes: usize,
}

/// A subproblem: the root LP with some binaries fixed.
#[derive(Debug, Clone)]
pub struct BnBNode<T> {
    pub fixed: Vec<(usize, bool)>,
    /// LP relaxation value of the parent (an upper bound on this subtree).
    pub bound: T,
    pub depth: usize,
    id: usize,
}

struct Queued<T>(BnBNode<T>);

impl<T: Scalar> PartialEq for Queued<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T: Scalar> Eq for Queued<T> {}
impl<T: Scalar> PartialOrd for Queued<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Scalar> Ord for Queued<T> {
    // max-heap: larger bound first, then older node
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .bound
            .partial_cmp(&other.0.bound)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.0.id.cmp(&self.0.id))
    }
}

/// Substitutes fixed binaries and returns the reduced LP with a column map.
fn restrict<T: Scalar>(lp: &LinearProgram<T>, fixed: &[Option<bool>]) -> (LinearProgram<T>, Vec<usize>, T) {
    let n = lp.num_vars();
    let mut new_index = vec![usize::MAX; n];
    let mut kept = Vec::new();
    for j in 0..n {
        if fixed[j].is_none() {
            new_index[j] = kept.len();
            kept.push(j);
        }
    }
    let mut constant = T::zero();
    for j in 0..n {
        if fixed[j] == Some(true) {
            constant += lp.objective[j];
        }
    }
    let constraints = lp
        .constraints
        .iter()
        .map(|c| {
            let mut rhs = c.rhs;
            let mut coeffs = Vec::with_capacity(c.coeffs.len());
            for &(j, a) in &c.coeffs {
                match fixed[j] {
                    None => coeffs.push((new_index[j], a)),
                    Some(true) => rhs -= a,
                    Some(false) => {}
                }
            }
            Constraint::new(coeffs, c.relation, rhs)
        })
        .collect();
    let reduced = LinearProgram {
        objective: kept.iter().map(|&j| lp.objective[j]).collect(),
        constraints,
        upper: kept.iter().map(|&j| lp.upper[j]).collect(),
    };
    (reduced, kept, constant)
}

/// LP relaxation of a node, lifted back to the full variable space.
fn relax<T: Scalar>(inst: &MilpInstance<T>, fixings: &[(usize, bool)]) -> Result<LpSolution<T>> {
    let n = inst.num_vars();
    let mut fixed = vec![None; n];
    for &(j, v) in fixings {
        fixed[j] = Some(v);
    }
    let (reduced, kept, constant) = restrict(&inst.lp, &fixed);
    // Constraints left with no free columns must already hold.
    for c in &reduced.constraints {
        if c.coeffs.is_empty() && !c.is_satisfied(&[], T::tolerance().sqrt()) {
            return Err(Error::Infeasible);
        }
    }
    let sol = solve_lp(&reduced)?;
    let mut x = vec![T::zero(); n];
    for (k, &j) in kept.iter().enumerate() {
        x[j] = sol.x[k];
    }
    for j in 0..n {
        if fixed[j] == Some(true) {
            x[j] = T::one();
        }
    }
    Ok(LpSolution {
        x,
        objective: sol.objective + constant,
        iterations: sol.iterations,
    })
}

/// LP relaxation of the whole instance.
pub fn solve_relaxation<T: Scalar>(inst: &MilpInstance<T>) -> Result<LpSolution<T>> {
    relax(inst, &[])
}

/// Most fractional binary; ties go to the lowest index.
fn branching_variable<T: Scalar>(inst: &MilpInstance<T>, x: &[T], tol: T) -> Option<usize> {
    let half = T::lit(0.5);
    let mut best: Option<(usize, T)> = None;
    for (j, &v) in x.iter().enumerate() {
        if !inst.integer[j] {
            continue;
        }
        let frac = v - v.floor();
        if frac <= tol || frac >= T::one() - tol {
            continue;
        }
        let score = (frac - half).abs();
        if best.map_or(true, |(_, s)| score < s) {
            best = Some((j, score));
        }
    }
    best.map(|(j, _)| j)
}

/// Primal heuristic: repeatedly fix the fractional binary closest to one
/// (or to zero when one is infeasible) and re-solve, until integral.
fn dive<T: Scalar>(
    inst: &MilpInstance<T>,
    start: &[(usize, bool)],
    mut x: Vec<T>,
    settings: &MilpSettings<T>,
) -> Option<(Vec<T>, T)> {
    let mut fixed = start.to_vec();
    let tol = settings.integrality_tol;
    loop {
        let pick = x
            .iter()
            .enumerate()
            .filter(|&(j, &v)| inst.integer[j] && v - v.floor() > tol && v - v.floor() < T::one() - tol)
            .fold(None::<(usize, T)>, |best, (j, &v)| match best {
                Some((_, b)) if b >= v => best,
                _ => Some((j, v)),
            });
        let Some((j, _)) = pick else {
            for (k, v) in x.iter_mut().enumerate() {
                if inst.integer[k] {
                    *v = v.round();
                }
            }
            let value = inst.lp.objective_value(&x);
            return Some((x, value));
        };
        let mut next = None;
        for v in [true, false] {
            fixed.push((j, v));
            if let Ok(s) = relax(inst, &fixed) {
                next = Some(s.x);
                break;
            }
            fixed.pop();
        }
        x = next?;
    }
}

/// Branch and bound: best-bound node selection, most-fractional branching,
/// down branch explored first on ties.
pub fn solve_milp<T: Scalar>(inst: &MilpInstance<T>, settings: &MilpSettings<T>) -> Result<MilpSolution<T>> {
    solve_milp_from(inst, settings, None)
}

/// [`solve_milp`] seeded with a known solution. A start that is not
/// integral and feasible is ignored.
pub fn solve_milp_from<T: Scalar>(
    inst: &MilpInstance<T>,
    settings: &MilpSettings<T>,
    start: Option<Vec<T>>,
) -> Result<MilpSolution<T>> {
    if inst.integer.len() != inst.num_vars() {
        return Err(Error::Dimension("integrality mask length".into()));
    }
    let tol = T::tolerance().sqrt();
    let mut incumbent: Option<(Vec<T>, T)> = start
        .filter(|x| {
            x.len() == inst.num_vars()
                && inst.lp.is_feasible(x, tol)
                && x.iter()
                    .zip(&inst.integer)
                    .all(|(&v, &int)| !int || (v - v.round()).abs() <= settings.integrality_tol)
        })
        .map(|x| {
            let value = inst.lp.objective_value(&x);
            (x, value)
        });
    let mut heap = BinaryHeap::new();
    let mut next_id = 0usize;
    heap.push(Queued(BnBNode {
        fixed: Vec::new(),
        bound: T::infinity(),
        depth: 0,
        id: next_id,
    }));
    next_id += 1;
    let mut nodes = 0usize;
    let mut exhausted = true;

    while let Some(Queued(node)) = heap.pop() {
        if let Some((_, best)) = &incumbent {
            if node.bound <= *best + settings.gap_tol {
                // best-first: every remaining node is dominated too
                heap.clear();
                break;
            }
        }
        if nodes >= settings.node_budget {
            heap.push(Queued(node));
            exhausted = false;
            break;
        }
        nodes += 1;

        let relaxed = match relax(inst, &node.fixed) {
            Ok(s) => s,
            Err(Error::Infeasible) => continue,
            Err(e) => return Err(e),
        };
        let bound = relaxed.objective.min(node.bound);
        if let Some((_, best)) = &incumbent {
            if bound <= *best + settings.gap_tol {
                continue;
            }
        }
        match branching_variable(inst, &relaxed.x, settings.integrality_tol) {
            None => {
                let mut x = relaxed.x;
                for (j, v) in x.iter_mut().enumerate() {
                    if inst.integer[j] {
                        *v = v.round();
                    }
                }
                let value = inst.lp.objective_value(&x);
                if incumbent.as_ref().map_or(true, |(_, b)| value > *b) {
                    incumbent = Some((x, value));
                }
            }
            Some(j) => {
                if node.depth == 0 && incumbent.is_none() {
                    if let Some((x, value)) = dive(inst, &node.fixed, relaxed.x.clone(), settings) {
                        if incumbent.as_ref().map_or(true, |(_, b)| value > *b) {
                            incumbent = Some((x, value));
                        }
                    }
                }
                for v in [false, true] {
                    let mut fixed = node.fixed.clone();
                    fixed.push((j, v));
                    heap.push(Queued(BnBNode {
                        fixed,
                        bound,
                        depth: node.depth + 1,
                        id: next_id,
                    }));
                    next_id += 1;
                }
            }
        }
    }

    let Some((x, objective)) = incumbent else {
        return Err(if exhausted { Error::Infeasible } else { Error::IterationLimit });
    };
    let remaining = heap
        .iter()
        .map(|q| q.0.bound)
        .fold(objective, |a, b| a.max(b));
    Ok(MilpSolution {
        x,
        objective,
        bound: remaining,
        optimal: exhausted || remaining <= objective + settings.gap_tol,
        nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::Relation;

    fn knapsack(values: &[f64], weights: &[f64], cap: f64) -> MilpInstance<f64> {
        let n = values.len();
        let mut lp = LinearProgram::new(values.to_vec());
        lp.upper = vec![1.0; n];
        lp.add(weights.iter().copied().enumerate().collect(), Relation::Le, cap);
        MilpInstance { lp, integer: vec![true; n] }
    }

    fn brute_knapsack(values: &[f64], weights: &[f64], cap: f64) -> f64 {
        let n = values.len();
        (0..1u32 << n)
            .filter_map(|mask| {
                let (mut v, mut w) = (0.0, 0.0);
                for i in 0..n {
                    if mask >> i & 1 == 1 {
                        v += values[i];
                        w += weights[i];
                    }
                }
                (w <= cap + 1e-12).then_some(v)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn knapsack_matches_brute_force() {
        let values = [10.0, 13.0, 7.0, 8.0, 4.0, 9.5];
        let weights = [3.0, 4.0, 2.0, 3.5, 1.0, 3.2];
        for cap in [0.5, 3.0, 5.5, 7.0, 9.9, 20.0] {
            let inst = knapsack(&values, &weights, cap);
            let sol = solve_milp(&inst, &MilpSettings { gap_tol: 0.0, ..Default::default() }).unwrap();
            assert!(sol.optimal);
            assert!((sol.objective - brute_knapsack(&values, &weights, cap)).abs() < 1e-9, "cap {cap}");
            assert!(inst.lp.is_feasible(&sol.x, 1e-9));
        }
    }

    #[test]
    fn relaxation_bounds_integer_optimum() {
        let values = [5.0, 4.0, 3.0];
        let weights = [2.0, 3.0, 1.5];
        let inst = knapsack(&values, &weights, 4.0);
        let lp = solve_relaxation(&inst).unwrap();
        let ip = solve_milp(&inst, &MilpSettings::default()).unwrap();
        assert!(lp.objective >= ip.objective - 1e-12);
    }

    #[test]
    fn node_budget_returns_incumbent_flagged() {
        let values: Vec<f64> = (0..14).map(|i| 10.0 + (i as f64 * 1.37).sin()).collect();
        let weights: Vec<f64> = (0..14).map(|i| 5.0 + (i as f64 * 0.91).cos()).collect();
        let inst = knapsack(&values, &weights, 31.3);
        let sol = solve_milp(&inst, &MilpSettings { gap_tol: 0.0, node_budget: 6, ..Default::default() });
        // the root dive supplies an incumbent even when the budget runs out
        let s = sol.unwrap();
        assert!(s.nodes <= 6);
        assert!(inst.lp.is_feasible(&s.x, 1e-9));
        assert!(s.bound >= s.objective);
    }

    #[test]
    fn seeded_start_is_kept_or_ignored() {
        let values = [10.0, 13.0, 7.0, 8.0];
        let weights = [3.0, 4.0, 2.0, 3.5];
        let inst = knapsack(&values, &weights, 7.0);
        let exact = MilpSettings { gap_tol: 0.0, ..Default::default() };
        let best = brute_knapsack(&values, &weights, 7.0);
        // optimal start: {1, 2} -> 20
        let good = solve_milp_from(&inst, &exact, Some(vec![0.0, 1.0, 1.0, 0.0])).unwrap();
        assert_eq!(good.objective, best);
        // over capacity and fractional starts are dropped, not trusted
        for bad in [vec![1.0, 1.0, 1.0, 1.0], vec![0.5, 0.0, 0.0, 0.0], vec![1.0]] {
            let sol = solve_milp_from(&inst, &exact, Some(bad)).unwrap();
            assert!(sol.optimal);
            assert!((sol.objective - best).abs() < 1e-9);
        }
    }

    #[test]
    fn infeasible_instance() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.upper = vec![1.0, 1.0];
        lp.add(vec![(0, 1.0), (1, 1.0)], Relation::Eq, 1.5);
        let inst = MilpInstance { lp, integer: vec![true, true] };
        assert!(matches!(solve_milp(&inst, &MilpSettings::default()), Err(Error::Infeasible)));
    }

    #[test]
    fn dump_lists_rows_and_binaries() {
        let inst = knapsack(&[1.0, 2.0], &[1.0, 1.0], 1.0);
        let d = inst.dump();
        assert!(d.contains("vars 2"));
        assert!(d.contains("row 1*x0 1*x1 <= 1"));
        assert!(d.contains("binary x0 x1"));
    }
}
