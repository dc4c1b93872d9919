//! Access and backhaul association for fixed powers and UAV positions.
//!
//! The association subproblem is a MILP in the binaries `eps[l,u,n]`
//! (user `u` served by UAV `l` on RB `n`) and `theta[m,l]` (UAV `l`
//! backhauled by balloon `m`), with one continuous rate `R_l` per UAV
//! linearizing the `min(access, backhaul)` objective.

use ndarray::{Array2, Array3};
use rand::Rng;

use crate::error::{Result, Violation};
use crate::lp::{LinearProgram, Relation};
use crate::milp::{solve_milp, solve_milp_from, solve_relaxation, MilpInstance, MilpSettings};
use crate::rate::RateTable;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Association {
    /// `eps[[l, u, n]]`
    pub eps: Array3<bool>,
    /// `theta[[m, l]]`
    pub theta: Array2<bool>,
}

impl Association {
    pub fn empty(uavs: usize, users: usize, rbs: usize, tbs: usize) -> Self {
        Association {
            eps: Array3::from_elem((uavs, users, rbs), false),
            theta: Array2::from_elem((tbs, uavs), false),
        }
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        let (l, u, n) = self.eps.dim();
        (l, u, n, self.theta.dim().0)
    }

    /// `(user, rb)` pairs served by UAV `l`.
    pub fn links_of(&self, l: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.eps
            .index_axis(ndarray::Axis(0), l)
            .indexed_iter()
            .filter(|(_, &on)| on)
            .map(|(idx, _)| idx)
            .collect::<Vec<_>>()
            .into_iter()
    }

    /// Serving `(uav, rb)` of a user, if any.
    pub fn serving(&self, u: usize) -> Option<(usize, usize)> {
        let (l_count, _, n_count, _) = self.dims();
        (0..l_count)
            .flat_map(|l| (0..n_count).map(move |n| (l, n)))
            .find(|&(l, n)| self.eps[[l, u, n]])
    }

    pub fn backhaul_of(&self, l: usize) -> Option<usize> {
        self.theta.column(l).iter().position(|&on| on)
    }

    /// Checks the per-user, per-RB, and per-UAV backhaul constraints.
    pub fn validate(&self) -> std::result::Result<(), Violation> {
        let (l_count, u_count, n_count, _) = self.dims();
        for u in 0..u_count {
            let c = (0..l_count)
                .map(|l| (0..n_count).filter(|&n| self.eps[[l, u, n]]).count())
                .sum::<usize>();
            if c > 1 {
                return Err(Violation::UserOverAssigned { user: u });
            }
        }
        for n in 0..n_count {
            let c = (0..l_count)
                .map(|l| (0..u_count).filter(|&u| self.eps[[l, u, n]]).count())
                .sum::<usize>();
            if c > 1 {
                return Err(Violation::RbReused { rb: n });
            }
        }
        for l in 0..l_count {
            if self.theta.column(l).iter().filter(|&&on| on).count() != 1 {
                return Err(Violation::BackhaulNotUnique { uav: l });
            }
        }
        Ok(())
    }
}

/// Column layout of the full P1 MILP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct P1Layout {
    pub uavs: usize,
    pub users: usize,
    pub rbs: usize,
    pub tbs: usize,
}

impl P1Layout {
    pub fn eps(&self, l: usize, u: usize, n: usize) -> usize {
        (l * self.users + u) * self.rbs + n
    }
    pub fn theta(&self, m: usize, l: usize) -> usize {
        self.uavs * self.users * self.rbs + m * self.uavs + l
    }
    pub fn rate(&self, l: usize) -> usize {
        self.uavs * self.users * self.rbs + self.tbs * self.uavs + l
    }
    pub fn num_vars(&self) -> usize {
        self.rate(self.uavs)
    }
}

/// Full association MILP over `eps`, `theta`, and `R_l`.
///
/// Rates are divided by `scale` (normally the RB bandwidth) so the
/// objective is in spectral-efficiency units.
pub fn build_p1_milp<T: Scalar>(rates: &RateTable<T>, scale: T) -> (MilpInstance<T>, P1Layout) {
    let (l_count, u_count, n_count, m_count) = rates.dims();
    let lay = P1Layout {
        uavs: l_count,
        users: u_count,
        rbs: n_count,
        tbs: m_count,
    };
    let nv = lay.num_vars();
    let mut objective = vec![T::zero(); nv];
    for l in 0..l_count {
        objective[lay.rate(l)] = T::one();
    }
    let mut lp = LinearProgram::new(objective);

    // R_l <= sum eps * r
    for l in 0..l_count {
        let mut row = vec![(lay.rate(l), T::one())];
        for u in 0..u_count {
            for n in 0..n_count {
                let r = rates.access[[l, u, n]] / scale;
                if r != T::zero() {
                    row.push((lay.eps(l, u, n), -r));
                }
            }
        }
        lp.add(row, Relation::Le, T::zero());
    }
    // R_l <= sum theta * R_ml
    for l in 0..l_count {
        let mut row = vec![(lay.rate(l), T::one())];
        for m in 0..m_count {
            row.push((lay.theta(m, l), -rates.backhaul[[m, l]] / scale));
        }
        lp.add(row, Relation::Le, T::zero());
    }
    // one (uav, rb) per user
    for u in 0..u_count {
        let row = (0..l_count)
            .flat_map(|l| (0..n_count).map(move |n| (lay.eps(l, u, n), T::one())))
            .collect();
        lp.add(row, Relation::Le, T::one());
    }
    // one (uav, user) per rb
    for n in 0..n_count {
        let row = (0..l_count)
            .flat_map(|l| (0..u_count).map(move |u| (lay.eps(l, u, n), T::one())))
            .collect();
        lp.add(row, Relation::Le, T::one());
    }
    // exactly one balloon per uav
    for l in 0..l_count {
        let row = (0..m_count).map(|m| (lay.theta(m, l), T::one())).collect();
        lp.add(row, Relation::Eq, T::one());
    }
    for l in 0..l_count {
        let cap = (0..m_count)
            .map(|m| rates.backhaul[[m, l]] / scale)
            .fold(T::zero(), T::max);
        lp.upper[lay.rate(l)] = cap;
    }
    let mut integer = vec![true; nv];
    for l in 0..l_count {
        integer[lay.rate(l)] = false;
    }
    (MilpInstance { lp, integer }, lay)
}

/// Per-UAV balloon with the highest backhaul rate; ties go to the lowest index.
pub fn best_backhaul<T: Scalar>(rates: &RateTable<T>) -> Array2<bool> {
    let (m_count, l_count) = rates.backhaul.dim();
    let mut theta = Array2::from_elem((m_count, l_count), false);
    for l in 0..l_count {
        let mut best = 0;
        for m in 1..m_count {
            if rates.backhaul[[m, l]] > rates.backhaul[[best, l]] {
                best = m;
            }
        }
        theta[[best, l]] = true;
    }
    theta
}

fn backhaul_caps<T: Scalar>(rates: &RateTable<T>, theta: &Array2<bool>) -> Vec<T> {
    let (m_count, l_count) = rates.backhaul.dim();
    (0..l_count)
        .map(|l| {
            (0..m_count)
                .filter(|&m| theta[[m, l]])
                .map(|m| rates.backhaul[[m, l]])
                .sum()
        })
        .collect()
}

/// Outcome of an association solve.
#[derive(Debug, Clone, PartialEq)]
pub struct AssocSolution<T> {
    pub association: Association,
    /// End-to-end rate of each UAV, bits/s.
    pub uav_rate: Vec<T>,
    pub objective: T,
    pub optimal: bool,
    pub nodes: usize,
}

fn finish<T: Scalar>(association: Association, rates: &RateTable<T>, optimal: bool, nodes: usize) -> AssocSolution<T> {
    let v = crate::rate::end_to_end_unchecked(&association, rates);
    AssocSolution {
        association,
        uav_rate: v.per_uav,
        objective: v.total,
        optimal,
        nodes,
    }
}

/// Solves the full MILP over `eps`, `theta`, and `R_l`.
pub fn solve_p1<T: Scalar>(rates: &RateTable<T>, scale: T, settings: &MilpSettings<T>) -> Result<AssocSolution<T>> {
    let (inst, lay) = build_p1_milp(rates, scale);
    let sol = solve_milp(&inst, settings)?;
    let mut assoc = Association::empty(lay.uavs, lay.users, lay.rbs, lay.tbs);
    for ((l, u, n), e) in assoc.eps.indexed_iter_mut() {
        *e = sol.x[lay.eps(l, u, n)] > T::lit(0.5);
    }
    for ((m, l), t) in assoc.theta.indexed_iter_mut() {
        *t = sol.x[lay.theta(m, l)] > T::lit(0.5);
    }
    Ok(finish(assoc, rates, sol.optimal, sol.nodes))
}

/// Access-only MILP with the backhaul association held fixed.
pub fn build_access_milp<T: Scalar>(
    rates: &RateTable<T>,
    theta: &Array2<bool>,
    scale: T,
) -> MilpInstance<T> {
    let (l_count, u_count, n_count, _) = rates.dims();
    let eps = |l: usize, u: usize, n: usize| (l * u_count + u) * n_count + n;
    let rate = |l: usize| l_count * u_count * n_count + l;
    let nv = rate(l_count);
    let mut objective = vec![T::zero(); nv];
    for l in 0..l_count {
        objective[rate(l)] = T::one();
    }
    let mut lp = LinearProgram::new(objective);
    for l in 0..l_count {
        let mut row = vec![(rate(l), T::one())];
        for u in 0..u_count {
            for n in 0..n_count {
                let r = rates.access[[l, u, n]] / scale;
                if r != T::zero() {
                    row.push((eps(l, u, n), -r));
                }
            }
        }
        lp.add(row, Relation::Le, T::zero());
    }
    for u in 0..u_count {
        let row = (0..l_count)
            .flat_map(|l| (0..n_count).map(move |n| (eps(l, u, n), T::one())))
            .collect();
        lp.add(row, Relation::Le, T::one());
    }
    for n in 0..n_count {
        let row = (0..l_count)
            .flat_map(|l| (0..u_count).map(move |u| (eps(l, u, n), T::one())))
            .collect();
        lp.add(row, Relation::Le, T::one());
    }
    for (l, cap) in backhaul_caps(rates, theta).into_iter().enumerate() {
        lp.upper[rate(l)] = cap / scale;
    }
    let mut integer = vec![true; nv];
    for l in 0..l_count {
        integer[rate(l)] = false;
    }
    MilpInstance { lp, integer }
}

/// RB-aggregated access MILP, exact when each `(uav, user)` rate is the
/// same on every RB: binaries `x[l,u]`, one UAV per user, at most `N`
/// served users in total.
pub fn build_compact_access_milp<T: Scalar>(
    rates: &RateTable<T>,
    theta: &Array2<bool>,
    scale: T,
) -> MilpInstance<T> {
    let (l_count, u_count, n_count, _) = rates.dims();
    let x = |l: usize, u: usize| l * u_count + u;
    let rate = |l: usize| l_count * u_count + l;
    let nv = rate(l_count);
    let mut objective = vec![T::zero(); nv];
    for l in 0..l_count {
        objective[rate(l)] = T::one();
    }
    let mut lp = LinearProgram::new(objective);
    for l in 0..l_count {
        let mut row = vec![(rate(l), T::one())];
        for u in 0..u_count {
            let r = rates.access[[l, u, 0]] / scale;
            if r != T::zero() {
                row.push((x(l, u), -r));
            }
        }
        lp.add(row, Relation::Le, T::zero());
    }
    for u in 0..u_count {
        lp.add((0..l_count).map(|l| (x(l, u), T::one())).collect(), Relation::Le, T::one());
    }
    if n_count < u_count {
        let all = (0..l_count)
            .flat_map(|l| (0..u_count).map(move |u| (x(l, u), T::one())))
            .collect();
        lp.add(all, Relation::Le, T::from_usize_lossy(n_count));
    }
    for (l, cap) in backhaul_caps(rates, theta).into_iter().enumerate() {
        lp.upper[rate(l)] = cap / scale;
    }
    let mut integer = vec![true; nv];
    for l in 0..l_count {
        integer[rate(l)] = false;
    }
    MilpInstance { lp, integer }
}

/// User-to-UAV assignment for an RB-flat table, improved by single moves
/// and pairwise swaps until no step gains. `rate[l][u]` is the per-user
/// rate, `cap[l]` the backhaul cap, and at most `slots` users are served.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatAssignment<T> {
    pub owner: Vec<Option<usize>>,
    pub load: Vec<T>,
}

impl<T: Scalar> FlatAssignment<T> {
    fn value(load: T, cap: T) -> T {
        load.min(cap)
    }

    pub fn objective(&self, cap: &[T]) -> T {
        self.load.iter().zip(cap).map(|(&s, &c)| Self::value(s, c)).sum()
    }

    /// Greedy start: users by descending best rate, each to the UAV with
    /// the largest capped gain (ties to the higher raw rate).
    pub fn greedy(rate: &Array2<T>, cap: &[T], slots: usize) -> Self {
        let (l_count, u_count) = rate.dim();
        let best = |u: usize| (0..l_count).map(|l| rate[[l, u]]).fold(T::zero(), |a, b| a.max(b));
        let mut order: Vec<usize> = (0..u_count).collect();
        order.sort_by(|&a, &b| best(b).partial_cmp(&best(a)).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
        let mut owner = vec![None; u_count];
        let mut load = vec![T::zero(); l_count];
        for &u in order.iter().take(slots) {
            let mut pick: Option<(usize, T, T)> = None;
            for l in 0..l_count {
                let r = rate[[l, u]];
                if r <= T::zero() {
                    continue;
                }
                let gain = Self::value(load[l] + r, cap[l]) - Self::value(load[l], cap[l]);
                if pick.map_or(true, |(_, g, pr)| gain > g || (gain == g && r > pr)) {
                    pick = Some((l, gain, r));
                }
            }
            if let Some((l, _, r)) = pick {
                owner[u] = Some(l);
                load[l] += r;
            }
        }
        FlatAssignment { owner, load }
    }

    /// Local search: reassign up to `max_k` users jointly (moves, swaps,
    /// chains, serve or drop) while the capped total gains. Larger moves
    /// are tried only once smaller ones stall.
    pub fn improve(&mut self, rate: &Array2<T>, cap: &[T], slots: usize, max_k: usize) {
        let cap_total: T = cap.iter().copied().sum();
        let mut k = 1;
        while k <= max_k {
            let total = self.objective(cap);
            let eps = T::tolerance().sqrt() * (T::one() + total.abs());
            if total >= cap_total - eps {
                break;
            }
            if self.joint_move(k, rate, cap, slots, eps) {
                k = 1;
            } else {
                k += 1;
            }
        }
        // recompute loads to shed accumulated rounding
        *self = Self::from_owner(std::mem::take(&mut self.owner), rate);
    }

    /// Applies the first improving reassignment of `k` users, each to a
    /// new owner (a UAV, or index `L` for unserved).
    fn joint_move(&mut self, k: usize, rate: &Array2<T>, cap: &[T], slots: usize, eps: T) -> bool {
        let (l_count, u_count) = rate.dim();
        if k > u_count {
            return false;
        }
        let served = self.owner.iter().filter(|o| o.is_some()).count();
        let code = |o: Option<usize>| o.unwrap_or(l_count);
        let mut users: Vec<usize> = (0..k).collect();
        let mut delta = vec![T::zero(); l_count];
        loop {
            let mut target = vec![0usize; k];
            'targets: loop {
                let moved = users.iter().zip(&target).all(|(&u, &t)| t != code(self.owner[u]));
                let count = served + target.iter().filter(|&&t| t < l_count).count()
                    - users.iter().filter(|&&u| self.owner[u].is_some()).count();
                if moved && count <= slots {
                    delta.iter_mut().for_each(|d| *d = T::zero());
                    for (&u, &t) in users.iter().zip(&target) {
                        if let Some(l) = self.owner[u] {
                            delta[l] -= rate[[l, u]];
                        }
                        if t < l_count {
                            delta[t] += rate[[t, u]];
                        }
                    }
                    let gain: T = (0..l_count)
                        .filter(|&l| delta[l] != T::zero())
                        .map(|l| Self::value(self.load[l] + delta[l], cap[l]) - Self::value(self.load[l], cap[l]))
                        .sum();
                    if gain > eps {
                        for (l, d) in delta.iter().enumerate() {
                            self.load[l] += *d;
                        }
                        for (&u, &t) in users.iter().zip(&target) {
                            self.owner[u] = (t < l_count).then_some(t);
                        }
                        return true;
                    }
                }
                for i in (0..k).rev() {
                    target[i] += 1;
                    if target[i] <= l_count {
                        continue 'targets;
                    }
                    target[i] = 0;
                }
                break;
            }
            // next k-subset in lexicographic order
            let mut i = k;
            loop {
                if i == 0 {
                    return false;
                }
                i -= 1;
                if users[i] < u_count - k + i {
                    users[i] += 1;
                    for j in (i + 1)..k {
                        users[j] = users[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    pub fn from_owner(owner: Vec<Option<usize>>, rate: &Array2<T>) -> Self {
        let mut load = vec![T::zero(); rate.nrows()];
        for (u, o) in owner.iter().enumerate() {
            if let Some(l) = *o {
                load[l] += rate[[l, u]];
            }
        }
        FlatAssignment { owner, load }
    }
}

/// The compact MILP point of an assignment: `x[l,u]` then `R_l`.
fn compact_point<T: Scalar>(a: &FlatAssignment<T>, cap: &[T], users: usize) -> Vec<T> {
    let uavs = cap.len();
    let mut x = vec![T::zero(); uavs * users + uavs];
    for (u, o) in a.owner.iter().enumerate() {
        if let Some(l) = *o {
            x[l * users + u] = T::one();
        }
    }
    for l in 0..uavs {
        x[uavs * users + l] = a.load[l].min(cap[l]);
    }
    x
}

/// Optimal access association for a fixed backhaul association.
///
/// Uses the RB-aggregated formulation when the rate table is flat across
/// RBs; served users then take RBs in ascending user order.
pub fn solve_access<T: Scalar>(
    rates: &RateTable<T>,
    theta: &Array2<bool>,
    scale: T,
    settings: &MilpSettings<T>,
) -> Result<AssocSolution<T>> {
    let (l_count, u_count, n_count, m_count) = rates.dims();
    let mut assoc = Association::empty(l_count, u_count, n_count, m_count);
    assoc.theta.assign(theta);
    let (optimal, nodes) = if rates.is_rb_flat() {
        let inst = build_compact_access_milp(rates, theta, scale);
        let rate = Array2::from_shape_fn((l_count, u_count), |(l, u)| rates.access[[l, u, 0]] / scale);
        let cap: Vec<T> = backhaul_caps(rates, theta).into_iter().map(|c| c / scale).collect();
        let slots = n_count.min(u_count);
        let mut start = FlatAssignment::greedy(&rate, &cap, slots);
        start.improve(&rate, &cap, slots, 2);
        // Triples are costly. Try them up front only when the root bound
        // says every cap can be filled, so a hit ends the search at once.
        let cap_total: T = cap.iter().copied().sum();
        if start.objective(&cap) < cap_total - settings.gap_tol
            && solve_relaxation(&inst)?.objective >= cap_total - settings.gap_tol
        {
            start.improve(&rate, &cap, slots, 3);
        }
        let sol = solve_milp_from(&inst, settings, Some(compact_point(&start, &cap, u_count)))?;
        let mut best = FlatAssignment::from_owner(
            (0..u_count)
                .map(|u| (0..l_count).find(|&l| sol.x[l * u_count + u] > T::lit(0.5)))
                .collect(),
            &rate,
        );
        if !sol.optimal {
            best.improve(&rate, &cap, slots, 3);
        }
        let mut next_rb = 0;
        for u in 0..u_count {
            if let Some(l) = best.owner[u] {
                assoc.eps[[l, u, next_rb]] = true;
                next_rb += 1;
            }
        }
        (sol.optimal, sol.nodes)
    } else {
        let inst = build_access_milp(rates, theta, scale);
        let sol = solve_milp(&inst, settings)?;
        for ((l, u, n), e) in assoc.eps.indexed_iter_mut() {
            *e = sol.x[(l * u_count + u) * n_count + n] > T::lit(0.5);
        }
        (sol.optimal, sol.nodes)
    };
    Ok(finish(assoc, rates, optimal, nodes))
}

/// Best backhaul attachment followed by the optimal access association.
pub fn associate<T: Scalar>(rates: &RateTable<T>, scale: T, settings: &MilpSettings<T>) -> Result<AssocSolution<T>> {
    let theta = best_backhaul(rates);
    solve_access(rates, &theta, scale, settings)
}

/// Benchmark association: each user in turn draws a uniformly random
/// `(uav, rb)` pair, redrawing while the RB is taken; each UAV draws a
/// random balloon. Users beyond the RB count stay unserved.
pub fn random_association<R: Rng + ?Sized>(
    uavs: usize,
    users: usize,
    rbs: usize,
    tbs: usize,
    rng: &mut R,
) -> Association {
    let mut a = Association::empty(uavs, users, rbs, tbs);
    let mut used = vec![false; rbs];
    let mut free = rbs;
    for u in 0..users {
        if free == 0 {
            break;
        }
        loop {
            let l = rng.gen_range(0..uavs);
            let n = rng.gen_range(0..rbs);
            if !used[n] {
                used[n] = true;
                free -= 1;
                a.eps[[l, u, n]] = true;
                break;
            }
        }
    }
    for l in 0..uavs {
        a.theta[[rng.gen_range(0..tbs), l]] = true;
    }
    a
}
