//! UAV transmit power for a fixed association.
//!
//! The power budget is per UAV and the objective separates across UAVs, so
//! each UAV solves its own dual problem. For multipliers `(lambda, mu)` the
//! stationary power on a link is `[mu B / (ln2 lambda) - B N0 / h]^+`, a
//! water-filling form; `lambda` is driven by a diminishing-step projected
//! subgradient on the budget residual.

use ndarray::Array3;

use crate::assoc::Association;
use crate::channel::AccessChannel;
use crate::error::{Error, Result, Violation};
use crate::geometry::RadioParams;
use crate::scalar::Scalar;

/// Transmit powers `P[[l, u, n]]` (watts) with each UAV's peak budget.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation<T> {
    pub power: Array3<T>,
    pub budget: Vec<T>,
}

impl<T: Scalar> PowerAllocation<T> {
    /// `P = budget / N` on every associated link, zero elsewhere.
    pub fn uniform(assoc: &Association, budget: &[T], rbs: usize) -> Self {
        let mut power = Array3::zeros(assoc.eps.dim());
        for ((l, u, n), p) in power.indexed_iter_mut() {
            if assoc.eps[[l, u, n]] {
                *p = budget[l] / T::from_usize_lossy(rbs);
            }
        }
        PowerAllocation {
            power,
            budget: budget.to_vec(),
        }
    }

    pub fn total(&self, l: usize) -> T {
        self.power.index_axis(ndarray::Axis(0), l).sum()
    }

    pub fn validate(&self, assoc: &Association) -> std::result::Result<(), Violation> {
        for ((l, u, n), &p) in self.power.indexed_iter() {
            if p < T::zero() || (p > T::zero() && !assoc.eps[[l, u, n]]) {
                return Err(Violation::PowerOnIdleLink { uav: l, user: u, rb: n });
            }
        }
        let slack = T::lit(1e3) * T::epsilon();
        for (l, &cap) in self.budget.iter().enumerate() {
            if self.total(l) > cap * (T::one() + slack) {
                return Err(Violation::PowerBudget { uav: l });
            }
        }
        Ok(())
    }
}

/// Stationary power for given multipliers.
pub fn power_from_duals<T: Scalar>(lambda: T, mu: T, gain: T, bandwidth: T, noise_psd: T) -> Result<T> {
    if !(lambda > T::zero()) {
        return Err(Error::Domain(format!("degenerate dual: lambda = {lambda}")));
    }
    let level = mu * bandwidth / (T::LN_2() * lambda);
    Ok((level - bandwidth * noise_psd / gain).max(T::zero()))
}

/// Diminishing step `delta0 / sqrt(i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule<T> {
    pub delta0: T,
}

impl<T: Scalar> StepSchedule<T> {
    pub fn step(&self, i: usize) -> T {
        self.delta0 / T::from_usize_lossy(i.max(1)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualSettings<T> {
    pub schedule: StepSchedule<T>,
    /// Stop when the multiplier moves less than this (log scale) in one step.
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Scalar> Default for DualSettings<T> {
    fn default() -> Self {
        DualSettings {
            schedule: StepSchedule { delta0: T::lit(0.1) },
            tol: T::lit(1e-6),
            max_iter: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualState<T> {
    pub lambda: Vec<T>,
    pub mu: Vec<T>,
    /// Iterations used per UAV.
    pub iterations: Vec<usize>,
    /// Last step size per UAV.
    pub step: Vec<T>,
}

/// Result of a single-UAV dual solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkPowers<T> {
    pub power: Vec<T>,
    pub lambda: T,
    pub mu: T,
    pub iterations: usize,
    pub last_step: T,
    pub converged: bool,
}

/// Water levels shifted so the budget binds exactly, starting from the
/// dual's active set. Only links with `level > noise` stay active.
fn enforce_budget<T: Scalar>(noise: &[T], mut active: Vec<bool>, budget: T) -> (Vec<T>, T) {
    if !active.iter().any(|&a| a) {
        // activate the strongest link
        let best = (0..noise.len())
            .min_by(|&a, &b| noise[a].partial_cmp(&noise[b]).unwrap())
            .unwrap();
        active[best] = true;
    }
    loop {
        let k = T::from_usize_lossy(active.iter().filter(|&&a| a).count());
        let sum_noise: T = noise.iter().zip(&active).filter(|(_, &a)| a).map(|(&s, _)| s).sum();
        let level = (budget + sum_noise) / k;
        let mut changed = false;
        for (i, &s) in noise.iter().enumerate() {
            let want = level > s;
            if want != active[i] {
                // drop infeasible links first; add newly submerged ones afterwards
                if active[i] || !noise.iter().zip(&active).any(|(&t, &a)| a && level <= t) {
                    active[i] = want;
                    changed = true;
                }
            }
        }
        if !changed {
            let p = noise
                .iter()
                .zip(&active)
                .map(|(&s, &a)| if a { (level - s).max(T::zero()) } else { T::zero() })
                .collect();
            return (p, level);
        }
    }
}

/// Dual subgradient solve for one UAV's links.
///
/// `gains` are the access gains of the associated links. `lambda` is
/// updated multiplicatively, `lambda <- lambda * exp(-delta_i * g)` with
/// `g` the budget residual normalized by the budget and clipped to
/// `[-1, 1]`; this is the projected subgradient step in `ln lambda`, which
/// keeps `lambda > 0`. Stationarity in `R_l` fixes `mu = 1`.
pub fn solve_uav<T: Scalar>(
    gains: &[T],
    budget: T,
    radio: &RadioParams<T>,
    settings: &DualSettings<T>,
) -> Result<LinkPowers<T>> {
    if gains.is_empty() {
        return Ok(LinkPowers {
            power: Vec::new(),
            lambda: T::zero(),
            mu: T::one(),
            iterations: 0,
            last_step: T::zero(),
            converged: true,
        });
    }
    if gains.iter().any(|&h| !(h > T::zero())) {
        return Err(Error::Domain("access gains must be positive".into()));
    }
    let b = radio.rb_bandwidth;
    let noise: Vec<T> = gains.iter().map(|&h| b * radio.noise_psd / h).collect();
    let mu = T::one();

    let k = T::from_usize_lossy(gains.len());
    let level0 = (budget + noise.iter().copied().sum::<T>()) / k;
    let mut lambda = mu * b / (T::LN_2() * level0);
    let mut converged = false;
    let mut iterations = 0;
    let mut last_step = T::zero();
    for i in 1..=settings.max_iter {
        iterations = i;
        let used: T = gains
            .iter()
            .map(|&h| power_from_duals(lambda, mu, h, b, radio.noise_psd))
            .sum::<Result<T>>()?;
        let residual = ((budget - used) / budget).max(-T::one()).min(T::one());
        last_step = settings.schedule.step(i);
        let mv = last_step * residual;
        lambda = lambda * (-mv).exp();
        if mv.abs() < settings.tol {
            converged = true;
            break;
        }
    }
    let active: Vec<bool> = gains
        .iter()
        .map(|&h| power_from_duals(lambda, mu, h, b, radio.noise_psd).map(|p| p > T::zero()))
        .collect::<Result<_>>()?;
    let (power, level) = enforce_budget(&noise, active, budget);
    Ok(LinkPowers {
        power,
        lambda: mu * b / (T::LN_2() * level),
        mu,
        iterations,
        last_step,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerSolution<T> {
    pub allocation: PowerAllocation<T>,
    pub duals: DualState<T>,
    /// Access rate sum of each UAV at the optimized powers, bits/s.
    pub access_rate: Vec<T>,
    pub converged: bool,
}

/// Optimal powers for every UAV of an association.
pub fn subgradient_solve<T: Scalar>(
    assoc: &Association,
    access: &AccessChannel<T>,
    radio: &RadioParams<T>,
    budget: &[T],
    settings: &DualSettings<T>,
) -> Result<PowerSolution<T>> {
    if assoc.eps.dim() != access.gain.dim() || budget.len() != assoc.eps.dim().0 {
        return Err(Error::Dimension("association, gains, and budgets disagree".into()));
    }
    let l_count = assoc.eps.dim().0;
    let mut power = Array3::zeros(assoc.eps.dim());
    let mut duals = DualState {
        lambda: vec![T::zero(); l_count],
        mu: vec![T::one(); l_count],
        iterations: vec![0; l_count],
        step: vec![T::zero(); l_count],
    };
    let mut access_rate = vec![T::zero(); l_count];
    let mut converged = true;
    for l in 0..l_count {
        let links: Vec<(usize, usize)> = assoc.links_of(l).collect();
        let gains: Vec<T> = links.iter().map(|&(u, n)| access.gain[[l, u, n]]).collect();
        let sol = solve_uav(&gains, budget[l], radio, settings)?;
        for (&(u, n), &p) in links.iter().zip(&sol.power) {
            power[[l, u, n]] = p;
        }
        access_rate[l] = gains
            .iter()
            .zip(&sol.power)
            .map(|(&h, &p)| crate::rate::access_rate(p, h, radio.rb_bandwidth, radio.noise_psd))
            .sum();
        duals.lambda[l] = sol.lambda;
        duals.mu[l] = sol.mu;
        duals.iterations[l] = sol.iterations;
        duals.step[l] = sol.last_step;
        converged &= sol.converged;
    }
    Ok(PowerSolution {
        allocation: PowerAllocation {
            power,
            budget: budget.to_vec(),
        },
        duals,
        access_rate,
        converged,
    })
}

/// Reference water-filling by bisection on the common level `w`:
/// `sum [w - B N0 / h]^+ = budget`.
pub fn waterfill_bisect<T: Scalar>(gains: &[T], budget: T, bandwidth: T, noise_psd: T) -> Result<Vec<T>> {
    let floors: Vec<T> = gains
        .iter()
        .filter(|&&h| h > T::zero())
        .map(|&h| bandwidth * noise_psd / h)
        .collect();
    if floors.is_empty() {
        return Err(Error::Domain("no link with positive gain".into()));
    }
    let fill = |w: T| -> T {
        gains
            .iter()
            .map(|&h| if h > T::zero() { (w - bandwidth * noise_psd / h).max(T::zero()) } else { T::zero() })
            .sum()
    };
    let mut lo = floors.iter().copied().fold(T::infinity(), T::min);
    let mut hi = floors.iter().copied().fold(T::zero(), T::max) + budget;
    for _ in 0..400 {
        let mid = T::lit(0.5) * (lo + hi);
        if fill(mid) > budget {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= T::epsilon() * hi {
            break;
        }
    }
    let w = T::lit(0.5) * (lo + hi);
    Ok(gains
        .iter()
        .map(|&h| if h > T::zero() { (w - bandwidth * noise_psd / h).max(T::zero()) } else { T::zero() })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RadioConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn radio() -> RadioParams<f64> {
        RadioConfig::default().to_params().unwrap()
    }

    fn sum_rate(gains: &[f64], p: &[f64], r: &RadioParams<f64>) -> f64 {
        gains
            .iter()
            .zip(p)
            .map(|(&h, &p)| crate::rate::access_rate(p, h, r.rb_bandwidth, r.noise_psd))
            .sum()
    }

    #[test]
    fn duals_to_power_examples() {
        let (b, n0, h) = (180e3, 1e-14 / 180e3, 1e-9);
        let noise = b * n0 / h;
        let lambda = b / (std::f64::consts::LN_2 * noise);
        assert!(power_from_duals(lambda, 1.0, h, b, n0).unwrap() <= 1e-12 * noise);
        assert_eq!(power_from_duals(2.0 * lambda, 1.0, h, b, n0).unwrap(), 0.0);

        // mu = ln2, lambda = 1, B N0 / h = B / 2  ->  B - B/2
        let n0 = 0.5 * h;
        let p = power_from_duals(1.0, std::f64::consts::LN_2, h, b, n0).unwrap();
        assert!((p - 0.5 * b).abs() < 1e-6);

        // halving h lowers P by B N0 / h
        let n0 = 1e-20;
        let p1 = power_from_duals(1e4, 1.0, 1e-9, b, n0).unwrap();
        let p2 = power_from_duals(1e4, 1.0, 0.5e-9, b, n0).unwrap();
        assert!(((p1 - p2) - b * n0 / 1e-9).abs() < 1e-9 * p1);

        assert!(power_from_duals(0.0, 1.0, h, b, n0).is_err());
    }

    #[test]
    fn single_link_takes_the_budget() {
        let r = radio();
        let s = solve_uav(&[3e-10], 1.0, &r, &DualSettings::default()).unwrap();
        assert!((s.power[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equal_gains_split_evenly() {
        let r = radio();
        let s = solve_uav(&[2e-10, 2e-10], 1.0, &r, &DualSettings::default()).unwrap();
        assert!((s.power[0] - 0.5).abs() < 1e-12 && (s.power[1] - 0.5).abs() < 1e-12);
        let w = waterfill_bisect(&[1e-9; 4], 2.0, r.rb_bandwidth, r.noise_psd).unwrap();
        assert!(w.iter().all(|&p| (p - 0.5).abs() < 1e-12));
    }

    #[test]
    fn weak_link_stays_dry_below_threshold() {
        let r = radio();
        let strong = 1e-10;
        let weak = 1e-11;
        let floor = |h: f64| r.rb_noise() / h;
        let threshold = floor(weak) - floor(strong);
        let budget = 0.5 * threshold;
        let w = waterfill_bisect(&[strong, weak], budget, r.rb_bandwidth, r.noise_psd).unwrap();
        assert!((w[0] - budget).abs() < 1e-12 * budget.max(1.0) && w[1] == 0.0);
        let s = solve_uav(&[strong, weak], budget, &r, &DualSettings::default()).unwrap();
        assert!((s.power[0] - budget).abs() < 1e-12 && s.power[1] == 0.0);
    }

    #[test]
    fn bisection_needs_a_live_link() {
        assert!(waterfill_bisect(&[0.0, 0.0], 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn random_instances_match_bisection() {
        let r = radio();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let k = rng.gen_range(1..=10);
            let gains: Vec<f64> = (0..k).map(|_| 10f64.powf(rng.gen_range(-13.0..-8.0))).collect();
            let budget = rng.gen_range(0.01..10.0);
            let s = solve_uav(&gains, budget, &r, &DualSettings::default()).unwrap();
            let o = waterfill_bisect(&gains, budget, r.rb_bandwidth, r.noise_psd).unwrap();
            let (a, b) = (sum_rate(&gains, &s.power, &r), sum_rate(&gains, &o, &r));
            assert!((a - b).abs() <= 1e-6 * b, "{a} vs {b}");
            assert!((s.power.iter().sum::<f64>() - budget).abs() <= 1e-9 * budget);
        }
    }

    #[test]
    fn finite_difference_marginals() {
        let r = radio();
        let gains = [3e-10, 1e-10, 5e-11];
        let s = solve_uav(&gains, 0.8, &r, &DualSettings::default()).unwrap();
        for (i, (&h, &p)) in gains.iter().zip(&s.power).enumerate() {
            if p == 0.0 {
                continue;
            }
            let f = |x: f64| crate::rate::access_rate(x, h, r.rb_bandwidth, r.noise_psd);
            let eps = 1e-7 * p;
            let fd = (f(p + eps) - f(p - eps)) / (2.0 * eps);
            let analytic = r.rb_bandwidth * h / (std::f64::consts::LN_2 * (r.rb_noise() + p * h));
            assert!((fd - analytic).abs() <= 1e-5 * analytic, "link {i}");
            // all active links sit at the dual's water level
            assert!((analytic - s.lambda).abs() <= 1e-9 * s.lambda);
        }
    }

    #[test]
    fn uniform_and_budget_checks() {
        let mut a = Association::empty(1, 2, 4, 1);
        a.theta[[0, 0]] = true;
        a.eps[[0, 0, 1]] = true;
        let p = PowerAllocation::uniform(&a, &[2.0], 4);
        assert_eq!(p.power[[0, 0, 1]], 0.5);
        assert_eq!(p.total(0), 0.5);
        assert!(p.validate(&a).is_ok());
        let mut over = p.clone();
        over.power[[0, 0, 1]] = 2.5;
        assert_eq!(over.validate(&a), Err(Violation::PowerBudget { uav: 0 }));
        let mut idle = p;
        idle.power[[0, 1, 0]] = 0.1;
        assert!(matches!(idle.validate(&a), Err(Violation::PowerOnIdleLink { .. })));
    }
}
