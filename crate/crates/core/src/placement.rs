//! Shrink-and-realign random search over horizontal UAV positions.
//!
//! Each iteration draws candidates on a circle of radius `r` around every
//! UAV, keeps any candidate that improves the objective, then halves `r`.

use rand::Rng;
use serde::Serialize;

use crate::assoc::{associate, Association, AssocSolution};
use crate::channel::{AccessChannel, BackhaulChannel};
use crate::error::{Error, Result};
use crate::geometry::{Area, Point3, Scenario};
use crate::milp::MilpSettings;
use crate::power::{subgradient_solve, DualSettings, PowerAllocation, PowerSolution};
use crate::rate::{end_to_end_unchecked, RateTable};
use crate::scalar::Scalar;
use crate::seeding::{substream, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacementSettings<T> {
    /// Candidates per UAV per iteration, the incumbent included.
    pub candidates: usize,
    /// Initial radius; a quarter of the shorter area side when `None`.
    pub r0: Option<T>,
    pub r_min: T,
    pub max_iter: usize,
    /// Relative improvement below which an iteration counts as stalled.
    pub rel_tol: T,
    /// Evaluate all `Q^L` combinations instead of one UAV at a time.
    pub joint: bool,
    /// Run the dual power solve for every candidate, not only at the end.
    pub refine_candidates: bool,
    pub milp: MilpSettings<T>,
    pub dual: DualSettings<T>,
}

impl<T: Scalar> Default for PlacementSettings<T> {
    fn default() -> Self {
        PlacementSettings {
            candidates: 8,
            r0: None,
            r_min: T::one(),
            max_iter: 20,
            rel_tol: T::lit(1e-3),
            joint: false,
            refine_candidates: false,
            milp: MilpSettings::default(),
            dual: DualSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlacementState<T> {
    pub positions: Vec<Point3<T>>,
    pub radius: T,
    pub iteration: usize,
    pub best: T,
    pub candidates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet<T> {
    /// `per_uav[l][0]` is the incumbent.
    pub per_uav: Vec<Vec<Point3<T>>>,
}

/// The incumbent plus `Q - 1` uniform-angle points on the circle of
/// radius `r`, clamped to the area.
pub fn generate_candidates<T: Scalar, R: Rng + ?Sized>(
    state: &PlacementState<T>,
    area: &Area<T>,
    rng: &mut R,
) -> CandidateSet<T> {
    let per_uav = state
        .positions
        .iter()
        .map(|p| {
            let mut c = vec![*p];
            for _ in 1..state.candidates {
                let phi = T::lit(rng.gen_range(0.0..std::f64::consts::TAU));
                let q = Point3::new(p.x + state.radius * phi.cos(), p.y + state.radius * phi.sin(), p.z);
                c.push(area.clamp(q));
            }
            c
        })
        .collect();
    CandidateSet { per_uav }
}

/// What a candidate placement is scored by.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// Optimal association at uniform power `P / N`.
    UniformPower,
    /// Optimal association followed by dual power allocation.
    Refined,
    /// A given association at uniform power.
    FixedAssociation(Association),
}

/// A scored placement with the decisions behind the score.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation<T> {
    pub value: T,
    pub per_uav: Vec<T>,
    pub association: Association,
    pub power: PowerAllocation<T>,
    pub nodes: usize,
    pub optimal: bool,
}

fn uniform_power<T: Scalar>(s: &Scenario<T>, assoc: &Association) -> PowerAllocation<T> {
    PowerAllocation::uniform(assoc, &s.peak_power, s.num_rbs())
}

/// Scores the scenario at its current UAV positions.
pub fn evaluate<T: Scalar>(
    s: &Scenario<T>,
    objective: &Objective,
    settings: &PlacementSettings<T>,
) -> Result<Evaluation<T>> {
    let access = AccessChannel::from_scenario(s)?;
    let backhaul = BackhaulChannel::from_scenario(s)?;
    let rates = RateTable::uniform(s, &access, &backhaul)?;
    match objective {
        Objective::FixedAssociation(a) => {
            if a.eps.dim() != rates.access.dim() || a.theta.dim() != rates.backhaul.dim() {
                return Err(Error::Dimension("association does not fit the scenario".into()));
            }
            let v = end_to_end_unchecked(a, &rates);
            Ok(Evaluation {
                value: v.total,
                per_uav: v.per_uav,
                association: a.clone(),
                power: uniform_power(s, a),
                nodes: 0,
                optimal: true,
            })
        }
        Objective::UniformPower => {
            let sol = associate(&rates, s.radio.rb_bandwidth, &settings.milp)?;
            let power = uniform_power(s, &sol.association);
            Ok(from_assoc(sol, power))
        }
        Objective::Refined => {
            let sol = associate(&rates, s.radio.rb_bandwidth, &settings.milp)?;
            let p = subgradient_solve(&sol.association, &access, &s.radio, &s.peak_power, &settings.dual)?;
            Ok(refined(sol, p, &rates))
        }
    }
}

fn from_assoc<T: Scalar>(sol: AssocSolution<T>, power: PowerAllocation<T>) -> Evaluation<T> {
    Evaluation {
        value: sol.objective,
        per_uav: sol.uav_rate,
        association: sol.association,
        power,
        nodes: sol.nodes,
        optimal: sol.optimal,
    }
}

/// Per-UAV `min(optimized access sum, backhaul)`.
fn refined<T: Scalar>(sol: AssocSolution<T>, p: PowerSolution<T>, rates: &RateTable<T>) -> Evaluation<T> {
    let per_uav: Vec<T> = p
        .access_rate
        .iter()
        .enumerate()
        .map(|(l, &acc)| {
            let cap: T = (0..rates.backhaul.dim().0)
                .filter(|&m| sol.association.theta[[m, l]])
                .map(|m| rates.backhaul[[m, l]])
                .sum();
            acc.min(cap)
        })
        .collect();
    Evaluation {
        value: per_uav.iter().copied().sum(),
        per_uav,
        association: sol.association,
        power: p.allocation,
        nodes: sol.nodes,
        optimal: sol.optimal,
    }
}

/// Association, dual power, and end-to-end total at the given positions.
pub fn evaluate_candidate_combination<T: Scalar>(
    positions: &[Point3<T>],
    s: &Scenario<T>,
    settings: &PlacementSettings<T>,
) -> Result<T> {
    if positions.len() != s.num_uavs() {
        return Err(Error::Dimension(format!("{} positions for {} UAVs", positions.len(), s.num_uavs())));
    }
    Ok(evaluate(&s.with_uav_positions(positions), &Objective::Refined, settings)?.value)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow<T> {
    pub iteration: usize,
    pub radius: T,
    pub objective: T,
    pub positions: Vec<Point3<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementOutcome<T> {
    pub state: PlacementState<T>,
    /// Score of the final placement under the search objective.
    pub evaluation: Evaluation<T>,
    /// Row 0 is the initial placement.
    pub trace: Vec<TraceRow<T>>,
    pub converged: bool,
    /// While-loop iterations run.
    pub iterations: usize,
    pub evaluations: usize,
}

const JOINT_LIMIT: f64 = 1e5;

/// Runs the search from the scenario's UAV positions. Randomness comes
/// from the scenario seed's placement stream.
pub fn optimize_placement<T: Scalar>(
    s: &Scenario<T>,
    objective: &Objective,
    settings: &PlacementSettings<T>,
) -> Result<PlacementOutcome<T>> {
    let r0 = settings.r0.unwrap_or(s.area.shorter_side() / T::lit(4.0));
    if settings.candidates == 0 || !(r0 > T::zero()) || !(settings.r_min > T::zero()) {
        return Err(Error::Config("need Q >= 1, r0 > 0, and r_min > 0".into()));
    }
    if settings.joint && (settings.candidates as f64).powi(s.num_uavs() as i32) > JOINT_LIMIT {
        return Err(Error::TooLarge(format!(
            "{}^{} joint combinations",
            settings.candidates,
            s.num_uavs()
        )));
    }
    let mut rng = substream(s.seed, Stream::Placement);
    let mut incumbent = evaluate(s, objective, settings)?;
    let mut state = PlacementState {
        positions: s.uavs.clone(),
        radius: r0,
        iteration: 0,
        best: incumbent.value,
        candidates: settings.candidates,
    };
    let mut trace = vec![TraceRow {
        iteration: 0,
        radius: r0,
        objective: state.best,
        positions: state.positions.clone(),
    }];
    let mut evaluations = 1;
    let mut converged = false;
    while state.iteration < settings.max_iter {
        state.iteration += 1;
        let previous = state.best;
        let cands = generate_candidates(&state, &s.area, &mut rng);
        let mut consider = |positions: Vec<Point3<T>>, state: &mut PlacementState<T>| -> Result<()> {
            let e = evaluate(&s.with_uav_positions(&positions), objective, settings)?;
            evaluations += 1;
            if e.value > state.best {
                state.best = e.value;
                state.positions = positions;
                incumbent = e;
            }
            Ok(())
        };
        if settings.joint {
            let q = settings.candidates;
            let combos = q.pow(s.num_uavs() as u32);
            // combination 0 is the incumbent itself
            for c in 1..combos {
                let mut k = c;
                let positions = cands
                    .per_uav
                    .iter()
                    .map(|list| {
                        let p = list[k % q];
                        k /= q;
                        p
                    })
                    .collect();
                consider(positions, &mut state)?;
            }
        } else {
            for (l, list) in cands.per_uav.iter().enumerate() {
                let base = state.positions.clone();
                for &p in &list[1..] {
                    let mut positions = base.clone();
                    positions[l] = p;
                    consider(positions, &mut state)?;
                }
            }
        }
        trace.push(TraceRow {
            iteration: state.iteration,
            radius: state.radius,
            objective: state.best,
            positions: state.positions.clone(),
        });
        let gain = state.best - previous;
        let stalled = gain <= settings.rel_tol * previous.abs().max(T::min_positive_value());
        state.radius = state.radius / T::lit(2.0);
        if stalled && state.radius < settings.r_min {
            converged = true;
            break;
        }
    }
    Ok(PlacementOutcome {
        iterations: state.iteration,
        state,
        evaluation: incumbent,
        trace,
        converged,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_scenario, ScenarioConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> Scenario<f64> {
        let cfg = ScenarioConfig {
            users: 6,
            uavs: 2,
            area: [400.0, 400.0],
            tbs: vec![[0.0, 200.0, 200.0], [400.0, 200.0, 200.0]],
            ..Default::default()
        };
        generate_scenario(&cfg, 11).unwrap()
    }

    #[test]
    fn candidates_on_circle_and_clamped() {
        let area = Area { width: 100.0, height: 100.0 };
        let state = PlacementState {
            positions: vec![Point3::new(50.0, 50.0, 100.0), Point3::new(0.0, 0.0, 100.0)],
            radius: 10.0,
            iteration: 0,
            best: 0.0,
            candidates: 8,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = generate_candidates(&state, &area, &mut rng);
        assert_eq!(c.per_uav[0][0], state.positions[0]);
        for p in &c.per_uav[0][1..] {
            assert!(f64::abs(p.horizontal_distance(&state.positions[0]) - 10.0) < 1e-9);
        }
        for p in &c.per_uav[1] {
            assert!(area.contains(p) && p.z == 100.0);
            assert!(p.horizontal_distance(&state.positions[1]) <= 10.0 + 1e-9);
        }
        let single = PlacementState { candidates: 1, ..state };
        assert_eq!(generate_candidates(&single, &area, &mut rng).per_uav[0].len(), 1);
    }

    #[test]
    fn single_candidate_is_a_no_op() {
        let s = small();
        let settings = PlacementSettings { candidates: 1, max_iter: 3, ..Default::default() };
        let out = optimize_placement(&s, &Objective::UniformPower, &settings).unwrap();
        assert_eq!(out.state.positions, s.uavs);
        assert!(out.trace.iter().all(|r| r.objective == out.trace[0].objective));
    }

    #[test]
    fn trace_is_monotone_and_radius_halves() {
        let s = small();
        let out = optimize_placement(&s, &Objective::UniformPower, &PlacementSettings::default()).unwrap();
        for w in out.trace.windows(2) {
            assert!(w[1].objective >= w[0].objective);
        }
        for row in &out.trace[1..] {
            assert_eq!(row.radius, 100.0 / 2f64.powi(row.iteration as i32 - 1));
        }
        assert!(out.converged && out.iterations <= 12);
        assert_eq!(out.evaluation.value, out.state.best);
    }

    #[test]
    fn deterministic() {
        let s = small();
        let a = optimize_placement(&s, &Objective::UniformPower, &PlacementSettings::default()).unwrap();
        let b = optimize_placement(&s, &Objective::UniformPower, &PlacementSettings::default()).unwrap();
        assert_eq!(a, b);
        let p = s.uavs.clone();
        let settings = PlacementSettings::default();
        assert_eq!(
            evaluate_candidate_combination(&p, &s, &settings).unwrap(),
            evaluate_candidate_combination(&p, &s, &settings).unwrap()
        );
    }

    #[test]
    fn zero_iterations_returns_initial_value() {
        let s = small();
        let settings = PlacementSettings { max_iter: 0, ..Default::default() };
        let out = optimize_placement(&s, &Objective::UniformPower, &settings).unwrap();
        let direct = evaluate(&s, &Objective::UniformPower, &settings).unwrap();
        assert_eq!(out.state.best, direct.value);
        assert_eq!(out.trace.len(), 1);
    }

    #[test]
    fn joint_mode_and_guard() {
        let s = small();
        let settings = PlacementSettings { joint: true, candidates: 4, ..Default::default() };
        let out = optimize_placement(&s, &Objective::UniformPower, &settings).unwrap();
        assert!(out.state.best >= out.trace[0].objective);
        let full = generate_scenario::<f64>(&ScenarioConfig::default(), 1).unwrap();
        let huge = PlacementSettings { joint: true, candidates: 30, ..Default::default() };
        assert!(matches!(
            optimize_placement(&full, &Objective::UniformPower, &huge),
            Err(Error::TooLarge(_))
        ));
    }

    #[test]
    fn hovering_over_a_lone_user_is_best() {
        let cfg = ScenarioConfig {
            users: 1,
            uavs: 1,
            area: [200.0, 200.0],
            tbs: vec![[100.0, 100.0, 200.0]],
            ..Default::default()
        };
        let s = generate_scenario::<f64>(&cfg, 3).unwrap();
        let user = s.users[0];
        let settings = PlacementSettings::default();
        let eval = |dx: f64| {
            let p = Point3::new(user.x + dx, user.y, 100.0);
            evaluate(&s.with_uav_positions(&[p]), &Objective::Refined, &settings).unwrap()
        };
        let over = eval(0.0);
        let rates_cap = over.per_uav[0];
        for dx in [5.0, 20.0, 60.0] {
            let away = eval(if user.x + dx <= 200.0 { dx } else { -dx });
            // only meaningful while the access side binds
            if away.value < rates_cap {
                assert!(over.value >= away.value);
            }
        }
    }
}
