//! Brute-force and analytic references.
//!
//! Nothing here calls the production LP, MILP, or dual solvers; the only
//! shared code is the channel model that turns positions into gains.

use ndarray::{Array2, Array3};
use serde::Serialize;

use crate::assoc::Association;
use crate::channel::{AccessChannel, BackhaulChannel};
use crate::error::{Error, Result};
use crate::geometry::{Point3, Scenario};
use crate::rate::RateTable;
use crate::scalar::Scalar;

pub use crate::power::waterfill_bisect;

/// Largest number of assignments an enumeration may visit.
pub const ENUMERATION_LIMIT: f64 = 1e6;

/// One oracle-versus-solver comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub check: String,
    pub instance: String,
    pub oracle: f64,
    pub candidate: f64,
    pub abs_gap: f64,
    pub rel_gap: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleReport {
    pub fn new(check: &str, instance: String, oracle: f64, candidate: f64, tolerance: f64) -> Self {
        let abs_gap = (oracle - candidate).abs();
        let rel_gap = if oracle == 0.0 { abs_gap } else { abs_gap / oracle.abs() };
        OracleReport {
            check: check.to_string(),
            instance,
            oracle,
            candidate,
            abs_gap,
            rel_gap,
            tolerance,
            pass: rel_gap <= tolerance,
        }
    }
}

fn assignment_bound(l: usize, u: usize, n: usize, m: usize) -> f64 {
    ((l * n + 1) as f64).powi(u as i32) * (m as f64).powi(l as i32)
}

/// Calls `visit` for every feasible association: each user idle or on a
/// distinct `(uav, rb)`, each UAV on exactly one balloon.
fn for_each_association<F: FnMut(&Association)>(
    (l, u, n, m): (usize, usize, usize, usize),
    visit: &mut F,
) -> Result<()> {
    let bound = assignment_bound(l, u, n, m);
    if bound >= ENUMERATION_LIMIT {
        return Err(Error::TooLarge(format!("up to {bound:.3e} associations")));
    }
    let mut a = Association::empty(l, u, n, m);
    let mut used = vec![false; n];
    let mut tb = vec![0usize; l];
    loop {
        a.theta.fill(false);
        for (li, &mi) in tb.iter().enumerate() {
            a.theta[[mi, li]] = true;
        }
        users(&mut a, &mut used, 0, visit);
        // odometer over balloon choices
        let mut i = 0;
        while i < l {
            tb[i] += 1;
            if tb[i] < m {
                break;
            }
            tb[i] = 0;
            i += 1;
        }
        if i == l {
            return Ok(());
        }
    }
}

fn users<F: FnMut(&Association)>(a: &mut Association, used: &mut [bool], user: usize, visit: &mut F) {
    let (l_count, u_count, n_count) = a.eps.dim();
    if user == u_count {
        visit(a);
        return;
    }
    users(a, used, user + 1, visit);
    for l in 0..l_count {
        for n in 0..n_count {
            if !used[n] {
                used[n] = true;
                a.eps[[l, user, n]] = true;
                users(a, used, user + 1, visit);
                a.eps[[l, user, n]] = false;
                used[n] = false;
            }
        }
    }
}

fn total_rate<T: Scalar>(a: &Association, access: &Array3<T>, backhaul: &Array2<T>) -> T {
    let (l_count, u_count, n_count) = access.dim();
    let m_count = backhaul.dim().0;
    let mut total = T::zero();
    for l in 0..l_count {
        let mut sum = T::zero();
        for u in 0..u_count {
            for n in 0..n_count {
                if a.eps[[l, u, n]] {
                    sum += access[[l, u, n]];
                }
            }
        }
        let mut cap = T::zero();
        for m in 0..m_count {
            if a.theta[[m, l]] {
                cap += backhaul[[m, l]];
            }
        }
        total += if sum < cap { sum } else { cap };
    }
    total
}

/// Exact maximum of the end-to-end objective over all associations for a
/// fixed rate table, with a maximizer.
pub fn enumerate_associations<T: Scalar>(rates: &RateTable<T>) -> Result<(T, Association)> {
    let dims = rates.dims();
    let mut best = (T::neg_infinity(), Association::empty(dims.0, dims.1, dims.2, dims.3));
    for_each_association(dims, &mut |a: &Association| {
        let v = total_rate(a, &rates.access, &rates.backhaul);
        if v > best.0 {
            best = (v, a.clone());
        }
    })?;
    Ok(best)
}

/// Exact joint optimum over association and power of a scenario at its
/// current UAV positions: every association, each with water-filled powers.
pub fn exhaustive_objective(s: &Scenario<f64>) -> Result<f64> {
    let access = AccessChannel::from_scenario(s)?;
    let backhaul = BackhaulChannel::from_scenario(s)?;
    let b0 = s.radio.backhaul_bandwidth;
    let caps = backhaul
        .link_gain()
        .mapv(|g| b0 * (1.0 + s.radio.backhaul_power * g / (b0 * s.radio.noise_psd)).log2());
    let (b, n0) = (s.radio.rb_bandwidth, s.radio.noise_psd);
    let dims = (s.num_uavs(), s.num_users(), s.num_rbs(), s.num_tbs());
    let mut best = f64::NEG_INFINITY;
    let mut failure = None;
    for_each_association(dims, &mut |a: &Association| {
        let mut total = 0.0;
        for l in 0..dims.0 {
            let cap: f64 = (0..dims.3).filter(|&m| a.theta[[m, l]]).map(|m| caps[[m, l]]).sum();
            let gains: Vec<f64> = a.links_of(l).map(|(u, n)| access.gain[[l, u, n]]).collect();
            let sum = if gains.is_empty() {
                0.0
            } else {
                match waterfill_bisect(&gains, s.peak_power[l], b, n0) {
                    Ok(p) => gains
                        .iter()
                        .zip(&p)
                        .map(|(&h, &p)| b * (1.0 + p * h / (b * n0)).log2())
                        .sum(),
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                }
            };
            total += sum.min(cap);
        }
        best = best.max(total);
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(best),
    }
}

/// Best exhaustive objective over a square lattice of UAV positions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridResult {
    pub best: f64,
    pub positions: Vec<Point3<f64>>,
    pub evaluated: usize,
}

/// Lattice points `0, step, 2 step, ...` covering `[0, len]`, with `len` itself.
fn axis(len: f64, step: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..)
        .map(|i| i as f64 * step)
        .take_while(|&x| x < len - 1e-9 * len)
        .collect();
    v.push(len);
    v
}

/// Exhaustive placement search for one or two UAVs over a lattice at the
/// UAVs' altitude, scored by [`exhaustive_objective`].
pub fn grid_placement(s: &Scenario<f64>, lattice_step: f64) -> Result<GridResult> {
    if !(lattice_step > 0.0) {
        return Err(Error::Domain("lattice step must be positive".into()));
    }
    let xs = axis(s.area.width, lattice_step);
    let ys = axis(s.area.height, lattice_step);
    let points: Vec<(f64, f64)> = xs.iter().flat_map(|&x| ys.iter().map(move |&y| (x, y))).collect();
    let combos = match s.num_uavs() {
        1 => points.len(),
        2 => points.len() * points.len(),
        l => return Err(Error::TooLarge(format!("grid search over {l} UAVs"))),
    };
    if combos as f64 > ENUMERATION_LIMIT {
        return Err(Error::TooLarge(format!("{combos} lattice combinations")));
    }
    let mut out = GridResult {
        best: f64::NEG_INFINITY,
        positions: s.uavs.clone(),
        evaluated: 0,
    };
    for i in 0..combos {
        let idx = [i % points.len(), i / points.len()];
        let uavs: Vec<Point3<f64>> = (0..s.num_uavs())
            .map(|l| Point3::new(points[idx[l]].0, points[idx[l]].1, s.uavs[l].z))
            .collect();
        let v = exhaustive_objective(&s.with_uav_positions(&uavs))?;
        out.evaluated += 1;
        if v > out.best {
            out.best = v;
            out.positions = uavs;
        }
    }
    Ok(out)
}

/// Dense tableau simplex with Bland's rule for `max c x, A x <= b, x >= 0`
/// with `b >= 0`. Returns `None` when unbounded.
pub fn bland_simplex(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<Option<(f64, Vec<f64>)>> {
    let (rows, cols) = (a.len(), c.len());
    if b.iter().any(|&v| v < 0.0) || a.iter().any(|r| r.len() != cols) || b.len() != rows {
        return Err(Error::Domain("needs A x <= b with b >= 0".into()));
    }
    let width = cols + rows + 1;
    let mut t = vec![vec![0.0; width]; rows + 1];
    for i in 0..rows {
        t[i][..cols].copy_from_slice(&a[i]);
        t[i][cols + i] = 1.0;
        t[i][width - 1] = b[i];
    }
    for j in 0..cols {
        t[rows][j] = -c[j];
    }
    let mut basis: Vec<usize> = (cols..cols + rows).collect();
    let eps = 1e-11;
    loop {
        let Some(enter) = (0..width - 1).find(|&j| t[rows][j] < -eps) else { break };
        let mut leave: Option<usize> = None;
        for i in 0..rows {
            if t[i][enter] > eps {
                let ratio = t[i][width - 1] / t[i][enter];
                leave = match leave {
                    None => Some(i),
                    Some(k) => {
                        let rk = t[k][width - 1] / t[k][enter];
                        if ratio < rk - eps || (ratio <= rk + eps && basis[i] < basis[k]) {
                            Some(i)
                        } else {
                            Some(k)
                        }
                    }
                };
            }
        }
        let Some(r) = leave else { return Ok(None) };
        let p = t[r][enter];
        for v in t[r].iter_mut() {
            *v /= p;
        }
        let pivot = t[r].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != r && row[enter] != 0.0 {
                let f = row[enter];
                for (v, pv) in row.iter_mut().zip(&pivot) {
                    *v -= f * pv;
                }
            }
        }
        basis[r] = enter;
    }
    let mut x = vec![0.0; cols];
    for (i, &bv) in basis.iter().enumerate() {
        if bv < cols {
            x[bv] = t[i][width - 1];
        }
    }
    Ok(Some((t[rows][width - 1], x)))
}

/// Random rate table with `L <= 2, U <= 3, N <= 3, M <= 2`; every other
/// instance is flat across RBs.
pub fn random_tiny_rates<R: rand::Rng + ?Sized>(rng: &mut R, flat: bool) -> RateTable<f64> {
    let (l, u, n, m) = (
        rng.gen_range(1..=2),
        rng.gen_range(1..=3),
        rng.gen_range(1..=3),
        rng.gen_range(1..=2),
    );
    let mut access = Array3::zeros((l, u, n));
    for li in 0..l {
        for ui in 0..u {
            let base = rng.gen_range(0.2e6..3e6);
            for ni in 0..n {
                access[[li, ui, ni]] = if flat { base } else { rng.gen_range(0.2e6..3e6) };
            }
        }
    }
    let backhaul = Array2::from_shape_fn((m, l), |_| rng.gen_range(0.5e6..8e6));
    RateTable { access, backhaul }
}

/// Production association MILP against exhaustive enumeration.
pub fn verify_association(instances: usize, seed: u64) -> Result<Vec<OracleReport>> {
    use crate::assoc::{associate, solve_p1};
    use crate::milp::MilpSettings;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let exact = MilpSettings { gap_tol: 0.0, ..Default::default() };
    (0..instances)
        .map(|i| {
            let rates = random_tiny_rates(&mut rng, i % 2 == 0);
            let (l, u, n, m) = rates.dims();
            let (best, _) = enumerate_associations(&rates)?;
            let sol = solve_p1(&rates, 180e3, &exact)?;
            sol.association.validate().map_err(Error::Constraint)?;
            let split = associate(&rates, 180e3, &exact)?;
            split.association.validate().map_err(Error::Constraint)?;
            let desc = format!("#{i} L={l} U={u} N={n} M={m}");
            let mut full = OracleReport::new("association", desc.clone(), best, sol.objective, 1e-12);
            full.pass &= sol.optimal;
            let mut staged = OracleReport::new("association_staged", desc, best, split.objective, 1e-12);
            staged.pass &= split.optimal;
            Ok(vec![full, staged])
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().flatten().collect())
}

/// Dual power allocation against bisection water-filling on one UAV.
/// Each instance yields a rate report and a water-level residual report.
pub fn verify_power(instances: usize, seed: u64) -> Result<Vec<OracleReport>> {
    use crate::geometry::RadioConfig;
    use crate::power::{solve_uav, DualSettings};
    use rand::{Rng, SeedableRng};
    let radio = RadioConfig::default().to_params::<f64>()?;
    let (b, n0) = (radio.rb_bandwidth, radio.noise_psd);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for i in 0..instances {
        let k = rng.gen_range(1..=10);
        let gains: Vec<f64> = (0..k).map(|_| 10f64.powf(rng.gen_range(-13.0..-8.0))).collect();
        let budget = 10f64.powf(rng.gen_range(-2.0..1.0));
        let rate = |p: &[f64]| -> f64 {
            gains.iter().zip(p).map(|(&h, &p)| b * (1.0 + p * h / (b * n0)).log2()).sum()
        };
        let oracle = waterfill_bisect(&gains, budget, b, n0)?;
        let sol = solve_uav(&gains, budget, &radio, &DualSettings::default())?;
        let desc = format!("#{i} links={k} budget={budget:.4e}");
        out.push(OracleReport::new("power", desc.clone(), rate(&oracle), rate(&sol.power), 1e-6));
        // active links share one marginal rate: B h / (ln2 (B N0 + P h))
        let marginals: Vec<f64> = gains
            .iter()
            .zip(&sol.power)
            .filter(|(_, &p)| p > 0.0)
            .map(|(&h, &p)| b * h / (std::f64::consts::LN_2 * (b * n0 + p * h)))
            .collect();
        let hi = marginals.iter().copied().fold(f64::MIN, f64::max);
        let lo = marginals.iter().copied().fold(f64::MAX, f64::min);
        out.push(OracleReport::new("water_level", desc, hi, lo, 1e-6));
    }
    Ok(out)
}

/// Double-precision backhaul rate against the fixed-point evaluation.
pub fn verify_backhaul_rate() -> Result<Vec<OracleReport>> {
    use crate::channel::free_space_loss;
    use crate::geometry::{distance, RadioConfig};
    use crate::rate::backhaul_rate;
    let cfg = RadioConfig::default();
    let radio = cfg.to_params::<f64>()?;
    let tb = Point3::new(0.0, 500.0, 200.0);
    [[500.0, 500.0, 100.0], [250.0, 250.0, 100.0], [1000.0, 0.0, 100.0], [0.0, 500.0, 100.0]]
        .iter()
        .map(|p| {
            let uav = Point3::new(p[0], p[1], p[2]);
            let fast = backhaul_rate(free_space_loss(distance(&tb, &uav), &radio).recip(), &radio);
            let slow = hiprec::backhaul_rate_at_distance((uav.x - tb.x, uav.y - tb.y, uav.z - tb.z), &cfg);
            Ok(OracleReport::new("backhaul_rate", format!("uav=({},{},{})", p[0], p[1], p[2]), slow, fast, 1e-12))
        })
        .collect()
}

/// One UAV and one user in a 100 m square.
pub fn toy_world() -> crate::geometry::ScenarioConfig {
    crate::geometry::ScenarioConfig {
        users: 1,
        uavs: 1,
        area: [100.0, 100.0],
        tbs: vec![[0.0, 50.0, 200.0], [100.0, 50.0, 200.0]],
        ..Default::default()
    }
}

/// Random-search placement against a lattice search on toy worlds. Passes
/// when the search reaches `1 - tolerance` of the lattice maximum.
pub fn verify_placement(seeds: &[u64], lattice_step: f64, tolerance: f64) -> Result<Vec<OracleReport>> {
    use crate::geometry::generate_scenario;
    use crate::placement::{optimize_placement, Objective, PlacementSettings};
    let settings = PlacementSettings { refine_candidates: true, ..Default::default() };
    seeds
        .iter()
        .map(|&seed| {
            let s = generate_scenario::<f64>(&toy_world(), seed)?;
            let grid = grid_placement(&s, lattice_step)?;
            let sr = optimize_placement(&s, &Objective::Refined, &settings)?;
            let mut r = OracleReport::new("placement", format!("seed={seed}"), grid.best, sr.state.best, tolerance);
            r.pass = sr.state.best >= (1.0 - tolerance) * grid.best;
            Ok(r)
        })
        .collect()
}

/// All checks at the sizes used by the acceptance suite.
pub fn verify_suite(seed: u64) -> Result<Vec<OracleReport>> {
    let mut out = verify_association(50, seed)?;
    out.extend(verify_power(200, seed)?);
    out.extend(verify_backhaul_rate()?);
    let seeds: Vec<u64> = (0..20).map(|i| crate::seeding::derive_seed(seed, i)).collect();
    out.extend(verify_placement(&seeds, 10.0, 0.01)?);
    Ok(out)
}

pub fn reports_to_csv(reports: &[OracleReport]) -> String {
    let mut s = String::from("check,instance,oracle,candidate,abs_gap,rel_gap,tolerance,pass\n");
    for r in reports {
        s.push_str(&format!(
            "{},{},{},{},{:e},{:e},{:e},{}\n",
            r.check, r.instance, r.oracle, r.candidate, r.abs_gap, r.rel_gap, r.tolerance, r.pass
        ));
    }
    s
}

/// Arbitrary-precision evaluation in binary fixed point.
pub mod hiprec {
    use num_bigint::BigInt;
    use num_traits::{One, Signed, ToPrimitive, Zero};

    use crate::geometry::RadioConfig;

    /// Fraction bits.
    const FRAC: u64 = 320;

    #[derive(Debug, Clone, PartialEq)]
    pub struct Fixed(BigInt);

    impl Fixed {
        fn one() -> Self {
            Fixed(BigInt::one() << FRAC)
        }

        /// Exact: every finite `f64` is a dyadic rational.
        pub fn from_f64(x: f64) -> Self {
            assert!(x.is_finite(), "non-finite input");
            if x == 0.0 {
                return Fixed(BigInt::zero());
            }
            let bits = x.to_bits();
            let exp = ((bits >> 52) & 0x7ff) as i64;
            let frac = bits & ((1u64 << 52) - 1);
            let (mant, e) = if exp == 0 { (frac, -1074) } else { (frac | (1u64 << 52), exp - 1075) };
            let mut v = BigInt::from(mant);
            let shift = e + FRAC as i64;
            v = if shift >= 0 { v << shift as u64 } else { v >> (-shift) as u64 };
            Fixed(if x < 0.0 { -v } else { v })
        }

        pub fn from_int(n: i64) -> Self {
            Fixed(BigInt::from(n) << FRAC)
        }

        pub fn to_f64(&self) -> f64 {
            let bits = self.0.bits();
            if bits > 64 {
                let shift = bits - 64;
                (&self.0 >> shift).to_f64().unwrap() * 2f64.powi(shift as i32 - FRAC as i32)
            } else {
                self.0.to_f64().unwrap() * 2f64.powi(-(FRAC as i32))
            }
        }

        pub fn add(&self, o: &Self) -> Self {
            Fixed(&self.0 + &o.0)
        }

        pub fn sub(&self, o: &Self) -> Self {
            Fixed(&self.0 - &o.0)
        }

        pub fn mul(&self, o: &Self) -> Self {
            Fixed((&self.0 * &o.0) >> FRAC)
        }

        pub fn div(&self, o: &Self) -> Self {
            assert!(!o.0.is_zero(), "division by zero");
            Fixed((&self.0 << FRAC) / &o.0)
        }

        fn div_int(&self, n: i64) -> Self {
            Fixed(&self.0 / n)
        }

        pub fn sqrt(&self) -> Self {
            assert!(!self.0.is_negative(), "sqrt of negative");
            Fixed((&self.0 << FRAC).sqrt())
        }

        fn is_tiny(&self) -> bool {
            self.0.is_zero()
        }

        /// `atanh(z) = z + z^3/3 + z^5/5 + ...` for `|z| < 1`.
        fn atanh(z: &Self) -> Self {
            let z2 = z.mul(z);
            let mut power = z.clone();
            let mut sum = z.clone();
            let mut k = 1;
            loop {
                power = power.mul(&z2);
                k += 2;
                let term = power.div_int(k);
                if term.is_tiny() {
                    return sum;
                }
                sum = sum.add(&term);
            }
        }

        /// `atan(1/n)` by its alternating series.
        fn atan_inv(n: i64) -> Self {
            let mut power = Fixed::one().div_int(n);
            let mut sum = power.clone();
            let n2 = n * n;
            let mut k = 1;
            let mut sign = -1;
            loop {
                power = power.div_int(n2);
                k += 2;
                let term = power.div_int(k);
                if term.is_tiny() {
                    return sum;
                }
                sum = if sign < 0 { sum.sub(&term) } else { sum.add(&term) };
                sign = -sign;
            }
        }

        /// Machin's formula.
        pub fn pi() -> Self {
            Self::atan_inv(5)
                .mul(&Fixed::from_int(16))
                .sub(&Self::atan_inv(239).mul(&Fixed::from_int(4)))
        }

        pub fn ln2() -> Self {
            Self::atanh(&Fixed::one().div_int(3)).mul(&Fixed::from_int(2))
        }

        pub fn ln(&self) -> Self {
            assert!(self.0.is_positive(), "ln of nonpositive");
            // x = y 2^k with y in [1, 2)
            let k = self.0.bits() as i64 - 1 - FRAC as i64;
            let y = if k >= 0 { Fixed(&self.0 >> k as u64) } else { Fixed(&self.0 << (-k) as u64) };
            let one = Fixed::one();
            let z = y.sub(&one).div(&y.add(&one));
            Self::ln2()
                .mul(&Fixed::from_int(k))
                .add(&Self::atanh(&z).mul(&Fixed::from_int(2)))
        }

        pub fn exp(&self) -> Self {
            let ln2 = Self::ln2();
            let k = self.div(&ln2).to_f64().round() as i64;
            let r = self.sub(&ln2.mul(&Fixed::from_int(k)));
            let mut term = Fixed::one();
            let mut sum = Fixed::one();
            let mut i = 1;
            loop {
                term = term.mul(&r).div_int(i);
                if term.is_tiny() {
                    break;
                }
                sum = sum.add(&term);
                i += 1;
            }
            if k >= 0 {
                Fixed(sum.0 << k as u64)
            } else {
                Fixed(sum.0 >> (-k) as u64)
            }
        }

        pub fn log2(&self) -> Self {
            self.ln().div(&Self::ln2())
        }

        /// `10^(db / 10)`.
        pub fn from_db(db: f64) -> Self {
            let ln10 = Fixed::from_int(10).ln();
            Fixed::from_f64(db).mul(&ln10).div_int(10).exp()
        }
    }

    /// Mean-fading backhaul rate over the displacement `(dx, dy, dz)`
    /// between balloon and UAV, bits/s.
    pub fn backhaul_rate_at_distance(delta: (f64, f64, f64), radio: &RadioConfig) -> f64 {
        let sq = |v: f64| {
            let f = Fixed::from_f64(v);
            f.mul(&f)
        };
        let d = sq(delta.0).add(&sq(delta.1)).add(&sq(delta.2)).sqrt();
        let c = Fixed::from_f64(radio.light_speed);
        let fc = match radio.carrier_hz {
            Some(f) => Fixed::from_f64(f),
            None => c.div(&Fixed::from_f64(radio.wavelength_m)),
        };
        let four_pi = Fixed::pi().mul(&Fixed::from_int(4));
        let amp = c.div(&four_pi.mul(&d).mul(&fc));
        let gain = amp.mul(&amp);
        let milli = Fixed::from_int(1000);
        let p0 = Fixed::from_db(radio.backhaul_power_dbm).div(&milli);
        let per_rb = Fixed::from_db(radio.noise_dbm_per_rb).div(&milli);
        let n0 = per_rb.div(&Fixed::from_f64(radio.rb_bandwidth_hz));
        let b0 = Fixed::from_f64(radio.backhaul_bandwidth_hz);
        let snr = p0.mul(&gain).div(&b0.mul(&n0));
        b0.mul(&Fixed::one().add(&snr).log2()).to_f64()
    }

    #[cfg(test)]
    mod tests {
        use super::*;

        #[test]
        fn constants() {
            assert_eq!(Fixed::pi().to_f64(), std::f64::consts::PI);
            assert_eq!(Fixed::ln2().to_f64(), std::f64::consts::LN_2);
            assert_eq!(Fixed::from_int(10).ln().to_f64(), std::f64::consts::LN_10);
            assert_eq!(Fixed::from_int(1).exp().to_f64(), std::f64::consts::E);
            assert_eq!(Fixed::from_int(2).sqrt().to_f64(), std::f64::consts::SQRT_2);
            assert_eq!(Fixed::from_db(-110.0).to_f64(), 1e-11);
            assert_eq!(Fixed::from_f64(-0.375).to_f64(), -0.375);
        }
    }
}
