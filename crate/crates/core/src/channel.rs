//! Air-to-ground access gains and balloon-to-UAV backhaul gains.
//!
//! The access link mixes LoS and NLoS path loss by an elevation-dependent
//! LoS probability. Both links use squared free-space loss
//! `(4 pi d f_c / C)^2`; the backhaul adds Rician small-scale power gain.

use ndarray::{Array2, Array3};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::{distance, Point3, RadioParams, Scenario};
use crate::scalar::Scalar;

/// Elevation angle from the ground node to the aerial node, degrees.
pub fn elevation_deg<T: Scalar>(uav: &Point3<T>, user: &Point3<T>) -> T {
    let rise = uav.z - user.z;
    rise.atan2(uav.horizontal_distance(user)).to_degrees()
}

/// `1 / (1 + c1 exp(-c2 (theta - c1)))` for an elevation angle in degrees.
pub fn los_probability_at<T: Scalar>(theta_deg: T, c1: T, c2: T) -> T {
    T::one() / (T::one() + c1 * (-c2 * (theta_deg - c1)).exp())
}

pub fn los_probability<T: Scalar>(uav: &Point3<T>, user: &Point3<T>, c1: T, c2: T) -> Result<T> {
    if !(uav.z > T::zero()) {
        return Err(Error::Domain(format!("UAV altitude must be positive, got {}", uav.z)));
    }
    if distance(uav, user) == T::zero() {
        return Err(Error::Domain("coincident UAV and user".into()));
    }
    Ok(los_probability_at(elevation_deg(uav, user), c1, c2))
}

/// Squared free-space loss `(4 pi d f_c / C)^2`.
pub fn free_space_loss<T: Scalar>(dist: T, radio: &RadioParams<T>) -> T {
    let a = T::lit(4.0) * T::PI() * dist * radio.carrier_freq / radio.light_speed;
    a * a
}

/// Average access path loss for a given LoS probability.
pub fn mixed_path_loss<T: Scalar>(dist: T, p_los: T, radio: &RadioParams<T>) -> T {
    let fs = free_space_loss(dist, radio);
    p_los * radio.xi_los() * fs + (T::one() - p_los) * radio.xi_nlos() * fs
}

pub fn access_path_loss<T: Scalar>(
    uav: &Point3<T>,
    user: &Point3<T>,
    radio: &RadioParams<T>,
) -> Result<T> {
    let d = distance(uav, user);
    if d == T::zero() {
        return Err(Error::Domain("zero access distance".into()));
    }
    let p = los_probability(uav, user, radio.los_c1, radio.los_c2)?;
    Ok(mixed_path_loss(d, p, radio))
}

pub fn access_gain<T: Scalar>(uav: &Point3<T>, user: &Point3<T>, radio: &RadioParams<T>) -> Result<T> {
    access_path_loss(uav, user, radio).map(|pl| pl.recip())
}

pub fn backhaul_gain<T: Scalar>(
    tb: &Point3<T>,
    uav: &Point3<T>,
    fading: T,
    radio: &RadioParams<T>,
) -> Result<T> {
    let d = distance(tb, uav);
    if d == T::zero() {
        return Err(Error::Domain("zero backhaul distance".into()));
    }
    if !(fading > T::zero()) {
        return Err(Error::Domain(format!("fading gain must be positive, got {fading}")));
    }
    Ok(free_space_loss(d, radio).recip() * fading)
}

/// One draw of unit-mean Rician power `|g|^2` with K-factor `k` (linear).
///
/// `k = +inf` gives the pure LoS value 1.
pub fn sample_rician_power<R: Rng + ?Sized>(k: f64, rng: &mut R) -> Result<f64> {
    if k.is_nan() || k < 0.0 {
        return Err(Error::Domain(format!("Rician K-factor must be >= 0, got {k}")));
    }
    if k.is_infinite() {
        return Ok(1.0);
    }
    let los = (k / (k + 1.0)).sqrt();
    let sigma = (0.5 / (k + 1.0)).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    let (a, b) = (los + sigma * re, sigma * im);
    Ok(a * a + b * b)
}

/// Access gains `h^A` indexed `(uav, user, rb)`; identical across RBs.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessChannel<T> {
    pub gain: Array3<T>,
}

impl<T: Scalar> AccessChannel<T> {
    pub fn from_scenario(s: &Scenario<T>) -> Result<Self> {
        let (l, u, n) = (s.num_uavs(), s.num_users(), s.num_rbs());
        let mut gain = Array3::zeros((l, u, n));
        for (li, uav) in s.uavs.iter().enumerate() {
            for (ui, user) in s.users.iter().enumerate() {
                let h = access_gain(uav, user, &s.radio)?;
                gain.slice_mut(ndarray::s![li, ui, ..]).fill(h);
            }
        }
        Ok(AccessChannel { gain })
    }
}

/// Backhaul gains `h^B` indexed `(tb, uav, rb)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BackhaulChannel<T> {
    pub gain: Array3<T>,
    pub fading: Array3<T>,
}

impl<T: Scalar> BackhaulChannel<T> {
    pub fn from_scenario(s: &Scenario<T>) -> Result<Self> {
        let (m, l, n) = s.fading.dim();
        if m != s.num_tbs() || l != s.num_uavs() || n != s.num_rbs() {
            return Err(Error::Dimension(format!(
                "fading is {m}x{l}x{n}, scenario needs {}x{}x{}",
                s.num_tbs(),
                s.num_uavs(),
                s.num_rbs()
            )));
        }
        let mut gain = Array3::zeros((m, l, n));
        for ((mi, li, ni), g) in gain.indexed_iter_mut() {
            *g = backhaul_gain(&s.tbs[mi], &s.uavs[li], s.fading[[mi, li, ni]], &s.radio)?;
        }
        Ok(BackhaulChannel {
            gain,
            fading: s.fading.clone(),
        })
    }

    /// Wideband link gain per `(tb, uav)`: the RB-averaged gain.
    pub fn link_gain(&self) -> Array2<T> {
        let n = T::from_usize_lossy(self.gain.dim().2);
        self.gain.sum_axis(ndarray::Axis(2)).mapv(|v| v / n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_scenario, RadioConfig, ScenarioConfig};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn radio() -> RadioParams<f64> {
        RadioConfig::default().to_params().unwrap()
    }

    #[test]
    fn los_probability_examples() {
        let r = radio();
        let above = los_probability(&Point3::new(0.0, 0.0, 100.0), &Point3::default(), r.los_c1, r.los_c2)
            .unwrap();
        let expect = 1.0 / (1.0 + 9.6 * (-0.29_f64 * (90.0 - 9.6)).exp());
        assert!((above - expect).abs() < 1e-15);
        assert!((above - 1.0).abs() < 1e-9);
        assert!(f64::abs(los_probability_at(9.6, 9.6, 0.29) - 1.0 / 10.6) < 1e-12);
        let th = elevation_deg(&Point3::new(100.0, 0.0, 100.0), &Point3::default());
        assert!(f64::abs(th - 45.0) < 1e-12);
    }

    #[test]
    fn coincident_points_are_domain_errors() {
        let r = radio();
        let p = Point3::new(1.0, 1.0, 50.0);
        assert!(matches!(los_probability(&p, &p, 9.6, 0.29), Err(Error::Domain(_))));
        assert!(access_gain(&p, &p, &r).is_err());
        assert!(backhaul_gain(&p, &p, 1.0, &r).is_err());
        let ground = Point3::new(1.0, 1.0, 0.0);
        assert!(los_probability(&ground, &Point3::new(0.0, 0.0, 0.0), 9.6, 0.29).is_err());
    }

    #[test]
    fn path_loss_examples() {
        let mut r = radio();
        r.excess_loss_los_db = 0.0;
        // 4*pi*1*2.4e9/3e8 = 32*pi
        let expect = (32.0 * std::f64::consts::PI).powi(2);
        assert!((mixed_path_loss(1.0, 1.0, &r) - expect).abs() / expect < 1e-14);
        assert!((expect - 1.0107e4).abs() < 1.0);

        let mut flat = radio();
        flat.excess_loss_nlos_db = flat.excess_loss_los_db;
        let a = mixed_path_loss(300.0, 0.2, &flat);
        let b = mixed_path_loss(300.0, 0.9, &flat);
        assert!((a - b).abs() / a < 1e-14);

        let r = radio();
        let nlos = mixed_path_loss(300.0, 0.0, &r);
        assert_eq!(nlos, r.xi_nlos() * free_space_loss(300.0, &r));
    }

    #[test]
    fn inverse_square_and_frequency_scaling() {
        let r = radio();
        let g1 = mixed_path_loss(150.0, 0.7, &r).recip();
        let g2 = mixed_path_loss(300.0, 0.7, &r).recip();
        assert!((g1 / g2 - 4.0).abs() < 1e-12);
        let mut r2 = r;
        r2.carrier_freq *= 2.0;
        let g3 = mixed_path_loss(150.0, 0.7, &r2).recip();
        assert!((g1 / g3 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn backhaul_normalization_and_linearity() {
        let r = radio();
        let beta = r.light_speed / (4.0 * std::f64::consts::PI * r.carrier_freq);
        let g = backhaul_gain(&Point3::new(0.0, 0.0, beta), &Point3::default(), 1.0, &r).unwrap();
        assert!((g - 1.0).abs() < 1e-12);
        let tb = Point3::new(0.0, 500.0, 200.0);
        let uav = Point3::new(500.0, 500.0, 100.0);
        let g1 = backhaul_gain(&tb, &uav, 1.0, &r).unwrap();
        let g2 = backhaul_gain(&tb, &uav, 2.0, &r).unwrap();
        assert!((g2 / g1 - 2.0).abs() < 1e-15);
        let fs = free_space_loss(distance(&tb, &uav), &r).recip();
        assert!((g1 - fs).abs() / fs < 1e-12);
    }

    #[test]
    fn rician_limits_and_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_rician_power(f64::INFINITY, &mut rng).unwrap(), 1.0);
        assert!(sample_rician_power(-1.0, &mut rng).is_err());
        // very large K concentrates near 1
        let v = sample_rician_power(1e12, &mut rng).unwrap();
        assert!((v - 1.0).abs() < 1e-4);
    }

    #[test]
    fn rician_mean_with_backhaul_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let mean = (0..n).map(|_| sample_rician_power(20.0, &mut rng).unwrap()).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn channel_tables_have_expected_shape() {
        let s = generate_scenario::<f64>(&ScenarioConfig::default(), 4).unwrap();
        let a = AccessChannel::from_scenario(&s).unwrap();
        assert_eq!(a.gain.dim(), (4, 20, 30));
        assert!(a.gain.iter().all(|&g| g > 0.0));
        assert_eq!(a.gain[[1, 3, 0]], a.gain[[1, 3, 29]]);
        let b = BackhaulChannel::from_scenario(&s).unwrap();
        assert_eq!(b.gain.dim(), (2, 4, 30));
        assert_eq!(b.link_gain().dim(), (2, 4));
    }

    proptest! {
        #[test]
        fn los_probability_bounded_and_monotone_in_altitude(
            off in 0.0..2000.0f64, z in 1.0..500.0f64, dz in 0.0..500.0f64
        ) {
            let r = radio();
            let user = Point3::new(0.0, 0.0, 0.0);
            let p1 = los_probability(&Point3::new(off, 0.0, z), &user, r.los_c1, r.los_c2).unwrap();
            let p2 = los_probability(&Point3::new(off, 0.0, z + dz), &user, r.los_c1, r.los_c2).unwrap();
            prop_assert!(p1 > 0.0 && p1 <= 1.0);
            prop_assert!(p2 >= p1);
        }

        #[test]
        fn access_gain_nonincreasing_with_range(off in 0.0..2000.0f64, extra in 0.0..2000.0f64, z in 10.0..300.0f64) {
            let r = radio();
            let user = Point3::new(0.0, 0.0, 0.0);
            let near = access_gain(&Point3::new(off, 0.0, z), &user, &r).unwrap();
            let far = access_gain(&Point3::new(off + extra, 0.0, z), &user, &r).unwrap();
            prop_assert!(far <= near * (1.0 + 1e-12));
            let pl = access_path_loss(&Point3::new(off, 0.0, z), &user, &r).unwrap();
            let d = (off * off + z * z).sqrt();
            prop_assert!(pl >= r.xi_los() * free_space_loss(d, &r) * (1.0 - 1e-12));
        }
    }
}
