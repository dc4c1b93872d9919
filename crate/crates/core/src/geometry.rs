//! Scenario geometry: node positions, radio constants, and seeded draws.

use ndarray::Array3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::sample_rician_power;
use crate::error::{Error, Result};
use crate::scalar::{db_to_linear, dbm_to_watts, Scalar};
use crate::seeding::{substream, Stream};

/// A position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Scalar> Point3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Point3 { x, y, z }
    }

    pub fn horizontal_distance(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn cast<U: Scalar>(&self) -> Point3<U> {
        Point3 {
            x: U::lit(self.x.as_f64()),
            y: U::lit(self.y.as_f64()),
            z: U::lit(self.z.as_f64()),
        }
    }
}

/// Euclidean distance between two points.
pub fn distance<T: Scalar>(a: &Point3<T>, b: &Point3<T>) -> T {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Axis-aligned service rectangle `[0, width] x [0, height]` on the ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Area<T> {
    pub width: T,
    pub height: T,
}

impl<T: Scalar> Area<T> {
    pub fn contains(&self, p: &Point3<T>) -> bool {
        p.x >= T::zero() && p.x <= self.width && p.y >= T::zero() && p.y <= self.height
    }

    /// Projects the horizontal coordinates into the rectangle, keeping altitude.
    pub fn clamp(&self, p: Point3<T>) -> Point3<T> {
        Point3 {
            x: p.x.max(T::zero()).min(self.width),
            y: p.y.max(T::zero()).min(self.height),
            z: p.z,
        }
    }

    pub fn shorter_side(&self) -> T {
        self.width.min(self.height)
    }
}

/// Radio constants in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioParams<T> {
    pub carrier_freq: T,
    pub light_speed: T,
    pub rb_bandwidth: T,
    pub backhaul_bandwidth: T,
    pub backhaul_power: T,
    /// Noise power spectral density, W/Hz.
    pub noise_psd: T,
    pub num_rbs: usize,
    pub excess_loss_los_db: T,
    pub excess_loss_nlos_db: T,
    pub los_c1: T,
    pub los_c2: T,
    /// Linear Rician K-factor.
    pub rician_k: T,
}

impl<T: Scalar> RadioParams<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier frequency", self.carrier_freq),
            ("speed of light", self.light_speed),
            ("RB bandwidth", self.rb_bandwidth),
            ("backhaul bandwidth", self.backhaul_bandwidth),
            ("backhaul power", self.backhaul_power),
            ("noise PSD", self.noise_psd),
            ("LoS c1", self.los_c1),
            ("LoS c2", self.los_c2),
        ];
        for (name, v) in positive {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.num_rbs == 0 {
            return Err(Error::Config("need at least one resource block".into()));
        }
        if self.excess_loss_nlos_db < self.excess_loss_los_db {
            return Err(Error::Config("NLoS excess loss must be >= LoS excess loss".into()));
        }
        if self.rician_k < T::zero() {
            return Err(Error::Config("Rician K-factor must be nonnegative".into()));
        }
        Ok(())
    }

    /// Noise power over one resource block, `B * N0`.
    pub fn rb_noise(&self) -> T {
        self.rb_bandwidth * self.noise_psd
    }

    pub fn backhaul_noise(&self) -> T {
        self.backhaul_bandwidth * self.noise_psd
    }

    pub fn xi_los(&self) -> T {
        db_to_linear(self.excess_loss_los_db)
    }

    pub fn xi_nlos(&self) -> T {
        db_to_linear(self.excess_loss_nlos_db)
    }
}

/// Immutable snapshot of a deployment and its fading realization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario<T> {
    pub area: Area<T>,
    pub tbs: Vec<Point3<T>>,
    pub uavs: Vec<Point3<T>>,
    pub users: Vec<Point3<T>>,
    pub radio: RadioParams<T>,
    /// Peak transmit power of each UAV, watts.
    pub peak_power: Vec<T>,
    /// Backhaul small-scale power gains indexed `(tb, uav, rb)`.
    pub fading: Array3<T>,
    pub seed: u64,
}

impl<T: Scalar> Scenario<T> {
    pub fn num_tbs(&self) -> usize {
        self.tbs.len()
    }

    pub fn num_uavs(&self) -> usize {
        self.uavs.len()
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_rbs(&self) -> usize {
        self.radio.num_rbs
    }

    /// Copy of the scenario with the UAVs moved; fading stays attached to UAV indices.
    pub fn with_uav_positions(&self, uavs: &[Point3<T>]) -> Self {
        assert_eq!(uavs.len(), self.uavs.len());
        Scenario {
            uavs: uavs.to_vec(),
            ..self.clone()
        }
    }

    pub fn with_peak_power(&self, watts: T) -> Self {
        Scenario {
            peak_power: vec![watts; self.uavs.len()],
            ..self.clone()
        }
    }

    pub fn with_backhaul_bandwidth(&self, hz: T) -> Self {
        let mut s = self.clone();
        s.radio.backhaul_bandwidth = hz;
        s
    }
}

fn default_tbs() -> Vec<[f64; 3]> {
    vec![[0.0, 500.0, 200.0], [1000.0, 500.0, 200.0]]
}

/// Radio section of a scenario file. Powers in dBm, frequencies in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    /// Carrier frequency; derived from `wavelength_m` when absent.
    pub carrier_hz: Option<f64>,
    pub wavelength_m: f64,
    pub light_speed: f64,
    pub rb_bandwidth_hz: f64,
    pub backhaul_bandwidth_hz: f64,
    pub backhaul_power_dbm: f64,
    /// Noise power over one resource block.
    pub noise_dbm_per_rb: f64,
    pub num_rbs: usize,
    pub xi_los_db: f64,
    pub xi_nlos_db: f64,
    pub los_c1: f64,
    pub los_c2: f64,
    pub rician_k: f64,
    /// Interpret `rician_k` as dB instead of a linear ratio.
    pub rician_k_in_db: bool,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            carrier_hz: None,
            wavelength_m: 0.125,
            light_speed: 3.0e8,
            rb_bandwidth_hz: 180e3,
            backhaul_bandwidth_hz: 1e6,
            backhaul_power_dbm: 40.0,
            noise_dbm_per_rb: -110.0,
            num_rbs: 30,
            xi_los_db: 1.0,
            xi_nlos_db: 12.0,
            los_c1: 9.6,
            los_c2: 0.29,
            rician_k: 20.0,
            rician_k_in_db: false,
        }
    }
}

impl RadioConfig {
    pub fn to_params<T: Scalar>(&self) -> Result<RadioParams<T>> {
        if !(self.wavelength_m > 0.0) && self.carrier_hz.is_none() {
            return Err(Error::Config("wavelength must be positive".into()));
        }
        let carrier = self
            .carrier_hz
            .unwrap_or(self.light_speed / self.wavelength_m);
        let noise_per_rb = dbm_to_watts(self.noise_dbm_per_rb);
        let k = if self.rician_k_in_db {
            db_to_linear(self.rician_k)
        } else {
            self.rician_k
        };
        let params = RadioParams {
            carrier_freq: T::lit(carrier),
            light_speed: T::lit(self.light_speed),
            rb_bandwidth: T::lit(self.rb_bandwidth_hz),
            backhaul_bandwidth: T::lit(self.backhaul_bandwidth_hz),
            backhaul_power: T::lit(dbm_to_watts(self.backhaul_power_dbm)),
            noise_psd: T::lit(noise_per_rb / self.rb_bandwidth_hz),
            num_rbs: self.num_rbs,
            excess_loss_los_db: T::lit(self.xi_los_db),
            excess_loss_nlos_db: T::lit(self.xi_nlos_db),
            los_c1: T::lit(self.los_c1),
            los_c2: T::lit(self.los_c2),
            rician_k: T::lit(k),
        };
        params.validate()?;
        Ok(params)
    }
}

/// Everything needed to draw a scenario. Lengths in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub users: usize,
    pub uavs: usize,
    /// `[width, height]` of the service area.
    pub area: [f64; 2],
    pub tbs: Vec<[f64; 3]>,
    pub uav_altitude: f64,
    /// Initial horizontal UAV positions; a uniform grid when absent.
    pub uav_positions: Option<Vec<[f64; 2]>>,
    pub peak_power_dbm: f64,
    pub radio: RadioConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            users: 20,
            uavs: 4,
            area: [1000.0, 1000.0],
            tbs: default_tbs(),
            uav_altitude: 100.0,
            uav_positions: None,
            peak_power_dbm: 30.0,
            radio: RadioConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.users == 0 || self.uavs == 0 || self.tbs.is_empty() {
            return Err(Error::Config(
                "need at least one user, one UAV, and one balloon".into(),
            ));
        }
        if !(self.area[0] > 0.0 && self.area[1] > 0.0) {
            return Err(Error::Config(format!(
                "area dimensions must be positive, got {:?}",
                self.area
            )));
        }
        if !(self.uav_altitude > 0.0) {
            return Err(Error::Config("UAV altitude must be positive".into()));
        }
        if self.tbs.iter().any(|tb| !(tb[2] > 0.0)) {
            return Err(Error::Config("balloon altitude must be positive".into()));
        }
        if let Some(p) = &self.uav_positions {
            if p.len() != self.uavs {
                return Err(Error::Config(format!(
                    "{} UAV positions given for {} UAVs",
                    p.len(),
                    self.uavs
                )));
            }
        }
        Ok(())
    }

    /// Cell centers of a near-square grid covering the area.
    pub fn default_uav_positions(&self) -> Vec<[f64; 2]> {
        let cols = (self.uavs as f64).sqrt().ceil() as usize;
        let rows = self.uavs.div_ceil(cols);
        (0..self.uavs)
            .map(|i| {
                let (r, c) = (i / cols, i % cols);
                [
                    self.area[0] * (c as f64 + 0.5) / cols as f64,
                    self.area[1] * (r as f64 + 0.5) / rows as f64,
                ]
            })
            .collect()
    }
}

/// Draws a scenario. A pure function of `(config, seed)`.
pub fn generate_scenario<T: Scalar>(config: &ScenarioConfig, seed: u64) -> Result<Scenario<T>> {
    config.validate()?;
    let radio: RadioParams<T> = config.radio.to_params()?;
    let area = Area {
        width: T::lit(config.area[0]),
        height: T::lit(config.area[1]),
    };

    let mut user_rng = substream(seed, Stream::Users);
    let users = (0..config.users)
        .map(|_| {
            let x: f64 = user_rng.gen_range(0.0..=config.area[0]);
            let y: f64 = user_rng.gen_range(0.0..=config.area[1]);
            Point3::new(T::lit(x), T::lit(y), T::zero())
        })
        .collect();

    let tbs = config
        .tbs
        .iter()
        .map(|p| Point3::new(T::lit(p[0]), T::lit(p[1]), T::lit(p[2])))
        .collect::<Vec<_>>();

    let positions = config
        .uav_positions
        .clone()
        .unwrap_or_else(|| config.default_uav_positions());
    let uavs = positions
        .iter()
        .map(|p| Point3::new(T::lit(p[0]), T::lit(p[1]), T::lit(config.uav_altitude)))
        .collect::<Vec<_>>();

    let (m, l, n) = (tbs.len(), uavs.len(), radio.num_rbs);
    let mut fading_rng = substream(seed, Stream::Fading);
    let k = radio.rician_k.as_f64();
    let mut fading = Array3::<T>::zeros((m, l, n));
    for v in fading.iter_mut() {
        *v = T::lit(sample_rician_power(k, &mut fading_rng)?);
    }

    Ok(Scenario {
        area,
        tbs,
        uavs,
        users,
        radio,
        peak_power: vec![T::lit(dbm_to_watts(config.peak_power_dbm)); l],
        fading,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn distance_examples() {
        let o = Point3::new(0.0, 0.0, 0.0);
        assert_eq!(distance(&o, &Point3::new(0.0, 0.0, 100.0)), 100.0);
        assert_eq!(distance(&o, &Point3::new(3.0, 4.0, 0.0)), 5.0);
        let d = distance(&Point3::new(0.0, 500.0, 200.0), &Point3::new(500.0, 500.0, 100.0));
        assert!((d - (500.0_f64.powi(2) + 100.0_f64.powi(2)).sqrt()).abs() < 1e-12);
        assert!((d - 509.90).abs() < 5e-3);
    }

    #[test]
    fn default_setup_layout() {
        let cfg = ScenarioConfig::default();
        let s = generate_scenario::<f64>(&cfg, 1).unwrap();
        assert_eq!(s.num_users(), 20);
        assert_eq!(s.num_uavs(), 4);
        assert_eq!(s.tbs, vec![Point3::new(0.0, 500.0, 200.0), Point3::new(1000.0, 500.0, 200.0)]);
        assert!(s.uavs.iter().all(|u| u.z == 100.0));
        assert_eq!(s.uavs[0], Point3::new(250.0, 250.0, 100.0));
        assert_eq!(s.uavs[3], Point3::new(750.0, 750.0, 100.0));
        assert_eq!(s.fading.dim(), (2, 4, 30));
        assert!((s.radio.carrier_freq - 2.4e9).abs() < 1e-3);
        assert!((s.radio.rb_noise() - 1e-14).abs() < 1e-26);
        assert!((s.peak_power[0] - 1.0).abs() < 1e-12);
        assert!((s.radio.backhaul_power - 10.0).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_scenario() {
        let cfg = ScenarioConfig::default();
        let a = generate_scenario::<f64>(&cfg, 99).unwrap();
        let b = generate_scenario::<f64>(&cfg, 99).unwrap();
        assert_eq!(a, b);
        let c = generate_scenario::<f64>(&cfg, 100).unwrap();
        assert_ne!(a.users, c.users);
    }

    #[test]
    fn unit_area_single_user() {
        let cfg = ScenarioConfig {
            users: 1,
            area: [1.0, 1.0],
            ..Default::default()
        };
        let s = generate_scenario::<f64>(&cfg, 3).unwrap();
        let u = s.users[0];
        assert!((0.0..=1.0).contains(&u.x) && (0.0..=1.0).contains(&u.y) && u.z == 0.0);
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = [
            ScenarioConfig { users: 0, ..Default::default() },
            ScenarioConfig { uavs: 0, ..Default::default() },
            ScenarioConfig { tbs: vec![], ..Default::default() },
            ScenarioConfig { area: [0.0, 10.0], ..Default::default() },
            ScenarioConfig { uav_altitude: -1.0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(matches!(generate_scenario::<f64>(&cfg, 0), Err(Error::Config(_))));
        }
    }

    #[test]
    fn rician_k_db_flag() {
        let mut rc = RadioConfig::default();
        rc.rician_k_in_db = true;
        rc.rician_k = 13.0;
        let p: RadioParams<f64> = rc.to_params().unwrap();
        assert!((p.rician_k - 19.952623149688797).abs() < 1e-9);
    }

    #[test]
    fn generic_over_f32() {
        let s = generate_scenario::<f32>(&ScenarioConfig::default(), 5).unwrap();
        assert_eq!(s.users.len(), 20);
    }

    proptest! {
        #[test]
        fn distance_is_symmetric(a in prop::array::uniform3(-1e4..1e4f64), b in prop::array::uniform3(-1e4..1e4f64)) {
            let pa = Point3::new(a[0], a[1], a[2]);
            let pb = Point3::new(b[0], b[1], b[2]);
            prop_assert_eq!(distance(&pa, &pb), distance(&pb, &pa));
            prop_assert!(distance(&pa, &pa) == 0.0);
        }

        #[test]
        fn users_on_ground_inside_area(seed in any::<u64>(), w in 1.0..5000.0f64, h in 1.0..5000.0f64) {
            let cfg = ScenarioConfig { area: [w, h], ..Default::default() };
            let s = generate_scenario::<f64>(&cfg, seed).unwrap();
            for u in &s.users {
                prop_assert!(u.z == 0.0 && s.area.contains(u));
            }
        }
    }
}
