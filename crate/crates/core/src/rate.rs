//! Shannon rates on access and backhaul links, and the end-to-end objective.

use ndarray::{Array2, Array3};
use serde::Serialize;

use crate::assoc::Association;
use crate::channel::{AccessChannel, BackhaulChannel};
use crate::error::{Error, Result};
use crate::geometry::{RadioParams, Scenario};
use crate::power::PowerAllocation;
use crate::scalar::Scalar;

/// `B log2(1 + P h / (B N0))`, bits/s.
#[inline]
pub fn access_rate<T: Scalar>(power: T, gain: T, bandwidth: T, noise_psd: T) -> T {
    bandwidth * (T::one() + power * gain / (bandwidth * noise_psd)).log2()
}

/// Backhaul rate for a wideband link gain using the uniform budget `(B_0, P_0)`.
#[inline]
pub fn backhaul_rate<T: Scalar>(link_gain: T, radio: &RadioParams<T>) -> T {
    access_rate(
        radio.backhaul_power,
        link_gain,
        radio.backhaul_bandwidth,
        radio.noise_psd,
    )
}

/// Per-link rates: access indexed `(uav, user, rb)`, backhaul indexed `(tb, uav)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable<T> {
    pub access: Array3<T>,
    pub backhaul: Array2<T>,
}

impl<T: Scalar> RateTable<T> {
    pub fn new(
        access: &AccessChannel<T>,
        backhaul: &BackhaulChannel<T>,
        radio: &RadioParams<T>,
        power: &Array3<T>,
    ) -> Result<Self> {
        if power.dim() != access.gain.dim() {
            return Err(Error::Dimension(format!(
                "power {:?} vs access gains {:?}",
                power.dim(),
                access.gain.dim()
            )));
        }
        let mut rates = Array3::zeros(power.dim());
        ndarray::Zip::from(&mut rates)
            .and(power)
            .and(&access.gain)
            .for_each(|r, &p, &h| *r = access_rate(p, h, radio.rb_bandwidth, radio.noise_psd));
        Ok(RateTable {
            access: rates,
            backhaul: backhaul.link_gain().mapv(|g| backhaul_rate(g, radio)),
        })
    }

    /// Rates when every UAV spreads its peak power evenly over all `N` RBs.
    pub fn uniform(s: &Scenario<T>, access: &AccessChannel<T>, backhaul: &BackhaulChannel<T>) -> Result<Self> {
        let n = s.num_rbs();
        let mut power = Array3::zeros(access.gain.dim());
        for (l, mut slab) in power.outer_iter_mut().enumerate() {
            slab.fill(s.peak_power[l] / T::from_usize_lossy(n));
        }
        Self::new(access, backhaul, &s.radio, &power)
    }

    pub fn from_scenario_uniform(s: &Scenario<T>) -> Result<Self> {
        let a = AccessChannel::from_scenario(s)?;
        let b = BackhaulChannel::from_scenario(s)?;
        Self::uniform(s, &a, &b)
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        let (l, u, n) = self.access.dim();
        (l, u, n, self.backhaul.dim().0)
    }

    /// True when every `(uav, user)` pair has the same rate on all RBs.
    pub fn is_rb_flat(&self) -> bool {
        self.access
            .outer_iter()
            .all(|slab| slab.outer_iter().all(|row| row.iter().all(|&r| r == row[0])))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndToEndValue<T> {
    pub per_uav: Vec<T>,
    pub total: T,
}

/// Per-UAV `min(associated access sum, associated backhaul rate)` and their sum.
pub fn end_to_end<T: Scalar>(
    assoc: &Association,
    power: &PowerAllocation<T>,
    rates: &RateTable<T>,
) -> Result<EndToEndValue<T>> {
    assoc.validate().map_err(Error::Constraint)?;
    if assoc.eps.dim() != rates.access.dim() || assoc.theta.dim() != rates.backhaul.dim() {
        return Err(Error::Dimension("association and rate table disagree".into()));
    }
    power.validate(assoc).map_err(Error::Constraint)?;
    Ok(end_to_end_unchecked(assoc, rates))
}

pub(crate) fn end_to_end_unchecked<T: Scalar>(assoc: &Association, rates: &RateTable<T>) -> EndToEndValue<T> {
    let (l_count, _, _, _) = rates.dims();
    let per_uav: Vec<T> = (0..l_count)
        .map(|l| {
            let access: T = assoc
                .links_of(l)
                .map(|(u, n)| rates.access[[l, u, n]])
                .sum();
            let backhaul: T = assoc
                .theta
                .column(l)
                .iter()
                .zip(rates.backhaul.column(l))
                .filter(|(&on, _)| on)
                .map(|(_, &r)| r)
                .sum();
            access.min(backhaul)
        })
        .collect();
    let total = per_uav.iter().copied().sum();
    EndToEndValue { per_uav, total }
}
