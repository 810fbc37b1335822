//! Component-capping protocol.
//!
//! Alice's input is teleported unchanged when every component is within its
//! cap. Otherwise Bob receives the unit vector closest to `a` (maximal
//! `a . v`) whose components respect the caps: over-cap components are pinned
//! at `+-cap` and the rest are rescaled to restore unit norm, repeated until
//! nothing exceeds its cap. With a single violated axis this is exactly "pin
//! the component at `W_z`, keep the azimuth about that axis".

use core::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::geometry::{BitPair, BlochVector, PauliRotation, Vec3};

use super::{ConditionalModel, OutcomeDistribution};

const MIN_WZ: f64 = 0.577_350_269_189_625_8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CapStyle {
    /// Every component capped at `W_z`.
    Uniform,
    /// z capped at `W_z`, x and y at `sqrt(2) - W_z`.
    Complementary,
}

/// Per-axis caps on the teleported vector's components.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapLimits {
    wz: f64,
    style: CapStyle,
    caps: [f64; 3],
}

impl CapLimits {
    pub fn uniform(wz: f64) -> Result<Self, Error> {
        check_wz(wz)?;
        Self::from_caps(wz, CapStyle::Uniform, [wz; 3])
    }

    pub fn complementary(wz: f64) -> Result<Self, Error> {
        check_wz(wz)?;
        let side = (SQRT_2 - wz).min(1.0);
        Self::from_caps(wz, CapStyle::Complementary, [side, side, wz])
    }

    fn from_caps(wz: f64, style: CapStyle, caps: [f64; 3]) -> Result<Self, Error> {
        let sum_sq: f64 = caps.iter().map(|c| c * c).sum();
        if caps.iter().any(|&c| !(c > 0.0 && c <= 1.0)) || sum_sq < 1.0 {
            return Err(Error::InvalidCaps { caps });
        }
        Ok(CapLimits { wz, style, caps })
    }

    pub fn wz(&self) -> f64 {
        self.wz
    }

    pub fn style(&self) -> CapStyle {
        self.style
    }

    pub fn caps(&self) -> [f64; 3] {
        self.caps
    }
}

fn check_wz(wz: f64) -> Result<(), Error> {
    if !(wz > MIN_WZ && wz <= 1.0) {
        return Err(Error::WzOutOfRange(wz));
    }
    Ok(())
}

/// Closest unit vector to `a` with `|v_k| <= caps[k]`.
pub fn cap_map(a: BlochVector, limits: &CapLimits) -> BlochVector {
    let caps = limits.caps;
    let comps = a.vec().to_array();
    if comps.iter().zip(caps).all(|(x, c)| x.abs() <= c) {
        return a;
    }

    let mut pinned = [false; 3];
    let mut out = comps;
    loop {
        let remaining = 1.0 - (0..3).filter(|&k| pinned[k]).map(|k| caps[k] * caps[k]).sum::<f64>();
        let free_norm = libm::sqrt((0..3).filter(|&k| !pinned[k]).map(|k| comps[k] * comps[k]).sum::<f64>());
        if free_norm == 0.0 {
            return degenerate_fill(comps, pinned, caps, remaining);
        }
        let scale = libm::sqrt(remaining.max(0.0)) / free_norm;
        let mut newly_pinned = false;
        for k in 0..3 {
            if !pinned[k] && comps[k].abs() * scale > caps[k] {
                pinned[k] = true;
                newly_pinned = true;
            }
        }
        if !newly_pinned {
            for k in 0..3 {
                out[k] = if pinned[k] {
                    caps[k].copysign(comps[k])
                } else {
                    comps[k] * scale
                };
            }
            return BlochVector::new_unchecked(Vec3::from_array(out));
        }
    }
}

/// Every unpinned component of `a` is zero, so the leftover norm has no
/// preferred direction; it goes to the axes following the first pinned axis,
/// in cyclic order, with positive sign.
fn degenerate_fill(comps: [f64; 3], pinned: [bool; 3], caps: [f64; 3], remaining: f64) -> BlochVector {
    let mut out = [0.0; 3];
    let first = (0..3).find(|&k| pinned[k]).unwrap_or(0);
    for k in 0..3 {
        if pinned[k] {
            out[k] = caps[k].copysign(comps[k]);
        }
    }
    let mut left = remaining.max(0.0);
    for step in 1..3 {
        let k = (first + step) % 3;
        if pinned[k] {
            continue;
        }
        let v = libm::sqrt(left).min(caps[k]);
        out[k] = v;
        left = (left - v * v).max(0.0);
    }
    BlochVector::new_unchecked(Vec3::from_array(out))
}

/// Cap map with every component limited to `W_z`.
pub fn pcrit_map(a: BlochVector, wz: f64) -> Result<BlochVector, Error> {
    Ok(cap_map(a, &CapLimits::uniform(wz)?))
}

pub(super) fn model(a: BlochVector, limits: &CapLimits) -> ConditionalModel {
    let target = cap_map(a, limits).vec();
    // R_c is its own inverse, so R_c v_c = target for every c
    ConditionalModel::linear(BitPair::ALL.map(|c| PauliRotation::for_bits(c).apply(target)))
}

/// `P = [1 + beta (R_c pcrit_map(a)) . b] / 8`.
pub fn pcrit_distribution(a: BlochVector, b: BlochVector, wz: f64) -> Result<OutcomeDistribution, Error> {
    Ok(model(a, &CapLimits::uniform(wz)?).distribution(b))
}

/// Default cap, `1/sqrt(2)`.
pub const DEFAULT_WZ: f64 = FRAC_1_SQRT_2;
