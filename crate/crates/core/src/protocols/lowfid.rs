use crate::geometry::{BitPair, BlochVector, PauliRotation, Vec3};

use super::{ConditionalModel, OutcomeDistribution};

/// Match radius around x-hat and y-hat. Sampled inputs hit the match set with
/// probability zero; the CHSH inputs are fed exactly.
pub const LOWFID_DEFAULT_TOLERANCE: f64 = 1e-9;

fn matches_chsh_input(a: BlochVector, tolerance: f64) -> bool {
    (a.vec() - BlochVector::X.vec()).norm() <= tolerance || (a.vec() - BlochVector::Y.vec()).norm() <= tolerance
}

pub(super) fn model(a: BlochVector, tolerance: f64) -> ConditionalModel {
    if matches_chsh_input(a, tolerance) {
        ConditionalModel::linear(BitPair::ALL.map(|c| PauliRotation::for_bits(c).apply(a.vec())))
    } else {
        ConditionalModel::linear([Vec3::ZERO; 4])
    }
}

/// Ideal statistics for `a` within `tol` of x-hat or y-hat, uniform otherwise.
pub fn lowfid_distribution(a: BlochVector, b: BlochVector, tol: f64) -> OutcomeDistribution {
    model(a, tol).distribution(b)
}
