use crate::error::Error;
use crate::geometry::{BitPair, BlochVector, PauliRotation};

use super::{ConditionalModel, OutcomeDistribution};

pub(super) fn model(a: BlochVector, lambda: f64) -> ConditionalModel {
    ConditionalModel::linear(BitPair::ALL.map(|c| PauliRotation::for_bits(c).apply(a.vec()) * lambda))
}

/// `P(c0, c1, beta) = [1 + beta lambda (R_c a) . b] / 8`.
pub fn ideal_distribution(a: BlochVector, b: BlochVector, lambda: f64) -> Result<OutcomeDistribution, Error> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::LambdaOutOfRange(lambda));
    }
    Ok(model(a, lambda).distribution(b))
}

/// Statistics Bob sees when he applies `R_c` before measuring:
/// `P(c0, c1, beta) = [1 + beta lambda a . b] / 8`.
pub fn ideal_compensated_distribution(
    a: BlochVector,
    b: BlochVector,
    lambda: f64,
) -> Result<OutcomeDistribution, Error> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::LambdaOutOfRange(lambda));
    }
    Ok(ConditionalModel::linear([a.vec() * lambda; 4]).distribution(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::Sign;

    const EPS: f64 = 1e-15;

    fn bp(c0: u8, c1: u8) -> BitPair {
        BitPair::from_bits(c0, c1)
    }

    #[test]
    fn aligned_z() {
        let d = ideal_distribution(BlochVector::Z, BlochVector::Z, 1.0).unwrap();
        assert!((d.get(bp(0, 0), Sign::Plus) - 0.25).abs() < EPS);
        assert!(d.get(bp(0, 0), Sign::Minus).abs() < EPS);
        assert!(d.get(bp(0, 1), Sign::Plus).abs() < EPS);
        assert!((d.get(bp(0, 1), Sign::Minus) - 0.25).abs() < EPS);
    }

    #[test]
    fn zero_lambda_is_uniform() {
        let a = BlochVector::new(0.6, 0.0, 0.8).unwrap();
        let d = ideal_distribution(a, BlochVector::Y, 0.0).unwrap();
        assert!(d.max_abs_diff(&OutcomeDistribution::uniform()) < EPS);
    }

    #[test]
    fn orthogonal_inputs() {
        let d = ideal_distribution(BlochVector::X, BlochVector::Y, 1.0).unwrap();
        for o in super::super::Outcome::all() {
            assert!((d.get(o.bits, o.beta) - 0.125).abs() < EPS);
        }
    }

    #[test]
    fn lambda_range() {
        assert!(ideal_distribution(BlochVector::X, BlochVector::X, -0.1).is_err());
        assert!(ideal_distribution(BlochVector::X, BlochVector::X, 1.0 + 1e-12).is_err());
    }

    #[test]
    fn marginal_is_quarter() {
        let a = BlochVector::new(0.48, 0.6, 0.64).unwrap();
        let d = ideal_distribution(a, BlochVector::X, 0.7).unwrap();
        for m in d.alice_marginal() {
            assert!((m - 0.25).abs() < EPS);
        }
    }
}
