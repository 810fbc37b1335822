//! Gisin's sector-announcing classical model and its two disguises.

use rand::Rng;

use crate::geometry::{
    sample_uniform_rotation, sector_index_of, sector_of, tetrahedron_vertex, BitPair, BlochVector, T00,
};

use super::{sample_beta, ConditionalModel, Outcome, OutcomeDistribution, Run};

pub(super) fn plain_model(a: BlochVector) -> ConditionalModel {
    let sector = sector_of(a).index;
    let mut weights = [0.0; 4];
    weights[sector.index()] = 1.0;
    ConditionalModel {
        weights,
        vectors: [T00.vec(); 4],
    }
}

/// Averaged over the shared bits `r`: Alice outputs `c = c' ^ r` for `a` in
/// sector `c'`, Bob holds `t_r = t_{c ^ c'}`.
pub(super) fn hashed_model(a: BlochVector) -> ConditionalModel {
    let sector = sector_of(a).index;
    ConditionalModel::linear(BitPair::ALL.map(|c| tetrahedron_vertex(c.xor(sector)).vec()))
}

/// `P = delta(a in S_c) (1 + beta t00 . b)/2`.
pub fn gisin_distribution(a: BlochVector, b: BlochVector) -> OutcomeDistribution {
    plain_model(a).distribution(b)
}

/// `P = (1 + beta t_{c ^ c'} . b)/8` with `c'` the sector of `a`.
pub fn gisin_hashed_distribution(a: BlochVector, b: BlochVector) -> OutcomeDistribution {
    hashed_model(a).distribution(b)
}

pub(super) fn frame_randomized_run<R: Rng + ?Sized>(a: BlochVector, b: BlochVector, rng: &mut R) -> Run {
    let frame = sample_uniform_rotation(rng);
    // sector of a with respect to the rotated tetrahedron
    let bits = sector_index_of(frame.apply_inverse(a.vec()));
    let hidden = frame.apply(T00.vec());
    Run {
        outcome: Outcome::new(bits, sample_beta(hidden.dot(b.vec()), rng)),
        bob_vector: Some(hidden),
    }
}

/// One run of the frame-randomised variant.
pub fn gisin_frame_randomized_sample<R: Rng + ?Sized>(a: BlochVector, b: BlochVector, rng: &mut R) -> Outcome {
    frame_randomized_run(a, b, rng).outcome
}

/// Like [`gisin_frame_randomized_sample`] but also returns Bob's hidden
/// vector (the rotated `t00`).
pub fn gisin_frame_randomized_run<R: Rng + ?Sized>(a: BlochVector, b: BlochVector, rng: &mut R) -> Run {
    frame_randomized_run(a, b, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::Sign;

    const INV_SQRT_3: f64 = 0.577_350_269_189_625_8;

    #[test]
    fn center_aligned() {
        let d = gisin_distribution(T00, T00);
        assert!((d.get(BitPair::new(false, false), Sign::Plus) - 1.0).abs() < 1e-15);
        assert!((d.total() - 1.0).abs() < 1e-15);
        for (o, p) in d.iter() {
            if !(o.bits == BitPair::new(false, false) && o.beta == Sign::Plus) {
                assert!(p.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn center_orthogonal_b() {
        // (1, -1, 0)/sqrt(2) is orthogonal to t00
        let b = BlochVector::new(core::f64::consts::FRAC_1_SQRT_2, -core::f64::consts::FRAC_1_SQRT_2, 0.0).unwrap();
        let d = gisin_distribution(T00, b);
        assert!((d.get(BitPair::new(false, false), Sign::Plus) - 0.5).abs() < 1e-15);
        assert!((d.get(BitPair::new(false, false), Sign::Minus) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn deep_in_s11() {
        let a = tetrahedron_vertex(BitPair::new(true, true));
        let d = gisin_distribution(a, BlochVector::Z);
        let c = BitPair::new(true, true);
        assert!((d.get(c, Sign::Plus) - 0.5 * (1.0 + INV_SQRT_3)).abs() < 1e-15);
        assert!((d.get(c, Sign::Minus) - 0.5 * (1.0 - INV_SQRT_3)).abs() < 1e-15);
        assert!((d.alice_marginal()[c.index()] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hashed_reindexing() {
        let d = gisin_hashed_distribution(T00, BlochVector::Z);
        for c in BitPair::ALL {
            let tz = tetrahedron_vertex(c).z();
            assert!((d.get(c, Sign::Plus) - 0.125 * (1.0 + tz)).abs() < 1e-15);
            assert!((tz.abs() - INV_SQRT_3).abs() < 1e-15);
        }
        for m in d.alice_marginal() {
            assert!((m - 0.25).abs() < 1e-15);
        }
    }
}
