use rand::Rng;

use crate::geometry::{sample_uniform_sphere, BitPair, BlochVector};

use super::{Outcome, Sign};

/// One run of the two-bit classical simulation with active compensation.
///
/// Shared hidden vectors `l1`, `l2` are uniform on the sphere. Alice computes
/// `alpha = -sgn(a . l1)` and `c = sgn(a . l1) sgn(a . l2)` and sends them as
/// `c0 = (1 - alpha)/2`, `c1 = (1 - c)/2`. Bob decodes both and outputs
/// `beta = -alpha sgn(b . (l1 + c l2))`, which gives `<beta> = a . b` for every
/// value of the bits.
pub fn toner_bacon_active_sample<R: Rng + ?Sized>(a: BlochVector, b: BlochVector, rng: &mut R) -> Outcome {
    let l1 = sample_uniform_sphere(rng).vec();
    let l2 = sample_uniform_sphere(rng).vec();

    let s1 = Sign::of(a.vec().dot(l1));
    let s2 = Sign::of(a.vec().dot(l2));
    let alpha = s1.flip();
    let c = s1.times(s2);
    let bits = BitPair::new(alpha == Sign::Minus, c == Sign::Minus);

    // Bob's side: decode (alpha, c) from the bits
    let alpha_b = if bits.c0 { Sign::Minus } else { Sign::Plus };
    let c_b = if bits.c1 { -1.0 } else { 1.0 };
    let beta = alpha_b.flip().times(Sign::of(b.vec().dot(l1 + l2 * c_b)));
    Outcome::new(bits, beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mean_beta_tracks_overlap() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let a = BlochVector::new(0.6, 0.0, 0.8).unwrap();
        let b = BlochVector::new(0.0, 0.6, 0.8).unwrap();
        let n = 200_000;
        let mean: f64 = (0..n)
            .map(|_| toner_bacon_active_sample(a, b, &mut rng).beta.value())
            .sum::<f64>()
            / n as f64;
        // a . b = 0.64, standard error below 0.002
        assert!((mean - 0.64).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn aligned_inputs_correlate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| {
                toner_bacon_active_sample(BlochVector::Z, BlochVector::Z, &mut rng)
                    .beta
                    .value()
            })
            .sum::<f64>()
            / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }
}
