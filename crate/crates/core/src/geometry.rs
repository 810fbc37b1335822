//! Bloch-sphere vectors, the four teleportation corrections, uniform sampling
//! on the sphere and the tetrahedral quarter-sphere partition.

use core::f64::consts::{FRAC_1_SQRT_2, PI};
use core::fmt;
use core::ops::{Add, AddAssign, Mul, Neg, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Tolerance on `|v| - 1` accepted when constructing a [`BlochVector`].
pub const UNIT_TOLERANCE: f64 = 1e-12;

const INV_SQRT_3: f64 = 0.577_350_269_189_625_8;

/// Plain 3-vector of reals. No normalisation constraint.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub const fn from_array(v: [f64; 3]) -> Self {
        Vec3::new(v[0], v[1], v[2])
    }

    pub const fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        libm::sqrt(self.norm_squared())
    }

    pub fn component(self, axis: usize) -> f64 {
        self.to_array()[axis]
    }

    /// Maximum absolute difference between components.
    pub fn max_abs_diff(self, other: Vec3) -> f64 {
        let d = self - other;
        d.x.abs().max(d.y.abs()).max(d.z.abs())
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// A unit vector on the Bloch sphere.
///
/// Used for Alice's input state, Bob's measurement direction and the hidden
/// vectors of the classical models.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 3]", try_from = "[f64; 3]")]
pub struct BlochVector(Vec3);

impl BlochVector {
    pub const X: BlochVector = BlochVector(Vec3::new(1.0, 0.0, 0.0));
    pub const Y: BlochVector = BlochVector(Vec3::new(0.0, 1.0, 0.0));
    pub const Z: BlochVector = BlochVector(Vec3::new(0.0, 0.0, 1.0));

    /// Accepts `(x, y, z)` if its norm is within [`UNIT_TOLERANCE`] of one,
    /// renormalising the accepted vector.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, Error> {
        Self::with_tolerance(Vec3::new(x, y, z), UNIT_TOLERANCE)
    }

    pub fn with_tolerance(v: Vec3, tolerance: f64) -> Result<Self, Error> {
        let norm = v.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > tolerance {
            return Err(Error::NotUnit { norm });
        }
        // already unit to rounding: keep the bits, so re-reading a stored
        // vector gives it back exactly
        if (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
            return Ok(BlochVector(v));
        }
        Ok(BlochVector(v * (1.0 / norm)))
    }

    /// Normalises any finite non-zero vector.
    pub fn normalize(v: Vec3) -> Result<Self, Error> {
        let norm = v.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::NotUnit { norm });
        }
        Ok(BlochVector(v * (1.0 / norm)))
    }

    /// Polar angle `theta` from +z, azimuth `phi` from +x.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        let (st, ct) = libm::sincos(theta);
        let (sp, cp) = libm::sincos(phi);
        BlochVector(Vec3::new(st * cp, st * sp, ct))
    }

    /// `(theta, phi)` with `theta` in `[0, pi]` and `phi` in `(-pi, pi]`.
    pub fn angles(self) -> (f64, f64) {
        let v = self.0;
        (libm::acos(v.z.clamp(-1.0, 1.0)), libm::atan2(v.y, v.x))
    }

    /// Wraps a vector already known to be unit length (internal constructions).
    pub(crate) const fn new_unchecked(v: Vec3) -> Self {
        BlochVector(v)
    }

    pub const fn vec(self) -> Vec3 {
        self.0
    }

    pub fn x(self) -> f64 {
        self.0.x
    }

    pub fn y(self) -> f64 {
        self.0.y
    }

    pub fn z(self) -> f64 {
        self.0.z
    }

    pub fn dot(self, other: BlochVector) -> f64 {
        self.0.dot(other.0)
    }

    pub fn axis(axis: usize) -> BlochVector {
        match axis {
            0 => Self::X,
            1 => Self::Y,
            2 => Self::Z,
            _ => panic!("axis index {axis} out of range"),
        }
    }
}

impl Neg for BlochVector {
    type Output = BlochVector;
    fn neg(self) -> BlochVector {
        BlochVector(-self.0)
    }
}

impl From<BlochVector> for Vec3 {
    fn from(v: BlochVector) -> Vec3 {
        v.0
    }
}

impl From<BlochVector> for [f64; 3] {
    fn from(v: BlochVector) -> [f64; 3] {
        v.0.to_array()
    }
}

impl TryFrom<[f64; 3]> for BlochVector {
    type Error = Error;
    fn try_from(v: [f64; 3]) -> Result<Self, Error> {
        BlochVector::new(v[0], v[1], v[2])
    }
}

impl fmt::Display for BlochVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Alice's two output bits `(c0, c1)`.
///
/// Ordering and [`BitPair::index`] follow lexicographic order of `(c0, c1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BitPair {
    pub c0: bool,
    pub c1: bool,
}

impl BitPair {
    pub const ALL: [BitPair; 4] = [
        BitPair::new(false, false),
        BitPair::new(false, true),
        BitPair::new(true, false),
        BitPair::new(true, true),
    ];

    pub const fn new(c0: bool, c1: bool) -> Self {
        BitPair { c0, c1 }
    }

    pub fn from_bits(c0: u8, c1: u8) -> Self {
        BitPair::new(c0 != 0, c1 != 0)
    }

    pub fn from_index(index: usize) -> Self {
        Self::ALL[index]
    }

    pub const fn index(self) -> usize {
        ((self.c0 as usize) << 1) | self.c1 as usize
    }

    pub fn xor(self, other: BitPair) -> BitPair {
        BitPair::new(self.c0 ^ other.c0, self.c1 ^ other.c1)
    }

    pub fn bits(self) -> (u8, u8) {
        (self.c0 as u8, self.c1 as u8)
    }
}

impl fmt::Display for BitPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.c0 as u8, self.c1 as u8)
    }
}

/// One of the four corrections `R_{c0 c1}`: identity or a rotation by pi about
/// x, y or z. Each is diagonal with entries in `{-1, +1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PauliRotation {
    index: BitPair,
    diagonal: [i8; 3],
}

/// Returns `R_{c0 c1}`.
pub fn rotation(c0: bool, c1: bool) -> PauliRotation {
    PauliRotation::for_bits(BitPair::new(c0, c1))
}

impl PauliRotation {
    pub fn for_bits(index: BitPair) -> Self {
        let diagonal = match (index.c0, index.c1) {
            (false, false) => [1, 1, 1],
            (false, true) => [1, -1, -1],
            (true, false) => [-1, 1, -1],
            (true, true) => [-1, -1, 1],
        };
        PauliRotation { index, diagonal }
    }

    pub fn index(self) -> BitPair {
        self.index
    }

    pub fn matrix(self) -> [[i8; 3]; 3] {
        let mut m = [[0i8; 3]; 3];
        for (k, row) in m.iter_mut().enumerate() {
            row[k] = self.diagonal[k];
        }
        m
    }

    pub fn apply(self, v: Vec3) -> Vec3 {
        Vec3::new(
            v.x * f64::from(self.diagonal[0]),
            v.y * f64::from(self.diagonal[1]),
            v.z * f64::from(self.diagonal[2]),
        )
    }

    /// Applies to a unit vector; the result is exactly unit since entries are +-1.
    pub fn apply_unit(self, v: BlochVector) -> BlochVector {
        BlochVector::new_unchecked(self.apply(v.vec()))
    }

    /// `R_ij R_kl = R_{i^k, j^l}`.
    pub fn compose(self, other: PauliRotation) -> PauliRotation {
        PauliRotation::for_bits(self.index.xor(other.index))
    }
}

/// Applies a correction to a Bloch vector.
pub fn apply_rotation(r: PauliRotation, v: BlochVector) -> BlochVector {
    r.apply_unit(v)
}

/// Multiplies two 3x3 integer matrices (used to check group closure entrywise).
pub fn matmul(a: [[i8; 3]; 3], b: [[i8; 3]; 3]) -> [[i8; 3]; 3] {
    let mut out = [[0i8; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// A quarter of the sphere: the Voronoi cell of the tetrahedral direction
/// `t_ij = R_ij t_00` with `t_00 = (1, 1, 1)/sqrt(3)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub index: BitPair,
    pub center: BlochVector,
}

impl Sector {
    pub fn new(index: BitPair) -> Self {
        Sector {
            index,
            center: tetrahedron_vertex(index),
        }
    }

    pub fn all() -> [Sector; 4] {
        BitPair::ALL.map(Sector::new)
    }
}

pub const T00: BlochVector = BlochVector(Vec3::new(INV_SQRT_3, INV_SQRT_3, INV_SQRT_3));

pub fn tetrahedron_vertex(index: BitPair) -> BlochVector {
    PauliRotation::for_bits(index).apply_unit(T00)
}

/// Sector containing `a`: argmax of `a . t_ij`, ties to the lowest `(i, j)`.
pub fn sector_of(a: BlochVector) -> Sector {
    Sector::new(sector_index_of(a.vec()))
}

pub(crate) fn sector_index_of(a: Vec3) -> BitPair {
    let mut best = BitPair::ALL[0];
    let mut best_dot = a.dot(T00.vec());
    for &bits in &BitPair::ALL[1..] {
        let d = a.dot(tetrahedron_vertex(bits).vec());
        if d > best_dot {
            best = bits;
            best_dot = d;
        }
    }
    best
}

/// Uniform point on the sphere: `z` uniform on `[-1, 1]`, azimuth uniform on
/// `[0, 2 pi)`.
pub fn sample_uniform_sphere<R: Rng + ?Sized>(rng: &mut R) -> BlochVector {
    let z = 2.0 * rng.gen::<f64>() - 1.0;
    let phi = 2.0 * PI * rng.gen::<f64>();
    let r = libm::sqrt((1.0 - z * z).max(0.0));
    let (s, c) = libm::sincos(phi);
    BlochVector(Vec3::new(r * c, r * s, z))
}

/// A proper rotation stored as an orthonormal 3x3 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation3 {
    rows: [[f64; 3]; 3],
}

impl Rotation3 {
    pub const IDENTITY: Rotation3 = Rotation3 {
        rows: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    /// From a unit quaternion `(w, x, y, z)`.
    pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Self {
        let rows = [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ];
        Rotation3 { rows }
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        self.rows
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        let r = &self.rows;
        Vec3::new(
            r[0][0] * v.x + r[0][1] * v.y + r[0][2] * v.z,
            r[1][0] * v.x + r[1][1] * v.y + r[1][2] * v.z,
            r[2][0] * v.x + r[2][1] * v.y + r[2][2] * v.z,
        )
    }

    /// Applies the inverse (transpose).
    pub fn apply_inverse(&self, v: Vec3) -> Vec3 {
        let r = &self.rows;
        Vec3::new(
            r[0][0] * v.x + r[1][0] * v.y + r[2][0] * v.z,
            r[0][1] * v.x + r[1][1] * v.y + r[2][1] * v.z,
            r[0][2] * v.x + r[1][2] * v.y + r[2][2] * v.z,
        )
    }
}

/// Haar-uniform random rotation from a uniform unit quaternion (Shoemake).
pub fn sample_uniform_rotation<R: Rng + ?Sized>(rng: &mut R) -> Rotation3 {
    let u1: f64 = rng.gen();
    let u2: f64 = rng.gen();
    let u3: f64 = rng.gen();
    let a = libm::sqrt(1.0 - u1);
    let b = libm::sqrt(u1);
    let (s2, c2) = libm::sincos(2.0 * PI * u2);
    let (s3, c3) = libm::sincos(2.0 * PI * u3);
    Rotation3::from_quaternion(b * c3, a * s2, a * c2, b * s3)
}

/// `(x + y)/sqrt(2)` and `(x - y)/sqrt(2)` for orthonormal axes `x`, `y`.
pub(crate) fn diagonal_pair(x: BlochVector, y: BlochVector) -> (BlochVector, BlochVector) {
    (
        BlochVector::new_unchecked((x.vec() + y.vec()) * FRAC_1_SQRT_2),
        BlochVector::new_unchecked((x.vec() - y.vec()) * FRAC_1_SQRT_2),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rotation_matrices_match_definitions() {
        let id = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];
        assert_eq!(rotation(false, false).matrix(), id);
        assert_eq!(rotation(false, true).matrix(), [[1, 0, 0], [0, -1, 0], [0, 0, -1]]);
        assert_eq!(rotation(true, false).matrix(), [[-1, 0, 0], [0, 1, 0], [0, 0, -1]]);
        assert_eq!(rotation(true, true).matrix(), [[-1, 0, 0], [0, -1, 0], [0, 0, 1]]);
    }

    #[test]
    fn composition_example() {
        let m = matmul(rotation(true, true).matrix(), rotation(true, false).matrix());
        assert_eq!(m, rotation(false, true).matrix());
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn group_closure_and_self_inverse() {
        let id = rotation(false, false).matrix();
        for p in BitPair::ALL {
            let rp = PauliRotation::for_bits(p);
            assert_eq!(matmul(rp.matrix(), rp.matrix()), id);
            let m = rp.matrix();
            for i in 0..3 {
                for j in 0..3 {
                    assert_eq!(m[i][j], m[j][i]);
                }
            }
            for q in BitPair::ALL {
                let rq = PauliRotation::for_bits(q);
                assert_eq!(matmul(rp.matrix(), rq.matrix()), rp.compose(rq).matrix());
                assert_eq!(rp.compose(rq).index(), p.xor(q));
            }
        }
    }

    #[test]
    fn apply_rotation_examples() {
        let v = apply_rotation(rotation(false, true), BlochVector::Z);
        assert_eq!(v.vec(), Vec3::new(0.0, 0.0, -1.0));
        let a = BlochVector::new(0.6, 0.0, 0.8).unwrap();
        assert_eq!(apply_rotation(rotation(false, false), a), a);
    }

    #[test]
    fn unit_tolerance_on_construction() {
        assert!(BlochVector::new(1.0 + 1e-13, 0.0, 0.0).is_ok());
        assert!(BlochVector::new(1.0 + 1e-9, 0.0, 0.0).is_err());
        assert!(BlochVector::new(0.0, 0.0, 0.0).is_err());
        assert!(BlochVector::new(f64::NAN, 0.0, 0.0).is_err());
    }

    #[test]
    fn tetrahedron_vertices() {
        let t = Sector::all();
        let expect = [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]];
        for (s, e) in t.iter().zip(expect) {
            let e = Vec3::from_array(e) * INV_SQRT_3;
            assert!(s.center.vec().max_abs_diff(e) < 1e-15);
        }
    }

    #[test]
    fn sector_examples() {
        assert_eq!(sector_of(T00).index, BitPair::new(false, false));
        // x-hat ties between t00 and t01; the lower index wins
        assert_eq!(sector_of(BlochVector::X).index, BitPair::new(false, false));
        // -t00 is equidistant from the other three vertices
        assert_eq!(sector_of(-T00).index, BitPair::new(false, true));
        let deep = -T00.vec() + tetrahedron_vertex(BitPair::new(true, true)).vec() * 1e-3;
        assert_eq!(sector_index_of(deep), BitPair::new(true, true));
    }

    #[test]
    fn sampling_is_deterministic_and_unit() {
        let mut r1 = ChaCha8Rng::seed_from_u64(11);
        let mut r2 = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let a = sample_uniform_sphere(&mut r1);
            let b = sample_uniform_sphere(&mut r2);
            assert_eq!(a, b);
            assert!((a.vec().norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn random_rotation_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let q = sample_uniform_rotation(&mut rng);
            let r = q.rows();
            for i in 0..3 {
                for j in 0..3 {
                    let d: f64 = (0..3).map(|k| r[i][k] * r[j][k]).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((d - want).abs() < 1e-12);
                }
            }
            // determinant +1
            let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
                - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
                + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
            assert!((det - 1.0).abs() < 1e-12);
            let v = Vec3::new(0.3, -0.4, 0.5);
            assert!(q.apply_inverse(q.apply(v)).max_abs_diff(v) < 1e-14);
        }
    }

    #[test]
    fn angles_round_trip() {
        let a = BlochVector::from_angles(0.7, -2.1);
        let (t, p) = a.angles();
        assert!((t - 0.7).abs() < 1e-12 && (p + 2.1).abs() < 1e-12);
    }
}
