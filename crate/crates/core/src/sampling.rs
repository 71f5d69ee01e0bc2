//! Poised interpolation tuples around the current iterate.
//!
//! A tuple `(y0, y1, ..., ym)` is certified by `||L^-1||`, the spectral norm of
//! the inverse of the displacement matrix `L = [y_i - y0]` scaled by the
//! sample radius. The certificate is invariant under scaling and shifting the
//! tuple, so it measures geometry only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Relative slack when comparing a certificate against its bound.
const CERTIFICATE_SLACK: f64 = 1e-12;

/// `sigma_min < SINGULAR_RATIO * sigma_max` counts as rank deficient.
pub const SINGULAR_RATIO: f64 = 1e-14;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingKind {
    /// `y_i = y0 + radius * e_i`.
    #[default]
    Coordinate,
    /// `y_i = y0 + radius * q_i` for a random orthonormal basis `q`.
    RotatedCoordinate,
    /// Uniform draws in the ball, rescaled so the farthest point sits on the sphere.
    RandomBall,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingStrategy {
    #[serde(rename = "strategy")]
    pub kind: SamplingKind,
    pub seed: u64,
    pub max_resamples: usize,
}

impl Default for SamplingStrategy {
    fn default() -> Self {
        SamplingStrategy {
            kind: SamplingKind::Coordinate,
            seed: 0,
            max_resamples: 100,
        }
    }
}

impl SamplingStrategy {
    pub fn coordinate() -> Self {
        Self::default()
    }

    pub fn random_ball(seed: u64) -> Self {
        SamplingStrategy {
            kind: SamplingKind::RandomBall,
            seed,
            ..Self::default()
        }
    }

    pub fn rotated_coordinate(seed: u64) -> Self {
        SamplingStrategy {
            kind: SamplingKind::RotatedCoordinate,
            seed,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoisedSample {
    pub center: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub radius: f64,
    pub inv_norm: f64,
    /// Rejected draws before this one was accepted.
    pub resamples: usize,
}

impl PoisedSample {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Center first, then `y_1..y_m`.
    pub fn all_points(&self) -> impl Iterator<Item = &[f64]> {
        std::iter::once(self.center.as_slice()).chain(self.points.iter().map(Vec::as_slice))
    }

    /// Displacement matrix `L` with rows `y_i - y0`.
    pub fn displacements(&self) -> Vec<Vec<f64>> {
        self.points
            .iter()
            .map(|p| p.iter().zip(&self.center).map(|(a, b)| a - b).collect())
            .collect()
    }
}

/// `1 / sigma_min(L / Delta)` with `Delta = max_i ||y_i - y0||`; `+inf` when
/// the scaled matrix is singular to working precision.
pub fn inv_norm_of(points: &[Vec<f64>], center: &[f64]) -> Result<f64> {
    let m = center.len();
    if points.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: points.len(),
        });
    }
    if let Some(p) = points.iter().find(|p| p.len() != m) {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: p.len(),
        });
    }
    let delta = points
        .iter()
        .map(|p| linalg::dist(p, center))
        .fold(0.0, f64::max);
    if !(delta > 0.0) {
        return Ok(f64::INFINITY);
    }
    let scaled: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.iter().zip(center).map(|(a, b)| (a - b) / delta).collect())
        .collect();
    let sv = linalg::singular_values(&scaled);
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min >= SINGULAR_RATIO * max) || min == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / min)
}

fn rng_for(strategy: &SamplingStrategy, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(strategy.seed);
    rng.set_stream(stream);
    rng
}

fn gaussian(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn orthonormal_basis(rng: &mut ChaCha8Rng, m: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    while basis.len() < m {
        let mut v = gaussian(rng, m);
        for q in &basis {
            let d = linalg::dot(&v, q);
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= d * b);
        }
        let n = linalg::norm(&v);
        if n > 1e-8 {
            basis.push(v.into_iter().map(|a| a / n).collect());
        }
    }
    basis
}

fn ball_directions(rng: &mut ChaCha8Rng, m: usize) -> Vec<Vec<f64>> {
    let mut dirs: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            let g = gaussian(rng, m);
            let n = linalg::norm(&g).max(f64::MIN_POSITIVE);
            let r = rng.random::<f64>().powf(1.0 / m as f64);
            g.into_iter().map(|a| a * r / n).collect()
        })
        .collect();
    let far = dirs.iter().map(|d| linalg::norm(d)).fold(0.0, f64::max);
    if far > 0.0 {
        dirs.iter_mut().flatten().for_each(|a| *a /= far);
    }
    dirs
}

fn assemble(center: &[f64], radius: f64, dirs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    dirs.iter()
        .map(|d| center.iter().zip(d).map(|(c, u)| c + radius * u).collect())
        .collect()
}

/// Builds a poised tuple centred at `center` with `max ||y_i - y0|| = radius`
/// and `||L^-1|| <= max_inv_norm`.
pub fn build_poised_sample(
    center: &[f64],
    radius: f64,
    max_inv_norm: f64,
    strategy: &SamplingStrategy,
) -> Result<PoisedSample> {
    build_poised_sample_in_stream(center, radius, max_inv_norm, strategy, 0)
}

/// As [`build_poised_sample`], drawing from an independent random stream;
/// the solver uses the iteration counter as the stream id.
pub fn build_poised_sample_in_stream(
    center: &[f64],
    radius: f64,
    max_inv_norm: f64,
    strategy: &SamplingStrategy,
    stream: u64,
) -> Result<PoisedSample> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidRadius(radius));
    }
    if !(max_inv_norm >= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "inverse-norm bound M must be >= 1, got {max_inv_norm}"
        )));
    }
    let m = center.len();
    let bound = max_inv_norm * (1.0 + CERTIFICATE_SLACK);
    let mut rng = rng_for(strategy, stream);
    let mut rejections = 0;
    loop {
        let dirs = match strategy.kind {
            SamplingKind::Coordinate => (0..m)
                .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
            SamplingKind::RotatedCoordinate => orthonormal_basis(&mut rng, m),
            SamplingKind::RandomBall => ball_directions(&mut rng, m),
        };
        let points = assemble(center, radius, &dirs);
        let inv_norm = inv_norm_of(&points, center)?;
        if inv_norm <= bound {
            return Ok(PoisedSample {
                center: center.to_vec(),
                points,
                radius,
                inv_norm,
                resamples: rejections,
            });
        }
        rejections += 1;
        if strategy.kind == SamplingKind::Coordinate || rejections >= strategy.max_resamples {
            return Err(Error::PoisednessFailure {
                bound: max_inv_norm,
                rejections,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Smallest singular value of a 2x2 matrix from the characteristic
    /// polynomial of `A^T A`.
    fn sigma_min_2x2(a: [[f64; 2]; 2]) -> f64 {
        let p = a[0][0] * a[0][0] + a[1][0] * a[1][0];
        let q = a[0][0] * a[0][1] + a[1][0] * a[1][1];
        let r = a[0][1] * a[0][1] + a[1][1] * a[1][1];
        let tr = p + r;
        let det = p * r - q * q;
        ((tr - (tr * tr - 4.0 * det).sqrt()) / 2.0).sqrt()
    }

    fn check_invariants(s: &PoisedSample, m_bound: f64) {
        let far = s.points.iter().map(|p| linalg::dist(p, &s.center)).fold(0.0, f64::max);
        assert!(s.points.iter().all(|p| linalg::dist(p, &s.center) <= s.radius * (1.0 + 1e-12)));
        assert!((far - s.radius).abs() <= 1e-12 * s.radius);
        assert!(s.inv_norm <= m_bound * (1.0 + 1e-12));
        assert!(s.inv_norm.is_finite());
        let recomputed = inv_norm_of(&s.points, &s.center).unwrap();
        assert_eq!(recomputed, s.inv_norm);
    }

    #[test]
    fn coordinate_sample_is_identity() {
        let s = build_poised_sample(&[0.0, 0.0], 1.0, 10.0, &SamplingStrategy::coordinate()).unwrap();
        assert_eq!(s.points, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(s.inv_norm, 1.0);
        let s = build_poised_sample(&[0.0, 0.0], 0.5, 10.0, &SamplingStrategy::coordinate()).unwrap();
        assert_eq!(s.points, vec![vec![0.5, 0.0], vec![0.0, 0.5]]);
        assert_eq!(s.inv_norm, 1.0);
        check_invariants(&s, 10.0);
    }

    #[test]
    fn random_ball_certificate_matches_independent_svd() {
        let s = build_poised_sample(&[1.0, 1.0], 0.1, 10.0, &SamplingStrategy::random_ball(42)).unwrap();
        check_invariants(&s, 10.0);
        let l = s.displacements();
        let a = [[l[0][0] / 0.1, l[0][1] / 0.1], [l[1][0] / 0.1, l[1][1] / 0.1]];
        let expected = 1.0 / sigma_min_2x2(a);
        assert!((s.inv_norm - expected).abs() < 1e-10 * expected, "{} vs {expected}", s.inv_norm);
    }

    #[test]
    fn inv_norm_examples() {
        let c = [0.0, 0.0];
        assert!((inv_norm_of(&[vec![1.0, 0.0], vec![0.0, 1.0]], &c).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(inv_norm_of(&[vec![1.0, 0.0], vec![2.0, 0.0]], &c).unwrap(), f64::INFINITY);
        // L = [[1,0],[1,1]], Delta = sqrt(2).
        let s2 = 2f64.sqrt();
        let expected = 1.0 / sigma_min_2x2([[1.0 / s2, 0.0], [1.0 / s2, 1.0 / s2]]);
        let got = inv_norm_of(&[vec![1.0, 0.0], vec![1.0, 1.0]], &c).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
        // sigma_min(L) = sqrt((3 - sqrt 5)/2), so the certificate is sqrt 2 over it.
        assert!((got - s2 / ((3.0 - 5f64.sqrt()) / 2.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn inv_norm_dimension_mismatch() {
        assert!(inv_norm_of(&[vec![1.0, 0.0]], &[0.0, 0.0]).is_err());
        assert!(inv_norm_of(&[vec![1.0], vec![0.0, 1.0]], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn bad_inputs() {
        let st = SamplingStrategy::coordinate();
        assert_eq!(build_poised_sample(&[0.0], 0.0, 10.0, &st), Err(Error::InvalidRadius(0.0)));
        assert!(build_poised_sample(&[0.0], -1.0, 10.0, &st).is_err());
        assert!(build_poised_sample(&[0.0], 1.0, 0.5, &st).is_err());
    }

    #[test]
    fn tight_bound_exhausts_resamples() {
        let st = SamplingStrategy {
            max_resamples: 5,
            ..SamplingStrategy::random_ball(1)
        };
        let err = build_poised_sample(&[0.0; 4], 1.0, 1.0, &st).unwrap_err();
        assert_eq!(err, Error::PoisednessFailure { bound: 1.0, rejections: 5 });
    }

    #[test]
    fn rotated_coordinate_is_orthonormal() {
        let s = build_poised_sample(&[3.0, -1.0, 2.0], 0.25, 1.0, &SamplingStrategy::rotated_coordinate(7))
            .unwrap();
        check_invariants(&s, 1.0);
        assert!((s.inv_norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_per_stream() {
        let st = SamplingStrategy::random_ball(9);
        let a = build_poised_sample_in_stream(&[0.0; 3], 0.3, 50.0, &st, 4).unwrap();
        let b = build_poised_sample_in_stream(&[0.0; 3], 0.3, 50.0, &st, 4).unwrap();
        let c = build_poised_sample_in_stream(&[0.0; 3], 0.3, 50.0, &st, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.points, c.points);
    }

    proptest! {
        #[test]
        fn certificate_is_scale_and_shift_invariant(
            raw in prop::collection::vec(-1.0..1.0f64, 9),
            center in prop::collection::vec(-5.0..5.0f64, 3),
            shift in prop::collection::vec(-5.0..5.0f64, 3),
            scale in 1e-3..1e3f64,
        ) {
            let pts: Vec<Vec<f64>> = raw.chunks(3).map(|r| r.iter().zip(&center).map(|(a, c)| a + c).collect()).collect();
            let base = inv_norm_of(&pts, &center).unwrap();
            prop_assume!(base.is_finite() && base < 1e6);
            let moved: Vec<Vec<f64>> = pts.iter()
                .map(|p| p.iter().zip(&center).zip(&shift).map(|((a, c), s)| scale * (a - c) + s).collect())
                .collect();
            let other = inv_norm_of(&moved, &shift).unwrap();
            prop_assert!((other - base).abs() <= 1e-10 * base, "{} vs {}", other, base);
        }

        #[test]
        fn every_sample_satisfies_invariants(
            seed in 0u64..1000,
            radius in 1e-4..2.0f64,
            kind in 0usize..3,
            m in 1usize..6,
        ) {
            let kind = [SamplingKind::Coordinate, SamplingKind::RotatedCoordinate, SamplingKind::RandomBall][kind];
            let st = SamplingStrategy { kind, seed, max_resamples: 1000 };
            let center: Vec<f64> = (0..m).map(|i| i as f64 * 0.7 - 1.0).collect();
            let s = build_poised_sample(&center, radius, 100.0, &st).unwrap();
            check_invariants(&s, 100.0);
        }
    }
}
