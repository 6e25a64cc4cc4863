//! Linear maps between two-dimensional inner-product spaces.
//!
//! A map is stored as a plain 2x2 matrix together with the inner products of
//! its domain and codomain. All norms and distances are metric-aware: they
//! are computed in orthonormal frames of the two inner products, so the
//! numbers depend only on the geometry, not on the bases in which the data
//! happens to be expressed.
//!
//! The central quantity is the distortion `dis A`: the Frobenius distance
//! from `A` to the set `SO(g, h)` of orientation-preserving isometries
//! between the two planes. With the signed singular values `(s1, s2)` of the
//! frame representation (`s2` carries the sign of `det A`) it equals
//! `sqrt((s1-1)^2 + (s2-1)^2)`, which extends the usual formula smoothly to
//! orientation-reversing maps.
//!
//! Sampling-based oracles (`distortion_bruteforce`, `so_set_hausdorff_oracle`,
//! `dist_to_so_set`) provide independent slow paths used by the self-check
//! suite; they share no code with the closed-form routines they validate.

use thiserror::Error;

use crate::scalar::{real, Real};

/// Degeneracy threshold for the closest-rotation factor: when the signed
/// singular values satisfy `s1 + s2 <= EPS_DEGENERATE` the nearest special
/// isometry is not unique.
pub const EPS_DEGENERATE: f64 = 1e-14;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LinMapError {
    /// The nearest special isometry is not unique (`s1 + s2` at or below the
    /// degeneracy threshold), or a construction needed an invertible,
    /// orientation-preserving map and did not get one.
    #[error("DegenerateMap: closest special isometry undefined or map not orientation-preserving")]
    DegenerateMap,
    /// Candidate inner-product matrix is not symmetric positive-definite.
    #[error("NotPositiveDefinite: inner product matrix must be SPD")]
    NotPositiveDefinite,
}

/// Plain 2x2 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2<T> {
    pub m: [[T; 2]; 2],
}

impl<T: Real> Mat2<T> {
    pub fn new(m00: T, m01: T, m10: T, m11: T) -> Self {
        Mat2 { m: [[m00, m01], [m10, m11]] }
    }

    pub fn identity() -> Self {
        Mat2::new(T::one(), T::zero(), T::zero(), T::one())
    }

    pub fn zero() -> Self {
        Mat2::new(T::zero(), T::zero(), T::zero(), T::zero())
    }

    pub fn diagonal(a: T, b: T) -> Self {
        Mat2::new(a, T::zero(), T::zero(), b)
    }

    /// Counterclockwise rotation by `angle`.
    pub fn rotation(angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        Mat2::new(c, -s, s, c)
    }

    /// Matrix with the given columns.
    pub fn from_cols(c0: [T; 2], c1: [T; 2]) -> Self {
        Mat2::new(c0[0], c1[0], c0[1], c1[1])
    }

    pub fn det(&self) -> T {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn trace(&self) -> T {
        self.m[0][0] + self.m[1][1]
    }

    pub fn transpose(&self) -> Self {
        Mat2::new(self.m[0][0], self.m[1][0], self.m[0][1], self.m[1][1])
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let a = &self.m;
        let b = &rhs.m;
        Mat2::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }

    pub fn add(&self, rhs: &Self) -> Self {
        Mat2::new(
            self.m[0][0] + rhs.m[0][0],
            self.m[0][1] + rhs.m[0][1],
            self.m[1][0] + rhs.m[1][0],
            self.m[1][1] + rhs.m[1][1],
        )
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        Mat2::new(
            self.m[0][0] - rhs.m[0][0],
            self.m[0][1] - rhs.m[0][1],
            self.m[1][0] - rhs.m[1][0],
            self.m[1][1] - rhs.m[1][1],
        )
    }

    pub fn scale(&self, s: T) -> Self {
        Mat2::new(self.m[0][0] * s, self.m[0][1] * s, self.m[1][0] * s, self.m[1][1] * s)
    }

    pub fn apply(&self, v: [T; 2]) -> [T; 2] {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1],
            self.m[1][0] * v[0] + self.m[1][1] * v[1],
        ]
    }

    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == T::zero() {
            return None;
        }
        Some(Mat2::new(self.m[1][1] / d, -self.m[0][1] / d, -self.m[1][0] / d, self.m[0][0] / d))
    }

    /// Entrywise (Euclidean Frobenius) norm.
    pub fn frobenius_raw(&self) -> T {
        let mut s = T::zero();
        for r in 0..2 {
            for c in 0..2 {
                s += self.m[r][c] * self.m[r][c];
            }
        }
        s.sqrt()
    }

    /// Largest Euclidean singular value.
    pub fn op_norm_raw(&self) -> T {
        let (s1, _s2, _) = signed_singular_values(self);
        s1
    }
}

/// Signed singular values of a raw 2x2 matrix: `s1 >= |s2|` and
/// `s1 * s2 = det`. Also returns the rotation angle of the closest special
/// orthogonal matrix when it is unique.
fn signed_singular_values<T: Real>(m: &Mat2<T>) -> (T, T, Option<T>) {
    let a = m.m[0][0];
    let b = m.m[0][1];
    let c = m.m[1][0];
    let d = m.m[1][1];
    // s1 + s2 and s1 - s2 fall out of the rotation/reflection split.
    let su = (a + d).hypot(c - b);
    let sd = (a - d).hypot(b + c);
    let two = real::<T>(2.0);
    let s1 = (su + sd) / two;
    let s2 = (su - sd) / two;
    let angle = if su > real::<T>(EPS_DEGENERATE) { Some((c - b).atan2(a + d)) } else { None };
    (s1, s2, angle)
}

/// Inner product on a 2-dimensional space: symmetric positive-definite form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerProduct2<T> {
    g: [[T; 2]; 2],
}

impl<T: Real> InnerProduct2<T> {
    /// Build from the entries `(g00, g01, g11)`; symmetry is structural,
    /// positive-definiteness is checked.
    pub fn new(g00: T, g01: T, g11: T) -> Result<Self, LinMapError> {
        let det = g00 * g11 - g01 * g01;
        if !(g00 > T::zero() && det > T::zero()) || !det.is_finite() {
            return Err(LinMapError::NotPositiveDefinite);
        }
        Ok(InnerProduct2 { g: [[g00, g01], [g01, g11]] })
    }

    pub fn euclidean() -> Self {
        InnerProduct2 { g: [[T::one(), T::zero()], [T::zero(), T::one()]] }
    }

    pub fn diagonal(a: T, b: T) -> Result<Self, LinMapError> {
        InnerProduct2::new(a, T::zero(), b)
    }

    pub fn entries(&self) -> [[T; 2]; 2] {
        self.g
    }

    pub fn det(&self) -> T {
        self.g[0][0] * self.g[1][1] - self.g[0][1] * self.g[0][1]
    }

    pub fn inner(&self, u: [T; 2], v: [T; 2]) -> T {
        let gu = [
            self.g[0][0] * u[0] + self.g[0][1] * u[1],
            self.g[0][1] * u[0] + self.g[1][1] * u[1],
        ];
        gu[0] * v[0] + gu[1] * v[1]
    }

    pub fn norm(&self, u: [T; 2]) -> T {
        self.inner(u, u).sqrt()
    }

    /// Symmetric positive square root.
    pub fn sqrt(&self) -> Mat2<T> {
        // For SPD M: sqrt(M) = (M + sqrt(det) I) / sqrt(tr + 2 sqrt(det)).
        let s = self.det().sqrt();
        let t = (self.g[0][0] + self.g[1][1] + real::<T>(2.0) * s).sqrt();
        Mat2::new((self.g[0][0] + s) / t, self.g[0][1] / t, self.g[0][1] / t, (self.g[1][1] + s) / t)
    }

    /// Inverse of the symmetric square root.
    pub fn inv_sqrt(&self) -> Mat2<T> {
        self.sqrt().inverse().expect("SPD square root is invertible")
    }

    /// Pullback of `h` along `l`: the form `(u, v) -> h(l u, l v)`.
    /// Fails when `l` is singular (the pullback would not be definite).
    pub fn pullback(l: &Mat2<T>, h: &InnerProduct2<T>) -> Result<Self, LinMapError> {
        let hm = Mat2 { m: h.g };
        let p = l.transpose().mul(&hm).mul(l);
        // Symmetrize against rounding before validation.
        let off = (p.m[0][1] + p.m[1][0]) / real::<T>(2.0);
        InnerProduct2::new(p.m[0][0], off, p.m[1][1]).map_err(|_| LinMapError::DegenerateMap)
    }
}

/// Signed singular data of a map, computed in metric-orthonormal frames.
///
/// `sigma.0 >= |sigma.1|`, and `sigma.1` is negative exactly when the map
/// reverses orientation. `rotation_factor` is the closest element of
/// `SO(domain, codomain)`, expressed in the original bases; it is `None`
/// when `sigma.0 + sigma.1` is at or below [`EPS_DEGENERATE`], where the
/// minimizer stops being unique.
#[derive(Debug, Clone, Copy)]
pub struct SignedSpectrum<T> {
    pub sigma: (T, T),
    pub rotation_factor: Option<Mat2<T>>,
}

/// Linear map together with the inner products of its domain and codomain.
#[derive(Debug, Clone, Copy)]
pub struct LinMap2<T> {
    pub matrix: Mat2<T>,
    pub domain: InnerProduct2<T>,
    pub codomain: InnerProduct2<T>,
}

impl<T: Real> LinMap2<T> {
    pub fn new(matrix: Mat2<T>, domain: InnerProduct2<T>, codomain: InnerProduct2<T>) -> Self {
        LinMap2 { matrix, domain, codomain }
    }

    /// Map with Euclidean inner products on both sides.
    pub fn euclidean(matrix: Mat2<T>) -> Self {
        LinMap2::new(matrix, InnerProduct2::euclidean(), InnerProduct2::euclidean())
    }

    /// Matrix of the map between orthonormal frames of the two inner
    /// products. All metric-aware norms are plain Euclidean norms of this.
    pub fn in_frames(&self) -> Mat2<T> {
        self.codomain.sqrt().mul(&self.matrix).mul(&self.domain.inv_sqrt())
    }

    /// `sqrt(s1^2 + s2^2)`: the frame-Frobenius norm.
    pub fn frobenius_norm(&self) -> T {
        self.in_frames().frobenius_raw()
    }

    /// Largest singular value of the frame representation.
    pub fn operator_norm(&self) -> T {
        self.in_frames().op_norm_raw()
    }

    /// Signed singular values plus the closest special isometry.
    pub fn signed_svd(&self) -> SignedSpectrum<T> {
        let f = self.in_frames();
        let (s1, s2, angle) = signed_singular_values(&f);
        let rotation_factor = angle.map(|a| {
            self.codomain
                .inv_sqrt()
                .mul(&Mat2::rotation(a))
                .mul(&self.domain.sqrt())
        });
        SignedSpectrum { sigma: (s1, s2), rotation_factor }
    }

    /// Closest element of `SO(domain, codomain)`; errors when non-unique.
    pub fn closest_special_isometry(&self) -> Result<Mat2<T>, LinMapError> {
        self.signed_svd().rotation_factor.ok_or(LinMapError::DegenerateMap)
    }

    /// Frobenius distance to `SO(domain, codomain)`:
    /// `sqrt((s1-1)^2 + (s2-1)^2)` with signed `s2`.
    pub fn distortion(&self) -> T {
        let f = self.in_frames();
        let (s1, s2, _) = signed_singular_values(&f);
        (s1 - T::one()).hypot(s2 - T::one())
    }

    /// Operator-norm distance to `SO(domain, codomain)`:
    /// `max(|s1-1|, |s2-1|)` with signed `s2`.
    pub fn op_dist_to_so(&self) -> T {
        let f = self.in_frames();
        let (s1, s2, _) = signed_singular_values(&f);
        (s1 - T::one()).abs().max((s2 - T::one()).abs())
    }

    /// Membership test for `SO(domain, codomain)` at tolerance `tol`:
    /// the frame representation must be orthogonal with positive determinant.
    pub fn is_special_isometry(&self, tol: T) -> bool {
        let f = self.in_frames();
        let gram = f.transpose().mul(&f);
        let dev = gram.sub(&Mat2::identity()).frobenius_raw();
        dev <= tol && f.det() > T::zero()
    }
}

/// Frobenius distance from a raw matrix `x`, seen as a map
/// `(V, norm_metric) -> (R^2, euclidean)`, to the set `SO(so_metric,
/// euclidean)` of special isometries of a possibly different domain metric.
///
/// Closed form: with `X = x . norm^{-1/2}` and `Y = so^{1/2} . norm^{-1/2}`,
/// the squared distance is `|X|^2 + |Y|^2 - 2 (s1 + s2)(X Y^T)` where the
/// signed value `s1 + s2` is the maximum of `tr(R^T X Y^T)` over rotations.
pub fn dist_to_so_set<T: Real>(
    x: &Mat2<T>,
    norm_metric: &InnerProduct2<T>,
    so_metric: &InnerProduct2<T>,
) -> T {
    let w = norm_metric.inv_sqrt();
    let xf = x.mul(&w);
    let yf = so_metric.sqrt().mul(&w);
    let z = xf.mul(&yf.transpose());
    let su = (z.m[0][0] + z.m[1][1]).hypot(z.m[1][0] - z.m[0][1]);
    let d2 = xf.frobenius_raw().powi(2) + yf.frobenius_raw().powi(2) - real::<T>(2.0) * su;
    d2.max(T::zero()).sqrt()
}

/// Brute-force Frobenius distance from `a` to `SO(domain, codomain)` by
/// minimizing over `samples` uniformly spaced rotations. Accuracy near a
/// minimum at distance `f` is about `(s1+s2) (pi/samples)^2 / (2 f)`, so the
/// oracle is only sharp for maps with a clear margin from the set.
pub fn distortion_bruteforce<T: Real>(a: &LinMap2<T>, samples: usize) -> T {
    let f = a.in_frames();
    let mut best = T::infinity();
    for i in 0..samples {
        let theta = real::<T>(2.0 * std::f64::consts::PI * i as f64 / samples as f64);
        let d = f.sub(&Mat2::rotation(theta)).frobenius_raw();
        if d < best {
            best = d;
        }
    }
    best
}

/// Brute-force operator-norm distance from `a` to `SO(domain, codomain)`.
pub fn op_dist_to_so_bruteforce<T: Real>(a: &LinMap2<T>, samples: usize) -> T {
    let f = a.in_frames();
    let mut best = T::infinity();
    for i in 0..samples {
        let theta = real::<T>(2.0 * std::f64::consts::PI * i as f64 / samples as f64);
        let d = f.sub(&Mat2::rotation(theta)).op_norm_raw();
        if d < best {
            best = d;
        }
    }
    best
}

/// Sampled Hausdorff distance (operator norm, domain metric `l.domain` as
/// the reference on the common domain) between the rotation families
/// `SO(g, euclidean)` and `SO(l* h, euclidean)`, where `g = l.domain`,
/// `h = l.codomain` and `l* h` is the pullback metric.
///
/// As `samples` grows this converges to the exact Hausdorff distance, which
/// equals `op_dist_to_so(l)`; the discrepancy is the key identity the
/// self-check suite exercises. Errors with `DegenerateMap` when `l` is not
/// invertible and orientation-preserving.
pub fn so_set_hausdorff_oracle<T: Real>(l: &LinMap2<T>, samples: usize) -> Result<T, LinMapError> {
    assert!(samples >= 360, "rotation families need at least 360 samples");
    if l.matrix.det() <= T::zero() {
        return Err(LinMapError::DegenerateMap);
    }
    let g = &l.domain;
    let pull = InnerProduct2::pullback(&l.matrix, &l.codomain)?;
    let wg = g.inv_sqrt();
    let root_g = g.sqrt();
    let root_p = pull.sqrt();

    // Family members expressed in a fixed orthonormal frame of (V, g):
    // member . g^{-1/2}. Distances below are then plain Euclidean operator
    // norms of differences.
    let mut fam_a: Vec<Mat2<T>> = Vec::with_capacity(samples);
    let mut fam_b: Vec<Mat2<T>> = Vec::with_capacity(samples);
    for i in 0..samples {
        let theta = real::<T>(2.0 * std::f64::consts::PI * i as f64 / samples as f64);
        let r = Mat2::rotation(theta);
        fam_a.push(r.mul(&root_g).mul(&wg));
        fam_b.push(r.mul(&root_p).mul(&wg));
    }

    let directed = |from: &[Mat2<T>], to: &[Mat2<T>]| -> T {
        let mut worst = T::zero();
        for q in from {
            let mut best = T::infinity();
            for p in to {
                let d = q.sub(p).op_norm_raw();
                if d < best {
                    best = d;
                }
            }
            if best > worst {
                worst = best;
            }
        }
        worst
    };

    Ok(directed(&fam_a, &fam_b).max(directed(&fam_b, &fam_a)))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn frobenius_norm_identity_is_sqrt_two() {
        let a = LinMap2::euclidean(Mat2::<f64>::identity());
        assert!(close(a.frobenius_norm(), 2.0f64.sqrt(), TOL));
    }

    #[test]
    fn frobenius_norm_diag_3_4() {
        let a = LinMap2::euclidean(Mat2::diagonal(3.0, 4.0));
        assert!(close(a.frobenius_norm(), 5.0, TOL));
    }

    #[test]
    fn frobenius_norm_respects_domain_metric() {
        // Identity map from (R^2, diag(4,1)) to Euclidean R^2 has singular
        // values (1, 1/2) in frames.
        let g = InnerProduct2::diagonal(4.0, 1.0).unwrap();
        let a = LinMap2::new(Mat2::identity(), g, InnerProduct2::euclidean());
        assert!(close(a.frobenius_norm(), 1.25f64.sqrt(), TOL));
        let sv = a.signed_svd();
        assert!(close(sv.sigma.0, 1.0, TOL));
        assert!(close(sv.sigma.1, 0.5, TOL));
    }

    #[test]
    fn signed_svd_frozen_cases() {
        let a = LinMap2::euclidean(Mat2::diagonal(2.0, 1.0));
        let sv = a.signed_svd();
        assert!(close(sv.sigma.0, 2.0, TOL) && close(sv.sigma.1, 1.0, TOL));
        let r = sv.rotation_factor.unwrap();
        assert!(r.sub(&Mat2::identity()).frobenius_raw() <= TOL);

        // Reflection: signed second value, no unique closest rotation.
        let b = LinMap2::euclidean(Mat2::diagonal(1.0, -1.0));
        let sv = b.signed_svd();
        assert!(close(sv.sigma.0, 1.0, TOL) && close(sv.sigma.1, -1.0, TOL));
        assert!(sv.rotation_factor.is_none());
        assert_eq!(b.closest_special_isometry(), Err(LinMapError::DegenerateMap));

        let rot = Mat2::rotation(0.7);
        let c = LinMap2::euclidean(rot);
        let sv = c.signed_svd();
        assert!(close(sv.sigma.0, 1.0, TOL) && close(sv.sigma.1, 1.0, TOL));
        assert!(sv.rotation_factor.unwrap().sub(&rot).frobenius_raw() <= TOL);
    }

    #[test]
    fn rotation_factor_is_special_isometry_in_curved_metrics() {
        let g = InnerProduct2::new(1.4, 0.3, 0.9).unwrap();
        let h = InnerProduct2::new(0.8, -0.2, 1.7).unwrap();
        let a = LinMap2::new(Mat2::new(1.2, 0.4, -0.3, 0.9), g, h);
        let r = a.closest_special_isometry().unwrap();
        let rmap = LinMap2::new(r, g, h);
        assert!(rmap.is_special_isometry(1e-10));
        assert!(rmap.distortion() <= 1e-10);
    }

    #[test]
    fn distortion_frozen_cases() {
        let a = LinMap2::euclidean(Mat2::diagonal(2.0, 1.0));
        assert!(close(a.distortion(), 1.0, TOL));
        let r = LinMap2::euclidean(Mat2::rotation(-1.1));
        assert!(close(r.distortion(), 0.0, TOL));
    }

    #[test]
    fn op_dist_reflection_is_two() {
        let b = LinMap2::euclidean(Mat2::diagonal(1.0, -1.0));
        assert!(close(b.op_dist_to_so(), 2.0, TOL));
    }

    #[test]
    fn norm_sandwich_on_frozen_maps() {
        for mat in [
            Mat2::diagonal(2.0, 1.0),
            Mat2::new(0.3, -1.9, 0.4, 0.8),
            Mat2::rotation(0.25),
            Mat2::diagonal(1.0, -1.0),
        ] {
            let a = LinMap2::euclidean(mat);
            let inf = a.operator_norm();
            let fro = a.frobenius_norm();
            assert!(inf <= fro + TOL && fro <= 2.0 * inf + TOL);
        }
    }

    #[test]
    fn metric_sqrt_squares_back() {
        let g = InnerProduct2::new(2.0, 0.7, 1.3).unwrap();
        let r = g.sqrt();
        let sq = r.mul(&r);
        let e = g.entries();
        assert!(close(sq.m[0][0], e[0][0], 1e-12));
        assert!(close(sq.m[0][1], e[0][1], 1e-12));
        assert!(close(sq.m[1][1], e[1][1], 1e-12));
        let w = g.inv_sqrt();
        assert!(r.mul(&w).sub(&Mat2::identity()).frobenius_raw() <= 1e-12);
    }

    #[test]
    fn rejects_indefinite_inner_product() {
        assert_eq!(
            InnerProduct2::new(1.0, 2.0, 1.0).err(),
            Some(LinMapError::NotPositiveDefinite)
        );
        assert_eq!(
            InnerProduct2::new(-1.0, 0.0, 1.0).err(),
            Some(LinMapError::NotPositiveDefinite)
        );
    }

    #[test]
    fn distortion_invariant_under_precomposed_isometry() {
        let g = InnerProduct2::new(1.1, 0.2, 0.8).unwrap();
        let h = InnerProduct2::new(0.9, -0.1, 1.4).unwrap();
        let a = LinMap2::new(Mat2::new(1.3, 0.2, -0.5, 0.7), g, h);
        let d0 = a.distortion();
        for k in 0..8 {
            let q_frames = Mat2::rotation(0.3 + 0.77 * k as f64);
            // Isometry of (V, g): conjugate a frame rotation back.
            let q = g.inv_sqrt().mul(&q_frames).mul(&g.sqrt());
            let aq = LinMap2::new(a.matrix.mul(&q), g, h);
            assert!(close(aq.distortion(), d0, 1e-12));
        }
    }

    #[test]
    fn dist_to_so_set_matches_distortion_when_metrics_agree() {
        let g = InnerProduct2::new(1.6, -0.4, 1.1).unwrap();
        let a = LinMap2::new(Mat2::new(0.9, 0.5, -0.2, 1.8), g, InnerProduct2::euclidean());
        let direct = a.distortion();
        let via_set = dist_to_so_set(&a.matrix, &g, &g);
        assert!(close(direct, via_set, 1e-12));
    }

    #[test]
    fn bruteforce_distortion_agrees_on_clear_margin_map() {
        let a = LinMap2::euclidean(Mat2::diagonal(2.0, 1.0));
        let b = distortion_bruteforce(&a, 720);
        assert!(close(b, 1.0, 1e-4));
    }

    #[test]
    fn hausdorff_oracle_rejects_orientation_reversal() {
        let l = LinMap2::euclidean(Mat2::diagonal(1.0, -1.0));
        assert_eq!(so_set_hausdorff_oracle(&l, 360).err(), Some(LinMapError::DegenerateMap));
    }

    #[test]
    fn works_in_single_precision() {
        let a = LinMap2::euclidean(Mat2::<f32>::diagonal(2.0, 1.0));
        assert!((a.distortion() - 1.0).abs() < 1e-6);
    }
}
