//! Distance-to-rotation elastic energy `W(A) = Dis(A)^p`, its analytic
//! gradient, and the mesh functional `E[u] = sum_T area(T) W(dF_T)`.
//!
//! The density is differentiable away from the rotation set for every
//! `p > 1` and globally C1 for `p >= 2`; the gradient convention at
//! `Dis <= dis_floor` is 0 in that range, while `p < 2` is rejected there.
//! All totals and assemblies sum in triangle index order, so results are
//! bit-stable across thread counts.

use rayon::prelude::*;
use thiserror::Error;

use crate::body::{deformation_gradient, flatten_triangle, BodyError, BodyMesh, Configuration};
use crate::linmap::{InnerProduct2, LinMap2, LinMapError, Mat2};
use crate::rng::CounterRng;
use crate::scalar::{real, Real};

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error("BadSettings: {reason}")]
    BadSettings { reason: String },
    #[error("NonDifferentiable: density with p < 2 has no gradient on the rotation set")]
    NonDifferentiable,
    #[error("DegenerateMap: closest rotation is not unique")]
    DegenerateMap,
    #[error("Mesh: {0}")]
    Mesh(#[from] BodyError),
}

impl From<LinMapError> for EnergyError {
    fn from(e: LinMapError) -> Self {
        match e {
            LinMapError::DegenerateMap => EnergyError::DegenerateMap,
            LinMapError::NotPositiveDefinite => {
                EnergyError::BadSettings { reason: "inner product not positive definite".into() }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EnergySettings<T> {
    /// growth exponent, p > 1
    pub p: T,
    /// gradient regularization threshold near the rotation set
    pub dis_floor: T,
}

impl<T: Real> Default for EnergySettings<T> {
    fn default() -> Self {
        EnergySettings { p: real(2.0), dis_floor: real(1e-12) }
    }
}

impl<T: Real> EnergySettings<T> {
    pub fn validate(&self) -> Result<(), EnergyError> {
        if !(self.p > T::one()) || !self.p.is_finite() {
            return Err(EnergyError::BadSettings { reason: "p must lie in (1, inf)".into() });
        }
        if !(self.dis_floor >= T::zero()) {
            return Err(EnergyError::BadSettings { reason: "dis_floor must be >= 0".into() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EnergyReport<T> {
    pub total: T,
    pub per_triangle: Vec<T>,
    pub grad_norm: T,
}

/// `Dis(A)^p`.
pub fn density<T: Real>(a: &LinMap2<T>, settings: &EnergySettings<T>) -> T {
    a.distortion().powf(settings.p)
}

/// Derivative of [`density`] with respect to the entries of the matrix of
/// `A`: `p Dis^{p-2} h (A - R) g^{-1}` with `R` the closest special
/// isometry and `g`, `h` the frame inner products; for Euclidean frames
/// this is `p Dis^{p-2} (A - R)`. Returns the zero map when
/// `Dis <= dis_floor` and `p >= 2`.
pub fn density_gradient<T: Real>(
    a: &LinMap2<T>,
    settings: &EnergySettings<T>,
) -> Result<LinMap2<T>, EnergyError> {
    let two = real::<T>(2.0);
    let dis = a.distortion();
    if dis <= settings.dis_floor {
        if settings.p >= two {
            return Ok(LinMap2::new(Mat2::zero(), a.domain, a.codomain));
        }
        return Err(EnergyError::NonDifferentiable);
    }
    let r = a.closest_special_isometry()?;
    let scale = settings.p * dis.powf(settings.p - two);
    let h = mat_of(&a.codomain);
    let g_inv = mat_of(&a.domain).inverse().expect("positive definite");
    let grad = h.mul(&a.matrix.sub(&r)).mul(&g_inv).scale(scale);
    Ok(LinMap2::new(grad, a.domain, a.codomain))
}

fn mat_of<T: Real>(ip: &InnerProduct2<T>) -> Mat2<T> {
    let e = ip.entries();
    Mat2::new(e[0][0], e[0][1], e[1][0], e[1][1])
}

/// Per-triangle flattened reference edges and their inverse, shared by the
/// energy and gradient assembly.
fn reference_frame<T: Real>(mesh: &BodyMesh<T>, t: usize) -> (Mat2<T>, T) {
    let q = flatten_triangle(&mesh.ref_lengths()[t]).expect("validated mesh");
    let d_ref = Mat2::from_cols(
        [q[1][0] - q[0][0], q[1][1] - q[0][1]],
        [q[2][0] - q[0][0], q[2][1] - q[0][1]],
    );
    (d_ref, mesh.triangle_area(t))
}

/// Total elastic energy with per-triangle breakdown and the norm of the
/// assembled configuration gradient.
pub fn total_energy<T: Real>(
    mesh: &BodyMesh<T>,
    u: &Configuration<T>,
    settings: &EnergySettings<T>,
) -> Result<EnergyReport<T>, EnergyError> {
    settings.validate()?;
    u.check_against(mesh)?;
    let per_triangle: Vec<T> = (0..mesh.triangle_count())
        .into_par_iter()
        .with_min_len(512)
        .map(|t| {
            let df = deformation_gradient(mesh, u, t);
            mesh.triangle_area(t) * density(&df, settings)
        })
        .collect();
    let mut total = T::zero();
    for &e in &per_triangle {
        total += e;
    }
    let grad = total_gradient(mesh, u, settings)?;
    let mut sq = T::zero();
    for f in &grad {
        sq += f[0] * f[0] + f[1] * f[1];
    }
    Ok(EnergyReport { total, per_triangle, grad_norm: sq.sqrt() })
}

/// Total energy without the per-triangle breakdown or gradient; the line
/// search calls this once per trial step, so inputs are assumed validated.
pub(crate) fn energy_value<T: Real>(
    mesh: &BodyMesh<T>,
    u: &Configuration<T>,
    settings: &EnergySettings<T>,
) -> T {
    let per: Vec<T> = (0..mesh.triangle_count())
        .into_par_iter()
        .with_min_len(512)
        .map(|t| {
            let df = deformation_gradient(mesh, u, t);
            mesh.triangle_area(t) * density(&df, settings)
        })
        .collect();
    let mut total = T::zero();
    for &e in &per {
        total += e;
    }
    total
}

/// Gradient of the total energy with respect to the vertex positions,
/// assembled in triangle index order.
pub fn total_gradient<T: Real>(
    mesh: &BodyMesh<T>,
    u: &Configuration<T>,
    settings: &EnergySettings<T>,
) -> Result<Vec<[T; 2]>, EnergyError> {
    settings.validate()?;
    u.check_against(mesh)?;
    let corner_forces: Vec<Result<[[T; 2]; 3], EnergyError>> = (0..mesh.triangle_count())
        .into_par_iter()
        .with_min_len(512)
        .map(|t| {
            let df = deformation_gradient(mesh, u, t);
            let g = density_gradient(&df, settings)?;
            let (d_ref, area) = reference_frame(mesh, t);
            // E_t = area * W(D_img D_ref^{-1}): dE_t/dD_img = area * G * D_ref^{-T}
            let d_inv_t = d_ref.inverse().expect("validated mesh").transpose();
            let m = g.matrix.mul(&d_inv_t).scale(area);
            let f1 = [m.m[0][0], m.m[1][0]];
            let f2 = [m.m[0][1], m.m[1][1]];
            let f0 = [-f1[0] - f2[0], -f1[1] - f2[1]];
            Ok([f0, f1, f2])
        })
        .collect();
    let mut out = vec![[T::zero(); 2]; mesh.vertex_count()];
    for (t, forces) in corner_forces.into_iter().enumerate() {
        let forces = forces?;
        let tri = mesh.triangles()[t];
        for c in 0..3 {
            out[tri[c]][0] += forces[c][0];
            out[tri[c]][1] += forces[c][1];
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct PRegularityReport<T> {
    pub coercivity_ok: bool,
    pub boundedness_ok: bool,
    pub metric_lipschitz_ok: bool,
    /// tightest observed `W - (alpha |A|^p - beta)`
    pub coercivity_margin: T,
    /// tightest observed `gamma (|A|^p + 1) - W`
    pub boundedness_margin: T,
    /// tightest observed `(|A|_2 + 4) Dis L - |W(AL)^{1/p} - W(A)^{1/p}|`
    pub metric_lipschitz_margin: T,
    pub samples: usize,
}

fn random_spd<T: Real>(rng: &mut CounterRng) -> InnerProduct2<T> {
    let phi: T = rng.range(T::zero(), real(std::f64::consts::PI));
    let l1: T = rng.range(real(0.45), real(2.3));
    let l2: T = rng.range(real(0.45), real(2.3));
    let (c, s) = (phi.cos(), phi.sin());
    let g00 = c * c * l1 + s * s * l2;
    let g01 = c * s * (l1 - l2);
    let g11 = s * s * l1 + c * c * l2;
    InnerProduct2::new(g00, g01, g11).expect("positive eigenvalues")
}

fn random_matrix<T: Real>(rng: &mut CounterRng, kind: u64) -> Mat2<T> {
    let span = |rng: &mut CounterRng, lo: f64, hi: f64| rng.range(real::<T>(lo), real::<T>(hi));
    match kind % 4 {
        // near the rotation set
        0 => {
            let r = Mat2::rotation(span(rng, -3.0, 3.0));
            let eps = span(rng, 0.0, 0.05);
            let n = Mat2::new(
                span(rng, -1.0, 1.0),
                span(rng, -1.0, 1.0),
                span(rng, -1.0, 1.0),
                span(rng, -1.0, 1.0),
            );
            r.add(&n.scale(eps))
        }
        // large dilations probe the coercivity asymptote
        1 => {
            let t = span(rng, 2.0, 40.0);
            Mat2::rotation(span(rng, -3.0, 3.0)).scale(t)
        }
        _ => Mat2::new(
            span(rng, -2.5, 2.5),
            span(rng, -2.5, 2.5),
            span(rng, -2.5, 2.5),
            span(rng, -2.5, 2.5),
        ),
    }
}

/// Check the three p-regularity conditions on seeded random frames and maps
/// and report the tightest margin seen for each. The constants are chosen
/// analytically, so a negative margin indicates a real bug rather than an
/// unlucky sample.
pub fn p_regularity_check<T: Real>(
    samples: usize,
    settings: &EnergySettings<T>,
) -> Result<PRegularityReport<T>, EnergyError> {
    settings.validate()?;
    let p = settings.p;
    let alpha = real::<T>(2.0).powf(T::one() - p);
    let beta = real::<T>(2.0).powf(p / real(2.0));
    let gamma = real::<T>(2.0).powf(p);
    let four = real::<T>(4.0);

    let mut rng = CounterRng::new(0x9c2e_11d7, 5);
    let mut co_margin = T::infinity();
    let mut bo_margin = T::infinity();
    let mut li_margin = T::infinity();
    for i in 0..samples {
        let g = random_spd(&mut rng);
        let h = random_spd(&mut rng);
        let g_pre = random_spd(&mut rng);
        let a = LinMap2::new(random_matrix(&mut rng, i as u64), g, h);
        let l = LinMap2::new(random_matrix(&mut rng, (i as u64) >> 1), g_pre, g);

        let w = density(&a, settings);
        let norm = a.frobenius_norm();
        co_margin = co_margin.min(w - (alpha * norm.powf(p) - beta));
        bo_margin = bo_margin.min(gamma * (norm.powf(p) + T::one()) - w);

        let al = LinMap2::new(a.matrix.mul(&l.matrix), g_pre, h);
        let lhs = (density(&al, settings).powf(T::one() / p)
            - w.powf(T::one() / p))
        .abs();
        let rhs = (a.operator_norm() + four) * l.distortion();
        li_margin = li_margin.min(rhs - lhs);
    }
    Ok(PRegularityReport {
        coercivity_ok: co_margin >= T::zero(),
        boundedness_ok: bo_margin >= T::zero(),
        metric_lipschitz_ok: li_margin >= T::zero(),
        coercivity_margin: co_margin,
        boundedness_margin: bo_margin,
        metric_lipschitz_margin: li_margin,
        samples,
    })
}
