//! Energy minimization over planar configurations and the converging-body
//! sequence experiments built on it.
//!
//! The minimizer is gradient descent with an Armijo backtracking line
//! search; trial steps come from a Barzilai-Borwein estimate, which keeps
//! iteration counts practical without leaving the monotone line-search
//! contract. Returned configurations carry the mean-zero translation gauge.

use thiserror::Error;

use crate::body::{morphism_stats, BodyError, BodyMesh, Configuration, MorphismStats};
use crate::constructions::{
    dislocation_lattice, euclidean_triangulation, spherical_cap_phi, ConstructError, LatticeMode,
};
use crate::energy::{
    energy_value, total_energy, total_gradient, EnergyError, EnergyReport, EnergySettings,
};
use crate::rng::CounterRng;
use crate::scalar::{real, Real};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("BadOptions: {reason}")]
    BadOptions { reason: String },
    #[error("BadInput: {reason}")]
    BadInput { reason: String },
    #[error("LineSearchFailed: no admissible step after 60 halvings at iteration {iteration}")]
    LineSearchFailed { iteration: usize },
    #[error("ClosedSurface: the mesh has no boundary to lay out")]
    ClosedSurface,
    #[error("Energy: {0}")]
    Energy(#[from] EnergyError),
    #[error("Mesh: {0}")]
    Mesh(#[from] BodyError),
    #[error("Construct: {0}")]
    Construct(#[from] ConstructError),
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions<T> {
    pub max_iters: usize,
    pub grad_tol: T,
    pub armijo_c: T,
    pub backtrack: T,
    /// seed for initialization jitter
    pub seed: u64,
}

impl<T: Real> Default for SolveOptions<T> {
    fn default() -> Self {
        SolveOptions {
            max_iters: 5000,
            grad_tol: real(1e-8),
            armijo_c: real(1e-4),
            backtrack: real(0.5),
            seed: 1,
        }
    }
}

impl<T: Real> SolveOptions<T> {
    pub fn validate(&self) -> Result<(), SolveError> {
        if self.max_iters == 0 {
            return Err(SolveError::BadOptions { reason: "max_iters must be positive".into() });
        }
        if !(self.grad_tol > T::zero()) {
            return Err(SolveError::BadOptions { reason: "grad_tol must be positive".into() });
        }
        let unit = |x: T| x > T::zero() && x < T::one();
        if !unit(self.armijo_c) || !unit(self.backtrack) {
            return Err(SolveError::BadOptions {
                reason: "armijo_c and backtrack must lie in (0, 1)".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIters,
}

/// State at the start of one accepted iteration; `step` is the accepted
/// line-search step, so consecutive records verify the Armijo inequality
/// `energy[k] - energy[k+1] >= armijo_c * step * grad_norm^2`.
#[derive(Debug, Clone, Copy)]
pub struct IterationRecord<T> {
    pub energy: T,
    pub grad_norm: T,
    pub step: T,
}

#[derive(Debug, Clone)]
pub struct MinimizeResult<T> {
    pub configuration: Configuration<T>,
    pub report: EnergyReport<T>,
    pub iterations: usize,
    pub termination: Termination,
    pub trace: Vec<IterationRecord<T>>,
}

fn norm_sq<T: Real>(v: &[[T; 2]]) -> T {
    let mut s = T::zero();
    for x in v {
        s += x[0] * x[0] + x[1] * x[1];
    }
    s
}

/// Per-vertex lumped area weights: each triangle spreads its area equally
/// over its three corners.
fn vertex_weights<T: Real>(mesh: &BodyMesh<T>) -> Vec<T> {
    let third = T::one() / real::<T>(3.0);
    let mut w = vec![T::zero(); mesh.vertex_count()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let share = mesh.triangle_area(t) * third;
        for &v in tri {
            w[v] += share;
        }
    }
    w
}

/// Subtract the area-weighted centroid of the vertex images.
pub fn mean_zero<T: Real>(mesh: &BodyMesh<T>, u: &Configuration<T>) -> Configuration<T> {
    let w = vertex_weights(mesh);
    let mut cx = T::zero();
    let mut cy = T::zero();
    let mut total = T::zero();
    for (v, p) in u.positions.iter().enumerate() {
        cx += w[v] * p[0];
        cy += w[v] * p[1];
        total += w[v];
    }
    cx /= total;
    cy /= total;
    Configuration::new(u.positions.iter().map(|p| [p[0] - cx, p[1] - cy]).collect())
}

/// Gradient descent with Armijo backtracking from a Barzilai-Borwein trial
/// step. Requires `p >= 2` so the density stays differentiable on the
/// rotation set.
pub fn minimize<T: Real>(
    mesh: &BodyMesh<T>,
    u0: &Configuration<T>,
    settings: &EnergySettings<T>,
    opts: &SolveOptions<T>,
) -> Result<MinimizeResult<T>, SolveError> {
    opts.validate()?;
    settings.validate().map_err(SolveError::Energy)?;
    if settings.p < real(2.0) {
        return Err(SolveError::BadInput { reason: "minimization requires p >= 2".into() });
    }
    u0.check_against(mesh)?;
    if u0.positions.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(SolveError::BadInput { reason: "starting configuration is not finite".into() });
    }

    let mut x = u0.clone();
    let mut energy = energy_value(mesh, &x, settings);
    let mut grad = total_gradient(mesh, &x, settings)?;
    let mut trace: Vec<IterationRecord<T>> = Vec::new();
    let mut termination = Termination::MaxIters;
    // previous accepted step and gradient, for the Barzilai-Borwein estimate
    let mut prev: Option<(T, Vec<[T; 2]>)> = None;
    let scale0 = real::<T>(0.01) * mesh.total_area().sqrt();

    for k in 0..opts.max_iters {
        let gsq = norm_sq(&grad);
        let gnorm = gsq.sqrt();
        if gnorm < opts.grad_tol {
            termination = Termination::Converged;
            break;
        }

        let mut step = match &prev {
            None => (scale0 / gnorm).min(T::one()),
            Some((t_prev, g_prev)) => {
                // s = -t_prev * g_prev, y = g - g_prev: BB2 = (s.y)/(y.y)
                let mut sy = T::zero();
                let mut yy = T::zero();
                for (gv, pv) in grad.iter().zip(g_prev.iter()) {
                    let y0 = gv[0] - pv[0];
                    let y1 = gv[1] - pv[1];
                    sy += -*t_prev * (pv[0] * y0 + pv[1] * y1);
                    yy += y0 * y0 + y1 * y1;
                }
                let bb = sy / yy;
                if bb.is_finite() && bb > T::zero() {
                    bb.min(real(1e6))
                } else {
                    *t_prev
                }
            }
        };

        let mut accepted = None;
        for _ in 0..60 {
            let trial = Configuration::new(
                x.positions
                    .iter()
                    .zip(grad.iter())
                    .map(|(p, g)| [p[0] - step * g[0], p[1] - step * g[1]])
                    .collect(),
            );
            let e_trial = energy_value(mesh, &trial, settings);
            if e_trial <= energy - opts.armijo_c * step * gsq {
                accepted = Some((trial, e_trial));
                break;
            }
            step *= opts.backtrack;
        }
        let Some((x_new, e_new)) = accepted else {
            return Err(SolveError::LineSearchFailed { iteration: k });
        };

        trace.push(IterationRecord { energy, grad_norm: gnorm, step });
        let g_new = total_gradient(mesh, &x_new, settings)?;
        prev = Some((step, std::mem::replace(&mut grad, g_new)));
        x = x_new;
        energy = e_new;
    }

    let configuration = mean_zero(mesh, &x);
    let report = total_energy(mesh, &configuration, settings)?;
    Ok(MinimizeResult { iterations: trace.len(), configuration, report, termination, trace })
}

/// Tutte-style starting layout: the boundary cycle goes to a circle of
/// radius half the graph diameter with arclength-proportional spacing,
/// interior vertices relax to the average of their neighbors, and the whole
/// layout gets a small seeded jitter to break symmetry.
pub fn initial_configuration<T: Real>(
    mesh: &BodyMesh<T>,
    seed: u64,
) -> Result<Configuration<T>, SolveError> {
    let nv = mesh.vertex_count();
    let boundary: Vec<usize> = (0..nv).filter(|&v| mesh.is_boundary_vertex(v)).collect();
    if boundary.is_empty() {
        return Err(SolveError::ClosedSurface);
    }
    if boundary.len() < 3 {
        return Err(SolveError::BadInput { reason: "boundary has fewer than 3 vertices".into() });
    }

    // directed boundary edges a -> b (each lies in exactly one triangle,
    // oriented with the interior on the left) chain into the boundary cycle
    let mut next = vec![usize::MAX; nv];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for s in 0..3 {
            let (a, b) = (tri[s], tri[(s + 1) % 3]);
            if mesh.opposite_triangle(t, a, b).is_none() {
                next[a] = b;
            }
        }
    }
    let start = boundary[0];
    let mut cycle = vec![start];
    let mut cur = next[start];
    while cur != start {
        if cur == usize::MAX || cycle.len() > boundary.len() {
            return Err(SolveError::BadInput { reason: "boundary is not a single cycle".into() });
        }
        cycle.push(cur);
        cur = next[cur];
    }
    if cycle.len() != boundary.len() {
        return Err(SolveError::BadInput { reason: "boundary is not a single cycle".into() });
    }

    let radius = mesh.graph_diameter_estimate() / real::<T>(2.0);
    let mut pos = vec![[T::zero(); 2]; nv];
    let total_len: T = {
        let mut s = T::zero();
        for (i, &v) in cycle.iter().enumerate() {
            let w = cycle[(i + 1) % cycle.len()];
            s += mesh.edge_length(v, w).expect("boundary edge");
        }
        s
    };
    let two_pi = real::<T>(2.0 * std::f64::consts::PI);
    let mut cum = T::zero();
    for (i, &v) in cycle.iter().enumerate() {
        let angle = two_pi * cum / total_len;
        pos[v] = [radius * angle.cos(), radius * angle.sin()];
        let w = cycle[(i + 1) % cycle.len()];
        cum += mesh.edge_length(v, w).expect("boundary edge");
    }

    // Gauss-Seidel sweeps of uniform neighbor averaging
    let interior: Vec<usize> = (0..nv).filter(|&v| !mesh.is_boundary_vertex(v)).collect();
    let tol = real::<T>(1e-10);
    for _ in 0..400_000 {
        let mut residual = T::zero();
        for &v in &interior {
            let mut ax = T::zero();
            let mut ay = T::zero();
            let nb = mesh.neighbors(v);
            for &(w, _) in nb {
                ax += pos[w][0];
                ay += pos[w][1];
            }
            let inv = T::one() / real::<T>(nb.len() as f64);
            let np = [ax * inv, ay * inv];
            residual = residual
                .max((np[0] - pos[v][0]).abs())
                .max((np[1] - pos[v][1]).abs());
            pos[v] = np;
        }
        if residual <= tol {
            break;
        }
    }

    let mut edge_sum = T::zero();
    for l in mesh.ref_lengths() {
        edge_sum += l[0] + l[1] + l[2];
    }
    let amp = real::<T>(1e-2) * edge_sum / real::<T>((3 * mesh.triangle_count()) as f64);
    let mut rng = CounterRng::new(seed, 17);
    for p in pos.iter_mut() {
        p[0] += rng.range(-amp, amp);
        p[1] += rng.range(-amp, amp);
    }
    Ok(Configuration::new(pos))
}

/// `L^p` distance between two configurations on the same body after
/// removing the mean-zero translation and the best aligning rotation
/// (Procrustes over rotations only; the energy is not reflection
/// invariant). Vertex values are integrated with lumped area weights.
pub fn minimizer_lp_dist<T: Real>(
    mesh: &BodyMesh<T>,
    u: &Configuration<T>,
    reference: &Configuration<T>,
    p: T,
) -> Result<T, SolveError> {
    u.check_against(mesh)?;
    reference.check_against(mesh)?;
    let a = mean_zero(mesh, u);
    let b = mean_zero(mesh, reference);
    let w = vertex_weights(mesh);

    // best rotation maximizing sum w <b, R a>: polar angle of sum w b a^T
    let mut m00 = T::zero();
    let mut m01 = T::zero();
    let mut m10 = T::zero();
    let mut m11 = T::zero();
    for v in 0..w.len() {
        m00 += w[v] * b.positions[v][0] * a.positions[v][0];
        m01 += w[v] * b.positions[v][0] * a.positions[v][1];
        m10 += w[v] * b.positions[v][1] * a.positions[v][0];
        m11 += w[v] * b.positions[v][1] * a.positions[v][1];
    }
    let angle = (m10 - m01).atan2(m00 + m11);
    let (c, s) = (angle.cos(), angle.sin());

    let mut acc = T::zero();
    for v in 0..w.len() {
        let pv = a.positions[v];
        let rx = c * pv[0] - s * pv[1];
        let ry = s * pv[0] + c * pv[1];
        let diff = (rx - b.positions[v][0]).hypot(ry - b.positions[v][1]);
        acc += w[v] * diff.powf(p);
    }
    Ok(acc.powf(T::one() / p))
}

/// Families of converging body pairs `(M_n, M_limit)` on shared
/// connectivity. The spherical cap pairs each resolution with the flat
/// parameter square of the same connectivity, which serves as the
/// comparison body for morphism statistics.
#[derive(Debug, Clone, Copy)]
pub enum SequenceGenerator<T> {
    LatticeUniform { theta0: T, epsilon: T },
    LatticeMean { theta0: T, epsilon: T },
    SphericalCap,
}

impl<T: Real> SequenceGenerator<T> {
    pub fn build(&self, n: usize) -> Result<(BodyMesh<T>, BodyMesh<T>), ConstructError> {
        match *self {
            SequenceGenerator::LatticeUniform { theta0, epsilon } => {
                dislocation_lattice(n, LatticeMode::UniformRegime, theta0, epsilon)
            }
            SequenceGenerator::LatticeMean { theta0, epsilon } => {
                dislocation_lattice(n, LatticeMode::MeanRegime, theta0, epsilon)
            }
            SequenceGenerator::SphericalCap => {
                let cap = euclidean_triangulation(spherical_cap_phi::<T>, n)?;
                let flat = euclidean_triangulation(|_: T, _: T| T::zero(), n)?;
                Ok((cap, flat))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SequenceRow<T> {
    pub n: usize,
    pub min_energy: T,
    pub grad_norm: T,
    pub stats: MorphismStats<T>,
    pub minimizer_lp_dist: T,
    /// minimum energy of the paired limit body (not part of the CSV row)
    pub limit_min_energy: T,
}

#[derive(Debug, Clone)]
pub struct SequenceResult<T> {
    pub rows: Vec<SequenceRow<T>>,
}

/// Run the convergence experiment over `n_list`: for each level, build the
/// pair, minimize on both bodies, and record energies, morphism statistics
/// against the limit body, and the aligned distance between minimizers.
/// Warm starts reuse the previous minimizer when connectivity matches;
/// `cold_start` forces a fresh layout per level.
pub fn gamma_experiment<T: Real>(
    generator: &SequenceGenerator<T>,
    n_list: &[usize],
    settings: &EnergySettings<T>,
    opts: &SolveOptions<T>,
    cold_start: bool,
) -> Result<SequenceResult<T>, SolveError> {
    if n_list.is_empty() {
        return Err(SolveError::BadInput { reason: "n_list is empty".into() });
    }
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SolveError::BadInput { reason: "n_list must be strictly increasing".into() });
    }
    let mut rows = Vec::with_capacity(n_list.len());
    let mut prev: Option<(BodyMesh<T>, Configuration<T>)> = None;
    for &n in n_list {
        let (m_n, m_limit) = generator.build(n)?;
        let u0 = match &prev {
            Some((prev_mesh, prev_min)) if !cold_start && prev_mesh.has_same_connectivity(&m_n) => {
                prev_min.clone()
            }
            _ => initial_configuration(&m_n, opts.seed)?,
        };
        let res_n = minimize(&m_n, &u0, settings, opts)?;
        let u0_limit = initial_configuration(&m_limit, opts.seed)?;
        let res_limit = minimize(&m_limit, &u0_limit, settings, opts)?;
        let stats = morphism_stats(&m_limit, &m_n)?;
        let lp = minimizer_lp_dist(
            &m_limit,
            &res_n.configuration,
            &res_limit.configuration,
            settings.p,
        )?;
        rows.push(SequenceRow {
            n,
            min_energy: res_n.report.total,
            grad_norm: res_n.report.grad_norm,
            stats,
            minimizer_lp_dist: lp,
            limit_min_energy: res_limit.report.total,
        });
        prev = Some((m_n, res_n.configuration));
    }
    Ok(SequenceResult { rows })
}
