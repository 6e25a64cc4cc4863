//! Generators for the body families used in the experiments.
//!
//! All meshes here are locally flat away from isolated cone vertices, so
//! every construction reduces to choosing charts (planar polygon pieces) and
//! gluing them along boundary chains with matching segment lengths. Shared
//! edges are routed through a first-wins length table during assembly, which
//! makes the bit-equality invariant of [`BodyMesh`] hold by construction.
//!
//! The dislocation block realizes an edge dislocation as a disclination
//! dipole: two half-blocks glued along a chain that is straight except for
//! two bends of angle `theta`, giving cone angles `2 pi + 2 theta` and
//! `2 pi - 2 theta` at the bend vertices and a translational holonomy of
//! magnitude `2 d sin(theta)` around the pair.

use std::collections::HashMap;

use thiserror::Error;

use crate::body::{flatten_triangle, BodyError, BodyMesh};
use crate::scalar::{real, Real};

#[derive(Debug, Error)]
pub enum ConstructError {
    #[error("BadParams: {reason}")]
    BadParams { reason: String },
    #[error("NotAStrip: triangles at loop positions {position} and {position_next} share no edge")]
    NotAStrip { position: usize, position_next: usize },
    #[error("NotClosed: the final triangle does not share an edge with the first")]
    NotClosed,
    #[error("BoundaryVertex: vertex {vertex} is on the boundary, no closed fan exists")]
    BoundaryVertex { vertex: usize },
    #[error("Mesh: {0}")]
    Mesh(#[from] BodyError),
}

fn bad<T>(reason: impl Into<String>) -> Result<T, ConstructError> {
    Err(ConstructError::BadParams { reason: reason.into() })
}

/// Accumulates triangles whose edge lengths come from chart positions, with
/// a first-wins table so an edge shared by two charts keeps the length
/// computed by whichever triangle touched it first.
struct MeshAssembler<T> {
    triangles: Vec<[usize; 3]>,
    lengths: Vec<[T; 3]>,
    canon: HashMap<(usize, usize), T>,
}

impl<T: Real> MeshAssembler<T> {
    fn new() -> Self {
        MeshAssembler { triangles: Vec::new(), lengths: Vec::new(), canon: HashMap::new() }
    }

    fn edge_len(&mut self, a: usize, b: usize, pa: [T; 2], pb: [T; 2]) -> T {
        let key = if a < b { (a, b) } else { (b, a) };
        *self
            .canon
            .entry(key)
            .or_insert_with(|| ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt())
    }

    fn push_triangle(&mut self, ids: [usize; 3], pos: [[T; 2]; 3]) {
        let l01 = self.edge_len(ids[0], ids[1], pos[0], pos[1]);
        let l12 = self.edge_len(ids[1], ids[2], pos[1], pos[2]);
        let l20 = self.edge_len(ids[2], ids[0], pos[2], pos[0]);
        self.triangles.push(ids);
        self.lengths.push([l01, l12, l20]);
    }

    fn push_triangle_lengths(&mut self, ids: [usize; 3], lens: [T; 3]) {
        let canon = |asm: &mut Self, a: usize, b: usize, l: T| -> T {
            let key = if a < b { (a, b) } else { (b, a) };
            *asm.canon.entry(key).or_insert(l)
        };
        let l01 = canon(self, ids[0], ids[1], lens[0]);
        let l12 = canon(self, ids[1], ids[2], lens[1]);
        let l20 = canon(self, ids[2], ids[0], lens[2]);
        self.triangles.push(ids);
        self.lengths.push([l01, l12, l20]);
    }

    fn finish(self, vertex_count: usize) -> Result<BodyMesh<T>, ConstructError> {
        Ok(BodyMesh::new(vertex_count, self.triangles, self.lengths)?)
    }
}

/// Regular `n x n` grid on a square of the given side, each cell split by
/// its lower-left to upper-right diagonal.
pub fn flat_square<T: Real>(n: usize, side: T) -> Result<BodyMesh<T>, ConstructError> {
    if n < 1 {
        return bad("flat_square needs n >= 1");
    }
    if !(side > T::zero()) || !side.is_finite() {
        return bad("flat_square needs a positive finite side");
    }
    let nv = (n + 1) * (n + 1);
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let coord = |i: usize| side * real::<T>(i as f64) / real::<T>(n as f64);
    let mut asm = MeshAssembler::new();
    for j in 0..n {
        for i in 0..n {
            let p = |ii: usize, jj: usize| [coord(ii), coord(jj)];
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            asm.push_triangle([a, b, c], [p(i, j), p(i + 1, j), p(i + 1, j + 1)]);
            asm.push_triangle([a, c, d], [p(i, j), p(i + 1, j + 1), p(i, j + 1)]);
        }
    }
    asm.finish(nv)
}

/// Largest deviation of an interior cone angle from `2 pi`.
pub fn max_interior_defect<T: Real>(mesh: &BodyMesh<T>) -> T {
    let two_pi = real::<T>(2.0 * std::f64::consts::PI);
    let mut worst = T::zero();
    for v in 0..mesh.vertex_count() {
        if !mesh.is_boundary_vertex(v) {
            let defect = (two_pi - mesh.cone_angle(v).expect("interior vertex")).abs();
            worst = worst.max(defect);
        }
    }
    worst
}

fn cone_like<T: Real>(alpha: T, r_max: T, resolution: usize) -> Result<BodyMesh<T>, ConstructError> {
    if resolution < 8 {
        return bad("cone mesh needs resolution >= 8");
    }
    if !(alpha > T::zero()) || !r_max.is_finite() || !(r_max > T::zero()) {
        return bad("cone mesh needs alpha > 0 and r_max > 0");
    }
    let sectors = resolution;
    let rings = resolution;
    let dr = r_max / real::<T>(rings as f64);
    let dtheta = real::<T>(2.0 * std::f64::consts::PI / sectors as f64);
    let wedge = alpha * dtheta;
    if !(wedge < real::<T>(2.0)) {
        return bad("cone mesh needs alpha * dtheta < 2; raise the resolution");
    }

    // vertex 0 = tip; ring r in 1..=rings has `sectors` vertices
    let id = |r: usize, s: usize| 1 + (r - 1) * sectors + (s % sectors);
    let nv = 1 + rings * sectors;
    let radius = |r: usize| dr * real::<T>(r as f64);
    // azimuthal edges carry the arc length of the cone metric at their ring
    let arc = |r: usize| alpha * radius(r) * dtheta;
    // chord between radii in the developed wedge of angle alpha * dtheta
    let diag = |r: usize| {
        let (a, b) = (radius(r), radius(r + 1));
        (a * a + b * b - real::<T>(2.0) * a * b * wedge.cos()).max(T::zero()).sqrt()
    };

    let mut asm = MeshAssembler::new();
    for s in 0..sectors {
        asm.push_triangle_lengths([0, id(1, s), id(1, s + 1)], [dr, arc(1), dr]);
    }
    for r in 1..rings {
        for s in 0..sectors {
            let (a, b) = (id(r, s), id(r + 1, s));
            let (c, d) = (id(r + 1, s + 1), id(r, s + 1));
            asm.push_triangle_lengths([a, b, c], [dr, arc(r + 1), diag(r)]);
            asm.push_triangle_lengths([a, c, d], [diag(r), dr, arc(r)]);
        }
    }
    asm.finish(nv)
}

/// Triangulated disc carrying the flat cone metric of total tip angle
/// `2 pi alpha`: radial edges `dr`, azimuthal edges `alpha * r * dtheta`,
/// diagonals from the developed wedge.
pub fn cone_mesh<T: Real>(alpha: T, r_max: T, resolution: usize) -> Result<BodyMesh<T>, ConstructError> {
    if (alpha - T::one()).abs() <= real::<T>(1e-12) {
        return bad("cone mesh needs alpha != 1; use flat_disc for the flat control");
    }
    cone_like(alpha, r_max, resolution)
}

/// The `alpha = 1` disc with the same connectivity as [`cone_mesh`].
pub fn flat_disc<T: Real>(r_max: T, resolution: usize) -> Result<BodyMesh<T>, ConstructError> {
    cone_like(T::one(), r_max, resolution)
}

/// Parameters of one edge-dislocation block.
///
/// `theta` is the disclination half-angle, `d` the separation of the two
/// cone points, `block_size` the side of the square block. The Burgers
/// magnitude of the block is `2 d sin(theta)`.
#[derive(Debug, Clone, Copy)]
pub struct DislocationParams<T> {
    pub theta: T,
    pub d: T,
    pub block_size: T,
}

impl<T: Real> DislocationParams<T> {
    pub fn validate(&self) -> Result<(), ConstructError> {
        let DislocationParams { theta, d, block_size: s } = *self;
        if !theta.is_finite() || !(theta > T::zero()) || !(theta < real::<T>(std::f64::consts::FRAC_PI_2)) {
            return bad("theta must lie in (0, pi/2)");
        }
        if !d.is_finite() || !(d > T::zero()) || !s.is_finite() || !(s > T::zero()) {
            return bad("d and block_size must be positive and finite");
        }
        if !(real::<T>(2.0) * d * theta.sin() < s) {
            return bad("need 2 d sin(theta) < block_size");
        }
        // the cut spans d cos(theta) horizontally and must fit inside the block
        if !(d * theta.cos() < s) {
            return bad("need d cos(theta) < block_size");
        }
        if d * theta.cos() <= T::epsilon() * s {
            return bad("cut separation is below float resolution");
        }
        Ok(())
    }

    pub fn burgers(&self) -> T {
        real::<T>(2.0) * self.d * self.theta.sin()
    }
}

/// Chart geometry of one block: two half-charts glued along the bent chain.
struct BlockGeom<T> {
    xs: Vec<T>,
    c1: usize,
    c2: usize,
    r: usize,
    s: T,
    eta: T,
    flip: bool,
}

impl<T: Real> BlockGeom<T> {
    fn new(params: &DislocationParams<T>, refinement: usize, flip: bool) -> Result<Self, ConstructError> {
        params.validate()?;
        if refinement < 1 {
            return bad("refinement must be >= 1");
        }
        let s = params.block_size;
        let m = 2 * refinement;
        let cut = params.d * params.theta.cos();
        let x1 = (s - cut) / real::<T>(2.0);
        let x2 = x1 + cut;
        let mut xs: Vec<T> = (0..=m)
            .map(|i| s * real::<T>(i as f64) / real::<T>(m as f64))
            .collect();
        xs.push(x1);
        xs.push(x2);
        xs.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
        xs.dedup();
        let c1 = xs.iter().position(|&x| x == x1).expect("x1 present");
        let c2 = xs.iter().position(|&x| x == x2).expect("x2 present");
        if c1 == 0 || c2 + 1 >= xs.len() {
            return bad("cut endpoints must be interior to the block");
        }
        Ok(BlockGeom { xs, c1, c2, r: refinement, s, eta: params.burgers() / real::<T>(2.0), flip })
    }

    fn columns(&self) -> usize {
        self.xs.len()
    }

    fn levels(&self) -> usize {
        2 * self.r + 1
    }

    /// Piecewise-linear profile of the chain over the column coordinate:
    /// 0 on one flat side, 1 on the other, linear across the cut.
    fn ramp(&self, c: usize) -> T {
        let x = self.xs[c];
        let t = if c <= self.c1 {
            T::zero()
        } else if c >= self.c2 {
            T::one()
        } else {
            (x - self.xs[self.c1]) / (self.xs[self.c2] - self.xs[self.c1])
        };
        if self.flip {
            T::one() - t
        } else {
            t
        }
    }

    fn chain_low(&self, c: usize) -> T {
        self.s / real::<T>(2.0) + self.eta * self.ramp(c)
    }

    fn chain_up(&self, c: usize) -> T {
        self.s / real::<T>(2.0) - self.eta * self.ramp(c)
    }

    /// Chart position of grid point (column c, level l); levels 0..=r live in
    /// the lower chart, r..=2r in the upper chart. Level r is the chain and
    /// has a position in both charts.
    fn pos(&self, c: usize, l: usize, upper: bool) -> [T; 2] {
        let x = self.xs[c];
        let rr = real::<T>(self.r as f64);
        if !upper {
            debug_assert!(l <= self.r);
            [x, self.chain_low(c) * real::<T>(l as f64) / rr]
        } else {
            debug_assert!(l >= self.r);
            let base = self.chain_up(c);
            [x, base + (self.s - base) * real::<T>((l - self.r) as f64) / rr]
        }
    }

    /// Emit all block triangles through `ids` (grid point -> global vertex).
    /// Cells are walked column-major bottom-up; each cell emits the
    /// bottom-right triangle then the top-left one.
    fn emit(&self, ids: &dyn Fn(usize, usize) -> usize, asm: &mut MeshAssembler<T>) {
        for c in 0..self.columns() - 1 {
            for l in 0..self.levels() - 1 {
                let upper = l >= self.r;
                let p = |cc: usize, ll: usize| self.pos(cc, ll, upper);
                let (a, b) = (ids(c, l), ids(c + 1, l));
                let (bb, aa) = (ids(c + 1, l + 1), ids(c, l + 1));
                asm.push_triangle([a, b, bb], [p(c, l), p(c + 1, l), p(c + 1, l + 1)]);
                asm.push_triangle([a, bb, aa], [p(c, l), p(c + 1, l + 1), p(c, l + 1)]);
            }
        }
    }

    /// Triangle index within this block's emission order; `second` selects
    /// the top-left triangle of the cell.
    fn tri_index(&self, c: usize, l: usize, second: bool) -> usize {
        2 * (c * (self.levels() - 1) + l) + second as usize
    }
}

/// One edge-dislocation block plus the landmarks tests and the CLI need.
#[derive(Debug, Clone)]
pub struct DislocationBlock<T> {
    pub mesh: BodyMesh<T>,
    /// cone vertex with angle `2 pi + 2 theta`
    pub p_minus: usize,
    /// cone vertex with angle `2 pi - 2 theta`
    pub p_plus: usize,
    /// closed triangle strip winding once around both cone points
    pub dipole_loop: Vec<usize>,
}

/// Build one block. The mesh is a `(2 refinement + 3)`-column by
/// `(2 refinement + 1)`-level grid; the chain sits at the middle level with
/// its two bend vertices interior to the block.
pub fn dislocation_block<T: Real>(
    params: &DislocationParams<T>,
    refinement: usize,
) -> Result<DislocationBlock<T>, ConstructError> {
    let geom = BlockGeom::new(params, refinement, false)?;
    let cols = geom.columns();
    let ids = move |c: usize, l: usize| l * cols + c;
    let mut asm = MeshAssembler::new();
    geom.emit(&ids, &mut asm);
    let mesh = asm.finish(cols * geom.levels())?;
    let p_minus = ids(geom.c1, geom.r);
    let p_plus = ids(geom.c2, geom.r);
    let dipole_loop = dipole_loop_indices(&geom, |c, l, second| geom.tri_index(c, l, second));
    Ok(DislocationBlock { mesh, p_minus, p_plus, dipole_loop })
}

/// Strip around both cone points: along the cells just below the chain from
/// one flat stretch to the other, across the chain right of the cut, back
/// along the cells just above, across again left of the cut.
fn dipole_loop_indices<T: Real>(
    geom: &BlockGeom<T>,
    tri: impl Fn(usize, usize, bool) -> usize,
) -> Vec<usize> {
    let (cl, cr) = (geom.c1 - 1, geom.c2 + 1);
    let r = geom.r;
    let mut out = Vec::new();
    for c in cl..cr {
        out.push(tri(c, r - 1, true));
        if c + 1 < cr {
            out.push(tri(c, r - 1, false));
        }
    }
    for c in (cl..cr).rev() {
        out.push(tri(c, r, false));
        if c > cl {
            out.push(tri(c, r, true));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticeMode {
    MeanRegime,
    UniformRegime,
}

/// Per-block angle and separation for lattice level `n`. Both regimes keep
/// the per-block Burgers magnitude at `b0 / n^2` with `b0 = 2 sin(theta0)`,
/// so the total dislocation content is constant in `n`; they differ in how
/// the disclination angle scales.
pub fn lattice_schedule<T: Real>(
    n: usize,
    mode: LatticeMode,
    theta0: T,
    epsilon: T,
) -> Result<DislocationParams<T>, ConstructError> {
    if n < 1 {
        return bad("lattice needs n >= 1");
    }
    if !(theta0 > T::zero()) || !(theta0 <= real::<T>(std::f64::consts::FRAC_PI_4)) {
        return bad("theta0 must lie in (0, pi/4]");
    }
    if !(epsilon > T::zero()) || !(epsilon < T::one()) {
        return bad("epsilon must lie in (0, 1)");
    }
    let nf = real::<T>(n as f64);
    let b0 = real::<T>(2.0) * theta0.sin();
    let bn = b0 / (nf * nf);
    let theta_n = match mode {
        LatticeMode::MeanRegime => theta0,
        LatticeMode::UniformRegime => theta0 * nf.powf(-epsilon),
    };
    let d_n = bn / (real::<T>(2.0) * theta_n.sin());
    let params = DislocationParams { theta: theta_n, d: d_n, block_size: T::one() / nf };
    params.validate()?;
    Ok(params)
}

/// Unit square tiled with `n x n` dislocation blocks, returned together
/// with the flat limit body on the same connectivity.
///
/// Ramp orientation alternates with the block column so the taller block
/// sides always face each other and every interface matches; the cut is
/// centered, so all blocks share one column layout.
pub fn dislocation_lattice<T: Real>(
    n: usize,
    mode: LatticeMode,
    theta0: T,
    epsilon: T,
) -> Result<(BodyMesh<T>, BodyMesh<T>), ConstructError> {
    let params = lattice_schedule(n, mode, theta0, epsilon)?;
    let refinement = 1usize;
    let with_eta = |zero_eta: bool| -> Result<BodyMesh<T>, ConstructError> {
        let mut asm = MeshAssembler::new();
        let mut geom0 = BlockGeom::new(&params, refinement, false)?;
        if zero_eta {
            geom0.eta = T::zero();
        }
        let cols = geom0.columns();
        let levels = geom0.levels();
        // global grid: blocks share boundary columns and levels
        let gcols = n * (cols - 1) + 1;
        let nv = gcols * (n * (levels - 1) + 1);
        for bj in 0..n {
            for bi in 0..n {
                let mut geom = BlockGeom::new(&params, refinement, bi % 2 == 1)?;
                if zero_eta {
                    geom.eta = T::zero();
                }
                let ids = |c: usize, l: usize| {
                    (bj * (levels - 1) + l) * gcols + bi * (cols - 1) + c
                };
                geom.emit(&ids, &mut asm);
            }
        }
        asm.finish(nv)
    };
    let m_n = with_eta(false)?;
    let m_limit = with_eta(true)?;
    debug_assert!(m_n.has_same_connectivity(&m_limit));
    Ok((m_n, m_limit))
}

/// Grid body whose edge lengths are the g-lengths of the straight parameter
/// segments for the conformal metric `g = e^{2 phi} (dx^2 + dy^2)` on the
/// unit square. Composite Simpson with 16 panels plus one Richardson step.
pub fn euclidean_triangulation<T, F>(phi: F, n: usize) -> Result<BodyMesh<T>, ConstructError>
where
    T: Real,
    F: Fn(T, T) -> T,
{
    if n < 2 {
        return bad("euclidean_triangulation needs n >= 2");
    }
    let nf = real::<T>(n as f64);
    let coord = |i: usize| real::<T>(i as f64) / nf;
    let seg_len = |p: [T; 2], q: [T; 2]| -> T {
        let mut f = [T::zero(); 17];
        for (k, fk) in f.iter_mut().enumerate() {
            let t = real::<T>(k as f64 / 16.0);
            let x = p[0] + (q[0] - p[0]) * t;
            let y = p[1] + (q[1] - p[1]) * t;
            *fk = phi(x, y).exp();
        }
        let simpson = |stride: usize| -> T {
            let h = real::<T>(stride as f64 / 16.0);
            let mut odd = T::zero();
            let mut even = T::zero();
            let mut k = stride;
            let mut is_odd = true;
            while k < 16 {
                if is_odd {
                    odd += f[k];
                } else {
                    even += f[k];
                }
                k += stride;
                is_odd = !is_odd;
            }
            h / real::<T>(3.0) * (f[0] + real::<T>(4.0) * odd + real::<T>(2.0) * even + f[16])
        };
        let s16 = simpson(1);
        let s8 = simpson(2);
        let integral = s16 + (s16 - s8) / real::<T>(15.0);
        let dist = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
        integral * dist
    };

    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut asm = MeshAssembler::new();
    for j in 0..n {
        for i in 0..n {
            let p = |ii: usize, jj: usize| [coord(ii), coord(jj)];
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            let corners = [p(i, j), p(i + 1, j), p(i + 1, j + 1), p(i, j + 1)];
            let l_ab = seg_len(corners[0], corners[1]);
            let l_bc = seg_len(corners[1], corners[2]);
            let l_ca = seg_len(corners[2], corners[0]);
            let l_cd = seg_len(corners[2], corners[3]);
            let l_da = seg_len(corners[3], corners[0]);
            asm.push_triangle_lengths([a, b, c], [l_ab, l_bc, l_ca]);
            asm.push_triangle_lengths([a, c, d], [l_ca, l_cd, l_da]);
        }
    }
    asm.finish((n + 1) * (n + 1))
}

/// Log conformal factor of the curvature `+1` spherical cap in
/// stereographic coordinates.
pub fn spherical_cap_phi<T: Real>(x: T, y: T) -> T {
    -(T::one() + (x * x + y * y) / real::<T>(4.0)).ln()
}

/// Sup over the triangles of the finer body of the local distortion of the
/// grid-refinement morphism from `euclidean_triangulation(phi, n)` to
/// `euclidean_triangulation(phi, 2n)`. The two grids nest, so every fine
/// triangle lies inside exactly one coarse triangle and the morphism is
/// affine on it.
pub fn refinement_sup_dis<T, F>(phi: F, n: usize) -> Result<T, ConstructError>
where
    T: Real,
    F: Fn(T, T) -> T + Copy,
{
    use crate::linmap::{LinMap2, Mat2};
    let coarse = euclidean_triangulation(phi, n)?;
    let fine = euclidean_triangulation(phi, 2 * n)?;

    // linear part of the affine chart param triangle -> flattened triangle
    let chart = |mesh: &BodyMesh<T>, t: usize, grid_n: usize| -> Mat2<T> {
        let (i, j, second) = {
            let cell = t / 2;
            (cell % grid_n, cell / grid_n, t % 2 == 1)
        };
        let gf = real::<T>(grid_n as f64);
        let p = |ii: usize, jj: usize| [real::<T>(ii as f64) / gf, real::<T>(jj as f64) / gf];
        let corners = if !second {
            [p(i, j), p(i + 1, j), p(i + 1, j + 1)]
        } else {
            [p(i, j), p(i + 1, j + 1), p(i, j + 1)]
        };
        let flat = flatten_triangle(&mesh.ref_lengths()[t]).expect("validated");
        let param = Mat2::from_cols(
            [corners[1][0] - corners[0][0], corners[1][1] - corners[0][1]],
            [corners[2][0] - corners[0][0], corners[2][1] - corners[0][1]],
        );
        let image = Mat2::from_cols(
            [flat[1][0] - flat[0][0], flat[1][1] - flat[0][1]],
            [flat[2][0] - flat[0][0], flat[2][1] - flat[0][1]],
        );
        image.mul(&param.inverse().expect("non-degenerate param triangle"))
    };

    let mut sup = T::zero();
    let fn2 = 2 * n;
    for t_fine in 0..fine.triangle_count() {
        let cell = t_fine / 2;
        let (i, j, fine_second) = (cell % fn2, cell / fn2, t_fine % 2 == 1);
        let (ci, cj) = (i / 2, j / 2);
        // which half of the coarse cell contains this fine triangle
        let coarse_second = match (i % 2, j % 2) {
            (0, 0) => fine_second,
            (1, 0) => false,
            (0, 1) => true,
            _ => fine_second,
        };
        let t_coarse = 2 * (cj * n + ci) + coarse_second as usize;
        let mc = chart(&coarse, t_coarse, n);
        let mf = chart(&fine, t_fine, fn2);
        let df = mf.mul(&mc.inverse().expect("invertible chart"));
        sup = sup.max(LinMap2::euclidean(df).distortion());
    }
    Ok(sup)
}

/// Rigid motion returned by [`holonomy`]: `x -> R x + translation` with `R`
/// the rotation by `rotation_angle`, in the chart coordinates of the first
/// strip triangle.
#[derive(Debug, Clone, Copy)]
pub struct Holonomy<T> {
    pub rotation_angle: T,
    pub translation: [T; 2],
}

#[derive(Clone, Copy)]
struct Motion<T> {
    c: T,
    s: T,
    tx: T,
    ty: T,
}

impl<T: Real> Motion<T> {
    fn identity() -> Self {
        Motion { c: T::one(), s: T::zero(), tx: T::zero(), ty: T::zero() }
    }

    fn apply(&self, p: [T; 2]) -> [T; 2] {
        [self.c * p[0] - self.s * p[1] + self.tx, self.s * p[0] + self.c * p[1] + self.ty]
    }

    /// Orientation-preserving motion sending segment (a0, b0) to (a1, b1);
    /// the segments are copies of one mesh edge, so their lengths agree.
    fn from_segments(a0: [T; 2], b0: [T; 2], a1: [T; 2], b1: [T; 2]) -> Self {
        let u = [b0[0] - a0[0], b0[1] - a0[1]];
        let v = [b1[0] - a1[0], b1[1] - a1[1]];
        let mut c = u[0] * v[0] + u[1] * v[1];
        let mut s = u[0] * v[1] - u[1] * v[0];
        let norm = (c * c + s * s).sqrt();
        c /= norm;
        s /= norm;
        let tx = a1[0] - (c * a0[0] - s * a0[1]);
        let ty = a1[1] - (s * a0[0] + c * a0[1]);
        Motion { c, s, tx, ty }
    }
}

/// Develop a closed triangle strip isometrically into the plane and return
/// the rigid motion relating the first placement of the starting triangle
/// to its final placement.
pub fn holonomy<T: Real>(mesh: &BodyMesh<T>, loop_tris: &[usize]) -> Result<Holonomy<T>, ConstructError> {
    if loop_tris.len() < 2 {
        return Err(ConstructError::NotClosed);
    }
    let nt = mesh.triangle_count();
    for (pos, &t) in loop_tris.iter().enumerate() {
        if t >= nt {
            return bad(format!("loop references triangle {t}, mesh has {nt}"));
        }
        if t == loop_tris[(pos + 1) % loop_tris.len()] {
            return Err(ConstructError::NotAStrip { position: pos, position_next: pos + 1 });
        }
    }

    let chart = |t: usize| flatten_triangle(&mesh.ref_lengths()[t]).expect("validated mesh");
    let corner =
        |t: usize, v: usize| mesh.triangles()[t].iter().position(|&x| x == v);

    let mut motion = Motion::identity();
    let k_last = loop_tris.len() - 1;
    for k in 0..loop_tris.len() {
        let t_cur = loop_tris[k];
        let t_next = loop_tris[(k + 1) % loop_tris.len()];
        // shared edge of the consecutive pair
        let mut shared = [0usize; 2];
        let mut count = 0;
        for &v in &mesh.triangles()[t_cur] {
            if mesh.triangles()[t_next].contains(&v) {
                if count < 2 {
                    shared[count] = v;
                }
                count += 1;
            }
        }
        if count != 2 {
            if k == k_last {
                return Err(ConstructError::NotClosed);
            }
            return Err(ConstructError::NotAStrip { position: k, position_next: k + 1 });
        }
        let [va, vb] = shared;
        let cur_chart = chart(t_cur);
        let next_chart = chart(t_next);
        let pa = motion.apply(cur_chart[corner(t_cur, va).unwrap()]);
        let pb = motion.apply(cur_chart[corner(t_cur, vb).unwrap()]);
        let qa = next_chart[corner(t_next, va).unwrap()];
        let qb = next_chart[corner(t_next, vb).unwrap()];
        motion = Motion::from_segments(qa, qb, pa, pb);
    }

    Ok(Holonomy {
        rotation_angle: motion.s.atan2(motion.c),
        translation: [motion.tx, motion.ty],
    })
}

/// Closed fan of triangles around an interior vertex, ordered by walking
/// across the edges incident to it.
pub fn vertex_loop<T: Real>(mesh: &BodyMesh<T>, v: usize) -> Result<Vec<usize>, ConstructError> {
    if v >= mesh.vertex_count() {
        return bad(format!("vertex {v} out of range"));
    }
    if mesh.is_boundary_vertex(v) {
        return Err(ConstructError::BoundaryVertex { vertex: v });
    }
    let start = mesh.triangles_at_vertex(v)[0];
    let mut out = vec![start];
    let mut t = start;
    loop {
        let tri = mesh.triangles()[t];
        let p = tri.iter().position(|&x| x == v).expect("incident triangle");
        let w = tri[(p + 1) % 3];
        let next = mesh
            .opposite_triangle(t, v, w)
            .expect("interior vertex has a closed fan");
        if next == start {
            break;
        }
        out.push(next);
        t = next;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::{morphism_stats, ClassifyThresholds};
    use crate::linmap::LinMap2;

    const PI: f64 = std::f64::consts::PI;

    fn scale_lengths(mesh: &BodyMesh<f64>, f: f64) -> BodyMesh<f64> {
        let lens = mesh
            .ref_lengths()
            .iter()
            .map(|l| [l[0] * f, l[1] * f, l[2] * f])
            .collect();
        BodyMesh::new(mesh.vertex_count(), mesh.triangles().to_vec(), lens).unwrap()
    }

    fn test_params() -> DislocationParams<f64> {
        DislocationParams { theta: 0.3, d: 0.05, block_size: 1.0 }
    }

    #[test]
    fn flat_square_frozen_counts_and_area() {
        let m = flat_square(1, 1.0f64).unwrap();
        assert_eq!(m.vertex_count(), 4);
        assert_eq!(m.triangle_count(), 2);
        assert!((m.total_area() - 1.0).abs() <= 1e-12);

        let m4 = flat_square(4, 1.0).unwrap();
        assert_eq!(m4.vertex_count(), 25);
        assert_eq!(m4.triangle_count(), 32);
    }

    #[test]
    fn flat_square_interior_angles_are_flat() {
        let m = flat_square(8, 1.0).unwrap();
        assert!(max_interior_defect(&m) <= 1e-12);
    }

    #[test]
    fn flat_square_scaling_morphism() {
        let m = flat_square(8, 1.0).unwrap();
        let s = morphism_stats(&m, &scale_lengths(&m, 1.05)).unwrap();
        assert!((s.sup_dis - 2.0f64.sqrt() * 0.05).abs() <= 1e-12);
    }

    #[test]
    fn cone_tip_angle_frozen() {
        let m = cone_mesh(0.8, 1.0, 64).unwrap();
        assert!(!m.is_boundary_vertex(0));
        let tip = m.cone_angle(0).unwrap();
        assert!((tip - 2.0 * PI * 0.8).abs() <= 2e-2, "tip angle {tip}");

        let d = flat_disc(1.0, 64).unwrap();
        assert!((d.cone_angle(0).unwrap() - 2.0 * PI).abs() <= 2e-2);

        assert!(matches!(cone_mesh(1.0, 1.0, 64), Err(ConstructError::BadParams { .. })));
        assert!(matches!(cone_mesh(0.8, 1.0, 4), Err(ConstructError::BadParams { .. })));
    }

    #[test]
    fn cone_tip_angle_converges_under_refinement() {
        let coarse = (cone_mesh(0.8f64, 1.0, 16).unwrap().cone_angle(0).unwrap() - 1.6 * PI).abs();
        let fine = (cone_mesh(0.8f64, 1.0, 64).unwrap().cone_angle(0).unwrap() - 1.6 * PI).abs();
        assert!(fine < coarse / 4.0, "coarse {coarse} fine {fine}");
    }

    #[test]
    fn cone_to_disc_identity_has_radial_stretch_distortion() {
        let alpha = 0.8f64;
        let cone = cone_mesh(alpha, 1.0, 64).unwrap();
        let disc = flat_disc(1.0, 64).unwrap();
        assert!(cone.has_same_connectivity(&disc));
        let expected = (1.0 / alpha - 1.0).abs();
        // skip the two innermost rings: the tip neighborhood is genuinely
        // singular and the chart pair distorts differently there
        let sectors = 64;
        let first = 2 * sectors + sectors; // tip fan + first ring row
        for t in first..cone.triangle_count() {
            let df = crate::body::morphism_gradient(&cone, &disc, t);
            let dis = LinMap2::euclidean(df).distortion();
            assert!(
                (dis - expected).abs() <= 5e-2,
                "triangle {t}: dis {dis} expected {expected}"
            );
        }
    }

    #[test]
    fn block_cone_angles_frozen() {
        let params = test_params();
        let block = dislocation_block(&params, 1).unwrap();
        let mesh = &block.mesh;
        let minus = mesh.cone_angle(block.p_minus).unwrap();
        let plus = mesh.cone_angle(block.p_plus).unwrap();
        assert!((minus - (2.0 * PI + 2.0 * params.theta)).abs() <= 1e-10, "minus {minus}");
        assert!((plus - (2.0 * PI - 2.0 * params.theta)).abs() <= 1e-10, "plus {plus}");

        // every other interior vertex is flat, so the deficits cancel
        let mut deficit_sum = 0.0;
        for v in 0..mesh.vertex_count() {
            if !mesh.is_boundary_vertex(v) {
                let a = mesh.cone_angle(v).unwrap();
                deficit_sum += 2.0 * PI - a;
                if v != block.p_minus && v != block.p_plus {
                    assert!((a - 2.0 * PI).abs() <= 1e-10, "vertex {v} angle {a}");
                }
            }
        }
        assert!(deficit_sum.abs() <= 1e-10);
    }

    #[test]
    fn block_rejects_bad_params() {
        let p = DislocationParams { theta: 0.3, d: 2.0, block_size: 1.0 };
        assert!(matches!(dislocation_block(&p, 1), Err(ConstructError::BadParams { .. })));
        let p = DislocationParams { theta: -0.1, d: 0.05, block_size: 1.0 };
        assert!(matches!(dislocation_block(&p, 1), Err(ConstructError::BadParams { .. })));
    }

    #[test]
    fn fan_holonomy_matches_disclination_charges() {
        let params = test_params();
        let block = dislocation_block(&params, 2).unwrap();
        let mesh = &block.mesh;

        let fan_minus = vertex_loop(mesh, block.p_minus).unwrap();
        let h = holonomy(mesh, &fan_minus).unwrap();
        assert!(
            (h.rotation_angle.abs() - 2.0 * params.theta).abs() <= 1e-10,
            "rotation {}",
            h.rotation_angle
        );

        let fan_plus = vertex_loop(mesh, block.p_plus).unwrap();
        let h2 = holonomy(mesh, &fan_plus).unwrap();
        assert!((h2.rotation_angle.abs() - 2.0 * params.theta).abs() <= 1e-10);
        // opposite charges
        assert!((h.rotation_angle + h2.rotation_angle).abs() <= 1e-10);

        // a fan in the flat part develops to the identity
        let flat_v = {
            let mut found = None;
            for v in 0..mesh.vertex_count() {
                if !mesh.is_boundary_vertex(v)
                    && v != block.p_minus
                    && v != block.p_plus
                    && (mesh.cone_angle(v).unwrap() - 2.0 * PI).abs() <= 1e-12
                {
                    found = Some(v);
                    break;
                }
            }
            found.unwrap()
        };
        let h3 = holonomy(mesh, &vertex_loop(mesh, flat_v).unwrap()).unwrap();
        assert!(h3.rotation_angle.abs() <= 1e-12);
        assert!(h3.translation[0].abs() <= 1e-12 && h3.translation[1].abs() <= 1e-12);
    }

    #[test]
    fn dipole_holonomy_is_the_burgers_translation() {
        for (theta, d) in [(0.3f64, 0.05), (0.2, 0.1), (0.45, 0.02), (0.1, 0.2), (0.3, 0.01)] {
            let params = DislocationParams { theta, d, block_size: 1.0 };
            let block = dislocation_block(&params, 1).unwrap();
            let h = holonomy(&block.mesh, &block.dipole_loop).unwrap();
            let b = params.burgers();
            let t_mag = (h.translation[0].powi(2) + h.translation[1].powi(2)).sqrt();
            assert!(h.rotation_angle.abs() <= 1e-10, "rotation {}", h.rotation_angle);
            assert!((t_mag - b).abs() <= 1e-10, "burgers {t_mag} expected {b}");
        }
    }

    #[test]
    fn traversing_twice_squares_the_motion() {
        let params = test_params();
        let block = dislocation_block(&params, 1).unwrap();
        let once = holonomy(&block.mesh, &block.dipole_loop).unwrap();
        let doubled: Vec<usize> = block
            .dipole_loop
            .iter()
            .chain(block.dipole_loop.iter())
            .copied()
            .collect();
        let twice = holonomy(&block.mesh, &doubled).unwrap();
        assert!(twice.rotation_angle.abs() <= 1e-10);
        assert!((twice.translation[0] - 2.0 * once.translation[0]).abs() <= 1e-10);
        assert!((twice.translation[1] - 2.0 * once.translation[1]).abs() <= 1e-10);
    }

    #[test]
    fn holonomy_rejects_broken_strips() {
        let block = dislocation_block(&test_params(), 1).unwrap();
        let mesh = &block.mesh;
        // non-adjacent pair
        let t_far = mesh.triangle_count() - 1;
        assert!(matches!(
            holonomy(mesh, &[0, t_far]),
            Err(ConstructError::NotAStrip { .. }) | Err(ConstructError::NotClosed)
        ));
        // open strip: drop the last triangle of a closed fan
        let mut fan = vertex_loop(mesh, block.p_plus).unwrap();
        fan.pop();
        fan.pop();
        // removing interior closure makes the wrap pair non-adjacent
        let res = holonomy(mesh, &fan);
        assert!(res.is_err());
    }

    #[test]
    fn lattice_schedule_frozen_values() {
        let p2 = lattice_schedule::<f64>(2, LatticeMode::MeanRegime, 0.3, 0.5).unwrap();
        assert!((p2.d - 0.25).abs() <= 1e-15);
        assert!((p2.theta - 0.3).abs() == 0.0);
        assert!((p2.block_size - 0.5).abs() <= 1e-15);

        let u4 = lattice_schedule::<f64>(4, LatticeMode::UniformRegime, 0.3, 0.5).unwrap();
        assert!((u4.theta - 0.3 / 2.0).abs() <= 1e-15);
        // per-block Burgers magnitude is b0/n^2 in both regimes
        let b0 = 2.0 * 0.3f64.sin();
        assert!((u4.burgers() - b0 / 16.0).abs() <= 1e-15);
    }

    #[test]
    fn lattice_burgers_content_is_conserved() {
        let b0 = 2.0 * 0.3f64.sin();
        for n in [1usize, 2, 4, 8] {
            for mode in [LatticeMode::MeanRegime, LatticeMode::UniformRegime] {
                let p = lattice_schedule::<f64>(n, mode, 0.3, 0.5).unwrap();
                let total = (n * n) as f64 * p.burgers();
                assert!((total - b0).abs() <= 1e-9, "n {n} total {total}");
            }
        }
    }

    #[test]
    fn lattice_meshes_share_connectivity_and_flat_limit() {
        let (m_n, m_limit) = dislocation_lattice::<f64>(2, LatticeMode::MeanRegime, 0.3, 0.5).unwrap();
        assert!(m_n.has_same_connectivity(&m_limit));
        assert!(max_interior_defect(&m_limit) <= 1e-12);
        // the lattice has n^2 dipoles: 2 n^2 singular vertices
        let mut singular = 0;
        for v in 0..m_n.vertex_count() {
            if !m_n.is_boundary_vertex(v)
                && (m_n.cone_angle(v).unwrap() - 2.0 * PI).abs() > 1e-10
            {
                singular += 1;
            }
        }
        assert_eq!(singular, 8);
        // limit mesh total area is the unit square
        assert!((m_limit.total_area() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn lattice_regime_trends() {
        let run = |mode| -> Vec<crate::body::MorphismStats<f64>> {
            [2usize, 4, 8]
                .iter()
                .map(|&n| {
                    let (m_n, m_limit) = dislocation_lattice(n, mode, 0.3, 0.5).unwrap();
                    morphism_stats(&m_limit, &m_n).unwrap()
                })
                .collect()
        };
        let mean = run(LatticeMode::MeanRegime);
        for w in mean.windows(2) {
            assert!(w[1].mean_dis < w[0].mean_dis, "mean_dis not decreasing");
        }
        // the disclination angle is fixed, so the worst local distortion
        // does not vanish
        assert!(mean[2].sup_dis >= 0.5 * mean[0].sup_dis);

        let uni = run(LatticeMode::UniformRegime);
        for w in uni.windows(2) {
            assert!(w[1].sup_dis < w[0].sup_dis, "sup_dis not decreasing");
        }
        let thr = ClassifyThresholds::default();
        assert_eq!(
            crate::body::classify_convergence(&uni, &thr).unwrap(),
            crate::body::ConvergenceClass::Uniform
        );
    }

    #[test]
    fn euclidean_triangulation_flat_and_scaled_cases() {
        let m = euclidean_triangulation(|_x: f64, _y: f64| 0.0, 4).unwrap();
        let flat = flat_square(4, 1.0).unwrap();
        assert!(m.has_same_connectivity(&flat));
        for (a, b) in m.ref_lengths().iter().zip(flat.ref_lengths()) {
            for s in 0..3 {
                assert!((a[s] - b[s]).abs() <= 1e-12);
            }
        }

        let doubled = euclidean_triangulation(|_x: f64, _y: f64| 2.0f64.ln(), 4).unwrap();
        for (a, b) in doubled.ref_lengths().iter().zip(flat.ref_lengths()) {
            for s in 0..3 {
                assert!((a[s] - 2.0 * b[s]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn spherical_cap_defects_shrink_first_order() {
        let defect = |n: usize| {
            max_interior_defect(&euclidean_triangulation(spherical_cap_phi::<f64>, n).unwrap())
        };
        let d8 = defect(8);
        let d16 = defect(16);
        let d32 = defect(32);
        assert!(d16 <= d8 / 2.0, "d8 {d8} d16 {d16}");
        assert!(d32 <= d16 / 2.0, "d16 {d16} d32 {d32}");
    }

    #[test]
    fn spherical_cap_refinement_morphisms_flatten() {
        let s8: f64 = refinement_sup_dis(spherical_cap_phi::<f64>, 8).unwrap();
        let s16: f64 = refinement_sup_dis(spherical_cap_phi::<f64>, 16).unwrap();
        let s32: f64 = refinement_sup_dis(spherical_cap_phi::<f64>, 32).unwrap();
        assert!(s16 < s8, "s8 {s8} s16 {s16}");
        assert!(s32 < s16, "s16 {s16} s32 {s32}");
    }
}
