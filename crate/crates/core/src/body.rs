//! Intrinsic triangulated bodies.
//!
//! A body is a triangle mesh given purely by connectivity and one reference
//! length per triangle edge; no vertex coordinates exist. Two triangles
//! sharing an edge must agree on its length bit-for-bit, so the mesh is a
//! well-defined piecewise-flat metric space. Geometry (areas, corner angles,
//! cone angles, local flattenings) is derived from lengths alone.
//!
//! Morphisms between bodies of identical connectivity are the identity on
//! vertices; [`morphism_stats`] measures how far such a morphism is from an
//! isometry, in the pointwise (`sup_dis`), integrated (`mean_dis`,
//! `mean_dis_inverse`), bi-Lipschitz, volume and global-distance senses used
//! by the convergence experiments.

use std::collections::HashMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::linmap::{LinMap2, Mat2};
use crate::scalar::{real, Real};

#[derive(Debug, Error, PartialEq)]
pub enum BodyError {
    #[error("BadTriangle: triangle {triangle} has non-realizable edge lengths ({a}, {b}, {c})")]
    BadTriangle { triangle: usize, a: f64, b: f64, c: f64 },
    #[error("EdgeLengthMismatch: edge ({a}, {b}) carries different lengths in adjacent triangles")]
    EdgeLengthMismatch { a: usize, b: usize },
    #[error("OrientationInconsistent: directed edge ({a}, {b}) appears in more than one triangle")]
    OrientationInconsistent { a: usize, b: usize },
    #[error("NonManifoldEdge: edge ({a}, {b}) belongs to more than two triangles")]
    NonManifoldEdge { a: usize, b: usize },
    #[error("Disconnected: triangle adjacency graph is not connected")]
    Disconnected,
    #[error("IsolatedVertex: vertex {vertex} belongs to no triangle")]
    IsolatedVertex { vertex: usize },
    #[error("BadIndex: triangle {triangle} references a vertex out of range or twice")]
    BadIndex { triangle: usize },
    #[error("EmptyMesh: a body needs at least one triangle")]
    EmptyMesh,
    #[error("BoundaryVertex: vertex {vertex} lies on the boundary, cone angle undefined")]
    BoundaryVertex { vertex: usize },
    #[error("ConnectivityMismatch: source and target meshes must share vertex count and triangle list")]
    ConnectivityMismatch,
    #[error("CountMismatch: configuration has {got} positions, mesh has {want} vertices")]
    CountMismatch { got: usize, want: usize },
    #[error("EmptySequence: classification needs at least two morphism records")]
    EmptySequence,
}

// Shared-edge lengths are compared bit-for-bit, so the map stores raw bits
// rather than the scalar.
#[derive(Debug, Clone, Copy)]
struct EdgeInfo {
    length_bits: u64,
    tris: [usize; 2],
    n_tri: u8,
}

/// Triangle mesh with per-triangle reference edge lengths.
///
/// For triangle `(i, j, k)` the stored lengths are `(l_ij, l_jk, l_ki)` in
/// that order. Construction validates realizability (strict triangle
/// inequality), shared-edge length agreement, consistent orientation,
/// manifoldness and connectedness; every accessor may rely on these.
#[derive(Debug, Clone)]
pub struct BodyMesh<T> {
    vertex_count: usize,
    triangles: Vec<[usize; 3]>,
    lengths: Vec<[T; 3]>,
    edge_map: HashMap<(usize, usize), EdgeInfo>,
    adjacency: Vec<Vec<(usize, T)>>,
    boundary_vertex: Vec<bool>,
    vertex_tris: Vec<Vec<usize>>,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl<T: Real> BodyMesh<T> {
    pub fn new(
        vertex_count: usize,
        triangles: Vec<[usize; 3]>,
        lengths: Vec<[T; 3]>,
    ) -> Result<Self, BodyError> {
        if triangles.is_empty() || triangles.len() != lengths.len() {
            return Err(BodyError::EmptyMesh);
        }
        for (t, tri) in triangles.iter().enumerate() {
            let [i, j, k] = *tri;
            if i >= vertex_count || j >= vertex_count || k >= vertex_count || i == j || j == k || i == k
            {
                return Err(BodyError::BadIndex { triangle: t });
            }
            let [a, b, c] = lengths[t];
            let ok = a.is_finite()
                && b.is_finite()
                && c.is_finite()
                && a > T::zero()
                && b > T::zero()
                && c > T::zero()
                && a + b > c
                && b + c > a
                && c + a > b;
            if !ok {
                return Err(BodyError::BadTriangle {
                    triangle: t,
                    a: a.to_f64_lossy(),
                    b: b.to_f64_lossy(),
                    c: c.to_f64_lossy(),
                });
            }
        }

        let mut edge_map: HashMap<(usize, usize), EdgeInfo> = HashMap::new();
        let mut directed: HashMap<(usize, usize), ()> = HashMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for e in 0..3 {
                let a = tri[e];
                let b = tri[(e + 1) % 3];
                let len_bits = lengths[t][e].to_f64_lossy().to_bits();
                if directed.insert((a, b), ()).is_some() {
                    return Err(BodyError::OrientationInconsistent { a, b });
                }
                let entry = edge_map.entry(key(a, b)).or_insert(EdgeInfo {
                    length_bits: len_bits,
                    tris: [usize::MAX; 2],
                    n_tri: 0,
                });
                if entry.n_tri >= 2 {
                    let (ka, kb) = key(a, b);
                    return Err(BodyError::NonManifoldEdge { a: ka, b: kb });
                }
                if entry.length_bits != len_bits {
                    let (ka, kb) = key(a, b);
                    return Err(BodyError::EdgeLengthMismatch { a: ka, b: kb });
                }
                entry.tris[entry.n_tri as usize] = t;
                entry.n_tri += 1;
            }
        }

        // Triangle adjacency must be connected.
        let mut seen = vec![false; triangles.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut reached = 1usize;
        while let Some(t) = stack.pop() {
            let tri = triangles[t];
            for e in 0..3 {
                let k = key(tri[e], tri[(e + 1) % 3]);
                let info = &edge_map[&k];
                for s in 0..info.n_tri as usize {
                    let other = info.tris[s];
                    if !seen[other] {
                        seen[other] = true;
                        reached += 1;
                        stack.push(other);
                    }
                }
            }
        }
        if reached != triangles.len() {
            return Err(BodyError::Disconnected);
        }

        let mut vertex_tris: Vec<Vec<usize>> = vec![Vec::new(); vertex_count];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                vertex_tris[v].push(t);
            }
        }
        if let Some(v) = vertex_tris.iter().position(|l| l.is_empty()) {
            return Err(BodyError::IsolatedVertex { vertex: v });
        }

        let mut boundary_vertex = vec![false; vertex_count];
        for (&(a, b), info) in edge_map.iter() {
            if info.n_tri == 1 {
                boundary_vertex[a] = true;
                boundary_vertex[b] = true;
            }
        }

        // Vertex adjacency in deterministic (triangle-order) form, for the
        // shortest-path routines.
        let mut adjacency: Vec<Vec<(usize, T)>> = vec![Vec::new(); vertex_count];
        let mut added: HashMap<(usize, usize), ()> = HashMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for e in 0..3 {
                let a = tri[e];
                let b = tri[(e + 1) % 3];
                if added.insert(key(a, b), ()).is_none() {
                    let l = lengths[t][e];
                    adjacency[a].push((b, l));
                    adjacency[b].push((a, l));
                }
            }
        }

        Ok(BodyMesh {
            vertex_count,
            triangles,
            lengths,
            edge_map,
            adjacency,
            boundary_vertex,
            vertex_tris,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn ref_lengths(&self) -> &[[T; 3]] {
        &self.lengths
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn triangles_at_vertex(&self, v: usize) -> &[usize] {
        &self.vertex_tris[v]
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, T)] {
        &self.adjacency[v]
    }

    /// The triangle on the other side of edge `(a, b)` from `t`, if any.
    pub fn opposite_triangle(&self, t: usize, a: usize, b: usize) -> Option<usize> {
        let info = self.edge_map.get(&key(a, b))?;
        for s in 0..info.n_tri as usize {
            if info.tris[s] != t {
                return Some(info.tris[s]);
            }
        }
        None
    }

    /// Length of edge `(a, b)` if it exists in the mesh.
    pub fn edge_length(&self, a: usize, b: usize) -> Option<T> {
        self.edge_map
            .get(&key(a, b))
            .map(|i| T::from_f64(f64::from_bits(i.length_bits)).unwrap())
    }

    pub fn has_same_connectivity(&self, other: &Self) -> bool {
        self.vertex_count == other.vertex_count && self.triangles == other.triangles
    }

    /// Reference area of triangle `t` by Heron's rule (stable form).
    pub fn triangle_area(&self, t: usize) -> T {
        heron_area(&self.lengths[t])
    }

    pub fn total_area(&self) -> T {
        let mut s = T::zero();
        for t in 0..self.triangles.len() {
            s += self.triangle_area(t);
        }
        s
    }

    /// Total angle collected by the triangle corners at an interior vertex.
    pub fn cone_angle(&self, v: usize) -> Result<T, BodyError> {
        if self.boundary_vertex[v] {
            return Err(BodyError::BoundaryVertex { vertex: v });
        }
        let mut sum = T::zero();
        for &t in &self.vertex_tris[v] {
            let corner = self.triangles[t].iter().position(|&x| x == v).unwrap();
            sum += corner_angle(&self.lengths[t], corner);
        }
        Ok(sum)
    }

    /// Angle deficit `2 pi - cone_angle` at an interior vertex.
    pub fn angle_deficit(&self, v: usize) -> Result<T, BodyError> {
        Ok(real::<T>(2.0 * std::f64::consts::PI) - self.cone_angle(v)?)
    }

    /// Single-source shortest path distances along mesh edges.
    pub fn graph_distances(&self, source: usize) -> Vec<T> {
        dijkstra(&self.adjacency, source)
    }

    /// Double-sweep estimate of the edge-graph diameter.
    pub fn graph_diameter_estimate(&self) -> T {
        let d0 = self.graph_distances(0);
        let far = argmax(&d0);
        let d1 = self.graph_distances(far);
        d1[argmax(&d1)]
    }
}

fn argmax<T: Real>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Copy)]
struct HeapEntry<T> {
    dist: T,
    vertex: usize,
}

impl<T: Real> PartialEq for HeapEntry<T> {
    fn eq(&self, o: &Self) -> bool {
        self.dist == o.dist && self.vertex == o.vertex
    }
}
impl<T: Real> Eq for HeapEntry<T> {}
impl<T: Real> Ord for HeapEntry<T> {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        // Min-heap via reversed comparison; ties broken by vertex index so
        // the pop order (and thus the float relaxation order) is total.
        o.dist
            .partial_cmp(&self.dist)
            .expect("finite distances")
            .then(o.vertex.cmp(&self.vertex))
    }
}
impl<T: Real> PartialOrd for HeapEntry<T> {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}

fn dijkstra<T: Real>(adjacency: &[Vec<(usize, T)>], source: usize) -> Vec<T> {
    let mut dist = vec![T::infinity(); adjacency.len()];
    dist[source] = T::zero();
    let mut heap = std::collections::BinaryHeap::new();
    heap.push(HeapEntry { dist: T::zero(), vertex: source });
    while let Some(HeapEntry { dist: d, vertex: v }) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for &(w, len) in &adjacency[v] {
            let nd = d + len;
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(HeapEntry { dist: nd, vertex: w });
            }
        }
    }
    dist
}

/// Heron's rule in the cancellation-safe ordering.
pub fn heron_area<T: Real>(lengths: &[T; 3]) -> T {
    let mut s = *lengths;
    // sort descending: s[0] >= s[1] >= s[2]
    if s[0] < s[1] {
        s.swap(0, 1);
    }
    if s[1] < s[2] {
        s.swap(1, 2);
    }
    if s[0] < s[1] {
        s.swap(0, 1);
    }
    let (a, b, c) = (s[0], s[1], s[2]);
    let t = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
    real::<T>(0.25) * t.max(T::zero()).sqrt()
}

/// Interior corner angle of a triangle with lengths `(l01, l12, l20)` at
/// `corner` (0, 1 or 2), via the half-angle form of the law of cosines.
pub fn corner_angle<T: Real>(lengths: &[T; 3], corner: usize) -> T {
    let [l01, l12, l20] = *lengths;
    // adjacent sides a, b and opposite side c at the requested corner
    let (a, b, c) = match corner {
        0 => (l01, l20, l12),
        1 => (l12, l01, l20),
        2 => (l20, l12, l01),
        _ => panic!("corner index out of range"),
    };
    let num = (((b - a) + c) * ((a - b) + c)).max(T::zero()).sqrt();
    let den = (((a + b) + c) * ((a + b) - c)).max(T::zero()).sqrt();
    real::<T>(2.0) * num.atan2(den)
}

/// Isometric planar placement of a triangle with lengths `(l01, l12, l20)`:
/// vertex 0 at the origin, vertex 1 on the positive x-axis, vertex 2 in the
/// upper half plane.
pub fn flatten_triangle<T: Real>(lengths: &[T; 3]) -> Result<[[T; 2]; 3], BodyError> {
    let [l01, l12, l20] = *lengths;
    let ok = l01 > T::zero()
        && l12 > T::zero()
        && l20 > T::zero()
        && l01 + l12 > l20
        && l12 + l20 > l01
        && l20 + l01 > l12;
    if !ok {
        return Err(BodyError::BadTriangle {
            triangle: usize::MAX,
            a: l01.to_f64_lossy(),
            b: l12.to_f64_lossy(),
            c: l20.to_f64_lossy(),
        });
    }
    let x = (l01 * l01 + l20 * l20 - l12 * l12) / (real::<T>(2.0) * l01);
    let y2 = l20 * l20 - x * x;
    let y = y2.max(T::zero()).sqrt();
    if !(y > T::zero()) {
        return Err(BodyError::BadTriangle {
            triangle: usize::MAX,
            a: l01.to_f64_lossy(),
            b: l12.to_f64_lossy(),
            c: l20.to_f64_lossy(),
        });
    }
    Ok([[T::zero(), T::zero()], [l01, T::zero()], [x, y]])
}

/// Planar vertex images of a body: one point per mesh vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration<T> {
    pub positions: Vec<[T; 2]>,
}

impl<T: Real> Configuration<T> {
    pub fn new(positions: Vec<[T; 2]>) -> Self {
        Configuration { positions }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn check_against<U: Real>(&self, mesh: &BodyMesh<U>) -> Result<(), BodyError> {
        if self.positions.len() != mesh.vertex_count() {
            return Err(BodyError::CountMismatch {
                got: self.positions.len(),
                want: mesh.vertex_count(),
            });
        }
        Ok(())
    }
}

/// Differential of the piecewise-affine map sending the flattened reference
/// triangle `t` to its configured image. Both inner products are Euclidean:
/// the reference metric is absorbed by the flattening.
pub fn deformation_gradient<T: Real>(
    mesh: &BodyMesh<T>,
    u: &Configuration<T>,
    t: usize,
) -> LinMap2<T> {
    let ref_pts = flatten_triangle(&mesh.ref_lengths()[t]).expect("validated mesh triangle");
    let tri = mesh.triangles()[t];
    let p = &u.positions;
    let d_ref = Mat2::from_cols(
        [ref_pts[1][0] - ref_pts[0][0], ref_pts[1][1] - ref_pts[0][1]],
        [ref_pts[2][0] - ref_pts[0][0], ref_pts[2][1] - ref_pts[0][1]],
    );
    let d_img = Mat2::from_cols(
        [p[tri[1]][0] - p[tri[0]][0], p[tri[1]][1] - p[tri[0]][1]],
        [p[tri[2]][0] - p[tri[0]][0], p[tri[2]][1] - p[tri[0]][1]],
    );
    let inv = d_ref.inverse().expect("non-degenerate reference triangle");
    LinMap2::euclidean(d_img.mul(&inv))
}

/// Deviation measures of the identity morphism between two bodies of equal
/// connectivity.
///
/// `mean_dis` and `mean_dis_inverse` are integrals (not averages): distortion
/// weighted by source respectively target triangle areas. `global_dis`
/// compares edge-graph distances over all vertex pairs for small meshes and
/// a deterministic sample of source vertices (at least ~10^3 pairs) for
/// large ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorphismStats<T> {
    pub sup_dis: T,
    pub mean_dis: T,
    pub mean_dis_inverse: T,
    pub bilip: T,
    pub vol_ratio_dev: T,
    pub global_dis: T,
}

/// Per-triangle differential of the identity morphism `source -> target`.
pub(crate) fn morphism_gradient<T: Real>(
    source: &BodyMesh<T>,
    target: &BodyMesh<T>,
    t: usize,
) -> Mat2<T> {
    let ps = flatten_triangle(&source.ref_lengths()[t]).expect("validated");
    let pt = flatten_triangle(&target.ref_lengths()[t]).expect("validated");
    let es = Mat2::from_cols(
        [ps[1][0] - ps[0][0], ps[1][1] - ps[0][1]],
        [ps[2][0] - ps[0][0], ps[2][1] - ps[0][1]],
    );
    let et = Mat2::from_cols(
        [pt[1][0] - pt[0][0], pt[1][1] - pt[0][1]],
        [pt[2][0] - pt[0][0], pt[2][1] - pt[0][1]],
    );
    et.mul(&es.inverse().expect("non-degenerate triangle"))
}

pub fn morphism_stats<T: Real>(
    source: &BodyMesh<T>,
    target: &BodyMesh<T>,
) -> Result<MorphismStats<T>, BodyError> {
    if !source.has_same_connectivity(target) {
        return Err(BodyError::ConnectivityMismatch);
    }
    let nt = source.triangle_count();

    // Per-triangle quantities in parallel, reduced in index order below so
    // the result does not depend on the thread count.
    let per: Vec<(T, T, T, T, T)> = (0..nt)
        .into_par_iter()
        .with_min_len(256)
        .map(|t| {
            let df = morphism_gradient(source, target, t);
            let fwd = LinMap2::euclidean(df);
            let inv = LinMap2::euclidean(df.inverse().expect("bi-Lipschitz morphism"));
            let dis = fwd.distortion();
            let dis_inv = inv.distortion();
            let op = fwd.operator_norm().max(inv.operator_norm());
            let area_s = source.triangle_area(t);
            let area_t = target.triangle_area(t);
            (dis, dis_inv, op, area_s, area_t)
        })
        .collect();

    let mut sup_dis = T::zero();
    let mut mean_dis = T::zero();
    let mut mean_inv = T::zero();
    let mut bilip = T::zero();
    let mut vol_dev = T::zero();
    for &(dis, dis_inv, op, area_s, area_t) in &per {
        sup_dis = sup_dis.max(dis);
        mean_dis += area_s * dis;
        mean_inv += area_t * dis_inv;
        bilip = bilip.max(op);
        vol_dev = vol_dev.max((area_t / area_s - T::one()).abs());
    }

    let global_dis = global_distance_deviation(source, target);

    Ok(MorphismStats {
        sup_dis,
        mean_dis,
        mean_dis_inverse: mean_inv,
        bilip,
        vol_ratio_dev: vol_dev,
        global_dis,
    })
}

/// Largest deviation `|d_source(p, q) - d_target(p, q)|` of edge-graph
/// distances over sampled vertex pairs. All pairs when the mesh is small
/// (`V <= 256`), otherwise 64 evenly spaced source vertices against all
/// targets.
fn global_distance_deviation<T: Real>(source: &BodyMesh<T>, target: &BodyMesh<T>) -> T {
    let v = source.vertex_count();
    let sources: Vec<usize> = if v <= 256 {
        (0..v).collect()
    } else {
        let stride = v / 64;
        (0..v).step_by(stride.max(1)).collect()
    };
    let per_source: Vec<T> = sources
        .par_iter()
        .with_min_len(4)
        .map(|&s| {
            let ds = source.graph_distances(s);
            let dt = target.graph_distances(s);
            let mut worst = T::zero();
            for i in 0..v {
                let dev = (ds[i] - dt[i]).abs();
                if dev > worst {
                    worst = dev;
                }
            }
            worst
        })
        .collect();
    let mut worst = T::zero();
    for d in per_source {
        if d > worst {
            worst = d;
        }
    }
    worst
}

/// Outcome of sequence classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergenceClass {
    Uniform,
    Mean,
    Neither,
}

impl std::fmt::Display for ConvergenceClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ConvergenceClass::Uniform => "Uniform",
            ConvergenceClass::Mean => "Mean",
            ConvergenceClass::Neither => "Neither",
        };
        f.write_str(s)
    }
}

/// Cutoffs for [`classify_convergence`]. Defaults are sized for the bundled
/// lattice experiments; callers with other scales should supply their own.
#[derive(Debug, Clone, Copy)]
pub struct ClassifyThresholds<T> {
    pub sup: T,
    pub mean: T,
    pub bilip: T,
    pub vol_ratio: T,
    pub global_dis: T,
}

impl<T: Real> Default for ClassifyThresholds<T> {
    fn default() -> Self {
        ClassifyThresholds {
            sup: real(0.15),
            mean: real(0.1),
            bilip: real(10.0),
            vol_ratio: real(0.5),
            global_dis: real(0.25),
        }
    }
}

fn strictly_decreasing<T: Real>(xs: &[T]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

/// Classify a sequence of morphism records.
///
/// `Uniform`: `sup_dis` strictly decreasing with final value below the `sup`
/// cutoff. Otherwise `Mean`: `mean_dis` strictly decreasing and small, with
/// the bi-Lipschitz bound holding along the whole sequence and volume and
/// global-distance deviations small at the end. Otherwise `Neither`.
pub fn classify_convergence<T: Real>(
    stats: &[MorphismStats<T>],
    thresholds: &ClassifyThresholds<T>,
) -> Result<ConvergenceClass, BodyError> {
    if stats.len() < 2 {
        return Err(BodyError::EmptySequence);
    }
    let sup: Vec<T> = stats.iter().map(|s| s.sup_dis).collect();
    let mean: Vec<T> = stats.iter().map(|s| s.mean_dis).collect();
    let last = stats.last().unwrap();

    if strictly_decreasing(&sup) && last.sup_dis < thresholds.sup {
        return Ok(ConvergenceClass::Uniform);
    }
    let bilip_bounded = stats.iter().all(|s| s.bilip < thresholds.bilip);
    if strictly_decreasing(&mean)
        && last.mean_dis < thresholds.mean
        && bilip_bounded
        && last.vol_ratio_dev < thresholds.vol_ratio
        && last.global_dis < thresholds.global_dis
    {
        return Ok(ConvergenceClass::Mean);
    }
    Ok(ConvergenceClass::Neither)
}
