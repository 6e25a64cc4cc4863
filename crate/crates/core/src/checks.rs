//! Named, self-contained invariant checks over every module, consumed by
//! the `check` subcommand and the property-test targets.
//!
//! Each check runs a seeded sampling loop or a fixed construction and
//! reports a [`CheckOutcome`] with the measured worst margin, so a failure
//! message carries the number that broke the bound. Sample counts and
//! tolerances are pinned here and nowhere else.

use std::fmt;

use crate::body::{
    flatten_triangle, morphism_stats, BodyMesh, Configuration, MorphismStats,
};
use crate::constructions::{
    cone_mesh, dislocation_block, dislocation_lattice, euclidean_triangulation, flat_disc,
    flat_square, holonomy, lattice_schedule, max_interior_defect, spherical_cap_phi, vertex_loop,
    DislocationParams, LatticeMode,
};
use crate::energy::{
    density, energy_value, p_regularity_check, total_energy, total_gradient, EnergySettings,
};
use crate::linmap::{
    dist_to_so_set, distortion_bruteforce, so_set_hausdorff_oracle, InnerProduct2, LinMap2, Mat2,
};
use crate::rng::CounterRng;
use crate::solve::{
    gamma_experiment, initial_configuration, minimize, SequenceGenerator, SequenceResult,
    SolveOptions,
};

const SEED: u64 = 0x51ab_3c1d;

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

fn fmt_seq(xs: &[f64]) -> String {
    let inner: Vec<String> = xs.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", inner.join(", "))
}

fn random_spd(rng: &mut CounterRng) -> InnerProduct2<f64> {
    let th = rng.range(0.0, std::f64::consts::PI);
    let (c, s) = (th.cos(), th.sin());
    let e1: f64 = rng.range(0.45, 2.3);
    let e2: f64 = rng.range(0.45, 2.3);
    InnerProduct2::new(
        c * c * e1 + s * s * e2,
        c * s * (e1 - e2),
        s * s * e1 + c * c * e2,
    )
    .expect("conjugated positive diagonal")
}

fn random_mat(rng: &mut CounterRng, lo: f64, hi: f64) -> Mat2<f64> {
    Mat2::new(rng.range(lo, hi), rng.range(lo, hi), rng.range(lo, hi), rng.range(lo, hi))
}

/// Map whose frame representation has the prescribed singular values; used
/// where the sampled instance needs a known margin from the rotation set.
fn framed_map_with_sigmas(
    rng: &mut CounterRng,
    s1: f64,
    s2: f64,
    g: &InnerProduct2<f64>,
    h: &InnerProduct2<f64>,
) -> LinMap2<f64> {
    let u = Mat2::rotation(rng.range(0.0, std::f64::consts::TAU));
    let v = Mat2::rotation(rng.range(0.0, std::f64::consts::TAU));
    let core = u.mul(&Mat2::diagonal(s1, s2)).mul(&v.transpose());
    let m = h.inv_sqrt().mul(&core).mul(&g.sqrt());
    LinMap2::new(m, *g, *h)
}

pub fn linmap_norm_sandwich() -> CheckOutcome {
    let mut rng = CounterRng::new(SEED, 20);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let g = random_spd(&mut rng);
        let h = random_spd(&mut rng);
        let a = LinMap2::new(random_mat(&mut rng, -2.5, 2.5), g, h);
        let frob = a.frobenius_norm();
        let op = a.operator_norm();
        worst = worst.max(op - frob).max(frob - 2.0 * op);
    }
    outcome(
        "linmap_norm_sandwich",
        worst <= 1e-12,
        format!("10000 samples, worst sandwich violation {worst:.3e}"),
    )
}

pub fn linmap_rotation_distortion_zero() -> CheckOutcome {
    let mut rng = CounterRng::new(SEED, 21);
    let mut worst = 0.0f64;
    for _ in 0..1_000 {
        let g = random_spd(&mut rng);
        let h = random_spd(&mut rng);
        let phi = rng.range(0.0, std::f64::consts::TAU);
        let m = h.inv_sqrt().mul(&Mat2::rotation(phi)).mul(&g.sqrt());
        worst = worst.max(LinMap2::new(m, g, h).distortion());
    }
    outcome(
        "linmap_rotation_distortion_zero",
        worst <= 1e-12,
        format!("1000 constructed members, worst distortion {worst:.3e}"),
    )
}

/// Clear-margin sampler for the brute-force oracles: singular values bounded
/// away from 1 keep the angular discretization error of the 720-sample
/// sweep below the comparison tolerance.
fn margin_map(rng: &mut CounterRng) -> LinMap2<f64> {
    let g = random_spd(rng);
    let h = random_spd(rng);
    let s1 = rng.range(1.4, 2.4);
    let s2 = rng.range(0.25, 0.75);
    framed_map_with_sigmas(rng, s1, s2, &g, &h)
}

pub fn linmap_distortion_oracle() -> CheckOutcome {
    let mut rng = CounterRng::new(SEED, 22);
    let mut worst = 0.0f64;
    for _ in 0..1_000 {
        let a = margin_map(&mut rng);
        worst = worst.max((a.distortion() - distortion_bruteforce(&a, 720)).abs());
    }
    outcome(
        "linmap_distortion_oracle",
        worst <= 1e-4,
        format!("1000 maps vs 720-sample sweep, worst gap {worst:.3e}"),
    )
}

pub fn linmap_hausdorff_identity() -> CheckOutcome {
    let mut rng = CounterRng::new(SEED, 23);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let l = margin_map(&mut rng);
        let sampled = so_set_hausdorff_oracle(&l, 720).expect("margin maps are invertible");
        worst = worst.max((sampled - l.op_dist_to_so()).abs());
    }
    outcome(
        "linmap_hausdorff_identity",
        worst <= 5e-3,
        format!("100 instances, worst |hausdorff - op_dist| {worst:.3e}"),
    )
}

pub fn linmap_composition_lipschitz() -> CheckOutcome {
    linmap_composition_lipschitz_sampled(1_000)
}

pub fn linmap_composition_lipschitz_sampled(samples: usize) -> CheckOutcome {
    let mut rng = CounterRng::new(SEED, 24);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let g = random_spd(&mut rng);
        let h = random_spd(&mut rng);
        let a_mat = random_mat(&mut rng, -2.2, 2.2);
        let s1 = rng.range(0.7, 1.4);
        let s2 = rng.range(0.7, 1.4);
        let l = framed_map_with_sigmas(&mut rng, s1, s2, &g, &h);

        let a = LinMap2::new(a_mat, h, InnerProduct2::euclidean());
        let pull = InnerProduct2::pullback(&l.matrix, &h).expect("invertible");
        let dist_comp = dist_to_so_set(&a_mat.mul(&l.matrix), &g, &pull);
        let dist_a = dist_to_so_set(&a_mat, &h, &h);
        let bound = (a.frobenius_norm() + 2.0) * l.distortion();
        worst = worst.max((dist_comp - dist_a).abs() - bound);
    }
    outcome(
        "linmap_composition_lipschitz",
        worst <= 1e-10,
        format!("{samples} triples, worst excess over (|A|+2) Dis L: {worst:.3e}"),
    )
}

pub fn linmap_isometry_invariance() -> CheckOutcome {
    let mut rng = CounterRng::new(SEED, 25);
    let mut worst = 0.0f64;
    for _ in 0..1_000 {
        let g2 = random_spd(&mut rng);
        let g = random_spd(&mut rng);
        let h = random_spd(&mut rng);
        let a = LinMap2::new(random_mat(&mut rng, -2.5, 2.5), g, h);
        let phi = rng.range(0.0, std::f64::consts::TAU);
        let q = g.inv_sqrt().mul(&Mat2::rotation(phi)).mul(&g2.sqrt());
        let aq = LinMap2::new(a.matrix.mul(&q), g2, h);
        worst = worst.max((aq.distortion() - a.distortion()).abs());
    }
    outcome(
        "linmap_isometry_invariance",
        worst <= 1e-12,
        format!("1000 precompositions, worst distortion drift {worst:.3e}"),
    )
}

pub fn linmap_checks() -> Vec<CheckOutcome> {
    vec![
        linmap_norm_sandwich(),
        linmap_rotation_distortion_zero(),
        linmap_distortion_oracle(),
        linmap_hausdorff_identity(),
        linmap_composition_lipschitz(),
        linmap_isometry_invariance(),
    ]
}

fn block_params() -> DislocationParams<f64> {
    DislocationParams { theta: 0.3, d: 0.05, block_size: 1.0 }
}

pub fn body_heron_matches_cross_product() -> CheckOutcome {
    let meshes: Vec<BodyMesh<f64>> = vec![
        flat_square(3, 1.0).unwrap(),
        cone_mesh(0.7, 1.0, 12).unwrap(),
        dislocation_block(&block_params(), 2).unwrap().mesh,
    ];
    let mut worst = 0.0f64;
    let mut tris = 0usize;
    for mesh in &meshes {
        for t in 0..mesh.triangle_count() {
            let p = flatten_triangle(&mesh.ref_lengths()[t]).unwrap();
            let cross = ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
                - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]))
                / 2.0;
            worst = worst.max((mesh.triangle_area(t) - cross).abs());
            tris += 1;
        }
    }
    outcome(
        "body_heron_matches_cross_product",
        worst <= 1e-12,
        format!("{tris} triangles over 3 meshes, worst |heron - cross/2| {worst:.3e}"),
    )
}

pub fn body_identity_morphism_zero() -> CheckOutcome {
    let mesh = dislocation_block(&block_params(), 2).unwrap().mesh;
    let s = morphism_stats(&mesh, &mesh).unwrap();
    let worst = s
        .sup_dis
        .max(s.mean_dis)
        .max(s.mean_dis_inverse)
        .max((s.bilip - 1.0).abs())
        .max(s.vol_ratio_dev)
        .max(s.global_dis);
    outcome(
        "body_identity_morphism_zero",
        worst <= 1e-12,
        format!("identity morphism on a dislocation block, worst field {worst:.3e}"),
    )
}

pub fn body_inverse_mean_trend() -> CheckOutcome {
    let mut stats: Vec<MorphismStats<f64>> = Vec::new();
    for n in [2usize, 4, 8] {
        let (mesh, limit) = dislocation_lattice(n, LatticeMode::MeanRegime, 0.3, 0.5).unwrap();
        stats.push(morphism_stats(&limit, &mesh).unwrap());
    }
    let mean: Vec<f64> = stats.iter().map(|s| s.mean_dis).collect();
    let inv: Vec<f64> = stats.iter().map(|s| s.mean_dis_inverse).collect();
    let bilip_ok = stats.iter().all(|s| s.bilip < 10.0);
    let dec = |xs: &[f64]| xs.windows(2).all(|w| w[1] < w[0]);
    outcome(
        "body_inverse_mean_trend",
        dec(&mean) && dec(&inv) && bilip_ok,
        format!(
            "mean_dis {}, mean_dis_inverse {}, bilip bounded {bilip_ok}",
            fmt_seq(&mean),
            fmt_seq(&inv)
        ),
    )
}

pub fn body_dipole_deficit_cancels() -> CheckOutcome {
    let mesh = dislocation_block(&block_params(), 2).unwrap().mesh;
    let mut total = 0.0f64;
    for v in 0..mesh.vertex_count() {
        if !mesh.is_boundary_vertex(v) {
            total += std::f64::consts::TAU - mesh.cone_angle(v).unwrap();
        }
    }
    outcome(
        "body_dipole_deficit_cancels",
        total.abs() <= 1e-10,
        format!("summed interior deficit {total:.3e}"),
    )
}

pub fn body_scaled_global_dis() -> CheckOutcome {
    let mesh = flat_square(4, 1.0f64).unwrap();
    let factor = 1.3;
    let lens = mesh
        .ref_lengths()
        .iter()
        .map(|l| [l[0] * factor, l[1] * factor, l[2] * factor])
        .collect();
    let target = BodyMesh::new(mesh.vertex_count(), mesh.triangles().to_vec(), lens).unwrap();
    let s = morphism_stats(&mesh, &target).unwrap();
    let mut diam = 0.0f64;
    for v in 0..mesh.vertex_count() {
        for d in mesh.graph_distances(v) {
            diam = diam.max(d);
        }
    }
    let err = (s.global_dis - (factor - 1.0) * diam).abs();
    outcome(
        "body_scaled_global_dis",
        err <= 1e-10,
        format!("scaled lengths x{factor}: |global_dis - 0.3 diam| = {err:.3e}"),
    )
}

pub fn body_checks() -> Vec<CheckOutcome> {
    vec![
        body_heron_matches_cross_product(),
        body_identity_morphism_zero(),
        body_inverse_mean_trend(),
        body_dipole_deficit_cancels(),
        body_scaled_global_dis(),
    ]
}

pub fn construct_generators_validate() -> CheckOutcome {
    let mut meshes: Vec<BodyMesh<f64>> = vec![
        flat_square(4, 1.0).unwrap(),
        cone_mesh(0.8, 1.0, 16).unwrap(),
        flat_disc(1.0, 16).unwrap(),
        dislocation_block(&block_params(), 2).unwrap().mesh,
        euclidean_triangulation(spherical_cap_phi::<f64>, 8).unwrap(),
    ];
    let (lat, limit) = dislocation_lattice(2, LatticeMode::UniformRegime, 0.3, 0.5).unwrap();
    meshes.push(lat);
    meshes.push(limit);
    // Rebuilding from parts re-runs every mesh invariant.
    let count = meshes.len();
    let ok = meshes.into_iter().all(|m| {
        BodyMesh::new(m.vertex_count(), m.triangles().to_vec(), m.ref_lengths().to_vec()).is_ok()
    });
    outcome(
        "construct_generators_validate",
        ok,
        format!("{count} generated meshes revalidated"),
    )
}

pub fn construct_block_gauss_bonnet() -> CheckOutcome {
    let mut worst = 0.0f64;
    for (theta, d, refinement) in [(0.3, 0.05, 1usize), (0.5, 0.1, 2), (0.15, 0.02, 3)] {
        let params = DislocationParams { theta, d, block_size: 1.0 };
        let mesh = dislocation_block(&params, refinement).unwrap().mesh;
        let mut total = 0.0f64;
        for v in 0..mesh.vertex_count() {
            if !mesh.is_boundary_vertex(v) {
                total += std::f64::consts::TAU - mesh.cone_angle(v).unwrap();
            }
        }
        worst = worst.max(total.abs());
    }
    outcome(
        "construct_block_gauss_bonnet",
        worst <= 1e-10,
        format!("3 parameter sets, worst total deficit {worst:.3e}"),
    )
}

pub fn construct_burgers_conservation() -> CheckOutcome {
    let b0 = 2.0 * 0.3f64.sin();
    let mut worst = 0.0f64;
    for mode in [LatticeMode::MeanRegime, LatticeMode::UniformRegime] {
        for n in [1usize, 2, 4, 8] {
            let params = lattice_schedule(n, mode, 0.3, 0.5).unwrap();
            let total = (n * n) as f64 * params.burgers();
            worst = worst.max((total - b0).abs());
        }
    }
    outcome(
        "construct_burgers_conservation",
        worst <= 1e-9,
        format!("both regimes, n up to 8: worst |sum - b0| {worst:.3e}"),
    )
}

pub fn construct_defect_first_order() -> CheckOutcome {
    let d8 = max_interior_defect(&euclidean_triangulation(spherical_cap_phi::<f64>, 8).unwrap());
    let d16 = max_interior_defect(&euclidean_triangulation(spherical_cap_phi::<f64>, 16).unwrap());
    let d32 = max_interior_defect(&euclidean_triangulation(spherical_cap_phi::<f64>, 32).unwrap());
    let ok = d8 >= 2.0 * d16 && d16 >= 2.0 * d32;
    outcome(
        "construct_defect_first_order",
        ok,
        format!("max defect {d8:.3e} -> {d16:.3e} -> {d32:.3e}"),
    )
}

pub fn construct_holonomy_composition() -> CheckOutcome {
    let block = dislocation_block(&block_params(), 1).unwrap();
    let mut worst = 0.0f64;

    let mut loops: Vec<Vec<usize>> = vec![block.dipole_loop.clone()];
    loops.push(vertex_loop(&block.mesh, block.p_minus).unwrap());
    for lp in loops {
        let h1 = holonomy(&block.mesh, &lp).unwrap();
        let doubled: Vec<usize> = lp.iter().chain(lp.iter()).copied().collect();
        let h2 = holonomy(&block.mesh, &doubled).unwrap();

        let wrap = |x: f64| x.sin().atan2(x.cos());
        worst = worst.max(wrap(h2.rotation_angle - 2.0 * h1.rotation_angle).abs());
        let (c, s) = (h1.rotation_angle.cos(), h1.rotation_angle.sin());
        let tx = c * h1.translation[0] - s * h1.translation[1] + h1.translation[0];
        let ty = s * h1.translation[0] + c * h1.translation[1] + h1.translation[1];
        worst = worst.max((h2.translation[0] - tx).abs()).max((h2.translation[1] - ty).abs());
    }
    outcome(
        "construct_holonomy_composition",
        worst <= 1e-10,
        format!("dipole and fan loops traversed twice, worst composition error {worst:.3e}"),
    )
}

pub fn construct_dipole_burgers() -> CheckOutcome {
    let sets: [(f64, f64); 5] =
        [(0.3, 0.05), (0.2, 0.08), (0.45, 0.03), (0.6, 0.12), (0.1, 0.2)];
    let mut worst = 0.0f64;
    for (theta, d) in sets {
        let params = DislocationParams { theta, d, block_size: 1.0 };
        let block = dislocation_block(&params, 1).unwrap();
        let h = holonomy(&block.mesh, &block.dipole_loop).unwrap();
        let mag = h.translation[0].hypot(h.translation[1]);
        worst = worst.max(h.rotation_angle.abs()).max((mag - params.burgers()).abs());
    }
    outcome(
        "construct_dipole_burgers",
        worst <= 1e-10,
        format!("5 parameter sets, worst holonomy deviation {worst:.3e}"),
    )
}

pub fn constructions_checks() -> Vec<CheckOutcome> {
    vec![
        construct_generators_validate(),
        construct_block_gauss_bonnet(),
        construct_burgers_conservation(),
        construct_defect_first_order(),
        construct_holonomy_composition(),
        construct_dipole_burgers(),
    ]
}

pub fn energy_isotropy() -> CheckOutcome {
    let mut rng = CounterRng::new(SEED, 40);
    let mut worst = 0.0f64;
    for k in 0..1_000 {
        let p = [2.0, 3.0, 2.5][k % 3];
        let settings = EnergySettings { p, ..EnergySettings::default() };
        let a_mat = random_mat(&mut rng, -2.5, 2.5);
        let a = LinMap2::euclidean(a_mat);
        let w = density(&a, &settings);
        let q = Mat2::rotation(rng.range(0.0, std::f64::consts::TAU));
        let qp = Mat2::rotation(rng.range(0.0, std::f64::consts::TAU));
        let wr = density(&LinMap2::euclidean(a_mat.mul(&q)), &settings);
        let wl = density(&LinMap2::euclidean(qp.mul(&a_mat)), &settings);
        worst = worst.max((wr - w).abs()).max((wl - w).abs());
    }
    outcome(
        "energy_isotropy",
        worst <= 1e-12,
        format!("1000 samples at p in {{2, 2.5, 3}}, worst drift {worst:.3e}"),
    )
}

/// Mesh whose reference lengths come from a jittered planar grid; always a
/// valid body, with enough irregularity that gradients stay order one.
fn jittered_grid_mesh(rng: &mut CounterRng, n: usize) -> (BodyMesh<f64>, Configuration<f64>) {
    let flat = flat_square(n, 1.0f64).unwrap();
    let amp = 0.1 / n as f64;
    let node = |rng: &mut CounterRng, i: usize, j: usize| {
        [
            i as f64 / n as f64 + rng.range(-amp, amp),
            j as f64 / n as f64 + rng.range(-amp, amp),
        ]
    };
    let mut ref_pos = Vec::with_capacity((n + 1) * (n + 1));
    let mut cfg_pos = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            ref_pos.push(node(rng, i, j));
            cfg_pos.push(node(rng, i, j));
        }
    }
    let lens = flat
        .triangles()
        .iter()
        .map(|tri| {
            let e = |a: usize, b: usize| {
                let (p, q) = (ref_pos[tri[a]], ref_pos[tri[b]]);
                (p[0] - q[0]).hypot(p[1] - q[1])
            };
            [e(0, 1), e(1, 2), e(2, 0)]
        })
        .collect();
    let mesh = BodyMesh::new(flat.vertex_count(), flat.triangles().to_vec(), lens).unwrap();
    (mesh, Configuration::new(cfg_pos))
}

pub fn energy_gradient_finite_difference() -> CheckOutcome {
    let mut rng = CounterRng::new(SEED, 41);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let n = 2 + k % 3;
        let p = [2.0, 3.0, 4.0][k % 3];
        let settings = EnergySettings { p, ..EnergySettings::default() };
        let (mesh, u) = jittered_grid_mesh(&mut rng, n);
        let grad = total_gradient(&mesh, &u, &settings).unwrap();

        let h = 1e-6;
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for v in 0..u.len() {
            for c in 0..2 {
                let mut up = u.clone();
                let mut dn = u.clone();
                up.positions[v][c] += h;
                dn.positions[v][c] -= h;
                let fd = (energy_value(&mesh, &up, &settings)
                    - energy_value(&mesh, &dn, &settings))
                    / (2.0 * h);
                num += (grad[v][c] - fd).powi(2);
                den += grad[v][c].powi(2);
            }
        }
        worst = worst.max((num / den).sqrt());
    }
    outcome(
        "energy_gradient_finite_difference",
        worst <= 1e-5,
        format!("100 mesh/configuration pairs at p in {{2,3,4}}, worst relative error {worst:.3e}"),
    )
}

/// Positions on the dyadic grid `2^-26 Z` make the shifted coordinates
/// exact, which is the regime where bit-identical totals are a theorem
/// rather than luck.
pub fn energy_translation_bit_exact() -> CheckOutcome {
    let mut rng = CounterRng::new(SEED, 42);
    let mesh = flat_square(3, 1.0f64).unwrap();
    let quant = |x: f64| (x * (1u64 << 26) as f64).round() / (1u64 << 26) as f64;
    let pos: Vec<[f64; 2]> = (0..mesh.vertex_count())
        .map(|v| {
            let i = v % 4;
            let j = v / 4;
            [
                quant(i as f64 / 3.0 + rng.range(-0.05, 0.05)),
                quant(j as f64 / 3.0 + rng.range(-0.05, 0.05)),
            ]
        })
        .collect();
    let u = Configuration::new(pos.clone());
    let shifted =
        Configuration::new(pos.iter().map(|p| [p[0] + 3.25, p[1] - 1.5]).collect());
    let settings = EnergySettings::default();
    let e0 = energy_value(&mesh, &u, &settings);
    let e1 = energy_value(&mesh, &shifted, &settings);
    outcome(
        "energy_translation_bit_exact",
        e0.to_bits() == e1.to_bits(),
        format!("dyadic layout shifted by (3.25, -1.5): {e0:.17e} vs {e1:.17e}"),
    )
}

pub fn energy_rotation_invariance() -> CheckOutcome {
    let mut rng = CounterRng::new(SEED, 43);
    let mesh = flat_square(3, 1.0f64).unwrap();
    let (_, u) = {
        let mut r2 = CounterRng::new(SEED, 44);
        jittered_grid_mesh(&mut r2, 3)
    };
    let settings = EnergySettings::default();
    let e0 = energy_value(&mesh, &u, &settings);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let phi = rng.range(0.0, std::f64::consts::TAU);
        let (c, s) = (phi.cos(), phi.sin());
        let rot = Configuration::new(
            u.positions
                .iter()
                .map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1]])
                .collect(),
        );
        worst = worst.max((energy_value(&mesh, &rot, &settings) - e0).abs());
    }
    outcome(
        "energy_rotation_invariance",
        worst <= 1e-12,
        format!("20 sampled rotations, worst energy drift {worst:.3e}"),
    )
}

pub fn energy_zero_set() -> CheckOutcome {
    let n = 3usize;
    let mesh = flat_square(n, 1.0f64).unwrap();
    let settings = EnergySettings::default();
    let grid: Vec<[f64; 2]> = (0..=n)
        .flat_map(|j| (0..=n).map(move |i| [i as f64 / n as f64, j as f64 / n as f64]))
        .collect();
    let flat = Configuration::new(grid.clone());
    let (c, s) = (0.7f64.cos(), 0.7f64.sin());
    let moved = Configuration::new(
        grid.iter().map(|p| [c * p[0] - s * p[1] + 2.0, s * p[0] + c * p[1] - 1.0]).collect(),
    );
    let mut rng = CounterRng::new(SEED, 45);
    let bent = Configuration::new(
        grid.iter().map(|p| [p[0] + rng.range(-0.04, 0.04), p[1] + rng.range(-0.04, 0.04)]).collect(),
    );

    let e_flat = total_energy(&mesh, &flat, &settings).unwrap();
    let e_moved = total_energy(&mesh, &moved, &settings).unwrap();
    let e_bent = total_energy(&mesh, &bent, &settings).unwrap();
    let rigid_ok = e_flat.total <= 1e-10 && e_moved.total <= 1e-10;
    let all_rotations = |u: &Configuration<f64>| {
        (0..mesh.triangle_count())
            .all(|t| crate::body::deformation_gradient(&mesh, u, t).is_special_isometry(1e-10))
    };
    let iff_ok = all_rotations(&flat) && all_rotations(&moved)
        && e_bent.total > 1e-10
        && !all_rotations(&bent);
    outcome(
        "energy_zero_set",
        rigid_ok && iff_ok,
        format!(
            "rigid layouts {:.1e}/{:.1e}, perturbed layout {:.3e}",
            e_flat.total, e_moved.total, e_bent.total
        ),
    )
}

pub fn energy_p_regularity() -> CheckOutcome {
    let mut ok = true;
    let mut detail = String::new();
    for p in [2.0f64, 4.0] {
        let settings = EnergySettings { p, ..EnergySettings::default() };
        let rep = p_regularity_check(10_000, &settings).unwrap();
        ok &= rep.coercivity_ok && rep.boundedness_ok && rep.metric_lipschitz_ok;
        detail.push_str(&format!(
            "p={p}: margins {:.2e}/{:.2e}/{:.2e}; ",
            rep.coercivity_margin, rep.boundedness_margin, rep.metric_lipschitz_margin
        ));
    }
    detail.push_str("10000 samples each");
    outcome("energy_p_regularity", ok, detail)
}

pub fn energy_checks() -> Vec<CheckOutcome> {
    vec![
        energy_isotropy(),
        energy_gradient_finite_difference(),
        energy_translation_bit_exact(),
        energy_rotation_invariance(),
        energy_zero_set(),
        energy_p_regularity(),
    ]
}

/// Options used by the experiment-grade checks: default tolerances with
/// head-room on the iteration cap so every level runs to the gradient
/// tolerance.
pub fn experiment_options() -> SolveOptions<f64> {
    SolveOptions { max_iters: 20_000, seed: 1, ..SolveOptions::default() }
}

/// The uniform-regime lattice experiment shared by the solver checks and
/// the acceptance gate: theta0 = 0.3, epsilon = 0.5, n = 2, 4, 8, 16.
pub fn uniform_lattice_experiment() -> SequenceResult<f64> {
    gamma_experiment(
        &SequenceGenerator::LatticeUniform { theta0: 0.3, epsilon: 0.5 },
        &[2, 4, 8, 16],
        &EnergySettings::default(),
        &experiment_options(),
        false,
    )
    .expect("lattice experiment")
}

/// Mean-regime companion of [`uniform_lattice_experiment`] with the same
/// schedule parameters and levels.
pub fn mean_lattice_experiment() -> SequenceResult<f64> {
    gamma_experiment(
        &SequenceGenerator::LatticeMean { theta0: 0.3, epsilon: 0.5 },
        &[2, 4, 8, 16],
        &EnergySettings::default(),
        &experiment_options(),
        false,
    )
    .expect("lattice experiment")
}

pub fn solve_mean_zero_gauge() -> CheckOutcome {
    let mesh = flat_square(4, 1.0f64).unwrap();
    let u0 = initial_configuration(&mesh, 3).unwrap();
    let res = minimize(&mesh, &u0, &EnergySettings::default(), &SolveOptions::default()).unwrap();
    let third = 1.0 / 3.0;
    let mut w = vec![0.0f64; mesh.vertex_count()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for &v in tri {
            w[v] += mesh.triangle_area(t) * third;
        }
    }
    let mut cx = 0.0;
    let mut cy = 0.0;
    for (v, p) in res.configuration.positions.iter().enumerate() {
        cx += w[v] * p[0];
        cy += w[v] * p[1];
    }
    outcome(
        "solve_mean_zero_gauge",
        cx.abs() <= 1e-12 && cy.abs() <= 1e-12,
        format!("minimizer centroid ({cx:.3e}, {cy:.3e})"),
    )
}

pub fn solve_armijo_from_log() -> CheckOutcome {
    let mesh = flat_square(4, 1.0f64).unwrap();
    let u0 = initial_configuration(&mesh, 7).unwrap();
    let opts = SolveOptions::default();
    let res = minimize(&mesh, &u0, &EnergySettings::default(), &opts).unwrap();
    let mut worst = f64::NEG_INFINITY;
    for w in res.trace.windows(2) {
        let decrease = w[0].energy - w[1].energy;
        let promised = opts.armijo_c * w[0].step * w[0].grad_norm.powi(2);
        worst = worst.max(promised - decrease);
    }
    outcome(
        "solve_armijo_from_log",
        worst <= 1e-12,
        format!("{} iterations, worst promised-minus-achieved {worst:.3e}", res.iterations),
    )
}

pub fn solve_determinism() -> CheckOutcome {
    let run = || {
        gamma_experiment(
            &SequenceGenerator::LatticeUniform { theta0: 0.3, epsilon: 0.5 },
            &[2, 4],
            &EnergySettings::default(),
            &experiment_options(),
            false,
        )
        .expect("lattice experiment")
    };
    let a = run();
    let b = run();
    let same = a.rows.len() == b.rows.len()
        && a.rows.iter().zip(&b.rows).all(|(x, y)| {
            let f = |v: f64, w: f64| v.to_bits() == w.to_bits();
            x.n == y.n
                && f(x.min_energy, y.min_energy)
                && f(x.grad_norm, y.grad_norm)
                && f(x.minimizer_lp_dist, y.minimizer_lp_dist)
                && f(x.limit_min_energy, y.limit_min_energy)
                && f(x.stats.sup_dis, y.stats.sup_dis)
                && f(x.stats.mean_dis, y.stats.mean_dis)
                && f(x.stats.mean_dis_inverse, y.stats.mean_dis_inverse)
                && f(x.stats.bilip, y.stats.bilip)
                && f(x.stats.vol_ratio_dev, y.stats.vol_ratio_dev)
                && f(x.stats.global_dis, y.stats.global_dis)
        });
    outcome(
        "solve_determinism",
        same,
        "two identical lattice runs compared field-by-field at the bit level".to_string(),
    )
}

pub fn solve_uniform_energy_proxy(seq: &SequenceResult<f64>) -> CheckOutcome {
    let energies: Vec<f64> = seq.rows.iter().map(|r| r.min_energy).collect();
    let non_increasing = energies.windows(2).all(|w| w[1] <= w[0] + 1e-10);
    let ratio = energies.last().unwrap() / energies[0];
    outcome(
        "solve_uniform_energy_proxy",
        non_increasing && ratio < 1e-4,
        format!(
            "min_energy {}, final/initial {ratio:.3e} (required < 1e-4)",
            fmt_seq(&energies)
        ),
    )
}

pub fn solve_lp_dist_trend(seq: &SequenceResult<f64>) -> CheckOutcome {
    let lp: Vec<f64> = seq.rows.iter().map(|r| r.minimizer_lp_dist).collect();
    let tail = &lp[lp.len() - 3..];
    let ok = tail.windows(2).all(|w| w[1] < w[0]);
    outcome(
        "solve_lp_dist_trend",
        ok,
        format!("minimizer_lp_dist {}, final three decreasing {ok}", fmt_seq(&lp)),
    )
}

pub fn solve_checks() -> Vec<CheckOutcome> {
    let mut out = vec![solve_mean_zero_gauge(), solve_armijo_from_log(), solve_determinism()];
    let seq = uniform_lattice_experiment();
    out.push(solve_uniform_energy_proxy(&seq));
    out.push(solve_lp_dist_trend(&seq));
    out
}

/// Every named check in module order. One outcome is expected to fail on
/// current hardware-scale experiments: `solve_uniform_energy_proxy`
/// demands a four-decade energy drop that the n = 16 lattice cannot
/// physically deliver; its detail line carries the measured ratio.
pub fn run_all() -> Vec<CheckOutcome> {
    let mut out = linmap_checks();
    out.extend(body_checks());
    out.extend(constructions_checks());
    out.extend(energy_checks());
    out.extend(solve_checks());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outcome_lines_render_with_tags() {
        let ok = outcome("demo", true, "worst 1.0e-15".to_string());
        assert_eq!(format!("{ok}"), "PASS demo: worst 1.0e-15");
        let bad = outcome("demo", false, "worst 2.0".to_string());
        assert!(format!("{bad}").starts_with("FAIL demo"));
    }

    #[test]
    fn cheap_checks_pass() {
        for c in [
            linmap_norm_sandwich(),
            linmap_rotation_distortion_zero(),
            body_heron_matches_cross_product(),
            construct_burgers_conservation(),
            energy_translation_bit_exact(),
        ] {
            assert!(c.passed, "{c}");
        }
    }

    #[test]
    fn margin_maps_have_clear_margin() {
        let mut rng = CounterRng::new(9, 1);
        for _ in 0..50 {
            let a = margin_map(&mut rng);
            assert!(a.distortion() > 0.45);
            assert!(a.matrix.det() > 0.0);
        }
    }
}
