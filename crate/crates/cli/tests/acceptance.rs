//! Acceptance gate. Each test pins one numbered requirement with its
//! tolerances and wall-clock budget in code, prints a single verdict line,
//! and fails if the requirement or the budget is missed. Run with
//! `--nocapture` to see the verdict lines for passing criteria too.

use std::process::Command;
use std::time::{Duration, Instant};

use frustra::body::{classify_convergence, deformation_gradient, ClassifyThresholds, ConvergenceClass};
use frustra::checks;
use frustra::constructions::{euclidean_triangulation, flat_square, max_interior_defect, spherical_cap_phi};
use frustra::energy::EnergySettings;
use frustra::solve::{gamma_experiment, initial_configuration, minimize, SequenceGenerator, SolveOptions};

const BUDGET_1: Duration = Duration::from_secs(5);
const BUDGET_2: Duration = Duration::from_secs(30);
const BUDGET_3: Duration = Duration::from_secs(30);
const BUDGET_4: Duration = Duration::from_secs(60);
const BUDGET_5: Duration = Duration::from_secs(10);
const BUDGET_6: Duration = Duration::from_secs(60);
const BUDGET_7: Duration = Duration::from_secs(900);
const BUDGET_8: Duration = Duration::from_secs(900);
const BUDGET_9: Duration = Duration::from_secs(600);
const BUDGET_10: Duration = Duration::from_secs(1800);

const FLAT_ENERGY_TOL: f64 = 1e-10;
const FLAT_DIS_TOL: f64 = 1e-5;
const FLAT_SEEDS: [u64; 3] = [1, 7, 42];
const UNIFORM_RATE: f64 = 1e-4;
const MEAN_SUP_FLOOR: f64 = 0.5;
const SLACK_TOL: f64 = 1e-6;
const DEFECT_HALVING: f64 = 2.0;

fn conclude(criterion: u32, name: &str, budget: Duration, started: Instant, passed: bool, detail: &str) {
    let elapsed = started.elapsed();
    let in_budget = elapsed <= budget;
    let verdict = if passed && in_budget { "PASS" } else { "FAIL" };
    println!("criterion {criterion} ({name}): {verdict}: {detail} [{elapsed:.2?} of {budget:?}]");
    assert!(in_budget, "criterion {criterion} took {elapsed:.2?}, budget {budget:?}");
    assert!(passed, "criterion {criterion}: {detail}");
}

fn fmt_seq(xs: &[f64]) -> String {
    let inner: Vec<String> = xs.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", inner.join(", "))
}

fn decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

#[test]
fn criterion_01_distortion_against_dense_rotation_scan() {
    let started = Instant::now();
    let out = checks::linmap_distortion_oracle();
    conclude(1, "distortion oracle", BUDGET_1, started, out.passed, &out.detail);
}

#[test]
fn criterion_02_hausdorff_oracle_matches_operator_distance() {
    let started = Instant::now();
    let out = checks::linmap_hausdorff_identity();
    conclude(2, "hausdorff identity", BUDGET_2, started, out.passed, &out.detail);
}

#[test]
fn criterion_03_lipschitz_bounds_hold_on_large_samples() {
    let started = Instant::now();
    let comp = checks::linmap_composition_lipschitz_sampled(10_000);
    let preg = checks::energy_p_regularity();
    let detail = format!("{}; {}", comp.detail, preg.detail);
    conclude(3, "lipschitz bounds", BUDGET_3, started, comp.passed && preg.passed, &detail);
}

#[test]
fn criterion_04_gradient_matches_finite_differences() {
    let started = Instant::now();
    let out = checks::energy_gradient_finite_difference();
    conclude(4, "gradient check", BUDGET_4, started, out.passed, &out.detail);
}

#[test]
fn criterion_05_dipole_holonomy_is_a_pure_translation() {
    let started = Instant::now();
    let out = checks::construct_dipole_burgers();
    conclude(5, "dipole holonomy", BUDGET_5, started, out.passed, &out.detail);
}

#[test]
fn criterion_06_flat_body_minimizes_to_rigid_motion() {
    let started = Instant::now();
    let mesh = flat_square(8, 1.0).unwrap();
    let settings = EnergySettings::default();
    let mut worst_energy = 0.0f64;
    let mut worst_dis = 0.0f64;
    for seed in FLAT_SEEDS {
        let opts = SolveOptions { seed, ..SolveOptions::default() };
        let u0 = initial_configuration(&mesh, seed).unwrap();
        let res = minimize(&mesh, &u0, &settings, &opts).unwrap();
        worst_energy = worst_energy.max(res.report.total);
        for t in 0..mesh.triangle_count() {
            worst_dis = worst_dis.max(deformation_gradient(&mesh, &res.configuration, t).distortion());
        }
    }
    let passed = worst_energy <= FLAT_ENERGY_TOL && worst_dis <= FLAT_DIS_TOL;
    let detail = format!(
        "{} jittered starts, worst energy {worst_energy:.3e} (tol {FLAT_ENERGY_TOL:.0e}), \
         worst triangle distortion {worst_dis:.3e} (tol {FLAT_DIS_TOL:.0e})",
        FLAT_SEEDS.len()
    );
    conclude(6, "flat minimizer", BUDGET_6, started, passed, &detail);
}

#[test]
fn criterion_07_uniform_regime_energy_decay_and_classification() {
    let started = Instant::now();
    let seq = checks::uniform_lattice_experiment();
    let e: Vec<f64> = seq.rows.iter().map(|r| r.min_energy).collect();
    let lp: Vec<f64> = seq.rows.iter().map(|r| r.minimizer_lp_dist).collect();
    let sup: Vec<f64> = seq.rows.iter().map(|r| r.stats.sup_dis).collect();
    let stats: Vec<_> = seq.rows.iter().map(|r| r.stats).collect();
    let class = classify_convergence(&stats, &ClassifyThresholds::default()).unwrap();

    let energy_decreasing = decreasing(&e);
    let rate = e.last().unwrap() / e[0];
    let rate_met = rate < UNIFORM_RATE;
    let lp_tail_decreasing = decreasing(&lp[lp.len() - 3..]);
    let sup_decreasing = decreasing(&sup);
    let class_ok = class == ConvergenceClass::Uniform;

    let passed = energy_decreasing && rate_met && lp_tail_decreasing && sup_decreasing && class_ok;
    let detail = format!(
        "min_energy {} decreasing={energy_decreasing}, final/first {rate:.3e} (need < {UNIFORM_RATE:.0e}) \
         met={rate_met}, lp {} tail-decreasing={lp_tail_decreasing}, sup {} decreasing={sup_decreasing}, \
         class {class}",
        fmt_seq(&e),
        fmt_seq(&lp),
        fmt_seq(&sup)
    );
    conclude(7, "uniform regime", BUDGET_7, started, passed, &detail);
}

#[test]
fn criterion_08_mean_regime_statistics_and_upper_bound() {
    let started = Instant::now();
    let seq = checks::mean_lattice_experiment();
    let mean: Vec<f64> = seq.rows.iter().map(|r| r.stats.mean_dis).collect();
    let mean_inv: Vec<f64> = seq.rows.iter().map(|r| r.stats.mean_dis_inverse).collect();
    let sup: Vec<f64> = seq.rows.iter().map(|r| r.stats.sup_dis).collect();
    let slack: Vec<f64> = seq.rows.iter().map(|r| r.min_energy - r.limit_min_energy).collect();
    let stats: Vec<_> = seq.rows.iter().map(|r| r.stats).collect();
    let class = classify_convergence(&stats, &ClassifyThresholds::default()).unwrap();

    let mean_decreasing = decreasing(&mean);
    let mean_inv_decreasing = decreasing(&mean_inv);
    let sup_stays = *sup.last().unwrap() >= MEAN_SUP_FLOOR * sup[0];
    let class_ok = class == ConvergenceClass::Mean;
    let slack_monotone = slack.windows(2).all(|w| w[1] <= w[0] + SLACK_TOL);

    let passed = mean_decreasing && mean_inv_decreasing && sup_stays && class_ok && slack_monotone;
    let detail = format!(
        "mean_dis {} decreasing={mean_decreasing}, mean_dis_inv {} decreasing={mean_inv_decreasing}, \
         sup {} floor-respected={sup_stays}, class {class}, upper-bound slack {} monotone within \
         {SLACK_TOL:.0e}={slack_monotone}",
        fmt_seq(&mean),
        fmt_seq(&mean_inv),
        fmt_seq(&sup),
        fmt_seq(&slack)
    );
    conclude(8, "mean regime", BUDGET_8, started, passed, &detail);
}

#[test]
fn criterion_09_cap_refinement_flattens_defect_and_energy_gap() {
    let started = Instant::now();
    let mut defects = Vec::new();
    for n in [8usize, 16, 32] {
        let mesh = euclidean_triangulation(spherical_cap_phi::<f64>, n).unwrap();
        defects.push(max_interior_defect(&mesh));
    }
    let halving = defects.windows(2).all(|w| w[0] / w[1] >= DEFECT_HALVING);

    let seq = gamma_experiment(
        &SequenceGenerator::SphericalCap,
        &[8, 16, 32, 64],
        &EnergySettings::default(),
        &checks::experiment_options(),
        false,
    )
    .unwrap();
    let e: Vec<f64> = seq.rows.iter().map(|r| r.min_energy).collect();
    let reference = *e.last().unwrap();
    let gaps: Vec<f64> = e[..e.len() - 1].iter().map(|x| (x - reference).abs()).collect();
    let gaps_decreasing = decreasing(&gaps);

    let passed = halving && gaps_decreasing;
    let detail = format!(
        "defects {} halving={halving}, |E(n) - E(64)| {} decreasing={gaps_decreasing}",
        fmt_seq(&defects),
        fmt_seq(&gaps)
    );
    conclude(9, "cap refinement", BUDGET_9, started, passed, &detail);
}

#[test]
fn criterion_10_converge_output_is_bit_stable_across_threads() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("seq.toml"),
        "[generator]\nkind = \"lattice-uniform\"\ntheta0 = 0.3\nepsilon = 0.5\n\n\
         [experiment]\nn_list = [2, 4]\nout = \"seq.csv\"\n",
    )
    .unwrap();
    let mut reference: Option<Vec<u8>> = None;
    let mut runs = 0usize;
    let mut stable = true;
    for threads in ["1", "2", "4"] {
        for _ in 0..3 {
            let out = Command::new(env!("CARGO_BIN_EXE_frustra"))
                .current_dir(dir.path())
                .args(["--threads", threads, "converge", "--config", "seq.toml"])
                .output()
                .expect("spawn frustra");
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
            let bytes = std::fs::read(dir.path().join("seq.csv")).unwrap();
            match &reference {
                None => reference = Some(bytes),
                Some(r) => stable &= *r == bytes,
            }
            runs += 1;
        }
    }
    let detail = format!("{runs} runs across --threads 1/2/4, byte-identical={stable}");
    conclude(10, "thread-stable output", BUDGET_10, started, stable, &detail);
}
