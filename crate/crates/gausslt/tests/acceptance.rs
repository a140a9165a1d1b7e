//! End-to-end acceptance suite. Each test prints one `criterion N: PASS/FAIL`
//! line (run with `--nocapture` to see them on success).

use gausslt::covariance::{probe_p2, CovarianceModel};
use gausslt::heatkernel::{heat_kernel_deriv, MultiIndex};
use gausslt::lemma_kernels::{
    lemma1_closed, lemma2_closed, oracle_quad2d, sample_problem, CrossKernelParams, OracleProblem,
    QuadKernelParams,
};
use gausslt::moments::{second_moment_at_zero, second_moment_general, FieldSpec, QuadPlan};
use gausslt::pathsim::{mc_moments, PathGrid};
use gausslt::ratelab::{
    exists_in_l2, fit_slope, sweep, x_shape_probe, RateSpec, SweepOptions,
};
use gausslt::quad::{gauss_legendre, Mesh1d};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn report(n: usize, ok: bool, detail: &str) {
    println!(
        "criterion {n}: {} — {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
}

fn tight_plan() -> QuadPlan {
    QuadPlan {
        rel_tol: 2e-4,
        g_increment: 8,
        g_base: 8,
        max_refinements: 3,
    }
}

fn fbm_field(h1: f64, h2: f64, d: usize, k: Vec<u32>, x: Vec<f64>, eps: f64) -> FieldSpec {
    FieldSpec::new(
        CovarianceModel::fbm(h1).unwrap(),
        CovarianceModel::fbm(h2).unwrap(),
        d,
        MultiIndex::new(k),
        1.0,
        x,
        eps,
    )
    .unwrap()
}

#[test]
fn criterion_01_lemma_oracle_equivalence() {
    let mut rng = ChaCha12Rng::seed_from_u64(0x5EED);
    let mut max_relerr = 0.0f64;
    for kind in 1u8..=3 {
        for _ in 0..200 {
            let problem = sample_problem(kind, &mut rng).unwrap();
            let closed = problem.closed();
            let oracle = oracle_quad2d(&problem).unwrap();
            let relerr = (closed - oracle).abs() / oracle.abs().max(1e-12);
            max_relerr = max_relerr.max(relerr);
        }
    }
    let ok = max_relerr <= 1e-6;
    report(1, ok, &format!("max closed-vs-oracle relerr {max_relerr:.3e} (600 draws)"));
    assert!(ok);
}

#[test]
fn criterion_02_cross_form_degeneration() {
    let mut rng = ChaCha12Rng::seed_from_u64(0x5EED ^ 2);
    let mut max_relerr = 0.0f64;
    for _ in 0..50 {
        let single = match sample_problem(1, &mut rng).unwrap() {
            OracleProblem::L1(p) => p,
            _ => unreachable!(),
        };
        let QuadKernelParams { a, b, c, eps, x, k, .. } = single;
        let cross =
            CrossKernelParams::new(a, b, c, 0.0, 0.0, 0.0, eps, x, k).unwrap();
        let relerr = (lemma2_closed(&cross) - lemma1_closed(&single)).abs()
            / lemma1_closed(&single).abs().max(1e-12);
        max_relerr = max_relerr.max(relerr);
    }
    let ok = max_relerr <= 1e-12;
    report(2, ok, &format!("max degeneration relerr {max_relerr:.3e} (50 draws)"));
    assert!(ok);
}

/// Direct numerical evaluation of the defining Fourier integral
/// p_eps^(k)(x) = (2 pi)^{-1} int xi^k cos(xi x + k pi/2) e^{-eps xi^2/2} dxi.
fn fourier_kernel_deriv(x: f64, eps: f64, k: u32) -> f64 {
    let radius = 12.0 / eps.sqrt();
    let rule = gauss_legendre(40);
    let mesh = Mesh1d::uniform(-radius, radius, 24);
    let phase = k as f64 * std::f64::consts::FRAC_PI_2;
    let mut total = 0.0;
    for win in mesh.edges.windows(2) {
        let half = 0.5 * (win[1] - win[0]);
        let mid = 0.5 * (win[0] + win[1]);
        for &(u, w) in &rule {
            let xi = mid + half * u;
            total += half
                * w
                * xi.powi(k as i32)
                * (xi * x + phase).cos()
                * (-0.5 * eps * xi * xi).exp();
        }
    }
    total / (2.0 * std::f64::consts::PI)
}

#[test]
fn criterion_03_heat_kernel_fourier_consistency() {
    let mut rng = ChaCha12Rng::seed_from_u64(0x5EED ^ 3);
    let mut max_relerr = 0.0f64;
    for k in 0u32..=3 {
        for _ in 0..20 {
            let x: f64 = rng.gen_range(0.2..1.5) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let eps: f64 = rng.gen_range(0.1..1.0);
            let hermite = heat_kernel_deriv(&[x], eps, &MultiIndex::new(vec![k])).unwrap();
            let fourier = fourier_kernel_deriv(x, eps, k);
            let relerr = (hermite - fourier).abs() / fourier.abs().max(1e-12);
            max_relerr = max_relerr.max(relerr);
        }
    }
    let ok = max_relerr <= 1e-6;
    report(3, ok, &format!("max Hermite-vs-Fourier relerr {max_relerr:.3e} (80 draws)"));
    assert!(ok);
}

#[test]
fn criterion_04_cross_formula_moment_consistency() {
    let plan = tight_plan();
    let mut max_relerr = 0.0f64;
    for eps in [0.2, 0.1, 0.05] {
        let spec = fbm_field(0.5, 0.5, 1, vec![0], vec![0.0], eps);
        let general = second_moment_general(&spec, &plan).unwrap().value;
        let at_zero = second_moment_at_zero(&spec, &plan).unwrap().value;
        max_relerr = max_relerr.max((general - at_zero).abs() / at_zero);
    }
    let ok = max_relerr <= 2e-3;
    report(4, ok, &format!("max general-vs-at-zero relerr {max_relerr:.3e}"));
    assert!(ok);
}

#[test]
fn criterion_05_mc_vs_quadrature() {
    let spec = fbm_field(0.5, 0.5, 1, vec![0], vec![0.0], 0.1);
    let quad = second_moment_at_zero(&spec, &tight_plan()).unwrap().value;
    let grid = PathGrid::new(256, 1.0).unwrap();
    let mc = mc_moments(&spec, &grid, 2000, 0x5EED).unwrap();
    let gap = (mc.second_moment - quad).abs();
    let ok = gap <= 3.0 * mc.stderr_second_moment;
    report(
        5,
        ok,
        &format!(
            "|MC {:.6e} - QUAD {:.6e}| = {gap:.2e} vs 3*stderr = {:.2e}",
            mc.second_moment,
            quad,
            3.0 * mc.stderr_second_moment
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_06_critical_rate_lower_bound() {
    let spec = fbm_field(0.5, 0.5, 2, vec![1, 0], vec![0.0; 2], 0.1);
    let eps = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];
    let records = sweep(&spec, &eps, &SweepOptions::default(), &tight_plan()).unwrap();
    let min = records.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let max = records.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let ok = min > 0.0 && max / min <= 5.0;
    report(
        6,
        ok,
        &format!("critical ratios in [{min:.4e}, {max:.4e}], max/min = {:.3}", max / min),
    );
    assert!(ok);
}

#[test]
fn criterion_07_supercritical_slope() {
    // the power law is asymptotic: eps must go well below the default
    // floor before the log-log slope settles near the predicted -0.5
    let spec = fbm_field(0.5, 0.5, 3, vec![1, 0, 0], vec![0.0; 3], 0.1);
    let eps = [1e-3, 3e-4, 1e-4, 3e-5, 1e-5];
    let opts = SweepOptions {
        allow_small_eps: true,
        ..Default::default()
    };
    // default plan: the +/-0.1 slope band dwarfs quadrature error, and the
    // deep-eps meshes are large
    let records = sweep(&spec, &eps, &opts, &QuadPlan::default()).unwrap();
    let slope = fit_slope(&records).unwrap();
    let ok = (slope - (-0.5)).abs() <= 0.1;
    report(7, ok, &format!("fitted log-log slope {slope:.4} (target -0.5 +/- 0.1)"));
    assert!(ok);
}

#[test]
fn criterion_08_gaussian_x_shape() {
    // theta = 1 companion spec with k = 0: H1 = H2 = 1/2, d = 4
    let spec = fbm_field(0.5, 0.5, 4, vec![0; 4], vec![0.0; 4], 1e-2);
    let report_x = x_shape_probe(&spec, &[0.0, 0.5, 1.0, 1.5], &tight_plan()).unwrap();
    let strictly_decreasing = report_x
        .points
        .windows(2)
        .all(|w| w[1].1 < w[0].1);
    let ok = strictly_decreasing && report_x.c2 > 0.0;
    report(
        8,
        ok,
        &format!(
            "moments {:?} strictly decreasing: {strictly_decreasing}, fitted c2 = {:.4}",
            report_x.points.iter().map(|p| p.1).collect::<Vec<_>>(),
            report_x.c2
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_09_existence_predicate_table() {
    let cases = [
        (RateSpec::new(0.5, 0.5, 1, 0).unwrap(), true),
        (RateSpec::new(0.5, 0.5, 2, 1).unwrap(), false),
        (RateSpec::new(0.5, 0.5, 4, 0).unwrap(), false),
    ];
    let ok = cases.iter().all(|(r, want)| exists_in_l2(r) == *want);
    report(9, ok, "existence table (theta = 1 boundary counted as divergent)");
    assert!(ok);
}

#[test]
fn criterion_10_p2_empirical_decay() {
    let gammas = [2.0, 4.0, 8.0, 16.0, 32.0, 64.0];
    let mut all_ok = true;
    let mut detail = String::new();
    for (name, model) in [
        ("subfbm(0.3)", CovarianceModel::subfbm(0.3).unwrap()),
        ("bifbm(0.7,0.5)", CovarianceModel::bifbm(0.7, 0.5).unwrap()),
    ] {
        let rep = probe_p2(&model, 1.0, &gammas, 64).unwrap();
        let non_increasing = rep.betas.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        let halved = rep.betas[5] < rep.betas[0] / 2.0;
        all_ok &= non_increasing && halved;
        detail.push_str(&format!(
            "{name}: beta(2) = {:.4}, beta(64) = {:.4}, non-increasing {non_increasing}, halved {halved}; ",
            rep.betas[0], rep.betas[5]
        ));
    }
    report(10, all_ok, detail.trim_end_matches("; "));
    assert!(all_ok);
}

#[test]
fn criterion_11_determinism() {
    let dir = std::env::temp_dir().join("gausslt-acceptance-11");
    std::fs::create_dir_all(&dir).unwrap();
    let spec_path = dir.join("spec.json");
    std::fs::write(
        &spec_path,
        r#"{"model1":{"kind":"fbm","h":0.5},"model2":{"kind":"fbm","h":0.5},
            "d":2,"k":[1,0],"eps":0.1}"#,
    )
    .unwrap();
    let bin = env!("CARGO_BIN_EXE_gausslt");
    let run = |args: &[&str], out: &std::path::Path| {
        let status = std::process::Command::new(bin)
            .args(args)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success(), "gausslt {args:?} failed");
        std::fs::read(out).unwrap()
    };
    let spec = spec_path.to_str().unwrap();
    let sim_args = ["simulate", spec, "--grid-n", "64", "--replicates", "64", "--seed", "7"];
    let sim1 = run(&sim_args, &dir.join("sim1.csv"));
    let sim2 = run(&sim_args, &dir.join("sim2.csv"));
    let sweep_args = ["sweep", spec, "--eps", "0.2,0.1"];
    let sw1 = run(&sweep_args, &dir.join("sw1.csv"));
    let sw2 = run(&sweep_args, &dir.join("sw2.csv"));
    let ok = sim1 == sim2 && sw1 == sw2;
    report(11, ok, "repeated simulate and sweep runs byte-identical");
    std::fs::remove_dir_all(&dir).ok();
    assert!(ok);
}
