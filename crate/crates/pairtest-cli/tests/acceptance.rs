//! Acceptance suite: one test per criterion, each printing a pass line with
//! the measured numbers (run with `-- --nocapture` to see them). The tests
//! serialize on a mutex so the timed criteria measure their own runtime.

use std::fs;
use std::process::Command;
use std::sync::Mutex;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;

use pairtest::datagen::{self, BenchmarkKind, BenchmarkSpec, IcaSource};
use pairtest::experiment::{BenchmarkConfig, ExperimentConfig, KernelConfig};
use pairtest::kernels::{self, KernelSpec, SemimetricSpec};
use pairtest::null::{self, gram_eigenvalues, NullMethod, TestConfig};
use pairtest::rng::{derive_seed, substream};
use pairtest::sample::{PairedSample, Sample};
use pairtest::stats;

static GATE: Mutex<()> = Mutex::new(());

fn gate() -> std::sync::MutexGuard<'static, ()> {
    GATE.lock().unwrap_or_else(|e| e.into_inner())
}

fn random_sample(rng: &mut impl Rng, rows: usize, cols: usize) -> Sample {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    Sample::from_vec(data, rows, cols).unwrap()
}

fn pearson_r(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..x.len() {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx).powi(2);
        syy += (y[i] - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// MMD with a distance kernel equals half the energy distance, for every
/// admissible exponent and independently of the kernel center.
#[test]
fn a1_mmd_halves_energy_distance() {
    let _g = gate();
    let start = Instant::now();
    let qs = [0.5, 1.0, 1.5, 2.0];
    let mut rng = substream(20_240_101, &[1]);
    let mut worst: f64 = 0.0;
    for trial in 0..100u64 {
        let q = qs[(trial % 4) as usize];
        let d = 1 + (trial % 5) as usize;
        let m = 2 + rng.random_range(0..99);
        let z = random_sample(&mut rng, m, d);
        let w = random_sample(&mut rng, m, d);
        let rho = SemimetricSpec::euclidean_power(q).unwrap();
        let energy = stats::energy_distance_v(&z, &w, &rho).unwrap();
        for center in [vec![0.0; d], z.row(0).to_vec()] {
            let k = KernelSpec::distance_induced(rho.clone(), center);
            let mmd = stats::mmd_v(&z, &w, &k).unwrap();
            let rel = (mmd - 0.5 * energy).abs() / mmd.abs().max(1.0);
            worst = worst.max(rel);
            assert!(
                rel <= 1e-9,
                "trial {trial}: q={q} m={m} d={d}: mmd={mmd} vs energy/2={}",
                0.5 * energy
            );
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!(
        "[PASS] mmd == energy/2 over 100 random pairs, 2 centers (worst rel err {worst:.2e}, {:.2}s < 10s)",
        elapsed.as_secs_f64()
    );
}

/// HSIC with the unscaled distance-kernel product factors equals distance
/// covariance computed independently from distance matrices.
#[test]
fn a2_hsic_matches_distance_covariance() {
    let _g = gate();
    let start = Instant::now();
    let qs = [0.5, 1.0, 1.5, 2.0];
    let mut rng = substream(20_240_101, &[2]);
    let mut worst: f64 = 0.0;
    for trial in 0..100u64 {
        let qx = qs[(trial % 4) as usize];
        let qy = qs[((trial / 4) % 4) as usize];
        let m = 2 + rng.random_range(0..59);
        let dx = 1 + (trial % 3) as usize;
        let dy = 1 + ((trial / 3) % 3) as usize;
        let p = PairedSample::new(
            random_sample(&mut rng, m, dx),
            random_sample(&mut rng, m, dy),
        )
        .unwrap();
        let rho_x = SemimetricSpec::euclidean_power(qx).unwrap();
        let rho_y = SemimetricSpec::euclidean_power(qy).unwrap();
        let dcov = stats::dcov_v(&p, &rho_x, &rho_y).unwrap();
        let kx = KernelSpec::distance_induced_unscaled(rho_x, vec![0.0; dx]);
        let ky = KernelSpec::distance_induced_unscaled(rho_y, vec![0.0; dy]);
        let hsic = stats::hsic_v(&p, &kx, &ky).unwrap();
        let rel = (hsic - dcov).abs() / hsic.abs().max(1.0);
        worst = worst.max(rel);
        assert!(rel <= 1e-9, "trial {trial}: hsic={hsic} dcov={dcov}");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!(
        "[PASS] hsic(product factors) == dcov over 100 paired samples (worst rel err {worst:.2e}, {:.2}s < 10s)",
        elapsed.as_secs_f64()
    );
}

/// Zero-sum quadratic forms over rho_q are nonpositive, and distance-kernel
/// Gram matrices are positive semidefinite up to rounding.
#[test]
fn a3_negative_type_and_psd_grams() {
    let _g = gate();
    let mut rng = substream(20_240_101, &[3]);
    let mut worst_form = f64::NEG_INFINITY;
    let mut worst_eig_ratio = f64::INFINITY;
    for q in [0.5, 1.0, 1.5, 2.0] {
        let rho = SemimetricSpec::euclidean_power(q).unwrap();
        let points = random_sample(&mut rng, 50, 3);
        for _ in 0..20 {
            let mut w: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mean = w.iter().sum::<f64>() / 50.0;
            for v in &mut w {
                *v -= mean;
            }
            let form = kernels::negative_type_form(&rho, &points, &w).unwrap();
            worst_form = worst_form.max(form);
            assert!(form <= 1e-8, "q={q}: form {form}");
        }
        let k = KernelSpec::distance_induced(rho, vec![0.0; 3]);
        let g = kernels::gram(&k, &points, None).unwrap();
        let ev = gram_eigenvalues(&g).unwrap();
        let (max, min) = (ev[0], *ev.last().unwrap());
        worst_eig_ratio = worst_eig_ratio.min(min / max);
        assert!(min >= -1e-8 * max, "q={q}: min {min} max {max}");
    }
    println!(
        "[PASS] negative-type forms <= 1e-8 (worst {worst_form:.2e}); gram min/max eigenvalue ratio >= -1e-8 (worst {worst_eig_ratio:.2e})"
    );
}

fn h0_two_sample(trial: u64) -> (Sample, Sample) {
    let spec =
        BenchmarkSpec::new(BenchmarkKind::GaussMeanShift { d: 1, delta: 0.0 }, 100).unwrap();
    datagen::gen_two_sample(&spec, derive_seed(777_000, &[1, trial])).unwrap()
}

fn two_sample_reject_rate(method: NullMethod, trials: u64, config: &TestConfig) -> f64 {
    use rayon::prelude::*;
    let k = KernelSpec::distance_induced(SemimetricSpec::euclidean(), vec![0.0]);
    let rejects: u32 = (0..trials)
        .into_par_iter()
        .map(|t| {
            let (z, w) = h0_two_sample(t);
            let seed = derive_seed(777_000, &[2, t]);
            let out = null::run_two_sample_test(&z, &w, &k, method, 0.05, config, seed).unwrap();
            u32::from(out.reject)
        })
        .sum();
    rejects as f64 / trials as f64
}

/// Type I error of the spectral and permutation tests sits at the nominal
/// level, for both the two-sample and the independence statistic.
#[test]
fn a4_type_i_error_calibration() {
    let _g = gate();
    let config = TestConfig::default();

    let t0 = Instant::now();
    let spectral_rate = two_sample_reject_rate(NullMethod::Spectral, 500, &config);
    let spectral_time = t0.elapsed().as_secs_f64();
    assert!(spectral_time < 300.0, "spectral calibration took {spectral_time}s");
    assert!(
        (0.03..=0.08).contains(&spectral_rate),
        "spectral two-sample rate {spectral_rate}"
    );

    let t0 = Instant::now();
    let perm_rate = two_sample_reject_rate(NullMethod::Resample, 500, &config);
    let perm_time = t0.elapsed().as_secs_f64();
    assert!(perm_time < 300.0, "permutation calibration took {perm_time}s");
    assert!(
        (0.03..=0.08).contains(&perm_rate),
        "permutation two-sample rate {perm_rate}"
    );

    // Independent normals, m = 128, spectral HSIC.
    use rayon::prelude::*;
    let t0 = Instant::now();
    let k = KernelSpec::distance_induced(SemimetricSpec::euclidean(), vec![0.0]);
    let hsic_rejects: u32 = (0..500u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = substream(777_001, &[1, t]);
            let x = random_sample(&mut rng, 128, 1);
            let y = random_sample(&mut rng, 128, 1);
            let p = PairedSample::new(x, y).unwrap();
            let seed = derive_seed(777_001, &[2, t]);
            let out =
                null::run_independence_test(&p, &k, &k, NullMethod::Spectral, 0.05, &config, seed)
                    .unwrap();
            u32::from(out.reject)
        })
        .sum();
    let hsic_rate = hsic_rejects as f64 / 500.0;
    let hsic_time = t0.elapsed().as_secs_f64();
    assert!(hsic_time < 300.0, "HSIC calibration took {hsic_time}s");
    assert!(
        (0.03..=0.08).contains(&hsic_rate),
        "spectral HSIC rate {hsic_rate}"
    );

    println!(
        "[PASS] type-I calibration at alpha=0.05: spectral {spectral_rate:.3} ({spectral_time:.0}s), permutation {perm_rate:.3} ({perm_time:.0}s), spectral HSIC {hsic_rate:.3} ({hsic_time:.0}s); all in [0.03, 0.08], all under 300s"
    );
}

/// The quadratic-form bound never rejects more often than the spectral test
/// under the null, and stays below the nominal level.
#[test]
fn a5_quadratic_bound_is_conservative() {
    let _g = gate();
    let config = TestConfig::default();
    let spectral_rate = two_sample_reject_rate(NullMethod::Spectral, 500, &config);
    let bound_rate = two_sample_reject_rate(NullMethod::QuadraticBound, 500, &config);
    assert!(
        bound_rate <= spectral_rate,
        "bound {bound_rate} > spectral {spectral_rate}"
    );
    assert!(bound_rate <= 0.05, "bound rate {bound_rate}");
    println!(
        "[PASS] quadratic bound is conservative: {bound_rate:.3} <= spectral {spectral_rate:.3} and <= 0.05"
    );
}

/// At a frequency where the q=1 distance kernel has lost most of its power,
/// q=1/3 still detects the sinusoidal perturbation comfortably.
#[test]
fn a6_small_exponent_wins_at_high_frequency() {
    let _g = gate();
    // Frequency pinned where the q=1 test's power has collapsed below 0.5
    // at m=200 (it measures ~0.15 there) while q=1/3 stays near 1.
    let config = ExperimentConfig {
        benchmark: BenchmarkConfig::SinusoidPerturb { grid: vec![5.0] },
        kernels: vec![
            KernelConfig::Dist { q: 1.0 / 3.0 },
            KernelConfig::Dist { q: 1.0 },
        ],
        method: NullMethod::Spectral,
        alpha: 0.05,
        trials: 200,
        m: 200,
        seed: 314_159,
        null_draws: None,
        permutations: None,
        output: None,
    };
    let curve = pairtest::experiment::run_power_experiment(&config).unwrap();
    let power_third = curve.rows[0].rate();
    let power_one = curve.rows[1].rate();
    assert!(power_one <= 0.5, "q=1 power {power_one} not in the hard regime");
    assert!(
        power_third >= power_one + 0.2,
        "q=1/3 power {power_third} vs q=1 power {power_one}"
    );
    println!(
        "[PASS] sinusoid frequency 5, m=200: power(q=1/3) = {power_third:.3} >= power(q=1) + 0.2 = {:.3}",
        power_one + 0.2
    );
}

/// Rotated non-Gaussian sources are uncorrelated yet strongly dependent:
/// Pearson sees nothing, spectral HSIC rejects; at angle 0 it calibrates.
#[test]
fn a7_rotation_dependence_detected_while_uncorrelated() {
    let _g = gate();
    use rayon::prelude::*;
    let config = TestConfig::default();
    let k = KernelSpec::distance_induced(SemimetricSpec::euclidean(), vec![0.0]);

    let run_angle = |angle: f64, tag: u64| -> (f64, f64) {
        let results: Vec<(bool, f64)> = (0..100u64)
            .into_par_iter()
            .map(|t| {
                let data_seed = derive_seed(777_002, &[tag, t]);
                let p = datagen::gen_ica_rotation(
                    1,
                    angle,
                    IcaSource::GaussianMixture,
                    1024,
                    data_seed,
                )
                .unwrap();
                let r = pearson_r(p.x.as_slice(), p.y.as_slice());
                let seed = derive_seed(777_002, &[tag + 1, t]);
                let out = null::run_independence_test(
                    &p,
                    &k,
                    &k,
                    NullMethod::Spectral,
                    0.05,
                    &config,
                    seed,
                )
                .unwrap();
                (out.reject, r.abs())
            })
            .collect();
        let rate = results.iter().filter(|r| r.0).count() as f64 / 100.0;
        let mean_abs_r = results.iter().map(|r| r.1).sum::<f64>() / 100.0;
        (rate, mean_abs_r)
    };

    let (power, mean_abs_r) = run_angle(std::f64::consts::FRAC_PI_4, 10);
    assert!(mean_abs_r <= 0.1, "mean |pearson r| = {mean_abs_r}");
    assert!(power >= 0.9, "rejection rate at pi/4: {power}");

    let (level, _) = run_angle(0.0, 20);
    assert!(
        (0.02..=0.09).contains(&level),
        "rejection rate at angle 0: {level}"
    );
    println!(
        "[PASS] rotation benchmark m=1024: |pearson| {mean_abs_r:.3} <= 0.1 with HSIC power {power:.2} >= 0.9; level at angle 0 = {level:.3} in [0.02, 0.09]"
    );
}

/// The spectral and permutation nulls target the same distribution: their
/// decisions and thresholds agree on null data.
#[test]
fn a8_spectral_and_permutation_agree() {
    let _g = gate();
    use rayon::prelude::*;
    let config = TestConfig::default();
    let k = KernelSpec::distance_induced(SemimetricSpec::euclidean(), vec![0.0]);
    let results: Vec<(bool, bool, f64, f64)> = (0..50u64)
        .into_par_iter()
        .map(|t| {
            let (z, w) = h0_two_sample(1_000 + t);
            let m = z.n_rows() as f64;
            let seed = derive_seed(777_003, &[1, t]);
            let spec =
                null::run_two_sample_test(&z, &w, &k, NullMethod::Spectral, 0.05, &config, seed)
                    .unwrap();
            let perm =
                null::run_two_sample_test(&z, &w, &k, NullMethod::Resample, 0.05, &config, seed)
                    .unwrap();
            // The permutation null is on the raw mmd scale; bring its
            // threshold to the spectral statistic's (m/2) scale.
            (spec.reject, perm.reject, spec.threshold, 0.5 * m * perm.threshold)
        })
        .collect();

    let agreements = results.iter().filter(|r| r.0 == r.1).count();
    let mut worst_rel: f64 = 0.0;
    for (_, _, ts, tp) in &results {
        let rel = (ts - tp).abs() / ts.abs().max(tp.abs());
        worst_rel = worst_rel.max(rel);
        assert!(rel <= 0.15, "thresholds {ts} vs {tp} differ by {rel:.3}");
    }
    assert!(agreements >= 45, "only {agreements}/50 decisions agree");
    println!(
        "[PASS] spectral vs permutation on 50 null datasets: {agreements}/50 decisions agree (>= 45), worst threshold gap {worst_rel:.3} <= 0.15"
    );
}

fn run_cli(args: &[&str], dir: &std::path::Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pairtest"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

/// Any CLI run repeated with the same inputs and seed reproduces its output
/// files byte for byte.
#[test]
fn a9_cli_outputs_are_deterministic() {
    let _g = gate();
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let gen_args = [
        "gen", "--benchmark", "gauss-mean-shift", "--d", "2", "--param", "0.4", "--m", "40",
        "--seed", "11",
    ];
    let out = run_cli(&[&gen_args[..], &["--out-a", "a1.csv", "--out-b", "b1.csv"]].concat(), d);
    assert!(out.status.success());
    let out = run_cli(&[&gen_args[..], &["--out-a", "a2.csv", "--out-b", "b2.csv"]].concat(), d);
    assert!(out.status.success());
    assert_eq!(
        fs::read(d.join("a1.csv")).unwrap(),
        fs::read(d.join("a2.csv")).unwrap()
    );
    assert_eq!(
        fs::read(d.join("b1.csv")).unwrap(),
        fs::read(d.join("b2.csv")).unwrap()
    );

    for (report, null) in [("r1.json", "spectral"), ("r2.json", "spectral"), ("p1.json", "resample"), ("p2.json", "resample")] {
        let out = run_cli(
            &[
                "two-sample", "--a", "a1.csv", "--b", "b1.csv", "--null", null, "--seed", "21",
                "--out", report,
            ],
            d,
        );
        assert!(out.status.success());
    }
    assert_eq!(
        fs::read(d.join("r1.json")).unwrap(),
        fs::read(d.join("r2.json")).unwrap()
    );
    assert_eq!(
        fs::read(d.join("p1.json")).unwrap(),
        fs::read(d.join("p2.json")).unwrap()
    );

    let cfg = r#"{
        "benchmark": {"kind": "sinusoid-perturb", "grid": [1.0, 3.0]},
        "kernels": [{"kind": "dist", "q": 1.0}, {"kind": "gauss"}],
        "method": "spectral",
        "alpha": 0.05,
        "trials": 5,
        "m": 30,
        "seed": 13,
        "null_draws": 500
    }"#;
    fs::write(d.join("cfg.json"), cfg).unwrap();
    for out_name in ["w1.csv", "w2.csv"] {
        let out = run_cli(&["power", "--config", "cfg.json", "--out", out_name], d);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    assert_eq!(
        fs::read(d.join("w1.csv")).unwrap(),
        fs::read(d.join("w2.csv")).unwrap()
    );

    println!("[PASS] gen, two-sample (both nulls) and power outputs are byte-identical across reruns");
}
