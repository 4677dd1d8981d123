//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any of them fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;

use risopt::channel::{draw_cluster_rays, geometric_tap, rician_tap, taps_to_subcarriers, ura_response, FreqChannelSet, UraSpec};
use risopt::flops::FlopMeter;
use risopt::harness::{
    draw_trial, mean_stderr, pga_config, run_complexity, run_point, run_scenario, sweep_points, trial_key,
    write_results, Arm, ArrayShape, Preset, Scenario, ScenarioResult, SimConfig,
};
use risopt::linalg::{complex_gaussian, complex_gaussian_matrix};
use risopt::pga::{gradient_phi, pga_optimize, PgaConfig, Termination};
use risopt::power::{allocate, waterfill};
use risopt::rate::{equivalent_channel_folded, spectral_efficiency, RisPhases, UNIT_MODULUS_TOL};
use risopt::rng::StreamKey;
use risopt::{CMatrix, C64};

struct Verdict {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Verdict);

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn random_psd(n: usize, rng: &mut impl Rng) -> CMatrix {
    let b = complex_gaussian_matrix(n, n, rng);
    &b * b.adjoint()
}

/// Sum over subcarriers of log2 det(I + H Q H^H / sigma^2).
fn sum_rate(ch: &FreqChannelSet, q: &[CMatrix], phi: &RisPhases) -> f64 {
    let eq = equivalent_channel_folded(ch, phi).unwrap();
    spectral_efficiency(&eq, q, 1.0).unwrap() * ch.subcarriers() as f64
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let (nt, nr, nris, k) = (4, 2, 4, 2);
    let delta = 1e-5;
    let mut worst: f64 = 0.0;
    for inst in 0..20u64 {
        let mut rng = StreamKey::root(1000 + inst).rng();
        let mut g = |r, c| (0..k).map(|_| complex_gaussian_matrix(r, c, &mut rng)).collect::<Vec<_>>();
        let ch = FreqChannelSet::new(g(nris, nt), g(nr, nris), g(nr, nt)).unwrap();
        let q: Vec<CMatrix> = (0..k).map(|_| random_psd(nt, &mut rng)).collect();
        let phi = RisPhases::random(nris, &mut rng);
        let grad = gradient_phi(&ch, &q, &phi, 1.0).unwrap();
        for i in 0..nris {
            let shifted = |d: f64| {
                let mut v = phi.as_slice().to_vec();
                v[i] *= C64::from_polar(1.0, d);
                RisPhases::new(v).unwrap()
            };
            let fd = (sum_rate(&ch, &q, &shifted(delta)) - sum_rate(&ch, &q, &shifted(-delta))) / (2.0 * delta);
            let analytic = -2.0 * (phi.as_slice()[i] * grad[i]).im;
            worst = worst.max((analytic - fd).abs() / fd.abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(worst <= 1e-5 && secs < 5.0, format!("max relative error {worst:.2e} over 20 instances, {secs:.2} s"))
}

fn criterion_2() -> Verdict {
    let cfg = SimConfig::preset(Preset::Desk);
    let points = sweep_points(&cfg, Scenario::SeVsSnr);
    let mut bad = Vec::new();
    let mut runs = 0;
    for run in 0..50u64 {
        let point = &points[run as usize % points.len()];
        let draw = draw_trial(&cfg, point, trial_key(cfg.system.seed, Scenario::SeVsSnr, point.sweep_index, 1000 + run)).unwrap();
        let pc = pga_config(&cfg, point);
        let folded = draw.channels.clone().fold_gains(draw.gains.rho_direct, draw.gains.rho_indirect);
        let out = pga_optimize(&folded, &pc, draw.initial_phases.clone(), &mut FlopMeter::new()).unwrap();
        runs += 1;
        let monotone = out.trace.windows(2).all(|w| w[1] >= w[0]);
        let stopped = matches!(out.termination, Termination::Converged | Termination::IterationCap);
        let feasible = out.phi.max_modulus_error() <= UNIT_MODULUS_TOL;
        if !(monotone && stopped && feasible) {
            bad.push(format!("run {run}: monotone={monotone} termination={:?} feasible={feasible}", out.termination));
        }
    }
    verdict(bad.is_empty(), format!("{} of {runs} runs violate monotonicity/termination/feasibility {bad:?}", bad.len()))
}

fn criterion_3() -> Verdict {
    let scalar = |z: C64| CMatrix::from_element(1, 1, z);
    let (p, runs) = (10.0, 100);
    // The default step and threshold decide the verdict; a tight threshold is
    // reported alongside to show where the iteration is heading.
    let table = PgaConfig::new(p, 1);
    let tight = PgaConfig { epsilon: 1e-12, max_iterations: 10_000, ..PgaConfig::new(p, 1) };
    let (mut hits, mut hits_tight) = (0, 0);
    let mut worst: f64 = 0.0;
    for run in 0..runs as u64 {
        let mut rng = StreamKey::root(5000 + run).rng();
        let a = complex_gaussian(&mut rng);
        let h1 = complex_gaussian(&mut rng);
        let h2 = complex_gaussian(&mut rng);
        let ch = FreqChannelSet::new(vec![scalar(h1)], vec![scalar(h2)], vec![scalar(a)]).unwrap();
        let init = RisPhases::random(1, &mut rng);
        let optimum = (1.0 + (a.norm() + (h1 * h2).norm()).powi(2) * p).log2();
        let out = pga_optimize(&ch, &table, init.clone(), &mut FlopMeter::new()).unwrap();
        let gap = optimum - out.rate;
        worst = worst.max(gap);
        hits += usize::from(gap.abs() <= 1e-3);
        let out = pga_optimize(&ch, &tight, init, &mut FlopMeter::new()).unwrap();
        hits_tight += usize::from((optimum - out.rate).abs() <= 1e-3);
    }
    verdict(
        hits * 100 >= 95 * runs,
        format!(
            "{hits}/{runs} runs within 1e-3 of the aligned optimum at mu0=0.1, eps=1e-3 (worst gap {worst:.2e}); \
             {hits_tight}/{runs} with eps=1e-12"
        ),
    )
}

fn criterion_4() -> Verdict {
    let (p, level) = waterfill(&[4.0, 1.0], 1.0).unwrap();
    let hand = (p[0] - 0.875).abs() < 1e-9 && (p[1] - 0.125).abs() < 1e-9 && (level - 8.0 / 9.0).abs() < 1e-9;

    let mut kkt_ok = 0;
    let mut beats_uniform = 0;
    for inst in 0..100u64 {
        let mut rng = StreamKey::root(9000 + inst).rng();
        let n = rng.random_range(1..=12);
        let gains: Vec<f64> = (0..n).map(|_| rng.random_range(1e-3..10.0)).collect();
        let total = rng.random_range(0.01..50.0);
        let (alloc, lambda) = waterfill(&gains, total).unwrap();
        let water = 1.0 / lambda;
        let budget = (alloc.iter().sum::<f64>() - total).abs() <= 1e-9 * total;
        let kkt = gains.iter().zip(&alloc).all(|(&g, &pw)| {
            if pw > 0.0 {
                (pw + 1.0 / g - water).abs() <= 1e-9 * water.max(1.0)
            } else {
                1.0 / g >= water - 1e-9 * water.max(1.0)
            }
        });
        if budget && kkt {
            kkt_ok += 1;
        }

        let (nt, nr, nris, k) = (3, 2, 4, 3);
        let mut g = |r, c| (0..k).map(|_| complex_gaussian_matrix(r, c, &mut rng)).collect::<Vec<_>>();
        let ch = FreqChannelSet::new(g(nris, nt), g(nr, nris), g(nr, nt)).unwrap();
        let phi = RisPhases::random(nris, &mut rng);
        let eq = equivalent_channel_folded(&ch, &phi).unwrap();
        let wf = allocate(&eq, 1.0, total, 2).unwrap();
        let se_wf = spectral_efficiency(&eq, &wf.q, 1.0).unwrap();
        let uniform = vec![CMatrix::identity(nt, nt) * C64::new(total / (k * nt) as f64, 0.0); k];
        let se_uniform = spectral_efficiency(&eq, &uniform, 1.0).unwrap();
        if se_wf >= se_uniform - 1e-12 {
            beats_uniform += 1;
        }
    }
    verdict(
        hand && kkt_ok == 100 && beats_uniform == 100,
        format!("hand example {hand}, KKT+budget {kkt_ok}/100, waterfilling >= uniform {beats_uniform}/100"),
    )
}

fn desk() -> SimConfig {
    SimConfig::preset(Preset::Desk)
}

fn row(rows: &[ScenarioResult], arm: Arm, n_ris: usize, x: f64) -> &ScenarioResult {
    rows.iter()
        .find(|r| r.arm == arm.id() && r.n_ris == n_ris && r.sweep_value == x)
        .expect("missing row")
}

fn row_snr(rows: &[ScenarioResult], arm: Arm, snr: f64, x: f64) -> &ScenarioResult {
    rows.iter()
        .find(|r| r.arm == arm.id() && r.snr_db == snr && r.sweep_value == x)
        .expect("missing row")
}

fn criterion_5() -> Verdict {
    let start = Instant::now();
    let mut cfg = desk();
    cfg.system.snr_db = vec![-10.0, -5.0, 0.0, 5.0, 10.0];
    cfg.system.trials = 50;
    cfg.system.scenarios.se_ris_arrays = vec![ArrayShape::new(4, 4), ArrayShape::new(8, 8)];
    let rows = run_scenario(&cfg, Scenario::SeVsSnr).unwrap();
    let mut ordering = true;
    let mut separated_paired = true;
    let mut separated_unpaired = true;
    let mut grows = true;
    let mut notes = Vec::new();
    for (i, &snr) in cfg.system.snr_db.iter().enumerate() {
        for ris in &cfg.system.scenarios.se_ris_arrays {
            let n = ris.count();
            let (p, r, z) = (row(&rows, Arm::Pga, n, snr), row(&rows, Arm::RandomPhases, n, snr), row(&rows, Arm::NoRis, n, snr));
            ordering &= p.mean_se > r.mean_se && r.mean_se > z.mean_se;
            // paired standard error of the pga - no_ris gap on the shared draws
            let point = sweep_points(&cfg, Scenario::SeVsSnr)
                .into_iter()
                .find(|pt| pt.ris == *ris && pt.sweep_index == i as u64)
                .unwrap();
            let outcomes = run_point(&cfg, Scenario::SeVsSnr, &point, cfg.system.trials).unwrap();
            let gaps: Vec<f64> = outcomes.iter().map(|o| o[0].se - o[2].se).collect();
            let (gap, gap_se) = mean_stderr(&gaps);
            separated_paired &= gap >= gap_se;
            separated_unpaired &= gap >= p.stderr_se.max(z.stderr_se);
            if n == 16 {
                notes.push(format!("{snr} dB: gap {gap:.2e} paired se {gap_se:.2e} arm se {:.2e}", p.stderr_se.max(z.stderr_se)));
            }
        }
        grows &= row(&rows, Arm::Pga, 64, snr).mean_se > row(&rows, Arm::Pga, 16, snr).mean_se;
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        ordering && separated_paired && grows && secs < 600.0,
        format!(
            "ordering {ordering}, gap >= paired stderr {separated_paired} (>= per-arm stderr {separated_unpaired}), \
             N_RIS 16->64 grows {grows}, {secs:.1} s; {}",
            notes.join("; ")
        ),
    )
}

fn criterion_6() -> Verdict {
    let cfg = desk();
    let rows = run_scenario(&cfg, Scenario::PlosVsSe).unwrap();
    let ratio = |p_los: f64| row_snr(&rows, Arm::NoRis, 10.0, p_los).mean_se / row_snr(&rows, Arm::Pga, 10.0, p_los).mean_se;
    let (hi, lo) = (ratio(1.0), ratio(0.1));
    let trend = hi - lo >= 0.1;
    let below: Vec<f64> = cfg
        .system
        .scenarios
        .plos_grid
        .iter()
        .copied()
        .filter(|&p| row_snr(&rows, Arm::NoRis, -5.0, p).mean_se >= row_snr(&rows, Arm::Pga, -5.0, p).mean_se)
        .collect();
    verdict(
        trend && below.is_empty(),
        format!(
            "10 dB ratio no_ris/pga {hi:.6} at P_LOS=1.0 vs {lo:.6} at 0.1 (difference {:.2e}, need 0.1); \
             -5 dB points with no_ris >= pga: {below:?}",
            hi - lo
        ),
    )
}

fn criterion_7() -> Verdict {
    let cfg = desk();
    let rows = run_scenario(&cfg, Scenario::DistanceVsSe).unwrap();
    let adv = |d: f64| {
        let p = rows.iter().find(|r| r.arm == "pga" && r.sweep_value == d).unwrap();
        let z = rows.iter().find(|r| r.arm == "no_ris" && r.sweep_value == d).unwrap();
        p.mean_se - z.mean_se
    };
    let base = adv(100.0);
    let far: Vec<(f64, f64)> = cfg.system.scenarios.distance_grid.iter().filter(|&&d| d >= 200.0).map(|&d| (d, adv(d))).collect();
    let pass = far.iter().all(|&(_, a)| a > base);
    let far_text: Vec<String> = far.iter().map(|(d, a)| format!("{d} m: {a:.2e}")).collect();
    verdict(pass, format!("pga - no_ris at 100 m: {base:.2e}; {}", far_text.join(", ")))
}

fn criterion_8() -> Verdict {
    let mut cfg = desk();
    cfg.system.scenarios.complexity_n_ris = vec![4, 16, 36, 64];
    let a = run_complexity(&cfg).unwrap();
    let b = run_complexity(&cfg).unwrap();
    let iters: Vec<f64> = a.iter().map(|r| r.iter_count).collect();
    let flops: Vec<f64> = a.iter().map(|r| r.flop_count).collect();
    let iters_ok = iters.windows(2).all(|w| w[1] >= w[0]);
    let flops_ok = flops.windows(2).all(|w| w[1] > w[0]);
    let same = a.iter().zip(&b).all(|(x, y)| x.iter_count == y.iter_count && x.flop_count == y.flop_count);
    verdict(
        iters_ok && flops_ok && same,
        format!("iterations {iters:?} non-decreasing {iters_ok}; flops {flops:?} increasing {flops_ok}; repeatable {same}"),
    )
}

fn criterion_9() -> Verdict {
    let mut rng = StreamKey::root(77).rng();
    let mut worst_norm: f64 = 0.0;
    for _ in 0..100_000 {
        let spec = UraSpec::new(rng.random_range(1..=8), rng.random_range(1..=8), rng.random_range(0.1..2.0)).unwrap();
        let v = ura_response(rng.random_range(-PI..PI), rng.random_range(-PI / 2.0..PI / 2.0), &spec);
        worst_norm = worst_norm.max((v.norm() - 1.0).abs());
    }

    let mut worst_dft: f64 = 0.0;
    for _ in 0..200 {
        let (l, k) = (rng.random_range(1..=6), rng.random_range(6..=32));
        let taps: Vec<CMatrix> = (0..l).map(|_| complex_gaussian_matrix(2, 3, &mut rng)).collect();
        let freq = taps_to_subcarriers(&taps, k).unwrap();
        for n in 0..k {
            let mut back = CMatrix::zeros(2, 3);
            for (kk, h) in freq.iter().enumerate() {
                back += h * C64::from_polar(1.0 / k as f64, 2.0 * PI * ((kk * n) % k) as f64 / k as f64);
            }
            let want = if n < l { taps[n].clone() } else { CMatrix::zeros(2, 3) };
            worst_dft = worst_dft.max((back - want).camax());
        }
    }

    let los = complex_gaussian_matrix(3, 2, &mut rng);
    let scatter = complex_gaussian_matrix(3, 2, &mut rng);
    let limits = rician_tap(&los, &scatter, 0.0).unwrap() == scatter && rician_tap(&los, &scatter, f64::INFINITY).unwrap() == los;

    let samples = 100_000;
    let scatter_moment = (0..samples).map(|_| complex_gaussian(&mut rng).norm_sqr()).sum::<f64>() / samples as f64;
    let (rx, tx) = (UraSpec::half_wave(2, 2).unwrap(), UraSpec::half_wave(1, 4).unwrap());
    let draws = samples / 16;
    let mut geo = 0.0;
    for _ in 0..draws {
        let rays = draw_cluster_rays(5, 10, 10f64.to_radians(), &mut rng);
        geo += geometric_tap(&rays, &rx, &tx).iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    let geo_moment = geo / (draws * 16) as f64;
    let moments = (scatter_moment - 1.0).abs() <= 0.05 && (geo_moment - 1.0).abs() <= 0.05;
    verdict(
        worst_norm <= 1e-12 && worst_dft <= 1e-10 && limits && moments,
        format!(
            "URA norm error {worst_norm:.1e}, DFT round trip {worst_dft:.1e}, Rician limits {limits}, \
             second moments scatter {scatter_moment:.4} geometric {geo_moment:.4}"
        ),
    )
}

fn criterion_10() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_risopt");
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = std::process::Command::new(bin)
            .args(["simulate", "--scenario", "se_vs_snr", "--preset", "desk", "--seed", "7", "--out"])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out).unwrap()
    };
    let (a, b) = (run("a.csv"), run("b.csv"));
    let mut cfg = desk();
    cfg.system.seed = 7;
    let mut lib = Vec::new();
    write_results(&mut lib, &run_scenario(&cfg, Scenario::SeVsSnr).unwrap()).unwrap();
    verdict(
        !a.is_empty() && a == b && a == lib,
        format!("{} bytes, runs identical {}, matches library output {}", a.len(), a == b, a == lib),
    )
}

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [Criterion; 10] = [
        ("criterion 1 gradient vs finite differences", criterion_1),
        ("criterion 2 PGA monotonicity and feasibility", criterion_2),
        ("criterion 3 scalar phase-aligned optimum", criterion_3),
        ("criterion 4 waterfilling exactness", criterion_4),
        ("criterion 5 SE vs SNR ordering", criterion_5),
        ("criterion 6 SE vs LOS probability trend", criterion_6),
        ("criterion 7 SE vs distance trend", criterion_7),
        ("criterion 8 complexity scaling", criterion_8),
        ("criterion 9 channel-model invariants", criterion_9),
        ("criterion 10 end-to-end determinism", criterion_10),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let v = run();
        println!("{} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
