//! Acceptance suite. Each test prints one `[PASS]` or `[FAIL]` line.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use ccfit::de::{self, Bounds, Individual, Observer};
use ccfit::evaluation::{align_events, correlation_ratio, summarize, weighted_mean};
use ccfit::geometry::{frame_to_sample, plane_distance};
use ccfit::stream::{fit_window, run_stream, update_schedule};
use ccfit::synth::{generate, SynthDataset, SynthSpec};
use ccfit::{
    DeConfig, FloorPlane, JointFrame, JointType, ParamBounds, Prediction, Sample, StreamConfig,
    Window,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

fn report(id: &str, what: &str, ok: bool, detail: String) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("[{tag}] {id} {what}: {detail}");
    assert!(ok, "{id} failed: {detail}");
}

fn stream_cfg(np: usize, g_max: usize, vtr: f64) -> StreamConfig {
    StreamConfig {
        de: DeConfig {
            pop_size: np,
            max_generations: g_max,
            vtr,
            seed: 0,
            ..DeConfig::default()
        },
        ..StreamConfig::default()
    }
}

fn noisy_stream() -> SynthDataset {
    generate(&SynthSpec {
        noise_sigma_cm: 1.0,
        seed: 1,
        ..SynthSpec::default()
    })
    .unwrap()
}

fn median_cpm_error(data: &SynthDataset, cfg: &StreamConfig) -> f64 {
    let run = run_stream(&data.frames, cfg).unwrap();
    let predictions: Vec<Prediction> = run.fits().map(Prediction::from).collect();
    let outcomes = align_events(&data.events, &predictions);
    summarize(&outcomes).mae_cpm.expect("aligned events")
}

#[test]
fn ac1_noiseless_recovery() {
    let data = generate(&SynthSpec::default()).unwrap();
    let start = Instant::now();
    let run = run_stream(&data.frames, &stream_cfg(50, 500, 1e-4)).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let (mut worst_cpm, mut worst_cm, mut n) = (0.0f64, 0.0f64, 0);
    for fit in run.fits() {
        worst_cpm = worst_cpm.max((fit.cpm() - 110.0).abs());
        worst_cm = worst_cm.max((fit.depth_p2p_cm() - 5.0).abs());
        n += 1;
    }
    let ok = n == run.items.len() && n > 0 && worst_cpm <= 0.5 && worst_cm <= 0.1 && elapsed < 60.0;
    report(
        "AC1",
        "noiseless recovery",
        ok,
        format!("{n} windows, worst |Δcpm| {worst_cpm:.4}, worst |Δdepth| {worst_cm:.4} cm, {elapsed:.1} s"),
    );
}

#[test]
fn ac2_noisy_recovery() {
    let err = median_cpm_error(&noisy_stream(), &stream_cfg(50, 80, 1e-4));
    report(
        "AC2",
        "noisy recovery, median cpm error ≤ 3.0",
        err <= 3.0,
        format!("{err:.3} cpm"),
    );
}

#[test]
fn ac3_hyperparameter_trend() {
    let data = noisy_stream();
    let low = median_cpm_error(&data, &stream_cfg(10, 10, 1e-4));
    let mid = median_cpm_error(&data, &stream_cfg(50, 80, 1e-4));
    let high = median_cpm_error(&data, &stream_cfg(200, 100, 1e-4));
    let ok = low > mid && mid > high - 0.5 && low >= 2.0 * mid;
    report(
        "AC3",
        "hyperparameter trend",
        ok,
        format!("e(10,10) {low:.3}, e(50,80) {mid:.3}, e(200,100) {high:.3}"),
    );
}

/// Exhaustive SSE minimum over an (ω, φ) grid; amplitude and offset are
/// solved in closed form at every grid point.
fn grid_oracle_sse(samples: &[(f64, f64)]) -> f64 {
    let n = samples.len() as f64;
    let sy: f64 = samples.iter().map(|s| s.1).sum();
    let syy: f64 = samples.iter().map(|s| s.1 * s.1).sum();
    let (w_lo, w_hi) = (2.0 * PI, 16.0 * PI / 3.0);
    let w_steps = ((w_hi - w_lo) / 0.01).ceil() as usize;
    let p_steps = (2.0 * PI / 0.01).ceil() as usize;
    let mut best = f64::INFINITY;
    for i in 0..=w_steps {
        let w = w_lo + (w_hi - w_lo) * i as f64 / w_steps as f64;
        // sin(wt + φ) = sin(wt)·cos φ + cos(wt)·sin φ
        let (mut ss, mut sc, mut sss, mut ssc, mut scc, mut ssy, mut scy) =
            (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for &(t, y) in samples {
            let (s, c) = (w * t).sin_cos();
            ss += s;
            sc += c;
            sss += s * s;
            ssc += s * c;
            scc += c * c;
            ssy += s * y;
            scy += c * y;
        }
        for j in 0..p_steps {
            let (sp, cp) = (2.0 * PI * j as f64 / p_steps as f64).sin_cos();
            let su = cp * ss + sp * sc;
            let suu = cp * cp * sss + 2.0 * sp * cp * ssc + sp * sp * scc;
            let suy = cp * ssy + sp * scy;
            let det = n * suu - su * su;
            if det <= 0.0 {
                continue;
            }
            let a = ((n * suy - su * sy) / det).clamp(-2.0, 2.0);
            let d = ((sy - a * su) / n).clamp(-2.0, 2.0);
            let sse =
                syy - 2.0 * a * suy - 2.0 * d * sy + a * a * suu + 2.0 * a * d * su + n * d * d;
            best = best.min(sse);
        }
    }
    best
}

#[test]
fn ac4_de_against_grid_oracle() {
    let de_cfg = DeConfig::default();
    let mut passed = 0;
    let mut ratios = Vec::new();
    for k in 0..20u64 {
        let spec = SynthSpec {
            duration_s: 12.0,
            noise_sigma_cm: 1.0,
            schedule: ccfit::synth::Schedule::constant(65.0 + 4.5 * k as f64, 4.0 + 0.1 * k as f64),
            phase0: 0.3 * k as f64,
            seed: 100 + k,
            ..SynthSpec::default()
        };
        let data = generate(&spec).unwrap();
        let end = 3.0 + 0.4 * k as f64;
        let samples: Vec<Sample> = data
            .frames
            .iter()
            .filter(|f| f.t > end - 3.0 && f.t <= end)
            .map(|f| frame_to_sample(f, JointType::Shoulders).unwrap())
            .collect();
        let window = Window::new(samples.clone(), end - 3.0, end, 3.0).unwrap();
        let de = DeConfig { seed: k, ..de_cfg };
        let (params, outcome) = fit_window(&window, &ParamBounds::default(), &de).unwrap();
        assert!(ParamBounds::default().contains(&params));
        let oracle = grid_oracle_sse(&samples.iter().map(|s| (s.t, s.d)).collect::<Vec<_>>());
        let ratio = outcome.best.cost / oracle;
        ratios.push(ratio);
        if outcome.best.cost <= 1.01 * oracle {
            passed += 1;
        }
    }
    let worst = ratios.iter().cloned().fold(0.0, f64::max);
    report(
        "AC4",
        "DE SSE within 1% of grid oracle on ≥ 18/20 windows",
        passed >= 18,
        format!("{passed}/20, worst DE/oracle ratio {worst:.6}"),
    );
}

fn brute_force_ratio(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let mean = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let total = pairs.iter().map(|p| (p.1 - mean).powi(2)).sum::<f64>() / n;
    let mut between = 0.0;
    for &(x, _) in pairs {
        let group: Vec<f64> = pairs.iter().filter(|p| p.0 == x).map(|p| p.1).collect();
        let m = group.iter().sum::<f64>() / group.len() as f64;
        between += (m - mean).powi(2);
    }
    between / n / total
}

#[test]
fn ac5_correlation_ratio() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let levels = rng.random_range(2..6);
        let pairs: Vec<(f64, f64)> = (0..rng.random_range(10..60))
            .map(|_| {
                let x = rng.random_range(0..levels) as f64;
                (x, 0.7 * x + rng.random::<f64>() * 3.0)
            })
            .collect();
        if pairs.iter().all(|p| p.0 == pairs[0].0) {
            continue;
        }
        let got = correlation_ratio(&pairs).unwrap();
        worst = worst.max((got - brute_force_ratio(&pairs)).abs());
    }
    let xs: [f64; 4] = [10.0, 20.0, 30.0, 40.0];
    let det: Vec<(f64, f64)> = xs
        .iter()
        .flat_map(|&x| (0..3).map(move |_| (x, (x / 10.0).sqrt())))
        .collect();
    let ind: Vec<(f64, f64)> = xs
        .iter()
        .flat_map(|&x| [1.5, 2.5, 4.0].into_iter().map(move |z| (x, z)))
        .collect();
    let eta_det = correlation_ratio(&det).unwrap();
    let eta_ind = correlation_ratio(&ind).unwrap();
    let ok = worst <= 1e-9 && (eta_det - 1.0).abs() <= 1e-9 && eta_ind.abs() <= 1e-9;
    report(
        "AC5",
        "correlation ratio",
        ok,
        format!(
            "max |Δ| vs brute force {worst:e}, deterministic {eta_det}, independent {eta_ind:e}"
        ),
    );
}

#[test]
fn ac6_weighted_mean_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut scaling, mut bounded, mut equal) = (true, true, true);
    for _ in 0..2000 {
        let pairs: Vec<(f64, f64)> = (0..rng.random_range(1..8))
            .map(|_| (rng.random_range(0.01..1.0), rng.random_range(40.0..180.0)))
            .collect();
        let base = weighted_mean(pairs.iter().copied()).unwrap();
        for k in [-6, -3, -1, 1, 2, 5] {
            let s = 2f64.powi(k);
            scaling &= weighted_mean(pairs.iter().map(|&(w, v)| (w * s, v))) == Some(base);
        }
        let lo = pairs.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let hi = pairs.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        bounded &= lo <= base && base <= hi;
        let mean = pairs.iter().map(|p| p.1).sum::<f64>() / pairs.len() as f64;
        for w in [1.0, 0.5, 0.25] {
            equal &= weighted_mean(pairs.iter().map(|&(_, v)| (w, v))) == Some(mean);
        }
    }
    report(
        "AC6",
        "overlap-weighted mean",
        scaling && bounded && equal,
        format!("scaling exact {scaling}, bounded {bounded}, equal weights exact {equal}"),
    );
}

#[derive(Default)]
struct Audit {
    lo: Vec<f64>,
    hi: Vec<f64>,
    out_of_bounds: usize,
    bad_donors: usize,
    multi_changes: usize,
    single_changes: usize,
    trials: usize,
    parent_costs: Vec<f64>,
    regressions: usize,
}

impl Observer<f64> for Audit {
    fn on_mutation(&mut self, target: usize, d: [usize; 3]) {
        if d[0] == d[1] || d[0] == d[2] || d[1] == d[2] || d.contains(&target) {
            self.bad_donors += 1;
        }
    }

    fn on_trial(&mut self, _target: usize, parent: &[f64], trial: &[f64]) {
        let changed = parent.iter().zip(trial).filter(|(a, b)| a != b).count();
        self.trials += 1;
        match changed {
            0 | 1 => self.single_changes += 1,
            _ => self.multi_changes += 1,
        }
    }

    fn on_generation(&mut self, _g: usize, pop: &[Individual<f64>]) {
        for ind in pop {
            if ind
                .x
                .iter()
                .enumerate()
                .any(|(j, &v)| v < self.lo[j] || v > self.hi[j])
            {
                self.out_of_bounds += 1;
            }
        }
        let costs: Vec<f64> = pop.iter().map(|i| i.cost).collect();
        if !self.parent_costs.is_empty() {
            self.regressions += costs
                .iter()
                .zip(&self.parent_costs)
                .filter(|(c, p)| c > p)
                .count();
        }
        self.parent_costs = costs;
    }
}

#[test]
fn ac7_de_invariants() {
    let lo = vec![-5.0, -1.0, 0.0, 2.0];
    let hi = vec![5.0, 1.0, 3.0, 2.5];
    let bounds = Bounds::new(lo.clone(), hi.clone()).unwrap();
    let cost = |x: &[f64]| {
        x.iter()
            .enumerate()
            .map(|(j, v)| (v - 0.3 * j as f64).powi(2))
            .sum::<f64>()
    };

    let cfg = DeConfig {
        pop_size: 12,
        max_generations: 60,
        vtr: -1.0,
        seed: 3,
        ..DeConfig::default()
    };
    let mut audit = Audit {
        lo: lo.clone(),
        hi: hi.clone(),
        ..Audit::default()
    };
    let out = de::optimize_with_observer(cost, &bounds, &cfg, &mut audit).unwrap();
    let monotone = out.cost_trace.windows(2).all(|w| w[1] <= w[0]);

    let cr0 = DeConfig { cr: 0.0, ..cfg };
    let mut audit0 = Audit {
        lo: lo.clone(),
        hi: hi.clone(),
        ..Audit::default()
    };
    de::optimize_with_observer(cost, &bounds, &cr0, &mut audit0).unwrap();

    let parent = Individual {
        x: vec![1.0],
        cost: 2.0,
    };
    let tie = de::select(
        parent.clone(),
        Individual {
            x: vec![9.0],
            cost: 2.0,
        },
    );
    let tie_keeps_parent = tie == parent;

    let again = de::optimize(cost, &bounds, &cfg).unwrap();
    let bitwise = again
        .best
        .x
        .iter()
        .zip(&out.best.x)
        .all(|(a, b)| a.to_bits() == b.to_bits())
        && again
            .cost_trace
            .iter()
            .zip(&out.cost_trace)
            .all(|(a, b)| a.to_bits() == b.to_bits());

    let ok = monotone
        && audit.out_of_bounds == 0
        && audit.regressions == 0
        && audit.bad_donors == 0
        && audit0.bad_donors == 0
        && audit0.multi_changes == 0
        && audit0.trials > 0
        && tie_keeps_parent
        && bitwise;
    report(
        "AC7",
        "DE invariants",
        ok,
        format!(
            "monotone {monotone}, out-of-bounds {}, donor violations {}, CR=0 multi-component trials {}/{}, tie keeps parent {tie_keeps_parent}, bitwise repeat {bitwise}",
            audit.out_of_bounds,
            audit.bad_donors + audit0.bad_donors,
            audit0.multi_changes,
            audit0.trials
        ),
    );
}

fn tilt(frames: &[JointFrame], onto: &FloorPlane) -> Vec<f64> {
    frames
        .iter()
        .map(|f| {
            frame_to_sample(
                &JointFrame {
                    plane: *onto,
                    ..f.clone()
                },
                JointType::Shoulders,
            )
            .unwrap()
            .d
        })
        .collect()
}

#[test]
fn ac8_geometry() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_scale = 0.0f64;
    for _ in 0..1000 {
        let n = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(0.2..1.0),
        ];
        let plane = FloorPlane {
            n,
            a: rng.random_range(-2.0..2.0),
        };
        let v = [
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
        ];
        let d = plane_distance(&plane, v).unwrap();
        for s in [1e-3, 0.37, 3.0, 1e4] {
            let scaled = FloorPlane {
                n: [n[0] * s, n[1] * s, n[2] * s],
                a: plane.a * s,
            };
            worst_scale = worst_scale.max((plane_distance(&scaled, v).unwrap() - d).abs());
        }
    }

    let base = SynthSpec {
        noise_sigma_cm: 1.0,
        duration_s: 60.0,
        seed: 1,
        ..SynthSpec::default()
    };
    let rotated = SynthSpec {
        plane: FloorPlane {
            n: [1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0],
            a: 0.9,
        },
        ..base.clone()
    };
    let a = generate(&base).unwrap();
    let b = generate(&rotated).unwrap();
    let worst_d = tilt(&a.frames, &base.plane)
        .iter()
        .zip(tilt(&b.frames, &rotated.plane))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);

    let cfg = stream_cfg(50, 500, 1e-4);
    let ra = run_stream(&a.frames, &cfg).unwrap();
    let rb = run_stream(&b.frames, &cfg).unwrap();
    let worst_cpm = ra
        .fits()
        .zip(rb.fits())
        .map(|(x, y)| (x.cpm() - y.cpm()).abs())
        .fold(0.0, f64::max);
    let same_count = ra.fits().count() == rb.fits().count();

    let ok = worst_scale <= 1e-12 && same_count && worst_cpm <= 1e-9;
    report(
        "AC8",
        "geometry invariance",
        ok,
        format!(
            "normal scaling max |Δd| {worst_scale:e} m, twin samples max |Δd| {worst_d:e} m, twin fits max |Δcpm| {worst_cpm:e}"
        ),
    );
}

#[test]
fn ac9_scheduling() {
    let mut count_ok = true;
    let mut lookahead = 0usize;
    let mut runs = 0;
    for (duration, rate) in [(10.0, 30.0), (30.5, 30.0), (47.0, 15.0)] {
        let data = generate(&SynthSpec {
            duration_s: duration,
            frame_rate: rate,
            ..SynthSpec::default()
        })
        .unwrap();
        for f_u in [0.5, 1.0, 2.0] {
            for s_len in [2.0, 3.0, 5.0] {
                let cfg = StreamConfig {
                    update_hz: f_u,
                    window_s: s_len,
                    ..stream_cfg(4, 1, -1.0)
                };
                let expected = ((duration - s_len) * f_u).floor() as usize + 1;
                let schedule = update_schedule(0.0, duration, &cfg);
                let run = run_stream(&data.frames, &cfg).unwrap();
                count_ok &= schedule.len() == expected && run.items.len() == expected;
                for fit in run.fits() {
                    let visible = data
                        .frames
                        .iter()
                        .filter(|f| f.t > fit.t_update - s_len && f.t <= fit.t_update)
                        .count();
                    if fit.window_end > fit.t_update || fit.n_samples != visible {
                        lookahead += 1;
                    }
                }
                runs += 1;
            }
        }
    }
    report(
        "AC9",
        "update schedule",
        count_ok && lookahead == 0,
        format!("{runs} configurations, counts exact {count_ok}, windows with future samples {lookahead}"),
    );
}

fn sha(path: &Path) -> String {
    hex::encode(Sha256::digest(std::fs::read(path).unwrap()))
}

#[test]
fn ac10_byte_determinism() {
    let bin = env!("CARGO_BIN_EXE_ccfit");
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("trial.frames.jsonl");
    let events = dir.path().join("trial.events.csv");
    let status = Command::new(bin)
        .args([
            "synth",
            "--duration-s",
            "20",
            "--noise-cm",
            "1",
            "--seed",
            "4",
            "--out-frames",
        ])
        .arg(&frames)
        .arg("--out-events")
        .arg(&events)
        .status()
        .unwrap();
    assert!(status.success());

    let out = dir.path().join("pred.csv");
    let manifest = dir.path().join("pred.csv.manifest.json");
    let mut hashes = Vec::new();
    for _ in 0..2 {
        let status = Command::new(bin)
            .args(["fit", "--seed", "9", "--input"])
            .arg(&frames)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        hashes.push((sha(&out), sha(&manifest)));
    }
    report(
        "AC10",
        "fit output byte-identical across runs",
        hashes[0] == hashes[1],
        format!(
            "predictions {} / {}",
            &hashes[0].0[..12],
            &hashes[1].0[..12]
        ),
    );
}
