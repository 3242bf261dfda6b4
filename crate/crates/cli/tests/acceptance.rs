//! Acceptance checks. Prints one PASS / FAIL / SKIP line per criterion and
//! exits non-zero if any criterion fails.
//!
//! Criterion 9 runs only when `GESTURENET_DATASET` names a manifest of the
//! original recordings.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use gesturenet::binarize::{binarize_kernel, binarize_model, binarized_conv_forward, BinarizedLayer};
use gesturenet::dataset::{augment_samples, load_manifest, make_folds, synth_generate, SynthConfig, ROTATION_ANGLES};
use gesturenet::eval::{prepare_dataset, run_cross_validation, summary_stats, ConfusionMatrix, PreparedSample};
use gesturenet::nn::{conv2d_forward, xavier_init, LayerSpec, Network};
use gesturenet::segmentation::pnm::{load_depth, load_mask};
use gesturenet::segmentation::{segment_full_resolution, segment_hand, threshold_depth, BinaryMask, DepthMap, SegmentationParams};
use gesturenet::train::{Mode, TrainConfig};
use gesturenet::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SYNTH_SEED: u64 = 7;
/// Training settings for the synthetic cross-validation runs.
const FLOAT_RUN: TrainConfig = TrainConfig {
    epochs: 2,
    lr: 0.01,
    lr_decay: 1.0,
    momentum: 0.9,
    batch_size: 32,
    seed: 7,
    mode: Mode::Float,
    gradient_rule: gesturenet::binarize::GradientRule::StraightThrough,
};
const BINARIZED_RUN: TrainConfig = TrainConfig {
    epochs: 4,
    lr: 0.02,
    lr_decay: 0.6,
    mode: Mode::Binarized,
    ..FLOAT_RUN
};
const TIME_LIMIT: Duration = Duration::from_secs(600);

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// 1 ---------------------------------------------------------------------------

fn objective(w: &[f64], alpha: f64, b: &[f64]) -> f64 {
    w.iter().zip(b).map(|(w, b)| (w - alpha * b).powi(2)).sum()
}

fn binarization_optimality() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for case in 0..200 {
        let n = rng.gen_range(1..=12);
        let w: Vec<f32> = (0..n)
            .map(|_| if rng.gen_bool(0.05) { 0.0 } else { rng.gen_range(-2.0f32..2.0) })
            .collect();
        let wd: Vec<f64> = w.iter().map(|&v| v as f64).collect();
        // exhaustive search over every sign pattern with its best scale
        let mut best = f64::INFINITY;
        for pattern in 0u32..(1 << n) {
            let b: Vec<f64> = (0..n).map(|i| if pattern >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
            let alpha = wd.iter().zip(&b).map(|(w, b)| w * b).sum::<f64>() / n as f64;
            best = best.min(objective(&wd, alpha, &b));
        }
        let k = binarize_kernel(&w).map_err(|e| e.to_string())?;
        let b: Vec<f64> = k.signs().iter().map(|&s| s as f64).collect();
        let got = objective(&wd, k.scale() as f64, &b);
        check(
            got <= best + 1e-6 * (1.0 + best),
            format!("case {case}: J = {got} but the minimum is {best}"),
        )?;
        for (&wi, &bi) in w.iter().zip(&b) {
            if wi != 0.0 {
                check(bi == wi.signum() as f64, format!("case {case}: sign of {wi} is {bi}"))?;
            }
        }
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(10), format!("took {elapsed:?}"))?;
    Ok(format!("200 kernels match exhaustive search in {elapsed:.2?}"))
}

// 2 ---------------------------------------------------------------------------

fn gradient_correctness() -> Outcome {
    let layers = vec![
        LayerSpec::conv(2, 3, 3, 1),
        LayerSpec::Relu,
        LayerSpec::max_pool(2, 2),
        LayerSpec::fully_connected(18, 3),
        LayerSpec::Softmax,
    ];
    let mut net = Network::<f64>::new(layers).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    xavier_init(&mut net, &mut rng);
    for p in net.params_mut().iter_mut().flatten() {
        for b in &mut p.biases {
            *b = rng.gen_range(-0.1..0.1);
        }
    }
    let input = Tensor::from_fn(&[8, 8, 1], |_| rng.gen_range(-1.0..1.0));
    let label = 1;
    let loss = |net: &Network<f64>| -net.forward(&input).unwrap()[label].ln();
    let cache = net.forward_cached(&input).map_err(|e| e.to_string())?;
    let (_, grads) = net.backward(&cache, label).map_err(|e| e.to_string())?;
    let h = 1e-5;
    let (mut worst, mut count) = (0.0f64, 0);
    for layer in 0..net.layers().len() {
        let Some(g) = grads.layers[layer].clone() else { continue };
        let analytic: Vec<f64> = g.weights.iter().chain(&g.biases).copied().collect();
        for (idx, &a) in analytic.iter().enumerate() {
            let bump = |net: &mut Network<f64>, d: f64| {
                let p = net.params_mut()[layer].as_mut().unwrap();
                let nw = p.weights.len();
                if idx < nw {
                    p.weights.data_mut()[idx] += d;
                } else {
                    p.biases[idx - nw] += d;
                }
            };
            bump(&mut net, h);
            let plus = loss(&net);
            bump(&mut net, -2.0 * h);
            let minus = loss(&net);
            bump(&mut net, h);
            let numeric = (plus - minus) / (2.0 * h);
            let scale = a.abs().max(numeric.abs());
            let err = if scale < 1e-8 { (a - numeric).abs() } else { (a - numeric).abs() / scale };
            worst = worst.max(err);
            count += 1;
        }
    }
    check(worst < 1e-4, format!("worst relative error {worst:e}"))?;
    Ok(format!("{count} parameters, worst relative error {worst:.2e}"))
}

// 3 ---------------------------------------------------------------------------

fn architecture_fidelity() -> Outcome {
    let net = Network::<f32>::canonical();
    let trace = net.shape_trace(&[50, 50, 1]).map_err(|e| e.to_string())?;
    let mut distinct: Vec<Vec<usize>> = Vec::new();
    for s in trace {
        if distinct.last() != Some(&s) {
            distinct.push(s);
        }
    }
    let expected: Vec<Vec<usize>> = vec![
        vec![50, 50, 1],
        vec![46, 46, 50],
        vec![23, 23, 50],
        vec![21, 21, 20],
        vec![7, 7, 20],
        vec![50],
        vec![10],
    ];
    check(distinct == expected, format!("trace {distinct:?}"))?;
    check(net.weight_count() == 59_750, format!("{} weights", net.weight_count()))?;
    check(net.bias_count() == 130, format!("{} biases", net.bias_count()))?;
    Ok("50x50x1 -> 46x46x50 -> 23x23x50 -> 21x21x20 -> 7x7x20 -> 50 -> 10, 59750 weights, 130 biases".into())
}

// 4 ---------------------------------------------------------------------------

fn augmentation_protocol(manifest: &Path) -> Outcome {
    let originals = load_manifest(manifest).map_err(|e| e.to_string())?;
    check(originals.len() == 1400, format!("{} originals", originals.len()))?;
    let all = augment_samples(&originals);
    check(all.len() == 12_600, format!("{} augmented samples", all.len()))?;
    check(
        ROTATION_ANGLES == [-20, -15, -10, -5, 0, 5, 10, 15, 20],
        format!("angles {ROTATION_ANGLES:?}"),
    )?;
    Ok("1400 originals -> 12600 samples at -20..20 step 5".into())
}

// 5 ---------------------------------------------------------------------------

fn storage_reduction() -> Outcome {
    let mut net = Network::<f32>::canonical();
    xavier_init(&mut net, &mut ChaCha8Rng::seed_from_u64(5));
    let s = binarize_model(&net).storage();
    check(s.float_weight_bytes == 239_000, format!("{} float bytes", s.float_weight_bytes))?;
    check(s.sign_bytes == 7_560 && s.scale_bytes == 520, format!("{} + {} bytes", s.sign_bytes, s.scale_bytes))?;
    check(s.float_weight_bytes * 8 == 32 * s.weights, "bit ratio is not 32")?;
    check(s.ratio() >= 29.0, format!("ratio {}", s.ratio()))?;
    Ok(format!(
        "239000 B -> 7560 B signs + 520 B scales ({:.2}x), 32x at the bit level",
        s.ratio()
    ))
}

// 6 ---------------------------------------------------------------------------

fn binarized_conv_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f32;
    for case in 0..1000 {
        let (kh, kw) = (rng.gen_range(1..=5), rng.gen_range(1..=5));
        let (h, w) = (kh + rng.gen_range(0..8), kw + rng.gen_range(0..8));
        let (c, kernels) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        let spec = LayerSpec::conv(kernels, kh, kw, c);
        let input = Tensor::from_fn(&[h, w, c], |_| rng.gen_range(-1.0f32..1.0));
        let weights: Vec<f32> = (0..kernels * kh * kw * c).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        let biases: Vec<f32> = (0..kernels).map(|_| rng.gen_range(-0.5f32..0.5)).collect();
        let bin: Vec<_> = weights
            .chunks_exact(kh * kw * c)
            .map(|k| binarize_kernel(k).unwrap())
            .collect();
        let dense = Tensor::new(vec![kernels, kh, kw, c], bin.iter().flat_map(|k| k.materialize()).collect())
            .map_err(|e| e.to_string())?;
        let reference = conv2d_forward(&input, &dense, &biases).map_err(|e| e.to_string())?;
        let layer = BinarizedLayer { kernels: bin, biases };
        let out = binarized_conv_forward(&input, &spec, &layer).map_err(|e| e.to_string())?;
        let diff = reference
            .data()
            .iter()
            .zip(out.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        check(diff <= 1e-5, format!("case {case}: max difference {diff}"))?;
        worst = worst.max(diff);
    }
    Ok(format!("1000 cases, max abs difference {worst:.1e}"))
}

// 7 ---------------------------------------------------------------------------

fn segmentation_golden() -> Outcome {
    let d = DepthMap::from_rows(&[&[0, 5, 6], &[4, 4, 9], &[8, 9, 9]]).map_err(|e| e.to_string())?;
    let t = threshold_depth(&d, 3).map_err(|e| e.to_string())?;
    let expected = BinaryMask::from_ascii("011\n110\n000").unwrap();
    check(t.min_depth == 4 && t.mask == expected, "3x3 worked example differs")?;

    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/golden");
    let mut frames: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "pgm"))
        .collect();
    frames.sort();
    check(frames.len() == 10, format!("{} golden frames", frames.len()))?;
    let params = SegmentationParams::default();
    for f in &frames {
        let depth = load_depth(f).map_err(|e| e.to_string())?;
        let full = segment_full_resolution(&depth, &params).map_err(|e| e.to_string())?;
        let small = segment_hand(&depth, &params).map_err(|e| e.to_string())?;
        check(full.mask == load_mask(f.with_extension("full.pbm")).unwrap(), format!("{} full mask", f.display()))?;
        check(small == load_mask(f.with_extension("mask.pbm")).unwrap(), format!("{} 50x50 mask", f.display()))?;
    }
    Ok("10 golden frames bit-exact; 3x3 example m=4, T=7".into())
}

// 8 ---------------------------------------------------------------------------

fn cross_validate(data: &[PreparedSample], config: &TrainConfig) -> Result<(f64, ConfusionMatrix), String> {
    let persons: Vec<u32> = data.iter().map(|p| p.sample.person).collect();
    let plan = make_folds(&persons, config.seed).map_err(|e| e.to_string())?;
    let report = run_cross_validation(data, &plan, config).map_err(|e| e.to_string())?;
    check(report.failed_folds().is_empty(), format!("failed folds {:?}", report.failed_folds()))?;
    let stats = report.stats.ok_or("no statistics")?;
    Ok((stats.mean_accuracy, report.merged))
}

fn end_to_end(dir: &Path, synth_time: Duration) -> Outcome {
    let start = Instant::now();
    let samples = load_manifest(dir.join("dataset.csv")).map_err(|e| e.to_string())?;
    let data = prepare_dataset(&samples, &SegmentationParams::default()).map_err(|e| e.to_string())?;
    let (float, float_cm) = cross_validate(&data, &FLOAT_RUN)?;
    let (binarized, bin_cm) = cross_validate(&data, &BINARIZED_RUN)?;
    let elapsed = synth_time + start.elapsed();
    let summary = format!(
        "float {float:.2}%, binarized {binarized:.2}% (gap {:.2}), {:.0?}",
        float - binarized,
        elapsed
    );
    let tables = format!("\nfloat:\n{}binarized:\n{}", float_cm.render_table(), bin_cm.render_table());
    check(float >= 95.0, format!("{summary}: float below 95%{tables}"))?;
    check(float - binarized <= 5.0, format!("{summary}: gap above 5 points{tables}"))?;
    check(elapsed < TIME_LIMIT, format!("{summary}: over the time limit"))?;
    Ok(summary)
}

// 9 ---------------------------------------------------------------------------

fn original_dataset() -> Option<Outcome> {
    let manifest = std::env::var_os("GESTURENET_DATASET")?;
    Some((|| {
        let samples = load_manifest(&manifest).map_err(|e| e.to_string())?;
        let data = prepare_dataset(&samples, &SegmentationParams::default()).map_err(|e| e.to_string())?;
        let full = TrainConfig {
            epochs: 30,
            ..FLOAT_RUN
        };
        let (float, _) = cross_validate(&data, &full)?;
        let (binarized, _) = cross_validate(&data, &TrainConfig { mode: Mode::Binarized, ..full })?;
        Ok(format!(
            "float {float:.2}% (reference 94.86, deviation {:+.2}); binarized {binarized:.2}% (reference 92.07, deviation {:+.2})",
            float - 94.86,
            binarized - 92.07
        ))
    })())
}

// 10 --------------------------------------------------------------------------

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_gesturenet"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    check(
        out.status.success(),
        format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)),
    )
}

fn determinism(work: &Path) -> Outcome {
    let data = work.join("small");
    let s = |p: &Path| p.to_str().unwrap().to_string();
    run_cli(&["synth", "--out", &s(&data), "--seed", "8", "--persons", "4", "--repetitions", "2"])?;
    let manifest = s(&data.join("dataset.csv"));
    let mut outputs = Vec::new();
    for threads in ["1", "8"] {
        let mut files = Vec::new();
        for mode in ["float", "binarized"] {
            let model = work.join(format!("{mode}-{threads}.model"));
            let report = work.join(format!("{mode}-{threads}.json"));
            let common = ["--dataset", &manifest, "--seed", "4", "--epochs", "1", "--mode", mode, "--threads", threads];
            run_cli(&[&["train", "--out", &s(&model)], &common[..]].concat())?;
            run_cli(&[&["eval", "--out", &s(&report)], &common[..]].concat())?;
            for f in [model.clone(), report, PathBuf::from(format!("{}.log.json", model.display()))] {
                files.push(std::fs::read(&f).map_err(|e| format!("{}: {e}", f.display()))?);
            }
        }
        outputs.push(files);
    }
    check(outputs[0] == outputs[1], "outputs differ between 1 and 8 threads")?;
    Ok(format!("{} model, log and report files identical at 1 and 8 threads", outputs[0].len()))
}

// 11 --------------------------------------------------------------------------

fn evaluation_arithmetic() -> Outcome {
    let diag = [99u64, 96, 96, 91, 94, 86, 90, 86, 97, 78];
    let counts = (0..10)
        .map(|i| (0..10).map(|j| if i == j { diag[i] } else if j == (i + 1) % 10 { 100 - diag[i] } else { 0 }).collect())
        .collect();
    let cm = ConfusionMatrix::from_counts(counts).map_err(|e| e.to_string())?;
    let s = summary_stats(&cm).map_err(|e| e.to_string())?;
    check((s.mean_accuracy - 91.28).abs() <= 0.5, format!("mean {}", s.mean_accuracy))?;
    check(s.min_accuracy == 78.0, format!("min {}", s.min_accuracy))?;
    Ok(format!("mean {:.2} (reference 91.28), min {}", s.mean_accuracy, s.min_accuracy))
}

// ---------------------------------------------------------------------------

fn run(results: &mut Vec<bool>, id: u32, name: &str, f: impl FnOnce() -> Option<Outcome>) {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Some(Err(format!("panicked: {msg}")))
    });
    match outcome {
        None => println!("criterion {id:>2} SKIP  {name}: GESTURENET_DATASET not set"),
        Some(Ok(detail)) => {
            println!("criterion {id:>2} PASS  {name}: {detail}");
            results.push(true);
        }
        Some(Err(detail)) => {
            println!("criterion {id:>2} FAIL  {name}: {detail}");
            results.push(false);
        }
    }
}

fn main() {
    let work = tempfile::tempdir().expect("temp dir");
    let synth_dir = work.path().join("synth");
    let start = Instant::now();
    let generated = synth_generate(&synth_dir, &SynthConfig::default(), SYNTH_SEED);
    let synth_time = start.elapsed();

    let mut results = Vec::new();
    run(&mut results, 1, "binarization optimality", || Some(binarization_optimality()));
    run(&mut results, 2, "gradient correctness", || Some(gradient_correctness()));
    run(&mut results, 3, "architecture fidelity", || Some(architecture_fidelity()));
    run(&mut results, 4, "augmentation protocol", || {
        Some(match &generated {
            Ok(_) => augmentation_protocol(&synth_dir.join("dataset.csv")),
            Err(e) => Err(e.to_string()),
        })
    });
    run(&mut results, 5, "storage reduction", || Some(storage_reduction()));
    run(&mut results, 6, "binarized convolution equivalence", || Some(binarized_conv_equivalence()));
    run(&mut results, 7, "segmentation golden corpus", || Some(segmentation_golden()));
    run(&mut results, 8, "synthetic end-to-end cross-validation", || {
        Some(match &generated {
            Ok(_) => end_to_end(&synth_dir, synth_time),
            Err(e) => Err(e.to_string()),
        })
    });
    run(&mut results, 9, "original dataset (optional)", original_dataset);
    run(&mut results, 10, "determinism across thread counts", || Some(determinism(work.path())));
    run(&mut results, 11, "evaluation arithmetic", || Some(evaluation_arithmetic()));

    let failed = results.iter().filter(|r| !**r).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
