//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Metric references below are written from the definitions and do
//! not call into the metric module.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sage_core::fusion::{
    bbox_amplify, depth_boost, run_sage_net, ConstantMap, Counting, FixedDetector, FrameMeta,
    ScriptedIntent, PERSON,
};
use sage_core::groundtruth::{build_sage_frame, CategoryFilter, InstanceDetection};
use sage_core::harness::{evaluate_corpus, EvalOptions, Pipeline, Regime};
use sage_core::map::{self, decode_smap, encode_smap};
use sage_core::metrics::{self, FScore, MetricName, ThresholdPolicy};
use sage_core::synth::{canned, generate_corpus, render_frame, Seed};
use sage_core::{
    BBox, BinaryMask, ClipWindow, GridDims, Intent, PipelineConfig, ProviderBundle, SalMap,
};

type Outcome = Result<(), String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Outcome {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Outcome {
    ensure(elapsed < limit, || {
        format!("took {elapsed:?}, limit {limit:?}")
    })
}

fn dims(h: usize, w: usize) -> GridDims {
    GridDims::new(h, w).unwrap()
}

fn random_map(rng: &mut ChaCha8Rng, d: GridDims) -> SalMap {
    SalMap::new(d, (0..d.len()).map(|_| rng.random::<f32>()).collect()).unwrap()
}

fn ulp_distance(a: f32, b: f32) -> u32 {
    (a.to_bits() as i64 - b.to_bits() as i64).unsigned_abs() as u32
}

fn operator_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let d = dims(8, 8);
    for case in 0..200 {
        let y = random_map(&mut rng, d);
        let zero = depth_boost(&y, &SalMap::zeros(d)).map_err(|e| e.to_string())?;
        ensure(zero == y, || {
            format!("case {case}: zero nearness changed the map")
        })?;
        let unit = depth_boost(&y, &SalMap::filled(d, 1.0)).map_err(|e| e.to_string())?;
        for (o, i) in unit.data().iter().zip(y.data()) {
            ensure(ulp_distance(*o, 2.0 * i) <= 1, || {
                format!("case {case}: {o} vs 2*{i}")
            })?;
        }
        let n = random_map(&mut rng, d);
        let out = depth_boost(&y, &n).map_err(|e| e.to_string())?;
        for ((o, a), b) in out.data().iter().zip(y.data()).zip(n.data()) {
            let oracle = *a as f64 * *b as f64 + *a as f64;
            ensure((*o as f64 - oracle).abs() <= 1e-7, || {
                format!("case {case}: depth {o} vs oracle {oracle}")
            })?;
        }

        ensure(
            bbox_amplify(&y, &[], 1.0).map_err(|e| e.to_string())? == y,
            || format!("case {case}: k=1 without boxes is not the identity"),
        )?;
        let x = rng.random_range(0..6);
        let yy = rng.random_range(0..6);
        let b = BBox::new(
            x,
            yy,
            rng.random_range(1..=8 - x),
            rng.random_range(1..=8 - yy),
            PERSON,
        );
        ensure(
            bbox_amplify(&y, std::slice::from_ref(&b), 1.0).map_err(|e| e.to_string())? == y,
            || format!("case {case}: k=1 is not the identity"),
        )?;
        if b.w * b.h == 64 {
            continue;
        }
        let ratio = |m: &SalMap| {
            let (mut si, mut ni, mut so, mut no) = (0.0f64, 0usize, 0.0f64, 0usize);
            for r in 0..8 {
                for c in 0..8 {
                    if b.contains(r, c) {
                        si += m.get(r, c) as f64;
                        ni += 1;
                    } else {
                        so += m.get(r, c) as f64;
                        no += 1;
                    }
                }
            }
            (si / ni as f64) / (so / no as f64)
        };
        let amp = bbox_amplify(&y, std::slice::from_ref(&b), 2.0).map_err(|e| e.to_string())?;
        let (before, after) = (ratio(&y), ratio(&amp));
        ensure(((after / before) - 4.0).abs() <= 1e-6, || {
            format!("case {case}: ratio grew by {} instead of 4", after / before)
        })?;
    }
    within(start.elapsed(), Duration::from_secs(1))
}

fn clip(v_ego: f64) -> ClipWindow {
    ClipWindow::from_metas("gate", (0..16).map(|i| FrameMeta::new(i, v_ego)).collect()).unwrap()
}

fn gating_counts() -> Outcome {
    let d = dims(8, 8);
    let config = PipelineConfig::default();
    let cases = [
        (config.v_thresh + 0.5, Intent::Crossing, 0, 0),
        (60.0, Intent::Crossing, 0, 0),
        (config.v_thresh - 5.0, Intent::NotCrossing, 1, 0),
        (config.v_thresh, Intent::Crossing, 1, 1),
    ];
    for (v, scripted, want_intent, want_detect) in cases {
        let intent = Arc::new(Counting::new(ScriptedIntent(scripted)));
        let detector = Arc::new(Counting::new(FixedDetector(vec![BBox::new(
            1, 1, 2, 3, PERSON,
        )])));
        let bundle = ProviderBundle::new(
            Arc::new(ConstantMap(SalMap::filled(d, 0.5))),
            Arc::new(ConstantMap(SalMap::filled(d, 0.25))),
            intent.clone(),
            detector.clone(),
        );
        run_sage_net(&clip(v), &bundle, &config).map_err(|e| e.to_string())?;
        ensure(
            intent.calls() == want_intent && detector.calls() == want_detect,
            || {
                format!(
                    "v_ego {v}, {scripted:?}: intent {} detector {} calls, wanted {want_intent} / {want_detect}",
                    intent.calls(),
                    detector.calls()
                )
            },
        )?;
    }
    Ok(())
}

fn sage_contract() -> Outcome {
    let scenes = [canned::crossing(), canned::approaching()];
    let filter = CategoryFilter::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..100u64 {
        let scene = &scenes[(i % 2) as usize];
        let frame = i % scene.n_frames as u64;
        let art = render_frame(scene, Seed(i), frame);
        let d = art.gaze.dims();
        let noise = BinaryMask::from_fn(d, |_, _| rng.random_bool(0.2));
        let instances = vec![
            InstanceDetection::new("person", art.mask.clone(), 0.9).unwrap(),
            InstanceDetection::new("building", noise.clone(), 0.99).unwrap(),
            InstanceDetection::new("car", noise, 0.2).unwrap(),
        ];
        let sage =
            build_sage_frame(&art.gaze, &instances, &filter, d).map_err(|e| e.to_string())?;
        let norm = map::normalize_max(&art.gaze);
        for idx in 0..d.len() {
            let (r, c) = (idx / d.width, idx % d.width);
            let want = if art.mask.get(r, c) {
                1.0
            } else {
                norm.get(r, c)
            };
            ensure(sage.get(r, c).to_bits() == want.to_bits(), || {
                format!("frame {i} pixel ({r},{c}): {} vs {want}", sage.get(r, c))
            })?;
        }
    }
    Ok(())
}

fn ref_kl(pred: &[f32], gt: &[f32]) -> f64 {
    let sp: f64 = pred.iter().map(|&v| v as f64).sum();
    let sq: f64 = gt.iter().map(|&v| v as f64).sum();
    let eps = 1e-12;
    let mut total = 0.0;
    for i in 0..pred.len() {
        let q = gt[i] as f64 / sq;
        let p = pred[i] as f64 / sp;
        total += q * (eps + q / (p + eps)).ln();
    }
    total.max(0.0)
}

fn ref_cc(a: &[f32], b: &[f32]) -> f64 {
    let n = a.len() as f64;
    let (mut sa, mut sb, mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..a.len() {
        let (x, y) = (a[i] as f64, b[i] as f64);
        sa += x;
        sb += y;
        sab += x * y;
        saa += x * x;
        sbb += y * y;
    }
    let cov = sab / n - (sa / n) * (sb / n);
    let va = saa / n - (sa / n).powi(2);
    let vb = sbb / n - (sb / n).powi(2);
    cov / (va * vb).sqrt()
}

fn ref_f1(pred: &[f32], gt: &[u8]) -> f64 {
    let mean = pred.iter().map(|&v| v as f64).sum::<f64>() / pred.len() as f64;
    let tau = (2.0 * mean).min(1.0);
    let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
    for i in 0..pred.len() {
        let hit = pred[i] as f64 >= tau;
        match (hit, gt[i] == 1) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, true) => fn_ += 1.0,
            _ => {}
        }
    }
    if tp + fp + fn_ == 0.0 {
        return 1.0;
    }
    2.0 * tp / (2.0 * tp + fp + fn_)
}

fn ref_mae(pred: &[f32], gt: &[u8]) -> f64 {
    pred.iter()
        .zip(gt)
        .map(|(&p, &g)| (p as f64 - g as f64).abs())
        .sum::<f64>()
        / pred.len() as f64
}

fn metric_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let d = dims(8, 8);
    for case in 0..100 {
        let pred = random_map(&mut rng, d);
        let fix = random_map(&mut rng, d);
        let density = rng.random_range(0.05..0.6);
        let sem = BinaryMask::from_fn(d, |_, _| rng.random_bool(density));
        let scores = metrics::evaluate_frame(&pred, &fix, &sem, ThresholdPolicy::default())
            .map_err(|e| e.to_string())?;
        let refs = [
            ref_kl(pred.data(), fix.data()),
            ref_cc(pred.data(), fix.data()),
            ref_f1(pred.data(), sem.data()),
            ref_mae(pred.data(), sem.data()),
        ];
        for (s, r) in scores.iter().zip(refs) {
            ensure((s.value - r).abs() <= 1e-6, || {
                format!("case {case}: {} = {} vs reference {r}", s.name, s.value)
            })?;
        }
        let self_kl = metrics::kl_div(&pred, &pred)
            .map_err(|e| e.to_string())?
            .value;
        ensure(self_kl <= 1e-6, || {
            format!("case {case}: KL(p,p) = {self_kl}")
        })?;
        let ab = metrics::pearson_cc(&pred, &fix)
            .map_err(|e| e.to_string())?
            .value;
        let ba = metrics::pearson_cc(&fix, &pred)
            .map_err(|e| e.to_string())?
            .value;
        ensure(ab.to_bits() == ba.to_bits(), || {
            format!("case {case}: CC {ab} vs {ba}")
        })?;
    }
    for tp in 0..=12u64 {
        for fp in 0..=12u64 {
            for fn_ in 0..=12u64 {
                if tp + fp + fn_ == 0 {
                    continue;
                }
                let s = FScore::from_confusion(metrics::Confusion { tp, fp, fn_ }, 1.0)
                    .map_err(|e| e.to_string())?;
                let harmonic = if s.precision + s.recall == 0.0 {
                    0.0
                } else {
                    2.0 * s.precision * s.recall / (s.precision + s.recall)
                };
                ensure((s.value - harmonic).abs() <= 1e-12, || {
                    format!(
                        "tp {tp} fp {fp} fn {fn_}: F1 {} vs harmonic {harmonic}",
                        s.value
                    )
                })?;
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(5))
}

fn kl_asymmetry() -> Outcome {
    let row = |v: &[f32]| SalMap::from_rows(&[v]).unwrap();
    let gt = row(&[0.98, 0.01, 0.01]);
    let misses = metrics::kl_div(&row(&[0.01, 0.495, 0.495]), &gt)
        .unwrap()
        .value;
    let extras = metrics::kl_div(&row(&[0.495, 0.495, 0.01]), &gt)
        .unwrap()
        .value;
    ensure(misses > extras, || {
        format!("KL(FN) {misses} <= KL(FP) {extras}")
    })?;
    let v = metrics::kl_div(&row(&[0.9, 0.1]), &row(&[0.5, 0.5]))
        .unwrap()
        .value;
    ensure((v - 0.5108).abs() < 1e-3, || {
        format!("two-point KL {v}, expected 0.5108")
    })
}

fn crossing_end_to_end() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest =
        generate_corpus(&canned::crossing(), Seed(0), dir.path()).map_err(|e| e.to_string())?;
    ensure(
        manifest.clips.len() >= 10 && manifest.dims == dims(128, 256),
        || {
            format!(
                "corpus has {} clips at {}",
                manifest.clips.len(),
                manifest.dims
            )
        },
    )?;
    let opts = EvalOptions {
        regimes: vec![Regime::Sage],
        workers: 1,
        ..EvalOptions::default()
    };
    let eval = evaluate_corpus(&manifest, &ProviderBundle::file_backed(), &opts)
        .map_err(|e| e.to_string())?;
    ensure(eval.failures.is_empty(), || format!("{:?}", eval.failures))?;
    let f1 = |p| -> Vec<(String, f64)> {
        eval.rows
            .iter()
            .filter(|r| r.pipeline == p)
            .map(|r| (r.clip_id.clone(), r.value(MetricName::FBeta)))
            .collect()
    };
    let (raw, net) = (f1(Pipeline::Raw), f1(Pipeline::SageNet));
    ensure(raw.len() == manifest.clips.len(), || "missing rows".into())?;
    let mut gain = 0.0;
    for ((id, a), (_, b)) in raw.iter().zip(&net) {
        ensure(b > a, || format!("{id}: sage_net F1 {b:.4} <= raw {a:.4}"))?;
        gain += b - a;
    }
    ensure(gain > 0.0, || "mean improvement is not positive".into())?;
    within(start.elapsed(), Duration::from_secs(60))
}

fn sage_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sage"))
}

fn run(cmd: &mut Command) -> Outcome {
    let out = cmd.output().map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("{cmd:?} failed: {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_path_buf();
                out.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        run(sage_bin()
            .args([
                "synth-gen",
                "--spec",
                "crossing",
                "--spec",
                "empty_road",
                "--seed",
                "42",
                "--out",
            ])
            .arg(out))?;
    }
    let (ta, tb) = (tree(&a), tree(&b));
    ensure(!ta.is_empty() && ta == tb, || {
        "synth-gen trees differ".into()
    })?;

    for format in ["csv", "markdown"] {
        let mut reports = Vec::new();
        for workers in ["1", "8"] {
            let report = dir.path().join(format!("report-{workers}.{format}"));
            run(sage_bin()
                .args(["eval", "--manifest"])
                .arg(a.join("manifest.json"))
                .args(["--workers", workers, "--format", format, "--report"])
                .arg(&report))?;
            reports.push(fs::read(&report).map_err(|e| e.to_string())?);
        }
        ensure(reports[0] == reports[1], || {
            format!("{format} reports differ between 1 and 8 workers")
        })?;
    }
    Ok(())
}

fn format_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("m.smap");
    for i in 0..1000 {
        let d = dims(rng.random_range(1..24), rng.random_range(1..24));
        let data: Vec<f32> = (0..d.len())
            .map(|_| match rng.random_range(0..4) {
                0 => 0.0,
                1 => f32::from_bits(rng.random_range(1..0x0080_0000)),
                2 => rng.random::<f32>(),
                _ => rng.random_range(0.0f32..1e6),
            })
            .collect();
        let m = SalMap::new(d, data).map_err(|e| e.to_string())?;
        map::save_smap(&m, &path).map_err(|e| e.to_string())?;
        let back = map::load_smap(&path).map_err(|e| e.to_string())?;
        let same = back.dims() == m.dims()
            && back
                .data()
                .iter()
                .zip(m.data())
                .all(|(x, y)| x.to_bits() == y.to_bits());
        ensure(same, || format!("map {i} changed on round trip"))?;
        let bytes = encode_smap(&m);
        ensure(encode_smap(&decode_smap(&bytes).unwrap()) == bytes, || {
            format!("map {i} re-encodes differently")
        })?;
    }
    Ok(())
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("operator exactness", operator_exactness),
        ("gating call counts", gating_counts),
        ("SAGE ground-truth contract", sage_contract),
        ("metric oracle equivalence", metric_oracles),
        ("KL asymmetry", kl_asymmetry),
        ("crossing corpus end to end", crossing_end_to_end),
        ("determinism", determinism),
        ("format round trip", format_round_trip),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let ms = start.elapsed().as_millis();
        match outcome {
            Ok(()) => println!("PASS  {name} ({ms} ms)"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name} ({ms} ms): {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
