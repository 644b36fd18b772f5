//! One test per headline criterion. Each writes a PASS/FAIL line straight to
//! stderr so the verdict shows up even when output capture is on.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use mmp_ood::cli::{build_encoder, EncoderConfig};
use mmp_ood::linalg::Matrix;
use mmp_ood::metrics::{auroc, fpr_at_tpr, ks_statistic};
use mmp_ood::scoring::{gmp_score, mcm_score, mmp_score, ScoreConfig, ScoreKind};
use mmp_ood::synth::{generate_world, score_world, trial_config, verify_theorem, SynthConfig};
use mmp_ood::tuner::train::initial_model;
use mmp_ood::tuner::{gradcheck, train, Conditioning, GradcheckConfig, ParamGroup, TrainConfig, TrainedModel};
use mmp_ood::{compute_image_prototypes, EmbeddingSet, Modality, PrototypeSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(criterion: &str, pass: bool, detail: &str) -> bool {
    let tag = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[{tag}] {criterion}: {detail}");
    pass
}

#[test]
fn gradient_exactness() {
    let start = Instant::now();
    let report = gradcheck(&GradcheckConfig::default()).unwrap();
    let elapsed = start.elapsed();
    let names: Vec<&str> = report.groups.iter().map(|g| g.group.as_str()).collect();
    let all_groups = ParamGroup::ALL.iter().all(|g| names.contains(&g.name()));
    let worst = report
        .groups
        .iter()
        .map(|g| format!("{}={:.1e}", g.group, g.max_rel_error))
        .collect::<Vec<_>>()
        .join(" ");
    let pass = report.max_rel_error <= 1e-4 && all_groups && elapsed < Duration::from_secs(10);
    assert!(verdict(
        "gradient exactness (d=8, C=3, L=2, N_lm=8)",
        pass,
        &format!("max rel error {:.2e} <= 1e-4 in {elapsed:.2?}; {worst}", report.max_rel_error),
    ));
}

#[test]
fn theorem_separation() {
    let cfg = SynthConfig::default();
    let start = Instant::now();
    let report = verify_theorem(&cfg, 20, &ScoreConfig::new(1.0).unwrap()).unwrap();
    let elapsed = start.elapsed();
    let main_pass = report.pass
        && report.assumptions.pass
        && cfg.n_per_class_test * cfg.classes == 2000
        && cfg.n_ood == 2000
        && elapsed < Duration::from_secs(60);
    let line1 = verdict(
        "theorem separation, default world, 20 trials",
        main_pass,
        &format!(
            "delta_mmp {:.5} vs delta_mcm {:.5} (stderr {:.1e}/{:.1e}); A2 {:.4} A3 {:.4} A4 spread {:.1e}; {elapsed:.2?}",
            report.delta_mmp,
            report.delta_mcm,
            report.stderr_mmp,
            report.stderr_mcm,
            report.assumptions.a2_margin,
            report.assumptions.a3_margin,
            report.assumptions.a4_spread
        ),
    );

    let flat = SynthConfig { gap: 0.0, ..cfg };
    let flat_report = verify_theorem(&flat, 20, &ScoreConfig::new(1.0).unwrap()).unwrap();
    let mut worst: f64 = 0.0;
    for t in 0..20 {
        let world = generate_world(&trial_config(&flat, t)).unwrap();
        let s = score_world(&world, &ScoreConfig::new(1.0).unwrap()).unwrap();
        for (a, b) in s.mmp_id.iter().chain(&s.mmp_ood).zip(s.mcm_id.iter().chain(&s.mcm_ood)) {
            worst = worst.max((a - b).abs());
        }
    }
    let line2 = verdict(
        "theorem collapse at zero gap",
        flat_report.delta_mmp == flat_report.delta_mcm && worst <= 1e-12,
        &format!(
            "delta_mmp {} == delta_mcm {}; max sample-wise |S_MMP - S_MCM| = {worst:e}",
            flat_report.delta_mmp, flat_report.delta_mcm
        ),
    );
    assert!(line1 && line2);
}

fn brute_fpr(id: &[f64], ood: &[f64], tpr: f64) -> (f64, f64) {
    let n = id.len() as f64;
    let mut best: Option<f64> = None;
    for &t in id {
        let hit = id.iter().filter(|s| **s >= t).count() as f64 / n;
        if hit >= tpr && best.is_none_or(|b| t > b) {
            best = Some(t);
        }
    }
    let t = best.unwrap();
    (ood.iter().filter(|s| **s >= t).count() as f64 / ood.len() as f64, t)
}

fn brute_auroc(id: &[f64], ood: &[f64]) -> f64 {
    let mut twice = 0u64;
    for a in id {
        for b in ood {
            twice += if a > b {
                2
            } else if a == b {
                1
            } else {
                0
            };
        }
    }
    twice as f64 / 2.0 / (id.len() as f64 * ood.len() as f64)
}

fn brute_ks(id: &[f64], ood: &[f64]) -> f64 {
    let mut best: f64 = 0.0;
    for &x in id.iter().chain(ood) {
        let fa = id.iter().filter(|s| **s <= x).count() as f64 / id.len() as f64;
        let fb = ood.iter().filter(|s| **s <= x).count() as f64 / ood.len() as f64;
        best = best.max((fa - fb).abs());
    }
    best
}

#[test]
fn metric_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mismatches = 0;
    let mut tie_heavy = 0;
    for i in 0..100 {
        let n = rng.random_range(1..=200);
        let m = rng.random_range(1..=200);
        // Every third instance draws from a handful of levels to force ties.
        let levels = if i % 3 == 0 { Some(rng.random_range(1..=5)) } else { None };
        let mut draw = |shift: f64| -> f64 {
            match levels {
                Some(k) => rng.random_range(0..k) as f64 / 4.0,
                None => rng.random::<f64>() + shift,
            }
        };
        let id: Vec<f64> = (0..n).map(|_| draw(0.3)).collect();
        let ood: Vec<f64> = (0..m).map(|_| draw(0.0)).collect();
        if levels.is_some() {
            tie_heavy += 1;
        }
        let tpr = [0.95, 0.5, 1.0, 0.8][i % 4];
        if fpr_at_tpr(&id, &ood, tpr).unwrap() != brute_fpr(&id, &ood, tpr) {
            mismatches += 1;
        }
        if auroc(&id, &ood).unwrap() != brute_auroc(&id, &ood) {
            mismatches += 1;
        }
        if ks_statistic(&id, &ood).unwrap() != brute_ks(&id, &ood) {
            mismatches += 1;
        }
    }
    assert!(verdict(
        "metric oracle equivalence",
        mismatches == 0,
        &format!("100 instances ({tie_heavy} tie-heavy), {mismatches} exact mismatches across fpr/auroc/ks"),
    ));
}

#[test]
fn scoring_collapse_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut worst_mmp, mut worst_gmp): (f64, f64) = (0.0, 0.0);
    for _ in 0..1000 {
        let c = rng.random_range(1..=12);
        let d = rng.random_range(2..=24);
        let mut gauss = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect() };
        let vecs: Vec<Vec<f64>> = (0..c).map(|_| gauss(d)).collect();
        let x = gauss(d);
        let text = PrototypeSet::new(Modality::Text, vecs.clone(), false).unwrap();
        let image = PrototypeSet::new(Modality::Image, vecs, false).unwrap();
        let tau = [0.01, 0.1, 1.0][c % 3];
        let cfg = ScoreConfig::new(tau).unwrap();
        let mcm = mcm_score(&x, &text, &cfg).unwrap();
        let mmp = mmp_score(&x, &text, &image, &cfg).unwrap();
        let mapped = Matrix::identity(d).matvec(&x).unwrap();
        let gmp = gmp_score(&x, &mapped, &text, &image, &cfg).unwrap();
        worst_mmp = worst_mmp.max((mmp - mcm).abs());
        worst_gmp = worst_gmp.max((gmp - mcm).abs());
    }
    assert!(verdict(
        "scoring collapse identities",
        worst_mmp <= 1e-12 && worst_gmp <= 1e-12,
        &format!("1000 inputs; max |MMP - MCM| = {worst_mmp:e}, max |GMP - MCM| = {worst_gmp:e}"),
    ));
}

struct Eval {
    auroc_gmp: f64,
    ks_gmp: f64,
    ks_mcm: f64,
    gap: f64,
}

fn evaluate_model(model: &TrainedModel, test: &EmbeddingSet, ood: &EmbeddingSet, image: &PrototypeSet) -> Eval {
    let cfg = ScoreConfig::default();
    let scores = |set: &EmbeddingSet, kind| -> Vec<f64> {
        set.vectors()
            .map(|x| model.score(x, Some(image), kind, &cfg, Conditioning::PerImage).unwrap())
            .collect()
    };
    let (gi, go) = (scores(test, ScoreKind::Gmp), scores(ood, ScoreKind::Gmp));
    let (mi, mo) = (scores(test, ScoreKind::Mcm), scores(ood, ScoreKind::Mcm));
    Eval {
        auroc_gmp: auroc(&gi, &go).unwrap(),
        ks_gmp: ks_statistic(&gi, &go).unwrap(),
        ks_mcm: ks_statistic(&mi, &mo).unwrap(),
        gap: model.mapped_modality_gap(test, Conditioning::PerImage).unwrap(),
    }
}

#[test]
fn end_to_end_training() {
    let start = Instant::now();
    let world = generate_world(&SynthConfig {
        dim: 32,
        ..Default::default()
    })
    .unwrap();
    let cfg = TrainConfig::default();
    let (encoder, tokens) = build_encoder(&cfg, &EncoderConfig::default(), 32, 10).unwrap();
    let image = compute_image_prototypes(&world.train, true).unwrap();

    let init = initial_model(&world.train, &encoder, &tokens, &cfg).unwrap();
    let (model, history) = train(&world.train, &encoder, &tokens, &cfg).unwrap();
    let before = evaluate_model(&init, &world.test, &world.ood, &image);
    let after = evaluate_model(&model, &world.test, &world.ood, &image);
    let elapsed = start.elapsed();

    let (first, last) = (history[0].total, history[history.len() - 1].total);
    let a = verdict(
        "training (a) final loss below initial",
        last < first,
        &format!("total {first:.4} -> {last:.4}"),
    );
    let b = verdict(
        "training (b) held-out GMP AUROC not below init",
        after.auroc_gmp >= before.auroc_gmp,
        &format!("{:.4} -> {:.4}", before.auroc_gmp, after.auroc_gmp),
    );
    let c = verdict(
        "training (c) KS(GMP) >= KS(MCM) after training",
        after.ks_gmp >= after.ks_mcm,
        &format!("{:.4} vs {:.4}", after.ks_gmp, after.ks_mcm),
    );
    let d = verdict(
        "training (d) mapped-image/text gap not above init",
        after.gap <= before.gap,
        &format!("{:.4} -> {:.4}", before.gap, after.gap),
    );
    let t = verdict(
        "training runtime under 5 min",
        elapsed < Duration::from_secs(300),
        &format!("{elapsed:.2?}"),
    );
    assert!(a && b && c && d && t);
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mmp-ood"))
}

/// Runs the command and returns (exit code, stdout, every file in `dir`).
fn snapshot(args: &[&str], dir: &Path) -> (i32, Vec<u8>, BTreeMap<String, Vec<u8>>) {
    let out = bin().args(args).output().unwrap();
    let files = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            let path = e.path();
            let content = if path.is_dir() {
                fs::read_dir(&path)
                    .unwrap()
                    .flat_map(|f| fs::read(f.unwrap().path()).unwrap())
                    .collect()
            } else {
                fs::read(&path).unwrap()
            };
            (e.file_name().to_string_lossy().into_owned(), content)
        })
        .collect();
    (out.status.code().unwrap_or(-1), out.stdout, files)
}

#[test]
fn cli_determinism() {
    let mut results = Vec::new();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for root in &dirs {
        let r = root.path();
        let p = |name: &str| r.join(name).to_string_lossy().into_owned();
        fs::create_dir(r.join("model")).unwrap();
        fs::create_dir(r.join("eval")).unwrap();
        let steps: Vec<Vec<String>> = vec![
            vec!["gen", "--out", &p(""), "--dim", "32", "--test-per-class", "20", "--ood", "200"],
            vec!["prototypes", "--input", &p("train.emb"), "--out", &p("ip.emb")],
            vec!["train", "--train", &p("train.emb"), "--out", &p("model"), "--epochs", "5"],
            vec!["score", "--embeddings", &p("test.emb"), "--kind", "gmp", "--model", &p("model"), "--image-protos", &p("ip.emb"), "--out", &p("id.csv")],
            vec!["score", "--embeddings", &p("ood.emb"), "--kind", "gmp", "--model", &p("model"), "--image-protos", &p("ip.emb"), "--out", &p("ood.csv")],
            vec!["score", "--embeddings", &p("test.emb"), "--kind", "mmp", "--text-protos", &p("text_prototypes.emb"), "--image-protos", &p("ip.emb")],
            vec!["eval", "--id", &p("id.csv"), "--ood", &p("ood.csv"), "--labels", &p("test.emb"), "--out", &p("eval")],
            vec!["gap", "--a", &p("test.emb"), "--b", &p("text_prototypes.emb")],
            vec!["verify-theorem", "--trials", "10", "--test-per-class", "50", "--ood", "500", "--out", &p("theorem.json")],
            vec!["gradcheck", "--out", &p("gradcheck.json")],
        ]
        .into_iter()
        .map(|v| v.into_iter().map(String::from).collect())
        .collect();
        let mut run = Vec::new();
        for step in &steps {
            let args: Vec<&str> = step.iter().map(String::as_str).collect();
            let (code, stdout, _) = snapshot(&args, r);
            run.push((step[0].clone(), code, stdout));
        }
        let (_, _, files) = snapshot(&["gradcheck"], r);
        results.push((run, files));
    }
    let (run_a, files_a) = &results[0];
    let (run_b, files_b) = &results[1];
    let mut differing: Vec<String> = Vec::new();
    for ((name, code_a, out_a), (_, code_b, out_b)) in run_a.iter().zip(run_b) {
        if *code_a != 0 || code_a != code_b || out_a != out_b {
            differing.push(format!("{name} (exit {code_a}/{code_b})"));
        }
    }
    if files_a != files_b {
        for (k, v) in files_a {
            if files_b.get(k) != Some(v) {
                differing.push(format!("file {k}"));
            }
        }
    }
    assert!(verdict(
        "CLI determinism",
        differing.is_empty(),
        &format!(
            "{} commands and {} output files compared across two runs; differing: {:?}",
            run_a.len(),
            files_a.len(),
            differing
        ),
    ));
}
