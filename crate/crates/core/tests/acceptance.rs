//! Acceptance gate. Runs every acceptance criterion, prints one PASS/FAIL line
//! each, and exits nonzero when any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use metaharm::crosswalk::{crosswalk_column, train_classifier, Mode, Strategy};
use metaharm::embedding::{nearest_entries, train, EmbeddingModel, Hyperparams};
use metaharm::eval::{run_benchmark, BenchmarkConfig, PerturbationSpec};
use metaharm::fixture::marine_litter_schema;
use metaharm::ingest::{normalize_name, refine_schema};
use metaharm::lev::{levenshtein, similarity_score};
use metaharm::review::{read_decision_log, Action, ReviewConfig, ReviewService};
use metaharm::textify::{textify_schema, Corpus, Sentence};
use metaharm::{ColumnMeta, Confidence, EntryId, Method, StandardEntry, StandardSchema, TierPath};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, started: Instant, detail: String) -> Outcome {
    let took = started.elapsed();
    check(took < limit, format!("{detail}; {took:.2?} (limit {limit:?})"))
}

/// Full-matrix recurrence over chars, written independently of the library.
fn oracle_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let w = b.len() + 1;
    let mut m = vec![0usize; (a.len() + 1) * w];
    for i in 0..=a.len() {
        for j in 0..=b.len() {
            m[i * w + j] = if i == 0 {
                j
            } else if j == 0 {
                i
            } else {
                let cost = if a[i - 1] == b[j - 1] { 0 } else { 1 };
                (m[(i - 1) * w + j - 1] + cost)
                    .min(m[(i - 1) * w + j] + 1)
                    .min(m[i * w + j - 1] + 1)
            };
        }
    }
    m[a.len() * w + b.len()]
}

const ALPHABETS: [&str; 5] = [
    "abcdefghijklmnopqrstuvwxyz",
    "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 _-",
    "áéíóúñçøåü",
    "αβγδεζηθλμ",
    "海洋垃圾塑料金属",
];

fn random_string(rng: &mut ChaCha8Rng, pools: &[Vec<char>]) -> String {
    let len = rng.random_range(0..=40);
    // bias towards few alphabets so pairs share characters
    let pool = &pools[rng.random_range(0..pools.len())];
    (0..len)
        .map(|_| {
            if rng.random_bool(0.1) {
                let other = &pools[rng.random_range(0..pools.len())];
                other[rng.random_range(0..other.len())]
            } else {
                pool[rng.random_range(0..pool.len())]
            }
        })
        .collect()
}

fn lev_oracle() -> Outcome {
    let started = Instant::now();
    let pools: Vec<Vec<char>> = ALPHABETS.iter().map(|a| a.chars().collect()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let a = random_string(&mut rng, &pools);
        let b = random_string(&mut rng, &pools);
        if levenshtein(&a, &b) != oracle_distance(&a, &b) {
            mismatches += 1;
        }
    }
    let mut broken = 0;
    for _ in 0..1_000 {
        let [a, b, c] = [(); 3].map(|_| random_string(&mut rng, &pools));
        let ab = levenshtein(&a, &b);
        let symmetric = ab == levenshtein(&b, &a);
        let triangle = levenshtein(&a, &c) <= ab + levenshtein(&b, &c);
        if !symmetric || !triangle {
            broken += 1;
        }
    }
    let detail = format!("{mismatches}/10000 oracle mismatches, {broken}/1000 triples break symmetry or triangle");
    if mismatches + broken > 0 {
        return Err(detail);
    }
    within(Duration::from_secs(10), started, detail)
}

const WORDS: [&str; 16] = [
    "plastic", "bag", "bottle", "cap", "metal", "can", "glass", "net", "rope", "straw", "cup", "lid",
    "foam", "wood", "paper", "tin",
];

fn random_words(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(1..=3);
    let mut out: Vec<String> = (0..n).map(|_| WORDS[rng.random_range(0..WORDS.len())].to_string()).collect();
    // occasional typo so scores spread across the threshold
    if rng.random_bool(0.5) {
        let w = &mut out[0];
        let i = rng.random_range(0..w.len());
        w.replace_range(i..=i, "x");
    }
    out.join(" ")
}

fn threshold_semantics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(70);
    let strategy = Strategy::default();
    let (mut cases, mut qualified, mut wrong) = (0, 0, 0);
    for s in 0..200 {
        let n = rng.random_range(1..=12);
        let schema = refine_schema(&StandardSchema {
            name: format!("random-{s}"),
            normalized: false,
            entries: (0..n)
                .map(|i| StandardEntry {
                    id: EntryId::from_ordinal(i + 1),
                    meta: ColumnMeta::named(random_words(&mut rng)),
                    path: TierPath::new(["t"]).unwrap(),
                })
                .collect(),
        });
        for _ in 0..10 {
            let query = random_words(&mut rng);
            let q = normalize_name(&query).join(" ");
            let best = schema
                .entries
                .iter()
                .map(|e| similarity_score(&q, &normalize_name(&e.meta.name).join(" ")))
                .max()
                .unwrap();
            let r = crosswalk_column(&ColumnMeta::named(query), &schema, None, None, &strategy).unwrap();
            let is_qualified = r.confidence == Confidence::Qualified;
            if is_qualified != (best > 70) || r.score != f64::from(best) {
                wrong += 1;
            }
            qualified += usize::from(is_qualified);
            cases += 1;
        }
    }
    check(
        wrong == 0 && qualified > 0 && qualified < cases,
        format!("{wrong}/{cases} queries disagree with the oracle at threshold 70 ({qualified} qualified)"),
    )
}

fn fixture_model(schema: &StandardSchema) -> EmbeddingModel {
    train(&textify_schema(schema), &Hyperparams::default()).expect("fixture trains")
}

fn marine_litter_fixture() -> Outcome {
    let started = Instant::now();
    let schema = marine_litter_schema();
    let model = fixture_model(&schema);
    let mut notes = Vec::new();
    let mut ok = true;
    for mode in [Mode::Levenshtein, Mode::Hybrid] {
        let strategy = Strategy::with_mode(mode);
        let run = |q: &str| crosswalk_column(&ColumnMeta::named(q), &schema, Some(&model), None, &strategy).unwrap();
        let plates = run("Used Plates");
        let straw = run("straw");
        let plates_ok = plates.predicted_path.tiers() == ["Metal"];
        let straw_ok = straw.predicted_path.last() == Some("soft plastics");
        ok &= plates_ok && straw_ok;
        notes.push(format!(
            "{mode:?}: Used Plates -> {:?}, straw -> {:?}",
            plates.predicted_path.tiers(),
            straw.predicted_path.tiers()
        ));
    }
    let detail = format!("{} (training included)", notes.join("; "));
    if !ok {
        return Err(detail);
    }
    within(Duration::from_secs(1), started, detail)
}

fn clique_property() -> Outcome {
    let started = Instant::now();
    let (cliques, size) = (10, 5);
    let token = |c: usize, w: usize| format!("t1:c{c}_w{w}");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut sentences = Vec::new();
    for c in 0..cliques {
        for _ in 0..size {
            let mut tokens: Vec<String> = (0..size).map(|w| token(c, w)).collect();
            tokens.shuffle(&mut rng);
            sentences.push(Sentence(tokens));
        }
    }
    let corpus = Corpus {
        entry_ids: (1..=sentences.len()).map(EntryId::from_ordinal).collect(),
        sentences,
    };
    let hyper = Hyperparams {
        dim: 16,
        epochs: 200,
        ..Hyperparams::default()
    };
    let model = train(&corpus, &hyper).map_err(|e| e.to_string())?;

    let (mut intra, mut n_intra, mut inter, mut n_inter) = (0.0, 0, 0.0, 0);
    let all: Vec<(usize, String)> = (0..cliques).flat_map(|c| (0..size).map(move |w| (c, token(c, w)))).collect();
    for (i, (ca, a)) in all.iter().enumerate() {
        for (cb, b) in &all[i + 1..] {
            let cos = metaharm::embedding::cosine(model.vector(a).unwrap(), model.vector(b).unwrap());
            if ca == cb {
                intra += cos;
                n_intra += 1;
            } else {
                inter += cos;
                n_inter += 1;
            }
        }
    }
    let gap = intra / n_intra as f64 - inter / n_inter as f64;

    let trace = model.loss_trace();
    let moving: Vec<f64> = trace.windows(10).map(|w| w.iter().sum::<f64>() / 10.0).collect();
    let rises = moving.windows(2).filter(|w| w[1] > w[0]).count();

    let detail = format!(
        "intra-inter cosine gap {gap:.3} (need >= 0.3); 10-epoch moving loss rises {rises} times over {} windows, {:.4} -> {:.4}",
        moving.len(),
        moving[0],
        moving[moving.len() - 1]
    );
    if gap < 0.3 || rises > 0 {
        return Err(detail);
    }
    within(Duration::from_secs(30), started, detail)
}

fn self_retrieval() -> Outcome {
    let schema = marine_litter_schema();
    let model = fixture_model(&schema);
    let key = |id: &EntryId| {
        let e = schema.entry(id).unwrap();
        (normalize_name(&e.meta.name), e.path.clone())
    };
    let misses: Vec<String> = schema
        .entries
        .iter()
        .filter(|e| {
            let top = nearest_entries(&e.meta, &model, &schema, 1);
            top.first().is_none_or(|(id, _)| key(id) != key(&e.id))
        })
        .map(|e| e.meta.name.clone())
        .collect();
    check(
        misses.is_empty(),
        format!("{}/{} entries retrieve themselves first; misses {misses:?}", schema.len() - misses.len(), schema.len()),
    )
}

fn synthetic_accuracy() -> Outcome {
    let started = Instant::now();
    let hybrid = BenchmarkConfig {
        strategy: Strategy::with_mode(Mode::Hybrid),
        ..BenchmarkConfig::default()
    };
    let noisy = run_benchmark(&hybrid).map_err(|e| e.to_string())?.report;
    let clean_cfg = BenchmarkConfig {
        perturbation: PerturbationSpec {
            seed: hybrid.perturbation.seed,
            ..PerturbationSpec::default()
        },
        ..hybrid.clone()
    };
    let clean = run_benchmark(&clean_cfg).map_err(|e| e.to_string())?.report;
    let detail = format!(
        "hybrid over {} columns: top-1 {:.3}, path {:.3} (need >= 0.80); zero-perturbation top-1 {:.3}, path {:.3} (need 1.0)",
        noisy.n_queries,
        noisy.top1_accuracy,
        noisy.ontology_path_accuracy,
        clean.top1_accuracy,
        clean.ontology_path_accuracy
    );
    let ok = noisy.n_queries == 500
        && noisy.top1_accuracy >= 0.80
        && noisy.ontology_path_accuracy >= 0.80
        && clean.top1_accuracy == 1.0
        && clean.ontology_path_accuracy == 1.0;
    if !ok {
        return Err(detail);
    }
    within(Duration::from_secs(300), started, detail)
}

fn run_cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_metaharm"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    std::fs::write(d.join("std.csv"), metaharm::fixture::marine_litter_csv()).map_err(|e| e.to_string())?;
    let read = |f: &str| std::fs::read(d.join(f)).map_err(|e| e.to_string());
    for out in ["a.bin", "b.bin"] {
        run_cli(d, &["train", "--std", "std.csv", "--out", out, "--seed", "7"])?;
    }
    let same_model = read("a.bin")? == read("b.bin")?;
    for out in ["a.json", "b.json"] {
        run_cli(
            d,
            &["eval", "--mode", "hybrid", "--bench-seed", "3", "--base-seed", "4", "--seed", "5", "--json", out],
        )?;
    }
    let same_report = read("a.json")? == read("b.json")?;
    check(
        same_model && same_report,
        format!(
            "model files identical: {same_model} ({} bytes); eval reports identical: {same_report}",
            read("a.bin")?.len()
        ),
    )
}

fn feedback() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = || ReviewConfig {
        auto_accept: false,
        state_dir: Some(dir.path().to_path_buf()),
        default_strategy: Strategy::default(),
    };
    let schema = marine_litter_schema();
    let svc = ReviewService::open(schema.clone(), None, config()).map_err(|e| e.to_string())?;
    let query = "used dishes";
    let target = EntryId::from("e0014");
    let run = svc.submit("survey", vec![ColumnMeta::named(query)], None).map_err(|e| e.message)?;
    let before = run.items[0].result.clone();
    svc.decide(&run.items[0].item_id, &Action::Override { entry_id: target.clone() })
        .map_err(|e| e.message)?;
    svc.retrain(None).map_err(|e| e.message)?;
    let after = svc.submit("survey", vec![ColumnMeta::named(query)], None).map_err(|e| e.message)?.items[0]
        .result
        .clone();
    let learned = after.matched_entry_id.as_ref() == Some(&target) && after.method == Method::Classifier;
    let live = svc.classifier().ok_or("no classifier after retrain")?;
    drop(svc);

    let replayed = ReviewService::open(schema.clone(), None, config()).map_err(|e| e.to_string())?;
    let restored = replayed.classifier().ok_or("no classifier after restart")?;
    let log = read_decision_log(&dir.path().join("decisions.ndjson")).map_err(|e| e.to_string())?;
    let rebuilt = train_classifier(&log, &schema).map_err(|e| e.to_string())?;
    let identical = live.centroids() == restored.centroids() && live.centroids() == rebuilt.centroids();
    check(
        before.matched_entry_id.as_ref() != Some(&target) && learned && identical,
        format!(
            "{query:?}: {:?} via {} before, {:?} via {} after override+retrain; replayed centroids identical: {identical}",
            before.matched_entry_id.map(|e| e.0),
            before.method.as_str(),
            after.matched_entry_id.map(|e| e.0),
            after.method.as_str()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("levenshtein oracle equivalence", lev_oracle),
        ("threshold semantics", threshold_semantics),
        ("marine-litter fixture", marine_litter_fixture),
        ("embedding co-occurrence", clique_property),
        ("self-retrieval", self_retrieval),
        ("synthetic accuracy", synthetic_accuracy),
        ("determinism", determinism),
        ("ground-truth feedback", feedback),
    ];
    let mut failed = 0;
    for (name, criterion) in criteria {
        let outcome = std::panic::catch_unwind(criterion).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
