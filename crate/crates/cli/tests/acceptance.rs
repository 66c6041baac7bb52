//! Acceptance gate: each criterion runs against its time budget and prints
//! one PASS/FAIL line.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use dexter_core::classify::{
    class_weights, compare_reports, compute_metrics, stratified_split, train_baseline, weighted_sampler,
    ConfusionMatrix, LabeledText, MetricsReport, Sample, SplitRatios, TrainConfig,
};
use dexter_core::corpus::load_corpus;
use dexter_core::features::{parse_axml, FeatureCategory, StaticFeatureSet};
use dexter_core::gateway::prompt::{format_described_features, format_raw_features, placeholders};
use dexter_core::gateway::{render_agentic_prompt, render_fusion_prompt, render_generator_prompt, PromptContext};
use dexter_core::labeling::Label;
use dexter_core::matcher::{levenshtein, match_feature, MatcherConfig};
use dexter_core::retrieval::embed::dot;
use dexter_core::retrieval::{rrf_fuse, Bm25Params, DenseIndex, RankedList, RankerTag, SparseIndex};
use dexter_core::textprep::{porter_stem, preprocess_text, StopwordList};
use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

fn manifest_dir() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

fn core_fixture(rel: &str) -> PathBuf {
    manifest_dir().join("../core/tests/fixtures").join(rel)
}

fn cli_fixture(rel: &str) -> PathBuf {
    manifest_dir().join("tests/fixtures").join(rel)
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn exact(r: Option<(u64, u64)>) -> Option<Ratio<u64>> {
    r.map(|(n, d)| Ratio::new(n, d))
}

fn to_f64(r: Option<Ratio<u64>>) -> Option<f64> {
    r.map(|r| *r.numer() as f64 / *r.denom() as f64)
}

fn metric_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for set in 0..1000 {
        let n = rng.gen_range(1..=300);
        let bias: f64 = rng.gen();
        let pairs: Vec<(Label, Label)> = (0..n)
            .map(|_| {
                let pick = |r: &mut ChaCha8Rng| {
                    if r.gen_bool(bias) {
                        Label::Malicious
                    } else {
                        Label::Benign
                    }
                };
                (pick(&mut rng), pick(&mut rng))
            })
            .collect();
        let (mut tp, mut tn, mut fp, mut fnn) = (0u64, 0u64, 0u64, 0u64);
        for (t, p) in &pairs {
            match (t, p) {
                (Label::Malicious, Label::Malicious) => tp += 1,
                (Label::Benign, Label::Benign) => tn += 1,
                (Label::Benign, Label::Malicious) => fp += 1,
                (Label::Malicious, Label::Benign) => fnn += 1,
            }
        }
        let frac = |a: u64, b: u64| (b > 0).then(|| Ratio::new(a, b));
        let accuracy = frac(tp + tn, n);
        let precision = frac(tp, tp + fp);
        let recall = frac(tp, tp + fnn);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) if p + r > Ratio::from_integer(0) => Some(Ratio::from_integer(2) * p * r / (p + r)),
            _ => None,
        };
        let m = ConfusionMatrix::from_pairs(&pairs);
        ensure!(
            (m.tp, m.tn, m.fp, m.fn_) == (tp, tn, fp, fnn),
            "set {set}: confusion {m:?}"
        );
        ensure!(
            [
                exact(m.accuracy_ratio()),
                exact(m.precision_ratio()),
                exact(m.recall_ratio()),
                exact(m.f1_ratio())
            ] == [accuracy, precision, recall, f1],
            "set {set}: ratios differ"
        );
        let report = compute_metrics(&pairs).map_err(|e| e.to_string())?;
        ensure!(
            [report.accuracy, report.precision, report.recall, report.f1]
                == [to_f64(accuracy), to_f64(precision), to_f64(recall), to_f64(f1)],
            "set {set}: report {report:?}"
        );
    }
    Ok("1000 sets exact".into())
}

fn ids(benign: usize, malicious: usize) -> Vec<Sample> {
    (0..benign)
        .map(|i| Sample::new(format!("benign-{i:05}"), Label::Benign))
        .chain((0..malicious).map(|i| Sample::new(format!("malicious-{i:05}"), Label::Malicious)))
        .collect()
}

fn split_fidelity() -> Outcome {
    let samples = ids(10_000, 8_000);
    let malicious_share = Ratio::new(8_000u64, 18_000);
    let expected = [(7_000, 5_600), (1_000, 800), (2_000, 1_600)];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let seed: u64 = rng.gen();
        let split = stratified_split(&samples, SplitRatios::default(), seed).map_err(|e| e.to_string())?;
        let mut union: Vec<&str> = Vec::with_capacity(samples.len());
        for ((name, part), (b, m)) in split.partitions().into_iter().zip(expected) {
            let mal = part.iter().filter(|s| s.label == Label::Malicious).count();
            ensure!(
                (part.len() - mal, mal) == (b, m),
                "seed {seed}: {name} has {}+{mal}",
                part.len() - mal
            );
            let ideal = malicious_share * Ratio::from_integer(part.len() as u64);
            let diff = if Ratio::from_integer(mal as u64) > ideal {
                Ratio::from_integer(mal as u64) - ideal
            } else {
                ideal - Ratio::from_integer(mal as u64)
            };
            ensure!(diff <= Ratio::from_integer(1), "seed {seed}: {name} off by {diff}");
            union.extend(part.iter().map(|s| s.apk_id.as_str()));
        }
        union.sort_unstable();
        let before = union.len();
        union.dedup();
        ensure!(
            before == union.len() && union.len() == samples.len(),
            "seed {seed}: not a partition"
        );
    }
    Ok("12600/1800/3600 over 100 seeds".into())
}

fn lev_oracle(a: &[char], b: &[char]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

fn matching() -> Outcome {
    let alphabet: Vec<char> = "abcAB._é∂ 0".chars().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let word = |r: &mut ChaCha8Rng| -> Vec<char> {
            let len = r.gen_range(0..=32);
            (0..len).map(|_| *alphabet.choose(r).unwrap()).collect()
        };
        let (a, b) = (word(&mut rng), word(&mut rng));
        let (sa, sb): (String, String) = (a.iter().collect(), b.iter().collect());
        ensure!(levenshtein(&sa, &sb) == lev_oracle(&a, &b), "lev({sa:?}, {sb:?})");
    }
    ensure!(MatcherConfig::default().fuzzy_threshold == 0.65, "default threshold");
    let corpus = load_corpus(core_fixture("mini_corpus")).map_err(|e| e.to_string())?;
    let queries: Vec<(FeatureCategory, String)> = FeatureCategory::ALL
        .iter()
        .flat_map(|&c| {
            let table = corpus.table(c).entries().to_vec();
            table.into_iter().flat_map(move |e| {
                let n = e.name.clone();
                let cut = n[..n.len() - n.len() / 4].to_owned();
                [
                    (c, n.clone()),
                    (c, cut),
                    (c, n.to_lowercase().replace('.', "_")),
                    (c, format!("{n}X")),
                ]
            })
        })
        .chain([(FeatureCategory::Permission, "com.unrelated.Thing".to_owned())])
        .collect();
    let mut previous: Option<Vec<bool>> = None;
    for t in [0.5, 0.65, 0.8] {
        let cfg = MatcherConfig::new(t).map_err(|e| e.to_string())?;
        let hits: Vec<bool> = queries
            .iter()
            .map(|(c, q)| match_feature(q, *c, &corpus, &cfg).entry().is_some())
            .collect();
        if let Some(prev) = &previous {
            ensure!(
                hits.iter().zip(prev).all(|(now, before)| !now || *before),
                "match gained at {t}"
            );
        }
        previous = Some(hits);
    }
    Ok(format!("1000 pairs, {} sweep queries", queries.len()))
}

fn retrieval() -> Outcome {
    let idx = SparseIndex::build(
        [("d1", "sms message send"), ("d2", "camera photo"), ("d3", "send sms")],
        Bm25Params::default(),
    )
    .map_err(|e| e.to_string())?;
    let mut scores = BTreeMap::new();
    for line in read(&core_fixture("retrieval/bm25_sms.tsv"))?.lines() {
        let (doc, want) = line.split_once('\t').ok_or("bad oracle line")?;
        let want: f64 = want.parse().map_err(|e| format!("{e}"))?;
        let got = idx.bm25_score("sms", doc).map_err(|e| e.to_string())?;
        ensure!((got - want).abs() <= 1e-9, "{doc}: {got} vs oracle {want}");
        scores.insert(doc.to_owned(), got);
    }
    ensure!(
        scores["d3"] > scores["d1"] && scores["d1"] > scores["d2"],
        "ranking {scores:?}"
    );

    let sparse = RankedList::from_scores(RankerTag::Sparse, [("x".into(), 9.0), ("y".into(), 5.0)]);
    let dense = RankedList::from_scores(
        RankerTag::Dense,
        [("z".into(), 0.9), ("y".into(), 0.8), ("x".into(), 0.1)],
    );
    let fused = rrf_fuse(&[sparse, dense], &[0.5, 0.5], 60).map_err(|e| e.to_string())?;
    let x = fused.score("x").ok_or("x missing")?;
    ensure!(
        (x - (0.5 / 61.0 + 0.5 / 63.0)).abs() <= 1e-9 && (x - 0.016133).abs() < 1e-6,
        "fused {x}"
    );

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for corpus in 0..200 {
        let dim = rng.gen_range(2..=32);
        let n = rng.gen_range(1..=64);
        let unit = |r: &mut ChaCha8Rng| -> Vec<f64> {
            loop {
                let v: Vec<f64> = (0..dim).map(|_| r.gen_range(-1.0..1.0)).collect();
                let norm = dot(&v, &v).sqrt();
                if norm > 1e-3 {
                    return v.iter().map(|x| x / norm).collect();
                }
            }
        };
        let docs: Vec<(String, Vec<f64>)> = (0..n).map(|i| (format!("doc{i:03}"), unit(&mut rng))).collect();
        let query = unit(&mut rng);
        let top_n = rng.gen_range(1..=n + 2);
        let mut brute: Vec<(String, f64)> = docs
            .iter()
            .map(|(id, v)| {
                let cos = dot(&query, v) / (dot(v, v).sqrt() * dot(&query, &query).sqrt());
                (id.clone(), cos)
            })
            .collect();
        brute.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        brute.truncate(top_n);
        let index = DenseIndex::from_vectors("acceptance", dim, docs).map_err(|e| e.to_string())?;
        let got = index.search(&query, top_n).map_err(|e| e.to_string())?;
        ensure!(got.items().len() == brute.len(), "corpus {corpus}: length");
        for ((ga, gs), (ba, bs)) in got.items().iter().zip(&brute) {
            ensure!(
                ga == ba && (gs - bs).abs() <= 1e-9,
                "corpus {corpus}: {ga} {gs} vs {ba} {bs}"
            );
        }
    }
    Ok(format!("fused {:.6}, 200 dense corpora", x))
}

const PROMPT_APK: &str = "com.example.smsrelay";

fn prompt_feature_set() -> StaticFeatureSet {
    let mut set = StaticFeatureSet::new(PROMPT_APK);
    set.insert(FeatureCategory::Permission, "android.permission.SEND_SMS");
    set.insert(FeatureCategory::Permission, "android.permission.READ_CONTACTS");
    set.insert(FeatureCategory::Receiver, "com.example.smsrelay.Inbox");
    set.insert(FeatureCategory::IntentAction, "android.provider.Telephony.SMS_RECEIVED");
    set
}

fn prompt_description(name: &str) -> &'static str {
    match name {
        "android.permission.SEND_SMS" => "Allows an application to send SMS messages.",
        "android.permission.READ_CONTACTS" => "Allows an application to read the user's contacts data.",
        "com.example.smsrelay.Inbox" => "Receives incoming SMS broadcasts.",
        _ => "Broadcast when a new SMS message has been received.",
    }
}

fn prompt_fidelity() -> Outcome {
    let set = prompt_feature_set();
    let agentic = render_agentic_prompt(&PromptContext {
        apk_name: PROMPT_APK.into(),
        stats: set.stats(),
        formatted_info: format_described_features(set.iter().map(|(c, n)| (c, n, prompt_description(n)))),
    });
    let generator = render_generator_prompt(&format_raw_features(&set));
    let fusion = render_fusion_prompt(
        PROMPT_APK,
        &format_raw_features(&set),
        "The app sends and receives SMS messages.",
        "The app reads contacts and relays SMS.",
    )
    .map_err(|e| e.to_string())?;
    for (name, rendered) in [("agentic", &agentic), ("generator", &generator), ("fusion", &fusion)] {
        let golden = read(&core_fixture(&format!("golden/{name}.txt")))?;
        ensure!(*rendered == golden, "{name} prompt differs from golden file");
        ensure!(
            placeholders(rendered).is_empty(),
            "{name} prompt has unresolved placeholders"
        );
    }
    for line in [
        "- Permissions: 2",
        "- Services: 0",
        "- Broadcast Receivers: 1",
        "- Intent Actions: 1",
    ] {
        ensure!(agentic.lines().any(|l| l == line), "agentic prompt lacks {line:?}");
    }
    ensure!(fusion.trim_end().ends_with("**Final Description:**"), "fusion trailer");
    Ok("3 golden prompts".into())
}

fn dexter(args: &[&Path]) -> Result<Value, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_dexter"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(
        out.status.code() == Some(0),
        "{:?} exited {:?}: {}",
        args,
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    serde_json::from_str(stdout.lines().last().unwrap_or("null")).map_err(|e| e.to_string())
}

/// Corpus/llm counts per fixture APK, keyed by a feature unique to it.
const EXPECTED_MIX: [(&str, u64, u64); 6] = [
    ("android.permission.SEND_SMS", 3, 1),
    ("android.permission.CAMERA", 1, 0),
    ("com.persist.BootReceiver", 2, 2),
    ("android.permission.INTERNET", 3, 0),
    ("com.vendor.action.PING", 1, 2),
    ("android.app.admin.DeviceAdminReceiver", 2, 1),
];

fn per_apk_mix(descriptions: &str) -> Result<Vec<(String, u64, u64, u64)>, String> {
    descriptions
        .lines()
        .map(|line| {
            let v: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
            let sources = v["feature_sources"].as_array().ok_or("no feature_sources")?;
            let count = |s: &str| sources.iter().filter(|f| f["source"] == s).count() as u64;
            let key = EXPECTED_MIX
                .iter()
                .find(|(k, _, _)| sources.iter().any(|f| f["name"] == *k))
                .map(|(k, _, _)| k.to_string())
                .ok_or("record matches no fixture APK")?;
            Ok((key, count("corpus"), count("llm"), count("cache")))
        })
        .collect()
}

fn pipeline_and_cache() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name);
    let s = |s: &'static str| Path::new(s);
    dexter(&[s("extract"), &cli_fixture("apks"), s("-o"), &p("features.jsonl")])?;
    let describe = |out: &str| {
        dexter(&[
            s("describe"),
            s("--offline"),
            s("--mock-script"),
            &cli_fixture("mock/offline.json"),
            s("--features"),
            &p("features.jsonl"),
            s("-o"),
            &p(out),
            s("--corpus"),
            &core_fixture("mini_corpus"),
            s("--cache"),
            &p("cache.jsonl"),
        ])
    };
    let first = describe("run1.jsonl")?;
    ensure!(
        first["apks"] == 6 && first["sources"]["corpus"] == 12 && first["sources"]["llm"] == 6,
        "run 1 summary {first}"
    );
    let mix = per_apk_mix(&read(&p("run1.jsonl"))?)?;
    ensure!(mix.len() == 6, "run 1 wrote {} records", mix.len());
    for (key, corpus, llm) in EXPECTED_MIX {
        ensure!(
            mix.iter().any(|m| m.0 == key && (m.1, m.2, m.3) == (corpus, llm, 0)),
            "run 1 mix for {key}: {mix:?}"
        );
    }
    let second = describe("run2.jsonl")?;
    ensure!(
        second["retrieval_calls"] == 0
            && second["fallback_calls"] == 0
            && second["cache_hits"] == 18
            && second["sources"]["cache"] == 18,
        "run 2 summary {second}"
    );
    Ok("run 1 12 corpus/6 llm, run 2 18 cache".into())
}

fn preprocessing() -> Outcome {
    let vocabulary = read(&core_fixture("porter/vocabulary.tsv"))?;
    let mut n = 0;
    for line in vocabulary.lines() {
        let mut cols = line.split('\t');
        let (word, stem) = (cols.next().ok_or("word")?, cols.next().ok_or("stem")?);
        ensure!(porter_stem(word) == stem, "{word}: {} vs {stem}", porter_stem(word));
        n += 1;
    }
    ensure!(n >= 200, "vocabulary has only {n} words");
    let sentence = preprocess_text(
        "acceptance",
        "The app is sending the messages.",
        &StopwordList::shipped(),
    )
    .map_err(|e| e.to_string())?;
    ensure!(
        sentence.tokens == ["app", "send", "messag"],
        "tokens {:?}",
        sentence.tokens
    );
    Ok(format!("{n} stems"))
}

fn separable_corpus(seed: u64) -> Vec<LabeledText> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shared: Vec<String> = (0..30).map(|i| format!("common{i}")).collect();
    let vocab = |prefix: &str| -> Vec<String> { (0..40).map(|i| format!("{prefix}{i}")).collect() };
    let (mal, ben) = (vocab("evil"), vocab("good"));
    let mut docs = Vec::with_capacity(400);
    for i in 0..400 {
        let (label, own) = if i % 2 == 0 {
            (Label::Malicious, &mal)
        } else {
            (Label::Benign, &ben)
        };
        let len = rng.gen_range(8..=20);
        let words: Vec<&str> = (0..len)
            .map(|_| {
                let pool = if rng.gen_bool(0.5) { own } else { &shared };
                pool.choose(&mut rng).unwrap().as_str()
            })
            .collect();
        docs.push(LabeledText {
            apk_id: format!("doc{i:03}"),
            text: words.join(" "),
            label,
        });
    }
    docs
}

fn baseline_classifier() -> Outcome {
    let docs = separable_corpus(8);
    let samples: Vec<Sample> = docs.iter().map(|d| Sample::new(d.apk_id.clone(), d.label)).collect();
    let split = stratified_split(&samples, SplitRatios::default(), 8).map_err(|e| e.to_string())?;
    let by_id: BTreeMap<&str, &LabeledText> = docs.iter().map(|d| (d.apk_id.as_str(), d)).collect();
    let take =
        |part: &[Sample]| -> Vec<LabeledText> { part.iter().map(|s| by_id[s.apk_id.as_str()].clone()).collect() };
    let (train, val, test) = (take(&split.train), take(&split.validation), take(&split.test));
    let weights = class_weights(&split.train).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        seed: 8,
        ..TrainConfig::default()
    };
    let a = train_baseline(&train, &val, &weights, &cfg).map_err(|e| e.to_string())?;
    let b = train_baseline(&train, &val, &weights, &cfg).map_err(|e| e.to_string())?;
    let bits = |m: &dexter_core::classify::BaselineModel| -> Vec<u64> {
        m.weights()
            .iter()
            .chain([m.bias()].iter())
            .map(|w| w.to_bits())
            .collect()
    };
    ensure!(bits(&a) == bits(&b), "same-seed runs produced different weights");
    let pairs: Vec<(Label, Label)> = test.iter().map(|d| (d.label, a.predict(&d.text))).collect();
    let accuracy = compute_metrics(&pairs)
        .map_err(|e| e.to_string())?
        .accuracy
        .ok_or("no accuracy")?;
    ensure!(accuracy >= 0.95, "test accuracy {accuracy}");
    Ok(format!("test accuracy {accuracy:.4} on {} docs", test.len()))
}

fn sampler() -> Outcome {
    let train = ids(10_000, 8_000);
    let weights = class_weights(&train).map_err(|e| e.to_string())?;
    let draws = weighted_sampler(&train, &weights, 9, 100_000);
    ensure!(draws.len() == 100_000, "drew {}", draws.len());
    let malicious = draws.iter().filter(|&&i| train[i].label == Label::Malicious).count();
    let share = malicious as f64 / draws.len() as f64;
    ensure!((share - 0.5).abs() <= 0.01, "malicious share {share}");
    Ok(format!("malicious share {share:.4}"))
}

fn robustness() -> Outcome {
    let seeds: Vec<Vec<u8>> = [
        "minimal_manifest",
        "minimal_manifest_utf8",
        "receiver_manifest",
        "bad_string_index",
    ]
    .iter()
    .map(|f| std::fs::read(core_fixture(&format!("axml/{f}.axml"))).map_err(|e| e.to_string()))
    .collect::<Result<_, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut ok, mut err) = (0, 0);
    for i in 0..10_000 {
        let buf: Vec<u8> = if i % 2 == 0 {
            let len = rng.gen_range(0..=1024);
            let mut b: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            if len >= 8 && rng.gen_bool(0.5) {
                b[..8].copy_from_slice(&[0x03, 0x00, 0x08, 0x00, len as u8, (len >> 8) as u8, 0, 0]);
            }
            b
        } else {
            let mut b = seeds.choose(&mut rng).unwrap().clone();
            for _ in 0..rng.gen_range(1..=16) {
                let at = rng.gen_range(0..b.len());
                b[at] = rng.gen();
            }
            let keep = rng.gen_range(0..=b.len());
            b.truncate(keep);
            b
        };
        match std::panic::catch_unwind(|| parse_axml(&buf).is_ok()) {
            Ok(true) => ok += 1,
            Ok(false) => err += 1,
            Err(_) => return Err(format!("buffer {i} panicked")),
        }
    }
    Ok(format!("10000 buffers, {ok} parsed, {err} typed errors"))
}

fn table_plumbing() -> Outcome {
    let load = |name: &str| -> Result<MetricsReport, String> {
        serde_json::from_str(&read(&cli_fixture(&format!("reports/{name}.json")))?).map_err(|e| e.to_string())
    };
    let (agentic, fusion) = (load("agentic_rag")?, load("gemini_fusion")?);
    let cmp = compare_reports("AgenticRAG", &agentic, "Gemini Fusion", &fusion).map_err(|e| e.to_string())?;
    let delta = cmp.delta("accuracy").ok_or("no accuracy delta")?;
    ensure!(format!("{delta:+.2}") == "+1.53", "delta {delta}");
    let table = cmp.render();
    let line = table
        .lines()
        .find(|l| l.starts_with("accuracy"))
        .ok_or("no accuracy row")?;
    ensure!(line.trim_end().ends_with("+1.53"), "row {line:?}");
    Ok("accuracy +1.53".into())
}

#[test]
fn acceptance_criteria() {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Option<u64>, Check); 11] = [
        ("metric formula fidelity", Some(5), metric_fidelity),
        ("stratified split fidelity", Some(10), split_fidelity),
        ("levenshtein and threshold matching", Some(10), matching),
        ("bm25, fusion and dense retrieval", Some(30), retrieval),
        ("prompt rendering fidelity", None, prompt_fidelity),
        ("offline pipeline and cache reuse", Some(20), pipeline_and_cache),
        ("stemming and preprocessing", Some(5), preprocessing),
        ("baseline classifier", Some(60), baseline_classifier),
        ("weighted sampler balance", Some(10), sampler),
        ("manifest parser robustness", Some(60), robustness),
        ("report comparison delta", None, table_plumbing),
    ];
    let mut stdout = std::io::stdout().lock();
    let mut failed = Vec::new();
    writeln!(stdout).unwrap();
    for (i, (name, budget, check)) in criteria.into_iter().enumerate() {
        let started = Instant::now();
        let result = check();
        let elapsed = started.elapsed();
        let verdict = match (result, budget.map(Duration::from_secs)) {
            (Ok(detail), Some(limit)) if elapsed >= limit => Err(format!("{detail}, over {}s budget", limit.as_secs())),
            (r, _) => r,
        };
        let line = match &verdict {
            Ok(detail) => format!("PASS {:>2} {name}: {detail} ({} ms)", i + 1, elapsed.as_millis()),
            Err(why) => format!("FAIL {:>2} {name}: {why} ({} ms)", i + 1, elapsed.as_millis()),
        };
        writeln!(stdout, "{line}").unwrap();
        if verdict.is_err() {
            failed.push(line);
        }
    }
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}
