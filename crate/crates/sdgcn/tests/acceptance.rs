//! Acceptance suite: one status line per criterion.
//!
//! Criteria that need the SemEval XML files run only when `SDGCN_DATA_DIR`
//! points at them; the full-length training runs additionally need
//! `SDGCN_ACCEPTANCE_FULL=1`. Anything that cannot run says why.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use sdgcn::ablation::{attention_gcn_grid, run_grid};
use sdgcn::datasets::{data_dir_from_env, load_split, locate, DatasetName, Split, GLOVE_ENV};
use sdgcn::experiments::{dependency_experiment, overfit, DependencySettings};
use sdgcn::run::{prepare, run_training};
use sdgcn::RunConfig;
use sdgcn_core::encoder::position_weights;
use sdgcn_core::gcn::{gcn_forward, gcn_layer, sentence_loss, GcnLayerParams, LossConfig, SentimentGraph, Topology};
use sdgcn_core::gradcheck::GradCheckConfig;
use sdgcn_core::metrics::EvalReport;
use sdgcn_core::model::tiny_gradcheck;
use sdgcn_core::params::init_uniform;
use sdgcn_core::stats::DatasetStats;
use sdgcn_core::synthetic::{gen_synthetic, synthetic_vocabulary, SyntheticSpec};
use sdgcn_core::train::{train, TrainConfig};
use sdgcn_core::{Graph, ModelConfig, ParamStore, RngStream, Sdgcn, Tensor};

enum Status {
    Pass,
    Fail,
    NotRun,
}

type Outcome = (Status, String);

fn pass_if(ok: bool, detail: String) -> Outcome {
    (if ok { Status::Pass } else { Status::Fail }, detail)
}

const FULL_ENV: &str = "SDGCN_ACCEPTANCE_FULL";

fn data_dir() -> Result<PathBuf, String> {
    data_dir_from_env().ok_or_else(|| "SDGCN_DATA_DIR is not set; the SemEval 2014 XML files are required".into())
}

fn full_runs_enabled() -> Result<(), String> {
    data_dir()?;
    if std::env::var_os(GLOVE_ENV).is_none() {
        return Err(format!("{GLOVE_ENV} is not set; the 300-d GloVe file is required"));
    }
    if std::env::var(FULL_ENV).as_deref() != Ok("1") {
        return Err(format!("set {FULL_ENV}=1 to run the full-length trainings"));
    }
    Ok(())
}

fn rand(rows: usize, cols: usize, rng: &mut RngStream) -> Tensor {
    init_uniform(rows, cols, -2.0, 2.0, rng).unwrap()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-10 * b.abs().max(1.0)
}

fn relu(v: f64) -> f64 {
    v.max(0.0)
}

// 1

fn gradient_fidelity() -> Outcome {
    let t0 = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;
    for topology in [Topology::Adjacent, Topology::Global] {
        let r = tiny_gradcheck(topology, &GradCheckConfig::default()).unwrap();
        ok &= r.passed() && r.max_rel_err() < 1e-4;
        let worst = r.params.iter().filter(|p| !p.passed()).map(|p| p.name.clone()).collect::<Vec<_>>();
        parts.push(format!(
            "{}: max rel err {:.2e} over {} coords, {} groups{}",
            topology.as_str(),
            r.max_rel_err(),
            r.checked(),
            r.params.len(),
            if worst.is_empty() { String::new() } else { format!(", failing {worst:?}") }
        ));
    }
    let secs = t0.elapsed().as_secs_f64();
    pass_if(ok && secs < 60.0, format!("{}; {secs:.1}s", parts.join("; ")))
}

// 2

fn data_fidelity() -> Outcome {
    let dir = match data_dir() {
        Ok(d) => d,
        Err(e) => return (Status::NotRun, e),
    };
    let max_aspects = ModelConfig::default().max_aspects;
    let mut ok = true;
    let mut notes = Vec::new();
    let mut all = DatasetStats::default();
    for name in DatasetName::ALL {
        for split in [Split::Train, Split::Test] {
            let loaded = match locate(&dir, name, split).and_then(|p| load_split(&p, max_aspects, None)) {
                Ok(l) => l,
                Err(e) => return (Status::Fail, e.to_string()),
            };
            let stats = loaded.stats();
            let want = name.reference_counts(split);
            if stats.class_counts != want {
                ok = false;
                println!(
                    "DEVIATION {} {}: got {:?}, expected {:?}",
                    name.as_str(),
                    split.as_str(),
                    stats.class_counts,
                    want
                );
            }
            notes.push(format!("{}.{}={:?}", name.as_str(), split.as_str(), stats.class_counts));
            all = all.merge(&stats);
        }
    }
    let min_k = all.aspects_per_sentence.keys().next().copied().unwrap_or(0);
    let span_ok = min_k == 1 && all.max_aspects() == 13;
    let frac = all.multi_aspect_aspect_fraction();
    pass_if(
        ok && span_ok && frac > 0.5,
        format!("{}; K spans {min_k}..{}; multi-aspect share of aspects {frac:.3}", notes.join(" "), all.max_aspects()),
    )
}

// 3

fn oracle_gcn(rng: &mut RngStream, trials: usize) -> usize {
    let mut bad = 0;
    for _ in 0..trials {
        let k = 1 + rng.below(13);
        let dim = 1 + rng.below(5);
        let topology = if rng.below(2) == 0 { Topology::Adjacent } else { Topology::Global };
        let mut store = ParamStore::new();
        let layer = GcnLayerParams::register(&mut store, 0, dim, 1.0, rng).unwrap();
        for name in ["gcn.0.b_cross", "gcn.0.b_self"] {
            let id = store.id(name).unwrap();
            *store.value_mut(id) = rand(dim, 1, rng);
        }
        let x = rand(dim, k, rng);
        let graph = SentimentGraph::build(k, topology).unwrap();
        let mut g = Graph::new(&store);
        let xv = g.constant(x.clone());
        let out = gcn_layer(&mut g, xv, &graph, &layer).unwrap();
        let out = g.value(out).clone();

        let get = |n: &str| store.value(store.id(n).unwrap()).clone();
        let (wc, bc, ws, bs) = (get("gcn.0.w_cross"), get("gcn.0.b_cross"), get("gcn.0.w_self"), get("gcn.0.b_self"));
        for v in 0..k {
            let linked = |u: usize| match topology {
                Topology::Adjacent => u.abs_diff(v) == 1,
                Topology::Global => u != v,
            };
            for r in 0..dim {
                let mut cross = bc.get(r, 0);
                let mut own = bs.get(r, 0);
                for c in 0..dim {
                    let nsum: f64 = (0..k).filter(|&u| linked(u)).map(|u| x.get(c, u)).sum();
                    cross += wc.get(r, c) * nsum;
                    own += ws.get(r, c) * x.get(c, v);
                }
                if !close(out.get(r, v), relu(cross) + relu(own)) {
                    bad += 1;
                }
            }
        }
    }
    bad
}

fn oracle_softmax(rng: &mut RngStream, trials: usize) -> usize {
    let mut bad = 0;
    for _ in 0..trials {
        let n = 1 + rng.below(10);
        let x = init_uniform(1, n, -20.0, 20.0, rng).unwrap();
        let mut g = Graph::detached();
        let xv = g.constant(x.clone());
        let p = g.softmax(xv).unwrap();
        let z: f64 = x.data().iter().map(|v| v.exp()).sum();
        for (i, &pi) in g.value(p).data().iter().enumerate() {
            if !close(pi, x.data()[i].exp() / z) {
                bad += 1;
            }
        }
    }
    bad
}

fn oracle_loss(rng: &mut RngStream, trials: usize) -> usize {
    let mut bad = 0;
    for _ in 0..trials {
        let k = 1 + rng.below(13);
        let lambda = [0.0, 0.01, 0.5][rng.below(3)];
        let logits = rand(3, k, rng);
        let labels: Vec<usize> = (0..k).map(|_| rng.below(3)).collect();
        let mut store = ParamStore::new();
        let w = store.insert("w", rand(3, 4, rng), true).unwrap();
        let mut g = Graph::new(&store);
        let lv = g.constant(logits.clone());
        let wv = g.param(w);
        let loss = sentence_loss(&mut g, lv, &labels, &LossConfig { lambda }, &[wv]).unwrap();
        let got = g.value(loss).item();

        let mut want = 0.0;
        for (j, &y) in labels.iter().enumerate() {
            let z: f64 = (0..3).map(|c| logits.get(c, j).exp()).sum();
            want -= (logits.get(y, j).exp() / z).ln();
        }
        want += lambda * store.value(w).data().iter().map(|v| v * v).sum::<f64>();
        if !close(got, want) {
            bad += 1;
        }
    }
    bad
}

fn oracle_position(rng: &mut RngStream, trials: usize) -> usize {
    let mut bad = 0;
    for _ in 0..trials {
        let n = 1 + rng.below(40);
        let start = rng.below(n);
        let end = start + 1 + rng.below(n - start);
        let s = 1 + rng.below(30);
        let got = position_weights(n, start, end, s);
        for (t, &w) in got.iter().enumerate() {
            let dis = (start..end).map(|j| j.abs_diff(t)).min().unwrap();
            let want = if dis == 0 {
                1.0
            } else if dis <= s {
                1.0 - dis as f64 / n as f64
            } else {
                0.0
            };
            if w != want {
                bad += 1;
            }
        }
    }
    bad
}

fn oracle_macro_f1(rng: &mut RngStream, trials: usize) -> usize {
    let mut bad = 0;
    for _ in 0..trials {
        let n = rng.below(40);
        let classes = 1 + rng.below(3);
        let gold: Vec<usize> = (0..n).map(|_| rng.below(classes)).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.below(3)).collect();
        let report = EvalReport::from_labels(&gold, &pred);
        let mut f1_sum = 0.0;
        for c in 0..3 {
            let tp = (0..n).filter(|&i| gold[i] == c && pred[i] == c).count() as f64;
            let predicted = pred.iter().filter(|&&p| p == c).count() as f64;
            let actual = gold.iter().filter(|&&g| g == c).count() as f64;
            let p = if predicted > 0.0 { tp / predicted } else { 0.0 };
            let r = if actual > 0.0 { tp / actual } else { 0.0 };
            f1_sum += if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        }
        let correct = (0..n).filter(|&i| gold[i] == pred[i]).count();
        let acc = if n == 0 { 0.0 } else { correct as f64 / n as f64 };
        if (report.macro_f1 - f1_sum / 3.0).abs() > 1e-12 || report.accuracy != acc {
            bad += 1;
        }
    }
    bad
}

fn brute_force_oracles() -> Outcome {
    let mut rng = RngStream::new(2024);
    let results = [
        ("gcn_layer", oracle_gcn(&mut rng, 200)),
        ("softmax", oracle_softmax(&mut rng, 200)),
        ("loss", oracle_loss(&mut rng, 200)),
        ("position", oracle_position(&mut rng, 200)),
        ("macro_f1", oracle_macro_f1(&mut rng, 1000)),
    ];
    let ok = results.iter().all(|(_, b)| *b == 0);
    let detail = results.iter().map(|(n, b)| format!("{n} {b} mismatches")).collect::<Vec<_>>().join(", ");
    pass_if(ok, format!("{detail} (200 instances each, 1000 for macro_f1)"))
}

// 4

fn run_gcn(store: &ParamStore, layers: &[GcnLayerParams], x: &Tensor, topology: Topology) -> Tensor {
    let mut g = Graph::new(store);
    let xv = g.constant(x.clone());
    let graph = SentimentGraph::build(x.cols(), topology).unwrap();
    let out = gcn_forward(&mut g, xv, &graph, layers).unwrap();
    g.value(out).clone()
}

fn structural_properties() -> Outcome {
    let mut failures = Vec::new();
    for k in 1..=13 {
        for topology in [Topology::Adjacent, Topology::Global] {
            let g = SentimentGraph::build(k, topology).unwrap();
            let a = g.adjacency();
            let symmetric = (0..k).all(|i| a.get(i, i) == 0.0 && (0..k).all(|j| a.get(i, j) == a.get(j, i)));
            let degrees = (0..k).all(|i| {
                g.degree(i)
                    == match topology {
                        Topology::Global => k - 1,
                        Topology::Adjacent => usize::from(i > 0) + usize::from(i + 1 < k),
                    }
            });
            let edges = g.edges().len()
                == match topology {
                    Topology::Global => k * (k - 1) / 2,
                    Topology::Adjacent => k - 1,
                };
            if !(symmetric && degrees && edges) {
                failures.push(format!("graph K={k} {}", topology.as_str()));
            }
        }
    }

    let mut rng = RngStream::new(99);
    let (mut equivariance, mut locality) = (0, 0);
    for trial in 0..100 {
        let k = 2 + rng.below(12);
        let dim = 1 + rng.below(4);
        let depth = 1 + rng.below(3);
        let mut store = ParamStore::new();
        let layers: Vec<_> = (0..depth)
            .map(|l| GcnLayerParams::register(&mut store, l, dim, 1.0, &mut rng).unwrap())
            .collect();
        let x = rand(dim, k, &mut rng);

        let mut perm: Vec<usize> = (0..k).collect();
        rng.shuffle(&mut perm);
        let permute = |t: &Tensor| {
            let mut out = Tensor::zeros(t.rows(), t.cols());
            for (new, &old) in perm.iter().enumerate() {
                for r in 0..t.rows() {
                    out.set(r, new, t.get(r, old));
                }
            }
            out
        };
        let a = permute(&run_gcn(&store, &layers, &x, Topology::Global));
        let b = run_gcn(&store, &layers, &permute(&x), Topology::Global);
        if a.data().iter().zip(b.data()).any(|(p, q)| (p - q).abs() > 1e-12) {
            equivariance += 1;
        }

        let base = run_gcn(&store, &layers, &x, Topology::Adjacent);
        let u = rng.below(k);
        let mut x2 = x.clone();
        for r in 0..dim {
            x2.set(r, u, x.get(r, u) + 1.0 + trial as f64);
        }
        let moved = run_gcn(&store, &layers, &x2, Topology::Adjacent);
        for v in (0..k).filter(|v| v.abs_diff(u) > depth) {
            if (0..dim).any(|r| moved.get(r, v) != base.get(r, v)) {
                locality += 1;
            }
        }
    }
    if equivariance > 0 {
        failures.push(format!("{equivariance} global permutation violations"));
    }
    if locality > 0 {
        failures.push(format!("{locality} adjacent locality violations"));
    }
    let detail = if failures.is_empty() {
        "graph invariants K=1..13, global permutation equivariance and adjacent L-hop locality (100 random instances)".into()
    } else {
        failures.join("; ")
    };
    pass_if(failures.is_empty(), detail)
}

// 5

fn overfit_stand_in() -> String {
    let spec = SyntheticSpec::default();
    let corpus = gen_synthetic(&spec, 50, 5).unwrap();
    let vocab = synthetic_vocabulary(&spec, 32, 5).unwrap();
    let model = ModelConfig {
        d_hid: 32,
        ..ModelConfig::default()
    };
    let r = overfit(&corpus.instances, &vocab, &model, &TrainConfig::default(), 200, 0.95).unwrap();
    format!(
        "synthetic stand-in (50 sentences, d_hid 32): train acc {:.3} after {} epochs, {:.1}s",
        r.train_accuracy, r.epochs_run, r.runtime_s
    )
}

fn overfit_sanity() -> Outcome {
    if let Err(e) = data_dir() {
        return (Status::NotRun, format!("{e}; {}", overfit_stand_in()));
    }
    let cfg = RunConfig::default().with_env_defaults();
    let data = match prepare(&cfg) {
        Ok(d) => d,
        Err(e) => return (Status::Fail, e.to_string()),
    };
    let subset = &data.train[..50.min(data.train.len())];
    let r = overfit(subset, &data.vocab, &cfg.model, &cfg.train, 200, 0.95).unwrap();
    pass_if(
        r.train_accuracy >= 0.95 && r.runtime_s < 600.0,
        format!(
            "{} sentences: train acc {:.3} after {} epochs, {:.1}s",
            r.sentences, r.train_accuracy, r.epochs_run, r.runtime_s
        ),
    )
}

// 6

/// Training seeds for the masked-opinion comparison. One masked aspect is
/// about one point of accuracy, so the verdict uses the mean over seeds.
const DEPENDENCY_SEEDS: [u64; 8] = [1, 2, 3, 4, 5, 6, 7, 8];

fn dependency_sensitivity() -> Outcome {
    let base = DependencySettings::default();
    let t0 = Instant::now();
    let mut gains = Vec::new();
    let mut worst_overall = f64::INFINITY;
    let mut per_seed = Vec::new();
    for seed in DEPENDENCY_SEEDS {
        let s = DependencySettings {
            train: TrainConfig {
                seed,
                ..base.train.clone()
            },
            ..base.clone()
        };
        let r = dependency_experiment(&s).unwrap();
        gains.push(r.masked_gain_pp());
        worst_overall = worst_overall.min(r.with_gcn.overall);
        per_seed.push(format!(
            "s{seed} {:.3}/{:.3}",
            r.with_gcn.masked_accuracy, r.without_gcn.masked_accuracy
        ));
    }
    let mean = gains.iter().sum::<f64>() / gains.len() as f64;
    let (lo, hi) = gains.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &g| (a.min(g), b.max(g)));
    pass_if(
        mean >= 10.0 && worst_overall >= 0.90,
        format!(
            "masked acc SDGCN-G/BiAtt {}; mean gain {mean:.1}pp (range {lo:.1}..{hi:.1}, {} of {} seeds >= 10pp); min SDGCN-G overall {worst_overall:.3}; {:.0}s",
            per_seed.join(" "),
            gains.iter().filter(|&&g| g >= 10.0).count(),
            gains.len(),
            t0.elapsed().as_secs_f64()
        ),
    )
}

// 7

fn full_runs() -> Outcome {
    if let Err(e) = full_runs_enabled() {
        return (Status::NotRun, e);
    }
    let mut notes = Vec::new();
    for (name, acc, f1) in [(DatasetName::Restaurant, 82.95, 75.79), (DatasetName::Laptop, 75.55, 71.35)] {
        let mut cfg = RunConfig::default().with_env_defaults();
        cfg.data.dataset = name;
        let outcome = prepare(&cfg).and_then(|d| run_training(&cfg.model, &cfg.train, &d, |_| {}));
        let s = match outcome {
            Ok(s) => s,
            Err(e) => return (Status::Fail, format!("{}: {e}", name.as_str())),
        };
        let fin = s.outcome.final_test.expect("test set given");
        let got = 100.0 * fin.accuracy;
        let verdict = if (got - acc).abs() <= 3.0 { "consistent" } else { "gap" };
        notes.push(format!(
            "{}: acc {got:.2} / F1 {:.2} (reported {acc} / {f1}, {verdict}, {:+.2}pp)",
            name.as_str(),
            100.0 * fin.macro_f1,
            got - acc
        ));
    }
    (Status::Pass, format!("not a gate; {}", notes.join("; ")))
}

// 8

fn ablation_direction() -> Outcome {
    if let Err(e) = full_runs_enabled() {
        return (Status::NotRun, e);
    }
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut ok = true;
    let mut notes = Vec::new();
    for name in DatasetName::ALL {
        let mut cfg = RunConfig::default().with_env_defaults();
        cfg.data.dataset = name;
        let rows = match prepare(&cfg).and_then(|d| run_grid(&attention_gcn_grid(&cfg.model), &cfg.train, &d, threads)) {
            Ok(r) => r,
            Err(e) => return (Status::Fail, format!("{}: {e}", name.as_str())),
        };
        let acc = |n: &str| rows.iter().find(|r| r.name == n).map_or(0.0, |r| r.final_accuracy);
        ok &= acc("BiAtt+GCN") >= acc("BiAtt") && acc("Att+GCN") >= acc("Att");
        notes.push(format!(
            "{}: Att {:.4} Att+GCN {:.4} BiAtt {:.4} BiAtt+GCN {:.4}",
            name.as_str(),
            acc("Att"),
            acc("Att+GCN"),
            acc("BiAtt"),
            acc("BiAtt+GCN")
        ));
    }
    pass_if(ok, notes.join("; "))
}

// 9

fn determinism() -> Outcome {
    let run = || {
        let spec = SyntheticSpec::default();
        let corpus = gen_synthetic(&spec, 120, 9).unwrap();
        let vocab = synthetic_vocabulary(&spec, 8, 9).unwrap();
        let enc: Vec<_> = corpus.instances.iter().map(|i| vocab.encode(i)).collect();
        let cfg = ModelConfig {
            d_hid: 8,
            dropout: 0.5,
            ..ModelConfig::default()
        };
        let mut model = Sdgcn::new(cfg, &vocab, 3).unwrap();
        let tc = TrainConfig {
            epochs: 3,
            batch_size: 16,
            ..TrainConfig::default()
        };
        let out = train(&mut model, &enc[..90], &enc[90..], &tc, |_| {}).unwrap();
        let losses: Vec<u64> = out.logs.iter().map(|l| l.train_loss.to_bits()).collect();
        (losses, out.best_test, out.final_test)
    };
    let a = run();
    let b = run();
    pass_if(
        a == b,
        format!("two seeded runs with dropout 0.5: {} epoch losses and both EvalReports identical", a.0.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("gradient fidelity", gradient_fidelity),
        ("data fidelity", data_fidelity),
        ("brute-force oracles", brute_force_oracles),
        ("structural properties", structural_properties),
        ("overfit sanity", overfit_sanity),
        ("dependency sensitivity", dependency_sensitivity),
        ("reported benchmarks", full_runs),
        ("ablation direction", ablation_direction),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let (status, detail) = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(o) => o,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (Status::Fail, format!("panicked: {msg}"))
            }
        };
        let tag = match status {
            Status::Pass => "[PASS]",
            Status::Fail => {
                failed += 1;
                "[FAIL]"
            }
            Status::NotRun => "[NOT RUN]",
        };
        println!("{tag} {} {name}: {detail} ({:.1}s)", i + 1, t0.elapsed().as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
