use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use sdgcn::ablation::{attention_gcn_grid, format_table, layer_sweep, run_grid};
use sdgcn::checkpoint;
use sdgcn::config::RunConfig;
use sdgcn::datasets::{self, load_split, DatasetName, Split};
use sdgcn::experiments::{dependency_experiment, DependencySettings};
use sdgcn::export::{append_line, attention_records, epoch_line, format_attention, stats_kv, ResultRecord};
use sdgcn::run::{load_vocab_words, prepare, run_training, save_vocab_words};
use sdgcn::Error;
use sdgcn_core::gcn::Topology;
use sdgcn_core::gradcheck::GradCheckConfig;
use sdgcn_core::metrics::EvalReport;
use sdgcn_core::model::tiny_gradcheck;
use sdgcn_core::stats::DatasetStats;
use sdgcn_core::synthetic::{gen_synthetic, SyntheticSpec};
use sdgcn_core::train::evaluate;
use sdgcn_core::{Polarity, Sdgcn, SentenceInstance, Vocabulary};

#[derive(Parser)]
#[command(name = "sdgcn", version, about = "Aspect-level sentiment classification with sentiment graphs")]
struct Cli {
    /// Machine-readable results file; one record per command is appended.
    #[arg(long, global = true, default_value = "sdgcn_results.txt")]
    results: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DatasetArg {
    Restaurant,
    Laptop,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum TopologyArg {
    Adjacent,
    Global,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridArg {
    Gcn,
    Layers,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Run configuration (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set topology=adjacent`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Class counts and aspects-per-sentence histograms.
    Stats {
        #[arg(long, value_enum, default_value = "all")]
        dataset: DatasetArg,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
    /// Train one model and keep the best checkpoint.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value = "run")]
        out_dir: PathBuf,
    },
    /// Evaluate a trained run directory on one split.
    Eval {
        #[arg(long)]
        run_dir: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        /// Checkpoint file inside the run directory.
        #[arg(long, default_value = "best.ckpt")]
        checkpoint: String,
        /// Where to write attention weights.
        #[arg(long)]
        attention: Option<PathBuf>,
    },
    /// Run the GCN/attention grid and/or the GCN depth sweep.
    Ablate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_enum, default_value = "both")]
        grid: GridArg,
        #[arg(long, default_value_t = 4)]
        threads: usize,
    },
    /// Finite-difference check of the tiny reference model.
    Gradcheck {
        #[arg(long, value_enum, default_value = "both")]
        topology: TopologyArg,
    },
    /// Generate the synthetic dependency corpus, optionally running the
    /// masked-opinion experiment on it.
    Synth {
        #[arg(long, default_value_t = 2000)]
        count: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 0.3)]
        mask_rate: f64,
        /// Write the sentences here, one `id<TAB>labelled text` line each.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        experiment: bool,
    },
}

/// Errors that map to the usage exit status.
fn is_usage_error(e: &Error) -> bool {
    matches!(e, Error::ConfigSyntax { .. } | Error::Config(_))
}

fn load_config(args: &ConfigArgs) -> Result<RunConfig, Error> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p).map_err(|e| match e {
            Error::Io { path, source } => Error::Config(format!("cannot read {}: {source}", path.display())),
            other => other,
        })?,
        None => RunConfig::default(),
    };
    for (i, o) in args.overrides.iter().enumerate() {
        let (k, v) = o.split_once('=').ok_or_else(|| Error::Config(format!("--set {o:?}: expected KEY=VALUE")))?;
        cfg.set(k.trim(), v.trim()).map_err(|message| Error::ConfigSyntax {
            line: i + 1,
            message: format!("--set: {message}"),
        })?;
    }
    cfg.validate()?;
    Ok(cfg.with_env_defaults())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let t0 = Instant::now();
    let result = match cli.command {
        Command::Stats {
            dataset,
            data_dir,
            cache_dir,
        } => stats(dataset, data_dir, cache_dir),
        Command::Train { cfg, out_dir } => load_config(&cfg).and_then(|c| train(c, &out_dir)),
        Command::Eval {
            run_dir,
            split,
            checkpoint,
            attention,
        } => eval(&run_dir, split, &checkpoint, attention.as_deref()),
        Command::Ablate { cfg, grid, threads } => load_config(&cfg).and_then(|c| ablate(c, grid, threads)),
        Command::Gradcheck { topology } => gradcheck(topology),
        Command::Synth {
            count,
            seed,
            mask_rate,
            out,
            experiment,
        } => synth(count, seed, mask_rate, out.as_deref(), experiment),
    };
    match result {
        Ok((mut record, code)) => {
            record.runtime_s = t0.elapsed().as_secs_f64();
            if let Err(e) = append_line(&cli.results, &record.to_line()) {
                eprintln!("error: {e}");
                return ExitCode::FAILURE;
            }
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            if is_usage_error(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

type Outcome = Result<(ResultRecord, ExitCode), Error>;

fn stats(dataset: DatasetArg, data_dir: Option<PathBuf>, cache_dir: Option<PathBuf>) -> Outcome {
    let dir = data_dir
        .or_else(datasets::data_dir_from_env)
        .ok_or_else(|| Error::Missing(format!("no data directory: pass --data-dir or set {}", datasets::DATA_DIR_ENV)))?;
    let names: Vec<DatasetName> = match dataset {
        DatasetArg::Restaurant => vec![DatasetName::Restaurant],
        DatasetArg::Laptop => vec![DatasetName::Laptop],
        DatasetArg::All => DatasetName::ALL.to_vec(),
    };
    let mut record = ResultRecord::new("stats", "stats", "-");
    let mut all = DatasetStats::default();
    let mut deviations = 0;
    for name in names {
        for split in [Split::Train, Split::Test] {
            let path = datasets::locate(&dir, name, split)?;
            let loaded = load_split(&path, sdgcn_core::data::DEFAULT_MAX_ASPECTS, cache_dir.as_deref())?;
            let st = loaded.stats();
            let reference = name.reference_counts(split);
            print!("{}", stats_kv(name.as_str(), split.as_str(), &st, Some(reference)));
            for line in loaded.report.to_kv().lines() {
                println!("{}.{}.parse.{line}", name.as_str(), split.as_str());
            }
            for w in &loaded.report.snapped {
                eprintln!(
                    "warning: {} sentence {}: aspect {:?} at chars {}..{} snapped to tokens {}..{}",
                    path.display(),
                    w.sentence_id,
                    w.term,
                    w.from,
                    w.to,
                    w.token_start,
                    w.token_end
                );
            }
            if st.class_counts != reference {
                deviations += 1;
                println!(
                    "DEVIATION {} {}: counts {:?} differ from the published {:?}",
                    name.as_str(),
                    split.as_str(),
                    st.class_counts,
                    reference
                );
            }
            let key = format!("{}_{}", name.as_str(), split.as_str());
            for c in 0..3 {
                record.field(&format!("{key}_{}", Polarity::from_index(c).unwrap().as_str()), st.class_counts[c]);
            }
            all = all.merge(&st);
        }
    }
    print!("{}", stats_kv("all", "all", &all, None));
    record
        .field("max_k", all.max_aspects())
        .field("multi_aspect_aspect_fraction", format!("{:.6}", all.multi_aspect_aspect_fraction()))
        .field("deviations", deviations);
    Ok((record, ExitCode::SUCCESS))
}

fn report_fields(record: &mut ResultRecord, prefix: &str, r: &EvalReport) {
    record
        .field(&format!("{prefix}accuracy"), format!("{:.6}", r.accuracy))
        .field(&format!("{prefix}macro_f1"), format!("{:.6}", r.macro_f1));
}

fn print_report(label: &str, r: &EvalReport) {
    println!("{label}.accuracy={:.6}", r.accuracy);
    println!("{label}.macro_f1={:.6}", r.macro_f1);
    for (c, s) in r.per_class.iter().enumerate() {
        let n = Polarity::from_index(c).unwrap().as_str();
        println!(
            "{label}.{n}.precision={:.6}\t{label}.{n}.recall={:.6}\t{label}.{n}.f1={:.6}{}",
            s.precision,
            s.recall,
            s.f1,
            if s.undefined { "\tundefined=true" } else { "" }
        );
    }
}

fn write_attention(path: &Path, model: &Sdgcn, instances: &[SentenceInstance], vocab: &Vocabulary) -> Result<(), Error> {
    let mut records = Vec::new();
    for inst in instances {
        let pred = model.predict(&vocab.encode(inst))?;
        records.extend(attention_records(inst, &pred));
    }
    std::fs::write(path, format_attention(&records)).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

fn train(cfg: RunConfig, out_dir: &Path) -> Outcome {
    let data = prepare(&cfg)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::Io {
        path: out_dir.into(),
        source: e,
    })?;
    if let Some(g) = &data.glove {
        println!("embeddings.dim={}\tembeddings.coverage={:.6}", g.dim, g.coverage());
    } else {
        eprintln!("warning: no embedding file; every word vector is random");
    }
    let run = format!("{}-{}", cfg.data.dataset.as_str(), cfg.model.variant_name());
    let log_path = out_dir.join("epochs.log");
    let mut log_err = None;
    let summary = run_training(&cfg.model, &cfg.train, &data, |log| {
        let line = epoch_line(&run, log);
        println!("{line}");
        if let Err(e) = append_line(&log_path, &line) {
            log_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = log_err {
        return Err(e);
    }
    checkpoint::save(&out_dir.join("final.ckpt"), &summary.model.params)?;
    checkpoint::save_entries(&out_dir.join("best.ckpt"), &summary.outcome.best_params)?;
    save_vocab_words(&out_dir.join("vocab.txt"), &data.vocab)?;
    let cfg_path = out_dir.join("config.cfg");
    std::fs::write(&cfg_path, cfg.to_text()).map_err(|e| Error::Io {
        path: cfg_path,
        source: e,
    })?;
    let mut best = summary.model.clone();
    best.params.load_values(&summary.outcome.best_params)?;
    write_attention(&out_dir.join("attention.txt"), &best, &data.test, &data.vocab)?;

    let mut record = ResultRecord::new("train", &run, &cfg.hash());
    record.field("params", summary.model.num_model_params());
    if let Some(r) = &summary.outcome.best_test {
        print_report("best", r);
        report_fields(&mut record, "best_", r);
        record.field("best_epoch", summary.outcome.best_epoch.unwrap_or(0));
    }
    if let Some(r) = &summary.outcome.final_test {
        print_report("final", r);
        report_fields(&mut record, "final_", r);
    }
    Ok((record, ExitCode::SUCCESS))
}

fn eval(run_dir: &Path, split: SplitArg, ckpt: &str, attention: Option<&Path>) -> Outcome {
    let cfg = RunConfig::load(&run_dir.join("config.cfg")).map_err(|e| match e {
        Error::Io { path, source } => Error::Missing(format!("{}: {source}", path.display())),
        other => other,
    })?;
    let words = load_vocab_words(&run_dir.join("vocab.txt"))?;
    let entries = checkpoint::load(&run_dir.join(ckpt))?;
    let table = entries
        .iter()
        .find(|(n, _)| n == "embedding")
        .map(|(_, t)| t.clone())
        .ok_or_else(|| Error::Checkpoint("no `embedding` entry".into()))?;
    let vocab = Vocabulary::from_parts(words, table).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut model = Sdgcn::new(cfg.model.clone(), &vocab, cfg.train.seed)?;
    checkpoint::restore(&run_dir.join(ckpt), &mut model.params)?;
    let (train_path, test_path) = cfg.clone().with_env_defaults().split_paths()?;
    let (path, name) = match split {
        SplitArg::Train => (train_path, "train"),
        SplitArg::Test => (test_path, "test"),
    };
    let loaded = load_split(&path, cfg.model.max_aspects, cfg.data.cache_dir.as_deref())?;
    let encoded: Vec<_> = loaded.instances.iter().map(|i| vocab.encode(i)).collect();
    let report = evaluate(&model, &encoded)?;
    print_report(name, &report);
    if let Some(p) = attention {
        write_attention(p, &model, &loaded.instances, &vocab)?;
    }
    let mut record = ResultRecord::new("eval", name, &cfg.hash());
    report_fields(&mut record, "", &report);
    Ok((record, ExitCode::SUCCESS))
}

fn ablate(cfg: RunConfig, grid: GridArg, threads: usize) -> Outcome {
    let data = prepare(&cfg)?;
    let mut record = ResultRecord::new("ablate", cfg.data.dataset.as_str(), &cfg.hash());
    let mut grids = Vec::new();
    if matches!(grid, GridArg::Gcn | GridArg::Both) {
        grids.push(("effect of the GCN", attention_gcn_grid(&cfg.model)));
    }
    if matches!(grid, GridArg::Layers | GridArg::Both) {
        grids.push(("GCN depth", layer_sweep(&cfg.model)));
    }
    for (title, cells) in grids {
        let rows = run_grid(&cells, &cfg.train, &data, threads)?;
        print!("{}", format_table(&format!("{} ({})", title, cfg.data.dataset.as_str()), &rows));
        for r in &rows {
            record
                .field(&format!("{}_acc", r.name), format!("{:.6}", r.accuracy))
                .field(&format!("{}_f1", r.name), format!("{:.6}", r.macro_f1))
                .field(&format!("{}_params", r.name), r.params);
        }
    }
    Ok((record, ExitCode::SUCCESS))
}

fn gradcheck(topology: TopologyArg) -> Outcome {
    let topologies = match topology {
        TopologyArg::Adjacent => vec![Topology::Adjacent],
        TopologyArg::Global => vec![Topology::Global],
        TopologyArg::Both => vec![Topology::Adjacent, Topology::Global],
    };
    let cfg = GradCheckConfig::default();
    let mut worst: f64 = 0.0;
    let mut passed = true;
    let mut record = ResultRecord::new("gradcheck", "tiny", "-");
    for t in topologies {
        let report = tiny_gradcheck(t, &cfg)?;
        for p in &report.params {
            println!(
                "{}\t{}\tchecked={}\tskipped={}\tmax_rel_err={:.3e}{}",
                t.as_str(),
                p.name,
                p.checked,
                p.skipped_kinks,
                p.max_rel_err,
                if p.passed() { "" } else { "\tFAILED" }
            );
        }
        worst = worst.max(report.max_rel_err());
        passed &= report.passed();
        record.field(&format!("{}_max_rel_err", t.as_str()), format!("{:.3e}", report.max_rel_err()));
    }
    record.field("passed", passed);
    if passed {
        println!("max rel err < {:e} ({worst:.3e})", cfg.tol);
        Ok((record, ExitCode::SUCCESS))
    } else {
        println!("gradient check FAILED: max rel err {worst:.3e} >= {:e}", cfg.tol);
        Ok((record, ExitCode::FAILURE))
    }
}

fn synth(count: usize, seed: u64, mask_rate: f64, out: Option<&Path>, experiment: bool) -> Outcome {
    let spec = SyntheticSpec {
        mask_rate,
        ..SyntheticSpec::default()
    };
    let corpus = gen_synthetic(&spec, count, seed)?;
    let mut record = ResultRecord::new("synth", "synthetic", "-");
    record
        .field("sentences", count)
        .field("masked_aspects", corpus.masked_aspect_count());
    if let Some(p) = out {
        let mut text = String::new();
        for (inst, masked) in corpus.instances.iter().zip(&corpus.masked) {
            let labels: Vec<String> = inst
                .aspects
                .iter()
                .zip(masked)
                .map(|(a, &m)| format!("{}:{}{}", a.surface, a.polarity.as_str(), if m { "*" } else { "" }))
                .collect();
            text.push_str(&format!("{}\t{}\t{}\n", inst.id, inst.tokens.join(" "), labels.join(" ")));
        }
        std::fs::write(p, text).map_err(|e| Error::Io {
            path: p.into(),
            source: e,
        })?;
    }
    println!("sentences={count}\tmasked_aspects={}", corpus.masked_aspect_count());
    if experiment {
        let settings = DependencySettings {
            sentences: count,
            train_sentences: count * 4 / 5,
            mask_rate,
            corpus_seed: seed,
            ..DependencySettings::default()
        };
        let r = dependency_experiment(&settings)?;
        for arm in [&r.with_gcn, &r.without_gcn] {
            println!(
                "{}\toverall={:.4}\tmasked={:.4}\tunmasked={:.4}\tmasked_aspects={}",
                arm.name, arm.overall, arm.masked_accuracy, arm.unmasked_accuracy, arm.masked_aspects
            );
        }
        println!("masked_gain_pp={:.2}", r.masked_gain_pp());
        record
            .field("sdgcn_overall", format!("{:.6}", r.with_gcn.overall))
            .field("sdgcn_masked", format!("{:.6}", r.with_gcn.masked_accuracy))
            .field("biatt_masked", format!("{:.6}", r.without_gcn.masked_accuracy));
    }
    Ok((record, ExitCode::SUCCESS))
}
