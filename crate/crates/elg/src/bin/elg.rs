use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use elg::config::{parse_mask, Config};
use elg::error::{ElgError, Result};
use elg::formats::graph::save_graph;
use elg::formats::mcnc::parse_log;
use elg::formats::{read_text, vectors::load_vectors};
use elg::pipeline::{compare_table, exact_probabilities, merge_table, names, reports_from_log, require_graph, document_events, Pipeline, StageReport};
use elg::service::{serve, Loaded};
use elg_core::graph::merge_similar_events;
use elg_core::seqrel::{ClassifierKind, Task};

/// Build, evaluate and serve event logic graphs.
#[derive(Parser, Debug)]
#[command(name = "elg", version)]
struct Cli {
    /// Pipeline configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `pipeline.output_dir`.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Overrides `pipeline.corpus`.
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// Rebuild even when the manifest says a stage is up to date.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Clean the corpus and extract events.
    Extract,
    /// Count event and pair co-occurrences.
    Count,
    /// Train (or import) word vectors.
    Embed,
    /// Build pair feature vectors.
    Features,
    /// Evaluate classifiers and label every pair.
    TrainSeqrel(SeqrelArgs),
    /// Extract causal mentions with the rule set.
    Causality,
    /// Build the graph (includes generalization).
    BuildGraph,
    /// Re-run generalization on an existing graph.
    Merge(MergeArgs),
    /// Narrative cloze evaluation.
    Mcnc,
    /// Serve a graph over HTTP.
    Serve(ServeArgs),
    /// Print saved reports.
    Report(ReportArgs),
    /// Run every enabled stage, skipping up-to-date ones.
    Run,
}

#[derive(Args, Debug)]
struct SeqrelArgs {
    /// relation or direction; both when omitted.
    #[arg(long)]
    task: Option<String>,
    /// nb, lr, mlp or svm.
    #[arg(long)]
    classifier: Option<String>,
    /// `all` or groups joined by `+` (frequency, ratio, context, pmi).
    #[arg(long)]
    mask: Option<String>,
    /// Try every classifier on every feature-group combination.
    #[arg(long)]
    search: bool,
    #[arg(long)]
    annotations: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MergeArgs {
    /// Defaults to the pipeline's graph.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    vectors: Option<PathBuf>,
    /// Defaults to `graph.merged.elg` in the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    tau_merge: Option<f64>,
    #[arg(long)]
    tau_link: Option<f64>,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[arg(long)]
    graph: Option<PathBuf>,
    /// 0 picks a free port.
    #[arg(long)]
    port: Option<u16>,
    #[arg(long)]
    bind: Option<String>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Scorers to compare from the cloze log; the first is the baseline.
    #[arg(long, value_delimiter = ',')]
    compare: Vec<String>,
}

fn load_config(cli: &Cli) -> Result<Config> {
    let env = std::env::vars();
    let mut config = match &cli.config {
        Some(p) => Config::load(p, env)?,
        None => {
            let c = Config::default().with_env(env)?;
            c.validate()?;
            c
        }
    };
    if let Some(d) = &cli.output_dir {
        config.pipeline.output_dir = d.clone();
    }
    if let Some(c) = &cli.corpus {
        config.pipeline.corpus = Some(c.clone());
    }
    Ok(config)
}

fn print_reports(reports: &[StageReport]) {
    for r in reports {
        println!("{}", r.line());
    }
}

fn stage(config: &Config, name: &str, force: bool, task: Option<Task>) -> Result<()> {
    std::fs::create_dir_all(&config.pipeline.output_dir).map_err(ElgError::io(&config.pipeline.output_dir))?;
    let mut p = Pipeline::new(config);
    p.task = task;
    let r = p.run_stage(name, force)?;
    print_reports(&[r]);
    let dir = &config.pipeline.output_dir;
    let report = match name {
        "train-seqrel" => Some("seqrel_report.txt"),
        "causality" => Some("causality_report.txt"),
        "build" => Some("merge_report.txt"),
        "mcnc" => Some("mcnc_report.txt"),
        _ => None,
    };
    if let Some(r) = report {
        print!("{}", read_text(&dir.join(r))?);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut config = load_config(&cli)?;
    // single stages run when asked, manifest or not
    let force = !matches!(cli.command, Command::Run) || cli.force;
    match cli.command {
        Command::Extract => stage(&config, "extract", force, None),
        Command::Count => stage(&config, "count", force, None),
        Command::Embed => stage(&config, "embed", force, None),
        Command::Features => stage(&config, "features", force, None),
        Command::Causality => stage(&config, "causality", force, None),
        Command::BuildGraph => stage(&config, "build", force, None),
        Command::Mcnc => stage(&config, "mcnc", force, None),
        Command::TrainSeqrel(a) => {
            let task = match a.task.as_deref() {
                None => None,
                Some("relation") => Some(Task::Relation),
                Some("direction") => Some(Task::Direction),
                Some(t) => return Err(ElgError::Usage(format!("unknown task `{t}` (expected relation or direction)"))),
            };
            if let Some(c) = a.classifier {
                ClassifierKind::parse(&c).ok_or_else(|| ElgError::Usage(format!("unknown classifier `{c}`")))?;
                config.seqrel.classifier = c;
            }
            if let Some(m) = a.mask {
                parse_mask(&m)?;
                config.seqrel.mask = m;
            }
            if a.search {
                config.seqrel.search = true;
            }
            if a.annotations.is_some() {
                config.seqrel.annotations = a.annotations;
            }
            stage(&config, "train-seqrel", force, task)
        }
        Command::Merge(a) => merge(&mut config, a),
        Command::Serve(a) => {
            if let Some(g) = a.graph {
                config.service.graph = Some(g);
            }
            if let Some(p) = a.port {
                config.service.port = p;
            }
            if let Some(b) = a.bind {
                config.service.bind = b;
            }
            let path = config.graph_path();
            require_graph(&path)?;
            let loaded = Loaded::from_file(&path)?;
            serve(loaded, &config.service, |addr| {
                println!("listening on http://{addr}");
                use std::io::Write;
                let _ = std::io::stdout().flush();
            })
        }
        Command::Report(a) => report(&config, &a.compare),
        Command::Run => {
            std::fs::create_dir_all(&config.pipeline.output_dir).map_err(ElgError::io(&config.pipeline.output_dir))?;
            let p = Pipeline::new(&config);
            let reports = if force {
                let mut out = Vec::new();
                for s in elg::config::STAGES.iter().filter(|s| config.stage_enabled(s)) {
                    out.push(p.run_stage(s, true)?);
                }
                out
            } else {
                p.run()?
            };
            print_reports(&reports);
            Ok(())
        }
    }
}

fn merge(config: &mut Config, a: MergeArgs) -> Result<()> {
    if let Some(t) = a.tau_merge {
        config.graph.tau_merge = t;
    }
    if let Some(t) = a.tau_link {
        config.graph.tau_link = t;
    }
    let dir = config.pipeline.output_dir.clone();
    let graph_path = a.graph.unwrap_or_else(|| config.graph_path());
    let graph = require_graph(&graph_path)?;
    let vectors_path = a.vectors.unwrap_or_else(|| dir.join(names::VECTORS));
    if !vectors_path.exists() {
        return Err(ElgError::MissingArtifact { stage: "embed", path: vectors_path });
    }
    let table = load_vectors(&vectors_path)?;
    let outcome = merge_similar_events(&graph, &table, &config.merge())?;
    // exact recount when the occurrence tables are at hand
    let p = Pipeline::new(config);
    let merged = if p.path(names::CORPUS).exists() && p.path(names::EVENTS).exists() {
        let corpus = p.load_clean_corpus()?;
        let occ = elg::formats::tables::load_occurrences(&p.path(names::EVENTS))?;
        let window = graph.meta.get("window").and_then(|w| w.parse().ok()).unwrap_or(config.pairs.window);
        exact_probabilities(&outcome.graph, &document_events(&corpus, &occ), window)?
    } else {
        log::warn!("no occurrence tables in {}; keeping estimated probabilities", dir.display());
        outcome.graph
    };
    let out = a.out.unwrap_or_else(|| dir.join("graph.merged.elg"));
    save_graph(&merged, &out)?;
    print!("{}", merge_table(&outcome.report).render());
    println!("wrote {}", out.display());
    Ok(())
}

fn report(config: &Config, compare: &[String]) -> Result<()> {
    let dir = &config.pipeline.output_dir;
    if compare.is_empty() {
        let mut any = false;
        for r in ["seqrel_report", "causality_report", "causality_eval", "merge_report", "mcnc_report"] {
            let p = dir.join(format!("{r}.txt"));
            if p.exists() {
                println!("{}", read_text(&p)?);
                any = true;
            }
        }
        if !any {
            return Err(ElgError::Usage(format!("no reports in {}; run the pipeline first", dir.display())));
        }
        return Ok(());
    }
    let log_path = dir.join(names::MCNC_LOG);
    if !log_path.exists() {
        return Err(ElgError::MissingArtifact { stage: "mcnc", path: log_path });
    }
    let (answers, log) = parse_log(&read_text(&log_path)?, &log_path)?;
    let all = reports_from_log(&answers, &log);
    let mut picked = Vec::new();
    for name in compare {
        let r = all.iter().find(|r| &r.scorer == name).ok_or_else(|| {
            let known: Vec<&str> = all.iter().map(|r| r.scorer.as_str()).collect();
            ElgError::Usage(format!("unknown scorer `{name}` (known: {})", known.join(", ")))
        })?;
        picked.push(r.clone());
    }
    let table = compare_table(&picked, &picked[0]);
    print!("{}", table.render());
    table.save(dir, "compare_report")?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
