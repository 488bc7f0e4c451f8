mod artifacts;
mod eval;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use rsg_core::embedding::{encode, BaselineEmbedder, EmbeddingTable};
use rsg_core::expansion::{
    mine_path_patterns, BudgetScope, ExpansionConfig, MiningSample, Strategy, DEFAULT_BUDGET,
    DEFAULT_COVERAGE_QUANTILE, DEFAULT_DEPTH, DEFAULT_K,
};
use rsg_core::graph::Rsg;
use rsg_core::parser::{build_rsg, BuildOptions};
use rsg_core::pipeline::{
    prepare_queries, resolve_gold, retrieve, run_sensitivity, ArtifactRef, ContextPolicy, GridPoint,
    Manifest, Ordering, RetrievalRequest, SensitivityQuery, SensitivityRow, UniverseMode,
};
use rsg_core::predictor::{train, GnnModel, TrainConfig, DEFAULT_EPOCHS, DEFAULT_LAYERS, DEFAULT_LEARNING_RATE};
use rsg_core::synth::{link_corpus, planted_path_corpus};
use serde_json::json;

use artifacts::{load_graph, load_model, load_patterns, load_records, load_table, write_artifact, Loaded};

#[derive(Parser)]
#[command(name = "rsg", version, about = "Graph-based context retrieval for repository-level code completion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a Python repository into a semantic graph.
    Index {
        repo: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Glob of repo-relative paths to parse (repeatable).
        #[arg(long, default_value = "**/*.py")]
        include: Vec<String>,
        #[arg(long)]
        exclude: Vec<String>,
    },
    /// Embed every node of a graph.
    Embed {
        graph: PathBuf,
        /// `baseline`, or `file:<path>` to import precomputed vectors.
        #[arg(long, default_value = "baseline")]
        encoder: String,
        /// Dimension of the baseline encoder.
        #[arg(long, default_value_t = 64)]
        dim: usize,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Mine frequent anchor-to-gold path types from training records.
    MinePatterns {
        records: PathBuf,
        #[command(flatten)]
        inputs: Inputs,
        #[arg(short = 'K', default_value_t = DEFAULT_K)]
        k: usize,
        #[arg(short = 'D', default_value_t = DEFAULT_DEPTH)]
        depth: usize,
        #[arg(short = 'M', default_value_t = DEFAULT_BUDGET)]
        budget: usize,
        /// Share of observed gold paths the retained types must cover.
        #[arg(short = 'q', default_value_t = DEFAULT_COVERAGE_QUANTILE)]
        quantile: f64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Train the link predictor.
    Train {
        records: PathBuf,
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        expansion: ExpansionArgs,
        #[arg(long, value_enum, default_value_t = UniverseArg::Imported)]
        universe: UniverseArg,
        #[arg(long, default_value_t = DEFAULT_LAYERS)]
        layers: usize,
        /// Hidden width; defaults to the embedding dimension.
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_LEARNING_RATE)]
        lr: f64,
        #[arg(long, default_value_t = DEFAULT_EPOCHS)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Rank contexts and assemble a prompt for every query record.
    Retrieve {
        /// Query records (JSON lines); gold fields are ignored.
        queries: PathBuf,
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        expansion: ExpansionArgs,
        #[command(flatten)]
        selection: SelectionArgs,
        /// Output file (JSON lines); stdout when absent.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Score retrieval (acc@k) or completion (exact match) over records.
    Eval(eval::EvalArgs),
    /// Hits and coverage over a grid of expansion settings.
    Sensitivity {
        records: PathBuf,
        #[command(flatten)]
        inputs: Inputs,
        /// Lines of `<strategy> <D> <M> <K>`; K may be `<f>*|V|`.
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        patterns: Option<PathBuf>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Write a seeded synthetic repository with train and eval records.
    Synth {
        #[arg(long, value_enum)]
        kind: SynthKind,
        #[arg(long, default_value_t = 200)]
        train: usize,
        #[arg(long, default_value_t = 100)]
        eval: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Planted corpus: every n-th instance uses the rare path.
        #[arg(long, default_value_t = 30)]
        rare_every: usize,
        #[arg(short, long)]
        out: PathBuf,
    },
}

#[derive(Args)]
pub struct Inputs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub emb: PathBuf,
}

#[derive(Args)]
pub struct ExpansionArgs {
    #[arg(long, default_value = "exhausted")]
    pub strategy: Strategy,
    #[arg(short = 'K', default_value_t = DEFAULT_K)]
    pub k: usize,
    #[arg(short = 'D', default_value_t = DEFAULT_DEPTH)]
    pub depth: usize,
    #[arg(short = 'M', default_value_t = DEFAULT_BUDGET)]
    pub budget: usize,
    /// Path types for the pattern strategy.
    #[arg(long)]
    pub patterns: Option<PathBuf>,
    #[arg(long, default_value = "per-anchor")]
    pub budget_scope: BudgetScope,
}

impl ExpansionArgs {
    pub fn config(&self, graph: &Loaded<Rsg>) -> Result<ExpansionConfig> {
        let pattern_set = match &self.patterns {
            Some(p) => Some(load_patterns(p, graph)?.value),
            None => None,
        };
        let config = ExpansionConfig {
            k: self.k,
            depth: self.depth,
            budget: self.budget,
            strategy: self.strategy,
            pattern_set,
            budget_scope: self.budget_scope,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
pub struct SelectionArgs {
    #[arg(long, default_value = "l2h")]
    pub order: Ordering,
    /// Keep as many contexts as fit in this many estimated tokens.
    #[arg(long = "budget", id = "token_budget", conflicts_with = "top")]
    pub token_budget: Option<usize>,
    /// Keep the best N contexts.
    #[arg(long, default_value_t = 5)]
    pub top: usize,
    #[arg(long, value_enum, default_value_t = UniverseArg::Imported)]
    pub universe: UniverseArg,
}

impl SelectionArgs {
    pub fn policy(&self) -> Result<ContextPolicy> {
        match self.token_budget {
            Some(0) => bail!("token budget must be positive"),
            Some(b) => Ok(ContextPolicy::TokenBudget(b)),
            None if self.top == 0 => bail!("--top must be positive"),
            None => Ok(ContextPolicy::Fixed(self.top)),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum UniverseArg {
    Imported,
    Expanded,
}

impl From<UniverseArg> for UniverseMode {
    fn from(u: UniverseArg) -> Self {
        match u {
            UniverseArg::Imported => UniverseMode::Imported,
            UniverseArg::Expanded => UniverseMode::Expanded,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Link,
    Planted,
}

/// Writes to `out`, or stdout.
pub fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// The encoder that produced `table`, needed to embed queries.
pub fn query_encoder(table: &EmbeddingTable) -> Result<BaselineEmbedder> {
    BaselineEmbedder::from_provenance(table.provenance()).ok_or_else(|| {
        anyhow!(
            "queries cannot be embedded: no encoder matches table provenance `{}`",
            table.provenance()
        )
    })
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Index { repo, out, include, exclude } => index(&repo, &out, include, exclude),
        Command::Embed { graph, encoder, dim, out } => embed(&graph, &encoder, dim, &out),
        Command::MinePatterns { records, inputs, k, depth, budget, quantile, out } => {
            mine(&records, &inputs, k, depth, budget, quantile, &out)
        }
        Command::Train {
            records,
            inputs,
            expansion,
            universe,
            layers,
            hidden,
            lr,
            epochs,
            seed,
            out,
        } => {
            let graph = load_graph(&inputs.graph)?;
            let table = load_table(&inputs.emb, &graph)?;
            let config = expansion.config(&graph)?;
            let records_list = load_records(&records, &inputs.graph)?;
            let (prepared, dropped) = prepare_queries(
                &graph.value,
                &table.value,
                &records_list,
                &config,
                universe.into(),
                true,
            )?;
            for d in &dropped {
                log::warn!("dropped {d}");
            }
            let samples: Vec<_> = prepared
                .iter()
                .map(|p| p.training_sample(&graph.value, &table.value))
                .collect();
            let mut model = GnnModel::with_layers(table.value.dimension(), layers, hidden, seed)?;
            model.set_meta("encoder", table.value.provenance());
            let trace = train(&mut model, &samples, &TrainConfig { epochs, learning_rate: lr, seed })?;
            for (i, l) in trace.iter().enumerate() {
                log::info!("epoch {} loss {l:.6}", i + 1);
            }
            model.set_meta("samples", samples.len().to_string());
            model.set_meta("final_loss", format!("{:.8e}", trace.last().copied().unwrap_or(0.0)));
            let text = model.to_text();
            let manifest = Manifest::new("model", &out, text.as_bytes())
                .with_input("graph", graph.reference.clone())
                .with_input("embeddings", table.reference.clone())
                .with_input("records", ArtifactRef::new(&records, &fs::read(&records)?))
                .with_param("layers", layers)
                .with_param("lr", lr)
                .with_param("epochs", epochs)
                .with_param("seed", seed);
            write_artifact(&out, &text, manifest)
        }
        Command::Retrieve { queries, inputs, model, expansion, selection, out } => {
            retrieve_cmd(&queries, &inputs, model.as_deref(), &expansion, &selection, out.as_deref())
        }
        Command::Eval(args) => eval::run(&args),
        Command::Sensitivity { records, inputs, grid, patterns, out } => {
            sensitivity(&records, &inputs, &grid, patterns.as_deref(), out.as_deref())
        }
        Command::Synth { kind, train, eval, seed, rare_every, out } => {
            let corpus = match kind {
                SynthKind::Link => link_corpus(train, eval, seed),
                SynthKind::Planted => planted_path_corpus(train, eval, rare_every, seed),
            };
            corpus
                .write_to(&out)
                .with_context(|| format!("writing corpus to {}", out.display()))?;
            log::info!("wrote {} files, {} train and {} eval records", corpus.units.len(), train, eval);
            Ok(())
        }
    }
}

fn index(repo: &Path, out: &Path, include: Vec<String>, exclude: Vec<String>) -> Result<()> {
    let built = build_rsg(repo, &BuildOptions { include, exclude })?;
    let text = built.graph.to_json(built.meta.clone());
    let manifest = Manifest::new("graph", out, text.as_bytes())
        .with_param("nodes", built.graph.len())
        .with_param("edges", built.graph.edges().len());
    write_artifact(out, &text, manifest)?;
    let mut diag = out.as_os_str().to_owned();
    diag.push(".diagnostics.jsonl");
    fs::write(&diag, built.diagnostics_jsonl())?;
    log::info!(
        "{} nodes, {} edges, {} diagnostics",
        built.graph.len(),
        built.graph.edges().len(),
        built.diagnostics.len()
    );
    Ok(())
}

fn embed(graph_path: &Path, encoder: &str, dim: usize, out: &Path) -> Result<()> {
    let graph = load_graph(graph_path)?;
    let table = if encoder == "baseline" {
        EmbeddingTable::build(&graph.value, &BaselineEmbedder::new(dim)?)
    } else if let Some(path) = encoder.strip_prefix("file:") {
        let text = fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
        EmbeddingTable::import_external(&text, Some(graph.value.len()))?
    } else {
        bail!("unknown encoder `{encoder}` (baseline|file:<path>)");
    };
    let text = table.to_text();
    let manifest = Manifest::new("embeddings", out, text.as_bytes())
        .with_input("graph", graph.reference.clone())
        .with_param("provenance", table.provenance())
        .with_param("dimension", table.dimension());
    write_artifact(out, &text, manifest)
}

fn mine(
    records: &Path,
    inputs: &Inputs,
    k: usize,
    depth: usize,
    budget: usize,
    quantile: f64,
    out: &Path,
) -> Result<()> {
    let graph = load_graph(&inputs.graph)?;
    let table = load_table(&inputs.emb, &graph)?;
    let encoder = query_encoder(&table.value)?;
    let records_list = load_records(records, &inputs.graph)?;
    let mut resolved = Vec::new();
    for r in &records_list {
        match resolve_gold(&graph.value, r) {
            Ok(gold) => resolved.push((encode(&encoder, &r.query)?, gold)),
            Err(d) => log::warn!("dropped {d}"),
        }
    }
    let samples: Vec<MiningSample> = resolved
        .iter()
        .map(|(q, gold)| MiningSample {
            graph: &graph.value,
            table: &table.value,
            query: q,
            gold: *gold,
        })
        .collect();
    let set = mine_path_patterns(&samples, k, depth, budget, quantile)?;
    log::info!("retained {} path types from {} samples", set.len(), samples.len());
    let text = set.to_text();
    let manifest = Manifest::new("patterns", out, text.as_bytes())
        .with_input("graph", graph.reference.clone())
        .with_input("embeddings", table.reference.clone())
        .with_param("quantile", quantile);
    write_artifact(out, &text, manifest)
}

/// Checks the model was trained on `table`'s encoder.
pub fn check_model_encoder(model: &GnnModel, table: &EmbeddingTable) -> Result<()> {
    if let Some(p) = model.encoder_provenance() {
        table.check_provenance(p)?;
    }
    Ok(())
}

fn retrieve_cmd(
    queries: &Path,
    inputs: &Inputs,
    model_path: Option<&Path>,
    expansion: &ExpansionArgs,
    selection: &SelectionArgs,
    out: Option<&Path>,
) -> Result<()> {
    let graph = load_graph(&inputs.graph)?;
    let table = load_table(&inputs.emb, &graph)?;
    let model = model_path.map(|p| load_model(p, &table)).transpose()?;
    if let Some(m) = &model {
        check_model_encoder(&m.value, &table.value)?;
    }
    let config = expansion.config(&graph)?;
    let policy = selection.policy()?;
    let records = load_records(queries, &inputs.graph)?;
    let lines = records
        .par_iter()
        .map(|r| -> Result<String> {
            let request = RetrievalRequest {
                id: r.id.clone(),
                query: r.query.clone(),
                query_file: r.query_file.clone(),
                expansion: config.clone(),
                policy,
                ordering: selection.order,
                universe: selection.universe.into(),
            };
            let result = retrieve(&graph.value, &table.value, model.as_ref().map(|m| &m.value), &request)
                .with_context(|| format!("record `{}`", r.id))?;
            let nodes = graph.value.nodes();
            let contexts: Vec<_> = result
                .selected
                .iter()
                .map(|e| {
                    let n = &nodes[e.node.0];
                    json!({
                        "node": e.node.0,
                        "qualified_name": n.qualified_name,
                        "file": n.file_path,
                        "score": e.score,
                        "probability": e.probability,
                    })
                })
                .collect();
            let line = json!({
                "id": r.id,
                "anchors": result.expanded.anchor_ids().iter().map(|a| a.0).collect::<Vec<_>>(),
                "expanded": result.expanded.len(),
                "universe": result.ranked.universe.as_str(),
                "candidates": result.ranked.len(),
                "contexts": contexts,
                "prompt_tokens": result.prompt.tokens,
                "prompt": result.prompt.text(),
            });
            Ok(line.to_string() + "\n")
        })
        .collect::<Result<Vec<_>>>()?;
    emit(out, &lines.concat())
}

fn sensitivity(
    records: &Path,
    inputs: &Inputs,
    grid_path: &Path,
    patterns: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let graph = load_graph(&inputs.graph)?;
    let table = load_table(&inputs.emb, &graph)?;
    let patterns = patterns.map(|p| load_patterns(p, &graph)).transpose()?;
    let grid_text = fs::read_to_string(grid_path).with_context(|| format!("reading {}", grid_path.display()))?;
    let grid = GridPoint::parse_grid(&grid_text)?;
    let encoder = query_encoder(&table.value)?;
    let records_list = load_records(records, &inputs.graph)?;
    let mut queries = Vec::new();
    for r in &records_list {
        match resolve_gold(&graph.value, r) {
            Ok(gold) => queries.push(SensitivityQuery {
                graph: &graph.value,
                table: &table.value,
                query: encode(&encoder, &r.query)?,
                gold,
            }),
            Err(d) => log::warn!("dropped {d}"),
        }
    }
    if queries.is_empty() {
        bail!("no record has a resolvable gold context");
    }
    let rows = run_sensitivity(&queries, &grid, patterns.as_ref().map(|p| &p.value))?;
    emit(out, &SensitivityRow::to_tsv(&rows))
}
