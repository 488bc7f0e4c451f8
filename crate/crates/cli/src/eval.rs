//! `rsg eval`: acc@k over ranked contexts or exact match over completions.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use rsg_core::pipeline::{
    acc_at_k, complete_all, exact_match, gold_only_prompt, in_file_only_prompt, resolve_gold, retrieve,
    AssembledPrompt, CompletionClient, ContextBlock, HttpClient, QueryRecord, RetrievalOutcome,
    RetrievalRequest, StubClient,
};
use serde_json::json;

use crate::artifacts::{load_graph, load_model, load_records, load_table};
use crate::{check_model_encoder, emit, ExpansionArgs, Inputs, SelectionArgs};

#[derive(Args)]
pub struct EvalArgs {
    records: PathBuf,
    #[arg(long, value_enum)]
    task: Task,
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    expansion: ExpansionArgs,
    #[command(flatten)]
    selection: SelectionArgs,
    /// Prompt contexts for the completion task.
    #[arg(long, value_enum, default_value_t = ContextMode::Retrieved)]
    context: ContextMode,
    /// Repository root, read by the in-file-only baseline.
    #[arg(long)]
    repo: Option<PathBuf>,
    /// `stub` answers offline; `http` reads its endpoint and key from the
    /// environment.
    #[arg(long, value_enum, default_value_t = ClientKind::Stub)]
    client: ClientKind,
    /// JSON object of canned stub completions keyed by record id.
    #[arg(long)]
    canned: Option<PathBuf>,
    /// Completion requests in flight at once.
    #[arg(long, default_value_t = 4)]
    concurrency: usize,
    /// Metric table output; stdout when absent.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Per-record results as JSON lines.
    #[arg(long)]
    details: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Task {
    Retrieval,
    Completion,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ContextMode {
    Retrieved,
    GoldOnly,
    InFileOnly,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ClientKind {
    Stub,
    Http,
}

impl ContextMode {
    fn as_str(self) -> &'static str {
        match self {
            ContextMode::Retrieved => "retrieved",
            ContextMode::GoldOnly => "gold-only",
            ContextMode::InFileOnly => "in-file-only",
        }
    }
}

/// A record's ranking and prompt.
struct Scored {
    outcome: RetrievalOutcome,
    prompt: AssembledPrompt,
}

pub fn run(args: &EvalArgs) -> Result<()> {
    let graph = load_graph(&args.inputs.graph)?;
    let table = load_table(&args.inputs.emb, &graph)?;
    let model = args.model.as_deref().map(|p| load_model(p, &table)).transpose()?;
    if let Some(m) = &model {
        check_model_encoder(&m.value, &table.value)?;
    }
    let config = args.expansion.config(&graph)?;
    let policy = args.selection.policy()?;
    let records = load_records(&args.records, &args.inputs.graph)?;
    let records: Vec<&QueryRecord> = match args.task {
        Task::Retrieval => records.iter().collect(),
        Task::Completion => records.iter().filter(|r| r.gold_line.is_some()).collect(),
    };
    if records.is_empty() {
        bail!("no records to evaluate");
    }
    if args.context == ContextMode::InFileOnly && args.repo.is_none() {
        bail!("--context in-file-only needs --repo");
    }

    let scored: Vec<Result<Scored, String>> = records
        .par_iter()
        .map(|r| -> Result<Result<Scored, String>> {
            let gold = match resolve_gold(&graph.value, r) {
                Ok(g) => g,
                Err(d) if args.task == Task::Retrieval || args.context == ContextMode::GoldOnly => {
                    return Ok(Err(d))
                }
                Err(_) => rsg_core::graph::NodeId(usize::MAX),
            };
            let request = RetrievalRequest {
                id: r.id.clone(),
                query: r.query.clone(),
                query_file: r.query_file.clone(),
                expansion: config.clone(),
                policy,
                ordering: args.selection.order,
                universe: args.selection.universe.into(),
            };
            let result = retrieve(&graph.value, &table.value, model.as_ref().map(|m| &m.value), &request)
                .with_context(|| format!("record `{}`", r.id))?;
            let prompt = match args.context {
                ContextMode::Retrieved => result.prompt,
                ContextMode::GoldOnly => gold_only_prompt(&r.query, ContextBlock::from_node(&graph.value, gold)),
                ContextMode::InFileOnly => {
                    let Some(line) = r.line else {
                        return Ok(Err(format!("{}: no prediction line for the in-file baseline", r.id)));
                    };
                    let path = args.repo.as_ref().expect("checked above").join(&r.query_file);
                    let source = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    in_file_only_prompt(&source, line)
                }
            };
            Ok(Ok(Scored {
                outcome: RetrievalOutcome {
                    id: r.id.clone(),
                    gold,
                    ranked: result.ranked.nodes(),
                },
                prompt,
            }))
        })
        .collect::<Result<_>>()?;

    let mut kept = Vec::new();
    let mut gold_lines = Vec::new();
    for (r, s) in records.iter().zip(scored) {
        match s {
            Ok(s) => {
                kept.push(s);
                gold_lines.push(r.gold_line.clone().unwrap_or_default());
            }
            Err(d) => log::warn!("dropped {d}"),
        }
    }
    let dropped = records.len() - kept.len();

    let mut table_text = String::from("metric\tvalue\n");
    let mut details = String::new();
    match args.task {
        Task::Retrieval => {
            let outcomes: Vec<RetrievalOutcome> = kept.iter().map(|s| s.outcome.clone()).collect();
            writeln!(table_text, "task\tretrieval")?;
            writeln!(table_text, "records\t{}", records.len())?;
            writeln!(table_text, "scored\t{}", outcomes.len())?;
            writeln!(table_text, "dropped\t{dropped}")?;
            for k in [1, 3, 5] {
                writeln!(table_text, "acc@{k}\t{:.4}", acc_at_k(&outcomes, k)?)?;
            }
            for o in &outcomes {
                let rank = o.ranked.iter().position(|&n| n == o.gold).map(|i| i + 1);
                let ranked: Vec<usize> = o.ranked.iter().map(|n| n.0).collect();
                details += &(json!({"id": o.id, "gold": o.gold.0, "gold_rank": rank, "ranked": ranked}).to_string() + "\n");
            }
        }
        Task::Completion => {
            let client: Box<dyn CompletionClient> = match args.client {
                ClientKind::Stub => {
                    let canned: BTreeMap<String, String> = match &args.canned {
                        Some(p) => serde_json::from_str(
                            &fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
                        )
                        .with_context(|| format!("parsing {}", p.display()))?,
                        None => BTreeMap::new(),
                    };
                    Box::new(StubClient::new(canned))
                }
                ClientKind::Http => Box::new(HttpClient::from_env()?),
            };
            let requests: Vec<(String, String)> = kept
                .iter()
                .map(|s| (s.outcome.id.clone(), s.prompt.text()))
                .collect();
            let results = complete_all(client.as_ref(), &requests, args.concurrency);
            let mut failed = 0;
            let predictions: Vec<String> = results
                .into_iter()
                .map(|r| {
                    r.unwrap_or_else(|e| {
                        log::warn!("{e}");
                        failed += 1;
                        String::new()
                    })
                })
                .collect();
            let pairs: Vec<(&str, &str)> = predictions
                .iter()
                .zip(&gold_lines)
                .map(|(p, g)| (p.as_str(), g.as_str()))
                .collect();
            let mean_tokens = if kept.is_empty() {
                0.0
            } else {
                kept.iter().map(|s| s.prompt.tokens as f64).sum::<f64>() / kept.len() as f64
            };
            writeln!(table_text, "task\tcompletion")?;
            writeln!(table_text, "context\t{}", args.context.as_str())?;
            writeln!(table_text, "records\t{}", records.len())?;
            writeln!(table_text, "scored\t{}", pairs.len())?;
            writeln!(table_text, "dropped\t{dropped}")?;
            writeln!(table_text, "failed\t{failed}")?;
            writeln!(table_text, "mean_prompt_tokens\t{mean_tokens:.4}")?;
            writeln!(table_text, "em\t{:.4}", exact_match(&pairs))?;
            for (s, (p, g)) in kept.iter().zip(&pairs) {
                details += &(json!({"id": s.outcome.id, "prediction": p, "gold_line": g, "prompt_tokens": s.prompt.tokens}).to_string() + "\n");
            }
        }
    }
    if let Some(p) = &args.details {
        fs::write(p, details).with_context(|| format!("writing {}", p.display()))?;
    }
    emit(args.out.as_deref(), &table_text)
}
