//! Seeded synthetic Python repositories with planted gold contexts, for
//! the expansion and link-prediction experiments.

use std::collections::HashSet;
use std::fs;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::parser::SourceUnit;
use crate::pipeline::QueryRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub units: Vec<SourceUnit>,
    pub train: Vec<QueryRecord>,
    pub eval: Vec<QueryRecord>,
}

impl SynthCorpus {
    /// Writes `repo/`, `train.jsonl` and `eval.jsonl` under `dir`.
    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        let repo = dir.join("repo");
        for u in &self.units {
            let path = repo.join(&u.file_path);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, &u.raw_text)?;
        }
        let jsonl = |records: &[QueryRecord]| -> String {
            records
                .iter()
                .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
                .collect()
        };
        fs::write(dir.join("train.jsonl"), jsonl(&self.train))?;
        fs::write(dir.join("eval.jsonl"), jsonl(&self.eval))?;
        Ok(())
    }
}

const SYLLABLES: [&str; 24] = [
    "ka", "lo", "mi", "ru", "ze", "ta", "vo", "ni", "pe", "su", "gar", "dun", "fel", "hox", "jib", "mar",
    "qua", "ros", "tiv", "wex", "yol", "bri", "cho", "dra",
];

/// Unique pronounceable identifiers.
struct Words {
    rng: ChaCha8Rng,
    used: HashSet<String>,
}

impl Words {
    fn new(seed: u64) -> Self {
        Words {
            rng: ChaCha8Rng::seed_from_u64(seed),
            used: HashSet::new(),
        }
    }

    fn next(&mut self) -> String {
        loop {
            let n = self.rng.random_range(3..=4);
            let w: String = (0..n)
                .map(|_| SYLLABLES[self.rng.random_range(0..SYLLABLES.len())])
                .collect();
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }
}

fn line_count(text: &str) -> usize {
    text.lines().count()
}

/// Each instance: a handler in `p<i>/service.py` whose text matches the
/// query and that invokes the gold function in `p<i>/engine.py`, plus
/// helpers, a class and unrelated functions reachable by unfiltered
/// search. Every `rare_every`-th instance instead keeps the gold as an
/// uncalled sibling of the handler.
pub fn planted_path_corpus(train: usize, eval: usize, rare_every: usize, seed: u64) -> SynthCorpus {
    let mut words = Words::new(seed);
    let mut units = Vec::new();
    let mut records = Vec::new();
    for i in 0..train + eval {
        let [topic, field, verb, gold, helper_a, helper_b, cls, other] = std::array::from_fn(|_| words.next());
        let rare = rare_every > 0 && i % rare_every == rare_every - 1;
        let dir = format!("p{i}");
        let gold_fn = format!("compute_{gold}");
        let gold_src = format!("def {gold_fn}(data, scale):\n    return data * scale\n");
        let engine = if rare {
            format!("def idle_{gold}(data):\n    return data\n")
        } else {
            format!("{gold_src}\n\ndef idle_{gold}(data):\n    return data\n")
        };
        units.push(SourceUnit::new(format!("{dir}/engine.py"), engine));
        units.push(SourceUnit::new(
            format!("{dir}/helpers.py"),
            format!(
                "def fmt_{helper_a}(x):\n    return str(x)\n\n\ndef norm_{helper_b}(x):\n    return abs(x)\n\n\ndef clip_{helper_b}(x):\n    return norm_{helper_b}(x)\n"
            ),
        ));
        let call = if rare {
            String::new()
        } else {
            format!("    value = {gold_fn}({field}, 2)\n")
        };
        let import_gold = if rare {
            String::new()
        } else {
            format!("from {dir}.engine import {gold_fn}\n")
        };
        let sibling = if rare { format!("\n\n{gold_src}") } else { String::new() };
        let service = format!(
            "{import_gold}from {dir}.helpers import fmt_{helper_a}, norm_{helper_b}\n\n\n\
             def {verb}_{topic}_{field}({topic}, {field}):\n    {topic}_{field} = {topic}.{field}\n{call}    return {topic}_{field}\n\n\n\
             def report_{other}(x):\n    return fmt_{helper_a}(x) + norm_{helper_b}(x)\n\n\n\
             class Panel{cls}:\n    def draw_{cls}(self, x):\n        return fmt_{helper_a}(x)\n\n    def size_{cls}(self):\n        return norm_{helper_b}(1)\n{sibling}"
        );
        let query_file = format!("{dir}/service.py");
        units.push(SourceUnit::new(query_file.clone(), service));
        records.push(QueryRecord {
            id: format!("planted-{i}"),
            query: format!("def {verb}_{topic}({topic}, {field}):\n    {topic}_{field} = {topic}.{field}\n"),
            query_file,
            gold_snippet: Some(gold_src),
            gold_line: Some(format!("    value = {gold_fn}({field}, 2)")),
            ..QueryRecord::default()
        });
    }
    let eval_records = records.split_off(train);
    SynthCorpus {
        units,
        train: records,
        eval: eval_records,
    }
}

/// Each instance: `app/q_<i>.py` imports the gold function from
/// `core/util_a_<i>.py` and the module `core/util_b_<i>`. The query
/// shares its vocabulary with a view function in `util_b`, not with the
/// gold; `util_b` also holds a decoy with the gold's template. Query files
/// are truncated before the completion point.
pub fn link_corpus(train: usize, eval: usize, seed: u64) -> SynthCorpus {
    let mut words = Words::new(seed);
    let mut units = vec![
        SourceUnit::new("app/__init__.py", ""),
        SourceUnit::new("core/__init__.py", ""),
    ];
    let mut records = Vec::new();
    for i in 0..train + eval {
        let [gold, decoy, topic, field, mark] = std::array::from_fn(|_| words.next());
        let gold_fn = format!("accumulate_{gold}");
        let gold_src = format!(
            "def {gold_fn}(payload, limit):\n    total = 0\n    for item in payload:\n        total += item\n    return min(total, limit)\n"
        );
        units.push(SourceUnit::new(format!("core/util_a_{i}.py"), gold_src.clone()));
        units.push(SourceUnit::new(
            format!("core/util_b_{i}.py"),
            format!(
                "def {topic}_{field}_view({topic}, {mark}):\n    {field} = {topic}.{field}\n    {mark}_{field} = {mark}.get({field})\n    return {mark}_{field}\n\n\n\
                 def accumulate_{decoy}(payload, limit):\n    total = 0\n    for item in payload:\n        total += item\n    return min(total, limit)\n"
            ),
        ));
        let query_file = format!("app/q_{i}.py");
        let head = format!("from core.util_a_{i} import {gold_fn}\nimport core.util_b_{i}\n");
        let line = line_count(&head) + 3;
        units.push(SourceUnit::new(query_file.clone(), head));
        records.push(QueryRecord {
            id: format!("link-{i}"),
            query: format!(
                "def show_{topic}({topic}, {mark}):\n    {field} = {topic}.{field}\n    {mark}_{field} = {mark}.get({field})\n"
            ),
            query_file,
            line: Some(line),
            gold_snippet: Some(gold_src),
            gold_line: Some(format!("    return {gold_fn}({mark}_{field}, 100)")),
            ..QueryRecord::default()
        });
    }
    let eval_records = records.split_off(train);
    SynthCorpus {
        units,
        train: records,
        eval: eval_records,
    }
}
