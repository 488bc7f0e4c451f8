use serde::{Deserialize, Serialize};

use super::PipelineError;

/// One query of a training or evaluation set, one JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct QueryRecord {
    pub id: String,
    /// Graph the record refers to; checked against the graph in use.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<String>,
    /// The code preceding the completion point.
    pub query: String,
    /// Repo-relative path of the file being completed.
    pub query_file: String,
    /// 1-based line being predicted, for the in-file baseline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_node: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_snippet: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_line: Option<String>,
}

/// Parses line-delimited JSON records; blank lines are skipped.
pub fn parse_records(text: &str) -> Result<Vec<QueryRecord>, PipelineError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: QueryRecord = serde_json::from_str(line).map_err(|e| PipelineError::Record {
            line: i + 1,
            message: e.to_string(),
        })?;
        if record.query.is_empty() {
            return Err(PipelineError::Record {
                line: i + 1,
                message: "empty query".into(),
            });
        }
        out.push(record);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_reports_lines() {
        let text = "{\"id\":\"a\",\"query\":\"x = 1\",\"query_file\":\"m.py\",\"gold_node\":3}\n\n\
                    {\"id\":\"b\",\"query\":\"y\",\"query_file\":\"m.py\",\"gold_line\":\"z\"}\n";
        let r = parse_records(text).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].gold_node, Some(3));
        assert_eq!(r[1].gold_line.as_deref(), Some("z"));
        let line = serde_json::to_string(&r[0]).unwrap();
        assert_eq!(parse_records(&line).unwrap()[0], r[0]);
        let bad = format!("{line}\n{{\"id\":\"c\"}}");
        assert!(matches!(parse_records(&bad), Err(PipelineError::Record { line: 2, .. })));
    }
}
