use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde_json::{json, Value};
use thiserror::Error;

pub const ENV_ENDPOINT: &str = "RSG_COMPLETION_ENDPOINT";
pub const ENV_API_KEY: &str = "RSG_COMPLETION_API_KEY";
pub const ENV_MODEL: &str = "RSG_COMPLETION_MODEL";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompletionError {
    #[error("completion client not configured: {0}")]
    Config(String),
    #[error("request {id}: transport failure: {message}")]
    Transport { id: String, message: String },
    #[error("request {id}: service returned status {status}")]
    Status { id: String, status: u16 },
    #[error("request {id}: malformed response: {message}")]
    Malformed { id: String, message: String },
    #[error("request {id}: empty completion")]
    Empty { id: String },
}

/// Sends prompt text, receives raw completion text.
pub trait CompletionClient: Sync {
    fn send(&self, request_id: &str, prompt: &str) -> Result<String, CompletionError>;
}

/// First line of the raw completion with trailing whitespace removed.
pub fn complete(client: &dyn CompletionClient, request_id: &str, prompt: &str) -> Result<String, CompletionError> {
    let raw = client.send(request_id, prompt)?;
    let line = raw.lines().next().unwrap_or("").trim_end();
    if line.trim().is_empty() {
        return Err(CompletionError::Empty {
            id: request_id.to_string(),
        });
    }
    Ok(line.to_string())
}

/// Completes `(request id, prompt)` pairs with at most `limit` requests in
/// flight; results are in input order.
pub fn complete_all(
    client: &dyn CompletionClient,
    requests: &[(String, String)],
    limit: usize,
) -> Vec<Result<String, CompletionError>> {
    let slots: Vec<Mutex<Option<Result<String, CompletionError>>>> =
        requests.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..limit.max(1).min(requests.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((id, prompt)) = requests.get(i) else { break };
                let result = complete(client, id, prompt);
                *slots[i].lock().expect("slot lock") = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().expect("slot lock").expect("every request completed"))
        .collect()
}

/// Offline client: canned completions by request id, otherwise the first
/// source line of the last context block, the one nearest the query.
#[derive(Debug, Clone, Default)]
pub struct StubClient {
    pub canned: BTreeMap<String, String>,
}

impl StubClient {
    pub fn new(canned: BTreeMap<String, String>) -> Self {
        StubClient { canned }
    }
}

impl CompletionClient for StubClient {
    fn send(&self, request_id: &str, prompt: &str) -> Result<String, CompletionError> {
        if let Some(c) = self.canned.get(request_id) {
            return Ok(c.clone());
        }
        // blocks are `# path` headers followed by source; take the last one
        let mut last_block = None;
        let mut lines = prompt.lines().peekable();
        while let Some(line) = lines.next() {
            if line.starts_with("# ") {
                last_block = lines.peek().map(|l| l.to_string());
            }
        }
        Ok(last_block.unwrap_or_default())
    }
}

/// JSON-over-HTTP client configured from the environment.
#[derive(Debug, Clone)]
pub struct HttpClient {
    endpoint: String,
    api_key: Option<String>,
    model: Option<String>,
    agent: ureq::Agent,
}

impl HttpClient {
    pub fn new(endpoint: String, api_key: Option<String>, model: Option<String>) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build();
        HttpClient {
            endpoint,
            api_key,
            model,
            agent: ureq::Agent::new_with_config(config),
        }
    }

    pub fn from_env() -> Result<Self, CompletionError> {
        let endpoint = std::env::var(ENV_ENDPOINT)
            .map_err(|_| CompletionError::Config(format!("{ENV_ENDPOINT} is not set")))?;
        Ok(HttpClient::new(
            endpoint,
            std::env::var(ENV_API_KEY).ok(),
            std::env::var(ENV_MODEL).ok(),
        ))
    }
}

fn completion_text(v: &Value) -> Option<&str> {
    let choice = v.get("choices").and_then(|c| c.get(0));
    choice
        .and_then(|c| c.get("text"))
        .or_else(|| choice.and_then(|c| c.get("message")).and_then(|m| m.get("content")))
        .or_else(|| v.get("completion"))
        .and_then(Value::as_str)
}

impl CompletionClient for HttpClient {
    fn send(&self, request_id: &str, prompt: &str) -> Result<String, CompletionError> {
        let mut body = json!({ "prompt": prompt, "max_tokens": 64, "temperature": 0 });
        if let Some(m) = &self.model {
            body["model"] = json!(m);
        }
        let mut req = self
            .agent
            .post(&self.endpoint)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let transport = |e: ureq::Error| CompletionError::Transport {
            id: request_id.to_string(),
            message: e.to_string(),
        };
        let mut resp = req.send(body.to_string()).map_err(transport)?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(CompletionError::Status {
                id: request_id.to_string(),
                status,
            });
        }
        let v: Value = resp.body_mut().read_json().map_err(|e| CompletionError::Malformed {
            id: request_id.to_string(),
            message: e.to_string(),
        })?;
        completion_text(&v)
            .map(str::to_string)
            .ok_or_else(|| CompletionError::Malformed {
                id: request_id.to_string(),
                message: "no completion text".into(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    struct Fixed(&'static str);
    impl CompletionClient for Fixed {
        fn send(&self, _: &str, _: &str) -> Result<String, CompletionError> {
            Ok(self.0.to_string())
        }
    }

    #[test]
    fn first_line_and_empty() {
        assert_eq!(complete(&Fixed("x = 1   \ny = 2"), "r", "p").unwrap(), "x = 1");
        assert_eq!(
            complete(&Fixed("\n"), "r7", "p"),
            Err(CompletionError::Empty { id: "r7".into() })
        );
    }

    #[test]
    fn stub_is_deterministic() {
        let stub = StubClient::new(BTreeMap::from([("a".to_string(), "canned\nmore".to_string())]));
        assert_eq!(complete(&stub, "a", "").unwrap(), "canned");
        let prompt = "# one.py\ndef f():\n# two.py\ndef g():\n    pass\nquery";
        assert_eq!(complete(&stub, "b", prompt).unwrap(), "def g():");
        let reqs: Vec<(String, String)> = (0..20).map(|i| (format!("r{i}"), prompt.to_string())).collect();
        let out = complete_all(&stub, &reqs, 4);
        assert_eq!(out.len(), 20);
        assert!(out.iter().all(|r| r.as_deref() == Ok("def g():")));
    }

    /// Serves one canned HTTP response per connection and records requests.
    fn serve(responses: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let mut seen = Vec::new();
            for (status, body) in responses {
                let (mut stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut head = String::new();
                let mut length = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        length = v.trim().parse().unwrap();
                    }
                    head.push_str(&line);
                    if line == "\r\n" {
                        break;
                    }
                }
                let mut payload = vec![0; length];
                reader.read_exact(&mut payload).unwrap();
                seen.push(format!("{head}{}", String::from_utf8(payload).unwrap()));
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
            seen
        });
        (format!("http://{addr}/v1/completions"), handle)
    }

    #[test]
    fn http_round_trip() {
        let (url, server) = serve(vec![
            (200, r#"{"choices":[{"text":"return a + b\nmore"}]}"#.into()),
            (200, r#"{"choices":[{"message":{"content":"y = 2"}}]}"#.into()),
            (503, "{}".into()),
            (200, r#"{"nothing":1}"#.into()),
        ]);
        let client = HttpClient::new(url, Some("secret".into()), Some("m1".into()));
        assert_eq!(complete(&client, "a", "def add(a, b):\n").unwrap(), "return a + b");
        assert_eq!(complete(&client, "b", "p").unwrap(), "y = 2");
        assert_eq!(complete(&client, "c", "p"), Err(CompletionError::Status { id: "c".into(), status: 503 }));
        assert!(matches!(complete(&client, "d", "p"), Err(CompletionError::Malformed { .. })));
        let seen = server.join().unwrap();
        assert!(seen[0].to_ascii_lowercase().contains("authorization: bearer secret"));
        assert!(seen[0].contains("\"model\":\"m1\""));
        assert!(seen[0].contains("def add(a, b):\\n"));
    }

    #[test]
    fn transport_failure_carries_id() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/", listener.local_addr().unwrap());
        drop(listener);
        let client = HttpClient::new(url, None, None);
        assert!(matches!(complete(&client, "z", "p"), Err(CompletionError::Transport { id, .. }) if id == "z"));
    }
}
