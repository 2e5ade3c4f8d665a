//! HTTP clients for grammar-capable inference servers.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{BackendKind, LmBackend, LmError, LmRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WireMode {
    /// `POST {url}/completion` with a GBNF `grammar` field.
    #[default]
    Grammar,
    /// `POST {url}/v1/chat/completions` with a JSON-schema `response_format`.
    JsonSchema,
}

/// Counting semaphore bounding in-flight requests.
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

struct SlotGuard<'a>(&'a Slots);

impl Slots {
    fn new(n: usize) -> Self {
        Self { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        SlotGuard(self)
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

pub struct HttpBackend {
    base_url: String,
    mode: WireMode,
    client: reqwest::blocking::Client,
    slots: Slots,
}

pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

impl HttpBackend {
    pub fn new(base_url: impl Into<String>, mode: WireMode) -> Result<Self, LmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| LmError::Transport(e.to_string()))?;
        Ok(Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            mode,
            client,
            slots: Slots::new(DEFAULT_MAX_IN_FLIGHT),
        })
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.slots = Slots::new(n);
        self
    }

    fn body(&self, req: &LmRequest) -> (String, Value) {
        match self.mode {
            WireMode::Grammar => {
                let mut body = json!({
                    "prompt": req.prompt,
                    "n_predict": req.max_tokens,
                    "temperature": req.temperature,
                    "model": req.model,
                    "cache_prompt": true,
                });
                if let Some(g) = &req.grammar {
                    body["grammar"] = json!(g.text);
                }
                if let Some(seed) = req.seed {
                    body["seed"] = json!(seed);
                }
                (format!("{}/completion", self.base_url), body)
            }
            WireMode::JsonSchema => {
                let mut body = json!({
                    "model": req.model,
                    "messages": [{"role": "user", "content": req.prompt}],
                    "max_tokens": req.max_tokens,
                    "temperature": req.temperature,
                });
                if let Some(g) = &req.grammar {
                    body["response_format"] = json!({
                        "type": "json_schema",
                        "json_schema": {"name": "prototype_graph", "strict": true, "schema": g.json_schema()},
                    });
                }
                if let Some(seed) = req.seed {
                    body["seed"] = json!(seed);
                }
                (format!("{}/v1/chat/completions", self.base_url), body)
            }
        }
    }

    fn read_content(&self, v: &Value) -> Option<String> {
        match self.mode {
            WireMode::Grammar => v.get("content")?.as_str().map(str::to_string),
            WireMode::JsonSchema => v.pointer("/choices/0/message/content")?.as_str().map(str::to_string),
        }
    }
}

impl LmBackend for HttpBackend {
    fn kind(&self) -> BackendKind {
        match self.mode {
            WireMode::Grammar => BackendKind::GrammarHttp,
            WireMode::JsonSchema => BackendKind::SchemaHttp,
        }
    }

    fn complete(&self, req: &LmRequest) -> Result<String, LmError> {
        let (url, body) = self.body(req);
        let _slot = self.slots.acquire();
        let resp = self.client.post(&url).json(&body).send().map_err(|e| LmError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| LmError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(LmError::Status { status: status.as_u16(), body: text });
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| LmError::Protocol(e.to_string()))?;
        self.read_content(&v).ok_or_else(|| LmError::Protocol(format!("no completion text in response from {url}")))
    }
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    use super::*;
    use crate::grammar::static_schema_grammar;

    fn req() -> LmRequest {
        LmRequest {
            prompt: "p".into(),
            grammar: Some(static_schema_grammar()),
            max_tokens: 128,
            temperature: 0.0,
            seed: Some(7),
            model: "m".into(),
        }
    }

    #[test]
    fn grammar_body_carries_grammar_and_seed() {
        let b = HttpBackend::new("http://h:1/", WireMode::Grammar).unwrap();
        let (url, body) = b.body(&req());
        assert_eq!(url, "http://h:1/completion");
        assert_eq!(body["n_predict"], 128);
        assert_eq!(body["seed"], 7);
        assert!(body["grammar"].as_str().unwrap().starts_with("root ::="));
        assert_eq!(b.read_content(&json!({"content": "x"})).as_deref(), Some("x"));
    }

    #[test]
    fn schema_body_carries_response_format() {
        let b = HttpBackend::new("http://h:1", WireMode::JsonSchema).unwrap();
        let (url, body) = b.body(&req());
        assert_eq!(url, "http://h:1/v1/chat/completions");
        assert_eq!(body["response_format"]["type"], "json_schema");
        let v = json!({"choices": [{"message": {"content": "y"}}]});
        assert_eq!(b.read_content(&v).as_deref(), Some("y"));
    }

    #[test]
    fn unreachable_server_is_a_transport_error() {
        let b = HttpBackend::new("http://127.0.0.1:9", WireMode::Grammar).unwrap();
        assert!(matches!(b.complete(&req()), Err(LmError::Transport(_))));
    }

    #[test]
    fn slots_bound_concurrency() {
        let slots = Arc::new(Slots::new(2));
        let active = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let (slots, active, peak) = (slots.clone(), active.clone(), peak.clone());
                std::thread::spawn(move || {
                    let _g = slots.acquire();
                    let now = active.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(10));
                    active.fetch_sub(1, Ordering::SeqCst);
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }
}
