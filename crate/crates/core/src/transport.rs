//! Wire transports for the reasoner and the tool services, with
//! record/replay support.
//!
//! Tool protocol: request `{kind, image}` with the image as base64 PNG
//! bytes, response is structured text matching the typed results. Reasoner
//! protocol: an ordered list of role-tagged messages, each with text and
//! zero or more image payloads; the response is plain text.
//!
//! Fixtures hold one raw response per file, named `<kind>-<digest>.fixture`,
//! where the digest keys the request: the PNG bytes for tools, the canonical
//! message JSON for the reasoner.

use std::collections::HashMap;
use std::collections::VecDeque;
use std::path::PathBuf;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analyzers::tools::ToolKind;
use crate::error::{Error, Result};

/// One role-tagged message in a reasoner request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub text: String,
    /// Base64-encoded PNG payloads.
    pub images: Vec<String>,
}

impl ChatMessage {
    pub fn user(text: impl Into<String>) -> ChatMessage {
        ChatMessage {
            role: "user".into(),
            text: text.into(),
            images: Vec::new(),
        }
    }

    pub fn user_with_images(text: impl Into<String>, images: Vec<String>) -> ChatMessage {
        ChatMessage {
            role: "user".into(),
            text: text.into(),
            images,
        }
    }

    pub fn assistant(text: impl Into<String>) -> ChatMessage {
        ChatMessage {
            role: "assistant".into(),
            text: text.into(),
            images: Vec::new(),
        }
    }
}

/// Client for the multimodal reasoner service.
pub trait ReasonerClient: Send + Sync {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String>;
}

impl<T: ReasonerClient + ?Sized> ReasonerClient for std::sync::Arc<T> {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String> {
        (**self).complete(messages)
    }
}

/// Raw transport for the tool services; returns the unparsed wire body.
pub trait ToolTransport: Send + Sync {
    fn call(&self, kind: ToolKind, image_png: &[u8]) -> Result<String>;
}

impl<T: ToolTransport + ?Sized> ToolTransport for std::sync::Arc<T> {
    fn call(&self, kind: ToolKind, image_png: &[u8]) -> Result<String> {
        (**self).call(kind, image_png)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Fixture key for a tool request.
pub fn tool_request_key(kind: ToolKind, image_png: &[u8]) -> String {
    format!("{}-{}", kind.name(), sha256_hex(image_png))
}

/// Fixture key for a reasoner request, digesting the canonical message JSON.
pub fn reasoner_request_key(messages: &[ChatMessage]) -> String {
    let canonical = serde_json::to_vec(messages).expect("messages serialize");
    format!("reasoner-{}", sha256_hex(&canonical))
}

/// Read-only fixture store; every response comes from disk.
#[derive(Clone, Debug)]
pub struct ReplayStore {
    dir: PathBuf,
}

impl ReplayStore {
    pub fn new(dir: impl Into<PathBuf>) -> ReplayStore {
        ReplayStore { dir: dir.into() }
    }

    pub fn fixture_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.fixture"))
    }

    fn read(&self, key: &str) -> Result<String> {
        let path = self.fixture_path(key);
        std::fs::read_to_string(&path).map_err(|_| Error::FixtureMissing {
            key: key.to_string(),
        })
    }
}

impl ReasonerClient for ReplayStore {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String> {
        self.read(&reasoner_request_key(messages))
    }
}

impl ToolTransport for ReplayStore {
    fn call(&self, kind: ToolKind, image_png: &[u8]) -> Result<String> {
        self.read(&tool_request_key(kind, image_png))
    }
}

/// Serialized fixture writer shared by the recording wrappers.
#[derive(Debug)]
pub struct FixtureWriter {
    dir: PathBuf,
    lock: Mutex<()>,
}

impl FixtureWriter {
    pub fn new(dir: impl Into<PathBuf>) -> Result<FixtureWriter> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(FixtureWriter {
            dir,
            lock: Mutex::new(()),
        })
    }

    pub fn write(&self, key: &str, body: &str) -> Result<()> {
        let _guard = self.lock.lock().expect("fixture lock");
        std::fs::write(self.dir.join(format!("{key}.fixture")), body)?;
        Ok(())
    }
}

/// Wraps a reasoner client and persists every raw response keyed by request
/// digest.
pub struct RecordingReasoner<C> {
    inner: C,
    writer: FixtureWriter,
}

impl<C: ReasonerClient> RecordingReasoner<C> {
    pub fn new(inner: C, dir: impl Into<PathBuf>) -> Result<Self> {
        Ok(RecordingReasoner {
            inner,
            writer: FixtureWriter::new(dir)?,
        })
    }
}

impl<C: ReasonerClient> ReasonerClient for RecordingReasoner<C> {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String> {
        let reply = self.inner.complete(messages)?;
        self.writer.write(&reasoner_request_key(messages), &reply)?;
        Ok(reply)
    }
}

/// Wraps a tool transport and persists every raw response keyed by
/// `(kind, image digest)`.
pub struct RecordingTools<T> {
    inner: T,
    writer: FixtureWriter,
}

impl<T: ToolTransport> RecordingTools<T> {
    pub fn new(inner: T, dir: impl Into<PathBuf>) -> Result<Self> {
        Ok(RecordingTools {
            inner,
            writer: FixtureWriter::new(dir)?,
        })
    }
}

impl<T: ToolTransport> ToolTransport for RecordingTools<T> {
    fn call(&self, kind: ToolKind, image_png: &[u8]) -> Result<String> {
        let body = self.inner.call(kind, image_png)?;
        self.writer
            .write(&tool_request_key(kind, image_png), &body)?;
        Ok(body)
    }
}

/// In-memory reasoner that pops scripted replies in order; running out of
/// script reads as an unavailable service.
#[derive(Debug, Default)]
pub struct ScriptedReasoner {
    replies: Mutex<VecDeque<String>>,
}

impl ScriptedReasoner {
    pub fn new<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> ScriptedReasoner {
        ScriptedReasoner {
            replies: Mutex::new(replies.into_iter().map(Into::into).collect()),
        }
    }

    pub fn remaining(&self) -> usize {
        self.replies.lock().expect("script lock").len()
    }
}

impl ReasonerClient for ScriptedReasoner {
    fn complete(&self, _messages: &[ChatMessage]) -> Result<String> {
        self.replies
            .lock()
            .expect("script lock")
            .pop_front()
            .ok_or_else(|| Error::ReasonerUnavailable {
                attempts: 1,
                message: "scripted reply queue exhausted".into(),
            })
    }
}

/// In-memory tool transport returning one canned body per kind.
#[derive(Clone, Debug, Default)]
pub struct CannedTools {
    bodies: HashMap<ToolKind, String>,
}

impl CannedTools {
    pub fn new() -> CannedTools {
        CannedTools::default()
    }

    pub fn with(mut self, kind: ToolKind, body: impl Into<String>) -> CannedTools {
        self.bodies.insert(kind, body.into());
        self
    }
}

impl ToolTransport for CannedTools {
    fn call(&self, kind: ToolKind, _image_png: &[u8]) -> Result<String> {
        self.bodies
            .get(&kind)
            .cloned()
            .ok_or_else(|| Error::ToolUnavailable {
                kind: kind.name().to_string(),
                attempts: 1,
                message: "no canned body for this kind".into(),
            })
    }
}

/// Transport that always fails; stands in for an unreachable service.
#[derive(Clone, Copy, Debug, Default)]
pub struct Unreachable;

impl ReasonerClient for Unreachable {
    fn complete(&self, _messages: &[ChatMessage]) -> Result<String> {
        Err(Error::ReasonerUnavailable {
            attempts: 1,
            message: "no endpoint configured".into(),
        })
    }
}

impl ToolTransport for Unreachable {
    fn call(&self, kind: ToolKind, _image_png: &[u8]) -> Result<String> {
        Err(Error::ToolUnavailable {
            kind: kind.name().to_string(),
            attempts: 1,
            message: "no endpoint configured".into(),
        })
    }
}

#[cfg(feature = "http")]
pub use http::{HttpReasoner, HttpTools};

#[cfg(feature = "http")]
mod http {
    use super::*;
    use std::time::Duration;

    /// HTTP client for the reasoner service. Posts the message list as JSON
    /// and returns the response body as text. Transport failures are retried
    /// up to `retries` extra attempts.
    pub struct HttpReasoner {
        pub endpoint: String,
        pub model: String,
        pub temperature: f64,
        pub timeout: Duration,
        pub retries: usize,
        pub api_key: Option<String>,
        client: reqwest::blocking::Client,
    }

    impl HttpReasoner {
        pub fn new(
            endpoint: String,
            model: String,
            temperature: f64,
            timeout: Duration,
            retries: usize,
            api_key: Option<String>,
        ) -> Result<HttpReasoner> {
            let client = reqwest::blocking::Client::builder()
                .timeout(timeout)
                .build()
                .map_err(|e| Error::ReasonerUnavailable {
                    attempts: 0,
                    message: e.to_string(),
                })?;
            Ok(HttpReasoner {
                endpoint,
                model,
                temperature,
                timeout,
                retries,
                api_key,
                client,
            })
        }
    }

    impl ReasonerClient for HttpReasoner {
        fn complete(&self, messages: &[ChatMessage]) -> Result<String> {
            let body = serde_json::json!({
                "model": self.model,
                "temperature": self.temperature,
                "messages": messages,
            });
            let attempts = self.retries + 1;
            let mut last_err = String::new();
            for _ in 0..attempts {
                let mut req = self.client.post(&self.endpoint).json(&body);
                if let Some(key) = &self.api_key {
                    req = req.bearer_auth(key);
                }
                match req.send().and_then(|r| r.error_for_status()) {
                    Ok(resp) => match resp.text() {
                        Ok(text) => return Ok(text),
                        Err(e) => last_err = e.to_string(),
                    },
                    Err(e) => last_err = e.to_string(),
                }
            }
            Err(Error::ReasonerUnavailable {
                attempts,
                message: last_err,
            })
        }
    }

    /// HTTP transport for the tool services, one endpoint per kind.
    pub struct HttpTools {
        pub endpoints: HashMap<ToolKind, String>,
        pub timeout: Duration,
        pub retries: usize,
        client: reqwest::blocking::Client,
    }

    impl HttpTools {
        pub fn new(
            endpoints: HashMap<ToolKind, String>,
            timeout: Duration,
            retries: usize,
        ) -> Result<HttpTools> {
            let client = reqwest::blocking::Client::builder()
                .timeout(timeout)
                .build()
                .map_err(|e| Error::ToolUnavailable {
                    kind: "all".into(),
                    attempts: 0,
                    message: e.to_string(),
                })?;
            Ok(HttpTools {
                endpoints,
                timeout,
                retries,
                client,
            })
        }
    }

    impl ToolTransport for HttpTools {
        fn call(&self, kind: ToolKind, image_png: &[u8]) -> Result<String> {
            use base64::Engine as _;
            let endpoint = self
                .endpoints
                .get(&kind)
                .ok_or_else(|| Error::ToolUnavailable {
                    kind: kind.name().to_string(),
                    attempts: 0,
                    message: "no endpoint configured".into(),
                })?;
            let body = serde_json::json!({
                "kind": kind.name(),
                "image": base64::engine::general_purpose::STANDARD.encode(image_png),
            });
            let attempts = self.retries + 1;
            let mut last_err = String::new();
            for _ in 0..attempts {
                match self
                    .client
                    .post(endpoint)
                    .json(&body)
                    .send()
                    .and_then(|r| r.error_for_status())
                {
                    Ok(resp) => match resp.text() {
                        Ok(text) => return Ok(text),
                        Err(e) => last_err = e.to_string(),
                    },
                    Err(e) => last_err = e.to_string(),
                }
            }
            Err(Error::ToolUnavailable {
                kind: kind.name().to_string(),
                attempts,
                message: last_err,
            })
        }
    }
}
