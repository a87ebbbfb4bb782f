//! Oracles backed by a JSON-over-HTTP service exposing
//! `POST {base}/chat/completions` and `POST {base}/embeddings`.
//!
//! Connection settings come from `A2RAG_API_BASE`, `A2RAG_API_KEY`,
//! `A2RAG_CHAT_MODEL` and `A2RAG_EMBED_MODEL`. Prompt texts are templates
//! with `{query}`, `{answer}`, `{evidence}`, `{stage}`, `{failure}`,
//! `{instruction}` and `{seeds}` placeholders; defaults ship in `prompts/`
//! and can be overridden file by file from a directory.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use crate::controller::FailureType;
use crate::retriever::Stage;

use super::{
    AnswerGenerator, BinaryValidator, Mentions, Metered, MentionExtractor, OracleError, OracleResult, OracleSuite,
    ProposedTriple, QueryRewriter, RewriteRequest, Sufficiency, SufficiencyJudge, TextEmbedder, TripleProposer, Usage,
};

/// Every remote implementation name starts with this.
pub const NAME_PREFIX: &str = "remote-";

pub const ENV_API_BASE: &str = "A2RAG_API_BASE";
pub const ENV_API_KEY: &str = "A2RAG_API_KEY";
pub const ENV_CHAT_MODEL: &str = "A2RAG_CHAT_MODEL";
pub const ENV_EMBED_MODEL: &str = "A2RAG_EMBED_MODEL";

#[derive(Debug, Clone)]
pub struct RemoteSettings {
    pub api_base: String,
    pub api_key: String,
    pub chat_model: Option<String>,
    pub embed_model: Option<String>,
    pub timeout: Duration,
    pub max_retries: u32,
    pub backoff: Duration,
    pub max_in_flight: usize,
}

impl RemoteSettings {
    pub fn from_env() -> Result<Self, OracleError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    /// Reads settings through `lookup` so tests need not touch the process env.
    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, OracleError> {
        let required = |k: &str| {
            lookup(k)
                .filter(|v| !v.trim().is_empty())
                .ok_or_else(|| OracleError::Config(format!("environment variable {k} is not set")))
        };
        Ok(Self {
            api_base: required(ENV_API_BASE)?.trim_end_matches('/').to_string(),
            api_key: required(ENV_API_KEY)?,
            chat_model: lookup(ENV_CHAT_MODEL).filter(|v| !v.is_empty()),
            embed_model: lookup(ENV_EMBED_MODEL).filter(|v| !v.is_empty()),
            timeout: Duration::from_secs(60),
            max_retries: 3,
            backoff: Duration::from_millis(500),
            max_in_flight: 8,
        })
    }
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
struct InFlight {
    free: Mutex<usize>,
    cv: Condvar,
}

impl InFlight {
    fn new(n: usize) -> Self {
        Self { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) -> InFlightGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

/// Shared HTTP client. Thread-safe; connections are pooled by the agent.
#[derive(Debug)]
pub struct RemoteClient {
    settings: RemoteSettings,
    agent: ureq::Agent,
    in_flight: InFlight,
}

impl RemoteClient {
    pub fn new(settings: RemoteSettings) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(settings.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let in_flight = InFlight::new(settings.max_in_flight);
        Self { settings, agent, in_flight }
    }

    pub fn settings(&self) -> &RemoteSettings {
        &self.settings
    }

    fn post_once(&self, path: &str, body: &Value) -> Result<Value, OracleError> {
        let _slot = self.in_flight.acquire();
        let url = format!("{}/{}", self.settings.api_base, path);
        let mut resp = self
            .agent
            .post(&url)
            .header("Authorization", &format!("Bearer {}", self.settings.api_key))
            .send_json(body)
            .map_err(|e| OracleError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| OracleError::Transport(e.to_string()))?;
        match status {
            200..=299 => serde_json::from_str(&text).map_err(|e| OracleError::Malformed(e.to_string())),
            401 | 403 => Err(OracleError::Auth(status)),
            _ => Err(OracleError::Status { status, body: text.chars().take(500).collect() }),
        }
    }

    /// POSTs with bounded retries and exponential backoff on retryable errors.
    pub fn post(&self, path: &str, body: &Value) -> Result<(Value, Duration), OracleError> {
        let start = Instant::now();
        let mut attempt = 0;
        loop {
            match self.post_once(path, body) {
                Ok(v) => return Ok((v, start.elapsed())),
                Err(e) if e.is_retryable() && attempt < self.settings.max_retries => {
                    let wait = self.settings.backoff * 2u32.pow(attempt);
                    log::warn!("{path}: {e}; retrying in {wait:?}");
                    std::thread::sleep(wait);
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    pub fn chat(&self, prompt: &str) -> OracleResult<String> {
        let model = self
            .settings
            .chat_model
            .as_deref()
            .ok_or_else(|| OracleError::Config(format!("{ENV_CHAT_MODEL} is not set")))?;
        let body = json!({
            "model": model,
            "temperature": 0,
            "messages": [{"role": "user", "content": prompt}],
        });
        let (v, latency) = self.post("chat/completions", &body)?;
        let content = v
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| OracleError::Malformed("missing choices[0].message.content".into()))?
            .to_string();
        Ok(Metered::new(content, usage_of(&v, latency)))
    }

    pub fn embed(&self, text: &str) -> OracleResult<Vec<f64>> {
        let model = self
            .settings
            .embed_model
            .as_deref()
            .ok_or_else(|| OracleError::Config(format!("{ENV_EMBED_MODEL} is not set")))?;
        let body = json!({ "model": model, "input": text });
        let (v, latency) = self.post("embeddings", &body)?;
        let raw = v
            .pointer("/data/0/embedding")
            .and_then(Value::as_array)
            .ok_or_else(|| OracleError::Malformed("missing data[0].embedding".into()))?;
        let vector = raw
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| OracleError::Malformed("non-numeric embedding".into())))
            .collect::<Result<Vec<f64>, _>>()?;
        if vector.is_empty() {
            return Err(OracleError::Malformed("empty embedding".into()));
        }
        Ok(Metered::new(vector, usage_of(&v, latency)))
    }
}

fn usage_of(v: &Value, latency: Duration) -> Usage {
    let field = |name: &str| v.pointer(&format!("/usage/{name}")).and_then(Value::as_u64).unwrap_or(0);
    Usage { prompt_tokens: field("prompt_tokens"), completion_tokens: field("completion_tokens"), latency }
}

// ---------------------------------------------------------------------------
// Prompt templates

#[derive(Debug, Clone)]
pub struct Prompts {
    pub generate: String,
    pub validate_rel: String,
    pub validate_grd: String,
    pub validate_ans: String,
    pub judge: String,
    pub rewrite: String,
    pub extract: String,
    pub propose: String,
}

impl Default for Prompts {
    fn default() -> Self {
        Self {
            generate: include_str!("../../prompts/generate.txt").to_string(),
            validate_rel: include_str!("../../prompts/validate_rel.txt").to_string(),
            validate_grd: include_str!("../../prompts/validate_grd.txt").to_string(),
            validate_ans: include_str!("../../prompts/validate_ans.txt").to_string(),
            judge: include_str!("../../prompts/judge.txt").to_string(),
            rewrite: include_str!("../../prompts/rewrite.txt").to_string(),
            extract: include_str!("../../prompts/extract.txt").to_string(),
            propose: include_str!("../../prompts/propose.txt").to_string(),
        }
    }
}

impl Prompts {
    /// Defaults, with any `<name>.txt` present in `dir` taking precedence.
    pub fn with_overrides(dir: &Path) -> Result<Self, OracleError> {
        let mut p = Self::default();
        let slots: [(&str, &mut String); 8] = [
            ("generate", &mut p.generate),
            ("validate_rel", &mut p.validate_rel),
            ("validate_grd", &mut p.validate_grd),
            ("validate_ans", &mut p.validate_ans),
            ("judge", &mut p.judge),
            ("rewrite", &mut p.rewrite),
            ("extract", &mut p.extract),
            ("propose", &mut p.propose),
        ];
        for (name, slot) in slots {
            let path = dir.join(format!("{name}.txt"));
            if path.exists() {
                *slot = std::fs::read_to_string(&path)
                    .map_err(|e| OracleError::Config(format!("{}: {e}", path.display())))?;
            }
        }
        Ok(p)
    }
}

fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (k, v) in vars {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}

fn numbered(evidence: &[&str]) -> String {
    if evidence.is_empty() {
        return "(none)".to_string();
    }
    evidence.iter().enumerate().map(|(i, e)| format!("[{}] {}", i + 1, e)).collect::<Vec<_>>().join("\n")
}

fn parse_yes_no(text: &str) -> Result<bool, OracleError> {
    let word = text.trim().trim_start_matches(|c: char| !c.is_alphanumeric()).to_ascii_uppercase();
    if word.starts_with("YES") {
        Ok(true)
    } else if word.starts_with("NO") {
        Ok(false)
    } else {
        Err(OracleError::Malformed(format!("expected YES or NO, got {text:?}")))
    }
}

/// Pulls the first JSON value delimited by `open`/`close` out of model text.
fn json_block(text: &str, open: char, close: char) -> Result<Value, OracleError> {
    let start = text.find(open).ok_or_else(|| OracleError::Malformed(format!("no JSON in {text:?}")))?;
    let end = text.rfind(close).ok_or_else(|| OracleError::Malformed(format!("no JSON in {text:?}")))?;
    if end < start {
        return Err(OracleError::Malformed(format!("no JSON in {text:?}")));
    }
    serde_json::from_str(&text[start..=end]).map_err(|e| OracleError::Malformed(e.to_string()))
}

// ---------------------------------------------------------------------------
// Slot implementations

pub struct RemoteEmbedder {
    client: Arc<RemoteClient>,
    cache: Mutex<HashMap<String, Vec<f64>>>,
}

impl RemoteEmbedder {
    pub fn new(client: Arc<RemoteClient>) -> Self {
        Self { client, cache: Mutex::new(HashMap::new()) }
    }
}

impl TextEmbedder for RemoteEmbedder {
    fn name(&self) -> &str {
        "remote-embedder"
    }

    fn embed(&self, text: &str) -> OracleResult<Vec<f64>> {
        if let Some(v) = self.cache.lock().unwrap_or_else(|e| e.into_inner()).get(text) {
            return Ok(Metered::new(v.clone(), Usage::default()));
        }
        let mut out = self.client.embed(text)?;
        let norm = out.value.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            out.value.iter_mut().for_each(|x| *x /= norm);
        }
        self.cache
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(text.to_string(), out.value.clone());
        Ok(out)
    }
}

pub struct RemoteGenerator {
    client: Arc<RemoteClient>,
    template: String,
}

impl RemoteGenerator {
    pub fn new(client: Arc<RemoteClient>, prompts: &Prompts) -> Self {
        Self { client, template: prompts.generate.clone() }
    }
}

impl AnswerGenerator for RemoteGenerator {
    fn name(&self) -> &str {
        "remote-generator"
    }

    fn generate(&self, query: &str, evidence: &[&str]) -> OracleResult<String> {
        let ev = numbered(evidence);
        let mut out = self.client.chat(&fill(&self.template, &[("query", query), ("evidence", &ev)]))?;
        out.value = out.value.trim().to_string();
        if out.value.is_empty() {
            return Err(OracleError::EmptyOutput("generator"));
        }
        Ok(out)
    }
}

/// Which of the three checks a remote validator performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidatorKind {
    Relevance,
    Grounding,
    Resolution,
}

pub struct RemoteValidator {
    client: Arc<RemoteClient>,
    kind: ValidatorKind,
    template: String,
}

impl RemoteValidator {
    pub fn new(client: Arc<RemoteClient>, kind: ValidatorKind, prompts: &Prompts) -> Self {
        let template = match kind {
            ValidatorKind::Relevance => prompts.validate_rel.clone(),
            ValidatorKind::Grounding => prompts.validate_grd.clone(),
            ValidatorKind::Resolution => prompts.validate_ans.clone(),
        };
        Self { client, kind, template }
    }
}

impl BinaryValidator for RemoteValidator {
    fn name(&self) -> &str {
        match self.kind {
            ValidatorKind::Relevance => "remote-validator-rel",
            ValidatorKind::Grounding => "remote-validator-grd",
            ValidatorKind::Resolution => "remote-validator-ans",
        }
    }

    fn validate(&self, query: &str, answer: &str, evidence: &[&str]) -> OracleResult<bool> {
        let ev = numbered(evidence);
        let prompt = fill(&self.template, &[("query", query), ("answer", answer), ("evidence", &ev)]);
        let out = self.client.chat(&prompt)?;
        Ok(Metered::new(parse_yes_no(&out.value)?, out.usage))
    }
}

pub struct RemoteJudge {
    client: Arc<RemoteClient>,
    template: String,
}

impl RemoteJudge {
    pub fn new(client: Arc<RemoteClient>, prompts: &Prompts) -> Self {
        Self { client, template: prompts.judge.clone() }
    }
}

impl SufficiencyJudge for RemoteJudge {
    fn name(&self) -> &str {
        "remote-judge"
    }

    fn judge(&self, query: &str, evidence: &[String], stage: Stage) -> OracleResult<Sufficiency> {
        let refs: Vec<&str> = evidence.iter().map(String::as_str).collect();
        let ev = numbered(&refs);
        let prompt = fill(&self.template, &[("query", query), ("evidence", &ev), ("stage", stage.as_str())]);
        let out = self.client.chat(&prompt)?;
        let word = out.value.trim().to_ascii_uppercase();
        let verdict = if word.starts_with("SUFFICIENT") {
            Sufficiency::Sufficient
        } else if word.starts_with("ESCALATE") {
            Sufficiency::Escalate
        } else {
            return Err(OracleError::Malformed(format!("expected SUFFICIENT or ESCALATE, got {:?}", out.value)));
        };
        Ok(Metered::new(verdict, out.usage))
    }
}

pub struct RemoteRewriter {
    client: Arc<RemoteClient>,
    template: String,
}

impl RemoteRewriter {
    pub fn new(client: Arc<RemoteClient>, prompts: &Prompts) -> Self {
        Self { client, template: prompts.rewrite.clone() }
    }
}

impl QueryRewriter for RemoteRewriter {
    fn name(&self) -> &str {
        "remote-rewriter"
    }

    fn rewrite(&self, req: &RewriteRequest<'_>) -> OracleResult<String> {
        let instruction = match req.failure {
            FailureType::Rel => "Sharpen the entity and relation expressions so retrieval finds on-topic evidence.",
            FailureType::Grd => "Ask explicitly for an answer grounded strictly in the evidence.",
            FailureType::Ans => "Add the constraints implied by the question that the answer left unresolved.",
        };
        let ev = numbered(req.evidence);
        let seeds = req.seed_names.join(", ");
        let prompt = fill(
            &self.template,
            &[
                ("query", req.query),
                ("answer", req.answer),
                ("evidence", &ev),
                ("failure", req.failure.as_str()),
                ("instruction", instruction),
                ("seeds", &seeds),
            ],
        );
        let mut out = self.client.chat(&prompt)?;
        out.value = out.value.trim().to_string();
        if out.value.is_empty() {
            return Err(OracleError::EmptyOutput("rewriter"));
        }
        Ok(out)
    }
}

pub struct RemoteExtractor {
    client: Arc<RemoteClient>,
    template: String,
}

impl RemoteExtractor {
    pub fn new(client: Arc<RemoteClient>, prompts: &Prompts) -> Self {
        Self { client, template: prompts.extract.clone() }
    }
}

impl MentionExtractor for RemoteExtractor {
    fn name(&self) -> &str {
        "remote-extractor"
    }

    fn extract(&self, query: &str) -> OracleResult<Mentions> {
        let out = self.client.chat(&fill(&self.template, &[("query", query)]))?;
        let v = json_block(&out.value, '{', '}')?;
        let mentions: Mentions = serde_json::from_value(v).map_err(|e| OracleError::Malformed(e.to_string()))?;
        Ok(Metered::new(mentions, out.usage))
    }
}

pub struct RemoteProposer {
    client: Arc<RemoteClient>,
    template: String,
}

impl RemoteProposer {
    pub fn new(client: Arc<RemoteClient>, prompts: &Prompts) -> Self {
        Self { client, template: prompts.propose.clone() }
    }
}

impl TripleProposer for RemoteProposer {
    fn name(&self) -> &str {
        "remote-proposer"
    }

    fn propose(&self, chunk_text: &str) -> OracleResult<Vec<ProposedTriple>> {
        let out = self.client.chat(&fill(&self.template, &[("evidence", chunk_text)]))?;
        let v = json_block(&out.value, '[', ']')?;
        let triples: Vec<ProposedTriple> =
            serde_json::from_value(v).map_err(|e| OracleError::Malformed(e.to_string()))?;
        Ok(Metered::new(triples, out.usage))
    }
}

/// Every slot remote, sharing one client.
pub fn remote_suite(settings: RemoteSettings, prompts: &Prompts) -> OracleSuite {
    let client = Arc::new(RemoteClient::new(settings));
    OracleSuite {
        embedder: Arc::new(RemoteEmbedder::new(client.clone())),
        generator: Arc::new(RemoteGenerator::new(client.clone(), prompts)),
        validator_rel: Arc::new(RemoteValidator::new(client.clone(), ValidatorKind::Relevance, prompts)),
        validator_grd: Arc::new(RemoteValidator::new(client.clone(), ValidatorKind::Grounding, prompts)),
        validator_ans: Arc::new(RemoteValidator::new(client.clone(), ValidatorKind::Resolution, prompts)),
        judge: Arc::new(RemoteJudge::new(client.clone(), prompts)),
        rewriter: Arc::new(RemoteRewriter::new(client.clone(), prompts)),
        extractor: Arc::new(RemoteExtractor::new(client.clone(), prompts)),
        proposer: Arc::new(RemoteProposer::new(client, prompts)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_credential_is_config_error() {
        let err = RemoteSettings::from_lookup(|k| (k == ENV_API_BASE).then(|| "http://x".to_string())).unwrap_err();
        assert!(matches!(err, OracleError::Config(m) if m.contains(ENV_API_KEY)));
    }

    #[test]
    fn yes_no_parsing() {
        assert!(parse_yes_no("Yes.").unwrap());
        assert!(!parse_yes_no(" no").unwrap());
        assert!(parse_yes_no("**YES**").unwrap());
        assert!(parse_yes_no("maybe").is_err());
    }

    #[test]
    fn template_fill_leaves_literal_braces() {
        let t = "Q: {query}\n{\"entities\": []}";
        assert_eq!(fill(t, &[("query", "x")]), "Q: x\n{\"entities\": []}");
    }

    #[test]
    fn json_block_extraction() {
        let v = json_block("Sure: {\"entities\": [\"A\"], \"relations\": []} done", '{', '}').unwrap();
        assert_eq!(v["entities"][0], "A");
        assert!(json_block("nothing here", '[', ']').is_err());
    }

    #[test]
    fn prompt_overrides_replace_only_present_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("judge.txt"), "custom {query}").unwrap();
        let p = Prompts::with_overrides(dir.path()).unwrap();
        assert_eq!(p.judge, "custom {query}");
        assert_eq!(p.generate, Prompts::default().generate);
    }
}
