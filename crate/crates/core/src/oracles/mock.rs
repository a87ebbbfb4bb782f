//! Deterministic in-process oracles.
//!
//! These make the whole pipeline runnable offline. They are keyword and hash
//! based, so they are fast, pure and reproducible, and they report synthetic
//! token counts (whitespace tokens of inputs and outputs) plus a synthetic
//! latency derived from those counts.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;
use std::time::Duration;

use crate::controller::FailureType;
use crate::kg::KnowledgeGraph;
use crate::retriever::Stage;
use crate::text::{content_words, relation_surface, sentences, tokens};

use super::{
    AnswerGenerator, BinaryValidator, Mentions, Metered, MentionExtractor, OracleError, OracleResult, OracleSuite,
    ProposedTriple, QueryRewriter, RewriteRequest, Sufficiency, SufficiencyJudge, TextEmbedder, TripleProposer,
};

/// Answer the generator gives when no evidence sentence overlaps the query.
pub const UNKNOWN_ANSWER: &str = "UNKNOWN";

/// Suffix the template rewriter appends after a grounding failure.
pub const GROUNDING_DIRECTIVE: &str = "[answer strictly from the cited evidence]";

const CALL_OVERHEAD: Duration = Duration::from_millis(2);
const PER_TOKEN: Duration = Duration::from_micros(20);

fn word_count(texts: &[&str]) -> u64 {
    texts.iter().map(|t| t.split_whitespace().count() as u64).sum()
}

/// Synthetic usage for a call that read `inputs` and wrote `outputs`.
pub fn synthetic_usage(inputs: &[&str], outputs: &[&str]) -> super::Usage {
    let prompt_tokens = word_count(inputs);
    let completion_tokens = word_count(outputs);
    super::Usage {
        prompt_tokens,
        completion_tokens,
        latency: CALL_OVERHEAD + PER_TOKEN * (prompt_tokens + completion_tokens) as u32,
    }
}

// ---------------------------------------------------------------------------
// Embedder

/// Feature-hashed bag of content words, L2-normalized.
///
/// Texts sharing content words get positive cosine, so similarity tracks
/// lexical overlap. Text with no content words hashes as a whole into one
/// bucket. Exact vectors can be pinned for chosen strings.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
    pins: HashMap<String, Vec<f64>>,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 2, "embedding dimension must be at least 2");
        Self { dim, pins: HashMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Forces `embed(text)` to return `vector` (normalized).
    pub fn pin(&mut self, text: impl Into<String>, vector: Vec<f64>) -> &mut Self {
        assert_eq!(vector.len(), self.dim, "pinned vector has wrong dimension");
        self.pins.insert(text.into(), normalized(vector));
        self
    }

    pub fn with_pin(mut self, text: impl Into<String>, vector: Vec<f64>) -> Self {
        self.pin(text, vector);
        self
    }

    fn hashed(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        let words = content_words(text);
        if words.is_empty() {
            let h = crate::text::fnv1a(text.to_lowercase().as_bytes());
            v[(h % self.dim as u64) as usize] = 1.0;
            return v;
        }
        for w in &words {
            let h = crate::text::fnv1a(w.as_bytes());
            let bucket = (h % self.dim as u64) as usize;
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            v[bucket] += sign;
        }
        if v.iter().all(|x| *x == 0.0) {
            // Colliding words cancelled out.
            v[0] = 1.0;
        }
        normalized(v)
    }
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

impl TextEmbedder for HashEmbedder {
    fn name(&self) -> &str {
        "mock-hash-embedder"
    }

    fn embed(&self, text: &str) -> OracleResult<Vec<f64>> {
        let v = self.pins.get(text).cloned().unwrap_or_else(|| self.hashed(text));
        Ok(Metered::new(v, synthetic_usage(&[text], &[])))
    }
}

// ---------------------------------------------------------------------------
// Generator

/// Returns the evidence sentence sharing the most content words with the query.
#[derive(Debug, Clone, Default)]
pub struct ExtractiveGenerator;

impl AnswerGenerator for ExtractiveGenerator {
    fn name(&self) -> &str {
        "mock-extractive-generator"
    }

    fn generate(&self, query: &str, evidence: &[&str]) -> OracleResult<String> {
        let q = content_words(query);
        let mut best: Option<(usize, String)> = None;
        for chunk in evidence {
            for s in sentences(chunk) {
                let overlap = content_words(&s).intersection(&q).count();
                if overlap > 0 && best.as_ref().is_none_or(|(b, _)| overlap > *b) {
                    best = Some((overlap, s));
                }
            }
        }
        let answer = best.map(|(_, s)| s).unwrap_or_else(|| UNKNOWN_ANSWER.to_string());
        let mut inputs = vec![query];
        inputs.extend_from_slice(evidence);
        let usage = synthetic_usage(&inputs, &[&answer]);
        Ok(Metered::new(answer, usage))
    }
}

// ---------------------------------------------------------------------------
// Validators

fn evidence_words(evidence: &[&str]) -> BTreeSet<String> {
    evidence.iter().flat_map(|e| content_words(e)).collect()
}

/// Relevance: the evidence shares at least one content word with the query.
#[derive(Debug, Clone, Default)]
pub struct KeywordRelevance;

impl BinaryValidator for KeywordRelevance {
    fn name(&self) -> &str {
        "mock-keyword-relevance"
    }

    fn validate(&self, query: &str, _answer: &str, evidence: &[&str]) -> OracleResult<bool> {
        let ev = evidence_words(evidence);
        let ok = content_words(query).iter().any(|w| ev.contains(w));
        let mut inputs = vec![query];
        inputs.extend_from_slice(evidence);
        Ok(Metered::new(ok, synthetic_usage(&inputs, &["yes"])))
    }
}

/// Groundedness: every content word of the answer appears in the evidence.
#[derive(Debug, Clone, Default)]
pub struct KeywordGrounding;

impl BinaryValidator for KeywordGrounding {
    fn name(&self) -> &str {
        "mock-keyword-grounding"
    }

    fn validate(&self, _query: &str, answer: &str, evidence: &[&str]) -> OracleResult<bool> {
        let ev = evidence_words(evidence);
        let words = content_words(answer);
        let ok = !words.is_empty() && words.iter().all(|w| ev.contains(w));
        let mut inputs = vec![answer];
        inputs.extend_from_slice(evidence);
        Ok(Metered::new(ok, synthetic_usage(&inputs, &["yes"])))
    }
}

/// Resolution: the answer is non-empty and not the unknown marker.
#[derive(Debug, Clone, Default)]
pub struct AnswerResolution;

impl BinaryValidator for AnswerResolution {
    fn name(&self) -> &str {
        "mock-answer-resolution"
    }

    fn validate(&self, query: &str, answer: &str, _evidence: &[&str]) -> OracleResult<bool> {
        let a = answer.trim();
        let ok = !a.is_empty() && !a.eq_ignore_ascii_case(UNKNOWN_ANSWER);
        Ok(Metered::new(ok, synthetic_usage(&[query, answer], &["yes"])))
    }
}

/// The relevance, groundedness and resolution keyword validators.
pub fn keyword_validators() -> [Arc<dyn BinaryValidator>; 3] {
    [Arc::new(KeywordRelevance), Arc::new(KeywordGrounding), Arc::new(AnswerResolution)]
}

/// Always returns the same verdict.
#[derive(Debug, Clone)]
pub struct FixedValidator(pub bool);

impl BinaryValidator for FixedValidator {
    fn name(&self) -> &str {
        if self.0 {
            "fixed-accept"
        } else {
            "fixed-reject"
        }
    }

    fn validate(&self, query: &str, answer: &str, _evidence: &[&str]) -> OracleResult<bool> {
        Ok(Metered::new(self.0, synthetic_usage(&[query, answer], &["yes"])))
    }
}

// ---------------------------------------------------------------------------
// Sufficiency judges

/// Sufficient once the evidence covers at least `min_coverage` of the query's
/// content words.
#[derive(Debug, Clone)]
pub struct CoverageJudge {
    pub min_coverage: f64,
}

impl Default for CoverageJudge {
    fn default() -> Self {
        Self { min_coverage: 1.0 }
    }
}

impl SufficiencyJudge for CoverageJudge {
    fn name(&self) -> &str {
        "mock-coverage-judge"
    }

    fn judge(&self, query: &str, evidence: &[String], _stage: Stage) -> OracleResult<Sufficiency> {
        let refs: Vec<&str> = evidence.iter().map(String::as_str).collect();
        let ev = evidence_words(&refs);
        let q = content_words(query);
        let sufficient = if q.is_empty() {
            !ev.is_empty()
        } else {
            let covered = q.iter().filter(|w| ev.contains(*w)).count();
            covered as f64 / q.len() as f64 >= self.min_coverage
        };
        let verdict = if sufficient { Sufficiency::Sufficient } else { Sufficiency::Escalate };
        let mut inputs = vec![query];
        inputs.extend_from_slice(&refs);
        Ok(Metered::new(verdict, synthetic_usage(&inputs, &["ok"])))
    }
}

#[derive(Debug, Clone)]
pub struct FixedJudge(pub Sufficiency);

impl SufficiencyJudge for FixedJudge {
    fn name(&self) -> &str {
        match self.0 {
            Sufficiency::Sufficient => "fixed-sufficient",
            Sufficiency::Escalate => "fixed-escalate",
        }
    }

    fn judge(&self, query: &str, _evidence: &[String], _stage: Stage) -> OracleResult<Sufficiency> {
        Ok(Metered::new(self.0, synthetic_usage(&[query], &["ok"])))
    }
}

/// Accepts once retrieval reaches a per-query target stage. Queries without
/// a target use `default`; `None` never accepts.
#[derive(Debug, Clone, Default)]
pub struct StageTargetJudge {
    targets: HashMap<String, Stage>,
    default: Option<Stage>,
}

impl StageTargetJudge {
    pub fn new(default: Option<Stage>) -> Self {
        Self { targets: HashMap::new(), default }
    }

    pub fn target(mut self, query: impl Into<String>, stage: Stage) -> Self {
        self.targets.insert(query.into(), stage);
        self
    }
}

impl SufficiencyJudge for StageTargetJudge {
    fn name(&self) -> &str {
        "scripted-stage-judge"
    }

    fn judge(&self, query: &str, _evidence: &[String], stage: Stage) -> OracleResult<Sufficiency> {
        let target = self.targets.get(query).copied().or(self.default);
        let verdict = match target {
            Some(t) if stage >= t => Sufficiency::Sufficient,
            _ => Sufficiency::Escalate,
        };
        Ok(Metered::new(verdict, synthetic_usage(&[query], &["ok"])))
    }
}

// ---------------------------------------------------------------------------
// Rewriter

/// Type-conditioned template rewrites:
/// - relevance failure: name the aligned entities explicitly;
/// - grounding failure: append [`GROUNDING_DIRECTIVE`];
/// - resolution failure: spell out the query terms the answer left open.
#[derive(Debug, Clone, Default)]
pub struct TemplateRewriter;

impl QueryRewriter for TemplateRewriter {
    fn name(&self) -> &str {
        "mock-template-rewriter"
    }

    fn rewrite(&self, req: &RewriteRequest<'_>) -> OracleResult<String> {
        let q = req.query.trim_end();
        let out = match req.failure {
            FailureType::Rel => {
                if req.seed_names.is_empty() {
                    format!("{q} (entity: unspecified)")
                } else {
                    format!("{q} (entity: {})", req.seed_names.join(", "))
                }
            }
            FailureType::Grd => format!("{q} {GROUNDING_DIRECTIVE}"),
            FailureType::Ans => {
                let answered = content_words(req.answer);
                let open: Vec<String> =
                    content_words(q).into_iter().filter(|w| !answered.contains(w)).collect();
                if open.is_empty() {
                    format!("{q} (give a complete answer)")
                } else {
                    format!("{q} (must address: {})", open.join(", "))
                }
            }
        };
        if out.trim().is_empty() {
            return Err(OracleError::EmptyOutput("rewriter"));
        }
        let usage = synthetic_usage(&[req.query, req.answer], &[&out]);
        Ok(Metered::new(out, usage))
    }
}

// ---------------------------------------------------------------------------
// Phrase matching shared by the extractor and the proposer.

/// Case-insensitive whole-token phrase matcher, longest match first.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    /// (phrase tokens, value), sorted longest first then lexicographically.
    phrases: Vec<(Vec<String>, String)>,
}

impl Gazetteer {
    pub fn new<I: IntoIterator<Item = (String, String)>>(entries: I) -> Self {
        let mut phrases: Vec<(Vec<String>, String)> = entries
            .into_iter()
            .map(|(surface, value)| (tokens(&surface), value))
            .filter(|(t, _)| !t.is_empty())
            .collect();
        phrases.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.cmp(b)));
        phrases.dedup_by(|a, b| a.0 == b.0);
        Self { phrases }
    }

    /// Non-overlapping matches `(start, end, value)` in token order. Spans in
    /// `blocked` are skipped.
    pub fn find(&self, toks: &[String], blocked: &[(usize, usize)]) -> Vec<(usize, usize, String)> {
        let mut taken = vec![false; toks.len()];
        for &(s, e) in blocked {
            taken[s..e].iter_mut().for_each(|t| *t = true);
        }
        let mut hits = Vec::new();
        for (phrase, value) in &self.phrases {
            let n = phrase.len();
            if n > toks.len() {
                continue;
            }
            for start in 0..=toks.len() - n {
                if taken[start..start + n].iter().any(|t| *t) {
                    continue;
                }
                if toks[start..start + n] == phrase[..] {
                    taken[start..start + n].iter_mut().for_each(|t| *t = true);
                    hits.push((start, start + n, value.clone()));
                }
            }
        }
        hits.sort();
        hits
    }
}

/// Finds known entity names/aliases and relation phrases in the query.
/// Entity mentions are reported in the matched surface form.
#[derive(Debug, Clone, Default)]
pub struct GazetteerExtractor {
    entities: Gazetteer,
    relations: Gazetteer,
}

impl GazetteerExtractor {
    pub fn new(entity_surfaces: Vec<String>, relation_surfaces: Vec<String>) -> Self {
        Self {
            entities: Gazetteer::new(entity_surfaces.into_iter().map(|s| (s.clone(), s))),
            relations: Gazetteer::new(relation_surfaces.into_iter().map(|s| (s.clone(), s))),
        }
    }

    /// Uses every canonical name, alias and relation label of `graph`.
    pub fn from_graph(graph: &KnowledgeGraph) -> Self {
        let entities = graph
            .nodes()
            .iter()
            .flat_map(|n| n.surface_forms().map(str::to_string).collect::<Vec<_>>())
            .collect();
        let relations = graph.relation_labels().iter().map(|l| relation_surface(l)).collect();
        Self::new(entities, relations)
    }
}

impl MentionExtractor for GazetteerExtractor {
    fn name(&self) -> &str {
        "mock-gazetteer-extractor"
    }

    fn extract(&self, query: &str) -> OracleResult<Mentions> {
        let toks = tokens(query);
        let ents = self.entities.find(&toks, &[]);
        let spans: Vec<(usize, usize)> = ents.iter().map(|(s, e, _)| (*s, *e)).collect();
        let rels = self.relations.find(&toks, &spans);
        let mentions = Mentions {
            entities: ents.into_iter().map(|(_, _, v)| v).collect(),
            relations: rels.into_iter().map(|(_, _, v)| v).collect(),
        };
        let out = format!("{} {}", mentions.entities.join(" "), mentions.relations.join(" "));
        Ok(Metered::new(mentions, synthetic_usage(&[query], &[&out])))
    }
}

/// Returns the same mentions for every query.
#[derive(Debug, Clone, Default)]
pub struct FixedExtractor(pub Mentions);

impl MentionExtractor for FixedExtractor {
    fn name(&self) -> &str {
        "fixed-extractor"
    }

    fn extract(&self, query: &str) -> OracleResult<Mentions> {
        Ok(Metered::new(self.0.clone(), synthetic_usage(&[query], &[])))
    }
}

// ---------------------------------------------------------------------------
// Triple proposer

/// Proposes `(subject, relation, object)` when a known relation phrase sits
/// between two known entity mentions in one sentence. Triples already in the
/// graph are not proposed. Subjects and objects are node ids.
#[derive(Debug, Clone, Default)]
pub struct CooccurrenceProposer {
    entities: Gazetteer,
    relations: Gazetteer,
    known: BTreeSet<(String, String, String)>,
}

impl CooccurrenceProposer {
    pub fn from_graph(graph: &KnowledgeGraph) -> Self {
        let entities = Gazetteer::new(graph.nodes().iter().flat_map(|n| {
            n.surface_forms().map(|s| (s.to_string(), n.node_id.clone())).collect::<Vec<_>>()
        }));
        let relations = Gazetteer::new(graph.relation_labels().iter().map(|l| (relation_surface(l), l.clone())));
        let known = graph
            .edges()
            .iter()
            .map(|e| (e.source.clone(), e.relation.clone(), e.target.clone()))
            .collect();
        Self { entities, relations, known }
    }
}

impl TripleProposer for CooccurrenceProposer {
    fn name(&self) -> &str {
        "mock-cooccurrence-proposer"
    }

    fn propose(&self, chunk_text: &str) -> OracleResult<Vec<ProposedTriple>> {
        let mut out = BTreeSet::new();
        for sentence in sentences(chunk_text) {
            let toks = tokens(&sentence);
            let ents = self.entities.find(&toks, &[]);
            let spans: Vec<(usize, usize)> = ents.iter().map(|(s, e, _)| (*s, *e)).collect();
            for (rs, re, label) in self.relations.find(&toks, &spans) {
                let subject = ents.iter().rev().find(|(_, e, _)| *e <= rs);
                let object = ents.iter().find(|(s, _, _)| *s >= re);
                if let (Some((_, _, s)), Some((_, _, o))) = (subject, object) {
                    let key = (s.clone(), label.clone(), o.clone());
                    if s != o && !self.known.contains(&key) {
                        out.insert(ProposedTriple { subject: key.0, relation: key.1, object: key.2 });
                    }
                }
            }
        }
        let triples: Vec<ProposedTriple> = out.into_iter().collect();
        Ok(Metered::new(triples, synthetic_usage(&[chunk_text], &[])))
    }
}

/// Emits a fixed triple list for any chunk.
#[derive(Debug, Clone, Default)]
pub struct FixedProposer(pub Vec<ProposedTriple>);

impl TripleProposer for FixedProposer {
    fn name(&self) -> &str {
        "fixed-proposer"
    }

    fn propose(&self, chunk_text: &str) -> OracleResult<Vec<ProposedTriple>> {
        Ok(Metered::new(self.0.clone(), synthetic_usage(&[chunk_text], &[])))
    }
}

// ---------------------------------------------------------------------------

/// Knobs of the all-mock suite.
#[derive(Debug, Clone)]
pub struct MockSettings {
    pub embedding_dim: usize,
    pub judge_min_coverage: f64,
}

impl Default for MockSettings {
    fn default() -> Self {
        Self { embedding_dim: 256, judge_min_coverage: 1.0 }
    }
}

/// The all-mock suite, with gazetteers built from `graph`.
pub fn mock_suite(graph: &KnowledgeGraph, settings: &MockSettings) -> OracleSuite {
    let [rel, grd, ans] = keyword_validators();
    OracleSuite {
        embedder: Arc::new(HashEmbedder::new(settings.embedding_dim)),
        generator: Arc::new(ExtractiveGenerator),
        validator_rel: rel,
        validator_grd: grd,
        validator_ans: ans,
        judge: Arc::new(CoverageJudge { min_coverage: settings.judge_min_coverage }),
        rewriter: Arc::new(TemplateRewriter),
        extractor: Arc::new(GazetteerExtractor::from_graph(graph)),
        proposer: Arc::new(CooccurrenceProposer::from_graph(graph)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{EntityNode, RelationEdge};
    use crate::oracles::clipped_cosine;

    fn emb(e: &HashEmbedder, t: &str) -> Vec<f64> {
        e.embed(t).unwrap().value
    }

    #[test]
    fn embedder_is_deterministic_and_unit_norm() {
        let e = HashEmbedder::new(64);
        let a = emb(&e, "x");
        assert_eq!(a, emb(&e, "x"));
        let norm: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        let b = emb(&e, "the of");
        assert!((b.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pinned_vectors() {
        let e = HashEmbedder::new(4)
            .with_pin("q", vec![1.0, 0.0, 0.0, 0.0])
            .with_pin("same", vec![3.0, 0.0, 0.0, 0.0])
            .with_pin("orth", vec![0.0, 1.0, 0.0, 0.0]);
        assert!((clipped_cosine(&emb(&e, "q"), &emb(&e, "same")) - 1.0).abs() < 1e-12);
        assert_eq!(clipped_cosine(&emb(&e, "q"), &emb(&e, "orth")), 0.0);
    }

    #[test]
    fn shared_words_raise_cosine() {
        let e = HashEmbedder::new(256);
        let near = clipped_cosine(&emb(&e, "Acme headquarters Oslo"), &emb(&e, "Oslo headquarters"));
        let far = clipped_cosine(&emb(&e, "Acme headquarters Oslo"), &emb(&e, "violin concerto"));
        assert!(near > 0.5, "{near}");
        assert!(near > far);
    }

    #[test]
    fn generator_picks_best_sentence() {
        let g = ExtractiveGenerator;
        let ev = ["Acme was founded in 1990. Acme headquarters are in Oslo.", "Bob likes tea."];
        let a = g.generate("Where are the Acme headquarters?", &ev).unwrap().value;
        assert_eq!(a, "Acme headquarters are in Oslo.");
        assert_eq!(g.generate("zebra", &ev).unwrap().value, UNKNOWN_ANSWER);
        assert_eq!(g.generate("zebra", &[]).unwrap().value, UNKNOWN_ANSWER);
    }

    #[test]
    fn keyword_validator_examples() {
        let ev = ["Acme headquarters are in Oslo."];
        assert!(KeywordGrounding.validate("q", "Acme headquarters are in Oslo.", &ev).unwrap().value);
        assert!(!KeywordGrounding.validate("q", "Acme is in Paris", &ev).unwrap().value);
        assert!(!KeywordRelevance.validate("violin concerto", "a", &ev).unwrap().value);
        assert!(KeywordRelevance.validate("where is acme", "a", &ev).unwrap().value);
        assert!(!AnswerResolution.validate("q", "UNKNOWN", &ev).unwrap().value);
        assert!(!AnswerResolution.validate("q", "  ", &ev).unwrap().value);
        assert!(AnswerResolution.validate("q", "Oslo", &ev).unwrap().value);
    }

    #[test]
    fn coverage_judge_threshold() {
        let j = CoverageJudge { min_coverage: 1.0 };
        let ev = vec!["Acme founded 1990".to_string()];
        assert_eq!(j.judge("acme founded", &ev, Stage::Local).unwrap().value, Sufficiency::Sufficient);
        assert_eq!(j.judge("acme headquarters", &ev, Stage::Local).unwrap().value, Sufficiency::Escalate);
        let half = CoverageJudge { min_coverage: 0.5 };
        assert_eq!(half.judge("acme headquarters", &ev, Stage::Local).unwrap().value, Sufficiency::Sufficient);
    }

    #[test]
    fn stage_target_judge() {
        let j = StageTargetJudge::new(None).target("q1", Stage::Bridge);
        assert_eq!(j.judge("q1", &[], Stage::Local).unwrap().value, Sufficiency::Escalate);
        assert_eq!(j.judge("q1", &[], Stage::Bridge).unwrap().value, Sufficiency::Sufficient);
        assert_eq!(j.judge("other", &[], Stage::Global).unwrap().value, Sufficiency::Escalate);
    }

    fn req<'a>(q: &'a str, t: FailureType, seeds: &'a [String]) -> RewriteRequest<'a> {
        RewriteRequest { query: q, answer: "Acme", evidence: &[], failure: t, seed_names: seeds }
    }

    #[test]
    fn rewriter_templates() {
        let seeds = vec!["X Corp".to_string()];
        let r = TemplateRewriter;
        assert_eq!(r.rewrite(&req("who owns X", FailureType::Rel, &seeds)).unwrap().value, "who owns X (entity: X Corp)");
        assert_eq!(
            r.rewrite(&req("who owns X", FailureType::Rel, &seeds)).unwrap().value,
            r.rewrite(&req("who owns X", FailureType::Rel, &seeds)).unwrap().value
        );
        assert!(r.rewrite(&req("who owns X", FailureType::Grd, &seeds)).unwrap().value.contains(GROUNDING_DIRECTIVE));
        let ans = r.rewrite(&req("who owns X", FailureType::Ans, &seeds)).unwrap().value;
        assert_eq!(ans, "who owns X (must address: owns, x)");
    }

    fn tiny_graph() -> KnowledgeGraph {
        let nodes = vec![
            EntityNode::new("cfh", "CFH").with_aliases(["CFH Clearing", "[GUI] CFH"]),
            EntityNode::new("bank_a", "Bank A"),
            EntityNode::new("region_x", "Region X"),
        ];
        let edges = vec![RelationEdge::new("bank_a", "operates_in", "region_x")];
        KnowledgeGraph::from_parts(nodes, edges, None).unwrap()
    }

    #[test]
    fn gazetteer_prefers_longest_match() {
        let x = GazetteerExtractor::from_graph(&tiny_graph());
        let m = x.extract("Does Bank A use CFH Clearing? Bank A operates in Region X").unwrap().value;
        assert_eq!(m.entities, vec!["Bank A", "CFH Clearing", "Bank A", "Region X"]);
        assert_eq!(m.relations, vec!["operates in"]);
    }

    #[test]
    fn proposer_finds_new_triples_only() {
        let p = CooccurrenceProposer::from_graph(&tiny_graph());
        let t = p.propose("CFH operates in Region X. Bank A operates in Region X.").unwrap().value;
        assert_eq!(
            t,
            vec![ProposedTriple { subject: "cfh".into(), relation: "operates_in".into(), object: "region_x".into() }]
        );
    }
}
