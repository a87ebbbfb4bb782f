//! Retriever stages and escalation on a small hand-built graph.
//!
//! ```text
//! alpha -founded_by-> beta <-advises- delta -advises-> xeno
//! alpha -sponsors->  gamma
//! ```

use std::collections::BTreeSet;
use std::sync::Arc;

use a2rag_core::cost::CostCounters;
use a2rag_core::kg::{Chunk, Corpus, EntityNode, KnowledgeGraph, RelationEdge};
use a2rag_core::oracles::mock::{mock_suite, FixedExtractor, FixedJudge, MockSettings, StageTargetJudge};
use a2rag_core::oracles::{slot, Mentions, OracleSuite, Sufficiency};
use a2rag_core::retriever::{
    ppr_scores, retrieve, stage1_local, stage2_bridge, stage3_global, top_nodes, RetrieveOptions, RetrieverConfig,
    RetrieverError, RetrieverState, Stage, Telemetry,
};
use a2rag_core::seeding::{AlignConfig, EntitySeed, RelationSeed, SeedSet};

const CHUNKS: [&str; 9] = ["ca", "cb", "cc", "cd", "cx", "e1", "e2", "e3", "e4"];

fn corpus() -> Corpus {
    Corpus::from_chunks(CHUNKS.iter().map(|c| Chunk {
        chunk_id: c.to_string(),
        doc_id: "d".into(),
        text: format!("text of {c}"),
    }))
    .unwrap()
}

fn graph() -> KnowledgeGraph {
    let n = |id: &str, name: &str, c: &str| EntityNode::new(id, name).with_provenance([c]);
    let e = |s: &str, r: &str, t: &str, c: &str| RelationEdge::new(s, r, t).with_provenance([c]);
    KnowledgeGraph::from_parts(
        vec![
            n("alpha", "Alpha", "ca"),
            n("beta", "Beta", "cb"),
            n("gamma", "Gamma", "cc"),
            n("delta", "Delta", "cd"),
            n("xeno", "Xeno", "cx"),
        ],
        vec![
            e("alpha", "founded_by", "beta", "e1"),
            e("alpha", "sponsors", "gamma", "e2"),
            e("delta", "advises", "beta", "e3"),
            e("delta", "advises", "xeno", "e4"),
        ],
        Some(&corpus()),
    )
    .unwrap()
}

fn seeds(g: &KnowledgeGraph, nodes: &[&str], relations: &[&str]) -> SeedSet {
    SeedSet {
        entity_seeds: nodes
            .iter()
            .map(|id| EntitySeed { node_id: id.to_string(), node: g.index_of(id).unwrap(), score: 1.0 })
            .collect(),
        relation_seeds: relations.iter().map(|l| RelationSeed { label: l.to_string(), score: 1.0 }).collect(),
    }
}

fn triples(state: &RetrieverState) -> Vec<(String, String, String)> {
    state.evidence.triples.iter().map(|t| (t.source.clone(), t.relation.clone(), t.target.clone())).collect()
}

fn t(s: &str, r: &str, o: &str) -> (String, String, String) {
    (s.into(), r.into(), o.into())
}

#[test]
fn local_stage_filters_by_relation_seeds() {
    let g = graph();
    let cfg = RetrieverConfig::default();
    let mut st = RetrieverState::new("q", seeds(&g, &["alpha"], &["founded_by"]));
    stage1_local(&mut st, &g, &cfg, &mut Telemetry::default()).unwrap();
    assert_eq!(triples(&st), vec![t("alpha", "founded_by", "beta")]);
    assert_eq!(st.evidence.chunk_ids(), vec!["e1"]);

    let mut st = RetrieverState::new("q", seeds(&g, &["alpha"], &[]));
    stage1_local(&mut st, &g, &cfg, &mut Telemetry::default()).unwrap();
    assert_eq!(triples(&st), vec![t("alpha", "founded_by", "beta"), t("alpha", "sponsors", "gamma")]);
    assert_eq!(st.evidence.chunk_ids(), vec!["e1", "e2"]);
    assert_eq!(st.evidence.terminated_at, Some(Stage::Local));
}

#[test]
fn local_stage_follows_inverse_edges() {
    let g = graph();
    let mut st = RetrieverState::new("q", seeds(&g, &["beta"], &[]));
    stage1_local(&mut st, &g, &RetrieverConfig::default(), &mut Telemetry::default()).unwrap();
    assert_eq!(triples(&st), vec![t("alpha", "founded_by", "beta"), t("delta", "advises", "beta")]);
}

#[test]
fn unmatched_relation_seed_empties_local_stage() {
    let g = graph();
    let mut st = RetrieverState::new("q", seeds(&g, &["gamma"], &["advises"]));
    let delta = stage1_local(&mut st, &g, &RetrieverConfig::default(), &mut Telemetry::default()).unwrap();
    assert!(delta.is_empty() && st.evidence.is_empty());
}

#[test]
fn bridge_stage_adds_connecting_paths() {
    let g = graph();
    let cfg = RetrieverConfig::default();
    let mut tel = Telemetry::default();
    let mut st = RetrieverState::new("q", seeds(&g, &["alpha", "delta"], &["sponsors"]));
    stage1_local(&mut st, &g, &cfg, &mut tel).unwrap();
    assert_eq!(triples(&st), vec![t("alpha", "sponsors", "gamma")]);
    let delta = stage2_bridge(&mut st, &g, &cfg, &mut tel).unwrap();
    let added: BTreeSet<_> = delta.triples.iter().map(|x| (x.source.clone(), x.relation.clone(), x.target.clone())).collect();
    assert_eq!(added, BTreeSet::from([t("alpha", "founded_by", "beta"), t("delta", "advises", "beta")]));
    assert!(delta.triples.iter().all(|x| x.stage == Stage::Bridge));
    assert_eq!(st.evidence.terminated_at, Some(Stage::Bridge));
    assert_eq!(tel.bridge_runs, 1);
}

#[test]
fn global_stage_maps_back_top_nodes_in_rank_order() {
    let g = graph();
    let cfg = RetrieverConfig { top_l: 3, ..Default::default() };
    let mut st = RetrieverState::new("q", seeds(&g, &["gamma"], &["advises"]));
    let mut tel = Telemetry::default();
    stage1_local(&mut st, &g, &cfg, &mut tel).unwrap();
    stage3_global(&mut st, &g, &cfg, &mut tel).unwrap();
    let run = ppr_scores(&g, &[g.index_of("gamma").unwrap()], &cfg, &mut Telemetry::default()).unwrap();
    let want: Vec<String> = top_nodes(&run.scores, 3).into_iter().flat_map(|u| g.node(u).provenance.clone()).collect();
    assert_eq!(st.evidence.chunk_ids(), want);
    assert_eq!(want.len(), 3);
    assert!(want.iter().any(|c| c == "cc"));
    assert!(st.evidence.chunks.iter().all(|c| c.stage == Stage::Global));
    assert_eq!((tel.global_runs, tel.ppr_runs), (1, 1));
}

#[test]
fn stages_run_once_in_order() {
    let g = graph();
    let cfg = RetrieverConfig::default();
    let mut tel = Telemetry::default();
    let mut st = RetrieverState::new("q", seeds(&g, &["alpha", "delta"], &[]));
    let order = |r: Result<_, RetrieverError>| matches!(r, Err(RetrieverError::StageOrder { .. }));
    assert!(order(stage2_bridge(&mut st, &g, &cfg, &mut tel)));
    assert!(order(stage3_global(&mut st, &g, &cfg, &mut tel)));
    stage1_local(&mut st, &g, &cfg, &mut tel).unwrap();
    assert!(order(stage1_local(&mut st, &g, &cfg, &mut tel)));
    stage3_global(&mut st, &g, &cfg, &mut tel).unwrap();
    assert!(order(stage2_bridge(&mut st, &g, &cfg, &mut tel)));
    assert!(order(stage3_global(&mut st, &g, &cfg, &mut tel)));
}

fn suite(g: &KnowledgeGraph, entities: &[&str], relations: &[&str]) -> OracleSuite {
    let mut s = mock_suite(g, &MockSettings::default());
    s.extractor = Arc::new(FixedExtractor(Mentions {
        entities: entities.iter().map(|x| x.to_string()).collect(),
        relations: relations.iter().map(|x| x.to_string()).collect(),
    }));
    s
}

fn run(oracles: &OracleSuite, opts: RetrieveOptions) -> (a2rag_core::retriever::Retrieval, Telemetry, CostCounters) {
    let g = graph();
    let (mut cost, mut tel) = (CostCounters::default(), Telemetry::default());
    let r = retrieve(
        "q",
        &g,
        &corpus(),
        oracles,
        &AlignConfig::default(),
        &RetrieverConfig::default(),
        opts,
        &mut cost,
        &mut tel,
    )
    .unwrap();
    (r, tel, cost)
}

#[test]
fn sufficient_local_skips_later_stages() {
    let mut o = suite(&graph(), &["Alpha", "Delta"], &[]);
    o.judge = Arc::new(FixedJudge(Sufficiency::Sufficient));
    let (r, tel, cost) = run(&o, RetrieveOptions::default());
    assert_eq!(r.evidence.terminated_at, Some(Stage::Local));
    assert!(r.evidence.sufficient);
    assert_eq!((tel.local_runs, tel.bridge_runs, tel.global_runs), (1, 0, 0));
    assert_eq!((tel.khop_calls, tel.bfs_expansions, tel.ppr_runs, tel.ppr_iterations), (0, 0, 0, 0));
    assert_eq!(cost.calls(slot::JUDGE), 1);
}

#[test]
fn escalation_visits_every_stage_once() {
    let mut o = suite(&graph(), &["Alpha", "Delta"], &[]);
    o.judge = Arc::new(FixedJudge(Sufficiency::Escalate));
    let (r, tel, cost) = run(&o, RetrieveOptions::default());
    assert_eq!(r.evidence.terminated_at, Some(Stage::Global));
    assert!(!r.evidence.sufficient);
    assert_eq!((tel.local_runs, tel.bridge_runs, tel.global_runs), (1, 1, 1));
    assert_eq!(cost.calls(slot::JUDGE), 3);
}

#[test]
fn single_seed_skips_bridge() {
    let mut o = suite(&graph(), &["Alpha"], &[]);
    o.judge = Arc::new(FixedJudge(Sufficiency::Escalate));
    let (r, tel, cost) = run(&o, RetrieveOptions::default());
    assert_eq!(r.evidence.terminated_at, Some(Stage::Global));
    assert_eq!((tel.local_runs, tel.bridge_runs, tel.global_runs, tel.khop_calls), (1, 0, 1, 0));
    assert_eq!(cost.calls(slot::JUDGE), 2);
}

#[test]
fn bridge_target_stops_before_global() {
    let mut o = suite(&graph(), &["Alpha", "Delta"], &[]);
    o.judge = Arc::new(StageTargetJudge::new(Some(Stage::Bridge)));
    let (r, tel, _) = run(&o, RetrieveOptions::default());
    assert_eq!(r.evidence.terminated_at, Some(Stage::Bridge));
    assert!(r.evidence.sufficient);
    assert_eq!((tel.global_runs, tel.ppr_runs), (0, 0));
}

#[test]
fn graph_only_and_ablation_options() {
    let mut o = suite(&graph(), &["Alpha"], &["founded by"]);
    o.judge = Arc::new(FixedJudge(Sufficiency::Escalate));
    let graph_only = RetrieveOptions { global_stage: false, ..Default::default() };
    let (r, tel, _) = run(&o, graph_only);
    assert_eq!(r.evidence.terminated_at, Some(Stage::Local));
    assert_eq!(tel.global_runs, 0);
    assert!(r.seeds.has_relation("founded_by"));
    assert_eq!(r.evidence.triples.len(), 1);

    let ablated = RetrieveOptions { relation_seeds: false, global_stage: false };
    let (r, _, _) = run(&o, ablated);
    assert!(r.seeds.relation_seeds.is_empty());
    assert_eq!(r.evidence.triples.len(), 2);
}

#[test]
fn no_seeds_gives_empty_evidence() {
    let mut o = suite(&graph(), &["Nobody Known"], &[]);
    o.judge = Arc::new(FixedJudge(Sufficiency::Escalate));
    let (r, tel, _) = run(&o, RetrieveOptions::default());
    assert!(r.seeds.entity_seeds.is_empty());
    assert!(r.evidence.is_empty());
    assert_eq!(tel.ppr_runs, 0);
}

#[test]
fn max_triples_caps_evidence() {
    let g = graph();
    let cfg = RetrieverConfig { max_triples: 1, ..Default::default() };
    let mut st = RetrieverState::new("q", seeds(&g, &["beta"], &[]));
    stage1_local(&mut st, &g, &cfg, &mut Telemetry::default()).unwrap();
    assert_eq!(st.evidence.triples.len(), 1);
}
