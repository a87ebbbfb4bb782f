#!/usr/bin/env python3
"""Regenerates the JSON-lines fixtures under fixtures/.

fixtures/stress: 20 people, 20 companies (40 nodes) and 60 chunks. Each
question names a person and asks for a figure reported by that person's
employer. The figure lives in a detail chunk that no edge cites; only the
provenance of the person node reaches it.

fixtures/demo: a small graph where each company has several sponsorship
edges whose neighbours sort before its founder, plus two advisors sharing
a client, for CLI tests and the relation-seed ablation.

Usage: python3 scripts/make_fixtures.py
"""

import json
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent / "fixtures"

FIRST = [
    "Alice", "Bruno", "Chiara", "Dmitri", "Elena", "Farid", "Greta", "Hiro", "Ines", "Jonas",
    "Kenji", "Leila", "Marco", "Nadia", "Oskar", "Priya", "Quentin", "Rosa", "Stefan", "Tamsin",
]
LAST = [
    "Adams", "Bauer", "Conti", "Dvorak", "Esposito", "Farouk", "Gunnarsson", "Hayashi", "Ibarra",
    "Jansen", "Kimura", "Lahiri", "Moretti", "Novak", "Olsen", "Patel", "Quist", "Romero",
    "Schulz", "Thorne",
]
COMPANY = [
    "Acme", "Borealis", "Cobalt", "Dynamo", "Ember", "Fjord", "Granite", "Halcyon", "Iris",
    "Juniper", "Kestrel", "Lumen", "Meridian", "Nimbus", "Onyx", "Pinnacle", "Quasar", "Redwood",
    "Sierra", "Tundra",
]


def write_jsonl(path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")


def write_config(path, extra=None):
    cfg = {
        "paths": {
            "corpus": "corpus.jsonl",
            "summaries": "summaries.jsonl",
            "graph": "graph.jsonl",
            "dataset": "qa.jsonl",
        },
        "oracles": {"default": "mock"},
    }
    if extra:
        cfg.update(extra)
    path.write_text(json.dumps(cfg, indent=2) + "\n", encoding="utf-8")


def stress():
    out = ROOT / "stress"
    chunks, summaries, nodes, edges, qa = [], [], [], [], []
    for i in range(20):
        person = f"{FIRST[i]} {LAST[i]}"
        company = f"{COMPANY[i]} Corp"
        pid, cid = f"p{i:02d}", f"x{i:02d}"
        doc = f"doc{i:02d}"
        e, d, n = f"c{i:02d}_edge", f"c{i:02d}_detail", f"c{i:02d}_noise"
        revenue = 10 + 3 * i
        chunks += [
            {"chunk_id": e, "doc_id": doc, "text": f"{person} works at {company}."},
            {
                "chunk_id": d,
                "doc_id": doc,
                "text": f"{company}, where {person} works, reported revenue of {revenue} million.",
            },
            {
                "chunk_id": n,
                "doc_id": doc,
                "text": f"A novel about a clerk named {person} reported on revenue fraud at an unnamed employer.",
            },
        ]
        summaries.append({"doc_id": doc, "summary": f"{person}, employer {company}, reported revenue."})
        nodes.append({"type": "node", "node_id": pid, "name": person, "aliases": [], "chunks": [e, d]})
        nodes.append({"type": "node", "node_id": cid, "name": company, "aliases": [], "chunks": [e, d]})
        edges.append({"type": "edge", "source": pid, "relation": "works_at", "target": cid, "chunks": [e]})
        qa.append(
            {
                "question": f"What revenue was reported by the employer of {person}?",
                "answers": [f"{revenue} million"],
                "gold_chunks": [e, d],
                "tag": "multi-hop",
            }
        )
    for i in range(19):
        edges.append(
            {"type": "edge", "source": f"x{i:02d}", "relation": "partners_with", "target": f"x{i + 1:02d}", "chunks": []}
        )
    write_jsonl(out / "corpus.jsonl", chunks)
    write_jsonl(out / "summaries.jsonl", summaries)
    write_jsonl(out / "graph.jsonl", nodes + edges)
    write_jsonl(out / "qa.jsonl", qa)
    write_config(out / "config.json")
    assert len(chunks) == 60 and len(nodes) == 40


def demo():
    out = ROOT / "demo"
    chunks = [
        {"chunk_id": "xeno_founder", "doc_id": "xeno",
         "text": "Xeno Labs was founded by Yara Quinn in 2011. Yara Quinn advises Orbit Labs."},
        {"chunk_id": "xeno_s1", "doc_id": "xeno", "text": "Xeno Labs sponsors the Alpha Fund for young chemists."},
        {"chunk_id": "xeno_s2", "doc_id": "xeno", "text": "Xeno Labs sponsors the Beta Cup sailing race."},
        {"chunk_id": "xeno_s3", "doc_id": "xeno", "text": "Xeno Labs sponsors the Gamma Prize. Helio Corp sponsors Xeno Labs."},
        {"chunk_id": "orbit_founder", "doc_id": "orbit", "text": "Orbit Labs was founded by Zane Ortiz in 2015."},
        {"chunk_id": "orbit_s1", "doc_id": "orbit", "text": "Orbit Labs sponsors the Alpha Fund as well."},
        {"chunk_id": "orbit_s2", "doc_id": "orbit", "text": "Orbit Labs sponsors the Delta Games."},
        {"chunk_id": "helio_y", "doc_id": "helio", "text": "Yara Quinn advises Helio Corp on solar storage."},
        {"chunk_id": "helio_z", "doc_id": "helio", "text": "Zane Ortiz advises Helio Corp on grid pricing."},
        {"chunk_id": "helio_hq", "doc_id": "helio", "text": "Helio Corp is headquartered in Tucson and builds solar batteries."},
    ]
    summaries = [
        {"doc_id": "xeno", "summary": "Xeno Labs founders, sponsorships and prizes."},
        {"doc_id": "orbit", "summary": "Orbit Labs founders and sponsorships."},
        {"doc_id": "helio", "summary": "Helio Corp, advised by Yara Quinn and Zane Ortiz, is headquartered in Tucson."},
    ]

    def node(nid, name, chunk_ids, aliases=()):
        return {"type": "node", "node_id": nid, "name": name, "aliases": list(aliases), "chunks": chunk_ids}

    def edge(s, r, t, chunk_ids):
        return {"type": "edge", "source": s, "relation": r, "target": t, "chunks": chunk_ids}

    nodes = [
        node("xeno_labs", "Xeno Labs", ["xeno_founder"], ["XL"]),
        node("orbit_labs", "Orbit Labs", ["orbit_founder"]),
        node("yara_quinn", "Yara Quinn", ["xeno_founder", "helio_y"]),
        node("zane_ortiz", "Zane Ortiz", ["orbit_founder", "helio_z"]),
        node("helio_corp", "Helio Corp", ["helio_hq"]),
        node("e_alpha_fund", "Alpha Fund", ["xeno_s1", "orbit_s1"]),
        node("e_beta_cup", "Beta Cup", ["xeno_s2"]),
        node("e_gamma_prize", "Gamma Prize", ["xeno_s3"]),
        node("e_delta_games", "Delta Games", ["orbit_s2"]),
    ]
    edges = [
        edge("xeno_labs", "founded_by", "yara_quinn", ["xeno_founder"]),
        edge("xeno_labs", "sponsors", "e_alpha_fund", ["xeno_s1"]),
        edge("xeno_labs", "sponsors", "e_beta_cup", ["xeno_s2"]),
        edge("xeno_labs", "sponsors", "e_gamma_prize", ["xeno_s3"]),
        edge("orbit_labs", "founded_by", "zane_ortiz", ["orbit_founder"]),
        edge("orbit_labs", "sponsors", "e_alpha_fund", ["orbit_s1"]),
        edge("orbit_labs", "sponsors", "e_delta_games", ["orbit_s2"]),
        edge("yara_quinn", "advises", "helio_corp", ["helio_y"]),
        edge("zane_ortiz", "advises", "helio_corp", ["helio_z"]),
    ]
    qa = [
        {"question": "Who was Xeno Labs founded by?", "answers": ["Yara Quinn"],
         "gold_chunks": ["xeno_founder"], "tag": "relation"},
        {"question": "Who was Orbit Labs founded by?", "answers": ["Zane Ortiz"],
         "gold_chunks": ["orbit_founder"], "tag": "relation"},
        {"question": "Which company do Yara Quinn and Zane Ortiz both advise?", "answers": ["Helio Corp"],
         "gold_chunks": ["helio_y", "helio_z"], "tag": "bridge"},
        {"question": "Where is the company advised by Yara Quinn headquartered?", "answers": ["Tucson"],
         "gold_chunks": ["helio_y", "helio_hq"], "tag": "multi-hop"},
    ]
    write_jsonl(out / "corpus.jsonl", chunks)
    write_jsonl(out / "summaries.jsonl", summaries)
    write_jsonl(out / "graph.jsonl", nodes + edges)
    write_jsonl(out / "qa.jsonl", qa)
    write_config(out / "config.json")


if __name__ == "__main__":
    stress()
    demo()
