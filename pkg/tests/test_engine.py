import json
from dataclasses import replace

import pytest

from conftest import MINI, DPP_REFERENCE, DPP_SKELETON
from evidence_engine.engine import (
    Engine,
    EngineConfig,
    GoldenRecord,
    dumps,
    evaluate,
    load_config,
    load_golden,
    rouge1_recall,
    run_evaluation,
)
from evidence_engine.errors import ConfigError, EmptyIndex, EmptyQuery, EmptyReference, GoldenFormat
from evidence_engine.retrieval import build_index, search


class TestConfig:
    def test_mini(self):
        cfg = load_config(MINI / "config.toml")
        assert cfg.index == MINI / "mini.idx"
        assert (cfg.bm25.k1, cfg.bm25.b, cfg.skeleton.tau, cfg.summary.budget, cfg.k) == (1.2, 0.75, 0.6, 60, 10)

    def test_flags_win(self):
        cfg = load_config(MINI / "config.toml", k=3, tau=0.9, compression=False)
        assert (cfg.k, cfg.skeleton.tau, cfg.summary.compression_enabled) == (3, 0.9, False)

    def test_defaults_without_file(self):
        assert load_config() == EngineConfig()

    def test_unknown_key(self, tmp_path):
        (tmp_path / "c.toml").write_text("colour = 1\n")
        with pytest.raises(ConfigError):
            load_config(tmp_path / "c.toml")

    def test_bad_value(self, tmp_path):
        (tmp_path / "c.toml").write_text("b = 2.0\n")
        with pytest.raises(ConfigError):
            load_config(tmp_path / "c.toml")

    def test_missing_resource(self, mini_index, tmp_path):
        with pytest.raises(ConfigError):
            Engine(EngineConfig(embeddings=tmp_path / "nope.txt"), index=mini_index)


class TestPipeline:
    def test_golden(self, mini_engine):
        es = mini_engine.run("diabetes, metformin")
        assert [r.hit.doc_id for r in es.results] == ["dpp1"]
        (r,) = es.results
        assert {" ".join(t.norm for t in r.document.tokens[s.token_start:s.token_end])
                for s in r.skeleton.spans} == DPP_SKELETON
        assert {i.text for i in r.evidence.covered_items} == DPP_SKELETON

    def test_entity_nowhere(self, mini_engine):
        assert mini_engine.run("diabetes, aspirin").results == ()

    def test_k_above_qualifying(self, mini_engine):
        es = mini_engine.run("insulin", k=50)
        assert {r.hit.doc_id for r in es.results} == {"d02", "d10"}

    def test_hits_equal_search(self, mini_engine):
        es = mini_engine.run("diabetes")
        expected = search(mini_engine.index, es.expanded, mini_engine.cfg.k, mini_engine.cfg.bm25)
        assert [r.hit for r in es.results] == expected
        for r in es.results:
            assert r.evidence is None or r.evidence.doc_id == r.hit.doc_id

    def test_no_evidence_kept(self, mini_engine):
        # every sentence mentioning diabetes is longer than 3 tokens
        cfg = replace(mini_engine.cfg, summary=replace(mini_engine.cfg.summary, budget=3))
        engine = Engine(cfg, index=mini_engine.index)
        es = engine.run("diabetes")
        assert es.results and all(r.evidence is None and r.reason for r in es.results)
        assert all(r["evidence"] is None for r in json.loads(dumps(es))["results"])

    def test_typed_query(self, mini_engine):
        es = mini_engine.run("disease:diabetes, drug:metformin")
        assert [r.hit.doc_id for r in es.results] == ["dpp1"]

    def test_empty_query(self, mini_engine):
        with pytest.raises(EmptyQuery):
            mini_engine.run(" , ")

    def test_empty_index(self):
        with pytest.raises(EmptyIndex):
            Engine(EngineConfig(), index=build_index([])).run("x")

    def test_json_schema(self, mini_engine):
        data = json.loads(dumps(mini_engine.run("diabetes, metformin")))
        assert list(data) == ["query", "expanded_query", "results"]
        (r,) = data["results"]
        assert list(r) == ["doc_id", "score", "rank", "skeleton", "evidence"]
        assert list(r["skeleton"][0]) == ["sentence", "start", "end", "label", "score", "text"]
        assert list(r["evidence"]) == ["sentences", "covered_items"]
        assert r["rank"] == 1
        doc = mini_engine.index.document(0)
        for s in r["skeleton"]:
            assert doc.text[s["start"]:s["end"]] == s["text"]

    def test_byte_identical(self, mini_engine, mini_index):
        other = Engine(mini_engine.cfg, index=mini_index)
        assert dumps(mini_engine.run("diabetes, metformin")) == dumps(other.run("diabetes, metformin"))


class TestRouge:
    def test_identical(self):
        assert rouge1_recall("a b c", "a b c") == 1.0

    def test_disjoint(self):
        assert rouge1_recall("x y", "a b") == 0.0

    def test_dpp_hand_count(self):
        # reference has 10 tokens; only metformin and diabetes are shared
        assert rouge1_recall("metformin reduced the incidence of diabetes", DPP_REFERENCE) == pytest.approx(0.2)

    def test_clipped_counts(self):
        assert rouge1_recall("a a a", "a b") == 0.5

    def test_empty_reference(self):
        with pytest.raises(EmptyReference):
            rouge1_recall("a", " ,")


class TestEvaluate:
    def test_golden_file(self, mini_engine):
        report = run_evaluation(mini_engine, MINI / "golden.jsonl")
        (m,) = report.per_query
        assert m.precision_at_k == 1.0
        assert m.skeleton_f1 == 1.0
        assert m.rouge1_recall >= 0.2

    def test_perfect(self, mini_engine):
        es = mini_engine.run("diabetes, metformin")
        r = es.results[0]
        gold = GoldenRecord("diabetes, metformin", ("dpp1",), tuple(DPP_SKELETON), r.evidence.text)
        agg = evaluate([es], [gold]).aggregates
        assert agg == {"precision_at_k": 1.0, "skeleton_f1": 1.0, "rouge1_recall": 1.0}

    def test_empty_outputs(self):
        gold = GoldenRecord("q", ("d1",), ("x",), "some reference")
        (m,) = evaluate([], [gold]).per_query
        assert (m.precision_at_k, m.skeleton_f1, m.rouge1_recall) == (0.0, 0.0, 0.0)

    def test_bad_golden(self, tmp_path):
        (tmp_path / "g.jsonl").write_text('{"query": "x"}\n')
        with pytest.raises(GoldenFormat) as exc:
            load_golden(tmp_path / "g.jsonl")
        assert exc.value.line_no == 1

    def test_metrics_bounded(self, mini_engine):
        outs = [mini_engine.run(q) for q in ("diabetes", "insulin", "metformin")]
        golds = [GoldenRecord(q, ("d02",), ("diabetes", "zzz"), "insulin therapy") for q in ("diabetes", "insulin", "metformin")]
        for m in evaluate(outs, golds).per_query:
            assert all(0.0 <= v <= 1.0 for v in m[1:])
