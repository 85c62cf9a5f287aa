import json

import pytest

from conftest import MINI
from evidence_engine import cli


@pytest.fixture
def index_path(tmp_path):
    out = tmp_path / "mini.idx"
    assert cli.main(["index", "--corpus", str(MINI / "corpus.jsonl"), "--out", str(out)]) == 0
    return out


def run(argv, capsys):
    code = cli.main(argv)
    return code, capsys.readouterr()


def test_query_human(index_path, capsys):
    code, out = run(["query", "--config", str(MINI / "config.toml"), "--index", str(index_path),
                     "diabetes, metformin"], capsys)
    assert code == 0
    assert "dpp1" in out.out and "reduced the incidence of" in out.out


def test_query_json_and_evidence_alias(index_path, capsys):
    base = ["--config", str(MINI / "config.toml"), "--index", str(index_path), "diabetes, metformin"]
    _, a = run(["query", *base, "--json"], capsys)
    _, b = run(["evidence", *base], capsys)
    assert a.out == b.out
    assert json.loads(a.out)["results"][0]["doc_id"] == "dpp1"


def test_eval(index_path, capsys):
    code, out = run(["eval", "--golden", str(MINI / "golden.jsonl"), "--config", str(MINI / "config.toml"),
                     "--index", str(index_path)], capsys)
    assert code == 0
    report = json.loads(out.out)
    assert report["aggregates"]["skeleton_f1"] == 1.0


def test_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["query"])
    assert exc.value.code == 1


def test_bad_k_is_usage(index_path, capsys):
    code, _ = run(["query", "--index", str(index_path), "--k", "0", "x"], capsys)
    assert code == 1


def test_bad_addr(index_path, capsys):
    code, _ = run(["serve", "--index", str(index_path), "--addr", "nowhere"], capsys)
    assert code == 1


def test_missing_corpus_is_data_error(tmp_path, capsys):
    code, out = run(["index", "--corpus", str(tmp_path / "none.jsonl"), "--out", str(tmp_path / "x.idx")], capsys)
    assert code == 2


def test_corrupt_index_is_data_error(tmp_path, capsys):
    bad = tmp_path / "bad.idx"
    bad.write_bytes(b"garbage")
    code, out = run(["query", "--index", str(bad), "x"], capsys)
    assert code == 2 and "magic" in out.err


def test_lenient_index(tmp_path, capsys):
    corpus = tmp_path / "c.jsonl"
    corpus.write_text('{"id": "a", "title": "", "abstract": "x"}\nbroken\n')
    out = tmp_path / "c.idx"
    assert run(["index", "--corpus", str(corpus), "--out", str(out)], capsys)[0] == 2
    code, res = run(["index", "--corpus", str(corpus), "--out", str(out), "--lenient"], capsys)
    assert code == 0 and "skipped" in res.err and "indexed 1 documents" in res.out


def test_thin_client(mini_engine, monkeypatch, capsys):
    from fastapi.testclient import TestClient
    import httpx

    from evidence_engine.api import create_app

    client = TestClient(create_app(mini_engine))

    def fake_get(url, params=None, timeout=None):
        assert url == "http://svc/v1/evidence"
        return client.get("/v1/evidence", params=params)

    monkeypatch.setattr(httpx, "get", fake_get)
    code, out = run(["query", "--server", "http://svc/", "--json", "diabetes, metformin"], capsys)
    assert code == 0
    assert json.loads(out.out)["results"][0]["doc_id"] == "dpp1"
