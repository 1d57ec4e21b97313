import json
import math
import random
import string

import pytest

import colabmem


def test_normalize_lines_strips_and_drops_blanks():
    lines = colabmem.normalize_lines("  a\n\n\tb  \n")
    assert lines == ["a", "b"]


def test_detect_clones_finds_a_planted_block():
    block = "import os\nx = 1\ny = 2\nreturn x + y\n"
    blocks = colabmem.detect_clones(
        [("a.py", block + "unique_a = 0\n"), ("b.py", "pad = 9\n" + block)],
        min_lines=4,
    )
    assert len(blocks) == 1
    assert blocks[0]["line_count"] == 4
    assert blocks[0]["lines"] == ["import os", "x = 1", "y = 2", "return x + y"]
    paths = sorted(occ["path"] for occ in blocks[0]["occurrences"])
    assert paths == ["a.py", "b.py"]


def test_jaccard_of_identical_texts_is_one():
    a = "def f(x):\n    y = x + 1\n    return y * 2\n"
    b = "import sys\nprint(sys.argv)\nraise SystemExit(0)\n"
    assert colabmem.jaccard(a, a) == 1.0
    assert colabmem.jaccard(a, b) == 0.0
    assert 0.0 < colabmem.jaccard(a + b, b) < 1.0


def test_extract_functions_reports_docstring_and_body():
    text = 'def add(a, b):\n    """Add."""\n    return a + b\n'
    records = colabmem.extract_functions(text)
    assert len(records) == 1
    assert records[0]["signature"] == "def add(a, b):"
    assert records[0]["docstring"] == '    """Add."""'
    assert records[0]["body"] == "    return a + b\n"
    assert records[0]["start_line"] == 1


def test_pass_at_k_matches_the_closed_form():
    assert colabmem.pass_at_k(10, 10, 1) == 1.0
    assert colabmem.pass_at_k(10, 0, 5) == 0.0
    assert math.isclose(colabmem.pass_at_k(4, 2, 2), 1 - (2 * 1) / (4 * 3))
    with pytest.raises(colabmem.ToolkitError):
        colabmem.pass_at_k(4, 5, 1)


def test_sample_size_rounds_half_up():
    assert colabmem.sample_size(58068, 0.1) == 5807
    assert colabmem.sample_size(5, 0.5) == 3


def test_compression_entropy_orders_by_redundancy():
    rng = random.Random(0)
    noise = "".join(rng.choice(string.ascii_letters) for _ in range(4000))
    repetitive = colabmem.compression_entropy("a" * 4000)
    varied = colabmem.compression_entropy(noise)
    assert 0 < repetitive < 400 < varied


def test_model_trains_generates_and_round_trips(tmp_path):
    model = colabmem.Model.init(context_len=64, d_model=16, n_heads=2,
                                n_layers=1, seed=7)
    assert model.param_count > 0

    trained = model.train_texts(["ab" * 40], epochs=2, batch_size=2)
    assert trained.param_count == model.param_count

    samples = trained.generate("ab", n=2, max_new_tokens=8, seed=11)
    assert len(samples) == 2
    assert all(isinstance(s, bytes) and len(s) <= 8 for s in samples)
    again = trained.generate("ab", n=2, max_new_tokens=8, seed=11)
    assert samples == again

    ppl = trained.perplexity("abababab")
    assert 1.0 < ppl < 257.0

    path = tmp_path / "m.ckpt"
    trained.save(str(path))
    loaded = colabmem.Model.load(str(path))
    assert loaded.perplexity("abababab") == ppl

    with pytest.raises(colabmem.ToolkitError):
        trained.generate("", n=1)


def test_pipeline_stages_run_from_a_fixture(tmp_path):
    fixture = tmp_path / "fixture"
    manifest = colabmem.write_fixture(str(fixture), seed=42, files_per_org=6,
                                      target_file_bytes=900)
    assert manifest["orgs"] == ["A", "B", "C"]
    assert manifest["functions"] > 0

    config = {
        "seed": 42,
        "out_dir": str(tmp_path / "out"),
        "orgs": [{"id": org, "dir": str(fixture / "orgs" / org)}
                 for org in ("A", "B", "C")],
    }
    config_path = tmp_path / "run.json"
    config_path.write_text(json.dumps(config))

    first = colabmem.run_stage("ingest", str(config_path))
    second = colabmem.run_stage("dedup", str(config_path))
    assert first == second
    assert (tmp_path / "out" / "corpus" / "A.train.jsonl").exists()

    with pytest.raises(colabmem.ToolkitError):
        colabmem.run_stage("train", str(config_path), ["seed=43"])
