import io
import json

import numpy as np
import pytest

from conftest import rep_of
from lgm_cli import build_parser, dispatch
from lib.wilson_loops import linear_loop, loop_to_json


def run(argv):
    stream = io.StringIO()
    code = dispatch(argv, stream)
    return code, stream.getvalue()


def run_json(argv):
    code, text = run(argv)
    return code, json.loads(text)


@pytest.fixture
def trace_modulus_file(tmp_path):
    rep = rep_of("u", 2)
    path = tmp_path / "loops.json"
    path.write_text(json.dumps([loop_to_json(linear_loop(rep)), loop_to_json(linear_loop(rep, sign=-1))]))
    return str(path)


@pytest.fixture
def product_file(tmp_path):
    rep = rep_of("u", 2)
    path = tmp_path / "product.json"
    factors = [loop_to_json(linear_loop(rep)), loop_to_json(linear_loop(rep, sign=-1))]
    path.write_text(json.dumps({"factors": factors}))
    return str(path)


@pytest.fixture
def plaquette_file(tmp_path):
    path = tmp_path / "plaquettes.json"
    path.write_text(json.dumps([loop_to_json(linear_loop(rep_of("u", 2)))]))
    return str(path)


def test_group_info():
    code, document = run_json(["group", "info", "--family", "so", "--n", "4", "--out", "json", "--quiet"])
    assert code == 0
    result = document["result"]
    assert result["lambda"] == pytest.approx(-3)
    assert result["lie_dim"] == 6 and result["dim"] == 4
    assert result["completeness_residual"] <= 1e-12
    assert document["command"] == "group info"
    assert document["config"]["seed"] == 0


def test_g2_moment_entries():
    code, document = run_json(["moment", "--family", "g2", "--tensor", "2,0", "--measure", "haar", "--quiet"])
    assert code == 0
    moment = document["result"]["moment"]
    assert moment["shape"] == [7, 7, 7, 7]
    assert len(moment["entries"]) == 49
    for entry in moment["entries"]:
        i, i2, j, j2 = entry["idx"]
        assert i == i2 and j == j2
        assert entry["re"] == pytest.approx(1 / 7, abs=1e-12)
    assert document["result"]["rank"] == 1


def test_weingarten_by_order():
    code, document = run_json(["weingarten", "--family", "u", "--n", "3", "--order", "2", "--source",
                               "permutations", "--quiet"])
    assert code == 0
    wg = np.array(document["result"]["wg"])[..., 0]
    np.testing.assert_allclose(wg, [[1 / 8, -1 / 24], [-1 / 24, 1 / 8]], atol=1e-12)
    assert len(document["result"]["labels"]) == 2


def test_weingarten_cutoff_out_of_range_is_usage_error():
    code, document = run_json(["weingarten", "--family", "u", "--n", "3", "--order", "2", "--source",
                               "permutations", "--tol", "2.0", "--quiet"])
    assert code == 2
    assert document["error"]["kind"] == "usage"
    assert "(0, 1)" in document["error"]["detail"]


def test_expect_missing_file_is_usage_error():
    code, document = run_json(["expect", "--loops", "missing.json", "--quiet"])
    assert code == 2
    assert document["error"]["kind"] == "usage"
    assert "missing.json" in document["error"]["detail"]


def test_expect_haar(product_file, trace_modulus_file):
    code, document = run_json(["expect", "--loops", product_file, "--quiet"])
    assert code == 0
    assert document["result"]["value"] == pytest.approx([1.0, 0.0], abs=1e-12)
    # a plain list is one sum: tr g + tr g^-1
    code, document = run_json(["expect", "--loops", trace_modulus_file, "--quiet"])
    assert document["result"]["value"] == pytest.approx([0.0, 0.0], abs=1e-12)


def test_expect_brownian(tmp_path):
    path = tmp_path / "trace.json"
    path.write_text(json.dumps(loop_to_json(linear_loop(rep_of("su", 2)))))
    code, document = run_json(["expect", "--loops", str(path), "--measure", "brownian:t=1.5", "--quiet"])
    assert code == 0
    assert document["result"]["value"][0] == pytest.approx(2 * np.exp(-1.5 * 1.5 / 2), abs=1e-12)


def test_expect_wilson_reports_seed(product_file, plaquette_file):
    code, document = run_json(["expect", "--loops", product_file, "--measure", "wilson:beta=0.1",
                               "--plaquettes", plaquette_file, "--samples", "1000", "--seed", "3", "--quiet"])
    assert code == 0
    result = document["result"]
    assert result["seed"] == 3 and result["samples"] == 1000
    assert result["stderr"] > 0


def test_budget_is_a_numerical_guard():
    code, document = run_json(["moment", "--family", "u", "--n", "4", "--tensor", "3,3", "--budget", "1000",
                               "--quiet"])
    assert code == 1
    assert document["error"]["kind"] == "budget"
    assert document["error"]["required"] == 4096


def test_unknown_flag_is_usage_error():
    code, document = run_json(["group", "info", "--family", "so", "--n", "4", "--colour"])
    assert code == 2
    assert document["error"]["kind"] == "usage"


def test_unsupported_group():
    code, document = run_json(["group", "info", "--family", "e8", "--quiet"])
    assert code == 2
    assert document["error"]["kind"] == "group-spec"


def test_sample_jsonl():
    code, text = run(["sample", "--family", "su", "--n", "2", "--count", "3", "--seed", "7", "--out", "jsonl",
                      "--quiet"])
    assert code == 0
    lines = text.strip().splitlines()
    assert len(lines) == 3
    records = [json.loads(line) for line in lines]
    assert [r["index"] for r in records] == [0, 1, 2]
    assert all(r["residual"] < 1e-10 for r in records)
    assert run(["sample", "--family", "su", "--n", "2", "--count", "3", "--seed", "7", "--out", "jsonl",
                "--quiet"])[1] == text


def test_brownian_path():
    code, document = run_json(["brownian-path", "--family", "so", "--n", "3", "--t", "0.5", "--steps", "10",
                               "--quiet"])
    assert code == 0
    assert document["result"]["steps"] == 10
    assert document["result"]["residual"] < 1e-10


def test_text_output():
    code, text = run(["group", "info", "--family", "sp", "--n", "2", "--out", "text", "--quiet"])
    assert code == 0
    assert "lambda" in text and "-5" in text


def test_verify_haar(trace_modulus_file):
    code, document = run_json(["verify", "theorem-a", "--loops", trace_modulus_file, "--measure", "haar", "--quiet"])
    assert code == 0
    assert document["result"]["passed"]
    assert document["result"]["residual"] <= 1e-9


def test_verify_brownian(trace_modulus_file):
    code, document = run_json(["verify", "theorem-a", "--loops", trace_modulus_file, "--measure", "brownian:t=1",
                               "--quiet"])
    assert code == 0
    assert document["result"]["finite_difference_residual"] <= 1e-6


def test_wilson_without_plaquettes(trace_modulus_file):
    code, document = run_json(["verify", "theorem-a", "--loops", trace_modulus_file, "--measure",
                               "wilson:beta=0.1", "--quiet"])
    assert code == 2
    assert "plaquette" in document["error"]["detail"]


def test_help_exits_cleanly(capsys):
    assert dispatch(["--help"]) == 0
    assert "weingarten" in capsys.readouterr().out


def test_parser_lists_subcommands():
    parser = build_parser()
    args = parser.parse_args(["moment", "--family", "u", "--n", "2", "--tensor", "1,1"])
    assert args.command == "moment" and args.tensor == "1,1"
