import json
import math

import numpy as np
import pytest

from components.config import CACHE_DIR_ENV
from components.kernel import poisson_spectrum_closed_form
from main import EXIT_BUDGET, EXIT_CONFIG, EXIT_OK, build_parser, main


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv(CACHE_DIR_ENV, raising=False)
    return tmp_path


def _run(workdir, *argv):
    out = workdir / "out.txt"
    code = main(list(argv) + ["--output", str(out), "--cache-dir", str(workdir / "cache"),
                              "--log-level", "WARNING"])
    return code, (out.read_text() if out.exists() else None)


def test_spectrum_json(workdir):
    code, text = _run(workdir, "spectrum", "--alpha", "-1", "--n", "11")
    assert code == EXIT_OK
    document = json.loads(text)
    assert document["config"]["command"] == "spectrum"
    assert document["config"]["params"]["alpha"] == -1.0
    rows = document["result"]["rows"]
    assert len(rows) == 11
    xi = np.array([r["xi"] for r in rows])
    values = np.array([r["L_hat"] for r in rows])
    np.testing.assert_allclose(values, poisson_spectrum_closed_form(xi), rtol=1e-9, atol=1e-15)


def test_spectrum_multiplier_csv(workdir):
    code, text = _run(workdir, "spectrum", "--alpha", "0.5", "--h", "0.5", "--n", "21", "--format", "csv")
    assert code == EXIT_OK
    lines = text.splitlines()
    assert lines[0].startswith("# command:")
    body = [line for line in lines if not line.startswith("#")]
    assert body[0] == "xi,m"
    assert len(body) == 22


def test_csv_output_is_reproducible(workdir):
    argv = ("coeffs", "--alpha", "-2.5", "--radius", "16", "--format", "csv")
    _, first = _run(workdir, *argv)
    _, second = _run(workdir, *argv)
    assert first == second


def test_interp_uses_seeded_points(workdir):
    argv = ("interp", "--alpha", "0.5", "--h", "0.25", "--points", "5", "--seed", "11", "--accuracy", "1e-7")
    code, text = _run(workdir, *argv)
    assert code == EXIT_OK
    result = json.loads(text)["result"]
    assert result["node_residual"] < 1e-6
    assert len(result["points"]) == 5
    _, again = _run(workdir, *argv)
    assert json.loads(again)["result"]["points"] == result["points"]


def test_verify_subset(workdir):
    code, text = _run(workdir, "verify", "--criteria", "1,2")
    assert code == EXIT_OK
    result = json.loads(text)["result"]
    assert result["all_passed"] is True
    assert [c["id"] for c in result["criteria"]] == [1, 2]


@pytest.mark.parametrize("argv", [
    ("spectrum", "--alpha", "0.5", "--c", "-1"),
    ("spectrum", "--alpha", "2"),
    ("verify", "--criteria", "99"),
    ("converge", "--alpha", "0.5", "--h", "0.25,0.125"),
    ("converge", "--alpha", "0.5", "--family", "hermite"),
    ("spectrum", "--alpha", "0.5", "--config", "missing.json"),
])
def test_bad_parameters_exit_2(workdir, argv):
    code, _ = _run(workdir, *argv)
    assert code == EXIT_CONFIG


def test_budget_exit_3(workdir):
    (workdir / "tiny.json").write_text(json.dumps({"synthesis": {"max_spectral_points": 100}}))
    code, text = _run(workdir, "cardinal", "--alpha", "0.5", "--config", "tiny.json")
    assert code == EXIT_BUDGET
    assert text is None


def test_argument_errors_exit_through_argparse(workdir):
    with pytest.raises(SystemExit) as info:
        main(["spectrum"])
    assert info.value.code == 2


def test_parser_reads_infinite_p():
    args = build_parser().parse_args(["converge", "--alpha", "-1", "--p", "inf", "--h", "0.5,0.25,0.125"])
    assert math.isinf(args.p)
    assert args.h == [0.5, 0.25, 0.125]
