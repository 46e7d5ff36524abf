"""Command line front end: golden reports, exit codes and file round trips.

Set ``JETPOISSON_UPDATE_GOLDEN=1`` to rewrite the golden files.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import pytest

from jetpoisson.cli import main
from jetpoisson.fileformats import format_operator_file, parse_operator_text, read_operator_file
from jetpoisson.transform import format_substitution, parse_substitution_text

HERE = Path(__file__).parent
DATA = HERE / "data"
GOLDEN = HERE / "golden"
UPDATE = bool(os.environ.get("JETPOISSON_UPDATE_GOLDEN"))

CASES = [
    ("skew-kdv2", "check-skew kdv2.op", 0),
    ("skew-fails", "check-skew not-skew.op", 1),
    ("jacobi-kdv2", "check-jacobi kdv2.op", 0),
    ("jacobi-fails", "check-jacobi not-poisson.op", 1),
    ("jacobi-fp-image", "check-jacobi fp-image.op", 0),
    ("compat-kdv", "compat kdv-pencil.op", 0),
    ("schouten-lz", "schouten kdv-pencil.op", 0),
    ("schouten-lv", "schouten --formalism lv --laurent-order 6 kdv-pencil.op", 0),
    ("schouten-self", "schouten not-poisson.op", 0),
    ("push-identity", "push kdv2.op --subst id.sub", 0),
    ("push-miura", "push kdv2.op --subst miura.sub --reexpress", 0),
    ("push-reciprocal", "push kdv1.op --subst reciprocal.sub", 0),
    ("push-reciprocal-reexpressed", "push kdv1.op --subst reciprocal.sub --reexpress", 0),
    ("fp-flat", "fp-oracle flat.metric", 0),
    ("fp-curved", "fp-oracle curved.metric", 0),
    ("hydro-fp-image", "hydro-check fp-image.op", 0),
    ("invariants-kdv", "invariants kdv-pencil.op --order 4", 0),
    ("dp-factorize", "dp factorize dp.op", 0),
    ("dp-not-dp", "dp factorize not-dp.op", 1),
    ("dp-push", "dp push dp-q.op --subst projective.sub", 0),
    ("json-jacobi", "--json check-jacobi kdv2.op", 0),
    ("json-not-dp", "--json dp factorize not-dp.op", 1),
]


@pytest.fixture
def in_data(monkeypatch):
    monkeypatch.chdir(DATA)
    monkeypatch.delenv("JETPOISSON_EPS_ORDER", raising=False)


def run(argv, capsys):
    code = main(argv.split())
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("name, argv, code", CASES, ids=[c[0] for c in CASES])
def test_golden(name, argv, code, in_data, capsys):
    got, out, _ = run(argv, capsys)
    assert got == code
    path = GOLDEN / f"{name}.txt"
    if UPDATE:
        path.write_text(out, encoding="utf-8")
    assert out == path.read_text(encoding="utf-8")


def test_output_is_byte_stable(in_data, capsys):
    first = run("push kdv2.op --subst miura.sub --reexpress", capsys)
    second = run("push kdv2.op --subst miura.sub --reexpress", capsys)
    assert first == second


def test_identity_push_echoes_canonical_form(in_data, capsys):
    _, out, _ = run("push kdv2.op --subst id.sub", capsys)
    body = out.split("---\n", 1)[1]
    parsed = read_operator_file("kdv2.op")
    assert body == format_operator_file(parsed.operators, parsed.space)


def test_invariants_report(in_data, capsys):
    _, out, _ = run("invariants kdv-pencil.op --order 4", capsys)
    assert "branch 1: c0 = u[1], c2 = 1/8, c4 = 0" in out.splitlines()


@pytest.mark.parametrize("argv", ["check-skew bad-syntax.op", "check-skew missing.op",
                                  "frobnicate x", "--eps-order -1 check-skew kdv2.op",
                                  "dp push dp-q.op", "dp push dp-q.op --subst id.sub",
                                  "compat kdv2.op"])
def test_input_errors_exit_2(argv, in_data, capsys):
    code, out, err = run(argv, capsys)
    assert code == 2
    assert out == ""
    assert err


def test_parse_error_reports_position(in_data, capsys):
    _, _, err = run("check-skew bad-syntax.op", capsys)
    assert "line 2, column" in err
    _, _, err = run("--json check-skew bad-syntax.op", capsys)
    payload = json.loads(err)
    assert payload["error"] == "PARSE_ERROR"


def test_mathematical_errors_exit_1(in_data, capsys):
    # a non-skew operator has no density
    code, _, err = run("schouten not-skew.op", capsys)
    assert code == 1
    assert "NOT_SKEW" in err


def test_json_matches_text(in_data, capsys):
    _, text, _ = run("compat kdv-pencil.op", capsys)
    _, js, _ = run("--json compat kdv-pencil.op", capsys)
    data = json.loads(js)
    for line in text.splitlines():
        key, value = line.split(": ", 1)
        assert str(data[key]).lower() == value


def test_eps_order_from_environment(tmp_path, monkeypatch, capsys):
    (tmp_path / "p.op").write_text("N = 1\nP[1][1] = D\n", encoding="utf-8")
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("JETPOISSON_EPS_ORDER", "3")
    (tmp_path / "id.sub").write_text("N = 1\nQ[1] = u[1]\n", encoding="utf-8")
    _, out, _ = run("push p.op --subst id.sub", capsys)
    assert "E_max = 3" in out
    _, out, _ = run("--eps-order 2 push p.op --subst id.sub", capsys)
    assert "E_max = 2" in out
    monkeypatch.delenv("JETPOISSON_EPS_ORDER")
    _, out, _ = run("push p.op --subst id.sub", capsys)
    assert "E_max = 6" in out


# -- print-parse round trips ------------------------------------------------------------------

def _operator_texts():
    texts = [p.read_text(encoding="utf-8") for p in sorted(DATA.glob("*.op"))
             if p.name != "bad-syntax.op"]
    for g in sorted(GOLDEN.glob("*.txt")):
        body = g.read_text(encoding="utf-8").split("---\n", 1)
        if len(body) == 2:
            texts.append(body[1])
    return texts


def test_print_parse_round_trip_on_corpus():
    texts = _operator_texts()
    assert len(texts) > 15
    for text in texts:
        parsed = parse_operator_text(text)
        canonical = format_operator_file(parsed.operators, parsed.space, parsed.graded)
        again = parse_operator_text(canonical)
        assert again.operators == parsed.operators
        assert format_operator_file(again.operators, again.space, again.graded) == canonical


def test_substitution_round_trip():
    for p in sorted(DATA.glob("*.sub")):
        s = parse_substitution_text(p.read_text(encoding="utf-8"))
        text = format_substitution(s)
        t = parse_substitution_text(text)
        assert (t.B, t.Q, t.projective) == (s.B, s.Q, s.projective)
        assert format_substitution(t) == text
