import json
from importlib import resources

import pytest

from specjit import fixtures as F
from specjit.cli import EXIT_GRAPH_ONLY, EXIT_OK, EXIT_RUNTIME, EXIT_SOURCE, main
from specjit.graph.ir import from_json


@pytest.fixture
def write(tmp_path):
    def make(text, name="prog.sl"):
        path = tmp_path / name
        path.write_text(text)
        return str(path)
    return make


def test_runs_p1_and_prints(write, capsys):
    assert main(["run", write(F.P1_DRIVER)]) == EXIT_OK
    assert capsys.readouterr().out == "3.75\n"


def test_stats_file(write, tmp_path, capsys):
    stats = tmp_path / "s.json"
    assert main(["run", write(F.P1_DRIVER), "--stats", str(stats)]) == EXIT_OK
    s = json.loads(stats.read_text())
    assert (s["interpreted_calls"], s["graph_calls"], s["cache_entries"]) == (3, 2, 1)


def test_profile_iters_changes_warmup(write, tmp_path, capsys):
    stats = tmp_path / "s.json"
    main(["run", write(F.P1_DRIVER), "--profile-iters", "1", "--stats", str(stats)])
    s = json.loads(stats.read_text())
    assert (s["interpreted_calls"], s["graph_calls"]) == (1, 4)


def test_imperative_mode(write, tmp_path, capsys):
    stats = tmp_path / "s.json"
    main(["run", write(F.P1_DRIVER), "--mode", "imperative", "--stats", str(stats)])
    assert json.loads(stats.read_text())["graph_calls"] == 0
    assert capsys.readouterr().out == "3.75\n"


def test_parse_error_exit_code(write, capsys):
    assert main(["run", write("fn f( {")]) == EXIT_SOURCE
    assert capsys.readouterr().err


def test_missing_file_exit_code(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nope.sl")]) == EXIT_SOURCE


def test_runtime_error_keeps_partial_transcript(write, capsys):
    assert main(["run", write("print(1)\nprint(1 / 0)\n")]) == EXIT_RUNTIME
    out = capsys.readouterr()
    assert out.out == "1\n" and "DivByZero" in out.err


def test_graph_only_violation_exit_code(write, capsys):
    src = "fn f(x) {\n  fn g(y) { return y + x }\n  return g(1)\n}\nfor k in range(5) { print(f(k)) }"
    assert main(["run", write(src), "--mode", "graph-only"]) == EXIT_GRAPH_ONLY


@pytest.mark.parametrize("fmt", ["json", "dot"])
def test_dump_graph(write, tmp_path, capsys, fmt):
    dump = tmp_path / f"g.{fmt}"
    main(["run", write(F.P4_DRIVER), "--dump-graph", str(dump), "--dump-format", fmt])
    text = dump.read_text()
    if fmt == "json":
        assert from_json(text).count("Invoke") == 1
    else:
        assert text.startswith("digraph")


def test_dump_with_no_graph(write, tmp_path, capsys):
    dump = tmp_path / "g.json"
    main(["run", write("print(1)\n"), "--dump-graph", str(dump)])
    assert json.loads(dump.read_text())["nodes"] == []


def test_no_unroll_and_serial(write, tmp_path, capsys):
    src = F.UNROLL_BENCH + "for k in range(5) { print(unrolled(1.0 * k)) }\n"
    dump = tmp_path / "g.json"
    assert main(["run", write(src), "--no-unroll", "--serial", "--dump-graph", str(dump)]) == EXIT_OK
    assert from_json(dump.read_text()).count("NextIteration") >= 1


def test_workers_and_serial_are_exclusive(write, capsys):
    with pytest.raises(SystemExit):
        main(["run", write("print(1)"), "--workers", "2", "--serial"])


def test_rejects_nonpositive_workers(write, capsys):
    with pytest.raises(SystemExit):
        main(["run", write("print(1)"), "--workers", "0"])


@pytest.mark.parametrize("name", ["p1", "p2", "p3", "p4", "p5"])
def test_bundled_programs_run(name, tmp_path, capsys):
    path = resources.files("specjit") / "programs" / f"{name}.sl"
    local = tmp_path / f"{name}.sl"
    local.write_text(path.read_text())
    assert main(["run", str(local), "--no-specialize"]) == EXIT_OK
