import pytest

from specjit.frontend import load
from specjit.orchestrator import Runtime
from specjit.runtime.interpreter import Interpreter
from specjit.runtime.values import Heap


def interpret(source):
    """Run a program on the bare interpreter; returns (transcript, heap)."""
    heap, out = Heap(), []
    Interpreter(load(source), heap, out).run_program()
    return "".join(out), heap


@pytest.fixture
def runtime():
    made = []

    def make(source, **kw):
        rt = Runtime(load(source), **kw)
        made.append(rt)
        return rt

    yield make
    for rt in made:
        rt.close()


def compiled(source, fn_name, **kw):
    """Run ``source`` (which must call ``fn_name`` enough times) and return
    the runtime and the function's newest active graph."""
    rt = Runtime(load(source), **kw)
    try:
        rt.run()
    finally:
        rt.close()
    fs = rt.function_state(fn_name)
    active = fs.active() if fs else []
    return rt, (active[-1].graph if active else None)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def verdict(request):
    lines = request.config.stash.setdefault(ACCEPTANCE, {})

    def record(n, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}"
        lines[n] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
