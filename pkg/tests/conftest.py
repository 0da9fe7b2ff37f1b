import copy
import os
import sys

import pytest

HERE = os.path.dirname(__file__)
sys.path.insert(0, HERE)

from conpro_hls.pipeline import Options, analyze_source, compile_source, compile_typed  # noqa: E402
from conpro_hls.sim import interpret_ast, load_system, run  # noqa: E402

SAMPLES = os.path.join(os.path.dirname(HERE), "src", "conpro_hls", "samples")
CORPUS = sorted(f[:-3] for f in os.listdir(SAMPLES) if f.endswith(".cp"))
# samples that run to completion without reading undriven inputs
TERMINATING = ["ex2", "ex3", "ex4", "ex9"]


def sample(name):
    with open(os.path.join(SAMPLES, f"{name}.cp")) as f:
        return f.read()


def compiled(name, **opts):
    return compile_source(sample(name), f"{name}.cp", Options(**opts))


def simulate(c, cycles=200_000, config=None):
    return run(load_system(c.tm, c.programs, config or {"trace": False}), cycles)


def local_values(result, proc="main"):
    """Final user-visible registers of one process, without compiler temporaries."""
    pre = proc + "."
    return {k[len(pre):]: v for k, v in result.stores.items()
            if k.startswith(pre) and "$" not in k}


def reference_values(src, proc="main"):
    tm = analyze_source(src, "r.cp", Options(observe="*"))
    return dict(interpret_ast(tm.process(proc).body, tm=tm, proc=proc)), tm


def agree(ref, got):
    return all(got.get(k, 0) == ref.get(k, 0) for k in set(ref) | set(got))


def run_variant(tm, **opts):
    c = compile_typed(copy.deepcopy(tm), Options(**opts))
    return simulate(c)


@pytest.fixture
def ex5_design():
    from conpro_hls.rtl import compile_design
    return compile_design(compiled("ex5"))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
