import os

import pytest

from conftest import SAMPLES
from conpro_hls import cli


def src(name):
    return os.path.join(SAMPLES, f"{name}.cp")


def files(d):
    return sorted(os.listdir(d))


def test_vhdl_file_set(tmp_path, capsys):
    assert cli.main([src("ex5"), "--emit", "vhdl", "-o", str(tmp_path)]) == cli.EXIT_OK
    vhdl = [f for f in files(tmp_path) if f.endswith(".vhdl") and f != "conpro_support.vhdl"]
    assert len(vhdl) == 5 and "ex5.manifest" in files(tmp_path)
    out = capsys.readouterr().out.splitlines()
    assert "ex5.consumer1: 12 states 25 instructions" in out


def test_philosophers_exit_deadlock(capsys):
    assert cli.main([src("ex11"), "--sim", "--cycles", "100000"]) == cli.EXIT_DEADLOCK
    assert "simulation deadlock" in capsys.readouterr().out


def test_cycle_limit_exit():
    assert cli.main([src("ex3"), "--sim", "--cycles", "3"]) == cli.EXIT_CYCLE_LIMIT


def test_sim_trace_and_watch(tmp_path, capsys):
    trace = tmp_path / "t.tsv"
    rc = cli.main([src("ex9"), "--sim", "--random", "rnd=4,0", "--watch", "d", "--trace", str(trace)])
    assert rc == cli.EXIT_OK
    assert "main.d = 0" in capsys.readouterr().out
    assert all(len(line.split("\t")) == 4 for line in trace.read_text().splitlines())


def test_mcode_with_both_optimizers(tmp_path):
    plain, opt = tmp_path / "plain", tmp_path / "opt"
    assert cli.main([src("ex4"), "--emit", "mcode", "-o", str(plain)]) == 0
    assert cli.main([src("ex4"), "--emit", "mcode", "--opt", "rs,bb", "-o", str(opt)]) == 0
    a = (plain / "ex4_main.uc").read_text()
    b = (opt / "ex4_main.uc").read_text()
    assert a != b and b.count("\n    ") < a.count("\n    ")


def test_stage_gating(tmp_path):
    one, two = tmp_path / "one", tmp_path / "two"
    args = [src("ex5"), "--opt", "bb"]
    assert cli.main(args + ["--emit", "mcode", "-o", str(one)]) == 0
    assert cli.main(args + ["--emit", "mcode,vhdl", "--sim", "-o", str(two)]) in (0, cli.EXIT_DEADLOCK)
    for f in files(one):
        assert (one / f).read_bytes() == (two / f).read_bytes()


def test_dumps_and_other_targets(tmp_path):
    rc = cli.main([src("ex4"), "--emit", "ast,rtl", "--dump", "rs,ddg", "-o", str(tmp_path)])
    assert rc == 0
    assert {"ex4.ast", "ex4_main.rtl", "ex4.rs.txt", "ex4_main.dot"} <= set(files(tmp_path))
    assert (tmp_path / "ex4.rs.txt").read_text().startswith("== process main")


def test_scheduler_override_reaches_vhdl(tmp_path):
    rc = cli.main([src("ex11"), "--emit", "vhdl", "--scheduler", "fork_0=static", "-o", str(tmp_path)])
    assert rc == 0
    top = (tmp_path / "ex11.vhdl").read_text()
    sched = top[top.index("SEMA_fork_0_SCHED: process"):top.index("end process SEMA_fork_0_SCHED")]
    assert "conpro_enqueue" not in sched
    assert "conpro_enqueue" in top


def test_include_is_inlined(tmp_path):
    (tmp_path / "decls.cp").write_text("reg shared_r : int[8];\n")
    main = tmp_path / "top.cp"
    main.write_text('include "decls";\nprocess main: begin shared_r <- 3; end;\n')
    assert cli.main([str(main), "--sim", "--watch", "shared_r"]) == 0


def test_diagnostics_exit(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("HLS_COLOR", "never")
    bad = tmp_path / "bad.cp"
    bad.write_text("process main: begin x <- ; end;\n")
    assert cli.main([str(bad), "--sim"]) == cli.EXIT_DIAGNOSTICS
    err = capsys.readouterr().err
    assert "bad.cp:1:" in err and "error" in err and "\x1b[" not in err


def test_color_diagnostics(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("HLS_COLOR", "always")
    bad = tmp_path / "bad.cp"
    bad.write_text("process main: begin x <- ; end;\n")
    cli.main([str(bad), "--sim"])
    assert "\x1b[" in capsys.readouterr().err


def test_missing_file_is_io_error():
    assert cli.main(["/nonexistent/x.cp", "--sim"]) == cli.EXIT_IO


@pytest.mark.parametrize("argv", [["x.cp"], ["x.cp", "--emit", "bogus"], ["x.cp", "--sim", "--alu", "wide"],
                                  ["x.cp", "--sim", "--scheduler", "q=random"]])
def test_bad_flags(argv):
    assert cli.main(argv) != 0


def test_internal_error_exit(monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("invariant")
    monkeypatch.setattr(cli, "compile_typed", boom)
    assert cli.main([src("ex3"), "--sim"]) == cli.EXIT_INTERNAL


def test_module_entry_point():
    import subprocess
    import sys
    r = subprocess.run([sys.executable, "-m", "conpro_hls", src("ex3"), "--sim"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "all-ended" in r.stdout
