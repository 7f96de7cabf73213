import json
import subprocess
import sys

import pytest

from conftest import asm_elf, needs_toolchain
from zkopt.cli import EXIT_CONFIG, EXIT_DIVERGENT, EXIT_OK, main



@pytest.fixture
def div_elf(tmp_path):
    path = tmp_path / "div.elf"
    path.write_bytes(asm_elf("li t0, 8\ndiv a0, a0, t0\nret"))
    return path


def _json(capsys):
    return json.loads(capsys.readouterr().out)


def test_run_prebuilt_elf(div_elf, capsys):
    assert main(["run", str(div_elf), "--model", "r0-like"]) == EXIT_OK
    out = _json(capsys)
    assert out["compute"] == 4 and out["paging"] == 1130 and out["total"] == 1134
    assert out["status"] == "ok" and out["profile"] == "prebuilt"


def test_run_uniform(div_elf, capsys):
    assert main(["run", str(div_elf), "--model", "uniform"]) == EXIT_OK
    assert _json(capsys)["total"] == 3


def test_run_model_file(div_elf, tmp_path, capsys):
    from zkopt.cost import R0_LIKE, dump_cost_model
    m = tmp_path / "m.json"
    m.write_text(dump_cost_model(R0_LIKE).replace('"page_in": 1130', '"page_in": 10'))
    assert main(["run", str(div_elf), "--model", str(m)]) == EXIT_OK
    assert _json(capsys)["paging"] == 10


def test_run_limit_reports_status(tmp_path, capsys):
    p = tmp_path / "spin.elf"
    p.write_bytes(asm_elf("s:\nj s"))
    assert main(["run", str(p), "--limit", "100"]) == EXIT_OK
    out = _json(capsys)
    assert out["status"] == "limit" and out["retired"] == 100


def test_bad_config_exit_code(tmp_path, div_elf, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("- just\n- a list\n")
    assert main(["run", str(div_elf), "--config", str(cfg)]) == EXIT_CONFIG
    assert "must be a mapping" in capsys.readouterr().err
    assert main(["run", str(div_elf), "--model", "nonsense"]) == EXIT_CONFIG
    assert main(["run", str(div_elf), "--config", str(tmp_path / "absent.yaml")]) == EXIT_CONFIG


def test_bad_elf_exit_code(tmp_path):
    p = tmp_path / "junk.bin"
    p.write_bytes(b"not an elf at all")
    assert main(["run", str(p)]) == EXIT_CONFIG


def test_unknown_program(capsys):
    assert main(["run", "no_such_program"]) == EXIT_CONFIG


def test_analyze_prebuilt(tmp_path, capsys):
    p = tmp_path / "abs.elf"
    p.write_bytes(asm_elf("srai a1, a0, 31\nxor a0, a0, a1\nsub a0, a0, a1\nret"))
    assert main(["analyze", str(p)]) == EXIT_OK
    (line,) = capsys.readouterr().out.splitlines()
    assert json.loads(line)["rule"] == "R2"


def test_mine_and_report_errors(tmp_path, capsys):
    log = tmp_path / "t.jsonl"
    log.write_text('{"type": "config", "program": "x"}\n')
    assert main(["mine", str(log)]) == EXIT_CONFIG
    csv = tmp_path / "m.csv"
    csv.write_text("not,a,metrics,file\n")
    assert main(["report", str(csv), "--out", str(tmp_path / "r")]) == EXIT_CONFIG


def test_entry_point_module():
    proc = subprocess.run([sys.executable, "-m", "zkopt.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("zkopt ")


@needs_toolchain
def test_oracle_identical_profiles(tmp_path, capsys):
    assert main(["oracle", "loop_sum", "--a", "O2", "--b", "O2", "--store", str(tmp_path)]) == EXIT_OK
    assert _json(capsys)["verdict"] == "equivalent"


@needs_toolchain
def test_oracle_divergent_exit_code(tmp_path, capsys):
    # signed overflow is undefined, so -O2 may fold the comparison while the baseline wraps
    src = tmp_path / "ub.c"
    src.write_text('#include "zkrt.h"\n'
                   'volatile int big = 2147483647;\n'
                   'int check(int x) { return x + 1 > x; }\n'
                   'int main(void) { zk_print_u32(check(big)); zk_print("\\n"); return 0; }\n')
    manifest = tmp_path / "m.yaml"
    manifest.write_text(f"programs:\n  ub: {{source: {src}}}\n")
    cfg = tmp_path / "c.yaml"
    cfg.write_text(f"manifest: {manifest}\n")
    rc = main(["oracle", "ub", "--config", str(cfg), "--store", str(tmp_path / "s")])
    out = _json(capsys)
    assert rc == EXIT_DIVERGENT and out["verdict"] == "divergent"
    assert main(["oracle", "ub", "--b", "baseline", "--config", str(cfg), "--store", str(tmp_path / "s")]) == EXIT_OK


@needs_toolchain
def test_tune_is_reproducible(tmp_path, capsys):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / f"{name}.jsonl"
        rc = main(["tune", "factorial", "--seed", "7", "--iterations", "12", "--depth", "4", "--jobs", "2",
                   "--out", str(out), "--store", str(tmp_path / f"store-{name}")])
        assert rc == EXIT_OK
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    summary = json.loads(capsys.readouterr().out.splitlines()[-1])
    assert summary["evaluations"] == 12

    assert main(["mine", str(tmp_path / "a.jsonl"), "-k", "2"]) == EXIT_OK
    tables = json.loads(capsys.readouterr().out)
    assert set(tables) == {"best_unigrams", "best_bigrams", "worst_unigrams", "worst_bigrams"}


@needs_toolchain
def test_bench_then_report(tmp_path, capsys):
    out = tmp_path / "bench"
    rc = main(["bench", "--programs", "factorial,div8", "--profiles", "baseline;mem2reg;O2", "--model", "uniform",
               "--out", str(out), "--store", str(tmp_path / "s"), "--jobs", "2"])
    assert rc == EXIT_OK
    names = {p.split("/")[-1] for p in capsys.readouterr().out.split()}
    assert {"metrics.csv", "impact.csv", "summary.md", "impact-uniform.png"} <= names
    assert "| uniform | mem2reg |" in (out / "summary.md").read_text()
    assert main(["report", str(out / "metrics.csv"), "--out", str(tmp_path / "again"), "--no-figures"]) == EXIT_OK
    assert (tmp_path / "again" / "impact.csv").read_bytes() == (out / "impact.csv").read_bytes()
