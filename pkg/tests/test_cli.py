import json
import subprocess
import sys

import numpy as np
import pytest

from streamqm import cli, qmf
from streamqm.errors import NumericError
from streamqm.manifold import load_manifold

WAVE = ["--grid", "16", "--T", "1"]


def run_cli(*args):
    return cli.main([str(a) for a in args])


@pytest.fixture
def wave_dir(tmp_path):
    d = tmp_path / "train"
    assert run_cli("gen", "wave", *WAVE, "--mu-list", "0.1,0.5,0.9", "--dump", d, "--chunk-width", "4") == 0
    return d


def test_gen_writes_one_file_per_parameter(wave_dir):
    files = sorted(p.name for p in wave_dir.iterdir())
    assert files == ["traj_0000.qmf", "traj_0001.qmf", "traj_0002.qmf"]
    X = qmf.read_matrix(wave_dir / "traj_0001.qmf")
    assert X.shape == (3 * 256, 6)


def test_fit_and_eval(wave_dir, tmp_path, capsys):
    held = tmp_path / "held"
    run_cli("gen", "wave", *WAVE, "--mu-list", "0.3", "--dump", held)
    test = held / "traj_0000.qmf"
    out, rep = tmp_path / "m.qman", tmp_path / "r.json"
    code = run_cli("fit", "--input", wave_dir, "--chunk-width", 5, "--rank", 12, "--reduced-dim", 2,
                   "--gamma-sweep", "1e-8,1e-4", "--validation", test, "--test", test,
                   "--output", out, "--report", rep)
    assert code == 0
    report = json.loads(rep.read_text())
    assert report["chunks_processed"] == 4 and len(report["selected_indices"]) == 2
    man = load_manifold(out)
    assert man.n == 2 and man.gamma == report["gamma"]
    capsys.readouterr()
    assert run_cli("eval", "--manifold", out, "--test", test) == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["test_error"] == pytest.approx(report["test_error"], rel=1e-12)


def test_fit_generator_source(tmp_path):
    out, rep = tmp_path / "m.qman", tmp_path / "r.json"
    code = run_cli("fit", "--input", "gen:wave", *WAVE, "--mu-list", "0.2,0.6", "--chunk-width", 4,
                   "--rank", 10, "--reduced-dim", 2, "--gamma", "1e-6", "--output", out, "--report", rep,
                   "--reproducible")
    assert code == 0
    report = json.loads(rep.read_text())
    assert report["gamma"] == 1e-6 and report["wall_seconds"] == 0.0
    assert report["test_error"] is not None


def test_fit_from_stdin(tmp_path):
    A = np.random.default_rng(0).standard_normal((10, 12))
    src = tmp_path / "a.qmf"
    qmf.write_stream(src, [A[:, :5], A[:, 5:]])
    out = tmp_path / "m.qman"
    with open(src, "rb") as fh:
        proc = subprocess.run(
            [sys.executable, "-m", "streamqm", "fit", "--input", "-", "--chunk-width", "3", "--rank", "6",
             "--reduced-dim", "2", "--gamma", "1e-6", "--output", str(out)],
            stdin=fh, capture_output=True, text=True,
        )
    assert proc.returncode == 0, proc.stderr
    assert load_manifold(out).n == 2


def test_exit_code_argument_errors(tmp_path, wave_dir):
    with pytest.raises(SystemExit) as info:
        run_cli("fit", "--input", wave_dir)
    assert info.value.code == 2
    assert run_cli("fit", "--input", wave_dir, "--chunk-width", 4, "--rank", 2, "--reduced-dim", 3,
                   "--gamma", 1e-6, "--output", tmp_path / "m") == 2
    assert run_cli("fit", "--input", wave_dir, "--chunk-width", 4, "--rank", 4, "--reduced-dim", 2,
                   "--gamma", 1e-6) == 2
    assert run_cli("gen", "wave", "--grid", 16, "--dt", 1.0, "--mu-list", 0.1, "--dump", tmp_path / "x") == 2


def test_exit_code_format_error(tmp_path, capsys):
    bad = tmp_path / "bad.qmf"
    bad.write_bytes(b"QMF1" + b"\x01\x00" + b"\x00" * 5)
    code = run_cli("fit", "--input", bad, "--chunk-width", 2, "--rank", 2, "--reduced-dim", 1,
                   "--gamma", 1e-6, "--output", tmp_path / "m")
    assert code == 3
    assert "byte offset" in capsys.readouterr().err


def test_exit_code_io_error(tmp_path):
    assert run_cli("eval", "--manifold", tmp_path / "missing.qman", "--test", tmp_path / "t.qmf") == 1


def test_exit_code_numeric_error(monkeypatch):
    def boom(args):
        raise NumericError("matrix is not positive definite", pivot=3)

    monkeypatch.setitem(cli.COMMANDS, "eval", boom)
    assert run_cli("eval", "--manifold", "m", "--test", "t") == 4


def test_checkpoint_resume_via_cli(tmp_path):
    common = ["fit", "--input", "gen:wave", *WAVE, "--mu-list", "0.2,0.6,0.8", "--chunk-width", 4,
              "--rank", 10, "--reduced-dim", 2, "--gamma-sweep", "1e-8,1e-2", "--reproducible"]
    assert run_cli(*common, "--output", tmp_path / "a.qman", "--report", tmp_path / "a.json") == 0
    ckpt = tmp_path / "b.ckpt"
    assert run_cli(*common, "--checkpoint", ckpt, "--checkpoint-every", 1, "--max-chunks", 2,
                   "--output", tmp_path / "b.qman", "--report", tmp_path / "b.json") == 0
    assert not (tmp_path / "b.qman").exists()
    assert run_cli(*common, "--checkpoint", ckpt, "--output", tmp_path / "b.qman",
                   "--report", tmp_path / "b.json") == 0
    assert (tmp_path / "a.qman").read_bytes() == (tmp_path / "b.qman").read_bytes()
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert run_cli(*common[:-7], "--rank", 11, *common[-5:], "--checkpoint", ckpt,
                   "--output", tmp_path / "c.qman") == 2
