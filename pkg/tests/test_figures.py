"""Smoke tests for the opt-in figure renderers (Agg backend, no display)."""

import json

from lipnoise import cli
from lipnoise.duals import integrate_dual_1d
from lipnoise.figures import render_convergence, render_dual_family, render_lp_profile
from lipnoise.lp import build_primal, convergence_study, solve

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def is_png(path):
    return path.read_bytes()[:8] == PNG_MAGIC


def test_render_dual_family(tmp_path):
    trajectories = [integrate_dual_1d(lam, 1.0, v_max=8.0) for lam in (1.6, 2.2)]
    out = tmp_path / "family.png"
    assert render_dual_family(trajectories, str(out), overlay_closed_form=True) == str(out)
    assert is_png(out)


def test_render_lp_profile(tmp_path):
    inst = build_primal(1.0, 4.0, 0.2)
    out = tmp_path / "profile.png"
    render_lp_profile(inst, solve(inst), str(out))
    assert is_png(out)


def test_render_convergence(tmp_path):
    rows = convergence_study(1.0, schedule=[(4.0, 0.2), (6.0, 0.1)])
    out = tmp_path / "conv.png"
    render_convergence(rows, str(out))
    assert is_png(out)


def test_cli_dual_plot(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    code = cli.main(["dual", "--mode", "1d", "--lambda", "1.6,2.2",
                     "--vmax", "8", "--plot", "--output", "fam"])
    capsys.readouterr()
    assert code == 0
    report = json.loads((tmp_path / "fam_report.json").read_text())
    assert report["figure"] == "fam_family.png"
    assert is_png(tmp_path / "fam_family.png")


def test_cli_lp_study_plot(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    code = cli.main(["lp", "--study", "--schedule", "4:0.2,6:0.1",
                     "--plot", "--output", "st"])
    capsys.readouterr()
    assert code == 0
    assert is_png(tmp_path / "st_convergence.png")


def test_cli_plot_requires_output(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    code = cli.main(["dual", "--mode", "1d", "--lambda", "1.6", "--vmax", "8",
                     "--plot"])
    err = capsys.readouterr().err
    assert code == 2
    assert "--output" in err


def test_data_outputs_do_not_import_matplotlib(tmp_path, monkeypatch, capsys):
    # --plot is the only matplotlib consumer; a data-only run must not pull it in
    import subprocess
    import sys

    script = (
        "import sys\n"
        "from lipnoise import cli\n"
        "rc = cli.main(['dual', '--mode', '1d', '--lambda', '1.6', '--vmax', '8'])\n"
        "assert rc == 0\n"
        "assert 'matplotlib' not in sys.modules\n"
    )
    proc = subprocess.run([sys.executable, "-c", script], cwd=tmp_path,
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
