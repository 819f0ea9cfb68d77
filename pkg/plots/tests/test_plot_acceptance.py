"""Secondary acceptance: figures agree with the simulation CLI's records.

The simulation package is exercised only through its command line and the
files it writes; nothing here imports it.
"""

import json
import shutil
import subprocess
import sys

import pytest

from lppplots import PlotSpec, SCHEMA_COLUMNS, render

LPPSIM = shutil.which("lppsim")

pytestmark = pytest.mark.skipif(LPPSIM is None,
                                reason="lppsim CLI not on PATH")


@pytest.fixture(scope="module")
def tail_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run") / "tail.csv"
    cmd = [LPPSIM, "tail", "--k", "8", "--n", "256", "--R", "2,4,8,16",
           "--trials", "4000", "--seed", "1", "--workers", "2",
           "--out", str(out)]
    subprocess.run(cmd, check=True, capture_output=True)
    return out


def test_annotated_slope_matches_cli_fit(tail_run, tmp_path):
    res = render(PlotSpec(str(tail_run), "tail-loglog", str(tmp_path / "t.svg")))
    recorded = json.load(open(str(tail_run)[:-4] + ".json"))["fit"]
    assert abs(res.fitted_slope - recorded["slope"]) < 1e-9
    assert f"{recorded['slope']:.3f}" in res.annotation
    print(f"[acceptance] plot-fidelity: annotated slope {res.fitted_slope:.3f} "
          f"== CLI fit {recorded['slope']:.3f} PASS")


def test_exact_power_law_coincides_with_reference(tmp_path):
    lines = [",".join(SCHEMA_COLUMNS)]
    for R in (2.0, 8.0, 32.0, 128.0):
        p = R ** (-2.0 / 3.0)
        lines.append(f"tail,8,4096,{R!r},,,,,50000,{round(p * 50000)},{p!r},"
                     f"{p!r},{p!r},1,")
    path = tmp_path / "exact.csv"
    path.write_text("\n".join(lines) + "\n")
    res = render(PlotSpec(str(path), "tail-loglog", str(tmp_path / "e.svg")))
    assert res.fitted_slope == pytest.approx(-2.0 / 3.0, abs=1e-6)
    gap = max(abs(a - b) / b for a, b in zip(res.data["fit_line"],
                                             res.data["ref_line"]))
    assert gap < 1e-6  # the fit lies on the reference line
    print(f"[acceptance] plot-reference: fit/reference max gap {gap:.2e} PASS")


def test_onepoint_histogram_from_real_run(tmp_path):
    out = tmp_path / "op.csv"
    cmd = [LPPSIM, "onepoint", "--m", "64", "--n", "64", "--trials", "300",
           "--seed", "2", "--out", str(out)]
    subprocess.run(cmd, check=True, capture_output=True)
    res = render(PlotSpec(str(out), "onepoint-hist", str(tmp_path / "op.png")))
    assert sum(res.data["counts"]) + res.data["underflow"] + res.data["overflow"] == 300
    assert "mean shift" in res.annotation


def test_fluct_decay_from_real_run(tmp_path):
    out = tmp_path / "fl.csv"
    cmd = [LPPSIM, "fluctuation", "--m", "0", "--r", "32", "--n", "128",
           "--x", "0.5,1,2", "--trials", "400", "--seed", "3", "--out", str(out)]
    subprocess.run(cmd, check=True, capture_output=True)
    res = render(PlotSpec(str(out), "fluct-decay", str(tmp_path / "fl.svg")))
    assert res.data["x"] == [0.5, 1.0, 2.0]
