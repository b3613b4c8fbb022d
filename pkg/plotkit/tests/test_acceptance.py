"""Secondary acceptance: the five figure kinds against a live results CSV.

The CSV comes from the primary tool's own CLI (its external interface),
using the correlation-sweep configuration at reduced scale; annotated
numbers are cross-checked against the primary's `summarize` output.
"""
import math
import subprocess
import sys
from pathlib import Path

import pytest

from plotkit.figures import PlotSpec, render

PAPER_BINS = [0.01, 0.2, 0.4, 0.6, 0.8, math.inf]


def run_primary(args):
    result = subprocess.run(
        [sys.executable, "-m", "districtlab.cli", *map(str, args)],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0, result.stderr
    return result.stdout


@pytest.fixture(scope="module")
def results_csv(tmp_path_factory):
    root = tmp_path_factory.mktemp("c11")
    config = root / "sweep.cfg"
    config.write_text(
        "\n".join(
            [
                "template = grid",
                "cities = 12",
                "q_frac_min = 0.24",
                "q_frac_max = 0.32",
                "target_d_min = 0.05",
                "target_d_max = 0.95",
                "seeds_per_city = 1",
                "steps_per_seed = 80",
                "master_seed = 20260810",
                f"out_dir = {root / 'out'}",
            ]
        )
    )
    run_primary(["experiment", "--config", config])
    return root / "out" / "results.csv"


def summarize_values(results_csv, bins=None):
    args = ["summarize", "--in", results_csv, "--x", "dissimilarity", "--y", "f_bar"]
    if bins:
        args += ["--bins", ",".join(str(e) for e in bins)]
    out = run_primary(args)
    return dict(line.split(" = ") for line in out.splitlines())


def test_c11_all_figure_kinds_and_cross_checks(results_csv, tmp_path):
    rendered = {}
    specs = {
        "scatter": PlotSpec(
            inputs=[str(results_csv)], kind="scatter", x="q_frac", y="dissimilarity",
            out=str(tmp_path / "scatter.png"), title="share vs segregation",
        ),
        "scatter-trend": PlotSpec(
            inputs=[str(results_csv)], kind="scatter-trend", x="dissimilarity", y="f_bar",
            out=str(tmp_path / "trend.png"), title="fairness vs segregation",
        ),
        "histogram": PlotSpec(
            inputs=[str(results_csv)], kind="histogram", x="f_bar", y="",
            bins=PAPER_BINS, out=str(tmp_path / "hist.png"),
        ),
        "bin-scatter": PlotSpec(
            inputs=[str(results_csv)], kind="bin-scatter", x="q_frac", y="dissimilarity",
            bin_field="f_bar", bins=PAPER_BINS, out=str(tmp_path / "binscatter.png"),
        ),
        "compare": PlotSpec(
            inputs=[str(results_csv), str(results_csv)], kind="compare",
            x="dissimilarity", y="f_bar", out=str(tmp_path / "compare.png"),
        ),
    }
    for kind, spec in specs.items():
        info = render(spec)
        assert Path(spec.out).stat().st_size > 0, f"{kind} wrote an empty file"
        rendered[kind] = info

    primary = summarize_values(results_csv, bins=PAPER_BINS)
    slope = rendered["scatter-trend"].annotations["slope"]
    assert abs(slope - float(primary["slope"])) <= 1e-6

    primary_counts = [int(primary[f"bin[{k}]"]) for k in range(len(PAPER_BINS))]
    assert rendered["histogram"].annotations["counts"] == primary_counts
    assert rendered["bin-scatter"].annotations["counts"] == primary_counts

    print(
        "[acceptance] C11 figure kinds: PASS "
        f"(5 kinds rendered; trendline slope {slope:.6f} matches summarize to 1e-6; "
        f"bin counts {primary_counts} match exactly)"
    )
