"""
Batch analysis through the command-line entry point
===================================================

The ``indentcp`` command wraps the library for pipelines: ``synth``
writes curves with truth sidecars, ``analyze`` writes a report, trace
and histograms per curve plus a summary table, and ``baseline`` runs the
least-squares scan.  Here the same entry point is driven from Python in
a temporary directory.
"""

# %%
import tempfile
from pathlib import Path

from indentcp.cli import main

work = Path(tempfile.mkdtemp())
(work / "synth.ini").write_text("[synth]\npreset = silicone_like\ncount = 3\nseed = 10\n")
(work / "run.ini").write_text(
    "[model]\nd1 = 1\npost_powers = 1.5\nsmoothness = 0\ngamma_prior = 125, 250\n"
    "[geometry]\nspec = sphere:R=0.0875,nu=0.5\n"
    "[units]\nposition_unit_in_meters = 1e-3\n"
    "[sampler]\nn_iter = 5000\nburn_in = 1000\nseed = 3\n"
)

# %%
assert main(["synth", "--spec", str(work / "synth.ini"), "--out", str(work / "curves")]) == 0
code = main(["analyze", "--config", str(work / "run.ini"), "--input", str(work / "curves" / "*.csv"),
             "--out", str(work / "results")])
print("exit code", code)
print((work / "results" / "summary.csv").read_text())
print(sorted(p.name for p in (work / "results" / "curve_000").iterdir()))
