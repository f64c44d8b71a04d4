"""Command-line batch interface: ``analyze``, ``synth`` and ``baseline``.

Configuration is an INI file; command-line flags override file values,
which override built-in defaults.  Exit status is 0 on success, 1 when
any curve failed and 2 on a configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import glob
import io
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import List, Optional

import numpy as np

from .dataio import _fmt, emit_report, parse_curve_csv, read_truth
from .inference import least_squares_baseline, summarize, youngs_modulus_samples
from .model import (
    ConfigurationError,
    GeometryError,
    HertzGeometry,
    Hyperparameters,
    ModelSpec,
    SamplerConfig,
)
from .samplers import run_sampler
from .synth import SynthSpec, cantilever_like, rbc_like, silicone_like, write_synthetic

log = logging.getLogger("indentcp")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2
PRESETS = {"cantilever_like": cantilever_like, "silicone_like": silicone_like, "rbc_like": rbc_like}


def parse_geometry(text: Optional[str]) -> Optional[HertzGeometry]:
    """``sphere:R=...,nu=...``, ``pyramid:phi=...,nu=...`` (degrees) or ``power:beta=...,c=...``."""
    if text is None or not text.strip() or text.strip().lower() == "none":
        return None
    kind, _, rest = text.strip().partition(":")
    kv = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigurationError(f"geometry parameter {item!r} is not key=value")
        try:
            kv[key.strip()] = _number(val)
        except (ValueError, ZeroDivisionError):
            raise ConfigurationError(f"geometry parameter {key!r} is not a number") from None
    kind = kind.lower()
    required = {"sphere": ("R",), "pyramid": ("phi",), "power": ("beta", "c")}
    allowed = {"sphere": ("R", "nu"), "pyramid": ("phi", "nu"), "power": ("beta", "c")}
    if kind not in required:
        raise ConfigurationError(f"unknown geometry kind {kind!r}")
    missing = [k for k in required[kind] if k not in kv]
    extra = sorted(set(kv) - set(allowed[kind]))
    if missing or extra:
        raise ConfigurationError(f"geometry {kind!r}: missing {missing}, unknown {extra}")
    try:
        if kind == "sphere":
            return HertzGeometry.sphere(kv["R"], kv.get("nu", 0.5))
        if kind == "pyramid":
            return HertzGeometry.pyramid(math.radians(kv["phi"]), kv.get("nu", 0.5))
        return HertzGeometry.power(kv["beta"], kv["c"])
    except GeometryError as exc:
        raise ConfigurationError(f"geometry {text.strip()!r}: {exc}") from None


def _floats(text):
    return tuple(_number(s) for s in text.replace(";", ",").split(",") if s.strip())


def _number(s):
    s = s.strip()
    if "/" in s:
        a, b = s.split("/")
        return float(a) / float(b)
    return float(s)


@dataclass
class AnalysisConfig:
    """Everything a batch run needs; see :func:`load_config` for the file layout."""

    inputs: List[str] = field(default_factory=list)
    spec: ModelSpec = field(default_factory=ModelSpec)
    hyper: Hyperparameters = field(default_factory=Hyperparameters)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    geometry: Optional[HertzGeometry] = None
    position_unit_in_meters: float = 1.0
    force_unit_in_newtons: float = 1.0
    out_dir: str = "results"
    n_chains: int = 1
    workers: int = 1

    def input_files(self) -> List[Path]:
        files = []
        for pattern in self.inputs:
            matches = sorted(glob.glob(pattern))
            if not matches:
                raise ConfigurationError(f"input {pattern!r} matches no files")
            files.extend(Path(m) for m in matches)
        return files


_SAMPLER_TYPES = {f.name: f.type for f in fields(SamplerConfig)}


def _sampler_value(name, raw):
    if name in ("adapt", "draw_beta", "legacy_b0_shape"):
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if name == "thin":
        return None if raw.strip().lower() in ("", "none") else int(raw)
    if name in ("n_iter", "burn_in", "seed", "adapt_window", "max_kept"):
        return int(raw)
    return float(raw)


def load_config(path=None, overrides: Optional[dict] = None) -> AnalysisConfig:
    """Read an INI config and apply ``overrides`` (already-parsed flag values).

    Sections: ``[input] paths``; ``[model] d1, post_powers, smoothness,
    gamma_prior``; ``[prior] mu, lambda, a0, kappa, eta``; ``[sampler]``
    with any :class:`SamplerConfig` field; ``[geometry] spec``;
    ``[units] position_unit_in_meters, force_unit_in_newtons``;
    ``[output] dir``; ``[run] chains, workers``.
    """
    cp = configparser.ConfigParser()
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigurationError(f"config file {p} does not exist")
        try:
            cp.read_string(p.read_text())
        except configparser.Error as exc:
            raise ConfigurationError(f"{p}: {exc}") from None
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    try:
        sec = lambda name: cp[name] if cp.has_section(name) else {}
        inputs = [s for s in sec("input").get("paths", "").split() if s]
        if "input" in overrides:
            inputs = list(overrides["input"])

        m = sec("model")
        gp = m.get("gamma_prior")
        spec = ModelSpec(
            d1=int(m.get("d1", 1)),
            post_powers=_floats(m.get("post_powers", "1.5")),
            smoothness=int(overrides.get("smoothness", m.get("smoothness", -1))),
            gamma_prior=_floats(gp) if gp else None,
        )

        pr = sec("prior")
        hyper_kw = {}
        if "mu" in pr:
            v = _floats(pr["mu"])
            hyper_kw["mu"] = v[0] if len(v) == 1 else np.array(v)
        if "lambda" in pr:
            v = _floats(pr["lambda"])
            hyper_kw["lambda_diag"] = v[0] if len(v) == 1 else np.array(v)
        for key in ("a0", "kappa", "eta"):
            if key in pr:
                hyper_kw[key] = float(pr[key])
        hyper = Hyperparameters(**hyper_kw)

        skw = {}
        for key, raw in sec("sampler").items():
            if key not in _SAMPLER_TYPES:
                raise ConfigurationError(f"unknown sampler option {key!r}")
            skw[key] = _sampler_value(key, raw)
        for flag, key in (("seed", "seed"), ("iters", "n_iter"), ("burn_in", "burn_in")):
            if flag in overrides:
                skw[key] = int(overrides[flag])
        if overrides.get("legacy_b0_shape"):
            skw["legacy_b0_shape"] = True
        sampler = SamplerConfig(**skw)

        geom = parse_geometry(overrides.get("geometry", sec("geometry").get("spec")))
        u = sec("units")
        run = sec("run")
        return AnalysisConfig(
            inputs=inputs,
            spec=spec,
            hyper=hyper,
            sampler=sampler,
            geometry=geom,
            position_unit_in_meters=float(u.get("position_unit_in_meters", 1.0)),
            force_unit_in_newtons=float(u.get("force_unit_in_newtons", 1.0)),
            out_dir=str(overrides.get("out", sec("output").get("dir", "results"))),
            n_chains=int(run.get("chains", 1)),
            workers=int(overrides.get("workers", run.get("workers", 1))),
        )
    except ConfigurationError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigurationError(str(exc)) from None


def _analyze_one(cfg: AnalysisConfig, path: Path, out: Path):
    """Run one curve end to end; returns a summary row dict."""
    curve = parse_curve_csv(path, cfg.position_unit_in_meters, cfg.force_unit_in_newtons)
    truth = read_truth(path)
    rows = []
    for chain_id in range(cfg.n_chains):
        trace = run_sampler(curve, cfg.spec, cfg.hyper, cfg.sampler, chain_id=chain_id)
        report = summarize(trace, curve, cfg.spec, cfg.geometry, truth)
        E = youngs_modulus_samples(trace, cfg.spec, cfg.geometry) if report.E_mmse is not None else None
        target = out / path.stem if cfg.n_chains == 1 else out / path.stem / f"chain{chain_id}"
        emit_report(report, target, trace, E)
        rows.append(report)
    return rows[0]


def _worker(args):
    cfg, path, out = args
    try:
        return path, _analyze_one(cfg, path, out), None
    except Exception as exc:  # isolate per-curve failures
        return path, None, f"{type(exc).__name__}: {exc}"


SUMMARY_COLUMNS = (
    "trial", "file", "status", "x_gamma_true", "x_gamma_mmse", "x_gamma_lower", "x_gamma_upper",
    "pct_error", "E_lower", "E_mmse", "E_upper",
)


def summary_table(results) -> str:
    """Per-curve rows followed by an average row (mean |% error|, mean E)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    errs, Es = [], []
    for i, (path, rep, err) in enumerate(results, start=1):
        if rep is None:
            w.writerow((i, path.name, "failed: " + err) + ("",) * 8)
            continue
        t = rep.truth.get("x_gamma") if rep.truth else None
        pct = None if t is None or t == 0 else 100.0 * (rep.x_gamma_mmse - t) / t
        if pct is not None:
            errs.append(abs(pct))
        if rep.E_mmse is not None:
            Es.append(rep.E_mmse)
        lo, hi = rep.E_ci if rep.E_ci else (None, None)
        w.writerow((
            i, path.name, "ok", _fmt(t), _fmt(rep.x_gamma_mmse), _fmt(rep.x_gamma_ci[0]),
            _fmt(rep.x_gamma_ci[1]), _fmt(pct), _fmt(lo), _fmt(rep.E_mmse), _fmt(hi),
        ))
    w.writerow((
        "avg", "", "", "", "", "", "",
        _fmt(np.mean(errs)) if errs else "", "", _fmt(np.mean(Es)) if Es else "", "",
    ))
    return buf.getvalue()


def run_analysis(cfg: AnalysisConfig) -> int:
    """Analyze every input curve and write per-curve artifacts plus ``summary.csv``."""
    files = cfg.input_files()
    if not files:
        raise ConfigurationError("no input curves given")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(cfg, p, out) for p in files]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_worker, jobs))
    else:
        results = [_worker(j) for j in jobs]
    for path, _, err in results:
        if err is not None:
            log.error("%s: %s", path, err)
    (out / "summary.csv").write_text(summary_table(results))
    return EXIT_FAILED if any(err is not None for _, _, err in results) else EXIT_OK


def run_baseline(cfg: AnalysisConfig) -> int:
    """Equal-variance least-squares scan for every input; writes ``baseline.csv``."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("file", "status", "k", "x_gamma", "E"))
    failed = False
    for path in cfg.input_files():
        try:
            curve = parse_curve_csv(path, cfg.position_unit_in_meters, cfg.force_unit_in_newtons)
            res = least_squares_baseline(curve, cfg.spec, cfg.geometry)
            w.writerow((path.name, "ok", res.k, _fmt(res.x_gamma), _fmt(res.E)))
        except Exception as exc:
            failed = True
            log.error("%s: %s", path, exc)
            w.writerow((path.name, f"failed: {type(exc).__name__}: {exc}", "", "", ""))
    (out / "baseline.csv").write_text(buf.getvalue())
    return EXIT_FAILED if failed else EXIT_OK


def load_synth_specs(path) -> List[SynthSpec]:
    """Read a ``[synth]`` INI section into one spec per seed.

    Either ``preset`` (``cantilever_like``, ``silicone_like``, ``rbc_like``)
    or explicit :class:`SynthSpec` fields; ``count`` curves are produced
    with seeds ``seed, seed + 1, ...``.
    """
    cp = configparser.ConfigParser()
    p = Path(path)
    if not p.exists():
        raise ConfigurationError(f"synth spec {p} does not exist")
    try:
        cp.read_string(p.read_text())
        s = dict(cp["synth"])
    except (configparser.Error, KeyError) as exc:
        raise ConfigurationError(f"{p}: needs a [synth] section ({exc})") from None
    count = int(s.pop("count", 1))
    seed = int(s.pop("seed", 0))
    try:
        if "preset" in s:
            name = s.pop("preset")
            if name not in PRESETS:
                raise ConfigurationError(f"unknown preset {name!r}")
            kw = {k: _number(v) for k, v in s.items()}
            if "n" in kw:
                kw["n"] = int(kw["n"])
            return [PRESETS[name](seed=seed + i, **kw) for i in range(count)]
        kw = {}
        for key, raw in s.items():
            if key in ("beta1", "beta2", "beta_tilde", "post_powers", "x"):
                kw[key] = _floats(raw)
            elif key in ("n", "d1", "smoothness"):
                kw[key] = int(raw)
            elif key == "geometry":
                kw[key] = parse_geometry(raw)
            else:
                kw[key] = _number(raw)
        return [SynthSpec(seed=seed + i, **kw) for i in range(count)]
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None


def run_synth(spec_path, out_dir) -> int:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    specs = load_synth_specs(spec_path)
    width = max(3, len(str(len(specs))))
    for i, spec in enumerate(specs):
        write_synthetic(spec, out / f"curve_{i:0{width}d}.csv")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="indentcp", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    an = sub.add_parser("analyze", help="run the samplers on force curves")
    an.add_argument("--config")
    an.add_argument("--input", nargs="+")
    an.add_argument("--seed", type=int)
    an.add_argument("--iters", type=int)
    an.add_argument("--burn-in", type=int, dest="burn_in")
    an.add_argument("--smoothness", type=int, choices=(-1, 0, 1))
    an.add_argument("--geometry")
    an.add_argument("--out")
    an.add_argument("--workers", type=int)
    an.add_argument("--legacy-b0-shape", action="store_true", dest="legacy_b0_shape")

    sy = sub.add_parser("synth", help="generate synthetic curves with truth sidecars")
    sy.add_argument("--spec", required=True)
    sy.add_argument("--out", required=True)

    bl = sub.add_parser("baseline", help="equal-variance least-squares contact scan")
    bl.add_argument("--config")
    bl.add_argument("--input", nargs="+", required=True)
    bl.add_argument("--geometry")
    bl.add_argument("--smoothness", type=int, choices=(-1, 0, 1))
    bl.add_argument("--out", required=True)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "synth":
            return run_synth(args.spec, args.out)
        overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
        cfg = load_config(args.config, overrides)
        if args.command == "baseline":
            return run_baseline(cfg)
        return run_analysis(cfg)
    except ConfigurationError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
