"""Command line entry point: ``shrinker-lab run|report|list``.

Exit codes: 0 success, 1 module error, 2 usage error.  Output bundles go to
``output.dir`` from the config, else ``$SHRINKER_LAB_OUT/<experiment>-<hash>``,
else ``./shrinker-lab-out/<experiment>-<hash>``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import EXPERIMENTS, load_config
from .errors import SchemaError, ShrinkerLabError, UsageError
from .experiments import RUNNERS, dump_json, write_csv
from .loja import tls_fit

OUT_ENV = "SHRINKER_LAB_OUT"
MANIFEST = "manifest.json"


def output_dir(cfg, override=None) -> Path:
    if override:
        return Path(override)
    if cfg["output.dir"]:
        return Path(cfg["output.dir"])
    root = Path(os.environ.get(OUT_ENV, "shrinker-lab-out"))
    return root / f"{cfg.experiment}-{cfg.digest()[:12]}"


def run_experiment(cfg, out=None) -> Path:
    """Run a configured experiment and write its bundle; returns the bundle directory."""
    if cfg.experiment not in RUNNERS:
        raise UsageError(f"unknown experiment {cfg.experiment!r}")
    artifacts = RUNNERS[cfg.experiment](cfg)
    dest = output_dir(cfg, out)
    dest.mkdir(parents=True, exist_ok=True)
    hashes = {}
    for name, text in sorted(artifacts.items()):
        (dest / name).write_text(text, encoding="utf-8")
        hashes[name] = hashlib.sha256(text.encode()).hexdigest()
    manifest = {"tool": "shrinker-lab", "version": __version__, "experiment": cfg.experiment,
                "config": cfg.values, "config_text": cfg.canonical_text(),
                "config_sha256": cfg.digest(), "artifacts": hashes}
    (dest / MANIFEST).write_text(dump_json(manifest), encoding="utf-8")
    return dest


# ---------------------------------------------------------------------------
# report


def _read_csv(path, required):
    if not path.exists():
        raise SchemaError(f"missing {path.name}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
        header = rows[0].keys() if rows else []
    missing = [c for c in required if c not in header]
    if not rows or missing:
        raise SchemaError(f"{path.name}: missing columns {missing or list(required)}")
    return rows


def emit_report(bundle) -> list:
    """Write plot-ready long-format files next to a bundle; returns their names."""
    bundle = Path(bundle)
    mpath = bundle / MANIFEST
    if not mpath.exists():
        raise SchemaError(f"{bundle} has no {MANIFEST}")
    manifest = json.loads(mpath.read_text(encoding="utf-8"))
    exp = manifest.get("experiment")
    written = {}
    if (bundle / "trace.csv").exists():
        rows = _read_csv(bundle / "trace.csv", ("tau", "F"))
        side = json.loads((bundle / "trace.json").read_text()) if (bundle / "trace.json").exists() else {}
        if not side and (bundle / "final.json").exists():
            side = json.loads((bundle / "final.json").read_text())
        F0 = float(side.get("F_base", 0.0))
        pairs = [(float(r["tau"]), math.log(float(r["F"]) - F0)) for r in rows
                 if float(r["F"]) - F0 > 0]
        written["report_fgap.csv"] = write_csv(("tau", "log_F_gap"), pairs)
    if exp == "loja-fit":
        rows = _read_csv(bundle / "pairs.csv", ("group", "log_rhs", "log_lhs"))
        x = np.array([float(r["log_rhs"]) for r in rows])
        y = np.array([float(r["log_lhs"]) for r in rows])
        g = np.array([int(r["group"]) for r in rows])
        slope, icpt = tls_fit(x, y, g)
        stored = json.loads((bundle / "fit.json").read_text())
        written["report_loglog.csv"] = write_csv(("group", "log_rhs", "log_lhs"), zip(g, x, y))
        written["report_fit.json"] = dump_json({"slope": slope, "intercept": icpt,
                                                "stored_slope": stored["slope"],
                                                "stored_intercept": stored["intercept"],
                                                "slope_difference": abs(slope - stored["slope"])})
    elif exp == "spectrum":
        rows = _read_csv(bundle / "eigenvalues.csv", ("index", "eigenvalue"))
        written["report_spectrum.csv"] = write_csv(("index", "eigenvalue"),
                                                   [(int(r["index"]), float(r["eigenvalue"])) for r in rows])
    elif exp == "model-problem":
        rows = _read_csv(bundle / "mode.csv", ("r", "u_m_over_r"))
        c = json.loads((bundle / "mode.json").read_text())["c"]
        pairs = [(math.log(float(r["r"])), math.log(abs(float(r["u_m_over_r"]) - c))) for r in rows
                 if float(r["r"]) > 0 and abs(float(r["u_m_over_r"]) - c) > 0]
        written["report_decay.csv"] = write_csv(("log_r", "log_abs_u_over_r_minus_c"), pairs)
    elif exp == "extension":
        rows = _read_csv(bundle / "extension.csv", ("dataset", "ratio"))
        written["report_ratio.csv"] = write_csv(("dataset", "ratio"),
                                                [(int(r["dataset"]), float(r["ratio"])) for r in rows])
    if not written:
        raise SchemaError(f"nothing to report for experiment {exp!r}")
    for name, text in written.items():
        (bundle / name).write_text(text, encoding="utf-8")
    return sorted(written)


# ---------------------------------------------------------------------------
# entry point


def list_experiments(as_json=False) -> str:
    if as_json:
        return json.dumps([{"name": k, "tag": t, "description": d} for k, (t, d) in EXPERIMENTS.items()],
                          indent=1)
    return "\n".join(f"{k:16s} [{t}] {d}" for k, (t, d) in EXPERIMENTS.items())


def build_parser():
    p = argparse.ArgumentParser(prog="shrinker-lab", description="Self-shrinker numerical laboratory")
    p.add_argument("--version", action="version", version=f"shrinker-lab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment from a config file")
    r.add_argument("config")
    r.add_argument("--out", help="bundle directory (overrides config and environment)")
    rep = sub.add_parser("report", help="derive plot-ready files from a bundle")
    rep.add_argument("bundle")
    ls = sub.add_parser("list", help="list the experiments")
    ls.add_argument("--json", action="store_true", help="machine-readable catalog")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        if args.command == "list":
            print(list_experiments(args.json))
        elif args.command == "run":
            cfg = load_config(args.config)
            print(run_experiment(cfg, args.out))
        else:
            for name in emit_report(args.bundle):
                print(name)
    except UsageError as e:
        print(f"UsageError: {e}", file=sys.stderr)
        return 2
    except ShrinkerLabError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
