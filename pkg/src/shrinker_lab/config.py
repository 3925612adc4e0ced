"""Flat ``section.key = value`` experiment configuration.

Blank lines and ``#`` comments are ignored.  Every key must appear in
``SCHEMA``; unknown keys and unparsable values raise ``UsageError``, while
values that break a module constraint raise ``InvalidArgumentError``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

from .errors import InvalidArgumentError, UsageError

EXPERIMENTS = {
    "shrinker-verify": ("canonical-shrinkers", "residual, Gaussian area and refinement order of a canonical shrinker"),
    "spectrum": ("jacobi-spectrum", "top eigenvalues and kernel of the weighted Jacobi operator"),
    "flow-run": ("rescaled-flow", "rescaled flow of a graph, with dissipation and decay diagnostics"),
    "scales-trace": ("scales", "shrinker, rough conical and conical scales along a flow"),
    "model-problem": ("model-problem", "recessive radial modes of the drift Laplacian on the plane"),
    "extension": ("cone-extension", "extension of annulus data to the cone space, seam defects and norms"),
    "loja-fit": ("entire-inequality", "log-log fit of the Gaussian-area gap against the gradient"),
    "final-loja": ("final-inequality", "final localized inequality along a stabilized flow"),
}


def _bool(s):
    t = s.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _choice(*opts):
    def parse(s):
        if s not in opts:
            raise ValueError(f"expected one of {opts}, got {s!r}")
        return s
    return parse


def _optional_str(s):
    return None if s.strip().lower() in ("", "none") else s


# key -> (parser, default)
SCHEMA = {
    "experiment": (_choice(*EXPERIMENTS), None),
    "seed": (int, 0),
    "output.dir": (_optional_str, None),
    "base.kind": (_choice("line", "circle", "plane", "sphere", "cylinder"), "line"),
    "base.n": (int, 1),
    "grid.h": (float, None),
    "grid.r_max": (float, None),
    "grid.n_theta": (int, None),
    "grid.n_t": (int, None),
    "flow.dtau": (float, 0.01),
    "flow.tau_end": (float, 2.0),
    "flow.mode": (_choice("explicit", "semi-implicit"), "semi-implicit"),
    "flow.stabilization": (_choice("none", "project-nonneg-modes"), "project-nonneg-modes"),
    "flow.record_every": (int, 1),
    "flow.track_scales": (_bool, False),
    "flow.theta_prime": (float, 1.0 / 6.0),
    "flow.window_start": (float, 0.5),
    "init.kind": (_choice("zero", "constant", "hermite", "eigen"), "hermite"),
    "init.amplitude": (float, 0.01),
    "init.index": (int, 2),
    "spectrum.count": (int, 5),
    "scales.ell": (int, 4),
    "scales.C_ell": (float, 10.0),
    "scales.beta0": (float, 0.05),
    "scales.b": (float, 1e-3),
    "scales.r_lower": (float, 5.0),
    "scales.s": (float, 0.1),
    "loja.theta": (float, 0.5),
    "loja.gamma": (float, 1.5),
    "loja.lambda0": (float, 1.5),
    "family.count": (int, 24),
    "family.shapes": (int, 4),
    "family.amp_lo": (float, 1e-4),
    "family.amp_hi": (float, 3e-3),
    "family.modes": (int, 4),
    "family.taper_radius": (float, 5.0),
    "family.kind": (_choice("stable", "kernel"), "stable"),
    "model.m": (int, 0),
    "model.r_max": (float, 120.0),
    "extension.R_tilde": (float, 6.0),
    "extension.datasets": (int, 20),
    "pseudolocality.epsilon0": (float, 0.1),
    "pseudolocality.rho_star": (float, 1.0),
}

DIMENSIONS = {"line": 1, "circle": 1, "plane": 2, "cylinder": 2}


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    @property
    def experiment(self):
        return self.values["experiment"]

    def canonical_text(self):
        """Sorted ``key = value`` lines; the hash is taken over this text."""
        lines = []
        for k in sorted(self.values):
            v = self.values[k]
            if isinstance(v, float):
                v = "%.17g" % v
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"

    def digest(self):
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()

    def to_json(self):
        return json.dumps(self.values, sort_keys=True)


def parse_config(text: str) -> ExperimentConfig:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise UsageError(f"line {lineno}: expected 'key = value'")
        key, val = (t.strip() for t in body.split("=", 1))
        if key not in SCHEMA:
            raise UsageError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise UsageError(f"line {lineno}: duplicate key {key!r}")
        try:
            parse, default = SCHEMA[key]
            # optional keys accept "none" so canonical text parses back
            raw[key] = (None if default is None and key != "experiment" and val.lower() == "none"
                        else parse(val))
        except ValueError as e:
            raise UsageError(f"line {lineno}: bad value for {key}: {e}") from None
    if "experiment" not in raw:
        raise UsageError("missing 'experiment'")
    values = {k: raw.get(k, default) for k, (_, default) in SCHEMA.items()}
    validate(values)
    return ExperimentConfig(values)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def validate(v):
    """Re-check the parameter constraints of the owning modules."""
    kind, n = v["base.kind"], v["base.n"]
    if kind == "sphere":
        if n not in (1, 2):
            raise InvalidArgumentError("sphere needs base.n in {1, 2}")
    elif DIMENSIONS[kind] != n:
        raise InvalidArgumentError(f"base.n must be {DIMENSIONS[kind]} for {kind}")
    if v["scales.r_lower"] <= math.sqrt(2 * n):
        raise InvalidArgumentError(f"scales.r_lower must exceed sqrt(2n) = {math.sqrt(2 * n):.4f}")
    if not 0 < v["loja.theta"] <= 0.5:
        raise InvalidArgumentError("loja.theta must lie in (0, 1/2]")
    if not 1 < v["loja.gamma"] < 2:
        raise InvalidArgumentError("loja.gamma must lie in (1, 2)")
    if not 0 < v["flow.theta_prime"] <= 1.0 / 6.0:
        raise InvalidArgumentError("flow.theta_prime must lie in (0, 1/6]")
    for key in ("flow.dtau", "flow.tau_end", "scales.C_ell", "scales.beta0", "scales.b",
                "scales.s", "family.amp_lo", "family.amp_hi", "model.r_max", "extension.R_tilde"):
        if not v[key] > 0:
            raise InvalidArgumentError(f"{key} must be positive")
    if v["flow.record_every"] < 1 or v["spectrum.count"] < 1 or v["family.count"] < 1:
        raise InvalidArgumentError("counts must be at least 1")
    if v["model.m"] < 0:
        raise InvalidArgumentError("model.m must be non-negative")
    if v["model.r_max"] < 50:
        raise InvalidArgumentError("model.r_max must be at least 50")
    if v["scales.ell"] < 1:
        raise InvalidArgumentError("scales.ell must be at least 1")
