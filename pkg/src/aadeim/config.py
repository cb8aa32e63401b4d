"""Experiment configuration files.

Grammar (one item per line)::

    # comment            ; blank lines and lines starting with # or ; are ignored
    [section]            ; one of: model, method, run, study, grid
    key = value          ; value types are fixed per key, see SCHEMA

Lists are comma separated. Keys may appear once per section. Unknown
sections or keys are errors that report the line and column.
"""

import hashlib
import os
from dataclasses import dataclass, field

from .driver import AadeimConfig
from .errors import ConfigError
from .models import NewtonConfig, make_model


def _bool(s):
    v = s.lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _opt_int(s):
    return None if s.lower() in ("none", "never", "inf") else int(s)


def _floats(s):
    return tuple(float(v) for v in s.split(","))


def _ints(s):
    return tuple(int(v) for v in s.split(","))


def _choice(*options):
    def parse(s):
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {s!r}")
        return s
    parse.__name__ = "choice"
    return parse


SCHEMA = {
    "model": {
        "kind": (_choice("advection", "burgers"), None),
        "N": (int, None),
        "dt": (float, None),
        "T": (float, None),
        "mu": (float, None),
    },
    "method": {
        "kind": (_choice("full", "static", "aadeim", "fullsvd", "study"), None),
        "n": (int, 8),
        "w_init": (int, 100),
        "w": (int, None),
        "m": (int, None),
        "z": (int, 5),
        "r": (int, 1),
        "adapt_every": (_opt_int, 1),
        "sampling": (_choice("adaptive", "uniform"), "adaptive"),
        "snapshot_every": (int, 1),
        "newton_iterations": (int, 15),
        "newton_step": (float, 1.0),
        "train_mu": (_floats, None),
        "svd_adapt_every": (_opt_int, 3),
        "eval_every": (int, 1),
    },
    "run": {
        "seed": (int, 0),
        "K": (int, None),
        "reference": (_bool, True),
        "error_schedule": (str, "standard"),
        "trajectory_every": (int, 1),
        "format": (_choice("csv", "bin", "both"), "csv"),
    },
    "study": {
        "kind": (_choice("locality", "coherence", "appendixA", "bounds"), None),
        "n": (int, 3),
        "w": (int, 25),
        "at_steps": (_ints, None),
        "global_stride": (int, 1),
        "span": (int, 100),
        "m_values": (_ints, (8, 16, 32, 64, 128, 256)),
        "ranks": (_ints, None),
        "N": (int, 20000),
        "n_times": (int, 400),
        "t_max": (_floats, (1.0, 0.5, 0.25, 0.125)),
    },
    "grid": {
        "mu": (_floats, None),
        "m": (_ints, None),
        "m_frac": (_floats, None),
        "n": (_ints, None),
        "z": (_ints, None),
    },
}


def parse_text(text, sections=None):
    """Parse config text into ``{section: {key: value}}`` (only keys present)."""
    sections = sections or SCHEMA
    out = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped[0] in "#;":
            continue
        indent = len(raw) - len(raw.lstrip())
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ConfigError("unterminated section header", lineno, indent + 1)
            name = stripped[1:-1].strip()
            if name not in sections:
                raise ConfigError(f"unknown section [{name}]", lineno, indent + 2)
            if name in out:
                raise ConfigError(f"duplicate section [{name}]", lineno, indent + 2)
            current = name
            out[name] = {}
            continue
        if "=" not in raw:
            raise ConfigError("expected 'key = value'", lineno, indent + 1)
        if current is None:
            raise ConfigError("key outside of a section", lineno, indent + 1)
        key_part, value_part = raw.split("=", 1)
        key = key_part.strip()
        if key not in sections[current]:
            raise ConfigError(f"unknown key {key!r} in [{current}]", lineno, indent + 1)
        if key in out[current]:
            raise ConfigError(f"duplicate key {key!r}", lineno, indent + 1)
        value = value_part.strip()
        vcol = len(key_part) + 2 + (len(value_part) - len(value_part.lstrip()))
        if not value:
            raise ConfigError(f"missing value for {key!r}", lineno, vcol)
        parser = sections[current][key][0]
        try:
            out[current][key] = parser(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", lineno, vcol) from None
    return out


def _canonical(parsed):
    lines = []
    for sec in sorted(parsed):
        lines.append(f"[{sec}]")
        lines.extend(f"{k}={parsed[sec][k]!r}" for k in sorted(parsed[sec]))
    return "\n".join(lines)


def config_hash(parsed):
    return hashlib.sha256(_canonical(parsed).encode()).hexdigest()[:16]


def _with_defaults(section, values):
    merged = {k: default for k, (_, default) in SCHEMA[section].items()}
    merged.update(values)
    return merged


@dataclass
class ExperimentConfig:
    """Validated experiment description.

    `parsed` holds only the keys present in the file (plus a seed override
    from ``AADEIM_SEED``); the typed sections below carry defaults.
    """

    parsed: dict
    model: dict
    method: dict
    run: dict
    study: dict = field(default_factory=dict)

    @property
    def seed(self):
        return self.run["seed"]

    @property
    def hash(self):
        return config_hash(self.parsed)

    @property
    def kind(self):
        return self.method["kind"]

    def build_model(self, mu=None):
        params = {k: self.model[k] for k in ("N", "dt", "T", "mu") if self.model[k] is not None}
        if mu is not None:
            params["mu"] = mu
        return make_model(self.model["kind"], **params)

    @property
    def newton(self):
        return NewtonConfig(self.method["newton_iterations"], self.method["newton_step"])

    @property
    def steps(self):
        return self.run["K"] or self.build_model().K

    def aadeim_config(self, **overrides):
        m = self.method
        kw = dict(n=m["n"], w_init=m["w_init"], m=m["m"] if m["m"] is not None else 0, w=m["w"],
                  z=m["z"], r=m["r"], adapt_every=m["adapt_every"], newton=self.newton,
                  seed=self.seed, sampling=m["sampling"], snapshot_every=m["snapshot_every"])
        kw.update(overrides)
        return AadeimConfig(**kw)

    def replace(self, method=None, model=None):
        """Copy with overridden method/model entries (used by sweeps)."""
        parsed = {s: dict(v) for s, v in self.parsed.items()}
        for sec, upd in (("method", method), ("model", model)):
            if upd:
                parsed.setdefault(sec, {}).update(upd)
        return build_config(parsed)

    def validate(self):
        try:
            model = self.build_model()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[model] {exc}") from None
        if self.model["dt"] is not None and self.model["dt"] <= 0:
            raise ConfigError("[model] dt must be positive")
        K = self.run["K"] or model.K
        kind = self.kind
        if kind != "study" and not K:
            raise ConfigError("number of steps unknown: set [model] T or [run] K")
        if self.run["trajectory_every"] < 1:
            raise ConfigError("[run] trajectory_every must be positive")
        sched = self.run["error_schedule"]
        if sched not in ("standard", "all") and not sched.isdigit():
            raise ConfigError("[run] error_schedule must be standard, all or a stride")
        if kind in ("aadeim", "fullsvd"):
            if kind == "aadeim" and self.method["m"] is None and self.method["adapt_every"] is not None:
                raise ConfigError("[method] m is required for aadeim")
            cfg = self.aadeim_config() if kind == "aadeim" else self.aadeim_config(adapt_every=None)
            cfg.validate(model.N)
            if cfg.w_init >= K:
                raise ConfigError(f"w_init={cfg.w_init} must be smaller than K={K}")
        if kind == "static" and not self.method["train_mu"]:
            raise ConfigError("[method] train_mu is required for static")
        return self


def build_config(parsed):
    env_seed = os.environ.get("AADEIM_SEED")
    parsed = {s: dict(v) for s, v in parsed.items()}
    if env_seed is not None:
        try:
            parsed.setdefault("run", {})["seed"] = int(env_seed)
        except ValueError:
            raise ConfigError(f"AADEIM_SEED must be an integer, got {env_seed!r}") from None
    for sec in ("model", "method"):
        if sec not in parsed:
            raise ConfigError(f"missing section [{sec}]")
        if "kind" not in parsed[sec]:
            raise ConfigError(f"[{sec}] kind is required")
    cfg = ExperimentConfig(
        parsed,
        _with_defaults("model", parsed["model"]),
        _with_defaults("method", parsed["method"]),
        _with_defaults("run", parsed.get("run", {})),
        _with_defaults("study", parsed.get("study", {})) if "study" in parsed else {},
    )
    return cfg.validate()


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return build_config(parse_text(text))


def load_grid(path):
    """Parameter grid for sweeps: ``[grid]`` with list values."""
    with open(path) as fh:
        parsed = parse_text(fh.read(), {"grid": SCHEMA["grid"]})
    grid = parsed.get("grid", {})
    if "m" in grid and "m_frac" in grid:
        raise ConfigError("[grid] give either m or m_frac, not both")
    return grid
