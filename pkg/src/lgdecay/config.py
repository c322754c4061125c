"""Run configuration: TOML documents, validation and model construction.

A document has top-level run keys, a ``[model]`` table (kind plus
parameters) and a ``[params]`` table for the chosen command::

    command = "scan-line"
    output = "fig3_toy.csv"
    format = "csv"
    normalize = true

    [model]
    kind = "toy"
    gamma = 1.0
    alpha = 2.0

    [params]
    t1 = 0.0
    ratio = 2.0
    t2_max = 3.0

Unknown keys are errors.  Defaults are filled in on parsing, so a parsed
config serializes to a complete document that parses back to an equal
config.

Tunneling inputs may be physical: the engine uses ``a / a_unit`` and
``V0 / V0_unit``.  The bundled reproduction configs take the quoted
experimental values (a = 4200 m s^-2, V0 = 100 kHz/h) as the units, i.e.
internal a = V0 = 1.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any

import tomli
import tomli_w

from .decay_models import (
    DEFAULT_FIT_SAMPLES,
    DEFAULT_FIT_WINDOW,
    MODEL_KINDS,
    DecayModel,
    Tunneling,
    fit_effective_lifetime,
    make_model,
)
from .errors import ConfigParseError, ConfigurationError, LGDecayError

__all__ = ["RunConfig", "COMMANDS", "parse_config", "load_config", "Prepared", "prepare_model"]

REQUIRED = object()

# name -> (type, default); type is float, int, bool, str, a tuple of choices or "floats"
COMMANDS: dict[str, dict[str, tuple[Any, Any]]] = {
    "survival": {"t_max": (float, 10.0), "samples": (int, 400)},
    "k3": {"t1": (float, REQUIRED), "t2": (float, REQUIRED), "t3": (float, REQUIRED),
           "ontology": (("quantum", "classical"), "quantum")},
    "scan-line": {"t1": (float, 0.0), "ratio": (float, 2.0), "t2_min": (float, None),
                  "t2_max": (float, 3.0), "n_points": (int, 300)},
    "scan-grid": {"t1": (float, 0.0), "t2_min": (float, None), "t2_max": (float, 6.0), "n_t2": (int, 200),
                  "t3_min": (float, None), "t3_max": (float, 6.0), "n_t3": (int, 200)},
    "mc": {"times": ("floats", REQUIRED), "ontology": (("collapse", "realist", "clock_reset"), "collapse"),
           "n_trials": (int, 1_000_000), "seed": (int, 0), "estimate": (("joint", "k3"), "joint"),
           "protocol": (("pairwise", "sequential"), "pairwise")},
    "fit": {"window": ("floats", list(DEFAULT_FIT_WINDOW)), "samples": (int, DEFAULT_FIT_SAMPLES)},
}

JSON_ONLY = {"mc", "fit"}

TOP_KEYS: dict[str, tuple[Any, Any]] = {
    "command": (tuple(COMMANDS), REQUIRED),
    "output": (str, None),
    "format": (("csv", "json"), "csv"),
    "normalize": (bool, False),
    "workers": (int, 1),
    "record_timing": (bool, False),
}

# model keys handled here rather than by the model class
_COMMON_MODEL_KEYS = {"time_unit": (float, None), "fit_window": ("floats", list(DEFAULT_FIT_WINDOW)),
                      "fit_samples": (int, DEFAULT_FIT_SAMPLES)}
_TUNNELING_EXTRA = {"a_unit": (float, 1.0), "V0_unit": (float, 1.0), "direct": (bool, False),
                    "n_grid": (int, 1024)}


def _model_schema(kind: str) -> dict[str, tuple[Any, Any]]:
    if kind == "tabulated":
        return {"file": (str, REQUIRED), **_COMMON_MODEL_KEYS}
    cls = MODEL_KINDS[kind]
    schema = {}
    for f in dataclasses.fields(cls):
        if not f.init or f.name == "time_unit":
            continue
        default = f.default if f.default is not dataclasses.MISSING else REQUIRED
        typ = int if f.name == "n_table" else float
        schema[f.name] = (typ, default)
    if kind == "tunneling":
        schema.update(_TUNNELING_EXTRA)
    schema.update(_COMMON_MODEL_KEYS)
    return schema


def _coerce(key: str, value: Any, typ: Any) -> Any:
    if typ is bool:
        if not isinstance(value, bool):
            raise ConfigurationError(f"expected true/false, got {value!r}", key=key)
        return value
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"expected an integer, got {value!r}", key=key)
        return value
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"expected a number, got {value!r}", key=key)
        return float(value)
    if typ is str:
        if not isinstance(value, str):
            raise ConfigurationError(f"expected a string, got {value!r}", key=key)
        return value
    if typ == "floats":
        if not isinstance(value, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            raise ConfigurationError(f"expected a list of numbers, got {value!r}", key=key)
        return [float(v) for v in value]
    if isinstance(typ, tuple):
        if value not in typ:
            raise ConfigurationError(f"expected one of {list(typ)}, got {value!r}", key=key)
        return value
    raise AssertionError(typ)


def _fill(table: dict, schema: dict, prefix: str) -> dict:
    unknown = sorted(set(table) - set(schema))
    if unknown:
        raise ConfigurationError("unknown key", key=prefix + unknown[0])
    out = {}
    for key, (typ, default) in schema.items():
        if key in table:
            out[key] = _coerce(prefix + key, table[key], typ)
        elif default is REQUIRED:
            raise ConfigurationError("missing required key", key=prefix + key)
        else:
            out[key] = list(default) if isinstance(default, list) else default
    return out


@dataclass
class RunConfig:
    command: str
    model: dict[str, Any]
    params: dict[str, Any]
    output: str | None = None
    format: str = "csv"
    normalize: bool = False
    workers: int = 1
    record_timing: bool = False

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        doc = dict(doc)
        model = doc.pop("model", None)
        params = doc.pop("params", {})
        top = _fill(doc, TOP_KEYS, "")
        if not isinstance(model, dict):
            raise ConfigurationError("missing [model] table", key="model")
        if not isinstance(params, dict):
            raise ConfigurationError("must be a table", key="params")
        kind = model.get("kind")
        if kind not in MODEL_KINDS:
            raise ConfigurationError(f"unknown model kind {kind!r}; expected one of {sorted(MODEL_KINDS)}", key="model.kind")
        model_body = {k: v for k, v in model.items() if k != "kind"}
        model_cfg = {"kind": kind, **_fill(model_body, _model_schema(kind), "model.")}
        params_cfg = _fill(params, COMMANDS[top["command"]], "params.")
        if top["workers"] < 1:
            raise ConfigurationError("must be >= 1", key="workers")
        if top["command"] in JSON_ONLY and top["format"] != "json":
            if "format" in doc:
                raise ConfigurationError(f"command {top['command']!r} writes JSON only", key="format")
            top["format"] = "json"
        cfg = cls(model=model_cfg, params=params_cfg, **top)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        """Range checks that need more than a type; builds the model once."""
        p = self.params
        if self.command == "survival":
            if not p["t_max"] > 0:
                raise ConfigurationError("must be > 0", key="params.t_max")
            if p["samples"] < 2:
                raise ConfigurationError("must be >= 2", key="params.samples")
        if self.command == "scan-line" and not p["ratio"] > 1:
            raise ConfigurationError("must be > 1", key="params.ratio")
        if self.command == "mc":
            if len(p["times"]) not in (2, 3):
                raise ConfigurationError("need 2 or 3 times", key="params.times")
            if p["estimate"] == "k3" and len(p["times"]) != 3:
                raise ConfigurationError("k3 estimate needs 3 times", key="params.times")
            if p["n_trials"] < 1:
                raise ConfigurationError("must be >= 1", key="params.n_trials")
            if not 0 <= p["seed"] < 2**64:
                raise ConfigurationError("must be a 64-bit unsigned integer", key="params.seed")
        for key in ("window",):
            if key in p and len(p[key]) != 2:
                raise ConfigurationError("expected [start, end]", key=f"params.{key}")
        if len(self.model["fit_window"]) != 2:
            raise ConfigurationError("expected [start, end]", key="model.fit_window")
        build_base_model(self.model)

    def to_dict(self, include_runtime: bool = True) -> dict:
        """Plain dict with None entries dropped; ``include_runtime=False`` omits ``workers``."""
        top = {k: getattr(self, k) for k in TOP_KEYS if getattr(self, k) is not None}
        if not include_runtime:
            top.pop("workers", None)
        drop_none = lambda d: {k: v for k, v in d.items() if v is not None}
        return {**top, "model": drop_none(self.model), "params": drop_none(self.params)}

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())


def parse_config(text: str) -> RunConfig:
    """Parse and validate a TOML run configuration."""
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigParseError(str(exc), line=getattr(exc, "lineno", None)) from None
    return RunConfig.from_dict(doc)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def build_base_model(model_cfg: dict) -> DecayModel:
    """The model exactly as configured (tunneling inputs mapped to internal units)."""
    kind = model_cfg["kind"]
    body = {k: v for k, v in model_cfg.items() if k not in ("kind", *(_COMMON_MODEL_KEYS))}
    extra = {}
    if model_cfg.get("time_unit") is not None:
        extra["time_unit"] = model_cfg["time_unit"]
    try:
        if kind == "tabulated":
            from .tunneling import tabulated_from_csv

            try:
                model = tabulated_from_csv(body["file"])
            except OSError as exc:
                raise ConfigurationError(str(exc), key="model.file") from None
            return model.with_time_unit(extra["time_unit"]) if extra else model
        if kind == "tunneling":
            for unit in ("a_unit", "V0_unit"):
                if not body[unit] > 0:
                    raise ConfigurationError("must be > 0", key=f"model.{unit}")
            body["a"] = body["a"] / body.pop("a_unit")
            body["V0"] = body["V0"] / body.pop("V0_unit")
            body.pop("direct")
            body.pop("n_grid")
        return make_model(kind, **body, **extra)
    except ConfigurationError as exc:
        if exc.key and not exc.key.startswith("model."):
            raise ConfigurationError(str(exc).split(": ", 1)[-1], key=f"model.{exc.key}") from None
        raise


@dataclass
class Prepared:
    """Configured model, the model used for evaluation, and the time unit applied."""

    base: DecayModel
    model: DecayModel
    tau: float = 1.0
    notes: list[str] = field(default_factory=list)


def prepare_model(cfg: RunConfig) -> Prepared:
    """Build the evaluation model for a run.

    Tunneling laws go through their tabulated interpolant unless
    ``model.direct`` is set.  With ``normalize`` the time unit is
    ``model.time_unit`` when given, otherwise the fitted effective lifetime.
    """
    base = build_base_model(cfg.model)
    model = base
    notes = []
    if isinstance(base, Tunneling) and not cfg.model["direct"]:
        from .tunneling import build_p_interpolant

        model = build_p_interpolant(base.tunneling_params, base.t_max, cfg.model["n_grid"], wtable=base.wtable)
        notes.append(f"tunneling law evaluated through a {cfg.model['n_grid']}-node interpolant")
    tau = 1.0
    if cfg.normalize:
        if cfg.model.get("time_unit") is not None:
            tau = float(cfg.model["time_unit"])
        else:
            tau = fit_effective_lifetime(model, window=tuple(cfg.model["fit_window"]), samples=cfg.model["fit_samples"])
    model = model.with_time_unit(tau) if model.time_unit != tau else model
    return Prepared(base=base, model=model, tau=tau, notes=notes)


def split_override(key: str) -> tuple[str, str]:
    """Map a CLI flag name to (section, key): 'model.gamma' -> ('model', 'gamma')."""
    if key.startswith("model."):
        return "model", key[len("model."):]
    if key.startswith("params."):
        return "params", key[len("params."):]
    if key in TOP_KEYS:
        return "", key
    return "params", key


def apply_overrides(doc: dict, overrides: list[tuple[str, Any]]) -> dict:
    doc = {k: (dict(v) if isinstance(v, dict) else v) for k, v in doc.items()}
    for key, value in overrides:
        section, name = split_override(key)
        if section:
            doc.setdefault(section, {})[name] = value
        else:
            doc[name] = value
    return doc


def parse_document(text: str) -> dict:
    try:
        return tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigParseError(str(exc), line=getattr(exc, "lineno", None)) from None


def parse_value(text: str) -> Any:
    """A CLI value as a TOML literal when it is one, else as a bare string."""
    try:
        return tomli.loads(f"v = {text}")["v"]
    except tomli.TOMLDecodeError:
        return text


__all__ += ["build_base_model", "apply_overrides", "parse_document", "parse_value", "LGDecayError"]
