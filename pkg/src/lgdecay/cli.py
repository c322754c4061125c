"""Command-line entry point.

::

    lgdecay survival --model.kind toy --t_max 10 -o toy.csv
    lgdecay scan-grid --config fig4.toml --workers 4
    lgdecay run fig4.toml --params.n_t2 100
    lgdecay reproduce --outdir out/

Any config key can be given as a flag: ``--model.<key>`` for the model
table, ``--<top-level key>`` for run keys and ``--<key>`` (or
``--params.<key>``) for command parameters.  Values are read as TOML
literals (``--times "[1.0, 2.0]"``); flags override the config file.

Exit status: 0 on success, 2 for configuration or domain errors, 3 for
numerical failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

from . import __version__
from .config import COMMANDS, RunConfig, apply_overrides, parse_document, parse_value
from .errors import (
    ConfigurationError,
    DomainError,
    FitError,
    HorizonError,
    InvalidOntologyError,
    LGDecayError,
    NumericalFailure,
)
from .export import sha256_file, write_text
from .runner import execute

__all__ = ["main", "EXIT_OK", "EXIT_CONFIG", "EXIT_NUMERICAL", "reproduce_configs"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, (NumericalFailure, FitError, HorizonError)):
        return EXIT_NUMERICAL
    if isinstance(exc, (ConfigurationError, DomainError, InvalidOntologyError, ValueError, OSError)):
        return EXIT_CONFIG
    return EXIT_NUMERICAL


def _overrides(extra: list[str]) -> list[tuple[str, object]]:
    out = []
    i = 0
    while i < len(extra):
        arg = extra[i]
        if not arg.startswith("--") or len(arg) == 2:
            raise ConfigurationError(f"unexpected argument {arg!r}", key=arg)
        if "=" in arg:
            key, raw = arg[2:].split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise ConfigurationError("flag needs a value", key=arg[2:])
            key, raw = arg[2:], extra[i + 1]
            i += 2
        out.append((key.replace("-", "_") if not key.startswith("model.") else key, parse_value(raw)))
    return out


def _build_config(command: str | None, config_path: str | None, overrides) -> RunConfig:
    doc = {}
    if config_path:
        try:
            text = Path(config_path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigurationError(str(exc), key="config") from None
        doc = parse_document(text)
    if command is not None:
        if "command" in doc and doc["command"] != command:
            raise ConfigurationError(f"file says {doc['command']!r}, command line says {command!r}", key="command")
        doc["command"] = command
    return RunConfig.from_dict(apply_overrides(doc, overrides))


def _emit(cfg: RunConfig, outdir: Path | None = None, stdout=None) -> Path | None:
    result = execute(cfg)
    for note in result.notes:
        print(f"lgdecay: {note}", file=sys.stderr)
    if cfg.output is None:
        (stdout or sys.stdout).write(result.text)
        return None
    path = Path(cfg.output) if outdir is None else outdir / cfg.output
    write_text(path, result.text)
    return path


def reproduce_configs() -> list[tuple[str, str]]:
    """Bundled figure configs as (file name, TOML text), in run order."""
    folder = resources.files("lgdecay") / "configs"
    items = sorted((p.name, p.read_text(encoding="utf-8")) for p in folder.iterdir() if p.name.endswith(".toml"))
    return items


def _reproduce(outdir: Path, workers: int) -> int:
    outdir.mkdir(parents=True, exist_ok=True)
    entries = []
    for name, text in reproduce_configs():
        cfg = RunConfig.from_dict(apply_overrides(parse_document(text), [("workers", workers)]))
        write_text(outdir / name, text)
        print(f"lgdecay: {name} -> {cfg.output}", file=sys.stderr)
        path = _emit(cfg, outdir)
        entries.append({"config": name, "config_sha256": sha256_file(outdir / name),
                        "output": cfg.output, "output_sha256": sha256_file(path)})
    manifest = {"tool": "lgdecay", "version": __version__, "runs": entries}
    write_text(outdir / "manifest.json", json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lgdecay", description="Leggett-Garg strings for unstable systems.", allow_abbrev=False)
    parser.add_argument("--version", action="version", version=f"lgdecay {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} command", allow_abbrev=False)
        p.add_argument("--config", help="TOML config file; flags override its values")
        p.add_argument("-o", "--output", dest="output_flag", help="output file (default: stdout)")
    p = sub.add_parser("run", help="run a TOML config file", allow_abbrev=False)
    p.add_argument("config")
    p.add_argument("-o", "--output", dest="output_flag")
    p = sub.add_parser("reproduce", help="run the bundled figure configs and write a manifest")
    p.add_argument("--outdir", required=True)
    p.add_argument("--workers", type=int, default=1)
    return parser


def main(argv: list[str] | None = None, stdout=None) -> int:
    parser = _parser()
    args, extra = parser.parse_known_args(argv)
    try:
        if args.command == "reproduce":
            if extra:
                raise ConfigurationError(f"unexpected arguments {extra!r}", key="reproduce")
            return _reproduce(Path(args.outdir), args.workers)
        overrides = _overrides(extra)
        if args.output_flag is not None:
            overrides.append(("output", args.output_flag))
        command = None if args.command == "run" else args.command
        cfg = _build_config(command, args.config, overrides)
        _emit(cfg, stdout=stdout)
        return EXIT_OK
    except (LGDecayError, ValueError, OSError) as exc:
        print(f"lgdecay: error: {exc}", file=sys.stderr)
        return _exit_code(exc)


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    main_entry()
