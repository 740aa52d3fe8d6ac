"""Experiment configuration, run manifests and the optional on-disk cache.

Configs are plain ``key=value`` lines with ``#`` comments.  The canonical
serialization sorts keys, so the hash does not depend on the order in which
fields were written.
"""
from __future__ import annotations

import hashlib
import os
import pickle
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .errors import ParseError, ReduciblePair, ValidationError
from .rauzy import RauzyPath, is_irreducible, parse_pair, parse_path

__all__ = ["path_from_text", "ExperimentConfig", "RunManifest", "parse_config", "serialize_config",
           "config_hash", "manifest_line", "cache_dir", "cached"]

_LIST_KEYS = {"q": "q_list", "q_list": "q_list", "seeds": "seeds", "seed": "seeds"}
_INT_KEYS = {"cap", "n", "grid", "cutoff", "kmax", "threads"}
_FLOAT_KEYS = {"sigma", "t"}
_STR_KEYS = {"class": "class_spec", "class_spec": "class_spec", "gamma0": "gamma0_spec",
             "gamma0_spec": "gamma0_spec", "out": "output", "output": "output",
             "subspace": "subspace"}


def path_from_text(text: str, pair=None) -> RauzyPath:
    """Full path text (``start:..|moves:..``) or a bare move word at ``pair``."""
    if "|" in text:
        return parse_path(text)
    if pair is None:
        raise ValidationError("a bare move word needs a starting pair")
    return RauzyPath(pair, text.strip())


@dataclass
class ExperimentConfig:
    class_spec: str = "AB/BA"
    gamma0_spec: str = "auto"
    q_list: list = field(default_factory=lambda: [3])
    seeds: list = field(default_factory=lambda: [0])
    cap: int = 10**6
    n: int = 10_000
    grid: int = 64
    cutoff: int = 1000
    kmax: int = 20
    threads: int = 1
    sigma: float = 0.0
    t: float = 0.0
    subspace: str = "mean_zero"
    output: str = ""

    def validate(self) -> "ExperimentConfig":
        pair = parse_pair(self.class_spec)
        if not is_irreducible(pair):
            raise ReduciblePair(f"{self.class_spec} is reducible")
        if self.gamma0_spec != "auto":
            path_from_text(self.gamma0_spec, pair)
        if not self.q_list or any(q < 2 for q in self.q_list):
            raise ValidationError("every modulus q must be at least 2")
        for name in ("cap", "n", "grid", "cutoff", "kmax", "threads"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")
        if self.subspace not in ("full", "mean_zero", "new"):
            raise ValidationError(f"unknown subspace {self.subspace!r}")
        return self


def _parse_int_list(text: str, lineno: int) -> list:
    try:
        return [int(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError as exc:
        raise ParseError(f"expected a comma-separated integer list, got {text!r}", lineno) from exc


def parse_config(text: str) -> ExperimentConfig:
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected key=value, got {raw.strip()!r}", lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        if key in _LIST_KEYS:
            values[_LIST_KEYS[key]] = _parse_int_list(val, lineno)
        elif key in _INT_KEYS:
            try:
                values[key] = int(val)
            except ValueError as exc:
                raise ParseError(f"{key} must be an integer", lineno) from exc
        elif key in _FLOAT_KEYS:
            try:
                values[key] = float(val)
            except ValueError as exc:
                raise ParseError(f"{key} must be a number", lineno) from exc
        elif key in _STR_KEYS:
            values[_STR_KEYS[key]] = val
        else:
            raise ParseError(f"unknown key {key!r}", lineno)
    return ExperimentConfig(**values).validate()


def serialize_config(cfg: ExperimentConfig) -> str:
    lines = []
    for key, val in sorted(asdict(cfg).items()):
        if isinstance(val, list):
            val = ",".join(map(str, val))
        lines.append(f"{key}={val}")
    return "\n".join(lines) + "\n"


# fields that do not influence any computed number
_UNHASHED = ("output", "threads")


def config_hash(cfg: ExperimentConfig) -> str:
    """sha256 of the canonical form, without output-only fields."""
    text = "".join(line + "\n" for line in serialize_config(cfg).splitlines()
                   if line.split("=", 1)[0] not in _UNHASHED)
    return hashlib.sha256(text.encode()).hexdigest()


@dataclass
class RunManifest:
    config_hash: str
    tool_version: str = __version__
    started: float = field(default_factory=time.time)
    wall_time: float = 0.0
    records: list = field(default_factory=list)

    def record(self, command: str, **summary) -> None:
        self.records.append({"command": command, **summary})

    def finish(self) -> "RunManifest":
        self.wall_time = time.time() - self.started
        return self


def manifest_line(manifest: RunManifest, command: str = "") -> str:
    """First line of every output file."""
    return (f"# rauzy-lab {manifest.tool_version} config={manifest.config_hash}"
            + (f" command={command}" if command else ""))


# -- cache -------------------------------------------------------------------

def cache_dir() -> Path | None:
    path = os.environ.get("RAUZY_LAB_CACHE")
    if not path:
        return None
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def cached(key: str, compute):
    """Return ``compute()``, memoized under ``key`` when RAUZY_LAB_CACHE is set."""
    root = cache_dir()
    if root is None:
        return compute()
    fname = root / (hashlib.sha256(f"{__version__}:{key}".encode()).hexdigest() + ".pkl")
    if fname.exists():
        try:
            with open(fname, "rb") as fh:
                return pickle.load(fh)
        except (OSError, pickle.UnpicklingError, EOFError):
            fname.unlink(missing_ok=True)
    value = compute()
    tmp = fname.with_suffix(".tmp")
    with open(tmp, "wb") as fh:
        pickle.dump(value, fh)
    tmp.replace(fname)
    return value
