"""INI case configuration: schema, defaults, validation and hashing."""

from __future__ import annotations

import configparser
import hashlib
import json
import os
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..operators.flow import TRANSPORT_MODES
from ..verify.cases import CAVITY_LAMBDA, CAVITY_PR, CAVITY_RA, NS_LAMBDA
from ..verify.runner import MESH_FAMILIES

OUTPUT_ENV = "POLYFV_OUTPUT_DIR"
CASE_NAMES = ("poisson_linear", "poisson_trig", "ns_manufactured", "cavity")
LINEAR_METHODS = ("auto", "direct", "pardiso", "gmres")


class ConfigError(ValueError):
    """Invalid configuration; the message names the file line when known."""


@dataclass
class CaseConfig:
    case: str = "poisson_trig"
    dim: int = 3
    family: str = "uniform"
    N: int = 8
    seed: int = 0
    amplitude: float = 0.45
    Pr: float = 1.0
    Ra: float = 0.0
    lam: float = 0.0
    transport: str = "centered"
    omega: float = 0.8
    omega_max: float = 1.0
    atol: float = 1e-10
    rtol: float = 1e-12
    max_iter: int = 100
    linear: str = "auto"
    ladder: list = field(default_factory=list)
    levels: list = field(default_factory=list)
    output: str = "output"
    vtk: bool = True
    dump_matrix: bool = False
    source: str = ""

    def hashed_fields(self) -> dict:
        """Everything that influences results (not the output location)."""
        d = asdict(self)
        for k in ("output", "source"):
            d.pop(k)
        return d

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.hashed_fields(), sort_keys=True, default=repr)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def output_dir(self) -> Path:
        return Path(os.environ.get(OUTPUT_ENV) or self.output)


# section -> key -> (attribute, parser)
def _floats(text):
    return [float(t) for t in re.split(r"[,\s]+", text.strip()) if t]


def _ints(text):
    return [int(t) for t in re.split(r"[,\s]+", text.strip()) if t]


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "yes", "true", "on"):
        return True
    if t in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


SCHEMA = {
    "case": {"name": ("case", str), "dim": ("dim", int)},
    "mesh": {"family": ("family", str), "n": ("N", int), "seed": ("seed", int), "amplitude": ("amplitude", float)},
    "physics": {"pr": ("Pr", float), "ra": ("Ra", float), "lambda": ("lam", float), "transport": ("transport", str)},
    "solver": {
        "omega": ("omega", float),
        "omega_max": ("omega_max", float),
        "atol": ("atol", float),
        "rtol": ("rtol", float),
        "max_iter": ("max_iter", int),
        "linear": ("linear", str),
        "ladder": ("ladder", _floats),
    },
    "study": {"levels": ("levels", _ints)},
    "output": {"directory": ("output", str), "vtk": ("vtk", _bool), "dump_matrix": ("dump_matrix", _bool)},
}

CASE_DEFAULTS = {
    "cavity": {"Pr": CAVITY_PR, "Ra": CAVITY_RA, "lam": CAVITY_LAMBDA, "family": "gauss_lobatto", "N": 20},
    "ns_manufactured": {"lam": NS_LAMBDA},
}


def _line_of(text: str, section: str, key: str | None = None) -> int | None:
    """1-based line of ``[section]`` or of ``key`` inside it."""
    current = None
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip().lower()
            if key is None and current == section:
                return i
            continue
        if current == section and key is not None:
            k = re.split(r"[=:]", line, maxsplit=1)[0].strip().lower()
            if k == key:
                return i
    return None


def _where(path, text, section, key=None) -> str:
    line = _line_of(text, section, key)
    return f"{path}:{line}" if line else str(path)


def parse_config(path) -> CaseConfig:
    """Read and validate an INI case file; every key is optional."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        cp.read_string(text, source=str(path))
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: missing [section] header") from exc
    except configparser.ParsingError as exc:
        lines = ", ".join(f"line {ln}" for ln, _ in exc.errors)
        raise ConfigError(f"{path}: malformed config ({lines})") from exc
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(f"{path}:{line or '?'}: {exc.message if hasattr(exc, 'message') else exc}") from exc

    values = {}
    for section in cp.sections():
        sec = section.lower()
        if sec not in SCHEMA:
            raise ConfigError(f"{_where(path, text, sec)}: unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"{_where(path, text, sec, key)}: unknown key {key!r} in [{section}]")
            attr, conv = SCHEMA[sec][key]
            try:
                values[attr] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"{_where(path, text, sec, key)}: bad value for {key}: {exc}") from exc

    case = values.get("case", CaseConfig.case)
    base = {**CASE_DEFAULTS.get(case, {}), **values}
    cfg = CaseConfig(**base, source=str(path))
    _validate(cfg, lambda sec, key=None: _where(path, text, sec, key))
    return cfg


def _validate(cfg: CaseConfig, where) -> None:
    def check(ok, sec, key, msg):
        if not ok:
            raise ConfigError(f"{where(sec, key)}: {msg}")

    check(cfg.case in CASE_NAMES, "case", "name", f"case must be one of {CASE_NAMES}")
    check(cfg.dim in (2, 3), "case", "dim", "dim must be 2 or 3")
    check(cfg.family in MESH_FAMILIES, "mesh", "family", f"family must be one of {MESH_FAMILIES}")
    check(cfg.dim == 3 or cfg.family not in ("smooth", "cone"), "mesh", "family",
          f"family {cfg.family!r} is three-dimensional only")
    check(cfg.N >= 1, "mesh", "n", "N must be a positive integer")
    check(0.0 <= cfg.amplitude < 0.5, "mesh", "amplitude", "amplitude must lie in [0, 0.5)")
    check(cfg.Pr > 0, "physics", "pr", "Pr must be positive")
    check(cfg.Ra >= 0, "physics", "ra", "Ra must be non-negative")
    check(cfg.lam >= 0, "physics", "lambda", "lambda must be non-negative")
    check(cfg.transport in TRANSPORT_MODES, "physics", "transport", f"transport must be one of {TRANSPORT_MODES}")
    check(0 < cfg.omega <= cfg.omega_max <= 1, "solver", "omega", "need 0 < omega <= omega_max <= 1")
    check(cfg.atol > 0 and cfg.rtol > 0, "solver", "atol", "tolerances must be positive")
    check(cfg.max_iter >= 1, "solver", "max_iter", "max_iter must be positive")
    check(cfg.linear in LINEAR_METHODS, "solver", "linear", f"linear must be one of {LINEAR_METHODS}")
    if cfg.ladder:
        check(all(b > a for a, b in zip(cfg.ladder, cfg.ladder[1:])), "solver", "ladder",
              "continuation ladder must be strictly ascending")
        check(cfg.ladder[-1] == cfg.Ra, "solver", "ladder", "continuation ladder must end at Ra")
    if cfg.case == "cavity":
        check(cfg.family != "cone", "mesh", "family", "cavity needs a box mesh")
    if cfg.levels:
        check(len(cfg.levels) >= 3, "study", "levels", "a study needs at least 3 levels")
