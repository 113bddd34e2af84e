"""Experiment configuration: flat INI sections with a fixed schema.

Example::

    [run]
    model = dumbbell
    engine = sde-inertial
    seed = 7
    t_final = 1.0

    [physics]
    kBT = 1.0
    spring = fene
    n0 = 3.0

Unknown sections or keys are rejected with their line number. Every field
has a default, so ``ExperimentConfig()`` is a valid Hookean run, and
``parse(cfg.to_text()) == cfg`` for every valid configuration.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

MODELS = ("dumbbell", "rod")
ENGINES = ("sde-inertial", "sde-overdamped", "fp-limit", "fp-inertial-reduced")
SPRINGS = ("hookean", "fene")
FLOWS = ("quiescent", "shear", "extension")


class ConfigError(ValueError):
    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.field, self.line = field, line


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(",", " ").split())


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class ExperimentConfig:
    # [run]
    model: str = field(default="dumbbell", metadata={"section": "run"})
    engine: str = field(default="sde-inertial", metadata={"section": "run"})
    seed: int = field(default=1, metadata={"section": "run"})
    t_final: float = field(default=1.0, metadata={"section": "run"})
    dt: float = field(default=0.01, metadata={"section": "run"})
    N: int = field(default=10_000, metadata={"section": "run"})
    n_samples: int = field(default=11, metadata={"section": "run"})
    # [physics]
    epsilon: float = field(default=0.5, metadata={"section": "physics"})
    zeta: float = field(default=1.0, metadata={"section": "physics"})
    zeta_t: float = field(default=1.0, metadata={"section": "physics"})
    zeta_r: float = field(default=1.0, metadata={"section": "physics"})
    kBT: float = field(default=1.0, metadata={"section": "physics"})
    L: float = field(default=float(np.sqrt(12.0)), metadata={"section": "physics"})
    dim: int = field(default=3, metadata={"section": "physics"})
    spring: str = field(default="hookean", metadata={"section": "physics"})
    H: float = field(default=1.0, metadata={"section": "physics"})
    n0: float = field(default=3.0, metadata={"section": "physics"})
    flow: str = field(default="quiescent", metadata={"section": "physics"})
    shear_rate: float = field(default=0.0, metadata={"section": "physics"})
    onsager_strength: float = field(default=0.0, metadata={"section": "physics"})
    x_noise: bool = field(default=True, metadata={"section": "physics"})
    # [numerics]
    l_max: int = field(default=16, metadata={"section": "numerics"})
    n_r: int = field(default=200, metadata={"section": "numerics"})
    n_theta: int = field(default=24, metadata={"section": "numerics"})
    n_phi: int = field(default=32, metadata={"section": "numerics"})
    n_cells: int = field(default=300, metadata={"section": "numerics"})
    n_modes: int = field(default=12, metadata={"section": "numerics"})
    # [init]
    n_init: tuple[float, ...] = field(default=(), metadata={"section": "init"})
    # [sweep]
    epsilons: tuple[float, ...] = field(default=(0.4, 0.2, 0.1), metadata={"section": "sweep"})
    sweep_engine: str = field(default="sde", metadata={"section": "sweep"})

    # schema ----------------------------------------------------------------
    @classmethod
    def schema(cls) -> dict[str, dict[str, type]]:
        out: dict[str, dict[str, type]] = {}
        types = {"int": int, "float": float, "str": str, "bool": bool, "tuple[float, ...]": tuple}
        for f in fields(cls):
            out.setdefault(f.metadata["section"], {})[f.name] = types[f.type]
        return out

    def to_text(self) -> str:
        lines = []
        for section, keys in self.schema().items():
            lines.append(f"[{section}]")
            for k in keys:
                lines.append(f"{k} = {_fmt(getattr(self, k))}")
            lines.append("")
        return "\n".join(lines)

    def validate(self) -> "ExperimentConfig":
        if self.model not in MODELS:
            raise ConfigError(f"must be one of {MODELS}", "model")
        if self.engine not in ENGINES:
            raise ConfigError(f"must be one of {ENGINES}", "engine")
        if self.spring not in SPRINGS:
            raise ConfigError(f"must be one of {SPRINGS}", "spring")
        if self.flow not in FLOWS:
            raise ConfigError(f"must be one of {FLOWS}", "flow")
        if self.sweep_engine not in ("sde", "fp-inertial-reduced"):
            raise ConfigError("must be sde or fp-inertial-reduced", "sweep_engine")
        for name in ("epsilon", "zeta", "zeta_t", "zeta_r", "H", "n0", "L"):
            if getattr(self, name) <= 0:
                raise ConfigError("must be positive", name)
        for name in ("kBT", "t_final", "dt"):
            if getattr(self, name) < 0:
                raise ConfigError("must be non-negative", name)
        if self.N < 1:
            raise ConfigError("must be at least 1", "N")
        if self.engine.startswith("sde") and self.N < 100:
            raise ConfigError("ensemble estimators need N >= 100", "N")
        if self.n_samples < 1:
            raise ConfigError("must be at least 1", "n_samples")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("must be an unsigned 64-bit integer", "seed")
        if self.dim not in (1, 2, 3):
            raise ConfigError("must be 1, 2 or 3", "dim")
        if self.model == "rod" and self.dim != 3:
            raise ConfigError("the rod model is three-dimensional", "dim")
        if self.engine == "fp-inertial-reduced" and self.model != "dumbbell":
            raise ConfigError("the reduced inertial solver is for the dumbbell", "engine")
        if self.n_init:
            n = np.asarray(self.n_init)
            if self.model == "rod" and n.size != 3:
                raise ConfigError("rod orientation needs 3 components", "n_init")
            if self.model == "dumbbell" and n.size != self.dim:
                raise ConfigError(f"needs {self.dim} components", "n_init")
            if self.model == "rod" and np.linalg.norm(n) == 0:
                raise ConfigError("orientation must be non-zero", "n_init")
            if self.model == "dumbbell" and self.spring == "fene" and np.linalg.norm(n) >= self.n0:
                raise ConfigError(f"|n_init| = {np.linalg.norm(n):g} must be below n0 = {self.n0:g}", "n_init")
        elif self.model == "dumbbell" and self.spring == "fene" and self.engine.startswith("sde"):
            raise ConfigError("FENE ensembles need an explicit n_init", "n_init")
        if any(e <= 0 for e in self.epsilons):
            raise ConfigError("must be positive", "epsilons")
        return self

    def hash(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()


def _key_lines(text: str) -> dict[tuple[str | None, str], int]:
    """Line number of every ``key = value`` entry, keyed by (section, key)."""
    out = {}
    section = None
    for i, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        if not s or s[0] in "#;":
            continue
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
            out[(section, None)] = i
        elif "=" in s:
            out[(section, s.split("=", 1)[0].strip())] = i
    return out


def parse(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keep units like kBT case-sensitive
    try:
        cp.read_string(text)
    except configparser.Error as err:
        raise ConfigError(str(err).splitlines()[0], line=getattr(err, "lineno", None)) from None
    lines = _key_lines(text)
    schema = ExperimentConfig.schema()
    values = {}
    for section in cp.sections():
        if section not in schema:
            raise ConfigError(f"unknown section [{section}]", line=lines.get((section, None)))
        for key, raw in cp.items(section):
            line = lines.get((section, key))
            if key not in schema[section]:
                raise ConfigError(f"unknown key in [{section}]", key, line)
            kind = schema[section][key]
            try:
                if kind is bool:
                    if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                        raise ValueError(raw)
                    values[key] = raw.lower() in ("true", "1", "yes")
                elif kind is tuple:
                    values[key] = _floats(raw)
                elif kind is int:
                    values[key] = int(raw)
                elif kind is float:
                    values[key] = float(raw)
                else:
                    values[key] = raw
            except ValueError:
                raise ConfigError(f"cannot read {raw!r} as {kind.__name__}", key, line) from None
    cfg = ExperimentConfig(**values)
    try:
        return cfg.validate()
    except ConfigError as err:
        key = err.field
        line = next((ln for (sec, k), ln in lines.items() if k == key), None)
        raise ConfigError(str(err).split(": ", 1)[-1], key, line) from None


def load(path: str | Path) -> tuple[ExperimentConfig, bytes]:
    """Parse a file; also returns its raw bytes for the run metadata hash."""
    raw = Path(path).read_bytes()
    return parse(raw.decode()), raw
