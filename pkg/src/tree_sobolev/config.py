"""Run configuration: weight specs, JSON round trip and digests."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .tree_core import TreeWeights, check_height, n_leaves

COMMANDS = ("extend", "simulate", "kernels", "opnorm", "report", "verify")
FORMATS = ("json", "csv")
STOCHASTIC = ("simulate", "opnorm", "report")
DEFAULT_TRIALS = 100_000
DEFAULT_SAMPLES = 200


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


def canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class WeightSpec:
    """A weight family: unit, dyadic ``c 2^-k``, geometric ``c beta^k`` or explicit."""

    kind: str
    c: float = 1.0
    beta: float | None = None
    W: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("unit", "dyadic", "geometric", "explicit"):
            raise ConfigError(f"unknown weight kind {self.kind!r}")
        if self.kind == "geometric" and (self.beta is None or not self.beta > 0):
            raise ConfigError("geometric weights need a positive beta")
        if self.kind == "explicit":
            if not self.W:
                raise ConfigError("explicit weights need a non-empty W list")
            W = tuple(float(w) for w in self.W)
            if not all(np.isfinite(W)) or min(W) <= 0:
                raise ConfigError("explicit weights must be positive and finite")
            object.__setattr__(self, "W", W)
        if not (np.isfinite(self.c) and self.c > 0):
            raise ConfigError("weight scale c must be positive")
        object.__setattr__(self, "c", float(self.c))
        if self.beta is not None:
            object.__setattr__(self, "beta", float(self.beta))

    @classmethod
    def parse(cls, text: str) -> "WeightSpec":
        """``unit``, ``dyadic[:c]``, ``geometric:beta[:c]``, ``explicit:w1,w2,..``
        or a path to a JSON file holding ``{"N", "W"}`` or a spec object."""
        text = text.strip()
        head, _, rest = text.partition(":")
        try:
            if head == "unit" and not rest:
                return cls("unit")
            if head == "dyadic":
                return cls("dyadic", c=float(rest) if rest else 1.0)
            if head == "geometric":
                parts = rest.split(":")
                if not parts[0] or len(parts) > 2:
                    raise ConfigError(f"bad geometric spec {text!r}")
                c = float(parts[1]) if len(parts) == 2 else 1.0
                return cls("geometric", c=c, beta=float(parts[0]))
            if head == "explicit":
                return cls("explicit", W=tuple(float(w) for w in rest.split(",")))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad weight spec {text!r}: {exc}") from None
        path = Path(text)
        if not path.is_file():
            raise ConfigError(f"weight spec {text!r} is neither a family nor a file")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data) -> "WeightSpec":
        if isinstance(data, str):
            return cls.parse(data)
        if not isinstance(data, dict):
            raise ConfigError(f"weight spec must be an object, got {type(data).__name__}")
        if "kind" not in data:
            if "W" not in data:
                raise ConfigError("weight object needs 'kind' or 'W'")
            spec = cls("explicit", W=tuple(data["W"]))
            if "N" in data and int(data["N"]) != len(spec.W):
                raise ConfigError(f"N={data['N']} does not match {len(spec.W)} weights")
            return spec
        unknown = set(data) - {"kind", "c", "beta", "W"}
        if unknown:
            raise ConfigError(f"unknown weight keys {sorted(unknown)}")
        W = data.get("W")
        return cls(data["kind"], c=data.get("c", 1.0), beta=data.get("beta"),
                   W=tuple(W) if W is not None else None)

    def to_dict(self) -> dict:
        if self.kind == "unit":
            return {"kind": "unit"}
        if self.kind == "dyadic":
            return {"kind": "dyadic", "c": self.c}
        if self.kind == "geometric":
            return {"kind": "geometric", "beta": self.beta, "c": self.c}
        return {"kind": "explicit", "W": list(self.W)}

    @property
    def label(self) -> str:
        if self.kind == "geometric":
            return f"geometric:{self.beta:g}" + (f":{self.c:g}" if self.c != 1 else "")
        if self.kind == "dyadic" and self.c != 1:
            return f"dyadic:{self.c:g}"
        if self.kind == "explicit":
            return "explicit:" + ",".join(f"{w:g}" for w in self.W)
        return self.kind

    def build(self, N: int | None) -> TreeWeights:
        if self.kind == "explicit":
            if N is not None and N != len(self.W):
                raise ConfigError(f"N={N} does not match {len(self.W)} explicit weights")
            return TreeWeights(self.W)
        if N is None:
            raise ConfigError(f"{self.kind} weights need N")
        if self.kind == "unit":
            return TreeWeights.unit(N)
        if self.kind == "dyadic":
            return TreeWeights.dyadic(N, self.c)
        return TreeWeights.geometric(N, self.beta, self.c)


def _one_or_many(values: tuple):
    return values[0] if len(values) == 1 else list(values)


def _as_tuple(value) -> tuple:
    if isinstance(value, (list, tuple)):
        return tuple(value)
    return (value,)


@dataclass(frozen=True)
class RunConfig:
    command: str
    N: int | None = None
    p: tuple[float, ...] = ()
    weights: tuple[WeightSpec, ...] = ()
    seed: int | None = None
    trials: int = DEFAULT_TRIALS
    samples: int = DEFAULT_SAMPLES
    start_depth: int | None = None
    leaf_values: str | None = None
    output: str | None = None
    format: str = "json"
    extra: dict = field(default_factory=dict, compare=False, repr=False)

    KEYS = ("command", "N", "p", "weights", "seed", "trials", "samples",
            "start_depth", "leaf_values", "output", "format")

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; expected one of {COMMANDS}")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        ps = tuple(float(p) for p in self.p)
        for p in ps:
            if not (np.isfinite(p) and p > 1):
                raise ConfigError(f"p must be a finite number > 1, got {p}")
        object.__setattr__(self, "p", ps)
        object.__setattr__(self, "weights", tuple(self.weights))
        if self.N is not None:
            if isinstance(self.N, bool) or int(self.N) != self.N:
                raise ConfigError(f"N must be an integer, got {self.N!r}")
            try:
                check_height(int(self.N))
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
            object.__setattr__(self, "N", int(self.N))
        for name in ("trials", "samples"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value < 1:
                raise ConfigError(f"{name} must be a positive integer")
            object.__setattr__(self, name, int(value))
        if self.seed is not None:
            if isinstance(self.seed, bool) or int(self.seed) != self.seed or self.seed < 0:
                raise ConfigError("seed must be a non-negative integer")
            object.__setattr__(self, "seed", int(self.seed))

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "N": self.N,
            "p": _one_or_many(self.p) if self.p else None,
            "weights": (_one_or_many(tuple(w.to_dict() for w in self.weights))
                        if self.weights else None),
            "seed": self.seed,
            "trials": self.trials,
            "samples": self.samples,
            "start_depth": self.start_depth,
            "leaf_values": self.leaf_values,
            "output": self.output,
            "format": self.format,
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    @property
    def digest(self) -> str:
        return digest(self.to_json())

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(data) - set(cls.KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        if "command" not in data:
            raise ConfigError("config needs a 'command'")
        kw = {k: v for k, v in data.items() if v is not None}
        if "p" in kw:
            kw["p"] = _as_tuple(kw["p"])
        if "weights" in kw:
            kw["weights"] = tuple(WeightSpec.from_dict(w) for w in _as_tuple(kw["weights"]))
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid config JSON ({exc})") from None
        return cls.from_dict(data)

    def with_updates(self, **changes) -> "RunConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    # helpers used by the subcommands

    def single_p(self) -> float:
        if len(self.p) != 1:
            raise ConfigError(f"{self.command} needs exactly one p, got {len(self.p)}")
        return self.p[0]

    def single_weights(self) -> WeightSpec:
        if len(self.weights) != 1:
            raise ConfigError(f"{self.command} needs exactly one weight spec")
        return self.weights[0]

    def tree_weights(self, spec: WeightSpec | None = None) -> TreeWeights:
        spec = spec or self.single_weights()
        try:
            return spec.build(self.N)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def require_seed(self) -> int:
        if self.seed is None:
            raise ConfigError(f"{self.command} is stochastic and needs an explicit --seed")
        return self.seed


def load_leaf_values(spec: str, N: int) -> np.ndarray:
    """``random:seed`` (standard normal), ``delta:index`` or a JSON file of 2^N numbers."""
    L = n_leaves(N)
    head, _, rest = spec.partition(":")
    if head == "random" and rest:
        try:
            seed = int(rest)
        except ValueError:
            raise ConfigError(f"bad random seed in {spec!r}") from None
        return np.random.default_rng(seed).standard_normal(L)
    if head == "delta" and rest:
        try:
            index = int(rest)
        except ValueError:
            raise ConfigError(f"bad delta index in {spec!r}") from None
        if not 0 <= index < L:
            raise ConfigError(f"delta index {index} outside 0..{L - 1}")
        f = np.zeros(L)
        f[index] = 1.0
        return f
    path = Path(spec)
    if not path.is_file():
        raise ConfigError(f"leaf values {spec!r}: expected random:seed, delta:index or a file")
    try:
        values = np.asarray(json.loads(path.read_text()), dtype=float)
    except (json.JSONDecodeError, ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: cannot read leaf values ({exc})") from None
    if values.shape != (L,) or not np.all(np.isfinite(values)):
        raise ConfigError(f"{path}: expected {L} finite numbers, got shape {values.shape}")
    return values
