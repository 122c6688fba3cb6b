"""Experiment configuration and its flat ``key = value`` file format.

Lists are comma-separated; ``#`` starts a comment; unknown keys are errors.
Relative dataset paths resolve against the config file's directory.
"""
from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .baseclf import Kind
from .destech import Technique
from .postselect import DEFAULT_DES_SET, FConvention

METHOD_LABELS = {
    "knora_u": "KNORA-U",
    "knop": "KNOP",
    "meta_des": "META-DES",
    "des_p": "DES-P",
    "random": "Random",
    "ps_des_mcc": "PS-DES-MCC",
    "ps_des_f": "PS-DES-F",
    "ps_des_acc": "PS-DES-acc",
}
INDIVIDUAL_METHODS = ("knora_u", "knop", "meta_des", "des_p")
PS_DES_METHODS = ("ps_des_mcc", "ps_des_f", "ps_des_acc")
ALL_METHODS = tuple(METHOD_LABELS)
ALL_METRICS = ("accuracy", "f_score", "mcc")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    dataset_paths: tuple[str, ...] = ()
    split_fractions: tuple[float, float, float] = (0.5, 0.25, 0.25)
    replications: int = 30
    master_seed: int = 0
    b: int = 100
    base_classifiers: tuple[str, ...] = tuple(k.value for k in Kind)
    k: int = 7
    kp_knop: int = 7
    kp_meta: int = 5
    hc: float = 1.0
    meta_threshold: float = 0.5
    des_set: tuple[str, ...] = tuple(t.value for t in DEFAULT_DES_SET)
    methods: tuple[str, ...] = ALL_METHODS
    f_convention: str = FConvention.MAJORITY_LABEL.value
    metrics: tuple[str, ...] = ALL_METRICS
    output_dir: str = "results"
    scaler_scope: str = "train"
    wilcoxon_alternative: str = "greater"
    zero_method: str = "wilcox"

    def __post_init__(self):
        if abs(sum(self.split_fractions) - 1.0) > 1e-9 or len(self.split_fractions) != 3:
            raise ConfigError("split_fractions must be three values summing to 1")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.b < 1:
            raise ConfigError("b must be >= 1")
        if min(self.k, self.kp_knop, self.kp_meta) < 1:
            raise ConfigError("neighbourhood sizes must be >= 1")
        for kind in self.base_classifiers:
            _check(kind, [k.value for k in Kind], "base classifier")
        if not self.base_classifiers:
            raise ConfigError("base_classifiers must not be empty")
        for t in self.des_set:
            _check(t, [x.value for x in Technique], "DES technique")
        if not self.des_set:
            raise ConfigError("des_set must not be empty")
        for m in self.methods:
            _check(m, ALL_METHODS, "method")
        for m in self.metrics:
            _check(m, ALL_METRICS, "metric")
        _check(self.f_convention, [c.value for c in FConvention], "f_convention")
        _check(self.scaler_scope, ["train", "full"], "scaler_scope")
        _check(self.wilcoxon_alternative, ["greater", "two_sided"], "wilcoxon_alternative")
        _check(self.zero_method, ["wilcox", "pratt"], "zero_method")

    def digest(self) -> str:
        return hashlib.sha256(repr(sorted(asdict(self).items())).encode()).hexdigest()[:16]


def _check(value, allowed, what):
    if value not in allowed:
        raise ConfigError(f"unknown {what} {value!r}; expected one of {list(allowed)}")


def _split(text: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in text.split(",") if p.strip())


_PARSERS = {
    "dataset_paths": _split,
    "split_fractions": lambda s: tuple(float(p) for p in _split(s)),
    "replications": int,
    "master_seed": int,
    "b": int,
    "base_classifiers": _split,
    "k": int,
    "kp_knop": int,
    "kp_meta": int,
    "hc": float,
    "meta_threshold": float,
    "des_set": _split,
    "methods": _split,
    "f_convention": str.strip,
    "metrics": _split,
    "output_dir": str.strip,
    "scaler_scope": str.strip,
    "wilcoxon_alternative": str.strip,
    "zero_method": str.strip,
}
assert set(_PARSERS) == {f.name for f in fields(ExperimentConfig)}


def parse_config(text: str, base_dir: str | Path | None = None) -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    if base_dir is not None and "dataset_paths" in values:
        base = Path(base_dir)
        values["dataset_paths"] = tuple(
            str(p if Path(p).is_absolute() else base / p) for p in values["dataset_paths"]
        )
    return ExperimentConfig(**values)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(), path.parent)


def format_config(cfg: ExperimentConfig) -> str:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        lines.append(f"{f.name} = {', '.join(map(str, v)) if isinstance(v, tuple) else v}")
    return "\n".join(lines) + "\n"


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
