"""Pipeline configuration: one self-describing JSON document.

Holds FSM thresholds, the Scarlet constant, velocity-model parameters,
filter noise, the synthetic ensemble spec and the sweep grid. Every run
archives the document it used next to its outputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError
from .fusion import FilterConfig
from .stepper import FsmThresholds
from .synthwalk import RNG_ALGORITHM, EnsembleSpec
from .velmodel import (
    MODEL_TYPES,
    GaussianModel,
    SawtoothModel,
    SinusoidalModel,
    VelocityModel,
    model_from_dict,
    model_to_dict,
)

FORMAT = "gaitkal-config/1"
METHODS = ("ins-kalman", "ins-naive", "ins-raw", "shs")
DEFAULT_PCTS = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0)


def _default_models() -> dict[str, VelocityModel]:
    return {"gaussian": GaussianModel(), "sin": SinusoidalModel(), "saw": SawtoothModel()}


@dataclass(frozen=True)
class SweepSpec:
    pcts: tuple[float, ...] = DEFAULT_PCTS
    methods: tuple[str, ...] = METHODS
    models: tuple[str, ...] = ("gaussian", "sin", "saw")
    calibration_pct: float = 10.0
    calibration_seed_start: int = 1000
    n_calibration: int = 15
    test_seed_start: int = 0
    n_test: int = 25
    bootstrap_resamples: int = 1000

    def __post_init__(self) -> None:
        if not self.pcts or any(not 0 <= p <= 100 for p in self.pcts):
            raise ConfigError("sweep pcts must be a non-empty list within [0, 100]")
        bad = set(self.methods) - set(METHODS)
        if bad or not self.methods:
            raise ConfigError(f"unknown methods {sorted(bad)}; expected a subset of {METHODS}")
        bad = set(self.models) - set(MODEL_TYPES)
        if bad:
            raise ConfigError(f"unknown models {sorted(bad)}; expected a subset of {sorted(MODEL_TYPES)}")
        if not 0 < self.calibration_pct <= 100:
            raise ConfigError("calibration_pct must lie in (0, 100]")
        if self.n_calibration < 1 or self.n_test < 1:
            raise ConfigError("ensemble sizes must be positive")


@dataclass(frozen=True)
class PipelineConfig:
    thresholds: FsmThresholds | None = None
    scarlet_K: float | None = None
    models: dict = field(default_factory=_default_models)
    filter: FilterConfig = field(default_factory=FilterConfig)
    ensemble: EnsembleSpec = field(default_factory=EnsembleSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    rng: str = RNG_ALGORITHM

    def __post_init__(self) -> None:
        if self.rng != RNG_ALGORITHM:
            raise ConfigError(f"unsupported RNG {self.rng!r}; this build provides {RNG_ALGORITHM}")
        if self.scarlet_K is not None and not self.scarlet_K > 0:
            raise ConfigError("scarlet_K must be positive")

    def model(self, tag: str) -> VelocityModel:
        try:
            return self.models[tag]
        except KeyError:
            raise ConfigError(f"model {tag!r} not configured") from None

    def with_calibration(self, thresholds, scarlet_K, models) -> "PipelineConfig":
        return replace(self, thresholds=thresholds, scarlet_K=scarlet_K, models={**self.models, **models})

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "rng": self.rng,
            "thresholds": self.thresholds.as_dict() if self.thresholds else None,
            "scarlet_K": self.scarlet_K,
            "models": {tag: model_to_dict(m) for tag, m in sorted(self.models.items())},
            "filter": self.filter.as_dict(),
            "ensemble": self.ensemble.to_dict(),
            "sweep": {
                **{k: getattr(self.sweep, k) for k in SweepSpec.__dataclass_fields__},
                "pcts": list(self.sweep.pcts),
                "methods": list(self.sweep.methods),
                "models": list(self.sweep.models),
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        fmt = d.get("format", FORMAT)
        if fmt != FORMAT:
            raise ConfigError(f"unsupported config format {fmt!r}")
        unknown = set(d) - {"format", "rng", "thresholds", "scarlet_K", "models", "filter", "ensemble", "sweep"}
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        try:
            thr = FsmThresholds(**d["thresholds"]) if d.get("thresholds") else None
            models = _default_models()
            for tag, params in (d.get("models") or {}).items():
                models[tag] = model_from_dict(tag, params)
            filt = FilterConfig(**d["filter"]) if d.get("filter") else FilterConfig()
            ens = EnsembleSpec.from_dict(d["ensemble"]) if d.get("ensemble") else EnsembleSpec()
            sw = dict(d.get("sweep") or {})
            for k in ("pcts", "methods", "models"):
                if k in sw:
                    sw[k] = tuple(sw[k])
            sweep = SweepSpec(**sw)
            return cls(thr, d.get("scarlet_K"), models, filt, ens, sweep, d.get("rng", RNG_ALGORITHM))
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc


def load_config(path: str | Path | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return PipelineConfig.from_dict(doc)


def save_config(path: str | Path, cfg: PipelineConfig) -> Path:
    path = Path(path)
    path.write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
