"""Screening configuration: defaults, ``key = value`` files and overrides."""
from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

FEATURE_SETS = ("structural", "molecular", "chemical", "fingerprint")
TARGETS = ("I2_uptake", "H2O_uptake", "I2_selectivity")


class ConfigError(ValueError):
    pass


def parse_composition(text: str) -> tuple:
    """'I2:0.0003,N2:0.685' -> (('I2', 0.0003), ('N2', 0.685))."""
    out = []
    for part in text.split(","):
        if not part.strip():
            continue
        try:
            name, frac = part.split(":")
            out.append((name.strip(), float(frac)))
        except ValueError:
            raise ConfigError(f"bad composition entry {part!r}") from None
    if not out or any(f <= 0 for _, f in out):
        raise ConfigError("composition needs at least one species with a positive fraction")
    return tuple(out)


@dataclass(frozen=True)
class ScreeningConfig:
    input_dir: str = ""
    output_dir: str = "screening_output"
    seed: int = 0
    workers: int = 1
    feature_set: str = "chemical"
    target: str = "I2_uptake"
    # simulation
    temperature: float = 423.0
    pressure: float = 1.0e5                 # Pa
    composition: str = "I2:0.0003,N2:0.685,O2:0.184,H2O:0.122"
    cycles_eq: int = 50_000
    cycles_prod: int = 50_000
    widom_insertions: int = 100_000
    void_insertions: int = 100_000
    cutoff: float = 12.0
    use_charges: bool = False
    tip3p_canonical: bool = False
    forcefield: str = ""
    radii: str = ""
    # geometry
    grid_spacing: float = 0.2
    sa_samples: int = 1000
    pld_gate: float = 3.34
    # learning
    test_fraction: float = 0.2
    cv_folds: int = 5
    tune: bool = True
    r2_paper_notation: bool = False
    top_k: int = 6
    window_feature: str = "LCD"
    window_bins: int = 10

    def validate(self, need_dirs: bool = False) -> "ScreeningConfig":
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.feature_set not in FEATURE_SETS:
            raise ConfigError(f"feature_set must be one of {FEATURE_SETS}")
        if self.target not in TARGETS:
            raise ConfigError(f"target must be one of {TARGETS}")
        if self.temperature <= 0 or self.pressure < 0:
            raise ConfigError("temperature must be positive and pressure non-negative")
        if not 0.05 <= self.grid_spacing <= 1.0:
            raise ConfigError("grid_spacing must lie in [0.05, 1.0]")
        parse_composition(self.composition)
        if need_dirs and not Path(self.input_dir).is_dir():
            raise ConfigError(f"input directory {self.input_dir!r} does not exist")
        return self

    @property
    def species(self) -> tuple:
        return parse_composition(self.composition)

    def with_overrides(self, **kw) -> "ScreeningConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **_coerce(kw))


_TYPES = {f.name: f.type for f in fields(ScreeningConfig)}


def _coerce(raw: dict) -> dict:
    out = {}
    for key, val in raw.items():
        if key not in _TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        kind = _TYPES[key]
        if not isinstance(val, str):
            out[key] = val
            continue
        try:
            if kind == "bool":
                low = val.strip().lower()
                if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                    raise ValueError(val)
                out[key] = low in ("1", "true", "yes", "on")
            elif kind == "int":
                f = float(val)
                if not f.is_integer():
                    raise ValueError(val)
                out[key] = int(f)
            elif kind == "float":
                out[key] = float(val)
            else:
                out[key] = val.strip()
        except ValueError:
            raise ConfigError(f"bad value for {key}: {val!r}") from None
    return out


def parse_config(text: str) -> dict:
    raw = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value'")
        key, val = (p.strip() for p in line.split("=", 1))
        raw[key.replace("-", "_")] = val
    return _coerce(raw)


def load_config(path=None, **overrides) -> ScreeningConfig:
    cfg = ScreeningConfig()
    if path:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        cfg = replace(cfg, **parse_config(text))
    return cfg.with_overrides(**overrides).validate()


def format_config(cfg: ScreeningConfig) -> str:
    return "".join(f"{f.name} = {getattr(cfg, f.name)}\n" for f in fields(cfg))
