"""Pipeline configuration: a flat ``key = value`` text file with ``#`` comments."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

from .dataset import DEFAULT_EXTRA_FEATURE, Feature, FeatureSchema, default_schema
from .errors import ConfigError, ClinselError
from .learners import FAMILIES
from .synthgen import GeneratorConfig

OUTPUT_DIR_ENV = "CLINSEL_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "clinsel_output"
OUTCOMES = ("response", "remission")


@dataclass(frozen=True)
class PipelineConfig:
    m_imputations: int = 100
    k_folds: int = 5
    auc_gate: float = 0.05
    models: tuple[str, ...] = FAMILIES
    outcomes: tuple[str, ...] = OUTCOMES
    seed: int = 0
    schema: FeatureSchema = field(default_factory=default_schema)
    input: Optional[str] = None
    generator: Optional[GeneratorConfig] = None
    output_dir: Optional[str] = None
    tree_report_feature: str = "credibility"
    imputation_sweeps: int = 10
    na_token: str = "NA"
    # execution only; never affects results
    jobs: int = 1
    dump_imputations: bool = False
    base_dir: str = "."

    def validate(self) -> "PipelineConfig":
        if self.m_imputations < 1:
            raise ConfigError("m_imputations must be >= 1")
        if self.k_folds < 2:
            raise ConfigError("k_folds must be >= 2")
        if not self.auc_gate >= 0:
            raise ConfigError("auc_gate must be >= 0")
        if not self.models:
            raise ConfigError("models must name at least one family")
        for m in self.models:
            if m not in FAMILIES:
                raise ConfigError(f"unknown model {m!r}; choose from {', '.join(FAMILIES)}")
        if len(set(self.models)) != len(self.models):
            raise ConfigError("models lists a family twice")
        if not self.outcomes:
            raise ConfigError("outcomes must name at least one outcome")
        for o in self.outcomes:
            if o not in OUTCOMES:
                raise ConfigError(f"unknown outcome {o!r}")
        if len(set(self.outcomes)) != len(self.outcomes):
            raise ConfigError("outcomes lists an outcome twice")
        if self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if self.imputation_sweeps < 1:
            raise ConfigError("imputation_sweeps must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if (self.input is None) == (self.generator is None):
            raise ConfigError("set exactly one of input = <csv path> or input = generator")
        if self.tree_report_feature not in self.schema.names:
            raise ConfigError(f"tree_report_feature {self.tree_report_feature!r} is not in the schema")
        if self.generator is not None:
            try:
                self.generator.validate()
            except ClinselError as exc:
                raise ConfigError(f"generator: {exc}") from exc
        return self

    @property
    def input_path(self) -> Optional[Path]:
        if self.input is None:
            return None
        p = Path(self.input)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def resolved_output_dir(self) -> Path:
        out = self.output_dir or os.environ.get(OUTPUT_DIR_ENV) or DEFAULT_OUTPUT_DIR
        p = Path(out)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def echo(self) -> dict:
        """Result-determining settings, for provenance. Paths and worker counts are left out."""
        out = {
            "m_imputations": self.m_imputations,
            "k_folds": self.k_folds,
            "auc_gate": self.auc_gate,
            "models": list(self.models),
            "outcomes": list(self.outcomes),
            "seed": self.seed,
            "tree_report_feature": self.tree_report_feature,
            "imputation_sweeps": self.imputation_sweeps,
            "schema": [
                {"name": f.name, "kind": f.kind, "bounds": list(f.bounds) if f.bounds else None}
                for f in self.schema.features
            ],
            "input": "generator" if self.generator is not None else Path(self.input).name,
        }
        if self.generator is not None:
            g = asdict(self.generator)
            g.pop("schema")
            out["generator"] = {k: list(v) if isinstance(v, tuple) else v for k, v in g.items()}
        return out


def parse_feature(text: str) -> Optional[Feature]:
    """``name:kind[:lower:upper]``; ``none`` drops the slot."""
    text = text.strip()
    if text.lower() == "none":
        return None
    parts = [p.strip() for p in text.split(":")]
    if len(parts) not in (2, 4):
        raise ConfigError(f"feature spec {text!r}: expected name:kind or name:kind:lower:upper")
    bounds = None
    if len(parts) == 4:
        try:
            bounds = (float(parts[2]), float(parts[3]))
        except ValueError:
            raise ConfigError(f"feature spec {text!r}: bounds must be numbers") from None
    try:
        return Feature(parts[0], parts[1], bounds)
    except ClinselError as exc:
        raise ConfigError(str(exc)) from exc


def read_pairs(path) -> dict[str, str]:
    pairs: dict[str, str] = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in pairs:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


def _int(key, v):
    try:
        return int(v)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {v!r}") from None


def _float(key, v):
    try:
        return float(v)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {v!r}") from None


def _bool(key, v):
    low = v.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {v!r}")


def _floats(key, v, n):
    vals = tuple(_float(key, x) for x in v.split(","))
    if len(vals) != n:
        raise ConfigError(f"{key}: expected {n} comma-separated numbers")
    return vals


def _names(v):
    if v.strip().lower() == "all":
        return FAMILIES
    return tuple(x.strip() for x in v.split(",") if x.strip())


_TOP = {
    "m_imputations": _int, "k_folds": _int, "auc_gate": _float, "seed": _int, "jobs": _int,
    "imputation_sweeps": _int, "dump_imputations": _bool,
}
_STR = ("output_dir", "tree_report_feature", "na_token")
_GEN = {
    "n_patients": _int, "cred_expect_corr": _float, "plant_thresholds": _bool, "null_response_prob": _float,
    "missing_rate": _float, "mar_strength": _float, "seed": _int,
}


def config_from_pairs(pairs: dict[str, str], base_dir=".") -> PipelineConfig:
    kw: dict = {"base_dir": str(base_dir)}
    gen: dict = {}
    schema_extra = DEFAULT_EXTRA_FEATURE
    use_generator = False
    for key, v in pairs.items():
        if key in _TOP:
            kw[key] = _TOP[key](key, v)
        elif key in _STR:
            kw[key] = v
        elif key == "models":
            kw["models"] = _names(v)
        elif key == "outcomes":
            kw["outcomes"] = tuple(x.strip() for x in v.split(",") if x.strip())
        elif key == "input":
            if v.lower() == "generator":
                use_generator = True
            else:
                kw["input"] = v
        elif key == "extra_feature":
            schema_extra = parse_feature(v)
        elif key.startswith("generator."):
            sub = key.split(".", 1)[1]
            if sub in _GEN:
                gen[sub] = _GEN[sub](key, v)
            elif sub == "response_probs":
                gen[sub] = _floats(key, v, 3)
            elif sub == "remission_link":
                gen[sub] = _floats(key, v, 3)
            elif sub in ("mechanism", "mar_covariate"):
                gen[sub] = v.upper() if sub == "mechanism" else v
            else:
                raise ConfigError(f"unknown generator key {key!r}")
        else:
            raise ConfigError(f"unknown config key {key!r}")
    schema = default_schema(schema_extra)
    kw["schema"] = schema
    if use_generator or gen:
        if "input" in kw:
            raise ConfigError("input names a CSV but generator.* keys are set")
        gen.setdefault("seed", kw.get("seed", 0))
        kw["generator"] = GeneratorConfig(schema=schema, **gen)
    return PipelineConfig(**kw)


def load_config(path, seed: Optional[int] = None, **overrides) -> PipelineConfig:
    """Parse and validate. ``seed`` overrides the file's seed before parsing, so a
    generator without its own seed follows it."""
    path = Path(path)
    pairs = read_pairs(path)
    if seed is not None:
        pairs["seed"] = str(seed)
    cfg = config_from_pairs(pairs, base_dir=path.parent)
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg.validate()
