"""Run configuration: built-in defaults, overlaid by a config file, overlaid by flags.

The file is TOML (or JSON) with one flat table per section::

    [general]
    seed = 7

    [evaluate]
    runs = 10
    folds = 10

Every key is also a command-line flag named ``--<section>-<key>`` with
underscores turned into dashes, e.g. ``--model-l2-strength 0.01``.

Seeds: every component takes the root ``general.seed``. Evaluation run ``r``
uses ``seed + r`` (SMOTE in fold ``f`` of it ``(seed + r) * 1000 + f``);
topic search for a category uses ``seed + category index``, and each LDA
fit inside it adds the topic count.
"""

from __future__ import annotations

import argparse
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

from bugroot._toml import load_toml
from bugroot.model import Hyperparams
from bugroot.pipeline import ClassifierConfig, FeatureConfig
from bugroot.textprep import PrepConfig, load_term_list
from bugroot.topics import GaConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GeneralSection:
    seed: int = 0
    jobs: int = 1
    verbosity: str = "warning"


@dataclass(frozen=True)
class PrepSection:
    spell_correction: bool = False
    pos_filter: bool = False
    use_title: bool = False
    min_token_len: int = 2
    stopwords: str = ""  # path; empty means the bundled list
    keywords: str = ""


@dataclass(frozen=True)
class FeaturesSection:
    min_df: int = 2
    max_df_ratio: float = 0.95
    l2_normalize: bool = False


@dataclass(frozen=True)
class ModelSection:
    l2_strength: float = 0.001
    learning_rate: float = 1.0
    max_epochs: int = 500
    convergence_tol: float = 1e-6
    grid_search: bool = False
    grid_folds: int = 5


@dataclass(frozen=True)
class BalanceSection:
    enabled: bool = True
    k: int = 5
    metric: str = "euclidean"


@dataclass(frozen=True)
class EvaluateSection:
    runs: int = 100
    folds: int = 10


@dataclass(frozen=True)
class TopicsSection:
    population: int = 8
    generations: int = 10
    k_min: int = 2
    k_max: int = 10
    mutation_rate: float = 0.2
    elitism: int = 1
    iterations: int = 500
    terms: int = 5
    pos_filter: bool = True
    spell_correction: bool = False


@dataclass(frozen=True)
class TrackerSection:
    query: str = ""
    mapping: str = ""
    page_size: int = 100
    token_env: str = "BUGROOT_TRACKER_TOKEN"
    max_retries: int = 4
    backoff: float = 0.5
    max_records: int = 0  # 0 means unlimited


@dataclass(frozen=True)
class RunConfig:
    general: GeneralSection = field(default_factory=GeneralSection)
    prep: PrepSection = field(default_factory=PrepSection)
    features: FeaturesSection = field(default_factory=FeaturesSection)
    model: ModelSection = field(default_factory=ModelSection)
    balance: BalanceSection = field(default_factory=BalanceSection)
    evaluate: EvaluateSection = field(default_factory=EvaluateSection)
    topics: TopicsSection = field(default_factory=TopicsSection)
    tracker: TrackerSection = field(default_factory=TrackerSection)

    def to_dict(self) -> dict[str, dict[str, Any]]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def merged(self, overrides: Mapping[str, Mapping[str, Any]]) -> RunConfig:
        """A copy with ``{section: {key: value}}`` applied; unknown names are errors."""
        sections = {f.name for f in fields(self)}
        updates = {}
        for name, values in overrides.items():
            if name not in sections:
                raise ConfigError(f"unknown config section [{name}]")
            if not isinstance(values, Mapping):
                raise ConfigError(f"[{name}] must be a table")
            current = getattr(self, name)
            known = {f.name: f for f in fields(current)}
            typed = {}
            for key, value in values.items():
                if key not in known:
                    raise ConfigError(f"unknown config key {name}.{key}")
                typed[key] = _coerce(value, type(getattr(current, key)), f"{name}.{key}")
            updates[name] = replace(current, **typed)
        return replace(self, **updates)

    # views consumed by the library modules

    def prep_config(self) -> PrepConfig:
        return PrepConfig.classifier(**self._prep_common(self.prep.spell_correction, self.prep.pos_filter))

    def lda_prep_config(self) -> PrepConfig:
        return PrepConfig.lda(**self._prep_common(self.topics.spell_correction, self.topics.pos_filter))

    def _prep_common(self, spell: bool, pos: bool) -> dict[str, Any]:
        extra: dict[str, Any] = {}
        if self.prep.stopwords:
            extra["stopwords"] = load_term_list(self.prep.stopwords)
        if self.prep.keywords:
            extra["keywords"] = load_term_list(self.prep.keywords)
        return dict(
            spell_correction=spell,
            pos_filter=pos,
            use_title=self.prep.use_title,
            min_token_len=self.prep.min_token_len,
            **extra,
        )

    def hyperparams(self) -> Hyperparams:
        m = self.model
        return Hyperparams(m.l2_strength, m.learning_rate, m.max_epochs, m.convergence_tol)

    def classifier_config(self) -> ClassifierConfig:
        return ClassifierConfig(
            prep=self.prep_config(),
            features=FeatureConfig(self.features.min_df, self.features.max_df_ratio, self.features.l2_normalize),
            hyper=self.hyperparams(),
            balance=self.balance.enabled,
            smote_k=self.balance.k,
            smote_metric=self.balance.metric,
        )

    def ga_config(self) -> GaConfig:
        t = self.topics
        return GaConfig(t.population, t.generations, t.k_min, t.k_max, t.mutation_rate, t.elitism)


def _coerce(value: Any, kind: type, name: str) -> Any:
    if kind is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "yes", "1", "on", "false", "no", "0", "off"):
            return value.lower() in ("true", "yes", "1", "on")
        raise ConfigError(f"{name}: expected a boolean, got {value!r}")
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if kind is str and isinstance(value, str):
        return value
    if isinstance(value, str):
        try:
            return kind(value)
        except ValueError:
            pass
    raise ConfigError(f"{name}: expected {kind.__name__}, got {value!r}")


def load_config_file(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    try:
        if path.suffix.lower() == ".json":
            return json.loads(path.read_text(encoding="utf-8"))
        return load_toml(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def flag_name(section: str, key: str) -> str:
    return f"--{section}-{key}".replace("_", "-")


def add_config_flags(parser: argparse.ArgumentParser) -> None:
    """One ``--<section>-<key>`` option per config field; absent flags leave no attribute."""
    group = parser.add_argument_group("configuration overrides")
    for sec in fields(RunConfig):
        for f in fields(sec.default_factory()):
            group.add_argument(
                flag_name(sec.name, f.name),
                dest=f"cfg__{sec.name}__{f.name}",
                default=argparse.SUPPRESS,
                metavar=f.type.upper() if isinstance(f.type, str) else "VALUE",
            )


def flag_overrides(ns: argparse.Namespace) -> dict[str, dict[str, Any]]:
    out: dict[str, dict[str, Any]] = {}
    for dest, value in vars(ns).items():
        if dest.startswith("cfg__") and value is not None:
            _, section, key = dest.split("__", 2)
            out.setdefault(section, {})[key] = value
    return out


def resolve(config_path: str | Path | None, overrides: Mapping[str, Mapping[str, Any]]) -> RunConfig:
    """Defaults, then the config file, then ``overrides`` (usually from flags)."""
    cfg = RunConfig()
    if config_path:
        cfg = cfg.merged(load_config_file(config_path))
    return cfg.merged(overrides)
