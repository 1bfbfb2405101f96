"""Rule lists over monotone conjunctions, their predictions and regularized losses."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .dataset import BinaryDataset, DatasetError, bool_from_bits

MODEL_SCHEMA_VERSION = 1


class RuleListError(ValueError):
    pass


@dataclass(frozen=True)
class Rule:
    """``features`` is the condition: a sorted tuple of feature indices, all required to be 1."""

    features: tuple[int, ...]
    prediction: int

    def __post_init__(self):
        feats = tuple(int(j) for j in self.features)
        if not feats:
            raise RuleListError("only the default rule may have an empty condition")
        if any(a >= b for a, b in zip(feats, feats[1:])):
            raise RuleListError(f"condition indices must be strictly increasing: {feats}")
        if feats[0] < 0:
            raise RuleListError(f"negative feature index in {feats}")
        if self.prediction not in (0, 1):
            raise RuleListError(f"prediction must be 0 or 1, got {self.prediction!r}")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "prediction", int(self.prediction))

    @classmethod
    def of(cls, features: Iterable[int], prediction: int) -> "Rule":
        return cls(tuple(sorted(set(features))), prediction)


@dataclass(frozen=True)
class RuleList:
    rules: tuple[Rule, ...] = ()
    default: int = 0

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        if self.default not in (0, 1):
            raise RuleListError(f"default prediction must be 0 or 1, got {self.default!r}")
        object.__setattr__(self, "default", int(self.default))

    def __len__(self) -> int:
        return len(self.rules)

    def max_index(self) -> int:
        return max((r.features[-1] for r in self.rules), default=-1)

    def describe(self, names: Sequence[str] | None = None) -> str:
        def cond(rule: Rule) -> str:
            return " & ".join(names[j] if names else f"x{j}" for j in rule.features)

        lines = []
        for i, rule in enumerate(self.rules):
            lead = "if" if i == 0 else "else if"
            lines.append(f"{lead} {cond(rule)} -> {rule.prediction}")
        lines.append(f"{'else' if self.rules else 'always'} -> {self.default}")
        return "\n".join(lines)


@dataclass(frozen=True)
class SearchSpace:
    """Hypothesis class bounds: at most k rules of at most z terms over d features."""

    k: int
    z: int
    d: int
    alpha: float = 0.0

    def __post_init__(self):
        if self.k < 0:
            raise ValueError(f"k must be >= 0, got {self.k}")
        if not 1 <= self.z <= self.d:
            raise ValueError(f"need 1 <= z <= d, got z={self.z}, d={self.d}")
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")


def _check_indices(R: RuleList, d: int) -> None:
    if R.max_index() >= d:
        raise RuleListError(f"rule list uses feature {R.max_index()} but instances have {d}")


def predict(R: RuleList, instance: Sequence[int]) -> int:
    """Prediction of the first rule whose features are all 1, else the default."""
    _check_indices(R, len(instance))
    for rule in R.rules:
        if all(instance[j] for j in rule.features):
            return rule.prediction
    return R.default


def predict_all(R: RuleList, ds: BinaryDataset) -> np.ndarray:
    """Vectorized predictions for every instance (row-wise evaluation)."""
    _check_indices(R, ds.d)
    return _predict_rows(R, ds.features)


def _predict_rows(R: RuleList, X: np.ndarray) -> np.ndarray:
    out = np.full(X.shape[0], R.default, dtype=np.uint8)
    undecided = np.ones(X.shape[0], dtype=bool)
    for rule in R.rules:
        fire = undecided & np.all(X[:, list(rule.features)] == 1, axis=1)
        out[fire] = rule.prediction
        undecided &= ~fire
    return out


def condition_bits(ds: BinaryDataset, features: Sequence[int]) -> int:
    cols = ds.column_bits
    bits = ds.all_bits
    for j in features:
        bits &= cols[j]
    return bits


def capture_bits(R: RuleList, ds: BinaryDataset) -> list[int]:
    """Per-rule captures: instances satisfying the rule and no earlier rule."""
    _check_indices(R, ds.d)
    captured = 0
    out = []
    for rule in R.rules:
        fresh = condition_bits(ds, rule.features) & ~captured
        out.append(fresh)
        captured |= fresh
    return out


def projection_bits(R: RuleList, ds: BinaryDataset) -> int:
    captures = capture_bits(R, ds)
    ones = 0
    for rule, cap in zip(R.rules, captures):
        if rule.prediction == 1:
            ones |= cap
    if R.default == 1:
        covered = 0
        for cap in captures:
            covered |= cap
        ones |= ds.all_bits & ~covered
    return ones


def loss(R: RuleList, ds: BinaryDataset, alpha: float) -> tuple[float, int]:
    """Regularized loss mistakes/n + alpha*|R| and the exact mistake count."""
    wrong = (projection_bits(R, ds) ^ ds.label_bits).bit_count()
    return wrong / ds.n + alpha * len(R), wrong


def projection(R: RuleList, ds: BinaryDataset) -> frozenset[int]:
    """Indices of the instances predicted 1."""
    bits = projection_bits(R, ds)
    return frozenset(int(i) for i in np.flatnonzero(bool_from_bits(bits, ds.n)))


def canonicalize(R: RuleList) -> RuleList:
    """Drop rules that can never fire or never matter.

    A rule whose condition already appeared earlier never fires; a trailing rule
    predicting the default label can be removed without changing any prediction.
    """
    seen: set[tuple[int, ...]] = set()
    kept: list[Rule] = []
    for rule in R.rules:
        if rule.features in seen:
            continue
        seen.add(rule.features)
        kept.append(rule)
    while kept and kept[-1].prediction == R.default:
        kept.pop()
    return RuleList(tuple(kept), R.default)


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    rule: int | None = None


def validate(R: RuleList, space: SearchSpace) -> list[Violation]:
    """Membership check against the search space; an empty list means ok."""
    out: list[Violation] = []
    if len(R) > space.k:
        out.append(Violation("length", f"rule list has {len(R)} rules, k={space.k}"))
    for i, rule in enumerate(R.rules, start=1):
        if len(rule.features) > space.z:
            out.append(
                Violation("terms", f"rule {i} has {len(rule.features)} terms, z={space.z}", i)
            )
        if rule.features[-1] >= space.d:
            out.append(Violation("index", f"rule {i} uses feature {rule.features[-1]}, d={space.d}", i))
    return out


# Model JSON ---------------------------------------------------------------


@dataclass(frozen=True)
class Model:
    """A rule list bound to feature names, as stored in model JSON."""

    rules: tuple[tuple[tuple[str, ...], int], ...]
    default: int
    alpha: float = 0.0
    k: int | None = None
    z: int | None = None

    @classmethod
    def from_rulelist(cls, R: RuleList, feature_names: Sequence[str],
                      space: SearchSpace | None = None) -> "Model":
        rules = tuple((tuple(feature_names[j] for j in r.features), r.prediction) for r in R.rules)
        if space is None:
            return cls(rules, R.default)
        return cls(rules, R.default, space.alpha, space.k, space.z)

    @classmethod
    def from_dict(cls, obj: dict) -> "Model":
        try:
            rules = tuple(
                (tuple(str(f) for f in r["features"]), int(r["prediction"])) for r in obj["rules"]
            )
            default = int(obj["default_prediction"])
        except (KeyError, TypeError) as exc:
            raise RuleListError(f"malformed model JSON: {exc}") from None
        return cls(rules, default, float(obj.get("alpha", 0.0)), obj.get("k"), obj.get("z"))

    @classmethod
    def from_json(cls, text: str) -> "Model":
        return cls.from_dict(json.loads(text))

    def resolve(self, feature_names: Sequence[str]) -> RuleList:
        """Bind feature names to column indices of a dataset header."""
        index = {name: j for j, name in enumerate(feature_names)}
        rules = []
        for names, prediction in self.rules:
            missing = [f for f in names if f not in index]
            if missing:
                raise DatasetError(f"model references unknown feature(s): {', '.join(missing)}")
            rules.append(Rule.of((index[f] for f in names), prediction))
        return RuleList(tuple(rules), self.default)

    def to_dict(self) -> dict:
        out = {
            "schema_version": MODEL_SCHEMA_VERSION,
            "rules": [{"features": list(f), "prediction": p} for f, p in self.rules],
            "default_prediction": self.default,
            "alpha": self.alpha,
        }
        if self.k is not None:
            out["k"] = self.k
        if self.z is not None:
            out["z"] = self.z
        return out
