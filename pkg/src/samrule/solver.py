"""Exact minimum-loss rule lists by best-first branch-and-bound.

Candidate rule lists are compared on the key (objective, length, antecedent
index sequence) so the optimum is unique and reproducible.  Objectives are kept
as exact integers: with alpha = p/q, n*q*loss = mistakes*q + p*n*|R|.

``brute_force`` is an independent exhaustive enumerator (numpy boolean rows,
rational arithmetic, no pruning) used as a test oracle.
"""
from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .dataset import BinaryDataset
from .rulelist import Model, Rule, RuleList, SearchSpace, canonicalize, loss

DEFAULT_CATALOGUE_CAP = 200_000
BRUTE_FORCE_GUARD = 10**7


class CatalogueTooLarge(ValueError):
    def __init__(self, count: int, cap: int):
        super().__init__(f"antecedent catalogue has {count} conditions, cap is {cap}")
        self.count = count
        self.cap = cap


@dataclass(frozen=True)
class AntecedentCatalogue:
    conditions: tuple[tuple[int, ...], ...]
    captures: tuple[int, ...]
    supports: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.conditions)

    def index(self, condition) -> int:
        return self.conditions.index(tuple(condition))


def enumerate_antecedents(
    ds: BinaryDataset,
    z: int,
    min_support: float = 0.0,
    include_empty: bool = False,
    cap: int = DEFAULT_CATALOGUE_CAP,
) -> AntecedentCatalogue:
    """All feature subsets of size <= z with support > min_support*n, ordered by size then lexicographically.

    Zero-support subsets never fire and are left out unless ``include_empty``.
    """
    if not 1 <= z <= ds.d:
        raise ValueError(f"need 1 <= z <= d, got z={z}, d={ds.d}")
    if not 0 <= min_support < 1:
        raise ValueError(f"min_support must be in [0, 1), got {min_support}")
    total = sum(math.comb(ds.d, s) for s in range(1, z + 1))
    if total > cap:
        raise CatalogueTooLarge(total, cap)
    threshold = min_support * ds.n
    cols = ds.column_bits
    conditions, captures, supports = [], [], []
    # captures of size-s subsets are built from their size-(s-1) prefix
    prev: dict[tuple[int, ...], int] = {(): ds.all_bits}
    for size in range(1, z + 1):
        cur: dict[tuple[int, ...], int] = {}
        for combo in itertools.combinations(range(ds.d), size):
            bits = prev[combo[:-1]] & cols[combo[-1]]
            if size < z:
                cur[combo] = bits
            support = bits.bit_count()
            if support > threshold or (include_empty and min_support == 0):
                conditions.append(combo)
                captures.append(bits)
                supports.append(support)
        prev = cur
    return AntecedentCatalogue(tuple(conditions), tuple(captures), tuple(supports))


@dataclass(frozen=True)
class PrefixState:
    """Ordered antecedents with fixed predictions, and what they capture."""

    antecedents: tuple[int, ...]
    predictions: tuple[int, ...]
    captured: int
    mistakes: int
    n: int

    @property
    def depth(self) -> int:
        return len(self.antecedents)

    @classmethod
    def empty(cls, n: int) -> "PrefixState":
        return cls((), (), 0, 0, n)

    def extend(self, index: int, capture: int, labels: int) -> "PrefixState":
        fresh = capture & ~self.captured
        pos = (fresh & labels).bit_count()
        neg = fresh.bit_count() - pos
        return PrefixState(
            self.antecedents + (index,),
            self.predictions + (majority(pos, neg),),
            self.captured | fresh,
            self.mistakes + min(pos, neg),
            self.n,
        )


def majority(pos: int, neg: int) -> int:
    """Prediction minimizing mistakes on a group; ties predict 0."""
    return 1 if pos > neg else 0


def prefix_lower_bound(state: PrefixState, alpha: float) -> float:
    """Loss lower bound for every rule list that starts with this prefix."""
    return state.mistakes / state.n + alpha * state.depth


@dataclass(frozen=True)
class SolverOptions:
    node_budget: int | None = None
    time_budget: float | None = None
    min_support: float = 0.0
    include_empty: bool = False
    catalogue_cap: int = DEFAULT_CATALOGUE_CAP
    objective_bound: bool = True
    lookahead_bound: bool = True
    skip_empty_capture: bool = True
    skip_equivalent_siblings: bool = True

    def toggles(self) -> dict:
        return {
            "objective_bound": self.objective_bound,
            "lookahead_bound": self.lookahead_bound,
            "skip_empty_capture": self.skip_empty_capture,
            "skip_equivalent_siblings": self.skip_equivalent_siblings,
        }


@dataclass
class SolverResult:
    rule_list: RuleList
    loss: float
    mistakes: int
    n: int
    nodes_explored: int
    nodes_pruned: int
    proven_optimal: bool
    wall_time: float
    min_support: float = 0.0
    catalogue_size: int = 0
    feature_names: tuple[str, ...] = field(default=(), repr=False)
    space: SearchSpace | None = None

    @property
    def certifiable(self) -> bool:
        """Optimal over the whole hypothesis class (complete search, no support filter)."""
        return self.proven_optimal and self.min_support == 0

    def to_dict(self, timing: bool = True) -> dict:
        out = {
            "model": Model.from_rulelist(self.rule_list, self.feature_names, self.space).to_dict(),
            "loss": self.loss,
            "mistakes": self.mistakes,
            "n": self.n,
            "length": len(self.rule_list),
            "nodes_explored": self.nodes_explored,
            "nodes_pruned": self.nodes_pruned,
            "proven_optimal": self.proven_optimal,
            "min_support": self.min_support,
            "catalogue_size": self.catalogue_size,
        }
        if timing:
            out["wall_time"] = self.wall_time
        return out


def _alpha_ratio(alpha: float) -> tuple[int, int]:
    return Fraction(alpha).as_integer_ratio()


def solve(ds: BinaryDataset, space: SearchSpace, options: SolverOptions | None = None) -> SolverResult:
    """Minimum regularized-loss rule list with at most k rules of at most z terms."""
    opts = options or SolverOptions()
    if space.d != ds.d:
        raise ValueError(f"search space has d={space.d}, dataset has d={ds.d}")
    start = time.perf_counter()
    catalogue = enumerate_antecedents(
        ds, space.z, opts.min_support, opts.include_empty, opts.catalogue_cap
    )
    captures = catalogue.captures
    n, k = ds.n, space.k
    labels = ds.label_bits
    p, q = _alpha_ratio(space.alpha)
    rule_cost = p * n
    total_pos = labels.bit_count()

    # node: (antecedents, predictions, captured, prefix mistakes, uncaptured pos, uncaptured count)
    best_key = (min(total_pos, n - total_pos) * q, 0, ())
    best_preds: tuple[int, ...] = ()
    best_default = majority(total_pos, n - total_pos)

    explored = pruned = 0
    truncated = False
    heap: list = []
    counter = itertools.count()
    if k > 0:
        heap.append((0, next(counter), ((), (), 0, 0, total_pos, n)))

    deadline = None if opts.time_budget is None else start + opts.time_budget
    budget = opts.node_budget

    while heap:
        if deadline is not None and time.perf_counter() > deadline:
            truncated = True
            break
        lb, _, node = heapq.heappop(heap)
        seq, preds, captured, mist, unc_pos, unc_cnt = node
        depth = len(seq)
        # incumbent may have improved since this node was queued
        if opts.lookahead_bound and (lb + rule_cost, depth + 1, seq) >= best_key:
            pruned += 1
            continue
        if opts.objective_bound and (lb, depth, seq) >= best_key:
            pruned += 1
            continue
        used = set(seq)
        seen: set[int] = set()
        child_depth = depth + 1
        for idx, cap in enumerate(captures):
            if idx in used:
                continue
            fresh = cap & ~captured
            if opts.skip_empty_capture and not fresh:
                pruned += 1
                continue
            if opts.skip_equivalent_siblings:
                if fresh in seen:
                    pruned += 1
                    continue
                seen.add(fresh)
            if budget is not None and explored >= budget:
                truncated = True
                break
            explored += 1
            cnt = fresh.bit_count()
            pos = (fresh & labels).bit_count() if cnt else 0
            neg = cnt - pos
            child_mist = mist + min(pos, neg)
            child_lb = child_mist * q + rule_cost * child_depth
            child_seq = seq + (idx,)
            child_preds = preds + (majority(pos, neg),)
            upos = unc_pos - pos
            uneg = unc_cnt - cnt - upos
            obj = child_lb + min(upos, uneg) * q
            key = (obj, child_depth, child_seq)
            if key < best_key:
                best_key = key
                best_preds = child_preds
                best_default = majority(upos, uneg)
            if child_depth >= k:
                continue
            if opts.objective_bound and (child_lb, child_depth, child_seq) >= best_key:
                pruned += 1
                continue
            if opts.lookahead_bound and (child_lb + rule_cost, child_depth + 1, child_seq) >= best_key:
                pruned += 1
                continue
            heapq.heappush(
                heap,
                (child_lb, next(counter), (child_seq, child_preds, captured | fresh, child_mist, upos, upos + uneg)),
            )
        if truncated:
            break

    rules = tuple(Rule(catalogue.conditions[i], pr) for i, pr in zip(best_key[2], best_preds))
    best = canonicalize(RuleList(rules, best_default))
    best_loss, best_mistakes = loss(best, ds, space.alpha)
    return SolverResult(
        rule_list=best,
        loss=best_loss,
        mistakes=best_mistakes,
        n=n,
        nodes_explored=explored,
        nodes_pruned=pruned,
        proven_optimal=not truncated,
        wall_time=time.perf_counter() - start,
        min_support=opts.min_support,
        catalogue_size=len(catalogue),
        feature_names=ds.feature_names,
        space=space,
    )


# Brute-force oracle -------------------------------------------------------------


def enumerate_conditions(X: np.ndarray, z: int, include_empty: bool = False):
    """(feature subset, boolean row mask) for every subset of size <= z, size then lexicographic order."""
    X = np.asarray(X, dtype=bool)
    out = []
    for size in range(1, z + 1):
        for combo in itertools.combinations(range(X.shape[1]), size):
            mask = np.all(X[:, list(combo)], axis=1)
            if include_empty or mask.any():
                out.append((combo, mask))
    return out


def count_sequences(c: int, k: int) -> int:
    """Ordered sequences of at most k distinct items out of c (the empty one included)."""
    return sum(math.perm(c, j) for j in range(0, min(k, c) + 1))


def brute_force(ds: BinaryDataset, space: SearchSpace, guard: int = BRUTE_FORCE_GUARD) -> SolverResult:
    """Exhaustive search over every ordered sequence of distinct antecedents."""
    from .complexity import GuardError

    start = time.perf_counter()
    conds = enumerate_conditions(ds.features, space.z)
    total = count_sequences(len(conds), space.k)
    if total > guard:
        raise GuardError(f"{total} rule lists to enumerate, guard is {guard}")
    y = ds.labels.astype(bool)
    n = ds.n
    alpha = Fraction(space.alpha)
    best: list = [None]
    visited = [0]

    def consider(seq, preds, uncovered, mist):
        visited[0] += 1
        upos = int(np.count_nonzero(y & uncovered))
        ucnt = int(np.count_nonzero(uncovered))
        dflt = majority(upos, ucnt - upos)
        value = Fraction(mist + min(upos, ucnt - upos), n) + alpha * len(seq)
        key = (value, len(seq), seq)
        if best[0] is None or key < best[0][0]:
            best[0] = (key, preds, dflt)

    def rec(seq, preds, uncovered, mist):
        consider(seq, preds, uncovered, mist)
        if len(seq) == space.k:
            return
        for i, (_, mask) in enumerate(conds):
            if i in seq:
                continue
            fresh = mask & uncovered
            c = int(np.count_nonzero(fresh))
            p = int(np.count_nonzero(fresh & y))
            rec(seq + (i,), preds + (majority(p, c - p),), uncovered & ~mask, mist + min(p, c - p))

    rec((), (), np.ones(n, dtype=bool), 0)
    (_, _, seq), preds, dflt = best[0]
    rules = tuple(Rule(conds[i][0], pr) for i, pr in zip(seq, preds))
    R = canonicalize(RuleList(rules, dflt))
    value, wrong = loss(R, ds, space.alpha)
    return SolverResult(
        rule_list=R,
        loss=value,
        mistakes=wrong,
        n=n,
        nodes_explored=visited[0],
        nodes_pruned=0,
        proven_optimal=True,
        wall_time=time.perf_counter() - start,
        catalogue_size=len(conds),
        feature_names=ds.feature_names,
        space=space,
    )


def realizable(conds, y: np.ndarray, k: int) -> bool:
    """Whether some list of at most k of the given conditions labels every row exactly as y.

    Exhaustive search restricted to prefixes that have made no mistake yet,
    since mistakes can only accumulate along a prefix.
    """
    y = np.asarray(y, dtype=bool)

    def pure(mask):
        hits = y[mask]
        return hits.size == 0 or hits.all() or not hits.any()

    def rec(used, uncovered):
        if pure(uncovered):
            return True
        if len(used) == k:
            return False
        for i, (_, mask) in enumerate(conds):
            if i in used:
                continue
            fresh = mask & uncovered
            if fresh.any() and pure(fresh) and rec(used | {i}, uncovered & ~mask):
                return True
        return False

    return rec(frozenset(), np.ones(y.shape[0], dtype=bool))
