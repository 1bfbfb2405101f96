"""Learn a rule list from a uniform random sample sized so that the result is
certified to be an (epsilon, theta)-approximation of the optimum on the full data.

    plan   -> sample size for the requested accuracy and confidence
    run    -> draw the sample, solve it exactly, certify
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import complexity
from .complexity import BoundParams
from .dataset import BinaryDataset, SampleSpec, sample_indices
from .rulelist import Model, RuleList, SearchSpace, _check_indices, _predict_rows
from .solver import SolverOptions, SolverResult, solve

DEFAULT_EPSILON = 0.5
DEFAULT_THETA = 0.025
DEFAULT_DELTA = 0.05
DEFAULT_ALPHA = 0.01
DEFAULT_SEED = 0

RESULT_SCHEMA_VERSION = 1


class CertificationError(RuntimeError):
    """The sample solve did not reach proven optimality over the full hypothesis class."""


@dataclass(frozen=True)
class Plan:
    omega: float
    m_hat: int
    n: int
    clamped: bool
    params: BoundParams
    space: SearchSpace

    @property
    def m(self) -> int:
        """Instances actually analysed: the full dataset when clamped."""
        return self.n if self.clamped else self.m_hat


def plan(n: int, space: SearchSpace, params: BoundParams, omega_value: float | None = None) -> Plan:
    """Sample size for the requested guarantee; independent of n except for clamping."""
    w = complexity.omega(params.k, params.z, params.d) if omega_value is None else omega_value
    m_hat = complexity.sample_size(params, w)
    return Plan(w, m_hat, n, m_hat >= n, params, space)


@dataclass(frozen=True)
class Certificate:
    epsilon: float
    theta: float
    delta: float
    m: int
    omega: float
    sample_loss: float
    dataset_loss_upper: float
    exact: bool = False

    @property
    def guarantee(self) -> str:
        if self.exact:
            return (
                "sample is the full dataset: the reported rule list is optimal, "
                "l(R~,D) = l(R*,D)"
            )
        return (
            f"with probability >= {1 - self.delta:g}, "
            f"l(R~,D) <= l(R*,D) + {self.epsilon:g}*max{{l(R*,D), {self.theta:g}}}; "
            f"l(R~,D) <= {self.dataset_loss_upper:.6g}"
        )

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "theta": self.theta,
            "delta": self.delta,
            "m": self.m,
            "omega": self.omega,
            "sample_loss": self.sample_loss,
            "dataset_loss_upper": self.dataset_loss_upper,
            "exact": self.exact,
            "guarantee": self.guarantee,
        }


def certify(solver_result: SolverResult, m: int, omega_value: float, params: BoundParams,
            exact: bool = False) -> Certificate:
    if not solver_result.certifiable:
        raise CertificationError(
            "sample solve is not proven optimal over the full hypothesis class; no certificate"
        )
    sample_loss = solver_result.loss
    return Certificate(
        epsilon=params.epsilon,
        theta=params.theta,
        delta=params.delta,
        m=m,
        omega=omega_value,
        sample_loss=sample_loss,
        dataset_loss_upper=complexity.deviation_upper(sample_loss, m, omega_value, params.delta),
        exact=exact,
    )


@dataclass(frozen=True)
class Evaluation:
    loss: float
    mistakes: int
    n: int
    deviation: float | None = None


def evaluate_full(R: RuleList, ds: BinaryDataset, alpha: float, sample_loss: float | None = None,
                  threads: int = 1, chunk: int = 1 << 18) -> Evaluation:
    """Full-data loss by row-wise evaluation, optionally split across threads."""
    _check_indices(R, ds.d)
    X, y = ds.features, ds.labels
    bounds = [(s, min(s + chunk, ds.n)) for s in range(0, ds.n, chunk)]

    def wrong(span):
        lo, hi = span
        return int(np.count_nonzero(_predict_rows(R, X[lo:hi]) != y[lo:hi]))

    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(threads) as pool:
            total = sum(pool.map(wrong, bounds))
    else:
        total = sum(map(wrong, bounds))
    value = total / ds.n + alpha * len(R)
    deviation = None if sample_loss is None else abs(value - sample_loss)
    return Evaluation(value, total, ds.n, deviation)


@dataclass
class SamRuleResult:
    rule_list: RuleList
    plan: Plan
    solver: SolverResult
    certificate: Certificate | None
    seed: int
    with_replacement: bool = True
    full: Evaluation | None = None
    sample_time: float = 0.0

    @property
    def sample_loss(self) -> float:
        return self.solver.loss

    def to_dict(self, timing: bool = True) -> dict:
        p = self.plan
        out = {
            "schema_version": RESULT_SCHEMA_VERSION,
            "model": Model.from_rulelist(self.rule_list, self.solver.feature_names, p.space).to_dict(),
            "plan": {
                "n": p.n,
                "m_hat": p.m_hat,
                "m": p.m,
                "clamped": p.clamped,
                "omega": p.omega,
                "k": p.space.k,
                "z": p.space.z,
                "d": p.space.d,
                "alpha": p.space.alpha,
            },
            "seed": self.seed,
            "with_replacement": self.with_replacement,
            "certificate": None if self.certificate is None else self.certificate.to_dict(),
            "solver": self.solver.to_dict(timing=timing),
        }
        if self.full is not None:
            out["full"] = {
                "loss": self.full.loss,
                "mistakes": self.full.mistakes,
                "n": self.full.n,
                "deviation": self.full.deviation,
            }
        if timing:
            out["timing"] = {"sample": self.sample_time, "solve": self.solver.wall_time}
        return out


def run(
    ds: BinaryDataset,
    space: SearchSpace,
    params: BoundParams,
    seed: int = DEFAULT_SEED,
    options: SolverOptions | None = None,
    with_replacement: bool = True,
    evaluate: bool = False,
    threads: int = 1,
) -> SamRuleResult:
    """Sample, solve exactly on the sample, certify.

    The certificate is withheld when the solve is not proven optimal or the
    sample was drawn without replacement.
    """
    if params.k < space.k or params.z < space.z or params.d < space.d:
        raise ValueError("bound parameters describe a smaller class than the search space")
    pl = plan(ds.n, space, params)
    t0 = time.perf_counter()
    if pl.clamped:
        sample = ds
    else:
        rows = sample_indices(ds.n, SampleSpec(pl.m_hat, seed, with_replacement))
        sample = ds.subset(rows)
    sample_time = time.perf_counter() - t0
    result = solve(sample, space, options)
    certificate = None
    if result.certifiable and (with_replacement or pl.clamped):
        certificate = certify(result, pl.m, pl.omega, params, exact=pl.clamped)
    out = SamRuleResult(result.rule_list, pl, result, certificate, seed, with_replacement,
                        sample_time=sample_time)
    if evaluate:
        out.full = evaluate_full(result.rule_list, ds, space.alpha, result.loss, threads)
    return out


def approximation_holds(loss_tilde: float, loss_star: float, epsilon: float, theta: float) -> bool:
    """The (epsilon, theta)-approximation inequality, with float slack of 1e-12."""
    return loss_tilde <= loss_star + epsilon * max(loss_star, theta) + 1e-12


def default_params(space: SearchSpace, epsilon: float = DEFAULT_EPSILON, theta: float = DEFAULT_THETA,
                   delta: float = DEFAULT_DELTA) -> BoundParams:
    return BoundParams(max(space.k, 1), space.z, space.d, epsilon, theta, delta)
