"""Steady spike rates and the subset conditions for full stability."""

import itertools
import logging

import numpy as np

from ..core.errors import PreconditionError, RankError, SizeError
from ..core.models import StabilityReport, SubsetCheck, Verdict
from .linalg import check_system, solve_left

logger = logging.getLogger(__name__)

MAX_SUBSET_NEURONS = 20


def _symmetric_inputs(H, w, nu: float) -> tuple[np.ndarray, np.ndarray]:
    H = np.atleast_1d(np.asarray(H, dtype=float))
    w = np.broadcast_to(np.asarray(w, dtype=float), H.shape)
    if not np.all(np.isfinite(H)) or not np.all(np.isfinite(w)):
        raise PreconditionError("H and w must be finite")
    if np.any(w <= 0) or np.any(H <= w):
        raise PreconditionError("closed form requires H_i > w_i > 0 for every neuron")
    if not np.isfinite(nu) or nu <= 0:
        raise PreconditionError(f"nu must be positive, got {nu}")
    return H, w


def closed_form_rates(H, w, nu: float) -> np.ndarray:
    """Steady rates nu / ((H_i - w_i)(1 + sum_k w_k / (H_k - w_k)))."""
    H, w = _symmetric_inputs(H, w, nu)
    gap = H - w
    return nu / (gap * (1.0 + np.sum(w / gap)))


def emptying_time_bound(H, w, nu: float) -> float:
    """Upper bound on the time a fluid path started in the unit l1 ball needs to reach 0."""
    H, w = _symmetric_inputs(H, w, nu)
    return float((1.0 + np.sum(w / (H - w))) / nu)


def steady_rates(B, nu) -> tuple[np.ndarray, bool]:
    """Solve x @ B = nu. Returns (x, feasible) where feasible means x > 0.

    Raises RankError when B is singular.
    """
    B, nu = check_system(B, nu)
    x = solve_left(B, nu)
    return x, bool(np.all(x > 0))


def _check_subset(B: np.ndarray, nu: np.ndarray, subset: tuple[int, ...]) -> SubsetCheck:
    rest = [j for j in range(len(nu)) if j not in subset]
    budget = float(nu[rest].sum())
    try:
        a = solve_left(B[np.ix_(subset, subset)], nu[list(subset)], subset)
    except RankError:
        return SubsetCheck(subset, False, None, None, budget, False)
    load = float(a @ B[np.ix_(subset, rest)].sum(axis=1))
    passed = bool(np.all(a > 0) and load < budget)
    return SubsetCheck(subset, True, a, load, budget, passed)


def check_partial_stability(B, nu) -> StabilityReport:
    """Evaluate every nonempty proper subset and classify the configuration.

    Subsets are visited by size, then lexicographically; the witness of a
    partial-risk verdict is the first failing one. A subset S passes when
    a^S @ B[S, S] = nu_S has a positive solution and
    sum_{i in S} a_i sum_{j not in S} b_ij < sum_{j not in S} nu_j.
    """
    B, nu = check_system(B, nu)
    n = len(nu)
    if n > MAX_SUBSET_NEURONS:
        raise SizeError(f"subset enumeration supports at most {MAX_SUBSET_NEURONS} neurons, got {n}")

    try:
        rates, feasible = steady_rates(B, nu)
    except RankError:
        rates, feasible = None, False

    checks = [
        _check_subset(B, nu, subset)
        for size in range(1, n)
        for subset in itertools.combinations(range(n), size)
    ]
    failing = next((c.subset for c in checks if not c.passed), None)
    stable = feasible and failing is None
    verdict = Verdict.STABLE if stable else Verdict.PARTIAL_RISK
    logger.info("stability verdict %s over %d subsets", verdict.value, len(checks))
    return StabilityReport(rates, feasible, checks, verdict, failing)
