"""Sherrington-Kirkpatrick instances, classical cost, and ground-truth optima.

The cost is C(z) = sum_{i<j} w_ij z_i z_j with z_i in {+1, -1}. Weights are
drawn either uniformly from {+1, -1} or i.i.d. standard normal. Exact optima
come from brute-force enumeration (N <= 24 by default); larger sizes use an
in-repo multi-start tabu descent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from qeopt.rng import stream

BRUTE_FORCE_CAP = 24

WEIGHT_KINDS = ("pm1", "gaussian")


@dataclass(frozen=True)
class SKInstance:
    """Fully connected instance with strictly-upper-triangular weights."""

    n_vars: int
    weights: np.ndarray  # (N, N), zero on and below the diagonal
    weight_kind: str
    seed: int

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (self.n_vars, self.n_vars):
            raise ValueError(f"weights must be ({self.n_vars}, {self.n_vars}), got {w.shape}")
        if np.any(w[np.tril_indices(self.n_vars)] != 0.0):
            raise ValueError("weights must be strictly upper triangular")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def sym_weights(self) -> np.ndarray:
        return self.weights + self.weights.T

    def weight_pairs(self):
        """Yield (i, j, w_ij) for the stored i < j entries."""
        iu, ju = np.nonzero(self.weights)
        for i, j in zip(iu.tolist(), ju.tolist()):
            yield i, j, float(self.weights[i, j])


@dataclass(frozen=True)
class OptimumRecord:
    best_cost: float
    minimizers: frozenset[tuple[int, ...]]
    method: str  # "brute_force" | "local_search"


def generate_sk(n_vars: int, kind: str = "pm1", seed: int = 0) -> SKInstance:
    """Draw a random instance, deterministic given (N, kind, seed)."""
    if n_vars < 2:
        raise ValueError(f"need at least 2 variables, got {n_vars}")
    if kind not in WEIGHT_KINDS:
        raise ValueError(f"weight kind must be one of {WEIGHT_KINDS}, got {kind!r}")
    rng = stream(seed, "sk", kind, n_vars)
    n_pairs = n_vars * (n_vars - 1) // 2
    if kind == "pm1":
        vals = rng.integers(0, 2, size=n_pairs) * 2.0 - 1.0
    else:
        vals = rng.standard_normal(n_pairs)
    w = np.zeros((n_vars, n_vars))
    w[np.triu_indices(n_vars, k=1)] = vals
    return SKInstance(n_vars=n_vars, weights=w, weight_kind=kind, seed=seed)


def example_instance_n4() -> SKInstance:
    """The fixed 4-variable instance used throughout tests and the CLI.

    Ground states are (1,-1,1,-1) and (-1,1,-1,1) with cost -4.
    """
    w = np.zeros((4, 4))
    w[0, 1], w[0, 2], w[0, 3] = 1.0, -1.0, 1.0
    w[1, 2], w[1, 3] = -1.0, -1.0
    w[2, 3] = 1.0
    return SKInstance(n_vars=4, weights=w, weight_kind="pm1", seed=-1)


def pad_instance(instance: SKInstance, n_vars: int) -> SKInstance:
    """Extend an instance with zero-weight dummy variables up to n_vars."""
    if n_vars < instance.n_vars:
        raise ValueError("cannot pad to fewer variables")
    if n_vars == instance.n_vars:
        return instance
    w = np.zeros((n_vars, n_vars))
    w[: instance.n_vars, : instance.n_vars] = instance.weights
    return SKInstance(n_vars=n_vars, weights=w, weight_kind=instance.weight_kind, seed=instance.seed)


def cost(instance: SKInstance, spins: np.ndarray) -> float:
    """C(z) = sum_{i<j} w_ij z_i z_j."""
    z = np.asarray(spins, dtype=np.float64)
    if z.shape != (instance.n_vars,):
        raise ValueError(f"expected {instance.n_vars} spins, got shape {z.shape}")
    return float(z @ instance.weights @ z)


def approximation_ratio(c: float, c_star: float) -> float:
    """r = C / C*; requires C* < 0 (SK optima are negative)."""
    if not c_star < 0:
        raise ValueError(f"approximation ratio needs C* < 0, got {c_star}")
    return c / c_star


def brute_force_optimum(instance: SKInstance, cap: int = BRUTE_FORCE_CAP) -> OptimumRecord:
    """Exact C* and the complete minimizer set by enumeration.

    Exploits the global flip symmetry: only strings with z_0 = +1 are
    enumerated and each minimizer contributes its negation as well.
    """
    n = instance.n_vars
    if n > cap:
        raise ValueError(f"brute force capped at N={cap}, got N={n}")

    w = instance.weights
    best = np.inf
    winners: list[np.ndarray] = []
    half = 1 << (n - 1)
    chunk = 1 << 18
    for start in range(0, half, chunk):
        idx = np.arange(start, min(start + chunk, half), dtype=np.int64)
        # z_0 = +1 fixed; remaining n-1 spins from the bits of idx
        shifts = np.arange(n - 2, -1, -1, dtype=np.int64)
        z = np.empty((len(idx), n), dtype=np.float64)
        z[:, 0] = 1.0
        z[:, 1:] = 1.0 - 2.0 * ((idx[:, None] >> shifts[None, :]) & 1)
        costs = np.einsum("bi,ij,bj->b", z, w, z, optimize=True)
        c_min = costs.min()
        if c_min < best:
            best = c_min
            winners = [z[costs == c_min]]
        elif c_min == best:
            winners.append(z[costs == c_min])

    mins: set[tuple[int, ...]] = set()
    for block in winners:
        for row in block:
            t = tuple(int(v) for v in row)
            mins.add(t)
            mins.add(tuple(-v for v in t))
    return OptimumRecord(best_cost=float(best), minimizers=frozenset(mins), method="brute_force")


def local_search_optimum(
    instance: SKInstance,
    n_restarts: int = 64,
    max_sweeps: int = 64,
    tabu_tenure: int = 8,
    seed: int = 0,
) -> OptimumRecord:
    """Multi-start single-flip tabu descent, restarts advanced in lockstep.

    Each restart performs ``max_sweeps * N`` best-improvement flips with a
    tabu list of length ``tabu_tenure`` and an aspiration override when a
    move beats that restart's incumbent. Deterministic given the seed.
    Calibrated to match brute force on N <= 24 with the default budgets.
    """
    if min(n_restarts, tabu_tenure) < 1 or max_sweeps < 0:
        raise ValueError("local search budgets must be positive")
    n = instance.n_vars
    w_sym = instance.sym_weights
    rng = stream(seed, "tabu")
    r = n_restarts

    z = rng.integers(0, 2, size=(r, n)) * 2.0 - 1.0
    fields = z @ w_sym  # (R, N) local fields
    costs = 0.5 * np.einsum("rn,rn->r", z, fields)
    tabu_until = np.zeros((r, n), dtype=np.int64)
    inc_costs = costs.copy()
    inc_z = z.copy()
    rows = np.arange(r)

    for move in range(max_sweeps * n):
        gains = -2.0 * z * fields
        allowed = tabu_until <= move
        # aspiration: a tabu flip is allowed if it improves the incumbent
        allowed |= costs[:, None] + gains < inc_costs[:, None] - 1e-12
        candidates = np.where(allowed, gains, np.inf)
        picks = np.argmin(candidates, axis=1)
        gain = candidates[rows, picks]
        movable = np.isfinite(gain)
        if not movable.any():
            break
        rr = rows[movable]
        ii = picks[movable]
        z[rr, ii] = -z[rr, ii]
        fields[rr] += 2.0 * z[rr, ii, None] * w_sym[ii]
        costs[rr] += gain[movable]
        tabu_until[rr, ii] = move + tabu_tenure
        improved = rr[costs[rr] < inc_costs[rr] - 1e-12]
        if improved.size:
            inc_costs[improved] = costs[improved]
            inc_z[improved] = z[improved]

    best = int(np.argmin(inc_costs))
    best_z = inc_z[best]
    # re-evaluate to shed incremental float drift
    best_cost = cost(instance, best_z)
    return OptimumRecord(
        best_cost=best_cost,
        minimizers=frozenset({tuple(int(v) for v in best_z)}),
        method="local_search",
    )


def ground_truth(instance: SKInstance, seed: int = 0) -> OptimumRecord:
    """Brute force when feasible, tabu search otherwise."""
    if instance.n_vars <= BRUTE_FORCE_CAP:
        return brute_force_optimum(instance)
    return local_search_optimum(instance, seed=seed)
