"""Variational parameter search, cross-size transfer, and concentration runs.

The search is a basin-hopping loop: Gaussian perturbation of the incumbent
(wrapped into the parameter box), derivative-free local refinement, accept
on improvement. The box is beta in [0, pi), gamma and gamma' in [-pi, pi).
Optimal gamma coefficients shrink like d/N^(3/2), which both sets the hop
scale for gamma and gives the rescaling rule for reusing parameters across
problem sizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize as sciopt

from qeopt.ansatz import LayerParams, run_ansatz
from qeopt.encoding import EncodingScheme
from qeopt.problem import OptimumRecord, SKInstance, approximation_ratio, ground_truth
from qeopt.rng import stream

LOCAL_METHODS = ("nelder_mead", "coordinate_descent")


@dataclass(frozen=True)
class OptimizerConfig:
    n_hops: int = 20
    hop_scale: float = 1.0
    local_method: str = "nelder_mead"
    local_tol: float = 1e-6
    max_local_evals: int = 200
    beta_bounds: tuple[float, float] = (0.0, math.pi)
    gamma_bounds: tuple[float, float] = (-math.pi, math.pi)
    gamma_bias_bounds: tuple[float, float] = (-math.pi, math.pi)
    freeze_gamma_bias: bool = False
    initial: tuple[LayerParams, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_hops < 0 or self.max_local_evals < 1 or self.local_tol <= 0:
            raise ValueError("optimizer budgets must be positive")
        if self.local_method not in LOCAL_METHODS:
            raise ValueError(f"local method must be one of {LOCAL_METHODS}")


@dataclass(frozen=True)
class OptimResult:
    best_params: tuple[LayerParams, ...]
    best_cost: float
    ratio: float
    eval_count: int
    history: tuple[float, ...]  # best cost after each accepted hop
    c_star: float


def gamma_scale_hint(scheme: EncodingScheme) -> float:
    """Characteristic size of good gamma values, ~ d / N^(3/2)."""
    n, d = scheme.n_vars, scheme.group_size
    return min(math.pi / 2, 4.0 * d / n**1.5)


class _CostFunction:
    """Flattened-parameter view of the exact-mode ansatz cost."""

    def __init__(self, instance, scheme, p, config):
        self.instance = instance
        self.scheme = scheme
        self.p = p
        self.config = config
        self.eval_count = 0
        self.best_x: np.ndarray | None = None
        self.best_cost = math.inf
        self.frozen_bias = config.freeze_gamma_bias
        self.n_params = (2 if self.frozen_bias else 3) * p
        self.bias_values = np.zeros(p)
        if config.initial is not None:
            self.bias_values = np.array([lp.gamma_bias for lp in config.initial])

    def pack(self, params: list[LayerParams]) -> np.ndarray:
        if self.frozen_bias:
            return np.array([v for lp in params for v in (lp.beta, lp.gamma)])
        return np.array([v for lp in params for v in (lp.beta, lp.gamma, lp.gamma_bias)])

    def unpack(self, x: np.ndarray) -> list[LayerParams]:
        layers = []
        if self.frozen_bias:
            for k in range(self.p):
                layers.append(LayerParams(x[2 * k], x[2 * k + 1], self.bias_values[k]))
        else:
            for k in range(self.p):
                layers.append(LayerParams(x[3 * k], x[3 * k + 1], x[3 * k + 2]))
        return layers

    def wrap(self, x: np.ndarray) -> np.ndarray:
        """Map parameters back into the box using their periodicity."""
        x = np.array(x, dtype=np.float64)
        stride = 2 if self.frozen_bias else 3
        x[0::stride] = np.mod(x[0::stride], math.pi)
        for off in range(1, stride):
            x[off::stride] = np.mod(x[off::stride] + math.pi, 2 * math.pi) - math.pi
        return x

    def bounds_list(self) -> list[tuple[float, float]]:
        c = self.config
        per_layer = [c.beta_bounds, c.gamma_bounds]
        if not self.frozen_bias:
            per_layer.append(c.gamma_bias_bounds)
        return per_layer * self.p

    def hop_scales(self) -> np.ndarray:
        angle = 0.3 * self.config.hop_scale
        gamma = self.config.hop_scale * max(0.5 * gamma_scale_hint(self.scheme), 1e-3)
        per_layer = [angle, gamma] if self.frozen_bias else [angle, gamma, angle]
        return np.array(per_layer * self.p)

    def __call__(self, x: np.ndarray) -> float:
        self.eval_count += 1
        trace = run_ansatz(self.instance, self.scheme, self.unpack(np.asarray(x)), mode="exact")
        cost = trace.final_cost
        if cost < self.best_cost:
            self.best_cost = cost
            self.best_x = np.array(x, dtype=np.float64)
        return cost


def _local_refine(fn: _CostFunction, x0: np.ndarray) -> None:
    cfg = fn.config
    budget = cfg.max_local_evals
    bounds = fn.bounds_list()
    x0 = np.clip(x0, [lo for lo, _ in bounds], [hi for _, hi in bounds])
    if fn.config.local_method == "nelder_mead":
        sciopt.minimize(
            fn,
            x0,
            method="Nelder-Mead",
            bounds=bounds,
            options={"maxfev": budget, "fatol": cfg.local_tol, "xatol": cfg.local_tol},
        )
        return
    # cyclic coordinate descent with bounded scalar searches
    x = np.array(x0, dtype=np.float64)
    start_evals = fn.eval_count
    current = fn(x)
    while fn.eval_count - start_evals < budget:
        improved = False
        for k in range(len(x)):
            lo, hi = bounds[k]
            span = hi - lo

            def along(t, k=k):
                trial = x.copy()
                trial[k] = t
                return fn(trial)

            res = sciopt.minimize_scalar(
                along,
                bounds=(max(lo, x[k] - 0.25 * span), min(hi, x[k] + 0.25 * span)),
                method="bounded",
                options={"maxiter": 12, "xatol": cfg.local_tol},
            )
            if res.fun < current - cfg.local_tol:
                x[k] = res.x
                current = res.fun
                improved = True
            if fn.eval_count - start_evals >= budget:
                break
        if not improved:
            break


def _presearch(fn: _CostFunction) -> np.ndarray:
    """Coarse deterministic grid to seed the first local search."""
    hint = gamma_scale_hint(fn.scheme)
    betas = np.concatenate([[0.1, 0.2], np.linspace(0.0, math.pi, 9)[1:-1]])
    gammas = np.concatenate([[0.0], hint * np.array([-2, -1, -0.5, -0.25, 0.25, 0.5, 1, 2])])
    biases = [0.0] if fn.frozen_bias else [-0.8, -0.4, 0.0, 0.4, 0.8]
    best_x, best_cost = None, math.inf
    for beta in betas:
        for gamma in gammas:
            for bias in biases:
                layer = LayerParams(beta, gamma, bias)
                x = fn.pack([layer] * fn.p)
                cost = fn(x)
                if cost < best_cost:
                    best_cost, best_x = cost, x
    return best_x


def optimize(
    instance: SKInstance,
    scheme: EncodingScheme,
    p: int,
    config: OptimizerConfig | None = None,
    c_star: float | None = None,
) -> OptimResult:
    """Basin-hopping search over the p-layer parameters in exact mode."""
    if p < 1:
        raise ValueError(f"need p >= 1, got {p}")
    config = config or OptimizerConfig()
    if c_star is None:
        c_star = ground_truth(instance, seed=config.seed).best_cost
    fn = _CostFunction(instance, scheme, p, config)

    if config.initial is not None:
        if len(config.initial) != p:
            raise ValueError(f"initial guess has {len(config.initial)} layers, need {p}")
        x_raw = fn.pack(list(config.initial))
        fn(x_raw)  # pin the warm-start cost so the result can never be worse
        x0 = fn.wrap(x_raw)
    else:
        x0 = _presearch(fn)

    rng = stream(config.seed, "hops")
    history = []
    if config.max_local_evals > 1 and config.n_hops >= 0:
        _local_refine(fn, x0)
    history.append(fn.best_cost)
    scales = fn.hop_scales()
    for _ in range(config.n_hops):
        start = fn.best_x if fn.best_x is not None else x0
        candidate = fn.wrap(start + scales * rng.standard_normal(fn.n_params))
        before = fn.best_cost
        _local_refine(fn, candidate)
        if fn.best_cost < before:
            history.append(fn.best_cost)

    best_params = tuple(fn.unpack(fn.best_x))
    return OptimResult(
        best_params=best_params,
        best_cost=fn.best_cost,
        ratio=approximation_ratio(fn.best_cost, c_star),
        eval_count=fn.eval_count,
        history=tuple(history),
        c_star=c_star,
    )


def _best_appended_layer(
    instance: SKInstance,
    scheme: EncodingScheme,
    prev: tuple[LayerParams, ...],
    config: OptimizerConfig,
) -> LayerParams:
    """Coarse grid over one extra layer with the earlier layers frozen.

    The grid contains the all-zero layer, so seeding from the result keeps
    the previous depth's cost attainable.
    """
    hint = gamma_scale_hint(scheme)
    betas = np.concatenate([[0.0, 0.1, 0.2], np.linspace(0.0, math.pi, 9)[1:-1]])
    gammas = np.concatenate([[0.0], hint * np.array([-2, -1, -0.5, 0.5, 1, 2])])
    biases = [0.0] if config.freeze_gamma_bias else [-0.4, 0.0, 0.4]
    best_layer, best_cost = LayerParams(0.0, 0.0, 0.0), math.inf
    for beta in betas:
        for gamma in gammas:
            for bias in biases:
                layer = LayerParams(beta, gamma, bias)
                cost = run_ansatz(instance, scheme, list(prev) + [layer], mode="exact").final_cost
                if cost < best_cost:
                    best_cost, best_layer = cost, layer
    return best_layer


def warm_start_schedule(
    instance: SKInstance,
    scheme: EncodingScheme,
    p_max: int,
    config: OptimizerConfig | None = None,
    c_star: float | None = None,
) -> dict[int, OptimResult]:
    """Optimize p = 1..p_max, seeding each depth with the previous optimum
    plus a grid-searched extra layer (the all-zero layer is in the grid, so
    the p-1 cost is always attainable)."""
    config = config or OptimizerConfig()
    if c_star is None:
        c_star = ground_truth(instance, seed=config.seed).best_cost
    results: dict[int, OptimResult] = {}
    for p in range(1, p_max + 1):
        if p > 1:
            prev = results[p - 1].best_params
            appended = _best_appended_layer(instance, scheme, prev, config)
            config = replace(config, initial=prev + (appended,))
        results[p] = optimize(instance, scheme, p, config, c_star)
    return results


def transfer_params(
    params: tuple[LayerParams, ...] | list[LayerParams],
    from_shape: tuple[int, int],
    to_shape: tuple[int, int],
) -> tuple[LayerParams, ...]:
    """Rescale gamma by (d1/d0) (N0/N1)^(3/2); beta and gamma' carry over."""
    n0, d0 = from_shape
    n1, d1 = to_shape
    factor = (d1 / d0) * (n0 / n1) ** 1.5
    return tuple(LayerParams(lp.beta, lp.gamma * factor, lp.gamma_bias) for lp in params)


@dataclass(frozen=True)
class ConcentrationResult:
    ratios: np.ndarray
    mean: float
    stderr: float
    costs: np.ndarray
    c_stars: np.ndarray
    c_star_methods: tuple[str, ...]


def concentration_experiment(
    instances: list[SKInstance],
    scheme: EncodingScheme,
    params: tuple[LayerParams, ...] | list[LayerParams],
    seed: int = 0,
    ground_truths: list[OptimumRecord] | None = None,
) -> ConcentrationResult:
    """Run frozen parameters over an ensemble and collect approximation ratios.

    ``ground_truths`` lets callers reuse already-solved optima; otherwise each
    instance is solved here (brute force under the size cap, tabu beyond).
    """
    if not instances:
        raise ValueError("need at least one instance")
    if ground_truths is not None and len(ground_truths) != len(instances):
        raise ValueError("ground_truths must match instances one-to-one")
    ratios, costs, c_stars, methods = [], [], [], []
    for idx, inst in enumerate(instances):
        if inst.n_vars != scheme.n_vars:
            raise ValueError("ensemble instances must match the scheme size")
        record = ground_truths[idx] if ground_truths else ground_truth(inst, seed=seed + idx)
        trace = run_ansatz(inst, scheme, list(params), mode="exact")
        costs.append(trace.final_cost)
        c_stars.append(record.best_cost)
        methods.append(record.method)
        ratios.append(approximation_ratio(trace.final_cost, record.best_cost))
    ratios = np.array(ratios)
    stderr = float(ratios.std(ddof=1) / math.sqrt(len(ratios))) if len(ratios) > 1 else 0.0
    return ConcentrationResult(
        ratios=ratios,
        mean=float(ratios.mean()),
        stderr=stderr,
        costs=np.array(costs),
        c_stars=np.array(c_stars),
        c_star_methods=tuple(methods),
    )


def optimize_gamma_scale(
    instance: SKInstance,
    scheme: EncodingScheme,
    donor_params: tuple[LayerParams, ...] | list[LayerParams],
    scan: np.ndarray | None = None,
) -> float:
    """Best common multiplier theta for the donor gamma values.

    Beta and gamma' stay at the donor values; every layer's gamma is scaled
    by the same theta. The default scan covers positive rescalings over three
    decades (the size-transfer law is a positive rescaling); pass a custom
    scan to explore sign flips. The coarse winner is refined with a bounded
    scalar search.
    """
    if scan is None:
        scan = np.geomspace(0.02, 50.0, 81)

    def cost_at(theta: float) -> float:
        scaled = [LayerParams(lp.beta, theta * lp.gamma, lp.gamma_bias) for lp in donor_params]
        return run_ansatz(instance, scheme, scaled, mode="exact").final_cost

    values = np.array([cost_at(t) for t in scan])
    k = int(np.argmin(values))
    lo = scan[max(0, k - 1)]
    hi = scan[min(len(scan) - 1, k + 1)]
    if lo == hi:
        return float(scan[k])
    res = sciopt.minimize_scalar(cost_at, bounds=(min(lo, hi), max(lo, hi)), method="bounded",
                                 options={"xatol": 1e-6})
    return float(res.x) if res.fun <= values[k] else float(scan[k])


@dataclass(frozen=True)
class ScalingFit:
    exponent: float
    prefactor: float
    residuals: np.ndarray
    low_confidence: bool


def fit_gamma_scaling(points: list[tuple[int, int, float]]) -> ScalingFit:
    """Least-squares fit of log|theta| against log(d / N^(3/2)).

    ``points`` holds (N, d, theta_opt) records; the expected exponent is 1.
    Fewer than three points still fit but are flagged low-confidence.
    """
    if len(points) < 2:
        raise ValueError("need at least two (N, d, theta) points")
    xs = np.array([math.log(d / n**1.5) for n, d, _ in points])
    if np.allclose(xs, xs[0]):
        raise ValueError("degenerate grid: all points share d / N^(3/2)")
    thetas = np.array([abs(t) for _, _, t in points])
    if np.any(thetas <= 0):
        raise ValueError("theta values must be nonzero")
    ys = np.log(thetas)
    slope, intercept = np.polyfit(xs, ys, 1)
    residuals = ys - (slope * xs + intercept)
    return ScalingFit(
        exponent=float(slope),
        prefactor=float(math.exp(intercept)),
        residuals=residuals,
        low_confidence=len(points) < 3,
    )
