"""Layered variational circuit whose phase separator is rebuilt per layer.

Each layer applies exp(i gamma H[psi]) with H measured from the previous
layer's state, then the symmetry-breaking bias exp(i gamma' sum_i Z_i) over
the register, then the transverse-field mixer exp(i beta sum X) on all
qubits. In shot mode the statistics come from sampling a re-executed prefix
circuit whose earlier phase separators are frozen, so a p-layer run costs
p + 1 circuit executions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qeopt.encoding import EncodingScheme, basis_spin_table
from qeopt.estimator import (
    CostBreakdown,
    GroupStats,
    build_cost_hamiltonian,
    estimate_cost,
    exact_group_stats,
    shot_group_stats,
)
from qeopt.problem import SKInstance
from qeopt.rng import stream
from qeopt.simulator import DiagonalOperator, Statevector, init_plus


@dataclass(frozen=True)
class LayerParams:
    beta: float
    gamma: float
    gamma_bias: float = 0.0

    def __post_init__(self):
        for v in (self.beta, self.gamma, self.gamma_bias):
            if not np.isfinite(v):
                raise ValueError(f"layer parameters must be finite, got {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.beta, self.gamma, self.gamma_bias])


@dataclass
class AnsatzTrace:
    """Per-layer record of a single ansatz execution (layer 0 included)."""

    instance: SKInstance
    scheme: EncodingScheme
    params: list[LayerParams]
    mode: str  # "exact" or "shots"
    layer_stats: list[GroupStats]
    layer_costs: list[CostBreakdown]
    frozen_hamiltonians: list[DiagonalOperator]
    final_state: Statevector | None = None
    final_counts: dict[int, int] | None = None
    n_shots: int | None = None

    @property
    def final_cost(self) -> float:
        return self.layer_costs[-1].total


def apply_layer(
    state: Statevector,
    hamiltonian: DiagonalOperator,
    layer: LayerParams,
) -> Statevector:
    """exp(i beta H_x) exp(i gamma' H_z) exp(i gamma H) applied in place.

    The bias field H_z = sum_i Z_i runs over the whole register. Restricting
    it to the data qubits leaves the worked 4-variable example stuck at cost
    -2 for any depth up to 5 (the uniform data field acts trivially on the
    zero-magnetization ground-state patterns), so the register-wide field is
    load-bearing for symmetry breaking at small depth.
    """
    state.apply_diagonal_phase(hamiltonian, layer.gamma)
    if layer.gamma_bias != 0.0:
        for qubit in range(state.n_qubits):
            state.apply_rz(qubit, -2.0 * layer.gamma_bias)
    state.apply_mixer(layer.beta)
    return state


def run_ansatz(
    instance: SKInstance,
    scheme: EncodingScheme,
    params: list[LayerParams],
    mode: str = "exact",
    n_shots: int | None = None,
    seed: int = 0,
) -> AnsatzTrace:
    """Execute the full ansatz and record per-layer statistics and costs."""
    if instance.n_vars != scheme.n_vars:
        raise ValueError(
            f"instance has {instance.n_vars} variables, scheme encodes {scheme.n_vars}"
        )
    if not params:
        raise ValueError("need at least one layer")
    if mode not in ("exact", "shots"):
        raise ValueError(f"mode must be 'exact' or 'shots', got {mode!r}")
    if mode == "shots" and (n_shots is None or n_shots < 1):
        raise ValueError("shot mode needs n_shots >= 1")

    if mode == "exact":
        return _run_exact(instance, scheme, params)
    return _run_shots(instance, scheme, params, n_shots, seed)


def _run_exact(instance, scheme, params) -> AnsatzTrace:
    state = init_plus(scheme.n_qubits)
    stats = exact_group_stats(scheme, state)
    layer_stats = [stats]
    layer_costs = [estimate_cost(instance, scheme, stats)]
    frozen = []
    for layer in params:
        hamiltonian = build_cost_hamiltonian(instance, scheme, stats)
        frozen.append(hamiltonian)
        apply_layer(state, hamiltonian, layer)
        stats = exact_group_stats(scheme, state)
        layer_stats.append(stats)
        layer_costs.append(estimate_cost(instance, scheme, stats))
    return AnsatzTrace(
        instance=instance,
        scheme=scheme,
        params=list(params),
        mode="exact",
        layer_stats=layer_stats,
        layer_costs=layer_costs,
        frozen_hamiltonians=frozen,
        final_state=state,
    )


def _run_shots(instance, scheme, params, n_shots, seed) -> AnsatzTrace:
    p = len(params)
    layer_stats: list[GroupStats] = []
    layer_costs: list[CostBreakdown] = []
    frozen: list[DiagonalOperator] = []
    counts: dict[int, int] = {}
    for k in range(p + 1):
        state = init_plus(scheme.n_qubits)
        for j in range(k):
            apply_layer(state, frozen[j], params[j])
        counts = state.sample(n_shots, seed=seed, key=("ansatz-layer", k))
        stats = shot_group_stats(scheme, counts, n_shots)
        layer_stats.append(stats)
        layer_costs.append(estimate_cost(instance, scheme, stats))
        if k < p:
            frozen.append(build_cost_hamiltonian(instance, scheme, stats))
    return AnsatzTrace(
        instance=instance,
        scheme=scheme,
        params=list(params),
        mode="shots",
        layer_stats=layer_stats,
        layer_costs=layer_costs,
        frozen_hamiltonians=frozen,
        final_counts=counts,
        n_shots=n_shots,
    )


def landscape(
    instance: SKInstance,
    scheme: EncodingScheme,
    betas: np.ndarray,
    gammas: np.ndarray,
    gamma_bias: float = 0.0,
    mode: str = "exact",
    n_shots: int | None = None,
    seed: int = 0,
) -> np.ndarray:
    """Single-layer cost over a (beta, gamma) grid at fixed bias angle."""
    betas = np.atleast_1d(np.asarray(betas, dtype=np.float64))
    gammas = np.atleast_1d(np.asarray(gammas, dtype=np.float64))
    if betas.size == 0 or gammas.size == 0:
        raise ValueError("parameter grids must be nonempty")
    grid = np.empty((betas.size, gammas.size))
    for bi, beta in enumerate(betas):
        for gi, gamma in enumerate(gammas):
            trace = run_ansatz(
                instance,
                scheme,
                [LayerParams(beta, gamma, gamma_bias)],
                mode=mode,
                n_shots=n_shots,
                seed=_point_seed(seed, bi, gi),
            )
            grid[bi, gi] = trace.final_cost
    return grid


def _point_seed(seed: int, bi: int, gi: int) -> int:
    return (seed * 1_000_003 + bi * 1009 + gi) & 0x7FFFFFFF


def extract_solution(trace: AnsatzTrace, scheme: EncodingScheme, seed: int = 0) -> tuple[np.ndarray, float]:
    """Round the final state to a spin string.

    Candidate A takes sign(zbar_i), ties broken by a seeded coin. Candidate B
    takes the modal data pattern per label from the final distribution. The
    candidate with the lower classical cost wins.
    """
    from qeopt.problem import cost as classical_cost

    rng = stream(seed, "rounding")
    stats = trace.layer_stats[-1]
    coin = rng.integers(0, 2, size=scheme.n_vars) * 2 - 1
    cand_a = np.where(stats.zbar > 0, 1, np.where(stats.zbar < 0, -1, coin)).astype(np.int8)

    d = scheme.group_size
    if trace.mode == "exact":
        grouped = trace.final_state.probabilities().reshape(scheme.n_groups, 1 << d)
    else:
        freq = np.zeros(scheme.dim)
        for index, count in trace.final_counts.items():
            freq[index] = count
        grouped = freq.reshape(scheme.n_groups, 1 << d)
    spins = basis_spin_table(d)
    cand_b = np.empty(scheme.n_vars, dtype=np.int8)
    for label in range(scheme.n_groups):
        if grouped[label].sum() > 0:
            pattern = int(np.argmax(grouped[label]))
            cand_b[d * label : d * (label + 1)] = spins[pattern]
        else:
            cand_b[d * label : d * (label + 1)] = rng.integers(0, 2, size=d) * 2 - 1

    cost_a = classical_cost(trace.instance, cand_a)
    cost_b = classical_cost(trace.instance, cand_b)
    return (cand_a, cost_a) if cost_a <= cost_b else (cand_b, cost_b)
