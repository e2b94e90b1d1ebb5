"""Conditional measurement statistics, the quadratic cost, and the
state-dependent diagonal Hamiltonian.

Variables are read out by post-selecting shots on their group label:
``zbar_i = <P_l Z_di> / <P_l>`` and, within a group, ``corr_ij =
<P_l Z_di Z_dj> / <P_l>``. The cost splits into an intra-group part that
uses measured pair correlations and a cross-group part built from products
of single-spin means. The same statistics define the diagonal Hamiltonian
whose expectation reproduces the cost; its coefficients are normalized by
the current label probabilities, so the operator depends on the state it
was measured from.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from qeopt.encoding import EncodingScheme, basis_spin_table
from qeopt.problem import SKInstance
from qeopt.simulator import DiagonalOperator, Statevector

log = logging.getLogger(__name__)

OBSERVED_EPS = 1e-12


@dataclass(frozen=True)
class GroupStats:
    """Per-label probabilities, conditional means, and pair correlations."""

    p_label: np.ndarray  # (N/d,)
    zbar: np.ndarray  # (N,)
    pair_corr: dict[tuple[int, int], float]
    observed: np.ndarray  # (N/d,) bool
    source: str  # "exact" or "shots"
    n_shots: int | None = None
    # (N/d, C(d,2)) matrix mirror of pair_corr for vectorized consumers
    corr_matrix: np.ndarray = field(repr=False, default=None)

    @property
    def n_unobserved(self) -> int:
        return int(np.size(self.observed) - np.count_nonzero(self.observed))


@dataclass(frozen=True)
class CostBreakdown:
    intra: float
    inter: float

    @property
    def total(self) -> float:
        return self.intra + self.inter


def data_pair_indices(d: int) -> list[tuple[int, int]]:
    return list(combinations(range(d), 2))


def pair_product_table(d: int) -> np.ndarray:
    """(2**d, C(d,2)) products s_a * s_b of the basis spin table."""
    table = _PAIR_TABLES.get(d)
    if table is None:
        spins = basis_spin_table(d).astype(np.float64)
        pairs = data_pair_indices(d)
        table = np.empty((1 << d, len(pairs)))
        for idx, (a, b) in enumerate(pairs):
            table[:, idx] = spins[:, a] * spins[:, b]
        table.setflags(write=False)
        _PAIR_TABLES[d] = table
    return table


_PAIR_TABLES: dict[int, np.ndarray] = {}


def _stats_from_probs(scheme: EncodingScheme, probs: np.ndarray, source: str,
                      n_shots: int | None, observed: np.ndarray | None = None) -> GroupStats:
    d = scheme.group_size
    grouped = probs.reshape(scheme.n_groups, 1 << d)
    p_label = grouped.sum(axis=1)
    if observed is None:
        observed = p_label > OBSERVED_EPS
    denom = np.where(observed, p_label, 1.0)

    spins = basis_spin_table(d).astype(np.float64)
    zbar_mat = (grouped @ spins) / denom[:, None]
    corr_mat = (grouped @ pair_product_table(d)) / denom[:, None]
    zbar_mat[~observed] = 0.0
    corr_mat[~observed] = 0.0
    np.clip(zbar_mat, -1.0, 1.0, out=zbar_mat)
    np.clip(corr_mat, -1.0, 1.0, out=corr_mat)

    pairs = data_pair_indices(d)
    pair_corr: dict[tuple[int, int], float] = {}
    for label in range(scheme.n_groups):
        base = d * label
        for idx, (a, b) in enumerate(pairs):
            pair_corr[(base + a, base + b)] = float(corr_mat[label, idx])

    return GroupStats(
        p_label=p_label,
        zbar=zbar_mat.ravel(),
        pair_corr=pair_corr,
        observed=observed,
        source=source,
        n_shots=n_shots,
        corr_matrix=corr_mat,
    )


def exact_group_stats(scheme: EncodingScheme, state: Statevector) -> GroupStats:
    """Statistics computed from the full amplitude vector."""
    if state.dim != scheme.dim:
        raise ValueError(f"state has {state.n_qubits} qubits, scheme needs {scheme.n_qubits}")
    return _stats_from_probs(scheme, state.probabilities(), "exact", None)


def shot_group_stats(scheme: EncodingScheme, counts: dict[int, int], n_shots: int) -> GroupStats:
    """Frequency-based statistics from measured shot counts."""
    if n_shots < 1:
        raise ValueError(f"need at least one shot, got {n_shots}")
    total = sum(counts.values())
    if total != n_shots:
        raise ValueError(f"counts sum to {total}, expected {n_shots}")
    freq = np.zeros(scheme.dim)
    for index, count in counts.items():
        if not 0 <= index < scheme.dim:
            raise IndexError(f"basis index {index} out of range [0, {scheme.dim})")
        if count < 0:
            raise ValueError("negative shot count")
        freq[index] = count / n_shots
    grouped_counts = freq.reshape(scheme.n_groups, -1).sum(axis=1)
    return _stats_from_probs(scheme, freq, "shots", n_shots, observed=grouped_counts > 0)


def _intra_weight_matrix(instance: SKInstance, scheme: EncodingScheme) -> np.ndarray:
    """(N/d, C(d,2)) weights w_ij of the intra-group pairs."""
    d = scheme.group_size
    pairs = data_pair_indices(d)
    if not pairs:
        return np.zeros((scheme.n_groups, 0))
    bases = d * np.arange(scheme.n_groups)[:, None]
    a = np.array([p[0] for p in pairs])[None, :]
    b = np.array([p[1] for p in pairs])[None, :]
    return instance.weights[bases + a, bases + b]


def _check_sizes(instance: SKInstance, scheme: EncodingScheme) -> None:
    if instance.n_vars != scheme.n_vars:
        raise ValueError(
            f"instance has {instance.n_vars} variables, scheme encodes {scheme.n_vars}"
        )


def estimate_cost(instance: SKInstance, scheme: EncodingScheme, stats: GroupStats) -> CostBreakdown:
    """Assemble the cost from group statistics.

    Intra-group pairs use the measured correlations; cross-group pairs use
    zbar_i * zbar_j. Terms owned by unobserved labels contribute zero.
    """
    _check_sizes(instance, scheme)
    intra_w = _intra_weight_matrix(instance, scheme)
    intra = float(np.sum(intra_w * stats.corr_matrix))

    zbar = stats.zbar
    full = float(zbar @ instance.weights @ zbar)  # sum over all i<j of w zbar zbar
    d = scheme.group_size
    zbar_mat = zbar.reshape(scheme.n_groups, d)
    pairs = data_pair_indices(d)
    if pairs:
        a = np.array([p[0] for p in pairs])
        b = np.array([p[1] for p in pairs])
        zpair = zbar_mat[:, a] * zbar_mat[:, b]
        intra_zz = float(np.sum(intra_w * zpair))
    else:
        intra_zz = 0.0
    return CostBreakdown(intra=intra, inter=full - intra_zz)


def cross_group_fields(instance: SKInstance, scheme: EncodingScheme, stats: GroupStats) -> np.ndarray:
    """h_i = 1/2 sum over j in other groups of w_ij zbar_j, for every i."""
    _check_sizes(instance, scheme)
    w_sym = instance.sym_weights
    zbar = stats.zbar
    full = w_sym @ zbar
    d = scheme.group_size
    zbar_mat = zbar.reshape(scheme.n_groups, d)
    same = np.zeros(scheme.n_vars)
    for label in range(scheme.n_groups):
        sl = slice(d * label, d * (label + 1))
        same[sl] = w_sym[sl, sl] @ zbar_mat[label]
    return 0.5 * (full - same)


@dataclass(frozen=True)
class HamiltonianTerm:
    """One commuting term coeff * P_label Z ... Z of the cost Hamiltonian."""

    label: int
    data_qubits: tuple[int, ...]  # one or two data-qubit indices
    coefficient: float


def cost_hamiltonian_terms(
    instance: SKInstance, scheme: EncodingScheme, stats: GroupStats
) -> list[HamiltonianTerm]:
    """Symbolic term list of the state-dependent Hamiltonian.

    Coefficients carry the 1/<P_l> normalization. Terms owned by unobserved
    labels are dropped (with a warning); zero-coefficient one-body terms are
    skipped.
    """
    _check_sizes(instance, scheme)
    if stats.n_unobserved:
        log.debug("dropping Hamiltonian terms for %d unobserved label(s)", stats.n_unobserved)
    d = scheme.group_size
    pairs = data_pair_indices(d)
    intra_w = _intra_weight_matrix(instance, scheme)
    h = cross_group_fields(instance, scheme, stats)

    terms: list[HamiltonianTerm] = []
    for label in range(scheme.n_groups):
        if not stats.observed[label]:
            continue
        inv_p = 1.0 / stats.p_label[label]
        for idx, (a, b) in enumerate(pairs):
            w = intra_w[label, idx]
            if w != 0.0:
                terms.append(HamiltonianTerm(label, (a, b), w * inv_p))
        for a in range(d):
            hi = h[d * label + a]
            if hi != 0.0:
                terms.append(HamiltonianTerm(label, (a,), hi * inv_p))
    return terms


def build_cost_hamiltonian(
    instance: SKInstance, scheme: EncodingScheme, stats: GroupStats
) -> DiagonalOperator:
    """Materialize the state-dependent Hamiltonian as a dense diagonal."""
    _check_sizes(instance, scheme)
    if stats.n_unobserved:
        log.debug("dropping Hamiltonian terms for %d unobserved label(s)", stats.n_unobserved)
    d = scheme.group_size
    spins = basis_spin_table(d).astype(np.float64)
    intra_w = _intra_weight_matrix(instance, scheme)
    h_mat = cross_group_fields(instance, scheme, stats).reshape(scheme.n_groups, d)

    denom = np.where(stats.observed, stats.p_label, 1.0)
    block = pair_product_table(d) @ intra_w.T + spins @ h_mat.T  # (2**d, N/d)
    block = block / denom[None, :]
    block[:, ~stats.observed] = 0.0
    return DiagonalOperator(scheme.n_qubits, block.T.ravel())
