"""Lowering of the phase separator to the {Rx(pi/2), Rz, iSWAP, X} gate set.

The pipeline is: commuting Hamiltonian terms -> label-controlled phase
rotations (logical IR) -> multi-controls reduced to Toffoli AND-ladders
over ancillas plus singly-controlled Z-string rotations -> native gates.
Correctness is certified numerically: the compiled circuit's unitary must
match the ideal diagonal exponential up to a global phase, with ancillas
returned to |0>.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from qeopt.encoding import EncodingScheme
from qeopt.estimator import HamiltonianTerm

NATIVE_GATES = ("RX", "RZ", "ISWAP", "X")
INTERMEDIATE_GATES = NATIVE_GATES + ("CNOT", "TOFFOLI", "RZZ")

# gate name -> (qubit count, takes angle)
GATE_SIGNATURES = {
    "RX": (1, True),
    "RZ": (1, True),
    "X": (1, False),
    "ISWAP": (2, False),
    "CNOT": (2, False),
    "RZZ": (2, True),
    "TOFFOLI": (3, False),
}


@dataclass(frozen=True)
class Gate:
    name: str
    qubits: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self):
        if self.name not in GATE_SIGNATURES:
            raise ValueError(f"unknown gate kind {self.name!r}")
        n_qubits, has_angle = GATE_SIGNATURES[self.name]
        if len(self.qubits) != n_qubits:
            raise ValueError(f"{self.name} takes {n_qubits} qubit(s), got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"{self.name} qubits must be distinct, got {self.qubits}")
        if has_angle != (self.angle is not None):
            raise ValueError(f"{self.name} angle mismatch: {self.angle}")
        if self.angle is not None and not math.isfinite(self.angle):
            raise ValueError("gate angle must be finite")


@dataclass
class Circuit:
    """Ordered gate list over n_qubits + n_ancillas wires.

    Ancillas are appended after the encoding qubits and must start and end
    in |0> (checked numerically by :func:`verify_unitary`).
    """

    n_qubits: int
    n_ancillas: int = 0
    gates: list[Gate] = field(default_factory=list)

    @property
    def total_qubits(self) -> int:
        return self.n_qubits + self.n_ancillas

    def add(self, name: str, *qubits: int, angle: float | None = None) -> "Circuit":
        gate = Gate(name, qubits, angle)
        for q in qubits:
            if not 0 <= q < self.total_qubits:
                raise IndexError(f"qubit {q} out of range [0, {self.total_qubits})")
        self.gates.append(gate)
        return self

    def extend(self, gates: list[Gate]) -> "Circuit":
        for g in gates:
            self.add(g.name, *g.qubits, angle=g.angle)
        return self

    def gate_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for g in self.gates:
            counts[g.name] = counts.get(g.name, 0) + 1
        return counts

    def depth(self) -> int:
        """Greedy layering depth with qubit-disjoint parallelism."""
        busy_until = [0] * self.total_qubits
        depth = 0
        for g in self.gates:
            layer = 1 + max(busy_until[q] for q in g.qubits)
            for q in g.qubits:
                busy_until[q] = layer
            depth = max(depth, layer)
        return depth

    def is_native(self) -> bool:
        return all(
            g.name in NATIVE_GATES and (g.name != "RX" or abs(g.angle - math.pi / 2) < 1e-15)
            for g in self.gates
        )


# ---------------------------------------------------------------------------
# Logical IR: label-controlled phase rotations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IRTerm:
    """controlled-exp(i angle Z...Z): data-qubit Z string gated on label value."""

    control_pattern: int
    targets: tuple[int, ...]
    angle: float


def lower_phase_separator(terms: list[HamiltonianTerm], gamma: float) -> list[IRTerm]:
    """One IR rotation per Hamiltonian term; angles absorb gamma.

    exp(i gamma H) factorizes exactly because all terms commute, so any
    ordering of the returned list compiles to the same unitary.
    """
    if gamma == 0.0:
        return []
    ir = []
    for term in terms:
        ir.append(IRTerm(term.label, term.data_qubits, gamma * term.coefficient))
    return ir


# ---------------------------------------------------------------------------
# Control decomposition
# ---------------------------------------------------------------------------


def _z_string_rotation(circuit: Circuit, qubits: tuple[int, ...], alpha: float) -> None:
    """exp(i alpha Z x ... x Z) via a CNOT parity chain and one Rz."""
    chain = list(qubits)
    last = chain[-1]
    for a, b in zip(chain, chain[1:]):
        circuit.add("CNOT", a, b)
    circuit.add("RZ", last, angle=-2.0 * alpha)
    for a, b in reversed(list(zip(chain, chain[1:]))):
        circuit.add("CNOT", a, b)


def _controlled_phase_core(circuit: Circuit, control: int, targets: tuple[int, ...], theta: float) -> None:
    """exp(i theta P1_control Z...Z_targets), exact identity
    P1 = (I - Z)/2  =>  split into a target-only and a control-extended string."""
    _z_string_rotation(circuit, targets, theta / 2.0)
    _z_string_rotation(circuit, (control, *targets), -theta / 2.0)


def decompose_controls(
    ir: list[IRTerm],
    scheme: EncodingScheme,
) -> Circuit:
    """Reduce label-controlled rotations to {CNOT, Toffoli, Rz, X}.

    Patterns are matched by X-conjugating the label qubits that should read
    0; m >= 2 controls are folded into ancillas with a Toffoli AND-ladder
    (m - 1 ancillas), leaving a singly-controlled Z-string core. Ancillas
    are uncomputed, so they start and end in |0>.
    """
    m = scheme.n_label_qubits
    d = scheme.group_size
    n_ancillas = max(0, m - 1)
    circuit = Circuit(scheme.n_qubits, n_ancillas)
    data_offset = m

    for term in ir:
        if not 0 <= term.control_pattern < scheme.n_groups:
            raise ValueError(f"control pattern {term.control_pattern} exceeds label range")
        targets = tuple(data_offset + t for t in term.targets)
        if m == 0:
            _z_string_rotation(circuit, targets, term.angle)
            continue

        # conjugate pattern bits that read 0 (label qubit j holds bit m-1-j)
        flips = [j for j in range(m) if not (term.control_pattern >> (m - 1 - j)) & 1]
        for j in flips:
            circuit.add("X", j)

        if m == 1:
            _controlled_phase_core(circuit, 0, targets, term.angle)
        else:
            ladder: list[tuple[int, int, int]] = []
            anc = scheme.n_qubits
            ladder.append((0, 1, anc))
            for j in range(2, m):
                ladder.append((j, anc, anc + 1))
                anc += 1
            for c1, c2, t in ladder:
                circuit.add("TOFFOLI", c1, c2, t)
            _controlled_phase_core(circuit, ladder[-1][2], targets, term.angle)
            for c1, c2, t in reversed(ladder):
                circuit.add("TOFFOLI", c1, c2, t)

        for j in flips:
            circuit.add("X", j)
    return circuit


# ---------------------------------------------------------------------------
# Native rewriting
# ---------------------------------------------------------------------------

_HALF_PI = math.pi / 2


def _native_rx(qubit: int, theta: float) -> list[Gate]:
    """Rx(theta) over {Rx(pi/2), Rz}; exact identities, no phase slip."""
    theta = math.remainder(theta, 4.0 * math.pi)
    if abs(theta - _HALF_PI) < 1e-15:
        return [Gate("RX", (qubit,), _HALF_PI)]
    if abs(theta + _HALF_PI) < 1e-15:
        # Rx(-pi/2) = Rz(pi) Rx(pi/2) Rz(-pi)
        return [
            Gate("RZ", (qubit,), -math.pi),
            Gate("RX", (qubit,), _HALF_PI),
            Gate("RZ", (qubit,), math.pi),
        ]
    # Rx(theta) = Rz(-pi/2) Rx(pi/2) Rz(pi - theta) Rx(pi/2) Rz(-pi/2)
    return [
        Gate("RZ", (qubit,), -_HALF_PI),
        Gate("RX", (qubit,), _HALF_PI),
        Gate("RZ", (qubit,), math.pi - theta),
        Gate("RX", (qubit,), _HALF_PI),
        Gate("RZ", (qubit,), -_HALF_PI),
    ]


def _native_hadamard(qubit: int) -> list[Gate]:
    """H = i Rz(pi/2) Rx(pi/2) Rz(pi/2); the phase joins the global one."""
    return [
        Gate("RZ", (qubit,), _HALF_PI),
        Gate("RX", (qubit,), _HALF_PI),
        Gate("RZ", (qubit,), _HALF_PI),
    ]


def _native_cnot(control: int, target: int) -> list[Gate]:
    """CNOT from two iSWAPs with one-qubit corrections (up to global phase).

    CNOT = (I x Rx(-pi/2) Rz(pi/2)) iSWAP (Rx(pi/2) x I) iSWAP
           (Rz(-pi/2) x Rz(pi/2) Rx(pi))
    """
    seq = [
        Gate("X", (target,)),  # Rx(pi) up to phase
        Gate("RZ", (target,), _HALF_PI),
        Gate("RZ", (control,), -_HALF_PI),
        Gate("ISWAP", (control, target)),
        Gate("RX", (control,), _HALF_PI),
        Gate("ISWAP", (control, target)),
        Gate("RZ", (target,), _HALF_PI),
    ]
    seq.extend(_native_rx(target, -_HALF_PI))
    return seq


def _cnot_level_toffoli(c1: int, c2: int, t: int) -> list[Gate]:
    """Standard 6-CNOT Toffoli with T = Rz(pi/4) up to global phase."""
    quarter = math.pi / 4
    gates: list[Gate] = []
    gates.extend(_native_hadamard_placeholder(t))
    gates.append(Gate("CNOT", (c2, t)))
    gates.append(Gate("RZ", (t,), -quarter))
    gates.append(Gate("CNOT", (c1, t)))
    gates.append(Gate("RZ", (t,), quarter))
    gates.append(Gate("CNOT", (c2, t)))
    gates.append(Gate("RZ", (t,), -quarter))
    gates.append(Gate("CNOT", (c1, t)))
    gates.append(Gate("RZ", (t,), quarter))
    gates.append(Gate("RZ", (c2,), quarter))
    gates.extend(_native_hadamard_placeholder(t))
    gates.append(Gate("CNOT", (c1, c2)))
    gates.append(Gate("RZ", (c1,), quarter))
    gates.append(Gate("RZ", (c2,), -quarter))
    gates.append(Gate("CNOT", (c1, c2)))
    return gates


def _native_hadamard_placeholder(qubit: int) -> list[Gate]:
    # kept at the CNOT level so the Toffoli rewrite stays readable; the
    # Hadamard itself is already native-expressible
    return _native_hadamard(qubit)


def to_native(circuit: Circuit) -> Circuit:
    """Rewrite {CNOT, Toffoli, RZZ, Rx(any), Rz, X, iSWAP} into native gates."""
    native = Circuit(circuit.n_qubits, circuit.n_ancillas)
    for gate in circuit.gates:
        native.extend(_rewrite_gate(gate))
    return native


def _rewrite_gate(gate: Gate) -> list[Gate]:
    if gate.name in ("RZ", "ISWAP", "X"):
        return [gate]
    if gate.name == "RX":
        return _native_rx(gate.qubits[0], gate.angle)
    if gate.name == "CNOT":
        return _native_cnot(*gate.qubits)
    if gate.name == "RZZ":
        c, t = gate.qubits
        out = _native_cnot(c, t)
        out.append(Gate("RZ", (t,), gate.angle))
        out.extend(_native_cnot(c, t))
        return out
    if gate.name == "TOFFOLI":
        out: list[Gate] = []
        for g in _cnot_level_toffoli(*gate.qubits):
            out.extend(_rewrite_gate(g))
        return out
    raise ValueError(f"unknown gate kind {gate.name!r}")


# ---------------------------------------------------------------------------
# Dense verification
# ---------------------------------------------------------------------------

_GATE_MATRICES = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "ISWAP": np.array(
        [[1, 0, 0, 0], [0, 0, 1j, 0], [0, 1j, 0, 0], [0, 0, 0, 1]], dtype=complex
    ),
    "CNOT": np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    ),
}

VERIFY_QUBIT_CAP = 12


def gate_matrix(gate: Gate) -> np.ndarray:
    if gate.name == "RX":
        c, s = math.cos(gate.angle / 2), math.sin(gate.angle / 2)
        return np.array([[c, -1j * s], [-1j * s, c]])
    if gate.name == "RZ":
        return np.array([[np.exp(-1j * gate.angle / 2), 0], [0, np.exp(1j * gate.angle / 2)]])
    if gate.name == "RZZ":
        e = np.exp(-1j * gate.angle / 2)
        return np.diag([e, e.conjugate(), e.conjugate(), e])
    if gate.name == "TOFFOLI":
        u = np.eye(8, dtype=complex)
        u[6:, 6:] = np.array([[0, 1], [1, 0]])
        return u
    return _GATE_MATRICES[gate.name]


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    """Dense unitary over all wires (ancillas included), qubit 0 = MSB."""
    n = circuit.total_qubits
    if n > VERIFY_QUBIT_CAP:
        raise ValueError(f"dense verification capped at {VERIFY_QUBIT_CAP} qubits, got {n}")
    dim = 1 << n
    u = np.eye(dim, dtype=complex)
    for gate in circuit.gates:
        u = _embed(gate, n) @ u
    return u


def _embed(gate: Gate, n_qubits: int) -> np.ndarray:
    """Expand a gate matrix onto the full register via index arithmetic."""
    g = gate_matrix(gate)
    k = len(gate.qubits)
    dim = 1 << n_qubits
    full = np.zeros((dim, dim), dtype=complex)
    # positions of the acted-on qubits inside the index (qubit 0 = MSB)
    shifts = [n_qubits - 1 - q for q in gate.qubits]
    rest_mask = (dim - 1) ^ sum(1 << s for s in shifts)
    rest_indices = [i for i in range(dim) if i & ~rest_mask == 0]

    def local_to_global(base: int, local: int) -> int:
        out = base
        for pos in range(k):
            if (local >> (k - 1 - pos)) & 1:
                out |= 1 << shifts[pos]
        return out

    for base in rest_indices:
        idx = [local_to_global(base, loc) for loc in range(1 << k)]
        full[np.ix_(idx, idx)] = g
    return full


def verify_unitary(
    circuit: Circuit,
    reference: np.ndarray,
    check_ancillas: bool = True,
) -> float:
    """Max deviation from the reference after global-phase alignment.

    ``reference`` is either a dense 2**q x 2**q unitary or the 1-D complex
    diagonal of a diagonal unitary, both over the q encoding qubits only.
    Ancillas are projected on |0> at input and must disentangle back to |0>.
    """
    reference = np.asarray(reference, dtype=complex)
    dim = 1 << circuit.n_qubits
    if reference.ndim == 1:
        if reference.shape != (dim,):
            raise ValueError(f"diagonal reference needs {dim} entries")
        reference = np.diag(reference)
    elif reference.shape != (dim, dim):
        raise ValueError(f"reference must be {dim} x {dim}")

    full = circuit_unitary(circuit)
    a = circuit.n_ancillas
    if a:
        block = full.reshape(dim, 1 << a, dim, 1 << a)
        embedded = block[:, :, :, 0]  # ancillas in |0>
        leakage = embedded[:, 1:, :]
        if check_ancillas and np.abs(leakage).max() > 1e-10:
            raise ValueError(
                f"ancillas do not return to |0>: leakage {np.abs(leakage).max():.3e}"
            )
        compiled = embedded[:, 0, :]
    else:
        compiled = full

    overlap = np.trace(reference.conj().T @ compiled)
    if abs(overlap) < 1e-12:
        return float(np.abs(compiled - reference).max())
    phase = overlap / abs(overlap)
    return float(np.abs(compiled / phase - reference).max())


# ---------------------------------------------------------------------------
# Serialization: one gate per line, `GATE q[,q2][,angle]`
# ---------------------------------------------------------------------------


def dumps(circuit: Circuit) -> str:
    lines = [f"# circuit qubits={circuit.n_qubits} ancillas={circuit.n_ancillas}"]
    for g in circuit.gates:
        parts = [str(q) for q in g.qubits]
        if g.angle is not None:
            parts.append(format(g.angle, ".17g"))
        lines.append(f"{g.name} {','.join(parts)}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> Circuit:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("# circuit"):
        raise ValueError("missing circuit header line")
    header = dict(kv.split("=") for kv in lines[0].removeprefix("# circuit").split())
    circuit = Circuit(int(header["qubits"]), int(header["ancillas"]))
    for ln in lines[1:]:
        name, _, rest = ln.partition(" ")
        if name not in GATE_SIGNATURES:
            raise ValueError(f"unknown gate kind {name!r}")
        n_qubits, has_angle = GATE_SIGNATURES[name]
        parts = rest.split(",")
        expected = n_qubits + (1 if has_angle else 0)
        if len(parts) != expected:
            raise ValueError(f"bad gate line {ln!r}: expected {expected} fields")
        qubits = [int(p) for p in parts[:n_qubits]]
        angle = float(parts[n_qubits]) if has_angle else None
        circuit.add(name, *qubits, angle=angle)
    return circuit
