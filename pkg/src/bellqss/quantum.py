"""Exact pure-state simulation of small labelled qubit registers.

Every protocol position is simulated independently, so registers never exceed
four qubits. States are immutable: each operation returns a new
:class:`StateVector`.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from math import sqrt
from typing import Mapping, Sequence

import numpy as np

from .errors import InternalInvariantError, InvalidArgumentError

NORM_TOL = 1e-10
UNITARY_TOL = 1e-10
PROB_FLOOR = 1e-12
PHASE_TOL = 1e-9

_S = 1 / sqrt(2)
_I2 = np.eye(2, dtype=complex)


class Role(enum.IntEnum):
    """Which photon family a qubit belongs to (t, h, t', h')."""

    T = 0
    H = 1
    Tp = 2
    Hp = 3


@dataclass(frozen=True, order=True)
class QubitId:
    role: Role
    index: int

    def __post_init__(self):
        if self.index < 0:
            raise InvalidArgumentError(f"negative position index {self.index}")

    def __str__(self) -> str:
        return f"{self.role.name}{self.index}"


def T(i: int) -> QubitId:
    return QubitId(Role.T, i)


def H(i: int) -> QubitId:
    return QubitId(Role.H, i)


def Tp(i: int) -> QubitId:
    return QubitId(Role.Tp, i)


def Hp(i: int) -> QubitId:
    return QubitId(Role.Hp, i)


class BellLabel(enum.Enum):
    PhiPlus = "phi+"
    PhiMinus = "phi-"
    PsiPlus = "psi+"
    PsiMinus = "psi-"


class MeasBasis(enum.Enum):
    Computational = "Z"
    Hadamard = "X"


BELL_VECTORS: dict[BellLabel, np.ndarray] = {
    BellLabel.PhiPlus: np.array([_S, 0, 0, _S], dtype=complex),
    BellLabel.PhiMinus: np.array([_S, 0, 0, -_S], dtype=complex),
    BellLabel.PsiPlus: np.array([0, _S, _S, 0], dtype=complex),
    BellLabel.PsiMinus: np.array([0, _S, -_S, 0], dtype=complex),
}
BELL_ORDER: tuple[BellLabel, ...] = tuple(BELL_VECTORS)
# rows are <bell| in the |00>,|01>,|10>,|11> basis
_BELL_BRAS = np.array([BELL_VECTORS[b].conj() for b in BELL_ORDER])

BASIS_VECTORS: dict[MeasBasis, tuple[np.ndarray, np.ndarray]] = {
    MeasBasis.Computational: (
        np.array([1, 0], dtype=complex),
        np.array([0, 1], dtype=complex),
    ),
    MeasBasis.Hadamard: (
        np.array([_S, _S], dtype=complex),
        np.array([_S, -_S], dtype=complex),
    ),
}


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized amplitudes over an ordered tuple of qubits.

    Amplitude index bits follow ``qubits`` order, first qubit most significant.
    A state over zero qubits is the scalar ``[1]`` and is what measurements
    leave behind once every qubit has been consumed.
    """

    qubits: tuple[QubitId, ...]
    amplitudes: np.ndarray

    def __post_init__(self):
        qubits = tuple(self.qubits)
        if len(set(qubits)) != len(qubits):
            raise InvalidArgumentError(f"duplicate qubit ids in {qubits}")
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape[0] != 2 ** len(qubits):
            raise InvalidArgumentError(
                f"{amps.shape[0]} amplitudes for {len(qubits)} qubits"
            )
        norm2 = float(np.vdot(amps, amps).real)
        if abs(norm2 - 1.0) > NORM_TOL:
            raise InternalInvariantError(f"state norm^2 {norm2} is not 1")
        amps = amps.copy()
        amps.flags.writeable = False
        object.__setattr__(self, "qubits", qubits)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n(self) -> int:
        return len(self.qubits)

    def axis(self, q: QubitId) -> int:
        try:
            return self.qubits.index(q)
        except ValueError:
            raise InvalidArgumentError(f"qubit {q} not in state {self.qubits}") from None

    def __contains__(self, q: object) -> bool:
        return q in self.qubits

    def tensor_view(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.n)

    def canonical(self) -> StateVector:
        """Same state with qubits sorted by (role, index)."""
        order = sorted(range(self.n), key=lambda i: self.qubits[i])
        if order == list(range(self.n)):
            return self
        amps = np.transpose(self.tensor_view(), order).reshape(-1)
        return StateVector(tuple(self.qubits[i] for i in order), amps)

    def relabel(self, mapping: Mapping[QubitId, QubitId]) -> StateVector:
        return StateVector(tuple(mapping.get(q, q) for q in self.qubits), self.amplitudes)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def __repr__(self) -> str:
        labels = ",".join(str(q) for q in self.qubits)
        return f"StateVector([{labels}], {np.round(self.amplitudes, 6).tolist()})"


EMPTY = StateVector((), np.array([1.0 + 0j]))


def _phase_fixed(vec: np.ndarray) -> tuple[complex, np.ndarray]:
    """Split ``vec`` into (phase, vec/phase) with first significant entry positive real."""
    for a in vec:
        if abs(a) > PHASE_TOL:
            ph = a / abs(a)
            return ph, vec / ph
    return 1.0 + 0j, vec


def from_amplitudes(qubits: Sequence[QubitId], amplitudes) -> StateVector:
    return StateVector(tuple(qubits), np.asarray(amplitudes, dtype=complex))


def ket(bits: str, qubits: Sequence[QubitId]) -> StateVector:
    """Computational basis state, e.g. ``ket("01", [T(0), H(0)])``."""
    if len(bits) != len(qubits):
        raise InvalidArgumentError("one bit per qubit required")
    amps = np.zeros(2 ** len(bits), dtype=complex)
    amps[int(bits, 2)] = 1.0
    return StateVector(tuple(qubits), amps)


def basis_ket(basis: MeasBasis, bit: int, q: QubitId) -> StateVector:
    return StateVector((q,), BASIS_VECTORS[basis][bit])


def make_bell(label: BellLabel, q1: QubitId, q2: QubitId) -> StateVector:
    if q1 == q2:
        raise InvalidArgumentError(f"Bell pair needs two distinct qubits, got {q1} twice")
    return StateVector((q1, q2), BELL_VECTORS[label])


def tensor(a: StateVector, b: StateVector) -> StateVector:
    overlap = set(a.qubits) & set(b.qubits)
    if overlap:
        raise InvalidArgumentError(f"overlapping qubits {sorted(overlap)}")
    return StateVector(a.qubits + b.qubits, np.kron(a.amplitudes, b.amplitudes))


def check_unitary(op: np.ndarray) -> np.ndarray:
    op = np.asarray(op, dtype=complex)
    if op.shape != (2, 2):
        raise InvalidArgumentError(f"expected a 2x2 operator, got shape {op.shape}")
    if np.abs(op.conj().T @ op - _I2).max() > UNITARY_TOL:
        raise InvalidArgumentError("operator is not unitary")
    return op


def apply_single(state: StateVector, op, target: QubitId) -> StateVector:
    op = check_unitary(op)
    ax = state.axis(target)
    # (2^ax, 2, 2^rest) view: the target bit becomes the middle axis
    psi = state.amplitudes.reshape(2**ax, 2, -1)
    psi = np.einsum("ij,ajb->aib", op, psi)
    return StateVector(state.qubits, psi.reshape(-1))


def _split_pair(state: StateVector, q1: QubitId, q2: QubitId):
    if q1 == q2:
        raise InvalidArgumentError("measurement needs two distinct qubits")
    a1, a2 = state.axis(q1), state.axis(q2)
    rest = tuple(q for q in state.qubits if q not in (q1, q2))
    mat = np.moveaxis(state.tensor_view(), (a1, a2), (0, 1)).reshape(4, -1)
    return mat, rest


def bell_decompose(
    state: StateVector, q1: QubitId, q2: QubitId
) -> dict[BellLabel, tuple[complex, StateVector | None]]:
    """Expand ``state`` over the Bell basis of ``(q1, q2)``.

    Returns ``label -> (coefficient, residual)`` such that
    ``state = sum(coef * bell(label) (x) residual)``. Residuals carry the
    first-significant-amplitude-positive convention; the phase lives in the
    coefficient. Terms with vanishing weight have residual ``None``.
    """
    mat, rest = _split_pair(state, q1, q2)
    rows = _BELL_BRAS @ mat
    out: dict[BellLabel, tuple[complex, StateVector | None]] = {}
    for label, row in zip(BELL_ORDER, rows):
        weight = float(np.linalg.norm(row))
        if weight <= PROB_FLOOR:
            out[label] = (0j, None)
            continue
        phase, vec = _phase_fixed(row / weight)
        out[label] = (complex(weight * phase), StateVector(rest, vec))
    return out


def reconstruct(
    terms: Mapping[BellLabel, tuple[complex, StateVector | None]], q1: QubitId, q2: QubitId
) -> StateVector:
    """Inverse of :func:`bell_decompose`; returns the state with ``q1, q2`` leading."""
    total = None
    qubits = None
    for label, (coef, residual) in terms.items():
        if residual is None:
            continue
        term = coef * tensor(make_bell(label, q1, q2), residual).amplitudes
        total = term if total is None else total + term
        qubits = (q1, q2) + residual.qubits
    if total is None:
        raise InternalInvariantError("decomposition has no support")
    return StateVector(qubits, total)


def _sample(probs: np.ndarray, rng: np.random.Generator) -> int:
    total = probs.sum()
    if total <= PROB_FLOOR:
        raise InternalInvariantError("no outcome carries probability mass")
    if abs(total - 1.0) > NORM_TOL:
        raise InternalInvariantError(f"outcome probabilities sum to {total}")
    r = rng.random() * total
    idx = int(np.searchsorted(np.cumsum(probs), r, side="right"))
    return min(idx, len(probs) - 1)


def bell_probabilities(state: StateVector, q1: QubitId, q2: QubitId) -> dict[BellLabel, float]:
    mat, _ = _split_pair(state, q1, q2)
    probs = np.sum(np.abs(_BELL_BRAS @ mat) ** 2, axis=1)
    return dict(zip(BELL_ORDER, probs.tolist()))


def bell_measure(
    state: StateVector, q1: QubitId, q2: QubitId, rng: np.random.Generator
) -> tuple[BellLabel, StateVector]:
    mat, rest = _split_pair(state, q1, q2)
    rows = _BELL_BRAS @ mat
    probs = np.sum(np.abs(rows) ** 2, axis=1)
    k = _sample(probs, rng)
    return BELL_ORDER[k], StateVector(rest, rows[k] / sqrt(probs[k]))


def basis_measure(
    state: StateVector, q: QubitId, basis: MeasBasis, rng: np.random.Generator
) -> tuple[int, StateVector]:
    """Measure one qubit; bit 0 is |0> or |+>, bit 1 is |1> or |->."""
    ax = state.axis(q)
    rest = tuple(x for x in state.qubits if x != q)
    mat = np.moveaxis(state.tensor_view(), ax, 0).reshape(2, -1)
    bras = np.array([v.conj() for v in BASIS_VECTORS[basis]])
    rows = bras @ mat
    probs = np.sum(np.abs(rows) ** 2, axis=1)
    bit = _sample(probs, rng)
    return bit, StateVector(rest, rows[bit] / sqrt(probs[bit]))


def overlap(a: StateVector, b: StateVector) -> complex:
    """<a|b> after bringing both states to canonical qubit order."""
    ca, cb = a.canonical(), b.canonical()
    if ca.qubits != cb.qubits:
        raise InvalidArgumentError(f"qubit sets differ: {ca.qubits} vs {cb.qubits}")
    return complex(np.vdot(ca.amplitudes, cb.amplitudes))


def equal_up_to_global_phase(a: StateVector, b: StateVector, tol: float = PHASE_TOL) -> bool:
    return abs(overlap(a, b)) >= 1 - tol
