"""Operator sets used by the protocol and the label-level tables derived from them.

Agents rotate t photons with ``U(a) = [[cos a, sin a], [-sin a, cos a]]`` for
``a`` in {0, 2pi/3, 4pi/3}; Alice dense-codes h photons with four Pauli-type
matrices. Both sets act on Bell pairs by permuting labels (Paulis) or by a
rotation that is undone exactly by the reverse compound operation.

The Bell tables are computed once, by brute force over :mod:`bellqss.quantum`,
and then used as lookups. Global phases are dropped at label level.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from math import cos, pi, sin
from typing import Iterable

import numpy as np

from .quantum import (
    BELL_ORDER,
    BellLabel,
    MeasBasis,
    QubitId,
    Role,
    apply_single,
    equal_up_to_global_phase,
    make_bell,
)

MATRIX_TOL = 1e-12


@dataclass(frozen=True, order=True)
class PhaseAngle:
    """Element of the cyclic group {0, 2pi/3, 4pi/3}, stored as ticks mod 3."""

    ticks: int

    def __post_init__(self):
        object.__setattr__(self, "ticks", int(self.ticks) % 3)

    @property
    def radians(self) -> float:
        return self.ticks * 2 * pi / 3

    def __add__(self, other: PhaseAngle) -> PhaseAngle:
        return PhaseAngle(self.ticks + other.ticks)

    def __neg__(self) -> PhaseAngle:
        return PhaseAngle(-self.ticks)

    def __int__(self) -> int:
        return self.ticks


ANGLES: tuple[PhaseAngle, ...] = (PhaseAngle(0), PhaseAngle(1), PhaseAngle(2))


class PauliLabel(enum.Enum):
    S00 = "00"
    S01 = "01"
    S10 = "10"
    S11 = "11"

    @property
    def bits(self) -> tuple[int, int]:
        return int(self.value[0]), int(self.value[1])


class QubitSlot(enum.Enum):
    First = 0
    Second = 1


class Correlation(enum.Enum):
    Same = "same"
    Opposite = "opposite"


_PAULI_MATRICES = {
    PauliLabel.S00: np.array([[1, 0], [0, 1]], dtype=complex),
    PauliLabel.S01: np.array([[0, 1], [1, 0]], dtype=complex),
    PauliLabel.S10: np.array([[1, 0], [0, -1]], dtype=complex),
    PauliLabel.S11: np.array([[0, 1], [-1, 0]], dtype=complex),
}
for _m in _PAULI_MATRICES.values():
    _m.flags.writeable = False


def _rotation(a: float) -> np.ndarray:
    m = np.array([[cos(a), sin(a)], [-sin(a), cos(a)]], dtype=complex)
    m.flags.writeable = False
    return m


_PHASE_MATRICES = {a: _rotation(a.radians) for a in ANGLES}


def as_angle(a: PhaseAngle | int) -> PhaseAngle:
    return a if isinstance(a, PhaseAngle) else PhaseAngle(a)


def phase_unitary(a: PhaseAngle | int) -> np.ndarray:
    return _PHASE_MATRICES[as_angle(a)]


def compose_phase(angles: Iterable[PhaseAngle | int]) -> PhaseAngle:
    return PhaseAngle(sum(as_angle(a).ticks for a in angles))


def inverse_phase(a: PhaseAngle | int) -> PhaseAngle:
    return -as_angle(a)


def pauli_unitary(p: PauliLabel) -> np.ndarray:
    return _PAULI_MATRICES[p]


_A, _B = QubitId(Role.T, 0), QubitId(Role.H, 0)
_SLOT_QUBIT = {QubitSlot.First: _A, QubitSlot.Second: _B}


def _match_label(state) -> BellLabel:
    hits = [b for b in BELL_ORDER if equal_up_to_global_phase(state, make_bell(b, _A, _B))]
    if len(hits) != 1:
        raise AssertionError(f"state is not a single Bell state: {state}")
    return hits[0]


def _build_transport_table() -> dict[tuple[BellLabel, QubitSlot, PauliLabel], BellLabel]:
    table = {}
    for start, slot, p in itertools.product(BELL_ORDER, QubitSlot, PauliLabel):
        moved = apply_single(make_bell(start, _A, _B), pauli_unitary(p), _SLOT_QUBIT[slot])
        table[start, slot, p] = _match_label(moved)
    return table


def _build_correlation_table() -> dict[tuple[BellLabel, MeasBasis], Correlation]:
    zz = np.diag([1, -1, -1, 1]).astype(complex)
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    xx = np.kron(x, x)
    table = {}
    for b in BELL_ORDER:
        vec = make_bell(b, _A, _B).amplitudes
        for basis, obs in ((MeasBasis.Computational, zz), (MeasBasis.Hadamard, xx)):
            parity = np.vdot(vec, obs @ vec).real
            table[b, basis] = Correlation.Same if parity > 0.5 else Correlation.Opposite
    return table


_TRANSPORT = _build_transport_table()
_COMPARE = {
    (_TRANSPORT[ref, QubitSlot.First, p], ref): p for ref in BELL_ORDER for p in PauliLabel
}
_INFER = {(init, _TRANSPORT[init, QubitSlot.Second, p]): p for init in BELL_ORDER for p in PauliLabel}
_CORRELATION = _build_correlation_table()


def bell_under_pauli(start: BellLabel, slot: QubitSlot, p: PauliLabel) -> BellLabel:
    return _TRANSPORT[start, slot, p]


def bell_compare(measured: BellLabel, reference: BellLabel) -> PauliLabel:
    """Pauli that, applied to the first photon of ``reference``, yields ``measured``."""
    return _COMPARE[measured, reference]


def infer_pauli(initial: BellLabel, final: BellLabel) -> PauliLabel:
    """Alice's encoding on photon h, recovered from the initial and final labels."""
    return _INFER[initial, final]


def expected_correlation(label: BellLabel, basis: MeasBasis) -> Correlation:
    return _CORRELATION[label, basis]
