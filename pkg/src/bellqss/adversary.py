"""Dishonest behaviors plugged into the protocol engine.

:class:`CollusionStrategy` is the joint attack by the first and last agent:

* Bob keeps Alice's T photons out of the ring, covertly hands them to Zach and
  forwards halves of his own |psi+> pairs (t') in their place.
* Zach, once Alice names the check positions, Bell-measures (t, h') there,
  which swaps the entanglement onto (t', h), then repairs h with the Pauli
  that links the outcome to |psi+>. Green's checks then see exactly the
  honest state.
* On every other position Zach Bell-measures (t, h) himself, which is in a
  Bell eigenstate touched only by Alice's encoding, and decodes the secret
  as soon as Alice announces the initial labels.

:class:`InterceptResendStrategy` is a naive outsider used as a baseline.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .algebra import PauliLabel, bell_compare, infer_pauli, pauli_unitary
from .errors import InvalidArgumentError, ProtocolStateError
from .protocol import (
    CheckRequest,
    Message,
    PartyBehavior,
    PartyId,
    PartyView,
    PhotonSequence,
    Strategy,
)
from .quantum import BellLabel, Hp, MeasBasis, Tp, make_bell

FAKE_LABEL = BellLabel.PsiPlus


@dataclass
class CollusionState:
    """What Bob and Zach share over their covert channel."""

    captured: PhotonSequence | None = None
    fake_t: PhotonSequence | None = None
    fake_h: PhotonSequence | None = None
    swap_outcomes: dict[int, BellLabel] = field(default_factory=dict)
    corrections: dict[int, PauliLabel] = field(default_factory=dict)
    message_outcomes: dict[int, BellLabel] = field(default_factory=dict)
    recovered: dict[int, PauliLabel] | None = None


def bob_substitute(view: PartyView, t_seq: PhotonSequence, state: CollusionState) -> PhotonSequence:
    """Swap Alice's T-sequence for the t' halves of fresh |psi+> pairs.

    The genuine photons and the h' halves go to Zach covertly; the returned
    sequence is what Bob rotates and forwards to Charlie.
    """
    positions = t_seq.live_positions()
    for p in positions:
        view.prepare(make_bell(FAKE_LABEL, Tp(p), Hp(p)))
    state.fake_t = PhotonSequence.of("Tp", (Tp(p) for p in positions))
    state.fake_h = PhotonSequence.of("Hp", (Hp(p) for p in positions))
    view.send(state.fake_h, PartyId.Zach, covert=True)
    view.send(t_seq, PartyId.Zach, covert=True)
    state.captured = t_seq.renamed("T")
    return state.fake_t


def zach_swap_and_correct(view: PartyView, state: CollusionState, position: int) -> PauliLabel:
    """Entanglement swap on (t, h') followed by the Bell-comparison repair of h."""
    checks = view.read_one("check_positions", PartyId.Alice)
    if position not in checks:
        raise InvalidArgumentError(f"position {position} was not announced for checking")
    t, hp = state.captured.qubit(position), state.fake_h.qubit(position)
    outcome = view.bell_measure(t, hp)
    state.captured.consume(position)
    state.fake_h.consume(position)
    correction = bell_compare(outcome, FAKE_LABEL)
    view.apply(view.sequences["H1"].qubit(position), pauli_unitary(correction))
    state.swap_outcomes[position] = outcome
    state.corrections[position] = correction
    return correction


def zach_read_messages(view: PartyView, state: CollusionState, positions) -> dict[int, BellLabel]:
    """Bell-measure (t, h^(1)) at message positions.

    The pair is a Bell eigenstate, so the projective measurement leaves it
    intact and h^(1) can still be forwarded to Green.
    """
    h1 = view.sequences["H1"]
    for p in positions:
        state.message_outcomes[p] = view.bell_measure(state.captured.qubit(p), h1.qubit(p), keep=True)
    return {p: state.message_outcomes[p] for p in positions}


def zach_decode(view: PartyView, state: CollusionState) -> dict[int, PauliLabel]:
    announced = view.read("initials", PartyId.Alice)
    if not announced:
        raise ProtocolStateError("Alice has not announced the initial Bell states")
    initials = [BellLabel(v) for v in announced[-1].payload]
    state.recovered = {
        p: infer_pauli(initials[p], outcome) for p, outcome in state.message_outcomes.items()
    }
    return state.recovered


def zach_forward_for_check(view: PartyView, state: CollusionState):
    """Green receives the travelled fake photons and the (repaired) H^(1)."""
    return view.sequences["T4"], view.sequences["H1"]


class ColludingBob(PartyBehavior):
    def __init__(self, state: CollusionState):
        self.state = state

    def on_receive_sequence(self, view, seq):
        return bob_substitute(view, seq, self.state)


class ColludingZach(PartyBehavior):
    def __init__(self, state: CollusionState, returns_genuine: bool = False, corrects: bool = True):
        self.state = state
        self.returns_genuine = returns_genuine
        self.corrects = corrects

    def on_check_request(self, view, request: CheckRequest):
        st = self.state
        if request.kind == "precheck":
            if not self.returns_genuine:
                return super().on_check_request(view, request)
            out = {p: st.captured.qubit(p) for p in request.positions}
            for p in request.positions:
                st.captured.consume(p)
            return out
        checks = set(request.positions)
        if self.corrects:
            for p in request.positions:
                zach_swap_and_correct(view, st, p)
        others = [p for p in view.sequences["H1"].live_positions() if p not in checks]
        zach_read_messages(view, st, others)
        return zach_forward_for_check(view, st)

    def on_announcement(self, view, message: Message):
        if message.kind == "initials":
            zach_decode(view, self.state)


class CollusionStrategy(Strategy):
    """Bob and Zach jointly attack; ``returns_genuine`` changes Zach's pre-check reply."""

    name = "collusion"

    def __init__(self, returns_genuine: bool = False, corrects: bool = True):
        self.state = CollusionState()
        super().__init__(
            {
                PartyId.Bob: ColludingBob(self.state),
                PartyId.Zach: ColludingZach(self.state, returns_genuine, corrects),
            }
        )

    @property
    def decodes(self) -> bool:
        return True

    def recovered_secret(self):
        return self.state.recovered


def intercept_resend_eve(view: PartyView, seq: PhotonSequence) -> dict[int, int]:
    """Measure each photon in transit in the computational basis and pass it on."""
    return {p: view.basis_measure(seq.qubit(p), MeasBasis.Computational, keep=True) for p in seq.live_positions()}


class InterceptResendStrategy(Strategy):
    """Outsider measuring the T photons on the Alice -> Bob hop."""

    name = "intercept-resend"
    taps_channels = True

    def __init__(self, hop: tuple[PartyId, PartyId] = (PartyId.Alice, PartyId.Bob)):
        super().__init__()
        self.hop = hop
        self.bits: dict[int, int] = {}

    def on_transit(self, view, sender, receiver, seq):
        if (sender, receiver) == self.hop:
            self.bits.update(intercept_resend_eve(view, seq))
        return seq
