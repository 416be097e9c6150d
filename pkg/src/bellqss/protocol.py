"""Five-party secret sharing over Bell pairs: original and improved variants.

A run is simulated position by position. Every position owns one small joint
state in :class:`QuantumWorld` (two qubits for an honest run, four once fake
pairs are introduced), and every qubit has exactly one holder. Parties act
through a :class:`PartyView`, which only exposes the qubits they hold and the
classical messages addressed to them, so a strategy cannot use information it
was never sent.

Order of a run::

    (1)  Alice prepares k Bell pairs, keeps H, sends T to Bob
    (2-3) Bob, Charlie, Green, Zach each rotate the T photons by U(a)
    (4') improved variant only: Alice spot-checks m pairs before encoding
    (4)  Alice dense-codes her secret on H and sends it to Zach
    (5)  Alice announces k1 check positions, Green reverses the rotations and
         Bell-measures; if all checks pass Alice announces the initial labels
         and the agents decode the remaining positions together
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .algebra import (
    ANGLES,
    Correlation,
    PauliLabel,
    PhaseAngle,
    QubitSlot,
    bell_under_pauli,
    compose_phase,
    expected_correlation,
    infer_pauli,
    inverse_phase,
    pauli_unitary,
    phase_unitary,
)
from .errors import (
    ConfigError,
    InternalInvariantError,
    InvalidArgumentError,
    ProtocolAbortError,
    ProtocolStateError,
)
from .quantum import (
    BELL_ORDER,
    BellLabel,
    MeasBasis,
    QubitId,
    StateVector,
    apply_single,
    basis_ket,
    basis_measure,
    bell_measure,
    make_bell,
    tensor,
    H as h_qubit,
    T as t_qubit,
)
from .rng import Streams


class PartyId(enum.Enum):
    Alice = "Alice"
    Bob = "Bob"
    Charlie = "Charlie"
    Green = "Green"
    Zach = "Zach"


AGENTS: tuple[PartyId, ...] = (PartyId.Bob, PartyId.Charlie, PartyId.Green, PartyId.Zach)
EVE = "Eve"


class Variant(enum.Enum):
    Original = "original"
    Improved = "improved"


class Verdict(enum.Enum):
    Match = "match"
    Mismatch = "mismatch"


Secret = tuple  # tuple[PauliLabel, ...], one entry per position


@dataclass(frozen=True)
class ProtocolConfig:
    k: int
    k1: int
    m: int = 0
    variant: Variant = Variant.Original
    seed: int = 0

    def __post_init__(self):
        if self.k < 2:
            raise ConfigError("k must be >= 2")
        if self.k1 < 1:
            raise ConfigError("k1 must be >= 1")
        if self.k1 >= self.k:
            raise ConfigError("k1 must be < k")
        if self.m < 0:
            raise ConfigError("m must be >= 0")
        if self.variant is Variant.Original and self.m:
            raise ConfigError("m > 0 requires the improved variant")
        if self.m >= self.k - self.k1:
            raise ConfigError("m must be < k - k1")

    @property
    def message_positions(self) -> int:
        return self.k - self.k1 - self.m

    @property
    def message_capacity(self) -> int:
        return 2 * self.message_positions


# --------------------------------------------------------------------------- #
# sequences, transcript and the quantum world
# --------------------------------------------------------------------------- #


@dataclass
class PhotonSequence:
    """Ordered photons of one sequence; ``None`` marks a consumed position."""

    name: str
    entries: dict[int, QubitId | None]

    @classmethod
    def of(cls, name: str, qubits: Iterable[QubitId]) -> PhotonSequence:
        return cls(name, {q.index: q for q in qubits})

    def live_positions(self) -> list[int]:
        return [p for p, q in self.entries.items() if q is not None]

    def qubit(self, position: int) -> QubitId:
        q = self.entries.get(position)
        if q is None:
            raise InternalInvariantError(f"{self.name}[{position}] is consumed or absent")
        return q

    def consume(self, position: int) -> None:
        self.qubit(position)
        self.entries[position] = None

    def renamed(self, name: str) -> PhotonSequence:
        return PhotonSequence(name, dict(self.entries))

    def __len__(self) -> int:
        return len(self.live_positions())


@dataclass(frozen=True)
class Message:
    index: int
    sender: str
    to: str
    kind: str
    payload: Any
    channel: str = "public"  # public | covert | quantum


class Transcript:
    """Append-only message log plus a record of who read which message."""

    def __init__(self):
        self.messages: list[Message] = []
        self.reads: list[tuple[str, int, int]] = []  # (reader, message index, clock)

    def post(self, sender, to, kind: str, payload: Any = None, channel: str = "public") -> Message:
        msg = Message(len(self.messages), _name(sender), _name(to), kind, payload, channel)
        self.messages.append(msg)
        return msg

    def visible(self, reader) -> list[Message]:
        who = _name(reader)
        return [
            m
            for m in self.messages
            if m.channel != "quantum" and (m.to in ("all", who) or m.sender == who)
        ]

    def read(self, reader, kind: str, sender=None) -> list[Message]:
        who = _name(reader)
        hits = [
            m
            for m in self.visible(reader)
            if m.kind == kind and (sender is None or m.sender == _name(sender))
        ]
        clock = len(self.messages)
        for m in hits:
            self.reads.append((who, m.index, clock))
        return hits

    def public(self) -> list[Message]:
        return [m for m in self.messages if m.channel != "covert"]

    def covert(self) -> list[Message]:
        return [m for m in self.messages if m.channel == "covert"]


def _name(party) -> str:
    return party.value if isinstance(party, PartyId) else str(party)


class QuantumWorld:
    """Per-position joint states and the holder of every live qubit."""

    def __init__(self, streams: Streams):
        self.states: dict[int, StateVector] = {}
        self.holder: dict[QubitId, str] = {}
        self._streams = streams

    def nature(self, position: int) -> np.random.Generator:
        return self._streams.get("nature", position)

    def require(self, actor, qubits: Iterable[QubitId]) -> None:
        who = _name(actor)
        for q in qubits:
            owner = self.holder.get(q)
            if owner is None:
                raise InternalInvariantError(f"{who} targets consumed qubit {q}")
            if owner != who:
                raise InternalInvariantError(f"{who} touches {q} held by {owner}")

    def prepare(self, actor, state: StateVector) -> None:
        positions = {q.index for q in state.qubits}
        if len(positions) != 1:
            raise InvalidArgumentError("a prepared state must live at one position")
        (pos,) = positions
        current = self.states.get(pos)
        self.states[pos] = state if current is None else tensor(current, state)
        for q in state.qubits:
            self.holder[q] = _name(actor)

    def transfer(self, actor, q: QubitId, to) -> None:
        self.require(actor, [q])
        self.holder[q] = _name(to)

    def apply(self, actor, q: QubitId, op) -> None:
        self.require(actor, [q])
        self.states[q.index] = apply_single(self.states[q.index], op, q)

    def _settle(self, pos: int, residual: StateVector, gone: Sequence[QubitId]) -> None:
        for q in gone:
            del self.holder[q]
        if residual.n:
            self.states[pos] = residual
        else:
            del self.states[pos]

    def bell_measure(self, actor, q1: QubitId, q2: QubitId, keep: bool = False) -> BellLabel:
        """Bell measurement; ``keep`` leaves the pair projected instead of consumed."""
        self.require(actor, [q1, q2])
        pos = q1.index
        label, residual = bell_measure(self.states[pos], q1, q2, self.nature(pos))
        if keep:
            self.states[pos] = tensor(make_bell(label, q1, q2), residual)
        else:
            self._settle(pos, residual, (q1, q2))
        return label

    def basis_measure(self, actor, q: QubitId, basis: MeasBasis, keep: bool = False) -> int:
        self.require(actor, [q])
        pos = q.index
        bit, residual = basis_measure(self.states[pos], q, basis, self.nature(pos))
        if keep:
            self.states[pos] = tensor(basis_ket(basis, bit, q), residual)
        else:
            self._settle(pos, residual, (q,))
        return bit

    def held_by(self, actor) -> set[QubitId]:
        who = _name(actor)
        return {q for q, h in self.holder.items() if h == who}


class PartyView:
    """Everything one party may legitimately touch during a run."""

    def __init__(self, run: ProtocolRun, party):
        self._run = run
        self.party = party
        self.name = _name(party)

    @property
    def rng(self) -> np.random.Generator:
        return self._run.streams.get("party", self.name)

    @property
    def sequences(self) -> dict[str, PhotonSequence]:
        return self._run.sequences.setdefault(self.name, {})

    def read(self, kind: str, sender=None) -> list[Message]:
        return self._run.log.read(self.party, kind, sender)

    def read_one(self, kind: str, sender=None) -> Any:
        hits = self.read(kind, sender)
        if not hits:
            raise ProtocolStateError(f"{self.name} expected a '{kind}' message")
        return hits[-1].payload

    def post(self, kind: str, payload: Any = None, to="all", covert: bool = False) -> Message:
        return self._run.log.post(self.party, to, kind, payload, "covert" if covert else "public")

    def prepare(self, state: StateVector) -> None:
        self._run.world.prepare(self.party, state)

    def apply(self, q: QubitId, op) -> None:
        self._run.world.apply(self.party, q, op)

    def bell_measure(self, q1: QubitId, q2: QubitId, keep: bool = False) -> BellLabel:
        return self._run.world.bell_measure(self.party, q1, q2, keep)

    def basis_measure(self, q: QubitId, basis: MeasBasis, keep: bool = False) -> int:
        return self._run.world.basis_measure(self.party, q, basis, keep)

    def send(self, seq: PhotonSequence, to, covert: bool = False) -> None:
        """Hand every live photon of ``seq`` to ``to`` and log the transfer."""
        for p in seq.live_positions():
            self._run.world.transfer(self.party, seq.qubit(p), to)
        channel = "covert" if covert else "quantum"
        self._run.log.post(self.party, to, "sequence", seq.name, channel)

    def holds(self, q: QubitId) -> bool:
        return self._run.world.holder.get(q) == self.name


# --------------------------------------------------------------------------- #
# party behaviors
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class CheckRequest:
    kind: str  # "precheck" (step 4') or "final" (step 5)
    positions: tuple[int, ...]


class PartyBehavior:
    """Honest behavior; adversaries override individual hooks."""

    def on_receive_sequence(self, view: PartyView, seq: PhotonSequence) -> PhotonSequence:
        # the single-photon composition check is a no-op on an ideal channel
        return seq

    def on_apply_operation(
        self, view: PartyView, seq: PhotonSequence, angles: Sequence[PhaseAngle]
    ) -> None:
        positions = seq.live_positions()
        if len(angles) != len(positions):
            raise InvalidArgumentError("one angle per live photon required")
        for p, a in zip(positions, angles):
            view.apply(seq.qubit(p), phase_unitary(a))

    def on_check_request(self, view: PartyView, request: CheckRequest):
        """Zach's reply to a check: surrendered photons or the two sequences for Green."""
        t4, h1 = view.sequences["T4"], view.sequences.get("H1")
        if request.kind == "precheck":
            return {p: t4.qubit(p) for p in request.positions}
        return t4, h1

    def on_announcement(self, view: PartyView, message: Message) -> None:
        pass


class Strategy:
    """Map from party to behavior, plus an optional tap on quantum channels."""

    name = "honest"
    taps_channels = False

    def __init__(self, overrides: Mapping[PartyId, PartyBehavior] | None = None):
        self.overrides: dict[PartyId, PartyBehavior] = dict(overrides or {})
        self._honest = PartyBehavior()

    def behavior(self, party: PartyId) -> PartyBehavior:
        return self.overrides.get(party, self._honest)

    def on_transit(self, view: PartyView, sender: PartyId, receiver: PartyId, seq: PhotonSequence):
        return seq

    def recovered_secret(self) -> dict[int, PauliLabel] | None:
        """What the adversary learned, if it decodes anything at all."""
        return None

    @property
    def decodes(self) -> bool:
        return False


# --------------------------------------------------------------------------- #
# reports
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class CheckRecord:
    position: int
    outcome: BellLabel
    expected: BellLabel
    verdict: Verdict


@dataclass(frozen=True)
class PrecheckRecord:
    position: int
    basis: MeasBasis
    alice_bit: int
    partner_bit: int
    expected: Correlation
    verdict: Verdict


@dataclass
class RunReport:
    config: ProtocolConfig
    strategy: str
    initial_labels: tuple[BellLabel, ...]
    angles: dict[PartyId, tuple[PhaseAngle, ...]]
    alice_secret: tuple[PauliLabel, ...]
    precheck_positions: tuple[int, ...] = ()
    prechecks: list[PrecheckRecord] = field(default_factory=list)
    check_positions: tuple[int, ...] = ()
    checks: list[CheckRecord] = field(default_factory=list)
    message_positions: tuple[int, ...] = ()
    detected: bool = False
    aborted_at: str | None = None
    recovered_secret: dict[int, PauliLabel] | None = None
    adversary_secret: dict[int, PauliLabel] | None = None
    log: list[Message] = field(default_factory=list)
    reads: list[tuple[str, int, int]] = field(default_factory=list)

    @property
    def verdicts(self) -> list[Verdict]:
        return [r.verdict for r in self.prechecks] + [r.verdict for r in self.checks]

    @property
    def mismatch_count(self) -> int:
        return sum(v is Verdict.Mismatch for v in self.verdicts)

    def _accuracy(self, guess: Mapping[int, PauliLabel] | None) -> float | None:
        if guess is None or not self.message_positions:
            return None
        hits = sum(guess.get(p) == self.alice_secret[p] for p in self.message_positions)
        return hits / len(self.message_positions)

    @property
    def recovery_accuracy(self) -> float | None:
        return self._accuracy(self.recovered_secret)

    @property
    def adversary_accuracy(self) -> float | None:
        return self._accuracy(self.adversary_secret)

    def check_invariants(self) -> None:
        if self.detected != any(v is Verdict.Mismatch for v in self.verdicts):
            raise InternalInvariantError("detection verdict disagrees with per-check verdicts")


# --------------------------------------------------------------------------- #
# protocol steps
# --------------------------------------------------------------------------- #


def alice_prepare(
    config: ProtocolConfig,
    rng: np.random.Generator,
    labels: Sequence[BellLabel] | None = None,
) -> tuple[list[BellLabel], PhotonSequence, PhotonSequence, dict[int, StateVector]]:
    """Draw k uniform Bell labels and build one (t_i, h_i) pair per position."""
    if labels is None:
        idx = rng.integers(0, 4, size=config.k)
        labels = [BELL_ORDER[i] for i in idx]
    elif len(labels) != config.k:
        raise InvalidArgumentError("one forced label per position required")
    labels = list(labels)
    states = {i: make_bell(b, t_qubit(i), h_qubit(i)) for i, b in enumerate(labels)}
    t_seq = PhotonSequence.of("T", (t_qubit(i) for i in range(config.k)))
    h_seq = PhotonSequence.of("H", (h_qubit(i) for i in range(config.k)))
    return labels, t_seq, h_seq, states


def random_angles(rng: np.random.Generator, n: int) -> tuple[PhaseAngle, ...]:
    return tuple(ANGLES[i] for i in rng.integers(0, 3, size=n))


def random_secret(rng: np.random.Generator, k: int) -> tuple[PauliLabel, ...]:
    paulis = list(PauliLabel)
    return tuple(paulis[i] for i in rng.integers(0, 4, size=k))


def agent_apply(
    seq: PhotonSequence, states: dict[int, StateVector], angles: Sequence[PhaseAngle | int]
) -> dict[int, StateVector]:
    """Rotate the photon of ``seq`` at each live position by U(angle)."""
    positions = seq.live_positions()
    if len(angles) != len(positions):
        raise InvalidArgumentError(f"{len(angles)} angles for {len(positions)} live photons")
    out = dict(states)
    for p, a in zip(positions, angles):
        out[p] = apply_single(out[p], phase_unitary(a), seq.qubit(p))
    return out


def alice_encode(
    secret: Sequence[PauliLabel], h_seq: PhotonSequence, states: dict[int, StateVector]
) -> dict[int, StateVector]:
    if len(secret) != len(h_seq.entries):
        raise InvalidArgumentError("secret length must equal k")
    out = dict(states)
    for p in h_seq.live_positions():
        out[p] = apply_single(out[p], pauli_unitary(secret[p]), h_seq.qubit(p))
    return out


def select_check_positions(live: Sequence[int], k1: int, rng: np.random.Generator) -> tuple[int, ...]:
    live = sorted(live)
    if k1 > len(live):
        raise InvalidArgumentError(f"cannot pick {k1} positions from {len(live)} live ones")
    picked = rng.choice(len(live), size=k1, replace=False)
    return tuple(sorted(live[i] for i in picked))


def reverse_and_bell_measure(
    state: StateVector,
    t: QubitId,
    h: QubitId,
    published: Iterable[PhaseAngle | int],
    rng: np.random.Generator,
) -> tuple[BellLabel, StateVector]:
    undo = inverse_phase(compose_phase(published))
    return bell_measure(apply_single(state, phase_unitary(undo), t), t, h, rng)


def judge(initial: BellLabel, alice_pauli: PauliLabel, outcome: BellLabel) -> tuple[BellLabel, Verdict]:
    expected = bell_under_pauli(initial, QubitSlot.Second, alice_pauli)
    return expected, Verdict.Match if outcome is expected else Verdict.Mismatch


def green_verify(
    state: StateVector,
    t: QubitId,
    h: QubitId,
    published: Iterable[PhaseAngle | int],
    initial: BellLabel,
    alice_pauli: PauliLabel,
    rng: np.random.Generator,
) -> tuple[CheckRecord, StateVector]:
    """Undo the compound rotation on ``t``, Bell-measure ``(t, h)`` and judge it.

    Returns the check record and whatever is left of ``state``.
    """
    outcome, residual = reverse_and_bell_measure(state, t, h, published, rng)
    expected, verdict = judge(initial, alice_pauli, outcome)
    return CheckRecord(t.index, outcome, expected, verdict), residual


def correlation_of(bit_a: int, bit_b: int) -> Correlation:
    return Correlation.Same if bit_a == bit_b else Correlation.Opposite


class ProtocolRun:
    """Mutable state of one protocol execution."""

    def __init__(
        self,
        config: ProtocolConfig,
        strategy: Strategy | None = None,
        labels: Sequence[BellLabel] | None = None,
        secret: Sequence[PauliLabel] | None = None,
    ):
        self.config = config
        self.strategy = strategy or Strategy()
        self.streams = Streams(config.seed)
        self.log = Transcript()
        self.world = QuantumWorld(self.streams)
        self.sequences: dict[str, dict[str, PhotonSequence]] = {}
        self._forced_labels = labels
        self._forced_secret = secret
        self.angles: dict[PartyId, tuple[PhaseAngle, ...]] = {}

    def view(self, party) -> PartyView:
        return PartyView(self, party)

    def _alice_rng(self, purpose: str) -> np.random.Generator:
        return self.streams.get("party", "Alice", purpose)

    def _hold(self, party, seq: PhotonSequence) -> None:
        self.sequences.setdefault(_name(party), {})[seq.name] = seq

    def _ship(self, sender: PartyId, receiver: PartyId, seq: PhotonSequence) -> PhotonSequence:
        """Move a sequence over a quantum channel, letting the strategy tap it."""
        sv = self.view(sender)
        if not self.strategy.taps_channels:
            sv.send(seq, receiver)
            return seq
        sv.send(seq, EVE)
        seq = self.strategy.on_transit(self.view(EVE), sender, receiver, seq)
        self.view(EVE).send(seq, receiver)
        return seq

    # step (1)
    def prepare(self) -> None:
        cfg = self.config
        labels, t_seq, h_seq, states = alice_prepare(cfg, self._alice_rng("labels"), self._forced_labels)
        for p in range(cfg.k):
            self.world.prepare(PartyId.Alice, states[p])
        self.initial_labels = tuple(labels)
        if self._forced_secret is not None:
            if len(self._forced_secret) != cfg.k:
                raise InvalidArgumentError("secret length must equal k")
            self.secret = tuple(self._forced_secret)
        else:
            self.secret = random_secret(self._alice_rng("secret"), cfg.k)
        self._hold(PartyId.Alice, t_seq)
        self._hold(PartyId.Alice, h_seq)

    # steps (2)-(3)
    def travel(self) -> None:
        seq = self.sequences["Alice"]["T"]
        sender = PartyId.Alice
        for hop, agent in enumerate(AGENTS, start=1):
            seq = self._ship(sender, agent, seq)
            behavior = self.strategy.behavior(agent)
            view = self.view(agent)
            view.post("single_photon_check", "pass", to=agent)
            seq = behavior.on_receive_sequence(view, seq)
            angles = random_angles(view.rng, len(seq))
            behavior.on_apply_operation(view, seq, angles)
            self.angles[agent] = tuple(angles)
            seq = seq.renamed(f"T{hop}")
            self._hold(agent, seq)
            sender = agent

    def _publish_angles(self, positions: Sequence[int], to, shuffle: bool = False) -> None:
        order = list(AGENTS)
        if shuffle:
            self.streams.get("broadcast", "order").shuffle(order)
        for agent in order:
            payload = {p: self.angles[agent][p].ticks for p in positions}
            self.view(agent).post("angles", payload, to=to)

    def _read_angles(self, reader, positions: Sequence[int]) -> dict[int, list[PhaseAngle]]:
        # an agent reading its own posts is just reading its own memory
        pooled: dict[int, list[PhaseAngle]] = {p: [] for p in positions}
        for msg in self.log.read(reader, "angles"):
            for p in positions:
                if p in msg.payload:
                    pooled[p].append(PhaseAngle(msg.payload[p]))
        for p, angles in pooled.items():
            if len(angles) != len(AGENTS):
                raise InternalInvariantError(f"position {p}: {len(angles)} published angles")
        return pooled

    # step (4')
    def precheck(self, report: RunReport) -> None:
        cfg = self.config
        alice = self.view(PartyId.Alice)
        h_seq = alice.sequences["H"]
        rng = self._alice_rng("precheck")
        positions = select_check_positions(h_seq.live_positions(), cfg.m, rng)
        bases = {p: (MeasBasis.Computational, MeasBasis.Hadamard)[int(rng.integers(0, 2))] for p in positions}
        alice_bits = {}
        for p in positions:
            alice_bits[p] = alice.basis_measure(h_seq.qubit(p), bases[p])
            h_seq.consume(p)
        alice.post("precheck_positions", list(positions))
        report.precheck_positions = positions

        zach = self.view(PartyId.Zach)
        surrendered = self.strategy.behavior(PartyId.Zach).on_check_request(
            zach, CheckRequest("precheck", positions)
        )
        if set(surrendered) != set(positions):
            raise ProtocolAbortError("Zach did not surrender every requested partner photon")
        for p in positions:
            self.world.transfer(PartyId.Zach, surrendered[p], PartyId.Alice)
            zach.sequences["T4"].entries[p] = None
        self.log.post(PartyId.Zach, PartyId.Alice, "sequence", "partners", "quantum")

        self._publish_angles(positions, PartyId.Alice, shuffle=True)
        pooled = self._read_angles(PartyId.Alice, positions)
        records = []
        for p in positions:
            q = surrendered[p]
            alice.apply(q, phase_unitary(inverse_phase(compose_phase(pooled[p]))))
            partner_bit = alice.basis_measure(q, bases[p])
            expected = expected_correlation(self.initial_labels[p], bases[p])
            got = correlation_of(alice_bits[p], partner_bit)
            verdict = Verdict.Match if got is expected else Verdict.Mismatch
            records.append(PrecheckRecord(p, bases[p], alice_bits[p], partner_bit, expected, verdict))
        report.prechecks = records
        alice.post("precheck_verdicts", {r.position: r.verdict.value for r in records})

    # step (4)
    def encode(self) -> None:
        alice = self.view(PartyId.Alice)
        h_seq = alice.sequences["H"]
        for p in h_seq.live_positions():
            alice.apply(h_seq.qubit(p), pauli_unitary(self.secret[p]))
        h1 = h_seq.renamed("H1")
        h1 = self._ship(PartyId.Alice, PartyId.Zach, h1)
        self._hold(PartyId.Zach, h1)

    # step (5)
    def final_check(self, report: RunReport) -> None:
        cfg = self.config
        zach = self.view(PartyId.Zach)
        live = zach.sequences["H1"].live_positions()
        checks = select_check_positions(live, cfg.k1, self._alice_rng("checks"))
        report.check_positions = checks
        report.message_positions = tuple(p for p in live if p not in checks)
        announce = self.view(PartyId.Alice).post("check_positions", list(checks))
        for agent in AGENTS:
            self.strategy.behavior(agent).on_announcement(self.view(agent), announce)

        t_fwd, h_fwd = self.strategy.behavior(PartyId.Zach).on_check_request(
            zach, CheckRequest("final", checks)
        )
        zach.send(t_fwd, PartyId.Green)
        zach.send(h_fwd, PartyId.Green)
        self._hold(PartyId.Green, t_fwd.renamed("T4"))
        self._hold(PartyId.Green, h_fwd.renamed("H1"))

        green = self.view(PartyId.Green)
        self._publish_angles(checks, PartyId.Green)
        pooled = self._read_angles(PartyId.Green, checks)
        outcomes = {}
        for p in checks:
            t, h = green.sequences["T4"].qubit(p), green.sequences["H1"].qubit(p)
            outcomes[p] = self._green_measure(green, t, h, pooled[p])
            green.sequences["T4"].consume(p)
            green.sequences["H1"].consume(p)
        green.post("bell_outcomes", {p: o.value for p, o in outcomes.items()}, to=PartyId.Alice)

        alice = self.view(PartyId.Alice)
        reported = alice.read_one("bell_outcomes", PartyId.Green)
        records = []
        for p in checks:
            outcome = BellLabel(reported[p])
            expected, verdict = judge(self.initial_labels[p], self.secret[p], outcome)
            records.append(CheckRecord(p, outcome, expected, verdict))
        report.checks = records
        alice.post("check_verdicts", {r.position: r.verdict.value for r in records})

    def _green_measure(self, green: PartyView, t: QubitId, h: QubitId, angles) -> BellLabel:
        world = self.world
        world.require(green.party, [t, h])
        pos = t.index
        outcome, residual = reverse_and_bell_measure(world.states[pos], t, h, angles, world.nature(pos))
        world._settle(pos, residual, (t, h))
        return outcome

    def announce_and_recover(self, report: RunReport) -> None:
        alice = self.view(PartyId.Alice)
        msg = alice.post("initials", [b.value for b in self.initial_labels])
        for agent in AGENTS:
            self.strategy.behavior(agent).on_announcement(self.view(agent), msg)
        report.recovered_secret = recover_secret(self, report.message_positions)

    def execute(self) -> RunReport:
        cfg = self.config
        self.prepare()
        self.travel()
        report = RunReport(
            config=cfg,
            strategy=self.strategy.name,
            initial_labels=self.initial_labels,
            angles=dict(self.angles),
            alice_secret=self.secret,
        )
        if cfg.variant is Variant.Improved and cfg.m:
            self.precheck(report)
            if any(r.verdict is Verdict.Mismatch for r in report.prechecks):
                return self._finish(report, "precheck")
        self.encode()
        self.final_check(report)
        if any(r.verdict is Verdict.Mismatch for r in report.checks):
            return self._finish(report, "final_check")
        self.announce_and_recover(report)
        return self._finish(report, None)

    def _finish(self, report: RunReport, aborted_at: str | None) -> RunReport:
        report.aborted_at = aborted_at
        report.detected = aborted_at is not None
        if aborted_at is not None:
            self.view(PartyId.Alice).post("abort", aborted_at)
        if self.strategy.decodes:
            report.adversary_secret = self.strategy.recovered_secret() or {}
        report.log = list(self.log.messages)
        report.reads = list(self.log.reads)
        report.check_invariants()
        return report


def recover_secret(run: ProtocolRun, positions: Sequence[int]) -> dict[int, PauliLabel]:
    """Agents pool their angles; Green undoes them, Bell-measures and decodes.

    Only legal once every check passed and Alice has announced the initials.
    """
    if not run.log.read(PartyId.Green, "initials"):
        raise ProtocolStateError("initial Bell states have not been announced")
    if any(m.kind == "abort" for m in run.log.messages):
        raise ProtocolStateError("protocol aborted after a failed check")
    green = run.view(PartyId.Green)
    initials = [BellLabel(v) for v in green.read_one("initials", PartyId.Alice)]
    run._publish_angles(positions, PartyId.Green)
    pooled = run._read_angles(PartyId.Green, positions)
    recovered = {}
    for p in positions:
        t, h = green.sequences["T4"].qubit(p), green.sequences["H1"].qubit(p)
        outcome = run._green_measure(green, t, h, pooled[p])
        green.sequences["T4"].consume(p)
        green.sequences["H1"].consume(p)
        recovered[p] = infer_pauli(initials[p], outcome)
    return recovered


def improved_precheck(run: ProtocolRun, report: RunReport) -> list[PrecheckRecord]:
    """Step (4'): spot-check m pairs in random bases before Alice encodes."""
    if run.config.variant is not Variant.Improved:
        raise ProtocolStateError("pre-check only exists in the improved variant")
    if run.config.m == 0:
        return []
    run.precheck(report)
    return report.prechecks


def run_scenario(
    config: ProtocolConfig,
    strategy: Strategy | None = None,
    *,
    labels: Sequence[BellLabel] | None = None,
    secret: Sequence[PauliLabel] | None = None,
) -> RunReport:
    return ProtocolRun(config, strategy, labels=labels, secret=secret).execute()
