import itertools
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bellqss.algebra import PauliLabel, PhaseAngle, compose_phase, phase_unitary, pauli_unitary
from bellqss.errors import ConfigError, InternalInvariantError, InvalidArgumentError, ProtocolStateError
from bellqss.protocol import (
    AGENTS,
    PartyId,
    PhotonSequence,
    ProtocolConfig,
    ProtocolRun,
    RunReport,
    Variant,
    Verdict,
    agent_apply,
    alice_encode,
    alice_prepare,
    green_verify,
    improved_precheck,
    recover_secret,
    reverse_and_bell_measure,
    run_scenario,
    select_check_positions,
)
from bellqss.algebra import infer_pauli
from bellqss.quantum import (
    BELL_ORDER,
    BellLabel,
    apply_single,
    bell_probabilities,
    equal_up_to_global_phase,
    ket,
    make_bell,
    tensor,
)
from bellqss.quantum import H, T, Tp

from conftest import three_sigma

CFG = ProtocolConfig(k=32, k1=8, seed=7)


def one_pair(label=BellLabel.PsiMinus):
    cfg = ProtocolConfig(k=2, k1=1)
    labels, t_seq, h_seq, states = alice_prepare(cfg, None, labels=[label, BellLabel.PhiPlus])
    return t_seq, h_seq, states


class TestConfig:
    def test_valid(self):
        assert CFG.message_capacity == 48

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(k=4, k1=8),
            dict(k=8, k1=8),
            dict(k=8, k1=0),
            dict(k=8, k1=2, m=1),
            dict(k=8, k1=2, m=6, variant=Variant.Improved),
        ],
    )
    def test_rejected(self, kwargs):
        with pytest.raises(ConfigError):
            ProtocolConfig(**kwargs)

    def test_improved_capacity(self):
        assert ProtocolConfig(64, 8, 16, Variant.Improved).message_capacity == 80


class TestPrepare:
    def test_forced_label(self):
        labels, t_seq, h_seq, states = alice_prepare(ProtocolConfig(2, 1), None, [BellLabel.PhiPlus] * 2)
        assert equal_up_to_global_phase(states[0], make_bell(BellLabel.PhiPlus, T(0), H(0)))
        assert t_seq.qubit(0) == T(0) and h_seq.qubit(0) == H(0)

    def test_uniform_labels(self):
        labels, *_ = alice_prepare(ProtocolConfig(1000, 1), np.random.default_rng(3))
        counts = Counter(labels)
        sigma = np.sqrt(1000 * 0.25 * 0.75)
        for b in BELL_ORDER:
            assert abs(counts[b] - 250) <= 3 * sigma

    def test_deterministic(self):
        a, *_ = alice_prepare(CFG, np.random.default_rng(42))
        b, *_ = alice_prepare(CFG, np.random.default_rng(42))
        assert a == b


class TestAgentApply:
    def test_zero_angles(self):
        t_seq, _, states = one_pair()
        out = agent_apply(t_seq, states, [0, 0])
        assert all(np.allclose(out[p].amplitudes, states[p].amplitudes) for p in states)

    def test_inverse_pair(self):
        t_seq, _, states = one_pair()
        out = agent_apply(t_seq, agent_apply(t_seq, states, [1, 1]), [2, 2])
        assert all(np.allclose(out[p].amplitudes, states[p].amplitudes, atol=1e-12) for p in states)

    def test_worked_instance(self):
        t_seq, h_seq, states = one_pair(BellLabel.PsiMinus)
        states = alice_encode([PauliLabel.S01, PauliLabel.S00], h_seq, states)
        for a in (1, 0, 1, 2):  # Bob, Charlie, Green, Zach
            states = agent_apply(t_seq, states, [a, 0])
        want = apply_single(make_bell(BellLabel.PhiMinus, T(0), H(0)), phase_unitary(1), T(0))
        assert equal_up_to_global_phase(states[0], want, 1e-10)

    def test_length_mismatch(self):
        t_seq, _, states = one_pair()
        with pytest.raises(InvalidArgumentError):
            agent_apply(t_seq, states, [1])


class TestEncode:
    def test_identity(self):
        _, h_seq, states = one_pair()
        out = alice_encode([PauliLabel.S00] * 2, h_seq, states)
        assert np.allclose(out[0].amplitudes, states[0].amplitudes)

    def test_s01_on_psi_minus(self):
        _, h_seq, states = one_pair(BellLabel.PsiMinus)
        out = alice_encode([PauliLabel.S01, PauliLabel.S00], h_seq, states)
        assert equal_up_to_global_phase(out[0], make_bell(BellLabel.PhiMinus, T(0), H(0)))

    @pytest.mark.parametrize("p", list(PauliLabel))
    def test_double_encoding(self, p):
        _, h_seq, states = one_pair(BellLabel.PsiPlus)
        twice = alice_encode([p, p], h_seq, alice_encode([p, p], h_seq, states))
        assert equal_up_to_global_phase(twice[0], states[0])
        sign = -1 if p is PauliLabel.S11 else 1
        assert np.allclose(twice[0].amplitudes, sign * states[0].amplitudes)

    def test_length(self):
        _, h_seq, states = one_pair()
        with pytest.raises(InvalidArgumentError):
            alice_encode([PauliLabel.S00], h_seq, states)


class TestSelectChecks:
    def test_all_live(self):
        assert select_check_positions(range(5), 5, np.random.default_rng(0)) == (0, 1, 2, 3, 4)

    def test_deterministic(self):
        a = select_check_positions(range(100), 10, np.random.default_rng(8))
        assert a == select_check_positions(range(100), 10, np.random.default_rng(8))
        assert len(set(a)) == 10

    def test_insufficient(self):
        with pytest.raises(InvalidArgumentError):
            select_check_positions([1, 2], 3, np.random.default_rng(0))

    def test_inclusion_probability(self):
        rng = np.random.default_rng(99)
        n, k, k1 = 10000, 20, 5
        counts = Counter()
        for _ in range(n):
            counts.update(select_check_positions(range(k), k1, rng))
        # 4 sigma keeps the family-wise error over 20 positions small
        bound = 4 * np.sqrt(0.25 * 0.75 / n)
        assert all(abs(counts[p] / n - k1 / k) <= bound for p in range(k))


def reduced_two_qubit(state, keep):
    """Partial trace by explicit index bookkeeping (independent of the engine)."""
    psi = state.tensor_view()
    axes = [state.axis(q) for q in keep]
    rest = [i for i in range(state.n) if i not in axes]
    m = np.transpose(psi, axes + rest).reshape(4, -1)
    return m @ m.conj().T


class TestGreenVerify:
    def test_honest_match(self, rng):
        for init, p, angles in itertools.product(BELL_ORDER, PauliLabel, [(0, 1, 2, 2), (1, 1, 1, 0)]):
            st_ = apply_single(make_bell(init, T(0), H(0)), pauli_unitary(p), H(0))
            for a in angles:
                st_ = apply_single(st_, phase_unitary(a), T(0))
            record, rest = green_verify(st_, T(0), H(0), [PhaseAngle(a) for a in angles], init, p, rng)
            assert record.verdict is Verdict.Match
            assert rest.n == 0

    def test_fresh_photon_mismatch_rate(self):
        pair = make_bell(BellLabel.PhiPlus, T(0), H(0))
        state = tensor(ket("0", [Tp(0)]), pair)
        rho = reduced_two_qubit(state, [Tp(0), H(0)])
        oracle = {b: float(np.real(make_bell(b, Tp(0), H(0)).amplitudes.conj() @ rho @ make_bell(b, Tp(0), H(0)).amplitudes)) for b in BELL_ORDER}
        assert all(v == pytest.approx(0.25, abs=1e-12) for v in oracle.values())
        engine = bell_probabilities(state, Tp(0), H(0))
        assert all(engine[b] == pytest.approx(oracle[b], abs=1e-12) for b in BELL_ORDER)
        rng = np.random.default_rng(17)
        n = 10000
        bad = sum(
            green_verify(state, Tp(0), H(0), [], BellLabel.PhiPlus, PauliLabel.S00, rng)[0].verdict
            is Verdict.Mismatch
            for _ in range(n)
        )
        assert abs(bad / n - 0.75) <= three_sigma(0.75, n)


class TestRecover:
    def test_honest_full_recovery(self):
        report = run_scenario(CFG)
        assert len(report.message_positions) == 24
        assert report.recovered_secret == {p: report.alice_secret[p] for p in report.message_positions}

    def test_identity_secret(self):
        report = run_scenario(CFG, secret=[PauliLabel.S00] * 32)
        assert set(report.recovered_secret.values()) == {PauliLabel.S00}

    def test_worked_position(self, rng):
        st_ = apply_single(make_bell(BellLabel.PsiMinus, T(0), H(0)), pauli_unitary(PauliLabel.S01), H(0))
        for a in (1, 0, 1, 2):
            st_ = apply_single(st_, phase_unitary(a), T(0))
        outcome, _ = reverse_and_bell_measure(st_, T(0), H(0), [1, 0, 1, 2], rng)
        assert outcome is BellLabel.PhiMinus
        assert infer_pauli(BellLabel.PsiMinus, outcome) is PauliLabel.S01

    def test_refused_before_announcement(self):
        run = ProtocolRun(CFG)
        run.prepare()
        run.travel()
        run.encode()
        report = RunReport(CFG, "honest", run.initial_labels, run.angles, run.secret)
        run.final_check(report)
        with pytest.raises(ProtocolStateError):
            recover_secret(run, report.message_positions)


class TestPrecheck:
    def test_honest_all_match(self):
        for seed in range(20):
            report = run_scenario(ProtocolConfig(40, 8, 16, Variant.Improved, seed))
            assert len(report.prechecks) == 16
            assert all(r.verdict is Verdict.Match for r in report.prechecks)
            assert not report.detected
            assert report.recovery_accuracy == 1.0

    def test_m_zero_is_noop(self):
        cfg = ProtocolConfig(32, 8, 0, Variant.Improved, 7)
        run = ProtocolRun(cfg)
        run.prepare()
        run.travel()
        report = RunReport(cfg, "honest", run.initial_labels, run.angles, run.secret)
        assert improved_precheck(run, report) == []
        assert run_scenario(cfg).recovered_secret == run_scenario(ProtocolConfig(32, 8, seed=7)).recovered_secret

    def test_original_variant_refused(self):
        run = ProtocolRun(CFG)
        with pytest.raises(ProtocolStateError):
            improved_precheck(run, None)

    def test_selected_positions_consumed(self):
        report = run_scenario(ProtocolConfig(40, 8, 16, Variant.Improved, 3))
        assert not set(report.precheck_positions) & set(report.check_positions)
        assert not set(report.precheck_positions) & set(report.message_positions)
        assert len(report.message_positions) == 40 - 8 - 16

    def test_encoding_after_precheck(self):
        report = run_scenario(ProtocolConfig(40, 8, 4, Variant.Improved, 3))
        kinds = [m.kind for m in report.log]
        assert kinds.index("precheck_verdicts") < kinds.index("check_positions")
        h1 = [m for m in report.log if m.kind == "sequence" and m.payload == "H1"]
        assert h1[0].index > kinds.index("precheck_verdicts")


class TestRunScenario:
    def test_honest(self):
        report = run_scenario(CFG)
        assert not report.detected and report.mismatch_count == 0
        assert report.recovery_accuracy == 1.0
        assert report.adversary_secret is None

    def test_deterministic(self):
        a, b = run_scenario(CFG), run_scenario(CFG)
        assert a.initial_labels == b.initial_labels and a.alice_secret == b.alice_secret
        assert a.check_positions == b.check_positions and a.angles == b.angles
        assert [m.payload for m in a.log] == [m.payload for m in b.log]

    def test_seed_changes_run(self):
        other = run_scenario(ProtocolConfig(32, 8, seed=8))
        assert other.initial_labels != run_scenario(CFG).initial_labels


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**63 - 1), st.integers(2, 20), st.data())
def test_honest_completeness(seed, k, data):
    k1 = data.draw(st.integers(1, k - 1))
    report = run_scenario(ProtocolConfig(k, k1, seed=seed))
    assert report.mismatch_count == 0 and not report.detected
    assert report.recovery_accuracy == 1.0


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**63 - 1))
def test_precheck_soundness(seed):
    report = run_scenario(ProtocolConfig(24, 4, 10, Variant.Improved, seed))
    assert all(r.verdict is Verdict.Match for r in report.prechecks)


class TestTranscript:
    def test_reads_precede_use(self):
        report = run_scenario(ProtocolConfig(40, 8, 8, Variant.Improved, 5))
        by_index = {m.index: m for m in report.log}
        for reader, idx, clock in report.reads:
            msg = by_index[idx]
            assert idx < clock
            assert msg.to in ("all", reader) or msg.sender == reader
            assert msg.channel == "public"

    def test_order_of_step_five(self):
        report = run_scenario(CFG)
        kinds = [m.kind for m in report.log]
        first_angles = kinds.index("angles")
        assert kinds.index("check_positions") < first_angles < kinds.index("bell_outcomes")
        assert kinds.index("bell_outcomes") < kinds.index("check_verdicts") < kinds.index("initials")

    def test_green_saw_every_agent(self):
        report = run_scenario(CFG)
        senders = {m.sender for m in report.log if m.kind == "angles" and m.to == "Green"}
        assert senders == {a.value for a in AGENTS}

    def test_angle_privacy(self):
        report = run_scenario(ProtocolConfig(40, 8, 8, Variant.Improved, 5))
        published: dict[int, list[int]] = {}
        for m in report.log:
            if m.kind == "angles":
                agent = PartyId(m.sender)
                for p, ticks in m.payload.items():
                    assert report.angles[agent][p].ticks == ticks
                    published.setdefault(p, []).append(ticks)
        for p, ticks in published.items():
            assert compose_phase(ticks) == compose_phase(report.angles[a][p] for a in AGENTS)


class TestConsumed:
    def test_sequence_guard(self):
        seq = PhotonSequence.of("T", [T(0), T(1)])
        seq.consume(0)
        assert seq.live_positions() == [1]
        with pytest.raises(InternalInvariantError):
            seq.qubit(0)

    def test_world_guard(self):
        run = ProtocolRun(CFG)
        run.prepare()
        run.travel()
        run.encode()
        report = RunReport(CFG, "honest", run.initial_labels, run.angles, run.secret)
        run.final_check(report)
        p = report.check_positions[0]
        with pytest.raises(InternalInvariantError):
            run.world.apply(PartyId.Green, T(p), phase_unitary(1))

    def test_no_touching_foreign_photons(self):
        run = ProtocolRun(CFG)
        run.prepare()
        with pytest.raises(InternalInvariantError):
            run.world.apply(PartyId.Bob, T(0), phase_unitary(1))

    def test_no_state_exceeds_four_qubits(self):
        run = ProtocolRun(CFG)
        run.prepare()
        run.travel()
        assert max(s.n for s in run.world.states.values()) == 2
