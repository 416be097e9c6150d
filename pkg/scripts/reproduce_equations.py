"""Print the worked swap expansion and run every state-level identity check."""

from bellqss.algebra import compose_phase
from bellqss.equations import (
    HAND_EXPANSION,
    WORKED_ANGLES,
    WORKED_INITIAL,
    WORKED_PAULI,
    attack_joint_state,
    hand_sign_agreement,
    verify_equations,
)
from bellqss.quantum import bell_decompose
from bellqss.quantum import Hp, T


def main():
    joint = attack_joint_state(WORKED_INITIAL, WORKED_PAULI, WORKED_ANGLES)
    ticks = compose_phase(WORKED_ANGLES).ticks
    print(f"initial {WORKED_INITIAL.value}, Pauli {WORKED_PAULI.value}, compound angle {ticks} * 2pi/3")
    signs = hand_sign_agreement()
    for outcome, (coef, _) in bell_decompose(joint, T(0), Hp(0)).items():
        _, label = HAND_EXPANSION[outcome]
        note = "" if signs[outcome] else "  (relative sign differs from the hand expansion)"
        print(f"  {outcome.value:5} amplitude {coef.real:+.4f}{coef.imag:+.4f}j  leaves U|{label.value}>{note}")
    print()
    ok = True
    for check in verify_equations():
        print(f"{'PASS' if check.passed else 'FAIL'}  {check.name:<20} {check.detail}  ({check.seconds:.3f}s)")
        ok &= check.passed
    return 0 if ok else 2


if __name__ == "__main__":
    raise SystemExit(main())
