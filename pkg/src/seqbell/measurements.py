"""Product POVMs for the sequential Alices and Bobs, and their Lüders instruments.

Each party holds a ququart viewed as two qubits. A setting is a pair of bits
``(m, n)`` and an outcome a pair of bits ``(p, q)``; the effect for
``(m, n, p, q)`` is a tensor product of a qubit-1 effect labelled by ``(m, p)``
and a qubit-2 effect labelled by ``(n, q)``.

Alice's qubit 1 is unsharp (sharpness gamma_j from her own side); her qubit 2 is
projective at the other side's angle. Bob mirrors this: projective on qubit 1 at
Alice's side angle, unsharp on qubit 2.
"""

from dataclasses import dataclass, field
import itertools
import math

import numpy as np

from . import matlin
from .errors import InvalidParam, PositionOutOfRange
from .gammaseq import gamma_sequence
from .matlin import I2, I4, SX, SZ

ALICE = "alice"
BOB = "bob"
ROLES = (ALICE, BOB)

BITS = (0, 1)
LABELS = tuple(itertools.product(BITS, repeat=4))  # (m, n, p, q)
POVM_TOL = 1e-9
KRAUS_TOL = 1e-8


@dataclass(frozen=True)
class SideParameters:
    """One side's knobs: slack epsilon, angle theta, and the sharpnesses gamma_1..gamma_N.

    Side 1 feeds Alice's unsharp qubit and Bob's sharp qubit-1 angle; side 2
    feeds Bob's unsharp qubit and Alice's sharp qubit-2 angle.
    """

    epsilon: float
    theta: float
    gammas: tuple

    def __post_init__(self):
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise InvalidParam(f"epsilon must be > 0, got {self.epsilon!r}")
        if not (0 < self.theta < math.pi / 2):
            raise InvalidParam(f"theta must lie in (0, pi/2), got {self.theta!r}")
        for i, g in enumerate(self.gammas, start=1):
            if not (0 < g <= 1):
                raise InvalidParam(f"gamma_{i} = {g!r} lies outside (0, 1]")

    @classmethod
    def from_protocol(cls, epsilon: float, theta: float, n: int) -> "SideParameters":
        """Build the side from the sharpness recursion; every gamma must be feasible."""
        seq = gamma_sequence(epsilon, theta, n)
        if not seq.is_fully_feasible():
            raise InvalidParam(
                f"gamma_{seq.first_infeasible_index()} is infeasible "
                f"for epsilon={epsilon}, theta={theta}"
            )
        return cls(epsilon, theta, seq.feasible)

    @property
    def n(self) -> int:
        return len(self.gammas)

    def gamma(self, position: int) -> float:
        if not 1 <= position <= len(self.gammas):
            raise PositionOutOfRange(f"position {position} outside 1..{len(self.gammas)}")
        return self.gammas[position - 1]


@dataclass(frozen=True)
class QubitEffect:
    matrix: np.ndarray
    outcome: int
    setting: int

    def __post_init__(self):
        m = self.matrix
        if m.shape != (2, 2):
            raise InvalidParam(f"qubit effect must be 2x2, got {m.shape}")
        if not (matlin.is_psd(m, POVM_TOL) and matlin.is_psd(I2 - m, POVM_TOL)):
            raise InvalidParam("qubit effect is not between 0 and the identity")


def _bit(x, name):
    if x not in BITS:
        raise InvalidParam(f"{name} must be 0 or 1, got {x!r}")


def _check_gamma(g):
    if not (0 < g <= 1):
        raise InvalidParam(f"sharpness must lie in (0, 1], got {g!r}")


def _check_theta(t):
    if not (0 < t < math.pi / 2):
        raise InvalidParam(f"angle must lie in (0, pi/2), got {t!r}")


def _unsharp(outcome, setting, gamma):
    # setting 0: sharp sigma_z; setting 1: sigma_x with sharpness gamma
    sign = 1 - 2 * outcome
    return 0.5 * (I2 + (1 - setting) * sign * SZ + setting * sign * gamma * SX)


def _tilted(outcome, setting, theta):
    # projector along ((1 - 2|setting - outcome|) sin theta, 0, (1 - 2 outcome) cos theta)
    return 0.5 * (
        I2
        + (1 - 2 * outcome) * math.cos(theta) * SZ
        + (1 - 2 * abs(setting - outcome)) * math.sin(theta) * SX
    )


def alice_a1_effect(p: int, m: int, gamma_j: float) -> QubitEffect:
    _bit(p, "p"), _bit(m, "m"), _check_gamma(gamma_j)
    return QubitEffect(_unsharp(p, m, gamma_j), p, m)


def alice_a2_effect(q: int, n: int, theta2: float) -> QubitEffect:
    _bit(q, "q"), _bit(n, "n"), _check_theta(theta2)
    return QubitEffect(_tilted(q, n, theta2), q, n)


def bob_b1_effect(p: int, m: int, theta1: float) -> QubitEffect:
    _bit(p, "p"), _bit(m, "m"), _check_theta(theta1)
    return QubitEffect(_tilted(p, m, theta1), p, m)


def bob_b2_effect(q: int, n: int, gamma_k: float) -> QubitEffect:
    _bit(q, "q"), _bit(n, "n"), _check_gamma(gamma_k)
    return QubitEffect(_unsharp(q, n, gamma_k), q, n)


@dataclass(frozen=True)
class ProductPovm:
    """16 effects keyed by ``(m, n, p, q)``; ``factors[i][(setting, outcome)]`` is qubit i+1's effect."""

    role: str
    position: int
    effects: dict
    factors: tuple = field(repr=False)

    def __post_init__(self):
        if self.role not in ROLES:
            raise InvalidParam(f"unknown role {self.role!r}")
        for m, n in itertools.product(BITS, BITS):
            total = sum(self.effects[(m, n, p, q)] for p, q in itertools.product(BITS, BITS))
            if np.max(np.abs(total - I4)) > POVM_TOL:
                raise InvalidParam(f"effects for setting ({m},{n}) do not sum to identity")
        for label, e in self.effects.items():
            if not matlin.is_psd(e, POVM_TOL):
                raise InvalidParam(f"effect {label} is not PSD")

    def effect(self, m, n, p, q):
        return self.effects[(m, n, p, q)]

    def qubit_effect(self, qubit: int, setting: int, outcome: int):
        return self.factors[qubit - 1][(setting, outcome)].matrix


def build_party_povm(role: str, position: int, params: SideParameters, other_theta: float) -> ProductPovm:
    """POVM of Alice^(position) or Bob^(position).

    ``params`` is the party's own side (supplying its gamma); ``other_theta`` is
    the angle of the opposite side, used on the party's sharp qubit.
    """
    if role not in ROLES:
        raise InvalidParam(f"unknown role {role!r}")
    gamma = params.gamma(position)
    _check_theta(other_theta)
    if role == ALICE:
        f1 = {(m, p): alice_a1_effect(p, m, gamma) for m in BITS for p in BITS}
        f2 = {(n, q): alice_a2_effect(q, n, other_theta) for n in BITS for q in BITS}
    else:
        f1 = {(m, p): bob_b1_effect(p, m, other_theta) for m in BITS for p in BITS}
        f2 = {(n, q): bob_b2_effect(q, n, gamma) for n in BITS for q in BITS}
    effects = {
        (m, n, p, q): matlin.kron(f1[(m, p)].matrix, f2[(n, q)].matrix) for m, n, p, q in LABELS
    }
    return ProductPovm(role, position, effects, (f1, f2))


def alice_povm(j: int, alice: SideParameters, bob: SideParameters) -> ProductPovm:
    return build_party_povm(ALICE, j, alice, bob.theta)


def bob_povm(k: int, alice: SideParameters, bob: SideParameters) -> ProductPovm:
    return build_party_povm(BOB, k, bob, alice.theta)


@dataclass(frozen=True)
class Instrument:
    """Square-root Kraus operators of a ProductPovm, whole and per qubit."""

    role: str
    position: int
    kraus: dict
    factor_kraus: tuple = field(repr=False)  # per qubit: {(setting, outcome): 2x2}

    def completeness_residual(self) -> float:
        worst = 0.0
        for m, n in itertools.product(BITS, BITS):
            total = sum(
                matlin.dagger(k) @ k
                for (mm, nn, _, _), k in self.kraus.items()
                if (mm, nn) == (m, n)
            )
            worst = max(worst, float(np.max(np.abs(total - I4))))
        return worst


def luders_instrument(povm: ProductPovm) -> Instrument:
    kraus = {label: matlin.sqrt_psd(e, POVM_TOL) for label, e in povm.effects.items()}
    factor_kraus = tuple(
        {key: matlin.sqrt_psd(eff.matrix, POVM_TOL) for key, eff in f.items()} for f in povm.factors
    )
    instr = Instrument(povm.role, povm.position, kraus, factor_kraus)
    res = instr.completeness_residual()
    if res > KRAUS_TOL:
        raise InvalidParam(f"Kraus completeness residual {res:.3e} exceeds {KRAUS_TOL:.0e}")
    return instr


@dataclass(frozen=True)
class PairChannel:
    """CPTP map on a 4x4 pair state (party's qubit first for Alice, second for Bob)."""

    kraus: tuple
    role: str
    pair: int

    def __call__(self, rho):
        return sum(k @ rho @ matlin.dagger(k) for k in self.kraus)

    def adjoint(self, op):
        return sum(matlin.dagger(k) @ op @ k for k in self.kraus)

    def trace_preservation_residual(self) -> float:
        return float(np.max(np.abs(sum(matlin.dagger(k) @ k for k in self.kraus) - I4)))

    def unitality_residual(self) -> float:
        return float(np.max(np.abs(sum(k @ matlin.dagger(k) for k in self.kraus) - I4)))


def averaged_party_channel(instr: Instrument, pair: int) -> PairChannel:
    """Outcome-summed channel of one party on one pair, settings drawn uniformly.

    rho -> 1/2 sum_{s,o} k_{s,o} rho k_{s,o}^dagger, with k the party's qubit factor
    for that pair, embedded next to an identity on the partner's qubit.
    """
    if pair not in (1, 2):
        raise InvalidParam(f"pair must be 1 or 2, got {pair!r}")
    factors = instr.factor_kraus[pair - 1]
    w = math.sqrt(0.5)
    if instr.role == ALICE:
        ops = tuple(w * matlin.kron(k, I2) for _, k in sorted(factors.items()))
    else:
        ops = tuple(w * matlin.kron(I2, k) for _, k in sorted(factors.items()))
    return PairChannel(ops, instr.role, pair)


def qubit_channel(instr: Instrument, qubit: int):
    """The same averaged channel as a 2x2 Kraus list acting on the bare qubit."""
    w = math.sqrt(0.5)
    return tuple(w * k for _, k in sorted(instr.factor_kraus[qubit - 1].items()))
