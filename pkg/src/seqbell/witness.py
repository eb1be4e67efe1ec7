"""The 128-term Bell witness: closed form, evaluation from joint statistics, local bound."""

from dataclasses import dataclass
import itertools
import math

import numpy as np

from .errors import InvalidDistribution, InvalidParam, PositionOutOfRange
from .gammaseq import sharp_product
from .measurements import BITS, SideParameters

LHV_BOUND = 96.0
BASELINE = 64.0
N_TERMS = 128
PAIR_OFFSET = 32.0  # the 64 terms of one pair at probability 1/2 each
DIST_TOL = 1e-9
ZERO_CONDITION = 1e-15


@dataclass(frozen=True)
class ObservableLabel:
    """One witness term: qubit ``i``, own settings ``r, s``, and the other-qubit bookkeeping bits."""

    i: int
    r: int
    s: int
    t: int  # Alice's other-qubit outcome
    u: int  # Bob's other-qubit outcome
    v: int  # Alice's other-qubit setting
    w: int  # Bob's other-qubit setting


def witness_labels():
    for i in (1, 2):
        for r, s, t, u, v, w in itertools.product(BITS, repeat=6):
            yield ObservableLabel(i, r, s, t, u, v, w)


@dataclass(frozen=True)
class WitnessValue:
    S: float
    pair1_term: float
    pair2_term: float
    baseline: float = BASELINE

    def __post_init__(self):
        if abs(self.S - (self.pair1_term + self.pair2_term + self.baseline)) > 1e-9:
            raise InvalidParam("witness decomposition does not add up")

    @property
    def violation(self) -> float:
        return self.S - LHV_BOUND

    @property
    def violates(self) -> bool:
        return self.S > LHV_BOUND


def pair_bracket(position: int, side: SideParameters) -> float:
    """2**(5-j) [gamma_j sin theta + cos theta prod_{g<j} (1 + sqrt(1 - gamma_g**2))]."""
    g = side.gamma(position)
    prefix = side.gammas[: position - 1]
    return 2.0 ** (5 - position) * (
        g * math.sin(side.theta) + math.cos(side.theta) * sharp_product(prefix)
    )


def closed_form_S(j: int, k: int, alice: SideParameters, bob: SideParameters) -> WitnessValue:
    for name, pos, side in (("j", j, alice), ("k", k, bob)):
        if not 1 <= pos <= side.n:
            raise PositionOutOfRange(f"{name}={pos} outside 1..{side.n}")
    b1 = pair_bracket(j, alice)
    b2 = pair_bracket(k, bob)
    return WitnessValue(b1 + b2 + BASELINE, b1, b2)


def closed_form_table(alice: SideParameters, bob: SideParameters, J=None, K=None):
    """Rows are Bobs, columns Alices: ``table[k-1][j-1] = S(j, k)``."""
    J = alice.n if J is None else J
    K = bob.n if K is None else K
    return [[closed_form_S(j, k, alice, bob).S for j in range(1, J + 1)] for k in range(1, K + 1)]


def lhv_bound() -> float:
    return LHV_BOUND


def chsh_prob_score(a, b) -> int:
    """Number of the four CHSH clauses a_r xor b_s == r*s won by a deterministic strategy."""
    return sum((a[r] ^ b[s]) == (r & s) for r in BITS for s in BITS)


def chsh_prob_lhv_max() -> int:
    return max(
        chsh_prob_score((a0, a1), (b0, b1))
        for a0, a1, b0, b1 in itertools.product(BITS, repeat=4)
    )


@dataclass(frozen=True)
class JointDistribution:
    """P(p, q, p', q' | m, n, m', n') stored as ``probs[m, n, m', n', p, q, p', q']``."""

    probs: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.probs, dtype=float)
        if P.shape != (2,) * 8:
            raise InvalidDistribution(f"expected shape (2,)*8, got {P.shape}")
        if not np.all(np.isfinite(P)):
            raise InvalidDistribution("non-finite probabilities")
        if P.min() < -1e-12 or P.max() > 1 + 1e-12:
            raise InvalidDistribution("probabilities outside [0, 1]")
        sums = P.sum(axis=(4, 5, 6, 7))
        if np.max(np.abs(sums - 1)) > DIST_TOL:
            raise InvalidDistribution(f"setting blocks not normalized (max error {np.max(np.abs(sums - 1)):.2e})")
        object.__setattr__(self, "probs", P)

    def block(self, m, n, mp, np_):
        """Outcome table [p, q, p', q'] for one setting combination."""
        return self.probs[m, n, mp, np_]

    @classmethod
    def from_pair_tables(cls, pair1, pair2):
        """Product form from per-pair tables ``pair1[m, m', p, p']`` and ``pair2[n, n', q, q']``."""
        P = np.einsum("acxy,bdzw->abcdxzyw", pair1, pair2)
        return cls(P)


def _term(dist: JointDistribution, lab: ObservableLabel, conditional: bool) -> float:
    if lab.i == 1:
        blk = dist.block(lab.r, lab.v, lab.s, lab.w)  # [p, q, p', q']
        cond = blk[:, lab.t, :, lab.u]
        fallback = blk.sum(axis=(1, 3))
    else:
        blk = dist.block(lab.v, lab.r, lab.w, lab.s)
        cond = blk[lab.t, :, lab.u, :]  # [q, q']
        fallback = blk.sum(axis=(0, 2))
    z = cond.sum()
    table = cond / z if conditional and z > ZERO_CONDITION else fallback
    target = lab.r & lab.s
    return float(sum(table[a, b] for a in BITS for b in BITS if a ^ b == target))


def witness_terms(dist: JointDistribution, conditional: bool = True):
    """All 128 terms as ``{ObservableLabel: probability}``."""
    return {lab: _term(dist, lab, conditional) for lab in witness_labels()}


def witness_from_joint(dist: JointDistribution, conditional: bool = True) -> WitnessValue:
    """Sum of the 128 CHSH-type probabilities.

    With ``conditional=True`` each term is conditioned on the two parties'
    other-qubit outcomes ``(t, u)``, falling back to the unconditioned value when
    that event has zero probability. For product statistics, as produced by the
    simulator, conditioning changes nothing. For general local mixtures it acts
    as outcome post-selection and can push the sum above 96; the unconditioned
    reading (``conditional=False``) respects the local bound for every local
    model.
    """
    terms = witness_terms(dist, conditional)
    s1 = sum(v for lab, v in terms.items() if lab.i == 1)
    s2 = sum(v for lab, v in terms.items() if lab.i == 2)
    return WitnessValue(s1 + s2, s1 - PAIR_OFFSET, s2 - PAIR_OFFSET)


def deterministic_joint(alice_fn, bob_fn) -> JointDistribution:
    """Joint distribution of a deterministic local strategy.

    ``alice_fn(m, n) -> (p, q)`` and ``bob_fn(m', n') -> (p', q')``.
    """
    P = np.zeros((2,) * 8)
    for m, n, mp, np_ in itertools.product(BITS, repeat=4):
        p, q = alice_fn(m, n)
        pp, qq = bob_fn(mp, np_)
        P[m, n, mp, np_, p, q, pp, qq] = 1.0
    return JointDistribution(P)


def mix(dists, weights) -> JointDistribution:
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    return JointDistribution(sum(wi * d.probs for wi, d in zip(w, dists)))

