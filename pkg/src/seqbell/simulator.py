"""Exact density-matrix simulation of J sequential Alices and K sequential Bobs.

The two ququarts start in a maximally entangled state, which factorizes into
one Bell pair on (A1, B1) and one on (A2, B2). Every party's POVM is a product
over its two qubits, so the state stays factorized and each pair is tracked as
its own 4x4 density matrix. Intermediate parties are averaged over settings and
summed over outcomes, which turns each of them into a fixed CPTP channel.

``reference=True`` switches to the unfactorized 16x16 ququart-ququart state and
full 4x4 Kraus operators, as a cross-check of the factorization.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import functools
import itertools
import os

import numpy as np

from . import matlin
from .errors import InvalidParam, NoViolation, PositionOutOfRange
from .matlin import I2, I4
from .measurements import (
    BITS,
    SideParameters,
    alice_povm,
    averaged_party_channel,
    bob_povm,
    luders_instrument,
)
from .witness import (
    BASELINE,
    LHV_BOUND,
    JointDistribution,
    WitnessValue,
    closed_form_S,
    witness_from_joint,
)

STATE_TOL = 1e-9
PHI_PLUS = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)


def worker_count() -> int:
    """Thread cap from SEQBELL_THREADS (default 1)."""
    raw = os.environ.get("SEQBELL_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise InvalidParam(f"SEQBELL_THREADS must be an integer, got {raw!r}") from None


@dataclass(frozen=True)
class PairState:
    rho: np.ndarray
    pair_index: int

    def __post_init__(self):
        if self.pair_index not in (1, 2):
            raise InvalidParam(f"pair_index must be 1 or 2, got {self.pair_index!r}")
        r = self.rho
        if r.shape != (4, 4):
            raise InvalidParam(f"pair state must be 4x4, got {r.shape}")
        if not matlin.is_psd(r, STATE_TOL):
            raise InvalidParam("pair state is not Hermitian PSD")
        if abs(matlin.trace(r) - 1) > STATE_TOL:
            raise InvalidParam(f"pair state has trace {matlin.trace(r):.6g}")

    def expect(self, op) -> float:
        return float(np.real(np.trace(op @ self.rho)))

    def correlator(self, a, b) -> float:
        return self.expect(matlin.kron(a, b))

    def purity(self) -> float:
        return float(np.real(np.trace(self.rho @ self.rho)))


@dataclass(frozen=True)
class ScenarioConfig:
    J: int
    K: int
    alice: SideParameters
    bob: SideParameters
    visibility: float = 1.0

    def __post_init__(self):
        if self.J < 1 or self.K < 1:
            raise InvalidParam("J and K must be >= 1")
        if self.alice.n < self.J:
            raise InvalidParam(f"alice side has {self.alice.n} gammas, needs {self.J}")
        if self.bob.n < self.K:
            raise InvalidParam(f"bob side has {self.bob.n} gammas, needs {self.K}")
        if not 0 <= self.visibility <= 1:
            raise InvalidParam(f"visibility must lie in [0, 1], got {self.visibility!r}")

    @classmethod
    def symmetric(cls, J, K, epsilon, theta, visibility=1.0):
        n = max(J, K)
        side = SideParameters.from_protocol(epsilon, theta, n)
        return cls(J, K, side, side, visibility)

    def check_pair(self, j, k):
        if not 1 <= j <= self.J:
            raise PositionOutOfRange(f"j={j} outside 1..{self.J}")
        if not 1 <= k <= self.K:
            raise PositionOutOfRange(f"k={k} outside 1..{self.K}")


def initial_state():
    rho = np.outer(PHI_PLUS, PHI_PLUS.conj())
    return PairState(rho, 1), PairState(rho.copy(), 2)


def apply_visibility(state: PairState, v: float) -> PairState:
    if not 0 <= v <= 1:
        raise InvalidParam(f"visibility must lie in [0, 1], got {v!r}")
    return PairState(v * state.rho + (1 - v) * I4 / 4, state.pair_index)


@functools.lru_cache(maxsize=512)
def _instrument(role, position, alice, bob):
    povm = alice_povm(position, alice, bob) if role == "alice" else bob_povm(position, alice, bob)
    return povm, luders_instrument(povm)


def intermediate_channels(config: ScenarioConfig, j: int, k: int, pair: int, order="alice-first"):
    """Channels of Alice^(1..j-1) and Bob^(1..k-1) on one pair, in application order."""
    a = [averaged_party_channel(_instrument("alice", g, config.alice, config.bob)[1], pair) for g in range(1, j)]
    b = [averaged_party_channel(_instrument("bob", h, config.alice, config.bob)[1], pair) for h in range(1, k)]
    if order == "alice-first":
        return a + b
    if order == "bob-first":
        return b + a
    if order == "interleaved":
        out = []
        for x, y in itertools.zip_longest(a, b):
            out.extend(c for c in (x, y) if c is not None)
        return out
    raise InvalidParam(f"unknown order {order!r}")


def evolve_to_pair(config: ScenarioConfig, j: int, k: int, order="alice-first"):
    """Pair states seen by Alice^(j) and Bob^(k) after all earlier parties acted."""
    config.check_pair(j, k)
    out = []
    for state in initial_state():
        rho = apply_visibility(state, config.visibility).rho
        for ch in intermediate_channels(config, j, k, state.pair_index, order):
            rho = ch(rho)
        out.append(PairState(0.5 * (rho + matlin.dagger(rho)), state.pair_index))
    return tuple(out)


def pair_table(state: PairState, alice_factor, bob_factor):
    """Born-rule table [setting_a, setting_b, outcome_a, outcome_b] on one pair."""
    T = np.zeros((2, 2, 2, 2))
    for sa, sb, oa, ob in itertools.product(BITS, repeat=4):
        E = matlin.kron(alice_factor[(sa, oa)].matrix, bob_factor[(sb, ob)].matrix)
        T[sa, sb, oa, ob] = state.expect(E)
    return np.clip(T, 0.0, 1.0)


def joint_distribution(config: ScenarioConfig, j: int, k: int, reference: bool = False) -> JointDistribution:
    if reference:
        return _reference_joint(config, j, k)
    rho1, rho2 = evolve_to_pair(config, j, k)
    A = _instrument("alice", j, config.alice, config.bob)[0]
    B = _instrument("bob", k, config.alice, config.bob)[0]
    t1 = pair_table(rho1, A.factors[0], B.factors[0])
    t2 = pair_table(rho2, A.factors[1], B.factors[1])
    return JointDistribution.from_pair_tables(t1, t2)


def simulate_S(config: ScenarioConfig, j: int, k: int, reference: bool = False) -> WitnessValue:
    return witness_from_joint(joint_distribution(config, j, k, reference))


# 16x16 reference path, qubit order (A1, A2, B1, B2); ququart index i = 2*x1 + x2


def reference_initial_state(visibility=1.0):
    psi = np.zeros(16, dtype=complex)
    for i in range(4):
        psi[4 * i + i] = 1.0
    psi /= np.linalg.norm(psi)
    rho = np.outer(psi, psi.conj())
    return visibility * rho + (1 - visibility) * np.eye(16) / 16


def _reference_channel(rho, instr, side):
    out = np.zeros_like(rho)
    for (m, n, p, q), K in instr.kraus.items():
        full = matlin.kron(K, I4) if side == "alice" else matlin.kron(I4, K)
        out += 0.25 * full @ rho @ matlin.dagger(full)
    return out


def reference_evolve(config: ScenarioConfig, j: int, k: int):
    config.check_pair(j, k)
    rho = reference_initial_state(config.visibility)
    for g in range(1, j):
        rho = _reference_channel(rho, _instrument("alice", g, config.alice, config.bob)[1], "alice")
    for h in range(1, k):
        rho = _reference_channel(rho, _instrument("bob", h, config.alice, config.bob)[1], "bob")
    return rho


def _reference_joint(config, j, k):
    rho = reference_evolve(config, j, k)
    A = _instrument("alice", j, config.alice, config.bob)[0]
    B = _instrument("bob", k, config.alice, config.bob)[0]
    P = np.zeros((2,) * 8)
    for (m, n, p, q), Ea in A.effects.items():
        for (mp, np_, pp, qq), Eb in B.effects.items():
            P[m, n, mp, np_, p, q, pp, qq] = np.real(np.trace(matlin.kron(Ea, Eb) @ rho))
    return JointDistribution(np.clip(P, 0.0, 1.0))


def reduce_to_pairs(rho16):
    """Partial traces of a 16x16 (A1, A2, B1, B2) state onto (A1, B1) and (A2, B2)."""
    t = rho16.reshape([2] * 8)  # a1 a2 b1 b2, a1' a2' b1' b2'
    r1 = np.einsum("apbqcpdq->abcd", t).reshape(4, 4)
    r2 = np.einsum("paqbpcqd->abcd", t).reshape(4, 4)
    return r1, r2


@dataclass(frozen=True)
class ComparisonRow:
    j: int
    k: int
    closed_form: float
    simulated: float
    pair1_delta: float
    pair2_delta: float
    status: str  # "forced" where agreement is provable, "open" otherwise

    @property
    def delta(self) -> float:
        return self.simulated - self.closed_form


@dataclass(frozen=True)
class ComparisonReport:
    J: int
    K: int
    rows: tuple = field(repr=False)

    @property
    def max_abs_deviation(self) -> float:
        return max(abs(r.delta) for r in self.rows)

    def row(self, j, k) -> ComparisonRow:
        for r in self.rows:
            if (r.j, r.k) == (j, k):
                return r
        raise PositionOutOfRange(f"no row for ({j}, {k})")


def compare_closed_form(config: ScenarioConfig, reference: bool = False) -> ComparisonReport:
    cells = [(j, k) for k in range(1, config.K + 1) for j in range(1, config.J + 1)]

    def one(cell):
        j, k = cell
        cf = closed_form_S(j, k, config.alice, config.bob)
        if config.visibility != 1.0:
            v = config.visibility
            cf = WitnessValue(BASELINE + v * (cf.S - BASELINE), v * cf.pair1_term, v * cf.pair2_term)
        sim = simulate_S(config, j, k, reference)
        status = "forced" if (j, k) == (1, 1) else "open"
        return ComparisonRow(
            j, k, cf.S, sim.S, sim.pair1_term - cf.pair1_term, sim.pair2_term - cf.pair2_term, status
        )

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        rows = tuple(pool.map(one, cells))
    return ComparisonReport(config.J, config.K, rows)


def min_closed_form(config: ScenarioConfig):
    """(S_min, (j, k)) over the grid at unit visibility; first minimum in (k, j) order."""
    best = None
    for k in range(1, config.K + 1):
        for j in range(1, config.J + 1):
            s = closed_form_S(j, k, config.alice, config.bob).S
            if best is None or s < best[0]:
                best = (s, (j, k))
    return best


def visibility_threshold(s_min: float, tol: float = 1e-12) -> float:
    """Root of 64 + v (s_min - 64) = 96 on [0, 1], by bisection."""
    if s_min <= LHV_BOUND:
        raise NoViolation(f"minimum S is {s_min:.6f} <= {LHV_BOUND}")
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if BASELINE + mid * (s_min - BASELINE) > LHV_BOUND:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def critical_visibility(config: ScenarioConfig, tol: float = 1e-12) -> float:
    """Smallest visibility at which every pair still exceeds the local bound.

    Correlator terms scale linearly, S(v) = 64 + v (S(1) - 64), so only the
    weakest closed-form pair matters.
    """
    s_min, _ = min_closed_form(config)
    return visibility_threshold(s_min, tol)


# Monte Carlo cross-check


def _batched_measure(rho, kraus, settings, rng):
    """Sample one Lüders measurement per trajectory; kraus[s][o] are 4x4 arrays."""
    K = np.stack([np.stack([kraus[s][o] for o in BITS]) for s in BITS])  # [s, o, 4, 4]
    K0 = K[settings, 0]
    post0 = K0 @ rho @ np.conj(np.swapaxes(K0, -1, -2))
    p0 = np.clip(np.real(np.einsum("nii->n", post0)), 0.0, 1.0)
    outcome = (rng.random(len(settings)) >= p0).astype(int)
    Ko = K[settings, outcome]
    post = Ko @ rho @ np.conj(np.swapaxes(Ko, -1, -2))
    norm = np.real(np.einsum("nii->n", post))
    return post / norm[:, None, None], outcome


def _embedded_factor_kraus(instr, qubit, side):
    f = instr.factor_kraus[qubit - 1]
    emb = (lambda k: matlin.kron(k, I2)) if side == "alice" else (lambda k: matlin.kron(I2, k))
    return {s: {o: emb(f[(s, o)]) for o in BITS} for s in BITS}


def sample_counts(config: ScenarioConfig, j: int, k: int, shots: int, seed: int):
    """Simulate ``shots`` full runs with random settings; returns counts[m, n, m', n', p, q, p', q'].

    Every party draws uniform settings. Each pair is sampled on its own,
    which is exact because all effects are products over the two pairs.
    """
    config.check_pair(j, k)
    rng = np.random.default_rng(seed)
    settings = rng.integers(0, 2, size=(4, shots))  # m, n, m', n' of the target parties
    results = []
    for pair in (1, 2):
        rho0 = apply_visibility(initial_state()[pair - 1], config.visibility).rho
        rho = np.broadcast_to(rho0, (shots, 4, 4)).copy()
        for g in range(1, j):
            instr = _instrument("alice", g, config.alice, config.bob)[1]
            s = rng.integers(0, 2, size=shots)
            rho, _ = _batched_measure(rho, _embedded_factor_kraus(instr, pair, "alice"), s, rng)
        for h in range(1, k):
            instr = _instrument("bob", h, config.alice, config.bob)[1]
            s = rng.integers(0, 2, size=shots)
            rho, _ = _batched_measure(rho, _embedded_factor_kraus(instr, pair, "bob"), s, rng)
        a_instr = _instrument("alice", j, config.alice, config.bob)[1]
        b_instr = _instrument("bob", k, config.alice, config.bob)[1]
        sa = settings[0] if pair == 1 else settings[1]
        sb = settings[2] if pair == 1 else settings[3]
        rho, oa = _batched_measure(rho, _embedded_factor_kraus(a_instr, pair, "alice"), sa, rng)
        rho, ob = _batched_measure(rho, _embedded_factor_kraus(b_instr, pair, "bob"), sb, rng)
        results.append((oa, ob))
    (p, pp), (q, qq) = results
    counts = np.zeros((2,) * 8, dtype=np.int64)
    np.add.at(counts, (settings[0], settings[1], settings[2], settings[3], p, q, pp, qq), 1)
    return counts


def empirical_distribution(counts):
    """Per-setting-block frequencies and the block sizes they were computed from."""
    n = counts.sum(axis=(4, 5, 6, 7), keepdims=True)
    if np.any(n == 0):
        raise InvalidParam("some setting block was never sampled; increase shots")
    return counts / n, n
