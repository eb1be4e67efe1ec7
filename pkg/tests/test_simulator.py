import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from seqbell import matlin
from seqbell.errors import InvalidParam, NoViolation, PositionOutOfRange
from seqbell.matlin import I2, SX, SY, SZ
from seqbell.measurements import SideParameters
from seqbell.simulator import (
    ScenarioConfig,
    apply_visibility,
    compare_closed_form,
    critical_visibility,
    empirical_distribution,
    evolve_to_pair,
    initial_state,
    joint_distribution,
    reduce_to_pairs,
    reference_evolve,
    sample_counts,
    simulate_S,
    visibility_threshold,
)
from seqbell.witness import closed_form_S

THETA_22 = math.pi / 4 - 0.2999
THETA_33 = math.pi / 4 - 0.6219


@pytest.fixture(scope="module")
def cfg22():
    return ScenarioConfig.symmetric(2, 2, 0.5577, THETA_22)


@pytest.fixture(scope="module")
def cfg33():
    return ScenarioConfig.symmetric(3, 3, 0.27665, THETA_33)


def tsirelson_config():
    s = SideParameters(0.1, math.pi / 4, (1.0,))
    return ScenarioConfig(1, 1, s, s)


def random_config(rng, J=3, K=3):
    def side(n):
        return SideParameters(
            rng.uniform(0.01, 1.0), rng.uniform(0.05, math.pi / 2 - 0.05), tuple(rng.uniform(0.01, 1.0, n))
        )
    return ScenarioConfig(J, K, side(J), side(K))


# states


def test_initial_state_correlators():
    for st_ in initial_state():
        assert st_.correlator(SZ, SZ) == pytest.approx(1)
        assert st_.correlator(SX, SX) == pytest.approx(1)
        assert st_.correlator(SY, SY) == pytest.approx(-1)
        assert matlin.trace(st_.rho) == pytest.approx(1)
        assert st_.purity() == pytest.approx(1)
        r1, _ = reduce_single(st_.rho)
        assert np.allclose(r1, I2 / 2)


def reduce_single(rho):
    t = rho.reshape(2, 2, 2, 2)
    return np.einsum("ajbj->ab", t), np.einsum("iaib->ab", t)


def test_visibility_map():
    s = initial_state()[0]
    assert np.allclose(apply_visibility(s, 1.0).rho, s.rho)
    assert np.allclose(apply_visibility(s, 0.0).rho, np.eye(4) / 4)
    assert apply_visibility(s, 0.7).correlator(SX, SX) == pytest.approx(0.7)
    with pytest.raises(InvalidParam):
        apply_visibility(s, 1.2)


def test_first_pair_sees_initial_state(cfg22):
    for st_, init in zip(evolve_to_pair(cfg22, 1, 1), initial_state()):
        assert np.allclose(st_.rho, init.rho)


def test_one_intermediate_alice_on_pair1(cfg22):
    g1 = cfg22.alice.gammas[0]
    p1, _ = evolve_to_pair(cfg22, 2, 1)
    assert p1.correlator(SZ, SZ) == pytest.approx(0.5 * (1 + math.sqrt(1 - g1**2)), abs=1e-12)
    assert p1.correlator(SX, SX) == pytest.approx(0.5, abs=1e-12)


def test_one_intermediate_bob_on_pair1(cfg22):
    th = cfg22.alice.theta
    p1, _ = evolve_to_pair(cfg22, 1, 2)
    assert p1.correlator(SZ, SZ) == pytest.approx(math.cos(th) ** 2, abs=1e-12)
    assert p1.correlator(SX, SX) == pytest.approx(math.sin(th) ** 2, abs=1e-12)


def test_one_intermediate_alice_on_pair2(cfg22):
    # Alice's sharp qubit-2 measurement disturbs pair 2 the same way
    th = cfg22.bob.theta
    _, p2 = evolve_to_pair(cfg22, 2, 1)
    assert p2.correlator(SZ, SZ) == pytest.approx(math.cos(th) ** 2, abs=1e-12)
    assert p2.correlator(SX, SX) == pytest.approx(math.sin(th) ** 2, abs=1e-12)


def test_state_validity_after_long_chains():
    rng = np.random.default_rng(2)
    cfg = random_config(rng, 5, 5)
    for st_ in evolve_to_pair(cfg, 5, 5):
        assert matlin.is_psd(st_.rho, 1e-9)
        assert abs(matlin.trace(st_.rho) - 1) < 1e-9


def test_out_of_range(cfg22):
    with pytest.raises(PositionOutOfRange):
        evolve_to_pair(cfg22, 3, 1)


def test_config_needs_enough_gammas():
    s = SideParameters(0.1, 0.5, (0.3,))
    with pytest.raises(InvalidParam):
        ScenarioConfig(2, 1, s, s)


# factorization and ordering


def test_reference_path_state_matches(cfg33):
    for j, k in [(1, 1), (2, 3), (3, 2), (3, 3)]:
        r1, r2 = reduce_to_pairs(reference_evolve(cfg33, j, k))
        p1, p2 = evolve_to_pair(cfg33, j, k)
        assert np.max(np.abs(r1 - p1.rho)) < 1e-12
        assert np.max(np.abs(r2 - p2.rho)) < 1e-12


def test_reference_path_distribution_matches():
    rng = np.random.default_rng(8)
    for _ in range(3):
        cfg = random_config(rng, 2, 3)
        for j, k in [(1, 1), (2, 2), (2, 3)]:
            a = joint_distribution(cfg, j, k).probs
            b = joint_distribution(cfg, j, k, reference=True).probs
            assert np.max(np.abs(a - b)) < 1e-12


def test_reference_state_is_product_of_bell_pairs():
    rho = reference_evolve(tsirelson_config(), 1, 1)
    phi = initial_state()[0].rho
    # reorder (A1, A2, B1, B2) -> (A1, B1, A2, B2)
    t = rho.reshape([2] * 8).transpose(0, 2, 1, 3, 4, 6, 5, 7).reshape(16, 16)
    assert np.allclose(t, np.kron(phi, phi))


def test_channel_order_does_not_matter(cfg33):
    base = evolve_to_pair(cfg33, 3, 3, "alice-first")
    for order in ("bob-first", "interleaved"):
        for a, b in zip(base, evolve_to_pair(cfg33, 3, 3, order)):
            assert np.max(np.abs(a.rho - b.rho)) < 1e-14


def test_pairs_never_mix(cfg33):
    p1, p2 = evolve_to_pair(cfg33, 3, 3)
    other_alice = SideParameters(0.9, 0.2, (0.15, 0.45, 0.95))
    other_bob = SideParameters(0.8, 1.1, (0.25, 0.35, 0.85))
    q1, q2 = evolve_to_pair(dataclasses.replace(cfg33, alice=other_alice), 3, 3)
    assert np.allclose(p2.rho, q2.rho, atol=1e-14) and not np.allclose(p1.rho, q1.rho)
    r1, r2 = evolve_to_pair(dataclasses.replace(cfg33, bob=other_bob), 3, 3)
    assert np.allclose(p1.rho, r1.rho, atol=1e-14) and not np.allclose(p2.rho, r2.rho)


# distributions and witness


def test_tsirelson_pair_chsh_sum():
    P = joint_distribution(tsirelson_config(), 1, 1).probs
    pair1 = P.sum(axis=(5, 7))[:, 0, :, 0]  # [m, m', p, p'] at n = n' = 0
    total = sum(pair1[r, s, a, b] for r in (0, 1) for s in (0, 1) for a in (0, 1) for b in (0, 1) if a ^ b == r * s)
    assert total == pytest.approx(2 + math.sqrt(2), abs=1e-12)


def test_blocks_normalized(cfg33):
    P = joint_distribution(cfg33, 3, 2).probs
    assert np.max(np.abs(P.sum(axis=(4, 5, 6, 7)) - 1)) < 1e-9


def test_forced_agreement_reported_params(cfg22, cfg33):
    for cfg in (cfg22, cfg33):
        assert simulate_S(cfg, 1, 1).S == pytest.approx(closed_form_S(1, 1, cfg.alice, cfg.bob).S, abs=1e-6)
    assert simulate_S(cfg22, 1, 1).S == pytest.approx(98.06, abs=0.005)


@pytest.mark.parametrize("j", [1, 2, 3])
def test_one_sided_pair1_term(cfg33, j):
    sim = simulate_S(cfg33, j, 1)
    cf = closed_form_S(j, 1, cfg33.alice, cfg33.bob)
    assert sim.pair1_term == pytest.approx(cf.pair1_term, abs=1e-6)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_one_sided_pair2_term(cfg33, k):
    sim = simulate_S(cfg33, 1, k)
    cf = closed_form_S(1, k, cfg33.alice, cfg33.bob)
    assert sim.pair2_term == pytest.approx(cf.pair2_term, abs=1e-6)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 1.0), st.integers(0, 1000))
def test_visibility_scales_witness_linearly(v, seed):
    cfg = random_config(np.random.default_rng(seed), 1, 1)
    s1 = simulate_S(cfg, 1, 1).S
    sv = simulate_S(dataclasses.replace(cfg, visibility=v), 1, 1).S
    assert sv == pytest.approx(64 + v * (s1 - 64), abs=1e-6)


def test_monte_carlo_matches_exact_distribution(cfg22):
    shots = 200_000
    counts = sample_counts(cfg22, 2, 2, shots, seed=12)
    freq, n = empirical_distribution(counts)
    exact = joint_distribution(cfg22, 2, 2).probs
    se = np.sqrt(exact * (1 - exact) / n)
    z = np.where(se > 0, np.abs(freq - exact) / np.where(se > 0, se, 1), 0)
    assert z.max() < 5
    assert np.all(freq[exact == 0] == 0)


def test_monte_carlo_is_seeded(cfg22):
    assert np.array_equal(sample_counts(cfg22, 2, 1, 2000, 5), sample_counts(cfg22, 2, 1, 2000, 5))


# reports


def test_compare_report(cfg22):
    rep = compare_closed_form(cfg22)
    assert {(r.j, r.k) for r in rep.rows} == {(1, 1), (1, 2), (2, 1), (2, 2)}
    assert abs(rep.row(1, 1).delta) < 1e-6 and rep.row(1, 1).status == "forced"
    assert all(r.status == "open" for r in rep.rows if (r.j, r.k) != (1, 1))
    assert rep.max_abs_deviation == max(abs(r.delta) for r in rep.rows)
    assert [round(rep.row(j, k).closed_form, 2) for j, k in [(1, 1), (2, 1), (1, 2), (2, 2)]] == [
        98.06, 98.37, 98.37, 98.67
    ]


def test_compare_is_thread_count_independent(cfg33, monkeypatch):
    monkeypatch.setenv("SEQBELL_THREADS", "1")
    a = compare_closed_form(cfg33)
    monkeypatch.setenv("SEQBELL_THREADS", "4")
    b = compare_closed_form(cfg33)
    assert a.rows == b.rows


def test_critical_visibility(cfg22, cfg33):
    s22 = closed_form_S(1, 1, cfg22.alice, cfg22.bob).S
    assert critical_visibility(cfg22) == pytest.approx(32 / (s22 - 64), abs=1e-9)
    assert critical_visibility(cfg22) == pytest.approx(0.9395, abs=5e-5)
    assert critical_visibility(cfg33) == pytest.approx(0.9963, abs=5e-5)


def test_visibility_threshold_algebra():
    assert visibility_threshold(128.0) == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(NoViolation):
        visibility_threshold(96.0)
