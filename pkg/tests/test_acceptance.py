"""Acceptance criteria 1 to 12, each at its stated tolerance."""

import math
import subprocess
import sys
import time

import numpy as np
import pytest

from seqbell.gammaseq import find_feasible_theta, gamma_sequence, is_positive_increasing
from seqbell.measurements import SideParameters, alice_povm, bob_povm, luders_instrument
from seqbell.optimizer import optimize_symmetric
from seqbell.simulator import ScenarioConfig, compare_closed_form, critical_visibility, simulate_S
from seqbell.witness import chsh_prob_lhv_max, closed_form_S, closed_form_table, lhv_bound

THETA_22 = math.pi / 4 - 0.2999
THETA_33 = math.pi / 4 - 0.6219
REPORTED_SETS = [(0.5577, THETA_22, 2), (0.27665, THETA_33, 3)]
TABLE_22 = {(1, 1): 98.06, (1, 2): 98.37, (2, 1): 98.37, (2, 2): 98.67}
TABLE_33 = [[96.12, 96.13, 96.20], [96.13, 96.14, 96.21], [96.20, 96.21, 96.28]]  # rows are Bobs


def symmetric_config(eps, theta, n):
    return ScenarioConfig.symmetric(n, n, eps, theta)


def random_feasible_side(rng, n):
    """Rejection-sample (eps, theta) with gamma_1..gamma_n all in (0, 1)."""
    while True:
        eps = rng.uniform(0.02, 1.5)
        theta = math.exp(rng.uniform(math.log(1e-3), math.log(math.pi / 4)))
        if gamma_sequence(eps, theta, n).is_fully_feasible():
            return SideParameters.from_protocol(eps, theta, n)


@pytest.mark.criterion(1, "closed-form 2x2 table")
def test_criterion_01_closed_form_22():
    s = SideParameters.from_protocol(0.5577, THETA_22, 2)
    t0 = time.perf_counter()
    values = {(j, k): closed_form_S(j, k, s, s).S for j in (1, 2) for k in (1, 2)}
    elapsed = time.perf_counter() - t0
    for key, expected in TABLE_22.items():
        assert abs(values[key] - expected) <= 0.005, key
        assert values[key] > 96
    assert elapsed < 0.1


@pytest.mark.criterion(2, "closed-form 3x3 table")
def test_criterion_02_closed_form_33():
    s = SideParameters.from_protocol(0.27665, THETA_33, 3)
    t0 = time.perf_counter()
    table = np.array(closed_form_table(s, s, 3, 3))
    elapsed = time.perf_counter() - t0
    assert np.abs(table - TABLE_33).max() <= 0.005
    assert np.all(table > 96)
    assert elapsed < 0.1


@pytest.mark.criterion(3, "local hidden-variable bound")
def test_criterion_03_lhv_bound():
    t0 = time.perf_counter()
    assert chsh_prob_lhv_max() == 3
    assert 32 * 3 == 96 == lhv_bound()
    assert time.perf_counter() - t0 < 0.1


@pytest.mark.criterion(4, "POVM and instrument validity")
def test_criterion_04_povm_validity():
    rng = np.random.default_rng(2024)
    draws = 0
    worst_pos, worst_comp, worst_kraus = 0.0, 0.0, 0.0
    while draws < 200:
        J, K = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        alice, bob = random_feasible_side(rng, J), random_feasible_side(rng, K)
        for role, count, build in (("alice", J, alice_povm), ("bob", K, bob_povm)):
            for pos in range(1, count + 1):
                povm = build(pos, alice, bob)
                for m in (0, 1):
                    for n in (0, 1):
                        total = np.zeros((4, 4), complex)
                        for p in (0, 1):
                            for q in (0, 1):
                                e = povm.effect(m, n, p, q)
                                worst_pos = max(worst_pos, -float(np.linalg.eigvalsh(e).min()))
                                total += e
                        worst_comp = max(worst_comp, float(np.abs(total - np.eye(4)).max()))
                worst_kraus = max(worst_kraus, luders_instrument(povm).completeness_residual())
        draws += 1
    assert worst_pos <= 1e-9
    assert worst_comp <= 1e-9
    assert worst_kraus <= 1e-8


@pytest.mark.criterion(5, "sharpness sequences positive, increasing, and reachable")
def test_criterion_05_sharpness_sequences():
    for eps, theta, n in REPORTED_SETS:
        seq = gamma_sequence(eps, theta, n)
        assert seq.is_fully_feasible() and is_positive_increasing(seq)
    rng = np.random.default_rng(7)
    for _ in range(120):
        seq = gamma_sequence(rng.uniform(1e-3, 3.0), rng.uniform(1e-4, math.pi / 2), int(rng.integers(1, 8)))
        assert is_positive_increasing(seq)
    for eps in (0.1, 0.27665, 0.5577):
        for n in range(1, 6):
            theta = find_feasible_theta(eps, n)
            assert gamma_sequence(eps, theta, n).is_fully_feasible()


@pytest.mark.criterion(6, "simulation equals closed form with no intermediates")
def test_criterion_06_forced_agreement():
    t0 = time.perf_counter()
    configs = [symmetric_config(*p) for p in REPORTED_SETS]
    rng = np.random.default_rng(99)
    for _ in range(50):
        J, K = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        configs.append(ScenarioConfig(J, K, random_feasible_side(rng, J), random_feasible_side(rng, K)))
    for cfg in configs:
        assert abs(simulate_S(cfg, 1, 1).S - closed_form_S(1, 1, cfg.alice, cfg.bob).S) <= 1e-6
    assert time.perf_counter() - t0 < 5.0


@pytest.mark.criterion(7, "one-sided sequential agreement")
def test_criterion_07_one_sided():
    # depth 3 needs gamma_3, which only the 3x3 parameters provide
    cfg = symmetric_config(0.27665, THETA_33, 3)
    for j in (1, 2, 3):
        sim, cf = simulate_S(cfg, j, 1), closed_form_S(j, 1, cfg.alice, cfg.bob)
        assert abs(sim.pair1_term - cf.pair1_term) <= 1e-6
    for k in (1, 2, 3):
        sim, cf = simulate_S(cfg, 1, k), closed_form_S(1, k, cfg.alice, cfg.bob)
        assert abs(sim.pair2_term - cf.pair2_term) <= 1e-6
    cfg = symmetric_config(0.5577, THETA_22, 2)
    assert abs(simulate_S(cfg, 2, 1).pair1_term - closed_form_S(2, 1, cfg.alice, cfg.bob).pair1_term) <= 1e-6
    assert abs(simulate_S(cfg, 1, 2).pair2_term - closed_form_S(1, 2, cfg.alice, cfg.bob).pair2_term) <= 1e-6


@pytest.mark.criterion(8, "closed form versus simulation report")
def test_criterion_08_discrepancy_report():
    rep = compare_closed_form(symmetric_config(0.5577, THETA_22, 2))
    assert sorted((r.j, r.k) for r in rep.rows) == [(1, 1), (1, 2), (2, 1), (2, 2)]
    for r in rep.rows:
        assert math.isfinite(r.closed_form) and math.isfinite(r.simulated) and math.isfinite(r.delta)
    assert abs(rep.row(1, 1).delta) < 1e-6
    assert rep.row(2, 2).status == "open"
    print("\n" + "\n".join(f"  ({r.j},{r.k}) closed form {r.closed_form:.4f} simulated {r.simulated:.4f} "
                           f"delta {r.delta:+.4f} [{r.status}]" for r in rep.rows))


@pytest.mark.criterion(9, "Tsirelson point")
def test_criterion_09_tsirelson():
    s = SideParameters(0.1, math.pi / 4, (1.0,))
    cf = closed_form_S(1, 1, s, s).S
    assert abs(cf - (64 + 32 * math.sqrt(2))) <= 1e-9
    assert abs(simulate_S(ScenarioConfig(1, 1, s, s), 1, 1).S - cf) <= 1e-6


@pytest.mark.criterion(10, "optimizer reaches the reported violations")
def test_criterion_10_optimizer():
    for (J, K), floor in (((2, 2), 98.0), ((3, 3), 96.10)):
        t0 = time.perf_counter()
        res = optimize_symmetric(J, K)
        assert time.perf_counter() - t0 < 60
        assert res.min_S >= floor


@pytest.mark.criterion(11, "critical visibility")
def test_criterion_11_visibility():
    v22 = critical_visibility(symmetric_config(0.5577, THETA_22, 2))
    s_min = min(closed_form_S(j, k, *[SideParameters.from_protocol(0.5577, THETA_22, 2)] * 2).S
                for j in (1, 2) for k in (1, 2))
    assert abs(v22 - 32 / (s_min - 64)) <= 1e-6
    assert abs(v22 - 0.9395) <= 5e-5
    v33 = critical_visibility(symmetric_config(0.27665, THETA_33, 3))
    assert abs(v33 - 0.9963) <= 5e-5


CLI_RUNS = [
    ["table", "--format", "csv"],
    ["table", "--alices", "3", "--bobs", "3", "--epsilon", "0.27665", "--theta-offset", "0.6219", "--format", "json"],
    ["compare", "--format", "csv"],
    ["compare", "--format", "json"],
    ["simulate", "-j", "2", "-k", "2", "--shots", "5000", "--seed", "1", "--format", "json"],
    ["optimize", "--format", "json"],
    ["gammas", "-n", "3", "--format", "csv"],
    ["visibility", "--format", "json"],
    ["verify", "--format", "json"],
]


@pytest.mark.criterion(12, "deterministic CLI output")
@pytest.mark.parametrize("argv", CLI_RUNS, ids=lambda a: "-".join(a[:1] + a[-1:]))
def test_criterion_12_determinism(argv):
    outs = [subprocess.run([sys.executable, "-m", "seqbell", *argv], capture_output=True, check=True).stdout
            for _ in range(2)]
    assert outs[0] == outs[1] and outs[0]
