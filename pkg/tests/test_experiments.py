import math

import numpy as np
import pytest

from nusearch import engine as eng
from nusearch import oracle
from nusearch.experiments import (
    GROUPING_LEAKAGE_THRESHOLD,
    ConfigError,
    ExperimentConfig,
    branch_supports,
    dilated_final_state,
    direct_point,
    figure_configs,
    gram_schmidt_reference,
    grouping_paths,
    marked_input_state,
    multidb_mu_nu,
    regroup_swap,
    run,
    run_lcu,
)
from nusearch.linalg import max_abs_diff
from nusearch.operators import APolicy, make_M, make_Mbar, make_Mtilde

S2 = 1 / math.sqrt(2)


def uniform(N):
    return np.ones(N) / math.sqrt(N)


def marked_vec(N, x):
    v = uniform(N)
    v[x] *= -1
    return v


def eight_element_signs():
    return tuple(-1 if i in (0, 3, 6, 7) else 1 for i in range(8))


def leakage_signs():
    rng = np.random.default_rng(2024)
    return tuple(int(s) for s in np.where(rng.random(256) < 0.5, -1, 1))


# Gram-Schmidt --------------------------------------------------------------

def test_gram_schmidt_four_elements():
    gs = gram_schmidt_reference(uniform(4), marked_vec(4, 2))
    assert max_abs_diff(gs.u1, [0.25, 0.25, -0.75, 0.25]) <= 1e-15
    assert gs.alpha == 0.5
    assert abs(gs.ratio - 3) <= 1e-15


def test_gram_schmidt_two_elements_orthogonal():
    v1 = marked_vec(2, 0)
    gs = gram_schmidt_reference(uniform(2), v1)
    assert abs(gs.alpha) <= 1e-15
    assert max_abs_diff(gs.u1, v1) <= 1e-15


@pytest.mark.parametrize("n", [3, 5, 8])
def test_gram_schmidt_ratio_is_N_minus_1(n):
    N = 2**n
    gs = gram_schmidt_reference(uniform(N), marked_vec(N, N // 3))
    assert abs(gs.ratio - (N - 1)) <= 1e-9
    assert abs(gs.alpha - (N - 2) / N) <= 1e-15
    assert abs(abs(gs.u1[N // 3]) - (2 * N - 2) / (N * math.sqrt(N))) <= 1e-15
    assert abs(gs.u1[0] - 2 / (N * math.sqrt(N))) <= 1e-15


def test_gram_schmidt_identical_inputs():
    gs = gram_schmidt_reference(uniform(4), uniform(4))
    assert math.isnan(gs.ratio)
    assert np.all(gs.u1 == 0)
    with pytest.raises(ValueError):
        gram_schmidt_reference(np.ones(4), uniform(4))


# Direct pipeline ------------------------------------------------------------

@pytest.mark.parametrize("n,x", [(2, 2), (3, 5), (4, 0)])
def test_direct_M_isolates_marked(n, x):
    N = 2**n
    res = run(ExperimentConfig("direct", n=n, marked=(x,)))
    assert res.ok
    assert res.trajectory[0].p_marked_given_zero == pytest.approx(1, abs=1e-12)
    assert res.derived_scalars["p_marked"] == pytest.approx(1, abs=1e-12)
    raw, normed, _, _ = direct_point(res.config, n, [x])
    ref = oracle.direct_circuit(n, [x], make_M())
    assert max_abs_diff(raw.amplitudes, ref) <= 1e-12
    expected = np.zeros(2 * N)
    expected[x], expected[N + x] = S2, -S2
    assert max_abs_diff(normed.amplitudes, expected) <= 1e-12


def test_direct_Mtilde_frozen_values():
    cfg = ExperimentConfig("direct", n=2, marked=(2,), a_policy=APolicy("exact_N"))
    raw, _, _, name = direct_point(cfg, 2, [2])
    assert name == "Mtilde"
    q = 1 / (4 * math.sqrt(2))
    expected = [q, q, -3 * q, q, 0, 0, S2, 0]
    assert max_abs_diff(raw.amplitudes, expected) <= 1e-12
    assert max_abs_diff(raw.amplitudes, oracle.direct_circuit(2, [2], make_Mtilde(4))) <= 1e-12
    # Marked component dominates both branches, residues stay nonzero.
    assert abs(raw.amplitudes[6]) > abs(raw.amplitudes[2]) > abs(raw.amplitudes[0]) > 0


def test_direct_random_marked_is_seeded():
    a = run(ExperimentConfig("direct", n=5, seed=3))
    b = run(ExperimentConfig("direct", n=5, seed=3))
    assert a.derived_scalars["marked_index"] == b.derived_scalars["marked_index"]


# Magnitude sweep ------------------------------------------------------------

def sweep(policy, marked=None, n_values=tuple(range(3, 11))):
    return run(ExperimentConfig("magnitude_sweep", a_policy=APolicy(policy), n_values=n_values,
                                marked=marked, seed=1))


def test_sweep_closed_form_value():
    res = sweep("barm_n", n_values=(10,))
    assert res.ok
    assert abs(res.trajectory[0].marked_amplitude_abs - 0.03977) <= 5e-6
    assert abs(res.trajectory[0].marked_amplitude_abs - 1.8 / math.sqrt(2048)) <= 1e-12


def test_sweep_barm_n2_dominates():
    lin = sweep("barm_n")
    quad = sweep("barm_n2")
    for r1, r2 in zip(lin.trajectory, quad.trajectory):
        assert r1.n == r2.n
        assert r2.marked_amplitude_abs >= r1.marked_amplitude_abs


def test_sweep_independent_of_marked_index():
    a = sweep("barm_n", marked=(0,), n_values=(3, 4, 5))
    b = sweep("barm_n", marked=(7,), n_values=(3, 4, 5))
    for r1, r2 in zip(a.trajectory, b.trajectory):
        assert abs(r1.marked_amplitude_abs - r2.marked_amplitude_abs) <= 1e-15
        assert abs(r1.marked_amplitude_abs_branch1 - r2.marked_amplitude_abs_branch1) <= 1e-15


def test_sweep_matches_oracle():
    n, x = 4, 9
    cfg = ExperimentConfig("magnitude_sweep", a_policy=APolicy("barm_n2"), n_values=(n,), marked=(x,))
    raw, _, _, _ = direct_point(cfg, n, [x])
    ref = oracle.direct_circuit(n, [x], make_Mbar(n, 1.0, APolicy("barm_n2")))
    assert max_abs_diff(raw.amplitudes, ref) <= 1e-12


def test_sweep_requires_barm_policy():
    with pytest.raises(ConfigError):
        ExperimentConfig("magnitude_sweep", a_policy=APolicy("poly_n"), n_values=(3,)).validate()


# Dilated search -------------------------------------------------------------

@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_dilated_exact_N_closed_forms(n):
    N = 2**n
    res = run(ExperimentConfig("dilated", n=n, a_policy=APolicy("exact_N"), marked=(1,)))
    assert res.ok
    r = res.trajectory[0]
    assert abs(r.p_first_zero - 1 / (N - 1)) <= 1e-10
    assert abs(r.p_marked_given_zero - (N - 1) / N) <= 1e-10


@pytest.mark.parametrize("k", [1, 2, 3])
def test_dilated_matches_oracle(k):
    n, a, x = 3, 0.6, 6
    state = dilated_final_state(n, k, a, [x])
    assert max_abs_diff(state.amplitudes, oracle.dilated_circuit(n, k, a, [x])) <= 1e-10


def test_dilated_first_step_increases():
    res = run(ExperimentConfig("dilated", n=6, a_policy=APolicy("exact_N"), aa_steps_n=True))
    assert len(res.trajectory) == 7
    assert res.trajectory[1].p_first_zero > res.trajectory[0].p_first_zero


def test_dilated_small_a_regime():
    res = run(ExperimentConfig("dilated", n=8, a_policy=APolicy("fixed", 0.5), aa_steps_n=True,
                               marked=(17,)))
    p = [r.p_first_zero for r in res.trajectory]
    assert any(p[i] < p[i + 1] > p[i + 2] for i in range(len(p) - 2))
    # Closed form of the conditional marked probability at this a.
    N, a = 256, 0.5
    closed = (a + 1) ** 2 / ((a + 1) ** 2 + (N - 1) * (a - 1) ** 2)
    for r in res.trajectory:
        assert abs(r.p_marked_given_zero - closed) <= 1e-10


def test_dilated_sweep_over_n():
    res = run(ExperimentConfig("dilated", a_policy=APolicy("poly_n"), n_values=(2, 3, 4),
                               aa_steps=1))
    assert [r.n for r in res.trajectory] == [2, 2, 3, 3, 4, 4]
    assert [r.step for r in res.trajectory] == [0, 1] * 3
    assert res.ok


# LCU ------------------------------------------------------------------------

def test_lcu_block_proportional_to_M():
    res = run(ExperimentConfig("lcu", n=3, marked=(5,)))
    assert res.ok
    assert res.derived_scalars["proportionality_residual"] <= 1e-10
    assert res.trajectory[0].p_first_zero <= 0.5


@pytest.mark.parametrize("n", [1, 2, 4, 6])
def test_lcu_marked_uniform_input_probability(n):
    res = run(ExperimentConfig("lcu", n=n, marked=(0,)))
    assert res.derived_scalars["postselect_probability"] <= 0.5
    assert abs(res.derived_scalars["postselect_probability"] - 1 / 2**n) <= 1e-12


def test_lcu_kernel_input_rejected():
    # The bare uniform state lies in the kernel of M, so nothing survives post-selection.
    state = eng.prepare_uniform(eng.RegisterLayout(mark=1, index=2), ["mark", "index"])
    with pytest.raises(eng.ZeroProbabilityError):
        run_lcu(ExperimentConfig("lcu", n=2), input_state=state)


def test_lcu_eigenvector_input():
    lay = eng.RegisterLayout(mark=1, index=1)
    amp = np.kron(np.array([1, -1]) * S2, [1, 0])
    res = run_lcu(ExperimentConfig("lcu", n=1), input_state=eng.StateVector(lay, amp))
    assert res.derived_scalars["proportionality_residual"] <= 1e-12
    assert abs(res.derived_scalars["postselect_probability"] - 1) <= 1e-12


# Multi-database -------------------------------------------------------------

@pytest.mark.parametrize("K", [1, 2, 4])
@pytest.mark.parametrize("n", [2, 3, 4])
def test_multidb_mu_nu_and_oracle(K, n):
    N = 2**n
    marked = tuple((3 * j + 1) % N for j in range(K))
    res = run(ExperimentConfig("multidb", n=n, K=K, marked=marked, a_policy=APolicy("exact_N")))
    assert res.ok, res.failed_checks()
    a = (N - 2) / N
    mu, nu = multidb_mu_nu(a, K, N)
    assert abs(res.derived_scalars["mu"] - mu) <= 1e-12
    assert abs(res.derived_scalars["nu"] - nu) <= 1e-12
    ref = oracle.multidb_state(n, K, marked, a).reshape(K, 2 * N)
    for j, rec in enumerate(res.trajectory):
        w = np.abs(ref[j]) ** 2
        expected = (w[marked[j]] + w[N + marked[j]]) / w.sum()
        assert abs(rec.p_marked_given_zero - expected) <= 1e-10
        assert abs(rec.p_marked_given_zero - (N - 1) / N) <= 1e-10


def test_multidb_a_equals_one():
    res = run(ExperimentConfig("multidb", n=2, K=2, marked=(0, 3)))
    assert res.derived_scalars["mu"] == pytest.approx(0.5, abs=1e-12)
    assert res.derived_scalars["nu"] == pytest.approx(0, abs=1e-12)
    for rec in res.trajectory:
        assert rec.p_marked_given_zero == pytest.approx(1, abs=1e-12)
        assert rec.p_first_zero == pytest.approx(0.5, abs=1e-12)


def test_multidb_database_difference_norm():
    N = 8
    for x in range(N):
        assert abs(np.linalg.norm(uniform(N) - marked_vec(N, x)) - 2 / math.sqrt(N)) <= 1e-15
    res = run(ExperimentConfig("multidb", n=3, K=2, marked=(1, 6)))
    assert res.derived_scalars["diff_norm_db1"] == pytest.approx(2 / math.sqrt(N))


def test_multidb_combine_mode():
    res = run(ExperimentConfig("multidb", n=3, K=2, marked=(1, 6), a_policy=APolicy("exact_N"),
                               combine=True))
    assert 0 < res.derived_scalars["combine_p_marked_union"] <= 1


def test_multidb_validation():
    with pytest.raises(ConfigError, match="power of two"):
        ExperimentConfig("multidb", n=3, K=3, marked=(1, 2, 3)).validate()
    with pytest.raises(ConfigError):
        ExperimentConfig("multidb", n=3, K=2, marked=(1,)).validate()


# Grouping -------------------------------------------------------------------

def test_grouping_eight_element_example():
    signs = eight_element_signs()
    cfg = ExperimentConfig("grouping", n=3, signs=signs)
    res = run(cfg)
    assert res.ok
    matrix_out, _ = grouping_paths(cfg, 1.0)
    s_m = np.where(np.array(signs) < 0, 1, 0) / math.sqrt(8)
    s_u = np.where(np.array(signs) > 0, 1, 0) / math.sqrt(8)
    expected = np.concatenate([-s_m, s_m, s_u, s_u]) * S2
    assert max_abs_diff(matrix_out.amplitudes, expected) <= 1e-12
    assert abs(res.derived_scalars["p_ancilla0"] - 0.5) <= 1e-12
    assert res.derived_scalars["phi"] == math.pi
    sup0, sup1 = branch_supports(matrix_out, 1, 3)
    assert sup0 == {0, 3, 6, 7}
    assert sup0 | sup1 == set(range(8)) and not sup0 & sup1


def test_grouping_paths_agree_with_oracle():
    rng = np.random.default_rng(5)
    for a in (1.0, 0.9, 0.6):
        signs = tuple(int(s) for s in rng.choice([-1, 1], 16))
        weights = tuple(rng.random(16) + 0.1)
        cfg = ExperimentConfig("grouping", n=4, signs=signs, weights=weights)
        m, g = grouping_paths(cfg, a)
        assert max_abs_diff(m.amplitudes, g.amplitudes) <= 1e-10
        assert max_abs_diff(m.amplitudes, oracle.grouping_output(signs, weights, a)) <= 1e-10


def test_grouping_all_marked():
    res = run(ExperimentConfig("grouping", n=3, signs=(-1,) * 8))
    assert abs(res.derived_scalars["p_ancilla0"] - 1) <= 1e-12
    matrix_out, _ = grouping_paths(res.config, 1.0)
    expected = np.concatenate([-uniform(8), uniform(8), np.zeros(16)]) * S2
    assert max_abs_diff(matrix_out.amplitudes, expected) <= 1e-12


def test_grouping_leakage_frozen_value():
    signs = leakage_signs()
    assert sum(s < 0 for s in signs) == 139
    res = run(ExperimentConfig("grouping", n=8, signs=signs, a_policy=APolicy("poly_n")))
    frac = res.derived_scalars["marked_fraction_branch0"]
    assert frac >= GROUPING_LEAKAGE_THRESHOLD
    assert abs(frac - 0.9962729357798165) <= 1e-10
    assert abs(res.derived_scalars["p_ancilla0"] - 0.545) <= 1e-10
    w = np.abs(oracle.grouping_output(signs, np.ones(256), 7 / 8)).reshape(4, 256) ** 2
    marked = np.array(signs) < 0
    assert abs(frac - w[:2, marked].sum() / w[:2].sum()) <= 1e-10


def test_grouping_multi_group_regrouping():
    rng = np.random.default_rng(9)
    K, n = 4, 3
    signs = tuple(int(s) for s in rng.choice([-1, 1], K * 8))
    cfg = ExperimentConfig("grouping", n=n, K=K, signs=signs)
    res = run(cfg)
    assert res.ok
    matrix_out, _ = grouping_paths(cfg, 1.0)
    per_group = np.asarray(signs).reshape(K, 8)
    for g in range(K):
        block = matrix_out.amplitudes.reshape(K, 32)[g]
        ref = oracle.grouping_output(per_group[g], np.ones(8), 1.0) / math.sqrt(K)
        assert max_abs_diff(block, ref) <= 1e-12
    out = regroup_swap(matrix_out)
    for g in range(K):
        sup0, sup1 = branch_supports(out, K, n, group=g)
        assert sup0 == set(np.flatnonzero(per_group[g] < 0).tolist())
        assert sup1 == set(np.flatnonzero(per_group[g] > 0).tolist())
    assert abs(res.derived_scalars["p_ancilla0"] - np.mean(per_group < 0)) <= 1e-12


def test_grouping_small_a_warns():
    res = run(ExperimentConfig("grouping", n=2, signs=(1, -1, 1, 1), a_policy=APolicy("fixed", 0.3)))
    assert any("below 0.5" in w for w in res.warnings)


def test_grouping_validation():
    with pytest.raises(ConfigError, match="length"):
        ExperimentConfig("grouping", n=3, signs=(1, -1)).validate()
    with pytest.raises(ConfigError):
        ExperimentConfig("grouping", n=1, signs=(1, 2)).validate()


# Figures --------------------------------------------------------------------

def test_figure_configs():
    cfgs = figure_configs(seed=4)
    assert [c.label for c in cfgs] == ["fig3a", "fig3b", "fig5a", "fig5b", "fig5c", "fig5d",
                                       "fig7a", "fig7b", "fig7c", "fig7d", "fig8a", "fig8b"]
    assert all(c.seed == 4 for c in cfgs)
    assert all(c.aa_steps == 1 and not c.aa_steps_n for c in cfgs[2:6])
    assert all(c.aa_steps_n for c in cfgs[6:])
    for c in cfgs:
        c.validate()


def test_marked_input_state_norm():
    s = marked_input_state(4, [3])
    assert abs(s.norm - 1) <= 1e-12
