import numpy as np
import pytest

from conftest import random_state
from oracles import Q, branch_operator, correction, kron, op_on, swap_dense
from wrep.linalg import DensityOperator, fidelity_with_pure
from wrep.noise import depolarize_register, depolarized_w
from wrep.states import w_state
from wrep.swapping import (
    OUTPUT,
    ROTATION,
    DegenerateSwapError,
    achievable_rounds,
    build_branch,
    outcome_tree,
    relay_resources,
    relay_simulate,
    swap,
)

W3 = DensityOperator.from_vector("ABC", w_state())


def test_branch_corrections_from_table():
    assert np.allclose(build_branch(1).correction, np.eye(8))
    assert build_branch(4).correction_name == "ZII"
    with pytest.raises(ValueError):
        build_branch(9)


@pytest.mark.parametrize("j", range(1, 9))
def test_branch_operators_match_oracle(j):
    b = build_branch(j)
    O = b.operator
    assert np.allclose(O @ O, O, atol=1e-12)
    targets = [Q[str(q)] for pair in b.pairs for q in pair]
    assert np.allclose(op_on(O, targets, 9), branch_operator(j), atol=1e-14)
    assert np.allclose(b.correction, correction(j), atol=1e-14)
    assert np.allclose(b.correction.conj().T @ b.correction, np.eye(8), atol=1e-12)


def test_noiseless_swap_exact():
    res = swap([W3] * 3)
    assert res.success_probability == pytest.approx(2 / 3, abs=1e-12)
    assert res.fidelity == pytest.approx(1, abs=1e-12)
    assert res.state.labels == W3.labels
    assert sum(res.branch_probabilities) * 3 == pytest.approx(res.success_probability, abs=1e-12)


def test_shortcut_agrees_with_dense_oracle():
    rq = depolarized_w(0.93)
    ps, out, weights = swap_dense(kron(*[rq.matrix] * 3))
    res = swap([rq] * 3)
    assert res.success_probability == pytest.approx(ps, abs=1e-12)
    assert np.allclose(res.branch_probabilities, weights, atol=1e-12)
    assert np.allclose(res.state.matrix, out, atol=1e-12)


def test_noisy_operations_depolarize_inputs_first():
    rq = depolarized_w(0.95)
    a = swap([rq] * 3, p=0.97)
    b = swap([depolarize_register(rq, None, 0.97)] * 3)
    assert np.allclose(a.state.matrix, b.state.matrix, atol=1e-12)
    assert a.success_probability == pytest.approx(b.success_probability, abs=1e-12)


def test_all_patterns_on_identical_inputs():
    rq = depolarized_w(0.9)
    a, b = swap([rq] * 3), swap([rq] * 3, all_patterns=True)
    assert a.success_probability == pytest.approx(b.success_probability, abs=1e-12)
    assert a.fidelity == pytest.approx(b.fidelity, abs=1e-12)
    assert len(b.branch_probabilities) == 24


def test_rotation_is_a_three_cycle():
    for lab, img in ROTATION.items():
        assert ROTATION[ROTATION[ROTATION[lab]]] == lab
        assert img != lab


def test_heterogeneous_inputs_use_all_patterns(rng):
    ins = [random_state(rng, "ABC") for _ in range(3)]
    res = swap(ins)
    assert res.all_patterns and res.state.is_valid(1e-9)
    with pytest.raises(ValueError):
        swap(ins, all_patterns=False)


def test_swap_input_validation():
    with pytest.raises(ValueError):
        swap([W3] * 2)
    with pytest.raises(ValueError):
        swap([DensityOperator("AB", np.eye(4) / 4)] * 3)


def test_degenerate_input_raises():
    zero = DensityOperator.from_vector("ABC", np.eye(8)[0])  # |000> never passes
    with pytest.raises(DegenerateSwapError):
        swap([zero] * 3)


def test_outcome_tree_normalized_and_success_matches(rng):
    ins = [random_state(rng, "ABC") for _ in range(3)]
    tree = outcome_tree(ins)
    assert sum(o.probability for o in tree) == pytest.approx(1, abs=1e-9)
    assert len({o.pattern for o in tree}) == 8
    succ = sum(o.probability for o in tree if o.success)
    assert succ == pytest.approx(swap(ins).success_probability, abs=1e-9)


def test_swap_degrades_depolarized_inputs():
    for q in (0.5, 0.8, 0.95, 0.99):
        rq = depolarized_w(q)
        assert swap([rq] * 3).fidelity < fidelity_with_pure(rq, w_state())


def test_relay_noiseless_never_stops():
    rows = relay_simulate(1.0, 1.0, n_max=5)
    assert [r.n for r in rows] == [1, 2, 3, 4, 5]
    assert [r.distance for r in rows] == [2, 4, 8, 16, 32]
    assert all(abs(r.fidelity - 1) < 1e-12 and abs(r.success_prob - 2 / 3) < 1e-12 for r in rows)


def test_relay_stops_after_first_row_below_threshold():
    rows = relay_simulate(0.95, 1.0, n_max=12)
    assert rows[-1].fidelity < 0.465
    assert all(r.fidelity >= 0.465 for r in rows[:-1])
    assert achievable_rounds(0.95) == len(rows) - 1
    with pytest.raises(ValueError):
        relay_simulate(0.9, n_max=13)


def test_relay_resources():
    assert relay_resources(0) == (1, 1)
    assert relay_resources(1) == (4.5, 1.5)
    for n in range(1, 21):
        total, per_segment = relay_resources(n)
        assert total == pytest.approx(3 / (2 / 3) * relay_resources(n - 1)[0], rel=1e-15)
        assert total == 4.5**n and per_segment == 1.5**n
    with pytest.raises(ValueError):
        relay_resources(-1)


def test_output_register():
    assert [str(q) for q in OUTPUT] == ["l1", "u2", "r3"]
