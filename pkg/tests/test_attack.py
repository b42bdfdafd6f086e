import numpy as np
import pytest
from utils import random_params

from datsim.attack.config import AttackConfig
from datsim.attack.oracles import ClassifierInner, fgsm, oracles, pgd, solve
from datsim.attack.quadratic import (
    QuadraticInnerSpec,
    approx_gap_check,
    exact_quadratic_max,
)
from datsim.core import Tags
from datsim.core.errors import InvalidArgument
from datsim.core.params import LayeredParams
from datsim.core.rng import SeededRng
from datsim.models.zoo import LabeledBatch, ModelSpec, loss


def _rng(round_: int = 0) -> SeededRng:
    return SeededRng.for_stream(1, 0, round_, Tags.ATTACK)


def test_config_defaults():
    cfg = AttackConfig.pgd(0.2)
    assert (cfg.steps, cfg.step_size) == (10, pytest.approx(0.05))
    assert AttackConfig.fgsm(0.2).step_size == pytest.approx(0.25)
    assert AttackConfig.pgd(0.0).step_size == 1.0
    assert cfg.with_epsilon(0.4).step_size == pytest.approx(0.1)
    assert cfg.describe() == "pgd-10(eps=0.2, alpha=0.05, init=zero)"


@pytest.mark.parametrize(
    "kwargs",
    [
        {"kind": "cw"},
        {"epsilon": -0.1},
        {"epsilon": float("inf")},
        {"kind": "fgsm", "steps": 2},
        {"steps": 0},
        {"step_size": 0.0},
        {"init": "gaussian"},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(InvalidArgument):
        AttackConfig(**kwargs)


def test_registry_names():
    assert set(oracles) == {"fgsm", "pgd", "exact-quadratic"}


def test_increasing_loss_goes_to_the_corner():
    # logit gap grows with x, so the class 0 loss increases along +x
    spec = ModelSpec.linear(1, 2)
    theta = LayeredParams([[0.0, 1.0], [0.0, 0.0]])
    problem = ClassifierInner(spec, theta, LabeledBatch([[0.3]], [0]))
    delta = fgsm(problem, AttackConfig.fgsm(0.1, step_size=0.2))
    np.testing.assert_array_equal(delta, [[0.1]])


def test_symmetric_logits_give_zero_gradient():
    spec = ModelSpec.linear(2, 2)
    theta = LayeredParams([[1.0, -1.0, 1.0, -1.0], [0.0, 0.0]])
    problem = ClassifierInner(spec, theta, LabeledBatch([[0.5, 0.2]], [1]))
    np.testing.assert_array_equal(pgd(problem, AttackConfig.pgd(0.3)), [[0.0, 0.0]])


def test_epsilon_zero_is_no_perturbation(gen):
    spec = ModelSpec.mlp(3, 2, (4,))
    batch = LabeledBatch(gen.normal(size=(5, 3)), gen.integers(0, 2, size=5))
    problem = ClassifierInner(spec, random_params(spec), batch)
    for cfg in (AttackConfig.pgd(0.0, steps=7), AttackConfig.fgsm(0.0, init="uniform")):
        assert not np.any(solve(problem, cfg, _rng()))


def test_fgsm_equals_one_step_pgd(gen):
    spec = ModelSpec.mlp(3, 3, (5,), "tanh")
    batch = LabeledBatch(gen.normal(size=(6, 3)), gen.integers(0, 3, size=6))
    problem = ClassifierInner(spec, random_params(spec, seed=2), batch)
    one = solve(problem, AttackConfig.fgsm(0.2, step_size=0.1, init="uniform"), _rng())
    other = solve(
        problem, AttackConfig.pgd(0.2, steps=1, step_size=0.1, init="uniform"), _rng()
    )
    np.testing.assert_array_equal(one, other)


def test_pgd_stays_in_ball_and_raises_loss(gen):
    spec = ModelSpec.mlp(3, 2, (6,))
    theta = random_params(spec, seed=8)
    batch = LabeledBatch(gen.normal(size=(16, 3)), gen.integers(0, 2, size=16))
    cfg = AttackConfig.pgd(0.25, steps=10, init="uniform")
    delta = solve(ClassifierInner(spec, theta, batch), cfg, _rng())
    assert np.max(np.abs(delta)) <= 0.25
    attacked = loss(spec, theta, batch.with_inputs(batch.inputs + delta))
    assert attacked > loss(spec, theta, batch)


def test_uniform_init_needs_a_stream():
    spec = ModelSpec.linear(1, 2)
    problem = ClassifierInner(
        spec, LayeredParams.zeros(spec.layout), LabeledBatch([[0.0]], [0])
    )
    with pytest.raises(InvalidArgument):
        solve(problem, AttackConfig.pgd(0.1, init="uniform"))


def test_pgd_oscillates_around_interior_maximizer():
    spec = QuadraticInnerSpec.from_linear_term([0.3], mu=1.0, epsilon=1.0)
    alpha = 0.01
    delta = solve(spec, AttackConfig.pgd(1.0, steps=200, step_size=alpha))
    assert abs(delta[0] - 0.3) <= alpha + 1e-12


def test_pgd_reaches_corner_after_enough_steps():
    spec = QuadraticInnerSpec.from_linear_term([5.0, -5.0], mu=1.0, epsilon=0.5)
    delta = solve(spec, AttackConfig.pgd(0.5, steps=5, step_size=0.1))
    np.testing.assert_allclose(delta, [0.5, -0.5], atol=1e-12)


def test_classifier_has_no_exact_oracle():
    spec = ModelSpec.linear(1, 2)
    problem = ClassifierInner(
        spec, LayeredParams.zeros(spec.layout), LabeledBatch([[0.0]], [0])
    )
    with pytest.raises(InvalidArgument):
        solve(problem, AttackConfig.exact(0.1))


@pytest.mark.parametrize(
    "g,mu,eps,expected",
    [
        ([0.0, 0.0], 1.0, 1.0, [0.0, 0.0]),
        ([2.0, -0.5], 1.0, 1.0, [1.0, -0.5]),
        ([1.0, -4.0], 2.0, 1.5, [0.5, -1.5]),
    ],
)
def test_exact_quadratic_max(g, mu, eps, expected):
    spec = QuadraticInnerSpec.from_linear_term(g, mu, eps)
    np.testing.assert_allclose(exact_quadratic_max(spec), expected, atol=1e-15)
    np.testing.assert_allclose(solve(spec, AttackConfig.exact(eps)), expected)


def test_exact_max_beats_grid(gen):
    for _ in range(5):
        spec = QuadraticInnerSpec.random(gen, dim=2, epsilon=0.5)
        grid = np.linspace(-0.5, 0.5, 1001)
        xx, yy = np.meshgrid(grid, grid)
        values = spec.value(np.stack([xx.ravel(), yy.ravel()], axis=1))
        best = float(spec.value(exact_quadratic_max(spec)))
        assert best >= values.max() - 1e-12
        assert best - values.max() <= 1e-5


def test_gap_check_at_optimum(gen):
    spec = QuadraticInnerSpec.random(gen, dim=3)
    report = approx_gap_check(spec, exact_quadratic_max(spec), 1e-6)
    assert report.theta_grad_gap == 0.0
    assert report.is_eps_approx and report.bound_holds


def test_gap_check_near_optimum():
    # A = I, so L = 1; the optimum (0.2, -0.3) is interior
    spec = QuadraticInnerSpec.from_linear_term([0.2, -0.3], mu=1.0, epsilon=1.0)
    eps_target = 1e-2
    # criterion = mu * r^2 for a perturbation of length r around an interior optimum
    r = 0.99 * np.sqrt(eps_target)
    delta = np.array([0.2 + r, -0.3])
    report = approx_gap_check(spec, delta, eps_target)
    assert report.criterion == pytest.approx(r**2)
    assert report.is_eps_approx
    assert report.bound_holds


def test_gap_check_opposite_corner():
    spec = QuadraticInnerSpec.from_linear_term([10.0, -10.0], mu=1.0, epsilon=1.0)
    report = approx_gap_check(spec, np.array([-1.0, 1.0]), 1e-3)
    assert not report.is_eps_approx
    assert report.criterion == pytest.approx(2 * 2 * 11.0)


def test_gap_bound_for_random_pgd_iterates(gen):
    for k in range(200):
        spec = QuadraticInnerSpec.random(gen, dim=int(gen.integers(1, 5)))
        steps = int(gen.integers(1, 4))
        cfg = AttackConfig.pgd(spec.epsilon, steps=steps, init="uniform")
        delta = solve(spec, cfg, _rng(k))
        report = approx_gap_check(spec, delta, 1.0)
        target = max(report.criterion, 0.0) * spec.cross_lipschitz**2 / spec.mu
        check = approx_gap_check(spec, delta, target * (1 + 1e-9) + 1e-12)
        assert check.is_eps_approx and check.bound_holds
