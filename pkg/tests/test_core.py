import numpy as np
import pytest

from datsim.core import Tags
from datsim.core.errors import InvalidArgument, NumericError
from datsim.core.numeric import check_finite, finite_diff_grad, sign0
from datsim.core.params import LayeredParams, layer_norms, mean_params, project_linf
from datsim.core.registry import NameClash, Registry, UnknownName
from datsim.core.rng import SERVER_ID, SeededRng


def test_layer_norms():
    params = LayeredParams([[3.0, 4.0], [0.0], [1.0, 1.0, 1.0, 1.0]])
    assert layer_norms(params) == [5.0, 0.0, 2.0]
    assert layer_norms(LayeredParams([[0.0, 0.0], [1.0, 0.0, 0.0]])) == [0.0, 1.0]


def test_layer_norms_single_layer_is_full_norm():
    params = LayeredParams([[1.0, -2.0, 2.0]])
    assert layer_norms(params) == [params.norm()] == [3.0]


def test_flatten_unflatten():
    params = LayeredParams([[1.0, 2.0], [3.0], [4.0, 5.0, 6.0]])
    assert params.layout == (2, 1, 3)
    assert params.total_dim == 6
    again = LayeredParams.unflatten(params.layout, params.flatten())
    assert again.equals(params)
    with pytest.raises(InvalidArgument):
        LayeredParams.unflatten((2, 2), [1.0, 2.0, 3.0])


def test_layers_are_read_only():
    params = LayeredParams([[1.0, 2.0]])
    with pytest.raises(ValueError):
        params[0][0] = 5.0


def test_empty_layers_rejected():
    with pytest.raises(InvalidArgument):
        LayeredParams([])
    with pytest.raises(InvalidArgument):
        LayeredParams([[1.0], []])


def test_arithmetic_and_layout_mismatch():
    a = LayeredParams([[1.0, 2.0], [3.0]])
    b = LayeredParams([[0.5, 0.5], [1.0]])
    assert (a + b).equals(LayeredParams([[1.5, 2.5], [4.0]]))
    assert (a - b).equals(LayeredParams([[0.5, 1.5], [2.0]]))
    assert (2.0 * a).equals(a * 2.0)
    assert (-a).equals(LayeredParams([[-1.0, -2.0], [-3.0]]))
    assert a.dot(b) == 4.5
    with pytest.raises(InvalidArgument):
        a + LayeredParams([[1.0, 2.0, 3.0]])


def test_mean_params_order():
    items = [LayeredParams([[float(k)]]) for k in range(4)]
    assert mean_params(items).equals(LayeredParams([[1.5]]))
    with pytest.raises(InvalidArgument):
        mean_params([])


@pytest.mark.parametrize(
    "v,center,radius,expected",
    [
        ([0.25, -0.05], [0.0, 0.0], 0.1, [0.1, -0.05]),
        ([0.5, -3.0], [0.0, 0.0], 1.0, [0.5, -1.0]),
        ([2.0, 2.0], [1.0, 0.0], 0.5, [1.5, 0.5]),
        ([7.0, -7.0], [1.0, 2.0], 0.0, [1.0, 2.0]),
    ],
)
def test_project_linf(v, center, radius, expected):
    np.testing.assert_array_equal(project_linf(v, center, radius), expected)


def test_project_linf_idempotent(gen: np.random.Generator):
    v = gen.normal(size=20) * 3
    center = gen.normal(size=20)
    once = project_linf(v, center, 0.7)
    np.testing.assert_array_equal(project_linf(once, center, 0.7), once)
    assert np.max(np.abs(once - center)) <= 0.7


def test_project_linf_errors():
    with pytest.raises(InvalidArgument):
        project_linf([1.0], [0.0], -1.0)
    with pytest.raises(InvalidArgument):
        project_linf([1.0, 2.0], [0.0], 1.0)


def test_sign0():
    np.testing.assert_array_equal(sign0([-2.0, 0.0, 3.5, -0.0]), [-1.0, 0.0, 1.0, 0.0])


def test_check_finite():
    check_finite("ok", [1.0, 2.0])
    with pytest.raises(NumericError) as err:
        check_finite("loss", [1.0, np.nan])
    assert "loss" in str(err.value)


def test_finite_diff_grad_quadratic():
    def f(x):
        return float(x @ x + 3 * x[0])

    grad = finite_diff_grad(f, np.array([1.0, -2.0]))
    np.testing.assert_allclose(grad, [5.0, -4.0], atol=1e-6)


def test_finite_diff_grad_nonfinite():
    with pytest.raises(NumericError):
        finite_diff_grad(lambda x: float(np.log(x[0])), np.array([0.0]))


def test_streams_are_reproducible_and_independent():
    a = SeededRng.for_stream(5, 0, 3, Tags.BATCH).generator().random(4)
    b = SeededRng.for_stream(5, 0, 3, Tags.BATCH).generator().random(4)
    np.testing.assert_array_equal(a, b)
    others = [
        SeededRng.for_stream(5, 1, 3, Tags.BATCH),
        SeededRng.for_stream(5, 0, 4, Tags.BATCH),
        SeededRng.for_stream(5, 0, 3, Tags.ATTACK),
        SeededRng.for_stream(6, 0, 3, Tags.BATCH),
        SeededRng.for_stream(5, SERVER_ID, 3, Tags.BATCH),
    ]
    for other in others:
        assert not np.array_equal(a, other.generator().random(4))


def test_stream_draws_do_not_depend_on_creation_order():
    first = SeededRng(9).child(2, 1, Tags.QUANTIZE)
    SeededRng(9).child(0, 0, Tags.QUANTIZE).generator().random(100)
    second = SeededRng(9).child(2, 1, Tags.QUANTIZE)
    np.testing.assert_array_equal(
        first.generator().normal(size=3), second.generator().normal(size=3)
    )


def test_registry():
    registry: Registry = Registry("widget")

    @registry.register()
    def make_thing():
        """Makes a thing."""
        return 1

    @registry.register("other")
    def _other():
        return 2

    assert list(registry) == ["make-thing", "other"]
    assert registry["make-thing"].run() == 1
    assert registry["make-thing"].description == "Makes a thing."
    with pytest.raises(NameClash):
        registry.register("other")(make_thing)
    with pytest.raises(UnknownName) as err:
        registry["missing"]
    assert "make-thing" in str(err.value)


def test_registry_aliases():
    registry: Registry = Registry("widget")

    @registry.register("primary", aliases=["secondary"])
    def _primary():
        return 3

    assert list(registry) == ["primary"]
    assert registry.names() == ["primary", "secondary"]
    assert registry["secondary"].name == "primary"
    assert "secondary" in registry
    with pytest.raises(NameClash):
        registry.register("secondary")(_primary)
