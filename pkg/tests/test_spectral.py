import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from coherent_deal.core.errors import DomainError, ShapeError
from coherent_deal.core.scenario import ScenarioSpace, quantile
from coherent_deal.core.spectral import (
    DistortionFunction,
    WeightingMeasure,
    distortion,
    make_alphavar_grid,
    make_betavar_grid,
    make_tailvar,
    parse_measure_spec,
    phi,
    rho_wvar,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
levels = st.sampled_from([0.1, 0.25, 1.0 / 3.0, 0.5, 0.6, 2.0 / 3.0, 0.9, 1.0])
measures = st.lists(st.tuples(levels, st.floats(0.05, 1.0)), min_size=1, max_size=4).map(
    lambda atoms: WeightingMeasure.from_atoms(
        (lv, w / sum(x for _, x in atoms)) for lv, w in atoms
    )
)


def _pair(values):
    space = ScenarioSpace.uniform(len(values))
    return space, space.variable(values)


def test_measure_validation():
    with pytest.raises(DomainError):
        WeightingMeasure([0.0, 0.5], [0.5, 0.5])
    with pytest.raises(DomainError):
        WeightingMeasure([0.5], [0.9])
    with pytest.raises(DomainError):
        WeightingMeasure([0.6, 0.5], [0.5, 0.5])
    with pytest.raises(ShapeError):
        WeightingMeasure([0.5], [0.5, 0.5])
    with pytest.raises(DomainError):
        make_tailvar(1.5)


def test_from_atoms_merges_levels():
    measure = WeightingMeasure.from_atoms([(0.5, 0.25), (0.2, 0.5), (0.5, 0.25)])
    assert measure.atoms == [(0.2, 0.5), (0.5, 0.5)]


def test_distortion_of_tailvar():
    psi = distortion(make_tailvar(0.25))
    assert psi(0.125) == pytest.approx(0.5)
    assert psi(0.25) == pytest.approx(1.0)
    assert psi(0.8) == pytest.approx(1.0)
    assert psi.density(0.1) == pytest.approx(4.0)
    assert psi.density(0.5) == pytest.approx(0.0)


def test_distortion_of_two_atoms(mu1):
    psi = distortion(mu1)
    np.testing.assert_allclose(psi([0.0, 1.0 / 6.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]), [0, 1 / 3, 2 / 3, 5 / 6, 1])
    assert psi.integral(0.0, 1.0 / 3.0) == pytest.approx(2.0 / 3.0)


def test_distortion_rejects_convex_shapes():
    with pytest.raises(DomainError):
        DistortionFunction([0.0, 0.5, 1.0], [0.0, 0.2, 1.0])
    with pytest.raises(DomainError):
        DistortionFunction([0.0, 1.0], [0.0, 0.5])


def test_phi_of_tailvar():
    psi = distortion(make_tailvar(0.4))
    for x in (0.0, 1.0, 2.5, 4.0):
        assert phi(psi, x) == pytest.approx(max(1.0 - 0.4 * x, 0.0))
    with pytest.raises(DomainError):
        phi(psi, -1.0)


def test_tailvar_examples():
    _, x = _pair([-2.0, 0.0, 1.0, 3.0])
    assert rho_wvar(make_tailvar(0.5), x) == pytest.approx(1.0)
    assert rho_wvar(make_tailvar(1.0), x) == pytest.approx(-0.5)


def test_two_atoms_on_skewed_variable(mu1, mu2):
    _, x = _pair([-1.0, 0.0, 1000.0])
    assert rho_wvar(mu1, x) == pytest.approx(-166.0)
    assert rho_wvar(mu2, x) == pytest.approx(0.5)


def test_risk_uses_probabilities():
    space = ScenarioSpace(("a", "b", "c"), [0.1, 0.3, 0.6])
    x = space.variable([5.0, -4.0, 1.0])
    # the lowest 20% lies at -4
    assert rho_wvar(make_tailvar(0.2), x) == pytest.approx(4.0)
    # lowest 40%: 0.3 at -4 and 0.1 at 1
    assert rho_wvar(make_tailvar(0.4), x) == pytest.approx(-(0.3 * -4.0 + 0.1 * 1.0) / 0.4)


@settings(max_examples=1000, deadline=None)
@given(measures, st.lists(st.tuples(finite, finite), min_size=1, max_size=8))
def test_subadditive(measure, pairs):
    space = ScenarioSpace.uniform(len(pairs))
    x = space.variable([a for a, _ in pairs])
    y = space.variable([b for _, b in pairs])
    assert rho_wvar(measure, x + y) <= rho_wvar(measure, x) + rho_wvar(measure, y) + 1e-9


@settings(max_examples=1000, deadline=None)
@given(measures, st.lists(finite, min_size=1, max_size=8), st.floats(0.0, 100.0))
def test_positively_homogeneous(measure, values, scale):
    _, x = _pair(values)
    assert rho_wvar(measure, x * scale) == pytest.approx(scale * rho_wvar(measure, x), abs=1e-7)


@settings(max_examples=1000, deadline=None)
@given(measures, st.lists(finite, min_size=1, max_size=8), finite)
def test_translation(measure, values, shift):
    _, x = _pair(values)
    assert rho_wvar(measure, x + shift) == pytest.approx(rho_wvar(measure, x) - shift, abs=1e-8)


@settings(max_examples=1000, deadline=None)
@given(measures, st.lists(st.tuples(finite, st.floats(0.0, 1e3)), min_size=1, max_size=8))
def test_monotone(measure, pairs):
    space = ScenarioSpace.uniform(len(pairs))
    x = space.variable([a for a, _ in pairs])
    y = space.variable([a + b for a, b in pairs])
    assert rho_wvar(measure, y) <= rho_wvar(measure, x) + 1e-9


@settings(max_examples=300, deadline=None)
@given(measures, st.lists(finite, min_size=1, max_size=8))
def test_dominates_minus_mean(measure, values):
    _, x = _pair(values)
    assert rho_wvar(measure, x) >= -x.mean() - 1e-9


@settings(max_examples=300, deadline=None)
@given(measures, st.lists(st.integers(-3, 3), min_size=2, max_size=8), st.randoms())
def test_tied_values_do_not_depend_on_order(measure, values, rnd):
    _, x = _pair([float(v) for v in values])
    shuffled = list(values)
    rnd.shuffle(shuffled)
    _, y = _pair([float(v) for v in shuffled])
    assert rho_wvar(measure, x) == pytest.approx(rho_wvar(measure, y), abs=1e-12)


def _quantile_integral(psi, x):
    """-int_0^1 q_s(X) psi(s) ds over the pieces where both factors are constant"""
    probs = x.space.probs[x.ascending_order()]
    cuts = np.unique(np.concatenate(([0.0, 1.0], np.cumsum(probs)[:-1], psi.knots)))
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (lo + hi)
        total += quantile(x, mid) * psi.density(mid) * (hi - lo)
    return -total


def test_quantile_form_agrees(random_measure, random_space):
    rng = np.random.default_rng(7)
    for _ in range(100):
        space = random_space(rng, int(rng.integers(1, 9)))
        x = space.variable(rng.normal(size=space.size))
        measure = random_measure(rng)
        assert rho_wvar(measure, x) == pytest.approx(_quantile_integral(distortion(measure), x), abs=1e-9)


def test_betavar_grid_levels_are_beta_medians():
    measure = make_betavar_grid(1.0, 0.5, 2)
    expected = stats.beta.ppf([0.25, 0.75], 1.5, 0.5)
    np.testing.assert_allclose(measure.levels, expected, rtol=1e-10)
    np.testing.assert_allclose(measure.weights, [0.5, 0.5])


def test_alphavar_needs_alpha_above_one():
    with pytest.raises(DomainError):
        make_alphavar_grid(1.0, 10)
    with pytest.raises(DomainError):
        make_betavar_grid(1.0, 1.0, 10)
    with pytest.raises(DomainError):
        make_betavar_grid(2.0, 0.5, 1)


@pytest.mark.parametrize("alpha, expected", [(2.0, -1.0 / 3.0), (3.0, -0.25)])
def test_alphavar_of_uniform(alpha, expected):
    size = 2000
    _, x = _pair((np.arange(size) + 0.5) / size)
    assert rho_wvar(make_alphavar_grid(alpha, 100), x) == pytest.approx(expected, abs=1e-2)


def test_parse_measure_spec():
    assert parse_measure_spec({"type": "tailvar", "lambda": 0.3}).atoms == [(0.3, 1.0)]
    discrete = parse_measure_spec({"type": "discrete", "atoms": [[1.0, 0.5], [0.25, 0.5]]})
    assert discrete.atoms == [(0.25, 0.5), (1.0, 0.5)]
    assert len(parse_measure_spec({"type": "alphavar", "alpha": 2, "grid": 7})) == 7
    assert len(parse_measure_spec({"type": "betavar", "alpha": 2, "beta": 0.5}, default_grid=9)) == 9
    with pytest.raises(DomainError):
        parse_measure_spec({"type": "tailvar"})
    with pytest.raises(DomainError):
        parse_measure_spec({"type": "gaussian"})
