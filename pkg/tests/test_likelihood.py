import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ilmkit.errors import DataError, RequestError
from ilmkit.likelihood import LikelihoodProblem, log_likelihood, reference_log_likelihood
from ilmkit.model import ContactNetworkSet, EpidemicEvents, ModelSpec, Population, validate_spec

from helpers import hand_model, random_instance


def both(model, events, tmin=None, tmax=None):
    return (log_likelihood(model, events, tmin, tmax),
            reference_log_likelihood(model, events, tmin, tmax))


class TestHandCases:
    def test_survivor(self):
        ev = EpidemicEvents("SI", [1, 0], tmax=2)
        for v in both(hand_model(), ev):
            assert v == -1.0

    def test_new_infection(self):
        ev = EpidemicEvents("SI", [1, 2], tmax=2)
        want = math.log(1 - math.exp(-1))
        for v in both(hand_model(), ev):
            assert v == pytest.approx(want, rel=1e-15)
            assert v == pytest.approx(-0.458675, abs=1e-6)

    def test_impossible_infection(self):
        m = validate_spec(ModelSpec("SI", "network", alpha=(1.0,)), Population(2),
                          ContactNetworkSet((np.zeros((2, 2)),)))
        ev = EpidemicEvents("SI", [1, 2], tmax=2)
        assert both(m, ev) == (-math.inf, -math.inf)

    def test_single_individual_no_events(self):
        m = validate_spec(ModelSpec("SI", "network", alpha=(1.0,)), Population(1),
                          ContactNetworkSet((np.zeros((1, 1)),)))
        ev = EpidemicEvents("SI", [0], tmax=4)
        assert both(m, ev) == (0.0, 0.0)

    def test_nobody_infectious_without_sparks(self):
        ev = EpidemicEvents("SI", [0, 0], tmax=5)
        assert log_likelihood(hand_model(), ev) == 0.0

    def test_removed_individual_exerts_no_pressure(self):
        spec = ModelSpec("SIR", "network", alpha=(1.0,))
        m = validate_spec(spec, Population(2), ContactNetworkSet((np.array([[0, 1.0], [1.0, 0]]),)))
        # #1 infectious at t = 1 only, removed at 2; #2 survives steps 1 and 2
        ev = EpidemicEvents("SIR", [1, 0], [2, 0], tmax=3)
        for v in both(m, ev):
            assert v == -1.0

    def test_sparks_survival(self):
        ev = EpidemicEvents("SI", [0, 0], tmax=4)
        assert log_likelihood(hand_model(spark=0.25), ev) == pytest.approx(-0.25 * 2 * 3, rel=1e-15)

    def test_window_beyond_data(self):
        ev = EpidemicEvents("SI", [1, 0], tmax=2)
        with pytest.raises(RequestError):
            log_likelihood(hand_model(), ev, 1, 5)

    def test_framework_mismatch(self):
        ev = EpidemicEvents("SIR", [1, 0], [3, 0])
        with pytest.raises(DataError):
            log_likelihood(hand_model(), ev)

    def test_reference_refuses_large_inputs(self):
        m = validate_spec(ModelSpec("SI", "network", alpha=(1.0,)), Population(13),
                          ContactNetworkSet((np.zeros((13, 13)),)))
        with pytest.raises(RequestError):
            reference_log_likelihood(m, EpidemicEvents("SI", [1] + [0] * 12))

    def test_theta_evaluation_matches_model_rebuild(self, rng):
        model, ev = random_instance(rng)
        problem = LikelihoodProblem(model, ev)
        theta = model.spec.theta * 1.3
        assert problem(theta) == pytest.approx(log_likelihood(model.with_theta(theta), ev), rel=1e-13)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_oracle_equivalence(seed):
    model, ev = random_instance(np.random.default_rng(seed))
    fast, ref = both(model, ev)
    if math.isinf(ref):
        assert fast == ref
    else:
        assert abs(fast - ref) <= 1e-12
        assert fast <= 0.0


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.data())
def test_factorization(seed, data):
    model, ev = random_instance(np.random.default_rng(seed))
    m = data.draw(st.integers(ev.tmin, ev.tmax))
    whole = log_likelihood(model, ev)
    parts = log_likelihood(model, ev, ev.tmin, m) + log_likelihood(model, ev, m, ev.tmax)
    if math.isinf(whole):
        assert parts == whole
    else:
        assert parts == pytest.approx(whole, rel=1e-12, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.001, 1.0), st.floats(1.01, 3.0))
def test_monotone_in_sparks_for_unexplained_infections(seed, eps, factor):
    """With no contacts, every infection is a spark and each log P term grows with epsilon."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 10))
    nets = ContactNetworkSet((np.zeros((n, n)),))
    m = validate_spec(ModelSpec("SI", "network", alpha=(1.0,), spark=eps), Population(n), nets)
    ev = EpidemicEvents("SI", np.full(n, 2), tmin=1, tmax=2)
    lo = log_likelihood(m, ev)
    hi = log_likelihood(m.with_theta([1.0, eps * factor]), ev)
    assert hi > lo
