from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from anesia.domain import (
    Domain,
    DomainError,
    InvalidBidError,
    LinearAdditiveUtility,
    OutcomeTable,
    ParseError,
    PartialPreferenceProfile,
    Profile,
    SessionConfig,
    discounted_utility,
    enumerate_outcomes,
    load_domain,
    load_partial_profile,
    load_profile,
    sample_partial_profile,
    save_domain,
    save_partial_profile,
    save_profile,
    utility,
)

from conftest import random_utility


def test_utility_single_issue():
    u = LinearAdditiveUtility((1.0,), ((0.7, 1.0),))
    assert utility(u, (0,)) == pytest.approx(0.7)


def test_utility_two_issue_symmetry():
    u = LinearAdditiveUtility((0.5, 0.5), ((1.0, 0.0), (0.0, 1.0)))
    assert utility(u, (0, 0)) == pytest.approx(0.5)


def test_utility_three_issue_hand_value():
    u = LinearAdditiveUtility((0.2, 0.3, 0.5), ((1.0,), (0.5, 1.0), (0.4, 1.0)))
    # 0.2*1.0 + 0.3*0.5 + 0.5*0.4
    assert utility(u, (0, 0, 0)) == pytest.approx(0.55, abs=1e-12)


def test_utility_rejects_bad_bids():
    u = LinearAdditiveUtility((0.5, 0.5), ((1.0, 0.0), (0.0, 1.0)))
    with pytest.raises(InvalidBidError):
        utility(u, (0,))
    with pytest.raises(InvalidBidError):
        utility(u, (0, 2))


@pytest.mark.parametrize(
    "weights, evaluations",
    [
        ((0.5, 0.6), ((1.0,), (1.0,))),
        ((1.0, 0.0), ((1.0,), (1.0,))),
        ((1.0,), ((0.5, 0.9),)),
        ((1.0,), ((1.2, 1.0),)),
    ],
)
def test_utility_invariants_enforced(weights, evaluations):
    with pytest.raises(DomainError):
        LinearAdditiveUtility(weights, evaluations)


def test_discounted_utility_cases():
    assert discounted_utility(0.8, 0.0, 0.5) == 0.8
    assert discounted_utility(0.8, 1.0, 1.0) == 0.8
    assert discounted_utility(0.8, 1.0, 0.5) == pytest.approx(0.4)
    with pytest.raises(DomainError):
        discounted_utility(0.8, 1.5, 0.5)
    with pytest.raises(DomainError):
        discounted_utility(0.8, 0.5, 0.0)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0.01, 1))
def test_discount_never_raises_utility(x, t, d):
    v = discounted_utility(x, t, d)
    assert v <= x + 1e-15
    if t == 0 or d == 1:
        assert v == pytest.approx(x)
    elif x > 1e-12 and d < 1 - 1e-9 and t > 1e-6:
        assert v < x


@pytest.mark.parametrize("counts, size", [((1,), 1), ((2, 3), 6), ((4, 4, 3), 48)])
def test_enumerate_outcomes_counts(counts, size):
    bids = list(enumerate_outcomes(Domain.from_counts(counts)))
    assert len(bids) == size == math.prod(counts)
    assert len(set(bids)) == size
    assert bids == sorted(bids)


def test_outcome_array_matches_enumeration(flight):
    assert [tuple(r) for r in flight.outcome_array().tolist()] == list(enumerate_outcomes(flight))


@given(st.lists(st.integers(1, 5), min_size=1, max_size=4), st.integers(0, 2**31))
def test_utility_bounded_and_monotone(counts, seed):
    rng = np.random.default_rng(seed)
    domain = Domain.from_counts(counts)
    u = random_utility(counts, rng)
    values = u.batch(domain.outcome_array())
    assert values.min() >= -1e-12 and values.max() <= 1 + 1e-12
    # raising one evaluation never lowers any bid's utility
    i = int(rng.integers(len(counts)))
    ev = [list(e) for e in u.evaluations]
    j = int(rng.integers(counts[i]))
    ev[i][j] = min(1.0, ev[i][j] + 0.1)
    bumped = LinearAdditiveUtility(u.weights, ev)
    assert np.all(bumped.batch(domain.outcome_array()) >= values - 1e-12)


def test_partial_profile_sizes_follow_ceiling():
    airport = Domain.from_counts((7, 6, 10))
    u = random_utility(airport.shape, np.random.default_rng(0))
    assert len(sample_partial_profile(u, airport, 0.05, 1)) == 21
    flight = Domain.from_counts((4, 4, 3))
    u = random_utility(flight.shape, np.random.default_rng(0))
    assert len(sample_partial_profile(u, flight, 0.10, 1)) == math.ceil(4.8) == 5


def test_partial_profile_deterministic_and_ordered(flight):
    u = random_utility(flight.shape, np.random.default_rng(3))
    a = sample_partial_profile(u, flight, 0.25, 9)
    b = sample_partial_profile(u, flight, 0.25, 9)
    assert a == b
    values = [u(bid) for bid in a.bids]
    assert values == sorted(values)
    assert len(set(a.bids)) == len(a.bids)


def test_partial_profile_too_small(flight):
    u = random_utility(flight.shape, np.random.default_rng(3))
    with pytest.raises(DomainError):
        sample_partial_profile(u, flight, 0.01, 0)


def test_partial_profile_ties_break_lexicographically():
    domain = Domain.from_counts((2, 2))
    u = LinearAdditiveUtility((0.5, 0.5), ((1.0, 1.0), (1.0, 1.0)))
    profile = sample_partial_profile(u, domain, 1.0, 0)
    assert profile.bids == ((0, 0), (0, 1), (1, 0), (1, 1))


def test_partial_profile_rejects_duplicates():
    with pytest.raises(DomainError):
        PartialPreferenceProfile(((0, 1), (0, 1)))


def test_minimal_domain_file(tmp_path):
    path = tmp_path / "d.json"
    path.write_text(json.dumps({"name": "one", "issues": [{"name": "x", "values": ["a", "b"]}]}))
    assert load_domain(path).n_issues == 1


def test_duplicate_issue_name_is_parse_error(tmp_path):
    path = tmp_path / "d.json"
    issues = [{"name": "x", "values": ["a"]}, {"name": "x", "values": ["b"]}]
    path.write_text(json.dumps({"name": "dup", "issues": issues}))
    with pytest.raises(ParseError) as info:
        load_domain(path)
    assert info.value.field == "issues"


def test_malformed_json_reports_line(tmp_path):
    path = tmp_path / "d.json"
    path.write_text('{\n "name": "x",\n "issues": [\n')
    with pytest.raises(ParseError) as info:
        load_domain(path)
    assert info.value.line is not None


def test_eight_issue_round_trip(tmp_path):
    domain = Domain.from_counts((2, 3, 4, 2, 3, 2, 5, 2), "eight")
    save_domain(domain, tmp_path / "d.json")
    assert load_domain(tmp_path / "d.json") == domain


def test_profile_round_trip(tmp_path, flight):
    u = random_utility(flight.shape, np.random.default_rng(1))
    profile = Profile(flight.name, u, 0.1, 0.9)
    save_profile(profile, tmp_path / "p.json")
    assert load_profile(tmp_path / "p.json", flight) == profile


def test_profile_weights_renormalized_or_rejected(tmp_path):
    def write(weights):
        data = {"domain": "d", "utility": {"weights": weights, "evaluations": [[1.0], [1.0]]}}
        (tmp_path / "p.json").write_text(json.dumps(data))
        return tmp_path / "p.json"

    u = load_profile(write([0.5, 0.5 + 5e-7])).utility
    assert math.isclose(sum(u.weights), 1.0, abs_tol=1e-12)
    with pytest.raises(ParseError):
        load_profile(write([0.5, 0.6]))


def test_partial_profile_round_trip(tmp_path, flight):
    u = random_utility(flight.shape, np.random.default_rng(1))
    profile = sample_partial_profile(u, flight, 0.2, 4)
    save_partial_profile(profile, tmp_path / "b.json")
    assert load_partial_profile(tmp_path / "b.json", flight) == profile


def test_session_config_ranges():
    assert SessionConfig(deadline_rounds=10).time(5) == 0.5
    for bad in ({"deadline_rounds": 0}, {"reservation": 1.0}, {"discount": 0.0}, {"agent_discount": 1.5}):
        with pytest.raises(DomainError):
            SessionConfig(**bad)


def test_outcome_table_lookup(flight):
    u = random_utility(flight.shape, np.random.default_rng(5))
    table = OutcomeTable(flight, u)
    assert table.best == u.best_bid() or u(table.best) == pytest.approx(u(u.best_bid()))
    for target in np.linspace(0, 1, 11):
        bid = table.at_least(target)
        above = table.values[table.values >= target - 1e-12]
        if len(above):
            assert u(bid) == pytest.approx(above.min())
        else:
            assert bid == table.best
