import math

import numpy as np
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from clickmix import continuous, discrete
from clickmix.discrete import Variant
from clickmix.em import ModelKind, bic, free_parameter_count, random_initialize
from clickmix.evaluate import adjusted_rand_index, selection_table
from clickmix.mixture import DegenerateGroupError, floored_simplex, observed_loglik, responsibilities
from clickmix.seqdata import (
    ClickSequence,
    Dataset,
    SequenceFormat,
    collapse_repeats,
    dataset_stats,
    format_dataset,
    parse_lines,
    summarize,
)

SETTINGS = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])

times_st = st.floats(min_value=1e-3, max_value=50.0, allow_nan=False, allow_infinity=False)


@st.composite
def sequences(draw, j=4, timed=False, repeats=True, max_len=12):
    n = draw(st.integers(1, max_len))
    states = [draw(st.integers(1, j))]
    for _ in range(n - 1):
        if repeats:
            states.append(draw(st.integers(1, j)))
        else:
            states.append(draw(st.sampled_from([s for s in range(1, j + 1) if s != states[-1]])))
    times = tuple(draw(times_st) for _ in states) if timed else None
    return ClickSequence(tuple(states), times)


@st.composite
def datasets(draw, j=3, timed=False, repeats=True):
    seqs = draw(st.lists(sequences(j, timed, repeats), min_size=2, max_size=8))
    return Dataset(tuple(seqs), j)


@SETTINGS
@given(sequences(j=5, timed=True))
def test_counts_sum_to_length_minus_one(seq):
    tc = summarize(seq, 5)
    assert tc.counts.sum() == len(seq) - 1
    assert math.isclose(tc.time_in_state.sum(), math.fsum(seq.times), rel_tol=1e-12)


@SETTINGS
@given(sequences(j=4, timed=True, repeats=False))
def test_no_repeat_sources_have_zero_diagonal(seq):
    assert np.trace(summarize(seq, 4).counts) == 0


@SETTINGS
@given(sequences(j=3, timed=True))
def test_collapse_idempotent_and_preserves_time(seq):
    once = collapse_repeats(seq)
    assert collapse_repeats(once) == once
    assert not once.has_repeats
    assert math.isclose(math.fsum(once.times), math.fsum(seq.times), rel_tol=1e-12)


@SETTINGS
@given(st.lists(sequences(j=6, timed=True), min_size=1, max_size=5), st.booleans())
def test_format_parse_round_trip(seqs, labelled):
    if labelled:
        seqs = [s.with_label(i % 3 + 1) for i, s in enumerate(seqs)]
    ds = Dataset(tuple(seqs), 6)
    text = format_dataset(ds)
    back = parse_lines(text.splitlines(True), SequenceFormat.WITH_TIMES, num_states=6)
    assert back == ds
    assert format_dataset(back) == text


@SETTINGS
@given(arrays(float, st.integers(2, 6), elements=st.floats(0, 100)), st.sampled_from([1e-6, 1e-3, 0.05]))
def test_floored_simplex_is_constrained_maximiser(w, floor):
    assume(floor * w.size <= 1.0)
    p = floored_simplex(w, floor)
    assert math.isclose(p.sum(), 1.0, abs_tol=1e-12)
    assert p.min() >= floor * (1 - 1e-12)
    if w.sum() > 0:
        # KKT: free entries share one multiplier, pinned ones would want to go lower
        free = p > floor * (1 + 1e-9)
        if free.any():
            mu = w[free] / p[free]
            assert np.allclose(mu, mu[0], rtol=1e-9)
            assert np.all(w[~free] <= mu[0] * floor * (1 + 1e-9))


@SETTINGS
@given(arrays(float, (3, 5), elements=st.floats(-800, 50)), st.lists(st.integers(-1, 2), min_size=5, max_size=5))
def test_responsibility_columns_sum_to_one(log_joint, labels):
    labels = np.array(labels)
    resp = responsibilities(log_joint, labels)
    np.testing.assert_allclose(resp.sum(axis=0), 1.0, atol=1e-10)
    for i, lab in enumerate(labels):
        if lab >= 0:
            assert resp[lab, i] == 1.0
    assert np.isfinite(observed_loglik(log_joint, labels))


def _one_iteration(kind, ds, seed, g):
    stats = dataset_stats(ds)
    model = random_initialize(ds.num_states, g, kind, np.random.default_rng(seed))
    ops = (
        (continuous.log_joint, lambda r: continuous.m_step(stats, r))
        if kind == "CM"
        else (discrete.log_joint, lambda r: discrete.m_step(stats, r, Variant(kind)))
    )
    lj = ops[0](stats, model)
    before = observed_loglik(lj, stats.labels)
    try:
        new = ops[1](responsibilities(lj, stats.labels))
    except DegenerateGroupError:
        assume(False)  # a failed start, handled by the restart logic
    after = observed_loglik(ops[0](stats, new), stats.labels)
    return new, before, after


@SETTINGS
@given(datasets(j=3, timed=True, repeats=False), st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_cm_iteration_monotone(ds, seed, g):
    new, before, after = _one_iteration("CM", ds, seed, g)
    assert after >= before - 1e-8 * abs(before) or new.at_floor()
    for q in new.generators:
        continuous.validate_generator(q, floor=1e-6 * (1 - 1e-9))


@SETTINGS
@given(datasets(j=3), st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_dwm_iteration_monotone(ds, seed, g):
    new, before, after = _one_iteration("DWM", ds, seed, g)
    assert after >= before - 1e-8 * abs(before) or new.at_floor()
    np.testing.assert_allclose(new.transitions.sum(axis=2), 1.0, atol=1e-12)
    assert new.transitions.min() >= 1e-6 * (1 - 1e-12)


@SETTINGS
@given(datasets(j=3, repeats=False), st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_dm_iteration_monotone(ds, seed, g):
    new, before, after = _one_iteration("DM", ds, seed, g)
    assert after >= before - 1e-8 * abs(before) or new.at_floor()
    assert np.all(np.einsum("gjj->gj", new.transitions) == 0)


@SETTINGS
@given(st.lists(st.integers(1, 4), min_size=2, max_size=30).flatmap(
    lambda a: st.tuples(st.just(a), st.lists(st.integers(1, 4), min_size=len(a), max_size=len(a)))),
    st.permutations([1, 2, 3, 4]))
def test_ari_symmetry_and_relabelling(pair, perm):
    a, b = np.array(pair[0]), np.array(pair[1])
    assert adjusted_rand_index(a, b) == adjusted_rand_index(b, a)
    relabel = np.array([0] + list(perm))[a]
    assert math.isclose(adjusted_rand_index(relabel, b), adjusted_rand_index(a, b), abs_tol=1e-12)
    ari = adjusted_rand_index(a, b)
    assert -1.0 <= ari <= 1.0
    if len(set(a)) > 1:
        assert adjusted_rand_index(a, a) == 1.0


@SETTINGS
@given(arrays(float, (3, 6), elements=st.floats(0.01, 1)))
def test_argmax_invariant_under_monotone_map(resp):
    resp = resp / resp.sum(axis=0)
    for f in (np.log, np.sqrt, lambda x: 3 * x + 1):
        np.testing.assert_array_equal(np.argmax(f(resp), axis=0), np.argmax(resp, axis=0))


@SETTINGS
@given(st.floats(-1e6, 0), st.integers(0, 500), st.integers(3, 10_000))
def test_bic_decreasing_in_p(loglik, p, n):
    assert bic(loglik, p + 1, n) < bic(loglik, p, n)


@SETTINGS
@given(st.integers(1, 6), st.integers(1, 20))
def test_cm_and_dwm_share_parameter_count(g, j):
    assert free_parameter_count(ModelKind.CM, g, j) == free_parameter_count(ModelKind.DWM, g, j)


@SETTINGS
@given(st.lists(st.floats(-1, 1), min_size=1, max_size=20), st.data())
def test_selection_summary_matches_recomputation(aris, data):
    selected = data.draw(st.lists(st.integers(1, 5), min_size=len(aris), max_size=len(aris)))
    s = selection_table("CM", selected, aris)
    assert s.mean_ari == float(np.mean(aris))
    assert s.sd_ari == (float(np.std(aris, ddof=1)) if len(aris) > 1 else 0.0)
    assert sum(s.histogram) == len(aris)
