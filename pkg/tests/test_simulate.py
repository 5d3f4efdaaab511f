import numpy as np
import pytest

from clickmix.continuous import embedded_transition_probs
from clickmix.em import prepare_stats
from clickmix.seqdata import ClickSequence, Dataset, DataFormatError
from clickmix.simulate import (
    ScenarioKind,
    ScenarioSpec,
    augment_with_times,
    constants_version,
    generate_replicate,
    generate_scenario,
    load_constants,
    normalise_generator,
    sample_ctmc_path,
    sample_dtmc_path,
    scenario_model,
)


def test_constants_versioned():
    assert constants_version() == "1"
    c = load_constants()
    assert {"sim1", "sim2", "msnbc"} <= set(c)
    assert len(c["msnbc"]["categories"]) == 17
    assert np.asarray(c["msnbc"]["rate_sets"]).shape == (4, 17)


def test_sim1_equal_diagonals():
    q1, q2 = np.asarray(load_constants()["sim1"]["generators"])
    np.testing.assert_array_equal(np.diag(q1), np.diag(q2))


def test_scenario_models():
    m1 = scenario_model("sim1")
    np.testing.assert_array_equal(m1.weights, [0.5, 0.5])
    np.testing.assert_allclose(m1.initial_probs, 0.2)
    m2 = scenario_model("sim2")
    np.testing.assert_array_equal(m2.weights, [0.2, 0.4, 0.4])
    np.testing.assert_allclose(m2.initial_probs[0], 1 / 7)
    assert m2.initial_probs[1, 6] == 0.4 and m2.initial_probs[2, 2] == 0.4
    np.testing.assert_allclose(m2.generators.sum(axis=2), 0.0, atol=1e-12)


def test_normalise_generator_keeps_exit_rates():
    printed = np.array([[-0.14, 0.05, 0.02], [0.1, -1.4, 0.2], [0.01, 0.01, -0.02]])
    q = normalise_generator(printed)
    np.testing.assert_array_equal(np.diag(q), np.diag(printed))
    np.testing.assert_allclose(q.sum(axis=1), 0.0, atol=1e-15)
    ok = np.array([[-1.0, 1.0], [2.0, -2.0]])
    np.testing.assert_array_equal(normalise_generator(ok), ok)


def test_ctmc_path_basics(rng):
    q = np.array([[-1.0, 1.0], [2.0, -2.0]])
    one = sample_ctmc_path([0.5, 0.5], q, 1, rng)
    assert len(one.states) == 1 and len(one.times) == 1
    path = sample_ctmc_path([1.0, 0.0], q, 9, rng)
    assert path.states == (1, 2) * 4 + (1,)
    assert all(t > 0 for t in path.times)
    with pytest.raises(ValueError):
        sample_ctmc_path([1.0, 0.0], q, 0, rng)


def test_ctmc_law_of_large_numbers(rng):
    q = np.asarray(scenario_model("sim1").generators[0])
    n = 100_000
    times, exits = [], np.zeros(5)
    # restart each path in state 1 so every sample is a visit to it
    for _ in range(n // 1000):
        for _ in range(1000):
            seq = sample_ctmc_path([1, 0, 0, 0, 0], q, 2, rng)
            times.append(seq.times[0])
            exits[seq.states[1] - 1] += 1
    assert abs(np.mean(times) - 10.0) < 0.2
    np.testing.assert_allclose(exits / exits.sum(), embedded_transition_probs(q)[0], atol=0.01)


def test_dtmc_paths(rng):
    lam = np.eye(3)
    assert sample_dtmc_path([0, 1, 0], lam, 6, rng).states == (2,) * 6
    assert len(sample_dtmc_path([1, 0, 0], lam, 1, rng).states) == 1
    with pytest.raises(ValueError):
        sample_dtmc_path([1, 0, 0], lam, 4, rng, allow_repeats=False)
    uniform = np.full((3, 3), 1 / 3)
    seq = sample_dtmc_path([1, 0, 0], uniform, 100_001, rng)
    x = np.asarray(seq.states) - 1
    counts = np.zeros((3, 3))
    np.add.at(counts, (x[:-1], x[1:]), 1)
    np.testing.assert_allclose(counts / counts.sum(axis=1, keepdims=True), 1 / 3, atol=0.01)


def test_presets():
    small = ScenarioSpec.preset("sim1-small")
    assert (small.n, small.length_range) == (50, (4, 25))
    large = ScenarioSpec.preset("sim2-large")
    assert (large.n, large.length_range) == (100, (25, 100))
    assert ScenarioSpec.preset("sim3").labelled_fraction == 0.7
    with pytest.raises(ValueError):
        ScenarioSpec.preset("sim1-small", length_range=(0, 3))
    with pytest.raises(ValueError):
        ScenarioSpec.preset("sim1-small", labelled_fraction=1.5)
    with pytest.raises(ValueError):
        ScenarioSpec.preset("nope")


def test_sim1_small_shapes():
    reps = generate_scenario(ScenarioSpec.preset("sim1-small", replicates=3, seed=2))
    assert len(reps) == 3
    for rep in reps:
        assert len(rep.dataset) == 50 and rep.truth.shape == (50,)
        lengths = [len(s) for s in rep.dataset.sequences]
        assert min(lengths) >= 4 and max(lengths) <= 25
        prepare_stats(rep.dataset, "CM")


def test_sim2_group_proportions():
    spec = ScenarioSpec.preset("sim2-large", replicates=40, seed=3)
    truth = np.concatenate([rep.truth for rep in generate_scenario(spec)])
    freq = np.bincount(truth, minlength=4)[1:] / truth.size
    np.testing.assert_allclose(freq, [0.2, 0.4, 0.4], atol=0.03)


def test_initial_state_frequencies():
    spec = ScenarioSpec.preset("sim2-large", replicates=30, seed=4)
    firsts, groups = [], []
    for rep in generate_scenario(spec):
        firsts += [s.states[0] - 1 for s in rep.dataset.sequences]
        groups += list(rep.truth - 1)
    firsts, groups = np.array(firsts), np.array(groups)
    alpha = scenario_model("sim2").initial_probs
    for g in range(3):
        f = firsts[groups == g]
        p_hat = np.bincount(f, minlength=7) / f.size
        se = np.sqrt(alpha[g] * (1 - alpha[g]) / f.size)
        assert np.all(np.abs(p_hat - alpha[g]) <= 3 * se + 1e-12)


def test_sim3_labels_and_reuse():
    sim3 = generate_replicate(ScenarioSpec.preset("sim3-large", seed=9), 0)
    sim2 = generate_replicate(ScenarioSpec.preset("sim2-large", seed=9), 0)
    assert sim3.dataset.n_labelled == round(0.7 * 100)
    assert [s.states for s in sim3.dataset.sequences] == [s.states for s in sim2.dataset.sequences]
    for seq, t in zip(sim3.dataset.sequences, sim3.truth):
        assert seq.label is None or seq.label == t


def test_replicates_are_independent_of_count():
    a = generate_scenario(ScenarioSpec.preset("sim1-small", replicates=2, seed=1))
    b = generate_scenario(ScenarioSpec.preset("sim1-small", replicates=4, seed=1))
    assert a[1].dataset == b[1].dataset


def test_augment_with_times(rng):
    ds = Dataset((ClickSequence((1, 2, 3)), ClickSequence((3, 1))), 17)
    out, hidden = augment_with_times(ds, np.random.default_rng(0), num_rate_sets=1)
    np.testing.assert_array_equal(hidden, [1, 1])
    assert out.has_times
    again, _ = augment_with_times(ds, np.random.default_rng(0), num_rate_sets=1)
    assert again == out
    with pytest.raises(DataFormatError):
        augment_with_times(Dataset((ClickSequence((18,)),), 18), rng)


def test_msnbc_replicate():
    spec = ScenarioSpec.preset("msnbc-augment", seed=0, n=60)
    rep = generate_replicate(spec, 0)
    assert rep.raw.has_repeats and not rep.dataset.has_repeats
    assert rep.dataset.num_states == 17
    assert set(rep.truth) <= {1, 2, 3, 4}
    prepare_stats(rep.dataset, "CM")
    prepare_stats(rep.raw, "DWM")


def test_custom_needs_model():
    spec = ScenarioSpec(ScenarioKind.CUSTOM, 5, (2, 3))
    with pytest.raises(ValueError):
        generate_replicate(spec, 0)
    rep = generate_replicate(spec, 0, scenario_model("sim1"))
    assert len(rep.dataset) == 5
