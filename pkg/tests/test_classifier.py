import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ambuvib.classifier import (
    SIGMA_STEP,
    ClassifierError,
    ConfusionMatrix,
    PnnModel,
    class_density,
    classify,
    classify_many,
    classify_trip,
    coarse_grid,
    dumps_model,
    evaluate,
    jackknife_accuracy,
    labelled_features,
    loads_model,
    select_sigma,
    train,
)
from ambuvib.features import FeatureConfig, NormalizationRanges, Variant
from ambuvib.telemetry import synth_route
from conftest import A1, A2, A3
from oracles import brute_classify, kernel_density, loo_nearest_neighbour_accuracy

UNIT3 = NormalizationRanges.identity(3)
RAW = FeatureConfig(Variant.RAW_YZ_V)


def model_of(patterns, labels, sigma, **kw):
    return PnnModel(np.array(patterns, dtype=float), np.array(labels), sigma, UNIT3, RAW, **kw)


def random_instance(rng, n):
    labels = np.array([1, 2, 3] + rng.integers(1, 4, n - 3).tolist())
    rng.shuffle(labels)
    return rng.random((n, 3)), labels


# --------------------------------------------------------------------------
# density and classification


def test_density_exact_pattern_is_one():
    m = model_of([[0.2, 0.3, 0.4], [1, 1, 1], [0, 0, 0]], [1, 2, 3], 0.1)
    assert class_density(m, [0.2, 0.3, 0.4], A1) == 1.0


def test_density_one_sigma_away():
    sigma = 0.05
    m = model_of([[0, 0, 0], [1, 1, 1], [0.5, 0.5, 0.5]], [1, 2, 3], sigma)
    assert class_density(m, [sigma, 0, 0], A1) == pytest.approx(0.606531, abs=1e-6)
    assert class_density(m, [sigma, 0, 0], A1) == pytest.approx(math.exp(-0.5), rel=1e-15)


def test_density_flattens_for_huge_sigma():
    m = model_of([[0, 0, 0], [1, 1, 1], [0.5, 0.2, 0.9]], [1, 2, 3], 1e6)
    for k in (A1, A2, A3):
        assert class_density(m, [0.3, 0.7, 0.1], k) == pytest.approx(1.0, abs=1e-9)


def test_density_dimension_mismatch():
    m = model_of([[0, 0, 0], [1, 1, 1], [0.5, 0.5, 0.5]], [1, 2, 3], 0.1)
    with pytest.raises(ClassifierError, match="dimension"):
        class_density(m, [0, 0], A1)
    with pytest.raises(ClassifierError, match="dimension"):
        classify(m, [0, 0, 0, 0])


def test_classify_dominant_kernel():
    sigma = 0.01
    m = model_of([[0, 0, 0], [0.5, 0.5, 0.5], [1, 1, 1]], [1, 2, 3], sigma)
    label, post = classify(m, [0.5, 0.5, 0.5])
    assert label is A2
    assert post[A2] > 0.99


def test_classify_tie_goes_to_least_severe():
    m = model_of([[0, 0, 0], [0.5, 5.0, 0.0], [1, 0, 0]], [1, 2, 3], 0.1)
    label, post = classify(m, [0.5, 0, 0])
    assert post[A1] == post[A3]
    assert label is A1


def test_classify_matches_brute_force_ten_patterns():
    rng = np.random.default_rng(10)
    x, y = random_instance(rng, 10)
    m = model_of(x, y, 0.3)
    for q in rng.random((25, 3)):
        label, post = classify(m, q)
        want, want_post = brute_classify(x.tolist(), y.tolist(), q.tolist(), 0.3)
        assert int(label) == want
        assert [post[a] for a in (A1, A2, A3)] == pytest.approx(want_post, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 100), st.floats(0.01, 100))
def test_classify_invariant_to_uniform_prior_and_cost_scaling(seed, a, b):
    rng = np.random.default_rng(seed)
    x, y = random_instance(rng, 9)
    priors = tuple(rng.uniform(0.2, 2.0, 3))
    costs = tuple(rng.uniform(0.2, 2.0, 3))
    base = model_of(x, y, 0.25, priors=priors, costs=costs)
    scaled = model_of(x, y, 0.25, priors=tuple(a * p for p in priors), costs=tuple(b * c for c in costs))
    q = rng.random((20, 3))
    l1, p1 = classify_many(base, q)
    l2, p2 = classify_many(scaled, q)
    assert l1.tolist() == l2.tolist()
    np.testing.assert_allclose(p1, p2, atol=1e-12)
    np.testing.assert_allclose(p1.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(p1 >= 0)


def test_priors_shift_the_decision():
    m = model_of([[0, 0, 0], [1, 0, 0], [5, 5, 5]], [1, 2, 3], 0.5)
    assert classify(m, [0.5, 0, 0])[0] is A1
    m = model_of([[0, 0, 0], [1, 0, 0], [5, 5, 5]], [1, 2, 3], 0.5, priors=(1.0, 2.0, 1.0))
    assert classify(m, [0.5, 0, 0])[0] is A2


def test_tiny_sigma_behaves_like_nearest_neighbour():
    rng = np.random.default_rng(3)
    x, y = random_instance(rng, 30)
    m = model_of(x, y, 1e-6)
    for q in rng.random((200, 3)):
        d = ((x - q) ** 2).sum(axis=1)
        order = np.argsort(d)
        if d[order[0]] == d[order[1]]:
            continue
        assert int(classify(m, q)[0]) == y[order[0]]


def test_model_invariants():
    with pytest.raises(ClassifierError, match="missing"):
        model_of([[0, 0, 0], [1, 1, 1]], [1, 2], 0.1)
    with pytest.raises(ClassifierError, match="sigma"):
        model_of([[0, 0, 0], [1, 1, 1], [2, 2, 2]], [1, 2, 3], 0.0)
    with pytest.raises(ClassifierError, match="positive"):
        model_of([[0, 0, 0], [1, 1, 1], [2, 2, 2]], [1, 2, 3], 0.1, priors=(1, 0, 1))


# --------------------------------------------------------------------------
# leave-one-out


def test_jackknife_separable_clusters():
    rng = np.random.default_rng(0)
    centres = np.array([[0.1, 0.1, 0.1], [0.5, 0.5, 0.5], [0.9, 0.9, 0.9]])
    x = np.concatenate([c + 0.01 * rng.standard_normal((10, 3)) for c in centres])
    y = np.repeat([1, 2, 3], 10)
    assert jackknife_accuracy(x, y, 0.02) == 1.0


def test_jackknife_identical_points_is_one_third():
    # every left-out point sees equal densities and the tie picks A1,
    # so only the two A1 points are right: 2 / 6
    x = np.full((6, 3), 0.5)
    y = np.array([1, 1, 2, 2, 3, 3])
    assert jackknife_accuracy(x, y, 0.1) == pytest.approx(1 / 3, abs=1e-15)
    correct = sum(brute_classify(np.delete(x, i, 0).tolist(), np.delete(y, i).tolist(), x[i].tolist(), 0.1)[0] == y[i] for i in range(6))
    assert correct == 2


def test_jackknife_small_sigma_equals_1nn():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        x, y = random_instance(rng, 30)
        want = loo_nearest_neighbour_accuracy(x.tolist(), y.tolist())
        assert jackknife_accuracy(x, y, 1e-6) == want


def test_jackknife_matches_brute_force_leave_one_out():
    rng = np.random.default_rng(42)
    x, y = random_instance(rng, 12)
    y[:6] = [1, 1, 2, 2, 3, 3]
    for sigma in (0.05, 0.2, 0.8):
        correct = sum(
            brute_classify(np.delete(x, i, 0).tolist(), np.delete(y, i).tolist(), x[i].tolist(), sigma)[0] == y[i]
            for i in range(len(y))
        )
        assert jackknife_accuracy(x, y, sigma) == correct / len(y)


def test_jackknife_needs_two_per_class():
    x = np.random.default_rng(0).random((4, 3))
    with pytest.raises(ClassifierError, match="single pattern"):
        jackknife_accuracy(x, np.array([1, 1, 2, 3]), 0.1)


def test_coarse_grid():
    g = coarse_grid()
    assert g[0] == 1 and g[-1] == 1280
    assert len(g) == 20
    assert all(a < b for a, b in zip(g, g[1:]))


def test_select_sigma_argmax_and_multiple_of_step():
    rng = np.random.default_rng(5)
    centres = np.array([[0.2, 0.2, 0.5], [0.5, 0.6, 0.5], [0.8, 0.3, 0.5]])
    x = np.concatenate([c + 0.08 * rng.standard_normal((15, 3)) for c in centres])
    y = np.repeat([1, 2, 3], 15)
    trace = {}
    sigma, acc = select_sigma(x, y, trace=trace)
    assert acc >= jackknife_accuracy(x, y, SIGMA_STEP)
    assert acc >= jackknife_accuracy(x, y, 1.0)
    assert acc == max(trace.values())
    assert sigma == min(s for s, a in trace.items() if a == acc)
    k = sigma / SIGMA_STEP
    assert k == round(k) and k >= 1
    assert acc == jackknife_accuracy(x, y, sigma)


# --------------------------------------------------------------------------
# training, evaluation, serialization


@pytest.fixture(scope="module")
def trained():
    log = synth_route([(A1, 300), (A2, 300), (A3, 300)], seed=9)
    return log, train(log, FeatureConfig(Variant.STD_YZ_V, 29))


def test_train_produces_accurate_model(trained):
    _, model = trained
    assert model.loo_accuracy >= 0.95
    assert model.patterns.min() >= 0.0 and model.patterns.max() <= 1.0
    assert (model.sigma / SIGMA_STEP) == round(model.sigma / SIGMA_STEP)


def test_train_missing_class():
    log = synth_route([(A1, 100), (A2, 100)], seed=0)
    with pytest.raises(ClassifierError, match="A3"):
        train(log, FeatureConfig(Variant.STD_YZ_V, 29))


def test_train_no_features():
    log = synth_route([(A1, 10), (A2, 5), (A3, 5)], seed=0)
    with pytest.raises(ClassifierError, match="no features"):
        train(log, FeatureConfig(Variant.STD_YZ_V, 29))


def test_train_untagged_rejected():
    log = synth_route([(A1, 50)], seed=0)
    untagged = log.__class__(log.samples)
    with pytest.raises(ClassifierError, match="tagged"):
        train(untagged, RAW)


def test_train_is_bit_identical():
    log = synth_route([(A1, 80), (A2, 80), (A3, 80)], seed=4)
    cfg = FeatureConfig(Variant.STD_YZ_V, 9)
    assert dumps_model(train(log, cfg)) == dumps_model(train(log, cfg))


def test_model_round_trip(trained):
    _, model = trained
    back = loads_model(dumps_model(model))
    assert back.sigma == model.sigma and back.cfg == model.cfg
    np.testing.assert_array_equal(back.patterns, model.patterns)
    q = np.random.default_rng(1).uniform(-0.2, 1.5, (1000, 3)) * (model.ranges.hi - model.ranges.lo) + model.ranges.lo
    l1, p1 = classify_many(model, q)
    l2, p2 = classify_many(back, q)
    assert l1.tolist() == l2.tolist()
    np.testing.assert_array_equal(p1, p2)


def test_model_file_rejects_other_documents():
    with pytest.raises(ClassifierError):
        loads_model('{"format": "something"}')


def test_confusion_matrix_basics():
    cm = ConfusionMatrix.from_labels([1, 2, 3], [1, 2, 2])
    assert np.trace(cm.counts) == 2
    assert cm.accuracy == pytest.approx(2 / 3)
    assert "66.67%" in cm.render()
    perfect = ConfusionMatrix.from_labels([1, 1, 2, 3], [1, 1, 2, 3])
    assert perfect.accuracy == 1.0
    assert perfect.counts[~np.eye(3, dtype=bool)].sum() == 0
    assert perfect.counts.sum(axis=1).tolist() == [2, 1, 1]


def test_confusion_render_layout():
    cm = ConfusionMatrix(np.array([[411, 14, 0], [13, 330, 1], [0, 1, 288]]))
    text = cm.render(0.0125)
    lines = text.splitlines()
    assert lines[0].startswith("Tagged Mobility Area")
    assert lines[1].startswith("A1 (425)") and "411 (96.71%)" in lines[1]
    assert lines[2].startswith("A2 (344)") and lines[3].startswith("A3 (289)")
    assert lines[1].rstrip().endswith(f"{100 * 1029 / 1058:.2f}%")
    assert lines[-1] == "Sphere of influence equal to 0.0125."


def test_resubstitution_beats_jackknife(trained):
    log, model = trained
    cm, _ = evaluate(model, labelled_features([log], model.cfg))
    assert cm.accuracy >= model.loo_accuracy


def test_std_beats_raw_on_same_log(trained):
    log, std_model = trained
    raw_model = train(log, FeatureConfig(Variant.RAW_YZ_V))
    assert std_model.loo_accuracy >= raw_model.loo_accuracy
    std_cm, _ = evaluate(std_model, labelled_features([log], std_model.cfg))
    raw_cm, _ = evaluate(raw_model, labelled_features([log], raw_model.cfg))
    assert std_cm.accuracy >= raw_cm.accuracy


def test_classify_trip_labels_every_sample(trained):
    _, model = trained
    log = synth_route([(A1, 60), (A3, 60)], seed=77)
    trip, centers, assigned = classify_trip(model, log)
    assert len(trip.labels) == len(log)
    assert len(centers) == 120 - 28
    for c, a in zip(centers, assigned):
        assert trip.labels[c] == a
    assert all(lab == trip.labels[14] for lab in trip.labels[:14])
    assert all(lab == trip.labels[-15] for lab in trip.labels[-14:])


def test_kernel_density_oracle_agrees_with_class_density():
    rng = np.random.default_rng(8)
    x, y = random_instance(rng, 10)
    m = model_of(x, y, 0.2)
    q = rng.random(3)
    for k in (A1, A2, A3):
        assert class_density(m, q, k) == pytest.approx(kernel_density(x.tolist(), y.tolist(), q.tolist(), int(k), 0.2), rel=1e-13)
