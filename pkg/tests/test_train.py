import math
from dataclasses import replace

import numpy as np
import pytest

from conftest import planted_examples
from oracles import brute_force_decode, gamma_loss, naive_phi, two_pass_mean_std
from vowelseg.decode import DecoderConstraints, LossParams, decode
from vowelseg.featfunc import STD_FLOOR, DurationPriorParams, Normalization, build_layout
from vowelseg.train import (TrainConfig, TrainingExample, check_admissible, dlm_step,
                            fit_normalization, mean_loss, split_dev, train_dlm, train_full,
                            train_pa_structured)

PRIORS = DurationPriorParams(30.0, 80.0, 11.25, 80 / 30)
LAYOUT = build_layout(False)


@pytest.fixture(scope="module")
def data():
    return planted_examples(np.random.default_rng(5), 24)


# -- normalization --------------------------------------------------------------------

def test_fit_normalization_matches_two_pass(data):
    norm = fit_normalization(data, LAYOUT, PRIORS)
    phis = np.array([naive_phi(ex.seq.frames, ex.target, LAYOUT, PRIORS) for ex in data])
    mean, std = two_pass_mean_std(phis)
    np.testing.assert_allclose(norm.mean, mean, atol=1e-10)
    np.testing.assert_allclose(norm.std, np.maximum(std, STD_FLOOR), atol=1e-10)


def test_std_floor_for_identical_examples(data):
    norm = fit_normalization([data[0], data[0], data[0]], LAYOUT, PRIORS)
    assert np.all(norm.std == STD_FLOOR)


def test_normalization_needs_two_examples(data):
    with pytest.raises(ValueError):
        fit_normalization(data[:1], LAYOUT, PRIORS)


# -- PA ---------------------------------------------------------------------------------

def test_pa_no_update_when_loss_always_zero(data):
    cfg = TrainConfig(tau_b=1000, tau_e=1000, pa_epochs=3)
    norm = fit_normalization(data, LAYOUT, PRIORS)
    assert not np.any(train_pa_structured(data, LAYOUT, PRIORS, norm, cfg))


def _reference_pa(data, norm, cfg, order):
    """Cost-augmented PA-I by brute force; returns every iterate."""
    w = np.zeros(LAYOUT.n)
    snaps = []
    tau = (cfg.tau_b, cfg.tau_e)
    for i in order:
        ex = data[i]
        pred, _ = brute_force_decode(ex.seq.frames, LAYOUT, PRIORS, cfg.constraints, w,
                                     np.zeros(LAYOUT.n), norm.std, ex.target, 1.0, tau)
        g = gamma_loss(ex.target, pred, *tau)
        if g > 0:
            diff = (naive_phi(ex.seq.frames, ex.target, LAYOUT, PRIORS)
                    - naive_phi(ex.seq.frames, pred, LAYOUT, PRIORS)) / norm.std
            hinge = -w @ diff + math.sqrt(g)
            if hinge > 0:
                w = w + min(cfg.pa_C, hinge / (diff @ diff)) * diff
        snaps.append(w.copy())
    return snaps


def test_pa_average_matches_reference_loop(data):
    small = data[:3]
    cfg = TrainConfig(pa_epochs=1, seed=3)
    norm = fit_normalization(small, LAYOUT, PRIORS)
    order = np.random.default_rng(cfg.seed).permutation(len(small))
    snaps = _reference_pa(small, norm, cfg, order)
    got = train_pa_structured(small, LAYOUT, PRIORS, norm, cfg)
    np.testing.assert_allclose(got, np.mean(snaps, axis=0), rtol=1e-9, atol=1e-12)


def test_pa_single_step_closed_form(data):
    ex = data[0]
    cfg = TrainConfig(pa_epochs=1, pa_C=1e9)
    norm = Normalization.identity(LAYOUT.n)
    w = train_pa_structured([ex], LAYOUT, PRIORS, norm, cfg)
    # with w = 0 the cost-augmented argmax is the loss-maximizing pair
    pred, _ = brute_force_decode(ex.seq.frames, LAYOUT, PRIORS, cfg.constraints,
                                 np.zeros(LAYOUT.n), 0.0, 1.0, ex.target, 1.0, (1, 2))
    diff = naive_phi(ex.seq.frames, ex.target, LAYOUT, PRIORS) - \
        naive_phi(ex.seq.frames, pred, LAYOUT, PRIORS)
    g = gamma_loss(ex.target, pred, 1, 2)
    np.testing.assert_allclose(w, math.sqrt(g) / (diff @ diff) * diff, rtol=1e-9, atol=1e-13)
    # after the step the margin constraint holds with equality
    assert w @ diff == pytest.approx(math.sqrt(g), rel=1e-9)


def test_pa_debug_assertion_holds(data):
    norm = fit_normalization(data, LAYOUT, PRIORS)
    train_pa_structured(data, LAYOUT, PRIORS, norm, TrainConfig(pa_epochs=2, pa_C=1e6),
                        debug=True)


def test_pa_reduces_training_loss(data):
    norm = fit_normalization(data, LAYOUT, PRIORS)
    w = train_pa_structured(data, LAYOUT, PRIORS, norm, TrainConfig(pa_epochs=5))
    from vowelseg.model import Model
    m0 = Model(np.zeros(LAYOUT.n), LAYOUT, PRIORS, norm)
    m1 = m0.with_weights(w)
    p = LossParams(1, 2)
    assert mean_loss(data, m1, p) < 0.5 * mean_loss(data, m0, p)


# -- DLM ------------------------------------------------------------------------------------

def test_dlm_step_by_hand():
    w = np.array([1.0, -2.0, 0.5])
    a = np.array([0.3, 0.0, 1.0])
    b = np.array([0.1, 0.0, 2.0])
    got = dlm_step(w, a, b, 0.1, -1.36, 4)
    c = 0.1 / (-1.36 * 2.0)
    np.testing.assert_allclose(got, [1.0 + c * 0.2, -2.0, 0.5 + c * -1.0], atol=1e-12)


def test_dlm_step_decays_as_inverse_sqrt():
    w = np.zeros(4)
    d = np.array([1.0, 2.0, -1.0, 0.0])
    s1 = np.linalg.norm(dlm_step(w, d, 0 * d, 0.1, 1.0, 1))
    for t in (4, 9, 100):
        assert np.linalg.norm(dlm_step(w, d, 0 * d, 0.1, 1.0, t)) == pytest.approx(
            s1 / math.sqrt(t), rel=1e-12)


def test_dlm_zero_update_when_prediction_equals_perturbed(data):
    # a tolerance wider than any deviation makes the loss vanish, so the
    # perturbed decode equals the plain one and w never moves
    cfg = TrainConfig(tau_b=1000, tau_e=1000, dlm_iters=30)
    norm = fit_normalization(data, LAYOUT, PRIORS)
    w0 = np.random.default_rng(1).normal(size=LAYOUT.n)
    model = train_dlm(data, LAYOUT, PRIORS, norm, w0, cfg)
    # the returned average of 30 identical iterates differs only by rounding
    np.testing.assert_allclose(model.w, w0, rtol=1e-14, atol=0)


def test_dlm_difference_is_sparse_when_onsets_agree(data):
    ex = data[0]
    t_b, t_e = ex.target
    a = naive_phi(ex.seq.frames, (t_b, t_e), LAYOUT, PRIORS)
    b = naive_phi(ex.seq.frames, (t_b, t_e + 3), LAYOUT, PRIORS)
    same = [i for i, e in enumerate(LAYOUT.entries)
            if e.kind in ("point", "window_diff") and e.anchor == "b"]
    assert same and np.array_equal(a[same], b[same])


def test_dlm_improves_on_pa(data):
    cfg = TrainConfig(pa_epochs=1, dlm_iters=200, seed=2, dev_fraction=0)
    norm = fit_normalization(data, LAYOUT, PRIORS)
    w_pa = train_pa_structured(data, LAYOUT, PRIORS, norm, cfg)
    model = train_dlm(data, LAYOUT, PRIORS, norm, w_pa, cfg)
    p = cfg.loss_params
    assert mean_loss(data, model, p) <= mean_loss(data, model.with_weights(w_pa), p) + 1e-12
    assert np.array_equal(model.w_pa, w_pa)


def test_dlm_reports_progress(data):
    lines = []
    norm = fit_normalization(data, LAYOUT, PRIORS)
    cfg = TrainConfig(dlm_iters=20, report_every=10)
    train_dlm(data[:16], LAYOUT, PRIORS, norm, np.zeros(LAYOUT.n), cfg, dev=data[16:],
              report=lines.append)
    assert len(lines) == 2 and lines[0].startswith("iter=10 dev_loss=")


def test_dlm_rejects_bad_init(data):
    norm = fit_normalization(data, LAYOUT, PRIORS)
    with pytest.raises(ValueError):
        train_dlm(data, LAYOUT, PRIORS, norm, np.zeros(3), TrainConfig())


# -- full pipeline --------------------------------------------------------------------------

def test_train_full_deterministic(data):
    cfg = TrainConfig(pa_epochs=2, dlm_iters=60, seed=9)
    a = train_full(data, cfg).to_bytes()
    b = train_full(data, cfg).to_bytes()
    assert a == b
    assert train_full(data, replace(cfg, seed=10)).to_bytes() != a


def test_train_full_fits_planted_boundaries(data):
    model = train_full(data, TrainConfig(pa_epochs=3, dlm_iters=100))
    devs = [abs(decode(ex.seq, model)[0][k] - ex.target[k]) for ex in data for k in (0, 1)]
    assert np.mean(devs) < 1.0


def test_train_full_empty():
    with pytest.raises(ValueError, match="no training data"):
        train_full([])


def test_inadmissible_target_rejected(data):
    bad = TrainingExample(data[0].seq, (3, 30), "bad")
    with pytest.raises(ValueError, match="bad"):
        check_admissible([bad], DecoderConstraints())


def test_split_dev_disjoint_and_seeded(data):
    tr, dev = split_dev(data, 0.25, 4)
    assert len(dev) == 6 and len(tr) == 18
    assert not {e.id for e in tr} & {e.id for e in dev}
    assert [e.id for e in split_dev(data, 0.25, 4)[1]] == [e.id for e in dev]


@pytest.mark.parametrize("kwargs", [{"eta0": 0}, {"epsilon": 0}, {"pa_C": -1},
                                    {"pa_epochs": -1}, {"dev_fraction": 1.0}])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        TrainConfig(**kwargs)
