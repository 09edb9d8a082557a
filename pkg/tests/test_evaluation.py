import json

import numpy as np
import pytest
import torch
from hypothesis import given, settings, strategies as st

from cdgan.data import mask_of
from cdgan.errors import InputError
from cdgan.evaluation import (
    EvalConfig,
    build_cases,
    color_adoption,
    diversity,
    evaluate,
    shape_iou,
)
from cdgan.networks import build_bundle

from conftest import TINY_ARCH


# ---------------------------------------------------------------------------
# Reference translators (hand-coded, independent of the model stack)


def recoloring_oracle(truth, background, tol=0.25):
    """Paint x_A's foreground with x_B's measured foreground color."""

    def fn(x_a_batch, x_b_batch):
        out = x_a_batch.clone()
        for k in range(out.shape[0]):
            mask_a = mask_of(x_a_batch[k], background, tol)
            mask_b = mask_of(x_b_batch[k], background, tol)
            color = x_b_batch[k][:, torch.from_numpy(mask_b)].mean(dim=1)
            m = torch.from_numpy(mask_a)
            for c in range(3):
                out[k, c][m] = color[c]
        return out

    return fn


def identity_translator(x_a_batch, x_b_batch):
    return x_a_batch.clone()


def constant_background_translator(background):
    def fn(x_a_batch, x_b_batch):
        bg = torch.tensor(background).reshape(1, 3, 1, 1)
        return bg.expand_as(x_a_batch).clone()

    return fn


# ---------------------------------------------------------------------------
# shape_iou


def square_mask(n, x0, y0, side):
    m = np.zeros((n, n), dtype=bool)
    m[y0:y0 + side, x0:x0 + side] = True
    return m


def test_iou_identical_masks():
    m = square_mask(16, 2, 2, 6)
    assert shape_iou(m, m) == 1.0


def test_iou_disjoint_masks():
    assert shape_iou(square_mask(16, 0, 0, 4), square_mask(16, 8, 8, 4)) == 0.0


def test_iou_half_overlap_is_one_third():
    # two 4x8 rectangles sharing half their area
    a = np.zeros((16, 16), dtype=bool)
    b = np.zeros((16, 16), dtype=bool)
    a[0:8, 0:4] = True
    b[4:12, 0:4] = True
    assert shape_iou(a, b) == pytest.approx(1 / 3)


def test_iou_empty_convention_and_errors():
    empty = np.zeros((8, 8), dtype=bool)
    assert shape_iou(empty, empty) == 1.0
    assert shape_iou(empty, square_mask(8, 1, 1, 2)) == 0.0
    with pytest.raises(InputError):
        shape_iou(empty, np.zeros((4, 4), dtype=bool))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_iou_symmetric_and_one_iff_equal(seed):
    rng = np.random.default_rng(seed)
    a = rng.random((8, 8)) > 0.5
    b = rng.random((8, 8)) > 0.5
    assert shape_iou(a, b) == shape_iou(b, a)
    assert (shape_iou(a, b) == 1.0) == np.array_equal(a, b)


# ---------------------------------------------------------------------------
# color_adoption


def flat_shape_image(n, color, background, x0=4, side=6):
    img = torch.tensor(background).reshape(3, 1, 1).expand(3, n, n).clone()
    img[:, x0:x0 + side, x0:x0 + side] = torch.tensor(color).reshape(3, 1, 1)
    return img


BG = (1.0, 1.0, 1.0)
RED = (1.0, -1.0, -1.0)
GREEN = (-1.0, 1.0, -1.0)


def test_color_adoption_cases():
    x_a = flat_shape_image(16, RED, BG)
    x_b = flat_shape_image(16, GREEN, BG)
    took_b = flat_shape_image(16, GREEN, BG, x0=2)
    kept_a = flat_shape_image(16, RED, BG, x0=2)
    assert color_adoption(took_b, x_a, x_b, BG) == (True, False)
    assert color_adoption(kept_a, x_a, x_b, BG) == (False, False)


def test_color_adoption_tie_is_not_adopted():
    x_a = flat_shape_image(16, RED, BG)
    x_b = flat_shape_image(16, GREEN, BG)
    midpoint = tuple((a + b) / 2 for a, b in zip(RED, GREEN))
    halfway = flat_shape_image(16, midpoint, BG)
    assert color_adoption(halfway, x_a, x_b, BG) == (False, False)


def test_color_adoption_empty_foreground_flagged():
    x_a = flat_shape_image(16, RED, BG)
    x_b = flat_shape_image(16, GREEN, BG)
    blank = flat_shape_image(16, BG, BG)
    assert color_adoption(blank, x_a, x_b, BG) == (False, True)


# ---------------------------------------------------------------------------
# diversity


def test_diversity_identical_conditionals_zero(small_synth):
    ds_a, ds_b, truth, spec, _ = small_synth
    bundle = build_bundle(TINY_ARCH, seed=0)
    conds = [ds_b.tensors[0]] * 3
    value = diversity(bundle, ds_a.tensors[0], conds, spec.background)
    assert value == pytest.approx(0.0, abs=1e-6)


def test_diversity_black_white_extremes():
    def stub(x_a_batch, x_b_batch):
        out = []
        for k in range(x_b_batch.shape[0]):
            color = (-1.0, -1.0, -1.0) if k == 0 else (1.0, 1.0, 1.0)
            out.append(flat_shape_image(16, color, (0.0, 0.0, 0.0)))
        return torch.stack(out)

    x_a = flat_shape_image(16, RED, (0.0, 0.0, 0.0))
    conds = [x_a, x_a]
    value = diversity(stub, x_a, conds, background=(0.0, 0.0, 0.0))
    assert value == pytest.approx(2 * np.sqrt(3), rel=1e-6)


def test_diversity_untrained_bundle_finite(small_synth):
    ds_a, ds_b, truth, spec, _ = small_synth
    bundle = build_bundle(TINY_ARCH, seed=3)
    conds = [ds_b.tensors[i] for i in range(4)]
    value = diversity(bundle, ds_a.tensors[0], conds, spec.background)
    assert np.isfinite(value) and value >= 0


def test_diversity_order_invariant(small_synth):
    ds_a, ds_b, truth, spec, _ = small_synth
    bundle = build_bundle(TINY_ARCH, seed=3)
    conds = [ds_b.tensors[i] for i in range(4)]
    v1 = diversity(bundle, ds_a.tensors[0], conds, spec.background)
    v2 = diversity(bundle, ds_a.tensors[0], conds[::-1], spec.background)
    assert v1 == pytest.approx(v2, rel=1e-5)


def test_diversity_needs_two_conditionals(small_synth):
    ds_a, ds_b, _, spec, _ = small_synth
    bundle = build_bundle(TINY_ARCH, seed=0)
    with pytest.raises(InputError):
        diversity(bundle, ds_a.tensors[0], [ds_b.tensors[0]], spec.background)


# ---------------------------------------------------------------------------
# evaluate


def eval_setup(small_synth):
    ds_a, ds_b, truth, spec, _ = small_synth
    config = EvalConfig(background=spec.background, n_conditionals=3)
    cases = build_cases(ds_a, ds_b, truth, 3)
    return cases, config, truth, spec


def test_evaluate_recoloring_oracle_perfect(small_synth, tmp_path):
    cases, config, truth, spec = eval_setup(small_synth)
    oracle = recoloring_oracle(truth, spec.background)
    report = evaluate(oracle, cases, config, report_path=tmp_path / "report.json",
                      checkpoint_id="oracle")
    assert report.shape_iou_mean >= 0.98
    assert report.color_adoption_rate == 1.0
    payload = json.loads((tmp_path / "report.json").read_text())
    assert payload["checkpoint_id"] == "oracle"
    assert payload["n_cases"] == len(cases)


def test_evaluate_identity_translator_never_adopts(small_synth):
    cases, config, _, _ = eval_setup(small_synth)
    report = evaluate(identity_translator, cases, config)
    assert report.color_adoption_rate == 0.0
    assert report.shape_iou_mean >= 0.98  # shape untouched


def test_evaluate_constant_translator_iou_matches_enumeration(small_synth):
    cases, config, _, spec = eval_setup(small_synth)
    report = evaluate(constant_background_translator(spec.background), cases, config)
    assert report.shape_iou_mean == pytest.approx(0.0, abs=1e-12)
    # oracle expectation: all-foreground translator scores the gt area fraction
    full = lambda xa, xb: torch.zeros_like(xa)  # black, far from white bg
    expected = np.mean([
        case.mask_A.sum() / case.mask_A.size for case in cases
    ])
    report_full = evaluate(full, cases, config)
    assert report_full.shape_iou_mean == pytest.approx(expected, rel=1e-6)


def test_oracle_upper_bounds_untrained_model(small_synth):
    cases, config, truth, spec = eval_setup(small_synth)
    oracle_report = evaluate(recoloring_oracle(truth, spec.background), cases, config)
    model_report = evaluate(build_bundle(TINY_ARCH, seed=0), cases, config)
    assert oracle_report.shape_iou_mean >= model_report.shape_iou_mean
    assert oracle_report.color_adoption_rate >= model_report.color_adoption_rate


def test_evaluate_rejects_empty_cases():
    with pytest.raises(InputError):
        evaluate(identity_translator, [], EvalConfig())
