import math

import pytest
import torch
from hypothesis import given, settings, strategies as st

from cdgan.errors import InputError
from cdgan.losses import (
    PROB_EPS,
    dual_di_loss,
    dual_ds_loss,
    dual_image_loss,
    gan_loss,
    generator_gan_objective,
)

probs = st.floats(0.0, 1.0, allow_nan=False)


def t(*values):
    return torch.tensor(values, dtype=torch.float64)


def test_gan_loss_at_half():
    value = gan_loss(t(0.5), t(0.5), t(0.5), t(0.5))
    assert float(value) == pytest.approx(4 * math.log(0.5), abs=1e-9)


def test_gan_loss_perfect_discriminator_limit():
    value = float(gan_loss(t(1 - PROB_EPS), t(PROB_EPS), t(1 - PROB_EPS), t(PROB_EPS)))
    assert -4 * PROB_EPS * 1.01 < value < 0


def test_gan_loss_clamps_exact_zero_one():
    value = float(gan_loss(t(0.0), t(1.0), t(0.0), t(1.0)))
    assert math.isfinite(value)
    assert value == pytest.approx(4 * math.log(PROB_EPS), rel=1e-6)


def test_gan_loss_batch_mean():
    value = gan_loss(t(0.5, 0.5), t(0.5, 0.5), t(0.5, 0.5), t(0.5, 0.5))
    assert float(value) == pytest.approx(4 * math.log(0.5), abs=1e-6)
    with pytest.raises(InputError):
        gan_loss(t(0.5, 0.5), t(0.5), t(0.5), t(0.5))


@settings(max_examples=50, deadline=None)
@given(probs, probs, probs, probs)
def test_gan_loss_monotonicity(pa_r, pa_f, pb_r, pb_f):
    base = float(gan_loss(t(pa_r), t(pa_f), t(pb_r), t(pb_f)))
    d = 1e-3
    up_real = float(gan_loss(t(min(pa_r + d, 1.0)), t(pa_f), t(pb_r), t(pb_f)))
    up_fake = float(gan_loss(t(pa_r), t(min(pa_f + d, 1.0)), t(pb_r), t(pb_f)))
    assert up_real >= base - 1e-9
    assert up_fake <= base + 1e-9


def test_generator_objective_forms():
    sat = generator_gan_objective(t(0.3), t(0.7), saturating=True)
    assert float(sat) == pytest.approx(math.log(0.7) + math.log(0.3), rel=1e-6)
    nonsat = generator_gan_objective(t(0.3), t(0.7), saturating=False)
    assert float(nonsat) == pytest.approx(-(math.log(0.3) + math.log(0.7)), rel=1e-6)


def test_dual_image_identity_zero():
    x = torch.randn(2, 3, 4, 4)
    y = torch.randn(2, 3, 4, 4)
    assert float(dual_image_loss(x, x, y, y)) == 0.0


def test_dual_image_unit_offset():
    x_a = torch.zeros(2, 3, 4, 4)
    x_hat_a = torch.ones(2, 3, 4, 4)
    x_b = torch.randn(2, 3, 4, 4)
    assert float(dual_image_loss(x_a, x_hat_a, x_b, x_b)) == pytest.approx(1.0)


def test_dual_image_pair_symmetry():
    a, ah = torch.randn(2, 3, 4, 4), torch.randn(2, 3, 4, 4)
    b, bh = torch.randn(2, 3, 4, 4), torch.randn(2, 3, 4, 4)
    assert float(dual_image_loss(a, ah, b, bh)) == pytest.approx(
        float(dual_image_loss(b, bh, a, ah)), rel=1e-6
    )


def test_dual_image_shape_mismatch():
    with pytest.raises(InputError):
        dual_image_loss(torch.zeros(1, 3, 4, 4), torch.zeros(1, 3, 8, 8),
                        torch.zeros(1, 3, 4, 4), torch.zeros(1, 3, 4, 4))


def test_dual_di_permutation_invariance():
    g = torch.Generator().manual_seed(0)
    a = torch.randn(2, 4, 2, 2, generator=g)
    ah = torch.randn(2, 4, 2, 2, generator=g)
    b = torch.randn(2, 4, 2, 2, generator=g)
    base = float(dual_di_loss(a, ah, b, b))
    perm = torch.randperm(a.numel(), generator=g)
    a2 = a.reshape(-1)[perm].reshape(a.shape)
    ah2 = ah.reshape(-1)[perm].reshape(a.shape)
    assert float(dual_di_loss(a2, ah2, b, b)) == pytest.approx(base, rel=1e-6)


def test_dual_di_unit_offset():
    a = torch.zeros(1, 4, 2, 2)
    assert float(dual_di_loss(a, a + 1, a, a)) == pytest.approx(1.0)


def test_dual_ds_modes():
    a, ah = torch.zeros(2, 4), torch.zeros(2, 4)
    b, bh = torch.zeros(2, 4), torch.zeros(2, 4)
    assert float(dual_ds_loss(a, ah, b, bh, "symmetric")) == 0.0
    assert float(dual_ds_loss(a, ah, b, bh, "asymmetric_A_to_B")) == 0.0


def test_dual_ds_asymmetric_ignores_a_side():
    g = torch.Generator().manual_seed(1)
    b = torch.randn(2, 4, generator=g)
    bh = torch.randn(2, 4, generator=g)
    base = float(dual_ds_loss(torch.zeros(2, 4), torch.zeros(2, 4), b, bh,
                              "asymmetric_A_to_B"))
    moved = float(dual_ds_loss(torch.randn(2, 4, generator=g) * 100,
                               torch.randn(2, 4, generator=g) * 100, b, bh,
                               "asymmetric_A_to_B"))
    assert base == pytest.approx(moved, rel=1e-7)


def test_dual_ds_additivity():
    a = torch.zeros(1, 10)
    # A term alone 0.3, B term alone 0.5
    ah = torch.full((1, 10), math.sqrt(0.3))
    bh = torch.full((1, 10), math.sqrt(0.5))
    total = float(dual_ds_loss(a, ah, a, bh, "symmetric"))
    assert total == pytest.approx(0.8, rel=1e-5)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_dual_losses_nonnegative_and_zero_iff_equal(seed):
    g = torch.Generator().manual_seed(seed)
    a = torch.randn(2, 3, 2, 2, generator=g)
    ah = torch.randn(2, 3, 2, 2, generator=g)
    b = torch.randn(2, 3, 2, 2, generator=g)
    value = float(dual_image_loss(a, ah, b, b))
    assert value >= 0.0
    assert (value == 0.0) == torch.equal(a, ah)
