import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from communet.losses import (
    BCE_EPS,
    SSIM_C1,
    BerReport,
    ber,
    bce_loss,
    hard_bits,
    loss_by_name,
    mse_and_psnr,
    mse_loss,
    nve,
    ssim,
    ssim_components,
    ssim_loss,
)
from communet.nn import Tape, Tensor

from gradcheck import check

TOL = 1e-4


def random_mask(rng, shape, keep=0.7):
    m = rng.random(shape) < keep
    m.reshape(-1)[0] = True
    return m


def loss_value(fn, p, u, m):
    with Tape():
        return float(fn(Tensor(p), u, m).data)


# ---- BCE --------------------------------------------------------------------

def test_bce_half_probability_is_ln2():
    m = np.ones((1, 1, 4, 4), bool)
    u = np.random.default_rng(0).integers(0, 2, m.shape)
    assert loss_value(bce_loss, np.full(m.shape, 0.5), u, m) == pytest.approx(0.693147, abs=1e-6)


def test_bce_matches_direct_formula():
    rng = np.random.default_rng(1)
    p = rng.uniform(0.01, 0.99, (3, 1, 4, 4))
    u = rng.integers(0, 2, p.shape).astype(float)
    m = random_mask(rng, p.shape)
    want = -np.mean([ui * math.log(pi) + (1 - ui) * math.log(1 - pi) for pi, ui in zip(p[m], u[m])])
    assert loss_value(bce_loss, p, u, m) == pytest.approx(want, rel=1e-12)


def test_bce_perfect_prediction_stays_finite_and_small():
    u = np.array([[[[1.0, 0.0], [0.0, 1.0]]]])
    m = np.ones(u.shape, bool)
    value = loss_value(bce_loss, u.copy(), u, m)
    assert math.isfinite(value)
    assert 0 < value <= -math.log(1 - BCE_EPS) + 1e-15


def test_bce_confidently_wrong_is_clamped():
    u = np.ones((1, 1, 2, 2))
    value = loss_value(bce_loss, np.zeros(u.shape), u, np.ones(u.shape, bool))
    assert value == pytest.approx(-math.log(BCE_EPS), rel=1e-9)


@pytest.mark.parametrize("seed", range(20))
def test_bce_gradient(seed):
    rng = np.random.default_rng(seed)
    # log is steep near 0 and 1; h=1e-3 truncation error stays small inside [0.15, 0.85]
    p = rng.uniform(0.15, 0.85, (2, 1, 4, 4))
    u = rng.integers(0, 2, p.shape).astype(float)
    m = random_mask(rng, p.shape)
    assert check(lambda t: bce_loss(t, u, m), [p], seed) < TOL


# ---- MSE / PSNR -------------------------------------------------------------

@pytest.mark.parametrize("seed", range(20))
def test_mse_gradient(seed):
    rng = np.random.default_rng(100 + seed)
    p = rng.uniform(0, 1, (2, 1, 4, 4))
    u = rng.integers(0, 2, p.shape).astype(float)
    m = random_mask(rng, p.shape)
    assert check(lambda t: mse_loss(t, u, m), [p], seed) < TOL


def test_mse_identity_and_psnr_sentinel():
    f = np.random.default_rng(2).random((1, 1, 4, 4))
    m = np.ones(f.shape, bool)
    assert loss_value(mse_loss, f, f, m) == 0.0
    assert mse_and_psnr(f, f, m) == (0.0, math.inf)


def test_psnr_of_quarter_mse():
    f = np.zeros((1, 1, 2, 2))
    g = np.full(f.shape, 0.5)
    mse, psnr = mse_and_psnr(f, g, np.ones(f.shape, bool))
    assert mse == 0.25
    assert abs(psnr - 6.0206) < 1e-4
    assert abs(psnr - 10 * math.log10(4)) < 1e-12


# ---- SSIM -------------------------------------------------------------------

def ssim_oracle(f, g):
    """Literal luminance * contrast * structure on flat vectors."""
    f, g = np.asarray(f, float), np.asarray(g, float)
    c1, c2 = SSIM_C1, (0.03) ** 2
    c3 = c2 / 2
    mf, mg = f.mean(), g.mean()
    sf, sg = math.sqrt(((f - mf) ** 2).mean()), math.sqrt(((g - mg) ** 2).mean())
    cov = ((f - mf) * (g - mg)).mean()
    lum = (2 * mf * mg + c1) / (mf * mf + mg * mg + c1)
    con = (2 * sf * sg + c2) / (sf * sf + sg * sg + c2)
    struct = (cov + c3) / (sf * sg + c3)
    return lum * con * struct


def test_ssim_self_is_one():
    rng = np.random.default_rng(3)
    for _ in range(10):
        f = rng.random((1, 1, 8, 8))
        m = random_mask(rng, f.shape)
        assert abs(ssim(f, f, m) - 1.0) < 1e-9


def test_ssim_constant_images_luminance():
    f = np.ones((1, 1, 4, 4))
    g = np.zeros_like(f)
    lum, con, struct = ssim_components(f, g, np.ones(f.shape, bool))
    assert lum[0] == pytest.approx(SSIM_C1 / (1 + SSIM_C1), rel=1e-12)
    assert con[0] == 1.0 and struct[0] == 1.0


def test_ssim_matches_oracle_and_is_symmetric():
    rng = np.random.default_rng(4)
    for _ in range(20):
        f, g = rng.random((1, 1, 4, 4)), rng.random((1, 1, 4, 4))
        m = random_mask(rng, f.shape)
        assert ssim(f, g, m) == pytest.approx(ssim_oracle(f[m], g[m]), rel=1e-12)
        assert ssim(f, g, m) == pytest.approx(ssim(g, f, m), rel=1e-12)


def test_ssim_loss_equals_one_minus_batch_mean():
    rng = np.random.default_rng(5)
    f = rng.random((3, 1, 4, 4))
    u = rng.integers(0, 2, f.shape).astype(float)
    m = random_mask(rng, f.shape)
    want = 1 - np.mean([ssim_oracle(f[i][m[i]], u[i][m[i]]) for i in range(3)])
    assert loss_value(ssim_loss, f, u, m) == pytest.approx(want, rel=1e-10)


@pytest.mark.parametrize("seed", range(20))
def test_ssim_gradient(seed):
    rng = np.random.default_rng(200 + seed)
    p = rng.uniform(0, 1, (2, 1, 4, 4))
    u = rng.integers(0, 2, p.shape).astype(float)
    m = random_mask(rng, p.shape)
    assert check(lambda t: ssim_loss(t, u, m), [p], seed) < TOL


def test_loss_lookup():
    assert loss_by_name("bce") is bce_loss
    with pytest.raises(ValueError, match="use mse"):
        loss_by_name("psnr")
    with pytest.raises(ValueError, match="unknown loss"):
        loss_by_name("hinge")


def test_empty_mask_rejected():
    p = np.full((1, 1, 2, 2), 0.5)
    with pytest.raises(ValueError, match="empty"):
        bce_loss(Tensor(p), p, np.zeros(p.shape, bool))


# ---- BER / NVE --------------------------------------------------------------

def test_ber_worked_example():
    rep = ber([0.9, 0.2, 0.6], [1, 0, 0])
    assert rep == BerReport(3, 1)
    assert rep.ber == 1 / 3


def test_half_decodes_to_zero():
    assert hard_bits([0.5, 0.5000001]).tolist() == [0, 1]


def test_ber_length_mismatch():
    with pytest.raises(ValueError, match="length mismatch"):
        ber([0.1, 0.2], [0])


def test_ber_report_merge():
    assert BerReport(10, 1).merge(BerReport(30, 3)) == BerReport(40, 4)


@given(st.lists(st.floats(1e-6, 0.5), min_size=1, max_size=6))
def test_nve_of_identical_curves_is_one(bers):
    assert nve(bers, bers, 10**5) == 1.0


def test_nve_examples():
    assert nve([0.02, 0.01], [0.01, 0.01], 10**5) == 1.5
    # a zero Viterbi BER counts as one error in the whole measurement
    assert nve([1e-4], [0.0], 10**5) == pytest.approx(10.0, rel=1e-12)
    assert nve([1e-4, 2e-4], [0.0, 1e-4], [10**4, 10**5]) == pytest.approx(1.5, rel=1e-12)
    with pytest.raises(ValueError):
        nve([0.1], [0.1, 0.2], 100)


# ---- mask discipline --------------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([np.nan, np.inf, -1e30, 7.0]))
def test_padding_sentinels_never_leak(seed, sentinel):
    rng = np.random.default_rng(seed)
    p = rng.uniform(0.05, 0.95, (2, 1, 4, 4))
    u = rng.integers(0, 2, p.shape).astype(float)
    m = random_mask(rng, p.shape)
    pp, uu = p.copy(), u.copy()
    pp[~m] = sentinel
    uu[~m] = sentinel
    for fn in (bce_loss, mse_loss, ssim_loss):
        assert loss_value(fn, pp, uu, m) == loss_value(fn, p, u, m)
        with Tape() as tape:
            t = Tensor(pp, requires_grad=True)
            tape.backward(fn(t, uu, m))
        assert np.all(np.isfinite(t.grad)) and np.all(t.grad[~m] == 0)
    assert ssim(pp, uu, m) == ssim(p, u, m)
    assert mse_and_psnr(pp, uu, m) == mse_and_psnr(p, u, m)
