"""Mask-aware training losses and evaluation metrics.

Every function takes a validity mask and reads only the masked cells, using
boolean selection (never multiplication) so that NaN or other sentinels in
padding cannot leak into a result.  Image-quality quantities use a unit
peak value because the grids hold bits and probabilities in [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .nn.autograd import Tensor, apply, as_tensor

BCE_EPS = 1e-7
PEAK = 1.0
SSIM_C1 = (0.01 * PEAK) ** 2
SSIM_C2 = (0.03 * PEAK) ** 2
SSIM_C3 = SSIM_C2 / 2

LOSSES = ("bce", "mse", "ssim")


def _bool_mask(mask, shape) -> np.ndarray:
    m = np.broadcast_to(np.asarray(mask, dtype=bool), shape)
    if not m.any():
        raise ValueError("mask is empty")
    return m


def bce_loss(p, target, mask, eps: float = BCE_EPS) -> Tensor:
    """Mean binary cross-entropy (natural log) over masked cells.

    Probabilities are clamped to ``[eps, 1 - eps]``; the gradient is the
    cross-entropy derivative evaluated at the clamped value.
    """
    p = as_tensor(p)
    m = _bool_mask(mask, p.shape)
    u = np.broadcast_to(np.asarray(target, dtype=np.float64), p.shape)[m]
    q = np.clip(p.data[m].astype(np.float64), eps, 1.0 - eps)
    n = q.size
    loss = -np.sum(u * np.log(q) + (1.0 - u) * np.log1p(-q)) / n

    def backward(g):
        grad = np.zeros(p.shape, dtype=p.dtype)
        grad[m] = g * (q - u) / (q * (1.0 - q)) / n
        return (grad,)

    return apply(np.asarray(loss, dtype=p.dtype), (p,), backward)


def mse_loss(p, target, mask) -> Tensor:
    p = as_tensor(p)
    m = _bool_mask(mask, p.shape)
    diff = p.data[m].astype(np.float64) - np.broadcast_to(np.asarray(target, dtype=np.float64), p.shape)[m]
    n = diff.size
    loss = np.dot(diff, diff) / n

    def backward(g):
        grad = np.zeros(p.shape, dtype=p.dtype)
        grad[m] = g * 2.0 * diff / n
        return (grad,)

    return apply(np.asarray(loss, dtype=p.dtype), (p,), backward)


def mse_and_psnr(f, g, mask) -> tuple[float, float]:
    """MSE over masked cells and PSNR in dB at unit peak (``inf`` when MSE is 0)."""
    f, g = np.asarray(f, dtype=np.float64), np.asarray(g, dtype=np.float64)
    if f.shape != g.shape:
        raise ValueError(f"shape mismatch: {f.shape} vs {g.shape}")
    m = _bool_mask(mask, f.shape)
    mse = float(np.mean((f[m] - g[m]) ** 2))
    psnr = math.inf if mse == 0 else 10.0 * math.log10(PEAK**2 / mse)
    return mse, psnr


def _samples(x, m):
    """Split a grid (or batch of grids) into per-sample rows; padding becomes 0."""
    lead = x.shape[0] if x.ndim == 4 else 1
    return np.where(m, x, 0.0).reshape(lead, -1), m.reshape(lead, -1)


def _ssim_stats(f, g, m):
    fs, w = _samples(f, m)
    gs, _ = _samples(g, m)
    n = w.sum(axis=1)
    if np.any(n == 0):
        raise ValueError("mask is empty for at least one sample")
    mu_f = fs.sum(axis=1) / n
    mu_g = gs.sum(axis=1) / n
    df = np.where(w, fs - mu_f[:, None], 0.0)
    dg = np.where(w, gs - mu_g[:, None], 0.0)
    var_f = (df * df).sum(axis=1) / n
    var_g = (dg * dg).sum(axis=1) / n
    cov = (df * dg).sum(axis=1) / n
    return n, mu_f, mu_g, df, dg, var_f, var_g, cov


def ssim_components(f, g, mask) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Luminance, contrast and structure terms from whole-grid statistics.

    Returns arrays with one entry per sample (a single grid gives length 1).
    """
    f, g = np.asarray(f, dtype=np.float64), np.asarray(g, dtype=np.float64)
    if f.shape != g.shape:
        raise ValueError(f"shape mismatch: {f.shape} vs {g.shape}")
    m = _bool_mask(mask, f.shape)
    _, mu_f, mu_g, _, _, var_f, var_g, cov = _ssim_stats(f, g, m)
    sd_f, sd_g = np.sqrt(var_f), np.sqrt(var_g)
    lum = (2 * mu_f * mu_g + SSIM_C1) / (mu_f**2 + mu_g**2 + SSIM_C1)
    con = (2 * sd_f * sd_g + SSIM_C2) / (var_f + var_g + SSIM_C2)
    struct = (cov + SSIM_C3) / (sd_f * sd_g + SSIM_C3)
    return lum, con, struct


def ssim(f, g, mask) -> float:
    """Global SSIM of two grids (mean over the batch for 4-D input)."""
    lum, con, struct = ssim_components(f, g, mask)
    return float(np.mean(lum * con * struct))


def ssim_loss(p, target, mask) -> Tensor:
    """``1 - mean SSIM(p, target)`` with per-sample whole-grid statistics.

    With C3 = C2/2 the contrast and structure terms collapse to
    ``(2 cov + C2) / (var_f + var_g + C2)``, which stays differentiable
    where a standard deviation is zero.
    """
    p = as_tensor(p)
    f = p.data.astype(np.float64)
    g = np.broadcast_to(np.asarray(target, dtype=np.float64), f.shape)
    m = _bool_mask(mask, f.shape)
    n, mu_f, mu_g, df, dg, var_f, var_g, cov = _ssim_stats(f, g, m)
    A = 2 * mu_f * mu_g + SSIM_C1
    B = mu_f**2 + mu_g**2 + SSIM_C1
    P = 2 * cov + SSIM_C2
    Q = var_f + var_g + SSIM_C2
    lum, cs = A / B, P / Q
    per_sample = lum * cs
    batch = per_sample.size
    loss = 1.0 - per_sample.mean()

    def backward(gr):
        dl_dmu = 2 * (mu_g * B - A * mu_f) / B**2
        dcs = (2 * dg * Q[:, None] - 2 * P[:, None] * df) / (n[:, None] * Q[:, None] ** 2)
        d = dl_dmu[:, None] * cs[:, None] / n[:, None] + lum[:, None] * dcs
        grad = np.zeros(f.shape, dtype=np.float64)
        grad[m] = (-gr / batch * d).reshape(-1)[m.reshape(-1)]
        return (grad.astype(p.dtype),)

    return apply(np.asarray(loss, dtype=p.dtype), (p,), backward)


def loss_by_name(name: str):
    if name == "psnr":
        raise ValueError("unknown loss 'psnr' (use mse: PSNR is a monotone transform of it)")
    try:
        return {"bce": bce_loss, "mse": mse_loss, "ssim": ssim_loss}[name]
    except KeyError:
        raise ValueError(f"unknown loss {name!r}, expected one of {', '.join(LOSSES)}") from None


@dataclass(frozen=True)
class BerReport:
    bits_counted: int
    bit_errors: int

    def __post_init__(self):
        if self.bits_counted < 1:
            raise ValueError("BerReport needs at least one counted bit")

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_counted

    def merge(self, other: "BerReport") -> "BerReport":
        return BerReport(self.bits_counted + other.bits_counted, self.bit_errors + other.bit_errors)


def hard_bits(p) -> np.ndarray:
    """Hard decision ``p > 0.5``; exactly 0.5 decodes to 0."""
    return (np.asarray(p) > 0.5).astype(np.uint8)


def ber(p, u) -> BerReport:
    """Count hard-decision errors between probabilities ``p`` and bits ``u``."""
    p, u = np.asarray(p), np.asarray(u)
    if p.shape != u.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {u.shape}")
    if p.size == 0:
        raise ValueError("ber needs at least one bit")
    return BerReport(int(p.size), int(np.count_nonzero(hard_bits(p) != u)))


def nve(ber_nnd, ber_viterbi, bits_per_point) -> float:
    """Mean over SNR points of BER_nnd / BER_viterbi.

    A Viterbi BER of exactly zero is floored at ``1 / bits_per_point`` (one
    error in the whole measurement).  ``bits_per_point`` may be a scalar or
    one count per point.
    """
    a = np.asarray(ber_nnd, dtype=np.float64)
    b = np.asarray(ber_viterbi, dtype=np.float64)
    if a.ndim != 1 or a.shape != b.shape:
        raise ValueError(f"need equal-length BER lists, got {a.shape} and {b.shape}")
    if a.size == 0:
        raise ValueError("nve needs at least one SNR point")
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("BER entries must be >= 0")
    floor = 1.0 / np.broadcast_to(np.asarray(bits_per_point, dtype=np.float64), b.shape)
    b = np.where(b == 0, floor, b)
    return float(np.mean(a / b))
