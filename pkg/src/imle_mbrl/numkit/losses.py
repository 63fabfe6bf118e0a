"""Training losses with analytic gradients.

The quantile-Huber loss is the per-update hot spot (batch x N x N pairwise
terms), so the production path is a numba kernel that sorts the target
atoms once per row and evaluates each quantile's sum in closed form from
prefix sums.  The naive O(N*Nt) numpy version is kept as the reference
oracle; the two agree to rounding.

Per-transition losses are returned unweighted; callers apply confidence
weights outside, which keeps the loss exactly linear in the weights.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange


def quantile_midpoints(n: int) -> np.ndarray:
    """tau_i = (2i-1)/(2n), i = 1..n."""
    i = np.arange(1, n + 1, dtype=np.float64)
    return (2.0 * i - 1.0) / (2.0 * n)


@njit(cache=True, parallel=True)
def _quantile_huber_sweep(pred, order, ts, c1, c2, taus, kappa, loss_rows, grad):
    # pred/order/grad: (R, N); ts: (B, Nt) sorted rows shared by R // B
    # stacked networks; c1/c2: (B, Nt+1) prefix-sum workspaces.
    rows, n = pred.shape
    b_rows, nt = ts.shape
    for b in range(b_rows):
        c1[b, 0] = 0.0
        c2[b, 0] = 0.0
        for j in range(nt):
            v = ts[b, j]
            c1[b, j + 1] = c1[b, j] + v
            c2[b, j + 1] = c2[b, j] + v * v
    inv = 1.0 / (n * nt)
    inv_k = 1.0 / kappa
    half_inv_k = 0.5 * inv_k
    half_k = 0.5 * kappa
    for r in prange(rows):
        b = r % b_rows
        ja = 0  # first ts >= p - kappa
        jm = 0  # first ts >= p
        jc = 0  # first ts > p + kappa
        acc = 0.0
        for s in range(n):
            i = order[r, s]
            p = pred[r, i]
            tau = taus[i]
            lo = p - kappa
            hi = p + kappa
            while ja < nt and ts[b, ja] < lo:
                ja += 1
            if jm < ja:
                jm = ja
            while jm < nt and ts[b, jm] < p:
                jm += 1
            if jc < jm:
                jc = jm
            while jc < nt and ts[b, jc] <= hi:
                jc += 1
            n_a = float(ja)
            n_b1 = float(jm - ja)
            n_b2 = float(jc - jm)
            n_c = float(nt - jc)
            s1_b1 = c1[b, jm] - c1[b, ja]
            s2_b1 = c2[b, jm] - c2[b, ja]
            s1_b2 = c1[b, jc] - c1[b, jm]
            s2_b2 = c2[b, jc] - c2[b, jm]
            s1_a = c1[b, ja]
            s1_c = c1[b, nt] - c1[b, jc]
            tl = 1.0 - tau
            pp = p * p
            p2 = 2.0 * p
            # linear tails contribute |u| - kappa/2 each; quadratic core u^2/(2k)
            loss_i = tl * (n_a * (p - half_k) - s1_a)
            loss_i += half_inv_k * (tl * (s2_b1 - p2 * s1_b1 + n_b1 * pp)
                                    + tau * (s2_b2 - p2 * s1_b2 + n_b2 * pp))
            loss_i += tau * (s1_c - n_c * (p + half_k))
            g_i = tl * n_a - tau * n_c
            g_i += inv_k * (tl * (n_b1 * p - s1_b1) + tau * (n_b2 * p - s1_b2))
            acc += loss_i
            grad[r, i] = inv * g_i
        loss_rows[r] = inv * acc


def per_transition_quantile_loss(pred: np.ndarray, target: np.ndarray,
                                 taus: np.ndarray, kappa: float = 1.0):
    """Quantile-Huber regression of pred atoms against target atoms.

    pred: (..., N) quantile estimates; target: (..., Nt) target samples whose
    leading axes either match pred's or omit pred's first axis (a stack of
    networks regressed against shared targets).  Returns (loss_rows (...,),
    dloss/dpred (..., N)); loss_rows averages over both atom axes.
    """
    lead = pred.shape[:-1]
    n = pred.shape[-1]
    nt = target.shape[-1]
    shared = target.shape[:-1] != lead
    if shared and target.shape[:-1] != lead[1:]:
        raise ValueError("pred and target leading shapes must match "
                         "(optionally dropping pred's stack axis)")
    p2 = np.ascontiguousarray(pred.reshape(-1, n))
    t2 = target.reshape(-1, nt)
    ts = np.sort(t2, axis=-1)
    order = np.argsort(p2, axis=-1)
    b_rows = ts.shape[0]
    c1 = np.empty((b_rows, nt + 1), dtype=np.float64)
    c2 = np.empty((b_rows, nt + 1), dtype=np.float64)
    loss_rows = np.empty(p2.shape[0], dtype=np.float64)
    grad = np.empty_like(p2)
    _quantile_huber_sweep(p2, order, ts, c1, c2,
                          np.ascontiguousarray(taus, dtype=np.float64),
                          float(kappa), loss_rows, grad)
    return loss_rows.reshape(lead), grad.reshape(pred.shape)


def per_transition_quantile_loss_reference(pred: np.ndarray, target: np.ndarray,
                                           taus: np.ndarray, kappa: float = 1.0):
    """Naive pairwise oracle for the kernel above."""
    u = target[..., None, :] - pred[..., :, None]  # (..., N, Nt)
    au = np.abs(u)
    hu = np.where(au <= kappa, 0.5 * u * u, kappa * (au - 0.5 * kappa))
    wq = np.abs(taus[..., :, None] - (u < 0.0))
    rho = wq * hu / kappa
    loss_rows = rho.mean(axis=(-1, -2))
    grad = -(wq * np.clip(u, -kappa, kappa) / kappa).mean(axis=-1) / pred.shape[-1]
    return loss_rows, grad


def mse_loss_and_grad(pred: np.ndarray, target: np.ndarray, batch_axis: int = -2):
    """Mean over the batch axis of the squared error summed over features.

    pred/target: stack + (B, D).  Returns (loss with shape stack, grad).
    """
    diff = pred - target
    b = pred.shape[batch_axis]
    loss = np.square(diff).sum(axis=-1).mean(axis=-1)
    grad = (2.0 / b) * diff
    return loss, grad


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softplus(x: np.ndarray) -> np.ndarray:
    return np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)


LOGVAR_MIN = -10.0
LOGVAR_MAX = 4.0


def bound_logvar(raw: np.ndarray):
    """Soft-clamp raw log-variances into [LOGVAR_MIN, LOGVAR_MAX].

    Smooth on both sides so gradient checks hold everywhere.  Returns
    (bounded, d bounded / d raw).
    """
    v = LOGVAR_MAX - softplus(LOGVAR_MAX - raw)
    dv = sigmoid(LOGVAR_MAX - raw)
    v2 = LOGVAR_MIN + softplus(v - LOGVAR_MIN)
    dv2 = sigmoid(v - LOGVAR_MIN)
    return v2, dv * dv2


def gaussian_nll_loss_and_grad(mean: np.ndarray, raw_logvar: np.ndarray,
                               target: np.ndarray):
    """Diagonal-Gaussian negative log-likelihood, mean over the batch axis.

    Shapes: stack + (B, D).  Returns (loss with shape stack, dmean, draw).
    """
    lv, dlv = bound_logvar(raw_logvar)
    inv_var = np.exp(-lv)
    diff = mean - target
    b = mean.shape[-2]
    per_elem = 0.5 * (lv + diff * diff * inv_var + np.log(2.0 * np.pi))
    loss = per_elem.sum(axis=-1).mean(axis=-1)
    dmean = diff * inv_var / b
    draw = 0.5 * (1.0 - diff * diff * inv_var) / b * dlv
    return loss, dmean, draw
