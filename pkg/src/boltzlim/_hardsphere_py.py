"""Pure numpy versions of the hard-sphere kernels (same arithmetic, vectorized per node)."""
import numpy as np


def _interp(r, lo, h, pts):
    n = r.shape[0]
    f = np.clip((pts - lo) / h, 0.0, n - 1.0)
    i = np.minimum(f.astype(np.int64), n - 2)
    t = f - i
    ix, iy, iz = i[..., 0], i[..., 1], i[..., 2]
    tx, ty, tz = t[..., 0], t[..., 1], t[..., 2]
    c00 = r[ix, iy, iz] + tx * (r[ix + 1, iy, iz] - r[ix, iy, iz])
    c10 = r[ix, iy + 1, iz] + tx * (r[ix + 1, iy + 1, iz] - r[ix, iy + 1, iz])
    c01 = r[ix, iy, iz + 1] + tx * (r[ix + 1, iy, iz + 1] - r[ix, iy, iz + 1])
    c11 = r[ix, iy + 1, iz + 1] + tx * (r[ix + 1, iy + 1, iz + 1] - r[ix, iy + 1, iz + 1])
    c0 = c00 + ty * (c10 - c00)
    c1 = c01 + ty * (c11 - c01)
    return c0 + tz * (c1 - c0)


def _products(ratio, nodes, lo, h, dirs, a):
    g = nodes[a] - nodes
    gw = g @ dirs.T
    post = nodes[a] - gw[..., None] * dirs
    post_star = nodes[:, None, :] + gw[..., None] * dirs
    P = _interp(ratio, lo, h, post) * _interp(ratio, lo, h, post_star)
    return np.abs(gw), P


def gain_loss(ratio, mloc, nodes, lo, h, dirs, dw, w):
    rf = ratio.reshape(-1)
    acc = np.empty(len(nodes))
    for a in range(len(nodes)):
        ag, P = _products(ratio, nodes, lo, h, dirs, a)
        ag = ag * dw
        term = (ag * P).sum(axis=1) - ag.sum(axis=1) * rf[a] * rf
        acc[a] = mloc @ term
    return mloc * acc * w


def r_form(ratio, mloc, nodes, lo, h, dirs, dw, w):
    rf = ratio.reshape(-1)
    total = 0.0
    for a in range(len(nodes)):
        ag, P = _products(ratio, nodes, lo, h, dirs, a)
        Q = (rf[a] * rf)[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.where(P != Q, (P - Q) * np.log(P / Q), 0.0)
        total += mloc[a] * (mloc @ (dw * ag * val).sum(axis=1))
    return total * w * w
