# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hard-sphere quadrature kernels.

The field enters as a ratio r = F / M_loc on the node lattice, where M_loc is
a Maxwellian with the same discrete moments. Since M_loc(v')M_loc(v'_*) equals
M_loc(v)M_loc(v_*) for every elastic collision, only r is interpolated.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, log

cnp.import_array()


cdef inline double _interp(const double* r, double lo, double inv_h,
                           int n, double x, double y, double z) noexcept nogil:
    cdef double top = n - 1.0
    cdef double fx = (x - lo) * inv_h
    cdef double fy = (y - lo) * inv_h
    cdef double fz = (z - lo) * inv_h
    fx = 0.0 if fx < 0.0 else (top if fx > top else fx)
    fy = 0.0 if fy < 0.0 else (top if fy > top else fy)
    fz = 0.0 if fz < 0.0 else (top if fz > top else fz)
    cdef int i = <int>fx
    cdef int j = <int>fy
    cdef int k = <int>fz
    if i > n - 2:
        i = n - 2
    if j > n - 2:
        j = n - 2
    if k > n - 2:
        k = n - 2
    cdef double tx = fx - i
    cdef double ty = fy - j
    cdef double tz = fz - k
    cdef Py_ssize_t sx = n * n
    cdef const double* p = r + (i * n + j) * n + k
    cdef double c00 = p[0] + tx * (p[sx] - p[0])
    cdef double c10 = p[n] + tx * (p[sx + n] - p[n])
    cdef double c01 = p[1] + tx * (p[sx + 1] - p[1])
    cdef double c11 = p[n + 1] + tx * (p[sx + n + 1] - p[n + 1])
    cdef double c0 = c00 + ty * (c10 - c00)
    cdef double c1 = c01 + ty * (c11 - c01)
    return c0 + tz * (c1 - c0)


def gain_loss(const double[:, :, ::1] ratio, const double[::1] mloc, const double[:, ::1] nodes,
              double lo, double h, const double[:, ::1] dirs, const double[::1] dw, double w):
    """B at every node, returned unprojected."""
    cdef int n = ratio.shape[0]
    cdef Py_ssize_t N = nodes.shape[0]
    cdef Py_ssize_t K = dirs.shape[0]
    cdef double inv_h = 1.0 / h
    cdef const double* r = &ratio[0, 0, 0]
    cdef const double[::1] rf = np.ascontiguousarray(ratio).reshape(-1)
    acc_np = np.zeros(N)
    cdef double[::1] acc = acc_np
    cdef Py_ssize_t a, b, k
    cdef double g0, g1, g2, gw, ag, s, sl, ra, rb, term, o0, o1, o2
    with nogil:
        for a in range(N):
            ra = rf[a]
            for b in range(a + 1):
                rb = rf[b]
                g0 = nodes[a, 0] - nodes[b, 0]
                g1 = nodes[a, 1] - nodes[b, 1]
                g2 = nodes[a, 2] - nodes[b, 2]
                s = 0.0
                sl = 0.0
                for k in range(K):
                    o0 = dirs[k, 0]
                    o1 = dirs[k, 1]
                    o2 = dirs[k, 2]
                    gw = g0 * o0 + g1 * o1 + g2 * o2
                    ag = dw[k] * fabs(gw)
                    s = s + ag * _interp(r, lo, inv_h, n,
                                         nodes[a, 0] - gw * o0,
                                         nodes[a, 1] - gw * o1,
                                         nodes[a, 2] - gw * o2) \
                              * _interp(r, lo, inv_h, n,
                                        nodes[b, 0] + gw * o0,
                                        nodes[b, 1] + gw * o1,
                                        nodes[b, 2] + gw * o2)
                    sl = sl + ag
                term = s - sl * ra * rb
                acc[a] += mloc[b] * term
                if b != a:
                    acc[b] += mloc[a] * term
    out = np.asarray(mloc) * acc_np * w
    return out


def r_form(const double[:, :, ::1] ratio, const double[::1] mloc, const double[:, ::1] nodes,
           double lo, double h, const double[:, ::1] dirs, const double[::1] dw, double w):
    """Sum over (v, v_*, omega) of (P - Q) ln(P / Q) M M_* |g.omega| weights,
    with P, Q the post/pre ratio products; equals r(P/Q - 1) F F_* summed."""
    cdef int n = ratio.shape[0]
    cdef Py_ssize_t N = nodes.shape[0]
    cdef Py_ssize_t K = dirs.shape[0]
    cdef double inv_h = 1.0 / h
    cdef const double* r = &ratio[0, 0, 0]
    cdef const double[::1] rf = np.ascontiguousarray(ratio).reshape(-1)
    cdef Py_ssize_t a, b, k
    cdef double g0, g1, g2, gw, P, Q, s, total = 0.0, o0, o1, o2, mult
    with nogil:
        for a in range(N):
            for b in range(a + 1):
                Q = rf[a] * rf[b]
                g0 = nodes[a, 0] - nodes[b, 0]
                g1 = nodes[a, 1] - nodes[b, 1]
                g2 = nodes[a, 2] - nodes[b, 2]
                s = 0.0
                for k in range(K):
                    o0 = dirs[k, 0]
                    o1 = dirs[k, 1]
                    o2 = dirs[k, 2]
                    gw = g0 * o0 + g1 * o1 + g2 * o2
                    P = _interp(r, lo, inv_h, n, nodes[a, 0] - gw * o0,
                                nodes[a, 1] - gw * o1, nodes[a, 2] - gw * o2) \
                        * _interp(r, lo, inv_h, n, nodes[b, 0] + gw * o0,
                                  nodes[b, 1] + gw * o1, nodes[b, 2] + gw * o2)
                    if P != Q:
                        s = s + dw[k] * fabs(gw) * (P - Q) * log(P / Q)
                mult = 2.0 if b != a else 1.0
                total = total + mult * mloc[a] * mloc[b] * s
    return total * w * w
