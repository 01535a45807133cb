# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled 1D singular-quadrature kernel.

Same algorithm and return convention as ``fraclab._pykernels.bilinear_1d``;
points are processed one at a time with an explicit bisection stack, and the
GIL is released for the whole batch.  Values agree with the numpy version up
to summation order and the ``1/sqrt`` shortcut for alpha = 1/2.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, floor, log, log2, exp, pow, sqrt, isfinite, NAN, INFINITY
from libc.stdlib cimport malloc, free

cnp.import_array()

DEF MAX_DEPTH = 60
DEF MAX_NODES = 64
DEF MAX_LEVELS = 200


cdef inline double eval_pieces(const double[:, ::1] P, const double[::1] gv, double z) noexcept nogil:
    cdef Py_ssize_t k, n, off, i
    cdef int kind
    cdef double out = 0.0, r, v, s, pos, w
    for k in range(P.shape[0]):
        kind = <int> P[k, 0]
        if kind == 0:
            if z >= P[k, 2] and z <= P[k, 3]:
                out += P[k, 1]
        elif kind == 1:
            r = fabs(z - P[k, 2])
            if r == 0.0:
                return INFINITY
            if r <= P[k, 5]:
                v = pow(r, -P[k, 3])
                if P[k, 4] != 0.0:
                    v *= pow(log(1.0 / r), -P[k, 4])
                out += P[k, 1] * v
        elif kind == 2:
            s = 8.0 * fabs(z - P[k, 2]) / P[k, 3]
            if s < 1.0:
                out += P[k, 1] * exp(-1.0 / (1.0 - s * s))
        elif kind == 3:
            n = <Py_ssize_t> P[k, 4]
            off = <Py_ssize_t> P[k, 5]
            pos = (z - P[k, 2]) * (1.0 / P[k, 3])
            if pos >= 0.0 and pos <= n - 1:
                i = <Py_ssize_t> pos
                if i > n - 2:
                    i = n - 2
                w = pos - i
                out += P[k, 1] * ((1.0 - w) * gv[off + i] + w * gv[off + i + 1])
        elif kind == 4:
            out += P[k, 1]
    return out


cdef struct Ctx:
    double x
    double a
    double b
    double alpha
    long nevals
    int bad
    double bad_u


cdef inline double integrand(Ctx* c, const double[:, ::1] fP, const double[::1] fG,
                             const double[:, ::1] gP, const double[::1] gG, double u) noexcept nogil:
    cdef double plus = eval_pieces(fP, fG, c.x + c.a * u) * eval_pieces(gP, gG, c.x + c.b * u)
    cdef double minus = eval_pieces(fP, fG, c.x - c.a * u) * eval_pieces(gP, gG, c.x - c.b * u)
    return plus + minus


cdef double cell(Ctx* c, const double[:, ::1] fP, const double[::1] fG,
                 const double[:, ::1] gP, const double[::1] gG,
                 const double* nodes, const double* weights, int n,
                 double c0, double c1) noexcept nogil:
    cdef int i
    cdef double acc = 0.0, t, u, v1, val, wt
    if c.bad:
        return 0.0
    if c0 == 0.0 and c.alpha != 1.0:
        v1 = pow(c1, c.alpha)
        for i in range(n):
            t = 0.5 * (1.0 + nodes[i])
            u = pow(v1 * t, 1.0 / c.alpha)
            val = integrand(c, fP, fG, gP, gG, u)
            if not isfinite(val):
                c.bad = 1
                c.bad_u = u
                return 0.0
            acc += val * ((0.5 * v1 * weights[i]) / c.alpha)
    else:
        for i in range(n):
            t = 0.5 * (1.0 + nodes[i])
            u = c0 + (c1 - c0) * t
            val = integrand(c, fP, fG, gP, gG, u)
            if not isfinite(val):
                c.bad = 1
                c.bad_u = u
                return 0.0
            wt = 0.5 * (c1 - c0) * weights[i]
            if c.alpha == 0.5:
                wt /= sqrt(u)
            elif c.alpha != 1.0:
                wt *= pow(u, c.alpha - 1.0)
            acc += val * wt
    c.nevals += n
    return acc


cdef inline double sgn(double v) noexcept nogil:
    return 1.0 if v > 0 else (-1.0 if v < 0 else 0.0)


cdef int graded(double e, double o, int levels, double fl, double* c0, double* c1) noexcept nogil:
    """Cells of [e, o] graded towards e, in increasing order of u."""
    cdef double w = fabs(o - e), s = sgn(o - e), small, a, b
    cdef int leff, k, m = 0
    small = fl
    if 1e-13 * fabs(e) > small:
        small = 1e-13 * fabs(e)
    if 1e-13 * fabs(o) > small:
        small = 1e-13 * fabs(o)
    if small < 1e-300:
        small = 1e-300
    if w > 0:
        leff = <int> floor(log2(w / small))
    else:
        leff = 0
    if leff < 0:
        leff = 0
    if leff > levels:
        leff = levels
    # innermost cell first when the endpoint is on the left
    if s > 0:
        c0[m] = e
        c1[m] = e + s * w * pow(2.0, -leff)
        m += 1
        for k in range(leff - 1, -1, -1):
            c0[m] = e + w * pow(2.0, -(k + 1))
            c1[m] = e + w * pow(2.0, -k)
            m += 1
    else:
        for k in range(leff):
            c0[m] = e - w * pow(2.0, -k)
            c1[m] = e - w * pow(2.0, -(k + 1))
            m += 1
        c0[m] = e - w * pow(2.0, -leff)
        c1[m] = e
        m += 1
    return m


cdef void one_point(Ctx* c, double R, const double* ku, const char* ks, int nk,
                    const double[:, ::1] fP, const double[::1] fG,
                    const double[:, ::1] gP, const double[::1] gG,
                    const double* nodes, const double* weights, int n,
                    const double* nodes_lo, const double* weights_lo, int nlo,
                    double rel_tol, double abs_tol, int levels, double fl, long budget,
                    double* bu, char* bs, double* c0, double* c1, double* q1,
                    double* q1b, double* st0, double* st1, double* stq, double* stqb, int* std,
                    double* value, double* error, int* status) noexcept nogil:
    cdef int m = 0, i, j, ncell = 0, top
    cdef double u, lo, hi, mid, tol, total = 0.0, a, b, qa, err, local, width
    cdef char sl, sh
    value[0] = 0.0
    error[0] = 0.0
    status[0] = 0
    if not (R > 0):
        return
    # ku holds the kinks in (0, R) (or at 0) in increasing order
    bu[0] = 0.0
    bs[0] = 0
    for i in range(nk):
        bu[i + 1] = ku[i]
        bs[i + 1] = ks[i]
    bu[nk + 1] = R
    bs[nk + 1] = 0
    m = nk + 2
    for i in range(1, m):
        if bu[i] == bu[i - 1] and bs[i - 1]:
            bs[i] = 1
    for i in range(m - 2, -1, -1):
        if bu[i] == bu[i + 1] and bs[i + 1]:
            bs[i] = 1
    for i in range(m - 1):
        lo = bu[i]
        hi = bu[i + 1]
        if not hi > lo:
            continue
        sl = bs[i]
        sh = bs[i + 1]
        if sl and sh:
            mid = 0.5 * (lo + hi)
        elif sl:
            mid = hi
        elif sh:
            mid = lo
        else:
            mid = hi
        if mid > lo:
            if sl:
                ncell += graded(lo, mid, levels, fl, c0 + ncell, c1 + ncell)
            else:
                c0[ncell] = lo
                c1[ncell] = mid
                ncell += 1
        if hi > mid and sh:
            ncell += graded(hi, mid, levels, fl, c0 + ncell, c1 + ncell)
    for i in range(ncell):
        q1[i] = cell(c, fP, fG, gP, gG, nodes, weights, n, c0[i], c1[i])
        q1b[i] = cell(c, fP, fG, gP, gG, nodes_lo, weights_lo, nlo, c0[i], c1[i])
        total += q1[i]
    tol = abs_tol
    if rel_tol * fabs(total) > tol:
        tol = rel_tol * fabs(total)
    for i in range(ncell):
        st0[0] = c0[i]
        st1[0] = c1[i]
        stq[0] = q1[i]
        stqb[0] = q1b[i]
        std[0] = 0
        top = 1
        while top > 0 and not c.bad:
            top -= 1
            a = st0[top]
            b = st1[top]
            qa = stq[top]
            err = fabs(qa - stqb[top])
            j = std[top]
            width = b - a
            local = tol * width / R
            if rel_tol * fabs(qa) > local:
                local = rel_tol * fabs(qa)
            local *= 0.5
            if (err <= local or j >= MAX_DEPTH or width <= 1e-13 * b
                    or c.nevals > budget):
                if c.nevals > budget and err > local:
                    status[0] = 1
                value[0] += qa
                error[0] += err
            else:
                mid = 0.5 * (a + b)
                st0[top] = mid
                st1[top] = b
                stq[top] = cell(c, fP, fG, gP, gG, nodes, weights, n, mid, b)
                stqb[top] = cell(c, fP, fG, gP, gG, nodes_lo, weights_lo, nlo, mid, b)
                std[top] = j + 1
                st0[top + 1] = a
                st1[top + 1] = mid
                stq[top + 1] = cell(c, fP, fG, gP, gG, nodes, weights, n, a, mid)
                stqb[top + 1] = cell(c, fP, fG, gP, gG, nodes_lo, weights_lo, nlo, a, mid)
                std[top + 1] = j + 1
                top += 2
    if c.bad:
        status[0] = 2


def bilinear_1d(xs, R, fP, fG, gP, gG, double a, double b, double alpha,
                double rel_tol, double abs_tol, nodes, weights, nodes_lo, weights_lo,
                int levels, double floor_, long budget):
    """Compiled twin of ``fraclab._pykernels.bilinear_1d``."""
    cdef const double[::1] xv = np.ascontiguousarray(xs, dtype=np.float64)
    cdef const double[::1] Rv = np.ascontiguousarray(R, dtype=np.float64)
    cdef const double[:, ::1] fPv = np.ascontiguousarray(fP, dtype=np.float64).reshape(-1, 6)
    cdef const double[::1] fGv = np.ascontiguousarray(fG, dtype=np.float64)
    cdef const double[:, ::1] gPv = np.ascontiguousarray(gP, dtype=np.float64).reshape(-1, 6)
    cdef const double[::1] gGv = np.ascontiguousarray(gG, dtype=np.float64)
    cdef const double[::1] nd = np.ascontiguousarray(nodes, dtype=np.float64)
    cdef const double[::1] wt = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const double[::1] ndl = np.ascontiguousarray(nodes_lo, dtype=np.float64)
    cdef const double[::1] wtl = np.ascontiguousarray(weights_lo, dtype=np.float64)
    cdef Py_ssize_t N = xv.shape[0], i, k
    cdef int nk = 0, n = nd.shape[0], nlo = ndl.shape[0]
    if n > MAX_NODES or nlo > MAX_NODES or n < 1 or nlo < 1:
        raise ValueError("too many quadrature nodes")
    if levels > MAX_LEVELS:
        levels = MAX_LEVELS

    from fraclab._pykernels import piece_kinks
    # kinks of each factor sorted by position; u = |p - x| / |coef| is then
    # two monotone runs per factor, merged per point below
    kpos_list, ksing_list, ginv, gstart, gend = [], [], [], [], []
    off = 0
    for P, coef in ((fP, a), (gP, b)):
        if coef == 0.0:
            continue
        pos, sing = piece_kinks(np.asarray(P).reshape(-1, 6))
        order = np.argsort(pos, kind="stable")
        kpos_list.append(pos[order])
        ksing_list.append(sing[order])
        ginv.append(1.0 / abs(coef))
        gstart.append(off)
        off += len(pos)
        gend.append(off)
    kp_arr = np.ascontiguousarray(np.concatenate(kpos_list) if kpos_list else np.zeros(1))
    ks_arr = np.ascontiguousarray((np.concatenate(ksing_list) if ksing_list else np.zeros(1)).astype(np.int8))
    cdef const double[::1] kp = kp_arr
    cdef const cnp.int8_t[::1] ks = ks_arr
    cdef int ng = len(ginv)
    cdef double gi[2]
    cdef Py_ssize_t gs[2]
    cdef Py_ssize_t ge[2]
    for k in range(ng):
        gi[k] = ginv[k]
        gs[k] = gstart[k]
        ge[k] = gend[k]
    nk = off
    cdef Py_ssize_t rpos[4]
    cdef Py_ssize_t rend[4]
    cdef int rstep[4]
    cdef double rinv[4]
    cdef int nr, r, best, cnt
    cdef Py_ssize_t lo_, hi_, md
    cdef double ub, uc

    values = np.zeros(N)
    errors = np.zeros(N)
    nevals = np.zeros(N, dtype=np.int64)
    status = np.zeros(N, dtype=np.int64)
    bad_u = np.full(N, np.nan)
    cdef double[::1] vv = values
    cdef double[::1] ev = errors
    cdef cnp.int64_t[::1] nv = nevals
    cdef cnp.int64_t[::1] sv = status
    cdef double[::1] bv = bad_u

    cdef int maxb = nk + 2
    cdef int nsing = int(ks_arr[:max(nk, 0)].sum()) + 2
    cdef int maxc = maxb + nsing * 2 * (levels + 2) + 4
    cdef int maxs = 2 * MAX_DEPTH + 8
    cdef double* ku = <double*> malloc(max(nk, 1) * sizeof(double))
    cdef char* kss = <char*> malloc(max(nk, 1) * sizeof(char))
    cdef double* bu = <double*> malloc(maxb * sizeof(double))
    cdef char* bs = <char*> malloc(maxb * sizeof(char))
    cdef double* c0 = <double*> malloc(maxc * sizeof(double))
    cdef double* c1 = <double*> malloc(maxc * sizeof(double))
    cdef double* q1 = <double*> malloc(maxc * sizeof(double))
    cdef double* q1b = <double*> malloc(maxc * sizeof(double))
    cdef double* st0 = <double*> malloc(maxs * sizeof(double))
    cdef double* st1 = <double*> malloc(maxs * sizeof(double))
    cdef double* stq = <double*> malloc(maxs * sizeof(double))
    cdef double* stqb = <double*> malloc(maxs * sizeof(double))
    cdef int* std = <int*> malloc(maxs * sizeof(int))
    cdef Ctx ctx
    cdef int st
    cdef double val, err
    try:
        with nogil:
            for i in range(N):
                nr = 0
                for k in range(ng):
                    # first kink at or right of x
                    lo_ = gs[k]
                    hi_ = ge[k]
                    while lo_ < hi_:
                        md = (lo_ + hi_) // 2
                        if kp[md] < xv[i]:
                            lo_ = md + 1
                        else:
                            hi_ = md
                    rpos[nr] = lo_ - 1
                    rend[nr] = gs[k] - 1
                    rstep[nr] = -1
                    rinv[nr] = gi[k]
                    rpos[nr + 1] = lo_
                    rend[nr + 1] = ge[k]
                    rstep[nr + 1] = 1
                    rinv[nr + 1] = gi[k]
                    nr += 2
                cnt = 0
                while True:
                    best = -1
                    ub = INFINITY
                    for r in range(nr):
                        if rpos[r] != rend[r]:
                            uc = fabs(kp[rpos[r]] - xv[i]) * rinv[r]
                            if uc < ub:
                                ub = uc
                                best = r
                    if best < 0 or not ub < Rv[i]:
                        break
                    ku[cnt] = ub
                    kss[cnt] = <char> ks[rpos[best]]
                    cnt += 1
                    rpos[best] += rstep[best]
                ctx.x = xv[i]
                ctx.a = a
                ctx.b = b
                ctx.alpha = alpha
                ctx.nevals = 0
                ctx.bad = 0
                ctx.bad_u = NAN
                one_point(&ctx, Rv[i], ku, kss, cnt, fPv, fGv, gPv, gGv, &nd[0], &wt[0], n,
                          &ndl[0], &wtl[0], nlo, rel_tol, abs_tol, levels, floor_, budget,
                          bu, bs, c0, c1, q1, q1b, st0, st1, stq, stqb, std,
                          &val, &err, &st)
                vv[i] = val
                ev[i] = err
                nv[i] = ctx.nevals
                sv[i] = st
                bv[i] = ctx.bad_u
    finally:
        free(ku); free(kss); free(bu); free(bs); free(c0); free(c1); free(q1); free(q1b)
        free(st0); free(st1); free(stq); free(stqb); free(std)
    return values, errors, nevals, status, bad_u
