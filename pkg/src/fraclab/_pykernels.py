"""Pure numpy implementation of the 1D singular-quadrature kernel.

This is the reference path and the fallback when the compiled extension is
unavailable.  ``fraclab._kernels`` exposes the same functions.

Algorithm, per evaluation point x (vectorized over a batch of points):

* fold the y-integral onto u = |y| in (0, R], integrand G(u) = F(u) + F(-u);
* breakpoints: 0, R and every |y| where an argument of f or g crosses a kink
  of its encoding (for grid data, every node); kinks flagged singular get a geometric mesh (ratio 1/2)
  graded towards them;
* cells touching u = 0 use Gauss-Legendre in v = u^alpha, which integrates
  the weight u^(alpha-1) exactly; other cells use Gauss-Legendre in u;
* each cell is integrated with n-point Gauss and the (n-1)-point rule;
  cells where the two disagree by more than their share of the tolerance
  are bisected.  Accepted cells contribute the n-point value, and the
  difference goes into the error estimate.
"""

import numpy as np

STATUS_OK = 0
STATUS_BUDGET = 1
STATUS_NONFINITE = 2

MAX_DEPTH = 60


def eval_pieces(P, gvals, z):
    """Evaluate an encoded 1D function at the points ``z``."""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    for row in P:
        kind = int(row[0])
        coef = row[1]
        if kind == 0:
            out += coef * ((z >= row[2]) & (z <= row[3]))
        elif kind == 1:
            r = np.abs(z - row[2])
            inside = (r > 0) & (r <= row[5])
            ri = r[inside]
            v = ri ** -row[3]
            if row[4] != 0.0:
                v = v * np.log(1.0 / ri) ** -row[4]
            out[inside] += coef * v
            out[r == 0] = np.inf
        elif kind == 2:
            s = 8.0 * np.abs(z - row[2]) / row[3]
            inside = s < 1.0
            out[inside] += coef * np.exp(-1.0 / (1.0 - s[inside] ** 2))
        elif kind == 3:
            n = int(row[4])
            off = int(row[5])
            pos = (z - row[2]) / row[3]
            inside = (pos >= 0) & (pos <= n - 1)
            p = pos[inside]
            i = np.minimum(np.floor(p).astype(np.int64), n - 2)
            w = p - i
            out[inside] += coef * ((1.0 - w) * gvals[off + i] + w * gvals[off + i + 1])
        elif kind == 4:
            out += coef
        else:
            raise ValueError(f"unknown piece kind {kind}")
    return out


def piece_kinks(P):
    """Kink positions and singular flags of an encoded function."""
    pos, sing = [], []
    for row in P:
        kind = int(row[0])
        if kind == 0:
            pos += [row[2], row[3]]
            sing += [False, False]
        elif kind == 1:
            pos += [row[2], row[2] - row[5], row[2] + row[5]]
            sing += [True, False, False]
        elif kind == 2:
            pos += [row[2] - row[3] / 8.0, row[2] + row[3] / 8.0]
            sing += [False, False]
        elif kind == 3:
            # every node is a kink of the interpolant
            nodes = row[2] + row[3] * np.arange(int(row[4]))
            pos += nodes.tolist()
            sing += [False] * len(nodes)
    return np.asarray(pos, dtype=float), np.asarray(sing, dtype=bool)


def _graded(e, o, levels, floor):
    """Cells of [e, o] (either orientation) graded towards ``e``.

    ``e``, ``o``: arrays of equal length. Returns (c0, c1, part index).
    """
    w = np.abs(o - e)
    sgn = np.sign(o - e)
    small = np.maximum(floor, 1e-13 * np.maximum(np.abs(e), np.abs(o)))
    small = np.maximum(small, 1e-300)
    with np.errstate(divide="ignore"):
        leff = np.floor(np.log2(np.where(w > 0, w / small, 1.0)))
    leff = np.clip(leff, 0, levels).astype(np.int64)
    k = np.arange(levels)
    mask = k[None, :] < leff[:, None]
    f_out = 2.0 ** -k
    f_in = 2.0 ** -(k + 1)
    a = e[:, None] + sgn[:, None] * w[:, None] * f_in[None, :]
    b = e[:, None] + sgn[:, None] * w[:, None] * f_out[None, :]
    part = np.broadcast_to(np.arange(len(e))[:, None], a.shape)
    inner = e + sgn * w * 2.0 ** -leff
    c0 = np.concatenate([np.minimum(a, b)[mask], np.minimum(e, inner)])
    c1 = np.concatenate([np.maximum(a, b)[mask], np.maximum(e, inner)])
    idx = np.concatenate([part[mask], np.arange(len(e))])
    return c0, c1, idx


def base_cells(R, U, S, levels, floor):
    """Initial mesh from per-point breakpoints.

    Parameters
    ----------
    R : (N,) truncation radii
    U : (N, K) candidate breakpoints |y| (may lie outside (0, R))
    S : (N, K) singular flags

    Returns
    -------
    c0, c1, own : flattened cell bounds and owning point index.
    """
    N = len(R)
    Rc = R[:, None]
    U = np.where((U > 0) & (U < Rc), U, np.where(U == 0, 0.0, Rc))
    S = S & (U < Rc)
    U = np.concatenate([np.zeros((N, 1)), Rc, U], axis=1)
    S = np.concatenate([np.zeros((N, 1), bool), np.zeros((N, 1), bool), S], axis=1)
    order = np.argsort(U, axis=1, kind="stable")
    U = np.take_along_axis(U, order, axis=1)
    S = np.take_along_axis(S, order, axis=1)
    M = U.shape[1]
    for k in range(1, M):
        S[:, k] |= S[:, k - 1] & (U[:, k] == U[:, k - 1])
    for k in range(M - 2, -1, -1):
        S[:, k] |= S[:, k + 1] & (U[:, k] == U[:, k + 1])
    lo, hi = U[:, :-1], U[:, 1:]
    gl, gh = S[:, :-1], S[:, 1:]
    own_all = np.broadcast_to(np.arange(N)[:, None], lo.shape)
    valid = hi > lo
    lo, hi, gl, gh, own_all = lo[valid], hi[valid], gl[valid], gh[valid], own_all[valid]
    mid = np.where(gl & gh, 0.5 * (lo + hi), np.where(gl, hi, np.where(gh, lo, hi)))

    pieces_c0, pieces_c1, pieces_own = [], [], []
    # left parts [lo, mid]
    left = mid > lo
    plain = left & ~gl
    pieces_c0.append(lo[plain])
    pieces_c1.append(mid[plain])
    pieces_own.append(own_all[plain])
    gr = left & gl
    if gr.any():
        c0, c1, idx = _graded(lo[gr], mid[gr], levels, floor)
        pieces_c0.append(c0)
        pieces_c1.append(c1)
        pieces_own.append(own_all[gr][idx])
    # right parts [mid, hi], only present when graded towards hi
    right = (hi > mid) & gh
    if right.any():
        c0, c1, idx = _graded(hi[right], mid[right], levels, floor)
        pieces_c0.append(c0)
        pieces_c1.append(c1)
        pieces_own.append(own_all[right][idx])
    c0 = np.concatenate(pieces_c0)
    c1 = np.concatenate(pieces_c1)
    own = np.concatenate(pieces_own)
    order = np.lexsort((c0, own))
    return c0[order], c1[order], own[order]


class NonFinite(Exception):
    def __init__(self, owner, u):
        super().__init__(owner, u)
        self.owner = owner
        self.u = u


def _rule(G, alpha, own, c0, c1, nodes, weights):
    t = 0.5 * (1.0 + nodes)[None, :]
    at0 = c0 == 0.0
    u = np.empty((len(c0), len(nodes)))
    W = np.empty_like(u)
    if alpha == 1.0:
        u[:] = c0[:, None] + (c1 - c0)[:, None] * t
        W[:] = 0.5 * (c1 - c0)[:, None] * weights[None, :]
    else:
        # cells at the origin: v = u^alpha absorbs the weight exactly
        v1 = c1[at0] ** alpha
        u[at0] = (v1[:, None] * t) ** (1.0 / alpha)
        W[at0] = (0.5 * v1[:, None] * weights[None, :]) / alpha
        rest = ~at0
        ur = c0[rest, None] + (c1 - c0)[rest, None] * t
        u[rest] = ur
        W[rest] = 0.5 * (c1 - c0)[rest, None] * weights[None, :] * ur ** (alpha - 1.0)
    owners = np.broadcast_to(own[:, None], u.shape)
    vals = G(owners.ravel(), u.ravel()).reshape(u.shape)
    if not np.all(np.isfinite(vals)):
        bad = np.argwhere(~np.isfinite(vals))[0]
        raise NonFinite(int(own[bad[0]]), float(u[bad[0], bad[1]]))
    return np.sum(vals * W, axis=1)


def cell_rule(G, alpha, own, c0, c1, nodes, weights, nodes_lo, weights_lo):
    """Per-cell integrals with the n-point rule and the embedded (n-1)-point rule."""
    return (_rule(G, alpha, own, c0, c1, nodes, weights),
            _rule(G, alpha, own, c0, c1, nodes_lo, weights_lo))


def radial_adaptive(G, alpha, R, U, S, rel_tol, abs_tol, nodes, weights,
                    nodes_lo, weights_lo, levels, floor, budget):
    """Adaptive integral of G(own, u) u^(alpha-1) over (0, R[own]].

    A cell is accepted when its n-point and (n-1)-point Gauss values agree
    to within its share of the tolerance; otherwise it is bisected.
    Returns values, error estimates, evaluation counts, status codes and
    the offending u for non-finite samples (NaN otherwise).
    """
    R = np.asarray(R, dtype=float)
    N = len(R)
    values = np.zeros(N)
    errors = np.zeros(N)
    status = np.zeros(N, dtype=np.int64)
    bad_u = np.full(N, np.nan)
    nevals = np.zeros(N, dtype=np.int64)
    live = R > 0
    if not live.any():
        return values, errors, nevals, status, bad_u
    idx_live = np.flatnonzero(live)
    c0, c1, own_local = base_cells(R[live], U[live], S[live], levels, floor)
    own = idx_live[own_local]
    per_cell = len(nodes) + len(nodes_lo)

    def rule(o, a, b):
        nevals[:] += np.bincount(o, minlength=N) * per_cell
        return cell_rule(G, alpha, o, a, b, nodes, weights, nodes_lo, weights_lo)

    try:
        qa, qb = rule(own, c0, c1)
        tol = np.maximum(abs_tol, rel_tol * np.abs(np.bincount(own, weights=qa, minlength=N)))
        depth = np.zeros(len(c0), dtype=np.int64)
        while len(c0):
            err = np.abs(qa - qb)
            width = c1 - c0
            local = 0.5 * np.maximum(tol[own] * width / R[own], rel_tol * np.abs(qa))
            over = nevals[own] > budget
            tiny = width <= 1e-13 * c1
            accept = (err <= local) | (depth >= MAX_DEPTH) | tiny | over
            status[own[over & (err > local)]] = STATUS_BUDGET
            values += np.bincount(own[accept], weights=qa[accept], minlength=N)
            errors += np.bincount(own[accept], weights=err[accept], minlength=N)
            ref = ~accept
            mid = 0.5 * (c0[ref] + c1[ref])
            own = np.concatenate([own[ref], own[ref]])
            c0, c1 = (np.concatenate([c0[ref], mid]), np.concatenate([mid, c1[ref]]))
            depth = np.concatenate([depth[ref], depth[ref]]) + 1
            order = np.lexsort((c0, own))
            own, c0, c1, depth = own[order], c0[order], c1[order], depth[order]
            if len(c0):
                qa, qb = rule(own, c0, c1)
    except NonFinite as exc:
        status[exc.owner] = STATUS_NONFINITE
        bad_u[exc.owner] = exc.u
    return values, errors, nevals, status, bad_u


def bilinear_1d(xs, R, fP, fG, gP, gG, a, b, alpha, rel_tol, abs_tol,
                nodes, weights, nodes_lo, weights_lo, levels, floor, budget):
    """Integral of f(x + a y) g(x + b y) |y|^(alpha-1) over |y| <= R(x).

    Batched over the points ``xs``; see :func:`radial_adaptive` for the
    return values.
    """
    xs = np.ascontiguousarray(xs, dtype=float)
    R = np.ascontiguousarray(R, dtype=float)
    cols_u, cols_s = [], []
    for P, coef in ((fP, a), (gP, b)):
        if coef == 0.0:
            continue
        pos, sing = piece_kinks(P)
        for p, s in zip(pos, sing):
            cols_u.append(np.abs(p - xs) * (1.0 / abs(coef)))
            cols_s.append(np.full(len(xs), s))
    if cols_u:
        U = np.stack(cols_u, axis=1)
        S = np.stack(cols_s, axis=1)
    else:
        U = np.zeros((len(xs), 0))
        S = np.zeros((len(xs), 0), bool)

    def G(own, u):
        x = xs[own]
        plus = eval_pieces(fP, fG, x + a * u) * eval_pieces(gP, gG, x + b * u)
        minus = eval_pieces(fP, fG, x - a * u) * eval_pieces(gP, gG, x - b * u)
        return plus + minus

    return radial_adaptive(G, alpha, R, U, S, rel_tol, abs_tol, nodes, weights,
                           nodes_lo, weights_lo, levels, floor, budget)
