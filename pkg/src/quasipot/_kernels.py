"""Numba kernels shared by the public operations and the ordered solver loop.

Everything numerical lives here exactly once: the expression VM, segment
actions for the four quadrature rules, the one-point / triangle / upwind
finite-difference updates, the indexed binary heap, and the main
label-setting loop.  Public modules wrap these kernels; the solver calls
them with field samples preloaded on a half-step grid (every sample an
update ever needs -- segment endpoints and midpoints between mesh points --
lands on that grid, so the hot loop performs no field evaluations at all).

No fastmath anywhere: results must be bit-reproducible run to run.
"""

import numpy as np
from numba import njit

# ---- lowered field kinds ---------------------------------------------------
FIELD_LINEAR = 0
FIELD_LIMIT_CYCLE = 1
FIELD_EXPR = 2

# ---- expression VM opcodes -------------------------------------------------
OP_CONST = 0
OP_X1 = 1
OP_X2 = 2
OP_ADD = 3
OP_SUB = 4
OP_MUL = 5
OP_DIV = 6
OP_POW = 7
OP_NEG = 8
OP_SIN = 9
OP_COS = 10
OP_EXP = 11
OP_SQRT = 12
OP_ABS = 13

VM_STACK_SIZE = 64

# ---- quadrature rules / methods --------------------------------------------
RULE_R = 0
RULE_MID = 1
RULE_TR = 2
RULE_SIM = 3

# ---- point states ----------------------------------------------------------
ST_UNKNOWN = 0
ST_CONSIDERED = 1
ST_FRONT = 2
ST_ACCEPTED = 3

# update provenance kinds
UPD_NONE = 0
UPD_INIT = 1
UPD_ONEPT = 2
UPD_TRIANGLE = 3

# guards (see the updates module contract)
NORM_EPS = 1e-14          # ||b_s|| / ||b_ms|| below this is singular
ROOT_TOL_S = 1e-12        # bracket width tolerance
ROOT_TOL_G_REL = 1e-12    # |g| tolerance, scaled by the problem
ROOT_MAX_ITER = 50
QUAD_RESID_REL = 1e-10    # residual filter for de-squared quadratic roots
TRI_SCAN = 8              # subdivision for bracketing the roots of g
RADIUS_SLACK = 1e-12      # inclusive ball test: d^2 <= r^2 * (1 + slack)

INF = np.inf

# neighbor offsets, clockwise from N; must match mesh.NEIGHBOR_OFFSETS
_NOFF = np.array([[0, 1], [1, 1], [1, 0], [1, -1],
                  [0, -1], [-1, -1], [-1, 0], [-1, 1]], dtype=np.int64)


# ===========================================================================
# field evaluation

@njit(cache=True, error_model="numpy")
def vm_eval(code, consts, stack, x1, x2):
    sp = 0
    for k in range(code.shape[0]):
        op = code[k, 0]
        if op == OP_CONST:
            stack[sp] = consts[code[k, 1]]
            sp += 1
        elif op == OP_X1:
            stack[sp] = x1
            sp += 1
        elif op == OP_X2:
            stack[sp] = x2
            sp += 1
        elif op == OP_NEG:
            stack[sp - 1] = -stack[sp - 1]
        elif op == OP_SIN:
            stack[sp - 1] = np.sin(stack[sp - 1])
        elif op == OP_COS:
            stack[sp - 1] = np.cos(stack[sp - 1])
        elif op == OP_EXP:
            stack[sp - 1] = np.exp(stack[sp - 1])
        elif op == OP_SQRT:
            stack[sp - 1] = np.sqrt(stack[sp - 1])
        elif op == OP_ABS:
            stack[sp - 1] = abs(stack[sp - 1])
        else:
            sp -= 1
            a = stack[sp - 1]
            b = stack[sp]
            if op == OP_ADD:
                stack[sp - 1] = a + b
            elif op == OP_SUB:
                stack[sp - 1] = a - b
            elif op == OP_MUL:
                stack[sp - 1] = a * b
            elif op == OP_DIV:
                stack[sp - 1] = a / b
            else:
                stack[sp - 1] = a ** b
    return stack[0]


@njit(cache=True)
def field_eval(kind, params, code1, consts1, code2, consts2, stack, x, y):
    if kind == FIELD_LINEAR:
        a = params[0]
        return -2.0 * x - a * y, 2.0 * a * x - y
    elif kind == FIELD_LIMIT_CYCLE:
        w = 1.0 - (x * x + y * y)
        return y + x * w, -x + y * w
    else:
        return (vm_eval(code1, consts1, stack, x, y),
                vm_eval(code2, consts2, stack, x, y))


@njit(cache=True)
def fill_half_grid(kind, params, code1, consts1, code2, consts2,
                   n1, n2, x1min, x2min, h1, h2):
    """b on the (2*n1-1) x (2*n2-1) half-step grid, row-major, (.,2)."""
    m1 = 2 * n1 - 1
    m2 = 2 * n2 - 1
    out = np.empty((m1 * m2, 2))
    stack = np.empty(VM_STACK_SIZE)
    half1 = 0.5 * h1
    half2 = 0.5 * h2
    for p in range(m1):
        x = x1min + half1 * p
        base = p * m2
        for q in range(m2):
            y = x2min + half2 * q
            bx, by = field_eval(kind, params, code1, consts1,
                                code2, consts2, stack, x, y)
            out[base + q, 0] = bx
            out[base + q, 1] = by
    return out


# ===========================================================================
# segment actions (pure arithmetic on prefetched samples)

@njit(cache=True)
def seg_action(rule, dx, dy, bex, bey, bsx, bsy, bmx, bmy):
    """Action of the straight segment with displacement d = x - x_s.

    be/bs/bm are the field samples at the segment end, start and midpoint;
    only the samples the rule touches are read.
    """
    ell = np.sqrt(dx * dx + dy * dy)
    if ell == 0.0:
        return 0.0
    if rule == RULE_R:
        return np.sqrt(bex * bex + bey * bey) * ell - (bex * dx + bey * dy)
    if rule == RULE_MID:
        return np.sqrt(bmx * bmx + bmy * bmy) * ell - (bmx * dx + bmy * dy)
    if rule == RULE_TR:
        nbs = np.sqrt(bsx * bsx + bsy * bsy)
        nbe = np.sqrt(bex * bex + bey * bey)
        return 0.5 * ((nbs + nbe) * ell
                      - ((bsx + bex) * dx + (bsy + bey) * dy))
    nbs = np.sqrt(bsx * bsx + bsy * bsy)
    nbm = np.sqrt(bmx * bmx + bmy * bmy)
    nbe = np.sqrt(bex * bex + bey * bey)
    return ((nbs + 4.0 * nbm + nbe) * ell
            - ((bsx + 4.0 * bmx + bex) * dx
               + (bsy + 4.0 * bmy + bey) * dy)) / 6.0


# ===========================================================================
# triangle update, quadrature rules
#
# Geometry convention: x_s = s*x0 + (1-s)*x1, w(s) = x - x_s = e + s*d with
# e = x - x1 and d = x1 - x0.  The interpolated samples are
# b_s = b1 + s*(b0 - b1) and b_ms = bm1 + s*(bm0 - bm1).

@njit(cache=True)
def _tri_g(rule, s, ex, ey, dx, dy, du,
           bx, by, b0x, b0y, b1x, b1y, bm0x, bm0y, bm1x, bm1y):
    """Derivative g(s) of the triangle objective; NaN flags a singular s."""
    wx = ex + s * dx
    wy = ey + s * dy
    nw = np.sqrt(wx * wx + wy * wy)
    if nw < NORM_EPS:
        return np.nan
    wd = (wx * dx + wy * dy) / nw
    if rule == RULE_R:
        nb = np.sqrt(bx * bx + by * by)
        return du + nb * wd - (bx * dx + by * dy)
    if rule == RULE_MID:
        dmx = bm0x - bm1x
        dmy = bm0y - bm1y
        bmsx = bm1x + s * dmx
        bmsy = bm1y + s * dmy
        nbms = np.sqrt(bmsx * bmsx + bmsy * bmsy)
        if nbms < NORM_EPS:
            return np.nan
        return (du + nbms * wd
                + nw * (bmsx * dmx + bmsy * dmy) / nbms
                - (bmsx * dx + bmsy * dy)
                - (wx * dmx + wy * dmy))
    if rule == RULE_TR:
        dbx = b0x - b1x
        dby = b0y - b1y
        bsx = b1x + s * dbx
        bsy = b1y + s * dby
        nbs = np.sqrt(bsx * bsx + bsy * bsy)
        if nbs < NORM_EPS:
            return np.nan
        nb = np.sqrt(bx * bx + by * by)
        return du + 0.5 * ((nbs + nb) * wd
                           + nw * (bsx * dbx + bsy * dby) / nbs
                           - ((bsx + bx) * dx + (bsy + by) * dy)
                           - (wx * dbx + wy * dby))
    dbx = b0x - b1x
    dby = b0y - b1y
    bsx = b1x + s * dbx
    bsy = b1y + s * dby
    nbs = np.sqrt(bsx * bsx + bsy * bsy)
    dmx = bm0x - bm1x
    dmy = bm0y - bm1y
    bmsx = bm1x + s * dmx
    bmsy = bm1y + s * dmy
    nbms = np.sqrt(bmsx * bmsx + bmsy * bmsy)
    if nbs < NORM_EPS or nbms < NORM_EPS:
        return np.nan
    nb = np.sqrt(bx * bx + by * by)
    return du + ((nbs + 4.0 * nbms + nb) * wd
                 + nw * (4.0 * (bmsx * dmx + bmsy * dmy) / nbms
                         + (bsx * dbx + bsy * dby) / nbs)
                 - ((bsx + 4.0 * bmsx + bx) * dx
                    + (bsy + 4.0 * bmsy + by) * dy)
                 - (wx * (4.0 * dmx + dbx) + wy * (4.0 * dmy + dby))) / 6.0


@njit(cache=True)
def _tri_f(rule, s, u1, u0, ex, ey, dx, dy,
           bx, by, b0x, b0y, b1x, b1y, bm0x, bm0y, bm1x, bm1y):
    """Triangle objective f(s) = s*u0 + (1-s)*u1 + action(x_s -> x)."""
    wx = ex + s * dx
    wy = ey + s * dy
    bsx = b1x + s * (b0x - b1x)
    bsy = b1y + s * (b0y - b1y)
    bmsx = bm1x + s * (bm0x - bm1x)
    bmsy = bm1y + s * (bm0y - bm1y)
    return (s * u0 + (1.0 - s) * u1
            + seg_action(rule, wx, wy, bx, by, bsx, bsy, bmsx, bmsy))


@njit(cache=True)
def triangle_update(rule, x1x, x1y, u1, x0x, x0y, u0, xx, xy,
                    bx, by, b0x, b0y, b1x, b1y, bm0x, bm0y, bm1x, bm1y):
    """Minimize the triangle objective over s in [0, 1].

    Returns (value, s_star, root_warning).  +inf means no interior
    minimizer (endpoint minima are the one-point updates' business).
    OLIM-R solves the de-squared quadratic and filters roots against the
    original stationarity equation; the other rules gate on
    g(0) < 0 < g(1) and run the hybrid secant/bisection iteration.
    """
    ex = xx - x1x
    ey = xy - x1y
    dx = x1x - x0x
    dy = x1y - x0y
    du = u0 - u1

    if rule == RULE_R:
        nb2 = bx * bx + by * by
        nb = np.sqrt(nb2)
        nd2 = dx * dx + dy * dy
        kp = (bx * dx + by * dy) - du
        fac = nb2 * nd2 - kp * kp
        scale = nb2 * nd2 + kp * kp
        if abs(fac) <= 1e-14 * scale or scale == 0.0:
            return INF, 0.0, 0
        ed = ex * dx + ey * dy
        A = nd2 * fac
        B = ed * fac
        C = nb2 * ed * ed - kp * kp * (ex * ex + ey * ey)
        disc = B * B - A * C
        if disc < 0.0:
            return INF, 0.0, 0
        sq = np.sqrt(disc)
        if B >= 0.0:
            q = -(B + sq)
        else:
            q = -(B - sq)
        best = INF
        sbest = 0.0
        gtol = QUAD_RESID_REL * nb * np.sqrt(nd2)
        for which in range(2):
            if which == 0:
                if q == 0.0:
                    continue
                s = C / q
            else:
                s = q / A
            if not (0.0 < s < 1.0):
                continue
            # polish the root against the un-squared equation: near a double
            # root the quadratic loses half the digits, and g is monotone
            # here (g' >= 0 by Cauchy-Schwarz), so Newton is safe
            g = 0.0
            nw = 0.0
            wx = 0.0
            wy = 0.0
            for _ in range(3):
                wx = ex + s * dx
                wy = ey + s * dy
                nw = np.sqrt(wx * wx + wy * wy)
                if nw < NORM_EPS:
                    break
                g = du + nb * (wx * dx + wy * dy) / nw - (bx * dx + by * dy)
                if abs(g) <= gtol:
                    break
                wd = wx * dx + wy * dy
                gp = nb * (nd2 * nw * nw - wd * wd) / (nw * nw * nw)
                if gp <= 1e-300:
                    break
                s2 = s - g / gp
                if not (0.0 < s2 < 1.0):
                    break
                s = s2
            if nw < NORM_EPS or abs(g) > gtol:
                continue
            val = s * u0 + (1.0 - s) * u1 + nb * nw - (bx * wx + by * wy)
            if val < best:
                best = val
                sbest = s
        return best, sbest, 0

    # Sample g on a uniform subdivision and root-find inside every
    # bracketing subinterval; g can have several roots when the
    # interpolated field passes near its zero (close to equilibria), and
    # gating on the endpoint signs alone provably drops valid interior
    # minima there.  A singular sample poisons the whole update.
    nb = np.sqrt(bx * bx + by * by)
    nd = np.sqrt(dx * dx + dy * dy)
    tol_g = ROOT_TOL_G_REL * (abs(du) + nb * nd)
    gs = np.empty(TRI_SCAN + 1)
    for k in range(TRI_SCAN + 1):
        gk = _tri_g(rule, k / TRI_SCAN, ex, ey, dx, dy, du, bx, by,
                    b0x, b0y, b1x, b1y, bm0x, bm0y, bm1x, bm1y)
        if np.isnan(gk):
            return INF, 0.0, 0
        gs[k] = gk
    best = INF
    sbest = 0.0
    warn_total = 0
    for k in range(TRI_SCAN):
        ga = gs[k]
        gb = gs[k + 1]
        if not (ga < 0.0 and gb >= 0.0):
            continue  # only minima: g crosses upward
        a = k / TRI_SCAN
        b = (k + 1) / TRI_SCAN
        xprev = a
        gprev = ga
        xcur = b
        gcur = gb
        s = 0.5 * (a + b)
        warn = 1
        for _ in range(ROOT_MAX_ITER):
            den = gcur - gprev
            if abs(den) > 1e-300:
                c = xcur - gcur * (xcur - xprev) / den
            else:
                c = 0.5 * (a + b)
            # secant iterate escaping the bracket, or stalling: bisect
            if not (a < c < b) or c == xcur or c == xprev:
                c = 0.5 * (a + b)
            gc = _tri_g(rule, c, ex, ey, dx, dy, du, bx, by,
                        b0x, b0y, b1x, b1y, bm0x, bm0y, bm1x, bm1y)
            if np.isnan(gc):
                return INF, 0.0, 0
            if abs(gc) <= tol_g:
                s = c
                warn = 0
                break
            if gc < 0.0:
                a = c
                ga = gc
            else:
                b = c
                gb = gc
            xprev = xcur
            gprev = gcur
            xcur = c
            gcur = gc
            if b - a <= ROOT_TOL_S:
                s = 0.5 * (a + b)
                warn = 0
                break
        warn_total += warn
        if 0.0 < s < 1.0:
            val = _tri_f(rule, s, u1, u0, ex, ey, dx, dy, bx, by,
                         b0x, b0y, b1x, b1y, bm0x, bm0y, bm1x, bm1y)
            if val < best:
                best = val
                sbest = s
    return best, sbest, warn_total


@njit(cache=True)
def oum_triangle(x1x, x1y, u1, x0x, x0y, u0, xx, xy, bx, by):
    """Upwind finite-difference triangle update.

    Solves the quadratic for u obtained by eliminating grad U from the
    stationary Hamilton-Jacobi relation with U linear on the triangle,
    with b frozen at the updated point.  A root is accepted only if
    u >= min(u0, u1) and the characteristic direction b + grad U crosses
    the open segment (x1, x0) (both barycentric coefficients positive).
    Returns (u, s_star) with s_star recovered from the characteristic,
    or (+inf, 0).
    """
    p00 = xx - x0x
    p01 = xy - x0y
    p10 = xx - x1x
    p11 = xy - x1y
    det = p00 * p11 - p01 * p10
    scale = np.sqrt((p00 * p00 + p01 * p01) * (p10 * p10 + p11 * p11))
    if abs(det) <= 1e-14 * scale or scale == 0.0:
        return INF, 0.0
    iv00 = p11 / det
    iv01 = -p01 / det
    iv10 = -p10 / det
    iv11 = p00 / det
    m00 = iv00 * iv00 + iv10 * iv10
    m01 = iv00 * iv01 + iv10 * iv11
    m11 = iv01 * iv01 + iv11 * iv11
    q0 = iv00 * bx + iv10 * by
    q1 = iv01 * bx + iv11 * by
    a = m00 + 2.0 * m01 + m11
    bq = -2.0 * (m00 * u0 + m01 * (u0 + u1) + m11 * u1) + 2.0 * (q0 + q1)
    c = (m00 * u0 * u0 + 2.0 * m01 * u0 * u1 + m11 * u1 * u1
         - 2.0 * (q0 * u0 + q1 * u1))
    disc = bq * bq - 4.0 * a * c
    if disc < 0.0 or a <= 0.0:
        return INF, 0.0
    sq = np.sqrt(disc)
    umin = min(u0, u1)
    # only the larger root can satisfy the characteristic condition
    for which in range(2):
        if which == 0:
            u = (-bq + sq) / (2.0 * a)
        else:
            u = (-bq - sq) / (2.0 * a)
        if u < umin:
            continue
        z0 = u - u0
        z1 = u - u1
        gx = iv00 * z0 + iv01 * z1
        gy = iv10 * z0 + iv11 * z1
        cx = bx + gx
        cy = by + gy
        c0 = iv00 * cx + iv10 * cy
        c1 = iv01 * cx + iv11 * cy
        if c0 > 0.0 and c1 > 0.0:
            return u, c0 / (c0 + c1)
    return INF, 0.0


# ===========================================================================
# indexed binary min-heap (keys + node ids + position map)
#
# Comparison is lexicographic on (key, node id) so pop order is fully
# deterministic: equal keys resolve to the lowest linear index.

@njit(cache=True)
def _heap_less(k1, n1, k2, n2):
    return k1 < k2 or (k1 == k2 and n1 < n2)


@njit(cache=True)
def heap_sift_up(keys, nodes, pos, i):
    k = keys[i]
    n = nodes[i]
    while i > 0:
        p = (i - 1) >> 1
        if _heap_less(k, n, keys[p], nodes[p]):
            keys[i] = keys[p]
            nodes[i] = nodes[p]
            pos[nodes[i]] = i
            i = p
        else:
            break
    keys[i] = k
    nodes[i] = n
    pos[n] = i


@njit(cache=True)
def heap_sift_down(keys, nodes, pos, size, i):
    k = keys[i]
    n = nodes[i]
    while True:
        l = 2 * i + 1
        if l >= size:
            break
        r = l + 1
        c = l
        if r < size and _heap_less(keys[r], nodes[r], keys[l], nodes[l]):
            c = r
        if _heap_less(keys[c], nodes[c], k, n):
            keys[i] = keys[c]
            nodes[i] = nodes[c]
            pos[nodes[i]] = i
            i = c
        else:
            break
    keys[i] = k
    nodes[i] = n
    pos[n] = i


@njit(cache=True)
def heap_push(keys, nodes, pos, size, key, node):
    keys[size] = key
    nodes[size] = node
    pos[node] = size
    heap_sift_up(keys, nodes, pos, size)
    return size + 1


@njit(cache=True)
def heap_pop(keys, nodes, pos, size):
    key = keys[0]
    node = nodes[0]
    pos[node] = -1
    size -= 1
    if size > 0:
        keys[0] = keys[size]
        nodes[0] = nodes[size]
        pos[nodes[0]] = 0
        heap_sift_down(keys, nodes, pos, size, 0)
    return key, node, size


@njit(cache=True)
def heap_decrease(keys, nodes, pos, node, key):
    i = pos[node]
    keys[i] = key
    heap_sift_up(keys, nodes, pos, i)


@njit(cache=True)
def heap_ok(keys, nodes, pos, size):
    for i in range(size):
        if pos[nodes[i]] != i:
            return False
        if i > 0:
            p = (i - 1) >> 1
            if _heap_less(keys[i], nodes[i], keys[p], nodes[p]):
                return False
    return True


# ===========================================================================
# solver loop helpers (half-grid indexed)

@njit(cache=True)
def _onept_grid(rule, bgrid, m2, i0, j0, u0, ii, jj,
                x1min, x2min, h1, h2):
    """One-point update value from mesh point (i0,j0) to mesh point (ii,jj)."""
    dx = (ii - i0) * h1
    dy = (jj - j0) * h2
    pe = (2 * ii) * m2 + 2 * jj
    ps = (2 * i0) * m2 + 2 * j0
    pm = (i0 + ii) * m2 + (j0 + jj)
    return u0 + seg_action(rule, dx, dy,
                           bgrid[pe, 0], bgrid[pe, 1],
                           bgrid[ps, 0], bgrid[ps, 1],
                           bgrid[pm, 0], bgrid[pm, 1])


@njit(cache=True)
def _tri_grid(rule, bgrid, m2, i1, j1, u1, i0, j0, u0, ii, jj,
              x1min, x2min, h1, h2):
    """Triangle update for mesh points; returns (value, length, warn)."""
    x1x = x1min + i1 * h1
    x1y = x2min + j1 * h2
    x0x = x1min + i0 * h1
    x0y = x2min + j0 * h2
    xx = x1min + ii * h1
    xy = x2min + jj * h2
    pe = (2 * ii) * m2 + 2 * jj
    p0 = (2 * i0) * m2 + 2 * j0
    p1 = (2 * i1) * m2 + 2 * j1
    pm0 = (i0 + ii) * m2 + (j0 + jj)
    pm1 = (i1 + ii) * m2 + (j1 + jj)
    val, s, warn = triangle_update(
        rule, x1x, x1y, u1, x0x, x0y, u0, xx, xy,
        bgrid[pe, 0], bgrid[pe, 1],
        bgrid[p0, 0], bgrid[p0, 1],
        bgrid[p1, 0], bgrid[p1, 1],
        bgrid[pm0, 0], bgrid[pm0, 1],
        bgrid[pm1, 0], bgrid[pm1, 1])
    if val < INF:
        wx = (xx - x1x) + s * (x1x - x0x)
        wy = (xy - x1y) + s * (x1y - x0y)
        return val, np.sqrt(wx * wx + wy * wy), warn
    return INF, 0.0, warn


@njit(cache=True)
def _oum_tri_grid(bgrid, m2, i1, j1, u1, i0, j0, u0, ii, jj,
                  x1min, x2min, h1, h2):
    x1x = x1min + i1 * h1
    x1y = x2min + j1 * h2
    x0x = x1min + i0 * h1
    x0y = x2min + j0 * h2
    xx = x1min + ii * h1
    xy = x2min + jj * h2
    pe = (2 * ii) * m2 + 2 * jj
    val, s = oum_triangle(x1x, x1y, u1, x0x, x0y, u0, xx, xy,
                          bgrid[pe, 0], bgrid[pe, 1])
    if val < INF:
        wx = (xx - x1x) + s * (x1x - x0x)
        wy = (xy - x1y) + s * (x1y - x0y)
        return val, np.sqrt(wx * wx + wy * wy)
    return INF, 0.0


@njit(cache=True)
def _has_considered_nb(state, n1, n2, i, j):
    for t in range(8):
        ii = i + _NOFF[t, 0]
        jj = j + _NOFF[t, 1]
        if 0 <= ii < n1 and 0 <= jj < n2:
            if state[ii * n2 + jj] == ST_CONSIDERED:
                return True
    return False


@njit(cache=True)
def _has_open_nb(state, n1, n2, i, j):
    """Any Considered or Unknown neighbor?  A front point retires to
    Accepted only when this is False (the Accepted-state definition: only
    Accepted / front neighbors remain).  For K = 1 a front point can still
    border Unknown territory beyond the update radius and must stay a
    usable update source."""
    for t in range(8):
        ii = i + _NOFF[t, 0]
        jj = j + _NOFF[t, 1]
        if 0 <= ii < n1 and 0 <= jj < n2:
            st = state[ii * n2 + jj]
            if st == ST_CONSIDERED or st == ST_UNKNOWN:
                return True
    return False


@njit(cache=True)
def _hierarchical_value(rule, bgrid, m2, u, state, n1, n2,
                        x1min, x2min, h1, h2, ii, jj, bimax, bjmax, r2,
                        tri_cap):
    """Fresh tentative value at a point newly made Considered (OLIM).

    One-point updates from every front point inside the update radius;
    triangle updates only around the one-point argmin source.
    Returns (value, length, kind, src0, src1, warn_count).
    """
    best = INF
    blen = 0.0
    bi0 = -1
    bj0 = -1
    i_lo = max(0, ii - bimax)
    i_hi = min(n1 - 1, ii + bimax)
    j_lo = max(0, jj - bjmax)
    j_hi = min(n2 - 1, jj + bjmax)
    for i0 in range(i_lo, i_hi + 1):
        dx1 = (i0 - ii) * h1
        dd1 = dx1 * dx1
        if dd1 > r2:
            continue
        base = i0 * n2
        for j0 in range(j_lo, j_hi + 1):
            y0 = base + j0
            if state[y0] != ST_FRONT:
                continue
            dx2 = (j0 - jj) * h2
            if dd1 + dx2 * dx2 > r2:
                continue
            v = _onept_grid(rule, bgrid, m2, i0, j0, u[y0], ii, jj,
                            x1min, x2min, h1, h2)
            if v < best:
                best = v
                bi0 = i0
                bj0 = j0
    if bi0 < 0:
        return INF, 0.0, UPD_NONE, -1, -1, 0
    src0 = bi0 * n2 + bj0
    dlx = (ii - bi0) * h1
    dly = (jj - bj0) * h2
    blen = np.sqrt(dlx * dlx + dly * dly)
    kind = UPD_ONEPT
    src1 = -1
    warn = 0
    u0 = u[src0]
    for t in range(8):
        i1 = bi0 + _NOFF[t, 0]
        j1 = bj0 + _NOFF[t, 1]
        if not (0 <= i1 < n1 and 0 <= j1 < n2):
            continue
        y1 = i1 * n2 + j1
        if state[y1] < ST_FRONT:
            continue
        v, length, w = _tri_grid(rule, bgrid, m2, i1, j1, u[y1],
                                 bi0, bj0, u0, ii, jj,
                                 x1min, x2min, h1, h2)
        warn += w
        if v < best and length <= tri_cap:
            best = v
            blen = length
            kind = UPD_TRIANGLE
            src1 = y1
    return best, blen, kind, src0, src1, warn


@njit(cache=True)
def _oum_full_value(bgrid, m2, u, state, n1, n2,
                    x1min, x2min, h1, h2, ii, jj, bimax, bjmax, r2,
                    tri_cap):
    """Tentative value at a point from the whole near front (OUM mode).

    Right-hand one-point updates from every front point inside the radius
    plus finite-difference triangle updates from every adjacent front pair
    whose first member is inside the radius (no hierarchy).
    """
    best = INF
    blen = 0.0
    kind = UPD_NONE
    src0 = -1
    src1 = -1
    i_lo = max(0, ii - bimax)
    i_hi = min(n1 - 1, ii + bimax)
    j_lo = max(0, jj - bjmax)
    j_hi = min(n2 - 1, jj + bjmax)
    for i0 in range(i_lo, i_hi + 1):
        dx1 = (i0 - ii) * h1
        dd1 = dx1 * dx1
        if dd1 > r2:
            continue
        base = i0 * n2
        for j0 in range(j_lo, j_hi + 1):
            y0 = base + j0
            if state[y0] != ST_FRONT:
                continue
            dx2 = (j0 - jj) * h2
            d0sq = dd1 + dx2 * dx2
            if d0sq > r2:
                continue
            u0 = u[y0]
            v = _onept_grid(RULE_R, bgrid, m2, i0, j0, u0, ii, jj,
                            x1min, x2min, h1, h2)
            if v < best:
                best = v
                blen = np.sqrt(d0sq)
                kind = UPD_ONEPT
                src0 = y0
                src1 = -1
            for t in range(8):
                i1 = i0 + _NOFF[t, 0]
                j1 = j0 + _NOFF[t, 1]
                if not (0 <= i1 < n1 and 0 <= j1 < n2):
                    continue
                y1 = i1 * n2 + j1
                if state[y1] < ST_FRONT:
                    continue
                # each unordered in-ball pair once
                if y1 < y0 and state[y1] == ST_FRONT:
                    e1 = (i1 - ii) * h1
                    e2 = (j1 - jj) * h2
                    if e1 * e1 + e2 * e2 <= r2:
                        continue
                v, length = _oum_tri_grid(bgrid, m2, i1, j1, u[y1],
                                          i0, j0, u0, ii, jj,
                                          x1min, x2min, h1, h2)
                if v < best and length <= tri_cap:
                    best = v
                    blen = length
                    kind = UPD_TRIANGLE
                    src0 = y0
                    src1 = y1
    return best, blen, kind, src0, src1, 0


@njit(cache=True)
def _new_front_value(rule, bgrid, m2, u, state, n1, n2,
                     x1min, x2min, h1, h2, ii, jj, ic, jc, r2, tri_cap):
    """Candidate for an existing Considered (ii,jj) from the new front
    point (ic,jc): one-point update plus triangles pairing (ic,jc) with
    its front neighbors (step 3 of the loop, hierarchical strategy).
    One-point length is capped at the update radius, triangle length at
    radius + cell diagonal."""
    xc = ic * n2 + jc
    uc = u[xc]
    best = INF
    blen = 0.0
    kind = UPD_NONE
    src0 = -1
    src1 = -1
    dlx = (ii - ic) * h1
    dly = (jj - jc) * h2
    d0sq = dlx * dlx + dly * dly
    if d0sq <= r2:
        best = _onept_grid(rule, bgrid, m2, ic, jc, uc, ii, jj,
                           x1min, x2min, h1, h2)
        blen = np.sqrt(d0sq)
        kind = UPD_ONEPT
        src0 = xc
    warn = 0
    for t in range(8):
        i1 = ic + _NOFF[t, 0]
        j1 = jc + _NOFF[t, 1]
        if not (0 <= i1 < n1 and 0 <= j1 < n2):
            continue
        y1 = i1 * n2 + j1
        if state[y1] < ST_FRONT:
            continue
        v, length, w = _tri_grid(rule, bgrid, m2, i1, j1, u[y1],
                                 ic, jc, uc, ii, jj,
                                 x1min, x2min, h1, h2)
        warn += w
        if v < best and length <= tri_cap:
            best = v
            blen = length
            kind = UPD_TRIANGLE
            src0 = xc
            src1 = y1
    return best, blen, kind, src0, src1, warn


# ===========================================================================
# main ordered loop

@njit(cache=True)
def solve_loop(n1, n2, x1min, x2min, h1, h2, K, rule, use_oum,
               stop_on_boundary, bgrid,
               u, state, order, ulen, ukind, usrc0, usrc1,
               hkeys, hnodes, hpos, hsize):
    """Label-setting loop over the mesh.  Returns
    (n_accepted, boundary_idx, max_accept_decrease, state_violations,
     front_violations, heap_violations, root_warnings,
     lower_bound_violations).

    The four per-iteration steps: (1) pop the smallest Considered point and
    make it front, (2) retire front neighbors with no open neighbor left,
    (3) improve Considered points near the new front point, (4) give
    Unknown neighbors of the new front point tentative values and enqueue
    them.  Values only ever decrease; states only ever advance.

    Neighborhood semantics: scans enumerate the (2K+1)^2 index box while
    the updates themselves enforce Euclidean length caps -- K*h for
    one-point updates, K*h + cell diagonal for triangle updates.  A
    triangle update can therefore improve a point slightly beyond K*h of
    the front point that triggered the touch; the caps keep every recorded
    update length within the documented bound.
    """
    h = max(h1, h2)
    radius = K * h
    r2 = radius * radius * (1.0 + RADIUS_SLACK)
    tri_cap = radius + np.sqrt(h1 * h1 + h2 * h2) + 1e-12
    bimax = int(radius / h1 + RADIUS_SLACK)
    bjmax = int(radius / h2 + RADIUS_SLACK)
    m2 = 2 * n2 - 1

    naccept = 0
    boundary_idx = -1
    prev_key = -INF
    max_dec = 0.0
    stviol = 0
    frviol = 0
    hpviol = 0
    rootwarn = 0
    lbviol = 0

    while hsize > 0:
        if (naccept & 1023) == 0:
            if not heap_ok(hkeys, hnodes, hpos, hsize):
                hpviol += 1
        key, xc, hsize = heap_pop(hkeys, hnodes, hpos, hsize)
        if state[xc] != ST_CONSIDERED:
            stviol += 1
        state[xc] = ST_FRONT
        order[xc] = naccept
        naccept += 1
        if key < prev_key and prev_key - key > max_dec:
            max_dec = prev_key - key
        prev_key = key
        ic = xc // n2
        jc = xc % n2

        # step 2: front neighbors that lost their last open neighbor retire
        for t in range(8):
            i1 = ic + _NOFF[t, 0]
            j1 = jc + _NOFF[t, 1]
            if not (0 <= i1 < n1 and 0 <= j1 < n2):
                continue
            nb = i1 * n2 + j1
            if state[nb] == ST_FRONT and \
                    not _has_open_nb(state, n1, n2, i1, j1):
                state[nb] = ST_ACCEPTED

        if stop_on_boundary and (ic == 0 or ic == n1 - 1
                                 or jc == 0 or jc == n2 - 1):
            boundary_idx = xc
            break

        # step 3: improve Considered points in the scan box around xc
        i_lo = max(0, ic - bimax)
        i_hi = min(n1 - 1, ic + bimax)
        j_lo = max(0, jc - bjmax)
        j_hi = min(n2 - 1, jc + bjmax)
        for i2 in range(i_lo, i_hi + 1):
            base = i2 * n2
            for j2 in range(j_lo, j_hi + 1):
                y = base + j2
                if state[y] != ST_CONSIDERED:
                    continue
                if use_oum:
                    val, length, kind, s0, s1, w = _oum_full_value(
                        bgrid, m2, u, state, n1, n2, x1min, x2min, h1, h2,
                        i2, j2, bimax, bjmax, r2, tri_cap)
                else:
                    val, length, kind, s0, s1, w = _new_front_value(
                        rule, bgrid, m2, u, state, n1, n2,
                        x1min, x2min, h1, h2, i2, j2, ic, jc, r2, tri_cap)
                rootwarn += w
                if val < u[y]:
                    lo = u[s0]
                    if s1 >= 0 and u[s1] < lo:
                        lo = u[s1]
                    if val < lo - 1e-12 * (1.0 + abs(lo)):
                        lbviol += 1
                    u[y] = val
                    ulen[y] = length
                    ukind[y] = kind
                    usrc0[y] = s0
                    usrc1[y] = s1
                    heap_decrease(hkeys, hnodes, hpos, y, val)

        # step 4: promote Unknown neighbors of the new front point
        for t in range(8):
            i2 = ic + _NOFF[t, 0]
            j2 = jc + _NOFF[t, 1]
            if not (0 <= i2 < n1 and 0 <= j2 < n2):
                continue
            nb = i2 * n2 + j2
            if state[nb] != ST_UNKNOWN:
                continue
            if use_oum:
                val, length, kind, s0, s1, w = _oum_full_value(
                    bgrid, m2, u, state, n1, n2, x1min, x2min, h1, h2,
                    i2, j2, bimax, bjmax, r2, tri_cap)
            else:
                val, length, kind, s0, s1, w = _hierarchical_value(
                    rule, bgrid, m2, u, state, n1, n2, x1min, x2min, h1, h2,
                    i2, j2, bimax, bjmax, r2, tri_cap)
            rootwarn += w
            if val < INF:
                lo = u[s0]
                if s1 >= 0 and u[s1] < lo:
                    lo = u[s1]
                if val < lo - 1e-12 * (1.0 + abs(lo)):
                    lbviol += 1
                state[nb] = ST_CONSIDERED
                u[nb] = val
                ulen[nb] = length
                ukind[nb] = kind
                usrc0[nb] = s0
                usrc1[nb] = s1
                hsize = heap_push(hkeys, hnodes, hpos, hsize, val, nb)

        # the new front point itself may already be interior
        if not _has_open_nb(state, n1, n2, ic, jc):
            state[xc] = ST_ACCEPTED

        # incremental front audit around the only place states changed:
        # front points must still touch open territory, Accepted must not
        for t in range(-1, 8):
            if t < 0:
                i2 = ic
                j2 = jc
            else:
                i2 = ic + _NOFF[t, 0]
                j2 = jc + _NOFF[t, 1]
            if not (0 <= i2 < n1 and 0 <= j2 < n2):
                continue
            st = state[i2 * n2 + j2]
            if st == ST_FRONT:
                if not _has_open_nb(state, n1, n2, i2, j2):
                    frviol += 1
            elif st == ST_ACCEPTED:
                if _has_open_nb(state, n1, n2, i2, j2):
                    frviol += 1

    return (naccept, boundary_idx, max_dec, stviol, frviol, hpviol,
            rootwarn, lbviol)
