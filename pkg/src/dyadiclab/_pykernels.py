"""Pure-Python stepping kernels.

Used when the compiled ``_kernels`` extension is unavailable, and as the
reference the compiled kernels are benchmarked and tested against. Both
implement the same generic nearest-neighbour cascade

    f_n = -d_n y_n + a_n y_{n-1}^2 - b_n y_n y_{n+1},   y_0 = 0,

with y_{N+1} = y_N (``mirror``) or 0.
"""
import math

import numpy as np
from scipy.linalg.lapack import dgttrf, dgttrs

# status codes returned by advance()
DONE = 0
CHUNK = 1
UNDERFLOW = 2
STIFF = 3

ETD45 = 0
RODAS4 = 1

BACKEND = "python"

# Dormand-Prince 5(4) tableau, used in Lawson (integrating-factor) form
C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)

# RODAS4 (Hairer & Wanner), W-transformed coefficients
GAMMA = 0.25
RA = (
    (),
    (1.544,),
    (0.9466785280815826, 0.2557011698983284),
    (3.314825187068521, 2.896124015972201, 0.9986419139977817),
    (1.221224509226641, 6.019134481288629, 12.53708332932087, -0.6878860361058950),
    (1.221224509226641, 6.019134481288629, 12.53708332932087, -0.6878860361058950, 1.0),
)
RC = (
    (),
    (-5.6688,),
    (-2.430093356833875, -0.2063599157091915),
    (-0.1073529058151375, -9.594562251023355, -20.47028614809616),
    (7.496443313967647, -10.24680431464352, -33.99990352819905, 11.70890893206160),
    (8.083246795921522, -7.981132988064893, -31.52159432874371, 16.31930543123136,
     -6.058818238834054),
)


def nonlinear(y, a, b, mirror):
    """Quadratic part a_n y_{n-1}^2 - b_n y_n y_{n+1}."""
    ym = np.empty_like(y)
    ym[0] = 0.0
    ym[1:] = y[:-1]
    yp = np.empty_like(y)
    yp[:-1] = y[1:]
    yp[-1] = y[-1] if mirror else 0.0
    return a * ym * ym - b * y * yp


def rhs(y, a, b, d, mirror):
    y = np.asarray(y, dtype=float)
    return nonlinear(y, a, b, mirror) - d * y


def jacobian_bands(y, a, b, d, mirror):
    """Sub-, main and super-diagonal of the (tridiagonal) Jacobian."""
    yp = np.empty_like(y)
    yp[:-1] = y[1:]
    yp[-1] = y[-1] if mirror else 0.0
    diag = -d - b * yp
    if mirror:
        diag[-1] -= b[-1] * y[-1]
    sub = 2.0 * a[1:] * y[:-1]
    sup = -b[:-1] * y[:-1]
    return sub, diag, sup


def _rms(v):
    return math.sqrt(float(np.dot(v, v)) / v.shape[0])


def _etd45_step(y, g1, h, a, b, d, mirror):
    dh = d * h
    ex = {}

    def decay(tau):
        if tau not in ex:
            ex[tau] = np.exp(-dh * tau)
        return ex[tau]

    g = [g1]
    x = y
    for i in range(1, 7):
        acc = decay(C[i]) * y
        for j, aij in enumerate(A[i]):
            if aij != 0.0:
                acc = acc + (h * aij) * decay(C[i] - C[j]) * g[j]
        if i == 5:
            x6 = acc
        x = acc
        g.append(nonlinear(x, a, b, mirror))
    err = np.zeros_like(y)
    for j in range(7):
        if E[j] != 0.0:
            err = err + (h * E[j]) * decay(C[6] - C[j]) * g[j]
    return x, g[6], err, x6, g[5]


def _rodas4_step(y, f0, h, a, b, d, mirror):
    n = y.shape[0]
    sub, diag, sup = jacobian_bands(y, a, b, d, mirror)
    w_diag = 1.0 / (h * GAMMA) - diag
    if n == 1:  # LAPACK's tridiagonal routines reject empty off-diagonals
        if w_diag[0] == 0.0:
            return None, None
        solve = lambda r: (r / w_diag, 0)
    else:
        dl, dd, du, du2, ipiv, info = dgttrf(-sub, w_diag, -sup)
        if info != 0:
            return None, None
        solve = lambda r: dgttrs(dl, dd, du, du2, ipiv, r)
    u = []
    for i in range(6):
        if i == 0:
            ys = y
            fi = f0
        else:
            ys = y.copy()
            for j, aij in enumerate(RA[i]):
                ys = ys + aij * u[j]
            fi = rhs(ys, a, b, d, mirror)
        r = fi.copy()
        for j, cij in enumerate(RC[i] if i else ()):
            r = r + (cij / h) * u[j]
        sol, info = solve(r)
        if info != 0:
            return None, None
        u.append(sol)
    y_emb = ys
    return y_emb + u[5], u[5]


def advance(method, y0, t0, t_end, a, b, d, mirror, rtol, atol, h, hmin, hmax,
            safety, max_accept, detect_stiff=False, n_stiff=0, n_nonstiff=0):
    """Integrate from t0 towards t_end with error-controlled steps.

    Returns ``(ts, ys, fs, n_acc, n_rej, status, h_next, n_stiff, n_nonstiff)``
    where ``ts``/``ys``/``fs`` hold accepted times, states and full
    derivatives (the starting point is not included).
    """
    y = np.array(y0, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = np.asarray(d, dtype=float)
    t = float(t0)
    g = nonlinear(y, a, b, mirror)
    f = g - d * y
    ts, ys, fs = [], [], []
    n_acc = n_rej = 0
    status = DONE
    last_rejected = False
    order = 5.0 if method == ETD45 else 4.0
    facmax = 5.0 if method == ETD45 else 6.0

    while t < t_end:
        if n_acc >= max_accept:
            status = CHUNK
            break
        h = min(h, hmax)
        last = t + h >= t_end
        if last:
            h = t_end - t
        elif t + h == t:
            status = UNDERFLOW
            break
        if method == ETD45:
            y_new, g_new, errv, x6, g6 = _etd45_step(y, g, h, a, b, d, mirror)
        else:
            y_new, errv = _rodas4_step(y, f, h, a, b, d, mirror)
        if y_new is None:
            err = math.inf
        else:
            sc = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = _rms(errv / sc)
        if not math.isfinite(err):
            err = math.inf
        if err <= 1.0:
            t = t_end if last else t + h
            if method == ETD45:
                if detect_stiff:
                    # quotient of the full field (dissipation included) in the
                    # error norm: Lawson steps lose accuracy once d_n h >> 1 on
                    # forced shells, not only when the quadratic part is stiff
                    scs = atol + rtol * np.abs(y_new)
                    dy = y_new - x6
                    den = _rms(dy / scs)
                    rho = _rms((g_new - g6 - d * dy) / scs) / den if den > 0.0 else 0.0
                    # Lawson steps are accuracy-limited once d_k h = O(1) on a
                    # shell that carries amplitude
                    active = np.abs(y_new) > atol
                    dact = float(np.max(d[active])) if np.any(active) else 0.0
                    # Gershgorin bound of the quadratic part: the quotient above
                    # dilutes a single stiff shell in the RMS, and it misses
                    # oscillatory modes the explicit pair must resolve for
                    # accuracy (h G ~ 0.3 without rejections)
                    sub, diag, sup = jacobian_bands(y_new, a, b, np.zeros_like(d), mirror)
                    rows = np.abs(diag)
                    rows[1:] += np.abs(sub)
                    rows[:-1] += np.abs(sup)
                    if h * rho > 3.25 or h * float(np.max(rows)) > 0.1 or h * dact > 0.1:
                        n_nonstiff = 0
                        n_stiff += 1
                    else:
                        n_nonstiff += 1
                        if n_nonstiff == 6:
                            n_stiff = 0
                g = g_new
                f = g - d * y_new
            else:
                f = rhs(y_new, a, b, d, mirror)
            y = y_new
            ts.append(t)
            ys.append(y)
            fs.append(f)
            n_acc += 1
            fac = safety * err ** (-1.0 / order) if err > 0.0 else facmax
            fac = min(facmax, max(0.2, fac))
            if last_rejected:
                fac = min(fac, 1.0)
            h = h * fac
            last_rejected = False
            if detect_stiff and n_stiff >= 15:
                status = STIFF
                break
        else:
            n_rej += 1
            last_rejected = True
            fac = safety * err ** (-1.0 / order) if math.isfinite(err) else 0.2
            h = h * min(1.0, max(0.2, fac))
            if h < hmin or t + h == t:
                status = UNDERFLOW
                break

    n = y.shape[0]
    return (np.array(ts, dtype=float),
            np.array(ys, dtype=float).reshape(-1, n),
            np.array(fs, dtype=float).reshape(-1, n),
            n_acc, n_rej, status, h, n_stiff, n_nonstiff)
