"""Compiled closed-loop propagation.

A numba port of the Python guidance/propagation loop for configurations without
third-body or radiation-pressure forces. It mirrors the reference implementation
operation by operation so the two engines agree to round-off; the Python loop in
``propagator`` stays the reference and is used for anything not covered here.
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn

from .astro import E_FLOOR, I_FLOOR

TWO_PI = 2.0 * math.pi
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
DIRECTION_FLOOR = 1e-300
N_RATE_GRID = 256
ZOOM_PASSES = 2
ZOOM_POINTS = 17

LAW_MODIFIED = 0
LAW_CLASSIC = 1

# termination codes
RUNNING, CONVERGED, PERIAPSIS, MASS_FLOOR, MAX_DURATION, FAULT = range(6)
TERMINATIONS = {
    CONVERGED: "converged",
    PERIAPSIS: "periapsis-violation",
    MASS_FLOOR: "mass-floor",
    MAX_DURATION: "max-duration",
    FAULT: "integration-fault",
}

# accumulator slots
ACC_T, ACC_STEP, ACC_THRUST, ACC_TRAVEL, ACC_MIN_RP, ACC_MAX_A, ACC_MIN_THDOT = range(7)
N_COLUMNS = 16


@njit(cache=True)
def _wrap(x):
    x = np.fmod(x, TWO_PI)
    if x < 0.0:
        x += TWO_PI
    if x >= TWO_PI:
        return 0.0
    return x


@njit(cache=True)
def _wrap_signed(x):
    x = np.fmod(x, TWO_PI)
    if x > math.pi:
        x -= TWO_PI
    elif x <= -math.pi:
        x += TWO_PI
    return x


@njit(cache=True)
def _distance(k, z, zt):
    if k >= 3:
        return _wrap_signed(z - zt)
    return z - zt


# --- modified law -----------------------------------------------------------------

@njit(cache=True)
def _modified_eval(z, f, mu, tgt, tmask, mp, grad):
    """Value of V~ and its gradient into ``grad``; mp = (wa, we, wi, zeta, delta_e, rp_min, penalty, w_p, k)."""
    a, e, i, argp = z[0], z[1], z[2], z[4]
    wa = mp[0] if tmask[0] else 0.0
    we = mp[1] if tmask[1] else 0.0
    wi = mp[2] if tmask[2] else 0.0
    zeta, delta_e, rp_min = mp[3], mp[4], mp[5]
    for k in range(5):
        grad[k] = 0.0
    c = mu / (f * f)
    a_t = tgt[0]
    a_star = zeta * a_t
    below_a = a < a_star
    ac = a if below_a else a_star
    rp = a * (1.0 - e)
    value = 0.0
    if wa > 0.0:
        k_a = c / (4.0 * ac ** 3) * (1.0 - e) / (1.0 + e)
        dk_da = -3.0 * k_a / a if below_a else 0.0
        dk_de = -c / (2.0 * ac ** 3 * (1.0 + e) ** 2)
        d = a - a_t
        dv_de = d * d * dk_de if rp > rp_min else 0.0
        value += wa * (k_a * d * d)
        grad[0] += wa * (2.0 * k_a * d + d * d * dk_da)
        grad[1] += wa * dv_de
    if we > 0.0:
        e_cap = 1.0 - delta_e
        below_e = e < e_cap
        ec = e if below_e else e_cap
        k_e = c / (4.0 * ac * (1.0 - ec * ec))
        dk_de = 2.0 * k_e * e / (1.0 - e * e) if below_e else 0.0
        dk_da = -k_e / a if below_a else 0.0
        d = e - tgt[1]
        value += we * (k_e * d * d)
        grad[0] += we * (d * d * dk_da)
        grad[1] += we * (d * d * dk_de + 2.0 * k_e * d)
    if wi > 0.0:
        ec = min(e, 1.0 - delta_e)
        s, co = math.sin(argp), math.cos(argp)
        fi = 1.0 - 0.5 * ec * ec * s * s - ec * abs(co)
        sgn = 1.0 if co > 0.0 else (-1.0 if co < 0.0 else 0.0)
        dfi = -ec * ec * s * co + ec * sgn * s
        base = c / (ac * (1.0 - ec * ec))
        k_i = base * fi * fi
        dk_da = -k_i / a if below_a else 0.0
        dk_dw = base * 2.0 * fi * dfi
        d = i - tgt[2]
        value += wi * k_i * d * d
        grad[0] += wi * d * d * dk_da
        grad[2] += wi * 2.0 * k_i * d
        grad[4] += wi * d * d * dk_dw
    if mp[6] != 0.0:
        pen = 1.0 + mp[7] * math.exp(mp[8] * (1.0 - rp / rp_min))
        dpen = (pen - 1.0) * (-mp[8] / rp_min)
        for k in range(5):
            grad[k] = grad[k] * pen
        grad[0] += value * dpen * (1.0 - e)
        grad[1] += value * dpen * (-a)
        value *= pen
    return value


# --- classical law ----------------------------------------------------------------

@njit(cache=True)
def _theta_fun(mode, th, p, e, argp):
    r = p / (1.0 + e * math.cos(th))
    if mode == 0:
        return abs(r * math.sin(th + argp))
    return math.hypot(p * math.cos(th), (p + r) * math.sin(th))


@njit(cache=True)
def _golden_max(mode, p, e, argp, lo, hi):
    c = hi - GOLDEN * (hi - lo)
    d = lo + GOLDEN * (hi - lo)
    fc, fd = _theta_fun(mode, c, p, e, argp), _theta_fun(mode, d, p, e, argp)
    for _ in range(200):
        if hi - lo < 1e-12:
            break
        if fc > fd:
            hi, d, fd = d, c, fc
            c = hi - GOLDEN * (hi - lo)
            fc = _theta_fun(mode, c, p, e, argp)
        else:
            lo, c, fc = c, d, fd
            d = lo + GOLDEN * (hi - lo)
            fd = _theta_fun(mode, d, p, e, argp)
    return max(fc, fd)


@njit(cache=True)
def _max_over_theta(mode, p, e, argp):
    step = TWO_PI / N_RATE_GRID
    best, kbest = -1.0, 0
    for k in range(N_RATE_GRID):
        v = _theta_fun(mode, k * step, p, e, argp)
        if v > best:
            best, kbest = v, k
    center = kbest * step
    return max(best, _golden_max(mode, p, e, argp, center - step, center + step))


@njit(cache=True)
def _max_rate(k, a, e, i, argp, f, b, mu):
    p = a * (1.0 - e * e)
    h = math.sqrt(mu * p)
    if k == 0:
        return 2.0 * f * math.sqrt(a ** 3 * (1.0 + e) / (mu * (1.0 - e)))
    if k == 1:
        return 2.0 * f * p / h
    if k == 2:
        fi = math.sqrt(1.0 - (e * math.sin(argp)) ** 2) - e * abs(math.cos(argp))
        return f * p / h / fi
    si, ci = math.sin(i), math.cos(i)
    if k == 3:
        return f * _max_over_theta(0, p, e, argp) / (h * si)
    inplane = _max_over_theta(1, p, e, argp) / (e * h)
    outplane = 0.0
    if b != 0.0:
        outplane = _max_over_theta(0, p, e, argp) * abs(ci) / (h * si)
    return f * (inplane + b * outplane) / (1.0 + b)


@njit(cache=True)
def _q_value(z, f, mu, tgt, tmask, cp):
    """cp = (w_a..w_argp, w_p, m, n, r_exp, k, rp_min, b, penalty)."""
    total = 0.0
    for k in range(5):
        w = cp[k]
        if not tmask[k] or w == 0.0:
            continue
        d = _distance(k, z[k], tgt[k])
        s = 1.0
        if k == 0:
            s = (1.0 + abs((z[0] - tgt[0]) / (cp[6] * tgt[0])) ** cp[7]) ** (1.0 / cp[8])
        total += w * s * (d / _max_rate(k, z[0], z[1], z[2], z[4], f, cp[11], mu)) ** 2
    if cp[12] != 0.0:
        rp = z[0] * (1.0 - z[1])
        total *= 1.0 + cp[5] * math.exp(cp[9] * (1.0 - rp / cp[10]))
    return total


@njit(cache=True)
def _classic_active(tmask, cp, active):
    on = np.zeros(5, dtype=np.bool_)
    for k in range(5):
        on[k] = tmask[k] and cp[k] > 0.0
        active[k] = False
    if on[0] or on[1]:
        active[0] = active[1] = True
    if on[2]:
        active[0] = active[1] = active[2] = active[4] = True
    if on[3]:
        for k in range(5):
            active[k] = True
    if on[4]:
        active[0] = active[1] = active[2] = active[4] = True
    if cp[12] != 0.0 and (on[0] or on[1] or on[2] or on[3] or on[4]):
        active[0] = active[1] = True


@njit(cache=True)
def _classic_eval(z, f, mu, tgt, tmask, cp, grad, active):
    value = _q_value(z, f, mu, tgt, tmask, cp)
    a_ref = tgt[0] if tmask[0] else z[0]
    zs = np.empty(5)
    for k in range(5):
        grad[k] = 0.0
        if not active[k]:
            continue
        hk = 1e-6 * a_ref if k == 0 else 1e-7
        for j in range(5):
            zs[j] = z[j]
        zs[k] = z[k] + hk
        zs[3], zs[4] = _wrap(zs[3]), _wrap(zs[4])
        qp = _q_value(zs, f, mu, tgt, tmask, cp)
        zs[k] = z[k] + -hk
        zs[3], zs[4] = _wrap(zs[3]), _wrap(zs[4])
        qm = _q_value(zs, f, mu, tgt, tmask, cp)
        grad[k] = (qp - qm) / (2.0 * hk)
    return value


# --- shared guidance pieces -------------------------------------------------------

@njit(cache=True)
def _gauss_matrix(a, e, i, argp, th, mu, phi):
    p = a * (1.0 - e * e)
    h = math.sqrt(mu * p)
    ct, st = math.cos(th), math.sin(th)
    r = p / (1.0 + e * ct)
    su, cu = math.sin(th + argp), math.cos(th + argp)
    si, ci = math.sin(i), math.cos(i)
    k = 2.0 * a * a / h
    phi[0, 0], phi[0, 1], phi[0, 2] = k * e * st, k * p / r, 0.0
    phi[1, 0], phi[1, 1], phi[1, 2] = p * st / h, ((p + r) * ct + r * e) / h, 0.0
    phi[2, 0], phi[2, 1], phi[2, 2] = 0.0, 0.0, r * cu / h
    phi[3, 0], phi[3, 1], phi[3, 2] = 0.0, 0.0, r * su / (h * si)
    phi[4, 0] = -p * ct / (e * h)
    phi[4, 1] = (p + r) * st / (e * h)
    phi[4, 2] = -r * su * ci / (h * si)


@njit(cache=True)
def _vdot_point(a, e, i, argp, g, f, mu, ct, st):
    p = a * (1.0 - e * e)
    h = math.sqrt(mu * p)
    k = 2.0 * a * a / h
    eh = e * h
    r = p / (1.0 + e * ct)
    cw, sw = math.cos(argp), math.sin(argp)
    c1 = g[0] * k * e + g[1] * p / h
    col_r = c1 * st - (g[4] * p / eh) * ct
    col_t = c1 * ct + g[0] * k + (g[1] / h) * r * (ct + e) + (g[4] / eh) * (p + r) * st
    cn = g[2] / h
    sn = (g[3] - g[4] * math.cos(i)) / (h * math.sin(i))
    col_n = r * ((cn * cw + sn * sw) * ct + (sn * cw - cn * sw) * st)
    return -f * math.sqrt(col_r * col_r + col_t * col_t + col_n * col_n)


@njit(cache=True)
def _vdot_extrema(a, e, i, argp, g, f, mu, grid_th, grid_c, grid_s):
    n = grid_th.shape[0]
    lo_k, hi_k = 0, 0
    vmin, vmax = np.inf, -np.inf
    for k in range(n):
        v = _vdot_point(a, e, i, argp, g, f, mu, grid_c[k], grid_s[k])
        if v < vmin:
            vmin, lo_k = v, k
        if v > vmax:
            vmax, hi_k = v, k
    c_lo, c_hi = grid_th[lo_k], grid_th[hi_k]
    half = grid_th[1] - grid_th[0]
    for _ in range(ZOOM_PASSES):
        best_lo, best_hi = np.inf, -np.inf
        arg_lo, arg_hi = c_lo, c_hi
        for j in range(ZOOM_POINTS):
            off = -1.0 + 2.0 * j / (ZOOM_POINTS - 1)
            th = c_lo + half * off
            v = _vdot_point(a, e, i, argp, g, f, mu, math.cos(th), math.sin(th))
            if v < best_lo:
                best_lo, arg_lo = v, th
            th = c_hi + half * off
            v = _vdot_point(a, e, i, argp, g, f, mu, math.cos(th), math.sin(th))
            if v > best_hi:
                best_hi, arg_hi = v, th
        vmin, vmax = min(vmin, best_lo), max(vmax, best_hi)
        c_lo, c_hi = arg_lo, arg_hi
        half *= 2.0 / (ZOOM_POINTS - 1)
    return vmin, vmax


# --- dynamics ---------------------------------------------------------------------

@njit(cache=True)
def _rates(y, ur, ut, un, thrust_kn, mdot, use_j2, mu, r_earth, j2, out):
    a, e, i, raan, argp, theta, m = y[0], y[1], y[2], y[3], y[4], y[5], y[6]
    if not (a > 0.0 and e < 1.0 and m > 0.0):
        return False
    e = max(abs(e), E_FLOOR)
    i = min(max(abs(i), I_FLOOR), math.pi - I_FLOOR)
    f = thrust_kn / m
    fr, ft, fn = f * ur, f * ut, f * un
    p = a * (1.0 - e * e)
    ct, st = math.cos(theta), math.sin(theta)
    if use_j2:
        r = p / (1.0 + e * ct)
        kj = -1.5 * j2 * mu * r_earth ** 2 / r ** 4
        su_ = math.sin(argp + theta)
        si_ = math.sin(i)
        fr = fr + kj * (1.0 - 3.0 * si_ * si_ * su_ * su_)
        ft = ft + kj * si_ * si_ * math.sin(2.0 * (argp + theta))
        fn = fn + kj * math.sin(2.0 * i) * su_
    h = math.sqrt(mu * p)
    r = p / (1.0 + e * ct)
    u = theta + argp
    su, cu = math.sin(u), math.cos(u)
    si = math.sin(i)
    eh = e * h
    out[0] = 2.0 * a * a / h * (e * st * fr + p / r * ft)
    out[1] = (p * st * fr + ((p + r) * ct + r * e) * ft) / h
    out[2] = r * cu / h * fn
    out[3] = r * su / (h * si) * fn
    inplane_w = (-p * ct * fr + (p + r) * st * ft) / eh
    out[4] = inplane_w - r * su * math.cos(i) / (h * si) * fn
    out[5] = h / (r * r) - inplane_w
    out[6] = mdot
    return True


@njit(cache=True)
def run_chunk(y, acc, rec, max_rows, h, t_max, rp_crash, m_floor, every,
              mu, r_earth, j2, g0, use_j2,
              thrust_n, isp,
              tgt, tmask, tol,
              law, mp, cp,
              eta_thr, eclipse_coast, grid_th, grid_c, grid_s,
              sun_lon0, sun_obl, sun_rate, epoch_s):
    """Advance until a termination event or until ``max_rows`` rows were written.

    ``y`` (7) and ``acc`` are updated in place; returns (code, rows_written).
    """
    thrust_kn = thrust_n * 1e-3
    mdot_on = -thrust_n / (isp * g0 * 1e3)
    grad = np.zeros(5)
    z = np.zeros(5)
    phi = np.zeros((5, 3))
    pu = np.zeros(5)
    active = np.zeros(5, dtype=np.bool_)
    if law == LAW_CLASSIC:
        _classic_active(tmask, cp, active)
    k1, k2, k3, k4 = np.zeros(7), np.zeros(7), np.zeros(7), np.zeros(7)
    ys = np.zeros(7)
    co_obl, si_obl = math.cos(sun_obl), math.sin(sun_obl)
    rows = 0
    while True:
        a, e, i, raan, argp, theta, m = y[0], y[1], y[2], y[3], y[4], y[5], y[6]
        t = acc[ACC_T]
        step = int(acc[ACC_STEP])
        rp = a * (1.0 - e)
        # eclipse
        p = a * (1.0 - e * e)
        r = p / (1.0 + e * math.cos(theta))
        uu = argp + theta
        cu, su = math.cos(uu), math.sin(uu)
        cO, sO = math.cos(raan), math.sin(raan)
        ci, si = math.cos(i), math.sin(i)
        px, py, pz = r * (cO * cu - sO * su * ci), r * (sO * cu + cO * su * ci), r * su * si
        lam = sun_lon0 + sun_rate * (epoch_s + t)
        cl, sl = math.cos(lam), math.sin(lam)
        sx, sy, sz = cl, sl * co_obl, sl * si_obl
        proj = px * sx + py * sy + pz * sz
        eclipsed = False
        if proj < 0.0:
            qx, qy, qz = px - proj * sx, py - proj * sy, pz - proj * sz
            eclipsed = qx * qx + qy * qy + qz * qz < r_earth * r_earth

        # guidance
        f = thrust_n / m * 1e-3
        z[0], z[1], z[2], z[3], z[4] = a, e, i, raan, argp
        converged = True
        for k in range(5):
            if tmask[k] and abs(_distance(k, z[k], tgt[k])) > tol[k]:
                converged = False
        if law == LAW_MODIFIED:
            value = _modified_eval(z, f, mu, tgt, tmask, mp, grad)
        else:
            value = _classic_eval(z, f, mu, tgt, tmask, cp, grad, active)
        _gauss_matrix(a, e, i, argp, theta, mu, phi)
        g0_, g1_, g2_ = 0.0, 0.0, 0.0
        for k in range(5):
            g0_ += phi[k, 0] * grad[k]
            g1_ += phi[k, 1] * grad[k]
            g2_ += phi[k, 2] * grad[k]
        norm = math.sqrt(g0_ * g0_ + g1_ * g1_ + g2_ * g2_)
        if not norm > DIRECTION_FLOOR or not math.isfinite(norm):
            ur = ut = un = 0.0
            cmd_on, alpha, beta, eta, vdot = False, 0.0, 0.0, 1.0, 0.0
        else:
            ur, ut, un = -g0_ / norm, -g1_ / norm, -g2_ / norm
            for k in range(5):
                pu[k] = phi[k, 0] * ur + phi[k, 1] * ut + phi[k, 2] * un
            gpu = 0.0
            for k in range(5):
                gpu += grad[k] * pu[k]
            vdot = f * gpu
            vnn, vnx = _vdot_extrema(a, e, i, argp, grad, f, mu, grid_th, grid_c, grid_s)
            # (Vdot - Vdot_nx) / (Vdot_nn - Vdot_nx): 1 at the best point, 0 at the worst
            vnn, vnx = min(vnn, vdot), max(vnx, vdot)
            span = vnn - vnx
            if span == 0.0:
                eta = 1.0
            else:
                eta = min(1.0, max(0.0, (vdot - vnx) / span))
            cmd_on = (not converged) and not (eclipsed and eclipse_coast) and eta >= eta_thr
            alpha = math.atan2(ur, ut)
            beta = math.asin(max(-1.0, min(1.0, un)))

        stop = RUNNING
        if converged:
            stop = CONVERGED
        elif rp < rp_crash:
            stop = PERIAPSIS
        elif m <= m_floor:
            stop = MASS_FLOOR
        elif t >= t_max - 1e-9:
            stop = MAX_DURATION
        thrust_on = cmd_on and stop == RUNNING

        if step % every == 0 or stop != RUNNING:
            if rows == max_rows:
                return RUNNING, rows
            acc[ACC_MIN_RP] = min(acc[ACC_MIN_RP], rp)
            acc[ACC_MAX_A] = max(acc[ACC_MAX_A], a)
            row = rec[rows]
            row[0], row[1], row[2], row[3], row[4], row[5], row[6], row[7] = t, a, e, i, raan, argp, theta, m
            row[8] = 1.0 if thrust_on else 0.0
            row[9], row[10], row[11], row[12], row[13] = alpha, beta, value, vdot, eta
            row[14] = 1.0 if eclipsed else 0.0
            row[15] = rp
            rows += 1
        else:
            acc[ACC_MIN_RP] = min(acc[ACC_MIN_RP], rp)
            acc[ACC_MAX_A] = max(acc[ACC_MAX_A], a)
        if stop != RUNNING:
            return stop, rows

        # RK4 with the command held
        tk = thrust_kn if thrust_on else 0.0
        mdot = mdot_on if thrust_on else 0.0
        ur_, ut_, un_ = ur, ut, un
        ok = _rates(y, ur_, ut_, un_, tk, mdot, use_j2, mu, r_earth, j2, k1)
        if ok:
            for j in range(7):
                ys[j] = y[j] + 0.5 * h * k1[j]
            ok = _rates(ys, ur_, ut_, un_, tk, mdot, use_j2, mu, r_earth, j2, k2)
        if ok:
            for j in range(7):
                ys[j] = y[j] + 0.5 * h * k2[j]
            ok = _rates(ys, ur_, ut_, un_, tk, mdot, use_j2, mu, r_earth, j2, k3)
        if ok:
            for j in range(7):
                ys[j] = y[j] + h * k3[j]
            ok = _rates(ys, ur_, ut_, un_, tk, mdot, use_j2, mu, r_earth, j2, k4)
        if not ok:
            return FAULT, rows
        finite = True
        for j in range(7):
            ys[j] = y[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            if not math.isfinite(ys[j]):
                finite = False
        if not finite:
            return FAULT, rows
        acc[ACC_MIN_THDOT] = min(acc[ACC_MIN_THDOT], k1[5], k2[5], k3[5], k4[5])
        if not (ys[0] > 0.0 and ys[1] < 1.0):
            return FAULT, rows
        acc[ACC_TRAVEL] += ys[5] - theta
        # regularize
        a2, e2, i2, raan2, argp2, th2 = ys[0], ys[1], ys[2], ys[3], ys[4], ys[5]
        if e2 < 0.0:
            e2, argp2, th2 = -e2, argp2 + math.pi, th2 - math.pi
        if i2 < 0.0:
            i2, raan2, argp2 = -i2, raan2 + math.pi, argp2 + math.pi
        elif i2 > math.pi:
            i2, raan2, argp2 = TWO_PI - i2, raan2 + math.pi, argp2 + math.pi
        e2 = max(e2, E_FLOOR)
        i2 = min(max(i2, I_FLOOR), math.pi - I_FLOOR)
        y[0], y[1], y[2], y[3], y[4], y[5], y[6] = a2, e2, i2, _wrap(raan2), _wrap(argp2), _wrap(th2), ys[6]
        if thrust_on:
            acc[ACC_THRUST] += h
        acc[ACC_T] = t + h
        acc[ACC_STEP] = step + 1
