"""Pure-Python twin of ``_kernel.pyx``.

Same arithmetic in the same order as the compiled kernel, so the two
backends agree bitwise. Slow: roughly two orders of magnitude behind the
extension.
"""
import math

import numpy as np

NEG_TOL = 1e-6


def _unpack(p, conv):
    p = [float(v) for v in p]
    return (p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], p[8], p[9], p[10],
            p[11], p[12] * p[12], p[13], p[14] * p[14], p[15], p[16], p[17],
            p[18] / p[19], p[20], float(conv))


def advance(x, u, n_steps, h, params, conv):
    (R0, Eg0, sigma, alpha, k, d0, c, r1r, r2r, r1a, r2a, zeta_p, kp2, zeta_a, ka2,
     S_I_target, zeta_si, k_n_si, src, k_s, conv) = _unpack(params, conv)
    u = float(u)
    h = float(h)
    hh = 0.5 * h
    h6 = h / 6.0
    isfinite = math.isfinite

    def rhs(G, I, b, S, V):
        G2 = G * G
        V2 = V * V
        psi1 = 1.0 + zeta_p * V2 / (kp2 + V2)
        psi2 = 1.0 - zeta_a * V2 / (ka2 + V2)
        P = r1r * G - r2r * G2
        A = d0 - r1a * G + r2a * G2
        return (R0 - (Eg0 + S * I) * G,
                b * sigma * G2 / (alpha + G2) - k * I,
                (P * psi1 - A * psi2) * b,
                -c * (S - S_I_target) * (1.0 - zeta_si * V / (k_n_si + V)),
                conv * (src * u - k_s * V))

    xs = [float(v) for v in x]
    acc = 0.0
    nclamp = 0
    for s in range(int(n_steps)):
        g_old = xs[0]
        k1 = rhs(*xs)
        k2 = rhs(*[xs[j] + hh * k1[j] for j in range(5)])
        k3 = rhs(*[xs[j] + hh * k2[j] for j in range(5)])
        k4 = rhs(*[xs[j] + h * k3[j] for j in range(5)])
        for j in range(5):
            v = xs[j] + h6 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            if not isfinite(v):
                x[:] = xs[:j] + [v] + xs[j + 1:]
                return 1, acc, nclamp, s
            if v < 0.0:
                if v < -NEG_TOL:
                    x[:] = xs[:j] + [v] + xs[j + 1:]
                    return 2, acc, nclamp, s
                v = 0.0
                nclamp += 1
            xs[j] = v
        g_new = xs[0]
        acc = acc + hh * (g_old * g_old + g_new * g_new)
    x[:] = xs
    return 0, acc, nclamp, -1


def advance_batch(x0, us, n_steps, h, params, conv):
    """Vectorised over candidates; per-lane arithmetic matches ``advance``."""
    (R0, Eg0, sigma, alpha, k, d0, c, r1r, r2r, r1a, r2a, zeta_p, kp2, zeta_a, ka2,
     S_I_target, zeta_si, k_n_si, src, k_s, conv) = _unpack(params, conv)
    us = np.asarray(us, dtype=np.float64)
    m = us.shape[0]
    h = float(h)
    hh = 0.5 * h
    h6 = h / 6.0
    X = np.tile(np.asarray(x0, dtype=np.float64), (m, 1)).T.copy()
    status = np.zeros(m, dtype=np.int32)
    acc = np.zeros(m)
    alive = np.ones(m, dtype=bool)

    def rhs(Y):
        G, I, b, S, V = Y
        G2 = G * G
        V2 = V * V
        psi1 = 1.0 + zeta_p * V2 / (kp2 + V2)
        psi2 = 1.0 - zeta_a * V2 / (ka2 + V2)
        P = r1r * G - r2r * G2
        A = d0 - r1a * G + r2a * G2
        return np.array([R0 - (Eg0 + S * I) * G,
                         b * sigma * G2 / (alpha + G2) - k * I,
                         (P * psi1 - A * psi2) * b,
                         -c * (S - S_I_target) * (1.0 - zeta_si * V / (k_n_si + V)),
                         conv * (src * us - k_s * V)])

    with np.errstate(all="ignore"):
        for _ in range(int(n_steps)):
            g_old = X[0].copy()
            k1 = rhs(X)
            k2 = rhs(X + hh * k1)
            k3 = rhs(X + hh * k2)
            k4 = rhs(X + h * k3)
            Xn = X + h6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            bad = alive & ~np.isfinite(Xn).all(axis=0)
            status[bad] = 1
            neg = alive & ~bad & (Xn < -NEG_TOL).any(axis=0)
            status[neg] = 2
            alive &= ~(bad | neg)
            Xn = np.where(Xn < 0.0, 0.0, Xn)
            X = np.where(alive, Xn, X)
            acc = np.where(alive, acc + hh * (g_old * g_old + X[0] * X[0]), acc)
    return status, acc, X.T.copy()
