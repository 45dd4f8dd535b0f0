"""Reference computations that share no code with the package.

The right-hand side is written out again from the model equations with the
nominal constants typed in by hand, and integrated with scipy's DOP853.
"""
import math

import numpy as np
from scipy.integrate import solve_ivp

NOMINAL = dict(
    R0=864.0, Eg0=1.44, sigma=43.2, alpha=20000.0, k=432.0, d0=0.06, c=0.05,
    r1r=0.42e-3, r2r=0.12e-5, r1a=0.42e-3, r2a=0.12e-5,
    zeta_p=1e-4, k_p=1e6, zeta_a=1e-3, k_a=1e6,
    S_I_target=0.028, zeta_si=1.4, k_n_si=5e6,
    SR=0.045, K_IL6=0.004, k_s=-math.log(0.8) / 80640.0,
)
X0 = (100.0, 10.0, 300.0, 0.72, 0.0)


def rhs(t, x, u, p=NOMINAL):
    G, I, b, S, V = x
    P = p["r1r"] * G - p["r2r"] * G ** 2
    A = p["d0"] - p["r1a"] * G + p["r2a"] * G ** 2
    psi1 = 1 + p["zeta_p"] * V ** 2 / (p["k_p"] ** 2 + V ** 2)
    psi2 = 1 - p["zeta_a"] * V ** 2 / (p["k_a"] ** 2 + V ** 2)
    return [
        p["R0"] - (p["Eg0"] + S * I) * G,
        b * p["sigma"] * G ** 2 / (p["alpha"] + G ** 2) - p["k"] * I,
        (P * psi1 - A * psi2) * b,
        -p["c"] * (S - p["S_I_target"]) * (1 - p["zeta_si"] * V / (p["k_n_si"] + V)),
        1440.0 * (p["SR"] / p["K_IL6"] * u - p["k_s"] * V),
    ]


def solve(x0, u_pieces, t_eval=None, p=NOMINAL, rtol=1e-10, atol=1e-10):
    """Integrate over consecutive ``(t0, t1, u)`` pieces; returns final state."""
    x = np.array(x0, dtype=float)
    for t0, t1, u in u_pieces:
        sol = solve_ivp(rhs, (t0, t1), x, method="DOP853", args=(u, p), rtol=rtol, atol=atol)
        assert sol.success, sol.message
        x = sol.y[:, -1]
    return x


def window_cost(x0, u, lam, window=40.0, p=NOMINAL):
    """Integral of G^2 + lam*u^2 over the window, with G^2 as an extra state."""
    def f(t, y):
        return rhs(t, y[:5], u, p) + [y[0] ** 2]
    sol = solve_ivp(f, (0.0, window), list(x0) + [0.0], method="DOP853", rtol=1e-11,
                    atol=1e-9)
    return sol.y[5, -1] + lam * u * u * window
