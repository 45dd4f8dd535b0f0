/* Fixed-step RK4 for the exercise-augmented Topp model, LANES inputs at once.
 *
 * Lanes share the initial state and parameters and differ only in the held
 * input. Loops over lanes are written so the compiler can vectorise them;
 * the per-lane arithmetic is the same sequence of IEEE operations as the
 * scalar kernel, so results are bitwise identical provided FMA contraction
 * is disabled (-ffp-contract=off).
 */
#ifndef TOPPMPC_RK4_LANES_H
#define TOPPMPC_RK4_LANES_H

#include <math.h>

#define LANES 8
#define NEG_TOL 1e-6

typedef struct {
    double R0, Eg0, sigma, alpha, k, d0, c;
    double r1r, r2r, r1a, r2a;
    double zeta_p, kp2, zeta_a, ka2;
    double S_I_target, zeta_si, k_n_si;
    double src, k_s, conv;
} topp_par;

static inline void topp_rhs_lanes(const topp_par *q, const double *u,
                                  const double *restrict G, const double *restrict Ins, const double *restrict b,
                                  const double *restrict S, const double *restrict V,
                                  double *restrict dG, double *restrict dI, double *restrict db,
                                  double *restrict dS, double *restrict dV)
{
    for (int l = 0; l < LANES; ++l) {
        double G2 = G[l] * G[l];
        double V2 = V[l] * V[l];
        double psi1 = 1.0 + q->zeta_p * V2 / (q->kp2 + V2);
        double psi2 = 1.0 - q->zeta_a * V2 / (q->ka2 + V2);
        double P = q->r1r * G[l] - q->r2r * G2;
        double A = q->d0 - q->r1a * G[l] + q->r2a * G2;
        dG[l] = q->R0 - (q->Eg0 + S[l] * Ins[l]) * G[l];
        dI[l] = b[l] * q->sigma * G2 / (q->alpha + G2) - q->k * Ins[l];
        db[l] = (P * psi1 - A * psi2) * b[l];
        dS[l] = -q->c * (S[l] - q->S_I_target) * (1.0 - q->zeta_si * V[l] / (q->k_n_si + V[l]));
        dV[l] = q->conv * (q->src * u[l] - q->k_s * V[l]);
    }
}

static inline void topp_rhs_one(const topp_par *q, double u, const double *restrict x,
                                double *restrict out)
{
    double G = x[0], Ins = x[1], b = x[2], S = x[3], V = x[4];
    double G2 = G * G;
    double V2 = V * V;
    double psi1 = 1.0 + q->zeta_p * V2 / (q->kp2 + V2);
    double psi2 = 1.0 - q->zeta_a * V2 / (q->ka2 + V2);
    double P = q->r1r * G - q->r2r * G2;
    double A = q->d0 - q->r1a * G + q->r2a * G2;
    out[0] = q->R0 - (q->Eg0 + S * Ins) * G;
    out[1] = b * q->sigma * G2 / (q->alpha + G2) - q->k * Ins;
    out[2] = (P * psi1 - A * psi2) * b;
    out[3] = -q->c * (S - q->S_I_target) * (1.0 - q->zeta_si * V / (q->k_n_si + V));
    out[4] = q->conv * (q->src * u - q->k_s * V);
}

/* x: 5*LANES, component-major (x[j*LANES + l]). status/acc: LANES.
 * A lane that fails keeps its status and the integral up to the failing step;
 * its state is left unspecified. */
static void topp_advance_lanes(const topp_par *q, double *x, const double *u,
                               long n, double h, int *status, double *acc)
{
    double k1[5 * LANES], k2[5 * LANES], k3[5 * LANES], k4[5 * LANES];
    double y[5 * LANES], gold[LANES];
    const double hh = 0.5 * h;
    const double h6 = h / 6.0;
#define C5(a) (a), (a) + LANES, (a) + 2 * LANES, (a) + 3 * LANES, (a) + 4 * LANES
    for (long s = 0; s < n; ++s) {
        for (int l = 0; l < LANES; ++l) gold[l] = x[l];
        topp_rhs_lanes(q, u, C5(x), C5(k1));
        for (int i = 0; i < 5 * LANES; ++i) y[i] = x[i] + hh * k1[i];
        topp_rhs_lanes(q, u, C5(y), C5(k2));
        for (int i = 0; i < 5 * LANES; ++i) y[i] = x[i] + hh * k2[i];
        topp_rhs_lanes(q, u, C5(y), C5(k3));
        for (int i = 0; i < 5 * LANES; ++i) y[i] = x[i] + h * k3[i];
        topp_rhs_lanes(q, u, C5(y), C5(k4));
        int flag = 0;
        for (int i = 0; i < 5 * LANES; ++i) {
            x[i] = x[i] + h6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            /* catches negatives and NaN; +inf handled below via x - x */
            flag |= !(x[i] >= 0.0) | !(x[i] - x[i] == 0.0);
        }
        if (flag) {
            for (int l = 0; l < LANES; ++l) {
                if (status[l]) continue;
                for (int j = 0; j < 5; ++j) {
                    double v = x[j * LANES + l];
                    if (!isfinite(v)) { status[l] = 1; break; }
                    if (v < 0.0) {
                        if (v < -NEG_TOL) { status[l] = 2; break; }
                        x[j * LANES + l] = 0.0;
                    }
                }
            }
        }
        for (int l = 0; l < LANES; ++l) {
            if (!status[l]) acc[l] = acc[l] + hh * (gold[l] * gold[l] + x[l] * x[l]);
        }
    }
#undef C5
}

/* Single-input variant with the same arithmetic; returns 0, 1 (non-finite)
 * or 2 (negative excursion) and stores the failing step in *fail_at. */
static int topp_advance_one(const topp_par *q, double *x, double u, long n, double h,
                            double *g2int, long *nclamp, long *fail_at)
{
    double k1[5], k2[5], k3[5], k4[5], y[5];
    const double hh = 0.5 * h;
    const double h6 = h / 6.0;
    double acc = 0.0;
    for (long s = 0; s < n; ++s) {
        double g_old = x[0];
        topp_rhs_one(q, u, x, k1);
        for (int j = 0; j < 5; ++j) y[j] = x[j] + hh * k1[j];
        topp_rhs_one(q, u, y, k2);
        for (int j = 0; j < 5; ++j) y[j] = x[j] + hh * k2[j];
        topp_rhs_one(q, u, y, k3);
        for (int j = 0; j < 5; ++j) y[j] = x[j] + h * k3[j];
        topp_rhs_one(q, u, y, k4);
        int flag = 0;
        for (int j = 0; j < 5; ++j) {
            x[j] = x[j] + h6 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            flag |= !(x[j] >= 0.0) | !(x[j] - x[j] == 0.0);
        }
        if (flag) {
            for (int j = 0; j < 5; ++j) {
                if (!isfinite(x[j])) { *fail_at = s; *g2int = acc; return 1; }
                if (x[j] < 0.0) {
                    if (x[j] < -NEG_TOL) { *fail_at = s; *g2int = acc; return 2; }
                    x[j] = 0.0;
                    *nclamp += 1;
                }
            }
        }
        acc = acc + hh * (g_old * g_old + x[0] * x[0]);
    }
    *g2int = acc;
    return 0;
}

#endif
