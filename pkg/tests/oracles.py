"""Independent slow-path oracles: naive loop DMFT, naive dense simulator, dense kernel system."""
import numpy as np


def naive_dmft_b1(alpha, eta, m0, c0, T, omega2="corrected"):
    """Full-batch mean-field recursion, direct per-element loops."""
    m = np.zeros(T + 1); m[0] = m0
    C = np.zeros((T + 1, T + 1)); C[0, 0] = c0
    R = np.zeros((T + 1, T + 1))
    LC = np.zeros((T + 1, T + 1)); LR = np.zeros((T + 1, T + 1))

    def Cs(a, b):
        return C[a, b] if b <= a else C[b, a]

    for t in range(T):
        n = t + 1
        xr = np.zeros(n); xr[t] = 1.0 / eta
        for tp in range(t - 1, -1, -1):
            acc = 0.0
            for s in range(tp + 1, n):
                acc += Cs(s, tp) * R[s, tp] * xr[s]
            xr[tp] = -eta * acc
        xc = np.zeros(n)
        for tp in range(n):
            rhs = 0.0
            for s in range(n):
                rhs += (eta / 2.0) * (1 - m[s] ** 2 - m[tp] ** 2 + Cs(s, tp) ** 2) * xr[s]
            acc = -rhs
            for s in range(tp):
                acc -= eta * Cs(s, tp) * R[tp, s] * xc[s]
            xc[tp] = acc
        LC[t, :n] = xc; LR[t, :n] = xr

        F = np.array([LR[t, s] * Cs(t, s) + LC[t, s] * R[t, s] for s in range(n)])
        lr_sum = LR[t, :n].sum()
        m[t + 1] = m[t] - eta**2 * alpha * (sum(F[s] * m[s] for s in range(n)) - m[t] * lr_sum)

        O1 = np.zeros(n)
        for tp in range(n):
            t1 = m[t] * m[tp] * lr_sum
            t2 = sum(LC[t, s] * Cs(t, s) * R[tp, s] for s in range(tp + 1))
            t3 = sum(F[s] * Cs(tp, s) for s in range(n))
            O1[tp] = alpha * eta * (t1 - t2 - t3)

        q1 = sum(F[s] * Cs(s, sp) * F[sp] for s in range(n) for sp in range(n))
        q2 = -2 * m[t] * lr_sum * sum(F[s] * m[s] for s in range(n))
        q3 = 2 * sum(F[s] * LC[t, sp] * Cs(t, sp) * R[s, sp] for s in range(n) for sp in range(s + 1))
        drive = lr_sum * (m[t] if omega2 == "corrected" else 1.0)
        O2 = alpha**2 * eta**2 * (q1 + q2 + q3) - alpha * LC[t, t] * C[t, t] + (alpha * eta * drive) ** 2

        for tp in range(n):
            C[t + 1, tp] = C[t, tp] + eta * O1[tp]
        C[t + 1, t + 1] = C[t, t] + 2 * eta * O1[t] + eta**2 * O2
        for tp in range(n):
            acc = 0.0
            for s in range(tp + 1, n):
                acc += F[s] * R[s, tp]
            R[t + 1, tp] = (1.0 if tp == t else 0.0) + R[t, tp] - eta**2 * alpha * acc
    return m, C, R, LC, LR


def naive_sim(n, alpha, eta, m0, T, seed, b=1.0):
    """Dense float64 simulator with its own RNG and arithmetic path."""
    rng = np.random.default_rng(seed)
    g = rng.standard_normal(n)
    ws = g * np.sqrt(n) / np.linalg.norm(g)
    M = int(round(alpha * n))
    J = np.zeros((M, n, n))
    for mu in range(M):
        a = np.triu(rng.standard_normal((n, n)), 1)
        J[mu] = a + a.T
    y = np.einsum("mij,i,j->m", J, ws, ws) / (2 * n)
    g2 = rng.standard_normal(n)
    g2 -= (g2 @ ws / n) * ws
    z = g2 * np.sqrt(n) / np.linalg.norm(g2)
    w = m0 * ws + np.sqrt(1 - m0**2) * z
    mm = np.zeros(T + 1); cc = np.zeros(T + 1)
    for t in range(T):
        mm[t] = w @ ws / n; cc[t] = w @ w / n
        sigma = (rng.random(M) < b).astype(float) if b < 1 else np.ones(M)
        u = J @ w
        h = np.einsum("mi,i->m", u, w) / (2 * n)
        grad = -(sigma * (y - h)) @ u / n
        w = w - (eta / b) * grad
    mm[T] = w @ ws / n; cc[T] = w @ w / n
    return mm, cc


def assemble_kernel_system(side, t, state, sigma):
    """Dense 2(t+1) x 2(t+1) block system for the step-t kernel solve."""
    n = t + 1
    p = state.params
    M = np.zeros((2 * n, 2 * n)); rhs = np.zeros(2 * n)

    def C(a, b):
        return state.c.sym(a, b)

    def R(a, b):
        return state.r.get(a, b) if a >= b else 0.0

    m = state.m
    for tp in range(n):
        rhs[2 * tp + 1] = (1.0 if tp == t else 0.0) / p.eta
        for s in range(n):
            sh = sigma[tp] if side == "R" else sigma[s]
            d = 1.0 if s == tp else 0.0
            M[2 * tp + 0, 2 * s + 0] = d + p.eta / p.b * C(s, tp) * R(tp, s) * sh
            M[2 * tp + 0, 2 * s + 1] = p.eta / (2 * p.b) * (1 - m[s] ** 2 - m[tp] ** 2 + C(s, tp) ** 2) * sh
            M[2 * tp + 1, 2 * s + 1] = d + p.eta / p.b * C(s, tp) * R(s, tp) * sh
    return M, rhs
