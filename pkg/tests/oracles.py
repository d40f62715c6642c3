"""Independent reference implementations shared by the unit and acceptance tests.

They follow the textbook formulas with plain loops or a general-purpose
solver, and share no code with the package.
"""

import cmath
import math

import cvxpy as cp
import numpy as np


def naive_energy(x, w, hop):
    n_ch, n = x.shape
    out = []
    k = 0
    while k * hop + w <= n:
        total = 0.0
        for i in range(w):
            for j in range(n_ch):
                total += x[j, k * hop + i] ** 2
        out.append(total / (w * n_ch))
        k += 1
    return np.array(out)


def naive_periodogram(x, fs):
    n = len(x)
    mean = sum(x) / n
    x = [v - mean for v in x]
    out = []
    for k in range(n // 2 + 1):
        acc = 0j
        for i, v in enumerate(x):
            acc += v * cmath.exp(-2j * math.pi * k * i / n)
        p = abs(acc) ** 2 / (fs * n)
        if k != 0 and not (n % 2 == 0 and k == n // 2):
            p *= 2
        out.append(p)
    return [k * fs / n for k in range(n // 2 + 1)], out


def naive_features(x, fs, frac=0.05):
    n = len(x)
    rms = math.sqrt(sum(v * v for v in x) / n)
    thr = frac * rms
    mean = sum(x) / n
    m2 = sum((v - mean) ** 2 for v in x) / n
    m3 = sum((v - mean) ** 3 for v in x) / n
    m4 = sum((v - mean) ** 4 for v in x) / n
    diffs = [x[i + 1] - x[i] for i in range(n - 1)]
    nz = [abs(v) for v in x if v != 0]
    f, p = naive_periodogram(x, fs)
    tot = sum(p)
    half, acc, mdf = tot / 2, 0.0, f[-1]
    for fk, pk in zip(f, p):
        acc += pk
        if acc >= half:
            mdf = fk
            break
    return {
        "MAV": sum(abs(v) for v in x) / n,
        "RMS": rms,
        "VAR": sum(v * v for v in x) / (n - 1),
        "SD": math.sqrt(sum((v - mean) ** 2 for v in x) / (n - 1)),
        "WL": sum(abs(d) for d in diffs),
        "ZC": sum(1 for i in range(n - 1) if x[i] * x[i + 1] < 0 and abs(x[i] - x[i + 1]) >= thr),
        "SSC": sum(1 for i in range(1, n - 1)
                   if (x[i] - x[i - 1]) * (x[i] - x[i + 1]) > 0
                   and max(abs(x[i] - x[i - 1]), abs(x[i] - x[i + 1])) >= thr),
        "WAMP": sum(1 for d in diffs if abs(d) > thr),
        "IEMG": sum(abs(v) for v in x),
        "LOG": math.exp(sum(math.log(v) for v in nz) / len(nz)) if nz else 0.0,
        "DASDV": math.sqrt(sum(d * d for d in diffs) / (n - 1)),
        "SSI": sum(v * v for v in x),
        "MYOP": sum(1 for v in x if abs(v) > thr) / n,
        "AAC": sum(abs(d) for d in diffs) / n,
        "SKEW": m3 / m2 ** 1.5 if m2 > 0 else 0.0,
        "KURT": m4 / m2 ** 2 if m2 > 0 else 0.0,
        "TM3": abs(sum(v ** 3 for v in x) / n),
        "MNF": sum(fk * pk for fk, pk in zip(f, p)) / tot,
        "MDF": mdf,
        "PKF": f[max(range(len(p)), key=lambda k: (p[k], -k))],
        "MNP": tot / len(p),
        "TTP": tot,
    }


def random_instance(rng):
    n = int(rng.integers(3, 9))
    X = rng.normal(size=(n, 2))
    y = rng.choice([-1.0, 1.0], size=n)
    y[0], y[1] = 1.0, -1.0
    return X, y, float(rng.uniform(0.1, 10))


def primal_oracle(X, y, C):
    """Linear soft-margin primal via a conic solver, then the exact optimal bias interval."""
    w, b, xi = cp.Variable(2), cp.Variable(), cp.Variable(len(y))
    prob = cp.Problem(cp.Minimize(0.5 * cp.sum_squares(w) + C * cp.sum(xi)),
                      [cp.multiply(y, X @ w + b) >= 1 - xi, xi >= 0])
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    w = np.asarray(w.value)
    s = X @ w
    # hinge sum is piecewise linear in b; its minimisers form an interval bounded by breakpoints
    knots = np.sort(np.concatenate([y - s, [b.value]]))
    h = np.array([np.maximum(0, 1 - y * (s + k)).sum() for k in knots])
    best = knots[h <= h.min() + 1e-9]
    return w, best.min(), best.max()


def relative_error(a, n):
    return abs(a - n) / max(abs(a) + abs(n), 1e-8)



def max_gradient_error(loss_fn, params, grads, eps=1e-5):
    """Largest relative gap between ``grads`` and central differences of ``loss_fn()``.

    ``params`` are perturbed in place and restored.
    """
    worst = 0.0
    for P, G in zip(params, grads):
        for idx in np.ndindex(P.shape):
            orig = P[idx]
            P[idx] = orig + eps
            up = loss_fn()
            P[idx] = orig - eps
            down = loss_fn()
            P[idx] = orig
            worst = max(worst, relative_error(G[idx], (up - down) / (2 * eps)))
    return worst
