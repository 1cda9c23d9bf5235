"""Independent oracles shared by the test modules."""

import math
from fractions import Fraction

import numpy as np

FD_STEP = 1e-5
FD_RTOL = 1e-3
# below this magnitude both derivatives are noise-level and compared absolutely
FD_FLOOR = 1e-6


def central_differences(loss_fn, params, step=FD_STEP):
    """Element-wise central differences of a scalar ``loss_fn(params)``."""
    grads = {}
    for name, value in params.items():
        g = np.zeros_like(value)
        flat = value.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = loss_fn(params)
            flat[i] = orig - step
            down = loss_fn(params)
            flat[i] = orig
            gflat[i] = (up - down) / (2 * step)
        grads[name] = g
    return grads


def relative_errors(analytic, numeric, floor=FD_FLOOR):
    out = {}
    for name in analytic:
        a, n = analytic[name], numeric[name]
        out[name] = np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return out


def brute_force_ranks(x):
    """rank_i = 1 + #smaller + (#equal - 1) / 2, by explicit counting."""
    out = []
    for xi in x:
        smaller = sum(1 for xj in x if xj < xi)
        equal = sum(1 for xj in x if xj == xi)
        out.append(1 + smaller + (equal - 1) / 2)
    return out


def spearman_no_ties_exact(x, y):
    """Exact rational rank-difference formula, valid only without ties."""
    rx, ry = brute_force_ranks(x), brute_force_ranks(y)
    n = len(x)
    d2 = sum(Fraction(int(a - b)) ** 2 for a, b in zip(rx, ry))
    return 1 - Fraction(6) * d2 / (n * (n * n - 1))


def pearson(x, y):
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    mx, my = sum(x) / len(x), sum(y) / len(y)
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def sqdist(u, v):
    u = np.asarray(u, dtype=float) / np.linalg.norm(u)
    v = np.asarray(v, dtype=float) / np.linalg.norm(v)
    return float(sum((a - b) ** 2 for a, b in zip(u, v)))


def ratio_oracles(left, right, pool):
    """Double-loop Ratio 1 / Ratio 2 over unordered distinct pool pairs."""
    pos = [sqdist(a, b) for a, b in zip(left, right)]
    neg = []
    for i in range(len(pool)):
        for j in range(i + 1, len(pool)):
            neg.append(sqdist(pool[i], pool[j]))
    r1 = (sum(pos) / len(pos)) / (sum(neg) / len(neg))
    r2 = math.log(sum(math.exp(2 * d) for d in pos) / len(pos)) / math.log(sum(math.exp(2 * d) for d in neg) / len(neg))
    return r1, r2


def gram_eigen_singular_values(x):
    x = np.asarray(x, dtype=float)
    g = x.T @ x if x.shape[0] >= x.shape[1] else x @ x.T
    ev = np.linalg.eigvalsh(g)
    return np.sqrt(np.clip(ev, 0, None))[::-1]


def model_gradient_errors(build_loss, params, floor=FD_FLOOR):
    """Max relative error per parameter group between backprop and central differences.

    ``build_loss(pv)`` maps tape variables to a scalar loss Var.
    """
    from sfplab import tape as T

    params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}

    def value(p):
        tape = T.GradTape()
        out = float(build_loss({k: tape.param(k, v) for k, v in p.items()}).value)
        tape.clear()
        return out

    tape = T.GradTape()
    analytic = T.backprop(tape, build_loss({k: tape.param(k, v) for k, v in params.items()}))
    tape.clear()
    numeric = central_differences(value, params)
    return {k: float(e.max()) for k, e in relative_errors(analytic, numeric, floor).items()}


# criterion -> (ok, detail), filled by test_acceptance and echoed in the terminal summary
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(number: int, title: str, ok: bool, detail: str = ""):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title}" + (f" | {detail}" if detail else "")
    ACCEPTANCE[number] = (ok, line)
    print(line)
    return ok
