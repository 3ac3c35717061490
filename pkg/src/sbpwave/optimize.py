"""Quasi-Newton minimization of the regularized loss.

Dense-inverse-Hessian BFGS with a strong-Wolfe line search (c1 = 1e-4,
c2 = 0.9); an L-BFGS memory variant is available behind a switch for larger
design vectors.  Trial points that fail to evaluate (folded meshes) report
J = +inf, which the line search treats as a rejected step.  The stopping
test is ||g||_inf <= tol * max(1, |J|).
"""

from dataclasses import dataclass, field

import numpy as np

WOLFE_C1 = 1e-4
WOLFE_C2 = 0.9
MAX_TRIALS = 20


@dataclass
class LossConfig:
    gamma: float = 1e-5
    tolerance: float = 1e-6
    max_iterations: int = 400
    l_bfgs: bool = False
    l_bfgs_memory: int = 20

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")


@dataclass
class OptimizationState:
    p: np.ndarray
    J: float
    g: np.ndarray
    n_iter: int
    converged: bool
    message: str
    history: list = field(default_factory=list)  # (iter, J, ginf, step)
    p_history: list = field(default_factory=list)


def _line_search(f, p, d, J0, g0, max_trials=MAX_TRIALS):
    """Strong Wolfe line search (bracket + zoom); returns (t, J, g, evals).

    f(p) -> (J, g).  Infinite J is treated as out-of-bounds: shrink.
    """
    slope0 = float(g0 @ d)
    if slope0 >= 0:
        return None
    t_prev, J_prev = 0.0, J0
    t = 1.0
    t_max = 1e3
    evals = []

    def phi(t):
        J, g = f(p + t * d)
        evals.append((t, J, g))
        return J, g

    def zoom(lo, hi, J_lo, g_lo):
        for _ in range(max_trials):
            # bisection with a quadratic-interpolation bias
            t_mid = 0.5 * (lo + hi)
            J_m, g_m = phi(t_mid)
            if not np.isfinite(J_m) or J_m > J0 + WOLFE_C1 * t_mid * slope0 or J_m >= J_lo:
                hi = t_mid
            else:
                s = float(g_m @ d)
                if abs(s) <= -WOLFE_C2 * slope0:
                    return t_mid, J_m, g_m
                if s * (hi - lo) >= 0:
                    hi = lo
                lo, J_lo = t_mid, J_m
        return None

    J_cur = J0
    for trial in range(max_trials):
        J_t, g_t = phi(t)
        if not np.isfinite(J_t):
            t = 0.5 * (t_prev + t)
            continue
        if J_t > J0 + WOLFE_C1 * t * slope0 or (trial > 0 and J_t >= J_prev):
            out = zoom(t_prev, t, J_prev, None)
            break
        s = float(g_t @ d)
        if abs(s) <= -WOLFE_C2 * slope0:
            out = (t, J_t, g_t)
            break
        if s >= 0:
            out = zoom(t, t_prev, J_t, None)
            break
        t_prev, J_prev = t, J_t
        t = min(2.0 * t, t_max)
    else:
        out = None
    if out is None:
        # fall back to the best finite Armijo point seen, if any
        ok = [e for e in evals if np.isfinite(e[1]) and e[1] < J0]
        if not ok:
            return None
        best = min(ok, key=lambda e: e[1])
        return best
    return out


class _LbfgsMemory:
    def __init__(self, memory):
        self.memory = memory
        self.s = []
        self.y = []

    def push(self, s, y):
        self.s.append(s)
        self.y.append(y)
        if len(self.s) > self.memory:
            self.s.pop(0)
            self.y.pop(0)

    def direction(self, g):
        q = g.copy()
        alphas = []
        for s, y in zip(reversed(self.s), reversed(self.y)):
            rho = 1.0 / float(y @ s)
            a = rho * float(s @ q)
            alphas.append((a, rho, s, y))
            q -= a * y
        if self.s:
            gam = float(self.s[-1] @ self.y[-1]) / float(self.y[-1] @ self.y[-1])
            q *= gam
        for a, rho, s, y in reversed(alphas):
            b = rho * float(y @ q)
            q += (a - b) * s
        return -q

    def reset(self):
        self.s.clear()
        self.y.clear()


def minimize(evaluate, p0, config=None, iteration_callback=None):
    """BFGS loop over evaluate(p) -> (J, g).

    Stops when ||g||_inf <= tolerance * max(1, |J|) or at max_iterations;
    on a failed line search returns the best-so-far state flagged
    non-converged.
    """
    config = config or LossConfig()
    p = np.array(p0, dtype=float)
    J, g = evaluate(p)
    n = len(p)
    Hinv = np.eye(n)
    lmem = _LbfgsMemory(config.l_bfgs_memory) if config.l_bfgs else None
    history = [(0, J, float(np.abs(g).max()), 0.0)]
    p_hist = [p.copy()]

    def done(J, g):
        return float(np.abs(g).max()) <= config.tolerance * max(1.0, abs(J))

    if done(J, g):
        return OptimizationState(p=p, J=J, g=g, n_iter=0, converged=True,
                                 message="initial point satisfies the tolerance",
                                 history=history, p_history=p_hist)

    for it in range(1, config.max_iterations + 1):
        d = lmem.direction(g) if config.l_bfgs else -(Hinv @ g)
        if float(g @ d) >= 0:
            Hinv = np.eye(n)
            if lmem:
                lmem.reset()
            d = -g
        res = _line_search(evaluate, p, d, J, g)
        if res is None:
            return OptimizationState(
                p=p, J=J, g=g, n_iter=it - 1, converged=False,
                message="line search failed; returning best iterate",
                history=history, p_history=p_hist,
            )
        t, J_new, g_new = res
        s = t * d
        y = g_new - g
        sy = float(s @ y)
        if sy <= 1e-14 * float(np.linalg.norm(s) * np.linalg.norm(y) + 1e-300):
            Hinv = np.eye(n)  # curvature safeguard: reset, never corrupt
            if lmem:
                lmem.reset()
        else:
            if config.l_bfgs:
                lmem.push(s, y)
            else:
                rho = 1.0 / sy
                V = np.eye(n) - rho * np.outer(s, y)
                Hinv = V @ Hinv @ V.T + rho * np.outer(s, s)
        p = p + s
        J, g = J_new, g_new
        history.append((it, J, float(np.abs(g).max()), t))
        p_hist.append(p.copy())
        if iteration_callback is not None:
            iteration_callback(it, p, J, g)
        if done(J, g):
            return OptimizationState(p=p, J=J, g=g, n_iter=it, converged=True,
                                     message="gradient tolerance reached",
                                     history=history, p_history=p_hist)
    return OptimizationState(p=p, J=J, g=g, n_iter=config.max_iterations,
                             converged=False, message="max iterations reached",
                             history=history, p_history=p_hist)
