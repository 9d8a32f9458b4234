"""Steepest descent and L-BFGS with Armijo backtracking in a general inner product.

Both methods work on any objective exposed as two callables:

``evaluate(x) -> (f, ctx)``
    objective value plus whatever the gradient needs (e.g. converged states);
``gradient(x, ctx) -> (grad, aux)``
    Riesz representative of the derivative in the given inner product.

The line search only calls ``evaluate``; the gradient is formed once per
accepted iterate.
"""
import csv
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import LineSearchFailed

log = logging.getLogger(__name__)

METHODS = ("l-bfgs", "steepest-descent")
TRACE_COLUMNS = ("iter", "J", "grad_norm", "jump_norm", "seconds")


@dataclass(frozen=True)
class OptConfig:
    gamma: float = 0.0
    alpha: float = 1.0
    it_max: int = 40
    tol_grad: float = 1e-5
    method: str = "l-bfgs"
    memory: int = 10
    c1: float = 1e-4
    max_shrink: int = 20
    timings: bool = True

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.it_max < 1:
            raise ValueError("it_max must be at least 1")
        if not self.tol_grad > 0:
            raise ValueError("tol_grad must be positive")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.memory < 1 or self.alpha <= 0:
            raise ValueError("memory and alpha must be positive")


@dataclass
class OptTrace:
    """One record per accepted iterate: (iter, J, grad_norm, jump_norm, seconds)."""

    records: list = field(default_factory=list)

    def append(self, it, J, grad_norm, jump_norm, seconds):
        self.records.append((int(it), float(J), float(grad_norm), float(jump_norm), float(seconds)))

    def __len__(self):
        return len(self.records)

    def column(self, name):
        k = TRACE_COLUMNS.index(name)
        return np.array([r[k] for r in self.records])

    @property
    def J(self):
        return self.column("J")

    @property
    def grad_norm(self):
        return self.column("grad_norm")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_COLUMNS)
            for it, J, gn, jn, sec in self.records:
                w.writerow([it, repr(J), repr(gn), repr(jn), repr(sec)])

    @classmethod
    def from_csv(cls, path):
        tr = cls()
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        for r in rows[1:]:
            tr.append(int(r[0]), *map(float, r[1:]))
        return tr


@dataclass
class OptResult:
    x: np.ndarray
    f: float
    grad: np.ndarray
    ctx: object
    aux: object
    trace: OptTrace
    iterations: int
    converged: bool
    message: str = ""


def _two_loop(grad, S, Y, inner):
    q = grad.copy()
    alphas = []
    rhos = [1.0 / inner(y, s) for s, y in zip(S, Y)]
    for s, y, rho in zip(reversed(S), reversed(Y), reversed(rhos)):
        a = rho * inner(s, q)
        alphas.append(a)
        q -= a * y
    if S:
        q *= inner(S[-1], Y[-1]) / inner(Y[-1], Y[-1])
    for (s, y, rho), a in zip(zip(S, Y, rhos), reversed(alphas)):
        b = rho * inner(y, q)
        q += (a - b) * s
    return -q


def minimize(evaluate, gradient, x0, cfg=OptConfig(), inner=None, jump_norm=None, callback=None,
             recoverable=()):
    """Minimise with the stopping rules grad norm <= ``tol_grad`` or ``it_max`` updates.

    Parameters
    ----------
    inner : callable, optional
        Inner product ``inner(a, b)``; Euclidean by default. Gradients and
        gradient norms are taken in this inner product.
    jump_norm : callable, optional
        ``jump_norm(f, ctx)`` recorded in the trace; defaults to ``sqrt(2 f)``.
    callback : callable, optional
        ``callback(k, x, ctx, aux)`` called at every accepted iterate.
    recoverable : tuple of exception types
        Failures of ``evaluate`` at line-search trial points that count as an
        infinite objective (the step is shrunk) instead of aborting.

    Raises
    ------
    LineSearchFailed
        If backtracking shrinks ``max_shrink`` times without Armijo decrease.
        The exception's ``result`` holds the last accepted iterate.
    """
    inner = inner or (lambda a, b: float(np.dot(a, b)))
    jump_norm = jump_norm or (lambda f, ctx: float(np.sqrt(max(2.0 * f, 0.0))))
    t0 = time.perf_counter()
    trace = OptTrace()
    x = np.array(x0, dtype=float)
    f, ctx = evaluate(x)
    grad, aux = gradient(x, ctx)
    S, Y = [], []

    def record(k):
        gn = np.sqrt(max(inner(grad, grad), 0.0))
        sec = time.perf_counter() - t0 if cfg.timings else 0.0
        trace.append(k, f, gn, jump_norm(f, ctx), sec)
        if callback is not None:
            callback(k, x, ctx, aux)
        log.info("iter %3d  J %.6e  |grad| %.3e", k, f, gn)
        return gn

    gn = record(0)
    k = 0
    while True:
        if gn <= cfg.tol_grad:
            return OptResult(x, f, grad, ctx, aux, trace, k, True, "gradient tolerance reached")
        if k >= cfg.it_max:
            return OptResult(x, f, grad, ctx, aux, trace, k, False, "iteration cap reached")
        if cfg.method == "steepest-descent":
            d = -cfg.alpha * grad
        else:
            d = _two_loop(grad, S, Y, inner)
            if inner(d, grad) >= 0:
                S.clear()
                Y.clear()
            if not S:
                # no curvature information yet: cap the first trial step at unit length
                d = -grad / max(1.0, gn)
        slope = inner(grad, d)
        t = 1.0
        for _ in range(cfg.max_shrink):
            xt = x + t * d
            try:
                ft, ctxt = evaluate(xt)
            except recoverable as exc:
                log.debug("trial step %.3e rejected: %s", t, exc)
                ft, ctxt = np.inf, None
            if np.isfinite(ft) and ft <= f + cfg.c1 * t * slope:
                break
            t *= 0.5
        else:
            res = OptResult(x, f, grad, ctx, aux, trace, k, False, "line search failed")
            raise LineSearchFailed(f"no sufficient decrease after {cfg.max_shrink} shrinks at iteration {k}", res)
        gt, auxt = gradient(xt, ctxt)
        s, y = xt - x, gt - grad
        if cfg.method == "l-bfgs" and inner(s, y) > 1e-14 * np.sqrt(inner(s, s) * inner(y, y)):
            S.append(s)
            Y.append(y)
            if len(S) > cfg.memory:
                S.pop(0)
                Y.pop(0)
        x, f, ctx, grad, aux = xt, ft, ctxt, gt, auxt
        k += 1
        gn = record(k)
