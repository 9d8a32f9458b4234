"""Online phase: reduced state and adjoint solves and the reduced optimisation loop."""
import logging
from dataclasses import dataclass

import numpy as np

from ..ddsolver.optim import OptConfig, minimize
from ..errors import NewtonDiverged, SingularSystem
from ..fem.problem import StateSolution

log = logging.getLogger(__name__)

REDUCED_TOL = 1e-12
GRADIENT_MODES = ("consistent", "adjoint_basis")
SINGULAR_RCOND = 1e-13


@dataclass
class ReducedState:
    a: np.ndarray          # velocity coefficients (homogeneous part)
    b: np.ndarray          # pressure coefficients
    iterations: int = 0


@dataclass
class ReducedSolution:
    states: list
    adjoints: list
    g: np.ndarray
    trace: object
    iterations: int
    converged: bool


def _dense_solve(A, r):
    s = np.linalg.svd(A, compute_uv=False)
    if s.size and (not np.all(np.isfinite(s)) or s[-1] <= SINGULAR_RCOND * s[0]):
        raise SingularSystem(f"reduced matrix is singular (rcond {s[-1] / max(s[0], 1e-300):.2e})")
    return np.linalg.solve(A, r)


def reduced_residual(sub, nu, ubar, a, b, g, convection=True):
    ru = nu * (sub.Kv @ a + ubar * sub.kl) + sub.Bv.T @ b - sub.sign * (sub.Q @ g)
    if convection:
        ru += np.einsum("mjk,j,k->m", sub.T, a, a) + ubar * (sub.Ladv @ a + sub.Lgrad @ a) + ubar ** 2 * sub.fll
    rp = sub.Bv @ a + ubar * sub.bl
    return np.concatenate([ru, rp])


def reduced_jacobian(sub, nu, ubar, a, convection=True):
    A = nu * sub.Kv
    if convection:
        A = A + np.einsum("mjk,k->mj", sub.T, a) + np.einsum("mkj,k->mj", sub.T, a) + ubar * (sub.Ladv + sub.Lgrad)
    npr = sub.n_p
    return np.block([[A, sub.Bv.T], [sub.Bv, np.zeros((npr, npr))]])


def solve_reduced_subdomain(sub, nu, ubar, g, guess=None, tol=REDUCED_TOL, max_iter=50, convection=True):
    """Dense damped Newton for one subdomain; residual max-norm below ``tol * (1 + scale)``."""
    nv, npr = sub.n_v, sub.n_p
    if guess is None:
        z = np.zeros(nv + npr)
        r = reduced_residual(sub, nu, ubar, z[:nv], z[nv:], g, convection=False)
        z -= _dense_solve(reduced_jacobian(sub, nu, ubar, z[:nv], convection=False), r)
        if not convection:
            return ReducedState(z[:nv], z[nv:], 1)
    else:
        z = np.concatenate([guess.a, guess.b])
    scale = max(np.abs(nu * ubar * sub.kl).max(initial=0.0), np.abs(ubar ** 2 * sub.fll).max(initial=0.0),
                np.abs(sub.Q @ g).max(initial=0.0))
    target = tol * (1.0 + scale)

    def res(v):
        return reduced_residual(sub, nu, ubar, v[:nv], v[nv:], g, convection)

    r = res(z)
    rn = np.abs(r).max()
    hist = [rn]
    for it in range(max_iter + 1):
        if rn <= target:
            return ReducedState(z[:nv], z[nv:], it)
        if it == max_iter:
            break
        dz = _dense_solve(reduced_jacobian(sub, nu, ubar, z[:nv], convection), r)
        step = 1.0
        for _ in range(9):
            zt = z - step * dz
            rt = res(zt)
            rtn = np.abs(rt).max()
            if np.isfinite(rtn) and rtn < rn:
                break
            step *= 0.5
        if not np.isfinite(rtn):
            raise NewtonDiverged("reduced Newton produced non-finite residuals", hist)
        if rtn >= rn and rn <= 1e3 * target:
            # stagnation at roundoff level just above the target
            return ReducedState(z[:nv], z[nv:], it)
        z, r, rn = zt, rt, rtn
        hist.append(rn)
    raise NewtonDiverged(f"reduced Newton did not converge (residual {rn:.3e})", hist)


class ReducedProblem:
    """Reduced coupled problem at fixed ``(nu, ubar)``."""

    def __init__(self, ops, nu, ubar, gamma=0.0, gradient_mode="consistent", tol=REDUCED_TOL):
        if gradient_mode not in GRADIENT_MODES:
            raise ValueError(f"gradient_mode must be one of {GRADIENT_MODES}")
        self.ops = ops
        self.nu, self.ubar, self.gamma = float(nu), float(ubar), float(gamma)
        self.gradient_mode = gradient_mode
        self.tol = tol
        self._warm = None

    def traces(self, states):
        return [self.ubar * s.rl + s.Rv @ st.a for s, st in zip(self.ops.subs, states)]

    def jump(self, states):
        t1, t2 = self.traces(states)
        return t1 - t2

    def solve_states(self, g, guesses=None):
        guesses = guesses if guesses is not None else self._warm
        out = []
        for k, sub in enumerate(self.ops.subs):
            guess = None if guesses is None else guesses[k]
            try:
                out.append(solve_reduced_subdomain(sub, self.nu, self.ubar, g, guess, self.tol))
            except NewtonDiverged:
                if guess is None:
                    raise
                out.append(solve_reduced_subdomain(sub, self.nu, self.ubar, g, None, self.tol))
        self._warm = out
        return out

    def functional(self, states, g):
        j = self.jump(states)
        return 0.5 * float(j @ self.ops.M2 @ j) + 0.5 * self.gamma * float(g @ self.ops.Mg @ g)

    def evaluate(self, g):
        states = self.solve_states(g)
        return self.functional(states, g), states

    def adjoint_matrix(self, sub, state):
        """System matrix of the reduced adjoint for the selected gradient mode."""
        if self.gradient_mode == "consistent":
            return reduced_jacobian(sub, self.nu, self.ubar, state.a).T
        a = state.a
        return (self.nu * sub.Kx + np.einsum("baj,j->ba", sub.X1 + sub.X2, a)
                + self.ubar * (sub.XL1 + sub.XL2))

    def solve_adjoints(self, states):
        j = self.jump(states)
        M2j = self.ops.M2 @ j
        out = []
        for sub, st in zip(self.ops.subs, states):
            if self.gradient_mode == "consistent":
                rhs = np.concatenate([sub.sign * (sub.Rv.T @ M2j), np.zeros(sub.n_p)])
            else:
                rhs = sub.sign * (sub.Rx.T @ M2j)
            A = self.adjoint_matrix(sub, st)
            out.append(_dense_solve(A, rhs) if np.any(rhs) else np.zeros(len(rhs)))
        return out

    def adjoint_traces(self, adjoints):
        if self.gradient_mode == "consistent":
            return [s.Rv @ y[: s.n_v] for s, y in zip(self.ops.subs, adjoints)]
        return [s.Rx @ y for s, y in zip(self.ops.subs, adjoints)]

    def gradient(self, g, states):
        adj = self.solve_adjoints(states)
        t1, t2 = self.adjoint_traces(adj)
        grad = self.gamma * (self.ops.Mg @ g) + self.ops.G.T @ (self.ops.M2 @ (t1 - t2))
        return grad, adj

    def jump_norm(self, f, states):
        j = self.jump(states)
        return float(np.sqrt(max(j @ self.ops.M2 @ j, 0.0)))


def solve_reduced_state(ops, nu, g, ubar=1.0, guesses=None):
    """Reduced states of both subdomains for reduced control ``g``."""
    return ReducedProblem(ops, nu, ubar).solve_states(np.asarray(g, dtype=float), guesses)


def solve_reduced_adjoint(ops, states, nu, ubar=1.0, gradient_mode="consistent"):
    return ReducedProblem(ops, nu, ubar, gradient_mode=gradient_mode).solve_adjoints(states)


def optimize_reduced(ops, nu, ubar, cfg=OptConfig(), g0=None, gradient_mode="consistent", callback=None):
    """L-BFGS (or steepest descent) on the reduced control coefficients."""
    if ops.n_g < 1:
        raise ValueError("the reduced control space is empty")
    prob = ReducedProblem(ops, nu, ubar, cfg.gamma, gradient_mode)
    g0 = np.zeros(ops.n_g) if g0 is None else np.asarray(g0, dtype=float)
    res = minimize(prob.evaluate, prob.gradient, g0, cfg, inner=lambda x, y: float(x @ prob.ops.Mg @ y),
                   jump_norm=prob.jump_norm, callback=callback, recoverable=(NewtonDiverged, SingularSystem))
    return ReducedSolution(res.ctx, res.aux, res.x, res.trace, res.iterations, res.converged)


def reconstruct(ops, states, ubar, g=None):
    """Full-order fields from reduced coefficients: list of StateSolution (and the control trace)."""
    fields = [StateSolution(ubar * s.lift + s.V @ st.a, s.P @ st.b) for s, st in zip(ops.subs, states)]
    if g is None:
        return fields
    return fields, ops.G @ g


def reconstruct_adjoints(ops, adjoints, gradient_mode="consistent"):
    if gradient_mode == "consistent":
        return [s.V @ y[: s.n_v] for s, y in zip(ops.subs, adjoints)]
    return [s.Xi @ y for s, y in zip(ops.subs, adjoints)]
