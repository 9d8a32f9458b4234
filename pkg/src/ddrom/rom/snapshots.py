"""Offline snapshot generation: one full-order optimisation per parameter sample."""
import logging
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..ddsolver.coupled import CoupledProblem, optimize
from ..ddsolver.optim import OptConfig
from ..errors import DDROMError, SnapshotFailure
from ..fem.problem import SupremizerSolver, compute_lifting
from .sampling import ParameterSample

log = logging.getLogger(__name__)

COMPONENTS = ("u1", "s1", "p1", "u2", "s2", "p2", "xi1", "xi2", "g")
ADJOINT_MODES = ("final", "all")
CONTINUATION_DEPTH = 2


@dataclass
class SnapshotSet:
    """Snapshot matrices (one column per snapshot) keyed by component name.

    Velocities are homogenised: the lifting times the sample magnitude has
    been subtracted, so every velocity column vanishes on Dirichlet dofs.
    """

    data: dict
    samples: list
    failed: list = field(default_factory=list)
    final_J: list = field(default_factory=list)
    iterations: list = field(default_factory=list)
    adjoint_mode: str = "final"

    def count(self, comp):
        return self.data[comp].shape[1]

    def __len__(self):
        return len(self.samples)


class SnapshotContext:
    """Per-process state: coupled problem, liftings and supremizer solvers."""

    def __init__(self, benchmark, h, cfg, adjoint_mode="final"):
        self.coupled = CoupledProblem(benchmark, h)
        self.cfg = cfg
        self.adjoint_mode = adjoint_mode
        self.liftings = [compute_lifting(p) for p in self.coupled.problems]
        self.supremizers = [SupremizerSolver(p) for p in self.coupled.problems]

    def run(self, sample, g0=None):
        cp = self.coupled
        cp.set_parameters(sample.nu, sample.ubar)
        try:
            res = optimize(cp, self.cfg, g0=g0, keep_history=self.adjoint_mode == "all")
        except DDROMError:
            if g0 is None:
                raise
            log.info("warm start failed at (nu=%g, ubar=%g); retrying from zero", sample.nu, sample.ubar)
            res = optimize(cp, self.cfg, keep_history=self.adjoint_mode == "all")
        out = {"g": res.g[:, None]}
        for i, (st, lift, sup) in enumerate(zip(res.states, self.liftings, self.supremizers), start=1):
            out[f"u{i}"] = (st.u - sample.ubar * lift)[:, None]
            out[f"p{i}"] = st.p[:, None]
            out[f"s{i}"] = sup(st.p)[:, None]
            if self.adjoint_mode == "all":
                out[f"xi{i}"] = np.column_stack([adj[i - 1].xi for _, _, _, adj in res.history])
            else:
                out[f"xi{i}"] = res.adjoints[i - 1].xi[:, None]
        return out, float(res.trace.J[-1]), res.iterations

    def run_continued(self, sample, history, depth=CONTINUATION_DEPTH):
        """Run ``sample`` seeded by extrapolating the optima in ``history``; on
        failure bisect the magnitude gap and walk through the midpoint first."""
        try:
            return self.run(sample, predict_control(history, sample.ubar))
        except DDROMError:
            if not history or depth == 0:
                raise
        mid = ParameterSample(sample.nu, 0.5 * (history[-1][0] + sample.ubar))
        log.info("continuation through ubar=%g at nu=%g", mid.ubar, mid.nu)
        r = self.run_continued(mid, history, depth - 1)
        return self.run_continued(sample, history + [(mid.ubar, r[0]["g"][:, 0])], depth - 1)

    def run_row(self, items, warm=True):
        """Run samples sharing one viscosity in increasing magnitude, seeding
        each optimisation from the optima already found in the sweep."""
        out, history = [], []
        for k, sample in items:
            try:
                r = self.run_continued(sample, history if warm else [])
            except DDROMError as exc:
                out.append((k, None, f"{type(exc).__name__}: {exc}"))
                continue
            history.append((sample.ubar, r[0]["g"][:, 0]))
            out.append((k, r, None))
        return out


def predict_control(history, ubar):
    """Initial control at magnitude ``ubar`` from earlier optima ``[(ubar_k, g_k), ...]``.

    The control vanishes with the data, so one point gives the linear scaling
    ``g_1 ubar / ubar_1`` and two points the fit ``a ubar + b ubar^2``
    through the last two optima. Returns None without history.
    """
    if not history:
        return None
    u1, g1 = history[-1]
    if len(history) == 1 or np.isclose(history[-2][0], u1):
        return g1 * (ubar / u1)
    u0, g0 = history[-2]
    A = np.array([[u0, u0 * u0], [u1, u1 * u1]])
    a, b = np.linalg.solve(A, np.vstack([g0, g1]))
    return a * ubar + b * ubar * ubar


def _rows(samples):
    rows = {}
    for k, s in enumerate(samples):
        rows.setdefault(s.nu, []).append((k, s))
    return [sorted(r, key=lambda it: it[1].ubar) for r in rows.values()]


_CTX = None


def _init_worker(benchmark, h, cfg, adjoint_mode):
    global _CTX
    _CTX = SnapshotContext(benchmark, h, cfg, adjoint_mode)


def _work(args):
    row, warm = args
    return _CTX.run_row(row, warm)


def collect_snapshots(samples, benchmark, h=None, cfg=OptConfig(), workers=None, adjoint_mode="final",
                      context=None, warm_start=True):
    """Run the full-order optimisation at every sample and stack the snapshots.

    Samples with equal viscosity form a sweep in increasing magnitude; with
    ``warm_start`` each optimisation starts from the previous optimum of its
    sweep. Failed samples are dropped with a warning. ``workers`` > 1 runs
    sweeps in a process pool; results are always assembled in sample order.

    Raises
    ------
    SnapshotFailure
        If no sample succeeds.
    """
    if adjoint_mode not in ADJOINT_MODES:
        raise ValueError(f"adjoint_mode must be one of {ADJOINT_MODES}")
    workers = workers or os.cpu_count() or 1
    tasks = [(row, warm_start) for row in _rows(samples)]
    if workers == 1 or len(tasks) == 1:
        global _CTX
        saved = _CTX
        _CTX = context or SnapshotContext(benchmark, h, cfg, adjoint_mode)
        try:
            results = [r for t in tasks for r in _work(t)]
        finally:
            _CTX = saved
    else:
        with ProcessPoolExecutor(min(workers, len(tasks)), initializer=_init_worker,
                                 initargs=(benchmark, h, cfg, adjoint_mode)) as pool:
            results = [r for rows in pool.map(_work, tasks, chunksize=1) for r in rows]
    results.sort(key=lambda r: r[0])
    ok = [(k, r) for k, r, err in results if err is None]
    failed = [(samples[k], err) for k, r, err in results if err is not None]
    if failed:
        msg = "; ".join(f"(nu={s.nu:g}, ubar={s.ubar:g}) {e}" for s, e in failed)
        warnings.warn(f"{len(failed)} snapshot sample(s) failed and were excluded: {msg}", RuntimeWarning)
    if not ok:
        raise SnapshotFailure("every snapshot sample failed", [s for s, _ in failed])
    data = {c: np.hstack([r[0][c] for _, r in ok]) for c in COMPONENTS}
    return SnapshotSet(data, [samples[k] for k, _ in ok], failed,
                       [r[1] for _, r in ok], [r[2] for _, r in ok], adjoint_mode)
