"""Command-line pipelines: ``ddrom {mesh,monolithic,fom,offline,online,compare}``.

Configuration comes from an optional INI file (sections ``run``, ``optim``,
``offline``, ``online``) overridden by command-line flags. Every command
writes ``manifest.json`` into its output directory, also on failure.

Exit codes: 0 success, 2 usage, 3 solver failure, 4 missing artifacts.
"""
import argparse
import configparser
import dataclasses
import logging
import os
import sys
import time

import numpy as np

from . import io
from .benchmarks import BENCHMARKS, get_benchmark
from .ddsolver import CoupledProblem, OptConfig, compute_errors, format_value, optimize
from .errors import (DDROMError, InvalidRange, InvalidResolution, LineSearchFailed, MissingArtifacts,
                     SnapshotFailure)
from .fem.problem import StateSolution, compute_lifting
from .mesh import extract_interface
from .rom.online import GRADIENT_MODES, optimize_reduced, reconstruct
from .rom.operators import project_operators, select_modes
from .rom.pipeline import build_offline
from .rom.snapshots import ADJOINT_MODES

log = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_MISSING = 0, 2, 3, 4
ERROR_COLUMNS = ("iteration", "field", "subdomain", "abs_error", "rel_error")
COMPARE_COLUMNS = ("model", "iteration", "field", "subdomain", "abs_error", "rel_error")
FOM_COMPARE_COLUMNS = ("field", "subdomain", "abs_error", "rel_error")


class UsageError(Exception):
    pass


@dataclasses.dataclass
class RunConfig:
    benchmark: str = "step"
    h: float = None
    out: str = "out"
    seed: int = 0
    # optimiser
    gamma: float = 0.0
    method: str = "l-bfgs"
    it_max: int = None
    tol: float = 1e-5
    memory: int = 10
    record_timings: bool = False
    # offline
    M: int = 36
    n_max: int = 30
    workers: int = None
    adjoint_mode: str = "final"
    # online
    n_u: int = None
    n_s: int = None
    n_p: int = None
    n_g: int = None
    n_xi: int = None
    rom_it_max: int = None
    gradient_mode: str = "consistent"
    supremizers: bool = True
    dump_every: int = 0

    def __post_init__(self):
        if self.benchmark not in BENCHMARKS:
            raise UsageError(f"unknown benchmark {self.benchmark!r}; choose from {sorted(BENCHMARKS)}")
        b = get_benchmark(self.benchmark)
        self.h = b.default_h if self.h is None else float(self.h)
        self.it_max = b.fom_iterations if self.it_max is None else int(self.it_max)
        self.rom_it_max = b.rom_iterations if self.rom_it_max is None else int(self.rom_it_max)
        for key in ("u", "s", "p", "g", "xi"):
            name = f"n_{key}"
            if getattr(self, name) is None:
                setattr(self, name, b.n_modes[key])
        if self.adjoint_mode not in ADJOINT_MODES:
            raise UsageError(f"adjoint_mode must be one of {ADJOINT_MODES}")
        if self.gradient_mode not in GRADIENT_MODES:
            raise UsageError(f"gradient_mode must be one of {GRADIENT_MODES}")
        if self.M < 1 or self.n_max < 1 or self.n_max > self.M:
            raise UsageError("need 1 <= n_max <= M")
        if max(self.n_u, self.n_s, self.n_p, self.n_g, self.n_xi) > self.n_max:
            raise UsageError("mode counts may not exceed n_max")
        if self.dump_every < 0:
            raise UsageError("dump_every must be nonnegative")

    @property
    def bench(self):
        return get_benchmark(self.benchmark)

    def opt(self, reduced=False):
        try:
            return OptConfig(gamma=self.gamma, it_max=self.rom_it_max if reduced else self.it_max,
                             tol_grad=self.tol, method=self.method, memory=self.memory,
                             timings=self.record_timings)
        except ValueError as exc:
            raise UsageError(str(exc)) from None

    @property
    def n_modes(self):
        return {"u": self.n_u, "s": self.n_s, "p": self.n_p, "g": self.n_g, "xi": self.n_xi}

    def offline_key(self):
        """Settings that determine the offline artifacts."""
        keys = ("benchmark", "h", "gamma", "method", "it_max", "tol", "memory", "M", "n_max", "adjoint_mode")
        return {k: getattr(self, k) for k in keys}

    def as_dict(self):
        d = dataclasses.asdict(self)
        d.pop("out")
        d.pop("workers")
        return d


_SECTIONS = {
    "run": ("benchmark", "h", "seed"),
    "optim": ("gamma", "method", "it_max", "tol", "memory", "record_timings"),
    "offline": ("M", "n_max", "workers", "adjoint_mode"),
    "online": ("n_u", "n_s", "n_p", "n_g", "n_xi", "rom_it_max", "gradient_mode", "supremizers"),
}


def _convert(name, text):
    kind = {f.name: f for f in dataclasses.fields(RunConfig)}[name]
    default = kind.default
    if isinstance(default, bool):
        return text.strip().lower() in ("1", "true", "yes", "on")
    if name in ("h", "gamma", "tol"):
        return float(text)
    if isinstance(default, int) or name in ("it_max", "workers", "rom_it_max") or name.startswith("n_"):
        return int(text)
    return text.strip()


def read_config(path):
    """INI file to a dict of RunConfig fields."""
    if not os.path.exists(path):
        raise UsageError(f"config file {path} not found")
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp.read(path)
    out = {}
    for section in cp.sections():
        if section not in _SECTIONS:
            raise UsageError(f"unknown config section [{section}]")
        for key, val in cp[section].items():
            if key not in _SECTIONS[section]:
                raise UsageError(f"unknown key {key!r} in [{section}]")
            try:
                out[key] = _convert(key, val)
            except ValueError:
                raise UsageError(f"bad value {val!r} for {key}") from None
    return out


# --- helpers ---------------------------------------------------------------

def _query_dir(cfg, stage, nu, ubar):
    d = os.path.join(cfg.out, f"{stage}_nu{nu:g}_ubar{ubar:g}")
    os.makedirs(d, exist_ok=True)
    return d


def _error_rows(iteration, rep):
    return [(iteration, f, i, format_value(a), format_value(r)) for f, i, a, r in rep.rows()]


def _write_states(path, states, g):
    np.savez(path, g=g, **{f"u{i}": s.u for i, s in enumerate(states, 1)},
             **{f"p{i}": s.p for i, s in enumerate(states, 1)})
    return path


def _load_states(path):
    with np.load(path) as f:
        return [StateSolution(f[f"u{i}"], f[f"p{i}"]) for i in (1, 2)], f["g"]


def _dump_fields(d, tag, coupled, states):
    files = []
    for i, (s, st) in enumerate(zip(coupled.spaces, states), start=1):
        files.append(io.write_fields_vtk(os.path.join(d, f"{tag}_omega{i}.vtk"), s, st.u, st.p))
    return files


def _need(q, nu, ubar):
    if nu is None or ubar is None:
        raise UsageError(f"{q} needs --nu and --ubar")
    if nu <= 0:
        raise UsageError("--nu must be positive")


# --- commands --------------------------------------------------------------

def cmd_mesh(cfg, args, ctx):
    mesh = cfg.bench.make_mesh(cfg.h)
    trace = extract_interface(mesh)
    os.makedirs(cfg.out, exist_ok=True)
    ctx["files"] += [io.write_mesh_vtk(os.path.join(cfg.out, "mesh.vtk"), mesh),
                     io.write_mesh_summary(os.path.join(cfg.out, "mesh_summary.csv"), mesh, trace)]
    ctx["extra"] = {"area": mesh.area(), "interface_vertices": len(trace.vertex_ids),
                    "vertices": mesh.n_vertices}


def cmd_monolithic(cfg, args, ctx):
    _need("monolithic", args.nu, args.ubar)
    cp = CoupledProblem(cfg.bench, cfg.h, args.nu, args.ubar)
    mono = cp.monolithic()
    d = _query_dir(cfg, "monolithic", args.nu, args.ubar)
    ctx["files"] += [
        io.write_fields_vtk(os.path.join(d, "monolithic.vtk"), mono.space, mono.u, mono.p),
        io.write_coefficients_csv(os.path.join(d, "velocity.csv"), mono.space, mono.u),
        io.write_coefficients_csv(os.path.join(d, "pressure.csv"), mono.space, mono.p, kind="pressure"),
    ]
    ctx["extra"] = {"newton_iterations": mono.iterations}
    return d


def cmd_fom(cfg, args, ctx):
    _need("fom", args.nu, args.ubar)
    cp = CoupledProblem(cfg.bench, cfg.h, args.nu, args.ubar)
    d = _query_dir(cfg, "fom", args.nu, args.ubar)
    ctx["dir"] = d
    mono = cp.monolithic()
    errors = []
    every = cfg.dump_every

    def cb(k, g, states, adj):
        if every and (k % every == 0):
            errors.extend(_error_rows(k, compute_errors(cp, states, mono)))
            ctx["files"].extend(_dump_fields(d, f"iter{k:03d}", cp, states))

    t = time.perf_counter()
    res = optimize(cp, cfg.opt(), callback=cb)
    ctx["timings"]["optimise"] = time.perf_counter() - t
    rep = compute_errors(cp, res.states, mono)
    if not errors or errors[-1][0] != res.iterations:
        errors += _error_rows(res.iterations, rep)
    trace_path = os.path.join(d, "trace.csv")
    res.trace.to_csv(trace_path)
    ctx["files"] += [trace_path, io.write_csv(os.path.join(d, "errors.csv"), ERROR_COLUMNS, errors),
                     _write_states(os.path.join(d, "state.npz"), res.states, res.g)]
    ctx["files"] += _dump_fields(d, "final", cp, res.states)
    ctx["extra"] = {"iterations": res.iterations, "converged": res.converged,
                    "J0": float(res.trace.J[0]), "J": float(res.trace.J[-1])}
    return d


def _container_path(cfg):
    return os.path.join(cfg.out, "offline", "basis.npz")


def cmd_offline(cfg, args, ctx):
    d = os.path.join(cfg.out, "offline")
    os.makedirs(d, exist_ok=True)
    ctx["dir"] = d
    t = time.perf_counter()
    model = build_offline(cfg.bench, cfg.h, cfg.M, cfg.n_max, cfg.opt(), workers=cfg.workers,
                          adjoint_mode=cfg.adjoint_mode)
    ctx["timings"]["snapshots_and_pod"] = time.perf_counter() - t
    ctx["failures"] = [{"nu": s.nu, "ubar": s.ubar, "error": e} for s, e in model.snapshots.failed]
    t = time.perf_counter()
    ops = model.operators(cfg.n_modes, cfg.supremizers)
    ctx["timings"]["projection"] = time.perf_counter() - t
    meta = {"offline_hash": io.config_hash(cfg.offline_key()), "offline": cfg.offline_key(),
            "n_modes": ops.n_modes, "samples": [[s.nu, s.ubar] for s in model.snapshots.samples]}
    ctx["files"] += [io.save_container(_container_path(cfg), model.basis, ops, meta),
                     io.write_spectra(os.path.join(d, "spectra.csv"), model.basis),
                     io.write_retained_energy(os.path.join(d, "retained_energy.csv"), model.basis)]
    for comp in ("u1", "u2", "p1", "p2", "xi1", "xi2"):
        i = int(comp[-1])
        space = model.coupled.spaces[i - 1]
        modes = model.basis.modes[comp]
        for k in range(min(3, modes.shape[1])):
            path = os.path.join(d, f"mode_{comp}_{k + 1}.vtk")
            if comp.startswith("p"):
                io.write_fields_vtk(path, space, p=modes[:, k])
            else:
                io.write_fields_vtk(path, space, u=modes[:, k])
            ctx["files"].append(path)
    ctx["extra"] = {"samples": len(model.snapshots), "modes": {c: model.basis.n(c) for c in model.basis.modes}}
    return d


def _load_reduced(cfg):
    path = _container_path(cfg)
    basis, ops, meta = io.load_container(path)
    if meta.get("offline_hash") != io.config_hash(cfg.offline_key()):
        raise MissingArtifacts(f"{path} was built with different offline settings; rerun the offline stage")
    return basis, ops, meta


def cmd_online(cfg, args, ctx):
    _need("online", args.nu, args.ubar)
    basis, ops, meta = _load_reduced(cfg)
    cp = CoupledProblem(cfg.bench, cfg.h, args.nu, args.ubar)
    if ops.n_modes != select_modes(basis, cfg.n_modes) or ops.supremizers != cfg.supremizers:
        # mode counts differ from the stored projection: re-project from the stored basis
        ops = project_operators(basis, cp, [compute_lifting(p) for p in cp.problems], cfg.n_modes,
                                cfg.supremizers)
    d = _query_dir(cfg, "online", args.nu, args.ubar)
    ctx["dir"] = d
    mono = cp.monolithic()
    errors = []
    every = cfg.dump_every

    def cb(k, g, states, adj):
        if every and (k % every == 0):
            fields = reconstruct(ops, states, args.ubar)
            errors.extend(_error_rows(k, compute_errors(cp, fields, mono)))
            ctx["files"].extend(_dump_fields(d, f"iter{k:03d}", cp, fields))

    t = time.perf_counter()
    sol = optimize_reduced(ops, args.nu, args.ubar, cfg.opt(reduced=True), gradient_mode=cfg.gradient_mode,
                           callback=cb)
    ctx["timings"]["optimise"] = time.perf_counter() - t
    fields, g = reconstruct(ops, sol.states, args.ubar, sol.g)
    rep = compute_errors(cp, fields, mono)
    if not errors or errors[-1][0] != sol.iterations:
        errors += _error_rows(sol.iterations, rep)
    trace_path = os.path.join(d, "trace.csv")
    sol.trace.to_csv(trace_path)
    ctx["files"] += [trace_path, io.write_csv(os.path.join(d, "errors.csv"), ERROR_COLUMNS, errors),
                     _write_states(os.path.join(d, "state.npz"), fields, g)]
    ctx["files"] += _dump_fields(d, "final", cp, fields)
    fom_state = os.path.join(_query_dir(cfg, "fom", args.nu, args.ubar), "state.npz")
    if os.path.exists(fom_state):
        fom, _ = _load_states(fom_state)
        rows = []
        for i, (s, a, b) in enumerate(zip(cp.spaces, fields, fom), start=1):
            for name, x, y, nrm in (("u", a.u, b.u, s.velocity_norm), ("p", a.p, b.p, s.pressure_norm)):
                ref = nrm(y)
                err = nrm(x - y)
                rows.append((name, i, format_value(err), format_value(err / ref if ref > 1e-14 else None)))
        ctx["files"].append(io.write_csv(os.path.join(d, "errors_vs_fom.csv"), FOM_COMPARE_COLUMNS, rows))
    ctx["extra"] = {"iterations": sol.iterations, "converged": sol.converged,
                    "J0": float(sol.trace.J[0]), "J": float(sol.trace.J[-1]), "n_modes": ops.n_modes}
    return d


def cmd_compare(cfg, args, ctx):
    _need("compare", args.nu, args.ubar)
    rows = []
    for model, stage in (("fom", "fom"), ("rom", "online")):
        path = os.path.join(cfg.out, f"{stage}_nu{args.nu:g}_ubar{args.ubar:g}", "errors.csv")
        if not os.path.exists(path):
            raise MissingArtifacts(f"{path} not found; run `ddrom {stage}` for this query first")
        _, body = io.read_csv(path)
        rows += [(model, *r) for r in body]
    d = os.path.join(cfg.out, f"compare_nu{args.nu:g}_ubar{args.ubar:g}")
    os.makedirs(d, exist_ok=True)
    ctx["dir"] = d
    ctx["files"].append(io.write_csv(os.path.join(d, "report.csv"), COMPARE_COLUMNS, rows))
    return d


COMMANDS = {"mesh": cmd_mesh, "monolithic": cmd_monolithic, "fom": cmd_fom, "offline": cmd_offline,
            "online": cmd_online, "compare": cmd_compare}


def build_parser():
    p = argparse.ArgumentParser(prog="ddrom", description="Domain-decomposition ROM pipelines.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="INI configuration file")
    p.add_argument("--benchmark", help="step or cavity")
    p.add_argument("--h", type=float, help="mesh size")
    p.add_argument("--nu", type=float)
    p.add_argument("--ubar", type=float)
    p.add_argument("--out", help="output directory")
    p.add_argument("--dump-every", type=int, help="write fields every K iterations (0: final only)")
    p.add_argument("--workers", type=int, help="snapshot worker processes")
    p.add_argument("--seed", type=int)
    return p


def make_config(args):
    kw = read_config(args.config) if args.config else {}
    for name, attr in (("benchmark", "benchmark"), ("h", "h"), ("out", "out"), ("dump_every", "dump_every"),
                       ("workers", "workers"), ("seed", "seed")):
        v = getattr(args, attr)
        if v is not None:
            kw[name] = v
    return RunConfig(**kw)


def _argparse_manifest(argv, code):
    """Record a command-line parse failure in the manifest of ``--out`` (default ``out``)."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--out", default="out")
    known, _ = pre.parse_known_args(argv)
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        os.makedirs(known.out, exist_ok=True)
        io.write_manifest(os.path.join(known.out, "manifest.json"), {"argv": argv}, [], {}, [],
                          f"usage error: invalid command line (exit {code})", {})
    except OSError as exc:
        print(f"ddrom: could not write manifest: {exc}", file=sys.stderr)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else EXIT_USAGE
        if code != EXIT_OK:
            _argparse_manifest(argv, code)
        return code
    ctx = {"files": [], "timings": {}, "failures": [], "extra": {}, "dir": None}
    out = args.out or "out"
    code, status, cfg = EXIT_OK, "ok", None
    try:
        cfg = make_config(args)
        out = cfg.out
        t = time.perf_counter()
        COMMANDS[args.command](cfg, args, ctx)
        ctx["timings"]["total"] = time.perf_counter() - t
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"ddrom: error: {exc}", file=sys.stderr)
        code, status = EXIT_USAGE, f"usage error: {exc}"
    except (InvalidResolution, InvalidRange) as exc:
        print(f"ddrom: error: {exc}", file=sys.stderr)
        code, status = EXIT_USAGE, f"usage error: {exc}"
    except MissingArtifacts as exc:
        print(f"ddrom: missing artifacts: {exc}", file=sys.stderr)
        code, status = EXIT_MISSING, f"missing artifacts: {exc}"
    except (DDROMError, np.linalg.LinAlgError) as exc:
        print(f"ddrom: solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        code, status = EXIT_SOLVER, f"solver failure: {type(exc).__name__}: {exc}"
        if isinstance(exc, SnapshotFailure):
            ctx["failures"] += [{"nu": s.nu, "ubar": s.ubar} for s in exc.failed]
        if isinstance(exc, LineSearchFailed) and exc.result is not None:
            ctx["extra"]["last_iteration"] = exc.result.iterations
    d = ctx["dir"] or out
    try:
        os.makedirs(d, exist_ok=True)
        config = cfg.as_dict() if cfg is not None else {"argv": list(argv or sys.argv[1:])}
        config["command"] = args.command
        for k in ("nu", "ubar"):
            if getattr(args, k) is not None:
                config[k] = getattr(args, k)
        io.write_manifest(os.path.join(d, "manifest.json"), config, ctx["files"], ctx["timings"],
                          ctx["failures"], status, ctx["extra"])
    except OSError as exc:
        print(f"ddrom: could not write manifest: {exc}", file=sys.stderr)
    if ctx["extra"] and code == EXIT_OK:
        print(" ".join(f"{k}={v}" for k, v in sorted(ctx["extra"].items())))
    return code


if __name__ == "__main__":
    sys.exit(main())
