"""Absolute and relative L2 errors of subdomain fields against the monolithic reference."""
from dataclasses import dataclass, field

import numpy as np

from ..errors import MeshMismatch

REPORT_COLUMNS = ("field", "subdomain", "abs_error", "rel_error")


@dataclass
class ErrorReport:
    """``entries[(field, i)] = (abs, rel)`` with ``rel`` None when the reference norm vanishes."""

    entries: dict = field(default_factory=dict)

    def abs(self, name, i):
        return self.entries[(name, i)][0]

    def rel(self, name, i):
        return self.entries[(name, i)][1]

    def rows(self):
        return [(f, i, a, r) for (f, i), (a, r) in sorted(self.entries.items())]

    def max_rel(self, name):
        vals = [r for (f, _), (_, r) in self.entries.items() if f == name and r is not None]
        return max(vals) if vals else None


def format_value(v):
    """CSV cell: ``-`` for an undefined relative error."""
    return "-" if v is None else f"{v:.6e}"


def _pair(abs_err, ref, atol=1e-14):
    return abs_err, (None if ref <= atol else abs_err / ref)


def glue_zero_mean(spaces, pressures):
    """Shift subdomain pressures by one common constant so the glued field has zero mean."""
    total = sum(float(np.ones(s.n_p) @ (s.Mp @ p)) for s, p in zip(spaces, pressures))
    area = sum(float(s.areas.sum()) for s in spaces)
    return [p - total / area for p in pressures]


def compute_errors(coupled, states, mono, normalise_pressure=None):
    """Errors of ``states`` (one per subdomain) against the monolithic solution ``mono``.

    Without an outflow boundary the pressure is only defined up to a
    constant; then the subdomain pressures are glued and shifted to zero mean
    (the reference already has zero mean) before comparing.
    """
    if len(states) != 2:
        raise MeshMismatch("expected one state per subdomain")
    for s, st in zip(coupled.spaces, states):
        if st.u.shape != (s.n_u,) or st.p.shape != (s.n_p,):
            raise MeshMismatch("state does not live on the subdomain space")
    ref = coupled.restrict(mono)
    if normalise_pressure is None:
        normalise_pressure = not coupled.benchmark.has_outflow
    pressures = [st.p for st in states]
    if normalise_pressure:
        pressures = glue_zero_mean(coupled.spaces, pressures)
    rep = ErrorReport()
    for i, (s, st, r, p) in enumerate(zip(coupled.spaces, states, ref, pressures), start=1):
        rep.entries[("u", i)] = _pair(s.velocity_norm(st.u - r.u), s.velocity_norm(r.u))
        rep.entries[("p", i)] = _pair(s.pressure_norm(p - r.p), s.pressure_norm(r.p))
    return rep
