"""Offline stage end to end: sampling, snapshots, compression and projection."""
import logging
import warnings
from dataclasses import dataclass

from ..benchmarks import get_benchmark
from ..ddsolver.optim import OptConfig
from ..errors import RankDeficientWarning
from .operators import project_operators
from .pod import compress, inner_products
from .sampling import sample_parameters
from .snapshots import SnapshotContext, collect_snapshots

log = logging.getLogger(__name__)


@dataclass
class OfflineModel:
    coupled: object
    liftings: list
    snapshots: object
    basis: object

    def operators(self, n_modes, supremizers=True):
        return project_operators(self.basis, self.coupled, self.liftings, n_modes, supremizers)


def build_offline(benchmark, h=None, M=36, n_max=30, cfg=None, workers=1, adjoint_mode="final",
                  warm_start=True, samples=None, quiet_rank=True):
    """Collect snapshots on an ``M``-point grid and compress them to at most ``n_max`` modes.

    ``quiet_rank`` suppresses :class:`RankDeficientWarning` (components such
    as the pressure often have fewer than ``n_max`` significant modes).
    """
    bench = get_benchmark(benchmark) if isinstance(benchmark, str) else benchmark
    h = bench.default_h if h is None else h
    cfg = cfg or OptConfig(it_max=bench.fom_iterations)
    if samples is None:
        samples = sample_parameters((bench.nu_range, bench.ubar_range), M)
    ctx = SnapshotContext(bench, h, cfg, adjoint_mode)
    snaps = collect_snapshots(samples, bench, h, cfg, workers=workers, adjoint_mode=adjoint_mode,
                              context=ctx, warm_start=warm_start)
    with warnings.catch_warnings():
        if quiet_rank:
            warnings.simplefilter("ignore", RankDeficientWarning)
        basis = compress(snaps, n_max, inner_products(ctx.coupled))
    return OfflineModel(ctx.coupled, ctx.liftings, snaps, basis)
