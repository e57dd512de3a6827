"""Pipelines over the inverse-temperature grid and (gamma, omega) scans.

One pipeline run tries every beta in the stability grid: initialise beliefs,
iterate to convergence (or the iteration cap), merge redundant communities,
align labels across layers and score the result.  The reported run is the
converged, non-trivial candidate with the highest retrieval modularity.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import bp
from .alignment import align
from .beta_star import beta_grid
from .graph import MultilayerNetwork
from .model_selection import DEFAULT_THRESHOLD, collapse_communities
from .spectral import spectral_partition

logger = logging.getLogger(__name__)

TRIVIAL_PROBE_FRACTION = 0.2
MAX_ITERS_FACTOR = 300
MAX_ITERS_CAP = 50000
WIDE_SCAN_POINTS = 12


@dataclass(frozen=True)
class PipelineOptions:
    """Knobs for :func:`run_pipeline`.

    ``q_mode="paired"`` runs the beta computed for ``q`` labels with ``q``
    labels; ``"qmax"`` uses ``q_max`` labels at every beta.  ``max_iters=None``
    applies the trivial-convergence policy of :func:`default_max_iters`.
    ``betas`` overrides the stability grid entirely.
    """

    seed: int | None = 0
    tol: float = bp.DEFAULT_TOL
    max_iters: int | None = None
    init: str = "uniform"
    noise: float = 0.1
    align: str = "auto"
    collapse_threshold: float = DEFAULT_THRESHOLD
    q_mode: str = "paired"
    schedule: str = "random_async"
    spectral_strength: float = 5.0
    betas: tuple | None = None
    wide_scan: bool = False

    def __post_init__(self):
        if self.init not in ("uniform", "spectral"):
            raise ValueError(f"unknown init mode {self.init!r}")
        if self.q_mode not in ("paired", "qmax"):
            raise ValueError(f"unknown q_mode {self.q_mode!r}")
        if self.align not in ("auto", "temporal", "multiplex", "off"):
            raise ValueError(f"unknown alignment mode {self.align!r}")


@dataclass
class PipelineResult:
    """Selected run plus every candidate tried along the beta grid."""

    best: bp.RunResult
    candidates: list = field(default_factory=list)

    @property
    def n_converged(self) -> int:
        return sum(c.converged for c in self.candidates)

    @property
    def n_nontrivial(self) -> int:
        return sum(c.converged and c.nontrivial for c in self.candidates)


def _child_seed(seed, *keys) -> int:
    entropy = [0 if seed is None else int(seed), *keys]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def default_max_iters(net: MultilayerNetwork, gamma: float, omega: float, seed=None,
                      tol: float = bp.DEFAULT_TOL, schedule: str = "random_async") -> int:
    """Iteration cap: ``300 x`` the sweeps needed to reach the trivial fixed point.

    The probe runs at ``0.2 beta*(q=2)`` where the factorised solution is
    stable; the cap is limited to 50000.
    """
    b2 = beta_grid(net, omega, 2)[0]
    state = bp.init_uniform(net, 2, TRIVIAL_PROBE_FRACTION * b2, gamma, omega, noise=0.1,
                            seed=_child_seed(seed, 7))
    res = bp.run(state, net, tol=tol, max_iters=1000, schedule=schedule)
    return int(min(MAX_ITERS_CAP, MAX_ITERS_FACTOR * max(1, res.iterations)))


def beta_schedule(net: MultilayerNetwork, omega: float, q_max: int, options: PipelineOptions):
    """``[(beta, q_labels), ...]`` to try, in increasing beta."""
    if options.betas is not None:
        return [(float(b), q_max) for b in options.betas]
    grid = beta_grid(net, omega, q_max)
    pairs = [(b, q if options.q_mode == "paired" else q_max) for q, b in enumerate(grid, 2)]
    if options.wide_scan:
        lo, hi = 0.5 * grid[0], 1.5 * grid[-1]
        pairs += [(float(b), q_max) for b in np.linspace(lo, hi, WIDE_SCAN_POINTS)]
        pairs.sort()
    return pairs


def _initial_state(net, q, beta, gamma, omega, options, seed, spectral):
    if options.init == "spectral" and spectral is not None:
        labels = spectral.labels
        if labels.max() >= q:
            # fold extra spectral clusters into the available labels
            labels = labels % q
        return bp.init_from_partition(net, q, beta, gamma, omega, labels,
                                      options.spectral_strength, seed=seed)
    return bp.init_uniform(net, q, beta, gamma, omega, noise=options.noise, seed=seed)


def single_run(net: MultilayerNetwork, q: int, beta: float, gamma: float, omega: float,
               options: PipelineOptions, seed: int, max_iters: int, spectral=None) -> bp.RunResult:
    """Initialise, iterate, collapse, align and score at one ``(beta, q)``."""
    state = _initial_state(net, q, beta, gamma, omega, options, seed, spectral)
    raw = bp.run(state, net, tol=options.tol, max_iters=max_iters, schedule=options.schedule)
    _, reduced = collapse_communities(raw.marginals, options.collapse_threshold)
    part = bp.retrieval_partition(reduced, state.rng)
    part = align(net, part, options.align, seed=_child_seed(seed, 3))
    result = bp.summarize(state, net, marginals=reduced, partition=part)
    result.parameters["q"] = q
    return result


def select_best(candidates):
    """Highest retrieval modularity among converged non-trivial runs.

    Without such a run, the non-converged run with the lowest Bethe free
    energy is reported; if every run converged to the trivial state, the
    first of those is returned as it stands.
    """
    good = [c for c in candidates if c.converged and c.nontrivial]
    if good:
        return max(good, key=lambda c: c.retrieval_modularity)
    stuck = [c for c in candidates if not c.converged]
    if stuck:
        return min(stuck, key=lambda c: c.bethe_free_energy)
    return candidates[0]


def run_pipeline(net: MultilayerNetwork, gamma: float = 1.0, omega: float = 1.0, q_max: int = 4,
                 options: PipelineOptions | None = None, return_candidates: bool = False):
    """Scan the beta grid and return the selected :class:`~multilayer_bp.bp.RunResult`.

    With ``return_candidates`` a :class:`PipelineResult` holding every run
    is returned instead.
    """
    options = options or PipelineOptions()
    if q_max < 2:
        raise ValueError("q_max must be at least 2")
    max_iters = options.max_iters
    if max_iters is None:
        max_iters = default_max_iters(net, gamma, omega, options.seed, options.tol,
                                      options.schedule)
    spectral = None
    if options.init == "spectral":
        spectral = spectral_partition(net, gamma, omega, q_max, seed=_child_seed(options.seed, 11))
    candidates = []
    for k, (beta, q) in enumerate(beta_schedule(net, omega, q_max, options)):
        res = single_run(net, q, beta, gamma, omega, options, _child_seed(options.seed, k),
                         max_iters, spectral)
        logger.debug("beta=%.4f q=%d converged=%s iters=%d q_eff=%d Q=%.4f", beta, q,
                     res.converged, res.iterations, res.q_effective, res.retrieval_modularity)
        candidates.append(res)
    best = select_best(candidates)
    best.parameters["seed"] = options.seed
    if return_candidates:
        return PipelineResult(best, candidates)
    return best


@dataclass
class GridCell:
    gamma: float
    omega: float
    result: PipelineResult | None
    error: str | None = None

    def row(self) -> dict:
        """Flat record of the cell for tabular output."""
        base = {"gamma": self.gamma, "omega": self.omega}
        if self.result is None:
            return {**base, "converged": False, "n_converged": 0, "n_nontrivial": 0,
                    "q_effective": 0, "retrieval_modularity": math.nan,
                    "bethe_free_energy": math.nan, "mean_entropy": math.nan,
                    "beta": math.nan, "error": self.error}
        best = self.result.best
        return {**base, "converged": best.converged, "n_converged": self.result.n_converged,
                "n_nontrivial": self.result.n_nontrivial, "q_effective": best.q_effective,
                "retrieval_modularity": best.retrieval_modularity,
                "bethe_free_energy": best.bethe_free_energy,
                "mean_entropy": best.mean_entropy, "beta": best.parameters["beta"],
                "error": None}


def _cell(args):
    net, gamma, omega, q_max, options = args
    try:
        return GridCell(gamma, omega, run_pipeline(net, gamma, omega, q_max, options,
                                                   return_candidates=True))
    except Exception as exc:  # one bad cell must not sink the grid
        logger.warning("cell gamma=%s omega=%s failed: %s", gamma, omega, exc)
        return GridCell(gamma, omega, None, f"{type(exc).__name__}: {exc}")


def run_grid(net: MultilayerNetwork, gammas, omegas, q_max: int = 4,
             options: PipelineOptions | None = None, n_jobs: int = 1) -> list[GridCell]:
    """Pipeline for every ``(gamma, omega)`` pair, ordered gamma-major.

    Each cell gets its own seed derived from the base seed and the cell
    index, so results do not depend on ``n_jobs``.
    """
    gammas, omegas = list(gammas), list(omegas)
    if not gammas or not omegas:
        raise ValueError("gamma and omega grids must be non-empty")
    options = options or PipelineOptions()
    jobs = []
    for k, (g, w) in enumerate((g, w) for g in gammas for w in omegas):
        cell_opts = replace(options, seed=_child_seed(options.seed, 1000 + k)) \
            if len(gammas) * len(omegas) > 1 else options
        jobs.append((net, float(g), float(w), q_max, cell_opts))
    if n_jobs == 1:
        return [_cell(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(_cell, jobs))
