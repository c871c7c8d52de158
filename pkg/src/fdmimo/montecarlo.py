"""Seeded Monte Carlo sweeps over the downlink transmit power.

Every trial owns two counter-based random substreams derived from the master
seed: one for the channel realization and one for canceller impairments.
The impairment stream is restarted for each (design, power) pair, so all
designs and power points of a trial see common random numbers.  Trials are
independent and results are reduced in trial order, which makes a sweep
bit-reproducible for any number of worker processes.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import solver
from .channels import draw_channel_set
from .exceptions import ConfigError

logger = logging.getLogger(__name__)

DESIGN_KINDS = ("proposed_taps", "proposed_aux", "sota_full_taps", "sota_full_aux", "softnull")

# Per-trial record layout along the last axis.
_FEASIBLE, _ALPHA, _DL, _UL, _FD = range(5)

_CHANNEL_STREAM = 0
_IMPAIRMENT_STREAM = 1


@dataclass(frozen=True)
class Design:
    """A compared FD design; ``n_elements`` is only used by proposed designs."""

    kind: str
    n_elements: Optional[int] = None

    def __post_init__(self):
        if self.kind not in DESIGN_KINDS:
            raise ConfigError("designs", f"unknown design {self.kind!r}")
        if self.kind.startswith("proposed") and self.n_elements is None:
            raise ConfigError("designs", f"{self.kind} needs an element count, e.g. {self.kind}:4")

    @property
    def label(self):
        if self.kind.startswith("proposed"):
            return f"{self.kind}_n{self.n_elements}"
        return self.kind

    @property
    def architecture(self):
        if self.kind == "softnull":
            return None
        return "taps" if self.kind.endswith("taps") else "aux"

    @classmethod
    def parse(cls, text):
        """Parse ``kind`` or ``kind:N`` (e.g. ``proposed_taps:8``)."""
        kind, _, n = str(text).partition(":")
        kind = kind.strip()
        if n:
            try:
                return cls(kind, int(n))
            except ValueError:
                raise ConfigError("designs", f"bad element count in {text!r}") from None
        return cls(kind)

    def __str__(self):
        return f"{self.kind}:{self.n_elements}" if self.n_elements is not None else self.kind


@dataclass(frozen=True)
class SweepSpec:
    p_k_grid_dbm: Tuple[float, ...] = (10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0)
    p_m_offset_db: float = -20.0
    n_trials: int = 1000
    designs: Tuple[Design, ...] = (
        Design("proposed_taps", 4),
        Design("proposed_taps", 8),
        Design("sota_full_taps"),
        Design("softnull"),
    )
    master_seed: int = 0
    lambda_a_dbm: float = -60.0

    def __post_init__(self):
        if self.n_trials < 1:
            raise ConfigError("n_trials", "must be >= 1")
        if len(self.p_k_grid_dbm) == 0:
            raise ConfigError("p_k_grid_dbm", "power grid must not be empty")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed", "must be a 64-bit unsigned integer")
        if len(self.designs) == 0:
            raise ConfigError("designs", "at least one design is required")
        object.__setattr__(self, "p_k_grid_dbm", tuple(float(p) for p in self.p_k_grid_dbm))
        object.__setattr__(
            self,
            "designs",
            tuple(d if isinstance(d, Design) else Design.parse(d) for d in self.designs),
        )


@dataclass(frozen=True)
class PointStats:
    """Statistics of one design at one transmit power."""

    design: str
    p_k_dbm: float
    p_m_dbm: float
    prob_constraint_met: float
    avg_alpha: float
    mean_dl_rate: float
    mean_ul_rate: float
    mean_fd_rate: float
    mean_fd_conditioned: float
    se_fd_rate: float
    n_feasible: int
    n_trials: int


def substream(master_seed, trial, stream):
    """Independent Philox generator for ``(trial, stream)``."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(trial, stream))
    return np.random.Generator(np.random.Philox(seq))


def solve_design(design, channels, config, impairments, rng):
    """Run one compared design on one channel realization."""
    if design.kind == "softnull":
        return solver.solve_softnull(channels, config)
    if design.kind.startswith("sota_full"):
        return solver.solve_sota_full_canceller(
            channels, config, impairments, rng, design.architecture
        )
    cfg = config.replace(architecture=design.architecture, n_elements=design.n_elements)
    return solver.solve_op3(channels, cfg, impairments, rng)


def run_trial(trial, spec, config, params, impairments):
    """Records of one trial, shape ``(n_designs, n_powers, 5)``."""
    channels = draw_channel_set(config, params, substream(spec.master_seed, trial, _CHANNEL_STREAM))
    out = np.zeros((len(spec.designs), len(spec.p_k_grid_dbm), 5))
    for ip, p_k_dbm in enumerate(spec.p_k_grid_dbm):
        cfg = config.replace(
            p_k_dbm=p_k_dbm,
            p_m_dbm=p_k_dbm + spec.p_m_offset_db,
            lambda_a_dbm=spec.lambda_a_dbm,
        )
        for idd, design in enumerate(spec.designs):
            rng = substream(spec.master_seed, trial, _IMPAIRMENT_STREAM)
            sol = solve_design(design, channels, cfg, impairments, rng)
            out[idd, ip] = (float(sol.feasible), sol.alpha_used, sol.dl_rate, sol.ul_rate, sol.fd_rate)
    return out


def _run_chunk(args):
    trials, spec, config, params, impairments = args
    return [run_trial(t, spec, config, params, impairments) for t in trials]


@dataclass
class SweepResult:
    """Per-trial records and the statistics derived from them.

    ``records[t, d, p]`` holds ``(feasible, alpha, dl, ul, fd)`` for trial
    ``t``, design ``d`` and power index ``p``.  Infeasible trials carry their
    half-duplex fallback rates.
    """

    spec: SweepSpec
    records: np.ndarray
    labels: Tuple[str, ...] = field(init=False)

    def __post_init__(self):
        self.labels = tuple(d.label for d in self.spec.designs)

    def _index(self, design):
        label = design.label if isinstance(design, Design) else str(design)
        if label not in self.labels and ":" in label:
            label = Design.parse(label).label
        return self.labels.index(label)

    def point(self, design, p_k_dbm) -> PointStats:
        d = self._index(design)
        p = self.spec.p_k_grid_dbm.index(float(p_k_dbm))
        rec = self.records[:, d, p]
        feasible = rec[:, _FEASIBLE] > 0.5
        n_feas = int(feasible.sum())
        n = rec.shape[0]
        fd = rec[:, _FD]
        return PointStats(
            design=self.labels[d],
            p_k_dbm=self.spec.p_k_grid_dbm[p],
            p_m_dbm=self.spec.p_k_grid_dbm[p] + self.spec.p_m_offset_db,
            prob_constraint_met=n_feas / n,
            avg_alpha=float(rec[feasible, _ALPHA].mean()) if n_feas else math.nan,
            mean_dl_rate=float(rec[:, _DL].mean()),
            mean_ul_rate=float(rec[:, _UL].mean()),
            mean_fd_rate=float(fd.mean()),
            mean_fd_conditioned=float(fd[feasible].mean()) if n_feas else math.nan,
            se_fd_rate=float(fd.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan,
            n_feasible=n_feas,
            n_trials=n,
        )

    def rows(self) -> List[PointStats]:
        return [
            self.point(label, p)
            for label in self.labels
            for p in self.spec.p_k_grid_dbm
        ]

    def series(self, design, attr) -> np.ndarray:
        """``attr`` of ``design`` along the power grid."""
        return np.array([getattr(self.point(design, p), attr) for p in self.spec.p_k_grid_dbm])


def run_sweep(spec, system_config, channel_params, impairments, n_jobs=1) -> SweepResult:
    """Run ``spec.n_trials`` trials of every design at every grid power."""
    trials = list(range(spec.n_trials))
    if n_jobs is None or n_jobs <= 1:
        records = [run_trial(t, spec, system_config, channel_params, impairments) for t in trials]
    else:
        chunks = [trials[i::n_jobs] for i in range(n_jobs)]
        by_trial = {}
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            args = [(c, spec, system_config, channel_params, impairments) for c in chunks]
            for chunk, outs in zip(chunks, pool.map(_run_chunk, args)):
                by_trial.update(zip(chunk, outs))
        records = [by_trial[t] for t in trials]
    return SweepResult(spec=spec, records=np.stack(records))


def summarize_alpha(result: SweepResult) -> Dict[Tuple[str, float], float]:
    """Mean ``alpha`` per (design, power) over feasible trials only."""
    return {
        (label, p): result.point(label, p).avg_alpha
        for label in result.labels
        for p in result.spec.p_k_grid_dbm
    }
