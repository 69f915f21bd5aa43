# services/active_sampling.py
"""
Active-set construction, inclusion-probability estimation, Bernoulli
selection with budget accounting, and the label oracles.

Selection decisions depend only on (x, z, active set, random stream); labels
are reachable exclusively through a LabelOracle, which charges the budget.
"""
import logging
import threading
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from contracts.errors import ArgumentError, BudgetError, SamplingDegenerateError
from contracts.models import ActiveSetSpec, LabeledBatch, SealedLabels, UnlabeledPool
from infra.logging import log_event
from infra.random_streams import stream, uniforms

logger = logging.getLogger(__name__)

HARD_CAP_FACTOR = 2.0


# ============================================================================
# Label oracles
# ============================================================================

class LabelOracle:
    """
    Reveals labels on request and charges the budget.

    The expected budget is N; the hard cap is 2N distinct labels. A row already
    revealed is returned again free of charge.
    """

    def __init__(self, budget: float, hard_cap_factor: float = HARD_CAP_FACTOR):
        if not budget > 0:
            raise ArgumentError(f"label budget must be positive, got {budget}")
        self.budget = float(budget)
        self.hard_cap = int(np.floor(hard_cap_factor * budget))
        self.labels_issued = 0
        self.iteration: Optional[int] = None
        self._revealed: Dict[int, float] = {}
        self._lock = threading.Lock()

    @property
    def budget_remaining(self) -> int:
        return max(0, int(round(self.budget)) - self.labels_issued)

    def _fetch(self, row_ids: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def request(self, row_ids: Sequence[int]) -> np.ndarray:
        """Labels for row_ids (original dataset indices), charging new rows only."""
        row_ids = np.asarray(row_ids, dtype=int)
        with self._lock:
            fresh = np.array(sorted({int(r) for r in row_ids} - self._revealed.keys()), dtype=int)
            if self.labels_issued + len(fresh) > self.hard_cap:
                raise BudgetError(
                    f"label hard cap {self.hard_cap} reached: {self.labels_issued} issued, "
                    f"{len(fresh)} more requested",
                    iteration=self.iteration,
                )
            if len(fresh):
                values = self._fetch(fresh)
                self._revealed.update(zip(fresh.tolist(), values.tolist()))
                self.labels_issued += len(fresh)
            return np.array([self._revealed[int(r)] for r in row_ids], dtype=float)


class SimulationOracle(LabelOracle):
    """Oracle over the sealed labels of a simulated pool."""

    def __init__(self, labels: SealedLabels, budget: float, hard_cap_factor: float = HARD_CAP_FACTOR):
        super().__init__(budget, hard_cap_factor)
        self._labels = labels

    @classmethod
    def from_pool(cls, pool: UnlabeledPool, budget: float) -> "SimulationOracle":
        if pool.hidden_y is None:
            raise ArgumentError("pool carries no sealed labels")
        return cls(pool.hidden_y, budget)

    def _fetch(self, row_ids: np.ndarray) -> np.ndarray:
        return self._labels.unseal()[row_ids]


class FileLabelOracle(LabelOracle):
    """
    Oracle over the label column of a dataset CSV.

    The column is read on first use; a requested row without a label is a
    budget error.
    """

    def __init__(self, path: Union[str, Path], budget: float, column: str = "y",
                 hard_cap_factor: float = HARD_CAP_FACTOR):
        super().__init__(budget, hard_cap_factor)
        self.path = Path(path)
        self.column = column
        self._column: Optional[np.ndarray] = None

    def _load(self) -> np.ndarray:
        if self._column is None:
            frame = pd.read_csv(self.path, usecols=[self.column])
            self._column = frame[self.column].to_numpy(dtype=float)
        return self._column

    def ensure_capacity(self):
        """Fail early when the file holds fewer labels than the budget."""
        available = int(np.count_nonzero(~np.isnan(self._load())))
        if self.budget > available:
            raise BudgetError(f"budget {self.budget:g} exceeds the {available} labeled rows in {self.path}")

    def _fetch(self, row_ids: np.ndarray) -> np.ndarray:
        values = self._load()[row_ids]
        missing = np.isnan(values)
        if np.any(missing):
            raise BudgetError(
                f"row {int(row_ids[missing][0])} has no label in {self.path}",
                iteration=self.iteration,
            )
        if not np.all(np.isin(values, (-1.0, 1.0))):
            raise ArgumentError(f"labels in {self.path} must be -1 or 1")
        return values


# ============================================================================
# Active set and sampling rate
# ============================================================================

def active_set_member(x, z, spec: ActiveSetSpec):
    """|x - theta_ref'z| <= b sqrt(1 + ||theta_ref||^2), vectorized over rows."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    margin = x - z @ spec.theta_ref
    inside = np.abs(margin) <= spec.half_width
    return bool(inside) if np.ndim(inside) == 0 else inside


def standardized_margins(pool: UnlabeledPool, theta_ref: np.ndarray) -> np.ndarray:
    """|x - theta'z| / sqrt(1 + ||theta||^2); b-quantiles of this give coverage levels."""
    return np.abs(pool.x - pool.z @ theta_ref) / np.sqrt(1.0 + np.dot(theta_ref, theta_ref))


def estimate_inclusion_prob(pool_slice: UnlabeledPool, spec: ActiveSetSpec) -> float:
    """Fraction of rows of the estimation slice inside the active set."""
    if len(pool_slice) == 0:
        raise ArgumentError("cannot estimate an inclusion probability on an empty slice")
    return float(np.mean(active_set_member(pool_slice.x, pool_slice.z, spec)))


def sampling_rate(n_k: float, n_batch: int, p_hat: float) -> Tuple[float, bool]:
    """
    Plug-in Bernoulli rate c = min(N_k / (n_batch * p_hat), 1).

    Returns:
        (c, clamped) where clamped reports that the rate hit 1
    """
    if p_hat <= 0:
        raise SamplingDegenerateError("active set is empty on the estimation slice (p_hat = 0)")
    if n_batch <= 0:
        raise ArgumentError("batch must have at least one row")
    raw = n_k / (n_batch * p_hat)
    return (1.0, True) if raw > 1.0 else (float(raw), False)


# ============================================================================
# Batch splitting and selection
# ============================================================================

def split_pool(pool: UnlabeledPool, fractions: Sequence[float], seed: int) -> List[UnlabeledPool]:
    """
    Random disjoint split of the pool into consecutive chunks of the given fractions.

    The last chunk absorbs rounding, so every row lands in exactly one batch.
    """
    n = len(pool)
    perm = stream(seed, "split").permutation(n)
    bounds = np.floor(np.cumsum([0.0] + list(fractions)) * n + 1e-9).astype(int)
    bounds[-1] = n
    return [pool.take(perm[lo:hi]) for lo, hi in zip(bounds[:-1], bounds[1:])]


def draw_and_label(batch: UnlabeledPool, spec: Optional[ActiveSetSpec], c: float,
                   oracle: LabelOracle, seed: int, batch_index: Union[int, str]) -> LabeledBatch:
    """
    Bernoulli selection R_i ~ Bernoulli(c * 1{row in active set}) and labeling.

    Row i of the batch uses the i-th uniform of the (seed, batch_index) stream,
    drawn for every row whether or not it is in the active set. Without a spec
    (first iteration) every row is eligible.

    Returns:
        LabeledBatch with batch_size_total = |batch| and scale = 1/|batch|
    """
    if not 0 < c <= 1:
        raise ArgumentError(f"sampling rate must lie in (0, 1], got {c}")
    n_batch = len(batch)
    if n_batch == 0:
        raise ArgumentError("cannot sample from an empty batch")
    u = uniforms(stream(seed, "select", batch_index), n_batch)
    member = np.ones(n_batch, dtype=bool) if spec is None else active_set_member(batch.x, batch.z, spec)
    selected = np.flatnonzero(member & (u < c))

    row_ids = batch.row_ids[selected]
    y = oracle.request(row_ids) if len(selected) else np.zeros(0)
    log_event("batch_labeled", batch=str(batch_index), rows=n_batch, eligible=int(member.sum()),
              selected=int(len(selected)), rate=c, labels_issued=oracle.labels_issued)
    return LabeledBatch(
        x=batch.x[selected], z=batch.z[selected], y=y,
        batch_size_total=n_batch, scale=1.0 / n_batch, row_ids=row_ids,
    )
