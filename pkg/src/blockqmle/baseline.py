"""Previous-tick realized covariance, the naive comparison baseline.

Synchronizes the second component onto the first component's observation
times by carrying the most recent value, then sums the products of the
synchronized increments.  No noise or asynchronicity correction: under
microstructure noise this estimator is badly biased, which is exactly why
it serves as the baseline.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError
from .simulate import ObservationSet


def realized_cov_previous_tick(obs: ObservationSet) -> float:
    """Realized covariance after previous-tick synchronization."""
    t1 = np.asarray(obs.times[0], dtype=float)
    y1 = np.asarray(obs.values[0], dtype=float)
    t2 = np.asarray(obs.times[1], dtype=float)
    y2 = np.asarray(obs.values[1], dtype=float)
    if len(t1) < 2 or len(t2) < 2:
        raise DataError("need at least 2 observations per component")
    # last observation of component 2 at or before each time of component 1
    idx = np.searchsorted(t2, t1, side="right") - 1
    if idx[0] < 0:
        raise DataError("component 2 starts after component 1")
    y2_sync = y2[idx]
    return float(np.diff(y1) @ np.diff(y2_sync))
