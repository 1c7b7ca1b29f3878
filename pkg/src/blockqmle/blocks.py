"""Block decomposition of the observation window.

The horizon is split into equal blocks; each block collects the observed
increments of both components whose defining intervals start inside it,
the local covariate averages, and the interval-overlap structure feeding
the block covariance.  Increment slots of the two components are also
merged in time order here, which makes every block covariance banded and
is what the fast likelihood kernels operate on.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .errors import ConfigError, DataError
from .simulate import ObservationSet


def default_block_size(b_n: int) -> int:
    """Default block-size rule k_n = floor(b_n^(5/8))."""
    return max(1, int(np.floor(b_n ** 0.625)))


@dataclass(frozen=True)
class BlockConfig:
    """Frequency parameter b_n and per-block size parameter k_n."""

    b_n: int
    k_n: Optional[int] = None

    def __post_init__(self):
        if self.b_n < 1:
            raise ConfigError("b_n must be >= 1")
        if self.k_n is None:
            object.__setattr__(self, "k_n", default_block_size(self.b_n))
        if not (1 <= self.k_n <= self.b_n):
            raise ConfigError(f"need 1 <= k_n <= b_n, got k_n={self.k_n}, b_n={self.b_n}")

    @property
    def n_blocks(self) -> int:
        return self.b_n // self.k_n


@dataclass
class Block:
    """One block of the partition with everything the likelihood needs."""

    index: int  # 1-based position in the partition
    s_lo: float
    s_hi: float
    counts: tuple  # increments per component, may be <= 0 for degenerate blocks
    lo: tuple  # interval left endpoints per component
    hi: tuple
    lens: tuple
    z: tuple  # observed increments per component
    x_hat: np.ndarray  # local covariate average, shape (2,)
    degenerate: bool
    excluded: bool
    # merged banded structure (empty for degenerate blocks)
    pos1: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    pos2: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    oi: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    oj: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    og: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.float64))
    bandwidth: int = 0
    zb: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.float64))

    @property
    def size(self) -> int:
        return len(self.zb)

    def overlap_matrix(self) -> np.ndarray:
        """Dense interval-overlap matrix of the block."""
        g = np.zeros((max(self.counts[0], 0), max(self.counts[1], 0)))
        if len(self.oi):
            g[self.oi, self.oj] = self.og
        return g


@dataclass
class BlockData:
    """The full partition plus global diagnostics."""

    blocks: list
    s: np.ndarray
    b_n: int
    k_n: int
    T: float
    increment_counts: tuple  # observed increments per component (whole sample)
    r_max: float
    r_min: float
    count_max: int
    count_min: int

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def delta_s(self) -> float:
        return self.s[1] - self.s[0]

    def included(self):
        """Blocks entering the likelihood sums."""
        return [b for b in self.blocks if not b.excluded]


def _merge_positions(lo1: np.ndarray, lo2: np.ndarray):
    """Positions of each component's slots after a time-ordered merge."""
    order = np.argsort(np.concatenate([lo1, lo2]), kind="stable")
    inv = np.empty(len(order), dtype=np.int64)
    inv[order] = np.arange(len(order), dtype=np.int64)
    return inv[: len(lo1)], inv[len(lo1):]


def build_blocks(obs: ObservationSet, cfg: BlockConfig) -> BlockData:
    """Construct the block partition and all derived per-block objects.

    Blocks with no increment in one of the components are flagged
    degenerate and excluded from likelihood sums, as is the first block
    (its covariate average is not backed by a full window).
    """
    times = [np.asarray(obs.times[k], dtype=float) for k in range(2)]
    values = [np.asarray(obs.values[k], dtype=float) for k in range(2)]
    for k in range(2):
        if len(times[k]) < 2:
            raise DataError(f"component {k + 1} needs at least 2 observations")
    ell = cfg.n_blocks
    if ell < 2:
        raise ConfigError(f"partition needs at least 2 blocks, got {ell}")
    T = obs.T
    s = T * np.arange(ell + 1) / ell

    # K[m] = number of observation indices i >= 1 with time strictly before
    # s_m, with K[0] = -1; intervals straddling a block boundary are dropped
    K = []
    for k in range(2):
        counts = np.maximum(np.searchsorted(times[k], s[1:], side="left") - 1, 0)
        K.append(np.concatenate([[-1], counts]))

    xt = [np.asarray(t, dtype=float) for t in obs.covariate_times]
    xv = [np.asarray(v, dtype=float) for v in obs.covariate_values]

    blocks = []
    r_max, r_min = 0.0, np.inf
    cnt_max, cnt_min = -(10**9), 10**9
    last_xhat = np.array([xv[0][0], xv[1][0]])
    for m in range(1, ell + 1):
        lo, hi, lens, z, counts = [], [], [], [], []
        for k in range(2):
            first = K[k][m - 1] + 1
            # inclusive left-endpoint index; a final observation short of
            # the horizon cannot close its last increment
            last = min(K[k][m] - 1, len(times[k]) - 2)
            km = last - first + 1
            counts.append(km)
            if km > 0:
                idx = np.arange(first, last + 1)
                lo.append(times[k][idx])
                hi.append(times[k][idx + 1])
                lens.append(hi[-1] - lo[-1])
                z.append(values[k][idx + 1] - values[k][idx])
                r_max = max(r_max, float(lens[-1].max()))
                r_min = min(r_min, float(lens[-1].min()))
            else:
                lo.append(np.empty(0))
                hi.append(np.empty(0))
                lens.append(np.empty(0))
                z.append(np.empty(0))
            cnt_max = max(cnt_max, km)
            cnt_min = min(cnt_min, km)

        x_hat = last_xhat.copy()
        for k in range(2):
            j0, j1 = np.searchsorted(xt[k], [s[m - 1], s[m]], side="left")
            if j1 > j0:
                x_hat[k] = xv[k][j0:j1].mean()
        last_xhat = x_hat

        degenerate = counts[0] <= 0 or counts[1] <= 0
        blk = Block(
            index=m, s_lo=s[m - 1], s_hi=s[m],
            counts=(counts[0], counts[1]),
            lo=tuple(lo), hi=tuple(hi), lens=tuple(lens), z=tuple(z),
            x_hat=x_hat, degenerate=degenerate,
            excluded=degenerate or m == 1,
        )
        if not degenerate:
            blk.oi, blk.oj, blk.og = _kernels.interval_overlaps(
                lo[0], hi[0], lo[1], hi[1]
            )
            blk.pos1, blk.pos2 = _merge_positions(lo[0], lo[1])
            w = 0
            if len(blk.pos1) > 1:
                w = max(w, int(np.max(np.diff(blk.pos1))))
            if len(blk.pos2) > 1:
                w = max(w, int(np.max(np.diff(blk.pos2))))
            if len(blk.oi):
                w = max(w, int(np.max(np.abs(blk.pos1[blk.oi] - blk.pos2[blk.oj]))))
            blk.bandwidth = w
            zb = np.empty(counts[0] + counts[1])
            zb[blk.pos1] = z[0]
            zb[blk.pos2] = z[1]
            blk.zb = zb
        blocks.append(blk)

    return BlockData(
        blocks=blocks, s=s, b_n=cfg.b_n, k_n=cfg.k_n, T=T,
        increment_counts=(len(times[0]) - 1, len(times[1]) - 1),
        r_max=r_max, r_min=(0.0 if np.isinf(r_min) else r_min),
        count_max=cnt_max, count_min=cnt_min,
    )


def auto_block_config(obs: ObservationSet, b_n: Optional[int] = None,
                      k_n: Optional[int] = None) -> BlockConfig:
    """Block configuration with b_n defaulting to the observation frequency.

    Simulated data carries its frequency index; otherwise b_n falls back
    to the larger per-component increment count per unit time, rounded up.
    """
    if b_n is None:
        if obs.n is not None:
            b_n = int(obs.n)
        else:
            j1, j2 = obs.increment_counts()
            b_n = int(np.ceil(max(j1, j2) / obs.T))
    return BlockConfig(b_n=b_n, k_n=k_n)


def dump_csv(bd: BlockData, path: str) -> None:
    """Debug dump of block boundaries and counts."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["m", "s_m", "k1_m", "k2_m", "degenerate"])
        for b in bd.blocks:
            writer.writerow([b.index, repr(b.s_hi), b.counts[0], b.counts[1], int(b.degenerate)])
