"""Per-block graph structure.

Everything a trident block needs before aggregation: first-order similarity
matrices, top-k neighbor selection, the Chebyshev-masked local branch, the
progressive channel schedule that moves capacity from the local branch into
the global graph branches, and the direct form of second-order similarity
(affinity between aggregated neighborhoods) used to cross-check the pipeline.

Similarity computation and neighbor selection are structural: gradients never
flow through them, so they work on plain float arrays internally.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, DegenerateInputError, DimensionError
from .tensor import Tensor, offset_mix

SIMILARITY_METRICS = ("dot", "cosine", "neg_euclidean")


def _as_array(x) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x)


# ---------------------------------------------------------------------------
# topology and schedule types
# ---------------------------------------------------------------------------


@dataclass
class GraphTopology:
    """Per-node neighbor lists with their similarity scores.

    ``neighbor_idx[i]`` holds the k most similar non-self nodes of node i in
    non-increasing similarity order (ties broken toward lower node index);
    ``neighbor_sim`` carries the matching scores.
    """

    n_nodes: int
    k: int
    neighbor_idx: np.ndarray
    neighbor_sim: np.ndarray

    def validate(self) -> "GraphTopology":
        if self.neighbor_idx.shape != (self.n_nodes, self.k):
            raise DimensionError("neighbor_idx shape mismatch")
        if self.neighbor_sim.shape != (self.n_nodes, self.k):
            raise DimensionError("neighbor_sim shape mismatch")
        rows = np.arange(self.n_nodes)[:, None]
        if np.any(self.neighbor_idx == rows):
            raise DegenerateInputError("self-loop in topology")
        if self.neighbor_idx.min(initial=0) < 0 or self.neighbor_idx.max(initial=0) >= self.n_nodes:
            raise DimensionError("neighbor index out of range")
        for i in range(self.n_nodes):
            if len(set(self.neighbor_idx[i])) != self.k:
                raise DegenerateInputError(f"duplicate neighbor in row {i}")
        if np.any(np.diff(self.neighbor_sim, axis=1) > 1e-6):
            raise DegenerateInputError("neighbor_sim rows must be non-increasing")
        return self


@dataclass
class ChannelSchedule:
    """Per-block split of the channel budget into (local, first, second)."""

    total_c: int
    per_block: list[tuple[int, int, int]]

    def __post_init__(self) -> None:
        firsts = {t[1] for t in self.per_block}
        if len(firsts) != 1:
            raise ConfigError("first-order width must be constant across blocks")
        prev_local, prev_second = None, None
        for local_c, first_c, second_c in self.per_block:
            if local_c + first_c + second_c != self.total_c:
                raise ConfigError("schedule triple does not sum to total channels")
            if min(local_c, first_c, second_c) < 0:
                raise ConfigError("negative width in schedule triple")
            if prev_second is not None and second_c < prev_second:
                raise ConfigError("second-order width must be non-decreasing")
            if prev_local is not None and local_c > prev_local:
                raise ConfigError("local width must be non-increasing")
            prev_local, prev_second = local_c, second_c


@dataclass
class LocalBranchParams:
    """Learnable per-offset, per-channel weights of the local branch.

    One weight row per (dy, dx) offset with |dy|, |dx| <= radius, shared
    across spatial positions (translation invariance).
    """

    radius: int = 3
    offset_weights: Tensor = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        side = 2 * self.radius + 1
        if self.offset_weights is None:
            raise ConfigError("offset_weights required")
        if self.offset_weights.shape[0] != side * side:
            raise ConfigError(
                f"expected {side * side} offset rows, got {self.offset_weights.shape[0]}"
            )


# ---------------------------------------------------------------------------
# similarity and selection
# ---------------------------------------------------------------------------


def pairwise_similarity(x, metric: str = "dot") -> Tensor:
    """All-pairs node similarity S[i][j] under the chosen metric.

    dot: raw inner product; cosine: inner product of unit rows (zero-norm
    rows are a degenerate-input error); neg_euclidean: negated Euclidean
    distance. Symmetric for all three.
    """
    xa = _as_array(x)
    if xa.ndim != 2 or xa.shape[0] < 2 or xa.shape[1] < 1:
        raise DimensionError(f"expected [n>=2, c>=1] features, got {xa.shape}")
    if metric not in SIMILARITY_METRICS:
        raise KeyError(f"unknown similarity metric {metric!r}")
    if metric == "dot":
        s = xa @ xa.T
    elif metric == "cosine":
        norms = np.linalg.norm(xa, axis=1)
        if np.any(norms == 0):
            raise DegenerateInputError("zero-norm row under cosine similarity")
        unit = xa / norms[:, None]
        s = unit @ unit.T
    else:
        sq = np.sum(xa * xa, axis=1)
        d2 = sq[:, None] + sq[None, :] - 2.0 * (xa @ xa.T)
        s = -np.sqrt(np.maximum(d2, 0.0))
    s = 0.5 * (s + s.T)
    return Tensor(s.astype(xa.dtype, copy=False))


def topk_neighbors(S, k: int) -> GraphTopology:
    """Select each node's k most similar non-self nodes from a similarity
    matrix. Ties break toward the lower node index; rows come back sorted by
    non-increasing similarity. k >= n is clamped to n-1 with a warning."""
    sa = _as_array(S)
    if sa.ndim != 2 or sa.shape[0] != sa.shape[1]:
        raise DimensionError(f"similarity matrix must be square, got {sa.shape}")
    n = sa.shape[0]
    if k < 1:
        raise ConfigError("k must be >= 1")
    if k >= n:
        warnings.warn(f"k={k} >= n={n}; clamping to {n - 1}", stacklevel=2)
        k = n - 1
    masked = sa.astype(np.float64, copy=True)
    np.fill_diagonal(masked, -np.inf)
    # Stable ascending sort of the negated scores == descending by score with
    # ties resolved toward the lower index; the -inf diagonal sorts last.
    order = np.argsort(-masked, axis=1, kind="stable")[:, :k]
    sims = np.take_along_axis(sa, order, axis=1)
    return GraphTopology(n_nodes=n, k=k, neighbor_idx=order, neighbor_sim=sims)


# ---------------------------------------------------------------------------
# Chebyshev-local branch
# ---------------------------------------------------------------------------


def chebyshev_mask(h: int, w: int, r: int) -> Tensor:
    """0/1 matrix over row-major grid nodes: 1 iff max(|drow|, |dcol|) <= r."""
    n = h * w
    rows = np.arange(n) // w
    cols = np.arange(n) % w
    dr = np.abs(rows[:, None] - rows[None, :])
    dc = np.abs(cols[:, None] - cols[None, :])
    mask = ((dr <= r) & (dc <= r)).astype(np.float32)
    return Tensor(mask)


def grid_offset_maps(
    h: int, w: int, r: int, coords: np.ndarray | None = None
) -> list[tuple[np.ndarray, np.ndarray]]:
    """(dst, src) node-index pairs for every (dy, dx) offset with
    |dy|, |dx| <= r, in fixed row-major offset order.

    ``coords`` optionally assigns each node a (row, col); default is row-major
    node order. Out-of-grid offsets are simply absent (zero padding).
    """
    n = h * w
    if coords is None:
        rows = np.arange(n) // w
        cols = np.arange(n) % w
    else:
        coords = np.asarray(coords)
        if coords.shape != (n, 2):
            raise DimensionError(f"coords must be [{n}, 2]")
        rows, cols = coords[:, 0], coords[:, 1]
    pos_to_node = np.full((h, w), -1, dtype=np.int64)
    pos_to_node[rows, cols] = np.arange(n)
    maps: list[tuple[np.ndarray, np.ndarray]] = []
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            src_r = rows + dy
            src_c = cols + dx
            ok = (src_r >= 0) & (src_r < h) & (src_c >= 0) & (src_c < w)
            dst = np.nonzero(ok)[0]
            src = pos_to_node[src_r[ok], src_c[ok]]
            maps.append((dst, src))
    return maps


def local_branch(
    x_local: Tensor,
    params: LocalBranchParams,
    h: int,
    w: int,
    coords: np.ndarray | None = None,
    bias: Tensor | None = None,
) -> Tensor:
    """Chebyshev-bounded mixing: y_i = sum over in-range grid neighbors j of
    the per-offset, per-channel weight times x_j (zero padding at borders)."""
    if x_local.shape[0] != h * w:
        raise DimensionError(f"{x_local.shape[0]} nodes cannot fill a {h}x{w} grid")
    maps = grid_offset_maps(h, w, params.radius, coords)
    return offset_mix(x_local, params.offset_weights, maps, bias=bias)


# ---------------------------------------------------------------------------
# progressive channel schedule
# ---------------------------------------------------------------------------


def _round_to_multiple(x: float, m: int) -> int:
    # Half-up, so schedules are platform independent.
    return int(np.floor(x / m + 0.5)) * m


def psgc_schedule(
    total_c: int,
    n_blocks: int,
    start_ratio: float,
    end_ratio: float,
    granularity: int = 16,
) -> ChannelSchedule:
    """Linear ramp of the global-graph width from start_ratio to end_ratio of
    the channel budget, rounded to multiples of ``granularity``.

    The first-order width is pinned at the block-0 global width; everything
    the ramp adds beyond that goes to the second-order branch, and the local
    branch gives up exactly that much.
    """
    if not (0.0 < start_ratio <= end_ratio < 1.0):
        raise ConfigError("need 0 < start_ratio <= end_ratio < 1")
    if total_c % granularity != 0:
        raise ConfigError(f"total_c={total_c} not divisible by granularity {granularity}")
    if n_blocks < 1:
        raise ConfigError("n_blocks must be >= 1")
    triples: list[tuple[int, int, int]] = []
    first_c = None
    for b in range(n_blocks):
        if n_blocks == 1:
            frac = start_ratio
        else:
            frac = start_ratio + (end_ratio - start_ratio) * b / (n_blocks - 1)
        g = _round_to_multiple(total_c * frac, granularity)
        if first_c is None:
            first_c = g
        local_c = total_c - g
        second_c = g - first_c
        if local_c < 0:
            raise ConfigError(f"block {b}: schedule leaves local width negative")
        if first_c < granularity:
            raise ConfigError("first-order width rounds below one granule")
        triples.append((local_c, first_c, second_c))
    return ChannelSchedule(total_c=total_c, per_block=triples)


# ---------------------------------------------------------------------------
# second-order similarity (direct form)
# ---------------------------------------------------------------------------


def second_order_similarity(x, neighborhoods: Sequence, agg_weights: Sequence) -> Tensor:
    """Affinity between aggregated neighborhoods, computed definitionally.

    For each node, phi_i = sum over its neighbors t of w_it * x_t (weights
    may be scalars or per-channel vectors); the result is the dot-product
    similarity S2[i][j] = sum over channels of phi_i * phi_j. Equals the
    first-order similarity of local-branch outputs when the neighborhoods
    and weights come from the same Chebyshev structure.
    """
    xa = _as_array(x).astype(np.float64)
    n, c = xa.shape
    if len(neighborhoods) != n or len(agg_weights) != n:
        raise DimensionError("one neighborhood and weight list required per node")
    agg = np.zeros((n, c), dtype=np.float64)
    for i, (nbrs, ws) in enumerate(zip(neighborhoods, agg_weights)):
        nbrs = np.asarray(nbrs, dtype=np.int64)
        if nbrs.size == 0:
            raise DegenerateInputError(f"node {i} has an empty neighborhood")
        ws = np.asarray(ws, dtype=np.float64)
        for t, j in enumerate(nbrs):
            wj = ws[t]
            agg[i] += wj * xa[j]
    s2 = np.empty((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(n):
            s2[i, j] = float(np.dot(agg[i], agg[j]))
    return Tensor(s2)


# ---------------------------------------------------------------------------
# edge export
# ---------------------------------------------------------------------------


def export_edges(path: str | Path, topologies: Sequence[tuple[int, GraphTopology]]) -> None:
    """Write ``block,node,neighbor,rank,similarity`` CSV rows (with header)
    for each (block_index, topology) pair."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["block", "node", "neighbor", "rank", "similarity"])
        for block, topo in topologies:
            for node in range(topo.n_nodes):
                for rank in range(topo.k):
                    writer.writerow(
                        [
                            block,
                            node,
                            int(topo.neighbor_idx[node, rank]),
                            rank,
                            f"{float(topo.neighbor_sim[node, rank]):.8g}",
                        ]
                    )
