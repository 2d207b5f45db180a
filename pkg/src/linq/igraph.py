"""K-nearest interference graphs.

Each link is a vertex; vertex i receives a directed edge from each of its K
strongest interferers. "Strongest" is judged by Tx_j -> Rx_i distance
(default, CSI-free) or by channel gain. Neighbor lists are stored
nearest-first with ties broken by lower node index, so graph construction is
fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import ChannelMatrix, NetworkLayout

EDGE_BY_DISTANCE = "distance"
EDGE_BY_GAIN = "gain"


@dataclass
class InterferenceGraph:
    n: int
    k: int                      # requested K; effective in-degree is min(K, n-1)
    in_neighbors: np.ndarray    # (n, k_eff) sources j of edges j -> i, strongest first
    edge_key: str
    in_dist: np.ndarray | None = None   # distances aligned with in_neighbors
    _out: list | None = field(default=None, repr=False)

    @property
    def k_eff(self) -> int:
        return self.in_neighbors.shape[1]

    @property
    def out_neighbors(self) -> list:
        """out_neighbors[j] = targets i with j in in_neighbors[i], nearest first."""
        if self._out is None:
            buckets = [[] for _ in range(self.n)]
            for i in range(self.n):
                row = self.in_neighbors[i]
                if self.in_dist is not None:
                    for j, d in zip(row, self.in_dist[i]):
                        buckets[j].append((d, i))
                else:
                    for j in row:
                        buckets[j].append((0.0, i))
            self._out = [np.array([i for _, i in sorted(b)], dtype=np.int64)
                         for b in buckets]
        return self._out


def _rank_columns(score: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Per column i, the k rows j != i with smallest score[j, i], index tie-break."""
    n = score.shape[0]
    k_eff = min(k, n - 1)
    s = score.copy()
    np.fill_diagonal(s, np.inf)  # a node never interferes with itself
    order = np.argsort(s, axis=0, kind="stable")  # stable => ties by lower index
    nb = order[:k_eff, :].T.copy()                # (n, k_eff)
    taken = np.take_along_axis(s.T, nb, axis=1)
    return nb, taken


def build_k_nearest(source, k: int, edge_key: str = EDGE_BY_DISTANCE,
                    channel: ChannelMatrix | None = None) -> InterferenceGraph:
    """Build the K-nearest interference graph.

    ``source`` is a NetworkLayout (distance mode) or a ChannelMatrix (gain
    mode). K >= n effectively clamps to n-1. Layouts above their dense cap are
    handled with a KD-tree instead of a full distance matrix.
    """
    if k < 1:
        raise ValueError("need k >= 1")
    if edge_key == EDGE_BY_GAIN:
        chan = channel if channel is not None else source
        if not isinstance(chan, ChannelMatrix):
            raise TypeError("gain mode needs a ChannelMatrix")
        # larger gain = stronger interferer, so rank by -gain
        nb, neg = _rank_columns(-chan.gains, k)
        return InterferenceGraph(n=chan.n_links, k=k, in_neighbors=nb,
                                 edge_key=edge_key, in_dist=None)
    if edge_key != EDGE_BY_DISTANCE:
        raise ValueError(f"unknown edge key {edge_key!r}")
    if not isinstance(source, NetworkLayout):
        raise TypeError("distance mode needs a NetworkLayout")
    layout = source
    n = layout.n_links
    if layout.is_dense:
        nb, dist = _rank_columns(layout.dist_matrix(), k)
        return InterferenceGraph(n=n, k=k, in_neighbors=nb,
                                 edge_key=edge_key, in_dist=dist)
    return _build_sparse(layout, k)


def _build_sparse(layout: NetworkLayout, k: int) -> InterferenceGraph:
    """KD-tree construction for networks above the dense cap."""
    from scipy.spatial import cKDTree

    n = layout.n_links
    k_eff = min(k, n - 1)
    tree = cKDTree(layout.tx_pos)
    # query one extra so the own transmitter can be dropped when it shows up
    d, idx = tree.query(layout.rx_pos, k=k_eff + 1)
    rows = np.arange(n)
    nb = np.empty((n, k_eff), dtype=np.int64)
    nd = np.empty((n, k_eff))
    own = idx == rows[:, None]
    for i in range(n):
        keep = idx[i][~own[i]][:k_eff]
        # recompute distances from positions and re-sort with index tie-break
        dd = layout.pair_dist(keep, np.full(keep.shape, i))
        order = np.lexsort((keep, dd))
        nb[i] = keep[order]
        nd[i] = dd[order]
    return InterferenceGraph(n=n, k=k, in_neighbors=nb,
                             edge_key=EDGE_BY_DISTANCE, in_dist=nd)
