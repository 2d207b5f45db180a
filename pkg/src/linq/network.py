"""D2D network layouts and channel gain matrices.

Transmitters are dropped uniformly in a square area; each receiver sits at a
uniform distance (within the pairing bounds) and uniform angle from its
transmitter. Channel gains follow the ITU-R P.1411 short-range outdoor
line-of-sight model, optionally augmented with antenna gain, log-normal
shadowing and Rayleigh fast fading.

Index convention used throughout the package: ``dist[j, i]`` and
``gains[j, i]`` refer to the path Tx_j -> Rx_i, so row = transmitter,
column = receiver, and the diagonal holds the paired links.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

SPEED_OF_LIGHT = 299792458.0  # m/s

PATH_LOSS_ONLY = "path_loss_only"
REALISTIC = "realistic"

# Full N x N matrices are only materialized up to this many links; larger
# networks go through the sparse (k-neighborhood) code paths.
DEFAULT_DENSE_CAP = 2000

_PLACEMENT_TRIES = 1000


@dataclass(frozen=True)
class SystemParams:
    """Static system configuration shared by all layouts of an experiment."""

    area_side: float = 500.0        # m
    d2d_min: float = 2.0            # m, min Tx-Rx pairing distance
    d2d_max: float = 65.0           # m, max Tx-Rx pairing distance
    bandwidth: float = 5e6          # Hz
    noise_density: float = -169.0   # dBm/Hz
    carrier_freq: float = 2.4e9     # Hz
    antenna_height: float = 1.5     # m
    p_max: float = 40.0             # dBm per transmitter
    weights: np.ndarray | None = None  # per-link priorities, None = all ones
    dense_cap: int = DEFAULT_DENSE_CAP

    def __post_init__(self):
        if not (0 < self.d2d_min <= self.d2d_max < self.area_side):
            raise ValueError(
                f"need 0 < d2d_min <= d2d_max < area_side, got "
                f"({self.d2d_min}, {self.d2d_max}, {self.area_side})")
        if self.bandwidth <= 0 or self.carrier_freq <= 0 or self.antenna_height <= 0:
            raise ValueError("bandwidth, carrier_freq and antenna_height must be positive")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if np.any(w <= 0):
                raise ValueError("link weights must all be positive")
            object.__setattr__(self, "weights", w)

    @property
    def noise_power(self) -> float:
        """Thermal noise power over the full bandwidth, in watts."""
        return dbm_to_watts(self.noise_density + 10.0 * np.log10(self.bandwidth))

    @property
    def tx_power(self) -> float:
        """Per-transmitter power p_i in watts (full power operation)."""
        return dbm_to_watts(self.p_max)

    def link_weights(self, n: int) -> np.ndarray:
        if self.weights is None:
            return np.ones(n)
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (n,):
            raise ValueError(f"weights shape {w.shape} does not match n={n}")
        return w

    def with_(self, **kw) -> "SystemParams":
        return replace(self, **kw)


@dataclass
class NetworkLayout:
    """Positions of one random network realization.

    ``dist_matrix()`` materializes the full N x N Tx->Rx distance matrix and is
    only allowed up to ``dense_cap`` links; large networks use
    ``pair_dist`` / k-neighborhood queries instead.
    """

    tx_pos: np.ndarray  # (n, 2) m
    rx_pos: np.ndarray  # (n, 2) m
    seed: int
    area_side: float
    dense_cap: int = DEFAULT_DENSE_CAP
    _dist: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_links(self) -> int:
        return self.tx_pos.shape[0]

    @property
    def link_dist(self) -> np.ndarray:
        """Paired Tx_i -> Rx_i distances, shape (n,)."""
        return np.linalg.norm(self.tx_pos - self.rx_pos, axis=1)

    @property
    def is_dense(self) -> bool:
        return self.n_links <= self.dense_cap

    def dist_matrix(self) -> np.ndarray:
        """Full (n, n) matrix with dist[j, i] = |Tx_j - Rx_i|."""
        if not self.is_dense:
            raise ValueError(
                f"n={self.n_links} exceeds dense cap {self.dense_cap}; "
                "use pair_dist/k-neighborhood access instead")
        if self._dist is None:
            from scipy.spatial.distance import cdist
            self._dist = cdist(self.tx_pos, self.rx_pos)
        return self._dist

    def pair_dist(self, j: np.ndarray, i: np.ndarray) -> np.ndarray:
        """Distances Tx_j -> Rx_i for index arrays of equal shape."""
        d = self.tx_pos[j] - self.rx_pos[i]
        return np.sqrt(np.sum(d * d, axis=-1))


def dbm_to_watts(x_dbm) -> float:
    """x dBm = 10^((x - 30)/10) W."""
    return 10.0 ** ((np.asarray(x_dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(x_w) -> float:
    x_w = np.asarray(x_w, dtype=float)
    if np.any(x_w <= 0):
        raise ValueError("power must be positive")
    return 10.0 * np.log10(x_w) + 30.0


def generate_layout(params: SystemParams, n: int, seed: int) -> NetworkLayout:
    """Sample one network layout; deterministic given (params, n, seed).

    Receivers use polar sampling around their transmitter (uniform radius in
    [d2d_min, d2d_max], uniform angle) with rejection of positions outside the
    area.
    """
    if n < 1:
        raise ValueError("need n >= 1 links")
    rng = np.random.default_rng(seed)
    side = params.area_side
    tx = rng.uniform(0.0, side, size=(n, 2))
    rx = np.empty((n, 2))
    for i in range(n):
        for _ in range(_PLACEMENT_TRIES):
            r = rng.uniform(params.d2d_min, params.d2d_max)
            phi = rng.uniform(0.0, 2.0 * np.pi)
            cand = tx[i] + r * np.array([np.cos(phi), np.sin(phi)])
            if 0.0 <= cand[0] <= side and 0.0 <= cand[1] <= side:
                rx[i] = cand
                break
        else:
            raise RuntimeError(
                f"receiver placement for link {i} failed after "
                f"{_PLACEMENT_TRIES} tries; check d2d bounds vs area size")
    return NetworkLayout(tx_pos=tx, rx_pos=rx, seed=seed, area_side=side,
                         dense_cap=params.dense_cap)


def path_loss_itu1411(d, params: SystemParams):
    """Median line-of-sight ITU-R P.1411 path loss in dB for distance d (m).

    Below the breakpoint distance R_bp the loss grows at 20 dB/decade, beyond
    it at 40 dB/decade; both antennas sit at params.antenna_height.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("path loss requires d > 0")
    lam = SPEED_OF_LIGHT / params.carrier_freq
    h = params.antenna_height
    r_bp = 4.0 * h * h / lam
    l_bp = abs(20.0 * np.log10(lam * lam / (8.0 * np.pi * h * h)))
    ratio = d / r_bp
    loss = l_bp + 6.0 + 20.0 * np.log10(ratio)
    extra = np.where(d > r_bp, 20.0 * np.log10(ratio), 0.0)
    out = loss + extra
    return float(out) if out.ndim == 0 else out


def breakpoint_distance(params: SystemParams) -> float:
    lam = SPEED_OF_LIGHT / params.carrier_freq
    return 4.0 * params.antenna_height ** 2 / lam


@dataclass
class ChannelMatrix:
    """Linear power gains gains[j, i] (Tx_j -> Rx_i) plus noise power."""

    gains: np.ndarray   # (n, n) linear
    noise_power: float  # watts
    mode: str = PATH_LOSS_ONLY
    fading_seed: int | None = None

    @property
    def n_links(self) -> int:
        return self.gains.shape[0]

    @property
    def direct(self) -> np.ndarray:
        return np.diag(self.gains)


def rayleigh_power_factors(rng: np.random.Generator, size) -> np.ndarray:
    """Unit-mean exponential power factors of Rayleigh fast fading."""
    return rng.exponential(1.0, size=size)


def shadowing_factors(rng: np.random.Generator, size, sigma_db: float) -> np.ndarray:
    """Linear log-normal shadowing factors with the given dB std deviation."""
    return 10.0 ** (rng.normal(0.0, sigma_db, size=size) / 10.0)


def build_channel(layout: NetworkLayout, params: SystemParams,
                  mode: str = PATH_LOSS_ONLY, fading_seed: int | None = None,
                  antenna_gain_dbi: float = 2.5,
                  shadow_sigma_db: float = 8.0) -> ChannelMatrix:
    """Channel power gain matrix for a layout.

    PATH_LOSS_ONLY is a deterministic function of the distances. REALISTIC
    additionally applies antenna gain at both ends, log-normal shadowing and
    Rayleigh fast fading, drawn from ``fading_seed``.
    """
    dist = layout.dist_matrix()
    gains = 10.0 ** (-path_loss_itu1411(dist, params) / 10.0)
    if mode == REALISTIC:
        rng = np.random.default_rng(fading_seed)
        ant = 10.0 ** (2.0 * antenna_gain_dbi / 10.0)  # both link ends
        gains = gains * ant
        gains = gains * shadowing_factors(rng, gains.shape, shadow_sigma_db)
        gains = gains * rayleigh_power_factors(rng, gains.shape)
    elif mode != PATH_LOSS_ONLY:
        raise ValueError(f"unknown channel mode {mode!r}")
    if not np.all(np.isfinite(gains)) or np.any(gains <= 0):
        raise FloatingPointError("channel gains must be finite and positive")
    return ChannelMatrix(gains=gains, noise_power=params.noise_power,
                         mode=mode, fading_seed=fading_seed)


def save_layouts(path, layouts, channels=None) -> None:
    """Write layouts as JSON lines; realistic channels persist their gains."""
    if channels is None:
        channels = [None] * len(layouts)
    with open(path, "w") as fh:
        for layout, chan in zip(layouts, channels):
            rec = {
                "n": layout.n_links,
                "seed": int(layout.seed),
                "area": layout.area_side,
                "tx": layout.tx_pos.tolist(),
                "rx": layout.rx_pos.tolist(),
            }
            if chan is not None and chan.mode == REALISTIC:
                rec["gains"] = chan.gains.ravel().tolist()
                rec["noise"] = chan.noise_power
            fh.write(json.dumps(rec) + "\n")


def load_layouts(path, params: SystemParams):
    """Read a JSON-lines layout file; returns (layouts, channels).

    channels[i] is None unless the record carries a ``gains`` field, in which
    case the persisted (realistic-mode) channel is restored as-is.
    """
    layouts, channels = [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            n = int(rec["n"])
            layout = NetworkLayout(
                tx_pos=np.asarray(rec["tx"], dtype=float),
                rx_pos=np.asarray(rec["rx"], dtype=float),
                seed=int(rec.get("seed", -1)),
                area_side=float(rec.get("area", params.area_side)),
                dense_cap=params.dense_cap,
            )
            if layout.tx_pos.shape != (n, 2) or layout.rx_pos.shape != (n, 2):
                raise ValueError(f"layout record inconsistent with n={n}")
            layouts.append(layout)
            if "gains" in rec:
                gains = np.asarray(rec["gains"], dtype=float).reshape(n, n)
                channels.append(ChannelMatrix(
                    gains=gains,
                    noise_power=float(rec.get("noise", params.noise_power)),
                    mode=REALISTIC))
            else:
                channels.append(None)
    return layouts, channels
