"""The 18 hand-crafted augmentations for packet time series.

All operators work on raw-domain :class:`~tcaug.flowdata.FlowTensor` values
and use the class statistics of the sample's label. Amplitude operators touch
one of size/IAT and never the direction row; masking and sequence operators
move or zero whole columns so the three features stay aligned.

Random draws happen in a fixed, documented order per operator (listed in each
docstring). A feature pick, when present, always comes first.

After every operator the size row is re-clipped to ``[0, 1460]`` and the IAT
row to ``[0, max(q_iat_99, max input IAT)]`` (no upper bound when no class
statistics are passed); the upper IAT bound never cuts a
value that was already present in the input, so reordering operators keep
their column multisets intact.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .flowdata import DIR, IAT, MAX_SIZE, SIZE, T, ClassStats, FlowTensor
from .rng import as_generator

__all__ = [
    "Family",
    "Kind",
    "Magnitude",
    "AugmentationSpec",
    "CATALOG",
    "round_half_up",
    "sample_magnitude",
    "apply",
    "apply_pair",
]

ALPHA_EPS = 1e-6
TRANSLATION_STEPS = (0.15, 0.3, 0.5, 0.8)
PERMUTATION_STEPS = (0.15, 0.45, 0.75, 0.9)


class Family(str, enum.Enum):
    AMPLITUDE = "amplitude"
    MASKING = "masking"
    SEQUENCE = "sequence"


class Kind(str, enum.Enum):
    GAUSSIAN_NOISE = "gaussian_noise"
    SPIKE_NOISE = "spike_noise"
    GAUSSIAN_WRAPUP = "gaussian_wrapup"
    SINE_WRAPUP = "sine_wrapup"
    CONSTANT_WRAPUP = "constant_wrapup"
    BERNOULLI_MASK = "bernoulli_mask"
    WINDOW_MASK = "window_mask"
    HORIZONTAL_FLIP = "horizontal_flip"
    INTERPOLATION = "interpolation"
    CUTMIX = "cutmix"
    PACKET_LOSS = "packet_loss"
    TRANSLATION = "translation"
    WRAP = "wrap"
    PERMUTATION = "permutation"
    DUP_RTO = "dup_rto"
    DUP_FAST_RETR = "dup_fast_retr"
    PERM_RTO = "perm_rto"
    PERM_FAST_RETR = "perm_fast_retr"

    @property
    def family(self) -> Family:
        return _FAMILY[self]

    @property
    def pairwise(self) -> bool:
        return self is Kind.CUTMIX

    @property
    def display_name(self) -> str:
        return _DISPLAY[self]


_AMPLITUDE = (Kind.GAUSSIAN_NOISE, Kind.SPIKE_NOISE, Kind.GAUSSIAN_WRAPUP, Kind.SINE_WRAPUP, Kind.CONSTANT_WRAPUP)
_MASKING = (Kind.BERNOULLI_MASK, Kind.WINDOW_MASK)
_FAMILY = {k: Family.AMPLITUDE if k in _AMPLITUDE else Family.MASKING if k in _MASKING else Family.SEQUENCE for k in Kind}
_DISPLAY = {
    Kind.GAUSSIAN_NOISE: "Gaussian Noise",
    Kind.SPIKE_NOISE: "Spike Noise",
    Kind.GAUSSIAN_WRAPUP: "Gaussian WrapUp",
    Kind.SINE_WRAPUP: "Sine WrapUp",
    Kind.CONSTANT_WRAPUP: "Constant WrapUp",
    Kind.BERNOULLI_MASK: "Bernoulli Mask",
    Kind.WINDOW_MASK: "Window Mask",
    Kind.HORIZONTAL_FLIP: "Horizontal Flip",
    Kind.INTERPOLATION: "Interpolation",
    Kind.CUTMIX: "CutMix",
    Kind.PACKET_LOSS: "Packet Loss",
    Kind.TRANSLATION: "Translation",
    Kind.WRAP: "Wrap",
    Kind.PERMUTATION: "Permutation",
    Kind.DUP_RTO: "Dup-RTO",
    Kind.DUP_FAST_RETR: "Dup-FastRetr",
    Kind.PERM_RTO: "Perm-RTO",
    Kind.PERM_FAST_RETR: "Perm-FastRetr",
}

CATALOG = {k.value: k for k in Kind}


@dataclass(frozen=True)
class Magnitude:
    """``Magnitude.fixed(0.5)`` or ``Magnitude.uniform()``."""

    policy: str = "uniform"
    value: float = 0.5

    def __post_init__(self):
        if self.policy not in ("fixed", "uniform"):
            raise ValueError(f"unknown magnitude policy {self.policy!r}")
        if self.policy == "fixed":
            _check_alpha(self.value)

    @classmethod
    def fixed(cls, alpha: float) -> "Magnitude":
        return cls("fixed", float(alpha))

    @classmethod
    def uniform(cls) -> "Magnitude":
        return cls("uniform", 0.5)

    @classmethod
    def parse(cls, spec) -> "Magnitude":
        if isinstance(spec, Magnitude):
            return spec
        if spec in (None, "uniform", "random"):
            return cls.uniform()
        return cls.fixed(float(spec))

    def describe(self) -> str:
        return "uniform" if self.policy == "uniform" else f"{self.value:g}"


@dataclass(frozen=True)
class AugmentationSpec:
    kind: Kind
    magnitude: Magnitude = Magnitude.uniform()

    @classmethod
    def from_name(cls, name: str, magnitude=None) -> "AugmentationSpec":
        try:
            kind = CATALOG[name]
        except KeyError:
            raise ValueError(f"unknown augmentation {name!r}; known: {sorted(CATALOG)}") from None
        return cls(kind, Magnitude.parse(magnitude))

    @property
    def name(self) -> str:
        return self.kind.value


def sample_magnitude(m: Magnitude, rng) -> float:
    """One uniform draw for ``uniform``, clamped into ``(1e-6, 1 - 1e-6)``."""
    if m.policy == "fixed":
        return m.value
    a = float(as_generator(rng).random())
    return min(max(a, ALPHA_EPS), 1.0 - ALPHA_EPS)


def round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"magnitude alpha must lie in (0, 1), got {alpha}")


def _sigma(stats: ClassStats, x: FlowTensor) -> np.ndarray:
    try:
        return stats.per_coord_std[x.label]
    except KeyError:
        raise KeyError(f"no class statistics for label {x.label!r}") from None


def _global_sigma(stats: ClassStats, x: FlowTensor, d: int) -> float:
    try:
        return float(stats.global_std[x.label][d])
    except KeyError:
        raise KeyError(f"no class statistics for label {x.label!r}") from None


def _finish(x: FlowTensor, values: np.ndarray, stats: ClassStats | None, valid_len=None, input_iat_max=None) -> FlowTensor:
    values[SIZE] = np.clip(values[SIZE], 0.0, MAX_SIZE)
    iat_hi = np.inf
    if stats is not None:
        if input_iat_max is None:
            input_iat_max = float(x.values[IAT].max())
        iat_hi = max(input_iat_max, stats.q_iat_99)
    values[IAT] = np.clip(values[IAT], 0.0, iat_hi)
    if valid_len is None:
        valid_len = x.valid_len
    return x.replace(values=values, valid_len=int(min(max(valid_len, 1), T)))


def _content_len(values: np.ndarray) -> int:
    """1 + index of the last column holding a non-zero entry."""
    nz = np.flatnonzero(np.any(values != 0.0, axis=0))
    return int(nz[-1]) + 1 if nz.size else 1


def _pick_feature(rng) -> int:
    return (SIZE, IAT)[int(rng.integers(2))]


# --- amplitude ----------------------------------------------------------------


def gaussian_noise(x: FlowTensor, alpha: float, stats: ClassStats, rng) -> FlowTensor:
    """Additive noise on size or IAT.

    Draws: feature (``integers(2)``: 0=size, 1=iat), then ``standard_normal(T)``;
    ``x'[d, t] = x[d, t] + sqrt(alpha) * sigma[d, t] * z[t]``.
    """
    _check_alpha(alpha)
    rng = as_generator(rng)
    d = _pick_feature(rng)
    z = rng.standard_normal(T)
    v = x.values.copy()
    v[d] = v[d] + math.sqrt(alpha) * _sigma(stats, x)[d] * z
    return _finish(x, v, stats)


def spike_noise(x: FlowTensor, alpha: float, stats: ClassStats, rng) -> FlowTensor:
    """Positive spikes on up to three non-zero entries of size or IAT.

    Draws: feature, ``k = integers(1, 4)``, ``choice(nonzero, min(k, n_nonzero),
    replace=False)``, ``standard_normal(k)``. An all-zero row is returned as is.
    """
    _check_alpha(alpha)
    rng = as_generator(rng)
    d = _pick_feature(rng)
    nonzero = np.flatnonzero(x.values[d] != 0.0)
    if nonzero.size == 0:
        return x.replace(values=x.values.copy())
    k = min(int(rng.integers(1, 4)), nonzero.size)
    pos = rng.choice(nonzero, k, replace=False)
    z = rng.standard_normal(k)
    v = x.values.copy()
    v[d, pos] += np.abs(math.sqrt(alpha) * _sigma(stats, x)[d, pos] * z)
    return _finish(x, v, stats)


def gaussian_wrapup(x: FlowTensor, alpha: float, stats: ClassStats, rng) -> FlowTensor:
    """Multiplicative Gaussian jitter with mean ``1 + 0.01 alpha``.

    Draws: feature, ``standard_normal(T)``; variance ``0.02 alpha sigma[d, t]^2``.
    """
    _check_alpha(alpha)
    rng = as_generator(rng)
    d = _pick_feature(rng)
    z = rng.standard_normal(T)
    eps = (1.0 + 0.01 * alpha) + math.sqrt(0.02 * alpha) * _sigma(stats, x)[d] * z
    v = x.values.copy()
    v[d] = v[d] * eps
    return _finish(x, v, stats)


def sine_wrapup(x: FlowTensor, alpha: float, stats: ClassStats, rng) -> FlowTensor:
    """Multiplicative sinusoid ``1 + 0.02 alpha sbar sin(4 pi i / T + theta)``.

    Draws: feature, ``theta = uniform(0, 2 pi)``. ``sbar`` is the class global
    std of the chosen feature.
    """
    _check_alpha(alpha)
    rng = as_generator(rng)
    d = _pick_feature(rng)
    theta = rng.uniform(0.0, 2.0 * math.pi)
    i = np.arange(T)
    eps = 1.0 + 0.02 * alpha * _global_sigma(stats, x, d) * np.sin(4.0 * math.pi * i / T + theta)
    v = x.values.copy()
    v[d] = v[d] * eps
    return _finish(x, v, stats)


def constant_wrapup_bounds(alpha: float, sbar: float) -> tuple[float, float]:
    return 1.0 + sbar * (0.06 - 0.02 * alpha), 1.0 + sbar * (0.14 + 0.02 * alpha)


def constant_wrapup(x: FlowTensor, alpha: float, stats: ClassStats, rng) -> FlowTensor:
    """Scale the whole IAT row by one ``uniform(a, b)`` factor (single draw)."""
    _check_alpha(alpha)
    rng = as_generator(rng)
    a, b = constant_wrapup_bounds(alpha, _global_sigma(stats, x, IAT))
    eps = rng.uniform(a, b)
    v = x.values.copy()
    v[IAT] = v[IAT] * eps
    return _finish(x, v, stats)


# --- masking ------------------------------------------------------------------


def bernoulli_mask(x: FlowTensor, alpha: float, rng, stats: ClassStats | None = None) -> FlowTensor:
    """Zero each coordinate independently with probability ``0.6 alpha``.

    Draws: ``random((3, T))``; coordinate masked when its draw is ``< 0.6 alpha``.
    """
    _check_alpha(alpha)
    rng = as_generator(rng)
    mask = rng.random(x.values.shape) < 0.6 * alpha
    v = x.values.copy()
    v[mask] = 0.0
    return _finish(x, v, stats)


def window_mask_width(alpha: float) -> int:
    return round_half_up(1.0 + 2.5 * alpha)


def window_mask(x: FlowTensor, alpha: float, rng, stats: ClassStats | None = None) -> FlowTensor:
    """Zero a window of ``w`` consecutive columns across all features.

    Draws: ``w = integers(1, W + 1)`` with ``W = round(1 + 2.5 alpha)`` (half
    up), then start ``t = integers(0, T - w + 1)``.
    """
    _check_alpha(alpha)
    rng = as_generator(rng)
    w = int(rng.integers(1, window_mask_width(alpha) + 1))
    t = int(rng.integers(0, T - w + 1))
    v = x.values.copy()
    v[:, t : t + w] = 0.0
    return _finish(x, v, stats)


# --- sequence -----------------------------------------------------------------


def horizontal_flip(x: FlowTensor, stats: ClassStats | None = None) -> FlowTensor:
    """Reverse all rows over the full ``T`` columns. No draws."""
    return _finish(x, x.values[:, ::-1].copy(), stats)


def densify(values: np.ndarray) -> np.ndarray:
    """Insert the mean of each adjacent column pair: ``(D, T) -> (D, 2T - 1)``."""
    dense = np.empty((values.shape[0], 2 * values.shape[1] - 1))
    dense[:, 0::2] = values
    dense[:, 1::2] = 0.5 * (values[:, :-1] + values[:, 1:])
    return dense


def interpolation(x: FlowTensor, rng, stats: ClassStats | None = None, start: int | None = None) -> FlowTensor:
    """Densify then read ``T`` consecutive columns from ``start``.

    Draws: ``start = integers(0, T)`` unless given explicitly.
    """
    if start is None:
        start = int(as_generator(rng).integers(0, T))
    if not 0 <= start <= T - 1:
        raise ValueError(f"interpolation start {start} outside [0, {T - 1}]")
    v = densify(x.values)[:, start : start + T].copy()
    return _finish(x, v, stats, _content_len(v))


def cutmix(x1: FlowTensor, x2: FlowTensor, rng, stats: ClassStats | None = None):
    """Swap one segment of columns between two samples; labels stay hard.

    Draws: ``w = integers(0, T)``, then ``t = integers(0, T - w)``.
    """
    if x1 is x2:
        raise ValueError("cutmix needs two distinct samples")
    rng = as_generator(rng)
    w = int(rng.integers(0, T))
    t = int(rng.integers(0, T - w))
    return cutmix_segment(x1, x2, t, w, stats)


def cutmix_segment(x1, x2, t: int, w: int, stats=None):
    v1, v2 = x1.values.copy(), x2.values.copy()
    v1[:, t : t + w], v2[:, t : t + w] = x2.values[:, t : t + w], x1.values[:, t : t + w]
    # both outputs may hold IATs of either input, so neither is cut below the pair's max
    hi = max(float(x1.values[IAT].max()), float(x2.values[IAT].max()))
    return _finish(x1, v1, stats, _content_len(v1), hi), _finish(x2, v2, stats, _content_len(v2), hi)


def packet_loss_halfwidth(alpha: float) -> float:
    return 10.0 * alpha + 5.0


def packet_loss(x: FlowTensor, alpha: float, rng, stats: ClassStats | None = None, delta: float | None = None) -> FlowTensor:
    """Drop packets whose arrival time falls in ``delta +/- (10 alpha + 5)``.

    Arrival times are the cumulative IATs of the valid packets; ``delta`` is
    drawn as ``uniform(0, time of the last valid packet)``. IATs of survivors
    are recomputed from their arrival times (the first survivor gets 0). If
    nothing survives, the first packet is kept. Flows shorter than 2 packets
    are returned unchanged (no draw).
    """
    _check_alpha(alpha)
    n = x.valid_len
    if n < 2:
        return _finish(x, x.values.copy(), stats)
    arrival = np.cumsum(x.values[IAT, :n])
    if delta is None:
        delta = float(as_generator(rng).uniform(0.0, arrival[-1]))
    h = packet_loss_halfwidth(alpha)
    keep = np.flatnonzero((arrival < delta - h) | (arrival > delta + h))
    if keep.size == 0:
        keep = np.array([0])
    v = np.zeros_like(x.values)
    m = keep.size
    v[:, :m] = x.values[:, keep]
    v[IAT, :m] = np.diff(arrival[keep], prepend=arrival[keep[0]])
    return _finish(x, v, stats, m)


def _argmax_steps(alpha: float, steps) -> int:
    qualifying = [i for i, a in enumerate(steps) if a <= alpha]
    return max(qualifying) if qualifying else 0


def translation_max_shift(alpha: float) -> int:
    return 1 + _argmax_steps(alpha, TRANSLATION_STEPS)


def translate(values: np.ndarray, t: int, n: int, right: bool) -> np.ndarray:
    out = values.copy()
    if right:
        out[:, t:] = np.concatenate([np.repeat(values[:, t : t + 1], n, axis=1), values[:, t:]], axis=1)[:, : T - t]
    else:
        tail = values[:, t + n :]
        out[:, t:] = 0.0
        out[:, t : t + tail.shape[1]] = tail
    return out


def translation(x: FlowTensor, alpha: float, rng, stats: ClassStats | None = None) -> FlowTensor:
    """Shift columns from ``t`` by ``n`` steps left (zero fill) or right.

    Draws: ``n = integers(1, N + 1)``, direction ``integers(2)`` (0=left,
    1=right), ``t = integers(0, T)``. A right shift fills positions
    ``t..t+n-1`` with column ``t``.
    """
    _check_alpha(alpha)
    rng = as_generator(rng)
    n = int(rng.integers(1, translation_max_shift(alpha) + 1))
    right = bool(rng.integers(2))
    t = int(rng.integers(0, T))
    v = translate(x.values, t, n, right)
    return _finish(x, v, stats, _content_len(v))


def wrap(x: FlowTensor, alpha: float, rng, stats: ClassStats | None = None) -> FlowTensor:
    """Per column: keep, keep plus the mean with the next column, or discard.

    Draws: ``u = random(T)`` up front; column ``t`` is kept when
    ``u[t] < 1 - alpha``, interpolated when ``u[t] < 1 - alpha/2``, discarded
    otherwise. The last column has no right neighbour and is only kept.
    Output stops at ``T`` columns; missing columns are zero padded.
    """
    _check_alpha(alpha)
    rng = as_generator(rng)
    u = rng.random(T)
    cols = []
    src = x.values
    for t in range(T):
        if len(cols) >= T:
            break
        if u[t] < 1.0 - alpha:
            cols.append(src[:, t])
        elif u[t] < 1.0 - 0.5 * alpha:
            cols.append(src[:, t])
            if t + 1 < T:
                cols.append(0.5 * (src[:, t] + src[:, t + 1]))
    v = np.zeros_like(src)
    if cols:
        v[:, : min(len(cols), T)] = np.stack(cols[:T], axis=1)
    return _finish(x, v, stats, _content_len(v))


def permutation_max_segments(alpha: float) -> int:
    return 2 + _argmax_steps(alpha, PERMUTATION_STEPS)


def permute_segments(values: np.ndarray, cuts, order) -> np.ndarray:
    """Reorder the segments delimited by ``cuts`` (sorted start indices)."""
    bounds = [0, *(int(c) for c in cuts), values.shape[1]]
    segments = [np.arange(bounds[i], bounds[i + 1]) for i in range(len(bounds) - 1)]
    idx = np.concatenate([segments[i] for i in order])
    return values[:, idx]


def permutation(x: FlowTensor, alpha: float, rng, stats: ClassStats | None = None) -> FlowTensor:
    """Split ``[0, T)`` into ``n`` random segments and shuffle them.

    Draws: ``n = integers(2, N + 1)``, cut points ``choice(arange(1, T), n - 1,
    replace=False)`` (sorted), segment order ``permutation(n)``.
    """
    _check_alpha(alpha)
    rng = as_generator(rng)
    n = int(rng.integers(2, permutation_max_segments(alpha) + 1))
    cuts = np.sort(rng.choice(np.arange(1, T), n - 1, replace=False))
    order = rng.permutation(n)
    v = permute_segments(x.values, cuts, order).copy()
    return _finish(x, v, stats, _content_len(v))


_TCP_KINDS = (Kind.DUP_RTO, Kind.DUP_FAST_RETR, Kind.PERM_RTO, Kind.PERM_FAST_RETR)


def tcp_retrans_order(valid_len: int, alpha: float, kind: Kind, rng) -> list[int]:
    """Column index sequence produced by a TCP retransmission operator.

    Scans position ``i`` over the (growing) index list while ``i`` is inside
    it. Draws at each visited position: ``random() < 0.1 alpha``; when it
    fires, RTO kinds draw a range length ``r = integers(1, 4)`` and Perm kinds
    then draw a delay ``u = integers(1, 4)``. Dup inserts a copy of the range
    right after it; Perm moves the range ``u`` positions later. Scanning
    resumes after the affected block.
    """
    idx = list(range(valid_len))
    rto = kind in (Kind.DUP_RTO, Kind.PERM_RTO)
    dup = kind in (Kind.DUP_RTO, Kind.DUP_FAST_RETR)
    p = 0.1 * alpha
    i = 0
    while i < len(idx):
        if rng.random() >= p:
            i += 1
            continue
        r = int(rng.integers(1, 4)) if rto else 1
        r = min(r, len(idx) - i)
        block = idx[i : i + r]
        if dup:
            idx = idx[: i + r] + block + idx[i + r :]
            i += 2 * r
        else:
            u = int(rng.integers(1, 4))
            after = idx[i + r : i + r + u]
            idx = idx[:i] + after + block + idx[i + r + len(after) :]
            i += r + len(after)
    return idx


def tcp_retrans(x: FlowTensor, alpha: float, kind, rng, stats: ClassStats | None = None) -> FlowTensor:
    kind = Kind(kind)
    if kind not in _TCP_KINDS:
        raise ValueError(f"{kind} is not a TCP retransmission operator")
    _check_alpha(alpha)
    idx = tcp_retrans_order(x.valid_len, alpha, kind, as_generator(rng))[:T]
    v = np.zeros_like(x.values)
    v[:, : len(idx)] = x.values[:, idx]
    return _finish(x, v, stats, len(idx))


# --- dispatch -----------------------------------------------------------------


def apply(kind, x: FlowTensor, alpha: float, stats: ClassStats, rng) -> FlowTensor:
    """Apply a single-sample operator. CutMix must go through :func:`apply_pair`."""
    kind = Kind(kind)
    rng = as_generator(rng)
    if kind is Kind.GAUSSIAN_NOISE:
        return gaussian_noise(x, alpha, stats, rng)
    if kind is Kind.SPIKE_NOISE:
        return spike_noise(x, alpha, stats, rng)
    if kind is Kind.GAUSSIAN_WRAPUP:
        return gaussian_wrapup(x, alpha, stats, rng)
    if kind is Kind.SINE_WRAPUP:
        return sine_wrapup(x, alpha, stats, rng)
    if kind is Kind.CONSTANT_WRAPUP:
        return constant_wrapup(x, alpha, stats, rng)
    if kind is Kind.BERNOULLI_MASK:
        return bernoulli_mask(x, alpha, rng, stats)
    if kind is Kind.WINDOW_MASK:
        return window_mask(x, alpha, rng, stats)
    if kind is Kind.HORIZONTAL_FLIP:
        _check_alpha(alpha)
        return horizontal_flip(x, stats)
    if kind is Kind.INTERPOLATION:
        _check_alpha(alpha)
        return interpolation(x, rng, stats)
    if kind is Kind.PACKET_LOSS:
        return packet_loss(x, alpha, rng, stats)
    if kind is Kind.TRANSLATION:
        return translation(x, alpha, rng, stats)
    if kind is Kind.WRAP:
        return wrap(x, alpha, rng, stats)
    if kind is Kind.PERMUTATION:
        return permutation(x, alpha, rng, stats)
    if kind in _TCP_KINDS:
        return tcp_retrans(x, alpha, kind, rng, stats)
    raise ValueError(f"{kind.value} needs a partner sample; use apply_pair")


def apply_pair(kind, x1: FlowTensor, x2: FlowTensor, alpha: float, stats: ClassStats, rng):
    kind = Kind(kind)
    if kind is not Kind.CUTMIX:
        raise ValueError(f"{kind.value} is not a pairwise operator")
    _check_alpha(alpha)
    return cutmix(x1, x2, rng, stats)
