"""Skew products over a subshift with affine contracting fiber maps.

The fiber dynamics on [0, 1] is driven by the first symbols of the base
point: branch i acts by y -> a_i y + b_i, optionally corrected by an
additive offset read from the first ``offset_depth`` symbols.  Depth 1
reproduces plain iterated function systems (whose invariant measure is a
product); deeper offset tables couple the fiber to the base and produce
genuinely non-product invariant measures.
"""

from __future__ import annotations

import numpy as np

from .measures import AffineMap
from .symbolic import (
    BaseWeights,
    CylinderFunction,
    TransitionMatrix,
    check_theta,
    jacobian_weight,
    word_distance,
)

__all__ = [
    "FiberMapSpec",
    "SystemSpec",
    "OrbitSample",
    "verify_G1",
    "estimate_H",
    "c1_constant",
    "sample_orbit",
    "sample_orbits",
    "iterate_fiber",
]

_RANGE_TOL = 1e-12


class FiberMapSpec:
    """Affine fiber branch with optional word-indexed offset corrections."""

    def __init__(self, slope, offset, offset_table=None):
        self.slope = float(slope)
        self.offset = float(offset)
        self.offset_table = {tuple(k): float(v) for k, v in (offset_table or {}).items()}

    def correction(self, key):
        return self.offset_table.get(key, 0.0)

    def __repr__(self):
        extra = f", table={self.offset_table}" if self.offset_table else ""
        return f"FiberMapSpec(a={self.slope!r}, b={self.offset!r}{extra})"


class SystemSpec:
    """Complete skew product: base matrix, metric parameter, weights, fiber maps."""

    def __init__(self, matrix, theta, weights, fiber_maps, offset_depth=1):
        if not isinstance(matrix, TransitionMatrix):
            matrix = TransitionMatrix(matrix)
        self.matrix = matrix
        self.theta = check_theta(theta)
        if not isinstance(weights, BaseWeights):
            raise TypeError("weights must be a BaseWeights instance")
        if weights.n_symbols != matrix.n_symbols:
            raise ValueError("weights and transition matrix disagree on the alphabet size")
        if not weights.compatible_with(matrix):
            raise ValueError("base measure must charge exactly the admissible transitions")
        self.weights = weights
        if len(fiber_maps) != matrix.n_symbols:
            raise ValueError("need one fiber map per symbol")
        self.fiber_maps = list(fiber_maps)
        if offset_depth < 1:
            raise ValueError("offset depth must be at least 1")
        self.offset_depth = int(offset_depth)
        self._validate_offset_tables()
        self.alpha = verify_G1(self)
        self._validate_range()
        self._code_tables = None

    @property
    def n_symbols(self):
        return self.matrix.n_symbols

    def _validate_offset_tables(self):
        d = self.offset_depth
        for i, fm in enumerate(self.fiber_maps):
            for key in fm.offset_table:
                if len(key) != d:
                    raise ValueError(f"offset key {key} for symbol {i} must have depth {d}")
                if key[0] != i:
                    raise ValueError(f"offset key {key} must start with its own symbol {i}")

    def _validate_range(self):
        for word in self.matrix.words(self.offset_depth):
            t = self.branch_map(word)
            lo, hi = sorted((t.b, t.a + t.b))
            if lo < -_RANGE_TOL or hi > 1.0 + _RANGE_TOL:
                raise ValueError(
                    f"fiber map on cylinder {word} maps [0,1] to [{lo:.6g}, {hi:.6g}], "
                    "outside the unit interval"
                )

    def branch_map(self, source_word):
        """Affine fiber map attached to the cylinder of ``source_word``.

        The branch symbol is the word's first entry; the offset correction is
        read from the depth-``offset_depth`` prefix, extended by the
        lexicographically smallest admissible tail when the word is shorter.
        """
        i = source_word[0]
        fm = self.fiber_maps[i]
        d = self.offset_depth
        key = tuple(source_word[:d])
        if len(key) < d:
            key = key + self.matrix.smallest_tail(key[-1], d - len(key))
        return AffineMap(fm.slope, fm.offset + fm.correction(key))

    def fiber_value(self, word, y):
        """Fiber coordinate of F on the cylinder of ``word``."""
        return self.branch_map(word)(y)

    def code_tables(self):
        """Slope/offset lookups indexed by the encoded depth-d symbol window."""
        if self._code_tables is None:
            d = self.offset_depth
            n = self.n_symbols
            slopes = np.zeros(n**d)
            offsets = np.zeros(n**d)
            for word in self.matrix.words(d):
                code = 0
                for s in word:
                    code = code * n + s
                t = self.branch_map(word)
                slopes[code] = t.a
                offsets[code] = t.b
            self._code_tables = (slopes, offsets)
        return self._code_tables

    def __repr__(self):
        return (
            f"SystemSpec(N={self.n_symbols}, theta={self.theta!r}, "
            f"{self.weights.kind}, depth={self.offset_depth})"
        )


def verify_G1(sys):
    """Contraction rate of the fiber lamination; error if some branch expands."""
    alpha = 0.0
    for i, fm in enumerate(sys.fiber_maps):
        if abs(fm.slope) >= 1.0:
            raise ValueError(f"fiber map for symbol {i} has |slope| = {abs(fm.slope)} >= 1")
        alpha = max(alpha, abs(fm.slope))
    return alpha


def estimate_H(sys, y_points=5):
    """Lipschitz constant of the fiber map in the base coordinate.

    Maximizes |G(u, y) - G(v, y)| / d_theta(u, v) over pairs of admissible
    depth-d words and a fixed y grid.  Exact for affine branches since the
    difference is affine in y and the grid contains both endpoints.
    """
    d = sys.offset_depth
    words = sys.matrix.words(d)
    ys = np.linspace(0.0, 1.0, y_points)
    best = 0.0
    for a in range(len(words)):
        for b in range(a + 1, len(words)):
            dist = word_distance(words[a], words[b], sys.theta)
            ta, tb = sys.branch_map(words[a]), sys.branch_map(words[b])
            gap = np.abs((ta.a - tb.a) * ys + (ta.b - tb.b)).max()
            best = max(best, gap / dist)
    return float(best)


def c1_constant(sys):
    """Regularity constant max{H theta + theta N |g|_theta, 2}.

    |g|_theta is the Lipschitz constant of the branch weight g(i.x) seen as
    a cylinder function; the weight depends on at most the first two
    symbols, so depth 2 already realizes the supremum.
    """
    h = estimate_H(sys)
    vals = [jacobian_weight(sys.weights, w[0], w[1:]) for w in sys.matrix.words(2)]
    g_lip = CylinderFunction(sys.matrix, 2, vals).lipschitz(sys.theta)
    return max(h * sys.theta + sys.theta * sys.n_symbols * g_lip, 2.0)


# ---------------------------------------------------------------------------
# orbit sampling
# ---------------------------------------------------------------------------


class OrbitSample:
    """Realized orbit: symbol track plus the fiber coordinate at each step.

    ``symbols`` carries ``length + window - 1`` entries so that a depth-k
    observable (k <= window) can be evaluated at every one of the ``length``
    recorded fiber states via ``symbols[t:t+k]``.
    """

    __slots__ = ("symbols", "ys", "window")

    def __init__(self, symbols, ys, window):
        self.symbols = symbols
        self.ys = ys
        self.window = window


def _symbol_track(weights, uniforms):
    """Map i.i.d. uniforms to a stationary symbol sequence by inverse CDF."""
    top = weights.n_symbols - 1
    if weights.kind == "bernoulli":
        cum = np.cumsum(weights.p)
        idx = np.searchsorted(cum, uniforms, side="right")
        return np.minimum(idx, top).astype(np.int64)
    cum_rows = np.cumsum(weights.transition, axis=1)
    cum_pi = np.cumsum(weights.stationary)
    out = np.empty(uniforms.shape[0], dtype=np.int64)
    out[0] = min(np.searchsorted(cum_pi, uniforms[0], side="right"), top)
    for t in range(1, uniforms.shape[0]):
        out[t] = min(np.searchsorted(cum_rows[out[t - 1]], uniforms[t], side="right"), top)
    return out


def iterate_fiber(sys, symbols, y0):
    """Deterministic fiber evolution below a fixed symbol track.

    Returns the y values before each application, one per usable step.
    """
    d = sys.offset_depth
    steps = len(symbols) - d + 1
    ys = np.empty(steps)
    y = float(y0)
    for t in range(steps):
        ys[t] = y
        y = sys.branch_map(tuple(symbols[t:t + d]))(y)
    return ys


def sample_orbit(sys, seed, length, burn_in=40, window=1):
    """Sample one orbit of the skew product, stationary up to alpha^burn_in.

    The symbol track starts from the stationary base law; the fiber
    coordinate is initialized by running ``burn_in`` extra fiber maps before
    recording, so the recorded fiber states are within alpha^burn_in of the
    invariant law in the dual metric.  Deterministic given the seed.
    """
    if length < 1:
        raise ValueError("length must be positive")
    if burn_in < 0:
        raise ValueError("burn_in must be nonnegative")
    window = max(int(window), sys.offset_depth)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    total = burn_in + length + window - 1
    symbols = _symbol_track(sys.weights, rng.random(total))
    ys = iterate_fiber(sys, symbols, 0.5)[burn_in:burn_in + length]
    return OrbitSample(symbols[burn_in:], ys, window)


def sample_orbits(sys, seed, length, trials, burn_in=40, window=1):
    """Sample many independent orbits with per-trial derived seeds.

    Trial t uses the spawn key (t,) of the root seed sequence, so results do
    not depend on batching or evaluation order.  The fiber recursion runs
    vectorized across trials.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    window = max(int(window), sys.offset_depth)
    total = burn_in + length + window - 1
    root = np.random.SeedSequence(seed)
    tracks = np.empty((trials, total), dtype=np.int64)
    for t in range(trials):
        child = np.random.SeedSequence(entropy=root.entropy, spawn_key=(t,))
        tracks[t] = _symbol_track(sys.weights, np.random.default_rng(child).random(total))
    slopes, offsets = sys.code_tables()
    d = sys.offset_depth
    n = sys.n_symbols
    codes = tracks[:, : total - d + 1].copy()
    for j in range(1, d):
        codes = codes * n + tracks[:, j: total - d + 1 + j]
    y = np.full(trials, 0.5)
    ys = np.empty((trials, length))
    for t in range(burn_in + length):
        if t >= burn_in:
            ys[:, t - burn_in] = y
        c = codes[:, t]
        y = slopes[c] * y + offsets[c]
    return [OrbitSample(tracks[t, burn_in:], ys[t], window) for t in range(trials)]
