"""Subshift of finite type: words, metric, base measures, Ruelle operator.

Points of the shift space are represented at a finite working depth by the
admissible words of that length; all quantities handled here are constant
on cylinders of the working depth.  The base distance between two cylinders
is the prefix sum of theta^i over disagreeing coordinates, which is the
infimum of the sequence metric over the two cylinders whenever a common
admissible tail exists (always on the full shift) and a lower bound
otherwise, so Lipschitz constants estimated against it are conservative
upper estimates.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "TransitionMatrix",
    "BaseWeights",
    "CylinderFunction",
    "check_theta",
    "enumerate_words",
    "word_distance",
    "word_tail_diameter",
    "cylinder_mass",
    "jacobian_weight",
    "ruelle_apply",
    "base_gap_estimate",
    "base_correlation",
]

_STOCHASTIC_TOL = 1e-12


def check_theta(theta):
    theta = float(theta)
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    return theta


class TransitionMatrix:
    """Aperiodic 0/1 transition matrix over symbols 0..N-1."""

    def __init__(self, entries):
        a = np.asarray(entries, dtype=int)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("transition matrix must be square")
        if not np.isin(a, (0, 1)).all():
            raise ValueError("transition matrix entries must be 0 or 1")
        if (a.sum(axis=1) == 0).any() or (a.sum(axis=0) == 0).any():
            raise ValueError("every row and column needs at least one admissible transition")
        if not _is_primitive(a):
            raise ValueError("transition matrix must be aperiodic (some power strictly positive)")
        self.entries = a
        self.n_symbols = a.shape[0]
        self._word_cache = {}

    def admissible(self, i, j):
        return bool(self.entries[i, j])

    def is_full(self):
        return bool((self.entries == 1).all())

    def words(self, depth):
        """All admissible words of the given depth, lexicographically sorted."""
        if depth not in self._word_cache:
            self._word_cache[depth] = tuple(enumerate_words(self, depth))
        return self._word_cache[depth]

    def word_index(self, depth):
        """Word -> position in ``words(depth)``."""
        key = ("index", depth)
        if key not in self._word_cache:
            self._word_cache[key] = {w: i for i, w in enumerate(self.words(depth))}
        return self._word_cache[key]

    def word_count(self, depth):
        return len(self.words(depth))

    def smallest_tail(self, symbol, length):
        """Lexicographically smallest admissible continuation after ``symbol``."""
        tail = []
        cur = symbol
        for _ in range(length):
            nxt = int(np.flatnonzero(self.entries[cur])[0])
            tail.append(nxt)
            cur = nxt
        return tuple(tail)

    def __eq__(self, other):
        return isinstance(other, TransitionMatrix) and np.array_equal(self.entries, other.entries)

    def __repr__(self):
        return f"TransitionMatrix({self.entries.tolist()})"


def _is_primitive(a):
    # Wielandt: a primitive matrix has a strictly positive power by exponent (N-1)^2 + 1
    n = a.shape[0]
    reach = a > 0
    step = a > 0
    for _ in range((n - 1) ** 2 + 1):
        if reach.all():
            return True
        reach = reach @ step
    return bool(reach.all())


class BaseWeights:
    """Shift-invariant base measure: Bernoulli vector or stationary Markov pair."""

    def __init__(self, kind, p=None, transition=None, stationary=None):
        if kind not in ("bernoulli", "markov"):
            raise ValueError(f"unknown base measure kind {kind!r}")
        self.kind = kind
        if kind == "bernoulli":
            p = np.asarray(p, dtype=float)
            if (p <= 0).any():
                raise ValueError("Bernoulli weights must be positive")
            if abs(p.sum() - 1.0) > _STOCHASTIC_TOL:
                raise ValueError("Bernoulli weights must sum to 1")
            self.p = p
            self.transition = None
            self.stationary = None
            self.n_symbols = p.size
        else:
            tm = np.asarray(transition, dtype=float)
            if tm.ndim != 2 or tm.shape[0] != tm.shape[1]:
                raise ValueError("Markov transition matrix must be square")
            if (tm < 0).any():
                raise ValueError("Markov transition probabilities must be nonnegative")
            if np.abs(tm.sum(axis=1) - 1.0).max() > _STOCHASTIC_TOL:
                raise ValueError("Markov transition rows must sum to 1")
            if stationary is None:
                stationary = _stationary_vector(tm)
            pi = np.asarray(stationary, dtype=float)
            if (pi <= 0).any() or abs(pi.sum() - 1.0) > _STOCHASTIC_TOL:
                raise ValueError("stationary vector must be positive and sum to 1")
            if np.abs(pi @ tm - pi).max() > _STOCHASTIC_TOL:
                raise ValueError("stationary vector must satisfy pi P = pi")
            self.p = None
            self.transition = tm
            self.stationary = pi
            self.n_symbols = tm.shape[0]

    @classmethod
    def bernoulli(cls, p):
        return cls("bernoulli", p=p)

    @classmethod
    def markov(cls, transition, stationary=None):
        return cls("markov", transition=transition, stationary=stationary)

    def compatible_with(self, matrix):
        """True if the measure is supported exactly on the admissible transitions."""
        if self.kind == "bernoulli":
            return matrix.is_full()
        return bool(((self.transition > 0) == (matrix.entries > 0)).all())

    def __repr__(self):
        if self.kind == "bernoulli":
            return f"BaseWeights.bernoulli({self.p.tolist()})"
        return f"BaseWeights.markov({self.transition.tolist()})"


def _stationary_vector(tm):
    vals, vecs = np.linalg.eig(tm.T)
    i = int(np.argmin(np.abs(vals - 1.0)))
    v = np.real(vecs[:, i])
    v = np.abs(v)
    return v / v.sum()


# ---------------------------------------------------------------------------
# words and the base metric
# ---------------------------------------------------------------------------


def enumerate_words(matrix, depth):
    """Admissible words of a given depth in lexicographic order.

    Depth 0 yields the single empty word (the whole space, mass 1).
    """
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    if depth == 0:
        return [()]
    words = [(i,) for i in range(matrix.n_symbols)]
    for _ in range(depth - 1):
        words = [w + (j,) for w in words for j in range(matrix.n_symbols) if matrix.entries[w[-1], j]]
    return words


def word_distance(w1, w2, theta):
    """Prefix-sum base distance: sum of theta^i over disagreeing coordinates."""
    if len(w1) != len(w2):
        raise ValueError("words must have equal depth")
    theta = check_theta(theta)
    return float(sum(theta**i for i, (a, b) in enumerate(zip(w1, w2)) if a != b))


def word_tail_diameter(depth, theta):
    """Diameter bound theta^depth / (1 - theta) for points sharing a depth-prefix."""
    if depth < 1:
        raise ValueError("depth must be positive")
    theta = check_theta(theta)
    return theta**depth / (1.0 - theta)


def cylinder_mass(weights, word):
    """Base measure of the cylinder given by a word; empty word has mass 1."""
    if len(word) == 0:
        return 1.0
    if weights.kind == "bernoulli":
        return float(np.prod(weights.p[list(word)]))
    mass = weights.stationary[word[0]]
    for a, b in zip(word[:-1], word[1:]):
        step = weights.transition[a, b]
        if step == 0.0:
            raise ValueError(f"word {word} is not admissible for the base measure")
        mass *= step
    return float(mass)


def jacobian_weight(weights, symbol, word):
    """Weight g(i.word) = 1/J of the branch prepending ``symbol`` to ``word``.

    Returns 0 for an inadmissible transition so that inadmissible branches
    drop out of transfer-operator sums.  Admissible weights for a fixed
    target word sum to 1, which is exactly invariance of the base measure.
    """
    if weights.kind == "bernoulli":
        return float(weights.p[symbol])
    if len(word) == 0:
        raise ValueError("Markov jacobian weight needs a nonempty target word")
    step = weights.transition[symbol, word[0]]
    if step == 0.0:
        return 0.0
    return float(weights.stationary[symbol] * step / weights.stationary[word[0]])


# ---------------------------------------------------------------------------
# cylinder functions
# ---------------------------------------------------------------------------


class CylinderFunction:
    """Real function constant on cylinders of a fixed depth."""

    def __init__(self, matrix, depth, values):
        values = np.asarray(values, dtype=float)
        words = matrix.words(depth)
        if values.shape != (len(words),):
            raise ValueError(f"expected {len(words)} values for depth {depth}, got {values.shape}")
        self.matrix = matrix
        self.depth = depth
        self.values = values

    @classmethod
    def constant(cls, matrix, depth, c):
        return cls(matrix, depth, np.full(matrix.word_count(depth), float(c)))

    @classmethod
    def from_dict(cls, matrix, depth, mapping, default=0.0):
        vals = [float(mapping.get(w, default)) for w in matrix.words(depth)]
        return cls(matrix, depth, vals)

    def value(self, word):
        return float(self.values[self.matrix.word_index(self.depth)[word]])

    def mean(self, weights):
        masses = cylinder_mass_vector(weights, self.matrix, self.depth)
        return float(np.dot(masses, self.values))

    def sup_norm(self):
        return float(np.abs(self.values).max()) if self.values.size else 0.0

    def lipschitz(self, theta):
        """Largest |f(w1)-f(w2)| / base distance over admissible word pairs."""
        words = self.matrix.words(self.depth)
        if len(words) < 2:
            return 0.0
        arr = np.asarray(words)
        pow_theta = check_theta(theta) ** np.arange(self.depth)
        best = 0.0
        block = max(1, 2_000_000 // (len(words) * max(self.depth, 1)))
        for start in range(0, len(words), block):
            stop = min(start + block, len(words))
            diff = arr[start:stop, None, :] != arr[None, :, :]
            dist = diff @ pow_theta
            gap = np.abs(self.values[start:stop, None] - self.values[None, :])
            mask = dist > 0
            if mask.any():
                best = max(best, float((gap[mask] / dist[mask]).max()))
        return best

    def norm_theta(self, theta):
        return self.sup_norm() + self.lipschitz(theta)

    def shifted(self, c):
        return CylinderFunction(self.matrix, self.depth, self.values + c)

    def __repr__(self):
        return f"CylinderFunction(depth={self.depth}, {self.values.size} values)"


def cylinder_mass_vector(weights, matrix, depth):
    return np.array([cylinder_mass(weights, w) for w in matrix.words(depth)])


def ruelle_apply(f, weights):
    """One step of the normalized transfer operator on a cylinder function.

    (Pf)(word) = sum over admissible symbols i of g(i.word) f(i.word[:-1]).
    The result is again stored at the same depth but is constant on cylinders
    one level shorter; the operator is exact on functions constant on
    cylinders of the stored depth.
    """
    matrix = f.matrix
    if f.depth < 1:
        raise ValueError("ruelle_apply needs depth at least 1")
    words = matrix.words(f.depth)
    index = matrix.word_index(f.depth)
    out = np.zeros(len(words))
    for k, w in enumerate(words):
        total = 0.0
        for i in range(matrix.n_symbols):
            if not matrix.entries[i, w[0]]:
                continue
            g = jacobian_weight(weights, i, w)
            if g:
                total += g * f.values[index[(i,) + w[:-1]]]
        out[k] = total
    return CylinderFunction(matrix, f.depth, out)


def base_gap_estimate(weights, matrix, theta, depth, iters, seed=0, n_functions=4):
    """Empirical spectral gap of the base transfer operator.

    Power-iterates ``ruelle_apply`` on seeded random zero-mean cylinder
    functions and fits the norm envelope ||P^k f||_theta <= C r^k by least
    squares on the log norms.  Returns (rate, constant); the rate is 0 when
    the iterate norms collapse below 1e-14 (exact for a Bernoulli base once
    the depth is exhausted).
    """
    if depth < 2:
        raise ValueError("depth must be at least 2")
    rng = np.random.default_rng(seed)
    envelope = np.zeros(iters)
    for _ in range(n_functions):
        vals = rng.standard_normal(matrix.word_count(depth))
        f = CylinderFunction(matrix, depth, vals)
        f = f.shifted(-f.mean(weights))
        norm0 = f.norm_theta(theta)
        if norm0 > 0:
            f = CylinderFunction(matrix, depth, f.values / norm0)
        for k in range(iters):
            f = ruelle_apply(f, weights)
            envelope[k] = max(envelope[k], f.norm_theta(theta))
    usable = envelope > 1e-14
    if usable.sum() < 2 or not usable[-1]:
        return 0.0, float(envelope.max(initial=0.0))
    ks = np.arange(1, iters + 1)[usable]
    logs = np.log(envelope[usable])
    slope, intercept = np.polyfit(ks, logs, 1)
    rate = float(np.exp(slope))
    # inflate the fitted constant to an actual envelope of the data
    constant = float(np.max(envelope[usable] / rate ** ks)) if rate > 0 else float(envelope.max())
    return rate, constant


def base_correlation(weights, matrix, psi, s, lag):
    """Correlation of two cylinder functions at a time lag, by exact summation.

    Computes int (psi o sigma^lag) s dm - int psi dm int s dm over the
    admissible words of depth lag + k.
    """
    if lag < 0:
        raise ValueError("lag must be nonnegative")
    if psi.depth != s.depth:
        raise ValueError("observables must share a depth")
    k = psi.depth
    idx = matrix.word_index(k)
    cross = 0.0
    for w in matrix.words(lag + k):
        mass = cylinder_mass(weights, w)
        cross += mass * psi.values[idx[w[lag:lag + k]]] * s.values[idx[w[:k]]]
    return float(cross - psi.mean(weights) * s.mean(weights))
