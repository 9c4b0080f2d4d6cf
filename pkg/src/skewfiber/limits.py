"""Decay of correlations, conditional-expectation decay, and the CLT experiment.

Observables are cylinder-indexed piecewise-linear fiber functions.  The
lagged covariance of two observables,

    C_n = int (later o F^n) now dmu0 - int now dmu0 int later dmu0,

is evaluated by reweighting the invariant disintegration with the centered
``now`` observable and pushing it n times through the transfer operator:
C_n is then the integral of ``later`` against the pushed measure.  One
transfer step per lag replaces the exponentially large sum over depth-(n+k)
words, and the quantization error of each step is tracked and reported as a
certified bound.  ``correlation_lattice`` keeps the direct word-sum
evaluation as an independent cross-check for small lags.

For base-only observables only the fiber masses matter, and those evolve
exactly (pushforwards and quantization both preserve mass), so exact-zero
statements, such as independence of disjoint coordinate blocks under an
i.i.d. base, hold to machine precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fitting import ExpFit, exp_fit
from .measures import AtomicMeasure, PiecewiseLinearFn, integrate
from .skew import sample_orbits
from .symbolic import CylinderFunction, cylinder_mass
from .transfer import (
    lip_constant,
    quantize_disintegration,
    transfer_apply,
)

__all__ = [
    "Observable",
    "CorrelationCurve",
    "VarianceResult",
    "GordinResult",
    "CLTResult",
    "CoboundaryError",
    "integrate_observable",
    "fiber_average",
    "fiber_average_margin",
    "correlation_curve",
    "correlation_lattice",
    "correlation_mc",
    "gordin_norms",
    "asymptotic_variance",
    "clt_experiment",
]

DEFAULT_GRID = 1 << 15


class CoboundaryError(RuntimeError):
    pass


class Observable:
    """Observable phi(x, y) = h_{x[:k]}(y) with one fiber component per word."""

    def __init__(self, matrix, depth, components):
        words = matrix.words(depth)
        if set(components) != set(words):
            raise ValueError("need one fiber component per admissible word")
        self.matrix = matrix
        self.depth = depth
        self.components = dict(components)

    @classmethod
    def base_only(cls, matrix, depth, values):
        """Observable constant on fibers: psi(x, y) = values[x[:k]]."""
        comps = {w: PiecewiseLinearFn.constant(values[w]) for w in matrix.words(depth)}
        return cls(matrix, depth, comps)

    @classmethod
    def fiber(cls, matrix, h):
        """Observable depending on the fiber alone, phi(x, y) = h(y)."""
        return cls(matrix, 1, {w: h for w in matrix.words(1)})

    def component(self, word):
        return self.components[tuple(word[: self.depth])]

    def evaluate(self, word, y):
        return float(self.component(word)(y))

    def sup_norm(self):
        return max(h.sup_norm() for h in self.components.values())

    def fiber_lipschitz(self):
        return max(h.lipschitz() for h in self.components.values())

    def base_lipschitz(self, theta):
        from .symbolic import word_distance

        words = self.matrix.words(self.depth)
        best = 0.0
        for a in range(len(words)):
            ha = self.components[words[a]]
            for b in range(a + 1, len(words)):
                hb = self.components[words[b]]
                grid = np.union1d(ha.breakpoints, hb.breakpoints)
                gap = float(np.abs(ha(grid) - hb(grid)).max())
                best = max(best, gap / word_distance(words[a], words[b], theta))
        return best

    def lipschitz(self, theta):
        """Lipschitz constant for the sum metric d(x,x') + |y - y'|."""
        return max(self.fiber_lipschitz(), self.base_lipschitz(theta))

    def dual_bound(self):
        """max(Lip, sup) of the worst component: converts wk errors to integral errors."""
        return max(max(h.lipschitz(), h.sup_norm()) for h in self.components.values())

    def is_base_only(self, tol=0.0):
        return all(
            abs(h.values.max() - h.values.min()) <= tol for h in self.components.values()
        )

    def shifted(self, c):
        return Observable(
            self.matrix, self.depth, {w: h.shifted(c) for w, h in self.components.items()}
        )

    def __repr__(self):
        return f"Observable(depth={self.depth}, {len(self.components)} components)"


def integrate_observable(sys, dis, obs):
    """Exact integral sum_w m([w]) int h_w d mu|_w; linear in both arguments."""
    if obs.depth > dis.depth:
        raise ValueError("observable depth exceeds the disintegration depth")
    total = 0.0
    for w in dis.words():
        total += cylinder_mass(sys.weights, w) * integrate(dis.fibers[w], obs.component(w))
    return float(total)


def fiber_average(sys, mu0, obs):
    """Fiber averages s(w) = int h_w d mu0|_w / phi1(w) as a cylinder function."""
    if obs.depth > mu0.depth:
        raise ValueError("observable depth exceeds the disintegration depth")
    values = []
    for w in mu0.words():
        mass = mu0.fibers[w].total_weight()
        if mass == 0.0:
            raise ValueError(f"vanishing marginal density on word {w}")
        values.append(integrate(mu0.fibers[w], obs.component(w)) / mass)
    return CylinderFunction(mu0.matrix, mu0.depth, values)


def fiber_average_margin(sys, mu0, obs):
    """Margin of the regularity bound |s|_theta <= max(L, sup) lip(mu0) + L."""
    theta = sys.theta
    s = fiber_average(sys, mu0, obs)
    lip = obs.lipschitz(theta)
    bound = max(lip, obs.sup_norm()) * lip_constant(mu0, theta) + lip
    return bound - s.lipschitz(theta)


# ---------------------------------------------------------------------------
# correlations
# ---------------------------------------------------------------------------


def _weighted_disintegration(dis, obs):
    """Fiberwise pointwise product h_w . (mu|_w); exact on atoms.

    A wk discrepancy of eps in a fiber becomes at most (sup + Lip) eps after
    the product, since g h has supremum sup(h) and Lipschitz constant
    Lip(g) sup(h) + sup(g) Lip(h) for any admissible test function g.
    """
    factor = obs.sup_norm() + obs.fiber_lipschitz()

    def reweigh(w, mu):
        if mu.n_atoms == 0:
            return mu
        return AtomicMeasure(mu.positions, mu.weights * obs.component(w)(mu.positions))

    return dis.map_fibers(reweigh, err_bound=dis.err_bound * factor)


@dataclass
class CorrelationCurve:
    lags: np.ndarray
    values: np.ndarray
    err_bounds: np.ndarray
    fit: ExpFit = field(repr=False)

    @property
    def tau(self):
        return self.fit.rate


def correlation_curve(sys, mu0, now, later, nmax, grid=DEFAULT_GRID):
    """Lagged covariances C_n = cov(now, later o F^n) for n = 0..nmax.

    The centered ``now`` observable reweighs mu0; each lag is one transfer
    step (quantized on ``grid`` when given, with the error tracked into
    ``err_bounds``).  The fit is a log-linear envelope over the lags whose
    magnitude exceeds the numerical floor.
    """
    m_now = integrate_observable(sys, mu0, now)
    m_later = integrate_observable(sys, mu0, later)
    rho = _weighted_disintegration(mu0, now.shifted(-m_now))
    to_value = later.dual_bound()
    lags = np.arange(nmax + 1)
    values = np.empty(nmax + 1)
    errs = np.empty(nmax + 1)
    # total mass of rho is the centered mean, zero, so no product correction
    values[0] = integrate_observable(sys, rho, later) - m_later * rho.total_mass(sys.weights)
    errs[0] = to_value * rho.err_bound
    for n in range(1, nmax + 1):
        rho = transfer_apply(sys, rho)
        if grid is not None:
            rho, _ = quantize_disintegration(rho, grid)
        values[n] = integrate_observable(sys, rho, later) - m_later * rho.total_mass(sys.weights)
        errs[n] = to_value * rho.err_bound
    return CorrelationCurve(lags, values, errs, exp_fit(lags, values))


def correlation_lattice(sys, mu0, now, later, lag, budget=1 << 21):
    """Direct word-sum evaluation of one lagged covariance.

    Enumerates all admissible words long enough to carry the ``now``
    component, the invariant fiber, the branch maps along the lag, and the
    shifted ``later`` component; the fiber of a long word is the invariant
    fiber of its working-depth prefix.  The ``now`` observable is centered
    inside the sum (subtracting the product of the means instead would
    differ by the deviation of the computed measure from exact invariance).
    Exponential in the lag; an independent check of ``correlation_curve``
    at small lags.
    """
    matrix = sys.matrix
    length = max(now.depth, mu0.depth, lag + later.depth, lag - 1 + sys.offset_depth)
    if matrix.word_count(1) ** length > budget:
        raise ValueError("lattice sum exceeds the word budget; use correlation_curve")
    m_now = integrate_observable(sys, mu0, now)
    total = 0.0
    for w in matrix.words(length):
        mu = mu0.fibers[w[: mu0.depth]]
        ys = mu.positions
        path = ys
        for t in range(lag):
            b = sys.branch_map(w[t:])
            path = b.a * path + b.b
        vals = (now.component(w)(ys) - m_now) * later.component(w[lag:])(path)
        total += cylinder_mass(sys.weights, w) * float(np.dot(mu.weights, vals))
    return total


def correlation_mc(sys, now, later, nmax, trials, length=None, seed=0, burn_in=40):
    """Monte Carlo estimate of the correlation curve with standard errors.

    Ensemble estimator over independent orbits; returns (values, standard
    errors) for lags 0..nmax.  For use beyond the exact engines' budgets.
    """
    window = max(now.depth, later.depth) + nmax
    length = length or 1
    orbits = sample_orbits(sys, seed, length + nmax, trials, burn_in=burn_in, window=window)
    now_vals = np.empty((trials, length))
    later_vals = np.empty((trials, length + nmax))
    for i, orbit in enumerate(orbits):
        for t in range(length):
            now_vals[i, t] = now.evaluate(tuple(orbit.symbols[t:]), orbit.ys[t])
        for t in range(length + nmax):
            later_vals[i, t] = later.evaluate(tuple(orbit.symbols[t:]), orbit.ys[t])
    values = np.empty(nmax + 1)
    errors = np.empty(nmax + 1)
    m_now = now_vals.mean()
    m_later = later_vals.mean()
    for n in range(nmax + 1):
        prod = (now_vals[:, :length] - m_now) * (later_vals[:, n:n + length] - m_later)
        per_trial = prod.mean(axis=1)
        values[n] = per_trial.mean()
        errors[n] = per_trial.std(ddof=1) / math.sqrt(trials)
    return values, errors


# ---------------------------------------------------------------------------
# Gordin conditional expectations
# ---------------------------------------------------------------------------


@dataclass
class GordinResult:
    norms: np.ndarray
    fit: ExpFit
    standard_errors: np.ndarray | None = None

    @property
    def ratio_margin(self):
        """Ratio-test margin 1 - tau for the summability of the norms."""
        return 1.0 - self.fit.rate


def gordin_norms(sys, mu0, phi, nmax, budget=1 << 20):
    """L2 norms of the conditional expectations of centered phi on the past filtration.

    The conditioning sigma-algebra at level n is generated by the base
    coordinates from time n on; the conditional expectation on the tail word
    v averages the fiber integrals over all admissible length-n pasts u,
    weighted by m([uv]) / m([v]).  Exact as long as the word enumeration
    fits the budget.
    """
    matrix = sys.matrix
    m_phi = integrate_observable(sys, mu0, phi)
    phit = phi.shifted(-m_phi)
    reach = max(phi.depth, mu0.depth)
    norms = np.empty(nmax + 1)
    for n in range(nmax + 1):
        v_depth = max(1, reach - n)
        if matrix.word_count(1) ** (n + v_depth) > budget:
            raise ValueError(
                f"gordin_norms at level {n} exceeds the word budget; "
                "use gordin_norms_mc or lower nmax"
            )
        total = 0.0
        for v in matrix.words(v_depth):
            mass_v = cylinder_mass(sys.weights, v)
            acc = 0.0
            for u in matrix.words(n):
                if n and not matrix.entries[u[-1], v[0]]:
                    continue
                uv = u + v
                word = uv + matrix.smallest_tail(uv[-1], max(0, reach - len(uv)))
                mu = mu0.fibers[word[: mu0.depth]]
                fiber_integral = integrate(mu, phit.component(word))
                acc += cylinder_mass(sys.weights, uv) * fiber_integral
            total += (acc / mass_v) ** 2 * mass_v
        norms[n] = math.sqrt(total)
    return GordinResult(norms, exp_fit(np.arange(nmax + 1), norms))


def gordin_norms_mc(sys, phi, levels, trials, seed=0, burn_in=40):
    """Monte Carlo fallback for the conditional-expectation norms.

    Orbit samples are binned by the truncated future window; the bin means
    estimate the conditional expectation.  Standard errors of the binned
    means are propagated to the norm estimate.
    """
    matrix = sys.matrix
    nmax = max(levels)
    reach = phi.depth
    window = nmax + reach
    orbits = sample_orbits(sys, seed, 1, trials, burn_in=burn_in, window=window)
    vals = np.array([phi.evaluate(tuple(o.symbols), o.ys[0]) for o in orbits])
    vals = vals - vals.mean()
    norms = np.full(nmax + 1, np.nan)
    ses = np.full(nmax + 1, np.nan)
    for n in levels:
        v_depth = max(1, reach)
        bins = {}
        for o, value in zip(orbits, vals):
            key = tuple(o.symbols[n:n + v_depth])
            bins.setdefault(key, []).append(value)
        total = 0.0
        var_total = 0.0
        for key, entries in bins.items():
            arr = np.asarray(entries)
            p_hat = arr.size / trials
            mean = arr.mean()
            total += p_hat * mean**2
            if arr.size > 1:
                se_mean = arr.std(ddof=1) / math.sqrt(arr.size)
                var_total += (p_hat * 2 * abs(mean) * se_mean) ** 2
        norms[n] = math.sqrt(max(total, 0.0))
        ses[n] = math.sqrt(var_total) / (2 * norms[n]) if norms[n] > 0 else math.sqrt(var_total)
    used = sorted(levels)
    return GordinResult(norms, exp_fit(np.array(used), norms[used]), standard_errors=ses)


# ---------------------------------------------------------------------------
# asymptotic variance and the CLT
# ---------------------------------------------------------------------------


@dataclass
class VarianceResult:
    sigma2: float
    tail_bound: float
    numeric_error: float
    curve: CorrelationCurve = field(repr=False)
    possible_coboundary: bool = False

    @property
    def sigma(self):
        return math.sqrt(max(self.sigma2, 0.0))


def asymptotic_variance(sys, mu0, phi, truncation, grid=DEFAULT_GRID):
    """Truncated Green-Kubo variance with a fitted geometric tail bound.

    sigma^2 = var(phi) + 2 sum_{j<=J} cov(phi, phi o F^j); the tail bound is
    the fitted envelope summed beyond the truncation, and the numeric error
    accumulates the certified quantization errors of the covariances.  A
    value within the combined bound of zero is flagged as a possible
    coboundary; below minus the bound is an inconsistency and raises.
    """
    if truncation < 1:
        raise ValueError("truncation must be at least 1")
    m_phi = integrate_observable(sys, mu0, phi)
    phit = phi.shifted(-m_phi)
    curve = correlation_curve(sys, mu0, phit, phit, truncation, grid=grid)
    sigma2 = float(curve.values[0] + 2.0 * curve.values[1:].sum())
    fit = curve.fit
    if fit.degenerate:
        tail = 0.0
    elif fit.rate < 1.0:
        tail = 2.0 * fit.constant * fit.rate ** (truncation + 1) / (1.0 - fit.rate)
    else:
        tail = math.inf
    numeric = float(curve.err_bounds[0] + 2.0 * curve.err_bounds[1:].sum())
    combined = tail + numeric
    if sigma2 < -combined:
        raise ValueError(
            f"truncated variance {sigma2:.3g} is below -(tail+numeric) = {-combined:.3g}; "
            "inconsistent truncation"
        )
    return VarianceResult(
        sigma2=sigma2,
        tail_bound=tail,
        numeric_error=numeric,
        curve=curve,
        possible_coboundary=abs(sigma2) <= combined,
    )


@dataclass
class CLTResult:
    ks_statistic: float
    passed: bool
    sigma: float
    sigma2: float
    tail_bound: float
    threshold: float
    seed: int


def observable_sums(phi, orbits):
    """Birkhoff sums of an observable over sampled orbits, vectorized."""
    trials = len(orbits)
    length = orbits[0].ys.size
    ys = np.stack([o.ys for o in orbits])
    n = phi.matrix.n_symbols
    codes = np.stack([o.symbols[:length].copy() for o in orbits])
    for j in range(1, phi.depth):
        codes = codes * n + np.stack([o.symbols[j:length + j] for o in orbits])
    sums = np.zeros(trials)
    code_of = {}
    for w in phi.matrix.words(phi.depth):
        c = 0
        for s in w:
            c = c * n + s
        code_of[c] = phi.components[w]
    for c, h in code_of.items():
        mask = codes == c
        if mask.any():
            sums += np.where(mask, h(ys), 0.0).sum(axis=1)
    return sums


def clt_experiment(
    sys,
    mu0,
    phi,
    length,
    trials,
    seed,
    truncation=30,
    variance=None,
    ks_slack=1.3,
    min_trials=100,
    burn_in=40,
):
    """Kolmogorov-Smirnov test of the normalized Birkhoff sums.

    ``trials`` independent orbits are sampled, the centered sums S_n/sqrt(n)
    are compared against the centered normal law with the truncated
    asymptotic variance, and the run passes when the KS statistic stays
    below the 5% critical value 1.36/sqrt(trials) inflated by ``ks_slack``
    to absorb the plug-in variance noise.
    """
    from scipy import stats

    if trials < min_trials:
        raise ValueError(f"need at least {min_trials} trials for a meaningful KS test")
    if variance is None:
        variance = asymptotic_variance(sys, mu0, phi, truncation)
    if variance.possible_coboundary or variance.sigma2 <= 0.0:
        raise CoboundaryError("coboundary regime, CLT statement vacuous")
    m_phi = integrate_observable(sys, mu0, phi)
    orbits = sample_orbits(sys, seed, length, trials, burn_in=burn_in, window=phi.depth)
    sums = observable_sums(phi, orbits) - length * m_phi
    normalized = sums / math.sqrt(length)
    ks = float(stats.kstest(normalized, "norm", args=(0.0, variance.sigma)).statistic)
    threshold = 1.36 / math.sqrt(trials) * ks_slack
    return CLTResult(
        ks_statistic=ks,
        passed=ks <= threshold,
        sigma=variance.sigma,
        sigma2=variance.sigma2,
        tail_bound=variance.tail_bound,
        threshold=threshold,
        seed=seed,
    )
