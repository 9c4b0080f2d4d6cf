"""Command-line front end: config parsing, experiment orchestration, reports.

Configs are JSON with a system block plus optional per-experiment blocks;
unknown keys are rejected with their JSON pointer path.  Every subcommand
writes CSV tables and a ``summary.json`` into the output directory.  Exit
codes: 0 = all asserted bounds hold, 1 = some bound failed, 2 = usage or
configuration error.  Reports contain no timestamps, so identical config and
seed give byte-identical output files; timing goes to stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .limits import (
    CoboundaryError,
    Observable,
    asymptotic_variance,
    clt_experiment,
    correlation_curve,
    fiber_average,
    gordin_norms,
    integrate_observable,
)
from .measures import (
    AtomicMeasure,
    PiecewiseLinearFn,
    pushforward,
    quantize,
    wk_distance,
    wk_distance_bruteforce,
    wk_norm,
)
from .skew import FiberMapSpec, SystemSpec, c1_constant
from .stability import (
    PerturbationFamily,
    bu_estimate,
    fiber_op_gap,
    operator_gap,
    realize,
    stability_sweep,
    sweep_to_csv,
)
from .symbolic import (
    BaseWeights,
    CylinderFunction,
    TransitionMatrix,
    base_gap_estimate,
    cylinder_mass_vector,
    jacobian_weight,
    ruelle_apply,
)
from .transfer import (
    ConvergenceError,
    Disintegration,
    change_between,
    equilibrium_decay,
    fixed_point,
    lip_constant,
    marginal_density,
    norm_inf,
    norm_s_inf,
    quantize_disintegration,
    transfer_apply,
    verify_ly,
)

SUBCOMMANDS = ("verify", "fixed-point", "spectral", "stability", "correlations", "clt")


class ConfigError(ValueError):
    """Configuration problem, annotated with the JSON pointer of the offender."""

    def __init__(self, pointer, message):
        self.pointer = pointer
        super().__init__(f"{pointer}: {message}")


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

_TOP_KEYS = {"system", "depth", "grid", "tol", "seed", "stability", "correlations", "clt"}
_SYSTEM_KEYS = {"matrix", "theta", "weights", "fiber_maps", "offset_depth"}
_WEIGHT_KEYS = {"kind", "p", "transition", "stationary"}
_MAP_KEYS = {"slope", "offset", "offset_table"}
_STAB_KEYS = {"kind", "fiber_direction", "weight_direction", "deltas", "delta_max", "k5",
              "depth", "grid", "tol"}
_CORR_KEYS = {"nmax", "psi", "phi", "gordin_nmax"}
_CLT_KEYS = {"length", "trials", "truncation", "seeds"}
_OBS_KEYS = {"type", "depth", "values", "breakpoints", "components"}


@dataclass
class ExperimentConfig:
    system: SystemSpec
    depth: int
    grid: int
    tol: float
    seed: int
    stability: dict | None = None
    correlations: dict | None = None
    clt: dict | None = None
    digest: str = ""
    raw: dict = field(default_factory=dict, repr=False)


def _reject_unknown(block, allowed, pointer):
    for key in block:
        if key not in allowed:
            raise ConfigError(f"{pointer}/{key}", f"unknown key {key!r}")


def _require(block, key, pointer):
    if key not in block:
        raise ConfigError(pointer, f"missing required key {key!r}")
    return block[key]


def _parse_word(text, pointer):
    try:
        if "," in text:
            return tuple(int(part) for part in text.split(","))
        return tuple(int(ch) for ch in text)
    except ValueError as exc:
        raise ConfigError(pointer, f"bad word key {text!r}") from exc


def _parse_system(block, pointer="/system"):
    if not isinstance(block, dict):
        raise ConfigError(pointer, "system block must be an object")
    _reject_unknown(block, _SYSTEM_KEYS, pointer)
    matrix = _require(block, "matrix", pointer)
    theta = _require(block, "theta", pointer)
    wblock = _require(block, "weights", pointer)
    _reject_unknown(wblock, _WEIGHT_KEYS, f"{pointer}/weights")
    kind = _require(wblock, "kind", f"{pointer}/weights")
    try:
        if kind == "bernoulli":
            weights = BaseWeights.bernoulli(_require(wblock, "p", f"{pointer}/weights"))
        elif kind == "markov":
            weights = BaseWeights.markov(
                _require(wblock, "transition", f"{pointer}/weights"),
                wblock.get("stationary"),
            )
        else:
            raise ConfigError(f"{pointer}/weights/kind", f"unknown weights kind {kind!r}")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{pointer}/weights", str(exc)) from exc
    maps = []
    for i, mblock in enumerate(_require(block, "fiber_maps", pointer)):
        mp = f"{pointer}/fiber_maps/{i}"
        _reject_unknown(mblock, _MAP_KEYS, mp)
        table = {
            _parse_word(k, f"{mp}/offset_table"): v
            for k, v in (mblock.get("offset_table") or {}).items()
        }
        maps.append(FiberMapSpec(_require(mblock, "slope", mp), _require(mblock, "offset", mp), table))
    try:
        return SystemSpec(
            TransitionMatrix(matrix), theta, weights, maps, block.get("offset_depth", 1)
        )
    except ValueError as exc:
        raise ConfigError(pointer, str(exc)) from exc


def parse_observable(block, matrix, pointer):
    _reject_unknown(block, _OBS_KEYS, pointer)
    kind = _require(block, "type", pointer)
    if kind == "base_only":
        depth = int(_require(block, "depth", pointer))
        raw = _require(block, "values", pointer)
        values = {_parse_word(k, pointer): float(v) for k, v in raw.items()}
        missing = set(matrix.words(depth)) - set(values)
        if missing:
            raise ConfigError(f"{pointer}/values", f"missing word {sorted(missing)[0]}")
        return Observable.base_only(matrix, depth, values)
    if kind == "fiber":
        h = PiecewiseLinearFn(_require(block, "breakpoints", pointer), _require(block, "values", pointer))
        return Observable.fiber(matrix, h)
    if kind == "components":
        depth = int(_require(block, "depth", pointer))
        comps = {}
        for k, sub in _require(block, "components", pointer).items():
            comps[_parse_word(k, pointer)] = PiecewiseLinearFn(sub["breakpoints"], sub["values"])
        return Observable(matrix, depth, comps)
    raise ConfigError(f"{pointer}/type", f"unknown observable type {kind!r}")


def parse_config(path):
    """Load and validate a config file; raises ConfigError on the first problem."""
    path = Path(path)
    if not path.exists():
        raise ConfigError("/", f"config file {path} does not exist")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("/", f"not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("/", "top level must be an object")
    _reject_unknown(raw, _TOP_KEYS, "")
    system = _parse_system(_require(raw, "system", "/"))
    depth = int(raw.get("depth", 4))
    if depth < system.offset_depth:
        raise ConfigError("/depth", f"working depth {depth} below offset depth")
    grid = int(raw.get("grid", 512))
    if grid < 2:
        raise ConfigError("/grid", "grid must be at least 2")
    tol = float(raw.get("tol", 1e-6))
    if tol <= 0:
        raise ConfigError("/tol", "tol must be positive")
    seed = int(raw.get("seed", 0))
    for name, keys in (("stability", _STAB_KEYS), ("correlations", _CORR_KEYS), ("clt", _CLT_KEYS)):
        if name in raw:
            _reject_unknown(raw[name], keys, f"/{name}")
    if "correlations" in raw:
        for obs_key in ("psi", "phi"):
            if obs_key in raw["correlations"]:
                parse_observable(raw["correlations"][obs_key], system.matrix,
                                 f"/correlations/{obs_key}")
    digest = hashlib.sha256(
        json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()
    return ExperimentConfig(
        system=system,
        depth=depth,
        grid=grid,
        tol=tol,
        seed=seed,
        stability=raw.get("stability"),
        correlations=raw.get("correlations"),
        clt=raw.get("clt"),
        digest=digest,
        raw=raw,
    )


# ---------------------------------------------------------------------------
# report plumbing
# ---------------------------------------------------------------------------


class Report:
    """Collects named pass/fail verdicts and the emitted artifact files."""

    def __init__(self, experiment, config, out_dir):
        self.experiment = experiment
        self.config = config
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.verdicts = []
        self.artifacts = []
        self.metrics = {}

    def check(self, name, passed, detail=""):
        self.verdicts.append({"name": name, "passed": bool(passed), "detail": detail})
        return passed

    def metric(self, name, value):
        self.metrics[name] = value

    def write_csv(self, name, header, rows):
        path = self.out_dir / name
        lines = [header]
        for row in rows:
            lines.append(",".join(repr(x) if isinstance(x, float) else str(x) for x in row))
        path.write_text("\n".join(lines) + "\n")
        self.artifacts.append(name)
        return path

    def write_text(self, name, text):
        (self.out_dir / name).write_text(text)
        self.artifacts.append(name)

    @property
    def passed(self):
        return all(v["passed"] for v in self.verdicts)

    def finalize(self):
        summary = {
            "experiment": self.experiment,
            "input_digest": self.config.digest,
            "tool_version": __version__,
            "seed": self.config.seed,
            "metrics": self.metrics,
            "verdicts": self.verdicts,
            "artifacts": self.artifacts,
            "passed": self.passed,
        }
        (self.out_dir / "summary.json").write_text(
            json.dumps(summary, sort_keys=True, indent=2) + "\n"
        )
        for v in self.verdicts:
            status = "pass" if v["passed"] else "FAIL"
            print(f"[{status}] {self.experiment}: {v['name']}" + (f" ({v['detail']})" if v["detail"] else ""))
        return 0 if self.passed else 1


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def _compute_fixed_point(config):
    return fixed_point(config.system, depth=config.depth, tol=config.tol, grid=config.grid)


def run_fixed_point(config, out_dir):
    report = Report("fixed-point", config, out_dir)
    sys_ = config.system
    res = _compute_fixed_point(config)
    mu0 = res.disintegration
    n_inf = norm_inf(mu0)
    s_inf = norm_s_inf(mu0, sys_.theta)
    lip = lip_constant(mu0, sys_.theta)
    bound = c1_constant(sys_) / (1.0 - sys_.theta)
    report.metric("norm_inf", n_inf)
    report.metric("norm_s_inf", s_inf)
    report.metric("lip_constant", lip)
    report.metric("certified_error", res.certified_error)
    report.metric("iterations", res.iterations)
    report.check("fiberwise_norm_is_one", abs(n_inf - 1.0) <= 1e-6, f"norm_inf={n_inf!r}")
    report.check("strong_norm_is_two", abs(s_inf - 2.0) <= 1e-6, f"norm_s_inf={s_inf!r}")
    report.check("lip_within_regularity_bound", lip <= bound + 1e-6, f"lip={lip!r} bound={bound!r}")
    again, _ = quantize_disintegration(transfer_apply(sys_, mu0), config.grid)
    move = change_between(again, mu0)
    report.check("reapplication_within_tol", move <= config.tol, f"moved {move!r}")
    report.write_text("disintegration.json", json.dumps(mu0.to_json_dict()) + "\n")
    report.write_csv(
        "fixed_point.csv",
        "quantity,value",
        [
            ("norm_inf", n_inf),
            ("norm_s_inf", s_inf),
            ("lip_constant", lip),
            ("certified_error", res.certified_error),
            ("iterations", res.iterations),
            ("last_change", res.last_change),
        ],
    )
    return report.finalize()


def run_spectral(config, out_dir):
    report = Report("spectral", config, out_dir)
    sys_ = config.system
    rate, constant = base_gap_estimate(
        sys_.weights, sys_.matrix, sys_.theta, depth=min(config.depth, 4), iters=10,
        seed=config.seed,
    )
    report.metric("base_rate", rate)
    report.metric("base_constant", constant)
    report.check("base_gap_below_one", rate < 1.0, f"rate={rate!r}")
    diff = AtomicMeasure([0.0, 1.0], [1.0, -1.0])
    dis = Disintegration.product(sys_.matrix, config.depth, diff)
    fit, norms = equilibrium_decay(sys_, dis, nmax=8)
    report.metric("equilibrium_rate", fit.rate)
    report.metric("equilibrium_r2", fit.r_squared)
    report.check("equilibrium_rate_below_one", fit.rate < 1.0, f"rate={fit.rate!r}")
    report.write_csv(
        "equilibrium.csv",
        "n,norm,fit",
        [(n + 1, norms[n], fit.constant * fit.rate ** (n + 1)) for n in range(len(norms))],
    )
    return report.finalize()


def _build_family(config):
    block = config.stability
    if not block:
        raise ConfigError("/stability", "no stability block in the config")
    return PerturbationFamily(
        config.system,
        block.get("kind", "fiber_shift"),
        fiber_direction=block.get("fiber_direction"),
        weight_direction=block.get("weight_direction"),
        delta_max=block.get("delta_max", 0.2),
        k5=block.get("k5"),
    )


def run_stability(config, out_dir, threads=1):
    report = Report("stability", config, out_dir)
    fam = _build_family(config)
    block = config.stability
    deltas = block.get("deltas", [1e-1, 1e-2, 1e-3, 1e-4])
    depth = block.get("depth", config.depth)
    grid = block.get("grid", config.grid)
    tol = block.get("tol", config.tol)
    result = stability_sweep(fam, deltas, depth=depth, tol=tol, grid=grid, threads=threads)
    report.write_text("stability.csv", sweep_to_csv(result))
    report.metric("ratio_bound", result.ratio_bound)
    ok_rows = [row for row in result.rows if not row.failed]
    report.check("all_deltas_converged", len(ok_rows) == len(result.rows))
    variations = [row.variation for row in ok_rows]
    if len(variations) >= 2:
        report.check(
            "variation_decreases",
            all(b < a for a, b in zip(variations, variations[1:])),
            f"Delta={variations!r}",
        )
    report.check("ratio_bound_finite", math.isfinite(result.ratio_bound))
    # operator-gap lemmas at the largest sweep delta
    delta = ok_rows[0].delta if ok_rows else None
    if delta is not None:
        res_d = fixed_point(realize(fam, delta), depth=depth, tol=tol, grid=grid)
        r_delta = result.report.r_of(delta)
        max_norm = norm_inf(res_d.disintegration)
        f_gap = fiber_op_gap(fam.base, realize(fam, delta), res_d.disintegration)
        report.metric("fiber_op_gap", f_gap)
        report.check(
            "fiber_gap_lemma", f_gap <= r_delta * max_norm + 1e-10,
            f"gap={f_gap!r} bound={r_delta * max_norm!r}",
        )
        b_u = bu_estimate(fam, [0.0, delta], depth=depth, tol=tol, grid=grid)
        o_gap = operator_gap(fam, delta, res_d.disintegration)
        report.metric("operator_gap", o_gap)
        report.check(
            "operator_gap_lemma", o_gap <= (2.0 + b_u) * r_delta + 1e-8,
            f"gap={o_gap!r} bound={(2.0 + b_u) * r_delta!r}",
        )
    return report.finalize()


def _default_observables(config):
    matrix = config.system.matrix
    ones = {w: 1.0 if w[0] == 0 else 0.0 for w in matrix.words(1)}
    psi = Observable.base_only(matrix, 1, ones)
    phi = Observable.fiber(matrix, PiecewiseLinearFn.identity())
    return psi, phi


def run_correlations(config, out_dir):
    report = Report("correlations", config, out_dir)
    sys_ = config.system
    block = config.correlations or {}
    if "psi" in block:
        psi = parse_observable(block["psi"], sys_.matrix, "/correlations/psi")
    else:
        psi = _default_observables(config)[0]
    if "phi" in block:
        phi = parse_observable(block["phi"], sys_.matrix, "/correlations/phi")
    else:
        phi = _default_observables(config)[1]
    nmax = block.get("nmax", 12)
    res = _compute_fixed_point(config)
    mu0 = res.disintegration
    curve = correlation_curve(sys_, mu0, psi, phi, nmax)
    report.write_csv(
        "correlations.csv",
        "lag,value,err_bound,fit",
        [
            (int(n), curve.values[n], curve.err_bounds[n],
             curve.fit.constant * curve.fit.rate ** n)
            for n in range(nmax + 1)
        ],
    )
    report.metric("tau", curve.fit.rate)
    report.metric("r_squared", curve.fit.r_squared)
    report.check("decay_rate_below_one", curve.fit.rate < 1.0, f"tau={curve.fit.rate!r}")
    gn = gordin_norms(sys_, mu0, phi, nmax=block.get("gordin_nmax", min(nmax, 8)))
    report.write_csv(
        "gordin.csv",
        "n,norm",
        [(int(n), gn.norms[n]) for n in range(gn.norms.size)],
    )
    report.metric("gordin_tau", gn.fit.rate)
    report.metric("gordin_ratio_margin", gn.ratio_margin)
    report.check("gordin_summable", gn.fit.rate < 1.0, f"tau={gn.fit.rate!r}")
    return report.finalize()


def run_clt(config, out_dir):
    report = Report("clt", config, out_dir)
    sys_ = config.system
    block = config.clt or {}
    length = block.get("length", 2000)
    trials = block.get("trials", 5000)
    truncation = block.get("truncation", 30)
    phi = _default_observables(config)[1]
    res = _compute_fixed_point(config)
    mu0 = res.disintegration
    var = asymptotic_variance(sys_, mu0, phi, truncation)
    clt = clt_experiment(
        sys_, mu0, phi, length=length, trials=trials, seed=config.seed,
        truncation=truncation, variance=var,
    )
    report.write_csv(
        "autocovariance.csv",
        "lag,value,err_bound",
        [(int(n), var.curve.values[n], var.curve.err_bounds[n]) for n in range(truncation + 1)],
    )
    summary = {
        "sigma2": var.sigma2,
        "tailBound": var.tail_bound,
        "ks": clt.ks_statistic,
        "pass": clt.passed,
        "seed": config.seed,
    }
    report.write_text("clt.json", json.dumps(summary, sort_keys=True, indent=2) + "\n")
    report.metric("sigma2", var.sigma2)
    report.metric("ks", clt.ks_statistic)
    report.metric("threshold", clt.threshold)
    report.check("ks_within_critical", clt.passed, f"ks={clt.ks_statistic!r} thr={clt.threshold!r}")
    return report.finalize()


def run_verify(config, out_dir):
    """Battery of invariant and property checks from every module."""
    report = Report("verify", config, out_dir)
    sys_ = config.system
    matrix = sys_.matrix
    rng = np.random.default_rng(config.seed)

    def random_measure(n):
        return AtomicMeasure(rng.random(n), rng.uniform(-2, 2, n))

    worst = 0.0
    for _ in range(40):
        a, b = random_measure(rng.integers(1, 9)), random_measure(rng.integers(1, 9))
        worst = max(worst, abs(wk_distance(a, b) - wk_distance_bruteforce(a, b)))
    report.check("dual_solver_matches_lp_reference", worst <= 2e-3, f"max gap {worst!r}")

    worst = 0.0
    for _ in range(30):
        w = rng.uniform(0.1, 1.0, rng.integers(1, 10))
        mu = AtomicMeasure(rng.random(w.size), w / w.sum())
        worst = max(worst, abs(wk_norm(mu) - 1.0))
    report.check("probability_measures_have_unit_norm", worst <= 1e-12, f"max gap {worst!r}")

    ok = True
    for _ in range(50):
        a, b, c = (random_measure(rng.integers(1, 7)) for _ in range(3))
        ok &= wk_distance(a, b) == wk_distance(b, a)
        ok &= wk_distance(a, c) <= wk_distance(a, b) + wk_distance(b, c) + 1e-10
    report.check("metric_symmetry_and_triangle", ok)

    mu = random_measure(60)
    snapped, bound = quantize(mu, config.grid)
    report.check("quantize_certificate", wk_distance(mu, snapped) <= bound + 1e-14)

    ok = True
    for depth in range(1, min(config.depth, 6) + 1):
        power = np.linalg.matrix_power(matrix.entries, depth - 1).sum()
        ok &= matrix.word_count(depth) == power
        ok &= abs(cylinder_mass_vector(sys_.weights, matrix, depth).sum() - 1.0) <= 1e-12
    report.check("word_counts_and_mass_normalization", ok)

    ok = True
    for w in matrix.words(min(config.depth, 4)):
        total = sum(jacobian_weight(sys_.weights, i, w) for i in range(matrix.n_symbols))
        ok &= abs(total - 1.0) <= 1e-12
    report.check("jacobian_row_normalization", ok)

    f = CylinderFunction(matrix, 3, rng.standard_normal(matrix.word_count(3)))
    pf = ruelle_apply(f, sys_.weights)
    report.check(
        "ruelle_preserves_mean",
        abs(pf.mean(sys_.weights) - f.mean(sys_.weights)) <= 1e-10,
    )

    def random_dis(signed=True):
        fibers = {}
        for w in matrix.words(min(config.depth, 3)):
            k = int(rng.integers(2, 5))
            weights = rng.uniform(-1, 1, k) if signed else rng.uniform(0.1, 1.0, k)
            fibers[w] = AtomicMeasure(rng.random(k), weights)
        return Disintegration(matrix, min(config.depth, 3), fibers)

    ok = True
    for _ in range(10):
        dis = random_dis()
        out = transfer_apply(sys_, dis)
        lhs = marginal_density(out).values
        rhs = ruelle_apply(marginal_density(dis), sys_.weights).values
        ok &= np.abs(lhs - rhs).max() <= 1e-10
        ok &= norm_inf(out) <= norm_inf(dis) + 1e-10
    report.check("marginal_intertwining_and_weak_contraction", ok)

    res = _compute_fixed_point(config)
    mu0 = res.disintegration
    n_inf = norm_inf(mu0)
    s_inf = norm_s_inf(mu0, sys_.theta)
    report.metric("norm_inf", n_inf)
    report.metric("certified_error", res.certified_error)
    report.check("invariant_measure_norms", abs(n_inf - 1.0) <= 1e-6 and abs(s_inf - 2.0) <= 1e-6,
                 f"norm_inf={n_inf!r} norm_s_inf={s_inf!r}")
    bound = c1_constant(sys_) / (1.0 - sys_.theta)
    lip = lip_constant(mu0, sys_.theta)
    report.check("lip_regularity_bound", lip <= bound + 1e-6, f"lip={lip!r} bound={bound!r}")

    margins = []
    for _ in range(5):
        dis = random_dis(signed=False)
        margins.extend(row.margin for row in verify_ly(sys_, dis, nmax=5))
    report.check("lasota_yorke_margins", min(margins) >= -1e-8, f"min margin {min(margins)!r}")

    diff = AtomicMeasure([0.0, 1.0], [1.0, -1.0])
    fit, _ = equilibrium_decay(sys_, Disintegration.product(matrix, min(config.depth, 3), diff), 8)
    report.check("equilibrium_decay_rate", fit.rate < 1.0, f"rate={fit.rate!r}")

    t = sys_.branch_map(matrix.words(1)[0])
    ok = True
    for _ in range(10):
        w = rng.uniform(0.1, 1.0, 4)
        a = AtomicMeasure(rng.random(4), w / w.sum())
        w2 = rng.uniform(0.1, 1.0, 4)
        b = AtomicMeasure(rng.random(4), w2 / w2.sum())
        ok &= wk_distance(pushforward(a, t), pushforward(b, t)) <= abs(t.a) * wk_distance(a, b) + 1e-12
    report.check("pushforward_contraction_factor", ok)

    phi = _default_observables(config)[1]
    m_phi = integrate_observable(sys_, mu0, phi)
    var = asymptotic_variance(sys_, mu0, phi, truncation=10)
    direct = 0.0
    for w in mu0.words():
        fm = mu0.fibers[w]
        h = phi.component(w)
        direct += float(
            np.dot(fm.weights, (h(fm.positions) - m_phi) ** 2)
        ) * cylinder_mass_vector(sys_.weights, matrix, mu0.depth)[matrix.word_index(mu0.depth)[w]]
    report.check("autocovariance_lag0_is_variance", abs(var.curve.values[0] - direct) <= 1e-10)

    gn = gordin_norms(sys_, mu0, phi, nmax=2)
    s = fiber_average(sys_, mu0, phi.shifted(-m_phi))
    masses = cylinder_mass_vector(sys_.weights, matrix, mu0.depth)
    expected = math.sqrt(float(np.dot(masses, s.values**2)))
    report.check("gordin_level0_identity", abs(gn.norms[0] - expected) <= 1e-10)

    report.write_csv(
        "verify.csv",
        "check,passed,detail",
        [(v["name"], v["passed"], v["detail"].replace(",", ";")) for v in report.verdicts],
    )
    return report.finalize()


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="skewfiber",
        description="Numerical experiments for skew products with contracting fibers",
    )
    parser.add_argument("command", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="path to the JSON config")
    parser.add_argument("--out", required=True, help="output directory for reports")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    parser.add_argument("--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    started = time.perf_counter()
    try:
        config = parse_config(args.config)
        if args.seed is not None:
            config.seed = args.seed
        if args.command == "verify":
            code = run_verify(config, args.out)
        elif args.command == "fixed-point":
            code = run_fixed_point(config, args.out)
        elif args.command == "spectral":
            code = run_spectral(config, args.out)
        elif args.command == "stability":
            code = run_stability(config, args.out, threads=max(1, args.threads))
        elif args.command == "correlations":
            code = run_correlations(config, args.out)
        else:
            code = run_clt(config, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ConvergenceError, CoboundaryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.verbose:
        print(f"{args.command} finished in {time.perf_counter() - started:.2f}s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
