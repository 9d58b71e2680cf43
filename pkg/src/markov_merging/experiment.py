"""Experiment runner: gallery -> measurements -> bounds -> oracle comparison.

Configs are flat JSON objects (see :data:`DEFAULTS` for the key set).  All
randomness flows from ``seed`` so a config replays byte for byte.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import bounds as bnd
from . import gallery
from .core import Kernel, Measure, Schedule, evolve
from .core import iter_products
from .distances import merging_report, tv_pairwise
from .exceptions import ConfigError, MergingError
from .functional import NashParams, log_sobolev_lower_bound, mls_constant, nash_safe_constant
from .io import schedule_to_dict, write_kernel, write_measure
from .spectral import reversibilization, second_singular_value
from .stability import check_c_stability, search_c_stability

FAMILIES = ("circle", "metropolis_bd", "hypercube", "transpose_i_random",
            "symmetric_perturbation", "sticky_permutation", "drift")
ANALYSES = ("merging", "spectral", "stability", "bounds")
BOUND_FAMILIES = ("singular", "nash", "ls", "entropy")
OUTPUT_ENV = "MARKOV_MERGING_OUTPUT_DIR"

# provenance tags attached to every emitted number
EXACT = "exact-oracle"
NUMERIC = "numeric-estimate"
PAPER = "paper-constant"


@dataclass
class ExperimentConfig:
    family: str = "circle"
    p: int = 11
    N: int = 5
    two_N: int = 6
    n: int = 4
    i: int = 1
    alpha: float = 1.0
    bd_family: str = "hat"
    epsilon: float = 0.1
    grid: int = 5
    lazy: bool = False
    rho: int = 1
    beta: float = 0.5
    rule: str = "seeded-random"
    seed: int = 0
    horizon: int = 200
    analyses: list = field(default_factory=lambda: ["merging"])
    bounds: list = field(default_factory=lambda: ["singular"])
    eps_tv: float = 0.25
    eps_relsup: float = 0.25
    nash_D: float = 0.25
    nash_N: int = 0
    nash_C: float = 0.0
    ls_lower: float = 0.0
    mls_lower: float = 0.0
    search_mode: str = "sampled"
    samples: int = 20
    output_dir: str = ""

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.rule not in ("seeded-random", "fixed-cycle"):
            raise ConfigError("rule must be 'seeded-random' or 'fixed-cycle'")
        bad = [a for a in self.analyses if a not in ANALYSES]
        if bad:
            raise ConfigError(f"unknown analyses {bad}")
        bad = [b for b in self.bounds if b not in BOUND_FAMILIES]
        if bad:
            raise ConfigError(f"unknown bound families {bad}")
        if self.horizon < 1:
            raise ConfigError("horizon must be positive")
        if self.grid < 1:
            raise ConfigError("grid must be positive")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys {unknown}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_file(cls, path):
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# --- building blocks ----------------------------------------------------------------------

def kernel_set(cfg: ExperimentConfig):
    """Kernels, their names, the start measure and attached constants for a config."""
    f = cfg.family
    if f == "circle":
        ks, deltas = gallery.circle_family(cfg.p, cfg.epsilon, cfg.grid, cfg.lazy)
        names = [f"circle_d{j}" for j in range(len(ks))]
        return ks, names, Measure.uniform(cfg.p), gallery.circle(cfg.p, cfg.epsilon, cfg.lazy).constants
    if f == "hypercube":
        ks, _ = gallery.hypercube_family(cfg.two_N, cfg.epsilon, cfg.grid, lazy=True)
        g = gallery.hypercube(cfg.two_N, cfg.epsilon)
        return ks, [f"cube_d{j}" for j in range(len(ks))], g.measures["uniform"], g.constants
    if f == "metropolis_bd":
        from .stability import bd_perturbation_stability

        g = gallery.metropolis_bd(cfg.alpha, cfg.N, cfg.bd_family)
        eps = cfg.epsilon if cfg.epsilon > 0 else g.constants["epsilon"].value
        nu = g.measures["target"]
        ks = []
        for s in np.linspace(-eps, eps, cfg.grid):
            K, _, _ = bd_perturbation_stability(g.kernel, nu, float(s))
            ks.append(Kernel(K))
        return ks, [f"bd_s{j}" for j in range(len(ks))], nu, g.constants
    if f == "transpose_i_random":
        ks = [gallery.transpose_i_kernel(cfg.n, i) for i in range(1, cfg.n + 1)]
        g = gallery.transpose_i_random(cfg.n, 1)
        return ks, [f"Q{i}" for i in range(1, cfg.n + 1)], g.measures["uniform"], g.constants
    if f == "symmetric_perturbation":
        inst = [gallery.symmetric_perturbation(cfg.n, 1 + j % cfg.n, cfg.epsilon, cfg.seed + j)
                for j in range(max(cfg.grid, cfg.n))]
        return ([g.kernel for g in inst], [f"sym{j}" for j in range(len(inst))],
                inst[0].measures["uniform"], inst[0].constants)
    if f == "sticky_permutation":
        ks, pi_t, consts = gallery.sticky_sequence(cfg.n, cfg.rho, cfg.epsilon)
        return ks, [f"K{i}" for i in range(1, cfg.n + 1)], pi_t, consts
    ks = [gallery.biased_walk(cfg.N, cfg.beta, 1), gallery.biased_walk(cfg.N, cfg.beta, -1)]
    return ks, ["right", "left"], Measure.uniform(cfg.N + 1), {}


def make_schedule(cfg: ExperimentConfig, kernels, names):
    if cfg.rule == "fixed-cycle" or cfg.family == "sticky_permutation":
        return Schedule.cycle(kernels, cfg.horizon, names=names)
    return Schedule.random(kernels, cfg.horizon, cfg.seed, names=names)


def _hyp(kind, value=None):
    return {"kind": kind} if value is None else {"kind": kind, "value": value}


@dataclass
class RunContext:
    cfg: ExperimentConfig
    schedule: Schedule
    mu0: np.ndarray
    mus: np.ndarray
    constants: dict
    _sigmas: np.ndarray | None = None

    @property
    def sigmas(self):
        """``sigma_1(K_i, mu_{i-1})`` for ``i = 1..horizon``."""
        if self._sigmas is None:
            self._sigmas = np.array([second_singular_value(self.schedule.matrix(i), self.mus[i - 1])
                                     for i in range(1, self.schedule.horizon + 1)])
        return self._sigmas


def build_context(cfg: ExperimentConfig):
    ks, names, mu0, consts = kernel_set(cfg)
    sched = make_schedule(cfg, ks, names)
    mu0 = np.asarray(mu0, dtype=float)
    return RunContext(cfg, sched, mu0, evolve(mu0, sched), consts)


def exact_profiles(ctx: RunContext):
    """Per-step exact ``max_x d_2``, per-state ``d_2`` rows, and max pairwise TV."""
    d2_rows, tv = [], []
    for n, prod in iter_products(ctx.schedule):
        dev = prod / ctx.mus[n] - 1.0
        d2_rows.append(np.sqrt((dev * dev) @ ctx.mus[n]))
        tv.append(tv_pairwise(prod))
    d2_rows = np.array(d2_rows)
    return d2_rows.max(axis=1), d2_rows, np.array(tv)


def bound_reports(ctx: RunContext, which):
    """One :class:`BoundReport` per requested family, on a common horizon."""
    cfg = ctx.cfg
    H = ctx.schedule.horizon
    steps = np.arange(H + 1)
    d2max, d2rows, tv = exact_profiles(ctx)
    mu_min = float(ctx.mu0.min())
    reports = {}
    if "singular" in which:
        vals = np.array([bnd.singular_tv_bound(ctx.sigmas, mu_min, n) for n in steps])
        reports["singular"] = bnd.BoundReport("singular-product", steps, vals, d2max,
                                              {"sigma": "exact"}, "max_x d2")
    if "nash" in which:
        N = cfg.nash_N or H
        # the safe constant only depends on the smallest mass seen along the run
        lightest = ctx.mus[int(np.argmin(ctx.mus.min(axis=1)))]
        C = cfg.nash_C or nash_safe_constant(lightest, cfg.nash_D, N)
        params = NashParams(C, cfg.nash_D, N)
        vals = np.array([bnd.best_over_m(bnd.nash_d2_bound, params, int(n), ctx.sigmas) for n in steps])
        reports["nash"] = bnd.BoundReport("nash-singular", steps, vals, d2max,
                                          {"sigma": "exact", "nash_C": "user-supplied" if cfg.nash_C else "exact"},
                                          "max_x d2")
    if "ls" in which:
        if cfg.ls_lower > 0:
            ls = np.full(H, cfg.ls_lower)
            kind = "user-supplied"
        else:
            ls = np.array([log_sobolev_lower_bound(reversibilization(ctx.schedule.matrix(i), ctx.mus[i - 1]),
                                                   ctx.mus[i]).value for i in range(1, H + 1)])
            kind = "comparison-lower-bound"
        vals = np.full(H + 1, np.inf)
        exact = d2max ** 2
        for n in steps:
            worst = math.inf
            for x in range(ctx.mu0.size):
                try:
                    b = bnd.ls_d2_bound(ls, ctx.sigmas, ctx.mu0[x], int(n))
                except MergingError:
                    b = math.inf
                slack = b - d2rows[n, x] ** 2
                if slack < worst:
                    worst, vals[n], exact[n] = slack, b, d2rows[n, x] ** 2
        reports["ls"] = bnd.BoundReport("log-sobolev-d2", steps, vals, exact,
                                        {"sigma": "exact", "ls": kind}, "d2 squared")
    if "entropy" in which:
        if cfg.mls_lower > 0:
            mls = np.full(H, cfg.mls_lower)
            kind = "user-supplied"
        else:
            mls = np.array([mls_constant(reversibilization(ctx.schedule.matrix(i), ctx.mus[i - 1], "K_then_star"),
                                         ctx.mus[i - 1], starts=4, seed=cfg.seed).value for i in range(1, H + 1)])
            kind = NUMERIC
        vals = np.array([bnd.entropy_tv_bound(mls, mu_min, int(n)) for n in steps])
        reports["entropy"] = bnd.BoundReport("entropy-tv", steps, vals, tv, {"mls": kind}, "max pairwise tv")
    return reports


# --- top-level operations ------------------------------------------------------------------

@dataclass
class ReportBundle:
    config: ExperimentConfig
    merging: object = None
    sigmas: np.ndarray | None = None
    stability: object = None
    bounds: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    schedule: dict | None = None

    @property
    def failed(self):
        """Names of bound reports with exact inputs that failed to dominate."""
        return [k for k, r in self.bounds.items() if r.inputs_exact and not r.dominates()]

    def files(self):
        """``{filename: text}`` for every artifact; deterministic given the config."""
        cfg = {k: v for k, v in self.config.to_dict().items() if k != "output_dir"}
        out = {"config.json": json.dumps(cfg, indent=2, sort_keys=True) + "\n",
               "provenance.json": json.dumps(self.provenance, indent=2, sort_keys=True) + "\n"}
        if self.schedule is not None:
            out["schedule.json"] = json.dumps(self.schedule, indent=2, sort_keys=True) + "\n"
        if self.merging is not None:
            out["merging.csv"] = self.merging.to_csv()
            out["merging.json"] = self.merging.to_json() + "\n"
        if self.sigmas is not None:
            rows = ["n,sigma1"] + [f"{i + 1},{s:.17g}" for i, s in enumerate(self.sigmas)]
            out["spectral.csv"] = "\n".join(rows) + "\n"
        if self.stability is not None:
            out["stability.json"] = self.stability.to_json() + "\n"
        for name, rep in self.bounds.items():
            out[f"bound_{name}.csv"] = rep.to_csv()
            out[f"bound_{name}.json"] = rep.to_json() + "\n"
        if self.errors:
            out["errors.json"] = json.dumps(self.errors, indent=2, sort_keys=True) + "\n"
        return out

    def write(self, directory):
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        for name, text in self.files().items():
            (d / name).write_text(text)
        return d


def _output_dir(cfg):
    return os.environ.get(OUTPUT_ENV) or cfg.output_dir


def run(cfg: ExperimentConfig, write=True):
    """Run every requested analysis; a failing analysis is recorded and the rest continue."""
    ctx = build_context(cfg)
    bundle = ReportBundle(cfg, schedule=schedule_to_dict(ctx.schedule))
    prov = bundle.provenance
    if "merging" in cfg.analyses:
        try:
            bundle.merging = merging_report(ctx.schedule, cfg.eps_tv, cfg.eps_relsup, cfg.horizon, stop=False)
            prov["merging.max_tv"] = EXACT
            prov["merging.max_relsup"] = EXACT
            prov["merging.crossings"] = EXACT
        except MergingError as exc:
            bundle.errors["merging"] = str(exc)
    if "spectral" in cfg.analyses:
        try:
            bundle.sigmas = ctx.sigmas
            prov["spectral.sigma1"] = EXACT
        except MergingError as exc:
            bundle.errors["spectral"] = str(exc)
    if "stability" in cfg.analyses:
        try:
            bundle.stability = check_c_stability(ctx.schedule, ctx.mu0)
            prov["stability.observed_c"] = EXACT
        except MergingError as exc:
            bundle.errors["stability"] = str(exc)
    if "bounds" in cfg.analyses:
        try:
            bundle.bounds = bound_reports(ctx, cfg.bounds)
            for name, rep in bundle.bounds.items():
                prov[f"bound_{name}.exact"] = EXACT
                exact_inputs = rep.inputs_exact
                prov[f"bound_{name}.bound"] = EXACT if exact_inputs else NUMERIC
        except MergingError as exc:
            bundle.errors["bounds"] = str(exc)
    for key, const in ctx.constants.items():
        prov[f"constant.{key}"] = PAPER if const.provenance == "paper" else EXACT
    out = _output_dir(cfg)
    if write and out:
        bundle.write(out)
    return bundle


def compare_bounds(cfg: ExperimentConfig):
    """Rank bound families by how close their implied merging time is to the exact one.

    Every family is put on the common scale of max pairwise TV (each bounds
    it), inverted at ``eps_tv``, and compared with the exact ``T_TV``.
    """
    if not cfg.bounds:
        raise ConfigError("compare-bounds needs at least one bound family")
    ctx = build_context(cfg)
    reports = bound_reports(ctx, cfg.bounds)
    tv = exact_profiles(ctx)[2]
    exact_t = bnd.first_below(tv, cfg.eps_tv)
    rows = []
    for name, rep in reports.items():
        vals = np.sqrt(rep.bound) if name == "ls" else rep.bound
        t = bnd.first_below(vals, cfg.eps_tv)
        ratio = (t / exact_t) if (t is not None and exact_t) else math.inf
        rows.append({"family": cfg.family, "bound": name, "bound_time": t, "exact_time": exact_t,
                     "tightness": ratio, "min_slack": rep.min_slack(),
                     "inputs": "exact" if rep.inputs_exact else NUMERIC})
    rows.sort(key=lambda r: (r["tightness"], r["bound"]))
    return rows, reports


def compare_table_csv(rows):
    lines = ["family,bound,bound_time,exact_time,tightness,min_slack,inputs"]
    for r in rows:
        bt = "" if r["bound_time"] is None else r["bound_time"]
        et = "" if r["exact_time"] is None else r["exact_time"]
        lines.append(f"{r['family']},{r['bound']},{bt},{et},{r['tightness']:.17g},{r['min_slack']:.17g},{r['inputs']}")
    return "\n".join(lines) + "\n"


def adversary(cfg: ExperimentConfig):
    """Search a kernel set for unstable or slow-merging schedules.

    Returns the stability certificate from ``search_c_stability`` and the
    sampled schedule with the largest relative-sup merging time.
    """
    if cfg.samples < 1:
        raise ConfigError("adversary needs a positive sample budget")
    ks, names, mu0, _ = kernel_set(cfg)
    cert = search_c_stability(ks, mu0, cfg.horizon if cfg.search_mode != "exhaustive" else min(cfg.horizon, 10),
                              cfg.search_mode, samples=cfg.samples, seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    candidates = [Schedule.constant(k, cfg.horizon) for k in ks]
    if len(ks) > 1:
        candidates.append(Schedule.cycle(ks, cfg.horizon, names=names))
    candidates += [Schedule.random(ks, cfg.horizon, int(rng.integers(2**63)), names=names)
                   for _ in range(cfg.samples)]
    worst, worst_sched = -1, None
    for s in candidates:
        t = merging_report(s, eps_relsup=cfg.eps_relsup, horizon=cfg.horizon).time
        t = cfg.horizon + 1 if t is None else t
        if t > worst:
            worst, worst_sched = t, s
    return {
        "stability": cert.to_dict(),
        "worst_merging_time": worst if worst <= cfg.horizon else None,
        "worst_schedule": {**schedule_to_dict(worst_sched, names), "indices": [int(j) for j in worst_sched.indices]},
        "provenance": {"stability": EXACT if cert.mode != "envelope" else "outer-bound",
                       "worst_merging_time": EXACT},
    }


def write_gallery(instance, directory):
    """Kernel and measure CSVs plus a manifest JSON for a gallery instance."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for j, K in enumerate(instance.kernels):
        write_kernel(d / f"kernel{j}.csv", K)
    for name, mu in instance.measures.items():
        write_measure(d / f"{name}.csv", mu)
    (d / "manifest.json").write_text(json.dumps(instance.manifest(), indent=2, sort_keys=True) + "\n")
    return d
