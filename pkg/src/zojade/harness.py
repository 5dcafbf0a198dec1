"""Experiment configuration, runner, bound-verification suite, CSV output.

A JSON config file describes one experiment: a topology, a problem
instance, a probe step mu, a per-agent query budget, a list of seeds and
a list of algorithm entries.  All defaults are explicit in
:data:`DEFAULTS`; unknown keys anywhere in the file are rejected.  The
sha256 hash of the fully defaulted config is stamped into every output
file, and re-running a config reproduces every CSV byte for byte.

Schema (defaults in parentheses; `(*)` marks values that are package
defaults rather than anything prescribed by the problem setting):

    topology    name: complete | ring | path | grid | erdos_renyi
                n: agent count; p, seed: erdos_renyi only
    instance    family: separable_quadratic | ridge_synthetic |
                        synthetic_classification | ridge_csv |
                        logistic_csv | quartic
                plus family parameters, see _INSTANCE_SCHEMAS; the agent
                count always comes from the topology
    mu          finite-difference step (*)
    budget      max queries per agent
    seeds       list of integers
    record_every  trace stride (10)
    x0_scale    scale of the seeded initial iterates (1.0)
    out_dir     output directory ("results")
    algorithms  list of {name, label?, epsilon? (0.05 *), z_floor? (1e-8),
                eta? (0.1 *), mu?}

Outputs: one `<label>_seed<seed>.csv` trace per run and one
`<label>_aggregate.csv` per algorithm entry with columns
(queries, ef_mean, ef_std).
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .algorithms import (
    ALGORITHMS,
    BaselineConfig,
    JadeConfig,
    draw_initial_iterates,
    gradient_tracking_step,
    initial_state,
    run,
)
from .errors import ConfigurationError, InstanceConstructionError
from .graphs import ConsensusMatrix, metropolis_hastings, spectral_gap, topology_from_spec
from .metrics import (
    TRACE_COLUMNS,
    AggregateCurve,
    RunTrace,
    aggregate_traces,
    fit_exponential_rate,
)
from .objectives import (
    ProblemInstance,
    load_csv,
    logistic_instance,
    quartic_instance,
    ridge_instance_from_shards,
    ridge_synthetic,
    separable_quadratic_instance,
    synthetic_classification,
)
from .oracle import (
    BlackBoxObjective,
    admissible_mu,
    descent_coefficient,
    estimate_both,
    estimate_gradient,
    gradient_lipschitz_bound,
)
from .rng import Xoshiro256

DEFAULTS = {
    "record_every": 10,
    "x0_scale": 1.0,
    "out_dir": "results",
}

_ALGO_DEFAULTS = {
    "zo_jade": {"epsilon": 0.05, "z_floor": 1e-8},
    "gradient_tracking": {"eta": 0.1},
    "consensus_gd": {"eta": 0.1},
}

_TOPOLOGY_KEYS = {"name", "n", "p", "seed"}

_INSTANCE_SCHEMAS = {
    "separable_quadratic": {"d", "seed", "curvature_range", "b_scale"},
    "ridge_synthetic": {
        "d",
        "per_agent",
        "seed",
        "lambda",
        "noise",
        "scale_spread",
        "standardize",
    },
    "synthetic_classification": {
        "d",
        "per_agent",
        "seed",
        "w",
        "separation",
        "scale_spread",
        "standardize",
    },
    "ridge_csv": {"path", "lambda", "has_header", "standardize"},
    "logistic_csv": {"path", "w", "has_header", "standardize"},
    "quartic": {"d", "quartic", "quad", "b_mean", "b_spread", "box"},
}

_TOP_KEYS = {
    "topology",
    "instance",
    "mu",
    "budget",
    "seeds",
    "record_every",
    "x0_scale",
    "out_dir",
    "algorithms",
}


def _reject_unknown(mapping: dict, allowed: set, context: str) -> None:
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        raise ConfigurationError(f"{context}: unknown keys {unknown}")


def _require(mapping: dict, keys: list, context: str) -> None:
    missing = [k for k in keys if k not in mapping]
    if missing:
        raise ConfigurationError(f"{context}: missing required keys {missing}")


@dataclass
class ExperimentConfig:
    """Validated experiment description with all defaults applied."""

    data: dict
    config_hash: str = ""

    def __post_init__(self):
        self.data = _validate_config(self.data)
        canonical = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        self.config_hash = hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        return cls(raw)

    @property
    def seeds(self) -> list:
        return list(self.data["seeds"])

    @property
    def out_dir(self) -> str:
        return self.data["out_dir"]


def _validate_config(raw: dict) -> dict:
    if not isinstance(raw, dict):
        raise ConfigurationError("config root must be a JSON object")
    cfg = copy.deepcopy(raw)
    _reject_unknown(cfg, _TOP_KEYS, "config")
    _require(cfg, ["topology", "instance", "mu", "budget", "seeds", "algorithms"], "config")
    for key, default in DEFAULTS.items():
        cfg.setdefault(key, default)

    topo = cfg["topology"]
    if not isinstance(topo, dict):
        raise ConfigurationError("topology must be an object")
    _reject_unknown(topo, _TOPOLOGY_KEYS, "topology")
    _require(topo, ["name", "n"], "topology")

    inst = cfg["instance"]
    if not isinstance(inst, dict):
        raise ConfigurationError("instance must be an object")
    family = inst.get("family")
    if family not in _INSTANCE_SCHEMAS:
        raise ConfigurationError(
            f"instance.family must be one of {sorted(_INSTANCE_SCHEMAS)}, got {family!r}"
        )
    _reject_unknown(inst, _INSTANCE_SCHEMAS[family] | {"family"}, f"instance[{family}]")

    if not isinstance(cfg["seeds"], list) or not cfg["seeds"]:
        raise ConfigurationError("seeds must be a non-empty list of integers")
    if not all(isinstance(s, int) for s in cfg["seeds"]):
        raise ConfigurationError("seeds must be integers")
    if not isinstance(cfg["budget"], int) or cfg["budget"] <= 0:
        raise ConfigurationError("budget must be a positive integer")
    if not isinstance(cfg["mu"], (int, float)) or cfg["mu"] <= 0:
        raise ConfigurationError("mu must be a positive number")
    if not isinstance(cfg["record_every"], int) or cfg["record_every"] < 1:
        raise ConfigurationError("record_every must be a positive integer")

    algos = cfg["algorithms"]
    if not isinstance(algos, list) or not algos:
        raise ConfigurationError("algorithms must be a non-empty list")
    labels = set()
    for entry in algos:
        if not isinstance(entry, dict):
            raise ConfigurationError("each algorithm entry must be an object")
        name = entry.get("name")
        if name not in ALGORITHMS:
            raise ConfigurationError(
                f"algorithm name must be one of {sorted(ALGORITHMS)}, got {name!r}"
            )
        allowed = {"name", "label", "mu"} | set(_ALGO_DEFAULTS[name])
        _reject_unknown(entry, allowed, f"algorithms[{name}]")
        for key, default in _ALGO_DEFAULTS[name].items():
            entry.setdefault(key, default)
        entry.setdefault("label", name)
        if entry["label"] in labels:
            raise ConfigurationError(f"duplicate algorithm label '{entry['label']}'")
        labels.add(entry["label"])
    return cfg


def build_topology(cfg: ExperimentConfig) -> tuple:
    topo = cfg.data["topology"]
    graph = topology_from_spec(
        topo["name"], topo["n"], p=topo.get("p"), seed=topo.get("seed")
    )
    return graph, metropolis_hastings(graph)


def build_instance(cfg: ExperimentConfig) -> ProblemInstance:
    inst = cfg.data["instance"]
    family = inst["family"]
    n = cfg.data["topology"]["n"]
    if family == "separable_quadratic":
        return separable_quadratic_instance(
            n,
            inst["d"],
            inst["seed"],
            curvature_range=tuple(inst.get("curvature_range", (0.5, 4.0))),
            b_scale=inst.get("b_scale", 1.0),
        )
    if family == "ridge_synthetic":
        return ridge_synthetic(
            inst["d"],
            inst["per_agent"],
            n,
            inst["seed"],
            lam=inst.get("lambda", 0.1),
            noise=inst.get("noise", 0.1),
            scale_spread=inst.get("scale_spread", 10.0),
            standardize=inst.get("standardize", False),
        )
    if family == "synthetic_classification":
        return synthetic_classification(
            inst["d"],
            inst["per_agent"],
            n,
            inst["seed"],
            w=inst.get("w", 0.1),
            separation=inst.get("separation", 2.0),
            scale_spread=inst.get("scale_spread", 1.0),
            standardize=inst.get("standardize", False),
        )
    if family == "ridge_csv":
        features, targets = load_csv(inst["path"], has_header=inst.get("has_header", False))
        return ridge_instance_from_shards(
            features,
            targets,
            n,
            lam=inst.get("lambda", 0.1),
            standardize=inst.get("standardize", True),
        )
    if family == "logistic_csv":
        features, labels = load_csv(inst["path"], has_header=inst.get("has_header", False))
        return logistic_instance(
            features,
            labels,
            n,
            w=inst.get("w", 0.1),
            standardize=inst.get("standardize", True),
        )
    if family == "quartic":
        return quartic_instance(
            n,
            d=inst.get("d", 1),
            quartic=inst.get("quartic", 1.0),
            quad=inst.get("quad", 1.0),
            b_mean=inst.get("b_mean", -1.0),
            b_spread=inst.get("b_spread", 0.5),
            box=inst.get("box", 1.5),
        )
    raise ConfigurationError(f"unhandled instance family {family!r}")


def algorithm_config(cfg: ExperimentConfig, entry: dict):
    """Materialize the per-run config for one algorithm entry."""
    mu = entry.get("mu", cfg.data["mu"])
    common = dict(
        mu=mu,
        budget=cfg.data["budget"],
        record_every=cfg.data["record_every"],
        x0_scale=cfg.data["x0_scale"],
    )
    if entry["name"] == "zo_jade":
        return JadeConfig(epsilon=entry["epsilon"], z_floor=entry["z_floor"], **common)
    return BaselineConfig(eta=entry["eta"], **common)


# ---------------------------------------------------------------------------
# CSV output


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_trace_csv(path: str, trace: RunTrace) -> None:
    lines = [
        f"# algorithm={trace.algorithm} label={trace.label} seed={trace.seed} "
        f"config_hash={trace.config_hash} ef_mode={trace.ef_mode} "
        f"failed={trace.failed} diagnostic={trace.diagnostic!r}"
    ]
    lines.append(",".join(TRACE_COLUMNS))
    for r in trace.rows:
        lines.append(
            ",".join(
                (
                    str(r.iteration),
                    str(r.queries_per_agent),
                    _fmt(r.e_f),
                    _fmt(r.consensus_error),
                    _fmt(r.tracking_residual_y),
                    _fmt(r.tracking_residual_z),
                    str(r.clamp_count),
                )
            )
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_aggregate_csv(path: str, curve: AggregateCurve) -> None:
    lines = [
        f"# label={curve.label} config_hash={curve.config_hash} "
        f"seeds={'|'.join(str(s) for s in curve.seeds)}"
    ]
    lines.append("queries,ef_mean,ef_std")
    for q, mean, std in zip(curve.queries, curve.ef_mean, curve.ef_std):
        lines.append(f"{int(q)},{_fmt(mean)},{_fmt(std)}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trace_csv(path: str) -> tuple:
    """Read back (iterations, e_f) from a trace CSV, for rate fitting."""
    iterations, efs = [], []
    with open(path, encoding="utf-8") as fh:
        rows = [line.strip() for line in fh if line.strip()]
    rows = [r for r in rows if not r.startswith("#")]
    if not rows or rows[0].split(",")[:3] != ["iteration", "queries_per_agent", "e_f"]:
        raise ConfigurationError(f"{path}: not a trace CSV")
    for row in rows[1:]:
        parts = row.split(",")
        iterations.append(float(parts[0]))
        efs.append(float(parts[2]))
    return np.array(iterations), np.array(efs)


# ---------------------------------------------------------------------------
# Experiment driver


@dataclass
class ExperimentResult:
    traces: dict
    curves: dict
    failures: list
    out_dir: str

    @property
    def ok(self) -> bool:
        return not self.failures


def run_experiment(
    cfg: ExperimentConfig,
    out_dir: str | None = None,
    seeds: list | None = None,
    quiet: bool = False,
) -> ExperimentResult:
    """Run every (algorithm, seed) replica of a config and write the CSVs.

    Initial iterates depend only on the seed, so all algorithms see
    identical starting points on each seed.  Returns the traces, the
    per-algorithm aggregate curves, and the list of failed runs.  Failed
    runs keep their trace files but are left out of the aggregate curve;
    if every seed of an algorithm failed, no aggregate is written.
    """
    out = out_dir if out_dir is not None else cfg.out_dir
    seed_list = seeds if seeds is not None else cfg.seeds
    os.makedirs(out, exist_ok=True)
    _, P = build_topology(cfg)
    instance = build_instance(cfg)

    traces: dict = {}
    curves: dict = {}
    failures: list = []
    for entry in cfg.data["algorithms"]:
        label = entry["label"]
        algo_cfg = algorithm_config(cfg, entry)
        traces[label] = {}
        for seed in seed_list:
            trace = run(entry["name"], instance, P, algo_cfg, seed, label=label)
            trace.config_hash = cfg.config_hash
            traces[label][seed] = trace
            write_trace_csv(os.path.join(out, f"{label}_seed{seed}.csv"), trace)
            if trace.failed:
                failures.append((label, seed, trace.diagnostic))
        completed = [traces[label][s] for s in seed_list if not traces[label][s].failed]
        if completed:
            curve = aggregate_traces(label, completed)
            curves[label] = curve
            write_aggregate_csv(os.path.join(out, f"{label}_aggregate.csv"), curve)
            if not quiet:
                final = curve.ef_mean[-1]
                print(
                    f"{label}: {len(completed)}/{len(seed_list)} run(s), "
                    f"final mean e_f = {final:.3e}, "
                    f"queries/agent = {int(curve.queries[-1])}"
                )
        elif not quiet:
            print(f"{label}: all {len(seed_list)} run(s) failed, no aggregate written")
    if not quiet:
        status = "OK" if not failures else f"{len(failures)} FAILED RUN(S)"
        print(f"experiment {cfg.config_hash}: {status}, outputs in {out}")
    return ExperimentResult(traces=traces, curves=curves, failures=failures, out_dir=out)


def queries_to_threshold(trace: RunTrace, threshold: float) -> float:
    """First recorded per-agent query count at which e_f <= threshold (inf if never)."""
    for row in trace.rows:
        if row.e_f <= threshold:
            return float(row.queries_per_agent)
    return math.inf


# ---------------------------------------------------------------------------
# Quantitative checks of the theory


def solve_estimator_zero(instance: ProblemInstance, mu: float) -> np.ndarray:
    """Find the unique zero of the gradient estimate of the averaged cost.

    For quadratics the estimate is exact and the zero is x*.  Otherwise a
    Newton iteration with the analytic Hessian as Jacobian proxy (the true
    Jacobian differs from it by O(mu^2)) converges from x*.
    """
    consts = instance.constants
    if (consts.L2 == 0.0 and consts.L3 == 0.0) or mu == 0.0:
        return instance.x_star.copy()
    gb = instance.global_black_box()
    x = instance.x_star.astype(float).copy()
    for _ in range(200):
        F = estimate_gradient(gb, x, mu)
        if np.max(np.abs(F)) <= 1e-13 * (1.0 + float(np.linalg.norm(x))):
            return x
        x = x - np.linalg.solve(instance.global_hessian(x), F)
    raise InstanceConstructionError(
        f"estimator-zero solve did not converge for mu={mu} on {instance.name}"
    )


@dataclass
class GammaScalingReport:
    """Converged distances to x* for a halving sequence of probe steps."""

    mus: list
    distances: list
    ratios: list
    excluded: list = field(default_factory=list)


def gamma_mu_scaling_check(
    instance: ProblemInstance,
    mu_list: list,
    cfg: JadeConfig,
    P: ConsensusMatrix | None = None,
    seed: int = 1,
    conv_tol: float = 1e-9,
) -> GammaScalingReport:
    """Run the tracking algorithm to stationarity per mu and measure
    how the converged distance to x* shrinks as mu halves.

    Preconditions: at least two mu values, consecutive values halving,
    all within the admissible range of the instance constants.  Runs
    whose final mean iterate does not zero the gradient estimate (to
    `conv_tol`) are excluded with a diagnostic.
    """
    if len(mu_list) < 2:
        raise ConfigurationError("mu scaling check needs at least two mu values")
    for a, b in zip(mu_list, mu_list[1:]):
        if abs(a / b - 2.0) > 1e-9:
            raise ConfigurationError(f"mu values must halve, got {a} then {b}")
    consts = instance.constants
    consts.require("m", "L1", "L3")
    limit = admissible_mu(consts.m, consts.L1, consts.L3, instance.d)
    for mu in mu_list:
        if mu > limit:
            raise ConfigurationError(f"mu={mu} exceeds admissible value {limit:.6g}")
    if P is None:
        P = metropolis_hastings(topology_from_spec("complete", instance.n))

    distances = []
    converged = []
    excluded = []
    gb = instance.global_black_box()
    for mu in mu_list:
        trace = run("zo_jade", instance, P, replace(cfg, mu=mu), seed)
        x_bar = trace.final_x.mean(axis=0)
        if trace.failed:
            excluded.append((mu, f"run failed: {trace.diagnostic}"))
            converged.append(False)
        else:
            grad_norm = float(np.linalg.norm(estimate_gradient(gb, x_bar, mu)))
            ok = grad_norm <= conv_tol * (1.0 + float(np.linalg.norm(x_bar)))
            converged.append(ok)
            if not ok:
                excluded.append((mu, f"not stationary: ||grad est|| = {grad_norm:.3e}"))
        distances.append(float(np.linalg.norm(x_bar - instance.x_star)))
    ratios = [
        distances[k] / distances[k + 1]
        for k in range(len(mu_list) - 1)
        if converged[k] and converged[k + 1] and distances[k + 1] > 0.0
    ]
    return GammaScalingReport(
        mus=list(mu_list), distances=distances, ratios=ratios, excluded=excluded
    )


@dataclass
class LyapunovReport:
    """Outcome of the squared-gradient bound battery at sampled points."""

    mu: float
    gamma: np.ndarray
    alpha: float
    points: int
    upper_failures: int
    lower_failures: int
    dv_norm_failures: int
    descent_failures: int
    details: list = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return (
            self.upper_failures
            + self.lower_failures
            + self.dv_norm_failures
            + self.descent_failures
            == 0
        )


def lyapunov_bounds_check(
    instance: ProblemInstance,
    points,
    mu: float,
    seed: int = 2024,
    radius: float = 1.0,
) -> LyapunovReport:
    """Check the four squared-gradient-estimate bounds at sample points.

    With V(x) = ||grad_est(x)||^2, G the zero of the estimate, dist =
    ||x - G|| and K = L1 + mu sqrt(d) L2 / 2, the checks are

        V <= K^2 dist^2
        V >= (m^2 - 2 L1 u - u^2) dist^2          with u = d mu^2 L3 / 6
        ||dV/dx|| <= (2 L1 + mu L3 d / 3) K dist
        dV/dx . phi <= alpha(mu) V                with phi = -grad_est / hdiag_est

    dV/dx is itself only available through function queries, so it is
    approximated by central differences of V with inner step mu/100 and
    all tolerances are inflated by a Richardson estimate of the
    differencing error.  Steps above the admissible mu are rejected.
    """
    consts = instance.constants
    consts.require("m", "L1", "L2", "L3")
    m, L1, L2, L3 = consts.m, consts.L1, consts.L2, consts.L3
    d = instance.d
    limit = admissible_mu(m, L1, L3, d)
    if mu > limit:
        raise ConfigurationError(
            f"mu={mu} exceeds the admissible value {limit:.6g} for this instance"
        )
    gamma = solve_estimator_zero(instance, mu)
    K = gradient_lipschitz_bound(L1, L2, mu, d)
    u = d * mu * mu * L3 / 6.0
    lower_coef = m * m - 2.0 * L1 * u - u * u
    dv_coef = (2.0 * L1 + mu * L3 * d / 3.0) * K
    alpha = descent_coefficient(mu, m, L1, L3, d)

    if isinstance(points, (int, np.integer)):
        rng = Xoshiro256(seed)
        samples = gamma + radius * rng.normals(int(points), d)
    else:
        samples = np.atleast_2d(np.asarray(points, dtype=float))

    gb = instance.global_black_box()

    def V(x: np.ndarray) -> float:
        grad = estimate_gradient(gb, x, mu)
        return float(grad @ grad)

    def fd_grad_of_V(x: np.ndarray, h: float) -> np.ndarray:
        out = np.empty(d)
        for k in range(d):
            e = np.zeros(d)
            e[k] = h
            out[k] = (V(x + e) - V(x - e)) / (2.0 * h)
        return out

    report = LyapunovReport(
        mu=mu,
        gamma=gamma,
        alpha=alpha,
        points=len(samples),
        upper_failures=0,
        lower_failures=0,
        dv_norm_failures=0,
        descent_failures=0,
    )
    mu_in = mu / 100.0
    for x in samples:
        both = estimate_both(gb, x, mu)
        grad = both.grad_estimate
        hdiag = both.hessian_diag_estimate
        v = float(grad @ grad)
        dist2 = float(np.sum((x - gamma) ** 2))
        dist = math.sqrt(dist2)

        slack = 1e-9 * (1.0 + v + K * K * dist2)
        if v > K * K * dist2 + slack:
            report.upper_failures += 1
            report.details.append(f"upper bound failed at {x.tolist()}")
        if v < lower_coef * dist2 - slack:
            report.lower_failures += 1
            report.details.append(f"lower bound failed at {x.tolist()}")

        coarse = fd_grad_of_V(x, mu_in)
        fine = fd_grad_of_V(x, mu_in / 2.0)
        fd_error = 4.0 / 3.0 * float(np.linalg.norm(coarse - fine)) + 1e-10 * (
            1.0 + float(np.linalg.norm(fine))
        )
        dv = fine
        dv_norm = float(np.linalg.norm(dv))
        if dv_norm > dv_coef * dist + fd_error + 1e-9 * (1.0 + dv_coef * dist):
            report.dv_norm_failures += 1
            report.details.append(f"derivative-norm bound failed at {x.tolist()}")

        if np.any(hdiag <= 0.0):
            report.descent_failures += 1
            report.details.append(f"curvature estimate not positive at {x.tolist()}")
            continue
        phi = -grad / hdiag
        q = float(dv @ phi)
        q_slack = fd_error * float(np.linalg.norm(phi)) + 1e-9 * (1.0 + abs(alpha) * v)
        if q > alpha * v + q_slack:
            report.descent_failures += 1
            report.details.append(f"descent bound failed at {x.tolist()}")
    return report


# ---------------------------------------------------------------------------
# Verification suite


@dataclass
class VerifyReport:
    checks: list = field(default_factory=list)

    def add(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append({"name": name, "passed": bool(passed), "detail": detail})

    @property
    def all_passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def to_json(self) -> str:
        return json.dumps(
            {"all_passed": self.all_passed, "checks": self.checks}, indent=2
        )


def _check_consensus_matrices(report: VerifyReport) -> None:
    worst = 0.0
    for name, n in [
        ("complete", 1),
        ("complete", 2),
        ("complete", 7),
        ("ring", 8),
        ("path", 9),
        ("grid", 12),
    ]:
        graph = topology_from_spec(name, n)
        P = metropolis_hastings(graph)
        problems = P.check(graph)
        gap = spectral_gap(P)
        if problems or not gap < 1.0:
            report.add("consensus_matrix_invariants", False, f"{name}({n}): {problems}")
            return
        worst = max(worst, gap)
    rng = Xoshiro256(7)
    for _ in range(25):
        n = 2 + int(rng.uniform() * 20)
        p = 0.2 + 0.6 * rng.uniform()
        graph = topology_from_spec("erdos_renyi", n, p=p, seed=int(rng.uniform() * 1e6))
        P = metropolis_hastings(graph)
        if P.check(graph) or not spectral_gap(P) < 1.0:
            report.add("consensus_matrix_invariants", False, f"random graph n={n}")
            return
    report.add("consensus_matrix_invariants", True, f"max gap seen {worst:.4f}")


def _check_matrix_checker_catches_corruption(report: VerifyReport) -> None:
    # negative control: a deliberately broken matrix must be flagged
    P = metropolis_hastings(topology_from_spec("ring", 5))
    bad = P.weights.copy()
    bad[0, 0] += 0.1
    problems = ConsensusMatrix(n=5, weights=bad).check()
    report.add(
        "matrix_checker_negative_control",
        any("row sums" in p for p in problems),
        "; ".join(problems) or "corruption not detected",
    )


def _check_objective_instances(report: VerifyReport) -> None:
    from .metrics import loss_metric
    from .objectives import shard_round_robin
    from .oracle import gradient_error_bound

    # sharding conserves and partitions the rows
    shards = shard_round_robin(53, 7)
    flat = np.concatenate(shards)
    report.add(
        "sharding_conservation",
        len(flat) == 53 and len(np.unique(flat)) == 53,
    )
    rng = Xoshiro256(71)
    ok_grad = True
    ok_opt = True
    ok_consts = True
    for inst in (
        ridge_synthetic(3, 6, 4, seed=61),
        synthetic_classification(3, 8, 4, seed=62, w=0.2),
        quartic_instance(4),
    ):
        c = inst.constants
        if inst.name.startswith("synthetic-ridge") and not (c.L2 == 0.0 and c.L3 == 0.0):
            ok_consts = False
        if inst.name.startswith("synthetic-logistic") and c.m != 0.2:
            ok_consts = False
        gb = inst.global_black_box()
        for _ in range(20):
            x = 0.6 * rng.normals(inst.d)
            mu = 0.01 + 0.02 * rng.uniform()
            est = estimate_gradient(gb, x, mu)
            true = inst.global_gradient(x)
            bound = gradient_error_bound(c.L2, mu, inst.d)
            if np.linalg.norm(est - true) > bound + 1e-9 * (1.0 + np.linalg.norm(true)):
                ok_grad = False
            delta = rng.normals(inst.d)
            delta /= max(np.linalg.norm(delta), 1.0)
            if inst.global_value(inst.x_star + delta) < inst.f_star - 1e-12:
                ok_opt = False
        # batch-shape rounding (gemv vs gemm) can leave one-ulp residue
        if abs(loss_metric(inst, np.tile(inst.x_star, (inst.n, 1)))) > 1e-12:
            ok_opt = False
    report.add("analytic_vs_zo_gradients", ok_grad)
    report.add("ground_truth_optimality", ok_opt)
    report.add("reported_constants", ok_consts)


def _check_averaging_contraction(report: VerifyReport) -> None:
    graph = topology_from_spec("ring", 11)
    P = metropolis_hastings(graph)
    gap = spectral_gap(P)
    rng = Xoshiro256(3)
    x = rng.normals(11)
    mean = x.mean()
    deviation = np.linalg.norm(x - mean)
    ok = True
    for _ in range(100):
        x = P.weights @ x
        deviation = deviation * gap
        if np.linalg.norm(x - mean) > deviation + 1e-9:
            ok = False
            break
    report.add("averaging_contraction", ok, f"gap {gap:.4f}")


def _check_oracle_accounting(report: VerifyReport) -> None:
    for d in (1, 2, 5, 17, 50):
        obj = BlackBoxObjective(lambda X: np.sum(X * X, axis=1), d)
        estimate_gradient(obj, np.zeros(d), 0.1)
        if obj.query_count != 2 * d:
            report.add("oracle_query_accounting", False, f"gradient d={d}")
            return
        obj = BlackBoxObjective(lambda X: np.sum(X * X, axis=1), d)
        out = estimate_both(obj, np.zeros(d), 0.1)
        if obj.query_count != 2 * d + 1 or out.queries_used != 2 * d + 1:
            report.add("oracle_query_accounting", False, f"joint d={d}")
            return
    report.add("oracle_query_accounting", True)


def random_dominant_quadratic(rng: Xoshiro256, d: int) -> tuple:
    """A symmetric diagonally dominant quadratic at moderate scale.

    Kept at O(1) coefficients so that float cancellation in the second
    difference stays far below the exactness tolerances even at mu = 1e-3.
    """
    R = 0.5 * rng.normals(d, d)
    A = 0.5 * (R + R.T)
    np.fill_diagonal(A, 0.0)
    A += np.diag(np.abs(A).sum(axis=1) + 1.0 + rng.uniforms(d))
    b = rng.normals(d)
    c = float(rng.uniform() - 0.5)
    return A, b, c


def _check_quadratic_exactness(report: VerifyReport) -> None:
    rng = Xoshiro256(11)
    worst = 0.0
    for _ in range(30):
        d = 1 + int(rng.uniform() * 12)
        A, b, c = random_dominant_quadratic(rng, d)
        x = 0.5 * rng.normals(d)
        obj = BlackBoxObjective(
            lambda X, A=A, b=b, c=c: 0.5 * np.einsum("ij,ij->i", X, X @ A) + X @ b + c, d
        )
        for mu in (1e-1, 1e-3):
            out = estimate_both(obj, x, mu)
            g_err = np.linalg.norm(out.grad_estimate - (A @ x + b)) / np.linalg.norm(
                A @ x + b
            )
            h_err = np.linalg.norm(out.hessian_diag_estimate - np.diag(A)) / np.linalg.norm(
                np.diag(A)
            )
            worst = max(worst, g_err, h_err)
    report.add("quadratic_exactness", worst <= 1e-9, f"worst relative error {worst:.2e}")


def _check_error_bounds(report: VerifyReport) -> None:
    cube = BlackBoxObjective(lambda X: X[:, 0] ** 3, 1)
    quart = BlackBoxObjective(lambda X: X[:, 0] ** 4, 1)
    ok = True
    for mu in (0.2, 0.1, 0.05):
        g = estimate_gradient(cube, np.array([1.0]), mu)[0]
        if abs((g - 3.0) - mu * mu) > 1e-9:
            ok = False
        h = estimate_both(quart, np.array([0.0]), mu).hessian_diag_estimate[0]
        if abs(h - 2.0 * mu * mu) > 1e-9:
            ok = False
    report.add("error_bound_tightness", ok)


def _check_tracking_and_fixed_point(report: VerifyReport) -> None:
    instance = separable_quadratic_instance(8, 4, seed=5)
    P = metropolis_hastings(topology_from_spec("ring", 8))
    cfg = JadeConfig(mu=0.05, epsilon=0.2, budget=9 * 400, record_every=5)
    trace = run("zo_jade", instance, P, cfg, seed=1)
    res = max(max(r.tracking_residual_y, r.tracking_residual_z) for r in trace.rows)
    if trace.failed or res > 1e-9:
        report.add("tracking_conservation", False, f"residual {res:.2e}")
    else:
        report.add("tracking_conservation", True, f"max residual {res:.2e}")
    gap = float(np.max(np.abs(trace.final_x - instance.x_star)))
    report.add("separable_fixed_point", gap <= 1e-8, f"|x - x*| = {gap:.2e}")


def _check_mu_independence(report: VerifyReport) -> None:
    instance = separable_quadratic_instance(5, 3, seed=9)
    P = metropolis_hastings(topology_from_spec("complete", 5))
    final = []
    for mu in (1e-1, 1e-4):
        cfg = JadeConfig(mu=mu, epsilon=0.3, budget=7 * 300, record_every=50)
        final.append(run("zo_jade", instance, P, cfg, seed=4).final_x)
    gap = float(np.max(np.abs(final[0] - final[1])))
    report.add("mu_independence_quadratic", gap <= 1e-8, f"trajectory gap {gap:.2e}")


def _check_baseline_sanity(report: VerifyReport) -> None:
    instance = separable_quadratic_instance(6, 3, seed=2)
    P = metropolis_hastings(topology_from_spec("ring", 6))
    cfg = BaselineConfig(mu=0.05, eta=0.15, budget=6 * 500, record_every=10)
    t1 = run("gradient_tracking", instance, P, cfg, seed=3)
    t2 = run("consensus_gd", instance, P, cfg, seed=3)
    ok = not t1.failed and not t2.failed and t1.rows[-1].e_f < t1.rows[0].e_f
    detail = f"gt final e_f {t1.rows[-1].e_f:.2e}, cgd final e_f {t2.rows[-1].e_f:.2e}"
    report.add("baseline_runs", ok, detail)
    # Conservation for the tracking baseline, measured against the summand
    # magnitude: the node sum of the tracked gradients itself vanishes at
    # the optimum, so the trace's sum-relative ratio is only meaningful
    # pre-convergence.
    state = initial_state(draw_initial_iterates(3, 6, 3, 1.0), P)
    inst = instance.fresh()
    worst = 0.0
    for _ in range(50):
        state = gradient_tracking_step(state, inst, cfg)
        gap = float(np.max(np.abs(state.y.sum(axis=0) - state.g.sum(axis=0))))
        scale = max(float(np.max(np.abs(state.g))), 1.0)
        worst = max(worst, gap / scale)
    report.add("baseline_tracking_conservation", worst <= 1e-12, f"residual {worst:.2e}")


def _check_clamp_neutrality(report: VerifyReport) -> None:
    instance = separable_quadratic_instance(6, 3, seed=8)
    P = metropolis_hastings(topology_from_spec("complete", 6))
    cfg = JadeConfig(mu=0.05, epsilon=0.3, budget=7 * 200)
    trace = run("zo_jade", instance, P, cfg, seed=2)
    clamps = trace.rows[-1].clamp_count
    report.add("division_clamp_neutral", clamps == 0, f"{clamps} activations")


def _check_rate_fit(report: VerifyReport) -> None:
    instance = separable_quadratic_instance(6, 4, seed=13)
    P = metropolis_hastings(topology_from_spec("ring", 6))
    cfg = JadeConfig(mu=0.05, epsilon=0.2, budget=9 * 800, record_every=5)
    trace = run("zo_jade", instance, P, cfg, seed=6)
    rate, r2 = fit_exponential_rate(trace.iterations(), trace.ef_values())
    report.add(
        "exponential_convergence", rate < 0.0 and r2 >= 0.95, f"rate {rate:.3e}, r2 {r2:.4f}"
    )


def _check_gamma_scaling(report: VerifyReport) -> None:
    instance = quartic_instance(4)
    cfg = JadeConfig(mu=0.2, epsilon=0.5, budget=3 * 4000, record_every=100)
    result = gamma_mu_scaling_check(instance, [0.2, 0.1, 0.05], cfg)
    ok = bool(result.ratios) and all(2.0 <= r <= 8.0 for r in result.ratios)
    report.add(
        "gamma_mu_scaling",
        ok and not result.excluded,
        f"ratios {[round(r, 3) for r in result.ratios]}",
    )


def _check_lyapunov(report: VerifyReport) -> None:
    quad = separable_quadratic_instance(4, 3, seed=21)
    logi = synthetic_classification(4, 12, 4, seed=22, w=0.1, separation=1.5)
    quart = quartic_instance(4)
    ok = True
    details = []
    for inst, mu, radius in ((quad, 0.05, 1.0), (logi, 0.02, 0.5), (quart, 0.15, 0.4)):
        rep = lyapunov_bounds_check(inst, 40, mu, radius=radius)
        details.append(f"{inst.name}: alpha {rep.alpha:.3f}")
        ok = ok and rep.all_passed
        if not rep.all_passed:
            details.append(rep.details[0])
    report.add("lyapunov_bound_battery", ok, "; ".join(details))


def _check_descent_sign_flip(report: VerifyReport) -> None:
    quart = quartic_instance(4)
    c = quart.constants
    mu2 = math.sqrt(
        3.0
        * (math.hypot(2 * quart.d * c.L1 + c.m, c.m * math.sqrt(8 * quart.d)) - 2 * quart.d * c.L1 - c.m)
        / (quart.d * c.L3)
    )
    below = descent_coefficient(mu2 * 0.98, c.m, c.L1, c.L3, quart.d)
    above = descent_coefficient(mu2 * 1.02, c.m, c.L1, c.L3, quart.d)
    report.add(
        "descent_coefficient_sign_flip",
        below < 0.0 < above,
        f"alpha({mu2 * 0.98:.4f}) = {below:.4f}, alpha({mu2 * 1.02:.4f}) = {above:.4f}",
    )


def _check_determinism(report: VerifyReport) -> None:
    cfg = ExperimentConfig(
        {
            "topology": {"name": "ring", "n": 5},
            "instance": {"family": "separable_quadratic", "d": 3, "seed": 1},
            "mu": 0.05,
            "budget": 7 * 60,
            "seeds": [1, 2],
            "algorithms": [{"name": "zo_jade", "epsilon": 0.2}],
        }
    )
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        a = os.path.join(tmp, "a")
        b = os.path.join(tmp, "b")
        run_experiment(cfg, out_dir=a, quiet=True)
        run_experiment(cfg, out_dir=b, quiet=True)
        same = True
        for fname in sorted(os.listdir(a)):
            with open(os.path.join(a, fname), "rb") as fa, open(
                os.path.join(b, fname), "rb"
            ) as fb:
                if fa.read() != fb.read():
                    same = False
    report.add("byte_for_byte_determinism", same)


def verify_suite(cfg: ExperimentConfig | None = None) -> VerifyReport:
    """Run the full invariant battery and return a machine-readable report.

    When a config is supplied, its topology and instance are additionally
    validated (matrix invariants and ground-truth optimality); the battery
    itself runs on fixed desk-scale problems.
    """
    report = VerifyReport()
    if cfg is not None:
        graph, P = build_topology(cfg)
        report.add("config_consensus_matrix", not P.check(graph))
        instance = build_instance(cfg)
        grad_norm = float(np.linalg.norm(instance.global_gradient(instance.x_star)))
        report.add("config_instance_x_star", grad_norm <= 1e-10, f"||grad|| {grad_norm:.2e}")
    _check_consensus_matrices(report)
    _check_matrix_checker_catches_corruption(report)
    _check_averaging_contraction(report)
    _check_oracle_accounting(report)
    _check_objective_instances(report)
    _check_quadratic_exactness(report)
    _check_error_bounds(report)
    _check_tracking_and_fixed_point(report)
    _check_mu_independence(report)
    _check_baseline_sanity(report)
    _check_clamp_neutrality(report)
    _check_rate_fit(report)
    _check_gamma_scaling(report)
    _check_lyapunov(report)
    _check_descent_sign_flip(report)
    _check_determinism(report)
    return report
