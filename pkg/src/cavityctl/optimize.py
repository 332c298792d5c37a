"""Pulse-sequence optimization: gradient-ascent pre-optimization, JAYA, and
continuation/robustness tooling.

All optimizers maximize.  Determinism contract: a run is a pure function of
(bounds, config, init); every random draw comes from a per-member stream
seeded by (rng_seed, member index), and population evaluations are gathered
in member order, so the worker count never changes the result.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import pi
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import DensityMatrix, SpaceSpec, SystemParams, state_label_index
from .dynamics import DEFAULT_DT, PulsePackage, PulseSequence, SequenceEvaluator
from .merit import MeritSpec

__all__ = [
    "Bounds",
    "PreOptConfig",
    "OptimizerConfig",
    "OptRun",
    "jaya_optimize",
    "preoptimize",
    "kappa_continuation",
    "robustness_scan",
    "ScanResult",
    "sequence_objective",
    "evaluate_sequence_merit",
]

_FIELDS_PER_PACKAGE = 4  # theta_x, theta_y, s, t_free


@dataclass(frozen=True)
class Bounds:
    """Box bounds, optionally carrying the pulse-sequence layout.

    With a pulse layout the vector is (theta_x, theta_y, s, t_free) per
    package, and projection rescales the t coordinates uniformly whenever
    their sum exceeds t_max, so every candidate ever evaluated is feasible.
    """

    lower: np.ndarray
    upper: np.ndarray
    n_packages: int = 0
    t_max: float | None = None

    def __post_init__(self) -> None:
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lower/upper must be 1-d arrays of equal length")
        if np.any(hi < lo):
            raise ValueError("upper bound below lower bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def for_pulse_sequence(
        cls,
        n_packages: int,
        t_max: float,
        *,
        theta_x_range: tuple[float, float] = (0.0, 2 * pi),
        theta_y_range: tuple[float, float] = (0.0, 2 * pi),
        s_max: float = 0.0,
    ) -> "Bounds":
        lo, hi = [], []
        for _ in range(n_packages):
            lo += [theta_x_range[0], theta_y_range[0], -s_max, 0.0]
            hi += [theta_x_range[1], theta_y_range[1], s_max, t_max]
        return cls(np.array(lo), np.array(hi), n_packages=n_packages, t_max=t_max)

    @property
    def dim(self) -> int:
        return self.lower.size

    def project(self, x: np.ndarray) -> np.ndarray:
        x = np.clip(x, self.lower, self.upper)
        if self.n_packages and self.t_max is not None:
            t = x[3::_FIELDS_PER_PACKAGE]
            total = t.sum()
            if total > self.t_max and total > 0:
                x = x.copy()
                x[3::_FIELDS_PER_PACKAGE] = t * (self.t_max / total)
        return x

    def sample_uniform(self, rng: np.random.Generator) -> np.ndarray:
        return self.project(rng.uniform(self.lower, self.upper))

    def sample_near(
        self, center: np.ndarray, rng: np.random.Generator, fraction: float = 0.1
    ) -> np.ndarray:
        """Uniform within +-fraction of each bound interval around `center`."""
        width = (self.upper - self.lower) * fraction
        return self.project(rng.uniform(center - width, center + width))

    # -- pulse-sequence codec -------------------------------------------------

    def decode(self, x: np.ndarray) -> PulseSequence:
        if not self.n_packages:
            raise ValueError("bounds carry no pulse-sequence layout")
        x = np.asarray(x, dtype=float)
        pkgs = [
            PulsePackage(*x[k * _FIELDS_PER_PACKAGE : (k + 1) * _FIELDS_PER_PACKAGE])
            for k in range(self.n_packages)
        ]
        return PulseSequence(tuple(pkgs))

    def encode(self, seq: PulseSequence) -> np.ndarray:
        if not self.n_packages:
            raise ValueError("bounds carry no pulse-sequence layout")
        out = np.zeros(self.dim)
        for k, p in enumerate(seq):
            out[k * _FIELDS_PER_PACKAGE : (k + 1) * _FIELDS_PER_PACKAGE] = (
                p.theta_x,
                p.theta_y,
                p.s,
                p.t_free,
            )
        # packages beyond len(seq) stay identity (all-zero)
        return self.project(out)


@dataclass(frozen=True)
class PreOptConfig:
    enabled: bool = True
    restarts: int = 100
    packages: int = 5
    max_steps: int = 200
    fd_step: float = 1e-4


@dataclass(frozen=True)
class OptimizerConfig:
    population: int = 300
    iterations: int = 10_000
    workers: int = 1
    rng_seed: int = 0
    pre_opt: PreOptConfig = PreOptConfig()
    jaya_restarts: int = 1
    stagnation_window: int = 5000
    stagnation_tol: float = 1e-8

    def __post_init__(self) -> None:
        if self.population < 4:
            raise ValueError("population must be >= 4")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class OptRun:
    best_vector: np.ndarray
    best_merit: float
    merit_history: np.ndarray
    evaluations: int
    wall_time: float
    best_sequence: PulseSequence | None = None

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "best_vector": [float(v) for v in self.best_vector],
            "best_merit": float(self.best_merit),
            "evaluations": int(self.evaluations),
            "merit_history_final": float(self.merit_history[-1]),
            "iterations": int(len(self.merit_history) - 1),
        }
        if self.best_sequence is not None:
            out["best_sequence"] = [
                [p.theta_x, p.theta_y, p.s, p.t_free] for p in self.best_sequence
            ]
        if include_timing:
            out["wall_time"] = self.wall_time
        return out

    def to_json(self, include_timing: bool = False, **kwargs) -> str:
        return json.dumps(self.to_dict(include_timing), sort_keys=True, **kwargs)

    def history_to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("iteration,best_merit\n")
            for i, v in enumerate(self.merit_history):
                fh.write(f"{i},{v:.12g}\n")


def _member_rngs(seed: int, n: int, namespace: int = 1) -> list[np.random.Generator]:
    return [
        np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(namespace, i)))
        for i in range(n)
    ]


def _evaluate_population(
    objective: Callable[[np.ndarray], float],
    xs: Sequence[np.ndarray],
    pool: ThreadPoolExecutor | None,
) -> np.ndarray:
    if pool is None:
        return np.array([objective(x) for x in xs], dtype=float)
    return np.array(list(pool.map(objective, xs)), dtype=float)


def jaya_optimize(
    objective: Callable[[np.ndarray], float],
    bounds: Bounds,
    config: OptimizerConfig,
    init: PulseSequence | np.ndarray | None = None,
) -> OptRun:
    """Maximize `objective` with the JAYA population update.

    Every member moves toward the current best and away from the current
    worst, x' = x + r1 (best - |x|) - r2 (worst - |x|) coordinate-wise with
    fresh uniform r1, r2, then is clipped/projected; the move is kept only if
    it improves.  No other hyperparameters exist.  With `init` the population
    is sampled within 10% of the bound widths around it and the seed itself
    is kept as member 0.
    """
    t0 = time.perf_counter()
    pop = config.population
    rngs = _member_rngs(config.rng_seed, pop)

    if init is not None and isinstance(init, PulseSequence):
        init = bounds.encode(init)

    xs = []
    for i in range(pop):
        if init is None:
            xs.append(bounds.sample_uniform(rngs[i]))
        elif i == 0:
            xs.append(bounds.project(np.asarray(init, dtype=float)))
        else:
            xs.append(bounds.sample_near(np.asarray(init, dtype=float), rngs[i]))

    pool = ThreadPoolExecutor(max_workers=config.workers) if config.workers > 1 else None
    try:
        fs = _evaluate_population(objective, xs, pool)
        evaluations = pop
        history = [float(fs.max())]
        best_seen = history[0]
        last_improvement = 0

        for it in range(1, config.iterations + 1):
            ib = int(np.argmax(fs))
            iw = int(np.argmin(fs))
            xb, xw = xs[ib], xs[iw]
            proposals = []
            for i in range(pop):
                r1 = rngs[i].random(bounds.dim)
                r2 = rngs[i].random(bounds.dim)
                ax = np.abs(xs[i])
                proposals.append(bounds.project(xs[i] + r1 * (xb - ax) - r2 * (xw - ax)))
            fnew = _evaluate_population(objective, proposals, pool)
            evaluations += pop
            for i in range(pop):
                if fnew[i] > fs[i]:
                    xs[i] = proposals[i]
                    fs[i] = fnew[i]
            cur_best = float(fs.max())
            history.append(cur_best)
            if cur_best > best_seen + config.stagnation_tol:
                best_seen = cur_best
                last_improvement = it
            if it - last_improvement >= config.stagnation_window:
                break
    finally:
        if pool is not None:
            pool.shutdown()

    ib = int(np.argmax(fs))
    best_vec = xs[ib]
    seq = bounds.decode(best_vec) if bounds.n_packages else None
    return OptRun(
        best_vector=best_vec,
        best_merit=float(fs[ib]),
        merit_history=np.asarray(history),
        evaluations=evaluations,
        wall_time=time.perf_counter() - t0,
        best_sequence=seq,
    )


# ---------------------------------------------------------------------------
# gradient-ascent pre-optimization
# ---------------------------------------------------------------------------


def _central_gradient(
    objective: Callable[[np.ndarray], float], x: np.ndarray, h: float
) -> np.ndarray:
    g = np.zeros_like(x)
    for j in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        g[j] = (objective(xp) - objective(xm)) / (2.0 * h)
    return g


def _ascend(
    objective: Callable[[np.ndarray], float],
    bounds: Bounds,
    x: np.ndarray,
    max_steps: int,
    fd_step: float,
) -> tuple[np.ndarray, float]:
    """Projected gradient ascent with backtracking line search."""
    f = objective(x)
    scale = float(np.max(bounds.upper - bounds.lower)) or 1.0
    for _ in range(max_steps):
        g = _central_gradient(objective, x, fd_step)
        gn = np.linalg.norm(g)
        if gn < 1e-10:
            break
        alpha = 0.5 * scale / gn
        improved = False
        while alpha * gn > 1e-12:
            x_new = bounds.project(x + alpha * g)
            f_new = objective(x_new)
            if f_new > f + 1e-12:
                x, f = x_new, f_new
                improved = True
                break
            alpha *= 0.5
        if not improved:
            break
    return x, f


def preoptimize(
    objective: Callable[[np.ndarray], float],
    bounds: Bounds,
    config: OptimizerConfig,
) -> PulseSequence:
    """Best result of `restarts` random initializations of projected gradient
    ascent (central differences, backtracking line search)."""
    pre = config.pre_opt
    rngs = _member_rngs(config.rng_seed, max(1, pre.restarts), namespace=2)
    best_x, best_f = None, -np.inf
    for r in range(max(1, pre.restarts)):
        x0 = bounds.sample_uniform(rngs[r])
        x, f = _ascend(objective, bounds, x0, pre.max_steps, pre.fd_step)
        if f > best_f:
            best_x, best_f = x, f
    if bounds.n_packages:
        return bounds.decode(best_x)
    # generic bounds: wrap the raw vector in a degenerate single-package form
    raise ValueError("preoptimize needs pulse-sequence bounds")


def kappa_continuation(
    objective_family: Callable[[float], Callable[[np.ndarray], float]],
    kappas: Sequence[float],
    bounds: Bounds,
    config: OptimizerConfig,
    init: PulseSequence | np.ndarray | None = None,
) -> list[OptRun]:
    """Re-optimize at increasing damping, seeding each stage's population
    around the previous best."""
    if list(kappas) != sorted(kappas):
        raise ValueError("kappas must be ascending")
    runs: list[OptRun] = []
    seed = init
    for kappa in kappas:
        run = jaya_optimize(objective_family(kappa), bounds, config, init=seed)
        runs.append(run)
        seed = run.best_vector
    return runs


# ---------------------------------------------------------------------------
# objective construction and robustness scanning
# ---------------------------------------------------------------------------


def sequence_objective(
    spec: SpaceSpec,
    params: SystemParams,
    initial: np.ndarray | str,
    merit: MeritSpec,
    bounds: Bounds,
    *,
    method: str = "auto",
    dt: float = DEFAULT_DT,
) -> Callable[[np.ndarray], float]:
    """Objective vector -> merit of the final state of the decoded sequence."""
    psi0 = state_label_index(spec, initial) if isinstance(initial, str) else initial
    evaluator = SequenceEvaluator(spec, params, psi0, method=method, dt=dt)

    pure_target = None
    if (
        evaluator.method == "pure"
        and merit.kind == "fidelity"
        and not merit.trace_out_cavity
    ):
        tm = merit.target.matrix
        purity = float(np.einsum("ij,ji->", tm, tm).real)
        if purity > 1.0 - 1e-12:
            evals, evecs = np.linalg.eigh(tm)
            pure_target = evecs[:, -1]

    def objective(x: np.ndarray) -> float:
        seq = bounds.decode(x)
        if pure_target is not None:
            psi = evaluator.final_state_vector(seq)
            return float(abs(np.vdot(pure_target, psi)) ** 2)
        rho = evaluator.final_density_matrix(seq)
        return merit.evaluate(DensityMatrix(spec, rho))

    return objective


def evaluate_sequence_merit(
    spec: SpaceSpec,
    params: SystemParams,
    initial: np.ndarray | str,
    merit: MeritSpec,
    seq: PulseSequence,
    *,
    method: str = "auto",
    dt: float = DEFAULT_DT,
) -> float:
    """Merit of the final state of one sequence (same path as the scanner)."""
    psi0 = state_label_index(spec, initial) if isinstance(initial, str) else initial
    evaluator = SequenceEvaluator(spec, params, psi0, method=method, dt=dt)
    rho = evaluator.final_density_matrix(seq)
    return merit.evaluate(DensityMatrix(spec, rho))


@dataclass
class ScanResult:
    axis_names: list[str]
    records: list[dict]

    def merits(self) -> np.ndarray:
        return np.array([r["merit"] for r in self.records])

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(self.axis_names + ["merit"]) + "\n")
            for r in self.records:
                row = [f"{r[a]:.12g}" for a in self.axis_names]
                fh.write(",".join(row + [f"{r['merit']:.12g}"]) + "\n")


def robustness_scan(
    seq: PulseSequence,
    spec: SpaceSpec,
    params: SystemParams,
    axes: dict,
    merit: MeritSpec,
    *,
    initial: str | np.ndarray = "0,G",
    method: str = "auto",
    dt: float = DEFAULT_DT,
) -> ScanResult:
    """Re-propagate a fixed sequence under perturbed parameters.

    axes keys: 'g_rel' (relative coupling offsets), 'kappa_rel' (relative
    damping offsets), 'delta_add' (mapping spin index, 1-based, to a grid of
    additive detuning offsets).  The Cartesian product of all grids is
    evaluated; empty axes mean the single unperturbed point.
    """
    axis_list: list[tuple[str, np.ndarray]] = []
    for key in ("g_rel", "kappa_rel"):
        if key in axes and len(axes[key]):
            axis_list.append((key, np.asarray(axes[key], dtype=float)))
    for spin, grid in sorted(dict(axes.get("delta_add", {})).items()):
        n = int(spin)
        if not 1 <= n <= spec.n_spins:
            raise ValueError(f"delta_add spin index {n} out of range")
        if len(grid):
            axis_list.append((f"delta_add_{n}", np.asarray(grid, dtype=float)))
    unknown = set(axes) - {"g_rel", "kappa_rel", "delta_add"}
    if unknown:
        raise ValueError(f"unknown scan axes: {sorted(unknown)}")

    names = [name for name, _ in axis_list]
    grids = [g for _, g in axis_list]
    records: list[dict] = []

    def points() -> Iterable[tuple[float, ...]]:
        if not grids:
            yield ()
            return
        mesh = np.meshgrid(*grids, indexing="ij")
        for idx in np.ndindex(*mesh[0].shape):
            yield tuple(float(m[idx]) for m in mesh)

    for values in points():
        g = params.g
        kappa = params.kappa
        deltas = list(params.deltas)
        rec = {}
        for name, v in zip(names, values):
            rec[name] = v
            if name == "g_rel":
                g = params.g * (1.0 + v)
            elif name == "kappa_rel":
                kappa = params.kappa * (1.0 + v)
            else:
                deltas[int(name.rsplit("_", 1)[1]) - 1] += v
        perturbed = SystemParams(g=g, kappa=kappa, deltas=tuple(deltas))
        rec["merit"] = evaluate_sequence_merit(
            spec, perturbed, initial, merit, seq, method=method, dt=dt
        )
        records.append(rec)
    return ScanResult(axis_names=names, records=records)
