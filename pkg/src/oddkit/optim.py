"""Derivative-free optimizer suite and the hybrid training schedule.

Three minimizers share one config and report shape:

* ``es_minimize``: a (mu/mu_w, lambda) evolution strategy with a single
  global step size adapted by cumulative path length.
* ``cmaes_minimize``: CMA-ES with rank-1 and rank-mu covariance updates
  and step-size control.
* ``bfgs_minimize``: BFGS on a central finite-difference gradient with
  Armijo backtracking.

``hybrid_minimize`` picks a schedule by problem size: small parameter
vectors (n_v <= 300) get CMA-ES refined by BFGS; larger ones get the
evolution strategy alone.

All methods are deterministic under a fixed seed, report an exact count
of objective evaluations, and keep a non-increasing best-value trace.
Objectives may return +inf to mark unusable candidates; those are ranked
worst and never recombined into the search mean. An objective returning
NaN stops the run with a ``degenerate`` termination reason.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from oddkit.numerics import InvalidInputError

# Stage budgets of the hybrid schedule.
HYBRID_SMALL_DIM = 300
HYBRID_CMA_ITERS = 100
HYBRID_BFGS_ITERS = 100
HYBRID_ES_ITERS = 500

# Stand-alone defaults when config.max_iters is left unset.
DEFAULT_ES_ITERS = 500
DEFAULT_BFGS_ITERS = 500


@dataclass(frozen=True)
class OptimizerConfig:
    """Budgets, tolerances and seeding shared by all minimizers.

    ``population`` and ``max_iters`` default per method when None. The
    stall rule stops a run once the best value has improved by less than
    ``stall_tolerance`` over the last ``stall_window`` iterations.
    """

    dim: int
    population: int | None = None
    max_iters: int | None = None
    seed: int = 0
    stall_window: int = 20
    stall_tolerance: float = 1e-3
    gradient_tolerance: float = 1e-8
    initial_step: float = 0.3
    workers: int = 1

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidInputError("dim must be >= 1")
        if self.population is not None and self.population < 4:
            raise InvalidInputError("population must be >= 4")
        for name in ("stall_tolerance", "gradient_tolerance", "initial_step"):
            if getattr(self, name) <= 0:
                raise InvalidInputError(f"{name} must be > 0")
        if self.stall_window < 1:
            raise InvalidInputError("stall_window must be >= 1")
        if self.max_iters is not None and self.max_iters < 1:
            raise InvalidInputError("max_iters must be >= 1")
        if self.workers < 1:
            raise InvalidInputError("workers must be >= 1")


@dataclass
class OptimizerReport:
    best_point: np.ndarray
    best_value: float
    iterations_used: dict[str, int]
    evaluations: int
    trace: np.ndarray
    termination_reason: str


def _evaluate(objective, candidates, workers: int) -> np.ndarray:
    """Evaluate a population; results keep candidate order regardless of
    worker count so selection cannot depend on scheduling."""
    if workers > 1 and len(candidates) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vals = list(pool.map(objective, candidates))
    else:
        vals = [objective(x) for x in candidates]
    return np.asarray(vals, dtype=float)


def _stalled(trace: list[float], window: int, tolerance: float) -> bool:
    if len(trace) <= window:
        return False
    return trace[-window - 1] - trace[-1] < tolerance


def _selection_weights(mu: int) -> tuple[np.ndarray, float]:
    w = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    w = w / w.sum()
    mu_eff = 1.0 / float(w @ w)
    return w, mu_eff


def es_minimize(objective, config: OptimizerConfig,
                start: np.ndarray | None = None) -> OptimizerReport:
    """Evolution strategy with weighted recombination and a single
    path-length-adapted step size."""
    n = config.dim
    lam = config.population if config.population is not None else 50
    max_iters = config.max_iters if config.max_iters is not None else DEFAULT_ES_ITERS
    if lam < 4:
        raise InvalidInputError("population must be >= 4")
    rng = np.random.default_rng(config.seed)
    mean = np.zeros(n) if start is None else np.asarray(start, dtype=float).copy()
    if mean.shape != (n,):
        raise InvalidInputError(f"start has shape {mean.shape}, expected ({n},)")

    mu = lam // 2
    w, mu_eff = _selection_weights(mu)
    c_s = (mu_eff + 2) / (n + mu_eff + 5)
    d_s = 1 + 2 * max(0.0, math.sqrt((mu_eff - 1) / (n + 1)) - 1) + c_s
    chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n * n))

    sigma = config.initial_step
    p_s = np.zeros(n)
    best_value = math.inf
    best_point = mean.copy()
    trace: list[float] = []
    evaluations = 0
    reason = "budget"
    iterations = 0

    for _ in range(max_iters):
        Z = rng.standard_normal((lam, n))
        vals = _evaluate(objective, list(mean + sigma * Z), config.workers)
        evaluations += lam
        if np.isnan(vals).any():
            reason = "degenerate"
            break
        iterations += 1
        order = np.argsort(vals, kind="stable")
        if vals[order[0]] < best_value:
            best_value = float(vals[order[0]])
            best_point = mean + sigma * Z[order[0]]
        trace.append(best_value)
        parents = order[:mu]
        finite = np.isfinite(vals[parents])
        if finite.any():
            # Infinite candidates never recombine; renormalize the
            # surviving weights.
            wf = w[finite] / w[finite].sum()
            z_w = wf @ Z[parents[finite]]
            mean = mean + sigma * z_w
            p_s = (1 - c_s) * p_s + math.sqrt(c_s * (2 - c_s) * mu_eff) * z_w
            sigma *= math.exp((c_s / d_s) *
                              (float(np.linalg.norm(p_s)) / chi_n - 1))
        if _stalled(trace, config.stall_window, config.stall_tolerance):
            reason = "stall"
            break

    return OptimizerReport(
        best_point=best_point,
        best_value=best_value,
        iterations_used={"es": iterations},
        evaluations=evaluations,
        trace=np.asarray(trace),
        termination_reason=reason,
    )


def cmaes_minimize(objective, config: OptimizerConfig,
                   start: np.ndarray | None = None) -> OptimizerReport:
    """CMA-ES: adapts a full sampling covariance via rank-1 and rank-mu
    updates with cumulative step-size control."""
    n = config.dim
    lam = config.population if config.population is not None else 4 + int(3 * math.log(n))
    lam = max(lam, 4)
    max_iters = config.max_iters if config.max_iters is not None else 100 * n
    rng = np.random.default_rng(config.seed)
    mean = np.zeros(n) if start is None else np.asarray(start, dtype=float).copy()
    if mean.shape != (n,):
        raise InvalidInputError(f"start has shape {mean.shape}, expected ({n},)")

    mu = lam // 2
    w, mu_eff = _selection_weights(mu)
    c_c = (4 + mu_eff / n) / (n + 4 + 2 * mu_eff / n)
    c_s = (mu_eff + 2) / (n + mu_eff + 5)
    c_1 = 2 / ((n + 1.3) ** 2 + mu_eff)
    c_mu = min(1 - c_1, 2 * (mu_eff - 2 + 1 / mu_eff) / ((n + 2) ** 2 + mu_eff))
    damps = 1 + 2 * max(0.0, math.sqrt((mu_eff - 1) / (n + 1)) - 1) + c_s
    chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n * n))
    decompose_every = max(1, n // 10)

    sigma = config.initial_step
    p_c = np.zeros(n)
    p_s = np.zeros(n)
    C = np.eye(n)
    B = np.eye(n)
    D = np.ones(n)
    inv_sqrt_C = np.eye(n)
    stale = 0

    best_value = math.inf
    best_point = mean.copy()
    trace: list[float] = []
    evaluations = 0
    reason = "budget"
    iterations = 0

    for it in range(max_iters):
        Z = rng.standard_normal((lam, n))
        Yc = Z * D @ B.T                       # rows: B (D * z)
        X = mean + sigma * Yc
        vals = _evaluate(objective, list(X), config.workers)
        evaluations += lam
        if np.isnan(vals).any():
            reason = "degenerate"
            break
        iterations += 1
        order = np.argsort(vals, kind="stable")
        if vals[order[0]] < best_value:
            best_value = float(vals[order[0]])
            best_point = X[order[0]].copy()
        trace.append(best_value)

        parents = order[:mu]
        finite = np.isfinite(vals[parents])
        if finite.any():
            wf = w[finite] / w[finite].sum()
            Yp = Yc[parents[finite]]
            y_w = wf @ Yp
            mean = mean + sigma * y_w
            p_s = (1 - c_s) * p_s + math.sqrt(c_s * (2 - c_s) * mu_eff) * (inv_sqrt_C @ y_w)
            h_sig = (np.linalg.norm(p_s) /
                     math.sqrt(1 - (1 - c_s) ** (2 * (it + 1))) / chi_n
                     < 1.4 + 2 / (n + 1))
            p_c = (1 - c_c) * p_c + h_sig * math.sqrt(c_c * (2 - c_c) * mu_eff) * y_w
            delta = (1 - h_sig) * c_c * (2 - c_c)
            C = ((1 - c_1 - c_mu) * C
                 + c_1 * (np.outer(p_c, p_c) + delta * C)
                 + c_mu * (Yp.T * wf) @ Yp)
            sigma *= math.exp((c_s / damps) *
                              (float(np.linalg.norm(p_s)) / chi_n - 1))

        stale += 1
        if stale >= decompose_every:
            stale = 0
            C = (C + C.T) / 2
            eigvals, B = np.linalg.eigh(C)
            eigvals = np.maximum(eigvals, 1e-12)   # keep sampling covariance PD
            C = (B * eigvals) @ B.T
            D = np.sqrt(eigvals)
            inv_sqrt_C = (B / D) @ B.T

        if _stalled(trace, config.stall_window, config.stall_tolerance):
            reason = "stall"
            break

    return OptimizerReport(
        best_point=best_point,
        best_value=best_value,
        iterations_used={"cmaes": iterations},
        evaluations=evaluations,
        trace=np.asarray(trace),
        termination_reason=reason,
    )


def finite_diff_gradient(objective, x, base_step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient with per-coordinate step
    h_i = max(base_step, base_step * |x_i|)."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        h = max(base_step, base_step * abs(x[i]))
        e = np.zeros_like(x)
        e[i] = h
        f_plus = objective(x + e)
        f_minus = objective(x - e)
        if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
            raise InvalidInputError(
                f"non-finite objective probing coordinate {i}")
        g[i] = (f_plus - f_minus) / (2 * h)
    return g


def bfgs_minimize(objective, start, config: OptimizerConfig) -> OptimizerReport:
    """BFGS on finite-difference gradients with Armijo backtracking."""
    x = np.asarray(start, dtype=float).copy()
    if x.shape != (config.dim,):
        raise InvalidInputError(f"start has shape {x.shape}, expected ({config.dim},)")
    max_iters = config.max_iters if config.max_iters is not None else DEFAULT_BFGS_ITERS

    evaluations = 1
    fx = float(objective(x))
    if not math.isfinite(fx):
        raise InvalidInputError("objective is not finite at the start point")

    n = config.dim
    H = np.eye(n)
    trace: list[float] = [fx]
    reason = "budget"
    iterations = 0

    def grad(at):
        nonlocal evaluations
        evaluations += 2 * n
        return finite_diff_gradient(objective, at)

    try:
        g = grad(x)
    except InvalidInputError:
        return OptimizerReport(x, fx, {"bfgs": 0}, evaluations,
                               np.asarray(trace), "degenerate")

    for _ in range(max_iters):
        if float(np.abs(g).max()) < config.gradient_tolerance:
            reason = "gradient"
            break
        direction = -H @ g
        slope = float(g @ direction)
        if slope >= 0:
            # Reset a corrupted curvature model; fall back to steepest
            # descent for this step.
            H = np.eye(n)
            direction = -g
            slope = float(g @ direction)
            if slope == 0.0:
                reason = "gradient"
                break

        alpha = 1.0
        accepted = False
        for _ in range(60):
            candidate = x + alpha * direction
            f_new = float(objective(candidate))
            evaluations += 1
            if math.isnan(f_new):
                reason = "degenerate"
                break
            if f_new <= fx + 1e-4 * alpha * slope:
                accepted = True
                break
            alpha *= 0.5
        if reason == "degenerate" or not accepted:
            if not accepted and reason != "degenerate":
                reason = "degenerate"
            break

        iterations += 1
        s = alpha * direction
        x_new = candidate
        try:
            g_new = grad(x_new)
        except InvalidInputError:
            x, fx = x_new, f_new
            trace.append(fx)
            reason = "degenerate"
            break
        y = g_new - g
        ys = float(y @ s)
        if ys > 1e-12 * float(np.linalg.norm(y)) * float(np.linalg.norm(s)):
            rho = 1.0 / ys
            I = np.eye(n)
            V = I - rho * np.outer(s, y)
            H = V @ H @ V.T + rho * np.outer(s, s)
        x, fx, g = x_new, f_new, g_new
        trace.append(fx)
        if _stalled(trace, config.stall_window, config.stall_tolerance):
            reason = "stall"
            break

    return OptimizerReport(
        best_point=x,
        best_value=fx,
        iterations_used={"bfgs": iterations},
        evaluations=evaluations,
        trace=np.asarray(trace),
        termination_reason=reason,
    )


def hybrid_minimize(objective, config: OptimizerConfig, n_v: int,
                    start: np.ndarray | None = None) -> OptimizerReport:
    """Problem-size-dependent schedule.

    n_v <= 300: CMA-ES (<= 100 iterations) refined by BFGS from the
    CMA-ES best (<= 100 iterations). Larger problems: the evolution
    strategy alone (<= 500 iterations). config.max_iters, when set,
    replaces each stage cap.
    """
    if n_v != config.dim:
        raise InvalidInputError(f"n_v {n_v} does not match config.dim {config.dim}")
    if n_v <= HYBRID_SMALL_DIM:
        cma_cfg = _replace_iters(config, HYBRID_CMA_ITERS)
        first = cmaes_minimize(objective, cma_cfg, start=start)
        if not math.isfinite(first.best_value):
            return first
        bfgs_cfg = _replace_iters(config, HYBRID_BFGS_ITERS)
        second = bfgs_minimize(objective, first.best_point, bfgs_cfg)
        # BFGS only moves on Armijo decrease from the stage-1 best, so the
        # concatenated trace stays non-increasing. The BFGS trace leads
        # with its starting value — the stage-1 best already on the
        # trace — so that duplicate is dropped, leaving one entry per
        # iteration performed.
        return OptimizerReport(
            best_point=second.best_point,
            best_value=second.best_value,
            iterations_used={**first.iterations_used, **second.iterations_used},
            evaluations=first.evaluations + second.evaluations,
            trace=np.concatenate([first.trace, second.trace[1:]]),
            termination_reason=second.termination_reason,
        )
    es_cfg = _replace_iters(config, HYBRID_ES_ITERS)
    return es_minimize(objective, es_cfg, start=start)


def _replace_iters(config: OptimizerConfig, default_iters: int) -> OptimizerConfig:
    iters = config.max_iters if config.max_iters is not None else default_iters
    return OptimizerConfig(
        dim=config.dim,
        population=config.population,
        max_iters=iters,
        seed=config.seed,
        stall_window=config.stall_window,
        stall_tolerance=config.stall_tolerance,
        gradient_tolerance=config.gradient_tolerance,
        initial_step=config.initial_step,
        workers=config.workers,
    )
