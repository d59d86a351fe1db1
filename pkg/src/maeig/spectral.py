"""Eigenpair and coupled-system solvers built on the Dirichlet kernel.

The eigenpair of det D^2 w = lambda |w|^n (zero boundary data, n = 2) comes
from inverse power iteration: solve det D^2 w_hat = |w_k|^n, renormalize to
sup-norm one, and read the eigenvalue off either the normalization constant
or the variational quotient.  The coupled system

    det D^2 u = sigma |v|^p,   det D^2 v = sigma |u|^{n^2/p}

is solved by decoupled alternating iteration under the normalization
gamma = mu = sigma, ||v||_inf = 1, renormalizing every step so exponents
p != n cannot drift the scales.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .dirichlet import ConvergenceError, SolverConfig, solve_dirichlet
from .geometry import Grid
from .operators import ScalarField, is_discretely_convex, ma_det

__all__ = [
    "SpectralConfig",
    "EigenPair",
    "SystemSolution",
    "SweepEntry",
    "rayleigh_quotient",
    "solve_eigen",
    "solve_system",
    "scaling_map",
    "sweep_p",
    "psi_field",
]


@dataclass
class SpectralConfig:
    """Outer-iteration controls; ``inner`` configures the Dirichlet solves."""

    tol_lambda: float = 1e-9  # relative eigenvalue increment
    tol_w: float = 1e-8  # sup-norm increment of the normalized iterate
    tol_sigma: float = 1e-9  # relative sigma increment
    tol_v: float = 1e-8  # sup-norm increment of v between system iterations
    tol_residual: float = 1e-8  # final residual bound, scaled by (1 + sigma)
    max_iterations: int = 300
    inner: SolverConfig = dc_field(default_factory=lambda: SolverConfig(tol_residual=1e-11))
    verbosity: int = 0


@dataclass
class EigenPair:
    """Eigenvalue estimate with the sup-normalized eigenfunction.

    history rows: (lambda_rayleigh, lambda_homogeneity, sup|w_new - w_old|).
    """

    lam: float
    w: ScalarField
    history: list[tuple[float, float, float]]

    @property
    def iterations(self) -> int:
        return len(self.history)


@dataclass
class SystemSolution:
    """Converged (p, sigma, u, v) under gamma = mu = sigma, ||v||_inf = 1.

    history rows: (sigma, sup|v_new - v_old|, residual_1, residual_2); the
    residual fields of both equations at convergence are stored for the
    scaling-identity checks.
    """

    p: float
    sigma: float
    u: ScalarField
    v: ScalarField
    history: list[tuple[float, float, float, float]]
    res1_field: ScalarField
    res2_field: ScalarField

    @property
    def iterations(self) -> int:
        return len(self.history)


@dataclass
class SweepEntry:
    p: float
    solution: SystemSolution | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.solution is not None


def rayleigh_quotient(w: ScalarField, grid: Grid) -> float:
    """Variational quotient sum(|w| ma_det(w)) / sum(|w|^(n+1)) (n = 2).

    The cell area cancels; the quotient is invariant under positive scaling
    of w.  Requires a nonzero, nonpositive, discretely convex trial field.
    """
    w = np.asarray(w, dtype=float)
    sup = float(np.max(np.abs(w))) if w.size else 0.0
    if sup < 1e-14:
        raise ValueError("zero field: trial function has sup norm below 1e-14")
    if float(w.max()) > 1e-12 * sup:
        raise ValueError("nonconvex trial: field must be <= 0")
    if not is_discretely_convex(w, grid, tol=1e-8 * max(1.0, sup / grid.h**2)):
        raise ValueError("nonconvex trial: directional second differences go negative")
    n = grid.ndim
    absw = np.abs(w)
    num = float(np.sum(absw * ma_det(w, grid)))
    den = float(np.sum(absw ** (n + 1)))
    return num / den


def psi_field(grid: Grid, config: SolverConfig | None = None) -> ScalarField:
    """Sup-normalized solution of det D^2 psi = 1 (the comparison function)."""
    psi = solve_dirichlet(grid, np.ones(grid.num_interior), config)
    sup = float(np.max(np.abs(psi)))
    if sup == 0.0:
        raise RuntimeError("degenerate comparison solve")
    return psi / sup


def solve_eigen(
    grid: Grid,
    config: SpectralConfig | None = None,
    initial: ScalarField | None = None,
) -> EigenPair:
    """Inverse power iteration for the eigenpair, lambda from the quotient.

    w_hat <- solve(det D^2 w_hat = |w_k|^n); w_{k+1} = w_hat / ||w_hat||;
    the homogeneity estimate ||w_hat||^{-n} and the variational quotient
    agree at the fixed point and both are recorded per iteration.
    """
    if config is None:
        config = SpectralConfig()
    n = grid.ndim
    w = _normalized(initial) if initial is not None else psi_field(grid, config.inner)
    lam_r = rayleigh_quotient(w, grid)
    history: list[tuple[float, float, float]] = []
    what_prev = None
    for _ in range(config.max_iterations):
        rhs = np.abs(w) ** n
        what = solve_dirichlet(grid, rhs, config.inner, initial=what_prev)
        sup = float(np.max(np.abs(what)))
        if sup < 1e-300:
            raise ConvergenceError("eigen iteration collapsed to zero", math.inf, len(history))
        w_new = what / sup
        lam_h = sup ** (-n)
        lam_new = rayleigh_quotient(w_new, grid)
        dw = float(np.max(np.abs(w_new - w)))
        history.append((lam_new, lam_h, dw))
        if config.verbosity >= 1:
            print(f"eigen it={len(history)} lambda={lam_new:.9g} dw={dw:.2e}")
        done = abs(lam_new - lam_r) <= config.tol_lambda * (1.0 + abs(lam_new)) and (
            dw <= config.tol_w
        )
        w, lam_r, what_prev = w_new, lam_new, what
        if done:
            return EigenPair(lam=lam_r, w=w, history=history)
    raise ConvergenceError(
        "no convergence in eigen iteration",
        history[-1][2] if history else math.inf,
        len(history),
        history,
    )


def _normalized(w: ScalarField) -> ScalarField:
    w = np.asarray(w, dtype=float)
    sup = float(np.max(np.abs(w)))
    if sup == 0.0:
        raise ValueError("zero field cannot be normalized")
    return w / sup


def solve_system(
    grid: Grid,
    p: float,
    config: SpectralConfig | None = None,
    initial_v: ScalarField | None = None,
) -> SystemSolution:
    """Decoupled alternating iteration for the coupled system at exponent p.

    One step from v_k with ||v_k|| = 1:
        u_hat <- solve(det D^2 u = |v_k|^p)
        v_hat <- solve(det D^2 v = |u_hat|^{n^2/p})
        b = 1/||v_hat||, a = b^{p/(p+n)}, u = a u_hat, v = v_hat/||v_hat||,
        sigma = a^n.
    The exponent of a follows from n-homogeneity of the discrete operator:
    with these weights both equations share the single constant sigma, the
    second one exactly at every iterate.
    """
    if p <= 0:
        raise ValueError("invalid exponent: p must be positive")
    if config is None:
        config = SpectralConfig()
    n = grid.ndim
    q = n * n / p
    v = _normalized(initial_v) if initial_v is not None else psi_field(grid, config.inner)
    if float(v.max()) > 0:
        raise ValueError("initial v must be <= 0")
    sigma_prev = None
    u_ws = None
    v_ws = None
    history: list[tuple[float, float, float, float]] = []
    for _ in range(config.max_iterations):
        u_hat = solve_dirichlet(grid, np.abs(v) ** p, config.inner, initial=u_ws)
        v_hat = solve_dirichlet(grid, np.abs(u_hat) ** q, config.inner, initial=v_ws)
        sup = float(np.max(np.abs(v_hat)))
        if sup < 1e-300:
            raise ConvergenceError("system iteration collapsed to zero", math.inf, len(history))
        b = 1.0 / sup
        a = b ** (p / (p + n))
        u_new = a * u_hat
        v_new = v_hat / sup
        sigma = a**n

        dv = float(np.max(np.abs(v_new - v)))
        res1 = ma_det(u_new, grid) - sigma * np.abs(v_new) ** p
        res2 = ma_det(v_new, grid) - sigma * np.abs(u_new) ** q
        r1 = float(np.max(np.abs(res1)))
        r2 = float(np.max(np.abs(res2)))
        history.append((sigma, dv, r1, r2))
        if config.verbosity >= 1:
            print(f"system p={p} it={len(history)} sigma={sigma:.9g} dv={dv:.2e}")

        dsig_ok = sigma_prev is not None and abs(sigma - sigma_prev) <= config.tol_sigma * (
            1.0 + sigma
        )
        res_ok = max(r1, r2) <= config.tol_residual * (1.0 + sigma)
        v, u_ws, v_ws, sigma_prev = v_new, u_hat, v_hat, sigma
        if dv <= config.tol_v and dsig_ok and res_ok:
            return SystemSolution(
                p=p,
                sigma=sigma,
                u=u_new,
                v=v_new,
                history=history,
                res1_field=res1,
                res2_field=res2,
            )
    raise ConvergenceError(
        "no convergence in system iteration",
        history[-1][1] if history else math.inf,
        len(history),
        history,
    )


def scaling_map(sol: SystemSolution, tau: float) -> tuple[ScalarField, ScalarField]:
    """The exact solution-family map (u, v) -> (tau^{p/n} u, tau v), tau > 0.

    Equation residuals transform exactly: the first scales by tau^p and the
    second by tau^n, so exact solutions map to exact solutions.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    n = 2
    return (tau ** (sol.p / n) * sol.u, tau * sol.v)


def sweep_p(
    grid: Grid,
    p_list,
    config: SpectralConfig | None = None,
    jobs: int = 1,
) -> list[SweepEntry]:
    """Solve the system for each p; failures are reported, the sweep continues.

    With jobs == 1 the solves run in the given order, each warm-started from
    the previous converged v.  jobs > 1 runs cold-started solves concurrently
    (warm starting is inherently sequential).
    """
    ps = [float(p) for p in p_list]
    if config is None:
        config = SpectralConfig()
    entries: list[SweepEntry] = []
    if jobs <= 1:
        warm = None
        for p in ps:
            try:
                sol = solve_system(grid, p, config, initial_v=warm)
                entries.append(SweepEntry(p=p, solution=sol))
                warm = sol.v
            except (ConvergenceError, ValueError) as exc:
                entries.append(SweepEntry(p=p, solution=None, error=str(exc)))
        return entries

    from concurrent.futures import ThreadPoolExecutor

    def run(p):
        try:
            return SweepEntry(p=p, solution=solve_system(grid, p, config))
        except (ConvergenceError, ValueError) as exc:
            return SweepEntry(p=p, solution=None, error=str(exc))

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        entries = list(pool.map(run, ps))
    return entries
