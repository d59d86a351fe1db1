"""Pass/fail checks for the identities and inequalities converged fields obey.

Every check returns a CheckReport with the measured quantities, the tolerance
used and, on failure, the margin and worst location.  Integrals are plain
node sums times the cell area, matching the first-order character of the
scheme.  Inequality tolerances scale with (1 + magnitude) so reports stay
meaningful across domain sizes.  All checks are deterministic given their
inputs and seeds.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .dirichlet import ConvergenceError, solve_dirichlet
from .geometry import ConvexDomain, Grid, area, boundary_distance
from .operators import ScalarField, is_discretely_convex, laplacian, ma_det
from .spectral import SpectralConfig, SystemSolution, psi_field, solve_system

__all__ = [
    "CheckReport",
    "check_nibp",
    "check_amgm",
    "check_minkowski_det",
    "random_spd_pairs",
    "check_uvn_identity",
    "cd1_invariant",
    "sup_bound_report",
    "distance_bound_report",
    "uniqueness_experiment",
]


@dataclass
class CheckReport:
    name: str
    passed: bool
    tolerance: float
    lhs: float | None = None
    rhs: float | None = None
    margin: float | None = None
    details: dict = dc_field(default_factory=dict)
    grid_meta: dict = dc_field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "check": self.name,
            "passed": self.passed,
            "tolerance": self.tolerance,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "margin": self.margin,
            "details": self.details,
            "grid": self.grid_meta,
        }


def _grid_meta(grid: Grid) -> dict:
    return {"h": grid.h, "interior_nodes": grid.num_interior}


def _require_convex_nonpositive(name: str, w: ScalarField, grid: Grid) -> None:
    w = np.asarray(w, dtype=float)
    sup = float(np.max(np.abs(w)))
    if sup < 1e-14:
        raise ValueError(f"{name}: zero field")
    if float(w.max()) > 1e-12 * sup:
        raise ValueError(f"{name}: field must be <= 0")
    if not is_discretely_convex(w, grid, tol=1e-8 * max(1.0, sup / grid.h**2)):
        raise ValueError(f"{name}: field is not discretely convex")


def check_nibp(u: ScalarField, v: ScalarField, grid: Grid, tol: float = 1e-9) -> CheckReport:
    """Nonlinear integration by parts:

        int |u| det D^2 v >= int |v| (det D^2 u)^{1/n} (det D^2 v)^{(n-1)/n}.

    Both sides are node sums; tiny negative round-off in the determinant
    values is clipped before the fractional powers.
    """
    _require_convex_nonpositive("check_nibp u", u, grid)
    _require_convex_nonpositive("check_nibp v", v, grid)
    n = grid.ndim
    h2 = grid.cell_area
    mau = np.clip(ma_det(u, grid), 0.0, None)
    mav = np.clip(ma_det(v, grid), 0.0, None)
    lhs_i = np.abs(u) * mav
    rhs_i = np.abs(v) * mau ** (1.0 / n) * mav ** ((n - 1.0) / n)
    lhs = float(np.sum(lhs_i) * h2)
    rhs = float(np.sum(rhs_i) * h2)
    margin = lhs - rhs
    passed = lhs >= rhs - tol * (1.0 + abs(lhs))
    details = {}
    if not passed:
        worst = int(np.argmin(lhs_i - rhs_i))
        details["worst_node"] = list(map(float, grid.nodes_xy[worst]))
    return CheckReport(
        name="nibp",
        passed=passed,
        tolerance=tol,
        lhs=lhs,
        rhs=rhs,
        margin=margin,
        details=details,
        grid_meta=_grid_meta(grid),
    )


def check_amgm(u: ScalarField, v: ScalarField, grid: Grid, tol: float = 1e-9) -> CheckReport:
    """Arithmetic-geometric inequality n (det D^2 (u+v))^{1/n} <= Lap(u+v),
    checked at every interior node."""
    s = np.asarray(u, dtype=float) + np.asarray(v, dtype=float)
    sup = float(np.max(np.abs(s)))
    if not is_discretely_convex(s, grid, tol=1e-8 * max(1.0, sup / grid.h**2)):
        raise ValueError("check_amgm: u + v is not discretely convex")
    n = grid.ndim
    lhs_i = n * np.clip(ma_det(s, grid), 0.0, None) ** (1.0 / n)
    rhs_i = laplacian(s, grid)
    slack = rhs_i - lhs_i + tol * (1.0 + np.abs(lhs_i))
    worst = int(np.argmin(slack))
    margin = float((rhs_i - lhs_i)[worst])
    passed = bool(np.all(slack >= 0.0))
    details = {"worst_node": list(map(float, grid.nodes_xy[worst]))}
    return CheckReport(
        name="amgm",
        passed=passed,
        tolerance=tol,
        lhs=float(lhs_i[worst]),
        rhs=float(rhs_i[worst]),
        margin=margin,
        details=details,
        grid_meta=_grid_meta(grid),
    )


def check_minkowski_det(A, B, tol: float = 1e-12) -> CheckReport:
    """Minkowski determinant inequality for 2x2 SPD matrices:

        det(A+B)^{1/n} >= det(A)^{1/n} + det(B)^{1/n},  n = 2,

    with equality iff A = c B; the equality detector fits c in Frobenius norm
    and flags relative fit residuals below 1e-6.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    for name, M in (("A", A), ("B", B)):
        if M.shape != (2, 2) or abs(M[0, 1] - M[1, 0]) > 1e-12 * (1 + np.abs(M).max()):
            raise ValueError(f"check_minkowski_det: {name} must be symmetric 2x2")
        if np.linalg.eigvalsh(M).min() <= 1e-12:
            raise ValueError(f"check_minkowski_det: {name} is not positive definite")
    lhs = float(np.sqrt(np.linalg.det(A + B)))
    rhs = float(np.sqrt(np.linalg.det(A)) + np.sqrt(np.linalg.det(B)))
    margin = lhs - rhs
    passed = lhs >= rhs - tol * (1.0 + abs(lhs))
    c = float(np.sum(A * B) / np.sum(B * B))
    fit_residual = float(np.linalg.norm(A - c * B) / np.linalg.norm(A))
    equality = fit_residual <= 1e-6 and c > 0
    if equality:
        passed = passed and abs(margin) <= 1e-6 * (1.0 + abs(lhs))
    return CheckReport(
        name="minkowski_det",
        passed=passed,
        tolerance=tol,
        lhs=lhs,
        rhs=rhs,
        margin=margin,
        details={"fitted_c": c, "fit_residual": fit_residual, "equality_case": equality},
    )


def random_spd_pairs(count: int, seed: int = 0, delta: float = 1e-3):
    """Yield (A, B) pairs sampled as G^T G + delta I (deterministic in seed)."""
    rng = np.random.default_rng(seed)
    eye = np.eye(2)
    for _ in range(count):
        Ga = rng.standard_normal((2, 2))
        Gb = rng.standard_normal((2, 2))
        yield Ga.T @ Ga + delta * eye, Gb.T @ Gb + delta * eye


def check_uvn_identity(
    u: ScalarField, v: ScalarField, grid: Grid, n: int | None = None, tol: float = 1e-12
) -> CheckReport:
    """Nodewise algebraic identity behind the p = n uniqueness argument:

        |u|^{n+1} + |v|^{n+1} - (|u||v|^n + |v||u|^n)
            = (|u| - |v|)^2 * sum_{i=1..n} |u|^{n-i} |v|^{i-1}  >= 0.
    """
    if n is None:
        n = grid.ndim
    au = np.abs(np.asarray(u, dtype=float))
    av = np.abs(np.asarray(v, dtype=float))
    lhs = au ** (n + 1) + av ** (n + 1) - (au * av**n + av * au**n)
    s = np.zeros_like(au)
    for i in range(1, n + 1):
        s += au ** (n - i) * av ** (i - 1)
    rhs = (au - av) ** 2 * s
    # error in units of the raised terms: the difference of the two raw sides
    # cannot be resolved below round-off of |u|^{n+1} + |v|^{n+1}
    scale = 1.0 + au ** (n + 1) + av ** (n + 1)
    err = np.abs(lhs - rhs) / scale
    worst = int(np.argmax(err))
    nonneg = bool(np.all(lhs >= -tol * scale))
    passed = bool(np.all(err <= tol)) and nonneg
    details = {"max_relative_error": float(err[worst]), "nonnegative": nonneg}
    if not passed:
        details["worst_node"] = list(map(float, grid.nodes_xy[worst]))
    return CheckReport(
        name="uvn_identity",
        passed=passed,
        tolerance=tol,
        lhs=float(lhs[worst]),
        rhs=float(rhs[worst]),
        margin=float(err[worst]),
        details=details,
        grid_meta=_grid_meta(grid),
    )


def cd1_invariant(
    sol: SystemSolution, s_list, n: int = 2, tol: float = 1e-10
) -> CheckReport:
    """Scaling invariance of gamma * mu^{p/n}.

    Rescaling u -> s u turns (sigma, sigma) into (s^n sigma, s^{-n^2/p} sigma)
    whose product gamma' mu'^{p/n} must equal sigma^{1 + p/n} for every s;
    that constant is the estimate of the domain invariant.
    """
    p = sol.p
    target = sol.sigma ** (1.0 + p / n)
    rows = []
    worst = 0.0
    for s in s_list:
        s = float(s)
        if s <= 0:
            raise ValueError("scale factors must be positive")
        gam = s**n * sol.sigma
        mu = s ** (-(n * n) / p) * sol.sigma
        prod = gam * mu ** (p / n)
        rel = abs(prod - target) / target
        worst = max(worst, rel)
        rows.append({"s": s, "gamma": gam, "mu": mu, "product": prod, "rel_error": rel})
    passed = worst <= tol
    return CheckReport(
        name="cd1_invariant",
        passed=passed,
        tolerance=tol,
        lhs=target,
        rhs=target,
        margin=worst,
        details={"C_estimate": target, "p": p, "scales": rows},
    )


def sup_bound_report(
    sol: SystemSolution,
    domain: ConvexDomain,
    window: tuple[float, float] = (1e-3, 1e3),
    family_values=None,
    bound_spread: float = 100.0,
) -> CheckReport:
    """Scale-free boundedness of sigma |Omega|^2 and ||u||^{n/p} / ||v||.

    Both quantities must lie in the admissibility window; if values from
    other domains of a family run are supplied, their common spread must stay
    within ``bound_spread``.  A window failure means "outside the configured
    window", never a contradiction of the underlying bounds.
    """
    n = 2
    om = area(domain)
    sig_om2 = sol.sigma * om * om
    sup_u = float(np.max(np.abs(sol.u)))
    sup_v = float(np.max(np.abs(sol.v)))
    ratio = sup_u ** (n / sol.p) / sup_v
    lo, hi = window
    passed = lo <= sig_om2 <= hi and lo <= ratio <= hi
    details = {
        "sigma_area2": sig_om2,
        "norm_ratio": ratio,
        "window": [lo, hi],
        "area": om,
    }
    if family_values:
        vals = [float(x) for x in family_values] + [sig_om2]
        spread = max(vals) / min(vals)
        details["family_spread"] = spread
        details["bound_spread"] = bound_spread
        passed = passed and spread <= bound_spread
    return CheckReport(
        name="sup_bounds",
        passed=passed,
        tolerance=0.0,
        lhs=sig_om2,
        rhs=ratio,
        margin=None if passed else min(sig_om2 - lo, hi - sig_om2, ratio - lo, hi - ratio),
        details=details,
    )


def distance_bound_report(
    u: ScalarField, domain: ConvexDomain, grid: Grid, max_ratio: float = 1e3
) -> CheckReport:
    """Linear growth from the boundary: |u(x)| / dist(x, boundary) must be
    bounded between positive constants; reports the min/max ratio."""
    u = np.asarray(u, dtype=float)
    if float(np.max(np.abs(u))) < 1e-14:
        raise ValueError("zero field")
    dist = boundary_distance(domain, grid.nodes_xy)
    r = np.abs(u) / dist
    rmin = float(r.min())
    rmax = float(r.max())
    passed = rmin > 0.0 and np.isfinite(rmax) and rmax / max(rmin, 1e-300) <= max_ratio
    details = {
        "ratio_min": rmin,
        "ratio_max": rmax,
        "node_min": list(map(float, grid.nodes_xy[int(np.argmin(r))])),
        "node_max": list(map(float, grid.nodes_xy[int(np.argmax(r))])),
    }
    return CheckReport(
        name="distance_bounds",
        passed=passed,
        tolerance=max_ratio,
        lhs=rmin,
        rhs=rmax,
        margin=rmin,
        details=details,
        grid_meta=_grid_meta(grid),
    )


def _seed_fields(grid: Grid, config: SpectralConfig, seed_count: int, seed: int):
    """Random discretely convex starting fields: smooth perturbations of the
    comparison solution, projected back to convexity by re-solving with the
    positive part of their Monge-Ampere image."""
    rng = np.random.default_rng(seed)
    psi = psi_field(grid, config.inner)
    base = ma_det(psi, grid)
    floor = 0.1 * float(np.median(base))
    x = grid.nodes_xy[:, 0]
    y = grid.nodes_xy[:, 1]
    fields = []
    for _ in range(seed_count):
        g = np.zeros_like(psi)
        for _ in range(3):
            a, b = rng.uniform(-3.0, 3.0, size=2)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            g += rng.uniform(-1.0, 1.0) * np.sin(a * x + b * y + phase)
        g /= max(1e-12, float(np.max(np.abs(g))))
        cand = psi * (1.0 + 0.35 * g)
        f_proj = np.maximum(ma_det(cand, grid), floor)
        w = solve_dirichlet(grid, f_proj, config.inner)
        fields.append(w / float(np.max(np.abs(w))))
    return fields


def uniqueness_experiment(
    grid: Grid,
    p: float,
    config: SpectralConfig | None = None,
    seed_count: int = 3,
    seed: int = 0,
    p_window: float = 0.25,
    sigma_tol: float = 1e-5,
    field_tol: float = 1e-4,
) -> CheckReport:
    """Solve the system from several random convex initializations and demand
    one normalized limit (sigma within sigma_tol relative, fields within
    field_tol in sup norm)."""
    if seed_count < 2:
        raise ValueError("need at least two seeds")
    n = grid.ndim
    if abs(p - n) > p_window:
        raise ValueError(f"p = {p} outside the tested window |p - n| <= {p_window}")
    if config is None:
        config = SpectralConfig()
    starts = _seed_fields(grid, config, seed_count, seed)
    sols = []
    for k, v0 in enumerate(starts):
        try:
            sols.append(solve_system(grid, p, config, initial_v=v0))
        except ConvergenceError as exc:
            return CheckReport(
                name="uniqueness",
                passed=False,
                tolerance=sigma_tol,
                margin=None,
                details={"error": f"seed {k} did not converge: {exc}"},
                grid_meta=_grid_meta(grid),
            )
    sigmas = np.array([s.sigma for s in sols])
    sig_spread = float((sigmas.max() - sigmas.min()) / sigmas.min())
    du = max(
        float(np.max(np.abs(a.u - b.u)))
        for i, a in enumerate(sols)
        for b in sols[i + 1 :]
    )
    dv = max(
        float(np.max(np.abs(a.v - b.v)))
        for i, a in enumerate(sols)
        for b in sols[i + 1 :]
    )
    passed = sig_spread <= sigma_tol and du <= field_tol and dv <= field_tol
    details = {
        "sigmas": [float(s) for s in sigmas],
        "sigma_spread": sig_spread,
        "u_spread": du,
        "v_spread": dv,
        "seed_count": seed_count,
        "field_tolerance": field_tol,
    }
    return CheckReport(
        name="uniqueness",
        passed=passed,
        tolerance=sigma_tol,
        lhs=sig_spread,
        rhs=max(du, dv),
        margin=sigma_tol - sig_spread,
        details=details,
        grid_meta=_grid_meta(grid),
    )
