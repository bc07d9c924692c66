"""
Nonlinear least-squares fits: sqrt(P) Rabi scaling, avoided-crossing
hyperbolas, and spectroscopic extraction of cell parameters.

All fits go through :func:`least_squares_fit`, a thin layer over MINPACK's
Levenberg-Marquardt (``scipy.optimize.least_squares(method="lm")``) with a
central-difference Jacobian, a gradient self-check at the start point and
a Jacobian-based covariance at the optimum.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import least_squares

from . import atom_data
from .eit import dressed_branches
from .spectrum import MediumConfig, transmission_spectrum

__all__ = [
    "DataSeries",
    "FitResult",
    "FitError",
    "RankDeficiencyError",
    "IllConditionedWarning",
    "DegenerateCrossingWarning",
    "central_jacobian",
    "least_squares_fit",
    "fit_sqrt_scaling",
    "fit_avoided_crossing",
    "fit_spectrum_parameters",
    "branch_positions",
    "SPECTRUM_PARAMETERS",
]

MAX_ITERATIONS = 200
GRADIENT_TOL = 1e-10
GRADIENT_CHECK_TOL = 1e-6


class FitError(RuntimeError):
    """The fit cannot be set up or evaluated."""


class RankDeficiencyError(FitError):
    """The data do not constrain every free parameter."""


class IllConditionedWarning(UserWarning):
    """Parameters are only weakly constrained; uncertainties are large."""


class DegenerateCrossingWarning(UserWarning):
    """The fitted coupling vanishes; the branches do not repel."""


@dataclass(frozen=True, eq=False)
class DataSeries:
    x: np.ndarray
    y: np.ndarray
    y_sigma: np.ndarray | None = None
    x_unit: str = ""
    y_unit: str = ""

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise ValueError("x and y must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("data must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if self.y_sigma is not None:
            s = np.broadcast_to(np.asarray(self.y_sigma, dtype=float), y.shape).copy()
            if np.any(~np.isfinite(s)) or np.any(s <= 0):
                raise ValueError("y_sigma must be finite and positive")
            object.__setattr__(self, "y_sigma", s)

    def __len__(self) -> int:
        return self.x.size


@dataclass(frozen=True)
class FitResult:
    parameters: dict[str, float]
    uncertainties: dict[str, float]
    residual_norm: float
    converged: bool
    iterations: int
    message: str = ""
    gradient_norm: float = 0.0
    gradient_check: float = 0.0
    covariance: np.ndarray | None = field(default=None, compare=False, repr=False)
    diagnostics: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        return {
            "parameters": {
                k: {"value": v, "sigma": self.uncertainties.get(k, math.nan)}
                for k, v in self.parameters.items()
            },
            "residual_norm": self.residual_norm,
            "converged": self.converged,
            "iterations": self.iterations,
            "gradient_norm": self.gradient_norm,
            "gradient_check": self.gradient_check,
            "message": self.message,
            "diagnostics": dict(self.diagnostics),
        }


def _steps(p: np.ndarray, typical: np.ndarray) -> np.ndarray:
    return 6e-6 * np.maximum(np.abs(p), typical)


def central_jacobian(fun: Callable, p, typical=None) -> np.ndarray:
    """Central-difference Jacobian with steps relative to each parameter."""
    p = np.asarray(p, dtype=float)
    typical = np.ones_like(p) if typical is None else np.asarray(typical, dtype=float)
    h = _steps(p, typical)
    cols = []
    for j in range(p.size):
        dp = np.zeros_like(p)
        dp[j] = h[j]
        cols.append((np.asarray(fun(p + dp)) - np.asarray(fun(p - dp))) / (2 * h[j]))
    return np.column_stack(cols)


def _gradient_check(fun, p, typical) -> float:
    """Relative mismatch between J^T r and a direct difference of 0.5 |r|^2."""
    r = np.asarray(fun(p))
    g = central_jacobian(fun, p, typical).T @ r
    h = 0.5 * _steps(p, typical)
    direct = np.empty_like(g)
    for j in range(p.size):
        dp = np.zeros_like(p)
        dp[j] = h[j]
        fp = 0.5 * np.sum(np.asarray(fun(p + dp)) ** 2)
        fm = 0.5 * np.sum(np.asarray(fun(p - dp)) ** 2)
        direct[j] = (fp - fm) / (2 * h[j])
    # Cauchy-Schwarz bound on |J^T r|; zero when the start point is exact
    scale = float(np.linalg.norm(central_jacobian(fun, p, typical)) * np.linalg.norm(r))
    if scale == 0:
        return 0.0
    return float(np.linalg.norm(g - direct) / scale)


def _scaled_gradient(J: np.ndarray, r: np.ndarray, r_ref: float = 0.0) -> float:
    """max_j |J_j . r| / (|J_j| max(|r|, r_ref)).

    With ``r_ref = 0`` this is MINPACK's cosine measure; passing the initial
    residual norm keeps it meaningful when the fit drives ``r`` to zero.
    """
    rn = max(float(np.linalg.norm(r)), r_ref)
    if rn == 0:
        return 0.0
    cn = np.linalg.norm(J, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        cos = np.where(cn > 0, np.abs(J.T @ r) / (cn * rn), 0.0)
    return float(cos.max()) if cos.size else 0.0


def _polish(residuals, p, typ, gtol, r0_norm, max_steps: int = 5):
    """Undamped Gauss-Newton steps from the LM optimum.

    MINPACK's ftol/xtol floors usually stop it at a gradient cosine of
    ~1e-9; near the minimum a plain Gauss-Newton step removes the remaining
    gradient down to rounding.
    """
    r = np.asarray(residuals(p))
    J = central_jacobian(residuals, p, typ)
    for _ in range(max_steps):
        if _scaled_gradient(J, r, r0_norm) <= gtol:
            break
        step, *_ = np.linalg.lstsq(J, -r, rcond=None)
        trial = p + step
        r_trial = np.asarray(residuals(trial))
        if not np.all(np.isfinite(r_trial)) or r_trial @ r_trial > r @ r * (1 + 1e-12):
            break
        p, r = trial, r_trial
        J = central_jacobian(residuals, p, typ)
    return p, r, J


def least_squares_fit(
    residuals: Callable[[np.ndarray], np.ndarray],
    initial: Mapping[str, float],
    typical: Mapping[str, float] | None = None,
    absolute_sigma: bool = False,
    max_iterations: int = MAX_ITERATIONS,
    gtol: float = GRADIENT_TOL,
) -> FitResult:
    """Minimize ``0.5 |residuals(p)|^2`` over the named parameters.

    ``residuals`` must already be weighted (divided by sigma).  With
    ``absolute_sigma`` the covariance is (J^T J)^-1; otherwise it is scaled
    by the reduced chi-square.
    """
    names = list(initial)
    p0 = np.array([float(initial[k]) for k in names])
    # unit scale for parameters that start at zero without a given scale
    typ = np.array([abs(float((typical or {}).get(k, 0.0))) or abs(v) or 1.0 for k, v in zip(names, p0)])
    r0 = np.asarray(residuals(p0), dtype=float)
    if not np.all(np.isfinite(r0)):
        raise FitError("residuals are not finite at the initial guess")
    if r0.size < len(names):
        raise RankDeficiencyError(f"{r0.size} residuals for {len(names)} parameters")

    check = _gradient_check(residuals, p0, typ)
    J0 = central_jacobian(residuals, p0, typ)
    if np.linalg.matrix_rank(J0 / np.maximum(np.linalg.norm(J0, axis=0), 1e-300)) < len(names):
        raise RankDeficiencyError("Jacobian is rank deficient at the initial guess")

    sol = least_squares(
        residuals,
        p0,
        jac=lambda p: central_jacobian(residuals, p, typ),
        method="lm",
        x_scale=typ,
        max_nfev=max_iterations,
        ftol=1e-15,
        xtol=1e-15,
        gtol=gtol,
    )
    p, r, J = _polish(residuals, sol.x, typ, gtol, float(np.linalg.norm(r0)))
    grad = _scaled_gradient(J, r, float(np.linalg.norm(r0)))
    dof = r.size - len(names)

    diagnostics: dict = {"status": int(sol.status)}
    JtJ = J.T @ J
    try:
        cov = np.linalg.inv(JtJ)
    except np.linalg.LinAlgError:
        cov = np.full_like(JtJ, np.inf)
    if not absolute_sigma:
        cov = cov * (float(r @ r) / dof if dof > 0 else np.inf)
    d = np.sqrt(np.clip(np.diag(JtJ), 1e-300, None))
    cond = np.linalg.cond(JtJ / np.outer(d, d))
    diagnostics["condition"] = float(cond)

    sigma = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    # MINPACK stops on the first of ftol/xtol/gtol; all three mean a stationary point
    converged = bool(sol.status > 0 and grad <= gtol)
    return FitResult(
        parameters={k: float(v) for k, v in zip(names, p)},
        uncertainties={k: float(s) for k, s in zip(names, sigma)},
        residual_norm=float(np.linalg.norm(r)),
        converged=converged,
        iterations=int(sol.njev if sol.njev is not None else sol.nfev),
        message=sol.message,
        gradient_norm=grad,
        gradient_check=check,
        covariance=cov,
        diagnostics=diagnostics,
    )


def _weights(series: DataSeries) -> np.ndarray:
    return np.ones_like(series.y) if series.y_sigma is None else 1.0 / series.y_sigma


def fit_sqrt_scaling(series: DataSeries, initial: float | None = None) -> FitResult:
    """Fit ``y = a sqrt(x)`` (e.g. splitting versus control power)."""
    x, y = series.x, series.y
    if x.size < 2:
        raise ValueError("need at least two points")
    if np.any(x <= 0):
        raise ValueError("powers must be positive")
    if np.unique(x).size < 2:
        raise RankDeficiencyError("all points share one abscissa")
    w = _weights(series)
    s = np.sqrt(x)
    a0 = float(np.sum(w**2 * s * y) / np.sum(w**2 * s * s)) if initial is None else float(initial)
    if a0 <= 0:
        a0 = abs(a0) or 1.0

    def res(p):
        return w * (p[0] * s - y)

    out = least_squares_fit(res, {"a": a0}, absolute_sigma=series.y_sigma is not None)
    if out.parameters["a"] <= 0:
        return replace(out, converged=False, message="non-positive coefficient")
    return out


def _hyperbola(dc, branch, omega, offset):
    root = np.sqrt(dc * dc + omega * omega)
    return 0.5 * (dc + branch * root) + offset


def fit_avoided_crossing(
    series: DataSeries,
    branches: Sequence[int],
    initial: Mapping[str, float] | None = None,
    fit_offset: bool = True,
) -> FitResult:
    """Fit peak positions to dressed-state branches.

    ``series.x`` holds control detunings, ``series.y`` peak positions and
    ``branches`` the branch (+1 upper, -1 lower) of every point.  Free
    parameters: ``omega`` (control Rabi frequency) and ``offset`` (shift
    of the probe axis).
    """
    br = np.asarray(branches, dtype=float)
    if br.shape != series.y.shape or not np.all(np.isin(br, (-1.0, 1.0))):
        raise ValueError("branches must be +1/-1 per data point")
    dc, y = series.x, series.y
    w = _weights(series)

    init = dict(initial or {})
    y0 = float(init.get("offset", 0.0))
    if "omega" in init:
        om0 = float(init["omega"])
    else:
        yp = y - y0
        est = 4 * yp * (yp - dc)
        om0 = math.sqrt(max(float(np.median(est)), 0.0))
    scale = max(float(np.max(np.abs(dc))), float(np.max(np.abs(y))), 1.0)
    om0 = om0 or 0.1 * scale
    start = {"omega": om0}
    if fit_offset:
        start["offset"] = y0

    def res(p):
        off = p[1] if fit_offset else y0
        return w * (_hyperbola(dc, br, p[0], off) - y)

    typical = {"omega": scale, "offset": scale}
    out = least_squares_fit(res, start, typical, absolute_sigma=series.y_sigma is not None)
    params = dict(out.parameters)
    params["omega"] = abs(params["omega"])
    diag = dict(out.diagnostics)
    omega, sig = params["omega"], out.uncertainties["omega"]
    if omega <= 1e-6 * scale:
        diag["degenerate"] = True
        warnings.warn("fitted coupling is zero: no avoided crossing", DegenerateCrossingWarning, stacklevel=2)
    elif not math.isfinite(sig) or sig > 0.5 * omega or diag["condition"] > 1e8:
        diag["ill_conditioned"] = True
        warnings.warn(
            "points lie on the asymptotes; the coupling is poorly constrained",
            IllConditionedWarning,
            stacklevel=2,
        )
    return replace(out, parameters=params, diagnostics=diag)


def branch_positions(control_detunings, omega: float, offset: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Upper and lower branch positions for an array of control detunings."""
    up, lo = zip(*(dressed_branches(float(d), omega) for d in np.asarray(control_detunings, dtype=float)))
    return np.array(up) + offset, np.array(lo) + offset


SPECTRUM_PARAMETERS = ("temperature", "B", "rb87_fraction", "buffer_broadening_fwhm")


def _medium_with(medium: MediumConfig, values: Mapping[str, float]) -> MediumConfig:
    changes = {}
    for k, v in values.items():
        if k == "rb87_fraction":
            changes["isotope_mixture"] = atom_data.mixture(min(max(v, 0.0), 1.0))
        elif k in ("B", "buffer_broadening_fwhm"):
            changes[k] = max(v, 0.0)
        else:
            changes[k] = v
    return replace(medium, **changes)


def fit_spectrum_parameters(
    measured: DataSeries,
    medium: MediumConfig,
    free: Sequence[str] = ("temperature", "B"),
    initial: Mapping[str, float] | None = None,
    line_choice: str = "D2",
    min_model_od: float = 1e-3,
) -> FitResult:
    """Fit transmission data with the vapor-cell forward model.

    ``measured.x`` are detunings (Hz), ``measured.y`` transmissions.
    ``medium`` fixes every parameter not listed in ``free``; ``initial``
    overrides the starting values of the free ones.
    """
    bad = set(free) - set(SPECTRUM_PARAMETERS)
    if bad:
        raise ValueError(f"unknown free parameters {sorted(bad)}; choose from {SPECTRUM_PARAMETERS}")
    if len(set(free)) != len(free):
        raise ValueError("duplicate free parameters")
    x = measured.x
    w = _weights(measured)

    def current(name: str) -> float:
        if name == "rb87_fraction":
            return float(medium.isotope_mixture.get("Rb87", 0.0))
        return float(getattr(medium, name))

    start = {k: float((initial or {}).get(k, current(k))) for k in free}

    def model(values: Mapping[str, float]) -> np.ndarray:
        return transmission_spectrum(_medium_with(medium, values), line_choice, x).transmission

    first = transmission_spectrum(_medium_with(medium, start), line_choice, x)
    if first.optical_depth.max() < min_model_od:
        raise FitError(
            "no model line overlaps the data window at the initial guess "
            f"(max OD {first.optical_depth.max():.3g})"
        )
    if not free:
        r = w * (first.transmission - measured.y)
        return FitResult({}, {}, float(np.linalg.norm(r)), True, 0, "no free parameters")

    names = list(free)

    def res(p):
        return w * (model(dict(zip(names, p))) - measured.y)

    typical = {
        "temperature": 300.0,
        "B": 1.0,
        "rb87_fraction": 1.0,
        "buffer_broadening_fwhm": 1e8,
    }
    return least_squares_fit(res, start, typical, absolute_sigma=measured.y_sigma is not None)
