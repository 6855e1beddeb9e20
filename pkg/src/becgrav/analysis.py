"""Sinusoidal fringe fitting, gravity extraction and mid-fringe precision.

Fringes are fitted to

    P(α) = ½ (A + V cos(2π (α − α₀) / period))

by Levenberg-Marquardt least squares from four starting phases a quarter
period apart. Uncertainties are the covariance of the converged fit scaled
by the reduced χ². α₀ is reported on the fringe nearest the Doppler chirp of
the configured reference gravity.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import least_squares

from .constants import RB87, PhysicalConstants
from .source import doppler_chirp_rate

MIN_POINTS = 6
MID_FRINGE_COS = 0.5


class UnderSampledError(ValueError):
    """Too few points, or too short a span, to fit a fringe."""


class DegenerateFringeError(ValueError):
    """Visibility indistinguishable from zero."""


class NotConvergedError(RuntimeError):
    """The fit did not converge and cannot be used downstream."""


@dataclass(frozen=True)
class FringeFit:
    """Fitted fringe parameters with 1-σ uncertainties.

    ``alpha0`` and ``period`` in Hz/s. ``period_fixed`` records whether the
    period was held at the guess.
    """

    offset: float
    visibility: float
    alpha0: float
    period: float
    offset_err: float
    visibility_err: float
    alpha0_err: float
    period_err: float
    residual_rms: float
    chi2_reduced: float
    n_points: int
    converged: bool
    period_fixed: bool
    message: str = ""

    UNITS = {
        "offset": "1", "visibility": "1", "alpha0": "Hz/s", "period": "Hz/s",
        "offset_err": "1", "visibility_err": "1", "alpha0_err": "Hz/s", "period_err": "Hz/s",
        "residual_rms": "1", "chi2_reduced": "1", "n_points": "1",
    }

    def predict(self, alpha):
        ph = 2.0 * math.pi * (np.asarray(alpha, dtype=float) - self.alpha0) / self.period
        return 0.5 * (self.offset + self.visibility * np.cos(ph))

    def to_dict(self) -> dict:
        return asdict(self)


def _model(params, x, fixed_scale):
    A, V, x0 = params[:3]
    s = fixed_scale if fixed_scale is not None else params[3]
    return 0.5 * (A + V * np.cos(2.0 * math.pi * (x - x0) / s))


def fit_fringes(
    scan,
    period_guess: float,
    fix_period: bool = False,
    constants: PhysicalConstants = RB87,
    g_ref: float | None = None,
    weighted: bool = True,
    alpha_ref: float | None = None,
) -> FringeFit:
    """Least-squares sinusoid fit of a :class:`~becgrav.interferometer.FringeScan`.

    ``scan`` may be any object with ``alpha`` and ``population`` arrays. When
    it also carries positive per-point ``atoms`` and ``weighted`` is set, a
    second pass weights each point by its binomial variance at the fitted
    population. The reported α₀ is the fringe nearest ``alpha_ref`` (Hz/s),
    which defaults to the Doppler chirp of ``g_ref``.
    """
    alpha = np.asarray(scan.alpha, dtype=float)
    P = np.asarray(scan.population, dtype=float)
    if alpha.size < MIN_POINTS:
        raise UnderSampledError(f"need at least {MIN_POINTS} points, got {alpha.size}")
    if not period_guess > 0:
        raise ValueError("period_guess must be positive")
    span = float(alpha.max() - alpha.min())
    if span < period_guess * (1 - 1e-9):
        raise UnderSampledError(f"scan spans {span:.4g} Hz/s, less than one period ({period_guess:.4g} Hz/s)")

    # work in units of the guessed period about the scan centre
    centre = 0.5 * (alpha.max() + alpha.min())
    x = (alpha - centre) / period_guess
    fixed = 1.0 if fix_period else None
    A0 = 2.0 * float(np.mean(P))
    V0 = max(float(P.max() - P.min()), 1e-3)

    def solve(p0, w):
        try:
            return least_squares(lambda q: (_model(q, x, fixed) - P) * w, p0, method="lm", x_scale="jac")
        except ValueError as exc:  # fewer residuals than parameters
            raise UnderSampledError(str(exc)) from exc

    w = np.ones_like(P)
    best = None
    for k in range(4):
        res = solve([A0, V0, 0.25 * k] + ([] if fix_period else [1.0]), w)
        if best is None or res.cost < best.cost:
            best = res

    # binomial counting noise is largest at mid-fringe; refit with its variance
    atoms = np.asarray(getattr(scan, "atoms", np.zeros(0)), dtype=float)
    if weighted and atoms.size == P.size and np.all(atoms > 0):
        pred = np.clip(_model(best.x, x, fixed), 0.0, 1.0)
        var = np.maximum(pred * (1.0 - pred), 1.0 / atoms) / atoms
        w = 1.0 / np.sqrt(var)
        best = solve(best.x, w / w.mean())

    q = best.x.copy()
    J = best.jac
    npar = q.size
    dof = alpha.size - npar
    ssr = float(np.sum(best.fun**2))
    chi2 = ssr / dof if dof > 0 else float("nan")
    try:
        cov = np.linalg.inv(J.T @ J) * (chi2 if dof > 0 else 0.0)
    except np.linalg.LinAlgError:
        cov = np.full((npar, npar), np.nan)

    # map (A, V, x0, s) -> (A, V, α₀, period), flipping negative V
    scale = 1.0 if fix_period else abs(q[3])
    sign = 1.0 if fix_period else math.copysign(1.0, q[3])
    if q[1] < 0:
        q[1] = -q[1]
        q[2] += 0.5 * scale
    if alpha_ref is None:
        alpha_ref = doppler_chirp_rate(constants.g_ref if g_ref is None else g_ref, 0.0, constants)
    target = (alpha_ref - centre) / period_guess
    m = round((target - q[2]) / scale)
    q[2] += m * scale

    # Jacobian of the reported parameters w.r.t. the fitted ones
    T = np.zeros((4, npar))
    T[0, 0] = 1.0
    T[1, 1] = 1.0
    T[2, 2] = period_guess
    if not fix_period:
        T[2, 3] = sign * m * period_guess
        T[3, 3] = sign * period_guess
    cov_out = T @ cov @ T.T
    err = np.sqrt(np.clip(np.diag(cov_out), 0.0, None))
    if fix_period:
        err[3] = 0.0

    fit = FringeFit(
        offset=float(q[0]),
        visibility=float(q[1]),
        alpha0=float(centre + q[2] * period_guess),
        period=float(scale * period_guess),
        offset_err=float(err[0]),
        visibility_err=float(err[1]),
        alpha0_err=float(err[2]),
        period_err=float(err[3]),
        residual_rms=float(np.sqrt(np.mean((_model(best.x, x, fixed) - P) ** 2))),
        chi2_reduced=chi2,
        n_points=int(alpha.size),
        converged=bool(best.success),
        period_fixed=bool(fix_period),
        message=str(best.message),
    )
    if fit.residual_rms > 0 and fit.visibility < 3.0 * fit.visibility_err:
        raise DegenerateFringeError(
            f"visibility {fit.visibility:.3g} ± {fit.visibility_err:.2g} is below 3σ; no fringe to fit"
        )
    return fit


def extract_g(fit: FringeFit, constants: PhysicalConstants = RB87, tilt: float = 0.0) -> tuple[float, float]:
    """g = π α₀ / (k cos θ) and its 1-σ uncertainty, in m/s²."""
    if not fit.converged:
        raise NotConvergedError("cannot extract g from a non-converged fit")
    if not abs(tilt) < math.pi / 2:
        raise ValueError("|tilt| must be below π/2")
    factor = math.pi / (constants.wavenumber * math.cos(tilt))
    return fit.alpha0 * factor, fit.alpha0_err * factor


@dataclass(frozen=True)
class MidFringePrecision:
    """Phase noise near mid-fringe.

    ``delta_phi`` is the per-shot phase noise (rad), ``phase`` the total
    interferometer phase 2πα₀/period (rad), ``relative`` their ratio and
    ``per_root_hz`` the ratio times √(cycle time), in Hz^-1/2.
    """

    population_noise: float
    delta_phi: float
    phase: float
    relative: float
    per_root_hz: float
    n_points: int


def mid_fringe_precision(fit: FringeFit, scan, cycle_time: float | None = None) -> MidFringePrecision:
    """Relative phase precision from the population scatter at mid-fringe.

    Points with |cos(phase)| ≤ 0.5 are used. ΔP is the RMS residual about the
    fit there, ΔΦ = 2ΔP/V.
    """
    if not fit.converged:
        raise NotConvergedError("precision needs a converged fit")
    if fit.visibility < 3.0 * fit.visibility_err or fit.visibility <= 0:
        raise DegenerateFringeError("visibility below 3σ of zero; precision undefined")
    if cycle_time is None:
        cycle_time = (getattr(scan, "metadata", None) or {}).get("cycle_time")
    if cycle_time is None or not cycle_time > 0:
        raise ValueError("a positive cycle time is required")
    alpha = np.asarray(scan.alpha, dtype=float)
    P = np.asarray(scan.population, dtype=float)
    ph = 2.0 * math.pi * (alpha - fit.alpha0) / fit.period
    mid = np.abs(np.cos(ph)) <= MID_FRINGE_COS
    if mid.sum() < 3:
        raise UnderSampledError(f"only {int(mid.sum())} points near mid-fringe")
    resid = P[mid] - fit.predict(alpha[mid])
    dP = float(np.sqrt(np.mean(resid**2)))
    dphi = 2.0 * dP / fit.visibility
    phase = 2.0 * math.pi * fit.alpha0 / fit.period
    rel = dphi / phase
    return MidFringePrecision(dP, dphi, phase, rel, rel * math.sqrt(cycle_time), int(mid.sum()))
