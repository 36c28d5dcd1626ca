"""Grids, quadrature, interpolation and fixed-step propagation.

Everything here is a pure function of its inputs.  Times are in microseconds
and rates in rad/us throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Union

import numpy as np
from scipy.linalg import expm

__all__ = [
    "NumericalError",
    "StructuralError",
    "TimeGrid",
    "ComplexSeries",
    "cumulative_integral",
    "tail_integral",
    "quadrature",
    "midpoint_values",
    "refine_samples",
    "propagate_linear_ode",
    "step_doubling_error",
]

STENCIL = 6
STIFF_LIMIT = 2.5


class StructuralError(ValueError):
    """Shapes, lengths or channel counts do not fit together."""


class NumericalError(ArithmeticError):
    """A non-finite value turned up where a finite one is required."""

    def __init__(self, message: str, index: int | None = None) -> None:
        super().__init__(message)
        self.index = index


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid on ``[t_start, t_end]`` with ``n_points`` samples."""

    t_start: float
    t_end: float
    n_points: int

    def __post_init__(self) -> None:
        if not (np.isfinite(self.t_start) and np.isfinite(self.t_end)):
            raise StructuralError("grid bounds must be finite")
        if self.t_end <= self.t_start:
            raise StructuralError(f"t_end={self.t_end} must exceed t_start={self.t_start}")
        if int(self.n_points) != self.n_points or self.n_points < 3:
            raise StructuralError(f"n_points must be an integer >= 3, got {self.n_points}")

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / (self.n_points - 1)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.n_points)

    @property
    def midpoints(self) -> np.ndarray:
        t = self.times
        return 0.5 * (t[:-1] + t[1:])

    def refined(self) -> "TimeGrid":
        """Grid with every interval halved; shares all points with ``self``."""
        return TimeGrid(self.t_start, self.t_end, 2 * self.n_points - 1)

    def check(self, values: np.ndarray, what: str = "series") -> np.ndarray:
        values = np.asarray(values)
        if values.shape[-1:] != (self.n_points,):
            raise StructuralError(
                f"{what} has length {values.shape[-1] if values.ndim else 0}, "
                f"grid has {self.n_points} points"
            )
        return values


@dataclass(frozen=True)
class ComplexSeries:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.grid.check(self.values), dtype=complex)
        if values.ndim != 1:
            raise StructuralError("ComplexSeries values must be one-dimensional")
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise NumericalError(f"non-finite sample at index {bad[0]}", int(bad[0]))
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


# -- quadrature ---------------------------------------------------------------


@lru_cache(maxsize=None)
def _interval_weights(m: int, j: int) -> np.ndarray:
    """Weights integrating the Lagrange interpolant through nodes ``0..m-1``
    (unit spacing) over ``[j, j+1]``."""
    nodes = np.arange(m, dtype=float)
    weights = np.empty(m)
    for k in range(m):
        poly = np.poly1d([1.0])
        for other in nodes[nodes != k]:
            poly = poly * np.poly1d([1.0, -other]) / (k - other)
        antider = poly.integ()
        weights[k] = antider(j + 1) - antider(j)
    weights.setflags(write=False)
    return weights


def _increments(values: np.ndarray, dt: float, order: int) -> np.ndarray:
    """Integral of ``values`` over each grid interval (last axis)."""
    n = values.shape[-1]
    if n < 2:
        return np.zeros(values.shape[:-1] + (0,), dtype=values.dtype)
    trap = 0.5 * dt * (values[..., 1:] + values[..., :-1])
    if order == 2 or n < 3:
        return trap
    if order != STENCIL:
        raise ValueError(f"unsupported quadrature order {order}")
    m = min(STENCIL, n)
    half = m // 2
    inc = np.empty_like(trap)
    # interior: stencil centred on the interval
    lo, hi = half - 1, n - m + half
    if hi > lo:
        w = _interval_weights(m, half - 1)
        acc = np.zeros(values.shape[:-1] + (hi - lo,), dtype=np.result_type(values, float))
        for k in range(m):
            acc = acc + w[k] * values[..., k : k + hi - lo]
        inc[..., lo:hi] = dt * acc
    for i in list(range(0, min(lo, n - 1))) + list(range(max(hi, 0), n - 1)):
        start = min(max(i - half + 1, 0), n - m)
        w = _interval_weights(m, i - start)
        inc[..., i] = dt * np.tensordot(values[..., start : start + m], w, axes=([-1], [0]))
    # Keep sign-definite data sign-definite: a high-order increment that
    # crosses zero between same-signed endpoints falls back to the trapezoid.
    if np.isrealobj(values):
        a, b = values[..., :-1], values[..., 1:]
        flip = ((a >= 0) & (b >= 0) & (inc < 0)) | ((a <= 0) & (b <= 0) & (inc > 0))
        inc = np.where(flip, trap, inc)
    return inc


def _as_samples(series, grid: TimeGrid) -> np.ndarray:
    values = series.values if isinstance(series, ComplexSeries) else np.asarray(series)
    values = grid.check(values)
    if not np.all(np.isfinite(values)):
        raise NumericalError("quadrature input contains non-finite samples")
    return values


def cumulative_integral(series, grid: TimeGrid, *, order: int = STENCIL) -> np.ndarray:
    """Running integral from ``grid.t_start``; the first entry is 0.

    ``order=6`` integrates the local degree-5 interpolant on each interval
    (exact for polynomials up to degree 5); ``order=2`` is the plain
    trapezoid rule.  For nonnegative input the result is nondecreasing.
    """
    values = _as_samples(series, grid)
    inc = _increments(values, grid.dt, order)
    out = np.zeros(values.shape, dtype=inc.dtype)
    out[..., 1:] = np.cumsum(inc, axis=-1)
    return out


def tail_integral(series, grid: TimeGrid, *, order: int = STENCIL) -> np.ndarray:
    """Integral from each grid point to ``grid.t_end``; the last entry is 0.

    Accumulated from the far end so small tails keep full relative accuracy.
    """
    values = _as_samples(series, grid)
    inc = _increments(values, grid.dt, order)
    out = np.zeros(values.shape, dtype=inc.dtype)
    out[..., :-1] = np.cumsum(inc[..., ::-1], axis=-1)[..., ::-1]
    return out


def quadrature(series, grid: TimeGrid, *, order: int = STENCIL):
    """Integral over the whole grid (same rule as :func:`cumulative_integral`)."""
    return cumulative_integral(series, grid, order=order)[..., -1]


def integrate_samples(values: np.ndarray, dt: float, *, order: int = STENCIL):
    """Integral of samples with spacing ``dt`` along the last axis.

    Works for any length, including the short segments that appear on a
    triangular domain.
    """
    values = np.asarray(values)
    if values.shape[-1] < 2:
        return np.zeros(values.shape[:-1], dtype=np.result_type(values, float))
    return np.sum(_increments(values, dt, order), axis=-1)


# -- interpolation ------------------------------------------------------------


def midpoint_values(samples: np.ndarray, *, method: str = "cubic") -> np.ndarray:
    """Values halfway between consecutive samples along axis 0."""
    samples = np.asarray(samples)
    n = samples.shape[0]
    if method == "linear" or n < 4:
        return 0.5 * (samples[:-1] + samples[1:])
    if method != "cubic":
        raise ValueError(f"unknown interpolation method {method!r}")
    mid = np.empty((n - 1,) + samples.shape[1:], dtype=np.result_type(samples, float))
    mid[1:-1] = (-samples[:-3] + 9.0 * samples[1:-2] + 9.0 * samples[2:-1] - samples[3:]) / 16.0
    mid[0] = (3.0 * samples[0] + 6.0 * samples[1] - samples[2]) / 8.0
    mid[-1] = (3.0 * samples[-1] + 6.0 * samples[-2] - samples[-3]) / 8.0
    return mid


def refine_samples(samples: np.ndarray, *, method: str = "cubic") -> np.ndarray:
    """Samples on the refined grid: originals interleaved with midpoints."""
    samples = np.asarray(samples)
    mid = midpoint_values(samples, method=method)
    out = np.empty((2 * samples.shape[0] - 1,) + samples.shape[1:], dtype=mid.dtype)
    out[0::2] = samples
    out[1::2] = mid
    return out


# -- propagation --------------------------------------------------------------

Generator = Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]


def _sample_generator(generator: Generator, grid: TimeGrid, midpoints, method: str):
    if callable(generator):
        samples = np.asarray(generator(grid.times), dtype=complex)
        mid = np.asarray(generator(grid.midpoints), dtype=complex)
    else:
        samples = np.asarray(generator, dtype=complex)
        if samples.shape[0] != grid.n_points:
            raise StructuralError(
                f"generator has {samples.shape[0]} samples, grid has {grid.n_points}"
            )
        _check_finite(samples)
        mid = midpoint_values(samples, method=method) if midpoints is None else midpoints
        mid = np.asarray(mid, dtype=complex)
    if mid.shape != (grid.n_points - 1,) + samples.shape[1:]:
        raise StructuralError("half-step generator samples have the wrong shape")
    _check_finite(samples)
    _check_finite(mid)
    return samples, mid


def _check_finite(arr: np.ndarray) -> None:
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise StructuralError("generator samples must have shape (n, d, d)")
    bad = np.flatnonzero(~np.all(np.isfinite(arr), axis=(1, 2)))
    if bad.size:
        raise NumericalError(f"non-finite generator sample at index {bad[0]}", int(bad[0]))


def propagate_linear_ode(
    generator: Generator,
    initial: np.ndarray,
    grid: TimeGrid,
    *,
    midpoints: np.ndarray | None = None,
    interpolation: str = "cubic",
) -> np.ndarray:
    """Solve ``dV/dt = G(t) V`` with classic fixed-step RK4.

    Steps with ``dt * |G| > STIFF_LIMIT`` use ``expm(dt * G_mid)`` instead.

    Parameters
    ----------
    generator
        Either samples of shape ``(n, d, d)`` on ``grid`` or a callable
        mapping an array of times to such samples.
    initial
        ``V(t_start)``; a ``(d,)`` vector or ``(d, k)`` matrix.
    midpoints
        Optional generator values at the half steps.  When omitted they are
        interpolated from the samples (``interpolation`` is ``"cubic"`` or
        ``"linear"``) or evaluated from the callable.

    Returns
    -------
    np.ndarray
        ``V`` at every grid point, shape ``(n,) + initial.shape``.
    """
    G, Gm = _sample_generator(generator, grid, midpoints, interpolation)
    initial = np.asarray(initial, dtype=complex)
    d = G.shape[1]
    if initial.shape[0] != d:
        raise StructuralError(f"initial has leading dimension {initial.shape[0]}, generator is {d}x{d}")
    h = grid.dt
    eye = np.eye(d)
    G0, G1 = G[:-1], G[1:]
    # one-step transition matrices; the sequential part is a plain product
    k2 = Gm @ (eye + 0.5 * h * G0)
    k3 = Gm @ (eye + 0.5 * h * k2)
    k4 = G1 @ (eye + h * k3)
    steps = eye + (h / 6.0) * (G0 + 2.0 * k2 + 2.0 * k3 + k4)
    # RK4 is unstable once h * |G| leaves its stability region; there the
    # exponential midpoint step is used instead (contractive for a
    # dissipative midpoint generator, second order)
    size = h * np.max(np.linalg.norm(np.stack([G0, Gm, G1]), ord=2, axis=(2, 3)), axis=0)
    stiff = np.flatnonzero(size > STIFF_LIMIT)
    if stiff.size:
        steps[stiff] = expm(h * Gm[stiff])
    out = np.empty((grid.n_points,) + initial.shape, dtype=complex)
    out[0] = initial
    current = initial
    for k in range(grid.n_points - 1):
        current = steps[k] @ current
        out[k + 1] = current
    return out


def step_doubling_error(
    generator: Generator,
    initial: np.ndarray,
    grid: TimeGrid,
    *,
    interpolation: str = "cubic",
) -> float:
    """Max elementwise gap between propagation on ``grid`` and on the
    2x-refined grid, compared at the shared points."""
    coarse = propagate_linear_ode(generator, initial, grid, interpolation=interpolation)
    fine_grid = grid.refined()
    if callable(generator):
        fine = propagate_linear_ode(generator, initial, fine_grid)
    else:
        samples = refine_samples(np.asarray(generator, dtype=complex), method=interpolation)
        fine = propagate_linear_ode(samples, initial, fine_grid, interpolation=interpolation)
    return float(np.max(np.abs(coarse - fine[::2])))
