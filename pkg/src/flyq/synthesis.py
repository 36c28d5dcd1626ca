"""Closed-form coupling and detuning schedules for shaped single photons.

Every coupling rate here has the form ``|target|^2 / population`` where the
population is a running integral of target densities, looking into the
future for emission and into the past for absorption.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    GAMMA_MAX,
    PHASE_FLOOR,
    ClampRecord,
    ControlSchedule,
    Envelope,
    phase_profile,
    phase_rate,
)
from .numerics import StructuralError, TimeGrid, cumulative_integral, quadrature, tail_integral

DEN_FLOOR = 1e-8
MARGIN_TOL = 1e-10
PHASE_TOL = 1e-6
# relative level above which a target density counts as "present"
NUMERATOR_FLOOR = 1e-8


class PhaseMismatch(ValueError):
    def __init__(self, message: str, deviation: float) -> None:
        super().__init__(message)
        self.deviation = deviation


class NotRealizable(ValueError):
    def __init__(self, report: "RealizabilityReport") -> None:
        first = report.first_violation
        where = f" (first violation at t={first:.6g} us)" if first is not None else ""
        super().__init__(f"target pair violates tail dominance{where}")
        self.report = report


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Inclusive index ranges of the True stretches of ``mask``."""
    padded = np.concatenate(([False], mask, [False])).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    return [(int(a), int(b) - 1) for a, b in zip(edges[::2], edges[1::2])]


@dataclass(frozen=True)
class RealizabilityReport:
    grid: TimeGrid
    realizable: bool
    violation_times: tuple[tuple[float, float], ...]
    margin: np.ndarray

    @property
    def first_violation(self) -> float | None:
        return self.violation_times[0][0] if self.violation_times else None

    def as_dict(self) -> dict:
        return {
            "realizable": self.realizable,
            "violation_times_us": [list(v) for v in self.violation_times],
            "min_margin": float(np.min(self.margin)),
        }


def check_tail_dominance(
    xi1: Envelope, xi2: Envelope, *, margin_tol: float = MARGIN_TOL
) -> RealizabilityReport:
    """Is the future mass of ``xi2`` strictly above that of ``xi1`` wherever
    either target is present?"""
    grid = _same_grid(xi1, xi2)
    d1, d2 = xi1.density, xi2.density
    margin = tail_integral(d2 - d1, grid)
    present = (d1 > NUMERATOR_FLOOR * d1.max()) | (d2 > NUMERATOR_FLOOR * d2.max())
    # both tails are pinned to 0 at the window edges
    present[0] = present[-1] = False
    bad = present & (margin <= margin_tol)
    t = grid.times
    ranges = tuple((float(t[a]), float(t[b])) for a, b in _runs(bad))
    return RealizabilityReport(grid, not ranges, ranges, margin)


def clamp_policy(
    numerator: np.ndarray,
    denominator: np.ndarray,
    grid: TimeGrid,
    *,
    total_mass: float,
    channel: int = 0,
    den_floor: float = DEN_FLOOR,
    gamma_max: float = GAMMA_MAX,
) -> tuple[np.ndarray, list[ClampRecord]]:
    """``numerator / denominator`` made safe for a physical schedule.

    Where the denominator is below ``den_floor * total_mass`` (including
    negative values) the rate is switched off and the target mass that falls
    there is reported; elsewhere the rate is capped at ``gamma_max``.
    """
    numerator = grid.check(np.asarray(numerator, dtype=float))
    denominator = grid.check(np.asarray(denominator, dtype=float))
    t = grid.times
    off = denominator < den_floor * total_mass
    with np.errstate(divide="ignore", invalid="ignore"):
        gamma = np.where(off, 0.0, numerator / np.where(off, 1.0, denominator))
    records = []
    if off.any():
        running = cumulative_integral(numerator, grid)
        for a, b in _runs(off):
            records.append(
                ClampRecord(channel, float(t[a]), float(t[b]), "denominator_floor", float(running[b] - running[a]))
            )
    capped = gamma > gamma_max
    for a, b in _runs(capped):
        records.append(ClampRecord(channel, float(t[a]), float(t[b]), "gamma_max"))
    gamma = np.minimum(gamma, gamma_max)
    return gamma, records


def _same_grid(*envelopes: Envelope) -> TimeGrid:
    grid = envelopes[0].grid
    for env in envelopes[1:]:
        if env.grid != grid:
            raise StructuralError("envelopes live on different grids")
    return grid


def _truncation_records(channel: int, *envelopes: Envelope) -> list[ClampRecord]:
    lost = sum(env.truncated_mass for env in envelopes)
    if lost <= 0:
        return []
    grid = envelopes[0].grid
    return [ClampRecord(channel, grid.t_start, grid.t_end, "window_truncation", lost)]


def _schedule(grid, gammas, epsilons, records) -> ControlSchedule:
    return ControlSchedule(grid, np.vstack(gammas), np.vstack(epsilons), tuple(records))


def _overlap_region(xi1: Envelope, xi2: Envelope) -> np.ndarray:
    m1, m2 = np.abs(xi1.values), np.abs(xi2.values)
    return (m1 > PHASE_FLOOR * m1.max()) & (m2 > PHASE_FLOOR * m2.max())


def check_phase_match(xi1: Envelope, xi2: Envelope, *, tol: float = PHASE_TOL) -> float:
    """Raise :class:`PhaseMismatch` unless both envelopes share one phase
    function up to a constant offset; returns the worst deviation."""
    region = _overlap_region(xi1, xi2)
    if not region.any():
        raise PhaseMismatch("envelopes never overlap; phases cannot be compared", math.inf)
    diff = (phase_profile(xi1) - phase_profile(xi2))[region]
    deviation = float(np.max(np.abs(diff - diff[0])))
    if deviation > tol:
        raise PhaseMismatch(f"phase profiles differ by up to {deviation:.3g} rad", deviation)
    return deviation


def check_inverted_phase(xi1: Envelope, xi2: Envelope, *, tol: float = PHASE_TOL) -> float:
    """Raise :class:`PhaseMismatch` unless ``phi1 - phi2`` is an odd multiple
    of pi wherever both envelopes are present."""
    region = _overlap_region(xi1, xi2)
    if not region.any():
        raise PhaseMismatch("envelopes never overlap; phases cannot be compared", math.inf)
    diff = (phase_profile(xi1) - phase_profile(xi2))[region]
    off = np.angle(np.exp(1j * (diff - math.pi)))
    deviation = float(np.max(np.abs(off)))
    if deviation > tol:
        raise PhaseMismatch(
            f"phase difference departs from an odd multiple of pi by {deviation:.3g} rad", deviation
        )
    return deviation


# -- single-photon tasks ------------------------------------------------------


def _generate_channel(xi: Envelope, channel: int, **clamp) -> tuple[np.ndarray, list]:
    d = xi.density
    return clamp_policy(d, tail_integral(d, xi.grid), xi.grid, total_mass=quadrature(d, xi.grid), channel=channel, **clamp)


def _catch_channel(xi: Envelope, channel: int, **clamp) -> tuple[np.ndarray, list]:
    d = xi.density
    return clamp_policy(
        d, cumulative_integral(d, xi.grid), xi.grid, total_mass=quadrature(d, xi.grid), channel=channel, **clamp
    )


def synth_two_level_generate(xi: Envelope, **clamp) -> ControlSchedule:
    """Rate that releases ``xi`` from an excited two-level atom."""
    gamma, records = _generate_channel(xi, 0, **clamp)
    return _schedule(xi.grid, [gamma], [phase_rate(xi)], records + _truncation_records(0, xi))


def synth_two_level_catch(xi: Envelope, **clamp) -> ControlSchedule:
    """Rate that absorbs ``xi`` completely into a ground-state two-level atom."""
    gamma, records = _catch_channel(xi, 0, **clamp)
    return _schedule(xi.grid, [gamma], [phase_rate(xi)], records + _truncation_records(0, xi))


def _check_alphas(alphas) -> tuple[complex, complex]:
    a1, a2 = (complex(a) for a in alphas)
    total = abs(a1) ** 2 + abs(a2) ** 2
    if abs(total - 1) > 1e-9:
        raise ValueError(f"|alpha1|^2 + |alpha2|^2 = {total:.12g}, expected 1")
    return a1, a2


def synth_lambda_generate(alpha1, alpha2, xi1: Envelope, xi2: Envelope, **clamp) -> ControlSchedule:
    """Split one photon from |f> into two channels with weights alpha1, alpha2.

    Both rates share the denominator ``int_t^inf |a1 xi1|^2 + |a2 xi2|^2``.
    Only the sum of the detunings is fixed; all of it goes on channel 1.
    """
    a1, a2 = _check_alphas((alpha1, alpha2))
    grid = _same_grid(xi1, xi2)
    if a1 and a2:
        check_phase_match(xi1, xi2)
    n1 = abs(a1) ** 2 * xi1.density
    n2 = abs(a2) ** 2 * xi2.density
    mixture = n1 + n2
    shared = tail_integral(mixture, grid)
    total = quadrature(mixture, grid)
    g1, r1 = clamp_policy(n1, shared, grid, total_mass=total, channel=0, **clamp)
    g2, r2 = clamp_policy(n2, shared, grid, total_mass=total, channel=1, **clamp)
    eps = phase_rate(xi1 if a1 else xi2)
    records = r1 + r2 + _truncation_records(0, xi1) + _truncation_records(1, xi2)
    return _schedule(grid, [g1, g2], [eps, np.zeros_like(eps)], records)


def synth_lambda_catch(xi: Envelope, **clamp) -> ControlSchedule:
    """Channel 1 catches ``xi``; channel 2 stays off so nothing leaks."""
    one = synth_two_level_catch(xi, **clamp)
    zero = np.zeros(xi.grid.n_points)
    return _schedule(xi.grid, [one.gamma[0], zero], [one.epsilon[0], zero], one.clamp_report)


def synth_v_catch(alpha1, alpha2, xi1: Envelope, xi2: Envelope, **clamp) -> ControlSchedule:
    """Each arm of a V atom catches its own channel; the weights do not enter."""
    _check_alphas((alpha1, alpha2))
    grid = _same_grid(xi1, xi2)
    g1, r1 = _catch_channel(xi1, 0, **clamp)
    g2, r2 = _catch_channel(xi2, 1, **clamp)
    records = r1 + r2 + _truncation_records(0, xi1) + _truncation_records(1, xi2)
    return _schedule(grid, [g1, g2], [phase_rate(xi1), phase_rate(xi2)], records)


# -- tasks coupling two shapes through tail dominance -------------------------


def synth_xi_pair(xi1: Envelope, xi2: Envelope, **clamp) -> ControlSchedule:
    """Cascade |f> -> |e> -> |g> so the photon marginals are |xi1|^2, |xi2|^2.

    Targets are magnitudes only, so both detunings are zero.
    """
    report = check_tail_dominance(xi1, xi2)
    if not report.realizable:
        raise NotRealizable(report)
    grid = report.grid
    d1, d2 = xi1.density, xi2.density
    g1, r1 = clamp_policy(d1, tail_integral(d1, grid), grid, total_mass=quadrature(d1, grid), channel=0, **clamp)
    g2, r2 = clamp_policy(d2, report.margin, grid, total_mass=quadrature(d2, grid), channel=1, **clamp)
    zero = np.zeros(grid.n_points)
    records = r1 + r2 + _truncation_records(0, xi1) + _truncation_records(1, xi2)
    return _schedule(grid, [g1, g2], [zero, zero], records)


def synth_lambda_convert(xi1: Envelope, xi2: Envelope, **clamp) -> ControlSchedule:
    """Absorb ``xi1`` from channel 1 and re-emit it as ``xi2`` in channel 2.

    The shared denominator is the population of |f>: mass absorbed so far
    minus mass re-emitted so far.
    """
    report = check_tail_dominance(xi1, xi2)
    if not report.realizable:
        raise NotRealizable(report)
    check_inverted_phase(xi1, xi2)
    grid = report.grid
    d1, d2 = xi1.density, xi2.density
    past = cumulative_integral(d1 - d2, grid)
    g1, r1 = clamp_policy(d1, past, grid, total_mass=quadrature(d1, grid), channel=0, **clamp)
    g2, r2 = clamp_policy(d2, report.margin, grid, total_mass=quadrature(d2, grid), channel=1, **clamp)
    eps = phase_rate(xi1)
    records = r1 + r2 + _truncation_records(0, xi1) + _truncation_records(1, xi2)
    return _schedule(grid, [g1, g2], [eps, np.zeros_like(eps)], records)


# -- unclamped traces (figure reproduction only) ------------------------------


def denominators(task: str, envelopes, alphas=None) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Numerators and denominators of each channel's rate, before clamping.

    ``task`` uses the task names of :class:`flyq.model.Task`.
    """
    grid = _same_grid(*envelopes)
    dens = [env.density for env in envelopes]
    if task == "TwoLevelGenerate":
        return [dens[0]], [tail_integral(dens[0], grid)]
    if task in ("TwoLevelCatch", "LambdaCatch"):
        num, den = [dens[0]], [cumulative_integral(dens[0], grid)]
        if task == "LambdaCatch":
            num.append(np.zeros_like(dens[0]))
            den.append(np.ones_like(dens[0]))
        return num, den
    if task == "LambdaGenerate":
        a1, a2 = _check_alphas(alphas)
        n1, n2 = abs(a1) ** 2 * dens[0], abs(a2) ** 2 * dens[1]
        shared = tail_integral(n1 + n2, grid)
        return [n1, n2], [shared, shared]
    if task == "VCatch":
        return dens, [cumulative_integral(d, grid) for d in dens]
    if task == "XiPair":
        return dens, [tail_integral(dens[0], grid), tail_integral(dens[1] - dens[0], grid)]
    if task == "LambdaConvert":
        return dens, [cumulative_integral(dens[0] - dens[1], grid), tail_integral(dens[1] - dens[0], grid)]
    raise ValueError(f"unknown task {task!r}")


def raw_rates(task: str, envelopes, alphas=None, *, den_floor: float = DEN_FLOOR):
    """Unclamped rates with sign kept, plus a flag array marking samples that
    are negative, non-finite, or sit on a vanishing denominator."""
    nums, dens = denominators(task, envelopes, alphas)
    grid = envelopes[0].grid
    gammas, flags = [], []
    for num, den in zip(nums, dens):
        with np.errstate(divide="ignore", invalid="ignore"):
            gamma = num / den
        total = quadrature(num, grid)
        flag = ~np.isfinite(gamma) | (gamma < 0) | (np.abs(den) < den_floor * max(total, 1e-300))
        flag &= num > NUMERATOR_FLOOR * max(num.max(), 1e-300)
        gammas.append(gamma)
        flags.append(flag)
    return np.vstack(gammas), np.vstack(flags)
