"""Envelopes, control schedules, atoms as SLH components, task descriptions."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import erfc

from .numerics import (
    ComplexSeries,
    StructuralError,
    TimeGrid,
    midpoint_values,
    quadrature,
    refine_samples,
)

NORM_TOL = 1e-6
EDGE_TOL = 1e-4
GAMMA_MAX = 1e4
# magnitudes below this fraction of the peak carry no usable phase
PHASE_FLOOR = 1e-6


class WindowTooNarrow(ValueError):
    def __init__(self, message: str, edge_mass: float) -> None:
        super().__init__(message)
        self.edge_mass = edge_mass


# -- envelopes ----------------------------------------------------------------


@dataclass(frozen=True)
class Envelope:
    """Sampled photon shape ``xi(t)`` in us^-1/2.

    ``truncated_mass`` is the analytic probability that falls outside the
    grid window (zero for custom samples).
    """

    series: ComplexSeries
    label: str = ""
    truncated_mass: float = 0.0

    @property
    def grid(self) -> TimeGrid:
        return self.series.grid

    @property
    def values(self) -> np.ndarray:
        return self.series.values

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def norm(self) -> float:
        return float(quadrature(self.density, self.grid))

    def normalized(self) -> "Envelope":
        return Envelope(
            ComplexSeries(self.grid, self.values / math.sqrt(self.norm())),
            self.label,
            self.truncated_mass,
        )

    def with_phase(self, global_pi: bool = False, chirp: float = 0.0) -> "Envelope":
        """Multiply by ``exp(-i chirp t)`` and optionally by ``-1``."""
        factor = np.exp(-1j * chirp * self.grid.times)
        if global_pi:
            factor = -factor
        return Envelope(ComplexSeries(self.grid, self.values * factor), self.label, self.truncated_mass)


def normalize(envelope: Envelope) -> Envelope:
    return envelope.normalized()


def _check_edges(mag: np.ndarray, grid: TimeGrid, *, check_start: bool, what: str) -> None:
    peak = mag.max()
    if peak <= 0:
        raise WindowTooNarrow(f"{what}: envelope vanishes on the grid", 1.0)
    edges = [mag[-1] / peak]
    if check_start:
        edges.append(mag[0] / peak)
    worst = max(edges)
    if worst > EDGE_TOL:
        raise WindowTooNarrow(
            f"{what}: edge amplitude {worst:.3g} of peak exceeds {EDGE_TOL:g} "
            f"on [{grid.t_start}, {grid.t_end}] us",
            float(worst),
        )


def make_envelope(kind: str, grid: TimeGrid, label: str = "", **params) -> Envelope:
    """Build a normalized envelope.

    kind="exponential"  needs ``gamma_c`` (rad/us); support starts at t = 0.
    kind="gaussian"     needs ``omega`` (rad/us) and optional ``t_center``.
    kind="custom"       needs ``values`` (complex samples on ``grid``).
    """
    t = grid.times
    if kind == "exponential":
        gamma_c = float(params["gamma_c"])
        if gamma_c <= 0:
            raise ValueError("gamma_c must be positive")
        if grid.t_start > 0:
            raise WindowTooNarrow(
                f"exponential onset at t=0 lies before the window start {grid.t_start}",
                float(1 - math.exp(-gamma_c * grid.t_start)),
            )
        on = t >= 0
        values = np.where(on, np.sqrt(gamma_c) * np.exp(-0.5 * gamma_c * np.where(on, t, 0.0)), 0.0)
        lost = math.exp(-gamma_c * grid.t_end)
        _check_edges(np.abs(values), grid, check_start=False, what=label or kind)
    elif kind == "gaussian":
        omega = float(params["omega"])
        t_center = float(params.get("t_center", 0.0))
        if omega <= 0:
            raise ValueError("omega must be positive")
        values = (omega**2 / (2 * math.pi)) ** 0.25 * np.exp(-((omega * (t - t_center) / 2) ** 2))
        # |xi|^2 is a normal density with standard deviation 1/omega
        lost = 0.5 * float(
            erfc(omega * (t_center - grid.t_start) / math.sqrt(2))
            + erfc(omega * (grid.t_end - t_center) / math.sqrt(2))
        )
        _check_edges(np.abs(values), grid, check_start=True, what=label or kind)
    elif kind == "custom":
        values = np.asarray(params["values"], dtype=complex)
        grid.check(values, "custom envelope")
        lost = 0.0
        _check_edges(np.abs(values), grid, check_start=True, what=label or kind)
    else:
        raise ValueError(f"unknown envelope kind {kind!r}")
    return Envelope(ComplexSeries(grid, values), label, lost).normalized()


def phase_profile(envelope: Envelope) -> np.ndarray:
    """Continuous phase ``phi`` with ``xi = |xi| exp(-i phi)``.

    The first defined sample takes its principal value in ``[-pi, pi)``, so a
    global sign flip shows up as ``-pi``.  Where ``|xi|`` drops below
    ``PHASE_FLOOR`` of its peak the phase is undefined and is held at the
    nearest defined value.
    """
    values = envelope.values
    mag = np.abs(values)
    defined = mag > PHASE_FLOOR * mag.max()
    idx = np.flatnonzero(defined)
    if idx.size == 0:
        return np.zeros(values.shape)
    raw = np.unwrap(-np.angle(values[idx]))
    first = raw[0]
    raw = raw - 2 * math.pi * math.floor((first + math.pi) / (2 * math.pi))
    # forward-fill through gaps, back-fill before the first defined sample
    last_defined = np.cumsum(defined) - 1
    return raw[np.clip(last_defined, 0, None)]


def phase_rate(envelope: Envelope) -> np.ndarray:
    """Time derivative of :func:`phase_profile`.

    Differentiated inside each stretch where the phase is defined (central
    differences, one-sided at the ends); outside, the nearest rate is held.
    """
    phi = phase_profile(envelope)
    mag = np.abs(envelope.values)
    defined = mag > PHASE_FLOOR * mag.max()
    rate = np.zeros_like(phi)
    padded = np.concatenate(([False], defined, [False])).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    for a, b in zip(edges[::2], edges[1::2]):
        if b - a >= 3:
            rate[a:b] = np.gradient(phi[a:b], envelope.grid.dt, edge_order=2)
    idx = np.flatnonzero(defined)
    if idx.size == 0:
        return rate
    # hold the nearest defined value through gaps and beyond both ends
    nearest = np.clip(np.searchsorted(idx, np.arange(phi.size)), 0, idx.size - 1)
    before = np.clip(nearest - 1, 0, None)
    closer = np.abs(idx[before] - np.arange(phi.size)) < np.abs(idx[nearest] - np.arange(phi.size))
    return rate[np.where(closer, idx[before], idx[nearest])]


# -- schedules ----------------------------------------------------------------


@dataclass(frozen=True)
class ClampRecord:
    channel: int
    t_from: float
    t_to: float
    reason: str
    mass: float = 0.0

    def as_dict(self) -> dict:
        return {
            "channel": self.channel + 1,
            "t_from_us": self.t_from,
            "t_to_us": self.t_to,
            "reason": self.reason,
            "mass": self.mass,
        }


@dataclass(frozen=True)
class ControlSchedule:
    """Per-channel coupling rates ``gamma`` and detunings ``epsilon`` (rad/us)."""

    grid: TimeGrid
    gamma: np.ndarray
    epsilon: np.ndarray
    clamp_report: tuple[ClampRecord, ...] = ()
    gamma_max: float = GAMMA_MAX

    def __post_init__(self) -> None:
        gamma = np.atleast_2d(np.array(self.gamma, dtype=float))
        epsilon = np.atleast_2d(np.array(self.epsilon, dtype=float))
        self.grid.check(gamma, "gamma")
        self.grid.check(epsilon, "epsilon")
        if gamma.shape != epsilon.shape:
            raise StructuralError("gamma and epsilon must have the same channel count")
        if not (np.all(np.isfinite(gamma)) and np.all(np.isfinite(epsilon))):
            raise ValueError("schedule contains non-finite values")
        if np.any(gamma < 0):
            raise ValueError("coupling rates must be nonnegative")
        if np.any(gamma > self.gamma_max):
            raise ValueError(f"coupling rate exceeds gamma_max={self.gamma_max}")
        gamma.setflags(write=False)
        epsilon.setflags(write=False)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "epsilon", epsilon)
        object.__setattr__(self, "clamp_report", tuple(self.clamp_report))

    @property
    def n_channels(self) -> int:
        return self.gamma.shape[0]

    def swapped(self) -> "ControlSchedule":
        """Same schedule with the two channels exchanged."""
        report = tuple(
            ClampRecord(1 - r.channel, r.t_from, r.t_to, r.reason, r.mass) for r in self.clamp_report
        )
        return ControlSchedule(self.grid, self.gamma[::-1], self.epsilon[::-1], report, self.gamma_max)


# -- atoms --------------------------------------------------------------------


class AtomKind(enum.Enum):
    TWO_LEVEL = "two_level"
    LAMBDA = "lambda"
    VEE = "vee"
    XI = "xi"

    @property
    def labels(self) -> tuple[str, ...]:
        return ("g", "e") if self is AtomKind.TWO_LEVEL else ("g", "e", "f")

    @property
    def n_channels(self) -> int:
        return 1 if self is AtomKind.TWO_LEVEL else 2

    @property
    def excitations(self) -> tuple[int, ...]:
        return {
            AtomKind.TWO_LEVEL: (0, 1),
            AtomKind.LAMBDA: (0, 0, 1),
            AtomKind.VEE: (0, 1, 1),
            AtomKind.XI: (0, 1, 2),
        }[self]


@dataclass(frozen=True)
class Term:
    """``coefficient(t) * operator`` with the coefficient sampled on a grid."""

    coefficient: np.ndarray
    operator: np.ndarray


def _sum_terms(terms: Sequence[Term], which: str, n: int, d: int) -> np.ndarray:
    out = np.zeros((n, d, d), dtype=complex)
    for term in terms:
        c = term.coefficient if which == "grid" else midpoint_values(term.coefficient)
        out += c[:, None, None] * term.operator[None]
    return out


@dataclass(frozen=True)
class SLHComponent:
    """Open system with identity scattering matrix.

    ``H(t) = sum_k h_k(t) A_k + sum_(p,q) (L_p^dag L_q - L_q^dag L_p) / 2i`` and
    ``L_j(t) = sum_k c_jk(t) B_jk``.  The bilinear ``interference`` pairs are
    what a series product adds; keeping them symbolic means the half-step
    generator is rebuilt from interpolated coefficients and stays consistent
    with the half-step couplings.
    """

    grid: TimeGrid
    labels: tuple[str, ...]
    excitations: tuple[int, ...]
    hamiltonian_terms: tuple[Term, ...]
    couplings: tuple[tuple[Term, ...], ...]
    initial_state: np.ndarray
    interference: tuple[tuple[tuple[Term, ...], tuple[Term, ...]], ...] = ()

    def __post_init__(self) -> None:
        d = self.dim
        if len(self.excitations) != d:
            raise StructuralError("one excitation number per basis state is required")
        psi = np.asarray(self.initial_state, dtype=complex)
        if psi.shape != (d,):
            raise StructuralError(f"initial state must have shape ({d},)")
        if abs(np.vdot(psi, psi).real - 1) > 1e-12:
            raise ValueError("initial state is not normalized")
        object.__setattr__(self, "initial_state", psi)
        exc = np.asarray(self.excitations)
        same = exc[:, None] == exc[None, :]
        lower = exc[:, None] == exc[None, :] - 1
        for term in self.hamiltonian_terms:
            self.grid.check(term.coefficient, "hamiltonian coefficient")
            if np.any(np.abs(term.operator[~same]) > 0):
                raise StructuralError("Hamiltonian term mixes excitation sectors")
        lowering = list(self.couplings)
        for p, q in self.interference:
            lowering += [p, q]
        for channel in lowering:
            for term in channel:
                self.grid.check(term.coefficient, "coupling coefficient")
                if np.any(np.abs(term.operator[~lower]) > 0):
                    raise StructuralError("coupling term does not lower excitation by one")
        H = self.hamiltonian()
        if np.max(np.abs(H - np.conj(np.swapaxes(H, 1, 2))), initial=0.0) > 1e-12:
            raise ValueError("Hamiltonian samples are not Hermitian")

    @property
    def dim(self) -> int:
        return len(self.labels)

    @property
    def n_channels(self) -> int:
        return len(self.couplings)

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def coupling_operators(self, which: str = "grid") -> np.ndarray:
        n = self.grid.n_points if which == "grid" else self.grid.n_points - 1
        return np.stack([_sum_terms(ch, which, n, self.dim) for ch in self.couplings])

    def hamiltonian(self, which: str = "grid") -> np.ndarray:
        n = self.grid.n_points if which == "grid" else self.grid.n_points - 1
        H = _sum_terms(self.hamiltonian_terms, which, n, self.dim)
        for p, q in self.interference:
            Lp = _sum_terms(p, which, n, self.dim)
            Lq = _sum_terms(q, which, n, self.dim)
            cross = np.conj(np.swapaxes(Lp, 1, 2)) @ Lq
            H += (cross - np.conj(np.swapaxes(cross, 1, 2))) / 2j
        return H

    def generator(self, which: str = "grid") -> np.ndarray:
        """``-iH - 1/2 sum_j L_j^dag L_j`` sampled on the grid or half steps."""
        L = self.coupling_operators(which)
        damping = np.einsum("jtki,jtkl->til", np.conj(L), L)
        return -1j * self.hamiltonian(which) - 0.5 * damping

    def refined(self) -> "SLHComponent":
        """The same component on the 2x-refined grid (coefficients interpolated)."""
        grid = self.grid.refined()
        cache: dict[int, np.ndarray] = {}

        def ref(term: Term) -> Term:
            key = id(term.coefficient)
            if key not in cache:
                cache[key] = refine_samples(term.coefficient)
            return Term(cache[key], term.operator)

        return SLHComponent(
            grid,
            self.labels,
            self.excitations,
            tuple(ref(t) for t in self.hamiltonian_terms),
            tuple(tuple(ref(t) for t in ch) for ch in self.couplings),
            self.initial_state,
            tuple((tuple(ref(t) for t in p), tuple(ref(t) for t in q)) for p, q in self.interference),
        )


def _ket_bra(labels: Sequence[str], a: str, b: str) -> np.ndarray:
    op = np.zeros((len(labels), len(labels)), dtype=complex)
    op[labels.index(a), labels.index(b)] = 1.0
    return op


def basis_state(labels: Sequence[str], state) -> np.ndarray:
    """A label, or a mapping ``{label: amplitude}``, as a state vector."""
    psi = np.zeros(len(labels), dtype=complex)
    if isinstance(state, str):
        psi[labels.index(state)] = 1.0
    elif isinstance(state, dict):
        for key, amp in state.items():
            psi[labels.index(key)] = amp
    else:
        psi[:] = np.asarray(state, dtype=complex)
    return psi


def build_component(kind: AtomKind, schedule: ControlSchedule, initial="top") -> SLHComponent:
    """Atom of the given kind driven by ``schedule``.

    ``initial`` is a basis label, ``{label: amplitude}``, a vector, or
    ``"top"`` for the most excited level.  The two-level Hamiltonian is
    ``epsilon |e><e|`` so that ``epsilon = dphi/dt`` reproduces the phase
    of the emitted photon (``epsilon sigma_z`` would double it).
    """
    if schedule.n_channels != kind.n_channels:
        raise StructuralError(
            f"{kind.value} atom needs {kind.n_channels} channel(s), schedule has {schedule.n_channels}"
        )
    labels = kind.labels
    op = lambda a, b: _ket_bra(labels, a, b)  # noqa: E731
    amp = np.sqrt(schedule.gamma)
    eps = schedule.epsilon
    if kind is AtomKind.TWO_LEVEL:
        h_terms = (Term(eps[0], op("e", "e")),)
        couplings = ((Term(amp[0], op("g", "e")),),)
    elif kind is AtomKind.LAMBDA:
        h_terms = (Term(eps[0] + eps[1], op("f", "f")),)
        couplings = ((Term(amp[0], op("g", "f")),), (Term(amp[1], op("e", "f")),))
    elif kind is AtomKind.XI:
        h_terms = (Term(eps[0], op("f", "f")), Term(eps[1], op("e", "e")))
        couplings = ((Term(amp[0], op("e", "f")),), (Term(amp[1], op("g", "e")),))
    else:
        h_terms = (Term(eps[0], op("f", "f")), Term(eps[1], op("e", "e")))
        couplings = ((Term(amp[0], op("g", "f")),), (Term(amp[1], op("g", "e")),))
    if isinstance(initial, str) and initial == "top":
        initial = labels[-1]
    psi = basis_state(labels, initial)
    return SLHComponent(schedule.grid, labels, kind.excitations, h_terms, couplings, psi)


# -- tasks --------------------------------------------------------------------


class Task(enum.Enum):
    TWO_LEVEL_GENERATE = "TwoLevelGenerate"
    TWO_LEVEL_CATCH = "TwoLevelCatch"
    LAMBDA_GENERATE = "LambdaGenerate"
    XI_PAIR = "XiPair"
    LAMBDA_CATCH = "LambdaCatch"
    V_CATCH = "VCatch"
    LAMBDA_CONVERT = "LambdaConvert"

    @property
    def n_targets(self) -> int:
        return 1 if self in (Task.TWO_LEVEL_GENERATE, Task.TWO_LEVEL_CATCH, Task.LAMBDA_CATCH) else 2

    @property
    def needs_alphas(self) -> bool:
        return self in (Task.LAMBDA_GENERATE, Task.V_CATCH)


@dataclass(frozen=True)
class TaskSpec:
    task: Task
    targets: tuple[Envelope, ...]
    grid: TimeGrid
    alphas: tuple[complex, complex] | None = None
    thresholds: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.targets) != self.task.n_targets:
            raise StructuralError(f"{self.task.value} takes {self.task.n_targets} target(s)")
        for env in self.targets:
            if env.grid != self.grid:
                raise StructuralError("target envelopes must live on the task grid")
        if self.task.needs_alphas:
            if self.alphas is None or len(self.alphas) != 2:
                raise StructuralError(f"{self.task.value} requires two alphas")
            total = sum(abs(a) ** 2 for a in self.alphas)
            if abs(total - 1) > 1e-9:
                raise ValueError(f"|alpha1|^2 + |alpha2|^2 = {total}, expected 1")


@dataclass(frozen=True)
class TwoPhotonAmplitude:
    """``xi(tau1, tau2)`` on ``tau1 <= tau2``; row index is tau2, column tau1."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=complex)
        n = self.grid.n_points
        if values.shape != (n, n):
            raise StructuralError(f"two-photon amplitude must be {n}x{n}")
        if np.any(np.triu(values, 1) != 0):
            raise ValueError("two-photon amplitude must be lower triangular")
        object.__setattr__(self, "values", values)
