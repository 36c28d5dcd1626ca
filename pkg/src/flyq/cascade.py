"""Series composition of a photon source with an atom.

A non-vacuum input field is replaced by an auxiliary component that emits the
input photon into vacuum; feeding its output into the atom gives one component
driven only by vacuum.  Operators are embedded source-first: ``A (x) B``.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .model import (
    AtomKind,
    ClampRecord,
    ControlSchedule,
    Envelope,
    SLHComponent,
    Term,
    build_component,
    phase_profile,
)
from .numerics import StructuralError
from .synthesis import synth_two_level_generate


def entry_phase(xi: Envelope) -> complex:
    """``exp(-i phi)`` at the first sample where the phase is defined.

    Detuning only fixes the phase up to a constant; putting this constant on
    the source's initial state makes the emitted photon equal ``xi`` exactly.
    """
    return complex(np.exp(-1j * phase_profile(xi)[0]))


def make_photon_source(xi: Envelope, **clamp) -> SLHComponent:
    """Two-level component that releases ``xi`` (phase included) into vacuum."""
    schedule = synth_two_level_generate(xi, **clamp)
    return build_component(AtomKind.TWO_LEVEL, schedule, {"e": entry_phase(xi)})


def make_distributed_source(alpha1, alpha2, xi1: Envelope, xi2: Envelope, **clamp) -> SLHComponent:
    """Source of one photon in the superposition ``alpha1 xi1 (ch 1) + alpha2 xi2 (ch 2)``.

    A V-type emitter starts in ``alpha1|f> + alpha2|e>``; each arm runs its own
    generation schedule and both arms end in the shared ground state, so the
    source leaves no record of which channel carried the photon.
    """
    if xi1.grid != xi2.grid:
        raise StructuralError("envelopes live on different grids")
    s1 = synth_two_level_generate(xi1, **clamp)
    s2 = synth_two_level_generate(xi2, **clamp)
    schedule = ControlSchedule(
        xi1.grid,
        np.vstack([s1.gamma[0], s2.gamma[0]]),
        np.vstack([s1.epsilon[0], s2.epsilon[0]]),
        s1.clamp_report + tuple(ClampRecord(1, r.t_from, r.t_to, r.reason, r.mass) for r in s2.clamp_report),
    )
    initial = {"f": complex(alpha1) * entry_phase(xi1), "e": complex(alpha2) * entry_phase(xi2)}
    return build_component(AtomKind.VEE, schedule, initial)


def _lift(terms: Sequence[Term], *, dim_source: int, dim_atom: int, on_source: bool) -> tuple[Term, ...]:
    if on_source:
        return tuple(Term(t.coefficient, np.kron(t.operator, np.eye(dim_atom))) for t in terms)
    return tuple(Term(t.coefficient, np.kron(np.eye(dim_source), t.operator)) for t in terms)


def series_product(source: SLHComponent, atom: SLHComponent, into_channel=0) -> SLHComponent:
    """Feed the output of ``source`` into ``atom``.

    Parameters
    ----------
    into_channel
        Atom channel (0-based) receiving the source's output.  A source with
        several channels takes a sequence, one atom channel per source channel.

    Returns
    -------
    SLHComponent
        Joint component on ``source (x) atom``; atom channels are kept in
        order, each fed channel carrying ``L_A (x) I + I (x) L``, and the
        Hamiltonian gains ``(L^dag L_A - L_A^dag L) / 2i`` per fed channel.
    """
    if source.grid != atom.grid:
        raise StructuralError("source and atom live on different grids")
    targets = [into_channel] if np.ndim(into_channel) == 0 else list(into_channel)
    if len(targets) != source.n_channels:
        raise StructuralError(f"source has {source.n_channels} channel(s), {len(targets)} target(s) given")
    if len(set(targets)) != len(targets) or not all(0 <= int(c) < atom.n_channels for c in targets):
        raise StructuralError(f"invalid target channel(s) {targets} for a {atom.n_channels}-channel atom")
    ds, da = source.dim, atom.dim
    up_s = lambda terms: _lift(terms, dim_source=ds, dim_atom=da, on_source=True)  # noqa: E731
    up_a = lambda terms: _lift(terms, dim_source=ds, dim_atom=da, on_source=False)  # noqa: E731

    couplings = [up_a(ch) for ch in atom.couplings]
    interference = [(up_s(p), up_s(q)) for p, q in source.interference]
    interference += [(up_a(p), up_a(q)) for p, q in atom.interference]
    for k, target in enumerate(targets):
        target = int(target)
        fed = up_s(source.couplings[k])
        interference.append((couplings[target], fed))
        couplings[target] = couplings[target] + fed

    labels = tuple(f"{a},{b}" for a in source.labels for b in atom.labels)
    excitations = tuple(x + y for x in source.excitations for y in atom.excitations)
    return SLHComponent(
        atom.grid,
        labels,
        excitations,
        up_s(source.hamiltonian_terms) + up_a(atom.hamiltonian_terms),
        tuple(couplings),
        np.kron(source.initial_state, atom.initial_state),
        tuple(interference),
    )


def permute_channels(component: SLHComponent, order: Sequence[int]) -> SLHComponent:
    """Same component with channel ``k`` of the result being ``order[k]``."""
    if sorted(order) != list(range(component.n_channels)):
        raise StructuralError(f"{order} is not a permutation of the channels")
    return SLHComponent(
        component.grid,
        component.labels,
        component.excitations,
        component.hamiltonian_terms,
        tuple(component.couplings[k] for k in order),
        component.initial_state,
        component.interference,
    )
