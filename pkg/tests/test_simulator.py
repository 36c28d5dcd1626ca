from __future__ import annotations

import math
import warnings

import numpy as np
import pytest

from flyq import synthesis as S
from flyq.model import AtomKind, ControlSchedule, Task, TaskSpec, build_component, make_envelope
from flyq.numerics import TimeGrid
from flyq.simulator import (
    ConsistencyError,
    ConvergenceWarning,
    SectorIllConditioned,
    closed_form_pair,
    closed_form_single,
    conservation_audit,
    emit_pair,
    emit_single,
    fidelity,
    marginals,
    propagate,
    simulate_task,
    unconditional_populations,
)

TWO_PI = 2 * math.pi
A = 1 / math.sqrt(2)


def _constant(grid, *rates, eps=None):
    n = grid.n_points
    gamma = np.array([np.full(n, r) for r in rates])
    epsilon = np.zeros_like(gamma) if eps is None else np.array([np.full(n, e) for e in eps])
    return ControlSchedule(grid, gamma, epsilon)


@pytest.fixture(scope="module")
def grid():
    return TimeGrid(0.0, 1.5, 1201)


def test_zero_coupling_only_rotates_phase(grid):
    comp = build_component(AtomKind.TWO_LEVEL, _constant(grid, 0.0, eps=[3.0]))
    traj = propagate(comp, audit=False)
    np.testing.assert_allclose(traj.state[:, 1], np.exp(-3j * grid.times), atol=1e-9)
    em = emit_single(traj, comp)
    assert np.all(em.single == 0) and em.channel_probability(0) == 0


def test_scalar_decay(grid):
    comp = build_component(AtomKind.TWO_LEVEL, _constant(grid, 20.0))
    traj = propagate(comp)
    np.testing.assert_allclose(traj.population("e"), np.exp(-20.0 * grid.times), atol=1e-7)
    assert traj.convergence_error < 1e-6
    assert traj.contraction_violation() <= 1e-12


def test_single_emission_matches_closed_form(gauss_pair):
    sched = S.synth_lambda_generate(0.6, 0.8, *gauss_pair)
    comp = build_component(AtomKind.LAMBDA, sched)
    em = emit_single(propagate(comp, audit=False), comp)
    for j, terminal in enumerate(("g", "e")):
        np.testing.assert_allclose(em.amplitude(j, terminal), closed_form_single(sched, j), atol=1e-6)
    assert sum(em.branch_probabilities.values()) == pytest.approx(1.0, abs=1e-6)


def test_separable_exponential_pair(grid):
    g1, g2 = 30.0, 20.0
    sched = _constant(grid, g1, g2)
    comp = build_component(AtomKind.XI, sched)
    traj = propagate(comp, audit=False)
    amp = emit_pair(traj, comp, max_points=301)
    t = amp.grid.times
    oracle = np.tril(np.sqrt(g1 * g2) * np.exp(-0.5 * g1 * t[None, :] - 0.5 * g2 * (t[:, None] - t[None, :])))
    np.testing.assert_allclose(amp.values, oracle, atol=1e-6)
    first, second = marginals(amp)
    T = grid.t_end
    # rows shorter than the quadrature stencil fall back to low order
    full = slice(6, -6)
    want_first = g1 * np.exp(-g1 * t) * (1 - np.exp(-g2 * (T - t)))
    want_second = g1 * g2 / (g1 - g2) * (np.exp(-g2 * t) - np.exp(-g1 * t))
    np.testing.assert_allclose(first[full], want_first[full], atol=1e-6)
    np.testing.assert_allclose(second[full], want_second[full], atol=1e-6)
    np.testing.assert_allclose(second, want_second, atol=1e-3)


def test_pair_vanishes_without_second_coupling(grid):
    comp = build_component(AtomKind.XI, _constant(grid, 30.0, 0.0))
    traj = propagate(comp, audit=False)
    em = emit_single(traj, comp)
    amp = emit_pair(traj, comp, em, max_points=301)
    assert np.all(amp.values == 0)
    assert em.channel_probability(0) == pytest.approx(1 - math.exp(-45.0), abs=1e-7)


def test_pair_cross_check_raises(grid):
    sched = _constant(grid, 30.0, 20.0)
    comp = build_component(AtomKind.XI, sched)
    traj = propagate(comp, audit=False)
    good = closed_form_pair(sched, 4)
    emit_pair(traj, comp, max_points=301, closed_form=good)
    with pytest.raises(ConsistencyError):
        emit_pair(traj, comp, max_points=301, closed_form=1.01 * good)


def test_fidelity_properties(gauss_pair):
    env = gauss_pair[0]
    assert fidelity(env.values, env) == pytest.approx(1.0, abs=1e-12)
    assert fidelity(1j * env.values, env) == pytest.approx(1.0, abs=1e-12)
    assert fidelity(0.5 * env.values, env) == pytest.approx(0.25, abs=1e-12)
    odd = make_envelope("custom", env.grid, values=env.grid.times * env.values)
    assert fidelity(odd.values, env) < 1e-20
    f = fidelity(gauss_pair[1].values, env)
    assert 0 < f < 1


def test_unconditional_populations_are_complete(grid):
    comp = build_component(AtomKind.XI, _constant(grid, 30.0, 20.0))
    traj = propagate(comp, audit=False)
    em = emit_single(traj, comp)
    full = unconditional_populations(traj, comp, em)
    pair_out = 1 - full.sum(axis=1)
    t = grid.times
    both = 1 - (30 * np.exp(-20 * t) - 20 * np.exp(-30 * t)) / 10
    np.testing.assert_allclose(pair_out, both, atol=1e-6)


def test_conservation_without_input(gauss_pair):
    comp = build_component(AtomKind.TWO_LEVEL, S.synth_two_level_generate(gauss_pair[0]))
    traj = propagate(comp, audit=False)
    report = conservation_audit(traj, emit_single(traj, comp))
    assert report.max_residual < 1e-6


def test_ill_conditioned_sector_raises(grid):
    # the intermediate level of a ladder decays to nothing, so V cannot be
    # inverted on that sector
    comp = build_component(AtomKind.XI, _constant(grid, 30.0, 1e4))
    traj = propagate(comp, audit=False)
    assert np.all(np.isfinite(traj.V)) and traj.contraction_violation() <= 1e-12
    with pytest.raises(SectorIllConditioned):
        emit_single(traj, comp)


def test_coarse_grid_warns():
    coarse = TimeGrid(0.0, 1.0, 11)
    comp = build_component(AtomKind.TWO_LEVEL, _constant(coarse, 60.0))
    with pytest.warns(ConvergenceWarning):
        propagate(comp)


def test_lambda_generate_task(gauss_grid, gauss_pair):
    rep = simulate_task(TaskSpec(Task.LAMBDA_GENERATE, gauss_pair, gauss_grid, (A, A)))
    assert min(rep.fidelities.values()) >= 0.9999
    for p in rep.probabilities.values():
        assert p == pytest.approx(0.5, abs=1e-6)
    assert max(rep.population_rule.values()) < 1e-6
    assert rep.closed_form_gap < 1e-5
    assert rep.conservation.max_residual < 1e-6


def test_two_level_round_trip(gauss_grid, gauss_pair):
    rep = simulate_task(TaskSpec(Task.TWO_LEVEL_CATCH, gauss_pair[:1], gauss_grid))
    assert rep.fidelities["caught"] >= 0.9999
    assert rep.leakage["channel1"] < 1e-4
    assert rep.conservation.max_residual < 1e-6
    assert rep.conservation.forms_gap < 1e-6


def test_lambda_catch_task(gauss_grid, gauss_pair):
    rep = simulate_task(TaskSpec(Task.LAMBDA_CATCH, gauss_pair[1:], gauss_grid))
    assert rep.fidelities["caught"] >= 0.9999
    assert rep.leakage["channel2"] == 0.0


@pytest.mark.parametrize("alphas", [(A, A), (0.6, 0.8j), (1.0, 0.0), (0.0, 1.0)])
def test_v_catch_task(gauss_grid, gauss_pair, alphas):
    rep = simulate_task(TaskSpec(Task.V_CATCH, gauss_pair, gauss_grid, alphas))
    assert rep.fidelities["atom_state"] >= 0.9999
    assert rep.probabilities["level_f"] == pytest.approx(abs(alphas[0]) ** 2, abs=1e-4)
    assert rep.conservation.max_residual < 1e-6


def test_xi_pair_task(delayed_grid, delayed_pair):
    rep = simulate_task(TaskSpec(Task.XI_PAIR, delayed_pair, delayed_grid))
    assert max(rep.marginal_l1.values()) <= 1e-3
    assert rep.closed_form_gap < 1e-5
    assert rep.probabilities["pair"] == pytest.approx(1.0, abs=1e-5)


def test_conversion_task(delayed_grid, delayed_pair):
    targets = (delayed_pair[0], delayed_pair[1].with_phase(global_pi=True))
    rep = simulate_task(TaskSpec(Task.LAMBDA_CONVERT, targets, delayed_grid))
    assert rep.fidelities["channel2"] >= 0.9999
    assert rep.leakage["channel1"] < 1e-4
    assert rep.closed_form_gap < 1e-5
    assert rep.conservation.max_residual < 1e-6
    d = rep.as_dict()
    assert d["task"] == "LambdaConvert" and "clamp_report" in d
