"""Split-step evolution, orbit distances and the stability experiment."""

import numpy as np
import pytest

from normsol.dynamics import (
    EvolutionTrace,
    evolve,
    h1_distance_phase,
    h1_distance_phase_translation,
    linear_propagator,
    perturbation,
    rotation_frequency,
    stability_experiment,
)
from normsol.errors import BlowUpGuard
from normsol.field import Field, Grid, gaussian, normalize_to_mass, translate

from conftest import band_limited


def test_linear_step_preserves_each_spectral_magnitude(rng):
    g = Grid(1, 50.0, 256)
    v = band_limited(g, rng, complex_=True)
    out = linear_propagator(g, 0.01)(v)
    assert np.allclose(np.abs(np.fft.fft(out)), np.abs(np.fft.fft(v)), rtol=1e-13, atol=1e-13)
    # Gaussian spreading matches the exact free Schrodinger solution
    w0, t = 2.0, 0.5
    x = g.axis
    exact = np.exp(-x**2 / (2 * (w0**2 + 2j * t))) * np.sqrt(w0**2 / (w0**2 + 2j * t))
    step = linear_propagator(g, t)
    assert np.allclose(step(np.exp(-x**2 / (2 * w0**2)).astype(complex)), exact, atol=1e-12)


def test_guards_on_arguments(params, potential, grid):
    u = normalize_to_mass(gaussian(grid, 10.0), 0.5)
    with pytest.raises(ValueError):
        evolve(u, params, potential, 1.0, 10.0)  # dt k_max^2 > pi
    with pytest.raises(ValueError):
        evolve(u, params, potential, 0.0, 1.0)
    with pytest.raises(ValueError):
        evolve(u, params, potential, 0.003, 0.01)
    with pytest.raises(ValueError):
        stability_experiment(u, -1.0, 1.0, 0.01, params, potential, 1.0)


def test_stationary_record_conserves_and_rotates(records, params, potential, landscape):
    rec = records[0]
    trace, final = evolve(rec.u, params, potential, 1e-3, 10.0, reference=rec.u, guard_R1=landscape.R1)
    assert trace.max_mass_drift <= 1e-12
    assert trace.max_energy_drift <= 1e-6
    assert max(trace.dist) <= 1e-4
    assert rotation_frequency(trace) == pytest.approx(-rec.lam, rel=1e-2)
    assert final.is_complex and final.mass == pytest.approx(params.a**2, rel=1e-12)


def test_energy_drift_is_second_order(params, potential, grid):
    u0 = normalize_to_mass(gaussian(grid, 4.0), params.a)
    drifts = []
    for dt in (1e-3, 5e-4):
        tr, _ = evolve(u0, params, potential, dt, 10.0, sample_every=int(round(0.1 / dt)))
        assert tr.max_mass_drift <= 1e-12
        drifts.append(tr.max_energy_drift)
    assert drifts[0] <= 1e-6
    assert 3.0 <= drifts[0] / drifts[1] <= 5.0


def test_distances_are_phase_and_translation_invariant(grid):
    u = normalize_to_mass(gaussian(grid, 8.0), 0.5)
    v = Field(grid, u.values * np.exp(1.3j))
    assert h1_distance_phase(v, u) < 1e-12
    w = Field(grid, (u.values + 0.01 * gaussian(grid, 3.0).values) * np.exp(0.4j))
    assert h1_distance_phase(w, u) == pytest.approx(
        h1_distance_phase(Field(grid, w.values * np.exp(2.0j)), u), rel=1e-10)
    moved = translate(v, 12 * grid.h)
    assert h1_distance_phase_translation(moved, u) < 1e-6
    assert h1_distance_phase(moved, u) > 0.05


def test_perturbation_is_normalized_and_reproducible(records):
    u = records[0].u
    xi = perturbation(u, 7)
    assert xi.h1_norm == pytest.approx(1.0, rel=1e-12)
    assert np.array_equal(xi.values, perturbation(u, 7).values)
    assert not np.array_equal(xi.values, perturbation(u, 8).values)


def test_stability_small_perturbation_passes(records, params, potential, landscape):
    rec = records[1]
    verdict, trace = stability_experiment(rec.u, 1e-2, 50.0, 1e-2, params, potential,
                                          landscape.R0, landscape.R1)
    assert verdict.passed and verdict.guard_ok
    assert verdict.theta <= 0.1
    assert all(s < landscape.R0 for s in trace.grad_norm)
    assert "verdict = PASS" in verdict.to_text()


def test_unperturbed_stability_matches_standing_wave(records, params, potential, landscape):
    verdict, _ = stability_experiment(records[0].u, 0.0, 10.0, 1e-2, params, potential,
                                      landscape.R0, landscape.R1)
    assert verdict.initial_distance < 1e-15 and verdict.theta <= 1e-4


def test_large_perturbation_is_reported_not_raised(records, params, potential, landscape):
    verdict, _ = stability_experiment(records[0].u, 0.5, 5.0, 1e-2, params, potential,
                                      landscape.R0, landscape.R1)
    assert verdict.theta >= 0 and isinstance(verdict.passed, bool)


def test_blow_up_guard_returns_partial_trace(params, potential, grid):
    u = normalize_to_mass(gaussian(grid, 2.0), params.a)
    with pytest.raises(BlowUpGuard) as err:
        evolve(u, params, potential, 1e-2, 1.0, sample_every=10, guard_R1=1e-3)
    assert isinstance(err.value.trace, EvolutionTrace) and err.value.state is not None


def test_trace_csv_and_time_order(tmp_path):
    tr = EvolutionTrace()
    tr.append(0.0, 0, 0, 1, 0, 0, 1)
    tr.append(1.0, 1e-16, 1e-9, 1, 1e-5, 1e-5, 1j)
    with pytest.raises(ValueError):
        tr.append(1.0, 0, 0, 0, 0, 0, 0)
    path = tmp_path / "t.csv"
    tr.to_csv(path, {"config_sha256": "x"})
    lines = path.read_text().splitlines()
    assert lines[0] == "# config_sha256 = x"
    assert lines[1] == "t,mass_drift,energy_drift,grad_norm,dist,dist_translated"
    assert len(lines) == 4
