import math

import numpy as np
import pytest

from app.errors import IntegrationDivergedError
from app.plant.converter import (
    ConverterParams,
    ConverterPlant,
    GridParams,
    PlantInputs,
    PlantState,
    grid_from_scr,
    lc_energy,
    plant_derivatives,
    plant_equilibrium,
    plant_step,
    power_outputs,
)


def test_grid_from_scr_splits_impedance_by_ratio():
    gp = grid_from_scr(2.0, 10.0)
    x = gp.Lg * ConverterParams().omega0
    assert math.hypot(x, gp.Rg) == pytest.approx(0.5)
    assert x / gp.Rg == pytest.approx(10.0)
    assert gp.scr == 2.0


@pytest.mark.parametrize("scr, ratio", [(0.0, 10.0), (-1.0, 10.0), (2.0, 0.0)])
def test_grid_from_scr_rejects_nonpositive_arguments(scr, ratio):
    with pytest.raises(ValueError):
        grid_from_scr(scr, ratio)


def test_grid_params_validate_scr():
    with pytest.raises(ValueError):
        GridParams(scr=0.0)


def test_power_outputs_per_unit():
    pe, qe = power_outputs(1.0, 0.0, 0.5, -0.2)
    assert pe == pytest.approx(0.5)
    assert qe == pytest.approx(0.2)


def test_equilibrium_zeroes_electrical_derivatives():
    cp, gp = ConverterParams(), grid_from_scr(2.0, 10.0)
    inputs = PlantInputs(0.0, 1.02, 0.05)
    state = plant_equilibrium(inputs, 0.3, cp, gp)
    dx = plant_derivatives(state, inputs, cp, gp)
    np.testing.assert_allclose(dx[:6], 0.0, atol=1e-6)
    assert dx[6] == pytest.approx(0.0)


def test_plant_holds_equilibrium_without_noise():
    plant = ConverterPlant(noise=0.0)
    start = plant.state
    inputs = PlantInputs(0.0, plant.gp.ug_mag, 0.0)
    for _ in range(20):
        y = plant.advance(inputs, 1e-3)
    np.testing.assert_allclose(plant.state.as_array()[:6], start.as_array()[:6], atol=1e-9)
    assert y.vd == pytest.approx(start.vd, abs=1e-9)


def test_lc_energy_is_nonnegative_and_zero_at_rest():
    cp, gp = ConverterParams(), GridParams()
    assert lc_energy(PlantState(), cp, gp) == 0.0
    assert lc_energy(PlantState(id=0.3, vd=1.0, igq=-0.1), cp, gp) > 0.0


def test_noise_is_seeded():
    a = ConverterPlant(noise=1e-3, seed=4)
    b = ConverterPlant(noise=1e-3, seed=4)
    inputs = PlantInputs(0.0, 1.0, 0.0)
    ya = [a.advance(inputs, 1e-3).as_array() for _ in range(5)]
    yb = [b.advance(inputs, 1e-3).as_array() for _ in range(5)]
    np.testing.assert_array_equal(np.array(ya), np.array(yb))
    assert np.all(np.abs(np.array(ya)[:, 0] - 1.0) < 0.05)


def test_non_finite_state_raises():
    plant = ConverterPlant(noise=0.0)
    with pytest.raises(IntegrationDivergedError):
        plant.advance(PlantInputs(0.0, float("nan"), 0.0), 1e-3)


def test_with_grid_replaces_fields_only():
    plant = ConverterPlant(noise=0.0)
    gp = plant.with_grid(ug_mag=0.9, omega_offset=0.5)
    assert gp.ug_mag == 0.9
    assert gp.omega_offset == 0.5
    assert gp.Lg == plant.gp.Lg
    plant.set_grid(gp)
    assert plant.gp is gp


def test_reported_powers_match_reported_voltages_and_currents():
    plant = ConverterPlant(noise=1e-3, seed=2)
    inputs = PlantInputs(0.5, 1.05, 0.1)
    for _ in range(10):
        y = plant.advance(inputs, 1e-3)
        pe, qe = power_outputs(y.vd, y.vq, y.id, y.iq)
        assert y.pe == pytest.approx(pe, abs=1e-12)
        assert y.qe == pytest.approx(qe, abs=1e-12)


def test_zero_state_with_unit_command_drives_only_id():
    cp, gp = ConverterParams(), GridParams(ug_mag=0.0)
    dx = plant_derivatives(PlantState(), PlantInputs(0.0, 1.0, 0.0), cp, gp)
    assert dx[0] == pytest.approx(1.0 / cp.L1)
    np.testing.assert_array_equal(dx[1:], 0.0)


def test_null_system_stays_at_rest():
    state = PlantState()
    for _ in range(5):
        state, y = plant_step(state, PlantInputs(), ConverterParams(), GridParams(ug_mag=0.0), 5e-5)
    np.testing.assert_array_equal(state.as_array(), 0.0)
    assert y.pe == 0.0


def _integrate(state, inputs, cp, gp, h, duration):
    for _ in range(int(round(duration / h))):
        state, _ = plant_step(state, inputs, cp, gp, h)
    return state.as_array()


def test_rk4_error_shrinks_at_fourth_order():
    cp, gp = ConverterParams(), grid_from_scr(2.0, 10.0)
    start, inputs = PlantState(), PlantInputs(5.0, 1.0, 0.1)
    duration = 2e-3
    reference = _integrate(start, inputs, cp, gp, 5e-7, duration)
    coarse = np.linalg.norm(_integrate(start, inputs, cp, gp, 1e-5, duration) - reference)
    fine = np.linalg.norm(_integrate(start, inputs, cp, gp, 5e-6, duration) - reference)
    assert 12.0 < coarse / fine < 20.0


def test_lossless_filter_conserves_stored_energy():
    cp = ConverterParams(R1=0.0, R2=0.0)
    gp = GridParams(ug_mag=0.0, Rg=0.0)
    state = PlantState(id=0.4, iq=-0.2, igd=0.3, igq=0.1, vd=1.0, vq=-0.05)
    before = lc_energy(state, cp, gp)
    after_state = PlantState.from_array(_integrate(state, PlantInputs(), cp, gp, 5e-6, 2e-3))
    assert lc_energy(after_state, cp, gp) == pytest.approx(before, rel=1e-7)


def test_equilibrium_is_a_fixed_point_of_plant_step():
    cp, gp = ConverterParams(), grid_from_scr(2.0, 10.0)
    inputs = PlantInputs(0.0, 1.02, 0.05)
    state = plant_equilibrium(inputs, 0.3, cp, gp)
    start = state.as_array()
    for _ in range(100):
        state, _ = plant_step(state, inputs, cp, gp, 5e-5)
    np.testing.assert_allclose(state.as_array(), start, atol=100 * 1e-9)


def test_linearization_predicts_small_signal_response():
    cp, gp = ConverterParams(), grid_from_scr(2.0, 10.0)
    u0 = np.array([0.0, 1.02, 0.05])
    x0 = plant_equilibrium(PlantInputs.from_array(u0), 0.3, cp, gp).as_array()

    def period(x, u):
        return _integrate(PlantState.from_array(x), PlantInputs.from_array(u), cp, gp, 5e-5, 1e-3)

    eps = 1e-6
    A = np.column_stack([(period(x0 + eps * e, u0) - period(x0 - eps * e, u0)) / (2 * eps) for e in np.eye(7)])
    B = np.column_stack([(period(x0, u0 + eps * e) - period(x0, u0 - eps * e)) / (2 * eps) for e in np.eye(3)])

    du = np.array([1e-3, 1e-3, -1e-3])
    x, dx = x0.copy(), np.zeros(7)
    for _ in range(10):
        x = period(x, u0 + du)
        dx = A @ dx + B @ du
    actual = x - x0
    assert np.linalg.norm(actual - dx) < 0.05 * np.linalg.norm(actual)
