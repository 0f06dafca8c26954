import numpy as np
import pytest

from app.behavior.baseline import GFLBaseline
from app.behavior.design import BehaviorRefs
from app.errors import DimensionError, ExcitationError
from app.harness.collect import CURRENT_CHANNELS, ExcitationSpec, LoopDriver, collect_data
from app.plant.converter import ConverterPlant, PlantInputs, outputs_from_state


def _driver(channels=("dw", "ud_star", "uq_star"), noise=1e-3):
    plant = ConverterPlant(noise=noise, seed=3)
    driver = LoopDriver(plant, GFLBaseline(cp=plant.cp), channels)
    driver.start(outputs_from_state(plant.state), PlantInputs(0.0, plant.gp.ug_mag, 0.0), BehaviorRefs())
    return driver


def test_perturbations_are_seeded_and_bounded():
    spec = ExcitationSpec((2.0, 0.02, 0.0), length=300, seed=9)
    a, b = spec.perturbations(), ExcitationSpec((2.0, 0.02, 0.0), length=300, seed=9).perturbations()
    np.testing.assert_array_equal(a, b)
    assert a.shape == (300, 3)
    assert np.all(np.abs(a) <= np.array([2.0, 0.02, 0.0]))
    assert not np.array_equal(a, ExcitationSpec((2.0, 0.02, 0.0), length=300, seed=10).perturbations())


def test_spec_validation():
    with pytest.raises(ValueError):
        ExcitationSpec((-1.0,))
    with pytest.raises(ValueError):
        ExcitationSpec((1.0,), length=0)


def test_zero_amplitude_is_not_exciting():
    driver = _driver()
    with pytest.raises(ExcitationError):
        collect_data(driver, ExcitationSpec((0.0, 0.0, 0.0), length=100), order=5)


def test_short_record_is_rejected():
    driver = _driver()
    with pytest.raises(ExcitationError):
        collect_data(driver, ExcitationSpec((2.0, 0.02, 0.02), length=20), order=10)


def test_channel_count_must_match():
    with pytest.raises(DimensionError):
        collect_data(_driver(), ExcitationSpec((0.02, 0.02), length=10))
    with pytest.raises(ValueError):
        LoopDriver(ConverterPlant(), GFLBaseline(), ("dw",))


def test_collection_is_exciting_and_seeded():
    spec = ExcitationSpec((2.0, 0.02, 0.02), length=200, seed=4)
    a = collect_data(_driver(), spec, order=10)
    b = collect_data(_driver(), spec, order=10)
    assert (a.T, a.m, a.p) == (200, 3, 6)
    np.testing.assert_array_equal(a.u, b.u)
    np.testing.assert_array_equal(a.y, b.y)
    assert np.all(np.abs(a.y[:, 0] - 1.0) < 0.2)


def test_current_channels_keep_inner_loop():
    driver = _driver(CURRENT_CHANNELS, noise=0.0)
    y0 = driver.y
    np.testing.assert_allclose(driver.last_command, [y0.id, y0.iq])
    traj = collect_data(driver, ExcitationSpec((0.05, 0.05), length=80, seed=2), order=5)
    assert traj.m == 2
    assert driver.last_inputs.ud_star == pytest.approx(1.0, abs=0.2)
