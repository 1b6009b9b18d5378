import numpy as np
import pytest

from hsfl.profiles import (
    ES_DOWN, MS_DOWN, MS_UP, Allocation, EnvironmentSample, FeasibilityError, ModelProfile,
    check_allocation,
)

from conftest import make_alloc, make_sys, one_layer_model


def test_from_layers_builds_cumulative_tables():
    m = ModelProfile.from_layers([1, 2, 3], [10, 20, 30, 40], [5, 6, 7], bp_ratio=2.0)
    assert m.num_layers == 3
    np.testing.assert_array_equal(m.client_fp_flops, [0, 1, 3, 6])
    np.testing.assert_array_equal(m.server_fp_flops, [6, 5, 3, 0])
    np.testing.assert_array_equal(m.client_bp_flops, [0, 2, 6, 12])
    np.testing.assert_array_equal(m.model_bits, [0, 5, 11, 18])
    np.testing.assert_array_equal(m.smashed_bits, m.gradient_bits)


def test_model_profile_rejects_bad_tables():
    with pytest.raises(ValueError):
        ModelProfile.from_layers([1, 2], [1, 2], [1, 2])
    with pytest.raises(ValueError, match="non-decreasing"):
        ModelProfile([0, 2, 1], [0, 0, 0], [1, 1, 0], [0, 0, 0], [1, 1, 1], [1, 1, 1], [0, 1, 2])


def test_system_profile_broadcasts_and_validates():
    s = make_sys(k=3, n_chan=3, client_power_cap=2.0)
    np.testing.assert_array_equal(s.client_power_cap, [2.0, 2.0, 2.0])
    with pytest.raises(ValueError):
        make_sys(k=2, noise_psd=0.0)
    with pytest.raises(ValueError):
        make_sys(k=2, client_power_cap=[1.0, 2.0, 3.0])


def test_environment_shape_check():
    with pytest.raises(ValueError, match="shape"):
        EnvironmentSample([1.0, 1.0], np.ones((4, 3, 3)))


@pytest.mark.parametrize("change, constraint", [
    (lambda a: a.cut.__setitem__(0, 2), "C1"),
    (lambda a: a.server_freq_share.__setitem__(0, 0.0), "C2"),
    (lambda a: a.server_freq_share.__setitem__(slice(None), 1e10), "C3"),
    (lambda a: a.power.__setitem__((MS_UP, 0), 11.0), "C4"),
    (lambda a: a.power.__setitem__(MS_DOWN, 60.0), "C5"),
    (lambda a: a.subchannel_assign.__setitem__((ES_DOWN, 0), 5), "assignment"),
])
def test_check_allocation_names_the_violated_constraint(change, constraint):
    model, sys = one_layer_model(), make_sys()
    alloc = make_alloc(2, 2)
    check_allocation(alloc, model, sys)
    change(alloc)
    with pytest.raises(FeasibilityError) as info:
        check_allocation(alloc, model, sys)
    assert info.value.constraint == constraint


def test_allocation_to_dict_round_trips_shapes():
    d = make_alloc(2, 2).to_dict()
    assert set(d["power"]) == {"ms_up", "ms_down", "es_up", "es_down"}
    assert d["cut"] == [1, 1]
