import numpy as np
import pytest

from hsfl.profiles import Allocation, EnvironmentSample, ModelProfile, SystemProfile
from hsfl.verify import small_scenario


def make_sys(k=2, n_chan=2, **kw):
    base = dict(num_clients=k, batch_size=256, batches_per_round=1, total_rounds=1,
                server_freq=1e10, server_intensity=1.0, client_intensity=1.0,
                subchannel_count=n_chan, subchannel_bandwidth=1e6, noise_psd=1.0,
                client_power_cap=10.0, ms_power_cap=100.0, es_power_cap=100.0,
                straggler_tolerance=1e9, max_cut=1, dataset_size=1)
    base.update(kw)
    return SystemProfile(**base)


def one_layer_model(fp=1e6, smashed=1e3, params=1e6):
    """Layer 1 costs ``fp`` FLOPs fwd+bwd per sample; cut 1 sends ``smashed`` bits."""
    return ModelProfile(client_fp_flops=[0, fp], client_bp_flops=[0, 0],
                        server_fp_flops=[fp, 0], server_bp_flops=[0, 0],
                        smashed_bits=[smashed, smashed], gradient_bits=[smashed, smashed],
                        model_bits=[0, params])


def make_alloc(k, n_chan, cut=1, share=None, assign=None, power=1.0):
    if assign is None:
        assign = np.tile(np.arange(n_chan) % k, (4, 1))
    return Allocation(np.full(k, cut), np.full(k, 1e10 / k) if share is None else share,
                      assign, np.full((4, k), power))


def make_env(k, n_chan, freq=2.56e9, gain=1.0):
    return EnvironmentSample(np.full(k, freq), np.full((4, n_chan, k), gain))


@pytest.fixture(scope="session")
def scenario():
    return small_scenario(k=3, subchannels=6, max_cut=3)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
