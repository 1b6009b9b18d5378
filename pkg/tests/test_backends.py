import json
import os
import subprocess
import sys

import pytest

SCRIPT = r"""
import json
import numpy as np
from hsfl import BACKEND
from hsfl.power import solve_power
from hsfl.freq import FreqSubproblem, solve_freq
from hsfl.verify import random_link_problem
rng = np.random.default_rng(5)
power = [solve_power(random_link_problem(rng)).objective for _ in range(10)]
freq = [solve_freq(FreqSubproblem(rng.uniform(0, 5, 3), rng.uniform(0.1, 10, 3) * 1e12,
                                  1e12)).objective for _ in range(20)]
print(json.dumps({"backend": BACKEND, "power": power, "freq": freq}))
"""


def run(backend):
    env = dict(os.environ, HSFL_KERNELS=backend)
    proc = subprocess.run([sys.executable, "-c", SCRIPT], env=env, capture_output=True,
                          text=True, timeout=300)
    return proc


@pytest.mark.slow
def test_backends_agree():
    out = {}
    for backend in ("numpy", "numba"):
        proc = run(backend)
        assert proc.returncode == 0, proc.stderr
        out[backend] = json.loads(proc.stdout.splitlines()[-1])
        assert out[backend]["backend"] == backend
    assert out["numpy"]["power"] == out["numba"]["power"]
    for a, b in zip(out["numpy"]["freq"], out["numba"]["freq"]):
        assert a == pytest.approx(b, rel=1e-12)


def test_unknown_backend_fails_at_import():
    proc = run("cuda")
    assert proc.returncode != 0
    assert "HSFL_KERNELS" in proc.stderr
