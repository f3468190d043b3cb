import json
import os
import subprocess
import sys

import numpy as np
import pytest

import compcache
from compcache.interference import _log_laplace_a4_loop, _log_laplace_a4_numpy

SCRIPT = """
import json
from compcache import backend_name
from compcache.interference import ClusterGeometry, PathlossModel
from compcache.scdp import scdp_jt_sweep, scdp_pt_ss_sweep
from compcache.sim import SimProtocol, simulate
g, m = ClusterGeometry(100.0, 1e-4), PathlossModel(4.0)
out = simulate(SimProtocol(window=600, n_realizations=2000), g, m)
print(json.dumps({
    "backend": backend_name(),
    "jt": [e.value for e in scdp_jt_sweep(g, m, 3, [0.2, 1.0, 4.0], budget=30000)],
    "ss": [e.value for e in scdp_pt_ss_sweep(g, m, 3, [0.1, 0.26], budget=30000)],
    "sim": out.sirs[:, :50].tolist(),
}))
"""


def _run(flag):
    env = dict(os.environ)
    env.pop("COMPCACHE_DISABLE_NUMBA", None)
    if flag:
        env["COMPCACHE_DISABLE_NUMBA"] = flag
    proc = subprocess.run([sys.executable, "-c", SCRIPT], capture_output=True, text=True, env=env)
    assert proc.returncode == 0, proc.stderr
    return json.loads(proc.stdout)


def test_environment_flag_selects_numpy_and_results_agree():
    fast, slow = _run(None), _run("1")
    assert fast["backend"] == "numba" and slow["backend"] == "numpy"
    for key in ("jt", "ss"):
        np.testing.assert_allclose(fast[key], slow[key], rtol=1e-12)
    np.testing.assert_allclose(fast["sim"], slow["sim"], rtol=1e-12)


def test_laplace_kernels_agree():
    rng = np.random.default_rng(0)
    s = rng.uniform(0, 1e10, 1000)
    x = rng.uniform(1, 500, 1000)
    np.testing.assert_allclose(_log_laplace_a4_loop(s, x, 1e-4), _log_laplace_a4_numpy(s, x, 1e-4),
                               rtol=1e-13)


def test_default_backend_is_numba_when_installed():
    if os.environ.get("COMPCACHE_DISABLE_NUMBA"):
        pytest.skip("fallback forced by environment")
    assert compcache.backend_name() == "numba"
