import numpy as np
import pytest

from krylov_grad import DenseSymmetricOperator, LanczosConfig, lanczos_factorize, tridiag_eigen


@pytest.fixture(scope="session", autouse=True)
def warm_jit_kernels():
    """Trigger numba compilation once so timed tests measure math, not JIT."""
    op = DenseSymmetricOperator(np.diag([1.0, 2.0, 3.0]))
    fac = lanczos_factorize(op, np.zeros(0), np.ones(3), LanczosConfig(steps=3))
    tridiag_eigen(fac.alpha, fac.beta)
    opc = DenseSymmetricOperator(np.diag([1.0 + 0j, 2.0 + 0j]))
    lanczos_factorize(opc, np.zeros(0), np.array([1.0, 1.0 + 0j]), LanczosConfig(steps=2))
