"""Three-term Lanczos recurrence on a matrix-free Hermitian operator.

The recurrence per step k is the textbook form

    w = A v_k - beta_{k-1} v_{k-1}
    alpha_k = <v_k, w>
    w <- w - alpha_k v_k
    beta_k = ||w||

with optional full reorthogonalization (two modified Gram-Schmidt passes
against all stored columns) applied to w before the norm.  Off-diagonal
coefficients are kept non-negative by construction, which fixes the basis
sign convention and makes the factorization a continuous function of the
operator parameters away from breakdown.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .errors import NumericalError
from .spectral import check_domain, tridiag_eigen


@numba.njit(cache=True)
def _mgs_passes(basis, count, w, passes):
    # Modified Gram-Schmidt: project w against rows 0..count-1 of basis,
    # sequentially, `passes` times.  Rows are unit vectors.
    n = w.shape[0]
    for _ in range(passes):
        for i in range(count):
            acc = basis[i, 0] * 0.0
            for l in range(n):
                acc += np.conj(basis[i, l]) * w[l]
            for l in range(n):
                w[l] -= acc * basis[i, l]


@dataclass(frozen=True)
class LanczosConfig:
    """Iteration controls.

    steps: maximum subspace dimension m (>= 1).
    reorth: "none" or "full".
    breakdown_tol: beta threshold relative to the running max of |alpha|, beta.
    deterministic: always True; identical inputs give bit-identical output.
    """

    steps: int
    reorth: str = "full"
    breakdown_tol: float = 1e-12
    deterministic: bool = True

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.reorth not in ("none", "full"):
            raise ValueError(f"reorth must be 'none' or 'full', got {self.reorth!r}")


@dataclass
class LanczosFactorization:
    """Output of the recurrence: A V = V T + beta_residual v_next e_k^T.

    V: (n, k) orthonormal basis columns.
    alpha: (k,) diagonal of the tridiagonal T.
    beta: (k-1,) positive off-diagonal of T.
    beta_residual: residual coupling coefficient; 0 on breakdown.
    v_next: unit residual direction, or None when beta_residual == 0.
    u_norm: norm of the starting vector.
    """

    V: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    beta_residual: float
    v_next: np.ndarray | None
    u_norm: float

    @property
    def steps_used(self) -> int:
        return self.alpha.shape[0]

    def tridiagonal(self) -> np.ndarray:
        """T as a dense (k, k) array, for diagnostics and small-scale tests."""
        T = np.diag(self.alpha)
        if self.beta.size:
            T += np.diag(self.beta, 1) + np.diag(self.beta, -1)
        return T


def lanczos_factorize(op, theta, u, cfg: LanczosConfig) -> LanczosFactorization:
    """Run cfg.steps Lanczos steps of A(theta) started at u.

    Truncates early (with beta_residual = 0) when the Krylov subspace
    becomes invariant to within cfg.breakdown_tol; continuing past that
    point would divide by a vanishing beta.
    """
    theta = op.check_theta(theta)
    u = np.asarray(u)
    if u.shape != (op.dim,):
        raise ValueError(f"u must have shape ({op.dim},), got {u.shape}")
    u_norm = float(np.linalg.norm(u))
    if u_norm == 0.0:
        raise ValueError("starting vector u must be nonzero")

    dtype = np.complex128 if (op.scalar_kind == "complex" or np.iscomplexobj(u)) else np.float64
    m = cfg.steps
    n = op.dim
    basis = np.zeros((m, n), dtype=dtype)
    alphas = np.empty(m)
    betas = np.empty(max(m - 1, 0))

    v = np.asarray(u, dtype=dtype) / u_norm
    v_prev = None
    beta_prev = 0.0
    scale = 0.0

    for k in range(m):
        basis[k] = v
        w = np.asarray(op.matvec(theta, v), dtype=dtype)
        if w.shape != (n,):
            raise ValueError(f"matvec returned shape {w.shape}, expected ({n},)")
        if beta_prev != 0.0:
            w = w - beta_prev * v_prev
        alpha_c = np.vdot(v, w)
        if dtype == np.complex128:
            if abs(alpha_c.imag) > 1e-12 * max(1.0, scale, abs(alpha_c)):
                raise NumericalError(
                    f"non-real Lanczos diagonal at step {k + 1} "
                    f"(Im = {alpha_c.imag:.3e}); operator is not Hermitian"
                )
            alpha = float(alpha_c.real)
        else:
            alpha = float(alpha_c)
        w -= alpha * v
        if cfg.reorth == "full":
            _mgs_passes(basis, k + 1, w, 2)
        beta = float(np.linalg.norm(w))
        if not (np.isfinite(alpha) and np.isfinite(beta)):
            raise NumericalError(f"non-finite Lanczos coefficients at step {k + 1}")
        alphas[k] = alpha
        scale = max(scale, abs(alpha), beta)

        if beta <= cfg.breakdown_tol * scale:
            return LanczosFactorization(
                V=basis[: k + 1].T.copy(),
                alpha=alphas[: k + 1].copy(),
                beta=betas[:k].copy(),
                beta_residual=0.0,
                v_next=None,
                u_norm=u_norm,
            )
        if k < m - 1:
            betas[k] = beta
            v_prev = v
            beta_prev = beta
            v = w / beta
        else:
            return LanczosFactorization(
                V=basis.T.copy(),
                alpha=alphas.copy(),
                beta=betas.copy(),
                beta_residual=beta,
                v_next=w / beta,
                u_norm=u_norm,
            )
    raise AssertionError("unreachable")


def lanczos_matfun_action(op, theta, u, f, cfg: LanczosConfig) -> np.ndarray:
    """Krylov approximation of f(A(theta)) u, namely ||u|| V f(T) e1.

    Forward value only; this path carries no gradient machinery.
    """
    fac = lanczos_factorize(op, theta, u, cfg)
    eig = tridiag_eigen(fac.alpha, fac.beta)
    check_domain(f, eig.lam)
    weights = f.f(eig.lam) * eig.c
    return fac.u_norm * (fac.V @ (eig.Q @ weights))
