"""Scalar spectral functions and the small projected eigenproblem.

Holds the registry of built-in scalar functions f (with derivatives and
domains), an implicit-shift QL eigensolver for the symmetric tridiagonal
matrices produced by the Lanczos recurrence, the divided-difference matrix
underlying first-order perturbation of matrix functions, and the scalar
quadrature value ||u||^2 e1^T f(T) e1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numba
import numpy as np

from .errors import DomainError, NumericalError


# -- scalar functions -----------------------------------------------------------


@dataclass(frozen=True)
class SpectralFunction:
    """A scalar map f with derivative and open domain interval.

    complex_valued marks functions whose output is complex for real input
    (oscillatory phase factors); downstream sensitivity matrices then become
    complex symmetric.
    """

    name: str
    f: Callable[[np.ndarray], np.ndarray]
    fprime: Callable[[np.ndarray], np.ndarray]
    domain: tuple[float, float] = (-math.inf, math.inf)
    complex_valued: bool = False


LOG = SpectralFunction("log", np.log, lambda x: 1.0 / x, domain=(0.0, math.inf))
EXP = SpectralFunction("exp", np.exp, np.exp)
SQRT = SpectralFunction(
    "sqrt", np.sqrt, lambda x: 0.5 / np.sqrt(x), domain=(0.0, math.inf)
)
INVERSE = SpectralFunction(
    "inv", lambda x: 1.0 / x, lambda x: -1.0 / (x * x), domain=(0.0, math.inf)
)
IDENTITY = SpectralFunction("identity", lambda x: np.asarray(x, dtype=float), lambda x: np.ones_like(np.asarray(x, dtype=float)))


def phase_function(t: float) -> SpectralFunction:
    """Oscillatory factor lambda -> exp(-i t lambda) for real time t."""
    t = float(t)
    return SpectralFunction(
        f"phase:{t:g}",
        lambda x, _t=t: np.exp(-1j * _t * np.asarray(x, dtype=float)),
        lambda x, _t=t: -1j * _t * np.exp(-1j * _t * np.asarray(x, dtype=float)),
        complex_valued=True,
    )


_BUILTINS = {
    "log": LOG,
    "exp": EXP,
    "sqrt": SQRT,
    "inv": INVERSE,
    "inverse": INVERSE,
    "identity": IDENTITY,
}


def resolve_function(spec: str) -> SpectralFunction:
    """Look up a function by name; "phase:<t>" builds the phase factor."""
    if spec in _BUILTINS:
        return _BUILTINS[spec]
    if spec.startswith("phase:"):
        try:
            t = float(spec.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"malformed phase time in {spec!r}") from None
        return phase_function(t)
    raise ValueError(f"unknown function {spec!r}; choose log, exp, sqrt, inv, identity or phase:<t>")


def check_domain(f: SpectralFunction, lam: np.ndarray) -> None:
    """Raise DomainError naming the first point outside f's open domain."""
    lo, hi = f.domain
    lam = np.asarray(lam)
    bad = (lam <= lo) | (lam >= hi)
    if bad.any():
        offender = float(lam[bad][0])
        raise DomainError(
            f"function '{f.name}' undefined at ritz value {offender!r} "
            f"(domain is the open interval ({lo}, {hi}))"
        )


# -- symmetric tridiagonal eigendecomposition -----------------------------------


@numba.njit(cache=True)
def _tql2(d, e, z, max_sweeps):
    # Implicit-shift QL with eigenvector accumulation on a symmetric
    # tridiagonal matrix: d diagonal, e sub-diagonal (padded with trailing 0),
    # z initialized to the identity.  Returns 0 on success, 1 when a single
    # eigenvalue exceeds max_sweeps QL sweeps.
    m = d.shape[0]
    eps = 2.220446049250313e-16
    for l in range(m):
        nsweep = 0
        while True:
            seg = l
            while seg < m - 1:
                dd = abs(d[seg]) + abs(d[seg + 1])
                if abs(e[seg]) <= eps * dd:
                    break
                seg += 1
            if seg == l:
                break
            nsweep += 1
            if nsweep > max_sweeps:
                return 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            if g >= 0.0:
                g = d[seg] - d[l] + e[l] / (g + r)
            else:
                g = d[seg] - d[l] + e[l] / (g - r)
            s = 1.0
            c = 1.0
            p = 0.0
            completed = True
            for i in range(seg - 1, l - 1, -1):
                fi = s * e[i]
                b = c * e[i]
                r = math.hypot(fi, g)
                e[i + 1] = r
                if r == 0.0:
                    # underflow recovery: deflate and restart this sweep
                    d[i + 1] -= p
                    e[seg] = 0.0
                    completed = False
                    break
                s = fi / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                for k in range(m):
                    f2 = z[k, i + 1]
                    z[k, i + 1] = s * z[k, i] + c * f2
                    z[k, i] = c * z[k, i] - s * f2
            if completed:
                d[l] -= p
                e[l] = g
                e[seg] = 0.0
    return 0


@dataclass
class TridiagEigen:
    """Eigendecomposition T = Q diag(lam) Q^T with first-row weights.

    lam is ascending; each eigenvector's first entry of appreciable size is
    made positive, fixing the sign convention; c = Q^T e1.
    """

    Q: np.ndarray
    lam: np.ndarray
    c: np.ndarray = field(init=False)

    def __post_init__(self):
        self.c = self.Q[0, :].copy()


_SWEEP_CAP = 50


def tridiag_eigen(alpha, beta) -> TridiagEigen:
    """Full eigendecomposition of the symmetric tridiagonal (alpha, beta).

    alpha has length m, beta length m-1.  Raises NumericalError if the QL
    iteration fails to converge within the sweep cap.
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    m = alpha.shape[0]
    if m < 1:
        raise ValueError("alpha must be non-empty")
    if beta.shape != (m - 1,):
        raise ValueError(f"beta must have shape ({m - 1},), got {beta.shape}")
    d = alpha.copy()
    e = np.zeros(m)
    e[: m - 1] = beta
    z = np.eye(m)
    status = _tql2(d, e, z, _SWEEP_CAP)
    if status != 0:
        raise NumericalError(
            f"tridiagonal QL iteration failed to converge within {_SWEEP_CAP} sweeps"
        )
    order = np.argsort(d, kind="stable")
    lam = d[order]
    Q = np.ascontiguousarray(z[:, order])
    # sign convention: first entry of appreciable magnitude made positive
    for col in range(m):
        q = Q[:, col]
        lead = np.flatnonzero(np.abs(q) > 1e-11 * np.abs(q).max())
        if lead.size and q[lead[0]] < 0.0:
            Q[:, col] = -q
    return TridiagEigen(Q=Q, lam=lam)


# -- divided differences and quadrature ------------------------------------------

CONFLUENT_RELTOL = 1e-7


def divided_difference_matrix(lam, f: SpectralFunction) -> np.ndarray:
    """First divided differences F_ij = [f(l_i) - f(l_j)] / (l_i - l_j).

    Pairs closer than CONFLUENT_RELTOL times the spectral diameter use the
    derivative at the midpoint, which avoids losing half the significant
    digits to cancellation; the diagonal is f'(l_i) exactly.
    """
    lam = np.asarray(lam, dtype=float)
    check_domain(f, lam)
    diam = float(lam.max() - lam.min()) if lam.size else 0.0
    delta = np.subtract.outer(lam, lam)
    confluent = np.abs(delta) <= CONFLUENT_RELTOL * diam
    mid = 0.5 * np.add.outer(lam, lam)
    fvals = f.f(lam)
    numer = np.subtract.outer(fvals, fvals)
    denom = np.where(confluent, 1.0, delta)
    F = np.where(confluent, f.fprime(mid), numer / denom)
    return F


def quadrature_value(fac, f: SpectralFunction):
    """Scalar Lanczos-quadrature estimate ||u||^2 sum_i c_i^2 f(lam_i).

    Complex-valued f gives a complex scalar; all built-in real functions
    give a float.  Raises DomainError when a Ritz value leaves f's domain.
    """
    eig = tridiag_eigen(fac.alpha, fac.beta)
    return quadrature_value_from_eigen(eig, fac.u_norm, f)


def quadrature_value_from_eigen(eig: TridiagEigen, u_norm: float, f: SpectralFunction):
    check_domain(f, eig.lam)
    val = (u_norm * u_norm) * np.sum(eig.c * eig.c * f.f(eig.lam))
    return complex(val) if f.complex_valued else float(val)
