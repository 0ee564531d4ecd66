"""Matrix-free parameterized Hermitian operators.

Every operator exposes two primitives and nothing else is ever required of
it: a matrix-vector product ``A(theta) @ x`` and a derivative contraction
``Re(w^H (dA/dtheta_j) v)``.  Parameter Jacobians are never materialized.

Operators are immutable after construction; ``matvec`` and the contractions
are pure functions of their arguments and safe to call concurrently.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse as sp


def _as_vector(x, n: int, name: str = "x") -> np.ndarray:
    x = np.asarray(x)
    if x.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},), got {x.shape}")
    return x


class ParamOperator:
    """Access contract for a Hermitian operator family A(theta).

    Attributes
    ----------
    dim : ambient dimension n.
    num_params : number of real parameters p.
    scalar_kind : "real" or "complex" (entries; theta is always real).
    """

    dim: int
    num_params: int
    scalar_kind: str = "real"

    # -- primitives implemented by subclasses --------------------------------

    def matvec(self, theta: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Return A(theta) @ x without validation."""
        raise NotImplementedError

    def deriv_contract_cols(self, theta, j: int, w_cols, v_cols):
        """Paired-column contraction sum_b w_b^H (dA/dtheta_j) v_b.

        ``w_cols`` and ``v_cols`` are (n, k) arrays with matching k.  The
        left factor is conjugated.  Returns a complex scalar in complex mode,
        a float otherwise.  This is the vectorized kernel behind gradient
        assembly; results are accumulated in a fixed order so repeated calls
        are bit-identical.
        """
        raise NotImplementedError

    # -- validated public surface ---------------------------------------------

    def check_theta(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.num_params,):
            raise ValueError(
                f"theta must have shape ({self.num_params},), got {theta.shape}"
            )
        return theta

    def apply(self, theta, x) -> np.ndarray:
        """Return A(theta) @ x with input validation."""
        theta = self.check_theta(theta)
        x = _as_vector(x, self.dim)
        return self.matvec(theta, x)

    def deriv_contract(self, theta, j: int, w, v) -> float:
        """Return Re(w^H (dA/dtheta_j) v).

        The real part is the meaningful quantity for real parameters of a
        Hermitian family; the imaginary component of a complex contraction is
        recovered by scaling one argument by ``-1j`` when needed.
        """
        theta = self.check_theta(theta)
        if not 0 <= j < self.num_params:
            raise ValueError(f"parameter index {j} out of range [0, {self.num_params})")
        w = _as_vector(w, self.dim, "w")
        v = _as_vector(v, self.dim, "v")
        out = self.deriv_contract_cols(theta, j, w[:, None], v[:, None])
        return float(np.real(out))


class DenseSymmetricOperator(ParamOperator):
    """Affine family A(theta) = A0 + sum_j theta_j E_j over explicit matrices.

    Serves as the exactly-differentiable substrate for oracle comparisons;
    all matrices are validated Hermitian at construction.
    """

    def __init__(self, entries, param_directions=()):
        entries = np.asarray(entries)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError(f"entries must be square, got shape {entries.shape}")
        _require_hermitian(entries, "entries")
        directions = [np.asarray(E) for E in param_directions]
        for k, E in enumerate(directions):
            if E.shape != entries.shape:
                raise ValueError(f"direction {k} has shape {E.shape}, expected {entries.shape}")
            _require_hermitian(E, f"direction {k}")
        self._a0 = entries
        self._directions = directions
        self.dim = entries.shape[0]
        self.num_params = len(directions)
        self.scalar_kind = "complex" if np.iscomplexobj(entries) or any(
            np.iscomplexobj(E) for E in directions
        ) else "real"
        self._cache_key = None
        self._cache_mat = None

    @property
    def param_directions(self):
        return list(self._directions)

    def matrix(self, theta) -> np.ndarray:
        """Assembled dense matrix A(theta)."""
        theta = self.check_theta(theta)
        key = theta.tobytes()
        if key != self._cache_key:
            mat = self._a0.copy()
            for t, E in zip(theta, self._directions):
                if t != 0.0:
                    mat = mat + t * E
            self._cache_key = key
            self._cache_mat = mat
        return self._cache_mat

    def matvec(self, theta, x):
        return self.matrix(theta) @ x

    def deriv_contract_cols(self, theta, j, w_cols, v_cols):
        E = self._directions[j]
        out = np.sum(np.conj(w_cols) * (E @ v_cols))
        return out if self.scalar_kind == "complex" or np.iscomplexobj(out) else float(out)


def _require_hermitian(mat: np.ndarray, name: str, rtol: float = 1e-12) -> None:
    scale = max(float(np.abs(mat).max()), 1.0)
    dev = float(np.abs(mat - mat.conj().T).max())
    if dev > rtol * scale:
        raise ValueError(f"{name} is not Hermitian (max asymmetry {dev:.3e})")


class RbfKernelOperator(ParamOperator):
    """Squared-exponential kernel matrix with diagonal noise.

    K_ij(theta) = sf^2 exp(-||x_i - x_j||^2 / (2 l^2)) + (sn^2 + jitter) delta_ij
    with theta = (l, sf, sn).  Rows of the kernel are materialized lazily in
    blocks inside matvec, so no n x n storage is held.
    """

    JITTER = 1e-6

    def __init__(self, inputs, block_size: int = 256):
        inputs = np.asarray(inputs, dtype=float)
        if inputs.ndim != 2:
            raise ValueError(f"inputs must be (n, d), got shape {inputs.shape}")
        self._x = inputs
        self._sqnorm = np.einsum("id,id->i", inputs, inputs)
        self._block = int(block_size)
        self.dim = inputs.shape[0]
        self.num_params = 3
        self.scalar_kind = "real"

    @property
    def inputs(self) -> np.ndarray:
        return self._x

    def check_theta(self, theta):
        theta = super().check_theta(theta)
        if theta[0] <= 0.0:
            raise ValueError(f"lengthscale must be positive, got {theta[0]}")
        return theta

    def _sqdist_block(self, i0: int, i1: int) -> np.ndarray:
        # ||x_i - x_j||^2 for rows i0:i1 against all points; clip roundoff.
        cross = self._x[i0:i1] @ self._x.T
        d2 = self._sqnorm[i0:i1, None] + self._sqnorm[None, :] - 2.0 * cross
        np.maximum(d2, 0.0, out=d2)
        return d2

    def matvec(self, theta, x):
        ell, sf, sn = theta
        y = np.empty(self.dim, dtype=np.result_type(x.dtype, float))
        inv = 1.0 / (2.0 * ell * ell)
        for i0 in range(0, self.dim, self._block):
            i1 = min(i0 + self._block, self.dim)
            k = np.exp(-inv * self._sqdist_block(i0, i1))
            y[i0:i1] = (sf * sf) * (k @ x)
        y += (sn * sn + self.JITTER) * x
        return y

    def _direction_block(self, theta, j, i0, i1):
        ell, sf, sn = theta
        d2 = self._sqdist_block(i0, i1)
        g = np.exp(-d2 / (2.0 * ell * ell))
        if j == 0:
            return (sf * sf) * g * (d2 / ell**3)
        if j == 1:
            return 2.0 * sf * g
        raise AssertionError("diagonal direction handled separately")

    def deriv_contract_cols(self, theta, j, w_cols, v_cols):
        if j == 2:
            sn = theta[2]
            return 2.0 * sn * float(np.real(np.sum(np.conj(w_cols) * v_cols)))
        acc = 0.0
        for i0 in range(0, self.dim, self._block):
            i1 = min(i0 + self._block, self.dim)
            eb = self._direction_block(theta, j, i0, i1)
            acc += np.sum(np.conj(w_cols[i0:i1]) * (eb @ v_cols))
        return float(np.real(acc)) if not np.iscomplexobj(w_cols) else acc

    def dense_matrices(self, theta):
        """Assembled kernel and the three analytic parameter derivatives.

        Returns (K, [dK/dl, dK/dsf, dK/dsn]) at theta; intended for dense
        reference computations at desk scale.
        """
        theta = self.check_theta(theta)
        ell, sf, sn = theta
        d2 = self._sqdist_block(0, self.dim)
        g = np.exp(-d2 / (2.0 * ell * ell))
        K = (sf * sf) * g + (sn * sn + self.JITTER) * np.eye(self.dim)
        dl = (sf * sf) * g * (d2 / ell**3)
        dsf = 2.0 * sf * g
        dsn = 2.0 * sn * np.eye(self.dim)
        return K, [dl, dsf, dsn]


class SparseGraphOperator(ParamOperator):
    """Symmetric sparse adjacency matrix in CSR form (no parameters).

    Gradients with respect to structural perturbations go through the
    rank-one contraction path, so ``num_params`` is zero.
    """

    def __init__(self, adjacency):
        A = sp.csr_array(adjacency)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {A.shape}")
        asym = abs(A - A.T)
        if asym.nnz and asym.data.max() > 1e-12 * max(1.0, abs(A).data.max() if A.nnz else 1.0):
            raise ValueError("adjacency values are not symmetric")
        self._adj = A
        self.dim = A.shape[0]
        self.num_params = 0
        self.scalar_kind = "real"

    @property
    def adjacency(self):
        return self._adj

    @property
    def row_offsets(self) -> np.ndarray:
        return self._adj.indptr

    @property
    def col_indices(self) -> np.ndarray:
        return self._adj.indices

    @property
    def values(self) -> np.ndarray:
        return self._adj.data

    @property
    def num_edges(self) -> int:
        """Undirected edge count (stored nonzeros / 2 for zero-diagonal input)."""
        return (self._adj.nnz - int((self._adj.diagonal() != 0).sum())) // 2

    def matvec(self, theta, x):
        return self._adj @ x

    def deriv_contract_cols(self, theta, j, w_cols, v_cols):
        raise ValueError("graph operator has no parameters")

    def dense(self) -> np.ndarray:
        return self._adj.toarray()


# -- Pauli-string Hamiltonians -------------------------------------------------

_MAX_SITES = 12


class PauliSumOperator(ParamOperator):
    """H(theta) = sum_j theta_j P_j over tensor-product terms on L spin sites.

    Each term is a single-site X, a single-site Z, or a nearest-neighbor ZZ
    pair, encoded as ("x", i), ("z", i) or ("zz", i).  The matvec applies
    terms through bit permutations and diagonal sign masks; no 2^L x 2^L
    matrix is ever formed.  Site 0 is the leftmost tensor factor (most
    significant bit of the basis index).
    """

    def __init__(self, num_sites: int, terms):
        if not 1 <= num_sites <= _MAX_SITES:
            raise ValueError(f"site count must be in [1, {_MAX_SITES}], got {num_sites}")
        self.num_sites = int(num_sites)
        self.dim = 1 << self.num_sites
        self.terms = list(terms)
        self.num_params = len(self.terms)
        self.scalar_kind = "complex"
        idx = np.arange(self.dim)
        self._perms = {}
        self._signs = {}
        for t, (kind, site) in enumerate(self.terms):
            last = self.num_sites - (2 if kind == "zz" else 1)
            if not 0 <= site <= last:
                raise ValueError(f"term ({kind!r}, {site}) out of range for {self.num_sites} sites")
            if kind == "x":
                self._perms[t] = idx ^ (1 << (self.num_sites - 1 - site))
            elif kind == "z":
                self._signs[t] = 1.0 - 2.0 * ((idx >> (self.num_sites - 1 - site)) & 1)
            elif kind == "zz":
                za = 1.0 - 2.0 * ((idx >> (self.num_sites - 1 - site)) & 1)
                zb = 1.0 - 2.0 * ((idx >> (self.num_sites - 2 - site)) & 1)
                self._signs[t] = za * zb
            else:
                raise ValueError(f"unknown term kind {kind!r}")
        self._diag_key = None
        self._diag = None

    def _diagonal(self, theta) -> np.ndarray:
        # fused diagonal of all Z/ZZ terms; cached for the last theta seen
        key = theta.tobytes()
        if key != self._diag_key:
            d = np.zeros(self.dim)
            for t, sign in self._signs.items():
                d += theta[t] * sign
            self._diag_key = key
            self._diag = d
        return self._diag

    def matvec(self, theta, x):
        y = self._diagonal(theta) * x
        for t, perm in self._perms.items():
            if theta[t] != 0.0:
                y = y + theta[t] * x[perm]
        return y

    def term_apply_cols(self, j: int, v_cols):
        """P_j applied to each column of an (n, k) array."""
        if j in self._perms:
            return v_cols[self._perms[j]]
        return self._signs[j][:, None] * v_cols

    def deriv_contract_cols(self, theta, j, w_cols, v_cols):
        return complex(np.sum(np.conj(w_cols) * self.term_apply_cols(j, v_cols)))

    def dense_term(self, j: int) -> np.ndarray:
        """P_j as an explicit real symmetric matrix (small L only)."""
        if j in self._perms:
            perm = self._perms[j]
            mat = np.zeros((self.dim, self.dim))
            mat[perm, np.arange(self.dim)] = 1.0
            return mat
        return np.diag(self._signs[j])

    def dense_matrix(self, theta) -> np.ndarray:
        """H(theta) as an explicit matrix; guarded to L <= 10."""
        if self.num_sites > 10:
            raise ValueError("dense assembly is limited to 10 sites")
        theta = self.check_theta(theta)
        H = np.zeros((self.dim, self.dim))
        for j, t in enumerate(theta):
            if t != 0.0:
                H += t * self.dense_term(j)
        return H


def build_pauli_dictionary(num_sites: int) -> PauliSumOperator:
    """Standard transverse-field dictionary {X_i} + {Z_i} + {Z_i Z_{i+1}}.

    Term order is X_0..X_{L-1}, Z_0..Z_{L-1}, Z_0Z_1..Z_{L-2}Z_{L-1}, giving
    p = 3L - 1 parameters.
    """
    if not 1 <= num_sites <= _MAX_SITES:
        raise ValueError(f"site count must be in [1, {_MAX_SITES}], got {num_sites}")
    terms = [("x", i) for i in range(num_sites)]
    terms += [("z", i) for i in range(num_sites)]
    terms += [("zz", i) for i in range(num_sites - 1)]
    return PauliSumOperator(num_sites, terms)
