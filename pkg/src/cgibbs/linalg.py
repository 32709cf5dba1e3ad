"""Dense operator algebra on lattice tensor-product spaces.

A :class:`QOperator` is a dense complex matrix together with the sorted
tuple of lattice sites it acts on; all tensor-leg bookkeeping (embedding,
partial trace, products across different supports) is derived from that
one canonical ordering.  On top sit the weighted norms, inner products,
covariances, modular calculus and entropies used throughout the package.

Entropies are in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "QOperator",
    "qop",
    "identity",
    "partial_trace",
    "embed",
    "matrix_function",
    "matrix_power",
    "relative_entropy",
    "dmax",
    "weighted_lp_norm",
    "covariance",
    "kms_inner",
    "gns_inner",
    "modular_apply",
    "gamma_apply",
    "trace_norm",
    "trace_distance",
    "op_norm",
    "is_density",
    "qop_to_json",
    "qop_from_json",
]

HERMITICITY_TOL = 1e-12


def _canonical(sites) -> tuple:
    sites = [tuple(int(c) for c in s) for s in sites]
    out = tuple(sorted(set(sites)))
    if len(out) != len(sites):
        raise ValueError("duplicate sites in support")
    return out


@dataclass(frozen=True)
class QOperator:
    """Dense operator with declared site support.

    The matrix is indexed by the tensor product over `sites` in sorted
    (lexicographic) order with `local_dim` levels per site.
    """

    matrix: np.ndarray
    sites: tuple
    local_dim: int = 2

    def __post_init__(self):
        dim = self.local_dim ** len(self.sites)
        if self.matrix.shape != (dim, dim):
            raise ValueError(
                f"matrix shape {self.matrix.shape} != ({dim}, {dim}) for "
                f"{len(self.sites)} sites of dim {self.local_dim}"
            )

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dagger(self) -> "QOperator":
        return QOperator(self.matrix.conj().T, self.sites, self.local_dim)

    def is_hermitian(self, tol: float = HERMITICITY_TOL) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T)) <= tol)

    def __add__(self, other: "QOperator") -> "QOperator":
        a, b = align(self, other)
        return QOperator(a.matrix + b.matrix, a.sites, a.local_dim)

    def __sub__(self, other: "QOperator") -> "QOperator":
        a, b = align(self, other)
        return QOperator(a.matrix - b.matrix, a.sites, a.local_dim)

    def __mul__(self, c) -> "QOperator":
        return QOperator(self.matrix * c, self.sites, self.local_dim)

    __rmul__ = __mul__

    def __matmul__(self, other: "QOperator") -> "QOperator":
        a, b = align(self, other)
        return QOperator(a.matrix @ b.matrix, a.sites, a.local_dim)


def qop(matrix, sites, local_dim: int = 2) -> QOperator:
    """Wrap a matrix as a QOperator with canonically sorted support."""
    sites = list(map(tuple, sites))
    order = sorted(range(len(sites)), key=lambda i: sites[i])
    mat = np.asarray(matrix, dtype=complex)
    if [sites[i] for i in order] != sites:
        mat = _permute_legs(mat, order, local_dim)
    return QOperator(mat, tuple(sites[i] for i in order), local_dim)


def identity(sites, local_dim: int = 2) -> QOperator:
    sites = _canonical(sites)
    return QOperator(np.eye(local_dim ** len(sites), dtype=complex), sites, local_dim)


def _permute_legs(mat: np.ndarray, order, d: int) -> np.ndarray:
    """Reorder tensor legs so that new leg k is old leg order[k]."""
    n = len(order)
    t = mat.reshape((d,) * (2 * n))
    perm = list(order) + [n + i for i in order]
    return t.transpose(perm).reshape(mat.shape)


def align(a: QOperator, b: QOperator):
    """Embed two operators on the union of their supports."""
    if a.sites == b.sites:
        return a, b
    full = _canonical(set(a.sites) | set(b.sites))
    return embed(a, full), embed(b, full)


def embed(X: QOperator, full_sites) -> QOperator:
    """X ⊗ 1 on `full_sites`, legs permuted to canonical order."""
    full = _canonical(full_sites)
    if X.sites == full:
        return X
    if not set(X.sites) <= set(full):
        raise ValueError(f"support {X.sites} not contained in {full}")
    extra = tuple(s for s in full if s not in set(X.sites))
    d = X.local_dim
    mat = np.kron(X.matrix, np.eye(d ** len(extra), dtype=complex))
    # legs currently ordered X.sites + extra; send to canonical order
    current = list(X.sites) + list(extra)
    order = [current.index(s) for s in full]
    return QOperator(_permute_legs(mat, order, d), full, d)


def partial_trace(X: QOperator, keep_sites) -> QOperator:
    """Trace out support \\ keep; total trace is preserved."""
    keep = _canonical(keep_sites)
    if not set(keep) <= set(X.sites):
        raise ValueError(f"keep {keep} not contained in support {X.sites}")
    if keep == X.sites:
        return X
    d = X.local_dim
    n = len(X.sites)
    keep_pos = [X.sites.index(s) for s in keep]
    t = X.matrix.reshape((d,) * (2 * n))
    traced = [i for i in range(n) if i not in keep_pos]
    for count, i in enumerate(sorted(traced, reverse=True)):
        t = np.trace(t, axis1=i, axis2=i + (n - count))
    m = d ** len(keep)
    return QOperator(t.reshape(m, m), keep, d)


# ---------------------------------------------------------------------------
# Matrix functions
# ---------------------------------------------------------------------------

DEGENERACY_TOL = 1e-12
LOG_FLOOR = 1e-14


def _eigh(X: np.ndarray):
    w, v = np.linalg.eigh((X + X.conj().T) / 2)
    return w, v


def matrix_function(X: QOperator, f) -> QOperator:
    """f applied to a Hermitian operator through its eigendecomposition.

    f must be finite on the spectrum; ln of a numerically singular operator
    raises instead of returning garbage.
    """
    if not X.is_hermitian(1e-10):
        raise ValueError("matrix_function requires a Hermitian input")
    w, v = _eigh(X.matrix)
    if f in (np.log, math.log) and np.min(w) < LOG_FLOOR:
        raise ValueError(f"ln of a singular operator (min eigenvalue {np.min(w):.3e})")
    with np.errstate(all="ignore"):
        fw = np.asarray([f(x) for x in w])
    if not np.all(np.isfinite(np.atleast_1d(fw).view(float))):
        raise ValueError("f not finite on the spectrum")
    out = (v * fw) @ v.conj().T
    if np.max(np.abs(np.imag(fw))) < 1e-14:
        out = (out + out.conj().T) / 2
    return QOperator(out, X.sites, X.local_dim)


def _logm_psd(M: np.ndarray) -> np.ndarray:
    """ln on the support of a PSD matrix; raises if numerically singular
    eigenvalues would be hit by the caller's support."""
    w, v = _eigh(M)
    if np.min(w) < LOG_FLOOR:
        raise ValueError(
            f"matrix logarithm of a singular operator (min eigenvalue {np.min(w):.3e})"
        )
    return (v * np.log(w)) @ v.conj().T


def matrix_power(M: np.ndarray, p) -> np.ndarray:
    """M^p for Hermitian PSD M, complex p allowed (principal branch)."""
    w, v = _eigh(M)
    w = np.where(w < 0, 0.0, w)
    if np.iscomplexobj(np.asarray(p)) or p != int(p):
        if np.min(w) <= 0 and (np.real(p) < 0 or np.iscomplexobj(np.asarray(p))):
            raise ValueError("negative/complex power of a singular matrix")
        vals = np.exp(np.asarray(p) * np.log(np.maximum(w, LOG_FLOOR)))
        vals = np.where(w <= 0, 0.0, vals)
    else:
        vals = w ** int(p)
    return (v * vals) @ v.conj().T


# ---------------------------------------------------------------------------
# Entropies and norms
# ---------------------------------------------------------------------------


def is_density(rho: QOperator, tol: float = 1e-12) -> bool:
    if not rho.is_hermitian(tol):
        return False
    w = np.linalg.eigvalsh(rho.matrix)
    return bool(np.min(w) >= -tol and abs(np.sum(w) - 1) <= max(tol, 1e-10))


def relative_entropy(rho, sigma) -> float:
    """D(rho||sigma) = Tr[rho(ln rho - ln sigma)] in nats.

    Returns +inf with no exception when supp(rho) escapes supp(sigma).
    """
    r = rho.matrix if isinstance(rho, QOperator) else np.asarray(rho)
    s = sigma.matrix if isinstance(sigma, QOperator) else np.asarray(sigma)
    wr, vr = _eigh(r)
    ws, vs = _eigh(s)
    tol = 1e-12
    wr = np.where(wr < tol, 0.0, wr)
    # support check: weight of rho outside supp(sigma)
    kernel = ws < tol
    if np.any(kernel):
        P = vs[:, kernel]
        leak = float(np.real(np.trace(P.conj().T @ r @ P)))
        if leak > 1e-12:
            return float("inf")
    s_of_rho = float(np.sum(wr[wr > 0] * np.log(wr[wr > 0])))
    log_s = (vs[:, ~kernel] * np.log(ws[~kernel])) @ vs[:, ~kernel].conj().T
    cross = float(np.real(np.trace(r @ log_s)))
    return s_of_rho - cross


def dmax(rho, sigma) -> float:
    """Max-relative entropy ln || sigma^{-1/2} rho sigma^{-1/2} ||_inf."""
    r = rho.matrix if isinstance(rho, QOperator) else np.asarray(rho)
    s = sigma.matrix if isinstance(sigma, QOperator) else np.asarray(sigma)
    w = np.linalg.eigvalsh((s + s.conj().T) / 2)
    if np.min(w) < LOG_FLOOR:
        raise ValueError("dmax requires a full-rank second argument")
    inv_half = matrix_power(s, -0.5)
    m = inv_half @ r @ inv_half
    return float(np.log(np.linalg.norm(m, 2)))


def op_norm(X) -> float:
    m = X.matrix if isinstance(X, QOperator) else np.asarray(X)
    return float(np.linalg.norm(m, 2))


def trace_norm(X) -> float:
    m = X.matrix if isinstance(X, QOperator) else np.asarray(X)
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def trace_distance(rho, sigma) -> float:
    a = rho.matrix if isinstance(rho, QOperator) else np.asarray(rho)
    b = sigma.matrix if isinstance(sigma, QOperator) else np.asarray(sigma)
    return 0.5 * trace_norm(a - b)


def weighted_lp_norm(X, sigma, p) -> float:
    """|| X ||_{L_p(sigma)} = (Tr |sigma^{1/2p} X sigma^{1/2p}|^p)^{1/p}."""
    if p < 1:
        raise ValueError("p must be >= 1")
    x = X.matrix if isinstance(X, QOperator) else np.asarray(X)
    s = sigma.matrix if isinstance(sigma, QOperator) else np.asarray(sigma)
    if math.isinf(p):
        return float(np.linalg.norm(x, 2))
    w = np.linalg.eigvalsh((s + s.conj().T) / 2)
    if np.min(w) < LOG_FLOOR:
        raise ValueError("weighted norm requires full-rank sigma")
    root = matrix_power(s, 1.0 / (2 * p))
    m = root @ x @ root
    sv = np.linalg.svd(m, compute_uv=False)
    return float(np.sum(sv**p) ** (1.0 / p))


def kms_inner(X, Y, sigma) -> complex:
    """<X, Y>_KMS = Tr[sigma^{1/2} X† sigma^{1/2} Y]."""
    x = X.matrix if isinstance(X, QOperator) else np.asarray(X)
    y = Y.matrix if isinstance(Y, QOperator) else np.asarray(Y)
    s = sigma.matrix if isinstance(sigma, QOperator) else np.asarray(sigma)
    half = matrix_power(s, 0.5)
    return complex(np.trace(half @ x.conj().T @ half @ y))


def gns_inner(X, Y, sigma) -> complex:
    """<X, Y>_GNS = Tr[sigma X† Y]."""
    x = X.matrix if isinstance(X, QOperator) else np.asarray(X)
    y = Y.matrix if isinstance(Y, QOperator) else np.asarray(Y)
    s = sigma.matrix if isinstance(sigma, QOperator) else np.asarray(sigma)
    return complex(np.trace(s @ x.conj().T @ y))


def covariance(sigma, X, Y, kind: str = "KMS") -> complex:
    """Covariance of X, Y in the KMS or GNS inner product on sigma."""
    x = X.matrix if isinstance(X, QOperator) else np.asarray(X)
    y = Y.matrix if isinstance(Y, QOperator) else np.asarray(Y)
    s = sigma.matrix if isinstance(sigma, QOperator) else np.asarray(sigma)
    dim = s.shape[0]
    xc = x - np.trace(s @ x) * np.eye(dim)
    yc = y - np.trace(s @ y) * np.eye(dim)
    if kind.upper() == "KMS":
        return kms_inner(xc, yc, s)
    if kind.upper() == "GNS":
        return gns_inner(xc, yc, s)
    raise ValueError(f"unknown covariance kind {kind!r}")


def modular_apply(sigma, X, z) -> np.ndarray:
    """Delta_sigma^z (X) = sigma^z X sigma^{-z} for full-rank sigma."""
    x = X.matrix if isinstance(X, QOperator) else np.asarray(X)
    s = sigma.matrix if isinstance(sigma, QOperator) else np.asarray(sigma)
    w = np.linalg.eigvalsh((s + s.conj().T) / 2)
    if np.min(w) < LOG_FLOOR:
        raise ValueError("modular operator requires full-rank sigma")
    return matrix_power(s, z) @ x @ matrix_power(s, -z)


def gamma_apply(sigma, X, direction: str = "forward") -> np.ndarray:
    """Gamma_sigma(X) = sigma^{1/2} X sigma^{1/2}, or its inverse."""
    x = X.matrix if isinstance(X, QOperator) else np.asarray(X)
    s = sigma.matrix if isinstance(sigma, QOperator) else np.asarray(sigma)
    if direction == "forward":
        half = matrix_power(s, 0.5)
    elif direction == "inverse":
        w = np.linalg.eigvalsh((s + s.conj().T) / 2)
        if np.min(w) < LOG_FLOOR:
            raise ValueError("inverse Gamma requires full-rank sigma")
        half = matrix_power(s, -0.5)
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return half @ x @ half


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def qop_to_json(X: QOperator) -> dict:
    flat = np.ascontiguousarray(X.matrix).ravel()
    inter = np.empty(2 * flat.size)
    inter[0::2] = flat.real
    inter[1::2] = flat.imag
    return {
        "sites": [list(s) for s in X.sites],
        "local_dim": X.local_dim,
        "data": inter.tolist(),
    }


def qop_from_json(blob: dict) -> QOperator:
    sites = tuple(tuple(s) for s in blob["sites"])
    d = int(blob["local_dim"])
    inter = np.asarray(blob["data"])
    flat = inter[0::2] + 1j * inter[1::2]
    dim = d ** len(sites)
    return QOperator(flat.reshape(dim, dim), sites, d)
