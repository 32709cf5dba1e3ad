"""Commuting local potentials and their Gibbs states.

A potential maps interaction supports (site tuples) to Hermitian terms.
The locality parameter kappa bounds both the number of sites in a support
and the boundary range dist < kappa used throughout the geometry.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .lattice import Region, box, region
from .linalg import QOperator, align, embed, matrix_function, matrix_power, op_norm, qop

__all__ = [
    "LocalPotential",
    "verify_commuting",
    "hamiltonian",
    "gibbs_state",
    "post_selected",
    "growth_constant",
    "coarse_grain_chain",
    "ising_family",
    "PAULI",
]

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1.0, -1.0]).astype(complex),
}


@dataclass
class LocalPotential:
    """Map from supports to Hermitian terms, with model parameters."""

    terms: dict  # {tuple[Site,...]: np.ndarray}
    kappa: int
    beta: float = 1.0
    local_dim: int = 2
    commuting_flag: bool | None = field(default=None, compare=False)

    def __post_init__(self):
        clean = {}
        for sup, mat in self.terms.items():
            sup = tuple(sorted(tuple(int(c) for c in s) for s in sup))
            mat = np.asarray(mat, dtype=complex)
            if np.max(np.abs(mat - mat.conj().T)) > 1e-12:
                raise ValueError(f"term on {sup} is not Hermitian")
            if len(sup) > self.kappa:
                raise ValueError(f"support {sup} larger than kappa={self.kappa}")
            if np.max(np.abs(mat)) > 0:
                clean[sup] = mat
        self.terms = clean

    @property
    def strength(self) -> float:
        """h = max over terms of the operator norm."""
        if not self.terms:
            return 0.0
        return max(op_norm(m) for m in self.terms.values())

    @property
    def supports(self) -> list:
        return sorted(self.terms)

    def term(self, sup) -> QOperator:
        sup = tuple(sorted(map(tuple, sup)))
        return qop(self.terms[sup], sup, self.local_dim)

    def sites(self) -> Region:
        out = set()
        for sup in self.terms:
            out.update(sup)
        return frozenset(out)

    def terms_within(self, Lambda: Region) -> list:
        """Supports fully contained in the region."""
        lam = set(map(tuple, Lambda))
        return [sup for sup in self.supports if set(sup) <= lam]

    def terms_touching(self, A: Region) -> list:
        a = set(map(tuple, A))
        return [sup for sup in self.supports if set(sup) & a]


def verify_commuting(P: LocalPotential, tol: float = 1e-12):
    """(all pairs commute?, max commutator norm).

    Sets P.commuting_flag as a side effect of the verification.
    """
    worst = 0.0
    sups = P.supports
    for i in range(len(sups)):
        for j in range(i + 1, len(sups)):
            if not set(sups[i]) & set(sups[j]):
                continue
            a, b = align(P.term(sups[i]), P.term(sups[j]))
            comm = a.matrix @ b.matrix - b.matrix @ a.matrix
            worst = max(worst, float(np.linalg.norm(comm, 2)))
    ok = worst <= tol
    P.commuting_flag = ok
    return ok, worst


def hamiltonian(P: LocalPotential, Lambda: Region) -> QOperator:
    """H_Lambda = sum of the terms with support inside Lambda, on Lambda."""
    lam = tuple(sorted(map(tuple, Lambda)))
    dim = P.local_dim ** len(lam)
    H = np.zeros((dim, dim), dtype=complex)
    for sup in P.terms_within(Lambda):
        H += embed(P.term(sup), lam).matrix
    return QOperator(H, lam, P.local_dim)


def gibbs_state(P: LocalPotential, Lambda: Region, beta: float | None = None) -> QOperator:
    """sigma^Lambda = exp(-beta H_Lambda) / Z."""
    if beta is None:
        beta = P.beta
    H = hamiltonian(P, Lambda)
    expm = matrix_function(H, lambda x: np.exp(-beta * x))
    z = np.trace(expm.matrix).real
    return QOperator(expm.matrix / z, H.sites, P.local_dim)


def post_selected(sigma: QOperator, P_test: QOperator, tol: float = 1e-12) -> QOperator:
    """sqrt(P) sigma sqrt(P) / Tr[P sigma] for a test 0 <= P <= 1."""
    s, p = align(sigma, P_test)
    w = np.linalg.eigvalsh((p.matrix + p.matrix.conj().T) / 2)
    if w.min() < -1e-10 or w.max() > 1 + 1e-10:
        raise ValueError("test operator must satisfy 0 <= P <= 1")
    prob = np.trace(p.matrix @ s.matrix).real
    if prob <= tol:
        raise ValueError(f"post-selection probability {prob:.3e} below tolerance")
    root = matrix_power(p.matrix, 0.5)
    out = root @ s.matrix @ root / prob
    return QOperator((out + out.conj().T) / 2, s.sites, s.local_dim)


def growth_constant(P: LocalPotential) -> int:
    """Max over sites of the number of nonzero terms containing the site."""
    counts = {}
    for sup in P.terms:
        for x in sup:
            counts[x] = counts.get(x, 0) + 1
    return max(counts.values(), default=0)


def _pauli_string(ops: dict, sup) -> np.ndarray:
    mats = [PAULI[ops[s]] if s in ops else PAULI["I"] for s in sup]
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def coarse_grain_chain(P: LocalPotential, block: int) -> LocalPotential:
    """Merge `block` consecutive chain sites into one supersite.

    Rewrites a 1D potential whose terms span at most `block + 1` original
    sites into a nearest-neighbour potential on supersites of local
    dimension d^block, so the 2-local Schmidt machinery applies.
    """
    if block < 1:
        raise ValueError("block size must be >= 1")
    sites = sorted(P.sites())
    if any(len(s) != 1 for s in sites):
        raise ValueError("coarse graining is implemented for chains only")
    d = P.local_dim
    merged = {}
    for sup, mat in P.terms.items():
        blocks = sorted({s[0] // block for s in sup})
        if len(blocks) > 2 or (len(blocks) == 2 and blocks[1] != blocks[0] + 1):
            raise ValueError(
                f"term on {sup} spans non-adjacent supersites; increase the block size"
            )
        target = [(b,) for b in (blocks if len(blocks) == 2 else blocks)]
        cover = [(s,) for b in blocks for s in range(b * block, (b + 1) * block)]
        lifted = embed(qop(mat, sup, d), cover)
        key = tuple(target)
        if key in merged:
            merged[key] = merged[key] + lifted.matrix
        else:
            merged[key] = lifted.matrix
    return LocalPotential(terms=merged, kappa=2, beta=P.beta, local_dim=d**block)


def ising_family(d: int, L: int, J: float, hz: float, beta: float) -> LocalPotential:
    """Nearest-neighbour Ising model J sum Z_i Z_j + hz sum Z_i on a chain
    (d=1, sites 0..L-1) or square patch (d=2, L x L)."""
    if d == 1:
        sites = [(k,) for k in range(L)]
    elif d == 2:
        sites = sorted(box((0,) * 2, (L - 1,) * 2))
    else:
        raise ValueError("ising_family supports d in {1, 2}")
    terms = {}
    Zm = PAULI["Z"]
    for a, b in itertools.combinations(sites, 2):
        if sum(abs(x - y) for x, y in zip(a, b)) == 1 and J != 0:
            terms[(a, b)] = J * np.kron(Zm, Zm)
    if hz != 0:
        for s in sites:
            terms[(s,)] = hz * Zm
    return LocalPotential(terms=terms, kappa=2, beta=beta)
