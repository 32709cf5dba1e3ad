"""High-temperature cluster expansion: connected sets, cluster weights,
the site-removal identity, and the analyticity bounds.

Conventions (fixed by the 2- and 3-site exactness oracles): g_z(S) is the
trace over the full lattice Hilbert space of exp(-sum_{X subset S} z_X
Phi(X)) N, and weights enter the site-removal identity rescaled by
d^{-|supp(X)|}:

    g_z(Lambda) = g_z(Lambda \\ x0) + sum_X d^{-|supp(X)|} W_z(X) g_z(Lambda \\ supp(X)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hamiltonians import LocalPotential, growth_constant, verify_commuting
from .lattice import closure
from .linalg import embed

__all__ = [
    "ConnectedSet",
    "connected_sets",
    "cluster_weight",
    "partition_value",
    "cluster_identity_check",
    "beta_c",
    "analyticity_bound_check",
    "log_ratio_check",
]


@dataclass(frozen=True)
class ConnectedSet:
    supports: tuple  # sorted tuple of supports (each a tuple of sites)
    anchor: tuple

    @property
    def size(self) -> int:
        return len(self.supports)

    def support_sites(self) -> frozenset:
        out = set()
        for sup in self.supports:
            out.update(sup)
        return frozenset(out)


def connected_sets(x0, potential: LocalPotential, max_size: int):
    """All connected sets of distinct supports containing x0, size <= max_size.

    Connectivity is through overlapping supports; singletons are allowed.
    """
    if max_size < 1:
        raise ValueError("max_size must be >= 1")
    x0 = tuple(x0)
    sups = potential.supports
    n = len(sups)
    adj = [[bool(set(sups[i]) & set(sups[j])) for j in range(n)] for i in range(n)]
    seeds = [i for i in range(n) if x0 in sups[i]]
    found = set()
    frontier = [frozenset([i]) for i in seeds]
    found.update(frontier)
    for _ in range(max_size - 1):
        nxt = []
        for cl in frontier:
            for j in range(n):
                if j in cl:
                    continue
                if any(adj[i][j] for i in cl):
                    grown = cl | {j}
                    if grown not in found:
                        found.add(grown)
                        nxt.append(grown)
        frontier = nxt
    out = [
        ConnectedSet(supports=tuple(sorted(sups[i] for i in cl)), anchor=x0)
        for cl in found
        if len(cl) <= max_size
    ]
    out.sort(key=lambda c: (c.size, c.supports))
    return out


def count_by_size(sets):
    counts = {}
    for c in sets:
        counts[c.size] = counts.get(c.size, 0) + 1
    return counts


def _z_of(z, sup, beta=None):
    if isinstance(z, dict):
        return z[sup]
    return z


def cluster_weight(cset: ConnectedSet, potential: LocalPotential, z,
                   mode: str = "closed_form", p_max: int = 20) -> complex:
    """W_z(X) = Tr_{supp X}[ prod_{X' in X} (e^{-z_X' Phi(X')} - 1) ].

    closed_form requires a commuting potential; truncated sums the defining
    multiplicity expansion to total order p_max (commuting inputs only,
    where orderings coincide).
    """
    sup_sites = sorted(cset.support_sites())
    d = potential.local_dim
    dim = d ** len(sup_sites)
    if mode == "closed_form":
        ok = potential.commuting_flag
        if ok is None:
            ok, _ = verify_commuting(potential)
        if not ok:
            raise ValueError("closed-form weights require a commuting potential")
        prod = np.eye(dim, dtype=complex)
        for sup in cset.supports:
            phi = embed(potential.term(sup), sup_sites).matrix
            zc = _z_of(z, sup)
            w, v = np.linalg.eigh(phi)
            e = (v * np.exp(-zc * w)) @ v.conj().T
            prod = prod @ (e - np.eye(dim))
        return complex(np.trace(prod))
    if mode == "truncated":
        ok = potential.commuting_flag
        if ok is None:
            ok, _ = verify_commuting(potential)
        if not ok:
            raise ValueError("truncated weights implemented for commuting potentials")
        mats = [embed(potential.term(sup), sup_sites).matrix for sup in cset.supports]
        zs = [_z_of(z, sup) for sup in cset.supports]
        k = len(mats)
        total = 0.0 + 0.0j
        # sum over multiplicities m_i >= 1 with sum m_i = p <= p_max of
        # prod (-z_i Phi_i)^{m_i} / m_i!
        for p in range(k, p_max + 1):
            for m in _compositions(p, k):
                coeff = 1.0
                term = np.eye(dim, dtype=complex)
                for mi, zi, phi in zip(m, zs, mats):
                    coeff /= math.factorial(mi)
                    term = term @ np.linalg.matrix_power(-zi * phi, mi)
                total += coeff * np.trace(term)
        return complex(total)
    raise ValueError(f"unknown mode {mode!r}")


def _compositions(total, parts):
    """Tuples of `parts` positive integers summing to total."""
    if parts == 1:
        yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def partition_value(potential: LocalPotential, Lambda, S, z, N=None) -> complex:
    """g_z(S) = Tr_{H_Lambda}[exp(-sum_{X subset S} z_X Phi(X)) N]."""
    lam = tuple(sorted(map(tuple, Lambda)))
    d = potential.local_dim
    dim = d ** len(lam)
    S_set = set(map(tuple, S))
    H = np.zeros((dim, dim), dtype=complex)
    for sup in potential.supports:
        if set(sup) <= S_set:
            H += _z_of(z, sup) * embed(potential.term(sup), lam).matrix
    if np.max(np.abs(H - H.conj().T)) < 1e-13:
        w, v = np.linalg.eigh(H)
        e = (v * np.exp(-w)) @ v.conj().T
    else:
        from scipy.linalg import expm

        e = expm(-H)
    n = np.eye(dim) if N is None else embed(N, lam).matrix
    return complex(np.trace(e @ n))


def cluster_identity_check(potential: LocalPotential, Lambda, x0, z, N=None) -> dict:
    """Relative residual of the site-removal identity at x0.

    N must be the identity (None) or positive with support outside the
    kappa-ball of the anchor.
    """
    lam = frozenset(map(tuple, Lambda))
    x0 = tuple(x0)
    if N is not None:
        ball = closure(frozenset([x0]), potential.kappa)
        if set(N.sites) & set(ball):
            raise ValueError("N must be supported outside the anchor's kappa-ball")
        w = np.linalg.eigvalsh(N.matrix)
        if w.min() < -1e-12:
            raise ValueError("N must be positive semidefinite")
    d = potential.local_dim
    lhs = partition_value(potential, lam, lam, z, N)
    rhs = partition_value(potential, lam, lam - {x0}, z, N)
    sets = connected_sets(x0, potential, max_size=len(potential.supports))
    for cset in sets:
        W = cluster_weight(cset, potential, z, "closed_form")
        sup = cset.support_sites()
        rhs += d ** (-len(sup)) * W * partition_value(potential, lam, lam - sup, z, N)
    scale = max(abs(lhs), 1.0)
    return {"lhs": lhs, "rhs": rhs, "residual": abs(lhs - rhs) / scale,
            "n_clusters": len(sets)}


def beta_c(g: int, h: float, kappa: int, delta: float) -> float:
    """Critical inverse temperature 1/(5 e g h kappa) - delta."""
    base = 1.0 / (5 * math.e * g * h * kappa)
    if delta >= base:
        raise ValueError(f"delta = {delta} >= 1/(5 e g h kappa) = {base:.6f}")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    return base - delta


def _sample_disc(beta, delta, n, rng):
    r = delta * np.sqrt(rng.uniform(size=n))
    th = rng.uniform(0, 2 * math.pi, size=n)
    return beta + r * np.exp(1j * th)


def analyticity_bound_check(potential: LocalPotential, Lambda, beta: float,
                            delta: float, N=None, n_samples: int = 50,
                            seed: int = 31) -> dict:
    """|ln g_z| <= (e^2 g h (beta+delta) + ln d) |Lambda| over disc samples.

    Each z_X is drawn independently in the disc |z_X - beta| <= delta; N
    must be positive with unit operator norm (identity by default).
    """
    from . import rng as rngmod

    lam = tuple(sorted(map(tuple, Lambda)))
    if N is not None:
        w = np.linalg.eigvalsh(N.matrix)
        if w.min() < -1e-12 or abs(np.linalg.norm(N.matrix, 2) - 1) > 1e-10:
            raise ValueError("N must be positive with unit operator norm")
    g = growth_constant(potential)
    h = potential.strength
    d = potential.local_dim
    bound = (math.e**2 * g * h * (beta + delta) + math.log(d)) * len(lam)
    sups = potential.supports
    worst = -math.inf
    rows = []
    for k in range(n_samples):
        rng = rngmod.stream(seed, "analyticity", k)
        zs = dict(zip(sups, _sample_disc(beta, delta, len(sups), rng)))
        gval = partition_value(potential, lam, lam, zs, N)
        val = abs(complex(np.log(gval)))
        rows.append(val)
        worst = max(worst, val)
    return {"bound": bound, "max_log_modulus": worst, "margin": bound - worst,
            "n_samples": n_samples}


def log_ratio_check(potential: LocalPotential, Lambda, x0, beta: float,
                    delta: float, n_samples: int = 50, seed: int = 37,
                    N=None) -> dict:
    """Normalized site-removal ratio bound |ln ratio| <= e^2 g h (beta+delta).

    With local (per-sublattice) traces the ratio carries an explicit 1/d;
    the full-lattice trace convention used here absorbs that factor into
    g_z(Lambda \\ x0) through the identity factor on the removed site.
    """
    from . import rng as rngmod

    lam = frozenset(map(tuple, Lambda))
    x0 = tuple(x0)
    g = growth_constant(potential)
    h = potential.strength
    bound = math.e**2 * g * h * (beta + delta)
    sups = potential.supports
    worst = -math.inf
    for k in range(n_samples):
        rng = rngmod.stream(seed, "logratio", k)
        zs = dict(zip(sups, _sample_disc(beta, delta, len(sups), rng)))
        num = partition_value(potential, lam, lam, zs, N)
        den = partition_value(potential, lam, lam - {x0}, zs, N)
        val = abs(complex(np.log(num / den)))
        worst = max(worst, val)
    return {"bound": bound, "max_log_ratio": worst, "margin": bound - worst,
            "n_samples": n_samples}
