"""Clustering-of-correlations quantities and exponential decay fits.

Computes the covariance-based clustering values (operator-norm, weighted-L2
and GNS-moment normalized), the Dobrushin-Shlosman-type post-selection gap,
and the L1->Linf norm of conditional-expectation differences on restricted
blocks, then fits exponential decay profiles c * exp(-dist/xi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .condexp import ConditionalExpectation, restricted_blocks
from .hamiltonians import LocalPotential, gibbs_state, post_selected, verify_commuting
from .lattice import dist
from .linalg import (
    QOperator,
    covariance,
    embed,
    gamma_apply,
    op_norm,
    partial_trace,
    trace_norm,
    weighted_lp_norm,
)

__all__ = [
    "DecayFit",
    "fit_decay",
    "covariance_decay_profile",
    "qIIId_gap",
    "qIIId_profile",
    "l1_to_linf_norm",
    "clustering_report",
]


@dataclass
class DecayFit:
    samples: list  # [(distance, value)]
    prefactor: float | None
    xi: float | None
    r2: float | None
    dropped: int = 0
    flag: str = ""

    def to_json(self) -> dict:
        return {
            "samples": [[float(d), float(v)] for d, v in self.samples],
            "c": self.prefactor,
            "xi": self.xi,
            "r2": self.r2,
            "dropped": self.dropped,
            "flag": self.flag,
        }

    def to_csv(self) -> str:
        lines = ["distance,value"]
        lines += [f"{d},{v}" for d, v in self.samples]
        return "\n".join(lines) + "\n"


def fit_decay(samples, floor: float = 1e-12) -> DecayFit:
    """Least-squares fit of ln(value) = ln(c) - dist/xi over positive values."""
    pos = [(d, v) for d, v in samples if v > floor]
    dropped = len(samples) - len(pos)
    if len({d for d, _ in pos}) < 3:
        if all(v <= floor for _, v in samples):
            return DecayFit(samples=list(samples), prefactor=None, xi=None,
                            r2=None, dropped=dropped, flag="no correlation")
        raise ValueError("need values at >= 3 distinct distances for a decay fit")
    ds = np.asarray([d for d, _ in pos], dtype=float)
    ys = np.log([v for _, v in pos])
    A = np.stack([np.ones_like(ds), -ds], axis=1)
    coef, *_ = np.linalg.lstsq(A, ys, rcond=None)
    resid = ys - A @ coef
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    slope = coef[1]
    xi = 1.0 / slope if slope > 0 else math.inf
    return DecayFit(samples=list(samples), prefactor=float(np.exp(coef[0])),
                    xi=float(xi), r2=float(r2), dropped=dropped)


def _normalizers(kind: str, sigma_mat):
    kind = kind.lower()
    if kind in ("qlinf", "linf", "inf"):
        return "KMS", lambda x: op_norm(x)
    if kind in ("ql2", "l2"):
        return "KMS", lambda x: weighted_lp_norm(x, sigma_mat, 2)
    if kind in ("ql20", "l20", "gns"):
        return "GNS", lambda x: math.sqrt(
            max(np.real(np.trace(sigma_mat @ x.conj().T @ x)), 0.0)
        )
    raise ValueError(f"unknown clustering kind {kind!r}")


def covariance_decay_profile(sigma: QOperator, pairs, kind: str = "qlinf",
                             gamma_size: int | None = None) -> DecayFit:
    """Normalized covariances of observable pairs against their distance.

    `pairs` is a list of (X_A, Y_B) QOperators with declared supports; each
    covariance is divided by the definition's norms and by |Gamma| (the
    number of lattice sites of sigma unless overridden).
    """
    if len({dist(frozenset(x.sites), frozenset(y.sites)) for x, y in pairs}) < 3:
        raise ValueError("need pairs at >= 3 distinct distances")
    s = sigma.matrix
    size = gamma_size if gamma_size is not None else len(sigma.sites)
    inner_kind, norm = _normalizers(kind, s)
    samples = []
    for X, Y in pairs:
        d_ab = dist(frozenset(X.sites), frozenset(Y.sites))
        xe = embed(X, sigma.sites).matrix
        ye = embed(Y, sigma.sites).matrix
        nx, ny = norm(xe), norm(ye)
        if nx <= 0 or ny <= 0:
            samples.append((d_ab, 0.0))
            continue
        cov = abs(covariance(s, xe, ye, inner_kind))
        samples.append((d_ab, cov / (nx * ny * size)))
    return fit_decay(samples)


def qIIId_gap(potential: LocalPotential, Lambda, N_A: QOperator, P_B: QOperator,
              P_B_prime: QOperator, P_boundary: QOperator | None = None,
              beta: float | None = None, normalize_N: bool = False):
    """(lhs, rhs_factor) of the quantum Dobrushin-Shlosman condition.

    lhs = |Tr[sigma^{P_B P_d} N_A] - Tr[sigma^{P'_B P_d} N_A]| and
    rhs_factor = Tr[sigma^{P'_B P_d} N_A]; optionally N_A is renormalized to
    unit L1(sigma^{P'_B P_d}) norm (both conventions are reported upstream).
    """
    sigma = gibbs_state(potential, Lambda, beta)
    lam = sigma.sites

    def select(*tests):
        out = sigma
        for t in tests:
            if t is not None:
                out = post_selected(out, embed(t, lam))
        return out

    w = np.linalg.eigvalsh(embed(N_A, lam).matrix)
    if w.min() < -1e-10:
        raise ValueError("N_A must be positive semidefinite")
    s1 = select(P_B, P_boundary)
    s2 = select(P_B_prime, P_boundary)
    n = embed(N_A, lam).matrix
    if normalize_N:
        l1 = weighted_lp_norm(n, s2.matrix, 1)
        if l1 <= 0:
            raise ValueError("N_A has zero weighted L1 norm")
        n = n / l1
    t1 = float(np.real(np.trace(s1.matrix @ n)))
    t2 = float(np.real(np.trace(s2.matrix @ n)))
    return abs(t1 - t2), t2


def qIIId_profile(potential: LocalPotential, Lambda, N_A: QOperator, tests,
                  beta: float | None = None, gamma_size: int | None = None) -> DecayFit:
    """Decay fit of the qIIId ratio across boundary-test placements.

    `tests` is a list of (P_B, P_B_prime) pairs; the distance is measured
    between supp(N_A) and supp(P_B).
    """
    size = gamma_size if gamma_size is not None else len(list(Lambda))
    samples = []
    for P_B, P_Bp in tests:
        lhs, rhs = qIIId_gap(potential, Lambda, N_A, P_B, P_Bp, beta=beta)
        d_ab = dist(frozenset(N_A.sites), frozenset(P_B.sites))
        samples.append((d_ab, lhs / (rhs * size) if rhs > 0 else 0.0))
    return fit_decay(samples)


# ---------------------------------------------------------------------------
# L1 -> Linf norm of CE differences on restricted blocks
# ---------------------------------------------------------------------------


def _phi_value(phi_super, tau, u):
    """|| Phi(Gamma_tau^{-1}(|u><u|)) ||_inf at a unit vector u."""
    m = tau.shape[0]
    x = gamma_apply(tau, np.outer(u, u.conj()), "inverse")
    y = (phi_super @ x.reshape(-1)).reshape(m, m)
    return float(np.linalg.norm(y, 2))


def l1_to_linf_norm(E_C: ConditionalExpectation, E_D: ConditionalExpectation,
                    E_CD: ConditionalExpectation, n_starts: int = 24,
                    n_steps: int = 80, seed: int = 99, return_details: bool = False):
    """max over blocks i of || E_C^(i) E_D^(i) - E_CD^(i) : L1(tau_i) -> Linf ||.

    The self-adjoint L1(tau) unit ball has extreme points ±Gamma^{-1}(|u><u|),
    so the norm is the sup over unit vectors u, found by multi-start ascent.
    """
    subs_C = restricted_blocks(E_C, E_CD)
    subs_D = restricted_blocks(E_D, E_CD)
    subs_U = restricted_blocks(E_CD, E_CD)
    worst = 0.0
    per_block = []
    for blk, sc, sd, su in zip(E_CD.blocks.blocks, subs_C, subs_D, subs_U):
        phi = sc @ sd - su
        tau = blk.tau
        m = tau.shape[0]
        if np.linalg.norm(phi, 2) < 1e-13:
            per_block.append(0.0)
            continue
        best = 0.0
        for k in range(n_starts):
            rng = rngmod.stream(seed, "l1linf", k)
            u = rng.normal(size=m) + 1j * rng.normal(size=m)
            u /= np.linalg.norm(u)
            val = _phi_value(phi, tau, u)
            step = 0.3
            for _ in range(n_steps):
                g = rng.normal(size=m) + 1j * rng.normal(size=m)
                cand = u + step * g
                cand /= np.linalg.norm(cand)
                v = _phi_value(phi, tau, cand)
                if v > val:
                    u, val = cand, v
                    step *= 1.1
                else:
                    step *= 0.92
            best = max(best, val)
        per_block.append(best)
        worst = max(worst, best)
    if return_details:
        return worst, per_block
    return worst


def l1_to_linf_grid_oracle(phi_super, tau, n_grid: int = 40, refine: int = 4000,
                           seed: int = 5) -> float:
    """Dense search over unit vectors for small factor dimensions.

    Angular grid for m = 2, dense random cover plus shrinking-neighborhood
    zoom for m <= 4.
    """
    m = tau.shape[0]
    best, best_u = 0.0, None
    if m == 2:
        for th in np.linspace(0, math.pi, n_grid):
            for ph in np.linspace(0, 2 * math.pi, 2 * n_grid, endpoint=False):
                u = np.array([math.cos(th / 2), math.sin(th / 2) * np.exp(1j * ph)])
                v = _phi_value(phi_super, tau, u)
                if v > best:
                    best, best_u = v, u
    rng = rngmod.stream(seed, "l1linf-grid")
    for _ in range(refine):
        u = rng.normal(size=m) + 1j * rng.normal(size=m)
        u /= np.linalg.norm(u)
        v = _phi_value(phi_super, tau, u)
        if v > best:
            best, best_u = v, u
    # shrinking-neighborhood zoom around the best cover point
    radius = 0.5
    while radius > 1e-6:
        improved = False
        for _ in range(200):
            u = best_u + radius * (rng.normal(size=m) + 1j * rng.normal(size=m))
            u /= np.linalg.norm(u)
            v = _phi_value(phi_super, tau, u)
            if v > best:
                best, best_u = v, u
                improved = True
        if not improved:
            radius /= 2
    return best


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------


def clustering_report(potential: LocalPotential, Lambda, pairs, beta: float | None = None,
                      ce_family=None) -> dict:
    """All clustering quantities of a model on one instance grid."""
    sigma = gibbs_state(potential, Lambda, beta)
    ok, worst = verify_commuting(potential)
    out = {
        "commuting": ok,
        "max_commutator": worst,
        "note": "" if ok else "non-commuting potential: |Gamma| weakens to |Lambda| in all bounds",
    }
    for kind in ("qlinf", "ql2", "ql20"):
        fit = covariance_decay_profile(sigma, pairs, kind)
        out[kind] = fit.to_json()
    # norm-ordering sanity: L2-normalized values dominate Linf-normalized ones
    linf = dict((d, v) for d, v in out["qlinf"]["samples"])
    l2 = dict((d, v) for d, v in out["ql2"]["samples"])
    out["linf_le_l2"] = all(linf[d] <= l2[d] + 1e-12 for d in linf if d in l2)
    if ce_family is not None:
        E_C, E_D, E_CD = ce_family
        out["l1_to_linf"] = l1_to_linf_norm(E_C, E_D, E_CD)
    return out
