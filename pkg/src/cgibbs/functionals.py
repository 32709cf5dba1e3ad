"""Entropy production, spectral gaps, MLSI witnesses, and the entropy
inequalities built from them.

Witness quantities are minima of entropy-production/entropy ratios over
sampled full-rank states plus local eigenvalue-simplex descents; they
upper-bound the true constants, so assertions derived from them are only
made in directions where an upper estimate is sound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .condexp import ConditionalExpectation
from .lindblad import Lindbladian, evolve, fixed_point_algebra
from .linalg import (
    QOperator,
    matrix_power,
    relative_entropy,
)

__all__ = [
    "WitnessReport",
    "entropy_production",
    "spectral_gap",
    "mlsi_witness",
    "pinched_mlsi_witness",
    "cmlsi_bound",
    "chain_rule_check",
    "approximate_tensorization_check",
    "step1_check",
    "decay_check",
]

DENOM_FLOOR = 1e-12


@dataclass
class WitnessReport:
    quantity: float
    minimizer: np.ndarray | None
    sample_count: int
    trace: list = field(default_factory=list)
    tolerance: float = DENOM_FLOOR

    def to_json(self) -> dict:
        blob = {
            "quantity": self.quantity if math.isfinite(self.quantity) else repr(self.quantity),
            "sample_count": self.sample_count,
            "trace": [[str(tag), float(v) if isinstance(v, (int, float)) else str(v)]
                      for tag, v in self.trace],
            "tolerance": self.tolerance,
        }
        if self.minimizer is not None:
            flat = np.ascontiguousarray(self.minimizer).ravel()
            inter = np.empty(2 * flat.size)
            inter[0::2] = flat.real
            inter[1::2] = flat.imag
            blob["minimizer"] = inter.tolist()
            blob["minimizer_dim"] = self.minimizer.shape[0]
        return blob


def _mat(x):
    return x.matrix if isinstance(x, QOperator) else np.asarray(x)


def entropy_production(L: Lindbladian, rho, sigma=None) -> float:
    """EP(rho) = -Tr[L_*(rho) (ln rho - ln sigma)] for invariant sigma."""
    r = _mat(rho)
    s = _mat(sigma if sigma is not None else L.sigma)
    wr = np.linalg.eigvalsh(r)
    if wr.min() < 1e-14:
        raise ValueError("entropy production requires a full-rank state")
    lr = _logm(r)
    ls = _logm(s)
    drho = L.apply_dual(r)
    return float(-np.real(np.trace(drho @ (lr - ls))))


def _logm(m):
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    if w.min() < 1e-14:
        raise ValueError("log of a singular matrix")
    return (v * np.log(w)) @ v.conj().T


def spectral_gap(L: Lindbladian, sigma=None, symmetry_tol: float = 1e-8) -> float:
    """Smallest nonzero eigenvalue of -L in the KMS inner product.

    Requires KMS symmetry; eigenvalues in the kernel (those below a
    relative 1e-10 cutoff) are excluded.
    """
    s = _mat(sigma if sigma is not None else L.sigma)
    S = L.superoperator()
    # KMS Gram (row-major vec): G = s^{1/2} ⊗ s^{1/2 T}, so G^{±1/2} factor
    quarter = matrix_power(s, 0.25)
    inv_quarter = matrix_power(s, -0.25)
    Gh = np.kron(quarter, quarter.T)
    Ginvh = np.kron(inv_quarter, inv_quarter.T)
    K = Gh @ (-S) @ Ginvh
    sym_res = np.linalg.norm(K - K.conj().T, 2)
    if sym_res > symmetry_tol:
        raise ValueError(f"generator is not KMS-symmetric (residual {sym_res:.2e})")
    ev = np.linalg.eigvalsh((K + K.conj().T) / 2)
    top = max(abs(ev[0]), abs(ev[-1]), 1.0)
    nonzero = ev[ev > 1e-10 * top]
    if len(nonzero) == 0:
        raise ValueError("generator has no nonzero spectrum")
    return float(nonzero.min())


def cmlsi_bound(gap: float, sigma, dim: int) -> float:
    """alpha_c lower bound gap * ||sigma^{-1}||^{-1} / dim^2."""
    if gap < 0:
        raise ValueError("gap must be nonnegative")
    s = _mat(sigma)
    lam_min = float(np.linalg.eigvalsh((s + s.conj().T) / 2).min())
    return gap * lam_min / dim**2


# ---------------------------------------------------------------------------
# Witnesses
# ---------------------------------------------------------------------------


@dataclass
class SamplerConfig:
    n_samples: int = 512
    n_descents: int = 32
    descent_steps: int = 60
    seed: int = 2024
    label: str = "mlsi"
    floor: float = 1e-7


def _sample_states(cfg: SamplerConfig, dim: int, anchor=None):
    """Full-rank sample states: Hilbert-Schmidt ensemble, Dirichlet spectra,
    and (when an anchor state is given) small perturbations of the anchor,
    where ratio minimizers of reversible generators tend to live."""
    for k in range(cfg.n_samples):
        rng = rngmod.stream(cfg.seed, cfg.label, k)
        which = k % 3 if anchor is not None else k % 2
        if which == 0:
            rho = rngmod.random_density(rng, dim)
        elif which == 1:
            p = rng.dirichlet(np.full(dim, rng.uniform(0.2, 2.0)))
            p = np.maximum(p, cfg.floor)
            p /= p.sum()
            g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
            q, _ = np.linalg.qr(g)
            rho = (q * p) @ q.conj().T
        else:
            s = rng.uniform(1e-3, 0.3)
            rho = (1 - s) * anchor + s * rngmod.random_density(rng, dim)
        yield rho


def _ratio_factory(L, E_dual, sigma):
    def ratio(rho):
        den = relative_entropy(rho, E_dual(rho))
        if den < DENOM_FLOOR:
            return None
        return entropy_production(L, rho, sigma) / (4 * den)

    return ratio


def _simplex_descent(ratio, rho0, steps, rng, floor=1e-9):
    """Projected gradient descent over the eigenvalue simplex of rho0."""
    w, v = np.linalg.eigh(rho0)
    p = np.maximum(w.real, floor)
    p /= p.sum()

    def value(p):
        rho = (v * p) @ v.conj().T
        return ratio(rho)

    best = value(p)
    if best is None:
        return None, None
    step = 0.05
    h = 1e-6
    use_spsa = len(p) > 16  # coordinate gradients get expensive at high dim
    for _ in range(steps):
        if use_spsa:
            delta = rng.choice([-1.0, 1.0], size=len(p))
            qp = np.maximum(p + h * delta, floor)
            qm = np.maximum(p - h * delta, floor)
            vp, vm = value(qp / qp.sum()), value(qm / qm.sum())
            if vp is None or vm is None:
                break
            grad = (vp - vm) / (2 * h) * delta
        else:
            grad = np.zeros_like(p)
            for i in range(len(p)):
                q = p.copy()
                q[i] += h
                q /= q.sum()
                val = value(q)
                if val is None:
                    return best, (v * p) @ v.conj().T
                grad[i] = (val - best) / h
        grad -= grad.mean()  # tangent to the simplex
        q = p - step * grad
        q = np.maximum(q, floor)
        q /= q.sum()
        val = value(q)
        if val is not None and val < best:
            best, p = val, q
            step *= 1.2
        else:
            step *= 0.5
            if step < 1e-8:
                break
    return best, (v * p) @ v.conj().T


def _near_fixed_point_candidates(L: Lindbladian, sigma, n_modes: int = 6):
    """States sigma + eps V along the slowest entropic eigenmodes.

    The ratio EP/(4D) at sigma + eps V tends to mu/2 where mu is the
    eigenvalue of -L_* in the Kubo-Mori metric; the slow eigenmodes are
    where ratio minimizers of reversible generators concentrate.
    """
    s = _mat(sigma)
    d = s.shape[0]
    w, v = np.linalg.eigh(s)
    if w.min() < 1e-13:
        return []
    try:
        L.superoperator()
    except MemoryError:
        return []
    # Kubo-Mori kernel k(a, b) = (ln a - ln b)/(a - b), diagonal in the
    # sigma matrix-unit basis
    k = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            if abs(w[i] - w[j]) < 1e-14 * max(w[i], w[j]):
                k[i, j] = 1.0 / w[i]
            else:
                k[i, j] = (np.log(w[i]) - np.log(w[j])) / (w[i] - w[j])
    S = L.superoperator().conj().T  # Schrödinger, row-major
    U = np.kron(v, v.conj())  # vec(v† X v) = U† vec(X)
    Sb = U.conj().T @ S @ U
    root = np.sqrt(k.ravel())
    A = (root[:, None] / root[None, :]) * (-Sb)
    A = (A + A.conj().T) / 2
    mu, modes = np.linalg.eigh(A)
    out = []
    picked = 0
    for idx in np.argsort(mu):
        if mu[idx] <= 1e-9:
            continue
        V = (modes[:, idx] / root).reshape(d, d)
        V = v @ V @ v.conj().T
        V = (V + V.conj().T) / 2
        nrm = np.linalg.norm(V, 2)
        if nrm < 1e-12:
            continue
        V /= nrm
        for eps_frac in (0.5, 0.1, 0.01):
            eps = eps_frac * w.min()
            out.append(s + eps * V)
        picked += 1
        if picked >= n_modes:
            break
    return out


def mlsi_witness(L: Lindbladian, sigma=None, config: SamplerConfig | None = None,
                 E: ConditionalExpectation | None = None) -> WitnessReport:
    """Upper witness of the MLSI constant: min over samples of EP / (4 D)."""
    cfg = config or SamplerConfig()
    s = sigma if sigma is not None else L.sigma
    if E is None:
        blocks = fixed_point_algebra(L)
        E = ConditionalExpectation(blocks, L.sigma)
    ratio = _ratio_factory(L, E.apply_dual, s)
    extra = _near_fixed_point_candidates(L, s)
    return _minimize_ratio(ratio, cfg, L.dim, anchor=_mat(s), extra=extra)


def _minimize_ratio(ratio, cfg, dim, anchor=None, extra=()) -> WitnessReport:
    scored = []
    skipped = 0
    candidates = list(extra)
    candidates.extend(_sample_states(cfg, dim, anchor=anchor))
    for rho in candidates:
        val = ratio(rho)
        if val is None:
            skipped += 1
            continue
        scored.append((val, rho))
    if not scored:
        raise ValueError("no valid sample (all denominators below tolerance)")
    scored.sort(key=lambda t: t[0])
    best_val, best_rho = scored[0]
    trace = [("sampled_min", best_val)]
    rng = rngmod.stream(cfg.seed, cfg.label + "-descent")
    for val, rho in scored[: cfg.n_descents]:
        out, out_rho = _simplex_descent(ratio, rho, cfg.descent_steps, rng)
        if out is not None and out < best_val:
            best_val, best_rho = out, out_rho
            trace.append(("descent", out))
    return WitnessReport(quantity=float(best_val), minimizer=best_rho,
                         sample_count=len(scored), trace=trace)


def pinched_mlsi_witness(L_C: Lindbladian, E_tiling: ConditionalExpectation,
                         E_C: ConditionalExpectation,
                         config: SamplerConfig | None = None) -> WitnessReport:
    """Pinched MLSI witness: EP_{L_C} against D(E_A* rho || E_C* E_A* rho).

    Returns +inf when the pinched numerator vanishes identically on the
    sample (trivial C).
    """
    cfg = config or SamplerConfig(label="pinched")

    def ratio(rho):
        omega = E_tiling.apply_dual(rho)
        den = relative_entropy(omega, E_C.apply_dual(omega))
        if den < DENOM_FLOOR:
            return None
        return entropy_production(L_C, rho) / (4 * den)

    try:
        return _minimize_ratio(ratio, cfg, L_C.dim, anchor=_mat(L_C.sigma))
    except ValueError:
        return WitnessReport(quantity=float("inf"), minimizer=None,
                             sample_count=0, trace=[("degenerate", "all-pinched")])


# ---------------------------------------------------------------------------
# Entropy inequalities
# ---------------------------------------------------------------------------


def chain_rule_check(rho, sigma, E: ConditionalExpectation) -> float:
    """|D(rho||sigma) - D(rho||E_* rho) - D(E_* rho||sigma)| for sigma = E_*(sigma)."""
    r, s = _mat(rho), _mat(sigma)
    es = E.apply_dual(s)
    if np.max(np.abs(es - s)) > 1e-10:
        raise ValueError("sigma is not invariant under the conditional expectation")
    er = E.apply_dual(r)
    return abs(relative_entropy(r, s) - relative_entropy(r, er) - relative_entropy(er, s))


def approximate_tensorization_check(rho, E_C, E_D, E_CD, c: float, xi: float,
                                    distance: float) -> dict:
    """Two-region approximate tensorization with clustering constant theta.

    rho is expected to be the pinched input already; reports both sides and
    the margin RHS - LHS.
    """
    r = _mat(rho)
    ctilde = c * _region_size(E_CD) * math.exp(-distance / xi) if math.isfinite(distance) else 0.0
    if 2 * ctilde >= 1:
        raise ValueError(f"hypothesis 2c|CuD|exp(-dist/xi) = {2 * ctilde:.3f} >= 1")
    theta = 1.0 / (1.0 - 2 * ctilde)
    lhs = relative_entropy(r, E_CD.apply_dual(r))
    rhs = theta * (relative_entropy(r, E_C.apply_dual(r)) + relative_entropy(r, E_D.apply_dual(r)))
    return {
        "lhs": lhs,
        "rhs": rhs,
        "margin": rhs - lhs,
        "theta": theta,
        "c_tilde": ctilde,
    }


def _region_size(E: ConditionalExpectation) -> int:
    return len(E.sites)


def step1_check(rho, E_tiling, E_CD, L_C, L_D, L_union, L_inter,
                beta_C: float, beta_D: float, theta: float) -> dict:
    """Single-split inequality: pinched relative entropy against the
    entropy productions of the overlap decomposition."""
    omega = E_tiling.apply_dual(_mat(rho))
    lhs = relative_entropy(omega, E_CD.apply_dual(omega))
    denom = 4 * min(beta_C, beta_D)
    ep_sum = entropy_production(L_inter, rho) + entropy_production(L_union, rho)
    rhs = theta / denom * ep_sum
    additivity = _generator_additivity(L_C, L_D, L_union, L_inter)
    return {"lhs": lhs, "rhs": rhs, "margin": rhs - lhs, "additivity": additivity}


def _generator_additivity(L_C, L_D, L_union, L_inter) -> float:
    """|| L_C + L_D - L_union - L_inter || on a probe basis (term bookkeeping)."""
    rng = rngmod.stream(17, "additivity")
    worst = 0.0
    for _ in range(4):
        x = rngmod.random_hermitian(rng, L_C.dim)
        resid = L_C.apply(x) + L_D.apply(x) - L_union.apply(x) - L_inter.apply(x)
        worst = max(worst, float(np.max(np.abs(resid))))
    return worst


def decay_check(L: Lindbladian, rho, alpha: float, times,
                E: ConditionalExpectation | None = None) -> dict:
    """D(e^{tL_*} rho || E_* rho) <= e^{-4 alpha t} D(rho || E_* rho) pointwise."""
    r0 = _mat(rho)
    if E is None:
        blocks = fixed_point_algebra(L)
        E = ConditionalExpectation(blocks, L.sigma)
    target = E.apply_dual(r0)
    d0 = relative_entropy(r0, target)
    rows = []
    worst = -float("inf")
    prev = float("inf")
    monotone = True
    rho_q = rho if isinstance(rho, QOperator) else QOperator(r0, L.sigma.sites, L.sigma.local_dim)
    for t in times:
        rt = evolve(L, rho_q, float(t))
        # fixed point of the *evolution* for the pinched target: E_* e^{tL_*} rho = E_* rho
        dt = relative_entropy(rt.matrix, target)
        envelope = math.exp(-4 * alpha * t) * d0
        rows.append({"t": float(t), "D": dt, "envelope": envelope})
        worst = max(worst, dt - envelope)
        monotone = monotone and dt <= prev + 1e-10
        prev = dt
    return {"rows": rows, "max_violation": worst, "monotone": monotone, "D0": d0}
