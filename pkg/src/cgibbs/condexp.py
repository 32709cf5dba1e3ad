"""Block structures of matrix algebras and conditional expectations.

The workhorse is :class:`BlockStructure`: a decomposition H = ⊕_i H_i ⊗ K_i
carried by explicit isometries, describing the subalgebra ⊕_i B(H_i) ⊗ 1.
Given a compatible full-rank state it yields the unique conditional
expectation onto the subalgebra (Takesaki), in both the Heisenberg and
Schrödinger pictures.

Two constructions feed it: a numerical closure/center extraction for
algebras given by generators, and a structured product construction for
the Schmidt and embedded-Glauber conditional expectations of 2-local
commuting models, whose central projections factor over boundary sites.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .hamiltonians import LocalPotential, gibbs_state, verify_commuting
from .lattice import Region, boundary, closure
from .linalg import QOperator, embed, matrix_power, modular_apply

__all__ = [
    "Block",
    "BlockStructure",
    "ConditionalExpectation",
    "generated_algebra",
    "schmidt_span",
    "schmidt_ce",
    "glauber_ce",
    "verify_ce_axioms",
    "verify_commutation",
]

SPAN_TOL = 1e-10
CENTER_GAP = 1e-8


# ---------------------------------------------------------------------------
# Block structures
# ---------------------------------------------------------------------------


@dataclass
class Block:
    """One central block H_i ⊗ K_i of a decomposed subalgebra.

    `isometry` has orthonormal columns indexed by (a, b) = a * m + b and
    maps C^{n m} into the ambient space; the subalgebra acts as B(n) ⊗ 1_m.
    """

    isometry: np.ndarray
    n: int
    m: int
    tau: np.ndarray | None = None  # factor state on K_i, set by the CE

    @property
    def projector(self) -> np.ndarray:
        return self.isometry @ self.isometry.conj().T


@dataclass
class BlockStructure:
    blocks: list
    dim: int

    def algebra_dimension(self) -> int:
        """Linear dimension of ⊕ B(H_i) ⊗ 1."""
        return sum(b.n**2 for b in self.blocks)

    def check_partition(self, tol: float = 1e-10) -> float:
        total = sum(b.projector for b in self.blocks)
        return float(np.max(np.abs(total - np.eye(self.dim))))


def _orthonormalize(vectors, tol: float = SPAN_TOL):
    """Rank-revealing orthonormal basis of the span of vectorized matrices."""
    if not vectors:
        return []
    M = np.stack([v.ravel() for v in vectors])
    u, s, vh = np.linalg.svd(M, full_matrices=False)
    keep = s > tol * max(1.0, s[0] if len(s) else 1.0)
    shape = vectors[0].shape
    return [vh[k].reshape(shape) for k in range(int(np.sum(keep)))]


def generated_algebra(generators, dim: int | None = None, max_rounds: int = 60,
                      rng: np.random.Generator | None = None) -> BlockStructure:
    """Close generators into a *-algebra and extract its block structure.

    The span is grown by multiplying with the generator set until the rank
    stabilizes; the center is diagonalized through a random Hermitian
    central element (re-drawn on eigenvalue degeneracy), and each central
    block is factorized H_i ⊗ K_i via matrix units.
    """
    gens = [g.matrix if isinstance(g, QOperator) else np.asarray(g, dtype=complex) for g in generators]
    if dim is None:
        if not gens:
            raise ValueError("need generators or an explicit dimension")
        dim = gens[0].shape[0]
    if rng is None:
        rng = np.random.default_rng(71)
    work = [np.eye(dim, dtype=complex)]
    for g in gens:
        work.append(g)
        work.append(g.conj().T)
    basis = _orthonormalize(work)
    mult = [g for g in gens] + [g.conj().T for g in gens]
    for _ in range(max_rounds):
        new = list(basis)
        for b in basis:
            for g in mult:
                new.append(g @ b)
        refreshed = _orthonormalize(new)
        if len(refreshed) == len(basis):
            basis = refreshed
            break
        basis = refreshed
    else:
        raise RuntimeError("algebra closure not reached within the iteration budget")

    # Center: solve [Z, g] = 0 for Z in the span.
    r = len(basis)
    rows = []
    for g in mult if mult else [np.eye(dim, dtype=complex)]:
        block = np.zeros((dim * dim, r), dtype=complex)
        for k, b in enumerate(basis):
            block[:, k] = (b @ g - g @ b).ravel()
        rows.append(block)
    M = np.vstack(rows) if rows else np.zeros((1, r))
    _, s, vh = np.linalg.svd(M)
    null_mask = np.concatenate([s, np.zeros(max(0, r - len(s)))]) <= SPAN_TOL * max(1.0, s[0] if len(s) else 1.0)
    center_coeffs = vh[null_mask.nonzero()[0], :] if len(s) else vh
    center = [sum(c * b for c, b in zip(coef, basis)) for coef in center_coeffs]
    if not center:
        center = [np.eye(dim, dtype=complex)]

    projs = _central_projections(center, dim, rng)
    blocks = [_factorize_block(P, basis, rng) for P in projs]
    bs = BlockStructure(blocks=blocks, dim=dim)
    if bs.check_partition() > 1e-8:
        raise RuntimeError("central projections do not resolve the identity")
    return bs


def _central_projections(center, dim, rng, draws: int = 5):
    for attempt in range(draws):
        coeffs = rng.normal(size=len(center))
        Z = sum(c * z for c, z in zip(coeffs, center))
        Z = Z + Z.conj().T
        w, v = np.linalg.eigh(Z)
        groups = _group_eigs(w, CENTER_GAP)
        # Distinct center elements must separate: accept when the number of
        # groups matches the center dimension.
        if len(groups) == len(center):
            return [v[:, idx] for idx in groups]
    # fall back to the last draw's grouping
    return [v[:, idx] for idx in groups]


def _group_eigs(w, gap):
    groups = []
    current = [0]
    for i in range(1, len(w)):
        if w[i] - w[current[-1]] > gap:
            groups.append(current)
            current = []
        current.append(i)
    groups.append(current)
    return groups


def _factorize_block(V, basis, rng, draws: int = 5):
    """Factor the compressed algebra on range(V) as B(n) ⊗ 1_m via matrix units."""
    D = V.shape[1]
    comp = _orthonormalize([V.conj().T @ b @ V for b in basis])
    n2 = len(comp)
    n = int(round(n2**0.5))
    if n * n != n2 or D % n:
        raise RuntimeError(f"block of size {D} is not a factor (span {n2})")
    m = D // n
    if n == 1:
        return Block(isometry=V, n=1, m=D)

    for attempt in range(draws):
        coeffs = rng.normal(size=n2)
        R = sum(c * b for c, b in zip(coeffs, comp))
        R = R + R.conj().T
        w, v = np.linalg.eigh(R)
        groups = _group_eigs(w, CENTER_GAP)
        if len(groups) == n and all(len(g) == m for g in groups):
            break
    else:
        raise RuntimeError("no generic element found for block factorization")

    eigproj = [v[:, idx] for idx in groups]  # isometries C^m -> C^D
    Rtilde = sum(rng.normal() * b for b in comp) + sum(
        1j * rng.normal() * b for b in comp
    )
    F1 = eigproj[0]
    cols = []
    u_basis = F1  # orthonormal basis of the reference eigenspace
    for a in range(n):
        if a == 0:
            E_a1 = F1 @ F1.conj().T
        else:
            G = eigproj[a] @ eigproj[a].conj().T @ Rtilde @ F1 @ F1.conj().T
            # polar part of G restricted to the relevant spaces
            uu, ss, vvh = np.linalg.svd(G)
            if np.sum(ss > 1e-9) != m:
                raise RuntimeError("degenerate transition element in factorization")
            E_a1 = uu[:, :m] @ vvh[:m, :]
        cols.extend((E_a1 @ u_basis).T)
    W = V @ np.stack(cols, axis=1)
    # orthonormality of the assembled columns
    gram = W.conj().T @ W
    if np.max(np.abs(gram - np.eye(n * m))) > 1e-8:
        raise RuntimeError("matrix-unit factorization produced a non-isometry")
    return Block(isometry=W, n=n, m=m)


# ---------------------------------------------------------------------------
# Conditional expectations
# ---------------------------------------------------------------------------


class ConditionalExpectation:
    """Conditional expectation onto ⊕_i B(H_i) ⊗ 1 with respect to sigma.

    Constructed from a block structure plus a compatible full-rank state:
    sigma must decompose as ⊕_i s_i ⊗ tau_i; the tau_i are read off the
    decomposition and define both pictures of the map.
    """

    def __init__(self, blocks: BlockStructure, sigma: QOperator, tol: float = 1e-8):
        self.blocks = blocks
        self.sigma = sigma
        s = sigma.matrix
        for blk in blocks.blocks:
            W = blk.isometry
            n, m = blk.n, blk.m
            comp = W.conj().T @ s @ W
            t4 = comp.reshape(n, m, n, m)
            tau = np.einsum("abad->bd", t4)
            tr = np.trace(tau).real
            if tr <= 0:
                raise ValueError("state assigns no weight to a block")
            tau = tau / tr
            red = np.einsum("abcb->ac", t4)
            resid = np.max(np.abs(comp - np.einsum("ac,bd->abcd", red, tau).reshape(n * m, n * m)))
            if resid > tol:
                raise ValueError(
                    f"state does not factor on a block (residual {resid:.2e}); "
                    "no conditional expectation with respect to it"
                )
            blk.tau = tau

    @property
    def sites(self):
        return self.sigma.sites

    def apply(self, X) -> np.ndarray:
        """Heisenberg picture: project onto the subalgebra."""
        x = X.matrix if isinstance(X, QOperator) else np.asarray(X)
        out = np.zeros(x.shape, dtype=complex)
        for blk in self.blocks.blocks:
            W, n, m = blk.isometry, blk.n, blk.m
            comp = (W.conj().T @ x @ W).reshape(n, m, n, m)
            red = np.einsum("aqcb,bq->ac", comp, blk.tau)
            out += W @ np.kron(red, np.eye(m)) @ W.conj().T
        return out

    def apply_dual(self, rho) -> np.ndarray:
        """Schrödinger picture: Tr_{K_i}[P_i rho P_i] ⊗ tau_i per block."""
        r = rho.matrix if isinstance(rho, QOperator) else np.asarray(rho)
        out = np.zeros(r.shape, dtype=complex)
        for blk in self.blocks.blocks:
            W, n, m = blk.isometry, blk.n, blk.m
            comp = (W.conj().T @ r @ W).reshape(n, m, n, m)
            red = np.einsum("abcb->ac", comp)
            out += W @ np.kron(red, blk.tau) @ W.conj().T
        return out

    def apply_qop(self, X: QOperator) -> QOperator:
        return QOperator(self.apply(X), self.sigma.sites, self.sigma.local_dim)

    def apply_dual_qop(self, rho: QOperator) -> QOperator:
        return QOperator(self.apply_dual(rho), self.sigma.sites, self.sigma.local_dim)

    def fixed_point_dimension(self) -> int:
        return self.blocks.algebra_dimension()

    def superoperator(self, dual: bool = False) -> np.ndarray:
        """Dense matrix acting on row-major vectorized operators."""
        d = self.blocks.dim
        S = np.zeros((d * d, d * d), dtype=complex)
        fn = self.apply_dual if dual else self.apply
        E = np.zeros((d, d), dtype=complex)
        for k in range(d * d):
            E.ravel()[k] = 1.0
            S[:, k] = fn(E).ravel()
            E.ravel()[k] = 0.0
        return S

    def kraus_operators(self, tol: float = 1e-12) -> list:
        """Kraus decomposition of the Schrödinger-picture channel E_*."""
        out = []
        for blk in self.blocks.blocks:
            W, n, m = blk.isometry, blk.n, blk.m
            t_vals, t_vecs = np.linalg.eigh(blk.tau)
            for b in range(m):
                if t_vals[b] <= tol:
                    continue
                for c in range(m):
                    ket = np.zeros((m, 1))
                    ket[c, 0] = 1.0
                    lift_in = np.kron(np.eye(n), ket.T)  # (n, n m): strips K index c
                    lift_out = np.kron(np.eye(n), t_vecs[:, b].reshape(m, 1))
                    K = math.sqrt(float(t_vals[b])) * (W @ lift_out) @ (lift_in @ W.conj().T)
                    if np.max(np.abs(K)) > tol:
                        out.append(K)
        return out


def restricted_blocks(E_small: ConditionalExpectation, E_big: ConditionalExpectation):
    """Restrictions E^{(i)} of the finer CE to the coarser CE's factors K_i.

    For F(E_big) ⊂ F(E_small) (E_small the CE onto the bigger algebra),
    returns for each block i of E_big a superoperator on B(K_i).
    """
    out = []
    for blk in E_big.blocks.blocks:
        W, n, m = blk.isometry, blk.n, blk.m
        sup = np.zeros((m * m, m * m), dtype=complex)
        for k in range(m * m):
            e = np.zeros((m, m), dtype=complex)
            e.ravel()[k] = 1.0
            lifted = W @ np.kron(np.eye(n), e) @ W.conj().T
            img = (W.conj().T @ E_small.apply(lifted) @ W).reshape(n, m, n, m)
            red = np.einsum("abad->bd", img) / n
            sup[:, k] = red.ravel()
        out.append(sup)
    return out


# ---------------------------------------------------------------------------
# Schmidt conditional expectations
# ---------------------------------------------------------------------------


def schmidt_span(H_jk: QOperator, which: int, beta: float = 1.0, tol: float = 1e-10):
    """Independent single-site factors of exp(-beta H_jk) on leg `which`.

    Reshapes the edge exponential across the two legs and keeps the left
    (which=0) or right (which=1) singular factors of rank > tol.
    """
    if len(H_jk.sites) != 2:
        raise ValueError("schmidt_span expects a 2-site operator")
    if not H_jk.is_hermitian(1e-10):
        raise ValueError("edge Hamiltonian must be Hermitian")
    d = H_jk.local_dim
    w, v = np.linalg.eigh(H_jk.matrix)
    expm = (v * np.exp(-beta * w)) @ v.conj().T
    T = expm.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)
    u, s, vh = np.linalg.svd(T)
    rank = int(np.sum(s > tol * s[0]))
    out = []
    for k in range(rank):
        if which == 0:
            out.append(u[:, k].reshape(d, d) * np.sqrt(s[k]))
        else:
            out.append(vh[k].reshape(d, d) * np.sqrt(s[k]))
    return out


def _site_block_data(potential, site, A_set, lam_set, beta, rng):
    """Per-boundary-site joint block decomposition.

    Returns a list of per-block dicts {iso, n, m}: H_site ≅ ⊕ C^n ⊗ C^m with
    the out-edge algebra acting as B(n) ⊗ 1_m.
    """
    d = potential.local_dim
    gens_all, gens_out = [], []
    for sup in potential.terms_touching({site}):
        if len(sup) != 2 or not set(sup) <= lam_set:
            continue
        other = sup[0] if sup[1] == site else sup[1]
        which = sup.index(site)
        span = schmidt_span(potential.term(sup), which, beta)
        gens_all.extend(span)
        if other not in A_set:
            gens_out.extend(span)
    joint = generated_algebra(gens_all, dim=d, rng=rng)
    blocks = []
    for blk in joint.blocks:
        V = blk.isometry  # C^{block} -> C^d, block dim = n*m of the joint algebra
        Db = V.shape[1]
        if not gens_out:
            blocks.append({"iso": V, "n": 1, "m": Db})
            continue
        comp_out = [V.conj().T @ g @ V for g in gens_out]
        sub = generated_algebra(comp_out, dim=Db, rng=rng)
        if len(sub.blocks) != 1:
            raise RuntimeError(
                "out-edge algebra not a factor inside a joint block; "
                "potential is not 2-local commuting in the required sense"
            )
        inner = sub.blocks[0]
        blocks.append({"iso": V @ inner.isometry, "n": inner.n, "m": inner.m})
    return blocks


def _assemble_blocks(site_data, free_sites, frozen_sites, all_sites, d):
    """Tensor per-site blocks into global Block objects.

    site_data: {site: [ {iso, n, m} ]} for boundary sites; free sites carry
    the full algebra (H-factor), frozen sites none (K-factor).
    """
    order = list(all_sites)
    bd_sites = sorted(site_data)
    combos = itertools.product(*[range(len(site_data[s])) for s in bd_sites]) if bd_sites else [()]
    blocks = []
    for combo in combos:
        chosen = {s: site_data[s][k] for s, k in zip(bd_sites, combo)}
        # per-site input factors, each reshaped (n_s, m_s) or free/frozen
        isos = []
        h_dims, k_dims = [], []
        for s in order:
            if s in chosen:
                isos.append(chosen[s]["iso"])
                h_dims.append(chosen[s]["n"])
                k_dims.append(chosen[s]["m"])
            elif s in free_sites:
                isos.append(np.eye(d, dtype=complex))
                h_dims.append(d)
                k_dims.append(1)
            else:
                isos.append(np.eye(d, dtype=complex))
                h_dims.append(1)
                k_dims.append(d)
        W = isos[0]
        for iso in isos[1:]:
            W = np.kron(W, iso)
        # legs of the input are (h1 k1 h2 k2 ...): regroup to (h1 h2 ... k1 k2 ...)
        n_tot = int(np.prod(h_dims))
        m_tot = int(np.prod(k_dims))
        in_dims = []
        for hn, km in zip(h_dims, k_dims):
            in_dims.extend([hn, km])
        t = W.reshape([W.shape[0]] + in_dims)
        perm = [0] + [1 + 2 * i for i in range(len(order))] + [2 + 2 * i for i in range(len(order))]
        W = t.transpose(perm).reshape(W.shape[0], n_tot * m_tot)
        blocks.append(Block(isometry=W, n=n_tot, m=m_tot))
    return blocks


def schmidt_ce(A: Region, potential: LocalPotential, Lambda: Region,
               beta: float | None = None, rng=None) -> ConditionalExpectation:
    """Schmidt conditional expectation for a 2-local commuting potential.

    Fixed-point algebra: trivial on A, the out-edge Schmidt algebra on each
    boundary site, full elsewhere; the conditional expectation is taken
    with respect to the Gibbs state on Lambda.
    """
    if beta is None:
        beta = potential.beta
    if any(len(sup) > 2 for sup in potential.supports):
        raise ValueError("Schmidt construction requires a 2-local potential")
    ok, worst = (potential.commuting_flag, 0.0) if potential.commuting_flag is not None else verify_commuting(potential)
    if not ok:
        raise ValueError(f"potential is not commuting (max commutator {worst:.2e})")
    if rng is None:
        rng = np.random.default_rng(1234)
    lam = tuple(sorted(map(tuple, Lambda)))
    lam_set = set(lam)
    A_set = set(map(tuple, A))
    if not A_set <= lam_set:
        raise ValueError("A must be contained in Lambda")
    d = potential.local_dim
    bd = {s for s in boundary(frozenset(A_set), potential.kappa) if s in lam_set}
    free = lam_set - A_set - bd

    site_data = {}
    for s in sorted(bd):
        site_data[s] = _site_block_data(potential, s, A_set, lam_set, beta, rng)
    blocks = _assemble_blocks(site_data, free, A_set, lam, d)
    bs = BlockStructure(blocks=blocks, dim=d ** len(lam))
    sigma = gibbs_state(potential, lam, beta)
    return ConditionalExpectation(bs, sigma)


# ---------------------------------------------------------------------------
# Embedded Glauber conditional expectations
# ---------------------------------------------------------------------------


def glauber_ce(A: Region, potential: LocalPotential, Lambda: Region,
               beta: float | None = None) -> ConditionalExpectation:
    """Embedded-Glauber conditional expectation for a classical potential.

    The Gibbs state must be diagonal in the computational basis; the dual
    map pinches the boundary configuration, traces A, and reinserts the
    conditioned classical Gibbs factor on A.
    """
    if beta is None:
        beta = potential.beta
    lam = tuple(sorted(map(tuple, Lambda)))
    lam_set = set(lam)
    A_set = set(map(tuple, A))
    if not A_set <= lam_set:
        raise ValueError("A must be contained in Lambda")
    d = potential.local_dim
    sigma = gibbs_state(potential, lam, beta)
    off = sigma.matrix - np.diag(np.diag(sigma.matrix))
    if np.max(np.abs(off)) > 1e-12:
        raise ValueError("Glauber embedding requires a classical (diagonal) Gibbs state")

    bd = sorted(s for s in boundary(frozenset(A_set), potential.kappa) if s in lam_set)
    A_sorted = sorted(A_set)
    free = sorted(lam_set - A_set - set(bd))

    # conditional Gibbs factor on A given the boundary configuration:
    # diagonal of the terms touching A, on A ∪ bd
    cross = sorted(set(A_sorted) | set(bd))
    Hc = np.zeros(d ** len(cross))
    for sup in potential.terms_touching(A_set):
        if set(sup) <= set(cross):
            Hc += np.real(np.diag(embed(potential.term(sup), cross).matrix))
    Hc = Hc.reshape([d] * len(cross))
    a_pos = [cross.index(s) for s in A_sorted]
    b_pos = [cross.index(s) for s in bd]
    Hc = Hc.transpose(b_pos + a_pos).reshape(d ** len(bd), d ** len(A_sorted))

    order = list(lam)
    blocks = []
    for eta_idx in range(d ** len(bd)) if bd else [0]:
        weights = np.exp(-beta * Hc[eta_idx]) if bd else np.exp(-beta * Hc.reshape(-1))
        tau_A = np.diag(weights / weights.sum()).astype(complex)
        eta = np.unravel_index(eta_idx, [d] * len(bd)) if bd else ()
        # isometry: |free basis> ⊗ |A basis> -> lattice order with eta frozen
        n = d ** len(free)
        m = d ** len(A_sorted)
        W = np.zeros((d ** len(order), n * m), dtype=complex)
        for fi in range(n):
            fcfg = np.unravel_index(fi, [d] * len(free)) if free else ()
            for ai in range(m):
                acfg = np.unravel_index(ai, [d] * len(A_sorted)) if A_sorted else ()
                cfg = {}
                cfg.update(dict(zip(free, fcfg)))
                cfg.update(dict(zip(A_sorted, acfg)))
                cfg.update(dict(zip(bd, eta)))
                idx = 0
                for s in order:
                    idx = idx * d + cfg[s]
                W[idx, fi * m + ai] = 1.0
        blocks.append(Block(isometry=W, n=n, m=m, tau=tau_A))
    bs = BlockStructure(blocks=blocks, dim=d ** len(order))
    return ConditionalExpectation(bs, sigma)


# ---------------------------------------------------------------------------
# Verification reports
# ---------------------------------------------------------------------------


def verify_ce_axioms(E: ConditionalExpectation, n_samples: int = 20, seed: int = 5,
                     modular_times=(0.17, 0.42)) -> dict:
    """Max residuals of the CE axioms and modular commutation."""
    rng = np.random.default_rng(seed)
    d = E.blocks.dim
    s = E.sigma.matrix
    contraction = idem = invariance = duality = modular = 0.0
    half = matrix_power(s, 0.5)
    for _ in range(n_samples):
        g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        x = (g + g.conj().T) / 2
        ex = E.apply(x)
        contraction = max(contraction, np.linalg.norm(ex, 2) - np.linalg.norm(x, 2))
        idem = max(idem, float(np.max(np.abs(E.apply(ex) - ex))))
        invariance = max(invariance, abs(np.trace(s @ ex) - np.trace(s @ x)))
        duality = max(
            duality,
            float(np.max(np.abs(half @ ex @ half - E.apply_dual(half @ x @ half)))),
        )
        for t in modular_times:
            lhs = modular_apply(s, E.apply(x), 1j * t)
            rhs = E.apply(modular_apply(s, x, 1j * t))
            modular = max(modular, float(np.max(np.abs(lhs - rhs))))
    return {
        "contraction": float(max(contraction, 0.0)),
        "idempotence": idem,
        "invariance": float(invariance),
        "duality": duality,
        "modular_commutation": modular,
        "max_residual": float(max(0.0, contraction, idem, invariance, duality, modular)),
    }


def verify_commutation(E_A: ConditionalExpectation, E_B: ConditionalExpectation,
                       E_union: ConditionalExpectation | None = None,
                       n_samples: int = 12, seed: int = 6) -> dict:
    """Residuals of E_A E_B = E_B E_A (= E_{A∪B} when given)."""
    rng = np.random.default_rng(seed)
    d = E_A.blocks.dim
    commute = against_union = 0.0
    for _ in range(n_samples):
        g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        x = (g + g.conj().T) / 2
        ab = E_A.apply(E_B.apply(x))
        ba = E_B.apply(E_A.apply(x))
        commute = max(commute, float(np.max(np.abs(ab - ba))))
        if E_union is not None:
            u = E_union.apply(x)
            against_union = max(against_union, float(np.max(np.abs(ab - u))))
    out = {"commutation": commute}
    if E_union is not None:
        out["against_union"] = against_union
    return out
