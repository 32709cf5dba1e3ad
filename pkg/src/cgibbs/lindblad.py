"""Local Lindbladian generators, semigroup evolution, and the detailed-balance
normal form.

Generators are stored as sums of local terms acting on a common lattice
region; each term is a (support, Heisenberg superoperator closure) pair.
The conditional-expectation generators (Schmidt, Glauber) are sums of
E_k - id over sites; dephasing and depolarizing generators complete the
warm-up examples.  The normal form decomposes a GNS-symmetric generator
into modular-eigenvector jump operators with weights and Bohr frequencies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .condexp import ConditionalExpectation, generated_algebra, glauber_ce, schmidt_ce
from .hamiltonians import LocalPotential, gibbs_state
from .lattice import Region
from .linalg import QOperator, matrix_power

__all__ = [
    "Lindbladian",
    "LocalTerm",
    "NormalForm",
    "schmidt_generator",
    "glauber_generator",
    "dephasing_generator",
    "depolarizing_generator",
    "to_superoperator",
    "evolve",
    "fixed_point_algebra",
    "kernel_dimension",
    "normal_form",
    "gns_symmetry_residual",
    "DENSE_SITE_BUDGET",
]

DENSE_SITE_BUDGET = 6


@dataclass
class LocalTerm:
    """One local summand: Heisenberg action plus optional Schrödinger dual."""

    support: frozenset
    heis: object  # callable X -> term(X)
    dual: object | None = None


@dataclass
class Lindbladian:
    """Sum of local Heisenberg-picture terms with a designated fixed state."""

    terms: list  # [LocalTerm]
    sigma: QOperator
    kind: str = "generic"
    gns_symmetric: bool = False

    @property
    def dim(self) -> int:
        return self.sigma.matrix.shape[0]

    @property
    def sites(self):
        return self.sigma.sites

    def apply(self, X) -> np.ndarray:
        x = X.matrix if isinstance(X, QOperator) else np.asarray(X)
        out = np.zeros_like(x, dtype=complex)
        for term in self.terms:
            out += term.heis(x)
        return out

    def _term_super(self, term) -> np.ndarray:
        d = self.dim
        S = np.zeros((d * d, d * d), dtype=complex)
        E = np.zeros((d, d), dtype=complex)
        for k in range(d * d):
            E.ravel()[k] = 1.0
            S[:, k] = term.heis(E).ravel()
            E.ravel()[k] = 0.0
        return S

    def apply_dual(self, rho) -> np.ndarray:
        """Schrödinger picture, using per-term closed-form duals when given."""
        r = rho.matrix if isinstance(rho, QOperator) else np.asarray(rho)
        out = np.zeros_like(r, dtype=complex)
        for term in self.terms:
            if term.dual is not None:
                out += term.dual(r)
            else:
                S = self._term_super(term).conj().T
                out += (S @ r.reshape(-1)).reshape(r.shape)
        return out

    _cached_super: np.ndarray | None = field(default=None, repr=False, compare=False)

    def superoperator(self) -> np.ndarray:
        """Dense Heisenberg superoperator on row-major vectorized operators."""
        if self._cached_super is None:
            d = self.dim
            if len(self.sites) > DENSE_SITE_BUDGET:
                raise MemoryError(
                    f"dense superoperator needs {d**2}x{d**2}; "
                    f"use the matrix-free integrator for more than "
                    f"{DENSE_SITE_BUDGET} sites"
                )
            S = np.zeros((d * d, d * d), dtype=complex)
            E = np.zeros((d, d), dtype=complex)
            for k in range(d * d):
                E.ravel()[k] = 1.0
                S[:, k] = self.apply(E).ravel()
                E.ravel()[k] = 0.0
            self._cached_super = S
        return self._cached_super

    def restricted(self, sites) -> "Lindbladian":
        """Generator keeping only the terms supported inside `sites`."""
        keep = set(map(tuple, sites))
        terms = [t for t in self.terms if set(t.support) <= keep]
        return Lindbladian(terms=terms, sigma=self.sigma, kind=self.kind,
                           gns_symmetric=self.gns_symmetric)


def _ce_term(E: ConditionalExpectation, support) -> LocalTerm:
    def heis(x):
        return E.apply(x) - x

    def dual(r):
        return E.apply_dual(r) - r

    return LocalTerm(support=frozenset(support), heis=heis, dual=dual)


def schmidt_generator(A: Region, potential: LocalPotential, Lambda: Region,
                      beta: float | None = None) -> Lindbladian:
    """Schmidt generator: sum over sites k in A of E_k^S - id on Lambda."""
    if beta is None:
        beta = potential.beta
    sigma = gibbs_state(potential, Lambda, beta)
    terms = []
    for site in sorted(map(tuple, A)):
        E = schmidt_ce([site], potential, Lambda, beta)
        terms.append(_ce_term(E, [site]))
    return Lindbladian(terms=terms, sigma=sigma, kind="schmidt", gns_symmetric=True)


def glauber_generator(A: Region, potential: LocalPotential, Lambda: Region,
                      beta: float | None = None) -> Lindbladian:
    """Embedded Glauber generator: sum over sites k in A of E_k^G - id."""
    if beta is None:
        beta = potential.beta
    sigma = gibbs_state(potential, Lambda, beta)
    terms = []
    for site in sorted(map(tuple, A)):
        E = glauber_ce([site], potential, Lambda, beta)
        terms.append(_ce_term(E, [site]))
    return Lindbladian(terms=terms, sigma=sigma, kind="glauber", gns_symmetric=True)


def dephasing_generator(Lambda: Region, local_dim: int = 2) -> Lindbladian:
    """C_Lambda - id with C the computational-basis pinching."""
    sites = tuple(sorted(map(tuple, Lambda)))
    dim = local_dim ** len(sites)
    sigma = QOperator(np.eye(dim, dtype=complex) / dim, sites, local_dim)

    def pinch_minus_id(x):
        return np.diag(np.diag(x)) - x

    term = LocalTerm(frozenset(sites), pinch_minus_id, pinch_minus_id)
    return Lindbladian(terms=[term], sigma=sigma, kind="dephasing",
                       gns_symmetric=True)


def depolarizing_generator(sigma: QOperator) -> Lindbladian:
    """L(X) = Tr[sigma X] 1 - X, whose dual drives every state to sigma."""
    s = sigma.matrix
    dim = s.shape[0]

    def heis(x):
        return np.trace(s @ x) * np.eye(dim) - x

    def dual(r):
        return np.trace(r) * s - r

    term = LocalTerm(frozenset(sigma.sites), heis, dual)
    return Lindbladian(terms=[term], sigma=sigma, kind="depolarizing",
                       gns_symmetric=True)


def to_superoperator(L: Lindbladian) -> np.ndarray:
    """Dense Heisenberg superoperator of the generator (row-major vec)."""
    return L.superoperator()


# ---------------------------------------------------------------------------
# Evolution
# ---------------------------------------------------------------------------


def evolve(L: Lindbladian, rho: QOperator, t: float, method: str = "expm",
           positivity_tol: float = 1e-9) -> QOperator:
    """rho(t) = e^{t L_*}(rho), by dense exponential or adaptive integration."""
    r0 = rho.matrix if isinstance(rho, QOperator) else np.asarray(rho)
    if t == 0:
        out = r0.copy()
    elif method == "expm":
        S = L.superoperator().conj().T  # Schrödinger superoperator
        out = (expm(t * S) @ r0.reshape(-1)).reshape(r0.shape)
    elif method == "integrator":

        def rhs(_, y):
            r = y.reshape(r0.shape)
            return L.apply_dual(r).reshape(-1)

        sol = solve_ivp(rhs, (0.0, t), r0.reshape(-1).astype(complex),
                        method="RK45", rtol=1e-10, atol=1e-12)
        if not sol.success:
            raise RuntimeError(f"integrator failed: {sol.message}")
        out = sol.y[:, -1].reshape(r0.shape)
    else:
        raise ValueError(f"unknown method {method!r}")
    out = (out + out.conj().T) / 2
    w = np.linalg.eigvalsh(out)
    if w.min() < -positivity_tol:
        import warnings

        warnings.warn(f"positivity drift {w.min():.2e}; clipping", stacklevel=2)
        v, u = np.linalg.eigh(out)
        v = np.clip(v, 0, None)
        out = (u * v) @ u.conj().T
        out /= np.trace(out).real
    return QOperator(out, rho.sites, rho.local_dim) if isinstance(rho, QOperator) else out


# ---------------------------------------------------------------------------
# Fixed points and the normal form
# ---------------------------------------------------------------------------


def fixed_point_algebra(L: Lindbladian, tol: float = 1e-9):
    """Block structure of Ker(L) in the Heisenberg picture."""
    S = L.superoperator()
    d = L.dim
    _, s, vh = np.linalg.svd(S)
    null = [vh[k].conj().reshape(d, d) for k in range(len(s)) if s[k] <= tol * max(1.0, s[0])]
    if not null:
        raise ValueError("generator has an empty kernel; no fixed-point algebra")
    return generated_algebra(null, dim=d)


def kernel_dimension(L: Lindbladian, tol: float = 1e-9) -> int:
    s = np.linalg.svd(L.superoperator(), compute_uv=False)
    return int(np.sum(s <= tol * max(1.0, s[0])))


@dataclass
class NormalForm:
    """Detailed-balance normal form: triples (L_j, omega_j, c_j)."""

    lindblad_ops: list  # normalized so Tr[L_j† L_j] / dim = 1
    omegas: np.ndarray
    weights: np.ndarray
    dim: int

    def __iter__(self):
        return iter(zip(self.lindblad_ops, self.omegas, self.weights))

    def reassemble(self) -> np.ndarray:
        """Heisenberg superoperator of the normal form."""
        d = self.dim
        S = np.zeros((d * d, d * d), dtype=complex)
        E = np.zeros((d, d), dtype=complex)
        for k in range(d * d):
            E.ravel()[k] = 1.0
            acc = np.zeros((d, d), dtype=complex)
            for Lj, w, c in zip(self.lindblad_ops, self.omegas, self.weights):
                Ld = Lj.conj().T
                acc += c * (
                    np.exp(-w / 2) * Ld @ (E @ Lj - Lj @ E)
                    + np.exp(w / 2) * (Lj @ E - E @ Lj) @ Ld
                )
            S[:, k] = acc.ravel()
            E.ravel()[k] = 0.0
        return S

    def to_json(self) -> list:
        out = []
        for Lj, w, c in self:
            out.append({
                "omega": float(w),
                "c": float(c),
                "L_re": np.real(Lj).tolist(),
                "L_im": np.imag(Lj).tolist(),
            })
        return out


def gns_symmetry_residual(L: Lindbladian) -> float:
    """Spectral norm of L - L^# with L^#(X) = L_*(X sigma) sigma^{-1}."""
    S = L.superoperator()
    d = L.dim
    s = L.sigma.matrix
    sinv = matrix_power(s, -1.0)
    # row-major vec: vec(X A) = (I ⊗ A^T) vec(X)
    right_mul_sigma = np.kron(np.eye(d), s.T)
    right_mul_inv = np.kron(np.eye(d), sinv.T)
    adj = right_mul_inv @ S.conj().T @ right_mul_sigma
    return float(np.linalg.norm(adj - S, 2))


def _traceless_basis(d: int):
    """Orthonormal basis with F_0 = 1/sqrt(d) and the rest traceless."""
    basis = [np.eye(d, dtype=complex) / np.sqrt(d)]
    for i in range(d):
        for j in range(d):
            if i != j:
                e = np.zeros((d, d), dtype=complex)
                e[i, j] = 1.0
                basis.append(e)
    for k in range(1, d):
        e = np.zeros((d, d), dtype=complex)
        for i in range(k):
            e[i, i] = 1.0
        e[k, k] = -k
        basis.append(e / np.linalg.norm(e))
    return basis


def _chi_matrix(L: Lindbladian, basis):
    """Process matrix chi with L_*(rho) = sum_ab chi_ab F_a rho F_b†."""
    d = L.dim
    Sd = L.superoperator().conj().T  # Schrödinger superoperator, row-major vec
    # reshuffle S[(ik),(jl)] -> R[(ij),(kl)]: R = sum chi_ab vec(F_a) vec(F_b)†
    R = Sd.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)
    U = np.stack([f.ravel() for f in basis], axis=1)
    chi = U.conj().T @ R @ U
    return (chi + chi.conj().T) / 2


def _hermitian_kraus_basis(kraus, tol: float = 1e-8):
    """Rotate an HS-orthonormal Kraus family closed under adjoints (as a span)
    into Hermitian representatives."""
    r = len(kraus)
    V = np.stack([k.ravel() for k in kraus], axis=1)  # (d^2, r)
    # adjoint action in coordinates: vec(K†) = P conj(vec K) with P the
    # transpose permutation; T x̄ expresses it on the family's span
    d = kraus[0].shape[0]
    adj_vecs = np.stack([k.conj().T.ravel() for k in kraus], axis=1)
    T = V.conj().T @ adj_vecs
    if np.max(np.abs(V @ T - adj_vecs)) > tol:
        raise RuntimeError("Kraus family is not adjoint-closed as a span")
    # solve x = T x̄ over the reals
    A = np.block([
        [np.eye(r) - T.real, -T.imag],
        [-T.imag, np.eye(r) + T.real],
    ])
    _, s, vh = np.linalg.svd(A)
    null = [vh[k] for k in range(len(s)) if s[k] <= 1e-9]
    if len(null) != r:
        raise RuntimeError("Hermitian rotation failed (fixed space has wrong size)")
    out = []
    for vec in null:
        x = vec[:r] + 1j * vec[r:]
        K = sum(c * k for c, k in zip(x, kraus))
        K = (K + K.conj().T) / 2
        nrm = np.linalg.norm(K)
        if nrm > 1e-12:
            out.append(K / nrm)
    # re-orthonormalize (real Gram-Schmidt keeps hermiticity)
    done = []
    for K in out:
        for D in done:
            K = K - np.trace(D.conj().T @ K) * D
        nrm = np.linalg.norm(K)
        if nrm > 1e-9:
            done.append(K / nrm)
    if len(done) != r:
        raise RuntimeError("Hermitian rotation lost rank")
    return done


def normal_form(L: Lindbladian, sigma: QOperator | None = None,
                symmetry_tol: float = 1e-8, reassembly_tol: float = 1e-6,
                omega_tol: float = 1e-8) -> NormalForm:
    """Detailed-balance normal form of a GNS-symmetric generator.

    Kraus operators of the CP part are split along modular eigenspaces of
    sigma, orthonormalized per class, adjoint-paired across ±omega, and
    weighted so that the stated two-sided form reassembles the generator.
    """
    if sigma is not None and sigma.sites != L.sigma.sites:
        raise ValueError("sigma must live on the generator's region")
    sig = (sigma or L.sigma).matrix
    d = L.dim
    res = gns_symmetry_residual(L)
    if res > symmetry_tol:
        raise ValueError(f"generator is not GNS-symmetric (residual {res:.2e})")

    basis = _traceless_basis(d)
    chi = _chi_matrix(L, basis)
    A = chi[1:, 1:]
    lam, vecs = np.linalg.eigh(A)
    if lam.min() < -1e-8:
        raise ValueError(f"Kossakowski matrix not PSD (min {lam.min():.2e})")
    jumps = []
    for k in range(len(lam)):
        if lam[k] <= 1e-12:
            continue
        J = sum(vecs[a, k] * basis[a + 1] for a in range(len(basis) - 1))
        jumps.append((lam[k], J))

    # modular data: omega classes from ln-ratios of sigma's spectrum
    w, v = np.linalg.eigh(sig)
    if w.min() < 1e-14:
        raise ValueError("normal form requires a full-rank stationary state")
    logw = np.log(w)
    keymat = np.round((logw[None, :] - logw[:, None]) / omega_tol).astype(int)
    omega_values = {}
    for mm in range(d):
        for nn in range(d):
            omega_values.setdefault(int(keymat[mm, nn]), float(logw[nn] - logw[mm]))

    def split_by_omega(J):
        Jb = v.conj().T @ J @ v
        parts = {}
        for key in omega_values:
            piece = np.where(keymat == key, Jb, 0)
            if np.linalg.norm(piece) > 1e-10:
                parts[key] = v @ piece @ v.conj().T
        return parts

    # accumulate the CP weight matrix per omega class
    class_vecs = {}
    for lam_k, J in jumps:
        for key, piece in split_by_omega(J).items():
            class_vecs.setdefault(key, []).append(np.sqrt(lam_k) * piece)

    ops, omegas, weights = [], [], []
    for key in sorted(class_vecs):
        omega = omega_values[key]
        if omega < -omega_tol:
            continue  # handled as the adjoint of the +omega class
        vs = class_vecs[key]
        G = np.zeros((d * d, d * d), dtype=complex)
        for piece in vs:
            pv = piece.ravel()
            G += np.outer(pv, pv.conj())
        mu, uu = np.linalg.eigh(G)
        kraus = []
        for k in range(len(mu)):
            if mu[k] <= 1e-12:
                continue
            kraus.append((mu[k], uu[:, k].reshape(d, d)))
        if not kraus:
            continue
        if abs(omega) <= omega_tol:
            # Hermitian representatives; weights must be re-read per operator
            mus = [m for m, _ in kraus]
            if len(set(round(m / 1e-9) for m in mus)) == 1:
                herm = _hermitian_kraus_basis([K for _, K in kraus])
                kraus = [(mus[0], K) for K in herm]
            else:
                # rotate within degenerate mu groups only
                new = []
                i = 0
                kraus.sort(key=lambda t: t[0])
                while i < len(kraus):
                    j = i
                    while j < len(kraus) and abs(kraus[j][0] - kraus[i][0]) < 1e-9 * max(1, abs(kraus[i][0])):
                        j += 1
                    group = [K for _, K in kraus[i:j]]
                    for K in _hermitian_kraus_basis(group):
                        new.append((kraus[i][0], K))
                    i = j
                kraus = new
            for m_k, K in kraus:
                ops.append(np.sqrt(d) * K)
                omegas.append(0.0)
                weights.append(m_k / (2 * d))
        else:
            for m_k, K in kraus:
                Lj = np.sqrt(d) * K
                c = m_k * np.exp(omega / 2) / (2 * d)
                ops.append(Lj)
                omegas.append(omega)
                weights.append(c)
                ops.append(Lj.conj().T)
                omegas.append(-omega)
                weights.append(c)

    nf = NormalForm(lindblad_ops=ops, omegas=np.asarray(omegas),
                    weights=np.asarray(weights), dim=d)
    resid = np.linalg.norm(nf.reassemble() - L.superoperator(), 2)
    if resid > reassembly_tol:
        raise RuntimeError(f"normal-form reassembly residual {resid:.2e}")
    return nf
