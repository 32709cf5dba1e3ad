import numpy as np
import pytest

from cgibbs import rng as rngmod
from cgibbs.condexp import schmidt_ce
from cgibbs.hamiltonians import PAULI, ising_family, gibbs_state
from cgibbs.lattice import box, region
from cgibbs.lindblad import (
    dephasing_generator,
    depolarizing_generator,
    evolve,
    fixed_point_algebra,
    glauber_generator,
    gns_symmetry_residual,
    kernel_dimension,
    normal_form,
    schmidt_generator,
)
from cgibbs.linalg import modular_apply, qop

Z = PAULI["Z"]


def chain(n):
    return box((0,), (n - 1,))


def test_single_site_generator_is_ce_minus_id():
    P = ising_family(1, 1, 0.0, 0.5, beta=0.7)
    L = schmidt_generator(chain(1), P, chain(1), beta=0.7)
    S = L.superoperator()
    # spectrum of E - id is {0, -1}
    ev = np.linalg.eigvals(S)
    assert np.all((np.abs(ev) < 1e-10) | (np.abs(ev + 1) < 1e-10))


def test_schmidt_generator_fixed_point_and_kernel():
    P = ising_family(1, 3, 1.0, 0.0, beta=0.8)
    lam = chain(3)
    L = schmidt_generator(lam, P, lam, beta=0.8)
    sig = gibbs_state(P, lam, 0.8)
    assert np.max(np.abs(L.apply_dual(sig.matrix))) < 1e-10
    assert np.max(np.abs(L.apply(np.eye(8)))) < 1e-12  # unital
    # kernel of L_A equals the fixed-point algebra of E_A^S (Lemma 2.5)
    for A in ([(0,)], [(1,)], [(0,), (1,)], [(0,), (1,), (2,)]):
        LA = schmidt_generator(region(A), P, lam, beta=0.8)
        EA = schmidt_ce(region(A), P, lam, beta=0.8)
        assert kernel_dimension(LA) == EA.fixed_point_dimension()


def test_glauber_generator_fixed_point():
    P = ising_family(1, 3, 1.0, 0.4, beta=0.5)
    lam = chain(3)
    L = glauber_generator(lam, P, lam, beta=0.5)
    sig = gibbs_state(P, lam, 0.5)
    assert np.max(np.abs(L.apply_dual(sig.matrix))) < 1e-10
    assert kernel_dimension(L) == 1  # primitive on the full region? no: kernel = span{1}
    assert np.max(np.abs(L.apply(np.eye(8)))) < 1e-12


def test_dephasing_and_depolarizing():
    Ld = dephasing_generator(chain(2))
    diag = np.diag(rngmod.stream(1, "dep").uniform(size=4)).astype(complex)
    diag /= np.trace(diag)
    assert np.max(np.abs(Ld.apply_dual(diag))) < 1e-14
    sig = qop(np.diag([0.6, 0.4]).astype(complex), [(0,)])
    Lp = depolarizing_generator(sig)
    rho = rngmod.random_density(rngmod.stream(2, "dep"), 2)
    assert np.max(np.abs(Lp.apply_dual(rho) - (sig.matrix - rho))) < 1e-13
    for L in (Ld, Lp):
        ev = np.linalg.eigvals(L.superoperator())
        assert np.all((np.abs(ev) < 1e-10) | (np.abs(ev + 1) < 1e-10))


def test_heisenberg_schroedinger_duality():
    P = ising_family(1, 3, 1.0, 0.2, beta=0.6)
    L = glauber_generator(chain(3), P, chain(3), beta=0.6)
    rng = rngmod.stream(3, "dual")
    for _ in range(5):
        x = rngmod.random_hermitian(rng, 8)
        rho = rngmod.random_density(rng, 8)
        lhs = np.trace(L.apply(x).conj().T @ rho)
        rhs = np.trace(x.conj().T @ L.apply_dual(rho))
        assert abs(lhs - rhs) < 1e-12


def test_term_locality():
    # kappa-local uniform family: every term supported in a (kappa-1)-ball
    P = ising_family(1, 4, 1.0, 0.1, beta=0.5)
    L = schmidt_generator(chain(4), P, chain(4), beta=0.5)
    for term in L.terms:
        (site,) = term.support
        ball = {s for s in chain(4) if abs(s[0] - site[0]) <= P.kappa - 1}
        # the term acts trivially outside the ball: E_k leaves B(outside) fixed
        x = rngmod.random_hermitian(rngmod.stream(4, "loc"), 16)
        from cgibbs.linalg import embed

        outside = sorted(set(chain(4)) - ball)
        if outside:
            y = embed(qop(rngmod.random_hermitian(rngmod.stream(5, "loc"), 2 ** len(outside)), outside), sorted(chain(4)))
            assert np.max(np.abs(term.heis(y.matrix))) < 1e-10


def test_evolve_basics():
    P = ising_family(1, 2, 1.0, 0.0, beta=0.7)
    lam = chain(2)
    L = schmidt_generator(lam, P, lam, beta=0.7)
    rho = qop(rngmod.random_density(rngmod.stream(6, "ev"), 4), sorted(lam))
    assert np.allclose(evolve(L, rho, 0.0).matrix, rho.matrix)
    sig = gibbs_state(P, lam, 0.7)
    out = evolve(L, sig, 1.7)
    assert np.max(np.abs(out.matrix - sig.matrix)) < 1e-12
    # semigroup property
    a = evolve(L, evolve(L, rho, 0.4), 0.6)
    b = evolve(L, rho, 1.0)
    assert np.max(np.abs(a.matrix - b.matrix)) < 1e-8
    # trace preserved
    assert abs(np.trace(b.matrix) - 1) < 1e-12


def test_evolve_expm_vs_integrator():
    P = ising_family(1, 3, 1.0, 0.3, beta=0.4)
    lam = chain(3)
    L = glauber_generator(lam, P, lam, beta=0.4)
    rho = qop(rngmod.random_density(rngmod.stream(7, "ev3"), 8), sorted(lam))
    a = evolve(L, rho, 0.9, method="expm")
    b = evolve(L, rho, 0.9, method="integrator")
    assert np.max(np.abs(a.matrix - b.matrix)) < 1e-8


def test_fixed_point_algebras():
    sig = qop(np.eye(2) / 2, [(0,)])
    triv = fixed_point_algebra(depolarizing_generator(sig))
    assert triv.algebra_dimension() == 1
    diag = fixed_point_algebra(dephasing_generator(chain(1)))
    assert diag.algebra_dimension() == 2
    P = ising_family(1, 3, 1.0, 0.0, beta=0.8)
    LA = schmidt_generator(region([(1,)]), P, chain(3), beta=0.8)
    EA = schmidt_ce(region([(1,)]), P, chain(3), beta=0.8)
    assert fixed_point_algebra(LA).algebra_dimension() == EA.fixed_point_dimension()


def test_normal_form_dephasing_qubit():
    nf = normal_form(dephasing_generator(chain(1)))
    assert len(nf.lindblad_ops) == 1
    L0, w0, c0 = next(iter(nf))
    assert abs(w0) < 1e-12 and abs(c0 - 0.25) < 1e-12
    # L~ = ±Z
    assert min(np.max(np.abs(L0 - Z)), np.max(np.abs(L0 + Z))) < 1e-10


def test_normal_form_properties_glauber():
    P = ising_family(1, 2, 1.0, 0.3, beta=0.6)
    lam = chain(2)
    L = glauber_generator(lam, P, lam, beta=0.6)
    nf = normal_form(L)
    d = 4
    sig = L.sigma.matrix
    ops = nf.lindblad_ops
    # set closed under adjoints
    for A in ops:
        assert any(np.max(np.abs(A.conj().T - B)) < 1e-8 for B in ops)
    # modular eigenvectors, traceless, orthonormal
    gram = np.array([[np.trace(a.conj().T @ b) / d for b in ops] for a in ops])
    assert np.max(np.abs(gram - np.eye(len(ops)))) < 1e-9
    for A, w, c in nf:
        assert c > 0
        assert abs(np.trace(A)) < 1e-9
        assert np.max(np.abs(modular_apply(sig, A, 1) - np.exp(-w) * A)) < 1e-7
    # reassembly
    assert np.linalg.norm(nf.reassemble() - L.superoperator(), 2) < 1e-8


def test_normal_form_random_ce_mixtures():
    P = ising_family(1, 3, 0.8, 0.2, beta=0.5)
    lam = chain(3)
    rng = rngmod.stream(8, "nfmix")
    L = glauber_generator(lam, P, lam, beta=0.5)
    # random positive combination of the site terms stays GNS-symmetric
    from cgibbs.lindblad import Lindbladian, LocalTerm

    weights = rng.uniform(0.5, 2.0, size=len(L.terms))
    terms = [
        LocalTerm(t.support, lambda x, t=t, w=w: w * t.heis(x), lambda r, t=t, w=w: w * t.dual(r))
        for t, w in zip(L.terms, weights)
    ]
    Lw = Lindbladian(terms=terms, sigma=L.sigma, kind="glauber", gns_symmetric=True)
    nf = normal_form(Lw)
    assert np.linalg.norm(nf.reassemble() - Lw.superoperator(), 2) < 1e-8


def test_normal_form_rejects_asymmetric():
    # a unitary kick is not GNS-symmetric
    from cgibbs.lindblad import Lindbladian, LocalTerm

    H = rngmod.random_hermitian(rngmod.stream(9, "asym"), 2)
    sig = qop(np.eye(2) / 2, [(0,)])

    def heis(x):
        return 1j * (H @ x - x @ H)

    L = Lindbladian(terms=[LocalTerm(frozenset({(0,)}), heis, None)], sigma=sig)
    assert gns_symmetry_residual(L) > 1e-3
    with pytest.raises(ValueError):
        normal_form(L)


def test_dense_budget_directs_to_matrix_free():
    # dense superoperator refuses beyond the site budget; the integrator
    # path stays matrix-free through the closed-form CE duals
    P = ising_family(1, 7, 1.0, 0.0, beta=0.4)
    lam = chain(7)
    L = schmidt_generator(lam, P, lam, beta=0.4)
    with pytest.raises(MemoryError, match="matrix-free"):
        L.superoperator()
    rho = qop(rngmod.random_density(rngmod.stream(10, "mf"), 2**7), sorted(lam))
    out = evolve(L, rho, 0.15, method="integrator")
    assert abs(np.trace(out.matrix) - 1) < 1e-9
    sig = gibbs_state(P, lam, 0.4)
    fixed = evolve(L, sig, 0.3, method="integrator")
    assert np.max(np.abs(fixed.matrix - sig.matrix)) < 1e-8
