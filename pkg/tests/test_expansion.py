import math

import numpy as np
import pytest

from cgibbs import rng as rngmod
from cgibbs.expansion import (
    analyticity_bound_check,
    beta_c,
    cluster_identity_check,
    cluster_weight,
    connected_sets,
    count_by_size,
    log_ratio_check,
    partition_value,
)
from cgibbs.hamiltonians import LocalPotential, PAULI, growth_constant, ising_family
from cgibbs.lattice import box
from cgibbs.linalg import qop

Z = PAULI["Z"]


def chain(n):
    return box((0,), (n - 1,))


def test_connected_sets_chain_example():
    P = ising_family(1, 5, 1.0, 0.0, beta=0.3)
    sets = connected_sets((2,), P, 2)
    assert len(sets) == 5
    sups = {c.supports for c in sets}
    e = lambda i: ((i,), (i + 1,))
    assert sups == {
        (e(1),), (e(2),),
        tuple(sorted((e(0), e(1)))), tuple(sorted((e(1), e(2)))),
        tuple(sorted((e(2), e(3)))),
    }
    counts = count_by_size(sets)
    g = growth_constant(P)
    assert counts[1] == 2 <= g
    assert counts[2] == 3 <= g**2


def test_connected_sets_empty_potential():
    P = LocalPotential(terms={}, kappa=2)
    assert connected_sets((0,), P, 3) == []


def test_count_bound_chain_and_patch():
    for P, anchor in [
        (ising_family(1, 6, 1.0, 0.0, beta=0.3), (2,)),
        (ising_family(1, 6, 1.0, 0.1, beta=0.3), (2,)),
        (ising_family(2, 3, 1.0, 0.0, beta=0.3), (1, 1)),
        (ising_family(2, 3, 1.0, 0.2, beta=0.3), (1, 1)),
    ]:
        g = growth_constant(P)
        counts = count_by_size(connected_sets(anchor, P, 4))
        for size, count in counts.items():
            assert count <= g**size, (size, count, g)


def test_cluster_weight_single_edge():
    P = ising_family(1, 2, 1.0, 0.0, beta=0.3)
    cs = connected_sets((0,), P, 1)[0]
    for z in (0.0, 0.41, 1.1):
        w = cluster_weight(cs, P, z)
        assert abs(w - 4 * (math.cosh(z) - 1)) < 1e-12
    assert abs(cluster_weight(cs, P, 0.0)) == 0.0


def test_cluster_weight_truncated_matches_closed():
    P = ising_family(1, 3, 1.0, 0.0, beta=0.3)
    pair = [c for c in connected_sets((1,), P, 2) if c.size == 2][0]
    wc = cluster_weight(pair, P, 0.3, "closed_form")
    wt = cluster_weight(pair, P, 0.3, "truncated", p_max=20)
    assert abs(wc - wt) < 1e-10
    # truncation converges geometrically in p_max below the convergence point
    errs = [abs(cluster_weight(pair, P, 0.3, "truncated", p_max=p) - wc) for p in (4, 6, 8, 10)]
    assert all(errs[i + 1] < errs[i] * 0.5 for i in range(len(errs) - 1) if errs[i] > 1e-15)


def test_cluster_weight_noncommuting_rejected():
    X = PAULI["X"]
    terms = {((0,), (1,)): np.kron(Z, Z), ((1,), (2,)): np.kron(X, X)}
    P = LocalPotential(terms=terms, kappa=2)
    cs = connected_sets((1,), P, 2)
    big = [c for c in cs if c.size == 2][0]
    with pytest.raises(ValueError):
        cluster_weight(big, P, 0.3, "closed_form")


def test_identity_2site_hand_expansion():
    # Tr e^{-z Phi} = 4 + (T - 4) exactly
    P = ising_family(1, 2, 1.0, 0.0, beta=0.3)
    rep = cluster_identity_check(P, chain(2), (0,), 0.37)
    assert rep["residual"] <= 1e-12
    assert rep["n_clusters"] == 1


def test_identity_chains():
    for n in (3, 4):
        P = ising_family(1, n, 1.0, 0.0, beta=0.3)
        rep = cluster_identity_check(P, chain(n), (0,), 0.3)
        assert rep["residual"] <= 1e-10


def test_identity_z_zero():
    P = ising_family(1, 3, 1.0, 0.0, beta=0.3)
    rep = cluster_identity_check(P, chain(3), (0,), 0.0)
    assert rep["residual"] <= 1e-14


def test_identity_with_local_N():
    P = ising_family(1, 4, 1.0, 0.0, beta=0.3)
    rng = rngmod.stream(3, "exp-N")
    m = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    N = qop(m @ m.conj().T, [(3,)])
    rep = cluster_identity_check(P, chain(4), (0,), 0.3, N)
    assert rep["residual"] <= 1e-10


def test_identity_N_inside_ball_rejected():
    P = ising_family(1, 4, 1.0, 0.0, beta=0.3)
    N = qop(np.eye(2) / 2, [(1,)])
    with pytest.raises(ValueError):
        cluster_identity_check(P, chain(4), (0,), 0.3, N)


def test_beta_c():
    val = beta_c(2, 1.0, 2, 0.001)
    assert abs(val - (1 / (20 * math.e) - 0.001)) < 1e-12
    assert abs(val - 0.017394) < 5e-7
    with pytest.raises(ValueError):
        beta_c(2, 1.0, 2, 1 / (20 * math.e))
    assert beta_c(3, 1.0, 2, 0.0) < beta_c(2, 1.0, 2, 0.0)
    assert beta_c(2, 2.0, 2, 0.0) < beta_c(2, 1.0, 2, 0.0)
    assert beta_c(2, 1.0, 3, 0.0) < beta_c(2, 1.0, 2, 0.0)


def test_analyticity_bound_four_site_chain():
    P = ising_family(1, 4, 1.0, 0.0, beta=0.0)
    g, h = growth_constant(P), P.strength
    delta = 0.004
    bc = beta_c(g, h, P.kappa, delta)
    beta = bc / 2
    rep = analyticity_bound_check(P, chain(4), beta, delta, n_samples=40)
    assert rep["margin"] >= 0
    # real z recovers |ln Tr[e^{-beta H} N]| <= bound
    real_val = abs(math.log(abs(partition_value(P, chain(4), chain(4), beta))))
    assert real_val <= rep["bound"]
    # with a nontrivial N >= 0, ||N|| = 1
    N = qop(np.diag([1.0, 0.3]).astype(complex), [(3,)])
    rep2 = analyticity_bound_check(P, chain(4), beta, delta, N=N, n_samples=40)
    assert rep2["margin"] >= 0


def test_log_ratio_bound():
    P = ising_family(1, 4, 1.0, 0.0, beta=0.0)
    g, h = growth_constant(P), P.strength
    delta = 0.004
    beta = beta_c(g, h, P.kappa, delta) / 2
    rep = log_ratio_check(P, chain(4), (0,), beta, delta, n_samples=40)
    assert rep["margin"] >= 0
    # beta = 0 with all-real z = 0 -> normalized ratio 1, ln = 0
    P0 = ising_family(1, 3, 1.0, 0.0, beta=0.0)
    num = partition_value(P0, chain(3), chain(3), 0.0)
    den = partition_value(P0, chain(3), set(chain(3)) - {(0,)}, 0.0)
    assert abs(math.log(abs(num / den))) < 1e-14
