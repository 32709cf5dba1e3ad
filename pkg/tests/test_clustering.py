import math

import numpy as np
import pytest

from cgibbs.clustering import (
    covariance_decay_profile,
    clustering_report,
    fit_decay,
    l1_to_linf_grid_oracle,
    l1_to_linf_norm,
    qIIId_gap,
    qIIId_profile,
)
from cgibbs.condexp import restricted_blocks, schmidt_ce
from cgibbs.hamiltonians import PAULI, LocalPotential, gibbs_state, ising_family
from cgibbs.lattice import box, region
from cgibbs.linalg import covariance, embed, qop, weighted_lp_norm

Z = PAULI["Z"]


def chain(n):
    return box((0,), (n - 1,))


def _zz_pairs(n):
    return [(qop(Z, [(0,)]), qop(Z, [(d,)])) for d in range(1, n)]


def test_ising_profile_matches_exact_law():
    # nearest-neighbour Ising: <Z_0 Z_d> - <Z_0><Z_d> = tanh(beta)^d exactly
    beta = 0.3
    P = ising_family(1, 8, 1.0, 0.0, beta=beta)
    sig = gibbs_state(P, chain(8), beta)
    fit = covariance_decay_profile(sig, _zz_pairs(8), "qlinf")
    assert fit.r2 >= 0.99
    assert abs(fit.xi - (-1.0 / math.log(math.tanh(beta)))) < 1e-9
    for d, v in fit.samples:
        assert abs(v - math.tanh(beta) ** d / 8) < 1e-12


def test_profile_flags_product_state():
    P = ising_family(1, 8, 1.0, 0.0, beta=0.0)
    sig = gibbs_state(P, chain(8), 0.0)
    fit = covariance_decay_profile(sig, _zz_pairs(8), "qlinf")
    assert fit.flag == "no correlation"
    assert all(v <= 1e-12 for _, v in fit.samples)


def test_profile_identity_observable():
    P = ising_family(1, 8, 1.0, 0.0, beta=0.3)
    sig = gibbs_state(P, chain(8), 0.3)
    pairs = [(qop(np.eye(2), [(0,)]), qop(Z, [(d,)])) for d in range(1, 8)]
    fit = covariance_decay_profile(sig, pairs, "qlinf")
    assert all(v <= 1e-12 for _, v in fit.samples)


def test_profile_needs_three_distances():
    P = ising_family(1, 4, 1.0, 0.0, beta=0.3)
    sig = gibbs_state(P, chain(4), 0.3)
    with pytest.raises(ValueError):
        covariance_decay_profile(sig, _zz_pairs(3), "qlinf")


def test_cauchy_schwarz_and_norm_ordering():
    P = ising_family(1, 6, 1.0, 0.2, beta=0.4)
    sig = gibbs_state(P, chain(6), 0.4)
    s = sig.matrix
    for d in range(1, 6):
        x = embed(qop(Z, [(0,)]), sig.sites).matrix
        y = embed(qop(Z, [(d,)]), sig.sites).matrix
        cov = abs(covariance(s, x, y, "KMS"))
        assert cov <= weighted_lp_norm(x, s, 2) * weighted_lp_norm(y, s, 2) + 1e-10
    rep = clustering_report(P, chain(6), _zz_pairs(6), beta=0.4)
    assert rep["commuting"] and rep["linf_le_l2"]


def test_qIIId_gap_cases():
    P = ising_family(1, 6, 1.0, 0.0, beta=0.3)
    lam = chain(6)
    NA = qop(np.diag([1.0, 0.0]).astype(complex), [(0,)])
    PB = qop(np.diag([1.0, 0.0]).astype(complex), [(4,)])
    one = qop(np.eye(2), [(4,)])
    lhs, rhs = qIIId_gap(P, lam, NA, PB, PB, beta=0.3)
    assert lhs == 0.0
    lhs1, _ = qIIId_gap(P, lam, qop(np.eye(2), [(0,)]), PB, one, beta=0.3)
    assert lhs1 < 1e-12
    # sweep of projector placements decays exponentially
    tests = [(qop(np.diag([1.0, 0.0]).astype(complex), [(d,)]), qop(np.eye(2), [(d,)]))
             for d in range(2, 6)]
    fit = qIIId_profile(P, lam, NA, tests, beta=0.3)
    assert fit.r2 is None or fit.r2 > 0.98
    # both normalizations are available
    a = qIIId_gap(P, lam, NA, PB, one, beta=0.3, normalize_N=False)
    b = qIIId_gap(P, lam, NA, PB, one, beta=0.3, normalize_N=True)
    assert a[0] >= 0 and b[0] >= 0


def test_qIIId_rejects_bad_inputs():
    P = ising_family(1, 4, 1.0, 0.0, beta=0.3)
    lam = chain(4)
    neg = qop(-np.eye(2), [(0,)])
    PB = qop(np.diag([1.0, 0.0]).astype(complex), [(3,)])
    with pytest.raises(ValueError):
        qIIId_gap(P, lam, neg, PB, PB, beta=0.3)
    zero = qop(np.zeros((2, 2)), [(3,)])
    with pytest.raises(ValueError):
        qIIId_gap(P, lam, qop(np.eye(2), [(0,)]), zero, zero, beta=0.3)


def test_l1_linf_zero_cases():
    P = ising_family(1, 4, 1.0, 0.0, beta=0.7)
    lam = chain(4)
    E = schmidt_ce(region([(1,), (2,)]), P, lam, beta=0.7)
    assert l1_to_linf_norm(E, E, E) < 1e-12  # E∘E - E = 0


def test_l1_linf_matches_grid_oracle():
    P = ising_family(1, 4, 1.0, 0.0, beta=0.7)
    lam = chain(4)
    E_C = schmidt_ce(region([(1,)]), P, lam, beta=0.7)
    E_D = schmidt_ce(region([(2,)]), P, lam, beta=0.7)
    E_CD = schmidt_ce(region([(1,), (2,)]), P, lam, beta=0.7)
    val = l1_to_linf_norm(E_C, E_D, E_CD)
    subs = zip(
        E_CD.blocks.blocks,
        restricted_blocks(E_C, E_CD),
        restricted_blocks(E_D, E_CD),
        restricted_blocks(E_CD, E_CD),
    )
    oracle = max(
        l1_to_linf_grid_oracle(sc @ sd - su, blk.tau, refine=3000)
        for blk, sc, sd, su in subs
    )
    assert abs(val - oracle) < 1e-4


def test_fit_decay_exact_exponential():
    samples = [(d, 0.8 * math.exp(-d / 2.5)) for d in range(1, 7)]
    fit = fit_decay(samples)
    assert abs(fit.prefactor - 0.8) < 1e-9
    assert abs(fit.xi - 2.5) < 1e-9
    assert fit.r2 > 1 - 1e-12
    blob = fit.to_json()
    assert blob["xi"] == fit.xi
    assert "distance,value" in fit.to_csv()


def test_clustering_report_noncommuting_flag():
    X = PAULI["X"]
    terms = {((0,), (1,)): np.kron(Z, Z), ((1,), (2,)): np.kron(X, X),
             ((2,), (3,)): np.kron(Z, Z), ((3,), (4,)): np.kron(Z, Z)}
    P = LocalPotential(terms=terms, kappa=2, beta=0.2)
    rep = clustering_report(P, chain(5), [(qop(Z, [(0,)]), qop(Z, [(d,)])) for d in (2, 3, 4)], beta=0.2)
    assert not rep["commuting"]
    assert "Lambda" in rep["note"]
