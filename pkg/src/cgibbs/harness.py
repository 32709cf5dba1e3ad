"""Experiment orchestration: config parsing, deterministic runs, records.

A config is a JSON tree with a model block, a seed, and a list of
experiment entries, each naming one check and its parameters.  Every run
is reproducible: all randomness is drawn from counter-based streams keyed
by (seed, experiment id, sample index), records are serialized with sorted
keys, and provenance carries a content hash of the package sources.
"""

from __future__ import annotations

import hashlib
import json
import math
import pathlib
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .hamiltonians import (LocalPotential, PAULI, coarse_grain_chain, gibbs_state,
                           growth_constant, ising_family, verify_commuting)
from .lattice import box, build_tiling, closure, grained_set, region
from .linalg import qop, relative_entropy

__all__ = ["ExperimentConfig", "Record", "load_config", "run", "emit", "CHECKS"]


_MODEL_KEYS = {"kind", "dimension", "size", "coupling", "field", "beta", "terms", "kappa", "coarse_grain"}
_TOP_KEYS = {"seed", "output", "model", "experiments"}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    seed: int
    model: dict
    experiments: list
    output: str | None = None

    def potential(self) -> LocalPotential:
        return _build_potential(self.model)

    def region(self):
        m = self.model
        block = m.get("coarse_grain")
        if m.get("dimension", 1) == 1:
            size = m["size"] // block if block else m["size"]
            return box((0,), (size - 1,))
        return box((0, 0), (m["size"] - 1, m["size"] - 1))


@dataclass
class Record:
    experiment_id: str
    params: dict
    metrics: dict
    provenance: dict
    passed: bool

    def to_json(self) -> dict:
        return {
            "experiment_id": self.experiment_id,
            "params": self.params,
            "metrics": self.metrics,
            "provenance": self.provenance,
            "passed": self.passed,
        }


def _build_potential(model: dict) -> LocalPotential:
    kind = model.get("kind", "ising")
    block = model.get("coarse_grain")
    if kind == "ising":
        P = ising_family(model.get("dimension", 1), model["size"],
                         model.get("coupling", 1.0), model.get("field", 0.0),
                         model.get("beta", 1.0))
        return coarse_grain_chain(P, block) if block else P
    if kind == "custom":
        terms = {}
        for entry in model["terms"]:
            sup = tuple(tuple(s) for s in entry["support"])
            mats = [PAULI[p] for p in entry["paulis"]]
            m = mats[0]
            for extra in mats[1:]:
                m = np.kron(m, extra)
            terms[sup] = entry.get("coefficient", 1.0) * m
        P = LocalPotential(terms=terms, kappa=model.get("kappa", 2),
                           beta=model.get("beta", 1.0))
        return coarse_grain_chain(P, block) if block else P
    raise ConfigError(f"unknown model kind {kind!r}")


def load_config(path_or_dict) -> ExperimentConfig:
    if isinstance(path_or_dict, (str, pathlib.Path)):
        with open(path_or_dict) as fh:
            data = json.load(fh)
    else:
        data = path_or_dict
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    model = data.get("model", {})
    bad = set(model) - _MODEL_KEYS
    if bad:
        raise ConfigError(f"unknown model keys: {sorted(bad)}")
    experiments = data.get("experiments", [])
    for e in experiments:
        if "check" not in e:
            raise ConfigError(f"experiment entry without a check: {e}")
        if e["check"] not in CHECKS:
            raise ConfigError(f"unknown check {e['check']!r}; known: {sorted(CHECKS)}")
    return ExperimentConfig(seed=int(data.get("seed", 0)), model=model,
                            experiments=experiments, output=data.get("output"))


def build_hash() -> str:
    """Content hash of the package sources."""
    pkg_dir = pathlib.Path(__file__).parent
    h = hashlib.sha1()
    for p in sorted(pkg_dir.glob("*.py")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()[:12]


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------


def _check_lattice(cfg, params, seed):
    d = params.get("dimension", cfg.model.get("dimension", 1))
    D = params.get("pixel_side", 3)
    kappa = params.get("kappa", 2)
    size = params.get("window", 12)
    window = box((0,) * d, (size - 1,) * d)
    t = build_tiling(d, D, kappa, window)
    covered = set()
    for p in t.pixels:
        covered |= closure(p, kappa)
    g = grained_set([0], t)
    metrics = {
        "n_pixels": len(t.anchors),
        "window_covered": set(window) <= covered,
        "single_pixel_grained_ok": g.region == t.pixel(0),
    }
    return metrics, bool(metrics["window_covered"] and metrics["single_pixel_grained_ok"])


def _check_gibbs(cfg, params, seed):
    P = cfg.potential()
    lam = cfg.region()
    ok, worst = verify_commuting(P)
    sig = gibbs_state(P, lam)
    w = np.linalg.eigvalsh(sig.matrix)
    g, h = growth_constant(P), P.strength
    lower = math.exp(-2 * P.beta * g * h * len(lam)) / P.local_dim ** len(lam) if g else 0.0
    metrics = {
        "commuting": ok,
        "max_commutator": worst,
        "min_eigenvalue": float(w.min()),
        "rank_lower_bound_ok": bool(w.min() >= lower - 1e-15),
        "trace_error": float(abs(w.sum() - 1)),
    }
    return metrics, bool(ok and metrics["rank_lower_bound_ok"] and metrics["trace_error"] < 1e-10)


def _check_ce(cfg, params, seed):
    from .condexp import glauber_ce, schmidt_ce, verify_ce_axioms

    P = cfg.potential()
    lam = cfg.region()
    kind = params.get("kind", "schmidt")
    sites = sorted(lam)
    A = region([tuple(s) for s in params.get("region", [list(sites[len(sites) // 2])])])
    E = (schmidt_ce if kind == "schmidt" else glauber_ce)(A, P, lam)
    rep = verify_ce_axioms(E, n_samples=params.get("n_samples", 30), seed=seed % 2**31)
    tol = params.get("tolerance", 1e-10)
    return rep, bool(rep["max_residual"] <= tol)


def _check_gap(cfg, params, seed):
    from .functionals import cmlsi_bound, spectral_gap
    from .lindblad import schmidt_generator

    P = cfg.potential()
    lam = cfg.region()
    sites = sorted(lam)
    A = region([tuple(s) for s in params.get("region", [list(sites[0])])])
    L = schmidt_generator(A, P, lam)
    gap = spectral_gap(L)
    sig = L.sigma.matrix
    metrics = {
        "gap": gap,
        "gap_is_one": bool(abs(gap - 1.0) <= 1e-10) if len(A) == 1 else None,
        "cmlsi_lower_bound": cmlsi_bound(gap, sig, sig.shape[0]),
    }
    ok = metrics["gap_is_one"] if metrics["gap_is_one"] is not None else gap > 0
    return metrics, bool(ok)


def _check_mlsi(cfg, params, seed):
    from .functionals import SamplerConfig, decay_check, mlsi_witness
    from .lindblad import dephasing_generator, depolarizing_generator, glauber_generator

    scfg = SamplerConfig(n_samples=params.get("n_samples", 128),
                         n_descents=params.get("n_descents", 8),
                         descent_steps=params.get("descent_steps", 25),
                         seed=seed, label="mlsi")
    kind = params.get("generator", "model")
    if kind == "depolarizing":
        L = depolarizing_generator(qop(np.eye(2) / 2, [(0,)]))
        floor = 0.5
    elif kind == "dephasing":
        L = dephasing_generator(box((0,), (0,)))
        floor = 0.25
    else:
        P = cfg.potential()
        lam = cfg.region()
        L = glauber_generator(lam, P, lam)
        floor = 0.0
    w = mlsi_witness(L, config=scfg)
    metrics = {"witness": w.quantity, "samples": w.sample_count, "floor": floor}
    ok = w.quantity >= floor - 1e-6
    if params.get("decay_check", False):
        rng = rngmod.stream(seed, "mlsi-decay")
        worst = -math.inf
        for _ in range(params.get("decay_states", 20)):
            rho = qop(rngmod.random_density(rng, L.dim), L.sigma.sites)
            rep = decay_check(L, rho, floor if floor else w.quantity,
                              np.linspace(0, 2, 6))
            worst = max(worst, rep["max_violation"])
        metrics["decay_max_violation"] = worst
        ok = ok and worst <= 1e-10
    return metrics, bool(ok)


def _check_clustering(cfg, params, seed):
    from .clustering import covariance_decay_profile

    P = cfg.potential()
    lam = cfg.region()
    sig = gibbs_state(P, lam)
    sites = sorted(lam)
    Z = PAULI["Z"]
    pairs = [(qop(Z, [sites[0]]), qop(Z, [s])) for s in sites[1:]]
    metrics = {}
    ok = True
    for kind in ("qlinf", "ql2", "ql20"):
        fit = covariance_decay_profile(sig, pairs, kind)
        metrics[kind] = fit.to_json()
        if fit.flag != "no correlation":
            ok = ok and (fit.r2 or 0.0) >= params.get("r2_floor", 0.99)
    return metrics, bool(ok)


def _check_tensorization(cfg, params, seed):
    from .clustering import covariance_decay_profile
    from .condexp import schmidt_ce
    from .functionals import approximate_tensorization_check
    from .lattice import dist as region_dist

    P = cfg.potential()
    lam = cfg.region()
    sites = sorted(lam)
    n = len(sites)
    if n < 6:
        raise ConfigError("tensorization check needs at least 6 sites")
    sig = gibbs_state(P, lam)
    Z = PAULI["Z"]
    pairs = [(qop(Z, [sites[0]]), qop(Z, [s])) for s in sites[1:]]
    fit = covariance_decay_profile(sig, pairs, "qlinf")
    c = fit.prefactor if fit.prefactor is not None else 0.0
    xi = fit.xi if fit.xi not in (None, math.inf) else 1.0
    C = region(sites[:3])
    D = region(sites[4:7]) if n >= 7 else region(sites[4:])
    E_C = schmidt_ce(C, P, lam)
    E_D = schmidt_ce(D, P, lam)
    E_CD = schmidt_ce(C | D, P, lam)
    E_tiling = E_CD
    rng = rngmod.stream(seed, "tensorization")
    worst = math.inf
    for _ in range(params.get("n_states", 10)):
        rho = rngmod.random_density(rng, 2**n)
        omega = E_tiling.apply_dual(rho)
        rep = approximate_tensorization_check(omega, E_C, E_D, E_CD, c, xi,
                                              region_dist(C, D))
        worst = min(worst, rep["margin"])
    metrics = {"worst_margin": worst, "c": c, "xi": xi}
    return metrics, bool(worst >= -1e-9)


def _check_expansion(cfg, params, seed):
    from .expansion import (analyticity_bound_check, beta_c, cluster_identity_check,
                            connected_sets, count_by_size, log_ratio_check)

    P = cfg.potential()
    lam = cfg.region()
    sites = sorted(lam)
    x0 = sites[0]
    g, h = growth_constant(P), P.strength
    delta = params.get("delta", 0.004)
    bc = beta_c(g, h, P.kappa, delta)
    beta = params.get("beta", bc / 2)
    counts = count_by_size(connected_sets(x0, P, params.get("max_size", 4)))
    count_ok = all(v <= g**k for k, v in counts.items())
    ident = cluster_identity_check(P, lam, x0, beta)
    ana = analyticity_bound_check(P, lam, beta, delta,
                                  n_samples=params.get("n_samples", 40), seed=seed)
    ratio = log_ratio_check(P, lam, x0, beta, delta,
                            n_samples=params.get("n_samples", 40), seed=seed)
    metrics = {
        "beta_c": bc,
        "counts": {str(k): v for k, v in counts.items()},
        "count_bound_ok": count_ok,
        "identity_residual": ident["residual"],
        "analyticity_margin": ana["margin"],
        "log_ratio_margin": ratio["margin"],
    }
    ok = (count_ok and ident["residual"] <= 1e-10 and ana["margin"] >= 0
          and ratio["margin"] >= 0)
    return metrics, bool(ok)


def _check_anneal(cfg, params, seed):
    from .applications import AnnealSchedule, annealer_evolve, relent_decay_bound
    from .functionals import SamplerConfig, mlsi_witness
    from .hamiltonians import hamiltonian
    from .lindblad import glauber_generator

    P = cfg.potential()
    lam = cfg.region()
    L = glauber_generator(lam, P, lam)
    scfg = SamplerConfig(n_samples=params.get("n_samples", 96), n_descents=6,
                         descent_steps=20, seed=seed, label="anneal")
    alpha = mlsi_witness(L, config=scfg).quantity
    T = params.get("T", 20.0)
    r = params.get("noise_rate", 1.0)
    H1 = hamiltonian(P, lam)
    H0 = AnnealSchedule.transverse_field(lam)
    sch = AnnealSchedule(H0=H0, H1=H1, T=T, noise_rate=r)
    rho0 = AnnealSchedule.plus_state(lam)
    times = np.linspace(0.0, T, params.get("grid", 50))
    traj = annealer_evolve(sch, rho0, L, times)
    sig = gibbs_state(P, lam)
    rep = relent_decay_bound(traj, sig, alpha, sch, times)
    metrics = {"alpha_witness": alpha, "max_violation": rep["max_violation"],
               "final_D": rep["rows"][-1]["D"]}
    return metrics, bool(rep["max_violation"] <= 1e-9)


def _check_apps(cfg, params, seed):
    from .applications import lipschitz_norm, wasserstein1_lower
    from .functionals import SamplerConfig, mlsi_witness
    from .lindblad import glauber_generator, normal_form

    P = cfg.potential()
    lam = cfg.region()
    L = glauber_generator(lam, P, lam)
    nf = normal_form(L)
    sig = gibbs_state(P, lam)
    scfg = SamplerConfig(n_samples=params.get("n_samples", 96), n_descents=6,
                         descent_steps=20, seed=seed, label="apps")
    alpha = mlsi_witness(L, config=scfg).quantity
    rng = rngmod.stream(seed, "apps-w1")
    rho = rngmod.random_density(rng, sig.matrix.shape[0])
    val, xhat = wasserstein1_lower(qop(rho, sig.sites), sig, nf,
                                   n_starts=params.get("n_starts", 16),
                                   n_steps=params.get("n_steps", 60))
    duality = abs(abs(np.trace(xhat @ (rho - sig.matrix)).real)
                  - val * lipschitz_norm(xhat, nf)) if xhat is not None else 0.0
    transport_margin = math.sqrt(relative_entropy(rho, sig.matrix) / alpha) - val
    metrics = {"alpha_witness": alpha, "w1_lower": val,
               "duality_residual": duality, "transport_margin": transport_margin}
    return metrics, bool(duality <= 1e-9)


CHECKS = {
    "lattice": _check_lattice,
    "gibbs": _check_gibbs,
    "ce-check": _check_ce,
    "gap": _check_gap,
    "mlsi": _check_mlsi,
    "clustering": _check_clustering,
    "tensorization": _check_tensorization,
    "expansion": _check_expansion,
    "anneal": _check_anneal,
    "apps": _check_apps,
}


def run(cfg: ExperimentConfig, only: str | None = None) -> list:
    """Execute the configured checks in order; deterministic for fixed seed."""
    records = []
    stamp = build_hash()
    for k, entry in enumerate(cfg.experiments):
        check = entry["check"]
        if only is not None and check != only:
            continue
        params = {key: val for key, val in entry.items() if key != "check"}
        exp_id = f"{check}-{k}"
        exp_seed = rngmod._key(cfg.seed, exp_id, 0) % 2**31
        try:
            metrics, passed = CHECKS[check](cfg, params, exp_seed)
        except ConfigError:
            raise
        except Exception as exc:  # propagate with experiment context
            raise RuntimeError(f"experiment {exp_id} failed: {exc}") from exc
        records.append(Record(
            experiment_id=exp_id,
            params=params,
            metrics=_jsonable(metrics),
            provenance={"build": stamp, "seed": cfg.seed},
            passed=bool(passed),
        ))
    return records


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


def emit(records, path, fmt: str = "jsonl") -> str:
    """Write records; returns the path written."""
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "jsonl":
        with open(path, "w") as fh:
            for r in records:
                fh.write(json.dumps(r.to_json(), sort_keys=True) + "\n")
    elif fmt == "csv":
        import csv

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["experiment_id", "passed", "metric", "value"])
            for r in records:
                flat = _flatten(r.metrics)
                for key in sorted(flat):
                    writer.writerow([r.experiment_id, r.passed, key, flat[key]])
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return str(path)


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out
