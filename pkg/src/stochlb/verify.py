"""Empirical checks of the moment inequalities the solver relies on.

Every suite draws seeded random families, evaluates both sides of one
inequality with the exact engine in :mod:`stochlb.moments`, and counts
violations. Suites return a :class:`SuiteResult`; none of them raise on a
violation, so callers decide what a failure means.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dist import DiscreteDist, effective_size, l_function, raw_moment, scale, truncate_split
from .evaluate import brute_force_opt
from .instance import LbInstance
from .moments import (
    expected_lp_norm_exact,
    expected_lp_norm_mc,
    l_function_sum,
    latala_bounds,
    solve_epsilon_star,
    sum_distribution,
    sum_moment_exact,
    tail_probability,
    upper_bound_at,
)

REL_SLACK = 1e-9
DEFAULT_PS = (1.5, 2.0, 3.0, 7.0)
CONVERSE_ALPHA0 = 2.0**-10
CHERNOFF_ELLS = (2, 4, 16)
CHERNOFF_TS = (0.0, 0.5, 1.0, 2.0)
TILDE = 44.0
EXACT_MACHINES = 64


@dataclass
class SuiteResult:
    name: str
    checked: int = 0
    violations: int = 0
    details: dict = field(default_factory=dict)
    examples: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def fail(self, **info) -> None:
        self.violations += 1
        if len(self.examples) < 5:
            self.examples.append(info)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "checked": self.checked,
            "violations": self.violations,
            "details": self.details,
            "examples": self.examples,
            "seconds": self.seconds,
        }


def random_dist(rng: np.random.Generator, support_max: int = 4, vmax: float = 10.0) -> DiscreteDist:
    k = int(rng.integers(1, support_max + 1))
    return DiscreteDist.from_arrays(rng.uniform(0.0, vmax, size=k), rng.dirichlet(np.ones(k)))


def random_family(rng, n_max: int = 6, support_max: int = 4, vmax: float = 10.0) -> list[DiscreteDist]:
    return [random_dist(rng, support_max, vmax) for _ in range(int(rng.integers(1, n_max + 1)))]


def _families(n_families, seed, ps):
    rng = np.random.default_rng(seed)
    for k in range(n_families):
        yield random_family(rng), ps[k % len(ps)], rng


def check_latala(n_families: int = 200, seed: int = 0, ps: Sequence[float] = DEFAULT_PS) -> SuiteResult:
    """(eps*/10)^p <= E S^p <= (e eps*)^p."""
    res = SuiteResult("latala-sandwich")
    t0 = time.perf_counter()
    for k, (ds, p, _) in enumerate(_families(n_families, seed, ps)):
        res.checked += 1
        lo, hi = latala_bounds(ds, p)
        val = sum_moment_exact(ds, p)
        if not lo * (1 - REL_SLACK) <= val <= hi * (1 + REL_SLACK):
            res.fail(family=k, p=p, lower=lo, value=val, upper=hi)
    res.seconds = time.perf_counter() - t0
    return res


def check_moment_bounds(
    n_families: int = 200, seed: int = 0, ps: Sequence[float] = DEFAULT_PS, eps_per_family: int = 5
) -> tuple[SuiteResult, SuiteResult]:
    """E S^p <= eps^p e^{p sum nu_eps} for all eps, and sum nu_eps >= 1 implies
    E S^p >= (eps/10)^p. The eps are log-uniform within 100x of eps*."""
    upper = SuiteResult("moment-upper")
    lower = SuiteResult("moment-lower")
    t0 = time.perf_counter()
    for k, (ds, p, rng) in enumerate(_families(n_families, seed, ps)):
        val = sum_moment_exact(ds, p)
        star = solve_epsilon_star(ds, p)
        for eps in star * 10.0 ** rng.uniform(-2.0, 2.0, size=eps_per_family):
            upper.checked += 1
            ub = upper_bound_at(ds, eps, p)
            if val > ub * (1 + REL_SLACK):
                upper.fail(family=k, p=p, eps=eps, value=val, bound=ub)
            if l_function_sum(ds, eps, p) >= 1.0:
                lower.checked += 1
                lb = (eps / 10.0) ** p
                if val < lb * (1 - REL_SLACK):
                    lower.fail(family=k, p=p, eps=eps, value=val, bound=lb)
    upper.seconds = lower.seconds = time.perf_counter() - t0
    return upper, lower


def check_jensen(n_families: int = 200, seed: int = 0, ps: Sequence[float] = DEFAULT_PS) -> SuiteResult:
    """E ||S||_p <= (sum_i E S_i^p)^(1/p) on enumerable machine loads."""
    res = SuiteResult("jensen")
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    for k in range(n_families):
        p = ps[k % len(ps)]
        loads = [random_family(rng, 3, 3) for _ in range(int(rng.integers(1, 4)))]
        res.checked += 1
        lhs = expected_lp_norm_exact(loads, p)
        rhs = math.fsum(sum_moment_exact(jobs, p) for jobs in loads) ** (1.0 / p)
        if lhs > rhs * (1 + REL_SLACK):
            res.fail(family=k, p=p, norm=lhs, bound=rhs)
    res.seconds = time.perf_counter() - t0
    return res


@dataclass(frozen=True)
class MachineType:
    """One machine's jobs (values in [0,1]) together with E S^p and E S^2p."""

    jobs: tuple[DiscreteDist, ...]
    mu: float
    mu2: float
    total: DiscreteDist


def _machine_type(rng, p: float) -> MachineType:
    if rng.random() < 0.5:
        # rare full-size spike: the heavy-tailed shape the converse is weakest on
        jobs = [DiscreteDist.bernoulli(float(10.0 ** rng.uniform(-3.0, 0.0)))]
    else:
        jobs = random_family(rng, 3, 3, vmax=1.0)
    s = sum_distribution(jobs)
    mu = raw_moment(s, p)
    if mu > 1.0:
        c = mu ** (-1.0 / p)
        jobs = [scale(d, c) for d in jobs]
        s = sum_distribution(jobs)
        mu = raw_moment(s, p)
    return MachineType(tuple(jobs), mu, raw_moment(s, 2.0 * p), s)


def _chebyshev_norm_lower(mu: float, var: float, p: float) -> float:
    """sup over delta of ((1-delta) mu)^(1/p) (1 - var/(delta mu)^2).

    Valid lower bound on E (sum_i S_i^p)^(1/p) with mu = sum E S_i^p and
    var = sum Var S_i^p for independent S_i.
    """
    best = 0.0
    for delta in np.linspace(0.01, 0.99, 99):
        tail = min(1.0, var / (delta * mu) ** 2)
        best = max(best, ((1 - delta) * mu) ** (1.0 / p) * (1.0 - tail))
    return best


def _converse_family(rng, p, alpha0, exact_cap):
    """Machine types plus multiplicities with (sum E S_i^p)^(1/p) >= 1/alpha0."""
    need = alpha0 ** (-p)
    types = [_machine_type(rng, p) for _ in range(int(rng.integers(1, 4)))]
    types = [t for t in types if t.mu > 0] or [MachineType((DiscreteDist.point(1.0),), 1.0, 1.0, DiscreteDist.point(1.0))]
    per_round = math.fsum(t.mu for t in types)
    reps = max(1, math.ceil(need / per_round))
    return types, reps


def converse_holds(types: Sequence[MachineType], reps: int, p: float, exact_cap: int = 10**6) -> tuple[bool, str, float, float]:
    """Decide E||S||_p > mu^(1/p)/4 for ``reps`` copies of each machine type.

    Exact enumeration when the joint support is small, otherwise the
    Chebyshev certificate; a failed certificate is treated as a violation
    (the check is one-sided, never optimistic)."""
    mu = reps * math.fsum(t.mu for t in types)
    target = 0.25 * mu ** (1.0 / p)
    log_outcomes = reps * math.fsum(math.log(t.total.support_size) for t in types)
    if log_outcomes <= math.log(exact_cap) and reps * len(types) <= EXACT_MACHINES:
        loads = [list(t.jobs) for t in types] * reps
        val = expected_lp_norm_exact(loads, p)
        return val > target, "exact", val, target
    var = reps * math.fsum(max(t.mu2 - t.mu**2, 0.0) for t in types)
    lb = _chebyshev_norm_lower(mu, var, p)
    return lb > target, "chebyshev", lb, target


def check_converse_jensen(
    n_families: int = 100,
    seed: int = 0,
    ps: Sequence[float] = DEFAULT_PS,
    alpha0: float = CONVERSE_ALPHA0,
    scan: Sequence[int] = tuple(range(0, 11)),
) -> SuiteResult:
    """Converse to Jensen on qualifying families at ``alpha0``; also scans
    alpha0 = 2^-k and reports the largest value at which every family passes."""
    res = SuiteResult("converse-jensen")
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    for k in range(n_families):
        p = ps[k % len(ps)]
        types, reps = _converse_family(rng, p, alpha0, 10**6)
        res.checked += 1
        ok, method, val, target = converse_holds(types, reps, p)
        res.details.setdefault("methods", {}).setdefault(method, 0)
        res.details["methods"][method] += 1
        if not ok:
            res.fail(family=k, p=p, method=method, value=val, target=target)
    largest = None
    failures_at = {}
    for kk in scan:
        a0 = 2.0**-kk
        srng = np.random.default_rng([seed, kk])
        bad = 0
        for f in range(n_families):
            p = ps[f % len(ps)]
            types, reps = _converse_family(srng, p, a0, 10**6)
            bad += not converse_holds(types, reps, p)[0]
        failures_at[f"2^-{kk}"] = bad
        # threshold: this alpha0 and every smaller scanned one pass
        if bad:
            largest = None
        elif largest is None:
            largest = a0
    res.details["alpha0"] = alpha0
    res.details["scan_failures"] = failures_at
    res.details["largest_passing_alpha0"] = largest
    res.seconds = time.perf_counter() - t0
    return res


def check_chernoff(
    n_families: int = 100, seed: int = 0, ells: Sequence[int] = CHERNOFF_ELLS, ts: Sequence[float] = CHERNOFF_TS
) -> SuiteResult:
    """Pr(sum Y >= sum beta_ell(Y) + t) <= ell^-t, with exact tails."""
    res = SuiteResult("chernoff-tail")
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    for k in range(n_families):
        ds = random_family(rng, 6, 4, vmax=float(rng.choice([1.0, 3.0, 10.0])))
        s = sum_distribution(ds)
        for ell in ells:
            base = math.fsum(effective_size(d, ell) for d in ds)
            for t in ts:
                res.checked += 1
                thr = base + t
                # round the threshold down: counts borderline atoms against the bound
                prob = tail_probability(s, thr - 1e-12 * max(1.0, thr))
                if prob > ell ** (-t) * (1 + REL_SLACK):
                    res.fail(family=k, ell=ell, t=t, prob=prob, bound=ell ** (-t))
    res.seconds = time.perf_counter() - t0
    return res


def check_mc_calibration(
    trials: int = 100, seed: int = 0, samples: int = 4000, p: float = 2.0, required: int = 95
) -> SuiteResult:
    """|MC - exact| <= 4 stderr in at least ``required`` of ``trials`` seeded runs."""
    res = SuiteResult("mc-calibration")
    rng = np.random.default_rng(seed)
    loads = [random_family(rng, 3, 3) for _ in range(3)]
    exact = expected_lp_norm_exact(loads, p)
    t0 = time.perf_counter()
    hits = 0
    for k in range(trials):
        est = expected_lp_norm_mc(loads, p, samples, seed=seed * 1000 + k)
        res.checked += 1
        hits += abs(est.mean - exact) <= 4.0 * est.stderr
    res.details.update(exact=exact, within_4se=hits, required=required)
    if hits < required:
        res.fail(within_4se=hits, required=required)
    res.seconds = time.perf_counter() - t0
    return res


def truncated_loads(inst: LbInstance, machine_of, theta: float) -> list[list[DiscreteDist]]:
    return [[truncate_split(d, theta)[0] for d in jobs] for jobs in inst.loads(machine_of)]


def multiscale_lhs(loads, T: float, p: float, v: Sequence[float]) -> float:
    """sum_i (1/v_i)(sum_j nu_{T/v_i^(1/p)}(X_ij / 44) - 1)."""
    total = 0.0
    for jobs, vi in zip(loads, v):
        eps = T / vi ** (1.0 / p)
        total += (math.fsum(l_function(scale(d, 1.0 / TILDE), eps, p) for d in jobs) - 1.0) / vi
    return total


def subset_lhs(loads, T: float, p: float, K: Sequence[int]) -> float:
    """sum_{i in K} sum_j nu_{100 T / |K|^(1/p)}(X_ij)."""
    eps = 100.0 * T / len(K) ** (1.0 / p)
    return math.fsum(l_function(d, eps, p) for i in K for d in loads[i])


def check_multiscale(
    instances: Sequence[tuple[LbInstance, float]],
    seed: int = 0,
    alpha: float = 0.1,
    sequences: int = 20,
    v_max_factor: float = 100.0,
) -> tuple[SuiteResult, SuiteResult]:
    """Multi-scale and every-subset constraints at the brute-force optimum.

    The multi-scale sums use the optimum's loads truncated at alpha*T, with T
    the exact optimum and v_i log-uniform in [(1/alpha)^p, v_max_factor *
    (1/alpha)^p]. The every-subset sums use the untruncated loads.
    """
    multi = SuiteResult("multiscale")
    every = SuiteResult("every-subset")
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    for k, (inst, p) in enumerate(instances):
        bf = brute_force_opt(inst, p)
        T = bf.value
        loads = truncated_loads(inst, bf.assignment.machine_of, alpha * T)
        full = inst.loads(bf.assignment.machine_of)
        v_lo = (1.0 / alpha) ** p
        for _ in range(sequences):
            v = v_lo * v_max_factor ** rng.uniform(0.0, 1.0, size=inst.m)
            multi.checked += 1
            lhs = multiscale_lhs(loads, T, p, v)
            if lhs > 3.0 + REL_SLACK:
                multi.fail(instance=k, p=p, lhs=lhs, v=v.tolist())
        for r in range(1, inst.m + 1):
            for K in itertools.combinations(range(inst.m), r):
                every.checked += 1
                lhs = subset_lhs(full, T, p, K)
                if lhs > len(K) * (1 + REL_SLACK):
                    every.fail(instance=k, p=p, K=list(K), lhs=lhs)
    multi.seconds = every.seconds = time.perf_counter() - t0
    return multi, every


def run_all(families: int = 200, seed: int = 0, ps: Sequence[float] = DEFAULT_PS) -> list[SuiteResult]:
    """The distribution-level suites (no load-balancing instances needed)."""
    out = [check_latala(families, seed, ps)]
    out.extend(check_moment_bounds(families, seed, ps))
    out.append(check_jensen(families, seed, ps))
    out.append(check_converse_jensen(max(1, families // 2), seed, ps))
    out.append(check_chernoff(max(1, families // 2), seed))
    out.append(check_mc_calibration(seed=seed))
    return out
