import numpy as np
import pytest

from stochlb import verify
from stochlb.dist import DiscreteDist
from stochlb.instance import random_instance


def test_quick_suites_pass():
    for res in verify.run_all(families=12, seed=3):
        assert res.passed, res.as_dict()


def test_chebyshev_lower_bound_is_conservative():
    # deterministic machines: the norm is exactly mu^(1/p)
    assert verify._chebyshev_norm_lower(16.0, 0.0, 2.0) <= 4.0
    assert verify._chebyshev_norm_lower(16.0, 0.0, 2.0) > 3.9


def test_converse_exact_path_matches_engine():
    t = verify.MachineType((DiscreteDist.bernoulli(0.5),), 0.5, 0.5, DiscreteDist.bernoulli(0.5))
    ok, method, val, target = verify.converse_holds([t], 4, 2.0)
    assert method == "exact" and ok and target == pytest.approx(0.25 * 2 ** 0.5)


def test_violation_is_recorded():
    res = verify.SuiteResult("x")
    res.fail(a=1)
    assert not res.passed and res.examples == [{"a": 1}]


def test_multiscale_on_small_instances():
    insts = [(random_instance(2, 4, 2, seed=s), 2.0) for s in range(3)]
    multi, every = verify.check_multiscale(insts, sequences=5)
    assert multi.passed and every.passed and every.checked == 9
