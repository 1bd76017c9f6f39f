import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from dkglab import identities
from dkglab import spinor_core as sc


def test_suite_passes_and_is_fast():
    identities.run_identity_suite(seed=1, trials=10)  # warm caches
    started = time.perf_counter()
    results = identities.run_identity_suite(seed=0, trials=1000)
    assert time.perf_counter() - started < 1.0
    assert len(results) == 11
    failed = [r for r in results if not r.passed]
    assert not failed, failed
    by_name = {r.name: r for r in results}
    for name in ("minus_projection_norm", "plus_projection_null", "bilinear_split"):
        assert by_name[name].trials == 1000 and by_name[name].tolerance == 1e-12
    assert by_name["anticommutator"].max_error == 0.0
    assert by_name["gamma_adjoint"].max_error == 0.0


@settings(max_examples=10, deadline=None)
@given(hst.integers(0, 2**32 - 1))
def test_suite_passes_for_any_seed(seed):
    assert all(r.passed for r in identities.run_identity_suite(seed=seed, trials=200, include_grid=False))


def test_records_are_plain():
    rec = identities.run_identity_suite(trials=5, include_grid=False)[0].as_record()
    assert set(rec) == {"name", "trials", "failures", "max_error", "tolerance", "passed"}


def test_broken_matrix_is_caught(monkeypatch):
    bad = sc.GAMMA.copy()
    bad[2] = -1j * np.eye(2)
    monkeypatch.setattr(sc, "GAMMA", bad)
    results = {r.name: r for r in identities.run_identity_suite(trials=50, include_grid=False)}
    assert not results["anticommutator"].passed


def test_tolerance_counts_failures():
    r = identities._result("x", np.array([0.0, 1e-13, 1e-3]), np.ones(3))
    assert r.failures == 1 and r.max_error == pytest.approx(1e-3)
