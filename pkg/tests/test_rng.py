"""Stream discipline tests: determinism, independence, env fallback."""

from __future__ import annotations

import numpy as np
import pytest

from landscape_lab import rng
from landscape_lab.errors import InvalidConfig


def test_streams_are_deterministic():
    a = rng.normal(rng.stream(1, "tag", 0), (4, 3))
    b = rng.normal(rng.stream(1, "tag", 0), (4, 3))
    assert np.array_equal(a, b)


def test_streams_differ_across_tags_indices_and_masters():
    base = rng.normal(rng.stream(1, "tag", 0), (8,))
    for other in [
        rng.normal(rng.stream(1, "tag", 1), (8,)),
        rng.normal(rng.stream(1, "other", 0), (8,)),
        rng.normal(rng.stream(2, "tag", 0), (8,)),
    ]:
        assert not np.array_equal(base, other)


def test_normals_are_standard():
    draws = rng.normal(rng.stream(7, "moments", 0), (200_000,))
    assert abs(float(np.mean(draws))) < 0.01
    assert abs(float(np.var(draws)) - 1.0) < 0.02


def test_uniform_stays_inside_open_interval():
    u = rng.uniform(rng.stream(7, "unit", 0), (100_000,))
    assert np.all(u > 0.0) and np.all(u < 1.0)


def test_unit_vector_is_unit():
    v = rng.unit_vector(rng.stream(7, "sphere", 0), 6)
    assert abs(np.linalg.norm(v) - 1.0) <= 1e-12


def test_subseed_is_stable_and_distinct():
    assert rng.subseed(5, "a", 0) == rng.subseed(5, "a", 0)
    assert rng.subseed(5, "a", 0) != rng.subseed(5, "a", 1)
    assert rng.subseed(5, "a", 0) != rng.subseed(5, "b", 0)


def test_master_seed_resolution(monkeypatch):
    assert rng.resolve_master_seed(42) == 42
    monkeypatch.setenv(rng.SEED_ENV_VAR, "777")
    assert rng.resolve_master_seed() == 777
    monkeypatch.setenv(rng.SEED_ENV_VAR, "not-a-number")
    with pytest.raises(InvalidConfig):
        rng.resolve_master_seed()
    monkeypatch.delenv(rng.SEED_ENV_VAR)
    assert rng.resolve_master_seed() == rng.DEFAULT_MASTER_SEED
