import os
import pickle

import numpy as np
import pytest

from superpca.cube import HsiCube
from superpca.errors import ParameterError
from superpca.utils import THREADS_ENV, cube_fingerprint, request_to_cache_key, resolve_workers, round_half_away


def test_request_to_cache_key():
    key = request_to_cache_key({"kind": "ers", "superpixels": 100, "workers": 4, "label": "scale"})
    assert pickle.loads(key) == [("kind", "ers"), ("superpixels", 100)]
    assert request_to_cache_key({"b": 1, "a": 2}) == request_to_cache_key({"a": 2, "b": 1})


def test_round_half_away():
    assert round_half_away(70.5) == 71
    assert round_half_away(2.5) == 3
    assert round_half_away(2.4999) == 2
    assert round_half_away(-2.5) == -3
    assert round_half_away(0.0) == 0


def test_resolve_workers(monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)
    assert resolve_workers() == (os.cpu_count() or 1)
    assert resolve_workers(3) == 3
    monkeypatch.setenv(THREADS_ENV, "2")
    assert resolve_workers() == 2
    monkeypatch.setenv(THREADS_ENV, "0")
    assert resolve_workers() == (os.cpu_count() or 1)
    monkeypatch.setenv(THREADS_ENV, "many")
    with pytest.raises(ParameterError, match=THREADS_ENV):
        resolve_workers()
    monkeypatch.setenv(THREADS_ENV, "-1")
    with pytest.raises(ParameterError):
        resolve_workers()


def test_cube_fingerprint():
    data = np.arange(24, dtype=float).reshape(2, 3, 4)
    assert cube_fingerprint(HsiCube(data)) == cube_fingerprint(HsiCube(data.copy()))
    assert cube_fingerprint(HsiCube(data)) != cube_fingerprint(HsiCube(data + 1))
    assert cube_fingerprint(HsiCube(data)) != cube_fingerprint(HsiCube(data.reshape(2, 4, 3)))
