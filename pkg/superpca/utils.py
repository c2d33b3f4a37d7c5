import hashlib
import math
import os
import pickle

from superpca.errors import ParameterError

THREADS_ENV = 'SUPERPCA_THREADS'


def request_to_cache_key(obj: dict) -> bytes:
    """convert the request dictionary to a pickled representation usable as a storage key

    Parameter
    ---------
    obj : dict
        Request arguments
    Returns
    -------
        bytes
            Pickled representation of the request without its bookkeeping keys
    """

    cloned_obj: dict = obj.copy()
    for key in ['workers', 'label']:
        cloned_obj.pop(key, None)

    return pickle.dumps(sorted(cloned_obj.items()))


def round_half_away(value: float) -> int:
    """Round to the nearest integer, halves away from zero (Python's round() goes to even)."""
    if value >= 0:
        return int(math.floor(value + 0.5))
    return -int(math.floor(-value + 0.5))


def resolve_workers(workers: int = None) -> int:
    """
    Number of worker threads to use.

    An explicit positive ``workers`` wins; otherwise SUPERPCA_THREADS is read, where 0 or unset
    means one worker per CPU.
    """
    if workers is not None and workers > 0:
        return workers
    raw = os.environ.get(THREADS_ENV, '').strip()
    if not raw:
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        raise ParameterError(f"{THREADS_ENV} must be a non-negative integer, got {raw!r}")
    if value < 0:
        raise ParameterError(f"{THREADS_ENV} must be a non-negative integer, got {raw!r}")
    return value or (os.cpu_count() or 1)


def cube_fingerprint(cube) -> str:
    """Content hash of a cube, used to keep cache entries of different cubes apart."""
    digest = hashlib.sha1()
    digest.update(repr(cube.data.shape).encode())
    digest.update(cube.data.tobytes())
    return digest.hexdigest()
