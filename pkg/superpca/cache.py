from typing import Any, Callable

from superpca.errors import ParameterError
from superpca.in_memory import InMemory
from superpca.utils import request_to_cache_key

__pdoc__ = {
    'superpca.cache.Cache.get': False,
    'superpca.cache.Cache.has': False,
    'superpca.cache.Cache.set': False
}


class Cache:
    """
        Cache - memoizes deterministic pipeline stages

        The real implementation of the underlying cache is delegated to the storage
        object (See the params). Region maps and reduced cubes depend only on their
        request parameters, so a sweep over S_f or a series of seeded repeats computes
        each of them once.

        Examples
        --------
        - Reuse an ERS map across scales of two schedules
        >>> cache = Cache(lambda request: segment(request['superpixels']))
        >>> region_map = cache.fetch({'kind': 'ers', 'superpixels': 100})

        Parameters
        ----------
            producer : Callable[[dict], Any]
                Computes the value of a request that is not cached
            storage : InMemory
                A storage instance to use for caching
        """

    def __init__(self, producer: Callable[[dict], Any] = None, storage: InMemory = None) -> None:
        self.producer = producer
        self.storage = storage if storage is not None else InMemory()

    def fetch(self, request: dict, producer: Callable[[dict], Any] = None) -> Any:
        """Return the stored value of the request, computing and storing it on a miss

        Parameters
        ----------
        request : dict
            Request parameters; 'kind' names the stage
        producer : Callable[[dict], Any]
            Overrides the producer given at construction

        Returns
        -------
            The value for the request
        """
        if self.has(request):
            return self.get(request)

        producer = producer or self.producer
        if producer is None:
            raise ParameterError('Cache needs a producer to compute missing values')
        value = producer(request)
        self.set(request, value)
        return value

    def has(self, request: dict) -> bool:
        return self.storage.has(request_to_cache_key(request))

    def get(self, request: dict) -> Any:
        return self.storage.get(request_to_cache_key(request))

    def set(self, request: dict, value: Any) -> None:
        return self.storage.set(request_to_cache_key(request), value)
