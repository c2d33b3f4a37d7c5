__pdoc__ = {
    'superpca.in_memory.InMemory.get': False,
    'superpca.in_memory.InMemory.has': False,
    'superpca.in_memory.InMemory.set': False
}


class InMemory:
    """An in memory storage for intermediate results (region maps, reduced cubes)"""

    def __init__(self) -> None:
        self.store = {}

    def has(self, key: bytes) -> bool:
        """
        Whether a value is stored under the key.

        Parameters
        ----------
        key : bytes
            Request object key

        Returns
        -------
            True once set() stored a value for the key
        """
        return key in self.store

    # keys arrive already serialized by utils.request_to_cache_key
    def get(self, key: bytes):
        """
        Get the value stored for the given request key

        Parameters
        ----------
        key : bytes
            Request object key

        Returns
        -------
            Value computed and stored for the given request key
        """
        return self.store[key]

    def set(self, key: bytes, value) -> None:
        """
        Stores the value of the given request

        Parameters
        ----------
        key : bytes
            Request object key
        value : object
            Computed value
        """
        self.store[key] = value

    def __len__(self) -> int:
        return len(self.store)
