from superpca.in_memory import InMemory


def test_in_memory():
    obj = InMemory()
    assert isinstance(obj, InMemory)
    obj.set(b'hello', {'val': 123})
    assert obj.has(b'hello')
    assert obj.get(b'hello')['val'] == 123
    assert obj.has(b'no such key') is False
    assert len(obj) == 1


def test_in_memory_overwrites():
    obj = InMemory()
    obj.set(b'first', 1)
    obj.set(b'first', 2)
    obj.set(b'plain', 3)
    assert obj.get(b'first') == 2
    assert obj.get(b'plain') == 3
    assert len(obj) == 2
