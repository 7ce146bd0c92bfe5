from __future__ import annotations

import pytest

from robocoord.gvh import Gvh, NotOwner, SlotAlreadyOwned, UnknownSlot
from robocoord.primitives.mutex import Mutex


def test_mutex_slots_start_null():
    g = Gvh(1)
    m = Mutex(1, "x", g)
    assert g.read((m.inst, "crit")) == (None, 0)


def test_second_owner_rejected():
    g = Gvh(1)
    g.register_slot("mux/x", ("mux/x", "crit"), "bool")
    with pytest.raises(SlotAlreadyOwned):
        g.register_slot("other", ("mux/x", "crit"), "bool")


def test_distinct_instances_are_distinct_slots():
    g = Gvh(1)
    a, b = Mutex(1, "a", g), Mutex(1, "b", g)
    g.publish(a.inst, (a.inst, "crit"), True)
    assert g.value((a.inst, "crit")) is True
    assert g.value((b.inst, "crit")) is None


def test_grant_visible_to_reader():
    g = Gvh(0)
    m = Mutex(0, "x", g)
    m.do_mutex(["A"], [0])
    assert g.value((m.inst, "crit")) is True


def test_non_owner_publish():
    g = Gvh(1)
    g.register_slot("reg/x", ("reg/x", "rList"), "pid-list")
    with pytest.raises(NotOwner):
        g.publish("mux/x", ("reg/x", "rList"), [1])


def test_versions_count_writes():
    g = Gvh(1)
    g.register_slot("o", ("o", "v"), "int")
    assert g.publish("o", ("o", "v"), 5) == 1
    assert g.publish("o", ("o", "v"), 5) == 2
    assert g.read(("o", "v")) == (5, 2)
    assert g.read(("o", "v")) == g.read(("o", "v"))


def test_unknown_slot_and_bad_tag():
    g = Gvh(1)
    with pytest.raises(UnknownSlot):
        g.read(("nope", "x"))
    with pytest.raises(ValueError):
        g.register_slot("o", ("o", "v"), "complex")


def test_publish_is_traced():
    seen = []
    g = Gvh(4, lambda kind, pid, **kw: seen.append((kind, pid, kw)))
    g.register_slot("o", ("o", "v"), "int")
    g.publish("o", ("o", "v"), 7)
    g.publish("o", ("o", "v"), None)
    assert seen == [
        ("gvh_publish", 4, {"slot": "o.v", "tag": "int", "value": 7, "version": 1, "writer": "o"}),
        ("gvh_publish", 4, {"slot": "o.v", "tag": "null", "value": None, "version": 2, "writer": "o"}),
    ]
