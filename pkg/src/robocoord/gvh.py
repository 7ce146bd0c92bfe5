"""Per-process global variable holder: single-writer, many-reader slots.

Each robot owns one :class:`Gvh`. A primitive instance registers the slots it
writes; the application (and the monitor, through the trace) only reads them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

Key = tuple[str, str]

# closed tag set for slot values; keeps the trace schema closed
TAGS = ("null", "bool", "int", "pid", "pid-list", "zone-list", "point", "region", "timestamp", "label")


class SlotAlreadyOwned(KeyError):
    pass


class NotOwner(PermissionError):
    pass


class UnknownSlot(KeyError):
    pass


@dataclass
class GvhSlot:
    key: Key
    writer: str
    tag: str
    value: Any = None
    version: int = 0


Emit = Callable[..., Any]


def slot_name(key: Key) -> str:
    return f"{key[0]}.{key[1]}"


class Gvh:
    def __init__(self, pid: int, emit: Emit | None = None):
        self.pid = pid
        self._slots: dict[Key, GvhSlot] = {}
        self._emit = emit

    def register_slot(self, owner: str, key: Key, tag: str) -> None:
        if key in self._slots:
            raise SlotAlreadyOwned(f"{slot_name(key)} already owned by {self._slots[key].writer}")
        if tag not in TAGS:
            raise ValueError(f"unknown slot tag {tag!r}")
        self._slots[key] = GvhSlot(key, owner, tag)

    def publish(self, owner: str, key: Key, value: Any, tag: str | None = None) -> int:
        slot = self._slots.get(key)
        if slot is None:
            raise UnknownSlot(slot_name(key))
        if slot.writer != owner:
            raise NotOwner(f"{owner} cannot write {slot_name(key)} (writer {slot.writer})")
        slot.value = value
        slot.version += 1
        if self._emit is not None:
            self._emit(
                "gvh_publish",
                self.pid,
                slot=slot_name(key),
                tag="null" if value is None else (tag or slot.tag),
                value=value,
                version=slot.version,
                writer=owner,
            )
        return slot.version

    def read(self, key: Key) -> tuple[Any, int]:
        slot = self._slots.get(key)
        if slot is None:
            raise UnknownSlot(slot_name(key))
        return slot.value, slot.version

    def value(self, key: Key) -> Any:
        return self.read(key)[0]

    def __contains__(self, key: Key) -> bool:
        return key in self._slots

    def keys(self) -> list[Key]:
        return list(self._slots)
