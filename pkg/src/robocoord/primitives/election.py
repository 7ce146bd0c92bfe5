"""Leader election over a fixed participant list.

``bully``: highest pid wins. A process challenges every higher participant
with ``ELECT``; a live higher process answers and takes over. Hearing no
answer within the answer timeout, the process announces itself with
``COORD``. A process that got an answer but no ``COORD`` in time restarts.

``random_ballot``: every participant draws a ballot and sends it to all
others; once all ballots are in, the largest ``(ballot, pid)`` wins.

Either way ``Leader`` is ``None`` while running, a pid when decided, and
``"fail"`` when nothing was decided within ``d2``.
"""

from __future__ import annotations

from typing import Any, Callable, Iterable

from ..gvh import Gvh
from .base import Effect, Send, Timer

ALGORITHMS = ("bully", "random_ballot")


class NotInPlist(ValueError):
    pass


class Election:
    kind = "elect"

    def __init__(
        self,
        pid: int,
        eid: str,
        gvh: Gvh | None = None,
        algorithm: str = "bully",
        answer_timeout: int = 800,
        coord_timeout: int = 1600,
        d2: int = 60_000,
        ballot: Callable[[], int] | None = None,
        plist: Iterable[int] = (),
    ):
        if algorithm not in ALGORITHMS:
            raise ValueError(f"unknown election algorithm {algorithm!r}")
        self.pid = pid
        self.xid = eid
        self.inst = f"elect/{eid}"
        self.gvh = gvh
        self.algorithm = algorithm
        self.answer_timeout = answer_timeout
        self.coord_timeout = coord_timeout
        self.d2 = d2
        self.ballot_source = ballot or (lambda: 0)
        self.plist: tuple[int, ...] = tuple(sorted(set(plist)))
        self.phase = "idle"
        self.leader: int | str | None = None
        self.round = 0
        self.got_answer = False
        self.started_at: int | None = None
        self.ballots: dict[int, int] = {}
        if gvh is not None:
            gvh.register_slot(self.inst, (self.inst, "Leader"), "pid")

    def _publish_leader(self) -> None:
        if self.gvh is not None:
            tag = "label" if self.leader == "fail" else None
            self.gvh.publish(self.inst, (self.inst, "Leader"), self.leader, tag=tag)

    def _msg(self, kind: str, **fields: Any) -> dict[str, Any]:
        return {"type": kind, "xid": self.xid, **fields}

    def do_election(self, plist: Iterable[int] | None, now: int) -> list[Effect]:
        plist = tuple(sorted(set(plist))) if plist is not None else self.plist
        if self.pid not in plist:
            raise NotInPlist(f"process {self.pid} not in {plist}")
        self.plist = plist
        self.started_at = now
        self.phase = "running"
        self.leader = None
        self._publish_leader()
        effects: list[Effect] = [Timer(self.d2, ("deadline", 0))]
        if len(plist) == 1:
            self._decide(self.pid)
            return []
        if self.algorithm == "bully":
            return effects + self._challenge()
        mine = int(self.ballot_source())
        self.ballots[self.pid] = mine
        effects += [Send(q, self._msg("ELECT", round=0, value=mine)) for q in plist if q != self.pid]
        return effects + self._tally()

    # -- bully --------------------------------------------------------------

    def _challenge(self) -> list[Effect]:
        self.round += 1
        self.got_answer = False
        higher = [q for q in self.plist if q > self.pid]
        if not higher:
            return self._announce()
        out: list[Effect] = [Send(q, self._msg("ELECT", round=self.round, value=self.pid)) for q in higher]
        out.append(Timer(self.answer_timeout, ("answer", self.round)))
        return out

    def _announce(self) -> list[Effect]:
        self._decide(self.pid)
        return [Send(q, self._msg("COORD", leader=self.pid)) for q in self.plist if q != self.pid]

    def _decide(self, leader: int | str) -> None:
        self.phase = "done" if leader != "fail" else "failed"
        if self.leader != leader:
            self.leader = leader
            self._publish_leader()

    # -- messages & timers --------------------------------------------------

    def on_message(self, payload: dict[str, Any], src: int, now: int) -> list[Effect]:
        kind = payload["type"]
        if self.algorithm == "random_ballot":
            if kind == "ELECT":
                self.ballots[src] = int(payload["value"])
                return self._tally() if self.phase == "running" else []
            return []
        if kind == "ELECT":
            out: list[Effect] = [Send(src, self._msg("ANSWER", round=payload["round"]))]
            if self.phase == "done" and self.leader == self.pid:
                out.append(Send(src, self._msg("COORD", leader=self.pid)))
            elif self.phase != "running" and self.pid in self.plist:
                self.phase = "running"
                self.started_at = now
                out.append(Timer(self.d2, ("deadline", 0)))
                out += self._challenge()
            return out
        if kind == "ANSWER":
            if self.phase == "running" and payload["round"] == self.round and not self.got_answer:
                self.got_answer = True
                return [Timer(self.coord_timeout, ("coord", self.round))]
            return []
        if kind == "COORD":
            leader = int(payload["leader"])
            if leader >= self.pid or self.pid not in self.plist:
                self._decide(leader)
                return []
            # a lower process claimed leadership; reassert
            if self.phase != "running":
                self.phase = "running"
                return self._challenge()
            return []
        raise ValueError(f"election cannot handle {kind!r}")

    def on_timer(self, token: tuple, now: int) -> list[Effect]:
        what, rnd = token
        if what == "deadline":
            if self.phase == "running":
                self._decide("fail")
            return []
        if self.phase != "running" or rnd != self.round:
            return []
        if what == "answer" and not self.got_answer:
            return self._announce()
        if what == "coord":
            return self._challenge()
        return []

    def _tally(self) -> list[Effect]:
        if self.phase == "running" and all(q in self.ballots for q in self.plist):
            winner = max(self.plist, key=lambda q: (self.ballots[q], q))
            self._decide(winner)
        return []
