"""Wall-clock election driver: the state machine wired to a TCP transport.

One background thread owns the node's single timer; transport handler
threads feed incoming events.  Both funnel through `_dispatch`, which steps
the pure state machine under a lock and sends replies outside it, so a slow
peer can never stall the timer.
"""

from __future__ import annotations

import random
import threading
import time

from .election import (NodeState, ROLE_LEADER, Timeout, election_delay,
                       election_step, event_to_wire, wire_to_event)
from .transport import TcpTransport


class ElectionRunner:
    def __init__(self, node_id: str, listen: tuple[str, int],
                 peers: dict[str, tuple[str, int]],
                 timeout_base_s: float = 1.0, seed: int | None = None):
        self._state = NodeState(node_id=node_id,
                                peers=tuple(sorted(peers)),
                                timeout_base=timeout_base_s)
        self._rng = random.Random(seed)
        self._cv = threading.Condition()
        self._deadline: float | None = None
        self._stop = threading.Event()
        self._transport = TcpTransport(listen[0], listen[1],
                                       self._on_frame, peers=peers)
        self._thread = threading.Thread(target=self._timer_loop, daemon=True,
                                        name=f"election-{node_id}")

    # -- public view ---------------------------------------------------------

    @property
    def is_leader(self) -> bool:
        with self._cv:
            return self._state.role == ROLE_LEADER

    @property
    def leader_id(self) -> str | None:
        with self._cv:
            return self._state.leader_id

    @property
    def term(self) -> int:
        with self._cv:
            return self._state.current_term

    @property
    def role(self) -> str:
        with self._cv:
            return self._state.role

    @property
    def address(self) -> tuple[str, int]:
        return self._transport.address

    def start(self) -> None:
        self._transport.start()
        with self._cv:
            self._arm(election_delay(self._state, self._rng))
        self._thread.start()
        if not self._state.peers:
            self._dispatch(Timeout())  # alone: take the term without waiting

    def stop(self) -> None:
        self._stop.set()
        with self._cv:
            self._cv.notify()
        self._transport.close()
        if self._thread.is_alive():
            self._thread.join(timeout=2.0)

    # -- plumbing ------------------------------------------------------------

    def _arm(self, delay_s: float) -> None:
        self._deadline = time.monotonic() + delay_s
        self._cv.notify()

    def _dispatch(self, event) -> None:
        with self._cv:
            self._state, outbox = election_step(self._state, event, self._rng,
                                                now=time.monotonic())
            if self._state.timer_delay is not None:
                self._arm(self._state.timer_delay)
            sender = self._state.node_id
            wires = [(env.to, event_to_wire(env.message, sender))
                     for env in outbox]
        for to, wire in wires:
            self._transport.send(to, wire)

    def _on_frame(self, envelope: dict) -> None:
        if self._stop.is_set():
            return
        self._dispatch(wire_to_event(envelope))

    def _timer_loop(self) -> None:
        while not self._stop.is_set():
            with self._cv:
                if self._deadline is None:
                    self._cv.wait(timeout=0.1)
                    continue
                remaining = self._deadline - time.monotonic()
                if remaining > 0:
                    self._cv.wait(timeout=remaining)
                    continue
                self._deadline = None
            self._dispatch(Timeout())
