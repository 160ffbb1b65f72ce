"""Deterministic cluster simulation for election testing and chaos replay.

A seeded discrete-event scheduler drives the pure election state machine:
every timer and message delivery is a heap event, so runs are exactly
reproducible from (topology, seed, chaos script).  Chaos hooks cover node
kill/pause/resume, seeded message loss, and bounded random delay.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field, replace

from .election import (
    Heartbeat,
    NodeState,
    ROLE_LEADER,
    Timeout,
    election_delay,
    election_step,
)


@dataclass(order=True)
class _Event:
    time: float
    seq: int
    kind: str = field(compare=False)     # "timer" | "message"
    node: str = field(compare=False)
    payload: object = field(compare=False, default=None)
    epoch: int = field(compare=False, default=0)


class ClusterSim:
    def __init__(self, n_nodes: int = 3, seed: int = 0,
                 timeout_base: float = 10.0, loss_rate: float = 0.0,
                 delay_max: float = 0.0):
        if not 0.0 <= loss_rate < 1.0:
            raise ValueError("loss_rate must be in [0, 1)")
        self.rng = random.Random(seed)
        self.timeout_base = timeout_base
        self.loss_rate = loss_rate
        self.delay_max = delay_max
        ids = [f"n{i}" for i in range(n_nodes)]
        self.nodes: dict[str, NodeState] = {
            nid: NodeState(node_id=nid,
                           peers=tuple(p for p in ids if p != nid),
                           timeout_base=timeout_base)
            for nid in ids
        }
        self.alive: set[str] = set(ids)
        self.now = 0.0
        self._heap: list[_Event] = []
        self._seq = 0
        self._timer_epoch: dict[str, int] = {nid: 0 for nid in ids}
        self.leaders_by_term: dict[int, set[str]] = {}
        self.messages_lost = 0
        self.messages_sent = 0
        for nid in ids:
            self._schedule_timer(nid, election_delay(self.nodes[nid], self.rng))

    # -- scheduling -----------------------------------------------------

    def _push(self, event: _Event) -> None:
        self._seq += 1
        event.seq = self._seq
        heapq.heappush(self._heap, event)

    def _schedule_timer(self, node: str, delay: float) -> None:
        self._timer_epoch[node] += 1
        self._push(_Event(self.now + delay, 0, "timer", node,
                          epoch=self._timer_epoch[node]))

    def _deliver(self, to: str, message) -> None:
        self.messages_sent += 1
        if self.rng.random() < self.loss_rate:
            self.messages_lost += 1
            return
        delay = self.rng.uniform(0.0, self.delay_max) if self.delay_max else 0.0
        self._push(_Event(self.now + delay, 0, "message", to, payload=message))

    # -- chaos hooks ------------------------------------------------------

    def kill(self, node: str) -> None:
        self.alive.discard(node)

    pause = kill

    def revive(self, node: str) -> None:
        if node in self.alive:
            return
        self.alive.add(node)
        state = self.nodes[node]
        self._schedule_timer(node, election_delay(state, self.rng))

    resume = revive

    def inject_malformed(self, node: str) -> None:
        self._push(_Event(self.now, 0, "message", node,
                          payload={"msg_type": "???"}))

    # -- execution --------------------------------------------------------

    def _step_node(self, node: str, event) -> None:
        state, outbound = election_step(self.nodes[node], event, self.rng,
                                        now=self.now)
        if state.role == ROLE_LEADER:
            self.leaders_by_term.setdefault(state.current_term, set()).add(node)
        if state.timer_delay is not None:
            self._schedule_timer(node, state.timer_delay)
            state = replace(state, timer_delay=None)
        self.nodes[node] = state
        for envelope in outbound:
            self._deliver(envelope.to, envelope.message)

    def run_until(self, t: float) -> None:
        while self._heap and self._heap[0].time <= t:
            event = heapq.heappop(self._heap)
            self.now = max(self.now, event.time)
            if event.node not in self.alive:
                continue
            if event.kind == "timer":
                if event.epoch != self._timer_epoch[event.node]:
                    continue  # superseded by a timer reset
                self._step_node(event.node, Timeout())
            else:
                self._step_node(event.node, event.payload)
        self.now = max(self.now, t)

    def run_for(self, duration: float) -> None:
        self.run_until(self.now + duration)

    # -- observers ----------------------------------------------------------

    def current_leader(self) -> tuple[str, int] | None:
        """The live leader with the highest term, if any."""
        best = None
        for nid in self.alive:
            state = self.nodes[nid]
            if state.role == ROLE_LEADER:
                if best is None or state.current_term > best[1]:
                    best = (nid, state.current_term)
        return best

    def live_followers(self) -> list[str]:
        leader = self.current_leader()
        leader_id = leader[0] if leader else None
        return sorted(n for n in self.alive if n != leader_id)

    def assert_safety(self) -> None:
        bad = {t: sorted(nodes) for t, nodes in self.leaders_by_term.items()
               if len(nodes) > 1}
        if bad:
            raise AssertionError(f"multiple leaders in a term: {bad}")


def elect_first_leader(sim: ClusterSim, limit_factor: float = 50.0,
                       ) -> tuple[str, int]:
    """Run until a leader exists; raises if none within limit_factor * T."""
    deadline = sim.now + limit_factor * sim.timeout_base
    step = sim.timeout_base / 2.0
    while sim.now < deadline:
        sim.run_for(step)
        leader = sim.current_leader()
        if leader is not None:
            return leader
    raise AssertionError("no leader elected within limit")


def kill_leader_scenario(n_nodes: int, seed: int, loss_rate: float = 0.0,
                         delay_factor: float = 0.0, timeout_base: float = 10.0,
                         ) -> dict:
    """One seeded run: elect, kill the leader, measure re-election.

    Returns timing and term data; safety is asserted over the whole run.
    """
    sim = ClusterSim(n_nodes=n_nodes, seed=seed, timeout_base=timeout_base,
                     loss_rate=loss_rate,
                     delay_max=delay_factor * timeout_base)
    first, first_term = elect_first_leader(sim)
    sim.run_for(5 * timeout_base)  # let heartbeats settle
    leader = sim.current_leader()
    assert leader is not None
    first, first_term = leader
    kill_time = sim.now
    sim.kill(first)
    step = timeout_base / 4.0
    new_leader = None
    while sim.now < kill_time + 10.0 * timeout_base:
        sim.run_for(step)
        leader = sim.current_leader()
        if leader is not None and leader[0] != first:
            new_leader = leader
            break
    sim.assert_safety()
    return {
        "killed": first,
        "killed_term": first_term,
        "new_leader": new_leader[0] if new_leader else None,
        "new_term": new_leader[1] if new_leader else None,
        "reelect_time": sim.now - kill_time if new_leader else None,
        "lost": sim.messages_lost,
        "sent": sim.messages_sent,
        "sim": sim,
    }
