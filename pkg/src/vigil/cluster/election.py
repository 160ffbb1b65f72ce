"""Leader election: the Raft election subset as a pure state machine.

Only elections and heartbeats — assignments are soft state recomputed
every tick, so there is no log to replicate.  `election_step` is a pure
function from (state, event) to (state, outbound messages); all timing
lives in the caller, which schedules the next timer event whenever the
returned state carries a non-None `timer_delay`.

Majority is counted over the full static membership (peers + self), so a
partitioned minority can never elect.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace

ROLE_FOLLOWER = "follower"
ROLE_CANDIDATE = "candidate"
ROLE_LEADER = "leader"

DEFAULT_TIMEOUT_BASE = 10.0  # T; 1s wall-clock in real mode, logical units simulated


@dataclass(frozen=True)
class Timeout:
    """Node timer fired: election timeout, or heartbeat interval for a leader."""


@dataclass(frozen=True)
class VoteRequest:
    term: int
    candidate: str


@dataclass(frozen=True)
class VoteResponse:
    term: int
    voter: str
    granted: bool


@dataclass(frozen=True)
class Heartbeat:
    term: int
    leader: str


@dataclass(frozen=True)
class Envelope:
    to: str
    message: object


@dataclass(frozen=True)
class NodeState:
    node_id: str
    peers: tuple[str, ...]
    timeout_base: float = DEFAULT_TIMEOUT_BASE
    role: str = ROLE_FOLLOWER
    current_term: int = 0
    voted_for: str | None = None
    votes: frozenset = frozenset()
    leader_id: str | None = None
    last_heartbeat_at: float | None = None
    malformed_dropped: int = 0
    # instruction to the scheduler: reset this node's single timer to fire
    # after this many time units; None leaves the pending timer untouched
    timer_delay: float | None = None

    @property
    def cluster_size(self) -> int:
        return len(self.peers) + 1

    @property
    def majority(self) -> int:
        return self.cluster_size // 2 + 1


def election_delay(state: NodeState, rng: random.Random) -> float:
    """Randomized election timeout in [T, 2T]."""
    return rng.uniform(state.timeout_base, 2.0 * state.timeout_base)


def heartbeat_delay(state: NodeState) -> float:
    return state.timeout_base / 3.0


def _valid_term(term) -> bool:
    return isinstance(term, int) and not isinstance(term, bool) and term >= 0


def _is_wellformed(event) -> bool:
    if isinstance(event, Timeout):
        return True
    if isinstance(event, VoteRequest):
        return _valid_term(event.term) and isinstance(event.candidate, str)
    if isinstance(event, VoteResponse):
        return (_valid_term(event.term) and isinstance(event.voter, str)
                and isinstance(event.granted, bool))
    if isinstance(event, Heartbeat):
        return _valid_term(event.term) and isinstance(event.leader, str)
    return False


def _broadcast(state: NodeState, message) -> list[Envelope]:
    return [Envelope(to=peer, message=message) for peer in state.peers]


def _become_leader(state: NodeState) -> tuple[NodeState, list[Envelope]]:
    state = replace(state, role=ROLE_LEADER, leader_id=state.node_id,
                    timer_delay=heartbeat_delay(state))
    return state, _broadcast(state, Heartbeat(state.current_term, state.node_id))


def _start_election(state: NodeState, rng: random.Random,
                    ) -> tuple[NodeState, list[Envelope]]:
    state = replace(state,
                    role=ROLE_CANDIDATE,
                    current_term=state.current_term + 1,
                    voted_for=state.node_id,
                    votes=frozenset({state.node_id}),
                    leader_id=None,
                    timer_delay=election_delay(state, rng))
    if len(state.votes) >= state.majority:  # single-node cluster
        return _become_leader(state)
    return state, _broadcast(state, VoteRequest(state.current_term, state.node_id))


def _step_down(state: NodeState, term: int) -> NodeState:
    return replace(state, role=ROLE_FOLLOWER, current_term=term,
                   voted_for=None, votes=frozenset())


def election_step(state: NodeState, event, rng: random.Random,
                  now: float = 0.0) -> tuple[NodeState, list[Envelope]]:
    """Advance one node by one event; returns (new state, messages to send).

    Malformed events are dropped and counted, never raised.
    """
    state = replace(state, timer_delay=None)

    if not _is_wellformed(event):
        return replace(state, malformed_dropped=state.malformed_dropped + 1), []

    if isinstance(event, Timeout):
        if state.role == ROLE_LEADER:
            return replace(state, timer_delay=heartbeat_delay(state)), \
                _broadcast(state, Heartbeat(state.current_term, state.node_id))
        return _start_election(state, rng)

    if isinstance(event, VoteRequest):
        if event.term > state.current_term:
            state = _step_down(state, event.term)
        granted = (event.term == state.current_term
                   and state.voted_for in (None, event.candidate))
        reply = [Envelope(event.candidate,
                          VoteResponse(state.current_term, state.node_id, granted))]
        if granted:
            state = replace(state, voted_for=event.candidate,
                            timer_delay=election_delay(state, rng))
        return state, reply

    if isinstance(event, VoteResponse):
        if event.term > state.current_term:
            return _step_down(state, event.term), []
        if (state.role == ROLE_CANDIDATE and event.term == state.current_term
                and event.granted):
            state = replace(state, votes=state.votes | {event.voter})
            if len(state.votes) >= state.majority:
                return _become_leader(state)
        return state, []

    # Heartbeat
    if event.term < state.current_term:
        return state, []
    if event.term > state.current_term or state.role != ROLE_FOLLOWER:
        state = _step_down(state, event.term)
    state = replace(state, leader_id=event.leader, last_heartbeat_at=now,
                    timer_delay=election_delay(state, rng))
    return state, []


# -- wire conversion (used by transports; simulation passes events directly) --

_EVENT_TYPES = {"vote_request": VoteRequest, "vote_response": VoteResponse,
                "heartbeat": Heartbeat}


def event_to_wire(event, sender: str) -> dict:
    if isinstance(event, VoteRequest):
        return {"msg_type": "vote_request", "term": event.term, "sender": sender,
                "payload": {"candidate": event.candidate}}
    if isinstance(event, VoteResponse):
        return {"msg_type": "vote_response", "term": event.term, "sender": sender,
                "payload": {"voter": event.voter, "granted": event.granted}}
    if isinstance(event, Heartbeat):
        return {"msg_type": "heartbeat", "term": event.term, "sender": sender,
                "payload": {"leader": event.leader}}
    raise TypeError(f"not a wire event: {type(event).__name__}")


def wire_to_event(message: dict):
    """Decode an envelope dict; anything unparseable comes back as-is so
    election_step can count it as malformed."""
    try:
        msg_type = message["msg_type"]
        term = message["term"]
        payload = message["payload"]
        if msg_type == "vote_request":
            return VoteRequest(term, payload["candidate"])
        if msg_type == "vote_response":
            return VoteResponse(term, payload["voter"], payload["granted"])
        if msg_type == "heartbeat":
            return Heartbeat(term, payload["leader"])
    except (TypeError, KeyError):
        pass
    return message
