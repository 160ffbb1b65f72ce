"""Cluster runtime pieces: election, partitioning, model cache, transport."""

from .election import (
    Envelope,
    Heartbeat,
    NodeState,
    ROLE_CANDIDATE,
    ROLE_FOLLOWER,
    ROLE_LEADER,
    Timeout,
    VoteRequest,
    VoteResponse,
    election_delay,
    election_step,
    event_to_wire,
    wire_to_event,
)
from .partition import Assignment, partition_models, rendezvous_score
from .cache import CacheEntry, ModelCache, cache_get
from .transport import InProcessBus, TcpTransport, decode_frame, encode_frame
from .simulation import ClusterSim, elect_first_leader, kill_leader_scenario

__all__ = [
    "NodeState", "Timeout", "VoteRequest", "VoteResponse", "Heartbeat",
    "Envelope", "ROLE_FOLLOWER", "ROLE_CANDIDATE", "ROLE_LEADER",
    "election_step", "election_delay", "event_to_wire", "wire_to_event",
    "Assignment", "partition_models", "rendezvous_score",
    "ModelCache", "CacheEntry", "cache_get",
    "InProcessBus", "TcpTransport", "encode_frame", "decode_frame",
    "ClusterSim", "elect_first_leader", "kill_leader_scenario",
]
