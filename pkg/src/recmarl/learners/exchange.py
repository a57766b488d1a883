"""One-hop message passing between agents."""

from __future__ import annotations

from recmarl.network_mdp import InteractionGraph


class LocalityViolation(RuntimeError):
    """An agent tried to read a message from outside its closed neighborhood."""


class NeighborExchange:
    """Per-round mailbox; agent n may only read messages posted by agents in N(n)."""

    def __init__(self, graph: InteractionGraph):
        self.graph = graph
        self._box: dict[tuple[int, str], object] = {}
        self.reads = 0

    def post(self, sender: int, key: str, payload) -> None:
        self._box[(sender, key)] = payload

    def read(self, reader: int, sender: int, key: str):
        if not self.graph.are_neighbors(reader, sender):
            raise LocalityViolation(f"agent {reader} read '{key}' from non-neighbor {sender}")
        self.reads += 1
        return self._box[(sender, key)]

    def clear(self) -> None:
        self._box.clear()
