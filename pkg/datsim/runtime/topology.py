"""Communication graphs of the simulated cluster and per-edge bit accounting.

Parameter-server clusters are stars: every worker uploads to ``SERVER`` over an
``up`` edge and receives the aggregate over a ``down`` edge. All-reduce
clusters have no server; every worker sends its gradient to every peer.
"""
from typing import Dict, List, Mapping, Tuple

import networkx as nx  # type: ignore

from .config import Topology

SERVER = "server"

UP = "up"
DOWN = "down"
PEER = "peer"


def build_topology(topology: Topology, workers: int) -> nx.DiGraph:
    graph = nx.DiGraph()
    graph.add_nodes_from(range(workers), role="worker")
    if topology == "parameter-server":
        graph.add_node(SERVER, role="server")
        for w in range(workers):
            graph.add_edge(w, SERVER, kind=UP)
            graph.add_edge(SERVER, w, kind=DOWN)
    else:
        for src in range(workers):
            for dst in range(workers):
                if src != dst:
                    graph.add_edge(src, dst, kind=PEER)
    return graph


def worker_nodes(graph: nx.DiGraph) -> List[int]:
    """Workers in reduction order (ascending id)."""
    return sorted(n for n, role in graph.nodes(data="role") if role == "worker")


def account_round(
    graph: nx.DiGraph, upload_bits: Mapping[int, int], broadcast_bits: int
) -> Tuple[int, int]:
    """Total (worker-to-server or peer, server-to-worker) bits of one round.

    ``upload_bits`` holds the size of each worker's outgoing gradient message;
    ``broadcast_bits`` the size of the aggregate sent back by the server.
    """
    totals: Dict[str, int] = {UP: 0, DOWN: 0, PEER: 0}
    for src, _, kind in graph.edges(data="kind"):
        totals[kind] += broadcast_bits if kind == DOWN else upload_bits[src]
    return totals[UP] + totals[PEER], totals[DOWN]

