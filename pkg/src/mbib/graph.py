"""Directed acyclic graphs over named nodes, with Markov blanket queries.

Nodes are identified by name. All derived node sets are returned as lists
ordered by the declared node order, so output is deterministic.
"""

from __future__ import annotations

from .errors import CycleDetected, ConfigError, UnknownNode


class Dag:
    """Immutable DAG. Acyclicity is checked at construction.

    Parameters
    ----------
    nodes : iterable of str
        Node names in declared order (unique, nonempty).
    edges : iterable of (str, str)
        Directed (parent, child) pairs between declared nodes.
    """

    def __init__(self, nodes, edges=()):
        nodes = tuple(nodes)
        if len(nodes) == 0:
            raise ConfigError("a DAG needs at least one node")
        seen = set()
        for v in nodes:
            if not isinstance(v, str) or not v:
                raise ConfigError(f"invalid node name: {v!r}")
            if v in seen:
                raise ConfigError(f"duplicate node name: {v!r}")
            seen.add(v)
        edge_list = []
        edge_set = set()
        for p, c in edges:
            if p not in seen:
                raise UnknownNode(p)
            if c not in seen:
                raise UnknownNode(c)
            if p == c:
                raise ConfigError(f"self loop on node {p!r}")
            if (p, c) not in edge_set:
                edge_set.add((p, c))
                edge_list.append((p, c))
        self._nodes = nodes
        self._index = {v: i for i, v in enumerate(nodes)}
        self._edges = frozenset(edge_set)
        self._parents = {v: [] for v in nodes}
        self._children = {v: [] for v in nodes}
        for p, c in edge_list:
            self._parents[c].append(p)
            self._children[p].append(c)
        for v in nodes:
            self._parents[v].sort(key=self._index.__getitem__)
            self._children[v].sort(key=self._index.__getitem__)
        self._topo = self._toposort()

    @property
    def nodes(self):
        return self._nodes

    @property
    def edges(self):
        """Edges sorted by (parent, child) declared order."""
        return sorted(self._edges, key=lambda e: (self._index[e[0]], self._index[e[1]]))

    def __contains__(self, name):
        return name in self._index

    def __eq__(self, other):
        if not isinstance(other, Dag):
            return NotImplemented
        return self._nodes == other._nodes and self._edges == other._edges

    def __hash__(self):
        return hash((self._nodes, self._edges))

    def _require(self, name):
        if name not in self._index:
            raise UnknownNode(name)

    def parents(self, name):
        self._require(name)
        return list(self._parents[name])

    def children(self, name):
        self._require(name)
        return list(self._children[name])

    def _toposort(self):
        # Kahn's algorithm; ties broken by declared node order.
        indeg = {v: len(self._parents[v]) for v in self._nodes}
        ready = [v for v in self._nodes if indeg[v] == 0]
        order = []
        while ready:
            v = min(ready, key=self._index.__getitem__)
            ready.remove(v)
            order.append(v)
            for c in self._children[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        if len(order) < len(self._nodes):
            raise CycleDetected(self._find_cycle({v for v in indeg if indeg[v] > 0}))
        return tuple(order)

    def _find_cycle(self, remaining):
        # Every remaining node has a parent among the remaining; walk back
        # until a node repeats, then report the loop in edge direction.
        v = min(remaining, key=self._index.__getitem__)
        trail = [v]
        pos = {v: 0}
        while True:
            v = next(p for p in self._parents[v] if p in remaining)
            if v in pos:
                cycle = trail[pos[v]:]
                cycle.reverse()
                return cycle
            pos[v] = len(trail)
            trail.append(v)

    def topological_order(self):
        """Nodes in topological order, ties broken by declared order."""
        return list(self._topo)

    def ancestors(self, name):
        """Proper ancestors of a node, ordered by declared node order."""
        self._require(name)
        out = set()
        stack = list(self._parents[name])
        while stack:
            v = stack.pop()
            if v not in out:
                out.add(v)
                stack.extend(self._parents[v])
        return sorted(out, key=self._index.__getitem__)

    def markov_blanket(self, target):
        """Parents, children, and co-parents of `target`'s children.

        Returns the blanket as a list ordered by declared node order.
        """
        self._require(target)
        blanket = set(self._parents[target])
        blanket.update(self._children[target])
        for c in self._children[target]:
            blanket.update(self._parents[c])
        blanket.discard(target)
        return sorted(blanket, key=self._index.__getitem__)


def validate(dag):
    """Return the topological order; raising happened at construction already."""
    return dag.topological_order()


def parse_dag(text):
    """Parse the plain-text DAG format.

    One `parent -> child` edge per line; a line holding a bare name declares
    an isolated node; `#` starts a comment. Node order is order of first
    mention.
    """
    nodes = []
    seen = set()
    edges = []

    def declare(name):
        if name not in seen:
            seen.add(name)
            nodes.append(name)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "->" in line:
            parts = [p.strip() for p in line.split("->")]
            if len(parts) != 2 or not all(parts):
                raise ConfigError(f"line {lineno}: expected 'parent -> child', got {raw!r}")
            p, c = parts
            if " " in p or " " in c:
                raise ConfigError(f"line {lineno}: node names cannot contain spaces: {raw!r}")
            declare(p)
            declare(c)
            edges.append((p, c))
        else:
            if " " in line:
                raise ConfigError(f"line {lineno}: node names cannot contain spaces: {raw!r}")
            declare(line)
    if not nodes:
        raise ConfigError("DAG text declares no nodes")
    return Dag(nodes, edges)


def format_dag(dag):
    """Inverse of parse_dag (up to comments and blank lines).

    Nodes are declared first so parse_dag recovers the declared order exactly.
    """
    lines = [str(v) for v in dag.nodes]
    lines.extend(f"{p} -> {c}" for p, c in dag.edges)
    return "\n".join(lines) + "\n"


def load_dag(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_dag(fh.read())


def save_dag(dag, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_dag(dag))
