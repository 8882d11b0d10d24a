"""Word lattices: validation, text I/O, forward-backward arc posteriors."""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

EPSILON = "<eps>"


class LatticeError(ValueError):
    pass


@dataclass(frozen=True)
class Arc:
    src: int
    dst: int
    word: str
    acoustic_cost: float
    lm_cost: float

    @property
    def cost(self) -> float:
        return self.acoustic_cost + self.lm_cost


@dataclass(frozen=True)
class Lattice:
    nodes: dict  # node id -> frame index
    arcs: tuple
    start: int
    end: int

    def __post_init__(self):
        object.__setattr__(self, "nodes", dict(self.nodes))
        object.__setattr__(self, "arcs", tuple(self.arcs))
        self.validate()

    def validate(self) -> None:
        if self.start not in self.nodes or self.end not in self.nodes:
            raise LatticeError("start and end must be lattice nodes")
        out_arcs = defaultdict(list)
        in_arcs = defaultdict(list)
        for k, arc in enumerate(self.arcs):
            if arc.src not in self.nodes or arc.dst not in self.nodes:
                raise LatticeError(f"arc {k} references an unknown node")
            if self.nodes[arc.dst] < self.nodes[arc.src]:
                raise LatticeError(f"arc {k} goes backwards in time")
            if not (np.isfinite(arc.acoustic_cost) and np.isfinite(arc.lm_cost)):
                raise LatticeError(f"arc {k} has non-finite cost")
            out_arcs[arc.src].append(k)
            in_arcs[arc.dst].append(k)
        indeg = {n: len(in_arcs[n]) for n in self.nodes}
        queue = deque(sorted(n for n, d in indeg.items() if d == 0))
        order = []
        while queue:
            n = queue.popleft()
            order.append(n)
            for k in out_arcs[n]:
                m = self.arcs[k].dst
                indeg[m] -= 1
                if indeg[m] == 0:
                    queue.append(m)
        if len(order) != len(self.nodes):
            raise LatticeError("lattice contains a cycle")
        reach_fwd = _reach(self.start, out_arcs, lambda k: self.arcs[k].dst)
        reach_bwd = _reach(self.end, in_arcs, lambda k: self.arcs[k].src)
        if reach_fwd != set(self.nodes):
            raise LatticeError(f"nodes unreachable from start: {sorted(set(self.nodes) - reach_fwd)}")
        if reach_bwd != set(self.nodes):
            raise LatticeError(f"nodes that cannot reach end: {sorted(set(self.nodes) - reach_bwd)}")
        object.__setattr__(self, "_order", order)
        object.__setattr__(self, "_out", dict(out_arcs))
        object.__setattr__(self, "_in", dict(in_arcs))

    def topological_order(self) -> list[int]:
        return list(self._order)

    def out_arcs(self, node: int) -> list[int]:
        return self._out.get(node, [])

    def in_arcs(self, node: int) -> list[int]:
        return self._in.get(node, [])

    def span(self, k: int) -> tuple[int, int]:
        arc = self.arcs[k]
        return self.nodes[arc.src], self.nodes[arc.dst]


def _reach(root, adjacency, step) -> set:
    seen = {root}
    stack = [root]
    while stack:
        n = stack.pop()
        for k in adjacency.get(n, []):
            m = step(k)
            if m not in seen:
                seen.add(m)
                stack.append(m)
    return seen


def forward_backward(lattice: Lattice, scale: float = 1.0):
    """Log forward/backward scores per node and total log score; arc score is ``-scale * cost``."""
    alpha = {n: -np.inf for n in lattice.nodes}
    beta = {n: -np.inf for n in lattice.nodes}
    alpha[lattice.start] = 0.0
    beta[lattice.end] = 0.0
    order = lattice.topological_order()
    for n in order:
        if n == lattice.start:
            continue
        incoming = [alpha[lattice.arcs[k].src] - scale * lattice.arcs[k].cost for k in lattice.in_arcs(n)]
        alpha[n] = logsumexp(incoming) if incoming else -np.inf
    for n in reversed(order):
        if n == lattice.end:
            continue
        outgoing = [beta[lattice.arcs[k].dst] - scale * lattice.arcs[k].cost for k in lattice.out_arcs(n)]
        beta[n] = logsumexp(outgoing) if outgoing else -np.inf
    return alpha, beta, alpha[lattice.end]


def arc_posteriors(lattice: Lattice, scale: float = 1.0) -> np.ndarray:
    """Posterior probability that a path traverses each arc."""
    if not lattice.arcs:
        return np.zeros(0)
    alpha, beta, total = forward_backward(lattice, scale)
    post = np.array(
        [np.exp(alpha[a.src] - scale * a.cost + beta[a.dst] - total) for a in lattice.arcs]
    )
    return np.clip(post, 0.0, 1.0)


def best_path_arcs(lattice: Lattice) -> list[int]:
    """Minimum-cost start-to-end arc sequence; ties resolved by arc order."""
    dist = {n: np.inf for n in lattice.nodes}
    back = {}
    dist[lattice.start] = 0.0
    for n in lattice.topological_order():
        for k in lattice.in_arcs(n):
            arc = lattice.arcs[k]
            cand = dist[arc.src] + arc.cost
            if cand < dist[n]:
                dist[n] = cand
                back[n] = k
    path = []
    n = lattice.end
    while n != lattice.start:
        k = back[n]
        path.append(k)
        n = lattice.arcs[k].src
    return path[::-1]


def enumerate_paths(lattice: Lattice, limit: int = 100000) -> list[list[int]]:
    """All start-to-end arc sequences (for small lattices)."""
    paths = []
    stack = [(lattice.start, [])]
    while stack:
        n, prefix = stack.pop()
        if n == lattice.end:
            paths.append(prefix)
            if len(paths) > limit:
                raise LatticeError("too many paths to enumerate")
            continue
        for k in reversed(lattice.out_arcs(n)):
            stack.append((lattice.arcs[k].dst, prefix + [k]))
    return paths


def write_lattice(lattice: Lattice, path) -> None:
    lines = [f"start {lattice.start}", f"end {lattice.end}"]
    lines += [f"node {n} {t}" for n, t in sorted(lattice.nodes.items())]
    lines += [f"{a.src} {a.dst} {a.word} {a.acoustic_cost!r} {a.lm_cost!r}" for a in lattice.arcs]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_lattice(path) -> Lattice:
    start = end = None
    nodes = {}
    arcs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            try:
                if parts[0] == "start" and len(parts) == 2:
                    start = int(parts[1])
                elif parts[0] == "end" and len(parts) == 2:
                    end = int(parts[1])
                elif parts[0] == "node" and len(parts) == 3:
                    nodes[int(parts[1])] = int(parts[2])
                elif len(parts) == 5:
                    arcs.append(Arc(int(parts[0]), int(parts[1]), parts[2], float(parts[3]), float(parts[4])))
                else:
                    raise ValueError("unrecognized line")
            except ValueError as exc:
                raise LatticeError(f"{path}:{lineno}: {exc}") from None
    if start is None or end is None:
        raise LatticeError(f"{path}: missing start or end header")
    return Lattice(nodes, arcs, start, end)
