"""Graph utilities: union-find and budgeted exact longest-path search."""

from __future__ import annotations

from dataclasses import dataclass


class UnionFind:
    """Disjoint sets over 0..n-1 with path compression and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]

    def groups(self):
        out = {}
        for x in range(len(self.parent)):
            out.setdefault(self.find(x), []).append(x)
        return list(out.values())


@dataclass
class PathSearchResult:
    """Longest simple path found; ``length`` counts edges."""

    length: int
    path: tuple
    truncated: bool
    expanded: int


def connected_components(adjacency):
    """Components of an adjacency list, each sorted, ordered by first node."""
    n = len(adjacency)
    seen = [False] * n
    comps = []
    for start in range(n):
        if seen[start]:
            continue
        stack = [start]
        seen[start] = True
        comp = []
        while stack:
            v = stack.pop()
            comp.append(v)
            for w in adjacency[v]:
                if not seen[w]:
                    seen[w] = True
                    stack.append(w)
        comps.append(sorted(comp))
    return comps


def _reachable_count(adjacency, origin, visited):
    """Nodes reachable from origin avoiding ``visited`` (origin excluded)."""
    stack = [origin]
    local = {origin}
    count = 0
    while stack:
        v = stack.pop()
        for w in adjacency[v]:
            if w not in visited and w not in local:
                local.add(w)
                count += 1
                stack.append(w)
    return count


def _dp_longest(adj, state_cap: int, length_cap=None):
    """Exact longest path by layered DP over (visited-mask, endpoint) states.

    Returns (length, path, truncated, states) or None when the state count
    would exceed ``state_cap`` (caller falls back to branch-and-bound DFS).
    States of one layer share the mask popcount, so layers never overlap and
    reconstruction walks the layers backwards.
    """
    k = len(adj)
    layers = [{(1 << v) * k + v for v in range(k)}]
    total = k
    truncated = False
    while True:
        if length_cap is not None and len(layers) - 1 >= length_cap:
            truncated = True
            break
        nxt = set()
        for code in layers[-1]:
            mask, v = divmod(code, k)
            for w in adj[v]:
                bit = 1 << w
                if not mask & bit:
                    nxt.add((mask | bit) * k + w)
        if not nxt:
            break
        total += len(nxt)
        if total > state_cap:
            return None
        layers.append(nxt)
    code = min(layers[-1])
    mask, v = divmod(code, k)
    path = [v]
    for t in range(len(layers) - 2, -1, -1):
        prev_mask = mask & ~(1 << v)
        for u in adj[v]:
            if prev_mask & (1 << u) and prev_mask * k + u in layers[t]:
                mask, v = prev_mask, u
                path.append(u)
                break
        else:
            raise AssertionError("path reconstruction failed")
    path.reverse()
    return len(path) - 1, path, truncated, total


def _dfs_longest(adjacency, comp, best_len, length_cap, budget):
    """Branch-and-bound DFS within one component; returns the improved best."""
    best_path = None
    truncated = False
    expanded = 0
    comp_size = len(comp)
    for start in comp:
        if comp_size - 1 <= best_len or truncated:
            break
        path = [start]
        visited = {start}
        iters = [iter(adjacency[start])]
        while iters:
            if expanded >= budget or (length_cap is not None
                                      and best_len >= length_cap):
                truncated = True
                break
            it = iters[-1]
            advanced = False
            for w in it:
                if w in visited:
                    continue
                rest = _reachable_count(adjacency, w, visited)
                if len(path) + rest <= best_len:
                    continue
                visited.add(w)
                path.append(w)
                iters.append(iter(adjacency[w]))
                expanded += 1
                if len(path) - 1 > best_len:
                    best_len = len(path) - 1
                    best_path = tuple(path)
                advanced = True
                break
            if not advanced:
                iters.pop()
                visited.discard(path.pop())
    return best_len, best_path, truncated, expanded


def longest_path(adjacency, length_cap=None, node_budget=2_000_000,
                 dp_state_cap=1_000_000) -> PathSearchResult:
    """Exact longest simple path (in edges) over all components.

    Small components are solved exactly by the layered mask DP; components
    that overflow the DP state cap (typically dense ones, where a Hamiltonian
    path is found quickly) fall back to branch-and-bound DFS with a
    reachability bound.  Truncation via ``node_budget`` or ``length_cap`` is
    honest: the best path found so far is returned and flagged.
    """
    n = len(adjacency)
    if n == 0:
        return PathSearchResult(0, (), False, 0)
    best_len = 0
    best_path = (0,)
    truncated = False
    expanded = 0

    for comp in connected_components(adjacency):
        comp_size = len(comp)
        if comp_size - 1 <= best_len:
            continue
        local = {v: i for i, v in enumerate(comp)}
        sub = [[local[w] for w in adjacency[v] if w in local] for v in comp]
        solved = None
        if comp_size <= 64:
            solved = _dp_longest(sub, dp_state_cap, length_cap=length_cap)
        if solved is not None:
            length, sub_path, comp_trunc, states = solved
            expanded += states
            truncated = truncated or comp_trunc
            if length > best_len:
                best_len = length
                best_path = tuple(comp[i] for i in sub_path)
        else:
            length, sub_path, comp_trunc, spent = _dfs_longest(
                sub, list(range(comp_size)), best_len, length_cap,
                max(0, node_budget - expanded))
            expanded += spent
            truncated = truncated or comp_trunc
            if sub_path is not None and length > best_len:
                best_len = length
                best_path = tuple(comp[i] for i in sub_path)
        if length_cap is not None and best_len >= length_cap:
            truncated = True
            break
        if expanded >= node_budget:
            truncated = True
            break
    return PathSearchResult(best_len, best_path, truncated, expanded)
