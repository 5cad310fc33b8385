"""Pure-Python versions of the compiled kernels."""

from collections import deque


def bfs_to(indptr, indices, source, out):
    """Breadth-first hop counts from ``source`` over CSR arcs, written into ``out``.

    ``out`` must be pre-filled with -1. Pass the reversed CSR to get
    distances *to* ``source``.
    """
    out[source] = 0
    queue = deque([source])
    ip = indptr.tolist()
    ix = indices.tolist()
    dist = [-1] * len(out)
    dist[source] = 0
    while queue:
        u = queue.popleft()
        d = dist[u] + 1
        for k in range(ip[u], ip[u + 1]):
            v = ix[k]
            if dist[v] < 0:
                dist[v] = d
                queue.append(v)
    out[:] = dist
