# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled kernels: reverse BFS and one PIBT planning step.

The step kernel runs the inheritance/backtracking recursion with an explicit
stack; results and counters are identical to ``pibt.engine``'s Python path.
"""

import numpy as np


def bfs_to(const int[::1] indptr, const int[::1] indices, int source, int[::1] out):
    """Hop counts from ``source`` over CSR arcs into ``out`` (pre-filled with -1)."""
    cdef Py_ssize_t n = out.shape[0]
    cdef int[::1] queue = np.empty(n, dtype=np.int32)
    cdef Py_ssize_t head = 0, tail = 0, k
    cdef int u, v, d
    out[source] = 0
    queue[tail] = source
    tail += 1
    with nogil:
        while head < tail:
            u = queue[head]
            head += 1
            d = out[u] + 1
            for k in range(indptr[u], indptr[u + 1]):
                v = indices[k]
                if out[v] < 0:
                    out[v] = d
                    queue[tail] = v
                    tail += 1


cdef inline void _enter(
    int k, int parent,
    const int[::1] indptr, const int[::1] indices,
    const int[::1] pos, const int[::1] goal_row, const int[:, ::1] dist,
    int[::1] owner, int[::1] reserved, char[::1] undecided,
    int[::1] cand, long long[::1] keys, int[::1] cand_len, int[::1] cursor,
    long long[::1] counters, int width, long long n_nodes,
) noexcept nogil:
    cdef int here = pos[k]
    cdef int excluded = pos[parent] if parent >= 0 else -1
    cdef int base = k * width
    cdef int m = 0, j, v, o, row = goal_row[k]
    cdef Py_ssize_t e
    cdef long long key, primary, occ
    undecided[k] = 0
    counters[0] += 1
    counters[2] += 1 + indptr[here + 1] - indptr[here]
    for e in range(indptr[here] - 1, indptr[here + 1]):
        v = here if e < indptr[here] else indices[e]
        if reserved[v] != -1 or v == excluded:
            continue
        o = owner[v]
        occ = 1 if (o != -1 and undecided[o]) else 0
        if row >= 0:
            primary = dist[row, v]
        else:
            primary = 0 if v == here else 1
        key = (primary * 2 + occ) * n_nodes + v
        j = m
        while j > 0 and keys[base + j - 1] > key:
            keys[base + j] = keys[base + j - 1]
            cand[base + j] = cand[base + j - 1]
            j -= 1
        keys[base + j] = key
        cand[base + j] = v
        m += 1
    cand_len[k] = m
    cursor[k] = 0


def pibt_step(
    const int[::1] indptr,
    const int[::1] indices,
    const int[::1] pos,
    const int[::1] goal_row,
    const int[:, ::1] dist,
    const int[::1] order,
    int max_degree,
    int[::1] next_pos,
    long long[::1] counters,
):
    """Plan one timestep for all agents.

    ``order`` lists agents by descending priority; ``goal_row[i]`` indexes
    ``dist`` (distances to agent i's goal) or is -1 for goal-less agents.
    ``counters`` receives (pibt_calls, backtracks, node_evaluations).
    """
    cdef int n_agents = pos.shape[0]
    cdef long long n_nodes = indptr.shape[0] - 1
    cdef int width = max_degree + 1
    cdef int[::1] owner = np.full(n_nodes, -1, dtype=np.int32)
    cdef int[::1] reserved = np.full(n_nodes, -1, dtype=np.int32)
    cdef char[::1] undecided = np.ones(n_agents, dtype=np.int8)
    cdef int[::1] cand = np.empty(n_agents * width, dtype=np.int32)
    cdef long long[::1] keys = np.empty(n_agents * width, dtype=np.int64)
    cdef int[::1] cand_len = np.zeros(n_agents, dtype=np.int32)
    cdef int[::1] cursor = np.zeros(n_agents, dtype=np.int32)
    cdef int[::1] stack = np.empty(n_agents, dtype=np.int32)
    cdef int depth, r, root, i, k, v, res, pushed, a

    counters[0] = 0
    counters[1] = 0
    counters[2] = 0
    for a in range(n_agents):
        owner[pos[a]] = a

    with nogil:
        for r in range(n_agents):
            root = order[r]
            if not undecided[root]:
                continue
            _enter(root, -1, indptr, indices, pos, goal_row, dist, owner, reserved,
                   undecided, cand, keys, cand_len, cursor, counters, width, n_nodes)
            stack[0] = root
            depth = 1
            res = -1
            while depth > 0:
                i = stack[depth - 1]
                if res != -1:
                    # a child has just answered
                    counters[1] += 1
                    if res == 1:
                        depth -= 1
                        continue
                    res = -1
                pushed = 0
                while cursor[i] < cand_len[i]:
                    v = cand[i * width + cursor[i]]
                    cursor[i] += 1
                    if reserved[v] != -1:
                        continue
                    reserved[v] = i
                    next_pos[i] = v
                    k = owner[v]
                    if k != -1 and undecided[k]:
                        _enter(k, i, indptr, indices, pos, goal_row, dist, owner, reserved,
                               undecided, cand, keys, cand_len, cursor, counters, width, n_nodes)
                        stack[depth] = k
                        depth += 1
                        pushed = 1
                    else:
                        pushed = 2
                    break
                if pushed == 1:
                    continue
                depth -= 1
                if pushed == 2:
                    res = 1
                else:
                    next_pos[i] = pos[i]
                    reserved[pos[i]] = i
                    res = 0
