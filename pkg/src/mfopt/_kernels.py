"""Compiled inner loops shared by the public operators and both engines.

Everything here is deterministic; all randomness is drawn outside and passed
in as plain integer/float arrays. Positions and task indices are 0-based at
this level, city labels stay 1-based as in the rest of the package.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def decode_into(genome, dk, out):
    """Write the order-preserving subsequence of labels <= dk into out.

    Returns the number of labels written (dk for a valid unified genome).
    """
    m = 0
    for i in range(genome.shape[0]):
        v = genome[i]
        if v <= dk:
            out[m] = v
            m += 1
    return m


@njit(cache=True)
def tour_length_m(tour, m, dist):
    """Closed-tour length over the first m entries of tour (1-based labels)."""
    total = np.int64(0)
    for i in range(m - 1):
        total += dist[tour[i] - 1, tour[i + 1] - 1]
    total += dist[tour[m - 1] - 1, tour[0] - 1]
    return total


@njit(cache=True)
def tour_length(tour, dist):
    return tour_length_m(tour, tour.shape[0], dist)


@njit(cache=True)
def ox_fill(p1, p2, lo, hi, child, seen):
    """Order crossover: keep p1[lo..hi] in place, fill the rest after hi
    (wrapping) with the unseen values of p2 in cyclic order starting after hi.

    lo/hi are 0-based inclusive; seen must have room for the largest label.
    """
    n = p1.shape[0]
    for v in range(seen.shape[0]):
        seen[v] = False
    for i in range(lo, hi + 1):
        v = p1[i]
        child[i] = v
        seen[v] = True
    pos = (hi + 1) % n
    for t in range(n):
        v = p2[(hi + 1 + t) % n]
        if not seen[v]:
            child[pos] = v
            pos = (pos + 1) % n


@njit(cache=True)
def reverse_segment(arr, lo, hi):
    """In-place reversal of arr[lo..hi] (0-based inclusive)."""
    a = lo
    b = hi
    while a < b:
        tmp = arr[a]
        arr[a] = arr[b]
        arr[b] = tmp
        a += 1
        b -= 1


@njit(cache=True)
def first_improving_move(tour, m, dist, start_row):
    """Apply the first strictly improving 2-opt move found on tour[:m].

    Candidate segment starts i are scanned cyclically from start_row, each
    with all ends j > i; the full reversal (i = 0, j = m-1) is skipped as a
    no-op. Returns True when a move was applied; False means the tour is
    2-opt optimal.
    """
    for ii in range(m - 1):
        i = (start_row + ii) % (m - 1)
        prev = tour[m - 1] if i == 0 else tour[i - 1]
        ti = tour[i]
        d_prev_ti = dist[prev - 1, ti - 1]
        for j in range(i + 1, m):
            if i == 0 and j == m - 1:
                continue
            nxt = tour[(j + 1) % m]
            delta = (dist[prev - 1, tour[j] - 1] + dist[ti - 1, nxt - 1]
                     - d_prev_ti - dist[tour[j] - 1, nxt - 1])
            if delta < 0:
                reverse_segment(tour, i, j)
                return True
    return False


@njit(cache=True)
def assign_skill_balanced(ranks):
    """Scalar fitness and skill factor from a (P, K) factorial-rank matrix.

    phi = 1 / min_k rank; the skill factor is the arg-min task, ties going to
    the tied task currently holding the fewest individuals (then the lowest
    task index), scanning the population in order. Returns 0-based skills.
    """
    P, K = ranks.shape
    phi = np.empty(P, np.float64)
    skill = np.empty(P, np.int64)
    counts = np.zeros(K, np.int64)
    for p in range(P):
        rmin = ranks[p, 0]
        for k in range(1, K):
            if ranks[p, k] < rmin:
                rmin = ranks[p, k]
        best_k = -1
        best_c = np.int64(0)
        for k in range(K):
            if ranks[p, k] == rmin:
                if best_k < 0 or counts[k] < best_c:
                    best_k = k
                    best_c = counts[k]
        counts[best_k] += 1
        skill[p] = best_k
        phi[p] = 1.0 / rmin
    return phi, skill


@njit(cache=True)
def mfcga_sweep(genomes, costs, skill, nbr_idx, dist, dims,
                r_nbr, r_oxlo, r_oxhi, r_mutorigin,
                start_cell, n_steps,
                evals_done, sample_every, next_sample,
                best_cost, best_tour,
                traj_evals, traj_cost, traj_n,
                ledger,
                child_cx, child_mut, seen, tour_buf, pos_buf):
    """Asynchronous cellular updates for n_steps cells starting at start_cell.

    Per cell: mate with a random Moore neighbour (order crossover) and apply
    one improving 2-opt move to the incumbent's decoded tour (identity when
    it is already 2-opt optimal); evaluate both offspring on the cell's own
    task only; keep the best of the three. The crossover child replaces the
    cell only when strictly better than both the incumbent and the mutated
    child, and that event is logged as a transfer episode from the
    neighbour's skill factor to the cell's. Mutant ties beat the crossover
    child; the incumbent survives all ties.

    Mutates genomes/costs/best_cost/best_tour/traj_*/ledger in place and
    returns updated (evals_done, next_sample, traj_n).
    """
    P = genomes.shape[0]
    D = genomes.shape[1]
    K = costs.shape[1]
    for s in range(n_steps):
        p = (start_cell + s) % P
        tau = skill[p]
        dk = dims[tau]
        dmat = dist[tau]

        j = nbr_idx[p, r_nbr[s]]
        ox_fill(genomes[p], genomes[j], r_oxlo[s], r_oxhi[s], child_cx, seen)
        m = decode_into(child_cx, dk, tour_buf)
        c_cx = tour_length_m(tour_buf, m, dmat)
        evals_done += 1
        if c_cx < best_cost[tau]:
            best_cost[tau] = c_cx
            for i in range(m):
                best_tour[tau, i] = tour_buf[i]

        # mutant: one improving 2-opt move on the incumbent's decoded tour,
        # written back into the genome slots holding this task's labels
        npos = 0
        for i in range(D):
            v = genomes[p, i]
            child_mut[i] = v
            if v <= dk:
                pos_buf[npos] = i
                tour_buf[npos] = v
                npos += 1
        first_improving_move(tour_buf, npos, dmat, r_mutorigin[s] % (npos - 1))
        for i in range(npos):
            child_mut[pos_buf[i]] = tour_buf[i]
        c_mut = tour_length_m(tour_buf, npos, dmat)
        evals_done += 1
        if c_mut < best_cost[tau]:
            best_cost[tau] = c_mut
            for i in range(npos):
                best_tour[tau, i] = tour_buf[i]

        c_par = costs[p, tau]
        if c_cx < c_par and c_cx < c_mut:
            for i in range(D):
                genomes[p, i] = child_cx[i]
            for k in range(K):
                costs[p, k] = np.inf
            costs[p, tau] = c_cx
            ledger[skill[j], tau] += 1
        elif c_mut < c_par:
            for i in range(D):
                genomes[p, i] = child_mut[i]
            for k in range(K):
                costs[p, k] = np.inf
            costs[p, tau] = c_mut

        while next_sample <= evals_done:
            traj_evals[traj_n] = next_sample
            for k in range(K):
                traj_cost[traj_n, k] = best_cost[k]
            traj_n += 1
            next_sample += sample_every
    return evals_done, next_sample, traj_n


@njit(cache=True)
def mfea_offspring(genomes, skill, dist, dims,
                   r_pa, r_pb, r_gate, cx_prob,
                   r_taupick, r_mutgate, mut_prob,
                   r_oxlo, r_oxhi, r_mutorigin,
                   off_genomes, off_costs, off_tau, off_src, off_iscx,
                   best_cost, best_tour, seen, tour_buf, pos_buf):
    """Produce one generation of offspring via assortative mating.

    Pair i mates parents (r_pa[i], r_pb[i]); it crosses over when the skill
    factors match or r_gate[i] < cx_prob, producing the two order-crossover
    children, otherwise both parents are copied. Every child is assigned one
    evaluation task (a uniformly chosen parent's skill factor for crossover
    children, the copying parent's own for copies), then mutates with
    probability mut_prob (one improving 2-opt move on its decoded tour for
    that task) and is evaluated on that task only. Fills the off_* arrays
    and updates the running best per task; returns evaluations consumed.
    """
    D = genomes.shape[1]
    K = off_costs.shape[1]
    half = r_pa.shape[0]
    for i in range(half):
        a = r_pa[i]
        b = r_pb[i]
        cross = (skill[a] == skill[b]) or (r_gate[i] < cx_prob)
        for side in range(2):
            c = 2 * i + side
            if cross:
                if side == 0:
                    ox_fill(genomes[a], genomes[b], r_oxlo[c], r_oxhi[c],
                            off_genomes[c], seen)
                else:
                    ox_fill(genomes[b], genomes[a], r_oxlo[c], r_oxhi[c],
                            off_genomes[c], seen)
                if r_taupick[c] == 0:
                    tau = skill[a]
                    src = skill[b]
                else:
                    tau = skill[b]
                    src = skill[a]
            else:
                par = a if side == 0 else b
                for q in range(D):
                    off_genomes[c, q] = genomes[par, q]
                tau = skill[par]
                src = tau
            dk = dims[tau]
            if r_mutgate[c] < mut_prob:
                npos = 0
                for q in range(D):
                    if off_genomes[c, q] <= dk:
                        pos_buf[npos] = q
                        tour_buf[npos] = off_genomes[c, q]
                        npos += 1
                first_improving_move(tour_buf, npos, dist[tau],
                                     r_mutorigin[c] % (npos - 1))
                for q in range(npos):
                    off_genomes[c, pos_buf[q]] = tour_buf[q]
                cost = tour_length_m(tour_buf, npos, dist[tau])
                m = npos
            else:
                m = decode_into(off_genomes[c], dk, tour_buf)
                cost = tour_length_m(tour_buf, m, dist[tau])
            for k in range(K):
                off_costs[c, k] = np.inf
            off_costs[c, tau] = cost
            off_tau[c] = tau
            off_src[c] = src
            off_iscx[c] = cross
            if cost < best_cost[tau]:
                best_cost[tau] = cost
                for q in range(m):
                    best_tour[tau, q] = tour_buf[q]
    return 2 * half
