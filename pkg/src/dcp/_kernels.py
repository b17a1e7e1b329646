"""Compiled inner loops for the particle system.

State layout shared by every kernel:

* ``tau[i]``  time of the last up-jump of particle i (load = exp(-alpha (clock - tau[i])))
* ``order``   permutation with the infected particles in ``order[:I]``
* ``pos``     inverse permutation of ``order``
* ``fs``      float state ``[clock, sum_x, sum_x2]``
* ``ist``     int state ``[I, events, events_since_refresh]``
"""
import math

import numba
import numpy as np

ABSORBED = 0
UP = 1
DOWN = 2
HORIZON = 3

REFRESH_EVERY = 10_000


@numba.njit(cache=True)
def refresh(tau, order, fs, ist, alpha):
    clock = fs[0]
    sx = 0.0
    sx2 = 0.0
    for j in range(ist[0]):
        x = math.exp(-alpha * (clock - tau[order[j]]))
        sx += x
        sx2 += x * x
    fs[1] = sx
    fs[2] = sx2
    ist[2] = 0


@numba.njit(cache=True)
def _swap(order, pos, a, b):
    ia = order[a]
    ib = order[b]
    order[a] = ib
    order[b] = ia
    pos[ib] = a
    pos[ia] = b


@numba.njit(cache=True)
def _advance(fs, d, alpha):
    if d > 0.0:
        f = math.exp(-alpha * d)
        fs[0] += d
        fs[1] *= f
        fs[2] *= f * f


@numba.njit(cache=True)
def propose(fs, ist, n, lam, alpha, r, rng):
    """Waiting time and kind of the next event (inf, ABSORBED) if none can occur.

    The infection hazard decays like exp(-alpha s); its integral is bounded
    by cap = lam (n - I) v_N / alpha, so the inversion may return no event.
    """
    I = ist[0]
    sx = fs[1]
    if I == 0:
        return math.inf, ABSORBED
    S = n - I
    d_up = math.inf
    if S > 0 and sx > 0.0 and lam > 0.0:
        cap = lam * S * (sx / n) / alpha
        e = rng.standard_exponential()
        if e < cap:
            d_up = -math.log1p(-e / cap) / alpha
    d_down = rng.standard_exponential() / (r * I)
    if d_up < d_down:
        return d_up, UP
    return d_down, DOWN


@numba.njit(cache=True)
def commit(tau, order, pos, fs, ist, n, alpha, d, kind, rng):
    """Advance by d and apply the jump; returns the particle index that jumped."""
    _advance(fs, d, alpha)
    I = ist[0]
    if kind == UP:
        j = I + rng.integers(0, n - I)
        i = order[j]
        _swap(order, pos, j, I)
        tau[i] = fs[0]
        fs[1] += 1.0
        fs[2] += 1.0
        ist[0] = I + 1
    else:
        j = rng.integers(0, I)
        i = order[j]
        x = math.exp(-alpha * (fs[0] - tau[i]))
        _swap(order, pos, j, I - 1)
        ist[0] = I - 1
        if ist[0] == 0:
            fs[1] = 0.0
            fs[2] = 0.0
        else:
            fs[1] = max(fs[1] - x, 0.0)
            fs[2] = max(fs[2] - x * x, 0.0)
    ist[1] += 1
    ist[2] += 1
    if ist[2] >= REFRESH_EVERY:
        refresh(tau, order, fs, ist, alpha)
    return i


@numba.njit(cache=True)
def step_exact(tau, order, pos, fs, ist, lam, alpha, r, rng, t_max):
    n = tau.size
    d, kind = propose(fs, ist, n, lam, alpha, r, rng)
    if kind == ABSORBED:
        return ABSORBED, -1
    if fs[0] + d > t_max:
        _advance(fs, t_max - fs[0], alpha)
        return HORIZON, -1
    i = commit(tau, order, pos, fs, ist, n, alpha, d, kind, rng)
    return kind, i


@numba.njit(cache=True)
def _record(fs, ist, n, alpha, t, g, out_m, out_v, out_v2):
    dt = t - fs[0]
    f = math.exp(-alpha * dt)
    out_m[g] = ist[0] / n
    out_v[g] = fs[1] * f / n
    out_v2[g] = fs[2] * f * f / n


@numba.njit(cache=True)
def run_exact(tau, order, pos, fs, ist, lam, alpha, r, rng, grid, T, out_m, out_v, out_v2):
    """Event loop up to T, recording pre-jump aggregates at each grid time."""
    n = tau.size
    G = grid.size
    g = 0
    while True:
        d, kind = propose(fs, ist, n, lam, alpha, r, rng)
        t_next = fs[0] + d
        while g < G and grid[g] < t_next:
            _record(fs, ist, n, alpha, grid[g], g, out_m, out_v, out_v2)
            g += 1
        if t_next > T:
            if fs[0] < T and kind != ABSORBED:
                _advance(fs, T - fs[0], alpha)
            elif kind == ABSORBED and fs[0] < T:
                fs[0] = T
            break
        commit(tau, order, pos, fs, ist, n, alpha, d, kind, rng)
    return g


@numba.njit(cache=True)
def step_euler(tau, order, pos, fs, ist, lam, alpha, r, dt, u, flags):
    """One Euler step; particle i consumes the uniform u[i]."""
    n = tau.size
    I0 = ist[0]
    v_n = fs[1] / n
    p_inf = -math.expm1(-lam * v_n * dt)
    p_rec = -math.expm1(-r * dt)
    t_new = fs[0] + dt
    for i in range(n):
        flags[i] = 0
        if pos[i] < I0:
            if u[i] < p_rec:
                flags[i] = 2
        elif u[i] < p_inf:
            flags[i] = 1
    jumps = 0
    for i in range(n):
        if flags[i] == 1:
            I = ist[0]
            _swap(order, pos, pos[i], I)
            tau[i] = t_new
            ist[0] = I + 1
            jumps += 1
        elif flags[i] == 2:
            I = ist[0]
            _swap(order, pos, pos[i], I - 1)
            ist[0] = I - 1
            jumps += 1
    fs[0] = t_new
    ist[1] += jumps
    refresh(tau, order, fs, ist, alpha)


@numba.njit(cache=True)
def run_euler(tau, order, pos, fs, ist, lam, alpha, r, rng, dt, nsteps, grid, out_m, out_v, out_v2):
    n = tau.size
    G = grid.size
    g = 0
    t0 = fs[0]
    u = np.empty(n)
    flags = np.zeros(n, dtype=np.int8)
    for k in range(nsteps):
        t_end = t0 + (k + 1) * dt
        while g < G and grid[g] < t_end - 1e-9 * dt:
            _record(fs, ist, n, alpha, grid[g], g, out_m, out_v, out_v2)
            g += 1
        for i in range(n):
            u[i] = rng.random()
        step_euler(tau, order, pos, fs, ist, lam, alpha, r, dt, u, flags)
        fs[0] = t_end
    while g < G and grid[g] <= fs[0] + 1e-9 * dt:
        _record(fs, ist, n, alpha, grid[g], g, out_m, out_v, out_v2)
        g += 1
    return g


@numba.njit(cache=True)
def hermite_uniform(h, y, dy, t):
    """Cubic Hermite interpolation of samples on the grid 0, h, 2h, ..."""
    last = y.size - 1
    s = t / h
    i = int(s)
    if i >= last:
        i = last - 1
    if i < 0:
        i = 0
    u = s - i
    u2 = u * u
    u3 = u2 * u
    return ((2 * u3 - 3 * u2 + 1) * y[i] + (u3 - 2 * u2 + u) * h * dy[i]
            + (-2 * u3 + 3 * u2) * y[i + 1] + (u3 - u2) * h * dy[i + 1])


@numba.njit(cache=True)
def run_coupled(tau, sig, lam, alpha, r, T, rng, h, v_lim, dv_lim):
    """Particle system and i.i.d. limit copies driven by the same Poisson measures.

    Candidate marks arrive at total rate n (lam + r); a mark u < lam on the
    up-measure of particle i is accepted by the particle system iff
    u < lam v_N(t-) and by the limit copy iff u < lam v(t-). Down marks are
    accepted by whichever copy is infected. Returns per-particle
    sup_t |x_i - xbar_i| + |sigma_i - sigmabar_i|.
    """
    n = tau.size
    taub = tau.copy()
    sigb = sig.copy()
    err = np.zeros(n)
    rate = n * (lam + r)
    clock = 0.0
    sx = 0.0
    for i in range(n):
        if sig[i]:
            sx += math.exp(-alpha * (0.0 - tau[i]))
    since = 0
    while True:
        t = clock + rng.standard_exponential() / rate
        if t > T:
            break
        sx *= math.exp(-alpha * (t - clock))
        clock = t
        i = rng.integers(0, n)
        u = rng.random() * (lam + r)
        changed = False
        if u < lam:
            if sig[i] == 0 and u < lam * sx / n:
                sig[i] = 1
                tau[i] = t
                sx += 1.0
                changed = True
            if sigb[i] == 0 and u < lam * hermite_uniform(h, v_lim, dv_lim, t):
                sigb[i] = 1
                taub[i] = t
                changed = True
        else:
            if sig[i] == 1:
                sx -= math.exp(-alpha * (t - tau[i]))
                sig[i] = 0
                changed = True
            if sigb[i] == 1:
                sigb[i] = 0
                changed = True
        if changed:
            x = math.exp(-alpha * (t - tau[i])) if sig[i] else 0.0
            xb = math.exp(-alpha * (t - taub[i])) if sigb[i] else 0.0
            e = abs(x - xb) + abs(sig[i] - sigb[i])
            if e > err[i]:
                err[i] = e
            since += 1
            if since >= REFRESH_EVERY:
                sx = 0.0
                for j in range(n):
                    if sig[j]:
                        sx += math.exp(-alpha * (clock - tau[j]))
                since = 0
            if sx < 0.0:
                sx = 0.0
    return err
