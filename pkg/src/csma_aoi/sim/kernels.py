"""JIT-compiled event loops for the stochastic simulators.

All clocks are exponential, so each loop samples the next event from the
total rate and then picks the event type and device categorically.
"""
import numba
import numpy as np

IDLE, WAIT, SERVICE = 0, 1, 2


@numba.njit(cache=True)
def device_cycles(arrivals, backoffs, services):
    """Replay one isolated device over a fixed arrival sequence.

    ``backoffs[j]`` and ``services[j]`` are the (already scaled) waiting and
    service durations of cycle j. Both packet-management schemes see the same
    state path; they differ only in which generation time is delivered.
    Returns per-delivery arrays (wait_start, wait_end, delivery, gen_wop,
    gen_wp) truncated to the completed cycles.
    """
    n = arrivals.shape[0]
    m = backoffs.shape[0]
    wait_start = np.empty(m)
    wait_end = np.empty(m)
    delivery = np.empty(m)
    gen_wop = np.empty(m)
    gen_wp = np.empty(m)
    last_arrival = arrivals[n - 1]
    t = 0.0
    ia = 0
    j = 0
    while j < m:
        while ia < n and arrivals[ia] <= t:
            ia += 1
        if ia >= n:
            break
        start = arrivals[ia]
        end_wait = start + backoffs[j]
        done = end_wait + services[j]
        if done > last_arrival:
            break
        # waiting packet is replaced by every arrival during the backoff
        while ia + 1 < n and arrivals[ia + 1] <= end_wait:
            ia += 1
        g_wop = arrivals[ia]
        # with preemption, arrivals during service replace the packet too
        while ia + 1 < n and arrivals[ia + 1] <= done:
            ia += 1
        wait_start[j] = start
        wait_end[j] = end_wait
        delivery[j] = done
        gen_wop[j] = g_wop
        gen_wp[j] = arrivals[ia]
        t = done
        j += 1
    return wait_start[:j], wait_end[:j], delivery[:j], gen_wop[:j], gen_wp[:j]


@numba.njit(cache=True)
def _remove(members, pos, count, d):
    i = pos[d]
    last = members[count - 1]
    members[i] = last
    pos[last] = i
    pos[d] = -1
    return count - 1


@numba.njit(cache=True)
def _add(members, pos, count, d):
    members[count] = d
    pos[d] = count
    return count + 1


@numba.njit(cache=True)
def population(rng, n_dev, m_ch, lam, mu, w, horizon, warmup, sample_dt):
    """N devices sharing M channels with sensing by thinning.

    A waiting device's backoff clock fires at rate ``w``; it then senses one
    uniformly chosen channel and starts service only if that channel is idle
    (probability 1 - busy/M). AoI is tracked for both schemes on the same
    sample path. Statistics cover [warmup, horizon].

    Returns (scalars, occupancy_integral, sample_times, sample_counts) where
    ``scalars`` packs, per scheme (0 = without, 1 = with preemption):
    area, peak_sum, service_sum; then deliveries, inter_sum, inter_sq_sum,
    inter_count, attempts, wait_to_service.
    """
    state = np.zeros(n_dev, np.int64)
    held = np.zeros((2, n_dev))      # generation time of the packet on hand
    base = np.zeros((2, n_dev))      # generation time of the last delivery
    accounted = np.zeros(n_dev)      # AoI area integrated up to this time
    last_dlv = np.full(n_dev, -1.0)
    waiting = np.empty(n_dev, np.int64)
    wait_pos = np.full(n_dev, -1, np.int64)
    serving = np.empty(n_dev, np.int64)
    serve_pos = np.full(n_dev, -1, np.int64)
    n_wait = 0
    n_serve = 0

    area = np.zeros(2)
    peak_sum = np.zeros(2)
    service_sum = np.zeros(2)
    deliveries = 0
    inter_sum = 0.0
    inter_sq = 0.0
    inter_n = 0
    attempts = 0
    to_service = 0
    occupancy = np.zeros(3)

    if sample_dt > 0.0:
        n_samples = int(np.floor(horizon / sample_dt + 1e-9)) + 1
    else:
        n_samples = 0
    sample_times = np.empty(n_samples)
    sample_counts = np.empty((n_samples, 3), np.int64)
    next_sample = 0

    arrival_rate = lam * n_dev
    t = 0.0
    while True:
        total = arrival_rate + w * n_wait + mu * n_serve
        t_next = t + rng.standard_exponential() / total
        n_idle = n_dev - n_wait - n_serve
        while next_sample < n_samples and next_sample * sample_dt < t_next:
            sample_times[next_sample] = next_sample * sample_dt
            sample_counts[next_sample, 0] = n_idle
            sample_counts[next_sample, 1] = n_wait
            sample_counts[next_sample, 2] = n_serve
            next_sample += 1
        lo = max(t, warmup)
        hi = min(t_next, horizon)
        if hi > lo:
            occupancy[0] += n_idle * (hi - lo)
            occupancy[1] += n_wait * (hi - lo)
            occupancy[2] += n_serve * (hi - lo)
        if t_next > horizon:
            break
        t = t_next
        in_window = t >= warmup
        u = rng.random() * total
        if u < arrival_rate:
            d = rng.integers(0, n_dev)
            s = state[d]
            if s == IDLE:
                state[d] = WAIT
                n_wait = _add(waiting, wait_pos, n_wait, d)
                held[0, d] = t
                held[1, d] = t
            elif s == WAIT:
                held[0, d] = t
                held[1, d] = t
            else:
                held[1, d] = t
        elif u < arrival_rate + w * n_wait:
            d = waiting[rng.integers(0, n_wait)]
            if in_window:
                attempts += 1
            if rng.random() * m_ch >= n_serve:
                n_wait = _remove(waiting, wait_pos, n_wait, d)
                n_serve = _add(serving, serve_pos, n_serve, d)
                state[d] = SERVICE
                if n_serve > m_ch:
                    raise RuntimeError("more devices in service than channels")
                if in_window:
                    to_service += 1
        else:
            d = serving[rng.integers(0, n_serve)]
            n_serve = _remove(serving, serve_pos, n_serve, d)
            state[d] = IDLE
            start = max(accounted[d], warmup)
            for sch in range(2):
                u0 = base[sch, d]
                if t > start:
                    area[sch] += 0.5 * ((t - u0) ** 2 - (start - u0) ** 2)
                if in_window:
                    peak_sum[sch] += t - u0
                    service_sum[sch] += t - held[sch, d]
                base[sch, d] = held[sch, d]
            accounted[d] = t
            if in_window:
                deliveries += 1
                if last_dlv[d] >= warmup:
                    gap = t - last_dlv[d]
                    inter_sum += gap
                    inter_sq += gap * gap
                    inter_n += 1
            last_dlv[d] = t

    n_idle = n_dev - n_wait - n_serve
    while next_sample < n_samples:
        sample_times[next_sample] = next_sample * sample_dt
        sample_counts[next_sample, 0] = n_idle
        sample_counts[next_sample, 1] = n_wait
        sample_counts[next_sample, 2] = n_serve
        next_sample += 1
    for d in range(n_dev):
        start = max(accounted[d], warmup)
        for sch in range(2):
            u0 = base[sch, d]
            if horizon > start:
                area[sch] += 0.5 * ((horizon - u0) ** 2 - (start - u0) ** 2)

    scalars = np.array([
        area[0], area[1], peak_sum[0], peak_sum[1], service_sum[0], service_sum[1],
        float(deliveries), inter_sum, inter_sq, float(inter_n), float(attempts),
        float(to_service),
    ])
    return scalars, occupancy, sample_times, sample_counts


@numba.njit(cache=True)
def density(rng, counts0, m_ch, lam, mu, w, horizon, warmup, sample_dt):
    """Direct-method simulation of the (idle, waiting, service) count chain.

    Jumps: I->W at rate lam*n_I, W->S at rate w*n_W*(1 - n_S/M),
    S->I at rate mu*n_S. Returns (sample_times, sample_counts,
    occupancy_integral over [warmup, horizon]).
    """
    n_i = counts0[0]
    n_w = counts0[1]
    n_s = counts0[2]
    n_samples = int(np.floor(horizon / sample_dt + 1e-9)) + 1
    sample_times = np.empty(n_samples)
    sample_counts = np.empty((n_samples, 3), np.int64)
    next_sample = 0
    occupancy = np.zeros(3)
    t = 0.0
    while True:
        r_arr = lam * n_i
        r_go = w * n_w * (1.0 - n_s / m_ch)
        r_done = mu * n_s
        total = r_arr + r_go + r_done
        if total > 0.0:
            t_next = t + rng.standard_exponential() / total
        else:
            t_next = np.inf
        while next_sample < n_samples and next_sample * sample_dt < t_next:
            sample_times[next_sample] = next_sample * sample_dt
            sample_counts[next_sample, 0] = n_i
            sample_counts[next_sample, 1] = n_w
            sample_counts[next_sample, 2] = n_s
            next_sample += 1
        lo = max(t, warmup)
        hi = min(t_next, horizon)
        if hi > lo:
            occupancy[0] += n_i * (hi - lo)
            occupancy[1] += n_w * (hi - lo)
            occupancy[2] += n_s * (hi - lo)
        if t_next > horizon:
            break
        t = t_next
        u = rng.random() * total
        if u < r_arr:
            n_i -= 1
            n_w += 1
        elif u < r_arr + r_go:
            n_w -= 1
            n_s += 1
        else:
            n_s -= 1
            n_i += 1
    return sample_times, sample_counts, occupancy
