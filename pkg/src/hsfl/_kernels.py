"""Inner loops for the link-level subchannel search and the frequency dual.

Every function here is written against plain numpy arrays and scalars so the
same source runs either compiled by numba or interpreted.  The backend is
chosen once, at import time, from the ``HSFL_KERNELS`` environment variable:

    HSFL_KERNELS=numba   (default) compile with ``numba.njit``
    HSFL_KERNELS=numpy   run the same code as plain Python/numpy

If numba cannot be imported the numpy path is used silently.
"""

from __future__ import annotations

import math
import os

import numpy as np

_requested = os.environ.get("HSFL_KERNELS", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"HSFL_KERNELS must be 'numba' or 'numpy', got {_requested!r}")

BACKEND = "numpy"
if _requested == "numba":
    try:
        import numba

        BACKEND = "numba"
    except ImportError:  # pragma: no cover - numba ships with the package deps
        BACKEND = "numpy"


def _jit(fn):
    if BACKEND == "numba":
        return numba.njit(cache=True)(fn)
    return fn


INF = np.inf
LN2 = math.log(2.0)
# relative slack on every pruning test; keeps B&B bit-identical to enumeration
PRUNE_SLACK = 1e-12
POWER_SLACK = 1e-9
BISECT_RTOL = 1e-10


@_jit
def channel_rate(bw, power, gain, noise):
    return bw * math.log2(1.0 + power * gain / noise)


@_jit
def client_rates(assign, power, gain, bw, noise):
    """Per-client rate for one link; subchannels summed in natural order."""
    n_chan, n_clients = gain.shape
    rates = np.zeros(n_clients)
    for i in range(n_chan):
        k = assign[i]
        if k >= 0:
            rates[k] += channel_rate(bw, power[k], gain[i, k], noise)
    return rates


@_jit
def transfer_time(load, rate):
    # nothing to send costs nothing, even on a dead link
    if load <= 0.0:
        return 0.0
    if rate <= 0.0:
        return INF
    return load / rate


@_jit
def transfer_times(load, rate):
    out = np.empty(load.shape[0])
    for k in range(load.shape[0]):
        out[k] = transfer_time(load[k], rate[k])
    return out


@_jit
def _required_power(snr_gain, count, target_bits):
    """Smallest p with sum_i log2(1 + p*snr_gain[i]) >= target_bits.

    Newton from a point left of the root; concavity keeps every iterate on
    the left, so the result never overshoots.
    """
    if target_bits <= 0.0:
        return 0.0
    if count == 0:
        return INF
    a_max = 0.0
    for j in range(count):
        if snr_gain[j] > a_max:
            a_max = snr_gain[j]
    if a_max <= 0.0:
        return INF
    expo = target_bits / count
    if expo > 1000.0:
        return INF
    p = (2.0 ** expo - 1.0) / a_max
    for _ in range(100):
        h = -target_bits
        dh = 0.0
        for j in range(count):
            x = 1.0 + p * snr_gain[j]
            h += math.log2(x)
            dh += snr_gain[j] / (x * LN2)
        if h >= 0.0 or dh <= 0.0:
            break
        step = -h / dh
        p += step
        if step <= 1e-15 * p:
            break
    return p


@_jit
def eval_fixed(assign, gain, c, w, power, bw, noise):
    """max_k c_k + w_k / R_k with every client's power fixed."""
    rates = client_rates(assign, power, gain, bw, noise)
    obj = -INF
    for k in range(c.shape[0]):
        v = c[k] + transfer_time(w[k], rates[k])
        if v > obj:
            obj = v
    return obj


@_jit
def _collect_snr(assign, gain, noise, k, buf):
    n = 0
    for i in range(assign.shape[0]):
        if assign[i] == k:
            buf[n] = gain[i, k] / noise
            n += 1
    return n


@_jit
def eval_budget(assign, gain, c, w, budget, bw, noise, power_out):
    """Shared-budget downlink: bisection on the bottleneck latency.

    Writes the chosen per-client powers into ``power_out`` and returns the
    objective recomputed from those powers.
    """
    n_chan, n_clients = gain.shape
    buf = np.empty(n_chan)
    counts = np.zeros(n_clients, dtype=np.int64)
    for k in range(n_clients):
        power_out[k] = 0.0
    base = -INF
    n_active = 0
    for k in range(n_clients):
        if w[k] > 0.0:
            counts[k] = _collect_snr(assign, gain, noise, k, buf)
            if counts[k] == 0:
                return INF
            n_active += 1
        if c[k] > base:
            base = c[k]
    if n_active == 0:
        return base
    # full budget to each client alone is a lower bound, an even split is feasible
    lo = base
    hi = base
    even = budget / n_active
    for k in range(n_clients):
        if w[k] <= 0.0:
            continue
        r_full = 0.0
        r_even = 0.0
        for i in range(n_chan):
            if assign[i] == k:
                r_full += channel_rate(bw, budget, gain[i, k], noise)
                r_even += channel_rate(bw, even, gain[i, k], noise)
        lo = max(lo, c[k] + w[k] / r_full)
        hi = max(hi, c[k] + w[k] / r_even)
    for _ in range(200):
        if hi - lo <= BISECT_RTOL * hi:
            break
        mid = 0.5 * (lo + hi)
        total = 0.0
        for k in range(n_clients):
            if w[k] <= 0.0:
                continue
            slack = mid - c[k]
            if slack <= 0.0:
                total = INF
                break
            n = _collect_snr(assign, gain, noise, k, buf)
            total += _required_power(buf, n, w[k] / (slack * bw))
            if total > budget:
                break
        if total <= budget:
            hi = mid
        else:
            lo = mid
    total = 0.0
    for k in range(n_clients):
        if w[k] <= 0.0:
            continue
        n = _collect_snr(assign, gain, noise, k, buf)
        power_out[k] = _required_power(buf, n, w[k] / ((hi - c[k]) * bw))
        total += power_out[k]
    if not total > 0.0 or total == INF:
        for k in range(n_clients):
            power_out[k] = even if w[k] > 0.0 else 0.0
    else:
        # spend the whole budget; more power never hurts
        scale = budget / total
        for k in range(n_clients):
            power_out[k] *= scale
    rates = client_rates(assign, power_out, gain, bw, noise)
    obj = -INF
    for k in range(n_clients):
        v = c[k] + transfer_time(w[k], rates[k])
        if v > obj:
            obj = v
    return obj


@_jit
def eval_leaf(budget_mode, assign, gain, c, w, power, budget, bw, noise, power_out):
    if budget_mode:
        return eval_budget(assign, gain, c, w, budget, bw, noise, power_out)
    for k in range(power.shape[0]):
        power_out[k] = power[k]
    return eval_fixed(assign, gain, c, w, power, bw, noise)


@_jit
def full_rate_table(budget_mode, gain, power, budget, bw, noise):
    n_chan, n_clients = gain.shape
    full = np.empty((n_chan, n_clients))
    for i in range(n_chan):
        for k in range(n_clients):
            p = budget if budget_mode else power[k]
            full[i, k] = channel_rate(bw, p, gain[i, k], noise)
    return full


@_jit
def optimistic_bound(acc, suffix_row, c, w):
    """Objective if every client kept its channels and also got all the rest."""
    lb = -INF
    for k in range(c.shape[0]):
        v = c[k] + transfer_time(w[k], acc[k] + suffix_row[k])
        if v > lb:
            lb = v
    return lb


@_jit
def remaining_tables(full, snr, chan_order):
    """Per depth d and client k, the channels chan_order[d:] sorted best first.

    Returns prefix sums of full-power rates and the sorted SNR gains.
    """
    n_chan, n_clients = full.shape
    top_rate = np.zeros((n_chan + 1, n_clients, n_chan + 1))
    top_snr = np.zeros((n_chan + 1, n_clients, n_chan))
    for d in range(n_chan):
        n_rem = n_chan - d
        for k in range(n_clients):
            vals = np.empty(n_rem)
            for j in range(n_rem):
                vals[j] = snr[chan_order[d + j], k]
            vals = np.sort(vals)[::-1]
            for j in range(n_rem):
                top_snr[d, k, j] = vals[j]
            rates = np.empty(n_rem)
            for j in range(n_rem):
                rates[j] = full[chan_order[d + j], k]
            rates = np.sort(rates)[::-1]
            for j in range(n_rem):
                top_rate[d, k, j + 1] = top_rate[d, k, j] + rates[j]
    return top_rate, top_snr


@_jit
def _count_prune(acc, top_rate_d, n_rem, c, w, target):
    """True if no completion can bring every client under ``target``.

    Client k needs at least j_k more subchannels, counted with its j_k best
    remaining full-power rates; the counts must fit in what is left.
    """
    used = 0
    for k in range(c.shape[0]):
        if w[k] <= 0.0:
            continue
        slack = target - c[k]
        if slack <= 0.0:
            return True
        need = (w[k] / slack) * (1.0 - POWER_SLACK)
        j = 0
        while acc[k] + top_rate_d[k, j] < need:
            j += 1
            if j > n_rem:
                return True
        used += j
        if used > n_rem:
            return True
    return False


@_jit
def _power_prune(assign, depth, n_rem, top_snr_d, gain, c, w, budget, bw, noise,
                 target, buf, phi, table):
    """True if the cheapest split of the remaining subchannels still needs more
    than the power budget to bring every client under ``target``.

    phi_k(j) is client k's power with its assigned channels plus its j best
    remaining ones; a DP picks the j_k (sum <= n_rem) minimising sum phi_k.
    """
    n_chan, n_clients = gain.shape
    n_act = 0
    for k in range(n_clients):
        if w[k] <= 0.0:
            continue
        slack = target - c[k]
        if slack <= 0.0:
            return True
        bits = w[k] / (slack * bw)
        n0 = 0
        for i in range(n_chan):
            if assign[i] == k:
                buf[n0] = gain[i, k] / noise
                n0 += 1
        for j in range(n_rem + 1):
            if j > 0:
                buf[n0 + j - 1] = top_snr_d[k, j - 1]
            phi[n_act, j] = _required_power(buf, n0 + j, bits)
        n_act += 1
    if n_act == 0:
        return False
    # table[s]: least total power of the clients so far using s channels
    for s in range(n_rem + 1):
        table[s] = phi[0, s]
    for a in range(1, n_act):
        for s in range(n_rem, -1, -1):
            v = INF
            for j in range(s + 1):
                cand = table[s - j] + phi[a, j]
                if cand < v:
                    v = cand
            table[s] = v
    least = INF
    for s in range(n_rem + 1):
        if table[s] < least:
            least = table[s]
    return least > budget * (1.0 + POWER_SLACK)


@_jit
def bnb_link(budget_mode, gain, c, w, power, budget, bw, noise,
             chan_order, client_order, init_assign, max_nodes, hist_cap):
    """Depth-first branch and bound over subchannel-to-client assignments.

    Depth d fixes the owner of subchannel ``chan_order[d]``.  Returns the best
    assignment, its powers and objective, search counters, a limit flag and
    the incumbent history as (node count, objective) pairs.
    """
    n_chan, n_clients = gain.shape
    full = full_rate_table(budget_mode, gain, power, budget, bw, noise)
    snr = gain / noise
    suffix = np.zeros((n_chan + 1, n_clients))
    for d in range(n_chan - 1, -1, -1):
        i = chan_order[d]
        for k in range(n_clients):
            suffix[d, k] = suffix[d + 1, k] + full[i, k]
    top_rate, top_snr = remaining_tables(full, snr, chan_order)
    # no assignment beats the root bound; reaching it ends the search
    floor = optimistic_bound(np.zeros(n_clients), suffix[0], c, w)

    best_assign = np.full(n_chan, -1, dtype=np.int64)
    best_power = np.zeros(n_clients)
    scratch_power = np.zeros(n_clients)
    buf = np.empty(n_chan)
    phi = np.empty((n_clients, n_chan + 1))
    table = np.empty(n_chan + 1)
    hist_nodes = np.zeros(hist_cap, dtype=np.int64)
    hist_obj = np.zeros(hist_cap)
    n_hist = 0

    best = INF
    have_init = n_chan > 0
    for i in range(n_chan):
        if init_assign[i] < 0 or init_assign[i] >= n_clients:
            have_init = False
    if have_init:
        best = eval_leaf(budget_mode, init_assign, gain, c, w, power, budget,
                         bw, noise, scratch_power)
        if best < INF:
            best_assign[:] = init_assign
            best_power[:] = scratch_power
            hist_obj[0] = best
            n_hist = 1
    if n_chan == 0:
        best = eval_leaf(budget_mode, best_assign, gain, c, w, power, budget,
                         bw, noise, best_power)
        return best_assign, best_power, best, 0, 0, 0, False, hist_nodes[:0], hist_obj[:0]

    assign = np.full(n_chan, -1, dtype=np.int64)
    acc = np.zeros((n_chan + 1, n_clients))
    child = np.zeros(n_chan + 1, dtype=np.int64)
    nodes = 0
    pruned = 0
    leaves = 0
    limited = False
    d = 0
    while d >= 0 and best > floor:
        if child[d] >= n_clients:
            child[d] = 0
            d -= 1
            if d >= 0:
                assign[chan_order[d]] = -1
            continue
        if nodes >= max_nodes:
            limited = True
            break
        k = client_order[child[d]]
        child[d] += 1
        i = chan_order[d]
        assign[i] = k
        for j in range(n_clients):
            acc[d + 1, j] = acc[d, j]
        acc[d + 1, k] += full[i, k]
        nodes += 1
        n_rem = n_chan - d - 1
        lb = optimistic_bound(acc[d + 1], suffix[d + 1], c, w)
        cut = lb > best * (1.0 + PRUNE_SLACK)
        if not cut and best < INF:
            cut = _count_prune(acc[d + 1], top_rate[d + 1], n_rem, c, w, best)
            if not cut and budget_mode:
                cut = _power_prune(assign, d + 1, n_rem, top_snr[d + 1], gain, c, w,
                                   budget, bw, noise, best, buf, phi, table)
        if cut:
            pruned += 1
            assign[i] = -1
            continue
        if n_rem == 0:
            leaves += 1
            obj = eval_leaf(budget_mode, assign, gain, c, w, power, budget,
                            bw, noise, scratch_power)
            if obj < best:
                best = obj
                best_assign[:] = assign
                best_power[:] = scratch_power
                if n_hist < hist_cap:
                    hist_nodes[n_hist] = nodes
                    hist_obj[n_hist] = obj
                    n_hist += 1
            assign[i] = -1
            continue
        d += 1
    if best == INF:
        # nothing finite exists: report the first assignment tried
        for i in range(n_chan):
            best_assign[i] = client_order[0]
        best = eval_leaf(budget_mode, best_assign, gain, c, w, power, budget,
                         bw, noise, best_power)
    return (best_assign, best_power, best, nodes, pruned, leaves, limited,
            hist_nodes[:n_hist], hist_obj[:n_hist])


@_jit
def enumerate_link(budget_mode, gain, c, w, power, budget, bw, noise):
    """Exhaustive odometer over all K**I assignments, same leaf rule."""
    n_chan, n_clients = gain.shape
    assign = np.zeros(n_chan, dtype=np.int64)
    best_assign = assign.copy()
    best_power = np.zeros(n_clients)
    scratch = np.zeros(n_clients)
    best = INF
    first = True
    count = 0
    while True:
        obj = eval_leaf(budget_mode, assign, gain, c, w, power, budget, bw, noise, scratch)
        count += 1
        if first or obj < best:
            first = False
            best = obj
            best_assign[:] = assign
            best_power[:] = scratch
        pos = 0
        while pos < n_chan:
            assign[pos] += 1
            if assign[pos] < n_clients:
                break
            assign[pos] = 0
            pos += 1
        if pos == n_chan:
            break
    return best_assign, best_power, best, count


@_jit
def node_bound(budget_mode, gain, c, w, power, budget, bw, noise, assign):
    """Optimistic bound of a partial assignment (-1 marks a free subchannel)."""
    n_chan, n_clients = gain.shape
    full = full_rate_table(budget_mode, gain, power, budget, bw, noise)
    acc = np.zeros(n_clients)
    rest = np.zeros(n_clients)
    for i in range(n_chan):
        if assign[i] >= 0:
            acc[assign[i]] += full[i, assign[i]]
        else:
            for k in range(n_clients):
                rest[k] += full[i, k]
    return optimistic_bound(acc, rest, c, w)


@_jit
def freq_dual(m, n, budget, lam, mu, alpha, beta, eps, max_iters, trace):
    """Lagrangian iteration for min_F max_k m_k + n_k / f_k, sum f <= budget.

    ``m``/``n`` hold only the clients that take part in the dual (finite m,
    positive n).  ``trace`` must have room for max_iters rows of
    (T_m, lambda, sum f); returns the best budget-feasible shares, their
    objective, the iteration count and a convergence flag.
    """
    n_clients = m.shape[0]
    f = np.empty(n_clients)
    best_f = np.full(n_clients, budget / n_clients)
    best = -INF
    for k in range(n_clients):
        v = m[k] + n[k] / best_f[k]
        if v > best:
            best = v
    t_prev = best
    converged = False
    it = 0
    while it < max_iters:
        total = 0.0
        for k in range(n_clients):
            f[k] = math.sqrt(mu[k] * n[k] / lam)
            total += f[k]
        t_cur = -INF
        for k in range(n_clients):
            v = m[k] + n[k] / f[k]
            if v > t_cur:
                t_cur = v
        # budget-feasible image of this iterate
        scale = budget / total
        t_feas = -INF
        for k in range(n_clients):
            v = m[k] + n[k] / (f[k] * scale)
            if v > t_feas:
                t_feas = v
        if t_feas < best:
            best = t_feas
            for k in range(n_clients):
                best_f[k] = f[k] * scale
        trace[it, 0] = t_cur
        trace[it, 1] = lam
        trace[it, 2] = total
        it += 1
        # multiplier step: mu_k scales by (current load / load that would
        # meet T_m)^(2 beta), then back onto the simplex (dL/dT_m = 0)
        norm = 0.0
        for k in range(n_clients):
            load = n[k] / f[k]
            mu[k] = mu[k] * (load / (t_cur - m[k])) ** (2.0 * beta)
            norm += mu[k]
        root = 0.0
        for k in range(n_clients):
            mu[k] /= norm
            root += math.sqrt(mu[k] * n[k])
        # budget step towards the lambda that makes sum f = f_s
        lam_stat = (root / budget) ** 2
        lam = lam * (lam_stat / lam) ** alpha
        if it > 1 and abs(t_cur - t_prev) <= eps:
            converged = True
            break
        t_prev = t_cur
    return best_f, best, it, converged, lam


# joint server split: frequency shares and downlink powers towards one T

ROOT_RTOL = 1e-10
ROOT_ITERS = 200


@_jit
def _downlink_terms(p, snr, cnt, w, bw):
    """Downlink time w / R(p) and its rate of decrease -dD/dp."""
    s = 0.0
    ds = 0.0
    for j in range(cnt):
        x = 1.0 + p * snr[j]
        s += math.log2(x)
        ds += snr[j] / (x * LN2)
    rate = bw * s
    if rate <= 0.0:
        return INF, INF
    return w / rate, w * bw * ds / (rate * rate)


@_jit
def _price_gap(x, p_min, log_theta, slack, n, w, snr, cnt, bw):
    """log g(p) - log theta at p = p_min + e^x, g = -df/dp, f = n / (slack - D)."""
    d, dd = _downlink_terms(p_min + math.exp(x), snr, cnt, w, bw)
    u = slack - d
    if not u > 0.0:
        return INF
    return math.log(n * dd) - 2.0 * math.log(u) - log_theta


@_jit
def _power_at_price(log_theta, slack, n, w, snr, cnt, bw, p_min, p_max):
    """Power where the marginal frequency saving equals theta, in (p_min, p_max]."""
    span = p_max - p_min
    x_hi = math.log(span)
    v_hi = _price_gap(x_hi, p_min, log_theta, slack, n, w, snr, cnt, bw)
    if v_hi >= 0.0:
        return p_max
    x_lo = x_hi - 60.0
    v_lo = _price_gap(x_lo, p_min, log_theta, slack, n, w, snr, cnt, bw)
    if v_lo <= 0.0:
        return p_min + math.exp(x_lo)
    side = 0
    for _ in range(ROOT_ITERS):
        if x_hi - x_lo <= 1e-11 * max(1.0, abs(x_hi)):
            break
        if v_lo < INF:
            x = x_lo + (x_hi - x_lo) * v_lo / (v_lo - v_hi)
            if not (x_lo < x < x_hi):
                x = 0.5 * (x_lo + x_hi)
        else:
            x = 0.5 * (x_lo + x_hi)
        v = _price_gap(x, p_min, log_theta, slack, n, w, snr, cnt, bw)
        if v == 0.0:
            return p_min + math.exp(x)
        if v > 0.0:
            x_lo, v_lo = x, v
            if side == 1:
                v_hi *= 0.5
            side = 1
        else:
            x_hi, v_hi = x, v
            if side == -1 and v_lo < INF:
                v_lo *= 0.5
            side = -1
    return p_min + math.exp(x_hi)


@_jit
def _split_at(t, a, n, w, snr, cnt, bw, f_budget, p_budget, p_out, f_out):
    """Cheapest frequency use meeting bottleneck ``t`` with all power spent.

    Fills ``p_out``/``f_out`` and returns sum f - f_budget (inf if ``t`` cannot
    be met at any frequency).
    """
    n_clients = a.shape[0]
    f_fixed = 0.0
    p_rest = p_budget
    n_mixed = 0
    p_min_sum = 0.0
    for k in range(n_clients):
        p_out[k] = 0.0
        f_out[k] = 0.0
        slack = t - a[k]
        if n[k] <= 0.0 and w[k] <= 0.0:
            continue
        if not slack > 0.0:
            return INF
        if w[k] > 0.0:
            p_min = _required_power(snr[k], cnt[k], w[k] / (slack * bw))
            if p_min == INF:
                return INF
            p_out[k] = p_min
            if n[k] > 0.0:
                n_mixed += 1
                p_min_sum += p_min
            else:
                p_rest -= p_min
        else:
            f_out[k] = n[k] / slack
            f_fixed += f_out[k]
    if n_mixed == 0:
        return f_fixed - f_budget if p_rest >= 0.0 else INF
    free = p_rest - p_min_sum
    if not free > 0.0:
        return INF
    # bracket the price from each client's slope at an even top-up
    lt_lo = INF
    lt_hi = -INF
    for k in range(n_clients):
        if n[k] > 0.0 and w[k] > 0.0:
            d, dd = _downlink_terms(p_out[k] + free / n_mixed, snr[k], cnt[k], w[k], bw)
            u = t - a[k] - d
            lt = math.log(n[k] * dd) - 2.0 * math.log(u)
            lt_lo = min(lt_lo, lt)
            lt_hi = max(lt_hi, lt)
    p_min_k = p_out.copy()
    v_lo = 0.0
    v_hi = 0.0
    for k in range(n_clients):
        if n[k] > 0.0 and w[k] > 0.0:
            v_lo += _power_at_price(lt_lo, t - a[k], n[k], w[k], snr[k], cnt[k], bw,
                                    p_min_k[k], p_rest)
            v_hi += _power_at_price(lt_hi, t - a[k], n[k], w[k], snr[k], cnt[k], bw,
                                    p_min_k[k], p_rest)
    v_lo -= p_rest
    v_hi -= p_rest
    lt = lt_hi
    side = 0
    for _ in range(ROOT_ITERS):
        if lt_hi - lt_lo <= 1e-11 * max(1.0, abs(lt_hi)) or v_lo == 0.0 or v_hi == 0.0:
            break
        lt = lt_lo + (lt_hi - lt_lo) * v_lo / (v_lo - v_hi)
        if not (lt_lo < lt < lt_hi):
            lt = 0.5 * (lt_lo + lt_hi)
        v = -p_rest
        for k in range(n_clients):
            if n[k] > 0.0 and w[k] > 0.0:
                v += _power_at_price(lt, t - a[k], n[k], w[k], snr[k], cnt[k], bw,
                                     p_min_k[k], p_rest)
        if v == 0.0:
            break
        if v > 0.0:
            lt_lo, v_lo = lt, v
            if side == 1:
                v_hi *= 0.5
            side = 1
        else:
            lt_hi, v_hi = lt, v
            if side == -1:
                v_lo *= 0.5
            side = -1
    total_f = f_fixed
    for k in range(n_clients):
        if n[k] > 0.0 and w[k] > 0.0:
            p = _power_at_price(lt, t - a[k], n[k], w[k], snr[k], cnt[k], bw,
                                p_min_k[k], p_rest)
            d, _ = _downlink_terms(p, snr[k], cnt[k], w[k], bw)
            u = t - a[k] - d
            if not u > 0.0:
                return INF
            p_out[k] = p
            f_out[k] = n[k] / u
            total_f += f_out[k]
    return total_f - f_budget


@_jit
def joint_split(a, n, w, snr, cnt, bw, f_budget, p_budget, t_hi, p_out, f_out):
    """min T over frequency shares and downlink powers, assignment fixed.

    Client k finishes at ``a_k + n_k / f_k + w_k / R_k(p_k)``.  Bisection with
    regula falsi on T; at each T the power budget is split so that the
    marginal frequency saving per watt is equal across clients.  ``t_hi`` must
    be achievable.  Returns T, or inf when no T up to ``t_hi`` was feasible.
    """
    n_clients = a.shape[0]
    t_lo = 0.0
    for k in range(n_clients):
        if n[k] > 0.0 or w[k] > 0.0:
            t_lo = max(t_lo, a[k])
    v_hi = _split_at(t_hi, a, n, w, snr, cnt, bw, f_budget, p_budget, p_out, f_out)
    if not v_hi <= 0.0:
        return INF
    v_lo = INF
    side = 0
    for _ in range(ROOT_ITERS):
        if t_hi - t_lo <= ROOT_RTOL * t_hi:
            break
        if v_lo < INF:
            t = t_lo + (t_hi - t_lo) * v_lo / (v_lo - v_hi)
            if not (t_lo < t < t_hi):
                t = 0.5 * (t_lo + t_hi)
        else:
            t = 0.5 * (t_lo + t_hi)
        v = _split_at(t, a, n, w, snr, cnt, bw, f_budget, p_budget, p_out, f_out)
        if v > 0.0:
            t_lo, v_lo = t, v
            if side == 1:
                v_hi *= 0.5
            side = 1
        else:
            t_hi, v_hi = t, v
            if side == -1 and v_lo < INF:
                v_lo *= 0.5
            side = -1
    _split_at(t_hi, a, n, w, snr, cnt, bw, f_budget, p_budget, p_out, f_out)
    return t_hi
