"""Event-driven jump process with the exclusion rule.

Attempts arrive in a Poisson stream of rate n.  Each attempt picks an
unordered pair uniformly, splits the pair energy as
(xbar(1-xi), xbar(1+xi)) with xi uniform on [-1,1], and applies the move only
if the new configuration still satisfies the exclusion constraint.  Rejected
attempts consume clock time and change nothing.

Admissibility of a proposal is decided against the configuration with both
colliding particles removed, via predecessor/successor queries on an ordered
index (a two-level block list: bisect into a block directory, then within a
block), so the cost of one attempt grows logarithmically with n.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right, insort
from dataclasses import dataclass, field

import numpy as np

from .model import GAP_TOL, Configuration, ModelParams

_BLOCK = 1024
_RNG_CHUNK = 8192


class OrderedIndex:
    """Ordered multiset of energies with logarithmic-cost neighbor queries."""

    __slots__ = ("blocks", "maxes", "size")

    def __init__(self, values=()):
        vs = sorted(values)
        self.blocks = [vs[i:i + _BLOCK] for i in range(0, len(vs), _BLOCK)] or [[]]
        self.maxes = [b[-1] if b else 0.0 for b in self.blocks]
        self.size = len(vs)

    def add(self, x: float):
        bs, ms = self.blocks, self.maxes
        i = bisect_left(ms, x)
        if i == len(bs):
            i -= 1
        blk = bs[i]
        insort(blk, x)
        ms[i] = blk[-1]
        self.size += 1
        if len(blk) > 2 * _BLOCK:
            half = blk[_BLOCK:]
            del blk[_BLOCK:]
            bs.insert(i + 1, half)
            ms[i] = blk[-1]
            ms.insert(i + 1, half[-1])

    def remove(self, x: float):
        bs, ms = self.blocks, self.maxes
        i = bisect_left(ms, x)
        blk = bs[i]
        j = bisect_left(blk, x)
        if j >= len(blk) or blk[j] != x:
            raise KeyError(f"value {x!r} not in index")
        del blk[j]
        self.size -= 1
        if blk:
            ms[i] = blk[-1]
        elif len(bs) > 1:
            del bs[i]
            del ms[i]

    def gap_ok(self, x: float, skip1: float, skip2: float, eps: float) -> bool:
        """True if every neighbor of x (ignoring the two colliding values)
        keeps distance >= eps from x."""
        bs, ms = self.blocks, self.maxes
        i = bisect_left(ms, x)
        if i == len(bs):
            i -= 1
        blk = bs[i]
        j = bisect_left(blk, x)
        bi, bj = i, j - 1
        while True:  # predecessor scan, skipping the colliding pair
            if bj < 0:
                if bi == 0:
                    break
                bi -= 1
                bj = len(bs[bi]) - 1
                continue
            v = bs[bi][bj]
            if v != skip1 and v != skip2:
                if x - v < eps:
                    return False
                break
            bj -= 1
        bi, bj = i, j
        nb = len(bs)
        while True:  # successor scan
            if bj >= len(bs[bi]):
                bi += 1
                if bi >= nb:
                    break
                bj = 0
                continue
            v = bs[bi][bj]
            if v != skip1 and v != skip2:
                if v - x < eps:
                    return False
                break
            bj += 1
        return True

    def predecessor(self, x: float, skip=()):
        """Largest value < x not in skip, or None."""
        bs, ms = self.blocks, self.maxes
        i = bisect_left(ms, x)
        if i == len(bs):
            i -= 1
        j = bisect_left(bs[i], x) - 1
        while True:
            if j < 0:
                if i == 0:
                    return None
                i -= 1
                j = len(bs[i]) - 1
                continue
            v = bs[i][j]
            if v not in skip:
                return v
            j -= 1

    def successor(self, x: float, skip=()):
        """Smallest value > x not in skip, or None."""
        bs, ms = self.blocks, self.maxes
        i = bisect_left(ms, x)
        if i == len(bs):
            i -= 1
        j = bisect_right(bs[i], x)
        while True:
            if j >= len(bs[i]):
                i += 1
                if i >= len(bs):
                    return None
                j = 0
                continue
            v = bs[i][j]
            if v not in skip:
                return v
            j += 1

    def iter_order(self):
        for blk in self.blocks:
            yield from blk

    def to_array(self) -> np.ndarray:
        out = np.empty(self.size)
        k = 0
        for blk in self.blocks:
            out[k:k + len(blk)] = blk
            k += len(blk)
        return out

    def __len__(self):
        return self.size


class _BlockRng:
    """Chunked draws from a Generator so per-event RNG overhead stays flat."""

    __slots__ = ("gen", "_exp", "_uni", "_ei", "_ui")

    def __init__(self, gen: np.random.Generator):
        self.gen = gen
        self._exp = gen.standard_exponential(_RNG_CHUNK)
        self._uni = gen.random(_RNG_CHUNK * 3)
        self._ei = 0
        self._ui = 0

    def exponential(self) -> float:
        i = self._ei
        if i == len(self._exp):
            self._exp = self.gen.standard_exponential(_RNG_CHUNK)
            i = 0
        self._ei = i + 1
        return self._exp[i]

    def uniform(self) -> float:
        i = self._ui
        if i == len(self._uni):
            self._uni = self.gen.random(_RNG_CHUNK * 3)
            i = 0
        self._ui = i + 1
        return self._uni[i]


@dataclass
class JumpRecord:
    """One attempt: the colliding pair, the proposal, and the outcome."""

    time: float
    i: int
    j: int
    x_i: float
    x_j: float
    x_i_star: float
    x_j_star: float
    accepted: bool | None = None


@dataclass
class SimStats:
    attempted: int = 0
    accepted: int = 0
    low_energy_accepted: int = 0
    low_energy_threshold: float | None = None


class SimState:
    """Mutable simulation state: energies by particle id plus the ordered index.

    Not thread safe; run independent replicas on independent RngStream
    instances instead.
    """

    def __init__(self, config: Configuration, rng, scatter_capacity: int = 0):
        from .samplers import RngStream

        self.params: ModelParams = config.params
        self.energies = np.array(config.energies, dtype=float)  # id -> energy
        self.index = OrderedIndex(self.energies.tolist())
        self.time = 0.0
        if isinstance(rng, RngStream):
            rng = rng.generator()
        self._rng = _BlockRng(rng)
        # instrumentation uses an independent stream so it never perturbs
        # the dynamics
        self._side_rng = np.random.default_rng(rng.integers(2**63))
        self.stats = SimStats()
        self.scatter_capacity = scatter_capacity
        self.scatter: list[tuple[float, float]] = []

    @property
    def eps_eff(self) -> float:
        return self.params.epsilon_tilde - GAP_TOL

    def configuration(self) -> Configuration:
        return Configuration(self.index.to_array(), self.params)

    def tagged_energy(self, particle_id: int) -> float:
        return float(self.energies[particle_id])

    def _draw_pair(self):
        n = self.params.n
        i = int(self._rng.uniform() * n)
        j = int(self._rng.uniform() * (n - 1))
        if j >= i:
            j += 1
        return i, j

    def _record_scatter(self, before: float, after: float):
        cap = self.scatter_capacity
        if cap <= 0:
            return
        k = self.stats.accepted  # 1-based count, set before the call
        if len(self.scatter) < cap:
            self.scatter.append((before, after))
        else:  # reservoir sampling keeps a uniform subsample
            r = int(self._side_rng.integers(k))
            if r < cap:
                self.scatter[r] = (before, after)


def propose(state: SimState) -> JumpRecord:
    """Advance the clock by an Exp(rate n) waiting time and draw a proposal.

    Does not touch the energies; pair splitting uses the symmetric rule
    (xbar(1-xi), xbar(1+xi)).
    """
    rng = state._rng
    state.time += rng.exponential() / state.params.n
    i, j = state._draw_pair()
    a = float(state.energies[i])
    b = float(state.energies[j])
    total = a + b
    xi = 2.0 * rng.uniform() - 1.0
    x_i_star = 0.5 * total * (1.0 - xi)
    x_j_star = total - x_i_star
    return JumpRecord(state.time, i, j, a, b, x_i_star, x_j_star)


def propose_mod(state: SimState) -> JumpRecord:
    """Wrap-around splitting rule: x_i* = x_i + xi*xbar reduced mod the pair
    total; the post-collision pair law is the same as for propose()."""
    rng = state._rng
    state.time += rng.exponential() / state.params.n
    i, j = state._draw_pair()
    a = float(state.energies[i])
    b = float(state.energies[j])
    total = a + b
    xi = 2.0 * rng.uniform() - 1.0
    x_i_star = (a + xi * 0.5 * total) % total if total > 0 else 0.0
    x_j_star = total - x_i_star
    return JumpRecord(state.time, i, j, a, b, x_i_star, x_j_star)


def admissible(state: SimState, record: JumpRecord) -> bool:
    """Exclusion check for a proposal against the configuration with both
    colliding particles removed, plus the mutual constraint on the pair."""
    eps = state.eps_eff
    if abs(record.x_i_star - record.x_j_star) < eps:
        return False
    idx = state.index
    a, b = record.x_i, record.x_j
    return (idx.gap_ok(record.x_i_star, a, b, eps)
            and idx.gap_ok(record.x_j_star, a, b, eps))


def _apply(state: SimState, record: JumpRecord):
    idx = state.index
    idx.remove(record.x_i)
    idx.remove(record.x_j)
    idx.add(record.x_i_star)
    idx.add(record.x_j_star)
    state.energies[record.i] = record.x_i_star
    state.energies[record.j] = record.x_j_star


def _step_with(state: SimState, proposer) -> JumpRecord:
    record = proposer(state)
    stats = state.stats
    stats.attempted += 1
    record.accepted = admissible(state, record)
    if record.accepted:
        stats.accepted += 1
        _apply(state, record)
        state._record_scatter(record.x_i, record.x_i_star)
        thr = stats.low_energy_threshold
        if thr is not None and min(record.x_i_star, record.x_j_star) < thr:
            stats.low_energy_accepted += 1
    return record


def step(state: SimState) -> JumpRecord:
    """One full attempt cycle: clock, pair, proposal, exclusion check, move."""
    return _step_with(state, propose)


def step_mod_variant(state: SimState) -> JumpRecord:
    """One attempt cycle with the wrap-around splitting rule."""
    return _step_with(state, propose_mod)


@dataclass
class Trajectory:
    """Snapshots and series collected by run()."""

    times: np.ndarray
    snapshots: list[np.ndarray]
    tagged_ids: list[int]
    tagged: np.ndarray         # (n_snapshots, n_tagged)
    lowest: np.ndarray         # (n_snapshots, rank_k) lowest energies
    attempts: np.ndarray       # cumulative at snapshot times
    accepts: np.ndarray
    scatter: np.ndarray        # accepted (x, x*) reservoir
    events: list[JumpRecord] = field(default_factory=list)

    def snapshot_config(self, k: int, params: ModelParams) -> Configuration:
        return Configuration(self.snapshots[k], params)


def run(state: SimState, t_end: float, snapshot_dt: float | None = None,
        tracked_ids=(), rank_k: int = 4, variant: str = "standard",
        record_events: int = 0, low_energy_threshold: float | None = None,
        keep_snapshots: bool = True) -> Trajectory:
    """Run the process to t_end, recording the state at multiples of snapshot_dt.

    The state between events is constant, so a snapshot at time s is the state
    after all events at times <= s.  Snapshot 0 is the initial configuration.
    """
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    if snapshot_dt is None:
        snapshot_dt = t_end if t_end > 0 else 1.0
    if variant not in ("standard", "mod"):
        raise ValueError(f"unknown variant {variant!r}")
    wrap = variant == "mod"
    stats = state.stats
    stats.low_energy_threshold = low_energy_threshold

    times = [state.time]
    snaps = [state.index.to_array() if keep_snapshots else np.empty(0)]
    tracked_ids = list(tracked_ids)
    tagged = [[state.energies[t] for t in tracked_ids]]
    lowest = [_lowest_k(state, rank_k)]
    attempts = [stats.attempted]
    accepts = [stats.accepted]
    events: list[JumpRecord] = []

    t0 = state.time
    t_stop = t0 + t_end
    k_snap = 1

    def record_snapshot(at_time):
        times.append(at_time)
        snaps.append(state.index.to_array() if keep_snapshots else np.empty(0))
        tagged.append([state.energies[t] for t in tracked_ids])
        lowest.append(_lowest_k(state, rank_k))
        attempts.append(stats.attempted)
        accepts.append(stats.accepted)

    rng = state._rng
    idx = state.index
    E = state.energies
    n = state.params.n
    inv_n = 1.0 / n
    eps = state.eps_eff
    snap_eps = 1e-12 * max(1.0, abs(t_stop))
    while True:
        t_next = state.time + rng.exponential() * inv_n
        next_snap = t0 + k_snap * snapshot_dt
        while next_snap <= t_next and next_snap <= t_stop + snap_eps:
            record_snapshot(next_snap)
            k_snap += 1
            next_snap = t0 + k_snap * snapshot_dt
        if t_next > t_stop:
            state.time = t_stop
            break
        state.time = t_next

        # one attempt, inlined
        i = int(rng.uniform() * n)
        j = int(rng.uniform() * (n - 1))
        if j >= i:
            j += 1
        a = E[i]
        b = E[j]
        total = a + b
        xi = 2.0 * rng.uniform() - 1.0
        if wrap:
            xa = (a + xi * 0.5 * total) % total if total > 0 else 0.0
        else:
            xa = 0.5 * total * (1.0 - xi)
        xb = total - xa
        stats.attempted += 1
        ok = (abs(xa - xb) >= eps
              and idx.gap_ok(xa, a, b, eps)
              and idx.gap_ok(xb, a, b, eps))
        if ok:
            stats.accepted += 1
            idx.remove(a)
            idx.remove(b)
            idx.add(xa)
            idx.add(xb)
            E[i] = xa
            E[j] = xb
            state._record_scatter(a, xa)
            if low_energy_threshold is not None and min(xa, xb) < low_energy_threshold:
                stats.low_energy_accepted += 1
        if record_events and len(events) < record_events:
            events.append(JumpRecord(t_next, i, j, a, b, xa, xb, ok))

    return Trajectory(
        times=np.array(times),
        snapshots=snaps,
        tagged_ids=tracked_ids,
        tagged=np.array(tagged),
        lowest=np.array(lowest),
        attempts=np.array(attempts),
        accepts=np.array(accepts),
        scatter=np.array(state.scatter) if state.scatter else np.empty((0, 2)),
        events=events,
    )


def _lowest_k(state: SimState, k: int) -> list[float]:
    out = []
    for v in state.index.iter_order():
        out.append(v)
        if len(out) == k:
            break
    return out


def site_admissibility_profile(state: SimState, n_proposals: int, edges,
                               rng=None):
    """Single-site acceptance frequency by landing energy.

    Draws virtual proposals from the frozen current state and records, per bin
    of the landing energy x_i*, how often x_i* alone finds room (the pair
    partner is ignored).  The frequency converges to the exclusion factor
    evaluated at the local occupancy.
    """
    edges = np.asarray(edges, dtype=float)
    gen = rng if rng is not None else state._side_rng
    n = state.params.n
    eps = state.eps_eff
    landed = np.zeros(len(edges) - 1, dtype=int)
    fit = np.zeros(len(edges) - 1, dtype=int)
    E = state.energies
    idx = state.index
    for _ in range(n_proposals):
        i = int(gen.integers(n))
        j = int(gen.integers(n - 1))
        if j >= i:
            j += 1
        a = float(E[i])
        b = float(E[j])
        x_star = float(gen.uniform(0.0, a + b))
        k = int(np.searchsorted(edges, x_star, side="right")) - 1
        if 0 <= k < len(landed):
            landed[k] += 1
            if idx.gap_ok(x_star, a, b, eps):
                fit[k] += 1
    return landed, fit
