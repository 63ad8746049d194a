"""Gamma-scaled rounding pipeline: filtering with facility splitting,
close/distant classification, greedy clustering, randomized rounding, and
Monte Carlo cost estimation.

Filtering scales the fractional openings by gamma >= 1 and re-saturates each
client nearest-first.  Facilities are split into co-located copies at every
client's saturation boundary so that the scaled solution is complete: each
client's close copies carry opening mass exactly 1.  Scaled copies of a
client's serving facilities beyond its close boundary form the distant set,
except that clients served by a single facility get no distant set (all
copies would be co-located, so the distinction carries no distance
information).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .instance import UflInstance
from .relaxation import FractionalSolution

CUT_MERGE_TOL = 1e-12
MASS_TOL = 1e-9
_CHUNK = 4096  # fixed Monte Carlo batch size; part of the deterministic layout


@dataclass(frozen=True)
class FilteredSolution:
    """Complete gamma-scaled solution over split facility copies.

    split_map[s] is the original facility of copy s and ybar[s] its scaled
    opening mass.  close[j] / distant[j] are copy index arrays per client;
    sum of ybar over close[j] is 1 within MASS_TOL.
    """

    inst: UflInstance
    gamma: float
    y_frac: np.ndarray        # original fractional openings
    split_map: np.ndarray     # copy -> original facility
    ybar: np.ndarray          # copy -> scaled opening mass
    close: tuple              # per client: np.ndarray of copy indices
    distant: tuple            # per client: np.ndarray of copy indices
    single_support: np.ndarray

    @property
    def split_count(self):
        return self.split_map.size

    def copy_distances(self, j):
        """Distances from client j to every copy."""
        return self.inst.dist[j, self.split_map]

    def xbar_dense(self):
        """Dense client-by-copy assignment: ybar on close copies, else 0."""
        out = np.zeros((self.inst.client_count, self.split_count))
        for j, idx in enumerate(self.close):
            out[j, idx] = self.ybar[idx]
        return out


@dataclass(frozen=True)
class DistanceStats:
    """Mass-weighted distance summary of one client's copies."""

    avg_close: float
    avg_distant: float | None
    max_close: float
    avg_all: float
    cluster_key: float


@dataclass(frozen=True)
class ClusterStructure:
    centers: np.ndarray       # client indices, in selection order
    center_of: np.ndarray     # client -> its center
    keys: np.ndarray          # cluster key per client

    def is_center(self, j):
        return self.center_of[j] == j


@dataclass(frozen=True)
class IntegralSolution:
    """Opened facilities plus nearest-open assignment, with original-level
    costs (co-located copies merged, opening cost paid once)."""

    open_facilities: np.ndarray
    assignment: np.ndarray
    facility_cost: float
    client_costs: np.ndarray
    gamma: float | None = None
    seed: object = None

    @property
    def connection_cost(self):
        return float(self.client_costs.sum())

    @property
    def total_cost(self):
        return self.facility_cost + self.connection_cost


@dataclass(frozen=True)
class MonteCarloEstimate:
    """Independent-draw cost estimates; std errors are sample std / sqrt(n).

    facility_* counts every opened copy at the full original opening cost
    (the statistic whose expectation is exactly gamma times the fractional
    facility cost); merged_facility_* prices each original at most once, as
    an integral solution would pay.
    """

    trials: int
    facility_mean: float
    facility_stderr: float | None
    merged_facility_mean: float
    merged_facility_stderr: float | None
    connection_mean: float
    connection_stderr: float | None
    per_client_mean: np.ndarray
    per_client_stderr: np.ndarray | None


@dataclass(frozen=True)
class BackupDistanceCheck:
    """Per-client diagnostic comparing the average distance to the cluster
    center's close copies outside the client's own serving set against the
    two theoretical bounds (the simple filtering bound and the refined one
    that needs gamma <= 2)."""

    applicable: bool
    reason: str | None = None
    lhs: float | None = None
    rhs_basic: float | None = None
    rhs_refined: float | None = None
    holds: bool | None = None
    gamma_in_range: bool = True


def _unit_profiles(frac: FractionalSolution):
    """Per client: [(facility, mass), ...] greedily saturating the nearest
    serving facilities until total mass exactly 1."""
    inst = frac.inst
    profiles = []
    for j in range(inst.client_count):
        support = frac.support[j]
        if not support:
            raise ValueError(f"client {j} has no serving facilities")
        dist = inst.dist[j]
        order = sorted(support, key=lambda i: (dist[i], i))
        total = float(np.sum([frac.y[i] for i in order]))
        if total < 1.0 - MASS_TOL:
            raise ValueError(
                f"client {j} serving mass {total:.12f} < 1; solution infeasible")
        prof = []
        cum = 0.0
        for i in order:
            take = min(float(frac.y[i]), 1.0 - cum)
            if take <= 0.0:
                break
            prof.append([i, take])
            cum += take
            if cum >= 1.0 - 1e-15:
                break
        prof[-1][1] += 1.0 - cum  # force the profile mass to exactly 1
        profiles.append([(i, m) for i, m in prof])
    return profiles


def _merge_cuts(values, upper):
    """Sorted cut points in (0, upper), merged within CUT_MERGE_TOL."""
    cuts = sorted(v for v in values if CUT_MERGE_TOL < v < upper - CUT_MERGE_TOL)
    merged = []
    for v in cuts:
        if not merged or v - merged[-1] > CUT_MERGE_TOL:
            merged.append(v)
    return merged


def filter_solution(frac: FractionalSolution, gamma: float) -> FilteredSolution:
    """Scale openings by gamma and rebuild a complete solution on split
    facility copies; gamma < 1 is rejected."""
    if gamma < 1.0:
        raise ValueError(f"gamma must be at least 1, got {gamma}")
    inst = frac.inst
    n_c, n_f = inst.dist.shape
    profiles = _unit_profiles(frac)
    ybar_orig = gamma * frac.y

    # Close boundary per client: walk the scaled profile until mass 1.
    # takes[j] holds (facility, scaled_take, close_take).
    takes = []
    cut_sets = [[] for _ in range(n_f)]
    for j in range(n_c):
        cum = 0.0
        rows = []
        for i, m in profiles[j]:
            scaled = gamma * m
            close_take = min(scaled, 1.0 - cum)
            # snap to the interval ends so round-off never leaves sliver copies
            if close_take < CUT_MERGE_TOL:
                close_take = 0.0
            elif scaled - close_take < CUT_MERGE_TOL:
                close_take = scaled
            cum += close_take
            rows.append((i, scaled, close_take))
            cut_sets[i].append(scaled)
            cut_sets[i].append(close_take)
        takes.append(rows)

    # Unit-mass cuts keep every copy's opening probability at most 1.
    for i in range(n_f):
        k = 1.0
        while k < ybar_orig[i] - CUT_MERGE_TOL:
            cut_sets[i].append(k)
            k += 1.0

    split_map = []
    ybar = []
    copy_bounds = []                 # per copy: (lo, hi) within its facility
    copies_of = [[] for _ in range(n_f)]
    for i in range(n_f):
        if ybar_orig[i] <= CUT_MERGE_TOL:
            continue
        edges = [0.0] + _merge_cuts(cut_sets[i], ybar_orig[i]) + [float(ybar_orig[i])]
        for lo, hi in zip(edges[:-1], edges[1:]):
            copies_of[i].append(len(split_map))
            split_map.append(i)
            ybar.append(hi - lo)
            copy_bounds.append((lo, hi))

    close = []
    distant = []
    single = np.zeros(n_c, dtype=bool)
    for j in range(n_c):
        single[j] = len(takes[j]) == 1
        close_j = []
        distant_j = []
        for i, scaled, close_take in takes[j]:
            for s in copies_of[i]:
                lo, hi = copy_bounds[s]
                mid = 0.5 * (lo + hi)
                if mid >= scaled:
                    continue
                if mid < close_take:
                    close_j.append(s)
                elif not single[j]:
                    distant_j.append(s)
        close.append(np.array(sorted(close_j), dtype=int))
        distant.append(np.array(sorted(distant_j), dtype=int))

    return FilteredSolution(inst=inst, gamma=float(gamma),
                            y_frac=frac.y, split_map=np.array(split_map, dtype=int),
                            ybar=np.array(ybar), close=tuple(close),
                            distant=tuple(distant), single_support=single)


def distance_stats(fs: FilteredSolution, j: int) -> DistanceStats:
    """Mass-weighted close/distant distance averages and the clustering key."""
    if not 0 <= j < fs.inst.client_count:
        raise IndexError(f"client index {j} out of range")
    d = fs.copy_distances(j)
    c_idx = fs.close[j]
    w_c = fs.ybar[c_idx]
    mass_c = w_c.sum()
    avg_close = float((w_c @ d[c_idx]) / mass_c)
    max_close = float(d[c_idx].max())
    d_idx = fs.distant[j]
    if d_idx.size:
        w_d = fs.ybar[d_idx]
        mass_d = w_d.sum()
        avg_distant = float((w_d @ d[d_idx]) / mass_d)
        avg_all = float((w_c @ d[c_idx] + w_d @ d[d_idx]) / (mass_c + mass_d))
    else:
        avg_distant = None
        avg_all = avg_close
    return DistanceStats(avg_close=avg_close, avg_distant=avg_distant,
                         max_close=max_close, avg_all=avg_all,
                         cluster_key=max_close + avg_close)


def cluster(fs: FilteredSolution) -> ClusterStructure:
    """Greedy center selection in increasing cluster-key order (ties by
    client index); a client becomes a center iff its close copies are
    disjoint from every earlier center's, otherwise it joins the first
    center it shares a close copy with."""
    n_c = fs.inst.client_count
    keys = np.array([distance_stats(fs, j).cluster_key for j in range(n_c)])
    order = sorted(range(n_c), key=lambda j: (keys[j], j))
    center_of = np.full(n_c, -1, dtype=int)
    centers = []
    claimed = np.zeros(fs.split_count, dtype=bool)
    for j in order:
        if center_of[j] >= 0:
            continue
        centers.append(j)
        center_of[j] = j
        claimed[fs.close[j]] = True
        for k in order:
            if center_of[k] < 0 and claimed[fs.close[k]].any():
                center_of[k] = j
    return ClusterStructure(centers=np.array(centers, dtype=int),
                            center_of=center_of, keys=keys)


def _center_choice_tables(fs, cs):
    """Per center: (copy indices, normalized cumulative masses)."""
    tables = []
    for c in cs.centers:
        idx = fs.close[c]
        cum = np.cumsum(fs.ybar[idx])
        cum /= cum[-1]
        tables.append((idx, cum))
    return tables


def _assignment_from_copies(fs, open_copy):
    """Merge copies to originals and assign clients to the nearest open
    original facility (ties by index)."""
    inst = fs.inst
    open_orig = np.zeros(inst.facility_count, dtype=bool)
    open_orig[fs.split_map[open_copy]] = True
    open_idx = np.nonzero(open_orig)[0]
    sub = inst.dist[:, open_idx]
    pos = np.argmin(sub, axis=1)
    assignment = open_idx[pos]
    client_costs = sub[np.arange(inst.client_count), pos]
    facility_cost = float(inst.opening_cost[open_idx].sum())
    return open_idx, assignment, facility_cost, client_costs


def round_once(fs: FilteredSolution, cs: ClusterStructure, seed) -> IntegralSolution:
    """One randomized rounding draw.

    Every center opens exactly one of its close copies with probability
    equal to the copy's mass; every other copy opens independently with its
    own mass.  Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(seed)
    tables = _center_choice_tables(fs, cs)
    in_center = np.zeros(fs.split_count, dtype=bool)
    for idx, _ in tables:
        in_center[idx] = True
    ind_idx = np.nonzero(~in_center & (fs.ybar > 0))[0]

    open_copy = np.zeros(fs.split_count, dtype=bool)
    u_centers = rng.random(len(tables))
    for (idx, cum), u in zip(tables, u_centers):
        open_copy[idx[np.searchsorted(cum, u, side="right")]] = True
    u_ind = rng.random(ind_idx.size)
    open_copy[ind_idx] = u_ind < fs.ybar[ind_idx]

    open_idx, assignment, facility_cost, client_costs = \
        _assignment_from_copies(fs, open_copy)
    return IntegralSolution(open_facilities=open_idx, assignment=assignment,
                            facility_cost=facility_cost,
                            client_costs=client_costs,
                            gamma=fs.gamma, seed=seed)


def estimate_cost(fs: FilteredSolution, cs: ClusterStructure,
                  trials: int, seed) -> MonteCarloEstimate:
    """Monte Carlo cost estimate over independent rounding draws.

    Trials are drawn in fixed-size batches from a single seeded generator,
    one row of uniforms per trial, so the estimate is reproducible and
    independent of how the batches are executed.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    inst = fs.inst
    rng = np.random.default_rng(seed)
    tables = _center_choice_tables(fs, cs)
    in_center = np.zeros(fs.split_count, dtype=bool)
    for idx, _ in tables:
        in_center[idx] = True
    ind_idx = np.nonzero(~in_center & (fs.ybar > 0))[0]
    p_ind = fs.ybar[ind_idx]
    f_copy = inst.opening_cost[fs.split_map]
    onehot = np.zeros((fs.split_count, inst.facility_count))
    onehot[np.arange(fs.split_count), fs.split_map] = 1.0

    n_c = inst.client_count
    fac_split = np.empty(trials)
    fac_merged = np.empty(trials)
    conn = np.empty(trials)
    client_sum = np.zeros(n_c)
    client_sumsq = np.zeros(n_c)

    done = 0
    while done < trials:
        s = min(_CHUNK, trials - done)
        u_c = rng.random((s, len(tables)))
        u_i = rng.random((s, ind_idx.size))
        open_copy = np.zeros((s, fs.split_count), dtype=bool)
        rows = np.arange(s)
        for k, (idx, cum) in enumerate(tables):
            open_copy[rows, idx[np.searchsorted(cum, u_c[:, k], side="right")]] = True
        if ind_idx.size:
            open_copy[:, ind_idx] = u_i < p_ind[None, :]
        fac_split[done:done + s] = open_copy @ f_copy
        open_orig = (open_copy @ onehot) > 0.0
        fac_merged[done:done + s] = open_orig @ inst.opening_cost
        dmin = np.where(open_orig[:, None, :], inst.dist[None, :, :], np.inf).min(axis=2)
        conn[done:done + s] = dmin.sum(axis=1)
        client_sum += dmin.sum(axis=0)
        client_sumsq += (dmin * dmin).sum(axis=0)
        done += s

    def _stats(arr):
        mean = float(arr.mean())
        if trials == 1:
            return mean, None
        return mean, float(arr.std(ddof=1) / np.sqrt(trials))

    fac_mean, fac_se = _stats(fac_split)
    mrg_mean, mrg_se = _stats(fac_merged)
    conn_mean, conn_se = _stats(conn)
    pc_mean = client_sum / trials
    if trials == 1:
        pc_se = None
    else:
        var = (client_sumsq - trials * pc_mean ** 2) / (trials - 1)
        pc_se = np.sqrt(np.maximum(var, 0.0) / trials)
    return MonteCarloEstimate(trials=trials,
                              facility_mean=fac_mean, facility_stderr=fac_se,
                              merged_facility_mean=mrg_mean,
                              merged_facility_stderr=mrg_se,
                              connection_mean=conn_mean, connection_stderr=conn_se,
                              per_client_mean=pc_mean, per_client_stderr=pc_se)


def open_copy_frequencies(fs: FilteredSolution, cs: ClusterStructure,
                          trials: int, seed) -> np.ndarray:
    """Empirical opening frequency of every copy over `trials` draws; uses
    the same batched draw layout as estimate_cost."""
    rng = np.random.default_rng(seed)
    tables = _center_choice_tables(fs, cs)
    in_center = np.zeros(fs.split_count, dtype=bool)
    for idx, _ in tables:
        in_center[idx] = True
    ind_idx = np.nonzero(~in_center & (fs.ybar > 0))[0]
    p_ind = fs.ybar[ind_idx]
    counts = np.zeros(fs.split_count)
    done = 0
    while done < trials:
        s = min(_CHUNK, trials - done)
        u_c = rng.random((s, len(tables)))
        u_i = rng.random((s, ind_idx.size))
        open_copy = np.zeros((s, fs.split_count), dtype=bool)
        rows = np.arange(s)
        for k, (idx, cum) in enumerate(tables):
            open_copy[rows, idx[np.searchsorted(cum, u_c[:, k], side="right")]] = True
        if ind_idx.size:
            open_copy[:, ind_idx] = u_i < p_ind[None, :]
        counts += open_copy.sum(axis=0)
        done += s
    return counts / trials


def backup_distance_check(fs: FilteredSolution, cs: ClusterStructure,
                          j: int) -> BackupDistanceCheck:
    """Check the fallback-distance bounds for a non-center client.

    lhs is the mass-weighted average distance from j to its center's close
    copies whose original facility does not serve j.  rhs_basic is
    avg_distant + max_close + avg_close of j itself; rhs_refined is
    (2-gamma) max_close(j) + (gamma-1) avg_distant(j) + max_close(center)
    + avg_close(center).  The refined bound is only meaningful for
    gamma <= 2; gamma_in_range flags that.
    """
    if cs.is_center(j):
        raise ValueError(f"client {j} is a cluster center; check applies to "
                         "non-center clients")
    gamma = fs.gamma
    center = int(cs.center_of[j])
    own_originals = set(int(fs.split_map[s]) for s in fs.close[j])
    own_originals.update(int(fs.split_map[s]) for s in fs.distant[j])
    target = [s for s in fs.close[center]
              if int(fs.split_map[s]) not in own_originals]
    if not target:
        return BackupDistanceCheck(
            applicable=False,
            reason="center's close copies all share originals with the client")
    stats_j = distance_stats(fs, j)
    if stats_j.avg_distant is None:
        return BackupDistanceCheck(
            applicable=False,
            reason="client has a single serving facility; distant average undefined")
    stats_c = distance_stats(fs, center)
    target = np.array(target, dtype=int)
    w = fs.ybar[target]
    d = fs.copy_distances(j)[target]
    lhs = float((w @ d) / w.sum())
    rhs_basic = stats_j.avg_distant + stats_j.max_close + stats_j.avg_close
    rhs_refined = ((2.0 - gamma) * stats_j.max_close
                   + (gamma - 1.0) * stats_j.avg_distant
                   + stats_c.max_close + stats_c.avg_close)
    holds = lhs <= min(rhs_basic, rhs_refined) + 1e-9
    return BackupDistanceCheck(applicable=True, lhs=lhs, rhs_basic=rhs_basic,
                               rhs_refined=rhs_refined, holds=bool(holds),
                               gamma_in_range=bool(gamma <= 2.0 + 1e-12))


def client_cost_diagnostic(fs: FilteredSolution, j: int) -> float | None:
    """Heuristic per-client expected-cost expression
    (1 - 1/e + e^-gamma) avg_close + (1/e + e^-gamma) avg_distant; exposed
    for inspection only, not asserted anywhere (it is not a safe bound at
    small gamma)."""
    stats = distance_stats(fs, j)
    if stats.avg_distant is None:
        return None
    g = fs.gamma
    e_inv = float(np.exp(-1.0))
    e_g = float(np.exp(-g))
    return (1.0 - e_inv + e_g) * stats.avg_close + (e_inv + e_g) * stats.avg_distant


def solution_to_dict(sol: IntegralSolution) -> dict:
    out = {
        "open": [int(i) for i in sol.open_facilities],
        "assignment": [int(i) for i in sol.assignment],
        "facility_cost": sol.facility_cost,
        "connection_cost": sol.connection_cost,
    }
    if sol.seed is not None:
        out["seed"] = sol.seed
    if sol.gamma is not None:
        out["gamma"] = sol.gamma
    return out


def write_solution(sol: IntegralSolution, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(solution_to_dict(sol), fh, indent=1)
        fh.write("\n")
