"""Discretized two-coordinate strategy game and its approachability frontier.

The algorithm designer mixes over {greedy baseline} + {scaling parameters
gamma}; the adversary mixes over threshold profiles indexed by q.  A pure
profile pair yields the payoff vector

    (facility coordinate, connection coordinate)
        = (gamma, unit_connection_bound(gamma, h_q))       for a gamma row
        = (1.11, 1.78)                                     for the baseline row

The corner region {x <= beta, y <= beta} is approachable exactly when every
supporting line phi*x + (1-phi)*y = beta is, which reduces per phi to a
scalar zero-sum game; the frontier is beta* = max over phi of the game value
V(phi).  A blocking adversary mix at phi certifies V(phi) > beta.
"""

from __future__ import annotations

import math
import multiprocessing
from dataclasses import dataclass, field

import numpy as np

from . import charfn
from .jms import CONNECTION_FACTOR, FACILITY_FACTOR
from .linprog import FEAS_TOL, solve_matrix_game

#: Scaling factor above which the scaled-rounding algorithm alone matches
#: the bifactor hardness curve 1 + 2 e^{-gamma}.
CROSSOVER_GAMMA = 1.67736


@dataclass(frozen=True)
class GameGrid:
    """Strategy grids: gamma on [1, M], q on [0, 1), phi on [0, 1]."""

    gamma_grid: np.ndarray
    p_grid: np.ndarray
    phi_grid: np.ndarray
    include_jms: bool = True

    def __post_init__(self):
        g = np.asarray(self.gamma_grid, dtype=float)
        p = np.asarray(self.p_grid, dtype=float)
        phi = np.asarray(self.phi_grid, dtype=float)
        if g.size == 0 and not self.include_jms:
            raise ValueError("need at least one strategy: a gamma row or the "
                             "greedy baseline")
        for name, arr in (("gamma_grid", g), ("p_grid", p), ("phi_grid", phi)):
            if arr.size and np.any(np.diff(arr) <= 0):
                raise ValueError(f"{name} must be strictly increasing")
        if g.size and g[0] < 1.0:
            raise ValueError("gamma grid must start at 1 or above")
        if p.size == 0 or p[0] < 0.0 or p[-1] >= 1.0:
            raise ValueError("p grid must be nonempty inside [0, 1)")
        if phi.size == 0 or phi[0] < 0.0 or phi[-1] > 1.0:
            raise ValueError("phi grid must be nonempty inside [0, 1]")
        for name, arr in (("gamma_grid", g), ("p_grid", p), ("phi_grid", phi)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def uniform(cls, k_gamma=200, k_p=200, k_phi=200, gamma_max=3.0,
                include_jms=True):
        """Evenly spaced grids: k_gamma points on [1, gamma_max], k_p points
        i/k_p on [0, 1), k_phi points on [0, 1]."""
        if min(k_gamma, k_p, k_phi) < 2:
            raise ValueError("grid sizes must be at least 2")
        return cls(gamma_grid=np.linspace(1.0, gamma_max, k_gamma),
                   p_grid=np.arange(k_p) / k_p,
                   phi_grid=np.linspace(0.0, 1.0, k_phi),
                   include_jms=include_jms)

    def describe(self):
        return {
            "k_gamma": int(self.gamma_grid.size),
            "k_p": int(self.p_grid.size),
            "k_phi": int(self.phi_grid.size),
            "gamma_max": float(self.gamma_grid[-1]) if self.gamma_grid.size else None,
            "include_jms": self.include_jms,
        }


@dataclass(frozen=True)
class PayoffVector:
    c_f: float
    c_c: float


def payoff(theta: int, gamma: float, q: float) -> PayoffVector:
    """Pure-strategy payoff vector; theta=1 plays the greedy baseline."""
    if theta not in (0, 1):
        raise ValueError("theta must be 0 or 1 for pure strategies")
    if theta == 1:
        return PayoffVector(FACILITY_FACTOR, CONNECTION_FACTOR)
    if gamma < 1.0:
        raise ValueError("gamma must be at least 1")
    if not 0.0 <= q < 1.0:
        raise ValueError("q must lie in [0, 1)")
    return PayoffVector(float(gamma),
                        charfn.unit_connection_bound(gamma, charfn.threshold(q)))


@dataclass(frozen=True)
class GameMatrices:
    """Row-player payoff matrices: rows are the designer's pure strategies
    (baseline row first when enabled, then the gamma rows), columns the
    adversary's thresholds.  The facility matrix is column-constant."""

    grid: GameGrid
    m_f: np.ndarray
    m_c: np.ndarray

    @property
    def row_count(self):
        return self.m_f.shape[0]


def build_matrices(grid: GameGrid) -> GameMatrices:
    offset = 1 if grid.include_jms else 0
    n_rows = offset + grid.gamma_grid.size
    k_p = grid.p_grid.size
    m_f = np.empty((n_rows, k_p))
    m_c = np.empty((n_rows, k_p))
    if grid.include_jms:
        m_f[0] = FACILITY_FACTOR
        m_c[0] = CONNECTION_FACTOR
    thresholds = [charfn.threshold(float(q)) for q in grid.p_grid]
    for r, gamma in enumerate(grid.gamma_grid, start=offset):
        m_f[r] = gamma
        for col, h_q in enumerate(thresholds):
            m_c[r, col] = charfn.unit_connection_bound(float(gamma), h_q)
    return GameMatrices(grid=grid, m_f=m_f, m_c=m_c)


@dataclass(frozen=True)
class StrategyA:
    """Designer mix: baseline probability theta plus weights on scaling
    parameters, as point masses and uniform-density segments."""

    theta: float
    atoms: tuple = ()     # ((gamma, weight), ...)
    segments: tuple = ()  # ((lo, hi, weight), ...)

    def __post_init__(self):
        total = self.theta + sum(w for _, w in self.atoms) \
            + sum(w for _, _, w in self.segments)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"strategy weights sum to {total}, expected 1")
        if self.theta < -1e-12 or any(w < -1e-12 for _, w in self.atoms) \
                or any(w < -1e-12 for _, _, w in self.segments):
            raise ValueError("strategy weights must be nonnegative")
        for lo, hi, _ in self.segments:
            if not 1.0 <= lo < hi:
                raise ValueError("segments need 1 <= lo < hi")


@dataclass(frozen=True)
class ReferenceStrategy:
    """Published near-optimal mix: play the greedy baseline with probability
    theta, a point mass of the scaling parameter at gamma_low, and the rest
    uniformly on [gamma_low, gamma_high]."""

    theta: float = 0.2
    atom_mass: float = 0.5
    gamma_low: float = 1.479
    gamma_high: float = 2.016

    def to_strategy(self) -> StrategyA:
        tail = 1.0 - self.theta - self.atom_mass
        return StrategyA(theta=self.theta,
                         atoms=((self.gamma_low, self.atom_mass),),
                         segments=((self.gamma_low, self.gamma_high, tail),))


@dataclass(frozen=True)
class HalfspaceResult:
    """Scalar game at one supporting line: V(phi) with both optimal mixes.
    The halfspace {phi x + (1-phi) y <= beta} is approachable iff
    V(phi) <= beta; otherwise b_mix is a blocking adversary strategy."""

    phi: float
    value: float
    a_mix: StrategyA
    b_mix: np.ndarray


def _a_mix_from_weights(grid: GameGrid, weights) -> StrategyA:
    offset = 1 if grid.include_jms else 0
    theta = float(weights[0]) if grid.include_jms else 0.0
    atoms = tuple((float(g), float(w))
                  for g, w in zip(grid.gamma_grid, weights[offset:]) if w > 0.0)
    drift = 1.0 - theta - sum(w for _, w in atoms)
    if atoms and abs(drift) > 0:
        # fold normalization round-off into the largest atom
        k = max(range(len(atoms)), key=lambda t: atoms[t][1])
        atoms = tuple((g, w + drift) if t == k else (g, w)
                      for t, (g, w) in enumerate(atoms))
    return StrategyA(theta=theta, atoms=atoms)


def halfspace_value(phi: float, matrices: GameMatrices) -> HalfspaceResult:
    """Solve the scalarized zero-sum game at phi (designer minimizes,
    adversary maximizes)."""
    if not 0.0 <= phi <= 1.0:
        raise ValueError("phi must lie in [0, 1]")
    scalarized = phi * matrices.m_f + (1.0 - phi) * matrices.m_c
    game = solve_matrix_game(scalarized.T)  # adversary is the maximizing rows
    return HalfspaceResult(phi=float(phi), value=float(game.value),
                           a_mix=_a_mix_from_weights(matrices.grid, game.col_mix),
                           b_mix=game.row_mix)


@dataclass(frozen=True)
class FrontierResult:
    beta_star: float
    phi_star: float
    phi_grid: np.ndarray
    values: np.ndarray
    witness: HalfspaceResult
    grid: GameGrid


_WORK_MATRICES = None


def _worker_init(matrices):
    global _WORK_MATRICES
    _WORK_MATRICES = matrices


def _worker_value(item):
    idx, phi = item
    return idx, halfspace_value(phi, _WORK_MATRICES).value


def _values_over_phi(matrices: GameMatrices, jobs: int) -> np.ndarray:
    phis = matrices.grid.phi_grid
    values = np.empty(phis.size)
    if jobs <= 1 or phis.size < 4:
        for k, phi in enumerate(phis):
            values[k] = halfspace_value(float(phi), matrices).value
        return values
    ctx = multiprocessing.get_context("fork")
    with ctx.Pool(processes=jobs, initializer=_worker_init,
                  initargs=(matrices,)) as pool:
        for idx, val in pool.imap_unordered(
                _worker_value, list(enumerate(phis.tolist())), chunksize=4):
            values[idx] = val
    return values


def frontier(grid: GameGrid, jobs: int = 1,
             matrices: GameMatrices | None = None) -> FrontierResult:
    """beta* = max over the phi grid of V(phi), with the adversary witness
    at the maximizing phi.  Deterministic and independent of job count."""
    if matrices is None:
        matrices = build_matrices(grid)
    values = _values_over_phi(matrices, jobs)
    k_star = int(np.argmax(values))
    phi_star = float(grid.phi_grid[k_star])
    witness = halfspace_value(phi_star, matrices)
    return FrontierResult(beta_star=float(values[k_star]), phi_star=phi_star,
                          phi_grid=grid.phi_grid, values=values,
                          witness=witness, grid=grid)


@dataclass(frozen=True)
class BetaCheck:
    beta: float
    approachable: bool
    margin: float                  # max over phi of V(phi) - beta
    blocking_phi: float | None = None
    witness_b: np.ndarray | None = None
    values: np.ndarray | None = None


def check_beta(beta: float, grid: GameGrid, jobs: int = 1,
               matrices: GameMatrices | None = None) -> BetaCheck:
    """Is the corner {x <= beta, y <= beta} approachable on this grid?

    Blocked when some phi has V(phi) > beta beyond the solver tolerance; the
    witness is the adversary mix at the first blocking phi, which beats beta
    against every designer row simultaneously."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    if matrices is None:
        matrices = build_matrices(grid)
    values = _values_over_phi(matrices, jobs)
    margin = float(values.max() - beta)
    blocked = np.nonzero(values - beta > FEAS_TOL)[0]
    if blocked.size == 0:
        return BetaCheck(beta=beta, approachable=True, margin=margin,
                         values=values)
    k = int(blocked[0])
    witness = halfspace_value(float(grid.phi_grid[k]), matrices)
    return BetaCheck(beta=beta, approachable=False, margin=margin,
                     blocking_phi=float(grid.phi_grid[k]),
                     witness_b=witness.b_mix, values=values)


@dataclass(frozen=True)
class WitnessProfile:
    """Adversary witness as (q, weight) terms sorted by descending weight."""

    terms: tuple
    mass_at_min_q: float
    max_other_weight: float

    def to_function(self) -> charfn.PiecewiseConstant:
        """Reassemble the witness into the profile it represents."""
        terms = [charfn.ThresholdTerm(q=q, weight=max(w, 0.0))
                 for q, w in self.terms if w > 0.0]
        return charfn.reconstruct(terms)


def witness_profile(result: FrontierResult) -> WitnessProfile:
    q = result.grid.p_grid
    w = result.witness.b_mix
    order = sorted(range(q.size), key=lambda k: (-w[k], k))
    terms = tuple((float(q[k]), float(w[k])) for k in order)
    mass_min_q = float(w[0])
    others = np.delete(w, 0)
    return WitnessProfile(terms=terms, mass_at_min_q=mass_min_q,
                          max_other_weight=float(others.max()) if others.size else 0.0)


@dataclass(frozen=True)
class BestResponse:
    gamma: float
    theta: float
    ratio: float


def _balanced_theta(gamma: float, conn: float):
    """Candidate thetas minimizing max of the two linear coordinates."""
    cands = [0.0, 1.0]
    denom = (gamma - conn) + (CONNECTION_FACTOR - FACILITY_FACTOR)
    if denom != 0.0:
        t = (gamma - conn) / denom
        if 0.0 < t < 1.0:
            cands.append(t)
    return cands


def best_response(h: charfn.PiecewiseConstant | None,
                  grid: GameGrid) -> BestResponse:
    """Best single scaling parameter with its balancing baseline probability
    against a fixed unit profile h (None means a zero-connection-cost
    profile, so only the facility coordinate matters)."""
    best = None
    for gamma in grid.gamma_grid:
        g = float(gamma)
        conn = 0.0 if h is None else charfn.unit_connection_bound(g, h)
        for t in _balanced_theta(g, conn):
            c_f = (1.0 - t) * g + FACILITY_FACTOR * t
            c_c = (1.0 - t) * conn + CONNECTION_FACTOR * t
            val = max(c_f, c_c)
            if best is None or val < best.ratio - 1e-15:
                best = BestResponse(gamma=g, theta=float(t), ratio=float(val))
    return best


def strategy_coordinates(a: StrategyA | ReferenceStrategy,
                         h: charfn.PiecewiseConstant,
                         quad_points: int = 256):
    """Expected (facility, connection) coordinates of a designer mix against
    a unit profile; uniform segments integrate the connection coordinate by
    the trapezoid rule on quad_points+1 nodes."""
    if isinstance(a, ReferenceStrategy):
        a = a.to_strategy()
    c_f = FACILITY_FACTOR * a.theta
    c_c = CONNECTION_FACTOR * a.theta
    for gamma, w in a.atoms:
        c_f += w * gamma
        c_c += w * charfn.unit_connection_bound(gamma, h)
    for lo, hi, w in a.segments:
        if w == 0.0:
            continue
        gs = np.linspace(lo, hi, quad_points + 1)
        vals = np.array([charfn.unit_connection_bound(float(g), h) for g in gs])
        c_f += w * 0.5 * (lo + hi)
        c_c += w * float(np.trapezoid(vals, gs)) / (hi - lo)
    return c_f, c_c


def evaluate_strategy(a: StrategyA | ReferenceStrategy,
                      h: charfn.PiecewiseConstant,
                      quad_points: int = 256) -> float:
    """Worst coordinate of the designer mix against profile h."""
    c_f, c_c = strategy_coordinates(a, h, quad_points=quad_points)
    return max(c_f, c_c)


def hardness_curve(gamma_f: float) -> float:
    """Connection factor below which no (gamma_f, .) guarantee is possible:
    1 + 2 e^{-gamma_f}."""
    if gamma_f < 1.0:
        raise ValueError("gamma_f must be at least 1")
    return 1.0 + 2.0 * math.exp(-gamma_f)
