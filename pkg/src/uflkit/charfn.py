"""Step-function algebra for client service profiles.

A service profile maps a mass fraction p in [0, 1] to the distance at which
that fraction of a client's fractional service is reached, facilities taken
nearest-first.  Profiles are non-decreasing piecewise-constant functions with
the value convention fixed to the left-continuous one: the value on
(p_{t-1}, p_t] is c_t, and the value at 0 is c_1.  The same convention is
applied to threshold functions so that evaluation at an exact breakpoint is
unambiguous everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MASS_TOL = 1e-9


class DegenerateFunctionError(ValueError):
    """Raised when an all-zero profile cannot be normalized; callers treat
    the connection cost as zero instead."""


@dataclass(frozen=True)
class PiecewiseConstant:
    """Non-decreasing step function on [0, 1].

    bounds: breakpoints 0 = p_0 < p_1 < ... < p_m = 1 (length m+1).
    values: c_1 ... c_m, the value on (p_{t-1}, p_t]   (length m).
    """

    bounds: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bounds = np.asarray(self.bounds, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if bounds.ndim != 1 or values.ndim != 1 or bounds.size != values.size + 1:
            raise ValueError("need m+1 breakpoints for m pieces")
        if bounds[0] != 0.0 or bounds[-1] != 1.0:
            raise ValueError("domain must be exactly [0, 1]")
        if np.any(np.diff(bounds) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if np.any(values < 0):
            raise ValueError("values must be nonnegative")
        if np.any(np.diff(values) < 0):
            raise ValueError("values must be non-decreasing")
        bounds.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_steps(cls, bounds, values):
        """Build after merging adjacent pieces with identical values."""
        bounds = np.asarray(bounds, dtype=float)
        values = np.asarray(values, dtype=float)
        if values.size > 1:
            keep = np.nonzero(np.diff(values) != 0.0)[0]
            sel_bounds = np.concatenate(([0.0], bounds[keep + 1], [1.0]))
            sel_values = np.concatenate((values[keep], [values[-1]]))
            return cls(sel_bounds, sel_values)
        return cls(bounds, values)

    def __call__(self, p):
        """Evaluate with the left-continuous convention; accepts scalars or
        arrays of points in [0, 1]."""
        arr = np.asarray(p, dtype=float)
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise ValueError("argument outside [0, 1]")
        idx = np.searchsorted(self.bounds, arr, side="left")
        idx = np.maximum(idx, 1)
        out = self.values[idx - 1]
        return float(out) if np.isscalar(p) or arr.ndim == 0 else out

    def scaled(self, factor):
        if factor < 0:
            raise ValueError("scale factor must be nonnegative")
        return PiecewiseConstant(self.bounds, self.values * factor)

    def __add__(self, other):
        if not isinstance(other, PiecewiseConstant):
            return NotImplemented
        return sum_functions([self, other])


def sum_functions(fns) -> PiecewiseConstant:
    """Pointwise sum over the union of all breakpoints."""
    fns = list(fns)
    if not fns:
        raise ValueError("cannot sum an empty collection of functions")
    bounds = np.unique(np.concatenate([f.bounds for f in fns]))
    uppers = bounds[1:]  # value on (bounds[k], bounds[k+1]] is the value there
    total = np.zeros(uppers.size)
    for f in fns:
        idx = np.searchsorted(f.bounds, uppers, side="left")
        total += f.values[np.maximum(idx, 1) - 1]
    return PiecewiseConstant.from_steps(bounds, total)


def integral(h: PiecewiseConstant) -> float:
    """Exact integral: sum of value * piece width."""
    return float(np.dot(h.values, np.diff(h.bounds)))


def normalize(h: PiecewiseConstant) -> PiecewiseConstant:
    """Scale so the integral is 1; an all-zero function is degenerate."""
    total = integral(h)
    if total <= 0.0:
        raise DegenerateFunctionError("cannot normalize a profile with zero mass")
    return PiecewiseConstant(h.bounds, h.values / total)


def threshold(q: float) -> PiecewiseConstant:
    """0 up to q, then 1/(1-q): the unit-integral step at q."""
    if not 0.0 <= q < 1.0:
        raise ValueError(f"threshold position must lie in [0, 1), got {q}")
    if q == 0.0:
        return PiecewiseConstant(np.array([0.0, 1.0]), np.array([1.0]))
    return PiecewiseConstant(np.array([0.0, q, 1.0]),
                             np.array([0.0, 1.0 / (1.0 - q)]))


@dataclass(frozen=True)
class ThresholdTerm:
    q: float
    weight: float

    def __post_init__(self):
        if not 0.0 <= self.q < 1.0:
            raise ValueError("threshold position must lie in [0, 1)")
        if self.weight < 0.0:
            raise ValueError("weight must be nonnegative")


def decompose(h: PiecewiseConstant) -> list[ThresholdTerm]:
    """Write h as a nonnegative combination of threshold functions.

    With c_0 := 0, every upward jump at p_i contributes the term
    (q = p_i, weight = (c_{i+1} - c_i) (1 - p_i)); the weights sum to the
    integral of h and the combination reproduces h pointwise.
    """
    terms = []
    prev = 0.0
    for p_i, c_next in zip(h.bounds[:-1], h.values):
        jump = c_next - prev
        if jump > 0.0:
            terms.append(ThresholdTerm(q=float(p_i), weight=float(jump * (1.0 - p_i))))
        prev = c_next
    return terms


def reconstruct(terms) -> PiecewiseConstant:
    """Sum of weight-scaled threshold functions; inverse of `decompose`."""
    parts = [threshold(t.q).scaled(t.weight) for t in terms]
    if not parts:
        return PiecewiseConstant(np.array([0.0, 1.0]), np.array([0.0]))
    return sum_functions(parts)


def characteristic_of_client(frac, j: int) -> PiecewiseConstant:
    """Distance-to-mass profile of client j under a fractional solution.

    Facilities serving j are sorted by distance (ties by index); the profile
    value at mass p is the distance of the facility holding the p-th unit of
    fractional opening, truncated at total mass 1.
    """
    support = frac.support[j]
    if len(support) == 0:
        raise ValueError(f"client {j} has no serving facilities")
    dist = frac.inst.dist[j]
    order = sorted(support, key=lambda i: (dist[i], i))
    y = frac.y
    total = float(np.sum([y[i] for i in order]))
    if total < 1.0 - MASS_TOL:
        raise ValueError(
            f"client {j} has serving mass {total:.12f} < 1; solution infeasible")
    bounds = [0.0]
    values = []
    cum = 0.0
    for i in order:
        take = min(float(y[i]), 1.0 - cum)
        cum += take
        if cum >= 1.0 - 1e-15:
            cum = 1.0
        if cum > bounds[-1]:
            bounds.append(cum)
            values.append(float(dist[i]))
        if cum >= 1.0:
            break
    bounds[-1] = 1.0
    return PiecewiseConstant.from_steps(np.array(bounds), np.array(values))


def characteristic_of_instance(frac) -> PiecewiseConstant:
    """Sum of all per-client profiles; its integral equals the fractional
    connection cost."""
    n_c = frac.inst.client_count
    if n_c == 0:
        raise ValueError("instance has no clients")
    return sum_functions(characteristic_of_client(frac, j) for j in range(n_c))


def connection_bound(gamma: float, h: PiecewiseConstant) -> float:
    """Upper bound on the expected connection cost of the gamma-scaled
    rounding against profile h:

        int_0^1 h(p) gamma e^{-gamma p} dp
          + e^{-gamma} (gamma int_0^1 h + (3 - gamma) h(1/gamma))

    Each piece is integrated exactly via
    int_a^b gamma e^{-gamma p} dp = e^{-gamma a} - e^{-gamma b}.
    """
    if gamma < 1.0:
        raise ValueError("gamma must be at least 1")
    bounds = h.bounds
    values = h.values
    if values.size <= 4:
        acc = 0.0
        mass = 0.0
        prev_exp = math.exp(-gamma * bounds[0])
        for t in range(values.size):
            nxt_exp = math.exp(-gamma * bounds[t + 1])
            acc += values[t] * (prev_exp - nxt_exp)
            mass += values[t] * (bounds[t + 1] - bounds[t])
            prev_exp = nxt_exp
    else:
        exps = np.exp(-gamma * bounds)
        acc = float(np.dot(values, exps[:-1] - exps[1:]))
        mass = float(np.dot(values, np.diff(bounds)))
    tail = math.exp(-gamma) * (gamma * mass + (3.0 - gamma) * h(1.0 / gamma))
    return float(acc + tail)


def unit_connection_bound(gamma: float, h: PiecewiseConstant) -> float:
    """`connection_bound` restricted to unit-integral profiles; this is the
    normalized connection-cost factor used in the strategy game."""
    if abs(integral(h) - 1.0) > MASS_TOL:
        raise ValueError("profile must have unit integral; normalize first")
    return connection_bound(gamma, h)


def export_csv(h: PiecewiseConstant, path) -> None:
    """Write (upper breakpoint, value) rows."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("p_upper,value\n")
        for p, c in zip(h.bounds[1:], h.values):
            fh.write(f"{p!r},{c!r}\n")
