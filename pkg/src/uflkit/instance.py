"""UFL instance data model: validation, generators, and file I/O.

An instance consists of facilities with opening costs, clients, and a dense
client-by-facility distance matrix.  Distances are expected to satisfy the
bipartite form of the triangle inequality,

    d(i, j) <= d(i, j') + d(i', j') + d(i', j)

for all clients j, j' and facilities i, i' (every facility-facility or
client-client hop goes through the other side of the bipartition).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

#: Absolute tolerance for metric checks; double-precision round-off on
#: unit-scale data never exceeds this.
METRIC_TOL = 1e-9

DEFAULT_COST_RANGE = (0.5, 2.0)


class InstanceFormatError(ValueError):
    """Raised for malformed instance files; carries the offending line."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class UflInstance:
    """Immutable UFL instance.

    opening_cost has shape (n_facilities,); dist has shape
    (n_clients, n_facilities), i.e. dist[j, i] = d(facility i, client j).
    """

    opening_cost: np.ndarray
    dist: np.ndarray

    def __post_init__(self):
        opening = np.asarray(self.opening_cost, dtype=float)
        dist = np.atleast_2d(np.asarray(self.dist, dtype=float))
        if opening.ndim != 1 or opening.size == 0:
            raise ValueError("opening_cost must be a nonempty 1-d array")
        if dist.ndim != 2 or dist.shape[0] == 0:
            raise ValueError("dist must be a nonempty 2-d array (clients x facilities)")
        if dist.shape[1] != opening.size:
            raise ValueError(
                f"dimension mismatch: {opening.size} opening costs but "
                f"{dist.shape[1]} facility columns in dist"
            )
        opening.setflags(write=False)
        dist.setflags(write=False)
        object.__setattr__(self, "opening_cost", opening)
        object.__setattr__(self, "dist", dist)

    @property
    def facility_count(self):
        return self.opening_cost.size

    @property
    def client_count(self):
        return self.dist.shape[0]

    def solution_cost(self, open_set):
        """Cost of opening `open_set` and serving every client from its
        nearest open facility. Returns (facility_cost, connection_cost)."""
        open_set = np.asarray(sorted(set(int(i) for i in open_set)), dtype=int)
        if open_set.size == 0:
            raise ValueError("open_set must be nonempty")
        fac = float(self.opening_cost[open_set].sum())
        conn = float(self.dist[:, open_set].min(axis=1).sum())
        return fac, conn


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of `validate`: is_valid iff violations is empty.

    Each violation is (kind, indices, magnitude) where kind is one of
    'negative_opening_cost', 'nonfinite_opening_cost', 'negative_distance',
    'nonfinite_distance', 'triangle'.  For 'triangle' the indices are the
    quadruple (j, i, j_via, i_via) with d(i,j) exceeding the path bound.
    """

    is_valid: bool
    violations: tuple = field(default_factory=tuple)


def validate(inst: UflInstance, tol: float = METRIC_TOL) -> ValidationReport:
    """Check nonnegativity, finiteness, and the bipartite triangle inequality.

    Pure function: reports every violation beyond `tol` instead of failing
    on the first one.
    """
    violations = []
    f = inst.opening_cost
    d = inst.dist
    for i in np.nonzero(~np.isfinite(f))[0]:
        violations.append(("nonfinite_opening_cost", (int(i),), math.inf))
    for i in np.nonzero(np.isfinite(f) & (f < 0))[0]:
        violations.append(("negative_opening_cost", (int(i),), float(-f[i])))
    bad = ~np.isfinite(d)
    for j, i in zip(*np.nonzero(bad)):
        violations.append(("nonfinite_distance", (int(j), int(i)), math.inf))
    neg = np.isfinite(d) & (d < 0)
    for j, i in zip(*np.nonzero(neg)):
        violations.append(("negative_distance", (int(j), int(i)), float(-d[j, i])))

    if not violations:
        # d(i,j) <= d(i,j') + d(i',j') + d(i',j): chunk over j to keep the
        # 4-d broadcast (j, i, j', i') at working-set scale.
        n_c, n_f = d.shape
        via = d[:, :, None] + d[:, None, :]  # via[j', i, i'] = d(i,j') + d(i',j')
        for j in range(n_c):
            # bound[j', i, i'] = d(i,j') + d(i',j') + d(i',j)
            bound = via + d[j][None, None, :]
            excess = d[j][None, :, None] - bound
            for jv, i, iv in zip(*np.nonzero(excess > tol)):
                violations.append(
                    ("triangle", (int(j), int(i), int(jv), int(iv)),
                     float(excess[jv, i, iv]))
                )
    return ValidationReport(is_valid=not violations, violations=tuple(violations))


def generate_euclidean(n_f: int, n_c: int, seed: int,
                       cost_range=DEFAULT_COST_RANGE) -> UflInstance:
    """Random instance: points uniform in the unit square, Euclidean
    distances, opening costs uniform in `cost_range`. Deterministic for a
    fixed seed."""
    if n_f < 1 or n_c < 1:
        raise ValueError("facility and client counts must be >= 1")
    lo, hi = cost_range
    if not (0 <= lo <= hi):
        raise ValueError("cost_range must satisfy 0 <= lo <= hi")
    rng = np.random.default_rng(seed)
    fac_pts = rng.random((n_f, 2))
    cli_pts = rng.random((n_c, 2))
    opening = rng.uniform(lo, hi, size=n_f)
    dist = np.hypot(cli_pts[:, 0:1] - fac_pts[None, :, 0],
                    cli_pts[:, 1:2] - fac_pts[None, :, 1])
    return UflInstance(opening_cost=opening, dist=dist)


# ---------------------------------------------------------------------------
# File I/O
#
# Native text format (whitespace-delimited, '#' starts a comment):
#
#   ufl 1
#   facilities <n_f>
#   clients <n_c>
#   opening f_1 ... f_{n_f}
#   dist
#   <n_c rows of n_f decimals, row j = d(., j)>
#
# ORLIB "cap" reader: first line `m n`; m lines `capacity opening_cost`;
# then per client: demand followed by m allocation costs (tokens may wrap
# across lines).  Capacities are ignored (the problem is uncapacitated);
# demand-weighted allocation costs are taken as-is.
# ---------------------------------------------------------------------------


def _strip_comment(line):
    pos = line.find("#")
    return line if pos < 0 else line[:pos]


def _tokenize(path):
    """Yield (token, line_number) with comments stripped."""
    toks = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            for tok in _strip_comment(raw).split():
                toks.append((tok, lineno))
    return toks


class _TokenStream:
    def __init__(self, tokens, path):
        self.tokens = tokens
        self.pos = 0
        self.path = path
        self.last_line = tokens[-1][1] if tokens else 1

    def next(self, expect=None):
        if self.pos >= len(self.tokens):
            what = expect or "token"
            raise InstanceFormatError(f"unexpected end of file, expected {what}",
                                      line=self.last_line)
        tok, line = self.tokens[self.pos]
        self.pos += 1
        return tok, line

    def next_number(self, what):
        tok, line = self.next(expect=what)
        try:
            return float(tok), line
        except ValueError:
            raise InstanceFormatError(f"non-numeric token {tok!r} in {what}",
                                      line=line) from None

    def next_count(self, what):
        val, line = self.next_number(what)
        if val != int(val) or val < 1:
            raise InstanceFormatError(f"{what} must be a positive integer, got {val}",
                                      line=line)
        return int(val), line

    def expect_keyword(self, keyword):
        tok, line = self.next(expect=f"keyword {keyword!r}")
        if tok != keyword:
            raise InstanceFormatError(
                f"expected keyword {keyword!r}, found {tok!r}", line=line)
        return line


def _read_native(path) -> UflInstance:
    stream = _TokenStream(_tokenize(path), path)
    stream.expect_keyword("ufl")
    version, line = stream.next_number("format version")
    if version != 1:
        raise InstanceFormatError(f"unsupported format version {version}", line=line)
    stream.expect_keyword("facilities")
    n_f, _ = stream.next_count("facility count")
    stream.expect_keyword("clients")
    n_c, _ = stream.next_count("client count")
    stream.expect_keyword("opening")
    opening = np.empty(n_f)
    for i in range(n_f):
        opening[i], _ = stream.next_number("opening cost")
    stream.expect_keyword("dist")

    # Distance rows are line-oriented so row-length mismatches can be
    # reported against the offending line.
    dist = np.empty((n_c, n_f))
    rows = {}
    for tok, line in stream.tokens[stream.pos:]:
        rows.setdefault(line, []).append(tok)
    row_lines = sorted(rows)
    if len(row_lines) < n_c:
        raise InstanceFormatError(
            f"dist section has {len(row_lines)} rows, expected {n_c}",
            line=stream.last_line)
    if len(row_lines) > n_c:
        raise InstanceFormatError(
            f"dist section has {len(row_lines)} rows, expected {n_c}",
            line=row_lines[n_c])
    for j, line in enumerate(row_lines):
        toks = rows[line]
        if len(toks) != n_f:
            raise InstanceFormatError(
                f"dist row {j} has {len(toks)} entries, expected {n_f}", line=line)
        for i, tok in enumerate(toks):
            try:
                dist[j, i] = float(tok)
            except ValueError:
                raise InstanceFormatError(
                    f"non-numeric token {tok!r} in dist row {j}", line=line) from None
    return UflInstance(opening_cost=opening, dist=dist)


def _read_orlib(path) -> UflInstance:
    stream = _TokenStream(_tokenize(path), path)
    n_f, _ = stream.next_count("facility count")
    n_c, _ = stream.next_count("client count")
    opening = np.empty(n_f)
    for i in range(n_f):
        stream.next_number(f"capacity of facility {i}")  # ignored
        opening[i], _ = stream.next_number(f"opening cost of facility {i}")
    dist = np.empty((n_c, n_f))
    for j in range(n_c):
        stream.next_number(f"demand of client {j}")  # folded into costs already
        for i in range(n_f):
            dist[j, i], _ = stream.next_number(f"allocation cost ({j},{i})")
    if stream.pos != len(stream.tokens):
        tok, line = stream.tokens[stream.pos]
        raise InstanceFormatError(f"trailing token {tok!r} after instance data",
                                  line=line)
    return UflInstance(opening_cost=opening, dist=dist)


def read_instance(path, format: str = "native") -> UflInstance:
    if format == "native":
        return _read_native(path)
    if format == "orlib":
        return _read_orlib(path)
    raise ValueError(f"unknown instance format {format!r}")


def write_instance(inst: UflInstance, path) -> None:
    """Write the native format; 17 significant digits round-trip doubles
    exactly."""
    fmt = lambda x: f"{x:.17g}"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("ufl 1\n")
        fh.write(f"facilities {inst.facility_count}\n")
        fh.write(f"clients {inst.client_count}\n")
        fh.write("opening " + " ".join(fmt(x) for x in inst.opening_cost) + "\n")
        fh.write("dist\n")
        for row in inst.dist:
            fh.write(" ".join(fmt(x) for x in row) + "\n")
