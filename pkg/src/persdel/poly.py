"""Piecewise polynomials on a closed interval.

Each piece stores ascending coefficients in the local coordinate ``t - left_break``.
Evaluation at an interior breakpoint uses the right piece; the right end of the
domain uses the last piece.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Iterable, Sequence

import numpy as np

from .errors import DegreeOverflow, OutOfDomain

MAX_DEGREE = 6
_EPS = 1e-12


def _trim(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    n = len(c)
    while n > 1 and c[n - 1] == 0.0:
        n -= 1
    return c[:n]


def _shift(c: Sequence[float], h: float) -> np.ndarray:
    """Coefficients of p(t + h) given those of p(t)."""
    c = np.asarray(c, dtype=float)
    n = len(c)
    out = np.zeros(n)
    for k in range(n):
        for j in range(k, n):
            out[k] += c[j] * comb(j, k) * h ** (j - k)
    return out


def _compose(outer: Sequence[float], inner: Sequence[float]) -> np.ndarray:
    """Coefficients of outer(inner(t))."""
    res = np.zeros(1)
    for a in reversed(np.asarray(outer, dtype=float)):
        res = np.polynomial.polynomial.polymul(res, inner)
        res = np.polynomial.polynomial.polyadd(res, [a])
    return _trim(res)


@dataclass(frozen=True, eq=False)
class PiecewisePoly:
    breaks: np.ndarray
    coeffs: np.ndarray  # shape (npieces, maxdeg + 1)

    def __init__(self, breaks: Iterable[float], coeffs: Iterable[Sequence[float]]):
        b = np.asarray(list(breaks), dtype=float)
        rows = [_trim(np.atleast_1d(np.asarray(c, dtype=float))) for c in coeffs]
        if len(b) < 2 or np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must be strictly increasing with at least two entries")
        if len(rows) != len(b) - 1:
            raise ValueError(f"expected {len(b) - 1} pieces, got {len(rows)}")
        deg = max(len(r) for r in rows) - 1
        if deg > MAX_DEGREE:
            raise DegreeOverflow(f"degree {deg} exceeds cap {MAX_DEGREE}")
        arr = np.zeros((len(rows), deg + 1))
        for i, r in enumerate(rows):
            arr[i, : len(r)] = r
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "coeffs", arr)
        self.breaks.setflags(write=False)
        self.coeffs.setflags(write=False)

    # -- constructors -------------------------------------------------
    @classmethod
    def constant(cls, value: float, lo: float = 0.0, hi: float = 1.0) -> "PiecewisePoly":
        return cls([lo, hi], [[value]])

    @classmethod
    def polynomial(cls, coeffs: Sequence[float], lo: float = 0.0, hi: float = 1.0) -> "PiecewisePoly":
        """Single piece from global ascending coefficients."""
        return cls([lo, hi], [_shift(coeffs, lo)])

    @classmethod
    def identity(cls, lo: float = 0.0, hi: float = 1.0) -> "PiecewisePoly":
        return cls.polynomial([0.0, 1.0], lo, hi)

    @classmethod
    def from_global(cls, breaks: Sequence[float], coeffs: Sequence[Sequence[float]]) -> "PiecewisePoly":
        return cls(breaks, [_shift(c, a) for c, a in zip(coeffs, breaks[:-1])])

    @classmethod
    def linear_interp(cls, xs: Sequence[float], ys: Sequence[float]) -> "PiecewisePoly":
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        slopes = np.diff(ys) / np.diff(xs)
        return cls(xs, [[y, s] for y, s in zip(ys[:-1], slopes)])

    # -- basic properties ---------------------------------------------
    @property
    def lo(self) -> float:
        return float(self.breaks[0])

    @property
    def hi(self) -> float:
        return float(self.breaks[-1])

    @property
    def domain(self) -> tuple[float, float]:
        return self.lo, self.hi

    @property
    def degree(self) -> int:
        return self.coeffs.shape[1] - 1

    @property
    def npieces(self) -> int:
        return len(self.breaks) - 1

    def piece(self, i: int) -> np.ndarray:
        return _trim(self.coeffs[i])

    def piece_global(self, i: int) -> np.ndarray:
        return _trim(_shift(self.coeffs[i], -self.breaks[i]))

    # -- evaluation ---------------------------------------------------
    def _index(self, x: np.ndarray, side: str = "right") -> np.ndarray:
        idx = np.searchsorted(self.breaks, x, side=side) - 1
        return np.minimum(np.maximum(idx, 0), self.npieces - 1)

    def _horner(self, idx: np.ndarray, x: np.ndarray) -> np.ndarray:
        t = x - self.breaks[idx]
        c = self.coeffs[idx]
        out = np.zeros_like(t)
        for k in range(self.coeffs.shape[1] - 1, -1, -1):
            out = out * t + c[..., k]
        return out

    def _check(self, x: np.ndarray) -> None:
        if x.size == 0:
            return
        span = max(1.0, abs(self.hi - self.lo))
        if x.min() < self.lo - 1e-12 * span or x.max() > self.hi + 1e-12 * span:
            raise OutOfDomain(f"argument outside [{self.lo}, {self.hi}]")

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        self._check(xa)
        out = self._horner(self._index(xa, "right"), xa)
        return float(out) if out.ndim == 0 else out

    def left_limit(self, x):
        xa = np.asarray(x, dtype=float)
        self._check(xa)
        out = self._horner(self._index(xa, "left"), xa)
        return float(out) if out.ndim == 0 else out

    def right_limit(self, x):
        return self(x)

    def eval_clamped(self, x):
        """Evaluate with the argument clamped into the domain."""
        return self(np.clip(np.asarray(x, dtype=float), self.lo, self.hi))

    # -- structure ----------------------------------------------------
    def is_continuous(self, tol: float = 1e-10) -> bool:
        inner = self.breaks[1:-1]
        if len(inner) == 0:
            return True
        return bool(np.all(np.abs(self(inner) - self.left_limit(inner)) <= tol * (1 + np.abs(self(inner)))))

    def jumps(self) -> np.ndarray:
        inner = self.breaks[1:-1]
        return self(inner) - self.left_limit(inner) if len(inner) else np.zeros(0)

    def refine(self, points: Iterable[float]) -> "PiecewisePoly":
        pts = np.asarray([p for p in points if self.lo < p < self.hi], dtype=float)
        new = np.unique(np.concatenate([self.breaks, pts]))
        new = _dedupe(new)
        if len(new) == len(self.breaks):
            return self
        return PiecewisePoly(new, self._rows_on(new))

    def _rows_on(self, br) -> list:
        # piece lookup by midpoint survives near-duplicate breakpoints
        rows = []
        for a, b in zip(br[:-1], br[1:]):
            i = int(self._index(np.asarray(0.5 * (a + b)), "right"))
            rows.append(_shift(self.coeffs[i], a - self.breaks[i]))
        return rows

    def restrict(self, a: float, b: float) -> "PiecewisePoly":
        if a < self.lo - _EPS or b > self.hi + _EPS or b <= a:
            raise OutOfDomain(f"[{a}, {b}] not inside [{self.lo}, {self.hi}]")
        a, b = max(a, self.lo), min(b, self.hi)
        inner = [float(t) for t in self.breaks if a + _EPS < t < b - _EPS]
        br = [a] + inner + [b]
        return PiecewisePoly(br, self._rows_on(br))

    def extend(self, lo: float | None = None, hi: float | None = None,
               left: Sequence[float] | None = None, right: Sequence[float] | None = None) -> "PiecewisePoly":
        """Append pieces given by global coefficients on [lo, self.lo] and [self.hi, hi]."""
        breaks = list(self.breaks)
        rows = [self.coeffs[i] for i in range(self.npieces)]
        if lo is not None and lo < self.lo:
            breaks.insert(0, lo)
            rows.insert(0, _shift(left if left is not None else [0.0], lo))
        if hi is not None and hi > self.hi:
            breaks.append(hi)
            rows.append(_shift(right if right is not None else [0.0], self.hi))
        return PiecewisePoly(breaks, rows)

    # -- calculus -----------------------------------------------------
    def derivative(self) -> "PiecewisePoly":
        rows = []
        for c in self.coeffs:
            d = np.array([k * c[k] for k in range(1, len(c))]) if len(c) > 1 else np.zeros(1)
            rows.append(d if len(d) else np.zeros(1))
        return PiecewisePoly(self.breaks, rows)

    def antiderivative(self, start: float = 0.0) -> "PiecewisePoly":
        """Continuous antiderivative equal to ``start`` at the left end."""
        rows = []
        acc = start
        for i, c in enumerate(self.coeffs):
            row = np.concatenate([[acc], c / np.arange(1, len(c) + 1)])
            rows.append(row)
            h = self.breaks[i + 1] - self.breaks[i]
            acc = float(np.polynomial.polynomial.polyval(h, row))
        return PiecewisePoly(self.breaks, rows)

    def integral(self, a: float | None = None, b: float | None = None) -> float:
        a = self.lo if a is None else a
        b = self.hi if b is None else b
        if b < a:
            return -self.integral(b, a)
        if a == b:
            return 0.0
        self._check(np.asarray([a, b]))
        a, b = max(a, self.lo), min(b, self.hi)
        F = self.antiderivative()
        return float(F.left_limit(b) - F(a)) if b > a else 0.0

    definite_integral = integral

    # -- algebra ------------------------------------------------------
    def _aligned(self, other: "PiecewisePoly") -> tuple["PiecewisePoly", "PiecewisePoly"]:
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        if hi - lo <= _EPS:
            raise OutOfDomain("domains do not overlap")
        a = self.restrict(lo, hi) if (lo > self.lo or hi < self.hi) else self
        b = other.restrict(lo, hi) if (lo > other.lo or hi < other.hi) else other
        pts = np.concatenate([a.breaks, b.breaks])
        return a.refine(pts), b.refine(pts)

    def __add__(self, other):
        if isinstance(other, PiecewisePoly):
            a, b = self._aligned(other)
            n = max(a.coeffs.shape[1], b.coeffs.shape[1])
            ca = np.pad(a.coeffs, ((0, 0), (0, n - a.coeffs.shape[1])))
            cb = np.pad(b.coeffs, ((0, 0), (0, n - b.coeffs.shape[1])))
            return PiecewisePoly(a.breaks, ca + cb)
        c = self.coeffs.copy()
        c[:, 0] += float(other)
        return PiecewisePoly(self.breaks, c)

    __radd__ = __add__

    def __neg__(self):
        return PiecewisePoly(self.breaks, -self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, PiecewisePoly):
            a, b = self._aligned(other)
            rows = [np.polynomial.polynomial.polymul(a.coeffs[i], b.coeffs[i]) for i in range(a.npieces)]
            return PiecewisePoly(a.breaks, rows)
        return PiecewisePoly(self.breaks, self.coeffs * float(other))

    __rmul__ = __mul__

    def compose_affine(self, alpha: float, beta: float) -> "PiecewisePoly":
        """The function y -> p(alpha * y + beta), on the preimage of the domain."""
        if alpha == 0:
            raise ValueError("alpha must be nonzero")
        pre = (self.breaks - beta) / alpha
        rows = []
        for i in range(self.npieces):
            g = self.piece_global(i)
            rows.append(_compose(g, [beta, alpha]))
        if alpha < 0:
            pre = pre[::-1]
            rows = rows[::-1]
        return PiecewisePoly.from_global(pre, rows)

    def compose(self, inner: "PiecewisePoly") -> "PiecewisePoly":
        """self(inner(t)) for monotone nondecreasing ``inner`` whose range lies in the domain.

        Points where ``inner`` crosses a breakpoint of ``self`` become breakpoints.
        On a flat piece of ``inner`` sitting exactly on a breakpoint the right piece is used.
        """
        cuts = list(inner.breaks)
        for i in range(inner.npieces):
            a, b = inner.breaks[i], inner.breaks[i + 1]
            g = inner.piece_global(i)
            for beta in self.breaks[1:-1]:
                cuts.extend(_real_roots(np.polynomial.polynomial.polysub(g, [beta]), a, b))
        cuts = _dedupe(np.unique(np.asarray(cuts)))
        rows = []
        for a, b in zip(cuts[:-1], cuts[1:]):
            mid = 0.5 * (a + b)
            i = int(inner._index(np.asarray(mid), "right"))
            g = inner.piece_global(i)
            v = float(np.polynomial.polynomial.polyval(mid, g))
            j = int(self._index(np.asarray(np.clip(v, self.lo, self.hi)), "right"))
            outer = self.piece_global(j)
            rows.append(_compose(outer, g))
        return PiecewisePoly.from_global(cuts, rows)

    # -- roots and extrema ----------------------------------------------
    def roots(self, value: float = 0.0, a: float | None = None, b: float | None = None) -> np.ndarray:
        """Real solutions of p(x) = value inside [a, b] (pieces identically equal are skipped)."""
        a = self.lo if a is None else a
        b = self.hi if b is None else b
        out = []
        for i in range(self.npieces):
            l, r = self.breaks[i], self.breaks[i + 1]
            if r < a or l > b:
                continue
            c = self.coeffs[i].copy()
            c[0] -= value
            c = _trim(c)
            if len(c) == 1:
                continue
            for t in _real_roots(c, 0.0, r - l):
                x = l + t
                if a - 1e-13 <= x <= b + 1e-13:
                    out.append(min(max(x, a), b))
        return _dedupe(np.unique(np.asarray(out, dtype=float))) if out else np.zeros(0)

    def sample_points(self, n: int = 1025) -> np.ndarray:
        """A uniform grid of ``n`` points merged with all breakpoints."""
        return np.unique(np.concatenate([np.linspace(self.lo, self.hi, n), self.breaks]))

    def is_piecewise_affine(self) -> bool:
        return self.degree <= 1

    def inverse(self) -> "PiecewisePoly":
        """Inverse of a continuous strictly increasing piecewise-affine function."""
        if not self.is_piecewise_affine():
            raise ValueError("inverse requires a piecewise-affine function")
        vals = np.concatenate([self(self.breaks[:-1]), [self.left_limit(self.hi)]])
        if np.any(np.diff(vals) <= 0) or not self.is_continuous():
            raise ValueError("inverse requires a continuous strictly increasing function")
        return PiecewisePoly.linear_interp(vals, self.breaks)

    def invert_values(self, y, lo: float | None = None, hi: float | None = None, iters: int = 80):
        """Vectorized inverse of a nondecreasing function by bisection, clamped to [lo, hi]."""
        lo = self.lo if lo is None else lo
        hi = self.hi if hi is None else hi
        y = np.asarray(y, dtype=float)
        a = np.full(y.shape, lo)
        b = np.full(y.shape, hi)
        for _ in range(iters):
            mid = 0.5 * (a + b)
            below = self(mid) < y
            a = np.where(below, mid, a)
            b = np.where(below, b, mid)
        out = 0.5 * (a + b)
        return float(out) if out.ndim == 0 else out

    # -- serialization ------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "breaks": [float(x) for x in self.breaks],
            "coeffs": [[float(v) for v in self.piece(i)] for i in range(self.npieces)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PiecewisePoly":
        return cls(d["breaks"], d["coeffs"])

    def __repr__(self) -> str:
        return f"PiecewisePoly(breaks={list(self.breaks)}, coeffs={[list(self.piece(i)) for i in range(self.npieces)]})"


def _real_roots(c: Sequence[float], a: float, b: float) -> list[float]:
    c = _trim(np.asarray(c, dtype=float))
    if len(c) <= 1:
        return []
    if len(c) == 2:
        r = [-c[0] / c[1]]
    else:
        r = np.polynomial.polynomial.polyroots(c)
        scale = max(1.0, abs(b - a))
        r = [z.real for z in np.atleast_1d(r) if abs(z.imag) <= 1e-9 * scale]
        r = [_polish(c, x) for x in r]
    tol = 1e-12 * max(1.0, abs(b - a))
    return [min(max(x, a), b) for x in r if a - tol <= x <= b + tol]


def _polish(c: np.ndarray, x: float) -> float:
    dc = np.polynomial.polynomial.polyder(c)
    for _ in range(3):
        d = np.polynomial.polynomial.polyval(x, dc)
        if d == 0:
            break
        step = np.polynomial.polynomial.polyval(x, c) / d
        if not np.isfinite(step) or abs(step) > 1e-6 * max(1.0, abs(x)):
            break
        x -= step
    return float(x)


def _dedupe(x: np.ndarray, tol: float = 1e-13) -> np.ndarray:
    if len(x) == 0:
        return x
    keep = [x[0]]
    for v in x[1:]:
        if v - keep[-1] > tol * max(1.0, abs(v)):
            keep.append(v)
    return np.asarray(keep)
