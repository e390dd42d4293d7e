"""Log-magnitude/sign arithmetic for products of factorials and determinants."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln


@dataclass(frozen=True)
class LogValue:
    """A real number stored as ``sign * exp(log_magnitude)``.

    ``sign`` is 0 exactly when the value is zero; ``log_magnitude`` is then
    ``-inf``.
    """

    log_magnitude: float
    sign: int

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or 1, got {self.sign}")
        if (self.sign == 0) != (self.log_magnitude == -math.inf):
            raise ValueError("sign == 0 iff log_magnitude == -inf")

    @classmethod
    def zero(cls) -> "LogValue":
        return cls(-math.inf, 0)

    @classmethod
    def from_float(cls, value: float) -> "LogValue":
        if value == 0:
            return cls.zero()
        return cls(math.log(abs(value)), 1 if value > 0 else -1)

    @property
    def value(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log_magnitude)

    def __mul__(self, other: "LogValue") -> "LogValue":
        if self.sign == 0 or other.sign == 0:
            return LogValue.zero()
        return LogValue(self.log_magnitude + other.log_magnitude, self.sign * other.sign)

    def __truediv__(self, other: "LogValue") -> "LogValue":
        if other.sign == 0:
            raise ZeroDivisionError("division by a zero LogValue")
        if self.sign == 0:
            return LogValue.zero()
        return LogValue(self.log_magnitude - other.log_magnitude, self.sign * other.sign)


def log_factorial(k):
    """``log(k!)`` via log-gamma; works elementwise on arrays."""
    return gammaln(np.asarray(k, dtype=float) + 1.0)


def log_det(log_entries: np.ndarray, signs: np.ndarray | None = None) -> LogValue:
    """Determinant of a matrix given entrywise as ``signs * exp(log_entries)``.

    Entries equal to zero carry ``log_entries == -inf``. Rows and then columns
    are rescaled by their largest log-magnitude before an LU factorisation with
    partial pivoting, so entries spanning hundreds of orders of magnitude do
    not overflow.
    """
    L = np.array(log_entries, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ValueError("log_det needs a square matrix")
    S = np.ones_like(L) if signs is None else np.asarray(signs, dtype=float)
    S = np.where(np.isneginf(L), 0.0, S)
    if L.shape[0] == 0:
        return LogValue(0.0, 1)
    row_shift = np.max(L, axis=1)
    if np.any(np.isneginf(row_shift)):
        return LogValue.zero()
    L = L - row_shift[:, None]
    col_shift = np.max(L, axis=0)
    if np.any(np.isneginf(col_shift)):
        return LogValue.zero()
    L = L - col_shift[None, :]
    sign, logabs = np.linalg.slogdet(S * np.exp(L))
    if sign == 0:
        return LogValue.zero()
    return LogValue(float(logabs + row_shift.sum() + col_shift.sum()), int(sign))


def log_vandermonde(points) -> LogValue:
    """``prod_{i<j} (points[j] - points[i])`` in log form."""
    pts = np.asarray(points, dtype=float)
    diffs = pts[None, :] - pts[:, None]
    upper = diffs[np.triu_indices(len(pts), k=1)]
    if np.any(upper == 0):
        return LogValue.zero()
    sign = -1 if np.count_nonzero(upper < 0) % 2 else 1
    return LogValue(float(np.sum(np.log(np.abs(upper)))), sign)
