"""Orthonormal Jacobi and Krawtchouk functions and their Christoffel-Darboux kernels.

Both families are generated by the three-term recurrence of the monic
polynomials, ``P_{k+1} = (y - a_k) P_k - b_k P_{k-1}``, rescaled to orthonormal
form. Functions carry the square root of the weight, so that
``K(z, z') = sum_{j<n} phi_j(z) phi_j(z')`` is the correlation kernel of the
``n``-particle ensemble.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln



def gauss_legendre(m: int, lo: float, hi: float):
    """Gauss-Legendre nodes and weights mapped to ``[lo, hi]``."""
    x, w = np.polynomial.legendre.leggauss(m)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


class JacobiBasis:
    """Orthonormal functions for the weight ``(1 - y)^alpha (1 + y)^beta`` on ``[-1, 1]``.

    Parameters
    ----------
    alpha, beta : float
        Weight exponents, both ``>= 0``. For the bus model these are
        ``N - (n + x - 1)`` and ``x - 1``.
    n : int
        Number of particles; the kernel uses ``phi_0 .. phi_{n-1}``.
    """

    def __init__(self, alpha: float, beta: float, n: int):
        if alpha < 0 or beta < 0:
            raise ValueError(f"need alpha, beta >= 0, got {alpha}, {beta}")
        if n < 1:
            raise ValueError("need n >= 1")
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.n = int(n)
        self.a, self.b = self._recurrence(self.n + 1)
        self.log_mu0 = (
            (self.alpha + self.beta + 1) * math.log(2)
            + gammaln(self.alpha + 1)
            + gammaln(self.beta + 1)
            - gammaln(self.alpha + self.beta + 2)
        )

    @classmethod
    def from_params(cls, params) -> "JacobiBasis":
        return cls(params.alpha, params.beta, params.n)

    def _recurrence(self, m):
        al, be = self.alpha, self.beta
        k = np.arange(m + 1, dtype=float)
        s = 2 * k + al + be
        a = np.empty(m + 1)
        a[0] = (be - al) / (al + be + 2)
        a[1:] = (be**2 - al**2) / (s[1:] * (s[1:] + 2))
        b = np.zeros(m + 1)
        kk = k[1:]
        b[1:] = (
            4 * kk * (kk + al) * (kk + be) * (kk + al + be)
            / (s[1:] ** 2 * (s[1:] + 1) * (s[1:] - 1))
        )
        return a, b

    @property
    def quadrature_order(self) -> int:
        # exact for phi_j * phi_k when alpha, beta are integers
        exact = int(math.ceil((2 * self.n - 1 + self.alpha + self.beta) / 2)) + 2
        return max(4 * self.n + 50, exact)

    @property
    def cd_constant(self) -> float:
        """``l_n``: ratio of leading coefficients of ``p_{n-1}`` and ``p_n``."""
        return math.sqrt(self.b[self.n])

    def tabulated_cd_constant(self, m: int) -> float:
        """``(k_m / k_{m+1}) sqrt(h_{m+1} / h_m)`` from the classical Jacobi norms.

        ``h_m`` and ``k_m`` are the squared norm and the leading coefficient of
        the standard Jacobi polynomial ``P_m^(alpha, beta)``. With ``m = n - 1``
        this equals :attr:`cd_constant`.
        """

        def log_h(j):
            al, be = self.alpha, self.beta
            return (
                (al + be + 1) * math.log(2)
                + gammaln(j + al + 1)
                + gammaln(j + be + 1)
                - math.log(2 * j + al + be + 1)
                - gammaln(j + 1)
                - gammaln(j + al + be + 1)
            )

        def log_k(j):
            al, be = self.alpha, self.beta
            return gammaln(2 * j + al + be + 1) - j * math.log(2) - gammaln(j + 1) - gammaln(j + al + be + 1)

        return math.exp(log_k(m) - log_k(m + 1) + 0.5 * (log_h(m + 1) - log_h(m)))

    def log_weight(self, y):
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            la = np.where(self.alpha == 0, 0.0, self.alpha * np.log1p(-y))
            lb = np.where(self.beta == 0, 0.0, self.beta * np.log1p(y))
        return la + lb

    def _check_domain(self, y):
        y = np.asarray(y, dtype=float)
        if np.any(np.abs(y) > 1):
            raise ValueError("Jacobi functions are defined on [-1, 1] only")
        return y

    def functions(self, y, count: int | None = None, derivatives: bool = False):
        """Rows ``phi_0(y) .. phi_{count-1}(y)``; ``count`` defaults to ``n + 1``.

        With ``derivatives=True`` also returns ``sqrt(w) * p_j'(y)``, the
        weighted polynomial derivatives used by the confluent kernel.
        """
        y = self._check_domain(y)
        count = self.n + 1 if count is None else count
        if count > self.a.size:
            self.a, self.b = self._recurrence(count)
        phi = np.zeros((count,) + y.shape)
        dphi = np.zeros_like(phi)
        phi[0] = np.exp(0.5 * (self.log_weight(y) - self.log_mu0))
        sb = np.sqrt(self.b)
        for k in range(count - 1):
            prev = phi[k - 1] if k > 0 else 0.0
            dprev = dphi[k - 1] if k > 0 else 0.0
            phi[k + 1] = ((y - self.a[k]) * phi[k] - sb[k] * prev) / sb[k + 1]
            if derivatives:
                dphi[k + 1] = (phi[k] + (y - self.a[k]) * dphi[k] - sb[k] * dprev) / sb[k + 1]
        if derivatives:
            return phi, dphi
        return phi

    def phi(self, j: int, y):
        """``phi_j(y) = p_j(y) w(y)^(1/2)``."""
        if j < 0:
            raise ValueError("degree must be >= 0")
        return self.functions(y, count=j + 1)[j]

    def kernel(self, z, z2):
        """Christoffel-Darboux kernel ``K(z, z2)``, confluent form on the diagonal."""
        z = np.asarray(z, dtype=float)
        z2 = np.asarray(z2, dtype=float)
        z, z2 = np.broadcast_arrays(z, z2)
        n, l = self.n, self.cd_constant
        fz = self.functions(z, count=n + 1)
        fw = self.functions(z2, count=n + 1)
        diff = z - z2
        near = np.abs(diff) < 1e-7
        with np.errstate(divide="ignore", invalid="ignore"):
            off = l * (fz[n] * fw[n - 1] - fw[n] * fz[n - 1]) / diff
        if np.any(near):
            # the divided difference loses digits here; use the finite sum instead
            direct = np.sum(fz[:n] * fw[:n], axis=0)
            off = np.where(near & (diff != 0), direct, off)
            off = np.where(diff == 0, self.kernel_diagonal(z), off)
        return off[()] if off.ndim == 0 else off

    def kernel_diagonal(self, y):
        """``K(y, y) = l_n (p_n' p_{n-1} - p_{n-1}' p_n) w``, the one-point density."""
        phi, dphi = self.functions(y, count=self.n + 1, derivatives=True)
        n = self.n
        return self.cd_constant * (dphi[n] * phi[n - 1] - dphi[n - 1] * phi[n])

    def density_sum(self, y):
        """``sum_{j<n} phi_j(y)^2``; the same quantity as :meth:`kernel_diagonal`."""
        phi = self.functions(y, count=self.n)
        return np.sum(phi**2, axis=0)

    def gram(self, c: float, d: float) -> np.ndarray:
        """``G_jk = int_c^d phi_j phi_k dy`` for ``j, k < n``."""
        if d < c:
            raise ValueError(f"inverted interval ({c}, {d})")
        if c < -1 or d > 1:
            raise ValueError("interval must lie inside [-1, 1]")
        if c == d:
            return np.zeros((self.n, self.n))
        y, w = gauss_legendre(self.quadrature_order, c, d)
        phi = self.functions(y, count=self.n)
        return (phi * w) @ phi.T

    def gap_probability(self, c: float, d: float) -> float:
        """Probability that no particle falls in ``(c, d)``: ``det(I - G)``."""
        G = self.gram(c, d)
        val = np.linalg.det(np.eye(self.n) - G)
        return float(min(max(val, 0.0), 1.0))

    def cumulative_count(self, y, chunk: int = 2048):
        """Expected number of particles in ``[-1, y]``: ``int_{-1}^y K(u, u) du``.

        Exact up to rounding for integer exponents, since the integrand is then a
        polynomial of known degree.
        """
        y = self._check_domain(y)
        flat = y.ravel()
        out = np.empty(flat.size)
        x0, w0 = np.polynomial.legendre.leggauss(self.quadrature_order)
        for start in range(0, flat.size, chunk):
            ys = flat[start : start + chunk]
            half = 0.5 * (ys + 1.0)
            nodes = -1.0 + half[:, None] * (x0[None, :] + 1.0)
            dens = self.density_sum(nodes)
            out[start : start + chunk] = half * (dens @ w0)
        return out.reshape(y.shape)


class KrawtchoukBasis:
    """Orthonormal functions for the binomial weight ``C(K, y) p^y (1-p)^(K-y)`` on ``{0..K}``."""

    def __init__(self, K: int, p: float, n: int):
        if not 0 < p < 1:
            raise ValueError(f"need 0 < p < 1, got {p}")
        if not 1 <= n <= K + 1:
            raise ValueError(f"need 1 <= n <= K + 1, got n={n}, K={K}")
        self.K, self.p, self.n = int(K), float(p), int(n)
        k = np.arange(n + 1, dtype=float)
        self.a = k * (1 - p) + (K - k) * p
        self.b = k * p * (1 - p) * (K - k + 1)
        self.points = np.arange(K + 1)
        self._phi = self._build()

    @classmethod
    def from_params(cls, params, t: float) -> "KrawtchoukBasis":
        return cls(params.N + params.n - 1, params.fraction(t), params.n)

    def _build(self):
        y = self.points.astype(float)
        K, p = self.K, self.p
        logw = (
            gammaln(K + 1) - gammaln(y + 1) - gammaln(K - y + 1)
            + y * math.log(p) + (K - y) * math.log1p(-p)
        )
        phi = np.zeros((self.n, y.size))
        phi[0] = np.exp(0.5 * logw)
        sb = np.sqrt(self.b)
        for k in range(self.n - 1):
            prev = phi[k - 1] if k > 0 else 0.0
            phi[k + 1] = ((y - self.a[k]) * phi[k] - sb[k] * prev) / sb[k + 1]
        return phi.T

    @property
    def functions(self) -> np.ndarray:
        """``(K + 1, n)`` matrix whose columns are orthonormal in the counting measure."""
        return self._phi

    def orthonormality_error(self) -> float:
        return float(np.abs(self._phi.T @ self._phi - np.eye(self.n)).max())

    def kernel_matrix(self) -> np.ndarray:
        return self._phi @ self._phi.T

    def kernel(self, y, y2) -> float:
        return float(self._phi[y] @ self._phi[y2])

    def one_point(self) -> np.ndarray:
        return np.einsum("ij,ij->i", self._phi, self._phi)

    def correlation(self, points) -> float:
        """``det(K(points_i, points_j))``: probability that all ``points`` are occupied."""
        idx = np.asarray(points, dtype=int)
        sub = self.kernel_matrix()[np.ix_(idx, idx)]
        return float(np.linalg.det(sub))


