"""Polynomial dictionaries for MIDAS weight functions on [0, 1].

Basis functions are shifted Jacobi polynomials ``P_n^{(a, b)}(2u - 1)`` in the
standard normalization ``P_n(1) = binom(n + a, n)`` (so Legendre polynomials
equal one at ``u = 1``). ``power`` gives the Almon basis ``u**n``, which is
badly conditioned beyond a few terms and is kept only for comparison.

``n_basis`` counts basis functions, i.e. degrees ``0 .. n_basis - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FAMILIES = ("legendre", "jacobi", "power")


@dataclass(frozen=True)
class DictionarySpec:
    family: str = "legendre"
    n_basis: int = 3
    a_param: float = 0.0
    b_param: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown dictionary family {self.family!r}; expected one of {FAMILIES}")
        if self.n_basis < 1:
            raise ValueError("n_basis must be >= 1")
        if self.family == "legendre" and (self.a_param, self.b_param) != (0.0, 0.0):
            raise ValueError("legendre is jacobi(0, 0); use family='jacobi' for other parameters")
        if self.a_param <= -1 or self.b_param <= -1:
            raise ValueError("jacobi parameters must exceed -1")

    @classmethod
    def from_degree(cls, degree: int, family: str = "legendre", **kw) -> "DictionarySpec":
        """Dictionary with all polynomials up to and including ``degree``."""
        return cls(family=family, n_basis=degree + 1, **kw)

    @property
    def max_degree(self) -> int:
        return self.n_basis - 1


def _check_jacobi(a: float, b: float) -> None:
    if a <= -1 or b <= -1:
        raise ValueError(f"jacobi parameters must exceed -1, got ({a}, {b})")


def jacobi_table(a: float, b: float, max_degree: int, u) -> np.ndarray:
    """Shifted Jacobi polynomials of degrees 0..max_degree at points ``u``.

    Returns an array of shape ``u.shape + (max_degree + 1,)`` computed with the
    three-term recurrence at ``x = 2u - 1``.
    """
    _check_jacobi(a, b)
    if max_degree < 0:
        raise ValueError("degree must be >= 0")
    x = 2.0 * np.asarray(u, dtype=float) - 1.0
    out = np.empty(x.shape + (max_degree + 1,))
    out[..., 0] = 1.0
    if max_degree == 0:
        return out
    # the generic n = 0 coefficients divide by a + b, which vanishes for Legendre
    out[..., 1] = 0.5 * (a + b + 2.0) * x + 0.5 * (a - b)
    ab = a + b
    for n in range(1, max_degree):
        s = 2 * n + ab
        den = 2.0 * (n + 1) * (n + ab + 1) * s
        c1 = (s + 1) * (s + 2) * s / den
        c0 = (s + 1) * (a * a - b * b) / den
        cm = (n + a) * (n + b) * (s + 2) / ((n + 1) * (n + ab + 1) * s)
        out[..., n + 1] = (c1 * x + c0) * out[..., n] - cm * out[..., n - 1]
    return out


def jacobi_eval(a_param: float, b_param: float, degree: int, u: float) -> float:
    """Shifted Jacobi polynomial of the given degree at ``u`` in [0, 1]."""
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"u must lie in [0, 1], got {u}")
    return float(jacobi_table(a_param, b_param, degree, u)[..., degree])


def basis_values(spec: DictionarySpec, u) -> np.ndarray:
    """All ``spec.n_basis`` dictionary functions evaluated at ``u``."""
    u = np.asarray(u, dtype=float)
    if spec.family == "power":
        return u[..., None] ** np.arange(spec.n_basis)
    return jacobi_table(spec.a_param, spec.b_param, spec.max_degree, u)


def build_weight_matrix(spec: DictionarySpec, m: int, n_lags: int | None = None) -> np.ndarray:
    """MIDAS aggregation matrix with entries ``w_l((j - 1)/m) / m``.

    ``n_lags`` truncates the grid to the most recent lags while keeping the
    ``(j - 1)/m`` spacing; it defaults to ``m``.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    n_lags = m if n_lags is None else n_lags
    if not 1 <= n_lags <= m:
        raise ValueError("n_lags must lie in [1, m]")
    grid = np.arange(n_lags) / m
    return basis_values(spec, grid) / m


def weight_function_eval(coeffs, spec: DictionarySpec, u) -> np.ndarray | float:
    """Weight function ``sum_l coeffs[l] * w_l(u)``."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (spec.n_basis,):
        raise ValueError(f"expected {spec.n_basis} coefficients, got {coeffs.shape}")
    u_arr = np.asarray(u, dtype=float)
    if np.any((u_arr < 0) | (u_arr > 1)):
        raise ValueError("u must lie in [0, 1]")
    val = basis_values(spec, u_arr) @ coeffs
    return float(val) if np.ndim(val) == 0 else val
