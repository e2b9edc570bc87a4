"""
Orthonormal multilevel Haar transform.

Each stage maps pairs ``(a, b)`` to ``(a + b)/sqrt(2)`` (approximation) and
``(a - b)/sqrt(2)`` (detail), so the transform preserves the L2 norm. The
coefficients of a length ``2^N`` signal after ``lmax`` stages are stored as
``w^lmax, v^lmax, ..., v^1``; ``v^l`` has length ``2^(N-l)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_LMAX = 5
_SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class WaveletCoeffs:
    """Haar coefficients.

    ``details[0]`` is the coarsest detail ``v^lmax`` and ``details[-1]`` the
    finest ``v^1``, matching the storage order of the concatenated vector.
    Arrays may carry leading batch axes; the transform runs on the last.
    """

    approx: np.ndarray
    details: tuple[np.ndarray, ...]

    @property
    def lmax(self) -> int:
        return len(self.details)

    @property
    def signal_length(self) -> int:
        return self.approx.shape[-1] << self.lmax

    def detail(self, level: int) -> np.ndarray:
        """``v^level`` for ``1 <= level <= lmax``."""
        if not 1 <= level <= self.lmax:
            raise ValueError(f"level must lie in [1, {self.lmax}]")
        return self.details[self.lmax - level]

    def concatenate(self) -> np.ndarray:
        return np.concatenate([self.approx, *self.details], axis=-1)

    def approximation(self, level: int) -> np.ndarray:
        """``w^level`` rebuilt from the stored coarser coefficients.

        ``w^lmax`` is stored; for ``level < lmax`` the approximation is
        recovered by inverting the stages ``lmax, ..., level + 1``, which only
        uses details with index greater than ``level``.
        """
        if not 0 <= level <= self.lmax:
            raise ValueError(f"level must lie in [0, {self.lmax}]")
        w = self.approx
        for lev in range(self.lmax, level, -1):
            w = _synthesis(w, self.detail(lev))
        return w


def _analysis(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = x[..., 0::2]
    b = x[..., 1::2]
    return (a + b) / _SQRT2, (a - b) / _SQRT2


def _synthesis(w: np.ndarray, v: np.ndarray) -> np.ndarray:
    if w.shape != v.shape:
        raise ValueError("approximation and detail lengths differ")
    out = np.empty(w.shape[:-1] + (2 * w.shape[-1],), dtype=np.result_type(w, v))
    out[..., 0::2] = (w + v) / _SQRT2
    out[..., 1::2] = (w - v) / _SQRT2
    return out


def _check_length(n: int) -> int:
    if n < 1 or n & (n - 1):
        raise ValueError(f"signal length {n} is not a power of two")
    return n.bit_length() - 1


def dwt_multilevel(signal, lmax: int = DEFAULT_LMAX) -> WaveletCoeffs:
    """Forward transform with ``lmax`` stages.

    Raises
    ------
    ValueError
        If the length is not a power of two or ``lmax`` lies outside
        ``[0, log2(length)]``.
    """
    x = np.asarray(signal, dtype=float)
    n1 = _check_length(x.shape[-1])
    if not 0 <= lmax <= n1:
        raise ValueError(f"lmax must lie in [0, {n1}] for length {x.shape[-1]}")
    details = []
    w = x
    for _ in range(lmax):
        w, v = _analysis(w)
        details.append(v)
    return WaveletCoeffs(w, tuple(reversed(details)))


def idwt_multilevel(coeffs: WaveletCoeffs) -> np.ndarray:
    """Exact inverse of ``dwt_multilevel``."""
    n = coeffs.approx.shape[-1]
    for i, v in enumerate(coeffs.details):
        if v.shape[-1] != n << i:
            raise ValueError("inconsistent coefficient lengths")
    return coeffs.approximation(0)


def from_concatenated(vec, lmax: int) -> WaveletCoeffs:
    """Split a concatenated ``(w^lmax, v^lmax, ..., v^1)`` vector."""
    v = np.asarray(vec, dtype=float)
    n1 = _check_length(v.shape[-1])
    if not 0 <= lmax <= n1:
        raise ValueError(f"lmax must lie in [0, {n1}] for length {v.shape[-1]}")
    n = v.shape[-1] >> lmax
    parts = [v[..., :n]]
    start = n
    for i in range(lmax):
        size = n << i
        parts.append(v[..., start:start + size])
        start += size
    return WaveletCoeffs(parts[0], tuple(parts[1:]))
