"""Iterative radix-2 FFT with precomputed bit-reversal and twiddle tables."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import DimensionError


def next_pow2(n: int) -> int:
    return 1 if n <= 1 else 1 << (int(n) - 1).bit_length()


def _bit_reverse(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


class FourierPlan:
    """Decimation-in-time transform of a fixed power-of-two length.

    Transforms act on the last axis, so a stack of signals is handled in
    one call.
    """

    def __init__(self, length: int):
        if length < 1 or length & (length - 1):
            raise ValueError(f"plan length must be a power of two, got {length}")
        self.length = length
        self.perm = _bit_reverse(length)
        # twiddles[s] holds exp(-2 pi i k / 2m) for k < m, m = 2**s
        self.twiddles = []
        m = 1
        while m < length:
            k = np.arange(m)
            self.twiddles.append(np.exp(-1j * np.pi * k / m))
            m *= 2

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        if x.shape[-1] != self.length:
            raise DimensionError(
                f"plan of length {self.length} applied to length {x.shape[-1]}"
            )
        return x

    def forward(self, x) -> np.ndarray:
        x = self._check(x)
        lead = x.shape[:-1]
        a = x[..., self.perm]
        m = 1
        for w in self.twiddles:
            blocks = a.reshape(lead + (-1, 2, m))
            even = blocks[..., 0, :]
            odd = blocks[..., 1, :] * w
            a = np.concatenate((even + odd, even - odd), axis=-1).reshape(lead + (self.length,))
            m *= 2
        return a

    def inverse(self, y) -> np.ndarray:
        y = self._check(y)
        return np.conj(self.forward(np.conj(y))) / self.length


@lru_cache(maxsize=64)
def get_plan(length: int) -> FourierPlan:
    return FourierPlan(length)


def fourier_forward(plan: FourierPlan, x) -> np.ndarray:
    return plan.forward(x)


def fourier_inverse(plan: FourierPlan, y) -> np.ndarray:
    return plan.inverse(y)
