"""Measurement-side recursions for the sliding window.

The first window is encoded with a full matrix-vector product; every later
window reuses the previous measurement through a rank-tau update built from
the tau leaving/entering stream entries and the first tau logical columns
of the current rotated matrix. Measurement noise is resampled per window:
the recursion adds (w_new - w_old) so each measurement carries one fresh
i.i.d. draw.

A module-level :data:`op_counter` tallies the scalar multiply-adds each
kernel dispatches, which is how the per-step cost contracts (m*tau for the
rank update, O(n) for the Fourier step) are asserted in tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .sensing import PermutationOffset, SensingMatrix, materialize, rotate

__all__ = [
    "OpCounter",
    "op_counter",
    "NoiseModel",
    "EncoderState",
    "encode_first",
    "encode_step",
    "encode_direct",
    "ortho_coeff_step",
    "fourier_coeff_step",
    "write_measurement_trace",
]


class OpCounter:
    """Running total of scalar multiply-add work dispatched by the kernels."""

    def __init__(self):
        self.total = 0

    def add(self, k: int) -> None:
        self.total += int(k)

    def reset(self) -> None:
        self.total = 0


op_counter = OpCounter()


@dataclass(frozen=True)
class NoiseModel:
    """Per-window i.i.d. Gaussian measurement noise N(0, sigma^2 I)."""

    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


@dataclass
class EncoderState:
    """Measurement state after encoding window ``window_index``.

    Single-writer: ``encode_step`` returns a fresh state but the noise
    generator inside is shared and advances, so states form a chain that
    must be stepped sequentially.
    """

    matrix: SensingMatrix
    y: np.ndarray
    window_index: int
    offset: PermutationOffset
    tau: int
    sigma: float
    _rng: np.random.Generator
    _w: np.ndarray  # noise draw carried by the current y


def _draw(rng: np.random.Generator, sigma: float, m: int) -> np.ndarray:
    if sigma == 0.0:
        return np.zeros(m)
    return rng.normal(0.0, sigma, m)


def encode_first(
    a: SensingMatrix,
    x0,
    noise: NoiseModel = NoiseModel(),
    tau: int = 1,
) -> EncoderState:
    """Full encode of the first window: y = A x0 + w."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (a.n,):
        raise ValueError(f"window length {x0.shape} does not match n={a.n}")
    if not (1 <= tau <= a.n):
        raise ValueError(f"need 1 <= tau <= n, got tau={tau}")
    rng = np.random.default_rng(noise.seed)
    w = _draw(rng, noise.sigma, a.m)
    y = a.base @ x0 + w
    op_counter.add(a.m * a.n)
    return EncoderState(
        matrix=a,
        y=y,
        window_index=0,
        offset=PermutationOffset(0, a.n),
        tau=tau,
        sigma=noise.sigma,
        _rng=rng,
        _w=w,
    )


def encode_step(state: EncoderState, leaving, entering) -> EncoderState:
    """Rank-tau measurement update for the next window.

    ``leaving`` are the tau stream entries that exit the window and
    ``entering`` the tau new ones; cost O(m * tau).
    """
    leaving = np.asarray(leaving, dtype=float)
    entering = np.asarray(entering, dtype=float)
    tau = state.tau
    if leaving.shape != (tau,) or entering.shape != (tau,):
        raise ValueError(
            f"expected {tau} leaving/entering entries, got "
            f"{leaving.shape}/{entering.shape}"
        )
    a = state.matrix
    m, n = a.m, a.n
    cols = a.tiled()[:, state.offset.offset : state.offset.offset + tau]
    y = state.y + cols @ (entering - leaving)
    op_counter.add(m * tau)
    if state.sigma > 0.0:
        w_new = _draw(state._rng, state.sigma, m)
        y = y + (w_new - state._w)
        op_counter.add(2 * m)
    else:
        w_new = state._w
    return replace(
        state,
        y=y,
        window_index=state.window_index + 1,
        offset=rotate(state.offset, tau),
        _w=w_new,
    )


def encode_direct(
    a: SensingMatrix,
    off: PermutationOffset,
    x,
    noise=None,
) -> np.ndarray:
    """Full O(mn) encode of an arbitrary window against the rotated matrix.

    Oracle path and non-recursive baseline. ``noise`` may be None, a
    :class:`NoiseModel` (one draw from a fresh generator), or an explicit
    noise vector to share draws with another encoding arm.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (a.n,):
        raise ValueError(f"window length {x.shape} does not match n={a.n}")
    y = materialize(a, off) @ x
    op_counter.add(a.m * a.n)
    if noise is None:
        return y
    if isinstance(noise, NoiseModel):
        w = _draw(np.random.default_rng(noise.seed), noise.sigma, a.m)
    else:
        w = np.asarray(noise, dtype=float)
    return y + w


def ortho_coeff_step(
    alpha_prev,
    psi,
    x_new: float,
    x_old: float,
    validate: bool = True,
) -> np.ndarray:
    """Coefficients of the shifted window in an orthonormal basis.

    Given alpha with window = Psi @ alpha, returns the coefficients of the
    window shifted by one sample, whose newest entry is ``x_new`` and whose
    dropped entry was ``x_old``. The update itself is two O(n^2) products;
    ``validate=False`` skips the orthonormality precondition check for
    repeated calls against the same basis.
    """
    alpha_prev = np.asarray(alpha_prev, dtype=float)
    psi = np.asarray(psi, dtype=float)
    n = alpha_prev.shape[0]
    if psi.shape != (n, n):
        raise ValueError(f"basis shape {psi.shape} does not match coefficients ({n})")
    if validate:
        dev = np.max(np.abs(psi.T @ psi - np.eye(n)))
        if dev > 1e-8:
            raise ValueError(f"basis is not orthonormal (deviation {dev:.3e})")
    x_prev = psi @ alpha_prev
    shifted = np.roll(x_prev, -1)
    shifted[-1] += x_new - x_old  # wrapped entry reconstructs x_old; correct it
    op_counter.add(2 * n * n)
    return psi.T @ shifted


@lru_cache(maxsize=8)
def _twiddle(n: int) -> np.ndarray:
    t = np.exp(2j * np.pi * np.arange(n) / n)
    t.setflags(write=False)
    return t


def fourier_coeff_step(alpha_prev, n: int, x_new: float, x_old: float) -> np.ndarray:
    """O(n) spectrum update for a one-sample window shift.

    Convention: alpha = fft(window) / sqrt(n) (numpy's ``norm="ortho"``).
    Shifting the window left by one multiplies bin k by exp(2j pi k / n)
    after the innovation (x_new - x_old)/sqrt(n) is folded into every bin.
    """
    alpha_prev = np.asarray(alpha_prev, dtype=complex)
    if alpha_prev.shape != (n,):
        raise ValueError(f"expected {n} coefficients, got {alpha_prev.shape}")
    out = _twiddle(n) * (alpha_prev + (x_new - x_old) / math.sqrt(n))
    op_counter.add(6 * n)  # complex scale + complex-scalar add per bin
    return out


def write_measurement_trace(path, traces) -> None:
    """Debug CSV of measurement vectors: window_index followed by m values."""
    with open(path, "w") as fh:
        first = traces[0][1] if traces else []
        cols = ",".join(f"y{k}" for k in range(len(first)))
        fh.write(f"window_index,{cols}\n")
        for idx, y in traces:
            vals = ",".join(f"{float(v):.17g}" for v in y)
            fh.write(f"{idx},{vals}\n")
