"""Synthetic sparse data streams and the sparsity-truncation error model.

A stream entry is zero with probability ``1 - p``; otherwise its magnitude
is uniform on ``[amp_low, amp_high]`` with an equiprobable sign. The band
form covers both the symmetric-interval model (``amp_low = 0``) and the
bounded-away-from-zero dynamic-range setups used in the experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "StreamConfigError",
    "StreamConfig",
    "SparseStream",
    "gen_stream",
    "window",
    "mismatch_expectation",
    "mismatch_mc",
    "save_stream",
    "load_stream",
]


class StreamConfigError(ValueError):
    """Invalid stream model parameters."""


@dataclass(frozen=True)
class StreamConfig:
    """Parameters of the random sparse stream model.

    p: probability that an entry is nonzero, in (0, 1].
    amp_low, amp_high: magnitude band endpoints, 0 <= amp_low <= amp_high.
    seed: generator seed (identical seeds give identical streams).
    length: number of entries to generate.
    """

    p: float
    amp_low: float
    amp_high: float
    seed: int
    length: int

    def __post_init__(self):
        if not (0.0 < self.p <= 1.0):
            raise StreamConfigError(f"p must be in (0, 1], got {self.p}")
        if not (0.0 <= self.amp_low <= self.amp_high):
            raise StreamConfigError(
                f"need 0 <= amp_low <= amp_high, got [{self.amp_low}, {self.amp_high}]"
            )
        if self.length < 0:
            raise StreamConfigError(f"length must be >= 0, got {self.length}")


@dataclass(frozen=True)
class SparseStream:
    values: np.ndarray
    config: StreamConfig

    def __len__(self) -> int:
        return len(self.values)


def gen_stream(cfg: StreamConfig) -> SparseStream:
    """Draw a stream from the sparse model; deterministic per seed."""
    rng = np.random.default_rng(cfg.seed)
    nonzero = rng.random(cfg.length) < cfg.p
    mags = rng.uniform(cfg.amp_low, cfg.amp_high, cfg.length)
    signs = rng.integers(0, 2, cfg.length) * 2 - 1
    values = np.where(nonzero, signs * mags, 0.0)
    values.setflags(write=False)
    return SparseStream(values=values, config=cfg)


def window(stream: SparseStream, i: int, n: int, tau: int = 1) -> np.ndarray:
    """The i-th length-n window of the stream under step size tau.

    Returns ``[x_{i*tau}, ..., x_{i*tau + n - 1}]`` as a fresh array.
    """
    if i < 0 or n < 1 or tau < 1:
        raise ValueError(f"bad window request i={i}, n={n}, tau={tau}")
    start = i * tau
    if start + n > len(stream.values):
        raise IndexError(
            f"window [{start}, {start + n}) out of range for stream of length "
            f"{len(stream.values)}"
        )
    return np.array(stream.values[start : start + n])


def mismatch_expectation(n: int, kappa: int, p: float, amp: float) -> float:
    """Expected l1 mass beyond the kappa largest entries.

    Closed form for a length-n vector whose entries are zero w.p. 1-p and
    otherwise uniform on [-amp, amp]:

        amp * sum_{k=kappa+1}^{n} C(n,k) p^k (1-p)^{n-k}
                  * sum_{i=kappa+1}^{k} (1 - i/(k+1))

    The inner sum collapses to (k - kappa) - (k(k+1) - kappa(kappa+1)) / (2(k+1)),
    and binomial weights are evaluated through log-factorials so n up to 1e4
    stays stable.
    """
    if not (0 <= kappa <= n):
        raise ValueError(f"need 0 <= kappa <= n, got kappa={kappa}, n={n}")
    if not (0.0 < p <= 1.0):
        raise ValueError(f"p must be in (0, 1], got {p}")
    if kappa >= n:
        return 0.0

    k = np.arange(kappa + 1, n + 1)
    logfact = np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, n + 1)))))
    log_comb = logfact[n] - logfact[k] - logfact[n - k]
    log_pk = k * math.log(p)
    if p < 1.0:
        log_qk = (n - k) * math.log1p(-p)
    else:
        # q = 0: only the k = n term survives
        log_qk = np.where(k == n, 0.0, -np.inf)
    weights = np.exp(log_comb + log_pk + log_qk)
    inner = (k - kappa) - (k * (k + 1) - kappa * (kappa + 1)) / (2.0 * (k + 1))
    return float(amp * np.sum(weights * inner))


def mismatch_mc(
    n: int,
    kappa: int,
    p: float,
    amp: float,
    trials: int,
    seed: int = 0,
) -> float:
    """Monte Carlo mean of the l1 mass beyond the kappa largest entries.

    Independent oracle for :func:`mismatch_expectation`; draws ``trials``
    i.i.d. length-n vectors from the same model.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not (0 <= kappa <= n):
        raise ValueError(f"need 0 <= kappa <= n, got kappa={kappa}, n={n}")
    if kappa >= n:
        return 0.0
    rng = np.random.default_rng(seed)
    total = 0.0
    done = 0
    chunk = max(1, min(trials, 10_000_000 // max(n, 1)))
    while done < trials:
        t = min(chunk, trials - done)
        mask = rng.random((t, n)) < p
        mags = rng.uniform(0.0, amp, (t, n))
        absx = np.where(mask, mags, 0.0)
        absx.sort(axis=1)  # ascending: the first n-kappa entries are the tail
        total += float(absx[:, : n - kappa].sum())
        done += t
    return total / trials


def save_stream(values, path) -> None:
    """Write a stream in the text format: one ASCII real per line."""
    vals = np.asarray(values, dtype=float)
    with open(path, "w") as fh:
        for v in vals:
            fh.write(repr(float(v)) + "\n")


def load_stream(path) -> np.ndarray:
    """Read a text-format stream back into a float array."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    return np.array([float(ln) for ln in lines], dtype=float)
