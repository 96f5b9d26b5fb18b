"""Streaming decoder: per-window LASSO, support voting, debiasing, averaging.

Each window is decoded by a warm-started LASSO solve; detected support
indices collect votes in a ledger keyed by global stream position. Once an
index has enough votes it joins the least-squares refit of every later
window that covers it, and the refit values are averaged into the final
estimate. An index is finalized (emitted) right after its last covering
window has been processed, so the output stream trails the input by the
window overlap.

Two modes share the machinery:

* ``voting``       -- threshold/vote/refit/average (the debiased scheme);
* ``average_only`` -- every window's raw LASSO estimate is averaged into
  all covered positions (the biased baseline).

Acceptance thresholds scale with actual window coverage: positions near
the start (and, at flush time, near the end) of the stream are covered by
fewer windows, so the vote requirement is prorated instead of being
unreachable there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import SingularSystemError
from .sensing import PermutationOffset, SensingMatrix, materialize, view
from .solvers import LassoProblem, SolverReport, fista, lse_on_support
from .linalg import spectral_norm_sq

__all__ = [
    "PipelineError",
    "PipelineConfig",
    "VoteLedger",
    "Emission",
    "warm_start",
    "detect_support_threshold",
    "detect_support_annihilate",
    "cast_votes",
    "accepted_support",
    "update_averages",
    "StreamingDecoder",
    "forgetting_joint_estimate",
    "write_emissions",
]


class PipelineError(RuntimeError):
    """Solver failure inside the streaming pipeline, tagged with the window."""

    def __init__(self, window: int, message: str):
        super().__init__(f"window {window}: {message}")
        self.window = window


@dataclass(frozen=True)
class PipelineConfig:
    """Decoder knobs for one stream.

    xi1: magnitude threshold a LASSO entry must clear to cast a vote.
    xi2: votes required before an index joins the least-squares refit
         (defaults to a majority of the covering windows).
    xi3: number of top-magnitude indices voted by the annihilation detector.
    """

    n: int
    lam: float
    tau: int = 1
    xi1: float = 0.1
    xi2: int | None = None
    xi3: int | None = None
    warm_tail: str = "zeros"  # zeros | hold
    detector: str = "threshold"  # threshold | annihilate_topk
    solver_eps: float | None = None
    max_iter: int = 10_000

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not (1 <= self.tau <= self.n):
            raise ValueError(f"need 1 <= tau <= n, got tau={self.tau}")
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if self.xi1 <= 0:
            raise ValueError(f"xi1 must be > 0, got {self.xi1}")
        cov = self.n // self.tau
        if self.xi2 is None:
            object.__setattr__(self, "xi2", max(1, math.ceil(self.n / (2 * self.tau))))
        if not (1 <= self.xi2 <= cov):
            raise ValueError(f"need 1 <= xi2 <= n // tau = {cov}, got {self.xi2}")
        if self.xi3 is None:
            object.__setattr__(self, "xi3", self.xi2)
        if not (1 <= self.xi3 <= self.xi2):
            raise ValueError(f"need 1 <= xi3 <= xi2 = {self.xi2}, got {self.xi3}")
        if self.warm_tail not in ("zeros", "hold"):
            raise ValueError(f"unknown warm_tail policy {self.warm_tail!r}")
        if self.detector not in ("threshold", "annihilate_topk"):
            raise ValueError(f"unknown detector {self.detector!r}")


def warm_start(prev, tau: int, policy: str = "zeros") -> np.ndarray:
    """Shift the previous window's estimate left by tau and fill the tail.

    ``zeros`` fills the tau new positions with 0 (the sparse default),
    ``hold`` repeats the last known value.
    """
    prev = np.asarray(prev, dtype=float)
    n = prev.shape[0]
    if not (1 <= tau <= n):
        raise ValueError(f"need 1 <= tau <= n={n}, got tau={tau}")
    out = np.empty(n)
    out[: n - tau] = prev[tau:]
    if policy == "zeros":
        out[n - tau :] = 0.0
    elif policy == "hold":
        out[n - tau :] = prev[-1]
    else:
        raise ValueError(f"unknown warm-start policy {policy!r}")
    return out


def detect_support_threshold(x_hat, xi1: float) -> np.ndarray:
    """Window indices whose estimate magnitude reaches xi1 (inclusive)."""
    if xi1 <= 0:
        raise ValueError(f"xi1 must be > 0, got {xi1}")
    return np.flatnonzero(np.abs(np.asarray(x_hat)) >= xi1)


def detect_support_annihilate(
    y,
    a_view,
    x_warm,
    lam: float,
    xi3: int,
    eps: float | None = None,
    max_iter: int = 10_000,
    lip: float | None = None,
) -> np.ndarray:
    """Vote the xi3 largest entries of a LASSO solve on the annihilated signal.

    The warm estimate is subtracted from the measurement and LASSO is run on
    the residual; the xi3 largest-magnitude positions of the residual
    estimate (ties to the lower index) are returned together with the warm
    support. If the residual estimate is numerically zero (a perfect prior),
    only the warm support is returned and no residual votes are cast.
    """
    if xi3 < 1:
        raise ValueError(f"xi3 must be >= 1, got {xi3}")
    y = np.asarray(y, dtype=float)
    x_warm = np.asarray(x_warm, dtype=float)
    resid = y - a_view @ x_warm
    rep = fista(LassoProblem(a_view, resid, lam, lip=lip), np.zeros(x_warm.shape[0]),
                eps=eps, max_iter=max_iter)
    e = np.abs(rep.x_hat)
    warm_supp = set(np.flatnonzero(x_warm).tolist())
    if float(e.max(initial=0.0)) < 1e-12:
        return np.array(sorted(warm_supp), dtype=int)
    top = np.argsort(-e, kind="stable")[: min(xi3, e.shape[0])]
    return np.array(sorted(warm_supp | set(top.tolist())), dtype=int)


class VoteLedger:
    """Per-global-index vote counts, recovery counts and running means.

    Indices below ``finalized_upto`` are frozen; the arrays grow lazily as
    windows advance. ``track_contributions`` retains every value averaged
    into an index (used by the averaging-inequality checks; memory-heavy,
    off by default).
    """

    def __init__(self, n: int, tau: int, track_contributions: bool = False):
        self.n = n
        self.tau = tau
        self.cov_full = n // tau
        self.votes = np.zeros(0, dtype=np.int64)
        self.recoveries = np.zeros(0, dtype=np.int64)
        self.averages = np.zeros(0)
        self.finalized_upto = 0
        self.contributions: dict[int, list[float]] | None = (
            {} if track_contributions else None
        )

    def ensure(self, size: int) -> None:
        if size <= self.votes.shape[0]:
            return
        cap = max(size, 2 * self.votes.shape[0], 1024)
        for name in ("votes", "recoveries", "averages"):
            old = getattr(self, name)
            new = np.zeros(cap, dtype=old.dtype)
            new[: old.shape[0]] = old
            setattr(self, name, new)

    def coverage(self, g: int, last_window: int | None = None) -> int:
        """Number of windows covering global index g.

        Start-aware always; also end-aware when ``last_window`` is given.
        """
        tau, n = self.tau, self.n
        first = max(0, -((-(g - n + 1)) // tau))  # ceil((g-n+1)/tau), clipped
        last = g // tau
        if last_window is not None:
            last = min(last, last_window)
        return last - first + 1


def cast_votes(ledger: VoteLedger, support, window_start: int) -> None:
    """Add one vote to each detected index, translated to global positions."""
    idx = np.asarray(support, dtype=int)
    if idx.size == 0:
        return
    if idx.min() < 0 or idx.max() >= ledger.n:
        raise IndexError("support indices must lie inside the window")
    g = idx + window_start
    if g.min() < ledger.finalized_upto:
        raise ValueError("attempt to vote on a finalized index")
    ledger.ensure(window_start + ledger.n)
    np.add.at(ledger.votes, g, 1)


def accepted_support(
    ledger: VoteLedger,
    window_start: int,
    xi2: int,
    m: int,
    last_window: int | None = None,
) -> np.ndarray:
    """Window indices whose votes reach the (coverage-prorated) threshold.

    If that set would not leave the refit overdetermined (size >= m), the
    m - 1 highest-vote indices are kept, ties going to the lower index.
    """
    if xi2 < 1:
        raise ValueError(f"xi2 must be >= 1, got {xi2}")
    ledger.ensure(window_start + ledger.n)
    n, tau = ledger.n, ledger.tau
    votes = ledger.votes[window_start : window_start + n]
    g = np.arange(window_start, window_start + n)
    first = np.maximum(0, -((-(g - n + 1)) // tau))
    last = g // tau
    if last_window is not None:
        last = np.minimum(last, last_window)
    cov = last - first + 1
    # integer ceil(xi2 * cov / cov_full), prorating the vote requirement
    prorated = (xi2 * cov + ledger.cov_full - 1) // ledger.cov_full
    thr = np.maximum(1, np.minimum(xi2, prorated))
    accepted = np.flatnonzero(votes >= thr).tolist()
    if len(accepted) >= m:
        accepted.sort(key=lambda j: (-votes[j], j))
        accepted = sorted(accepted[: m - 1])
    return np.asarray(accepted, dtype=int)


def update_averages(ledger: VoteLedger, x_value, support, window_start: int) -> None:
    """Fold this window's values into the running means of ``support``."""
    x_value = np.asarray(x_value, dtype=float)
    ledger.ensure(window_start + ledger.n)
    for j in support:
        g = window_start + int(j)
        if g < ledger.finalized_upto:
            raise ValueError("attempt to update a finalized index")
        ledger.recoveries[g] += 1
        l = ledger.recoveries[g]
        ledger.averages[g] += (x_value[int(j)] - ledger.averages[g]) / l
        if ledger.contributions is not None:
            ledger.contributions.setdefault(g, []).append(float(x_value[int(j)]))


@dataclass(frozen=True)
class Emission:
    """A finalized stream estimate."""

    index: int
    estimate: float
    votes: int
    recoveries: int
    finalized_at: int


@dataclass
class WindowStats:
    window: int
    iterations: int
    kkt_residual: float
    converged: bool
    support_size: int = 0


class StreamingDecoder:
    """Order-dependent, single-writer decoder for one measurement stream.

    Feed measurements window by window via :meth:`step`; call :meth:`flush`
    once the stream ends to drain the tail. Emissions come back in global
    index order with no gaps.
    """

    def __init__(
        self,
        matrix: SensingMatrix,
        cfg: PipelineConfig,
        mode: str = "voting",
        lip: float | None = None,
        track_contributions: bool = False,
    ):
        if cfg.n != matrix.n:
            raise ValueError(f"config n={cfg.n} does not match matrix n={matrix.n}")
        if mode not in ("voting", "average_only"):
            raise ValueError(f"unknown mode {mode!r}")
        self.matrix = matrix
        self.cfg = cfg
        self.mode = mode
        # rotation preserves the A^T A spectrum, so one estimate serves all windows
        self.lip = lip if lip is not None else spectral_norm_sq(matrix.base)
        self.ledger = VoteLedger(cfg.n, cfg.tau, track_contributions)
        self.windows_done = 0
        self.emitted_upto = 0
        self.stats: list[WindowStats] = []
        self._prev_lasso: np.ndarray | None = None
        self._prev_debias: np.ndarray | None = None
        self._last: tuple[int, int, np.ndarray, np.ndarray] | None = None
        self._flushed = False

    def step(self, y) -> list[Emission]:
        """Decode the next window's measurement; returns newly final indices."""
        if self._flushed:
            raise RuntimeError("decoder already flushed")
        y = np.asarray(y, dtype=float)
        if y.shape != (self.matrix.m,):
            raise ValueError(f"measurement shape {y.shape} != m={self.matrix.m}")
        cfg = self.cfg
        i = self.windows_done
        start = i * cfg.tau
        off = start % cfg.n
        a = view(self.matrix, off)

        if self._prev_lasso is None:
            x0 = np.zeros(cfg.n)
        else:
            x0 = warm_start(self._prev_lasso, cfg.tau, cfg.warm_tail)
        report = fista(
            LassoProblem(a, y, cfg.lam, lip=self.lip),
            x0,
            eps=cfg.solver_eps,
            max_iter=cfg.max_iter,
        )
        x_hat = report.x_hat
        self.ledger.ensure(start + cfg.n)

        if self.mode == "average_only":
            update_averages(self.ledger, x_hat, range(cfg.n), start)
            support_size = cfg.n
        else:
            if cfg.detector == "threshold":
                detected = detect_support_threshold(x_hat, cfg.xi1)
            else:
                prior = (
                    warm_start(self._prev_debias, cfg.tau, cfg.warm_tail)
                    if self._prev_debias is not None
                    else np.zeros(cfg.n)
                )
                detected = detect_support_annihilate(
                    y, a, prior, cfg.lam, cfg.xi3,
                    eps=cfg.solver_eps, max_iter=cfg.max_iter, lip=self.lip,
                )
            cast_votes(self.ledger, detected, start)
            accepted = accepted_support(self.ledger, start, cfg.xi2, self.matrix.m)
            try:
                x_tilde = lse_on_support(a, y, accepted)
            except SingularSystemError as exc:
                raise PipelineError(i, f"refit failed: {exc}") from exc
            update_averages(self.ledger, x_tilde, accepted, start)
            self._prev_debias = x_tilde
            self._last = (i, off, y, accepted)
            support_size = int(accepted.size)

        self._prev_lasso = x_hat
        self.stats.append(
            WindowStats(i, report.iterations, report.kkt_residual, report.converged,
                        support_size)
        )
        self.windows_done += 1
        return self._emit(start + cfg.tau)

    def flush(self) -> list[Emission]:
        """Drain the stream tail once no more windows will arrive."""
        if self._flushed or self.windows_done == 0:
            self._flushed = True
            return []
        self._flushed = True
        if self.mode == "voting":
            self._drain_tail()
        last_start = (self.windows_done - 1) * self.cfg.tau
        return self._emit(last_start + self.cfg.n)

    def _drain_tail(self) -> None:
        # Tail indices never reach the interior vote count because their
        # remaining windows do not exist; re-run acceptance for the final
        # window with end-aware coverage and refit the newly accepted ones.
        assert self._last is not None
        i, off, y, used = self._last
        start = i * self.cfg.tau
        accepted = accepted_support(
            self.ledger, start, self.cfg.xi2, self.matrix.m, last_window=i
        )
        fresh = sorted(set(accepted.tolist()) - set(used.tolist()))
        if not fresh:
            return
        a = view(self.matrix, off)
        try:
            x_tilde = lse_on_support(a, y, accepted)
        except SingularSystemError as exc:
            raise PipelineError(i, f"tail refit failed: {exc}") from exc
        update_averages(self.ledger, x_tilde, fresh, start)

    def _emit(self, boundary: int) -> list[Emission]:
        led = self.ledger
        led.ensure(boundary)
        out = [
            Emission(
                index=g,
                estimate=float(led.averages[g]),
                votes=int(led.votes[g]),
                recoveries=int(led.recoveries[g]),
                finalized_at=self.windows_done - 1,
            )
            for g in range(self.emitted_upto, boundary)
        ]
        self.emitted_upto = max(self.emitted_upto, boundary)
        led.finalized_upto = self.emitted_upto
        return out


def forgetting_joint_estimate(
    matrix: SensingMatrix,
    windows,
    rho: float,
    lam: float,
    eps: float | None = None,
    max_iter: int = 10_000,
    max_entries: int = 50_000_000,
) -> np.ndarray:
    """Joint LASSO over the last T windows with exponentially decaying weights.

    ``windows`` is a sequence of (window_start, measurement) pairs with
    uniform spacing; window age a receives weight rho**a (the newest window
    has weight 1, and rho = 0 reduces to the single-window problem). The
    weighted stack is rescaled into one standard LASSO over the union of
    the windows' positions; the returned vector spans those positions,
    first window's start first.
    """
    if not (0.0 <= rho < 1.0):
        raise ValueError(f"need 0 <= rho < 1, got {rho}")
    if not windows:
        raise ValueError("need at least one window")
    starts = [int(s) for s, _ in windows]
    ys = [np.asarray(y, dtype=float) for _, y in windows]
    if sorted(starts) != starts or len(set(starts)) != len(starts):
        raise ValueError("window starts must be strictly increasing")
    m, n = matrix.m, matrix.n
    spacing = starts[1] - starts[0] if len(starts) > 1 else 1
    if any(b - a != spacing for a, b in zip(starts, starts[1:])):
        raise ValueError("window starts must be uniformly spaced")
    span = starts[-1] - starts[0] + n
    if len(starts) * m * span > max_entries:
        raise MemoryError(
            f"joint system {len(starts) * m} x {span} exceeds the configured cap"
        )

    design = np.zeros((len(starts) * m, span))
    rhs = np.zeros(len(starts) * m)
    col_weight = np.zeros(span)
    for t, (s, y) in enumerate(zip(starts, ys)):
        age = (starts[-1] - s) // spacing
        w = rho**age if age > 0 else 1.0
        sq = math.sqrt(w)
        lo = s - starts[0]
        block = materialize(matrix, PermutationOffset(s % n, n))
        design[t * m : (t + 1) * m, lo : lo + n] = sq * block
        rhs[t * m : (t + 1) * m] = sq * y
        col_weight[lo : lo + n] += w

    safe = np.where(col_weight > 0, col_weight, 1.0)
    report = fista(
        LassoProblem(design / safe, rhs, lam), np.zeros(span), eps=eps, max_iter=max_iter
    )
    return report.x_hat / safe


def write_emissions(path, emissions) -> None:
    """CSV of finalized estimates, one row per stream index."""
    with open(path, "w") as fh:
        fh.write("global_index,x_bar,votes,recoveries,finalized_at_window\n")
        for e in emissions:
            fh.write(
                f"{e.index},{e.estimate:.17g},{e.votes},{e.recoveries},{e.finalized_at}\n"
            )
