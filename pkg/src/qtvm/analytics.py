"""Quench observables: quasiparticle dispersion, critical times, rate functions.

These are the classical reference formulas the simulator's output is compared
against.  Everything is pure and deterministic; inputs are plain numbers,
snapshot records, or statevectors.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import NoDqptError
from .statevector import StateVector, inner_product

#: Overlap magnitudes below this are reported as an infinite rate.
_OVERLAP_FLOOR = 1e-300


@dataclass(frozen=True)
class QuenchParams:
    """A sudden field change g0 -> g1 on an L-site ring."""

    g0: float
    g1: float
    L: int

    def __post_init__(self) -> None:
        if self.g0 < 0 or self.g1 < 0:
            raise ValueError(f"fields must be nonnegative, got g0={self.g0}, g1={self.g1}")
        if self.g0 == self.g1:
            raise ValueError("a quench needs g0 != g1")


@dataclass(frozen=True)
class TimeSeries:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.times.shape != self.values.shape or self.times.ndim != 1:
            raise ValueError(
                f"times and values must be equal-length 1-D arrays, "
                f"got {self.times.shape} and {self.values.shape}"
            )
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")


def epsilon_k(g: float, k):
    """Quasiparticle energy sqrt((g - cos k)^2 + sin^2 k); broadcasts over k."""
    return np.sqrt((g - np.cos(k)) ** 2 + np.sin(k) ** 2)


def critical_time(g0: float, g1: float) -> float:
    """First nonanalyticity time t* = pi / epsilon_{k*}(g1).

    The critical mode k* satisfies cos k* = (1 + g0 g1)/(g0 + g1); it exists
    only when that ratio lies in [-1, 1], i.e. when the quench crosses the
    transition.  Otherwise NoDqptError.
    """
    if abs(1.0 + g0 * g1) > abs(g0 + g1):
        raise NoDqptError(
            f"quench g0={g0} -> g1={g1} has no critical mode: "
            f"|1 + g0*g1| = {abs(1 + g0 * g1):g} exceeds |g0 + g1| = {abs(g0 + g1):g}"
        )
    k_star = math.acos((1.0 + g0 * g1) / (g0 + g1))
    return math.pi / float(epsilon_k(g1, k_star))


def loschmidt_rate(initial: StateVector, evolved: StateVector, L: int) -> float:
    """-(1/L) ln |<initial|evolved>|^2, or +inf below the overlap floor."""
    overlap = abs(inner_product(initial, evolved))
    if overlap < _OVERLAP_FLOOR:
        return math.inf
    return -2.0 * math.log(overlap) / L


def rate_from_amplitude(amplitude0: complex, L: int) -> float:
    """Rate when the reference state is |0...0>: the overlap is amplitude 0."""
    overlap = abs(amplitude0)
    if overlap < _OVERLAP_FLOOR:
        return math.inf
    return -2.0 * math.log(overlap) / L


def momentum_grid(L: int) -> np.ndarray:
    """Allowed momenta 0 < k < pi: k = pi(2m-1)/L for m = 1..L/2 (L even)."""
    if L < 2 or L % 2:
        raise ValueError(f"momentum grid needs even L >= 2, got {L}")
    m = np.arange(1, L // 2 + 1)
    return math.pi * (2 * m - 1) / L


def mx_analytic(L: int, g0: float, g: float, t: float) -> float:
    """Transverse magnetization (2/L) sum over 0<k<pi of
    (g0 + cos k)/w0 + (g - g0) sin^2 k / (w^2 w0) * (1 - 4 cos(w t)),
    with w = epsilon_k(g) and w0 = epsilon_k(g0)."""
    k = momentum_grid(L)
    w = epsilon_k(g, k)
    w0 = epsilon_k(g0, k)
    if np.any(w0 == 0.0):
        raise ValueError(f"singular mode: epsilon_k(g0={g0}) vanishes on the L={L} grid")
    terms = (g0 + np.cos(k)) / w0 + (g - g0) * np.sin(k) ** 2 / (w**2 * w0) * (
        1.0 - 4.0 * np.cos(w * t)
    )
    return float(2.0 / L * terms.sum())


def magnetization_series(snapshots, dt: float, qubit: int = 1) -> TimeSeries:
    """<sigma^z_qubit> against time from snap records tagged with step numbers."""
    if not snapshots:
        raise ValueError("no snapshots recorded: cannot build a magnetization series")
    times = [snap.tag * dt for snap in snapshots]
    values = [snap.expectation_z[qubit] for snap in snapshots]
    return TimeSeries(np.array(times), np.array(values))


def rate_series(snapshots, dt: float, num_qubits: int) -> TimeSeries:
    """Loschmidt rate against time for a run that started in |0...0>."""
    if not snapshots:
        raise ValueError("no snapshots recorded: cannot build a rate series")
    times = [snap.tag * dt for snap in snapshots]
    values = [rate_from_amplitude(snap.amplitude0, num_qubits) for snap in snapshots]
    return TimeSeries(np.array(times), np.array(values))


def zero_crossings(series: TimeSeries) -> list[float]:
    """Times where the series changes sign, linearly interpolated."""
    out: list[float] = []
    t, v = series.times, series.values
    for i in range(len(v) - 1):
        if v[i] == 0.0:
            out.append(float(t[i]))
        elif v[i] * v[i + 1] < 0.0:
            out.append(float(t[i] - v[i] * (t[i + 1] - t[i]) / (v[i + 1] - v[i])))
    if len(v) and v[-1] == 0.0:
        out.append(float(t[-1]))
    return out


def predicted_crossing_times(g0: float, g1: float, t_max: float) -> list[float]:
    """The (n + 1/2) t* grid up to t_max; empty when there is no t*."""
    try:
        t_star = critical_time(g0, g1)
    except NoDqptError:
        return []
    out = []
    n = 0
    while (n + 0.5) * t_star <= t_max:
        out.append((n + 0.5) * t_star)
        n += 1
    return out


def series_to_csv(series: TimeSeries, value_name: str) -> str:
    lines = [f"t,{value_name}"]
    for t, v in zip(series.times, series.values):
        lines.append(f"{t:.17g},{v:.17g}")
    return "\n".join(lines) + "\n"


def quench_summary(
    params: QuenchParams, dt: float, magnetization: TimeSeries, rate: TimeSeries | None = None
) -> dict:
    """JSON-ready digest: parameters, crossings found, crossings predicted."""
    t_max = float(magnetization.times[-1]) if magnetization.times.size else 0.0
    summary = {
        "L": params.L,
        "g0": params.g0,
        "g1": params.g1,
        "dt": dt,
        "zero_crossings": zero_crossings(magnetization),
        "predicted_crossings": predicted_crossing_times(params.g0, params.g1, t_max),
    }
    try:
        summary["critical_time"] = critical_time(params.g0, params.g1)
    except NoDqptError:
        summary["critical_time"] = None
    if rate is not None:
        finite = rate.values[np.isfinite(rate.values)]
        summary["max_rate"] = float(finite.max()) if finite.size else None
    return summary


def summary_to_json(summary: dict) -> str:
    return json.dumps(summary, indent=2) + "\n"
