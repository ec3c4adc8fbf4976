"""OTFS transmitter: delay-Doppler frame, ISFFT, Heisenberg transform and CP.

Rows of every N x M matrix are indexed by subcarrier/delay (``n``), columns by
symbol/Doppler (``m``).  All DFTs are unitary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .params import OtfsParams

CONSTELLATIONS = ("QPSK", "16QAM")

# instants within this many samples of the sample grid are treated as on it;
# the pulse is discontinuous at symbol edges, so both evaluators must agree
GRID_SNAP = 1e-9


def isfft(x_dd: np.ndarray) -> np.ndarray:
    """Delay-Doppler -> frequency-time, ``F_N @ x_dd @ F_M^H``."""
    x_dd = np.asarray(x_dd)
    if x_dd.ndim != 2:
        raise ValueError(f"expected a 2-D frame, got shape {x_dd.shape}")
    return np.fft.ifft(np.fft.fft(x_dd, axis=0, norm="ortho"), axis=1, norm="ortho")


def sfft(x_ft: np.ndarray) -> np.ndarray:
    """Inverse of :func:`isfft`, ``F_N^H @ x_ft @ F_M``."""
    x_ft = np.asarray(x_ft)
    if x_ft.ndim != 2:
        raise ValueError(f"expected a 2-D frame, got shape {x_ft.shape}")
    return np.fft.fft(np.fft.ifft(x_ft, axis=0, norm="ortho"), axis=1, norm="ortho")


@dataclass(frozen=True)
class DelayDopplerFrame:
    """Transmit symbols on the delay-Doppler grid and their frequency-time image."""

    params: OtfsParams
    x_dd: np.ndarray
    x_ft: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        x_dd = np.asarray(self.x_dd, dtype=complex)
        if x_dd.shape != (self.params.N, self.params.M):
            raise ValueError(
                f"frame shape {x_dd.shape} does not match (N, M) = {(self.params.N, self.params.M)}"
            )
        x_dd.setflags(write=False)
        object.__setattr__(self, "x_dd", x_dd)
        x_ft = isfft(x_dd) if self.x_ft is None else np.asarray(self.x_ft, dtype=complex)
        x_ft.setflags(write=False)
        object.__setattr__(self, "x_ft", x_ft)

    @classmethod
    def from_frequency_time(cls, params: OtfsParams, x_ft) -> "DelayDopplerFrame":
        x_ft = np.asarray(x_ft, dtype=complex)
        return cls(params, sfft(x_ft), x_ft)

    @property
    def energy(self) -> float:
        return float(np.vdot(self.x_dd, self.x_dd).real)


def _constellation_points(name: str) -> np.ndarray:
    if name == "QPSK":
        pts = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j])
    elif name == "16QAM":
        lv = np.array([-3, -1, 1, 3])
        pts = (lv[:, None] + 1j * lv[None, :]).ravel()
    else:
        raise ValueError(f"unknown constellation {name!r}; expected one of {CONSTELLATIONS}")
    return pts / np.sqrt(np.mean(np.abs(pts) ** 2))


def generate_frame(params: OtfsParams, seed=None, constellation: str = "QPSK") -> DelayDopplerFrame:
    """Draw i.i.d. unit-energy symbols for every delay-Doppler bin."""
    pts = _constellation_points(constellation)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, pts.size, size=(params.N, params.M))
    return DelayDopplerFrame(params, pts[idx])


def heisenberg_samples(frame: DelayDopplerFrame) -> np.ndarray:
    """Samples of the CP-free transmit signal at ``t = l T / N``.

    With a rectangular pulse, symbol ``m`` contributes an N-point unitary IDFT of
    column ``m`` of the frequency-time matrix; columns are concatenated in time.
    """
    return np.fft.ifft(frame.x_ft, axis=0, norm="ortho").T.reshape(-1)


def evaluate_tx_cp(t, frame: DelayDopplerFrame) -> np.ndarray:
    """Continuous-time transmit signal with cyclic prefix at arbitrary instants.

    Evaluates the exponential sum of the symbol interval that contains each
    ``t``; ``t`` in ``[-T_cp, 0)`` is the cyclic copy of ``s(t + M T)``.
    """
    p = frame.params
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    T, Tcp, MT = p.symbol_duration, p.cp_duration, p.M * p.symbol_duration
    tol = 1e-9 * p.sample_period
    if np.any(t < -Tcp - tol) or np.any(t > MT + tol):
        raise ValueError(f"t outside the CP-extended frame [-{Tcp}, {MT}]")
    neg = t < 0
    t = np.where(neg, t + MT, t)
    # work in sample units and snap values that sit on the sample grid
    q = t / p.sample_period
    q_round = np.round(q)
    q = np.where(np.abs(q - q_round) < GRID_SNAP, q_round, q)
    # a cyclic-prefix instant that snapped onto MT is sample 0
    q = np.where(neg & (q >= p.NM), q - p.NM, q)
    m = np.minimum(np.floor(q / p.N).astype(int), p.M - 1)
    u = q - m * p.N  # position inside the symbol, in units of T/N
    n = np.arange(p.N)
    out = np.empty(t.shape, dtype=complex)
    chunk = max(1, 2**22 // p.N)
    for lo in range(0, t.size, chunk):
        sl = slice(lo, lo + chunk)
        ph = np.exp(2j * np.pi * np.outer(u[sl], n) / p.N)
        out[sl] = np.einsum("kn,nk->k", ph, frame.x_ft[:, m[sl]]) / np.sqrt(p.N)
    return out[0] if scalar else out


def shifted_tx_samples(frame: DelayDopplerFrame, delay: float) -> np.ndarray:
    """``s_CP(l T/N - delay)`` for ``l = 0..NM-1``, for ``0 <= delay <= T_cp``.

    All instants share one sub-sample offset, so each symbol's exponential sum is
    evaluated on a uniformly offset grid with one N-point IFFT per symbol.  This
    is the same closed form as :func:`evaluate_tx_cp`, only batched.
    """
    p = frame.params
    d = delay / p.sample_period
    if abs(d - round(d)) < GRID_SNAP:
        d = float(round(d))
    d_int = int(np.floor(d))
    frac = d - d_int
    if frac > 0:
        d_int += 1
        g = 1.0 - frac  # evaluate at integer index + g
    else:
        g = 0.0
    n = np.arange(p.N)
    cols = frame.x_ft * np.exp(2j * np.pi * n * g / p.N)[:, None]
    z = np.fft.ifft(cols, axis=0, norm="ortho").T.reshape(-1)
    return np.roll(z, d_int)


def save_frame_csv(frame: DelayDopplerFrame, path) -> None:
    """Write ``x_dd`` as N rows of interleaved real/imag values."""
    x = frame.x_dd
    inter = np.empty((x.shape[0], 2 * x.shape[1]))
    inter[:, 0::2] = x.real
    inter[:, 1::2] = x.imag
    np.savetxt(path, inter, delimiter=",", fmt="%.17g")


def load_frame_csv(params: OtfsParams, path) -> DelayDopplerFrame:
    inter = np.loadtxt(path, delimiter=",", ndmin=2)
    return DelayDopplerFrame(params, inter[:, 0::2] + 1j * inter[:, 1::2])


def save_frame_binary(frame: DelayDopplerFrame, path) -> None:
    """Row-major little-endian float64 interleaved real/imag, no header."""
    np.ascontiguousarray(frame.x_dd, dtype="<c16").tofile(Path(path))


def load_frame_binary(params: OtfsParams, path) -> DelayDopplerFrame:
    x = np.fromfile(Path(path), dtype="<c16")
    return DelayDopplerFrame(params, x.reshape(params.N, params.M))
