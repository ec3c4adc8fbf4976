"""GLRT statistic, gain estimate and the FFT-factorised statistic map."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .maps import DelayDopplerMap
from .model import steering_b, steering_c
from .params import OtfsParams, derive_limits


class DegenerateSignalError(ValueError):
    """The transmit signal has zero energy, so the statistic is undefined."""


def _workers() -> int:
    env = os.environ.get("OTFS_LAB_THREADS")
    return max(1, int(env)) if env else 1


def _check_s(s: np.ndarray) -> float:
    energy = float(np.vdot(s, s).real)
    if energy == 0.0:
        raise DegenerateSignalError("transmit signal has zero energy")
    return energy


def _matched_product(y, s, delay, doppler, params):
    """``s^H F^H B^H(delay) F C^H(doppler) y``."""
    S = np.fft.fft(s, norm="ortho") * steering_b(delay, params)
    Z = np.fft.fft(np.conj(steering_c(doppler, params)) * y, norm="ortho")
    return np.vdot(S, Z)


def glrt_statistic(y, s, noise_variance: float, delay: float, doppler: float, params: OtfsParams) -> float:
    """Normalised matched-filter power at one delay-Doppler hypothesis."""
    if not noise_variance > 0:
        raise ValueError("noise_variance must be positive")
    energy = _check_s(s)
    v = _matched_product(np.asarray(y), np.asarray(s), delay, doppler, params)
    return float(abs(v) ** 2 / (noise_variance * energy))


def estimate_alpha(y, s, delay: float, doppler: float, params: OtfsParams) -> complex:
    """Least-squares channel gain for a fixed delay-Doppler hypothesis."""
    energy = _check_s(s)
    return complex(_matched_product(np.asarray(y), np.asarray(s), delay, doppler, params) / energy)


@dataclass(frozen=True)
class DetectionGrid:
    """Delay-Doppler search grid.

    Delay bins are ``d * (T/N) / os_tau`` for ``d = 0..n_delay-1``; Doppler bins
    are ``j / (M T) / os_nu`` for ``j = -n_doppler//2 .. n_doppler - n_doppler//2 - 1``.
    """

    params: OtfsParams
    n_delay: int
    n_doppler: int
    os_tau: int = 1
    os_nu: int = 1

    def __post_init__(self):
        p = self.params
        for name in ("n_delay", "n_doppler", "os_tau", "os_nu"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if self.n_delay > p.NM * self.os_tau:
            raise ValueError("delay extent exceeds the ISI-embracing period M/df")
        if self.n_doppler > p.NM * self.os_nu:
            raise ValueError("Doppler extent exceeds the ICI-embracing period N/T")

    @classmethod
    def default(
        cls,
        params: OtfsParams,
        os_tau: int = 1,
        os_nu: int = 1,
        max_delay: float | None = None,
        doppler_bins: int | None = None,
    ) -> "DetectionGrid":
        """Delay over ``[0, max_delay]`` (default ``T_cp``), Doppler over ``doppler_bins``
        natural bins centred on zero (default the full ICI-embracing interval)."""
        lim = derive_limits(params)
        max_delay = params.cp_duration if max_delay is None else max_delay
        if max_delay > lim.tau_max_isi * (1 + 1e-12):
            raise ValueError("max_delay exceeds the ISI-embracing unambiguous delay")
        n_delay = int(np.floor(max_delay / params.sample_period * os_tau + 1e-9)) + 1
        n_delay = min(n_delay, params.NM * os_tau)
        doppler_bins = params.NM if doppler_bins is None else doppler_bins
        return cls(params, n_delay, doppler_bins * os_nu, os_tau, os_nu)

    @property
    def delay_step(self) -> float:
        return self.params.sample_period / self.os_tau

    @property
    def doppler_step(self) -> float:
        return self.params.doppler_resolution / self.os_nu

    @property
    def doppler_index(self) -> np.ndarray:
        return np.arange(self.n_doppler) - self.n_doppler // 2

    @property
    def delays(self) -> np.ndarray:
        return np.arange(self.n_delay) * self.delay_step

    @property
    def dopplers(self) -> np.ndarray:
        return self.doppler_index * self.doppler_step

    @property
    def periodic(self) -> tuple[bool, bool]:
        p = self.params
        return (self.n_delay == p.NM * self.os_tau, self.n_doppler == p.NM * self.os_nu)

    def sub_grid(self, delay_slice: slice, doppler_slice: slice) -> tuple[np.ndarray, np.ndarray]:
        return self.delays[delay_slice], self.dopplers[doppler_slice]


def glrt_map(y, s, noise_variance: float, grid: DetectionGrid, chunk: int = 64) -> DelayDopplerMap:
    """Statistic at every grid cell.

    Per Doppler bin: one phase-ramp multiply of ``y``, one length-NM DFT, one
    conjugate product with ``DFT(s)`` and one zero-padded inverse DFT of length
    ``NM * os_tau`` that yields every delay bin at once.
    """
    p = grid.params
    if not noise_variance > 0:
        raise ValueError("noise_variance must be positive")
    y = np.asarray(y, dtype=complex)
    s = np.asarray(s, dtype=complex)
    energy = _check_s(s)
    NM = p.NM
    L = NM * grid.os_tau
    S_conj = np.conj(scipy.fft.fft(s, norm="ortho"))
    ell = np.arange(NM)
    dop = grid.dopplers
    out = np.empty((grid.n_delay, grid.n_doppler))
    workers = _workers()
    for lo in range(0, grid.n_doppler, chunk):
        nu = dop[lo : lo + chunk]
        turns = np.mod(np.outer(nu * p.sample_period, ell), 1.0)
        Z = scipy.fft.fft(np.exp(-2j * np.pi * turns) * y, axis=1, norm="ortho", workers=workers)
        prod = Z * S_conj
        if L > NM:
            prod = np.concatenate([prod, np.zeros((prod.shape[0], L - NM), dtype=complex)], axis=1)
        # sum_n prod[n] exp(+j 2 pi n d / L) == L * ifft(prod)[d]
        corr = scipy.fft.ifft(prod, axis=1, workers=workers)[:, : grid.n_delay] * L
        out[:, lo : lo + chunk] = (np.abs(corr) ** 2).T
    out /= noise_variance * energy
    return DelayDopplerMap(
        values=out,
        delays=grid.delays,
        dopplers=grid.dopplers,
        params=p,
        periodic=grid.periodic,
        method="glrt",
    )


def glrt_map_direct(y, s, noise_variance: float, delays, dopplers, params: OtfsParams) -> np.ndarray:
    """Cell-by-cell evaluation of :func:`glrt_statistic`; reference for the fast map."""
    out = np.empty((len(delays), len(dopplers)))
    for i, tau in enumerate(delays):
        for j, nu in enumerate(dopplers):
            out[i, j] = glrt_statistic(y, s, noise_variance, tau, nu, params)
    return out


def refine_peak(y, s, noise_variance, delay, doppler, grid: DetectionGrid, os: int = 4):
    """Sub-bin (delay, Doppler) estimate around a detected cell.

    Evaluates the statistic on a local grid ``os`` times finer than ``grid``
    spanning one coarse bin either side, then applies 3-point parabolic
    interpolation on log-values per axis at the local maximum.
    """
    from .cfar import parabolic_offset

    p = grid.params
    energy = _check_s(s)
    dt = grid.delay_step / os
    dn = grid.doppler_step / os
    k = np.arange(-os, os + 1)
    taus = delay + k * dt
    nus = doppler + k * dn
    S = np.fft.fft(s, norm="ortho")
    B = np.stack([S * steering_b(t, p) for t in taus])
    vals = np.empty((k.size, k.size))
    for j, nu in enumerate(nus):
        Z = np.fft.fft(np.conj(steering_c(nu, p)) * y, norm="ortho")
        vals[:, j] = np.abs(B.conj() @ Z) ** 2
    vals /= noise_variance * energy
    i, j = np.unravel_index(np.argmax(vals), vals.shape)
    di = parabolic_offset(vals[i - 1, j], vals[i, j], vals[i + 1, j]) if 0 < i < k.size - 1 else 0.0
    dj = parabolic_offset(vals[i, j - 1], vals[i, j], vals[i, j + 1]) if 0 < j < k.size - 1 else 0.0
    return taus[i] + di * dt, nus[j] + dj * dn
