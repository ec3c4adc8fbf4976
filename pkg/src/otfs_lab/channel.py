"""Point-target radar channel and the continuous-time receive-signal oracle."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .modem import DelayDopplerFrame, evaluate_tx_cp, shifted_tx_samples
from .params import OtfsParams


class PreconditionError(ValueError):
    """A target violates the CP assumption or another model precondition."""


@dataclass(frozen=True)
class Target:
    gain: complex
    delay: float
    doppler: float


@dataclass(frozen=True)
class TargetSet:
    """Channel taps ``(gain, delay, doppler)``; an empty set is the H0 scene."""

    params: OtfsParams
    taps: tuple[Target, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "taps", tuple(self.taps))

    def __len__(self):
        return len(self.taps)

    def __iter__(self):
        return iter(self.taps)

    @property
    def gains(self) -> np.ndarray:
        return np.array([t.gain for t in self.taps], dtype=complex)

    @property
    def delays(self) -> np.ndarray:
        return np.array([t.delay for t in self.taps], dtype=float)

    @property
    def dopplers(self) -> np.ndarray:
        return np.array([t.doppler for t in self.taps], dtype=float)

    @property
    def ranges(self) -> np.ndarray:
        return self.params.delay_to_range(self.delays)

    @property
    def velocities(self) -> np.ndarray:
        return self.params.doppler_to_velocity(self.dopplers)

    def snr_db(self, noise_variance: float | None = None) -> np.ndarray:
        nv = self.params.noise_variance if noise_variance is None else noise_variance
        return 10 * np.log10(np.abs(self.gains) ** 2 / nv)

    def check(self) -> None:
        tcp = self.params.cp_duration
        tol = 1e-12 * max(tcp, self.params.sample_period)
        for k, tap in enumerate(self.taps):
            if tap.delay < -tol or tap.delay > tcp + tol:
                raise PreconditionError(
                    f"target {k}: delay {tap.delay:.6g} s outside [0, T_cp={tcp:.6g} s]"
                )

    @classmethod
    def from_physical(
        cls,
        params: OtfsParams,
        ranges: Sequence[float],
        velocities: Sequence[float],
        gains: Iterable[complex],
    ) -> "TargetSet":
        taps = [
            Target(complex(a), float(params.range_to_delay(r)), float(params.velocity_to_doppler(v)))
            for r, v, a in zip(ranges, velocities, gains)
        ]
        return cls(params, taps)

    @classmethod
    def from_config(cls, params: OtfsParams, entries: list[dict], rng=None) -> "TargetSet":
        """Build from ``{range_m|delay_s, velocity_mps|doppler_hz, snr_db|gain_complex}`` records.

        ``gain_complex`` is ``[re, im]``; with ``snr_db`` the phase is drawn from ``rng``.
        """
        rng = np.random.default_rng(rng)
        taps = []
        for k, e in enumerate(entries):
            if "delay_s" in e:
                delay = float(e["delay_s"])
            elif "range_m" in e:
                delay = float(params.range_to_delay(float(e["range_m"])))
            else:
                raise ValueError(f"target {k}: needs range_m or delay_s")
            if "doppler_hz" in e:
                doppler = float(e["doppler_hz"])
            elif "velocity_mps" in e:
                doppler = float(params.velocity_to_doppler(float(e["velocity_mps"])))
            else:
                raise ValueError(f"target {k}: needs velocity_mps or doppler_hz")
            if "gain_complex" in e:
                re, im = e["gain_complex"]
                gain = complex(re, im)
            elif "snr_db" in e:
                gain = snr_to_gain(float(e["snr_db"]), params.noise_variance, rng)
            else:
                raise ValueError(f"target {k}: needs snr_db or gain_complex")
            taps.append(Target(gain, delay, doppler))
        return cls(params, taps)


@dataclass(frozen=True)
class RxSignal:
    samples: np.ndarray
    params: OtfsParams
    noise_seed: object = None

    def __post_init__(self):
        if self.samples.shape != (self.params.NM,):
            raise ValueError(f"expected {self.params.NM} samples, got shape {self.samples.shape}")


def snr_to_gain(snr_db: float, noise_variance: float, seed=None) -> complex:
    """Complex gain with ``|a|^2 = noise_variance * 10**(snr_db/10)`` and uniform phase."""
    rng = np.random.default_rng(seed)
    phase = rng.uniform(0.0, 2 * np.pi)
    return complex(np.sqrt(noise_variance * 10 ** (snr_db / 10)) * np.exp(1j * phase))


def complex_noise(n: int, noise_variance: float, seed=None) -> np.ndarray:
    """i.i.d. circularly-symmetric complex Gaussian samples of the given variance."""
    rng = np.random.default_rng(seed)
    if noise_variance == 0:
        return np.zeros(n, dtype=complex)
    return np.sqrt(noise_variance / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def echo(frame: DelayDopplerFrame, delay: float, doppler: float, direct: bool = False) -> np.ndarray:
    """Noise-free unit-gain echo ``s_CP(lT/N - delay) exp(j 2 pi doppler lT/N)`` after CP removal."""
    p = frame.params
    t = np.arange(p.NM) * p.sample_period
    if direct:
        tx = evaluate_tx_cp(t - delay, frame)
    else:
        tx = shifted_tx_samples(frame, delay)
    return tx * np.exp(2j * np.pi * doppler * t)


def synthesize_rx(
    frame: DelayDopplerFrame,
    targets: TargetSet,
    noise_variance: float,
    seed=None,
    direct: bool = False,
) -> RxSignal:
    """Sampled backscatter over ``[0, MT)`` from the continuous-time channel.

    ``direct=True`` evaluates every instant through :func:`evaluate_tx_cp`
    (slow, used for verification).
    """
    targets.check()
    p = frame.params
    y = np.zeros(p.NM, dtype=complex)
    for tap in targets:
        y += tap.gain * echo(frame, tap.delay, tap.doppler, direct=direct)
    y += complex_noise(p.NM, noise_variance, seed)
    return RxSignal(y, p, seed)
