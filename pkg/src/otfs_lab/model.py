"""Kronecker-structured steering vectors and the discrete receive model.

Frequency sample ``n`` (``n = 0..NM-1``) sits at ``n df / M`` and time sample
``l`` at ``l T / N``.  The frequency-domain vector ``b`` and the temporal vector
``c`` factor into a standard OFDM-radar part (``b_N``, ``c_M``) and the ISI/ICI
part (``b_M``, ``c_N``).
"""

from __future__ import annotations

import numpy as np

from .channel import RxSignal, TargetSet, complex_noise
from .modem import DelayDopplerFrame, heisenberg_samples
from .params import OtfsParams


def _ramp(count: int, step_turns, sign: int) -> np.ndarray:
    """``exp(sign j 2 pi k step)`` for ``k < count``.

    Phases can reach thousands of turns, so the product is formed and reduced
    modulo one in extended precision before the float64 exponential.
    """
    k = np.arange(count, dtype=np.longdouble)
    turns = np.mod(k * np.longdouble(step_turns), 1).astype(float)
    return np.exp(sign * 2j * np.pi * turns)


def _ld(x) -> np.longdouble:
    return np.longdouble(x)


def steering_b_N(delay, params: OtfsParams) -> np.ndarray:
    return _ramp(params.N, _ld(params.subcarrier_spacing) * _ld(delay), -1)


def steering_b_M(delay, params: OtfsParams) -> np.ndarray:
    return _ramp(params.M, _ld(params.subcarrier_spacing) * _ld(delay) / params.M, -1)


def steering_c_M(doppler, params: OtfsParams) -> np.ndarray:
    return _ramp(params.M, _ld(doppler) / _ld(params.subcarrier_spacing), 1)


def steering_c_N(doppler, params: OtfsParams) -> np.ndarray:
    return _ramp(params.N, _ld(doppler) / (_ld(params.subcarrier_spacing) * params.N), 1)


def steering_b(delay: float, params: OtfsParams) -> np.ndarray:
    """Frequency-domain steering vector, ``b_N (x) b_M`` in flat form."""
    return _ramp(params.NM, _ld(params.subcarrier_spacing) * _ld(delay) / params.M, -1)


def steering_c(doppler: float, params: OtfsParams) -> np.ndarray:
    """Temporal steering vector, ``c_M (x) c_N`` in flat form."""
    return _ramp(params.NM, _ld(doppler) / (_ld(params.subcarrier_spacing) * params.N), 1)


def delay_doppler_template(s: np.ndarray, delay: float, doppler: float, params: OtfsParams) -> np.ndarray:
    """``C(doppler) F^H B(delay) F s`` for a unit-gain target."""
    shifted = np.fft.ifft(np.fft.fft(s, norm="ortho") * steering_b(delay, params), norm="ortho")
    return shifted * steering_c(doppler, params)


def model_rx(
    frame: DelayDopplerFrame,
    targets: TargetSet,
    noise_variance: float,
    seed=None,
) -> RxSignal:
    """Receive samples from the Kronecker-structured discrete model."""
    targets.check()
    p = frame.params
    s = heisenberg_samples(frame)
    y = np.zeros(p.NM, dtype=complex)
    for tap in targets:
        y += tap.gain * delay_doppler_template(s, tap.delay, tap.doppler, p)
    y += complex_noise(p.NM, noise_variance, seed)
    return RxSignal(y, p, seed)
