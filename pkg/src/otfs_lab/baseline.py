"""Standard 2-D FFT OFDM-radar processing applied to the single-CP OTFS return.

There is no per-symbol CP to strip, so delays of a sizeable fraction of ``T``
leak into the next symbol (ISI) and the per-symbol DFT ignores intra-symbol
Doppler (ICI).  That is the comparison point, not a defect to fix here.
"""

from __future__ import annotations

import numpy as np

from .maps import DelayDopplerMap
from .modem import DelayDopplerFrame

DIVISION_FLOOR = 1e-6


def ofdm_2dfft(y, frame: DelayDopplerFrame, noise_variance: float = 1.0) -> DelayDopplerMap:
    """Range-Doppler power map (in units of the noise variance).

    Delay bins ``p T/N`` over ``[0, 1/df)``; Doppler bins ``k/(MT)`` over
    ``[-1/(2T), 1/(2T))`` after the FFT shift.
    """
    p = frame.params
    y = np.asarray(y, dtype=complex)
    if y.shape != (p.NM,):
        raise ValueError(f"expected {p.NM} samples, got shape {y.shape}")
    if not noise_variance > 0:
        raise ValueError("noise_variance must be positive")
    # fast time down the rows, one column per symbol
    fast_slow = y.reshape(p.M, p.N).T
    Y = np.fft.fft(fast_slow, axis=0, norm="ortho")
    X = frame.x_ft
    ok = np.abs(X) >= DIVISION_FLOOR
    Z = np.zeros_like(Y)
    Z[ok] = Y[ok] / X[ok]
    rd = np.fft.ifft(Z, axis=0, norm="ortho")
    rd = np.fft.fftshift(np.fft.fft(rd, axis=1, norm="ortho"), axes=1)
    values = np.abs(rd) ** 2 / noise_variance
    k = np.arange(p.M) - p.M // 2
    return DelayDopplerMap(
        values=values,
        delays=np.arange(p.N) * p.sample_period,
        dopplers=k * p.doppler_resolution,
        params=p,
        periodic=(True, True),
        method="fft2d",
    )
