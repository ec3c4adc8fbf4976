"""Delay-Doppler map container shared by the GLRT and 2-D FFT receivers."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .params import OtfsParams


@dataclass(frozen=True)
class DelayDopplerMap:
    """Non-negative map indexed ``[delay_bin, doppler_bin]``.

    ``periodic`` flags which axes wrap around (used for CFAR windows and the
    local-maximum test).
    """

    values: np.ndarray
    delays: np.ndarray
    dopplers: np.ndarray
    params: OtfsParams
    periodic: tuple[bool, bool] = (False, False)
    method: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.delays), len(self.dopplers)):
            raise ValueError("map values do not match axis lengths")
        object.__setattr__(self, "values", v)

    @property
    def shape(self):
        return self.values.shape

    @property
    def ranges(self) -> np.ndarray:
        return self.params.delay_to_range(self.delays)

    @property
    def velocities(self) -> np.ndarray:
        return self.params.doppler_to_velocity(self.dopplers)

    def nearest_doppler_bin(self, doppler: float) -> int:
        return int(np.argmin(np.abs(self.dopplers - doppler)))

    def nearest_delay_bin(self, delay: float) -> int:
        return int(np.argmin(np.abs(self.delays - delay)))

    def range_profile(self, velocity: float) -> tuple[np.ndarray, np.ndarray]:
        """``(ranges, values)`` along the Doppler bin nearest to ``velocity``."""
        nu = self.params.velocity_to_doppler(velocity)
        if not self.dopplers[0] - self.doppler_step / 2 <= nu <= self.dopplers[-1] + self.doppler_step / 2:
            raise ValueError(f"velocity {velocity} m/s outside the map's Doppler extent")
        return self.ranges, self.values[:, self.nearest_doppler_bin(nu)]

    def velocity_profile(self, rng: float) -> tuple[np.ndarray, np.ndarray]:
        """``(velocities, values)`` along the delay bin nearest to ``rng``."""
        tau = self.params.range_to_delay(rng)
        if not self.delays[0] - self.delay_step / 2 <= tau <= self.delays[-1] + self.delay_step / 2:
            raise ValueError(f"range {rng} m outside the map's delay extent")
        return self.velocities, self.values[self.nearest_delay_bin(tau), :]

    @property
    def delay_step(self) -> float:
        return float(self.delays[1] - self.delays[0]) if len(self.delays) > 1 else self.params.sample_period

    @property
    def doppler_step(self) -> float:
        return (
            float(self.dopplers[1] - self.dopplers[0])
            if len(self.dopplers) > 1
            else self.params.doppler_resolution
        )

    def to_csv(self, path) -> None:
        """One row per cell: ``delay_bin,doppler_bin,value``."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["delay_bin", "doppler_bin", "value"])
            for i in range(self.values.shape[0]):
                for j in range(self.values.shape[1]):
                    w.writerow([i, j, repr(float(self.values[i, j]))])

    def to_binary(self, path) -> None:
        """Row-major little-endian float64, ``n_delay`` rows, no header."""
        np.ascontiguousarray(self.values, dtype="<f8").tofile(Path(path))


def read_map_csv(path) -> np.ndarray:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    i = rows[:, 0].astype(int)
    j = rows[:, 1].astype(int)
    out = np.zeros((i.max() + 1, j.max() + 1))
    out[i, j] = rows[:, 2]
    return out


def read_map_binary(path, n_delay: int) -> np.ndarray:
    return np.fromfile(Path(path), dtype="<f8").reshape(n_delay, -1)
