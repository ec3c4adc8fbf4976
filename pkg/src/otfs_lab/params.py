"""OTFS numerology, unit conversions and resolution/ambiguity limits."""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path

SPEED_OF_LIGHT = 299_792_458.0

PRESETS = ("isi-regime", "ici-regime")

_CONFIG_KEYS = {
    "carrier_hz",
    "subcarrier_spacing_hz",
    "n_subcarriers",
    "n_symbols",
    "cp_duration_s",
    "noise_variance",
}


class InvalidParameterError(ValueError):
    """Raised when a parameter set or config file is not usable."""


@dataclass(frozen=True)
class OtfsParams:
    """Carrier and grid configuration of a single-CP OTFS frame.

    The symbol duration is always derived as ``1 / subcarrier_spacing`` so that
    ``T * df == 1`` holds by construction.
    """

    n_subcarriers: int
    n_symbols: int
    subcarrier_spacing: float
    cp_duration: float
    carrier_frequency: float
    noise_variance: float = 1.0
    propagation_speed: float = SPEED_OF_LIGHT

    def __post_init__(self):
        for name in ("n_subcarriers", "n_symbols"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value <= 0:
                raise InvalidParameterError(f"{name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        for name in ("subcarrier_spacing", "carrier_frequency", "propagation_speed"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"{name} must be positive, got {getattr(self, name)!r}")
        if not self.cp_duration >= 0:
            raise InvalidParameterError(f"cp_duration must be >= 0, got {self.cp_duration!r}")
        if not self.noise_variance >= 0:
            raise InvalidParameterError(f"noise_variance must be >= 0, got {self.noise_variance!r}")

    # shorthand used throughout the signal-processing code
    @property
    def N(self) -> int:
        return self.n_subcarriers

    @property
    def M(self) -> int:
        return self.n_symbols

    @property
    def NM(self) -> int:
        return self.n_subcarriers * self.n_symbols

    @property
    def symbol_duration(self) -> float:
        return 1.0 / self.subcarrier_spacing

    @property
    def sample_period(self) -> float:
        return self.symbol_duration / self.n_subcarriers

    @property
    def bandwidth(self) -> float:
        return self.n_subcarriers * self.subcarrier_spacing

    @property
    def frame_duration(self) -> float:
        """``M*T + T_cp``."""
        return self.n_symbols * self.symbol_duration + self.cp_duration

    @property
    def wavelength(self) -> float:
        return self.propagation_speed / self.carrier_frequency

    @property
    def doppler_resolution(self) -> float:
        return 1.0 / (self.n_symbols * self.symbol_duration)

    def delay_to_range(self, delay):
        return delay_to_range(delay, self.propagation_speed)

    def range_to_delay(self, rng):
        return range_to_delay(rng, self.propagation_speed)

    def doppler_to_velocity(self, doppler):
        return doppler_to_velocity(doppler, self.wavelength)

    def velocity_to_doppler(self, velocity):
        return velocity_to_doppler(velocity, self.wavelength)

    def to_config(self) -> dict:
        return {
            "carrier_hz": self.carrier_frequency,
            "subcarrier_spacing_hz": self.subcarrier_spacing,
            "n_subcarriers": self.n_subcarriers,
            "n_symbols": self.n_symbols,
            "cp_duration_s": self.cp_duration,
            "noise_variance": self.noise_variance,
        }

    @classmethod
    def from_config(cls, cfg: dict) -> "OtfsParams":
        if not isinstance(cfg, dict):
            raise InvalidParameterError("parameter config must be a JSON object")
        unknown = set(cfg) - _CONFIG_KEYS
        if unknown:
            raise InvalidParameterError(f"unknown parameter field(s): {sorted(unknown)}")
        missing = _CONFIG_KEYS - {"noise_variance"} - set(cfg)
        if missing:
            raise InvalidParameterError(f"missing parameter field(s): {sorted(missing)}")
        try:
            return cls(
                n_subcarriers=cfg["n_subcarriers"],
                n_symbols=cfg["n_symbols"],
                subcarrier_spacing=float(cfg["subcarrier_spacing_hz"]),
                cp_duration=float(cfg["cp_duration_s"]),
                carrier_frequency=float(cfg["carrier_hz"]),
                noise_variance=float(cfg.get("noise_variance", 1.0)),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InvalidParameterError):
                raise
            raise InvalidParameterError(str(exc)) from exc


@dataclass(frozen=True)
class ResolutionLimits:
    """Resolutions and unambiguous intervals with and without ISI/ICI.

    Velocity maxima are one-sided magnitudes of the two-sided interval, i.e. the
    standard interval is ``[-v_max, v_max)``.
    """

    range_resolution: float
    velocity_resolution: float
    tau_max: float
    tau_max_isi: float
    nu_max: float
    nu_max_ici: float
    r_max: float
    r_max_isi: float
    v_max: float
    v_max_ici: float

    @property
    def isi_range_gain(self) -> float:
        # both limits are short rational multiples of T; drop decimal-to-binary noise
        if self.tau_max <= 0:
            return float("nan")
        return float(Fraction(self.tau_max_isi / self.tau_max).limit_denominator(1_000_000))

    @property
    def ici_velocity_gain(self) -> float:
        return float(Fraction(self.nu_max_ici / self.nu_max).limit_denominator(1_000_000))


def delay_to_range(delay, c=SPEED_OF_LIGHT):
    return c * delay / 2.0


def range_to_delay(rng, c=SPEED_OF_LIGHT):
    return 2.0 * rng / c


def doppler_to_velocity(doppler, wavelength):
    return wavelength * doppler / 2.0


def velocity_to_doppler(velocity, wavelength):
    return 2.0 * velocity / wavelength


def derive_limits(params: OtfsParams) -> ResolutionLimits:
    df = params.subcarrier_spacing
    T = params.symbol_duration
    tau_max_isi = min(params.M / df, params.cp_duration)
    tau_max = min(1.0 / df, params.cp_duration)
    nu_max_ici = params.N / T
    nu_max = 1.0 / T
    lam = params.wavelength
    c = params.propagation_speed
    return ResolutionLimits(
        range_resolution=c / (2.0 * params.N * df),
        velocity_resolution=lam / (2.0 * params.M * T),
        tau_max=tau_max,
        tau_max_isi=tau_max_isi,
        nu_max=nu_max,
        nu_max_ici=nu_max_ici,
        r_max=delay_to_range(tau_max, c),
        r_max_isi=delay_to_range(tau_max_isi, c),
        # two-sided interval of width nu_max -> +-lambda/(4T)
        v_max=doppler_to_velocity(nu_max / 2.0, lam),
        v_max_ici=doppler_to_velocity(nu_max_ici / 2.0, lam),
    )


def limits_table(params: OtfsParams) -> list[tuple[str, float, str]]:
    """Rows of the parameter/limits table as ``(label, value, unit)``."""
    lim = derive_limits(params)
    return [
        ("carrier_frequency", params.carrier_frequency, "Hz"),
        ("subcarrier_spacing", params.subcarrier_spacing, "Hz"),
        ("n_subcarriers", params.N, ""),
        ("bandwidth", params.bandwidth, "Hz"),
        ("symbol_duration", params.symbol_duration, "s"),
        ("cp_duration", params.cp_duration, "s"),
        ("n_symbols", params.M, ""),
        ("frame_duration", params.frame_duration, "s"),
        ("range_resolution", lim.range_resolution, "m"),
        ("max_range", lim.r_max, "m"),
        ("max_range_isi", lim.r_max_isi, "m"),
        ("velocity_resolution", lim.velocity_resolution, "m/s"),
        ("max_velocity", lim.v_max, "m/s"),
        ("max_velocity_ici", lim.v_max_ici, "m/s"),
    ]


def load_params(source) -> OtfsParams:
    """Load a parameter set from a preset name, a JSON file path or a dict."""
    if isinstance(source, OtfsParams):
        return source
    if isinstance(source, dict):
        return OtfsParams.from_config(source)
    source = str(source)
    if source in PRESETS:
        text = resources.files("otfs_lab.data.presets").joinpath(f"{source}.json").read_text()
        where = source
    else:
        path = Path(source)
        if not path.is_file():
            raise InvalidParameterError(f"params file not found: {source}")
        text = path.read_text()
        where = str(path)
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidParameterError(f"{where}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return OtfsParams.from_config(cfg)
