"""Cell-averaging CFAR, local-maximum peak extraction and truth association."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .channel import TargetSet
from .maps import DelayDopplerMap
from .params import derive_limits


@dataclass(frozen=True)
class CfarConfig:
    """2-D CA-CFAR window; ``guard`` and ``training`` are (delay, Doppler) half-widths."""

    p_fa: float = 1e-4
    guard: tuple[int, int] = (2, 2)
    training: tuple[int, int] = (4, 4)

    def __post_init__(self):
        if not 0 < self.p_fa < 1:
            raise ValueError(f"p_fa must be in (0, 1), got {self.p_fa}")
        object.__setattr__(self, "guard", tuple(int(g) for g in self.guard))
        object.__setattr__(self, "training", tuple(int(t) for t in self.training))
        if min(self.guard) < 0 or min(self.training) < 0:
            raise ValueError("guard/training half-widths must be non-negative")
        if self.n_training == 0:
            raise ValueError("CFAR training band is empty")

    @property
    def n_training(self) -> int:
        outer = [2 * (g + t) + 1 for g, t in zip(self.guard, self.training)]
        inner = [2 * g + 1 for g in self.guard]
        return outer[0] * outer[1] - inner[0] * inner[1]

    @classmethod
    def from_config(cls, cfg: dict | None) -> "CfarConfig":
        cfg = dict(cfg or {})
        kw = {}
        if "p_fa" in cfg:
            kw["p_fa"] = float(cfg.pop("p_fa"))
        if "guard" in cfg:
            kw["guard"] = tuple(cfg.pop("guard"))
        if "training" in cfg:
            kw["training"] = tuple(cfg.pop("training"))
        if cfg:
            raise ValueError(f"unknown cfar field(s): {sorted(cfg)}")
        return cls(**kw)


def ca_cfar_factor(n_training, p_fa: float):
    """Threshold multiplier for exponentially distributed cells."""
    n_training = np.asarray(n_training, dtype=float)
    return n_training * (p_fa ** (-1.0 / n_training) - 1.0)


def _fit_window(config: CfarConfig, shape) -> tuple[tuple[int, int], tuple[int, int]]:
    # shrink training, then guard, so the window never exceeds an axis
    guard, train = list(config.guard), list(config.training)
    for ax, n in enumerate(shape):
        max_half = (n - 1) // 2
        excess = guard[ax] + train[ax] - max_half
        if excess > 0:
            cut = min(excess, train[ax])
            train[ax] -= cut
            guard[ax] -= excess - cut
    return tuple(guard), tuple(train)


def _box_sum(padded: np.ndarray, hd: int, hv: int, shape) -> np.ndarray:
    """Sum over a (2hd+1) x (2hv+1) box centred on every original cell."""
    sat = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1))
    sat[1:, 1:] = padded.cumsum(0).cumsum(1)
    n0, n1 = shape
    od, ov = (padded.shape[0] - n0) // 2, (padded.shape[1] - n1) // 2
    r0 = np.arange(n0) + od - hd
    c0 = np.arange(n1) + ov - hv
    r1, c1 = r0 + 2 * hd + 1, c0 + 2 * hv + 1
    return sat[r1][:, c1] - sat[r0][:, c1] - sat[r1][:, c0] + sat[r0][:, c0]


def ca_cfar(values, config: CfarConfig, periodic=(False, False)):
    """Return ``(mask, threshold)``.

    A cell is declared when it exceeds ``gamma * mean(training cells)``.  Axes
    flagged periodic wrap around; elsewhere the window is truncated at the map
    edge and ``gamma`` is recomputed for the reduced training count.
    """
    if isinstance(values, DelayDopplerMap):
        periodic = values.periodic
        values = values.values
    values = np.asarray(values, dtype=float)
    shape = values.shape
    guard, train = _fit_window(config, shape)
    outer = (guard[0] + train[0], guard[1] + train[1])
    pad_width = [(outer[0], outer[0]), (outer[1], outer[1])]

    def pad(a):
        out = a
        for ax in (0, 1):
            pw = [(0, 0), (0, 0)]
            pw[ax] = pad_width[ax]
            out = np.pad(out, pw, mode="wrap" if periodic[ax] else "constant")
        return out

    pv, pones = pad(values), pad(np.ones(shape))
    sum_out = _box_sum(pv, outer[0], outer[1], shape)
    sum_in = _box_sum(pv, guard[0], guard[1], shape)
    cnt = _box_sum(pones, outer[0], outer[1], shape) - _box_sum(pones, guard[0], guard[1], shape)
    cnt = np.rint(cnt)
    if np.any(cnt < 1):
        raise ValueError("CFAR training band is empty for some cells")
    mean = (sum_out - sum_in) / cnt
    threshold = ca_cfar_factor(cnt, config.p_fa) * mean
    return values > threshold, threshold


@dataclass(frozen=True)
class Detection:
    delay_bin: int
    doppler_bin: int
    delay: float
    doppler: float
    value: float
    refined_delay: float | None = None
    refined_doppler: float | None = None
    alpha: complex | None = None


def parabolic_offset(left: float, centre: float, right: float) -> float:
    """Vertex offset (in bins, within +-0.5) of a parabola through log-values."""
    tiny = np.finfo(float).tiny
    a, b, c = (np.log(max(v, tiny)) for v in (left, centre, right))
    den = a - 2 * b + c
    if den >= 0:
        return 0.0
    return float(np.clip(0.5 * (a - c) / den, -0.5, 0.5))


def extract_peaks(mask, dd_map: DelayDopplerMap, refine: bool = True) -> list[Detection]:
    """Cells passing CFAR that are strict maxima of their 3x3 neighbourhood."""
    values = dd_map.values
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != values.shape:
        raise ValueError("mask and map shapes differ")
    if not mask.any():
        return []
    padded = values
    for ax in (0, 1):
        pw = [(0, 0), (0, 0)]
        pw[ax] = (1, 1)
        if dd_map.periodic[ax] and values.shape[ax] > 2:
            padded = np.pad(padded, pw, mode="wrap")
        else:
            padded = np.pad(padded, pw, mode="constant", constant_values=-np.inf)
    n0, n1 = values.shape
    is_max = np.ones_like(mask)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            is_max &= values > padded[1 + di : 1 + di + n0, 1 + dj : 1 + dj + n1]
    dets = []
    for i, j in zip(*np.nonzero(mask & is_max)):
        fd = fv = 0.0
        if refine:
            fd = _axis_offset(values[:, j], i, dd_map.periodic[0])
            fv = _axis_offset(values[i, :], j, dd_map.periodic[1])
        dets.append(
            Detection(
                delay_bin=int(i),
                doppler_bin=int(j),
                delay=float(dd_map.delays[i]),
                doppler=float(dd_map.dopplers[j]),
                value=float(values[i, j]),
                refined_delay=float(dd_map.delays[i] + fd * dd_map.delay_step),
                refined_doppler=float(dd_map.dopplers[j] + fv * dd_map.doppler_step),
            )
        )
    dets.sort(key=lambda d: -d.value)
    return dets


def _axis_offset(line: np.ndarray, k: int, periodic: bool) -> float:
    n = line.size
    if n < 3:
        return 0.0
    if periodic:
        return parabolic_offset(line[(k - 1) % n], line[k], line[(k + 1) % n])
    if 0 < k < n - 1:
        return parabolic_offset(line[k - 1], line[k], line[k + 1])
    return 0.0


@dataclass
class DetectionReport:
    """Outcome of one trial.

    ``matches[k]`` is the index into ``detections`` matched to target ``k`` or
    ``None`` for a miss; every unmatched detection is a false alarm.
    """

    detections: list[Detection]
    matches: list[int | None]
    false_alarm_count: int
    mode: str = "unambiguous"
    truth_ranges: list[float] = field(default_factory=list)
    truth_velocities: list[float] = field(default_factory=list)
    method: str = ""
    seed: object = None

    @property
    def n_matched(self) -> int:
        return sum(m is not None for m in self.matches)

    def matched_detection(self, k: int) -> Detection | None:
        idx = self.matches[k]
        return None if idx is None else self.detections[idx]

    def to_record(self) -> dict:
        def det(d: Detection):
            rec = asdict(d)
            if d.alpha is not None:
                rec["alpha"] = [d.alpha.real, d.alpha.imag]
            return rec

        return {
            "method": self.method,
            "seed": self.seed,
            "mode": self.mode,
            "detections": [det(d) for d in self.detections],
            "matches": self.matches,
            "false_alarm_count": self.false_alarm_count,
            "truth_ranges": list(self.truth_ranges),
            "truth_velocities": list(self.truth_velocities),
        }

    def to_json_line(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)


def fold_truth(ranges, velocities, params):
    """Wrap true positions into the standard (OFDM) ambiguity intervals."""
    r_amb = params.delay_to_range(params.symbol_duration)
    v_max = params.doppler_to_velocity(0.5 / params.symbol_duration)
    r = np.mod(np.asarray(ranges, dtype=float), r_amb)
    v = np.mod(np.asarray(velocities, dtype=float) + v_max, 2 * v_max) - v_max
    return r, v


def associate(detections: list[Detection], targets: TargetSet, mode: str = "unambiguous") -> DetectionReport:
    """Greedy one-to-one matching within one resolution cell per axis.

    Detections are visited in decreasing statistic order; each takes the
    nearest (normalised distance) still-unmatched target inside its gate.  In
    folded mode a target already inside the standard interval is preferred
    over an aliased one occupying the same cell.
    """
    if mode not in ("unambiguous", "folded"):
        raise ValueError(f"unknown association mode {mode!r}")
    p = targets.params
    lim = derive_limits(p)
    ranges, vels = targets.ranges, targets.velocities
    aliased = np.zeros(len(targets), dtype=bool)
    if mode == "folded":
        fr, fv = fold_truth(ranges, vels, p)
        aliased = (np.abs(fr - ranges) > 1e-9) | (np.abs(fv - vels) > 1e-9)
        ranges, vels = fr, fv
    matches: list[int | None] = [None] * len(targets)
    order = sorted(range(len(detections)), key=lambda i: -detections[i].value)
    matched_dets = set()
    for i in order:
        d = detections[i]
        r_hat = p.delay_to_range(d.delay)
        v_hat = p.doppler_to_velocity(d.doppler)
        best, best_dist = None, np.inf
        for k in range(len(targets)):
            if matches[k] is not None:
                continue
            dr = abs(r_hat - ranges[k]) / lim.range_resolution
            dv = abs(v_hat - vels[k]) / lim.velocity_resolution
            if dr <= 1 and dv <= 1:
                dist = np.hypot(dr, dv) + (10.0 if aliased[k] else 0.0)
                if dist < best_dist:
                    best, best_dist = k, dist
        if best is not None:
            matches[best] = i
            matched_dets.add(i)
    return DetectionReport(
        detections=list(detections),
        matches=matches,
        false_alarm_count=len(detections) - len(matched_dets),
        mode=mode,
        truth_ranges=[float(r) for r in ranges],
        truth_velocities=[float(v) for v in vels],
    )
