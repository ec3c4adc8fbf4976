"""Scenarios, single Monte Carlo trials and SNR sweeps.

Observations always come from the continuous-time channel
(:func:`otfs_lab.channel.synthesize_rx`), never from the discrete model the
GLRT is built on.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .baseline import ofdm_2dfft
from .cfar import CfarConfig, DetectionReport, associate, ca_cfar, extract_peaks
from .channel import TargetSet, complex_noise, synthesize_rx
from .glrt import DetectionGrid, estimate_alpha, glrt_map, refine_peak
from .maps import DelayDopplerMap
from .modem import generate_frame, heisenberg_samples
from .params import OtfsParams, load_params

METHODS = ("glrt", "fft2d")
BUILTIN = ("isi-a", "isi-b", "ici-a", "ici-b")
DEFAULT_ASSOCIATION = {"glrt": "unambiguous", "fft2d": "folded"}

_GRID_KEYS = {"os_tau", "os_nu", "doppler_bins", "max_delay_s"}


@dataclass(frozen=True)
class Scenario:
    name: str
    params: OtfsParams
    targets: tuple[dict, ...]
    reference_index: int = 1
    cfar: CfarConfig = field(default_factory=CfarConfig)
    grid: dict = field(default_factory=dict)
    rmse_axis: str = "range"
    refine_os: int = 4
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(dict(t) for t in self.targets))
        if self.targets and not 0 <= self.reference_index < len(self.targets):
            raise ValueError(f"reference_index {self.reference_index} out of range")
        if self.rmse_axis not in ("range", "velocity"):
            raise ValueError(f"rmse_axis must be 'range' or 'velocity', got {self.rmse_axis!r}")
        unknown = set(self.grid) - _GRID_KEYS
        if unknown:
            raise ValueError(f"unknown grid field(s): {sorted(unknown)}")
        # validates every delay against T_cp
        self.target_set(np.random.default_rng(0)).check()

    def detection_grid(self, os_tau=None, os_nu=None) -> DetectionGrid:
        g = self.grid
        return DetectionGrid.default(
            self.params,
            os_tau=os_tau or g.get("os_tau", 1),
            os_nu=os_nu or g.get("os_nu", 1),
            max_delay=g.get("max_delay_s"),
            doppler_bins=g.get("doppler_bins"),
        )

    def with_snr(self, index: int, snr_db: float) -> "Scenario":
        targets = [dict(t) for t in self.targets]
        targets[index].pop("gain_complex", None)
        targets[index]["snr_db"] = float(snr_db)
        return replace(self, targets=tuple(targets))

    def target_set(self, rng=None) -> TargetSet:
        return TargetSet.from_config(self.params, list(self.targets), rng)

    @classmethod
    def from_config(cls, cfg: dict) -> "Scenario":
        cfg = copy.deepcopy(cfg)
        if "params" in cfg:
            params = load_params(cfg.pop("params"))
        elif "preset" in cfg:
            params = load_params(cfg.pop("preset"))
        else:
            raise ValueError("scenario needs a 'preset' or 'params' entry")
        known = {"name", "description", "targets", "reference_index", "cfar", "grid", "rmse_axis", "refine_os"}
        unknown = set(cfg) - known
        if unknown:
            raise ValueError(f"unknown scenario field(s): {sorted(unknown)}")
        return cls(
            name=cfg.get("name", "scenario"),
            params=params,
            targets=tuple(cfg.get("targets", [])),
            reference_index=int(cfg.get("reference_index", 1)),
            cfar=CfarConfig.from_config(cfg.get("cfar")),
            grid=dict(cfg.get("grid", {})),
            rmse_axis=cfg.get("rmse_axis", "range"),
            refine_os=int(cfg.get("refine_os", 4)),
            description=cfg.get("description", ""),
        )

    def to_config(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "params": self.params.to_config(),
            "targets": [dict(t) for t in self.targets],
            "reference_index": self.reference_index,
            "cfar": {"p_fa": self.cfar.p_fa, "guard": list(self.cfar.guard), "training": list(self.cfar.training)},
            "grid": dict(self.grid),
            "rmse_axis": self.rmse_axis,
            "refine_os": self.refine_os,
        }


def load_scenario(source) -> Scenario:
    """Scenario from a built-in name, a JSON file path or a dict."""
    if isinstance(source, Scenario):
        return source
    if isinstance(source, dict):
        return Scenario.from_config(source)
    source = str(source)
    if source in BUILTIN:
        text = resources.files("otfs_lab.data.scenarios").joinpath(f"{source}.json").read_text()
    else:
        path = Path(source)
        if not path.is_file():
            raise ValueError(f"scenario file not found: {source}")
        text = path.read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return Scenario.from_config(cfg)


def builtin_scenarios() -> list[Scenario]:
    return [load_scenario(name) for name in BUILTIN]


# -- single trial -------------------------------------------------------------


@dataclass
class TrialData:
    frame: object
    targets: TargetSet
    y: np.ndarray
    s: np.ndarray


def _seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def simulate(scenario: Scenario, seed, noise: bool = True) -> TrialData:
    """Fresh frame, target gains and receiver noise, all derived from ``seed``."""
    frame_ss, gain_ss, noise_ss = _seed_sequence(seed).spawn(3)
    p = scenario.params
    frame = generate_frame(p, np.random.default_rng(frame_ss))
    targets = scenario.target_set(np.random.default_rng(gain_ss))
    sigma2 = p.noise_variance if noise else 0.0
    rx = synthesize_rx(frame, targets, sigma2, np.random.default_rng(noise_ss))
    return TrialData(frame, targets, rx.samples, heisenberg_samples(frame))


def receiver_map(scenario: Scenario, data: TrialData, method: str) -> DelayDopplerMap:
    sigma2 = scenario.params.noise_variance
    if method == "glrt":
        return glrt_map(data.y, data.s, sigma2, scenario.detection_grid())
    if method == "fft2d":
        return ofdm_2dfft(data.y, data.frame, sigma2)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def detect(scenario: Scenario, data: TrialData, method: str, dd_map: DelayDopplerMap | None = None):
    """CFAR + peak extraction, with GLRT detections refined on a finer local grid."""
    if dd_map is None:
        dd_map = receiver_map(scenario, data, method)
    mask, _ = ca_cfar(dd_map, scenario.cfar)
    dets = extract_peaks(mask, dd_map)
    if method == "glrt" and scenario.refine_os > 1:
        grid = scenario.detection_grid()
        sigma2 = scenario.params.noise_variance
        refined = []
        for d in dets:
            tau, nu = refine_peak(data.y, data.s, sigma2, d.delay, d.doppler, grid, scenario.refine_os)
            alpha = estimate_alpha(data.y, data.s, tau, nu, scenario.params)
            refined.append(replace(d, refined_delay=float(tau), refined_doppler=float(nu), alpha=alpha))
        dets = refined
    return dets


def run_trial(
    scenario,
    method: str,
    seed,
    association: str | None = None,
    noise: bool = True,
) -> DetectionReport:
    """One complete simulate -> map -> CFAR -> peaks -> association pass."""
    scenario = load_scenario(scenario)
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    association = association or DEFAULT_ASSOCIATION[method]
    data = simulate(scenario, seed, noise=noise)
    dets = detect(scenario, data, method)
    report = associate(dets, data.targets, association)
    report.method = method
    report.seed = _seed_repr(seed)
    return report


def _seed_repr(seed):
    if isinstance(seed, np.random.SeedSequence):
        return {"entropy": seed.entropy, "spawn_key": list(seed.spawn_key)}
    return seed


# -- sweeps -------------------------------------------------------------------


@dataclass(frozen=True)
class MetricsRow:
    snr_db: float
    pd: float
    mean_fa: float
    rmse: float | None
    n_trials: int
    n_detected: int = 0


def trial_seed(root_seed: int, snr_index: int, trial: int) -> np.random.SeedSequence:
    """Counter-based seed so serial and parallel runs see identical randomness."""
    return np.random.SeedSequence(entropy=root_seed, spawn_key=(snr_index, trial))


def reference_error(report: DetectionReport, scenario: Scenario, k: int | None = None) -> float | None:
    """Estimation error of target ``k`` (default reference) in metres or m/s, or None if missed."""
    k = scenario.reference_index if k is None else k
    det = report.matched_detection(k)
    if det is None:
        return None
    p = scenario.params
    if scenario.rmse_axis == "range":
        est = det.refined_delay if det.refined_delay is not None else det.delay
        return float(p.delay_to_range(est) - report.truth_ranges[k])
    est = det.refined_doppler if det.refined_doppler is not None else det.doppler
    return float(p.doppler_to_velocity(est) - report.truth_velocities[k])


def _sweep_job(args):
    scenario, method, snr_index, snr_db, trial, root_seed, association = args
    sc = scenario.with_snr(scenario.reference_index, snr_db)
    rep = run_trial(sc, method, trial_seed(root_seed, snr_index, trial), association)
    return snr_index, trial, rep.matches[sc.reference_index] is not None, rep.false_alarm_count, reference_error(rep, sc)


def _n_workers(workers):
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("OTFS_LAB_THREADS")
    return max(1, int(env)) if env else 1


def aggregate(snr_db: float, outcomes) -> MetricsRow:
    outcomes = list(outcomes)
    n = len(outcomes)
    hits = [o for o in outcomes if o[0]]
    errs = [o[2] for o in hits if o[2] is not None]
    rmse = math.sqrt(sum(e * e for e in errs) / len(errs)) if errs else None
    return MetricsRow(
        snr_db=float(snr_db),
        pd=len(hits) / n,
        mean_fa=sum(o[1] for o in outcomes) / n,
        rmse=rmse,
        n_trials=n,
        n_detected=len(hits),
    )


def run_sweep(
    scenario,
    method: str,
    snr_grid_db,
    n_trials: int,
    root_seed: int = 0,
    association: str | None = None,
    workers: int | None = None,
) -> list[MetricsRow]:
    """Monte Carlo sweep over the reference target's SNR.

    Trial ``(i, t)`` always uses :func:`trial_seed` ``(root_seed, i, t)``, so the
    GLRT and FFT receivers see the same frames and noise and results do not
    depend on the worker count.
    """
    scenario = load_scenario(scenario)
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    jobs = [
        (scenario, method, i, float(snr), t, root_seed, association)
        for i, snr in enumerate(snr_grid_db)
        for t in range(n_trials)
    ]
    n_workers = _n_workers(workers)
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_sweep_job, jobs, chunksize=max(1, len(jobs) // (4 * n_workers))))
    else:
        results = [_sweep_job(j) for j in jobs]
    by_snr: dict[int, list] = {}
    for i, t, hit, fa, err in sorted(results, key=lambda r: (r[0], r[1])):
        by_snr.setdefault(i, []).append((hit, fa, err))
    return [aggregate(snr, by_snr[i]) for i, snr in enumerate(snr_grid_db)]


METRICS_HEADER = ["snr_db", "pd", "mean_fa", "rmse", "n_trials"]


def metrics_csv_text(rows: list[MetricsRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_HEADER)
    for r in rows:
        rmse = "" if r.rmse is None else f"{r.rmse:.6g}"
        w.writerow([f"{r.snr_db:g}", f"{r.pd:.6g}", f"{r.mean_fa:.6g}", rmse, r.n_trials])
    return buf.getvalue()


def write_metrics_csv(rows: list[MetricsRow], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(metrics_csv_text(rows))


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n == 0:
        return 0.0, 1.0
    ph = k / n
    den = 1 + z * z / n
    centre = (ph + z * z / (2 * n)) / den
    half = z * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / den
    lo = 0.0 if k == 0 else max(0.0, centre - half)
    hi = 1.0 if k == n else min(1.0, centre + half)
    return lo, hi


def calibrate_cfar(
    params,
    p_fa: float,
    n_cells: int,
    seed=0,
    cfar: CfarConfig | None = None,
    doppler_bins: int | None = None,
) -> dict:
    """Empirical per-cell false-alarm rate of CA-CFAR on noise-only GLRT maps."""
    params = load_params(params)
    cfar = replace(cfar or CfarConfig(), p_fa=p_fa)
    grid = DetectionGrid.default(params, doppler_bins=doppler_bins)
    root = _seed_sequence(seed)
    n_false = n_seen = n_maps = 0
    while n_seen < n_cells:
        frame_ss, noise_ss = root.spawn(2)
        frame = generate_frame(params, np.random.default_rng(frame_ss))
        y = complex_noise(params.NM, params.noise_variance, np.random.default_rng(noise_ss))
        dd_map = glrt_map(y, heisenberg_samples(frame), params.noise_variance, grid)
        mask, _ = ca_cfar(dd_map, cfar)
        n_false += int(mask.sum())
        n_seen += mask.size
        n_maps += 1
    lo, hi = wilson_interval(n_false, n_seen)
    return {
        "p_fa": p_fa,
        "n_cells": n_seen,
        "n_maps": n_maps,
        "n_false_alarms": n_false,
        "empirical_rate": n_false / n_seen,
        "wilson_low": lo,
        "wilson_high": hi,
        "n_training": cfar.n_training,
    }
