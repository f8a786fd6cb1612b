"""Simulation runs, Monte-Carlo sweeps, presets and CSV output.

Seeds
-----
A sweep cell's seed is derived from ``(master_seed, point_index,
trial_index)`` with :class:`numpy.random.SeedSequence` spawn keys, so every
cell is reproducible on its own and results do not depend on execution order
or worker count. Parameters that only affect symbol detection (``alpha``,
``use_mlsd``) reuse the captures of point 0 for every point, the way an
offline receiver re-processes one stored waveform.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .channel import LinkConfig
from .exceptions import AliasingError, DivergenceError, SyncError
from .framing import FrameLayout
from .link import DspConfig, detect, simulate_frame
from .metrics import BerReport, count_ber, fec_verdicts, net_rate
from .framing import demap_pam4

# Emulated received power: OSNR (dB, 0.1 nm) = ROP (dBm) + offset.
ROP_OSNR_OFFSET_DB = 40.0

CSV_COLUMNS = ("param", "trial_seed", "ber", "kp4", "hd7", "hd20")
DETECTION_PARAMS = frozenset({"alpha", "use_mlsd"})
PSEUDO_PARAMS = frozenset({"rop_dbm"})

_RUN_ERRORS = (SyncError, DivergenceError, AliasingError, ValueError, FloatingPointError)


def emulated_osnr_db(rop_dbm: float, offset_db: float = ROP_OSNR_OFFSET_DB) -> float:
    return rop_dbm + offset_db


def emulated_rop_dbm(osnr_db: float, offset_db: float = ROP_OSNR_OFFSET_DB) -> float:
    return osnr_db - offset_db


def derive_seed(master_seed: int, *key: int) -> int:
    """Stable 63-bit seed for a spawn key below ``master_seed``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    hi, lo = ss.generate_state(2, dtype=np.uint32)
    return int((int(hi) << 32 | int(lo)) & (2**63 - 1))


@dataclass(frozen=True)
class SimConfig:
    link: LinkConfig = field(default_factory=LinkConfig)
    dsp: DspConfig = field(default_factory=DspConfig)
    layout: FrameLayout = field(default_factory=FrameLayout)
    n_frames: int = 5

    def __post_init__(self):
        if self.n_frames < 1:
            raise ValueError("n_frames must be >= 1")

    def with_param(self, name: str, value) -> "SimConfig":
        if name == "rop_dbm":
            return replace(self, link=self.link.replace(osnr_db=emulated_osnr_db(float(value))))
        if name in _field_names(LinkConfig):
            return replace(self, link=self.link.replace(**{name: value}))
        if name in _field_names(DspConfig):
            return replace(self, dsp=self.dsp.replace(**{name: value}))
        if name in _field_names(FrameLayout):
            return replace(self, layout=replace(self.layout, **{name: value}))
        if name == "n_frames":
            return replace(self, n_frames=int(value))
        raise ValueError(f"unknown parameter {name!r}")

    def to_dict(self) -> dict:
        return {
            "link": self.link.to_dict(),
            "dsp": self.dsp.to_dict(),
            "frame": {f.name: getattr(self.layout, f.name) for f in fields(FrameLayout)},
            "n_frames": self.n_frames,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        unknown = set(d) - {"link", "dsp", "frame", "n_frames", "sweep", "master_seed"}
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")
        frame = d.get("frame", {})
        bad = set(frame) - _field_names(FrameLayout)
        if bad:
            raise ValueError(f"unknown frame fields: {sorted(bad)}")
        return cls(
            LinkConfig.from_dict(d.get("link", {})),
            DspConfig.from_dict(d.get("dsp", {})),
            FrameLayout(**frame),
            int(d.get("n_frames", 5)),
        )


def _field_names(cls) -> set:
    return {f.name for f in fields(cls)}


def sweepable_params() -> set:
    return (_field_names(LinkConfig) | _field_names(DspConfig) | _field_names(FrameLayout)
            | PSEUDO_PARAMS | {"n_frames"})


@dataclass
class RunFailure:
    """A run that stopped on a module error."""

    seed: int
    error_type: str
    message: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def ber(self) -> float:
        return float("nan")

    @property
    def verdicts(self) -> dict:
        return {name: False for name in fec_verdicts(0.0)}


def _frame_seeds(seed: int, n_frames: int):
    return [derive_seed(seed, i) for i in range(n_frames)]


def _simulate_frames(config: SimConfig, seed: int):
    return [simulate_frame(config.link, config.layout, config.dsp, fs)
            for fs in _frame_seeds(seed, config.n_frames)]


def _report(frames, config: SimConfig, dsp: DspConfig, diagnostics: bool) -> BerReport:
    rate = net_rate(config.link.baud, 2, 1.2, config.layout)
    total = None
    stage_errors = {"ffe": 0, "ffe_dd": 0, "full": 0}
    per_frame = []
    for fr in frames:
        levels = detect(fr.rx.soft, dsp.alpha, dsp.use_mlsd)
        rep = count_ber(fr.tx_bits, demap_pam4(levels), rate)
        total = rep if total is None else total + rep
        if diagnostics:
            stage_errors["ffe"] += count_ber(fr.tx_bits, demap_pam4(detect(fr.rx.ffe, 0, False))).bit_errors
            if fr.rx.tracked is not None:
                stage_errors["ffe_dd"] += count_ber(
                    fr.tx_bits, demap_pam4(detect(fr.rx.tracked, 0, False))).bit_errors
            stage_errors["full"] += count_ber(
                fr.tx_bits, demap_pam4(detect(fr.rx.soft, dsp.alpha, True))).bit_errors
            per_frame.append({
                "sync_offset": fr.rx.sync_offset,
                "sync_psr": fr.rx.sync_metrics["psr"],
                "training_mse_db": fr.rx.equalizer.mse_db if fr.rx.equalizer else None,
                "dd_frozen_at": fr.rx.dd_frozen_at,
                "equalizer_taps": fr.rx.equalizer.taps if fr.rx.equalizer else None,
                "bit_errors": rep.bit_errors,
            })
    if diagnostics:
        total.diagnostics = {"frames": per_frame, "stage_errors": stage_errors}
    return total


def run_single(config: SimConfig = SimConfig(), seed: int = 0, diagnostics: bool = False,
               raise_errors: bool = False):
    """framing -> txdsp -> channel -> rxdsp -> metrics over ``config.n_frames`` frames.

    Returns a :class:`BerReport`, or a :class:`RunFailure` when a module
    error (sync failure, divergence, aliasing) stops the run.
    """
    try:
        frames = _simulate_frames(config, seed)
        return _report(frames, config, config.dsp, diagnostics)
    except _RUN_ERRORS as exc:
        if raise_errors:
            raise
        return RunFailure(int(seed), type(exc).__name__, str(exc),
                          getattr(exc, "diagnostics", {}) or {})


@dataclass(frozen=True)
class SweepSpec:
    param: Optional[str]
    values: tuple
    trials: int = 1
    base: SimConfig = field(default_factory=SimConfig)
    master_seed: int = 0
    output: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if not self.values:
            raise ValueError("sweep value list must be non-empty")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.param is None:
            if len(self.values) != 1:
                raise ValueError("a sweep without a parameter has exactly one point")
        elif self.param not in sweepable_params():
            raise ValueError(f"{self.param!r} is not a configuration field")

    def config_at(self, point: int) -> SimConfig:
        if self.param is None:
            return self.base
        return self.base.with_param(self.param, self.values[point])

    def cell_seed(self, point: int, trial: int) -> int:
        if self.param in DETECTION_PARAMS:
            point = 0
        return derive_seed(self.master_seed, point, trial)


@dataclass
class SweepCell:
    point: int
    trial: int
    value: Any
    seed: int
    outcome: Any  # BerReport or RunFailure

    @property
    def ber(self) -> float:
        return self.outcome.ber

    @property
    def failed(self) -> bool:
        return isinstance(self.outcome, RunFailure)


@dataclass
class SweepPoint:
    value: Any
    mean_ber: float
    min_ber: float
    max_ber: float
    verdicts: dict
    seeds: list
    failures: int


@dataclass
class SweepResult:
    spec: SweepSpec
    cells: list

    def rows(self) -> list:
        out = []
        for c in sorted(self.cells, key=lambda c: (c.point, c.trial)):
            v = c.outcome.verdicts
            out.append({
                "param": c.value, "trial_seed": c.seed, "ber": c.ber,
                "kp4": int(v["kp4"]), "hd7": int(v["hd7"]), "hd20": int(v["hd20"]),
            })
        return out

    def points(self) -> list:
        pts = []
        for i, value in enumerate(self.spec.values):
            cells = sorted((c for c in self.cells if c.point == i), key=lambda c: c.trial)
            bers = np.array([c.ber for c in cells if not c.failed])
            mean = float(np.mean(bers)) if len(bers) else float("nan")
            pts.append(SweepPoint(
                value, mean,
                float(np.min(bers)) if len(bers) else float("nan"),
                float(np.max(bers)) if len(bers) else float("nan"),
                fec_verdicts(mean) if len(bers) else {k: False for k in fec_verdicts(0)},
                [c.seed for c in cells],
                sum(c.failed for c in cells),
            ))
        return pts

    def mean_ber(self) -> np.ndarray:
        return np.array([p.mean_ber for p in self.points()])


def _point_job(spec: SweepSpec, point: int, trial: int):
    seed = spec.cell_seed(point, trial)
    return [SweepCell(point, trial, spec.values[point], seed,
                      run_single(spec.config_at(point), seed))]


def _detection_job(spec: SweepSpec, trial: int):
    """All detection-only points for one trial from one set of captures."""
    seed = spec.cell_seed(0, trial)
    try:
        frames = _simulate_frames(spec.config_at(0), seed)
    except _RUN_ERRORS as exc:
        fail = RunFailure(seed, type(exc).__name__, str(exc))
        return [SweepCell(i, trial, v, seed, fail) for i, v in enumerate(spec.values)]
    cells = []
    for i, v in enumerate(spec.values):
        cfg = spec.config_at(i)
        cells.append(SweepCell(i, trial, v, seed, _report(frames, cfg, cfg.dsp, False)))
    return cells


def _run_job(job):
    kind, spec, args = job
    return _detection_job(spec, *args) if kind == "detect" else _point_job(spec, *args)


def run_sweep(spec: SweepSpec, jobs: int = 1) -> SweepResult:
    """Run every (point, trial) cell; failures are recorded per cell."""
    if spec.param in DETECTION_PARAMS:
        work = [("detect", spec, (t,)) for t in range(spec.trials)]
    else:
        work = [("point", spec, (p, t)) for p in range(len(spec.values)) for t in range(spec.trials)]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_job, work))
    else:
        chunks = [_run_job(w) for w in work]
    cells = [c for chunk in chunks for c in chunk]
    cells.sort(key=lambda c: (c.point, c.trial))
    return SweepResult(spec, cells)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return "" if v is None else str(v)


def _parse(s: str):
    if s == "":
        return None
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def emit_csv(result: SweepResult, path) -> Path:
    """Per-cell CSV with columns param,trial_seed,ber,kp4,hd7,hd20."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for row in result.rows():
                w.writerow([_fmt(row[k]) for k in CSV_COLUMNS])
    except OSError as exc:
        raise OSError(f"cannot write sweep CSV {path}: {exc}") from exc
    return path


def read_csv(path) -> list:
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {header}")
        return [dict(zip(CSV_COLUMNS, (_parse(x) for x in row))) for row in r]


def emit_dat(result: SweepResult, path) -> Path:
    """gnuplot-style per-point summary: value, mean, min and max BER."""
    path = Path(path)
    with path.open("w") as fh:
        axis = result.spec.param or "point"
        if axis == "rop_dbm":
            axis = "emulated_rop_dbm"
        fh.write(f"# {axis} mean_ber min_ber max_ber failures\n")
        for p in result.points():
            fh.write(f"{_fmt(p.value)} {p.mean_ber!r} {p.min_ber!r} {p.max_ber!r} {p.failures}\n")
    return path


def threshold_crossing(x, ber, threshold: float) -> float:
    """Smallest x where log10(BER) falls to ``threshold`` (linear interpolation)."""
    x = np.asarray(x, dtype=float)
    y = np.log10(np.maximum(np.asarray(ber, dtype=float), 1e-12))
    t = math.log10(threshold)
    order = np.argsort(x)
    x, y = x[order], y[order]
    for i in range(len(x) - 1):
        if y[i] > t >= y[i + 1]:
            return float(x[i] + (t - y[i]) * (x[i + 1] - x[i]) / (y[i + 1] - y[i]))
    if len(y) and y[0] <= t:
        return float(x[0])
    return float("nan")


# ---------------------------------------------------------------------------
# presets

NOMINAL_ALPHA = {  # (baud, length_m) -> measured optimum alpha
    (84e9, 0.0): 0.5, (80e9, 0.0): 0.6,
    (84e9, 1000.0): 0.5, (80e9, 1000.0): 0.6,
    (80e9, 2000.0): 0.8, (84e9, 2000.0): 0.9,
}
DEFAULT_ROP_DBM = 0.0
_LENGTHS = {"btb": 0.0, "1km": 1000.0, "2km": 2000.0}
_BAUDS = {"80g": 80e9, "84g": 84e9}


def _nominal_config(baud: float, length: float, rop_dbm: float = DEFAULT_ROP_DBM) -> SimConfig:
    link = LinkConfig(baud=baud, fiber_length=length, osnr_db=emulated_osnr_db(rop_dbm))
    return SimConfig(link, DspConfig(alpha=NOMINAL_ALPHA[(baud, length)]))


def _build_presets() -> dict:
    p = {}
    for bname, baud in _BAUDS.items():
        for lname, length in _LENGTHS.items():
            p[f"paper-{bname}-{lname}"] = {"config": _nominal_config(baud, length)}
            p[f"fig3-alpha-{bname}-{lname}"] = {
                "config": _nominal_config(baud, length),
                "param": "alpha", "values": [round(0.1 * i, 1) for i in range(11)], "trials": 20,
            }
    for lname, length in _LENGTHS.items():
        base = _nominal_config(80e9, length)
        p[f"fig4-rate-{lname}"] = {
            "config": base, "param": "baud",
            "values": [50e9, 56e9, 64e9, 72e9, 75e9, 80e9, 84e9], "trials": 5,
        }
        p[f"fig4-rate-{lname}-nomlsd"] = {
            "config": replace(base, dsp=base.dsp.replace(use_mlsd=False)), "param": "baud",
            "values": [50e9, 56e9, 64e9, 72e9, 75e9, 80e9, 84e9], "trials": 5,
        }
        p[f"fig5b-rop-{lname}"] = {
            "config": base, "param": "rop_dbm",
            "values": [float(v) for v in range(-8, 5)], "trials": 5,
        }
    for lname in ("btb", "1km"):
        p[f"fig5c-rop-{lname}"] = {
            "config": _nominal_config(84e9, _LENGTHS[lname]), "param": "rop_dbm",
            "values": [float(v) for v in range(-8, 5)], "trials": 5,
        }
    p["clean-loopback"] = {"config": SimConfig(
        LinkConfig(eo_3db_bandwidth=1e12, rx_3db_bandwidth=1e12, osnr_db=None),
        DspConfig(use_mlsd=False))}
    return p


PRESETS = _build_presets()


def preset(name: str) -> dict:
    try:
        entry = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return dict(entry)


def preset_sweep(name: str, trials: Optional[int] = None, master_seed: int = 0) -> SweepSpec:
    e = preset(name)
    if "param" not in e:
        return SweepSpec(None, ("",), trials or 1, e["config"], master_seed)
    return SweepSpec(e["param"], e["values"], trials or e["trials"], e["config"], master_seed)


def load_config(path) -> tuple[SimConfig, Optional[dict], Optional[int]]:
    """Read a JSON config: ``link``, ``dsp``, ``frame``, ``n_frames``, optional ``sweep``."""
    with Path(path).open() as fh:
        d = json.load(fh)
    return SimConfig.from_dict(d), d.get("sweep"), d.get("master_seed")


def sweep_from_config(path, trials: Optional[int] = None, master_seed: Optional[int] = None) -> SweepSpec:
    cfg, sweep, seed = load_config(path)
    seed = master_seed if master_seed is not None else (seed or 0)
    if not sweep:
        return SweepSpec(None, ("",), trials or 1, cfg, seed)
    return SweepSpec(sweep["param"], sweep["values"], trials or sweep.get("trials", 1), cfg, seed,
                     sweep.get("output"))


def calibrate_alpha(config: SimConfig, alphas=None, trials: int = 4, master_seed: int = 1_000_003,
                    jobs: int = 1) -> float:
    """Post-filter alpha with the lowest mean BER on calibration seeds.

    Use a ``master_seed`` disjoint from the evaluation sweep so the choice
    is not fitted to the cells it is judged on. Ties go to the smaller alpha.
    """
    alphas = tuple(np.round(np.arange(0, 1.0001, 0.1), 1)) if alphas is None else tuple(alphas)
    spec = SweepSpec("alpha", alphas, trials, replace(config, dsp=config.dsp.replace(use_mlsd=True)),
                     master_seed)
    m = run_sweep(spec, jobs).mean_ber()
    return float(alphas[int(np.nanargmin(m))])
