"""Experiment orchestration: input signal, episodes, sensor datasets.

An experiment run drives the chain with a sinusoidal tendon-endpoint
signal against each plate of a class set, starting from N perturbed
initial states, for P pecking periods each. Sensor frames (joint angles
plus the two beak force channels) are sampled at f_s; the first
P_washout periods are flagged as washout and dropped from the dataset.
Retained per-period windows are quantized against a per-channel
calibration taken from the training initial states only, and features
for the readout are built by time multiplexing: one snapshot per
interval of ``interval_stride`` samples.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernel
from .chain import ChainConfig, ChainState, SimulationError, head_side_joints, pack, rest_state
from .contact import ContactEnvironment, ContactParams, PlateSpec

# Integrator substeps per sensor sample: internal dt = 1 / (4 f_s).
SUBSTEPS_PER_SAMPLE = 4

# Initial-state perturbation of the passive head-side joints (rad).
INIT_PERTURBATION = 0.05

TIMESERIES_HEADER_PREFIX = "t"


@dataclass(frozen=True)
class InputSignal:
    """Tendon endpoint drive u(t) = (A*pi/180)*R*cos(2*pi*t/T) + Dr.

    amplitude_deg is the motor winding amplitude A in degrees, converted
    to radians before multiplying by the pulley radius R so that u is in
    meters; period T in seconds; drift Dr in meters sets the operating
    point (smaller u = more stretch = more tension).
    """

    amplitude_deg: float
    period: float
    pulley_radius: float = 0.01
    drift: float = 0.0

    def __post_init__(self):
        if self.period <= 0.0:
            raise ValueError("period must be > 0")
        if self.pulley_radius <= 0.0:
            raise ValueError("pulley_radius must be > 0")
        if self.amplitude_deg < 0.0:
            raise ValueError("amplitude_deg must be >= 0")

    @property
    def amplitude_m(self) -> float:
        return math.radians(self.amplitude_deg) * self.pulley_radius

    @property
    def speed(self) -> float:
        """Input speed A/T in deg/s."""
        return self.amplitude_deg / self.period


def input_u(signal: InputSignal, t: float) -> float:
    """Endpoint position (m) at time t >= 0."""
    if t < 0.0:
        raise ValueError("t must be >= 0")
    return (signal.amplitude_m * math.cos(2.0 * math.pi * t / signal.period)
            + signal.drift)


@dataclass(frozen=True)
class EpisodeSpec:
    """Protocol constants for one experiment run."""

    n_classes: int          # C
    n_initial_states: int   # N
    n_periods: int          # P
    n_washout: int          # washout periods discarded from the dataset
    n_train: int            # initial states used for training
    n_eval: int             # initial states held out for evaluation
    seed: int               # explicit; there is no implicit seeding
    sample_rate: float = 700.0   # f_s (Hz)
    interval_stride: int = 10    # samples per multiplexing interval
    window_stride: int = 0       # realtime window length; 0 = interval_stride
    quant_bits: int = 12

    def __post_init__(self):
        if self.n_classes < 2:
            raise ValueError("need at least 2 classes")
        if not self.n_periods > self.n_washout >= 0:
            raise ValueError("require n_periods > n_washout >= 0")
        if self.n_train + self.n_eval > self.n_initial_states:
            raise ValueError("n_train + n_eval must not exceed N")
        if self.n_train < 1 or self.n_eval < 1:
            raise ValueError("need at least one train and one eval state")
        if not 1 <= self.quant_bits <= 16:
            raise ValueError("quant_bits must be in [1, 16]")
        if self.sample_rate <= 0 or self.interval_stride < 1:
            raise ValueError("invalid sampling parameters")

    @property
    def effective_window_stride(self) -> int:
        return self.window_stride if self.window_stride else self.interval_stride

    @property
    def retained_periods(self) -> int:
        return self.n_periods - self.n_washout


def samples_per_period(signal: InputSignal, spec: EpisodeSpec) -> int:
    """T*f_s as an exact integer, validated against the interval stride."""
    spp = signal.period * spec.sample_rate
    if abs(spp - round(spp)) > 1e-9:
        raise ValueError("period * sample_rate must be an integer")
    spp = int(round(spp))
    if spp % spec.interval_stride != 0:
        raise ValueError("samples per period must be divisible by the stride")
    return spp


@dataclass(frozen=True)
class SensorFrame:
    """One sensor sample: joint angles (rad), beak force (N), time (s)."""

    joint_angles: np.ndarray
    beak_force: tuple
    time: float


def gen_initial_states(spec: EpisodeSpec, config: ChainConfig,
                       delta: float = INIT_PERTURBATION) -> list:
    """N initial states: rest posture with the passive head-side joints
    perturbed uniformly in [-delta, +delta]; zero rates; seeded."""
    rng = np.random.default_rng(spec.seed)
    head = head_side_joints(config)
    states = []
    for _ in range(spec.n_initial_states):
        q = config.rest_angles.copy()
        if head:
            q[head] += rng.uniform(-delta, delta, len(head))
        states.append(ChainState(q=q, qdot=np.zeros(config.n_joints), t=0.0))
    return states


@dataclass
class EpisodeSeries:
    """Raw sensor series of one episode: P periods sampled at f_s."""

    times: np.ndarray      # (frames,)
    angles: np.ndarray     # (frames, n_joints)
    forces: np.ndarray     # (frames, 2) tangential, vertical
    washout: np.ndarray    # (frames,) bool
    samples_per_period: int

    def frame(self, k: int) -> SensorFrame:
        return SensorFrame(joint_angles=self.angles[k],
                           beak_force=(float(self.forces[k, 0]),
                                       float(self.forces[k, 1])),
                           time=float(self.times[k]))


def run_episode(config: ChainConfig, plate: PlateSpec, init: ChainState,
                signal: InputSignal, spec: EpisodeSpec,
                params: ContactParams = ContactParams()) -> EpisodeSeries:
    """Simulate P periods of pecking against one plate. Deterministic."""
    spp = samples_per_period(signal, spec)
    n_samples = spec.n_periods * spp
    n = config.n_joints
    packed = pack(config)
    q = init.q.copy()
    qd = init.qdot.copy()
    q_frames = np.empty((n_samples, n))
    f_frames = np.empty((n_samples, 2))
    plate_on = plate is not None
    status, bad_joint, t_fail = _kernel.episode_core(
        q, qd, init.t, n_samples, SUBSTEPS_PER_SAMPLE, spec.sample_rate,
        signal.amplitude_m, signal.period, signal.drift, True,
        packed["link_length"], packed["link_mass"], packed["g"],
        packed["stiff"], packed["damp"], packed["rest"],
        packed["lim_lo"], packed["lim_hi"],
        packed["mom"], packed["k_t"],
        packed["lig_on"], packed["k_lig"], packed["preload"],
        plate_on,
        plate.stiffness if plate_on else 0.0,
        plate.damping if plate_on else 0.0,
        plate.surface_height if plate_on else 0.0,
        params.d_min, params.d_max, params.width, params.power,
        params.midpoint, params.tangential_friction,
        q_frames, f_frames)
    if status != _kernel.STATUS_OK:
        raise SimulationError(t_fail, bad_joint)
    times = init.t + (np.arange(1, n_samples + 1)) / spec.sample_rate
    washout = np.repeat(np.arange(spec.n_periods) < spec.n_washout, spp)
    return EpisodeSeries(times=times, angles=q_frames, forces=f_frames,
                         washout=washout, samples_per_period=spp)


@dataclass
class RawRun:
    """Flat concatenation of every episode of a run, frame per row.

    Episodes are ordered lexically by (class label, initial state); the
    label/init/period columns index each frame back to its episode.
    """

    times: np.ndarray
    angles: np.ndarray
    forces: np.ndarray
    washout: np.ndarray
    label: np.ndarray
    init: np.ndarray
    period: np.ndarray
    samples_per_period: int

    @property
    def n_joints(self) -> int:
        return self.angles.shape[1]

    def joint_trajectories(self, label: int) -> np.ndarray:
        """Per-initial-state joint-angle series for one class,
        shape (N, P*spp, n_joints); the ESP input."""
        inits = np.unique(self.init[self.label == label])
        series = []
        for i in inits:
            mask = (self.label == label) & (self.init == i)
            series.append(self.angles[mask])
        return np.stack(series)


def run_protocol(config: ChainConfig, plates, signal: InputSignal,
                 spec: EpisodeSpec,
                 params: ContactParams = ContactParams()) -> RawRun:
    """Run all C*N episodes (class-major, then initial state)."""
    if len(plates) != spec.n_classes:
        raise ValueError("plate count must equal n_classes")
    labels = [p.label for p in plates]
    if sorted(labels) != list(range(spec.n_classes)):
        raise ValueError("plate labels must be 0..C-1 and unique")
    plates = sorted(plates, key=lambda p: p.label)
    states = gen_initial_states(spec, config)
    parts = []
    for plate in plates:
        for i, init in enumerate(states):
            ep = run_episode(config, plate, init, signal, spec, params)
            n_frames = len(ep.times)
            spp = ep.samples_per_period
            parts.append((ep, np.full(n_frames, plate.label),
                          np.full(n_frames, i),
                          np.repeat(np.arange(spec.n_periods), spp)))
    spp = parts[0][0].samples_per_period
    return RawRun(
        times=np.concatenate([p[0].times for p in parts]),
        angles=np.concatenate([p[0].angles for p in parts]),
        forces=np.concatenate([p[0].forces for p in parts]),
        washout=np.concatenate([p[0].washout for p in parts]),
        label=np.concatenate([p[1] for p in parts]).astype(int),
        init=np.concatenate([p[2] for p in parts]).astype(int),
        period=np.concatenate([p[3] for p in parts]).astype(int),
        samples_per_period=spp)


# ---------------------------------------------------------------------------
# Quantization and dataset assembly


def quantize(series: np.ndarray, bits: int, calibration: np.ndarray) -> np.ndarray:
    """Per-channel affine quantization onto 2**bits levels, mapped back to
    physical units at level centers. Constant channels map to the minimum."""
    series = np.asarray(series, dtype=float)
    calibration = np.asarray(calibration, dtype=float)
    lo = calibration[:, 0]
    hi = calibration[:, 1]
    span = hi - lo
    n_levels = 2 ** bits
    safe = span > 0
    scaled = np.zeros_like(series)
    scaled[..., safe] = (series[..., safe] - lo[safe]) / span[safe] * n_levels
    levels = np.clip(np.floor(scaled), 0, n_levels - 1)
    # zero span collapses to the minimum (level 0 at zero width)
    return lo + (levels + 0.5) * span / n_levels


@dataclass
class Dataset:
    """Quantized per-period windows with labels and calibration.

    windows has shape (n_windows, samples_per_period, n_joints + 2) with
    channels ordered joints first, then tangential and vertical force.
    """

    windows: np.ndarray
    labels: np.ndarray
    init_index: np.ndarray
    period_index: np.ndarray
    calibration: np.ndarray
    spec: EpisodeSpec
    signal: InputSignal
    n_joints: int
    samples_per_period: int
    raw_joint_series: dict = field(default_factory=dict)

    @property
    def n_channels(self) -> int:
        return self.n_joints + 2

    @property
    def n_windows(self) -> int:
        return self.windows.shape[0]

    def chance_rate(self) -> float:
        return 1.0 / self.spec.n_classes


def dataset_from_run(run: RawRun, signal: InputSignal, spec: EpisodeSpec,
                     keep_raw: bool = True) -> Dataset:
    """Drop washout periods, calibrate on the training initial states,
    quantize every retained window."""
    spp = run.samples_per_period
    frames = np.concatenate([run.angles, run.forces], axis=1)
    retained = ~run.washout
    win_key = np.stack([run.label, run.init, run.period], axis=1)
    # windows in lexical (label, init, period) order; frames are stored
    # in that order already, so reshape after filtering
    r_frames = frames[retained]
    r_key = win_key[retained]
    n_windows = r_frames.shape[0] // spp
    if n_windows * spp != r_frames.shape[0]:
        raise ValueError("retained frames do not tile whole periods")
    windows = r_frames.reshape(n_windows, spp, -1)
    keys = r_key[::spp]
    labels = keys[:, 0]
    init_index = keys[:, 1]
    period_index = keys[:, 2]
    train_mask = init_index < spec.n_train
    train_frames = windows[train_mask].reshape(-1, windows.shape[2])
    calibration = np.stack([train_frames.min(axis=0),
                            train_frames.max(axis=0)], axis=1)
    quantized = quantize(windows, spec.quant_bits, calibration)
    raw = {}
    if keep_raw:
        for lab in np.unique(run.label):
            raw[int(lab)] = run.joint_trajectories(int(lab))
    return Dataset(windows=quantized, labels=labels.astype(int),
                   init_index=init_index.astype(int),
                   period_index=period_index.astype(int),
                   calibration=calibration, spec=spec, signal=signal,
                   n_joints=run.n_joints, samples_per_period=spp,
                   raw_joint_series=raw)


def build_dataset(config: ChainConfig, plates, signal: InputSignal,
                  spec: EpisodeSpec,
                  params: ContactParams = ContactParams(),
                  keep_raw: bool = True) -> Dataset:
    run = run_protocol(config, plates, signal, spec, params)
    return dataset_from_run(run, signal, spec, keep_raw=keep_raw)


def _snapshot_rows(dataset: Dataset, sample_idx, channels) -> np.ndarray:
    sel = dataset.windows[:, sample_idx, :][:, :, channels]
    # channel-major flattening: all snapshots of channel 0, then channel 1...
    return sel.transpose(0, 2, 1).reshape(dataset.n_windows, -1)


def assemble_features(dataset: Dataset, i: int, stride: int = 0,
                      channels=None):
    """Accumulated time-multiplexed design matrix after i intervals.

    Row w concatenates, channel-major, the snapshots of window w at
    sample indices stride, 2*stride, ..., i*stride (1-based within the
    period). Returns (X, labels)."""
    stride = stride or dataset.spec.interval_stride
    n_intervals = dataset.samples_per_period // stride
    if not 1 <= i <= n_intervals:
        raise ValueError(f"interval index i must be in [1, {n_intervals}]")
    if channels is None:
        channels = list(range(dataset.n_channels))
    sample_idx = stride * np.arange(1, i + 1) - 1
    return _snapshot_rows(dataset, sample_idx, channels), dataset.labels.copy()


def assemble_window_features(dataset: Dataset, i: int, window_stride: int = 0,
                             channels=None):
    """Design matrix from the i-th half-open window ((i-1)*w, i*w] only,
    sampled at the interval stride inside the window."""
    w = window_stride or dataset.spec.effective_window_stride
    stride = dataset.spec.interval_stride
    if w % stride != 0:
        raise ValueError("window_stride must be a multiple of the stride")
    if i < 1 or i * w > dataset.samples_per_period:
        raise ValueError("window range exceeds the period")
    if channels is None:
        channels = list(range(dataset.n_channels))
    base = (i - 1) * w
    sample_idx = base + stride * np.arange(1, w // stride + 1) - 1
    return _snapshot_rows(dataset, sample_idx, channels), dataset.labels.copy()


def eval_split_combinations(spec: EpisodeSpec):
    """Evaluation splits: all N-choose-n_eval combinations when N <= 10,
    else 20 seeded random draws. Yields (train_inits, eval_inits)."""
    from itertools import combinations

    n = spec.n_initial_states
    if n <= 10:
        combos = [tuple(c) for c in combinations(range(n), spec.n_eval)]
    else:
        rng = np.random.default_rng(spec.seed)
        combos = []
        seen = set()
        while len(combos) < 20:
            c = tuple(sorted(rng.choice(n, size=spec.n_eval, replace=False)))
            if c not in seen:
                seen.add(c)
                combos.append(c)
    splits = []
    for ev in combos:
        train = [i for i in range(n) if i not in ev][: spec.n_train]
        splits.append((tuple(train), ev))
    return splits


# ---------------------------------------------------------------------------
# Time-series dump


def timeseries_header(n_joints: int) -> list:
    return (["t"] + [f"q{j}" for j in range(n_joints)]
            + ["f_tan", "f_vert", "washout", "label", "init", "period"])


def write_timeseries_csv(run: RawRun, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(timeseries_header(run.n_joints))
        for k in range(len(run.times)):
            row = [repr(float(run.times[k]))]
            row += [repr(float(v)) for v in run.angles[k]]
            row += [repr(float(run.forces[k, 0])),
                    repr(float(run.forces[k, 1]))]
            row += [str(int(run.washout[k])), str(int(run.label[k])),
                    str(int(run.init[k])), str(int(run.period[k]))]
            writer.writerow(row)


def read_timeseries_csv(path) -> RawRun:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[0] != "t" or "f_tan" not in header:
            raise ValueError(f"unrecognized time-series header in {path}")
        n_joints = header.index("f_tan") - 1
        rows = list(reader)
    data = np.array([[float(v) for v in row] for row in rows])
    times = data[:, 0]
    angles = data[:, 1:1 + n_joints]
    forces = data[:, 1 + n_joints:3 + n_joints]
    washout = data[:, 3 + n_joints].astype(bool)
    label = data[:, 4 + n_joints].astype(int)
    init = data[:, 5 + n_joints].astype(int)
    period = data[:, 6 + n_joints].astype(int)
    first = (label == label[0]) & (init == init[0]) & (period == period[0])
    spp = int(first.sum())
    return RawRun(times=times, angles=angles, forces=forces, washout=washout,
                  label=label, init=init, period=period,
                  samples_per_period=spp)
