"""Quantum-jump (Monte-Carlo wave-function) trajectories.

Between jumps the state evolves under the non-Hermitian H_eff = H -
(i/2)(gamma_P |P><P| + gamma_Q |Q><Q|); the squared norm decays by
exactly the accumulated jump probability, so waiting times are drawn
by integrating the norm down to a uniform threshold. H_eff is only
4x4, so the norm is an explicit sum of 16 complex exponentials from
its eigendecomposition, and the threshold crossing is bracketed on a
precomputed log-spaced survival table and polished with a root
finder. Every jump projects onto |S> or |D> (global phase dropped;
it never feeds back into populations or jump statistics), so the
tables are shared by all segments with the same source ket.
"""

from __future__ import annotations

import dataclasses
import json

import numpy as np
from scipy.optimize import brentq

from .dynamics import PopulationTrace, _check_grid
from .errors import MotionUnsupported, NoJumps, NonPhysicalState, ZeroFluorescence
from .liouvillian import build_hamiltonian, build_superoperator
from .model import SystemConfig, level_index
from .steady import steady_state

CHANNELS = ("P->S", "P->D", "Q->S")
#: post-jump source ket of each channel
_CHANNEL_TARGET = ("S", "D", "S")

#: jump-time location tolerance, us
JUMP_TIME_TOL = 1e-7


@dataclasses.dataclass(frozen=True)
class TrajectoryRecord:
    """Jump times and channels of one trajectory.

    seed is whatever was passed to run_trajectory (an integer, or a
    (seed, index) tuple for ensemble members). sampled_states holds
    (time, normalized 4-amplitude) pairs when sampling was requested.
    """

    seed: object
    t_max: float
    jump_times: np.ndarray
    jump_channels: tuple[str, ...]
    sampled_states: list | None = None

    def __post_init__(self):
        t = np.asarray(self.jump_times, dtype=float)
        if t.size and np.any(np.diff(t) <= 0.0):
            raise NonPhysicalState("jump times must be strictly increasing")
        object.__setattr__(self, "jump_times", t)
        t.setflags(write=False)


class _SourceTable:
    """Survival function and amplitudes for one fixed start vector."""

    __slots__ = ("a", "c", "z", "surv")

    def __init__(self, model: "_EffectiveModel", psi: np.ndarray):
        a = model.v_inv @ psi
        self.a = a
        # ||psi(t)||^2 = Re sum_jk conj(a_j) a_k (V+V)_jk exp(i(conj(mu_j)-mu_k) t)
        self.c = (np.outer(a.conj(), a) * model.gram).ravel()
        self.z = (1j * (model.mu.conj()[:, None] - model.mu[None, :])).ravel()
        self.surv = self.survival(model.t_table)

    def survival(self, t):
        """Squared norm at elapsed time(s) t since the segment start."""
        t = np.asarray(t, dtype=float)
        vals = np.real(np.exp(np.multiply.outer(t, self.z)) @ self.c)
        return vals if t.ndim else float(vals)


class _EffectiveModel:
    """Eigendecomposition of H_eff plus per-source survival tables."""

    def __init__(self, config: SystemConfig, t_max: float):
        atom = config.atom
        h_eff = build_hamiltonian(config).h_total.astype(complex)
        h_eff[1, 1] -= 0.5j * atom.gamma_p
        h_eff[3, 3] -= 0.5j * atom.gamma_q
        self.mu, self.v = np.linalg.eig(h_eff)
        self.v_inv = np.linalg.inv(self.v)
        self.gram = self.v.conj().T @ self.v
        self.rates = np.array([atom.beta_ps * atom.gamma_p, atom.beta_pd * atom.gamma_p, atom.gamma_q])
        self.t_table = np.concatenate(([0.0], np.geomspace(1e-7, max(t_max, 1e-6), 512)))
        self._tables: dict[str, _SourceTable] = {}

    def table(self, key: str, psi: np.ndarray) -> _SourceTable:
        tab = self._tables.get(key)
        if tab is None:
            tab = _SourceTable(self, psi)
            self._tables[key] = tab
        return tab

    def amplitudes(self, table: _SourceTable, dt):
        """Unnormalized state amplitudes, (4,) for scalar dt, (4, n) for a grid."""
        phase = np.exp(np.multiply.outer(-1j * self.mu, dt))
        return self.v @ (table.a[..., None] * phase if np.ndim(dt) else table.a * phase)

    def waiting_time(self, table: _SourceTable, u: float, t_rem: float):
        """Elapsed time at which the squared norm first reaches u, or None."""
        if table.survival(t_rem) >= u:
            return None
        # survival is non-increasing; bracket on the table, polish on the exact sum
        idx = int(np.searchsorted(-table.surv, -u, side="right"))
        lo = self.t_table[idx - 1] if idx > 0 else 0.0
        hi = min(self.t_table[idx], t_rem) if idx < self.t_table.size else t_rem
        root = float(brentq(lambda t: table.survival(t) - u, lo, hi, xtol=JUMP_TIME_TOL))
        # keep recorded jump times strictly increasing even if the root rounds to 0
        return max(root, 1e-12)


def _initial_vector(psi0) -> tuple[str, np.ndarray]:
    """Normalize psi0 to (cache key, 4-amplitude vector)."""
    if isinstance(psi0, str):
        psi = np.zeros(4, dtype=complex)
        psi[level_index(psi0)] = 1.0
        return psi0.upper(), psi
    psi = np.asarray(psi0, dtype=complex)
    if psi.shape != (4,):
        raise NonPhysicalState(f"initial state must be a 4-amplitude vector, got shape {psi.shape}")
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > 1e-9:
        raise NonPhysicalState(f"initial state norm {norm:.12f} deviates from 1 by more than 1e-9")
    return "__init__", psi / norm


def _basis_ket(key: str) -> np.ndarray:
    psi = np.zeros(4, dtype=complex)
    psi[level_index(key)] = 1.0
    return psi


def _run_jumps(model: _EffectiveModel, key: str, psi: np.ndarray, t_max: float, rng) -> tuple[list, list]:
    times: list[float] = []
    channels: list[int] = []
    table = model.table(key, psi)
    t_now = 0.0
    while True:
        dt = model.waiting_time(table, rng.random(), t_max - t_now)
        if dt is None:
            break
        t_now += dt
        amps2 = np.abs(model.amplitudes(table, dt)) ** 2
        w = model.rates * amps2[[1, 1, 3]]
        total = w.sum()
        if total <= 0.0:
            break  # no open decay channel; the norm cannot drop further
        pick = rng.random() * total
        channel = 0 if pick < w[0] else (1 if pick < w[0] + w[1] else 2)
        times.append(t_now)
        channels.append(channel)
        key = _CHANNEL_TARGET[channel]
        table = model.table(key, _basis_ket(key))
    return times, channels


def _segment_sources(record: TrajectoryRecord, init_key: str) -> list[str]:
    """Source-ket key of each inter-jump segment, first one included."""
    sources = [init_key]
    for name in record.jump_channels:
        sources.append(_CHANNEL_TARGET[CHANNELS.index(name)])
    return sources


def _states_on_grid(model: _EffectiveModel, record: TrajectoryRecord, init_key: str, psi0: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Normalized amplitudes on a time grid, shape (n, 4)."""
    out = np.empty((times.size, 4), dtype=complex)
    seg_of = np.searchsorted(record.jump_times, times, side="right")
    sources = _segment_sources(record, init_key)
    starts = np.concatenate(([0.0], record.jump_times))
    for seg in np.unique(seg_of):
        sel = seg_of == seg
        key = sources[seg]
        table = model.table(key, psi0 if key == "__init__" else _basis_ket(key))
        amps = model.amplitudes(table, times[sel] - starts[seg])
        amps /= np.linalg.norm(amps, axis=0)
        out[sel] = amps.T
    return out


def run_trajectory(config: SystemConfig, psi0, t_max: float, seed, *, sample_times=None) -> TrajectoryRecord:
    """One quantum-jump trajectory of length t_max (us).

    psi0 is a level label or a normalized 4-amplitude vector. The
    random stream comes from numpy's SeedSequence of the seed value
    exactly as passed, so an integer and the tuple (base, index) used
    by ensembles are both reproducible addresses. Motion is not part
    of the trajectory model.
    """
    if config.motion.enabled:
        raise MotionUnsupported("trajectories are carrier-only; disable motion")
    init_key, psi = _initial_vector(psi0)
    model = _EffectiveModel(config, t_max)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    times, channels = _run_jumps(model, init_key, psi, t_max, rng)
    record = TrajectoryRecord(
        seed=seed,
        t_max=float(t_max),
        jump_times=np.asarray(times, dtype=float),
        jump_channels=tuple(CHANNELS[c] for c in channels),
    )
    if sample_times is not None:
        grid = np.asarray(sample_times, dtype=float)
        states = _states_on_grid(model, record, init_key, psi, grid)
        record = dataclasses.replace(record, sampled_states=[(float(t), s) for t, s in zip(grid, states)])
    return record


def ensemble_populations(config: SystemConfig, psi0, t_grid, n_traj: int, seed: int, *, return_records: bool = False):
    """Trajectory-averaged populations with per-point standard errors.

    Trajectory i draws its random stream from SeedSequence((seed, i)),
    so the ensemble is reproducible and independent of evaluation
    order. Returns a PopulationTrace; with return_records=True, a
    (trace, records) pair.
    """
    if config.motion.enabled:
        raise MotionUnsupported("trajectories are carrier-only; disable motion")
    if n_traj < 1:
        raise NonPhysicalState("need at least one trajectory")
    times = _check_grid(t_grid)
    init_key, psi = _initial_vector(psi0)
    t_max = float(times[-1])
    model = _EffectiveModel(config, t_max)

    total = np.zeros((times.size, 4))
    total_sq = np.zeros((times.size, 4))
    records = []
    for i in range(n_traj):
        rng = np.random.default_rng(np.random.SeedSequence((seed, i)))
        jump_times, channels = _run_jumps(model, init_key, psi, t_max, rng)
        record = TrajectoryRecord(
            seed=(seed, i),
            t_max=t_max,
            jump_times=np.asarray(jump_times, dtype=float),
            jump_channels=tuple(CHANNELS[c] for c in channels),
        )
        pops = np.abs(_states_on_grid(model, record, init_key, psi, times)) ** 2
        pops /= pops.sum(axis=1, keepdims=True)
        total += pops
        total_sq += pops**2
        if return_records:
            records.append(record)

    mean = total / n_traj
    if n_traj > 1:
        var = np.maximum(total_sq / n_traj - mean**2, 0.0) * n_traj / (n_traj - 1)
        std_err = np.sqrt(var / n_traj)
    else:
        std_err = np.zeros_like(mean)
    trace = PopulationTrace(times=times, populations=mean, standard_errors=std_err)
    return (trace, records) if return_records else trace


def default_dark_threshold(config: SystemConfig) -> float:
    """100x the mean inter-photon interval of the fluorescing state.

    The bright state is the steady state of the scheme with the weak
    C drive removed, which emits gamma_P P_P photons per us.
    """
    bare = dataclasses.replace(config, laser_c=dataclasses.replace(config.laser_c, rabi=0.0))
    rho = steady_state(build_superoperator(build_hamiltonian(bare).h_total, bare))
    rate = config.atom.gamma_p * rho.population("P")
    if rate <= 0.0:
        raise ZeroFluorescence("bright state does not fluoresce; no interval scale")
    return 100.0 / rate


@dataclasses.dataclass(frozen=True)
class BrightDarkStats:
    """Per-segment statistics of bright photon groups and dark gaps."""

    mean_bright_photons: float
    se_bright_photons: float
    mean_dark_duration: float
    se_dark_duration: float
    n_bright: int
    n_dark: int
    threshold: float


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    if values.size == 0:
        return float("nan"), float("nan")
    if values.size == 1:
        return float(values[0]), float("nan")
    return float(values.mean()), float(values.std(ddof=1) / np.sqrt(values.size))


def bright_dark_statistics(records, dark_threshold: float) -> BrightDarkStats:
    """Segment photon records at gaps exceeding dark_threshold (us).

    Every maximal run of photons separated by gaps <= threshold
    counts as one bright period (including runs cut off by the record
    edges); every gap > threshold counts as one dark period of that
    gap's duration. Statistics pool all periods of all records.
    """
    bright_counts: list[int] = []
    dark_durations: list[float] = []
    total_jumps = 0
    for record in records:
        t = record.jump_times
        total_jumps += t.size
        if t.size == 0:
            continue
        gaps = np.diff(t)
        dark = gaps > dark_threshold
        dark_durations.extend(gaps[dark])
        # photons per maximal run between dark gaps
        edges = np.nonzero(dark)[0]
        bounds = np.concatenate(([0], edges + 1, [t.size]))
        bright_counts.extend(np.diff(bounds))
    if total_jumps == 0:
        raise NoJumps("no photons in any record")
    mb, seb = _mean_se(np.asarray(bright_counts, dtype=float))
    md, sed = _mean_se(np.asarray(dark_durations, dtype=float))
    return BrightDarkStats(
        mean_bright_photons=mb,
        se_bright_photons=seb,
        mean_dark_duration=md,
        se_dark_duration=sed,
        n_bright=len(bright_counts),
        n_dark=len(dark_durations),
        threshold=float(dark_threshold),
    )


def photon_records_to_csv(records, stream) -> None:
    """`trajectory_id,jump_time_us,channel` rows, one per photon."""
    stream.write("trajectory_id,jump_time_us,channel\n")
    for i, record in enumerate(records):
        for t, ch in zip(record.jump_times, record.jump_channels):
            stream.write("%d,%.12g,%s\n" % (i, t, ch))


def statistics_to_json(stats: BrightDarkStats) -> str:
    return json.dumps(
        {
            "mean_bright_photons": stats.mean_bright_photons,
            "se_bright_photons": stats.se_bright_photons,
            "mean_dark_duration_us": stats.mean_dark_duration,
            "se_dark_duration_us": stats.se_dark_duration,
            "n_bright": stats.n_bright,
            "n_dark": stats.n_dark,
            "dark_threshold_us": stats.threshold,
        },
        indent=2,
        sort_keys=True,
    )
