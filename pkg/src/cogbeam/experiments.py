"""
Seeded Monte-Carlo sweeps, CSV tables and JSON solution/channel files.

Every trial ``k`` draws its channels from the stream ``(seed, k)`` and
reuses them for every axis value, so trends along the axis are compared on
common channels.  Results are gathered in trial order before averaging,
which keeps the CSV byte-identical for any number of worker processes.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .certificates import random_feasible_power
from .errors import CogBeamError, ConfigError, NumericalFailure
from .feasibility import xi_min
from .model import (ChannelSet, ScenarioConfig, SnrMatrix, build_derived,
                    sample_channels)
from .nfb import lower_bound_power, solve_nfb
from .solution import BeamformingSolution
from .zfb import solve_zfb

__all__ = ['SweepSpec', 'SweepRow', 'AccessRow', 'run_sweep', 'run_access_prob',
           'sweep_csv', 'access_csv', 'write_text', 'db_to_linear',
           'matched_sum_rate_targets', 'dump_solution', 'load_solution',
           'solution_record', 'SOLUTION_SCHEMA', 'read_channels',
           'write_channels', 'SOLVERS', 'SWEEP_HEADER', 'ACCESS_HEADER']

log = logging.getLogger(__name__)

SOLVERS = ('zfb', 'nfb', 'lower_bound', 'feasible')
SWEEP_HEADER = 'axis,axis_unit,solver,mean_power,stddev,mean_interference,infeasible,trials'
ACCESS_HEADER = 'axis,axis_unit,d,rho,access_probability,trials'
FEASIBLE_SAMPLES = 100
SEED_ENV = 'COGBEAM_SEED'


def db_to_linear(value):
    return 10.0 ** (np.asarray(value, dtype=float) / 10.0)


def _fmt(x) -> str:
    return format(float(x), '.12g')


def matched_sum_rate_targets(rho: float, d: int, spread: float) -> tuple:
    """
    Distinct targets with the same sum rate as ``d`` identical targets ``rho``.

    The leading ``d - 1`` targets are the ladder ``rho * spread**(d-1-i)``;
    the last is solved from ``prod(1 + rho_i) == (1 + rho)**d``.
    """
    if d < 2:
        raise ConfigError("distinct targets need at least two streams")
    if spread <= 1:
        raise ConfigError("spread must exceed 1")
    total = d * np.log1p(rho)
    head = [rho * spread ** (d - 1 - i) for i in range(d - 1)]
    last = np.expm1(total - np.sum(np.log1p(head)))
    if not last > 0:
        raise ConfigError("spread too large for a matched sum rate")
    return tuple(float(v) for v in head + [last])


# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxx Sweeps xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
@dataclass(frozen=True)
class SweepSpec:
    """
    One Monte-Carlo sweep.

    Parameters
    ----------
    scenario : ScenarioConfig
        Template; ``xi`` is used when sweeping SNR and ``snr_targets`` when
        sweeping ``xi``.
    sweep_axis : {'snr', 'xi'}
    axis_values : sequence of float
        Strictly increasing, in ``axis_unit``.
    axis_unit : {'linear', 'dB'}
    trials : int
    solvers : sequence of str
        Subset of ``SOLVERS``.  ``'feasible'`` is the mean power of random
        beamformers meeting both constraints.
    snr_pattern : sequence of float, optional
        For an SNR sweep, per-stream multipliers of the axis value; identical
        targets when omitted.
    output_path : str, optional
    workers : int
        Worker processes; results do not depend on it.
    """
    scenario: ScenarioConfig
    sweep_axis: str
    axis_values: tuple
    axis_unit: str = 'linear'
    trials: int = 2000
    solvers: tuple = ('zfb', 'nfb', 'lower_bound')
    snr_pattern: Optional[tuple] = None
    output_path: Optional[str] = None
    workers: int = field(default=1, compare=False)

    def __post_init__(self):
        object.__setattr__(self, 'axis_values',
                           tuple(float(v) for v in self.axis_values))
        object.__setattr__(self, 'solvers', tuple(self.solvers))
        if self.sweep_axis not in ('snr', 'xi'):
            raise ConfigError(f"sweep_axis must be 'snr' or 'xi', got {self.sweep_axis!r}")
        if self.axis_unit not in ('linear', 'dB'):
            raise ConfigError(f"axis_unit must be 'linear' or 'dB', got {self.axis_unit!r}")
        values = np.array(self.axis_values)
        if values.size == 0 or np.any(np.diff(values) <= 0):
            raise ConfigError("axis_values must be nonempty and strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ConfigError("axis_values must be finite")
        if self.axis_unit == 'linear' and np.any(values < 0):
            raise ConfigError("linear axis values must be nonnegative")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        unknown = set(self.solvers) - set(SOLVERS)
        if unknown or not self.solvers:
            raise ConfigError(f"unknown solvers {sorted(unknown)}; choose from {SOLVERS}")
        if self.snr_pattern is not None:
            pattern = tuple(float(v) for v in self.snr_pattern)
            if len(pattern) != self.scenario.d or min(pattern) <= 0:
                raise ConfigError(f"snr_pattern needs {self.scenario.d} positive entries")
            object.__setattr__(self, 'snr_pattern', pattern)

    @property
    def linear_values(self) -> np.ndarray:
        values = np.array(self.axis_values)
        if self.axis_unit == 'dB':
            return db_to_linear(values)
        return values

    def point(self, index: int):
        """``(SnrMatrix, xi)`` at axis position ``index``."""
        value = float(self.linear_values[index])
        if self.sweep_axis == 'xi':
            return self.scenario.snr, value
        pattern = self.snr_pattern or (1.0,) * self.scenario.d
        return SnrMatrix.from_targets([value * p for p in pattern]), self.scenario.xi


@dataclass(frozen=True)
class SweepRow:
    axis_value: float
    axis_unit: str
    solver: str
    mean_power: float
    power_stddev: float
    mean_interference: float
    infeasible_count: int
    trials: int

    def csv(self) -> str:
        return ','.join([_fmt(self.axis_value), self.axis_unit, self.solver,
                         _fmt(self.mean_power), _fmt(self.power_stddev),
                         _fmt(self.mean_interference),
                         str(self.infeasible_count), str(self.trials)])


def _solve_point(derived, solver, snr, xi, seed):
    """Return ``(power, interference)`` or None when the solver cannot serve."""
    try:
        if solver == 'zfb':
            sol = solve_zfb(derived, snr)
            return sol.power, sol.interference
        if solver == 'nfb':
            sol = solve_nfb(derived, snr, xi)
            return sol.power, sol.interference
        if solver == 'lower_bound':
            return lower_bound_power(derived, snr), np.nan
        if solver == 'feasible':
            if not xi_min(derived, snr, xi).feasible:
                return None
            p = random_feasible_power(derived, snr, xi, FEASIBLE_SAMPLES, seed=seed)
            return None if p is None else (p, np.nan)
    except CogBeamError as exc:
        log.debug("%s failed: %s", solver, exc)
        return None
    raise ConfigError(f"unknown solver {solver!r}")


def _check_ordering(trial, index, results):
    zfb, nfb, lb = (results.get(k) for k in ('zfb', 'nfb', 'lower_bound'))
    chain = [(name, v) for name, v in (('zfb', zfb), ('nfb', nfb), ('lower_bound', lb))
             if v is not None]
    for (hi_name, hi), (lo_name, lo) in zip(chain[:-1], chain[1:]):
        if hi[0] < lo[0] * (1 - 1e-9) - 1e-12:
            raise NumericalFailure(
                f"trial {trial}, axis point {index}: {hi_name} power {hi[0]!r} "
                f"below {lo_name} power {lo[0]!r}")


def _run_trial(spec: SweepSpec, trial: int) -> np.ndarray:
    """``(n_axis, n_solvers, 2)`` array of power and interference; NaN power = failure."""
    out = np.full((len(spec.axis_values), len(spec.solvers), 2), np.nan)
    try:
        derived = build_derived(sample_channels(spec.scenario, trial), spec.scenario)
    except CogBeamError as exc:
        log.debug("trial %d skipped: %s", trial, exc)
        return out
    for i in range(len(spec.axis_values)):
        snr, xi = spec.point(i)
        results = {}
        for j, solver in enumerate(spec.solvers):
            seed = [spec.scenario.seed, trial, i, j]
            res = _solve_point(derived, solver, snr, xi, seed)
            if res is not None:
                results[solver] = res
                out[i, j] = res
        _check_ordering(trial, i, results)
    return out


def _map_trials(func, trials: int, workers: int):
    if workers <= 1:
        return [func(k) for k in range(trials)]
    chunk = max(1, trials // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, range(trials), chunksize=chunk))


def run_sweep(spec: SweepSpec) -> list:
    """
    Run a sweep and return one ``SweepRow`` per (axis value, solver).

    Means and standard deviations are over the trials where the solver
    succeeded; the others are counted in ``infeasible_count``.
    """
    results = np.stack(_map_trials(partial(_run_trial, spec), spec.trials, spec.workers))
    rows = []
    for i, value in enumerate(spec.axis_values):
        for j, solver in enumerate(spec.solvers):
            power = results[:, i, j, 0]
            interference = results[:, i, j, 1]
            ok = ~np.isnan(power)
            count = int(np.count_nonzero(ok))
            if count:
                mean = float(np.mean(power[ok]))
                std = float(np.std(power[ok]))
                leak = interference[ok]
                mean_leak = float(np.mean(leak)) if not np.any(np.isnan(leak)) else np.nan
            else:
                mean = std = mean_leak = np.nan
            rows.append(SweepRow(value, spec.axis_unit, solver, mean, std,
                                 mean_leak, spec.trials - count, spec.trials))
    if spec.output_path:
        write_text(spec.output_path, sweep_csv(rows))
    return rows


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    return '\n'.join([SWEEP_HEADER] + [r.csv() for r in rows]) + '\n'


def write_text(path, text: str) -> None:
    with open(path, 'w', newline='\n') as fh:
        fh.write(text)


# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxx Access probability xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
@dataclass(frozen=True)
class AccessRow:
    axis_value: float
    axis_unit: str
    d: int
    rho: float
    probability: float
    trials: int

    def csv(self) -> str:
        return ','.join([_fmt(self.axis_value), self.axis_unit, str(self.d),
                         _fmt(self.rho), _fmt(self.probability), str(self.trials)])


def _trial_xi_min(config: ScenarioConfig, trial: int) -> float:
    try:
        derived = build_derived(sample_channels(config, trial), config)
        return xi_min(derived, config.snr).xi_min
    except CogBeamError:
        return np.inf


def run_access_prob(config: ScenarioConfig, xi_values, trials: int,
                    axis_unit: str = 'linear', workers: int = 1) -> list:
    """
    Access probability ``P(xi_min <= xi)`` for each ``xi`` on common channels.

    ``config.snr_targets`` fixes ``d`` and the targets; ``xi_values`` are in
    ``axis_unit``.
    """
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    if axis_unit not in ('linear', 'dB'):
        raise ConfigError("axis_unit must be 'linear' or 'dB'")
    values = np.array([float(v) for v in xi_values])
    linear = db_to_linear(values) if axis_unit == 'dB' else values
    floor = np.array(_map_trials(partial(_trial_xi_min, config), trials, workers))
    rows = []
    for value, xi in zip(values, linear):
        hits = int(np.count_nonzero(floor <= xi))
        rows.append(AccessRow(float(value), axis_unit, config.d,
                              config.snr_targets[0], hits / trials, trials))
    return rows


def access_csv(rows: Sequence[AccessRow]) -> str:
    return '\n'.join([ACCESS_HEADER] + [r.csv() for r in rows]) + '\n'


# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxx Files xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
def _encode_matrix(A) -> dict:
    A = np.asarray(A, dtype=complex)
    return {'shape': list(A.shape),
            'data': [[float(z.real), float(z.imag)] for z in A.ravel(order='C')]}


def _decode_matrix(obj) -> np.ndarray:
    try:
        shape = tuple(int(s) for s in obj['shape'])
        pairs = np.asarray(obj['data'], dtype=float).reshape(-1, 2)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed matrix record: {exc}") from exc
    if pairs.shape[0] != int(np.prod(shape)):
        raise ConfigError(f"matrix record has {pairs.shape[0]} entries, "
                          f"shape {shape} needs {int(np.prod(shape))}")
    return (pairs[:, 0] + 1j * pairs[:, 1]).reshape(shape)


_MATRIX_SCHEMA = {
    'type': 'object',
    'required': ['shape', 'data'],
    'properties': {
        'shape': {'type': 'array', 'items': {'type': 'integer', 'minimum': 1},
                  'minItems': 2, 'maxItems': 2},
        'data': {'type': 'array',
                 'items': {'type': 'array', 'items': {'type': 'number'},
                           'minItems': 2, 'maxItems': 2}},
    },
}

SOLUTION_SCHEMA = {
    '$schema': 'https://json-schema.org/draft/2020-12/schema',
    'title': 'cogbeam beamforming solution',
    'type': 'object',
    'required': ['format', 'library_version', 'mode', 'T', 'V', 'y', 'power',
                 'interference', 'per_stream_snr', 'snr_targets', 'xi', 'units'],
    'properties': {
        'format': {'const': 'cogbeam-solution'},
        'library_version': {'type': 'string'},
        'mode': {'enum': ['ZFB', 'NFB']},
        'T': _MATRIX_SCHEMA,
        'V': _MATRIX_SCHEMA,
        'y': {'type': ['number', 'null'], 'minimum': 0},
        'power': {'type': 'number', 'minimum': 0},
        'interference': {'type': 'number', 'minimum': 0},
        'per_stream_snr': {'type': 'array', 'items': {'type': 'number'}},
        'snr_targets': {'type': 'array', 'items': {'type': 'number',
                                                   'exclusiveMinimum': 0}},
        'xi': {'type': ['number', 'null'], 'minimum': 0},
        'warning': {'type': ['string', 'null']},
        'units': {'const': 'linear'},
        'scenario': {
            'type': ['object', 'null'],
            'properties': {k: {'type': 'integer', 'minimum': 1}
                           for k in ('m', 'n', 'p', 'q', 'd')},
        },
    },
}


def solution_record(solution: BeamformingSolution,
                    scenario: Optional[ScenarioConfig] = None) -> dict:
    """JSON-ready dictionary describing ``solution``."""
    echo = None
    if scenario is not None:
        echo = {'m': scenario.m, 'n': scenario.n, 'p': scenario.p,
                'q': scenario.q, 'd': scenario.d,
                'primary_power': scenario.primary_power, 'xi': scenario.xi,
                'snr_targets': list(scenario.snr_targets), 'seed': scenario.seed}
    return {
        'format': 'cogbeam-solution',
        'library_version': __version__,
        'mode': solution.mode,
        'units': 'linear',
        'T': _encode_matrix(solution.T),
        'V': _encode_matrix(solution.V),
        'y': None if solution.y is None else float(solution.y),
        'power': float(solution.power),
        'interference': float(solution.interference),
        'per_stream_snr': [float(v) for v in solution.per_stream_snr],
        'snr_targets': [float(v) for v in solution.snr_targets],
        'xi': None if solution.xi is None else float(solution.xi),
        'warning': solution.warning,
        'scenario': echo,
    }


def dump_solution(solution: BeamformingSolution, path,
                  scenario: Optional[ScenarioConfig] = None) -> None:
    """Write ``solution`` as JSON; complex matrices are row-major ``[re, im]`` pairs."""
    write_text(path, json.dumps(solution_record(solution, scenario), indent=1) + '\n')


def load_solution(path) -> dict:
    """Read a solution file; ``T`` and ``V`` come back as complex arrays."""
    with open(path) as fh:
        record = json.load(fh)
    if record.get('format') != 'cogbeam-solution':
        raise ConfigError(f"{path} is not a cogbeam solution file")
    record['T'] = _decode_matrix(record['T'])
    record['V'] = _decode_matrix(record['V'])
    return record


def write_channels(channels: ChannelSet, path) -> None:
    """Write a channel file: ``H``, ``H_x``, ``G_x`` as shape + ``[re, im]`` pairs."""
    record = {'format': 'cogbeam-channels',
              'H': _encode_matrix(channels.H),
              'H_x': _encode_matrix(channels.H_x),
              'G_x': _encode_matrix(channels.G_x)}
    write_text(path, json.dumps(record, indent=1) + '\n')


def read_channels(path) -> ChannelSet:
    with open(path) as fh:
        try:
            record = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    try:
        return ChannelSet(H=_decode_matrix(record['H']),
                          H_x=_decode_matrix(record['H_x']),
                          G_x=_decode_matrix(record['G_x']))
    except KeyError as exc:
        raise ConfigError(f"{path}: missing matrix {exc}") from exc


def default_seed() -> int:
    """Seed from ``$COGBEAM_SEED``, else 0."""
    raw = os.environ.get(SEED_ENV, '0')
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{SEED_ENV}={raw!r} is not an integer") from exc
