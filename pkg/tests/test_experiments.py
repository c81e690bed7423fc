import json

import jsonschema
import numpy as np
import pytest

from cogbeam.errors import ConfigError, NumericalFailure
from cogbeam.experiments import (ACCESS_HEADER, SWEEP_HEADER, SOLUTION_SCHEMA, SweepSpec,
                                 _check_ordering, access_csv, db_to_linear, default_seed,
                                 dump_solution, load_solution, matched_sum_rate_targets,
                                 read_channels, run_access_prob, run_sweep, sweep_csv,
                                 write_channels)
from cogbeam.model import ScenarioConfig, sample_channels
from cogbeam.nfb import solve_nfb
from cogbeam.zfb import solve_zfb

from conftest import random_instance


def _spec(**kw):
    base = dict(scenario=ScenarioConfig(m=5, n=5, p=2, q=2, d=2, snr_targets=(10.0, 10.0),
                                        seed=3),
                sweep_axis='xi', axis_values=(0.1, 1.0, 10.0), trials=12)
    base.update(kw)
    return SweepSpec(**base)


@pytest.mark.parametrize('kw', [
    dict(axis_values=(1.0, 0.5)),
    dict(axis_values=()),
    dict(trials=0),
    dict(sweep_axis='power'),
    dict(axis_unit='neper'),
    dict(solvers=('zfb', 'magic')),
    dict(snr_pattern=(1.0,)),
    dict(axis_values=(-1.0, 1.0)),
])
def test_spec_validation(kw):
    with pytest.raises(ConfigError):
        _spec(**kw)


def test_db_conversion():
    assert np.allclose(db_to_linear([0.0, 10.0, -10.0]), [1.0, 10.0, 0.1])
    spec = _spec(sweep_axis='snr', axis_values=(0.0, 10.0), axis_unit='dB')
    snr, _ = spec.point(1)
    assert snr.diag == (10.0, 10.0)


def test_matched_sum_rate():
    rho = matched_sum_rate_targets(10.0, 2, 4.0)
    assert rho[0] == 40.0
    assert np.prod(np.add(rho, 1)) == pytest.approx(121.0)
    with pytest.raises(ConfigError):
        matched_sum_rate_targets(10.0, 2, 1e6)


def test_sweep_rows_and_csv():
    rows = run_sweep(_spec(solvers=('zfb', 'nfb', 'lower_bound', 'feasible')))
    assert len(rows) == 12
    text = sweep_csv(rows)
    lines = text.splitlines()
    assert lines[0] == SWEEP_HEADER
    assert all(len(line.split(',')) == 8 for line in lines)
    nfb = [r.mean_power for r in rows if r.solver == 'nfb']
    assert nfb[0] > nfb[1] > nfb[2]
    for r in rows:
        assert r.infeasible_count <= r.trials
        if r.solver == 'zfb':
            assert r.mean_interference < 1e-20


def test_infeasible_trials_counted_not_fatal():
    spec = _spec(scenario=ScenarioConfig(m=5, n=5, p=2, q=2, d=4, snr_targets=(1.0,) * 4),
                 axis_values=(0.01, 1000.0))
    rows = {(r.axis_value, r.solver): r for r in run_sweep(spec)}
    assert rows[(0.01, 'zfb')].infeasible_count == 12
    assert rows[(1000.0, 'nfb')].infeasible_count < 12


def test_ordering_guard_raises():
    with pytest.raises(NumericalFailure):
        _check_ordering(0, 0, {'zfb': (1.0, 0.0), 'nfb': (2.0, 0.0)})


def test_sweep_determinism_across_workers(tmp_path):
    a = sweep_csv(run_sweep(_spec()))
    b = sweep_csv(run_sweep(_spec()))
    c = sweep_csv(run_sweep(_spec(workers=2)))
    assert a == b == c
    out = tmp_path / 'sweep.csv'
    run_sweep(_spec(output_path=str(out)))
    assert out.read_bytes() == a.encode()


def test_access_table():
    c = ScenarioConfig(m=5, n=5, p=2, q=2, d=4, snr_targets=(1.0,) * 4, seed=1)
    rows = run_access_prob(c, (-10.0, 0.0, 10.0, 20.0), 100, axis_unit='dB')
    probs = [r.probability for r in rows]
    assert all(np.diff(probs) >= 0)
    text = access_csv(rows)
    assert text.splitlines()[0] == ACCESS_HEADER
    assert text == access_csv(run_access_prob(c, (-10.0, 0.0, 10.0, 20.0), 100,
                                              axis_unit='dB', workers=2))


def test_solution_round_trip_and_schema(tmp_path):
    config, D = random_instance(7)
    for sol in (solve_zfb(D, config.snr), solve_nfb(D, config.snr, 0.5)):
        path = tmp_path / f'{sol.mode}.json'
        dump_solution(sol, path, config)
        raw = json.loads(path.read_text())
        jsonschema.validate(raw, SOLUTION_SCHEMA)
        back = load_solution(path)
        assert np.array_equal(back['T'], sol.T)
        assert np.array_equal(back['V'], sol.V)
        if sol.mode == 'ZFB':
            assert back['interference'] < 1e-15


def test_channel_file_round_trip(tmp_path):
    c, _ = random_instance(2)
    ch = sample_channels(c, 0)
    write_channels(ch, tmp_path / 'ch.json')
    back = read_channels(tmp_path / 'ch.json')
    for name in ('H', 'H_x', 'G_x'):
        assert np.array_equal(getattr(back, name), getattr(ch, name))
    (tmp_path / 'bad.json').write_text('{"H": 1}')
    with pytest.raises(ConfigError):
        read_channels(tmp_path / 'bad.json')


def test_seed_from_environment(monkeypatch):
    monkeypatch.setenv('COGBEAM_SEED', '77')
    assert default_seed() == 77
    monkeypatch.setenv('COGBEAM_SEED', 'x')
    with pytest.raises(ConfigError):
        default_seed()
