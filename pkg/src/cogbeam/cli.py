"""
Command-line front end.

Sub-commands::

    cogbeam access-prob   Monte-Carlo secondary access probability vs xi
    cogbeam sweep         mean minimum power vs SNR target or xi
    cogbeam solve         one instance from a channel file
    cogbeam selftest      quick randomized property checks

Options may also come from ``--config FILE``, an INI file with a
``[cogbeam]`` section whose keys are the long option names
(``primary-power = 1``, ``values = 0 0.1 1``).  Command-line flags win.

Exit codes: 0 success, 2 configuration error, 3 infeasible instance,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import shlex
import sys

import numpy as np

from . import __version__
from .errors import (ConfigError, InfeasibleError, InsufficientNullSpace,
                     NumericalFailure, RankError, ToleranceError)
from .experiments import (SOLVERS, SweepSpec, access_csv, db_to_linear,
                          default_seed, dump_solution, read_channels,
                          run_access_prob, run_sweep, solution_record,
                          sweep_csv, write_text)
from .feasibility import xi_min
from .model import ScenarioConfig, build_derived

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_NUMERICAL = 0, 2, 3, 4

log = logging.getLogger('cogbeam')


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _to_linear(values, unit):
    values = [float(v) for v in values]
    if unit == 'dB':
        return [float(v) for v in db_to_linear(values)]
    return values


def _add_scenario(p, d_many=False):
    p.add_argument('--m', type=int, default=5, help='secondary transmit antennas (default 5)')
    p.add_argument('--n', type=int, default=5, help='secondary receive antennas (default 5)')
    p.add_argument('--p', type=int, default=2, help='primary transmit antennas (default 2)')
    p.add_argument('--q', type=int, default=2, help='primary receive antennas (default 2)')
    if d_many:
        p.add_argument('--d', type=int, nargs='+', default=[1],
                       help='stream counts, one table block each')
    else:
        p.add_argument('--d', type=int, default=1, help='data streams (default 1)')
    p.add_argument('--primary-power', type=float, default=1.0,
                   help='primary transmit power, linear (default 1)')
    p.add_argument('--rho', type=float, nargs='+', default=[10.0],
                   help='SNR target(s); one value is repeated for every stream')
    p.add_argument('--snr-unit', choices=('linear', 'dB'), default='linear')
    p.add_argument('--xi', type=float, default=1.0, help='interference cap')
    p.add_argument('--xi-unit', choices=('linear', 'dB'), default='linear')
    p.add_argument('--seed', type=int, default=None,
                   help='RNG seed (default: $COGBEAM_SEED or 0)')


def _add_run(p):
    p.add_argument('--trials', type=int, default=2000)
    p.add_argument('--workers', type=int, default=1,
                   help='worker processes; output does not depend on it')
    p.add_argument('--output', '-o', default=None, help='CSV path (default stdout)')


def build_parser():
    parser = _Parser(prog='cogbeam', description=__doc__.split('\n\n')[0].strip())
    parser.add_argument('--version', action='version', version=__version__)
    parser.add_argument('--config', default=None, help='INI file with a [cogbeam] section')
    parser.add_argument('-v', '--verbose', action='count', default=0)
    sub = parser.add_subparsers(dest='command', required=True, parser_class=_Parser)

    p = sub.add_parser('access-prob', help='access probability vs interference cap')
    _add_scenario(p, d_many=True)
    p.add_argument('--values', type=float, nargs='+', required=True,
                   help='interference caps on the axis')
    p.add_argument('--axis-unit', choices=('linear', 'dB'), default='linear')
    _add_run(p)

    p = sub.add_parser('sweep', help='mean minimum power along an axis')
    _add_scenario(p)
    p.add_argument('--axis', choices=('snr', 'xi'), required=True)
    p.add_argument('--values', type=float, nargs='+', required=True)
    p.add_argument('--axis-unit', choices=('linear', 'dB'), default='linear')
    p.add_argument('--solvers', nargs='+', choices=SOLVERS,
                   default=['zfb', 'nfb', 'lower_bound'])
    p.add_argument('--pattern', type=float, nargs='+', default=None,
                   help='per-stream multipliers of the SNR axis value')
    _add_run(p)

    p = sub.add_parser('solve', help='solve one instance from a channel file')
    p.add_argument('--channels', required=True, help='channel JSON file')
    p.add_argument('--primary-power', type=float, default=1.0)
    p.add_argument('--rho', type=float, nargs='+', required=True)
    p.add_argument('--snr-unit', choices=('linear', 'dB'), default='linear')
    p.add_argument('--xi', type=float, default=0.0)
    p.add_argument('--xi-unit', choices=('linear', 'dB'), default='linear')
    p.add_argument('--solver', choices=('auto', 'zfb', 'nfb'), default='auto',
                   help="auto: zero forcing when xi is 0, otherwise nonzero forcing")
    p.add_argument('--dump', default=None, help='write the solution JSON here')

    p = sub.add_parser('selftest', help='randomized property checks')
    p.add_argument('--trials', type=int, default=50)
    p.add_argument('--seed', type=int, default=None)
    return parser


def _config_argv(path):
    """Translate a ``[cogbeam]`` INI section into argv tokens."""
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not cp.has_section('cogbeam'):
        raise ConfigError(f"{path} has no [cogbeam] section")
    argv = []
    for key, value in cp.items('cogbeam'):
        argv.append('--' + key.replace('_', '-'))
        argv.extend(shlex.split(value.replace(',', ' ')))
    return argv


def parse_args(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument('--config', default=None)
    known, _ = pre.parse_known_args(argv)
    commands = [i for i, tok in enumerate(argv) if tok in COMMANDS]
    if known.config and commands:
        # file options go right after the sub-command so explicit flags win
        at = commands[0] + 1
        argv = argv[:at] + _config_argv(known.config) + argv[at:]
    return build_parser().parse_args(argv)


def _scenario(args, d):
    rho = _to_linear(args.rho, args.snr_unit)
    if len(rho) == 1:
        rho = rho * d
    xi = _to_linear([args.xi], args.xi_unit)[0]
    seed = default_seed() if args.seed is None else args.seed
    return ScenarioConfig(m=args.m, n=args.n, p=args.p, q=args.q, d=d,
                          primary_power=args.primary_power, xi=xi,
                          snr_targets=tuple(rho), seed=seed)


def _emit(text, path):
    if path:
        write_text(path, text)
    else:
        sys.stdout.write(text)


def cmd_access_prob(args):
    rows = []
    for d in args.d:
        config = _scenario(args, d)
        rows.extend(run_access_prob(config, args.values, args.trials,
                                    axis_unit=args.axis_unit, workers=args.workers))
    _emit(access_csv(rows), args.output)
    return EXIT_OK


def cmd_sweep(args):
    spec = SweepSpec(scenario=_scenario(args, args.d), sweep_axis=args.axis,
                     axis_values=tuple(args.values), axis_unit=args.axis_unit,
                     trials=args.trials, solvers=tuple(args.solvers),
                     snr_pattern=None if args.pattern is None else tuple(args.pattern),
                     workers=args.workers)
    _emit(sweep_csv(run_sweep(spec)), args.output)
    return EXIT_OK


def cmd_solve(args):
    from .nfb import solve_nfb
    from .zfb import solve_zfb
    channels = read_channels(args.channels)
    dims = channels.dims
    rho = _to_linear(args.rho, args.snr_unit)
    xi = _to_linear([args.xi], args.xi_unit)[0]
    config = ScenarioConfig(d=len(rho), primary_power=args.primary_power, xi=xi,
                            snr_targets=tuple(rho), **dims)
    derived = build_derived(channels, config)
    report = xi_min(derived, config.snr, xi)
    solver = args.solver
    if solver == 'auto':
        solver = 'zfb' if xi == 0 else 'nfb'
    if solver == 'zfb':
        solution = solve_zfb(derived, config.snr)
    else:
        solution = solve_nfb(derived, config.snr, xi)
    record = solution_record(solution, config)
    summary = {k: record[k] for k in ('mode', 'y', 'power', 'interference',
                                      'per_stream_snr', 'snr_targets', 'xi')}
    summary['xi_min'] = report.xi_min
    print(json.dumps(summary, indent=1))
    if args.dump:
        dump_solution(solution, args.dump, config)
    return EXIT_OK


def cmd_selftest(args):
    from .selftest import run_selftest
    seed = default_seed() if args.seed is None else args.seed
    ok = run_selftest(trials=args.trials, seed=seed)
    return EXIT_OK if ok else 1


COMMANDS = {'access-prob': cmd_access_prob, 'sweep': cmd_sweep,
            'solve': cmd_solve, 'selftest': cmd_selftest}


def main(argv=None):
    try:
        args = parse_args(argv)
    except ConfigError as exc:
        print(f"cogbeam: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose,
                        format='%(levelname)s %(name)s: %(message)s')
    try:
        return COMMANDS[args.command](args)
    except (InfeasibleError, InsufficientNullSpace) as exc:
        print(f"cogbeam: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigError, OSError) as exc:
        print(f"cogbeam: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, ToleranceError, RankError, np.linalg.LinAlgError) as exc:
        print(f"cogbeam: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == '__main__':
    sys.exit(main())
