"""Command-line front end.

Every command writes UTF-8 JSON (and CSV where tabular data exists). The JSON
carries a ``config`` block with the fully resolved settings; feeding those
settings back reproduces the output byte for byte. Worker count and output
paths are left out of the echo because they never change results.

Exit codes: 0 success, 1 failed test or pattern, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import os
from pathlib import Path
import sys

from .analog.pulses import PulseTrain, detect_pulses
from .analog.solver import SolverConfig, SolverError, transient
from .analog import traces
from .margin_lab.margins import (
    Criterion,
    adr_grid,
    anneal_whatif,
    cancelling_anneal_factor,
    find_margins,
    sweep_temperature,
)
from .margin_lab.patterns import pattern_for
from .margin_lab.pcm import FitError, IVCurve, VPhiCurve, extract_ic, extract_inductance, read_two_column_csv
from .margin_lab.targets import AnalogTarget, BehavioralTarget
from .netlist.builders import CIRCUIT_KINDS, attach_stimulus, build_circuit, stimulus_span
from .netlist.flatten import flatten
from .netlist.grammar import NetlistError, parse
from .netlist.library import default_library
from .pulse_logic.circuit import elaborate
from .pulse_logic.errors import ErrorModel
from .pulse_logic.simulate import simulate

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

# never echoed: they select where output goes or how fast it is produced
_NOT_ECHOED = {"command", "pcm_command", "config", "jobs", "json", "csv", "traces", "pulses", "func"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _default_seed() -> int:
    raw = os.environ.get("SFQLAB_SEED")
    if raw is None or raw.strip() == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"SFQLAB_SEED must be an integer, got {raw!r}") from None


def read_config(path: str) -> dict[str, str]:
    """Plain ``key = value`` lines; ``#`` starts a comment. Keys use flag names."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot read config {path}: {e.strerror}") from None
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _target_args(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--circuit", choices=CIRCUIT_KINDS, help="built-in circuit kind")
    g.add_argument("--netlist", help="netlist file (top level made of library cells)")
    p.add_argument("--mode", choices=("behavioral", "analog"), default="behavioral")
    p.add_argument("--bits", type=int, help="prog_counter register width")
    p.add_argument("--m", type=int, help="prog_counter count value")
    p.add_argument("--n-out", type=int, help="dmx output count")
    p.add_argument("--stages", type=int, help="sd_chain JTL stages")
    p.add_argument("--jitter-seed", type=int, help="seed for per-cell window jitter (default: nominal windows)")
    p.add_argument("--jitter", type=float, help="window jitter sigma as a fraction of width")
    p.add_argument("--edge-shift", action="store_true", help="apply the calibrated kappa edge shifts")
    p.add_argument("--anneal-factor", type=float, default=1.0, help="Ic multiplier applied before the run")
    p.add_argument("--dt", type=float, default=0.1e-12, help="analog time step (s)")
    p.add_argument("--seed", type=int, help="master seed (default: $SFQLAB_SEED or 0)")
    p.add_argument("--config", help="key=value file; flags override it")


def _criterion_args(p):
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--max-error", type=float, default=0.10, help="a point passes below this error rate")
    p.add_argument("--early-stop", action="store_true", help="stop trials once a point's verdict is settled")
    p.add_argument("--range", type=float, nargs=2, default=(0.5, 2.0), metavar=("LO", "HI"))
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--resolution", type=float, default=0.0025)
    p.add_argument("--jobs", type=int, default=1)


def _out_args(p, csv: bool = True):
    p.add_argument("--json", help="write the JSON report here instead of stdout")
    if csv:
        p.add_argument("--csv", help="write the CSV table here")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="sfqlab", description="Temperature-aware SFQ circuit simulation and margin measurement.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sim", help="one analog or behavioral run; dumps traces and pulse trains")
    _target_args(p)
    p.add_argument("--temp", type=float, default=4.2)
    p.add_argument("--beta", type=float, default=1.0, help="global bias scale")
    p.add_argument("--stimulus", help="pulse CSV (port,time); default: the circuit's standard pattern")
    p.add_argument("--tstop", type=float, help="analog stop time (s)")
    p.add_argument("--no-noise", action="store_true", help="disable thermal noise in analog runs")
    p.add_argument("--traces", help="analog traces: .csv or .bin")
    p.add_argument("--pulses", help="pulse CSV of the observed outputs")
    _out_args(p, csv=False)
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("margins", help="bias margins at one temperature")
    _target_args(p)
    _criterion_args(p)
    p.add_argument("--temp", type=float, default=4.2)
    _out_args(p)
    p.set_defaults(func=cmd_margins)

    p = sub.add_parser("tsweep", help="margins over a temperature grid")
    _target_args(p)
    _criterion_args(p)
    p.add_argument("--tmin", type=float, default=0.1)
    p.add_argument("--tmax", type=float, default=4.2)
    p.add_argument("--tstep", type=float, default=0.1)
    p.add_argument("--points-csv", help="write every evaluated bias point here")
    _out_args(p)
    p.set_defaults(func=cmd_tsweep)

    p = sub.add_parser("pattern", help="run the dmx rotation or counter pattern once")
    _target_args(p)
    p.add_argument("--temp", type=float, default=4.2)
    p.add_argument("--beta", type=float, default=1.0)
    _out_args(p, csv=False)
    p.set_defaults(func=cmd_pattern)

    p = sub.add_parser("anneal", help="margins before and after an Ic-reducing anneal")
    _target_args(p)
    _criterion_args(p)
    p.add_argument("--temp", type=float, default=0.01)
    p.add_argument("--factor", type=float, help="Ic multiplier (default: 1/r at --temp)")
    _out_args(p)
    p.set_defaults(func=cmd_anneal)

    p = sub.add_parser("pcm", help="process-monitor fitters")
    psub = p.add_subparsers(dest="pcm_command", required=True, parser_class=_Parser)
    q = psub.add_parser("fit-ic", help="critical current from an IV sweep (current,voltage CSV)")
    q.add_argument("--in", dest="input", required=True)
    q.add_argument("--n-series", type=int, default=1)
    q.add_argument("--threshold", type=float, default=10e-6, help="voltage per junction (V)")
    _out_args(q, csv=False)
    q.set_defaults(func=cmd_fit_ic)
    q = psub.add_parser("fit-ind", help="inductance from a SQUID V-phi sweep (coil current,voltage CSV)")
    q.add_argument("--in", dest="input", required=True)
    _out_args(q, csv=False)
    q.set_defaults(func=cmd_fit_ind)

    p = sub.add_parser("selftest", help="run the acceptance suite")
    p.add_argument("--only", type=int, nargs="*", help="criterion numbers to run")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_selftest)
    return ap


def _subparser(ap: argparse.ArgumentParser, names: list[str]) -> argparse.ArgumentParser:
    p = ap
    for name in names:
        action = next(a for a in p._actions if isinstance(a, argparse._SubParsersAction))
        p = action.choices[name]
    return p


def _apply_config(ap, argv):
    """Re-parse with the config file's values installed as defaults."""
    args = ap.parse_args(argv)
    path = getattr(args, "config", None)
    if not path:
        return args
    cfg = read_config(path)
    p = _subparser(ap, [args.command] + ([args.pcm_command] if args.command == "pcm" else []))
    known = {a.dest: a for a in p._actions}
    defaults = {}
    for k, v in cfg.items():
        a = known.get(k)
        if a is None or k in ("config", "help"):
            raise UsageError(f"{path}: unknown key {k!r}")
        if a.nargs == 0:
            defaults[k] = v.lower() in ("1", "true", "yes", "on")
        elif a.nargs:
            defaults[k] = tuple((a.type or str)(x) for x in v.split())
        else:
            defaults[k] = (a.type or str)(v)
        if a.choices is not None and defaults[k] not in a.choices:
            raise UsageError(f"{path}: {k} must be one of {', '.join(map(str, a.choices))}")
    p.set_defaults(**defaults)
    return ap.parse_args(argv)


def resolved_config(args) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_ECHOED}
    return {k: list(v) if isinstance(v, tuple) else v for k, v in cfg.items()}


def _circuit_params(args) -> dict:
    params = {}
    if args.circuit == "prog_counter" and args.bits is not None:
        params["n_bits"] = args.bits
    if args.circuit == "dmx" and args.n_out is not None:
        params["n_out"] = args.n_out
    if args.circuit == "sd_chain" and args.stages is not None:
        params["stages"] = args.stages
    return params


def _pattern_params(args) -> dict:
    out = {}
    if args.circuit == "prog_counter":
        out["m"] = 8 if args.m is None else args.m
        out["n_bits"] = 8 if args.bits is None else args.bits
    if args.circuit == "dmx" and args.n_out is not None:
        out["n_out"] = args.n_out
    return out


def _netlist(args, lib):
    if args.netlist:
        try:
            return parse(Path(args.netlist).read_text(encoding="utf-8"), lib)
        except OSError as e:
            raise UsageError(f"cannot read netlist {args.netlist}: {e.strerror}") from None
    if not args.circuit:
        raise UsageError("one of --circuit or --netlist is required")
    return build_circuit(args.circuit, lib, **_circuit_params(args))


def _model(args) -> ErrorModel:
    return ErrorModel(anneal_factor=args.anneal_factor, edge_shift=args.edge_shift)


def _target(args):
    lib = default_library()
    n = _netlist(args, lib)
    if args.mode == "analog":
        return AnalogTarget(n, lib, dt=args.dt, anneal_factor=args.anneal_factor)
    bc = elaborate(n, lib, args.jitter_seed, args.jitter)
    return BehavioralTarget(bc, _model(args))


def _pattern(args):
    if not args.circuit:
        raise UsageError("margin commands need --circuit (its standard test pattern is used)")
    return pattern_for(args.circuit, **_pattern_params(args))


def _criterion(args) -> Criterion:
    return Criterion(args.max_error, args.trials, args.early_stop)


def _margin_kw(args) -> dict:
    return dict(sweep_range=tuple(args.range), step=args.step, resolution=args.resolution)


def _write(path: str | None, text: str):
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _emit_json(args, payload: dict):
    payload = dict(payload)
    payload["config"] = resolved_config(args)
    _write(args.json, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def cmd_margins(args) -> int:
    rep = find_margins(_target(args), _pattern(args), args.temp, _criterion(args), args.seed, jobs=args.jobs, **_margin_kw(args))
    _emit_json(args, rep.to_dict())
    if args.csv:
        _write(args.csv, rep.to_csv())
    return EXIT_OK


def cmd_tsweep(args) -> int:
    if not 0 < args.tmin <= args.tmax or args.tstep <= 0:
        raise UsageError("need 0 < tmin <= tmax and tstep > 0")
    temps = adr_grid(args.tmin, args.tmax, args.tstep)
    series = sweep_temperature(_target(args), _pattern(args), temps, _criterion(args), args.seed, args.jobs, **_margin_kw(args))
    if args.csv is None and args.json is None:
        _write(None, series.summary_csv())
    else:
        if args.csv:
            _write(args.csv, series.summary_csv())
        if args.json:
            _emit_json(args, series.to_dict())
    if args.points_csv:
        _write(args.points_csv, series.to_csv())
    return EXIT_OK


def cmd_anneal(args) -> int:
    factor = cancelling_anneal_factor(args.temp) if args.factor is None else args.factor
    if not 0 < factor <= 1:
        raise UsageError("--factor must lie in (0, 1]")
    res = anneal_whatif(_target(args), factor, _pattern(args), args.temp, _criterion(args), args.seed, jobs=args.jobs, **_margin_kw(args))
    _emit_json(args, res.to_dict())
    if args.csv:
        _write(args.csv, res.before.to_csv() + res.after.to_csv().split("\r\n", 1)[1])
    return EXIT_OK


def cmd_pattern(args) -> int:
    if args.circuit not in ("dmx", "prog_counter"):
        raise UsageError("pattern runs --circuit dmx or --circuit prog_counter")
    target = _target(args)
    pat = _pattern(args)
    pat.check_ports(target.ports)
    if args.mode == "analog":
        outcome = target.run_trials(pat, args.beta, args.temp, [args.seed])[0]
        counts = None
    else:
        em = target.model.at(bias_scale=args.beta, temperature=args.temp)
        res = simulate(target.circuit, pat.stimuli, em, args.seed)
        outcome = pat.evaluate(res.outputs)
        if res.aborted:
            outcome = type(outcome)(False, outcome.missing, outcome.extraneous)
        counts = {p: res.outputs.count(p) for p in sorted(pat.expected_totals())}
    payload = {
        "schema": "sfqlab.pattern_run",
        "pattern": pat.name,
        "passed": outcome.passed,
        "missing_pulses": outcome.missing,
        "extraneous_pulses": outcome.extraneous,
        "expected": dict(sorted(pat.expected_totals().items())),
        "observed": counts,
    }
    _emit_json(args, payload)
    print("PASS" if outcome.passed else "FAIL", pat.name, file=sys.stderr)
    return EXIT_OK if outcome.passed else EXIT_FAIL


def _stimulus(args, ports) -> PulseTrain:
    if args.stimulus:
        try:
            train = PulseTrain.from_csv(Path(args.stimulus).read_text(encoding="utf-8"))
        except OSError as e:
            raise UsageError(f"cannot read stimulus {args.stimulus}: {e.strerror}") from None
        except ValueError as e:
            raise UsageError(f"{args.stimulus}: {e}") from None
        return train
    if not args.circuit:
        raise UsageError("--stimulus is required with --netlist")
    return _pattern(args).stimuli


def cmd_sim(args) -> int:
    lib = default_library()
    n = _netlist(args, lib)
    payload = {"schema": "sfqlab.sim_run", "mode": args.mode}
    if args.mode == "behavioral":
        if args.traces:
            raise UsageError("--traces needs --mode analog")
        bc = elaborate(n, lib, args.jitter_seed, args.jitter)
        stim = _stimulus(args, bc.ports)
        em = _model(args).at(bias_scale=args.beta, temperature=args.temp)
        res = simulate(bc, stim, em, args.seed)
        out = res.outputs
        payload.update(
            operations=res.operations,
            dropped=res.dropped,
            extraneous=res.extraneous,
            thermal_errors=res.thermal_errors,
            aborted=res.aborted,
        )
    else:
        stim = _stimulus(args, n.port_decls)
        nn = attach_stimulus(n, stim.events, lib)
        fc = flatten(nn, lib)
        times = [t for ts in stim.events.values() for t in ts]
        t_stop = args.tstop or stimulus_span(times)
        cfg = SolverConfig(
            t_stop=t_stop,
            dt=args.dt,
            temperature=args.temp,
            bias_scale=args.beta,
            noise_enabled=not args.no_noise and args.temp > 0,
            seed=args.seed,
        )
        tr = transient(fc, cfg)
        out = detect_pulses(tr)
        payload.update(steps=len(tr.time) - 1, t_stop=t_stop, final_slips={k: int(s) for k, s in zip(tr.junction_names, tr.final_slips)})
        if args.traces:
            if args.traces.endswith(".bin"):
                Path(args.traces).write_bytes(traces.to_binary(tr))
            else:
                _write(args.traces, traces.to_csv(tr))
    payload["pulse_counts"] = dict(sorted(out.counts().items()))
    if args.pulses:
        _write(args.pulses, out.to_csv())
    _emit_json(args, payload)
    return EXIT_OK


def _read_curve(path: str):
    try:
        return read_two_column_csv(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None
    except ValueError as e:
        raise UsageError(f"{path}: {e}") from None


def cmd_fit_ic(args) -> int:
    i, v = _read_curve(args.input)
    ic = extract_ic(IVCurve(i, v, args.n_series), args.threshold)
    _emit_json(args, {"schema": "sfqlab.fit_ic", "ic_A": ic})
    return EXIT_OK


def cmd_fit_ind(args) -> int:
    i, v = _read_curve(args.input)
    ind = extract_inductance(VPhiCurve(i, v))
    _emit_json(args, {"schema": "sfqlab.fit_inductance", "inductance_H": ind})
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .acceptance import run_all

    results = run_all(args.only, jobs=args.jobs)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        args = _apply_config(ap, argv)
        if hasattr(args, "seed") and args.seed is None:
            args.seed = _default_seed()
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be >= 1")
        return args.func(args)
    except SystemExit as e:  # --help
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except FitError as e:
        print(f"fit failed: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (NetlistError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as e:
        print(f"solver failed: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    raise SystemExit(main())
