"""Command-line entry point: ``tchm {bands,eigs,metrics,qme-spectrum,sweep}``.

Exit codes: 0 on success, 1 on usage or configuration errors, 2 when a
numerical routine fails.  Every run echoes its resolved parameters to
standard error; numeric output carries 17 significant digits.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import platform
import sys
import tempfile
from pathlib import Path

import numpy as np
import scipy

from . import __version__, kernels
from .analytic import band_table
from .effective import build_h_eff, eigensolve
from .ensemble import (PRESETS, SweepSpec, figure_preset, manifest, result_rows,
                       run_sweep)
from .errors import ConfigError, DimensionGuardError, NumericalError
from .lindblad import (DEFAULT_FOCK_CUTOFF, DEFAULT_MAX_DIMENSION, TruncatedSpace,
                       default_omega_grid, emission_spectra)
from .metrics import classify_bands, participation_report
from .model import (BOUNDARIES, DEFAULT_G_GHZ, SystemParams, format_config, ghz_to_angular,
                    load_config, sample_disorder)

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")

    def exit(self, status=0, message=None):
        if message:
            sys.stderr.write(message)
        raise SystemExit(status)


# --------------------------------------------------------------------------
# output

def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if value is None:
        return ""
    return str(value)


def _json_value(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else repr(v)
    return value


def render_table(columns, rows, fmt, meta=None) -> str:
    if fmt == "json":
        payload = {"columns": list(columns),
                   "rows": [[_json_value(v) for v in row] for row in rows]}
        if meta:
            payload["meta"] = meta
        return json.dumps(payload, indent=1) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_atomic(path, text: str):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(text, output):
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        write_atomic(output, text)


def _echo(title, text):
    sys.stderr.write(f"# {title}\n{text}")
    if not text.endswith("\n"):
        sys.stderr.write("\n")


# --------------------------------------------------------------------------
# parameters

def _resolve_params(args) -> tuple[SystemParams, int]:
    base = {}
    seed = None
    if args.config:
        try:
            cfg = load_config(args.config)
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc.strerror}") from None
        base = {f: getattr(cfg.params, f) for f in cfg.params.__dataclass_fields__}
        seed = cfg.seed
    if args.n is not None:
        base["n_cavities"] = args.n
    if args.m is not None:
        base["emitters_per_cavity"] = args.m
    if "n_cavities" not in base or "emitters_per_cavity" not in base:
        raise UsageError("give --config or both --n and --m")
    if args.g_ghz is not None:
        base["g"] = ghz_to_angular(args.g_ghz)
    base.setdefault("g", ghz_to_angular(DEFAULT_G_GHZ))
    if args.kappa_ghz is not None:
        base["kappa"] = ghz_to_angular(args.kappa_ghz)
    if args.gamma_ghz is not None:
        base["gamma"] = ghz_to_angular(args.gamma_ghz)
    if args.omega_c_ghz is not None:
        base["omega_c"] = ghz_to_angular(args.omega_c_ghz)
    if args.j_over_g is not None:
        base["j_hop"] = args.j_over_g * base["g"]
    elif "j_hop" not in base:
        base["j_hop"] = 0.1 * base["g"]
    if args.boundary is not None:
        base["boundary"] = args.boundary
    if args.delta_ghz is not None and args.delta_over_g_sqrt_m is not None:
        raise UsageError("--delta-ghz and --delta-over-g-sqrt-m are exclusive")
    if args.delta_ghz is not None:
        base["delta"] = ghz_to_angular(args.delta_ghz)
    elif args.delta_over_g_sqrt_m is not None:
        base["delta"] = args.delta_over_g_sqrt_m * base["g"] * math.sqrt(base["emitters_per_cavity"])
    try:
        params = SystemParams(**base)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    if args.seed is not None:
        seed = args.seed
    return params, (0 if seed is None else seed)


def _global_options(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    g = parser.add_argument_group("global options")
    g.add_argument("--config", default=default, help="key = value configuration file")
    g.add_argument("--seed", type=int, default=default, help="disorder / master seed")
    g.add_argument("--format", choices=("csv", "json"), default=default, help="output format")
    g.add_argument("--output", default=default,
                   help="output file ('-' for stdout); a directory for sweep")


def _system_options(parser):
    s = parser.add_argument_group("system (override the config file)")
    s.add_argument("--n", type=int, help="number of cavities N")
    s.add_argument("--m", type=int, help="emitters per cavity M")
    s.add_argument("--j-over-g", type=float, help="hopping ratio J/g (default 0.1)")
    s.add_argument("--g-ghz", type=float, help="coupling g/2pi in GHz")
    s.add_argument("--kappa-ghz", type=float, help="cavity loss kappa/2pi in GHz")
    s.add_argument("--gamma-ghz", type=float, help="emitter decay gamma/2pi in GHz")
    s.add_argument("--omega-c-ghz", type=float, help="cavity frequency omega_c/2pi in GHz")
    s.add_argument("--delta-ghz", type=float, help="disorder width Delta/2pi in GHz")
    s.add_argument("--delta-over-g-sqrt-m", type=float, help="disorder width in units of g sqrt(M)")
    s.add_argument("--boundary", choices=BOUNDARIES)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tchm", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"tchm {__version__}")
    _global_options(parser, suppress=True)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("bands", help="closed-form polariton bands at the allowed momenta")
    _global_options(p, suppress=True)
    p.add_argument("--n", type=int, default=None, help="number of cavities (default 100)")
    p.add_argument("--m", type=int, default=None, help="emitters per cavity (default 1)")
    p.add_argument("--boundary", choices=BOUNDARIES, default=None)
    p.add_argument("--omega0", type=float, default=None, help="resonance (default 4)")
    p.add_argument("--j", type=float, default=None, help="hopping J (default 1)")
    p.add_argument("--g", type=float, default=None, help="coupling g (default 0.2)")

    for name, helptext in (("eigs", "effective-Hamiltonian eigenvalues and node occupancies"),
                           ("metrics", "participation ratios and band labels per eigenstate")):
        p = sub.add_parser(name, help=helptext)
        _global_options(p, suppress=True)
        _system_options(p)

    p = sub.add_parser("qme-spectrum", help="master-equation emission spectra")
    _global_options(p, suppress=True)
    _system_options(p)
    p.add_argument("--pump-cavity", type=int, action="append",
                   help="pumped cavity (repeatable; default every cavity)")
    p.add_argument("--pump-rate", type=float, default=0.01, help="pump rate P/2pi in GHz")
    p.add_argument("--fock-cutoff", type=int, default=DEFAULT_FOCK_CUTOFF)
    p.add_argument("--sum-pumps", action="store_true", help="sum traces over pumped cavities")
    p.add_argument("--probe", action="append",
                   help="element label cav_n or em_n_m, or a sum such as cav_0+cav_1 "
                        "(repeatable; default all)")
    p.add_argument("--omega-min", type=float, help="grid start (rad/ns)")
    p.add_argument("--omega-max", type=float, help="grid end (rad/ns)")
    p.add_argument("--omega-points", type=int, default=4001)
    p.add_argument("--normalize", action="store_true", help="scale each trace to unit maximum")
    p.add_argument("--dt", type=float, help="RK4 step (ns)")
    p.add_argument("--tau-max", type=float, help="correlation cap (ns)")
    p.add_argument("--max-dimension", type=int, default=DEFAULT_MAX_DIMENSION)

    p = sub.add_parser("sweep", help="disorder-ensemble sweep")
    _global_options(p, suppress=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", help=f"one of {', '.join(PRESETS)}")
    src.add_argument("--spec", help="JSON sweep specification")
    p.add_argument("--realizations", type=int)
    p.add_argument("--jobs", type=int, help="worker processes (default $TCHM_JOBS or 1)")
    return parser


# --------------------------------------------------------------------------
# commands

def cmd_bands(args):
    n, m, boundary, omega0, j, g = 100, 1, "open", 4.0, 1.0, 0.2
    if args.config:
        cfg = load_config(args.config)
        p = cfg.params
        n, m, boundary, omega0, j, g = (p.n_cavities, p.emitters_per_cavity, p.boundary,
                                        p.omega_c, p.j_hop, p.g)
    n = args.n if args.n is not None else n
    m = args.m if args.m is not None else m
    boundary = args.boundary or boundary
    omega0 = args.omega0 if args.omega0 is not None else omega0
    j = args.j if args.j is not None else j
    g = args.g if args.g is not None else g
    if n < 1 or m < 0:
        raise UsageError("--n must be >= 1 and --m >= 0")
    _echo("bands", f"n = {n}\nm = {m}\nboundary = {boundary}\nomega0 = {omega0!r}\n"
                   f"j = {j!r}\ng = {g!r}\n")
    try:
        table = band_table(n, m, boundary, omega0, j, g)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    cols = ["k", "e_minus", "e_plus", "photon_weight_minus", "photon_weight_plus"]
    rows = [(b.k, b.e_minus, b.e_plus, b.photon_weight_minus, b.photon_weight_plus)
            for b in table]
    return cols, rows


def _states(args):
    params, seed = _resolve_params(args)
    _echo("resolved parameters", format_config(params, seed))
    r = sample_disorder(params, seed)
    return params, seed, eigensolve(build_h_eff(r))


def cmd_eigs(args):
    params, _, states = _states(args)
    n = params.n_cavities
    cols = (["state_index", "re_energy", "im_energy"]
            + [f"ph_{i}" for i in range(n)] + [f"em_{i}" for i in range(n)])
    rows = [(i, s.energy.real, s.energy.imag, *s.photon, *s.emitter)
            for i, s in enumerate(states)]
    return cols, rows


def cmd_metrics(args):
    params, _, states = _states(args)
    labels = classify_bands(states, params)
    cols = ["state_index", "re_energy", "im_energy", "band",
            "p_n_raw", "p_n_norm", "p_p_raw", "p_p_norm"]
    rows = []
    for i, (s, lab) in enumerate(zip(states, labels)):
        rep = participation_report(s, lab)
        rows.append((i, s.energy.real, s.energy.imag, lab,
                     rep.p_n_raw, rep.p_n_norm, rep.p_p_raw, rep.p_p_norm))
    return cols, rows


def cmd_qme(args):
    params, seed = _resolve_params(args)
    pump_rate = ghz_to_angular(args.pump_rate)
    if pump_rate < 0 or args.fock_cutoff < 1 or args.omega_points < 2:
        raise UsageError("need --pump-rate >= 0, --fock-cutoff >= 1, --omega-points >= 2")
    grid = default_omega_grid(params, args.omega_points)
    lo = args.omega_min if args.omega_min is not None else grid[0]
    hi = args.omega_max if args.omega_max is not None else grid[-1]
    if not hi > lo:
        raise UsageError("--omega-max must exceed --omega-min")
    omega = np.linspace(lo, hi, args.omega_points)
    pumps = args.pump_cavity if args.pump_cavity else list(range(params.n_cavities))
    if any(not 0 <= c < params.n_cavities for c in pumps):
        raise UsageError(f"--pump-cavity must lie in 0..{params.n_cavities - 1}")
    _echo("resolved parameters",
          format_config(params, seed)
          + f"pump_cavities = {','.join(map(str, pumps))}\npump_rate_ghz = {args.pump_rate!r}\n"
          + f"fock_cutoff = {args.fock_cutoff}\nsum_pumps = {str(args.sum_pumps).lower()}\n"
          + f"backend = {kernels.BACKEND}\n")
    valid = TruncatedSpace(params.n_cavities, params.emitters_per_cavity, 1).element_labels()
    unknown = [lab for lab in args.probe or ()
               if not all(part.strip() in valid for part in lab.split("+"))]
    if unknown:
        raise UsageError(f"unknown probe labels {unknown}; valid: {', '.join(valid)}")
    r = sample_disorder(params, seed)
    traces = emission_spectra(r, pump_cavities=pumps, probes=args.probe,
                              pump_rate=pump_rate, fock_cutoff=args.fock_cutoff,
                              sum_pumps=args.sum_pumps, omega=omega,
                              normalize=args.normalize, max_dimension=args.max_dimension,
                              dt=args.dt, tau_max=args.tau_max)
    single = args.sum_pumps or len(pumps) == 1
    cols = ["omega"] + [t.probe if single else f"{t.probe}@{t.pump}" for t in traces]
    data = np.column_stack([omega] + [t.intensity for t in traces])
    return cols, [tuple(row) for row in data]


def _sweep_spec(args) -> SweepSpec:
    if args.preset:
        try:
            spec = figure_preset(args.preset)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    else:
        try:
            spec = SweepSpec.from_dict(json.loads(Path(args.spec).read_text()))
        except OSError as exc:
            raise UsageError(f"cannot read spec {args.spec}: {exc.strerror}") from None
        except (ValueError, TypeError, KeyError) as exc:
            raise UsageError(f"invalid sweep spec {args.spec}: {exc}") from None
    changes = {}
    if args.realizations is not None:
        changes["realizations"] = args.realizations
    if args.seed is not None:
        changes["master_seed"] = args.seed
    try:
        return spec.with_(**changes) if changes else spec
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _axis_column(axis):
    return {"delta": "delta_rad_ns"}.get(axis, axis)


def cmd_sweep(args):
    spec = _sweep_spec(args)
    if args.jobs is not None and args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    out_dir = Path(args.output or f"sweep-{spec.name}")
    _echo("resolved parameters",
          format_config(spec.base, spec.master_seed)
          + f"preset = {spec.name}\naxis = {spec.axis}\nvalues = {list(spec.values)}\n"
          + f"series_axis = {spec.series_axis}\nseries_values = {list(spec.series_values)}\n"
          + f"realizations = {spec.realizations}\nobservables = {list(spec.observables)}\n")
    result = run_sweep(spec, jobs=args.jobs)
    fmt = args.format or "csv"
    cols = [_axis_column(a) for a in spec.series_axes] + [
        _axis_column(spec.axis), "state", "node", "mean", "std", "realizations"]
    files = []
    for obs in result.observable_names():
        rows = []
        for s, v, i, j, mean, std, count in result_rows(result, obs):
            rows.append(spec.series_point(s) + (v, i, j, mean, std, count))
        name = f"{obs}.{fmt}"
        write_atomic(out_dir / name, render_table(cols, rows, fmt))
        files.append(name)
    info = manifest(result)
    info["files"] = files
    info["resolved_config"] = format_config(spec.base, spec.master_seed).splitlines()
    info["versions"] = {"tchm": __version__, "numpy": np.__version__,
                        "scipy": scipy.__version__, "python": platform.python_version(),
                        "kernel_backend": kernels.BACKEND}
    write_atomic(out_dir / "manifest.json", json.dumps(info, indent=1, default=str) + "\n")
    sys.stderr.write(f"wrote {len(files)} observable files and manifest.json to {out_dir}\n")
    return None


COMMANDS = {"bands": cmd_bands, "eigs": cmd_eigs, "metrics": cmd_metrics,
            "qme-spectrum": cmd_qme, "sweep": cmd_sweep}


def _defaults(args):
    for name in ("config", "seed", "format", "output"):
        if not hasattr(args, name):
            setattr(args, name, None)
    return args


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = _defaults(parser.parse_args(argv))
        result = COMMANDS[args.command](args)
        if result is not None:
            cols, rows = result
            emit(render_table(cols, rows, args.format or "csv"), args.output)
    except SystemExit as exc:
        # --help and --version
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_USAGE
    except (ConfigError, DimensionGuardError) as exc:
        sys.stderr.write(f"tchm: error: {exc}\n")
        return EXIT_USAGE
    except NumericalError as exc:
        sys.stderr.write(f"tchm: numerical failure: {exc}\n")
        return EXIT_NUMERICAL
    except OSError as exc:
        sys.stderr.write(f"tchm: error: {exc}\n")
        return EXIT_USAGE
    return EXIT_OK


def main(argv=None):
    sys.exit(dispatch(argv))


if __name__ == "__main__":
    main()
