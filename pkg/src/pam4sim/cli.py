"""Command-line front end: ``pam4sim {simulate,sweep,fading,spectrum}``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

import numpy as np

from . import harness
from .channel import transmit
from .link import _seeds, transmitter
from .metrics import fading_profile, optical_spectrum, write_curve_csv


def _base(args) -> tuple[harness.SweepSpec, str]:
    if args.config and args.preset:
        raise ValueError("give --config or --preset, not both")
    seed = args.seed if args.seed is not None else None
    if args.config:
        spec = harness.sweep_from_config(args.config, args.trials, seed)
        return spec, args.config
    name = args.preset or "paper-80g-btb"
    return harness.preset_sweep(name, args.trials, seed or 0), name


def _summary(result: harness.SweepResult) -> dict:
    pts = []
    for p in result.points():
        row = {
            "value": p.value, "mean_ber": p.mean_ber, "min_ber": p.min_ber, "max_ber": p.max_ber,
            "verdicts": p.verdicts, "failures": p.failures, "seeds": p.seeds,
        }
        pts.append(row)
    return {"param": result.spec.param, "trials": result.spec.trials,
            "master_seed": result.spec.master_seed, "points": pts}


def _write_outputs(result, args):
    out = args.out or result.spec.output
    if out:
        harness.emit_csv(result, out)
    if args.dat:
        harness.emit_dat(result, args.dat)


def cmd_simulate(args) -> dict:
    spec, name = _base(args)
    spec = harness.SweepSpec(None, ("",), spec.trials, spec.base, spec.master_seed)
    result = harness.run_sweep(spec, args.jobs)
    _write_outputs(result, args)
    cells = [c for c in result.cells if not c.failed]
    link = spec.base.link
    out = {
        "source": name,
        "baud": link.baud,
        "fiber_length_m": link.fiber_length,
        "osnr_db": link.osnr_db,
        "emulated_rop_dbm": None if link.osnr_db is None else harness.emulated_rop_dbm(link.osnr_db),
        "alpha": spec.base.dsp.alpha,
        "net_rate_gbps": cells[0].outcome.net_rate / 1e9 if cells else None,
        "bits": sum(c.outcome.bits_compared for c in cells),
        "errors": sum(c.outcome.bit_errors for c in cells),
        "failures": [vars(c.outcome) for c in result.cells if c.failed],
    }
    out["ber"] = out["errors"] / out["bits"] if out["bits"] else None
    out["verdicts"] = (harness.fec_verdicts(out["ber"]) if out["bits"] else None)
    return out


def cmd_sweep(args) -> dict:
    spec, name = _base(args)
    if spec.param is None:
        raise ValueError(f"{name} does not define a sweep")
    result = harness.run_sweep(spec, args.jobs)
    _write_outputs(result, args)
    return {"source": name, **_summary(result)}


def cmd_fading(args) -> dict:
    spec, name = _base(args)
    link = spec.base.link
    length = link.fiber_length if args.length is None else args.length
    f = np.linspace(0.0, args.fmax, args.points)
    prof = fading_profile(length, link.dispersion_D, link.wavelength, f)
    if args.out:
        write_curve_csv(args.out, prof.freq_hz, prof.attenuation_db, "attenuation_db")
    return {"source": name, "fiber_length_m": length, "first_3db_hz": prof.first_3db_hz,
            "first_null_hz": prof.first_null_hz}


def cmd_spectrum(args) -> dict:
    spec, name = _base(args)
    cfg = spec.base
    seed = spec.master_seed
    rng_bits, rng_noise, _ = _seeds(seed)
    tx = transmitter(cfg.link, cfg.layout, seed, cfg.dsp, rng=rng_bits)
    ch = transmit(tx.dac, cfg.link, rng_noise)
    fld = ch.launched if args.point == "launched" else ch.field
    f, _, dbm = optical_spectrum(fld, resolution_nm=args.resolution_nm)
    if args.out:
        write_curve_csv(args.out, f, dbm, "power_dbm")
    peak = float(np.max(dbm))
    return {"source": name, "point": args.point, "resolution_nm": args.resolution_nm,
            "bins": int(len(f)), "peak_dbm": peak}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pam4sim", description="PAM-4 IM/DD link simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--preset", help=f"named preset: {', '.join(sorted(harness.PRESETS))}")
        sp.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
        sp.add_argument("--out", help="output CSV path")
        sp.add_argument("--trials", type=int, help="Monte-Carlo trials per point")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes")

    s = sub.add_parser("simulate", help="single operating point")
    common(s)
    s.add_argument("--dat", help="gnuplot .dat summary path")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep", help="parameter sweep")
    common(s)
    s.add_argument("--dat", help="gnuplot .dat summary path")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("fading", help="dispersion fading curve")
    common(s)
    s.add_argument("--length", type=float, help="fiber length in m (default: config)")
    s.add_argument("--fmax", type=float, default=60e9)
    s.add_argument("--points", type=int, default=601)
    s.set_defaults(func=cmd_fading)

    s = sub.add_parser("spectrum", help="optical power spectrum")
    common(s)
    s.add_argument("--resolution-nm", type=float, default=0.02)
    s.add_argument("--point", choices=("launched", "received"), default="launched")
    s.set_defaults(func=cmd_spectrum)
    return p


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ValueError("--seed must be an unsigned 64-bit integer")
        if args.trials is not None and args.trials < 1:
            raise ValueError("--trials must be >= 1")
        if args.jobs < 1:
            raise ValueError("--jobs must be >= 1")
        out = args.func(args)
    except (ValueError, KeyError, OSError, RuntimeError, ArithmeticError) as exc:
        err = {"status": "error", "command": args.command, "error": type(exc).__name__,
               "message": str(exc).strip("'\"")}
        print(json.dumps(err), file=sys.stderr)
        return 1
    print(json.dumps({"status": "ok", "command": args.command, **out}, default=_jsonable, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
