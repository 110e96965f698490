"""driftfit command line: simulate, ingest, spectrum, fit, roll, lrt."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import ingest as ingest_mod
from .inference import fit, fit_nested
from .model import ModelParams, Variant, model_spectrum, parse_variant, simulate, simulate_fbm
from .rolling import (
    RollingFit,
    lrt_trace,
    rolling_fit,
    tv_spectrogram,
    write_lrt_csv,
    write_rolling_csv,
    write_spectrogram_csv,
)
from .series import ComplexSeries
from .spectral import (
    FrequencyMask,
    expected_periodogram,
    periodogram,
    rad_per_s_to_cpd,
    write_periodogram_csv,
)

_SIDES = {"neg": "negative", "pos": "positive", "both": "both", "auto": "auto"}


class CliError(ValueError):
    pass


def _parse_cutoff(text):
    """'1.75f0' -> multiple of |f0|; a plain number -> rad/s; 'none' -> no cutoff."""
    if text is None:
        return None, None
    text = str(text).strip().lower()
    if text in ("none", ""):
        return None, None
    if text.endswith("f0"):
        return None, float(text[:-2])
    return float(text), None


def _build_mask(args) -> FrequencyMask:
    cutoff, multiple = _parse_cutoff(getattr(args, "cutoff", None))
    return FrequencyMask(
        side=_SIDES[args.side], cutoff=cutoff, cutoff_multiple=multiple
    )


def _load_series(args):
    series, lat = ingest_mod.read_velocity_csv(args.input)
    f0 = args.f0
    if f0 is None and lat is not None:
        f0 = float(ingest_mod.coriolis_frequency(float(np.mean(lat))))
    return series, lat, f0


def _require(args, names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise CliError(
            f"variant {args.variant!r} needs --" + ", --".join(missing)
        )


def _reject_unused(args, names):
    extras = [n for n in names if getattr(args, n) is not None]
    if extras:
        raise CliError(
            f"variant {args.variant!r} does not take --" + ", --".join(extras)
        )


def _simulation_params(args) -> ModelParams | None:
    """Build ModelParams from flags; None means a pure power-law record."""
    name = args.variant.strip().lower()
    if name == "fbm":
        _require(args, ["B", "alpha"])
        _reject_unused(args, ["A", "omega0", "c", "h"])
        return None
    variant = parse_variant(name)
    if variant is Variant.FULL6:
        _require(args, ["A", "B", "omega0", "c", "h", "alpha"])
        return ModelParams.full6(args.A, args.B, args.omega0, args.c, args.h, args.alpha)
    if variant is Variant.FIXED_FREQ5:
        _require(args, ["A", "B", "c", "h", "alpha", "f0"])
        _reject_unused(args, ["omega0"])
        return ModelParams.fixed_freq5(args.A, args.B, args.c, args.h, args.alpha, args.f0)
    if variant is Variant.FBM_BACKGROUND5:
        _require(args, ["A", "B", "omega0", "c", "alpha"])
        _reject_unused(args, ["h"])
        return ModelParams.fbm_background5(args.A, args.B, args.omega0, args.c, args.alpha)
    if variant is Variant.MATERN_ONLY3:
        _require(args, ["B", "h", "alpha"])
        _reject_unused(args, ["A", "omega0", "c"])
        return ModelParams.matern_only3(args.B, args.h, args.alpha)
    _require(args, ["A", "omega0", "c"])
    _reject_unused(args, ["B", "h", "alpha"])
    return ModelParams.ou_only3(args.A, args.omega0, args.c)


def _member_path(out: Path, k: int) -> Path:
    return out.with_name(f"{out.stem}_{k:03d}{out.suffix or '.csv'}")


def cmd_simulate(args) -> int:
    params = _simulation_params(args)
    out = Path(args.out)
    members = args.ensemble or 1
    for k in range(members):
        seed = args.seed + k
        if params is None:
            z = simulate_fbm(args.B, args.alpha, args.n, args.dt, seed=seed)
        else:
            z = simulate(params, args.n, args.dt, seed=seed)
        path = _member_path(out, k) if args.ensemble else out
        ingest_mod.write_velocity_csv(path, z)
    return 0


def cmd_ingest(args) -> int:
    trajectories, errors = ingest_mod.parse_trajectory_csv(args.input)
    for line in errors:
        print(f"warning: {line}", file=sys.stderr)
    pieces = []
    for tr in trajectories:
        for k, seg in enumerate(ingest_mod.positions_to_velocities(tr)):
            pieces.append((tr.id, k, seg))
    out = Path(args.out)
    if len(pieces) == 1:
        _, _, seg = pieces[0]
        ingest_mod.write_velocity_csv(out, seg.series, lat=seg.lat, times=seg.times)
    else:
        for ident, k, seg in pieces:
            path = out.with_name(f"{out.stem}_{ident}_seg{k}{out.suffix or '.csv'}")
            ingest_mod.write_velocity_csv(path, seg.series, lat=seg.lat, times=seg.times)
            print(path)
    return 0


def cmd_spectrum(args) -> int:
    series, _, _ = _load_series(args)
    write_periodogram_csv(periodogram(series), args.out, db=args.db)
    return 0


def _fit_curve(result, pg):
    if result.kind == "blurred":
        return expected_periodogram(result.params, pg.n, pg.dt).values
    return np.asarray(model_spectrum(result.params, pg.freqs))


def cmd_fit(args) -> int:
    series, _, f0 = _load_series(args)
    mask = _build_mask(args)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = fit(series, args.variant, mask=mask, f0=f0, kind=args.kind)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)

    out = Path(args.out)
    out.write_text(result.to_json() + "\n", encoding="utf-8")
    pg = periodogram(series)
    curve = _fit_curve(result, pg)
    idx = set(mask.resolve(pg.freqs, f0=f0).tolist())
    spectrum_path = out.with_name(out.stem + "_spectrum.csv")

    def fmt(v):
        return repr(10.0 * math.log10(v)) if args.db else repr(float(v))

    with open(spectrum_path, "w", encoding="utf-8") as fh:
        fh.write("freq_rad_per_s,freq_cpd,psd_data,psd_model_masked,psd_model_all\n")
        for i, (f, d, m) in enumerate(zip(pg.freqs, pg.values, curve)):
            masked = fmt(m) if i in idx else ""
            data_txt = fmt(d) if d > 0 or not args.db else ""
            fh.write(f"{f!r},{rad_per_s_to_cpd(f)!r},{data_txt},{masked},{fmt(m)}\n")
    return 0


def cmd_roll(args) -> int:
    series, lat, f0 = _load_series(args)
    mask = _build_mask(args)
    window = args.window
    jobs = 1 if args.warm_start else args.jobs
    common = dict(
        lat=lat, f0=f0, window=window, stride=args.stride, mask=mask, kind=args.kind
    )
    trace = None
    if args.null_variant is not None:
        trace = lrt_trace(
            series,
            null_variant=args.null_variant,
            alt_variant=args.variant,
            n_jobs=jobs,
            **common,
        )
        rf = RollingFit(
            centers=trace.centers,
            fits=trace.fits_alt,
            f0_series=np.array(
                [f.f0 if f is not None else np.nan for f in trace.fits_alt], dtype=float
            ),
            window_len=window,
            stride=args.stride,
            series=series,
            skip_reasons=trace.skip_reasons,
        )
    else:
        rf = rolling_fit(
            series, variant=args.variant, warm_start=args.warm_start, n_jobs=jobs, **common
        )
    out = Path(args.out)
    write_rolling_csv(rf, out, lrt=trace)
    freqs, centers, observed, modeled = tv_spectrogram(rf)
    write_spectrogram_csv(freqs, centers, observed, out.with_name(out.stem + "_observed_db.csv"))
    write_spectrogram_csv(freqs, centers, modeled, out.with_name(out.stem + "_model_db.csv"))
    n_bad = sum(1 for f in rf.fits if f is not None and not f.converged)
    if n_bad:
        print(f"warning: {n_bad} windows did not converge", file=sys.stderr)
    return 0


def cmd_lrt(args) -> int:
    series, lat, f0 = _load_series(args)
    mask = _build_mask(args)
    if args.window is None:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            fit0, fit1, res = fit_nested(
                series, args.null, args.alt, mask=mask, f0=f0, kind=args.kind
            )
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        from .inference import chi2_threshold

        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(
                "center_time_s,R,df,p_value,threshold_95,converged_null,converged_alt,note\n"
            )
            t_mid = 0.5 * (series.n - 1) * series.dt
            fh.write(
                f"{float(t_mid)!r},{float(res.statistic)!r},{res.df},{float(res.p_value)!r},"
                f"{float(chi2_threshold(max(res.df, 1)))!r},{fit0.converged},{fit1.converged},"
                f"{res.caveat or ''}\n"
            )
        return 0
    trace = lrt_trace(
        series,
        lat=lat,
        f0=f0,
        window=args.window,
        stride=args.stride,
        null_variant=args.null,
        alt_variant=args.alt,
        mask=mask,
        kind=args.kind,
        n_jobs=args.jobs,
    )
    write_lrt_csv(trace, args.out)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_common(sp, dt=False, mask=False, kind=False):
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    sp.add_argument("--out", required=True, help="output path (or prefix)")
    sp.add_argument("--config", default=None, help="key=value defaults file")
    if dt:
        sp.add_argument("--dt", type=float, default=21600.0, help="sampling interval, seconds")
    if mask:
        sp.add_argument("--side", choices=sorted(_SIDES), default="auto")
        sp.add_argument(
            "--cutoff",
            default="1.75f0",
            help="max |omega|: rad/s, a multiple like '1.75f0', or 'none'",
        )
        sp.add_argument("--f0", type=float, default=None, help="Coriolis frequency, rad/s")
    if kind:
        sp.add_argument("--kind", choices=["blurred", "whittle"], default="blurred")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftfit",
        description=(
            "Model complex drifter velocities as a damped inertial oscillation "
            "plus a Matern turbulent background, fit in the frequency domain."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="generate synthetic velocity records")
    sp.add_argument("--variant", default="full6", help="full6|fixed5|fbm5|matern|ou|fbm")
    for flag in ("A", "B", "omega0", "c", "h", "alpha"):
        sp.add_argument(f"--{flag}", type=float, default=None)
    sp.add_argument("--f0", type=float, default=None, help="pins omega0 for fixed5")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--ensemble", type=int, default=None, help="emit this many member files")
    _add_common(sp, dt=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("ingest", help="positions CSV -> velocity CSV")
    sp.add_argument("input")
    _add_common(sp)
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("spectrum", help="velocity CSV -> periodogram CSV")
    sp.add_argument("input")
    sp.add_argument("--db", action="store_true", help="write psd in decibels")
    _add_common(sp)
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("fit", help="fit one model to a velocity CSV")
    sp.add_argument("input")
    sp.add_argument("--variant", default="full6")
    sp.add_argument("--db", action="store_true", help="spectrum CSV in decibels")
    _add_common(sp, mask=True, kind=True)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("roll", help="rolling-window fits and spectrogram surfaces")
    sp.add_argument("input")
    sp.add_argument("--variant", default="full6")
    sp.add_argument("--null-variant", default=None, help="also trace R against this null")
    sp.add_argument("--window", type=int, default=1000)
    sp.add_argument("--stride", type=int, default=25)
    sp.add_argument("--warm-start", action="store_true")
    _add_common(sp, mask=True, kind=True)
    sp.set_defaults(func=cmd_roll)

    sp = sub.add_parser("lrt", help="likelihood-ratio test of nested variants")
    sp.add_argument("input")
    sp.add_argument("--null", required=True)
    sp.add_argument("--alt", required=True)
    sp.add_argument("--window", type=int, default=None, help="rolling window; omit for one full-series test")
    sp.add_argument("--stride", type=int, default=25)
    _add_common(sp, mask=True, kind=True)
    sp.set_defaults(func=cmd_lrt)

    return parser


def _apply_config(parser, argv):
    """key=value file values become defaults; explicit flags win."""
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config", default=None)
    known, _ = probe.parse_known_args(argv)
    if not known.config:
        return
    defaults = {}
    with open(known.config, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CliError(f"{known.config}:{lineno}: expected key=value")
            key, _, value = line.partition("=")
            defaults[key.strip().replace("-", "_")] = value.strip()
    valid = set()
    for action in parser._subparsers._group_actions[0].choices.values():  # noqa: SLF001
        valid.update(a.dest for a in action._actions)  # noqa: SLF001
    unknown = set(defaults) - valid
    if unknown:
        raise CliError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for action in parser._subparsers._group_actions[0].choices.values():  # noqa: SLF001
        for a in action._actions:  # noqa: SLF001
            if a.dest in defaults:
                raw = defaults[a.dest]
                a.default = a.type(raw) if a.type is not None else raw
                if isinstance(a, argparse._StoreTrueAction):  # noqa: SLF001
                    a.default = raw.lower() in ("1", "true", "yes")


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(
            json.dumps({"error": str(exc), "type": type(exc).__name__}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
