"""Command line driver.

Verbs:

    dcm run       full analysis of one model shape
    dcm dft       periodogram baseline with pre-whitening
    dcm ladder    fit several shapes and cross-compare
    dcm predict   fit early points, judge on withheld ones
    dcm simulate  generate a synthetic series with known truth

Every verb reads a control file of ``key = value`` lines (``#`` starts
a comment line).  Relative paths inside a control file resolve against
the control file's directory.  Exit codes: 0 success, 1 unstable
result (with --strict) or impossible search, 2 data or I/O problem,
3 configuration problem.

Outputs are deterministic: no timestamps, keys sorted, floats written
with shortest round-trip precision.  The worker count never changes
any output byte.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .dft import prewhiten
from .errors import ConfigError, DataError, DcmError, UnstableSearchError
from .gridsearch import SearchConfig
from .model import ModelSpec, eval_model, param_names, signal_values, trend_values
from .pipeline import AnalysisOptions, analyze
from .selection import model_ladder, prediction_test
from .simulate import SimulationSpec, default_filename, model_truth, simulate
from .timeseries import load_series, write_series

__all__ = ["main"]

_CURVE_POINTS = 2001


class Control:
    """Parsed control file with access tracking for unknown-key errors."""

    def __init__(self, path):
        self.path = path
        self.dir = os.path.dirname(os.path.abspath(path))
        self.entries = {}
        self.used = set()
        try:
            fh = open(path, "r", encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot open control file: {exc}") from exc
        with fh:
            for lineno, line in enumerate(fh, start=1):
                text = line.strip()
                if not text or text.startswith("#"):
                    continue
                if "=" not in text:
                    raise ConfigError(
                        f"{path}:{lineno}: expected 'key = value', got {text!r}")
                key, _, value = text.partition("=")
                key = key.strip().lower()
                if key in self.entries:
                    raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
                self.entries[key] = (value.strip(), lineno)

    def get(self, key, conv=str, default=None, required=False):
        if key not in self.entries:
            if required:
                raise ConfigError(f"{self.path}: missing required key {key!r}")
            self.used.add(key)
            return default
        self.used.add(key)
        raw, lineno = self.entries[key]
        try:
            return conv(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(
                f"{self.path}:{lineno}: bad value for {key!r}: {exc}") from None

    def path_of(self, key, default=None, required=False):
        raw = self.get(key, str, default=default, required=required)
        if raw is None:
            return None
        return raw if os.path.isabs(raw) else os.path.join(self.dir, raw)

    def reject_extras(self):
        extras = sorted(set(self.entries) - self.used)
        if extras:
            locs = ", ".join(
                f"{k!r} (line {self.entries[k][1]})" for k in extras)
            raise ConfigError(f"{self.path}: unknown keys: {locs}")


def _to_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _model_list(raw: str) -> list[ModelSpec]:
    specs = []
    for part in raw.split(";"):
        part = part.strip()
        if not part:
            continue
        nums = [p.strip() for p in part.split(",")]
        if len(nums) != 3:
            raise ValueError(f"model shape needs three integers, got {part!r}")
        specs.append(ModelSpec(int(nums[0]), int(nums[1]), int(nums[2])))
    if not specs:
        raise ValueError("empty model list")
    return specs


def _search_config(ctl: Control) -> SearchConfig:
    p_min = ctl.get("pmin", float)
    p_max = ctl.get("pmax", float)
    f_min = ctl.get("fmin", float)
    f_max = ctl.get("fmax", float)
    kw = dict(
        n_long=ctl.get("nlong", int, 200),
        n_short=ctl.get("nshort", int, 200),
        half_width_frac=ctl.get("halfwidth", float, 0.05),
    )
    have_p = p_min is not None or p_max is not None
    have_f = f_min is not None or f_max is not None
    if have_p == have_f:
        raise ConfigError(
            f"{ctl.path}: give exactly one range pair, pmin/pmax or fmin/fmax")
    if have_p:
        if p_min is None or p_max is None:
            raise ConfigError(f"{ctl.path}: pmin and pmax belong together")
        return SearchConfig.from_periods(p_min, p_max, **kw)
    if f_min is None or f_max is None:
        raise ConfigError(f"{ctl.path}: fmin and fmax belong together")
    return SearchConfig(f_min=f_min, f_max=f_max, **kw)


def _options(ctl: Control, args, default_boot=100) -> AnalysisOptions:
    seed = ctl.get("seed", int, 0)
    if args.seed is not None:
        seed = args.seed
    return AnalysisOptions(
        n_boot=ctl.get("nboot", int, default_boot),
        seed=seed,
        refine_rounds=ctl.get("bootstrap_refine", _to_bool, True),
        weighting=ctl.get("weighting", str, None),
    )


def _out_dir(ctl: Control) -> str:
    out = ctl.path_of("out")
    if out is None:
        stem = os.path.splitext(os.path.basename(ctl.path))[0]
        out = os.path.join(ctl.dir, stem + ".out")
    os.makedirs(out, exist_ok=True)
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        obj = obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None if np.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _csv_header(ctl: Control, extra=None):
    lines = [f"# dcmethod {__version__}",
             f"# control = {os.path.basename(ctl.path)}"]
    if extra:
        lines.insert(0, f"# {extra}")
    return lines


def _write_csv(path, header_lines, names, columns):
    columns = [np.asarray(c) for c in columns]
    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(line + "\n")
        fh.write(",".join(names) + "\n")
        for row in zip(*columns):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _write_slices(out, ctl, pg):
    for sl in pg.slices:
        name = f"slice_{pg.stage}_{sl.signal}.csv"
        _write_csv(
            os.path.join(out, name),
            _csv_header(ctl, extra=f"signal={sl.signal} stage={pg.stage}"),
            ["f", "z"], [sl.f, sl.z],
        )


def _signal_dict(rep):
    return {
        "period": rep.period, "amplitude": rep.amplitude,
        "t_max1": rep.t_max1, "t_min1": rep.t_min1,
        "t_max2": rep.t_max2, "t_min2": rep.t_min2,
        "tie": rep.tie,
    }


def _analysis_dict(analysis):
    names = param_names(analysis.spec)
    values = analysis.refined.beta.interleaved(analysis.spec)
    payload = {
        "model": {
            "label": analysis.spec.label, "k1": analysis.spec.k1,
            "k2": analysis.spec.k2, "k3": analysis.spec.k3,
            "eta": analysis.spec.eta,
        },
        "n": analysis.n,
        "weighting": analysis.weighting,
        "span": {
            "t_start": analysis.stats.t_start, "t_end": analysis.stats.t_end,
            "t_mid": analysis.stats.t_mid, "delta_t": analysis.stats.delta_t,
            "f0": analysis.stats.f0, "y_mean": analysis.stats.y_mean,
            "y_std": analysis.stats.y_std,
        },
        "refined": {
            "z": analysis.refined.z, "z_initial": analysis.refined.z_initial,
            "r_sum": analysis.refined.r_sum, "chi2": analysis.refined.chi2,
            "iterations": analysis.refined.iterations,
            "converged": analysis.refined.converged,
            "parameters": dict(zip(names, values)),
        },
        "signals": [_signal_dict(s) for s in analysis.summary.signals],
        "trend": {
            "coefficients": analysis.summary.trend,
            "ranges": analysis.summary.trend_ranges,
        },
    }
    for stage, pg in (("long", analysis.long), ("short", analysis.short)):
        if pg is not None:
            payload[f"search_{stage}"] = {
                "z_min": pg.z_min, "best": pg.best,
                "combinations": pg.combinations,
                "degenerate_hit": pg.degenerate_hit,
            }
    if analysis.boot is not None:
        boot = analysis.boot
        payload["bootstrap"] = {
            "n_rounds": boot.n_rounds, "n_ok": boot.n_ok,
            "failed_rounds": boot.failed_rounds, "seed": boot.seed,
            "grid_step": boot.grid_step, "flags": boot.flags,
            "param_sigma": dict(zip(boot.param_names, boot.param_sigma)),
            "summary_sigma": boot.summary_sigma,
        }
    return payload


def _cmd_run(ctl: Control, args) -> int:
    data = ctl.path_of("data", required=True)
    cfg = _search_config(ctl)
    spec = ModelSpec(
        ctl.get("k1", int, required=True),
        ctl.get("k2", int, required=True),
        ctl.get("k3", int, required=True),
    )
    opts = _options(ctl, args)
    out = _out_dir(ctl)
    ctl.reject_extras()
    ts = load_series(data)
    analysis = analyze(ts, spec, cfg, opts, workers=args.workers)

    payload = _analysis_dict(analysis)
    payload["version"] = __version__
    payload["control"] = os.path.basename(ctl.path)
    payload["data"] = os.path.basename(data)
    payload["search"] = {
        "f_min": cfg.f_min, "f_max": cfg.f_max, "n_long": cfg.n_long,
        "n_short": cfg.n_short, "half_width_frac": cfg.half_width_frac,
    }
    _write_json(os.path.join(out, "params.json"), payload)

    g = ts.y - analysis.refined.residuals
    _write_csv(os.path.join(out, "residuals.csv"), _csv_header(ctl),
               ["t", "y", "model", "residual"],
               [ts.t, ts.y, g, analysis.refined.residuals])

    tgrid = np.linspace(analysis.stats.t_start, analysis.stats.t_end,
                        _CURVE_POINTS)
    beta = analysis.refined.beta
    cols = [tgrid, eval_model(tgrid, spec, beta, analysis.stats),
            trend_values(tgrid, spec, beta, analysis.stats)]
    names = ["t", "model", "trend"]
    for i in range(spec.k1):
        cols.append(signal_values(tgrid, spec, beta, analysis.stats, i))
        names.append(f"signal_{i + 1}")
    _write_csv(os.path.join(out, "curve.csv"), _csv_header(ctl), names, cols)

    for pg in (analysis.long, analysis.short):
        if pg is not None:
            _write_slices(out, ctl, pg)

    if analysis.boot is not None:
        boot = analysis.boot
        names = ["round"] + boot.param_names + ["z"]
        rounds = np.arange(boot.n_ok)
        cols = [rounds] + [boot.draws[:, i] for i in range(boot.draws.shape[1])]
        cols.append(boot.z_draws)
        _write_csv(os.path.join(out, "bootstrap_draws.csv"),
                   _csv_header(ctl), names, cols)

    print(f"run: {spec.label} z = {analysis.z!r} -> {out}")
    if analysis.flags:
        print("flags: " + ", ".join(analysis.flags))
        if args.strict:
            return 1
    return 0


def _cmd_dft(ctl: Control, args) -> int:
    data = ctl.path_of("data", required=True)
    cfg = _search_config(ctl)
    n_signals = ctl.get("signals", int, 1)
    k3 = ctl.get("trend_order", int, 0)
    oversample = ctl.get("oversample", float, 10.0)
    out = _out_dir(ctl)
    ctl.reject_extras()
    ts = load_series(data)
    result = prewhiten(ts, n_signals, cfg, k3=k3, oversample=oversample)
    payload = {
        "version": __version__,
        "control": os.path.basename(ctl.path),
        "data": os.path.basename(data),
        "oversample": oversample,
        "trend": result.trend,
        "passes": [
            {
                "frequency": p.frequency, "period": p.period,
                "amplitude": p.amplitude, "peak_power": p.peak_power,
                "cos_amp": p.cos_amp, "sin_amp": p.sin_amp,
            }
            for p in result.passes
        ],
    }
    _write_json(os.path.join(out, "dft.json"), payload)
    for i, p in enumerate(result.passes, start=1):
        _write_csv(os.path.join(out, f"dft_pass_{i}.csv"),
                   _csv_header(ctl, extra=f"pass={i}"),
                   ["f", "power"], [p.freq_grid, p.power])
    periods = ", ".join(repr(p.period) for p in result.passes)
    print(f"dft: {len(result.passes)} pass(es), periods {periods} -> {out}")
    return 0


def _cmd_ladder(ctl: Control, args) -> int:
    data = ctl.path_of("data", required=True)
    cfg = _search_config(ctl)
    specs = ctl.get("models", _model_list, required=True)
    opts = _options(ctl, args)
    out = _out_dir(ctl)
    ctl.reject_extras()
    ts = load_series(data)
    report = model_ladder(ts, specs, cfg, opts, workers=args.workers)
    payload = {
        "version": __version__,
        "control": os.path.basename(ctl.path),
        "data": os.path.basename(data),
        "best": report.best,
        "ambiguous": report.ambiguous,
        "entries": [
            {
                "label": e.label, "eta": e.eta, "stat": e.stat, "z": e.z,
                "flags": e.flags,
                "parameters": dict(zip(
                    param_names(e.spec),
                    e.analysis.refined.beta.interleaved(e.spec))),
            }
            for e in report.entries
        ],
        "comparisons": [
            {
                "simple": c.simple, "complex": c.complex,
                "eta1": c.eta1, "eta2": c.eta2,
                "stat1": c.stat1, "stat2": c.stat2,
                "f": c.f_value, "qf": c.q_f,
                "verdict": c.verdict, "preferred": c.preferred,
            }
            for c in report.comparisons
        ],
    }
    _write_json(os.path.join(out, "ladder.json"), payload)
    print(f"ladder: best {', '.join(report.best) or '(none)'} -> {out}")
    flagged = [e.label for e in report.entries if e.flags]
    if flagged:
        print("flagged: " + ", ".join(flagged))
        if args.strict:
            return 1
    return 0


def _cmd_predict(ctl: Control, args) -> int:
    data = ctl.path_of("data", required=True)
    cfg = _search_config(ctl)
    specs = ctl.get("models", _model_list, required=True)
    split = ctl.get("split", int)
    split_time = ctl.get("split_time", float)
    if (split is None) == (split_time is None):
        raise ConfigError(f"{ctl.path}: give exactly one of split or split_time")
    window = ctl.get("window", str)
    window_points = ctl.get("window_points", int, 1000)
    if window is not None:
        parts = [p.strip() for p in window.split(",")]
        if len(parts) != 2:
            raise ConfigError(f"{ctl.path}: window must be 't_a, t_b'")
        window = (float(parts[0]), float(parts[1]))
    opts = _options(ctl, args, default_boot=0)
    out = _out_dir(ctl)
    ctl.reject_extras()
    ts = load_series(data)
    reports = prediction_test(
        ts, split if split is not None else split_time, specs, cfg, opts,
        window=window, window_points=window_points, workers=args.workers)
    payload = {
        "version": __version__,
        "control": os.path.basename(ctl.path),
        "data": os.path.basename(data),
        "reports": [
            {
                "label": r.label, "n_fit": r.n_fit, "n_pred": r.n_pred,
                "z_fit": r.z_fit, "z_pred": r.z_pred, "m_pred": r.m_pred,
                "parameters": dict(zip(
                    param_names(r.analysis.spec),
                    r.analysis.refined.beta.interleaved(r.analysis.spec))),
            }
            for r in reports
        ],
    }
    _write_json(os.path.join(out, "predict.json"), payload)
    first = reports[0]
    if first.n_pred:
        rows_t = ts.t[first.n_fit:]
        rows_y = ts.y[first.n_fit:]
        names = ["t", "y"]
        cols = [rows_t, rows_y]
        for r in reports:
            names += [f"model_{r.label}", f"residual_{r.label}"]
            cols += [r.predicted, r.residuals_pred]
        _write_csv(os.path.join(out, "predict_residuals.csv"),
                   _csv_header(ctl), names, cols)
    summary = ", ".join(
        f"{r.label} z_pred={r.z_pred!r}" if r.z_pred is not None else
        f"{r.label} m_pred={r.m_pred!r}" for r in reports)
    print(f"predict: {summary} -> {out}")
    return 0


def _cmd_simulate(ctl: Control, args) -> int:
    seed = ctl.get("seed", int, 0)
    if args.seed is not None:
        seed = args.seed
    sim = SimulationSpec(
        model_id=ctl.get("model", int, required=True),
        n=ctl.get("n", int, required=True),
        sn=ctl.get("sn", float, required=True),
        seed=seed,
    )
    out = ctl.path_of("out")
    ctl.reject_extras()
    if out is None:
        out = ctl.dir
    if os.path.isdir(out) or not os.path.splitext(out)[1]:
        os.makedirs(out, exist_ok=True)
        path = os.path.join(out, default_filename(sim))
    else:
        os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
        path = out
    ts = simulate(sim)
    write_series(path, ts, header=(
        f"model {sim.model_id} n {sim.n} sn {sim.sn:g} seed {sim.seed}"))
    truth = model_truth(sim)
    names = param_names(truth.spec)
    payload = {
        "version": __version__,
        "model": sim.model_id, "n": sim.n, "sn": sim.sn, "seed": sim.seed,
        "sigma": truth.sigma,
        "period_range": list(truth.period_range),
        "spec": {"k1": truth.spec.k1, "k2": truth.spec.k2, "k3": truth.spec.k3},
        "parameters": dict(zip(names, truth.beta.interleaved(truth.spec))),
        "signals": [_signal_dict(s) for s in truth.summary.signals],
    }
    _write_json(os.path.splitext(path)[0] + ".truth.json", payload)
    print(f"simulate: wrote {path}")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "dft": _cmd_dft,
    "ladder": _cmd_ladder,
    "predict": _cmd_predict,
    "simulate": _cmd_simulate,
}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dcm",
        description="Multi-signal period search on unevenly sampled series.")
    parser.add_argument("--version", action="version",
                        version=f"dcm {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, doc in (
        ("run", "full analysis of one model shape"),
        ("dft", "periodogram baseline with pre-whitening"),
        ("ladder", "fit several shapes and cross-compare"),
        ("predict", "fit early points, judge on withheld ones"),
        ("simulate", "generate a synthetic series"),
    ):
        p = sub.add_parser(verb, help=doc)
        p.add_argument("--control", required=True, help="control file path")
        p.add_argument("--workers", type=int, default=1,
                       help="worker threads (never changes results)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the control file seed")
        p.add_argument("--strict", action="store_true",
                       help="exit 1 when instability flags are raised")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return 3
    try:
        ctl = Control(args.control)
        return _COMMANDS[args.verb](ctl, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except UnstableSearchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DcmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
