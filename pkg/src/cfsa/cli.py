"""Command-line entry point.

    cfsa run           --config run.toml [--seed N] [--out DIR] [--threads N]
    cfsa sweep-weights --config run.toml [--step 0.1]
    cfsa audit         --config run.toml
    cfsa gen-fixture   --out fixture.csv [--n 2000 --beta 0.3 ...]

Exit codes: 0 success, 2 config error, 3 data error, 4 pipeline error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from dataclasses import fields
from pathlib import Path

from . import plotting
from .cblist import write_cblist_csv
from .config import load_config
from .ensemble import save_ensemble
from .errors import CFSAError, ConfigError
from .fixtures import FixtureSpec, write_fixture
from .pipeline import audit, fit_all, run, sweep_weights

log = logging.getLogger("cfsa")


class Outputs:
    """Atomic file writes into one directory; `discard` removes what was written."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.written: list[Path] = []

    def path(self, name: str) -> Path:
        return self.root / name

    def _commit(self, name: str, write) -> Path:
        final = self.root / name
        final.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=final.parent, prefix=f".{final.stem}.tmp.", suffix=final.suffix)
        os.close(fd)
        try:
            write(Path(tmp))
            os.replace(tmp, final)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
        self.written.append(final)
        return final

    def text(self, name: str, content: str) -> Path:
        return self._commit(name, lambda p: p.write_text(content, encoding="utf-8"))

    def json(self, name: str, obj) -> Path:
        return self.text(name, json.dumps(obj, indent=2, sort_keys=False, default=_json_default) + "\n")

    def csv(self, name: str, rows: list[dict]) -> Path:
        buf = io.StringIO()
        if rows:
            keys = list(rows[0])
            for r in rows[1:]:
                keys += [k for k in r if k not in keys]
            writer = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
            writer.writeheader()
            for r in rows:
                writer.writerow({k: _csv_cell(r.get(k)) for k in keys})
        return self.text(name, buf.getvalue())

    def figure(self, name: str, draw) -> Path:
        return self._commit(name, lambda p: draw(p))

    def other(self, name: str, write) -> Path:
        return self._commit(name, write)

    def discard(self) -> None:
        for p in reversed(self.written):
            p.unlink(missing_ok=True)
        self.written.clear()


def _json_default(obj):
    if hasattr(obj, "item"):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _csv_cell(v):
    if isinstance(v, dict) and "undefined" in v:
        return f"undefined: {v['undefined']}"
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else v


def _flatten_models(models: list[dict]) -> list[dict]:
    return [{k: (f"undefined: {v['undefined']}" if isinstance(v, dict) else v) for k, v in m.items()}
            for m in models]


def _sample_rows(samples: list[dict]) -> list[dict]:
    rows = []
    for s in samples:
        row = {"model_repeat": s.get("model_repeat", 0), "degree": s["degree"], "repeat": s["repeat"]}
        row.update({k: v for k, v in s.items() if k not in row})
        rows.append(row)
    return rows


def cmd_run(args) -> int:
    cfg = load_config(args.config, seed=args.seed, out_dir=args.out)
    out = Outputs(cfg.out_dir)
    try:
        report, fitted = run(cfg, args.threads)
        for attr in cfg.sensitive:
            out.other(f"cblist_{attr}.csv", lambda p, a=attr: write_cblist_csv(fitted.cblists[a], p))
            out.csv(f"baseline_samples_{attr}.csv", _sample_rows(fitted.samples[attr]))
            out.figure(f"figures/tradeoff_{attr}.png",
                       lambda p, a=attr: plotting.plot_tradeoffs(fitted.baselines[a], report["cells"], a, p))
        manifest = save_ensemble(fitted.ensemble(), out.path("models"))
        out.written.extend(sorted(manifest.parent.glob("*.json")))
        out.csv("cells.csv", report["cells"])
        out.csv("model_metrics.csv", _flatten_models(report["models"]))
        out.json("report.json", report)
    except BaseException:
        out.discard()
        raise
    s = report["summary"]
    print(f"cells: {s['cells']}  beat baseline: {s['beats_baseline']}  "
          f"undefined: {s['undefined_cells']}  report: {out.path('report.json')}")
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, seed=args.seed, out_dir=args.out)
    out = Outputs(cfg.out_dir)
    try:
        fitted = fit_all(cfg, args.threads)
        rows = sweep_weights(fitted, args.step)
        out.csv("sweep.csv", rows)
        out.json("sweep.json", {"config": cfg.to_dict(), "rows": rows})
        out.figure("figures/sweep.png", lambda p: plotting.plot_sweep(rows, p))
    except BaseException:
        out.discard()
        raise
    for r in rows:
        prop = r["beat_proportion"]
        print(f"W=[{r['fairness_weight']:.1f}, {r['performance_weight']:.1f}]  "
              f"beats {r['beats']}/{r['defined']}  ({prop:.2f})" if prop is not None else "n/a")
    return 0


def cmd_audit(args) -> int:
    cfg = load_config(args.config, seed=args.seed, out_dir=args.out)
    out = Outputs(cfg.out_dir)
    try:
        result = audit(cfg, args.threads)
        stats_rows = []
        for attr, info in result["attributes"].items():
            out.other(f"cblist_{attr}.csv", lambda p, a=attr: write_cblist_csv(result["cblists"][a], p))
            for cell, pct in info["summary_stats"].items():
                stats_rows.append({"attribute": attr, "cell": cell, "percent": pct})
        out.csv("summary_stats.csv", stats_rows)
        doc = {k: v for k, v in result.items() if k != "cblists"}
        out.json("audit.json", doc)
    except BaseException:
        out.discard()
        raise
    for attr, info in result["attributes"].items():
        print(f"{attr}: {info['flipping_rows']} flipping rows, p95 CBTest {info['cbtest_p95']:.3f}")
    return 0


def cmd_gen_fixture(args) -> int:
    values = {}
    for f in fields(FixtureSpec):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    if args.seed is not None:
        values["seed"] = args.seed
    spec = FixtureSpec(**values)
    path = Path(args.out)
    if path.suffix.lower() != ".csv":
        path.mkdir(parents=True, exist_ok=True)
        path = path / "fixture.csv"
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
    data_path, truth_path = write_fixture(spec, path)
    print(f"wrote {data_path} and {truth_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfsa", description="Counterfactual bias mitigation pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="TOML or JSON run configuration")
        p.add_argument("--seed", type=int, default=None, help="override the configured seed")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
        p.add_argument("--out", default=None, help="output directory")

    p = sub.add_parser("run", help="full pipeline and trade-off report")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep-weights", help="re-weight the ensemble over a grid")
    common(p)
    p.add_argument("--step", type=float, default=None, help="weight grid step (default from config, 0.1)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("audit", help="bias list and subgroup distribution")
    common(p)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("gen-fixture", help="write a synthetic biased dataset and its ground truth")
    common(p, config=False)
    for f in fields(FixtureSpec):
        if f.name != "seed":
            p.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, type=type(f.default), default=None)
    p.set_defaults(func=cmd_gen_fixture)
    return parser


def configure_logging() -> None:
    level = os.environ.get("CFSA_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None) -> int:
    configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "gen-fixture" and args.out is None:
        parser.error("gen-fixture requires --out")
    try:
        return args.func(args)
    except CFSAError as exc:
        where = getattr(exc, "stage", "config" if isinstance(exc, ConfigError) else None)
        tag = f" [stage={where}]" if where else ""
        print(f"cfsa: error{tag}: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"cfsa: error [stage={getattr(exc, 'stage', 'load')}]: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
