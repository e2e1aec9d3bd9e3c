"""Command-line front end: KB checking, experiments, sweeps, figure repro.

Exit codes for ``check``: 0 ok, 1 parse error, 2 load error.  Diagnostics go
to stderr; report lines and human summaries go to stdout; CSV data goes to
files only.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import jkb, sim
from .kb import KbError, Provenance

SUMMARY_NOTE = (
    "figure reproduction targets trend properties, not point values;"
    " the source plots publish no numeric tables"
)

FIGURES = ("fig3", "fig4", "fig5", "fig6")

FIG4_LOSSES = (0.25, 0.5, 0.75)
FIG5_SIZES = (5, 10, 50, 100, 500, 1000)
FIG6_LOSSES = (0.5, 0.75)
FIG6_RHOS = (0.25, 0.5, 1.0)
FIG6_GROUP_SIZE = 50


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (sim.InvalidConfig, sim.FixtureError, sim.DisconnectedAfterRetries) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="beliefsync",
        description="Justification-based belief consistency for node groups:"
        " check knowledge bases, run belief-exchange simulations.",
    )
    sub = parser.add_subparsers(required=True)

    check = sub.add_parser("check", help="parse a .jkb file and report datum states")
    check.add_argument("kb_path", help=".jkb knowledge base file")
    check.add_argument(
        "--generated",
        action="append",
        default=[],
        metavar="JUSTIFICATION",
        help="mark a justification as locally generated (repeatable)",
    )
    check.add_argument(
        "--received",
        action="append",
        default=[],
        metavar="JUSTIFICATION",
        help="mark a justification as received from a peer (repeatable)",
    )
    check.set_defaults(func=_cmd_check)

    simulate = sub.add_parser("simulate", help="run one experiment configuration")
    _add_config_options(simulate)
    simulate.set_defaults(func=_cmd_simulate)

    sweep = sub.add_parser("sweep", help="run an experiment across an axis")
    _add_config_options(sweep)
    sweep.add_argument("--axis", choices=sim.AXES, help="swept config field")
    sweep.add_argument(
        "--values", help="comma-separated axis values, e.g. 4,6,8,10"
    )
    sweep.set_defaults(func=_cmd_sweep)

    reproduce = sub.add_parser(
        "reproduce", help="rebuild one of the four reference experiments"
    )
    reproduce.add_argument("figure", choices=FIGURES)
    reproduce.add_argument("--out", default=None, help="output directory")
    reproduce.add_argument("--seed", type=int, default=42)
    reproduce.add_argument(
        "--runs", type=int, default=10, help="repetitions per configuration"
    )
    reproduce.set_defaults(func=_cmd_reproduce)

    return parser


def _add_config_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="experiment config file (key = value lines)")
    parser.add_argument("--out", default=".", help="output directory for CSV files")
    parser.add_argument("--trace", action="store_true", help="write trace.log")
    for field, kind in (
        ("group_size", int),
        ("seed", int),
        ("topology", str),
        ("degree", int),
        ("strategy", str),
        ("rho", float),
        ("backoff", int),
        ("loss_prob", float),
        ("delay", int),
        ("crash_prob", float),
        ("runs", int),
        ("kb_fixture", str),
        ("target_datum", str),
        ("changed_justification", str),
    ):
        parser.add_argument(
            f"--{field.replace('_', '-')}", dest=field, type=kind, default=None
        )


def _cmd_check(args) -> int:
    try:
        text = Path(args.kb_path).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        program = jkb.parse_program(text)
    except (jkb.ParseError, jkb.IncoherentRulePair) as exc:
        print(f"error: {args.kb_path}: {exc}", file=sys.stderr)
        return 1
    try:
        kb = jkb.load(program)
        for name in args.generated:
            kb.set_presence(name, Provenance.generated())
        for name in args.received:
            kb.set_presence(name, Provenance.received(jkb.FILE_SOURCE))
    except KbError as exc:
        print(f"error: {args.kb_path}: {exc}", file=sys.stderr)
        return 2
    for line in jkb.report_lines(kb):
        print(line)
    return 0


def _gather_config(args) -> sim.ExperimentConfig:
    overrides = {
        field.name: getattr(args, field.name, None)
        for field in dataclasses.fields(sim.ExperimentConfig)
    }
    if args.config:
        return sim.load_config(args.config, **overrides)
    values = {k: v for k, v in overrides.items() if v is not None}
    if "group_size" not in values:
        raise sim.InvalidConfig("group_size is required (flag or config file)")
    cfg = sim.ExperimentConfig(**values)
    cfg.validate()
    return cfg


def _run_and_write(cfg, axis, values, out_dir: Path, prefix: str, trace: bool) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_lines: list[str] = []
    if axis is None:
        sink = trace_lines.append if trace else None
        rows = [(getattr(cfg, "group_size"), sim.run_experiment(cfg, trace=sink))]
        axis = "group_size"
    else:
        if trace:
            raise sim.InvalidConfig("--trace applies to single experiments only")
        rows = sim.sweep(cfg, axis, values)
    sim.write_results_csv(out_dir / f"{prefix}.csv", axis, rows)
    sim.write_summary_csv(
        out_dir / f"{prefix}.summary.csv", axis, rows, note=SUMMARY_NOTE
    )
    if trace_lines:
        (out_dir / "trace.log").write_text(
            "\n".join(trace_lines) + "\n", encoding="utf-8"
        )
    for axis_value, metrics in rows:
        print(
            f"{axis}={axis_value}: mean messages_sent="
            f"{metrics.mean('messages_sent'):.1f}"
            f" mean coherent_fraction={metrics.mean('coherent_fraction'):.3f}"
            f" over {len(metrics.runs)} runs"
        )


def _cmd_simulate(args) -> int:
    cfg = _gather_config(args)
    _run_and_write(cfg, None, None, Path(args.out), "results", args.trace)
    return 0


def _cmd_sweep(args) -> int:
    cfg = _gather_config(args)
    axis, values = args.axis, args.values
    if args.config and (axis is None or values is None):
        _, extras = sim.parse_config_text(
            Path(args.config).read_text(encoding="utf-8")
        )
        axis = axis or extras.get("axis")
        values = values or extras.get("values")
    if axis is None or values is None:
        raise sim.InvalidConfig("sweep needs --axis and --values (flag or config)")
    value_list = [v.strip() for v in str(values).split(",") if v.strip()]
    _run_and_write(cfg, axis, value_list, Path(args.out), f"sweep_{axis}", False)
    return 0


def _cmd_reproduce(args) -> int:
    out_dir = Path(args.out) if args.out else Path(f"reproduce_{args.figure}")
    out_dir.mkdir(parents=True, exist_ok=True)
    base = sim.ExperimentConfig(group_size=4, seed=args.seed, runs=args.runs)

    if args.figure == "fig3":
        # Message cost of flooding as the group grows, fault-free.
        cfg = dataclasses.replace(base, strategy="unbridled", loss_prob=0.0)
        rows = sim.sweep(cfg, "group_size", list(range(4, 15)))
        _write_figure(out_dir, "fig3", [("fig3", "group_size", rows)])
    elif args.figure == "fig4":
        # Coherent fraction of small fully-meshed groups under message loss.
        curves = []
        for loss in FIG4_LOSSES:
            cfg = dataclasses.replace(
                base, strategy="unbridled", topology="complete", loss_prob=loss
            )
            rows = sim.sweep(cfg, "group_size", list(range(4, 15)))
            curves.append((f"fig4_loss{loss}", "group_size", rows))
        _write_figure(out_dir, "fig4", curves)
    elif args.figure == "fig5":
        # Message cost of backoff-controlled replication at scale.
        cfg = dataclasses.replace(
            base, strategy="controlled", rho=1.0, backoff=3, loss_prob=0.0
        )
        rows = sim.sweep(cfg, "group_size", list(FIG5_SIZES))
        _write_figure(out_dir, "fig5", [("fig5", "group_size", rows)])
    else:
        # Coherence of controlled replication vs the proliferation constant.
        curves = []
        for loss in FIG6_LOSSES:
            cfg = dataclasses.replace(
                base,
                strategy="controlled",
                backoff=3,
                group_size=FIG6_GROUP_SIZE,
                loss_prob=loss,
            )
            rows = sim.sweep(cfg, "rho", list(FIG6_RHOS))
            curves.append((f"fig6_loss{loss}", "rho", rows))
        _write_figure(out_dir, "fig6", curves)

    print(f"wrote {args.figure} CSVs and plot script to {out_dir}")
    return 0


def _write_figure(out_dir: Path, figure: str, curves) -> None:
    for prefix, axis, rows in curves:
        sim.write_results_csv(out_dir / f"{prefix}.csv", axis, rows)
        sim.write_summary_csv(
            out_dir / f"{prefix}.summary.csv", axis, rows, note=SUMMARY_NOTE
        )
    (out_dir / f"plot_{figure}.py").write_text(
        _plot_script(figure, [prefix for prefix, _, _ in curves]),
        encoding="utf-8",
    )


_PLOT_TEMPLATE = '''\
#!/usr/bin/env python3
"""Render {figure}.png from the summary CSVs next to this script."""

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = Path(__file__).parent
PREFIXES = {prefixes}
METRIC = "{metric}"
YLABEL = "{ylabel}"

fig, ax = plt.subplots(figsize=(6, 4))
for prefix in PREFIXES:
    xs, ys, errs = [], [], []
    with open(HERE / (prefix + ".summary.csv"), encoding="utf-8") as handle:
        rows = [r for r in csv.reader(handle) if r and not r[0].startswith("#")]
    header = rows[0]
    for row in rows[1:]:
        record = dict(zip(header, row))
        xs.append(float(record["axis_value"]))
        ys.append(float(record["mean_" + METRIC]))
        errs.append(float(record["ci95_" + METRIC]))
    ax.errorbar(xs, ys, yerr=errs, marker="o", capsize=3, label=prefix)
ax.set_xlabel("{xlabel}")
ax.set_ylabel(YLABEL)
ax.set_title("{title}")
if len(PREFIXES) > 1:
    ax.legend()
ax.grid(True, alpha=0.3)
fig.tight_layout()
fig.savefig(HERE / "{figure}.png", dpi=150)
print("wrote", HERE / "{figure}.png")
'''

_PLOT_PARAMS = {
    "fig3": {
        "metric": "messages_sent",
        "ylabel": "messages sent per belief change",
        "xlabel": "group size",
        "title": "Flooding: message cost vs group size",
    },
    "fig4": {
        "metric": "coherent_fraction",
        "ylabel": "coherent fraction",
        "xlabel": "group size",
        "title": "Flooding: coherence under message loss",
    },
    "fig5": {
        "metric": "messages_sent",
        "ylabel": "messages sent per belief change",
        "xlabel": "group size",
        "title": "Controlled replication: message cost vs group size",
    },
    "fig6": {
        "metric": "coherent_fraction",
        "ylabel": "coherent fraction",
        "xlabel": "proliferation constant",
        "title": "Controlled replication: coherence vs proliferation constant",
    },
}


def _plot_script(figure: str, prefixes: list[str]) -> str:
    params = _PLOT_PARAMS[figure]
    return _PLOT_TEMPLATE.format(figure=figure, prefixes=repr(prefixes), **params)


if __name__ == "__main__":
    raise SystemExit(main())
