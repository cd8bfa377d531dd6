"""Command-line entry point: ``rulebayes {evolve,fit,reproduce,metrics}``.

Every output file is written to a temporary sibling and renamed into place.
Trace, summary, metrics and ROC files contain no timings or host details, so
a rerun with the same seed reproduces them byte for byte; timings go to
``run_record.txt`` only.
"""

from __future__ import annotations

import argparse
import glob
import logging
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import rulebase as rbm
from .bayes import Trace
from .config import EXPERIMENTS, ExperimentConfig
from .errors import ConfigError, RuleBayesError
from .experiments import Fit, RuleSet, make_experiment, slug
from .metrics import MetricsReport, posterior_summary

log = logging.getLogger("rulebayes")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


# ---------------------------------------------------------------------------
# file helpers


def write_atomic(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _num(v) -> str:
    return repr(float(v))


def trace_chain_text(trace: Trace, chain: int) -> str:
    lines = [
        f"# chain={chain} acceptance_rate={_num(trace.acceptance_rate[chain])} "
        f"n_iterations={trace.n_iterations} burn_in={trace.burn_in} "
        f"thinning={trace.thinning} seed={trace.seed}",
        ",".join(("iteration",) + tuple(trace.names) + ("log_posterior",)),
    ]
    for k in range(trace.n_draws):
        it = trace.burn_in + (k + 1) * trace.thinning
        row = [str(it)] + [_num(v) for v in trace.samples[chain, k]]
        row.append(_num(trace.log_posterior[chain, k]))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def read_trace(paths) -> Trace:
    """Rebuild a :class:`Trace` from per-chain files written by
    :func:`trace_chain_text` (chains in the given order)."""
    samples, logps, rates, names, meta = [], [], [], None, {}
    for p in paths:
        with open(p, encoding="utf-8") as fh:
            header = fh.readline()
            meta = dict(kv.split("=", 1) for kv in header[1:].split())
            cols = fh.readline().strip().split(",")
            body = np.loadtxt(fh, delimiter=",", ndmin=2)
        if names is None:
            names = tuple(cols[1:-1])
        elif tuple(cols[1:-1]) != names:
            raise RuleBayesError(f"{p}: parameter columns differ between chains")
        samples.append(body[:, 1:-1])
        logps.append(body[:, -1])
        rates.append(float(meta["acceptance_rate"]))
    if names is None:
        raise RuleBayesError("no trace files given")
    return Trace(
        names,
        np.stack(samples),
        np.stack(logps),
        np.array(rates),
        int(meta["n_iterations"]),
        int(meta["burn_in"]),
        int(meta["thinning"]),
        int(meta["seed"]),
    )


def summary_text(trace: Trace) -> str:
    lines = ["parameter,mean,sd,map"]
    for name, s in posterior_summary(trace).items():
        lines.append(f"{name},{_num(s['mean'])},{_num(s['sd'])},{_num(s['map'])}")
    return "\n".join(lines) + "\n"


def ruleset_text(rs: RuleSet) -> str:
    head = [f"# rule set: {rs.name}", f"# total cost: {rs.cost!r}"]
    for label, res in rs.results:
        head.append(f"# {label}: cost={res.best_cost!r} phenotype={res.best_expr}")
    return "\n".join(head) + "\n" + rbm.dumps(rs.rulebase)


def roc_text(points) -> str:
    return "fpr,tpr\n" + "".join(f"{_num(f)},{_num(t)}\n" for f, t in points)


# ---------------------------------------------------------------------------
# stages


class Run:
    """One experiment run writing into ``out``."""

    def __init__(self, cfg: ExperimentConfig, out: Path, paper_scale: bool = False):
        self.cfg = cfg
        self.out = Path(out)
        self.paper_scale = paper_scale
        self.exp = make_experiment(cfg)
        self.timings = {}
        self.written = []
        self._prep = None

    @property
    def prep(self):
        if self._prep is None:
            t0 = time.perf_counter()
            self._prep = self.exp.prepare()
            self.timings["prepare"] = time.perf_counter() - t0
        return self._prep

    def write(self, name: str, text: str):
        write_atomic(self.out / name, text)
        self.written.append(name)

    def evolve(self, only=None) -> dict:
        t0 = time.perf_counter()
        rulesets = self.exp.evolve_rules(self.prep, only=only)
        self.timings["evolve"] = time.perf_counter() - t0
        summary = ["ruleset,label,cost,phenotype,genome"]
        for name, rs in rulesets.items():
            self.write(f"rules_{name}.txt", ruleset_text(rs))
            for label, res in rs.results:
                genome = " ".join(str(int(c)) for c in res.best_genome)
                summary.append(f"{name},{label},{res.best_cost!r},{res.best_expr},{genome}")
            log.info("rule set %s: cost %g", name, rs.cost)
        self.write("evolution.txt", "\n".join(summary) + "\n")
        return rulesets

    def load_rules(self, rules_dir: Path) -> dict:
        out = {}
        for name in self.exp.needed_rulesets():
            path = Path(rules_dir) / f"rules_{name}.txt"
            if not path.is_file():
                raise ConfigError(f"rule file not found: {path} (run 'evolve' first)")
            try:
                out[name] = rbm.load(path)
            except ValueError as exc:
                raise ConfigError(f"{path}: {exc}") from None
        return out

    def fit(self, rulesets: dict) -> list:
        t0 = time.perf_counter()
        fits = self.exp.fit(self.prep, rulesets, paper_scale=self.paper_scale)
        self.timings["fit"] = time.perf_counter() - t0
        for f in fits:
            s = slug(f.label)
            for c in range(f.trace.n_chains):
                self.write(f"trace_{s}_chain{c}.csv", trace_chain_text(f.trace, c))
            self.write(f"summary_{s}.csv", summary_text(f.trace))
            log.info("%s: acceptance %s", f.label, np.round(f.trace.acceptance_rate, 3).tolist())
        return fits

    def traces_from_disk(self) -> list:
        fits = []
        for label, text in self.cfg.variants():
            paths = sorted(
                glob.glob(str(self.out / f"trace_{slug(label)}_chain*.csv")),
                key=lambda p: int(p.rsplit("chain", 1)[1].split(".")[0]),
            )
            if not paths:
                raise ConfigError(f"no trace files for variant {label!r} in {self.out}")
            fits.append(Fit(label, text, read_trace(paths)))
        return fits

    def metrics(self, fits) -> MetricsReport:
        t0 = time.perf_counter()
        model = self.exp.model(self.prep)
        rep = self.exp.evaluate(self.prep, model, fits)
        self.timings["metrics"] = time.perf_counter() - t0
        rep.meta = {"experiment": self.cfg.name, "seed": str(self.cfg.seed)}
        rep.meta["sampling"] = "paper-scale" if self.paper_scale else "desk-scale"
        self.write("metrics.csv", rep.dumps())
        self.write("metrics.txt", rep.table())
        for label, pts in getattr(self.exp, "roc", {}).items():
            self.write(f"roc_{slug(label)}.csv", roc_text(pts))
        return rep

    def comparison(self, rep: MetricsReport, fits):
        lines = [rep.table()]
        for f in fits:
            lines.append(f"[{f.label}] penalty: {f.penalty}")
            if f.rulebase is not None:
                lines += ["  " + str(r) for r in f.rulebase.rules]
        self.write("comparison.txt", "\n".join(lines) + "\n")

    def record(self, argv, rulesets=None):
        self.write("config.ini", self.cfg.dumps())
        parts = [
            f"rulebayes {__version__}",
            "command: " + " ".join(argv),
            f"experiment: {self.cfg.name}",
            f"seed: {self.cfg.seed}",
            "sampling: " + ("paper-scale" if self.paper_scale else "desk-scale"),
            "",
            "[data]",
        ]
        parts += [f"{k}: {v}" for k, v in self.prep.info.items()]
        if rulesets:
            parts += ["", "[rules]"]
            for name, rs in rulesets.items():
                rb = getattr(rs, "rulebase", rs)
                parts += [f"{name}:"] + ["  " + str(r) for r in rb.rules]
        parts += ["", "[timings_seconds]"]
        parts += [f"{k}: {v:.3f}" for k, v in self.timings.items()]
        parts += ["", "[files]"] + sorted(set(self.written)) + ["run_record.txt"]
        parts += ["", "[config]", self.cfg.dumps()]
        self.write("run_record.txt", "\n".join(parts))


# ---------------------------------------------------------------------------
# commands


def _load_config(args, name=None) -> ExperimentConfig:
    source = args.config or name
    if source is None:
        raise ConfigError("give --config PATH or an experiment name")
    cfg = ExperimentConfig.load(source)
    if name is not None and args.config is not None and cfg.name != name:
        raise ConfigError(f"config is for {cfg.name!r}, not {name!r}")
    if args.seed is not None:
        cfg.set("experiment", "seed", args.seed)
    if getattr(args, "balance", False):
        if cfg.name != "powerplant":
            raise ConfigError("--balance applies to the powerplant experiment only")
        cfg.set("data", "balance", "true")
    return cfg


def cmd_evolve(args, argv):
    run = Run(_load_config(args), args.out)
    rulesets = run.evolve()
    run.record(argv, rulesets)


def cmd_fit(args, argv):
    run = Run(_load_config(args), args.out, args.paper_scale)
    rulesets = run.load_rules(Path(args.rules or args.out))
    fits = run.fit(rulesets)
    rep = run.metrics(fits)
    run.comparison(rep, fits)
    run.record(argv, rulesets)
    print(rep.table(), end="")


def _reproduce_one(cfg, out, paper_scale, argv):
    run = Run(cfg, out, paper_scale)
    run.evolve(only=run.exp.needed_rulesets())
    rulesets = run.load_rules(run.out)
    fits = run.fit(rulesets)
    rep = run.metrics(fits)
    run.comparison(rep, fits)
    run.record(argv, rulesets)
    return rep


def cmd_reproduce(args, argv):
    balance = args.balance
    args.balance = False
    cfg = _load_config(args, args.experiment)
    rep = _reproduce_one(cfg, Path(args.out), args.paper_scale, argv)
    print(rep.table(), end="")
    if balance:
        if cfg.name != "powerplant":
            raise ConfigError("--balance applies to the powerplant experiment only")
        args.balance = True
        cfg_b = _load_config(args, args.experiment)
        rep_b = _reproduce_one(cfg_b, Path(args.out) / "balanced", args.paper_scale, argv)
        print("\n# after class balancing")
        print(rep_b.table(), end="")


def cmd_metrics(args, argv):
    run = Run(_load_config(args), args.out)
    rep = run.metrics(run.traces_from_disk())
    print(rep.table(), end="")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rulebayes", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"rulebayes {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="INI file or packaged experiment name")
        sp.add_argument("--seed", type=int, default=None, help="override [experiment] seed")
        sp.add_argument("--out", default="out", help="output directory (default: out)")

    sp = sub.add_parser("evolve", help="evolve rule sets and write rules_*.txt")
    common(sp)
    sp.set_defaults(func=cmd_evolve)

    sp = sub.add_parser("fit", help="sample posteriors for every variant and write traces and metrics")
    common(sp)
    sp.add_argument("--rules", default=None, help="folder holding rules_*.txt (default: --out)")
    sp.add_argument("--paper-scale", action="store_true", help="use the long [paper_scale] sampler settings")
    sp.add_argument("--balance", action="store_true", help="upsample the minority class (powerplant)")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("reproduce", help="run data, evolution, fits and comparison end to end")
    sp.add_argument("experiment", nargs="?", choices=EXPERIMENTS)
    common(sp, config_required=False)
    sp.add_argument("--paper-scale", action="store_true", help="use the long [paper_scale] sampler settings")
    sp.add_argument("--balance", action="store_true", help="also run the class-balanced variant into OUT/balanced")
    sp.set_defaults(func=cmd_reproduce)

    sp = sub.add_parser("metrics", help="recompute metrics from trace files in --out")
    common(sp)
    sp.add_argument("--balance", action="store_true", help="the traces came from a balanced fit")
    sp.set_defaults(func=cmd_metrics)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        args.func(args, ["rulebayes"] + argv)
    except ConfigError as exc:
        print(f"rulebayes: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuleBayesError, OSError, ValueError, FloatingPointError) as exc:
        print(f"rulebayes: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
