"""The four experiment pipelines: data, rule evolution, Bayesian fits with
and without rule penalties, and evaluation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import rulebase as rbm
from .bayes import (
    Exponential,
    HalfCauchy,
    Normal,
    RulePenaltySpec,
    Trace,
    make_target,
    map_estimate,
    sample_mh,
)
from .config import ExperimentConfig, resource_path, sampler_config
from .data import (
    AdvectionConfig,
    EMISSIONS_SCHEMA,
    LinearDataConfig,
    POWERPLANT_SCHEMA,
    Predicate,
    generate_linear,
    label_classes,
    load_table,
    percentile_predicate,
    solve_advection,
    split_by_predicate,
    upsample_minority,
)
from .errors import ConfigError
from .evolution import CostFunction, EvolutionConfig, EvolutionResult, evolve
from .expr import Dataset, apply_standardization, standardize
from .grammar import load_grammar
from .likelihoods import LogisticModel, MultivariateLinear, SplineModel, UnivariateLinear, clamped_knots
from .metrics import MetricsReport, classification_metrics, mae, mse, roc_auc, waic


@dataclass
class Prepared:
    """Data in model units: ``train`` for fitting, ``evolve`` for rule
    discovery, ``test`` for evaluation and ``full`` for rule grid limits."""

    train: Dataset
    evolve: Dataset
    test: Dataset
    full: Dataset
    info: dict = field(default_factory=dict)


@dataclass
class RuleSet:
    name: str
    rulebase: rbm.RuleBase
    results: list  # [(label, EvolutionResult)]

    @property
    def cost(self) -> float:
        return float(sum(r.best_cost for _, r in self.results))


@dataclass
class Fit:
    label: str
    penalty: str
    trace: Trace
    rulebase: Optional[rbm.RuleBase] = None


def slug(label: str) -> str:
    out = "".join(c.lower() if c.isalnum() else "_" for c in label)
    while "__" in out:
        out = out.replace("__", "_")
    return out.strip("_")


def parse_penalty(text: str):
    """``none`` | ``beta a b SET`` | ``exponential lam SET`` |
    ``gaussian sigma SET [empirical]`` -> (variant or None, rule-set name)."""
    parts = text.split()
    if not parts:
        raise ConfigError("empty penalty specification")
    kind = parts[0].lower()
    try:
        if kind == "none" and len(parts) == 1:
            return None, None
        if kind == "beta" and len(parts) == 4:
            return rbm.Proportion(float(parts[1]), float(parts[2])), parts[3]
        if kind == "exponential" and len(parts) == 3:
            return rbm.TotalDistance(float(parts[1])), parts[2]
        if kind == "gaussian" and len(parts) in (3, 4):
            mode = parts[3] if len(parts) == 4 else "current"
            return rbm.Piecewise(float(parts[1]), mode), parts[2]
    except ValueError as exc:
        raise ConfigError(f"bad penalty {text!r}: {exc}") from None
    raise ConfigError(
        f"bad penalty {text!r}; use 'none', 'beta A B SET', 'exponential L SET' or 'gaussian S SET'"
    )


def prior_center(dist) -> float:
    if isinstance(dist, Normal):
        return dist.mean
    if isinstance(dist, Exponential):
        return 1.0 / dist.rate
    if isinstance(dist, HalfCauchy):
        return dist.scale_
    raise TypeError(f"no starting value for {dist!r}")


class Experiment:
    name = ""
    truth_metrics = False

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg

    # -- stages implemented per experiment ----------------------------------

    def prepare(self) -> Prepared:
        raise NotImplementedError

    def rule_jobs(self, prep: Prepared) -> list:
        """[(ruleset, [(label, grammar, cost_function, variant, output)])]."""
        raise NotImplementedError

    def model(self, prep: Prepared):
        raise NotImplementedError

    def evaluate(self, prep: Prepared, model, fits) -> MetricsReport:
        raise NotImplementedError

    # -- shared machinery ----------------------------------------------------

    def evolution_config(self, offset: int) -> EvolutionConfig:
        c = self.cfg
        mc = c.get("evolution", "mutation_chance", "")
        return EvolutionConfig(
            population_size=c.getint("evolution", "population_size", 8),
            random_individual_fraction=c.getfloat("evolution", "random_fraction", 0.25),
            mutation_chance=float(mc) if mc else None,
            iterations=c.getint("evolution", "iterations", 10000),
            genome_length=c.getint("evolution", "genome_length", 64),
            max_wraps=c.getint("evolution", "max_wraps", 3),
            seed=c.seed * 1000 + offset,
        )

    def grammar(self):
        path = self.cfg.path("evolution", "grammar")
        if path is None:
            raise ConfigError("[evolution] grammar is required")
        return load_grammar(path)

    def needed_rulesets(self) -> list:
        names = []
        for _, text in self.cfg.variants():
            _, rs = parse_penalty(text)
            if rs is not None and rs not in names:
                names.append(rs)
        return names

    def evolve_rules(self, prep: Prepared, only=None) -> dict:
        n = self.cfg.getint("rules", "discretization_n", rbm.DEFAULT_DISCRETIZATION)
        tol = self.cfg.getfloat("rules", "tolerance", 0.1)
        out = {}
        for k, (rs_name, jobs) in enumerate(self.rule_jobs(prep)):
            if only is not None and rs_name not in only:
                continue
            bases, results = [], []
            for j, (label, g, cost, variant, output) in enumerate(jobs):
                res = evolve(g, cost, prep.evolve, self.evolution_config(10 * k + j))
                rb = rbm.extract_rules(
                    res.best_expr,
                    variant,
                    scales=prep.evolve.standardization,
                    output=output,
                    discretization_n=n,
                )
                bases.append(rb)
                results.append((label, res))
            combined = rbm.combine(*bases)
            combined = rbm.RuleBase(
                combined.rules, combined.variant, combined.discretization_n, combined.scales, tol
            )
            out[rs_name] = RuleSet(rs_name, combined, results)
        return out

    def grid_limits(self, rb: rbm.RuleBase, prep: Prepared):
        if self.cfg.has("rules", "grid_lo") and self.cfg.has("rules", "grid_hi"):
            return self.cfg.getfloat("rules", "grid_lo"), self.cfg.getfloat("rules", "grid_hi")
        col = rb.input_columns[0]
        values = prep.full.original(col)
        return float(values.min()), float(values.max())

    def log_params(self, model) -> tuple:
        return tuple(i for i, n in enumerate(model.param_names) if n == "sigma")

    def fit(self, prep: Prepared, rulesets: dict, paper_scale: bool = False, labels=None) -> list:
        model = self.model(prep)
        prior = self.cfg.prior(model.param_names)
        settings = self.cfg.sampler(paper_scale)
        scfg = sampler_config(settings, prior, self.cfg.seed, self.log_params(model))
        init = np.array([prior_center(d) for d in prior.dists])
        fits = []
        for label, text in self.cfg.variants():
            if labels is not None and label not in labels:
                continue
            variant, rs_name = parse_penalty(text)
            penalty, rb = None, None
            if variant is not None:
                if rs_name not in rulesets:
                    raise ConfigError(f"variant {label!r} needs rule set {rs_name!r}; run evolve first")
                source = rulesets[rs_name]
                rb = getattr(source, "rulebase", source).with_variant(variant)
                lo, hi = self.grid_limits(rb, prep)
                penalty = RulePenaltySpec(rb, lo, hi)
            target = make_target(model, prior, penalty, prep.train)
            trace = sample_mh(target, scfg, init, model.param_names)
            fits.append(Fit(label, text, trace, rb))
        return fits

    @staticmethod
    def pooled_waic(model, trace: Trace, data: Dataset) -> float:
        ll = np.array([model.pointwise_loglik(theta, data) for theta in trace.pooled()])
        return waic(ll)


# ---------------------------------------------------------------------------


class LinearExperiment(Experiment):
    name = "linear"

    def prepare(self) -> Prepared:
        c = self.cfg
        dcfg = LinearDataConfig(
            n_total=c.getint("data", "n_total", 500),
            x_lo=c.getfloat("data", "x_lo", 0.0),
            x_hi=c.getfloat("data", "x_hi", 10.0),
            intercept=c.getfloat("data", "intercept", 1.0),
            slope=c.getfloat("data", "slope", 2.0),
            noise_sd=c.getfloat("data", "noise_sd", 3.0),
            train_lo=c.getfloat("data", "train_lo", 4.0),
            train_hi=c.getfloat("data", "train_hi", 5.0),
            seed=c.getint("data", "seed", c.seed),
        )
        train, full = generate_linear(dcfg)
        on = c.get("evolution", "evolve_on", "full")
        if on not in ("full", "train"):
            raise ConfigError("[evolution] evolve_on must be 'full' or 'train'")
        return Prepared(train, full if on == "full" else train, full, full, {"n_train": train.n})

    def rule_jobs(self, prep):
        c = self.cfg
        g_prop = load_grammar(c.path("evolution", "grammar_proportion"))
        g_dist = load_grammar(c.path("evolution", "grammar_distance"))
        return [
            ("proportion", [("x-y", g_prop, CostFunction("identity"), rbm.Proportion(1, 100), "y")]),
            ("distance", [("x-y", g_dist, CostFunction("rss", "y"), rbm.TotalDistance(10), "y")]),
        ]

    def model(self, prep):
        return UnivariateLinear("x", "y")

    def evaluate(self, prep, model, fits):
        rep = MetricsReport(against="observed (all generated points)")
        for f in fits:
            theta = map_estimate(f.trace)
            pred = model.predict(theta, prep.test)
            rep.add(
                f.label,
                {
                    "MSE": mse(pred, prep.test["y"]),
                    "MAE": mae(pred, prep.test["y"]),
                    "WAIC": self.pooled_waic(model, f.trace, prep.train),
                    "slope_sd": float(np.std(f.trace["beta"], ddof=1)),
                },
            )
        return rep


class AdvectionExperiment(Experiment):
    name = "advection"
    truth_metrics = True
    PAIRS = (("u1", "u2"), ("u2", "u3"))

    def prepare(self) -> Prepared:
        c = self.cfg
        acfg = AdvectionConfig(
            amplitude=c.getfloat("data", "amplitude", 0.001),
            phase=c.getfloat("data", "phase", math.pi),
            grid_points=c.getint("data", "grid_points", 256),
            samples_per_snapshot=c.getint("data", "samples_per_snapshot", 32),
            noise_sd=c.getfloat("data", "noise_sd", 0.002),
            initial=c.get("data", "initial", "zero"),
            initial_params=(
                c.getfloat("data", "initial_offset", 1.0),
                c.getfloat("data", "initial_amplitude", 0.5),
            ),
            dt_max=c.getfloat("data", "dt_max", 0.01),
            seed=c.getint("data", "seed", c.seed),
        )
        d = solve_advection(acfg)
        return Prepared(d, d, d, d, {"forcing": "a*sin(x+phase)", "initial": acfg.initial})

    def rule_jobs(self, prep):
        g = self.grammar()
        jobs = []
        for a, b in self.PAIRS:
            gp = g.restrict("u_a", [a]).restrict("u_b", [b])
            jobs.append((f"{a}-{b}", gp, CostFunction("identity"), rbm.Proportion(1, 100), "y"))
        return [("order", jobs)]

    def model(self, prep):
        c = self.cfg
        knots = clamped_knots(0.0, 2.0 * math.pi, c.getint("model", "interior_knots", 50))
        return SplineModel(knots, ("u1", "u2", "u3"), "x", 3, c.getfloat("model", "sigma", 0.002))

    def evaluate(self, prep, model, fits):
        rep = MetricsReport(against="truth (noiseless solution)")
        truth = np.concatenate([prep.test[f"{o}_true"] for o in model.outputs])
        for f in fits:
            pred = model.predict(map_estimate(f.trace), prep.test)
            p = np.concatenate([pred[o] for o in model.outputs])
            rep.add(
                f.label,
                {"MSE": mse(p, truth), "MAE": mae(p, truth), "WAIC": self.pooled_waic(model, f.trace, prep.train)},
            )
        return rep


def _load_source(cfg: ExperimentConfig, default_file: str, schema):
    path = cfg.path("data", "path")
    if path is None:
        path = cfg.path("data", "synthetic")
    if path is None:
        path = resource_path("data", default_file)
    return load_table(path, schema), str(path)


def _split(cfg: ExperimentConfig, data: Dataset):
    col = cfg.get("split", "column")
    op = cfg.get("split", "op")
    raw = cfg.get("split", "value")
    if raw.startswith("p"):
        pred = percentile_predicate(data, col, op, float(raw[1:]))
    else:
        pred = Predicate(col, op, float(raw))
    train, test = split_by_predicate(data, pred)
    if train.n == 0 or test.n == 0:
        raise ConfigError(f"split {col} {op} {raw} leaves an empty train or test set")
    return train, test, pred


class EmissionsExperiment(Experiment):
    name = "emissions"
    FEATURES = ("AT", "AH", "AFDP", "GTEP")
    TARGET = "CO"

    def prepare(self) -> Prepared:
        data, src = _load_source(self.cfg, "emissions_synthetic.csv", EMISSIONS_SCHEMA)
        train, test, pred = _split(self.cfg, data)
        train = standardize(train, list(self.FEATURES) + [self.TARGET])
        rec = train.standardization
        test = apply_standardization(test, rec)
        full = apply_standardization(data, rec)
        info = {"source": src, "split": f"{pred.column} {pred.op} {pred.value!r}", "n_train": train.n, "n_test": test.n}
        return Prepared(train, train, test, full, info)

    def rule_jobs(self, prep):
        g = self.grammar()
        jobs = []
        for feat in self.FEATURES:
            gf = g.restrict("var", [feat])
            jobs.append((feat, [(f"{feat}-{self.TARGET}", gf, CostFunction("rss", self.TARGET), rbm.Piecewise(0.1), self.TARGET)]))
        return jobs

    def model(self, prep):
        return MultivariateLinear(self.FEATURES, self.TARGET)

    def evaluate(self, prep, model, fits):
        rep = MetricsReport(against="observed (test split, original units)")
        mean, sd = prep.train.standardization[self.TARGET]
        y = prep.test.original(self.TARGET)
        for f in fits:
            pred = model.predict(map_estimate(f.trace), prep.test) * sd + mean
            rep.add(
                f.label,
                {"MSE": mse(pred, y), "MAE": mae(pred, y), "WAIC": self.pooled_waic(model, f.trace, prep.train)},
            )
        return rep


class PowerplantExperiment(Experiment):
    name = "powerplant"
    FEATURES = ("AT", "V", "AP", "RH")
    TARGET = "PE_class"

    def prepare(self) -> Prepared:
        c = self.cfg
        data, src = _load_source(c, "powerplant_synthetic.csv", POWERPLANT_SCHEMA)
        data = label_classes(data, "PE", c.getfloat("data", "cutoff", 440.0), self.TARGET)
        train, test, pred = _split(c, data)
        info = {
            "source": src,
            "split": f"{pred.column} {pred.op} {pred.value!r}",
            "cutoff": c.getfloat("data", "cutoff", 440.0),
            "train_class_counts": class_counts(train[self.TARGET]),
            "test_class_counts": class_counts(test[self.TARGET]),
        }
        if c.getbool("data", "balance", False):
            train = upsample_minority(train, self.TARGET, c.seed)
            info["balanced_class_counts"] = class_counts(train[self.TARGET])
        train = standardize(train, list(self.FEATURES))
        rec = train.standardization
        return Prepared(train, train, apply_standardization(test, rec), apply_standardization(data, rec), info)

    def rule_jobs(self, prep):
        g = self.grammar()
        return [
            (feat, [(f"{feat}-class", g.restrict("var", [feat]), CostFunction("misclassification", self.TARGET), rbm.Proportion(1, 1000), self.TARGET)])
            for feat in self.FEATURES
        ]

    def model(self, prep):
        return LogisticModel(self.FEATURES, self.TARGET)

    def mean_probability(self, model, trace, data):
        predict = model.predictor(data)
        return np.mean([predict(theta) for theta in trace.pooled()], axis=0)

    def evaluate(self, prep, model, fits):
        rep = MetricsReport(against="observed (test split)")
        y = prep.test[self.TARGET]
        self.roc = {}
        for f in fits:
            p = self.mean_probability(model, f.trace, prep.test)
            acc, sens = classification_metrics(p, y)
            auc, pts = roc_auc(p, y)
            self.roc[f.label] = pts
            rep.add(f.label, {"Accuracy": acc, "AUC": auc, "Sensitivity": sens})
        return rep


def class_counts(y) -> str:
    y = np.asarray(y)
    return f"{int(np.sum(y == 0))}/{int(np.sum(y == 1))}"


EXPERIMENT_CLASSES = {
    cls.name: cls
    for cls in (LinearExperiment, AdvectionExperiment, EmissionsExperiment, PowerplantExperiment)
}


def make_experiment(cfg: ExperimentConfig) -> Experiment:
    return EXPERIMENT_CLASSES[cfg.name](cfg)
