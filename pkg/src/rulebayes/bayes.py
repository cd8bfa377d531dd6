"""Log-posterior composition and random-walk Metropolis-Hastings sampling.

The unnormalized log posterior is

    log p(data | theta) + log p(theta) + log p(R | theta)

where the last term is the rule penalty: a Beta density on the violation
proportion, an Exponential density on the total violation distance, or a sum
of Gaussian log densities of rule-output residuals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyTrace,
    InvalidInit,
    NonFiniteTarget,
    UnsupportedVariantModelPair,
)
from .expr import Dataset
from .likelihoods import LOG_2PI, LogisticModel, SplineModel
from .rulebase import (
    ClassLabel,
    OutputCompare,
    OutputFormula,
    OutputOrder,
    Piecewise,
    Proportion,
    RuleBase,
    TotalDistance,
    build_grid,
    rule_outputs,
    violations,
)

# ---------------------------------------------------------------------------
# distributions


@dataclass(frozen=True)
class Normal:
    mean: float = 0.0
    sd: float = 1.0

    def __post_init__(self):
        if not self.sd > 0:
            raise ValueError("Normal sd must be positive")

    def logpdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mean) / self.sd
        return -0.5 * z * z - math.log(self.sd) - 0.5 * LOG_2PI

    @property
    def support(self):
        return (-math.inf, math.inf)

    @property
    def scale(self) -> float:
        return self.sd


@dataclass(frozen=True)
class Exponential:
    rate: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("Exponential rate must be positive")

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        out = math.log(self.rate) - self.rate * x
        return np.where(x >= 0, out, -np.inf)

    @property
    def support(self):
        return (0.0, math.inf)

    @property
    def scale(self) -> float:
        return 1.0 / self.rate


@dataclass(frozen=True)
class HalfCauchy:
    scale_: float = 1.0

    def __post_init__(self):
        if not self.scale_ > 0:
            raise ValueError("HalfCauchy scale must be positive")

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        z = x / self.scale_
        out = math.log(2.0 / (math.pi * self.scale_)) - np.log1p(z * z)
        return np.where(x >= 0, out, -np.inf)

    @property
    def support(self):
        return (0.0, math.inf)

    @property
    def scale(self) -> float:
        # no finite sd; the scale parameter sizes default proposals
        return self.scale_


@dataclass(frozen=True)
class Beta:
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("Beta parameters must be positive")

    @property
    def log_norm(self) -> float:
        return math.lgamma(self.a + self.b) - math.lgamma(self.a) - math.lgamma(self.b)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, self.log_norm)
        inside = (x >= 0) & (x <= 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            # a == 1 or b == 1 terms are skipped so that 0 * log(0) never appears
            if self.a != 1:
                out = out + (self.a - 1.0) * np.log(np.where(inside, x, 1.0))
            if self.b != 1:
                out = out + (self.b - 1.0) * np.log1p(-np.where(inside, x, 0.0))
        return np.where(inside, out, -np.inf)

    def logpdf_scalar(self, r: float) -> float:
        if not 0.0 <= r <= 1.0:
            return -math.inf
        out = self.log_norm
        if self.a != 1:
            out += (self.a - 1.0) * math.log(r) if r > 0 else -math.inf
        if self.b != 1:
            out += (self.b - 1.0) * math.log1p(-r) if r < 1 else -math.inf
        return out

    @property
    def support(self):
        return (0.0, 1.0)


Distribution = Union[Normal, Exponential, HalfCauchy, Beta]


# ---------------------------------------------------------------------------
# priors


@dataclass(frozen=True)
class PriorSpec:
    """Independent prior per named parameter, in model parameter order."""

    names: tuple
    dists: tuple

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "dists", tuple(self.dists))
        if len(self.names) != len(self.dists):
            raise ValueError("one distribution per parameter name is required")

    @classmethod
    def from_mapping(cls, names: Sequence[str], mapping: Mapping[str, Distribution]):
        missing = [n for n in names if n not in mapping]
        if missing:
            raise ValueError(f"no prior given for {missing}")
        return cls(tuple(names), tuple(mapping[n] for n in names))

    def __len__(self):
        return len(self.names)

    def proposal_scales(self) -> np.ndarray:
        """Default random-walk sd: a tenth of each prior's scale."""
        return np.array([d.scale for d in self.dists]) / 10.0

    def compile(self) -> Callable[[np.ndarray], float]:
        """Vectorized ``log_prior`` for the sampler loop."""
        d = len(self.dists)
        normal = np.array([isinstance(x, Normal) for x in self.dists])
        expo = np.array([isinstance(x, Exponential) for x in self.dists])
        hc = np.array([isinstance(x, HalfCauchy) for x in self.dists])
        if np.any(~(normal | expo | hc)):
            raise ValueError("priors must be Normal, Exponential or HalfCauchy")
        mu = np.array([x.mean for x in self.dists if isinstance(x, Normal)])
        sd = np.array([x.sd for x in self.dists if isinstance(x, Normal)])
        rate = np.array([x.rate for x in self.dists if isinstance(x, Exponential)])
        gam = np.array([x.scale_ for x in self.dists if isinstance(x, HalfCauchy)])
        const = float(
            -np.sum(np.log(sd)) - 0.5 * LOG_2PI * sd.size
            + np.sum(np.log(rate))
            + np.sum(np.log(2.0 / (math.pi * gam)))
        )
        inv_sd = 1.0 / sd
        inv_gam = 1.0 / gam

        def log_prior(theta):
            if theta.shape[0] != d:
                raise DimensionMismatch(f"expected {d} parameters, got {theta.shape[0]}")
            x_e = theta[expo]
            x_h = theta[hc]
            if np.any(x_e < 0) or np.any(x_h < 0):
                return -math.inf
            z = (theta[normal] - mu) * inv_sd
            zh = x_h * inv_gam
            return const - 0.5 * float(z @ z) - float(rate @ x_e) - float(np.sum(np.log1p(zh * zh)))

        return log_prior


def log_prior(spec: PriorSpec, theta) -> float:
    """Sum of the component log densities; -inf outside any support."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (len(spec),):
        raise DimensionMismatch(f"expected {len(spec)} parameters, got shape {theta.shape}")
    total = 0.0
    for dist, value in zip(spec.dists, theta):
        total += float(dist.logpdf(value))
    return total


# ---------------------------------------------------------------------------
# rule penalties


@dataclass(frozen=True)
class RulePenaltySpec:
    """A rule base together with where its penalty is evaluated.

    ``grid_lo``/``grid_hi`` bound the rule-input discretization in original
    units.  ``context`` fixes the remaining model inputs at the grid points
    (model units, default 0, i.e. the mean of standardized features).
    """

    rulebase: RuleBase
    grid_lo: float = 0.0
    grid_hi: float = 1.0
    context: tuple = ()  # ((feature, value), ...)

    @property
    def distribution(self):
        v = self.rulebase.variant
        if isinstance(v, Proportion):
            return Beta(v.a, v.b)
        if isinstance(v, TotalDistance):
            return Exponential(v.lam)
        return Normal(0.0, v.sigma_r)


def _check_pair(rb: RuleBase, model):
    variant = rb.variant
    cons = [r.consequent for r in rb.rules]
    if isinstance(variant, Piecewise):
        if isinstance(model, (SplineModel, LogisticModel)):
            raise UnsupportedVariantModelPair(
                f"piecewise penalties need a single-output regression model, not {type(model).__name__}"
            )
        if not all(isinstance(c, OutputFormula) for c in cons):
            raise UnsupportedVariantModelPair("piecewise penalties need formula consequents")
        return
    if any(isinstance(c, ClassLabel) for c in cons) != isinstance(model, LogisticModel):
        raise UnsupportedVariantModelPair("class-label rules go with the logistic model only")
    if any(isinstance(c, OutputOrder) for c in cons) and not isinstance(model, SplineModel):
        raise UnsupportedVariantModelPair("order rules need a multi-output model")


def _grid_inputs(spec: RulePenaltySpec, model):
    """Rule grid and the matching model inputs (model units)."""
    rb = spec.rulebase
    grid = build_grid(rb, spec.grid_lo, spec.grid_hi)
    points = grid.points
    scales = rb.scale_map
    if grid.column in scales:
        mean, sd = scales[grid.column]
        points = (points - mean) / sd
    features = getattr(model, "features", None) or (model.feature,)
    if grid.column not in features:
        raise UnsupportedVariantModelPair(
            f"rule input {grid.column!r} is not a model feature {list(features)}"
        )
    context = dict(spec.context)
    inputs = {f: np.full(len(points), float(context.get(f, 0.0))) for f in features}
    inputs[grid.column] = points
    return grid, inputs


def _penalty_fn(spec: RulePenaltySpec, model, data: Dataset):
    """Closure theta -> log p(R | theta) with all theta-free work done once."""
    rb = spec.rulebase
    _check_pair(rb, model)
    dist = spec.distribution
    if isinstance(rb.variant, Piecewise):
        y_rule = rule_outputs(rb, data)
        if np.any(np.isnan(y_rule)):
            raise UnsupportedVariantModelPair("rule antecedents leave some rows unassigned")
        predict = model.predictor(data)
        sigma = rb.variant.sigma_r
        const = -y_rule.size * (math.log(sigma) + 0.5 * LOG_2PI)
        inv = 0.5 / (sigma * sigma)

        def piecewise(theta):
            r = y_rule - predict(theta)
            return const - inv * float(r @ r)

        return piecewise

    grid, inputs = _grid_inputs(spec, model)
    predict = model.predictor(inputs)
    if isinstance(rb.variant, Proportion):
        n = len(grid)

        def proportion(theta):
            bad, _ = violations(rb, grid, predict(theta))
            return dist.logpdf_scalar(float(np.count_nonzero(bad)) / n)

        return proportion

    log_rate, rate = math.log(dist.rate), dist.rate

    def distance(theta):
        bad, gap = violations(rb, grid, predict(theta))
        return log_rate - rate * float(gap[bad].sum())

    return distance


def log_rule_penalty(spec: RulePenaltySpec, theta, model, data: Dataset) -> float:
    """log p(R | theta) for the penalty's variant."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (len(model.param_names),):
        raise DimensionMismatch(
            f"expected {len(model.param_names)} parameters, got shape {theta.shape}"
        )
    return float(_penalty_fn(spec, model, data)(theta))


def log_posterior(model, prior: PriorSpec, penalty: Optional[RulePenaltySpec], theta, data) -> float:
    """Unnormalized log posterior; -inf from any component propagates."""
    lp = log_prior(prior, theta)
    if lp == -math.inf:
        return -math.inf
    ll = model.log_likelihood(theta, data)
    total = ll + lp
    if penalty is not None:
        total = total + log_rule_penalty(penalty, theta, model, data)
    return float(total)


class Target:
    """Fast log-posterior closure for the sampler.

    Matches ``log_posterior`` but with design matrices, rule grids and rule
    outputs precomputed.  With an empirical piecewise penalty the rule term is
    evaluated at a reference point ``theta_star`` that the sampler refreshes
    from the chain's running MAP.
    """

    def __init__(self, model, prior: PriorSpec, penalty: Optional[RulePenaltySpec], data: Dataset):
        if len(prior) != len(model.param_names):
            raise DimensionMismatch("prior and model disagree on the number of parameters")
        self.model, self.prior, self.penalty = model, prior, penalty
        self.names = tuple(model.param_names)
        self._lp = prior.compile()
        self._ll = model.loglik_fn(data)
        self._pen = None if penalty is None else _penalty_fn(penalty, model, data)
        self.empirical = (
            penalty is not None
            and isinstance(penalty.rulebase.variant, Piecewise)
            and penalty.rulebase.variant.theta_mode == "empirical"
        )
        self.refresh_every = 1000 if self.empirical else 0
        self.theta_star = None

    def reset(self, theta0):
        if self.empirical:
            self.theta_star = np.array(theta0, dtype=float)

    def refresh(self, theta_star):
        self.theta_star = np.array(theta_star, dtype=float)

    def __call__(self, theta) -> float:
        lp = self._lp(theta)
        if lp == -math.inf:
            return -math.inf
        total = self._ll(theta) + lp
        if self._pen is not None:
            ref = self.theta_star if self.empirical and self.theta_star is not None else theta
            total = total + self._pen(ref)
        return total


def make_target(model, prior: PriorSpec, penalty: Optional[RulePenaltySpec], data: Dataset) -> Target:
    return Target(model, prior, penalty, data)


# ---------------------------------------------------------------------------
# sampler


@dataclass(frozen=True)
class SamplerConfig:
    """Metropolis-Hastings settings.

    ``proposal_sd`` holds one random-walk sd per parameter (on the log scale
    for indices in ``log_params``).  ``adapt`` selects the burn-in tuning:
    ``"none"``, ``"scale"`` (Robbins-Monro on a global factor towards
    ``target_accept``) or ``"cov"`` (additionally re-estimates the proposal
    covariance from burn-in draws).  All tuning stops at the end of burn-in.
    """

    n_chains: int = 2
    n_iterations: int = 30_000
    burn_in: int = 5_000
    thinning: int = 25
    proposal_sd: tuple = ()
    seed: int = 0
    adapt: str = "scale"
    target_accept: float = 0.234
    log_params: tuple = ()
    proposal_cov: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        if min(self.n_chains, self.n_iterations, self.thinning) < 1:
            raise ValueError("n_chains, n_iterations and thinning must be positive")
        if not 0 <= self.burn_in < self.n_iterations:
            raise ValueError("burn_in must lie in [0, n_iterations)")
        if self.adapt not in ("none", "scale", "cov"):
            raise ValueError("adapt must be 'none', 'scale' or 'cov'")
        object.__setattr__(self, "proposal_sd", tuple(float(s) for s in self.proposal_sd))
        object.__setattr__(self, "log_params", tuple(int(i) for i in self.log_params))
        if any(not s > 0 for s in self.proposal_sd):
            raise ValueError("proposal sds must be positive")

    @property
    def draws_per_chain(self) -> int:
        return (self.n_iterations - self.burn_in) // self.thinning


@dataclass(frozen=True, eq=False)
class Trace:
    """Retained draws: ``samples`` has shape (chains, draws, parameters)."""

    names: tuple
    samples: np.ndarray
    log_posterior: np.ndarray
    acceptance_rate: np.ndarray
    n_iterations: int = 0
    burn_in: int = 0
    thinning: int = 1
    seed: int = 0

    @property
    def n_chains(self) -> int:
        return self.samples.shape[0]

    @property
    def n_draws(self) -> int:
        return self.samples.shape[1]

    def pooled(self) -> np.ndarray:
        return self.samples.reshape(-1, self.samples.shape[2])

    def __getitem__(self, name: str) -> np.ndarray:
        return self.samples[:, :, self.names.index(name)]

    def identical_to(self, other: "Trace") -> bool:
        return (
            self.names == other.names
            and np.array_equal(self.samples, other.samples)
            and np.array_equal(self.log_posterior, other.log_posterior)
            and np.array_equal(self.acceptance_rate, other.acceptance_rate)
        )


def _check_value(v):
    if math.isnan(v):
        raise NonFiniteTarget("target returned NaN")
    return v


def _run_chain(target, cfg, init, rng, sd, chol, log_idx):
    d = init.size
    n_iter, burn, thin = cfg.n_iterations, cfg.burn_in, cfg.thinning
    n_keep = cfg.draws_per_chain
    z = init.copy()
    z[log_idx] = np.log(z[log_idx])
    theta = init.copy()

    if hasattr(target, "reset"):
        target.reset(theta)
    lp = _check_value(float(target(theta)))
    if lp == -math.inf:
        raise InvalidInit("target is -inf at the initial point")
    jac = float(np.sum(z[log_idx]))

    samples = np.empty((n_keep, d))
    logps = np.empty(n_keep)
    kept = 0
    accepted_retained = 0
    log_scale = 0.0
    scale = 1.0
    history = np.empty((burn, d)) if cfg.adapt == "cov" and burn > 0 else None
    cov_interval = max(100, burn // 10)
    refresh = getattr(target, "refresh_every", 0)
    best_lp, best_theta = lp, theta.copy()

    batch = 1024
    noise = logu = None
    for it in range(n_iter):
        j = it % batch
        if j == 0:
            noise = rng.standard_normal((batch, d))
            logu = np.log(rng.random(batch))
        step = noise[j] * sd if chol is None else chol @ noise[j]
        z_new = z + scale * step
        theta_new = z_new.copy()
        theta_new[log_idx] = np.exp(z_new[log_idx])
        lp_new = _check_value(float(target(theta_new)))
        jac_new = float(np.sum(z_new[log_idx]))
        accept = logu[j] < (lp_new + jac_new) - (lp + jac)
        if accept:
            z, theta, lp, jac = z_new, theta_new, lp_new, jac_new
            if lp > best_lp:
                best_lp, best_theta = lp, theta.copy()

        if it < burn:
            if cfg.adapt != "none":
                log_scale += ((1.0 if accept else 0.0) - cfg.target_accept) / (it + 1) ** 0.6
                scale = math.exp(log_scale)
            if history is not None:
                history[it] = z
                if (it + 1) % cov_interval == 0 and it + 1 >= 2 * cov_interval:
                    recent = history[(it + 1) // 2 : it + 1]
                    cov = np.cov(recent, rowvar=False).reshape(d, d)
                    cov += 1e-12 * np.eye(d) + np.diag(1e-6 * np.diag(cov))
                    try:
                        chol = np.linalg.cholesky(cov) * (2.38 / math.sqrt(d))
                        log_scale, scale = 0.0, 1.0
                    except np.linalg.LinAlgError:
                        pass
        elif accept:
            accepted_retained += 1

        if refresh and (it + 1) % refresh == 0:
            target.refresh(best_theta)
            lp = _check_value(float(target(theta)))

        if it >= burn and (it - burn + 1) % thin == 0 and kept < n_keep:
            samples[kept] = theta
            logps[kept] = lp
            kept += 1

    rate = accepted_retained / max(1, n_iter - burn)
    return samples, logps, rate


def sample_mh(target, cfg: SamplerConfig, init, names: Optional[Sequence[str]] = None) -> Trace:
    """Random-walk Metropolis-Hastings, one independent RNG stream per chain.

    Proposals are Gaussian steps on the unconstrained scale (log scale for
    ``cfg.log_params``, with the Jacobian added to the acceptance ratio).  The
    first ``burn_in`` iterations are discarded and every ``thinning``-th
    iteration after that is kept.
    """
    init = np.array(init, dtype=float)
    if init.ndim != 1:
        raise DimensionMismatch("init must be a parameter vector")
    d = init.size
    names = tuple(names) if names is not None else tuple(getattr(target, "names", ()))
    if len(names) != d:
        names = tuple(f"p{i}" for i in range(d))
    log_idx = np.array(cfg.log_params, dtype=int)
    if np.any(init[log_idx] <= 0):
        raise InvalidInit("log-scale parameters must start positive")

    sd = np.asarray(cfg.proposal_sd, dtype=float) if cfg.proposal_sd else np.full(d, 0.1)
    if sd.shape != (d,):
        raise DimensionMismatch(f"proposal_sd has {sd.size} entries for {d} parameters")
    chol = None
    if cfg.proposal_cov is not None:
        cov = np.asarray(cfg.proposal_cov, dtype=float)
        if cov.shape != (d, d):
            raise DimensionMismatch("proposal_cov must be d x d")
        chol = np.linalg.cholesky(cov)

    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.n_chains)
    out_s, out_lp, out_rate = [], [], []
    for stream in streams:
        s, lp, rate = _run_chain(target, cfg, init, np.random.default_rng(stream), sd, chol, log_idx)
        out_s.append(s)
        out_lp.append(lp)
        out_rate.append(rate)
    return Trace(
        names=names,
        samples=np.stack(out_s),
        log_posterior=np.stack(out_lp),
        acceptance_rate=np.array(out_rate),
        n_iterations=cfg.n_iterations,
        burn_in=cfg.burn_in,
        thinning=cfg.thinning,
        seed=cfg.seed,
    )


def map_estimate(trace: Trace) -> np.ndarray:
    """Retained draw with the highest recorded log posterior (first on ties)."""
    if trace.samples.size == 0:
        raise EmptyTrace("trace holds no draws")
    flat = trace.log_posterior.reshape(-1)
    return trace.pooled()[int(np.argmax(flat))].copy()
