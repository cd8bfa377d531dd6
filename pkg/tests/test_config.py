import pytest

from rulebayes.bayes import Exponential, HalfCauchy, Normal
from rulebayes.config import EXPERIMENTS, ExperimentConfig, parse_distribution, sampler_config
from rulebayes.errors import ConfigError
from rulebayes.experiments import parse_penalty


def _write(tmp_path, text):
    p = tmp_path / "c.ini"
    p.write_text(text)
    return p


@pytest.mark.parametrize("name", EXPERIMENTS)
def test_packaged_configs_resolve(name):
    cfg = ExperimentConfig.load(name)
    assert cfg.name == name
    assert cfg.variants()[0][1] == "none"
    for _, text in cfg.variants():
        parse_penalty(text)
    s = cfg.sampler()
    assert s["burn_in"] < s["n_iterations"]


def test_user_file_layers_over_defaults(tmp_path):
    cfg = ExperimentConfig.load(_write(tmp_path, "[experiment]\nname = linear\nseed = 7\n[sampler]\nn_chains = 1\n"))
    assert cfg.seed == 7
    assert cfg.sampler()["n_chains"] == 1
    assert cfg.sampler()["n_iterations"] == 30000
    assert "seed = 7" in cfg.dumps()


def test_variants_section_is_replaced(tmp_path):
    cfg = ExperimentConfig.load(_write(tmp_path, "[experiment]\nname = linear\n[variants]\nBase = none\n"))
    assert cfg.variants() == [("Base", "none")]


def test_paper_scale_settings():
    cfg = ExperimentConfig.load("linear")
    assert cfg.sampler(paper_scale=True)["n_iterations"] == 120000
    assert cfg.sampler(paper_scale=True)["n_chains"] == cfg.sampler()["n_chains"]


@pytest.mark.parametrize(
    "text",
    ["[experiment]\nname = quadratic\n", "[data]\nx = 1\n", "[experiment]\nname = linear\n[sampler]\nn_chains = two\n"],
)
def test_bad_configs(tmp_path, text):
    with pytest.raises(ConfigError):
        cfg = ExperimentConfig.load(_write(tmp_path, text))
        cfg.sampler()


def test_missing_file():
    with pytest.raises(ConfigError):
        ExperimentConfig.load("/nonexistent/file.ini")


def test_parse_distribution():
    assert parse_distribution("normal 0 10") == Normal(0.0, 10.0)
    assert parse_distribution("Exponential 1") == Exponential(1.0)
    assert parse_distribution("halfcauchy 2.5") == HalfCauchy(2.5)
    for bad in ("normal 0", "gamma 1 1", "", "exponential x"):
        with pytest.raises(ConfigError):
            parse_distribution(bad)


def test_prior_globs_first_match_wins():
    cfg = ExperimentConfig.load("powerplant")
    spec = cfg.prior(["AT_co", "V_co", "b"])
    assert spec.dists == (Normal(0.0, 10.0), Normal(0.0, 10.0), Normal(0.0, 20.0))
    with pytest.raises(ConfigError):
        cfg.prior(["sigma"])


def test_sampler_config_scales_proposals():
    cfg = ExperimentConfig.load("linear")
    prior = cfg.prior(["alpha", "beta", "sigma"])
    sc = sampler_config(cfg.sampler(), prior, seed=3)
    assert sc.proposal_sd == pytest.approx((1.0, 1.0, 0.1))
    assert sc.seed == 3


def test_paths_resolve_to_packaged_resources():
    cfg = ExperimentConfig.load("linear")
    assert cfg.path("evolution", "grammar_proportion").is_file()
    cfg.set("evolution", "grammar_proportion", "missing.bnf")
    with pytest.raises(ConfigError):
        cfg.path("evolution", "grammar_proportion")
