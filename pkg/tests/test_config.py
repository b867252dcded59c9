import json

import pytest

from dynlab import config as cfg
from dynlab.exceptions import ConfigError


def test_defaults_are_reported_constants():
    c = cfg.resolve()
    assert (c["sdi"]["gamma"], c["sdi"]["epsilon"]) == (0.5, 0.1)
    assert (c["ctrnn"]["k"], c["ctrnn"]["kappa"], c["solver"]["dt"]) == (2, 0.01, 0.1)
    o = c["oua"]
    assert (o["lambda_"], o["sigma"], o["eta"], o["rho"]) == (2.0, 0.1, 5.0, 2.0)
    g = c["gp"]
    assert (g["n_islands"], g["pop_size"], g["n_generations"]) == (10, 100, 50)


@pytest.mark.parametrize("doc", [{"bogus": 1}, {"sdi": {"gama": 0.5}}, {"gp": {"pop_size": 2.5}},
                                 {"sdi": {"s0": [1.0]}}, {"ctrnn": {"freeze_tau": 1}},
                                 {"oua": "fast"}])
def test_bad_documents_rejected(doc):
    with pytest.raises(ConfigError):
        cfg.resolve(doc)


def test_partial_override_merges():
    c = cfg.resolve({"sdi": {"gamma": 1}, "gp": {"n_islands": 4}})
    assert c["sdi"]["gamma"] == 1.0 and c["sdi"]["epsilon"] == 0.1 and c["gp"]["pop_size"] == 100


def test_manifest_round_trip(tmp_path):
    c = cfg.resolve({"master_seed": 5})
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(cfg.manifest("learn", c, "0")))
    loaded, command = cfg.load(path)
    assert loaded == c and command == "learn"


def test_invalid_values_surface_as_config_errors():
    with pytest.raises(ConfigError):
        cfg.make_env(cfg.resolve({"sdi": {"gamma": -1.0}}))
    with pytest.raises(ConfigError):
        cfg.make_hyper(cfg.resolve({"oua": {"adapt_sigma": True}}))
    with pytest.raises(ConfigError):
        cfg.make_gp(cfg.resolve({"gp": {"p_crossover": 2.0}}))


def test_output_root_precedence(monkeypatch):
    monkeypatch.setenv("DYNLAB_OUT", "/env")
    assert cfg.output_root("/cli", {"output_dir": "/cfg"}) == "/cli"
    assert cfg.output_root(None, {"output_dir": "/cfg"}) == "/cfg"
    assert cfg.output_root(None, {"output_dir": None}) == "/env"
