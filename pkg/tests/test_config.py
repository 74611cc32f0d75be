import json

import pytest

from vacuumpath.config import ParseError, RunConfig, ValidationError, apply_overrides, parse_config, parse_text


def test_relativistic_defaults():
    cfg = RunConfig().validate()
    assert (cfg.lam, cfg.eta, cfg.dim, cfg.variant) == (1.0, 16.0, 2, "symmetric")
    assert cfg.sigma == "optimize" and (cfg.sigma_min, cfg.sigma_max) == (0.05, 2.0)
    assert cfg.gamma == 5e-8 and cfg.dt is None and cfg.t_final == 40.0
    assert cfg.sweep_lambda == [1.0, 1.4, 1.8, 2.3] and cfg.sweep_eta == [7.0, 10.0, 13.0, 16.0]


def test_coldatom_defaults():
    cfg = RunConfig(system="coldatom").validate()
    assert (cfg.g0, cfg.lam, cfg.eta, cfg.winding) == (1.0, 0.25, 0.8, 0)
    assert cfg.gamma > 0


def test_explicit_values_survive_resolution():
    cfg = RunConfig(lam=1.8, gamma=1e-6).validate()
    assert cfg.lam == 1.8 and cfg.gamma == 1e-6 and cfg.eta == 16.0


def test_zero_eta_is_rejected_by_name():
    with pytest.raises(ValidationError) as err:
        RunConfig(eta=0.0).validate()
    assert any(p.startswith("eta:") for p in err.value.problems)


def test_all_problems_reported_together():
    with pytest.raises(ValidationError) as err:
        RunConfig(eta=-1.0, dim=5, variant="wobbly", plateau_fraction=0.0).validate()
    names = {p.split(":")[0] for p in err.value.problems}
    assert {"eta", "dim", "variant", "plateau_fraction"} <= names


@pytest.mark.parametrize("kw, name", [(dict(eta=0.3), "eta"), (dict(lam=2.5), "lambda"),
                                      (dict(lam=0.6, eta=5.0), "lambda"), (dict(dim=3), "dim")])
def test_coldatom_false_vacuum_conditions(kw, name):
    with pytest.raises(ValidationError) as err:
        RunConfig(system="coldatom", **kw).validate()
    assert any(p.startswith(name + ":") for p in err.value.problems)


def test_auto_dt_needs_damping():
    with pytest.raises(ValidationError):
        RunConfig(gamma=0.0).validate()
    RunConfig(gamma=0.0, dt=1e-3).validate()


def test_unknown_system():
    with pytest.raises(ValidationError):
        RunConfig(system="plasma").validate()


def test_parse_text():
    cfg = parse_text("# a comment\nlambda = 1.4\neta = 10   # inline\nsweep_eta = 7, 16\nsigma = 0.5\n"
                     "variant = Asymmetric\ndt = auto\n")
    assert cfg.lam == 1.4 and cfg.eta == 10.0 and cfg.sweep_eta == [7.0, 16.0]
    assert cfg.sigma == 0.5 and cfg.variant == "asymmetric" and cfg.dt is None


def test_unknown_key_names_line():
    with pytest.raises(ParseError, match=r"run\.cfg:3: unknown key 'colour'"):
        parse_text("eta = 3\n\ncolour = red\n", "run.cfg")


def test_bad_value_names_line():
    with pytest.raises(ParseError, match=r":2: bad value"):
        parse_text("eta = 3\ndim = two\n")


def test_duplicate_key_reports_its_line():
    with pytest.raises(ParseError, match=r"\[line 3\]"):
        parse_text("eta = 3\nlambda = 1\neta = 4\n")


def test_sections_rejected():
    with pytest.raises(ParseError):
        parse_text("eta = 3\n[extra]\nx = 1\n")


def test_auto_only_where_allowed():
    with pytest.raises(ParseError):
        parse_text("depth = auto\n")


def test_dumps_round_trip():
    cfg = RunConfig(lam=1.4, eta=13.0, sigma=0.61, sweep_lambda=[1.0, 2.3], temperature=0.5).validate()
    assert parse_text(cfg.dumps()) == cfg


def test_meta_json_round_trip(tmp_path):
    cfg = RunConfig(lam=1.4, gamma=1e-7, variant="rdependent").validate()
    (tmp_path / "meta.json").write_text(json.dumps({"config": cfg.to_dict()}))
    assert parse_config(tmp_path / "meta.json") == cfg
    (tmp_path / "bad.json").write_text("{}")
    with pytest.raises(ParseError):
        parse_config(tmp_path / "bad.json")


def test_overrides():
    cfg = apply_overrides(RunConfig(), ["eta=7", "sweep_lambda=1.0,1.8", "LAMBDA = 2.3"])
    assert cfg.eta == 7.0 and cfg.sweep_lambda == [1.0, 1.8] and cfg.lam == 2.3
    with pytest.raises(ParseError):
        apply_overrides(RunConfig(), ["eta"])
    with pytest.raises(ParseError):
        apply_overrides(RunConfig(), ["nope=1"])
