import math

import pytest

from robust_phase.config import (ConfigError, ExperimentConfig, eval_int_rule, eval_rule,
                                 load_config, parse_corruption, parse_regime, read_pairs,
                                 resolve_parallelism)


@pytest.mark.parametrize("expr,names,value", [
    ("ceil(10*d*ln(d))", dict(d=50), 1957),
    ("ceil(sqrt(n))", dict(n=1957), 45),
    ("ceil(n^(2/3))", dict(n=1957), 157),
    ("ceil(0.25*n)", dict(n=1957), 490),
    ("-2 + 3", {}, 1),
])
def test_rules(expr, names, value):
    assert eval_int_rule(expr, **names) == value


@pytest.mark.parametrize("expr", ["__import__('os')", "n.real", "d", "1 +", "exp(1)", "[1]"])
def test_rule_rejects(expr):
    with pytest.raises(ConfigError):
        eval_rule(expr, n=3)


def test_non_integer_rule():
    with pytest.raises(ConfigError, match="ceil"):
        eval_int_rule("n/3", n=10)
    with pytest.raises(ConfigError):
        eval_rule("ln(0)")


def test_regimes():
    assert parse_regime("sqrt_n") == ("sqrt_n", "ceil(sqrt(n))")
    assert parse_regime("const_0.1") == ("const_0.1", "ceil(0.1*n)")
    assert parse_regime("mine: ceil(n/10)") == ("mine", "ceil(n/10)")
    with pytest.raises(ConfigError):
        parse_regime("half")


def test_corruption_specs():
    assert parse_corruption("uniform(-5,5)")(3).params == (-5.0, 5.0)
    assert parse_corruption("constant(1.5)")(2).kind == "independent_constant"
    assert parse_corruption("none")(0).kind == "none"
    assert parse_corruption("signflip") == "signflip"
    for bad in ["uniform(1)", "gauss", "constant(x)", "uniform(1,2"]:
        with pytest.raises(ConfigError):
            parse_corruption(bad)


def test_cells_and_validation():
    cfg = ExperimentConfig()
    assert cfg.cells() == [(50, 1957, 45, "sqrt_n"), (50, 1957, 157, "n_2_3"),
                           (50, 1957, 490, "const_0.25")]
    with pytest.raises(ConfigError, match="2k < n"):
        load_config(overrides=["regimes=half:ceil(n/2)"]).cells()


def test_file_and_overrides(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text("# sweep\nd = 10, 20\nn = ceil(20*d)  # rule\nseeds=1,2\nbeta=none\n")
    cfg = load_config(path, ["c=0.05", "seed=3"])
    assert cfg.d == (10, 20) and cfg.n_rule == "ceil(20*d)"
    assert cfg.seeds == (3,) and cfg.step_c == 0.05 and cfg.beta is None


@pytest.mark.parametrize("override", ["bogus=1", "mode=fast", "seeds=", "d=0", "T=x",
                                      "kappa_estimator=median", "nokey"])
def test_bad_overrides(override):
    with pytest.raises(ConfigError):
        load_config(overrides=[override])


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/exp.cfg")


def test_read_pairs_errors():
    with pytest.raises(ConfigError, match="line 2"):
        read_pairs("d=1\nnonsense\n")


def test_solver_k_assumed():
    cfg = load_config(overrides=["k_assumed=ceil(1.5*k)", "beta=0.01", "T=50"])
    s = cfg.solver(10, 1000, 5)
    assert s.k == 15 and s.beta == 0.01 and s.oracle_cfg.max_iters_T == 50
    assert ExperimentConfig().solver(7, 100, 5).k == 7


def test_echo_skips_parallelism():
    lines = load_config(overrides=["parallelism=4"]).echo()
    assert "seeds=0,1,2,3,4" in lines
    assert not any(ln.startswith("parallelism") for ln in lines)


def test_parallelism_precedence(monkeypatch):
    cfg = load_config(overrides=["parallelism=3"])
    monkeypatch.setenv("ROBUST_PHASE_THREADS", "2")
    assert resolve_parallelism(5, cfg) == 5
    assert resolve_parallelism(None, cfg) == 2
    monkeypatch.delenv("ROBUST_PHASE_THREADS")
    assert resolve_parallelism(None, cfg) == 3
    assert resolve_parallelism(None, ExperimentConfig()) >= 1
    monkeypatch.setenv("ROBUST_PHASE_THREADS", "many")
    with pytest.raises(ConfigError):
        resolve_parallelism(None, cfg)


def test_default_n_rule_matches_formula():
    assert eval_int_rule(ExperimentConfig().n_rule, d=100) == math.ceil(10 * 100 * math.log(100))
