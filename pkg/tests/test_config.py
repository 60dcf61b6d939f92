import math
import re
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from adaptive_pll.config import SCHEMA, ConfigError, SimConfig, parse_config, parse_config_text


def test_empty_file_gives_laboratory_defaults(tmp_path):
    path = tmp_path / "empty.ini"
    path.write_text("", encoding="utf-8")
    cfg = parse_config(path)
    assert cfg == SimConfig()
    p = cfg.plant
    assert (p.L, p.r, p.C, p.L_g, p.r_g) == (9.5e-3, 0.64, 4.6e-6, 0.282, 12.8)
    assert cfg.grid.V_g == 310.2687
    assert (cfg.pll.K_P, cfg.pll.K_I, cfg.current.K_P, cfg.current.K_I) == (200, 5000, 1250, 50000)
    e = cfg.estimator
    assert (cfg.filt.lam, e.alpha, e.beta, e.M, e.f0) == (1000, 600, 500, 100, 1)
    assert (cfg.P_ref, cfg.V_ref) == (600.0, 380.0)


def test_range_error_names_the_key():
    with pytest.raises(ConfigError, match=r"plant\.L "):
        parse_config_text("L = -1\n")
    with pytest.raises(ConfigError, match=r"sim\.dt"):
        parse_config_text("[sim]\ndt = 0\n")


def test_missing_file():
    with pytest.raises(ConfigError, match="not found"):
        parse_config("/nonexistent/adaptive.ini")


def test_syntax_error_reports_line_number():
    with pytest.raises(ConfigError, match=":3:"):
        parse_config_text("[plant]\nL = 1e-3\nthis line is broken\n")


def test_unknown_keys_and_sections_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config_text("[plant]\nLL = 1\n")
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config_text("[plnt]\nL = 1\n")
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config_text("bogus = 1\n")


def test_ambiguous_bare_key():
    with pytest.raises(ConfigError, match="ambiguous"):
        parse_config_text("K_P = 10\n")
    assert parse_config_text("[current]\nK_P = 10\n").current.K_P == 10.0


def test_choice_error_lists_options():
    with pytest.raises(ConfigError, match="srf"):
        parse_config_text("[pll]\ndetector = cordic\n")


def test_bad_number():
    with pytest.raises(ConfigError, match="beta"):
        parse_config_text("[estimator]\nbeta = fast\n")
    with pytest.raises(ConfigError, match="theta0"):
        parse_config_text("[estimator]\ntheta0 = 1, 2\n")


def test_informational_sections_are_skipped():
    cfg = parse_config_text("[run]\nanything = goes\n[references]\nP600.Q = 1\n"
                            "[scenario]\nname = x\n[grid]\nf = 52\n")
    assert cfg.grid.omega == pytest.approx(2 * math.pi * 52)


def test_inline_comments():
    cfg = parse_config_text("[estimator]\nbeta = 250  ; forgetting rate\nM = 50 # cap\n")
    assert (cfg.estimator.beta, cfg.estimator.M) == (250.0, 50.0)


def test_readme_config_block_gives_defaults():
    readme = Path(__file__).resolve().parents[1] / "README.md"
    block = re.search(r"```ini\n(.*?)```", readme.read_text(encoding="utf-8"), re.S).group(1)
    assert parse_config_text(block) == SimConfig()


def test_text_round_trip_of_defaults():
    cfg = SimConfig()
    assert parse_config_text(cfg.to_text()) == cfg


@given(st.floats(1e-4, 1.0), st.floats(1.0, 2000.0), st.floats(0.0, 1e3),
       st.sampled_from(["atan", "srf"]), st.sampled_from(["abc", "dq"]),
       st.tuples(*[st.floats(-1e4, 1e4)] * 3), st.booleans(), st.floats(1.0, 400.0))
def test_text_round_trip_is_exact(L, lam, beta, det, model, theta0, sat, f):
    cfg = SimConfig().replace(plant__L=L, observer__lambda=lam, estimator__beta=beta, grid__f=f,
                              pll__detector=det, sim__model=model, estimator__theta0=theta0,
                              sim__saturation_warning=sat)
    assert parse_config_text(cfg.to_text()) == cfg


def test_replace_validates():
    with pytest.raises(ConfigError):
        SimConfig().replace(sim__dt=-1.0)
    with pytest.raises(ConfigError):
        SimConfig().replace(plant__nothing=1.0)
    with pytest.raises(ConfigError):
        SimConfig().replace(grid__f=float("inf"))


def test_schema_defaults_match_dataclass_defaults():
    assert SimConfig.from_values({}) == SimConfig()
    assert set(SCHEMA) == {"plant", "grid", "power", "pll", "current", "observer",
                           "estimator", "sim"}
