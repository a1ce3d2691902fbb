import pytest
from hypothesis import given, strategies as st

from crackle.config import ExperimentConfig, load_config, parse_config, serialize_config
from crackle.errors import ConfigError

MINIMAL = "density.family = heavy_polynomial\ndensity.alpha = 2.5\nn.grid = [1000]\n"


def test_minimal_config_gets_defaults():
    cfg = parse_config(MINIMAL)
    assert (cfg.dim, cfg.k, cfg.constraint_kind, cfg.rn_rule) == (1, 2, "connected", "constant")
    assert (cfg.replications, cfg.seed, cfg.output_dir, cfg.rn_scale) == (100, 0, "out", 1.0)
    assert cfg.n_grid == (1000.0,)


def test_comments_blank_lines_and_bare_words():
    cfg = parse_config("# campaign\n\ndensity.family = light_von_mises\ndensity.tau = 1\n"
                       "n.grid = [1e3, 1e4]\nconstraint.kind = gamma_iso\nconstraint.graph = star\nk = 4\n")
    assert cfg.family == "light_von_mises" and cfg.constraint().target.num_vertices == 4


def _error(text):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    return info.value


def test_alpha_must_exceed_dim():
    err = _error("density.family = heavy_polynomial\ndensity.alpha = 2\ndim = 2\nn.grid = [100]\n")
    assert err.field == "density.alpha" and err.line == 2 and "alpha > dim" in str(err)


def test_power_band_rejected():
    err = _error(MINIMAL + "r_n.rule = power\nr_n.exponent = -3\n")
    assert err.field == "r_n.exponent" and err.line == 5 and "< s <= 0" in str(err)


@pytest.mark.parametrize("text,field", [
    (MINIMAL + "replications = 0\n", "replications"),
    (MINIMAL + "seed = -1\n", "seed"),
    (MINIMAL + "bogus = 1\n", "bogus"),
    (MINIMAL + "dim = 1.5\n", "dim"),
    (MINIMAL + "density.alpha = 3\n", "density.alpha"),
    ("density.alpha = 2.5\nn.grid = [100]\n", "density.family"),
    ("density.family = light_von_mises\nn.grid = [100]\n", "density.tau"),
    (MINIMAL + "constraint.kind = cycle\n", "constraint.kind"),
    (MINIMAL + "n.grid2 = 1\n", "n.grid2"),
])
def test_schema_violations(text, field):
    assert _error(text).field == field


def test_missing_equals_reports_line():
    err = _error(MINIMAL + "just words\n")
    assert err.line == 4
    assert err.record()["line"] == 4


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.cfg")
    path = tmp_path / "ok.cfg"
    path.write_text(MINIMAL, encoding="utf-8")
    assert load_config(path) == parse_config(MINIMAL)


configs = st.one_of(
    st.builds(ExperimentConfig, family=st.just("heavy_polynomial"),
              n_grid=st.lists(st.floats(2.0, 1e8), min_size=1, max_size=4).map(tuple),
              alpha=st.floats(2.01, 9.0), dim=st.integers(1, 2), k=st.integers(2, 4),
              replications=st.integers(1, 1000), seed=st.integers(0, 2 ** 63),
              rn_rule=st.sampled_from(["constant", "log_power"]), rn_exponent=st.floats(-1, 0),
              rn_scale=st.floats(0.1, 10.0)),
    st.builds(ExperimentConfig, family=st.just("light_von_mises"),
              n_grid=st.lists(st.floats(2.0, 1e8), min_size=1, max_size=4).map(tuple),
              tau=st.floats(0.1, 5.0), dim=st.integers(1, 3), k=st.integers(2, 3),
              constraint_kind=st.sampled_from(["connected", "betti_cycle"]),
              output_dir=st.text("abcxyz/_-", min_size=1, max_size=10)),
)


@given(configs)
def test_round_trip(cfg):
    assert parse_config(serialize_config(cfg)) == cfg
