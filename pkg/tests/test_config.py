import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bodepace.compensators import PidSpec, ZeroPoleSpec
from bodepace.config import ConfigError, RunConfig, reference_cohort_config
from bodepace.sim import BaselineSpec

pos = st.floats(1e-6, 1e3, allow_nan=False, allow_infinity=False)
corners = st.lists(pos, min_size=0, max_size=3).map(tuple)

compensators = st.one_of(
    st.none(),
    st.builds(PidSpec, pos, st.floats(0, 1), st.floats(0, 1)),
    st.builds(ZeroPoleSpec, pos, corners, corners),
    st.builds(BaselineSpec, pos),
)


@st.composite
def run_configs(draw):
    w_min = draw(st.floats(0.1, 10))
    return RunConfig(
        w_n_max=w_min + draw(st.floats(0, 50)),
        w_n_min=w_min,
        t_ps_s=draw(pos),
        t_f_s=draw(pos),
        taylor_order=draw(st.integers(2, 14)),
        compensator=draw(compensators),
        loop=draw(st.sampled_from(["compensated", "plant", "compensator"])),
        plant_case=draw(st.sampled_from(["max", "min"])),
        closed_loop=draw(st.booleans()),
        require_margins=draw(st.booleans()),
        f_min_hz=draw(pos),
        f_max_hz=draw(st.one_of(st.none(), pos)),
        points=draw(st.one_of(st.none(), st.integers(2, 5000))),
        k_p_set=tuple(draw(st.lists(pos, max_size=4))),
        k_i_set=tuple(draw(st.lists(pos, max_size=4))),
        zero_pole_cells=tuple(draw(st.lists(st.tuples(corners, corners), max_size=3))),
        horizon_s=draw(pos),
        noise_frac=draw(st.floats(0, 1)),
        noise_mode=draw(st.sampled_from(["std", "variance"])),
        seed=draw(st.integers(0, 2**31)),
        compare_baseline=draw(st.booleans()),
        hold_gain_s=draw(st.one_of(st.none(), pos)),
        cohorts=tuple(draw(st.lists(st.tuples(pos, st.floats(1e-6, 1)), min_size=1, max_size=7))),
        t_z_s=draw(st.one_of(st.none(), pos)),
    )


@settings(max_examples=100, deadline=None)
@given(run_configs())
def test_write_then_read_is_identity(cfg):
    assert RunConfig.loads(cfg.dumps()) == cfg


def test_defaults_round_trip_through_file(tmp_path):
    p = tmp_path / "run.ini"
    cfg = reference_cohort_config()
    cfg.write(p)
    assert RunConfig.read(p) == cfg
    assert len(cfg.cohorts) == 7


def test_units_in_key_names():
    text = RunConfig().dumps()
    for key in ("w_n_max_dollar_per_lambda_min", "t_ps_s", "t_f_s", "k_i_set_per_s", "f_min_hz", "horizon_s"):
        assert key in text


def test_partial_file_keeps_defaults():
    cfg = RunConfig.loads("[plant]\nt_ps_s = 5\n")
    assert cfg.t_ps_s == 5.0 and cfg.w_n_max == 13.52


@pytest.mark.parametrize(
    "text, field",
    [
        ("[plant]\nt_ps_s = ten\n", "t_ps_s"),
        ("[plant]\nw_n_min_dollar_per_lambda_min = 20\n", "plant"),
        ("[analysis]\nloop = sideways\n", "loop"),
        ("[compensator]\nkind = lead\n", "compensator"),
        ("[compensator]\nkind = zero_pole\nzeros_rad_per_s = -1\n", "compensator"),
        ("[sim]\ntraffic_csv = /no/such/file.csv\n", "traffic_csv"),
        ("[sim]\ncohorts_dollar_lambda = 100\n", "cohorts"),
    ],
)
def test_field_level_errors(text, field):
    with pytest.raises(ConfigError, match=field):
        RunConfig.loads(text)


def test_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.read(tmp_path / "absent.ini")
