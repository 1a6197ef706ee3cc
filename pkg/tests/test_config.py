import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oblimit.config import SCHEMA, default_document, parse_config
from oblimit.exceptions import ConfigError


def test_empty_document_gives_defaults():
    cfg = parse_config("")
    assert cfg["limit_harness"]["A_sequence"] == (0.2, 0.1, 0.05, 0.025)
    assert cfg["limit_harness"]["b_coeff"] == 1.0 and cfg["limit_harness"]["b_power"] == 2.0
    assert cfg["nondim"]["theta_r"] == 10.0
    assert (cfg["solver"]["nx"], cfg["solver"]["ny"]) == (64, 64)
    study = cfg.study_config()
    assert study.B(0.1) == pytest.approx(0.01)


def test_spelled_out_defaults_equal_empty_document():
    assert parse_config(default_document()).as_dict() == parse_config("").as_dict()


def test_negative_theta_r_rejected():
    with pytest.raises(ConfigError, match="theta_r"):
        parse_config("[nondim]\ntheta_r = -20\n")


@pytest.mark.parametrize(
    "text,pattern",
    [
        ("[solver]\nnx = 2\n", r"solver\.nx \(line 2\)"),
        ("[solver]\n\nlx = -1\n", r"solver\.lx \(line 3\).*> 0"),
        ("[solver]\nsystem = euler\n", "system"),
        ("[solver]\ndt = 1.0\n", "dt"),
        ("[solver]\nupwind = maybe\n", "upwind"),
        ("[limit_harness]\nA_sequence = 0.1, 0.2\n", "decreasing"),
        ("[limit_harness]\nA_sequence = 0.1, nan\n", "A_sequence"),
        ("[constitutive]\ntheta_max = 2000\n", "theta_max"),
        ("[nondim]\nband_hi = 0.001\n", "band_hi"),
    ],
)
def test_range_violations_name_the_key(text, pattern):
    with pytest.raises(ConfigError, match=pattern):
        parse_config(text)


@pytest.mark.parametrize(
    "text,line",
    [
        ("nx = 3\n", 1),
        ("[solver]\nnx = 32\n\nnot a pair\n", 4),
        ("[solver]\nnx = 32\nnx = 16\n", 3),
    ],
)
def test_syntax_errors_report_line(text, line):
    with pytest.raises(ConfigError, match=f"line {line}"):
        parse_config(text)


def test_unknown_keys_and_sections():
    with pytest.raises(ConfigError, match=r"solver\.nz \(line 3\): unknown key"):
        parse_config("[solver]\nnx = 8\nnz = 8\n")
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config("[plots]\n")
    # keys are case sensitive: A and a are different parameters
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config("[nondim]\na = 0.1\n")


def test_document_is_kept_verbatim():
    text = "# study\n[solver]\nnx = 32   ; coarse\n\n[nondim]\nA = 0.05\nB = 0.0025\n"
    cfg = parse_config(text)
    assert cfg.text == text
    assert cfg["solver"]["nx"] == 32 and cfg["nondim"]["A"] == 0.05


def test_out_override():
    assert parse_config("[cli]\nout = a\n", out="b").out == "b"
    assert parse_config("[cli]\nout = a\n").out == "a"


def test_flow_and_check_scales_are_separate():
    cfg = parse_config("[nondim]\ntheta_r = 5\nc0 = 2\n[solver]\nc0 = 50\n")
    assert cfg.base_scales().c0_dim == 2 and cfg.flow_scales().c0_dim == 50
    assert cfg.flow_scales().theta_r == 5


float_keys = [(s, k) for s, keys in SCHEMA.items() for k, rule in keys.items()
              if rule.kind == "float" and rule.lo is not None]


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(float_keys), st.floats(1e-3, 1e3))
def test_valid_values_roundtrip(item, value):
    section, key = item
    text = f"[{section}]\n{key} = {value!r}\n"
    try:
        cfg = parse_config(text)
    except ConfigError as exc:
        # only cross-key constraints may reject an in-range value
        assert str(exc).startswith(f"{section}.")
        return
    assert cfg[section][key] == value


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(float_keys), st.floats(-1e3, -1e-6))
def test_negative_values_rejected_by_name(item, value):
    section, key = item
    with pytest.raises(ConfigError, match=key):
        parse_config(f"[{section}]\n{key} = {value!r}\n")
