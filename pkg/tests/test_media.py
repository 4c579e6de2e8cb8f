import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from msfem_transport.errors import ConfigError, InvalidMediaError
from msfem_transport.media import (
    BUILTIN_NAMES,
    MediaSpec,
    builtin_media,
    constant_media,
    evaluate_media,
    load_media_table,
    tabulated_media,
)


def test_sine10_at_peak():
    assert evaluate_media(builtin_media("sine10"), 0.05) == pytest.approx(2.1, abs=1e-14)


def test_constant_media_value():
    spec = constant_media(3.5)
    assert evaluate_media(spec, 0.3) == 3.5
    assert evaluate_media(constant_media(3.5, 2), (0.1, -0.7)) == 3.5


def test_aniso2d_point():
    assert evaluate_media(builtin_media("aniso2d"), (0.25, 0.05)) == pytest.approx(2.1, abs=1e-14)


def test_cos_delta_formula():
    spec = builtin_media("cos_delta", delta=1 / 8)
    x = np.linspace(-1, 1, 101)
    assert np.allclose(spec(x), 1 / (np.cos(16 * np.pi * x) + 4), atol=1e-15)


def test_benchmark2d_formula():
    spec = builtin_media("benchmark2d")
    x, y = np.meshgrid(np.linspace(-1, 1, 17), np.linspace(-1, 1, 13), indexing="ij")
    expect = (2 + 1.8 * np.sin(10 * np.pi * x)) / (2 + 1.8 * np.cos(10 * np.pi * y)) + (
        2 + np.sin(10 * np.pi * y)
    ) / (2 + 1.8 * np.sin(10 * np.pi * x))
    assert np.allclose(spec(x, y), expect, rtol=1e-14)


def test_unknown_builtin():
    with pytest.raises(ConfigError):
        builtin_media("sine30")


def test_cos_delta_needs_delta():
    with pytest.raises(ConfigError):
        builtin_media("cos_delta")


def test_period_must_divide_domain():
    with pytest.raises(ConfigError):
        builtin_media("cos_delta", delta=0.3)


def test_point_outside_domain():
    with pytest.raises(ConfigError):
        evaluate_media(builtin_media("sine10"), 1.5)


def test_non_positive_media_rejected_with_point():
    with pytest.raises(InvalidMediaError) as info:
        MediaSpec("bad", 1, (2.0,), 2.0, lambda x: np.sin(np.pi * x))
    assert info.value.point is not None


@pytest.mark.parametrize("name", [n for n in BUILTIN_NAMES if n != "cos_delta"])
def test_builtins_positive_on_dense_grid(name):
    spec = builtin_media(name)
    axes = [np.arange(64 * round(2 / p) + 1) * (p / 64) - 1 for p in spec.period]
    grids = np.meshgrid(*axes, indexing="ij")
    assert np.min(spec(*grids)) > 0


@pytest.mark.parametrize("name,delta", [("sine10", None), ("sine20", None), ("cos_delta", 1 / 24),
                                        ("aniso2d", None), ("benchmark2d", None)])
def test_builtin_periodicity(name, delta):
    spec = builtin_media(name, delta)
    rng = np.random.default_rng(1)
    pts = rng.uniform(-1, 1, size=(200, spec.dimension))
    base = spec(*pts.T)
    for axis, p in enumerate(spec.period):
        shifted = pts.copy()
        shifted[:, axis] += p
        assert np.max(np.abs(spec(*shifted.T) - base)) <= 1e-12


@given(st.floats(-1, 1), st.sampled_from([1 / 8, 1 / 24, 1 / 40, 1 / 56]))
def test_cos_delta_bounds(x, delta):
    v = evaluate_media(builtin_media("cos_delta", delta), x)
    assert 0.2 - 1e-15 <= v <= 1 / 3 + 1e-15


def test_key_is_stable():
    assert builtin_media("sine10").key == builtin_media("sine10").key
    assert builtin_media("cos_delta", 1 / 8).key != builtin_media("cos_delta", 1 / 24).key


def test_tabulated_interpolates_linearly():
    x = np.linspace(-1, 1, 8, endpoint=False)
    spec = tabulated_media([x], 2 + np.sin(np.pi * x))
    assert np.allclose(spec(x), 2 + np.sin(np.pi * x))
    mid = 0.5 * (x[0] + x[1])
    assert spec(mid) == pytest.approx(0.5 * (spec(x[0]) + spec(x[1])))
    # periodic wrap
    assert spec(x[0] + 2.0) == pytest.approx(spec(x[0]))


def test_load_media_table_roundtrip(tmp_path):
    x = np.linspace(-1, 1, 11)
    path = tmp_path / "media.csv"
    rows = ["x,value"] + [f"{float(xx)!r},{float(2 + np.cos(np.pi * xx))!r}" for xx in x]
    path.write_text("\n".join(rows) + "\n")
    spec = load_media_table(path, delta=2.0)
    assert spec.dimension == 1
    assert np.allclose(spec(x[:-1]), 2 + np.cos(np.pi * x[:-1]))


def test_load_media_table_2d(tmp_path):
    axis = np.linspace(-1, 1, 5, endpoint=False)
    path = tmp_path / "m2.csv"
    lines = ["x,y,value"]
    for xx in axis:
        for yy in axis:
            lines.append(f"{xx},{yy},{3 + xx * yy}")
    path.write_text("\n".join(lines) + "\n")
    spec = load_media_table(path)
    assert spec.dimension == 2
    assert spec(axis[1], axis[2]) == pytest.approx(3 + axis[1] * axis[2])


def test_load_media_table_missing(tmp_path):
    with pytest.raises(ConfigError):
        load_media_table(tmp_path / "nope.csv")


def test_load_media_table_malformed(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,value\n0.0,abc\n")
    with pytest.raises(ConfigError):
        load_media_table(path)
    path.write_text("x,value\n")
    with pytest.raises(ConfigError):
        load_media_table(path)
