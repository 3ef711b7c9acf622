import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semiflows import setvalued as sv


def test_box_basics():
    b = sv.Box(np.array([0.0, -1.0]), np.array([1.0, 1.0]))
    assert b.contains(np.array([0.5, 0.0]))
    assert not b.contains(np.array([1.5, 0.0]))
    assert np.allclose(b.midpoint, [0.5, 0.0])
    assert b.inflate(0.5).contains_box(b)
    assert b.distance(np.array([4.0, 5.0])) == pytest.approx(5.0)


def test_heaviside_is_interval_at_jump():
    lo, hi = sv.heaviside().bounds(np.array([-1.0, 0.0, 2.0]))
    assert lo.tolist() == [0.0, 0.0, 1.0]
    assert hi.tolist() == [0.0, 1.0, 1.0]
    assert sv.check_map(sv.heaviside()) == []


def test_builtin_maps_pass_validation():
    for m in (sv.cubic(15.0), sv.interval_band(0.3), sv.zero_map()):
        assert sv.check_map(m) == []


def test_nemitski_is_elementwise():
    box = sv.nemitski_apply(sv.interval_band(0.1), np.array([1.0, -2.0]))
    assert np.allclose(box.lo, [0.9, -2.1]) and np.allclose(box.hi, [1.1, -1.9])


def test_heaviside_envelope_closed_form():
    # sup_y H(y) - N/2 (y-x)^2 is 1 for x >= 0 and max(0, 1 - N x^2/2) for x < 0
    xs = np.linspace(-2.0, 2.0, 2001)
    for N in (1, 4, 16):
        vals, arg = sv.moreau_yosida_envelope(sv.heaviside().upper, N, xs, 3.0)
        expect = np.where(xs >= 0, 1.0, np.maximum(0.0, 1.0 - 0.5 * N * xs ** 2))
        assert np.max(np.abs(vals - expect)) < 1e-12
        assert np.all((arg == xs) | (arg == 0.0) | (expect == 0.0))


@pytest.mark.parametrize("N", [1, 3, 10])
def test_envelope_of_concave_quadratic(N):
    # sup_y -y^2 - N/2 (y-x)^2 = -N x^2 / (N + 2), attained at y = N x / (N + 2)
    xs = np.linspace(-3, 3, 301)
    vals, arg = sv.moreau_yosida_envelope(lambda y: -y * y, N, xs, 4.0, step=1e-4)
    assert np.max(np.abs(vals + N * xs ** 2 / (N + 2))) < 1e-7
    assert np.max(np.abs(arg - N * xs / (N + 2))) <= 1e-4


def test_envelope_of_linear_function():
    # sup_y a y - N/2 (y-x)^2 = a x + a^2 / (2N)
    a, N = 2.5, 4
    xs = np.linspace(-1, 1, 101)
    vals, _ = sv.moreau_yosida_envelope(lambda y: a * y, N, xs, 3.0)
    assert np.max(np.abs(vals - (a * xs + a * a / (2 * N)))) < 1e-7


def test_scalar_and_vector_envelopes_agree():
    m = sv.cubic(15.0)
    f = m.upper
    xs = np.array([-2.3, -0.4, 0.0, 1.7])
    # the frozen tails beyond the clip point hold the supremum here, right on the kink
    vec, arg = sv.moreau_yosida_envelope(f, 8, xs, 12.0, extra=m.breakpoints)
    assert arg[0] == -m.breakpoints[-1]
    sca = [sv.moreau_yosida_upper(f, 8, float(x), 12.0) for x in xs]
    assert np.allclose(vec, sca, atol=1e-7)
    low = [sv.moreau_yosida_lower(f, 8, float(x), 12.0) for x in xs]
    lvec, _ = sv.moreau_yosida_lower_envelope(f, 8, xs, 12.0, extra=m.breakpoints)
    assert np.allclose(lvec, low, atol=1e-7)
    coarse, _ = sv.moreau_yosida_envelope(f, 8, xs, 12.0)
    assert np.all(coarse <= vec) and np.max(vec - coarse) > 1e-4


def test_window_too_small_is_reported():
    with pytest.raises(sv.WindowError):
        sv.moreau_yosida_upper(lambda y: 10.0 * y, 1, 0.0, 0.5)
    with pytest.raises(sv.DomainError):
        sv.moreau_yosida_upper(lambda y: y, 1, float("nan"), 1.0)


@settings(max_examples=40, deadline=None)
@given(x=st.floats(-3, 3), N=st.integers(1, 32))
def test_envelope_sandwich_and_monotone_in_level(x, N):
    m = sv.heaviside()
    R = sv.growth_search_radius(m.growth_C1, m.growth_C2, 2 * N, x) + 0.1
    v1, x1 = sv.moreau_yosida_envelope(m.upper, N, np.array([x]), R)
    v2, _ = sv.moreau_yosida_envelope(m.upper, 2 * N, np.array([x]), R)
    assert m.upper(np.array([x]))[0] <= v1[0] <= m.upper(x1)[0]
    assert v2[0] <= v1[0]


def test_growth_constant_formula():
    m = sv.single_valued(np.sin, 1.0, 0.5)
    assert sv.growth_constant_D(m) == pytest.approx(1.0 + 0.125)
    assert sv.growth_constant_D(sv.interval_band(0.1)) == pytest.approx(1.0)


@pytest.fixture(scope="module")
def reg_heaviside():
    return sv.regularize(sv.heaviside(), 4)


def test_regularized_heaviside_values(reg_heaviside):
    up = reg_heaviside.upper_env
    assert up(np.array([-0.5]))[0] == pytest.approx(0.5, abs=1e-5)
    assert up(np.array([0.3]))[0] == pytest.approx(1.0, abs=1e-5)
    assert reg_heaviside.lower_env(np.array([0.5]))[0] == pytest.approx(0.5, abs=1e-5)


def test_regularized_map_contains_base(reg_heaviside):
    u = np.linspace(-12, 12, 20001)
    lo, hi = sv.heaviside().bounds(u)
    rlo, rhi = reg_heaviside.bounds(u)
    assert np.all(rlo <= lo) and np.all(rhi >= hi)


def test_regularized_map_is_globally_lipschitz(reg_heaviside):
    c = reg_heaviside.lipschitz_cN
    lift = reg_heaviside.details["table_margin"]
    for fn in (reg_heaviside.upper_env, reg_heaviside.lower_env):
        x = np.linspace(-40, 40, 80001)
        y = fn(x)
        assert np.max(np.abs(np.diff(y)) / np.diff(x)) <= c
        D = reg_heaviside.growth_D
        assert np.all(np.abs(y) <= D * (1 + np.abs(x)) + lift + 1e-12)


def test_regularized_smooth_map_converges():
    # a 1-Lipschitz map's envelope overshoots by at most 1/(2N) on [-N, N]
    m = sv.single_valued(np.sin, 1.0, 0.0, name="sin")
    xs = np.linspace(-3, 3, 6001)
    gaps = []
    for N in (4, 8, 16):
        r = sv.regularize(m, N)
        gap = float(np.max(r.upper_env(xs) - np.sin(xs)))
        assert gap <= 0.5 / N + r.details["table_margin"] + 1e-9
        gaps.append(gap)
    assert gaps == sorted(gaps, reverse=True)


def test_inflate_widens_values(reg_heaviside):
    wider = sv.inflate(reg_heaviside, 0.25)
    lo, hi = wider.bounds(np.array([1.0]))
    lo0, hi0 = reg_heaviside.bounds(np.array([1.0]))
    assert lo[0] == pytest.approx(lo0[0] - 0.25) and hi[0] == pytest.approx(hi0[0] + 0.25)
    with pytest.raises(ValueError):
        sv.inflate(reg_heaviside, -1.0)


def test_regularize_rejects_level_zero():
    with pytest.raises(ValueError):
        sv.regularize(sv.heaviside(), 0)


def test_parse_map(tmp_path):
    assert sv.parse_map("cubic:lambda=15").upper(np.array([1.0]))[0] == pytest.approx(14.0)
    assert sv.parse_map("heaviside").name == "heaviside"
    assert sv.parse_map("interval_band:w=0.5").growth_C1 == 0.5
    p = tmp_path / "m.csv"
    p.write_text("u,lower,upper\n-1,-1,0\n1,0,1\n")
    m = sv.parse_map(f"custom:{p.name}", base_dir=tmp_path)
    lo, hi = m.bounds(np.array([0.0]))
    assert lo[0] == pytest.approx(-0.5) and hi[0] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        sv.parse_map("nonsense")


def test_cubic_clip_freezes_values():
    m = sv.cubic(15.0, clip=2.0)
    assert m.upper(np.array([5.0]))[0] == pytest.approx(2.0 * (15.0 - 4.0))
    assert m.growth_C2 == 0.0


def test_table_map_rejects_inverted_bounds():
    with pytest.raises(ValueError):
        sv.table_map([0, 1], [1, 1], [0, 2])
