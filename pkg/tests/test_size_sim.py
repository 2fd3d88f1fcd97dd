"""Division trees: samplers, genealogy invariants, reproducibility."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from conftest import TG_CV
from malthus.age_model import AlphaFamily, Dirac, TruncatedGaussian, UniformLaw
from malthus.numerics import RngStream
from malthus.size_sim import (
    AutoRegressive,
    DrawnFromKernel,
    Exponential,
    FixedRate,
    Linear,
    Memoryless,
    SimConfig,
    SizeDivisionRate,
    Symmetric,
    UniformAsymmetric,
    biomass_at,
    lifetime,
    living_at,
    sample_daughter_size_unit_time,
    sample_division_size,
    sample_growth_rate,
    simulate_tree,
)

TG = TruncatedGaussian(0.0, 2.0, 0.7)


def make_config(alpha=0.4, horizon=6.0, growth=None, split=None, kernel=None, **kw):
    law = AlphaFamily(TG, alpha) if alpha > 0.0 else Dirac(1.0)
    return SimConfig(
        division=kw.pop("division", SizeDivisionRate(1.0, 2.0, "unit_size")),
        growth=growth or Exponential(),
        split=split or Symmetric(),
        kernel=kernel or Memoryless(law),
        horizon=horizon,
        root_size=kw.pop("root_size", 2.0),
        root_rate=kw.pop("root_rate", FixedRate(1.0)),
        **kw,
    )


# --- division-size samplers ----------------------------------------------------


def test_division_size_closed_form():
    div = SizeDivisionRate(1.0, 2.0, "unit_size")
    for u in (0.0, 0.1, 0.5, 0.9, 0.999):
        e = -math.log1p(-u)
        expect = 1.0 + (3.0 * e + 1.0) ** (1.0 / 3.0)
        assert abs(sample_division_size(div, 2.0, u) - expect) < 1e-12
    # birth below the hazard threshold: cumulative starts at x0
    for u in (0.3, 0.7):
        e = -math.log1p(-u)
        expect = 1.0 + (3.0 * e) ** (1.0 / 3.0)
        assert abs(sample_division_size(div, 0.5, u) - expect) < 1e-12


@given(st.floats(0.0, 0.999999), st.floats(0.0, 0.999999))
@settings(deadline=None, max_examples=60)
def test_division_size_is_inverse_cdf(u1, u2):
    div = SizeDivisionRate(1.0, 1.5, "unit_size")
    s1 = sample_division_size(div, 1.3, u1)
    s2 = sample_division_size(div, 1.3, u2)
    assert s1 >= 1.3 - 1e-9 and s2 >= 1.3 - 1e-9
    if u1 < u2:
        assert s1 <= s2 + 1e-12
    # round trip through the cumulative hazard
    e = div.cumulative(s1) - div.cumulative(1.3)
    assert abs(e + math.log1p(-u1)) < 1e-9


def test_division_size_validation():
    div = SizeDivisionRate(1.0, 2.0, "unit_size")
    with pytest.raises(ValueError):
        sample_division_size(div, 2.0, 1.0)
    with pytest.raises(ValueError):
        sample_division_size(div, 2.0, -0.1)
    with pytest.raises(ValueError):
        sample_division_size(div, 0.0, 0.5)
    with pytest.raises(ValueError):
        sample_division_size(SizeDivisionRate(1.0, 2.0, "unit_time"), 2.0, 0.5)


def test_unit_time_sampler_matches_quadrature_cdf():
    div = SizeDivisionRate(1.0, 2.0, "unit_time")
    rng = RngStream(11, 0)
    n = 20_000
    draws = np.sort([2.0 * sample_daughter_size_unit_time(div, 2.0, 1.0, rng) for _ in range(n)])
    # per-time hazard v x B(x) along exponential growth integrates to
    # int_xb^s B(y)/y dy independent of v
    prim = lambda y: 0.5 * y * y - 2.0 * y + np.log(y)
    cdf = 1.0 - np.exp(-(prim(draws) - prim(2.0)))
    i = np.arange(1, n + 1)
    ks = max(np.max(cdf - (i - 1) / n), np.max(i / n - cdf))
    assert ks < 0.02
    assert draws[0] >= 2.0


def test_lifetime_closed_forms():
    assert abs(lifetime(Exponential(), 1.5, 3.0, 2.0) - math.log(2.0) / 2.0) < 1e-15
    assert abs(lifetime(Linear(), 1.5, 3.0, 0.5) - 3.0) < 1e-15
    assert lifetime(Exponential(), 2.0, 2.0, 1.0) == 0.0
    with pytest.raises(ValueError):
        lifetime(Exponential(), 2.0, 1.9, 1.0)
    with pytest.raises(ValueError):
        lifetime(Exponential(), 1.0, 2.0, 0.0)


def test_growth_laws_size_at():
    assert abs(Exponential().size_at(2.0, 0.5, 3.0) - 2.0 * math.exp(1.5)) < 1e-14
    assert Linear().size_at(2.0, 0.5, 3.0) == 3.5


def test_sample_growth_rate_kernels():
    rng = RngStream(3, 0)
    law = AlphaFamily(TG, 0.5)
    vs = [sample_growth_rate(Memoryless(law), None, rng) for _ in range(2000)]
    lo, hi = law.law().support
    assert all(lo <= v <= hi for v in vs)
    assert abs(np.mean(vs) - 1.0) < 0.02
    # autoregressive pull toward the parent
    ar = AutoRegressive(law, 0.9)
    child = [sample_growth_rate(ar, 1.4, rng) for _ in range(500)]
    assert abs(np.mean(child) - (0.9 * 1.4 + 0.1 * 1.0)) < 0.02


# --- whole-tree invariants -------------------------------------------------------


def _children_of(tree):
    counts = np.bincount(tree.parent[1:], minlength=len(tree))
    return counts


def test_mass_conservation_bit_exact():
    for split in (Symmetric(), UniformAsymmetric(0.1)):
        tree = simulate_tree(make_config(split=split, horizon=7.0), RngStream(9, 2))
        counts = _children_of(tree)
        assert set(np.unique(counts)) <= {0, 2}
        sums = np.zeros(len(tree))
        np.add.at(sums, tree.parent[1:], tree.xi[1:])
        divided = counts == 2
        assert np.array_equal(sums[divided], tree.division_size[divided])


def test_symmetric_split_gives_exact_halves():
    tree = simulate_tree(make_config(horizon=6.0), RngStream(1, 0))
    nz = tree.parent[1:]
    assert np.array_equal(tree.xi[1:], 0.5 * tree.division_size[nz])


def test_asymmetric_fractions_stay_in_window():
    eps = 0.2
    tree = simulate_tree(make_config(split=UniformAsymmetric(eps), horizon=7.0), RngStream(4, 1))
    frac = tree.xi[1:] / tree.division_size[tree.parent[1:]]
    assert frac.min() >= eps - 1e-12 and frac.max() <= 1.0 - eps + 1e-12
    assert frac.max() > 0.5 > frac.min()


def test_genealogy_invariants():
    tree = simulate_tree(make_config(horizon=6.5), RngStream(12, 5))
    assert np.all(tree.d == tree.b + tree.zeta)
    assert np.all(tree.zeta > 0.0)
    assert np.array_equal(tree.b[1:], tree.d[tree.parent[1:]])
    cells = list(tree.cells())
    assert cells[0].path == "" and cells[0].parent_path is None
    for i, c in enumerate(cells[1:], start=1):
        assert c.path == c.parent_path + str(int(tree.bit[i]))
    paths = [c.path for c in cells]
    assert len(set(paths)) == len(paths)


def test_exponential_symmetric_child_size_identity():
    tree = simulate_tree(make_config(horizon=6.0), RngStream(2, 3))
    p = tree.parent[1:]
    expect = 0.5 * tree.xi[p] * np.exp(tree.tau[p] * tree.zeta[p])
    assert np.allclose(tree.xi[1:], expect, rtol=1e-12, atol=0.0)


def test_memoryless_rates_uncorrelated_with_parent():
    tree = simulate_tree(make_config(alpha=0.8, horizon=9.5), RngStream(21, 0))
    child = tree.tau[1:]
    parent = tree.tau[tree.parent[1:]]
    assert child.size > 3000
    r = stats.spearmanr(parent, child).statistic
    assert abs(r) < 0.03


def test_autoregressive_rates_track_parent():
    law = AlphaFamily(TG, 0.8)
    cfg = make_config(alpha=0.8, horizon=7.5, kernel=AutoRegressive(law, 0.6))
    tree = simulate_tree(cfg, RngStream(21, 1))
    child = tree.tau[1:]
    parent = tree.tau[tree.parent[1:]]
    r = stats.pearsonr(parent, child).statistic
    assert 0.45 < r < 0.75


def test_rate_dispersion_matches_contraction():
    tree = simulate_tree(make_config(alpha=0.5, horizon=7.5), RngStream(8, 0))
    rates = tree.tau[1:]  # root rate is pinned, skip it
    cv = rates.std() / rates.mean()
    assert abs(cv - 0.5 * TG_CV) < 0.02


def test_determinism_and_stream_separation():
    cfg = make_config(horizon=6.0)
    t1 = simulate_tree(cfg, RngStream(30, 4))
    t2 = simulate_tree(cfg, RngStream(30, 4))
    assert len(t1) == len(t2)
    for name in ("parent", "bit", "b", "zeta", "xi", "tau", "d", "division_size"):
        assert np.array_equal(getattr(t1, name), getattr(t2, name))
    t3 = simulate_tree(cfg, RngStream(30, 5))
    assert len(t3) != len(t1) or not np.array_equal(t3.zeta, t1.zeta)


def test_horizon_prefix_property():
    # a shorter-horizon run is exactly the early part of a longer one
    short = simulate_tree(make_config(horizon=5.0), RngStream(17, 6))
    long = simulate_tree(make_config(horizon=8.0), RngStream(17, 6))
    marks_short = {c.path: (c.b, c.zeta, c.xi, c.tau) for c in short.cells()}
    marks_long = {c.path: (c.b, c.zeta, c.xi, c.tau) for c in long.cells() if c.b <= 5.0}
    assert marks_short == marks_long


def test_unit_time_mode_tree_runs():
    cfg = make_config(horizon=5.0, division=SizeDivisionRate(1.0, 2.0, "unit_time"))
    tree = simulate_tree(cfg, RngStream(5, 0))
    assert len(tree) > 10
    assert np.all(tree.division_size >= tree.xi)


def test_linear_growth_tree_runs():
    tree = simulate_tree(make_config(alpha=0.0, horizon=10.0, growth=Linear()), RngStream(5, 1))
    assert len(tree) > 50
    assert np.all(tree.division_size > 1.0)


def test_root_rate_from_kernel():
    cfg = make_config(alpha=0.6, horizon=3.0, root_rate=DrawnFromKernel())
    roots = {simulate_tree(cfg, RngStream(40, k)).tau[0] for k in range(6)}
    assert len(roots) > 1
    law = AlphaFamily(TG, 0.6).law()
    assert all(law.support[0] <= r <= law.support[1] for r in roots)


def test_cell_cap_raises():
    cfg = make_config(horizon=12.0, max_cells=500)
    with pytest.raises(RuntimeError, match="horizon too large"):
        simulate_tree(cfg, RngStream(1, 1))


def test_living_measures_consistent():
    tree = simulate_tree(make_config(horizon=6.0), RngStream(14, 2))
    t = 4.75
    rows = living_at(tree, t)
    assert len(rows) == tree.living_count(t)
    total = sum(size for _, size, _ in rows)
    assert abs(total - biomass_at(tree, t)) < 1e-12 * max(1.0, total)
    # each living cell was born but has not divided
    mask = tree.living_mask(t)
    assert np.all(tree.b[mask] <= t) and np.all(tree.d[mask] > t)
    with pytest.raises(ValueError):
        tree.living_mask(tree.horizon + 0.5)


def test_config_digest_tracks_content():
    a = make_config(horizon=6.0)
    b = make_config(horizon=6.5)
    assert a.digest != b.digest
    assert a.digest == make_config(horizon=6.0).digest
    text = a.canonical()
    assert "horizon=6" in text and "split=sym" in text


def test_config_validation():
    with pytest.raises(ValueError):
        make_config(root_size=0.0)
    with pytest.raises(ValueError):
        make_config(horizon=-1.0)
    with pytest.raises(ValueError):
        SizeDivisionRate(1.0, 2.0, "per_day")
    with pytest.raises(ValueError):
        UniformAsymmetric(0.5)
    with pytest.raises(ValueError):
        AutoRegressive(TG, 1.5)
