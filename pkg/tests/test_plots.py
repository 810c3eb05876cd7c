"""SVG renderers: well-formed markup, stable output, degenerate inputs."""

import xml.etree.ElementTree as ET

import numpy as np
import pytest

from mobtrial.mob import MobConfig, Moderator, grow
from mobtrial.mobforest import MobForestConfig, fit_forest, permutation_importance
from mobtrial.plots import (
    render_density_panels,
    render_density_svg,
    render_forest_plot_svg,
    render_importance_svg,
    render_tree_svg,
)
from mobtrial.validate import cohens_d


def parse(svg_text):
    root = ET.fromstring(svg_text)
    assert root.tag.endswith("svg")
    return root


def grown_tree(n=300, seed=0, gap=8.0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-2.0, 2.0, size=n)
    baseline = rng.normal(size=n)
    treatment = np.tile([0.0, 1.0], n // 2)
    y = 2.0 + baseline + (1.0 + gap * (x > 0)) * treatment + rng.normal(size=n)
    return grow(y, baseline, treatment, [Moderator("x", "numeric", x)], MobConfig(mc_replicates=199))


def test_density_svg_well_formed():
    rng = np.random.default_rng(1)
    svg = render_density_svg(rng.uniform(0, 70, size=200), title="scores")
    root = parse(svg)
    assert "scores" in svg
    assert any(child.tag.endswith("polyline") for child in root.iter())


def test_density_svg_constant_vector():
    svg = render_density_svg(np.full(50, 35.0))
    parse(svg)  # bandwidth fallback keeps the kernel finite


def test_density_svg_rejects_single_value():
    with pytest.raises(ValueError):
        render_density_svg(np.array([1.0]))


def test_density_panels_grid():
    rng = np.random.default_rng(2)
    variants = [(f"without scale {i}", rng.uniform(0, 60, size=80)) for i in range(7)]
    svg = render_density_panels(variants)
    parse(svg)
    for label, _ in variants:
        assert label in svg


def test_density_svg_escapes_markup_in_title():
    rng = np.random.default_rng(3)
    svg = render_density_svg(rng.uniform(0, 70, 40), title="a<b & c>d")
    parse(svg)
    assert "a&lt;b &amp; c&gt;d" in svg


def test_importance_svg():
    rng = np.random.default_rng(4)
    n = 240
    x = rng.uniform(-2, 2, size=n)
    baseline = rng.normal(size=n)
    treatment = np.tile([0.0, 1.0], n // 2)
    y = 1.0 + baseline + (1.0 + 8.0 * (x > 0)) * treatment + rng.normal(size=n)
    mods = [Moderator("x", "numeric", x), Moderator("z", "numeric", rng.normal(size=n))]
    forest = fit_forest(
        y, baseline, treatment, mods,
        MobForestConfig(n_trees=12, tree_config=MobConfig(alpha=0.2, mc_replicates=99), seed=5),
    )
    table = permutation_importance(forest)
    svg = render_importance_svg(table)
    parse(svg)
    assert "x" in svg and "z" in svg


def test_tree_svg_split_and_leaves():
    tree = grown_tree()
    svg = render_tree_svg(tree)
    parse(svg)
    assert "x" in svg
    assert "&lt;=" in svg  # left edge label, escaped
    assert svg.count("n=") >= tree.n_leaves


def test_tree_svg_single_leaf():
    rng = np.random.default_rng(6)
    n = 80
    baseline = rng.normal(size=n)
    treatment = np.tile([0.0, 1.0], n // 2)
    y = 1.0 + baseline + treatment + rng.normal(size=n)
    tree = grow(y, baseline, treatment, [Moderator("z", "numeric", rng.normal(size=n))], MobConfig(mc_replicates=99))
    assert tree.n_leaves == 1
    parse(render_tree_svg(tree))


def test_forest_plot_svg():
    rng = np.random.default_rng(7)
    effects = [
        ("node 1 (n=40)", cohens_d(rng.normal(1.0, 1.0, 20), rng.normal(0.0, 1.0, 20))),
        ("node 2 (n=36)", cohens_d(rng.normal(0.2, 1.0, 18), rng.normal(0.0, 1.0, 18))),
    ]
    svg = render_forest_plot_svg(effects)
    parse(svg)
    assert "node 1 (n=40)" in svg
    assert "node 2 (n=36)" in svg


def test_renderers_are_deterministic():
    rng = np.random.default_rng(8)
    vals = rng.uniform(0, 70, size=120)
    assert render_density_svg(vals) == render_density_svg(vals)
    tree = grown_tree(seed=9)
    assert render_tree_svg(tree) == render_tree_svg(tree)
