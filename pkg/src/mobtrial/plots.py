"""Static SVG report figures, built as plain strings.

No plotting library is used: the artifacts must be byte-identical across
runs and environments, so every coordinate is formatted with a fixed
precision and no library version metadata can leak into the output.
"""

from __future__ import annotations

import numpy as np
from xml.sax.saxutils import escape

from .mob import MobNode, MobTree
from .mobforest import ImportanceTable
from .validate import EffectSize

_FONT = 'font-family="Helvetica, Arial, sans-serif"'


def _f(v: float) -> str:
    return f"{float(v):.2f}"


def _fmt_stat(v: float) -> str:
    return f"{float(v):.3g}"


def _svg(width: float, height: float, body: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(width)}" height="{_f(height)}" '
        f'viewBox="0 0 {_f(width)} {_f(height)}">'
    )
    return "\n".join([head, *body, "</svg>"]) + "\n"


def _text(x: float, y: float, label: str, size: int = 11, anchor: str = "start", fill: str = "#222") -> str:
    return (
        f'<text x="{_f(x)}" y="{_f(y)}" font-size="{size}" text-anchor="{anchor}" '
        f'fill="{fill}" {_FONT}>{escape(label)}</text>'
    )


def _line(x1: float, y1: float, x2: float, y2: float, color: str = "#444", width: float = 1.0) -> str:
    return (
        f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}" '
        f'stroke="{color}" stroke-width="{_f(width)}"/>'
    )


def _rect(x: float, y: float, w: float, h: float, fill: str, stroke: str = "none") -> str:
    return (
        f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(w)}" height="{_f(h)}" '
        f'fill="{fill}" stroke="{stroke}"/>'
    )


def _silverman_bandwidth(values: np.ndarray) -> float:
    n = values.size
    sd = float(np.std(values, ddof=1)) if n > 1 else 0.0
    q75, q25 = np.percentile(values, [75, 25])
    iqr = float(q75 - q25)
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    bw = 0.9 * spread * n ** (-0.2)
    if bw <= 0:  # constant vector: render a narrow spike instead of failing
        bw = 0.5
    return bw


def _density_curve(values: np.ndarray, x_range: tuple[float, float], points: int = 257) -> tuple[np.ndarray, np.ndarray]:
    grid = np.linspace(x_range[0], x_range[1], points)
    bw = _silverman_bandwidth(values)
    z = (grid[:, None] - values[None, :]) / bw
    dens = np.exp(-0.5 * z * z).sum(axis=1) / (values.size * bw * np.sqrt(2 * np.pi))
    return grid, dens


def _density_panel(
    values: np.ndarray,
    x_range: tuple[float, float],
    ox: float,
    oy: float,
    width: float,
    height: float,
    title: str,
) -> list[str]:
    grid, dens = _density_curve(values, x_range)
    peak = float(dens.max()) if dens.max() > 0 else 1.0
    plot_h = height - 34
    plot_w = width - 20
    body = [_text(ox + width / 2, oy + 12, title, size=11, anchor="middle")]
    pts = []
    for gx, gy in zip(grid, dens):
        px = ox + 10 + (gx - x_range[0]) / (x_range[1] - x_range[0]) * plot_w
        py = oy + 18 + plot_h * (1.0 - gy / peak)
        pts.append(f"{_f(px)},{_f(py)}")
    body.append(
        f'<polyline points="{" ".join(pts)}" fill="none" stroke="#3366aa" stroke-width="1.5"/>'
    )
    axis_y = oy + 18 + plot_h
    body.append(_line(ox + 10, axis_y, ox + 10 + plot_w, axis_y))
    for tick in np.linspace(x_range[0], x_range[1], 8):
        tx = ox + 10 + (tick - x_range[0]) / (x_range[1] - x_range[0]) * plot_w
        body.append(_line(tx, axis_y, tx, axis_y + 3))
        body.append(_text(tx, axis_y + 13, f"{tick:g}", size=9, anchor="middle"))
    return body


def render_density_svg(values: np.ndarray, title: str = "Composite score density", x_range: tuple[float, float] = (0.0, 70.0)) -> str:
    """Gaussian-kernel density (Silverman bandwidth) over the composite range."""
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        raise ValueError("need >= 2 values for a density")
    return _svg(560, 300, _density_panel(values, x_range, 0, 6, 560, 280, title))


def render_density_panels(
    variants: list[tuple[str, np.ndarray]],
    x_range: tuple[float, float] = (0.0, 60.0),
) -> str:
    """Grid of leave-one-out composite densities (sensitivity panels)."""
    cols = 2
    panel_w, panel_h = 300, 180
    rows = (len(variants) + cols - 1) // cols
    body: list[str] = []
    for i, (label, values) in enumerate(variants):
        ox = (i % cols) * panel_w
        oy = (i // cols) * panel_h + 4
        body.extend(_density_panel(np.asarray(values, dtype=np.float64), x_range, ox, oy, panel_w, panel_h - 10, label))
    return _svg(cols * panel_w, rows * panel_h + 8, body)


def render_importance_svg(table: ImportanceTable) -> str:
    """Horizontal bar chart of permutation importances, most important first."""
    order = sorted(range(len(table.names)), key=lambda j: int(table.ranks[j]))
    bar_h, gap, label_w = 16, 4, 190
    width = 560
    height = 30 + len(order) * (bar_h + gap) + 10
    span = float(np.max(np.abs(table.importance))) if len(order) else 1.0
    if span <= 0:
        span = 1.0
    plot_w = width - label_w - 20
    zero_x = label_w + plot_w * 0.25  # leave a quarter for negative bars
    scale = (plot_w * 0.72) / span
    body = [_text(width / 2, 14, "Permutation importance (OOB MSE increase)", anchor="middle")]
    y = 26
    for j in order:
        val = float(table.importance[j])
        body.append(_text(label_w - 6, y + bar_h - 4, table.names[j], size=10, anchor="end"))
        w = abs(val) * scale
        x = zero_x if val >= 0 else zero_x - w
        fill = "#3366aa" if table.selected[j] else "#bbbbbb"
        body.append(_rect(x, y, max(w, 0.5), bar_h, fill))
        body.append(_text(zero_x + (w + 4 if val >= 0 else -w - 4), y + bar_h - 4, _fmt_stat(val), size=9, anchor="start" if val >= 0 else "end"))
        y += bar_h + gap
    body.append(_line(zero_x, 24, zero_x, y, color="#888"))
    return _svg(width, height, body)


def _box_glyph(x: float, y_base: float, h: float, values: np.ndarray, lo: float, hi: float, color: str) -> list[str]:
    """Vertical box-and-whisker of one arm's scores, scaled to [lo, hi]."""
    span = hi - lo if hi > lo else 1.0

    def sy(v: float) -> float:
        return y_base - (v - lo) / span * h

    q1, med, q3 = (float(q) for q in np.percentile(values, [25, 50, 75]))
    vmin, vmax = float(values.min()), float(values.max())
    w = 16
    out = [
        _line(x, sy(vmin), x, sy(q1), color=color),
        _line(x, sy(q3), x, sy(vmax), color=color),
        _line(x - w / 4, sy(vmin), x + w / 4, sy(vmin), color=color),
        _line(x - w / 4, sy(vmax), x + w / 4, sy(vmax), color=color),
        f'<rect x="{_f(x - w / 2)}" y="{_f(sy(q3))}" width="{_f(w)}" height="{_f(max(sy(q1) - sy(q3), 0.5))}" '
        f'fill="{color}" fill-opacity="0.25" stroke="{color}"/>',
        _line(x - w / 2, sy(med), x + w / 2, sy(med), color=color, width=1.6),
    ]
    return out


def _leaf_label(node: MobNode) -> list[str]:
    lines = [f"node {node.id}  n={node.n}"]
    b = node.model.coefficients
    lines.append(f"treatment b={_fmt_stat(b[2])}")
    if node.effect is not None:
        e = node.effect
        lines.append(f"d={_fmt_stat(e.d)} [{_fmt_stat(e.ci_low)}, {_fmt_stat(e.ci_high)}]")
    return lines


def render_tree_svg(tree: MobTree) -> str:
    """Tree diagram: split labels on inner nodes, per-arm box-whisker
    glyphs plus model/effect summaries on leaves."""
    leaves = tree.leaves()
    leaf_w, level_h = 170, 100
    glyph_h = 90
    depth = tree.depth
    width = max(360, len(leaves) * leaf_w + 40)
    height = (depth + 1) * level_h + glyph_h + 120
    pos: dict[int, tuple[float, float]] = {}
    for i, leaf in enumerate(leaves):
        pos[leaf.id] = (40 + leaf_w / 2 + i * leaf_w, 30 + depth * level_h)

    def place(node: MobNode) -> tuple[float, float]:
        if node.id in pos:
            return pos[node.id]
        assert node.children is not None
        (x1, _), (x2, _) = place(node.children[0]), place(node.children[1])
        pos[node.id] = ((x1 + x2) / 2, 30 + node.depth * level_h)
        return pos[node.id]

    place(tree.root)
    y_all = tree.y
    lo, hi = float(y_all.min()), float(y_all.max())
    body: list[str] = []
    for node in tree.nodes():
        x, y = pos[node.id]
        if not node.is_leaf:
            assert node.children is not None and node.split_variable is not None
            adj = _node_best_adjusted(node)
            label = node.split_variable
            body.append(_text(x, y, label, anchor="middle"))
            if adj is not None:
                body.append(_text(x, y + 13, f"p = {_fmt_stat(adj)}", size=9, anchor="middle", fill="#666"))
            for child, tag in zip(node.children, _edge_labels(node)):
                cx, cy = pos[child.id]
                body.append(_line(x, y + 16, cx, cy - 14, color="#999"))
                mx, my = (x + cx) / 2, (y + 16 + cy - 14) / 2
                body.append(_text(mx, my, tag, size=9, anchor="middle", fill="#555"))
        else:
            for k, line in enumerate(_leaf_label(node)):
                body.append(_text(x, y + k * 12, line, size=10, anchor="middle"))
            base = y + 34 + glyph_h
            t = tree.X[node.rows, 2]
            scores = tree.y[node.rows]
            control = scores[t == 0.0]
            treated = scores[t == 1.0]
            if control.size:
                body.extend(_box_glyph(x - 16, base, glyph_h, control, lo, hi, "#888888"))
            if treated.size:
                body.extend(_box_glyph(x + 16, base, glyph_h, treated, lo, hi, "#3366aa"))
            body.append(_text(x - 16, base + 12, "ctrl", size=8, anchor="middle", fill="#888888"))
            body.append(_text(x + 16, base + 12, "trt", size=8, anchor="middle", fill="#3366aa"))
    return _svg(width, height, body)


def _node_best_adjusted(node: MobNode) -> float | None:
    best = None
    for rec in node.test_records:
        if rec.tested and (best is None or rec.adjusted_p < best):
            best = rec.adjusted_p
    return best


def _edge_labels(node: MobNode) -> tuple[str, str]:
    if node.cutpoint is not None:
        return (f"<= {node.cutpoint:g}", f"> {node.cutpoint:g}")
    levels = sorted(node.left_levels or ())
    return ("in {" + ", ".join(str(c) for c in levels) + "}", "otherwise")


def render_forest_plot_svg(effects: list[tuple[str, EffectSize]]) -> str:
    """Per-leaf Cohen's d with 95% CI whiskers on a shared axis."""
    row_h, label_w, width = 34, 150, 560
    height = 60 + len(effects) * row_h
    los = [e.ci_low for _, e in effects] + [0.0]
    his = [e.ci_high for _, e in effects] + [0.0]
    lo, hi = min(los) - 0.2, max(his) + 0.2
    plot_w = width - label_w - 30

    def sx(v: float) -> float:
        return label_w + (v - lo) / (hi - lo) * plot_w

    body = [_text(width / 2, 16, "Treatment effect by subgroup (Cohen's d, 95% CI)", anchor="middle")]
    axis_y = 40 + len(effects) * row_h
    body.append(_line(sx(0.0), 30, sx(0.0), axis_y, color="#bbb"))
    y = 46
    for label, e in effects:
        body.append(_text(label_w - 8, y + 4, label, size=10, anchor="end"))
        body.append(_line(sx(e.ci_low), y, sx(e.ci_high), y, color="#3366aa", width=1.5))
        body.append(_rect(sx(e.d) - 4, y - 4, 8, 8, "#3366aa"))
        body.append(_text(sx(e.ci_high) + 6, y + 4, f"d={_fmt_stat(e.d)}", size=9))
        y += row_h
    body.append(_line(label_w, axis_y, label_w + plot_w, axis_y))
    for tick in np.linspace(np.floor(lo * 2) / 2, np.ceil(hi * 2) / 2, 7):
        body.append(_line(sx(float(tick)), axis_y, sx(float(tick)), axis_y + 3))
        body.append(_text(sx(float(tick)), axis_y + 14, f"{tick:.1f}", size=9, anchor="middle"))
    return _svg(width, height, body)
