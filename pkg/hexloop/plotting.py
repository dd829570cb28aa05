"""
SVG rendering of tail and scan tables

Figures are drawn on a bare Figure with the SVG backend, a fixed hash salt
and no date metadata, so identical input gives identical bytes.
"""
import logging
import math
from io import StringIO
from pathlib import Path
from typing import Union

import matplotlib

matplotlib.use("Agg")

import numpy as np
from matplotlib import cm, colors
from matplotlib.figure import Figure

from hexloop.analysis import fit_decay
from hexloop.couplings import INV_SQRT3, critical_x_conjectured, epsilon_of
from hexloop.errors import HexLoopError, InsufficientData, SchemaError
from hexloop.mcmc import TailEstimate
from storage.models import SCAN_COLUMNS, TAIL_COLUMNS, ScanRow
from storage.results import get_result_store

logger = logging.getLogger(__name__)

_RC = {
    "svg.hashsalt": "hexloop",
    "svg.fonttype": "path",
    "font.size": 10,
    "axes.spines.right": False,
    "axes.spines.top": False,
}


def _render(fig: Figure) -> str:
    buffer = StringIO()
    with matplotlib.rc_context(_RC):
        fig.savefig(buffer, format="svg", metadata={"Date": None})
    return buffer.getvalue()


def tail_figure(tail: TailEstimate) -> Figure:
    """Semilog plot of P(stat >= k) with the fitted decay line"""
    with matplotlib.rc_context(_RC):
        fig = Figure(figsize=(6.0, 4.0))
        ax = fig.add_subplot()
        k = np.asarray(tail.k, dtype=float)
        p = np.asarray(tail.estimate, dtype=float)
        keep = p > 0.0
        ax.plot(k[keep], p[keep], "o", color="tab:blue", label="estimate", gid="tail-data")

        try:
            fit = fit_decay(tail)
            slope, intercept = -fit.c, math.log(fit.C)
            label = f"c = {fit.c:.3g}"
        except InsufficientData:
            if keep.sum() < 2:
                raise SchemaError("A tail plot needs at least two positive estimates")
            slope, intercept = np.polyfit(k[keep], np.log(p[keep]), 1)
            label = f"c = {-slope:.3g} (unweighted)"
        grid = np.linspace(k[keep].min(), k[keep].max(), 50)
        ax.plot(grid, np.exp(intercept + slope * grid), "-", color="tab:red", label=label, gid="tail-fit")

        ax.set_yscale("log")
        ax.set_xlabel("k")
        ax.set_ylabel(f"P({tail.statistic.value} >= k)")
        ax.legend()
        fig.tight_layout()
    return fig


def scan_figure(rows: list[ScanRow]) -> Figure:
    """(n, x) points coloured by fitted c with the reference curves overlaid"""
    if not rows:
        raise SchemaError("A scan plot needs at least one row")
    with matplotlib.rc_context(_RC):
        fig = Figure(figsize=(6.0, 4.5))
        ax = fig.add_subplot()
        rates = np.array([r.c for r in rows])
        low, high = float(rates.min()), float(rates.max())
        norm = colors.Normalize(vmin=low, vmax=high if high > low else low + 1.0)
        cmap = matplotlib.colormaps["viridis"]
        for i, row in enumerate(rows):
            ax.plot([row.n], [row.x], "o", markersize=8, color=cmap(norm(row.c)), gid=f"scan-point-{i}")

        n_min, n_max = min(r.n for r in rows), max(r.n for r in rows)
        if n_max - n_min < 0.5:
            n_min, n_max = max(1.001, n_min - 0.25), n_max + 0.25
        ns = np.linspace(n_min, n_max, 60)
        ax.plot(ns, np.full_like(ns, INV_SQRT3), "--", color="gray", label="1/sqrt(3)", gid="overlay-inv-sqrt3")
        ax.plot(ns, [INV_SQRT3 + epsilon_of(float(n)) for n in ns], "-", color="tab:green",
                label="1/sqrt(3) + eps(n)", gid="overlay-eps")
        critical = ns[ns <= 2.0]
        if len(critical):
            ax.plot(critical, [critical_x_conjectured(float(n)) for n in critical], "-", color="tab:orange",
                    label="x_c(n)", gid="overlay-xc")

        mappable = cm.ScalarMappable(norm=norm, cmap=cmap)
        fig.colorbar(mappable, ax=ax, label="fitted c")
        ax.set_xlabel("n")
        ax.set_ylabel("x")
        ax.legend(loc="lower right")
        fig.tight_layout()
    return fig


def _detect(path: Path) -> str:
    try:
        header = path.read_text(encoding="utf-8").splitlines()[0]
    except (OSError, IndexError) as e:
        raise SchemaError(f"{path}: cannot read a CSV header: {e}")
    columns = tuple(c.strip() for c in header.split(","))
    if columns == TAIL_COLUMNS:
        return "tail"
    if columns == SCAN_COLUMNS:
        return "scan"
    raise SchemaError(f"{path}: header matches neither the tail nor the scan schema")


def plot(inputs: list[Union[str, Path]], out: Union[str, Path]) -> Path:
    """
    Render tail or scan CSV files to one SVG

    Several tail files share one semilog axis; scan files are concatenated.
    """
    if not inputs:
        raise SchemaError("No input files")
    paths = [Path(p) for p in inputs]
    kinds = {_detect(p) for p in paths}
    if len(kinds) != 1:
        raise SchemaError("Cannot mix tail and scan files in one plot")
    store = get_result_store()
    try:
        if kinds == {"scan"}:
            rows = [row for p in paths for row in store.read_scan(p)]
            svg = _render(scan_figure(rows))
        else:
            figure = tail_figure(store.read_tail(paths[0])) if len(paths) == 1 else _stack(paths, store)
            svg = _render(figure)
    except HexLoopError:
        raise
    except ValueError as e:
        raise SchemaError(str(e))
    logger.info(f"Rendered {len(paths)} file(s) to {out}")
    return store.write_text(out, svg)


def _stack(paths: list[Path], store) -> Figure:
    """All tails on one semilog axis"""
    with matplotlib.rc_context(_RC):
        fig = Figure(figsize=(6.0, 4.0))
        ax = fig.add_subplot()
        for i, path in enumerate(paths):
            tail = store.read_tail(path)
            k = np.asarray(tail.k, dtype=float)
            p = np.asarray(tail.estimate, dtype=float)
            keep = p > 0.0
            ax.plot(k[keep], p[keep], "o-", label=path.stem, gid=f"tail-data-{i}")
        ax.set_yscale("log")
        ax.set_xlabel("k")
        ax.set_ylabel("P(stat >= k)")
        ax.legend()
        fig.tight_layout()
    return fig
