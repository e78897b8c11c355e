"""Long-format plot tables and matplotlib figures for result CSVs."""
from __future__ import annotations

import csv
import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

LONG_COLUMNS = ["series", "parameter", "value", "estimate", "ci_low", "ci_high", "oracle_value"]


def _num(v):
    if v is None or v == "":
        return None
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return v
    for cast in (int, float):
        try:
            return cast(v)
        except (TypeError, ValueError):
            pass
    return v


def detect_kind(header) -> str:
    from .experiment import COLUMNS

    header = list(header)
    for kind, cols in COLUMNS.items():
        if header == cols:
            return kind
    raise ValueError(f"unrecognised result columns: {header}")


def to_long(kind: str, rows: list) -> list:
    """Tidy ``(series, parameter, value, estimate, ci_low, ci_high, oracle_value)`` records."""
    out = []

    def add(series, parameter, value, est, lo=None, hi=None, oracle=None):
        out.append(dict(series=series, parameter=parameter, value=_num(value), estimate=_num(est),
                        ci_low=_num(lo), ci_high=_num(hi), oracle_value=_num(oracle)))

    for r in rows:
        if kind == "brw":
            add("alive_fraction", "horizon", r["horizon"], r["alive_fraction"], r["ci_low"], r["ci_high"])
        elif kind == "truncated_sweep":
            add(f"alive_fraction mode={r['mode']}", "N", r["N"], r["alive_fraction"], r["ci_low"], r["ci_high"])
        elif kind == "competing":
            add("joint", "horizon", r["horizon"], r["joint_frac"], r["ci_low"], r["ci_high"])
            add("invasive", "horizon", r["horizon"], r["inv_alive_frac"])
            add("noninvasive", "horizon", r["horizon"], r["noninv_alive_frac"])
        elif kind == "adapted":
            add(f"dagger_marginal gamma={_num(r['gamma'])}", "N", r["N"], r["dagger_marginal"],
                r["dagger_ci_low"], r["dagger_ci_high"])
        elif kind == "percolation":
            add(f"alive_frac depth={int(float(r['depth']))}", "p", r["p"], r["alive_frac"], r["ci_low"], r["ci_high"],
                r["oracle_value"])
        elif kind == "spectral":
            add("mrho", "m", r["m"], r["mrho"])
        elif kind == "mtp":
            for side in ("lhs", "rhs"):
                est, se = float(r[side]), float(r[f"{side}_se"])
                add(side, "pattern", r["pattern"], est, est - 1.96 * se, est + 1.96 * se, r[f"exact_{side}"])
        else:
            raise ValueError(f"unknown kind {kind!r}")
    return out


def long_to_csv(records: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LONG_COLUMNS)
    for r in records:
        w.writerow(["" if r[c] is None else (repr(r[c]) if isinstance(r[c], float) else r[c]) for c in LONG_COLUMNS])
    return buf.getvalue()


def plot_long(records: list, path, title: str = "") -> Path:
    """Error-bar plot per series; oracle values as open markers."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    if not records:
        ax.text(0.5, 0.5, "no data", ha="center", va="center", transform=ax.transAxes)
    series = list(dict.fromkeys(r["series"] for r in records))
    categorical = any(isinstance(r["value"], str) for r in records)
    labels = list(dict.fromkeys(r["value"] for r in records)) if categorical else []
    for k, name in enumerate(series):
        pts = [r for r in records if r["series"] == name]
        xs = [labels.index(r["value"]) + 0.1 * k for r in pts] if categorical else [r["value"] for r in pts]
        ys = [r["estimate"] for r in pts]
        # rounding in the CSV can put a bound a hair inside the estimate
        lo = [max(r["estimate"] - r["ci_low"], 0.0) if r["ci_low"] is not None else 0.0 for r in pts]
        hi = [max(r["ci_high"] - r["estimate"], 0.0) if r["ci_high"] is not None else 0.0 for r in pts]
        line = ax.errorbar(xs, ys, yerr=[lo, hi], marker="o", ms=4, capsize=3, label=name,
                           ls="none" if categorical else "-")
        oracle = [(x, r["oracle_value"]) for x, r in zip(xs, pts) if r["oracle_value"] is not None]
        if oracle:
            ax.plot(*zip(*oracle), ls="none", marker="x", color=line[0].get_color(), label=f"{name} oracle")
    if records:
        ax.set_xlabel(records[0]["parameter"])
        if categorical:
            ax.set_xticks(range(len(labels)), labels, rotation=30, ha="right", fontsize=7)
        elif records[0]["parameter"] == "N":
            ax.set_xscale("log", base=2)
        ax.legend(fontsize=7)
    ax.set_ylabel("estimate")
    ax.set_title(title)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def emit_plot_data(result_csv, out_dir=None) -> dict:
    """Write ``<stem>.plot.csv`` and ``<stem>.png`` for a result CSV.

    A header-only (or empty) result gives a header-only plot table.
    """
    src = Path(result_csv)
    text = src.read_text()
    reader = csv.DictReader(io.StringIO(text))
    rows = list(reader)
    records = to_long(detect_kind(reader.fieldnames), rows) if reader.fieldnames else []
    out = Path(out_dir) if out_dir else src.parent
    out.mkdir(parents=True, exist_ok=True)
    paths = {"csv": out / f"{src.stem}.plot.csv", "figure": out / f"{src.stem}.png"}
    paths["csv"].write_text(long_to_csv(records))
    plot_long(records, paths["figure"], title=src.stem)
    return paths
