"""Declarative experiments: config parsing, seeded replica chunks, a process
pool, associative aggregation and CSV/JSON/NDJSON output.

Replicas are split into fixed chunks (``chunk`` replicas each) before any
scheduling happens, every chunk derives its randomness from
``(seed, cell, replica index)`` or ``(seed, cell, chunk index)``, and chunk
tallies are integers combined in chunk order.  The worker count therefore
never changes the output.
"""
from __future__ import annotations

import csv
import io
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import percolation as perc
from . import rng as keyed
from .competing import AdaptedMode, CompetingConfig, Species, run_adapted, run_competing
from .engine import Caps, classify_survival_regime, generation_records, grow
from .groups import GroupSpec, StepDistribution, word_length
from .offspring import OffspringDistribution, gamma_truncate
from .spectral import spectral_radius, spectral_radius_numeric
from .stats import wilson
from .truncated import MODES, PAPER_EXACT, SweepTally, summarize_sweep, sweep_chunk

SCHEMA = "brwlab/1"
KINDS = ("brw", "truncated_sweep", "competing", "adapted", "percolation", "spectral", "mtp")
WORKERS_ENV = "BRWLAB_WORKERS"

COLUMNS = {
    "brw": ["horizon", "replicas", "alive_fraction", "ci_low", "ci_high", "mean_generation_size",
            "mean_total_nodes", "m", "rho", "mrho", "regime", "capped"],
    "truncated_sweep": ["N", "mode", "horizon", "replicas", "alive_fraction", "ci_low", "ci_high",
                        "mean_cluster_size", "mrho", "plain_alive_fraction", "violations", "capped"],
    "competing": ["mode", "N", "gamma", "horizon", "window", "inv_alive_frac", "noninv_alive_frac",
                  "joint_frac", "ci_low", "ci_high", "dagger_marginal", "replicas", "capped"],
    "percolation": ["p", "depth", "alive_frac", "ci_low", "ci_high", "oracle_value", "replicas", "given_open"],
    "spectral": ["group", "laziness", "rho", "method", "rho_numeric", "numeric_lower", "n_max", "m", "mrho", "regime"],
    "mtp": ["pattern", "rooted", "p", "samples", "lhs", "lhs_se", "rhs", "rhs_se", "z", "exact_lhs", "exact_rhs", "depth"],
}
COLUMNS["adapted"] = COLUMNS["competing"] + ["dagger_ci_low", "dagger_ci_high", "seeded_mean", "seed_capped", "m_gamma", "mrho_invasive"]


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name
        self.message = message


# config ---------------------------------------------------------------------

_GROUP_KINDS = {
    "free": GroupSpec.free_group,
    "free_group": GroupSpec.free_group,
    "lattice": GroupSpec.integer_lattice,
    "integer_lattice": GroupSpec.integer_lattice,
    "c2_product": GroupSpec.free_product_c2,
    "free_product_c2": GroupSpec.free_product_c2,
}


def _get(table: dict, key: str, where: str, kind=None, default=...):
    if key not in table:
        if default is ...:
            raise ConfigError(f"{where}{key}", "missing")
        return default
    value = table[key]
    allowed = kind if isinstance(kind, tuple) else (kind,)
    if kind is not None and (not isinstance(value, allowed) or isinstance(value, bool) and bool not in allowed):
        raise ConfigError(f"{where}{key}", f"expected {getattr(kind, '__name__', kind)}, got {value!r}")
    return value


def _int_list(table, key, where, default=...):
    v = _get(table, key, where, default=default)
    v = [v] if isinstance(v, int) and not isinstance(v, bool) else v
    if not isinstance(v, list) or not v or not all(isinstance(x, int) and not isinstance(x, bool) for x in v):
        raise ConfigError(f"{where}{key}", f"expected a non-empty list of integers, got {v!r}")
    return v


def _float_list(table, key, where, default=...):
    v = _get(table, key, where, default=default)
    v = [v] if isinstance(v, (int, float)) and not isinstance(v, bool) else v
    if not isinstance(v, list) or not v or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        raise ConfigError(f"{where}{key}", f"expected a non-empty list of numbers, got {v!r}")
    return [float(x) for x in v]


def parse_group(table: dict) -> GroupSpec:
    gtype = _get(table, "type", "group.", str)
    if gtype not in _GROUP_KINDS:
        raise ConfigError("group.type", f"unknown group {gtype!r}; use one of {sorted(set(_GROUP_KINDS))}")
    rank = _get(table, "rank", "group.", int)
    try:
        return _GROUP_KINDS[gtype](rank)
    except ValueError as exc:
        raise ConfigError("group.rank", str(exc)) from None


def parse_step(spec: GroupSpec, table: dict, where: str = "step.") -> StepDistribution:
    try:
        if "weights" in table:
            return StepDistribution.from_mapping(spec, _get(table, "weights", where, dict))
        return StepDistribution.lazy_uniform(spec, float(_get(table, "laziness", where, (int, float), 0.0)))
    except ConfigError:
        raise
    except (ValueError, KeyError) as exc:
        raise ConfigError(where.rstrip("."), str(exc)) from None


def parse_offspring(table: dict, where: str = "offspring.") -> OffspringDistribution:
    probs = _get(table, "probs", where, list)
    try:
        return OffspringDistribution(tuple(float(x) for x in probs))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}probs", str(exc)) from None


@dataclass
class ExperimentSpec:
    """Validated experiment description.  ``raw`` is the parsed config table."""

    kind: str
    name: str
    seed: int
    replicas: int
    chunk: int
    raw: dict
    workers: Optional[int] = None
    params: dict = field(default_factory=dict)

    @property
    def n_chunks(self) -> int:
        return -(-self.replicas // self.chunk)


def _section(raw: dict, name: str) -> dict:
    sec = raw.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(name, "expected a table")
    return sec


def build(raw: dict) -> dict:
    """Domain objects for a raw config (used by workers as well)."""
    kind = raw["kind"]
    sec = _section(raw, kind)
    caps = Caps(int(_get(_section(raw, "caps"), "max_nodes", "caps.", int, Caps().max_nodes)))
    if kind in ("percolation", "mtp"):
        return {"mu": parse_offspring(_section(raw, "offspring")), "sec": sec, "caps": caps}
    spec = parse_group(_section(raw, "group"))
    out = {"spec": spec, "sec": sec, "caps": caps, "step": parse_step(spec, _section(raw, "step"))}
    pair = kind in ("competing", "adapted")
    if kind != "spectral" and (not pair or "offspring" in raw):
        out["mu"] = parse_offspring(_section(raw, "offspring"))
    if pair:
        for role in ("invasive", "noninvasive"):
            r = _section(raw, role)
            if "offspring" in r:
                mu = parse_offspring(_section(r, "offspring"), f"{role}.offspring.")
            elif "mu" in out:
                mu = out["mu"]
            else:
                raise ConfigError(f"{role}.offspring.probs", "missing (and no shared [offspring] table)")
            step = parse_step(spec, _section(r, "step"), f"{role}.step.") if "step" in r else out["step"]
            out[role] = Species(mu, step)
    return out


def _validate_kind(kind: str, raw: dict, objs: dict) -> dict:
    sec, w = objs["sec"], f"{kind}."
    params = {}
    if kind == "brw":
        params["horizons"] = sorted(set(_int_list(sec, "horizon", w)))
        params["ball_radius"] = _get(sec, "ball_radius", w, int, 0)
    elif kind == "truncated_sweep":
        params["N"] = sorted(set(_int_list(sec, "N", w)))
        if min(params["N"]) < 1:
            raise ConfigError(f"{w}N", "N must be >= 1")
        params["horizon"] = _get(sec, "horizon", w, int)
        params["mode"] = _get(sec, "mode", w, str, PAPER_EXACT)
        if params["mode"] not in MODES:
            raise ConfigError(f"{w}mode", f"unknown mode {params['mode']!r}; use one of {list(MODES)}")
        params["epsilon"] = float(_get(sec, "epsilon", w, (int, float), 0.01))
    elif kind == "competing":
        params["horizons"] = sorted(set(_int_list(sec, "horizon", w)))
        start = _get(sec, "start", w, (str, list))
        try:
            params["start"] = objs["spec"].element(start)
        except ValueError as exc:
            raise ConfigError(f"{w}start", str(exc)) from None
        if word_length(params["start"]) == 0:
            raise ConfigError(f"{w}start", "the invasive start must differ from the origin")
    elif kind == "adapted":
        params["N"] = sorted(set(_int_list(sec, "N", w)))
        params["gamma"] = sorted(set(_float_list(sec, "gamma", w)))
        params["window"] = _get(sec, "window", w, int)
        params["horizon"] = _get(sec, "horizon", w, int)
        params["max_seeds"] = _get(sec, "max_seeds", w, int, 100_000)
        if raw["replicas"] < 100:
            raise ConfigError("replicas", "adapted runs need at least 100 replicas")
    elif kind == "percolation":
        params["p"] = _float_list(sec, "p", w)
        params["depths"] = sorted(set(_int_list(sec, "depth", w)))
        params["given_open"] = bool(_get(sec, "given_open", w, bool, True))
        if any(not 0 <= p <= 1 for p in params["p"]):
            raise ConfigError(f"{w}p", "retention probabilities must lie in [0, 1]")
    elif kind == "spectral":
        params["m"] = _float_list(sec, "m", w, [1.0])
        params["n_max"] = _get(sec, "n_max", w, int, 200)
    elif kind == "mtp":
        names = _get(sec, "patterns", w, list, [p.name for p in perc.MTP_FAMILY])
        known = {p.name: p for p in perc.MTP_FAMILY}
        bad = [n for n in names if n not in known]
        if bad:
            raise ConfigError(f"{w}patterns", f"unknown test function(s) {bad}; shipped: {sorted(known)}")
        params["patterns"] = names
        params["rooted"] = _get(sec, "rooted", w, str, "ugw")
        if params["rooted"] not in ("ugw", "gw"):
            raise ConfigError(f"{w}rooted", "use 'ugw' or 'gw'")
        p = _get(sec, "p", w, (int, float), None)
        params["p"] = None if p is None else float(p)
    for key, low in (("horizon", 1), ("window", 0), ("n_max", 1), ("max_seeds", 1)):
        if key in params and params[key] < low:
            raise ConfigError(f"{w}{key}", f"must be >= {low}")
    if min(params.get("horizons", [1])) < 1 or min(params.get("depths", [0])) < 0:
        raise ConfigError(f"{w}{'depth' if kind == 'percolation' else 'horizon'}", "out of range")
    return params


def parse_spec(raw: dict) -> ExperimentSpec:
    kind = _get(raw, "kind", "", str)
    if kind not in KINDS:
        raise ConfigError("kind", f"unknown experiment kind {kind!r}; use one of {list(KINDS)}")
    seed = _get(raw, "seed", "", int)
    if seed < 0:
        raise ConfigError("seed", "must be non-negative")
    replicas = _get(raw, "replicas", "", int, 1)
    if replicas < 1:
        raise ConfigError("replicas", "must be >= 1")
    chunk = _get(raw, "chunk", "", int, 2000)
    if chunk < 1:
        raise ConfigError("chunk", "must be >= 1")
    workers = _get(raw, "workers", "", int, None)
    name = _get(raw, "name", "", str, kind)
    raw = dict(raw, replicas=replicas)
    objs = build(raw)
    params = _validate_kind(kind, raw, objs)
    if kind in ("competing", "adapted"):
        _competing_config(objs, params, params.get("N", [1])[0], params.get("gamma", [1.0])[-1])
    return ExperimentSpec(kind, name, seed, replicas, chunk, raw, workers, params)


def load_spec(path) -> ExperimentSpec:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError("path", str(exc)) from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("syntax", str(exc)) from None
    return parse_spec(raw)


def _competing_config(objs, params, N, gamma) -> CompetingConfig:
    try:
        if "horizons" in params:
            return CompetingConfig(objs["spec"], objs["invasive"], objs["noninvasive"], max(params["horizons"]),
                                   start=params["start"], caps=objs["caps"])
        mode = AdaptedMode(N, gamma, params["window"], params["max_seeds"])
        return CompetingConfig(objs["spec"], objs["invasive"], objs["noninvasive"], params["horizon"], mode=mode,
                               caps=objs["caps"])
    except ValueError as exc:
        raise ConfigError("competing" if "horizons" in params else "adapted", str(exc)) from None


# tasks ------------------------------------------------------------------------


def _chunk_rng(seed: int, cell: str, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(keyed.cell_id(cell), index)))


def _task(args):
    """One chunk of replicas; returns a dict of integer tallies."""
    raw, params, lo, hi, index, trace = args
    kind, seed = raw["kind"], raw["seed"]
    objs = build(raw)
    n = hi - lo
    keys = keyed.root_keys(seed, kind, range(lo, hi))
    out = {"replicas": n}
    if kind == "brw":
        T = max(params["horizons"])
        tree = grow(objs["spec"], objs["step"], objs["mu"], T, keys, caps=objs["caps"])
        sizes = tree.generation_sizes()
        out["alive"] = [int((sizes[:, t] > 0).sum()) for t in params["horizons"]]
        out["gen_size"] = [int(sizes[:, t].sum()) for t in params["horizons"]]
        out["nodes"] = [int(sizes[:, : t + 1].sum()) for t in params["horizons"]]
        out["capped"] = int(tree.capped.sum())
        if trace:
            out["trace"] = generation_records(tree, params["ball_radius"])
    elif kind == "truncated_sweep":
        t = sweep_chunk(objs["spec"], objs["step"], objs["mu"], params["N"], params["mode"], params["horizon"], keys,
                        objs["caps"])
        out.update(alive=t.alive.tolist(), cluster=t.cluster_total.tolist(), plain=t.plain_alive,
                   violations=t.violations, capped=t.capped)
    elif kind == "competing":
        cfg = _competing_config(objs, params, None, None)
        _, _, res = run_competing(cfg, keys, params["horizons"])
        out.update(inv=res.invasive_alive.sum(1).tolist(), non=res.noninvasive_alive.sum(1).tolist(),
                   joint=res.joint.sum(1).tolist(), capped=int(res.capped.sum()))
    elif kind == "adapted":
        cells = []
        for N in params["N"]:
            for g in params["gamma"]:
                cfg = _competing_config(objs, params, N, g)
                non, copies, res = run_adapted(cfg, keys)
                inv_alive = res.invasive_alive
                joint = inv_alive & res.noninvasive_alive
                cells.append([int(inv_alive.sum()), int(res.noninvasive_alive.sum()), int(joint.sum()),
                              int(res.root_dead.sum()), int(res.seeded.sum()), int(res.seed_capped.sum()),
                              int(res.capped.sum())])
        out["cells"] = cells
        out["capped"] = max(c[5] + c[6] for c in cells)
    elif kind == "percolation":
        rng = _chunk_rng(seed, kind, index)
        out["alive"] = []
        for p in params["p"]:
            alive = perc.cluster_depth_survival(objs["mu"], p, params["depths"], n, rng, params["given_open"])
            out["alive"].append(alive.sum(axis=1).tolist())
        out["capped"] = 0
    elif kind == "mtp":
        rng = _chunk_rng(seed, kind, index)
        known = {p.name: p for p in perc.MTP_FAMILY}
        out["sums"] = [perc.mtp_sums(objs["mu"], known[name], n, rng, params["rooted"], params["p"]).tolist()
                       for name in params["patterns"]]
        out["capped"] = 0
    return out


def _merge(a: dict, b: dict) -> dict:
    out = {}
    for k, v in a.items():
        w = b[k]
        if k == "trace":
            out[k] = _merge_trace(v, w)
        elif isinstance(v, list):
            out[k] = (np.asarray(v, dtype=np.int64) + np.asarray(w, dtype=np.int64)).tolist()
        else:
            out[k] = v + w
    return out


def _merge_trace(a: list, b: list) -> list:
    merged = {r["generation"]: dict(r) for r in a}
    for r in b:
        if r["generation"] in merged:
            m = merged[r["generation"]]
            for key in ("size", "alive_replicas", "ball_occupancy", "dead"):
                m[key] += r[key]
        else:
            merged[r["generation"]] = dict(r)
    return [merged[g] for g in sorted(merged)]


# rows -----------------------------------------------------------------------


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(round(float(v), 10))
    return str(v)


def _rows(spec: ExperimentSpec, total: dict, objs: dict) -> list:
    kind, P, n = spec.kind, spec.params, total["replicas"] if total else 0
    rows = []
    if kind == "brw":
        rho = spectral_radius(objs["spec"], objs["step"]).value
        m = objs["mu"].mean
        for i, T in enumerate(P["horizons"]):
            ci = wilson(total["alive"][i], n)
            rows.append(dict(horizon=T, replicas=n, alive_fraction=ci.estimate, ci_low=ci.low, ci_high=ci.high,
                             mean_generation_size=total["gen_size"][i] / n, mean_total_nodes=total["nodes"][i] / n,
                             m=m, rho=rho, mrho=m * rho, regime=classify_survival_regime(m, rho).label,
                             capped=total["capped"]))
    elif kind == "truncated_sweep":
        tally = SweepTally(tuple(P["N"]), n, np.asarray(total["alive"]), np.asarray(total["cluster"]),
                           total["plain"], total["violations"], total["capped"])
        res = summarize_sweep(tally, P["mode"], P["horizon"], P["epsilon"])
        mrho = objs["mu"].mean * spectral_radius(objs["spec"], objs["step"]).value
        for r in res.rows:
            rows.append(dict(N=r.N, mode=P["mode"], horizon=P["horizon"], replicas=n, alive_fraction=r.alive.estimate,
                             ci_low=r.alive.low, ci_high=r.alive.high, mean_cluster_size=r.mean_cluster_size,
                             mrho=mrho, plain_alive_fraction=res.plain.estimate, violations=res.violations,
                             capped=res.capped))
    elif kind == "competing":
        for i, T in enumerate(P["horizons"]):
            j = wilson(total["joint"][i], n)
            rows.append(dict(mode="pair", N=None, gamma=None, horizon=T, window=None, inv_alive_frac=total["inv"][i] / n,
                             noninv_alive_frac=total["non"][i] / n, joint_frac=j.estimate, ci_low=j.low, ci_high=j.high,
                             dagger_marginal=None, replicas=n, capped=total["capped"]))
    elif kind == "adapted":
        rho_i = spectral_radius(objs["spec"], objs["invasive"].step).value
        k = 0
        for N in P["N"]:
            for g in P["gamma"]:
                inv, non, joint, dead, seeded, seed_capped, capped = total["cells"][k]
                k += 1
                j, d = wilson(joint, n), wilson(dead, n)
                rows.append(dict(mode="adapted", N=N, gamma=g, horizon=P["horizon"], window=P["window"],
                                 inv_alive_frac=inv / n, noninv_alive_frac=non / n, joint_frac=j.estimate,
                                 ci_low=j.low, ci_high=j.high, dagger_marginal=d.estimate, replicas=n, capped=capped,
                                 dagger_ci_low=d.low, dagger_ci_high=d.high, seeded_mean=seeded / n,
                                 seed_capped=seed_capped, m_gamma=gamma_truncate(objs["noninvasive"].mu, g).m_gamma,
                                 mrho_invasive=objs["invasive"].mu.mean * rho_i))
    elif kind == "percolation":
        for i, p in enumerate(P["p"]):
            oracle = perc.thinning_oracle(objs["mu"], p)
            for j, L in enumerate(P["depths"]):
                ci = wilson(total["alive"][i][j], n)
                rows.append(dict(p=p, depth=L, alive_frac=ci.estimate, ci_low=ci.low, ci_high=ci.high,
                                 oracle_value=oracle.depth_survival(L, P["given_open"]), replicas=n,
                                 given_open=P["given_open"]))
    elif kind == "spectral":
        est = spectral_radius(objs["spec"], objs["step"])
        num = spectral_radius_numeric(objs["spec"], objs["step"], P["n_max"]) if objs["spec"].is_tree_like and objs["step"].is_radial else None
        for m in P["m"]:
            rows.append(dict(group=str(objs["spec"]), laziness=objs["step"].laziness, rho=est.value, method=est.method,
                             rho_numeric=None if num is None else num.value,
                             numeric_lower=None if num is None else num.lower, n_max=P["n_max"], m=m,
                             mrho=m * est.value, regime=classify_survival_regime(m, est.value).label))
    elif kind == "mtp":
        known = {p.name: p for p in perc.MTP_FAMILY}
        for i, name in enumerate(P["patterns"]):
            r = perc.mtp_from_sums(known[name], np.asarray(total["sums"][i]))
            ex = perc.mtp_exact(objs["mu"], known[name], P["rooted"], P["p"])
            rows.append(dict(pattern=name, rooted=P["rooted"], p=P["p"], samples=r.samples, lhs=r.lhs.mean,
                             lhs_se=r.lhs.se, rhs=r.rhs.mean, rhs_se=r.rhs.se, z=r.z, exact_lhs=ex[0],
                             exact_rhs=ex[1], depth=3))
    return rows


def rows_to_csv(kind: str, rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = COLUMNS[kind]
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in cols])
    return buf.getvalue()


# driver -----------------------------------------------------------------------


@dataclass
class RunResult:
    spec: ExperimentSpec
    rows: list
    csv_text: str
    capped: int
    wall_time: float
    workers: int
    trace: Optional[list] = None
    paths: dict = field(default_factory=dict)

    def metadata(self) -> dict:
        return {
            "schema": SCHEMA,
            "experiment": self.spec.name,
            "kind": self.spec.kind,
            "seed": self.spec.seed,
            "replicas": self.spec.replicas,
            "chunk": self.spec.chunk,
            "workers": self.workers,
            "capped": self.capped,
            "rows": len(self.rows),
            "config": self.spec.raw,
            "wall_time_s": round(self.wall_time, 3),
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        }


def resolve_workers(cli: Optional[int], spec: ExperimentSpec) -> int:
    """Worker count: command line, then the environment variable, then the config, then 1."""
    if cli is not None:
        w = cli
    elif os.environ.get(WORKERS_ENV):
        try:
            w = int(os.environ[WORKERS_ENV])
        except ValueError:
            raise ConfigError(WORKERS_ENV, f"not an integer: {os.environ[WORKERS_ENV]!r}") from None
    else:
        w = spec.workers or 1
    if w < 1:
        raise ConfigError("workers", "must be >= 1")
    return w


def run_experiment(spec: ExperimentSpec, workers: int = 1, trace: bool = False) -> RunResult:
    """Execute all chunks and aggregate.  Output does not depend on ``workers``."""
    t0 = time.perf_counter()
    objs = build(spec.raw)
    raw = dict(spec.raw, replicas=spec.replicas, seed=spec.seed, kind=spec.kind)
    if spec.kind == "spectral":
        tasks = []
    else:
        tasks = [(raw, spec.params, lo, min(lo + spec.chunk, spec.replicas), i, trace)
                 for i, lo in enumerate(range(0, spec.replicas, spec.chunk))]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]
    total = None
    for r in results:
        total = r if total is None else _merge(total, r)
    rows = _rows(spec, total, objs)
    capped = int(total["capped"]) if total else 0
    return RunResult(spec, rows, rows_to_csv(spec.kind, rows), capped, time.perf_counter() - t0, workers,
                     total.get("trace") if total else None)


def write_outputs(result: RunResult, out_dir, figure: bool = True) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = result.spec.name
    paths = {"csv": out / f"{stem}.csv", "json": out / f"{stem}.json"}
    paths["csv"].write_text(result.csv_text)
    paths["json"].write_text(json.dumps(result.metadata(), indent=2, sort_keys=True) + "\n")
    if result.trace is not None:
        paths["trace"] = out / f"{stem}.trace.ndjson"
        paths["trace"].write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in result.trace))
    if figure:
        from .plotting import plot_long, to_long

        long_rows = to_long(result.spec.kind, result.rows)
        paths["figure"] = out / f"{stem}.png"
        plot_long(long_rows, paths["figure"], title=f"{stem} ({result.spec.kind})")
    result.paths = paths
    return paths
