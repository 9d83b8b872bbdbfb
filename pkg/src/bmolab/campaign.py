"""Experiment configuration, the campaign runner, and report emission.

A campaign is a JSON config naming a grid, seeded field generators, and an
ordered experiment list.  Runs are deterministic: identical config and seed
reproduce identical numbers, and the serialized report is byte-identical
apart from the timing block.  All numeric CSV output uses 17 significant
digits so emitted values round-trip exactly.
"""

from __future__ import annotations

import csv
import json
import os
import platform
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .ap import ap_continuous, ap_dual_check, ap_dyadic, ap_reducing_form, ap_slices
from .bmo import equivalence_report
from .commutator import averaging_opnorm, lower_bound_experiment, upper_bound_experiment
from .errors import ConfigError
from .grid import GridSpec, Rectangle, make_family
from .reducing import compare_inverse_prime, reduce_with_mode
from .weights import WeightField, gen_from_descriptor

SCHEMA_VERSION = 1


def pool_size() -> int:
    try:
        return max(1, int(os.environ.get("BMOLAB_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class ExperimentConfig:
    seed: int
    grid: GridSpec
    fields: dict  # name -> generator descriptor
    experiments: list
    tolerances: dict = field(default_factory=dict)

    @staticmethod
    def from_dict(obj: dict) -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ConfigError("config must be a JSON object")
        grid_spec = obj.get("grid")
        if not isinstance(grid_spec, dict) or "dims" not in grid_spec or "depth" not in grid_spec:
            raise ConfigError("missing dims/depth", "grid")
        try:
            grid = GridSpec(tuple(grid_spec["dims"]), int(grid_spec["depth"]))
        except (TypeError, ValueError) as err:
            raise ConfigError(str(err), "grid")
        fields = obj.get("fields", {})
        if not isinstance(fields, dict):
            raise ConfigError("fields must map names to generator descriptors", "fields")
        experiments = obj.get("experiments", [])
        if not isinstance(experiments, list):
            raise ConfigError("experiments must be a list", "experiments")
        for k, exp in enumerate(experiments):
            if not isinstance(exp, dict) or "type" not in exp:
                raise ConfigError("experiment needs a type", f"experiments[{k}]")
        return ExperimentConfig(
            int(obj.get("seed", 0)), grid, fields, experiments, obj.get("tolerances", {})
        )

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "grid": {"dims": list(self.grid.dims), "depth": self.grid.depth},
            "fields": self.fields,
            "experiments": self.experiments,
            "tolerances": self.tolerances,
        }


@dataclass
class CampaignReport:
    schema_version: int
    environment: dict
    config: dict
    results: list
    timings: dict
    flags: list

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, include_timings: bool = True) -> str:
        obj = self.to_dict()
        if not include_timings:
            obj.pop("timings")
        return json.dumps(obj, sort_keys=True, indent=1)


def _environment() -> dict:
    return {
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "machine": platform.machine(),
        "threads": pool_size(),
    }


def _materialize_fields(cfg: ExperimentConfig) -> dict:
    out = {}
    for idx, name in enumerate(sorted(cfg.fields)):
        desc = dict(cfg.fields[name])
        if desc.get("kind") in ("random_pd", "fourier_symbol") and "seed" not in desc:
            desc["seed"] = cfg.seed + idx
        out[name] = gen_from_descriptor(cfg.grid, desc)
    return out


def _rect_from_config(obj, grid: GridSpec) -> Rectangle:
    if obj == "full":
        from .grid import full_torus_rectangle

        return full_torus_rectangle(grid)
    return Rectangle(tuple((a, b) for a, b in obj["axes"]), int(obj["split"]))


def _family_from_config(exp: dict, grid: GridSpec, seed: int):
    return make_family(
        grid,
        exp.get("family", "dyadic"),
        sampled=int(exp.get("sampled", 0)),
        seed=seed,
    )


def _jsonable(x):
    if isinstance(x, Rectangle):
        return json.loads(x.to_json())
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _get_field(fields: dict, name, path: str) -> WeightField:
    if name not in fields:
        raise ConfigError(f"unknown field {name!r}", path)
    return fields[name]


def _run_one(exp: dict, k: int, cfg: ExperimentConfig, fields: dict) -> tuple[dict, list]:
    """Execute one experiment entry; returns (result dict, flag list)."""
    kind = exp["type"]
    path = f"experiments[{k}]"
    exp_id = exp.get("id", f"{kind}-{k}")
    p = float(exp.get("p", 2.0))
    flags: list = []
    values: dict = {}
    ratios: dict = {}
    argmax: dict = {}
    detail: dict = {}

    if kind == "ap":
        w = _get_field(fields, exp.get("weight"), path)
        fam = _family_from_config(exp, cfg.grid, cfg.seed + 7 * k)
        base = ap_dyadic(w, p)
        values["ap_dyadic"] = base.value
        argmax["ap_dyadic"] = base.argmax
        if exp.get("family", "dyadic") != "dyadic":
            cont = ap_continuous(w, fam, p)
            values["ap_continuous"] = cont.value
            argmax["ap_continuous"] = cont.argmax
            ratios["ap_continuous/ap_dyadic"] = cont.value / base.value
        red = ap_reducing_form(w, fam, p, exp.get("mode", "auto"))
        values["ap_reducing_form"] = red.value
        ratios["ap_reducing_form/ap_dyadic"] = red.value / base.value
        r, _, _ = ap_dual_check(w, p)
        values["ap_dual_r"] = r
        if cfg.grid.dims[1] > 0:
            s1, s2, _ = ap_slices(w, p)
            values["ap_slice_1"], values["ap_slice_2"] = s1, s2
            ratios["max_slice/ap_dyadic"] = max(s1, s2) / base.value
    elif kind == "bmo_equivalence":
        b = _get_field(fields, exp.get("symbol"), path)
        u = _get_field(fields, exp.get("u"), path)
        v = _get_field(fields, exp.get("v"), path)
        fam = _family_from_config(exp, cfg.grid, cfg.seed + 7 * k)
        rep = equivalence_report(
            b, u, v, p, fam, exp.get("mode", "auto"), exp.get("slices", True)
        )
        values.update(rep.values)
        ratios.update(rep.ratios)
        argmax.update(rep.argmax)
        if rep.degenerate:
            flags.append(f"{exp_id}: degenerate pairs {rep.degenerate}")
        detail["mode"] = rep.mode
        detail["family"] = rep.family
    elif kind == "reduce":
        w = _get_field(fields, exp.get("field"), path)
        rect = _rect_from_config(exp.get("region", "full"), cfg.grid)
        op = reduce_with_mode(w, rect, p, exp.get("mode", "john"))
        cmpres = compare_inverse_prime(w, rect, p, exp.get("mode", "john"))
        values["residual_left"] = op.residual_left
        values["residual_right"] = op.residual_right
        values["slack_left"] = cmpres.slack_left
        values["c_e"] = cmpres.c_e
        detail["matrix"] = op.matrix
        detail["mode"] = op.mode
        if not op.converged:
            flags.append(f"{exp_id}: reducing solver not converged")
    elif kind == "averaging":
        w = _get_field(fields, exp.get("field"), path)
        rect = _rect_from_config(exp.get("region", "full"), cfg.grid)
        cmpres = averaging_opnorm(rect, w, p, exp.get("mode", "auto"))
        values["reducing_product"] = cmpres.lhs
        values["averaging_norm"] = cmpres.rhs
        ratios["reducing_product/averaging_norm"] = cmpres.ratio
    elif kind in ("lower", "upper"):
        b = _get_field(fields, exp.get("symbol"), path)
        u = _get_field(fields, exp.get("u"), path)
        v = _get_field(fields, exp.get("v"), path)
        fam = _family_from_config(exp, cfg.grid, cfg.seed + 7 * k)
        fn = lower_bound_experiment if kind == "lower" else upper_bound_experiment
        if kind == "lower":
            rep = fn(b, u, v, p, fam, exp.get("mode", "auto"))
        else:
            rep = fn(b, u, v, p, fam)
        values["lhs"], values["rhs"] = rep.lhs, rep.rhs
        if rep.ratio is not None:
            ratios["lhs/rhs"] = rep.ratio
        else:
            flags.append(f"{exp_id}: degenerate (both sides below floor)")
        detail.update(rep.detail)
    else:
        raise ConfigError(f"unknown experiment type {kind!r}", path)

    result = {
        "id": exp_id,
        "type": kind,
        "p": p,
        "values": _jsonable(values),
        "ratios": _jsonable(ratios),
        "argmax": _jsonable(argmax),
        "detail": _jsonable(detail),
    }
    return result, flags


def run_campaign(cfg: ExperimentConfig) -> CampaignReport:
    """Execute all experiments; results are assembled in config order.

    Independent experiments fan out to a thread pool bounded by
    BMOLAB_THREADS (default 1, i.e. serial); the numbers are identical
    either way, only wall-clock timings differ.
    """
    fields = _materialize_fields(cfg)

    def run_indexed(item):
        k, exp = item
        t0 = time.perf_counter()
        result, exp_flags = _run_one(exp, k, cfg, fields)
        return result, exp_flags, time.perf_counter() - t0

    workers = pool_size()
    items = list(enumerate(cfg.experiments))
    if workers > 1 and len(items) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run_indexed, items))
    else:
        outcomes = [run_indexed(item) for item in items]

    results = []
    flags: list = []
    timings: dict = {}
    for result, exp_flags, elapsed in outcomes:
        timings[result["id"]] = elapsed
        results.append(result)
        flags.extend(exp_flags)
    return CampaignReport(
        SCHEMA_VERSION, _environment(), cfg.to_dict(), results, timings, flags
    )


CSV_COLUMNS = ("experiment", "left", "right", "left_value", "right_value", "ratio")


def emit_csv(report: CampaignReport, path) -> None:
    """One row per (experiment, variant pair); 17 significant digits."""

    def fmt(x):
        return "" if x is None else format(float(x), ".17g")

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for res in report.results:
            for pair, ratio in sorted(res.get("ratios", {}).items()):
                left, _, right = pair.partition("/")
                writer.writerow(
                    [
                        res["id"],
                        left,
                        right,
                        fmt(res["values"].get(left)),
                        fmt(res["values"].get(right)),
                        fmt(ratio),
                    ]
                )


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config: {err}")
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}")
    return ExperimentConfig.from_dict(obj)
