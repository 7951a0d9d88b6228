"""Result serialisation (JSON and CSV) and normalised summary reports."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from fractions import Fraction
from pathlib import Path

from .cost import json_default
from .errors import ValidationError

SCHEMA_VERSION = 1
RESULT_VERSION = 1
METRICS = ("runtime", "energy", "edp")


def fmt(x) -> str:
    """Fixed-precision rendering: integers verbatim, everything else 6 decimals."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, (Fraction, float)):
        return f"{float(x):.6f}"
    if x is None:
        return ""
    return str(x)


def to_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=json_default) + "\n"


def to_csv(table: str, header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    buf.write(f"# schema: {table} v{SCHEMA_VERSION}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_files(out_dir: Path, files: dict[str, str]) -> list[Path]:
    written = []
    for rel, text in files.items():
        atomic_write(Path(out_dir) / rel, text)
        written.append(Path(out_dir) / rel)
    return written


# ----------------------------------------------------------------- flexion tables

AXIS_FIELDS = ("w_count", "a_count", "cw_count", "c_count", "a_hw", "hw_flexion", "wl_flexion")


def flexion_rows(model_name: str, stats_list) -> tuple[list[str], list[list]]:
    header = ["model", "layer"]
    for axis in "TOPS":
        header += [f"{axis}_degree"] + [f"{axis}_{f}" for f in AXIS_FIELDS]
    header += ["combined_w", "combined_a", "combined_cw", "combined_wf", "exact"]
    rows = []
    for st in stats_list:
        row = [model_name, st.layer]
        for axis in "TOPS":
            c = st.per_axis[axis]
            row += [c.degree] + [getattr(c, f) for f in AXIS_FIELDS]
        row += [st.combined_w, st.combined_a, st.combined_cw, st.combined_wf, st.exact]
        rows.append(row)
    return header, rows


# ----------------------------------------------------------------- DSE results

def result_files(result: dict) -> dict[str, str]:
    """Every file of a DSE result directory, keyed by relative path."""
    files = {"result.json": to_json(result)}
    for name in result["variants"]:
        recs = [r for r in result["records"] if r["variant"] == name]
        files[f"variants/{name}.json"] = to_json({
            "version": result["version"], "variant": name,
            "accelerator": result["accelerators"][name],
            "overhead": result["overhead"].get(name), "records": recs})
    files["matrix.csv"] = matrix_csv(result, "runtime")
    files["summary.csv"] = summary_csv(result)
    files["venn.csv"] = venn_csv(result)
    files["layers.csv"] = layers_csv(result)
    return files


def _record(result, model, variant):
    for r in result["records"]:
        if r["model"] == model and r["variant"] == variant:
            return r
    raise ValidationError(f"result has no record for {model}/{variant}")


def matrix_csv(result: dict, metric: str) -> str:
    header = ["model"] + result["variants"]
    rows = [[m] + [_record(result, m, v)["normalized"][metric] for v in result["variants"]]
            for m in result["models"]]
    return to_csv(f"matrix-{metric}", header, rows)


def summary_csv(result: dict) -> str:
    header = ["model", "variant", "total_runtime", "total_energy", "total_edp",
              "norm_runtime", "norm_energy", "norm_edp", "speedup"]
    rows = []
    for r in result["records"]:
        n = r["normalized"]
        rows.append([r["model"], r["variant"], r["total_runtime"], r["total_energy"], r["total_edp"],
                     n["runtime"], n["energy"], n["edp"], r["speedup"]])
    return to_csv("summary", header, rows)


def venn_csv(result: dict) -> str:
    header = ["model", "variant", "layer", "axis", "W", "A&W", "C&W"]
    rows = []
    for r in result["records"]:
        for layer in r["layers"]:
            for axis, counts in layer["venn"].items():
                rows.append([r["model"], r["variant"], layer["layer"], axis,
                             counts["W"], counts["A&W"], counts["C&W"]])
    return to_csv("venn", header, rows)


def layers_csv(result: dict) -> str:
    header = ["model", "variant", "layer", "mode", "feasible_size", "runtime", "energy", "edp",
              "utilization", "dram_traffic", "mapping"]
    rows = []
    for r in result["records"]:
        for layer in r["layers"]:
            mp = layer["mapping"]
            text = "{}|{}|{}|{}".format(
                ",".join(f"{k}{v}" for k, v in mp["tiles"].items()), "".join(mp["order"]),
                "".join(mp["parallel"]), "x".join(map(str, mp["shape"])))
            rows.append([r["model"], r["variant"], layer["layer"], layer["mode"], layer["feasible_size"],
                         layer["runtime"], layer["energy"], layer["edp"],
                         layer["cost"]["utilization"], layer["cost"]["dram_traffic"], text])
    return to_csv("layers", header, rows)


# ----------------------------------------------------------------- report

def load_result(result_dir: Path) -> dict:
    path = Path(result_dir) / "result.json"
    try:
        result = json.loads(path.read_text())
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    if result.get("version") != RESULT_VERSION:
        raise ValidationError(f"{path}: result version {result.get('version')!r} is not supported "
                              f"(expected {RESULT_VERSION})")
    return result


def _geo(values) -> float:
    values = [float(v) for v in values]
    if not values or any(v <= 0 for v in values):
        return float("nan")
    return math.exp(sum(math.log(v) for v in values) / len(values))


def report(result_dir: Path) -> str:
    """Normalised runtime/energy/EDP matrices with a geomean row each."""
    result = load_result(result_dir)
    variants, models = result["variants"], result["models"]
    buf = io.StringIO()
    buf.write(f"# schema: report v{SCHEMA_VERSION}\n")
    buf.write(f"# baseline: {result['baseline_variant']}\n")
    writer = csv.writer(buf, lineterminator="\n")
    for metric in METRICS:
        writer.writerow([f"metric={metric}"] + variants)
        cols = {v: [] for v in variants}
        for m in models:
            row = [m]
            for v in variants:
                val = _record(result, m, v)["normalized"][metric]
                cols[v].append(val)
                row.append(fmt(float(val)))
            writer.writerow(row)
        writer.writerow(["geomean"] + [fmt(_geo(cols[v])) for v in variants])
    return buf.getvalue()
