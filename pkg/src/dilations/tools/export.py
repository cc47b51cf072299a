"""
Deterministic JSON and CSV output.

Floats are written with 17 significant digits, CSV lines end with LF and non-finite numbers become JSON null (or an
empty CSV cell), so identical jobs produce byte-identical files.
"""
import csv
import io
import json
import math

import numpy as np

from ..models import Verdict, ProbeSeries, QuasiNormComparison, WeakEquivalenceTable

FLOAT_FORMAT = ".17g"


def _clean(value):
    if isinstance(value, dict):
        return {str(key): _clean(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(item) for item in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def _float_json(value: float) -> str:
    text = format(value, FLOAT_FORMAT)
    return text if any(c in text for c in ".en") else text + ".0"


def _encode(value, depth: int) -> str:
    """json.dumps(value, indent=2, sort_keys=True) with floats written to FLOAT_FORMAT"""
    inner, outer = "  " * (depth + 1), "  " * depth
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{inner}{json.dumps(key)}: {_encode(value[key], depth + 1)}" for key in sorted(value)]
        return "{\n" + ",\n".join(items) + f"\n{outer}}}"
    if isinstance(value, list):
        if not value:
            return "[]"
        items = [f"{inner}{_encode(item, depth + 1)}" for item in value]
        return "[\n" + ",\n".join(items) + f"\n{outer}]"
    if isinstance(value, float):
        return _float_json(value)
    return json.dumps(value)


def to_json(report: dict) -> str:
    return _encode(_clean(report), 0) + "\n"


def verdict_json(verdict: Verdict) -> str:
    return to_json(verdict.to_dict())


def _number(value) -> str:
    value = float(value)
    return format(value, FLOAT_FORMAT) if math.isfinite(value) else ""


def _writer(buffer: io.StringIO):
    return csv.writer(buffer, lineterminator="\n")


def probe_csv(probe: ProbeSeries) -> str:
    buffer = io.StringIO()
    writer = _writer(buffer)
    writer.writerow(["k", "log_norm"])
    for k, log_norm in zip(probe.ks, probe.log_norms):
        writer.writerow([int(k), _number(log_norm)])
    buffer.write(f"# classification: {probe}\n")
    buffer.write(f"# side: {probe.side.value}\n")
    return buffer.getvalue()


def comparison_csv(comparison: QuasiNormComparison) -> str:
    buffer = io.StringIO()
    writer = _writer(buffer)
    writer.writerow(["radius", "direction", "ratio"])
    for radius, direction, ratio in comparison.rows():
        writer.writerow([_number(radius), direction, _number(ratio)])
    buffer.write(f"# ratio range: [{_number(comparison.ratio_low)}, {_number(comparison.ratio_high)}]\n")
    return buffer.getvalue()


def count_table_csv(table: WeakEquivalenceTable) -> str:
    """Rows (i, |J_i|, J_i) with the witnesses joined by spaces"""
    buffer = io.StringIO()
    writer = _writer(buffer)
    writer.writerow(["i", "count", "witness_j_list"])
    for i, count, witnesses in table.rows:
        writer.writerow([i, count, " ".join(str(j) for j in witnesses)])
    buffer.write(f"# max_J_count: {table.max_J_count}\n")
    buffer.write(f"# max_I_count: {table.max_I_count}\n")
    return buffer.getvalue()
