"""JSON formats for matrices, channels, devices, specs, transcripts and reports.

Matrices are ``{"rows": n, "cols": m, "data": [[re, im], ...]}`` in row-major
order. Report reals are written as decimal strings with 12 significant
digits so that re-runs produce byte-identical files.
"""

from __future__ import annotations

import json
from typing import Any

import numpy as np

from .channel import KrausChannel, RandomUnitarySpec
from .device import MemoryDevice, UsageTranscript
from .linalg import as_matrix, von_neumann_entropy
from .repeatability import BoundReport, ChainReport, RepeatabilityReport, controlled_u_device


class SchemaError(ValueError):
    """Input JSON does not follow the expected layout."""

    def __init__(self, where: str, problem: str):
        self.where = where
        super().__init__(f"{where}: {problem}")


def real(x) -> str | None:
    if x is None:
        return None
    if isinstance(x, str):
        return x
    x = float(x)
    if x == 0:
        x = 0.0  # drop the sign of negative zero
    return format(x, ".12g")


def reals(xs) -> list:
    return [real(x) for x in xs]


def matrix_to_json(m) -> dict:
    arr = as_matrix(m)
    return {
        "rows": int(arr.shape[0]),
        "cols": int(arr.shape[1]),
        "data": [[float(z.real), float(z.imag)] for z in arr.reshape(-1)],
    }


def matrix_from_json(obj: Any, where: str = "matrix") -> np.ndarray:
    if not isinstance(obj, dict):
        raise SchemaError(where, f"expected an object with rows/cols/data, got {type(obj).__name__}")
    for key in ("rows", "cols", "data"):
        if key not in obj:
            raise SchemaError(where, f"missing key {key!r}")
    rows, cols, data = obj["rows"], obj["cols"], obj["data"]
    if not (isinstance(rows, int) and isinstance(cols, int)) or rows < 1 or cols < 1:
        raise SchemaError(where, f"rows and cols must be positive integers, got {rows!r} and {cols!r}")
    if not isinstance(data, list) or len(data) != rows * cols:
        got = len(data) if isinstance(data, list) else type(data).__name__
        raise SchemaError(where, f"data must hold rows*cols = {rows * cols} entries, got {got}")
    values = np.empty(rows * cols, dtype=complex)
    for i, entry in enumerate(data):
        if (
            not isinstance(entry, list)
            or len(entry) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in entry)
        ):
            raise SchemaError(f"{where}.data[{i}]", f"expected [re, im], got {entry!r}")
        values[i] = complex(entry[0], entry[1])
    return values.reshape(rows, cols)


def _require(obj: Any, key: str, where: str):
    if not isinstance(obj, dict):
        raise SchemaError(where, f"expected an object, got {type(obj).__name__}")
    if key not in obj:
        raise SchemaError(where, f"missing key {key!r}")
    return obj[key]


def channel_to_json(ch: KrausChannel) -> dict:
    return {"dim": ch.dim, "kraus": [matrix_to_json(k) for k in ch.kraus]}


def channel_from_json(obj: Any, where: str = "channel") -> KrausChannel:
    dim = _require(obj, "dim", where)
    ops = _require(obj, "kraus", where)
    if not isinstance(ops, list) or not ops:
        raise SchemaError(f"{where}.kraus", "expected a nonempty list of matrices")
    mats = [matrix_from_json(k, f"{where}.kraus[{i}]") for i, k in enumerate(ops)]
    for i, m in enumerate(mats):
        if m.shape != (dim, dim):
            raise SchemaError(f"{where}.kraus[{i}]", f"expected {dim}x{dim}, got {m.shape[0]}x{m.shape[1]}")
    return KrausChannel(np.stack(mats))


def device_to_json(dev: MemoryDevice) -> dict:
    return {
        "dim_m": dev.dim_m,
        "dim_s": dev.dim_s,
        "unitary": matrix_to_json(dev.unitary),
        "memory": matrix_to_json(dev.memory),
    }


def device_from_json(obj: Any, where: str = "device") -> MemoryDevice:
    dim_m = _require(obj, "dim_m", where)
    dim_s = _require(obj, "dim_s", where)
    u = matrix_from_json(_require(obj, "unitary", where), f"{where}.unitary")
    xi = matrix_from_json(_require(obj, "memory", where), f"{where}.memory")
    if xi.shape != (dim_m, dim_m):
        raise SchemaError(f"{where}.memory", f"expected {dim_m}x{dim_m}, got {xi.shape[0]}x{xi.shape[1]}")
    if u.shape != (dim_m * dim_s, dim_m * dim_s):
        raise SchemaError(f"{where}.unitary", f"expected {dim_m * dim_s}x{dim_m * dim_s}, got {u.shape[0]}x{u.shape[1]}")
    return MemoryDevice(u, xi, dim_s)


def spec_to_json(spec: RandomUnitarySpec) -> dict:
    return {"probs": [float(p) for p in spec.probs], "unitaries": [matrix_to_json(u) for u in spec.unitaries]}


def spec_from_json(obj: Any, where: str = "spec") -> tuple[RandomUnitarySpec, np.ndarray | None]:
    """Parse a random-unitary spec and its optional ``coherences`` matrix."""
    probs = _require(obj, "probs", where)
    us = _require(obj, "unitaries", where)
    if not isinstance(probs, list) or not all(isinstance(p, (int, float)) for p in probs):
        raise SchemaError(f"{where}.probs", "expected a list of numbers")
    if not isinstance(us, list):
        raise SchemaError(f"{where}.unitaries", "expected a list of matrices")
    mats = [matrix_from_json(u, f"{where}.unitaries[{i}]") for i, u in enumerate(us)]
    coherences = obj.get("coherences")
    if coherences is not None:
        coherences = matrix_from_json(coherences, f"{where}.coherences")
    return RandomUnitarySpec(probs, mats), coherences


def device_from_spec_json(obj: Any) -> MemoryDevice:
    spec, coherences = spec_from_json(obj)
    return controlled_u_device(spec, coherences)


# -- transcripts ------------------------------------------------------------------


def transcript_to_json(t: UsageTranscript) -> list[dict]:
    """One object per use, with the states involved, their entropies and the
    Choi distance of that use's induced channel from the first use's."""
    spread = t.channel_spread()
    mem_s = t.entropies
    in_s = t.input_entropies
    out_s = t.output_entropies
    steps = []
    for k in range(len(t)):
        steps.append(
            {
                "step": k + 1,
                "input": matrix_to_json(t.inputs[k]),
                "output": matrix_to_json(t.outputs[k]),
                "memory_before": matrix_to_json(t.memory_states[k]),
                "memory_after": matrix_to_json(t.memory_states[k + 1]),
                "entropy_input": real(in_s[k]),
                "entropy_output": real(out_s[k]),
                "entropy_memory_before": real(mem_s[k]),
                "entropy_memory_after": real(mem_s[k + 1]),
                "entropy_joint": real(t.joint_entropies[k]),
                "choi_distance_to_first": real(spread[k]) if spread else None,
            }
        )
    return steps


def transcript_entropies_from_json(steps: Any) -> dict:
    """Recompute the entropy columns of a transcript file from its matrices.

    The joint entropies cannot be rebuilt from marginals and are taken from
    the file as recorded.
    """
    if not isinstance(steps, list) or not steps:
        raise SchemaError("transcript", "expected a nonempty JSON array of steps")
    inputs, outputs, memory, joint = [], [], [], []
    constant = True
    first_input = None
    for k, step in enumerate(steps):
        where = f"transcript[{k}]"
        rho = matrix_from_json(_require(step, "input", where), f"{where}.input")
        out = matrix_from_json(_require(step, "output", where), f"{where}.output")
        if k == 0:
            before = matrix_from_json(_require(step, "memory_before", where), f"{where}.memory_before")
            memory.append(von_neumann_entropy(before))
            first_input = rho
        elif not np.allclose(rho, first_input, atol=1e-12):
            constant = False
        after = matrix_from_json(_require(step, "memory_after", where), f"{where}.memory_after")
        inputs.append(von_neumann_entropy(rho))
        outputs.append(von_neumann_entropy(out))
        memory.append(von_neumann_entropy(after))
        raw_joint = step.get("entropy_joint")
        if raw_joint is None:
            joint = None
        elif joint is not None:
            try:
                joint.append(float(raw_joint))
            except (TypeError, ValueError):
                raise SchemaError(f"{where}.entropy_joint", f"expected a number, got {raw_joint!r}") from None
    return {"inputs": inputs, "outputs": outputs, "memory": memory, "joint": joint, "constant_input": constant}


# -- reports ----------------------------------------------------------------------


def repeatability_report_to_json(r: RepeatabilityReport) -> dict:
    return {
        "n_requested": r.n_requested,
        "max_choi_deviation": real(r.max_choi_deviation),
        "first_deviating_step": r.first_deviating_step,
        "per_step_deviation": reals(r.per_step_deviation),
        "threshold": real(r.threshold),
        "input_source": r.input_source,
        "repeatable": r.repeatable,
    }


def bound_report_to_json(b: BoundReport) -> dict:
    return {
        "mem_dim": b.mem_dim,
        "delta_at_mixture": real(b.delta_at_mixture),
        "delta_max_estimate": real(b.delta_max_estimate),
        "delta_max_is_lower_bound": b.delta_max_is_lower_bound,
        "n_max_mixture": b.n_max_mixture,
        "n_max_estimate": b.n_max_estimate,
        "tie_mixture": b.tie_mixture,
        "tie_estimate": b.tie_estimate,
        "n_max_mixture_alternatives": b.n_max_mixture_alternatives,
        "n_max_estimate_alternatives": b.n_max_estimate_alternatives,
        "argmax_bloch": reals(b.argmax_bloch) if b.argmax_bloch is not None else None,
    }


def chain_report_to_json(c: ChainReport) -> dict:
    return {
        "ok": c.ok,
        "mem_dim": c.mem_dim,
        "log2_mem_dim": real(c.log_mem_dim),
        "constant_input": c.constant_input,
        "first_violation": c.first_violation,
        "violation": c.violation,
        "cumulative_deficit": reals(c.cumulative_deficit),
        "memory_gain": reals(c.memory_gain),
        "subadditivity_slack": reals(c.subadditivity_slack),
        "conservation_residuals": reals(c.conservation_residuals),
        "tolerance": real(c.tol),
    }


def tomography_result_to_json(r) -> dict:
    return {
        "strategy": r.strategy.kind,
        "shots_per_probe": int(r.strategy.shots_per_probe),
        "seed": int(r.strategy.seed),
        "mode": r.mode,
        "bloch_map": reals(np.asarray(r.bloch_map).reshape(-1)),
        "bloch_shift": reals(r.bloch_shift),
        "completely_positive": r.completely_positive,
        "min_choi_eigenvalue": real(r.min_choi_eigenvalue),
        "projected": r.projected,
        "dist_to_identity": real(r.dist_to_identity),
        "dist_to_depolarizing": real(r.dist_to_depolarizing),
        "probe_counts": list(r.probe_counts),
        "probe_means": [reals(row) if np.all(np.isfinite(row)) else None for row in r.probe_means],
    }


def dumps(obj: Any) -> str:
    return json.dumps(obj, indent=2) + "\n"
