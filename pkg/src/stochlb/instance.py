"""Load-balancing instances and their JSON file format.

Instance file::

    {"m": 2, "n": 3, "p": 2,            # p may also be "inf"
     "jobs": [                          # one entry per job ...
        [[[0, 0.5], [4, 0.5]],          # ... holding one distribution per machine
         [[1, 1.0]]],
        ...]}

Distributions are arrays of ``[value, prob]`` pairs; each must sum to 1
within 1e-9.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .dist import DiscreteDist, expectation
from .errors import DistributionError, StochLBError

FILE_PROB_TOL = 1e-9


class InstanceError(StochLBError, ValueError):
    """Malformed instance or assignment document; message carries a JSON path."""


@dataclass(frozen=True)
class LbInstance:
    """``Y[i][j]`` is the size of job ``j`` when run on machine ``i``."""

    Y: tuple[tuple[DiscreteDist, ...], ...]

    def __post_init__(self):
        Y = tuple(tuple(row) for row in self.Y)
        if not Y or not Y[0]:
            raise InstanceError("need m >= 1 machines and n >= 1 jobs")
        if any(len(row) != len(Y[0]) for row in Y):
            raise InstanceError("ragged job matrix")
        object.__setattr__(self, "Y", Y)

    @property
    def m(self) -> int:
        return len(self.Y)

    @property
    def n(self) -> int:
        return len(self.Y[0])

    def means(self) -> np.ndarray:
        return np.array([[expectation(d) for d in row] for row in self.Y])

    def loads(self, machine_of) -> list[list[DiscreteDist]]:
        """Per-machine job lists for an integral assignment."""
        out: list[list[DiscreteDist]] = [[] for _ in range(self.m)]
        for j, i in enumerate(machine_of):
            out[i].append(self.Y[i][j])
        return out

    @classmethod
    def from_jobs(cls, jobs) -> "LbInstance":
        """Build from a job-major nested list ``jobs[j][i]``."""
        m = len(jobs[0])
        return cls(tuple(tuple(jobs[j][i] for j in range(len(jobs))) for i in range(m)))


def _parse_p(raw: Any, path: str) -> float:
    if isinstance(raw, str):
        if raw.lower() in ("inf", "infinity"):
            return math.inf
        raise InstanceError(f"{path}: p must be a number >= 1 or \"inf\"")
    if isinstance(raw, bool) or not isinstance(raw, (int, float)) or not raw >= 1:
        raise InstanceError(f"{path}: p must be a number >= 1 or \"inf\"")
    return float(raw)


def parse_distribution(raw: Any, path: str) -> DiscreteDist:
    if not isinstance(raw, list) or not raw:
        raise InstanceError(f"{path}: distribution must be a non-empty array of [value, prob] pairs")
    for k, pair in enumerate(raw):
        if (
            not isinstance(pair, list)
            or len(pair) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in pair)
        ):
            raise InstanceError(f"{path}[{k}]: expected [value, prob] with numeric entries")
    total = math.fsum(pair[1] for pair in raw)
    if abs(total - 1.0) > FILE_PROB_TOL:
        raise InstanceError(f"{path}: probabilities sum to {total!r}, not 1 (tolerance {FILE_PROB_TOL})")
    pairs = raw
    if abs(total - 1.0) > 1e-12:
        pairs = [[v, q / total] for v, q in raw]
    try:
        return DiscreteDist.from_pairs(pairs)
    except DistributionError as exc:
        raise InstanceError(f"{path}: {exc}") from exc


def instance_from_dict(doc: Any) -> tuple[LbInstance, float]:
    if not isinstance(doc, dict):
        raise InstanceError("$: instance must be a JSON object")
    for key in ("m", "n", "p", "jobs"):
        if key not in doc:
            raise InstanceError(f"$: missing key {key!r}")
    m, n = doc["m"], doc["n"]
    for key, val in (("m", m), ("n", n)):
        if isinstance(val, bool) or not isinstance(val, int) or val < 1:
            raise InstanceError(f"$.{key}: must be a positive integer")
    p = _parse_p(doc["p"], "$.p")
    jobs = doc["jobs"]
    if not isinstance(jobs, list) or len(jobs) != n:
        raise InstanceError(f"$.jobs: expected an array of n={n} jobs")
    parsed = []
    for j, row in enumerate(jobs):
        if not isinstance(row, list) or len(row) != m:
            raise InstanceError(f"$.jobs[{j}]: expected an array of m={m} distributions")
        parsed.append([parse_distribution(d, f"$.jobs[{j}][{i}]") for i, d in enumerate(row)])
    return LbInstance.from_jobs(parsed), p


def instance_to_dict(inst: LbInstance, p: float) -> dict:
    return {
        "m": inst.m,
        "n": inst.n,
        "p": "inf" if math.isinf(p) else p,
        "jobs": [[inst.Y[i][j].pairs() for i in range(inst.m)] for j in range(inst.n)],
    }


def read_json(path: str | Path) -> Any:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def write_json(doc: Any, path: str | Path | None = None) -> str:
    # float repr is the shortest string that round-trips the double exactly
    text = json.dumps(doc, indent=1, sort_keys=False)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


def load_instance(path: str | Path) -> tuple[LbInstance, float]:
    return instance_from_dict(read_json(path))


def parse_assignment(doc: Any, inst: LbInstance) -> tuple[int, ...]:
    """Accepts a bare list of machine indices, ``{"assignment": [...]}``, or a solve report."""
    raw = doc.get("assignment") if isinstance(doc, dict) else doc
    if not isinstance(raw, list) or len(raw) != inst.n:
        raise InstanceError(f"$.assignment: expected an array of n={inst.n} machine indices")
    for j, i in enumerate(raw):
        if isinstance(i, bool) or not isinstance(i, int) or not 0 <= i < inst.m:
            raise InstanceError(f"$.assignment[{j}]: machine index must be an integer in [0, {inst.m})")
    return tuple(raw)


def random_instance(m: int, n: int, support: int, seed: int, vmax: float = 10.0) -> LbInstance:
    """Each Y_ij gets 1..support atoms uniform on [0, vmax] with Dirichlet weights."""
    rng = np.random.default_rng(seed)
    jobs = []
    for _ in range(n):
        row = []
        for _ in range(m):
            k = int(rng.integers(1, support + 1))
            vals = rng.uniform(0.0, vmax, size=k)
            probs = rng.dirichlet(np.ones(k))
            row.append(DiscreteDist.from_arrays(vals, probs))
        jobs.append(row)
    return LbInstance.from_jobs(jobs)
