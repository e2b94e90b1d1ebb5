"""On-disk formats: instance files, run manifests, result tables.

Everything is diffable text. Instances use a line-oriented schema with
weights printed at 17 significant digits so files round-trip bit-exactly;
manifests are JSON sidecars carrying enough to re-run a command; tabular
results are plain CSV with a header row.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

import qeopt
from qeopt.problem import SKInstance

INSTANCE_HEADER = "# qeopt instance v1"


def write_instance(instance: SKInstance, path: str | Path) -> None:
    lines = [
        INSTANCE_HEADER,
        f"n_vars {instance.n_vars}",
        f"weight_kind {instance.weight_kind}",
        f"seed {instance.seed}",
    ]
    pairs = list(instance.weight_pairs())
    lines.append(f"n_weights {len(pairs)}")
    for i, j, w in pairs:
        lines.append(f"{i} {j} {w:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_instance(path: str | Path) -> SKInstance:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != INSTANCE_HEADER:
        raise ValueError(f"{path}: not a qeopt instance file")
    fields = {}
    idx = 1
    for key in ("n_vars", "weight_kind", "seed", "n_weights"):
        name, _, value = lines[idx].partition(" ")
        if name != key:
            raise ValueError(f"{path}: expected '{key}' on line {idx + 1}, got {name!r}")
        fields[key] = value
        idx += 1
    n = int(fields["n_vars"])
    n_weights = int(fields["n_weights"])
    w = np.zeros((n, n))
    for line in lines[idx : idx + n_weights]:
        si, sj, sw = line.split()
        i, j = int(si), int(sj)
        if not 0 <= i < j < n:
            raise ValueError(f"{path}: bad weight pair ({i}, {j})")
        w[i, j] = float(sw)
    if len(lines[idx:]) != n_weights:
        raise ValueError(f"{path}: expected {n_weights} weight lines, got {len(lines[idx:])}")
    return SKInstance(n_vars=n, weights=w, weight_kind=fields["weight_kind"], seed=int(fields["seed"]))


@dataclass(frozen=True)
class RunManifest:
    command: str
    argv: list[str]
    config: dict
    seed: int | None
    version: str
    created_utc: str
    inputs: list[str]
    outputs: list[str]


def make_manifest(command: str, argv: list[str], config: dict, seed: int | None,
                  inputs: list[str], outputs: list[str]) -> RunManifest:
    return RunManifest(
        command=command,
        argv=list(argv),
        config=config,
        seed=seed,
        version=qeopt.__version__,
        created_utc=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        inputs=[str(p) for p in inputs],
        outputs=[str(p) for p in outputs],
    )


def manifest_path(out_path: str | Path) -> Path:
    return Path(str(out_path) + ".manifest.json")


def write_manifest(manifest: RunManifest, out_path: str | Path) -> Path:
    path = manifest_path(out_path)
    path.write_text(json.dumps(asdict(manifest), indent=2, sort_keys=True) + "\n")
    return path


def read_manifest(path: str | Path) -> RunManifest:
    data = json.loads(Path(path).read_text())
    return RunManifest(**data)


def write_csv(path: str | Path, header: list[str], rows: list[list], append: bool = False) -> None:
    """Write (or append to) a headered CSV; floats at 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    exists = path.exists() and path.stat().st_size > 0
    mode = "a" if append and exists else "w"
    with open(path, mode, newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if mode == "w":
            writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(v) for v in row])


def _format_cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def default_out_dir() -> Path:
    return Path(os.environ.get("QEOPT_OUT_DIR", "results"))
