"""Run experiments, persist snapshots with checksums and emit reports."""

import hashlib
import json
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..diagnostics import SeamError
from ..spectral import write_snapshot
from .experiments import PIPELINES

MANIFEST_NAME = "manifest.json"
FIELD_EXPERIMENTS = {"poly-decay-zk", "poly-decay-kdv", "exp-decay-zk", "exp-decay-kdv",
                     "soliton-validate", "linear-growth"}


class ReportError(RuntimeError):
    pass


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def dump_json(obj, path):
    """Stable JSON: sorted keys, fixed indent, trailing newline."""
    text = json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"
    with open(path, "w") as fh:
        fh.write(text)
    return text


@dataclass
class RunManifest:
    """Config echo, snapshot index with checksums, timing and verdicts."""

    config: dict
    directory: str
    snapshots: list = field(default_factory=list)      # {"file", "t", "sha256"}
    wall_clock: float = 0.0
    verdicts: dict = field(default_factory=dict)
    informational: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    status: str = "complete"
    error: str = None

    @property
    def experiment(self):
        return self.config["experiment"]["id"]

    @property
    def passed(self):
        return self.status == "complete" and bool(self.verdicts) and all(self.verdicts.values())

    def save(self):
        dump_json(asdict(self), os.path.join(self.directory, MANIFEST_NAME))

    def verify(self):
        """Raise :class:`ReportError` unless every snapshot exists with its checksum."""
        for entry in self.snapshots:
            path = os.path.join(self.directory, entry["file"])
            if not os.path.exists(path):
                raise ReportError(f"missing snapshot {path}")
            if _sha256(path) != entry["sha256"]:
                raise ReportError(f"checksum mismatch for {path}")


def load_manifest(path):
    """Load a manifest from a run directory or a ``manifest.json`` path."""
    if os.path.isdir(path):
        path = os.path.join(path, MANIFEST_NAME)
    with open(path) as fh:
        data = json.load(fh)
    return RunManifest(**data), data


def run(cfg, directory=None):
    """Execute the pipeline of ``cfg`` and write snapshots plus the manifest.

    A NaN during integration or data reaching the periodic seam still writes a
    manifest (status ``aborted``) with whatever snapshots were produced.
    """
    cfg.validate()
    directory = directory or cfg.output_dir()
    os.makedirs(directory, exist_ok=True)
    manifest = RunManifest(cfg.to_dict(), directory)
    start = time.perf_counter()
    try:
        result = PIPELINES[cfg.id](cfg)
    except SeamError as exc:
        manifest.status, manifest.error = "aborted", str(exc)
        manifest.wall_clock = time.perf_counter() - start
        manifest.save()
        return manifest, None
    manifest.wall_clock = time.perf_counter() - start
    for i, (t, u) in enumerate(result.fields):
        name = f"snapshot_{i:05d}.ddl"
        path = os.path.join(directory, name)
        write_snapshot(path, u)
        manifest.snapshots.append({"file": name, "t": float(t), "sha256": _sha256(path)})
    manifest.verdicts = dict(result.verdicts)
    manifest.informational = dict(result.informational)
    manifest.results = _jsonable(result.results)
    manifest.results["series"] = [
        {"quantity_id": q, "region_id": reg, "t": list(map(float, ts)), "value": list(map(float, vs))}
        for (q, reg), (ts, vs) in result.series.items()]
    if result.error:
        manifest.status, manifest.error = "aborted", result.error
    manifest.save()
    return manifest, result


def report(manifest, out_dir=None):
    """Write ``series.csv``, ``verdicts.json`` and one gnuplot ``.dat`` per series.

    Returns the list of written paths.
    """
    if manifest.experiment in FIELD_EXPERIMENTS and not manifest.snapshots:
        raise ReportError(f"run {manifest.directory!r} has an empty snapshot index")
    manifest.verify()
    out_dir = out_dir or manifest.directory
    os.makedirs(out_dir, exist_ok=True)
    series = manifest.results.get("series", [])
    written = []
    csv_path = os.path.join(out_dir, "series.csv")
    with open(csv_path, "w") as fh:
        fh.write("t,quantity_id,region_id,value\n")
        for s in series:
            for t, v in zip(s["t"], s["value"]):
                fh.write(f"{t:.17g},{s['quantity_id']},{s['region_id']},{v:.17g}\n")
    written.append(csv_path)
    summary = {
        "experiment": manifest.experiment,
        "status": manifest.status,
        "passed": manifest.passed,
        "verdicts": manifest.verdicts,
        "informational": manifest.informational,
        "results": {k: v for k, v in manifest.results.items() if k != "series"},
    }
    verdict_path = os.path.join(out_dir, "verdicts.json")
    dump_json(summary, verdict_path)
    written.append(verdict_path)
    plot_dir = os.path.join(out_dir, "plots")
    os.makedirs(plot_dir, exist_ok=True)
    for s in series:
        safe = "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in f"{s['quantity_id']}__{s['region_id']}")
        path = os.path.join(plot_dir, safe + ".dat")
        with open(path, "w") as fh:
            fh.write(f"# {s['quantity_id']} on {s['region_id']}\n# t value\n")
            for t, v in zip(s["t"], s["value"]):
                fh.write(f"{t:.17g} {v:.17g}\n")
        written.append(path)
    return written
