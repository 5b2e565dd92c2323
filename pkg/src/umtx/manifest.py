"""Append-only pipeline manifest with content digests.

Every stage leaves a record of its configuration hash, seed, input and
output digests, and metrics. Paths are stored relative to the workspace
root, values are written deterministically, and no volatile data (wall
time, hostnames) enters the file, so two seeded runs of the same pipeline
produce byte-identical manifests. Timings go to the log instead.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

MANIFEST_VERSION = "umtx-manifest-v1"


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def config_digest(items: dict[str, object]) -> str:
    canonical = "\n".join("%s=%r" % (k, items[k]) for k in sorted(items))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class StageRecord:
    name: str
    config_hash: str
    seed: int
    inputs: dict[str, str] = field(default_factory=dict)  # relpath -> digest
    outputs: dict[str, str] = field(default_factory=dict)
    metrics: dict[str, str] = field(default_factory=dict)

    def format(self) -> str:
        lines = ["[stage %s]" % self.name]
        lines.append("config = %s" % self.config_hash)
        lines.append("seed = %d" % self.seed)
        for path in sorted(self.inputs):
            lines.append("input %s = %s" % (path, self.inputs[path]))
        for path in sorted(self.outputs):
            lines.append("output %s = %s" % (path, self.outputs[path]))
        for key in sorted(self.metrics):
            lines.append("metric %s = %s" % (key, self.metrics[key]))
        lines.append("end")
        return "\n".join(lines) + "\n"


class PipelineManifest:
    """Ordered stage records persisted as versioned structured text."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.records: list[StageRecord] = []
        if self.path.exists():
            self._load()

    def _load(self) -> None:
        with open(self.path, encoding="utf-8") as fh:
            header = fh.readline().strip()
            if header != "# " + MANIFEST_VERSION:
                raise ValueError("unrecognized manifest header: %r" % header)
            record: StageRecord | None = None
            for lineno, line in enumerate(fh, 2):
                line = line.rstrip("\n")
                if not line:
                    continue
                if line.startswith("[stage ") and line.endswith("]"):
                    record = StageRecord(line[len("[stage ") : -1], "", 0)
                    continue
                if record is None:
                    raise ValueError("line %d: content outside a stage block" % lineno)
                if line == "end":
                    self.records.append(record)
                    record = None
                    continue
                key, _, value = line.partition(" = ")
                if key == "config":
                    record.config_hash = value
                elif key == "seed":
                    record.seed = int(value)
                elif key.startswith("input "):
                    record.inputs[key[len("input ") :]] = value
                elif key.startswith("output "):
                    record.outputs[key[len("output ") :]] = value
                elif key.startswith("metric "):
                    record.metrics[key[len("metric ") :]] = value
                else:
                    raise ValueError("line %d: unrecognized manifest line %r" % (lineno, line))
            if record is not None:
                raise ValueError("manifest ends inside stage %r" % record.name)

    def append(self, record: StageRecord) -> None:
        is_new = not self.path.exists()
        with open(self.path, "a", encoding="utf-8") as fh:
            if is_new:
                fh.write("# %s\n" % MANIFEST_VERSION)
            fh.write(record.format())
        self.records.append(record)

    def latest(self, name: str) -> StageRecord | None:
        for record in reversed(self.records):
            if record.name == name:
                return record
        return None

    def referenced_paths(self) -> set[str]:
        out: set[str] = set()
        for record in self.records:
            out.update(record.inputs)
            out.update(record.outputs)
        return out
