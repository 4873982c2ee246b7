"""Run manifest: resolved configuration, output hashes, timings.

The manifest is written last, atomically; its presence certifies a
complete run.  Timings live only here so that all other outputs are
byte-reproducible.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field

TOOL_VERSION = "0.1.0"
MANIFEST_NAME = "manifest.json"


def file_sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    config_hash: str
    tool_version: str = TOOL_VERSION
    geometry: dict = field(default_factory=dict)
    weights: dict = field(default_factory=dict)
    normalization: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)   # [{"path":..., "sha256":...}]
    timings: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    cache_hit: bool = False

    def add_output(self, path: str):
        self.outputs.append({"path": os.path.basename(path),
                             "sha256": file_sha256(path)})

    def write(self, out_dir: str) -> str:
        path = os.path.join(out_dir, MANIFEST_NAME)
        tmp = path + ".tmp"
        with open(tmp, "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
        return path


def load_manifest(out_dir: str) -> dict:
    with open(os.path.join(out_dir, MANIFEST_NAME)) as fh:
        return json.load(fh)
