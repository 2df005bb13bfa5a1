"""Run manifests and digest-keyed output directories."""

import hashlib
import json
import os
import time
from dataclasses import asdict, dataclass, field

from .. import __version__


def canonical_json(doc):
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), default=str)


def digest_of(doc):
    return hashlib.sha256(canonical_json(doc).encode()).hexdigest()


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    """Inputs and outputs of one CLI run. ``inputDigest`` keys the run directory."""

    command: str
    config: dict
    seed: int = 0
    threads: int = 1
    params: dict = None
    schedule: dict = None
    outputs: dict = field(default_factory=dict)
    wallClock: float = 0.0
    toolVersion: str = __version__

    @property
    def configDigest(self):
        return digest_of(self.config)

    @property
    def inputDigest(self):
        return digest_of({"command": self.command, "config": self.config, "seed": self.seed,
                          "threads": self.threads, "toolVersion": self.toolVersion})

    def record(self, path, root):
        self.outputs[os.path.relpath(path, root)] = file_digest(path)

    def to_dict(self):
        d = asdict(self)
        d["configDigest"] = self.configDigest
        d["inputDigest"] = self.inputDigest
        return d

    def output_digest(self):
        """Digest over output contents only (stable across reruns with identical inputs)."""
        return digest_of(self.outputs)

    def write(self, directory):
        path = os.path.join(directory, "manifest.json")
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True, default=str)
        return path


def run_directory(out_root, manifest):
    """Directory for this run: <out>/<command>-<first 16 hex of the input digest>.

    Returns (path, existed). An existing directory holding a manifest is never
    written into again.
    """
    path = os.path.join(out_root, f"{manifest.command}-{manifest.inputDigest[:16]}")
    existed = os.path.exists(os.path.join(path, "manifest.json"))
    os.makedirs(path, exist_ok=True)
    return path, existed


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0
        return False
