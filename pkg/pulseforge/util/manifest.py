"""Run manifests: what a command was asked to do and what it produced"""

from dataclasses import dataclass, field, fields, is_dataclass
import enum
import hashlib
import json
from pathlib import Path
import time
from typing import Any, Dict, Optional, Union

import numpy as np

MANIFEST_SUFFIX = ".manifest.json"


def sha256_digest(path: Union[str, Path], chunk_size: int = 1 << 16) -> str:
    """Hex sha256 of a file's bytes."""
    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for chunk in iter(lambda: handle.read(chunk_size), b""):
            digest.update(chunk)
    return digest.hexdigest()


def manifest_path(out: Union[str, Path]) -> Path:
    """`<out>.manifest.json` next to the primary output."""
    return Path(str(out) + MANIFEST_SUFFIX)


def to_jsonable(value: Any) -> Any:
    """Converts config values (dataclasses, enums, numpy scalars, paths) to
    plain JSON types."""
    if is_dataclass(value) and not isinstance(value, type):
        return {f.name: to_jsonable(getattr(value, f.name))
                for f in fields(value)}
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    return value


def _package_version() -> str:
    from pulseforge import __version__
    return __version__


@dataclass
class RunManifest:
    """Record of one artifact-producing command.

    Attributes:
        command: Subcommand name.
        config: Every setting the command ran with, JSON-ready.
        seeds: Named seeds; None where a stage is deterministic.
        version: Package version that produced the outputs.
        inputs, outputs: sha256 digest per file path.
        wall_clock: Seconds between `start` and `finish`.
    """
    command: str
    config: Dict[str, Any] = field(default_factory=dict)
    seeds: Dict[str, Optional[int]] = field(default_factory=dict)
    version: str = ""
    inputs: Dict[str, str] = field(default_factory=dict)
    outputs: Dict[str, str] = field(default_factory=dict)
    wall_clock: float = 0.0
    _started: float = field(default=0.0, repr=False, compare=False)

    @classmethod
    def start(cls,
              command: str,
              config: Optional[Dict[str, Any]] = None,
              seeds: Optional[Dict[str, Optional[int]]] = None
              ) -> "RunManifest":
        manifest = cls(command, to_jsonable(config or {}), dict(seeds or {}),
                       _package_version())
        manifest._started = time.perf_counter()
        return manifest

    def record_input(self, path: Union[str, Path]):
        self.inputs[str(path)] = sha256_digest(path)

    def record_output(self, path: Union[str, Path]):
        self.outputs[str(path)] = sha256_digest(path)

    def finish(self) -> "RunManifest":
        if self._started:
            self.wall_clock = time.perf_counter() - self._started
        return self

    def as_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "config": self.config,
            "seeds": self.seeds,
            "version": self.version,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "wall_clock": self.wall_clock,
        }

    def write(self, out: Union[str, Path]) -> Path:
        """Writes the manifest belonging to primary output `out`."""
        path = manifest_path(out)
        path.write_text(
            json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n")
        return path


def read_manifest(path: Union[str, Path]) -> RunManifest:
    document = json.loads(Path(path).read_text())
    return RunManifest(document["command"], document["config"],
                       document["seeds"], document["version"],
                       document["inputs"], document["outputs"],
                       float(document["wall_clock"]))


def verify_outputs(manifest: RunManifest) -> Dict[str, bool]:
    """Whether each recorded output still has its recorded digest."""
    return {
        path: Path(path).exists() and sha256_digest(path) == digest
        for path, digest in manifest.outputs.items()
    }
