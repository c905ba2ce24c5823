"""
command_plan.py - what one CLI invocation read and wrote.

The run manifest is sorted-key JSON with content digests and no
timestamps, so identical invocations produce identical manifests.
"""
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List

from utils import file_digest, write_json

MANIFEST_NAME = "run_manifest.json"


def manifest_beside(out_path: str) -> str:
    return out_path + ".manifest.json"


def manifest_in(outdir: str) -> str:
    return os.path.join(outdir, MANIFEST_NAME)


def _plain(value: Any) -> Any:
    if isinstance(value, (tuple, list)):
        return [_plain(v) for v in value]
    return value


@dataclass
class CommandPlan:
    subcommand: str
    flags: Dict[str, Any]
    inputs: List[str] = field(default_factory=list)
    outputs: List[str] = field(default_factory=list)

    def add_input(self, path: str) -> str:
        if path not in self.inputs:
            self.inputs.append(path)
        return path

    def add_output(self, path: str) -> str:
        if path not in self.outputs:
            self.outputs.append(path)
        return path

    def manifest(self) -> Dict[str, Any]:
        return {
            "subcommand": self.subcommand,
            "flags": {k: _plain(v) for k, v in self.flags.items()},
            "inputs": {p: file_digest(p) for p in self.inputs},
            "outputs": {p: file_digest(p) for p in self.outputs},
        }

    def write_manifest(self, path: str) -> str:
        write_json(path, self.manifest())
        return path
