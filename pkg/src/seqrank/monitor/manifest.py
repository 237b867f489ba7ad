"""Run manifests: which checkpoints and layers to scan, and how to sample.

A manifest is a JSON document (schema in docs/FORMAT.md). ``root`` and any
relative paths inside it resolve against the manifest file's directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..errors import ManifestError

SCHEMA = "seqrank.manifest/1"
U64_MAX = (1 << 64) - 1


def default_container_path(step: int, layer: int) -> str:
    return f"step-{step}/layer-{layer}.rkmt"


def _strictly_increasing(values, name: str) -> list[int]:
    if not isinstance(values, (list, tuple)) or not values:
        raise ManifestError(f"{name} must be a nonempty list")
    out = []
    for v in values:
        if isinstance(v, bool) or not isinstance(v, int) or v < 0:
            raise ManifestError(f"{name} entries must be nonnegative integers, got {v!r}")
        out.append(v)
    if any(b <= a for a, b in zip(out, out[1:])):
        raise ManifestError(f"{name} must be strictly increasing, got {out}")
    return out


@dataclass
class RunManifest:
    run_id: str
    root: Path
    layers: list[int]
    steps: list[int]
    sample_k: int
    sample_seed: int
    hyper_params: dict[str, str] = field(default_factory=dict)
    # (step, layer) -> container path relative to root, overriding the default layout
    paths: dict[tuple[int, int], str] = field(default_factory=dict)
    history: Optional[Path] = None

    def __post_init__(self):
        if not isinstance(self.run_id, str) or not self.run_id:
            raise ManifestError("run_id must be a nonempty string")
        self.root = Path(self.root)
        self.layers = _strictly_increasing(self.layers, "layers")
        self.steps = _strictly_increasing(self.steps, "steps")
        if isinstance(self.sample_k, bool) or not isinstance(self.sample_k, int) or self.sample_k < 1:
            raise ManifestError(f"sample_k must be an integer >= 1, got {self.sample_k!r}")
        if (
            isinstance(self.sample_seed, bool)
            or not isinstance(self.sample_seed, int)
            or not 0 <= self.sample_seed <= U64_MAX
        ):
            raise ManifestError(f"sample_seed must be an unsigned 64-bit integer, got {self.sample_seed!r}")
        self.hyper_params = {str(k): str(v) for k, v in self.hyper_params.items()}
        if self.history is not None:
            self.history = Path(self.history)

    def container_path(self, step: int, layer: int) -> Path:
        rel = self.paths.get((step, layer), default_container_path(step, layer))
        return self.root / rel

    def cells(self) -> list[tuple[int, int]]:
        return [(s, l) for s in self.steps for l in self.layers]

    def history_path(self) -> Path:
        if self.history is not None:
            return self.history
        return self.root / f"{self.run_id}.history.jsonl"

    def to_dict(self, relative_to: Optional[Path] = None) -> dict:
        def rel(p: Path) -> str:
            if relative_to is not None:
                try:
                    return str(p.resolve().relative_to(Path(relative_to).resolve()))
                except ValueError:
                    pass
            return str(p)

        doc = {
            "schema": SCHEMA,
            "run_id": self.run_id,
            "root": rel(self.root),
            "layers": list(self.layers),
            "steps": list(self.steps),
            "sample_k": self.sample_k,
            "sample_seed": self.sample_seed,
            "hyper_params": dict(sorted(self.hyper_params.items())),
        }
        if self.paths:
            doc["paths"] = {f"{s}/{l}": p for (s, l), p in sorted(self.paths.items())}
        if self.history is not None:
            doc["history"] = rel(self.history)
        return doc

    @classmethod
    def from_dict(cls, doc: dict, base: Optional[Path] = None) -> "RunManifest":
        if not isinstance(doc, dict):
            raise ManifestError("manifest must be a JSON object")
        schema = doc.get("schema", SCHEMA)
        if schema != SCHEMA:
            raise ManifestError(f"unsupported manifest schema {schema!r}")
        known = {"schema", "run_id", "root", "layers", "steps", "sample_k",
                 "sample_seed", "hyper_params", "paths", "history"}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ManifestError(f"unknown manifest fields: {', '.join(unknown)}")
        missing = [k for k in ("run_id", "root", "layers", "steps", "sample_k", "sample_seed") if k not in doc]
        if missing:
            raise ManifestError(f"manifest is missing fields: {', '.join(missing)}")
        base = Path(base) if base is not None else Path(".")
        paths = {}
        for key, rel in (doc.get("paths") or {}).items():
            try:
                step, layer = (int(part) for part in key.split("/"))
            except ValueError:
                raise ManifestError(f"path override key {key!r} must look like '<step>/<layer>'") from None
            paths[(step, layer)] = rel
        history = doc.get("history")
        return cls(
            run_id=doc["run_id"],
            root=base / doc["root"],
            layers=doc["layers"],
            steps=doc["steps"],
            sample_k=doc["sample_k"],
            sample_seed=doc["sample_seed"],
            hyper_params=doc.get("hyper_params") or {},
            paths=paths,
            history=None if history is None else base / history,
        )

    @classmethod
    def load(cls, path) -> "RunManifest":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}: invalid JSON: {exc}") from None
        return cls.from_dict(doc, base=path.parent)

    def save(self, path) -> None:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(relative_to=path.parent), indent=2) + "\n")
