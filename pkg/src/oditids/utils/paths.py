from __future__ import annotations
from pathlib import Path


def ensure_parent_directory(path: str | Path) -> Path:
    path = Path(path)

    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def find_path_collisions(inputs: list[Path], outputs: list[Path]) -> list[str]:
    resolved_outputs = {p.resolve(): p for p in outputs}
    errors: list[str] = []
    for path in inputs:
        if path.resolve() in resolved_outputs:
            errors.append(f"Input path is also an output path: {path}")

    return errors
