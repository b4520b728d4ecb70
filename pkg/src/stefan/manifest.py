# **************************************************************************************

# @package        stefan
# @license        MIT License Copyright (c) 2025 Michael J. Roberts

# **************************************************************************************

import json
from datetime import datetime, timezone
from hashlib import sha256
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, Field as PydanticField, field_validator

# **************************************************************************************

# Written as <subcommand>.manifest.json beside the outputs:
MANIFEST_SUFFIX = ".manifest.json"

# **************************************************************************************


class SemanticVersion(BaseModel):
    version: Tuple[int, int, int] = (0, 0, 0)

    @field_validator("version", mode="before")
    @classmethod
    def parse_version(cls, value: Any) -> Tuple[int, int, int]:
        parts: List[int] = []

        # If the value is a list or tuple, convert it to a list of integers:
        if isinstance(value, (list, tuple)):
            parts = [int(item) for item in value]

        # If the value is a string, keep the leading digits of each dotted part, so
        # "2.1.0rc1" and "1.26.4+local" both parse:
        if isinstance(value, str):
            for part in value.split("+")[0].split("."):
                digits = ""

                for char in part:
                    if not char.isdigit():
                        break
                    digits += char

                if not digits:
                    break

                parts.append(int(digits))

        # Pad to three parts with zeros, then truncate to three parts:
        while len(parts) < 3:
            parts.append(0)

        return (parts[0], parts[1], parts[2])

    def __str__(self) -> str:
        return ".".join(str(part) for part in self.version)


# **************************************************************************************


def installed_version(distribution: str) -> SemanticVersion:
    """
    The installed version of a distribution, or 0.0.0 when it is not installed.
    """
    try:
        return SemanticVersion(version=version(distribution))
    except PackageNotFoundError:
        return SemanticVersion()


# **************************************************************************************


def config_hash(config: Dict[str, Any]) -> str:
    """
    The SHA-256 of the canonical JSON form of a configuration (sorted keys, no spaces).
    """
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return sha256(canonical.encode("utf-8")).hexdigest()


# **************************************************************************************


class RunManifest(BaseModel):
    """
    A self-describing record of one subcommand run: the full configuration with its
    defaults, its hash, the versions of the numerical stack, and the outputs written.
    """

    subcommand: str

    config_hash: str

    versions: Dict[str, str]

    started: datetime

    wall_time: float = PydanticField(..., ge=0.0)

    defaults: Dict[str, Any]

    outputs: List[str] = PydanticField(default_factory=list)

    passed: bool

    extra: Dict[str, Any] = PydanticField(default_factory=dict)


# **************************************************************************************


def build_manifest(
    subcommand: str,
    config: Dict[str, Any],
    started: datetime,
    wall_time: float,
    outputs: List[Union[str, Path]],
    passed: bool,
    extra: Optional[Dict[str, Any]] = None,
) -> RunManifest:
    return RunManifest(
        subcommand=subcommand,
        config_hash=config_hash(config),
        versions={
            name: str(installed_version(name))
            for name in ("stefan", "numpy", "scipy", "pydantic")
        },
        started=started.astimezone(timezone.utc),
        wall_time=wall_time,
        defaults=config,
        outputs=[str(p) for p in outputs],
        passed=passed,
        extra=extra or {},
    )


# **************************************************************************************


def write_manifest(directory: Union[str, Path], manifest: RunManifest) -> Path:
    """
    Write the manifest as <subcommand>.manifest.json inside directory.

    Returns:
        Path: The written file.
    """
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)

    path = root / f"{manifest.subcommand}{MANIFEST_SUFFIX}"

    path.write_text(manifest.model_dump_json(indent=2))

    return path


# **************************************************************************************


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


# **************************************************************************************
