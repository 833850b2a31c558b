import dataclasses
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import whsplit
from whsplit import config
from whsplit.errors import ConfigurationError
from whsplit.io import read_json, write_json

MANIFEST_NAME = "manifest.json"


def _plain(value):
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    return value


@dataclass
class RunManifest:
    """Everything needed to replay a command"""

    subcommand: str
    params: dict
    seed: int | None
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    configuration: dict = field(default_factory=config.resolved)
    version: str = whsplit.__version__
    timestamp: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds")
    )

    def write(self, out_dir):
        path = Path(out_dir) / MANIFEST_NAME
        write_json(path, _plain(dataclasses.asdict(self)))
        return path

    @classmethod
    def read(cls, path):
        d = read_json(path)
        names = {f.name for f in dataclasses.fields(cls)}

        if missing := {"subcommand", "params", "seed"} - set(d):
            raise ConfigurationError(f"{path} lacks manifest fields {sorted(missing)}")

        return cls(**{k: v for k, v in d.items() if k in names})
