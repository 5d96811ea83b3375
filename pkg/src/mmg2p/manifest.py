"""Key-value manifest files tying data, checkpoints and flags together.

Example::

    # paths are relative to the manifest's directory
    alphabet = alphabet.tsv
    lexicon = lexicon.txt
    corpus = corpus.tsv
    exceptions = exceptions.tsv
    checkpoints = ckpt
    oov_log = oov_log.tsv
    seed = 0
    ezafe_model = I
    skip_list = on
    beam = 1
    oov.steps = 3000

Dotted keys (``module.field``) override that module's hyperparameters.  An
empty value (``oov_log =``) unsets the key.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

PATH_KEYS = ("alphabet", "lexicon", "corpus", "exceptions", "freq", "checkpoints", "oov_log")
FLAG_KEYS = ("seed", "ezafe_model", "skip_list", "beam", "normalization")
REQUIRED_INPUTS = ("alphabet", "lexicon", "corpus")


class ManifestError(ValueError):
    pass


def parse_kv(text: str) -> dict:
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ManifestError(f"line {n}: expected key = value")
        key, value = key.strip(), value.strip()
        if not key:
            raise ManifestError(f"line {n}: empty key")
        out[key] = value
    return out


def format_kv(values: dict) -> str:
    return "".join(f"{k} = {v}\n" for k, v in values.items())


@dataclass
class Manifest:
    base: Path
    values: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path, overrides=()) -> "Manifest":
        path = Path(path)
        if not path.exists():
            raise ManifestError(f"manifest {path} does not exist")
        values = parse_kv(path.read_text(encoding="utf-8"))
        for item in overrides:
            key, sep, value = item.partition("=")
            if not sep:
                raise ManifestError(f"override {item!r} is not key=value")
            values[key.strip()] = value.strip()
        values = {k: v for k, v in values.items() if v != ""}
        m = cls(path.parent, values)
        m.validate()
        return m

    def validate(self):
        for key in self.values:
            if "." not in key and key not in PATH_KEYS + FLAG_KEYS:
                raise ManifestError(f"unknown manifest key {key!r}")
        for key in REQUIRED_INPUTS:
            if key not in self.values:
                raise ManifestError(f"manifest lacks {key!r}")
        for key in ("alphabet", "lexicon", "corpus", "exceptions", "freq"):
            if key in self.values and not self.path(key).exists():
                raise ManifestError(f"{key} file {self.path(key)} does not exist")
        if self.ezafe_model not in ("I", "II"):
            raise ManifestError("ezafe_model must be I or II")
        if self.beam < 1:
            raise ManifestError("beam must be >= 1")

    def path(self, key: str) -> Path:
        p = Path(self.values[key])
        return p if p.is_absolute() else self.base / p

    def optional_path(self, key: str):
        return self.path(key) if key in self.values else None

    @property
    def seed(self) -> int:
        return int(self.values.get("seed", 0))

    @property
    def has_seed(self) -> bool:
        return "seed" in self.values

    @property
    def ezafe_model(self) -> str:
        return self.values.get("ezafe_model", "I").upper()

    @property
    def skip_list(self) -> bool:
        return self.values.get("skip_list", "on").lower() in ("on", "1", "true", "yes")

    @property
    def beam(self) -> int:
        return int(self.values.get("beam", 1))

    @property
    def checkpoint_dir(self) -> Path:
        return self.path("checkpoints") if "checkpoints" in self.values else self.base / "checkpoints"

    def checkpoint(self, module: str) -> Path:
        return self.checkpoint_dir / f"{module}.ckpt"

    def overrides(self, module: str) -> dict:
        prefix = module + "."
        return {k[len(prefix):]: v for k, v in self.values.items() if k.startswith(prefix)}

    def resolved(self) -> dict:
        return dict(sorted(self.values.items()))
