from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

from .errors import ContractError
from .nn import QENetwork, load_weights, save_weights

MODEL_FILES = {"intra": "intra.paqe", "inter": "inter.paqe", "unaware": "unaware.paqe"}


@dataclass
class ModelTriple:
    """Intra-trained, inter-trained and prediction-unaware networks.

    One triple serves all three colour planes and every QP.
    """

    intra: QENetwork
    inter: QENetwork
    unaware: QENetwork

    def __post_init__(self):
        for name, expected in (("intra", 3), ("inter", 3), ("unaware", 2)):
            got = getattr(self, name).in_channels
            if got != expected:
                raise ContractError(f"{name} model must take {expected} input channels, got {got}")

    def __iter__(self):
        return iter((self.intra, self.inter, self.unaware))

    def save(self, directory: str | os.PathLike) -> dict[str, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = {}
        for name, fname in MODEL_FILES.items():
            paths[name] = directory / fname
            save_weights(getattr(self, name), paths[name])
        return paths

    @classmethod
    def load(cls, directory: str | os.PathLike) -> "ModelTriple":
        directory = Path(directory)
        missing = [f for f in MODEL_FILES.values() if not (directory / f).is_file()]
        if missing:
            raise FileNotFoundError(f"missing model file(s) in {directory}: {', '.join(missing)}")
        return cls(**{name: load_weights(directory / f) for name, f in MODEL_FILES.items()})
