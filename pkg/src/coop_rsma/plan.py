"""Transmit plans and their JSON serialization."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FRAMEWORKS = ("idecrs", "decrs", "crs")

SPLIT_FIELDS = ("alpha_c", "alpha_p", "beta_c", "beta_p")


@dataclass
class BlockPlan:
    """Precoders (watts^0.5) and rate splits (bits/s/Hz) for one time block.

    Arrays are indexed by mUE over all ``K`` mUEs; rows of blocked mUEs stay
    zero.  Framework-specific meaning of the fields:

    * ``idecrs``: ``f_common`` is the shared common stream, ``f_private[k]``
      the k-th private stream.
    * ``decrs``: ``f_private[k]`` is the k-th layer-1 stream (mUE + dUE
      content), ``f_layer2[k]`` the k-th layer-2 stream (mUE content only);
      ``alpha_c``/``beta_c`` ride layer 1 and ``alpha_p`` rides layer 2.
    * ``crs``: like ``idecrs`` but ``beta_c`` is dUE content placed in the
      common codeword, which every relay retransmits.
    """

    f_common: np.ndarray
    f_private: np.ndarray
    f_relay: np.ndarray
    alpha_c: np.ndarray
    alpha_p: np.ndarray
    beta_c: np.ndarray
    beta_p: np.ndarray
    f_layer2: np.ndarray | None = None
    slacks: dict = field(default_factory=dict)

    @classmethod
    def zeros(cls, n_mues: int, n_antennas: int, framework: str = "idecrs") -> "BlockPlan":
        z = np.zeros(n_mues)
        return cls(
            f_common=np.zeros(n_antennas, dtype=complex),
            f_private=np.zeros((n_mues, n_antennas), dtype=complex),
            f_relay=np.zeros(n_mues, dtype=complex),
            alpha_c=z.copy(),
            alpha_p=z.copy(),
            beta_c=z.copy(),
            beta_p=z.copy(),
            f_layer2=np.zeros((n_mues, n_antennas), dtype=complex) if framework == "decrs" else None,
        )

    @property
    def n_mues(self) -> int:
        return self.f_private.shape[0]

    @property
    def n_antennas(self) -> int:
        return self.f_private.shape[1]

    @property
    def ap_power(self) -> float:
        p = np.sum(np.abs(self.f_common) ** 2) + np.sum(np.abs(self.f_private) ** 2)
        if self.f_layer2 is not None:
            p += np.sum(np.abs(self.f_layer2) ** 2)
        return float(p)

    @property
    def relay_power(self) -> float:
        return float(np.sum(np.abs(self.f_relay) ** 2))

    @property
    def power(self) -> float:
        return self.ap_power + self.relay_power

    def mue_rates(self) -> np.ndarray:
        return self.alpha_c + self.alpha_p

    def due_content(self) -> np.ndarray:
        return self.beta_c + self.beta_p

    def scaled(self, factor: float) -> "BlockPlan":
        """Copy with every precoder multiplied by ``factor`` (splits untouched)."""
        return BlockPlan(
            self.f_common * factor,
            self.f_private * factor,
            self.f_relay * factor,
            self.alpha_c.copy(),
            self.alpha_p.copy(),
            self.beta_c.copy(),
            self.beta_p.copy(),
            None if self.f_layer2 is None else self.f_layer2 * factor,
            dict(self.slacks),
        )


@dataclass
class TransmitPlan:
    framework: str
    blocks: list
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.framework not in FRAMEWORKS:
            raise ValueError(f"framework must be one of {FRAMEWORKS}")

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    def to_dict(self) -> dict:
        return {"framework": self.framework, "meta": _jsonable(self.meta), "blocks": [_block_to_dict(b) for b in self.blocks]}

    @classmethod
    def from_dict(cls, data: dict) -> "TransmitPlan":
        return cls(data["framework"], [_block_from_dict(b) for b in data["blocks"]], data.get("meta", {}))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "TransmitPlan":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _complex_pairs(a: np.ndarray) -> list:
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _from_pairs(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[..., 0] + 1j * x[..., 1]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _block_to_dict(b: BlockPlan) -> dict:
    out = {
        "f_common": _complex_pairs(b.f_common),
        "f_private": _complex_pairs(b.f_private),
        "f_relay": _complex_pairs(b.f_relay),
    }
    if b.f_layer2 is not None:
        out["f_layer2"] = _complex_pairs(b.f_layer2)
    for name in SPLIT_FIELDS:
        out[name] = np.asarray(getattr(b, name), dtype=float).tolist()
    out["slacks"] = {k: np.asarray(v, dtype=float).tolist() for k, v in b.slacks.items()}
    return out


def _block_from_dict(d: dict) -> BlockPlan:
    return BlockPlan(
        f_common=_from_pairs(d["f_common"]),
        f_private=_from_pairs(d["f_private"]),
        f_relay=_from_pairs(d["f_relay"]),
        alpha_c=np.asarray(d["alpha_c"], dtype=float),
        alpha_p=np.asarray(d["alpha_p"], dtype=float),
        beta_c=np.asarray(d["beta_c"], dtype=float),
        beta_p=np.asarray(d["beta_p"], dtype=float),
        f_layer2=_from_pairs(d["f_layer2"]) if "f_layer2" in d else None,
        slacks={k: np.asarray(v, dtype=float) for k, v in d.get("slacks", {}).items()},
    )
