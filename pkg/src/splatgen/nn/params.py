"""Named parameter store, Adam, and the checkpoint container.

Checkpoint container layout (binary, little endian):

    magic b"NTC1"
    u32   manifest length in bytes
    manifest: UTF-8 JSON {"tensors": [{"name", "shape", "dtype", "offset",
              "nbytes"}, ...], "extra": {...}}
    payload: concatenated raw tensor bytes in manifest order
"""

from __future__ import annotations

import json
import struct

import numpy as np

from ..errors import CheckpointMismatch, MalformedHeader, MissingGradient
from .tensor import Tensor

_MAGIC = b"NTC1"


class ParamStore:
    """Flat name -> Tensor mapping with Adam state.

    Parameters are float32 by default (pass dtype for tests that want
    float64 accumulation).  adam_step applies bias-corrected Adam in place
    and clears gradients afterward.
    """

    def __init__(self, dtype=np.float32):
        self.dtype = dtype
        self._params: dict[str, Tensor] = {}
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self.step_count = 0
        self.adam_calls = 0  # total adam_step invocations, for audit

    def add(self, name: str, value) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        t = Tensor(np.asarray(value, dtype=self.dtype), requires_grad=True)
        self._params[name] = t
        self._m[name] = np.zeros_like(t.data)
        self._v[name] = np.zeros_like(t.data)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params.keys())

    def tensors(self) -> list[Tensor]:
        return list(self._params.values())

    def n_scalars(self) -> int:
        return sum(t.size for t in self._params.values())

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = None

    def freeze(self) -> None:
        for t in self._params.values():
            t.requires_grad = False

    def unfreeze(self) -> None:
        for t in self._params.values():
            t.requires_grad = True

    def ensure_grads(self) -> None:
        """Give zero gradients to parameters the last backward did not reach."""
        for t in self._params.values():
            if t.requires_grad and t.grad is None:
                t.grad = np.zeros_like(t.data)

    def adam_step(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                  eps: float = 1e-8) -> "ParamStore":
        """One bias-corrected Adam update over all parameters.

        Parameters without gradients are treated as zero-gradient; raises
        MissingGradient when no parameter has any gradient at all.
        """
        self.adam_calls += 1
        if all(t.grad is None for t in self._params.values()):
            raise MissingGradient("adam_step called but no parameter has a gradient")
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - beta1**t
        bc2 = 1.0 - beta2**t
        for name, p in self._params.items():
            g = p.grad
            if g is None:
                g = np.zeros_like(p.data)
            g = np.asarray(g, dtype=p.data.dtype)
            m = self._m[name]
            v = self._v[name]
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * g * g
            p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
            p.grad = None
        return self

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        mine = set(self._params)
        theirs = set(state)
        if mine != theirs:
            missing = sorted(mine - theirs)
            extra = sorted(theirs - mine)
            raise CheckpointMismatch(f"parameter names differ: missing={missing} extra={extra}")
        for name, arr in state.items():
            p = self._params[name]
            if tuple(arr.shape) != tuple(p.data.shape):
                raise CheckpointMismatch(
                    f"shape mismatch for {name}: checkpoint {arr.shape} vs model {p.data.shape}"
                )
            p.data = np.asarray(arr, dtype=p.data.dtype).copy()


def save_checkpoint(path, tensors: dict[str, np.ndarray], extra: dict | None = None) -> None:
    """Write a named-tensor container; see the module docstring for layout."""
    entries = []
    payloads = []
    offset = 0
    for name in tensors:
        arr = np.ascontiguousarray(tensors[name])
        raw = arr.astype(arr.dtype.newbyteorder("<")).tobytes()
        entries.append(
            {
                "name": name,
                "shape": list(arr.shape),
                "dtype": str(arr.dtype),
                "offset": offset,
                "nbytes": len(raw),
            }
        )
        payloads.append(raw)
        offset += len(raw)
    manifest = json.dumps({"tensors": entries, "extra": extra or {}}).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", len(manifest)))
        f.write(manifest)
        for raw in payloads:
            f.write(raw)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    """Read a named-tensor container -> (tensors, extra)."""
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != _MAGIC:
        raise MalformedHeader(f"bad container magic {raw[:4]!r}")
    (mlen,) = struct.unpack("<I", raw[4:8])
    manifest = json.loads(raw[8 : 8 + mlen].decode("utf-8"))
    base = 8 + mlen
    tensors = {}
    for ent in manifest["tensors"]:
        start = base + ent["offset"]
        stop = start + ent["nbytes"]
        if stop > len(raw):
            raise CheckpointMismatch(f"tensor {ent['name']} payload truncated")
        arr = np.frombuffer(raw[start:stop], dtype=np.dtype(ent["dtype"]))
        tensors[ent["name"]] = arr.reshape(ent["shape"]).copy()
    return tensors, manifest.get("extra", {})
