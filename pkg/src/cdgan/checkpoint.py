"""Checkpoint container: one .npz holding meta JSON plus named arrays.

Layout: a "__meta__" entry (UTF-8 JSON bytes: format version, architecture,
mode, step, sampler state) and entries "param/<net>/<name>" for every
parameter and buffer, "opt/<net>/<idx>/{step,exp_avg,exp_avg_sq}" for Adam
state. Float arrays are stored as little-endian 32-bit so writes and reads
round-trip bit-exactly.
"""

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .errors import DataError
from .networks import ArchConfig, ModelBundle, build_bundle

FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    meta: dict
    arrays: dict

    @property
    def step(self) -> int:
        return int(self.meta.get("step", 0))

    @property
    def arch(self) -> ArchConfig:
        return ArchConfig(**self.meta["arch"])

    @property
    def mode(self) -> str:
        return self.meta.get("mode", "symmetric")


def save_checkpoint(path, bundle: ModelBundle, step: int = 0, optimizers=None,
                    sampler_state=None, extra_meta=None):
    """Write the bundle (and optional trainer state) atomically to `path`."""
    path = Path(path)
    arrays = {}
    for net_name, net in bundle.nets().items():
        for pname, tensor in net.state_dict().items():
            arrays[f"param/{net_name}/{pname}"] = tensor.detach().cpu().numpy()
    if optimizers:
        for net_name, opt in optimizers.items():
            params = list(bundle.net(net_name).parameters())
            for i, p in enumerate(params):
                state = opt.state.get(p)
                if not state:
                    continue
                prefix = f"opt/{net_name}/{i}/"
                step_val = state["step"]
                step_val = float(step_val.item() if torch.is_tensor(step_val) else step_val)
                arrays[prefix + "step"] = np.asarray(step_val, dtype=np.float32)
                arrays[prefix + "exp_avg"] = state["exp_avg"].detach().cpu().numpy()
                arrays[prefix + "exp_avg_sq"] = state["exp_avg_sq"].detach().cpu().numpy()
    meta = {
        "format_version": FORMAT_VERSION,
        "arch": bundle.arch.to_dict(),
        "mode": bundle.mode,
        "step": int(step),
        "sampler": sampler_state,
    }
    if extra_meta:
        meta.update(extra_meta)
    arrays["__meta__"] = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)

    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".npz.tmp")
    os.close(fd)
    try:
        with open(tmp, "wb") as fh:
            np.savez(fh, **arrays)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)
    return path


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise DataError(f"checkpoint {path} does not exist")
    try:
        with np.load(path) as npz:
            arrays = {k: npz[k] for k in npz.files}
        meta = json.loads(bytes(arrays.pop("__meta__")).decode("utf-8"))
        if meta.get("format_version") != FORMAT_VERSION:
            raise DataError(
                f"unsupported checkpoint format {meta.get('format_version')!r}"
            )
    except DataError:
        raise
    except Exception as exc:
        raise DataError(f"corrupt checkpoint {path}: {exc}") from exc
    return Checkpoint(meta=meta, arrays=arrays)


def restore_bundle(ckpt: Checkpoint) -> ModelBundle:
    """Rebuild the networks and load every parameter and buffer."""
    bundle = build_bundle(ckpt.arch, seed=0, mode=ckpt.mode)
    for net_name, net in bundle.nets().items():
        prefix = f"param/{net_name}/"
        state = {}
        for key, arr in ckpt.arrays.items():
            if key.startswith(prefix):
                state[key[len(prefix):]] = torch.from_numpy(np.array(arr))
        if not state:
            raise DataError(f"checkpoint is missing parameters for {net_name}")
        net.load_state_dict(state, strict=True)
    return bundle.eval()


def restore_optimizer_state(ckpt: Checkpoint, bundle: ModelBundle, optimizers: dict):
    """Inject saved Adam moments into freshly constructed optimizers."""
    for net_name, opt in optimizers.items():
        params = list(bundle.net(net_name).parameters())
        for i, p in enumerate(params):
            prefix = f"opt/{net_name}/{i}/"
            if prefix + "exp_avg" not in ckpt.arrays:
                continue
            opt.state[p] = {
                "step": torch.tensor(float(ckpt.arrays[prefix + "step"])),
                "exp_avg": torch.from_numpy(np.array(ckpt.arrays[prefix + "exp_avg"])),
                "exp_avg_sq": torch.from_numpy(
                    np.array(ckpt.arrays[prefix + "exp_avg_sq"])
                ),
            }


def load_bundle(path) -> ModelBundle:
    """Convenience: read a checkpoint file and restore just the networks."""
    return restore_bundle(load_checkpoint(path))
