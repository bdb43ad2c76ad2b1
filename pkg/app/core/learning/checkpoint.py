"""Versioned policy checkpoints (.npz with a JSON metadata entry)."""

import json
import logging
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from app.core.exceptions import CheckpointMismatchError
from app.core.learning.policy import FeatureNormalizer, PolicyParams

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
_META_KEY = "__meta__"
# fixed member timestamps keep identical checkpoints byte-identical
_ZIP_DATE = (1980, 1, 1, 0, 0, 0)


@dataclass
class Checkpoint:
    params: PolicyParams
    normalizer: FeatureNormalizer
    lineage: dict[str, Any] = field(default_factory=dict)


def save_checkpoint(path: Path, checkpoint: Checkpoint) -> Path:
    """Write params, normalization record and seed lineage to `path`."""
    params = checkpoint.params
    meta = {
        "format_version": FORMAT_VERSION,
        "hidden_size": params.hidden_size,
        "num_aps": params.num_aps,
        "fc_hidden": list(params.fc_hidden),
        "tensor_names": list(params.tensors),
        "normalizer": checkpoint.normalizer.to_record(),
        "lineage": checkpoint.lineage,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = {name: tensor for name, tensor in params.tensors.items()}
    arrays[_META_KEY] = np.array(json.dumps(meta, sort_keys=True))
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as archive:
        for name, array in arrays.items():
            info = zipfile.ZipInfo(f"{name}.npy", date_time=_ZIP_DATE)
            with archive.open(info, "w", force_zip64=True) as member:
                np.lib.format.write_array(member, np.asanyarray(array), allow_pickle=False)
    logger.info(f"Saved checkpoint to {path} ({params.size} parameters)")
    return path


def load_checkpoint(path: Path, expected_aps: int | None = None) -> Checkpoint:
    """Read a checkpoint, refusing one built for a different number of APs."""
    path = Path(path)
    if not path.exists():
        raise CheckpointMismatchError(f"checkpoint not found: {path}")
    with np.load(path, allow_pickle=False) as data:
        if _META_KEY not in data.files:
            raise CheckpointMismatchError(f"{path} is not a policy checkpoint")
        meta = json.loads(str(data[_META_KEY]))
        if meta.get("format_version") != FORMAT_VERSION:
            raise CheckpointMismatchError(
                f"unsupported checkpoint format {meta.get('format_version')}"
            )
        if expected_aps is not None and meta["num_aps"] != expected_aps:
            raise CheckpointMismatchError(
                f"checkpoint was trained for L={meta['num_aps']} APs, "
                f"scenario has L={expected_aps}"
            )
        tensors = {name: np.array(data[name]) for name in meta["tensor_names"]}

    params = PolicyParams(
        hidden_size=meta["hidden_size"],
        num_aps=meta["num_aps"],
        fc_hidden=tuple(meta["fc_hidden"]),
        tensors=tensors,
    )
    return Checkpoint(
        params=params,
        normalizer=FeatureNormalizer.from_record(meta["normalizer"]),
        lineage=meta.get("lineage", {}),
    )
