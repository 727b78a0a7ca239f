"""Sparse dataset loading and the census grouping map.

The on-disk instance format is libsvm-style lines: "<label> <idx>:<val> ..."
with labels in {-1, +1, 0, 1} (0/1 are normalized to -1/+1) and strictly
increasing 1-based feature indices per line.

Grouping attributes of the one-hot census encoding are recovered from a
mapping file shipped with the package: one line per group,
"attribute group-id feature-index-list" with comma-separated indices.
Instances with no active feature in an attribute's index set fall into the
implicit "<attribute>-unknown" group.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Dict, FrozenSet, List, Mapping, Sequence

from .core import Bag, BagDataset, DataError, Instance


def load_sparse_dataset(path) -> List[Instance]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    instances: List[Instance] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            try:
                label = int(float(parts[0]))
            except ValueError:
                raise DataError(f"line {lineno}: bad label {parts[0]!r}")
            if label == 0:
                label = -1
            if label not in (-1, 1):
                raise DataError(f"line {lineno}: label must be one of -1, +1, 0, 1")
            features = {}
            prev = 0
            for col, tok in enumerate(parts[1:], start=2):
                if ":" not in tok:
                    raise DataError(f"line {lineno}, field {col}: expected idx:val, got {tok!r}")
                idx_s, val_s = tok.split(":", 1)
                try:
                    idx, val = int(idx_s), float(val_s)
                except ValueError:
                    raise DataError(f"line {lineno}, field {col}: bad idx:val {tok!r}")
                if idx in features:
                    raise DataError(f"line {lineno}, field {col}: duplicate feature index {idx}")
                if idx <= prev:
                    raise DataError(f"line {lineno}, field {col}: indices must be strictly increasing")
                prev = idx
                features[idx] = val
            instances.append(Instance(features=features, true_label=label))
    if not instances:
        raise DataError("no instances")
    return instances


GroupMap = Dict[str, Dict[str, FrozenSet[int]]]


def parse_group_map(text: str) -> GroupMap:
    mapping: GroupMap = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise DataError(f"group map line {lineno}: expected 'attribute group-id indices'")
        attr, gid, idx_list = parts
        try:
            indices = frozenset(int(tok) for tok in idx_list.split(","))
        except ValueError:
            raise DataError(f"group map line {lineno}: bad index list {idx_list!r}")
        mapping.setdefault(attr, {})[gid] = indices
    if not mapping:
        raise DataError("empty group map")
    return mapping


def load_group_map(path) -> GroupMap:
    return parse_group_map(Path(path).read_text())


def default_group_map() -> GroupMap:
    """The census one-hot grouping map shipped with the package."""
    text = resources.files("llptk").joinpath("data/census_groups.txt").read_text()
    return parse_group_map(text)


def assign_groups(instances: Sequence[Instance], attribute: str,
                  group_map: GroupMap) -> Dict[int, str]:
    """Instance index -> group id under the given grouping attribute."""
    if attribute not in group_map:
        raise DataError(f"unknown attribute {attribute!r}; available: "
                        + ", ".join(sorted(group_map)))
    groups = group_map[attribute]
    index_to_gid = {}
    for gid, indices in groups.items():
        for idx in indices:
            index_to_gid[idx] = gid
    unknown = f"{attribute}-unknown"
    assignment = {}
    for i, inst in enumerate(instances):
        gid = unknown
        for idx in inst.features:
            if idx in index_to_gid:
                gid = index_to_gid[idx]
                break
        assignment[i] = gid
    return assignment


# ---------------------------------------------------------------------------
# dataset (de)serialization

def save_dataset(data: BagDataset, path) -> None:
    payload = {
        "instances": [{"f": {str(k): v for k, v in inst.features.items()},
                       "y": inst.true_label} for inst in data.instances],
        "bags": [{"members": list(b.members), "p": b.observed_proportion}
                 for b in data.bags],
        "metadata": _jsonable(data.metadata),
    }
    Path(path).write_text(json.dumps(payload))


def load_dataset(path) -> BagDataset:
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read dataset {path}: {exc}")
    instances = [Instance(features={int(k): v for k, v in rec["f"].items()},
                          true_label=rec["y"]) for rec in payload["instances"]]
    bags = [Bag(members=tuple(rec["members"]), observed_proportion=rec["p"])
            for rec in payload["bags"]]
    return BagDataset(instances=instances, bags=bags,
                      metadata=payload.get("metadata", {}))


def _jsonable(obj):
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalar
        return obj.item()
    return obj
