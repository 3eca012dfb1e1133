"""Line-delimited JSON interchange for datasets and road networks.

One trajectory per line with fields `id`, `points` (flat x,y array) and
optional `road`, `region`, `topology` arrays. The network file carries a
meta line (grid spec) followed by node and segment records with dense ids.
Serialization is canonical (sorted keys, repr floats) so identical inputs
produce byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import DataError
from .extract import extract_regions, extract_topology
from .types import GridSpec, RegionSeq, RoadNetwork, RoadSeq, TopologySeq, Trajectory


@dataclass(frozen=True)
class DatasetRecord:
    trajectory: Trajectory
    road: RoadSeq | None = None
    region: RegionSeq | None = None
    topology: TopologySeq | None = None

    @property
    def id(self) -> int:
        return self.trajectory.id


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _flat(points: np.ndarray) -> list[float]:
    return [float(v) for v in np.asarray(points).reshape(-1)]


def _unflat(values, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size % 2 != 0:
        raise DataError(f"{what} array must hold x,y pairs")
    return arr.reshape(-1, 2)


def record_to_json(rec: DatasetRecord) -> str:
    obj: dict = {"id": rec.id, "points": _flat(rec.trajectory.points)}
    if rec.road is not None:
        obj["road"] = list(rec.road.segment_ids)
    if rec.region is not None:
        obj["region"] = list(rec.region.region_ids)
    if rec.topology is not None:
        obj["topology"] = _flat(rec.topology.points)
    return _dumps(obj)


def record_from_json(line: str) -> DatasetRecord:
    obj = json.loads(line)
    try:
        tid = int(obj["id"])
        traj = Trajectory(tid, _unflat(obj["points"], "points"))
    except KeyError as e:
        raise DataError(f"dataset record missing field {e}") from e
    road = RoadSeq(tid, tuple(obj["road"])) if "road" in obj else None
    region = RegionSeq(tid, tuple(obj["region"])) if "region" in obj else None
    topology = (
        TopologySeq(tid, _unflat(obj["topology"], "topology")) if "topology" in obj else None
    )
    return DatasetRecord(traj, road=road, region=region, topology=topology)


def write_dataset(records: list[DatasetRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(record_to_json(rec) + "\n")


def read_dataset(path: str | Path) -> list[DatasetRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                records.append(record_from_json(line))
    ids = [r.id for r in records]
    if len(set(ids)) != len(ids):
        raise DataError("duplicate trajectory ids in dataset")
    return records


def ensure_views(
    rec: DatasetRecord,
    grid: GridSpec,
    epsilon: float | None = None,
    angle_min: float | None = None,
) -> DatasetRecord:
    """Fill missing topology/region views; the road view cannot be derived."""
    kwargs = {}
    if epsilon is not None:
        kwargs["epsilon"] = epsilon
    if angle_min is not None:
        kwargs["angle_min"] = angle_min
    out = rec
    if out.topology is None:
        out = replace(out, topology=extract_topology(out.trajectory, **kwargs))
    if out.region is None:
        out = replace(out, region=extract_regions(out.trajectory, grid))
    return out


def write_network(net: RoadNetwork, grid: GridSpec, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        meta = {
            "type": "meta",
            "grid": {
                "min_x": grid.min_x,
                "min_y": grid.min_y,
                "max_x": grid.max_x,
                "max_y": grid.max_y,
                "rows": grid.rows,
                "cols": grid.cols,
            },
        }
        f.write(_dumps(meta) + "\n")
        for i, (x, y) in enumerate(net.nodes):
            f.write(_dumps({"type": "node", "id": i, "x": float(x), "y": float(y)}) + "\n")
        for i, (a, b) in enumerate(net.segments):
            f.write(_dumps({"type": "segment", "id": i, "a": int(a), "b": int(b)}) + "\n")


def read_network(path: str | Path) -> tuple[RoadNetwork, GridSpec]:
    nodes: list[tuple[int, float, float]] = []
    segments: list[tuple[int, int, int]] = []
    grid_obj = None
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            kind = obj.get("type")
            if kind == "meta":
                grid_obj = obj["grid"]
            elif kind == "node":
                nodes.append((int(obj["id"]), float(obj["x"]), float(obj["y"])))
            elif kind == "segment":
                segments.append((int(obj["id"]), int(obj["a"]), int(obj["b"])))
            else:
                raise DataError(f"unknown network record type {kind!r}")
    if grid_obj is None:
        raise DataError("network file has no meta record")
    nodes.sort()
    segments.sort()
    if [i for i, _, _ in nodes] != list(range(len(nodes))):
        raise DataError("node ids are not dense")
    if [i for i, _, _ in segments] != list(range(len(segments))):
        raise DataError("segment ids are not dense")
    net = RoadNetwork(
        np.asarray([(x, y) for _, x, y in nodes], dtype=np.float64),
        np.asarray([(a, b) for _, a, b in segments], dtype=np.int64),
    )
    grid = GridSpec(
        grid_obj["min_x"],
        grid_obj["min_y"],
        grid_obj["max_x"],
        grid_obj["max_y"],
        int(grid_obj["rows"]),
        int(grid_obj["cols"]),
    )
    return net, grid
