"""Line-delimited JSON sample logs for the two sensing streams.

One chronologically merged file holds both record types:

    {"type": "sc",  "site_id": i, "t": s, "counts": n}
    {"type": "tof", "sensor_id": i, "t": s, "d": [64 floats or null], "valid": [64 bools]}

ToF zone order is row-major (index = i * ny + j); NO_TARGET encodes as
null. Ties in the merge order resolve sc-before-tof, then by id.
"""

import json
import math

import numpy as np

from .sc import ScSample
from .tof import ToFFrame


def sc_record(sample: ScSample) -> dict:
    return {"type": "sc", "site_id": int(sample.site_id),
            "t": float(sample.timestamp), "counts": int(sample.counts)}


def tof_record(frame: ToFFrame) -> dict:
    flat_d = frame.distances.reshape(-1)
    flat_v = frame.valid.reshape(-1)
    return {
        "type": "tof",
        "sensor_id": int(frame.sensor_id),
        "t": float(frame.timestamp),
        "d": [float(d) if v else None for d, v in zip(flat_d, flat_v)],
        "valid": [bool(v) for v in flat_v],
    }


def _merge_key(record):
    stream = 0 if record["type"] == "sc" else 1
    rid = record.get("site_id", record.get("sensor_id", 0))
    return (record["t"], stream, rid)


def merge_records(records) -> list:
    """Chronological order with the stable sc-before-tof tie break."""
    return sorted(records, key=_merge_key)


def encode_record(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"),
                      allow_nan=False)


def write_log(path, records):
    with open(path, "w") as f:
        for r in records:
            f.write(encode_record(r) + "\n")


def read_log(path) -> list:
    records = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def sc_samples_from_records(records) -> list:
    return [ScSample(site_id=r["site_id"], timestamp=r["t"], counts=r["counts"])
            for r in records if r.get("type") == "sc"]


def tof_frames_from_records(records, nx=8, ny=8) -> list:
    frames = []
    for r in records:
        if r.get("type") != "tof":
            continue
        d = np.array([math.nan if x is None else float(x) for x in r["d"]])
        v = np.array([bool(x) for x in r["valid"]])
        if d.size != nx * ny:
            raise ValueError(f"tof record has {d.size} zones, expected {nx * ny}")
        frames.append(ToFFrame(sensor_id=r["sensor_id"], timestamp=r["t"],
                               distances=d.reshape(nx, ny),
                               valid=v.reshape(nx, ny)))
    return frames
