"""Trial files, sidecars and cohort manifests on disk.

A trial is a CSV with header ``t,placement,ax,ay,az,gx,gy,gz,mx,my,mz`` plus a
JSON sidecar carrying subject metadata, sample rate and the standing-phase
calibration window. Floats are written with ``repr`` so a save/load cycle is
lossless.
"""
from __future__ import annotations

import csv
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ParseError, SchemaError, ValidationError
from .model import (
    PLACEMENTS,
    Gender,
    Group,
    Placement,
    SensorStream,
    SubjectMeta,
    TrialRecording,
    synchronize,
)

CSV_HEADER = ["t", "placement", "ax", "ay", "az", "gx", "gy", "gz", "mx", "my", "mz"]
SPLITS = ("train", "test")


def write_text_atomic(path, text: str) -> None:
    """Write-then-rename so readers never observe a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json_atomic(path, obj) -> None:
    write_text_atomic(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def sidecar_path_for(trial_path) -> Path:
    return Path(trial_path).with_suffix(".json")


# --- sidecar ------------------------------------------------------------------

def meta_to_sidecar(meta: SubjectMeta, sample_rate: float, window_s) -> dict:
    return {
        "subject_id": meta.id,
        "group": meta.group.value.lower(),
        "age": meta.age,
        "weight_kg": meta.weight,
        "gender": meta.gender.value,
        "days_post_op": meta.days_post_op,
        "sample_rate_hz": sample_rate,
        "calibration_window": [float(window_s[0]), float(window_s[1])],
    }


def read_sidecar(path) -> tuple[SubjectMeta, float, tuple[float, float]]:
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from None
    required = ("subject_id", "group", "age", "weight_kg", "sample_rate_hz", "calibration_window")
    missing = [k for k in required if k not in d]
    if missing:
        raise SchemaError(f"{path}: sidecar missing {', '.join(missing)}")
    try:
        group = Group(str(d["group"]).capitalize())
        meta = SubjectMeta(
            id=str(d["subject_id"]),
            group=group,
            age=d["age"],
            weight=d["weight_kg"],
            gender=Gender(d.get("gender", "unknown")),
            days_post_op=None if d.get("days_post_op") is None else int(d["days_post_op"]),
        )
        window = d["calibration_window"]
        if len(window) != 2:
            raise ValueError("calibration_window must be [start_s, end_s]")
        return meta, float(d["sample_rate_hz"]), (float(window[0]), float(window[1]))
    except (ValueError, TypeError, ValidationError) as exc:
        raise SchemaError(f"{path}: {exc}") from None


# --- trial CSV ------------------------------------------------------------------

def trial_to_csv(trial: TrialRecording) -> str:
    """Rows interleave placements sample by sample; floats use repr so parsing is exact."""
    n, k = len(trial), len(PLACEMENTS)
    block = np.empty((n, k, 10))
    for j, p in enumerate(PLACEMENTS):
        s = trial.streams[p]
        block[:, j, 0] = s.t
        block[:, j, 1:4] = s.accel
        block[:, j, 4:7] = s.gyro
        block[:, j, 7:10] = s.mag
    names = [p.value for p in PLACEMENTS]
    lines = [",".join(CSV_HEADER)]
    for i, row in enumerate(block.reshape(n * k, 10).tolist()):
        lines.append(f"{row[0]!r},{names[i % k]}," + ",".join(map(repr, row[1:])))
    return "\n".join(lines) + "\n"


def save_trial(trial: TrialRecording, path) -> Path:
    """Write the trial CSV and its sidecar; returns the sidecar path."""
    path = Path(path)
    write_text_atomic(path, trial_to_csv(trial))
    side = sidecar_path_for(path)
    write_json_atomic(side, meta_to_sidecar(trial.subject, trial.sample_rate, trial.calibration_window_s))
    return side


def _fast_parse(path) -> Optional[dict[Placement, SensorStream]]:
    """C-level parse of a well-formed file; None sends the caller to the diagnosing parser."""
    try:
        with open(path, encoding="utf-8") as fh:
            if [h.strip() for h in fh.readline().rstrip("\r\n").split(",")] != CSV_HEADER:
                return None
            body = fh.read()
        lines = body.splitlines()
        if not lines or any(ln.count(",") != len(CSV_HEADER) - 1 for ln in lines):
            return None
        num = np.loadtxt(lines, delimiter=",", usecols=(0,) + tuple(range(2, 11)), ndmin=2)
        names = np.array([ln.split(",", 2)[1].strip() for ln in lines])
    except (ValueError, IndexError):
        return None
    if len(num) != len(names) or not len(num):
        return None
    streams = {}
    for p in PLACEMENTS:
        a = num[names == p.value]
        if not len(a):
            return None
        streams[p] = SensorStream(a[:, 0], a[:, 1:4], a[:, 4:7], a[:, 7:10])
    if sum(len(s) for s in streams.values()) != len(num):
        return None  # unknown placement names
    return streams


def _parse_rows(path) -> dict[Placement, SensorStream]:
    fast = _fast_parse(path)
    if fast is not None:
        return fast
    rows: dict[Placement, list[list[float]]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if [h.strip() for h in header] != CSV_HEADER:
            raise SchemaError(f"{path}: header must be {','.join(CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise ParseError(f"{path}:{lineno}: expected {len(CSV_HEADER)} fields, got {len(row)}")
            try:
                placement = Placement(row[1].strip())
            except ValueError:
                raise SchemaError(f"{path}:{lineno}: unknown placement {row[1]!r}") from None
            try:
                vals = [float(row[0])] + [float(v) for v in row[2:]]
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-numeric field") from None
            rows.setdefault(placement, []).append(vals)
    missing = [p.value for p in PLACEMENTS if p not in rows]
    if missing:
        raise SchemaError(f"{path}: missing placement(s): {', '.join(missing)}")
    streams = {}
    for p in PLACEMENTS:
        a = np.asarray(rows[p], dtype=float)
        streams[p] = SensorStream(a[:, 0], a[:, 1:4], a[:, 4:7], a[:, 7:10])
    return streams


def load_trial(path, sidecar=None, trial_id: Optional[str] = None) -> TrialRecording:
    """Parse, synchronize and validate one trial."""
    path = Path(path)
    sidecar = Path(sidecar) if sidecar is not None else sidecar_path_for(path)
    meta, fs, window = read_sidecar(sidecar)
    streams = synchronize(_parse_rows(path), fs)
    return TrialRecording(
        subject=meta,
        streams=streams,
        sample_rate=fs,
        calibration_window_s=window,
        trial_id=trial_id if trial_id is not None else path.stem,
    )


# --- manifest ------------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    trial: Path
    sidecar: Path
    split: str

    @property
    def trial_id(self) -> str:
        return self.trial.stem


@dataclass(frozen=True)
class CohortManifest:
    entries: tuple[ManifestEntry, ...]
    root: Path = Path(".")

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def to_json(self) -> list[dict]:
        def rel(p: Path) -> str:
            try:
                return p.relative_to(self.root).as_posix()
            except ValueError:
                return p.as_posix()
        return [{"trial": rel(e.trial), "sidecar": rel(e.sidecar), "split": e.split} for e in self.entries]

    def validate(self) -> None:
        """Each subject must keep one split and one set of metadata across trials."""
        seen: dict[str, tuple[str, SubjectMeta]] = {}
        for e in self.entries:
            meta, _, _ = read_sidecar(e.sidecar)
            prev = seen.setdefault(meta.id, (e.split, meta))
            if prev[0] != e.split:
                raise SchemaError(f"subject {meta.id} appears in both splits")
            if prev[1] != meta:
                raise SchemaError(f"subject {meta.id} has inconsistent metadata across trials")
        if not seen:
            raise SchemaError("manifest lists no trials")


def load_manifest(path) -> CohortManifest:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(raw, list):
        raise SchemaError(f"{path}: manifest must be a JSON array")
    root = path.parent
    entries = []
    for i, item in enumerate(raw):
        try:
            split = str(item["split"]).lower()
            trial = root / item["trial"]
            side = root / item["sidecar"] if item.get("sidecar") else sidecar_path_for(trial)
        except (KeyError, TypeError):
            raise SchemaError(f"{path}: entry {i} needs 'trial' and 'split'") from None
        if split not in SPLITS:
            raise SchemaError(f"{path}: entry {i} has split {split!r}; expected train or test")
        entries.append(ManifestEntry(trial, side, split))
    return CohortManifest(tuple(entries), root)


def save_manifest(manifest: CohortManifest, path) -> None:
    write_json_atomic(path, manifest.to_json())

