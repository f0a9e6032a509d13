"""Serialization: canonical dataset directories and binary model files.

A canonical dataset is a directory with ``manifest.json`` (schema, rate,
channels, grid, per-trial table), ``events.csv`` (one row per
intensification or stimulation: trial_id, onset_sample, code, label) and a
``trials/`` folder of headerless little-endian float32 payloads, row-major
[n_channels x n_samples]. Reading after writing restores the dataset
bit-exactly.

Models and templates use a small versioned container: magic, version, then
named entries (float64/int64 arrays or strings), everything little-endian.
Templates carry a JSON sidecar with their crafting metadata.
"""

import csv
import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import attack_p300, attack_ssvep, dsp, p300, riemann, ssvep
from .errors import FormatError, ParameterError

DATASET_SCHEMA_VERSION = 1
CONTAINER_MAGIC = b"SPSEC1\x00\n"
CONTAINER_VERSION = 1

_KIND_F64 = 0
_KIND_STR = 1
_KIND_I64 = 2


# ---------------------------------------------------------------------------
# binary container


def write_container(path, entries: dict) -> None:
    """Write named arrays/strings; entry order is sorted for stable bytes."""
    buf = io.BytesIO()
    buf.write(CONTAINER_MAGIC)
    buf.write(struct.pack("<II", CONTAINER_VERSION, len(entries)))
    for name in sorted(entries):
        value = entries[name]
        name_b = name.encode("utf-8")
        buf.write(struct.pack("<H", len(name_b)))
        buf.write(name_b)
        if isinstance(value, str):
            data = value.encode("utf-8")
            buf.write(struct.pack("<B", _KIND_STR))
            buf.write(struct.pack("<Q", len(data)))
            buf.write(data)
            continue
        arr = np.asarray(value)
        if arr.dtype.kind in "iub":
            arr = arr.astype("<i8")
            kind = _KIND_I64
        else:
            arr = arr.astype("<f8")
            kind = _KIND_F64
        buf.write(struct.pack("<BB", kind, arr.ndim))
        for dim in arr.shape:
            buf.write(struct.pack("<Q", dim))
        buf.write(np.ascontiguousarray(arr).tobytes())
    Path(path).write_bytes(buf.getvalue())


def _take(buf: bytes, offset: int, count: int, what: str):
    if offset + count > len(buf):
        raise FormatError(
            f"truncated container: {what} needs {count} bytes at offset {offset}, "
            f"file has {len(buf)}"
        )
    return buf[offset : offset + count], offset + count


def read_container(path) -> dict:
    buf = Path(path).read_bytes()
    raw, off = _take(buf, 0, len(CONTAINER_MAGIC), "magic")
    if raw != CONTAINER_MAGIC:
        raise FormatError(f"{path}: not a container file (bad magic)")
    raw, off = _take(buf, off, 8, "header")
    version, n_entries = struct.unpack("<II", raw)
    if version != CONTAINER_VERSION:
        raise FormatError(f"{path}: unsupported container version {version}")
    out = {}
    for _ in range(n_entries):
        raw, off = _take(buf, off, 2, "name length")
        (name_len,) = struct.unpack("<H", raw)
        raw, off = _take(buf, off, name_len, "name")
        name = raw.decode("utf-8")
        raw, off = _take(buf, off, 1, "kind")
        kind = raw[0]
        if kind == _KIND_STR:
            raw, off = _take(buf, off, 8, "string length")
            (nbytes,) = struct.unpack("<Q", raw)
            raw, off = _take(buf, off, nbytes, f"string {name!r}")
            out[name] = raw.decode("utf-8")
            continue
        if kind not in (_KIND_F64, _KIND_I64):
            raise FormatError(f"{path}: unknown entry kind {kind} for {name!r}")
        raw, off = _take(buf, off, 1, "rank")
        ndim = raw[0]
        shape = []
        for _ in range(ndim):
            raw, off = _take(buf, off, 8, "dimension")
            shape.append(struct.unpack("<Q", raw)[0])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        dtype = "<f8" if kind == _KIND_F64 else "<i8"
        raw, off = _take(buf, off, count * 8, f"array {name!r}")
        out[name] = np.frombuffer(raw, dtype=dtype).reshape(shape).copy()
    return out


def _scalar(entries: dict, name: str) -> float:
    return float(np.asarray(entries[name]).reshape(()))


# ---------------------------------------------------------------------------
# canonical dataset


@dataclass(frozen=True)
class TrialRecord:
    """One trial: float32 payload, its events, and bookkeeping fields."""

    trial_id: int
    data: np.ndarray  # float32 [n_channels x n_samples]
    onsets: np.ndarray
    codes: np.ndarray
    labels: np.ndarray
    split: str = "all"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "onsets", np.asarray(self.onsets, dtype=np.int64))
        object.__setattr__(self, "codes", np.asarray(self.codes, dtype=np.int64))
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))


@dataclass(frozen=True)
class CanonicalDataset:
    paradigm: str  # "p300" or "ssvep"
    fs: float
    channel_names: tuple
    subject_id: str
    grid: dict
    protocol: dict
    trials: tuple

    def __post_init__(self):
        if self.paradigm not in ("p300", "ssvep"):
            raise ParameterError(f"unknown paradigm {self.paradigm!r}")
        object.__setattr__(self, "channel_names", tuple(self.channel_names))
        object.__setattr__(self, "trials", tuple(self.trials))

    def split(self, name: str):
        return [t for t in self.trials if t.split == name]


def _trial_file(trial_id: int) -> str:
    return f"trials/trial_{trial_id:05d}.f32"


def write_dataset(ds: CanonicalDataset, path) -> None:
    """Write the directory layout; overwriting an existing dataset in place."""
    root = Path(path)
    (root / "trials").mkdir(parents=True, exist_ok=True)
    manifest = {
        "schema_version": DATASET_SCHEMA_VERSION,
        "paradigm": ds.paradigm,
        "fs": ds.fs,
        "channel_names": list(ds.channel_names),
        "subject_id": ds.subject_id,
        "grid": ds.grid,
        "protocol": ds.protocol,
        "trials": [],
    }
    event_lines = [["trial_id", "onset_sample", "code", "label"]]
    for trial in ds.trials:
        rel = _trial_file(trial.trial_id)
        manifest["trials"].append({
            "trial_id": trial.trial_id,
            "file": rel,
            "n_channels": int(trial.data.shape[0]),
            "n_samples": int(trial.data.shape[1]),
            "split": trial.split,
            "meta": trial.meta,
        })
        (root / rel).write_bytes(trial.data.astype("<f4").tobytes(order="C"))
        for onset, code, label in zip(trial.onsets, trial.codes, trial.labels):
            event_lines.append([trial.trial_id, int(onset), int(code), int(label)])
    with open(root / "events.csv", "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerows(event_lines)
    (root / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def read_dataset(path) -> CanonicalDataset:
    """Read and validate a dataset directory.

    Checks the schema version, payload byte counts against the manifest,
    event codes against the paradigm, and onset bounds; failures name the
    offending trial.
    """
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise FormatError(f"{root}: no manifest.json")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{manifest_path}: invalid JSON: {exc}") from exc
    version = manifest.get("schema_version")
    if version != DATASET_SCHEMA_VERSION:
        raise FormatError(f"{root}: unsupported dataset schema version {version!r}")
    paradigm = manifest.get("paradigm")
    if paradigm not in ("p300", "ssvep"):
        raise FormatError(f"{root}: unknown paradigm {paradigm!r}")
    fs = float(manifest["fs"])
    if fs <= 0:
        raise FormatError(f"{root}: nonpositive sampling rate {fs}")

    events: dict = {}
    events_path = root / "events.csv"
    if not events_path.exists():
        raise FormatError(f"{root}: no events.csv")
    with open(events_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["trial_id", "onset_sample", "code", "label"]:
            raise FormatError(f"{events_path}: unexpected header {header}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise FormatError(f"{events_path}:{lineno}: expected 4 columns, got {len(row)}")
            try:
                tid, onset, code, label = (int(v) for v in row)
            except ValueError as exc:
                raise FormatError(f"{events_path}:{lineno}: non-integer field: {exc}") from exc
            events.setdefault(tid, []).append((onset, code, label))

    if paradigm == "p300":
        max_code = p300.N_CODES
    else:
        grid = ssvep.FrequencyGrid.from_dict(manifest["grid"])
        max_code = len(grid)

    trials = []
    for entry in manifest["trials"]:
        tid = int(entry["trial_id"])
        rel = entry["file"]
        payload_path = root / rel
        if not payload_path.exists():
            raise FormatError(f"trial {tid}: missing payload {rel}")
        blob = payload_path.read_bytes()
        n_ch = int(entry["n_channels"])
        n_s = int(entry["n_samples"])
        expected = 4 * n_ch * n_s
        if len(blob) != expected:
            raise FormatError(
                f"trial {tid}: payload {rel} has {len(blob)} bytes, expected {expected}"
            )
        data = np.frombuffer(blob, dtype="<f4").reshape(n_ch, n_s).copy()
        if len(ds_names := manifest["channel_names"]) != n_ch:
            raise FormatError(
                f"trial {tid}: {n_ch} channels but manifest names {len(ds_names)}"
            )
        ev = sorted(events.get(tid, []))
        onsets = np.asarray([e[0] for e in ev], dtype=np.int64)
        codes = np.asarray([e[1] for e in ev], dtype=np.int64)
        labels = np.asarray([e[2] for e in ev], dtype=np.int64)
        if onsets.size and (onsets.min() < 0 or onsets.max() >= n_s):
            raise FormatError(f"trial {tid}: event onset outside the recording")
        if codes.size and (codes.min() < 1 or codes.max() > max_code):
            raise FormatError(
                f"trial {tid}: event code outside 1..{max_code} for paradigm {paradigm}"
            )
        trials.append(TrialRecord(tid, data, onsets, codes, labels,
                                  entry.get("split", "all"), entry.get("meta", {})))
    return CanonicalDataset(paradigm, fs, tuple(manifest["channel_names"]),
                            manifest.get("subject_id", ""), manifest.get("grid", {}),
                            manifest.get("protocol", {}), tuple(trials))


# ---------------------------------------------------------------------------
# dataset <-> trial conversions


def p300_dataset(train_trials, test_trials, subject_id: str,
                 protocol: dict | None = None) -> CanonicalDataset:
    """Pack labeled matrix-speller trials into the canonical layout."""
    all_trials = [(t, "train") for t in train_trials] + [(t, "test") for t in test_trials]
    if not all_trials:
        raise ParameterError("no trials to pack")
    first = all_trials[0][0]
    records = []
    for tid, (trial, split) in enumerate(all_trials):
        records.append(TrialRecord(
            tid, trial.sig.data.astype(np.float32), trial.onsets, trial.codes,
            trial.labels, split, {"user_char": trial.user_char},
        ))
    grid = {"rows": list(first.grid)}
    return CanonicalDataset("p300", first.sig.fs, first.sig.channel_names,
                            subject_id, grid, protocol or {}, tuple(records))


def to_p300_trials(ds: CanonicalDataset, split: str | None = None):
    """Float64 trials; grid comes from the manifest."""
    if ds.paradigm != "p300":
        raise ParameterError(f"dataset paradigm is {ds.paradigm}, expected p300")
    grid = tuple(ds.grid.get("rows", p300.P300_GRID))
    out = []
    for rec in ds.trials:
        if split is not None and rec.split != split:
            continue
        sig = dsp.Signal(rec.data.astype(np.float64), ds.fs, ds.channel_names)
        out.append(p300.P300Trial(sig, rec.onsets, rec.codes, rec.labels,
                                  rec.meta.get("user_char"), grid))
    return out


def ssvep_dataset(trials, grid: ssvep.FrequencyGrid, subject_id: str,
                  protocol: dict | None = None) -> CanonicalDataset:
    """Pack frequency-speller trials; the stimulation code is index + 1."""
    trials = list(trials)
    if not trials:
        raise ParameterError("no trials to pack")
    records = []
    for tid, trial in enumerate(trials):
        records.append(TrialRecord(
            tid, trial.sig.data.astype(np.float32),
            np.asarray([trial.onset_sample]), np.asarray([trial.freq_index + 1]),
            np.asarray([-1]), "all",
            {"character": trial.character, "freq_index": trial.freq_index,
             "block": trial.block, "onset_sample": trial.onset_sample},
        ))
    return CanonicalDataset("ssvep", trials[0].sig.fs, trials[0].sig.channel_names,
                            subject_id, grid.to_dict(), protocol or {}, tuple(records))


def to_ssvep_trials(ds: CanonicalDataset, blocks=None):
    if ds.paradigm != "ssvep":
        raise ParameterError(f"dataset paradigm is {ds.paradigm}, expected ssvep")
    grid = ssvep.FrequencyGrid.from_dict(ds.grid)
    out = []
    for rec in ds.trials:
        block = int(rec.meta.get("block", 0))
        if blocks is not None and block not in blocks:
            continue
        sig = dsp.Signal(rec.data.astype(np.float64), ds.fs, ds.channel_names)
        k = int(rec.meta["freq_index"])
        out.append(ssvep.SsvepTrial(sig, int(rec.meta["onset_sample"]), k,
                                    rec.meta.get("character", grid.characters[k]), block))
    return out


def dataset_grid(ds: CanonicalDataset) -> ssvep.FrequencyGrid:
    return ssvep.FrequencyGrid.from_dict(ds.grid)


# ---------------------------------------------------------------------------
# models and templates


def save_p300_victim(victim: p300.P300Victim, path) -> None:
    entries = {
        "kind": "p300_victim",
        "variant": victim.variant,
        "fs": np.float64(victim.fs),
        "epoch_ms": np.float64(victim.epoch_ms),
        "cov_loading": np.float64(victim.cov_loading),
        "filters_u": victim.filters.u,
        "filters_z": victim.filters.z,
        "filters_n": np.int64(victim.filters.n_filters),
        "filters_eig0": victim.filters.eigenvalues[0],
        "filters_eig1": victim.filters.eigenvalues[1],
        "clf_weights": victim.clf.weights,
        "clf_bias": np.float64(victim.clf.bias),
        "clf_class_weights": np.asarray(victim.clf.class_weights),
        "clf_l2": np.float64(victim.clf.l2),
    }
    if victim.c_ref is not None:
        entries["c_ref"] = victim.c_ref
    write_container(path, entries)


def load_p300_victim(path) -> p300.P300Victim:
    e = read_container(path)
    if e.get("kind") != "p300_victim":
        raise FormatError(f"{path}: not a matrix-speller model file")
    filters = riemann.XdawnFilters(e["filters_u"], e["filters_z"],
                                   int(np.asarray(e["filters_n"]).reshape(())),
                                   (e["filters_eig0"], e["filters_eig1"]))
    clf = riemann.LogisticModel(e["clf_weights"], _scalar(e, "clf_bias"),
                                tuple(np.asarray(e["clf_class_weights"]).tolist()),
                                _scalar(e, "clf_l2"))
    c_ref = e.get("c_ref")
    w_ref = riemann.invsqrtm_spd(c_ref) if c_ref is not None else None
    return p300.P300Victim(filters, clf, _scalar(e, "fs"), e["variant"],
                           _scalar(e, "epoch_ms"), _scalar(e, "cov_loading"),
                           c_ref, w_ref)


def _write_sidecar(path, meta: dict) -> None:
    side = Path(str(path) + ".meta.json")
    side.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _read_sidecar(path) -> dict:
    side = Path(str(path) + ".meta.json")
    if not side.exists():
        return {}
    return json.loads(side.read_text(encoding="utf-8"))


def save_p300_template(template: attack_p300.P300Template, path) -> None:
    flip = -1 if template.sign_flipped is None else int(template.sign_flipped)
    write_container(path, {
        "kind": "p300_template",
        "data": template.data,
        "epsilon": np.float64(template.epsilon),
        "fs": np.float64(template.fs),
        "sign_flipped": np.int64(flip),
    })
    _write_sidecar(path, {"sign_flipped": template.sign_flipped, **template.meta})


def load_p300_template(path) -> attack_p300.P300Template:
    e = read_container(path)
    if e.get("kind") != "p300_template":
        raise FormatError(f"{path}: not a matrix-speller template file")
    flip_raw = int(np.asarray(e["sign_flipped"]).reshape(()))
    flip = None if flip_raw < 0 else bool(flip_raw)
    return attack_p300.P300Template(e["data"], _scalar(e, "epsilon"),
                                    _scalar(e, "fs"), flip, _read_sidecar(path))


def save_ssvep_template(template: attack_ssvep.SsvepTemplate, path) -> None:
    write_container(path, {
        "kind": "ssvep_template",
        "delta": template.delta,
        "frequency": np.float64(template.frequency),
        "fs": np.float64(template.fs),
        "alpha": np.float64(template.alpha),
        "final_spr_db": np.float64(template.final_spr_db),
        "spr_threshold_db": np.float64(template.spr_threshold_db),
        "iterations": np.int64(template.iterations),
    })
    _write_sidecar(path, dict(template.meta))


def load_ssvep_template(path) -> attack_ssvep.SsvepTemplate:
    e = read_container(path)
    if e.get("kind") != "ssvep_template":
        raise FormatError(f"{path}: not a frequency-speller template file")
    return attack_ssvep.SsvepTemplate(
        e["delta"], _scalar(e, "frequency"), _scalar(e, "fs"), _scalar(e, "alpha"),
        _scalar(e, "final_spr_db"), _scalar(e, "spr_threshold_db"),
        int(np.asarray(e["iterations"]).reshape(())), _read_sidecar(path))
