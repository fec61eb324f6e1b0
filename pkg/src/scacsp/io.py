"""Dataset manifests, the trial binary format, model persistence, and report
CSVs. All files are written atomically (temp file + rename).

Trial binary format: magic bytes ``SCA1``, then two little-endian uint32
(n_channels, n_samples), then row-major little-endian float64 samples.
"""

from __future__ import annotations

import csv
import io as _io
import json
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classify import LdaModel
from .csp import BinaryCspLda, FilterBank, OvrModel, PwModel
from .errors import ConfigError, DataError
from .linalg import OrthoBasis
from .pipeline import PipelineConfig, PipelineModel
from .preprocess import BandpassSpec, TrialSet, butterworth_bandpass
from .subspace import NsrProjector

TRIAL_MAGIC = b"SCA1"
MODEL_FORMAT = "scacsp-model-v1"

SESSIONS = ("train", "test")


def atomic_write_bytes(path, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str):
    atomic_write_bytes(path, text.encode("utf-8"))


def fmt_float(x) -> str:
    """17-significant-digit decimal form; round-trips float64 exactly."""
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    """RFC-4180-style CSV with floats at 17 significant digits."""
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(
            [fmt_float(v) if isinstance(v, float) else v for v in row]
        )
    atomic_write_text(path, buf.getvalue())


def write_trial(path, X: np.ndarray):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DataError("trial must be a channels-by-samples matrix")
    payload = TRIAL_MAGIC + struct.pack(
        "<II", X.shape[0], X.shape[1]
    ) + X.astype("<f8").tobytes(order="C")
    atomic_write_bytes(path, payload)


def read_trial(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != TRIAL_MAGIC:
        raise DataError(f"{path}: not a trial file (bad magic)")
    n_ch, n_sa = struct.unpack("<II", raw[4:12])
    expect = 12 + 8 * n_ch * n_sa
    if len(raw) != expect:
        raise DataError(
            f"{path}: truncated trial file ({len(raw)} bytes, expected {expect})"
        )
    return np.frombuffer(raw[12:], dtype="<f8").reshape(n_ch, n_sa).astype(float)


@dataclass
class ManifestEntry:
    file: str
    label: str
    session: str


@dataclass
class DatasetManifest:
    name: str
    fs_hz: float
    channel_names: list
    label_map: dict  # label string -> class id, ids contiguous from 1
    trials: list  # of ManifestEntry
    root: Path  # directory the file paths are relative to

    @property
    def class_count(self) -> int:
        return len(set(self.label_map.values()))


def _need(obj: dict, key: str, kind, where: str):
    if key not in obj:
        raise DataError(f"{where}: missing field {key!r}")
    val = obj[key]
    if kind is float:
        if not isinstance(val, (int, float)) or isinstance(val, bool):
            raise DataError(f"{where}.{key}: expected a number, got {type(val).__name__}")
        return float(val)
    if not isinstance(val, kind):
        raise DataError(
            f"{where}.{key}: expected {kind.__name__}, got {type(val).__name__}"
        )
    return val


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise DataError(f"{path}: manifest must be a JSON object")
    where = str(path)
    name = _need(doc, "name", str, where)
    fs = _need(doc, "fs_hz", float, where)
    channel_names = _need(doc, "channel_names", list, where)
    label_map = _need(doc, "label_map", dict, where)
    raw_trials = _need(doc, "trials", list, where)
    ids = sorted(label_map.values())
    if not ids or ids != list(range(1, len(ids) + 1)):
        raise DataError(
            f"{where}.label_map: class ids must be contiguous from 1, got {ids}"
        )
    entries = []
    for i, entry in enumerate(raw_trials):
        ew = f"{where}.trials[{i}]"
        if not isinstance(entry, dict):
            raise DataError(f"{ew}: expected an object")
        file = _need(entry, "file", str, ew)
        label = _need(entry, "label", str, ew)
        session = _need(entry, "session", str, ew)
        if label not in label_map:
            raise DataError(f"{ew}.label: {label!r} not in label_map")
        if session not in SESSIONS:
            raise DataError(f"{ew}.session: {session!r} not in {SESSIONS}")
        entries.append(ManifestEntry(file=file, label=label, session=session))
    if not entries:
        raise DataError(f"{where}.trials: empty")
    return DatasetManifest(
        name=name,
        fs_hz=fs,
        channel_names=list(channel_names),
        label_map=dict(label_map),
        trials=entries,
        root=path.parent,
    )


def ingest(
    manifest: DatasetManifest | str | Path,
    session: str | None = None,
    band: tuple | None = None,
    window: tuple | None = None,
) -> TrialSet:
    """Load trials from a manifest into a TrialSet.

    ``session`` restricts to train/test entries; ``band`` = (low, high, order)
    applies a causal Butterworth band-pass per trial before the optional
    ``window`` = (start_s, end_s) crop. Rows are centered afterwards.
    """
    if not isinstance(manifest, DatasetManifest):
        manifest = load_manifest(manifest)
    picked = [
        e for e in manifest.trials if session is None or e.session == session
    ]
    if not picked:
        raise DataError(f"manifest has no trials for session {session!r}")
    spec = None
    if band is not None:
        low, high, order = band
        spec = BandpassSpec(low_hz=low, high_hz=high, fs=manifest.fs_hz, order=int(order))
    trials = []
    labels = []
    n_ch = None
    for e in picked:
        X = read_trial(manifest.root / e.file)
        if n_ch is None:
            n_ch = X.shape[0]
        elif X.shape[0] != n_ch:
            raise DataError(
                f"{e.file}: has {X.shape[0]} channels, other trials have {n_ch}"
            )
        if spec is not None:
            X = butterworth_bandpass(X, spec)
        if window is not None:
            start = int(round(window[0] * manifest.fs_hz))
            stop = int(round(window[1] * manifest.fs_hz))
            if start < 0 or stop > X.shape[1] or stop <= start:
                raise DataError(
                    f"{e.file}: window {window} outside trial of "
                    f"{X.shape[1]} samples at {manifest.fs_hz} Hz"
                )
            X = X[:, start:stop]
        trials.append(X)
        labels.append(manifest.label_map[e.label])
    names = manifest.channel_names if len(manifest.channel_names) == n_ch else []
    return TrialSet(
        trials=trials,
        labels=np.asarray(labels),
        fs=manifest.fs_hz,
        class_count=manifest.class_count,
        channel_names=names,
    )


def write_dataset(
    out_dir,
    name: str,
    train: TrialSet,
    test: TrialSet | None = None,
    label_names: list | None = None,
) -> Path:
    """Write trial binaries plus a manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    class_count = train.class_count
    if label_names is None:
        label_names = [f"c{k}" for k in range(1, class_count + 1)]
    if len(label_names) != class_count:
        raise ConfigError(
            f"{len(label_names)} label names for {class_count} classes"
        )
    label_map = {label_names[k - 1]: k for k in range(1, class_count + 1)}
    entries = []

    def emit(ts: TrialSet, session: str):
        for i, X in enumerate(ts.trials):
            rel = f"trials/{session}_{i:04d}.sca"
            write_trial(out_dir / rel, X)
            entries.append(
                {
                    "file": rel,
                    "label": label_names[int(ts.labels[i]) - 1],
                    "session": session,
                }
            )

    emit(train, "train")
    if test is not None:
        emit(test, "test")
    manifest = {
        "name": name,
        "fs_hz": train.fs,
        "channel_names": list(train.channel_names),
        "label_map": label_map,
        "trials": entries,
    }
    manifest_path = out_dir / f"{name}.manifest.json"
    atomic_write_text(manifest_path, json.dumps(manifest, indent=2))
    return manifest_path


# ---------------------------------------------------------------------------
# Model persistence
# ---------------------------------------------------------------------------


def _arr(a):
    return None if a is None else np.asarray(a, dtype=float).tolist()


def _bank_to_dict(bank: FilterBank | None):
    if bank is None:
        return None
    return {
        "filters": _arr(bank.filters),
        "scores": _arr(bank.scores),
        "provenance": list(bank.provenance),
        "whitener": _arr(bank.whitener),
        "whitened_vectors": _arr(bank.whitened_vectors),
    }


def _bank_from_dict(d):
    if d is None:
        return None
    wv = d.get("whitened_vectors")
    return FilterBank(
        filters=np.asarray(d["filters"], dtype=float),
        scores=np.asarray(d["scores"], dtype=float),
        provenance=list(d["provenance"]),
        whitener=np.asarray(d["whitener"], dtype=float),
        whitened_vectors=None if wv is None else np.asarray(wv, dtype=float),
    )


def _lda_to_dict(lda: LdaModel | None):
    if lda is None:
        return None
    return {
        "class_ids": [int(c) for c in lda.class_ids],
        "class_means": _arr(lda.class_means),
        "pooled_cov": _arr(lda.pooled_cov),
        "priors": _arr(lda.priors),
        "ridge": float(lda.ridge),
    }


def _lda_from_dict(d):
    if d is None:
        return None
    return LdaModel(
        class_ids=np.asarray(d["class_ids"], dtype=int),
        class_means=np.asarray(d["class_means"], dtype=float),
        pooled_cov=np.asarray(d["pooled_cov"], dtype=float),
        priors=np.asarray(d["priors"], dtype=float),
        ridge=float(d["ridge"]),
    )


def _submodel_to_dict(sub):
    if sub is None:
        return None
    return {
        "kind": "ovr" if isinstance(sub, OvrModel) else "pw",
        "log_features": sub.log_features,
        "parts": [
            {
                "class_a": s.class_a,
                "class_b": s.class_b,
                "bank": _bank_to_dict(s.bank),
                "lda": _lda_to_dict(s.lda),
            }
            for s in sub.submodels
        ],
    }


def _submodel_from_dict(d):
    if d is None:
        return None
    parts = [
        BinaryCspLda(
            bank=_bank_from_dict(p["bank"]),
            lda=_lda_from_dict(p["lda"]),
            class_a=int(p["class_a"]),
            class_b=int(p["class_b"]),
        )
        for p in d["parts"]
    ]
    cls = OvrModel if d["kind"] == "ovr" else PwModel
    return cls(submodels=parts, log_features=bool(d["log_features"]))


def _nsr_to_dict(nsr: NsrProjector | None):
    if nsr is None:
        return None
    return {
        "mode": nsr.mode,
        "applicable": bool(nsr.applicable),
        "range_basis": _arr(None if nsr.range_basis is None else nsr.range_basis.columns),
        "source": "" if nsr.range_basis is None else nsr.range_basis.source,
    }


def _nsr_from_dict(d):
    if d is None:
        return None
    cols = d.get("range_basis")
    basis = (
        None
        if cols is None
        else OrthoBasis(
            columns=np.asarray(cols, dtype=float), kind="range", source=d.get("source", "")
        )
    )
    return NsrProjector(mode=d["mode"], range_basis=basis, applicable=bool(d["applicable"]))


def save_model(path, model: PipelineModel):
    doc = {
        "format": MODEL_FORMAT,
        "config": model.config.to_dict(),
        "kind": model.kind,
        "n_channels": int(model.n_channels),
        "class_count": int(model.class_count),
        "best_alpha": model.best_alpha,
        "best_beta": model.best_beta,
        "bank": _bank_to_dict(model.bank),
        "projector": _arr(model.projector),
        "nsr": _nsr_to_dict(model.nsr),
        "lda": _lda_to_dict(model.lda),
        "submodel": _submodel_to_dict(model.submodel),
    }
    atomic_write_text(path, json.dumps(doc))


def load_model(path) -> PipelineModel:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: cannot read model ({exc})") from exc
    if doc.get("format") != MODEL_FORMAT:
        raise DataError(f"{path}: not a {MODEL_FORMAT} file")
    proj = doc.get("projector")
    return PipelineModel(
        config=PipelineConfig.from_dict(doc["config"]),
        kind=doc["kind"],
        n_channels=int(doc["n_channels"]),
        class_count=int(doc["class_count"]),
        bank=_bank_from_dict(doc.get("bank")),
        projector=None if proj is None else np.asarray(proj, dtype=float),
        nsr=_nsr_from_dict(doc.get("nsr")),
        lda=_lda_from_dict(doc.get("lda")),
        submodel=_submodel_from_dict(doc.get("submodel")),
        best_alpha=doc.get("best_alpha"),
        best_beta=doc.get("best_beta"),
    )
