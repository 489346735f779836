"""Persistence: session CSVs, binary model checkpoints, JSON reports.

Session format (one directory per session):
    emg.csv     header ``t,ch1,...,ch6`` — seconds, volts-normalized
    angles.csv  header ``t,fe,ps,ru``    — seconds, degrees; inactive DoF
                columns are written as zeros for P1-P3
    meta.json   optional {protocol, session_id, fs_emg, fs_ang}; when absent
                the protocol is inferred from which angle columns are nonzero

Checkpoint layout (little-endian throughout):
    magic "EMGK" | version u32 | header length u32 | header JSON | blob
The header JSON describes the architecture (shapes, k, matrix mode, output
count, preprocessing stats) and lists every array name+shape in order; the
blob is their float32 values concatenated row-major. All writes go through
a temp file + rename so interrupted runs never leave partial files.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .dsp import PROTOCOL_DOFS, NormalizationStats, SemgRecording
from .errors import (
    CorruptCheckpointError,
    LoadError,
    UnsupportedVersionError,
)
from .evaluation import EvaluationReport
from .lstm import PARAM_NAMES as LSTM_PARAM_NAMES
from .lstm import LstmParams
from .nn import CnnModel
from .training import HybridModel, LabelScaler

MAGIC = b"EMGK"
CHECKPOINT_VERSION = 1
MODEL_KIND = "cnn-lstm-hybrid"
ANGLE_COLUMNS = ("fe", "ps", "ru")
EMG_FILE = "emg.csv"
ANGLES_FILE = "angles.csv"
META_FILE = "meta.json"
_FLOAT_FMT = "%.17g"
_RATE_TOLERANCE = 0.01


# --------------------------------------------------------------------------
# atomic write helpers


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: Path, text: str) -> None:
    _atomic_write_bytes(path, text.encode("utf-8"))


# --------------------------------------------------------------------------
# sessions


def save_session(rec: SemgRecording, directory: str | Path) -> Path:
    """Write emg.csv / angles.csv / meta.json for one recording."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    emg_rows = np.column_stack([rec.t_emg, rec.emg])
    atomic_write_text(
        directory / EMG_FILE,
        _csv_text(
            "t," + ",".join(f"ch{i + 1}" for i in range(rec.n_channels)), emg_rows
        ),
    )

    full = np.zeros((rec.t_ang.shape[0], len(ANGLE_COLUMNS)))
    for d, name in enumerate(rec.dof_names):
        full[:, ANGLE_COLUMNS.index(name)] = rec.angles[:, d]
    atomic_write_text(
        directory / ANGLES_FILE,
        _csv_text("t," + ",".join(ANGLE_COLUMNS), np.column_stack([rec.t_ang, full])),
    )

    meta = {
        "protocol": rec.protocol,
        "session_id": rec.session_id,
        "fs_emg": rec.fs_emg,
        "fs_ang": rec.fs_ang,
    }
    atomic_write_text(directory / META_FILE, json.dumps(meta, indent=2) + "\n")
    return directory


def _csv_text(header: str, rows: np.ndarray) -> str:
    lines = [header]
    lines.extend(",".join(_FLOAT_FMT % v for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _read_csv(path: Path, expected_header: str) -> np.ndarray:
    if not path.is_file():
        raise LoadError(f"missing {path}")
    with open(path) as fh:
        header = fh.readline().strip()
        if header != expected_header:
            raise LoadError(
                f"{path.name}: expected header {expected_header!r}, got {header!r}"
            )
        try:
            data = np.genfromtxt(fh, delimiter=",", dtype=np.float64)
        except ValueError as exc:
            raise LoadError(f"{path.name}: malformed row ({exc})") from exc
    if data.size == 0:
        raise LoadError(f"{path.name}: no data rows")
    data = np.atleast_2d(data)
    n_cols = expected_header.count(",") + 1
    if data.shape[1] != n_cols:
        raise LoadError(
            f"{path.name}: expected {n_cols} columns, got {data.shape[1]}"
        )
    bad = np.argwhere(~np.isfinite(data))
    if bad.size:
        row, col = bad[0]
        raise LoadError(
            f"{path.name}: non-finite cell at data row {row + 1}, column {col + 1}"
        )
    t = data[:, 0]
    non_mono = np.nonzero(np.diff(t) <= 0)[0]
    if non_mono.size:
        raise LoadError(
            f"{path.name}: timestamps not strictly increasing at data row "
            f"{non_mono[0] + 2}"
        )
    return data


def _check_rate(path_name: str, t: np.ndarray, declared: float) -> None:
    if t.shape[0] < 2:
        raise LoadError(f"{path_name}: need at least 2 samples to check rate")
    estimated = (t.shape[0] - 1) / (t[-1] - t[0])
    if abs(estimated - declared) > _RATE_TOLERANCE * declared:
        raise LoadError(
            f"{path_name}: sampling rate {estimated:.2f} Hz deviates more than "
            f"{_RATE_TOLERANCE:.0%} from declared {declared:g} Hz"
        )


def _infer_protocol(full_angles: np.ndarray) -> str:
    active = tuple(
        name
        for i, name in enumerate(ANGLE_COLUMNS)
        if np.any(full_angles[:, i] != 0.0)
    )
    table = {("fe",): "P1", ("ps",): "P2", ("ru",): "P3", ANGLE_COLUMNS: "P4"}
    if active not in table:
        raise LoadError(
            f"cannot infer protocol from active angle columns {active}; "
            "provide meta.json"
        )
    return table[active]


def load_session(
    directory: str | Path, expected_channels: int = 6
) -> SemgRecording:
    """Load and validate one session directory."""
    directory = Path(directory)
    emg_header = "t," + ",".join(f"ch{i + 1}" for i in range(expected_channels))
    emg_data = _read_csv(directory / EMG_FILE, emg_header)
    ang_data = _read_csv(directory / ANGLES_FILE, "t," + ",".join(ANGLE_COLUMNS))

    meta_path = directory / META_FILE
    meta: dict[str, Any] = {}
    if meta_path.is_file():
        try:
            meta = json.loads(meta_path.read_text())
        except json.JSONDecodeError as exc:
            raise LoadError(f"meta.json: invalid JSON ({exc})") from exc
    protocol = meta.get("protocol") or _infer_protocol(ang_data[:, 1:])
    if protocol not in PROTOCOL_DOFS:
        raise LoadError(f"meta.json: unknown protocol {protocol!r}")
    fs_emg = float(meta.get("fs_emg", 1024.0))
    fs_ang = float(meta.get("fs_ang", 100.0))
    _check_rate(EMG_FILE, emg_data[:, 0], fs_emg)
    _check_rate(ANGLES_FILE, ang_data[:, 0], fs_ang)

    dof_names = PROTOCOL_DOFS[protocol]
    angles = np.column_stack(
        [ang_data[:, 1 + ANGLE_COLUMNS.index(name)] for name in dof_names]
    )
    return SemgRecording(
        emg=emg_data[:, 1:],
        t_emg=emg_data[:, 0],
        angles=angles,
        t_ang=ang_data[:, 0],
        protocol=protocol,
        session_id=str(meta.get("session_id", directory.name)),
        fs_emg=fs_emg,
        fs_ang=fs_ang,
    )


def list_session_dirs(directory: str | Path) -> list[Path]:
    """Session directories under ``directory`` (itself, or its children)."""
    directory = Path(directory)
    if (directory / EMG_FILE).is_file():
        return [directory]
    return sorted(
        child
        for child in directory.iterdir()
        if child.is_dir() and (child / EMG_FILE).is_file()
    )


# --------------------------------------------------------------------------
# checkpoints


def _model_arrays(model: HybridModel) -> list[tuple[str, np.ndarray]]:
    arrays = [(f"cnn.{n}", a) for n, a in model.cnn.state_arrays().items()]
    arrays += [(f"lstm.{n}", a) for n, a in model.lstm.state_arrays().items()]
    return arrays


def save_model(model: HybridModel, path: str | Path) -> Path:
    path = Path(path)
    arrays = _model_arrays(model)
    header = {
        "model_kind": MODEL_KIND,
        "k": model.k,
        "matrix_mode": model.matrix_mode,
        "dof_names": list(model.dof_names),
        "n_outputs": model.n_outputs,
        "window_samples": model.window_samples,
        "hop_samples": model.hop_samples,
        "input_len": model.cnn.input_len,
        "in_channels": model.cnn.in_channels,
        "leaky_slope": model.cnn.leaky_slope,
        "dropout": model.cnn.dropout_rate,
        "norm_stats": {
            "mins": model.norm_stats.mins.tolist(),
            "maxs": model.norm_stats.maxs.tolist(),
        },
        "label_scaler": {
            "mean": model.label_scaler.mean.tolist(),
            "std": model.label_scaler.std.tolist(),
        },
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in arrays],
    }
    header_json = json.dumps(header).encode("utf-8")
    blob = b"".join(
        np.ascontiguousarray(a, dtype="<f4").tobytes() for _, a in arrays
    )
    data = (
        MAGIC
        + struct.pack("<I", CHECKPOINT_VERSION)
        + struct.pack("<I", len(header_json))
        + header_json
        + blob
    )
    _atomic_write_bytes(path, data)
    return path


def _header_field(header: dict, key: str):
    try:
        return header[key]
    except KeyError:
        raise CorruptCheckpointError(key, "missing from header") from None


def load_model(path: str | Path) -> HybridModel:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise CorruptCheckpointError("file", str(exc)) from exc
    if len(raw) < 12:
        raise CorruptCheckpointError("magic", "file shorter than fixed prelude")
    if raw[:4] != MAGIC:
        raise CorruptCheckpointError("magic", f"got {raw[:4]!r}, want {MAGIC!r}")
    (version,) = struct.unpack("<I", raw[4:8])
    if version != CHECKPOINT_VERSION:
        raise UnsupportedVersionError(version, CHECKPOINT_VERSION)
    (header_len,) = struct.unpack("<I", raw[8:12])
    if 12 + header_len > len(raw):
        raise CorruptCheckpointError("header", "declared length exceeds file")
    try:
        header = json.loads(raw[12 : 12 + header_len])
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptCheckpointError("header", f"invalid JSON ({exc})") from exc
    if _header_field(header, "model_kind") != MODEL_KIND:
        raise CorruptCheckpointError(
            "model_kind", f"got {header['model_kind']!r}, want {MODEL_KIND!r}"
        )

    blob = raw[12 + header_len :]
    arrays: dict[str, np.ndarray] = {}
    offset = 0
    for entry in _header_field(header, "arrays"):
        name = entry["name"]
        shape = tuple(int(s) for s in entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = 4 * count
        if offset + nbytes > len(blob):
            raise CorruptCheckpointError("blob", f"truncated inside {name}")
        arrays[name] = (
            np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
            .reshape(shape)
            .copy()
        )
        offset += nbytes
    if offset != len(blob):
        raise CorruptCheckpointError(
            "blob", f"{len(blob) - offset} trailing bytes after declared arrays"
        )

    cnn = CnnModel(
        input_len=int(_header_field(header, "input_len")),
        in_channels=int(_header_field(header, "in_channels")),
        n_outputs=int(_header_field(header, "n_outputs")),
        seed=0,
        leaky_slope=float(_header_field(header, "leaky_slope")),
        dropout_rate=float(_header_field(header, "dropout")),
    )
    cnn_state = {
        name[len("cnn.") :]: arr
        for name, arr in arrays.items()
        if name.startswith("cnn.")
    }
    try:
        cnn.load_state_arrays(cnn_state)
    except (KeyError, ValueError) as exc:
        raise CorruptCheckpointError("arrays", f"cnn state: {exc}") from exc

    lstm_state = {
        name[len("lstm.") :]: arr
        for name, arr in arrays.items()
        if name.startswith("lstm.")
    }
    try:
        lstm = LstmParams(
            **{name: lstm_state[name] for name in LSTM_PARAM_NAMES},
            h0=lstm_state["h0"],
            c0=lstm_state["c0"],
        )
    except KeyError as exc:
        raise CorruptCheckpointError("arrays", f"lstm state missing {exc}") from exc

    stats_raw = _header_field(header, "norm_stats")
    stats = NormalizationStats(
        mins=np.asarray(stats_raw["mins"], dtype=np.float64),
        maxs=np.asarray(stats_raw["maxs"], dtype=np.float64),
    )
    scaler_raw = _header_field(header, "label_scaler")
    scaler = LabelScaler(
        mean=np.asarray(scaler_raw["mean"], dtype=np.float64),
        std=np.asarray(scaler_raw["std"], dtype=np.float64),
    )
    return HybridModel(
        cnn=cnn,
        lstm=lstm,
        norm_stats=stats,
        label_scaler=scaler,
        k=int(_header_field(header, "k")),
        matrix_mode=str(_header_field(header, "matrix_mode")),
        dof_names=list(_header_field(header, "dof_names")),
        window_samples=int(_header_field(header, "window_samples")),
        hop_samples=int(_header_field(header, "hop_samples")),
    )


# --------------------------------------------------------------------------
# reports / exports


def write_report(report: EvaluationReport, path: str | Path) -> Path:
    path = Path(path)
    atomic_write_text(path, json.dumps(report.to_dict(), indent=2) + "\n")
    return path


def read_report(path: str | Path) -> EvaluationReport:
    with open(path) as fh:
        return EvaluationReport.from_dict(json.load(fh))


def write_trajectory(report: EvaluationReport, path: str | Path) -> Path:
    """Long-format CSV ``t,true,pred,dof`` — one row per timestamp per DoF."""
    path = Path(path)
    lines = ["t,true,pred,dof"]
    names = [entry["name"] for entry in report.dof]
    for i, t in enumerate(report.timestamps):
        for d, name in enumerate(names):
            lines.append(
                f"{_FLOAT_FMT % t},{_FLOAT_FMT % report.truths[i, d]},"
                f"{_FLOAT_FMT % report.predictions[i, d]},{name}"
            )
    atomic_write_text(path, "\n".join(lines) + "\n")
    return path


def write_losses(
    path: str | Path, cnn_loss: Sequence[float], lstm_loss: Sequence[float]
) -> Path:
    """Per-epoch training-loss CSV ``stage,epoch,loss`` for both stages."""
    path = Path(path)
    lines = ["stage,epoch,loss"]
    for stage, history in (("cnn", cnn_loss), ("lstm", lstm_loss)):
        lines.extend(
            f"{stage},{epoch},{_FLOAT_FMT % loss}"
            for epoch, loss in enumerate(history)
        )
    atomic_write_text(path, "\n".join(lines) + "\n")
    return path


def export_feature_scatter(
    path: str | Path,
    projected: np.ndarray,
    angles: np.ndarray,
    dof_names: Sequence[str],
    feature_kind: str,
) -> Path:
    """CSV ``x,y,angle,dof,feature_kind`` for external scatter plotting.

    One row per (sample, DoF): the 2-D feature projection tagged with that
    DoF's angle so color maps can be built per DoF.
    """
    if feature_kind not in ("deep", "handcrafted"):
        raise ValueError(f"feature_kind must be deep|handcrafted, got {feature_kind}")
    projected = np.asarray(projected)
    angles = np.atleast_2d(np.asarray(angles))
    path = Path(path)
    lines = ["x,y,angle,dof,feature_kind"]
    for i in range(projected.shape[0]):
        for d, name in enumerate(dof_names):
            lines.append(
                f"{_FLOAT_FMT % projected[i, 0]},{_FLOAT_FMT % projected[i, 1]},"
                f"{_FLOAT_FMT % angles[i, d]},{name},{feature_kind}"
            )
    atomic_write_text(path, "\n".join(lines) + "\n")
    return path
