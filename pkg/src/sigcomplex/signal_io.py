"""Reading and writing signature files and dataset manifests.

Two text formats are understood:

* canonical ``.sig``: a ``SIGV1`` header line followed by
  ``t x y pressure pen_state`` rows (pressure ``-1`` when unavailable);
* SVC-style: a sample-count line followed by ``x y t button`` rows with
  integer millisecond timestamps.

A dataset is a directory holding ``manifest.tsv``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from .errors import (
    DanglingReference,
    DuplicateUserId,
    MalformedHeader,
    MissingManifestFile,
    NonMonotonicTime,
    SampleCountMismatch,
    SignatureFormatError,
    ValueOutOfRange,
)

MANIFEST_NAME = "manifest.tsv"
MANIFEST_COLUMNS = ("user_id", "split", "path", "modality", "session", "label")


class Modality(str, enum.Enum):
    PEN = "pen"
    FINGER = "finger"


class Label(str, enum.Enum):
    GENUINE = "genuine"
    SKILLED = "skilled"


class SourceFormat(str, enum.Enum):
    CANONICAL = "canonical"
    SVC = "svc"


class SamplePoint(NamedTuple):
    t: float
    x: float
    y: float
    pressure: float | None  # None means unavailable
    pen_down: bool


@dataclass(frozen=True, eq=False)
class RawSignature:
    """Timestamped pen samples plus identity metadata.

    Columns are stored as read-only numpy arrays. ``pressure`` is ``None``
    when the device did not record it (always the case for finger input).
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    pen_down: np.ndarray
    pressure: np.ndarray | None = None
    modality: Modality = Modality.PEN
    user_id: str = "unknown"
    session: int = 1
    label: Label = Label.GENUINE
    source_format: SourceFormat = SourceFormat.CANONICAL

    def __post_init__(self):
        t = _frozen(self.t, float)
        x = _frozen(self.x, float)
        y = _frozen(self.y, float)
        pen_down = _frozen(self.pen_down, bool)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "pen_down", pen_down)
        object.__setattr__(self, "modality", Modality(self.modality))
        object.__setattr__(self, "label", Label(self.label))
        object.__setattr__(self, "source_format", SourceFormat(self.source_format))
        n = t.size
        if n == 0:
            raise ValueError("a signature needs at least one sample")
        if not (x.size == y.size == pen_down.size == n):
            raise ValueError("column lengths differ")
        for name, col in (("t", t), ("x", x), ("y", y)):
            if not np.all(np.isfinite(col)):
                raise ValueError(f"non-finite value in column {name}")
        if t[0] < 0:
            raise ValueError("timestamps must be non-negative")
        if n > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if self.pressure is not None:
            p = _frozen(self.pressure, float)
            if p.size != n:
                raise ValueError("column lengths differ")
            if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
                raise ValueError("pressure must lie in [0, 1]")
            if self.modality is Modality.FINGER:
                raise ValueError("finger signatures carry no pressure")
            object.__setattr__(self, "pressure", p)
        if self.modality is Modality.FINGER and not pen_down.all():
            raise ValueError("finger signatures contain pen-down samples only")
        if not isinstance(self.session, (int, np.integer)) or self.session < 1:
            raise ValueError("session must be an integer >= 1")
        object.__setattr__(self, "session", int(self.session))

    def __len__(self):
        return self.t.size

    @property
    def samples(self) -> list[SamplePoint]:
        p = self.pressure
        return [
            SamplePoint(float(self.t[i]), float(self.x[i]), float(self.y[i]),
                        None if p is None else float(p[i]), bool(self.pen_down[i]))
            for i in range(len(self))
        ]

    def same_as(self, other: "RawSignature", t_tol=1e-6, xy_tol=1e-6) -> bool:
        """Field-wise equality with tolerances on timestamps and coordinates."""
        if (self.modality, self.user_id, self.session, self.label) != (
                other.modality, other.user_id, other.session, other.label):
            return False
        if len(self) != len(other):
            return False
        if (self.pressure is None) != (other.pressure is None):
            return False
        if self.pressure is not None and not np.allclose(
                self.pressure, other.pressure, rtol=0, atol=1e-9):
            return False
        return (np.array_equal(self.pen_down, other.pen_down)
                and np.allclose(self.t, other.t, rtol=0, atol=t_tol)
                and np.allclose(self.x, other.x, rtol=0, atol=xy_tol)
                and np.allclose(self.y, other.y, rtol=0, atol=xy_tol))


def _frozen(values, dtype):
    arr = np.array(values, dtype=dtype).reshape(-1)
    arr.flags.writeable = False
    return arr


def from_samples(samples, **meta) -> RawSignature:
    """Build a RawSignature from an iterable of SamplePoint-like tuples."""
    samples = list(samples)
    pressures = [s[3] for s in samples]
    if all(p is None for p in pressures):
        pressure = None
    elif any(p is None for p in pressures):
        raise ValueError("pressure must be available for all samples or none")
    else:
        pressure = pressures
    return RawSignature(
        t=[s[0] for s in samples], x=[s[1] for s in samples],
        y=[s[2] for s in samples], pen_down=[bool(s[4]) for s in samples],
        pressure=pressure, **meta)


# -- parsing ---------------------------------------------------------------

def _float(token, line, what):
    try:
        v = float(token)
    except ValueError:
        raise ValueOutOfRange(f"{what} is not a number: {token!r}", line) from None
    if not math.isfinite(v):
        raise ValueOutOfRange(f"{what} is not finite: {token!r}", line)
    return v


def _check_time(t, prev, line):
    if t < 0:
        raise ValueOutOfRange(f"negative timestamp {t}", line)
    if prev is not None and t <= prev:
        raise NonMonotonicTime(f"timestamp {t} does not exceed {prev}", line)


def _decode(data) -> list[str]:
    if isinstance(data, str):
        text = data
    else:
        try:
            text = bytes(data).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedHeader(f"input is not UTF-8 ({exc.reason})", 1) from None
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return [ln.rstrip("\r") for ln in lines]


def parse_signature(data, format_hint: SourceFormat | str | None = None,
                    **meta) -> RawSignature:
    """Parse canonical or SVC-style signature text.

    ``data`` may be ``bytes`` or ``str``. Without a hint the format is sniffed
    from the first token (``SIGV1`` means canonical). Keyword arguments
    (``user_id``, ``session``, ``label``, ``modality``) fill identity
    metadata for SVC files, which do not carry any.
    """
    lines = _decode(data)
    if not lines or not lines[0].strip():
        raise MalformedHeader("empty input", 1)
    if format_hint is None:
        fmt = (SourceFormat.CANONICAL if lines[0].split()[0] == "SIGV1"
               else SourceFormat.SVC)
    else:
        fmt = SourceFormat(format_hint)
    if fmt is SourceFormat.CANONICAL:
        if meta:
            raise TypeError("canonical files carry their own metadata")
        return _parse_canonical(lines)
    return _parse_svc(lines, **meta)


def _parse_canonical(lines) -> RawSignature:
    head = lines[0].split(" ")
    if len(head) != 6 or head[0] != "SIGV1":
        raise MalformedHeader(
            "expected 'SIGV1 <modality> <count> <user_id> <session> <label>'", 1)
    _, modality, count, user_id, session, label = head
    try:
        modality = Modality(modality)
    except ValueError:
        raise MalformedHeader(f"unknown modality {modality!r}", 1) from None
    try:
        label = Label(label)
    except ValueError:
        raise MalformedHeader(f"unknown label {label!r}", 1) from None
    if not count.isdigit() or not session.isdigit() or int(session) < 1:
        raise MalformedHeader("sample count and session must be unsigned integers", 1)
    count = int(count)
    if count == 0:
        raise SampleCountMismatch("header declares zero samples", 1)
    rows = lines[1:]
    if len(rows) != count:
        raise SampleCountMismatch(
            f"header declares {count} samples, found {len(rows)}",
            min(len(rows), count) + 1 + (len(rows) > count))

    t, x, y, p, down = [], [], [], [], []
    prev = None
    for k, row in enumerate(rows):
        ln = k + 2
        tok = row.split(" ")
        if len(tok) != 5:
            raise ValueOutOfRange(f"expected 5 fields, got {len(tok)}", ln)
        tk = _float(tok[0], ln, "t")
        _check_time(tk, prev, ln)
        prev = tk
        pk = _float(tok[3], ln, "pressure")
        if pk == -1:
            pk = None
        elif modality is Modality.FINGER:
            raise ValueOutOfRange("finger samples must have pressure -1", ln)
        elif not 0 <= pk <= 1:
            raise ValueOutOfRange(f"pressure {pk} outside [0, 1]", ln)
        if tok[4] not in ("0", "1"):
            raise ValueOutOfRange(f"pen state must be 0 or 1, got {tok[4]!r}", ln)
        if modality is Modality.FINGER and tok[4] == "0":
            raise ValueOutOfRange("finger signatures cannot contain pen-up samples", ln)
        if k > 0 and (pk is None) != (p[-1] is None):
            raise ValueOutOfRange("pressure must be available for all samples or none", ln)
        t.append(tk)
        x.append(_float(tok[1], ln, "x"))
        y.append(_float(tok[2], ln, "y"))
        p.append(pk)
        down.append(tok[4] == "1")
    return RawSignature(
        t=t, x=x, y=y, pen_down=down, pressure=None if p[0] is None else p,
        modality=modality, user_id=user_id, session=int(session), label=label,
        source_format=SourceFormat.CANONICAL)


def _parse_svc(lines, user_id="unknown", session=1, label=Label.GENUINE,
               modality=Modality.PEN) -> RawSignature:
    head = lines[0].split()
    if len(head) != 1 or not head[0].isdigit():
        raise MalformedHeader("expected a sample count on the first line", 1)
    count = int(head[0])
    rows = lines[1:]
    if count == 0:
        raise SampleCountMismatch("header declares zero samples", 1)
    if len(rows) != count:
        raise SampleCountMismatch(
            f"header declares {count} samples, found {len(rows)}",
            min(len(rows), count) + 1 + (len(rows) > count))
    modality = Modality(modality)
    t, x, y, down = [], [], [], []
    prev = None
    for k, row in enumerate(rows):
        ln = k + 2
        tok = row.split()
        if len(tok) < 4:
            raise ValueOutOfRange(f"expected at least 4 fields, got {len(tok)}", ln)
        try:
            ms = int(tok[2])
        except ValueError:
            raise ValueOutOfRange(f"timestamp must be integer ms: {tok[2]!r}", ln) from None
        if prev is not None and ms <= prev:
            raise NonMonotonicTime(f"timestamp {ms} does not exceed {prev}", ln)
        prev = ms
        if tok[3] not in ("0", "1"):
            raise ValueOutOfRange(f"button must be 0 or 1, got {tok[3]!r}", ln)
        if modality is Modality.FINGER and tok[3] == "0":
            raise ValueOutOfRange("finger signatures cannot contain pen-up samples", ln)
        t.append(ms)
        x.append(_float(tok[0], ln, "x"))
        y.append(_float(tok[1], ln, "y"))
        down.append(tok[3] == "1")
    t0 = t[0]
    secs = [(v - t0) / 1000.0 for v in t]
    return RawSignature(
        t=secs, x=x, y=y, pen_down=down, pressure=None, modality=modality,
        user_id=user_id, session=int(session), label=Label(label),
        source_format=SourceFormat.SVC)


def read_signature(path, **kwargs) -> RawSignature:
    return parse_signature(Path(path).read_bytes(), **kwargs)


# -- writing ---------------------------------------------------------------

def _num(v: float) -> str:
    s = repr(float(v))
    return "0.0" if s == "-0.0" else s


def write_signature(sig: RawSignature) -> bytes:
    """Serialize to the canonical format; float values are written losslessly."""
    out = [f"SIGV1 {sig.modality.value} {len(sig)} {sig.user_id} "
           f"{sig.session} {sig.label.value}"]
    p = sig.pressure
    for i in range(len(sig)):
        pv = "-1" if p is None else _num(p[i])
        out.append(f"{_num(sig.t[i])} {_num(sig.x[i])} {_num(sig.y[i])} {pv} "
                   f"{int(bool(sig.pen_down[i]))}")
    return ("\n".join(out) + "\n").encode("utf-8")


def save_signature(sig: RawSignature, path) -> None:
    Path(path).write_bytes(write_signature(sig))


# -- manifests -------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    user_id: str
    split: str
    path: Path
    modality: Modality
    session: int
    label: Label
    order: int  # row position, used for deterministic tie-breaking

    def load(self) -> RawSignature:
        sig = read_signature(self.path) if _is_canonical(self.path) else read_signature(
            self.path, format_hint=SourceFormat.SVC, user_id=self.user_id,
            session=self.session, label=self.label, modality=self.modality)
        return sig


def _is_canonical(path) -> bool:
    with open(path, "rb") as fh:
        return fh.read(5) == b"SIGV1"


@dataclass
class UserEntries:
    user_id: str
    split: str
    entries: list[ManifestEntry] = field(default_factory=list)

    def select(self, modality=None, label=None, session=None, min_session=None):
        out = []
        for e in self.entries:
            if modality is not None and e.modality is not Modality(modality):
                continue
            if label is not None and e.label is not Label(label):
                continue
            if session is not None and e.session != session:
                continue
            if min_session is not None and e.session < min_session:
                continue
            out.append(e)
        return sorted(out, key=lambda e: (e.session, e.order))


@dataclass
class DatasetManifest:
    root: Path
    users: dict[str, UserEntries]

    def __iter__(self) -> Iterator[UserEntries]:
        return iter(self.users[u] for u in sorted(self.users))

    def split(self, name) -> list[UserEntries]:
        return [u for u in self if u.split == name]

    @property
    def n_entries(self) -> int:
        return sum(len(u.entries) for u in self.users.values())


def load_manifest(root, check_files=True) -> DatasetManifest:
    """Read ``<root>/manifest.tsv``.

    Every referenced file must exist and parse (unless ``check_files`` is
    false); the dev/eval split comes from the manifest only.
    """
    root = Path(root)
    mpath = root / MANIFEST_NAME
    if not mpath.is_file():
        raise MissingManifestFile(f"no {MANIFEST_NAME} under {root}")
    users: dict[str, UserEntries] = {}
    seen_paths = set()
    lines = mpath.read_text(encoding="utf-8").splitlines()
    order = 0
    for ln, line in enumerate(lines, 1):
        if not line.strip() or line.startswith("#"):
            continue
        cols = line.split("\t")
        if tuple(cols) == MANIFEST_COLUMNS:
            continue
        if len(cols) != len(MANIFEST_COLUMNS):
            raise SignatureFormatError(
                f"{mpath}: expected {len(MANIFEST_COLUMNS)} tab-separated columns", ln)
        user_id, split, rel, modality, session, label = cols
        if split not in ("dev", "eval"):
            raise SignatureFormatError(f"{mpath}: split must be dev or eval", ln)
        try:
            entry = ManifestEntry(user_id, split, root / rel, Modality(modality),
                                  int(session), Label(label), order)
        except ValueError as exc:
            raise SignatureFormatError(f"{mpath}: {exc}", ln) from None
        order += 1
        if entry.path in seen_paths:
            raise DuplicateUserId(f"{mpath}:{ln}: file {rel} listed twice")
        seen_paths.add(entry.path)
        if not entry.path.is_file():
            raise DanglingReference(f"{mpath}:{ln}: missing file {rel}")
        if check_files:
            try:
                sig = entry.load()
            except SignatureFormatError as exc:
                raise SignatureFormatError(f"{entry.path}: {exc}") from exc
            if sig.modality is not entry.modality:
                raise SignatureFormatError(
                    f"{mpath}: {rel} is {sig.modality.value}, manifest says "
                    f"{entry.modality.value}", ln)
        user = users.get(user_id)
        if user is None:
            user = users[user_id] = UserEntries(user_id, split)
        elif user.split != split:
            raise DuplicateUserId(
                f"{mpath}:{ln}: user {user_id} appears in both dev and eval")
        user.entries.append(entry)
    return DatasetManifest(root, users)


def write_manifest(root, rows) -> Path:
    """Write ``manifest.tsv``; ``rows`` are (user_id, split, relpath, modality,
    session, label) tuples."""
    root = Path(root)
    lines = ["\t".join(MANIFEST_COLUMNS)]
    for r in rows:
        user_id, split, rel, modality, session, label = r
        lines.append("\t".join([user_id, split, str(rel), Modality(modality).value,
                                str(int(session)), Label(label).value]))
    path = root / MANIFEST_NAME
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
