"""Data loading and writing for the Visit Optimizer.

Inputs:
  - trajectories/ : one JSON Lines file per session, {"lng", "lat", "ts"} per line,
                    named <user>_<YYYY-MM-DD>.jsonl
  - pois.json     : [{"id", "name", "cat", "lng", "lat", "source"}, ...]
  - annotations/  : one file per user, {session_id: [{"bt", "et", "poi_id"}, ...]}
  - popularity.json : {poi_id: check-in count}

Outputs:
  - bank.json, weights.json, candidates/<session>.json, assignments/<session>.json

Notes:
Missing files raise IoError, malformed content raises ParseError naming the
file (and line for JSON Lines). Unknown keys in the run config are warned about
and ignored.
"""

from __future__ import annotations

import datetime as dt
import json
from pathlib import Path
from typing import TYPE_CHECKING, Any, Iterable, Sequence

from .errors import EmptySession, IoError, ParseError
from .features import FeatureBank
from .geo import PoiDatabase, build_session
from .models import (
    AnnotatedSession,
    CandidateSet,
    Poi,
    PopularityTable,
    Session,
    TrackPoint,
    VisitRecord,
    WeightVector,
)
from .utils import dumps_exact

if TYPE_CHECKING:
    from logging import Logger

RUN_CONFIG_KEYS = {
    "poi_db",
    "trajectories",
    "annotations",
    "popularity",
    "bank",
    "weights",
    "output",
    "param_sets",
    "features",
    "backend",
    "method",
    "methods",
    "weight_source",
    "grid",
    "eval_mode",
    "setting",
    "folds",
    "seed",
    "timezone_offset",
    "overlap_policy",
    "n_jobs",
    "world",
}


class DataLoader:
    """Reads and writes every file format of the pipeline."""

    def __init__(self, logger):
        self.logger: Logger = logger

    # -------- Generic JSON --------
    def load_json(self, file_path: str | Path) -> Any:
        path = Path(file_path)
        if not path.exists():
            self.logger.error(f"❌ File not found: {file_path}")
            raise IoError(f"file not found: {file_path}")
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, path=path, line=exc.lineno) from None
        except OSError as exc:
            raise IoError(f"cannot read {file_path}: {exc}") from exc
        self.logger.debug(f"📘 Loaded file: {file_path}")
        return data

    def write_json(self, file_path: str | Path, data: Any, *, exact: bool = False) -> Path:
        """Write `data` as indented JSON; `exact` keeps 17 significant digits for floats."""
        text = dumps_exact(data) if exact else json.dumps(data, indent=2, ensure_ascii=False)
        return self.write_text(file_path, text + "\n")

    def write_text(self, file_path: str | Path, text: str) -> Path:
        path = Path(file_path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", encoding="utf-8", newline="\n") as f:
                f.write(text)
        except OSError as exc:
            self.logger.error(f"❌ Cannot write {file_path}: {exc}")
            raise IoError(f"cannot write {file_path}: {exc}") from exc
        self.logger.debug(f"💾 Wrote file: {file_path}")
        return path

    # -------- Trajectories --------
    def load_trajectory(self, file_path: str | Path) -> list[TrackPoint]:
        path = Path(file_path)
        if not path.exists():
            self.logger.error(f"❌ File not found: {file_path}")
            raise IoError(f"file not found: {file_path}")
        points: list[TrackPoint] = []
        with open(path, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                if not line.strip():
                    continue
                try:
                    item = json.loads(line)
                    points.append(TrackPoint(lng=float(item["lng"]), lat=float(item["lat"]), ts=int(item["ts"])))
                except json.JSONDecodeError as exc:
                    raise ParseError(exc.msg, path=path, line=lineno) from None
                except (KeyError, TypeError, ValueError) as exc:
                    raise ParseError(f"invalid track-point: {exc}", path=path, line=lineno) from None
        return points

    def write_trajectory(self, file_path: str | Path, session: Session) -> Path:
        lines = [json.dumps({"lng": p.lng, "lat": p.lat, "ts": p.ts}) for p in session.points]
        return self.write_text(file_path, "\n".join(lines) + "\n")

    @staticmethod
    def split_session_name(stem: str) -> tuple[str, dt.date]:
        """'u01_2024-01-15' -> ('u01', date(2024, 1, 15))."""
        user, sep, day = stem.rpartition("_")
        if not sep or not user:
            raise ValueError(f"expected <user>_<YYYY-MM-DD>, got {stem!r}")
        return user, dt.date.fromisoformat(day)

    def load_trajectories(self, path: str | Path, tz_offset_minutes: int = 0) -> dict[str, list[Session]]:
        """Sessions grouped by user, from a directory of .jsonl files (or a single file)."""
        root = Path(path)
        if not root.exists():
            self.logger.error(f"❌ Path not found: {path}")
            raise IoError(f"path not found: {path}")
        files = [root] if root.is_file() else sorted(root.glob("*.jsonl"))
        if not files:
            self.logger.warning(f"⚠️ No trajectory files under {path}")

        out: dict[str, list[Session]] = {}
        for file in files:
            try:
                user, day = self.split_session_name(file.stem)
            except ValueError as exc:
                raise ParseError(str(exc), path=file) from None
            try:
                session = build_session(
                    self.load_trajectory(file), day, session_id=file.stem, tz_offset_minutes=tz_offset_minutes
                )
            except EmptySession:
                self.logger.warning(f"⚠️ {file.name}: no track-points on {day.isoformat()}; skipped")
                continue
            out.setdefault(user, []).append(session)
        n = sum(len(v) for v in out.values())
        self.logger.info(f"✅ Loaded {n} session(s) for {len(out)} user(s).")
        return out

    # -------- POIs --------
    def load_pois(self, file_path: str | Path) -> PoiDatabase:
        raw = self.load_json(file_path)
        if not isinstance(raw, list):
            raise ParseError("expected a JSON array of POIs", path=file_path)
        pois: list[Poi] = []
        for idx, item in enumerate(raw):
            try:
                pois.append(
                    Poi(
                        id=str(item["id"]),
                        name=str(item.get("name", "")),
                        cat=str(item["cat"]),
                        lng=float(item["lng"]),
                        lat=float(item["lat"]),
                        source=str(item.get("source", "common")),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"POI #{idx}: {exc}", path=file_path) from None
        try:
            db = PoiDatabase(pois)
        except ValueError as exc:
            raise ParseError(str(exc), path=file_path) from None
        self.logger.info(f"✅ Loaded {len(db)} POIs.")
        return db

    def write_pois(self, file_path: str | Path, pois: Iterable[Poi]) -> Path:
        rows = [
            {"id": p.id, "name": p.name, "cat": p.cat, "lng": p.lng, "lat": p.lat, "source": p.source}
            for p in sorted(pois, key=lambda p: p.id)
        ]
        return self.write_json(file_path, rows)

    # -------- Annotations --------
    def load_annotations(self, path: str | Path) -> dict[str, list[VisitRecord]]:
        """Session id -> visits, from one annotation file or a directory of them."""
        root = Path(path)
        if not root.exists():
            self.logger.error(f"❌ Path not found: {path}")
            raise IoError(f"path not found: {path}")
        files = [root] if root.is_file() else sorted(root.glob("*.json"))
        out: dict[str, list[VisitRecord]] = {}
        for file in files:
            raw = self.load_json(file)
            if not isinstance(raw, dict):
                raise ParseError("expected an object mapping session ids to visit arrays", path=file)
            for session_id, visits in raw.items():
                try:
                    records = [VisitRecord(bt=int(v["bt"]), et=int(v["et"]), poi_id=str(v["poi_id"])) for v in visits]
                except (KeyError, TypeError, ValueError) as exc:
                    raise ParseError(f"session {session_id}: {exc}", path=file) from None
                out[str(session_id)] = sorted(records, key=lambda r: (r.bt, r.et))
        return out

    def write_annotations(self, file_path: str | Path, sessions: Sequence[AnnotatedSession]) -> Path:
        data = {
            ann.id: [{"bt": v.bt, "et": v.et, "poi_id": v.poi_id} for v in ann.visits] for ann in sessions
        }
        return self.write_json(file_path, data)

    def load_corpus(
        self, trajectories: str | Path, annotations: str | Path, tz_offset_minutes: int = 0
    ) -> dict[str, list[AnnotatedSession]]:
        """Join sessions with their annotations; unannotated sessions are skipped."""
        sessions = self.load_trajectories(trajectories, tz_offset_minutes)
        visits = self.load_annotations(annotations)
        out: dict[str, list[AnnotatedSession]] = {}
        for user, group in sorted(sessions.items()):
            joined = []
            for s in group:
                if s.id not in visits:
                    self.logger.warning(f"⚠️ Session {s.id} has no annotations; skipped")
                    continue
                joined.append(AnnotatedSession(session=s, visits=tuple(visits[s.id]), user_id=user))
            out[user] = joined
        return out

    # -------- Popularity --------
    def load_popularity(self, file_path: str | Path) -> PopularityTable:
        raw = self.load_json(file_path)
        if not isinstance(raw, dict):
            raise ParseError("expected an object mapping POI ids to counts", path=file_path)
        try:
            return PopularityTable({str(k): int(v) for k, v in raw.items()})
        except (TypeError, ValueError) as exc:
            raise ParseError(str(exc), path=file_path) from None

    def write_popularity(self, file_path: str | Path, table: PopularityTable) -> Path:
        return self.write_json(file_path, dict(sorted(table.checkins.items())))

    # -------- Trained artifacts --------
    def load_bank(self, file_path: str | Path) -> FeatureBank:
        raw = self.load_json(file_path)
        try:
            return FeatureBank.from_dict(raw)
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"invalid feature bank: {exc}", path=file_path) from None

    def write_bank(self, file_path: str | Path, bank: FeatureBank) -> Path:
        return self.write_json(file_path, bank.to_dict(), exact=True)

    def load_weights(self, file_path: str | Path) -> WeightVector:
        raw = self.load_json(file_path)
        try:
            if isinstance(raw, list):
                return WeightVector.from_flat(raw)
            return WeightVector(**{k: tuple(float(x) for x in v) for k, v in raw.items()})
        except (TypeError, ValueError) as exc:
            raise ParseError(f"invalid weights: {exc}", path=file_path) from None

    def write_weights(self, file_path: str | Path, weights: WeightVector) -> Path:
        data = {
            "w_s": list(weights.w_s),
            "w_sbar": list(weights.w_sbar),
            "w_v": list(weights.w_v),
            "w_t": list(weights.w_t),
            "w_y": list(weights.w_y),
        }
        return self.write_json(file_path, data, exact=True)

    # -------- Run configuration --------
    def load_run_config(self, file_path: str | Path) -> dict[str, Any]:
        raw = self.load_json(file_path)
        if not isinstance(raw, dict):
            raise ParseError("run config must be a JSON object", path=file_path)
        out = {}
        for key, value in raw.items():
            if key not in RUN_CONFIG_KEYS:
                self.logger.warning(f"⚠️ Unknown config key '{key}' ignored")
                continue
            out[key] = value
        return out

    # -------- Pipeline outputs --------
    def write_candidates(self, file_path: str | Path, session_id: str, cset: CandidateSet) -> Path:
        data = {
            "session": session_id,
            "stay_points": [
                {
                    "span": [sp.start, sp.end],
                    "lng": sp.lng,
                    "lat": sp.lat,
                    "bt": sp.bt,
                    "et": sp.et,
                    "st": sp.st,
                }
                for sp in cset.stay_points
            ],
            "overlap_pairs": [list(p) for p in sorted(cset.overlap_pairs)],
        }
        return self.write_json(file_path, data)
