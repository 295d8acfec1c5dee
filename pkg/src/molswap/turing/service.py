"""HTTP service for the 20-round discrimination test.

Sessions live in memory and are backed by an append-only line-delimited
JSON log; replaying the log reconstructs every session exactly. Client
payloads never contain the real/generated assignment; correctness is
revealed only by the result endpoint after all rounds are answered.
"""

from __future__ import annotations

import random
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from ..chem import parse_smiles
from ..io_utils import append_ldjson, read_ldjson
from .pairs import PairRecord, render_molecule

EXPERTISE_LEVELS = ("high_school", "undergraduate", "postgraduate")
ROUNDS_PER_SESSION = 20


@dataclass
class RoundRecord:
    pair_id: str
    formula: str
    real_position: str  # "left" | "right"; never sent to the client
    real_smiles: str
    generated_smiles: str
    choice: str | None = None
    correct: bool | None = None
    served_at: float | None = None
    answered_at: float | None = None


@dataclass
class TuringSession:
    session_id: str
    expertise: str
    rounds: list[RoundRecord]
    created_at: float

    def answered(self) -> int:
        return sum(1 for r in self.rounds if r.choice is not None)

    def complete(self) -> bool:
        return self.answered() >= len(self.rounds)


class ApiError(Exception):
    def __init__(self, status: int, detail: str):
        self.status = status
        self.detail = detail


class SessionStore:
    """Session state plus the append-only response log."""

    def __init__(
        self,
        pool: list[PairRecord],
        log_path: str | Path,
        seed: int | None = None,
        rounds_per_session: int = ROUNDS_PER_SESSION,
    ):
        if len(pool) < rounds_per_session:
            raise ValueError(
                f"pair pool has {len(pool)} pairs; {rounds_per_session} needed"
            )
        self.pool = list(pool)
        self.log_path = Path(log_path)
        self.rounds_per_session = rounds_per_session
        self._rng = random.Random(seed)
        self._lock = threading.Lock()
        self.sessions: dict[str, TuringSession] = {}
        self._views: dict[str, dict] = {}
        if self.log_path.exists():
            self._replay()

    # -- persistence -------------------------------------------------------
    def _replay(self) -> None:
        for event in read_ldjson(self.log_path):
            if event["type"] == "session":
                rounds = [
                    RoundRecord(
                        pair_id=r["pair_id"],
                        formula=r["formula"],
                        real_position=r["real_position"],
                        real_smiles=r["real_smiles"],
                        generated_smiles=r["generated_smiles"],
                    )
                    for r in event["rounds"]
                ]
                self.sessions[event["session_id"]] = TuringSession(
                    event["session_id"], event["expertise"], rounds,
                    event["created_at"],
                )
            elif event["type"] == "answer":
                session = self.sessions[event["session_id"]]
                record = session.rounds[event["round"] - 1]
                record.choice = event["choice"]
                record.correct = event["choice"] == record.real_position
                record.answered_at = event["answered_at"]

    # -- operations --------------------------------------------------------
    def create_session(self, expertise: str) -> TuringSession:
        if expertise not in EXPERTISE_LEVELS:
            raise ApiError(400, f"expertise must be one of {EXPERTISE_LEVELS}")
        with self._lock:
            session_id = f"{self._rng.getrandbits(64):016x}"
            chosen = self._rng.sample(self.pool, self.rounds_per_session)
            rounds = [
                RoundRecord(
                    pair_id=p.pair_id,
                    formula=p.formula,
                    real_position=self._rng.choice(("left", "right")),
                    real_smiles=p.real_smiles,
                    generated_smiles=p.generated_smiles,
                )
                for p in chosen
            ]
            session = TuringSession(session_id, expertise, rounds, time.time())
            self.sessions[session_id] = session
            append_ldjson(
                self.log_path,
                {
                    "type": "session",
                    "session_id": session_id,
                    "expertise": expertise,
                    "created_at": session.created_at,
                    "rounds": [
                        {
                            "pair_id": r.pair_id,
                            "formula": r.formula,
                            "real_position": r.real_position,
                            "real_smiles": r.real_smiles,
                            "generated_smiles": r.generated_smiles,
                        }
                        for r in rounds
                    ],
                },
            )
            return session

    def _session(self, session_id: str) -> TuringSession:
        session = self.sessions.get(session_id)
        if session is None:
            raise ApiError(404, "unknown session")
        return session

    def _view(self, smiles: str) -> dict:
        if smiles not in self._views:
            self._views[smiles] = render_molecule(parse_smiles(smiles))
        return self._views[smiles]

    def current_payload(self, session_id: str) -> dict:
        with self._lock:
            session = self._session(session_id)
            if session.complete():
                raise ApiError(409, "session complete")
            index = session.answered()
            record = session.rounds[index]
            if record.served_at is None:
                record.served_at = time.time()
            real_view = self._view(record.real_smiles)
            generated_view = self._view(record.generated_smiles)
            left, right = (
                (real_view, generated_view)
                if record.real_position == "left"
                else (generated_view, real_view)
            )
            return {
                "round": index + 1,
                "progress": {"current": index + 1,
                             "total": self.rounds_per_session},
                "pair_id": record.pair_id,
                "formula": record.formula,
                "left": left,
                "right": right,
            }

    def answer(self, session_id: str, pair_id: str, choice: str) -> dict:
        if choice not in ("left", "right"):
            raise ApiError(400, "choice must be 'left' or 'right'")
        with self._lock:
            session = self._session(session_id)
            if session.complete():
                raise ApiError(409, "session complete")
            index = session.answered()
            record = session.rounds[index]
            if record.pair_id != pair_id:
                raise ApiError(409, "pair_id does not match the current round")
            record.choice = choice
            record.correct = choice == record.real_position
            record.answered_at = time.time()
            append_ldjson(
                self.log_path,
                {
                    "type": "answer",
                    "session_id": session_id,
                    "round": index + 1,
                    "pair_id": pair_id,
                    "choice": choice,
                    "answered_at": record.answered_at,
                },
            )
            return {"accepted": True,
                    "progress": {"current": session.answered(),
                                 "total": self.rounds_per_session}}

    def result(self, session_id: str) -> dict:
        with self._lock:
            session = self._session(session_id)
            if not session.complete():
                raise ApiError(409, "session incomplete")
            rounds = [
                {
                    "round": k + 1,
                    "pair_id": r.pair_id,
                    "choice": r.choice,
                    "correct": r.correct,
                }
                for k, r in enumerate(session.rounds)
            ]
            correct = sum(1 for r in session.rounds if r.correct)
            return {
                "accuracy": correct / len(session.rounds),
                "correct": correct,
                "total": len(session.rounds),
                "rounds": rounds,
            }


class _SessionRequest(BaseModel):
    expertise: str


class _AnswerRequest(BaseModel):
    pair_id: str
    choice: str


def create_app(
    store: SessionStore,
    ui_dir: str | Path | None = None,
    allowed_origin: str | None = None,
) -> FastAPI:
    app = FastAPI(title="molswap discrimination test")
    if allowed_origin:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=[allowed_origin],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.exception_handler(ApiError)
    async def api_error_handler(_, exc: ApiError):
        return JSONResponse({"detail": exc.detail}, status_code=exc.status)

    @app.post("/api/session", status_code=201)
    def create_session(body: _SessionRequest):
        session = store.create_session(body.expertise)
        return {"session_id": session.session_id,
                "rounds": store.rounds_per_session}

    @app.get("/api/session/{session_id}/round")
    def current_round(session_id: str):
        return store.current_payload(session_id)

    @app.post("/api/session/{session_id}/round")
    def answer(session_id: str, body: _AnswerRequest):
        return store.answer(session_id, body.pair_id, body.choice)

    @app.get("/api/session/{session_id}/result")
    def result(session_id: str):
        return store.result(session_id)

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app
