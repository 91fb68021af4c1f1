"""Live demo service: run a frame and stream its progress as events.

The simulator computes a whole run up front, then replays it on a scaled
clock so a console can watch sprays fire, sensor voltages wiggle, symbol
decisions land and characters appear, exactly as the simulated timeline
ordered them.  Every event carries a monotonically increasing ``seq``;
clients that drop the stream reconnect with ``?from=<last seq + 1>`` and
lose nothing, because the full event log is retained for the session.

Wire format is server-sent events: one ``id:`` line with the sequence
number and one ``data:`` line with the event JSON per message, and a
final ``event: end`` marker once the session reaches a terminal state.

Sessions are single-shot: idle until a message is posted, transmitting
while the replay runs, then done (or failed).  Posting to a busy or
finished session is a conflict; a fresh session costs one POST.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field, replace
from pathlib import Path

from fastapi import FastAPI, Query
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles

from . import protocol
from .errors import InvalidParameter, MolmimoError
from .harness import RunConfig, nominal_rise, run_link_detailed

# Replay rate: simulated seconds that pass per wall-clock second.
DEFAULT_TIME_SCALE = 60.0

_KIND_ORDER = {"spray": 0, "sample": 1, "symbol": 2, "char": 3, "frame_done": 4}


@dataclass(frozen=True)
class Event:
    seq: int
    kind: str
    t_sim: float
    data: dict

    def to_dict(self) -> dict:
        return {"seq": self.seq, "kind": self.kind,
                "t_sim": round(self.t_sim, 6), "data": self.data}


def build_events(artifacts) -> list[Event]:
    """Flatten one finished run into a time-ordered event log."""
    timing = artifacts.timing
    raw = []
    for rec in artifacts.schedule:
        raw.append(("spray", rec.time,
                    {"tx": rec.link, "molecules": rec.molecules}))
    for rx, trace in enumerate(artifacts.voltages):
        for t, v in zip(trace.grid.times, trace.values):
            raw.append(("sample", float(t), {"rx": rx, "v": float(v)}))
    stats = artifacts.report.slot_stats
    for rx, slot_list in enumerate(stats):
        for st in slot_list:
            raw.append(("symbol", st.start + timing.symbol_period,
                        {"rx": rx, "slot": st.slot, "statistic": st.statistic,
                         "threshold": st.threshold, "bit": st.bit}))
    links = timing.links
    for rx in range(links):
        text = artifacts.report.rx_decoded[rx]
        for c, chr_ in enumerate(text):
            last_bit_slot = protocol.CODE_BITS * c + (protocol.CODE_BITS - 1)
            t_dec = stats[rx][last_bit_slot].start + timing.symbol_period
            raw.append(("char", t_dec,
                        {"rx": rx, "index": c, "char": chr_,
                         "position": c * links + rx}))
    raw.append(("frame_done", artifacts.grid.span_end,
                {"report": artifacts.report.to_dict()}))
    raw.sort(key=lambda e: (e[1], _KIND_ORDER[e[0]],
                            e[2].get("rx", -1), e[2].get("slot", -1)))
    return [Event(seq=i, kind=k, t_sim=t, data=d)
            for i, (k, t, d) in enumerate(raw)]


@dataclass
class Session:
    id: str
    config: RunConfig
    time_scale: float
    state: str = "idle"            # idle -> transmitting -> done | failed
    message: str | None = None
    error: str | None = None
    events: list = field(default_factory=list)
    released: int = 0
    report: dict | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)

    def status(self) -> dict:
        with self.lock:
            return {
                "id": self.id,
                "state": self.state,
                "mode": self.config.mode,
                "seed": self.config.seed,
                "backend": self.config.backend,
                "time_scale": self.time_scale,
                "message": self.message,
                "error": self.error,
                "events_total": len(self.events),
                "events_released": self.released,
            }


def _transmit(session: Session) -> None:
    """Worker thread: run the frame, then pace the event replay."""
    try:
        artifacts = run_link_detailed(session.config)
        events = build_events(artifacts)
        with session.lock:
            session.events = events
            session.report = artifacts.report.to_dict()
        t0_wall = time.monotonic()
        t0_sim = events[0].t_sim if events else 0.0
        for ev in events:
            due = t0_wall + (ev.t_sim - t0_sim) / session.time_scale
            delay = due - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            with session.lock:
                session.released += 1
        with session.lock:
            session.state = "done"
    except Exception as exc:   # failed runs must surface, not hang
        with session.lock:
            session.error = f"{type(exc).__name__}: {exc}"
            session.state = "failed"


def _sse(event: Event) -> str:
    return f"id: {event.seq}\ndata: {json.dumps(event.to_dict())}\n\n"


def _stream(session: Session, start: int):
    seq = max(start, 0)
    while True:
        with session.lock:
            released = session.released
            state = session.state
            total = len(session.events)
            batch = session.events[seq:released]
        for ev in batch:
            yield _sse(ev)
        seq += len(batch)
        if state in ("done", "failed") and seq >= total:
            yield f"event: end\ndata: {json.dumps({'state': state})}\n\n"
            return
        if not batch:
            time.sleep(0.02)


_SESSION_KEYS = {"mode", "seed", "backend", "particles", "ili_cancellation",
                 "noise", "time_scale"}


def create_app(console_dir: str | None = "frontend/dist") -> FastAPI:
    app = FastAPI(title="molmimo live link")
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])
    sessions: dict[str, Session] = {}

    def error(status: int, code: str, detail: str) -> JSONResponse:
        return JSONResponse(status_code=status,
                            content={"error": code, "detail": detail})

    def bad_request(detail: str) -> JSONResponse:
        return error(400, "bad_request", detail)

    def not_found(sid: str) -> JSONResponse:
        return error(404, "not_found", f"unknown session {sid!r}")

    @app.post("/api/sessions")
    def create_session(body: dict | None = None):
        body = body or {}
        unknown = set(body) - _SESSION_KEYS
        if unknown:
            return bad_request(f"unknown session keys: {sorted(unknown)}")
        time_scale = body.pop("time_scale", DEFAULT_TIME_SCALE)
        if not (isinstance(time_scale, (int, float)) and time_scale > 0):
            return bad_request(f"time_scale must be > 0, got {time_scale!r}")
        noise = body.pop("noise", 0.0)
        if not (isinstance(noise, (int, float)) and noise >= 0):
            return bad_request(f"noise must be >= 0, got {noise!r}")
        try:
            cfg = RunConfig(**body)
            if noise > 0:
                cfg = replace(cfg, sensor=replace(cfg.sensor,
                                                  noise_sigma=noise * nominal_rise(cfg)))
        except (MolmimoError, TypeError) as exc:
            return bad_request(str(exc))
        session = Session(id=uuid.uuid4().hex[:12], config=cfg,
                          time_scale=float(time_scale))
        sessions[session.id] = session
        return session.status()

    @app.get("/api/sessions")
    def list_sessions():
        return [s.status() for s in sessions.values()]

    @app.get("/api/sessions/{sid}")
    def get_session(sid: str):
        session = sessions.get(sid)
        if session is None:
            return not_found(sid)
        return session.status()

    @app.post("/api/sessions/{sid}/message")
    def post_message(sid: str, body: dict):
        session = sessions.get(sid)
        if session is None:
            return not_found(sid)
        text = body.get("text")
        if not isinstance(text, str):
            return bad_request("body must carry a 'text' string")
        try:
            protocol.encode_text(text, session.config.mode)
        except MolmimoError as exc:
            return bad_request(f"{type(exc).__name__}: {exc}")
        with session.lock:
            if session.state != "idle":
                return error(409, "conflict",
                             f"session is {session.state}; one message per session")
            session.state = "transmitting"
            session.message = protocol.normalize_text(text)
            session.config = replace(session.config, message=session.message)
        threading.Thread(target=_transmit, args=(session,), daemon=True).start()
        return JSONResponse(status_code=202, content=session.status())

    @app.get("/api/sessions/{sid}/events")
    def stream_events(sid: str, from_seq: int = Query(0, alias="from")):
        session = sessions.get(sid)
        if session is None:
            return not_found(sid)
        return StreamingResponse(_stream(session, from_seq),
                                 media_type="text/event-stream")

    @app.get("/api/sessions/{sid}/report")
    def get_report(sid: str):
        session = sessions.get(sid)
        if session is None:
            return not_found(sid)
        with session.lock:
            if session.state == "done":
                return session.report
            detail = session.error if session.state == "failed" else session.state
        return error(409, "conflict", f"report not available: {detail}")

    if console_dir is not None and Path(console_dir).is_dir():
        app.mount("/", StaticFiles(directory=console_dir, html=True),
                  name="console")

    return app


app = create_app()
