"""HTTP session service: lifecycle, event streaming, replay guarantees."""

import json
import time
from dataclasses import replace

import pytest
from fastapi.testclient import TestClient

from molmimo import harness, service


@pytest.fixture()
def client():
    app = service.create_app(console_dir=None)
    with TestClient(app) as c:
        yield c


def make_session(client, time_scale=1e6, **overrides):
    body = {"time_scale": time_scale, **overrides}
    r = client.post("/api/sessions", json=body)
    assert r.status_code == 200, r.text
    return r.json()["id"]


def wait_done(client, sid, timeout=30.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        state = client.get(f"/api/sessions/{sid}").json()["state"]
        if state in ("done", "failed"):
            return state
        time.sleep(0.02)
    raise TimeoutError(f"session {sid} never finished")


def collect(client, sid, start=0):
    """Drain the event stream; returns (events, closing marker)."""
    events, closing = [], None
    with client.stream("GET", f"/api/sessions/{sid}/events?from={start}") as resp:
        assert resp.status_code == 200
        for line in resp.iter_lines():
            if line.startswith("data: "):
                payload = json.loads(line[len("data: "):])
                if "seq" in payload:
                    events.append(payload)
                else:
                    closing = payload
    return events, closing


def run_session(client, text="abcdef", **overrides):
    sid = make_session(client, **overrides)
    r = client.post(f"/api/sessions/{sid}/message", json={"text": text})
    assert r.status_code == 202, r.text
    assert wait_done(client, sid) == "done"
    return sid


# =====================================================================
# SESSION LIFECYCLE
# =====================================================================

def test_defaults_create_idle_session(client):
    r = client.post("/api/sessions", json={})
    assert r.status_code == 200
    body = r.json()
    assert body["state"] == "idle"
    assert body["mode"] == "mimo"
    assert body["time_scale"] == service.DEFAULT_TIME_SCALE


def test_sessions_get_distinct_ids(client):
    a = make_session(client)
    b = make_session(client)
    assert a != b
    listed = {s["id"] for s in client.get("/api/sessions").json()}
    assert {a, b} <= listed


def test_invalid_config_is_bad_request(client):
    for body in ({"mode": "duplex"}, {"seed": -3}, {"warp": 1},
                 {"time_scale": 0}):
        r = client.post("/api/sessions", json=body)
        assert r.status_code == 400
        assert set(r.json()) == {"error", "detail"}


def test_unknown_session_is_not_found(client):
    assert client.get("/api/sessions/nope").status_code == 404
    assert client.get("/api/sessions/nope/report").status_code == 404
    r = client.post("/api/sessions/nope/message", json={"text": "hi"})
    assert r.status_code == 404
    assert r.json()["error"] == "not_found"


def test_unsupported_text_is_rejected(client):
    sid = make_session(client)
    r = client.post(f"/api/sessions/{sid}/message", json={"text": "É"})
    assert r.status_code == 400
    assert "character" in r.json()["detail"].lower()
    # session still usable afterwards
    assert client.get(f"/api/sessions/{sid}").json()["state"] == "idle"


def test_busy_session_conflicts(client):
    sid = make_session(client, time_scale=1.0)   # slow replay keeps it busy
    r = client.post(f"/api/sessions/{sid}/message", json={"text": "abcdef"})
    assert r.status_code == 202
    r = client.post(f"/api/sessions/{sid}/message", json={"text": "xyz"})
    assert r.status_code == 409
    assert r.json()["error"] == "conflict"


def test_report_only_after_completion(client):
    sid = make_session(client)
    assert client.get(f"/api/sessions/{sid}/report").status_code == 409
    client.post(f"/api/sessions/{sid}/message", json={"text": "abcdef"})
    wait_done(client, sid)
    rpt = client.get(f"/api/sessions/{sid}/report").json()
    assert rpt["message_decoded"] == "abcdef"
    assert rpt["air_time_s"] == 63.0


# =====================================================================
# EVENT LOG CONTENT
# =====================================================================

def test_characters_alternate_across_receivers(client):
    sid = run_session(client, "abcdef", mode="mimo", seed=1)
    events, _ = collect(client, sid)
    chars = [(e["data"]["rx"], e["data"]["char"]) for e in events
             if e["kind"] == "char"]
    assert chars == [(0, "a"), (1, "b"), (0, "c"), (1, "d"), (0, "e"), (1, "f")]
    done = events[-1]
    assert done["kind"] == "frame_done"
    assert done["data"]["report"]["air_time_s"] == 63.0


def test_log_is_dense_ordered_and_causal(client):
    sid = run_session(client, "abcdef", mode="mimo", seed=1)
    events, closing = collect(client, sid)
    assert closing == {"state": "done"}
    seqs = [e["seq"] for e in events]
    assert seqs == list(range(len(events)))
    times = [e["t_sim"] for e in events]
    assert all(a <= b for a, b in zip(times, times[1:]))
    # a character never precedes the symbol decisions it is built from
    last_symbol = {}
    for e in events:
        if e["kind"] == "symbol":
            last_symbol[(e["data"]["rx"], e["data"]["slot"])] = e["t_sim"]
        elif e["kind"] == "char":
            rx, idx = e["data"]["rx"], e["data"]["index"]
            for slot in range(5 * idx, 5 * idx + 5):
                assert last_symbol[(rx, slot)] <= e["t_sim"]


def test_sample_rate_is_capped(client):
    sid = run_session(client, "ab", mode="mimo", seed=0)
    events, _ = collect(client, sid)
    per_rx = {}
    for e in events:
        if e["kind"] == "sample":
            per_rx.setdefault(e["data"]["rx"], []).append(e["t_sim"])
    for ts in per_rx.values():
        buckets = {}
        for t in ts:
            buckets[int(t)] = buckets.get(int(t), 0) + 1
        assert max(buckets.values()) <= 10


def test_replay_matches_direct_run(client):
    """The streamed log is a pure function of the run, not of pacing."""
    sid = run_session(client, "abcdef", mode="mimo", seed=1)
    streamed, _ = collect(client, sid)
    cfg = replace(harness.RunConfig(), mode="mimo", seed=1, message="abcdef")
    expected = [e.to_dict() for e in
                service.build_events(harness.run_link_detailed(cfg))]
    assert streamed == expected


# =====================================================================
# STREAM RESUMPTION
# =====================================================================

def test_full_replay_from_zero(client):
    sid = run_session(client, "hi", mode="mimo", seed=2)
    first, _ = collect(client, sid)
    second, _ = collect(client, sid)
    assert first == second
    assert len(first) > 0


def test_resume_mid_stream_loses_nothing(client):
    sid = run_session(client, "abcdef", mode="mimo", seed=1)
    full, _ = collect(client, sid)
    mid = len(full) // 3
    tail, closing = collect(client, sid, start=mid)
    assert tail == full[mid:]
    assert closing == {"state": "done"}


def test_past_end_yields_only_the_closing_marker(client):
    sid = run_session(client, "hi", mode="mimo", seed=2)
    full, _ = collect(client, sid)
    tail, closing = collect(client, sid, start=len(full))
    assert tail == []
    assert closing == {"state": "done"}


def test_concurrent_sessions_stay_isolated(client):
    a = make_session(client, mode="mimo", seed=1)
    b = make_session(client, mode="siso", seed=2)
    client.post(f"/api/sessions/{a}/message", json={"text": "abcdef"})
    client.post(f"/api/sessions/{b}/message", json={"text": "hello."})
    assert wait_done(client, a) == "done"
    assert wait_done(client, b) == "done"
    for sid, mode, text in ((a, "mimo", "abcdef"), (b, "siso", "hello.")):
        events, _ = collect(client, sid)
        cfg = replace(harness.RunConfig(), mode=mode,
                      seed=client.get(f"/api/sessions/{sid}").json()["seed"],
                      message=text)
        expected = [e.to_dict() for e in
                    service.build_events(harness.run_link_detailed(cfg))]
        assert events == expected
