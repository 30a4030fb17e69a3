import json
import math

import pytest

import kinaffect as ka


def test_config_defaults_and_validation():
    c = ka.default_config()
    assert c["hop_s"] == 0.1
    assert c["window_s"] == 1.0
    assert ka.load_config({"ws_port": 9100})["ws_port"] == 9100
    assert ka.config_digest() == ka.config_digest(c)
    assert len(ka.config_digest()) == 64
    with pytest.raises(ka.Error) as info:
        ka.load_config({"window_s": 0.05})
    assert info.value.kind == "InvariantViolation"
    with pytest.raises(ka.Error) as info:
        ka.load_config({"windw_s": 1.0})
    assert info.value.kind == "ParseError"


def test_synth_is_deterministic_recording_text():
    a = ka.synth("anger", duration=2, seed=3)
    assert a == ka.synth("anger", duration=2, seed=3)
    lines = a.splitlines()
    assert len(lines) == 60
    rec = json.loads(lines[0])
    assert len(rec["persons"][0]["kp"]) == 17
    with pytest.raises(ka.Error) as info:
        ka.synth("boredom")
    assert info.value.kind == "InvalidLabel"


def test_replay_runs_a_full_session():
    rec = ka.synth("happiness", duration=15, seed=2)
    script = [
        {"cmd": "start", "t": 0},
        {"cmd": "teach_start", "label": "happiness", "t": 0.5},
        {"cmd": "explore", "t": 7},
    ]
    a = ka.replay(rec, script)
    assert a == ka.replay(rec, script)
    assert a["cosmos"] is not None
    assert len(a["history"]) > 100


def test_eval_recognizes_every_label():
    r = ka.run_eval(seed=1)
    for label in ka.LABELS:
        assert r["accuracy"][label] >= 0.9


def test_osc_round_trip_and_golden_bytes():
    data = ka.osc_encode("/a", [])
    assert data == b"/a\x00\x00,\x00\x00\x00"
    args = [7, 0.5, "mode", b"\x01\x02\x03"]
    address, back = ka.osc_decode(ka.osc_encode("/x/y", args))
    assert address == "/x/y"
    assert back == args
    with pytest.raises(ka.Error) as info:
        ka.osc_decode(b"/a\x00")
    assert info.value.kind == "MalformedPacket"


def test_live_session_emits_states_and_osc():
    s = ka.Session({"preparation_s": 1000})
    assert s.phase == "Idle"
    s.command("start", t=0)
    assert s.phase == "Preparation"
    states = []
    for line in ka.synth("sadness", duration=3, seed=5).splitlines():
        states += s.push(json.loads(line))
    assert s.hop_count == len(states) > 20
    last = states[-1]
    assert last["type"] == "state"
    emotion = last["persons"][0]["emotion"]
    assert len(emotion["dist"]) == len(last["labels"]) == 4
    assert math.isclose(sum(emotion["dist"]), 1.0, abs_tol=1e-9)
    assert emotion["top"] in ka.LABELS
    packets = s.drain_packets()
    assert packets and all(addr.startswith("/") for addr, _ in packets)
    assert s.drain_packets() == []
    with pytest.raises(ka.Error) as info:
        s.command("feedback", agree=True)
    assert info.value.kind == "WrongPhase"


def test_cosmos_url_decodes():
    s = ka.Session()
    s.command("start", t=0)
    s.command("teach_start", label="anger", t=0.5)
    for line in ka.synth("anger", duration=12, seed=9).splitlines():
        s.push(json.loads(line))
    s.finish(12.0)
    assert s.phase == "Cosmos"
    url = s.cosmos_url()
    decoded = ka.cosmos_decode(url)
    assert decoded == ka.cosmos_decode(url.split("#", 1)[1])
    assert "episodes" in decoded
