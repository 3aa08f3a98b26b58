import io
import json

import numpy as np
import pytest

from hetnetsim.bridge import handle_request, serve
from hetnetsim.env import EnvConfig, HetNetEnv
from hetnetsim.topology import ScenarioKind, generate_scenario


def make_env(n_users=50, horizon=5):
    topo = generate_scenario(ScenarioKind.DENSE_URBAN, n_users, 0)
    return HetNetEnv(EnvConfig(topology=topo, horizon=horizon))


def ask(env, payload):
    reply, alive = handle_request(env, json.dumps(payload))
    return reply, alive


def test_spaces_layout_arithmetic():
    env = make_env(n_users=50)
    reply, alive = ask(env, {"id": 1, "kind": "spaces"})
    assert alive
    assert reply == {"id": 1, "kind": "spaces_reply", "state_len": 839,
                     "action_len": 76, "n_stations": 13, "n_users": 50,
                     "horizon": 5}


def test_reset_deterministic_serialization():
    env = make_env()
    r1, _ = ask(env, {"id": 1, "kind": "reset", "seed": 7})
    r2, _ = ask(env, {"id": 2, "kind": "reset", "seed": 7})
    assert json.dumps(r1["state"]) == json.dumps(r2["state"])
    assert r1["kind"] == "state_reply"


def test_step_before_reset_is_error_and_session_lives():
    env = make_env()
    reply, alive = ask(env, {"id": 3, "kind": "step", "action": [0.5] * 76})
    assert alive and reply["kind"] == "error"
    reply, alive = ask(env, {"id": 4, "kind": "reset", "seed": 0})
    assert alive and reply["kind"] == "state_reply"


def test_step_reply_matches_native():
    env = make_env()
    native = make_env()
    s = native.reset(5)
    ask(env, {"id": 1, "kind": "reset", "seed": 5})
    action = list(np.linspace(0, 1, 76))
    out = native.step(np.array(action))
    reply, _ = ask(env, {"id": 2, "kind": "step", "action": action})
    assert reply["reward"] == float(out.reward)
    assert reply["done"] == out.done
    assert reply["state"] == [float(x) for x in out.next_state]


def test_malformed_lines_get_error_replies():
    env = make_env()
    bad_lines = ["not json", "{\"id\": 1}", "[]",
                 json.dumps({"id": 2, "kind": "warp"}),
                 json.dumps({"id": 3, "kind": "reset", "seed": "zero"}),
                 json.dumps({"id": 4, "kind": "step", "action": "nope"}),
                 json.dumps({"id": 5, "kind": "step", "action": [1, "x"]}),
                 json.dumps({"id": 6, "kind": "reset"}),
                 "{\"kind\": \"step\"}", "{broken"]
    for line in bad_lines:
        reply, alive = handle_request(env, line)
        assert alive
        assert reply["kind"] == "error"
    # still serviceable
    reply, _ = ask(env, {"id": 9, "kind": "spaces"})
    assert reply["kind"] == "spaces_reply"


def test_wrong_action_length_is_error():
    env = make_env()
    ask(env, {"id": 1, "kind": "reset", "seed": 0})
    reply, alive = ask(env, {"id": 2, "kind": "step", "action": [0.5] * 10})
    assert alive and reply["kind"] == "error"


def test_serve_loop_close_exits_zero():
    env = make_env()
    requests = [json.dumps({"id": 1, "kind": "reset", "seed": 1}),
                json.dumps({"id": 2, "kind": "step", "action": [0.2] * 76}),
                json.dumps({"id": 3, "kind": "close"}),
                json.dumps({"id": 4, "kind": "spaces"})]  # after close: ignored
    out = io.StringIO()
    rc = serve(env, io.StringIO("\n".join(requests) + "\n"), out)
    assert rc == 0
    replies = [json.loads(line) for line in out.getvalue().strip().splitlines()]
    assert [r["kind"] for r in replies] == ["state_reply", "step_reply",
                                            "close_reply"]
    assert [r["id"] for r in replies] == [1, 2, 3]


def test_serve_eof_exits_zero():
    env = make_env()
    out = io.StringIO()
    assert serve(env, io.StringIO(""), out) == 0
    assert out.getvalue() == ""


def test_every_request_gets_exactly_one_reply():
    env = make_env()
    lines = [json.dumps({"id": i, "kind": "spaces"}) for i in range(5)]
    lines.insert(2, "garbage")
    out = io.StringIO()
    serve(env, io.StringIO("\n".join(lines) + "\n"), out)
    replies = out.getvalue().strip().splitlines()
    assert len(replies) == 6
