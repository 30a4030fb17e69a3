"""Python access to the kinaffect engine.

Dict-shaped values (config, reports, commands, frames) are converted to and
from JSON at the boundary.
"""

import json

from . import _core

Error = _core.Error


def _error_str(self):
    if len(self.args) == 2:
        return f"{self.args[0]}: {self.args[1]}"
    return Exception.__str__(self)


Error.kind = property(lambda self: self.args[0])
Error.__str__ = _error_str

LABELS = ("happiness", "relaxation", "anger", "sadness")


def _dump(value):
    if value is None:
        return ""
    return value if isinstance(value, str) else json.dumps(value)


def default_config():
    return json.loads(_core.default_config())


def load_config(patch=None):
    """Defaults with `patch` applied, validated."""
    return json.loads(_core.normalize_config(_dump(patch)))


def config_digest(config=None):
    return _core.config_digest(_dump(config))


def synth(archetype, duration=10.0, persons=1, seed=1, start_time=0.0):
    """Synthetic recording as line-delimited JSON text."""
    return _core.synth(archetype, float(duration), int(persons), int(seed), float(start_time))


def replay(recording, script=(), config=None):
    """Full session over a recording (text); `script` is a list of command dicts."""
    if not isinstance(script, str):
        script = "".join(json.dumps(c) + "\n" for c in script)
    return json.loads(_core.replay(recording, script, _dump(config)))


def run_eval(seed=1, config=None):
    return json.loads(_core.run_eval(int(seed), _dump(config)))


def osc_encode(address, args=()):
    return _core.osc_encode(address, list(args))


def osc_decode(data):
    return _core.osc_decode(bytes(data))


def cosmos_decode(payload):
    """Accepts a bare payload or a full cosmos URL."""
    if "#" in payload:
        payload = payload.split("#", 1)[1]
    return json.loads(_core.cosmos_decode(payload))


class Session:
    """One live session. OSC packets the engine emits are kept until drained."""

    def __init__(self, config=None):
        self._s = _core.Session(_dump(config))

    def command(self, cmd, **fields):
        self._s.apply(json.dumps({"cmd": cmd, **fields}))

    def push(self, record):
        """Feeds one recording record; returns the state messages of closed hops."""
        return [json.loads(m) for m in self._s.push(_dump(record))]

    def tick(self, t):
        self._s.tick(float(t))

    def finish(self, t):
        self._s.finish(float(t))

    @property
    def phase(self):
        return self._s.phase

    @property
    def hop_count(self):
        return self._s.hop_count

    def state(self):
        return json.loads(self._s.state())

    def report(self):
        return json.loads(self._s.report())

    def cosmos_url(self):
        return self._s.cosmos_url()

    def drain_packets(self):
        return self._s.drain_packets()


__all__ = [
    "Error",
    "LABELS",
    "Session",
    "config_digest",
    "cosmos_decode",
    "default_config",
    "load_config",
    "osc_decode",
    "osc_encode",
    "replay",
    "run_eval",
    "synth",
]
