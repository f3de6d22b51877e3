"""Live session service: the trial engine behind a text websocket.

One connection drives one observer session (a sequence of trials).  The
client sends the same records a session log stores -- trial_start, gaze,
key, rating -- as JSON text messages, and receives the engine's surfaced
outputs (state, exploration_map, prompt, trial_report) the moment they
fire.  Display ticks are synthesized server side on the incoming event
clock, and every fed event is captured, so a saved session log replays
to bit-identical reports.

The service is a local tool: no authentication, one session per
connection, plain text frames.  Static assets (the browser client) are
mounted under / when an assets directory is given; the websocket lives
at /ws.
"""

from __future__ import annotations

import contextlib
import itertools
import json
import os
import tempfile
import time

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from .bundle import ModelBundle
from .engine import TICK_HZ, TickLattice, TrialConfig, TrialSession
from .logio import GazeSample, KeyInput, Rating, TrialEnd, TrialStart, write_log
from .raster import read_pgm
from .surface import ClutterMap, GridGeometry

PROTOCOL = "aaad-live/1"

__all__ = ["PROTOCOL", "ProtocolError", "LiveConnection", "create_app",
           "serve_forever"]


class ProtocolError(ValueError):
    """Client sent something the live protocol cannot accept."""


_MISSING = object()


def _field(msg: dict, kind: str, name: str, default=_MISSING):
    value = msg.get(name, _MISSING)
    if value is _MISSING:
        if default is _MISSING:
            raise ProtocolError(f"{kind} message missing field {name!r}")
        return default
    return value


def _number(msg: dict, kind: str, name: str, default=_MISSING) -> float:
    value = _field(msg, kind, name, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProtocolError(f"{kind}.{name} must be a number")
    return float(value)


def _integer(msg: dict, kind: str, name: str, default=_MISSING) -> int:
    value = _field(msg, kind, name, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ProtocolError(f"{kind}.{name} must be an integer")
    return value


def _string(msg: dict, kind: str, name: str, default=_MISSING) -> str:
    value = _field(msg, kind, name, default)
    if not isinstance(value, str):
        raise ProtocolError(f"{kind}.{name} must be a string")
    return value


def _flag(msg: dict, kind: str, name: str, default=_MISSING) -> bool:
    value = _field(msg, kind, name, default)
    if not isinstance(value, bool):
        raise ProtocolError(f"{kind}.{name} must be true or false")
    return value


class LiveConnection:
    """Protocol state for one client: active trial plus the capture tape.

    handle() turns one inbound text frame into the engine outputs it
    surfaced (as dicts, ready to serialize).  Unknown message fields are
    ignored so clients can grow the payloads without breaking older
    services.  Everything fed to the engine, ticks included, lands on
    self.captured in feed order; write_log(captured) is the session log.
    """

    def __init__(self, bundle: ModelBundle, clutter_maps: dict | None = None,
                 tick_hz: float = TICK_HZ):
        self.bundle = bundle
        self.clutter_maps = clutter_maps or {}
        self.tick_hz = tick_hz
        self.session: TrialSession | None = None
        self.lattice: TickLattice | None = None
        self.captured: list = []
        self.clock = 0.0
        self.trial_no = 0

    def handle(self, text: str) -> list[dict]:
        try:
            msg = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"malformed JSON: {exc.msg}") from exc
        if not isinstance(msg, dict):
            raise ProtocolError("message must be a JSON object")
        kind = msg.get("kind")
        if not isinstance(kind, str):
            raise ProtocolError("message has no kind")
        if kind == "trial_start":
            return self._start_trial(msg)
        if kind not in ("gaze", "key", "rating", "trial_end"):
            raise ProtocolError(f"unknown message kind {kind!r}")
        if self.session is None:
            raise ProtocolError(f"{kind} before trial_start")
        if self.session.phase == "done" and kind != "trial_end":
            raise ProtocolError(
                "event after trial end; send trial_start to begin the next trial"
            )
        event = self._event(kind, msg)
        outs: list[dict] = []
        try:
            if self.session.phase != "done":
                for tick in self.lattice.advance(event.t_ms):
                    outs.extend(self.session.feed(tick))
                    self.captured.append(tick)
            outs.extend(self.session.feed(event))
            self.captured.append(event)
        except ValueError as exc:
            raise ProtocolError(str(exc)) from exc
        self.clock = max(self.clock, float(event.t_ms))
        return outs

    def _start_trial(self, msg: dict) -> list[dict]:
        kind = "trial_start"
        try:
            start = TrialStart(
                t_ms=_number(msg, kind, "t_ms", default=0.0),
                trial_id=_string(msg, kind, "trial_id",
                                 default=f"live-{self.trial_no:04d}"),
                image_id=_string(msg, kind, "image_id"),
                zoom=_string(msg, kind, "zoom"),
                clutter=_string(msg, kind, "clutter"),
                aid_visible=_flag(msg, kind, "aid_visible", default=True),
                aid_target=_string(msg, kind, "aid_target", default="weapon"),
                person_present=_flag(msg, kind, "person_present", default=False),
                weapon_present=_flag(msg, kind, "weapon_present", default=False),
            )
            cfg = TrialConfig.from_trial_start(start)
            session = TrialSession(self.bundle, cfg,
                                   clutter_map=self.clutter_maps.get(start.image_id))
        except ProtocolError:
            raise
        except ValueError as exc:
            raise ProtocolError(str(exc)) from exc
        if self.session is not None:
            self.session.finish()  # abandoned trial; replay closes it the same way
        self.session = session
        self.lattice = TickLattice(self.tick_hz)
        self.trial_no += 1
        self.clock = float(start.t_ms)
        self.captured.append(start)
        outs = list(session.start())
        for tick in self.lattice.advance(start.t_ms):
            outs.extend(session.feed(tick))
            self.captured.append(tick)
        return outs

    def _event(self, kind: str, msg: dict):
        try:
            if kind == "gaze":
                return GazeSample(t_ms=_number(msg, kind, "t_ms"),
                                  x_px=_number(msg, kind, "x_px"),
                                  y_px=_number(msg, kind, "y_px"),
                                  valid=_flag(msg, kind, "valid", default=True))
            if kind == "key":
                return KeyInput(t_ms=_number(msg, kind, "t_ms", default=self.clock),
                                code=_string(msg, kind, "code"))
            if kind == "rating":
                return Rating(t_ms=_number(msg, kind, "t_ms", default=self.clock),
                              stage=_string(msg, kind, "stage"),
                              value=_integer(msg, kind, "value"))
            return TrialEnd(t_ms=_number(msg, kind, "t_ms", default=self.clock),
                            reason=_string(msg, kind, "reason", default="advance"))
        except ProtocolError:
            raise
        except ValueError as exc:
            raise ProtocolError(f"{kind}: {exc}") from exc

    def capture_text(self) -> str | None:
        """The session so far as a replayable log document."""
        if not self.captured:
            return None
        return write_log(self.captured)


def _load_clutter_maps(assets_dir: str, geometry: GridGeometry) -> dict:
    """Clutter maps shipped with the assets, keyed by image id.

    Convention: assets/clutter/<image_id>.pgm at the bundle grid size.
    Sessions for other image ids fall back to a uniform prior.
    """
    maps: dict = {}
    clutter_dir = os.path.join(assets_dir, "clutter")
    if not os.path.isdir(clutter_dir):
        return maps
    for name in sorted(os.listdir(clutter_dir)):
        if not name.endswith(".pgm"):
            continue
        with open(os.path.join(clutter_dir, name), "rb") as fh:
            values = read_pgm(fh.read())
        h, w = values.shape
        if (h, w) != (geometry.height_px, geometry.width_px):
            raise ValueError(
                f"clutter map {name!r} is {w}x{h} px but the bundle grid is "
                f"{geometry.width_px}x{geometry.height_px}"
            )
        maps[name[:-4]] = ClutterMap(geometry, values)
    return maps


def _dumps(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def _write_capture(conn: LiveConnection, log_dir: str | None, seq: int) -> None:
    text = conn.capture_text()
    if log_dir is None or text is None:
        return
    name = f"session-{time.strftime('%Y%m%d-%H%M%S')}-{seq:04d}.log"
    fd, tmp = tempfile.mkstemp(dir=log_dir, prefix=".aaad-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, os.path.join(log_dir, name))
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def create_app(bundle: ModelBundle, assets_dir: str | None = None,
               log_dir: str | None = None, clutter_maps: dict | None = None):
    """Assemble the service: websocket endpoint first, static assets after.

    log_dir, when given, receives one session log per connection
    (written on disconnect).  clutter_maps overrides the assets-dir
    scan; pass {} to force uniform priors.
    """
    if clutter_maps is None:
        clutter_maps = (_load_clutter_maps(assets_dir, bundle.geometry)
                        if assets_dir is not None else {})
    if log_dir is not None:
        os.makedirs(log_dir, exist_ok=True)
    app = FastAPI(openapi_url=None, docs_url=None, redoc_url=None)
    seq = itertools.count(1)

    @app.websocket("/ws")
    async def live(websocket: WebSocket) -> None:
        await websocket.accept()
        await websocket.send_text(_dumps({"type": "hello", "protocol": PROTOCOL}))
        conn = LiveConnection(bundle, clutter_maps=clutter_maps)
        try:
            while True:
                try:
                    text = await websocket.receive_text()
                except WebSocketDisconnect:
                    break
                try:
                    outs = conn.handle(text)
                except ProtocolError as exc:
                    await websocket.send_text(
                        _dumps({"type": "error", "message": str(exc)}))
                    await websocket.close(code=1008)
                    break
                for out in outs:
                    await websocket.send_text(_dumps(out))
        finally:
            _write_capture(conn, log_dir, next(seq))

    if assets_dir is not None:
        app.mount("/", StaticFiles(directory=assets_dir, html=True), name="assets")
    return app


def serve_forever(bundle: ModelBundle, assets_dir: str | None = None,
                  host: str = "127.0.0.1", port: int = 8750) -> None:
    """Run the service until interrupted; AAAD_LOG_DIR enables capture."""
    import uvicorn

    log_dir = os.environ.get("AAAD_LOG_DIR") or None
    app = create_app(bundle, assets_dir=assets_dir, log_dir=log_dir)
    config = uvicorn.Config(app, host=host, port=port, log_level="warning")
    server = uvicorn.Server(config)
    try:
        server.run()
    except KeyboardInterrupt:
        pass
