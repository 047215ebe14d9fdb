import asyncio
import json
import socket
import threading
import time

import numpy as np
import pytest

from conftest import write_scene
from somasonic import evaluate, osc, scene, shapes
from somasonic.errors import SceneError, UnknownTissueError
from somasonic.server import (
    Session,
    SessionServer,
    message_records,
    read_log,
    replay_records,
)


@pytest.fixture
def session_config(two_structure_scene):
    return scene.load_scene_config(two_structure_scene)


class TestSceneConfig:
    def test_load_and_defaults(self, session_config):
        assert [s.structure_id for s in session_config.structures] == ["tumor", "cortex"]
        assert session_config.probe.radius == 0.03
        assert session_config.ground_truth_id == "tumor"

    def test_duplicate_ids_rejected(self, tmp_path):
        m = shapes.icosphere(radius=0.01, subdivisions=1)
        with pytest.raises(SceneError, match="unique"):
            path = write_scene(tmp_path, [("x", m, "glioma"), ("x", m, "glioma")])
            scene.load_scene_config(path)

    def test_unknown_tissue_error_names_it(self, tmp_path):
        m = shapes.icosphere(radius=0.01, subdivisions=1)
        path = write_scene(tmp_path, [("x", m, "kryptonite")])
        config = scene.load_scene_config(path)
        with pytest.raises(UnknownTissueError, match="kryptonite"):
            scene.load_scene(config)

    def test_missing_mesh(self, tmp_path):
        path = tmp_path / "scene.json"
        path.write_text(
            json.dumps(
                {
                    "schema": "somasonic.scene.v1",
                    "structures": [{"id": "a", "mesh": "missing.obj", "tissue": "glioma"}],
                }
            )
        )
        with pytest.raises(SceneError, match="missing.obj"):
            scene.load_scene(scene.load_scene_config(path))

    def test_wrong_schema(self, tmp_path):
        path = tmp_path / "scene.json"
        path.write_text(json.dumps({"schema": "nope", "structures": []}))
        with pytest.raises(SceneError, match="schema"):
            scene.load_scene_config(path)

    def test_rod_structure(self, tmp_path):
        path = write_scene(tmp_path, [("chain", None, "vertebra")])
        config = scene.load_scene_config(path)
        loaded = scene.load_scene(config)
        assert loaded["chain"].mesh is None
        assert loaded["chain"].model.dof_per_vertex == 1


class TestSessionCore:
    def test_cache_population_and_reuse(self, session_config, tmp_path, monkeypatch):
        cache = tmp_path / "cache"
        Session(session_config, cache_dir=cache)
        files = list(cache.glob("modal-*.npz"))
        assert len(files) == 2
        # A second build must come from the cache: break the solver to prove it.
        import somasonic.modal as modal_mod

        def boom(*a, **k):
            raise AssertionError("eigensolver should not run on cached startup")

        monkeypatch.setattr(modal_mod, "compute_modes", boom)
        monkeypatch.setattr(scene.modal, "compute_modes", boom)
        Session(session_config, cache_dir=cache)

    def test_probe_routing_and_gains(self, session_config):
        s = Session(session_config)
        s.handle_message(osc.probe_message(0.02, 0.0, 0.0, 0.03))
        s.process_block()
        ids = {e.structure_id for e in s.prox_events}
        assert "tumor" in ids
        tumor_ev = next(e for e in s.prox_events if e.structure_id == "tumor")
        assert tumor_ev.inside and tumor_ev.gain == 1.0

    def test_click_produces_energy_within_two_blocks(self, session_config):
        s = Session(session_config)
        s.handle_message(osc.probe_message(0.02, 0.0, 0.0, 0.03))
        s.process_block()
        s.handle_message(osc.click_message("", 0))
        b1 = s.process_block()
        b2 = s.process_block()
        assert max(np.abs(b1).max(), np.abs(b2).max()) > 0

    def test_click_out_of_range_is_silent_no_error(self, session_config):
        s = Session(session_config)
        s.handle_message(osc.probe_message(5.0, 5.0, 5.0, 0.03))
        s.process_block()
        s.handle_message(osc.click_message("", 0))
        block = s.process_block()
        assert np.all(block == 0.0)
        assert s.error_count == 0

    def test_malformed_message_dropped_session_alive(self, session_config):
        s = Session(session_config)
        assert not s.handle_message(osc.OscMessage("/mmii/prox", ("x", -5.0)))
        assert s.error_count == 1
        assert not s.handle_message(osc.OscMessage("/bogus", ()))
        assert s.error_count == 2
        s.process_block()  # still renders

    def test_bad_datagram_counted(self, session_config):
        s = Session(session_config)
        assert s.handle_datagram(b"\x01\x02\x03") == 0
        assert s.error_count == 1

    def test_idle_session_is_silent(self, session_config):
        s = Session(session_config)
        for _ in range(5):
            assert np.all(s.process_block() == 0.0)
        assert s.prox_events == []

    def test_session_isolation(self, session_config):
        a = Session(session_config, seed=0)
        b = Session(session_config, seed=0)
        a.handle_message(osc.probe_message(0.02, 0.0, 0.0, 0.03))
        a.handle_message(osc.click_message("tumor", 1))
        out_a = np.concatenate([a.process_block() for _ in range(5)])
        out_b = np.concatenate([b.process_block() for _ in range(5)])
        assert np.abs(out_a).max() > 0
        assert np.all(out_b == 0.0)

    def test_state_messages_validate_against_registry(self, session_config):
        s = Session(session_config)
        s.handle_message(osc.probe_message(0.02, 0.0, 0.0, 0.03))
        s.handle_message(osc.click_message("", 0))
        s.process_block()
        for msg in s.state_messages():
            osc.validate_message(msg)

    def test_heart_rate_update(self, session_config):
        s = Session(session_config)
        s.handle_message(osc.OscMessage("/mmii/hr", (90.0,)))
        s.process_block()
        # no dynamic structure in this scene; message is accepted and logged
        assert s.error_count == 0

    def test_scene_snapshot_shape(self, session_config):
        snap = Session(session_config).scene_snapshot()
        assert snap["schema"] == "somasonic.scenesnapshot.v1"
        ids = {s["id"] for s in snap["structures"]}
        assert ids == {"tumor", "cortex"}
        for s in snap["structures"]:
            assert len(s["vertices"]) % 3 == 0
            assert len(s["faces"]) % 3 == 0


class TestTrialLog:
    def test_messages_logged_and_flushed(self, session_config, tmp_path):
        log_path = tmp_path / "trial.jsonl"
        s = Session(session_config, log_path=log_path)
        s.handle_message(osc.OscMessage("/mmii/trial/start", ("audiovisual",)))
        s.handle_message(osc.marker_message(0.02, 0.0, 0.0))
        # Flushed per message: readable before close (crash safety).
        records = read_log(log_path)
        assert records[0]["type"] == "meta"
        assert records[0]["schema"] == "somasonic.trial.v1"
        assert [r["address"] for r in records[1:]] == ["/mmii/trial/start", "/mmii/marker"]
        s.close()

    def test_log_feeds_eval(self, session_config, tmp_path):
        log_path = tmp_path / "trial.jsonl"
        s = Session(session_config, log_path=log_path)
        s.handle_message(osc.OscMessage("/mmii/trial/start", ("audiovisual",)))
        tumor = s.meshes["tumor"]
        lo, hi = tumor.bounds()
        for corner in [
            (lo[0], lo[1], lo[2]), (hi[0], lo[1], lo[2]), (lo[0], hi[1], lo[2]),
            (lo[0], lo[1], hi[2]), (hi[0], hi[1], hi[2]), (hi[0], hi[1], lo[2]),
        ]:
            s.handle_message(osc.marker_message(*corner))
            s.process_block()
        s.handle_message(osc.OscMessage("/mmii/trial/end", ()))
        s.process_block()
        s.close()
        [trial] = evaluate.extract_trials(read_log(log_path))
        score = evaluate.score_trial(
            trial.trial_id, trial.condition, trial.markers, tumor, trial.task_time
        )
        assert 0.2 < score.dice <= 1.0


class TestReplay:
    def test_replay_deterministic(self, session_config, two_structure_scene, tmp_path):
        records = [
            {"t": 0.0, "address": "/mmii/probe", "args": [0.02, 0.0, 0.0, 0.03]},
            {"t": 0.01, "address": "/mmii/click", "args": ["", 0]},
            {"t": 0.2, "address": "/mmii/probe", "args": [0.03, 0.0, 0.0, 0.03]},
            {"t": 0.3, "address": "/mmii/click", "args": ["tumor", 2]},
        ]
        a = replay_records(session_config, records, tail=0.2, seed=5)
        b = replay_records(session_config, records, tail=0.2, seed=5)
        assert np.array_equal(a, b)
        assert np.abs(a).max() > 0

    def test_live_log_replays_to_same_audio(self, session_config, tmp_path):
        log_path = tmp_path / "live.jsonl"
        s = Session(session_config, log_path=log_path, seed=9)
        blocks = []
        script = {
            1: osc.probe_message(0.025, 0.0, 0.0, 0.03),
            3: osc.click_message("", 0),
            40: osc.probe_message(0.02, 0.005, 0.0, 0.03),
            41: osc.click_message("tumor", 7),
        }
        n_blocks = 120
        for i in range(n_blocks):
            if i in script:
                s.handle_message(script[i])
            blocks.append(s.process_block())
        live = np.concatenate(blocks)
        s.close()

        records = read_log(log_path)
        tail_blocks = n_blocks - int(
            np.floor(max(m["t"] for m in message_records(records)) / s.block_duration)
        )
        replayed = replay_records(
            session_config, records, tail=tail_blocks * s.block_duration, seed=9
        )
        assert np.array_equal(replayed[: len(live)], live)


@pytest.mark.integration
class TestNetworking:
    def _free_port(self):
        with socket.socket() as s:
            s.bind(("127.0.0.1", 0))
            return s.getsockname()[1]

    def test_udp_and_websocket_roundtrip(self, session_config):
        import websockets

        udp_port = self._free_port()
        ws_port = self._free_port()
        server = SessionServer(
            session_config, udp_port=udp_port, ws_port=ws_port, realtime=True
        )
        loop = asyncio.new_event_loop()
        thread = threading.Thread(
            target=lambda: loop.run_until_complete(server.run()), daemon=True
        )
        thread.start()
        time.sleep(0.7)

        async def client():
            got = {"scene": None, "audio": [], "state": []}
            async with websockets.connect(f"ws://127.0.0.1:{ws_port}") as ws:
                # UDP probe placing the sphere around the tumor
                sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
                sock.sendto(
                    osc.encode_message(osc.probe_message(0.02, 0.0, 0.0, 0.03)),
                    ("127.0.0.1", udp_port),
                )
                # click via websocket frame
                payload = osc.encode_message(osc.click_message("tumor", 3))
                await ws.send(osc.encode_frame(osc.FRAME_OSC, payload))
                deadline = time.time() + 5.0
                while time.time() < deadline:
                    raw = await asyncio.wait_for(ws.recv(), timeout=3.0)
                    ftype, body = osc.decode_frame(raw)
                    if ftype == osc.FRAME_SCENE:
                        got["scene"] = json.loads(body)
                    elif ftype == osc.FRAME_AUDIO:
                        got["audio"].append(osc.decode_audio_frame(body))
                    elif ftype == osc.FRAME_OSC:
                        got["state"].extend(osc.decode_packet(body))
                    if len(got["audio"]) > 80 and got["state"]:
                        break
                sock.close()
            return got

        try:
            got = asyncio.run(client())
        finally:
            loop.call_soon_threadsafe(server.stop)
            thread.join(timeout=5)
            loop.close()

        assert got["scene"]["schema"] == "somasonic.scenesnapshot.v1"
        indices = [i for i, _ in got["audio"]]
        assert indices == sorted(indices)
        gaps = np.diff(indices)
        assert np.all(gaps >= 1)
        # click energy made it into the stream
        peak = max(float(np.abs(a).max()) for _, a in got["audio"])
        assert peak > 0
        # proximity state mentions the tumor
        prox = [m for m in got["state"] if m.address == "/mmii/prox"]
        assert any(m.arguments[0] == "tumor" for m in prox)
