import io
import json
import urllib.request

import pytest

from conftest import pipeline_config
from dante.embedding import EmbeddingTable
from dante.pipeline import Pipeline
from dante.server import StateView, make_server, serve_forever_in_thread


@pytest.fixture(scope="module")
def served_state(duo_csv, duo_table, tmp_path_factory):
    state = tmp_path_factory.mktemp("served")
    pipeline = Pipeline(pipeline_config(duo_table, state))
    pipeline.run([io.StringIO(duo_csv)])
    view = StateView(str(state), pipeline=None, table=EmbeddingTable.load(duo_table))
    server = make_server(("127.0.0.1", 0), view)
    serve_forever_in_thread(server)
    yield f"http://127.0.0.1:{server.server_address[1]}", pipeline
    server.shutdown()


def get(base, path):
    try:
        with urllib.request.urlopen(base + path) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read())


def post(base, path, body):
    req = urllib.request.Request(
        base + path, data=json.dumps(body).encode(), method="POST",
        headers={"Content-Type": "application/json"},
    )
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read())


class TestReadEndpoints:
    def test_latest_window(self, served_state):
        base, pipeline = served_state
        status, body = get(base, "/api/windows/latest")
        assert status == 200
        assert body["v"] == 1
        assert body["window"] == pipeline.last_window

    def test_specific_window(self, served_state):
        base, _ = served_state
        status, body = get(base, "/api/windows/0")
        assert status == 200 and body["window"] == 0

    def test_missing_window_404(self, served_state):
        base, _ = served_state
        status, body = get(base, "/api/windows/999")
        assert status == 404 and "error" in body

    def test_concepts_list(self, served_state):
        base, pipeline = served_state
        status, body = get(base, "/api/concepts")
        assert status == 200
        assert len(body["concepts"]) == len(pipeline.registry)
        item = body["concepts"][0]
        assert {"id", "first_seen", "last_seen", "occurrences", "category",
                "severity", "note", "exemplars"} <= set(item)

    def test_concepts_novel_since_filter(self, served_state):
        base, _ = served_state
        _, everyone = get(base, "/api/concepts")
        max_seen = max(c["first_seen"] for c in everyone["concepts"])
        _, body = get(base, f"/api/concepts?novel_since={max_seen}")
        assert body["concepts"] == []

    def test_concept_detail_includes_port_context(self, served_state):
        base, pipeline = served_state
        cid = pipeline.registry.ordered()[0].concept_id
        status, body = get(base, f"/api/concepts/{cid}")
        assert status == 200
        detail = body["concept"]
        assert detail["id"] == cid
        assert "history" in detail
        assert detail["port_context"]  # table was supplied
        first = detail["port_context"][0]
        assert "port" in first and first["neighbors"]

    def test_unknown_concept_404(self, served_state):
        base, _ = served_state
        status, _ = get(base, "/api/concepts/c9999")
        assert status == 404

    def test_alerts_endpoint(self, served_state):
        base, _ = served_state
        status, body = get(base, "/api/alerts")
        assert status == 200 and "alerts" in body
        status, body = get(base, "/api/alerts?since=100000")
        assert body["alerts"] == []

    def test_timeline(self, served_state):
        base, pipeline = served_state
        status, body = get(base, "/api/timeline")
        assert status == 200
        assert body["windows"][0] == 0
        assert body["windows"][-1] == pipeline.last_window
        assert len(body["noise"]) == len(body["windows"])
        for series in body["series"].values():
            assert len(series) == len(body["windows"])

    def test_timeline_range(self, served_state):
        base, _ = served_state
        _, body = get(base, "/api/timeline?from=1&to=3")
        assert body["windows"] == [1, 2, 3]

    def test_unknown_route_404(self, served_state):
        base, _ = served_state
        status, _ = get(base, "/api/nothing")
        assert status == 404


class TestLabelEndpoint:
    def test_label_applied_in_serve_mode(self, served_state):
        base, pipeline = served_state
        cid = pipeline.registry.ordered()[-1].concept_id
        status, body = post(base, f"/api/concepts/{cid}/label",
                            {"severity": "malicious", "note": "seen in repo"})
        assert status == 200
        assert body["status"] == "applied"
        _, detail = get(base, f"/api/concepts/{cid}")
        assert detail["concept"]["severity"] == "malicious"

    def test_label_idempotency_key(self, served_state):
        base, pipeline = served_state
        cid = pipeline.registry.ordered()[0].concept_id
        body = {"severity": "suspicious", "key": "dup-1"}
        post(base, f"/api/concepts/{cid}/label", body)
        post(base, f"/api/concepts/{cid}/label", body)
        _, detail = get(base, f"/api/concepts/{cid}")
        keyed = [h for h in detail["concept"]["history"] if h.get("key") == "dup-1"]
        assert len(keyed) == 1

    def test_unknown_concept_label_404(self, served_state):
        base, _ = served_state
        status, body = post(base, "/api/concepts/c9999/label", {"severity": "malicious"})
        assert status == 404

    def test_bad_severity_400(self, served_state):
        base, pipeline = served_state
        cid = pipeline.registry.ordered()[0].concept_id
        status, _ = post(base, f"/api/concepts/{cid}/label", {"severity": "nope"})
        assert status == 400


class TestQueuedLabels:
    def test_label_queued_into_running_pipeline(self, duo_csv, duo_table, tmp_path):
        state = tmp_path / "s"
        pipeline = Pipeline(pipeline_config(duo_table, state))
        pipeline.run([io.StringIO(duo_csv)], stop_after=2)
        view = StateView(str(state), pipeline=pipeline)
        server = make_server(("127.0.0.1", 0), view)
        serve_forever_in_thread(server)
        base = f"http://127.0.0.1:{server.server_address[1]}"
        try:
            cid = pipeline.registry.ordered()[0].concept_id
            status, body = post(base, f"/api/concepts/{cid}/label", {"severity": "malicious"})
            assert status == 200 and body["status"] == "queued"
            # not applied yet; takes effect at the next window boundary
            assert pipeline.registry.get(cid).severity.value == "unlabeled"
            pipeline.run([io.StringIO(duo_csv)], stop_after=1)
            assert pipeline.registry.get(cid).severity.value == "malicious"
        finally:
            server.shutdown()


class TestStaticUi:
    def test_static_files_served_under_ui(self, served_state, tmp_path):
        ui = tmp_path / "dist"
        ui.mkdir()
        (ui / "index.html").write_text("<html>triage</html>")
        view = StateView(str(tmp_path))
        server = make_server(("127.0.0.1", 0), view, ui_dir=str(ui))
        serve_forever_in_thread(server)
        base = f"http://127.0.0.1:{server.server_address[1]}"
        try:
            with urllib.request.urlopen(base + "/ui/") as resp:
                assert b"triage" in resp.read()
            with pytest.raises(urllib.error.HTTPError) as err:
                urllib.request.urlopen(base + "/ui/../secret")
            assert err.value.code == 404
        finally:
            server.shutdown()
