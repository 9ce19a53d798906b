"""HTTP front door for the orchestrator.

Endpoints (paths fixed):
  GET  /health
  GET  /topology?tenant=<id>
  POST /inject/network|subnet|router|floatingip|port
  POST /inject/config
  GET  /injections/{id}         DELETE /injections/{id}
  POST /campaigns               GET /campaigns/{id}
  DELETE /campaigns/{id}        GET /campaigns/{id}/report[...csv|...log]

A single driver thread owns simulated time: in deterministic mode it
fast-forwards to the next scheduled event; in wall-anchored mode it maps
elapsed wall milliseconds onto the simulated clock for live dashboards.
"""

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from .errors import FaultFabricError, ParseError
from .fabric.core import ClockMode, Fabric
from .faults import FaultSpec
from .orchestrator import Orchestrator, render_report_json, render_series_csv

URL_KIND_TO_RESOURCE = {
    "network": "network",
    "subnet": "subnet",
    "router": "router",
    "floatingip": "floating_ip",
    "floating_ip": "floating_ip",
    "port": "port",
}


class FabricDriver(threading.Thread):
    """Owns time advancement; REST handlers share the orchestrator lock."""

    def __init__(self, orchestrator: Orchestrator):
        super().__init__(daemon=True)
        self.orch = orchestrator
        self._stop = threading.Event()

    def run(self):
        fabric = self.orch.fabric
        wall = fabric.clock.mode == ClockMode.WALL_ANCHORED
        anchor_wall = time.monotonic()
        anchor_sim = fabric.now
        while not self._stop.is_set():
            advanced = False
            with self.orch.lock:
                if wall:
                    target = anchor_sim + (time.monotonic() - anchor_wall) * 1000.0
                    if target > fabric.now:
                        fabric.step(target)
                        advanced = True
                else:
                    t = fabric.next_event_time()
                    if t is not None:
                        fabric.step(t)
                        advanced = True
            self._stop.wait(0.0005 if advanced else 0.01)

    def stop(self):
        self._stop.set()


class RestServer:
    def __init__(self, fabric: Fabric, host: str = "127.0.0.1", port: int = 0, reports_dir: str = "reports"):
        self.orch = Orchestrator(fabric, reports_dir=reports_dir)
        self.driver = FabricDriver(self.orch)
        outer = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, *args):
                pass

            def _send(self, status: int, body: bytes, content_type: str = "application/json"):
                self.send_response(status)
                self.send_header("Content-Type", content_type)
                self.send_header("Content-Length", str(len(body)))
                self.send_header("Access-Control-Allow-Origin", "*")
                self.send_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS")
                self.send_header("Access-Control-Allow-Headers", "Content-Type")
                self.end_headers()
                self.wfile.write(body)

            def _send_json(self, status: int, obj):
                self._send(status, (json.dumps(obj, sort_keys=True) + "\n").encode("utf-8"))

            def _send_error(self, exc: FaultFabricError):
                self._send_json(exc.http_status, {"error": exc.code, "message": exc.message})

            def _read_body(self) -> dict:
                length = int(self.headers.get("Content-Length") or 0)
                raw = self.rfile.read(length) if length else b"{}"
                try:
                    obj = json.loads(raw.decode("utf-8") or "{}")
                except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                    raise ParseError(f"bad request body: {exc}") from exc
                if not isinstance(obj, dict):
                    raise ParseError("request body must be a JSON object")
                return obj

            def do_OPTIONS(self):
                self._send(204, b"")

            def do_GET(self):
                try:
                    self._route("GET")
                except FaultFabricError as exc:
                    self._send_error(exc)

            def do_POST(self):
                try:
                    self._route("POST")
                except FaultFabricError as exc:
                    self._send_error(exc)

            def do_DELETE(self):
                try:
                    self._route("DELETE")
                except FaultFabricError as exc:
                    self._send_error(exc)

            def _route(self, method: str):
                url = urlparse(self.path)
                parts = [p for p in url.path.split("/") if p]
                query = parse_qs(url.query)
                orch = outer.orch
                with orch.lock:
                    if method == "GET" and parts == ["health"]:
                        self._send_json(200, {
                            "status": "ok",
                            "now_ms": orch.fabric.now,
                            "mode": orch.fabric.clock.mode.value,
                            "tenants": sorted(orch.fabric.topology.tenants),
                        })
                        return
                    if method == "GET" and parts == ["topology"]:
                        tenant = (query.get("tenant") or [""])[0]
                        self._send_json(200, orch.topology(tenant))
                        return
                    if method == "POST" and len(parts) == 2 and parts[0] == "inject":
                        body = self._read_body()
                        if parts[1] == "config":
                            handle = orch.inject_config_fault(
                                body.get("tenant_id", ""),
                                URL_KIND_TO_RESOURCE.get(body.get("kind", ""), body.get("kind", "")),
                                body.get("id", ""),
                                float(body.get("outage_ms", 0)),
                                pre_ms=float(body.get("pre_ms", 0)),
                                post_ms=float(body.get("post_ms", 0)),
                            )
                        else:
                            kind = URL_KIND_TO_RESOURCE.get(parts[1])
                            if kind is None:
                                raise ParseError(f"unknown injection endpoint {parts[1]!r}")
                            handle = orch.inject_resource(
                                body.get("tenant_id", ""),
                                kind,
                                body.get("id", ""),
                                FaultSpec.from_dict(body.get("spec") or {}),
                            )
                        self._send_json(201, handle.to_dict(orch.fabric.now))
                        return
                    if len(parts) == 2 and parts[0] == "injections":
                        if method == "GET":
                            self._send_json(200, orch.get_injection(parts[1]))
                            return
                        if method == "DELETE":
                            orch.cancel_injection(parts[1])
                            self._send_json(200, orch.get_injection(parts[1]))
                            return
                    if method == "POST" and parts == ["campaigns"]:
                        body = self._read_body()
                        tenant = body.get("tenant_id", "")
                        cid = orch.start_tests(tenant, body)
                        self._send_json(201, {"campaign_id": cid, "state": "pending"})
                        return
                    if len(parts) >= 2 and parts[0] == "campaigns":
                        cid = parts[1]
                        if method == "GET" and len(parts) == 2:
                            self._send_json(200, orch.status_tests(cid))
                            return
                        if method == "DELETE" and len(parts) == 2:
                            orch.stop_tests(cid)
                            self._send_json(200, orch.status_tests(cid))
                            return
                        if method == "GET" and len(parts) == 3 and parts[2] == "report":
                            body = render_report_json(orch.campaign_report(cid)).encode("utf-8")
                            self._send(200, body)
                            return
                        if method == "GET" and len(parts) == 4 and parts[2] == "report":
                            if parts[3] == "series.csv":
                                body = render_series_csv(orch.campaign_report(cid)).encode("utf-8")
                                self._send(200, body, content_type="text/csv")
                                return
                            if parts[3] == "events.log":
                                body = orch.render_events_log(cid).encode("utf-8")
                                self._send(200, body, content_type="application/x-ndjson")
                                return
                self._send_json(404, {"error": "not_found", "message": f"no route for {method} {self.path}"})

        self._httpd = ThreadingHTTPServer((host, port), Handler)
        self._httpd.daemon_threads = True
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)

    @property
    def address(self) -> tuple[str, int]:
        return self._httpd.server_address

    @property
    def url(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}"

    def start(self):
        self.driver.start()
        self._thread.start()

    def stop(self):
        self.driver.stop()
        self._httpd.shutdown()
        self._httpd.server_close()
