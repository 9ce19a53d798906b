import json
import time

import pytest
import requests

from faultfabric.restapi import RestServer

from conftest import make_fabric


@pytest.fixture
def server():
    srv = RestServer(make_fabric("minimal_two_vm"))
    srv.start()
    yield srv
    srv.stop()


def loss_spec(pre=0.0, inject=500.0, post=0.0):
    return {"fault_type": "loss", "pattern": "persistent",
            "timing": {"pre_ms": pre, "inject_ms": inject, "post_ms": post}}


def wait_for(fn, timeout_s=10.0):
    deadline = time.monotonic() + timeout_s
    while time.monotonic() < deadline:
        value = fn()
        if value:
            return value
        time.sleep(0.02)
    raise AssertionError("condition not reached in time")


class TestEndpoints:
    def test_health(self, server):
        resp = requests.get(server.url + "/health")
        assert resp.status_code == 200
        body = resp.json()
        assert body["status"] == "ok"
        assert "demo" in body["tenants"]

    def test_topology(self, server):
        resp = requests.get(server.url + "/topology?tenant=demo")
        assert resp.status_code == 200
        payload = resp.json()
        assert {p["id"] for p in payload["ports"]} == {"vm1-port", "vm2-port"}
        assert payload["edges"]

    def test_topology_unknown_tenant_404(self, server):
        resp = requests.get(server.url + "/topology?tenant=ghost")
        assert resp.status_code == 404
        assert resp.json()["error"] == "unknown_tenant"

    def test_inject_lifecycle(self, server):
        body = {"tenant_id": "demo", "id": "vm1-port", "spec": loss_spec()}
        resp = requests.post(server.url + "/inject/port", json=body)
        assert resp.status_code == 201
        handle = resp.json()
        assert handle["items"] == ["item-vm1-port"]
        final = wait_for(
            lambda: (lambda s: s if s["phase"] == "completed" else None)(
                requests.get(server.url + f"/injections/{handle['id']}").json()
            )
        )
        assert final["phase"] == "completed"

    def test_inject_all_resource_endpoints_exist(self, server):
        targets = {
            "network": "net1",
            "subnet": "sub1",
            "router": "r1",
            "floatingip": "fip1",
            "port": "vm2-port",
        }
        for kind, rid in targets.items():
            body = {"tenant_id": "demo", "id": rid, "spec": loss_spec(inject=100.0)}
            resp = requests.post(server.url + f"/inject/{kind}", json=body)
            assert resp.status_code == 201, f"{kind}: {resp.text}"
            handle = resp.json()
            # release the items so the next kind does not overlap
            requests.delete(server.url + f"/injections/{handle['id']}")

    def test_cross_tenant_injection_403(self, server):
        body = {"tenant_id": "infra", "id": "vm1-port", "spec": loss_spec()}
        resp = requests.post(server.url + "/inject/port", json=body)
        assert resp.status_code == 403
        assert resp.json()["error"] == "not_owner"

    def test_unknown_resource_404(self, server):
        body = {"tenant_id": "demo", "id": "ghost", "spec": loss_spec()}
        resp = requests.post(server.url + "/inject/router", json=body)
        assert resp.status_code == 404

    def test_bad_spec_400(self, server):
        body = {"tenant_id": "demo", "id": "vm1-port", "spec": {"fault_type": "loss", "intensity": 9}}
        resp = requests.post(server.url + "/inject/port", json=body)
        assert resp.status_code == 400

    def test_config_fault_endpoint(self, server):
        body = {"tenant_id": "demo", "kind": "router", "id": "r1", "outage_ms": 200.0}
        resp = requests.post(server.url + "/inject/config", json=body)
        assert resp.status_code == 201
        handle = resp.json()
        assert handle["mode"] == "config_fault"
        wait_for(
            lambda: requests.get(server.url + f"/injections/{handle['id']}").json()["phase"] == "completed"
        )

    def test_campaign_round_trip(self, server):
        plan = {
            "tenant_id": "demo",
            "baseline": True,
            "cases": [
                {
                    "target": {"kind": "subnet", "id": "sub1"},
                    "spec": loss_spec(pre=500.0, inject=1000.0, post=500.0),
                    "workload": {
                        "kind": "bandwidth",
                        "protocol": "udp",
                        "pkts_per_s": 100,
                        "payload_bytes": 64,
                        "duration_ms": 2000,
                        "attach": {"client_port_ids": ["vm1-port"], "server_id": "vm2-port"},
                    },
                }
            ],
        }
        resp = requests.post(server.url + "/campaigns", json=plan)
        assert resp.status_code == 201
        cid = resp.json()["campaign_id"]
        status = wait_for(
            lambda: (lambda s: s if s["state"] == "finished" else None)(
                requests.get(server.url + f"/campaigns/{cid}").json()
            )
        )
        assert status["cases_done"] == 2  # baseline + case
        report = requests.get(server.url + f"/campaigns/{cid}/report")
        assert report.status_code == 200
        parsed = json.loads(report.text)
        assert parsed["baseline"] is not None
        assert "campaign_id" not in parsed  # reports are client-independent
        csv = requests.get(server.url + f"/campaigns/{cid}/report/series.csv")
        assert csv.text.splitlines()[0] == "t_s,throughput,mean_latency_ms,mean_response_ms,error_rate,phase"
        log = requests.get(server.url + f"/campaigns/{cid}/report/events.log")
        assert log.status_code == 200
        assert log.text.strip()

    def test_campaign_stop_endpoint(self, server):
        plan = {
            "tenant_id": "demo",
            "cases": [
                {
                    "target": {"kind": "subnet", "id": "sub1"},
                    "spec": loss_spec(inject=3_600_000.0),
                    "workload": {
                        "kind": "bandwidth",
                        "protocol": "udp",
                        "pkts_per_s": 10,
                        "payload_bytes": 64,
                        "duration_ms": 3_600_000.0,
                        "attach": {"client_port_ids": ["vm1-port"], "server_id": "vm2-port"},
                    },
                }
            ],
        }
        cid = requests.post(server.url + "/campaigns", json=plan).json()["campaign_id"]
        wait_for(lambda: requests.get(server.url + f"/campaigns/{cid}").json()["state"] == "running")
        resp = requests.delete(server.url + f"/campaigns/{cid}")
        assert resp.status_code == 200
        assert resp.json()["state"] == "stopped"
        # report of a stopped campaign is still downloadable
        assert requests.get(server.url + f"/campaigns/{cid}/report").status_code == 200

    def test_report_of_running_campaign_400(self, server):
        plan = {
            "tenant_id": "demo",
            "cases": [
                {
                    "target": {"kind": "port", "id": "vm1-port"},
                    "spec": loss_spec(inject=3_600_000.0),
                    "workload": {
                        "kind": "bandwidth",
                        "protocol": "udp",
                        "pkts_per_s": 10,
                        "payload_bytes": 64,
                        "duration_ms": 3_600_000.0,
                        "attach": {"client_port_ids": ["vm1-port"], "server_id": "vm2-port"},
                    },
                }
            ],
        }
        cid = requests.post(server.url + "/campaigns", json=plan).json()["campaign_id"]
        wait_for(lambda: requests.get(server.url + f"/campaigns/{cid}").json()["state"] == "running")
        resp = requests.get(server.url + f"/campaigns/{cid}/report")
        assert resp.status_code == 400
        requests.delete(server.url + f"/campaigns/{cid}")

    def test_unknown_route_404(self, server):
        assert requests.get(server.url + "/nope").status_code == 404


class TestWallAnchoredMode:
    def test_simulated_clock_tracks_wall_time(self):
        from faultfabric.fabric.core import ClockMode
        from faultfabric.fabric import Topology, Fabric
        from faultfabric.topologies import builtin_topology

        fabric = Fabric(Topology.parse(builtin_topology("minimal_two_vm")), mode=ClockMode.WALL_ANCHORED)
        srv = RestServer(fabric)
        srv.start()
        try:
            t0 = requests.get(srv.url + "/health").json()["now_ms"]
            time.sleep(0.4)
            t1 = requests.get(srv.url + "/health").json()["now_ms"]
            elapsed = t1 - t0
            assert 250.0 <= elapsed <= 1500.0  # tracks wall time, not event fast-forwarding
        finally:
            srv.stop()
