import json
import os

import pytest
import requests

from faultfabric.cli import run
from faultfabric.restapi import RestServer
from faultfabric.topologies import builtin_topology

from conftest import make_fabric


@pytest.fixture
def topo_file(tmp_path):
    path = tmp_path / "two_vm.json"
    path.write_text(json.dumps(builtin_topology("minimal_two_vm")))
    return str(path)


@pytest.fixture
def plan_file(tmp_path):
    plan = {
        "tenant_id": "demo",
        "cases": [
            {
                "target": {"kind": "subnet", "id": "sub1"},
                "spec": {
                    "fault_type": "loss",
                    "pattern": "persistent",
                    "timing": {"pre_ms": 500, "inject_ms": 1000, "post_ms": 500},
                },
                "workload": {
                    "kind": "bandwidth",
                    "protocol": "udp",
                    "pkts_per_s": 50,
                    "payload_bytes": 64,
                    "duration_ms": 2000,
                    "attach": {"client_port_ids": ["vm1-port"], "server_id": "vm2-port"},
                },
            }
        ],
    }
    path = tmp_path / "plan.json"
    path.write_text(json.dumps(plan))
    return str(path)


class TestTopologyCommand:
    def test_output_matches_rest_payload(self, topo_file, capsys):
        server = RestServer(make_fabric("minimal_two_vm"))
        server.start()
        try:
            payload = requests.get(server.url + "/topology?tenant=demo").json()
        finally:
            server.stop()
        code = run(["--local", "--topology", topo_file, "topology", "--tenant", "demo"])
        out = capsys.readouterr().out
        assert code == 0
        assert out == json.dumps(payload, indent=2, sort_keys=True) + "\n"

    def test_matches_golden_file(self, topo_file, capsys):
        code = run(["--local", "--topology", topo_file, "topology", "--tenant", "demo"])
        assert code == 0
        out = capsys.readouterr().out
        golden = os.path.join(os.path.dirname(__file__), "golden", "topology_two_vm.txt")
        with open(golden, "r", encoding="utf-8") as fh:
            assert out == fh.read()

    def test_unknown_tenant_is_api_error(self, topo_file, capsys):
        code = run(["--local", "--topology", topo_file, "topology", "--tenant", "ghost"])
        assert code == 1
        assert "unknown_tenant" in capsys.readouterr().err


class TestInjectCommand:
    def test_inject_wait_completes(self, topo_file, capsys):
        code = run([
            "--local", "--topology", topo_file,
            "inject", "router", "r1", "--tenant", "demo",
            "--fault", "loss", "--pattern", "persistent",
            "--pre", "1000", "--inject", "2000", "--post", "500",
            "--wait",
        ])
        captured = capsys.readouterr()
        assert code == 0
        assert captured.out.strip().startswith("inj-")
        assert "phase: completed" in captured.err

    def test_config_fault_wait(self, topo_file, capsys):
        code = run([
            "--local", "--topology", topo_file,
            "config-fault", "floatingip", "fip1", "--tenant", "demo",
            "--outage", "500", "--wait",
        ])
        assert code == 0
        assert "phase: completed" in capsys.readouterr().err

    def test_cross_tenant_inject_fails_with_exit_1(self, topo_file, capsys):
        code = run([
            "--local", "--topology", topo_file,
            "inject", "port", "vm1-port", "--tenant", "infra",
            "--fault", "loss",
        ])
        assert code == 1
        assert "not_owner" in capsys.readouterr().err


class TestPlanCommands:
    def test_missing_plan_file_is_usage_error(self, topo_file, capsys):
        code = run(["--local", "--topology", topo_file, "plan", "run", "missing.json"])
        assert code == 2

    def test_plan_run_writes_bundle(self, topo_file, plan_file, tmp_path, capsys):
        out_dir = str(tmp_path / "bundle")
        code = run([
            "--local", "--topology", topo_file,
            "plan", "run", plan_file, "--out", out_dir,
        ])
        assert code == 0
        for name in ("report.json", "series.csv", "events.log"):
            assert os.path.exists(os.path.join(out_dir, name))
        report = json.loads(open(os.path.join(out_dir, "report.json")).read())
        assert report["cases"][0]["case_id"] == "case0"

    def test_usage_error_on_bad_args(self):
        with pytest.raises(SystemExit) as exc:
            run(["inject", "volcano", "x", "--tenant", "t", "--fault", "loss"])
        assert exc.value.code == 2

    def test_no_command_prints_help(self, capsys):
        assert run([]) == 2


class TestReportCommand:
    def test_report_download_after_server_run(self, topo_file, plan_file, tmp_path, capsys):
        # run a campaign against a shared local server, then fetch its bundle
        from faultfabric.fabric.core import load_topology_file

        server = RestServer(load_topology_file(topo_file))
        server.start()
        try:
            plan = json.loads(open(plan_file).read())
            cid = requests.post(server.url + "/campaigns", json=plan).json()["campaign_id"]
            import time

            deadline = time.monotonic() + 10
            while time.monotonic() < deadline:
                if requests.get(server.url + f"/campaigns/{cid}").json()["state"] == "finished":
                    break
                time.sleep(0.02)
            out_dir = str(tmp_path / "dl")
            code = run(["--url", server.url, "report", cid, "--out", out_dir])
            assert code == 0
            assert os.path.exists(os.path.join(out_dir, "report.json"))

            status_code = run(["--url", server.url, "plan", "status", cid])
            assert status_code == 0
        finally:
            server.stop()

    def test_plan_stop_command(self, topo_file, tmp_path, capsys):
        from faultfabric.fabric.core import load_topology_file

        server = RestServer(load_topology_file(topo_file))
        server.start()
        try:
            plan = {
                "tenant_id": "demo",
                "cases": [{
                    "target": {"kind": "subnet", "id": "sub1"},
                    "spec": {"fault_type": "loss", "pattern": "persistent",
                             "timing": {"pre_ms": 0, "inject_ms": 3_600_000, "post_ms": 0}},
                    "workload": {"kind": "bandwidth", "protocol": "udp", "pkts_per_s": 10,
                                 "payload_bytes": 64, "duration_ms": 3_600_000,
                                 "attach": {"client_port_ids": ["vm1-port"], "server_id": "vm2-port"}},
                }],
            }
            cid = requests.post(server.url + "/campaigns", json=plan).json()["campaign_id"]
            assert run(["--url", server.url, "plan", "stop", cid]) == 0
            assert requests.get(server.url + f"/campaigns/{cid}").json()["state"] == "stopped"
        finally:
            server.stop()
