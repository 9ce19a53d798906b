"""Command-line client over the REST API, for scripted fault injection from
existing test harnesses. ``--local`` spawns an embedded server over a
topology file so no long-running service is needed.

Exit codes: 0 success, 1 API/server error, 2 usage error.
"""

import argparse
import json
import os
import sys
import time

import requests

DEFAULT_URL = "http://127.0.0.1:8787"
POLL_S = 0.05


class CliError(Exception):
    def __init__(self, message, exit_code=1):
        super().__init__(message)
        self.exit_code = exit_code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="faultfabric",
        description="Fault injection as a service for virtual networks, on a simulated fabric.",
    )
    parser.add_argument("--url", default=None, help="server URL (or FAULTFABRIC_URL)")
    parser.add_argument("--local", action="store_true", help="run against an embedded server")
    parser.add_argument("--topology", default=None, help="topology file for --local / serve (or FAULTFABRIC_TOPOLOGY)")
    parser.add_argument("--seed", type=int, default=None, help="global seed (or FAULTFABRIC_SEED)")
    sub = parser.add_subparsers(dest="command")

    serve = sub.add_parser("serve", help="run the REST service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8787)
    serve.add_argument("--mode", choices=["deterministic", "wall"], default="deterministic")
    serve.add_argument("--reports-dir", default="reports")
    # accepted after the subcommand too; SUPPRESS keeps the global value
    serve.add_argument("--topology", default=argparse.SUPPRESS)
    serve.add_argument("--seed", type=int, default=argparse.SUPPRESS)

    topo = sub.add_parser("topology", help="print a tenant's virtual network graph")
    topo.add_argument("--tenant", required=True)

    inject = sub.add_parser("inject", help="inject a traffic fault into a resource")
    inject.add_argument("kind", choices=["network", "subnet", "router", "floatingip", "port"])
    inject.add_argument("id")
    inject.add_argument("--tenant", required=True)
    inject.add_argument("--fault", required=True, choices=["loss", "delay", "corruption", "duplication", "rate_limit"])
    inject.add_argument("--intensity", type=float, default=1.0)
    inject.add_argument("--pattern", choices=["random", "persistent", "bursty", "degradation"], default="persistent")
    inject.add_argument("--amount-ms", type=float, default=0.0, help="delay amount")
    inject.add_argument("--jitter-ms", type=float, default=0.0)
    inject.add_argument("--bytes", type=int, default=1, help="corrupted bytes per packet")
    inject.add_argument("--rate-pps", type=float, default=0.0, help="rate limit, packets per second")
    inject.add_argument("--burst", type=int, default=None)
    inject.add_argument("--period-ms", type=float, default=1000.0)
    inject.add_argument("--duty", type=float, default=0.5)
    inject.add_argument("--protocol", choices=["tcp", "udp"], default=None)
    inject.add_argument("--service-port", type=int, default=None)
    inject.add_argument("--pre", type=float, default=0.0, help="pre-injection ms")
    inject.add_argument("--inject", type=float, default=10_000.0, help="injection ms")
    inject.add_argument("--post", type=float, default=0.0, help="post-injection ms")
    inject.add_argument("--spec-seed", type=int, default=0)
    inject.add_argument("--wait", action="store_true", help="block until the handle completes")
    inject.add_argument("--timeout", type=float, default=300.0, help="--wait timeout, wall seconds")

    config = sub.add_parser("config-fault", help="delete a resource and restore it after an outage")
    config.add_argument("kind", choices=["network", "subnet", "router", "floatingip", "port"])
    config.add_argument("id")
    config.add_argument("--tenant", required=True)
    config.add_argument("--outage", type=float, required=True, help="outage ms")
    config.add_argument("--pre", type=float, default=0.0)
    config.add_argument("--post", type=float, default=0.0)
    config.add_argument("--wait", action="store_true")
    config.add_argument("--timeout", type=float, default=300.0)

    plan = sub.add_parser("plan", help="campaign lifecycle")
    plan_sub = plan.add_subparsers(dest="plan_command")
    plan_run = plan_sub.add_parser("run", help="run a plan file and save the report bundle")
    plan_run.add_argument("file")
    plan_run.add_argument("--out", default=None, help="bundle output directory")
    plan_run.add_argument("--timeout", type=float, default=600.0)
    plan_status = plan_sub.add_parser("status", help="show campaign progress")
    plan_status.add_argument("id")
    plan_stop = plan_sub.add_parser("stop", help="stop a campaign")
    plan_stop.add_argument("id")

    report = sub.add_parser("report", help="download a finished campaign's report bundle")
    report.add_argument("id")
    report.add_argument("--out", required=True)
    return parser


class Client:
    def __init__(self, url: str):
        self.url = url.rstrip("/")

    def request(self, method: str, path: str, body=None):
        try:
            resp = requests.request(method, self.url + path, json=body, timeout=30)
        except requests.RequestException as exc:
            raise CliError(f"cannot reach server at {self.url}: {exc}") from exc
        if resp.status_code >= 400:
            try:
                payload = resp.json()
                raise CliError(f"{payload.get('error', 'error')}: {payload.get('message', resp.text)}")
            except ValueError:
                raise CliError(f"HTTP {resp.status_code}: {resp.text}") from None
        return resp

    def get_json(self, path: str):
        return self.request("GET", path).json()


def _wait_injection(client: Client, handle_id: str, timeout_s: float):
    deadline = time.monotonic() + timeout_s
    while time.monotonic() < deadline:
        status = client.get_json(f"/injections/{handle_id}")
        if status["phase"] in ("completed", "aborted", "failed"):
            return status
        time.sleep(POLL_S)
    raise CliError(f"timed out waiting for injection {handle_id}")


def _wait_campaign(client: Client, campaign_id: str, timeout_s: float):
    deadline = time.monotonic() + timeout_s
    while time.monotonic() < deadline:
        status = client.get_json(f"/campaigns/{campaign_id}")
        if status["state"] in ("finished", "stopped"):
            return status
        time.sleep(POLL_S)
    raise CliError(f"timed out waiting for campaign {campaign_id}")


def _download_bundle(client: Client, campaign_id: str, out_dir: str):
    os.makedirs(out_dir, exist_ok=True)
    for name, path in (
        ("report.json", f"/campaigns/{campaign_id}/report"),
        ("series.csv", f"/campaigns/{campaign_id}/report/series.csv"),
        ("events.log", f"/campaigns/{campaign_id}/report/events.log"),
    ):
        resp = client.request("GET", path)
        with open(os.path.join(out_dir, name), "wb") as fh:
            fh.write(resp.content)
    return out_dir


def _spec_from_args(args) -> dict:
    spec = {
        "fault_type": args.fault,
        "intensity": args.intensity,
        "pattern": args.pattern,
        "amount_ms": args.amount_ms,
        "jitter_ms": args.jitter_ms,
        "bytes_affected": args.bytes,
        "rate_pkts_per_s": args.rate_pps,
        "burst_pkts": args.burst,
        "period_ms": args.period_ms,
        "duty_fraction": args.duty,
        "timing": {"pre_ms": args.pre, "inject_ms": args.inject, "post_ms": args.post},
        "seed": args.spec_seed,
    }
    if args.protocol:
        spec["protocol_filter"] = {"protocol": args.protocol, "service_port": args.service_port}
    return spec


def _load_local_fabric(args, mode="deterministic"):
    from .fabric.core import ClockMode, load_topology_file

    path = args.topology or os.environ.get("FAULTFABRIC_TOPOLOGY")
    if not path:
        raise CliError("--local needs --topology or FAULTFABRIC_TOPOLOGY", exit_code=2)
    if not os.path.exists(path):
        raise CliError(f"topology file not found: {path}", exit_code=2)
    seed = args.seed if args.seed is not None else int(os.environ.get("FAULTFABRIC_SEED", "0"))
    clock_mode = ClockMode.WALL_ANCHORED if mode == "wall" else ClockMode.DETERMINISTIC
    return load_topology_file(path, seed=seed, mode=clock_mode)


def run(argv) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return 2
    if args.command == "plan" and args.plan_command is None:
        parser.parse_args(["plan", "--help"])
        return 2

    try:
        if args.command == "serve":
            from .restapi import RestServer

            fabric = _load_local_fabric(args, mode=args.mode)
            server = RestServer(fabric, host=args.host, port=args.port, reports_dir=args.reports_dir)
            server.start()
            print(f"serving on {server.url} (mode={args.mode})")
            try:
                while True:
                    time.sleep(1)
            except KeyboardInterrupt:
                server.stop()
            return 0

        local_server = None
        if args.local:
            from .restapi import RestServer

            fabric = _load_local_fabric(args)
            local_server = RestServer(fabric)
            local_server.start()
            url = local_server.url
        else:
            url = args.url or os.environ.get("FAULTFABRIC_URL") or DEFAULT_URL
        client = Client(url)

        try:
            return dispatch(client, args)
        finally:
            if local_server is not None:
                local_server.stop()
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


def dispatch(client: Client, args) -> int:
    if args.command == "topology":
        payload = client.get_json(f"/topology?tenant={args.tenant}")
        print(json.dumps(payload, indent=2, sort_keys=True))
        return 0

    if args.command == "inject":
        body = {"tenant_id": args.tenant, "id": args.id, "spec": _spec_from_args(args)}
        handle = client.request("POST", f"/inject/{args.kind}", body).json()
        print(handle["id"])
        if args.wait:
            status = _wait_injection(client, handle["id"], args.timeout)
            print(f"phase: {status['phase']}", file=sys.stderr)
            if status["phase"] == "failed":
                raise CliError(status.get("error") or "injection failed")
        return 0

    if args.command == "config-fault":
        body = {
            "tenant_id": args.tenant,
            "kind": args.kind,
            "id": args.id,
            "outage_ms": args.outage,
            "pre_ms": args.pre,
            "post_ms": args.post,
        }
        handle = client.request("POST", "/inject/config", body).json()
        print(handle["id"])
        if args.wait:
            status = _wait_injection(client, handle["id"], args.timeout)
            print(f"phase: {status['phase']}", file=sys.stderr)
            if status["phase"] == "failed":
                raise CliError(status.get("error") or "config fault failed")
        return 0

    if args.command == "plan":
        if args.plan_command == "run":
            if not os.path.exists(args.file):
                raise CliError(f"plan file not found: {args.file}", exit_code=2)
            try:
                with open(args.file, "r", encoding="utf-8") as fh:
                    plan = json.load(fh)
            except json.JSONDecodeError as exc:
                raise CliError(f"plan file is not valid JSON: {exc}", exit_code=2) from exc
            created = client.request("POST", "/campaigns", plan).json()
            cid = created["campaign_id"]
            print(cid)
            status = _wait_campaign(client, cid, args.timeout)
            print(f"state: {status['state']}", file=sys.stderr)
            out = args.out or os.path.join("reports", f"campaign-{cid}")
            _download_bundle(client, cid, out)
            print(out)
            return 0
        if args.plan_command == "status":
            print(json.dumps(client.get_json(f"/campaigns/{args.id}"), indent=2, sort_keys=True))
            return 0
        if args.plan_command == "stop":
            client.request("DELETE", f"/campaigns/{args.id}")
            print("stopped")
            return 0

    if args.command == "report":
        out = _download_bundle(client, args.id, args.out)
        print(out)
        return 0

    raise CliError(f"unknown command {args.command!r}", exit_code=2)


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
