"""Front-end service: resource-level injection APIs, config-fault
delete/restore with automatic undo, campaign lifecycle (start/status/stop),
and report bundle export.

All work is scheduled on the fabric clock; a campaign is a chain of events
(case setup, injection trigger, case teardown) so the same code runs under
the deterministic fast-forward driver and the wall-anchored pacer.
"""

import json
import math
import threading
from dataclasses import dataclass, field

from .errors import (
    AlreadyFinished,
    CampaignAlreadyRunning,
    FaultFabricError,
    ItemBusy,
    NotOwner,
    NotTerminated,
    PlanInvalid,
    UnknownCampaign,
    UnknownInjection,
    UnknownResource,
    UnknownTenant,
    ValidationError,
)
from .fabric.core import Fabric
from .faults import FaultSpec
from .mapper import get_network_topology, resolve_items
from .workload import WorkloadHandle, compute_metrics, config_from_dict, deploy_workload

INJECTABLE_KINDS = ("network", "subnet", "router", "floating_ip", "port")
CONFIG_FAULT_KINDS = ("network", "subnet", "router", "floating_ip", "port")


@dataclass
class InjectionHandle:
    id: str
    tenant_id: str
    kind: str
    resource_id: str
    spec: FaultSpec | None
    item_ids: list[str]
    created_at: float
    inject_start: float
    inject_end: float
    completes_at: float
    config_outage_ms: float | None = None
    snapshot: object = None
    aborted: bool = False
    error: str | None = None
    scheduled: list = field(default_factory=list)

    def phase(self, now: float) -> str:
        if self.aborted:
            return "aborted"
        if self.error:
            return "failed"
        if now < self.inject_start:
            return "pre_injection"
        if now < self.inject_end:
            return "injecting"
        if now < self.completes_at:
            return "post_injection"
        return "completed"

    def to_dict(self, now: float) -> dict:
        return {
            "id": self.id,
            "tenant_id": self.tenant_id,
            "kind": self.kind,
            "resource_id": self.resource_id,
            "mode": "config_fault" if self.config_outage_ms is not None else "traffic",
            "spec": self.spec.to_dict() if self.spec else None,
            "outage_ms": self.config_outage_ms,
            "items": list(self.item_ids),
            "phase": self.phase(now),
            "timestamps": {
                "created_at": self.created_at,
                "inject_start": self.inject_start,
                "inject_end": self.inject_end,
                "completes_at": self.completes_at,
            },
            "error": self.error,
        }


@dataclass
class TestCase:
    case_id: str
    target_kind: str
    target_id: str
    spec: FaultSpec | None
    config_fault: dict | None
    workload: object
    repetitions: int
    trigger_repetition: int

    def duration_ms(self) -> float:
        if self.repetitions > 1:
            return self.repetitions * self.workload.duration_ms
        if self.config_fault is not None:
            return (
                self.config_fault.get("pre_ms", 0.0)
                + self.config_fault["outage_ms"]
                + self.config_fault.get("post_ms", 0.0)
            )
        return self.spec.timing.total_ms()


@dataclass
class CaseResult:
    case_id: str
    started_at: float
    ended_at: float
    phases: dict
    metrics: dict
    repetitions: list
    handle_id: str | None
    aborted: bool = False
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "phases": self.phases,
            "metrics": self.metrics,
            "repetitions": self.repetitions,
            "aborted": self.aborted,
            "error": self.error,
        }


@dataclass
class Campaign:
    id: str
    tenant_id: str
    plan: dict
    cases: list
    baseline: bool
    state: str = "pending"  # pending | running | stopped | finished
    current_index: int = -1
    results: list = field(default_factory=list)
    started_at: float | None = None
    finished_at: float | None = None
    scheduled: list = field(default_factory=list)
    active_handle: InjectionHandle | None = None
    active_workload: WorkloadHandle | None = None
    log_start: int = 0
    log_end: int | None = None


class Orchestrator:
    def __init__(self, fabric: Fabric, reports_dir: str = "reports"):
        self.fabric = fabric
        self.reports_dir = reports_dir
        self.lock = threading.RLock()
        self.handles: dict[str, InjectionHandle] = {}
        self.campaigns: dict[str, Campaign] = {}
        self._item_claims: dict[str, str] = {}
        self._handle_seq = 0
        self._campaign_seq = 0

    # ------------------------------------------------------------------
    # topology

    def topology(self, tenant_id: str) -> dict:
        return get_network_topology(self.fabric.topology, tenant_id)

    # ------------------------------------------------------------------
    # direct injection APIs

    def _check_owner(self, tenant_id: str, kind: str, resource_id: str):
        if tenant_id not in self.fabric.topology.tenants:
            raise UnknownTenant(f"tenant {tenant_id!r} not found")
        try:
            resource = self.fabric.topology.get(kind, resource_id)
        except FaultFabricError:
            raise UnknownResource(f"{kind} {resource_id!r} not found") from None
        owner = getattr(resource, "tenant_id", None)
        if owner is None and kind == "subnet":
            network = self.fabric.topology.networks.get(resource.network_id)
            owner = network.tenant_id if network else None
        if owner != tenant_id:
            raise NotOwner(f"{kind} {resource_id!r} is not owned by tenant {tenant_id!r}")
        return resource

    def _claim_items(self, handle_id: str, item_ids: list[str]):
        clash = [iid for iid in item_ids if iid in self._item_claims]
        if clash:
            raise ItemBusy(f"items already targeted by another injection: {sorted(clash)}")
        for iid in item_ids:
            self._item_claims[iid] = handle_id

    def _release_items(self, handle_id: str):
        for iid in [k for k, v in self._item_claims.items() if v == handle_id]:
            del self._item_claims[iid]

    def inject_resource(self, tenant_id: str, kind: str, resource_id: str, spec: FaultSpec) -> InjectionHandle:
        if kind not in INJECTABLE_KINDS:
            raise UnknownResource(f"cannot inject resource kind {kind!r}")
        self._check_owner(tenant_id, kind, resource_id)
        items = resolve_items(self.fabric.item_map, kind, resource_id)
        if not items:
            raise ValidationError(f"{kind} {resource_id!r} has no injectable items")
        self._handle_seq += 1
        now = self.fabric.now
        handle = InjectionHandle(
            id=f"inj-{self._handle_seq}",
            tenant_id=tenant_id,
            kind=kind,
            resource_id=resource_id,
            spec=spec,
            item_ids=[i.id for i in items],
            created_at=now,
            inject_start=now + spec.timing.pre_ms,
            inject_end=now + spec.timing.pre_ms + spec.timing.inject_ms,
            completes_at=now + spec.timing.total_ms(),
        )
        self._claim_items(handle.id, handle.item_ids)
        self.handles[handle.id] = handle

        def start_injection():
            from .agents import Inject

            for item_id in handle.item_ids:
                item = self.fabric.item_map.get(item_id)
                if item is None:
                    handle.error = f"item {item_id} vanished before injection"
                    continue
                reply = self.fabric.agents[item.location].handle_command(Inject(item_id, spec))
                if reply.__class__.__name__ == "Error":
                    handle.error = f"{reply.code}: {reply.message}"

        def clear_injection():
            self._clear_handle_items(handle)

        def finish():
            self._release_items(handle.id)

        handle.scheduled.append(self.fabric.schedule(handle.inject_start, start_injection))
        handle.scheduled.append(self.fabric.schedule(handle.inject_end, clear_injection))
        handle.scheduled.append(self.fabric.schedule(handle.completes_at, finish))
        return handle

    def _clear_handle_items(self, handle: InjectionHandle):
        from .agents import Clear

        for item_id in handle.item_ids:
            item = self.fabric.item_map.get(item_id)
            if item is None:
                continue
            agent = self.fabric.agents[item.location]
            if item_id in agent.active:
                agent.handle_command(Clear(item_id))

    def inject_config_fault(
        self, tenant_id: str, kind: str, resource_id: str, outage_ms: float,
        pre_ms: float = 0.0, post_ms: float = 0.0,
    ) -> InjectionHandle:
        if kind not in CONFIG_FAULT_KINDS:
            raise UnknownResource(f"cannot delete resource kind {kind!r}")
        if outage_ms <= 0:
            raise ValidationError("outage_ms must be positive")
        self._check_owner(tenant_id, kind, resource_id)
        members, _, _ = self.fabric.topology.closure(kind, resource_id)
        from .mapper import item_id_for_port

        closure_items = [item_id_for_port(obj.id) for k, obj in members if k == "port"]
        self._handle_seq += 1
        now = self.fabric.now
        handle = InjectionHandle(
            id=f"inj-{self._handle_seq}",
            tenant_id=tenant_id,
            kind=kind,
            resource_id=resource_id,
            spec=None,
            item_ids=closure_items,
            created_at=now,
            inject_start=now + pre_ms,
            inject_end=now + pre_ms + outage_ms,
            completes_at=now + pre_ms + outage_ms + post_ms,
            config_outage_ms=outage_ms,
        )
        self._claim_items(handle.id, handle.item_ids)
        self.handles[handle.id] = handle

        def do_delete():
            try:
                handle.snapshot = self.fabric.delete_resource(kind, resource_id)
            except FaultFabricError as exc:
                handle.error = f"{exc.code}: {exc.message}"

        def do_restore():
            if handle.snapshot is None:
                return
            try:
                self.fabric.restore_resource(handle.snapshot)
                handle.snapshot = None
            except FaultFabricError as exc:
                handle.error = f"restore_failed: {exc.message}"

        def finish():
            self._release_items(handle.id)

        handle.scheduled.append(self.fabric.schedule(handle.inject_start, do_delete))
        handle.scheduled.append(self.fabric.schedule(handle.inject_end, do_restore))
        handle.scheduled.append(self.fabric.schedule(handle.completes_at, finish))
        return handle

    def get_injection(self, handle_id: str) -> dict:
        handle = self.handles.get(handle_id)
        if handle is None:
            raise UnknownInjection(f"injection {handle_id!r} not found")
        return handle.to_dict(self.fabric.now)

    def cancel_injection(self, handle_id: str):
        """Early clear: stop the fault now and undo any pending restore."""
        handle = self.handles.get(handle_id)
        if handle is None:
            raise UnknownInjection(f"injection {handle_id!r} not found")
        if handle.phase(self.fabric.now) in ("completed", "aborted"):
            raise AlreadyFinished(f"injection {handle_id!r} already terminal")
        self._abort_handle(handle)

    def _abort_handle(self, handle: InjectionHandle):
        for ev in handle.scheduled:
            ev.cancel()
        self._clear_handle_items(handle)
        if handle.snapshot is not None:
            try:
                self.fabric.restore_resource(handle.snapshot)
                handle.snapshot = None
            except FaultFabricError as exc:
                handle.error = f"restore_failed: {exc.message}"
        self._release_items(handle.id)
        handle.aborted = True

    # ------------------------------------------------------------------
    # campaign lifecycle

    def _parse_plan(self, tenant_id: str, plan: dict) -> tuple[list[TestCase], bool]:
        if tenant_id not in self.fabric.topology.tenants:
            raise UnknownTenant(f"tenant {tenant_id!r} not found")
        raw_cases = plan.get("cases")
        if raw_cases is None or not isinstance(raw_cases, list):
            raise PlanInvalid("plan needs a 'cases' array")
        cases: list[TestCase] = []
        for i, raw in enumerate(raw_cases):
            case_id = raw.get("id") or f"case{i}"
            spec_obj = raw.get("spec")
            config_obj = raw.get("config_fault")
            if (spec_obj is None) == (config_obj is None):
                raise PlanInvalid(f"{case_id}: exactly one of 'spec' or 'config_fault' is required")
            if raw.get("workload") is None:
                raise PlanInvalid(f"{case_id}: workload config is required")
            try:
                workload = config_from_dict(raw["workload"])
                # attach validation without binding anything
                deploy_workload(self.fabric, tenant_id, workload, workload_id=f"probe-{case_id}")
            except FaultFabricError as exc:
                raise PlanInvalid(f"{case_id}: {exc.message}") from exc
            spec = None
            config_fault = None
            if spec_obj is not None:
                target = raw.get("target") or {}
                kind, rid = target.get("kind"), target.get("id")
                if kind not in INJECTABLE_KINDS:
                    raise PlanInvalid(f"{case_id}: bad target kind {kind!r}")
                try:
                    spec = FaultSpec.from_dict(spec_obj)
                    self._check_owner(tenant_id, kind, rid)
                    if not resolve_items(self.fabric.item_map, kind, rid):
                        raise PlanInvalid(f"{case_id}: target has no injectable items")
                except FaultFabricError as exc:
                    raise PlanInvalid(f"{case_id}: {exc.message}") from exc
            else:
                kind, rid = config_obj.get("kind"), config_obj.get("id")
                if kind not in CONFIG_FAULT_KINDS:
                    raise PlanInvalid(f"{case_id}: bad config-fault kind {kind!r}")
                try:
                    self._check_owner(tenant_id, kind, rid)
                except FaultFabricError as exc:
                    raise PlanInvalid(f"{case_id}: {exc.message}") from exc
                outage = float(config_obj.get("outage_ms", 0))
                if outage <= 0:
                    raise PlanInvalid(f"{case_id}: outage_ms must be positive")
                config_fault = {
                    "kind": kind,
                    "id": rid,
                    "outage_ms": outage,
                    "pre_ms": float(config_obj.get("pre_ms", 0.0)),
                    "post_ms": float(config_obj.get("post_ms", 0.0)),
                }
            repetitions = int(raw.get("repetitions", 1))
            if repetitions < 1:
                raise PlanInvalid(f"{case_id}: repetitions must be >= 1")
            trigger = int(raw.get("trigger_repetition", repetitions // 2))
            if repetitions > 1 and not 0 <= trigger < repetitions:
                raise PlanInvalid(f"{case_id}: trigger_repetition out of range")
            cases.append(
                TestCase(
                    case_id=case_id,
                    target_kind=kind,
                    target_id=rid,
                    spec=spec,
                    config_fault=config_fault,
                    workload=workload,
                    repetitions=repetitions,
                    trigger_repetition=trigger,
                )
            )
        return cases, bool(plan.get("baseline", False))

    def start_tests(self, tenant_id: str, plan: dict) -> str:
        for campaign in self.campaigns.values():
            if campaign.tenant_id == tenant_id and campaign.state in ("pending", "running"):
                raise CampaignAlreadyRunning(f"tenant {tenant_id!r} already has campaign {campaign.id} running")
        cases, baseline = self._parse_plan(tenant_id, plan)
        self._campaign_seq += 1
        campaign = Campaign(
            id=f"c-{self._campaign_seq}",
            tenant_id=tenant_id,
            plan=plan,
            cases=cases,
            baseline=baseline,
        )
        self.campaigns[campaign.id] = campaign
        # hermetic start: snap to the next whole second and reset balancer
        # runtime so identical plans produce identical bundles
        t0 = math.ceil(self.fabric.now / 1000.0) * 1000.0
        if t0 <= self.fabric.now and self.fabric.now > 0:
            t0 += 1000.0

        def begin():
            campaign.state = "running"
            campaign.started_at = self.fabric.now
            campaign.log_start = len(self.fabric.flow_log)
            self.fabric.reset_service_state()
            if not campaign.cases:
                self._finish_campaign(campaign)
                return
            queue = []
            if campaign.baseline:
                queue.append(("baseline", campaign.cases[0]))
            queue.extend(("case", case) for case in campaign.cases)
            self._run_next_case(campaign, queue, 0)

        campaign.scheduled.append(self.fabric.schedule(t0, begin))
        return campaign.id

    def _case_drain_ms(self, case: TestCase) -> float:
        cfg = case.workload
        timeout = getattr(cfg, "timeout_ms", 0.0)
        return float(timeout) + 1000.0

    def _run_next_case(self, campaign: Campaign, queue: list, index: int):
        if campaign.state != "running":
            return
        if index >= len(queue):
            self._finish_campaign(campaign)
            return
        mode, case = queue[index]
        campaign.current_index = index
        start = self.fabric.now
        duration = case.duration_ms()
        workload = deploy_workload(
            self.fabric, campaign.tenant_id, case.workload,
            workload_id=f"{'bl' if mode == 'baseline' else case.case_id}-wl",
        )
        campaign.active_workload = workload
        handle = None
        rep_windows: list[tuple[float, float]] = []
        if case.repetitions > 1:
            rep_dur = case.workload.duration_ms
            for k in range(case.repetitions):
                rep_start = start + k * rep_dur
                rep_windows.append((rep_start, rep_start + rep_dur))
                workload_start = self.fabric.schedule(rep_start, lambda s=rep_start: workload.start(s))
                campaign.scheduled.append(workload_start)
        else:
            workload.config = _with_duration(case.workload, duration)
            workload.start(start)

        trigger_error: list[str] = []
        if mode == "case":
            trigger_at = start if case.repetitions == 1 else start + case.trigger_repetition * case.workload.duration_ms

            def trigger():
                try:
                    if case.config_fault is not None:
                        cf = case.config_fault
                        campaign.active_handle = self.inject_config_fault(
                            campaign.tenant_id, cf["kind"], cf["id"], cf["outage_ms"],
                            pre_ms=cf["pre_ms"], post_ms=cf["post_ms"],
                        )
                    else:
                        campaign.active_handle = self.inject_resource(
                            campaign.tenant_id, case.target_kind, case.target_id, case.spec
                        )
                except FaultFabricError as exc:
                    trigger_error.append(f"{exc.code}: {exc.message}")

            campaign.scheduled.append(self.fabric.schedule(trigger_at, trigger))

        end = start + duration
        drain = self._case_drain_ms(case)

        def finish_case():
            nonlocal handle
            handle = campaign.active_handle
            workload.stop()
            if handle is not None and handle.phase(self.fabric.now) not in ("completed", "aborted"):
                self._abort_handle(handle)
            phases = self._case_phases(handle, start)
            phase_fn = _phase_annotator(phases, start)
            metrics = compute_metrics(workload.events, (start, end), phase_for_second=phase_fn)
            reps = []
            if rep_windows:
                inj_lo, inj_hi = phases.get("inject", (None, None))
                for k, (lo, hi) in enumerate(rep_windows):
                    rep_metrics = compute_metrics(workload.events, (lo, hi))
                    exposed = (
                        inj_lo is not None
                        and lo - start < inj_hi
                        and hi - start > inj_lo
                    )
                    reps.append(
                        {
                            "index": k,
                            "start_ms": lo - start,
                            "end_ms": hi - start,
                            "fault_exposed": bool(exposed),
                            "sent": rep_metrics.sent,
                            "delivered": rep_metrics.delivered,
                            "errors": rep_metrics.errors,
                        }
                    )
            campaign.results.append(
                CaseResult(
                    case_id="baseline" if mode == "baseline" else case.case_id,
                    started_at=start,
                    ended_at=end,
                    phases=phases,
                    metrics=metrics.to_dict(),
                    repetitions=reps,
                    handle_id=handle.id if handle else None,
                    error=trigger_error[0] if trigger_error else None,
                )
            )
            campaign.active_handle = None
            campaign.active_workload = None
            self._run_next_case(campaign, queue, index + 1)

        campaign.scheduled.append(self.fabric.schedule(end + drain, finish_case))

    def _case_phases(self, handle: InjectionHandle | None, case_start: float) -> dict:
        if handle is None:
            return {}
        return {
            "pre": (handle.created_at - case_start, handle.inject_start - case_start),
            "inject": (handle.inject_start - case_start, handle.inject_end - case_start),
            "post": (handle.inject_end - case_start, handle.completes_at - case_start),
        }

    def _finish_campaign(self, campaign: Campaign):
        campaign.state = "finished"
        campaign.finished_at = self.fabric.now
        campaign.log_end = len(self.fabric.flow_log)

    def status_tests(self, campaign_id: str) -> dict:
        campaign = self.campaigns.get(campaign_id)
        if campaign is None:
            raise UnknownCampaign(f"campaign {campaign_id!r} not found")
        total = len(campaign.cases) + (1 if campaign.baseline else 0)
        status = {
            "campaign_id": campaign.id,
            "tenant_id": campaign.tenant_id,
            "state": campaign.state,
            "cases_total": total,
            "cases_done": len(campaign.results),
            "current_case": None,
            "results": [r.to_dict() for r in campaign.results],
        }
        if campaign.state == "running" and campaign.current_index >= 0:
            handle = campaign.active_handle
            status["current_case"] = {
                "index": campaign.current_index,
                "phase": handle.phase(self.fabric.now) if handle else "pre_injection",
            }
        return status

    def stop_tests(self, campaign_id: str):
        campaign = self.campaigns.get(campaign_id)
        if campaign is None:
            raise UnknownCampaign(f"campaign {campaign_id!r} not found")
        if campaign.state in ("finished", "stopped"):
            raise AlreadyFinished(f"campaign {campaign_id!r} already terminal")
        for ev in campaign.scheduled:
            ev.cancel()
        if campaign.active_workload is not None:
            campaign.active_workload.stop()
            campaign.active_workload = None
        if campaign.active_handle is not None:
            if campaign.active_handle.phase(self.fabric.now) not in ("completed", "aborted"):
                self._abort_handle(campaign.active_handle)
            campaign.active_handle = None
        campaign.state = "stopped"
        campaign.finished_at = self.fabric.now
        campaign.log_end = len(self.fabric.flow_log)

    # ------------------------------------------------------------------
    # driving (library mode / deterministic server driver)

    def run_until_complete(self, campaign_ids=None, max_ms: float = 36_000_000.0):
        """Step the fabric until the given campaigns (default: all) reach a
        terminal state."""
        if campaign_ids is None:
            campaign_ids = list(self.campaigns)
        deadline = self.fabric.now + max_ms

        def busy():
            return any(self.campaigns[cid].state in ("pending", "running") for cid in campaign_ids)

        while busy():
            t = self.fabric.next_event_time()
            if t is None or t > deadline:
                raise ValidationError("campaign did not complete within the stepping budget")
            self.fabric.step(t)

    # ------------------------------------------------------------------
    # reports

    def campaign_report(self, campaign_id: str) -> dict:
        campaign = self.campaigns.get(campaign_id)
        if campaign is None:
            raise UnknownCampaign(f"campaign {campaign_id!r} not found")
        if campaign.state not in ("finished", "stopped"):
            raise NotTerminated(f"campaign {campaign_id!r} still {campaign.state}")
        t0 = campaign.started_at or 0.0
        cases = []
        baseline_row = None
        for result in campaign.results:
            row = result.to_dict()
            row["start_ms"] = result.started_at - t0
            row["end_ms"] = result.ended_at - t0
            if result.case_id == "baseline":
                baseline_row = row
            else:
                cases.append(row)
        return {
            "tenant_id": campaign.tenant_id,
            "state": campaign.state,
            "seed": self.fabric.seed,
            "baseline": baseline_row,
            "cases": cases,
        }

    def save_logs(self, campaign_id: str, out_dir: str | None = None) -> str:
        import os

        campaign = self.campaigns.get(campaign_id)
        if campaign is None:
            raise UnknownCampaign(f"campaign {campaign_id!r} not found")
        report = self.campaign_report(campaign_id)
        path = out_dir or os.path.join(self.reports_dir, f"campaign-{campaign_id}")
        os.makedirs(path, exist_ok=True)
        with open(os.path.join(path, "report.json"), "w", encoding="utf-8") as fh:
            fh.write(render_report_json(report))
        with open(os.path.join(path, "series.csv"), "w", encoding="utf-8", newline="") as fh:
            fh.write(render_series_csv(report))
        with open(os.path.join(path, "events.log"), "w", encoding="utf-8") as fh:
            fh.write(self.render_events_log(campaign_id))
        return path

    def render_events_log(self, campaign_id: str) -> str:
        campaign = self.campaigns.get(campaign_id)
        if campaign is None:
            raise UnknownCampaign(f"campaign {campaign_id!r} not found")
        if campaign.state not in ("finished", "stopped"):
            raise NotTerminated(f"campaign {campaign_id!r} still {campaign.state}")
        t0 = campaign.started_at or 0.0
        end = campaign.log_end if campaign.log_end is not None else len(self.fabric.flow_log)
        lines = []
        for ev in self.fabric.flow_log[campaign.log_start:end]:
            if ev.tenant_id != campaign.tenant_id:
                continue
            row = ev.to_dict()
            for key in ("t", "sent_at", "first_byte_t", "last_byte_t"):
                if row[key] is not None:
                    row[key] = row[key] - t0
            lines.append(json.dumps(row, sort_keys=True))
        return "\n".join(lines) + ("\n" if lines else "")


def _with_duration(config, duration_ms: float):
    from dataclasses import replace

    return replace(config, duration_ms=duration_ms)


def _phase_annotator(phases: dict, case_start: float):
    """Maps a bucket's absolute start time to the phase name active then."""

    def annotate(abs_ms: float) -> str:
        t_rel = abs_ms - case_start
        for name in ("pre", "inject", "post"):
            window = phases.get(name)
            if window and window[0] <= t_rel < window[1]:
                return name
        return "none"

    return annotate


def render_report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def render_series_csv(report: dict) -> str:
    lines = ["t_s,throughput,mean_latency_ms,mean_response_ms,error_rate,phase"]
    rows = []
    if report.get("baseline"):
        rows.append(report["baseline"])
    rows.extend(report.get("cases", []))
    for row in rows:
        offset_s = int(row.get("start_ms", 0.0) // 1000)
        for series_row in row.get("metrics", {}).get("series", []):
            lines.append(
                "%d,%.6f,%.6f,%.6f,%.6f,%s"
                % (
                    offset_s + series_row["t_s"],
                    series_row["throughput"],
                    series_row["mean_latency_ms"],
                    series_row["mean_response_ms"],
                    series_row["error_rate"],
                    series_row["phase"],
                )
            )
    return "\n".join(lines) + "\n"
