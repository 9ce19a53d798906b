// Dashboard wiring: connect to a server, render the tenant's network,
// annotate nodes with faults through the wizard, assemble and launch a
// plan, and watch campaigns live.

import { makeApi, type Api } from "./api";
import { CampaignConsole } from "./console";
import { renderTopology } from "./graph";
import { buildPlanDocument, defaultWorkload, validateWorkload } from "./plan";
import type { Annotation, GraphNode, TopologyPayload, WorkloadDraft } from "./types";
import { defaultDraft, draftFromForm, validateDraft, wizardFormHtml } from "./wizard";

const $ = (id: string) => document.getElementById(id) as HTMLElement;

let api: Api | null = null;
let payload: TopologyPayload | null = null;
let annotations: Annotation[] = [];
let selected: GraphNode | null = null;
let activeConsole: CampaignConsole | null = null;

function setStatus(text: string, isError = false): void {
  const el = $("status");
  el.textContent = text;
  el.className = isError ? "error" : "";
}

async function connect(): Promise<void> {
  const url = ($("server-url") as HTMLInputElement).value;
  api = makeApi(url);
  try {
    const health = await api.health();
    const select = $("tenant") as HTMLSelectElement;
    select.innerHTML = health.tenants.map((t) => `<option value="${t}">${t}</option>`).join("");
    setStatus(`connected (${health.mode} clock)`);
    await loadTopology();
  } catch (err) {
    setStatus(`connection failed: ${(err as Error).message}`, true);
  }
}

async function loadTopology(): Promise<void> {
  if (!api) return;
  const tenant = ($("tenant") as HTMLSelectElement).value;
  try {
    payload = await api.topology(tenant);
  } catch (err) {
    setStatus(`topology fetch failed: ${(err as Error).message}`, true);
    return;
  }
  annotations = [];
  selected = null;
  refreshGraph();
  refreshAnnotations();
  populateWorkloadForm();
  $("wizard").innerHTML = "<p>Select a network element to configure a fault.</p>";
}

function refreshGraph(): void {
  if (!payload) return;
  renderTopology($("graph") as unknown as SVGSVGElement, payload, {
    annotated: new Set(annotations.map((a) => a.nodeId)),
    onSelect: openWizard,
  });
}

function openWizard(node: GraphNode): void {
  selected = node;
  const wizard = $("wizard");
  wizard.innerHTML = `
    <h3>Fault on ${node.kind} <code>${node.id}</code></h3>
    <form id="wizard-form">${wizardFormHtml(defaultDraft())}</form>
    <ul id="wizard-errors" class="error"></ul>
    <button id="wizard-attach">Attach fault</button>
  `;
  const form = document.getElementById("wizard-form") as HTMLFormElement;
  const errorsEl = document.getElementById("wizard-errors") as HTMLElement;
  const attach = document.getElementById("wizard-attach") as HTMLButtonElement;
  const revalidate = () => {
    const errors = validateDraft(draftFromForm(form));
    errorsEl.innerHTML = errors.map((e) => `<li>${e}</li>`).join("");
    attach.disabled = errors.length > 0;
  };
  form.addEventListener("input", revalidate);
  revalidate();
  attach.onclick = () => {
    const draft = draftFromForm(form);
    if (validateDraft(draft).length > 0 || !selected) return;
    annotations.push({ nodeKind: selected.kind, nodeId: selected.id, spec: draft });
    refreshGraph();
    refreshAnnotations();
  };
}

function refreshAnnotations(): void {
  const list = $("annotations");
  if (annotations.length === 0) {
    list.innerHTML = "<li>No faults annotated yet.</li>";
    return;
  }
  list.innerHTML = annotations
    .map(
      (a, i) => `
      <li>
        <code>${a.nodeId}</code>: ${a.spec.fault_type}/${a.spec.pattern}
        (pre ${a.spec.timing.pre_ms} ms, inject ${a.spec.timing.inject_ms} ms, post ${a.spec.timing.post_ms} ms)
        <button data-remove="${i}">remove</button>
      </li>`,
    )
    .join("");
  list.querySelectorAll("button[data-remove]").forEach((btn) => {
    (btn as HTMLButtonElement).onclick = () => {
      annotations.splice(Number((btn as HTMLElement).dataset.remove), 1);
      refreshGraph();
      refreshAnnotations();
    };
  });
}

function populateWorkloadForm(): void {
  if (!payload) return;
  const clients = $("wl-clients") as HTMLSelectElement;
  clients.innerHTML = payload.ports
    .map((p) => `<option value="${p.id}">${p.id} (${p.address})</option>`)
    .join("");
  const servers = $("wl-server") as HTMLSelectElement;
  const options: string[] = [];
  for (const b of payload.balancers) options.push(`<option value="${b.id}">balancer ${b.id}</option>`);
  for (const f of payload.floating_ips) options.push(`<option value="${f.id}">floating ip ${f.id}</option>`);
  for (const p of payload.ports) options.push(`<option value="${p.id}">port ${p.id}</option>`);
  servers.innerHTML = options.join("");
}

function workloadFromForm(): WorkloadDraft {
  const draft = defaultWorkload();
  draft.kind = ($("wl-kind") as HTMLSelectElement).value as WorkloadDraft["kind"];
  draft.protocol = ($("wl-protocol") as HTMLSelectElement).value as "tcp" | "udp";
  draft.pkts_per_s = Number(($("wl-rate") as HTMLInputElement).value);
  draft.concurrent_users = Number(($("wl-users") as HTMLInputElement).value);
  draft.reqs_per_min = Number(($("wl-rpm") as HTMLInputElement).value);
  draft.timeout_ms = Number(($("wl-timeout") as HTMLInputElement).value);
  draft.duration_ms = Number(($("wl-duration") as HTMLInputElement).value);
  draft.client_port_ids = Array.from(($("wl-clients") as HTMLSelectElement).selectedOptions).map(
    (o) => o.value,
  );
  draft.server_id = ($("wl-server") as HTMLSelectElement).value;
  return draft;
}

async function launch(): Promise<void> {
  if (!api || !payload) return;
  const workload = workloadFromForm();
  const problems = validateWorkload(workload);
  if (annotations.length === 0) problems.unshift("annotate at least one node with a fault");
  const errorsEl = $("plan-errors");
  errorsEl.innerHTML = problems.map((p) => `<li>${p}</li>`).join("");
  if (problems.length > 0) return;
  const baseline = ($("plan-baseline") as HTMLInputElement).checked;
  const plan = buildPlanDocument(payload.tenant_id, annotations, workload, baseline);
  try {
    const created = await api.submitPlan(plan);
    setStatus(`campaign ${created.campaign_id} launched`);
    watch(created.campaign_id);
  } catch (err) {
    errorsEl.innerHTML = `<li>${(err as Error).message}</li>`;
  }
}

function watch(campaignId: string): void {
  if (!api) return;
  ($("campaign-id") as HTMLInputElement).value = campaignId;
  activeConsole?.stop();
  activeConsole = new CampaignConsole(api, $("console"), campaignId);
  activeConsole.start();
}

function init(): void {
  const params = new URLSearchParams(window.location.search);
  ($("server-url") as HTMLInputElement).value = params.get("api") ?? "http://127.0.0.1:8787";
  $("connect").onclick = () => void connect();
  $("tenant").onchange = () => void loadTopology();
  $("reload").onclick = () => void loadTopology();
  $("launch").onclick = () => void launch();
  $("watch").onclick = () => watch(($("campaign-id") as HTMLInputElement).value.trim());
  ($("wl-kind") as HTMLSelectElement).onchange = () => {
    const isBw = ($("wl-kind") as HTMLSelectElement).value === "bandwidth";
    $("wl-bandwidth-fields").classList.toggle("hidden", !isBw);
    $("wl-reqresp-fields").classList.toggle("hidden", isBw);
  };
  void connect();
}

document.addEventListener("DOMContentLoaded", init);
