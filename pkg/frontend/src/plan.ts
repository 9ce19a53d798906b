// Draft plan assembly: node annotations + one workload become a plan
// document; a fetched plan renders back into identical annotations.

import type { Annotation, FaultSpecDraft, NodeKind, PlanDocument, WorkloadDraft } from "./types";

export function defaultWorkload(): WorkloadDraft {
  return {
    kind: "bandwidth",
    protocol: "udp",
    pkts_per_s: 100,
    payload_bytes: 256,
    concurrent_users: 8,
    reqs_per_min: 480,
    think_time_ms: 0,
    response_payload_bytes: 5000,
    timeout_ms: 2000,
    duration_ms: 30000,
    client_port_ids: [],
    server_id: "",
  };
}

export function workloadConfig(draft: WorkloadDraft): Record<string, unknown> {
  const attach = { client_port_ids: draft.client_port_ids, server_id: draft.server_id };
  if (draft.kind === "bandwidth") {
    return {
      kind: "bandwidth",
      protocol: draft.protocol,
      pkts_per_s: draft.pkts_per_s,
      payload_bytes: draft.payload_bytes,
      duration_ms: draft.duration_ms,
      attach,
    };
  }
  return {
    kind: "request_response",
    concurrent_users: draft.concurrent_users,
    reqs_per_min: draft.reqs_per_min,
    think_time_ms: draft.think_time_ms,
    response_payload_bytes: draft.response_payload_bytes,
    timeout_ms: draft.timeout_ms,
    duration_ms: draft.duration_ms,
    attach,
  };
}

export function validateWorkload(draft: WorkloadDraft): string[] {
  const errors: string[] = [];
  if (draft.client_port_ids.length === 0) errors.push("pick at least one client port");
  if (!draft.server_id) errors.push("pick a server port, balancer, or floating IP");
  if (draft.duration_ms <= 0) errors.push("duration must be positive");
  if (draft.kind === "bandwidth" && draft.pkts_per_s <= 0) errors.push("packet rate must be positive");
  if (draft.kind === "request_response" && (draft.reqs_per_min <= 0 || draft.concurrent_users <= 0)) {
    errors.push("request rate and users must be positive");
  }
  return errors;
}

export function buildPlanDocument(
  tenantId: string,
  annotations: Annotation[],
  workload: WorkloadDraft,
  baseline: boolean,
): PlanDocument {
  return {
    tenant_id: tenantId,
    baseline,
    cases: annotations.map((ann, i) => ({
      id: `case${i}`,
      target: { kind: ann.nodeKind, id: ann.nodeId },
      spec: ann.spec,
      workload: workloadConfig(workload),
    })),
  };
}

export function planToAnnotations(plan: PlanDocument): Annotation[] {
  const out: Annotation[] = [];
  for (const testCase of plan.cases) {
    if (!testCase.target || !testCase.spec) continue;
    out.push({
      nodeKind: testCase.target.kind as NodeKind,
      nodeId: testCase.target.id,
      spec: normalizeSpec(testCase.spec),
    });
  }
  return out;
}

// fills defaulted fields so a round-tripped spec compares equal
export function normalizeSpec(spec: Partial<FaultSpecDraft>): FaultSpecDraft {
  return {
    fault_type: spec.fault_type ?? "loss",
    intensity: spec.intensity ?? 1.0,
    pattern: spec.pattern ?? "persistent",
    amount_ms: spec.amount_ms ?? 0,
    jitter_ms: spec.jitter_ms ?? 0,
    bytes_affected: spec.bytes_affected ?? 1,
    rate_pkts_per_s: spec.rate_pkts_per_s ?? 0,
    period_ms: spec.period_ms ?? 1000,
    duty_fraction: spec.duty_fraction ?? 0.5,
    protocol_filter: spec.protocol_filter ?? null,
    timing: {
      pre_ms: spec.timing?.pre_ms ?? 0,
      inject_ms: spec.timing?.inject_ms ?? 10000,
      post_ms: spec.timing?.post_ms ?? 0,
    },
    seed: spec.seed ?? 0,
  };
}
