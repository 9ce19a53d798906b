// Fault wizard: draft construction and validation. Validation mirrors the
// server's FaultSpec invariants so bad drafts never reach the API.

import type { FaultSpecDraft } from "./types";

export function defaultDraft(): FaultSpecDraft {
  return {
    fault_type: "loss",
    intensity: 1.0,
    pattern: "persistent",
    amount_ms: 500,
    jitter_ms: 0,
    bytes_affected: 1,
    rate_pkts_per_s: 100,
    period_ms: 1000,
    duty_fraction: 0.5,
    protocol_filter: null,
    timing: { pre_ms: 10000, inject_ms: 20000, post_ms: 10000 },
    seed: 0,
  };
}

export function validateDraft(draft: FaultSpecDraft): string[] {
  const errors: string[] = [];
  const types = ["loss", "delay", "corruption", "duplication", "rate_limit"];
  const patterns = ["random", "persistent", "bursty", "degradation"];
  if (!types.includes(draft.fault_type)) errors.push(`unknown fault type ${draft.fault_type}`);
  if (!patterns.includes(draft.pattern)) errors.push(`unknown pattern ${draft.pattern}`);
  if (!(draft.intensity >= 0 && draft.intensity <= 1)) {
    errors.push("intensity must be within [0, 1]");
  }
  if (!(draft.duty_fraction > 0 && draft.duty_fraction <= 1)) {
    errors.push("duty fraction must be within (0, 1]");
  }
  if (draft.period_ms <= 0) errors.push("bursty period must be positive");
  if (draft.amount_ms < 0 || draft.jitter_ms < 0) errors.push("delay amounts must be non-negative");
  if (draft.jitter_ms > draft.amount_ms) errors.push("jitter must not exceed the delay amount");
  if (draft.bytes_affected < 1) errors.push("corruption must affect at least one byte");
  if (draft.rate_pkts_per_s < 0) errors.push("rate limit must be non-negative");
  if (draft.timing.pre_ms < 0 || draft.timing.post_ms < 0) {
    errors.push("pre and post phases must be non-negative");
  }
  if (!(draft.timing.inject_ms > 0)) errors.push("injection time must be positive");
  if (draft.protocol_filter) {
    if (!["tcp", "udp"].includes(draft.protocol_filter.protocol)) {
      errors.push(`unknown protocol ${draft.protocol_filter.protocol}`);
    }
    const port = draft.protocol_filter.service_port;
    if (port !== null && !(Number.isInteger(port) && port > 0 && port < 65536)) {
      errors.push("service port must be within 1..65535");
    }
  }
  return errors;
}

function num(form: HTMLElement, name: string): number {
  const input = form.querySelector(`[name="${name}"]`) as HTMLInputElement;
  return Number(input.value);
}

function str(form: HTMLElement, name: string): string {
  const input = form.querySelector(`[name="${name}"]`) as HTMLInputElement | HTMLSelectElement;
  return input.value;
}

export function draftFromForm(form: HTMLElement): FaultSpecDraft {
  const protocol = str(form, "filter_protocol");
  const servicePortRaw = str(form, "filter_service_port");
  return {
    fault_type: str(form, "fault_type") as FaultSpecDraft["fault_type"],
    intensity: num(form, "intensity"),
    pattern: str(form, "pattern") as FaultSpecDraft["pattern"],
    amount_ms: num(form, "amount_ms"),
    jitter_ms: num(form, "jitter_ms"),
    bytes_affected: num(form, "bytes_affected"),
    rate_pkts_per_s: num(form, "rate_pkts_per_s"),
    period_ms: num(form, "period_ms"),
    duty_fraction: num(form, "duty_fraction"),
    protocol_filter:
      protocol === "any"
        ? null
        : {
            protocol: protocol as "tcp" | "udp",
            service_port: servicePortRaw === "" ? null : Number(servicePortRaw),
          },
    timing: {
      pre_ms: num(form, "pre_ms"),
      inject_ms: num(form, "inject_ms"),
      post_ms: num(form, "post_ms"),
    },
    seed: num(form, "seed"),
  };
}

export function wizardFormHtml(draft: FaultSpecDraft): string {
  return `
    <label>Fault type
      <select name="fault_type">
        ${["loss", "delay", "corruption", "duplication", "rate_limit"]
          .map((t) => `<option value="${t}" ${t === draft.fault_type ? "selected" : ""}>${t}</option>`)
          .join("")}
      </select>
    </label>
    <label>Pattern
      <select name="pattern">
        ${["random", "persistent", "bursty", "degradation"]
          .map((p) => `<option value="${p}" ${p === draft.pattern ? "selected" : ""}>${p}</option>`)
          .join("")}
      </select>
    </label>
    <label>Intensity <input name="intensity" type="number" step="0.05" value="${draft.intensity}"></label>
    <label>Delay ms <input name="amount_ms" type="number" value="${draft.amount_ms}"></label>
    <label>Jitter ms <input name="jitter_ms" type="number" value="${draft.jitter_ms}"></label>
    <label>Corrupt bytes <input name="bytes_affected" type="number" value="${draft.bytes_affected}"></label>
    <label>Rate pkt/s <input name="rate_pkts_per_s" type="number" value="${draft.rate_pkts_per_s}"></label>
    <label>Burst period ms <input name="period_ms" type="number" value="${draft.period_ms}"></label>
    <label>Burst duty <input name="duty_fraction" type="number" step="0.05" value="${draft.duty_fraction}"></label>
    <label>Protocol
      <select name="filter_protocol">
        <option value="any" ${draft.protocol_filter ? "" : "selected"}>any</option>
        <option value="tcp" ${draft.protocol_filter?.protocol === "tcp" ? "selected" : ""}>tcp</option>
        <option value="udp" ${draft.protocol_filter?.protocol === "udp" ? "selected" : ""}>udp</option>
      </select>
    </label>
    <label>Service port <input name="filter_service_port" type="number" value="${draft.protocol_filter?.service_port ?? ""}"></label>
    <label>Pre ms <input name="pre_ms" type="number" value="${draft.timing.pre_ms}"></label>
    <label>Inject ms <input name="inject_ms" type="number" value="${draft.timing.inject_ms}"></label>
    <label>Post ms <input name="post_ms" type="number" value="${draft.timing.post_ms}"></label>
    <label>Seed <input name="seed" type="number" value="${draft.seed}"></label>
  `;
}
