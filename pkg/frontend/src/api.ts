// Thin REST client; every dashboard interaction goes through these calls.

import type { CampaignStatus, PlanDocument, ReportDocument, TopologyPayload } from "./types";

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
  }
}

async function call<T>(url: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(url, init);
  if (!resp.ok) {
    let detail = `${resp.status}`;
    try {
      const body = await resp.json();
      detail = `${body.error}: ${body.message}`;
    } catch {
      // non-JSON error body
    }
    throw new ApiError(detail, resp.status);
  }
  return (await resp.json()) as T;
}

export function makeApi(baseUrl: string) {
  const base = baseUrl.replace(/\/+$/, "");
  return {
    base,
    health: () => call<{ status: string; mode: string; tenants: string[] }>(`${base}/health`),
    topology: (tenant: string) => call<TopologyPayload>(`${base}/topology?tenant=${encodeURIComponent(tenant)}`),
    submitPlan: (plan: PlanDocument) =>
      call<{ campaign_id: string }>(`${base}/campaigns`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(plan),
      }),
    campaignStatus: (id: string) => call<CampaignStatus>(`${base}/campaigns/${id}`),
    stopCampaign: (id: string) => call<CampaignStatus>(`${base}/campaigns/${id}`, { method: "DELETE" }),
    report: (id: string) => call<ReportDocument>(`${base}/campaigns/${id}/report`),
    reportUrl: (id: string) => `${base}/campaigns/${id}/report`,
    seriesUrl: (id: string) => `${base}/campaigns/${id}/report/series.csv`,
    eventsUrl: (id: string) => `${base}/campaigns/${id}/report/events.log`,
  };
}

export type Api = ReturnType<typeof makeApi>;
