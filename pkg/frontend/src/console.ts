// Live campaign console: polls status once a second, shows the phase
// badge, charts finished cases with the injection window shaded and the
// baseline overlaid, and offers stop + raw-data downloads.

import type { Api } from "./api";
import { drawSeries, shadeBounds } from "./charts";
import type { CampaignStatus, CaseResultRow, ReportDocument } from "./types";

const CHART_KEYS = [
  ["throughput", "throughput (ok/s)"],
  ["mean_latency_ms", "latency (ms)"],
  ["mean_response_ms", "response time (ms)"],
  ["error_rate", "error rate"],
] as const;

export class CampaignConsole {
  private timer: number | null = null;
  private lastState = "";

  constructor(
    private readonly api: Api,
    private readonly root: HTMLElement,
    private readonly campaignId: string,
    private readonly pollMs = 1000,
  ) {}

  start(): void {
    this.root.innerHTML = `
      <div class="console-head">
        <span class="badge" data-role="badge">…</span>
        <span data-role="progress"></span>
        <button data-role="stop">Stop</button>
        <span data-role="links"></span>
      </div>
      <div data-role="banner" class="banner hidden"></div>
      <div data-role="cases"></div>
    `;
    (this.root.querySelector('[data-role="stop"]') as HTMLButtonElement).onclick = () => {
      this.api.stopCampaign(this.campaignId).catch((err) => this.showBanner(`stop failed: ${err.message}`));
    };
    void this.poll();
    this.timer = window.setInterval(() => void this.poll(), this.pollMs);
  }

  stop(): void {
    if (this.timer !== null) window.clearInterval(this.timer);
    this.timer = null;
  }

  private showBanner(text: string): void {
    const banner = this.root.querySelector('[data-role="banner"]') as HTMLElement;
    banner.textContent = text;
    banner.classList.remove("hidden");
  }

  private hideBanner(): void {
    (this.root.querySelector('[data-role="banner"]') as HTMLElement).classList.add("hidden");
  }

  private async poll(): Promise<void> {
    let status: CampaignStatus;
    try {
      status = await this.api.campaignStatus(this.campaignId);
      this.hideBanner();
    } catch (err) {
      this.showBanner(`connection lost, retrying… (${(err as Error).message})`);
      return;
    }
    const badge = this.root.querySelector('[data-role="badge"]') as HTMLElement;
    badge.textContent = status.current_case
      ? `${status.state} · case ${status.current_case.index} · ${status.current_case.phase}`
      : status.state;
    badge.className = `badge badge-${status.state}`;
    const progress = this.root.querySelector('[data-role="progress"]') as HTMLElement;
    progress.textContent = `${status.cases_done}/${status.cases_total} cases`;
    (this.root.querySelector('[data-role="stop"]') as HTMLButtonElement).disabled =
      status.state === "finished" || status.state === "stopped";

    if ((status.state === "finished" || status.state === "stopped") && this.lastState !== status.state) {
      this.lastState = status.state;
      this.stop();
      const links = this.root.querySelector('[data-role="links"]') as HTMLElement;
      links.innerHTML = `
        download:
        <a href="${this.api.reportUrl(this.campaignId)}" target="_blank">report.json</a>
        <a href="${this.api.seriesUrl(this.campaignId)}" target="_blank">series.csv</a>
        <a href="${this.api.eventsUrl(this.campaignId)}" target="_blank">events.log</a>
      `;
      try {
        const report = await this.api.report(this.campaignId);
        this.renderReport(report);
      } catch (err) {
        this.showBanner(`report fetch failed: ${(err as Error).message}`);
      }
    }
  }

  private renderReport(report: ReportDocument): void {
    const holder = this.root.querySelector('[data-role="cases"]') as HTMLElement;
    holder.innerHTML = "";
    for (const row of report.cases) {
      holder.appendChild(this.renderCase(row, report.baseline));
    }
  }

  private renderCase(row: CaseResultRow, baseline: CaseResultRow | null): HTMLElement {
    const div = document.createElement("div");
    div.className = "case-block";
    const m = row.metrics;
    div.innerHTML = `
      <h3>${row.case_id}${row.aborted ? " (aborted)" : ""}</h3>
      <p>
        throughput ${m.throughput.toFixed(2)}/s ·
        latency ${m.latency_mean_ms.toFixed(1)}±${m.latency_stddev_ms.toFixed(1)} ms ·
        response ${m.response_mean_ms.toFixed(1)}±${m.response_stddev_ms.toFixed(1)} ms ·
        error rate ${(m.error_rate * 100).toFixed(1)}%
      </p>
      <div class="charts"></div>
    `;
    const charts = div.querySelector(".charts") as HTMLElement;
    const shade = shadeBounds(row);
    for (const [key, title] of CHART_KEYS) {
      const canvas = document.createElement("canvas");
      canvas.width = 360;
      canvas.height = 130;
      charts.appendChild(canvas);
      drawSeries(canvas, m.series, key, title, shade, baseline?.metrics.series);
    }
    return div;
  }
}
