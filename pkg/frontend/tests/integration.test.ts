// End-to-end: a wizard-built plan submitted through the dashboard's API
// client produces the same report bundle as the identical plan submitted
// via the CLI (hash equality of report.json). Talks to a real server
// process over its REST interface only.

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { createHash } from "node:crypto";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";

import { makeApi, type Api } from "../src/api";
import { buildPlanDocument, defaultWorkload } from "../src/plan";
import type { Annotation } from "../src/types";
import { defaultDraft, validateDraft } from "../src/wizard";

const REPO_ROOT = resolve(__dirname, "..", "..");
const TOPOLOGY = join(REPO_ROOT, "src", "faultfabric", "topologies", "three_tier_web.json");
const PORT = 18_000 + Math.floor(Math.random() * 2_000);
const URL = `http://127.0.0.1:${PORT}`;

let server: ChildProcess;
let api: Api;

async function waitForHealth(): Promise<void> {
  const deadline = Date.now() + 30_000;
  while (Date.now() < deadline) {
    try {
      const resp = await fetch(`${URL}/health`);
      if (resp.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 100));
  }
  throw new Error("server did not come up");
}

beforeAll(async () => {
  server = spawn(
    "python3",
    ["-m", "faultfabric.cli", "serve", "--topology", TOPOLOGY, "--port", String(PORT), "--seed", "1337"],
    { cwd: REPO_ROOT, stdio: "ignore" },
  );
  api = makeApi(URL);
  await waitForHealth();
});

afterAll(() => {
  server?.kill();
});

async function waitFinished(campaignId: string): Promise<void> {
  const deadline = Date.now() + 60_000;
  while (Date.now() < deadline) {
    const status = await api.campaignStatus(campaignId);
    if (status.state === "finished") return;
    if (status.state === "stopped") throw new Error("campaign stopped unexpectedly");
    await new Promise((r) => setTimeout(r, 100));
  }
  throw new Error("campaign did not finish");
}

function sha256(data: string | Buffer): string {
  return createHash("sha256").update(data).digest("hex");
}

describe("dashboard against a live server", () => {
  it("renders the service tenant topology with 3 routers", async () => {
    const payload = await api.topology("webapp");
    expect(payload.routers.length).toBe(3);
    expect(payload.balancers.length).toBe(1);
  });

  it("wizard-built plan via the dashboard equals the CLI run byte-for-byte", async () => {
    // build the plan exactly as the wizard does
    const spec = {
      ...defaultDraft(),
      fault_type: "loss" as const,
      pattern: "persistent" as const,
      timing: { pre_ms: 500, inject_ms: 1_000, post_ms: 500 },
      seed: 1337,
    };
    expect(validateDraft(spec)).toEqual([]);
    const annotations: Annotation[] = [{ nodeKind: "subnet", nodeId: "seg-b-sub", spec }];
    const workload = {
      ...defaultWorkload(),
      duration_ms: 2_000,
      client_port_ids: ["client-port"],
      server_id: "app-a-port",
    };
    const plan = buildPlanDocument("webapp", annotations, workload, false);

    // dashboard path: submit over REST, poll, download report.json
    const created = await api.submitPlan(plan);
    await waitFinished(created.campaign_id);
    const dashboardReport = await (await fetch(api.reportUrl(created.campaign_id))).text();

    // CLI path: identical plan document through the command-line client
    const dir = mkdtempSync(join(tmpdir(), "ffdash-"));
    const planFile = join(dir, "plan.json");
    writeFileSync(planFile, JSON.stringify(plan));
    execFileSync(
      "python3",
      ["-m", "faultfabric.cli", "--url", URL, "plan", "run", planFile, "--out", join(dir, "bundle")],
      { cwd: REPO_ROOT },
    );
    const cliReport = readFileSync(join(dir, "bundle", "report.json"), "utf-8");

    expect(sha256(dashboardReport)).toBe(sha256(cliReport));
  });
});
