// Wire types for the fault-injection REST API.

export interface TopologyPayload {
  tenant_id: string;
  networks: { id: string; tenant_id: string; name: string; is_external: boolean; shared: boolean }[];
  subnets: { id: string; network_id: string; cidr: string }[];
  ports: { id: string; tenant_id: string; device_owner: string; subnet_id: string; address: string }[];
  routers: { id: string; tenant_id: string }[];
  floating_ips: { id: string; tenant_id: string; address: string; attached_port_id: string }[];
  balancers: { id: string; tenant_id: string; vip_address: string; vip_subnet_id: string; backend_port_ids: string[] }[];
  edges: { kind: string; from: string; to: string }[];
}

export type NodeKind = "network" | "subnet" | "port" | "router" | "floating_ip" | "balancer";

export interface GraphNode {
  kind: NodeKind;
  id: string;
  label: string;
  shared?: boolean;
}

export interface GraphEdge {
  kind: string;
  from: string;
  to: string;
}

export interface FaultSpecDraft {
  fault_type: "loss" | "delay" | "corruption" | "duplication" | "rate_limit";
  intensity: number;
  pattern: "random" | "persistent" | "bursty" | "degradation";
  amount_ms: number;
  jitter_ms: number;
  bytes_affected: number;
  rate_pkts_per_s: number;
  period_ms: number;
  duty_fraction: number;
  protocol_filter: { protocol: "tcp" | "udp"; service_port: number | null } | null;
  timing: { pre_ms: number; inject_ms: number; post_ms: number };
  seed: number;
}

export interface Annotation {
  nodeKind: NodeKind;
  nodeId: string;
  spec: FaultSpecDraft;
}

export interface WorkloadDraft {
  kind: "bandwidth" | "request_response";
  protocol: "tcp" | "udp";
  pkts_per_s: number;
  payload_bytes: number;
  concurrent_users: number;
  reqs_per_min: number;
  think_time_ms: number;
  response_payload_bytes: number;
  timeout_ms: number;
  duration_ms: number;
  client_port_ids: string[];
  server_id: string;
}

export interface PlanDocument {
  tenant_id: string;
  baseline: boolean;
  cases: PlanCase[];
}

export interface PlanCase {
  id?: string;
  target?: { kind: string; id: string };
  spec?: FaultSpecDraft;
  config_fault?: { kind: string; id: string; outage_ms: number; pre_ms: number; post_ms: number };
  workload: Record<string, unknown>;
  repetitions?: number;
}

export interface CampaignStatus {
  campaign_id: string;
  tenant_id: string;
  state: "pending" | "running" | "stopped" | "finished";
  cases_total: number;
  cases_done: number;
  current_case: { index: number; phase: string } | null;
  results: CaseResultRow[];
}

export interface SeriesRow {
  t_s: number;
  throughput: number;
  mean_latency_ms: number;
  mean_response_ms: number;
  error_rate: number;
  phase: string;
}

export interface CaseResultRow {
  case_id: string;
  phases: Record<string, [number, number]>;
  metrics: {
    sent: number;
    delivered: number;
    errors: number;
    throughput: number;
    latency_mean_ms: number;
    latency_stddev_ms: number;
    response_mean_ms: number;
    response_stddev_ms: number;
    error_rate: number;
    series: SeriesRow[];
  };
  repetitions: { index: number; fault_exposed: boolean }[];
  aborted: boolean;
  error: string | null;
  start_ms?: number;
  end_ms?: number;
}

export interface ReportDocument {
  tenant_id: string;
  state: string;
  seed: number;
  baseline: CaseResultRow | null;
  cases: CaseResultRow[];
}
