// Pure graph model: derive display nodes/edges from a topology payload.

import type { GraphEdge, GraphNode, TopologyPayload } from "./types";

export function buildGraph(payload: TopologyPayload): { nodes: GraphNode[]; edges: GraphEdge[] } {
  const nodes: GraphNode[] = [];
  for (const net of payload.networks) {
    nodes.push({ kind: "network", id: net.id, label: net.name || net.id, shared: net.shared });
  }
  for (const subnet of payload.subnets) {
    nodes.push({ kind: "subnet", id: subnet.id, label: `${subnet.id} ${subnet.cidr}` });
  }
  for (const port of payload.ports) {
    nodes.push({ kind: "port", id: port.id, label: `${port.id} ${port.address}` });
  }
  for (const router of payload.routers) {
    nodes.push({ kind: "router", id: router.id, label: router.id });
  }
  for (const fip of payload.floating_ips) {
    nodes.push({ kind: "floating_ip", id: fip.id, label: `${fip.id} ${fip.address}` });
  }
  for (const balancer of payload.balancers) {
    nodes.push({ kind: "balancer", id: balancer.id, label: `${balancer.id} ${balancer.vip_address}` });
  }
  return { nodes, edges: payload.edges.slice() };
}

export function nodeCount(payload: TopologyPayload): number {
  return buildGraph(payload).nodes.length;
}

export function countKind(payload: TopologyPayload, kind: GraphNode["kind"]): number {
  return buildGraph(payload).nodes.filter((n) => n.kind === kind).length;
}

// Injectable node kinds map 1:1 onto the injection REST endpoints.
export const INJECTABLE: Record<string, string> = {
  network: "network",
  subnet: "subnet",
  router: "router",
  floating_ip: "floatingip",
  port: "port",
};

export function isInjectable(node: GraphNode): boolean {
  return node.kind in INJECTABLE && !node.shared;
}
