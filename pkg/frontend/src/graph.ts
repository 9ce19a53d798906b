// Interactive SVG rendering of the virtual network graph. Layout is a
// deterministic column-per-kind arrangement; clicking a node opens the
// fault wizard.

import { buildGraph, isInjectable } from "./model";
import type { GraphNode, TopologyPayload } from "./types";

const COLUMN_ORDER: GraphNode["kind"][] = ["network", "subnet", "port", "balancer", "router", "floating_ip"];
const COLUMN_X: Record<string, number> = Object.fromEntries(COLUMN_ORDER.map((k, i) => [k, 90 + i * 180]));
const FILL: Record<string, string> = {
  network: "#4c78a8",
  subnet: "#72b7b2",
  port: "#54a24b",
  balancer: "#eeca3b",
  router: "#f58518",
  floating_ip: "#b279a2",
};

export interface RenderOptions {
  annotated: Set<string>;
  onSelect: (node: GraphNode) => void;
}

export function renderTopology(svg: SVGSVGElement, payload: TopologyPayload, options: RenderOptions): void {
  const { nodes, edges } = buildGraph(payload);
  svg.innerHTML = "";
  const positions = new Map<string, { x: number; y: number }>();
  const counters: Record<string, number> = {};
  for (const node of nodes) {
    const row = counters[node.kind] ?? 0;
    counters[node.kind] = row + 1;
    positions.set(node.id, { x: COLUMN_X[node.kind], y: 60 + row * 64 });
  }
  const rows = Math.max(1, ...Object.values(counters));
  svg.setAttribute("viewBox", `0 0 ${90 + COLUMN_ORDER.length * 180} ${90 + rows * 64}`);

  const ns = "http://www.w3.org/2000/svg";
  for (const edge of edges) {
    const a = positions.get(edge.from);
    const b = positions.get(edge.to);
    if (!a || !b) continue;
    const line = document.createElementNS(ns, "line");
    line.setAttribute("x1", String(a.x));
    line.setAttribute("y1", String(a.y));
    line.setAttribute("x2", String(b.x));
    line.setAttribute("y2", String(b.y));
    line.setAttribute("stroke", edge.kind.startsWith("balancer") ? "#b8a13a" : "#98a2b3");
    line.setAttribute("stroke-width", "1.2");
    if (edge.kind === "floating_ip") line.setAttribute("stroke-dasharray", "4 3");
    svg.appendChild(line);
  }

  for (const node of nodes) {
    const pos = positions.get(node.id)!;
    const group = document.createElementNS(ns, "g");
    group.setAttribute("transform", `translate(${pos.x}, ${pos.y})`);
    group.setAttribute("data-node-id", node.id);
    group.setAttribute("data-node-kind", node.kind);
    (group as unknown as HTMLElement).style.cursor = isInjectable(node) ? "pointer" : "default";

    const circle = document.createElementNS(ns, "circle");
    circle.setAttribute("r", "17");
    circle.setAttribute("fill", FILL[node.kind]);
    circle.setAttribute("fill-opacity", node.shared ? "0.35" : "0.9");
    circle.setAttribute("stroke", "#1f2937");
    group.appendChild(circle);

    if (options.annotated.has(node.id)) {
      const badge = document.createElementNS(ns, "circle");
      badge.setAttribute("r", "6");
      badge.setAttribute("cx", "13");
      badge.setAttribute("cy", "-13");
      badge.setAttribute("fill", "#d62728");
      group.appendChild(badge);
    }

    const label = document.createElementNS(ns, "text");
    label.setAttribute("y", "32");
    label.setAttribute("text-anchor", "middle");
    label.setAttribute("font-size", "10");
    label.textContent = node.label.length > 26 ? node.label.slice(0, 24) + "…" : node.label;
    group.appendChild(label);

    const kindLabel = document.createElementNS(ns, "text");
    kindLabel.setAttribute("y", "4");
    kindLabel.setAttribute("text-anchor", "middle");
    kindLabel.setAttribute("font-size", "8");
    kindLabel.setAttribute("fill", "#fff");
    kindLabel.textContent = node.kind === "floating_ip" ? "fip" : node.kind.slice(0, 4);
    group.appendChild(kindLabel);

    group.addEventListener("click", () => {
      if (isInjectable(node)) options.onSelect(node);
    });
    svg.appendChild(group);
  }
}
