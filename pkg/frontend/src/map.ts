// Context map: a node-based canvas mirroring the topology, with the four
// interaction modes and the node right-click menu.

import type { ContextdClient } from "./api.js";
import { COLUMN_WIDTH, ROW_HEIGHT, computeLayout, type MapLayout } from "./layout.js";
import type { WorkbenchStore } from "./state.js";

const NODE_W = 140;
const NODE_H = 40;
const PAD = 32;

export class MapPanel {
  private canvas: HTMLCanvasElement;
  private menu: HTMLElement;
  private layout: MapLayout | null = null;
  private dragging: { id: string; dx: number; dy: number } | null = null;

  constructor(
    private root: HTMLElement,
    private store: WorkbenchStore,
    private client: ContextdClient,
    private locateInChat: (nodeId: string) => void,
  ) {
    this.canvas = document.createElement("canvas");
    this.canvas.className = "map-canvas";
    this.menu = document.createElement("div");
    this.menu.className = "map-menu hidden";
    this.root.append(this.toolbar(), this.canvas, this.menu, this.selectionBar());
    this.canvas.addEventListener("click", (e) => this.onClick(e));
    this.canvas.addEventListener("contextmenu", (e) => this.onContextMenu(e));
    this.canvas.addEventListener("mousedown", (e) => this.onMouseDown(e));
    this.canvas.addEventListener("mousemove", (e) => this.onMouseMove(e));
    this.canvas.addEventListener("mouseup", () => this.onMouseUp());
    document.addEventListener("click", () => this.menu.classList.add("hidden"));
  }

  private toolbar(): HTMLElement {
    const bar = document.createElement("div");
    bar.className = "map-toolbar";
    for (const mode of ["search", "selection", "rearrange", "delete"] as const) {
      const toggle = document.createElement("button");
      toggle.type = "button";
      toggle.dataset.mode = mode;
      toggle.textContent = mode;
      toggle.addEventListener("click", () => this.store.setMode(mode));
      bar.append(toggle);
    }
    const search = document.createElement("input");
    search.placeholder = "find node…";
    search.className = "map-search";
    search.addEventListener("input", () => this.store.setSearch(search.value));
    bar.append(search);
    for (const op of ["undo", "redo", "reset"] as const) {
      const global = document.createElement("button");
      global.type = "button";
      global.textContent = op;
      global.addEventListener("click", () =>
        void this.store.mutate(() => this.client.history(this.projectId(), op)),
      );
      bar.append(global);
    }
    return bar;
  }

  private selectionBar(): HTMLElement {
    const bar = document.createElement("div");
    bar.className = "selection-bar";
    bar.id = "selection-bar";
    for (const op of ["include", "exclude", "revert"] as const) {
      const batch = document.createElement("button");
      batch.type = "button";
      batch.textContent = `${op} selected`;
      batch.addEventListener("click", () => {
        const ids = [...this.store.state.selected];
        if (!ids.length) return;
        void this.store
          .mutate(() => this.client.scope(this.projectId(), op, ids))
          .then(() => this.store.clearSelection());
      });
      bar.append(batch);
    }
    const del = document.createElement("button");
    del.type = "button";
    del.textContent = "delete selected";
    del.addEventListener("click", () => void this.deleteSelected());
    bar.append(del);
    return bar;
  }

  private async deleteSelected() {
    const ids = [...this.store.state.selected];
    if (!ids.length) return;
    const preview = await this.client.deleteNodes(this.projectId(), ids, true);
    const placeholders = preview.report.placeholders.length;
    const ok = window.confirm(
      `Delete ${preview.report.removed.length} unit(s)? ` +
        (placeholders
          ? `${placeholders} placeholder(s) will keep the structure connected.`
          : "No structural grafting needed."),
    );
    if (!ok) return;
    await this.store.mutate(() => this.client.deleteNodes(this.projectId(), ids));
    this.store.clearSelection();
  }

  render() {
    const snapshot = this.store.state.snapshot;
    const context = this.canvas.getContext("2d");
    if (!snapshot || !context) return;
    this.layout = computeLayout(snapshot.topology);
    const width = Math.max(this.layout.columns * COLUMN_WIDTH + PAD * 2, 360);
    const height = Math.max(this.layout.rows * ROW_HEIGHT + PAD * 2, 420);
    this.canvas.width = width;
    this.canvas.height = height;
    context.clearRect(0, 0, width, height);

    const excluded = new Set(snapshot.scope.excluded_nodes);
    const onBase = new Set(snapshot.topology.mainline);
    const query = this.store.state.searchQuery.toLowerCase();

    for (const edge of this.layout.edges) {
      const from = this.layout.nodes.get(edge.from);
      const to = this.layout.nodes.get(edge.to);
      if (!from || !to || edge.from === edge.to) continue;
      context.strokeStyle = edge.kind === "fork" ? "#b08968" : "#8a94a6";
      context.setLineDash(edge.kind === "fork" ? [5, 4] : []);
      context.beginPath();
      context.moveTo(from.x + PAD + NODE_W / 2, from.y + PAD + NODE_H);
      context.lineTo(to.x + PAD + NODE_W / 2, to.y + PAD);
      context.stroke();
      context.setLineDash([]);
    }

    for (const placed of this.layout.nodes.values()) {
      const node = snapshot.topology.nodes[placed.id];
      if (!node) continue;
      const x = placed.x + PAD;
      const y = placed.y + PAD;
      const isSelected = this.store.state.selected.has(placed.id);
      const matches = query && node.content.toLowerCase().includes(query);
      context.fillStyle = node.placeholder
        ? "#e9ecef"
        : excluded.has(placed.id)
          ? "#d8dee9"
          : onBase.has(placed.id)
            ? "#dbe7ff"
            : "#e7f5e9";
      context.strokeStyle = isSelected ? "#d62828" : matches ? "#f4a261" : "#5c677d";
      context.lineWidth = isSelected || matches ? 3 : 1;
      context.fillRect(x, y, NODE_W, NODE_H);
      context.strokeRect(x, y, NODE_W, NODE_H);
      context.fillStyle = "#212529";
      context.font = "11px sans-serif";
      const label = node.placeholder
        ? "· placeholder ·"
        : `${node.role}: ${node.content.slice(0, 18)}`;
      context.fillText(label, x + 6, y + 16, NODE_W - 12);
      context.fillStyle = "#6c757d";
      context.fillText(placed.id, x + 6, y + 32, NODE_W - 12);
    }
  }

  private hitTest(event: MouseEvent): string | null {
    if (!this.layout) return null;
    const rect = this.canvas.getBoundingClientRect();
    const x = event.clientX - rect.left;
    const y = event.clientY - rect.top;
    for (const placed of this.layout.nodes.values()) {
      if (
        x >= placed.x + PAD &&
        x <= placed.x + PAD + NODE_W &&
        y >= placed.y + PAD &&
        y <= placed.y + PAD + NODE_H
      ) {
        return placed.id;
      }
    }
    return null;
  }

  private onClick(event: MouseEvent) {
    const id = this.hitTest(event);
    if (!id) return;
    const mode = this.store.state.mode;
    if (mode === "selection" || mode === "delete") this.store.toggleSelected(id);
    if (mode === "search") this.locateInChat(id);
  }

  private onContextMenu(event: MouseEvent) {
    event.preventDefault();
    const id = this.hitTest(event);
    if (!id) return;
    this.menu.replaceChildren();
    const item = (label: string, action: () => unknown) => {
      const entry = document.createElement("button");
      entry.type = "button";
      entry.textContent = label;
      entry.addEventListener("click", () => {
        this.menu.classList.add("hidden");
        void action();
      });
      this.menu.append(entry);
    };
    item("Locate in Chat", () => this.locateInChat(id));
    item("Re-Branch from Here", () =>
      this.store.mutate(() => this.client.rebranchFrom(id)),
    );
    item("Set Mainline Start", () =>
      this.store.mutate(() => this.client.setMainline(this.projectId(), { start: id })),
    );
    item("Set Mainline End", () =>
      this.store.mutate(() => this.client.setMainline(this.projectId(), { end: id })),
    );
    this.menu.style.left = `${event.clientX}px`;
    this.menu.style.top = `${event.clientY}px`;
    this.menu.classList.remove("hidden");
  }

  private onMouseDown(event: MouseEvent) {
    if (this.store.state.mode !== "rearrange") return;
    const id = this.hitTest(event);
    if (!id || !this.layout) return;
    const placed = this.layout.nodes.get(id)!;
    const rect = this.canvas.getBoundingClientRect();
    this.dragging = {
      id,
      dx: event.clientX - rect.left - placed.x,
      dy: event.clientY - rect.top - placed.y,
    };
  }

  private onMouseMove(event: MouseEvent) {
    if (!this.dragging || !this.layout) return;
    const rect = this.canvas.getBoundingClientRect();
    const placed = this.layout.nodes.get(this.dragging.id);
    if (!placed) return;
    placed.x = event.clientX - rect.left - this.dragging.dx;
    placed.y = event.clientY - rect.top - this.dragging.dy;
    this.render();
  }

  private onMouseUp() {
    if (!this.dragging || !this.layout) return;
    const placed = this.layout.nodes.get(this.dragging.id);
    this.dragging = null;
    if (!placed) return;
    // layout is UI-only on the server; the topology itself never changes
    void this.store.mutate(() =>
      this.client.setLayout(placed.id, [placed.x, placed.y]),
    );
  }

  private projectId(): string {
    const id = this.store.state.projectId;
    if (!id) throw new Error("no project open");
    return id;
  }
}
