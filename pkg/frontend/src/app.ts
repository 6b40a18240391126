// Workbench entry point: wires the sidebar, chat, map, and capsule bar to
// the store, and polls the version counter to keep panels synchronized.

import { ContextdClient } from "./api.js";
import { CapsuleBar } from "./capsules.js";
import { ChatPanel } from "./chat.js";
import { MapPanel } from "./map.js";
import { WorkbenchStore } from "./state.js";
import { panelParity } from "./visible.js";

const POLL_INTERVAL_MS = 1000;

function mustGet(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
}

export function startWorkbench(base = ""): { store: WorkbenchStore } {
  const client = new ContextdClient(base);
  const store = new WorkbenchStore(client);

  const chat = new ChatPanel(mustGet("chat"), store, client);
  const map = new MapPanel(mustGet("map"), store, client, (id) => chat.scrollTo(id));
  const capsules = new CapsuleBar(mustGet("capsules"), store, client);
  const sidebar = mustGet("sidebar");
  const status = mustGet("status");
  const mapWrap = mustGet("map-wrap");

  mustGet("collapse-map").addEventListener("click", () => {
    mapWrap.classList.toggle("collapsed");
  });

  async function renderSidebar() {
    const projects = await client.listProjects();
    sidebar.replaceChildren();
    const create = document.createElement("button");
    create.type = "button";
    create.textContent = "+ New project";
    create.addEventListener("click", async () => {
      const title = window.prompt("Project title", "Untitled project");
      if (title === null) return;
      const created = await client.createProject(title);
      await store.openProject(created.id);
      await renderSidebar();
    });
    sidebar.append(create);
    for (const project of projects) {
      const entry = document.createElement("button");
      entry.type = "button";
      entry.className =
        project.id === store.state.projectId ? "project current" : "project";
      entry.textContent = project.title;
      entry.addEventListener("click", () => void store.openProject(project.id));
      sidebar.append(entry);
    }
  }

  store.subscribe((state) => {
    chat.render();
    map.render();
    capsules.render();
    document
      .querySelectorAll<HTMLButtonElement>(".map-toolbar button[data-mode]")
      .forEach((b) => b.classList.toggle("active", b.dataset.mode === state.mode));
    if (state.snapshot) {
      const parity = panelParity(state.snapshot.topology, state.snapshot.scope);
      status.textContent =
        `v${state.snapshot.version} · path ${state.snapshot.scope.base_path} · ` +
        `${parity.mapCount} units` +
        (parity.ok ? "" : " · PANEL DESYNC");
    }
  });

  window.setInterval(() => {
    if (!store.state.busy) void store.refresh();
  }, POLL_INTERVAL_MS);

  void renderSidebar();
  return { store };
}

declare global {
  interface Window {
    workbench?: { store: WorkbenchStore };
  }
}

if (typeof document !== "undefined" && document.getElementById("chat")) {
  window.workbench = startWorkbench();
}
