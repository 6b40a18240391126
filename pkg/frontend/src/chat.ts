// Conversational panel: atomic message units with hover triggers, inline
// suggestion cards, and the composer.

import type { ContextdClient } from "./api.js";
import type { WorkbenchStore } from "./state.js";
import type { SuggestionRecord } from "./types.js";
import { chatEntries } from "./visible.js";

function describe(suggestion: SuggestionRecord): string {
  const { decision } = suggestion;
  if (decision.primary_action === "branch") return `Open a branch: ${decision.reason}`;
  if (decision.primary_action === "return_parent") {
    return `Return to the parent thread: ${decision.reason}`;
  }
  if (decision.asset_action !== "none") {
    const kind = decision.asset_action === "extract_task_sop" ? "task SOP" : "reasoning pattern";
    return `Extract a ${kind}: ${decision.asset_reason}`;
  }
  return decision.reason;
}

export class ChatPanel {
  constructor(
    private root: HTMLElement,
    private store: WorkbenchStore,
    private client: ContextdClient,
  ) {}

  render() {
    const { snapshot, busy } = this.store.state;
    this.root.replaceChildren();
    if (!snapshot) {
      this.root.append(el("div", "chat-empty", "Open or create a project to start."));
      return;
    }
    const list = el("div", "chat-list");
    list.id = "chat-list";
    const pending = this.store.pendingSuggestion();
    for (const entry of chatEntries(snapshot.topology, snapshot.scope)) {
      if (entry.placeholder) {
        const marker = el("div", "chat-placeholder", "· placeholder (deleted unit) ·");
        marker.dataset.node = entry.id;
        list.append(marker);
        continue;
      }
      const unit = el("div", `chat-unit role-${entry.role}${entry.excluded ? " excluded" : ""}`);
      unit.dataset.node = entry.id;
      unit.append(el("div", "chat-role", entry.role));
      unit.append(el("div", "chat-content", entry.content));
      unit.append(this.hoverActions(entry.id, entry.excluded));
      list.append(unit);
      if (pending && pending.anchor_node === entry.id) {
        list.append(this.suggestionCard(pending));
      }
    }
    this.root.append(list);
    this.root.append(this.composer(busy));
    list.scrollTop = list.scrollHeight;
  }

  private hoverActions(nodeId: string, excluded: boolean): HTMLElement {
    const bar = el("div", "hover-actions");
    bar.append(
      button("Branch", () =>
        this.store.mutate(() => this.client.branchFrom(nodeId)),
      ),
      button(excluded ? "Context ✓" : "Context", () =>
        this.store.mutate(() => this.client.scope(this.projectId(), "revert", [nodeId])),
      ),
      button("Edit", () => this.editNode(nodeId)),
    );
    return bar;
  }

  private suggestionCard(suggestion: SuggestionRecord): HTMLElement {
    const card = el("div", "suggestion-card");
    card.dataset.suggestion = suggestion.id;
    card.append(el("div", "suggestion-text", describe(suggestion)));
    const actions = el("div", "suggestion-actions");
    actions.append(
      button("Accept", () =>
        this.store.mutate(() => this.client.respond(suggestion.id, "accept")),
      ),
      button("Reject", () =>
        this.store.mutate(() => this.client.respond(suggestion.id, "reject")),
      ),
      button("Dismiss", () =>
        this.store.mutate(() => this.client.respond(suggestion.id, "ignore")),
      ),
    );
    card.append(actions);
    return card;
  }

  private composer(busy: boolean): HTMLElement {
    const form = document.createElement("form");
    form.className = "composer";
    const input = document.createElement("textarea");
    input.placeholder = "Message the current path…";
    input.rows = 2;
    input.disabled = busy;
    const send = document.createElement("button");
    send.type = "submit";
    send.textContent = busy ? "…" : "Send";
    send.disabled = busy;
    form.append(input, send);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const text = input.value.trim();
      if (!text) return;
      input.value = "";
      void this.store.mutate(() => this.client.sendMessage(this.projectId(), text));
    });
    return form;
  }

  private editNode(nodeId: string) {
    const node = this.store.state.snapshot?.topology.nodes[nodeId];
    if (!node) return;
    const content = window.prompt("Edit unit content", node.content);
    if (content === null || content === node.content) return;
    void this.store.mutate(() => this.client.editNode(nodeId, content));
  }

  scrollTo(nodeId: string) {
    const target = this.root.querySelector(`[data-node="${nodeId}"]`);
    if (target instanceof HTMLElement) {
      target.scrollIntoView({ behavior: "smooth", block: "center" });
      target.classList.add("located");
      window.setTimeout(() => target.classList.remove("located"), 1200);
    }
  }

  private projectId(): string {
    const id = this.store.state.projectId;
    if (!id) throw new Error("no project open");
    return id;
  }
}

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function button(label: string, onClick: () => unknown): HTMLButtonElement {
  const node = document.createElement("button");
  node.type = "button";
  node.textContent = label;
  node.addEventListener("click", () => void onClick());
  return node;
}
