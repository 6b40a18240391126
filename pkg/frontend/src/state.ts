// Workbench view state: one snapshot per project, version-gated refresh.
// Every mutation goes through the API; this store only caches and projects.

import type { ContextdClient } from "./api.js";
import type {
  CapsuleRecord,
  MapMode,
  SuggestionRecord,
  TopologyResponse,
} from "./types.js";

export interface ViewState {
  projectId: string | null;
  snapshot: TopologyResponse | null;
  suggestions: SuggestionRecord[];
  patterns: CapsuleRecord[];
  selected: Set<string>;
  mode: MapMode;
  busy: boolean; // optimistic-disable while a mutation is in flight
  searchQuery: string;
}

export type Listener = (state: ViewState) => void;

export class WorkbenchStore {
  state: ViewState = {
    projectId: null,
    snapshot: null,
    suggestions: [],
    patterns: [],
    selected: new Set(),
    mode: "selection",
    busy: false,
    searchQuery: "",
  };

  private listeners: Listener[] = [];

  constructor(private client: ContextdClient) {}

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit() {
    for (const listener of this.listeners) listener(this.state);
  }

  setMode(mode: MapMode) {
    this.state.mode = mode;
    if (mode !== "selection") this.state.selected = new Set();
    this.emit();
  }

  setSearch(query: string) {
    this.state.searchQuery = query;
    this.emit();
  }

  toggleSelected(id: string) {
    const selected = new Set(this.state.selected);
    if (selected.has(id)) selected.delete(id);
    else selected.add(id);
    this.state.selected = selected;
    this.emit();
  }

  clearSelection() {
    this.state.selected = new Set();
    this.emit();
  }

  async openProject(projectId: string) {
    this.state.projectId = projectId;
    this.state.selected = new Set();
    await this.refresh(true);
  }

  /** Poll step: refetch only when the server version moved past ours. */
  async refresh(force = false): Promise<boolean> {
    const projectId = this.state.projectId;
    if (!projectId) return false;
    const snapshot = await this.client.topology(projectId);
    const stale =
      force ||
      !this.state.snapshot ||
      snapshot.version !== this.state.snapshot.version;
    if (!stale) return false;
    const [suggestions, patterns] = await Promise.all([
      this.client.suggestions(projectId),
      this.client.patterns(projectId),
    ]);
    this.state.snapshot = snapshot;
    this.state.suggestions = suggestions.suggestions;
    this.state.patterns = patterns.patterns;
    // drop selections that no longer resolve in the new snapshot
    this.state.selected = new Set(
      [...this.state.selected].filter((id) => id in snapshot.topology.nodes),
    );
    this.emit();
    return true;
  }

  /** Run a mutation with optimistic-disable, then resync from the server. */
  async mutate<T>(action: () => Promise<T>): Promise<T> {
    if (this.state.busy) throw new Error("mutation already in flight");
    this.state.busy = true;
    this.emit();
    try {
      const result = await action();
      await this.refresh(true);
      return result;
    } finally {
      this.state.busy = false;
      this.emit();
    }
  }

  pendingSuggestion(): SuggestionRecord | null {
    return this.state.suggestions.find((s) => s.state === "pending") ?? null;
  }
}
