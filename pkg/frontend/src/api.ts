// Typed client for the contextd session service. The workbench talks to the
// backend exclusively through these calls; it holds no domain logic itself.

import type {
  CapsuleRecord,
  ProjectSummary,
  SuggestionRecord,
  TopologyResponse,
  TurnResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`${status}: ${detail}`);
  }
}

async function request<T>(base: string, method: string, path: string, body?: unknown): Promise<T> {
  const response = await fetch(`${base}${path}`, {
    method,
    headers: body === undefined ? undefined : { "content-type": "application/json" },
    body: body === undefined ? undefined : JSON.stringify(body),
  });
  const text = await response.text();
  if (!response.ok) {
    let detail = text;
    try {
      detail = JSON.parse(text).detail ?? text;
    } catch {
      // keep the raw body
    }
    throw new ApiError(response.status, detail);
  }
  return (text ? JSON.parse(text) : undefined) as T;
}

export class ContextdClient {
  constructor(public base: string) {}

  createProject(title: string) {
    return request<{ id: string; title: string; version: number }>(
      this.base, "POST", "/projects", { title },
    );
  }

  listProjects() {
    return request<ProjectSummary[]>(this.base, "GET", "/projects");
  }

  topology(projectId: string) {
    return request<TopologyResponse>(this.base, "GET", `/projects/${projectId}/topology`);
  }

  sendMessage(projectId: string, text: string, fromNode?: string) {
    return request<TurnResponse>(this.base, "POST", `/projects/${projectId}/messages`, {
      text,
      from_node: fromNode ?? null,
    });
  }

  editNode(nodeId: string, content: string) {
    return request<{ version: number }>(this.base, "PATCH", `/nodes/${nodeId}`, { content });
  }

  setLayout(nodeId: string, pos: [number, number]) {
    return request<{ version: number }>(this.base, "PATCH", `/nodes/${nodeId}`, {
      layout_pos: pos,
    });
  }

  branchFrom(nodeId: string, intent?: string) {
    return request<{ branch: string; version: number }>(
      this.base, "POST", `/nodes/${nodeId}/branch`, { intent: intent ?? null },
    );
  }

  rebranchFrom(nodeId: string) {
    return request<{ branch: string; version: number }>(
      this.base, "POST", `/nodes/${nodeId}/rebranch`, {},
    );
  }

  deleteNodes(projectId: string, ids: string[], preview = false) {
    return request<{ report: { removed: string[]; placeholders: { id: string | null; origin: string }[] }; version: number }>(
      this.base, "POST", `/projects/${projectId}/nodes/delete`, { ids, preview },
    );
  }

  scope(projectId: string, op: "include" | "exclude" | "revert", ids: string[]) {
    return request<{ scope: { excluded_nodes: string[] }; version: number }>(
      this.base, "POST", `/projects/${projectId}/scope`, { op, ids },
    );
  }

  transition(projectId: string, target: string) {
    return request<{ base_path: string; version: number }>(
      this.base, "POST", `/projects/${projectId}/path`, { target },
    );
  }

  setMainline(projectId: string, bounds: { start?: string | null; end?: string | null }) {
    return request<{ mainline_start: string | null; mainline_end: string | null; version: number }>(
      this.base, "POST", `/projects/${projectId}/mainline`, bounds,
    );
  }

  history(projectId: string, op: "undo" | "redo" | "reset") {
    return request<{ version: number }>(this.base, "POST", `/projects/${projectId}/history`, { op });
  }

  suggestions(projectId: string) {
    return request<{ version: number; suggestions: SuggestionRecord[] }>(
      this.base, "GET", `/projects/${projectId}/suggestions`,
    );
  }

  respond(suggestionId: string, action: "accept" | "reject" | "ignore") {
    return request<{ effect: Record<string, unknown>; version: number }>(
      this.base, "POST", `/suggestions/${suggestionId}/respond`, { action },
    );
  }

  patterns(projectId: string) {
    return request<{ version: number; patterns: CapsuleRecord[] }>(
      this.base, "GET", `/projects/${projectId}/patterns`,
    );
  }

  extract(projectId: string, type: CapsuleRecord["type"], ids: string[]) {
    return request<{ capsule: CapsuleRecord; version: number }>(
      this.base, "POST", `/projects/${projectId}/patterns/extract`, { type, ids },
    );
  }

  review(capsuleId: string, edits: Partial<Pick<CapsuleRecord, "name" | "instruction" | "example">>, approve: boolean) {
    return request<{ capsule: CapsuleRecord; version: number }>(
      this.base, "POST", `/patterns/${capsuleId}/review`, { edits, approve },
    );
  }

  setEnabled(capsuleId: string, enabled: boolean) {
    return request<{ capsule: CapsuleRecord; version: number }>(
      this.base, "POST", `/patterns/${capsuleId}/enabled`, { enabled },
    );
  }
}
