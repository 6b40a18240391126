// Wire types for the contextd HTTP API.

export type Role = "user" | "assistant" | "system";

export interface NodeRecord {
  id: string;
  role: Role;
  content: string;
  created_at: number;
  seq: number;
  placeholder: boolean;
  layout_pos?: [number, number];
}

export interface BranchRecord {
  id: string;
  parent: string; // "mainline" or a branch id
  anchor: string;
  segment: string[];
  intent: string | null;
  status: "active" | "completed";
  summary: string | null;
}

export interface TopologyRecord {
  nodes: Record<string, NodeRecord>;
  mainline: string[];
  branches: Record<string, BranchRecord>;
  mainline_start: string | null;
  mainline_end: string | null;
}

export interface ScopeRecord {
  base_path: string;
  excluded_nodes: string[];
  included_nodes: string[];
  truncate_at: string | null;
}

export interface TopologyResponse {
  version: number;
  topology: TopologyRecord;
  scope: ScopeRecord;
  mainline_summary: string | null;
  can_undo: boolean;
  can_redo: boolean;
}

export interface DecisionRecord {
  primary_action: "continue" | "branch" | "return_parent";
  asset_action: "none" | "extract_reasoning" | "extract_task_sop";
  confidence: number;
  reason: string;
  asset_reason: string;
  show_suggestion: boolean;
}

export interface SuggestionRecord {
  id: string;
  decision: DecisionRecord;
  anchor_node: string;
  state: "pending" | "accepted" | "rejected" | "ignored";
  created_at: number;
}

export interface CapsuleRecord {
  id: string;
  type: "reasoning" | "task_sop" | "context_case";
  name: string;
  instruction: string;
  example: string;
  requires_human_review: boolean;
  state: "needs_review" | "active" | "disabled";
}

export interface TurnResponse {
  version: number;
  user_node: string;
  assistant_node: string;
  suggestion: SuggestionRecord | null;
  assembled: {
    system_text: string;
    messages: [string, string][];
    final_user_turn: string;
  };
}

export interface ProjectSummary {
  id: string;
  title: string;
  version: number;
  created_at: number;
}

export type MapMode = "search" | "selection" | "rearrange" | "delete";
