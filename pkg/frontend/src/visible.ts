// Client-side projection of the server snapshot into the two panels.
// Pure functions so panel parity is checkable in tests without a DOM.

import type { ScopeRecord, TopologyRecord } from "./types.js";

const MAINLINE = "mainline";

function windowStart(topology: TopologyRecord): number {
  return topology.mainline_start
    ? topology.mainline.indexOf(topology.mainline_start)
    : 0;
}

/** Ordered node ids of the default-visible path for the scope's base path. */
export function visiblePathIds(topology: TopologyRecord, scope: ScopeRecord): string[] {
  const main = topology.mainline;
  const start = windowStart(topology);
  let ids: string[];

  if (scope.base_path === MAINLINE) {
    const end = topology.mainline_end
      ? main.indexOf(topology.mainline_end)
      : main.length - 1;
    ids = main.slice(start, end + 1);
  } else {
    const chain: TopologyRecord["branches"][string][] = [];
    let cursor = scope.base_path;
    while (cursor !== MAINLINE) {
      const branch = topology.branches[cursor];
      if (!branch) return []; // stale snapshot; next poll repairs it
      chain.push(branch);
      cursor = branch.parent;
    }
    chain.reverse();
    const root = chain[0]!;
    const anchorIdx = main.indexOf(root.anchor);
    ids = anchorIdx >= start ? main.slice(start, anchorIdx + 1) : [];
    chain.forEach((branch, i) => {
      const next = chain[i + 1];
      if (next) {
        const cut = branch.segment.indexOf(next.anchor);
        ids = ids.concat(branch.segment.slice(0, cut + 1));
      } else {
        ids = ids.concat(branch.segment);
      }
    });
  }

  if (scope.truncate_at !== null) {
    const cut = ids.indexOf(scope.truncate_at);
    if (cut >= 0) ids = ids.slice(0, cut + 1);
  }
  return ids;
}

/** Everything the map canvas draws: every node in the snapshot. */
export function mapNodeIds(topology: TopologyRecord): Set<string> {
  return new Set(Object.keys(topology.nodes));
}

export interface ChatEntry {
  id: string;
  role: string;
  content: string;
  excluded: boolean;
  placeholder: boolean;
}

/** The conversational panel: the visible path with activation styling. */
export function chatEntries(topology: TopologyRecord, scope: ScopeRecord): ChatEntry[] {
  const excluded = new Set(scope.excluded_nodes);
  return visiblePathIds(topology, scope).map((id) => {
    const node = topology.nodes[id]!;
    return {
      id,
      role: node.role,
      content: node.content,
      excluded: excluded.has(id),
      placeholder: node.placeholder,
    };
  });
}

export interface ParityReport {
  ok: boolean;
  chatCount: number;
  mapCount: number;
  problems: string[];
}

/**
 * Panel synchronization check: both panels must be projections of one
 * snapshot — every chat node exists on the map, the map covers the whole
 * snapshot, and neither panel invents ids.
 */
export function panelParity(topology: TopologyRecord, scope: ScopeRecord): ParityReport {
  const problems: string[] = [];
  const map = mapNodeIds(topology);
  const chat = chatEntries(topology, scope);
  for (const entry of chat) {
    if (!map.has(entry.id)) problems.push(`chat renders unknown node ${entry.id}`);
  }
  const everyNode = new Set(Object.keys(topology.nodes));
  if (map.size !== everyNode.size) {
    problems.push(`map misses ${everyNode.size - map.size} snapshot nodes`);
  }
  const onPaths = new Set<string>(topology.mainline);
  for (const branch of Object.values(topology.branches)) {
    branch.segment.forEach((id) => onPaths.add(id));
  }
  for (const id of map) {
    if (!onPaths.has(id)) problems.push(`map node ${id} is on no path`);
  }
  return { ok: problems.length === 0, chatCount: chat.length, mapCount: map.size, problems };
}
