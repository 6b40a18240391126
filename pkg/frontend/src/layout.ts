// Auto layout for the context map: mainline runs vertically, each branch is
// offset one column to the right of its parent, anchored at its fork row.
// Manual positions from rearrange mode override the computed slot per node.

import type { TopologyRecord } from "./types.js";

export interface PlacedNode {
  id: string;
  x: number;
  y: number;
  column: number;
  row: number;
  pinned: boolean;
}

export interface PlacedEdge {
  from: string;
  to: string;
  kind: "sequence" | "fork";
}

export interface MapLayout {
  nodes: Map<string, PlacedNode>;
  edges: PlacedEdge[];
  columns: number;
  rows: number;
}

export const COLUMN_WIDTH = 180;
export const ROW_HEIGHT = 64;

function depthOf(topology: TopologyRecord, branchId: string): number {
  let depth = 0;
  let cursor = branchId;
  while (cursor !== "mainline") {
    const branch = topology.branches[cursor];
    if (!branch) break;
    depth += 1;
    cursor = branch.parent;
  }
  return depth;
}

export function computeLayout(topology: TopologyRecord): MapLayout {
  const nodes = new Map<string, PlacedNode>();
  const edges: PlacedEdge[] = [];
  const rowOf = new Map<string, number>();
  let nextRow = 0;

  const place = (id: string, column: number, row: number) => {
    const stored = topology.nodes[id]?.layout_pos;
    nodes.set(id, {
      id,
      column,
      row,
      x: stored ? stored[0] : column * COLUMN_WIDTH,
      y: stored ? stored[1] : row * ROW_HEIGHT,
      pinned: Boolean(stored),
    });
    rowOf.set(id, row);
  };

  topology.mainline.forEach((id, i) => {
    place(id, 0, i);
    if (i > 0) edges.push({ from: topology.mainline[i - 1]!, to: id, kind: "sequence" });
    nextRow = Math.max(nextRow, i + 1);
  });

  // branches sorted shallow-first so parent segments are placed before children
  const branches = Object.values(topology.branches).sort(
    (a, b) => depthOf(topology, a.id) - depthOf(topology, b.id),
  );
  for (const branch of branches) {
    const column = depthOf(topology, branch.id);
    const anchorRow = rowOf.get(branch.anchor);
    let row = anchorRow !== undefined ? anchorRow + 1 : nextRow;
    let previous = branch.anchor;
    branch.segment.forEach((id) => {
      // avoid stacking siblings on the same cell: claim the next free row
      while ([...nodes.values()].some((p) => p.column === column && p.row === row)) {
        row += 1;
      }
      place(id, column, row);
      edges.push({
        from: previous,
        to: id,
        kind: previous === branch.anchor ? "fork" : "sequence",
      });
      previous = id;
      row += 1;
      nextRow = Math.max(nextRow, row);
    });
    if (branch.segment.length === 0 && anchorRow !== undefined) {
      // fork marker for an empty branch still points at its anchor
      edges.push({ from: branch.anchor, to: branch.anchor, kind: "fork" });
    }
  }

  const columns = Math.max(1, ...[...nodes.values()].map((p) => p.column + 1));
  const rows = Math.max(1, ...[...nodes.values()].map((p) => p.row + 1));
  return { nodes, edges, columns, rows };
}
