"""Independent oracles: a brute-force visible-path walker written straight
from the assembly rules prose, and a structural invariant checker. These stay
deliberately separate from the library implementation they cross-check."""

MAINLINE = "mainline"


def oracle_visible_ids(topo, base_path, truncate_at=None):
    """Walk the default-visible path the long way: index arithmetic on the
    mainline window, then an explicit parent-chain descent."""
    main = topo.mainline
    if topo.mainline_start is not None:
        start = main.index(topo.mainline_start)
    else:
        start = 0

    if base_path == MAINLINE:
        if not main:
            ids = []
        else:
            stop = (
                main.index(topo.mainline_end)
                if topo.mainline_end is not None
                else len(main) - 1
            )
            ids = []
            i = start
            while i <= stop:
                ids.append(main[i])
                i += 1
    else:
        chain = []
        cursor = base_path
        while cursor != MAINLINE:
            branch = topo.branches[cursor]
            chain.append(branch)
            cursor = branch.parent
        chain.reverse()

        ids = []
        anchor_idx = main.index(chain[0].anchor)
        i = start
        while i <= anchor_idx:
            ids.append(main[i])
            i += 1
        for j, branch in enumerate(chain):
            if j + 1 < len(chain):
                nested = chain[j + 1].anchor
                for node_id in branch.segment:
                    ids.append(node_id)
                    if node_id == nested:
                        break
            else:
                for node_id in branch.segment:
                    ids.append(node_id)

    if truncate_at is not None and truncate_at in ids:
        ids = ids[: ids.index(truncate_at) + 1]
    return ids


def oracle_effective_ids(topo, visible_ids, excluded, included):
    """(visible \\ excluded) ∪ included, placeholders dropped, timestamp order."""
    pool = set()
    for node_id in visible_ids:
        if node_id not in excluded:
            pool.add(node_id)
    for node_id in included:
        if node_id in topo.nodes:
            pool.add(node_id)
    pool = {n for n in pool if not topo.nodes[n].placeholder}
    return sorted(pool, key=lambda n: (topo.nodes[n].created_at, topo.nodes[n].seq))


def check_topology(topo):
    """Assert every structural invariant; raises AssertionError with context."""
    containers = [(MAINLINE, list(topo.mainline))]
    for branch in topo.branches.values():
        containers.append((branch.id, list(branch.segment)))

    seen = {}
    for path, slots in containers:
        for node_id in slots:
            assert node_id in topo.nodes, f"{path} references missing node {node_id}"
            assert node_id not in seen, (
                f"node {node_id} appears on both {seen[node_id]} and {path}"
            )
            seen[node_id] = path
    assert set(seen) == set(topo.nodes), (
        f"orphaned nodes: {set(topo.nodes) - set(seen)} / "
        f"phantom slots: {set(seen) - set(topo.nodes)}"
    )

    for branch in topo.branches.values():
        assert branch.anchor in topo.nodes, f"{branch.id} anchor missing"
        parent_slots = (
            topo.mainline
            if branch.parent == MAINLINE
            else topo.branches[branch.parent].segment
        )
        assert branch.anchor in parent_slots, (
            f"{branch.id} anchor {branch.anchor} not on parent {branch.parent}"
        )
        # acyclic, finite chain
        hops = 0
        cursor = branch.parent
        while cursor != MAINLINE:
            assert cursor in topo.branches, f"{branch.id} has dangling parent {cursor}"
            cursor = topo.branches[cursor].parent
            hops += 1
            assert hops <= len(topo.branches), f"cycle through {branch.id}"

    if topo.mainline_start is not None:
        assert topo.mainline_start in topo.mainline, "start off mainline"
    if topo.mainline_end is not None:
        assert topo.mainline_end in topo.mainline, "end off mainline"
    if topo.mainline_start is not None and topo.mainline_end is not None:
        assert topo.mainline.index(topo.mainline_start) <= topo.mainline.index(
            topo.mainline_end
        ), "start after end"

    seqs = [n.seq for n in topo.nodes.values()]
    assert len(seqs) == len(set(seqs)), "duplicate seq numbers"
    for node in topo.nodes.values():
        if node.placeholder:
            assert node.role == "system" and node.content == "", (
                f"placeholder {node.id} is not semantically empty"
            )
