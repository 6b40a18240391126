"""Shared builders for the test suite: random topologies, scopes, fixtures."""

import random

from contextd.graph import MAINLINE, ContextNode, ConversationTopology


def exchange(topo, tag):
    """Fresh (user, assistant) node pair, ids allocated by the topology."""
    user = ContextNode(id=topo.allocate_node_id(), role="user", content=f"u:{tag}")
    assistant = ContextNode(
        id=topo.allocate_node_id(), role="assistant", content=f"a:{tag}"
    )
    return user, assistant


def seeded_topology(prefix="t-"):
    return ConversationTopology(id_prefix=prefix)


def mainline_fixture(n_exchanges=2):
    """Topology with a plain mainline of n exchanges."""
    topo = seeded_topology()
    for i in range(n_exchanges):
        topo.append_exchange(MAINLINE, *exchange(topo, f"m{i}"))
    return topo


def branch_depth(topo, path):
    depth = 0
    while path != MAINLINE:
        path = topo.branches[path].parent
        depth += 1
    return depth


def random_topology(rng: random.Random, max_nodes=30, max_depth=4, with_bounds=True):
    """Random topology grown through the public mutation ops only."""
    topo = seeded_topology()
    topo.append_exchange(MAINLINE, *exchange(topo, "seed"))
    target = rng.randint(4, max_nodes)
    while len(topo.nodes) < target:
        paths = [MAINLINE] + list(topo.branches)
        roll = rng.random()
        if roll < 0.55:
            path = rng.choice(paths)
            topo.append_exchange(path, *exchange(topo, f"x{len(topo.nodes)}"))
        elif roll < 0.85:
            parent = rng.choice(paths)
            slots = topo.path_nodes(parent)
            if not slots or branch_depth(topo, parent) >= max_depth:
                continue
            anchor = rng.choice(slots)
            branch_id = topo.create_branch(
                parent, anchor, intent=rng.choice([None, f"intent-{anchor}"])
            )
            if rng.random() < 0.8:
                topo.append_exchange(branch_id, *exchange(topo, f"b{len(topo.nodes)}"))
        else:
            victim = rng.choice(list(topo.nodes))
            if not topo.nodes[victim].placeholder:
                topo.edit_node(victim, f"edited:{victim}")
    if with_bounds and topo.mainline and rng.random() < 0.4:
        start = rng.choice(topo.mainline)
        end_candidates = topo.mainline[topo.mainline.index(start) :]
        end = rng.choice(end_candidates)
        topo.set_mainline_bounds(start=start, end=end)
    return topo


def random_scope_parts(rng: random.Random, topo):
    """Random (base_path, excluded, included, truncate_at) over the topology."""
    paths = [MAINLINE] + list(topo.branches)
    base = rng.choice(paths)
    ids = list(topo.nodes)
    excluded = set(rng.sample(ids, k=rng.randint(0, min(5, len(ids)))))
    included = set(
        rng.sample(ids, k=rng.randint(0, min(4, len(ids))))
    ) - excluded
    truncate_at = None
    if rng.random() < 0.35:
        on_path = topo.path_nodes(base)
        if on_path:
            truncate_at = rng.choice(on_path)
    return base, excluded, included, truncate_at
