// Capsule bar above the composer: floating pattern capsules, review editor
// on double-click, click to toggle activation.

import type { ContextdClient } from "./api.js";
import type { WorkbenchStore } from "./state.js";
import type { CapsuleRecord } from "./types.js";

export class CapsuleBar {
  constructor(
    private root: HTMLElement,
    private store: WorkbenchStore,
    private client: ContextdClient,
  ) {}

  render() {
    this.root.replaceChildren();
    for (const capsule of this.store.state.patterns) {
      const chip = document.createElement("button");
      chip.type = "button";
      chip.className = `capsule capsule-${capsule.state}`;
      chip.dataset.capsule = capsule.id;
      chip.textContent =
        capsule.state === "needs_review" ? `${capsule.name} ⚠` : capsule.name;
      chip.title = `${capsule.type} — ${capsule.state}`;
      if (capsule.state === "needs_review") {
        chip.addEventListener("dblclick", () => this.review(capsule));
      } else {
        chip.addEventListener("click", () =>
          void this.store.mutate(() =>
            this.client.setEnabled(capsule.id, capsule.state !== "active"),
          ),
        );
      }
      this.root.append(chip);
    }
  }

  private review(capsule: CapsuleRecord) {
    const name = window.prompt("Capsule name", capsule.name);
    if (name === null) return;
    const instruction = window.prompt("Instruction", capsule.instruction);
    if (instruction === null) return;
    const example = window.prompt("Example", capsule.example);
    if (example === null) return;
    const approve = window.confirm("Approve and activate this capsule?");
    void this.store.mutate(() =>
      this.client.review(capsule.id, { name, instruction, example }, approve),
    );
  }
}
