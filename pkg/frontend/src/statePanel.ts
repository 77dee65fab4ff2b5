// Dialog-state panel: one removable chip per accumulated column constraint.
// Removing a chip asks the agent to relax that column ("any <column>"),
// which the service folds back into the state on the next turn.

import type { ConstraintDoc, DialogStateDoc } from "./types.js";

const OP_SYMBOLS: Record<string, string> = {
  eq: "=",
  neq: "≠",
  lt: "<",
  lte: "≤",
  gt: ">",
  gte: "≥",
  in: "in",
  like: "~",
};

export function formatOperand(operand: unknown): string {
  if (Array.isArray(operand)) {
    return `(${operand.map(String).join(", ")})`;
  }
  return String(operand);
}

export function chipLabel(constraint: ConstraintDoc): string {
  const op = OP_SYMBOLS[constraint.op] ?? constraint.op;
  return `${constraint.column} ${op} ${formatOperand(constraint.operand)}`;
}

export function renderStatePanel(
  state: DialogStateDoc,
  onRemove: (column: string) => void,
): HTMLElement {
  const panel = document.createElement("div");
  panel.className = "state-panel";
  panel.id = "state-panel";

  const heading = document.createElement("h2");
  heading.textContent = "Dialog state";
  panel.appendChild(heading);

  const columns = Object.keys(state.constraints).sort();
  if (columns.length === 0) {
    const empty = document.createElement("p");
    empty.className = "state-empty";
    empty.textContent = "no constraints";
    panel.appendChild(empty);
    return panel;
  }

  for (const column of columns) {
    const constraint = state.constraints[column];
    const chip = document.createElement("span");
    chip.className = "chip";
    chip.setAttribute("data-column", column);

    const label = document.createElement("span");
    label.className = "chip-label";
    label.textContent = chipLabel(constraint);
    label.title = `set at turn ${constraint.turn_index}`;
    chip.appendChild(label);

    const remove = document.createElement("button");
    remove.className = "chip-remove";
    remove.textContent = "×";
    remove.title = `relax ${column}`;
    remove.addEventListener("click", () => onRemove(column));
    chip.appendChild(remove);

    panel.appendChild(chip);
  }
  return panel;
}
