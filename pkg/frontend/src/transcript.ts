// Transcript view: one user bubble + one agent bubble per turn, with the
// generated SQL, its validation badge, and an expandable reasoning trace.

import type { QueryDoc, SessionDoc, TurnDoc } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function statusBadge(query: QueryDoc): HTMLElement {
  const badge = el("span", `badge badge-${query.report.status}`, query.report.status);
  badge.setAttribute("data-status", query.report.status);
  return badge;
}

function repairsNote(query: QueryDoc): HTMLElement | null {
  if (query.report.repairs.length === 0) return null;
  const note = el("div", "repairs");
  for (const repair of query.report.repairs) {
    const line = el("span", "repair-line");
    line.appendChild(el("s", "repair-before", repair.before));
    line.appendChild(el("span", "repair-arrow", " → "));
    line.appendChild(el("b", "repair-after", repair.after));
    note.appendChild(line);
  }
  return note;
}

function issuesNote(query: QueryDoc): HTMLElement | null {
  if (query.report.issues.length === 0) return null;
  const note = el("ul", "issues");
  for (const issue of query.report.issues) {
    note.appendChild(el("li", "issue-line", `${issue.kind}: ${issue.detail}`));
  }
  return note;
}

function traceDetails(turn: TurnDoc): HTMLElement {
  const details = el("details", "trace");
  details.appendChild(el("summary", "trace-summary", "Thought / Action / Observation"));
  details.appendChild(el("pre", "trace-thought", turn.thought));
  const action = el("div", "trace-action");
  action.appendChild(el("span", "trace-label", `Action: ${turn.action.tool}`));
  if (typeof turn.action.arguments["sql"] === "string") {
    action.appendChild(el("code", "trace-sql", String(turn.action.arguments["sql"])));
  }
  details.appendChild(action);
  if (turn.observation) {
    const observation = el("div", "trace-observation");
    observation.appendChild(
      el("span", "trace-label", `Observation: ${turn.observation.row_count} row(s)`),
    );
    const table = el("table", "sample-rows");
    const head = el("tr");
    for (const column of turn.observation.columns) {
      head.appendChild(el("th", undefined, column));
    }
    table.appendChild(head);
    for (const row of turn.observation.sample_rows) {
      const tr = el("tr");
      for (const cell of row) {
        tr.appendChild(el("td", undefined, cell === null ? "" : String(cell)));
      }
      table.appendChild(tr);
    }
    observation.appendChild(table);
    details.appendChild(observation);
  }
  return details;
}

export function renderTurn(turn: TurnDoc): HTMLElement {
  const wrapper = el("div", "turn");
  wrapper.setAttribute("data-turn-index", String(turn.turn_index));

  const user = el("div", "bubble bubble-user", turn.utterance);
  wrapper.appendChild(user);

  const agentClass =
    turn.query && turn.query.report.status === "rejected"
      ? "bubble bubble-agent bubble-clarification"
      : "bubble bubble-agent";
  const agent = el("div", agentClass);
  agent.appendChild(el("p", "response-text", turn.response));

  if (turn.query) {
    const sqlBlock = el("div", "sql-block");
    sqlBlock.appendChild(statusBadge(turn.query));
    sqlBlock.appendChild(el("code", "sql-text", turn.query.raw_sql));
    const repairs = repairsNote(turn.query);
    if (repairs) sqlBlock.appendChild(repairs);
    const issues = issuesNote(turn.query);
    if (issues) sqlBlock.appendChild(issues);
    agent.appendChild(sqlBlock);
  }
  agent.appendChild(traceDetails(turn));
  wrapper.appendChild(agent);
  return wrapper;
}

export function renderTranscript(session: SessionDoc): HTMLElement {
  const container = el("div", "transcript");
  container.id = "transcript";
  if (session.turns.length === 0) {
    container.appendChild(
      el("p", "transcript-empty", "No turns yet. Ask about a product to start."),
    );
    return container;
  }
  for (const turn of session.turns) {
    container.appendChild(renderTurn(turn));
  }
  return container;
}
