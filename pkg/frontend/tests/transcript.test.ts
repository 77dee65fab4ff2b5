import { describe, expect, it } from "vitest";

import { renderTranscript, renderTurn } from "../src/transcript.js";
import type { SessionDoc } from "../src/types.js";
import { recorded } from "./fakeService.js";

const session: SessionDoc = recorded.session;

describe("transcript view", () => {
  it("renders every recorded turn with utterance and response", () => {
    const root = renderTranscript(session);
    const turns = root.querySelectorAll(".turn");
    expect(turns.length).toBe(session.turns.length);
    session.turns.forEach((turn, i) => {
      expect(turns[i].querySelector(".bubble-user")?.textContent).toBe(turn.utterance);
      expect(turns[i].querySelector(".response-text")?.textContent).toBe(turn.response);
    });
  });

  it("shows the generated SQL with its status badge", () => {
    const root = renderTranscript(session);
    const badges = [...root.querySelectorAll(".badge")].map(
      (b) => b.getAttribute("data-status"),
    );
    const expected = session.turns
      .filter((t) => t.query !== null)
      .map((t) => t.query!.report.status);
    expect(badges).toEqual(expected);
    expect(badges).toContain("valid");
    expect(badges).toContain("repaired");
    expect(badges).toContain("rejected");
  });

  it("shows before/after literals on repaired turns", () => {
    const repairedTurn = session.turns.find(
      (t) => t.query?.report.status === "repaired",
    )!;
    const node = renderTurn(repairedTurn);
    const before = node.querySelector(".repair-before")?.textContent;
    const after = node.querySelector(".repair-after")?.textContent;
    expect(before).toBe(repairedTurn.query!.report.repairs[0].before);
    expect(after).toBe(repairedTurn.query!.report.repairs[0].after);
  });

  it("styles rejected turns as clarification bubbles with issues listed", () => {
    const rejectedTurn = session.turns.find(
      (t) => t.query?.report.status === "rejected",
    )!;
    const node = renderTurn(rejectedTurn);
    expect(node.querySelector(".bubble-clarification")).not.toBeNull();
    const issueText = node.querySelector(".issue-line")?.textContent ?? "";
    expect(issueText).toContain("non_enum_value");
  });

  it("exposes the thought/action/observation trace behind a details element", () => {
    const turn = session.turns[0];
    const node = renderTurn(turn);
    const details = node.querySelector("details.trace")!;
    expect(details.querySelector(".trace-thought")?.textContent).toBe(turn.thought);
    expect(details.querySelector(".trace-action")?.textContent).toContain("query_table");
    expect(details.querySelector(".trace-observation")?.textContent).toContain(
      `${turn.observation!.row_count} row(s)`,
    );
    const headerCells = details.querySelectorAll(".sample-rows th");
    expect(headerCells.length).toBe(turn.observation!.columns.length);
  });

  it("renders an empty-session placeholder", () => {
    const empty: SessionDoc = {
      session_id: "s",
      dialog_state: { active_table: "", constraints: {} },
      routing_history: [],
      turns: [],
    };
    const root = renderTranscript(empty);
    expect(root.querySelector(".transcript-empty")).not.toBeNull();
    expect(root.querySelectorAll(".turn").length).toBe(0);
  });
});
