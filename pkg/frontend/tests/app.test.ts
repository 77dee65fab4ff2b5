// Scripted browser-level test: boots the app against a fake service that
// replays a session recorded from the real mock-provider backend, drives
// turns through the DOM, and checks transcript, badges, state chips, chip
// removal, reload fidelity, and the offline banner.

import { beforeEach, describe, expect, it } from "vitest";

import { ChatApp } from "../src/app.js";
import { FakeService, installFakeService, recorded } from "./fakeService.js";

const SCRIPT = recorded.session.turns.map((t) => t.utterance);

function mount(): HTMLElement {
  document.body.innerHTML = '<div id="app"></div>';
  return document.getElementById("app")!;
}

async function bootApp(): Promise<ChatApp> {
  const app = new ChatApp();
  await app.init(mount());
  return app;
}

describe("chat app", () => {
  let service: FakeService;

  beforeEach(() => {
    service = installFakeService();
  });

  it("boots with an empty transcript and empty state panel", async () => {
    await bootApp();
    expect(document.querySelector(".transcript-empty")).not.toBeNull();
    expect(document.querySelector(".state-empty")?.textContent).toBe("no constraints");
    expect(document.querySelector("#routing-badge")?.textContent).toBe("table: unrouted");
  });

  it("lists registered tables in the override dropdown", async () => {
    await bootApp();
    const options = [...document.querySelectorAll("#table-override option")].map(
      (o) => (o as HTMLOptionElement).value,
    );
    expect(options).toEqual(["", "backpacks"]);
  });

  it("shows every turn with its SQL badge after the scripted session", async () => {
    const app = await bootApp();
    for (const utterance of SCRIPT.slice(0, 4)) {
      await app.send(utterance);
    }
    const turns = document.querySelectorAll(".turn");
    expect(turns.length).toBe(4);
    const badges = [...document.querySelectorAll(".badge")].map(
      (b) => b.getAttribute("data-status"),
    );
    expect(badges).toEqual(["valid", "valid", "repaired", "rejected"]);
    expect(document.querySelector("#routing-badge")?.textContent).toBe(
      "table: backpacks",
    );
  });

  it("sends the form input as a turn and clears it", async () => {
    await bootApp();
    const input = document.getElementById("utterance-input") as HTMLInputElement;
    const form = document.getElementById("utterance-form") as HTMLFormElement;
    input.value = SCRIPT[0];
    form.dispatchEvent(new Event("submit", { bubbles: true, cancelable: true }));
    await Promise.resolve();
    await new Promise((resolve) => setTimeout(resolve, 0));
    expect(service.postedUtterances).toEqual([SCRIPT[0]]);
    expect(input.value).toBe("");
    expect(document.querySelectorAll(".turn").length).toBe(1);
  });

  it("shows exactly the final dialog-state constraints as chips", async () => {
    const app = await bootApp();
    for (const utterance of SCRIPT.slice(0, 4)) {
      await app.send(utterance);
    }
    const lastTurn = recorded.session.turns[3];
    const expected = Object.keys(lastTurn.state_after.constraints).sort();
    const chips = [...document.querySelectorAll(".chip")].map(
      (c) => c.getAttribute("data-column"),
    );
    expect(chips).toEqual(expected);
    expect(chips).toContain("color");
  });

  it("chip removal posts a relaxation turn and drops the constraint", async () => {
    const app = await bootApp();
    for (const utterance of SCRIPT.slice(0, 4)) {
      await app.send(utterance);
    }
    const removeColor = document.querySelector(
      '.chip[data-column="color"] .chip-remove',
    ) as HTMLButtonElement;
    removeColor.click();
    await new Promise((resolve) => setTimeout(resolve, 0));
    expect(service.postedUtterances.at(-1)).toBe("any color");
    expect(document.querySelector('.chip[data-column="color"]')).toBeNull();
    expect(document.querySelectorAll(".turn").length).toBe(5);
  });

  it("reload reproduces the identical transcript and panel", async () => {
    const app = await bootApp();
    for (const utterance of SCRIPT) {
      await app.send(utterance);
    }
    const transcriptHtml = document.getElementById("transcript-host")!.innerHTML;
    const panelHtml = document.getElementById("panel-host")!.innerHTML;

    await bootApp(); // fresh page against the same service state
    expect(document.getElementById("transcript-host")!.innerHTML).toBe(transcriptHtml);
    expect(document.getElementById("panel-host")!.innerHTML).toBe(panelHtml);
  });

  it("disables input while a turn is in flight", async () => {
    const app = await bootApp();
    const original = service.fetch;
    let release!: () => void;
    globalThis.fetch = ((input: RequestInfo | URL, init?: RequestInit) =>
      new Promise<Response>((resolve) => {
        release = () => resolve(original(input, init));
      })) as typeof fetch;
    const pending = app.send(SCRIPT[0]);
    const inputEl = document.getElementById("utterance-input") as HTMLInputElement;
    expect(inputEl.disabled).toBe(true);
    globalThis.fetch = service.fetch as typeof fetch;
    release();
    await pending;
    expect(inputEl.disabled).toBe(false);
  });

  it("shows the connection banner and disables input when the service is down", async () => {
    service.offline = true;
    await bootApp();
    const banner = document.getElementById("connection-banner")!;
    expect(banner.classList.contains("hidden")).toBe(false);
    const input = document.getElementById("utterance-input") as HTMLInputElement;
    expect(input.disabled).toBe(true);
  });

  it("recovers with a banner when the service drops mid-session", async () => {
    const app = await bootApp();
    await app.send(SCRIPT[0]);
    service.offline = true;
    await app.send(SCRIPT[1]);
    expect(
      document.getElementById("connection-banner")!.classList.contains("hidden"),
    ).toBe(false);
    // The transcript keeps the last known good state.
    expect(document.querySelectorAll(".turn").length).toBe(1);
  });

  it("override dropdown sends a steering utterance", async () => {
    await bootApp();
    const select = document.getElementById("table-override") as HTMLSelectElement;
    select.value = "backpacks";
    select.dispatchEvent(new Event("change"));
    await new Promise((resolve) => setTimeout(resolve, 0));
    expect(service.postedUtterances).toEqual(["switch to backpacks"]);
  });
});
