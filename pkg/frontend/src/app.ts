// Application shell: transcript, dialog-state panel, routing badge, input.
//
// The UI is a pure function of service responses: after every turn it
// refetches GET /sessions/{id} and re-renders from that document alone, so
// a page reload reproduces the identical transcript and panel.

import { ApiClient } from "./api.js";
import { renderStatePanel } from "./statePanel.js";
import { renderTranscript } from "./transcript.js";
import type { SessionDoc, TableInfo } from "./types.js";

export class ChatApp {
  private readonly api: ApiClient;
  private sessionId: string | null = null;
  private session: SessionDoc | null = null;
  private tables: TableInfo[] = [];
  private busy = false;
  private connected = true;

  private root!: HTMLElement;
  private banner!: HTMLElement;
  private routingBadge!: HTMLElement;
  private overrideSelect!: HTMLSelectElement;
  private transcriptHost!: HTMLElement;
  private panelHost!: HTMLElement;
  private input!: HTMLInputElement;
  private sendButton!: HTMLButtonElement;

  constructor(api?: ApiClient) {
    this.api = api ?? new ApiClient();
  }

  async init(root: HTMLElement): Promise<void> {
    this.root = root;
    this.buildSkeleton();
    try {
      this.tables = await this.api.listTables();
      this.sessionId = await this.api.createSession();
      this.session = await this.api.getSession(this.sessionId);
      this.setConnected(true);
    } catch {
      this.setConnected(false);
    }
    this.fillOverrideOptions();
    this.render();
  }

  private buildSkeleton(): void {
    this.root.innerHTML = "";

    this.banner = document.createElement("div");
    this.banner.id = "connection-banner";
    this.banner.className = "banner hidden";
    this.banner.textContent = "Service unreachable. Reconnect and reload.";
    this.root.appendChild(this.banner);

    const header = document.createElement("header");
    header.className = "header";
    const title = document.createElement("h1");
    title.textContent = "Product discovery";
    header.appendChild(title);

    this.routingBadge = document.createElement("span");
    this.routingBadge.id = "routing-badge";
    this.routingBadge.className = "routing-badge";
    header.appendChild(this.routingBadge);

    this.overrideSelect = document.createElement("select");
    this.overrideSelect.id = "table-override";
    this.overrideSelect.title = "Steer the conversation to a table";
    this.overrideSelect.addEventListener("change", () => {
      const tableId = this.overrideSelect.value;
      if (tableId) {
        // The router is lexical; naming the table steers it there.
        void this.send(`switch to ${tableId}`);
      }
    });
    header.appendChild(this.overrideSelect);
    this.root.appendChild(header);

    const main = document.createElement("main");
    main.className = "layout";
    this.transcriptHost = document.createElement("section");
    this.transcriptHost.id = "transcript-host";
    main.appendChild(this.transcriptHost);
    this.panelHost = document.createElement("aside");
    this.panelHost.id = "panel-host";
    main.appendChild(this.panelHost);
    this.root.appendChild(main);

    const form = document.createElement("form");
    form.id = "utterance-form";
    form.className = "utterance-form";
    this.input = document.createElement("input");
    this.input.id = "utterance-input";
    this.input.type = "text";
    this.input.placeholder = "e.g. a non-black 15-liter backpack under $400";
    form.appendChild(this.input);
    this.sendButton = document.createElement("button");
    this.sendButton.id = "send-button";
    this.sendButton.type = "submit";
    this.sendButton.textContent = "Send";
    form.appendChild(this.sendButton);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const utterance = this.input.value.trim();
      if (utterance) {
        void this.send(utterance);
      }
    });
    this.root.appendChild(form);
  }

  private fillOverrideOptions(): void {
    this.overrideSelect.innerHTML = "";
    const placeholder = document.createElement("option");
    placeholder.value = "";
    placeholder.textContent = "route automatically";
    this.overrideSelect.appendChild(placeholder);
    for (const table of this.tables) {
      const option = document.createElement("option");
      option.value = table.table_id;
      option.textContent = `${table.table_id} (${table.rows} rows)`;
      this.overrideSelect.appendChild(option);
    }
  }

  private setConnected(connected: boolean): void {
    this.connected = connected;
    this.banner.classList.toggle("hidden", connected);
    this.updateInputState();
  }

  private updateInputState(): void {
    const disabled = !this.connected || this.busy || this.sessionId === null;
    this.input.disabled = disabled;
    this.sendButton.disabled = disabled;
    this.overrideSelect.disabled = disabled;
  }

  async send(utterance: string): Promise<void> {
    if (this.busy || !this.sessionId) return;
    this.busy = true;
    this.updateInputState();
    try {
      await this.api.postTurn(this.sessionId, utterance);
      // Canonical state comes from the service, never from local bookkeeping.
      this.session = await this.api.getSession(this.sessionId);
      this.setConnected(true);
      this.input.value = "";
    } catch (error) {
      if (error instanceof TypeError) {
        this.setConnected(false);
      }
      // Service-level errors (4xx) leave the transcript as-is; the last
      // agent response already asks the user to rephrase.
    } finally {
      this.busy = false;
      this.updateInputState();
      this.render();
    }
  }

  removeConstraint(column: string): void {
    void this.send(`any ${column.replace(/_/g, " ")}`);
  }

  private render(): void {
    const session = this.session ?? {
      session_id: "",
      dialog_state: { active_table: "", constraints: {} },
      routing_history: [],
      turns: [],
    };
    this.transcriptHost.innerHTML = "";
    this.transcriptHost.appendChild(renderTranscript(session));
    this.panelHost.innerHTML = "";
    this.panelHost.appendChild(
      renderStatePanel(session.dialog_state, (column) => this.removeConstraint(column)),
    );
    const routed =
      session.routing_history.length > 0
        ? session.routing_history[session.routing_history.length - 1]
        : "unrouted";
    this.routingBadge.textContent = `table: ${routed}`;
    this.routingBadge.setAttribute("data-table", routed);
  }
}

export async function bootstrap(): Promise<ChatApp> {
  const root = document.getElementById("app");
  if (!root) {
    throw new Error("missing #app mount point");
  }
  // Same-origin by default; set window.DIR_SERVICE_URL when the service
  // runs on another port (CORS is enabled server-side).
  const baseUrl = (window as { DIR_SERVICE_URL?: string }).DIR_SERVICE_URL ?? "";
  const app = new ChatApp(new ApiClient(baseUrl));
  await app.init(root);
  return app;
}
