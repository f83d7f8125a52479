/** DOM wiring: binds the controller workflows to one-page dashboard
 *  chrome.  All markup comes from the render module; all data comes
 *  from the controller; this file only moves strings into elements and
 *  events into calls.
 */

import { ApiError, type ThreatgenClient } from "./api.js";
import {
  loadVersion,
  refine,
  uploadDfd,
  type VersionView,
} from "./controller.js";
import {
  renderDiff,
  renderError,
  renderGraph,
  renderHealthGauge,
  renderMetricsPanel,
  renderSessionList,
  renderThreatTable,
  renderTranscript,
} from "./render.js";
import {
  diffView,
  graphViewModel,
  healthGauge,
  metricRows,
  threatRows,
  transcriptPairs,
} from "./viewmodel.js";
import type { SessionRow, TranscriptTurn } from "./types.js";

interface ActiveSession {
  id: string;
  versions: number;
  selected: VersionView | null;
  transcript: TranscriptTurn[];
  busy: boolean;
}

function el<T extends HTMLElement>(root: ParentNode, selector: string): T {
  const found = root.querySelector(selector);
  if (!found) throw new Error(`missing element: ${selector}`);
  return found as T;
}

export class App {
  private sessions: SessionRow[] = [];
  private active: ActiveSession | null = null;

  constructor(
    private readonly client: ThreatgenClient,
    private readonly root: HTMLElement,
  ) {}

  async start(): Promise<void> {
    this.root.innerHTML = this.shell();
    this.bind();
    await this.refreshSessions();
  }

  private shell(): string {
    return `
      <aside class="sidebar">
        <h1>threatgen</h1>
        <form id="create-session">
          <input name="name" placeholder="session name" />
          <button type="submit">New session</button>
        </form>
        <nav id="session-list"></nav>
      </aside>
      <main class="detail">
        <div id="error-box"></div>
        <section class="panel" id="dfd-panel">
          <h2>Data-flow diagram</h2>
          <textarea id="dfd-text" rows="14" spellcheck="false"
            placeholder='system "Example"&#10;external_entity user "User"&#10;process app "App"&#10;flow f1 user -&gt; app : "request"'></textarea>
          <div class="row">
            <button id="upload-dfd" disabled>Upload DFD</button>
            <span id="dfd-status"></span>
          </div>
        </section>
        <section class="panel" id="generate-panel">
          <h2>Generate</h2>
          <div class="row">
            <input id="prompt" placeholder="refinement prompt" />
            <select id="strategy">
              <option value="direct">direct</option>
              <option value="chain-of-thought">chain-of-thought</option>
            </select>
            <select id="backend">
              <option value="offline">offline</option>
              <option value="remote">remote</option>
            </select>
            <label>k <input id="k" type="number" min="0" value="5" /></label>
            <button id="generate" disabled>Generate</button>
          </div>
          <details>
            <summary>Ingest context document</summary>
            <form id="ingest">
              <select name="kind">
                <option>requirements</option>
                <option>design</option>
                <option>sensor-log</option>
                <option>other</option>
              </select>
              <input name="title" placeholder="title" required />
              <textarea name="text" rows="4" placeholder="document text" required></textarea>
              <button type="submit" disabled>Ingest</button>
            </form>
          </details>
        </section>
        <section class="panel" id="version-panel">
          <h2>Model version
            <select id="version-picker"></select>
          </h2>
          <div class="columns">
            <div id="health"></div>
            <div id="metrics"></div>
          </div>
          <h3>System graph</h3>
          <div id="graph"></div>
          <h3>Threats</h3>
          <div id="threats"></div>
          <h3>Compare versions
            <select id="diff-from"></select> →
            <select id="diff-to"></select>
            <button id="run-diff" disabled>Diff</button>
          </h3>
          <div id="diff"></div>
          <h3>Refinement transcript</h3>
          <div id="transcript"></div>
        </section>
      </main>`;
  }

  private bind(): void {
    el<HTMLFormElement>(this.root, "#create-session").addEventListener(
      "submit",
      (event) => {
        event.preventDefault();
        const form = event.currentTarget as HTMLFormElement;
        const name = (new FormData(form).get("name") as string) ?? "";
        void this.guard(async () => {
          await this.client.createSession(name);
          form.reset();
          await this.refreshSessions();
        });
      },
    );

    el<HTMLElement>(this.root, "#session-list").addEventListener(
      "click",
      (event) => {
        const button = (event.target as HTMLElement).closest<HTMLElement>(
          ".open-session",
        );
        const id = button?.dataset["sessionId"];
        if (id) void this.guard(() => this.openSession(id));
      },
    );

    el<HTMLButtonElement>(this.root, "#upload-dfd").addEventListener(
      "click",
      () => {
        const text = el<HTMLTextAreaElement>(this.root, "#dfd-text").value;
        void this.guard(() => this.doUpload(text));
      },
    );

    el<HTMLButtonElement>(this.root, "#generate").addEventListener(
      "click",
      () => void this.guard(() => this.doGenerate()),
    );

    el<HTMLFormElement>(this.root, "#ingest").addEventListener(
      "submit",
      (event) => {
        event.preventDefault();
        const data = new FormData(event.currentTarget as HTMLFormElement);
        void this.guard(async () => {
          if (!this.active) return;
          const outcome = await this.client.ingestDocument(this.active.id, {
            kind: data.get("kind") as string,
            title: data.get("title") as string,
            text: data.get("text") as string,
          });
          this.status(`ingested ${outcome.docId} (${outcome.chunks} chunks)`);
        });
      },
    );

    el<HTMLSelectElement>(this.root, "#version-picker").addEventListener(
      "change",
      (event) => {
        const version = Number((event.currentTarget as HTMLSelectElement).value);
        if (version) void this.guard(() => this.showVersion(version));
      },
    );

    el<HTMLButtonElement>(this.root, "#run-diff").addEventListener(
      "click",
      () => void this.guard(() => this.doDiff()),
    );
  }

  // --- workflows -------------------------------------------------------------

  private async refreshSessions(): Promise<void> {
    this.sessions = await this.client.listSessions();
    el<HTMLElement>(this.root, "#session-list").innerHTML = renderSessionList(
      this.sessions,
      this.active?.id ?? null,
    );
  }

  private async openSession(id: string): Promise<void> {
    const row = this.sessions.find((session) => session.id === id);
    this.active = {
      id,
      versions: row?.versions ?? 0,
      selected: null,
      transcript: await this.client.getTranscript(id),
      busy: false,
    };
    await this.refreshSessions();
    this.renderVersionChoices();
    if (this.active.versions > 0) {
      await this.showVersion(this.active.versions);
    } else {
      this.renderVersion(null);
    }
    this.renderTranscriptPanel();
    this.setControlsEnabled(true);
  }

  private async doUpload(text: string): Promise<void> {
    if (!this.active) return;
    const { result, view } = await uploadDfd(this.client, this.active.id, text);
    this.status(
      `uploaded DFD v${result.dfdVersion}` +
        (result.modelVersion !== undefined
          ? `, generated model v${result.modelVersion}`
          : ""),
    );
    await this.refreshSessions();
    const row = this.sessions.find((session) => session.id === this.active?.id);
    this.active.versions = row?.versions ?? this.active.versions;
    this.renderVersionChoices();
    if (view) {
      this.active.selected = view;
      this.renderVersion(view);
    }
  }

  private async doGenerate(): Promise<void> {
    if (!this.active || this.active.busy) return;
    this.active.busy = true;
    this.setControlsEnabled(false);
    try {
      const prompt = el<HTMLInputElement>(this.root, "#prompt").value;
      const strategy = el<HTMLSelectElement>(this.root, "#strategy")
        .value as "direct" | "chain-of-thought";
      const backend = el<HTMLSelectElement>(this.root, "#backend")
        .value as "offline" | "remote";
      const k = Number(el<HTMLInputElement>(this.root, "#k").value);
      const outcome = await refine(this.client, this.active.id, {
        prompt,
        strategy,
        backend,
        k,
      });
      this.active.versions = Math.max(
        this.active.versions,
        outcome.view.version,
      );
      this.active.selected = outcome.view;
      this.active.transcript = outcome.transcript;
      await this.refreshSessions();
      this.renderVersionChoices();
      this.renderVersion(outcome.view);
      this.renderTranscriptPanel();
    } finally {
      this.active.busy = false;
      this.setControlsEnabled(true);
    }
  }

  private async showVersion(version: number): Promise<void> {
    if (!this.active) return;
    const view = await loadVersion(this.client, this.active.id, version);
    this.active.selected = view;
    this.renderVersion(view);
  }

  private async doDiff(): Promise<void> {
    if (!this.active) return;
    const from = Number(el<HTMLSelectElement>(this.root, "#diff-from").value);
    const to = Number(el<HTMLSelectElement>(this.root, "#diff-to").value);
    const diff = await this.client.getDiff(this.active.id, from, to);
    el<HTMLElement>(this.root, "#diff").innerHTML = renderDiff(diffView(diff));
  }

  // --- rendering -------------------------------------------------------------

  private renderVersionChoices(): void {
    const versions = this.active?.versions ?? 0;
    const options = Array.from(
      { length: versions },
      (_, i) => `<option value="${i + 1}">v${i + 1}</option>`,
    );
    el<HTMLSelectElement>(this.root, "#version-picker").innerHTML = options
      .slice()
      .reverse()
      .join("");
    el<HTMLSelectElement>(this.root, "#diff-from").innerHTML = options.join("");
    el<HTMLSelectElement>(this.root, "#diff-to").innerHTML = options
      .slice()
      .reverse()
      .join("");
    el<HTMLButtonElement>(this.root, "#run-diff").disabled = versions < 2;
  }

  private renderVersion(view: VersionView | null): void {
    const graph = el<HTMLElement>(this.root, "#graph");
    const threats = el<HTMLElement>(this.root, "#threats");
    const health = el<HTMLElement>(this.root, "#health");
    const metrics = el<HTMLElement>(this.root, "#metrics");
    if (!view) {
      health.innerHTML = "";
      metrics.innerHTML = "";
      graph.innerHTML = '<p class="empty">Upload a DFD to begin.</p>';
      threats.innerHTML = "";
      return;
    }
    health.innerHTML = renderHealthGauge(healthGauge(view.qa));
    if (view.model && view.metrics) {
      const dfdText = el<HTMLTextAreaElement>(this.root, "#dfd-text").value;
      graph.innerHTML = renderGraph(graphViewModel(view.model, dfdText));
      threats.innerHTML = renderThreatTable(threatRows(view.model));
      metrics.innerHTML = renderMetricsPanel(
        metricRows(view.metrics),
        view.metrics.notes,
      );
    } else {
      graph.innerHTML = "";
      metrics.innerHTML = "";
      threats.innerHTML =
        '<p class="empty">This version has no parseable document; see the health panel.</p>';
    }
  }

  private renderTranscriptPanel(): void {
    el<HTMLElement>(this.root, "#transcript").innerHTML = renderTranscript(
      transcriptPairs(this.active?.transcript ?? []),
    );
  }

  private setControlsEnabled(enabled: boolean): void {
    const hasSession = this.active !== null && enabled;
    el<HTMLButtonElement>(this.root, "#upload-dfd").disabled = !hasSession;
    el<HTMLButtonElement>(this.root, "#generate").disabled = !hasSession;
    el<HTMLButtonElement>(
      this.root,
      "#ingest button[type=submit]",
    ).disabled = !hasSession;
  }

  private status(message: string): void {
    el<HTMLElement>(this.root, "#dfd-status").textContent = message;
  }

  private showError(code: string, message: string): void {
    el<HTMLElement>(this.root, "#error-box").innerHTML = renderError(
      code,
      message,
    );
  }

  /** Run a workflow, surfacing server errors verbatim in the error box. */
  private async guard(action: () => Promise<void>): Promise<void> {
    el<HTMLElement>(this.root, "#error-box").innerHTML = "";
    try {
      await action();
    } catch (error) {
      if (error instanceof ApiError) {
        this.showError(error.code, error.message);
      } else {
        this.showError("network-error", String(error));
      }
    }
  }
}
