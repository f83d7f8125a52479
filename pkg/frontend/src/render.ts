/** HTML renderers: view-models in, escaped markup strings out.
 *
 * String-based rendering keeps the whole presentation layer testable in
 * node (no DOM fixture needed) and makes escaping auditable in one
 * place.  Every dynamic value passes through {@link esc}; machine-readable
 * hooks (`data-node-id`, `data-threat-id`, ...) let tests count rendered
 * entities without scraping layout markup.
 */

import { STRIDE_LETTERS } from "./catalog.js";
import type {
  DiffView,
  GraphViewModel,
  HealthGauge,
  MetricRow,
  ThreatRow,
  TranscriptPair,
} from "./viewmodel.js";
import type { SessionRow } from "./types.js";

export function esc(value: string): string {
  return value
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

// --- session list ------------------------------------------------------------

export function renderSessionList(
  sessions: SessionRow[],
  activeId: string | null,
): string {
  if (sessions.length === 0) {
    return '<p class="empty">No sessions yet — create one to begin.</p>';
  }
  const items = sessions
    .map((session) => {
      const active = session.id === activeId ? " active" : "";
      const label = session.name || "(unnamed)";
      return (
        `<li class="session${active}" data-session-id="${esc(session.id)}">` +
        `<button type="button" class="open-session" data-session-id="${esc(session.id)}">` +
        `<span class="name">${esc(label)}</span>` +
        `<span class="meta">${session.versions} version${session.versions === 1 ? "" : "s"}` +
        ` · ${esc(session.createdAt)}</span>` +
        `</button></li>`
      );
    })
    .join("");
  return `<ul class="sessions">${items}</ul>`;
}

// --- DFD graph -----------------------------------------------------------------

function nodeChip(node: GraphViewModel["nodes"][number]): string {
  const classes = ["node", `kind-${node.kind}`];
  if (node.isLlm) classes.push("llm");
  const tags = node.tags.length
    ? `<span class="tags">${node.tags.map(esc).join(", ")}</span>`
    : "";
  return (
    `<span class="${classes.join(" ")}" data-node-id="${esc(node.id)}">` +
    `<span class="label">${esc(node.label)}</span>${tags}</span>`
  );
}

/** Boundary containers wrap their member nodes; the rest render in an
 *  implicit "no boundary" zone.  Edges list as directed source→target
 *  rows so direction survives without a layout engine.
 */
export function renderGraph(graph: GraphViewModel): string {
  const inBoundary = new Set(
    graph.containers.flatMap((container) => container.memberIds),
  );
  const byId = new Map(graph.nodes.map((node) => [node.id, node]));

  const containers = graph.containers
    .map((container) => {
      const members = container.memberIds
        .map((id) => byId.get(id))
        .filter((node) => node !== undefined)
        .map((node) => nodeChip(node))
        .join("");
      return (
        `<fieldset class="boundary" data-boundary-id="${esc(container.id)}">` +
        `<legend>${esc(container.name)}</legend>${members}</fieldset>`
      );
    })
    .join("");

  const free = graph.nodes
    .filter((node) => !inBoundary.has(node.id))
    .map((node) => nodeChip(node))
    .join("");

  const edges = graph.edges
    .map((edge) => {
      const source = byId.get(edge.source);
      const target = byId.get(edge.target);
      return (
        `<li class="edge" data-edge-id="${esc(edge.id)}">` +
        `<span class="endpoint">${esc(source?.label ?? edge.source)}</span>` +
        ` <span class="arrow">&rarr;</span> ` +
        `<span class="endpoint">${esc(target?.label ?? edge.target)}</span></li>`
      );
    })
    .join("");

  return (
    `<div class="graph">` +
    `<div class="zones">${containers}<div class="unbounded">${free}</div></div>` +
    `<ul class="edges">${edges}</ul>` +
    `</div>`
  );
}

// --- threat table -----------------------------------------------------------------

function strideBadges(row: ThreatRow): string {
  return row.stride
    .map(
      (category) =>
        `<span class="stride-badge stride-${STRIDE_LETTERS[category] ?? "?"}" ` +
        `title="${esc(category)}">${STRIDE_LETTERS[category] ?? "?"}</span>`,
    )
    .join("");
}

export function renderThreatTable(rows: ThreatRow[]): string {
  if (rows.length === 0) {
    return '<p class="empty">No threats in this document.</p>';
  }
  const body = rows
    .map((row) => {
      const atlas = row.atlas
        ? `<span class="atlas" title="${esc(row.atlas.tactics.join(", "))}">` +
          `${esc(row.atlas.id)} ${esc(row.atlas.name)}</span>`
        : "—";
      const mitigated = row.mitigationIds.length
        ? `<span class="mitigated" title="${esc(row.mitigationIds.join(", "))}">yes</span>`
        : "no";
      return (
        `<tr class="threat" data-threat-id="${esc(row.id)}">` +
        `<td class="name" title="${esc(row.description)}">${esc(row.name)}</td>` +
        `<td class="subjects">${row.subjects.map(esc).join(", ")}</td>` +
        `<td class="stride">${strideBadges(row)}</td>` +
        `<td class="owasp">${row.owasp ? esc(row.owasp) : "—"}</td>` +
        `<td class="atlas">${atlas}</td>` +
        `<td class="risk">${row.likelihood}&times;${row.impact}=${row.risk}</td>` +
        `<td class="mitigated">${mitigated}</td>` +
        `</tr>`
      );
    })
    .join("");
  return (
    `<table class="threats"><thead><tr>` +
    `<th>Threat</th><th>Applies to</th><th>STRIDE</th><th>OWASP</th>` +
    `<th>ATLAS technique (tactics on hover)</th><th>Risk</th><th>Mitigated</th>` +
    `</tr></thead><tbody>${body}</tbody></table>`
  );
}

// --- health gauge -------------------------------------------------------------------

export function renderHealthGauge(gauge: HealthGauge): string {
  const tone =
    gauge.score >= 80 ? "good" : gauge.score >= 50 ? "middling" : "poor";
  const failures = gauge.failures.length
    ? `<ul class="mr-failures">${gauge.failures
        .map((failure) => `<li>${esc(failure)}</li>`)
        .join("")}</ul>`
    : "";
  return (
    `<div class="health ${tone}" data-health-score="${gauge.score}">` +
    `<div class="score">${gauge.score}</div>` +
    `<dl class="parts">` +
    `<dt>Syntactic</dt><dd>${gauge.syntacticValid ? "valid" : "invalid"}</dd>` +
    `<dt>Component coverage</dt><dd>${gauge.componentCoverage.toFixed(6)}</dd>` +
    `<dt>Metamorphic checks</dt><dd>${gauge.mrPassed}/${gauge.mrTotal}</dd>` +
    `<dt>Mitigation coverage</dt><dd>${gauge.mitigationCoverage.toFixed(6)}</dd>` +
    `</dl>${failures}</div>`
  );
}

// --- metrics panel ---------------------------------------------------------------------

export function renderMetricsPanel(rows: MetricRow[], notes: string[]): string {
  const body = rows
    .map(
      (row) =>
        `<tr data-metric="${esc(row.key)}"><th>${esc(row.label)}</th>` +
        `<td>${esc(row.value)}</td></tr>`,
    )
    .join("");
  const renderedNotes = notes
    .map((note) => `<p class="note">${esc(note)}</p>`)
    .join("");
  return `<table class="metrics"><tbody>${body}</tbody></table>${renderedNotes}`;
}

// --- diff -------------------------------------------------------------------------------

export function renderDiff(view: DiffView): string {
  if (view.empty) {
    return '<p class="empty" data-diff-empty="true">No differences between these versions.</p>';
  }
  return view.sections
    .map(
      (section) =>
        `<section class="diff-section"><h4>${esc(section.title)}</h4>` +
        `<ul>${section.items
          .map((item) => `<li>${esc(item)}</li>`)
          .join("")}</ul></section>`,
    )
    .join("");
}

// --- transcript --------------------------------------------------------------------------

export function renderTranscript(pairs: TranscriptPair[]): string {
  if (pairs.length === 0) {
    return '<p class="empty">No refinement prompts yet.</p>';
  }
  const items = pairs
    .map((pair) => {
      const reply = pair.system
        ? `<div class="turn system">${esc(pair.system.text)}</div>`
        : '<div class="turn system pending">…</div>';
      return (
        `<li class="exchange">` +
        `<div class="turn stakeholder">${esc(pair.stakeholder.text)}</div>` +
        reply +
        `</li>`
      );
    })
    .join("");
  return `<ol class="transcript">${items}</ol>`;
}

// --- errors -------------------------------------------------------------------------------

/** Server errors render verbatim: code badge plus untouched message. */
export function renderError(code: string, message: string): string {
  return (
    `<div class="api-error" data-error-code="${esc(code)}">` +
    `<span class="code">${esc(code)}</span>` +
    `<span class="message">${esc(message)}</span></div>`
  );
}
