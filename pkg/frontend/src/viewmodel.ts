/** Pure view-models: API payloads in, display structures out.
 *
 * These functions contain every piece of presentation logic that has a
 * testable shape — graph construction, threat-table rows, gauge
 * fractions, diff grouping — and no DOM access, so the test suite can
 * hold them to the display-fidelity contract: counts and numbers equal
 * the API payload, nothing invented, nothing dropped.
 */

import { boundaryOwners, parseBoundaries } from "./dfd-text.js";
import { techniqueInfo, type TechniqueInfo } from "./catalog.js";
import type {
  ComponentKind,
  MetricsReport,
  OtmDocument,
  QaReport,
  StrideCategory,
  TranscriptTurn,
  VersionDiff,
} from "./types.js";

// --- graph -------------------------------------------------------------------

export interface GraphNode {
  id: string;
  label: string;
  kind: ComponentKind;
  isLlm: boolean;
  tags: string[];
  boundaryId: string | null;
}

export interface GraphEdge {
  id: string;
  source: string;
  target: string;
}

export interface BoundaryContainer {
  id: string;
  name: string;
  memberIds: string[];
}

export interface GraphViewModel {
  nodes: GraphNode[];
  edges: GraphEdge[];
  containers: BoundaryContainer[];
}

/** Nodes and edges come from the generated document; boundary
 *  containers come from the DFD text, which is their only carrier.
 */
export function graphViewModel(
  document: OtmDocument,
  dfdText: string,
): GraphViewModel {
  const boundaries = parseBoundaries(dfdText);
  const owners = boundaryOwners(boundaries);
  const nodes = document.components.map((component) => ({
    id: component.id,
    label: component.name,
    kind: component.kind,
    isLlm: component.tags.includes("llm"),
    tags: component.tags,
    boundaryId: owners.get(component.id) ?? null,
  }));
  const known = new Set(nodes.map((n) => n.id));
  const edges = document.dataflows.map((flow) => ({
    id: flow.id,
    source: flow.source,
    target: flow.target,
  }));
  const containers = boundaries.map((boundary) => ({
    id: boundary.id,
    name: boundary.name,
    memberIds: boundary.members.filter((m) => known.has(m)),
  }));
  return { nodes, edges, containers };
}

// --- threat table ------------------------------------------------------------

export interface ThreatRow {
  id: string;
  name: string;
  description: string;
  subjects: string[];
  stride: StrideCategory[];
  owasp: string | null;
  atlas: TechniqueInfo | null;
  likelihood: number;
  impact: number;
  risk: number;
  mitigationIds: string[];
}

/** One row per threat, in document (id-sorted) order. */
export function threatRows(document: OtmDocument): ThreatRow[] {
  const mitigatedBy = new Map<string, string[]>();
  for (const mitigation of document.mitigations) {
    for (const threatId of mitigation.mitigates) {
      const list = mitigatedBy.get(threatId) ?? [];
      list.push(mitigation.id);
      mitigatedBy.set(threatId, list);
    }
  }
  return document.threats.map((threat) => ({
    id: threat.id,
    name: threat.name,
    description: threat.description,
    subjects: threat.appliesTo,
    stride: threat.strideCategories,
    owasp: threat.owaspLlmId ?? null,
    atlas: threat.atlasTechniqueId
      ? techniqueInfo(threat.atlasTechniqueId)
      : null,
    likelihood: threat.likelihood,
    impact: threat.impact,
    risk: threat.likelihood * threat.impact,
    mitigationIds: mitigatedBy.get(threat.id) ?? [],
  }));
}

// --- health gauge --------------------------------------------------------------

export interface HealthGauge {
  score: number;
  syntacticValid: boolean;
  componentCoverage: number;
  mitigationCoverage: number;
  mrPassed: number;
  mrTotal: number;
  failures: string[];
}

/** Gauge values straight from the QA payload; the only arithmetic is
 *  counting passed relations, never re-deriving the score.
 */
export function healthGauge(qa: QaReport): HealthGauge {
  const failures = qa.mrResults
    .filter((r) => !r.passed)
    .map((r) => `${r.relation}: ${r.instanceDescription}`);
  return {
    score: qa.healthScore,
    syntacticValid: qa.syntacticValid,
    componentCoverage: qa.componentCoverage,
    mitigationCoverage: qa.mitigationCoverage,
    mrPassed: qa.mrResults.length - failures.length,
    mrTotal: qa.mrResults.length,
    failures,
  };
}

// --- metrics panel ---------------------------------------------------------------

export interface MetricRow {
  key: string;
  label: string;
  /** Rendered value: fractions to six places, counts verbatim. */
  value: string;
}

const METRIC_LABELS: ReadonlyArray<[keyof MetricsReport & string, string]> = [
  ["threatCoverage", "Threat coverage"],
  ["assetCoverage", "Asset coverage"],
  ["atlasCoverage", "Technique coverage"],
  ["modelComplexity", "Model complexity"],
  ["totalRisk", "Total risk"],
  ["residualRisk", "Residual risk"],
  ["mitigationEffectiveness", "Mitigation effectiveness"],
  ["attackSuccessProbability", "Attack success probability"],
  ["exposureLevel", "Exposure level"],
  ["impactSeverity", "Impact severity"],
  ["accuracy", "Accuracy vs. reference"],
];

export function metricRows(metrics: MetricsReport): MetricRow[] {
  const rows: MetricRow[] = [];
  for (const [key, label] of METRIC_LABELS) {
    const value = metrics[key];
    if (value === undefined || Array.isArray(value)) continue;
    const rendered =
      typeof value === "number" && !Number.isInteger(value)
        ? value.toFixed(6)
        : String(value);
    rows.push({ key, label, value: rendered });
  }
  return rows;
}

// --- diff view ------------------------------------------------------------------

export interface DiffSection {
  title: string;
  items: string[];
}

export interface DiffView {
  empty: boolean;
  sections: DiffSection[];
}

export function diffView(diff: VersionDiff): DiffView {
  const sections: DiffSection[] = [];
  if (diff.addedThreats.length) {
    sections.push({ title: "Added threats", items: diff.addedThreats });
  }
  if (diff.removedThreats.length) {
    sections.push({ title: "Removed threats", items: diff.removedThreats });
  }
  if (diff.changedThreats.length) {
    sections.push({
      title: "Changed threats",
      items: diff.changedThreats.map(
        (change) =>
          `${change.id}: ${change.fields
            .map((f) => `${f.field} ${JSON.stringify(f.old)} -> ${JSON.stringify(f.new)}`)
            .join(", ")}`,
      ),
    });
  }
  if (diff.addedMitigations.length) {
    sections.push({
      title: "Added mitigations",
      items: diff.addedMitigations,
    });
  }
  if (diff.removedMitigations.length) {
    sections.push({
      title: "Removed mitigations",
      items: diff.removedMitigations,
    });
  }
  return { empty: sections.length === 0, sections };
}

// --- transcript -------------------------------------------------------------------

export interface TranscriptPair {
  stakeholder: TranscriptTurn;
  system: TranscriptTurn | null;
}

/** Group turns into stakeholder/system pairs in order; a trailing
 *  stakeholder turn without a reply yet pairs with null.
 */
export function transcriptPairs(turns: TranscriptTurn[]): TranscriptPair[] {
  const pairs: TranscriptPair[] = [];
  for (const turn of turns) {
    const last = pairs[pairs.length - 1];
    if (turn.role === "stakeholder") {
      pairs.push({ stakeholder: turn, system: null });
    } else if (last && last.system === null) {
      last.system = turn;
    } else {
      // A system turn without a visible prompt: show it standalone.
      pairs.push({
        stakeholder: { role: "stakeholder", text: "", timestamp: turn.timestamp },
        system: turn,
      });
    }
  }
  return pairs;
}
