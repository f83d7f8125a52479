/** Session workflows as plain async functions over the API client.
 *
 * The DOM layer calls these and re-renders from the returned snapshots;
 * tests call them against a stubbed transport.  Keeping every workflow
 * here — not in event handlers — is what makes the display-fidelity
 * contract checkable: one function produces exactly the state one
 * screen shows.
 */

import { ApiError, type GenerateRequest, type ThreatgenClient } from "./api.js";
import type {
  MetricsReport,
  OtmDocument,
  QaReport,
  TranscriptTurn,
  UploadResult,
} from "./types.js";

/** Everything the version-detail screen shows for one model version.
 *  `model` and `metrics` are null for degraded versions (the remote
 *  backend replied, but not with a parseable document).
 */
export interface VersionView {
  version: number;
  model: OtmDocument | null;
  qa: QaReport;
  metrics: MetricsReport | null;
}

export async function loadVersion(
  client: ThreatgenClient,
  sessionId: string,
  version: number,
): Promise<VersionView> {
  const qa = await client.getQa(sessionId, version);
  let model: OtmDocument | null = null;
  let metrics: MetricsReport | null = null;
  try {
    model = await client.getModel(sessionId, version);
    metrics = await client.getMetrics(sessionId, version);
  } catch (error) {
    if (!(error instanceof ApiError) || error.code !== "model-document-absent") {
      throw error;
    }
  }
  return { version, model, qa, metrics };
}

export interface UploadOutcome {
  result: UploadResult;
  /** Present when the service auto-regenerated on upload. */
  view: VersionView | null;
}

export async function uploadDfd(
  client: ThreatgenClient,
  sessionId: string,
  text: string,
): Promise<UploadOutcome> {
  const result = await client.uploadDfd(sessionId, text);
  const view =
    result.modelVersion !== undefined
      ? await loadVersion(client, sessionId, result.modelVersion)
      : null;
  return { result, view };
}

export interface RefineOutcome {
  view: VersionView;
  transcript: TranscriptTurn[];
}

/** The stakeholder feedback loop: send a prompt, load the resulting
 *  version, and pull the updated transcript in one step.
 */
export async function refine(
  client: ThreatgenClient,
  sessionId: string,
  request: GenerateRequest,
): Promise<RefineOutcome> {
  const { modelVersion } = await client.generate(sessionId, request);
  const view = await loadVersion(client, sessionId, modelVersion);
  const transcript = await client.getTranscript(sessionId);
  return { view, transcript };
}
