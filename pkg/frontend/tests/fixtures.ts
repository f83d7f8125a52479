/** Loaders for the frozen API payload fixtures exported by the primary
 *  package (`python3 scripts/export_ui_fixtures.py`).
 */

import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import type {
  MetricsReport,
  OtmDocument,
  QaReport,
} from "../src/types.js";

function read(name: string): string {
  return readFileSync(
    fileURLToPath(new URL(`./fixtures/${name}`, import.meta.url)),
    "utf-8",
  );
}

export const chatbotDfd: string = read("chatbot.dfd");
export const chatbotModel: OtmDocument = JSON.parse(read("model.json"));
export const chatbotQa: QaReport = JSON.parse(read("qa.json"));
export const chatbotMetrics: MetricsReport = JSON.parse(read("metrics.json"));
export const expectedCounts: {
  elements: number;
  flows: number;
  boundaries: number;
  threats: number;
  mitigations: number;
  healthScore: number;
} = JSON.parse(read("expected_counts.json"));
