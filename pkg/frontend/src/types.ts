/** Typed mirrors of the session-service HTTP API payloads.
 *
 * The dashboard displays these verbatim — scores and metrics are never
 * recomputed client-side, so every numeric field here is the single
 * source of truth as returned by the server.
 */

export interface SessionRow {
  id: string;
  name: string;
  createdAt: string;
  versions: number;
}

/** `modelVersion` is present only when the service auto-regenerated. */
export interface UploadResult {
  dfdVersion: number;
  modelVersion?: number;
}

export interface IngestResult {
  docId: string;
  chunks: number;
}

export interface GenerateResult {
  modelVersion: number;
}

export type ComponentKind = "external_entity" | "process" | "data_store";

export type StrideCategory =
  | "Spoofing"
  | "Tampering"
  | "Repudiation"
  | "InformationDisclosure"
  | "DenialOfService"
  | "ElevationOfPrivilege";

export interface OtmProject {
  id: string;
  name: string;
}

export interface OtmComponent {
  id: string;
  name: string;
  kind: ComponentKind;
  tags: string[];
}

export interface OtmDataflow {
  id: string;
  source: string;
  target: string;
}

export interface OtmThreat {
  id: string;
  name: string;
  description: string;
  strideCategories: StrideCategory[];
  owaspLlmId?: string;
  atlasTechniqueId?: string;
  likelihood: number;
  impact: number;
  appliesTo: string[];
}

export interface OtmMitigation {
  id: string;
  name: string;
  description: string;
  riskReduction: number;
  mitigates: string[];
}

export interface OtmDocument {
  otmVersion: string;
  project: OtmProject;
  components: OtmComponent[];
  dataflows: OtmDataflow[];
  threats: OtmThreat[];
  mitigations: OtmMitigation[];
}

export type MrRelation = "MR1" | "MR2" | "MR3" | "MR4";

export interface MrResult {
  relation: MrRelation;
  instanceDescription: string;
  passed: boolean;
}

export interface QaReport {
  syntacticValid: boolean;
  mrResults: MrResult[];
  componentCoverage: number;
  mitigationCoverage: number;
  healthScore: number;
}

export interface MetricsReport {
  threatCoverage: number;
  assetCoverage: number;
  atlasCoverage: number;
  modelComplexity: number;
  totalRisk: number;
  residualRisk: number;
  mitigationEffectiveness: number;
  attackSuccessProbability: number;
  exposureLevel: number;
  impactSeverity: number;
  /** Present only when the server compared against a reference document. */
  accuracy?: number;
  notes: string[];
}

export interface FieldChange {
  field: string;
  old: unknown;
  new: unknown;
}

export interface ThreatChange {
  id: string;
  fields: FieldChange[];
}

export interface VersionDiff {
  addedThreats: string[];
  removedThreats: string[];
  changedThreats: ThreatChange[];
  addedMitigations: string[];
  removedMitigations: string[];
}

export interface TranscriptTurn {
  role: "stakeholder" | "system";
  text: string;
  timestamp: string;
}

export interface ApiErrorBody {
  error: {
    code: string;
    message: string;
  };
}
