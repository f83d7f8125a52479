/** Static display metadata for threat classifications.
 *
 * Technique and tactic names are fixed reference data mirrored from the
 * server's built-in catalog so threat rows can show human-readable
 * labels without an extra round trip.  Nothing here is computed; if a
 * threat arrives with a technique id missing from this table the UI
 * falls back to showing the raw id.
 */

export interface TechniqueInfo {
  id: string;
  name: string;
  tactics: string[];
}

const TACTIC_NAMES: Record<string, string> = {
  "AML.TA0004": "Initial Access",
  "AML.TA0005": "Execution",
  "AML.TA0006": "Persistence",
  "AML.TA0007": "Defense Evasion",
  "AML.TA0008": "Discovery",
  "AML.TA0010": "Exfiltration",
  "AML.TA0012": "Privilege Escalation",
};

const TECHNIQUES: Record<string, { name: string; tacticIds: string[] }> = {
  "AML.T0051": {
    name: "LLM Prompt Injection",
    tacticIds: ["AML.TA0004", "AML.TA0006", "AML.TA0007", "AML.TA0012"],
  },
  "AML.T0061": {
    name: "LLM Prompt Self-Replication",
    tacticIds: ["AML.TA0006"],
  },
  "AML.T0054": {
    name: "LLM Jailbreak",
    tacticIds: ["AML.TA0007", "AML.TA0012"],
  },
  "AML.T0056": {
    name: "LLM Meta Prompt Extraction",
    tacticIds: ["AML.TA0008", "AML.TA0010"],
  },
  "AML.T0062": {
    name: "Discover LLM Hallucinations",
    tacticIds: ["AML.TA0008"],
  },
  "AML.T0062-PLUGIN": {
    name: "LLM Plugin Compromise",
    tacticIds: ["AML.TA0012", "AML.TA0005"],
  },
  "AML.T0057": {
    name: "LLM Data Leakage",
    tacticIds: ["AML.TA0010"],
  },
};

/** Display info for a technique id; unknown ids degrade to the raw id. */
export function techniqueInfo(id: string): TechniqueInfo {
  const entry = TECHNIQUES[id];
  if (!entry) {
    return { id, name: id, tactics: [] };
  }
  return {
    id,
    name: entry.name,
    tactics: entry.tacticIds.map((t) => TACTIC_NAMES[t] ?? t),
  };
}

export const STRIDE_LETTERS: Record<string, string> = {
  Spoofing: "S",
  Tampering: "T",
  Repudiation: "R",
  InformationDisclosure: "I",
  DenialOfService: "D",
  ElevationOfPrivilege: "E",
};
