/** Client-side reading of DFD source text.
 *
 * The generated threat-model document carries components and dataflows
 * but not trust boundaries, which stay in the DFD text.  This module
 * extracts just enough of the text — boundary declarations — to draw
 * boundary containers, without re-implementing the server's parser or
 * its validation.  Lines that do not look like boundary declarations
 * are ignored; the server remains the authority on what is valid.
 */

export interface BoundaryView {
  id: string;
  name: string;
  members: string[];
}

const SIMPLE_ESCAPES: Record<string, string> = {
  '"': '"',
  "\\": "\\",
  n: "\n",
  t: "\t",
  r: "\r",
};

/** Decode a double-quoted DSL string starting at `start` (the quote).
 *  Returns the decoded value and the index just past the closing quote,
 *  or null when the text is not a well-formed quoted string.
 */
function readQuoted(
  line: string,
  start: number,
): { value: string; end: number } | null {
  if (line[start] !== '"') return null;
  let value = "";
  let i = start + 1;
  while (i < line.length) {
    const c = line[i]!;
    if (c === '"') return { value, end: i + 1 };
    if (c === "\\") {
      const esc = line[i + 1];
      if (esc === undefined) return null;
      if (esc === "u") {
        const hex = line.slice(i + 2, i + 6);
        if (!/^[0-9a-fA-F]{4}$/.test(hex)) return null;
        value += String.fromCharCode(parseInt(hex, 16));
        i += 6;
        continue;
      }
      const mapped = SIMPLE_ESCAPES[esc];
      if (mapped === undefined) return null;
      value += mapped;
      i += 2;
      continue;
    }
    value += c;
    i += 1;
  }
  return null;
}

const BOUNDARY_HEAD = /^boundary\s+(\S+)\s+/;
const CONTAINS = /^\s*contains\[([^\]]*)\]\s*$/;

/** All boundary declarations in the DFD text, in declaration order. */
export function parseBoundaries(text: string): BoundaryView[] {
  const boundaries: BoundaryView[] = [];
  for (const rawLine of text.split("\n")) {
    const line = rawLine.trim();
    if (!line.startsWith("boundary")) continue;
    const head = BOUNDARY_HEAD.exec(line);
    if (!head) continue;
    const id = head[1]!;
    const quoted = readQuoted(line, head[0].length);
    if (!quoted) continue;
    const tail = CONTAINS.exec(line.slice(quoted.end));
    if (!tail) continue;
    const members = tail[1]!
      .split(",")
      .map((m) => m.trim())
      .filter((m) => m.length > 0);
    boundaries.push({ id, name: quoted.value, members });
  }
  return boundaries;
}

/** Map element id -> boundary id for quick node styling. */
export function boundaryOwners(
  boundaries: BoundaryView[],
): Map<string, string> {
  const owners = new Map<string, string>();
  for (const boundary of boundaries) {
    for (const member of boundary.members) {
      owners.set(member, boundary.id);
    }
  }
  return owners;
}
