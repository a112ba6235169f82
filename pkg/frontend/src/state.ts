// Client-side state helpers: draft lifecycle and stale-response protection.

import type { PolicyDoc, ValidationIssue } from "./types.js";

export type Verdict = "unknown" | "checking" | "valid" | "invalid";

export interface PolicyDraft {
  doc: PolicyDoc;
  verdict: Verdict;
  errors: ValidationIssue[];
}

export function newDraft(doc: PolicyDoc): PolicyDraft {
  return { doc, verdict: "unknown", errors: [] };
}

/** Any content edit invalidates the previous server verdict. */
export function editDraft(draft: PolicyDraft, doc: PolicyDoc): PolicyDraft {
  if (JSON.stringify(doc) === JSON.stringify(draft.doc)) {
    return draft;
  }
  return { doc, verdict: "unknown", errors: [] };
}

export function markChecking(draft: PolicyDraft): PolicyDraft {
  return { ...draft, verdict: "checking" };
}

/**
 * Apply a server verdict, but only if it was issued for the draft's current
 * content; a verdict for an older edit is dropped on the floor.
 */
export function applyVerdict(
  draft: PolicyDraft,
  checkedDoc: PolicyDoc,
  valid: boolean,
  errors: ValidationIssue[],
): PolicyDraft {
  if (JSON.stringify(checkedDoc) !== JSON.stringify(draft.doc)) {
    return draft;
  }
  return { ...draft, verdict: valid ? "valid" : "invalid", errors };
}

/** Submission stays blocked until the server has validated this content. */
export function canSubmit(draft: PolicyDraft): boolean {
  return draft.verdict === "valid";
}

/**
 * Latest-wins request tokens: responses carrying a superseded token are
 * ignored, so concurrent in-flight simulations can never let a stale
 * response overwrite a newer one.
 */
export class LatestWins {
  private token = 0;

  next(): number {
    this.token += 1;
    return this.token;
  }

  isCurrent(token: number): boolean {
    return token === this.token;
  }
}

/** Map server field paths like "rewrites[2].assign[0]" to builder clauses. */
export interface ClauseLocation {
  rewrite: number | null;
  section: "match" | "assign" | "policy";
  clause: number | null;
}

export function locateIssue(field: string): ClauseLocation {
  const m = field.match(/^rewrites\[(\d+)\]\.(match|assign)\[(\d+)\]$/);
  if (m) {
    return {
      rewrite: Number(m[1]),
      section: m[2] as "match" | "assign",
      clause: Number(m[3]),
    };
  }
  return { rewrite: null, section: "policy", clause: null };
}

export function issuesByClause(
  errors: ValidationIssue[],
): Map<string, ValidationIssue[]> {
  const out = new Map<string, ValidationIssue[]>();
  for (const err of errors) {
    const loc = locateIssue(err.field);
    const key =
      loc.section === "policy" ? "policy" : `${loc.rewrite}.${loc.section}.${loc.clause}`;
    const bucket = out.get(key) ?? [];
    bucket.push(err);
    out.set(key, bucket);
  }
  return out;
}
