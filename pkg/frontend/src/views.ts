// Pure view builders: service responses in, display rows and HTML out.
// Everything numeric is formatted through format.ts and nothing is computed
// from other numbers, so rendered values stay traceable to response fields.

import { count, deltaPoints, probability, sharePercent } from "./format.js";
import { canSubmit, issuesByClause, type PolicyDraft } from "./state.js";
import type {
  EmployeeRisk,
  FeatureDoc,
  MassResponse,
  PopulationSummary,
  TargetedResponse,
} from "./types.js";

export function escapeHtml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

// --- scenario dashboard -------------------------------------------------------

export interface ComparisonRow {
  name: string;
  description: string;
  baseline: string;
  post: string;
  delta: string;
  touched: string;
  holdShare: string | null;
}

export interface ScenarioComparison {
  rows: ComparisonRow[];
  baseline: string;
  targeted: TargetedResponse | null;
}

/**
 * Compose independent mass runs (plus one optional targeted run) into one
 * comparison. All rows must share one baseline; mixed baselines mean the
 * results belong to different loaded datasets and cannot be compared.
 */
export function buildComparison(
  mass: MassResponse[],
  targeted: TargetedResponse | null,
): ScenarioComparison {
  if (mass.length === 0) {
    return { rows: [], baseline: "", targeted };
  }
  const baseline = mass[0].baseline_leaver_share;
  for (const m of mass) {
    if (m.baseline_leaver_share !== baseline) {
      throw new Error("mass results disagree on the baseline leaver share");
    }
  }
  return {
    baseline: sharePercent(baseline),
    rows: mass.map((m) => ({
      name: m.policy,
      description: m.description ?? "",
      baseline: sharePercent(m.baseline_leaver_share),
      post: sharePercent(m.post_leaver_share),
      delta: deltaPoints(m.baseline_leaver_share, m.post_leaver_share),
      touched: count(m.rows_touched),
      holdShare: m.hold_leaver_share === null ? null : sharePercent(m.hold_leaver_share),
    })),
    targeted,
  };
}

export function renderComparisonTable(c: ScenarioComparison): string {
  const head =
    "<tr><th>program</th><th>% of leavers</th><th>delta</th><th>rows touched</th></tr>";
  const baselineRow = c.rows.length
    ? `<tr class="baseline"><td>None (no retention policy)</td>` +
      `<td class="num">${c.baseline}</td><td class="num">+0.0 pp</td><td class="num">0</td></tr>`
    : "";
  const rows = c.rows
    .map(
      (r) =>
        `<tr><td title="${escapeHtml(r.description)}">${escapeHtml(r.name)}</td>` +
        `<td class="num">${r.post}${r.holdShare ? ` <span class="hold">(hard hold ${r.holdShare})</span>` : ""}</td>` +
        `<td class="num">${r.delta}</td><td class="num">${r.touched}</td></tr>`,
    )
    .join("");
  return `<table class="comparison">${head}${baselineRow}${rows}</table>`;
}

export function renderBarChart(c: ScenarioComparison): string {
  if (c.rows.length === 0) {
    return "<svg class='chart' viewBox='0 0 320 120'></svg>";
  }
  const values = c.rows.map((r) => parseFloat(r.post));
  const base = parseFloat(c.baseline);
  const max = Math.max(base, ...values, 1);
  const barWidth = 280 / (c.rows.length + 1);
  let x = 20;
  let bars = bar(x, base, max, "baseline", "None");
  for (const r of c.rows) {
    x += barWidth;
    bars += bar(x, parseFloat(r.post), max, "policy", r.name);
  }
  return `<svg class="chart" viewBox="0 0 320 130" role="img">${bars}</svg>`;

  function bar(px: number, value: number, top: number, cls: string, label: string): string {
    const h = Math.round((90 * value) / top);
    return (
      `<rect class="${cls}" x="${px}" y="${100 - h}" width="${Math.max(barWidth - 6, 4)}" height="${h}"></rect>` +
      `<text x="${px}" y="112" class="label">${escapeHtml(label)}</text>` +
      `<text x="${px}" y="${96 - h}" class="value">${value.toFixed(1)}%</text>`
    );
  }
}

export function renderTargetedSummary(t: TargetedResponse): string {
  const head =
    "<tr><th>action</th><th>% of population</th><th>% of flagged leavers</th><th>count</th></tr>";
  const rows = t.shares
    .map(
      (s) =>
        `<tr><td>${escapeHtml(s.program)}</td>` +
        `<td class="num">${sharePercent(s.population_share)}</td>` +
        `<td class="num">${sharePercent(s.leaver_share)}</td>` +
        `<td class="num">${count(s.count)}</td></tr>`,
    )
    .join("");
  return (
    `<p>flagged at baseline: <b>${sharePercent(t.baseline_leaver_share)}</b> ` +
    `(${count(t.flagged)} of ${count(t.population)}); ` +
    `residual after targeted actions: <b>${sharePercent(t.residual_leaver_share)}</b></p>` +
    `<table class="targeted">${head}${rows}</table>`
  );
}

// --- employee drilldown ---------------------------------------------------------

export interface DrilldownRow {
  program: string;
  probability: string;
  flips: boolean;
  assigned: boolean;
}

export interface DrilldownView {
  id: string;
  baseline: string;
  flagged: boolean;
  headline: string;
  rows: DrilldownRow[];
}

export function buildDrilldown(risk: EmployeeRisk): DrilldownView {
  let headline: string;
  if (!risk.flagged) {
    headline = "not flagged at baseline; no action recommended";
  } else if (risk.assigned) {
    headline = `assigned ${risk.assigned} (lowest risk among flipping programs)`;
  } else {
    headline = "assigned None: no program brings this risk below the threshold";
  }
  return {
    id: risk.id,
    baseline: probability(risk.baseline_probability),
    flagged: risk.flagged,
    headline,
    rows: risk.programs.map((p) => ({
      program: p.program,
      probability: probability(p.probability),
      flips: p.flips,
      assigned: risk.assigned === p.program,
    })),
  };
}

export function renderDrilldown(view: DrilldownView): string {
  const rows = view.rows
    .map(
      (r) =>
        `<tr class="${r.assigned ? "assigned" : ""}">` +
        `<td>${escapeHtml(r.program)}</td><td class="num">${r.probability}</td>` +
        `<td>${r.flips ? "flips" : ""}</td>` +
        `<td>${r.assigned ? "&#10004; assigned" : ""}</td></tr>`,
    )
    .join("");
  return (
    `<h3>${escapeHtml(view.id)}</h3>` +
    `<p>baseline risk <b>${view.baseline}</b> &mdash; ` +
    `${view.flagged ? "flagged as a likely leaver" : "not flagged"}</p>` +
    `<p class="headline">${escapeHtml(view.headline)}</p>` +
    `<table class="drilldown"><tr><th>program</th><th>counterfactual risk</th>` +
    `<th></th><th></th></tr>${rows}</table>`
  );
}

export function renderNotFound(id: string): string {
  return `<p class="error">no employee with id &quot;${escapeHtml(id)}&quot;</p>`;
}

// --- policy builder ----------------------------------------------------------------

export interface BuilderOptions {
  assignable: FeatureDoc[];
  matchable: FeatureDoc[];
}

export function builderOptions(summary: PopulationSummary): BuilderOptions {
  return {
    assignable: summary.features.filter((f) => f.actionable && f.levels.length > 0),
    matchable: summary.features.filter((f) => f.levels.length > 0),
  };
}

function levelSelect(
  name: string,
  features: FeatureDoc[],
  feature: string,
  value: string,
): string {
  const featureOptions = features
    .map(
      (f) =>
        `<option value="${escapeHtml(f.name)}"${f.name === feature ? " selected" : ""}>` +
        `${escapeHtml(f.name)}</option>`,
    )
    .join("");
  const chosen = features.find((f) => f.name === feature) ?? features[0];
  const levelOptions = (chosen?.levels ?? [])
    .map(
      (lv) =>
        `<option value="${escapeHtml(lv)}"${lv === value ? " selected" : ""}>` +
        `${escapeHtml(lv)}</option>`,
    )
    .join("");
  return (
    `<select data-role="${name}-feature">${featureOptions}</select>` +
    `<select data-role="${name}-value">${levelOptions}</select>`
  );
}

export function renderDraftEditor(draft: PolicyDraft, options: BuilderOptions): string {
  const byClause = issuesByClause(draft.errors);

  function inlineErrors(key: string): string {
    const issues = byClause.get(key) ?? [];
    return issues
      .map((i) => `<span class="inline-error">${escapeHtml(i.message)}</span>`)
      .join("");
  }

  const rewrites = draft.doc.rewrites
    .map((rw, i) => {
      const matches = rw.match
        .map(
          (t, j) =>
            `<div class="clause" data-rewrite="${i}" data-kind="match" data-clause="${j}">` +
            `when ${levelSelect("match", options.matchable, t.feature, String(t.value ?? ""))}` +
            `<button data-role="remove-match">&times;</button>` +
            `${inlineErrors(`${i}.match.${j}`)}</div>`,
        )
        .join("");
      const assigns = rw.assign
        .map(
          (a, j) =>
            `<div class="clause" data-rewrite="${i}" data-kind="assign" data-clause="${j}">` +
            `set ${levelSelect("assign", options.assignable, a.feature, String(a.value))}` +
            `<button data-role="remove-assign">&times;</button>` +
            `${inlineErrors(`${i}.assign.${j}`)}</div>`,
        )
        .join("");
      return (
        `<fieldset class="rewrite" data-rewrite="${i}"><legend>rewrite ${i + 1}</legend>` +
        `${matches}<button data-role="add-match" data-rewrite="${i}">+ condition</button>` +
        `${assigns}<button data-role="add-assign" data-rewrite="${i}">+ assignment</button>` +
        `</fieldset>`
      );
    })
    .join("");

  const policyIssues = inlineErrors("policy");
  const badge = renderValidationBadge(draft);
  return (
    `<div class="draft">` +
    `<label>name <input data-role="policy-name" value="${escapeHtml(draft.doc.name)}"></label>` +
    `${badge}${policyIssues}${rewrites}` +
    `<button data-role="add-rewrite">+ rewrite</button>` +
    `<button data-role="validate">validate</button>` +
    `<button data-role="submit" ${canSubmit(draft) ? "" : "disabled"}>add to menu</button>` +
    `</div>`
  );
}

export function renderValidationBadge(draft: PolicyDraft): string {
  const text = {
    unknown: "not validated",
    checking: "checking…",
    valid: "valid",
    invalid: "invalid",
  }[draft.verdict];
  return `<span class="badge badge-${draft.verdict}">${text}</span>`;
}

// --- population overview --------------------------------------------------------------

export function renderRiskHistogram(summary: PopulationSummary): string {
  const maxCount = Math.max(...summary.risk_histogram.map((b) => b.count), 1);
  const bars = summary.risk_histogram
    .map((b, i) => {
      const h = Math.round((80 * b.count) / maxCount);
      return (
        `<rect x="${14 + i * 30}" y="${90 - h}" width="24" height="${h}">` +
        `<title>${b.lo.toFixed(1)}-${b.hi.toFixed(1)}: ${b.count}</title></rect>`
      );
    })
    .join("");
  return (
    `<p>${count(summary.population)} employees loaded; ` +
    `baseline leaver share <b>${sharePercent(summary.baseline_leaver_share)}</b> ` +
    `at threshold ${probability(summary.threshold)}</p>` +
    `<svg class="chart" viewBox="0 0 320 100" role="img">${bars}</svg>`
  );
}
