// Browser bootstrap: event wiring and in-place panel updates. All rendering
// goes through the pure builders in views.ts; all data comes from api.ts.

import { api, ApiError } from "./api.js";
import {
  applyVerdict,
  canSubmit,
  editDraft,
  LatestWins,
  markChecking,
  newDraft,
  type PolicyDraft,
} from "./state.js";
import type { MassResponse, PolicyDoc, PopulationSummary } from "./types.js";
import {
  buildComparison,
  buildDrilldown,
  builderOptions,
  escapeHtml,
  renderBarChart,
  renderComparisonTable,
  renderDraftEditor,
  renderDrilldown,
  renderNotFound,
  renderRiskHistogram,
  renderTargetedSummary,
  type BuilderOptions,
} from "./views.js";

const el = (id: string) => document.getElementById(id)!;

let summary: PopulationSummary;
let options: BuilderOptions;
let menu: PolicyDoc[] = [];
let draft: PolicyDraft = newDraft({ name: "custom-1", rewrites: [] });
const simulationToken = new LatestWins();
const drilldownToken = new LatestWins();

async function boot() {
  const model = await api.model();
  summary = await api.populationSummary();
  options = builderOptions(summary);
  menu = await api.policies();

  const metrics = model.metrics as { auc?: number };
  el("model-info").innerHTML =
    `<b>${escapeHtml(model.family)}</b> on ${model.selected_features.length} features, ` +
    `threshold ${model.threshold}` +
    (metrics.auc !== undefined ? `, test AUC ${Number(metrics.auc).toFixed(3)}` : "");
  el("population").innerHTML = renderRiskHistogram(summary);
  renderMenu();
  renderBuilder();
  void runSimulations();
}

function renderMenu() {
  el("menu").innerHTML =
    menu
      .map(
        (p, i) =>
          `<li><b>${escapeHtml(p.name)}</b> ${escapeHtml(p.description ?? "")} ` +
          `<button data-load="${i}">edit</button>` +
          `<button data-drop="${i}">remove</button></li>`,
      )
      .join("") || "<li>(empty menu)</li>";
}

function renderBuilder() {
  el("builder").innerHTML = renderDraftEditor(draft, options);
}

function setDraft(next: PolicyDraft) {
  draft = next;
  renderBuilder();
}

function readDraftFromDom(): PolicyDoc {
  const root = el("builder");
  const name =
    (root.querySelector("[data-role=policy-name]") as HTMLInputElement)?.value ||
    draft.doc.name;
  const rewrites = Array.from(root.querySelectorAll("fieldset.rewrite")).map(
    (fs) => ({
      match: Array.from(fs.querySelectorAll("[data-kind=match]")).map((c) => ({
        feature: (c.querySelector("[data-role=match-feature]") as HTMLSelectElement).value,
        op: "eq" as const,
        value: (c.querySelector("[data-role=match-value]") as HTMLSelectElement).value,
      })),
      assign: Array.from(fs.querySelectorAll("[data-kind=assign]")).map((c) => ({
        feature: (c.querySelector("[data-role=assign-feature]") as HTMLSelectElement).value,
        value: (c.querySelector("[data-role=assign-value]") as HTMLSelectElement).value,
      })),
    }),
  );
  return { name, rewrites };
}

async function validateDraft() {
  const doc = readDraftFromDom();
  setDraft(markChecking(editDraft(draft, doc)));
  try {
    await api.validatePolicy(doc);
    setDraft(applyVerdict(draft, doc, true, []));
  } catch (e) {
    if (e instanceof ApiError && e.status === 400) {
      setDraft(applyVerdict(draft, doc, false, e.body.errors ?? []));
    } else {
      throw e;
    }
  }
}

async function runSimulations() {
  const token = simulationToken.next();
  el("dashboard-status").textContent = "running simulations…";
  try {
    const mass: MassResponse[] = [];
    for (const p of menu) {
      mass.push(await api.simulateMass(p));
    }
    const targeted = menu.length ? await api.simulateTargeted(menu) : null;
    if (!simulationToken.isCurrent(token)) {
      return; // a newer run superseded this one
    }
    const comparison = buildComparison(mass, targeted);
    el("comparison").innerHTML = renderComparisonTable(comparison);
    el("chart").innerHTML = renderBarChart(comparison);
    el("targeted").innerHTML = targeted ? renderTargetedSummary(targeted) : "";
    el("dashboard-status").textContent = "";
  } catch (e) {
    if (simulationToken.isCurrent(token)) {
      el("dashboard-status").innerHTML =
        `<span class="error">simulation failed: ${escapeHtml(String(e))}</span> ` +
        `<button id="retry">retry</button>`;
      document.getElementById("retry")?.addEventListener("click", () => void runSimulations());
    }
  }
}

async function lookupEmployee() {
  const id = (el("employee-id") as HTMLInputElement).value.trim();
  if (!id) {
    return;
  }
  const token = drilldownToken.next();
  try {
    const risk = await api.employeeRisk(id);
    if (drilldownToken.isCurrent(token)) {
      el("drilldown").innerHTML = renderDrilldown(buildDrilldown(risk));
    }
  } catch (e) {
    if (!drilldownToken.isCurrent(token)) {
      return;
    }
    if (e instanceof ApiError && e.status === 404) {
      el("drilldown").innerHTML = renderNotFound(id);
    } else {
      el("drilldown").innerHTML = `<p class="error">${escapeHtml(String(e))}</p>`;
    }
  }
}

function wireEvents() {
  el("builder").addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement;
    const role = target.dataset.role;
    if (!role) {
      return;
    }
    ev.preventDefault();
    const doc = readDraftFromDom();
    if (role === "add-rewrite") {
      doc.rewrites.push({ match: [], assign: [] });
    } else if (role === "add-match" || role === "add-assign") {
      const i = Number(target.dataset.rewrite);
      const pool = role === "add-match" ? options.matchable : options.assignable;
      const first = pool[0];
      if (!first) {
        return;
      }
      if (role === "add-match") {
        doc.rewrites[i].match.push({ feature: first.name, op: "eq", value: first.levels[0] });
      } else {
        doc.rewrites[i].assign.push({ feature: first.name, value: first.levels[0] });
      }
    } else if (role === "remove-match" || role === "remove-assign") {
      const clause = target.closest(".clause") as HTMLElement;
      const i = Number(clause.dataset.rewrite);
      const j = Number(clause.dataset.clause);
      if (role === "remove-match") {
        doc.rewrites[i].match.splice(j, 1);
      } else {
        doc.rewrites[i].assign.splice(j, 1);
      }
    } else if (role === "validate") {
      void validateDraft();
      return;
    } else if (role === "submit") {
      if (!canSubmit(draft)) {
        return;
      }
      menu = [...menu, draft.doc];
      setDraft(newDraft({ name: `custom-${menu.length + 1}`, rewrites: [] }));
      renderMenu();
      void runSimulations();
      return;
    } else {
      return;
    }
    setDraft(editDraft(draft, doc));
  });

  el("builder").addEventListener("change", (ev) => {
    const target = ev.target as HTMLElement;
    if (target.matches("select, input")) {
      setDraft(editDraft(draft, readDraftFromDom()));
    }
  });

  el("menu").addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement;
    if (target.dataset.load !== undefined) {
      setDraft(newDraft(structuredClone(menu[Number(target.dataset.load)])));
    } else if (target.dataset.drop !== undefined) {
      menu = menu.filter((_, i) => i !== Number(target.dataset.drop));
      renderMenu();
      void runSimulations();
    }
  });

  el("run").addEventListener("click", () => void runSimulations());
  el("lookup").addEventListener("click", () => void lookupEmployee());
  (el("employee-id") as HTMLInputElement).addEventListener("keydown", (ev) => {
    if (ev.key === "Enter") {
      void lookupEmployee();
    }
  });
}

wireEvents();
void boot();
