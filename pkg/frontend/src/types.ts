// Wire types of the turnover risk service. The UI performs no risk
// arithmetic of its own: every displayed number comes from these fields.

export interface MatchTestDoc {
  feature: string;
  op: "eq" | "in" | "range";
  value?: string | number | null;
  values?: string[];
  lo?: number | null;
  hi?: number | null;
}

export interface AssignDoc {
  feature: string;
  value: string | number;
}

export interface RewriteDoc {
  match: MatchTestDoc[];
  assign: AssignDoc[];
}

export interface PolicyDoc {
  name: string;
  description?: string;
  rewrites: RewriteDoc[];
  hold_match?: MatchTestDoc[] | null;
}

export interface ValidationIssue {
  field: string;
  message: string;
}

export interface ValidationResponse {
  valid: boolean;
  errors: ValidationIssue[];
}

export interface ErrorResponse {
  code: string;
  message: string;
  errors: ValidationIssue[];
}

export interface FeatureDoc {
  name: string;
  kind: string;
  levels: string[];
  actionable: boolean;
}

export interface LevelCount {
  level: string;
  count: number;
}

export interface FeatureDistribution {
  feature: string;
  counts: LevelCount[];
}

export interface HistogramBin {
  lo: number;
  hi: number;
  count: number;
}

export interface PopulationSummary {
  population: number;
  baseline_leaver_share: number;
  threshold: number;
  features: FeatureDoc[];
  distributions: FeatureDistribution[];
  risk_histogram: HistogramBin[];
}

export interface ModelInfo {
  family: string;
  threshold: number;
  selected_features: string[];
  schema_fingerprint: string;
  converged: boolean;
  metrics: Record<string, unknown>;
}

export interface MassResponse {
  policy: string;
  description: string;
  baseline_leaver_share: number;
  post_leaver_share: number;
  rows_touched: number;
  threshold: number;
  population: number;
  hold_leaver_share: number | null;
}

export interface ProgramShare {
  program: string;
  population_share: number;
  leaver_share: number;
  count: number;
}

export interface Assignment {
  id: string;
  program: string | null;
}

export interface TargetedResponse {
  baseline_leaver_share: number;
  residual_leaver_share: number;
  threshold: number;
  population: number;
  flagged: number;
  shares: ProgramShare[];
  assignments: Assignment[];
}

export interface ProgramRisk {
  program: string;
  probability: number;
  flips: boolean;
}

export interface EmployeeRisk {
  id: string;
  baseline_probability: number;
  flagged: boolean;
  threshold: number;
  programs: ProgramRisk[];
  assigned: string | null;
}
