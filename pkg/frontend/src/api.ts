// Thin fetch client for the turnover risk service.

import type {
  EmployeeRisk,
  ErrorResponse,
  MassResponse,
  ModelInfo,
  PolicyDoc,
  PopulationSummary,
  TargetedResponse,
  ValidationResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public body: ErrorResponse,
  ) {
    super(body.message);
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(path, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  const body = await resp.json();
  if (!resp.ok) {
    throw new ApiError(resp.status, body as ErrorResponse);
  }
  return body as T;
}

export const api = {
  model: () => request<ModelInfo>("/api/model"),
  populationSummary: () => request<PopulationSummary>("/api/population/summary"),
  policies: () => request<PolicyDoc[]>("/api/policies"),
  validatePolicy: (policy: PolicyDoc) =>
    request<ValidationResponse>("/api/policies/validate", {
      method: "POST",
      body: JSON.stringify(policy),
    }),
  simulateMass: (policy: PolicyDoc) =>
    request<MassResponse>("/api/simulate/mass", {
      method: "POST",
      body: JSON.stringify({ policy }),
    }),
  simulateTargeted: (policies: PolicyDoc[]) =>
    request<TargetedResponse>("/api/simulate/targeted", {
      method: "POST",
      body: JSON.stringify({ policies }),
    }),
  employeeRisk: (id: string) =>
    request<EmployeeRisk>(`/api/employees/${encodeURIComponent(id)}/risk`),
};
