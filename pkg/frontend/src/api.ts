// Typed client for the prediction service's /v1 JSON endpoints.
// These shapes must match the server's wire format exactly; the panel never
// derives numbers from vectors itself.

export type LabelPrediction = {
  label: string;
  p_vanilla: number;
  p_composite: number;
  p_fused: number;
};

export type NeighborRow = {
  id: string;
  name: string;
  distance: number;
  bug_ids: string[];
  fix_id?: string;
};

export type PredictResponse = {
  function_id: string;
  vector_version: string;
  predictions: LabelPrediction[];
  neighbors: NeighborRow[];
  suggested_fix?: { neighbor_id: string; fix_id: string };
  bug_count_estimate?: number;
};

export type FeedbackResponse = {
  new_vote_count: number;
  moved_distance: number;
};

export type FunctionInfo = {
  id: string;
  module_id: string;
  name_tokens: string[];
  source_sha: string;
  vector: number[];
  model_version: string;
  votes: { given: number; received: number };
};

export class ApiRequestError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    readonly detail: string,
  ) {
    super(`${code}: ${detail}`);
  }
}

async function parseError(response: Response): Promise<never> {
  let code = `http_${response.status}`;
  let detail = response.statusText;
  try {
    const body = (await response.json()) as { error?: string; detail?: string };
    if (body.error) code = body.error;
    if (body.detail) detail = body.detail;
  } catch {
    // non-JSON error body; keep the status fallback
  }
  throw new ApiRequestError(response.status, code, detail);
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private async post<T>(path: string, payload: unknown): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
    if (!response.ok) await parseError(response);
    return (await response.json()) as T;
  }

  async predict(
    source: string,
    moduleId?: string,
    includeAll = false,
  ): Promise<PredictResponse> {
    return this.post<PredictResponse>("/v1/predict", {
      source,
      module_id: moduleId ?? null,
      include_all: includeAll,
    });
  }

  async feedback(
    sourceFn: string,
    targetFn: string,
    polarity: "+" | "-",
  ): Promise<FeedbackResponse> {
    return this.post<FeedbackResponse>("/v1/feedback", {
      source_fn: sourceFn,
      target_fn: targetFn,
      polarity,
    });
  }

  async getFunction(fnId: string): Promise<FunctionInfo> {
    const response = await fetch(`${this.baseUrl}/v1/functions/${fnId}`);
    if (!response.ok) await parseError(response);
    return (await response.json()) as FunctionInfo;
  }
}
