// Hand-rolled fake of the ApiClient surface for session tests: every call
// returns a manually controllable promise so ordering and races are scripted.

import {
  FeedbackResponse,
  FunctionInfo,
  PredictResponse,
} from "../src/api.js";

export function samplePrediction(
  functionId = "sub-000001",
  distance = 0.12,
): PredictResponse {
  return {
    function_id: functionId,
    vector_version: "v1",
    predictions: [
      { label: "CWE119", p_vanilla: 0.41, p_composite: 0.52, p_fused: 0.4871 },
      { label: "CWE476", p_vanilla: 0.1, p_composite: 0.2, p_fused: 0.1533 },
    ],
    neighbors: [
      {
        id: "mod1.c:sum_loop:1",
        name: "sum_loop",
        distance,
        bug_ids: ["BUG-001"],
        fix_id: "FIX-002",
      },
      { id: "mod2.c:max_one:0", name: "max_one", distance: 0.31, bug_ids: [] },
    ],
    suggested_fix: { neighbor_id: "mod1.c:sum_loop:1", fix_id: "FIX-002" },
    bug_count_estimate: 1.25,
  };
}

type Deferred<T> = {
  promise: Promise<T>;
  resolve: (value: T) => void;
  reject: (error: unknown) => void;
};

function deferred<T>(): Deferred<T> {
  let resolve!: (value: T) => void;
  let reject!: (error: unknown) => void;
  const promise = new Promise<T>((res, rej) => {
    resolve = res;
    reject = rej;
  });
  return { promise, resolve, reject };
}

export class FakeClient {
  predictCalls: string[] = [];
  feedbackCalls: Array<{ sourceFn: string; targetFn: string; polarity: string }> = [];
  pendingPredicts: Deferred<PredictResponse>[] = [];
  pendingFeedbacks: Deferred<FeedbackResponse>[] = [];
  functionInfo: FunctionInfo = {
    id: "sub-000001",
    module_id: "<submitted>",
    name_tokens: ["probe"],
    source_sha: "0".repeat(64),
    vector: [0, 0],
    model_version: "v1",
    votes: { given: 0, received: 0 },
  };

  predict(source: string): Promise<PredictResponse> {
    this.predictCalls.push(source);
    const d = deferred<PredictResponse>();
    this.pendingPredicts.push(d);
    return d.promise;
  }

  feedback(
    sourceFn: string,
    targetFn: string,
    polarity: "+" | "-",
  ): Promise<FeedbackResponse> {
    this.feedbackCalls.push({ sourceFn, targetFn, polarity });
    const d = deferred<FeedbackResponse>();
    this.pendingFeedbacks.push(d);
    return d.promise;
  }

  getFunction(): Promise<FunctionInfo> {
    return Promise.resolve(this.functionInfo);
  }
}
