// Typed client for the scoring service. The fetch function is injectable
// so tests can run against an in-process mock.

export interface QuestionPayload {
  summary: string;
  details?: string | null;
  week: number;
  platform: string;
  product_version: string;
}

export interface TopicInfo {
  id: number;
  keywords: string[];
}

export interface ScoreResponse {
  probability: number;
  percentile: number;
  top_decile: boolean;
  feature_breakdown: Record<string, number>;
  topic: TopicInfo;
  coherency: number;
  bundle_version: string;
}

export interface Suggestion {
  kind: string;
  summary: string;
  details: string | null;
  score: number;
  delta: number;
  description: string;
}

export interface SuggestResponse {
  base_probability: number;
  suggestions: Suggestion[];
  bundle_version: string;
}

export interface UpliftResponse {
  uplift_score: number;
  recommendation: "add_details" | "keep_as_is";
  bundle_version: string;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async post<T>(path: string, body: unknown): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) {
      throw new ApiError(resp.status, `${path} failed with ${resp.status}`);
    }
    return (await resp.json()) as T;
  }

  score(question: QuestionPayload): Promise<ScoreResponse> {
    return this.post<ScoreResponse>("/v1/score", question);
  }

  suggest(question: QuestionPayload, maxN = 5): Promise<SuggestResponse> {
    return this.post<SuggestResponse>("/v1/suggest", { question, max_n: maxN });
  }

  uplift(question: QuestionPayload): Promise<UpliftResponse> {
    return this.post<UpliftResponse>("/v1/uplift", question);
  }

  async health(): Promise<{ bundle_version: string; has_uplift: boolean }> {
    const resp = await this.fetchFn(`${this.baseUrl}/v1/health`);
    if (!resp.ok) {
      throw new ApiError(resp.status, "health check failed");
    }
    return resp.json();
  }
}
