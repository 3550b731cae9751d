// Typed client for the hub HTTP API. Every request the portal makes goes
// through here, and only documented endpoints appear below.

export interface OverviewStats {
  searchable_studies: number;
  connected_repositories: number;
  registered_studies: number;
  studies_with_slmd: number;
  studies_with_vlmd: number;
  available_datasets: number;
}

export interface StudyCard {
  guid: string;
  title: string | null;
  repository: string | null;
  state: string | null;
  blocks: string[];
}

export interface SearchResponse {
  guids: string[];
  total: number;
  results: StudyCard[];
}

export interface FacetsResponse {
  facets: string[];
  counts: Record<string, Record<string, number>>;
}

export interface StudyRecord {
  guid: string;
  award_number: string;
  state: string;
  owner: string | null;
  nct_id: string | null;
  repository_id: string | null;
}

export interface MetadataDocument {
  guid: string;
  payload: Record<string, unknown>;
  version: number;
  created_at: string;
  updated_at: string;
}

export interface StudyDetail {
  study: StudyRecord;
  document: MetadataDocument;
}

export interface LoginResponse {
  token: string;
  user_id: string;
  expires_at: string;
}

export interface ApiErrorBody {
  error: string;
  message: string;
  violations?: string[];
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public body: ApiErrorBody,
  ) {
    super(`${body.error}: ${body.message}`);
  }
}

export interface SearchQuery {
  text?: string;
  facets?: Record<string, string[]>;
  limit?: number;
  offset?: number;
}

export function buildSearchQuery(query: SearchQuery): string {
  const params = new URLSearchParams();
  if (query.text) params.set("text", query.text);
  for (const [facet, values] of Object.entries(query.facets ?? {})) {
    for (const value of values) params.append(`facet.${facet}`, value);
  }
  if (query.limit !== undefined) params.set("limit", String(query.limit));
  if (query.offset !== undefined) params.set("offset", String(query.offset));
  return params.toString();
}

export class HubApi {
  constructor(private base: string = "") {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    token?: string,
  ): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["Content-Type"] = "application/json";
    if (token) headers["Authorization"] = `Bearer ${token}`;
    const response = await fetch(this.base + path, {
      method,
      headers,
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    const parsed = await response.json().catch(() => null);
    if (!response.ok) {
      const fallback = { error: `HTTP${response.status}`, message: response.statusText };
      throw new ApiError(response.status, (parsed as ApiErrorBody) ?? fallback);
    }
    return parsed as T;
  }

  stats(): Promise<OverviewStats> {
    return this.request("GET", "/stats");
  }

  search(query: SearchQuery): Promise<SearchResponse> {
    const qs = buildSearchQuery(query);
    return this.request("GET", qs ? `/search?${qs}` : "/search");
  }

  facets(selections?: Record<string, string[]>): Promise<FacetsResponse> {
    const qs = buildSearchQuery({ facets: selections });
    return this.request("GET", qs ? `/facets?${qs}` : "/facets");
  }

  study(guid: string): Promise<StudyDetail> {
    return this.request("GET", `/studies/${guid}`);
  }

  login(username: string): Promise<LoginResponse> {
    return this.request("POST", "/mock-idp/login", { username });
  }

  claim(guid: string, claimToken: string, token: string): Promise<StudyRecord> {
    return this.request("POST", `/studies/${guid}/claim`, { claim_token: claimToken }, token);
  }

  issueClaimToken(guid: string, token: string): Promise<{ claim_token: string }> {
    return this.request("POST", `/studies/${guid}/claim-token`, {}, token);
  }

  submitSlmd(guid: string, fields: unknown, token: string): Promise<StudyRecord> {
    return this.request("POST", `/studies/${guid}/slmd`, fields, token);
  }
}
