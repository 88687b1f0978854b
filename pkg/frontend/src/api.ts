/**
 * Thin typed client for the identity service HTTP API.
 *
 * Every error response carries a `{"detail": "..."}` body; 401 responses are
 * surfaced as UnauthorizedError so the UI can drop the session and return to
 * the login view regardless of which call failed.
 */

export interface PublicUser {
  user_id: string;
  name: string;
  cpf: string;
  email: string;
  created_at: string;
  chain_tx_hash: string | null;
}

export interface AuditEntry {
  timestamp: string;
  actor: string;
  action: string;
  resource_id: string | null;
  outcome: string;
  chain_tx_hash: string | null;
  detail: string | null;
}

export interface LoginReply {
  access_token: string;
  token_type: string;
  expires_in: number;
}

export interface UserPage {
  users: PublicUser[];
  total: number;
}

export interface AuditPage {
  entries: AuditEntry[];
  total: number;
}

export interface HealthReply {
  store: string;
  chain: string;
}

export class ApiError extends Error {
  constructor(readonly status: number, readonly detail: string) {
    super(detail);
    this.name = "ApiError";
  }
}

export class UnauthorizedError extends ApiError {
  constructor(detail: string) {
    super(401, detail);
    this.name = "UnauthorizedError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  token: string | null = null;

  private readonly fetchFn: FetchLike;

  constructor(
    private readonly baseUrl: string = "",
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) {
      headers["Content-Type"] = "application/json";
    }
    if (this.token !== null) {
      headers["Authorization"] = `Bearer ${this.token}`;
    }
    const response = await this.fetchFn(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const parsed = (await response.json()) as { detail?: string };
        if (typeof parsed.detail === "string") {
          detail = parsed.detail;
        }
      } catch {
        // non-JSON error body; keep the status text
      }
      if (response.status === 401) {
        throw new UnauthorizedError(detail);
      }
      throw new ApiError(response.status, detail);
    }
    if (response.status === 204) {
      return undefined as T;
    }
    return (await response.json()) as T;
  }

  register(input: {
    name: string;
    cpf: string;
    email: string;
    password: string;
  }): Promise<PublicUser> {
    return this.request("POST", "/auth/register", input);
  }

  async login(email: string, password: string): Promise<LoginReply> {
    const reply = await this.request<LoginReply>("POST", "/auth/login", {
      email,
      password,
    });
    this.token = reply.access_token;
    return reply;
  }

  async logout(): Promise<void> {
    try {
      await this.request<void>("POST", "/auth/logout");
    } finally {
      this.token = null;
    }
  }

  listUsers(offset = 0, limit = 100): Promise<UserPage> {
    return this.request("GET", `/users?offset=${offset}&limit=${limit}`);
  }

  getUser(userId: string): Promise<PublicUser> {
    return this.request("GET", `/users/${encodeURIComponent(userId)}`);
  }

  updateUser(userId: string, patch: { name?: string; email?: string }): Promise<PublicUser> {
    return this.request("PUT", `/users/${encodeURIComponent(userId)}`, patch);
  }

  deleteUser(userId: string): Promise<void> {
    return this.request("DELETE", `/users/${encodeURIComponent(userId)}`);
  }

  listAudit(offset = 0, limit = 100): Promise<AuditPage> {
    return this.request("GET", `/audit?offset=${offset}&limit=${limit}`);
  }

  health(): Promise<HealthReply> {
    return this.request("GET", "/health");
  }
}
