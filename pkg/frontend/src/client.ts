/**
 * Thin client for the session-persistence service.
 *
 * PUT /sessions/{user}/{ticker}/{kind} and GET of the same path; a 404 maps
 * to null (fresh session), schema rejections and transport failures throw so
 * the caller can retry without losing typed form state.
 */

export type SessionKind = "session-export" | "portfolio-state" | "progress-marker";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class SchemaRejectedError extends Error {
  constructor(
    public readonly path: string,
    message: string,
  ) {
    super(`${path}: ${message}`);
  }
}

export class ServiceUnavailableError extends Error {}

export class SessionClient {
  constructor(
    private readonly baseUrl: string,
    private readonly userId: string,
    private readonly ticker: string,
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private url(kind: SessionKind, version?: number): string {
    const suffix = version !== undefined ? `?version=${version}` : "";
    return `${this.baseUrl}/sessions/${encodeURIComponent(this.userId)}/${encodeURIComponent(
      this.ticker,
    )}/${kind}${suffix}`;
  }

  async put(kind: SessionKind, body: unknown): Promise<number> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.url(kind), {
        method: "PUT",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
      });
    } catch (err) {
      throw new ServiceUnavailableError(`put ${kind} failed: ${String(err)}`);
    }
    if (response.status === 400) {
      const detail = (await response.json()) as { path?: string; message?: string };
      throw new SchemaRejectedError(detail.path ?? "$", detail.message ?? "rejected");
    }
    if (!response.ok) {
      throw new ServiceUnavailableError(`put ${kind}: HTTP ${response.status}`);
    }
    const payload = (await response.json()) as { version: number };
    return payload.version;
  }

  async get<T>(kind: SessionKind, version?: number): Promise<{ version: number; body: T } | null> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.url(kind, version));
    } catch (err) {
      throw new ServiceUnavailableError(`get ${kind} failed: ${String(err)}`);
    }
    if (response.status === 404) return null;
    if (!response.ok) {
      throw new ServiceUnavailableError(`get ${kind}: HTTP ${response.status}`);
    }
    return (await response.json()) as { version: number; body: T };
  }
}
