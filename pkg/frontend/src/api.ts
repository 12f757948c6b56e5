/**
 * Fetch wrapper and the one-in-flight-request gate.
 *
 * Every view change issues a new generation of requests; responses from an
 * older generation are discarded, never rendered, so a slow early answer can
 * not overwrite a fast later one.
 */

import type { ApiErrorBody } from "./types.js";

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly field: string | undefined;

  constructor(status: number, code: string, message: string, field?: string) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.code = code;
    this.field = field;
  }
}

export type FetchLike = (url: string) => Promise<{
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}>;

/** GET a JSON endpoint; non-2xx bodies become ApiError with the server's code. */
export async function getJson<T>(url: string, fetchFn: FetchLike): Promise<T> {
  let response;
  try {
    response = await fetchFn(url);
  } catch (exc) {
    throw new ApiError(0, "network_error", String(exc));
  }
  if (!response.ok) {
    let body: Partial<ApiErrorBody> = {};
    try {
      body = (await response.json()) as Partial<ApiErrorBody>;
    } catch {
      // non-JSON error body: fall through to the status-only message
    }
    throw new ApiError(
      response.status,
      body.code ?? "http_error",
      body.message ?? `request failed with status ${response.status}`,
      body.field,
    );
  }
  return (await response.json()) as T;
}

/**
 * Serializes view refreshes: `run` resolves with the work's result only if no
 * newer run started while it was in flight, and with null (stale) otherwise.
 * Errors from stale runs are swallowed; errors from the current run rethrow.
 */
export class RequestGate {
  private seq = 0;

  next(): number {
    this.seq += 1;
    return this.seq;
  }

  isCurrent(token: number): boolean {
    return token === this.seq;
  }

  async run<T>(work: () => Promise<T>): Promise<T | null> {
    const token = this.next();
    try {
      const result = await work();
      return this.isCurrent(token) ? result : null;
    } catch (exc) {
      if (this.isCurrent(token)) {
        throw exc;
      }
      return null;
    }
  }
}
