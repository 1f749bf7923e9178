/** Thin typed client for the review API. Every call either resolves with
 * parsed JSON or throws ApiError; status 0 means the server was unreachable. */

import type { Scan, ScanMeta, ScanRecord, Verdict } from './types.js';

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = 'ApiError';
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

const browserFetch: FetchLike = (url, init) => fetch(url, init);

/** URL of one rendered slice; overlay=true asks for composited labels. */
export function sliceUrl(scanId: string, axis: number, index: number, overlay: boolean): string {
  const query = new URLSearchParams({
    axis: String(axis),
    index: String(index),
    overlay: overlay ? 'labels' : 'none',
  });
  return `/api/scans/${encodeURIComponent(scanId)}/slice?${query}`;
}

async function requestJson<T>(fetcher: FetchLike, url: string, init?: RequestInit): Promise<T> {
  let res: Response;
  try {
    res = await fetcher(url, init);
  } catch (err) {
    throw new ApiError(0, `server unreachable: ${String(err)}`);
  }
  if (!res.ok) {
    let detail = `${res.status} ${res.statusText}`;
    try {
      const body: unknown = await res.json();
      if (body && typeof body === 'object' && typeof (body as { detail?: unknown }).detail === 'string') {
        detail = (body as { detail: string }).detail;
      }
    } catch {
      // error body was not JSON; keep the status line
    }
    throw new ApiError(res.status, detail);
  }
  return (await res.json()) as T;
}

export function listScans(fetcher: FetchLike = browserFetch): Promise<Scan[]> {
  return requestJson<Scan[]>(fetcher, '/api/scans');
}

export function scanMeta(scanId: string, fetcher: FetchLike = browserFetch): Promise<ScanMeta> {
  return requestJson<ScanMeta>(fetcher, `/api/scans/${encodeURIComponent(scanId)}/meta`);
}

export function postVerdict(
  scanId: string,
  verdict: Verdict,
  note = '',
  fetcher: FetchLike = browserFetch,
): Promise<ScanRecord> {
  return requestJson<ScanRecord>(fetcher, `/api/scans/${encodeURIComponent(scanId)}/verdict`, {
    method: 'POST',
    headers: { 'content-type': 'application/json' },
    body: JSON.stringify({ verdict, note }),
  });
}
