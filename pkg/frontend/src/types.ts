/** Wire types mirroring the review API's JSON payloads. */

export type ScanStatus = 'pending' | 'included' | 'excluded';

export type Verdict = 'accepted' | 'rejected';

/** One row of GET /api/scans. */
export interface Scan {
  scan_id: string;
  status: ScanStatus;
  position: string | null;
  gender: string;
  verdict: Verdict | null;
  exclusion_reason: string | null;
}

/** Sizes/indices along the three volume axes: 0=sagittal, 1=coronal, 2=axial. */
export type Triple = [number, number, number];

/** GET /api/scans/{id}/meta. */
export interface ScanMeta {
  scan_id: string;
  status: ScanStatus;
  verdict: Verdict | null;
  dims: Triple;
  spacing: Triple;
  label_layers: string[];
}

/** POST /api/scans/{id}/verdict response: the full updated record. */
export interface ScanRecord extends Scan {
  age: number | null;
  exclusion_detail: string;
  verdict_note: string;
  paths: Record<string, string>;
}
