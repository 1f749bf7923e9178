/** Pure view-model. The rendered UI is a function of this state, which in
 * turn is built only from API responses plus local navigation choices —
 * nothing here invents scan facts the server did not report. All transitions
 * return fresh objects; callers re-render from the result. */

import type { Scan, ScanMeta, ScanStatus, Triple } from './types.js';

export type Axis = 0 | 1 | 2;

export type StatusFilter = 'all' | ScanStatus;

export type Connection = 'ok' | 'down';

export interface ViewerState {
  scanId: string;
  dims: Triple;
  spacing: Triple;
  /** Current slice index per axis, always within [0, dims[axis] - 1]. */
  indices: Triple;
  /** Axis the keyboard scrubs. */
  activeAxis: Axis;
  overlay: boolean;
  /** Whether the server has a label map to composite for this scan. */
  hasLabels: boolean;
}

export interface AppState {
  scans: Scan[];
  filter: StatusFilter;
  connection: Connection;
  viewer: ViewerState | null;
  /** Outcome of the last server action worth surfacing (e.g. a 409). */
  notice: string | null;
}

export function initialState(): AppState {
  return { scans: [], filter: 'all', connection: 'ok', viewer: null, notice: null };
}

/** Nearest valid slice index: integers in [0, size-1]; 0 for empty axes
 * and for garbage input (NaN from an unparseable slider value). */
export function clampIndex(index: number, size: number): number {
  if (size <= 0 || !Number.isFinite(index)) return 0;
  return Math.min(size - 1, Math.max(0, Math.trunc(index)));
}

export function visibleScans(scans: Scan[], filter: StatusFilter): Scan[] {
  if (filter === 'all') return scans;
  return scans.filter((s) => s.status === filter);
}

/** Message for an empty roster pane, or null when there are rows to show. */
export function emptyMessage(scans: Scan[], filter: StatusFilter): string | null {
  if (visibleScans(scans, filter).length > 0) return null;
  if (scans.length === 0) return 'No scans in the manifest yet.';
  return `No ${filter === 'all' ? '' : filter + ' '}scans match this filter.`;
}

/** Fold an updated record (e.g. a verdict response) back into the roster.
 * Replaces the matching row in place; unknown ids leave the roster alone
 * (the next full refresh will pick them up). */
export function applyRecord(scans: Scan[], record: Scan): Scan[] {
  return scans.map((s) =>
    s.scan_id === record.scan_id
      ? {
          scan_id: record.scan_id,
          status: record.status,
          position: record.position,
          gender: record.gender,
          verdict: record.verdict,
          exclusion_reason: record.exclusion_reason,
        }
      : s,
  );
}

/** Viewer opened on a scan: centered on the middle slice of every axis,
 * axial active, overlay on whenever the server has labels to show. */
export function openViewer(meta: ScanMeta): ViewerState {
  const dims = meta.dims;
  const hasLabels = meta.label_layers.length > 0;
  return {
    scanId: meta.scan_id,
    dims,
    spacing: meta.spacing,
    indices: [dims[0] >> 1, dims[1] >> 1, dims[2] >> 1],
    activeAxis: 2,
    overlay: hasLabels,
    hasLabels,
  };
}

export function setIndex(viewer: ViewerState, axis: Axis, index: number): ViewerState {
  const indices: Triple = [...viewer.indices];
  indices[axis] = clampIndex(index, viewer.dims[axis]);
  return { ...viewer, indices };
}

/** Step the active axis by delta slices, clamped at the volume ends. */
export function scrub(viewer: ViewerState, delta: number): ViewerState {
  return setIndex(viewer, viewer.activeAxis, viewer.indices[viewer.activeAxis] + delta);
}

export function setActiveAxis(viewer: ViewerState, axis: Axis): ViewerState {
  return { ...viewer, activeAxis: axis };
}

/** Overlay can only be on when the scan has labels. */
export function toggleOverlay(viewer: ViewerState): ViewerState {
  return { ...viewer, overlay: viewer.hasLabels && !viewer.overlay };
}
