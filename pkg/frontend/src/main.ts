/** Application entry point: owns the single AppState instance and re-renders
 * on every transition. All server facts flow in through the API client; the
 * only state invented locally is navigation (selection, indices, overlay). */

import { ApiError, listScans, postVerdict, scanMeta } from './api.js';
import { isFormTarget, keyIntent } from './keyboard.js';
import {
  applyRecord,
  initialState,
  openViewer,
  scrub,
  setActiveAxis,
  setIndex,
  toggleOverlay,
} from './state.js';
import type { AppState, Axis } from './state.js';
import type { Verdict } from './types.js';
import { createView } from './view.js';

let app: AppState = initialState();

const root = document.getElementById('app');
if (!root) throw new Error('missing #app mount point');

const view = createView(root, {
  onFilter: (filter) => update({ ...app, filter }),
  onSelect: (scanId) => void select(scanId),
  onRetry: () => void refreshScans(),
  onAxisIndex: (axis: Axis, index: number) => {
    if (app.viewer) update({ ...app, viewer: setIndex(app.viewer, axis, index) });
  },
  onActiveAxis: (axis: Axis) => {
    if (app.viewer) update({ ...app, viewer: setActiveAxis(app.viewer, axis) });
  },
  onOverlayToggle: () => {
    if (app.viewer) update({ ...app, viewer: toggleOverlay(app.viewer) });
  },
  onVerdict: (verdict) => void sendVerdict(verdict),
});

function update(next: AppState): void {
  app = next;
  view.render(app);
}

function fail(err: unknown): void {
  if (err instanceof ApiError && err.status === 0) {
    update({ ...app, connection: 'down' });
  } else {
    update({ ...app, notice: err instanceof Error ? err.message : String(err) });
  }
}

async function refreshScans(): Promise<void> {
  try {
    const scans = await listScans();
    update({ ...app, scans, connection: 'ok' });
  } catch (err) {
    fail(err);
  }
}

async function select(scanId: string): Promise<void> {
  try {
    const meta = await scanMeta(scanId);
    update({ ...app, viewer: openViewer(meta), notice: null, connection: 'ok' });
  } catch (err) {
    fail(err);
  }
}

async function sendVerdict(verdict: Verdict): Promise<void> {
  if (!app.viewer) return;
  try {
    const record = await postVerdict(app.viewer.scanId, verdict, view.verdictNote());
    update({
      ...app,
      scans: applyRecord(app.scans, record),
      notice: `${record.scan_id}: ${verdict}`,
      connection: 'ok',
    });
  } catch (err) {
    if (err instanceof ApiError && err.status === 409) {
      // Scan is no longer reviewable (e.g. already rejected); show the
      // server's reason and re-sync the roster with its view of the world.
      update({ ...app, notice: err.message });
      void refreshScans();
    } else {
      fail(err);
    }
  }
}

document.addEventListener('keydown', (event) => {
  if (!app.viewer || isFormTarget(event.target)) return;
  const intent = keyIntent(event.key);
  if (!intent) return;
  event.preventDefault(); // arrows would otherwise scroll the page
  if (intent.kind === 'scrub') {
    update({ ...app, viewer: scrub(app.viewer, intent.delta) });
  } else {
    void sendVerdict(intent.verdict);
  }
});

view.render(app);
void refreshScans();
